use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use dqfield_cli::{run, Command, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "dqfield", version, about = "Deformation quantization experiments on a lattice scalar field")]
struct Args {
    /// Experiment to run.
    #[arg(value_enum)]
    command: Command,
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Print nothing on success.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let outcome = ExperimentConfig::load(&args.config).and_then(|mut config| {
        if let Some(seed) = args.seed {
            config.seed = seed;
        }
        let base = args.config.parent().unwrap_or(Path::new(".")).to_path_buf();
        let output = args
            .output
            .clone()
            .or_else(|| config.output_dir.as_ref().map(|d| base.join(d)))
            .unwrap_or_else(|| PathBuf::from("output"));
        run(args.command, config, &base, &output).map(|(artifacts, code)| (artifacts, code, output))
    });
    match outcome {
        Ok((artifacts, code, output)) => {
            if !args.quiet {
                let report = &artifacts.report;
                for c in &report.checks {
                    let status = if c.passed { "pass" } else { "FAIL" };
                    let kind = if c.hard { "" } else { " (soft)" };
                    println!("{status:4} {}{kind}: {:e} vs {:e}", c.name, c.value, c.bound);
                }
                let verdict = if report.passed { "passed" } else { "failed" };
                println!("{} {verdict}; report in {}", args.command, output.display());
            }
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

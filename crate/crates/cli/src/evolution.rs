//! Commands that integrate the lattice flow.

use dqfield::kleingordon::scattering::{check_linearization, estimate_wave_operator, scattering_operator};
use dqfield::kleingordon::Propagator;
use dqfield::{GeneratorLabel, ModeVector};
use serde_json::json;

use crate::report::{num, Artifacts, Check, Table};
use crate::{CliError, Context};

fn momentum_columns(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("P_{j}")).collect()
}

pub(crate) fn lattice_evolve(ctx: &Context) -> Result<Artifacts, CliError> {
    let n = &ctx.config.numerics;
    let t_final = *n.horizons.last().expect("validated");
    let steps = ctx.check_steps(t_final)?;
    let prop = ctx.propagator();
    let d = ctx.grid.d();
    let initial = match &ctx.config.inputs.initial {
        Some(path) => vec![ModeVector::from_json(ctx.grid.clone(), &ctx.read_input("initial", path)?)?],
        None => ctx.packets()?,
    };

    let mut header = vec!["sample".to_string(), "t".into(), "H".into()];
    header.extend(momentum_columns(d));
    header.push("drift".into());
    let mut table = Table::new(header);
    let mut files = Vec::new();
    let mut per_sample = Vec::new();
    let (mut worst_energy, mut worst_momentum) = (0.0f64, 0.0f64);
    for (s, v) in initial.iter().enumerate() {
        let e0 = prop.energy(v);
        let p0: Vec<_> = (0..d).map(|ax| prop.momentum(v, ax)).collect();
        let mut max_drift = 0.0f64;
        let mut max_p = 0.0f64;
        let mut row = |t: f64, u: &ModeVector, table: &mut Table| {
            let e = prop.energy(u);
            let drift = (e - e0).norm() / e0.norm().max(f64::MIN_POSITIVE);
            let mut cells = vec![s as f64, t, e.re];
            for (ax, p) in p0.iter().enumerate() {
                let pj = prop.momentum(u, ax);
                max_p = max_p.max((pj - p).norm());
                cells.push(pj.re);
            }
            cells.push(drift);
            max_drift = max_drift.max(drift);
            table.push_numbers(&cells);
        };
        row(0.0, v, &mut table);
        let dt = n.dt;
        let every = n.record_every;
        let out = prop.evolve_modes_from(v, 0.0, t_final, dt, |t, u| {
            let step = (t / dt).round() as usize;
            if step.is_multiple_of(every) || step == steps {
                row(t, u, &mut table);
            }
        })?;
        files.push((format!("final_{s}.json"), out.to_json()));
        per_sample.push(json!({
            "sample": s,
            "energy": num(e0.re),
            "max_energy_drift": max_drift,
            "max_momentum_drift": max_p,
        }));
        worst_energy = worst_energy.max(max_drift);
        worst_momentum = worst_momentum.max(max_p);
    }
    let tol = &n.tolerances;
    let checks = vec![
        Check::below("energy_drift", true, worst_energy, tol.energy_drift),
        Check::below("momentum_drift", true, worst_momentum, tol.momentum),
    ];
    let results = json!({
        "t_final": t_final,
        "steps": steps,
        "padded_points": prop.padded_points(),
        "samples": per_sample,
    });
    Ok(Artifacts {
        report: ctx.report(checks, results),
        table,
        files,
    })
}

pub(crate) fn wave_operators(ctx: &Context) -> Result<Artifacts, CliError> {
    let n = &ctx.config.numerics;
    for &t in &n.horizons {
        ctx.check_steps(t)?;
        ctx.check_steps(t / 2.0)?;
    }
    let prop = ctx.propagator();
    let samples = ctx.packets()?;
    let (estimate, images) = estimate_wave_operator(&prop, n.direction, &n.horizons, n.dt, n.ball, &samples)?;
    let gens = check_linearization(&prop, n.direction, &n.horizons, n.dt, &samples, Some(&images))?;

    let d = ctx.grid.d();
    let mut header = vec!["t".to_string(), "H".into()];
    header.extend(momentum_columns(d));
    header.push("drift".into());
    let mut table = Table::new(header);
    let residual = |label: GeneratorLabel, t: f64| {
        gens.iter()
            .find(|g| g.generator == label && g.horizon == t)
            .map_or(f64::NAN, |g| g.relative)
    };
    for &(t, drift) in &estimate.convergence_log {
        let mut cells = vec![t, residual(GeneratorLabel::P(0), t)];
        cells.extend((1..=d).map(|j| residual(GeneratorLabel::P(j), t)));
        cells.push(drift);
        table.push_numbers(&cells);
    }

    let tol = &n.tolerances;
    let last = *n.horizons.last().expect("validated");
    let h_series: Vec<f64> = n.horizons.iter().map(|&t| residual(GeneratorLabel::P(0), t)).collect();
    let p_worst = gens
        .iter()
        .filter(|g| matches!(g.generator, GeneratorLabel::P(j) if j > 0))
        .map(|g| g.relative)
        .fold(0.0, f64::max);
    let checks = vec![
        Check::below("hamiltonian_residual", true, residual(GeneratorLabel::P(0), last), tol.linearization),
        Check::below("momentum_residual", true, p_worst, tol.momentum),
        Check::holds("drift_decreasing", false, estimate.is_decreasing()),
        Check::holds("hamiltonian_residual_decreasing", false, h_series.windows(2).all(|w| w[1] < w[0])),
    ];
    let convergence = estimate.check_convergence().err().map(|e| e.to_string());
    let results = json!({
        "estimate": estimate,
        "convergence_diagnostic": convergence,
        "generators": gens,
    });
    Ok(Artifacts {
        report: ctx.report(checks, results),
        table,
        files: Vec::new(),
    })
}

pub(crate) fn scatter(ctx: &Context) -> Result<Artifacts, CliError> {
    let n = &ctx.config.numerics;
    for &t in &n.horizons {
        ctx.check_steps(2.0 * t)?;
    }
    let prop = ctx.propagator();
    let samples = ctx.packets()?;
    for s in &samples {
        n.ball.check(s)?;
    }
    let d = ctx.grid.d();
    let mut header = vec!["t".to_string(), "H".into()];
    header.extend(momentum_columns(d));
    header.push("drift".into());
    let mut table = Table::new(header);
    let mut files = Vec::new();
    let mut per_horizon = Vec::new();
    let last = *n.horizons.last().expect("validated");
    let (mut energy_last, mut momentum_worst) = (0.0f64, 0.0f64);
    for &t in &n.horizons {
        let mut energy = 0.0f64;
        let mut momentum = vec![0.0f64; d];
        let mut shift = 0.0f64;
        for (i, v) in samples.iter().enumerate() {
            let s = scattering_operator(&prop, t, n.dt, v)?;
            let h0 = Propagator::free_energy(v);
            energy = energy.max((Propagator::free_energy(&s) - h0).norm() / h0.norm().max(f64::MIN_POSITIVE));
            for (ax, m) in momentum.iter_mut().enumerate() {
                *m = m.max((prop.momentum(&s, ax) - prop.momentum(v, ax)).norm());
            }
            shift = shift.max(s.sub(v)?.l2_norm());
            if t == last {
                files.push((format!("scattered_{i}.json"), s.to_json()));
            }
        }
        let mut cells = vec![t, energy];
        cells.extend(&momentum);
        cells.push(shift);
        table.push_numbers(&cells);
        per_horizon.push(json!({
            "horizon": t,
            "free_energy_change": energy,
            "momentum_change": momentum,
            "max_shift": shift,
        }));
        if t == last {
            energy_last = energy;
        }
        momentum_worst = momentum.iter().copied().fold(momentum_worst, f64::max);
    }
    let tol = &n.tolerances;
    let checks = vec![
        Check::below("free_energy_conservation", true, energy_last, tol.scatter_energy),
        Check::below("momentum_conservation", true, momentum_worst, tol.momentum),
    ];
    Ok(Artifacts {
        report: ctx.report(checks, json!({ "per_horizon": per_horizon })),
        table,
        files,
    })
}

//! Commands on the formal side: closure, linearization and the normal product.

use std::sync::Arc;

use dqfield::formal::{check_rep, linearize_with, ProbeSet};
use dqfield::kleingordon::build_interaction;
use dqfield::kleingordon::generators::packet_probes;
use dqfield::{FormalSeriesInHbar, ModeGrid, Monomial, Poly, PolyFunctional};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::report::{num, Artifacts, Check, Table};
use crate::{CliError, Context};

pub(crate) fn lie_check(ctx: &Context) -> Result<Artifacts, CliError> {
    let n = &ctx.config.numerics;
    let set = build_interaction(&ctx.grid, &ctx.potential, n.degree_cap)?;
    let rep = set.rep()?;
    let free = set.free_rep()?;
    let probes = ProbeSet {
        points: packet_probes(&ctx.grid, n.probe_width, n.probe_amplitude)?,
        weight: ctx.grid.weight(),
    };
    let report = check_rep(&rep, n.tolerances.closure, Some(&probes))?;

    let mut table = Table::new(["left", "right", "degree", "coefficient", "probe", "interaction"]);
    let mut exact_worst = 0.0f64;
    let mut interaction_worst = 0.0f64;
    let mut interaction = Vec::new();
    let k = rep.basis.len();
    let mut index = 0;
    for a in 0..k {
        for b in a + 1..k {
            let pair = &report.pairs[index];
            index += 1;
            // What the interaction adds to the lattice defect of the free representation.
            let extra = rep.closure_defect(a, b)?.sub(&free.closure_defect(a, b)?)?;
            let per_degree: Vec<f64> = (1..=n.degree_cap).map(|d| extra.max_abs_degree(d)).collect();
            for (d, &coefficient) in pair.coefficient.iter().enumerate() {
                let probe = pair.probe.as_ref().map_or(f64::NAN, |p| p[d]);
                table.push(vec![
                    pair.left.to_string(),
                    pair.right.to_string(),
                    (d + 1).to_string(),
                    num(coefficient),
                    num(probe),
                    num(per_degree[d]),
                ]);
            }
            let extra_max = per_degree.iter().copied().fold(0.0, f64::max);
            interaction_worst = interaction_worst.max(extra_max);
            if !pair.involves_boost() && !pair.involves_rotation() {
                exact_worst = exact_worst.max(pair.max_coefficient());
            }
            interaction.push(json!({
                "left": pair.left.to_string(),
                "right": pair.right.to_string(),
                "per_degree": per_degree,
            }));
        }
    }
    let checks = vec![
        Check::below("closure_without_boosts_or_rotations", true, exact_worst, n.tolerances.closure),
        Check::below("interaction_closure_defect", false, interaction_worst, n.tolerances.closure),
    ];
    let results = json!({
        "closure": report,
        "interaction_defect": interaction,
        "hamiltonian_defect": set.hamiltonian_defect,
    });
    Ok(Artifacts {
        report: ctx.report(checks, results),
        table,
        files: Vec::new(),
    })
}

pub(crate) fn linearize(ctx: &Context) -> Result<Artifacts, CliError> {
    let n = &ctx.config.numerics;
    let tol = ctx.config.resonance_tol();
    let set = build_interaction(&ctx.grid, &ctx.potential, n.degree_cap)?;
    let lin = linearize_with(&set.rep()?, tol, n.resonance_policy)?;
    let report = &lin.report;

    let mut table = Table::new(["generator", "degree", "residual"]);
    for r in &report.residuals {
        for (d, v) in r.per_degree.iter().enumerate() {
            table.push(vec![r.generator.to_string(), (d + 1).to_string(), num(*v)]);
        }
    }
    let time = report
        .residual(dqfield::GeneratorLabel::P(0))
        .map_or(f64::NAN, |r| r.per_degree.iter().copied().fold(0.0, f64::max));
    let checks = vec![
        Check::below("time_translation_intertwining", true, time, n.tolerances.intertwining),
        Check::above("min_denominator", true, report.min_denominator, tol),
        Check::holds("no_obstructions", true, report.obstructions.is_empty()),
    ];
    Ok(Artifacts {
        report: ctx.report(checks, serde_json::to_value(report).expect("report serializes")),
        table,
        files: vec![("omega.json".into(), lin.omega.to_json())],
    })
}

const STAR_DEGREE: usize = 3;

/// Sparse random functional of degree `1..=STAR_DEGREE`.
fn random_functional(rng: &mut ChaCha8Rng, grid: &Arc<ModeGrid>, max_degree: usize) -> Result<PolyFunctional, CliError> {
    let vars = 2 * grid.len();
    let mut poly = Poly::new();
    for _ in 0..6 {
        let degree = rng.random_range(1..=STAR_DEGREE);
        let m = Monomial::from_vars((0..degree).map(|_| rng.random_range(0..vars))).expect("degree within range");
        poly.add_term(m, C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    }
    Ok(PolyFunctional::from_poly(grid.clone(), max_degree, poly)?)
}

pub(crate) fn star_check(ctx: &Context) -> Result<Artifacts, CliError> {
    let n = &ctx.config.numerics;
    let order = n.hbar_order;
    let tol = &n.tolerances;
    let mut files = Vec::new();
    let (f, g) = match (&ctx.config.inputs.left, &ctx.config.inputs.right) {
        (Some(l), Some(r)) => (
            PolyFunctional::from_json(ctx.grid.clone(), &ctx.read_input("left", l)?)?,
            PolyFunctional::from_json(ctx.grid.clone(), &ctx.read_input("right", r)?)?,
        ),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.config.seed);
            let f = random_functional(&mut rng, &ctx.grid, 3 * STAR_DEGREE)?;
            let g = random_functional(&mut rng, &ctx.grid, 3 * STAR_DEGREE)?;
            files.push(("left.json".to_string(), f.to_json()));
            files.push(("right.json".to_string(), g.to_json()));
            (f, g)
        }
    };
    // Room for every triple product without truncation.
    let top = 3 * f.degree().max(g.degree()).max(1);
    let f = f.with_max_degree(top.max(f.max_degree()))?;
    let g = g.with_max_degree(top.max(g.max_degree()))?;
    let pool = [("F", &f), ("G", &g)];

    let mut table = Table::new(["triple", "hbar_order", "residual", "scale"]);
    let mut per_order = vec![0.0f64; order + 1];
    let mut triples = Vec::new();
    for (xn, x) in pool {
        for (yn, y) in pool {
            for (zn, z) in pool {
                let name = format!("{xn}{yn}{zn}");
                let left = x.star_normal(y, order)?.star(&FormalSeriesInHbar::from_functional(z.clone(), order), order)?;
                let right = FormalSeriesInHbar::from_functional(x.clone(), order).star(&y.star_normal(z, order)?, order)?;
                let diff = left.sub(&right)?.max_abs_per_order();
                let scale = 1.0 + left.max_abs_per_order().into_iter().fold(0.0, f64::max);
                for (p, r) in diff.iter().enumerate() {
                    let relative = r / scale;
                    per_order[p] = per_order[p].max(relative);
                    table.push(vec![name.clone(), p.to_string(), num(*r), num(scale)]);
                }
                triples.push(json!({ "triple": name, "per_order": diff, "scale": scale }));
            }
        }
    }
    let bracket = f.star_bracket(&g, order)?;
    let bracket_residual = bracket.coeffs[0].sub(&f.poisson(&g)?)?.max_abs();
    let reverse = g.star_bracket(&f, order)?;
    let antisymmetry = bracket.add(&reverse)?.max_abs_per_order().into_iter().fold(0.0, f64::max);

    let mut checks: Vec<Check> = per_order
        .iter()
        .enumerate()
        .map(|(p, &r)| Check::below(format!("associativity_hbar{p}"), true, r, tol.associativity))
        .collect();
    checks.push(Check::below("bracket_classical_limit", true, bracket_residual, tol.bracket));
    checks.push(Check::below("bracket_antisymmetry", true, antisymmetry, tol.bracket));
    let results = json!({
        "hbar_order": order,
        "max_degree": top,
        "associativity_per_order": per_order,
        "triples": triples,
        "bracket_classical_limit": bracket_residual,
        "bracket_antisymmetry": antisymmetry,
    });
    Ok(Artifacts {
        report: ctx.report(checks, results),
        table,
        files,
    })
}

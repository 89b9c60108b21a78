//! Commands that transport the normal product by a linearizing map.

use dqfield::formal::linearize_with;
use dqfield::kleingordon::build_interaction;
use dqfield::kleingordon::scattering::{check_linearization, poisson_map_check};
use dqfield::pushforward::{
    check_ham_identity, check_ham_numeric, pullback, pullback_series, star_pm, working_degree, NumericTransport,
    PushedStarProduct, TruncationResidual,
};
use dqfield::{FormalSeries, ModeVector};
use num_complex::Complex64 as C64;
use serde_json::json;

use crate::config::TransportChoice;
use crate::report::{num, Artifacts, Check, Table};
use crate::{CliError, Context};

/// Largest grid on which the numerical Poisson-map spot check runs; each mode costs four flows.
const POISSON_CHECK_MODES: usize = 16;

/// `Omega` read from `inputs.omega`, or solved for at `working - 1`.
fn formal_omega(ctx: &Context) -> Result<(FormalSeries, &'static str), CliError> {
    let n = &ctx.config.numerics;
    if let Some(path) = &ctx.config.inputs.omega {
        let omega = FormalSeries::from_json(&ctx.read_input("omega", path)?)?;
        if omega.dim() != 2 * ctx.grid.len() {
            return Err(CliError::Config(format!(
                "inputs.omega: dimension {} does not match the grid ({})",
                omega.dim(),
                2 * ctx.grid.len()
            )));
        }
        return Ok((omega, "input"));
    }
    let cap = working_degree(n.degree_cap, n.hbar_order) - 1;
    let set = build_interaction(&ctx.grid, &ctx.potential, cap)?;
    let lin = linearize_with(&set.rep()?, ctx.config.resonance_tol(), n.resonance_policy)?;
    Ok((lin.omega, "linearized"))
}

fn formal_product(ctx: &Context) -> Result<(PushedStarProduct, FormalSeries, &'static str), CliError> {
    let (omega, source) = formal_omega(ctx)?;
    // The round trip is reported as a check rather than refused.
    let product = PushedStarProduct::formal(omega.clone(), f64::INFINITY)?;
    Ok((product, omega, source))
}

fn numeric_transport(ctx: &Context, horizon: f64) -> NumericTransport {
    let n = &ctx.config.numerics;
    NumericTransport {
        propagator: ctx.propagator(),
        direction: n.direction,
        horizon,
        dt: n.dt,
    }
}

fn check_horizons(ctx: &Context) -> Result<(), CliError> {
    for &t in &ctx.config.numerics.horizons {
        ctx.check_steps(t)?;
    }
    Ok(())
}

pub(crate) fn push_star(ctx: &Context) -> Result<Artifacts, CliError> {
    match ctx.config.numerics.transport {
        TransportChoice::Formal => push_star_formal(ctx),
        TransportChoice::Numeric => push_star_numeric(ctx),
    }
}

fn push_star_formal(ctx: &Context) -> Result<Artifacts, CliError> {
    let n = &ctx.config.numerics;
    let order = n.hbar_order;
    let cap = n.degree_cap;
    let (product, omega, source) = formal_product(ctx)?;
    let working = working_degree(cap, order);
    let omega_cap = omega.degree_cap();
    let inverse = match product.transport() {
        dqfield::pushforward::Transport::Formal { omega_inverse, .. } => omega_inverse.clone(),
        dqfield::pushforward::Transport::Numeric(_) => unreachable!("formal product"),
    };

    // Free generators carried to the interacting side: G_X = X o Omega^{-1}.
    let set = build_interaction(&ctx.grid, &dqfield::kleingordon::Potential::zero(), 1)?;
    let free: Vec<_> = set
        .basis
        .iter()
        .zip(&set.free_functionals)
        .map(|(l, f)| Ok((*l, f.with_max_degree(working)?)))
        .collect::<Result<_, CliError>>()?;
    let pushed: Vec<_> = free
        .iter()
        .map(|(l, f)| Ok((*l, pullback(f, &inverse)?)))
        .collect::<Result<_, CliError>>()?;

    let mut table = Table::new(["left", "right", "hbar_order", "definition_residual", "finite"]);
    let mut worst = 0.0f64;
    let mut all_finite = true;
    let mut pairs = Vec::new();
    for a in 0..pushed.len() {
        for b in a..pushed.len() {
            let (la, ga) = &pushed[a];
            let (lb, gb) = &pushed[b];
            let prod = star_pm(ga, gb, &product, order)?;
            let finite = prod.max_abs_per_order().iter().all(|x| x.is_finite());
            all_finite &= finite;
            let lhs = pullback_series(&prod, &omega)?;
            let rhs = free[a].1.star_normal(&free[b].1, order)?;
            let residual = TruncationResidual::new(&lhs.sub(&rhs)?, cap);
            let scale = 1.0 + rhs.max_abs_per_order().into_iter().fold(0.0, f64::max);
            for (p, per) in residual.represented.iter().enumerate() {
                let r = per.iter().copied().fold(0.0, f64::max) / scale;
                table.push(vec![la.to_string(), lb.to_string(), p.to_string(), num(r), finite.to_string()]);
            }
            worst = worst.max(residual.max_represented() / scale);
            pairs.push(json!({
                "left": la.to_string(),
                "right": lb.to_string(),
                "finite": finite,
                "scale": scale,
                "residual": residual,
            }));
        }
    }
    let round_trip = product.round_trip_residual();
    let checks = vec![
        Check::below("round_trip", true, round_trip, n.tolerances.round_trip),
        Check::holds("generator_products_finite", true, all_finite),
        Check::below("definition_residual", true, worst, n.tolerances.associativity),
    ];
    let results = json!({
        "mode": "formal",
        "omega_source": source,
        "omega_degree_cap": omega_cap,
        "working_degree": working,
        "round_trip": round_trip,
        "pairs": pairs,
    });
    Ok(Artifacts {
        report: ctx.report(checks, results),
        table,
        files: Vec::new(),
    })
}

fn push_star_numeric(ctx: &Context) -> Result<Artifacts, CliError> {
    let n = &ctx.config.numerics;
    check_horizons(ctx)?;
    let samples = ctx.packets()?;
    for s in &samples {
        n.ball.check(s)?;
    }
    let last = *n.horizons.last().expect("validated");
    let transport = numeric_transport(ctx, last);
    let prop = transport.propagator.clone();
    let images = samples.iter().map(|s| transport.apply(s)).collect::<Result<Vec<_>, _>>()?;
    let product = PushedStarProduct::numeric_with_images(transport.clone(), &samples, &images, f64::INFINITY)?;
    let gens = check_linearization(&prop, n.direction, &[last], n.dt, &samples, Some(&[images]))?;

    let mut table = Table::new(["generator", "horizon", "absolute", "relative"]);
    for g in &gens {
        table.push(vec![g.generator.to_string(), num(g.horizon), num(g.absolute), num(g.relative)]);
    }
    let worst = gens.iter().map(|g| g.relative).fold(0.0, f64::max);

    // {f o Omega, g o Omega} against {f, g} o Omega for f = a_0, g = abar_0.
    let poisson = if ctx.grid.len() <= POISSON_CHECK_MODES {
        let w = ctx.grid.weight();
        let omega0 = ctx.grid.omega(0);
        let f = |v: &ModeVector| v.a[0];
        let g = |v: &ModeVector| v.abar[0];
        let bracket = move |_: &ModeVector| C64::new(0.0, -4.0 * omega0 / w);
        let map = |v: &ModeVector| transport.apply(v);
        let (lhs, rhs) = poisson_map_check(&ctx.grid, map, &f, &g, &bracket, &samples[0], 1e-4)?;
        Some((lhs - rhs).norm() / rhs.norm())
    } else {
        None
    };

    let round_trip = product.round_trip_residual();
    let mut checks = vec![
        Check::below("round_trip", true, round_trip, n.tolerances.round_trip),
        Check::below("generator_intertwining", false, worst, n.tolerances.linearization),
    ];
    if let Some(p) = poisson {
        checks.push(Check::below("poisson_map", false, p, n.tolerances.linearization));
    }
    let results = json!({
        "mode": "numeric",
        "horizon": last,
        "round_trip": round_trip,
        "generators": gens,
        "poisson_map": poisson,
    });
    Ok(Artifacts {
        report: ctx.report(checks, results),
        table,
        files: Vec::new(),
    })
}

pub(crate) fn ham_check(ctx: &Context) -> Result<Artifacts, CliError> {
    match ctx.config.numerics.transport {
        TransportChoice::Formal => ham_check_formal(ctx),
        TransportChoice::Numeric => ham_check_numeric(ctx),
    }
}

fn ham_check_formal(ctx: &Context) -> Result<Artifacts, CliError> {
    let n = &ctx.config.numerics;
    let (product, omega, source) = formal_product(ctx)?;
    let mut table = Table::new(["k", "hbar_order", "degree", "residual", "boundary"]);
    let mut reports = Vec::new();
    let mut worst = 0.0f64;
    for &k in &n.powers {
        let r = check_ham_identity(&ctx.grid, &ctx.potential, &product, k, n.hbar_order, n.degree_cap)?;
        for (p, per) in r.residual.represented.iter().enumerate() {
            for (d, v) in per.iter().enumerate() {
                table.push(vec![k.to_string(), p.to_string(), d.to_string(), num(*v), "false".into()]);
            }
            for (j, v) in r.residual.boundary[p].iter().enumerate() {
                let d = n.degree_cap + 1 + j;
                table.push(vec![k.to_string(), p.to_string(), d.to_string(), num(*v), "true".into()]);
            }
        }
        worst = worst.max(r.residual.max_represented());
        reports.push(r);
    }
    let round_trip = product.round_trip_residual();
    let boundary = reports.iter().map(|r| r.residual.max_boundary()).fold(0.0, f64::max);
    let checks = vec![
        Check::below("round_trip", true, round_trip, n.tolerances.round_trip),
        Check::below("represented_residual", true, worst, n.tolerances.ham),
    ];
    let results = json!({
        "mode": "formal",
        "omega_source": source,
        "omega_degree_cap": omega.degree_cap(),
        "max_boundary_residual": boundary,
        "powers": reports,
    });
    Ok(Artifacts {
        report: ctx.report(checks, results),
        table,
        files: Vec::new(),
    })
}

fn ham_check_numeric(ctx: &Context) -> Result<Artifacts, CliError> {
    let n = &ctx.config.numerics;
    check_horizons(ctx)?;
    let samples = ctx.packets()?;
    for s in &samples {
        n.ball.check(s)?;
    }
    let prop = ctx.propagator();
    let reports = check_ham_numeric(&prop, n.direction, &n.horizons, n.dt, &samples, &n.powers, f64::INFINITY, None)?;

    let mut table = Table::new(["k", "horizon", "residual"]);
    let mut checks = Vec::new();
    for r in &reports {
        for &(t, v) in &r.per_horizon {
            table.push(vec![r.k.to_string(), num(t), num(v)]);
        }
        checks.push(Check::holds(format!("residual_decreasing_k{}", r.k), true, r.is_decreasing()));
    }
    let round_trip = reports[0].round_trip;
    checks.push(Check::below("round_trip", true, round_trip, n.tolerances.round_trip));
    let results = json!({
        "mode": "numeric",
        "hbar_order": 0,
        "powers": reports,
    });
    Ok(Artifacts {
        report: ctx.report(checks, results),
        table,
        files: Vec::new(),
    })
}

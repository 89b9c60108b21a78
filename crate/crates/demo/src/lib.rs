//! Browser bindings: three small interactive operations on top of `dqfield`.
//!
//! Each operation is a plain Rust function with a `js_` wrapper exported to
//! the page; the wrappers only convert errors.

use std::fmt::Write;

use dqfield::formal::{linearize_with, ResonancePolicy};
use dqfield::kleingordon::scattering::gaussian_packets;
use dqfield::kleingordon::{build_interaction, Potential, Propagator};
use dqfield::{GridSpec, ModeGrid, PolyFunctional};
use num_complex::Complex64 as C64;
use wasm_bindgen::prelude::*;

fn fail(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn one_mode_term(out: &mut String, z: C64, m: usize, n: usize) {
    let _ = write!(out, "({:+.6}{:+.6}i)", z.re, z.im);
    if m > 0 {
        let _ = write!(out, " ā^{m}");
    }
    if n > 0 {
        let _ = write!(out, " a^{n}");
    }
}

/// Normal star product `ā^m a^n ⋆ ā^p a^q` on the zero-momentum mode of
/// unit frequency, one line per power of ħ.
pub fn star_monomials(m: usize, n: usize, p: usize, q: usize, hbar_order: usize) -> Result<String, String> {
    if m + n + p + q > 12 || hbar_order > 6 {
        return Err(fail("keep the total degree at most 12 and the order at most 6"));
    }
    let grid = ModeGrid::new(GridSpec::new(1, 2, std::f64::consts::TAU, 1.0)).map_err(fail)?;
    let a_var = grid.len();
    let top = m + n + p + q;
    let one = C64::new(1.0, 0.0);
    let f = PolyFunctional::monomial(grid.clone(), top, &vec![0; m], &vec![0; n], one).map_err(fail)?;
    let g = PolyFunctional::monomial(grid, top, &vec![0; p], &vec![0; q], one).map_err(fail)?;
    let product = f.star_normal(&g, hbar_order).map_err(fail)?;
    let mut out = String::new();
    for (k, c) in product.coeffs.iter().enumerate() {
        let _ = write!(out, "ħ^{k}:");
        let mut terms = c.poly().sorted_terms();
        terms.retain(|(_, z)| z.norm() > 1e-14);
        if terms.is_empty() {
            out.push_str(" 0");
        }
        for (mono, z) in terms {
            let abar = mono.multiplicity(0);
            let a = mono.multiplicity(a_var);
            out.push(' ');
            one_mode_term(&mut out, z, abar, a);
        }
        out.push('\n');
    }
    Ok(out)
}

/// Total energy of a Gaussian packet under the `g φ⁴/4` flow in one
/// dimension, sampled every `record` steps. Returns `[t0, H0, t1, H1, ...]`.
pub fn energy_trace(n: usize, g: f64, amplitude: f64, t_final: f64, dt: f64, record: usize) -> Result<Vec<f64>, String> {
    if !(8..=256).contains(&n) || record == 0 {
        return Err(fail("use between 8 and 256 modes and record at least every step"));
    }
    let grid = ModeGrid::new(GridSpec::new(1, n, 32.0, 1.0)).map_err(fail)?;
    let potential = Potential::phi4(g);
    potential.positivity_certificate(1.0).map_err(fail)?;
    let prop = Propagator::new(grid.clone(), potential);
    let v = gaussian_packets(&grid, 1, 0, amplitude).map_err(fail)?.remove(0);
    let mut out = vec![0.0, prop.energy(&v).re];
    let mut step = 0usize;
    prop.evolve_modes_from(&v, 0.0, t_final, dt, |t, u| {
        step += 1;
        if step.is_multiple_of(record) {
            out.push(t);
            out.push(prop.energy(u).re);
        }
    })
    .map_err(fail)?;
    Ok(out)
}

/// Order-by-order linearization of the `g φ^power / power` field on a few
/// modes; returns the residual report as JSON.
pub fn linearize_report(modes: usize, power: usize, g: f64, degree_cap: usize) -> Result<String, String> {
    if !(1..=8).contains(&modes) || !(3..=4).contains(&power) || !(2..=4).contains(&degree_cap) {
        return Err(fail("use 1 to 8 modes, power 3 or 4 and degree cap 2 to 4"));
    }
    let grid = ModeGrid::new(GridSpec::new(1, modes, std::f64::consts::TAU, 1.0)).map_err(fail)?;
    let potential = if power == 3 { Potential::phi3(g) } else { Potential::phi4(g) };
    let set = build_interaction(&grid, &potential, degree_cap).map_err(fail)?;
    let rep = set.rep().map_err(fail)?;
    let lin = linearize_with(&rep, 0.01, ResonancePolicy::Report).map_err(fail)?;
    serde_json::to_string_pretty(&lin.report).map_err(fail)
}

#[wasm_bindgen(js_name = starMonomials)]
pub fn js_star_monomials(m: usize, n: usize, p: usize, q: usize, hbar_order: usize) -> Result<String, JsValue> {
    star_monomials(m, n, p, q, hbar_order).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = energyTrace)]
pub fn js_energy_trace(n: usize, g: f64, amplitude: f64, t_final: f64, dt: f64, record: usize) -> Result<Vec<f64>, JsValue> {
    energy_trace(n, g, amplitude, t_final, dt, record).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = linearizeReport)]
pub fn js_linearize_report(modes: usize, power: usize, g: f64, degree_cap: usize) -> Result<String, JsValue> {
    linearize_report(modes, power, g, degree_cap).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn abar_star_a_has_a_first_order_contraction() {
        let text = star_monomials(0, 1, 1, 0, 2).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].contains("ā^1 a^1"), "{text}");
        assert!(!lines[1].ends_with(" 0"), "{text}");
        assert!(lines[2].ends_with(" 0"), "{text}");
    }

    #[test]
    fn energy_trace_is_flat() {
        let trace = energy_trace(32, 0.1, 0.1, 2.0, 0.01, 50).unwrap();
        assert_eq!(trace.len(), 10);
        let e0 = trace[1];
        for pair in trace.chunks(2) {
            assert!((pair[1] - e0).abs() < 1e-6 * e0, "{pair:?}");
        }
    }

    #[test]
    fn linearize_report_is_json() {
        let text = linearize_report(2, 4, 0.1, 3).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v["residuals"].is_array());
        assert!(linearize_report(0, 4, 0.1, 3).is_err());
    }
}

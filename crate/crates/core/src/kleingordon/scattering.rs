//! Numerical wave operators `Omega_+- = lim U_{-+T} U1_{+-T}` and the
//! scattering operator `S = (Omega_+)^{-1} Omega_-`.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::formal::GeneratorLabel;
use crate::modes::{decompose, reconstruct, CauchyData, ModeGrid, ModeVector};

use super::flow::{free_flow, Propagator};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `Omega_+`: free data describing the field as `t -> +infinity`.
    Plus,
    /// `Omega_-`: free data describing the field as `t -> -infinity`.
    Minus,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Plus => 1.0,
            Direction::Minus => -1.0,
        }
    }
}

/// Small-data ball `|phi|_inf <= phi_max`, `|pi|_inf <= pi_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallDataBall {
    pub phi_max: f64,
    pub pi_max: f64,
}

impl Default for SmallDataBall {
    fn default() -> Self {
        SmallDataBall {
            phi_max: 0.1,
            pi_max: 0.1,
        }
    }
}

impl SmallDataBall {
    pub fn check(&self, v: &ModeVector) -> Result<()> {
        let data = reconstruct(v)?;
        let (phi, pi) = data.max_abs();
        if phi > self.phi_max * (1.0 + 1e-12) || pi > self.pi_max * (1.0 + 1e-12) {
            return Err(Error::Invalid(format!(
                "data outside the small-data ball: |phi| = {phi:e} (max {}), |pi| = {pi:e} (max {})",
                self.phi_max, self.pi_max
            )));
        }
        Ok(())
    }
}

/// `Omega_T psi`: free flow to `+-T`, then the interacting flow back to 0.
pub fn wave_operator(
    prop: &Propagator,
    direction: Direction,
    horizon: f64,
    dt: f64,
    v_free: &ModeVector,
) -> Result<ModeVector> {
    let t = direction.sign() * horizon;
    prop.evolve_modes(&free_flow(v_free, t), -t, dt)
}

/// `(Omega_T)^{-1} psi`: interacting flow to `+-T`, then the free flow back.
pub fn inverse_wave_operator(
    prop: &Propagator,
    direction: Direction,
    horizon: f64,
    dt: f64,
    v: &ModeVector,
) -> Result<ModeVector> {
    let t = direction.sign() * horizon;
    Ok(free_flow(&prop.evolve_modes(v, t, dt)?, -t))
}

/// `S v = U1_{-T} U_{2T} U1_{-T} v`, i.e. `(Omega_+)^{-1} Omega_-` at horizon `T`.
pub fn scattering_operator(prop: &Propagator, horizon: f64, dt: f64, v: &ModeVector) -> Result<ModeVector> {
    let past = free_flow(v, -horizon);
    let future = prop.evolve_modes(&past, 2.0 * horizon, dt)?;
    Ok(free_flow(&future, -horizon))
}

/// Wave operator at a sequence of horizons with its convergence log.
#[derive(Clone, Debug, Serialize)]
pub struct WaveOperatorEstimate {
    pub direction: Direction,
    pub dt: f64,
    pub ball: SmallDataBall,
    /// `(T, steps)` for each horizon.
    pub horizons: Vec<(f64, usize)>,
    /// `(T, max over samples of |Omega_T psi - Omega_{T/2} psi|)`.
    pub convergence_log: Vec<(f64, f64)>,
}

impl WaveOperatorEstimate {
    /// Whether the drift decreases strictly from each horizon to the next.
    pub fn is_decreasing(&self) -> bool {
        self.convergence_log.windows(2).all(|w| w[1].1 < w[0].1)
    }

    /// `Err(NoConvergence)` at the first horizon where the drift did not decrease.
    pub fn check_convergence(&self) -> Result<()> {
        for w in self.convergence_log.windows(2) {
            if w[1].1 >= w[0].1 {
                return Err(Error::NoConvergence {
                    horizon: w[1].0,
                    drift: w[1].1,
                    previous: w[0].1,
                });
            }
        }
        Ok(())
    }

    pub fn largest_horizon(&self) -> f64 {
        self.horizons.iter().map(|h| h.0).fold(0.0, f64::max)
    }

    pub fn apply(&self, prop: &Propagator, v_free: &ModeVector) -> Result<ModeVector> {
        self.ball.check(v_free)?;
        wave_operator(prop, self.direction, self.largest_horizon(), self.dt, v_free)
    }
}

/// Computes `Omega_T` and `Omega_{T/2}` on every sample and records the drift.
/// Returns the estimate together with `Omega_T psi` per horizon and sample.
pub fn estimate_wave_operator(
    prop: &Propagator,
    direction: Direction,
    horizons: &[f64],
    dt: f64,
    ball: SmallDataBall,
    samples: &[ModeVector],
) -> Result<(WaveOperatorEstimate, Vec<Vec<ModeVector>>)> {
    for s in samples {
        ball.check(s)?;
    }
    // Omega at every horizon and half horizon, each computed once.
    let mut needed: Vec<f64> = horizons.iter().flat_map(|&t| [t, t / 2.0]).collect();
    needed.sort_by(f64::total_cmp);
    needed.dedup();
    let mut cache: Vec<(f64, Vec<ModeVector>)> = Vec::with_capacity(needed.len());
    for &t in &needed {
        let mapped = samples
            .iter()
            .map(|s| wave_operator(prop, direction, t, dt, s))
            .collect::<Result<Vec<_>>>()?;
        cache.push((t, mapped));
    }
    let lookup = |t: f64| &cache.iter().find(|(h, _)| *h == t).expect("horizon computed").1;
    let mut log = Vec::new();
    let mut steps = Vec::new();
    let mut images = Vec::new();
    for &t in horizons {
        steps.push((t, prop.step_count(t, dt)?));
        let (full, half) = (lookup(t), lookup(t / 2.0));
        let mut drift = 0.0f64;
        for (f, h) in full.iter().zip(half) {
            drift = drift.max(f.sub(h)?.l2_norm());
        }
        log.push((t, drift));
        images.push(full.clone());
    }
    Ok((
        WaveOperatorEstimate {
            direction,
            dt,
            ball,
            horizons: steps,
            convergence_log: log,
        },
        images,
    ))
}

/// Residual of one generator at one horizon.
#[derive(Clone, Debug, Serialize)]
pub struct GeneratorCheck {
    pub generator: GeneratorLabel,
    pub horizon: f64,
    /// `max over samples |G(Omega psi) - G_free(psi)|`.
    pub absolute: f64,
    /// The same divided by `H0(psi)`, the energy scale of the sample.
    pub relative: f64,
}

/// `|G(Omega_T psi) - G_free(psi)|` for every generator, sample and horizon.
pub fn check_linearization(
    prop: &Propagator,
    direction: Direction,
    horizons: &[f64],
    dt: f64,
    samples: &[ModeVector],
    images: Option<&[Vec<ModeVector>]>,
) -> Result<Vec<GeneratorCheck>> {
    let labels = prop.generator_labels();
    let mut out = Vec::new();
    for (h, &t) in horizons.iter().enumerate() {
        let mapped: Vec<ModeVector> = match images {
            Some(imgs) => imgs[h].clone(),
            None => samples
                .iter()
                .map(|s| wave_operator(prop, direction, t, dt, s))
                .collect::<Result<_>>()?,
        };
        for &label in &labels {
            let mut absolute = 0.0f64;
            let mut relative = 0.0f64;
            for (s, m) in samples.iter().zip(&mapped) {
                let free = prop.free_generator(label, s)?;
                let inter = prop.generator(label, m)?;
                let diff = (inter - free).norm();
                let scale = Propagator::free_energy(s).norm().max(f64::MIN_POSITIVE);
                absolute = absolute.max(diff);
                relative = relative.max(diff / scale);
            }
            out.push(GeneratorCheck {
                generator: label,
                horizon: t,
                absolute,
                relative,
            });
        }
    }
    Ok(out)
}

/// Deterministic Gaussian wave packets inside the small-data ball.
///
/// Each packet has `phi = A e^{-r^2 / 2 s^2} cos(k0 . x + theta)` and a
/// matching `pi`, with width `s` in `[1.5, 2]`, centre within a quarter box
/// of the origin, and amplitude chosen so that both sup norms stay at or
/// below `amplitude`.
pub fn gaussian_packets(grid: &Arc<ModeGrid>, count: usize, seed: u64, amplitude: f64) -> Result<Vec<ModeVector>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = grid.d();
    let l = grid.box_length();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let width: f64 = rng.random_range(1.5..2.0);
        let mut centre = [0.0f64; 3];
        let mut k0 = [0.0f64; 3];
        for ax in 0..d {
            centre[ax] = rng.random_range(-0.125..0.125) * l;
            k0[ax] = rng.random_range(-0.6..0.6);
        }
        let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let speed: f64 = rng.random_range(0.2..0.8);
        let shape = move |x: &[f64], phase: f64| {
            let mut r2 = 0.0;
            let mut arg = theta + phase;
            for ax in 0..d {
                let dx = x[ax] - centre[ax];
                r2 += dx * dx;
                arg += k0[ax] * x[ax];
            }
            (-r2 / (2.0 * width * width)).exp() * arg.cos()
        };
        let data = CauchyData::sample(grid.clone(), |x| shape(x, 0.0), |x| speed * shape(x, 1.0));
        let (phi, pi) = data.max_abs();
        let scale = amplitude / phi.max(pi).max(f64::MIN_POSITIVE);
        let scaled = CauchyData::new(
            grid.clone(),
            data.phi.iter().map(|p| p * scale).collect(),
            data.pi.iter().map(|p| p * scale).collect(),
        )?;
        out.push(decompose(&scaled)?);
    }
    Ok(out)
}

/// `{F o Omega, G o Omega}(v)` by holomorphic central differences, for
/// quadratic bilinears `F`, `G`. Returns the bracket value and `{F, G}(Omega v)`.
pub fn poisson_map_check<M>(
    grid: &Arc<ModeGrid>,
    map: M,
    f: &dyn Fn(&ModeVector) -> C64,
    g: &dyn Fn(&ModeVector) -> C64,
    bracket: &dyn Fn(&ModeVector) -> C64,
    v: &ModeVector,
    step: f64,
) -> Result<(C64, C64)>
where
    M: Fn(&ModeVector) -> Result<ModeVector>,
{
    let n = grid.len();
    let w = grid.weight();
    let z = v.coords();
    let mut grad_f = vec![C64::default(); 2 * n];
    let mut grad_g = vec![C64::default(); 2 * n];
    for u in 0..2 * n {
        let mut zp = z.clone();
        let mut zm = z.clone();
        zp[u] += step;
        zm[u] -= step;
        let p = map(&ModeVector::from_coords(grid.clone(), &zp)?)?;
        let m = map(&ModeVector::from_coords(grid.clone(), &zm)?)?;
        grad_f[u] = (f(&p) - f(&m)) / (2.0 * step);
        grad_g[u] = (g(&p) - g(&m)) / (2.0 * step);
    }
    let mut lhs = C64::default();
    for i in 0..n {
        let s = C64::new(0.0, -2.0) * (2.0 * grid.omega(i) / w);
        lhs += s * (grad_f[n + i] * grad_g[i] - grad_f[i] * grad_g[n + i]);
    }
    let image = map(v)?;
    Ok((lhs, bracket(&image)))
}

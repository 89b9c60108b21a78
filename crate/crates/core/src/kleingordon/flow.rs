//! Free and interacting time evolution in mode space.
//!
//! The interacting flow is Strang-split into the exact free flow and a
//! "kick" generated by `U = int V(phi)`. The kick leaves `phi` untouched, so
//! its exact flow is the shear `v + tau X_U(v)`; it is evaluated on a padded
//! grid fine enough that every integral of the band-limited field is exact.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fft::FftNd;
use crate::formal::GeneratorLabel;
use crate::modes::{decompose, reconstruct, same_grid, CauchyData, ModeGrid, ModeVector};

use super::generators::{free_linear_generators, sawtooth_moment, Bilinear};
use super::potential::Potential;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Exact free evolution: `abar e^{i omega t}`, `a e^{-i omega t}`.
pub fn free_flow(v: &ModeVector, t: f64) -> ModeVector {
    let grid = &v.grid;
    let mut out = v.clone();
    for i in 0..grid.len() {
        let phase = C64::from_polar(1.0, grid.omega(i) * t);
        out.abar[i] *= phase;
        out.a[i] *= phase.conj();
    }
    out
}

/// Smallest `2^a 3^b 5^c` that is at least `n`.
fn smooth_size(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// An oversampled position grid holding products of band-limited fields.
struct Padded {
    m: usize,
    fft: FftNd,
    /// Padded index of `+k_i` and of `-k_i` for every mode.
    plus: Vec<usize>,
    minus: Vec<usize>,
}

impl Padded {
    /// Grid resolving every frequency up to `max_freq` without aliasing onto
    /// the mode window.
    fn new(grid: &ModeGrid, min_points: usize) -> Padded {
        let m = smooth_size(min_points.max(grid.n_per_axis()));
        let d = grid.d();
        let index = |z: &[i64; 3], sign: i64| {
            (0..d).fold(0usize, |acc, ax| acc * m + (sign * z[ax]).rem_euclid(m as i64) as usize)
        };
        let plus = (0..grid.len()).map(|i| index(&grid.label(i), 1)).collect();
        let minus = (0..grid.len()).map(|i| index(&grid.label(i), -1)).collect();
        Padded {
            m,
            fft: FftNd::new(&vec![m; d]),
            plus,
            minus,
        }
    }

    fn len(&self) -> usize {
        self.fft.len()
    }
}

/// Split-step integrator for the field with potential `V`.
pub struct Propagator {
    grid: Arc<ModeGrid>,
    potential: Potential,
    active: Vec<bool>,
    kick_grid: Option<Padded>,
    moment_grid: std::sync::OnceLock<Option<Padded>>,
    free_bilinear: std::sync::OnceLock<Vec<(GeneratorLabel, Bilinear)>>,
}

impl std::fmt::Debug for Propagator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Propagator")
            .field("grid", self.grid.spec())
            .field("potential", &self.potential)
            .finish()
    }
}

impl Propagator {
    pub fn new(grid: Arc<ModeGrid>, potential: Potential) -> Self {
        let active = (0..grid.len()).map(|i| !grid.is_nyquist(i)).collect();
        let k = potential.degree();
        let half = grid.n_per_axis() / 2 - 1;
        let kick_grid = (!potential.is_zero()).then(|| Padded::new(&grid, k * half + 1));
        Propagator {
            grid,
            potential,
            active,
            kick_grid,
            moment_grid: std::sync::OnceLock::new(),
            free_bilinear: std::sync::OnceLock::new(),
        }
    }

    pub fn grid(&self) -> &Arc<ModeGrid> {
        &self.grid
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    /// Points per axis of the padded grid used by the kick (0 without interaction).
    pub fn padded_points(&self) -> usize {
        self.kick_grid.as_ref().map_or(0, |p| p.m)
    }

    /// `phi(x)` on a padded grid, from independent `abar` and `a` (complex in general).
    fn field_on(&self, pad: &Padded, v: &ModeVector) -> Vec<C64> {
        let c = self.grid.field_constant();
        let mut buf = vec![C64::default(); pad.len()];
        for i in 0..self.grid.len() {
            if !self.active[i] {
                continue;
            }
            let s = c / self.grid.omega(i);
            buf[pad.plus[i]] += s * v.a[i];
            buf[pad.minus[i]] += s * v.abar[i];
        }
        pad.fft.inverse(&mut buf);
        buf
    }

    /// Exact flow of `U` for time `tau`.
    pub fn kick(&self, v: &mut ModeVector, tau: f64) {
        let Some(pad) = &self.kick_grid else { return };
        let mut g = self.field_on(pad, v);
        for x in g.iter_mut() {
            *x = self.potential.derivative_c(*x);
        }
        pad.fft.forward(&mut g);
        let d = self.grid.d();
        let s = tau / (2.0 * PI).powf(d as f64 / 2.0) * self.grid.volume() / pad.len() as f64;
        for i in 0..self.grid.len() {
            if !self.active[i] {
                continue;
            }
            v.a[i] += -I * s * g[pad.plus[i]];
            v.abar[i] += I * s * g[pad.minus[i]];
        }
    }

    fn check_finite(v: &ModeVector, time: f64) -> Result<()> {
        if v.abar.iter().chain(&v.a).all(|z| z.re.is_finite() && z.im.is_finite()) {
            Ok(())
        } else {
            Err(Error::BlowUp { time })
        }
    }

    /// Number of steps of size `dt` covering `t`; `t` must be a multiple of `dt`.
    pub fn step_count(&self, t: f64, dt: f64) -> Result<usize> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Invalid(format!("time step {dt} must be positive")));
        }
        if !t.is_finite() {
            return Err(Error::Invalid(format!("final time {t} is not finite")));
        }
        let max_omega = self.grid.omegas().iter().copied().fold(0.0, f64::max);
        if dt * max_omega >= PI {
            return Err(Error::Invalid(format!(
                "time step {dt} too large: dt * max(omega) = {} must stay below pi",
                dt * max_omega
            )));
        }
        let steps = (t.abs() / dt).round();
        if (steps * dt - t.abs()).abs() > 1e-9 * t.abs().max(dt) {
            return Err(Error::Invalid(format!("final time {t} is not a multiple of dt = {dt}")));
        }
        Ok(steps as usize)
    }

    /// Interacting flow for time `t` (either sign) with Strang steps of size `dt`.
    pub fn evolve_modes(&self, v: &ModeVector, t: f64, dt: f64) -> Result<ModeVector> {
        self.evolve_modes_from(v, 0.0, t, dt, |_, _| {})
    }

    /// As [`Propagator::evolve_modes`], calling `observe(time, state)` after every step.
    pub fn evolve_modes_from<F: FnMut(f64, &ModeVector)>(
        &self,
        v: &ModeVector,
        t0: f64,
        t: f64,
        dt: f64,
        mut observe: F,
    ) -> Result<ModeVector> {
        same_grid(&self.grid, &v.grid)?;
        let steps = self.step_count(t, dt)?;
        let h = if t < 0.0 { -dt } else { dt };
        let mut state = v.clone();
        if self.kick_grid.is_none() {
            let out = free_flow(v, steps as f64 * h);
            observe(t0 + steps as f64 * h, &out);
            return Ok(out);
        }
        for s in 0..steps {
            self.kick(&mut state, h / 2.0);
            state = free_flow(&state, h);
            self.kick(&mut state, h / 2.0);
            let time = t0 + (s + 1) as f64 * h;
            Self::check_finite(&state, time)?;
            observe(time, &state);
        }
        Ok(state)
    }

    /// Interacting evolution of Cauchy data.
    pub fn evolve(&self, data: &CauchyData, t_final: f64, dt: f64) -> Result<CauchyData> {
        same_grid(&self.grid, &data.grid)?;
        let v = decompose(data)?;
        let out = self.evolve_modes(&v, t_final, dt)?;
        reconstruct(&out)
    }

    /// `U = int V(phi)`, exact for the band-limited field.
    pub fn interaction_energy(&self, v: &ModeVector) -> C64 {
        let Some(pad) = &self.kick_grid else {
            return C64::default();
        };
        let phi = self.field_on(pad, v);
        let sum: C64 = phi.iter().map(|&p| self.potential.value_c(p)).sum();
        sum * (self.grid.volume() / pad.len() as f64)
    }

    /// `H0 = sum (w/2) abar_i a_i`.
    pub fn free_energy(v: &ModeVector) -> C64 {
        let w = v.grid.weight();
        v.abar.iter().zip(&v.a).map(|(b, a)| b * a).sum::<C64>() * (w / 2.0)
    }

    pub fn energy(&self, v: &ModeVector) -> C64 {
        Self::free_energy(v) + self.interaction_energy(v)
    }

    /// `U_j = int x_j V(phi)` with the sawtooth coordinate.
    pub fn interaction_moment(&self, v: &ModeVector, axis: usize) -> C64 {
        if self.potential.is_zero() {
            return C64::default();
        }
        let pad = self
            .moment_grid
            .get_or_init(|| {
                let k = self.potential.degree();
                let half = self.grid.n_per_axis() / 2 - 1;
                Some(Padded::new(&self.grid, 2 * k * half + 1))
            })
            .as_ref()
            .expect("initialized with a grid");
        let mut f = self.field_on(pad, v);
        for x in f.iter_mut() {
            *x = self.potential.value_c(*x);
        }
        pad.fft.forward(&mut f);
        // Fourier coefficient c_q = f_hat[q] / M^d; int x_j e^{iqx} = L^d delta_perp I(q_j).
        let d = self.grid.d();
        let m = pad.m;
        let dk = self.grid.dk();
        let scale = self.grid.volume() / pad.len() as f64;
        let centred = |j: usize| if j <= m / 2 { j as i64 } else { j as i64 - m as i64 };
        let mut acc = C64::default();
        let stride = m.pow((d - 1 - axis) as u32);
        for t in 1..m {
            let idx = t * stride;
            acc += f[idx] * sawtooth_moment(dk, centred(t));
        }
        acc * scale
    }

    fn free_generators(&self) -> &[(GeneratorLabel, Bilinear)] {
        self.free_bilinear.get_or_init(|| {
            free_linear_generators(&self.grid)
                .into_iter()
                .map(|(label, gen)| (label, gen.bilinear(&self.grid).0))
                .collect()
        })
    }

    pub fn generator_labels(&self) -> Vec<GeneratorLabel> {
        self.free_generators().iter().map(|(l, _)| *l).collect()
    }

    /// Value of a free generator functional at `v`.
    pub fn free_generator(&self, label: GeneratorLabel, v: &ModeVector) -> Result<C64> {
        let (_, b) = self
            .free_generators()
            .iter()
            .find(|(l, _)| *l == label)
            .ok_or_else(|| Error::Invalid(format!("unknown generator {label}")))?;
        Ok(b.evaluate(v))
    }

    /// Value of the interacting generator functional at `v`.
    pub fn generator(&self, label: GeneratorLabel, v: &ModeVector) -> Result<C64> {
        let free = self.free_generator(label, v)?;
        Ok(match label {
            GeneratorLabel::P(0) => free + self.interaction_energy(v),
            GeneratorLabel::M(0, j) => free + self.interaction_moment(v, j - 1),
            _ => free,
        })
    }

    /// `P_j = -sum (w k_j / (2 omega)) abar_i a_i`, for `axis = j - 1`.
    pub fn momentum(&self, v: &ModeVector, axis: usize) -> C64 {
        let w = self.grid.weight();
        (0..self.grid.len())
            .map(|i| -w * self.grid.momentum(i, axis) / (2.0 * self.grid.omega(i)) * v.abar[i] * v.a[i])
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::GridSpec;

    #[test]
    fn smooth_sizes() {
        assert_eq!(smooth_size(125), 125);
        assert_eq!(smooth_size(127), 128);
        assert_eq!(smooth_size(7), 8);
        assert_eq!(smooth_size(249), 250);
    }

    #[test]
    fn free_flow_is_a_group_and_keeps_energy() {
        let g = ModeGrid::new(GridSpec::new(2, 8, 9.0, 1.0)).unwrap();
        let data = CauchyData::sample(g.clone(), |x| (-(x[0] * x[0] + x[1] * x[1]) / 4.0).exp(), |x| 0.3 * x[0]);
        let v = decompose(&data).unwrap();
        let a = free_flow(&free_flow(&v, 0.7), 1.1);
        let b = free_flow(&v, 1.8);
        assert!(a.sub(&b).unwrap().max_abs() < 1e-12 * v.max_abs());
        let e0 = Propagator::free_energy(&v);
        let e1 = Propagator::free_energy(&b);
        assert!((e0 - e1).norm() < 1e-12 * e0.norm());
        assert!(free_flow(&v, 0.0).sub(&v).unwrap().max_abs() == 0.0);
    }

    #[test]
    fn free_energy_is_lattice_energy() {
        // H0 equals the lattice energy 1/2 sum dx^d (pi^2 + phi omega^2 phi).
        let g = ModeGrid::new(GridSpec::new(1, 16, 11.0, 1.3)).unwrap();
        let data = CauchyData::sample(g.clone(), |x| (x[0] * 0.7).sin() + 0.2, |x| (-(x[0] * x[0])).exp());
        let v = decompose(&data).unwrap();
        let mut phi: Vec<C64> = data.phi.iter().map(|&p| C64::new(p, 0.0)).collect();
        let fft = FftNd::new(&[16]);
        fft.forward(&mut phi);
        for (i, p) in phi.iter_mut().enumerate() {
            *p *= g.omega(i).powi(2) / 16.0;
        }
        fft.inverse(&mut phi);
        let lattice: f64 = (0..16)
            .map(|s| 0.5 * g.dx() * (data.pi[s].powi(2) + data.phi[s] * phi[s].re))
            .sum();
        let h0 = Propagator::free_energy(&v);
        assert!((h0.re - lattice).abs() < 1e-12 * lattice);
        assert!(h0.im.abs() < 1e-14);
    }

    #[test]
    fn kick_changes_only_the_momentum_field() {
        let g = ModeGrid::new(GridSpec::new(1, 16, 12.0, 1.0)).unwrap();
        let prop = Propagator::new(g.clone(), Potential::phi4(0.5));
        let data = CauchyData::sample(g.clone(), |x| 0.8 * (-(x[0] * x[0]) / 3.0).exp(), |_| 0.0);
        let mut v = decompose(&data).unwrap();
        prop.kick(&mut v, 0.1);
        let after = reconstruct(&v).unwrap();
        for s in 0..16 {
            assert!((after.phi[s] - data.phi[s]).abs() < 1e-13);
        }
        // pi changes by -tau * V'(phi) projected onto the window.
        let moved: f64 = (0..16).map(|s| (after.pi[s] - data.pi[s]).abs()).fold(0.0, f64::max);
        assert!(moved > 1e-3);
    }

    #[test]
    fn zero_potential_matches_free_flow() {
        let g = ModeGrid::new(GridSpec::new(2, 8, 10.0, 1.0)).unwrap();
        let prop = Propagator::new(g.clone(), Potential::zero());
        let data = CauchyData::sample(g.clone(), |x| 0.1 * (-(x[0] * x[0] + x[1] * x[1]) / 5.0).exp(), |_| 0.0);
        let v = decompose(&data).unwrap();
        let a = prop.evolve_modes(&v, 1.5, 0.01).unwrap();
        assert!(a.sub(&free_flow(&v, 1.5)).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn step_validation() {
        let g = ModeGrid::new(GridSpec::new(1, 8, 10.0, 1.0)).unwrap();
        let prop = Propagator::new(g, Potential::phi4(0.1));
        assert_eq!(prop.step_count(1.0, 0.01).unwrap(), 100);
        assert_eq!(prop.step_count(-1.0, 0.01).unwrap(), 100);
        assert!(prop.step_count(1.005, 0.01).is_err());
        assert!(prop.step_count(1.0, 0.0).is_err());
        assert!(prop.step_count(10.0, 2.0).is_err());
    }
    fn packet(g: &Arc<ModeGrid>, amp: f64) -> ModeVector {
        let data = CauchyData::sample(
            g.clone(),
            |x| amp * (-(x.iter().map(|t| t * t).sum::<f64>()) / 3.0).exp() * (1.0 + 0.3 * x[0]),
            |x| amp * 0.5 * (-(x.iter().map(|t| (t - 0.5) * (t - 0.5)).sum::<f64>()) / 2.0).exp(),
        );
        decompose(&data).unwrap()
    }

    #[test]
    fn kick_is_the_flow_of_the_interaction_functional() {
        use crate::formal::hamiltonian_vector_field;
        use crate::kleingordon::generators::interaction_functionals;
        for (d, n, pot) in [(1, 8, Potential::phi4(0.7)), (2, 4, Potential::phi3(0.4)), (1, 16, Potential::phi3(0.4))] {
            let g = ModeGrid::new(GridSpec::new(d, n, 7.0, 1.2)).unwrap();
            let prop = Propagator::new(g.clone(), pot.clone());
            let v = packet(&g, 0.6);
            let (u, uj) = interaction_functionals(&g, &pot, pot.degree()).unwrap();
            let xu = hamiltonian_vector_field(&u, pot.degree()).unwrap();
            let tau = 0.3;
            let mut kicked = v.clone();
            prop.kick(&mut kicked, tau);
            let field = xu.apply(&v.coords()).unwrap();
            let want: Vec<C64> = v.coords().iter().zip(&field).map(|(z, f)| z + tau * f).collect();
            let got = kicked.coords();
            let err = got.iter().zip(&want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err < 1e-12, "d={d} n={n}: kick differs from X_U by {err}");

            let e = prop.interaction_energy(&v);
            let ue = u.evaluate(&v).unwrap();
            assert!((e - ue).norm() < 1e-12 * (1.0 + ue.norm()), "{e} vs {ue}");
            for axis in 0..d {
                let m = prop.interaction_moment(&v, axis);
                let um = uj[axis].evaluate(&v).unwrap();
                assert!((m - um).norm() < 1e-12 * (1.0 + um.norm()), "axis {axis}: {m} vs {um}");
            }
        }
    }

    #[test]
    fn interacting_flow_is_reversible_and_conserves_momentum() {
        let g = ModeGrid::new(GridSpec::new(2, 8, 10.0, 1.0)).unwrap();
        let prop = Propagator::new(g.clone(), Potential::phi4(1.0));
        let v = packet(&g, 0.5);
        let fwd = prop.evolve_modes(&v, 2.0, 0.02).unwrap();
        let back = prop.evolve_modes(&fwd, -2.0, 0.02).unwrap();
        assert!(back.sub(&v).unwrap().max_abs() < 1e-11 * v.max_abs());
        for axis in 0..2 {
            let p0 = prop.momentum(&v, axis);
            let p1 = prop.momentum(&fwd, axis);
            assert!((p0 - p1).norm() < 1e-12 * Propagator::free_energy(&v).norm());
        }
        // Real data stay real.
        assert!(fwd.reality_defect() < 1e-12 * v.max_abs());
    }

    #[test]
    fn energy_error_is_second_order() {
        let g = ModeGrid::new(GridSpec::new(1, 16, 12.0, 1.0)).unwrap();
        let prop = Propagator::new(g.clone(), Potential::phi4(2.0));
        let v = packet(&g, 0.8);
        let e0 = prop.energy(&v);
        let drift = |dt: f64| {
            let mut worst = 0.0f64;
            prop.evolve_modes_from(&v, 0.0, 3.0, dt, |_, s| worst = worst.max((prop.energy(s) - e0).norm()))
                .unwrap();
            worst
        };
        let coarse = drift(0.04);
        let fine = drift(0.02);
        let order = (coarse / fine).log2();
        assert!(order > 1.8 && order < 2.2, "order {order} ({coarse:e} -> {fine:e})");
    }

    #[test]
    fn blow_up_is_reported() {
        // A negative quartic potential with large data runs away in finite time.
        let g = ModeGrid::new(GridSpec::new(1, 8, 6.0, 1.0)).unwrap();
        let prop = Propagator::new(g.clone(), Potential::phi4(-50.0));
        let v = packet(&g, 3.0);
        match prop.evolve_modes(&v, 20.0, 0.01) {
            Err(Error::BlowUp { time }) => assert!(time > 0.0 && time <= 20.0),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }
}

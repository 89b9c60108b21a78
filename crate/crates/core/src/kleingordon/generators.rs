//! Poincare generators of the free and interacting field.
//!
//! The free generators act block-diagonally on `(abar, a)`. On the `abar`
//! block (the positive-frequency half `a_+`, built from `e^{-ikx}`)
//!
//! ```text
//! P0 = i omega,  Pj = -i k_j,  Mij = X_i D_j - X_j D_i,  M0j = i omega X_j
//! ```
//!
//! and on the `a` block the signs of `omega` and `k` flip. `X_j` is
//! multiplication by the sawtooth coordinate in `[-L/2, L/2)`, projected back
//! onto the mode window (a Galerkin position operator); `D_j` is the exact
//! spectral derivative. Translations are therefore exact and boosts and
//! rotations are exact only up to the periodization.
//!
//! The interaction enters through `U = int V(phi)` and `U_j = int x_j V(phi)`
//! (box integrals of the band-limited field, computed exactly), whose
//! Hamiltonian vector fields are the nonlinear parts of `P0` and `M0j`. Modes
//! on the lower edge of the window (`z = -n/2` on some axis) have no partner
//! at `+n/2` and are kept out of the interaction.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::formal::{
    hamiltonian_vector_field, poincare_basis, poincare_structure_constants, FormalSeries,
    GeneratorLabel, NonlinearRep,
};
use crate::functional::PolyFunctional;
use crate::modes::{ModeGrid, ModeVector};
use crate::poly::{Monomial, Poly};

use super::potential::Potential;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// `(1/L) int_{-L/2}^{L/2} x e^{i q x} dx` for `q = (2 pi / L) m`.
pub fn sawtooth_moment(dk: f64, m: i64) -> C64 {
    if m == 0 {
        return C64::default();
    }
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    C64::new(0.0, -sign / (dk * m as f64))
}

/// Entries `(k, k', X[k, k'])` of the projected position operator on the `a`
/// block; the `abar` block uses the transpose.
pub fn position_entries(grid: &ModeGrid, axis: usize) -> Vec<(usize, usize, C64)> {
    let n = grid.n_per_axis() as i64;
    let dk = grid.dk();
    let mut out = Vec::new();
    for k in 0..grid.len() {
        let z = grid.label(k);
        for t in -n / 2..n / 2 {
            if t == z[axis] {
                continue;
            }
            let mut zp = z;
            zp[axis] = t;
            let kp = grid.wrapped_index(&zp);
            out.push((k, kp, sawtooth_moment(dk, t - z[axis])));
        }
    }
    out
}

/// A block-diagonal linear vector field: sparse `abar`-block and `a`-block matrices.
#[derive(Clone, Debug, Default)]
pub struct LinearGenerator {
    pub plus: Vec<(usize, usize, C64)>,
    pub minus: Vec<(usize, usize, C64)>,
}

impl LinearGenerator {
    pub fn to_matrix(&self, modes: usize) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(2 * modes, 2 * modes);
        for &(r, c, v) in &self.plus {
            m[(r, c)] += v;
        }
        for &(r, c, v) in &self.minus {
            m[(modes + r, modes + c)] += v;
        }
        m
    }

    pub fn to_series(&self, modes: usize, degree_cap: usize) -> Result<FormalSeries> {
        FormalSeries::from_linear(&self.to_matrix(modes), degree_cap)
    }

    pub fn apply(&self, v: &ModeVector) -> ModeVector {
        let mut out = ModeVector::zeros(v.grid.clone());
        for &(r, c, x) in &self.plus {
            out.abar[r] += x * v.abar[c];
        }
        for &(r, c, x) in &self.minus {
            out.a[r] += x * v.a[c];
        }
        out
    }

    /// The quadratic functional `sum q_il a_i abar_l` generating this field,
    /// and the largest non-Hamiltonian defect (zero for an exact generator).
    pub fn bilinear(&self, grid: &ModeGrid) -> (Bilinear, f64) {
        let w = grid.weight();
        let factor = |i: usize| (2.0 * I * grid.omega(i) / w).inv();
        // (i, l) -> (contribution from the abar row of a_i, from the a row of abar_l)
        let mut parts: FxHashMap<(usize, usize), (C64, C64)> = FxHashMap::default();
        for &(i, l, x) in &self.plus {
            parts.entry((i, l)).or_default().0 += factor(i) * x;
        }
        for &(l, i, x) in &self.minus {
            parts.entry((i, l)).or_default().1 -= factor(l) * x;
        }
        let mut keys: Vec<_> = parts.keys().copied().collect();
        keys.sort_unstable();
        let mut defect = 0.0f64;
        let mut entries = Vec::with_capacity(keys.len());
        for key in keys {
            let (p, q) = parts[&key];
            defect = defect.max((p - q).norm());
            let v = (p + q) * 0.5;
            if v.norm_sqr() != 0.0 {
                entries.push((key.0, key.1, v));
            }
        }
        (Bilinear { entries }, defect)
    }
}

/// `B(abar, a) = sum q a_i abar_l` over entries `(i, l, q)`.
#[derive(Clone, Debug, Default)]
pub struct Bilinear {
    pub entries: Vec<(usize, usize, C64)>,
}

impl Bilinear {
    pub fn evaluate(&self, v: &ModeVector) -> C64 {
        self.entries
            .iter()
            .map(|&(i, l, q)| q * v.a[i] * v.abar[l])
            .sum()
    }

    pub fn to_functional(&self, grid: &Arc<ModeGrid>, max_degree: usize) -> Result<PolyFunctional> {
        let n = grid.len();
        let poly = Poly::from_terms(
            self.entries
                .iter()
                .map(|&(i, l, q)| (Monomial::from_vars([l, n + i]).expect("quadratic"), q)),
        );
        PolyFunctional::from_poly(grid.clone(), max_degree, poly)
    }
}

/// Free generators in the order of [`poincare_basis`].
pub fn free_linear_generators(grid: &ModeGrid) -> Vec<(GeneratorLabel, LinearGenerator)> {
    let d = grid.d();
    let n = grid.len();
    let diag = |f: &dyn Fn(usize) -> C64, g: &dyn Fn(usize) -> C64| LinearGenerator {
        plus: (0..n).map(|i| (i, i, f(i))).collect(),
        minus: (0..n).map(|i| (i, i, g(i))).collect(),
    };
    let positions: Vec<Vec<(usize, usize, C64)>> = (0..d).map(|ax| position_entries(grid, ax)).collect();
    poincare_basis(d)
        .into_iter()
        .map(|label| {
            let gen = match label {
                GeneratorLabel::P(0) => diag(&|i| I * grid.omega(i), &|i| -I * grid.omega(i)),
                GeneratorLabel::P(j) => diag(
                    &|i| -I * grid.momentum(i, j - 1),
                    &|i| I * grid.momentum(i, j - 1),
                ),
                GeneratorLabel::M(0, j) => {
                    let x = &positions[j - 1];
                    LinearGenerator {
                        plus: x.iter().map(|&(k, kp, v)| (kp, k, I * grid.omega(kp) * v)).collect(),
                        minus: x.iter().map(|&(k, kp, v)| (k, kp, -I * grid.omega(k) * v)).collect(),
                    }
                }
                GeneratorLabel::M(i, j) => {
                    let (ai, aj) = (i - 1, j - 1);
                    let mut plus = Vec::new();
                    let mut minus = Vec::new();
                    for (ax, other, sign) in [(ai, aj, 1.0), (aj, ai, -1.0)] {
                        for &(k, kp, v) in &positions[ax] {
                            // abar block: X+ = X^T, D+ = -i k
                            plus.push((kp, k, sign * v * (-I * grid.momentum(k, other))));
                            minus.push((k, kp, sign * v * (I * grid.momentum(kp, other))));
                        }
                    }
                    LinearGenerator { plus, minus }
                }
            };
            (label, gen)
        })
        .collect()
}

/// `H0 = sum (w/2) abar_i a_i`.
pub fn free_hamiltonian(grid: &Arc<ModeGrid>, max_degree: usize) -> Result<PolyFunctional> {
    let w = grid.weight();
    let b = Bilinear {
        entries: (0..grid.len()).map(|i| (i, i, C64::new(w / 2.0, 0.0))).collect(),
    };
    b.to_functional(grid, max_degree)
}

/// `U = int V(phi)` and `U_j = int x_j V(phi)` as polynomials in the modes.
pub fn interaction_functionals(
    grid: &Arc<ModeGrid>,
    potential: &Potential,
    max_degree: usize,
) -> Result<(PolyFunctional, Vec<PolyFunctional>)> {
    let n = grid.len();
    let d = grid.d();
    let needed = potential.degree();
    if needed > max_degree {
        return Err(Error::DegreeCap {
            cap: max_degree,
            needed,
        });
    }
    let mut u = Poly::new();
    let mut uj = vec![Poly::new(); d];
    if !potential.is_zero() {
        let c = grid.field_constant();
        let mut phi = Poly::new();
        // Integer momentum carried by each variable.
        let mut momentum = vec![[0i64; 3]; 2 * n];
        for i in 0..n {
            let z = grid.label(i);
            for ax in 0..d {
                momentum[i][ax] = -z[ax];
                momentum[n + i][ax] = z[ax];
            }
            if grid.is_nyquist(i) {
                continue;
            }
            let coef = C64::new(c / grid.omega(i), 0.0);
            phi.add_term(Monomial::var(i), coef);
            phi.add_term(Monomial::var(n + i), coef);
        }
        let volume = grid.volume();
        let dk = grid.dk();
        let mut power = Poly::constant(C64::new(1.0, 0.0));
        for j in 1..=needed {
            power = power.mul_truncated(&phi, needed).0;
            let cj = potential.terms().find(|&(p, _)| p == j).map(|(_, c)| c);
            let Some(cj) = cj else { continue };
            let scale = cj / j as f64 * volume;
            for (m, coef) in power.sorted_terms() {
                let mut q = [0i64; 3];
                for &v in m.vars() {
                    for ax in 0..d {
                        q[ax] += momentum[v as usize][ax];
                    }
                }
                if q[..d].iter().all(|&x| x == 0) {
                    u.add_term(m, coef * scale);
                }
                for ax in 0..d {
                    let transverse_zero = (0..d).filter(|&b| b != ax).all(|b| q[b] == 0);
                    if transverse_zero && q[ax] != 0 {
                        uj[ax].add_term(m, coef * scale * sawtooth_moment(dk, q[ax]));
                    }
                }
            }
        }
    }
    let u = PolyFunctional::from_poly(grid.clone(), max_degree, u)?;
    let uj = uj
        .into_iter()
        .map(|p| PolyFunctional::from_poly(grid.clone(), max_degree, p))
        .collect::<Result<Vec<_>>>()?;
    Ok((u, uj))
}

/// Free and interacting generators in vector-field and Hamiltonian form.
#[derive(Clone, Debug)]
pub struct GeneratorSet {
    pub grid: Arc<ModeGrid>,
    pub potential: Potential,
    pub degree_cap: usize,
    pub basis: Vec<GeneratorLabel>,
    pub linear: Vec<LinearGenerator>,
    /// `T1_X`.
    pub free_series: Vec<FormalSeries>,
    /// Quadratic functionals generating `T1_X`.
    pub free_functionals: Vec<PolyFunctional>,
    /// `T_X = T1_X + T~_X`.
    pub series: Vec<FormalSeries>,
    /// Interacting functionals (`H0 + U` for `P0`, `K_j + U_j` for `M0j`).
    pub functionals: Vec<PolyFunctional>,
    /// Non-Hamiltonian defect of each free generator on the lattice.
    pub hamiltonian_defect: Vec<f64>,
}

impl GeneratorSet {
    pub fn index(&self, label: GeneratorLabel) -> Option<usize> {
        self.basis.iter().position(|&b| b == label)
    }

    pub fn free_rep(&self) -> Result<NonlinearRep> {
        NonlinearRep::new(
            self.basis.clone(),
            self.free_series.clone(),
            poincare_structure_constants(self.grid.d()),
        )
    }

    pub fn rep(&self) -> Result<NonlinearRep> {
        NonlinearRep::new(
            self.basis.clone(),
            self.series.clone(),
            poincare_structure_constants(self.grid.d()),
        )
    }

    pub fn functional(&self, label: GeneratorLabel) -> Option<&PolyFunctional> {
        self.index(label).map(|k| &self.functionals[k])
    }

    pub fn free_functional(&self, label: GeneratorLabel) -> Option<&PolyFunctional> {
        self.index(label).map(|k| &self.free_functionals[k])
    }

    pub fn hamiltonian(&self) -> &PolyFunctional {
        &self.functionals[0]
    }

    pub fn free_hamiltonian(&self) -> &PolyFunctional {
        &self.free_functionals[0]
    }
}

/// The free representation `T1` and its quadratic generators.
pub fn build_free_rep(grid: &Arc<ModeGrid>, degree_cap: usize) -> Result<GeneratorSet> {
    build_interaction(grid, &Potential::zero(), degree_cap)
}

/// `T = T1 + T~` for the potential `V`, expanded through `degree_cap`.
pub fn build_interaction(grid: &Arc<ModeGrid>, potential: &Potential, degree_cap: usize) -> Result<GeneratorSet> {
    let n = grid.len();
    let needed = potential.degree().saturating_sub(1);
    if needed > degree_cap {
        return Err(Error::DegreeCap {
            cap: degree_cap,
            needed,
        });
    }
    let max_degree = degree_cap + 1;
    let mut basis = Vec::new();
    let mut linear = Vec::new();
    let mut free_series = Vec::new();
    let mut free_functionals = Vec::new();
    let mut defects = Vec::new();
    for (label, gen) in free_linear_generators(grid) {
        let (b, defect) = gen.bilinear(grid);
        free_series.push(gen.to_series(n, degree_cap)?);
        free_functionals.push(b.to_functional(grid, max_degree)?);
        defects.push(defect);
        basis.push(label);
        linear.push(gen);
    }
    let (u, uj) = interaction_functionals(grid, potential, max_degree)?;
    let mut series = free_series.clone();
    let mut functionals = free_functionals.clone();
    if !potential.is_zero() {
        for (k, label) in basis.iter().enumerate() {
            let extra = match label {
                GeneratorLabel::P(0) => &u,
                GeneratorLabel::M(0, j) => &uj[j - 1],
                _ => continue,
            };
            series[k] = series[k].add(&hamiltonian_vector_field(extra, degree_cap)?)?;
            functionals[k] = functionals[k].add(extra)?;
        }
    }
    Ok(GeneratorSet {
        grid: grid.clone(),
        potential: potential.clone(),
        degree_cap,
        basis,
        linear,
        free_series,
        free_functionals,
        series,
        functionals,
        hamiltonian_defect: defects,
    })
}

/// Probe vectors for closure checks: real, smooth, localized wave packets
/// centred in the box, as phase-space coordinates.
pub fn packet_probes(grid: &Arc<ModeGrid>, width: f64, amplitude: f64) -> Result<Vec<Vec<C64>>> {
    let d = grid.d();
    let shapes: [(f64, [f64; 3]); 3] = [(0.0, [0.0; 3]), (0.3, [0.5, -0.25, 0.2]), (-0.2, [-0.4, 0.3, -0.1])];
    shapes
        .iter()
        .map(|&(k0, shift)| {
            let data = crate::modes::CauchyData::sample(
                grid.clone(),
                |x| {
                    let r2: f64 = (0..d).map(|a| (x[a] - shift[a] * width).powi(2)).sum();
                    amplitude * (-r2 / (2.0 * width * width)).exp() * (k0 * x[0] + 0.3).cos()
                },
                |x| {
                    let r2: f64 = (0..d).map(|a| (x[a] - shift[a] * width).powi(2)).sum();
                    0.5 * amplitude * (-r2 / (2.0 * width * width)).exp() * (k0 * x[0]).sin()
                },
            );
            Ok(crate::modes::decompose(&data)?.coords())
        })
        .collect()
}

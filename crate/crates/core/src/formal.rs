//! Formal series of symmetric multilinear maps and nonlinear Lie-algebra
//! representations.
//!
//! A series `F = sum_{n>=1} f^n` on `C^dim` is stored as one polynomial per
//! output coordinate; the degree-`n` part of component `o` is `f^n(x,..,x)_o`.
//! Composition is substitution, and `F . H` is the vector-field product
//! `DF(x) H(x)`. With this convention `[F, H] = F.H - H.F` reduces to the
//! matrix commutator on linear series and is the negative of the classical
//! Lie bracket of the vector fields `F` and `H`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::PolyFunctional;
use crate::modes::ModeGrid;
use crate::poly::{factorial, Monomial, Poly, MAX_DEGREE, MAX_VARIABLES};

const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Truncated formal series `sum_{n=1}^{degree_cap} f^n`.
#[derive(Clone, Debug)]
pub struct FormalSeries {
    dim: usize,
    degree_cap: usize,
    comps: Vec<Poly>,
}

impl FormalSeries {
    pub fn zero(dim: usize, degree_cap: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_VARIABLES {
            return Err(Error::Invalid(format!(
                "series dimension {dim} outside 1..={MAX_VARIABLES}"
            )));
        }
        if degree_cap == 0 || degree_cap > MAX_DEGREE {
            return Err(Error::Invalid(format!(
                "degree cap {degree_cap} outside 1..={MAX_DEGREE}"
            )));
        }
        Ok(FormalSeries {
            dim,
            degree_cap,
            comps: vec![Poly::new(); dim],
        })
    }

    pub fn identity(dim: usize, degree_cap: usize) -> Result<Self> {
        let mut s = FormalSeries::zero(dim, degree_cap)?;
        for (o, c) in s.comps.iter_mut().enumerate() {
            *c = Poly::var(o);
        }
        Ok(s)
    }

    /// The linear series `x -> M x`.
    pub fn from_linear(m: &DMatrix<C64>, degree_cap: usize) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                left: m.nrows(),
                right: m.ncols(),
            });
        }
        let mut s = FormalSeries::zero(m.nrows(), degree_cap)?;
        for (o, comp) in s.comps.iter_mut().enumerate() {
            for v in 0..m.ncols() {
                let c = m[(o, v)];
                if c.norm_sqr() != 0.0 {
                    comp.add_term(Monomial::var(v), c);
                }
            }
        }
        Ok(s)
    }

    /// Builds a series from component polynomials. Constant terms are
    /// rejected; terms above the cap are dropped.
    pub fn from_components(dim: usize, degree_cap: usize, comps: Vec<Poly>) -> Result<Self> {
        let mut s = FormalSeries::zero(dim, degree_cap)?;
        if comps.len() != dim {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: comps.len(),
            });
        }
        for mut p in comps {
            p.compact();
            for (m, c) in p.terms() {
                if m.degree() == 0 {
                    return Err(Error::Invalid("formal series have no constant term".into()));
                }
                if m.vars().iter().any(|&v| v as usize >= dim) {
                    return Err(Error::IndexOutOfRange {
                        index: *m.vars().last().unwrap() as usize,
                        count: dim,
                    });
                }
                if !(c.re.is_finite() && c.im.is_finite()) {
                    return Err(Error::NonFinite);
                }
            }
            p.truncate(degree_cap);
            s.comps.push(p);
        }
        s.comps.drain(..dim);
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree_cap(&self) -> usize {
        self.degree_cap
    }

    pub fn component(&self, o: usize) -> &Poly {
        &self.comps[o]
    }

    pub fn components(&self) -> &[Poly] {
        &self.comps
    }

    /// Copy with another cap (terms above a lower cap are dropped).
    pub fn with_cap(&self, degree_cap: usize) -> Result<Self> {
        FormalSeries::from_components(self.dim, degree_cap, self.comps.clone())
    }

    /// The degree-`n` term alone.
    pub fn homogeneous(&self, n: usize) -> FormalSeries {
        FormalSeries {
            dim: self.dim,
            degree_cap: self.degree_cap,
            comps: self.comps.iter().map(|p| p.homogeneous(n)).collect(),
        }
    }

    /// Terms of degree `lo..=hi`.
    pub fn degrees(&self, lo: usize, hi: usize) -> FormalSeries {
        let mut out = FormalSeries {
            dim: self.dim,
            degree_cap: self.degree_cap,
            comps: vec![Poly::new(); self.dim],
        };
        for n in lo..=hi.min(self.degree_cap) {
            for (o, p) in self.comps.iter().enumerate() {
                out.comps[o].add_scaled(&p.homogeneous(n), ONE);
            }
        }
        out
    }

    pub fn linear_matrix(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (o, p) in self.comps.iter().enumerate() {
            for (mono, c) in p.terms() {
                if mono.degree() == 1 {
                    m[(o, mono.vars()[0] as usize)] += c;
                }
            }
        }
        m
    }

    /// Monomial coefficient of `x^inputs` in component `out`.
    pub fn coefficient(&self, out: usize, inputs: &[usize]) -> C64 {
        match Monomial::from_vars(inputs.iter().copied()) {
            Some(m) => self.comps[out].coeff(&m),
            None => C64::default(),
        }
    }

    /// Entry `t^n[out; in_1..in_n]` of the symmetric tensor.
    pub fn tensor_entry(&self, out: usize, inputs: &[usize]) -> C64 {
        let Some(m) = Monomial::from_vars(inputs.iter().copied()) else {
            return C64::default();
        };
        self.comps[out].coeff(&m) * m.factorial_weight() / factorial(m.degree())
    }

    /// Sets `t^n[out; inputs]` (and all its symmetric images).
    pub fn set_tensor_entry(&mut self, out: usize, inputs: &[usize], t: C64) -> Result<()> {
        if out >= self.dim || inputs.iter().any(|&i| i >= self.dim) {
            return Err(Error::IndexOutOfRange {
                index: out.max(inputs.iter().copied().max().unwrap_or(0)),
                count: self.dim,
            });
        }
        if inputs.is_empty() || inputs.len() > self.degree_cap {
            return Err(Error::DegreeCap {
                cap: self.degree_cap,
                needed: inputs.len(),
            });
        }
        let m = Monomial::from_vars(inputs.iter().copied()).expect("within the cap");
        let c = t * factorial(m.degree()) / m.factorial_weight();
        let old = self.comps[out].coeff(&m);
        self.comps[out].add_term(m, c - old);
        Ok(())
    }

    pub fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        self.check_point(x)?;
        Ok(self.comps.iter().map(|p| p.evaluate(x)).collect())
    }

    /// The degree-`n` term evaluated at `x`.
    pub fn apply_degree(&self, n: usize, x: &[C64]) -> Result<Vec<C64>> {
        self.check_point(x)?;
        Ok(self
            .comps
            .iter()
            .map(|p| {
                p.terms()
                    .filter(|(m, _)| m.degree() == n)
                    .map(|(m, c)| c * m.eval(x))
                    .sum()
            })
            .collect())
    }

    fn check_point(&self, x: &[C64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: x.len(),
            });
        }
        Ok(())
    }

    fn check_dim(&self, other: &FormalSeries) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        Ok(())
    }

    fn combine(&self, other: &FormalSeries, s: C64) -> Result<FormalSeries> {
        self.check_dim(other)?;
        let cap = self.degree_cap.min(other.degree_cap);
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(p, q)| {
                let mut r = p.clone();
                r.add_scaled(q, s);
                r.truncate(cap);
                r.compact();
                r
            })
            .collect();
        Ok(FormalSeries {
            dim: self.dim,
            degree_cap: cap,
            comps,
        })
    }

    pub fn add(&self, other: &FormalSeries) -> Result<FormalSeries> {
        self.combine(other, ONE)
    }

    pub fn sub(&self, other: &FormalSeries) -> Result<FormalSeries> {
        self.combine(other, -ONE)
    }

    pub fn scale(&self, s: C64) -> FormalSeries {
        FormalSeries {
            dim: self.dim,
            degree_cap: self.degree_cap,
            comps: self.comps.iter().map(|p| p.scale(s)).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().map(|p| p.max_abs()).fold(0.0, f64::max)
    }

    /// Largest coefficient magnitude of the degree-`n` term.
    pub fn max_abs_degree(&self, n: usize) -> f64 {
        self.comps
            .iter()
            .flat_map(|p| p.terms().filter(|(m, _)| m.degree() == n).map(|(_, c)| c.norm()))
            .fold(0.0, f64::max)
    }

    /// `F o H`, truncated at the smaller cap.
    pub fn compose(&self, other: &FormalSeries) -> Result<FormalSeries> {
        self.check_dim(other)?;
        let cap = self.degree_cap.min(other.degree_cap);
        let comps = self
            .comps
            .iter()
            .map(|p| {
                let mut r = p.substitute(&other.comps, cap).0;
                r.compact();
                r
            })
            .collect();
        Ok(FormalSeries {
            dim: self.dim,
            degree_cap: cap,
            comps,
        })
    }

    /// `F . H = DF(x) H(x)`: every input slot of `f^p` fed `H` in turn.
    pub fn bullet(&self, other: &FormalSeries) -> Result<FormalSeries> {
        self.check_dim(other)?;
        let cap = self.degree_cap.min(other.degree_cap);
        let comps = self
            .comps
            .iter()
            .map(|p| {
                let mut r = Poly::new();
                let mut grad: Vec<(usize, Poly)> = p.gradient().into_iter().collect();
                grad.sort_by_key(|(v, _)| *v);
                for (v, dp) in grad {
                    r.add_scaled(&dp.mul_truncated(&other.comps[v], cap).0, ONE);
                }
                r.compact();
                r
            })
            .collect();
        Ok(FormalSeries {
            dim: self.dim,
            degree_cap: cap,
            comps,
        })
    }

    /// `[F, H] = F.H - H.F`.
    pub fn lie_bracket(&self, other: &FormalSeries) -> Result<FormalSeries> {
        self.bullet(other)?.sub(&other.bullet(self)?)
    }

    /// Two-sided inverse under composition, through the cap.
    pub fn invert(&self) -> Result<FormalSeries> {
        let a = self.linear_matrix();
        let a_inv = a.clone().try_inverse().ok_or(Error::NotInvertible)?;
        let scale = a.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let check = &a * &a_inv - DMatrix::identity(self.dim, self.dim);
        if check.iter().any(|c| !(c.norm() <= 1e-8 * (1.0 + scale))) {
            return Err(Error::NotInvertible);
        }
        let a_inv_series = FormalSeries::from_linear(&a_inv, self.degree_cap)?;
        let nonlinear = self.degrees(2, self.degree_cap);
        let id = FormalSeries::identity(self.dim, self.degree_cap)?;
        // G <- A^{-1} (x - F_{>=2}(G)); each pass fixes one more degree.
        let mut g = a_inv_series.clone();
        for _ in 1..self.degree_cap {
            let rhs = id.sub(&nonlinear.compose(&g)?)?;
            g = a_inv_series.compose(&rhs)?;
        }
        Ok(g)
    }

    pub fn to_json(&self) -> String {
        let mut terms = Vec::new();
        for (o, p) in self.comps.iter().enumerate() {
            for (m, c) in p.sorted_terms() {
                let t = c * m.factorial_weight() / factorial(m.degree());
                terms.push(SeriesTerm {
                    n: m.degree(),
                    out: o,
                    in_multi_index: m.vars().iter().map(|&v| v as usize).collect(),
                    re: t.re,
                    im: t.im,
                });
            }
        }
        terms.sort_by(|a, b| (a.n, a.out, &a.in_multi_index).cmp(&(b.n, b.out, &b.in_multi_index)));
        let file = SeriesFile {
            dim: self.dim,
            degree_cap: self.degree_cap,
            terms,
        };
        serde_json::to_string(&file).expect("series serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SeriesFile = serde_json::from_str(text)?;
        let mut s = FormalSeries::zero(file.dim, file.degree_cap)?;
        for t in &file.terms {
            if t.in_multi_index.len() != t.n {
                return Err(Error::Invalid(format!(
                    "term of degree {} lists {} inputs",
                    t.n,
                    t.in_multi_index.len()
                )));
            }
            s.set_tensor_entry(t.out, &t.in_multi_index, C64::new(t.re, t.im))?;
        }
        Ok(s)
    }
}

#[derive(Serialize, Deserialize)]
struct SeriesTerm {
    n: usize,
    out: usize,
    in_multi_index: Vec<usize>,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct SeriesFile {
    dim: usize,
    degree_cap: usize,
    terms: Vec<SeriesTerm>,
}

/// Hamiltonian vector field of a functional in phase-space coordinates:
/// `d abar_i/dt = (2i omega_i/w) dF/da_i`, `d a_i/dt = -(2i omega_i/w) dF/dabar_i`.
///
/// With the Poisson bracket of [`crate::functional`] this is `(1/2){., F}`, the
/// normalization under which the free energy generates `abar e^{i omega t}`.
pub fn hamiltonian_vector_field(f: &PolyFunctional, degree_cap: usize) -> Result<FormalSeries> {
    let grid = f.grid();
    let n = grid.len();
    let w = grid.weight();
    let grad = f.poly().gradient();
    let mut comps = vec![Poly::new(); 2 * n];
    for i in 0..n {
        let s = C64::new(0.0, 2.0 * grid.omega(i) / w);
        if let Some(p) = grad.get(&(n + i)) {
            comps[i].add_scaled(p, s);
        }
        if let Some(p) = grad.get(&i) {
            comps[n + i].add_scaled(p, -s);
        }
    }
    for p in &mut comps {
        p.compact();
        if p.terms().any(|(m, _)| m.degree() == 0) {
            return Err(Error::Invalid(
                "functional has a linear part; its vector field has a constant term".into(),
            ));
        }
    }
    FormalSeries::from_components(2 * n, degree_cap, comps)
}

/// Quadratic functional whose Hamiltonian vector field is the linear series
/// `a`, together with the largest antisymmetric defect (zero when `a` is
/// exactly Hamiltonian).
pub fn hamiltonian_from_linear(
    grid: &std::sync::Arc<ModeGrid>,
    a: &DMatrix<C64>,
) -> Result<(PolyFunctional, f64)> {
    let n = grid.len();
    if a.nrows() != 2 * n || a.ncols() != 2 * n {
        return Err(Error::DimensionMismatch {
            left: 2 * n,
            right: a.nrows(),
        });
    }
    let w = grid.weight();
    let mut m = DMatrix::<C64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        let s = C64::new(0.0, 2.0 * grid.omega(i) / w).inv();
        for v in 0..2 * n {
            m[(n + i, v)] = s * a[(i, v)];
            m[(i, v)] = -s * a[(n + i, v)];
        }
    }
    let mut defect = 0.0f64;
    let mut poly = Poly::new();
    for u in 0..2 * n {
        for v in u..2 * n {
            defect = defect.max((m[(u, v)] - m[(v, u)]).norm());
            let sym = (m[(u, v)] + m[(v, u)]) * 0.5;
            if sym.norm_sqr() == 0.0 {
                continue;
            }
            let c = if u == v { sym * 0.5 } else { sym };
            poly.add_term(Monomial::from_vars([u, v]).expect("quadratic"), c);
        }
    }
    Ok((PolyFunctional::from_poly(grid.clone(), 2, poly)?, defect))
}

/// A basis element of the Poincare algebra. Index 0 is time; `M(i, j)` has `i < j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GeneratorLabel {
    P(usize),
    M(usize, usize),
}

impl GeneratorLabel {
    pub fn is_boost(&self) -> bool {
        matches!(self, GeneratorLabel::M(0, _))
    }

    pub fn is_rotation(&self) -> bool {
        matches!(self, GeneratorLabel::M(i, _) if *i > 0)
    }

    pub fn is_translation(&self) -> bool {
        matches!(self, GeneratorLabel::P(_))
    }
}

impl std::fmt::Display for GeneratorLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GeneratorLabel::P(mu) => write!(f, "P{mu}"),
            GeneratorLabel::M(i, j) => write!(f, "M{i}{j}"),
        }
    }
}

/// `[P_0, P_1..P_d, M_ij (0<i<j), M_0j]`.
pub fn poincare_basis(d: usize) -> Vec<GeneratorLabel> {
    let mut basis: Vec<GeneratorLabel> = (0..=d).map(GeneratorLabel::P).collect();
    for i in 1..=d {
        for j in i + 1..=d {
            basis.push(GeneratorLabel::M(i, j));
        }
    }
    basis.extend((1..=d).map(|j| GeneratorLabel::M(0, j)));
    basis
}

/// Structure constants `[X_a, X_b] = sum_c table[a][b] (c, coefficient)` of the
/// Poincare algebra, in the sign convention realized by the mode-space
/// generators (`P_0 = i omega`, `P_j = d_j`, `M_0j = i omega x_j`).
pub fn poincare_structure_constants(d: usize) -> Vec<Vec<Vec<(usize, f64)>>> {
    let basis = poincare_basis(d);
    let index = |g: GeneratorLabel| basis.iter().position(|&b| b == g).expect("in basis");
    // Signed M_{ab} with a, b in 0..=d.
    let m = |a: usize, b: usize| -> Option<(GeneratorLabel, f64)> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Some((GeneratorLabel::M(a, b), 1.0)),
            std::cmp::Ordering::Greater => Some((GeneratorLabel::M(b, a), -1.0)),
            std::cmp::Ordering::Equal => None,
        }
    };
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    // Brackets of the pairs listed here; the rest follow by antisymmetry.
    let direct = |x: GeneratorLabel, y: GeneratorLabel| -> Option<Vec<(GeneratorLabel, f64)>> {
        use GeneratorLabel::*;
        let terms = match (x, y) {
            (P(_), P(_)) => vec![],
            (M(0, j), P(0)) => vec![(Some((P(j), 1.0)), -1.0)],
            (M(0, j), P(k)) => vec![(Some((P(0), 1.0)), -delta(j, k))],
            (M(_, _), P(0)) => vec![],
            (M(i, j), P(k)) => vec![
                (Some((P(i), 1.0)), delta(j, k)),
                (Some((P(j), 1.0)), -delta(i, k)),
            ],
            (M(0, j), M(0, k)) => vec![(m(j, k), 1.0)],
            (M(i, j), M(0, k)) => vec![(m(0, i), delta(j, k)), (m(0, j), -delta(i, k))],
            (M(i, j), M(k, l)) if i > 0 && k > 0 => vec![
                (m(i, l), delta(j, k)),
                (m(j, k), delta(i, l)),
                (m(i, k), -delta(j, l)),
                (m(j, l), -delta(i, k)),
            ],
            _ => return None,
        };
        Some(
            terms
                .into_iter()
                .filter_map(|(g, c)| g.map(|(g, s)| (g, s * c)))
                .filter(|&(_, c)| c != 0.0)
                .collect(),
        )
    };
    let mut table = vec![vec![Vec::new(); basis.len()]; basis.len()];
    for (a, &x) in basis.iter().enumerate() {
        for (b, &y) in basis.iter().enumerate() {
            if a == b {
                continue;
            }
            let terms = match direct(x, y) {
                Some(t) => t,
                None => direct(y, x)
                    .expect("one ordering is tabulated")
                    .into_iter()
                    .map(|(g, c)| (g, -c))
                    .collect(),
            };
            let mut merged: Vec<(usize, f64)> = Vec::new();
            for (g, c) in terms {
                let k = index(g);
                match merged.iter_mut().find(|(i, _)| *i == k) {
                    Some((_, acc)) => *acc += c,
                    None => merged.push((k, c)),
                }
            }
            merged.retain(|(_, c)| *c != 0.0);
            merged.sort_by_key(|(k, _)| *k);
            table[a][b] = merged;
        }
    }
    table
}

/// A formal nonlinear representation: one series per basis element.
#[derive(Clone, Debug)]
pub struct NonlinearRep {
    pub basis: Vec<GeneratorLabel>,
    pub images: Vec<FormalSeries>,
    pub structure: Vec<Vec<Vec<(usize, f64)>>>,
}

impl NonlinearRep {
    pub fn new(
        basis: Vec<GeneratorLabel>,
        images: Vec<FormalSeries>,
        structure: Vec<Vec<Vec<(usize, f64)>>>,
    ) -> Result<Self> {
        let k = basis.len();
        if images.len() != k {
            return Err(Error::DimensionMismatch {
                left: k,
                right: images.len(),
            });
        }
        if structure.len() != k || structure.iter().any(|row| row.len() != k) {
            return Err(Error::Invalid("structure-constant table has the wrong shape".into()));
        }
        if let Some(first) = images.first() {
            for s in &images[1..] {
                first.check_dim(s)?;
            }
        }
        Ok(NonlinearRep {
            basis,
            images,
            structure,
        })
    }

    pub fn dim(&self) -> usize {
        self.images.first().map_or(0, |s| s.dim)
    }

    pub fn degree_cap(&self) -> usize {
        self.images.iter().map(|s| s.degree_cap).min().unwrap_or(0)
    }

    pub fn index_of(&self, label: GeneratorLabel) -> Option<usize> {
        self.basis.iter().position(|&b| b == label)
    }

    pub fn image(&self, label: GeneratorLabel) -> Option<&FormalSeries> {
        self.index_of(label).map(|k| &self.images[k])
    }

    /// The degree-1 parts alone.
    pub fn linear_part(&self) -> NonlinearRep {
        NonlinearRep {
            basis: self.basis.clone(),
            images: self.images.iter().map(|s| s.homogeneous(1)).collect(),
            structure: self.structure.clone(),
        }
    }

    /// `[T_a, T_b] - sum_c f_ab^c T_c`.
    pub fn closure_defect(&self, a: usize, b: usize) -> Result<FormalSeries> {
        let mut r = self.images[a].lie_bracket(&self.images[b])?;
        for &(c, f) in &self.structure[a][b] {
            r = r.sub(&self.images[c].scale(C64::new(f, 0.0)))?;
        }
        Ok(r)
    }
}

/// Points at which residual vector fields are sampled, with the squared-norm weight.
#[derive(Clone, Debug)]
pub struct ProbeSet {
    pub points: Vec<Vec<C64>>,
    pub weight: f64,
}

impl ProbeSet {
    fn norm(&self, v: &[C64]) -> f64 {
        (self.weight * v.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PairResidual {
    pub left: GeneratorLabel,
    pub right: GeneratorLabel,
    /// Largest coefficient of the closure defect, per degree `1..=cap`.
    pub coefficient: Vec<f64>,
    /// Largest probe norm of the closure defect, per degree.
    pub probe: Option<Vec<f64>>,
}

impl PairResidual {
    pub fn involves_boost(&self) -> bool {
        self.left.is_boost() || self.right.is_boost()
    }

    pub fn involves_rotation(&self) -> bool {
        self.left.is_rotation() || self.right.is_rotation()
    }

    pub fn max_coefficient(&self) -> f64 {
        self.coefficient.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_probe(&self) -> Option<f64> {
        self.probe
            .as_ref()
            .map(|p| p.iter().copied().fold(0.0, f64::max))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ClosureReport {
    pub degree_cap: usize,
    pub tolerance: f64,
    pub pairs: Vec<PairResidual>,
    /// Pairs whose coefficient residual exceeds the tolerance.
    pub flagged: Vec<(GeneratorLabel, GeneratorLabel)>,
}

impl ClosureReport {
    pub fn pair(&self, a: GeneratorLabel, b: GeneratorLabel) -> Option<&PairResidual> {
        self.pairs
            .iter()
            .find(|p| (p.left, p.right) == (a, b) || (p.left, p.right) == (b, a))
    }
}

/// Closure residual of every unordered basis pair, degree by degree.
pub fn check_rep(rep: &NonlinearRep, tolerance: f64, probes: Option<&ProbeSet>) -> Result<ClosureReport> {
    let cap = rep.degree_cap();
    let k = rep.basis.len();
    let mut pairs = Vec::new();
    let mut flagged = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            let defect = rep.closure_defect(a, b)?;
            let coefficient: Vec<f64> = (1..=cap).map(|n| defect.max_abs_degree(n)).collect();
            let probe = match probes {
                Some(ps) => {
                    let mut per_degree = vec![0.0f64; cap];
                    for x in &ps.points {
                        for (n, slot) in per_degree.iter_mut().enumerate() {
                            let v = defect.apply_degree(n + 1, x)?;
                            *slot = slot.max(ps.norm(&v));
                        }
                    }
                    Some(per_degree)
                }
                None => None,
            };
            let residual = PairResidual {
                left: rep.basis[a],
                right: rep.basis[b],
                coefficient,
                probe,
            };
            if residual.max_coefficient() > tolerance {
                flagged.push((residual.left, residual.right));
            }
            pairs.push(residual);
        }
    }
    Ok(ClosureReport {
        degree_cap: cap,
        tolerance,
        pairs,
        flagged,
    })
}

/// What [`linearize_with`] does on a resonant component with nonzero right-hand side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResonancePolicy {
    /// Fail with [`Error::ResonantDenominator`].
    Strict,
    /// Leave the component at zero and record it as an obstruction.
    Report,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResonantTuple {
    pub degree: usize,
    pub out: usize,
    pub inputs: Vec<usize>,
    pub denominator: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GeneratorResidual {
    pub generator: GeneratorLabel,
    /// `max |(T_X o Omega - Omega . T1_X)^n|` for `n = 1..=cap`.
    pub per_degree: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub degree_cap: usize,
    pub resonance_tol: f64,
    /// Smallest `|lambda_out - sum lambda_in|` over components with nonzero right-hand side.
    pub min_denominator: f64,
    /// Every tuple with `|denominator| < resonance_tol` and nonzero right-hand side.
    pub near_resonant: Vec<ResonantTuple>,
    /// Resonant tuples whose right-hand side vanished; their component is set to zero.
    pub zero_rhs_resonances: Vec<ResonantTuple>,
    /// Tuples left unsolved under [`ResonancePolicy::Report`].
    pub obstructions: Vec<ResonantTuple>,
    pub residuals: Vec<GeneratorResidual>,
}

impl ResidualReport {
    pub fn residual(&self, g: GeneratorLabel) -> Option<&GeneratorResidual> {
        self.residuals.iter().find(|r| r.generator == g)
    }
}

#[derive(Clone, Debug)]
pub struct Linearization {
    pub omega: FormalSeries,
    pub report: ResidualReport,
}

/// Solves the homological equations for `T_{P0} o Omega = Omega . T1_{P0}` in
/// strict mode.
pub fn linearize(rep: &NonlinearRep, resonance_tol: f64) -> Result<Linearization> {
    linearize_with(rep, resonance_tol, ResonancePolicy::Strict)
}

pub fn linearize_with(
    rep: &NonlinearRep,
    resonance_tol: f64,
    policy: ResonancePolicy,
) -> Result<Linearization> {
    let time = rep
        .index_of(GeneratorLabel::P(0))
        .ok_or_else(|| Error::Invalid("representation has no time-translation generator".into()))?;
    let t = &rep.images[time];
    let dim = t.dim;
    let cap = rep.degree_cap();
    let lin = t.linear_matrix();
    let mut off = 0.0f64;
    for u in 0..dim {
        for v in 0..dim {
            if u != v {
                off = off.max(lin[(u, v)].norm());
            }
        }
    }
    let scale = (0..dim).map(|u| lin[(u, u)].norm()).fold(0.0, f64::max);
    if off > 1e-12 * (1.0 + scale) {
        return Err(Error::NotDiagonal(off));
    }
    let lambda: Vec<C64> = (0..dim).map(|u| lin[(u, u)]).collect();
    let lambda_series = FormalSeries::from_linear(&lin, cap)?;

    let mut omega = FormalSeries::identity(dim, cap)?;
    let mut near_resonant = Vec::new();
    let mut zero_rhs = Vec::new();
    let mut obstructions = Vec::new();
    let mut min_denominator = f64::INFINITY;
    for n in 2..=cap {
        let e = t.compose(&omega)?.sub(&omega.bullet(&lambda_series)?)?.homogeneous(n);
        let e_scale = e.max_abs();
        let zero_tol = 1e-13 * (1.0 + e_scale);
        for o in 0..dim {
            for (m, rhs) in e.comps[o].sorted_terms() {
                let denom = lambda[o] - m.vars().iter().map(|&v| lambda[v as usize]).sum::<C64>();
                let tuple = || ResonantTuple {
                    degree: n,
                    out: o,
                    inputs: m.vars().iter().map(|&v| v as usize).collect(),
                    denominator: denom.norm(),
                    rhs: rhs.norm(),
                };
                if rhs.norm() <= zero_tol {
                    if denom.norm() < resonance_tol {
                        zero_rhs.push(tuple());
                    }
                    continue;
                }
                min_denominator = min_denominator.min(denom.norm());
                if denom.norm() < resonance_tol {
                    let tup = tuple();
                    match policy {
                        ResonancePolicy::Strict => {
                            return Err(Error::ResonantDenominator {
                                degree: n,
                                out: o,
                                inputs: tup.inputs,
                                denominator: tup.denominator,
                                rhs: tup.rhs,
                            })
                        }
                        ResonancePolicy::Report => {
                            near_resonant.push(tup.clone());
                            obstructions.push(tup);
                            continue;
                        }
                    }
                }
                omega.comps[o].add_term(m, -rhs / denom);
            }
        }
    }
    let residuals = intertwining_residuals(rep, &omega)?;
    Ok(Linearization {
        omega,
        report: ResidualReport {
            degree_cap: cap,
            resonance_tol,
            min_denominator,
            near_resonant,
            zero_rhs_resonances: zero_rhs,
            obstructions,
            residuals,
        },
    })
}

/// `max |(T_X o Omega - Omega . T1_X)^n|` for every generator and degree.
pub fn intertwining_residuals(rep: &NonlinearRep, omega: &FormalSeries) -> Result<Vec<GeneratorResidual>> {
    let cap = rep.degree_cap().min(omega.degree_cap);
    rep.basis
        .iter()
        .zip(&rep.images)
        .map(|(&g, t)| {
            let lin = t.homogeneous(1);
            let r = t.compose(omega)?.sub(&omega.bullet(&lin)?)?;
            Ok(GeneratorResidual {
                generator: g,
                per_degree: (1..=cap).map(|n| r.max_abs_degree(n)).collect(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn linear_bracket_is_commutator() {
        let a = DMatrix::from_row_slice(2, 2, &[c(1.0), c(2.0), c(0.0), c(-1.0)]);
        let b = DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(3.0), c(0.5)]);
        let fa = FormalSeries::from_linear(&a, 3).unwrap();
        let fb = FormalSeries::from_linear(&b, 3).unwrap();
        let br = fa.lie_bracket(&fb).unwrap().linear_matrix();
        let want = &a * &b - &b * &a;
        assert!((br - want).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn bullet_with_identity_is_euler_operator() {
        let mut f = FormalSeries::zero(2, 3).unwrap();
        f.set_tensor_entry(0, &[0, 1], c(2.0)).unwrap();
        f.set_tensor_entry(1, &[1, 1, 0], c(-1.0)).unwrap();
        f.set_tensor_entry(1, &[1], c(0.5)).unwrap();
        let id = FormalSeries::identity(2, 3).unwrap();
        let r = f.bullet(&id).unwrap();
        for n in 1..=3 {
            let want = f.homogeneous(n).scale(c(n as f64));
            assert!(r.homogeneous(n).sub(&want).unwrap().max_abs() < 1e-15);
        }
    }

    #[test]
    fn tensor_entries_round_trip_through_json() {
        let mut f = FormalSeries::zero(3, 3).unwrap();
        f.set_tensor_entry(2, &[0, 1, 1], C64::new(0.25, -1.0)).unwrap();
        f.set_tensor_entry(0, &[2], c(1.5)).unwrap();
        assert!((f.tensor_entry(2, &[1, 0, 1]) - C64::new(0.25, -1.0)).norm() < 1e-15);
        // Three ordered slots carry the same entry.
        assert!((f.coefficient(2, &[0, 1, 1]) - C64::new(0.75, -3.0)).norm() < 1e-15);
        let back = FormalSeries::from_json(&f.to_json()).unwrap();
        assert!(back.sub(&f).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn singular_linear_part_is_not_invertible() {
        let mut f = FormalSeries::zero(2, 2).unwrap();
        f.set_tensor_entry(0, &[0], c(1.0)).unwrap();
        assert!(matches!(f.invert(), Err(Error::NotInvertible)));
    }

    #[test]
    fn structure_constants_are_antisymmetric() {
        for d in 1..=3 {
            let t = poincare_structure_constants(d);
            let k = t.len();
            assert_eq!(k, (d + 1) * (d + 2) / 2);
            for a in 0..k {
                assert!(t[a][a].is_empty());
                for b in 0..k {
                    let mut neg: Vec<(usize, f64)> = t[b][a].iter().map(|&(g, c)| (g, -c)).collect();
                    neg.sort_by_key(|x| x.0);
                    assert_eq!(t[a][b], neg);
                }
            }
            // Jacobi: [[a,b],c] + [[b,c],a] + [[c,a],b] = 0.
            let bracket_of = |x: &[(usize, f64)], c: usize| {
                let mut acc = vec![0.0; k];
                for &(g, s) in x {
                    for &(h, r) in &t[g][c] {
                        acc[h] += s * r;
                    }
                }
                acc
            };
            for a in 0..k {
                for b in 0..k {
                    for cc in 0..k {
                        let x = bracket_of(&t[a][b], cc);
                        let y = bracket_of(&t[b][cc], a);
                        let z = bracket_of(&t[cc][a], b);
                        for h in 0..k {
                            assert_eq!(x[h] + y[h] + z[h], 0.0, "d={d} ({a},{b},{cc})");
                        }
                    }
                }
            }
        }
    }
}

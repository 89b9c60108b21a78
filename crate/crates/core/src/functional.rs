//! Polynomial functionals on the truncated phase space and the normal
//! star-product.
//!
//! A functional is a polynomial in the variables `abar_i` (label `i`) and
//! `a_i` (label `N + i`). Derivatives follow the quadrature convention of
//! [`crate::modes`]: `delta/delta a(k)` becomes `(1/w) d/da_i`, so the
//! normalized derivative is `D_{a_i} = sqrt(2 omega_i) / w * d/da_i`.
//!
//! The deformation parameter of a generic star-product, `lambda = i hbar / 2`,
//! is absorbed into the cochains: the coefficient of `hbar^n` in `F * G` is
//!
//! ```text
//! C_n(F, G) = 1/n! sum_{i_1..i_n} prod_l (2 omega_{i_l} / w)
//!             d^n F / da_{i_1}..da_{i_n} * d^n G / dabar_{i_1}..dabar_{i_n}
//! ```
//!
//! and the star-bracket `(2 / i hbar)(F * G - G * F)` starts with the Poisson
//! bracket at `hbar^0`.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modes::{same_grid, ModeGrid, ModeVector};
use crate::poly::{factorial, Monomial, Poly, MAX_DEGREE, MAX_VARIABLES};

const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const MINUS_TWO_I: C64 = C64 { re: 0.0, im: -2.0 };

/// Which half of the phase-space coordinates a derivative acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Abar,
    A,
}

/// `F(abar, a) = sum c_{alpha beta} abar^alpha a^beta`, truncated at `max_degree`.
#[derive(Clone, Debug)]
pub struct PolyFunctional {
    grid: Arc<ModeGrid>,
    max_degree: usize,
    poly: Poly,
    overflow: f64,
}

impl PolyFunctional {
    pub fn zero(grid: Arc<ModeGrid>, max_degree: usize) -> Result<Self> {
        if 2 * grid.len() > MAX_VARIABLES {
            return Err(Error::GridTooLarge {
                modes: grid.len(),
                max: MAX_VARIABLES / 2,
            });
        }
        if max_degree > MAX_DEGREE {
            return Err(Error::Invalid(format!(
                "max_degree {max_degree} exceeds the supported {MAX_DEGREE}"
            )));
        }
        Ok(PolyFunctional {
            grid,
            max_degree,
            poly: Poly::new(),
            overflow: 0.0,
        })
    }

    pub fn constant(grid: Arc<ModeGrid>, max_degree: usize, c: C64) -> Result<Self> {
        let mut f = PolyFunctional::zero(grid, max_degree)?;
        f.poly.add_term(Monomial::ONE, c);
        Ok(f)
    }

    /// The single monomial `c abar^alpha a^beta`; multi-indices are lists of
    /// mode indices with repetition, in any order.
    pub fn monomial(
        grid: Arc<ModeGrid>,
        max_degree: usize,
        alpha: &[usize],
        beta: &[usize],
        c: C64,
    ) -> Result<Self> {
        let mut f = PolyFunctional::zero(grid, max_degree)?;
        let m = f.monomial_of(alpha, beta)?;
        if m.degree() <= max_degree {
            f.poly.add_term(m, c);
        } else {
            f.overflow = c.norm();
        }
        Ok(f)
    }

    pub fn abar(grid: Arc<ModeGrid>, max_degree: usize, i: usize) -> Result<Self> {
        PolyFunctional::monomial(grid, max_degree, &[i], &[], ONE)
    }

    pub fn a(grid: Arc<ModeGrid>, max_degree: usize, i: usize) -> Result<Self> {
        PolyFunctional::monomial(grid, max_degree, &[], &[i], ONE)
    }

    /// Wraps a polynomial in the variable labels described in the module docs.
    pub fn from_poly(grid: Arc<ModeGrid>, max_degree: usize, mut poly: Poly) -> Result<Self> {
        let mut f = PolyFunctional::zero(grid, max_degree)?;
        let limit = 2 * f.grid.len();
        for (m, c) in poly.terms() {
            if m.vars().iter().any(|&v| v as usize >= limit) {
                return Err(Error::IndexOutOfRange {
                    index: *m.vars().last().unwrap() as usize,
                    count: limit,
                });
            }
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        f.overflow = poly.truncate(max_degree);
        poly.compact();
        f.poly = poly;
        Ok(f)
    }

    fn monomial_of(&self, alpha: &[usize], beta: &[usize]) -> Result<Monomial> {
        let n = self.grid.len();
        for &i in alpha.iter().chain(beta) {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, count: n });
            }
        }
        Monomial::from_vars(alpha.iter().copied().chain(beta.iter().map(|&i| i + n))).ok_or_else(
            || {
                Error::Invalid(format!(
                    "monomial degree {} exceeds {MAX_DEGREE}",
                    alpha.len() + beta.len()
                ))
            },
        )
    }

    pub fn grid(&self) -> &Arc<ModeGrid> {
        &self.grid
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn poly(&self) -> &Poly {
        &self.poly
    }

    /// Largest coefficient magnitude discarded by truncation so far (0 if none).
    pub fn overflow(&self) -> f64 {
        self.overflow
    }

    pub fn is_truncated(&self) -> bool {
        self.overflow > 0.0
    }

    pub fn is_zero(&self) -> bool {
        self.poly.max_abs() == 0.0
    }

    pub fn degree(&self) -> usize {
        self.poly.degree()
    }

    /// Highest power of `a` variables in any term.
    pub fn a_degree(&self) -> usize {
        let n = self.grid.len();
        self.poly
            .terms()
            .filter(|(_, c)| c.norm_sqr() != 0.0)
            .map(|(m, _)| m.vars().iter().filter(|&&v| v as usize >= n).count())
            .max()
            .unwrap_or(0)
    }

    /// Highest power of `abar` variables in any term.
    pub fn abar_degree(&self) -> usize {
        let n = self.grid.len();
        self.poly
            .terms()
            .filter(|(_, c)| c.norm_sqr() != 0.0)
            .map(|(m, _)| m.vars().iter().filter(|&&v| (v as usize) < n).count())
            .max()
            .unwrap_or(0)
    }

    /// Coefficient of `abar^alpha a^beta`.
    pub fn coeff(&self, alpha: &[usize], beta: &[usize]) -> Result<C64> {
        Ok(self.poly.coeff(&self.monomial_of(alpha, beta)?))
    }

    pub fn max_abs(&self) -> f64 {
        self.poly.max_abs()
    }

    /// Copy with a different truncation bound.
    pub fn with_max_degree(&self, max_degree: usize) -> Result<Self> {
        let mut f = PolyFunctional::from_poly(self.grid.clone(), max_degree, self.poly.clone())?;
        f.overflow = f.overflow.max(self.overflow);
        Ok(f)
    }

    fn derived(&self, other: &PolyFunctional, poly: Poly, dropped: f64) -> PolyFunctional {
        let mut poly = poly;
        poly.compact();
        PolyFunctional {
            grid: self.grid.clone(),
            max_degree: self.max_degree.min(other.max_degree),
            poly,
            overflow: dropped.max(self.overflow).max(other.overflow),
        }
    }

    fn unary(&self, poly: Poly) -> PolyFunctional {
        let mut poly = poly;
        poly.compact();
        PolyFunctional {
            grid: self.grid.clone(),
            max_degree: self.max_degree,
            poly,
            overflow: self.overflow,
        }
    }

    /// `F(subs(z))`: each coordinate replaced by a polynomial, truncated at `max_degree`.
    pub(crate) fn substituted(&self, subs: &[Poly]) -> PolyFunctional {
        let (poly, dropped) = self.poly.substitute(subs, self.max_degree);
        let mut out = self.unary(poly);
        out.overflow = out.overflow.max(dropped);
        out
    }

    pub fn evaluate(&self, v: &ModeVector) -> Result<C64> {
        same_grid(&self.grid, &v.grid)?;
        Ok(self.poly.evaluate(&v.coords()))
    }

    /// Evaluation at raw phase-space coordinates (`abar` block, then `a` block).
    pub fn evaluate_coords(&self, z: &[C64]) -> Result<C64> {
        if z.len() != 2 * self.grid.len() {
            return Err(Error::Shape {
                expected: 2 * self.grid.len(),
                got: z.len(),
            });
        }
        Ok(self.poly.evaluate(z))
    }

    pub fn add(&self, other: &PolyFunctional) -> Result<PolyFunctional> {
        same_grid(&self.grid, &other.grid)?;
        Ok(self.derived(other, self.poly.add(&other.poly), 0.0))
    }

    pub fn sub(&self, other: &PolyFunctional) -> Result<PolyFunctional> {
        same_grid(&self.grid, &other.grid)?;
        Ok(self.derived(other, self.poly.sub(&other.poly), 0.0))
    }

    pub fn scale(&self, s: C64) -> PolyFunctional {
        self.unary(self.poly.scale(s))
    }

    /// Pointwise product, truncated at the smaller of the two degree bounds.
    pub fn multiply(&self, other: &PolyFunctional) -> Result<PolyFunctional> {
        same_grid(&self.grid, &other.grid)?;
        let cap = self.max_degree.min(other.max_degree);
        let (p, dropped) = self.poly.mul_truncated(&other.poly, cap);
        Ok(self.derived(other, p, dropped))
    }

    fn label(&self, slot: Slot, i: usize) -> Result<usize> {
        let n = self.grid.len();
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, count: n });
        }
        Ok(match slot {
            Slot::Abar => i,
            Slot::A => n + i,
        })
    }

    /// Plain partial derivative `dF / d(slot_i)`.
    pub fn partial(&self, slot: Slot, i: usize) -> Result<PolyFunctional> {
        let v = self.label(slot, i)?;
        Ok(self.unary(self.poly.derivative(v)))
    }

    /// Normalized functional derivative `sqrt(2 omega_i) / w * dF / d(slot_i)`.
    pub fn dnorm(&self, slot: Slot, i: usize) -> Result<PolyFunctional> {
        let v = self.label(slot, i)?;
        let s = (2.0 * self.grid.omega(i)).sqrt() / self.grid.weight();
        Ok(self.unary(self.poly.derivative(v).scale(C64::new(s, 0.0))))
    }

    /// `(2/i) sum_i w (D_{a_i}F D_{abar_i}G - D_{abar_i}F D_{a_i}G)`.
    pub fn poisson(&self, other: &PolyFunctional) -> Result<PolyFunctional> {
        same_grid(&self.grid, &other.grid)?;
        let n = self.grid.len();
        let cap = self.max_degree.min(other.max_degree);
        let gf = self.poly.gradient();
        let gg = other.poly.gradient();
        let mut out = Poly::new();
        let mut dropped = 0.0f64;
        for i in 0..n {
            let s = MINUS_TWO_I * (2.0 * self.grid.omega(i) / self.grid.weight());
            for (x, y, sign) in [(n + i, i, 1.0), (i, n + i, -1.0)] {
                if let (Some(p), Some(q)) = (gf.get(&x), gg.get(&y)) {
                    let (prod, d) = p.mul_truncated(q, cap);
                    dropped = dropped.max(d);
                    out.add_scaled(&prod, s * sign);
                }
            }
        }
        Ok(self.derived(other, out, dropped))
    }

    /// The `hbar^order` cochain of the normal star-product; `order = 0` is the
    /// pointwise product.
    pub fn normal_cochain(&self, order: usize, other: &PolyFunctional) -> Result<PolyFunctional> {
        same_grid(&self.grid, &other.grid)?;
        if order == 0 {
            return self.multiply(other);
        }
        let n = self.grid.len();
        let cap = self.max_degree.min(other.max_degree);
        let weights: Vec<f64> = (0..n)
            .map(|i| 2.0 * self.grid.omega(i) / self.grid.weight())
            .collect();

        // a-content of the left factor and abar-content of the right factor.
        let left: Vec<(Monomial, C64, Vec<(usize, usize)>)> = self
            .poly
            .sorted_terms()
            .into_iter()
            .map(|(m, c)| {
                let p = m.powers().into_iter().filter(|&(v, _)| v >= n).map(|(v, k)| (v - n, k)).collect();
                (m, c, p)
            })
            .collect();
        let right: Vec<(Monomial, C64, Vec<(usize, usize)>)> = other
            .poly
            .sorted_terms()
            .into_iter()
            .map(|(m, c)| {
                let p = m.powers().into_iter().filter(|&(v, _)| v < n).collect();
                (m, c, p)
            })
            .collect();

        let mut out = Poly::new();
        let mut dropped = 0.0f64;
        let mut common: Vec<(usize, usize, usize)> = Vec::new();
        let mut mu: Vec<usize> = Vec::new();
        for (mf, cf, beta) in &left {
            let a_count: usize = beta.iter().map(|p| p.1).sum();
            if a_count < order {
                continue;
            }
            for (mg, cg, alpha) in &right {
                common.clear();
                let (mut x, mut y) = (0, 0);
                while x < beta.len() && y < alpha.len() {
                    match beta[x].0.cmp(&alpha[y].0) {
                        std::cmp::Ordering::Less => x += 1,
                        std::cmp::Ordering::Greater => y += 1,
                        std::cmp::Ordering::Equal => {
                            common.push((beta[x].0, beta[x].1, alpha[y].1));
                            x += 1;
                            y += 1;
                        }
                    }
                }
                let reach: usize = common.iter().map(|&(_, b, a)| b.min(a)).sum();
                if reach < order {
                    continue;
                }
                let degree = mf.degree() + mg.degree() - 2 * order;
                let base = cf * cg;
                mu.clear();
                mu.resize(common.len(), 0);
                enumerate_contractions(&common, 0, order, &mut mu, &mut |mu| {
                    let mut coef = 1.0;
                    let mut removed_f: Vec<usize> = Vec::with_capacity(order);
                    let mut removed_g: Vec<usize> = Vec::with_capacity(order);
                    for (&(mode, b, a), &k) in common.iter().zip(mu.iter()) {
                        if k == 0 {
                            continue;
                        }
                        coef *= weights[mode].powi(k as i32) / factorial(k)
                            * falling(b, k)
                            * falling(a, k);
                        removed_f.extend(std::iter::repeat_n(n + mode, k));
                        removed_g.extend(std::iter::repeat_n(mode, k));
                    }
                    let c = base * coef;
                    if degree > cap {
                        dropped = dropped.max(c.norm());
                        return;
                    }
                    let rest_f = remove_factors(mf, &removed_f);
                    let rest_g = remove_factors(mg, &removed_g);
                    let m = rest_f.mul(&rest_g).expect("degree below the cap");
                    out.add_term(m, c);
                });
            }
        }
        Ok(self.derived(other, out, dropped))
    }

    /// `F *_N G` through `hbar^hbar_order`.
    pub fn star_normal(&self, other: &PolyFunctional, hbar_order: usize) -> Result<FormalSeriesInHbar> {
        FormalSeriesInHbar::from_functional(self.clone(), hbar_order)
            .star(&FormalSeriesInHbar::from_functional(other.clone(), hbar_order), hbar_order)
    }

    /// `(2 / i hbar)(F *_N G - G *_N F)` through `hbar^hbar_order`.
    pub fn star_bracket(&self, other: &PolyFunctional, hbar_order: usize) -> Result<FormalSeriesInHbar> {
        FormalSeriesInHbar::from_functional(self.clone(), hbar_order + 1).star_bracket(
            &FormalSeriesInHbar::from_functional(other.clone(), hbar_order + 1),
            hbar_order,
        )
    }

    pub fn to_json(&self) -> String {
        let n = self.grid.len();
        let terms = self
            .poly
            .sorted_terms()
            .into_iter()
            .map(|(m, c)| {
                let alpha: Vec<usize> = m.vars().iter().map(|&v| v as usize).filter(|&v| v < n).collect();
                let beta: Vec<usize> = m
                    .vars()
                    .iter()
                    .map(|&v| v as usize)
                    .filter(|&v| v >= n)
                    .map(|v| v - n)
                    .collect();
                FunctionalTerm {
                    m: alpha.len(),
                    n: beta.len(),
                    alpha,
                    beta,
                    re: c.re,
                    im: c.im,
                }
            })
            .collect();
        let file = FunctionalFile {
            grid_hash: self.grid.grid_hash(),
            max_degree: self.max_degree,
            terms,
        };
        serde_json::to_string(&file).expect("functional serializes")
    }

    pub fn from_json(grid: Arc<ModeGrid>, text: &str) -> Result<Self> {
        let file: FunctionalFile = serde_json::from_str(text)?;
        if file.grid_hash != grid.grid_hash() {
            return Err(Error::GridMismatch);
        }
        let mut f = PolyFunctional::zero(grid, file.max_degree)?;
        let mut poly = Poly::new();
        for t in &file.terms {
            if t.alpha.len() != t.m || t.beta.len() != t.n {
                return Err(Error::Invalid(format!(
                    "term bidegree ({}, {}) does not match its multi-indices",
                    t.m, t.n
                )));
            }
            poly.add_term(f.monomial_of(&t.alpha, &t.beta)?, C64::new(t.re, t.im));
        }
        f = PolyFunctional::from_poly(f.grid.clone(), file.max_degree, poly)?;
        Ok(f)
    }
}

fn falling(n: usize, k: usize) -> f64 {
    ((n - k + 1)..=n).map(|x| x as f64).product()
}

fn remove_factors(m: &Monomial, labels: &[usize]) -> Monomial {
    labels
        .iter()
        .fold(*m, |acc, &v| acc.without(v).expect("factor present"))
}

/// Calls `visit` for every `mu` with `mu_j <= min(b_j, a_j)` and `sum mu = remaining`.
fn enumerate_contractions<F: FnMut(&[usize])>(
    common: &[(usize, usize, usize)],
    pos: usize,
    remaining: usize,
    mu: &mut Vec<usize>,
    visit: &mut F,
) {
    if pos == common.len() {
        if remaining == 0 {
            visit(mu);
        }
        return;
    }
    let tail: usize = common[pos + 1..].iter().map(|&(_, b, a)| b.min(a)).sum();
    let (_, b, a) = common[pos];
    let hi = b.min(a).min(remaining);
    let lo = remaining.saturating_sub(tail);
    for k in lo..=hi {
        mu[pos] = k;
        enumerate_contractions(common, pos + 1, remaining - k, mu, visit);
    }
    mu[pos] = 0;
}

#[derive(Serialize, Deserialize)]
struct FunctionalTerm {
    m: usize,
    n: usize,
    alpha: Vec<usize>,
    beta: Vec<usize>,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct FunctionalFile {
    grid_hash: String,
    #[serde(default = "default_max_degree")]
    max_degree: usize,
    terms: Vec<FunctionalTerm>,
}

fn default_max_degree() -> usize {
    MAX_DEGREE
}

/// `sum_{p=0}^{order} hbar^p F_p`.
#[derive(Clone, Debug)]
pub struct FormalSeriesInHbar {
    pub coeffs: Vec<PolyFunctional>,
}

impl FormalSeriesInHbar {
    /// `F` placed at `hbar^0`, zeros up to `hbar_order`.
    pub fn from_functional(f: PolyFunctional, hbar_order: usize) -> Self {
        let zero = f.unary(Poly::new());
        let mut coeffs = vec![f];
        coeffs.extend(std::iter::repeat_n(zero, hbar_order));
        FormalSeriesInHbar { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, p: usize) -> &PolyFunctional {
        &self.coeffs[p]
    }

    pub fn grid(&self) -> &Arc<ModeGrid> {
        self.coeffs[0].grid()
    }

    pub fn overflow(&self) -> f64 {
        self.coeffs.iter().map(|c| c.overflow()).fold(0.0, f64::max)
    }

    /// Largest coefficient magnitude at each power of `hbar`.
    pub fn max_abs_per_order(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.max_abs()).collect()
    }

    pub fn sub(&self, other: &FormalSeriesInHbar) -> Result<FormalSeriesInHbar> {
        let order = self.order().min(other.order());
        let coeffs = (0..=order)
            .map(|p| self.coeffs[p].sub(&other.coeffs[p]))
            .collect::<Result<_>>()?;
        Ok(FormalSeriesInHbar { coeffs })
    }

    pub fn add(&self, other: &FormalSeriesInHbar) -> Result<FormalSeriesInHbar> {
        let order = self.order().min(other.order());
        let coeffs = (0..=order)
            .map(|p| self.coeffs[p].add(&other.coeffs[p]))
            .collect::<Result<_>>()?;
        Ok(FormalSeriesInHbar { coeffs })
    }

    pub fn scale(&self, s: C64) -> FormalSeriesInHbar {
        FormalSeriesInHbar {
            coeffs: self.coeffs.iter().map(|c| c.scale(s)).collect(),
        }
    }

    /// Normal star-product of two series, `sum hbar^{p+q+n} C_n(F_p, G_q)`.
    pub fn star(&self, other: &FormalSeriesInHbar, hbar_order: usize) -> Result<FormalSeriesInHbar> {
        same_grid(self.grid(), other.grid())?;
        let mut coeffs: Vec<PolyFunctional> = Vec::with_capacity(hbar_order + 1);
        for r in 0..=hbar_order {
            let mut acc = self.coeffs[0].unary(Poly::new());
            acc.max_degree = self.coeffs[0].max_degree.min(other.coeffs[0].max_degree);
            for p in 0..=r.min(self.order()) {
                for q in 0..=(r - p).min(other.order()) {
                    let n = r - p - q;
                    let (f, g) = (&self.coeffs[p], &other.coeffs[q]);
                    if f.is_zero() || g.is_zero() {
                        continue;
                    }
                    if n > 0 && (f.a_degree() < n || g.abar_degree() < n) {
                        continue;
                    }
                    acc = acc.add(&f.normal_cochain(n, g)?)?;
                }
            }
            coeffs.push(acc);
        }
        Ok(FormalSeriesInHbar { coeffs })
    }

    /// `(2 / i hbar)(F * G - G * F)` through `hbar^hbar_order`. Needs both
    /// operands to order `hbar_order + 1` for a complete result.
    pub fn star_bracket(&self, other: &FormalSeriesInHbar, hbar_order: usize) -> Result<FormalSeriesInHbar> {
        let fg = self.star(other, hbar_order + 1)?;
        let gf = other.star(self, hbar_order + 1)?;
        let diff = fg.sub(&gf)?;
        let coeffs = diff.coeffs[1..]
            .iter()
            .map(|c| c.scale(MINUS_TWO_I))
            .collect();
        Ok(FormalSeriesInHbar { coeffs })
    }

    pub fn evaluate(&self, v: &ModeVector) -> Result<Vec<C64>> {
        self.coeffs.iter().map(|c| c.evaluate(v)).collect()
    }
}

/// `sum_{p = min_power}^{max_power} hbar^p F_p` with a convergence diagnostic per power.
#[derive(Clone, Debug)]
pub struct LaurentSeries {
    pub min_power: i64,
    pub coeffs: Vec<PolyFunctional>,
    /// Largest coefficient of the last included term's contribution, per power.
    pub last_term: Vec<f64>,
}

impl LaurentSeries {
    pub fn max_power(&self) -> i64 {
        self.min_power + self.coeffs.len() as i64 - 1
    }

    pub fn coeff(&self, power: i64) -> Option<&PolyFunctional> {
        if power < self.min_power {
            return None;
        }
        self.coeffs.get((power - self.min_power) as usize)
    }

    pub fn last_term(&self, power: i64) -> Option<f64> {
        if power < self.min_power {
            return None;
        }
        self.last_term.get((power - self.min_power) as usize).copied()
    }
}

/// `(*F)^k` through `hbar^hbar_order`, left-associated; `k = 0` gives 1.
pub fn star_power(f: &PolyFunctional, k: usize, hbar_order: usize) -> Result<FormalSeriesInHbar> {
    let one = PolyFunctional::constant(f.grid.clone(), f.max_degree, ONE)?;
    let base = FormalSeriesInHbar::from_functional(f.clone(), hbar_order);
    let mut acc = FormalSeriesInHbar::from_functional(one, hbar_order);
    for _ in 0..k {
        acc = acc.star(&base, hbar_order)?;
    }
    Ok(acc)
}

/// Truncated star-exponential `sum_{n=0}^{term_count} (1/n!) (t / i hbar)^n (*F)^n`
/// collected by powers of `hbar` in `[-term_count, hbar_order]`.
///
/// Fails with [`Error::Overflow`] when a partial-sum coefficient exceeds `bound`.
pub fn star_exponential(
    f: &PolyFunctional,
    t: f64,
    hbar_order: usize,
    term_count: usize,
    bound: f64,
) -> Result<LaurentSeries> {
    let k = term_count;
    let powers = k + hbar_order + 1;
    let zero = f.unary(Poly::new());
    let mut coeffs = vec![zero; powers];
    let mut last_term = vec![0.0; powers];
    let one = PolyFunctional::constant(f.grid.clone(), f.max_degree, ONE)?;
    let base = FormalSeriesInHbar::from_functional(f.clone(), hbar_order + k);
    let mut power = FormalSeriesInHbar::from_functional(one, hbar_order + k);
    for n in 0..=k {
        if n > 0 {
            power = power.star(&base, hbar_order + k)?;
        }
        // (t/i)^n / n!
        let prefactor = C64::new(0.0, -t).powu(n as u32) / factorial(n);
        for p in 0..=(hbar_order + n) {
            let idx = p + k - n;
            let term = power.coeffs[p].scale(prefactor);
            if n == k {
                last_term[idx] = term.max_abs();
            }
            coeffs[idx] = coeffs[idx].add(&term)?;
            let magnitude = coeffs[idx].max_abs();
            if !(magnitude <= bound) {
                return Err(Error::Overflow {
                    magnitude,
                    bound,
                    power: idx as i64 - k as i64,
                });
            }
        }
    }
    Ok(LaurentSeries {
        min_power: -(k as i64),
        coeffs,
        last_term,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::GridSpec;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Arc<ModeGrid> {
        ModeGrid::new(GridSpec::new(1, n, 2.0 * PI, 1.0)).unwrap()
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn contraction_of_annihilator_and_creator() {
        let g = grid(4);
        let w = g.weight();
        for p in 0..4 {
            for q in 0..4 {
                let ap = PolyFunctional::a(g.clone(), 6, p).unwrap();
                let aq = PolyFunctional::abar(g.clone(), 6, q).unwrap();
                let c1 = ap.normal_cochain(1, &aq).unwrap();
                let want = if p == q { 2.0 * g.omega(p) / w } else { 0.0 };
                assert!((c1.coeff(&[], &[]).unwrap() - want).norm() < 1e-15);
                assert_eq!(c1.degree(), 0);
            }
        }
    }

    #[test]
    fn cochain_annihilated_by_low_degree() {
        let g = grid(4);
        let f = PolyFunctional::monomial(g.clone(), 6, &[0, 1], &[2], c(1.0, 0.0)).unwrap();
        let h = PolyFunctional::monomial(g.clone(), 6, &[2, 2], &[3], c(1.0, 0.0)).unwrap();
        assert!(f.normal_cochain(2, &h).unwrap().is_zero());
        assert!(!f.normal_cochain(1, &h).unwrap().is_zero());
    }

    #[test]
    fn double_contraction_counts_multiplicity() {
        // C_2(a_0^2, abar_0^2) = (1/2!) (2w0/w)^2 * 2 * 2
        let g = grid(4);
        let f = PolyFunctional::monomial(g.clone(), 6, &[], &[0, 0], c(1.0, 0.0)).unwrap();
        let h = PolyFunctional::monomial(g.clone(), 6, &[0, 0], &[], c(1.0, 0.0)).unwrap();
        let s = 2.0 * g.omega(0) / g.weight();
        let got = f.normal_cochain(2, &h).unwrap().coeff(&[], &[]).unwrap();
        assert!((got - 2.0 * s * s).norm() < 1e-13);
    }

    #[test]
    fn poisson_of_coordinates() {
        let g = grid(4);
        let ap = PolyFunctional::a(g.clone(), 4, 1).unwrap();
        let aq = PolyFunctional::abar(g.clone(), 4, 1).unwrap();
        let got = ap.poisson(&aq).unwrap().coeff(&[], &[]).unwrap();
        let want = C64::new(0.0, -2.0) * (2.0 * g.omega(1) / g.weight());
        assert!((got - want).norm() < 1e-15);
    }

    #[test]
    fn truncation_is_reported() {
        let g = grid(4);
        let f = PolyFunctional::monomial(g.clone(), 2, &[0], &[1], c(1.0, 0.0)).unwrap();
        let prod = f.multiply(&f).unwrap();
        assert!(prod.is_zero());
        assert!(prod.is_truncated());
        assert!(!f.is_truncated());
    }

    #[test]
    fn json_round_trip() {
        let g = grid(4);
        let f = PolyFunctional::monomial(g.clone(), 4, &[0, 3], &[1], c(0.5, -2.0))
            .unwrap()
            .add(&PolyFunctional::constant(g.clone(), 4, c(1.0, 0.0)).unwrap())
            .unwrap();
        let text = f.to_json();
        let back = PolyFunctional::from_json(g.clone(), &text).unwrap();
        assert!(back.sub(&f).unwrap().is_zero());
        assert_eq!(back.to_json(), text);
        assert!(PolyFunctional::from_json(grid(8), &text).is_err());
    }

    #[test]
    fn star_exponential_of_zero_is_one() {
        let g = grid(4);
        let zero = PolyFunctional::zero(g.clone(), 6).unwrap();
        let e = star_exponential(&zero, 1.3, 2, 3, 1e12).unwrap();
        for p in e.min_power..=e.max_power() {
            let want = if p == 0 { 1.0 } else { 0.0 };
            let got = e.coeff(p).unwrap();
            assert!((got.coeff(&[], &[]).unwrap() - want).norm() == 0.0);
            assert!(got.poly().terms().all(|(m, c)| m.degree() == 0 || c.norm() == 0.0));
        }
        let e0 = star_exponential(&zero, 1.3, 2, 0, 1e12).unwrap();
        assert_eq!(e0.min_power, 0);
    }

    #[test]
    fn overflow_bound_is_enforced() {
        let g = grid(4);
        let f = PolyFunctional::monomial(g.clone(), 8, &[1], &[1], c(1e3, 0.0)).unwrap();
        let err = star_exponential(&f, 10.0, 1, 3, 1e6).unwrap_err();
        assert!(matches!(err, Error::Overflow { .. }));
    }
}

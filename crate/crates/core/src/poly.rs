//! Sparse multivariate polynomials over the complex numbers.
//!
//! A monomial is stored as a sorted multi-index of variable labels, so
//! `x_0 x_2^2` is `[0, 2, 2]`. This is the storage behind both the
//! functionals of the star-product algebra and the component polynomials of
//! formal series of multilinear maps.

use std::fmt;

use num_complex::Complex64 as C64;
use rustc_hash::FxHashMap;

/// Highest total degree a monomial may carry.
pub const MAX_DEGREE: usize = 12;

/// Largest variable label a monomial can hold.
pub const MAX_VARIABLES: usize = 256;

/// A monomial `x_{v_1} x_{v_2} ... x_{v_p}` with `v_1 <= ... <= v_p`.
///
/// Ordering is by degree first, then lexicographic on the sorted labels.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Monomial {
    len: u8,
    vars: [u8; MAX_DEGREE],
}

impl Monomial {
    pub const ONE: Monomial = Monomial {
        len: 0,
        vars: [0; MAX_DEGREE],
    };

    pub fn var(v: usize) -> Self {
        assert!(v < MAX_VARIABLES, "variable label {v} out of range");
        let mut vars = [0; MAX_DEGREE];
        vars[0] = v as u8;
        Monomial { len: 1, vars }
    }

    /// Builds a monomial from labels in any order. `None` if the degree
    /// exceeds [`MAX_DEGREE`] or a label is out of range.
    pub fn from_vars<I: IntoIterator<Item = usize>>(labels: I) -> Option<Self> {
        let mut vars = [0u8; MAX_DEGREE];
        let mut len = 0usize;
        for v in labels {
            if len == MAX_DEGREE || v >= MAX_VARIABLES {
                return None;
            }
            vars[len] = v as u8;
            len += 1;
        }
        vars[..len].sort_unstable();
        Some(Monomial {
            len: len as u8,
            vars,
        })
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.len as usize
    }

    #[inline]
    pub fn vars(&self) -> &[u8] {
        &self.vars[..self.len as usize]
    }

    /// Product of two monomials; `None` past [`MAX_DEGREE`].
    pub fn mul(&self, other: &Monomial) -> Option<Monomial> {
        let (a, b) = (self.vars(), other.vars());
        if a.len() + b.len() > MAX_DEGREE {
            return None;
        }
        let mut vars = [0u8; MAX_DEGREE];
        let (mut i, mut j, mut k) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            if a[i] <= b[j] {
                vars[k] = a[i];
                i += 1;
            } else {
                vars[k] = b[j];
                j += 1;
            }
            k += 1;
        }
        for &v in &a[i..] {
            vars[k] = v;
            k += 1;
        }
        for &v in &b[j..] {
            vars[k] = v;
            k += 1;
        }
        Some(Monomial {
            len: k as u8,
            vars,
        })
    }

    pub fn multiplicity(&self, v: usize) -> usize {
        self.vars().iter().filter(|&&x| x as usize == v).count()
    }

    /// Removes one factor `x_v`, if present.
    pub fn without(&self, v: usize) -> Option<Monomial> {
        let pos = self.vars().iter().position(|&x| x as usize == v)?;
        let mut vars = [0u8; MAX_DEGREE];
        let src = self.vars();
        vars[..pos].copy_from_slice(&src[..pos]);
        vars[pos..src.len() - 1].copy_from_slice(&src[pos + 1..]);
        Some(Monomial {
            len: self.len - 1,
            vars,
        })
    }

    /// Distinct variables with their multiplicities, in increasing label order.
    pub fn powers(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = Vec::with_capacity(self.len as usize);
        for &v in self.vars() {
            match out.last_mut() {
                Some((last, mult)) if *last == v as usize => *mult += 1,
                _ => out.push((v as usize, 1)),
            }
        }
        out
    }

    /// `prod_i mult_i!`, the symmetry factor of the multi-index.
    pub fn factorial_weight(&self) -> f64 {
        self.powers()
            .iter()
            .map(|&(_, m)| factorial(m))
            .product()
    }

    pub fn eval(&self, x: &[C64]) -> C64 {
        self.vars()
            .iter()
            .fold(C64::new(1.0, 0.0), |acc, &v| acc * x[v as usize])
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{:?}", self.vars())
    }
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// A finite sum of complex multiples of monomials.
#[derive(Clone, Debug, Default)]
pub struct Poly {
    terms: FxHashMap<Monomial, C64>,
}

impl PartialEq for Poly {
    fn eq(&self, other: &Self) -> bool {
        self.sub(other).max_abs() == 0.0
    }
}

impl Poly {
    pub fn new() -> Self {
        Poly::default()
    }

    pub fn constant(c: C64) -> Self {
        let mut p = Poly::new();
        p.add_term(Monomial::ONE, c);
        p
    }

    pub fn var(v: usize) -> Self {
        let mut p = Poly::new();
        p.add_term(Monomial::var(v), C64::new(1.0, 0.0));
        p
    }

    pub fn from_terms<I: IntoIterator<Item = (Monomial, C64)>>(terms: I) -> Self {
        let mut p = Poly::new();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    #[inline]
    pub fn add_term(&mut self, m: Monomial, c: C64) {
        *self.terms.entry(m).or_insert(C64::new(0.0, 0.0)) += c;
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &C64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, m: &Monomial) -> C64 {
        self.terms.get(m).copied().unwrap_or_default()
    }

    /// Terms in canonical (degree, lexicographic) order, zeros removed.
    pub fn sorted_terms(&self) -> Vec<(Monomial, C64)> {
        let mut v: Vec<_> = self
            .terms
            .iter()
            .filter(|(_, c)| c.norm_sqr() != 0.0)
            .map(|(m, c)| (*m, *c))
            .collect();
        v.sort_by_key(|t| t.0);
        v
    }

    /// Drops exact zeros left behind by cancellation.
    pub fn compact(&mut self) {
        self.terms.retain(|_, c| c.norm_sqr() != 0.0);
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn degree(&self) -> usize {
        self.terms
            .iter()
            .filter(|(_, c)| c.norm_sqr() != 0.0)
            .map(|(m, _)| m.degree())
            .max()
            .unwrap_or(0)
    }

    pub fn min_degree(&self) -> Option<usize> {
        self.terms
            .iter()
            .filter(|(_, c)| c.norm_sqr() != 0.0)
            .map(|(m, _)| m.degree())
            .min()
    }

    pub fn scale(&self, s: C64) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(m, c)| (*m, c * s)).collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &Poly, s: C64) {
        for (m, c) in &other.terms {
            self.add_term(*m, c * s);
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        out.add_scaled(other, C64::new(1.0, 0.0));
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        out.add_scaled(other, C64::new(-1.0, 0.0));
        out
    }

    /// Homogeneous part of degree `n`.
    pub fn homogeneous(&self, n: usize) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.degree() == n)
                .map(|(m, c)| (*m, *c))
                .collect(),
        }
    }

    /// Removes terms above `cap`, returning the largest discarded magnitude.
    pub fn truncate(&mut self, cap: usize) -> f64 {
        let mut dropped = 0.0f64;
        self.terms.retain(|m, c| {
            if m.degree() > cap {
                dropped = dropped.max(c.norm());
                false
            } else {
                true
            }
        });
        dropped
    }

    /// Product truncated at total degree `cap`. Returns the product and the
    /// largest magnitude among discarded contributions (0 when nothing was cut).
    pub fn mul_truncated(&self, other: &Poly, cap: usize) -> (Poly, f64) {
        let mut out = Poly::new();
        let (left, left_max) = by_degree(self);
        let (right, right_max) = by_degree(other);
        let mut dropped = 0.0f64;
        for (da, terms_a) in left.iter().enumerate() {
            for (db, terms_b) in right.iter().enumerate() {
                if terms_a.is_empty() || terms_b.is_empty() {
                    continue;
                }
                if da + db > cap || da + db > MAX_DEGREE {
                    dropped = dropped.max(left_max[da] * right_max[db]);
                    continue;
                }
                for (ma, ca) in terms_a {
                    for (mb, cb) in terms_b {
                        let m = ma.mul(mb).expect("degree checked");
                        out.add_term(m, ca * cb);
                    }
                }
            }
        }
        (out, dropped)
    }

    pub fn derivative(&self, v: usize) -> Poly {
        let mut out = Poly::new();
        for (m, c) in &self.terms {
            let k = m.multiplicity(v);
            if k > 0 {
                out.add_term(m.without(v).expect("factor present"), c * k as f64);
            }
        }
        out
    }

    /// All first derivatives at once, keyed by variable.
    pub fn gradient(&self) -> FxHashMap<usize, Poly> {
        let mut out: FxHashMap<usize, Poly> = FxHashMap::default();
        for (m, c) in &self.terms {
            for (v, k) in m.powers() {
                out.entry(v)
                    .or_default()
                    .add_term(m.without(v).expect("factor present"), c * k as f64);
            }
        }
        out
    }

    pub fn evaluate(&self, x: &[C64]) -> C64 {
        self.terms.iter().map(|(m, c)| c * m.eval(x)).sum()
    }

    /// Substitutes `subs[v]` for every variable `x_v`, truncating at `cap`.
    /// Returns the result and the largest discarded magnitude.
    pub fn substitute(&self, subs: &[Poly], cap: usize) -> (Poly, f64) {
        let mut memo: FxHashMap<Monomial, Poly> = FxHashMap::default();
        memo.insert(Monomial::ONE, Poly::constant(C64::new(1.0, 0.0)));
        let mut dropped = 0.0f64;
        let mut out = Poly::new();
        let mut keys: Vec<&Monomial> = self.terms.keys().collect();
        keys.sort();
        for m in keys {
            let c = self.terms[m];
            let prod = substituted_product(m, subs, cap, &mut memo, &mut dropped);
            out.add_scaled(&prod, c);
        }
        (out, dropped)
    }
}

/// Terms bucketed by degree, with the largest magnitude per bucket.
fn by_degree(p: &Poly) -> (Vec<Vec<(Monomial, C64)>>, Vec<f64>) {
    let mut buckets: Vec<Vec<(Monomial, C64)>> = Vec::new();
    let mut maxima: Vec<f64> = Vec::new();
    for (m, c) in &p.terms {
        let d = m.degree();
        if buckets.len() <= d {
            buckets.resize(d + 1, Vec::new());
            maxima.resize(d + 1, 0.0);
        }
        buckets[d].push((*m, *c));
        maxima[d] = maxima[d].max(c.norm());
    }
    (buckets, maxima)
}

fn substituted_product(
    m: &Monomial,
    subs: &[Poly],
    cap: usize,
    memo: &mut FxHashMap<Monomial, Poly>,
    dropped: &mut f64,
) -> Poly {
    if let Some(p) = memo.get(m) {
        return p.clone();
    }
    let vars = m.vars();
    let last = *vars.last().expect("non-constant monomial") as usize;
    let prefix = Monomial::from_vars(vars[..vars.len() - 1].iter().map(|&v| v as usize))
        .expect("prefix fits");
    let head = substituted_product(&prefix, subs, cap, memo, dropped);
    let (prod, d) = head.mul_truncated(&subs[last], cap);
    *dropped = dropped.max(d);
    memo.insert(*m, prod.clone());
    prod
}

//! Independent oracles: a dense exponent-vector polynomial type and random
//! generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use dqfield::{FormalSeries, GridSpec, ModeGrid, ModeVector, Monomial, Poly, PolyFunctional};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn grid(d: usize, n: usize) -> Arc<ModeGrid> {
    ModeGrid::new(GridSpec::new(d, n, 7.0, 1.0)).unwrap()
}

/// Polynomial in `nvars` variables keyed by exponent vectors.
#[derive(Clone, Debug, Default)]
pub struct Dense {
    pub nvars: usize,
    pub terms: BTreeMap<Vec<usize>, C64>,
}

impl Dense {
    pub fn zero(nvars: usize) -> Self {
        Dense {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(nvars: usize) -> Self {
        let mut p = Dense::zero(nvars);
        p.terms.insert(vec![0; nvars], c(1.0, 0.0));
        p
    }

    pub fn var(nvars: usize, v: usize) -> Self {
        let mut e = vec![0; nvars];
        e[v] = 1;
        let mut p = Dense::zero(nvars);
        p.terms.insert(e, c(1.0, 0.0));
        p
    }

    pub fn from_poly(p: &Poly, nvars: usize) -> Self {
        let mut out = Dense::zero(nvars);
        for (m, z) in p.terms() {
            let mut e = vec![0; nvars];
            for &v in m.vars() {
                e[v as usize] += 1;
            }
            *out.terms.entry(e).or_default() += *z;
        }
        out
    }

    pub fn to_poly(&self) -> Poly {
        Poly::from_terms(self.terms.iter().map(|(e, z)| {
            let vars = e.iter().enumerate().flat_map(|(v, &k)| std::iter::repeat_n(v, k));
            (Monomial::from_vars(vars).unwrap(), *z)
        }))
    }

    pub fn add(&self, o: &Dense) -> Dense {
        let mut out = self.clone();
        for (e, z) in &o.terms {
            *out.terms.entry(e.clone()).or_default() += *z;
        }
        out
    }

    pub fn scale(&self, s: C64) -> Dense {
        let mut out = self.clone();
        for z in out.terms.values_mut() {
            *z *= s;
        }
        out
    }

    pub fn mul(&self, o: &Dense) -> Dense {
        let mut out = Dense::zero(self.nvars);
        for (e1, z1) in &self.terms {
            for (e2, z2) in &o.terms {
                let e: Vec<usize> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                *out.terms.entry(e).or_default() += z1 * z2;
            }
        }
        out
    }

    pub fn deriv(&self, v: usize) -> Dense {
        let mut out = Dense::zero(self.nvars);
        for (e, z) in &self.terms {
            if e[v] > 0 {
                let mut e2 = e.clone();
                e2[v] -= 1;
                *out.terms.entry(e2).or_default() += z * e[v] as f64;
            }
        }
        out
    }

    pub fn eval(&self, x: &[C64]) -> C64 {
        self.terms
            .iter()
            .map(|(e, z)| e.iter().enumerate().fold(*z, |acc, (v, &k)| acc * x[v].powu(k as u32)))
            .sum()
    }

    /// Replace variable `v` by `subs[v]`, keeping degrees `<= cap`.
    pub fn substitute(&self, subs: &[Dense], cap: usize) -> Dense {
        let mut out = Dense::zero(subs[0].nvars);
        for (e, z) in &self.terms {
            let mut term = Dense::one(subs[0].nvars).scale(*z);
            for (v, &k) in e.iter().enumerate() {
                for _ in 0..k {
                    term = term.mul(&subs[v]).truncate(cap);
                }
            }
            out = out.add(&term);
        }
        out
    }

    pub fn truncate(&self, cap: usize) -> Dense {
        let mut out = self.clone();
        out.terms.retain(|e, _| e.iter().sum::<usize>() <= cap);
        out
    }

    pub fn homogeneous(&self, n: usize) -> Dense {
        let mut out = self.clone();
        out.terms.retain(|e, _| e.iter().sum::<usize>() == n);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_diff(&self, o: &Dense) -> f64 {
        self.add(&o.scale(c(-1.0, 0.0))).max_abs()
    }
}

/// Random functional with `terms` monomials of degree `1..=max_deg` (plus a constant).
pub fn random_functional(
    r: &mut ChaCha8Rng,
    grid: &Arc<ModeGrid>,
    max_deg: usize,
    cap: usize,
    terms: usize,
) -> PolyFunctional {
    let n = grid.len();
    let mut f = PolyFunctional::constant(grid.clone(), cap, c(r.random_range(-1.0..1.0), 0.0)).unwrap();
    for _ in 0..terms {
        let deg = r.random_range(1..=max_deg);
        let split = r.random_range(0..=deg);
        let alpha: Vec<usize> = (0..split).map(|_| r.random_range(0..n)).collect();
        let beta: Vec<usize> = (0..deg - split).map(|_| r.random_range(0..n)).collect();
        let z = c(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
        let m = PolyFunctional::monomial(grid.clone(), cap, &alpha, &beta, z).unwrap();
        f = f.add(&m).unwrap();
    }
    f
}

pub fn random_point(r: &mut ChaCha8Rng, grid: &Arc<ModeGrid>, scale: f64) -> ModeVector {
    let n = grid.len();
    let mut z = || c(r.random_range(-scale..scale), r.random_range(-scale..scale));
    let abar = (0..n).map(|_| z()).collect();
    let a = (0..n).map(|_| z()).collect();
    ModeVector::new(grid.clone(), abar, a).unwrap()
}

/// Random series with `terms` monomials per degree and component.
pub fn random_series(r: &mut ChaCha8Rng, dim: usize, cap: usize, terms: usize, linear_identity: bool) -> FormalSeries {
    let mut comps = Vec::with_capacity(dim);
    for o in 0..dim {
        let mut p = Poly::new();
        if linear_identity {
            p.add_term(Monomial::var(o), c(1.0, 0.0));
        }
        let lo = if linear_identity { 2 } else { 1 };
        for n in lo..=cap {
            for _ in 0..terms {
                let vars: Vec<usize> = (0..n).map(|_| r.random_range(0..dim)).collect();
                let z = c(r.random_range(-0.5..0.5), r.random_range(-0.5..0.5));
                p.add_term(Monomial::from_vars(vars).unwrap(), z);
            }
        }
        comps.push(p);
    }
    FormalSeries::from_components(dim, cap, comps).unwrap()
}

pub fn series_to_dense(s: &FormalSeries) -> Vec<Dense> {
    s.components().iter().map(|p| Dense::from_poly(p, s.dim())).collect()
}

/// Functional as a dense polynomial over `2N` variables (`abar` block first).
pub fn functional_to_dense(f: &PolyFunctional) -> Dense {
    Dense::from_poly(f.poly(), 2 * f.grid().len())
}

/// `max |coefficient|` of the difference between two functionals.
pub fn functional_diff(f: &PolyFunctional, g: &PolyFunctional) -> f64 {
    f.sub(g).unwrap().max_abs()
}

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Potential as written in configs: `coeffs[k]` multiplies `s^{first_power+k} / (first_power+k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub coeffs: Vec<f64>,
    #[serde(default = "default_first_power")]
    pub first_power: usize,
}

fn default_first_power() -> usize {
    3
}

impl Default for PotentialSpec {
    fn default() -> Self {
        PotentialSpec {
            coeffs: Vec::new(),
            first_power: 3,
        }
    }
}

/// `V(s) = sum_j c_j s^j / j` with `j >= 3`, so `V(0) = V'(0) = V''(0) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    /// `c[j]` for `j = 0..=K`; entries below 3 are always zero.
    c: Vec<f64>,
}

impl Potential {
    pub fn new(spec: &PotentialSpec) -> Result<Self> {
        if spec.first_power == 0 {
            return Err(Error::InvalidPotential("first_power must be at least 1".into()));
        }
        let mut c = vec![0.0; spec.first_power + spec.coeffs.len()];
        for (k, &v) in spec.coeffs.iter().enumerate() {
            let j = spec.first_power + k;
            if !v.is_finite() {
                return Err(Error::InvalidPotential(format!("coefficient c{j} is not finite")));
            }
            if j < 3 && v != 0.0 {
                return Err(Error::InvalidPotential(format!(
                    "c{j} = {v} is not allowed: the potential must satisfy V(0)=V′(0)=V″(0)=0, so terms start at s^3"
                )));
            }
            c[j] = v;
        }
        while c.len() > 4 && *c.last().unwrap() == 0.0 {
            c.pop();
        }
        c.resize(c.len().max(4), 0.0);
        Ok(Potential { c })
    }

    pub fn zero() -> Self {
        Potential { c: vec![0.0; 4] }
    }

    /// `g s^4 / 4`.
    pub fn phi4(g: f64) -> Self {
        Potential::new(&PotentialSpec {
            coeffs: vec![0.0, g],
            first_power: 3,
        })
        .expect("quartic potential is valid")
    }

    /// `g s^3 / 3`.
    pub fn phi3(g: f64) -> Self {
        Potential::new(&PotentialSpec {
            coeffs: vec![g],
            first_power: 3,
        })
        .expect("cubic potential is valid")
    }

    /// Canonical config form.
    pub fn spec(&self) -> PotentialSpec {
        PotentialSpec {
            coeffs: if self.is_zero() { Vec::new() } else { self.c[3..=self.degree()].to_vec() },
            first_power: 3,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|&v| v == 0.0)
    }

    /// Highest power `K` in `V` (0 for the zero potential).
    pub fn degree(&self) -> usize {
        self.c.iter().rposition(|&v| v != 0.0).unwrap_or(0)
    }

    /// `(j, c_j)` for every nonzero term.
    pub fn terms(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.c
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(j, &v)| (j, v))
    }

    pub fn value(&self, s: f64) -> f64 {
        self.value_c(C64::new(s, 0.0)).re
    }

    pub fn derivative(&self, s: f64) -> f64 {
        self.derivative_c(C64::new(s, 0.0)).re
    }

    /// `V(s)` for complex `s` (the flows are holomorphic in the mode amplitudes).
    pub fn value_c(&self, s: C64) -> C64 {
        let mut acc = C64::default();
        for j in (3..=self.degree().max(3)).rev() {
            acc = acc * s + self.c[j] / j as f64;
        }
        acc * s * s * s
    }

    /// `V'(s) = sum_j c_j s^{j-1}` for complex `s`.
    pub fn derivative_c(&self, s: C64) -> C64 {
        let mut acc = C64::default();
        for j in (3..=self.degree().max(3)).rev() {
            acc = acc * s + self.c[j];
        }
        acc * s * s
    }

    /// Checks that the Hamiltonian is bounded below: the leading coefficient
    /// is positive with even power, and `V(s) + m^2 s^2 / 2 >= 0` on a sample
    /// grid wide enough to contain every root of the polynomial.
    pub fn positivity_certificate(&self, mass: f64) -> Result<()> {
        if self.is_zero() {
            return Ok(());
        }
        let k = self.degree();
        let lead = self.c[k];
        if !k.is_multiple_of(2) || lead <= 0.0 {
            return Err(Error::InvalidPotential(format!(
                "the Hamiltonian must be positive: the leading term c{k} s^{k}/{k} needs an even power and a positive coefficient (got c{k} = {lead})"
            )));
        }
        // (V(s) + m^2 s^2/2) / s^2 has coefficients m^2/2, c_j/j; Cauchy root bound.
        let lead_q = lead / k as f64;
        let mut bound = (mass * mass / 2.0 / lead_q).abs();
        for j in 3..k {
            bound = bound.max((self.c[j] / j as f64 / lead_q).abs());
        }
        let r = 1.0 + bound;
        let samples = 4000;
        for i in 0..=samples {
            let s = -r + 2.0 * r * i as f64 / samples as f64;
            let h = self.value(s) + 0.5 * mass * mass * s * s;
            if h < -1e-12 * (1.0 + s * s) {
                return Err(Error::InvalidPotential(format!(
                    "the Hamiltonian must be positive: V(s) + m^2 s^2/2 = {h:e} < 0 at s = {s}"
                )));
            }
        }
        Ok(())
    }
}

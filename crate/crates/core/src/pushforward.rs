//! Star-products transported by a linearizing map.
//!
//! For an invertible `Omega`, `F *_Omega G` is the unique product with
//! `(F *_Omega G) o Omega = (F o Omega) *_N (G o Omega)`. With a formal
//! `Omega` this is computed by pulling back, multiplying with the normal
//! product and pushing forward with `Omega^{-1}`. A numerical wave operator is
//! not polynomial, so in that case the product is only checked pointwise.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::formal::FormalSeries;
use crate::functional::{self, FormalSeriesInHbar, PolyFunctional};
use crate::kleingordon::generators::{free_hamiltonian, interaction_functionals};
use crate::kleingordon::scattering::{inverse_wave_operator, wave_operator, Direction};
use crate::kleingordon::{Potential, Propagator};
use crate::modes::{ModeGrid, ModeVector};

const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// `F o Omega`, truncated at the degree bound of `F`.
pub fn pullback(f: &PolyFunctional, omega: &FormalSeries) -> Result<PolyFunctional> {
    let dim = 2 * f.grid().len();
    if omega.dim() != dim {
        return Err(Error::DimensionMismatch {
            left: dim,
            right: omega.dim(),
        });
    }
    Ok(f.substituted(omega.components()))
}

/// [`pullback`] applied to every power of `hbar`.
pub fn pullback_series(s: &FormalSeriesInHbar, omega: &FormalSeries) -> Result<FormalSeriesInHbar> {
    Ok(FormalSeriesInHbar {
        coeffs: s.coeffs.iter().map(|c| pullback(c, omega)).collect::<Result<_>>()?,
    })
}

/// The interacting flow used as a numerical linearization.
#[derive(Clone, Debug)]
pub struct NumericTransport {
    pub propagator: Arc<Propagator>,
    pub direction: Direction,
    pub horizon: f64,
    pub dt: f64,
}

impl NumericTransport {
    pub fn apply(&self, v: &ModeVector) -> Result<ModeVector> {
        wave_operator(&self.propagator, self.direction, self.horizon, self.dt, v)
    }

    pub fn apply_inverse(&self, v: &ModeVector) -> Result<ModeVector> {
        inverse_wave_operator(&self.propagator, self.direction, self.horizon, self.dt, v)
    }
}

#[derive(Clone, Debug)]
pub enum Transport {
    Formal {
        omega: FormalSeries,
        omega_inverse: FormalSeries,
    },
    Numeric(NumericTransport),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportMode {
    Formal,
    Numeric,
}

/// The product `*_Omega` for a formal or numerical `Omega`.
#[derive(Clone, Debug)]
pub struct PushedStarProduct {
    transport: Transport,
    round_trip: f64,
}

impl PushedStarProduct {
    /// Checks `Omega o Omega^{-1} = Omega^{-1} o Omega = Id` through the degree cap.
    pub fn formal(omega: FormalSeries, tolerance: f64) -> Result<Self> {
        let omega_inverse = omega.invert()?;
        let id = FormalSeries::identity(omega.dim(), omega.degree_cap())?;
        let left = omega.compose(&omega_inverse)?.sub(&id)?.max_abs();
        let right = omega_inverse.compose(&omega)?.sub(&id)?.max_abs();
        let round_trip = left.max(right);
        let scale = 1.0 + omega.max_abs().max(omega_inverse.max_abs());
        if round_trip > tolerance * scale {
            return Err(Error::RoundTrip {
                residual: round_trip,
                tolerance: tolerance * scale,
            });
        }
        Ok(PushedStarProduct {
            transport: Transport::Formal { omega, omega_inverse },
            round_trip,
        })
    }

    /// Checks `|Omega^{-1}(Omega v) - v| <= tolerance |v|` on every sample.
    pub fn numeric(transport: NumericTransport, samples: &[ModeVector], tolerance: f64) -> Result<Self> {
        let images = samples.iter().map(|v| transport.apply(v)).collect::<Result<Vec<_>>>()?;
        Self::numeric_with_images(transport, samples, &images, tolerance)
    }

    /// As [`Self::numeric`], with `Omega v` already computed for every sample.
    pub fn numeric_with_images(
        transport: NumericTransport,
        samples: &[ModeVector],
        images: &[ModeVector],
        tolerance: f64,
    ) -> Result<Self> {
        if images.len() != samples.len() {
            return Err(Error::DimensionMismatch {
                left: samples.len(),
                right: images.len(),
            });
        }
        let mut round_trip = 0.0f64;
        for (v, image) in samples.iter().zip(images) {
            let back = transport.apply_inverse(image)?;
            let r = back.sub(v)?.l2_norm() / v.l2_norm().max(f64::MIN_POSITIVE);
            round_trip = round_trip.max(r);
        }
        if round_trip > tolerance {
            return Err(Error::RoundTrip {
                residual: round_trip,
                tolerance,
            });
        }
        Ok(PushedStarProduct {
            transport: Transport::Numeric(transport),
            round_trip,
        })
    }

    pub fn mode(&self) -> TransportMode {
        match self.transport {
            Transport::Formal { .. } => TransportMode::Formal,
            Transport::Numeric(_) => TransportMode::Numeric,
        }
    }

    pub fn transport(&self) -> &Transport {
        &self.transport
    }

    pub fn round_trip_residual(&self) -> f64 {
        self.round_trip
    }

    fn formal_maps(&self) -> Result<(&FormalSeries, &FormalSeries)> {
        match &self.transport {
            Transport::Formal { omega, omega_inverse } => Ok((omega, omega_inverse)),
            Transport::Numeric(_) => Err(Error::Invalid(
                "a numerical wave operator supports pointwise checks only; products need a formal Omega".into(),
            )),
        }
    }

    pub fn apply(&self, v: &ModeVector) -> Result<ModeVector> {
        match &self.transport {
            Transport::Formal { omega, .. } => ModeVector::from_coords(v.grid.clone(), &omega.apply(&v.coords())?),
            Transport::Numeric(t) => t.apply(v),
        }
    }

    pub fn apply_inverse(&self, v: &ModeVector) -> Result<ModeVector> {
        match &self.transport {
            Transport::Formal { omega_inverse, .. } => {
                ModeVector::from_coords(v.grid.clone(), &omega_inverse.apply(&v.coords())?)
            }
            Transport::Numeric(t) => t.apply_inverse(v),
        }
    }

    /// `F *_Omega G` through `hbar^hbar_order`.
    pub fn star(&self, f: &PolyFunctional, g: &PolyFunctional, hbar_order: usize) -> Result<FormalSeriesInHbar> {
        let a = FormalSeriesInHbar::from_functional(f.clone(), hbar_order);
        let b = FormalSeriesInHbar::from_functional(g.clone(), hbar_order);
        self.star_series(&a, &b, hbar_order)
    }

    pub fn star_series(
        &self,
        f: &FormalSeriesInHbar,
        g: &FormalSeriesInHbar,
        hbar_order: usize,
    ) -> Result<FormalSeriesInHbar> {
        let (omega, inverse) = self.formal_maps()?;
        let pf = pullback_series(f, omega)?;
        let pg = pullback_series(g, omega)?;
        pullback_series(&pf.star(&pg, hbar_order)?, inverse)
    }

    /// `(2 / i hbar)(F *_Omega G - G *_Omega F)` through `hbar^hbar_order`.
    pub fn star_bracket(&self, f: &PolyFunctional, g: &PolyFunctional, hbar_order: usize) -> Result<FormalSeriesInHbar> {
        let (omega, inverse) = self.formal_maps()?;
        let pf = FormalSeriesInHbar::from_functional(pullback(f, omega)?, hbar_order + 1);
        let pg = FormalSeriesInHbar::from_functional(pullback(g, omega)?, hbar_order + 1);
        pullback_series(&pf.star_bracket(&pg, hbar_order)?, inverse)
    }
}

/// `F *_Omega G`; see [`PushedStarProduct::star`].
pub fn star_pm(
    f: &PolyFunctional,
    g: &PolyFunctional,
    product: &PushedStarProduct,
    hbar_order: usize,
) -> Result<FormalSeriesInHbar> {
    product.star(f, g, hbar_order)
}

/// Which product [`star_power`] iterates.
#[derive(Clone, Copy, Debug)]
pub enum Star<'a> {
    Normal,
    Pushed(&'a PushedStarProduct),
}

/// `(*F)^k`, left-associated; `k = 0` gives 1.
pub fn star_power(f: &PolyFunctional, k: usize, star: Star<'_>, hbar_order: usize) -> Result<FormalSeriesInHbar> {
    match star {
        Star::Normal => functional::star_power(f, k, hbar_order),
        Star::Pushed(product) => {
            let (omega, inverse) = product.formal_maps()?;
            // Pulling back commutes with the product, so one pullback suffices.
            let base = pullback(f, omega)?;
            pullback_series(&functional::star_power(&base, k, hbar_order)?, inverse)
        }
    }
}

/// Largest coefficient per `hbar` power and per degree, split at `degree_cap`.
#[derive(Clone, Debug, Serialize)]
pub struct TruncationResidual {
    pub degree_cap: usize,
    /// `represented[p][n]`: degree `n <= degree_cap` at `hbar^p`.
    pub represented: Vec<Vec<f64>>,
    /// `boundary[p][j]`: degree `degree_cap + 1 + j` at `hbar^p`.
    pub boundary: Vec<Vec<f64>>,
}

impl TruncationResidual {
    pub fn new(diff: &FormalSeriesInHbar, degree_cap: usize) -> Self {
        let mut represented = Vec::new();
        let mut boundary = Vec::new();
        for c in &diff.coeffs {
            let top = c.max_degree().max(degree_cap);
            let mut per = vec![0.0f64; top + 1];
            for (m, z) in c.poly().terms() {
                per[m.degree()] = per[m.degree()].max(z.norm());
            }
            boundary.push(per[degree_cap + 1..].to_vec());
            per.truncate(degree_cap + 1);
            represented.push(per);
        }
        TruncationResidual {
            degree_cap,
            represented,
            boundary,
        }
    }

    pub fn max_represented(&self) -> f64 {
        self.represented.iter().flatten().copied().fold(0.0, f64::max)
    }

    pub fn max_boundary(&self) -> f64 {
        self.boundary.iter().flatten().copied().fold(0.0, f64::max)
    }
}

/// Both sides of `(*_Omega H)^k = (*_N H0)^k o Omega^{-1}` compared coefficientwise.
#[derive(Clone, Debug, Serialize)]
pub struct HamReport {
    pub k: usize,
    pub hbar_order: usize,
    /// Degree up to which coefficients are compared as represented.
    pub degree_cap: usize,
    /// Degree at which both sides are computed; everything above `degree_cap` is boundary.
    pub working_degree: usize,
    pub residual: TruncationResidual,
    pub round_trip: f64,
}

/// `H0 + U` with terms through `max_degree`.
pub fn interacting_hamiltonian(grid: &Arc<ModeGrid>, potential: &Potential, max_degree: usize) -> Result<PolyFunctional> {
    let h0 = free_hamiltonian(grid, max_degree)?;
    if potential.is_zero() {
        return Ok(h0);
    }
    let (u, _) = interaction_functionals(grid, potential, max_degree)?;
    h0.add(&u)
}

/// Working degree at which coefficients of degree `<= degree_cap` are exact
/// through `hbar^hbar_order`: each cochain order consumes two degrees.
pub fn working_degree(degree_cap: usize, hbar_order: usize) -> usize {
    degree_cap + 2 * hbar_order
}

/// Formal check of the star-power identity. `product` must carry a formal
/// `Omega` of degree cap at least `working_degree - 1`.
pub fn check_ham_identity(
    grid: &Arc<ModeGrid>,
    potential: &Potential,
    product: &PushedStarProduct,
    k: usize,
    hbar_order: usize,
    degree_cap: usize,
) -> Result<HamReport> {
    if k == 0 {
        return Err(Error::Invalid("star power k must be at least 1".into()));
    }
    let working = working_degree(degree_cap, hbar_order);
    let (omega, inverse) = product.formal_maps()?;
    if omega.degree_cap() + 1 < working {
        return Err(Error::DegreeCap {
            cap: omega.degree_cap(),
            needed: working - 1,
        });
    }
    let h = interacting_hamiltonian(grid, potential, working)?;
    let h0 = free_hamiltonian(grid, working)?;
    let lhs = star_power(&h, k, Star::Pushed(product), hbar_order)?;
    let rhs = pullback_series(&functional::star_power(&h0, k, hbar_order)?, inverse)?;
    let diff = lhs.sub(&rhs)?;
    if diff.coeffs.iter().any(|c| !c.max_abs().is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(HamReport {
        k,
        hbar_order,
        degree_cap,
        working_degree: working,
        residual: TruncationResidual::new(&diff, degree_cap),
        round_trip: product.round_trip_residual(),
    })
}

/// Pointwise check at `hbar^0` with a numerical wave operator:
/// `H(Omega psi)^k` against `H0(psi)^k`, relative to `H0(psi)^k`.
#[derive(Clone, Debug, Serialize)]
pub struct NumericHamReport {
    pub k: usize,
    pub samples: usize,
    /// `(T, max relative residual)`.
    pub per_horizon: Vec<(f64, f64)>,
    /// Round trip of the wave operator at the largest horizon.
    pub round_trip: f64,
    pub round_trip_horizon: f64,
}

impl NumericHamReport {
    pub fn is_decreasing(&self) -> bool {
        self.per_horizon.windows(2).all(|w| w[1].1 < w[0].1)
    }
}

/// Numeric star-power check for each power in `powers`. `images[h][s]`, when
/// given, must be `Omega_T` of sample `s` at horizon `h`; otherwise it is computed.
/// The round trip is shared by all powers.
#[allow(clippy::too_many_arguments)]
pub fn check_ham_numeric(
    propagator: &Arc<Propagator>,
    direction: Direction,
    horizons: &[f64],
    dt: f64,
    samples: &[ModeVector],
    powers: &[usize],
    round_trip_tolerance: f64,
    images: Option<&[Vec<ModeVector>]>,
) -> Result<Vec<NumericHamReport>> {
    if powers.contains(&0) {
        return Err(Error::Invalid("star power k must be at least 1".into()));
    }
    if horizons.is_empty() {
        return Err(Error::Invalid("at least one horizon is required".into()));
    }
    let mut per_power = vec![Vec::with_capacity(horizons.len()); powers.len()];
    let mut last = None;
    for (h, &t) in horizons.iter().enumerate() {
        let transport = NumericTransport {
            propagator: propagator.clone(),
            direction,
            horizon: t,
            dt,
        };
        let mapped = match images {
            Some(imgs) => imgs[h].clone(),
            None => samples.iter().map(|s| transport.apply(s)).collect::<Result<Vec<_>>>()?,
        };
        for (&k, rows) in powers.iter().zip(per_power.iter_mut()) {
            let mut worst = 0.0f64;
            for (s, image) in samples.iter().zip(&mapped) {
                let free = Propagator::free_energy(s).powu(k as u32);
                let inter = propagator.energy(image).powu(k as u32);
                worst = worst.max((inter - free).norm() / free.norm().max(f64::MIN_POSITIVE));
            }
            rows.push((t, worst));
        }
        last = Some((transport, mapped));
    }
    let (transport, mapped) = last.expect("horizons are nonempty");
    let round_trip_horizon = transport.horizon;
    let product = PushedStarProduct::numeric_with_images(transport, samples, &mapped, round_trip_tolerance)?;
    Ok(powers
        .iter()
        .zip(per_power)
        .map(|(&k, per_horizon)| NumericHamReport {
            k,
            samples: samples.len(),
            per_horizon,
            round_trip: product.round_trip_residual(),
            round_trip_horizon,
        })
        .collect())
}

/// Constant functional 1 on `grid`.
pub fn unit(grid: &Arc<ModeGrid>, max_degree: usize) -> Result<PolyFunctional> {
    PolyFunctional::constant(grid.clone(), max_degree, ONE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formal::{linearize_with, ResonancePolicy};
    use crate::kleingordon::build_interaction;
    use crate::modes::GridSpec;

    fn grid() -> Arc<ModeGrid> {
        ModeGrid::new(GridSpec::new(1, 4, 6.0, 1.0)).unwrap()
    }

    fn omega_with_quadratic(grid: &Arc<ModeGrid>, cap: usize) -> FormalSeries {
        let dim = 2 * grid.len();
        let mut om = FormalSeries::identity(dim, cap).unwrap();
        om.set_tensor_entry(0, &[1, 5], C64::new(0.2, 0.1)).unwrap();
        om.set_tensor_entry(5, &[0, 0], C64::new(-0.3, 0.0)).unwrap();
        om.set_tensor_entry(2, &[2, 6], C64::new(0.0, 0.4)).unwrap();
        om
    }

    #[test]
    fn identity_transport_is_the_normal_product() {
        let g = grid();
        let id = PushedStarProduct::formal(FormalSeries::identity(8, 4).unwrap(), 1e-12).unwrap();
        let f = PolyFunctional::monomial(g.clone(), 4, &[0, 1], &[1], C64::new(1.0, 0.5)).unwrap();
        let h = PolyFunctional::monomial(g.clone(), 4, &[1], &[0, 2], C64::new(-0.7, 0.0)).unwrap();
        let pushed = id.star(&f, &h, 2).unwrap();
        let normal = f.star_normal(&h, 2).unwrap();
        assert!(pushed.sub(&normal).unwrap().max_abs_per_order().iter().all(|&r| r == 0.0));
    }

    #[test]
    fn pullback_of_linear_functional() {
        let g = grid();
        let om = omega_with_quadratic(&g, 3);
        let l = PolyFunctional::a(g.clone(), 3, 1).unwrap();
        let p = pullback(&l, &om).unwrap();
        // l = a_1 is coordinate 5; its pullback is a_1 - 0.3 abar_0^2.
        assert_eq!(p.coeff(&[], &[1]).unwrap(), ONE);
        assert!((p.coeff(&[0, 0], &[]).unwrap() - C64::new(-0.3, 0.0)).norm() < 1e-15);
        assert_eq!(p.poly().len(), 2);
    }

    #[test]
    fn transported_product_satisfies_its_definition() {
        let g = grid();
        let cap = 5;
        let product = PushedStarProduct::formal(omega_with_quadratic(&g, cap), 1e-10).unwrap();
        let (omega, _) = product.formal_maps().unwrap();
        let f = PolyFunctional::monomial(g.clone(), cap, &[0], &[1], ONE).unwrap();
        let h = PolyFunctional::monomial(g.clone(), cap, &[1], &[0], C64::new(0.5, -0.2)).unwrap();
        let pushed = product.star(&f, &h, 1).unwrap();
        let lhs = pullback_series(&pushed, omega).unwrap();
        let rhs = pullback(&f, omega)
            .unwrap()
            .star_normal(&pullback(&h, omega).unwrap(), 1)
            .unwrap();
        let res = TruncationResidual::new(&lhs.sub(&rhs).unwrap(), 3);
        assert!(res.max_represented() < 1e-12, "{:?}", res.represented);
        // Classical limit: hbar^0 is the pointwise product.
        let prod = TruncationResidual::new(
            &FormalSeriesInHbar {
                coeffs: vec![pushed.coeffs[0].sub(&f.multiply(&h).unwrap()).unwrap()],
            },
            3,
        );
        assert!(prod.max_represented() < 1e-12);
    }

    #[test]
    fn free_ham_identity_is_exact() {
        let g = grid();
        let product = PushedStarProduct::formal(FormalSeries::identity(8, 5).unwrap(), 1e-12).unwrap();
        for k in [1, 2] {
            let r = check_ham_identity(&g, &Potential::zero(), &product, k, 1, 4).unwrap();
            assert_eq!(r.residual.max_represented(), 0.0);
        }
    }

    #[test]
    fn ham_identity_holds_below_the_first_resonant_degree() {
        // phi^3 on 4 modes: degrees 2 and 3 of H o Omega are free of resonances.
        let g = grid();
        let pot = Potential::phi3(0.3);
        let set = build_interaction(&g, &pot, 3).unwrap();
        let lin = linearize_with(&set.rep().unwrap(), 0.01, ResonancePolicy::Report).unwrap();
        let product = PushedStarProduct::formal(lin.omega, 1e-10).unwrap();
        let r = check_ham_identity(&g, &pot, &product, 1, 0, 3).unwrap();
        assert!(r.residual.max_represented() < 1e-12, "{:?}", r.residual.represented);
    }

    #[test]
    fn star_power_kinds_agree_without_transport() {
        let g = grid();
        let h0 = free_hamiltonian(&g, 4).unwrap();
        let id = PushedStarProduct::formal(FormalSeries::identity(8, 4).unwrap(), 1e-12).unwrap();
        let a = star_power(&h0, 2, Star::Normal, 2).unwrap();
        let b = star_power(&h0, 2, Star::Pushed(&id), 2).unwrap();
        assert!(a.sub(&b).unwrap().max_abs_per_order().iter().all(|&r| r == 0.0));
        assert_eq!(star_power(&h0, 0, Star::Normal, 1).unwrap().coeffs[0].coeff(&[], &[]).unwrap(), ONE);
    }

    #[test]
    fn numeric_transport_refuses_products() {
        let g = grid();
        let prop = Arc::new(Propagator::new(g.clone(), Potential::zero()));
        let t = NumericTransport {
            propagator: prop,
            direction: Direction::Plus,
            horizon: 1.0,
            dt: 0.1,
        };
        let v = ModeVector::zeros(g.clone());
        let p = PushedStarProduct::numeric(t, &[v], 1e-12).unwrap();
        let f = unit(&g, 2).unwrap();
        assert!(p.star(&f, &f, 1).is_err());
    }

    #[test]
    fn numeric_ham_check_is_exact_without_interaction() {
        let g = grid();
        let prop = Arc::new(Propagator::new(g.clone(), Potential::zero()));
        let mut v = ModeVector::zeros(g.clone());
        v.a[1] = C64::new(0.1, 0.05);
        v.abar[1] = v.a[1].conj();
        let r = check_ham_numeric(&prop, Direction::Minus, &[1.0, 2.0], 0.1, &[v], &[2], 1e-12, None).unwrap().remove(0);
        assert!(r.per_horizon.iter().all(|&(_, res)| res < 1e-14));
        assert!(r.round_trip < 1e-14);
        assert_eq!(r.round_trip_horizon, 2.0);
    }
}

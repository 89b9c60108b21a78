mod common;

use std::sync::Arc;

use common::*;
use dqfield::kleingordon::generators::free_linear_generators;
use dqfield::pushforward::{pullback, pullback_series, star_pm, PushedStarProduct, TruncationResidual};
use dqfield::{Error, FormalSeries, FormalSeriesInHbar, GridSpec, ModeGrid, PolyFunctional};
use proptest::prelude::*;

fn small_grid() -> Arc<ModeGrid> {
    ModeGrid::new(GridSpec::new(1, 4, 6.0, 1.0)).unwrap()
}

/// `Id + small nonlinear terms` on the phase space of `grid`.
fn near_identity(r: &mut rand_chacha::ChaCha8Rng, grid: &ModeGrid, cap: usize) -> FormalSeries {
    let id = FormalSeries::identity(2 * grid.len(), cap).unwrap();
    let bump = random_series(r, 2 * grid.len(), cap, 1, false).degrees(2, cap);
    id.add(&bump.scale(c(0.3, 0.0))).unwrap()
}

/// Residual restricted to degrees `<= limit`, over all `hbar` orders.
fn low_degree_residual(diff: &FormalSeriesInHbar, limit: usize) -> f64 {
    TruncationResidual::new(diff, limit).max_represented()
}

#[test]
fn pullback_evaluates_as_composition() {
    let g = small_grid();
    let mut r = rng(31);
    // Degree 2 functional through a quadratic map: no truncation below degree 4.
    let f = random_functional(&mut r, &g, 2, 4, 6);
    let omega = near_identity(&mut r, &g, 2);
    let p = pullback(&f, &omega).unwrap();
    for _ in 0..4 {
        let x = random_point(&mut r, &g, 0.7).coords();
        let want = f.evaluate_coords(&omega.apply(&x).unwrap()).unwrap();
        let got = p.evaluate_coords(&x).unwrap();
        assert!((got - want).norm() < 1e-13 * (1.0 + want.norm()), "{got} vs {want}");
    }
}

#[test]
fn pullback_rejects_a_mismatched_map() {
    let g = small_grid();
    let f = PolyFunctional::a(g.clone(), 3, 0).unwrap();
    let omega = FormalSeries::identity(6, 3).unwrap();
    assert!(matches!(pullback(&f, &omega), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn round_trip_tolerance_is_enforced() {
    let g = small_grid();
    let mut r = rng(2);
    // A short inverse cannot undo a long map.
    let omega = near_identity(&mut r, &g, 3);
    assert!(PushedStarProduct::formal(omega.clone(), 1e-10).is_ok());
    assert!(PushedStarProduct::formal(FormalSeries::zero(8, 3).unwrap(), 1e-10).is_err());
}

#[test]
fn transported_product_is_associative_below_the_cap() {
    let g = small_grid();
    let mut r = rng(77);
    let order = 1;
    let base = near_identity(&mut rng(5), &g, 6);
    let mk = |r: &mut rand_chacha::ChaCha8Rng| random_functional(r, &g, 2, 8, 3);
    let (f, h, k) = (mk(&mut r), mk(&mut r), mk(&mut r));
    let mut previous = f64::INFINITY;
    for cap in 2..=6 {
        let product = PushedStarProduct::formal(base.with_cap(cap).unwrap(), 1e-9).unwrap();
        let fh = star_pm(&f, &h, &product, order).unwrap();
        let hk = star_pm(&h, &k, &product, order).unwrap();
        let kser = FormalSeriesInHbar::from_functional(k.clone(), order);
        let fser = FormalSeriesInHbar::from_functional(f.clone(), order);
        let left = product.star_series(&fh, &kser, order).unwrap();
        let right = product.star_series(&fser, &hk, order).unwrap();
        let res = low_degree_residual(&left.sub(&right).unwrap(), 3);
        assert!(res <= previous * (1.0 + 1e-9) + 1e-12, "cap {cap}: {res:e} after {previous:e}");
        previous = res;
    }
    assert!(previous < 1e-11, "{previous:e}");
}

#[test]
fn bracket_at_leading_order_is_the_transported_poisson_bracket() {
    let g = small_grid();
    let mut r = rng(19);
    let cap = 5;
    let product = PushedStarProduct::formal(near_identity(&mut r, &g, cap), 1e-9).unwrap();
    let f = random_functional(&mut r, &g, 2, cap + 2, 4);
    let h = random_functional(&mut r, &g, 2, cap + 2, 4);
    let bracket = product.star_bracket(&f, &h, 0).unwrap();
    let (omega, inverse) = match product.transport() {
        dqfield::pushforward::Transport::Formal { omega, omega_inverse } => (omega, omega_inverse),
        _ => unreachable!(),
    };
    let pulled = pullback(&f, omega).unwrap().poisson(&pullback(&h, omega).unwrap()).unwrap();
    let want = pullback(&pulled, inverse).unwrap();
    let diff = FormalSeriesInHbar {
        coeffs: vec![bracket.coeffs[0].sub(&want).unwrap()],
    };
    assert!(low_degree_residual(&diff, 3) < 1e-12);

    // Without transport it is the plain bracket.
    let id = PushedStarProduct::formal(FormalSeries::identity(8, cap).unwrap(), 1e-12).unwrap();
    let plain = id.star_bracket(&f, &h, 0).unwrap();
    assert!(functional_diff(&plain.coeffs[0], &f.poisson(&h).unwrap()) < 1e-12);
}

#[test]
fn quadratic_generators_close_without_quantum_corrections() {
    let g = ModeGrid::new(GridSpec::new(1, 8, 7.0, 1.0)).unwrap();
    let funcs: Vec<PolyFunctional> = free_linear_generators(&g)
        .into_iter()
        .map(|(_, gen)| gen.bilinear(&g).0.to_functional(&g, 4).unwrap())
        .collect();
    let id = PushedStarProduct::formal(FormalSeries::identity(2 * g.len(), 4).unwrap(), 1e-12).unwrap();
    for f in &funcs {
        for h in &funcs {
            let b = id.star_bracket(f, h, 2).unwrap();
            assert!(b.coeffs[0].degree() <= 2);
            assert!(functional_diff(&b.coeffs[0], &f.poisson(h).unwrap()) < 1e-12);
            for p in 1..=2 {
                assert!(b.coeffs[p].max_abs() < 1e-12, "hbar^{p}: {:e}", b.coeffs[p].max_abs());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transported_product_matches_its_definition(seed in any::<u64>(), order in 0usize..=2) {
        let g = small_grid();
        let mut r = rng(seed);
        let cap = 6;
        let product = PushedStarProduct::formal(near_identity(&mut r, &g, cap), 1e-8).unwrap();
        let omega = match product.transport() {
            dqfield::pushforward::Transport::Formal { omega, .. } => omega.clone(),
            _ => unreachable!(),
        };
        let f = random_functional(&mut r, &g, 2, cap, 3);
        let h = random_functional(&mut r, &g, 2, cap, 3);
        let lhs = pullback_series(&product.star(&f, &h, order).unwrap(), &omega).unwrap();
        let rhs = pullback(&f, &omega).unwrap().star_normal(&pullback(&h, &omega).unwrap(), order).unwrap();
        let scale = 1.0 + rhs.max_abs_per_order().into_iter().fold(0.0, f64::max);
        let limit = cap - 2 * order;
        prop_assert!(low_degree_residual(&lhs.sub(&rhs).unwrap(), limit) < 1e-10 * scale);
        // Classical limit.
        let pointwise = f.multiply(&h).unwrap();
        let classical = FormalSeriesInHbar { coeffs: vec![product.star(&f, &h, order).unwrap().coeffs[0].sub(&pointwise).unwrap()] };
        prop_assert!(low_degree_residual(&classical, limit) < 1e-10 * scale);
    }
}

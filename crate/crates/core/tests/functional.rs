mod common;

use common::*;
use dqfield::functional::{star_exponential, star_power};
use dqfield::{PolyFunctional, Slot};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// `(1/n!) sum over index tuples of prod (2 omega / w) d^n F/da.. d^n G/dabar..`.
fn cochain_oracle(f: &PolyFunctional, g: &PolyFunctional, n: usize) -> Dense {
    let grid = f.grid();
    let modes = grid.len();
    let w = grid.weight();
    let (fd, gd) = (functional_to_dense(f), functional_to_dense(g));
    let mut out = Dense::zero(2 * modes);
    let tuples = modes.pow(n as u32);
    for t in 0..tuples {
        let mut idx = Vec::with_capacity(n);
        let mut r = t;
        for _ in 0..n {
            idx.push(r % modes);
            r /= modes;
        }
        let mut df = fd.clone();
        let mut dg = gd.clone();
        let mut weight = 1.0;
        for &i in &idx {
            df = df.deriv(modes + i);
            dg = dg.deriv(i);
            weight *= 2.0 * grid.omega(i) / w;
        }
        out = out.add(&df.mul(&dg).scale(c(weight, 0.0)));
    }
    let fact: f64 = (1..=n).map(|k| k as f64).product();
    out.scale(c(1.0 / fact, 0.0))
}

fn poisson_oracle(f: &PolyFunctional, g: &PolyFunctional) -> Dense {
    let grid = f.grid();
    let modes = grid.len();
    let w = grid.weight();
    let (fd, gd) = (functional_to_dense(f), functional_to_dense(g));
    let mut out = Dense::zero(2 * modes);
    for i in 0..modes {
        let s = 2.0 * grid.omega(i) / w;
        let t = fd.deriv(modes + i).mul(&gd.deriv(i)).add(&fd.deriv(i).mul(&gd.deriv(modes + i)).scale(c(-1.0, 0.0)));
        out = out.add(&t.scale(c(s, 0.0)));
    }
    out.scale(-2.0 * I)
}

#[test]
fn evaluate_matches_brute_force_expansion() {
    let g = grid(1, 4);
    let mut r = rng(11);
    for _ in 0..20 {
        let f = random_functional(&mut r, &g, 3, 6, 8);
        let v = random_point(&mut r, &g, 1.0);
        let want = functional_to_dense(&f).eval(&v.coords());
        let got = f.evaluate(&v).unwrap();
        assert!((got - want).norm() < 1e-12 * (1.0 + want.norm()));
    }
    let one = PolyFunctional::constant(g.clone(), 2, c(1.0, 0.0)).unwrap();
    assert_eq!(one.evaluate(&random_point(&mut r, &g, 3.0)).unwrap(), c(1.0, 0.0));
}

#[test]
fn free_hamiltonian_on_a_single_mode() {
    let g = grid(1, 8);
    let h0 = dqfield::kleingordon::generators::free_hamiltonian(&g, 2).unwrap();
    let mut abar = vec![C64::default(); 8];
    let mut a = vec![C64::default(); 8];
    abar[3] = c(0.5, 0.2);
    a[3] = c(1.5, -0.4);
    let v = dqfield::ModeVector::new(g.clone(), abar, a).unwrap();
    let want = g.weight() / 2.0 * c(0.5, 0.2) * c(1.5, -0.4);
    assert!((h0.evaluate(&v).unwrap() - want).norm() < 1e-15);
    assert_eq!(h0.degree(), 2);
}

#[test]
fn multiply_is_an_evaluation_homomorphism() {
    let g = grid(1, 4);
    let mut r = rng(12);
    let a1 = PolyFunctional::abar(g.clone(), 4, 1).unwrap();
    let b1 = PolyFunctional::a(g.clone(), 4, 1).unwrap();
    let prod = a1.multiply(&b1).unwrap();
    assert_eq!(prod.coeff(&[1], &[1]).unwrap(), c(1.0, 0.0));
    assert_eq!(prod.poly().len(), 1);
    for _ in 0..20 {
        let f = random_functional(&mut r, &g, 3, 6, 5);
        let h = random_functional(&mut r, &g, 3, 6, 5);
        let one = PolyFunctional::constant(g.clone(), 6, c(1.0, 0.0)).unwrap();
        assert_eq!(functional_diff(&f.multiply(&one).unwrap(), &f), 0.0);
        let v = random_point(&mut r, &g, 0.8);
        let lhs = f.multiply(&h).unwrap().evaluate(&v).unwrap();
        let rhs = f.evaluate(&v).unwrap() * h.evaluate(&v).unwrap();
        assert!((lhs - rhs).norm() < 1e-12 * (1.0 + rhs.norm()));
    }
}

#[test]
fn normalized_derivative() {
    let g = grid(1, 4);
    let w = g.weight();
    let abar2 = PolyFunctional::abar(g.clone(), 3, 2).unwrap();
    assert!(abar2.dnorm(Slot::A, 2).unwrap().is_zero());
    let a2 = PolyFunctional::a(g.clone(), 3, 2).unwrap();
    let d = a2.dnorm(Slot::A, 2).unwrap();
    assert!((d.coeff(&[], &[]).unwrap() - c((2.0 * g.omega(2)).sqrt() / w, 0.0)).norm() < 1e-15);
    assert!(a2.dnorm(Slot::A, 4).is_err());

    // Finite differences on a cubic monomial, holomorphic direction.
    let f = PolyFunctional::monomial(g.clone(), 3, &[0, 1], &[1], c(0.7, -0.3)).unwrap();
    let mut r = rng(3);
    let v = random_point(&mut r, &g, 1.0);
    for (slot, i, coord) in [(Slot::A, 1, 4 + 1), (Slot::Abar, 1, 1), (Slot::Abar, 0, 0)] {
        let h = 1e-5;
        let mut zp = v.coords();
        let mut zm = v.coords();
        zp[coord] += h;
        zm[coord] -= h;
        let fd = (f.evaluate_coords(&zp).unwrap() - f.evaluate_coords(&zm).unwrap()) / (2.0 * h);
        let want = fd * (2.0 * g.omega(i)).sqrt() / w;
        let got = f.dnorm(slot, i).unwrap().evaluate(&v).unwrap();
        assert!((got - want).norm() < 1e-8 * (1.0 + want.norm()));
    }
}

#[test]
fn poisson_of_creation_and_annihilation() {
    let g = grid(1, 4);
    let w = g.weight();
    for p in 0..4 {
        for q in 0..4 {
            let ap = PolyFunctional::a(g.clone(), 2, p).unwrap();
            let aq = PolyFunctional::abar(g.clone(), 2, q).unwrap();
            let b = ap.poisson(&aq).unwrap();
            let want = if p == q { -2.0 * I * (2.0 * g.omega(p) / w) } else { C64::default() };
            assert!((b.coeff(&[], &[]).unwrap() - want).norm() < 1e-14);
        }
    }
}

#[test]
fn cochains_match_the_index_tuple_sum() {
    let g = grid(1, 4);
    let mut r = rng(21);
    for _ in 0..10 {
        let f = random_functional(&mut r, &g, 3, 6, 6);
        let h = random_functional(&mut r, &g, 3, 6, 6);
        for n in 1..=3 {
            let got = functional_to_dense(&f.normal_cochain(n, &h).unwrap());
            let want = cochain_oracle(&f, &h, n);
            assert!(got.max_diff(&want) < 1e-12 * (1.0 + want.max_abs()), "n = {n}");
        }
    }
    let a1 = PolyFunctional::a(g.clone(), 4, 1).unwrap();
    let ab1 = PolyFunctional::abar(g.clone(), 4, 1).unwrap();
    let c1 = a1.normal_cochain(1, &ab1).unwrap();
    assert!((c1.coeff(&[], &[]).unwrap() - c(2.0 * g.omega(1) / g.weight(), 0.0)).norm() < 1e-14);
    let f = PolyFunctional::monomial(g.clone(), 4, &[0, 2], &[3], c(1.0, 0.0)).unwrap();
    assert!(f.normal_cochain(2, &random_functional(&mut r, &g, 3, 4, 5)).unwrap().is_zero());
}

#[test]
fn normal_product_of_a_and_abar() {
    let g = grid(1, 4);
    let ap = PolyFunctional::a(g.clone(), 4, 2).unwrap();
    let aq = PolyFunctional::abar(g.clone(), 4, 2).unwrap();
    let s = ap.star_normal(&aq, 3).unwrap();
    assert_eq!(s.coeffs[0].coeff(&[2], &[2]).unwrap(), c(1.0, 0.0));
    assert!((s.coeffs[1].coeff(&[], &[]).unwrap() - c(2.0 * g.omega(2) / g.weight(), 0.0)).norm() < 1e-14);
    assert!(s.coeffs[2].is_zero() && s.coeffs[3].is_zero());
    // The reverse order has no contraction.
    let t = aq.star_normal(&ap, 2).unwrap();
    assert!(t.coeffs[1].is_zero());
    let one = PolyFunctional::constant(g.clone(), 4, c(1.0, 0.0)).unwrap();
    let u = ap.star_normal(&one, 2).unwrap();
    assert_eq!(functional_diff(&u.coeffs[0], &ap), 0.0);
    assert!(u.coeffs[1].is_zero() && u.coeffs[2].is_zero());
}

#[test]
fn star_bracket_starts_with_poisson() {
    let g = grid(1, 4);
    let ap = PolyFunctional::a(g.clone(), 4, 1).unwrap();
    let aq = PolyFunctional::abar(g.clone(), 4, 1).unwrap();
    let b = ap.star_bracket(&aq, 1).unwrap();
    assert_eq!(functional_diff(&b.coeffs[0], &ap.poisson(&aq).unwrap()), 0.0);
    let f = random_functional(&mut rng(5), &g, 3, 6, 6);
    assert!(f.star_bracket(&f, 2).unwrap().max_abs_per_order().iter().all(|&x| x == 0.0));
}

#[test]
fn star_square_of_free_hamiltonian_by_hand() {
    // H0 * H0 = H0^2 + hbar C1(H0, H0) with C1 = sum_i (2 omega_i / w)(w/2)^2 abar_i a_i;
    // H0 is linear in a, so C2 and higher vanish.
    let g = grid(1, 4);
    let w = g.weight();
    let h0 = dqfield::kleingordon::generators::free_hamiltonian(&g, 4).unwrap();
    let sq = star_power(&h0, 2, 3).unwrap();
    assert_eq!(functional_diff(&sq.coeffs[0], &h0.multiply(&h0).unwrap()), 0.0);
    for i in 0..4 {
        let c1 = 2.0 * g.omega(i) / w * (w / 2.0).powi(2);
        assert!((sq.coeffs[1].coeff(&[i], &[i]).unwrap() - c(c1, 0.0)).norm() < 1e-14);
    }
    assert_eq!(sq.coeffs[1].poly().len(), 4);
    assert!(sq.coeffs[2].is_zero() && sq.coeffs[3].is_zero());
    assert!(h0.normal_cochain(2, &h0).unwrap().is_zero());
}

#[test]
fn star_exponential_of_one_mode_hamiltonian() {
    // exp with two terms: 1 + (t/i hbar) H + (1/2)(t/i hbar)^2 (H*H), H = (w/2) abar_0 a_0.
    let g = grid(1, 2);
    let w = g.weight();
    let h = PolyFunctional::monomial(g.clone(), 4, &[0], &[0], c(w / 2.0, 0.0)).unwrap();
    let t = 0.3;
    let e = star_exponential(&h, t, 1, 2, 1e12).unwrap();
    assert_eq!(e.min_power, -2);
    let x = -I * t; // t / i
    let hh = star_power(&h, 2, 2).unwrap();
    // hbar^-2: (x^2 / 2) H^2
    let want_m2 = hh.coeffs[0].scale(x * x / 2.0);
    assert!(functional_diff(e.coeff(-2).unwrap(), &want_m2) < 1e-15);
    // hbar^-1: x H + (x^2/2) C1(H,H)
    let want_m1 = h.scale(x).add(&hh.coeffs[1].scale(x * x / 2.0)).unwrap();
    assert!(functional_diff(e.coeff(-1).unwrap(), &want_m1) < 1e-15);
    // hbar^0: 1 + (x^2/2) C2(H,H)
    let one = PolyFunctional::constant(g.clone(), 4, c(1.0, 0.0)).unwrap();
    let want_0 = one.add(&hh.coeffs[2].scale(x * x / 2.0)).unwrap();
    assert!(functional_diff(e.coeff(0).unwrap(), &want_0) < 1e-15);

    let zero = PolyFunctional::zero(g.clone(), 4).unwrap();
    let e0 = star_exponential(&zero, 1.0, 2, 3, 1e12).unwrap();
    for p in e0.min_power..=e0.max_power() {
        let want = if p == 0 { 1.0 } else { 0.0 };
        assert_eq!(e0.coeff(p).unwrap().coeff(&[], &[]).unwrap(), c(want, 0.0));
        assert!(e0.coeff(p).unwrap().poly().len() <= 1);
    }
    let only_one = star_exponential(&h, t, 1, 0, 1e12).unwrap();
    assert_eq!(functional_diff(only_one.coeff(0).unwrap(), &one), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn normal_product_is_associative(seed in any::<u64>(), modes in prop::sample::select(vec![4usize, 8, 16])) {
        let g = grid(1, modes);
        let mut r = rng(seed);
        let cap = 12;
        let f = random_functional(&mut r, &g, 4, cap, 5);
        let h = random_functional(&mut r, &g, 4, cap, 5);
        let k = random_functional(&mut r, &g, 4, cap, 5);
        let order = 6;
        let fh = f.star_normal(&h, order).unwrap();
        let left = fh.star(&dqfield::FormalSeriesInHbar::from_functional(k.clone(), order), order).unwrap();
        let hk = h.star_normal(&k, order).unwrap();
        let right = dqfield::FormalSeriesInHbar::from_functional(f.clone(), order).star(&hk, order).unwrap();
        let scale = left.max_abs_per_order().iter().cloned().fold(1.0, f64::max);
        for (p, d) in left.sub(&right).unwrap().max_abs_per_order().iter().enumerate() {
            prop_assert!(*d <= 1e-12 * scale, "order {}: {}", p, d);
        }
    }

    #[test]
    fn poisson_is_a_lie_bracket_and_a_derivation(seed in any::<u64>()) {
        let g = grid(1, 4);
        let mut r = rng(seed);
        let f = random_functional(&mut r, &g, 3, 9, 5);
        let h = random_functional(&mut r, &g, 3, 9, 5);
        let k = random_functional(&mut r, &g, 2, 9, 5);
        let fh = f.poisson(&h).unwrap();
        let hf = h.poisson(&f).unwrap();
        prop_assert!(fh.add(&hf).unwrap().max_abs() <= 1e-12 * (1.0 + fh.max_abs()));
        prop_assert!(functional_to_dense(&fh).max_diff(&poisson_oracle(&f, &h)) <= 1e-12 * (1.0 + fh.max_abs()));
        let leib_l = f.poisson(&h.multiply(&k).unwrap()).unwrap();
        let leib_r = fh.multiply(&k).unwrap().add(&h.multiply(&f.poisson(&k).unwrap()).unwrap()).unwrap();
        prop_assert!(functional_diff(&leib_l, &leib_r) <= 1e-11 * (1.0 + leib_l.max_abs()));
        let jac = f.poisson(&h.poisson(&k).unwrap()).unwrap()
            .add(&h.poisson(&k.poisson(&f).unwrap()).unwrap()).unwrap()
            .add(&k.poisson(&f.poisson(&h).unwrap()).unwrap()).unwrap();
        let scale = f.poisson(&h.poisson(&k).unwrap()).unwrap().max_abs();
        prop_assert!(jac.max_abs() <= 1e-11 * (1.0 + scale));
    }

    #[test]
    fn cochains_vanish_on_constants(seed in any::<u64>(), n in 1usize..4) {
        let g = grid(1, 4);
        let mut r = rng(seed);
        let f = random_functional(&mut r, &g, 3, 6, 6);
        let one = PolyFunctional::constant(g.clone(), 6, c(1.0, 0.0)).unwrap();
        prop_assert!(one.normal_cochain(n, &f).unwrap().is_zero());
        prop_assert!(f.normal_cochain(n, &one).unwrap().is_zero());
    }

    #[test]
    fn star_bracket_is_poisson_at_leading_order_and_satisfies_jacobi(seed in any::<u64>()) {
        let g = grid(1, 4);
        let mut r = rng(seed);
        let f = random_functional(&mut r, &g, 3, 12, 4);
        let h = random_functional(&mut r, &g, 3, 12, 4);
        let k = random_functional(&mut r, &g, 3, 12, 4);
        let b = f.star_bracket(&h, 2).unwrap();
        prop_assert!(functional_diff(&b.coeffs[0], &f.poisson(&h).unwrap()) <= 1e-12 * (1.0 + b.coeffs[0].max_abs()));
        let order = 2;
        let series = |x: &PolyFunctional| dqfield::FormalSeriesInHbar::from_functional(x.clone(), order + 2);
        let br = |x: &dqfield::FormalSeriesInHbar, y: &dqfield::FormalSeriesInHbar, o| x.star_bracket(y, o).unwrap();
        let (sf, sh, sk) = (series(&f), series(&h), series(&k));
        let jac = br(&sf, &br(&sh, &sk, order + 1), order)
            .add(&br(&sh, &br(&sk, &sf, order + 1), order)).unwrap()
            .add(&br(&sk, &br(&sf, &sh, order + 1), order)).unwrap();
        let scale = br(&sf, &br(&sh, &sk, order + 1), order).max_abs_per_order().iter().cloned().fold(1.0, f64::max);
        for d in jac.max_abs_per_order() {
            prop_assert!(d <= 1e-11 * scale);
        }
    }
}

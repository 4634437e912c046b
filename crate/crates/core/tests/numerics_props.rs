use std::f64::consts::PI;

use nalgebra::DMatrix;
use proptest::prelude::*;
use ris_core::numerics::{
    gauss_legendre, invert, lu_solve, spectral_norm, wrap_to_pi, ComplexMatrix, C64,
};

fn complex() -> impl Strategy<Value = C64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| C64::new(re, im))
}

/// Square matrices made well conditioned by a dominant diagonal shift.
fn well_conditioned(max_n: usize) -> impl Strategy<Value = ComplexMatrix> {
    (1..=max_n).prop_flat_map(|n| {
        (prop::collection::vec(complex(), n * n), complex()).prop_map(move |(data, shift)| {
            let shift = shift + C64::new(2.0 * n as f64, 0.0);
            ComplexMatrix::from_fn(n, n, |i, j| if i == j { data[i * n + j] + shift } else { data[i * n + j] })
        })
    })
}

fn general(max_n: usize) -> impl Strategy<Value = ComplexMatrix> {
    (1..=max_n, 1..=max_n).prop_flat_map(|(r, c)| {
        prop::collection::vec(complex(), r * c).prop_map(move |d| ComplexMatrix::from_fn(r, c, |i, j| d[i * c + j]))
    })
}

fn to_nalgebra(a: &ComplexMatrix) -> DMatrix<C64> {
    DMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)])
}

fn frobenius(a: &ComplexMatrix) -> f64 {
    let mut s = 0.0;
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            s += a[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lu_solve_round_trip(a in well_conditioned(12), seed in prop::collection::vec(complex(), 36)) {
        let n = a.rows();
        let b = ComplexMatrix::from_fn(n, 3, |i, j| seed[(i * 3 + j) % seed.len()]);
        let x = lu_solve(&a, &b).unwrap();
        let r = a.matmul(&x).sub(&b);
        prop_assert!(frobenius(&r) <= 1e-9 * frobenius(&b).max(f64::MIN_POSITIVE));
    }

    #[test]
    fn inverse_matches_nalgebra(a in well_conditioned(10)) {
        let ours = invert(&a).unwrap();
        let theirs = to_nalgebra(&a).try_inverse().unwrap();
        let scale = theirs.norm();
        for i in 0..a.rows() {
            for j in 0..a.cols() {
                prop_assert!((ours[(i, j)] - theirs[(i, j)]).norm() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn spectral_norm_matches_svd(a in general(10)) {
        let est = spectral_norm(&a);
        let sv = to_nalgebra(&a).singular_values();
        let top = sv.iter().cloned().fold(0.0, f64::max);
        prop_assert!(est.value <= top * (1.0 + 1e-9));
        // Value-stall stops are as accurate as the tolerance; allow a small margin.
        prop_assert!((est.value - top).abs() <= 1e-5 * top.max(1e-300), "{} vs {}", est.value, top);
    }

    #[test]
    fn spectral_norm_is_absolutely_homogeneous(a in general(8), alpha in complex()) {
        prop_assume!(alpha.norm() > 1e-3);
        let base = spectral_norm(&a).value;
        let scaled = spectral_norm(&a.scale(alpha)).value;
        prop_assert!((scaled - alpha.norm() * base).abs() <= 1e-6 * alpha.norm() * base.max(1e-300));
    }

    #[test]
    fn wrap_is_two_pi_periodic(x in -50.0..50.0f64, k in -3i32..=3) {
        let a = wrap_to_pi(x);
        let b = wrap_to_pi(x + 2.0 * PI * k as f64);
        // Compare on the circle so values straddling -π/π count as equal.
        let d = (a - b).abs();
        prop_assert!(d.min(2.0 * PI - d) <= 1e-12);
        prop_assert!((-PI..PI).contains(&a));
    }

    #[test]
    fn gauss_legendre_exact_on_polynomials(
        n in 1usize..=24,
        coeffs in prop::collection::vec(-1.0..1.0f64, 48),
        lo in -2.0..0.0f64,
        width in 0.1..3.0f64,
    ) {
        let hi = lo + width;
        let deg = 2 * n - 1;
        let c = &coeffs[..=deg];
        let (x, w) = gauss_legendre(n, lo, hi).unwrap();
        let poly = |t: f64| c.iter().rev().fold(0.0, |acc, &ci| acc * t + ci);
        let quad: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * poly(xi)).sum();
        let antider = |t: f64| {
            c.iter().enumerate().rev().fold(0.0, |acc, (k, &ck)| acc * t + ck / (k + 1) as f64) * t
        };
        let exact = antider(hi) - antider(lo);
        let scale: f64 = c.iter().enumerate().map(|(k, ck)| ck.abs() * (lo.abs().max(hi.abs())).powi(k as i32)).sum::<f64>() * width;
        prop_assert!((quad - exact).abs() <= 1e-11 * scale.max(1e-300), "n={n}: {quad} vs {exact}");
    }
}

#[test]
fn hilbert_like_matrix_solves_accurately() {
    // Moderately ill-conditioned (cond ~ 1e5) yet inside the stated regime.
    let n = 6;
    let a = ComplexMatrix::from_fn(n, n, |i, j| C64::new(1.0 / (i + j + 1) as f64, 0.0) + if i == j { C64::new(1e-3, 0.0) } else { C64::new(0.0, 0.0) });
    let b = ComplexMatrix::from_fn(n, 1, |i, _| C64::new(1.0, i as f64));
    let x = lu_solve(&a, &b).unwrap();
    assert!(frobenius(&a.matmul(&x).sub(&b)) <= 1e-9 * frobenius(&b));
}

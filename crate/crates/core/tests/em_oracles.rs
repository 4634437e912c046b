//! Impedance checks against oracles that do not share code with the
//! double-integral evaluator: classical sine/cosine-integral closed forms for
//! half-wave dipoles, and a single integral of the exact closed-form near field
//! of a sinusoidal current filament.

use std::f64::consts::PI;

use proptest::prelude::*;
use ris_core::em_model::{assemble_network, assemble_network_with, InducedEmf, Scenario, Vec3, WireElement};
use ris_core::numerics::C64;

mod common;

use common::{half_wave_mutual_closed_form, half_wave_self_closed_form, single_integral_oracle};

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm()
}

fn wire(x: f64, y: f64, z: f64, l: f64, a: f64) -> WireElement {
    WireElement::new(Vec3::new(x, y, z), l, a).unwrap()
}

#[test]
fn half_wave_self_impedance_matches_closed_form() {
    let k = 2.0 * PI;
    let z = InducedEmf::default().self_impedance(&wire(0.0, 0.0, 0.0, 0.5, 0.5e-3), k).unwrap();
    let oracle = half_wave_self_closed_form();
    assert!((oracle.re - 73.08).abs() < 0.02, "oracle {oracle}");
    assert!((oracle.im - 42.51).abs() < 0.02, "oracle {oracle}");
    assert!(rel(z, oracle) < 0.02, "{z} vs {oracle}");
}

#[test]
fn half_wave_mutual_impedance_matches_closed_form() {
    let k = 2.0 * PI;
    let emf = InducedEmf::default();
    for d in [0.1, 0.25, 0.5, 0.75, 1.0, 1.5] {
        let z = emf
            .mutual_impedance(&wire(0.0, 0.0, 0.0, 0.5, 0.5e-3), &wire(d, 0.0, 0.0, 0.5, 0.5e-3), k)
            .unwrap();
        let oracle = half_wave_mutual_closed_form(d);
        // the filament closed form is exact for the mutual term
        assert!(rel(z, oracle) < 1e-6, "d = {d}: {z} vs {oracle}");
    }
    let oracle = half_wave_mutual_closed_form(0.5);
    assert!((oracle - C64::new(-12.5, -29.9)).norm() < 0.1, "{oracle}");
}

#[test]
fn self_impedance_matches_single_integral() {
    let k = 2.0 * PI;
    let emf = InducedEmf::default();
    for (l, a) in [(0.5, 0.5e-3), (1.0 / 32.0, 1.0 / 500.0), (0.3, 1e-3), (0.1, 0.004)] {
        let w = wire(0.0, 0.0, 0.0, l, a);
        let z = emf.self_impedance(&w, k).unwrap();
        let oracle = single_integral_oracle(&w, &w, a, k);
        assert!(rel(z, oracle) < 1e-7, "l = {l}, a = {a}: {z} vs {oracle}");
    }
}

#[test]
fn preset_wire_self_impedance_is_short_dipole_like() {
    let s = Scenario::paper_28ghz(1, 0.5);
    let lambda = s.wavelength();
    let w = wire(0.0, 0.0, 0.0, lambda / 32.0, lambda / 500.0);
    let z = InducedEmf::default().self_impedance(&w, s.wavenumber()).unwrap();
    // short-dipole radiation resistance with triangular current: 20 π² (l/λ)²
    let r_short = 20.0 * PI * PI / 1024.0;
    assert!((z.re - r_short).abs() < 0.01 * r_short, "{z}");
    assert!(z.im < -1000.0, "{z}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn parallel_pairs_match_single_integral(
        l1 in 0.02..0.6f64,
        l2 in 0.02..0.6f64,
        rho in 0.01..2.0f64,
        dz in -1.0..1.0f64,
        phi in 0.0..(2.0 * PI),
    ) {
        let k = 2.0 * PI;
        let p = wire(0.0, 0.0, 0.0, l1, l1 / 50.0);
        let q = wire(rho * phi.cos(), rho * phi.sin(), dz, l2, l2 / 50.0);
        let z = InducedEmf::default().mutual_impedance(&p, &q, k).unwrap();
        let oracle_a = single_integral_oracle(&q, &p, rho, k);
        let oracle_b = single_integral_oracle(&p, &q, rho, k);
        prop_assert!(rel(oracle_a, oracle_b) < 1e-7, "oracle reciprocity {oracle_a} {oracle_b}");
        prop_assert!(rel(z, oracle_a) < 1e-7, "{z} vs {oracle_a}");
    }

    #[test]
    fn mutual_impedance_is_translation_invariant(
        dx in -0.3..0.3f64, dz in -0.3..0.3f64, shift in prop::array::uniform3(-5.0..5.0f64)
    ) {
        prop_assume!(dx.abs() > 0.01);
        let k = 2.0 * PI;
        let emf = InducedEmf::default();
        let a = emf.mutual_impedance(&wire(0.0, 0.0, 0.0, 0.05, 0.002), &wire(dx, 0.0, dz, 0.05, 0.002), k).unwrap();
        let [sx, sy, sz] = shift;
        let b = emf
            .mutual_impedance(&wire(sx, sy, sz, 0.05, 0.002), &wire(sx + dx, sy, sz + dz, 0.05, 0.002), k)
            .unwrap();
        prop_assert!(rel(a, b) < 1e-9);
    }
}

#[test]
fn raw_reaction_is_reciprocal() {
    let k = 2.0 * PI;
    let emf = InducedEmf::default();
    let p = wire(0.0, 0.0, 0.0, 0.05, 0.002);
    for (q, rho) in [
        (wire(0.1, 0.0, 0.03, 0.08, 0.002), 0.1),
        (wire(0.0, 0.4, -0.2, 0.03, 0.001), 0.4),
        (wire(0.02, 0.0, 0.1, 0.05, 0.002), 0.02),
    ] {
        let a = emf.reaction(&p, &q, rho, k).unwrap();
        let b = emf.reaction(&q, &p, rho, k).unwrap();
        assert!(rel(a, b) < 1e-9, "{a} vs {b}");
    }
}

#[test]
fn assembled_network_is_reciprocal() {
    for d in [0.125, 0.5] {
        let net = assemble_network(&Scenario::paper_28ghz(5, d)).unwrap();
        let n = net.len();
        let scale = net.z_ss.max_abs();
        for i in 0..n {
            for j in 0..n {
                assert!((net.z_ss[(i, j)] - net.z_ss[(j, i)]).norm() <= 1e-9 * scale);
            }
        }
    }
}

#[test]
fn equal_displacements_give_equal_impedances() {
    // Row-major grid: element (r, c) at index r * m + c, rows step along z,
    // columns along x. Pairs with the same |Δcol|, |Δrow| are congruent.
    let m = 4;
    let net = assemble_network(&Scenario::paper_28ghz(m, 0.25)).unwrap();
    let mut classes: std::collections::BTreeMap<(usize, usize), C64> = Default::default();
    for a in 0..m * m {
        for b in 0..m * m {
            if a == b {
                continue;
            }
            let key = ((a % m).abs_diff(b % m), (a / m).abs_diff(b / m));
            let z = net.z_ss[(a, b)];
            let first = *classes.entry(key).or_insert(z);
            assert!(rel(z, first) <= 1e-10, "class {key:?}: {z} vs {first}");
        }
    }
    let d = net.z_ss.diagonal();
    assert!(d.iter().all(|&z| z == d[0]));
}

#[test]
fn doubling_quadrature_order_is_converged() {
    let s = Scenario::paper_28ghz(3, 0.125);
    let base = assemble_network(&s).unwrap();
    let fine = assemble_network_with(&s, &InducedEmf::new(48).unwrap()).unwrap();
    let n = base.len();
    for i in 0..n {
        assert!(rel(base.z_st[i], fine.z_st[i]) < 1e-6);
        assert!(rel(base.z_rs[i], fine.z_rs[i]) < 1e-6);
        for j in 0..n {
            assert!(rel(base.z_ss[(i, j)], fine.z_ss[(i, j)]) < 1e-6, "({i},{j})");
        }
    }
}

#[test]
fn coupling_decays_along_a_row_beyond_half_wavelength() {
    let m = 10;
    let net = assemble_network(&Scenario::paper_28ghz(m, 0.5)).unwrap();
    let row: Vec<f64> = (1..m).map(|c| net.z_ss[(0, c)].norm()).collect();
    assert!(row.windows(2).all(|w| w[1] <= w[0]), "{row:?}");
}

#[test]
fn collinear_overlap_is_rejected() {
    let k = 2.0 * PI;
    let emf = InducedEmf::default();
    let p = wire(0.0, 0.0, 0.0, 0.1, 0.001);
    assert!(emf.mutual_impedance(&p, &wire(0.0, 0.0, 0.05, 0.1, 0.001), k).is_err());
    assert!(emf.mutual_impedance(&p, &wire(0.0, 0.0, 0.1, 0.1, 0.001), k).is_err());
    assert!(emf.mutual_impedance(&p, &wire(0.0, 0.0, 0.2, 0.1, 0.001), k).is_ok());
}

//! Closed-form impedance oracles shared by the integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;

use ris_core::em_model::{WireElement, ETA0};
use ris_core::numerics::C64;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Sine integral by its power series (adequate for |x| < 20).
pub fn si(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    for n in 1..200 {
        let k = 2 * n + 1;
        term *= -x * x / ((k - 1) as f64 * k as f64);
        let add = term / k as f64;
        sum += add;
        if add.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Cosine integral by its power series.
pub fn ci(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 0.0;
    for n in 1..200 {
        let k = 2 * n;
        term *= -x * x / ((k - 1) as f64 * k as f64);
        let add = term / k as f64;
        sum += add;
        if add.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    EULER_GAMMA + x.ln() + sum
}

pub fn cin(x: f64) -> f64 {
    EULER_GAMMA + x.ln() - ci(x)
}

/// Thin half-wave dipole self impedance (feed-point current reference).
pub fn half_wave_self_closed_form() -> C64 {
    let c = ETA0 / (4.0 * PI);
    C64::new(c * cin(2.0 * PI), c * si(2.0 * PI))
}

/// Side-by-side half-wave dipoles at distance `d` (wavelengths).
pub fn half_wave_mutual_closed_form(d: f64) -> C64 {
    let k = 2.0 * PI;
    let l = 0.5;
    let u0 = k * d;
    let root = (d * d + l * l).sqrt();
    let u1 = k * (root + l);
    let u2 = k * (root - l);
    let c = ETA0 / (4.0 * PI);
    C64::new(
        c * (2.0 * ci(u0) - ci(u1) - ci(u2)),
        -c * (2.0 * si(u0) - si(u1) - si(u2)),
    )
}

/// E_z at transverse offset `rho`, axial offset `z` from the center of a
/// filament of length `l` carrying `sin(k(l/2 - |s|)) / sin(k l / 2)`.
pub fn sinusoidal_filament_ez(rho: f64, z: f64, l: f64, k: f64) -> C64 {
    let h = 0.5 * l;
    let j = C64::new(0.0, 1.0);
    let spherical = |r: f64| (-j * k * r).exp() / r;
    let r1 = rho.hypot(z - h);
    let r2 = rho.hypot(z + h);
    let r0 = rho.hypot(z);
    let i_max = 1.0 / (k * h).sin();
    -j * ETA0 * i_max / (4.0 * PI) * (spherical(r1) + spherical(r2) - 2.0 * (k * h).cos() * spherical(r0))
}

/// `-∫ E_z^(source)(rho, z - z_s) I_obs(z - z_o) dz` over the observer wire,
/// composite Gauss-Legendre with panels graded toward the source's field
/// singularities.
pub fn single_integral_oracle(observer: &WireElement, source: &WireElement, rho: f64, k: f64) -> C64 {
    let (x, w) = ris_core::numerics::gauss_legendre(16, -1.0, 1.0).unwrap();
    let zo = observer.position.z;
    let zs = source.position.z;
    let h_obs = 0.5 * observer.length;
    let lo = zo - h_obs;
    let hi = zo + h_obs;
    // Breakpoints: uniform panels plus geometric refinement near the source
    // ends, the source center and the observer center.
    let mut pts = vec![lo, hi, zo];
    let panels = 400;
    for i in 1..panels {
        pts.push(lo + (hi - lo) * i as f64 / panels as f64);
    }
    for focus in [zs - 0.5 * source.length, zs, zs + 0.5 * source.length] {
        let mut step = rho.max(1e-12) / 4.0;
        while step < hi - lo {
            pts.push(focus - step);
            pts.push(focus + step);
            step *= 1.5;
        }
    }
    pts.retain(|&p| p >= lo && p <= hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-15 * (hi - lo));
    let feed = (k * h_obs).sin();
    let mut total = C64::new(0.0, 0.0);
    for win in pts.windows(2) {
        let (a, b) = (win[0], win[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (xi, wi) in x.iter().zip(&w) {
            let z = mid + half * xi;
            let current = (k * (h_obs - (z - zo).abs())).sin() / feed;
            total += sinusoidal_filament_ez(rho, z - zs, source.length, k) * (current * wi * half);
        }
    }
    -total
}


//! Globally optimal loads when the RIS elements do not couple.
//!
//! With a diagonal `Z_SS` the channel becomes `b - Σ a_i e^{jφ_i}` where
//! `φ_i = 2θ_i` is the phase of `1 / (Z_SS(i,i) + Z_RIS(i,i))` doubled. The
//! magnitude is maximized by rotating every `a_i e^{jφ_i}` opposite to `b`,
//! which reaches the triangle-inequality bound `|b| + Σ|a_i|`.

use std::f64::consts::PI;

use log::warn;
use rayon::prelude::*;

use crate::channel::{ChannelError, RisLoad};
use crate::em_model::ImpedanceNetwork;
use crate::numerics::{phase_or_zero, wrap_to_pi, ComplexVector, C64};

/// Resonance guard on `|1 + e^{jφ}|`.
pub const RESONANCE_EPS: f64 = 1e-9;
/// Reactances are clamped to this magnitude (Ohm).
pub const MAX_REACTANCE: f64 = 1e9;
/// Largest problem the exhaustive grid search accepts.
pub const BRUTE_FORCE_MAX_ELEMENTS: usize = 4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NcError {
    #[error("R0 + X_SS = {0} must be positive")]
    InvalidResistance(f64),
    #[error("phase {phase} at element {index} is resonant (|1 + e^(jφ)| too small)")]
    ResonantPhase { index: usize, phase: f64 },
    #[error("phase list has {got} entries, problem has {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("brute force limited to {BRUTE_FORCE_MAX_ELEMENTS} elements, got {0}")]
    ProblemTooLarge(usize),
    #[error("grid needs at least 8 points, got {0}")]
    GridTooCoarse(usize),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NcProblem {
    pub a: ComplexVector,
    pub b: C64,
    /// `|R0 + X_SS|`
    pub x_abs: f64,
    pub z_ss_diag: C64,
    pub r0: f64,
}

impl NcProblem {
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `|b - Σ a_i e^{jφ_i}|`
    pub fn objective(&self, phases: &[f64]) -> f64 {
        let s: C64 = self
            .a
            .iter()
            .zip(phases)
            .map(|(a, &phi)| a * C64::from_polar(1.0, phi))
            .sum();
        (self.b - s).norm()
    }

    /// `|b| + Σ|a_i|`
    pub fn upper_bound(&self) -> f64 {
        self.b.norm() + self.a.iter().map(|a| a.norm()).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NcSolution {
    pub phases_2theta: Vec<f64>,
    pub loads: RisLoad,
    pub predicted_gain: f64,
}

/// Builds `a_i = z_ST(i) z_RS(i) / (2|R0 + X_SS|)` and `b = Z_RT - Σ a_i` from
/// the diagonal of `Z_SS` only.
pub fn build_nc_problem(net: &ImpedanceNetwork, r0: f64) -> Result<NcProblem, NcError> {
    let z_ss_diag = net.z_ss[(0, 0)];
    let x = r0 + z_ss_diag.re;
    if !(x > 0.0) {
        return Err(NcError::InvalidResistance(x));
    }
    let scale = 1.0 / (2.0 * x.abs());
    let a: Vec<C64> = net
        .z_st
        .iter()
        .zip(net.z_rs.iter())
        .map(|(st, rs)| st * rs * scale)
        .collect();
    let b = net.z_rt - a.iter().sum::<C64>();
    Ok(NcProblem {
        a: ComplexVector::new(a).map_err(ChannelError::from)?,
        b,
        x_abs: x.abs(),
        z_ss_diag,
        r0,
    })
}

/// `φ_i = w(∠b - ∠a_i + π)`; elements with `a_i = 0` get phase 0.
pub fn optimal_phases(p: &NcProblem) -> Vec<f64> {
    let arg_b = phase_or_zero(p.b);
    p.a
        .iter()
        .map(|&a| {
            if a == C64::new(0.0, 0.0) {
                0.0
            } else {
                wrap_to_pi(arg_b - a.arg() + PI)
            }
        })
        .collect()
}

/// Loads realizing the doubled phases: `Z = 2|x| / (1 + e^{jφ}) - Z_SS(i,i)`,
/// evaluated as `|x| (1 - j tan(φ/2)) - Z_SS(i,i)` to stay accurate near φ = ±π.
pub fn phases_to_loads(phases: &[f64], p: &NcProblem) -> Result<RisLoad, NcError> {
    if phases.len() != p.len() {
        return Err(NcError::LengthMismatch {
            expected: p.len(),
            got: phases.len(),
        });
    }
    let mut reactances = Vec::with_capacity(phases.len());
    for (index, &phase) in phases.iter().enumerate() {
        // |1 + e^{jφ}| = 2|cos(φ/2)|
        if 2.0 * (0.5 * phase).cos().abs() <= RESONANCE_EPS {
            return Err(NcError::ResonantPhase { index, phase });
        }
        let z = C64::new(p.x_abs, -p.x_abs * (0.5 * phase).tan()) - p.z_ss_diag;
        debug_assert!(
            (z.re - p.r0).abs() <= 1e-9 * p.x_abs.max(1.0),
            "Re(Z_RIS) = {} drifted from R0 = {}",
            z.re,
            p.r0
        );
        let x = if z.im.abs() > MAX_REACTANCE {
            warn!("element {index}: reactance {:.3e} clamped to ±{MAX_REACTANCE:e} Ohm", z.im);
            MAX_REACTANCE.copysign(z.im)
        } else {
            z.im
        };
        reactances.push(x);
    }
    Ok(RisLoad::new(reactances, p.r0)?)
}

/// Optimal no-coupling design for `net`.
pub fn solve_no_coupling(net: &ImpedanceNetwork, r0: f64) -> Result<NcSolution, NcError> {
    let p = build_nc_problem(net, r0)?;
    let phases = optimal_phases(&p);
    let loads = phases_to_loads(&phases, &p)?;
    Ok(NcSolution {
        predicted_gain: p.upper_bound(),
        phases_2theta: phases,
        loads,
    })
}

/// Left-hand side of the stationarity system of `F`:
/// `|b a_i| sin χ_i - Σ_{k≠i} |a_i a_k| sin(χ_i - χ_k)` with
/// `χ_i = ∠b - ∠a_i - φ_i`. Equals `-F ∂F/∂φ_i`.
pub fn stationarity_residual(phases: &[f64], p: &NcProblem) -> Vec<f64> {
    let arg_b = phase_or_zero(p.b);
    let chi: Vec<f64> = p
        .a
        .iter()
        .zip(phases)
        .map(|(&a, &phi)| arg_b - phase_or_zero(a) - phi)
        .collect();
    let mag: Vec<f64> = p.a.iter().map(|a| a.norm()).collect();
    let b_abs = p.b.norm();
    (0..p.len())
        .map(|i| {
            let coupling: f64 = (0..p.len())
                .filter(|&k| k != i)
                .map(|k| mag[i] * mag[k] * (chi[i] - chi[k]).sin())
                .sum();
            b_abs * mag[i] * chi[i].sin() - coupling
        })
        .collect()
}

/// Exhaustive search over the uniform phase grid `-π + 2πg/G`. Ties go to the
/// lexicographically smallest grid tuple.
pub fn brute_force_phases(p: &NcProblem, grid_points: usize) -> Result<(Vec<f64>, f64), NcError> {
    let n = p.len();
    if n > BRUTE_FORCE_MAX_ELEMENTS {
        return Err(NcError::ProblemTooLarge(n));
    }
    if grid_points < 8 {
        return Err(NcError::GridTooCoarse(grid_points));
    }
    let grid: Vec<f64> = (0..grid_points)
        .map(|g| -PI + 2.0 * PI * g as f64 / grid_points as f64)
        .collect();
    let rotated: Vec<Vec<C64>> = p
        .a
        .iter()
        .map(|&a| grid.iter().map(|&phi| a * C64::from_polar(1.0, phi)).collect())
        .collect();

    let (best_val, best_idx) = (0..grid_points)
        .into_par_iter()
        .map(|g0| {
            let mut idx = vec![0usize; n];
            idx[0] = g0;
            let mut best = (f64::NEG_INFINITY, idx.clone());
            search(&rotated, 1, p.b - rotated[0][g0], &mut idx, &mut best);
            best
        })
        .reduce(
            || (f64::NEG_INFINITY, vec![usize::MAX; n]),
            |x, y| {
                if y.0 > x.0 || (y.0 == x.0 && y.1 < x.1) {
                    y
                } else {
                    x
                }
            },
        );
    let phases = best_idx.iter().map(|&g| grid[g]).collect();
    Ok((phases, best_val.sqrt()))
}

fn search(rotated: &[Vec<C64>], depth: usize, partial: C64, idx: &mut Vec<usize>, best: &mut (f64, Vec<usize>)) {
    if depth == rotated.len() {
        let v = partial.norm_sqr();
        if v > best.0 {
            *best = (v, idx.clone());
        }
        return;
    }
    if depth + 1 == rotated.len() {
        // innermost axis: scan without recursion
        let mut local = (f64::NEG_INFINITY, 0usize);
        for (g, u) in rotated[depth].iter().enumerate() {
            let v = (partial - u).norm_sqr();
            if v > local.0 {
                local = (v, g);
            }
        }
        if local.0 > best.0 {
            idx[depth] = local.1;
            *best = (local.0, idx.clone());
        }
        return;
    }
    for (g, u) in rotated[depth].iter().enumerate() {
        idx[depth] = g;
        search(rotated, depth + 1, partial - u, idx, best);
    }
}

//! Coupling-aware load optimization.
//!
//! Starting from the no-coupling optimum, each iteration perturbs the loads by
//! a diagonal `Z_D` with `|Z_D(i,i)| = δ`. Linearizing the inverse with the
//! first two Neumann terms,
//!
//! ```text
//! (G + Z_D)^-1 ≈ G^-1 - G^-1 Z_D G^-1,    G = Z_SS + Z_RIS,
//! ```
//!
//! turns the objective into `|b + p Z_D q|` with `b = Z_RT - z_RS G^-1 z_ST`,
//! `p = z_RS G^-1` and `q = G^-1 z_ST`. Its maximizer aligns every
//! `p(i) Z_D(i,i) q(i)` with `b`. Only the imaginary part of the maximizer is
//! applied so the load resistance stays at `R0`. `b`, `p` and `q` are recomputed
//! with a fresh solve after every update.

use std::io::Write;

use log::warn;

use crate::channel::{loaded_matrix, ChannelError, RisLoad};
use crate::em_model::ImpedanceNetwork;
use crate::harness::fmt_float;
use crate::numerics::{phase_or_zero, spectral_norm, wrap_to_pi, ComplexVector, LuFactorization, NumericsError, C64};
use crate::optimizer_nc::{solve_no_coupling, NcError};

/// Upper limit on `δ ‖G^-1‖` enforced on fixed step sizes.
pub const DELTA_CLAMP_RATIO: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum McError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    NoCoupling(#[from] NcError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Step-size rule for the perturbation magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaPolicy {
    /// Fixed δ in Ohm, clamped so that `δ ‖G^-1‖ <= 0.5`.
    Fixed(f64),
    /// `δ = ε / ‖G^-1‖`.
    Adaptive(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub max_iters: usize,
    pub delta_policy: DeltaPolicy,
    /// Early stop when the relative improvement stays below this...
    pub conv_tol: f64,
    /// ...for this many consecutive iterations.
    pub conv_window: usize,
    /// Relative per-step decrease tolerated before counting a violation.
    pub monotonicity_tol: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            delta_policy: DeltaPolicy::Adaptive(0.1),
            conv_tol: 1e-8,
            conv_window: 10,
            monotonicity_tol: 1e-6,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<(), McError> {
        if self.max_iters == 0 {
            return Err(McError::InvalidConfig("max_iters must be >= 1".into()));
        }
        match self.delta_policy {
            DeltaPolicy::Fixed(d) if !(d > 0.0 && d.is_finite()) => {
                return Err(McError::InvalidConfig(format!("fixed delta {d} must be > 0")));
            }
            DeltaPolicy::Adaptive(e) if !(e > 0.0 && e < 1.0) => {
                return Err(McError::InvalidConfig(format!("adaptive epsilon {e} must lie in (0, 1)")));
            }
            _ => {}
        }
        if !(self.conv_tol >= 0.0) {
            return Err(McError::InvalidConfig("conv_tol must be >= 0".into()));
        }
        if !(self.monotonicity_tol >= 0.0) {
            return Err(McError::InvalidConfig("monotonicity_tol must be >= 0".into()));
        }
        Ok(())
    }
}

/// `b`, `p`, `q` and `‖G^-1‖` for the current loads.
#[derive(Debug, Clone, PartialEq)]
pub struct Bpq {
    pub b: C64,
    pub p: ComplexVector,
    pub q: ComplexVector,
    pub g_inv_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McState {
    pub k: usize,
    pub load: RisLoad,
    pub b: C64,
    pub p: ComplexVector,
    pub q: ComplexVector,
    pub g_inv_norm: f64,
}

impl McState {
    fn from_bpq(k: usize, load: RisLoad, bpq: Bpq) -> Self {
        Self {
            k,
            load,
            b: bpq.b,
            p: bpq.p,
            q: bpq.q,
            g_inv_norm: bpq.g_inv_norm,
        }
    }

    pub fn objective(&self) -> f64 {
        self.b.norm()
    }
}

pub fn compute_bpq(net: &ImpedanceNetwork, load: &RisLoad) -> Result<Bpq, McError> {
    let g = loaded_matrix(net, load)?;
    let lu = LuFactorization::new(&g)?;
    let q = lu.solve(&net.z_st)?;
    // p = z_RS G^-1  <=>  p^T = G^-T z_RS^T
    let p = lu.solve_transposed(&net.z_rs)?;
    let b = net.z_rt - net.z_rs.iter().zip(&q).map(|(r, q)| r * q).sum::<C64>();
    let estimate = spectral_norm(&lu.inverse()?);
    if !estimate.converged {
        warn!(
            "‖G^-1‖ power iteration stopped after {} iterations at {:.6e}",
            estimate.iterations, estimate.value
        );
    }
    Ok(Bpq {
        b,
        p: ComplexVector::new(p)?,
        q: ComplexVector::new(q)?,
        g_inv_norm: estimate.value,
    })
}

/// Starts from the no-coupling optimum computed on the diagonal of `Z_SS`.
pub fn init_state(net: &ImpedanceNetwork, r0: f64) -> Result<McState, McError> {
    let nc = solve_no_coupling(net, r0)?;
    let bpq = compute_bpq(net, &nc.loads)?;
    Ok(McState::from_bpq(1, nc.loads, bpq))
}

/// Diagonal of the perturbation maximizing `|b + p Z_D q|` under `|Z_D(i,i)| = δ`.
pub fn optimal_perturbation(b: C64, p: &[C64], q: &[C64], delta: f64) -> Vec<C64> {
    let arg_b = phase_or_zero(b);
    p.iter()
        .zip(q)
        .map(|(&pi, &qi)| {
            let theta = if pi * qi == C64::new(0.0, 0.0) {
                0.0
            } else {
                wrap_to_pi(arg_b - pi.arg() - qi.arg())
            };
            C64::from_polar(delta, theta)
        })
        .collect()
}

/// Two-term Neumann estimate of `Z_RT - z_RS (G + Z_D)^-1 z_ST`, i.e.
/// `b + Σ p(i) Z_D(i,i) q(i)`.
pub fn neumann_apply(g_inv_times_zst: &[C64], p: &[C64], zd_diag: &[C64], b: C64) -> C64 {
    b + p
        .iter()
        .zip(zd_diag)
        .zip(g_inv_times_zst)
        .map(|((pi, zd), qi)| pi * zd * qi)
        .sum::<C64>()
}

pub fn select_delta(g_inv_norm: f64, policy: DeltaPolicy) -> f64 {
    assert!(g_inv_norm > 0.0, "‖G^-1‖ must be positive");
    match policy {
        DeltaPolicy::Adaptive(eps) => eps / g_inv_norm,
        DeltaPolicy::Fixed(delta) => {
            let cap = DELTA_CLAMP_RATIO / g_inv_norm;
            if delta > cap {
                warn!("fixed delta {delta:.4e} clamped to {cap:.4e} (‖G^-1‖ = {g_inv_norm:.4e})");
                cap
            } else {
                delta
            }
        }
    }
}

/// One update, with its bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next: McState,
    pub delta: f64,
    /// `δ ‖G_k^-1‖`
    pub norm_bound: f64,
    /// Neumann estimate of the next `b`, under the applied (imaginary) update.
    pub linearized: C64,
}

pub fn step(state: &McState, net: &ImpedanceNetwork, cfg: &McConfig) -> Result<StepOutcome, McError> {
    let delta = select_delta(state.g_inv_norm, cfg.delta_policy);
    step_with_delta(state, net, delta)
}

pub fn step_with_delta(state: &McState, net: &ImpedanceNetwork, delta: f64) -> Result<StepOutcome, McError> {
    let zd = optimal_perturbation(state.b, &state.p, &state.q, delta);
    let shifts: Vec<f64> = zd.iter().map(|z| z.im).collect();
    let applied: Vec<C64> = shifts.iter().map(|&x| C64::new(0.0, x)).collect();
    let linearized = neumann_apply(&state.q, &state.p, &applied, state.b);
    let load = state.load.shifted(&shifts);
    let bpq = compute_bpq(net, &load)?;
    Ok(StepOutcome {
        next: McState::from_bpq(state.k + 1, load, bpq),
        delta,
        norm_bound: delta * state.g_inv_norm,
        linearized,
    })
}

/// Per-iteration record of a run. Row `k` describes the state after the
/// `k`-th update.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct McTrace {
    pub initial_objective: f64,
    /// Exact `|b|` after each update (Ohm).
    pub objective: Vec<f64>,
    /// Neumann-linearized objective predicted for the same update.
    pub linearized: Vec<f64>,
    /// `|linearized - exact| / |exact|` on the complex values.
    pub linearization_error: Vec<f64>,
    pub delta_used: Vec<f64>,
    /// `δ ‖G_k^-1‖`
    pub norm_bound: Vec<f64>,
    /// `|Z_RT| + ‖z_RS‖ ‖z_ST‖ ‖G^-1‖` at the updated loads.
    pub objective_bound: Vec<f64>,
    pub violation: Vec<bool>,
    pub monotonicity_violations: usize,
    pub stopped_early: bool,
}

impl McTrace {
    pub fn len(&self) -> usize {
        self.objective.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objective.is_empty()
    }

    pub fn final_objective(&self) -> f64 {
        self.objective.last().copied().unwrap_or(self.initial_objective)
    }

    /// CSV with columns `k, objective_ohm, objective_db, delta,
    /// delta_times_ginvnorm, violation_flag`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "k",
            "objective_ohm",
            "objective_db",
            "delta",
            "delta_times_ginvnorm",
            "violation_flag",
        ])?;
        for i in 0..self.len() {
            w.write_record([
                (i + 1).to_string(),
                fmt_float(self.objective[i]),
                fmt_float(20.0 * self.objective[i].log10()),
                fmt_float(self.delta_used[i]),
                fmt_float(self.norm_bound[i]),
                u8::from(self.violation[i]).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McRun {
    pub load: RisLoad,
    pub trace: McTrace,
}

/// Error from [`run`], with the trace accumulated up to the failure.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("coupling-aware optimization aborted after {} iterations: {error}", trace.len())]
pub struct McFailure {
    pub error: McError,
    pub trace: Box<McTrace>,
}

pub fn run(net: &ImpedanceNetwork, r0: f64, cfg: &McConfig) -> Result<McRun, McFailure> {
    let fail = |error: McError, trace: McTrace| McFailure {
        error,
        trace: Box::new(trace),
    };
    let mut trace = McTrace::default();
    if let Err(e) = cfg.validate() {
        return Err(fail(e, trace));
    }
    let mut state = match init_state(net, r0) {
        Ok(s) => s,
        Err(e) => return Err(fail(e, trace)),
    };
    trace.initial_objective = state.objective();
    let zst_norm = net.z_st.norm2();
    let zrs_norm = net.z_rs.norm2();

    let mut streak = 0usize;
    for _ in 0..cfg.max_iters {
        let out = match step(&state, net, cfg) {
            Ok(o) => o,
            Err(e) => return Err(fail(e, trace)),
        };
        let prev = trace.final_objective();
        let exact = out.next.b;
        let obj = exact.norm();
        let violated = obj < prev - cfg.monotonicity_tol * prev;
        trace.objective.push(obj);
        trace.linearized.push(out.linearized.norm());
        trace
            .linearization_error
            .push((out.linearized - exact).norm() / obj.max(f64::MIN_POSITIVE));
        trace.delta_used.push(out.delta);
        trace.norm_bound.push(out.norm_bound);
        trace
            .objective_bound
            .push(net.z_rt.norm() + zrs_norm * zst_norm * out.next.g_inv_norm);
        trace.violation.push(violated);
        if violated {
            trace.monotonicity_violations += 1;
        }
        state = out.next;

        let improvement = if prev > 0.0 { (obj - prev) / prev } else { f64::INFINITY };
        if improvement < cfg.conv_tol {
            streak += 1;
        } else {
            streak = 0;
        }
        if streak >= cfg.conv_window.max(1) {
            trace.stopped_early = trace.len() < cfg.max_iters;
            break;
        }
    }
    Ok(McRun {
        load: state.load,
        trace,
    })
}

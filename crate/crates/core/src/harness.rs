//! Experiment driver: convergence traces, distance and constant-area sweeps,
//! and the validation report.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use log::{info, warn};
use rayon::prelude::*;

use crate::channel::{channel_no_coupling, end_to_end_channel, snr_gain, ChannelError, RisLoad};
use crate::em_model::{
    assemble_network_with, EmError, ImpedanceNetwork, InducedEmf, Scenario, Vec3, WireElement,
};
use crate::numerics::C64;
use crate::optimizer_mc::{run as run_mc, McConfig, McFailure, McTrace};
use crate::optimizer_nc::{
    brute_force_phases, build_nc_problem, optimal_phases, solve_no_coupling, NcError, NcProblem,
};

/// Noise power the reported gains are normalized to.
pub const NOISE_POWER: f64 = 1.0;

/// Reference λ/2 dipole values (Ohm) used by the validation report.
pub const HALF_WAVE_SELF_REF: (f64, f64) = (73.1, 42.5);
pub const HALF_WAVE_MUTUAL_REF: (f64, f64) = (-12.5, -29.9);
/// Relative tolerance for the dipole-table checks.
pub const DIPOLE_TABLE_TOL: f64 = 5e-3;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Em(#[from] EmError),
    #[error(transparent)]
    NoCoupling(#[from] NcError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    CouplingAware(#[from] Box<McFailure>),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<McFailure> for HarnessError {
    fn from(e: McFailure) -> Self {
        Self::CouplingAware(Box::new(e))
    }
}

/// Formats like C's `%.12g`.
pub fn fmt_float(v: f64) -> String {
    const SIG: i32 = 12;
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (SIG - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..SIG).contains(&exp) {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (SIG - 1 - exp).max(0) as usize;
        trim_fraction(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    /// Closed-form loads on the diagonal-only network, evaluated there.
    NoCouplingIdeal,
    /// Closed-form loads evaluated on the fully coupled channel.
    CouplingUnaware,
    /// Iterative coupling-aware loads on the fully coupled channel.
    CouplingAware,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Self::NoCouplingIdeal, Self::CouplingUnaware, Self::CouplingAware];

    pub fn name(self) -> &'static str {
        match self {
            Self::NoCouplingIdeal => "no_coupling_ideal",
            Self::CouplingUnaware => "coupling_unaware",
            Self::CouplingAware => "coupling_aware",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|st| st.name() == s.trim())
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Convergence,
    DistanceSweep,
    ConstantAreaSweep,
    Validate,
}

/// Checks available to [`run_validate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    DipoleSelfImpedance,
    DipoleMutualImpedance,
    Reciprocity,
    BruteForcePhases,
    GainIdentity,
    DiagonalEquivalence,
    NeumannBound,
    Monotonicity,
}

impl CheckKind {
    pub const ALL: [CheckKind; 8] = [
        Self::DipoleSelfImpedance,
        Self::DipoleMutualImpedance,
        Self::Reciprocity,
        Self::BruteForcePhases,
        Self::GainIdentity,
        Self::DiagonalEquivalence,
        Self::NeumannBound,
        Self::Monotonicity,
    ];
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub scenario: Scenario,
    /// N_RIS values (convergence and constant-area sweeps). Each must be a
    /// perfect square.
    pub n_ris_values: Vec<usize>,
    /// d/λ values (convergence and distance sweeps).
    pub d_over_lambda_values: Vec<f64>,
    pub strategies: Vec<Strategy>,
    pub mc: McConfig,
    /// Surface area in m² for the constant-area sweep; `None` means λ².
    pub area_m2: Option<f64>,
    pub checks: Vec<CheckKind>,
    /// Impedance evaluator; swap in a faulty one to exercise the report.
    pub emf: InducedEmf,
    pub output: Option<PathBuf>,
}

impl ExperimentSpec {
    /// Defaults for the 28 GHz preset and the given experiment.
    pub fn paper_28ghz(kind: ExperimentKind) -> Self {
        let (n_ris_values, d_over_lambda_values) = match kind {
            ExperimentKind::Convergence => (vec![16, 64], vec![0.125, 0.5]),
            ExperimentKind::DistanceSweep => (vec![], vec![0.0625, 0.125, 0.25, 0.375, 0.5, 0.75, 1.0]),
            ExperimentKind::ConstantAreaSweep => (vec![1, 4, 9, 16, 25, 36, 49, 64], vec![]),
            ExperimentKind::Validate => (vec![], vec![]),
        };
        Self {
            kind,
            scenario: Scenario::paper_28ghz(8, 0.125),
            n_ris_values,
            d_over_lambda_values,
            strategies: Strategy::ALL.to_vec(),
            mc: McConfig::default(),
            area_m2: None,
            checks: CheckKind::ALL.to_vec(),
            emf: InducedEmf::default(),
            output: None,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::InvalidSpec(m));
        if !ascending(&self.d_over_lambda_values) {
            return bad("d/λ values must be positive and ascending".into());
        }
        let ns: Vec<f64> = self.n_ris_values.iter().map(|&n| n as f64).collect();
        if !ascending(&ns) {
            return bad("N_RIS values must be positive and ascending".into());
        }
        if let Some(&n) = self.n_ris_values.iter().find(|&&n| exact_sqrt(n).is_none()) {
            return bad(format!("N_RIS = {n} is not a perfect square"));
        }
        if let Some(a) = self.area_m2 {
            if !(a > 0.0 && a.is_finite()) {
                return bad(format!("area {a} must be > 0"));
            }
        }
        let needs_strategies = matches!(
            self.kind,
            ExperimentKind::DistanceSweep | ExperimentKind::ConstantAreaSweep
        );
        if needs_strategies && self.strategies.is_empty() {
            return bad("no strategies requested".into());
        }
        let needs = |what: &str, empty: bool| {
            if empty {
                Err(HarnessError::InvalidSpec(format!("no {what} values to sweep")))
            } else {
                Ok(())
            }
        };
        match self.kind {
            ExperimentKind::Convergence => {
                needs("N_RIS", self.n_ris_values.is_empty())?;
                needs("d/λ", self.d_over_lambda_values.is_empty())?;
            }
            ExperimentKind::DistanceSweep => needs("d/λ", self.d_over_lambda_values.is_empty())?,
            ExperimentKind::ConstantAreaSweep => needs("N_RIS", self.n_ris_values.is_empty())?,
            ExperimentKind::Validate => {}
        }
        self.mc.validate().map_err(|e| HarnessError::InvalidSpec(e.to_string()))?;
        self.scenario.validate()?;
        Ok(())
    }

    fn expect_kind(&self, kind: ExperimentKind) -> Result<(), HarnessError> {
        if self.kind != kind {
            return Err(HarnessError::InvalidSpec(format!(
                "expected a {kind:?} experiment, got {:?}",
                self.kind
            )));
        }
        self.validate()
    }
}

fn ascending(v: &[f64]) -> bool {
    v.iter().all(|&x| x > 0.0 && x.is_finite()) && v.windows(2).all(|w| w[0] <= w[1])
}

fn exact_sqrt(n: usize) -> Option<usize> {
    let m = (n as f64).sqrt().round() as usize;
    (m >= 1 && m * m == n).then_some(m)
}

/// A header plus numeric rows, written as CSV with `%.12g` floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|&v| fmt_float(v)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String, HarnessError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
    }
}

/// Gains (dB re. unit noise power) of the requested strategies on one network.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyGains {
    pub gains_db: Vec<(Strategy, f64)>,
    pub aware_trace: Option<McTrace>,
}

impl StrategyGains {
    pub fn get(&self, s: Strategy) -> Option<f64> {
        self.gains_db.iter().find(|(k, _)| *k == s).map(|&(_, g)| g)
    }
}

/// Evaluates each strategy on `net` in the order given.
pub fn evaluate_strategies(
    net: &ImpedanceNetwork,
    r0: f64,
    y0: C64,
    strategies: &[Strategy],
    mc: &McConfig,
) -> Result<StrategyGains, HarnessError> {
    let mut gains_db = Vec::with_capacity(strategies.len());
    let mut aware_trace = None;
    let nc = if strategies
        .iter()
        .any(|s| matches!(s, Strategy::NoCouplingIdeal | Strategy::CouplingUnaware))
    {
        Some(solve_no_coupling(net, r0)?)
    } else {
        None
    };
    for &s in strategies {
        let h = match s {
            Strategy::NoCouplingIdeal => {
                channel_no_coupling(net, &nc.as_ref().expect("computed above").loads, y0)?
            }
            Strategy::CouplingUnaware => {
                end_to_end_channel(net, &nc.as_ref().expect("computed above").loads, y0)?
            }
            Strategy::CouplingAware => {
                let run = run_mc(net, r0, mc)?;
                if run.trace.monotonicity_violations > 0 {
                    warn!(
                        "coupling-aware trace has {} monotonicity violations",
                        run.trace.monotonicity_violations
                    );
                }
                let h = end_to_end_channel(net, &run.load, y0)?;
                aware_trace = Some(run.trace);
                h
            }
        };
        let g = snr_gain(&h, NOISE_POWER);
        if !g.is_finite() {
            return Err(HarnessError::InvalidSpec(format!("{s} gain is not finite")));
        }
        gains_db.push((s, g));
    }
    Ok(StrategyGains { gains_db, aware_trace })
}

fn network_for(spec: &ExperimentSpec, side: usize, d_over_lambda: f64) -> Result<ImpedanceNetwork, HarnessError> {
    let s = spec.scenario.with_ris(side, d_over_lambda * spec.scenario.wavelength());
    Ok(assemble_network_with(&s, &spec.emf)?)
}

/// One convergence trace per (N_RIS, d/λ) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceResult {
    /// Columns `k` and `objective_db_N<n>_d<d/λ>`, rows k = 1..=longest trace.
    /// Traces that stopped early repeat their final value.
    pub table: Table,
    pub traces: Vec<((usize, f64), McTrace)>,
}

pub fn run_convergence(spec: &ExperimentSpec) -> Result<ConvergenceResult, HarnessError> {
    spec.expect_kind(ExperimentKind::Convergence)?;
    let pairs: Vec<(usize, f64)> = spec
        .n_ris_values
        .iter()
        .flat_map(|&n| spec.d_over_lambda_values.iter().map(move |&d| (n, d)))
        .collect();
    let traces: Vec<((usize, f64), McTrace)> = pairs
        .par_iter()
        .map(|&(n, d)| {
            let side = exact_sqrt(n).expect("validated");
            let net = network_for(spec, side, d)?;
            let run = run_mc(&net, spec.scenario.r0_ohm, &spec.mc)?;
            if run.trace.monotonicity_violations > 0 {
                warn!(
                    "N = {n}, d/λ = {d}: {} monotonicity violations",
                    run.trace.monotonicity_violations
                );
            }
            info!("N = {n}, d/λ = {d}: {} iterations", run.trace.len());
            Ok(((n, d), run.trace))
        })
        .collect::<Result<_, HarnessError>>()?;

    let mut header = vec!["k".to_string()];
    header.extend(
        traces
            .iter()
            .map(|((n, d), _)| format!("objective_db_N{n}_d{}", fmt_float(*d))),
    );
    let rows_len = traces.iter().map(|(_, t)| t.len()).max().unwrap_or(0);
    let db = |v: f64| 20.0 * v.log10();
    let rows = (0..rows_len)
        .map(|k| {
            let mut row = vec![(k + 1) as f64];
            row.extend(traces.iter().map(|(_, t)| {
                let v = t.objective.get(k).copied().unwrap_or_else(|| t.final_objective());
                db(v)
            }));
            row
        })
        .collect();
    Ok(ConvergenceResult {
        table: Table { header, rows },
        traces,
    })
}

fn gain_header(strategies: &[Strategy]) -> impl Iterator<Item = String> + '_ {
    strategies.iter().map(|s| format!("gain_db_{}", s.name()))
}

/// Fixed N_RIS (from the scenario), one row per d/λ.
pub fn run_distance_sweep(spec: &ExperimentSpec) -> Result<Table, HarnessError> {
    spec.expect_kind(ExperimentKind::DistanceSweep)?;
    let side = spec.scenario.ris_side;
    let rows = spec
        .d_over_lambda_values
        .par_iter()
        .map(|&d| {
            let net = network_for(spec, side, d)?;
            let g = evaluate_strategies(&net, spec.scenario.r0_ohm, spec.scenario.y0, &spec.strategies, &spec.mc)?;
            let mut row = vec![d];
            row.extend(g.gains_db.iter().map(|&(_, v)| v));
            Ok(row)
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let mut header = vec!["d_over_lambda".to_string()];
    header.extend(gain_header(&spec.strategies));
    Ok(Table { header, rows })
}

/// Fixed surface area, `d = sqrt(area / N_RIS)`.
pub fn run_constant_area_sweep(spec: &ExperimentSpec) -> Result<Table, HarnessError> {
    spec.expect_kind(ExperimentKind::ConstantAreaSweep)?;
    let lambda = spec.scenario.wavelength();
    let area = spec.area_m2.unwrap_or(lambda * lambda);
    let rows = spec
        .n_ris_values
        .par_iter()
        .map(|&n| {
            let side = exact_sqrt(n).expect("validated");
            let d_over_lambda = (area / n as f64).sqrt() / lambda;
            let net = network_for(spec, side, d_over_lambda)?;
            let g = evaluate_strategies(&net, spec.scenario.r0_ohm, spec.scenario.y0, &spec.strategies, &spec.mc)?;
            let mut row = vec![n as f64, d_over_lambda];
            row.extend(g.gains_db.iter().map(|&(_, v)| v));
            Ok(row)
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let mut header = vec!["n_ris".to_string(), "d_over_lambda".to_string()];
    header.extend(gain_header(&spec.strategies));
    Ok(Table { header, rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Lines `name,measured,bound,pass` after a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["name", "measured", "bound", "pass"])?;
        for c in &self.checks {
            w.write_record([
                c.name.clone(),
                fmt_float(c.measured),
                fmt_float(c.bound),
                c.pass.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn upper(name: &str, measured: f64, bound: f64) -> CheckResult {
    CheckResult {
        name: name.into(),
        measured,
        bound,
        pass: measured <= bound,
    }
}

fn failed(name: &str, err: impl fmt::Display) -> CheckResult {
    warn!("check {name} could not run: {err}");
    CheckResult {
        name: name.into(),
        measured: f64::NAN,
        bound: f64::NAN,
        pass: false,
    }
}

/// Runs the requested checks; failures become report lines, never errors.
pub fn run_validate(spec: &ExperimentSpec) -> ValidationReport {
    let checks = spec
        .checks
        .iter()
        .flat_map(|&c| match c {
            CheckKind::DipoleSelfImpedance => vec![check_dipole(&spec.emf, false)],
            CheckKind::DipoleMutualImpedance => vec![check_dipole(&spec.emf, true)],
            CheckKind::Reciprocity => vec![check_reciprocity(spec)],
            CheckKind::BruteForcePhases => brute_force_instances()
                .iter()
                .enumerate()
                .map(|(i, p)| check_brute_force(i, p))
                .collect(),
            CheckKind::GainIdentity => vec![check_gain_identity(spec)],
            CheckKind::DiagonalEquivalence => vec![check_diagonal_equivalence(spec)],
            CheckKind::NeumannBound | CheckKind::Monotonicity => vec![check_coupled_run(spec, c)],
        })
        .collect();
    ValidationReport { checks }
}

fn check_dipole(emf: &InducedEmf, mutual: bool) -> CheckResult {
    // λ = 1 m keeps the geometry readable; impedances are scale free.
    let k0 = 2.0 * std::f64::consts::PI;
    let wire = |x: f64| WireElement {
        position: Vec3::new(x, 0.0, 0.0),
        length: 0.5,
        radius: 0.5 / 1000.0,
    };
    let (name, value, (re, im)) = if mutual {
        ("dipole_mutual_half_wave_0.5lambda", emf.mutual_impedance(&wire(0.0), &wire(0.5), k0), HALF_WAVE_MUTUAL_REF)
    } else {
        ("dipole_self_half_wave", emf.self_impedance(&wire(0.0), k0), HALF_WAVE_SELF_REF)
    };
    match value {
        Ok(z) => {
            let reference = C64::new(re, im);
            upper(name, (z - reference).norm() / reference.norm(), DIPOLE_TABLE_TOL)
        }
        Err(e) => failed(name, e),
    }
}

fn check_reciprocity(spec: &ExperimentSpec) -> CheckResult {
    let name = "z_ss_reciprocity";
    let s = spec.scenario.with_ris(4, 0.25 * spec.scenario.wavelength());
    match assemble_network_with(&s, &spec.emf) {
        Ok(net) => upper(name, net.reciprocity_error(), 1e-9),
        Err(e) => failed(name, e),
    }
}

fn brute_force_instances() -> Vec<NcProblem> {
    let c = C64::new;
    let mk = |a: Vec<C64>, b: C64| NcProblem {
        a: crate::numerics::ComplexVector::new(a).expect("finite"),
        b,
        x_abs: 1.0,
        z_ss_diag: c(0.8, -10.0),
        r0: 0.2,
    };
    vec![
        mk(vec![c(0.3, 0.1)], c(-0.2, 0.4)),
        mk(vec![c(0.5, -0.2), c(-0.1, 0.7)], c(0.05, 0.3)),
        mk(vec![c(0.2, 0.2), c(0.6, -0.1), c(-0.3, -0.25)], c(1.0, -0.5)),
    ]
}

fn check_brute_force(i: usize, p: &NcProblem) -> CheckResult {
    const GRID: usize = 720;
    let name = format!("closed_form_vs_grid_n{}_{i}", p.len());
    let closed = p.objective(&optimal_phases(p));
    let (_, brute) = match brute_force_phases(p, GRID) {
        Ok(r) => r,
        Err(e) => return failed(&name, e),
    };
    let sum_a: f64 = p.a.iter().map(|a| a.norm()).sum();
    // |∂F/∂φ_i| <= |a_i|, so a grid step of 2π/GRID costs at most this much.
    let resolution = 2.0 * sum_a * 2.0 * std::f64::consts::PI / GRID as f64;
    let gap = brute - closed;
    CheckResult {
        pass: gap <= 1e-12 * (p.b.norm() + sum_a) && -gap <= resolution,
        name,
        measured: gap,
        bound: resolution,
    }
}

fn check_gain_identity(spec: &ExperimentSpec) -> CheckResult {
    let name = "gain_identity_diagonal";
    let run = || -> Result<f64, HarnessError> {
        let net = network_for(spec, 4, 0.25)?.diagonal_only();
        let r0 = spec.scenario.r0_ohm;
        let nc = solve_no_coupling(&net, r0)?;
        let problem = build_nc_problem(&net, r0)?;
        let h = end_to_end_channel(&net, &nc.loads, spec.scenario.y0)?;
        let expect = spec.scenario.y0.norm()
            * (problem.b.norm() + problem.a.iter().map(|a| a.norm()).sum::<f64>());
        Ok((h.h.norm() - expect).abs() / expect)
    };
    match run() {
        Ok(err) => upper(name, err, 1e-9),
        Err(e) => failed(name, e),
    }
}

fn check_diagonal_equivalence(spec: &ExperimentSpec) -> CheckResult {
    let name = "coupling_aware_on_diagonal_network";
    let run = || -> Result<f64, HarnessError> {
        let net = network_for(spec, 4, 0.25)?.diagonal_only();
        let r0 = spec.scenario.r0_ohm;
        let optimum = build_nc_problem(&net, r0)?.upper_bound();
        let cfg = McConfig {
            max_iters: 50,
            ..spec.mc
        };
        let run = run_mc(&net, r0, &cfg)?;
        let final_value = end_to_end_channel(&net, &run.load, C64::new(1.0, 0.0))?.h.norm();
        Ok((final_value - optimum).abs() / optimum)
    };
    match run() {
        Ok(err) => upper(name, err, 1e-6),
        Err(e) => failed(name, e),
    }
}

fn check_coupled_run(spec: &ExperimentSpec, kind: CheckKind) -> CheckResult {
    let name = match kind {
        CheckKind::NeumannBound => "neumann_error_over_bound",
        _ => "monotonicity_violations",
    };
    let run = || -> Result<McTrace, HarnessError> {
        let net = network_for(spec, 4, 0.125)?;
        let cfg = McConfig {
            max_iters: 40,
            conv_tol: 0.0,
            ..spec.mc
        };
        Ok(run_mc(&net, spec.scenario.r0_ohm, &cfg)?.trace)
    };
    match (run(), kind) {
        (Ok(trace), CheckKind::NeumannBound) => {
            let worst = trace
                .linearization_error
                .iter()
                .zip(&trace.norm_bound)
                .filter(|(_, &nb)| nb <= 0.1)
                .map(|(&err, &nb)| err / (2.0 * nb * nb))
                .fold(0.0, f64::max);
            upper(name, worst, 1.0)
        }
        (Ok(trace), _) => upper(name, trace.monotonicity_violations as f64, 0.0),
        (Err(e), _) => failed(name, e),
    }
}

/// Runs the spec's experiment and writes its CSV to `spec.output` (or
/// `out`). Returns whether it passed, which only the validation report can
/// fail.
pub fn run_experiment<W: Write>(spec: &ExperimentSpec, out: W) -> Result<bool, HarnessError> {
    match spec.kind {
        ExperimentKind::Convergence => {
            run_convergence(spec)?.table.write_csv(out)?;
            Ok(true)
        }
        ExperimentKind::DistanceSweep => {
            run_distance_sweep(spec)?.write_csv(out)?;
            Ok(true)
        }
        ExperimentKind::ConstantAreaSweep => {
            run_constant_area_sweep(spec)?.write_csv(out)?;
            Ok(true)
        }
        ExperimentKind::Validate => {
            spec.validate()?;
            let report = run_validate(spec);
            report.write_csv(out)?;
            Ok(report.passed())
        }
    }
}

/// Loads used by a strategy, for callers that want more than the gain.
pub fn strategy_loads(net: &ImpedanceNetwork, r0: f64, strategy: Strategy, mc: &McConfig) -> Result<RisLoad, HarnessError> {
    Ok(match strategy {
        Strategy::NoCouplingIdeal | Strategy::CouplingUnaware => solve_no_coupling(net, r0)?.loads,
        Strategy::CouplingAware => run_mc(net, r0, mc)?.load,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting() {
        assert_eq!(fmt_float(0.0), "0");
        assert_eq!(fmt_float(1.0), "1");
        assert_eq!(fmt_float(16.0), "16");
        assert_eq!(fmt_float(0.125), "0.125");
        assert_eq!(fmt_float(-2.5), "-2.5");
        assert_eq!(fmt_float(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_float(123456.789), "123456.789");
        assert_eq!(fmt_float(1e-5), "1e-05");
        assert_eq!(fmt_float(1.5e-7), "1.5e-07");
        assert_eq!(fmt_float(0.0001), "0.0001");
        assert_eq!(fmt_float(1e12), "1e+12");
        assert_eq!(fmt_float(999999999999.0), "999999999999");
        assert_eq!(fmt_float(9.9999999999999e11), "1e+12");
        assert_eq!(fmt_float(f64::NAN), "nan");
        assert_eq!(fmt_float(-f64::INFINITY), "-inf");
    }

    #[test]
    fn perfect_squares() {
        assert_eq!(exact_sqrt(1), Some(1));
        assert_eq!(exact_sqrt(64), Some(8));
        assert_eq!(exact_sqrt(63), None);
        assert_eq!(exact_sqrt(0), None);
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(Strategy::parse(s.name()), Some(s));
        }
        assert_eq!(Strategy::parse("bogus"), None);
    }

    #[test]
    fn spec_validation() {
        let mut spec = ExperimentSpec::paper_28ghz(ExperimentKind::DistanceSweep);
        assert!(spec.validate().is_ok());
        spec.d_over_lambda_values = vec![0.5, 0.25];
        assert!(spec.validate().is_err());
        spec.d_over_lambda_values = vec![-0.5];
        assert!(spec.validate().is_err());
        spec.d_over_lambda_values = vec![0.5];
        spec.strategies.clear();
        assert!(spec.validate().is_err());

        let mut spec = ExperimentSpec::paper_28ghz(ExperimentKind::ConstantAreaSweep);
        spec.n_ris_values = vec![4, 8];
        assert!(matches!(spec.validate(), Err(HarnessError::InvalidSpec(_))));
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let spec = ExperimentSpec::paper_28ghz(ExperimentKind::Validate);
        assert!(run_distance_sweep(&spec).is_err());
    }

    #[test]
    fn empty_check_list_passes() {
        let mut spec = ExperimentSpec::paper_28ghz(ExperimentKind::Validate);
        spec.checks.clear();
        let report = run_validate(&spec);
        assert!(report.checks.is_empty());
        assert!(report.passed());
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "name,measured,bound,pass\n");
    }

    #[test]
    fn table_csv() {
        let t = Table {
            header: vec!["k".into(), "v".into()],
            rows: vec![vec![1.0, 0.1], vec![2.0, -3.25e-9]],
        };
        assert_eq!(t.to_csv_string().unwrap(), "k,v\n1,0.1\n2,-3.25e-09\n");
        assert_eq!(t.column("v"), Some(vec![0.1, -3.25e-9]));
        assert_eq!(t.column("w"), None);
    }
}

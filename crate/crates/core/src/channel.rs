//! End-to-end channel of the RIS-assisted link.

use crate::em_model::ImpedanceNetwork;
use crate::numerics::{ComplexMatrix, LuFactorization, NumericsError, C64};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChannelError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("series resonance at element {index}: Z_SS(i,i) + Z_RIS(i,i) = 0")]
    DivisionByZero { index: usize },
    #[error("load has {load} elements but the network has {network}")]
    SizeMismatch { load: usize, network: usize },
    #[error("invalid load: {0}")]
    InvalidLoad(String),
}

/// Diagonal tunable load matrix. Only the reactances are stored; every
/// diagonal entry has real part `r0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RisLoad {
    reactances: Vec<f64>,
    r0: f64,
}

impl RisLoad {
    pub fn new(reactances: Vec<f64>, r0: f64) -> Result<Self, ChannelError> {
        if reactances.is_empty() {
            return Err(ChannelError::InvalidLoad("no elements".into()));
        }
        if !(r0 >= 0.0 && r0.is_finite()) {
            return Err(ChannelError::InvalidLoad(format!("R0 = {r0} must be >= 0")));
        }
        if let Some(i) = reactances.iter().position(|x| !x.is_finite()) {
            return Err(ChannelError::InvalidLoad(format!("reactance {i} is not finite")));
        }
        Ok(Self { reactances, r0 })
    }

    pub fn len(&self) -> usize {
        self.reactances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reactances.is_empty()
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn reactances(&self) -> &[f64] {
        &self.reactances
    }

    pub fn entry(&self, i: usize) -> C64 {
        C64::new(self.r0, self.reactances[i])
    }

    pub fn entries(&self) -> Vec<C64> {
        (0..self.len()).map(|i| self.entry(i)).collect()
    }

    /// Adds `deltas` to the reactances; the resistance is untouched.
    pub fn shifted(&self, deltas: &[f64]) -> Self {
        assert_eq!(deltas.len(), self.len());
        Self {
            reactances: self.reactances.iter().zip(deltas).map(|(x, d)| x + d).collect(),
            r0: self.r0,
        }
    }

    pub fn with_reactance(&self, i: usize, x: f64) -> Self {
        let mut out = self.clone();
        out.reactances[i] = x;
        out
    }
}

/// Channel sample `h` and its gain `20 log10 |h|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelValue {
    pub h: C64,
    pub gain_db: f64,
}

impl ChannelValue {
    pub fn from_h(h: C64) -> Self {
        Self {
            h,
            gain_db: 20.0 * h.norm().log10(),
        }
    }
}

/// `Z_SS + Z_RIS`.
pub fn loaded_matrix(net: &ImpedanceNetwork, load: &RisLoad) -> Result<ComplexMatrix, ChannelError> {
    if load.len() != net.len() {
        return Err(ChannelError::SizeMismatch {
            load: load.len(),
            network: net.len(),
        });
    }
    let mut g = net.z_ss.clone();
    for i in 0..load.len() {
        g[(i, i)] += load.entry(i);
    }
    Ok(g)
}

/// `h = Y0 (Z_RT - z_RS (Z_SS + Z_RIS)^-1 z_ST)`, via one LU solve.
pub fn end_to_end_channel(net: &ImpedanceNetwork, load: &RisLoad, y0: C64) -> Result<ChannelValue, ChannelError> {
    let g = loaded_matrix(net, load)?;
    let x = LuFactorization::new(&g)?.solve(&net.z_st)?;
    let scattered: C64 = net.z_rs.iter().zip(&x).map(|(r, x)| r * x).sum();
    Ok(ChannelValue::from_h(y0 * (net.z_rt - scattered)))
}

/// Per-element sum for a network without coupling. Off-diagonal entries of
/// `Z_SS` are ignored.
pub fn channel_no_coupling(net: &ImpedanceNetwork, load: &RisLoad, y0: C64) -> Result<ChannelValue, ChannelError> {
    if load.len() != net.len() {
        return Err(ChannelError::SizeMismatch {
            load: load.len(),
            network: net.len(),
        });
    }
    let mut scattered = C64::new(0.0, 0.0);
    for i in 0..net.len() {
        let den = net.z_ss[(i, i)] + load.entry(i);
        if den.norm() <= f64::MIN_POSITIVE {
            return Err(ChannelError::DivisionByZero { index: i });
        }
        scattered += net.z_st[i] * net.z_rs[i] / den;
    }
    Ok(ChannelValue::from_h(y0 * (net.z_rt - scattered)))
}

/// `10 log10(|h|^2 / noise_power)`.
pub fn snr_gain(h: &ChannelValue, noise_power: f64) -> f64 {
    assert!(noise_power > 0.0, "noise power must be positive");
    10.0 * (h.h.norm_sqr() / noise_power).log10()
}

//! Plain-text `key = value` configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Vectors are written
//! `x, y, z`; lists are comma separated. Lengths given `_over_lambda` are
//! scaled by the wavelength of the (possibly overridden) frequency.

use std::collections::BTreeMap;
use std::path::Path;

use crate::em_model::{RisPlane, Scenario, Vec3, SPEED_OF_LIGHT};
use crate::harness::{ExperimentSpec, Strategy};
use crate::optimizer_mc::DeltaPolicy;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}`: {message}")]
    BadValue { key: String, message: String },
    #[error("keys `{0}` and `{1}` are mutually exclusive")]
    Conflict(&'static str, &'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

const SCENARIO_KEYS: &[&str] = &[
    "frequency_hz",
    "tx_pos",
    "rx_pos",
    "ris_center",
    "M",
    "d_over_lambda",
    "d_m",
    "wire_length_over_lambda",
    "wire_radius_over_lambda",
    "tx_wire_length_over_lambda",
    "tx_wire_radius_over_lambda",
    "rx_wire_length_over_lambda",
    "rx_wire_radius_over_lambda",
    "ris_wire_length_over_lambda",
    "ris_wire_radius_over_lambda",
    "R0_ohm",
    "Y0_re",
    "Y0_im",
    "direct_link",
    "ris_plane",
];

const EXPERIMENT_KEYS: &[&str] = &[
    "n_ris_values",
    "d_over_lambda_values",
    "strategies",
    "max_iters",
    "eps_delta",
    "delta_ohm",
    "conv_tol",
    "conv_window",
    "monotonicity_tol",
    "area_over_lambda2",
];

/// Parsed key/value pairs, in key order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: idx + 1,
                text: raw.to_string(),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line: idx + 1,
                    text: raw.to_string(),
                });
            }
            if !SCENARIO_KEYS.contains(&key) && !EXPERIMENT_KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey(key.to_string()));
            }
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(ConfigError::Duplicate {
                    line: idx + 1,
                    key: key.to_string(),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|e| bad(key, e.to_string())))
            .transpose()
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|item| item.trim().parse::<T>().map_err(|e| bad(key, e.to_string())))
                    .collect()
            })
            .transpose()
    }

    fn vec3(&self, key: &str) -> Result<Option<Vec3>, ConfigError> {
        match self.list::<f64>(key)? {
            None => Ok(None),
            Some(v) if v.len() == 3 => Ok(Some(Vec3::new(v[0], v[1], v[2]))),
            Some(v) => Err(bad(key, format!("expected 3 components, got {}", v.len()))),
        }
    }

    /// Applies the scenario keys on top of `base`.
    pub fn apply_to_scenario(&self, base: &Scenario) -> Result<Scenario, ConfigError> {
        let mut s = base.clone();
        if let Some(f) = self.parsed::<f64>("frequency_hz")? {
            s.frequency_hz = f;
        }
        let lambda = SPEED_OF_LIGHT / s.frequency_hz;
        if let Some(p) = self.vec3("tx_pos")? {
            s.tx.position = p;
        }
        if let Some(p) = self.vec3("rx_pos")? {
            s.rx.position = p;
        }
        if let Some(p) = self.vec3("ris_center")? {
            s.ris_center = p;
        }
        if let Some(m) = self.parsed::<usize>("M")? {
            s.ris_side = m;
        }
        match (self.parsed::<f64>("d_over_lambda")?, self.parsed::<f64>("d_m")?) {
            (Some(_), Some(_)) => return Err(ConfigError::Conflict("d_over_lambda", "d_m")),
            (Some(r), None) => s.spacing_m = r * lambda,
            (None, Some(d)) => s.spacing_m = d,
            (None, None) => {}
        }
        if let Some(l) = self.parsed::<f64>("wire_length_over_lambda")? {
            s.tx.length = l * lambda;
            s.rx.length = l * lambda;
            s.ris_wire_length = l * lambda;
        }
        if let Some(a) = self.parsed::<f64>("wire_radius_over_lambda")? {
            s.tx.radius = a * lambda;
            s.rx.radius = a * lambda;
            s.ris_wire_radius = a * lambda;
        }
        let scaled = |key: &str| -> Result<Option<f64>, ConfigError> { Ok(self.parsed::<f64>(key)?.map(|v| v * lambda)) };
        if let Some(v) = scaled("tx_wire_length_over_lambda")? {
            s.tx.length = v;
        }
        if let Some(v) = scaled("tx_wire_radius_over_lambda")? {
            s.tx.radius = v;
        }
        if let Some(v) = scaled("rx_wire_length_over_lambda")? {
            s.rx.length = v;
        }
        if let Some(v) = scaled("rx_wire_radius_over_lambda")? {
            s.rx.radius = v;
        }
        if let Some(v) = scaled("ris_wire_length_over_lambda")? {
            s.ris_wire_length = v;
        }
        if let Some(v) = scaled("ris_wire_radius_over_lambda")? {
            s.ris_wire_radius = v;
        }
        if let Some(r) = self.parsed::<f64>("R0_ohm")? {
            s.r0_ohm = r;
        }
        if let Some(v) = self.parsed::<f64>("Y0_re")? {
            s.y0.re = v;
        }
        if let Some(v) = self.parsed::<f64>("Y0_im")? {
            s.y0.im = v;
        }
        if let Some(v) = self.parsed::<bool>("direct_link")? {
            s.direct_link = v;
        }
        if let Some(v) = self.get("ris_plane") {
            s.ris_plane = match v.to_ascii_lowercase().as_str() {
                "xz" => RisPlane::Xz,
                "yz" => RisPlane::Yz,
                other => return Err(bad("ris_plane", format!("expected xz or yz, got {other:?}"))),
            };
        }
        s.validate().map_err(|e| bad("scenario", e.to_string()))?;
        Ok(s)
    }

    /// Applies scenario and experiment keys to `spec`.
    pub fn apply_to_spec(&self, spec: &mut ExperimentSpec) -> Result<(), ConfigError> {
        spec.scenario = self.apply_to_scenario(&spec.scenario)?;
        if let Some(v) = self.list::<usize>("n_ris_values")? {
            spec.n_ris_values = v;
        }
        if let Some(v) = self.list::<f64>("d_over_lambda_values")? {
            spec.d_over_lambda_values = v;
        }
        if let Some(v) = self.get("strategies") {
            spec.strategies = v
                .split(',')
                .map(|s| Strategy::parse(s).ok_or_else(|| bad("strategies", format!("unknown strategy {:?}", s.trim()))))
                .collect::<Result<_, _>>()?;
        }
        if let Some(k) = self.parsed::<usize>("max_iters")? {
            spec.mc.max_iters = k;
        }
        match (self.parsed::<f64>("eps_delta")?, self.parsed::<f64>("delta_ohm")?) {
            (Some(_), Some(_)) => return Err(ConfigError::Conflict("eps_delta", "delta_ohm")),
            (Some(e), None) => spec.mc.delta_policy = DeltaPolicy::Adaptive(e),
            (None, Some(d)) => spec.mc.delta_policy = DeltaPolicy::Fixed(d),
            (None, None) => {}
        }
        if let Some(v) = self.parsed::<f64>("conv_tol")? {
            spec.mc.conv_tol = v;
        }
        if let Some(v) = self.parsed::<usize>("conv_window")? {
            spec.mc.conv_window = v;
        }
        if let Some(v) = self.parsed::<f64>("monotonicity_tol")? {
            spec.mc.monotonicity_tol = v;
        }
        if let Some(v) = self.parsed::<f64>("area_over_lambda2")? {
            let lambda = spec.scenario.wavelength();
            spec.area_m2 = Some(v * lambda * lambda);
        }
        Ok(())
    }
}

fn bad(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::BadValue {
        key: key.to_string(),
        message: message.into(),
    }
}

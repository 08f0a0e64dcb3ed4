//! Run configuration, stored as TOML with every key explicit.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_traits::{One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::ledger::{AffineExp, Q};
use crate::multipliers::{IMethodParams, DEFAULT_SPLIT_FACTOR};
use crate::solver::cfl_limit;
use crate::spectral::TorusGrid;

/// Default roughness margin of randomly generated data.
pub const DEFAULT_DECAY_DELTA: f64 = 0.1;

/// Parses `"1/2"`, `"3"` or a terminating decimal such as `"0.45"` exactly.
pub fn parse_rational(text: &str) -> Result<Q> {
    let t = text.trim();
    let bad = || Error::config(format!("cannot parse {text:?} as a rational number"));
    if t.contains('/') {
        return Q::from_str(t).map_err(|_| bad());
    }
    let (sign, body) = match t.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, t),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) || frac.len() > 12 {
        return Err(bad());
    }
    let digits: i64 = format!("{int}{frac}").parse().map_err(|_| bad())?;
    let denom = 10i64.checked_pow(frac.len() as u32).ok_or_else(bad)?;
    Ok(Q::new(sign * digits, denom))
}

fn rational_to_f64(q: Q) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

mod rational_str {
    use super::*;

    pub fn serialize<S: Serializer>(q: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&q.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Q, D::Error> {
        let text = String::deserialize(d)?;
        parse_rational(&text).map_err(serde::de::Error::custom)
    }
}

/// Time step: a fixed value or `"auto"` (the CFL limit of the grid).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum TimeStep {
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TimeStepRepr {
    Number(f64),
    Text(String),
}

impl Serialize for TimeStep {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TimeStep::Auto => TimeStepRepr::Text("auto".into()),
            TimeStep::Fixed(dt) => TimeStepRepr::Number(*dt),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TimeStep {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match TimeStepRepr::deserialize(d)? {
            TimeStepRepr::Number(dt) => Ok(TimeStep::Fixed(dt)),
            TimeStepRepr::Text(t) if t == "auto" => Ok(TimeStep::Auto),
            TimeStepRepr::Text(t) => Err(serde::de::Error::custom(format!(
                "dt must be a number or \"auto\", got {t:?}"
            ))),
        }
    }
}

impl fmt::Display for TimeStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeStep::Auto => f.write_str("auto"),
            TimeStep::Fixed(dt) => write!(f, "{dt}"),
        }
    }
}

/// Initial data source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    /// Gaussian Fourier coefficients with `H^{s+δ}`-borderline decay.
    RandomHs {
        #[serde(default = "default_delta")]
        decay_delta: f64,
    },
    /// `u₀ = amplitude·cos(2π n·x)`, `u₁ = 0`.
    Eigenmode { n: [i64; 2], amplitude: f64 },
    /// `u₀ ≡ c`, `u₁ = 0`.
    Constant { c: f64 },
    /// A directory holding `u.twl` and `v.twl` snapshots.
    File { path: PathBuf },
}

fn default_delta() -> f64 {
    DEFAULT_DECAY_DELTA
}

/// How long each window of a run is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SizeRule {
    /// `|J| = c·N^j`, with `j` an affine exponent in `s` (ε is dropped).
    Exponent { c: f64, j: String },
    Length { length: f64 },
}

impl SizeRule {
    pub fn length(&self, s: Q, cutoff: f64) -> Result<f64> {
        match self {
            SizeRule::Exponent { c, j } => {
                let exp: AffineExp = j.parse()?;
                let value = rational_to_f64(exp.at(s).value);
                Ok(c * cutoff.powf(value))
            }
            SizeRule::Length { length } => Ok(*length),
        }
    }
}

/// Consecutive windows starting at `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowPlan {
    pub size_rule: SizeRule,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(with = "rational_str")]
    pub s: Q,
    #[serde(rename = "N")]
    pub cutoff: f64,
    pub grid_n: usize,
    #[serde(default)]
    pub dt: TimeStep,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub seed: u64,
    /// Samples are recorded every this many steps, plus at window ends.
    #[serde(default = "one")]
    pub sample_stride: usize,
    /// Snapshot every this many samples; 0 disables snapshots.
    #[serde(default)]
    pub snapshot_stride: usize,
    #[serde(default = "default_split")]
    pub split_factor: f64,
    /// Drops the cubic term; energies then exclude the quartic part.
    #[serde(default)]
    pub linear: bool,
    pub data: DataSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_plan: Option<WindowPlan>,
}

fn one() -> usize {
    1
}

fn default_split() -> f64 {
    DEFAULT_SPLIT_FACTOR
}

impl RunConfig {
    /// A random-data run with one window spanning `[0, horizon]`.
    pub fn new(s: Q, cutoff: f64, grid_n: usize, horizon: f64, seed: u64) -> Self {
        RunConfig {
            s,
            cutoff,
            grid_n,
            dt: TimeStep::Auto,
            horizon,
            seed,
            sample_stride: 1,
            snapshot_stride: 0,
            split_factor: DEFAULT_SPLIT_FACTOR,
            linear: false,
            data: DataSpec::RandomHs {
                decay_delta: DEFAULT_DECAY_DELTA,
            },
            window_plan: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| Error::config(e.to_string().trim_end().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn s_f64(&self) -> f64 {
        rational_to_f64(self.s)
    }

    pub fn validate(&self) -> Result<()> {
        TorusGrid::new(self.grid_n).map_err(|e| Error::config(e.to_string()))?;
        if !(self.s > Q::zero() && self.s < Q::one()) {
            return Err(Error::config(format!("s = {} must lie in (0, 1)", self.s)));
        }
        if !(self.cutoff >= 1.0 && self.cutoff.is_finite()) {
            return Err(Error::config(format!("N = {} must be finite and >= 1", self.cutoff)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::config(format!("T = {} must be positive", self.horizon)));
        }
        if self.sample_stride == 0 {
            return Err(Error::config("sample_stride must be at least 1"));
        }
        self.params()?;
        let dt = self.resolved_dt()?;
        let limit = cfl_limit(self.grid()?);
        if dt > limit {
            return Err(Error::config(format!(
                "dt = {dt} exceeds the CFL limit {limit:.6e} for grid {}",
                self.grid_n
            )));
        }
        match &self.data {
            DataSpec::RandomHs { decay_delta } if !(*decay_delta > 0.0) => {
                return Err(Error::config(format!("decay_delta = {decay_delta} must be positive")));
            }
            DataSpec::Eigenmode { n, .. } => {
                let half = self.grid_n as i64 / 2;
                if n.iter().any(|k| k.abs() >= half) {
                    return Err(Error::config(format!(
                        "eigenmode {n:?} is not below the Nyquist line of grid {}",
                        self.grid_n
                    )));
                }
            }
            _ => {}
        }
        self.windows()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<TorusGrid> {
        TorusGrid::new(self.grid_n)
    }

    pub fn params(&self) -> Result<IMethodParams> {
        IMethodParams::new(self.s_f64(), self.cutoff)?
            .with_split_factor(self.split_factor)
            .map_err(|e| Error::config(e.to_string()))
    }

    pub fn resolved_dt(&self) -> Result<f64> {
        match self.dt {
            TimeStep::Auto => Ok(cfl_limit(self.grid()?)),
            TimeStep::Fixed(dt) if dt > 0.0 && dt.is_finite() => Ok(dt),
            TimeStep::Fixed(dt) => Err(Error::config(format!("dt = {dt} must be positive"))),
        }
    }

    /// Window intervals of the plan; a single `[0, T]` window without one.
    pub fn windows(&self) -> Result<Vec<(f64, f64)>> {
        let Some(plan) = &self.window_plan else {
            return Ok(vec![(0.0, self.horizon)]);
        };
        if plan.count == 0 {
            return Err(Error::config("window_plan.count must be at least 1"));
        }
        let length = plan.size_rule.length(self.s, self.cutoff)?;
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::config(format!("window length {length} must be positive")));
        }
        let end = length * plan.count as f64;
        if end > self.horizon * (1.0 + 1e-12) {
            return Err(Error::config(format!(
                "{} windows of length {length:.6e} overrun T = {}",
                plan.count, self.horizon
            )));
        }
        Ok((0..plan.count)
            .map(|k| (k as f64 * length, (k + 1) as f64 * length))
            .collect())
    }
}

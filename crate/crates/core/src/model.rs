//! Log-Heston model parameters.
//!
//! ```text
//! dX_t = (mu - V_t/2) dt + sqrt(V_t) (rho dW_t + sqrt(1 - rho^2) dB_t)
//! dV_t = kappa (theta - V_t) dt + sigma sqrt(V_t) dW_t
//! ```
//!
//! [`HestonParams`] is validated once at construction; everything downstream
//! assumes the invariants hold.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Unvalidated parameter record, as read from a config file or the command line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawParams {
    pub mu: f64,
    pub kappa: f64,
    pub theta: f64,
    pub sigma: f64,
    pub rho: f64,
    pub x0: f64,
    pub v0: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
}

impl RawParams {
    /// Parses a plain `key = value` file. Blank lines and `#` comments are
    /// ignored; every key must be present exactly once.
    pub fn parse_key_values(text: &str) -> Result<Self> {
        let mut slots: [Option<f64>; 8] = [None; 8];
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                LabError::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim();
            let idx = KEYS
                .iter()
                .position(|k| *k == key)
                .ok_or_else(|| LabError::Config(format!("line {}: unknown key `{key}`", lineno + 1)))?;
            let value: f64 = value.trim().parse().map_err(|_| {
                LabError::Config(format!("line {}: `{}` is not a number", lineno + 1, value.trim()))
            })?;
            if slots[idx].replace(value).is_some() {
                return Err(LabError::Config(format!("duplicate key `{key}`")));
            }
        }
        let get = |i: usize| slots[i].ok_or_else(|| LabError::Config(format!("missing key `{}`", KEYS[i])));
        Ok(RawParams {
            mu: get(0)?,
            kappa: get(1)?,
            theta: get(2)?,
            sigma: get(3)?,
            rho: get(4)?,
            x0: get(5)?,
            v0: get(6)?,
            horizon: get(7)?,
        })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        Self::parse_key_values(&text)
    }

    /// Renders the record in the same `key = value` format it is parsed from.
    pub fn to_key_values(&self) -> String {
        let vals = [
            self.mu, self.kappa, self.theta, self.sigma, self.rho, self.x0, self.v0, self.horizon,
        ];
        KEYS.iter()
            .zip(vals)
            .map(|(k, v)| format!("{k} = {v:?}\n"))
            .collect()
    }

    pub fn validate(self) -> Result<HestonParams> {
        HestonParams::new(self)
    }
}

const KEYS: [&str; 8] = ["mu", "kappa", "theta", "sigma", "rho", "x0", "v0", "T"];

/// The three shipped parameter sets. All share mu = 0, rho = 0.5, x0 = 0,
/// v0 = 0.04, T = 1 and differ in the Feller index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// kappa = 3, theta = 0.04, sigma = 0.3; nu = 8/3.
    High,
    /// kappa = 2, theta = 0.04, sigma = 0.4; nu = 1.
    Unit,
    /// kappa = 0.75, theta = 0.04, sigma^2 = 0.1; nu = 0.6.
    Low,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::High, Preset::Unit, Preset::Low];

    pub fn name(self) -> &'static str {
        match self {
            Preset::High => "high",
            Preset::Unit => "unit",
            Preset::Low => "low",
        }
    }

    /// Contents of the shipped config file for this preset.
    pub fn config_text(self) -> &'static str {
        match self {
            Preset::High => include_str!("../configs/high.conf"),
            Preset::Unit => include_str!("../configs/unit.conf"),
            Preset::Low => include_str!("../configs/low.conf"),
        }
    }

    pub fn raw(self) -> RawParams {
        RawParams::parse_key_values(self.config_text()).expect("shipped preset files are well formed")
    }

    pub fn params(self) -> HestonParams {
        self.raw().validate().expect("shipped presets are valid")
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "high" => Ok(Preset::High),
            "unit" => Ok(Preset::Unit),
            "low" => Ok(Preset::Low),
            other => Err(LabError::Config(format!(
                "unknown preset `{other}` (expected high, unit or low)"
            ))),
        }
    }
}

/// Validated log-Heston coefficients. Immutable and `Copy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HestonParams {
    raw: RawParams,
}

/// Closed-form mean and variance of the CIR marginal `V_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirMoments {
    pub mean: f64,
    pub variance: f64,
}

impl HestonParams {
    pub fn new(raw: RawParams) -> Result<Self> {
        fn positive(name: &'static str, value: f64) -> Result<()> {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(LabError::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite and strictly positive",
                })
            }
        }
        fn finite(name: &'static str, value: f64) -> Result<()> {
            if value.is_finite() {
                Ok(())
            } else {
                Err(LabError::InvalidParameter { name, value, reason: "must be finite" })
            }
        }
        finite("mu", raw.mu)?;
        positive("kappa", raw.kappa)?;
        positive("theta", raw.theta)?;
        positive("sigma", raw.sigma)?;
        positive("v0", raw.v0)?;
        positive("T", raw.horizon)?;
        finite("x0", raw.x0)?;
        if !(-1.0..=1.0).contains(&raw.rho) {
            return Err(LabError::InvalidParameter {
                name: "rho",
                value: raw.rho,
                reason: "must lie in [-1, 1]",
            });
        }
        Ok(HestonParams { raw })
    }

    pub fn raw(&self) -> RawParams {
        self.raw
    }

    pub fn mu(&self) -> f64 {
        self.raw.mu
    }
    pub fn kappa(&self) -> f64 {
        self.raw.kappa
    }
    pub fn theta(&self) -> f64 {
        self.raw.theta
    }
    pub fn sigma(&self) -> f64 {
        self.raw.sigma
    }
    pub fn rho(&self) -> f64 {
        self.raw.rho
    }
    pub fn x0(&self) -> f64 {
        self.raw.x0
    }
    pub fn v0(&self) -> f64 {
        self.raw.v0
    }
    pub fn horizon(&self) -> f64 {
        self.raw.horizon
    }

    /// `sqrt(1 - rho^2)`, the loading of the price on the independent driver B.
    pub fn rho_perp(&self) -> f64 {
        (1.0 - self.raw.rho * self.raw.rho).max(0.0).sqrt()
    }

    /// Feller index `nu = 2 kappa theta / sigma^2`.
    pub fn feller_index(&self) -> f64 {
        2.0 * self.raw.kappa * self.raw.theta / (self.raw.sigma * self.raw.sigma)
    }

    /// Drift constant of the square-root transform `U = sqrt(V)`:
    /// `kappa theta / 2 - sigma^2 / 8`, positive exactly when nu > 1/2.
    pub fn lamperti_constant(&self) -> f64 {
        0.5 * self.raw.kappa * self.raw.theta - 0.125 * self.raw.sigma * self.raw.sigma
    }

    /// Rejects nu <= 1/2, where the square-root decomposition is unavailable.
    pub fn require_decomposable(&self, operation: &'static str) -> Result<()> {
        let nu = self.feller_index();
        if nu > 0.5 {
            Ok(())
        } else {
            Err(LabError::FellerTooSmall { nu, operation })
        }
    }

    /// Rejects |rho| = 1, where the B-driven part of the price vanishes.
    pub fn require_non_degenerate_correlation(&self, operation: &'static str) -> Result<()> {
        if self.raw.rho.abs() < 1.0 {
            Ok(())
        } else {
            Err(LabError::DegenerateCorrelation { rho: self.raw.rho, operation })
        }
    }

    /// Mean and variance of `V_t` given `V_0 = v0`. Valid for every `t >= 0`.
    pub fn cir_marginal_moments(&self, t: f64) -> CirMoments {
        debug_assert!(t >= 0.0);
        let RawParams { kappa, theta, sigma, v0, .. } = self.raw;
        let e1 = (-kappa * t).exp();
        let e2 = e1 * e1;
        let s2 = sigma * sigma;
        let mean = theta + (v0 - theta) * e1;
        let variance = v0 * (s2 / kappa) * (e1 - e2) + (theta * s2 / (2.0 * kappa)) * (1.0 - e1) * (1.0 - e1);
        CirMoments { mean, variance }
    }
}

pub fn feller_index(p: &HestonParams) -> f64 {
    p.feller_index()
}

pub fn cir_marginal_moments(p: &HestonParams, t: f64) -> CirMoments {
    p.cir_marginal_moments(t)
}

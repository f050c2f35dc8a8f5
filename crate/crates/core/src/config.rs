//! Run configuration shared by the command-line tool and the self-test.
//!
//! A [`RunConfig`] is resolved from per-command defaults, a preset or
//! key=value file, and individual overrides, in that order. Its JSON form is
//! embedded in every CSV it produces. Thread count and file paths are left out
//! so that the output does not depend on them.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::model::{HestonParams, Preset, RawParams};
use crate::schemes::SchemeKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Rates,
    Barrier,
    BridgeCheck,
    Cc,
    Decompose,
    Moments,
    Selftest,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Rates,
        Command::Barrier,
        Command::BridgeCheck,
        Command::Cc,
        Command::Decompose,
        Command::Moments,
        Command::Selftest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Rates => "rates",
            Command::Barrier => "barrier",
            Command::BridgeCheck => "bridge-check",
            Command::Cc => "cc",
            Command::Decompose => "decompose",
            Command::Moments => "moments",
            Command::Selftest => "selftest",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Coarse scheme selected by `--scheme`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeChoice {
    Euler,
    Reference,
}

impl SchemeChoice {
    pub fn kind(self) -> SchemeKind {
        match self {
            SchemeChoice::Euler => SchemeKind::EulerFullTruncation,
            SchemeChoice::Reference => SchemeKind::DriftImplicitSqrt,
        }
    }
}

impl FromStr for SchemeChoice {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(SchemeChoice::Euler),
            "reference" => Ok(SchemeChoice::Reference),
            other => Err(LabError::Config(format!("unknown scheme `{other}` (expected euler or reference)"))),
        }
    }
}

/// Size of the self-test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    /// `M = 10^4` everywhere, tolerances widened with the sample size.
    Quick,
    /// The stated sample sizes and tolerances.
    Full,
}

/// Everything a run depends on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    /// Preset name, or `custom` once a file or override changed the parameters.
    pub preset: String,
    pub params: RawParams,
    pub steps: Vec<usize>,
    pub steps_fine: usize,
    pub paths: usize,
    pub refine: u32,
    pub seed: u64,
    pub scheme: SchemeChoice,
    pub tier: Tier,
    #[serde(skip)]
    pub threads: Option<usize>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub dump_paths: Option<PathBuf>,
}

pub const DEFAULT_SEED: u64 = 20_240_917;

/// `16, 32, ..., 512`.
pub fn default_rate_steps() -> Vec<usize> {
    (4..=9).map(|k| 1usize << k).collect()
}

impl RunConfig {
    /// Defaults for `command` with the high-Feller preset.
    pub fn defaults(command: Command) -> Self {
        let (steps, steps_fine, paths) = match command {
            Command::Rates | Command::Barrier => (default_rate_steps(), 1 << 12, 100_000),
            Command::BridgeCheck => (vec![8], 0, 100_000),
            Command::Cc => (vec![4, 16, 64], 1 << 12, 100_000),
            Command::Decompose => (default_rate_steps(), 1 << 14, 10_000),
            Command::Moments => (Vec::new(), 1 << 12, 100_000),
            Command::Selftest => (Vec::new(), 0, 0),
        };
        RunConfig {
            command,
            preset: Preset::High.name().to_string(),
            params: Preset::High.raw(),
            steps,
            steps_fine,
            paths,
            refine: 10,
            seed: DEFAULT_SEED,
            scheme: SchemeChoice::Euler,
            tier: Tier::Quick,
            threads: None,
            out: None,
            dump_paths: None,
        }
    }

    /// Applies `o` on top of the defaults for `command`.
    pub fn resolve(command: Command, o: &Overrides) -> Result<Self> {
        let mut cfg = RunConfig::defaults(command);
        if let (Some(_), Some(_)) = (&o.preset, &o.config) {
            return Err(LabError::Config("--preset and --config are mutually exclusive".into()));
        }
        if let Some(preset) = o.preset {
            cfg.preset = preset.name().to_string();
            cfg.params = preset.raw();
        }
        if let Some(path) = &o.config {
            cfg.preset = "custom".into();
            cfg.params = RawParams::from_file(path)?;
        }
        let p = &mut cfg.params;
        let fields: [(&mut f64, Option<f64>); 8] = [
            (&mut p.mu, o.mu),
            (&mut p.kappa, o.kappa),
            (&mut p.theta, o.theta),
            (&mut p.sigma, o.sigma),
            (&mut p.rho, o.rho),
            (&mut p.x0, o.x0),
            (&mut p.v0, o.v0),
            (&mut p.horizon, o.horizon),
        ];
        let mut touched = false;
        for (slot, value) in fields {
            if let Some(v) = value {
                *slot = v;
                touched = true;
            }
        }
        if touched {
            cfg.preset = "custom".into();
        }
        if let Some(steps) = &o.steps {
            if steps.is_empty() {
                return Err(LabError::Config("--steps needs at least one value".into()));
            }
            cfg.steps = steps.clone();
        }
        cfg.steps_fine = o.steps_fine.unwrap_or(cfg.steps_fine);
        cfg.paths = o.paths.unwrap_or(cfg.paths);
        cfg.refine = o.refine.unwrap_or(cfg.refine);
        cfg.seed = o.seed.unwrap_or(cfg.seed);
        cfg.scheme = o.scheme.unwrap_or(cfg.scheme);
        cfg.tier = o.tier.unwrap_or(cfg.tier);
        if o.threads == Some(0) {
            return Err(LabError::Config("--threads must be positive".into()));
        }
        cfg.threads = o.threads;
        cfg.out = o.out.clone();
        cfg.dump_paths = o.dump_paths.clone();
        cfg.heston()?;
        Ok(cfg)
    }

    pub fn heston(&self) -> Result<HestonParams> {
        self.params.validate()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config is plain data")
    }
}

/// Optional settings as they arrive from flags or the environment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub preset: Option<Preset>,
    pub config: Option<PathBuf>,
    pub mu: Option<f64>,
    pub kappa: Option<f64>,
    pub theta: Option<f64>,
    pub sigma: Option<f64>,
    pub rho: Option<f64>,
    pub x0: Option<f64>,
    pub v0: Option<f64>,
    pub horizon: Option<f64>,
    pub steps: Option<Vec<usize>>,
    pub steps_fine: Option<usize>,
    pub paths: Option<usize>,
    pub refine: Option<u32>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub scheme: Option<SchemeChoice>,
    pub tier: Option<Tier>,
    pub out: Option<PathBuf>,
    pub dump_paths: Option<PathBuf>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_apply_in_order() {
        let o = Overrides { preset: Some(Preset::Low), rho: Some(0.0), paths: Some(5000), ..Default::default() };
        let cfg = RunConfig::resolve(Command::Rates, &o).unwrap();
        assert_eq!(cfg.preset, "custom");
        assert_eq!(cfg.params, RawParams { rho: 0.0, ..Preset::Low.raw() });
        assert_eq!(cfg.paths, 5000);
        assert_eq!(cfg.steps, default_rate_steps());

        let plain = RunConfig::resolve(Command::Barrier, &Overrides::default()).unwrap();
        assert_eq!(plain.preset, "high");
        assert_eq!(plain.steps_fine, 4096);
    }

    #[test]
    fn config_file_and_preset_conflict() {
        let o = Overrides { preset: Some(Preset::Low), config: Some("x.conf".into()), ..Default::default() };
        assert!(RunConfig::resolve(Command::Cc, &o).unwrap_err().is_usage());
        let missing = Overrides { config: Some("/nonexistent/x.conf".into()), ..Default::default() };
        assert!(matches!(RunConfig::resolve(Command::Cc, &missing), Err(LabError::Config(_))));
    }

    #[test]
    fn invalid_values_are_usage_errors() {
        let o = Overrides { sigma: Some(-0.1), ..Default::default() };
        assert!(RunConfig::resolve(Command::Rates, &o).unwrap_err().is_usage());
        let o = Overrides { threads: Some(0), ..Default::default() };
        assert!(RunConfig::resolve(Command::Rates, &o).unwrap_err().is_usage());
        // |rho| = 1 is a valid model, rejected only by the operations that need |rho| < 1
        let o = Overrides { rho: Some(1.0), ..Default::default() };
        assert!(RunConfig::resolve(Command::Barrier, &o).is_ok());
    }

    #[test]
    fn json_omits_threads_and_paths() {
        let mut a = RunConfig::defaults(Command::Cc);
        let mut b = a.clone();
        a.threads = Some(1);
        b.threads = Some(4);
        b.out = Some("elsewhere.csv".into());
        assert_eq!(a.to_json(), b.to_json());
        assert!(a.to_json().contains("\"command\":\"cc\""));
        assert!(a.to_json().contains("\"T\":1.0"));
    }
}

//! Experiment configuration files.
//!
//! ```toml
//! schema_version = 1
//! experiment = "sonar"          # sonar | pendulum | gradcheck
//! seed = 1
//! runs = 5
//! output_dir = "out/sonar"     # optional, relative to the working directory
//! mixing_time_hint = 20         # optional, in steps
//!
//! [network]
//! layer_sizes = [60, 8, 1]
//! beta = 0.5
//! gamma = 1e-4
//! weight_init_halfwidth = 0.1
//!
//! [sonar]
//! data = "../data/sonar.all-data"   # relative to this file
//! hold_steps = 100
//! epochs = 20
//! split_fraction = 0.1
//! ```
//!
//! A pendulum experiment has a `[pendulum]` section with `total_steps`,
//! `window_steps` and an optional `[pendulum.params]` table; a gradcheck
//! experiment has a `[gradcheck]` section and no `[network]`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::env::{PendulumParams, SONAR_FEATURES};
use crate::error::{Error, Result};
use crate::network::NetworkConfig;

pub const SCHEMA_VERSION: u32 = 1;

/// A warning is raised when `1/(1 − β)` or `1/γ` is below this multiple of
/// the mixing-time hint.
pub const MIXING_MARGIN: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Sonar,
    Pendulum,
    Gradcheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SonarSection {
    pub data: PathBuf,
    pub hold_steps: usize,
    pub epochs: usize,
    #[serde(default = "default_split")]
    pub split_fraction: f64,
}

fn default_split() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PendulumSection {
    pub total_steps: u64,
    #[serde(default = "default_window")]
    pub window_steps: u64,
    #[serde(default)]
    pub params: PendulumParams,
}

fn default_window() -> u64 {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradcheckSection {
    pub fixture: PathBuf,
    pub betas: Vec<f64>,
    pub steps: u64,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    /// Fixtures with an `[agents]` table checked for joint versus
    /// per-agent agreement. The main fixture is always included.
    #[serde(default)]
    pub decomposition_fixtures: Vec<PathBuf>,
    #[serde(default = "default_decomposition_steps")]
    pub decomposition_steps: u64,
    #[serde(default = "default_decomposition_beta")]
    pub decomposition_beta: f64,
    #[serde(default = "default_decomposition_gamma")]
    pub decomposition_gamma: f64,
}

fn default_seeds() -> usize {
    10
}

fn default_decomposition_steps() -> u64 {
    10_000
}

fn default_decomposition_beta() -> f64 {
    0.9
}

fn default_decomposition_gamma() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixing_time_hint: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sonar: Option<SonarSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pendulum: Option<PendulumSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradcheck: Option<GradcheckSection>,
}

fn default_runs() -> usize {
    1
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::unreadable(path, e))?;
        Self::parse(&text, path)
    }

    /// Parses and validates; relative data paths are resolved against the
    /// directory of `path`.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e
                .span()
                .map(|s| text[..s.start].lines().count().max(1))
                .unwrap_or(0),
            message: e.message().to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(s) = cfg.sonar.as_mut() {
            resolve(&mut s.data);
        }
        if let Some(g) = cfg.gradcheck.as_mut() {
            resolve(&mut g.fixture);
            g.decomposition_fixtures.iter_mut().for_each(resolve);
        }
        cfg.validate().map_err(|e| match e {
            Error::Config(message) => Error::Data {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.runs == 0 {
            return Err(Error::config("runs must be at least 1"));
        }
        if let Some(h) = self.mixing_time_hint {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::config("mixing_time_hint must be positive"));
            }
        }
        let present = [
            ("sonar", self.sonar.is_some(), ExperimentKind::Sonar),
            (
                "pendulum",
                self.pendulum.is_some(),
                ExperimentKind::Pendulum,
            ),
            (
                "gradcheck",
                self.gradcheck.is_some(),
                ExperimentKind::Gradcheck,
            ),
        ];
        for (name, is_present, kind) in present {
            if is_present != (kind == self.experiment) {
                return Err(Error::config(if is_present {
                    format!(
                        "[{name}] section given for a {:?} experiment",
                        self.experiment
                    )
                } else {
                    format!("{name} experiment needs a [{name}] section")
                }));
            }
        }
        match self.experiment {
            ExperimentKind::Sonar => {
                let net = self.network_for("sonar", SONAR_FEATURES, 1)?;
                let s = self.sonar.as_ref().expect("checked above");
                if s.epochs == 0 {
                    return Err(Error::config("sonar epochs must be at least 1"));
                }
                if s.hold_steps < net.latency() + 1 {
                    return Err(Error::config(format!(
                        "hold_steps ({}) must be at least the network latency + 1 ({})",
                        s.hold_steps,
                        net.latency() + 1
                    )));
                }
                crate::env::sonar::test_count(208, s.split_fraction)?;
            }
            ExperimentKind::Pendulum => {
                self.network_for("pendulum", 8, 2)?;
                let p = self.pendulum.as_ref().expect("checked above");
                p.params.validate()?;
                if p.window_steps == 0 || p.total_steps < p.window_steps {
                    return Err(Error::config(
                        "pendulum needs window_steps ≥ 1 and total_steps ≥ window_steps",
                    ));
                }
            }
            ExperimentKind::Gradcheck => {
                if self.network.is_some() {
                    return Err(Error::config(
                        "gradcheck experiments take no [network] section",
                    ));
                }
                let g = self.gradcheck.as_ref().expect("checked above");
                if g.betas.is_empty() {
                    return Err(Error::config("gradcheck needs at least one beta"));
                }
                if let Some(b) = g
                    .betas
                    .iter()
                    .chain([&g.decomposition_beta])
                    .find(|b| !(0.0..1.0).contains(*b))
                {
                    return Err(Error::config(format!("beta must lie in [0, 1), got {b}")));
                }
                if g.steps == 0 || g.seeds == 0 {
                    return Err(Error::config(
                        "gradcheck steps and seeds must be at least 1",
                    ));
                }
                if !(g.decomposition_gamma >= 0.0 && g.decomposition_gamma.is_finite()) {
                    return Err(Error::config("decomposition_gamma must be non-negative"));
                }
            }
        }
        Ok(())
    }

    fn network_for(&self, what: &str, inputs: usize, outputs: usize) -> Result<&NetworkConfig> {
        let net = self
            .network
            .as_ref()
            .ok_or_else(|| Error::config(format!("{what} experiment needs a [network] section")))?;
        net.validate()?;
        let sizes = &net.layer_sizes;
        if sizes[0] != inputs || sizes[sizes.len() - 1] != outputs {
            return Err(Error::config(format!(
                "{what} network must have {inputs} inputs and {outputs} output units, got {sizes:?}"
            )));
        }
        Ok(net)
    }

    /// Warnings for step sizes and trace horizons that are not long
    /// compared with the supplied mixing-time hint.
    pub fn warnings(&self) -> Vec<String> {
        let Some(hint) = self.mixing_time_hint else {
            return Vec::new();
        };
        let mut out = Vec::new();
        let mut check = |label: String, horizon: f64| {
            if horizon < MIXING_MARGIN * hint {
                out.push(format!(
                    "{label} = {horizon:.4} is not much larger than the mixing time hint {hint} \
                     (wanted ≥ {}); the gradient estimate may be strongly biased",
                    MIXING_MARGIN * hint
                ));
            }
        };
        if let Some(net) = &self.network {
            check("1/(1-beta)".into(), 1.0 / (1.0 - net.beta));
            if net.gamma > 0.0 {
                check("1/gamma".into(), 1.0 / net.gamma);
            }
        }
        if let Some(g) = &self.gradcheck {
            for b in &g.betas {
                check(format!("1/(1-beta) at beta {b}"), 1.0 / (1.0 - b));
            }
        }
        out
    }

    /// Hex SHA-256 of the configuration with the output directory removed,
    /// serialised as JSON with sorted keys. Formatting, key order and
    /// comments in the source file do not affect it.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = None;
        let value = serde_json::to_value(&canonical).expect("config serialises");
        let bytes = serde_json::to_vec(&value).expect("value serialises");
        let digest = Sha256::digest(&bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

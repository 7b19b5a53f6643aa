//! Run configuration: a TOML document with `schema = 1`.
//!
//! ```toml
//! schema = 1
//! n = 512
//! k1 = 9.0
//! k2 = 10.0
//! xi12 = 0.05
//! t_max = 5000
//! output = "runs/baseline"
//!
//! [schedule]
//! spacing = "logarithmic"
//! count = 200
//!
//! [checkpoint]
//! every = 1000
//! ```
//!
//! Unknown keys are rejected. Omitted keys take the defaults listed on
//! [`RunConfig`]; [`parse_config`] fills them in so that serializing a parsed
//! config writes every value explicitly.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::classical::Ensemble;
use crate::error::{Error, Result};
use crate::evolution::{CouplingStorage, ProbeSet, SampleSchedule, SystemParams};
use crate::grid::{make_grid, CoherentStateSpec, GridSpec};
use crate::observables::RegimeOptions;

pub const CONFIG_SCHEMA: u32 = 1;

fn schema_default() -> u32 {
    CONFIG_SCHEMA
}

fn one() -> f64 {
    1.0
}

fn memory_cap_default() -> u64 {
    4096
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    #[default]
    Logarithmic,
    /// Use `times` verbatim.
    Explicit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub spacing: Spacing,
    pub count: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub times: Vec<u64>,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            spacing: Spacing::Logarithmic,
            count: 200,
            times: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rotor1: Option<CoherentStateSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rotor2: Option<CoherentStateSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointConfig {
    /// Steps between checkpoints.
    pub every: u64,
    /// Defaults to `checkpoint.bin` inside the output directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassicalConfig {
    /// Trajectories in the diffusion ensemble.
    pub ensemble: usize,
    /// Periods used to fit the classical diffusion rate.
    pub t_max: u64,
    pub lyapunov_t_max: u64,
    pub lyapunov_samples: usize,
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        ClassicalConfig {
            ensemble: 10_000,
            t_max: 200,
            lyapunov_t_max: 10_000,
            lyapunov_samples: 10,
        }
    }
}

/// Everything needed to reproduce one run.
///
/// Defaults: `schema = 1`, `hbar_s = 1`, `n2 = n`, `seed = 0`,
/// `memory_cap_mb = 4096`, coherent states of width `√(ħ_s/2)` at
/// `(π + 0.1, 0)`, 200 logarithmically spaced samples, all probes but the
/// Husimi function, no checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "schema_default")]
    pub schema: u32,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n2: Option<usize>,
    #[serde(default = "one")]
    pub hbar_s: f64,
    pub k1: f64,
    pub k2: f64,
    pub xi12: f64,
    pub t_max: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default = "memory_cap_default")]
    pub memory_cap_mb: u64,
    #[serde(default)]
    pub coupling_storage: CouplingStorage,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub probes: ProbeSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<CheckpointConfig>,
    #[serde(default)]
    pub regimes: RegimeOptions,
    #[serde(default)]
    pub classical: ClassicalConfig,
}

impl RunConfig {
    /// Baseline pair `K₁ = 9`, `K₂ = 10`, `ħ_s = 1` with every default resolved.
    pub fn baseline(n: usize, xi12: f64, t_max: u64) -> Self {
        let mut config = RunConfig {
            schema: CONFIG_SCHEMA,
            n,
            n2: None,
            hbar_s: 1.0,
            k1: 9.0,
            k2: 10.0,
            xi12,
            t_max,
            seed: 0,
            output: None,
            memory_cap_mb: memory_cap_default(),
            coupling_storage: CouplingStorage::Table,
            initial: InitialConfig::default(),
            schedule: ScheduleConfig::default(),
            probes: ProbeSet::default(),
            checkpoint: None,
            regimes: RegimeOptions::default(),
            classical: ClassicalConfig::default(),
        };
        config.resolve_defaults();
        config
    }

    pub(crate) fn resolve_defaults(&mut self) {
        let spec = CoherentStateSpec::default_for(self.hbar_s);
        self.n2.get_or_insert(self.n);
        self.initial.rotor1.get_or_insert(spec);
        self.initial.rotor2.get_or_insert(spec);
    }

    pub fn grid(&self) -> Result<GridSpec> {
        make_grid(self.n, self.n2.unwrap_or(self.n), self.hbar_s).map_err(|e| match e {
            Error::Config { key, message } if key == "n1" => Error::Config { key: "n".into(), message },
            other => other,
        })
    }

    pub fn params(&self) -> Result<SystemParams> {
        SystemParams::new(self.k1, self.k2, self.xi12, self.hbar_s)
    }

    pub fn initial_specs(&self) -> [CoherentStateSpec; 2] {
        let spec = CoherentStateSpec::default_for(self.hbar_s);
        [self.initial.rotor1.unwrap_or(spec), self.initial.rotor2.unwrap_or(spec)]
    }

    pub fn sample_schedule(&self) -> Result<SampleSchedule> {
        match self.schedule.spacing {
            Spacing::Linear => SampleSchedule::linear(self.schedule.count, self.t_max),
            Spacing::Logarithmic => SampleSchedule::logarithmic(self.schedule.count, self.t_max),
            Spacing::Explicit => SampleSchedule::new(self.schedule.times.clone()),
        }
    }

    pub fn ensemble(&self) -> Ensemble {
        Ensemble::uniform(self.classical.ensemble, self.seed)
    }

    /// Checkpoint file, when checkpoints are enabled.
    pub fn checkpoint_path(&self) -> Option<PathBuf> {
        let checkpoint = self.checkpoint.as_ref()?;
        checkpoint
            .path
            .clone()
            .or_else(|| self.output.as_ref().map(|dir| dir.join("checkpoint.bin")))
    }

    /// Rough peak memory of a run in bytes: the state, its FFT scratch and
    /// transpose, the two phase tables, and the reduced density matrix with
    /// decomposition workspace.
    pub fn memory_estimate(&self) -> u64 {
        let n1 = self.n as u64;
        let n2 = self.n2.unwrap_or(self.n) as u64;
        16 * n1 * n2 * 8 + 16 * n1 * n1 * 4
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != CONFIG_SCHEMA {
            return Err(Error::config(
                "schema",
                format!("unsupported schema {}, expected {CONFIG_SCHEMA}", self.schema),
            ));
        }
        self.grid()?;
        self.params()?;
        if self.t_max == 0 {
            return Err(Error::config("t_max", "must be at least 1"));
        }
        for (key, spec) in [("initial.rotor1", self.initial.rotor1), ("initial.rotor2", self.initial.rotor2)] {
            if let Some(s) = spec {
                if !(s.x0.is_finite() && s.p0.is_finite()) {
                    return Err(Error::config(key, "centre must be finite"));
                }
                if !(s.sigma.is_finite() && s.sigma > 0.0) {
                    return Err(Error::config(format!("{key}.sigma"), format!("must be positive, got {}", s.sigma)));
                }
            }
        }
        match self.schedule.spacing {
            Spacing::Explicit => {
                let times = &self.schedule.times;
                if times.is_empty() {
                    return Err(Error::config("schedule.times", "explicit spacing needs times"));
                }
                if times.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::config("schedule.times", "must be sorted and unique"));
                }
                if times.last().is_some_and(|&t| t > self.t_max) {
                    return Err(Error::config("schedule.times", "must not exceed t_max"));
                }
            }
            _ => {
                if self.schedule.count == 0 {
                    return Err(Error::config("schedule.count", "must be at least 1"));
                }
                if !self.schedule.times.is_empty() {
                    return Err(Error::config("schedule.times", "only used with spacing = \"explicit\""));
                }
            }
        }
        if self.probes.marginal_times.iter().any(|&t| t > self.t_max) {
            return Err(Error::config("probes.marginal_times", "must not exceed t_max"));
        }
        if let Some(c) = &self.checkpoint {
            if c.every == 0 {
                return Err(Error::config("checkpoint.every", "must be at least 1"));
            }
            if c.path.is_none() && self.output.is_none() {
                return Err(Error::config("checkpoint.path", "needed when no output directory is set"));
            }
        }
        let r = &self.regimes;
        if !(r.slope_tolerance > 0.0) {
            return Err(Error::config("regimes.slope_tolerance", "must be positive"));
        }
        if r.smoothing == 0 {
            return Err(Error::config("regimes.smoothing", "must be at least 1"));
        }
        let c = &self.classical;
        if c.ensemble == 0 {
            return Err(Error::config("classical.ensemble", "must be at least 1"));
        }
        if c.t_max < 2 {
            return Err(Error::config("classical.t_max", "must be at least 2"));
        }
        Ok(())
    }
}

fn key_at(text: &str, offset: usize) -> Option<String> {
    let start = text[..offset.min(text.len())].rfind('\n').map_or(0, |i| i + 1);
    let line = text[start..].lines().next()?;
    let key = line.split('=').next()?.trim();
    let section = text[..start]
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.starts_with('['))
        .map(|l| l.trim_matches(|c| c == '[' || c == ']').to_string());
    match section {
        Some(s) if !key.is_empty() => Some(format!("{s}.{key}")),
        _ if !key.is_empty() => Some(key.to_string()),
        _ => None,
    }
}

fn backticked(message: &str) -> Option<String> {
    let start = message.find('`')? + 1;
    let end = start + message[start..].find('`')?;
    Some(message[start..end].to_string())
}

/// Parses and validates a TOML run configuration, filling in defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut config: RunConfig = toml::from_str(text).map_err(|e| {
        let message = e.message().to_string();
        let key = if message.starts_with("missing field") || message.starts_with("unknown field") {
            backticked(&message)
        } else {
            e.span().and_then(|span| key_at(text, span.start))
        };
        Error::config(key.unwrap_or_else(|| "<document>".into()), message)
    })?;
    config.resolve_defaults();
    config.validate()?;
    Ok(config)
}

/// Writes a config back to TOML with every default explicit.
pub fn serialize_config(config: &RunConfig) -> Result<String> {
    toml::to_string(config).map_err(|e| Error::config("<document>", e.to_string()))
}

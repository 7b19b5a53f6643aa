//! Runs, sweeps, configuration and file formats.

mod config;
mod io;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{
    parse_config, serialize_config, CheckpointConfig, ClassicalConfig, InitialConfig, RunConfig, ScheduleConfig,
    Spacing, CONFIG_SCHEMA,
};
pub use io::{
    export_record, load_record, marginal_file_name, read_checkpoint, read_energy_csv, read_samples_csv,
    run_directory, write_checkpoint, write_json, write_energy_csv, write_samples_csv, Checkpoint, MarginalEntry, Provenance,
    Sidecar, CHECKPOINT_MAGIC, CHECKPOINT_VERSION, CSV_HEADER, ENERGY_FILE, MARGINAL_DIR, SAMPLES_FILE,
    SIDECAR_FILE, SIDECAR_SCHEMA,
};

use crate::classical::{ensemble_energy, lyapunov, EnsembleEnergy, LyapunovEstimate};
use crate::error::{Error, Result};
use crate::evolution::Simulation;
use crate::grid::{coherent_state, product_state, Axis, WaveFunction2D};
use crate::observables::{detect_regimes, estimate_dq, DqEstimate, RegimeOptions, RegimeReport};
use crate::record::RunRecord;
use crate::theory::{crossover_time, power_law_exponent, TheoryInputs};

/// Controls for [`run_with`].
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Continue from this checkpoint instead of the initial state.
    pub resume_from: Option<PathBuf>,
    /// Stop after this many periods and write a checkpoint.
    pub stop_at: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub record: RunRecord,
    pub provenance: Provenance,
    /// Time reached; below `t_max` when stopped early.
    pub reached: u64,
}

pub fn initial_state(config: &RunConfig) -> Result<WaveFunction2D> {
    let grid = config.grid()?;
    let [s1, s2] = config.initial_specs();
    let psi1 = coherent_state(&grid, Axis::First, &s1)?;
    let psi2 = coherent_state(&grid, Axis::Second, &s2)?;
    product_state(&grid, &psi1, &psi2)
}

/// Config fields that determine the trajectory and its samples.
fn fingerprint(config: &RunConfig) -> Result<String> {
    let key = (
        config.n,
        config.n2,
        config.hbar_s,
        (config.k1, config.k2, config.xi12),
        config.t_max,
        config.coupling_storage,
        config.initial_specs(),
        &config.schedule,
        &config.probes,
    );
    serde_json::to_string(&key).map_err(|e| Error::Checkpoint(e.to_string()))
}

fn check_memory(config: &RunConfig) -> Result<()> {
    let required = config.memory_estimate();
    let cap = config.memory_cap_mb.saturating_mul(1 << 20);
    if required > cap {
        return Err(Error::MemoryCap { required, cap });
    }
    Ok(())
}

pub fn run(config: &RunConfig) -> Result<RunOutput> {
    run_with(config, &RunOptions::default())
}

/// Evolves, probes and, when `config.output` is set, writes the run
/// directory. Checkpoints are written every `checkpoint.every` periods and
/// whenever the run stops early.
pub fn run_with(config: &RunConfig, options: &RunOptions) -> Result<RunOutput> {
    config.validate()?;
    check_memory(config)?;
    let started = Instant::now();
    let params = config.params()?;
    let schedule = config.sample_schedule()?;
    let fingerprint = fingerprint(config)?;
    let checkpoint_path = config.checkpoint_path();
    if options.stop_at.is_some() && checkpoint_path.is_none() {
        return Err(Error::config("checkpoint", "stopping early needs a checkpoint destination"));
    }

    let mut sim = match &options.resume_from {
        Some(path) => {
            let saved = read_checkpoint(path)?;
            if saved.fingerprint != fingerprint {
                return Err(Error::Checkpoint(format!(
                    "{} was written by a different configuration",
                    path.display()
                )));
            }
            Simulation::resume(
                saved.psi,
                saved.t,
                &params,
                config.coupling_storage,
                schedule,
                config.probes.clone(),
                saved.record,
                saved.diagnostics,
            )?
        }
        None => Simulation::new(
            initial_state(config)?,
            &params,
            config.coupling_storage,
            schedule,
            config.probes.clone(),
        )?,
    };

    let target = options.stop_at.map_or(config.t_max, |s| s.min(config.t_max));
    let every = config.checkpoint.as_ref().map(|c| c.every);
    let save = |sim: &Simulation| -> Result<()> {
        match &checkpoint_path {
            Some(path) => {
                if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                    std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                }
                write_checkpoint(
                    path,
                    &Checkpoint {
                        fingerprint: fingerprint.clone(),
                        t: sim.time(),
                        psi: sim.state().clone(),
                        diagnostics: sim.last_diagnostics(),
                        record: sim.record().clone(),
                    },
                )
            }
            None => Ok(()),
        }
    };

    let mut failure = None;
    while sim.time() < target {
        let next = match every {
            Some(k) => ((sim.time() / k + 1) * k).min(target),
            None => target,
        };
        if let Err(e) = sim.advance_to(next) {
            failure = Some(e);
            break;
        }
        if every.is_some_and(|k| next % k == 0) || (next == target && target < config.t_max) {
            save(&sim)?;
        }
    }

    let reached = sim.time();
    let record = sim.into_record();
    let provenance = Provenance::current(started.elapsed().as_secs_f64());
    if reached == config.t_max || failure.is_some() {
        if let Some(dir) = &config.output {
            export_record(dir, config, &record, &provenance)?;
        }
    }
    match failure {
        Some(e) => Err(Error::Numerical(format!("run stopped at t = {reached}: {e}"))),
        None => Ok(RunOutput {
            record,
            provenance,
            reached,
        }),
    }
}

/// Classical diffusion and Lyapunov exponent for the config's parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalReport {
    pub k1: f64,
    pub k2: f64,
    pub xi12: f64,
    pub energy: EnsembleEnergy,
    pub lyapunov: LyapunovEstimate,
    /// `K₁²/4`.
    pub quasilinear_d: f64,
    /// `ln(K₁/2)`.
    pub standard_map_lyapunov: f64,
}

pub fn classical_diffusion(config: &RunConfig) -> Result<EnsembleEnergy> {
    ensemble_energy(&config.ensemble(), &config.params()?, config.classical.t_max as usize)
}

pub fn run_classical(config: &RunConfig) -> Result<ClassicalReport> {
    config.validate()?;
    let params = config.params()?;
    let energy = classical_diffusion(config)?;
    let lyapunov = lyapunov(
        &params,
        config.classical.lyapunov_t_max as usize,
        config.classical.lyapunov_samples,
        config.seed,
    )?;
    let report = ClassicalReport {
        k1: params.k1,
        k2: params.k2,
        xi12: params.xi12,
        energy,
        lyapunov,
        quasilinear_d: params.k1 * params.k1 / 4.0,
        standard_map_lyapunov: (params.k1 / 2.0).ln(),
    };
    if let Some(dir) = &config.output {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let points: Vec<_> = report
            .energy
            .e1
            .iter()
            .zip(&report.energy.e2)
            .enumerate()
            .map(|(t, (&e1, &e2))| crate::record::EnergyPoint { t: t as u64, e1, e2 })
            .collect();
        write_energy_csv(&dir.join("classical_energy.csv"), &points)?;
        write_json(&dir.join("classical.json"), &report)?;
    }
    Ok(report)
}

/// Derived quantities of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub xi12: f64,
    pub hbar_s: f64,
    pub d_cl: f64,
    pub regimes: RegimeReport,
    pub d_q: Option<DqEstimate>,
    pub t_star_predicted: Option<f64>,
    pub notes: Vec<String>,
}

impl RunSummary {
    pub fn linear_rate(&self) -> Option<f64> {
        self.regimes.linear_rate
    }

    pub fn t_star_numeric(&self) -> Option<f64> {
        self.regimes.t_star_numeric
    }
}

/// Quantum diffusion rate fitted after the numerical crossover: over
/// `[2t*, t_max]`, falling back to `[t*, t_max]` when that window is too
/// short.
pub fn late_diffusion(record: &RunRecord, t_star: f64) -> Result<DqEstimate> {
    let t_end = record.energy.last().map_or(0.0, |p| p.t as f64);
    estimate_dq(record, (2.0 * t_star, t_end)).or_else(|_| estimate_dq(record, (t_star, t_end)))
}

pub fn summarize(record: &RunRecord, d_cl: f64, options: &RegimeOptions) -> Result<RunSummary> {
    let regimes = detect_regimes(record, d_cl, options)?;
    let mut notes = Vec::new();
    let d_q = match regimes.t_star_numeric {
        Some(t_star) => late_diffusion(record, t_star)
            .map_err(|e| notes.push(format!("no quantum diffusion rate: {e}")))
            .ok(),
        None => None,
    };
    let params = record.params;
    let t_star_predicted = d_q.as_ref().and_then(|d| {
        TheoryInputs::new(params.xi12, params.hbar_s, d.d_q)
            .and_then(|inputs| crossover_time(&inputs))
            .map_err(|e| notes.push(format!("no predicted crossover: {e}")))
            .ok()
    });
    Ok(RunSummary {
        xi12: params.xi12,
        hbar_s: params.hbar_s,
        d_cl,
        regimes,
        d_q,
        t_star_predicted,
        notes,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Xi12,
    HbarS,
    /// Sets `k1` to the value and keeps `k2 − k1` fixed.
    K1K2,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Xi12 => "xi12",
            SweepAxis::HbarS => "hbar_s",
            SweepAxis::K1K2 => "k1k2",
        }
    }

    pub fn apply(self, base: &RunConfig, value: f64) -> RunConfig {
        let mut config = base.clone();
        match self {
            SweepAxis::Xi12 => config.xi12 = value,
            SweepAxis::HbarS => {
                config.hbar_s = value;
                config.initial = InitialConfig::default();
                config.resolve_defaults();
            }
            SweepAxis::K1K2 => {
                config.k2 = value + (base.k2 - base.k1);
                config.k1 = value;
            }
        }
        config.output = base
            .output
            .as_ref()
            .map(|dir| dir.join(format!("{}_{}", self.name(), value)));
        if let (Some(c), Some(dir)) = (config.checkpoint.as_mut(), config.output.as_ref()) {
            c.path = Some(dir.join("checkpoint.bin"));
        }
        config
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub summary: Option<RunSummary>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub axis: SweepAxis,
    /// Ordered by value.
    pub rows: Vec<SweepRow>,
    /// Log-log slope of the linear entropy rate against the coupling, when
    /// sweeping `xi12` over at least two values with rates.
    pub rate_exponent: Option<f64>,
}

impl SweepReport {
    /// `(ξ, t*_numeric, t*_predicted)` where both are available.
    pub fn crossover_table(&self) -> Vec<(f64, f64, f64)> {
        self.rows
            .iter()
            .filter_map(|r| {
                let s = r.summary.as_ref()?;
                Some((r.value, s.t_star_numeric()?, s.t_star_predicted?))
            })
            .collect()
    }
}

fn sweep_one(config: &RunConfig) -> Result<RunSummary> {
    let d_cl = classical_diffusion(config)?.d_cl;
    let out = run(config)?;
    summarize(&out.record, d_cl, &config.regimes)
}

/// Runs `base` once per value on up to `workers` threads.
pub fn sweep(base: &RunConfig, axis: SweepAxis, values: &[f64], workers: usize) -> Result<SweepReport> {
    sweep_with(base, axis, values, workers, sweep_one)
}

/// [`sweep`] with a custom per-run evaluator.
pub fn sweep_with<F>(base: &RunConfig, axis: SweepAxis, values: &[f64], workers: usize, eval: F) -> Result<SweepReport>
where
    F: Fn(&RunConfig) -> Result<RunSummary> + Sync,
{
    if values.is_empty() {
        return Err(Error::config("values", "sweep needs at least one value"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::config("values", "sweep values must be distinct"));
    }
    let configs: Vec<RunConfig> = sorted.iter().map(|&v| axis.apply(base, v)).collect();
    for c in &configs {
        c.validate()?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;
    let results: Vec<Result<RunSummary>> = pool.install(|| configs.par_iter().map(&eval).collect());
    let rows: Vec<SweepRow> = sorted
        .iter()
        .zip(results)
        .map(|(&value, result)| match result {
            Ok(summary) => SweepRow {
                value,
                summary: Some(summary),
                error: None,
            },
            Err(e) => SweepRow {
                value,
                summary: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    if rows.iter().all(|r| r.summary.is_none()) {
        return Err(Error::SweepFailed);
    }
    let rate_exponent = if axis == SweepAxis::Xi12 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter_map(|r| Some((r.value, r.summary.as_ref()?.linear_rate()?)))
            .filter(|(x, y)| *x > 0.0 && *y > 0.0)
            .unzip();
        (xs.len() >= 2).then(|| power_law_exponent(&xs, &ys).ok()).flatten()
    } else {
        None
    };
    let report = SweepReport {
        axis,
        rows,
        rate_exponent,
    };
    if let Some(dir) = &base.output {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_json(&dir.join("sweep.json"), &report)?;
    }
    Ok(report)
}

/// Summaries of saved run directories.
pub fn report(paths: &[PathBuf]) -> Result<Vec<(PathBuf, RunSummary)>> {
    paths
        .iter()
        .map(|p| {
            let dir = run_directory(p);
            let (record, sidecar) = load_record(&dir)?;
            let d_cl = classical_diffusion(&sidecar.config)?.d_cl;
            Ok((dir, summarize(&record, d_cl, &sidecar.config.regimes)?))
        })
        .collect()
}

/// Loads a config file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

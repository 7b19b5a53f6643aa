use serde::{Deserialize, Serialize};

use crate::entanglement::decoherence_ratio;
use crate::evolution::SystemParams;
use crate::grid::GridSpec;
use crate::observables::MarginalDistribution;

/// One scheduled probe row. Disabled probes are `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: u64,
    pub svn: Option<f64>,
    pub slin: Option<f64>,
    pub e1: Option<f64>,
    pub e2: Option<f64>,
    pub dcoh: Option<f64>,
    pub valid: bool,
}

/// Mean energies after every period.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyPoint {
    pub t: u64,
    pub e1: f64,
    pub e2: f64,
}

/// Time series produced by a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub grid: GridSpec,
    pub params: SystemParams,
    pub rows: Vec<Sample>,
    pub energy: Vec<EnergyPoint>,
    /// Husimi-based linear entropy at scheduled times, when probed.
    pub husimi: Vec<(u64, f64)>,
    pub marginals: Vec<MarginalDistribution>,
    /// First time the momentum edge population exceeded its limit.
    pub first_breach: Option<u64>,
    pub complete: bool,
    pub failure: Option<String>,
}

impl RunRecord {
    pub fn new(grid: GridSpec, params: SystemParams) -> Self {
        RunRecord {
            grid,
            params,
            rows: Vec::new(),
            energy: Vec::new(),
            husimi: Vec::new(),
            marginals: Vec::new(),
            first_breach: None,
            complete: true,
            failure: None,
        }
    }

    fn column(&self, f: impl Fn(&Sample) -> Option<f64>) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter_map(|r| f(r).map(|v| (r.t as f64, v)))
            .collect()
    }

    pub fn svn_series(&self) -> Vec<(f64, f64)> {
        self.column(|r| r.svn)
    }

    pub fn slin_series(&self) -> Vec<(f64, f64)> {
        self.column(|r| r.slin)
    }

    /// Dense ⟨E₁⟩(t), one point per period.
    pub fn e1_series(&self) -> Vec<(f64, f64)> {
        self.energy.iter().map(|p| (p.t as f64, p.e1)).collect()
    }

    pub fn e2_series(&self) -> Vec<(f64, f64)> {
        self.energy.iter().map(|p| (p.t as f64, p.e2)).collect()
    }

    /// Initial coherence `𝒟(0)`, taken from a row at `t = 0`.
    pub fn dcoh_initial(&self) -> Option<f64> {
        self.rows.iter().find(|r| r.t == 0).and_then(|r| r.dcoh)
    }

    /// `𝒟(t)/𝒟(0)`; empty when `𝒟(0)` is missing or zero.
    pub fn dcoh_ratio_series(&self) -> Vec<(f64, f64)> {
        let Some(d0) = self.dcoh_initial() else {
            return Vec::new();
        };
        self.rows
            .iter()
            .filter_map(|r| {
                let d = r.dcoh?;
                decoherence_ratio(d0, d).map(|v| (r.t as f64, v))
            })
            .collect()
    }

    /// Last time before the first wrap-around breach, or the final time.
    pub fn valid_until(&self) -> u64 {
        let end = self.energy.last().map_or(0, |p| p.t);
        self.first_breach.map_or(end, |b| b.saturating_sub(1).min(end))
    }
}

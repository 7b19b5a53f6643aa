//! One-period Floquet propagation of the coupled rotors.
//!
//! The per-period operator is `U = (U₁⊗U₂)·U₁₂` with
//! `U_j = exp(−i p_j²/2ħ)·exp(−i K_j cos x_j/ħ)` and
//! `U₁₂ = exp(−i ξ cos(x₁−x₂)/ħ)`. Applied right to left: coupling, kicks
//! (both diagonal in position), then the free rotation (diagonal in momentum).
//! Kicks are instantaneous, so the map is exact per period.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::entanglement::{decoherence, reduced_density, schmidt, slin, svn};
use crate::error::{Error, Result};
use crate::grid::{is_edge_bin, Axis, Basis, Fourier2D, GridSpec, WaveFunction2D, EDGE_POPULATION_LIMIT};
use crate::observables::{husimi_linear_entropy, husimi_momentum, marginal, HusimiLattice};
use crate::record::{EnergyPoint, RunRecord, Sample};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub k1: f64,
    pub k2: f64,
    pub xi12: f64,
    pub hbar_s: f64,
}

impl SystemParams {
    pub fn new(k1: f64, k2: f64, xi12: f64, hbar_s: f64) -> Result<Self> {
        let params = SystemParams { k1, k2, xi12, hbar_s };
        params.validate()?;
        Ok(params)
    }

    /// The coupled pair used throughout: K₁ = 9, K₂ = 10, ħ_s = 1.
    pub fn baseline(xi12: f64) -> Self {
        SystemParams {
            k1: 9.0,
            k2: 10.0,
            xi12,
            hbar_s: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [("k1", self.k1), ("k2", self.k2), ("xi12", self.xi12), ("hbar_s", self.hbar_s)] {
            if !v.is_finite() {
                return Err(Error::config(key, format!("must be finite, got {v}")));
            }
        }
        if self.xi12 < 0.0 {
            return Err(Error::config("xi12", format!("must be >= 0, got {}", self.xi12)));
        }
        if self.hbar_s <= 0.0 {
            return Err(Error::config("hbar_s", format!("must be > 0, got {}", self.hbar_s)));
        }
        Ok(())
    }
}

/// How the `n1 × n2` coupling phase is held in memory.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingStorage {
    #[default]
    Table,
    /// Recompute each row when it is applied. Equal-size grids reuse a
    /// length-N circulant table, since `x_k − x_l` only depends on `k − l`.
    OnTheFly,
}

#[derive(Clone, Debug)]
enum CouplingPhase {
    Table(Vec<Complex64>),
    Circulant(Vec<Complex64>),
    Direct { xi_over_hbar: f64 },
}

/// Unimodular phase factors of the Floquet operator sampled on the grid.
#[derive(Clone, Debug)]
pub struct PhaseTables {
    grid: GridSpec,
    coupling: CouplingPhase,
    pub kick_phase1: Vec<Complex64>,
    pub kick_phase2: Vec<Complex64>,
    /// Indexed by FFT storage order.
    pub free_phase1: Vec<Complex64>,
    pub free_phase2: Vec<Complex64>,
}

fn phase(theta: f64) -> Complex64 {
    Complex64::from_polar(1.0, theta)
}

pub fn build_phase_tables(grid: &GridSpec, params: &SystemParams) -> Result<PhaseTables> {
    build_phase_tables_with(grid, params, CouplingStorage::Table)
}

pub fn build_phase_tables_with(grid: &GridSpec, params: &SystemParams, storage: CouplingStorage) -> Result<PhaseTables> {
    params.validate()?;
    if params.hbar_s != grid.hbar_s() {
        return Err(Error::config(
            "hbar_s",
            format!("system ħ_s = {} differs from grid ħ_s = {}", params.hbar_s, grid.hbar_s()),
        ));
    }
    let hbar = grid.hbar_s();
    let kick = |axis: Axis, k: f64| -> Vec<Complex64> {
        grid.positions(axis)
            .iter()
            .map(|x| phase(-k * x.cos() / hbar))
            .collect()
    };
    let free = |axis: Axis| -> Vec<Complex64> {
        grid.momenta(axis)
            .iter()
            .map(|p| phase(-p * p / (2.0 * hbar)))
            .collect()
    };
    let xi_over_hbar = params.xi12 / hbar;
    let coupling = match storage {
        CouplingStorage::Table => {
            let x1 = grid.positions(Axis::First);
            let x2 = grid.positions(Axis::Second);
            let mut table = Vec::with_capacity(grid.size());
            for a in &x1 {
                table.extend(x2.iter().map(|b| phase(-xi_over_hbar * (a - b).cos())));
            }
            CouplingPhase::Table(table)
        }
        CouplingStorage::OnTheFly if grid.n1() == grid.n2() => {
            let n = grid.n1();
            CouplingPhase::Circulant(
                (0..n)
                    .map(|d| phase(-xi_over_hbar * (TAU * d as f64 / n as f64).cos()))
                    .collect(),
            )
        }
        CouplingStorage::OnTheFly => CouplingPhase::Direct { xi_over_hbar },
    };
    Ok(PhaseTables {
        grid: *grid,
        coupling,
        kick_phase1: kick(Axis::First, params.k1),
        kick_phase2: kick(Axis::Second, params.k2),
        free_phase1: free(Axis::First),
        free_phase2: free(Axis::Second),
    })
}

impl PhaseTables {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// `exp(−i ξ cos(x_k − x_l)/ħ)`.
    pub fn coupling_phase(&self, k: usize, l: usize) -> Complex64 {
        let n2 = self.grid.n2();
        match &self.coupling {
            CouplingPhase::Table(t) => t[k * n2 + l],
            CouplingPhase::Circulant(c) => c[(k + n2 - l) % n2],
            CouplingPhase::Direct { xi_over_hbar } => {
                let dx = self.grid.position(Axis::First, k) - self.grid.position(Axis::Second, l);
                phase(-xi_over_hbar * dx.cos())
            }
        }
    }

    fn fill_coupling_row(&self, k: usize, row: &mut [Complex64]) {
        let n2 = self.grid.n2();
        match &self.coupling {
            CouplingPhase::Table(t) => row.copy_from_slice(&t[k * n2..(k + 1) * n2]),
            _ => row.iter_mut().enumerate().for_each(|(l, z)| *z = self.coupling_phase(k, l)),
        }
    }
}

/// Momentum-space quantities read off in the middle of a step, valid for the
/// post-step state (the free rotation only changes phases).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepDiagnostics {
    pub e1: f64,
    pub e2: f64,
    pub edge: [f64; 2],
}

impl StepDiagnostics {
    pub fn breached(&self) -> bool {
        self.edge[0] > EDGE_POPULATION_LIMIT || self.edge[1] > EDGE_POPULATION_LIMIT
    }
}

/// Reusable propagator: fused phase tables, FFT plans and work buffers.
pub struct Propagator {
    grid: GridSpec,
    /// Coupling × kicks, row-major `n1 × n2`; absent in on-the-fly mode.
    position_phase: Option<Vec<Complex64>>,
    tables: PhaseTables,
    /// Free rotation in transposed `[m2][m1]` layout with the `1/(n1 n2)`
    /// FFT normalization folded in.
    free_phase: Vec<Complex64>,
    p1_sq: Vec<f64>,
    p2_sq: Vec<f64>,
    fourier: Fourier2D,
    work: Vec<Complex64>,
    row: Vec<Complex64>,
}

impl Propagator {
    pub fn new(tables: PhaseTables) -> Self {
        let grid = tables.grid;
        let (n1, n2) = (grid.n1(), grid.n2());
        let position_phase = match &tables.coupling {
            CouplingPhase::Table(t) => {
                let mut fused = t.clone();
                for (k, row) in fused.chunks_exact_mut(n2).enumerate() {
                    let kick1 = tables.kick_phase1[k];
                    row.iter_mut()
                        .zip(&tables.kick_phase2)
                        .for_each(|(z, kick2)| *z *= kick1 * kick2);
                }
                Some(fused)
            }
            _ => None,
        };
        let norm = 1.0 / (n1 * n2) as f64;
        let mut free_phase = Vec::with_capacity(grid.size());
        for f2 in &tables.free_phase2 {
            free_phase.extend(tables.free_phase1.iter().map(|f1| f1 * f2 * norm));
        }
        let sq = |axis| grid.momenta(axis).iter().map(|p| p * p).collect();
        Propagator {
            grid,
            position_phase,
            free_phase,
            p1_sq: sq(Axis::First),
            p2_sq: sq(Axis::Second),
            fourier: Fourier2D::new(&grid),
            work: vec![Complex64::new(0.0, 0.0); grid.size()],
            row: vec![Complex64::new(0.0, 0.0); n2],
            tables,
        }
    }

    pub fn from_params(grid: &GridSpec, params: &SystemParams, storage: CouplingStorage) -> Result<Self> {
        Ok(Propagator::new(build_phase_tables_with(grid, params, storage)?))
    }

    pub fn tables(&self) -> &PhaseTables {
        &self.tables
    }

    /// Applies one period in place. The state must be in the position basis on both axes.
    pub fn step(&mut self, psi: &mut WaveFunction2D) -> Result<StepDiagnostics> {
        if psi.bases() != [Basis::Position; 2] {
            return Err(Error::Basis(format!(
                "step requires the position basis on both axes, got {:?}",
                psi.bases()
            )));
        }
        if *psi.grid() != self.grid {
            return Err(Error::Dimension {
                expected: self.grid.size(),
                actual: psi.grid().size(),
            });
        }
        let (n1, n2) = (self.grid.n1(), self.grid.n2());
        let amps = psi.amplitudes_mut();

        match &self.position_phase {
            Some(fused) => amps.iter_mut().zip(fused).for_each(|(z, f)| *z *= f),
            None => {
                for (k, row) in amps.chunks_exact_mut(n2).enumerate() {
                    self.tables.fill_coupling_row(k, &mut self.row);
                    let kick1 = self.tables.kick_phase1[k];
                    for ((z, c), kick2) in row.iter_mut().zip(&self.row).zip(&self.tables.kick_phase2) {
                        *z *= c * kick1 * kick2;
                    }
                }
            }
        }

        // rows of `amps` run over x2; after the transpose rows of `work` run over x1
        self.fourier.rows(amps, Axis::Second, true);
        transpose::transpose(amps, &mut self.work, n2, n1);
        self.fourier.rows(&mut self.work, Axis::First, true);

        let diagnostics = self.momentum_diagnostics();
        self.work.iter_mut().zip(&self.free_phase).for_each(|(z, f)| *z *= f);

        self.fourier.rows(&mut self.work, Axis::First, false);
        transpose::transpose(&self.work, amps, n1, n2);
        self.fourier.rows(amps, Axis::Second, false);
        Ok(diagnostics)
    }

    /// Energies and edge populations from the unnormalized momentum buffer.
    fn momentum_diagnostics(&self) -> StepDiagnostics {
        let (n1, n2) = (self.grid.n1(), self.grid.n2());
        let norm = 1.0 / (n1 * n2) as f64;
        let (mut e1, mut e2) = (0.0, 0.0);
        let mut edge = [0.0; 2];
        for (j2, row) in self.work.chunks_exact(n1).enumerate() {
            let mut row_sum = 0.0;
            let mut row_e1 = 0.0;
            for (j1, z) in row.iter().enumerate() {
                let prob = z.norm_sqr();
                row_sum += prob;
                row_e1 += prob * self.p1_sq[j1];
                if is_edge_bin(j1, n1) {
                    edge[0] += prob;
                }
            }
            e1 += row_e1;
            e2 += row_sum * self.p2_sq[j2];
            if is_edge_bin(j2, n2) {
                edge[1] += row_sum;
            }
        }
        StepDiagnostics {
            e1: 0.5 * e1 * norm,
            e2: 0.5 * e2 * norm,
            edge: [edge[0] * norm, edge[1] * norm],
        }
    }
}

/// One Floquet period applied to a copy of `psi`.
pub fn step(psi: &WaveFunction2D, tables: &PhaseTables) -> Result<WaveFunction2D> {
    let mut out = psi.clone();
    Propagator::new(tables.clone()).step(&mut out)?;
    Ok(out)
}

/// Sorted, distinct probe times.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSchedule {
    times: Vec<u64>,
}

impl SampleSchedule {
    pub fn new(mut times: Vec<u64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::config("schedule", "sample schedule is empty"));
        }
        times.sort_unstable();
        times.dedup();
        Ok(SampleSchedule { times })
    }

    /// `t = 0` followed by `count` evenly spaced times ending at `t_max`.
    pub fn linear(count: usize, t_max: u64) -> Result<Self> {
        let count = count.max(1) as u64;
        let times = std::iter::once(0)
            .chain((1..=count).map(|i| (i * t_max).div_ceil(count)))
            .collect();
        SampleSchedule::new(times)
    }

    /// `t = 0` followed by `count` logarithmically spaced times in `[1, t_max]`,
    /// rounded to integers and deduplicated.
    pub fn logarithmic(count: usize, t_max: u64) -> Result<Self> {
        let mut times = vec![0];
        if t_max >= 1 {
            let top = (t_max as f64).ln();
            let count = count.max(2);
            times.extend((0..count).map(|i| {
                let t = (top * i as f64 / (count - 1) as f64).exp().round() as u64;
                t.clamp(1, t_max)
            }));
        }
        SampleSchedule::new(times)
    }

    pub fn times(&self) -> &[u64] {
        &self.times
    }

    pub fn last(&self) -> u64 {
        *self.times.last().expect("schedule is never empty")
    }

    pub fn contains(&self, t: u64) -> bool {
        self.times.binary_search(&t).is_ok()
    }
}

/// Which observables to record at scheduled times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSet {
    pub svn: bool,
    pub slin: bool,
    pub energy: bool,
    pub decoherence: bool,
    pub husimi: bool,
    /// Times at which position and momentum marginals of both rotors are stored.
    pub marginal_times: Vec<u64>,
}

impl Default for ProbeSet {
    fn default() -> Self {
        ProbeSet {
            svn: true,
            slin: true,
            energy: true,
            decoherence: true,
            husimi: false,
            marginal_times: Vec::new(),
        }
    }
}

impl ProbeSet {
    pub fn needs_schmidt(&self) -> bool {
        self.svn || self.slin
    }
}

/// A stepping simulation that can be paused, inspected and resumed.
pub struct Simulation {
    propagator: Propagator,
    psi: WaveFunction2D,
    t: u64,
    schedule: SampleSchedule,
    probes: ProbeSet,
    record: RunRecord,
    last_diagnostics: StepDiagnostics,
}

impl Simulation {
    pub fn new(
        psi0: WaveFunction2D,
        params: &SystemParams,
        storage: CouplingStorage,
        schedule: SampleSchedule,
        probes: ProbeSet,
    ) -> Result<Self> {
        let grid = *psi0.grid();
        let propagator = Propagator::from_params(&grid, params, storage)?;
        let psi = psi0.to_position(crate::grid::Axes::Both);
        let momentum = psi.to_momentum(crate::grid::Axes::Both);
        let diagnostics = StepDiagnostics {
            e1: crate::observables::mean_energy(&momentum, Axis::First),
            e2: crate::observables::mean_energy(&momentum, Axis::Second),
            edge: momentum.edge_population(),
        };
        let mut sim = Simulation {
            propagator,
            psi,
            t: 0,
            schedule,
            probes,
            record: RunRecord::new(grid, *params),
            last_diagnostics: diagnostics,
        };
        if diagnostics.breached() {
            sim.record.first_breach = Some(0);
        }
        sim.record.energy.push(EnergyPoint {
            t: 0,
            e1: diagnostics.e1,
            e2: diagnostics.e2,
        });
        sim.probe_if_scheduled()?;
        Ok(sim)
    }

    /// Rebuilds a simulation from a saved state and partial record.
    pub fn resume(
        psi: WaveFunction2D,
        t: u64,
        params: &SystemParams,
        storage: CouplingStorage,
        schedule: SampleSchedule,
        probes: ProbeSet,
        record: RunRecord,
        last_diagnostics: StepDiagnostics,
    ) -> Result<Self> {
        let propagator = Propagator::from_params(psi.grid(), params, storage)?;
        Ok(Simulation {
            propagator,
            psi,
            t,
            schedule,
            probes,
            record,
            last_diagnostics,
        })
    }

    pub fn time(&self) -> u64 {
        self.t
    }

    pub fn state(&self) -> &WaveFunction2D {
        &self.psi
    }

    pub fn record(&self) -> &RunRecord {
        &self.record
    }

    pub fn last_diagnostics(&self) -> StepDiagnostics {
        self.last_diagnostics
    }

    pub fn into_record(self) -> RunRecord {
        self.record
    }

    /// Steps until `t_target`, probing at scheduled times. A probe failure
    /// marks the record incomplete and is returned.
    pub fn advance_to(&mut self, t_target: u64) -> Result<()> {
        while self.t < t_target {
            let diagnostics = self.propagator.step(&mut self.psi)?;
            self.t += 1;
            self.last_diagnostics = diagnostics;
            if diagnostics.breached() && self.record.first_breach.is_none() {
                self.record.first_breach = Some(self.t);
            }
            self.record.energy.push(EnergyPoint {
                t: self.t,
                e1: diagnostics.e1,
                e2: diagnostics.e2,
            });
            self.probe_if_scheduled()?;
        }
        Ok(())
    }

    fn probe_if_scheduled(&mut self) -> Result<()> {
        let t = self.t;
        if self.probes.marginal_times.contains(&t) {
            for axis in [Axis::First, Axis::Second] {
                for basis in [Basis::Position, Basis::Momentum] {
                    self.record.marginals.push(marginal(&self.psi, axis, basis, t));
                }
            }
        }
        if !self.schedule.contains(t) {
            return Ok(());
        }
        match self.sample() {
            Ok(sample) => {
                self.record.rows.push(sample);
                Ok(())
            }
            Err(e) => {
                self.record.complete = false;
                self.record.failure = Some(e.to_string());
                Err(e)
            }
        }
    }

    fn sample(&mut self) -> Result<Sample> {
        let t = self.t;
        let probes = &self.probes;
        let mut sample = Sample {
            t,
            svn: None,
            slin: None,
            e1: None,
            e2: None,
            dcoh: None,
            valid: self.record.first_breach.is_none_or(|b| t < b),
        };
        if probes.needs_schmidt() {
            let spectrum = schmidt(&self.psi)?;
            sample.svn = probes.svn.then(|| svn(&spectrum));
            sample.slin = probes.slin.then(|| slin(&spectrum));
        }
        if probes.energy {
            sample.e1 = Some(self.last_diagnostics.e1);
            sample.e2 = Some(self.last_diagnostics.e2);
        }
        if probes.decoherence || probes.husimi {
            let rho = reduced_density(&self.psi, Basis::Momentum)?;
            if probes.decoherence {
                sample.dcoh = Some(decoherence(&rho)?);
            }
            if probes.husimi {
                let lattice = HusimiLattice::for_spread(self.last_diagnostics.e1, self.psi.grid().hbar_s());
                let sigma = (self.psi.grid().hbar_s() / 2.0).sqrt();
                let h = husimi_momentum(&rho, &lattice, sigma)?;
                self.record.husimi.push((t, husimi_linear_entropy(&h, &lattice, self.psi.grid().hbar_s())));
            }
        }
        Ok(sample)
    }
}

/// Runs `t_max` periods from `psi0`, probing at the scheduled times.
pub fn evolve(
    psi0: &WaveFunction2D,
    params: &SystemParams,
    t_max: u64,
    schedule: &SampleSchedule,
    probes: &ProbeSet,
) -> Result<RunRecord> {
    let mut sim = Simulation::new(
        psi0.clone(),
        params,
        CouplingStorage::Table,
        schedule.clone(),
        probes.clone(),
    )?;
    match sim.advance_to(t_max) {
        Ok(()) => Ok(sim.into_record()),
        Err(e) => {
            let record = sim.into_record();
            Err(Error::Numerical(format!(
                "probe failed at t = {} ({} rows recorded): {e}",
                record.rows.last().map_or(0, |r| r.t),
                record.rows.len()
            )))
        }
    }
}

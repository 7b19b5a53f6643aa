//! Two quantum kicked rotors coupled through `ξ·cos(x₁ − x₂)`.
//!
//! The Floquet map is propagated on a periodic grid with FFTs
//! ([`evolution`]), probed for entanglement ([`entanglement`]), energies,
//! distributions and regimes ([`observables`]), and compared with closed-form
//! predictions ([`theory`]) and the classical coupled standard maps
//! ([`classical`]). [`harness`] wires runs, sweeps and file output together.

pub mod classical;
pub mod entanglement;
pub mod error;
pub mod evolution;
pub mod grid;
pub mod harness;
pub mod observables;
pub mod record;
pub mod theory;

pub use classical::{classical_step, ensemble_energy, lyapunov, ClassicalState, Ensemble};
pub use entanglement::{
    decoherence, decoherence_ratio, reduced_density, schmidt, slin, svn, ReducedDensityMatrix, SchmidtSpectrum,
};
pub use error::{Error, Result};
pub use evolution::{
    build_phase_tables, evolve, step, CouplingStorage, PhaseTables, ProbeSet, Propagator, SampleSchedule,
    Simulation, SystemParams,
};
pub use grid::{
    coherent_state, make_grid, product_state, Axes, Axis, Basis, CoherentStateSpec, GridSpec, WaveFunction2D,
};
pub use observables::{
    detect_regimes, estimate_dq, fit_distribution, fit_timeseries, husimi, husimi_linear_entropy, marginal,
    mean_energy, FitModel, FitReport, MarginalDistribution, RegimeOptions, RegimeReport,
};
pub use record::{RunRecord, Sample};
pub use theory::{crossover_time, TheoryInputs};

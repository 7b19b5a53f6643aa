//! Benchmark fixtures.

use ckr_core::{
    coherent_state, make_grid, product_state, Axis, CoherentStateSpec, CouplingStorage, Propagator, Result,
    SystemParams, WaveFunction2D,
};

/// Baseline product coherent state on an `n × n` grid, evolved for `warmup`
/// periods so the spectra being timed are not trivially rank one.
pub fn fixture(n: usize, xi12: f64, warmup: u64, storage: CouplingStorage) -> Result<(Propagator, WaveFunction2D)> {
    let params = SystemParams::baseline(xi12);
    let grid = make_grid(n, n, params.hbar_s)?;
    let spec = CoherentStateSpec::default_for(params.hbar_s);
    let psi1 = coherent_state(&grid, Axis::First, &spec)?;
    let psi2 = coherent_state(&grid, Axis::Second, &spec)?;
    let mut psi = product_state(&grid, &psi1, &psi2)?;
    let mut propagator = Propagator::from_params(&grid, &params, storage)?;
    for _ in 0..warmup {
        propagator.step(&mut psi)?;
    }
    Ok((propagator, psi))
}

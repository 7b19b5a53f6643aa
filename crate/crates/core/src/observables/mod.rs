//! Physical probes of the evolved state: energies, marginals, fits,
//! Husimi function and regime detection.

mod fit;
mod husimi;
mod regimes;

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::grid::{Axes, Axis, Basis, WaveFunction2D};

pub use fit::{fit_distribution, fit_timeseries, linear_fit, FitModel, FitReport, LineFit};
pub use husimi::{husimi, husimi_linear_entropy, husimi_momentum, husimi_norm, Husimi, HusimiLattice};
pub use regimes::{
    detect_regimes, estimate_dq, moving_median, DqEstimate, RegimeOptions, RegimeReport, WindowDiagnostic,
};

/// Probability distribution of one rotor in one basis.
///
/// Position values follow `x_k = 2πk/N`; momentum values are in ascending
/// lattice order `m = −N/2 .. N/2−1`, matching [`coordinates`](Self::coordinates).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalDistribution {
    pub axis: Axis,
    pub basis: Basis,
    pub time: u64,
    pub hbar_s: f64,
    pub values: Vec<f64>,
}

impl MarginalDistribution {
    pub fn coordinates(&self) -> Vec<f64> {
        let n = self.values.len();
        match self.basis {
            Basis::Position => (0..n).map(|k| TAU * k as f64 / n as f64).collect(),
            Basis::Momentum => {
                let half = (n / 2) as i64;
                (-half..half).map(|m| self.hbar_s * m as f64).collect()
            }
        }
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Largest deviation from the uniform value `1/N`.
    pub fn max_uniform_deviation(&self) -> f64 {
        let uniform = 1.0 / self.values.len() as f64;
        self.values
            .iter()
            .map(|v| (v - uniform).abs())
            .fold(0.0, f64::max)
    }

    /// Mean of the coordinate; circular for positions.
    pub fn mean(&self) -> f64 {
        let coords = self.coordinates();
        match self.basis {
            Basis::Position => circular_mean(&coords, &self.values),
            Basis::Momentum => coords.iter().zip(&self.values).map(|(p, w)| p * w).sum(),
        }
    }

    /// Standard deviation; circular (`√(−2 ln R)`) for positions.
    pub fn std_dev(&self) -> f64 {
        let coords = self.coordinates();
        match self.basis {
            Basis::Position => circular_std(&coords, &self.values),
            Basis::Momentum => {
                let mean = self.mean();
                coords
                    .iter()
                    .zip(&self.values)
                    .map(|(p, w)| w * (p - mean).powi(2))
                    .sum::<f64>()
                    .sqrt()
            }
        }
    }
}

fn resultant(angles: &[f64], weights: &[f64]) -> (f64, f64) {
    angles
        .iter()
        .zip(weights)
        .fold((0.0, 0.0), |(c, s), (x, w)| (c + w * x.cos(), s + w * x.sin()))
}

/// Weighted circular mean in `[0, 2π)`.
pub fn circular_mean(angles: &[f64], weights: &[f64]) -> f64 {
    let (c, s) = resultant(angles, weights);
    s.atan2(c).rem_euclid(TAU)
}

/// Weighted circular standard deviation `√(−2 ln R)`.
pub fn circular_std(angles: &[f64], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    let (c, s) = resultant(angles, weights);
    let r = (c * c + s * s).sqrt() / total;
    (-2.0 * r.ln()).max(0.0).sqrt()
}

/// Row or column sums of `|Ψ|²` with the chosen axis in the chosen basis.
pub fn marginal(psi: &WaveFunction2D, axis: Axis, basis: Basis, time: u64) -> MarginalDistribution {
    let transformed;
    let psi = if psi.basis(axis) == basis {
        psi
    } else {
        transformed = match basis {
            Basis::Position => psi.to_position(Axes::from(axis)),
            Basis::Momentum => psi.to_momentum(Axes::from(axis)),
        };
        &transformed
    };
    let grid = *psi.grid();
    let n2 = grid.n2();
    let mut storage = vec![0.0; grid.len(axis)];
    for (k1, row) in psi.amplitudes().chunks_exact(n2).enumerate() {
        match axis {
            Axis::First => storage[k1] = row.iter().map(|z| z.norm_sqr()).sum(),
            Axis::Second => storage.iter_mut().zip(row).for_each(|(s, z)| *s += z.norm_sqr()),
        }
    }
    let values = match basis {
        Basis::Position => storage,
        Basis::Momentum => {
            let half = (grid.len(axis) / 2) as i64;
            (-half..half)
                .map(|m| storage[grid.momentum_storage(axis, m).expect("lattice label on grid")])
                .collect()
        }
    };
    MarginalDistribution {
        axis,
        basis,
        time,
        hbar_s: grid.hbar_s(),
        values,
    }
}

/// `⟨p²/2⟩` of the chosen rotor.
pub fn mean_energy(psi: &WaveFunction2D, axis: Axis) -> f64 {
    let f = marginal(psi, axis, Basis::Momentum, 0);
    f.coordinates()
        .iter()
        .zip(&f.values)
        .map(|(p, w)| 0.5 * p * p * w)
        .sum()
}

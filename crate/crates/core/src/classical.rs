//! Classical coupled standard maps on the cylinder.
//!
//! Kick then drift, mirroring the quantum operator order:
//! `p₁′ = p₁ + K₁ sin x₁ + ξ sin(x₁−x₂)`, `p₂′ = p₂ + K₂ sin x₂ − ξ sin(x₁−x₂)`,
//! `x_j′ = x_j + p_j′ (mod 2π)`. The kick force is `−∂V/∂x` for
//! `V = K₁ cos x₁ + K₂ cos x₂ + ξ cos(x₁−x₂)`.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::SystemParams;
use crate::observables::linear_fit;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalState {
    pub x1: f64,
    pub x2: f64,
    pub p1: f64,
    pub p2: f64,
}

pub fn classical_step(s: &ClassicalState, params: &SystemParams) -> ClassicalState {
    let coupling = params.xi12 * (s.x1 - s.x2).sin();
    let p1 = s.p1 + params.k1 * s.x1.sin() + coupling;
    let p2 = s.p2 + params.k2 * s.x2.sin() - coupling;
    ClassicalState {
        x1: (s.x1 + p1).rem_euclid(TAU),
        x2: (s.x2 + p2).rem_euclid(TAU),
        p1,
        p2,
    }
}

/// Tangent vector `(dx1, dx2, dp1, dp2)` pushed through the step at `s`.
pub fn tangent_step(s: &ClassicalState, params: &SystemParams, v: [f64; 4]) -> [f64; 4] {
    let [dx1, dx2, dp1, dp2] = v;
    let c = params.xi12 * (s.x1 - s.x2).cos();
    let dp1n = dp1 + (params.k1 * s.x1.cos() + c) * dx1 - c * dx2;
    let dp2n = dp2 - c * dx1 + (params.k2 * s.x2.cos() + c) * dx2;
    [dx1 + dp1n, dx2 + dp2n, dp1n, dp2n]
}

/// Independent trajectories with per-index random streams.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    pub states: Vec<ClassicalState>,
    pub rng_seed: u64,
}

fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

impl Ensemble {
    /// Positions uniform on the torus, zero momenta.
    pub fn uniform(size: usize, seed: u64) -> Self {
        let states = (0..size as u64)
            .map(|i| {
                let mut rng = stream(seed, i);
                ClassicalState {
                    x1: rng.random::<f64>() * TAU,
                    x2: rng.random::<f64>() * TAU,
                    p1: 0.0,
                    p2: 0.0,
                }
            })
            .collect();
        Ensemble { states, rng_seed: seed }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Mean energy of rotor 1 per period and the fitted diffusion rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleEnergy {
    /// `⟨p₁²/2⟩` at `t = 0..=t_max`.
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
    /// Slope of `⟨E₁⟩(t)` over `t ∈ [1, t_max]`.
    pub d_cl: f64,
    pub d_cl_std_error: f64,
}

pub fn ensemble_energy(ensemble: &Ensemble, params: &SystemParams, t_max: usize) -> Result<EnsembleEnergy> {
    if ensemble.is_empty() {
        return Err(Error::InsufficientData { needed: 1, available: 0 });
    }
    if t_max < 2 {
        return Err(Error::config("t_max", "need at least two periods to fit a slope"));
    }
    let n = ensemble.len() as f64;
    let mut states = ensemble.states.clone();
    let mut e1 = Vec::with_capacity(t_max + 1);
    let mut e2 = Vec::with_capacity(t_max + 1);
    let mut record = |states: &[ClassicalState]| {
        e1.push(states.iter().map(|s| 0.5 * s.p1 * s.p1).sum::<f64>() / n);
        e2.push(states.iter().map(|s| 0.5 * s.p2 * s.p2).sum::<f64>() / n);
    };
    record(&states);
    for _ in 0..t_max {
        states.iter_mut().for_each(|s| *s = classical_step(s, params));
        record(&states);
    }
    let ts: Vec<f64> = (1..=t_max).map(|t| t as f64).collect();
    let fit = linear_fit(&ts, &e1[1..])?;
    Ok(EnsembleEnergy {
        e1,
        e2,
        d_cl: fit.slope,
        d_cl_std_error: fit.slope_std_error,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub exponent: f64,
    /// Standard error over samples.
    pub std_error: f64,
    /// False when the running average moved by more than 5% over the second half.
    pub converged: bool,
    pub per_sample: Vec<f64>,
}

/// Largest Lyapunov exponent of the four-dimensional map by tangent-vector
/// renormalization, averaged over `n_samples` random initial conditions.
pub fn lyapunov(params: &SystemParams, t_max: usize, n_samples: usize, seed: u64) -> Result<LyapunovEstimate> {
    if t_max < 10_000 {
        return Err(Error::config("t_max", format!("need at least 10^4 periods, got {t_max}")));
    }
    if n_samples < 10 {
        return Err(Error::config("n_samples", format!("need at least 10 samples, got {n_samples}")));
    }
    let mut per_sample = Vec::with_capacity(n_samples);
    let mut converged = true;
    for i in 0..n_samples as u64 {
        let mut rng = stream(seed, i);
        let mut s = ClassicalState {
            x1: rng.random::<f64>() * TAU,
            x2: rng.random::<f64>() * TAU,
            p1: rng.random::<f64>() * TAU,
            p2: rng.random::<f64>() * TAU,
        };
        let mut v = [1.0, 1.0, 1.0, 1.0].map(|c: f64| c / 2.0);
        let mut log_sum = 0.0;
        let mut midpoint = 0.0;
        for t in 1..=t_max {
            v = tangent_step(&s, params, v);
            s = classical_step(&s, params);
            let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            log_sum += norm.ln();
            v.iter_mut().for_each(|c| *c /= norm);
            if t == t_max / 2 {
                midpoint = log_sum / t as f64;
            }
        }
        let exponent = log_sum / t_max as f64;
        let scale = exponent.abs().max(1e-3);
        if (exponent - midpoint).abs() > 0.05 * scale {
            converged = false;
        }
        per_sample.push(exponent);
    }
    let n = per_sample.len() as f64;
    let mean = per_sample.iter().sum::<f64>() / n;
    let var = per_sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(LyapunovEstimate {
        exponent: mean,
        std_error: (var / n).sqrt(),
        converged,
        per_sample,
    })
}

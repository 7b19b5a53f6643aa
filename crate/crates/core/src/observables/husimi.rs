//! Coherent-state (Husimi) representation of the reduced state of rotor 1.
//!
//! The coherent state centred at `(x, p)` has momentum components
//! `α_m ∝ exp(−σ²(m − p/ħ)²)·exp(−i m x)`, the exact Fourier series of the
//! periodized Gaussian built by [`crate::grid::coherent_state`]. Only bins
//! where the Gaussian weight exceeds `1e-16` enter, so each lattice point costs
//! a few hundred operations regardless of the grid size.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::entanglement::ReducedDensityMatrix;
use crate::error::{Error, Result};
use crate::grid::Basis;

/// Midpoint lattice in phase space, `x ∈ [0, 2π)` and `p ∈ [p_min, p_max]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HusimiLattice {
    pub xs: Vec<f64>,
    pub ps: Vec<f64>,
    pub dx: f64,
    pub dp: f64,
}

impl HusimiLattice {
    pub fn new(nx: usize, np: usize, p_min: f64, p_max: f64) -> Self {
        let dx = TAU / nx as f64;
        let dp = (p_max - p_min) / np as f64;
        HusimiLattice {
            xs: (0..nx).map(|i| (i as f64 + 0.5) * dx).collect(),
            ps: (0..np).map(|j| p_min + (j as f64 + 0.5) * dp).collect(),
            dx,
            dp,
        }
    }

    /// Default 64×64 lattice covering four standard deviations of a
    /// zero-mean momentum distribution with mean energy `energy`.
    pub fn for_spread(energy: f64, hbar_s: f64) -> Self {
        let p_max = 4.0 * (2.0 * energy.max(0.0) + hbar_s).sqrt();
        HusimiLattice::new(64, 64, -p_max, p_max)
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dp
    }
}

/// Husimi values, `values[ix * ps.len() + ip]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Husimi {
    pub values: Vec<f64>,
    pub nx: usize,
    pub np: usize,
}

impl Husimi {
    pub fn at(&self, ix: usize, ip: usize) -> f64 {
        self.values[ix * self.np + ip]
    }

    /// Lattice indices of the largest value.
    pub fn argmax(&self) -> (usize, usize) {
        let i = self
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map_or(0, |(i, _)| i);
        (i / self.np, i % self.np)
    }

    /// Profile in `p` after integrating over `x`, normalized so that
    /// `Σ_p profile·dp = 1` when `H` itself is normalized.
    pub fn momentum_profile(&self, lattice: &HusimiLattice, hbar_s: f64) -> Vec<f64> {
        (0..self.np)
            .map(|ip| (0..self.nx).map(|ix| self.at(ix, ip)).sum::<f64>() * lattice.dx / (TAU * hbar_s))
            .collect()
    }
}

fn momentum_rho(rho: &ReducedDensityMatrix) -> Result<ReducedDensityMatrix> {
    if rho.basis() == Basis::Momentum {
        return Ok(rho.clone());
    }
    // ρ̃ = F ρ F† with F the unitary forward DFT: inverse transform along
    // rows gives ρF†, then a forward transform along columns applies F
    let n = rho.dim();
    let mut planner = rustfft::FftPlanner::new();
    let mut rows = rho.entries().to_vec();
    planner.plan_fft_inverse(n).process(&mut rows);
    let mut columns = vec![Complex64::new(0.0, 0.0); n * n];
    transpose::transpose(&rows, &mut columns, n, n);
    planner.plan_fft_forward(n).process(&mut columns);
    transpose::transpose(&columns, &mut rows, n, n);
    let scale = 1.0 / n as f64;
    rows.iter_mut().for_each(|z| *z *= scale);
    ReducedDensityMatrix::from_entries(n, Basis::Momentum, rho.hbar_s(), rows)
}

/// `H(x, p) = ⟨α_{x,p}|ρ₁|α_{x,p}⟩` on a lattice, for a reduced density matrix in either basis.
pub fn husimi(rho: &ReducedDensityMatrix, lattice: &HusimiLattice, sigma: f64) -> Result<Husimi> {
    husimi_momentum(&momentum_rho(rho)?, lattice, sigma)
}

/// [`husimi`] for a momentum-basis `ρ₁`.
pub fn husimi_momentum(rho: &ReducedDensityMatrix, lattice: &HusimiLattice, sigma: f64) -> Result<Husimi> {
    if rho.basis() != Basis::Momentum {
        return Err(Error::Basis("husimi_momentum expects a momentum-basis density matrix".into()));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::config("sigma", format!("must be positive, got {sigma}")));
    }
    let n = rho.dim();
    let hbar = rho.hbar_s();
    let half = (n / 2) as i64;
    // exp(−σ²Δ²) < 1e-16
    let reach = (36.8f64.sqrt() / sigma).ceil() as i64;
    let storage = |m: i64| m.rem_euclid(n as i64) as usize;

    let nx = lattice.xs.len();
    let np = lattice.ps.len();
    let mut values = vec![0.0; nx * np];
    let mut weights = Vec::new();
    let mut window = Vec::new();
    let mut local = Vec::new();
    let mut v = Vec::new();
    for (ip, &p) in lattice.ps.iter().enumerate() {
        let centre = p / hbar;
        let lo = ((centre.floor() as i64) - reach).max(-half);
        let hi = ((centre.ceil() as i64) + reach).min(half - 1);
        window.clear();
        weights.clear();
        for m in lo..=hi {
            let w = (-sigma * sigma * (m as f64 - centre).powi(2)).exp();
            window.push(m);
            weights.push(w);
        }
        let norm: f64 = weights.iter().map(|w| w * w).sum::<f64>();
        if window.is_empty() || norm == 0.0 {
            continue;
        }
        let scale = 1.0 / norm.sqrt();
        weights.iter_mut().for_each(|w| *w *= scale);
        let size = window.len();
        local.clear();
        for &mi in &window {
            let row = storage(mi) * n;
            local.extend(window.iter().map(|&mj| rho.entries()[row + storage(mj)]));
        }
        for (ix, &x) in lattice.xs.iter().enumerate() {
            v.clear();
            v.extend(
                window
                    .iter()
                    .zip(&weights)
                    .map(|(&m, &w)| Complex64::from_polar(w, -(m as f64) * x)),
            );
            let mut h = Complex64::new(0.0, 0.0);
            for i in 0..size {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..size {
                    acc += local[i * size + j] * v[j];
                }
                h += v[i].conj() * acc;
            }
            values[ix * np + ip] = h.re.max(0.0);
        }
    }
    Ok(Husimi { values, nx, np })
}

/// `∫ H dx dp / 2πħ` by the midpoint rule.
pub fn husimi_norm(h: &Husimi, lattice: &HusimiLattice, hbar_s: f64) -> f64 {
    h.values.iter().sum::<f64>() * lattice.cell_area() / (TAU * hbar_s)
}

/// `1 − ∫ H² dx dp / 2πħ` by the midpoint rule.
pub fn husimi_linear_entropy(h: &Husimi, lattice: &HusimiLattice, hbar_s: f64) -> f64 {
    1.0 - h.values.iter().map(|v| v * v).sum::<f64>() * lattice.cell_area() / (TAU * hbar_s)
}

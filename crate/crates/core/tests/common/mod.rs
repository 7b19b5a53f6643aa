//! Independent reference constructions shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

use ckr_core::entanglement::ReducedDensityMatrix;
use ckr_core::{make_grid, Axis, Basis, GridSpec, SystemParams};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn phase(theta: f64) -> Complex64 {
    Complex64::from_polar(1.0, theta)
}

/// Free rotation of one rotor as a dense matrix in the position basis,
/// summed directly over the momentum lattice `m = −N/2 .. N/2−1`.
fn free_matrix(n: usize, hbar: f64) -> DMatrix<Complex64> {
    let half = (n / 2) as i64;
    DMatrix::from_fn(n, n, |k, l| {
        let dx = TAU * (k as f64 - l as f64) / n as f64;
        (-half..half)
            .map(|m| {
                let m = m as f64;
                phase(m * dx - hbar * m * m / 2.0)
            })
            .sum::<Complex64>()
            / n as f64
    })
}

/// Full one-period unitary on the `n1·n2` product space, row-major `[k1][k2]` indexing.
pub fn dense_floquet(grid: &GridSpec, params: &SystemParams) -> DMatrix<Complex64> {
    let (n1, n2) = (grid.n1(), grid.n2());
    let hbar = grid.hbar_s();
    let f1 = free_matrix(n1, hbar);
    let f2 = free_matrix(n2, hbar);
    let free = f1.kronecker(&f2);
    let dim = n1 * n2;
    let diagonal = DMatrix::from_fn(dim, dim, |i, j| {
        if i != j {
            return Complex64::new(0.0, 0.0);
        }
        let x1 = TAU * (i / n2) as f64 / n1 as f64;
        let x2 = TAU * (i % n2) as f64 / n2 as f64;
        let v = params.k1 * x1.cos() + params.k2 * x2.cos() + params.xi12 * (x1 - x2).cos();
        phase(-v / hbar)
    });
    free * diagonal
}

/// Reduced density matrix of rotor 1 by an explicit partial trace, then its eigenvalues.
pub fn partial_trace_spectrum(amplitudes: &[Complex64], n1: usize, n2: usize) -> Vec<f64> {
    let rho = DMatrix::from_fn(n1, n1, |i, j| {
        (0..n2)
            .map(|l| amplitudes[i * n2 + l] * amplitudes[j * n2 + l].conj())
            .sum::<Complex64>()
    });
    rho.symmetric_eigen().eigenvalues.iter().copied().collect()
}

pub fn entropies(probabilities: &[f64]) -> (f64, f64) {
    let svn = -probabilities
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>();
    let slin = 1.0 - probabilities.iter().map(|p| p * p).sum::<f64>();
    (svn, slin)
}

pub fn random_amplitudes(len: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<Complex64> = (0..len)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let norm = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    raw.into_iter().map(|z| z / norm).collect()
}

/// Larger root of `a·t − 1 + b/√t` where the linear and saturating entropy
/// forms cross, found by bisection on a bracket around the minimum.
pub fn crossing_by_bisection(xi12: f64, hbar_s: f64, d_q: f64) -> Option<f64> {
    let a = xi12 * xi12 / (hbar_s * hbar_s);
    let b = hbar_s / (4.0 * PI * d_q).sqrt();
    let f = |t: f64| a * t - 1.0 + b / t.sqrt();
    // f is convex with its minimum at t = (b/2a)^{2/3}
    let t_min = (b / (2.0 * a)).powf(2.0 / 3.0);
    if f(t_min) > 0.0 {
        return None;
    }
    let (mut lo, mut hi) = (t_min, t_min.max(1.0));
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Single kicked rotor with dense DFT sums, returning `⟨p²/2⟩` after each period.
pub fn single_rotor_energies(psi0: &[Complex64], k: f64, hbar: f64, steps: usize) -> Vec<f64> {
    let n = psi0.len();
    let half = (n / 2) as i64;
    let mut psi = psi0.to_vec();
    let mut energies = Vec::with_capacity(steps);
    for _ in 0..steps {
        for (j, z) in psi.iter_mut().enumerate() {
            *z *= phase(-k * (TAU * j as f64 / n as f64).cos() / hbar);
        }
        let coefficients: Vec<(f64, Complex64)> = (-half..half)
            .map(|m| {
                let c = psi
                    .iter()
                    .enumerate()
                    .map(|(j, z)| z * phase(-TAU * (m * j as i64) as f64 / n as f64))
                    .sum::<Complex64>()
                    / (n as f64).sqrt();
                (hbar * m as f64, c)
            })
            .collect();
        energies.push(coefficients.iter().map(|(p, c)| 0.5 * p * p * c.norm_sqr()).sum());
        psi = (0..n)
            .map(|j| {
                coefficients
                    .iter()
                    .map(|(p, c)| {
                        let m = p / hbar;
                        c * phase(-p * p / (2.0 * hbar) + TAU * m * j as f64 / n as f64)
                    })
                    .sum::<Complex64>()
                    / (n as f64).sqrt()
            })
            .collect();
    }
    energies
}

/// Determinant of a 4×4 matrix by cofactor expansion over 2×2 minors.
pub fn det4(m: [[f64; 4]; 4]) -> f64 {
    let s0 = m[0][0] * m[1][1] - m[1][0] * m[0][1];
    let s1 = m[0][0] * m[1][2] - m[1][0] * m[0][2];
    let s2 = m[0][0] * m[1][3] - m[1][0] * m[0][3];
    let s3 = m[0][1] * m[1][2] - m[1][1] * m[0][2];
    let s4 = m[0][1] * m[1][3] - m[1][1] * m[0][3];
    let s5 = m[0][2] * m[1][3] - m[1][2] * m[0][3];
    let c5 = m[2][2] * m[3][3] - m[3][2] * m[2][3];
    let c4 = m[2][1] * m[3][3] - m[3][1] * m[2][3];
    let c3 = m[2][1] * m[3][2] - m[3][1] * m[2][2];
    let c2 = m[2][0] * m[3][3] - m[3][0] * m[2][3];
    let c1 = m[2][0] * m[3][2] - m[3][0] * m[2][2];
    let c0 = m[2][0] * m[3][1] - m[3][0] * m[2][1];
    s0 * c5 - s1 * c4 + s2 * c3 + s3 * c2 - s4 * c1 + s5 * c0
}

/// Momentum-diagonal `ρ₁` with a Gaussian profile of variance `D t`.
pub fn gaussian_rho(n: usize, variance: f64) -> ReducedDensityMatrix {
    let grid = make_grid(n, n, 1.0).unwrap();
    let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
    let weights: Vec<f64> = (0..n)
        .map(|j| (-grid.momentum(Axis::First, j).powi(2) / (2.0 * variance)).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    for (j, w) in weights.iter().enumerate() {
        entries[j * n + j] = Complex64::new(w / total, 0.0);
    }
    ReducedDensityMatrix::from_entries(n, Basis::Momentum, 1.0, entries).unwrap()
}


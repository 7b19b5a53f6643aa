//! Bipartite entanglement of the pure two-rotor state.
//!
//! The Schmidt probabilities are the squared singular values of the
//! `n1 × n2` amplitude matrix; the full `ρ = |Ψ⟩⟨Ψ|` is never formed.

use faer::{Mat, MatRef};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Axes, Axis, Basis, WaveFunction2D};

/// Eigenvalues below zero but above this are treated as rounding noise.
pub const NEGATIVE_CLIP: f64 = -1e-12;

const SUM_TOLERANCE: f64 = 1e-10;

/// Descending Schmidt probabilities, summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct SchmidtSpectrum {
    probabilities: Vec<f64>,
}

impl SchmidtSpectrum {
    /// Validates, clips rounding negatives and sorts descending.
    pub fn new(mut probabilities: Vec<f64>) -> Result<Self> {
        for (i, p) in probabilities.iter_mut().enumerate() {
            if !p.is_finite() || *p < NEGATIVE_CLIP {
                return Err(Error::Numerical(format!("Schmidt probability {i} is {p}")));
            }
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Numerical(format!(
                "Schmidt probabilities sum to {total}; the state is not normalized"
            )));
        }
        probabilities.sort_by(|a, b| b.total_cmp(a));
        Ok(SchmidtSpectrum { probabilities })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Number of probabilities above `tol`.
    pub fn rank(&self, tol: f64) -> usize {
        self.probabilities.iter().take_while(|&&p| p > tol).count()
    }
}

fn amplitude_matrix(psi: &WaveFunction2D) -> MatRef<'_, Complex64> {
    let grid = psi.grid();
    MatRef::from_row_major_slice(psi.amplitudes(), grid.n1(), grid.n2())
}

/// Schmidt spectrum of `psi` in whatever bases its axes are in.
pub fn schmidt(psi: &WaveFunction2D) -> Result<SchmidtSpectrum> {
    let a = amplitude_matrix(psi);
    let singular = a.singular_values().map_err(|e| {
        let largest = psi.amplitudes().iter().map(|z| z.norm()).fold(0.0, f64::max);
        Error::Numerical(format!(
            "singular value decomposition failed ({e:?}); norm² = {:.3e}, largest |amplitude| = {largest:.3e}",
            psi.norm_sqr()
        ))
    })?;
    SchmidtSpectrum::new(singular.into_iter().map(|s| s * s).collect())
}

/// Von Neumann entropy in nats, with `0 ln 0 = 0`.
pub fn svn(spectrum: &SchmidtSpectrum) -> f64 {
    -spectrum
        .probabilities
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
}

/// Linear entropy `1 − Σλ²` (one minus purity).
pub fn slin(spectrum: &SchmidtSpectrum) -> f64 {
    1.0 - spectrum.probabilities.iter().map(|p| p * p).sum::<f64>()
}

/// Reduced density matrix of rotor 1.
#[derive(Clone, Debug)]
pub struct ReducedDensityMatrix {
    n: usize,
    basis: Basis,
    hbar_s: f64,
    entries: Vec<Complex64>,
}

impl ReducedDensityMatrix {
    /// Row-major `n × n` entries; checked for Hermiticity and unit trace.
    /// Momentum-basis entries are in FFT storage order.
    pub fn from_entries(n: usize, basis: Basis, hbar_s: f64, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::Dimension {
                expected: n * n,
                actual: entries.len(),
            });
        }
        let rho = ReducedDensityMatrix {
            n,
            basis,
            hbar_s,
            entries,
        };
        let trace = rho.trace();
        if (trace.re - 1.0).abs() > SUM_TOLERANCE || trace.im.abs() > SUM_TOLERANCE {
            return Err(Error::Numerical(format!("reduced density matrix has trace {trace}")));
        }
        for i in 0..n {
            for j in 0..i {
                if (rho.get(i, j) - rho.get(j, i).conj()).norm() > 1e-12 {
                    return Err(Error::Numerical(format!("reduced density matrix is not Hermitian at ({i}, {j})")));
                }
            }
        }
        Ok(rho)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn hbar_s(&self) -> f64 {
        self.hbar_s
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.n + j]
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// `Tr ρ²`, equal to `Σ|ρ_ij|²` for a Hermitian matrix.
    pub fn purity(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// `ρ₁[k, k′] = Σ_l Ψ[k, l]·conj(Ψ[k′, l])` with axis 1 in the requested basis.
pub fn reduced_density(psi: &WaveFunction2D, basis: Basis) -> Result<ReducedDensityMatrix> {
    let transformed;
    let psi = if psi.basis(Axis::First) == basis {
        psi
    } else {
        transformed = match basis {
            Basis::Momentum => psi.to_momentum(Axes::First),
            Basis::Position => psi.to_position(Axes::First),
        };
        &transformed
    };
    let a = amplitude_matrix(psi);
    let rho: Mat<Complex64> = a * a.adjoint();
    let n = rho.nrows();
    let mut entries = Vec::with_capacity(n * n);
    for i in 0..n {
        entries.extend((0..n).map(|j| rho[(i, j)]));
    }
    // enforce exact Hermiticity; the product is Hermitian only up to rounding
    for i in 0..n {
        entries[i * n + i].im = 0.0;
        for j in 0..i {
            let avg = 0.5 * (entries[i * n + j] + entries[j * n + i].conj());
            entries[i * n + j] = avg;
            entries[j * n + i] = avg.conj();
        }
    }
    ReducedDensityMatrix::from_entries(n, basis, psi.grid().hbar_s(), entries)
}

/// Summed magnitude of off-diagonal elements, `Σ_{i≠j} |ρ₁[i, j]|`, in the momentum basis.
pub fn decoherence(rho: &ReducedDensityMatrix) -> Result<f64> {
    if rho.basis() != Basis::Momentum {
        return Err(Error::Basis("decoherence is measured in the momentum basis".into()));
    }
    let n = rho.dim();
    let total: f64 = rho.entries.iter().map(|z| z.norm()).sum();
    let diagonal: f64 = (0..n).map(|i| rho.get(i, i).norm()).sum();
    Ok(total - diagonal)
}

/// `𝒟(t)/𝒟(0)`, or `None` when the initial coherence vanishes.
pub fn decoherence_ratio(initial: f64, value: f64) -> Option<f64> {
    (initial > 0.0).then(|| value / initial)
}

//! Discretized two-rotor Hilbert space.
//!
//! Each rotor lives on a cylinder: position is an angle sampled at
//! `x_k = 2πk/N`, momentum is quantized as `p_m = ħ_s·m` with
//! `m ∈ [−N/2, N/2)`. Amplitudes are stored row-major with rotor 1 on the
//! rows, so `amplitudes[k1 * n2 + k2]`. Momentum-basis amplitudes use FFT
//! ordering (`m = j` for `j < N/2`, `m = j − N` otherwise); use
//! [`GridSpec::momentum_index`] to map a storage index to its lattice label.
//!
//! Both bases use the unitary DFT (`1/√N` per axis), so `Σ|ψ|² = 1` holds in
//! either basis.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of momentum bins at each end of an axis watched for wrap-around.
pub const EDGE_BINS: usize = 2;

/// Edge population above which a state is considered to have wrapped
/// around the periodic momentum grid.
pub const EDGE_POPULATION_LIMIT: f64 = 1e-8;

/// Largest norm fraction a coherent state may carry in its non-primary
/// periodic images before it is rejected as too wide for the cell.
pub const MAX_WINDING_OVERLAP: f64 = 1e-2;

const SMALLEST_GRID: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    First,
    Second,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::First => 0,
            Axis::Second => 1,
        }
    }

    pub fn from_rotor(rotor: usize) -> Result<Self> {
        match rotor {
            1 => Ok(Axis::First),
            2 => Ok(Axis::Second),
            _ => Err(Error::config("rotor", format!("rotor must be 1 or 2, got {rotor}"))),
        }
    }
}

/// Selection of axes for a basis transform.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axes {
    First,
    Second,
    Both,
}

impl Axes {
    fn contains(self, axis: Axis) -> bool {
        matches!(
            (self, axis),
            (Axes::Both, _) | (Axes::First, Axis::First) | (Axes::Second, Axis::Second)
        )
    }
}

impl From<Axis> for Axes {
    fn from(axis: Axis) -> Self {
        match axis {
            Axis::First => Axes::First,
            Axis::Second => Axes::Second,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    Position,
    Momentum,
}

/// Discretization of the two-rotor phase space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    n1: usize,
    n2: usize,
    hbar_s: f64,
}

/// Builds a grid; both sizes must be powers of two no smaller than 16.
pub fn make_grid(n1: usize, n2: usize, hbar_s: f64) -> Result<GridSpec> {
    GridSpec::new(n1, n2, hbar_s)
}

impl GridSpec {
    pub fn new(n1: usize, n2: usize, hbar_s: f64) -> Result<Self> {
        for (key, n) in [("n1", n1), ("n2", n2)] {
            if !n.is_power_of_two() || n < SMALLEST_GRID {
                return Err(Error::config(
                    key,
                    format!("grid size must be a power of two >= {SMALLEST_GRID}, got {n}"),
                ));
            }
        }
        if !(hbar_s.is_finite() && hbar_s > 0.0) {
            return Err(Error::config("hbar_s", format!("must be positive and finite, got {hbar_s}")));
        }
        Ok(GridSpec { n1, n2, hbar_s })
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn hbar_s(&self) -> f64 {
        self.hbar_s
    }

    pub fn period(&self) -> f64 {
        TAU
    }

    pub fn len(&self, axis: Axis) -> usize {
        match axis {
            Axis::First => self.n1,
            Axis::Second => self.n2,
        }
    }

    /// Total number of amplitudes.
    pub fn size(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn position(&self, axis: Axis, k: usize) -> f64 {
        TAU * k as f64 / self.len(axis) as f64
    }

    pub fn positions(&self, axis: Axis) -> Vec<f64> {
        (0..self.len(axis)).map(|k| self.position(axis, k)).collect()
    }

    /// Lattice label `m` of FFT storage index `j`.
    pub fn momentum_index(&self, axis: Axis, j: usize) -> i64 {
        let n = self.len(axis);
        if j < n / 2 {
            j as i64
        } else {
            j as i64 - n as i64
        }
    }

    /// Storage index of lattice label `m`, if it lies on the grid.
    pub fn momentum_storage(&self, axis: Axis, m: i64) -> Option<usize> {
        let n = self.len(axis) as i64;
        if m < -n / 2 || m >= n / 2 {
            None
        } else {
            Some(m.rem_euclid(n) as usize)
        }
    }

    pub fn momentum(&self, axis: Axis, j: usize) -> f64 {
        self.hbar_s * self.momentum_index(axis, j) as f64
    }

    /// Momenta in storage (FFT) order.
    pub fn momenta(&self, axis: Axis) -> Vec<f64> {
        (0..self.len(axis)).map(|j| self.momentum(axis, j)).collect()
    }

    /// Momenta in ascending order, `ħ_s·m` for `m = −N/2 .. N/2−1`.
    pub fn momentum_lattice(&self, axis: Axis) -> Vec<f64> {
        let n = self.len(axis) as i64;
        (-n / 2..n / 2).map(|m| self.hbar_s * m as f64).collect()
    }

    pub fn momentum_spacing(&self) -> f64 {
        self.hbar_s
    }
}

/// Initial coherent state of a single rotor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherentStateSpec {
    pub x0: f64,
    pub p0: f64,
    pub sigma: f64,
}

impl CoherentStateSpec {
    /// Symmetric minimal-uncertainty width `√(ħ_s/2)` centred at `(π + 0.1, 0)`.
    pub fn default_for(hbar_s: f64) -> Self {
        CoherentStateSpec {
            x0: PI + 0.1,
            p0: 0.0,
            sigma: (hbar_s / 2.0).sqrt(),
        }
    }
}

fn wrap_centered(y: f64) -> f64 {
    (y + PI).rem_euclid(TAU) - PI
}

/// Periodized Gaussian wave packet on one axis, normalized to 1.
///
/// `ψ(x_k) ∝ Σ_w exp(−y²/(4σ²) + i p0 y/ħ_s)` with `y = x_k − x0 + 2πw`.
/// The winding sum stops once a full ring of images adds less than `1e-16`
/// to the norm.
pub fn coherent_state(grid: &GridSpec, axis: Axis, spec: &CoherentStateSpec) -> Result<Vec<Complex64>> {
    let CoherentStateSpec { x0, p0, sigma } = *spec;
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::config("sigma", format!("must be positive and finite, got {sigma}")));
    }
    if !x0.is_finite() || !p0.is_finite() {
        return Err(Error::config("x0/p0", "coherent state centre must be finite"));
    }
    let hbar = grid.hbar_s();
    let n = grid.len(axis);
    let image = |y: f64| Complex64::from_polar((-y * y / (4.0 * sigma * sigma)).exp(), p0 * y / hbar);

    let mut psi = vec![Complex64::new(0.0, 0.0); n];
    let mut primary = vec![Complex64::new(0.0, 0.0); n];
    for (k, (amp, prim)) in psi.iter_mut().zip(primary.iter_mut()).enumerate() {
        let y0 = wrap_centered(grid.position(axis, k) - x0);
        *prim = image(y0);
        *amp = *prim;
    }
    let mut norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    let mut w = 1i32;
    loop {
        let mut added = 0.0;
        for (k, amp) in psi.iter_mut().enumerate() {
            let y0 = wrap_centered(grid.position(axis, k) - x0);
            for shift in [TAU * w as f64, -TAU * w as f64] {
                let term = image(y0 + shift);
                added += term.norm_sqr();
                *amp += term;
            }
        }
        norm = norm.max(f64::MIN_POSITIVE);
        if added / norm < 1e-16 || w > 10_000 {
            break;
        }
        w += 1;
    }

    let total: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::Precision("coherent state has zero norm on this grid".into()));
    }
    let overlap: f64 = psi
        .iter()
        .zip(&primary)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        / total;
    if overlap > MAX_WINDING_OVERLAP {
        return Err(Error::Precision(format!(
            "sigma = {sigma} is too wide for the 2π cell: periodic images carry {overlap:.3e} of the norm"
        )));
    }
    let scale = 1.0 / total.sqrt();
    psi.iter_mut().for_each(|z| *z *= scale);
    Ok(psi)
}

/// Complex amplitudes of the two-rotor state on a [`GridSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct WaveFunction2D {
    grid: GridSpec,
    basis: [Basis; 2],
    amplitudes: Vec<Complex64>,
}

/// Tensor product `ψ1 ⊗ ψ2` in the position basis, renormalized.
pub fn product_state(grid: &GridSpec, psi1: &[Complex64], psi2: &[Complex64]) -> Result<WaveFunction2D> {
    if psi1.len() != grid.n1() {
        return Err(Error::Dimension {
            expected: grid.n1(),
            actual: psi1.len(),
        });
    }
    if psi2.len() != grid.n2() {
        return Err(Error::Dimension {
            expected: grid.n2(),
            actual: psi2.len(),
        });
    }
    let mut amplitudes = Vec::with_capacity(grid.size());
    for a in psi1 {
        amplitudes.extend(psi2.iter().map(|b| a * b));
    }
    WaveFunction2D::from_amplitudes(*grid, [Basis::Position; 2], amplitudes)?.normalized()
}

impl WaveFunction2D {
    /// Wraps raw amplitudes; they are not renormalized.
    pub fn from_amplitudes(grid: GridSpec, basis: [Basis; 2], amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.size() {
            return Err(Error::Dimension {
                expected: grid.size(),
                actual: amplitudes.len(),
            });
        }
        Ok(WaveFunction2D {
            grid,
            basis,
            amplitudes,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn basis(&self, axis: Axis) -> Basis {
        self.basis[axis.index()]
    }

    pub fn bases(&self) -> [Basis; 2] {
        self.basis
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn amplitude(&self, k1: usize, k2: usize) -> Complex64 {
        self.amplitudes[k1 * self.grid.n2() + k2]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let norm = self.norm_sqr();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Numerical(format!("cannot normalize a state with norm² = {norm}")));
        }
        let scale = 1.0 / norm.sqrt();
        self.amplitudes.iter_mut().for_each(|z| *z *= scale);
        Ok(self)
    }

    /// Transforms the selected axes to momentum; axes already there are left alone.
    pub fn to_momentum(&self, axes: Axes) -> Self {
        let mut out = self.clone();
        Fourier2D::new(&self.grid).transform(&mut out, axes, Basis::Momentum);
        out
    }

    pub fn to_position(&self, axes: Axes) -> Self {
        let mut out = self.clone();
        Fourier2D::new(&self.grid).transform(&mut out, axes, Basis::Position);
        out
    }

    /// Like [`to_momentum`](Self::to_momentum) but rejects axes already in momentum.
    pub fn to_momentum_strict(&self, axes: Axes) -> Result<Self> {
        self.check_basis(axes, Basis::Position)?;
        Ok(self.to_momentum(axes))
    }

    pub fn to_position_strict(&self, axes: Axes) -> Result<Self> {
        self.check_basis(axes, Basis::Momentum)?;
        Ok(self.to_position(axes))
    }

    fn check_basis(&self, axes: Axes, required: Basis) -> Result<()> {
        for axis in [Axis::First, Axis::Second] {
            if axes.contains(axis) && self.basis(axis) != required {
                return Err(Error::Basis(format!(
                    "axis {axis:?} is already in the {:?} basis",
                    self.basis(axis)
                )));
            }
        }
        Ok(())
    }

    /// Probability in the outermost [`EDGE_BINS`] momentum bins at each end, per axis.
    pub fn edge_population(&self) -> [f64; 2] {
        let momentum;
        let psi = if self.basis == [Basis::Momentum; 2] {
            self
        } else {
            momentum = self.to_momentum(Axes::Both);
            &momentum
        };
        let (n1, n2) = (self.grid.n1(), self.grid.n2());
        let mut edges = [0.0; 2];
        for k1 in 0..n1 {
            let row = &psi.amplitudes[k1 * n2..(k1 + 1) * n2];
            let row_sum: f64 = row.iter().map(|z| z.norm_sqr()).sum();
            if is_edge_bin(k1, n1) {
                edges[0] += row_sum;
            }
            edges[1] += row
                .iter()
                .enumerate()
                .filter(|(k2, _)| is_edge_bin(*k2, n2))
                .map(|(_, z)| z.norm_sqr())
                .sum::<f64>();
        }
        edges
    }
}

/// Whether FFT storage index `j` is one of the outermost momentum bins.
pub(crate) fn is_edge_bin(j: usize, n: usize) -> bool {
    let half = n / 2;
    (half - EDGE_BINS..half + EDGE_BINS).contains(&j)
}

/// Cached FFT plans for both axes of a grid.
pub struct Fourier2D {
    n1: usize,
    n2: usize,
    forward: [Arc<dyn Fft<f64>>; 2],
    inverse: [Arc<dyn Fft<f64>>; 2],
    scratch: Vec<Complex64>,
    transposed: Vec<Complex64>,
}

impl Fourier2D {
    pub fn new(grid: &GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let forward = [planner.plan_fft_forward(grid.n1()), planner.plan_fft_forward(grid.n2())];
        let inverse = [planner.plan_fft_inverse(grid.n1()), planner.plan_fft_inverse(grid.n2())];
        let scratch_len = forward
            .iter()
            .chain(inverse.iter())
            .map(|f| f.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Fourier2D {
            n1: grid.n1(),
            n2: grid.n2(),
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            transposed: vec![Complex64::new(0.0, 0.0); grid.size()],
        }
    }

    /// Moves the selected axes of `psi` into `target`, skipping axes already there.
    pub fn transform(&mut self, psi: &mut WaveFunction2D, axes: Axes, target: Basis) {
        assert_eq!(psi.grid.n1(), self.n1);
        assert_eq!(psi.grid.n2(), self.n2);
        let forward = target == Basis::Momentum;
        if axes.contains(Axis::Second) && psi.basis[1] != target {
            self.rows(&mut psi.amplitudes, Axis::Second, forward);
            scale(&mut psi.amplitudes, 1.0 / (self.n2 as f64).sqrt());
            psi.basis[1] = target;
        }
        if axes.contains(Axis::First) && psi.basis[0] != target {
            self.columns(&mut psi.amplitudes, forward);
            scale(&mut psi.amplitudes, 1.0 / (self.n1 as f64).sqrt());
            psi.basis[0] = target;
        }
    }

    /// Unnormalized FFT along contiguous rows of a buffer laid out with `axis` fastest.
    pub(crate) fn rows(&mut self, data: &mut [Complex64], axis: Axis, forward: bool) {
        let plan = if forward {
            &self.forward[axis.index()]
        } else {
            &self.inverse[axis.index()]
        };
        plan.process_with_scratch(data, &mut self.scratch);
    }

    /// Unnormalized FFT along axis 1 of a row-major `n1 × n2` buffer.
    fn columns(&mut self, data: &mut [Complex64], forward: bool) {
        let mut transposed = std::mem::take(&mut self.transposed);
        transpose::transpose(data, &mut transposed, self.n2, self.n1);
        self.rows(&mut transposed, Axis::First, forward);
        transpose::transpose(&transposed, data, self.n1, self.n2);
        self.transposed = transposed;
    }
}

fn scale(data: &mut [Complex64], factor: f64) {
    data.iter_mut().for_each(|z| *z *= factor);
}

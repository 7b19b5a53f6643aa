use serde::{Deserialize, Serialize};

use super::MarginalDistribution;
use crate::error::{Error, Result};
use crate::grid::Basis;

/// Bins below this fraction of the peak are left out of distribution fits.
pub const FIT_FLOOR: f64 = 1e-12;

const MIN_BINS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitModel {
    /// `ln f = c₀ + c₁p + c₂p²`; params `[variance, centre, amplitude]`.
    Gaussian,
    /// Distribution: `ln f = c₀ − |p − p̄|/ℓ` with `p̄` the peak, params `[ℓ, p̄, amplitude]`.
    /// Time series: `y = A·exp(−γt)`, params `[γ, A]`.
    Exponential,
    /// `y = A·t^α`, params `[α, A]`.
    PowerLaw,
    /// `y = a·t + b`, params `[a, b]`.
    Linear,
    /// `y = a·ln t + b`, params `[a, b]`.
    LogLinear,
}

/// Least-squares fit summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: FitModel,
    pub params: Vec<f64>,
    /// RMS residual in the linearized representation.
    pub residual: f64,
    pub r_squared: f64,
    /// Standard error of the primary (first) parameter.
    pub std_error: f64,
    pub window: (f64, f64),
    pub n_points: usize,
}

/// Ordinary least squares line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_std_error: f64,
    pub r_squared: f64,
    pub rms: f64,
}

impl LineFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return Err(Error::InsufficientData {
            needed: 2,
            available: n.min(ys.len()),
        });
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 {
        return Err(Error::Numerical("degenerate abscissa in linear fit".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    let slope_std_error = if n > 2 {
        (sse / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LineFit {
        slope,
        intercept,
        slope_std_error,
        r_squared: if syy > 0.0 { 1.0 - sse / syy } else { 1.0 },
        rms: (sse / nf).sqrt(),
    })
}

/// Solves the 3×3 normal equations of `y = c₀ + c₁x + c₂x²`.
fn quadratic_fit(xs: &[f64], ys: &[f64]) -> Result<([f64; 3], f64, f64)> {
    // centre and scale the abscissa for conditioning
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let sx = (xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>() / n).sqrt().max(f64::MIN_POSITIVE);
    let mut ata = [[0.0; 3]; 3];
    let mut aty = [0.0; 3];
    for (x, y) in xs.iter().zip(ys) {
        let u = (x - mx) / sx;
        let row = [1.0, u, u * u];
        for i in 0..3 {
            aty[i] += row[i] * y;
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    let c = solve3(ata, aty).ok_or_else(|| Error::Numerical("singular quadratic fit".into()))?;
    // back to the original abscissa
    let c2 = c[2] / (sx * sx);
    let c1 = c[1] / sx - 2.0 * c2 * mx;
    let c0 = c[0] - c[1] * mx / sx + c[2] * mx * mx / (sx * sx);
    let my = ys.iter().sum::<f64>() / n;
    let (mut sse, mut syy) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sse += (y - c0 - c1 * x - c2 * x * x).powi(2);
        syy += (y - my).powi(2);
    }
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(([c0, c1, c2], (sse / n).sqrt(), r2))
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Fits `ln f(p)` of a momentum distribution to a Gaussian or two-sided exponential.
pub fn fit_distribution(dist: &MarginalDistribution, model: FitModel) -> Result<FitReport> {
    if dist.basis != Basis::Momentum {
        return Err(Error::Basis("distribution fits expect a momentum marginal".into()));
    }
    let peak = dist.values.iter().copied().fold(0.0, f64::max);
    let coords = dist.coordinates();
    let (ps, logs): (Vec<f64>, Vec<f64>) = coords
        .iter()
        .zip(&dist.values)
        .filter(|(_, &v)| v > FIT_FLOOR * peak && v > 0.0)
        .map(|(p, v)| (*p, v.ln()))
        .unzip();
    if ps.len() < MIN_BINS {
        return Err(Error::InsufficientData {
            needed: MIN_BINS,
            available: ps.len(),
        });
    }
    let window = (ps[0], ps[ps.len() - 1]);
    match model {
        FitModel::Gaussian => {
            let ([c0, c1, c2], rms, r2) = quadratic_fit(&ps, &logs)?;
            let variance = if c2 < 0.0 { -1.0 / (2.0 * c2) } else { f64::INFINITY };
            let centre = if c2 != 0.0 { -c1 / (2.0 * c2) } else { 0.0 };
            Ok(FitReport {
                model,
                params: vec![variance, centre, (c0 - c1 * c1 / (4.0 * c2)).exp()],
                residual: rms,
                r_squared: r2,
                std_error: f64::NAN,
                window,
                n_points: ps.len(),
            })
        }
        FitModel::Exponential => {
            let centre = coords
                .iter()
                .zip(&dist.values)
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map_or(0.0, |(p, _)| *p);
            let distances: Vec<f64> = ps.iter().map(|p| (p - centre).abs()).collect();
            let line = linear_fit(&distances, &logs)?;
            let length = if line.slope < 0.0 { -1.0 / line.slope } else { f64::INFINITY };
            Ok(FitReport {
                model,
                params: vec![length, centre, line.intercept.exp()],
                residual: line.rms,
                r_squared: line.r_squared,
                std_error: line.slope_std_error / (line.slope * line.slope),
                window,
                n_points: ps.len(),
            })
        }
        other => Err(Error::config("model", format!("{other:?} is not a distribution model"))),
    }
}

/// Fits `(t, y)` samples with `t` inside `window` in the model's linearizing representation.
pub fn fit_timeseries(series: &[(f64, f64)], model: FitModel, window: (f64, f64)) -> Result<FitReport> {
    let points: Vec<(usize, f64, f64)> = series
        .iter()
        .enumerate()
        .filter(|(_, (t, _))| *t >= window.0 && *t <= window.1)
        .map(|(i, (t, y))| (i, *t, *y))
        .collect();
    if points.len() < MIN_BINS {
        return Err(Error::InsufficientData {
            needed: MIN_BINS,
            available: points.len(),
        });
    }
    let log_domain = |needs_positive_t: bool, needs_positive_y: bool| -> Result<()> {
        let offending: Vec<usize> = points
            .iter()
            .filter(|(_, t, y)| (needs_positive_t && *t <= 0.0) || (needs_positive_y && *y <= 0.0))
            .map(|(i, _, _)| *i)
            .collect();
        if offending.is_empty() {
            Ok(())
        } else {
            Err(Error::Domain {
                message: format!("{model:?} fit needs positive values in its log representation"),
                offending,
            })
        }
    };
    let (xs, ys): (Vec<f64>, Vec<f64>) = match model {
        FitModel::Linear => points.iter().map(|(_, t, y)| (*t, *y)).unzip(),
        FitModel::LogLinear => {
            log_domain(true, false)?;
            points.iter().map(|(_, t, y)| (t.ln(), *y)).unzip()
        }
        FitModel::PowerLaw => {
            log_domain(true, true)?;
            points.iter().map(|(_, t, y)| (t.ln(), y.ln())).unzip()
        }
        FitModel::Exponential => {
            log_domain(false, true)?;
            points.iter().map(|(_, t, y)| (*t, y.ln())).unzip()
        }
        FitModel::Gaussian => return Err(Error::config("model", "Gaussian is not a time-series model")),
    };
    let line = linear_fit(&xs, &ys)?;
    let params = match model {
        FitModel::Linear | FitModel::LogLinear => vec![line.slope, line.intercept],
        FitModel::PowerLaw => vec![line.slope, line.intercept.exp()],
        FitModel::Exponential => vec![-line.slope, line.intercept.exp()],
        FitModel::Gaussian => unreachable!(),
    };
    Ok(FitReport {
        model,
        params,
        residual: line.rms,
        r_squared: line.r_squared,
        std_error: line.slope_std_error,
        window,
        n_points: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Axis;
    use approx::assert_abs_diff_eq;

    fn momentum_dist(f: impl Fn(f64) -> f64) -> MarginalDistribution {
        let n = 128;
        let values: Vec<f64> = (-64..64).map(|m| f(m as f64)).collect();
        let total: f64 = values.iter().sum();
        MarginalDistribution {
            axis: Axis::First,
            basis: Basis::Momentum,
            time: 0,
            hbar_s: 1.0,
            values: values.into_iter().map(|v| v / total).collect::<Vec<_>>()[..n].to_vec(),
        }
    }

    #[test]
    fn gaussian_input_prefers_gaussian() {
        let d = momentum_dist(|p| (-(p - 2.0) * (p - 2.0) / (2.0 * 40.0)).exp());
        let g = fit_distribution(&d, FitModel::Gaussian).unwrap();
        let e = fit_distribution(&d, FitModel::Exponential).unwrap();
        assert!(g.residual < 1e-8, "{}", g.residual);
        assert!(e.residual > g.residual);
        assert_abs_diff_eq!(g.params[0], 40.0, epsilon = 1e-6);
        assert_abs_diff_eq!(g.params[1], 2.0, epsilon = 1e-6);
    }

    #[test]
    fn exponential_input_prefers_exponential() {
        let d = momentum_dist(|p| (-p.abs() / 6.0).exp());
        let e = fit_distribution(&d, FitModel::Exponential).unwrap();
        let g = fit_distribution(&d, FitModel::Gaussian).unwrap();
        assert!(e.residual < 1e-8, "{}", e.residual);
        assert!(g.residual > e.residual);
        assert_abs_diff_eq!(e.params[0], 6.0, epsilon = 1e-8);
    }

    #[test]
    fn too_few_bins() {
        let d = momentum_dist(|p| if p.abs() < 2.0 { 1.0 } else { 0.0 });
        assert!(matches!(
            fit_distribution(&d, FitModel::Gaussian),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn loglinear_and_power_law_identities() {
        let series: Vec<(f64, f64)> = (1..200).map(|t| (t as f64, 0.5 * (t as f64).ln() + 1.25)).collect();
        let fit = fit_timeseries(&series, FitModel::LogLinear, (1.0, 200.0)).unwrap();
        assert_abs_diff_eq!(fit.params[0], 0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(fit.params[1], 1.25, epsilon = 1e-8);

        let series: Vec<(f64, f64)> = (1..200).map(|t| (t as f64, (t as f64).powf(-0.5))).collect();
        let fit = fit_timeseries(&series, FitModel::PowerLaw, (1.0, 200.0)).unwrap();
        assert_abs_diff_eq!(fit.params[0], -0.5, epsilon = 1e-8);

        let series: Vec<(f64, f64)> = (0..50).map(|t| (t as f64, 3.0 * (-0.02 * t as f64).exp())).collect();
        let fit = fit_timeseries(&series, FitModel::Exponential, (0.0, 50.0)).unwrap();
        assert_abs_diff_eq!(fit.params[0], 0.02, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.params[1], 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn log_domain_errors_list_offenders() {
        let series = vec![(0.0, 1.0), (1.0, -1.0), (2.0, 1.0), (3.0, 1.0), (4.0, 1.0), (5.0, 1.0), (6.0, 1.0), (7.0, 0.0)];
        match fit_timeseries(&series, FitModel::PowerLaw, (0.0, 10.0)) {
            Err(Error::Domain { offending, .. }) => assert_eq!(offending, vec![0, 1, 7]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn line_fit_recovers_slope() {
        let xs: Vec<f64> = (0..20).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        let fit = linear_fit(&xs, &ys).unwrap();
        assert_abs_diff_eq!(fit.slope, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.intercept, -1.0, epsilon = 1e-12);
        assert!(linear_fit(&[1.0], &[1.0]).is_err());
        assert!(linear_fit(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }
}

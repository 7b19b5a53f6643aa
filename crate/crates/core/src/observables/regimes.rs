//! Diffusion rates and the three dynamical regimes of the coupled rotors:
//! classical-like diffusion up to the break time `t_b`, a transient plateau,
//! and renewed diffusion after the crossover time `t*`.

use serde::{Deserialize, Serialize};

use super::fit::linear_fit;
use crate::error::{Error, Result};
use crate::record::RunRecord;

const MIN_DQ_SAMPLES: usize = 10;
const MIN_REGIME_SAMPLES: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegimeOptions {
    /// Allowed relative deviation of the running energy slope from `D_cl`.
    pub slope_tolerance: f64,
    /// Width of the moving median applied to `S_lin` before fitting.
    pub smoothing: usize,
    /// Smallest number of samples in either fit window.
    pub min_window: usize,
    /// Ignore samples after the first momentum-edge breach.
    pub valid_only: bool,
}

impl Default for RegimeOptions {
    fn default() -> Self {
        RegimeOptions {
            slope_tolerance: 0.5,
            smoothing: 5,
            min_window: 4,
            valid_only: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DqEstimate {
    pub d_q: f64,
    pub std_error: f64,
    pub window: (f64, f64),
    pub n_samples: usize,
}

/// Slope of `⟨E₁⟩(t)` over `window`, from the per-period energy series.
///
/// A slope that is not positive, is within three standard errors of zero, or
/// raises the energy by less than 5% of its window mean is reported as a
/// regime error: the window is not diffusive.
pub fn estimate_dq(record: &RunRecord, window: (f64, f64)) -> Result<DqEstimate> {
    let (ts, es): (Vec<f64>, Vec<f64>) = record
        .e1_series()
        .into_iter()
        .filter(|(t, _)| *t >= window.0 && *t <= window.1)
        .unzip();
    if ts.len() < MIN_DQ_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_DQ_SAMPLES,
            available: ts.len(),
        });
    }
    let fit = linear_fit(&ts, &es)?;
    let mean = es.iter().sum::<f64>() / es.len() as f64;
    let span = ts[ts.len() - 1] - ts[0];
    if !(fit.slope > 0.0) || fit.slope < 3.0 * fit.slope_std_error || fit.slope * span < 0.05 * mean {
        return Err(Error::Regime(format!(
            "no diffusion in [{}, {}]: slope {:.4e} ± {:.1e} against mean energy {:.4e}",
            window.0, window.1, fit.slope, fit.slope_std_error, mean
        )));
    }
    Ok(DqEstimate {
        d_q: fit.slope,
        std_error: fit.slope_std_error,
        window: (ts[0], ts[ts.len() - 1]),
        n_samples: ts.len(),
    })
}

/// Centred moving median; windows shrink at the ends.
pub fn moving_median(values: &[f64], width: usize) -> Vec<f64> {
    if width <= 1 {
        return values.to_vec();
    }
    let half = width / 2;
    let mut buf = Vec::with_capacity(width);
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            buf.clear();
            buf.extend_from_slice(&values[lo..hi]);
            buf.sort_by(f64::total_cmp);
            let m = buf.len();
            if m % 2 == 1 {
                buf[m / 2]
            } else {
                0.5 * (buf[m / 2 - 1] + buf[m / 2])
            }
        })
        .collect()
}

/// Fit quality of one candidate window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowDiagnostic {
    pub label: String,
    pub window: (f64, f64),
    /// RMS of `ln S_lin` residuals.
    pub residual: f64,
    pub n_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub t_b: Option<u64>,
    pub idl_interval: Option<(f64, f64)>,
    pub t_star_numeric: Option<f64>,
    /// Rate `c` of the early fit `S_lin = c·t`.
    pub linear_rate: Option<f64>,
    /// Amplitude `a` of the late fit `S_lin = 1 − a/√t`.
    pub saturation_amplitude: Option<f64>,
    pub diagnostics: Vec<WindowDiagnostic>,
    pub notes: Vec<String>,
}

impl RegimeReport {
    pub fn idl_duration(&self) -> Option<f64> {
        self.idl_interval.map(|(a, b)| b - a)
    }
}

/// Last time `t` at which the running slope `(⟨E₁⟩(t) − ⟨E₁⟩(0))/t` lies
/// within `tolerance·d_cl` of `d_cl`, before it first falls below that band.
///
/// Excursions above the band are tolerated: kick-to-kick correlations push
/// the first few periods well past `d_cl` without ending classical growth.
pub fn break_time(energy: &[(f64, f64)], d_cl: f64, tolerance: f64) -> Option<u64> {
    let e0 = energy.iter().find(|(t, _)| *t == 0.0)?.1;
    let mut last = None;
    for &(t, e) in energy.iter().filter(|(t, _)| *t >= 1.0) {
        let slope = (e - e0) / t;
        if slope < (1.0 - tolerance) * d_cl {
            break;
        }
        if slope <= (1.0 + tolerance) * d_cl {
            last = Some(t as u64);
        }
    }
    last
}

struct SplitFit {
    rate: f64,
    amplitude: f64,
    early: WindowDiagnostic,
    late: WindowDiagnostic,
    cost: f64,
}

fn through_origin(ts: &[f64], ys: &[f64]) -> f64 {
    let sxy: f64 = ts.iter().zip(ys).map(|(t, y)| t * y).sum();
    let sxx: f64 = ts.iter().map(|t| t * t).sum();
    sxy / sxx
}

fn log_rms(ts: &[f64], ys: &[f64], model: impl Fn(f64) -> f64) -> Option<f64> {
    let mut sum = 0.0;
    for (t, y) in ts.iter().zip(ys) {
        let m = model(*t);
        if !(m > 0.0) {
            return None;
        }
        sum += (y.ln() - m.ln()).powi(2);
    }
    Some((sum / ts.len() as f64).sqrt())
}

fn fit_split(ts: &[f64], ys: &[f64], split: usize) -> Option<SplitFit> {
    let (te, ye) = (&ts[..split], &ys[..split]);
    let (tl, yl) = (&ts[split..], &ys[split..]);
    let rate = through_origin(te, ye);
    // 1 − S = a·t^{-1/2}, least squares in a
    let inv: Vec<f64> = tl.iter().map(|t| t.powf(-0.5)).collect();
    let gap: Vec<f64> = yl.iter().map(|y| 1.0 - y).collect();
    let amplitude = through_origin(&inv, &gap);
    if !(rate > 0.0 && amplitude.is_finite()) {
        return None;
    }
    let early_rms = log_rms(te, ye, |t| rate * t)?;
    let late_rms = log_rms(tl, yl, |t| 1.0 - amplitude / t.sqrt())?;
    let cost = early_rms.powi(2) * te.len() as f64 + late_rms.powi(2) * tl.len() as f64;
    Some(SplitFit {
        rate,
        amplitude,
        early: WindowDiagnostic {
            label: "linear".into(),
            window: (te[0], te[te.len() - 1]),
            residual: early_rms,
            n_points: te.len(),
        },
        late: WindowDiagnostic {
            label: "saturation".into(),
            window: (tl[0], tl[tl.len() - 1]),
            residual: late_rms,
            n_points: tl.len(),
        },
        cost,
    })
}

/// Larger positive root of `c·t = 1 − a/√t`, if the curves cross.
pub fn intersect_linear_saturation(rate: f64, amplitude: f64) -> Option<f64> {
    if !(rate > 0.0) {
        return None;
    }
    let f = |t: f64| rate * t - 1.0 + amplitude / t.sqrt();
    if amplitude <= 0.0 {
        // 1 − a/√t ≥ 1 is crossed once
        let (mut lo, mut hi) = (0.0, (1.0 - amplitude.min(0.0)) / rate + 1.0);
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
        return Some(0.5 * (lo + hi));
    }
    // f is convex in t with its minimum at (a/2c)^{2/3}
    let t_min = (amplitude / (2.0 * rate)).powf(2.0 / 3.0);
    if f(t_min) > 0.0 {
        return None;
    }
    let (mut lo, mut hi) = (t_min, 2.0 * t_min.max(1.0 / rate));
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

/// Break time from the energy series and numerical crossover time from the
/// linear-entropy series.
///
/// The `S_lin` samples with `t ≥ 1` are split in two at every candidate
/// index; the early part is fitted by `c·t` and the late part by `1 − a/√t`,
/// and the split with the smallest summed squared `ln S_lin` residual wins.
/// `t*` is where the two fitted curves cross.
pub fn detect_regimes(record: &RunRecord, d_cl: f64, options: &RegimeOptions) -> Result<RegimeReport> {
    if !(d_cl > 0.0) {
        return Err(Error::config("d_cl", format!("must be positive, got {d_cl}")));
    }
    let limit = if options.valid_only {
        record.valid_until() as f64
    } else {
        f64::INFINITY
    };
    let energy: Vec<(f64, f64)> = record.e1_series().into_iter().filter(|(t, _)| *t <= limit).collect();
    let mut report = RegimeReport {
        t_b: break_time(&energy, d_cl, options.slope_tolerance),
        idl_interval: None,
        t_star_numeric: None,
        linear_rate: None,
        saturation_amplitude: None,
        diagnostics: Vec::new(),
        notes: Vec::new(),
    };

    let series: Vec<(f64, f64)> = record
        .rows
        .iter()
        .filter(|r| (r.valid || !options.valid_only) && r.t >= 1)
        .filter_map(|r| r.slin.map(|s| (r.t as f64, s)))
        .collect();
    if series.len() < MIN_REGIME_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_REGIME_SAMPLES,
            available: series.len(),
        });
    }
    let raw: Vec<f64> = series.iter().map(|s| s.1).collect();
    let smoothed = moving_median(&raw, options.smoothing);
    let (ts, ys): (Vec<f64>, Vec<f64>) = series
        .iter()
        .zip(&smoothed)
        .filter(|(_, s)| **s > 0.0 && **s < 1.0)
        .map(|((t, _), s)| (*t, *s))
        .unzip();
    let min_window = options.min_window.max(2);
    if ts.len() < 2 * min_window {
        report.notes.push("linear entropy never leaves zero; no crossover".into());
        return Ok(report);
    }

    let best = (min_window..=ts.len() - min_window)
        .filter_map(|split| fit_split(&ts, &ys, split))
        .min_by(|a, b| a.cost.total_cmp(&b.cost));
    let Some(best) = best else {
        report.notes.push("no split admits both fits".into());
        return Ok(report);
    };
    report.linear_rate = Some(best.rate);
    report.saturation_amplitude = Some(best.amplitude);
    report.diagnostics.push(best.early.clone());
    report.diagnostics.push(best.late.clone());

    match intersect_linear_saturation(best.rate, best.amplitude) {
        Some(t_star) if t_star <= ts[ts.len() - 1] => {
            report.t_star_numeric = Some(t_star);
            match report.t_b {
                Some(t_b) if (t_b as f64) < t_star => report.idl_interval = Some((t_b as f64, t_star)),
                _ => report.notes.push("no plateau between break time and crossover".into()),
            }
        }
        Some(t_star) => report
            .notes
            .push(format!("fitted curves cross at {t_star:.1}, beyond the record")),
        None => report.notes.push("fitted curves do not cross".into()),
    }
    Ok(report)
}

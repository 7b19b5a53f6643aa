//! Acceptance gate: one line per criterion.
//!
//! Runs the full desk-scale suite (about 15 minutes on one core). Set
//! `CKR_ACCEPTANCE_CACHE=<dir>` to reuse run records between invocations and
//! `CKR_ACCEPTANCE_STRICT=1` to exit non-zero when any criterion fails.

mod common;

use std::collections::HashMap;
use std::path::PathBuf;
use std::time::Instant;

use ckr_core::classical::tangent_step;
use ckr_core::harness::{
    classical_diffusion, export_record, late_diffusion, load_record, parse_config, read_checkpoint, run, run_with,
    serialize_config, CheckpointConfig, RunConfig, RunOptions, ScheduleConfig, Spacing,
};
use ckr_core::observables::{fit_distribution, fit_timeseries, husimi, linear_fit, HusimiLattice};
use ckr_core::theory::{asymptotic_slin, power_law_exponent};
use ckr_core::*;
use nalgebra::DVector;

const GRID: usize = 512;
const T_MAX: u64 = 5000;
const IDL_MARGINALS: [u64; 5] = [60, 100, 150, 200, 300];
const LATE_MARGINALS: [u64; 5] = [1500, 2000, 3000, 4000, 5000];

type Check = std::result::Result<String, String>;

struct Analysis {
    record: RunRecord,
    d_cl: f64,
    regimes: Result<RegimeReport>,
}

struct Runs {
    cache_dir: Option<PathBuf>,
    done: HashMap<String, Analysis>,
}

fn config_for(xi12: f64, t_max: u64) -> RunConfig {
    let mut config = RunConfig::baseline(GRID, xi12, t_max);
    if xi12 == 0.05 {
        config.probes.marginal_times = IDL_MARGINALS.iter().chain(&LATE_MARGINALS).copied().collect();
    }
    if xi12 == 0.1 {
        config.probes.husimi = true;
    }
    config
}

impl Runs {
    fn get(&mut self, xi12: f64, t_max: u64) -> std::result::Result<&Analysis, String> {
        let key = format!("n{GRID}_xi{xi12}_t{t_max}");
        if !self.done.contains_key(&key) {
            let config = config_for(xi12, t_max);
            let record = self.record(&key, &config).map_err(|e| format!("run {key} failed: {e}"))?;
            let d_cl = classical_diffusion(&config).map_err(|e| e.to_string())?.d_cl;
            let regimes = detect_regimes(&record, d_cl, &config.regimes);
            self.done.insert(key.clone(), Analysis { record, d_cl, regimes });
        }
        Ok(&self.done[&key])
    }

    fn record(&self, key: &str, config: &RunConfig) -> Result<RunRecord> {
        let Some(dir) = &self.cache_dir else {
            return Ok(run(config)?.record);
        };
        let path = dir.join(key);
        if let Ok((record, sidecar)) = load_record(&path) {
            if sidecar.config == *config {
                return Ok(record);
            }
        }
        let out = run(config)?;
        export_record(&path, config, &out.record, &out.provenance)?;
        Ok(out.record)
    }
}

fn regimes(a: &Analysis) -> std::result::Result<&RegimeReport, String> {
    a.regimes.as_ref().map_err(|e| format!("regime detection failed: {e}"))
}

fn t_star(a: &Analysis) -> std::result::Result<f64, String> {
    regimes(a)?
        .t_star_numeric
        .ok_or_else(|| "no crossover detected".to_string())
}

fn within(value: f64, lo: f64, hi: f64) -> bool {
    value >= lo && value <= hi
}

fn verdict(pass: bool, detail: String) -> Check {
    if pass {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn initial(grid: &GridSpec) -> WaveFunction2D {
    let spec = CoherentStateSpec::default_for(grid.hbar_s());
    let a = coherent_state(grid, Axis::First, &spec).unwrap();
    let b = coherent_state(grid, Axis::Second, &spec).unwrap();
    product_state(grid, &a, &b).unwrap()
}

fn unitarity() -> Check {
    let grid = make_grid(256, 256, 1.0).map_err(|e| e.to_string())?;
    let probes = ProbeSet {
        svn: true,
        slin: false,
        energy: false,
        decoherence: false,
        husimi: false,
        marginal_times: Vec::new(),
    };
    let schedule = SampleSchedule::linear(20, 10_000).map_err(|e| e.to_string())?;
    let mut sim = Simulation::new(
        initial(&grid),
        &SystemParams::baseline(0.0),
        CouplingStorage::Table,
        schedule,
        probes,
    )
    .map_err(|e| e.to_string())?;
    let mut drift: f64 = 0.0;
    for chunk in 1..=20 {
        sim.advance_to(chunk * 500).map_err(|e| e.to_string())?;
        drift = drift.max((sim.state().norm_sqr() - 1.0).abs());
    }
    let entropy = sim
        .record()
        .rows
        .iter()
        .filter_map(|r| r.svn)
        .fold(0.0, f64::max);
    verdict(
        drift < 1e-10 && entropy < 1e-10,
        format!("max norm drift {drift:.2e}, max S_vN {entropy:.2e} over 10^4 steps"),
    )
}

fn oracle_equivalence() -> Check {
    let grid = make_grid(16, 16, 1.0).map_err(|e| e.to_string())?;
    let params = SystemParams::new(9.0, 10.0, 0.3, 1.0).map_err(|e| e.to_string())?;
    let u = common::dense_floquet(&grid, &params);
    let tables = build_phase_tables(&grid, &params).map_err(|e| e.to_string())?;
    let mut step_err: f64 = 0.0;
    let mut entropy_err: f64 = 0.0;
    for seed in 0..5 {
        let amps = common::random_amplitudes(256, seed);
        let mut dense = DVector::from_column_slice(&amps);
        let mut psi = WaveFunction2D::from_amplitudes(grid, [Basis::Position; 2], amps).map_err(|e| e.to_string())?;
        for _ in 0..5 {
            dense = &u * dense;
            psi = step(&psi, &tables).map_err(|e| e.to_string())?;
            for (a, b) in psi.amplitudes().iter().zip(dense.iter()) {
                step_err = step_err.max((a - b).norm());
            }
            let eig = common::partial_trace_spectrum(psi.amplitudes(), 16, 16);
            let (svn_ref, slin_ref) = common::entropies(&eig.iter().map(|p| p.max(0.0)).collect::<Vec<_>>());
            let spectrum = schmidt(&psi).map_err(|e| e.to_string())?;
            entropy_err = entropy_err
                .max((svn(&spectrum) - svn_ref).abs())
                .max((slin(&spectrum) - slin_ref).abs());
        }
    }
    verdict(
        step_err < 1e-10 && entropy_err < 1e-10,
        format!("step vs dense unitary {step_err:.2e}, Schmidt vs partial trace {entropy_err:.2e}"),
    )
}

fn localization(runs: &mut Runs) -> Check {
    let a = runs.get(0.0, 8000)?;
    let mean = |lo: u64, hi: u64| {
        let v: Vec<f64> = a
            .record
            .energy
            .iter()
            .filter(|p| p.t >= lo && p.t <= hi)
            .map(|p| p.e1)
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let (late, later) = (mean(2000, 4000), mean(4000, 8000));
    let ratio = late / later;
    let (ts, es): (Vec<f64>, Vec<f64>) = a
        .record
        .energy
        .iter()
        .filter(|p| p.t <= 5)
        .map(|p| (p.t as f64, p.e1))
        .unzip();
    let slope = linear_fit(&ts, &es).map_err(|e| e.to_string())?.slope;
    let rel = (slope - a.d_cl).abs() / a.d_cl;
    verdict(
        (ratio - 1.0).abs() < 0.15 && rel < 0.4,
        format!(
            "<E1> [2000,4000] / [4000,8000] = {ratio:.3}; early slope {slope:.2} vs D_cl {:.2} ({:.0}%)",
            a.d_cl,
            100.0 * rel
        ),
    )
}

fn three_regimes(runs: &mut Runs) -> Check {
    let mut durations = Vec::new();
    let mut ordered = true;
    let mut detail = Vec::new();
    for xi in [0.01, 0.03, 0.07, 0.1] {
        let r = regimes(runs.get(xi, T_MAX)?)?;
        let (tb, ts) = (r.t_b, r.t_star_numeric);
        if xi <= 0.07 {
            ordered &= matches!((tb, ts), (Some(b), Some(s)) if (b as f64) < s);
        }
        let d = r.idl_duration().unwrap_or(0.0);
        detail.push(format!("ξ={xi}: t_b={tb:?} t*={:.0} IDL={d:.0}", ts.unwrap_or(f64::NAN)));
        durations.push(d);
    }
    let decreasing = durations.windows(2).all(|w| w[1] < w[0]);
    verdict(ordered && decreasing, detail.join("; "))
}

fn log_entropy(runs: &mut Runs) -> Check {
    let a = runs.get(0.1, T_MAX)?;
    let ts = t_star(a)?;
    let fit = fit_timeseries(&a.record.svn_series(), FitModel::LogLinear, (2.0 * ts, T_MAX as f64))
        .map_err(|e| e.to_string())?;
    let slope = fit.params[0];
    verdict(
        within(slope, 0.35, 0.65),
        format!("S_vN slope vs ln t over [{:.0}, {T_MAX}] = {slope:.3}", 2.0 * ts),
    )
}

fn rate_exponent(runs: &mut Runs) -> Check {
    let xs = [0.01, 0.02, 0.03, 0.05];
    let mut rates = Vec::new();
    for xi in xs {
        let rate = regimes(runs.get(xi, T_MAX)?)?.linear_rate;
        rates.push(rate.ok_or(format!("no early linear fit at ξ={xi}"))?);
    }
    let beta = power_law_exponent(&xs, &rates).map_err(|e| e.to_string())?;
    verdict(
        within(beta, 1.5, 2.2),
        format!("rates {:?} give β = {beta:.3}", rates.iter().map(|r| format!("{r:.3e}")).collect::<Vec<_>>()),
    )
}

fn crossover(runs: &mut Runs) -> Check {
    let mut pass = true;
    let mut detail = Vec::new();
    let mut inputs = vec![];
    for xi in [0.05, 0.1, 0.2] {
        let a = runs.get(xi, T_MAX)?;
        let numeric = t_star(a)?;
        let d_q = late_diffusion(&a.record, numeric).map_err(|e| e.to_string())?.d_q;
        let predicted = crossover_time(&TheoryInputs::new(xi, 1.0, d_q).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let factor = (predicted / numeric).max(numeric / predicted);
        pass &= factor <= 2.0;
        detail.push(format!("ξ={xi}: D_q={d_q:.3} t*={predicted:.1} vs {numeric:.1}"));
        inputs.push((xi, d_q, 1.0));
    }
    for xi in [0.03, 0.05, 0.1] {
        for d_q in [10.0, 20.0] {
            inputs.push((xi, d_q, 1.0));
        }
    }
    let mut worst: f64 = 0.0;
    for (xi, d_q, hbar) in inputs {
        let formula = crossover_time(&TheoryInputs::new(xi, hbar, d_q).map_err(|e| e.to_string())?);
        match (formula, common::crossing_by_bisection(xi, hbar, d_q)) {
            (Ok(t), Some(root)) => worst = worst.max((t - root).abs() / root),
            _ => worst = f64::INFINITY,
        }
    }
    pass &= worst < 1e-6;
    detail.push(format!("formula vs bisection {worst:.1e}"));
    verdict(pass, detail.join("; "))
}

fn collapse(runs: &mut Runs) -> Check {
    let weak = runs.get(0.01, T_MAX)?.record.slin_series();
    let b = runs.get(0.02, T_MAX)?;
    let d_q = late_diffusion(&b.record, t_star(b)?).map_err(|e| e.to_string())?.d_q;
    let predicted = crossover_time(&TheoryInputs::new(0.02, 1.0, d_q).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let strong = b.record.slin_series();
    let mut diffs: Vec<f64> = weak
        .iter()
        .zip(&strong)
        .filter(|((t, _), _)| *t >= 1.0 && *t < predicted / 2.0)
        .map(|((_, s1), (_, s2))| {
            let (a, b) = (s1 / 0.01f64.powi(2), s2 / 0.02f64.powi(2));
            (a - b).abs() / b
        })
        .collect();
    if diffs.is_empty() {
        return Err("no samples below t*/2".into());
    }
    diffs.sort_by(f64::total_cmp);
    let median = diffs[diffs.len() / 2];
    verdict(
        median < 0.1,
        format!("median |Δ|/S of S_lin/ξ² over {} samples with t < {:.0}: {median:.3}", diffs.len(), predicted / 2.0),
    )
}

fn distributions(runs: &mut Runs) -> Check {
    let a = runs.get(0.05, T_MAX)?;
    let r = regimes(a)?;
    let (tb, ts) = match (r.t_b, r.t_star_numeric) {
        (Some(b), Some(s)) => (b as f64, s),
        _ => return Err("no IDL window detected".into()),
    };
    let centre = (tb * ts).sqrt();
    let idl_time = IDL_MARGINALS
        .iter()
        .copied()
        .filter(|&t| (t as f64) >= tb && (t as f64) <= ts)
        .min_by(|x, y| ((*x as f64) - centre).abs().total_cmp(&((*y as f64) - centre).abs()))
        .ok_or("no marginal inside the IDL window")?;
    let late_time = *LATE_MARGINALS.last().unwrap();
    if (late_time as f64) < 2.0 * ts {
        return Err("last marginal precedes the diffusive window".into());
    }
    let find = |t: u64, basis: Basis| {
        a.record
            .marginals
            .iter()
            .find(|m| m.time == t && m.axis == Axis::First && m.basis == basis)
            .ok_or(format!("missing marginal at t={t}"))
    };
    let fits = |t: u64| -> std::result::Result<(f64, f64), String> {
        let m = find(t, Basis::Momentum)?;
        let e = fit_distribution(m, FitModel::Exponential).map_err(|e| e.to_string())?;
        let g = fit_distribution(m, FitModel::Gaussian).map_err(|e| e.to_string())?;
        Ok((e.residual, g.residual))
    };
    let (idl_exp, idl_gauss) = fits(idl_time)?;
    let (late_exp, late_gauss) = fits(late_time)?;
    let shrink = find(idl_time, Basis::Position)?.max_uniform_deviation()
        / find(late_time, Basis::Position)?.max_uniform_deviation();
    verdict(
        idl_exp < idl_gauss && late_gauss < late_exp && late_gauss < 0.2 && shrink >= 3.0,
        format!(
            "t={idl_time}: exp {idl_exp:.3} gauss {idl_gauss:.3}; t={late_time}: exp {late_exp:.3} gauss {late_gauss:.3}; position deviation shrinks {shrink:.1}x"
        ),
    )
}

fn decoherence_profile(runs: &mut Runs) -> Check {
    let a = runs.get(0.05, T_MAX)?;
    let r = regimes(a)?;
    let ts = t_star(a)?;
    let tb = r.t_b.ok_or("no break time")? as f64;
    let ratio = a.record.dcoh_ratio_series();
    let exp = fit_timeseries(&ratio, FitModel::Exponential, (tb, ts)).map_err(|e| e.to_string())?;
    let pow = fit_timeseries(&ratio, FitModel::PowerLaw, (3.0 * ts, T_MAX as f64)).map_err(|e| e.to_string())?;
    let alpha = pow.params[0];

    let z = runs.get(0.0, 8000)?;
    let zr = z.record.dcoh_ratio_series();
    let tb0 = regimes(z)?.t_b.ok_or("no break time without coupling")? as f64;
    let at_tb = zr
        .iter()
        .rev()
        .find(|(t, _)| *t <= tb0)
        .map_or(f64::NAN, |p| p.1);
    let mean = |lo: f64, hi: f64| {
        let v: Vec<f64> = zr.iter().filter(|(t, _)| *t >= lo && *t <= hi).map(|p| p.1).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let plateau = mean(2000.0, 4000.0) / mean(4000.0, 8000.0);
    let uncoupled = at_tb > 2.0 && (plateau - 1.0).abs() < 0.15;
    verdict(
        exp.r_squared > 0.9 && within(alpha, -0.7, -0.3) && uncoupled,
        format!(
            "exponential on [{tb:.0}, {ts:.0}] R² {:.3}; power law beyond {:.0} exponent {alpha:.3}; uncoupled 𝒟(t_b)/𝒟(0) {at_tb:.1}, plateau ratio {plateau:.3}",
            exp.r_squared,
            3.0 * ts
        ),
    )
}

fn classical() -> Check {
    let mut detail = Vec::new();
    let mut pass = true;
    for k in [9.0, 10.0] {
        let params = SystemParams::new(k, k, 0.0, 1.0).map_err(|e| e.to_string())?;
        let l = lyapunov(&params, 10_000, 10, 0).map_err(|e| e.to_string())?;
        let target = (k / 2.0f64).ln();
        let rel = (l.exponent - target).abs() / target;
        pass &= rel < 0.1;
        detail.push(format!("λ(K={k}) = {:.4} vs {target:.4}", l.exponent));
    }
    let e = ensemble_energy(&Ensemble::uniform(10_000, 0), &SystemParams::baseline(0.0), 200)
        .map_err(|e| e.to_string())?;
    let rel = (e.d_cl - 20.25).abs() / 20.25;
    pass &= rel < 0.25;
    detail.push(format!("D_cl(K=9) = {:.2} vs 20.25 ({:.0}%)", e.d_cl, 100.0 * rel));

    let params = SystemParams::new(9.0, 10.0, 0.3, 1.0).map_err(|e| e.to_string())?;
    let s = ClassicalState {
        x1: 2.3,
        x2: 0.9,
        p1: -1.4,
        p2: 3.7,
    };
    let coords = |c: &ClassicalState| [c.x1, c.x2, c.p1, c.p2];
    let build = |v: [f64; 4]| ClassicalState {
        x1: v[0],
        x2: v[1],
        p1: v[2],
        p2: v[3],
    };
    let h = 1e-5;
    let mut fd = [[0.0; 4]; 4];
    let mut tangent = [[0.0; 4]; 4];
    for j in 0..4 {
        let (mut plus, mut minus) = (coords(&s), coords(&s));
        plus[j] += h;
        minus[j] -= h;
        let (p, m) = (coords(&classical_step(&build(plus), &params)), coords(&classical_step(&build(minus), &params)));
        let mut e = [0.0; 4];
        e[j] = 1.0;
        let column = tangent_step(&s, &params, e);
        for i in 0..4 {
            fd[i][j] = (p[i] - m[i]) / (2.0 * h);
            tangent[i][j] = column[i];
        }
    }
    let (det_fd, det_tangent) = (common::det4(fd), common::det4(tangent));
    pass &= (det_fd - 1.0).abs() < 1e-8 && (det_tangent - 1.0).abs() < 1e-8;
    detail.push(format!("det J = 1 {:+.1e} (finite differences), 1 {:+.1e} (tangent)", det_fd - 1.0, det_tangent - 1.0));
    verdict(pass, detail.join("; "))
}

fn husimi_consistency(runs: &mut Runs) -> Check {
    let (d_q, t) = (20.0, 100.0);
    let rho = common::gaussian_rho(1024, d_q * t);
    let p_max = 4.0 * (d_q * t + 1.0).sqrt();
    let lattice = HusimiLattice::new(64, 256, -p_max, p_max);
    let h = husimi(&rho, &lattice, 0.5f64.sqrt()).map_err(|e| e.to_string())?;
    let synthetic = husimi_linear_entropy(&h, &lattice, 1.0);
    let expected = asymptotic_slin(t, 1.0, d_q);
    let rel = (synthetic - expected).abs() / expected;

    let a = runs.get(0.1, T_MAX)?;
    let from = 2.0 * t_star(a)?;
    let schmidt_at = |t: u64| a.record.rows.iter().find(|r| r.t == t).and_then(|r| r.slin);
    let gaps: Vec<(u64, f64)> = a
        .record
        .husimi
        .iter()
        .filter(|(t, _)| *t as f64 >= from)
        .filter_map(|(t, value)| schmidt_at(*t).map(|s| (*t, (value - s).abs())))
        .collect();
    let widest = gaps.iter().copied().max_by(|x, y| x.1.total_cmp(&y.1));
    // the judged state is the last one, deepest in the diffusive regime
    let Some(&(t_final, gap)) = gaps.last() else {
        return Err(format!("no Husimi samples after t = {from:.0}"));
    };
    verdict(
        rel < 0.02 && gap < 0.05,
        format!(
            "synthetic {synthetic:.5} vs {expected:.5} ({:.2}%); ξ=0.1 |Husimi − Schmidt| {gap:.4} at t={t_final} (widest after 2t* = {from:.0}: {:.4} at t={})",
            100.0 * rel,
            widest.map_or(0.0, |w| w.1),
            widest.map_or(0, |w| w.0),
        ),
    )
}

fn harness_contracts() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut config = RunConfig::baseline(32, 0.1, 120);
    config.schedule = ScheduleConfig {
        spacing: Spacing::Linear,
        count: 40,
        times: Vec::new(),
    };
    config.probes.marginal_times = vec![60, 120];
    config.output = Some(dir.path().join("run"));
    config.checkpoint = Some(CheckpointConfig {
        every: 50,
        path: Some(dir.path().join("ckpt.bin")),
    });
    let text = serialize_config(&config).map_err(|e| e.to_string())?;
    let config_ok = parse_config(&text).map_err(|e| e.to_string())? == config;

    let straight = run(&config).map_err(|e| e.to_string())?;
    let (loaded, _) = load_record(&dir.path().join("run")).map_err(|e| e.to_string())?;
    let csv_ok = loaded == straight.record;

    let options = RunOptions {
        resume_from: None,
        stop_at: Some(77),
    };
    run_with(&config, &options).map_err(|e| e.to_string())?;
    let saved_t = read_checkpoint(&dir.path().join("ckpt.bin")).map_err(|e| e.to_string())?.t;
    let resumed = run_with(
        &config,
        &RunOptions {
            resume_from: Some(dir.path().join("ckpt.bin")),
            stop_at: None,
        },
    )
    .map_err(|e| e.to_string())?;
    let resume_ok = saved_t == 77 && resumed.record == straight.record;

    let again = run(&config).map_err(|e| e.to_string())?;
    let rerun_ok = again.record == straight.record;
    verdict(
        config_ok && csv_ok && resume_ok && rerun_ok,
        format!("config {config_ok}, csv {csv_ok}, checkpoint-resume {resume_ok}, rerun {rerun_ok}"),
    )
}

fn main() {
    let mut runs = Runs {
        cache_dir: std::env::var_os("CKR_ACCEPTANCE_CACHE").map(PathBuf::from),
        done: HashMap::new(),
    };
    let criteria: Vec<(&str, Box<dyn FnOnce(&mut Runs) -> Check>)> = vec![
        ("C1 unitarity and factorization", Box::new(|_| unitarity())),
        ("C2 dense oracle equivalence", Box::new(|_| oracle_equivalence())),
        ("C3 dynamical localization", Box::new(localization)),
        ("C4 three regimes and IDL ordering", Box::new(three_regimes)),
        ("C5 logarithmic entropy slope", Box::new(log_entropy)),
        ("C6 linear-rate exponent", Box::new(rate_exponent)),
        ("C7 crossover formula vs numerics", Box::new(crossover)),
        ("C8 ξ² collapse of S_lin", Box::new(collapse)),
        ("C9 distribution shapes", Box::new(distributions)),
        ("C10 decoherence profile", Box::new(decoherence_profile)),
        ("C11 classical module", Box::new(|_| classical())),
        ("C12 Husimi consistency", Box::new(husimi_consistency)),
        ("C13 harness contracts", Box::new(|_| harness_contracts())),
    ];
    let started = Instant::now();
    let mut failed = 0;
    for (name, check) in criteria {
        let t0 = Instant::now();
        let (status, detail) = match check(&mut runs) {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{status} {name}: {detail} [{:.1}s]", t0.elapsed().as_secs_f64());
    }
    println!(
        "acceptance: {}/13 passed in {:.0}s",
        13 - failed,
        started.elapsed().as_secs_f64()
    );
    if failed > 0 && std::env::var_os("CKR_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}

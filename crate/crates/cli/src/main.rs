//! `ckr`: run, sweep and summarize coupled kicked rotor simulations.

use std::path::PathBuf;
use std::process::ExitCode;

use ckr_core::harness::{
    classical_diffusion, load_config, report, run_classical, run_with, summarize, sweep, RunOptions, RunSummary,
    SweepAxis,
};
use ckr_core::{crossover_time, Result, TheoryInputs};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "ckr", version, about = "Coupled quantum kicked rotors: simulation and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve one configuration and write its run directory.
    Run {
        config: PathBuf,
        /// Override the output directory from the config.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Continue from a checkpoint written by the same configuration.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Stop after this many periods and write a checkpoint.
        #[arg(long)]
        stop_at: Option<u64>,
    },
    /// Run one configuration per value along an axis.
    Sweep {
        config: PathBuf,
        #[arg(long, value_enum)]
        axis: AxisArg,
        #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Classical diffusion and Lyapunov exponent for the configured kicks.
    Classical { config: PathBuf },
    /// Closed-form crossover time.
    PredictTstar {
        #[arg(long)]
        xi: f64,
        #[arg(long)]
        dq: f64,
        #[arg(long, default_value_t = 1.0)]
        hbar: f64,
        /// Early slope of the correlation function.
        #[arg(long, default_value_t = 1.0)]
        c_slope: f64,
    },
    /// Summaries of saved run directories.
    Report {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Xi12,
    HbarS,
    K1k2,
}

impl From<AxisArg> for SweepAxis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::Xi12 => SweepAxis::Xi12,
            AxisArg::HbarS => SweepAxis::HbarS,
            AxisArg::K1k2 => SweepAxis::K1K2,
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
}

fn print_summary(label: &str, s: &RunSummary) {
    println!(
        "{label}: t_b={} t*={} t*_pred={} rate={} D_q={} D_cl={:.4}",
        s.regimes.t_b.map_or("-".into(), |t| t.to_string()),
        fmt_opt(s.t_star_numeric()),
        fmt_opt(s.t_star_predicted),
        s.linear_rate().map_or("-".into(), |r| format!("{r:.4e}")),
        fmt_opt(s.d_q.as_ref().map(|d| d.d_q)),
        s.d_cl,
    );
    for note in &s.notes {
        println!("  note: {note}");
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            output,
            resume,
            stop_at,
        } => {
            let mut config = load_config(&config)?;
            if output.is_some() {
                config.output = output;
            }
            let out = run_with(
                &config,
                &RunOptions {
                    resume_from: resume,
                    stop_at,
                },
            )?;
            println!(
                "reached t={} of {} with {} samples in {:.1}s",
                out.reached,
                config.t_max,
                out.record.rows.len(),
                out.provenance.wall_time_s
            );
            if let Some(t) = out.record.first_breach {
                println!("momentum edge population exceeded its limit at t={t}; later rows are flagged");
            }
            if out.reached == config.t_max {
                if let Some(dir) = &config.output {
                    println!("wrote {}", dir.display());
                }
                let d_cl = classical_diffusion(&config)?.d_cl;
                match summarize(&out.record, d_cl, &config.regimes) {
                    Ok(s) => print_summary("summary", &s),
                    Err(e) => println!("no regime summary: {e}"),
                }
            }
        }
        Command::Sweep {
            config,
            axis,
            values,
            workers,
        } => {
            let base = load_config(&config)?;
            let report = sweep(&base, axis.into(), &values, workers)?;
            for row in &report.rows {
                let label = format!("{}={}", report.axis.name(), row.value);
                match (&row.summary, &row.error) {
                    (Some(s), _) => print_summary(&label, s),
                    (None, Some(e)) => println!("{label}: failed: {e}"),
                    (None, None) => println!("{label}: no result"),
                }
            }
            if let Some(beta) = report.rate_exponent {
                println!("rate exponent β = {beta:.4}");
            }
        }
        Command::Classical { config } => {
            let config = load_config(&config)?;
            let r = run_classical(&config)?;
            println!(
                "D_cl = {:.4} ± {:.4} (K1²/4 = {:.4})",
                r.energy.d_cl, r.energy.d_cl_std_error, r.quasilinear_d
            );
            println!(
                "lyapunov = {:.4} ± {:.4} (ln(K1/2) = {:.4}){}",
                r.lyapunov.exponent,
                r.lyapunov.std_error,
                r.standard_map_lyapunov,
                if r.lyapunov.converged { "" } else { ", not converged" }
            );
        }
        Command::PredictTstar { xi, dq, hbar, c_slope } => {
            let inputs = TheoryInputs::new(xi, hbar, dq)?.with_c_slope(c_slope)?;
            println!("{}", crossover_time(&inputs)?);
        }
        Command::Report { paths } => {
            for (dir, summary) in report(&paths)? {
                print_summary(&dir.display().to_string(), &summary);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! Command-line front end.
//!
//! Exit codes: 0 success, 1 validation error, 2 numerical guard (truncation,
//! no maximum, no excitation), 3 i/o or checksum error. Numbers on stdout use
//! scientific notation with 12 significant digits.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::{DemonError, Result};
use crate::experiments::{
    list_configs, load_config, oracle_check, reproduce_figure, run_experiment, sweep, FigureId,
    MANIFEST_FILE,
};
use crate::fock::{auto_n_max, moments, thermal_distribution, MomentSummary, DEFAULT_LEAK_TOL};
use crate::jc::{
    first_local_optimal_theta_nonlinear, optimal_theta_linear, OptimumReport, SearchOptions,
};

/// Environment variable that overrides the Monte-Carlo seed of `oracle-check`.
pub const SEED_ENV: &str = "DEMON_SIM_SEED";
/// Automatic truncation of `thermal-stats`: tight enough that the printed
/// 12 digits are those of the untruncated state.
const STATS_LEAK_TOL: f64 = 1e-16;

#[derive(Debug, Parser)]
#[command(
    name = "demon-sim",
    version,
    about = "Heralded phonon subtraction by linear and two-quantum Jaynes-Cummings coupling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print mean, variance, g2, Fano factor and mean-to-deviation ratio of a thermal state.
    ThermalStats {
        /// Mean occupation.
        #[arg(long)]
        nbar: f64,
        /// Truncation level; 0 picks one automatically.
        #[arg(long, default_value_t = 0)]
        n_max: usize,
    },
    /// Optimal interaction angle for a thermal state.
    Optimize {
        /// Mean occupation.
        #[arg(long)]
        nbar: f64,
        /// Truncation level; 0 picks one automatically.
        #[arg(long, default_value_t = 0)]
        n_max: usize,
        /// Report the first local maximum of the two-quantum excitation probability.
        #[arg(long)]
        nonlinear: bool,
    },
    /// Execute the schedule of a JSON config and write trajectory files.
    Run {
        /// Config file.
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config's `outputs`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regenerate the data behind a figure.
    Reproduce {
        /// fig3, fig4, fig5, fig6, fig7 or appendix.
        #[arg(long, value_parser = parse_figure)]
        figure: FigureId,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a config's schedule against the dense oracle and Monte Carlo.
    OracleCheck {
        /// Config file; `n_max` must be at most 256.
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config's `outputs`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every *.json config in a directory.
    Sweep {
        /// Directory of config files.
        #[arg(long)]
        configs: PathBuf,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
}

fn parse_figure(s: &str) -> std::result::Result<FigureId, String> {
    s.parse().map_err(|e: DemonError| e.to_string())
}

fn num(x: f64) -> String {
    format!("{x:.11e}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_else(|| "undefined".into())
}

fn print_moments(out: &mut dyn Write, s: &MomentSummary) -> std::io::Result<()> {
    writeln!(out, "mean={}", num(s.mean))?;
    writeln!(out, "variance={}", num(s.variance))?;
    writeln!(out, "g2={}", opt_num(s.g2))?;
    writeln!(out, "fano={}", opt_num(s.fano))?;
    writeln!(out, "mdr={}", num(s.mdr))
}

fn print_optimum(out: &mut dyn Write, r: &OptimumReport) -> std::io::Result<()> {
    let kind = serde_json::to_value(r.kind).expect("kind serializes");
    writeln!(out, "kind={}", kind.as_str().unwrap_or_default())?;
    writeln!(out, "theta_star={}", num(r.theta_star.value()))?;
    writeln!(out, "p_success={}", num(r.p_success))?;
    writeln!(out, "seed_theta={}", num(r.seed_theta.value()))
}

fn thermal_for(nbar: f64, n_max: usize, tol: f64) -> Result<crate::fock::FockDistribution> {
    if !(nbar.is_finite() && nbar >= 0.0) {
        return Err(DemonError::Domain(format!(
            "--nbar {nbar} must be finite and >= 0"
        )));
    }
    let n_max = if n_max == 0 {
        auto_n_max(nbar, tol)
    } else {
        n_max
    };
    thermal_distribution(nbar, n_max)
}

fn seed_override(default: u64) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(text) => text.trim().parse().map_err(|_| {
            DemonError::ConfigInvalid(vec![format!(
                "{SEED_ENV}: {text:?} is not an unsigned integer"
            )])
        }),
        Err(_) => Ok(default),
    }
}

fn config_out(
    config: &Path,
    out: Option<PathBuf>,
) -> Result<(crate::experiments::ExperimentConfig, PathBuf)> {
    let cfg = load_config(config)?;
    let dir = out
        .or_else(|| cfg.outputs.clone())
        .expect("load_config resolves outputs");
    Ok((cfg, dir))
}

fn execute(command: Command, out: &mut dyn Write) -> Result<i32> {
    let io = |e: std::io::Error| DemonError::io("<stdout>", e);
    match command {
        Command::ThermalStats { nbar, n_max } => {
            let dist = thermal_for(nbar, n_max, STATS_LEAK_TOL)?;
            print_moments(out, &moments(&dist)).map_err(io)?;
            writeln!(out, "n_max={}", dist.n_max()).map_err(io)?;
            writeln!(out, "leak={}", num(dist.leak())).map_err(io)?;
        }
        Command::Optimize {
            nbar,
            n_max,
            nonlinear,
        } => {
            let dist = thermal_for(nbar, n_max, DEFAULT_LEAK_TOL)?;
            let opts = SearchOptions::default();
            let report = if nonlinear {
                first_local_optimal_theta_nonlinear(&dist, &opts)?
            } else {
                optimal_theta_linear(&dist, &opts)?
            };
            print_optimum(out, &report).map_err(io)?;
        }
        Command::Run { config, out: dir } => {
            let (cfg, dir) = config_out(&config, dir)?;
            let manifest = run_experiment(&cfg, &dir)?;
            for key in [
                "final_mean",
                "final_variance",
                "final_mdr",
                "final_charge",
                "mass_production",
            ] {
                if let Some(v) = manifest.summary.get(key).and_then(|v| v.as_f64()) {
                    writeln!(out, "{key}={}", num(v)).map_err(io)?;
                }
            }
            writeln!(out, "manifest={}", dir.join(MANIFEST_FILE).display()).map_err(io)?;
        }
        Command::Reproduce { figure, out: dir } => {
            let manifest = reproduce_figure(figure, &dir)?;
            writeln!(out, "figure={figure}").map_err(io)?;
            writeln!(out, "files={}", manifest.outputs.len()).map_err(io)?;
            writeln!(out, "manifest={}", dir.join(MANIFEST_FILE).display()).map_err(io)?;
        }
        Command::OracleCheck { config, out: dir } => {
            let (cfg, dir) = config_out(&config, dir)?;
            let seed = seed_override(cfg.seed)?;
            let (report, _) = oracle_check(&cfg, seed, &dir)?;
            for r in &report.equivalence.rounds {
                writeln!(
                    out,
                    "round={} kind={} sup_norm={}",
                    r.round,
                    r.kind.symbol(),
                    num(r.sup_norm)
                )
                .map_err(io)?;
            }
            writeln!(out, "max_sup_norm={}", num(report.equivalence.max_sup_norm)).map_err(io)?;
            if let Some(mc) = &report.montecarlo {
                writeln!(out, "mc_seed={}", mc.seed).map_err(io)?;
                writeln!(out, "mc_total_variation={}", num(mc.total_variation)).map_err(io)?;
            }
            writeln!(out, "pass={}", report.pass).map_err(io)?;
            if !report.pass {
                return Ok(2);
            }
        }
        Command::Sweep { configs, jobs } => {
            let paths = list_configs(&configs)?;
            let report = sweep(&paths, jobs)?;
            let mut code = 0;
            for e in &report.entries {
                match (&e.output_dir, &e.error) {
                    (Some(dir), None) => {
                        writeln!(out, "ok {} -> {}", e.config.display(), dir.display())
                            .map_err(io)?
                    }
                    (_, err) => {
                        writeln!(
                            out,
                            "error {}: {}",
                            e.config.display(),
                            err.as_deref().unwrap_or("unknown")
                        )
                        .map_err(io)?;
                        if code == 0 {
                            code = e.exit_code;
                        }
                    }
                }
            }
            writeln!(
                out,
                "succeeded={} failed={}",
                report.succeeded(),
                report.failed()
            )
            .map_err(io)?;
            return Ok(code);
        }
    }
    Ok(0)
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn dispatch_with<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(rendered.as_bytes())
            } else {
                err.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

/// [`dispatch_with`] on the process's standard streams.
pub fn dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    dispatch_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

//! Config-driven runs, oracle checks, sweeps and figure-data pipelines.
//!
//! Every pipeline writes plain CSV files plus a `manifest.json` that records
//! the inputs, the tool version and a SHA-256 checksum of each output.

mod config;
mod figures;
mod manifest;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{DemonError, Result};
use crate::fock::FockDistribution;
use crate::oracle::{montecarlo_protocol, recursion_equivalence_check, EquivalenceReport};
use crate::protocols::{
    charge_performance, fmt_statistic, mass_production, run_schedule_with, ProtocolTrajectory,
    RunOptions, DEFAULT_LEAK_BUDGET,
};

pub use config::{
    load_config, ExperimentConfig, FigureId, DEFAULT_MASS_K, DEFAULT_SEED, SCHEMA_VERSION,
};
pub use figures::{
    fig6_variants, main_peak_stats, reproduce_figure, strict_local_minima, MainPeak,
};
pub use manifest::{
    sha256_file, verify_manifest, Manifest, OutputEntry, MANIFEST_FILE, MANIFEST_SCHEMA_VERSION,
    TOOL_VERSION,
};

/// Monte-Carlo agreement required by `oracle-check`, in total variation.
pub const MC_TV_TOL: f64 = 5e-3;

pub(crate) fn write_file(
    dir: &Path,
    name: &str,
    text: &str,
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| DemonError::io(&path, e))?;
    files.push(path);
    Ok(())
}

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| DemonError::io(dir, e))
}

fn config_json(config: &ExperimentConfig) -> serde_json::Value {
    serde_json::to_value(config).expect("config serializes")
}

/// Charge performance before the first round and after each round.
pub fn charge_table(
    trajectory: &ProtocolTrajectory,
    config: &ExperimentConfig,
) -> Result<Vec<(usize, f64, f64)>> {
    let dists = std::iter::once(&trajectory.initial_dist)
        .chain(trajectory.rounds.iter().map(|r| &r.dist_after));
    dists
        .enumerate()
        .map(|(n, d)| {
            let r = charge_performance(d, &config.search)?;
            Ok((n, r.theta_star.value(), r.p_success))
        })
        .collect()
}

/// Runs the config's schedule and writes `rounds.csv`, `dist_<N>.csv`,
/// `charge.csv`, `summary.json` and the manifest into `out_dir`.
///
/// A `figure` key only supplies defaults; use [`reproduce_figure`] for the
/// figure pipelines.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<Manifest> {
    config.validate()?;
    let schedule = config.parsed_schedule()?;
    let initial = config.initial().map_err(|e| e.in_stage("initial state"))?;
    let opts = RunOptions {
        search: config.search,
        leak_budget: DEFAULT_LEAK_BUDGET,
    };
    let trajectory =
        run_schedule_with(&initial, &schedule, &opts).map_err(|e| e.in_stage("schedule"))?;
    let charges = charge_table(&trajectory, config).map_err(|e| e.in_stage("charging"))?;

    create_dir(out_dir)?;
    let mut files = trajectory.write_csv(out_dir)?;
    let mut csv = String::from("round,theta_star,charge,mass_production\n");
    for (n, theta, p) in &charges {
        let _ = writeln!(
            csv,
            "{n},{theta:e},{p:e},{:e}",
            mass_production(*p, config.mass_k)?
        );
    }
    write_file(out_dir, "charge.csv", &csv, &mut files)?;

    let final_moments = crate::fock::moments(trajectory.final_dist());
    let final_charge = charges.last().map(|c| c.2).unwrap_or(f64::NAN);
    let summary = serde_json::json!({
        "schedule": schedule.shorthand(),
        "protocol": config.protocol.to_string(),
        "nbar": config.nbar,
        "n_max": initial.n_max(),
        "final_mean": final_moments.mean,
        "final_variance": final_moments.variance,
        "final_g2": fmt_statistic(final_moments.g2),
        "final_mdr": final_moments.mdr,
        "final_charge": final_charge,
        "mass_k": config.mass_k,
        "mass_production": mass_production(final_charge, config.mass_k)?,
        "final_leak": trajectory.final_dist().leak(),
    });
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    write_file(out_dir, "summary.json", &text, &mut files)?;
    Manifest::write(out_dir, "run", config_json(config), summary, &files)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloCheck {
    pub n_traj: usize,
    pub seed: u64,
    pub total_variation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheckReport {
    pub equivalence: EquivalenceReport,
    pub montecarlo: Option<MonteCarloCheck>,
    pub pass: bool,
}

/// Cross-checks the config's schedule against the dense oracle and, when
/// `mc_trajectories > 0`, against Monte-Carlo sampling with `seed`.
/// Writes `oracle_report.json` and a manifest into `out_dir`.
pub fn oracle_check(
    config: &ExperimentConfig,
    seed: u64,
    out_dir: &Path,
) -> Result<(OracleCheckReport, Manifest)> {
    config.validate()?;
    let schedule = config.parsed_schedule()?;
    let initial = config.initial().map_err(|e| e.in_stage("initial state"))?;
    let equivalence = recursion_equivalence_check(&initial, &schedule, &config.search)
        .map_err(|e| e.in_stage("oracle equivalence"))?;
    let montecarlo = if config.mc_trajectories > 0 {
        let opts = RunOptions {
            search: config.search,
            leak_budget: 1.0,
        };
        let exact = run_schedule_with(&initial, &schedule, &opts)
            .map_err(|e| e.in_stage("ensemble run"))?;
        let sampled: FockDistribution = montecarlo_protocol(
            &initial,
            &schedule,
            config.mc_trajectories,
            seed,
            &config.search,
        )
        .map_err(|e| e.in_stage("monte carlo"))?;
        let tv = sampled.total_variation(exact.final_dist());
        Some(MonteCarloCheck {
            n_traj: config.mc_trajectories,
            seed,
            total_variation: tv,
            tolerance: MC_TV_TOL,
            pass: tv <= MC_TV_TOL,
        })
    } else {
        None
    };
    let pass = equivalence.pass && montecarlo.as_ref().is_none_or(|m| m.pass);
    let report = OracleCheckReport {
        equivalence,
        montecarlo,
        pass,
    };
    create_dir(out_dir)?;
    let mut files = Vec::new();
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    write_file(out_dir, "oracle_report.json", &text, &mut files)?;
    let summary = serde_json::json!({ "pass": report.pass });
    let manifest = Manifest::write(
        out_dir,
        "oracle-check",
        config_json(config),
        summary,
        &files,
    )?;
    Ok((report, manifest))
}

/// Outcome of one config in a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub config: PathBuf,
    pub output_dir: Option<PathBuf>,
    pub error: Option<String>,
    pub exit_code: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub entries: Vec<SweepEntry>,
}

impl SweepReport {
    pub fn succeeded(&self) -> usize {
        self.entries.iter().filter(|e| e.error.is_none()).count()
    }

    pub fn failed(&self) -> usize {
        self.entries.len() - self.succeeded()
    }
}

/// `*.json` files directly inside `dir`, sorted by name.
pub fn list_configs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| DemonError::io(dir, e))? {
        let path = entry.map_err(|e| DemonError::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|x| x == "json") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Runs every config independently on up to `jobs` threads (0 = all cores).
///
/// A failing config is recorded and does not stop the others. Two configs
/// that resolve to the same output directory are both rejected.
pub fn sweep(configs: &[PathBuf], jobs: usize) -> Result<SweepReport> {
    use rayon::prelude::*;

    let loaded: Vec<Result<ExperimentConfig>> = configs.iter().map(|p| load_config(p)).collect();
    let dirs: Vec<Option<PathBuf>> = loaded
        .iter()
        .map(|c| c.as_ref().ok().and_then(|c| c.outputs.clone()))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| DemonError::Domain(format!("cannot start worker pool: {e}")))?;
    let entries = pool.install(|| {
        configs
            .par_iter()
            .zip(loaded.into_par_iter())
            .enumerate()
            .map(|(i, (path, config))| {
                let result = config.and_then(|c| {
                    let dir = c.outputs.clone().expect("load_config resolves outputs");
                    let clash = dirs
                        .iter()
                        .enumerate()
                        .any(|(j, d)| j != i && d.as_ref() == Some(&dir));
                    if clash {
                        return Err(DemonError::ConfigInvalid(vec![format!(
                            "outputs: {} is shared with another config in the sweep",
                            dir.display()
                        )]));
                    }
                    run_experiment(&c, &dir).map(|_| dir)
                });
                match result {
                    Ok(dir) => SweepEntry {
                        config: path.clone(),
                        output_dir: Some(dir),
                        error: None,
                        exit_code: 0,
                    },
                    Err(e) => SweepEntry {
                        config: path.clone(),
                        output_dir: None,
                        error: Some(e.to_string()),
                        exit_code: e.exit_code(),
                    },
                }
            })
            .collect()
    });
    Ok(SweepReport { entries })
}

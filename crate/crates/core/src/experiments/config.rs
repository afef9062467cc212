//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "nbar": 30.0,
//!   "n_max": 0,
//!   "schedule": "LLLLLLNN",
//!   "protocol": "II",
//!   "allow_ripple": false,
//!   "search": { "grid_points": 2048 },
//!   "outputs": "fig5_out",
//!   "mass_k": 100,
//!   "figure": "fig5",
//!   "seed": 1,
//!   "mc_trajectories": 0
//! }
//! ```
//!
//! Only `nbar`, `schedule` and `protocol` are required, and even those may be
//! omitted when `figure` names a preset. `n_max = 0` selects the automatic
//! truncation. A relative `outputs` path is resolved against the directory of
//! the config file; when absent it defaults to `<config stem>_out`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{DemonError, Result};
use crate::fock::{auto_n_max, thermal_distribution, FockDistribution, DEFAULT_LEAK_TOL};
use crate::jc::SearchOptions;
use crate::protocols::{Protocol, Schedule};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_MASS_K: u32 = 100;
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FigureId {
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Appendix,
}

impl FigureId {
    pub const ALL: [FigureId; 6] = [
        FigureId::Fig3,
        FigureId::Fig4,
        FigureId::Fig5,
        FigureId::Fig6,
        FigureId::Fig7,
        FigureId::Appendix,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FigureId::Fig3 => "fig3",
            FigureId::Fig4 => "fig4",
            FigureId::Fig5 => "fig5",
            FigureId::Fig6 => "fig6",
            FigureId::Fig7 => "fig7",
            FigureId::Appendix => "appendix",
        }
    }

    /// The representative single-schedule settings of each figure.
    pub fn preset(self) -> ExperimentConfig {
        let (schedule, protocol, nbar) = match self {
            FigureId::Fig3 | FigureId::Fig4 => ("LLLLL", Protocol::II, 30.0),
            FigureId::Fig5 | FigureId::Fig6 => ("LLLLLLNN", Protocol::II, 30.0),
            FigureId::Fig7 => ("LNN", Protocol::II, 30.0),
            FigureId::Appendix => ("L", Protocol::II, 2.0),
        };
        ExperimentConfig {
            figure: Some(self),
            ..ExperimentConfig::new(nbar, schedule, protocol)
        }
    }
}

impl FromStr for FigureId {
    type Err = DemonError;

    fn from_str(s: &str) -> Result<Self> {
        FigureId::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| {
                DemonError::Domain(format!(
                    "unknown figure {s:?}, expected one of fig3, fig4, fig5, fig6, fig7, appendix"
                ))
            })
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The file as written; every key optional so that missing keys can be
/// reported together with the other violations.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: Option<u32>,
    nbar: Option<f64>,
    n_max: Option<usize>,
    schedule: Option<String>,
    protocol: Option<String>,
    allow_ripple: Option<bool>,
    search: Option<SearchOptions>,
    outputs: Option<PathBuf>,
    mass_k: Option<u32>,
    figure: Option<FigureId>,
    seed: Option<u64>,
    mc_trajectories: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub nbar: f64,
    /// 0 selects [`auto_n_max`].
    pub n_max: usize,
    pub schedule: String,
    pub protocol: Protocol,
    pub allow_ripple: bool,
    pub search: SearchOptions,
    pub outputs: Option<PathBuf>,
    pub mass_k: u32,
    pub figure: Option<FigureId>,
    pub seed: u64,
    /// Monte-Carlo trajectories for oracle checks; 0 skips sampling.
    pub mc_trajectories: usize,
}

impl ExperimentConfig {
    pub fn new(nbar: f64, schedule: &str, protocol: Protocol) -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            nbar,
            n_max: 0,
            schedule: schedule.to_string(),
            protocol,
            allow_ripple: false,
            search: SearchOptions::default(),
            outputs: None,
            mass_k: DEFAULT_MASS_K,
            figure: None,
            seed: DEFAULT_SEED,
            mc_trajectories: 0,
        }
    }

    /// Parses and validates JSON text; `path` only labels diagnostics.
    pub fn from_json_str(text: &str, path: &Path) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| DemonError::ConfigParse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let mut problems = Vec::new();
        let preset = raw.figure.map(FigureId::preset);

        let nbar = raw.nbar.or(preset.as_ref().map(|p| p.nbar));
        let schedule = raw
            .schedule
            .or_else(|| preset.as_ref().map(|p| p.schedule.clone()));
        let protocol = match raw.protocol {
            Some(text) => match text.parse::<Protocol>() {
                Ok(p) => Some(p),
                Err(e) => {
                    problems.push(format!("protocol: {e}"));
                    Some(Protocol::II)
                }
            },
            None => preset.as_ref().map(|p| p.protocol),
        };
        if nbar.is_none() {
            problems.push("nbar: required".into());
        }
        if schedule.is_none() {
            problems.push("schedule: required".into());
        }
        if protocol.is_none() {
            problems.push("protocol: required".into());
        }

        let config = ExperimentConfig {
            schema_version: raw.schema_version.unwrap_or(SCHEMA_VERSION),
            nbar: nbar.unwrap_or(1.0),
            n_max: raw.n_max.unwrap_or(0),
            schedule: schedule.unwrap_or_default(),
            protocol: protocol.unwrap_or(Protocol::II),
            allow_ripple: raw.allow_ripple.unwrap_or(false),
            search: raw.search.unwrap_or_default(),
            outputs: raw.outputs,
            mass_k: raw.mass_k.unwrap_or(DEFAULT_MASS_K),
            figure: raw.figure,
            seed: raw.seed.unwrap_or(DEFAULT_SEED),
            mc_trajectories: raw.mc_trajectories.unwrap_or(0),
        };
        let missing_schedule =
            config.schedule.is_empty() && problems.iter().any(|p| p.starts_with("schedule"));
        problems.extend(
            config
                .violations()
                .into_iter()
                .filter(|p| !(missing_schedule && p.starts_with("schedule"))),
        );
        if problems.is_empty() {
            Ok(config)
        } else {
            Err(DemonError::ConfigInvalid(problems))
        }
    }

    /// Every violated constraint, prefixed by its key.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            out.push(format!(
                "schema_version: {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if !(self.nbar.is_finite() && self.nbar >= 0.0) {
            out.push(format!("nbar: {} must be finite and >= 0", self.nbar));
        }
        if let Err(e) = self.parsed_schedule() {
            out.push(format!("schedule: {}", e.root()));
        }
        out.extend(self.search.violations());
        if self.mass_k == 0 {
            out.push("mass_k: must be >= 1".into());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(DemonError::ConfigInvalid(v))
        }
    }

    pub fn parsed_schedule(&self) -> Result<Schedule> {
        Schedule::parse(&self.schedule, self.protocol, self.allow_ripple)
    }

    /// `n_max`, or the automatic truncation when it is 0.
    pub fn resolved_n_max(&self) -> usize {
        if self.n_max == 0 {
            auto_n_max(self.nbar, DEFAULT_LEAK_TOL)
        } else {
            self.n_max
        }
    }

    /// The thermal starting state.
    pub fn initial(&self) -> Result<FockDistribution> {
        thermal_distribution(self.nbar, self.resolved_n_max())
    }

    /// Output directory, resolved against `base` (the config's directory).
    pub fn output_dir(&self, base: &Path, stem: &str) -> PathBuf {
        match &self.outputs {
            Some(p) if p.is_absolute() => p.clone(),
            Some(p) => base.join(p),
            None => base.join(format!("{stem}_out")),
        }
    }
}

/// Reads, parses and validates a config file. The returned config has
/// `outputs` resolved to a concrete directory.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| DemonError::io(path, e))?;
    let mut config = ExperimentConfig::from_json_str(&text, path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "experiment".into());
    config.outputs = Some(config.output_dir(base, &stem));
    Ok(config)
}

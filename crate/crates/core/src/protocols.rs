//! Repeat-until-success subtraction recursions and schedule execution.
//!
//! Each round couples the oscillator ensemble to a fresh ground-state qubit
//! and keeps the oscillators whose qubit is found excited. The failed fraction
//! `1 - P` is replaced either by the initial state (Protocol I) or by the
//! round's input state (Protocol II):
//!
//! ```text
//! linear:    p'_m = p_{m+1} sin^2(theta sqrt(m+1))          + (1 - P) r_m
//! nonlinear: p'_m = p_{m+2} sin^2(theta sqrt((m+2)(m+1)))   + (1 - P) r_m
//! ```
//!
//! Levels past `n_max` are not represented. Their mass (the leak) never
//! shifts back into the window, so it behaves as failed mass and the new leak
//! is `(1 - P) * leak(r)`.

use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{DemonError, Result};
use crate::fock::{moments, FockDistribution, MomentSummary};
use crate::jc::{
    excitation_probability_linear, excitation_probability_nonlinear,
    first_local_optimal_theta_nonlinear, linear_success_weight, nonlinear_success_weight,
    optimal_theta_linear, InteractionAngle, OptimumReport, SearchOptions,
};

/// Abort threshold on leaked probability during a run.
pub const DEFAULT_LEAK_BUDGET: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StepKind {
    #[serde(rename = "L")]
    Linear,
    #[serde(rename = "N")]
    Nonlinear,
}

impl StepKind {
    pub fn symbol(self) -> char {
        match self {
            StepKind::Linear => 'L',
            StepKind::Nonlinear => 'N',
        }
    }

    /// Quanta removed by one successful step.
    pub fn quanta(self) -> usize {
        match self {
            StepKind::Linear => 1,
            StepKind::Nonlinear => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReplacementPolicy {
    /// Protocol I.
    ReplaceWithInitial,
    /// Protocol II.
    ReplaceWithPrevious,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    I,
    II,
}

impl Protocol {
    pub fn policy(self) -> ReplacementPolicy {
        match self {
            Protocol::I => ReplacementPolicy::ReplaceWithInitial,
            Protocol::II => ReplacementPolicy::ReplaceWithPrevious,
        }
    }
}

impl FromStr for Protocol {
    type Err = DemonError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" | "1" => Ok(Protocol::I),
            "II" | "2" => Ok(Protocol::II),
            other => Err(DemonError::Schedule(format!(
                "unknown protocol {other:?}, expected \"I\" or \"II\""
            ))),
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::I => "I",
            Protocol::II => "II",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSpec {
    pub kind: StepKind,
    pub policy: ReplacementPolicy,
    /// Fixed angle; when absent the optimal angle is searched on the step's input.
    pub theta_override: Option<InteractionAngle>,
}

impl StepSpec {
    pub fn new(kind: StepKind, policy: ReplacementPolicy) -> Self {
        StepSpec {
            kind,
            policy,
            theta_override: None,
        }
    }

    pub fn with_theta(mut self, theta: InteractionAngle) -> Self {
        self.theta_override = Some(theta);
        self
    }

    pub fn validate(&self, allow_ripple: bool) -> Result<()> {
        if self.kind == StepKind::Nonlinear
            && self.policy == ReplacementPolicy::ReplaceWithInitial
            && !allow_ripple
        {
            return Err(DemonError::Schedule(
                "nonlinear steps require replace-with-previous (Protocol II) unless allow_ripple is set"
                    .into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    steps: Vec<StepSpec>,
    allow_ripple: bool,
}

impl Schedule {
    pub fn new(steps: Vec<StepSpec>, allow_ripple: bool) -> Result<Self> {
        if steps.is_empty() {
            return Err(DemonError::Schedule("schedule has no steps".into()));
        }
        for (i, step) in steps.iter().enumerate() {
            step.validate(allow_ripple).map_err(|e| match e {
                DemonError::Schedule(msg) => DemonError::Schedule(format!("step {}: {msg}", i + 1)),
                other => other,
            })?;
        }
        Ok(Schedule {
            steps,
            allow_ripple,
        })
    }

    /// Parses the `L`/`N` shorthand, applying `protocol`'s policy to every step.
    pub fn parse(shorthand: &str, protocol: Protocol, allow_ripple: bool) -> Result<Self> {
        let steps = shorthand
            .chars()
            .enumerate()
            .map(|(i, c)| {
                let kind = match c {
                    'L' => StepKind::Linear,
                    'N' => StepKind::Nonlinear,
                    other => {
                        return Err(DemonError::Schedule(format!(
                            "character {} of {shorthand:?} is {other:?}, expected 'L' or 'N'",
                            i + 1
                        )))
                    }
                };
                Ok(StepSpec::new(kind, protocol.policy()))
            })
            .collect::<Result<Vec<_>>>()?;
        Schedule::new(steps, allow_ripple)
    }

    pub fn steps(&self) -> &[StepSpec] {
        &self.steps
    }

    pub fn allow_ripple(&self) -> bool {
        self.allow_ripple
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn shorthand(&self) -> String {
        self.steps.iter().map(|s| s.kind.symbol()).collect()
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.shorthand())
    }
}

/// Shared update: shift `current` down by `kind.quanta()` with success
/// weights, then add the failed fraction of `replacement`.
fn subtract(
    current: &FockDistribution,
    replacement: &FockDistribution,
    theta: InteractionAngle,
    kind: StepKind,
) -> Result<(FockDistribution, f64)> {
    if current.n_max() != replacement.n_max() {
        return Err(DemonError::Domain(format!(
            "truncation mismatch: current n_max {} vs replacement n_max {}",
            current.n_max(),
            replacement.n_max()
        )));
    }
    let p_success = match kind {
        StepKind::Linear => excitation_probability_linear(current, theta),
        StepKind::Nonlinear => excitation_probability_nonlinear(current, theta),
    };
    let fail = 1.0 - p_success;
    let shift = kind.quanta();
    let src = current.probs();
    let probs = replacement
        .probs()
        .iter()
        .enumerate()
        .map(|(m, r)| {
            let k = m + shift;
            let kept = match (kind, src.get(k)) {
                (_, None) => 0.0,
                (StepKind::Linear, Some(p)) => p * linear_success_weight(theta, k),
                (StepKind::Nonlinear, Some(p)) => p * nonlinear_success_weight(theta, k),
            };
            kept + fail * r
        })
        .collect();
    Ok((
        FockDistribution::from_raw(probs, fail * replacement.leak()),
        p_success,
    ))
}

/// One linear Protocol I round; failures are replaced by `initial`.
pub fn step_linear_i(
    current: &FockDistribution,
    initial: &FockDistribution,
    theta: InteractionAngle,
) -> Result<(FockDistribution, f64)> {
    subtract(current, initial, theta, StepKind::Linear)
}

/// One linear Protocol II round; failures keep the round's input state.
pub fn step_linear_ii(
    current: &FockDistribution,
    theta: InteractionAngle,
) -> (FockDistribution, f64) {
    subtract(current, current, theta, StepKind::Linear).expect("same truncation")
}

/// One two-quantum Protocol II round.
pub fn step_nonlinear_ii(
    current: &FockDistribution,
    theta: InteractionAngle,
) -> (FockDistribution, f64) {
    subtract(current, current, theta, StepKind::Nonlinear).expect("same truncation")
}

/// Two-quantum round with failures replaced by `initial`; only reachable
/// through schedules with `allow_ripple`.
pub fn step_nonlinear_i(
    current: &FockDistribution,
    initial: &FockDistribution,
    theta: InteractionAngle,
) -> Result<(FockDistribution, f64)> {
    subtract(current, initial, theta, StepKind::Nonlinear)
}

/// Applies one step of any kind and policy.
pub fn apply_step(
    step: &StepSpec,
    current: &FockDistribution,
    initial: &FockDistribution,
    theta: InteractionAngle,
) -> Result<(FockDistribution, f64)> {
    let replacement = match step.policy {
        ReplacementPolicy::ReplaceWithInitial => initial,
        ReplacementPolicy::ReplaceWithPrevious => current,
    };
    subtract(current, replacement, theta, step.kind)
}

/// The angle a step uses on `input`: its override, or a fresh search.
pub fn resolve_theta(
    step: &StepSpec,
    input: &FockDistribution,
    opts: &SearchOptions,
) -> Result<InteractionAngle> {
    if let Some(theta) = step.theta_override {
        return Ok(theta);
    }
    let report = match step.kind {
        StepKind::Linear => optimal_theta_linear(input, opts)?,
        StepKind::Nonlinear => first_local_optimal_theta_nonlinear(input, opts)?,
    };
    Ok(report.theta_star)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based round number.
    pub index: usize,
    pub kind: StepKind,
    pub dist_after: FockDistribution,
    /// Success probability of this round, evaluated on its input.
    pub p_success: f64,
    pub theta_used: InteractionAngle,
    pub moments_after: MomentSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolTrajectory {
    pub initial_dist: FockDistribution,
    pub rounds: Vec<RoundRecord>,
}

impl ProtocolTrajectory {
    pub fn final_dist(&self) -> &FockDistribution {
        self.rounds
            .last()
            .map(|r| &r.dist_after)
            .unwrap_or(&self.initial_dist)
    }

    /// Distribution entering round `index` (1-based).
    pub fn input_of(&self, index: usize) -> &FockDistribution {
        if index <= 1 {
            &self.initial_dist
        } else {
            &self.rounds[index - 2].dist_after
        }
    }

    pub fn rounds_csv(&self) -> String {
        let mut out = String::from("round,kind,theta,p_success,mean,variance,g2,fano,mdr,leak\n");
        for r in &self.rounds {
            let s = &r.moments_after;
            let _ = writeln!(
                out,
                "{},{},{:e},{:e},{:e},{:e},{},{},{:e},{:e}",
                r.index,
                r.kind.symbol(),
                r.theta_used.value(),
                r.p_success,
                s.mean,
                s.variance,
                fmt_statistic(s.g2),
                fmt_statistic(s.fano),
                s.mdr,
                r.dist_after.leak()
            );
        }
        out
    }

    /// Writes `rounds.csv` plus `dist_0.csv` (initial) through `dist_N.csv`.
    pub fn write_csv(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| DemonError::io(dir, e))?;
        let mut written = Vec::with_capacity(self.rounds.len() + 2);
        let rounds = dir.join("rounds.csv");
        std::fs::write(&rounds, self.rounds_csv()).map_err(|e| DemonError::io(&rounds, e))?;
        written.push(rounds);
        let initial = dir.join("dist_0.csv");
        self.initial_dist.write_csv(&initial)?;
        written.push(initial);
        for r in &self.rounds {
            let path = dir.join(format!("dist_{}.csv", r.index));
            r.dist_after.write_csv(&path)?;
            written.push(path);
        }
        Ok(written)
    }
}

pub(crate) fn fmt_statistic(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:e}"),
        None => "NaN".into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub search: SearchOptions,
    /// Abort once any round's leak exceeds this.
    pub leak_budget: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            search: SearchOptions::default(),
            leak_budget: DEFAULT_LEAK_BUDGET,
        }
    }
}

/// Executes `schedule` from `initial` with the default leak budget.
pub fn run_schedule(
    initial: &FockDistribution,
    schedule: &Schedule,
    opts: &SearchOptions,
) -> Result<ProtocolTrajectory> {
    run_schedule_with(
        initial,
        schedule,
        &RunOptions {
            search: *opts,
            leak_budget: DEFAULT_LEAK_BUDGET,
        },
    )
}

pub fn run_schedule_with(
    initial: &FockDistribution,
    schedule: &Schedule,
    opts: &RunOptions,
) -> Result<ProtocolTrajectory> {
    opts.search.validate()?;
    initial
        .check_leak(opts.leak_budget)
        .map_err(|e| e.in_round(0))?;
    let mut rounds: Vec<RoundRecord> = Vec::with_capacity(schedule.len());
    for (i, step) in schedule.steps().iter().enumerate() {
        let index = i + 1;
        let current = rounds.last().map(|r| &r.dist_after).unwrap_or(initial);
        let theta = resolve_theta(step, current, &opts.search).map_err(|e| e.in_round(index))?;
        let (dist_after, p_success) =
            apply_step(step, current, initial, theta).map_err(|e| e.in_round(index))?;
        dist_after
            .check_leak(opts.leak_budget)
            .map_err(|e| e.in_round(index))?;
        let moments_after = moments(&dist_after);
        rounds.push(RoundRecord {
            index,
            kind: step.kind,
            dist_after,
            p_success,
            theta_used: theta,
            moments_after,
        });
    }
    Ok(ProtocolTrajectory {
        initial_dist: initial.clone(),
        rounds,
    })
}

/// Best linear excitation probability a battery qubit reaches from `dist`.
pub fn charge_performance(dist: &FockDistribution, opts: &SearchOptions) -> Result<OptimumReport> {
    optimal_theta_linear(dist, opts)
}

/// Probability that `k` independent batteries are all charged, `p^k`.
pub fn mass_production(p: f64, k: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(DemonError::Domain(format!(
            "probability {p} outside [0, 1]"
        )));
    }
    if k == 0 {
        return Err(DemonError::Domain("batch size must be >= 1".into()));
    }
    Ok(p.powi(k as i32))
}

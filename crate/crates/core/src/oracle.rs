//! Independent validators for the ensemble recursion.
//!
//! The joint qubit-oscillator state is propagated as a dense density matrix
//! under the closed-form block unitary and projectively measured, and
//! individual repeat-until-success trajectories are sampled by Monte Carlo.
//! Neither path shares arithmetic with the recursion in `protocols`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DemonError, Result};
use crate::fock::FockDistribution;
use crate::jc::{InteractionAngle, SearchOptions};
use crate::protocols::{apply_step, resolve_theta, ReplacementPolicy, Schedule, StepKind};

/// Largest truncation the dense oracle accepts.
pub const ORACLE_MAX_N: usize = 256;
/// Per-round agreement required of the recursion.
pub const EQUIVALENCE_TOL: f64 = 1e-12;
const ZERO_OUTCOME: f64 = 1e-300;

/// Density matrix on `{|g,m>, |e,m>}`; `|g,m>` is index `m` and `|e,m>` is
/// index `n_max + 1 + m`. `trace + leak = 1`.
#[derive(Debug, Clone)]
pub struct JointState {
    pub rho: DMatrix<Complex64>,
    pub n_max: usize,
    pub leak: f64,
}

impl JointState {
    /// `|g><g|` tensored with the diagonal oscillator state `dist`.
    pub fn ground_product(dist: &FockDistribution) -> Result<Self> {
        let n_max = dist.n_max();
        if n_max > ORACLE_MAX_N {
            return Err(DemonError::Domain(format!(
                "oracle supports n_max <= {ORACLE_MAX_N}, got {n_max}"
            )));
        }
        let dim = 2 * (n_max + 1);
        let mut rho = DMatrix::zeros(dim, dim);
        for (m, p) in dist.probs().iter().enumerate() {
            rho[(m, m)] = Complex64::new(*p, 0.0);
        }
        Ok(JointState {
            rho,
            n_max,
            leak: dist.leak(),
        })
    }

    pub fn dim(&self) -> usize {
        2 * (self.n_max + 1)
    }

    pub fn ground_index(&self, m: usize) -> usize {
        m
    }

    pub fn excited_index(&self, m: usize) -> usize {
        self.n_max + 1 + m
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    /// Largest `|rho - rho^dagger|` entry.
    pub fn hermiticity_error(&self) -> f64 {
        (&self.rho - self.rho.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.rho + self.rho.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Block unitary of one- or two-quantum exchange on the truncated space.
///
/// Each pair `|g,m>`, `|e,m-q>` rotates by `theta sqrt(m)` (linear, `q = 1`)
/// or `theta sqrt(m(m-1))` (nonlinear, `q = 2`). Levels whose partner lies
/// above `n_max` are left untouched.
pub fn jc_unitary(n_max: usize, theta: InteractionAngle, kind: StepKind) -> DMatrix<Complex64> {
    let dim = 2 * (n_max + 1);
    let q = kind.quanta();
    let mut u = DMatrix::<Complex64>::identity(dim, dim);
    for m in q..=n_max {
        let mf = m as f64;
        let angle = match kind {
            StepKind::Linear => theta.value() * mf.sqrt(),
            StepKind::Nonlinear => theta.value() * (mf * (mf - 1.0)).sqrt(),
        };
        let g = m;
        let e = n_max + 1 + (m - q);
        let (s, c) = angle.sin_cos();
        u[(g, g)] = Complex64::new(c, 0.0);
        u[(e, e)] = Complex64::new(c, 0.0);
        u[(e, g)] = Complex64::new(0.0, -s);
        u[(g, e)] = Complex64::new(0.0, -s);
    }
    u
}

/// `rho -> U rho U^dagger`.
pub fn jc_apply(state: &JointState, theta: InteractionAngle, kind: StepKind) -> JointState {
    let u = jc_unitary(state.n_max, theta, kind);
    JointState {
        rho: &u * &state.rho * u.adjoint(),
        n_max: state.n_max,
        leak: state.leak,
    }
}

fn project(state: &JointState, offset: usize) -> (f64, Vec<f64>) {
    let diag: Vec<f64> = (0..=state.n_max)
        .map(|m| state.rho[(offset + m, offset + m)].re)
        .collect();
    (diag.iter().sum(), diag)
}

fn conditioned(state: &JointState, offset: usize) -> Result<(f64, FockDistribution)> {
    let (p, diag) = project(state, offset);
    if p < ZERO_OUTCOME {
        return Err(DemonError::ZeroProbabilityOutcome);
    }
    let probs = diag.into_iter().map(|x| x / p).collect();
    Ok((p, FockDistribution::from_raw(probs, 0.0)))
}

/// Probability of finding the qubit excited and the oscillator state
/// conditioned on it.
pub fn measure_excited(state: &JointState) -> Result<(f64, FockDistribution)> {
    conditioned(state, state.n_max + 1)
}

/// Probability of finding the qubit in the ground state and the conditional
/// oscillator state (with the leaked mass renormalized along with it).
pub fn measure_ground(state: &JointState) -> Result<(f64, FockDistribution)> {
    let (p, dist) = conditioned(state, 0)?;
    let leak = state.leak / p;
    Ok((p, FockDistribution::from_raw(dist.probs().to_vec(), leak)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundDistance {
    pub round: usize,
    pub kind: StepKind,
    pub theta: f64,
    pub p_success_recursion: f64,
    pub p_success_oracle: f64,
    pub sup_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub schedule: String,
    pub n_max: usize,
    pub tolerance: f64,
    pub rounds: Vec<RoundDistance>,
    pub max_sup_norm: f64,
    pub pass: bool,
}

/// One oracle round: evolve, keep the excited branch, mix in the policy's
/// replacement for the failed fraction.
fn oracle_round(
    input: &FockDistribution,
    replacement: &FockDistribution,
    theta: InteractionAngle,
    kind: StepKind,
) -> Result<(FockDistribution, f64)> {
    let evolved = jc_apply(&JointState::ground_product(input)?, theta, kind);
    let (p_e, success) = match measure_excited(&evolved) {
        Ok(hit) => hit,
        Err(DemonError::ZeroProbabilityOutcome) => (
            0.0,
            FockDistribution::from_raw(vec![0.0; input.n_max() + 1], 0.0),
        ),
        Err(e) => return Err(e),
    };
    let fail = 1.0 - p_e;
    let probs = success
        .probs()
        .iter()
        .zip(replacement.probs())
        .map(|(s, r)| p_e * s + fail * r)
        .collect();
    Ok((
        FockDistribution::from_raw(probs, fail * replacement.leak()),
        p_e,
    ))
}

/// Runs `schedule` through the recursion and through the dense oracle side by
/// side and reports the per-round sup-norm distance of the distributions.
///
/// Both sides use the angle the recursion resolves for each round. Inputs
/// with nothing to excite fall back to `pi/2`, which leaves either side
/// unchanged. No leak budget applies here.
pub fn recursion_equivalence_check(
    initial: &FockDistribution,
    schedule: &Schedule,
    opts: &SearchOptions,
) -> Result<EquivalenceReport> {
    if initial.n_max() > ORACLE_MAX_N {
        return Err(DemonError::Domain(format!(
            "oracle supports n_max <= {ORACLE_MAX_N}, got {}",
            initial.n_max()
        )));
    }
    let mut recursion = initial.clone();
    let mut oracle = initial.clone();
    let mut rounds = Vec::with_capacity(schedule.len());
    for (i, step) in schedule.steps().iter().enumerate() {
        let index = i + 1;
        let theta = match resolve_theta(step, &recursion, opts) {
            Ok(t) => t,
            Err(DemonError::NoExcitationPossible) => InteractionAngle::new(FRAC_PI_2)?,
            Err(e) => return Err(e.in_round(index)),
        };
        let (next_rec, p_rec) =
            apply_step(step, &recursion, initial, theta).map_err(|e| e.in_round(index))?;
        let replacement = match step.policy {
            ReplacementPolicy::ReplaceWithInitial => initial,
            ReplacementPolicy::ReplaceWithPrevious => &oracle,
        };
        let (next_orc, p_orc) =
            oracle_round(&oracle, replacement, theta, step.kind).map_err(|e| e.in_round(index))?;
        rounds.push(RoundDistance {
            round: index,
            kind: step.kind,
            theta: theta.value(),
            p_success_recursion: p_rec,
            p_success_oracle: p_orc,
            sup_norm: next_rec.sup_distance(&next_orc),
        });
        recursion = next_rec;
        oracle = next_orc;
    }
    let max_sup_norm = rounds.iter().map(|r| r.sup_norm).fold(0.0, f64::max);
    Ok(EquivalenceReport {
        schedule: schedule.shorthand(),
        n_max: initial.n_max(),
        tolerance: EQUIVALENCE_TOL,
        rounds,
        max_sup_norm,
        pass: max_sup_norm <= EQUIVALENCE_TOL,
    })
}

/// Population slot for a sample that fell beyond the truncation.
const LEAKED: usize = usize::MAX;

/// Inverse-CDF sampler over levels plus the leak outcome.
struct LevelSampler {
    cdf: Vec<f64>,
}

impl LevelSampler {
    fn new(dist: &FockDistribution) -> Self {
        let mut acc = 0.0;
        let cdf = dist
            .probs()
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        LevelSampler { cdf }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let i = self.cdf.partition_point(|c| *c <= u);
        if i == self.cdf.len() {
            LEAKED
        } else {
            i
        }
    }
}

fn rng_for(seed: u64, round: u64, trajectory: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&round.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(trajectory);
    rng
}

fn histogram(population: &[usize], n_max: usize) -> FockDistribution {
    let mut counts = vec![0u64; n_max + 1];
    let mut leaked = 0u64;
    for &m in population {
        match counts.get_mut(m) {
            Some(c) => *c += 1,
            None => leaked += 1,
        }
    }
    let n = population.len() as f64;
    FockDistribution::from_raw(
        counts.into_iter().map(|c| c as f64 / n).collect(),
        leaked as f64 / n,
    )
}

/// Samples `n_traj` oscillators through `schedule` one round at a time and
/// returns the empirical final distribution.
///
/// Each round's angle is resolved from the empirical distribution entering
/// it. A trajectory at level `m` succeeds with its sin^2 weight and loses one
/// or two quanta; on failure it is replaced by a fresh draw from `initial`
/// (Protocol I) or a copy of a uniformly chosen member of the round's input
/// population (Protocol II). Leaked samples never succeed. Trajectory `k` in
/// round `r` draws from the ChaCha8 stream `k` keyed by `(seed, r)`, so the
/// result does not depend on thread scheduling.
pub fn montecarlo_protocol(
    initial: &FockDistribution,
    schedule: &Schedule,
    n_traj: usize,
    seed: u64,
    opts: &SearchOptions,
) -> Result<FockDistribution> {
    if n_traj == 0 {
        return Err(DemonError::Domain("n_traj must be >= 1".into()));
    }
    let n_max = initial.n_max();
    let fresh = LevelSampler::new(initial);
    let mut population: Vec<usize> = (0..n_traj as u64)
        .into_par_iter()
        .map(|k| fresh.sample(&mut rng_for(seed, 0, k)))
        .collect();

    for (i, step) in schedule.steps().iter().enumerate() {
        let round = i as u64 + 1;
        let empirical = histogram(&population, n_max);
        let theta = match resolve_theta(step, &empirical, opts) {
            Ok(t) => t,
            Err(DemonError::NoExcitationPossible) => InteractionAngle::new(FRAC_PI_2)?,
            Err(e) => return Err(e.in_round(round as usize)),
        };
        let weight = |m: usize| -> f64 {
            let mf = m as f64;
            let arg = match step.kind {
                StepKind::Linear => mf.sqrt(),
                StepKind::Nonlinear if m >= 2 => (mf * (mf - 1.0)).sqrt(),
                StepKind::Nonlinear => 0.0,
            };
            (theta.value() * arg).sin().powi(2)
        };
        let q = step.kind.quanta();
        let before = &population;
        population = (0..n_traj)
            .into_par_iter()
            .map(|k| {
                let mut rng = rng_for(seed, round, k as u64);
                let m = before[k];
                let u: f64 = rng.random();
                if m != LEAKED && u < weight(m) {
                    return m - q;
                }
                match step.policy {
                    ReplacementPolicy::ReplaceWithInitial => fresh.sample(&mut rng),
                    ReplacementPolicy::ReplaceWithPrevious => before[rng.random_range(0..n_traj)],
                }
            })
            .collect();
    }
    Ok(histogram(&population, n_max))
}

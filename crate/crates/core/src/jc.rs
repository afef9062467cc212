//! Excitation probabilities for one- and two-quantum Jaynes-Cummings coupling
//! and the search for optimal interaction angles.
//!
//! All dynamics are expressed through the dimensionless angle
//! `theta = coupling * time`. A qubit starting in `|g>` and coupled to a
//! diagonal oscillator state is excited with probability
//! `sum_m p_m sin^2(theta sqrt(m))` (linear) or
//! `sum_{m>=2} p_m sin^2(theta sqrt(m(m-1)))` (nonlinear).

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dawson::dawson;
use crate::error::{DemonError, Result};
use crate::fock::{moments, FockDistribution};
use crate::search::{evaluate_grid, golden_section_max, local_maxima};

/// Dimensionless product of coupling strength and interaction time.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct InteractionAngle(f64);

impl InteractionAngle {
    pub fn new(theta: f64) -> Result<Self> {
        if theta.is_finite() && theta >= 0.0 {
            Ok(InteractionAngle(theta))
        } else {
            Err(DemonError::Domain(format!(
                "interaction angle {theta} must be finite and >= 0"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for InteractionAngle {
    type Error = DemonError;

    fn try_from(value: f64) -> Result<Self> {
        InteractionAngle::new(value)
    }
}

impl From<InteractionAngle> for f64 {
    fn from(angle: InteractionAngle) -> f64 {
        angle.0
    }
}

impl fmt::Display for InteractionAngle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimumKind {
    Linear,
    NonlinearFirstLocal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimumReport {
    pub theta_star: InteractionAngle,
    pub p_success: f64,
    pub seed_theta: InteractionAngle,
    pub kind: OptimumKind,
}

/// Tuning of the angle searches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchOptions {
    /// Points in the initial grid of the linear search.
    pub grid_points: usize,
    /// Linear search covers `(0, window_factor * seed]`.
    pub window_factor: f64,
    /// Relative bracket width at which refinement stops.
    pub refine_tol: f64,
    /// Nonlinear scan step is `seed / scan_step_divisor`.
    pub scan_step_divisor: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            grid_points: 2048,
            window_factor: 4.0,
            refine_tol: 1e-10,
            scan_step_divisor: 256,
        }
    }
}

impl SearchOptions {
    /// Every violated constraint, prefixed by its key.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.grid_points < 8 {
            out.push(format!("search.grid_points: {} < 8", self.grid_points));
        }
        if !(self.window_factor.is_finite() && self.window_factor >= 1.0) {
            out.push(format!(
                "search.window_factor: {} must be finite and >= 1",
                self.window_factor
            ));
        }
        if !(self.refine_tol > 0.0 && self.refine_tol <= 1e-3) {
            out.push(format!(
                "search.refine_tol: {} must lie in (0, 1e-3]",
                self.refine_tol
            ));
        }
        if self.scan_step_divisor < 4 {
            out.push(format!(
                "search.scan_step_divisor: {} < 4",
                self.scan_step_divisor
            ));
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
}

#[inline]
fn linear_weight(theta: f64, m: usize) -> f64 {
    (theta * (m as f64).sqrt()).sin().powi(2)
}

#[inline]
fn nonlinear_weight(theta: f64, m: usize) -> f64 {
    let m = m as f64;
    (theta * (m * (m - 1.0)).sqrt()).sin().powi(2)
}

/// `sin^2(theta sqrt(m))`, the linear success weight of level `m`.
pub fn linear_success_weight(theta: InteractionAngle, m: usize) -> f64 {
    linear_weight(theta.0, m)
}

/// `sin^2(theta sqrt(m(m-1)))`, the two-quantum success weight of level `m`.
pub fn nonlinear_success_weight(theta: InteractionAngle, m: usize) -> f64 {
    nonlinear_weight(theta.0, m)
}

fn linear_pe(dist: &FockDistribution, theta: f64) -> f64 {
    dist.probs()
        .iter()
        .enumerate()
        .skip(1)
        .map(|(m, p)| p * linear_weight(theta, m))
        .sum()
}

fn nonlinear_pe(dist: &FockDistribution, theta: f64) -> f64 {
    dist.probs()
        .iter()
        .enumerate()
        .skip(2)
        .map(|(m, p)| p * nonlinear_weight(theta, m))
        .sum()
}

pub fn excitation_probability_linear(dist: &FockDistribution, theta: InteractionAngle) -> f64 {
    linear_pe(dist, theta.0)
}

pub fn excitation_probability_nonlinear(dist: &FockDistribution, theta: InteractionAngle) -> f64 {
    nonlinear_pe(dist, theta.0)
}

/// `pi / (2 sqrt(<n> + 1))`.
pub fn seed_theta_linear(dist: &FockDistribution) -> InteractionAngle {
    InteractionAngle(PI / (2.0 * (moments(dist).mean + 1.0).sqrt()))
}

/// `pi / (2 <n>)`; infinite for the vacuum.
pub fn seed_theta_nonlinear(dist: &FockDistribution) -> f64 {
    PI / (2.0 * moments(dist).mean)
}

/// Maximizes the linear excitation probability over `(0, window_factor * seed]`.
///
/// A coarse grid locates every local maximum within 1e-3 of the best grid
/// value; each is refined by golden-section search. Among refined maxima that
/// tie to 1e-12 the smallest angle wins.
pub fn optimal_theta_linear(
    dist: &FockDistribution,
    opts: &SearchOptions,
) -> Result<OptimumReport> {
    opts.validate()?;
    if dist.support_mass_from(1) <= 0.0 {
        return Err(DemonError::NoExcitationPossible);
    }
    let seed = seed_theta_linear(dist).0;
    let upper = opts.window_factor * seed;
    let g = opts.grid_points;
    let points: Vec<f64> = (0..=g).map(|i| upper * i as f64 / g as f64).collect();
    let values = evaluate_grid(&points, |t| linear_pe(dist, t));
    let grid_best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut best = (seed, linear_pe(dist, seed));
    for i in local_maxima(&values) {
        if i == 0 || values[i] < grid_best - 1e-3 {
            continue;
        }
        let lo = points[i - 1];
        let hi = points[(i + 1).min(g)];
        let candidate = golden_section_max(|t| linear_pe(dist, t), lo, hi, opts.refine_tol);
        let better = candidate.1 > best.1 + 1e-12
            || ((candidate.1 - best.1).abs() <= 1e-12 && candidate.0 < best.0);
        if better {
            best = candidate;
        }
    }
    Ok(OptimumReport {
        theta_star: InteractionAngle(best.0),
        p_success: best.1,
        seed_theta: InteractionAngle(seed),
        kind: OptimumKind::Linear,
    })
}

/// Plateaus wider than this many scan steps are reported at their midpoint.
const PLATEAU_STEPS: usize = 3;
const SCAN_CHUNK: usize = 1024;

/// First local maximum of the nonlinear excitation probability below `pi/2`.
///
/// Scans upward from zero in steps of `seed / scan_step_divisor`, with
/// `seed = pi / (2 <n>)`, until the first strict rise is followed by a strict
/// fall, then refines inside the bracketing grid cells.
pub fn first_local_optimal_theta_nonlinear(
    dist: &FockDistribution,
    opts: &SearchOptions,
) -> Result<OptimumReport> {
    opts.validate()?;
    if dist.support_mass_from(2) <= 0.0 {
        return Err(DemonError::NoExcitationPossible);
    }
    let seed = seed_theta_nonlinear(dist);
    let step = seed / opts.scan_step_divisor as f64;
    let (theta, p) = scan_first_peak(|t| nonlinear_pe(dist, t), step, FRAC_PI_2, opts.refine_tol)?;
    Ok(OptimumReport {
        theta_star: InteractionAngle(theta),
        p_success: p,
        seed_theta: InteractionAngle(seed),
        kind: OptimumKind::NonlinearFirstLocal,
    })
}

/// Scans `f` on `k * step` for `k * step < limit` and returns the first strict
/// rise followed by a strict fall, refined by golden-section search.
fn scan_first_peak<F>(f: F, step: f64, limit: f64, refine_tol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64 + Sync,
{
    let total_steps = (limit / step).ceil() as usize;
    let theta_at = |k: usize| k as f64 * step;
    let midpoint = |a: usize, b: usize| {
        let mid = 0.5 * (theta_at(a) + theta_at(b));
        (mid, f(mid))
    };

    let mut prev = f(0.0);
    let mut rising = false;
    let mut plateau_start: Option<usize> = None;
    let mut k = 1;
    while k < total_steps {
        let end = (k + SCAN_CHUNK).min(total_steps);
        let thetas: Vec<f64> = (k..end).map(theta_at).filter(|t| *t < limit).collect();
        if thetas.is_empty() {
            break;
        }
        let values = evaluate_grid(&thetas, &f);
        for (offset, value) in values.into_iter().enumerate() {
            let idx = k + offset;
            if value > prev {
                if let Some(start) = plateau_start.take() {
                    if rising && idx - 1 - start > PLATEAU_STEPS {
                        return Ok(midpoint(start, idx - 1));
                    }
                }
                rising = true;
            } else if value == prev {
                if rising && plateau_start.is_none() {
                    plateau_start = Some(idx - 1);
                }
            } else if rising {
                let top_start = plateau_start.unwrap_or(idx - 1);
                if idx - 1 - top_start > PLATEAU_STEPS {
                    return Ok(midpoint(top_start, idx - 1));
                }
                let lo = theta_at(top_start.saturating_sub(1));
                let hi = theta_at(idx);
                return Ok(golden_section_max(&f, lo, hi, refine_tol));
            } else {
                plateau_start = None;
            }
            prev = value;
        }
        k = end;
    }
    Err(DemonError::NoLocalMaximum {
        scanned: total_steps,
    })
}

/// Large-`nbar` thermal excitation probability `x D(x)` with `x = theta sqrt(nbar)`.
pub fn semiclassical_pe(theta: InteractionAngle, nbar: f64) -> f64 {
    let x = theta.0 * nbar.sqrt();
    x * dawson(x)
}

/// Two-quantum excitation probability of a Gaussian-shaped distribution,
/// `(1 - exp(-2 theta^2 sigma^2) cos(2 theta mean)) / 2`.
pub fn gaussian_nonlinear_pe(theta: InteractionAngle, mean: f64, sigma: f64) -> Result<f64> {
    if sigma.is_nan() || sigma < 0.0 {
        return Err(DemonError::Domain(format!("sigma {sigma} must be >= 0")));
    }
    let t = theta.0;
    Ok(0.5 * (1.0 - (-2.0 * t * t * sigma * sigma).exp() * (2.0 * t * mean).cos()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{fock_distribution, thermal_distribution};

    fn angle(t: f64) -> InteractionAngle {
        InteractionAngle::new(t).unwrap()
    }

    #[test]
    fn angle_rejects_bad_values() {
        assert!(InteractionAngle::new(-0.1).is_err());
        assert!(InteractionAngle::new(f64::NAN).is_err());
        assert!(InteractionAngle::new(f64::INFINITY).is_err());
    }

    #[test]
    fn fock_state_full_excitation() {
        for n in 1..12 {
            let d = fock_distribution(n, 16).unwrap();
            let t = angle(PI / (2.0 * (n as f64).sqrt()));
            assert!((excitation_probability_linear(&d, t) - 1.0).abs() < 1e-15);
            for theta in [0.1, 0.77, 2.3] {
                assert_eq!(
                    excitation_probability_linear(&d, angle(theta)),
                    (theta * (n as f64).sqrt()).sin().powi(2)
                );
            }
        }
        let two = fock_distribution(2, 8).unwrap();
        let t = angle(PI / (2.0 * 2f64.sqrt()));
        assert!((excitation_probability_nonlinear(&two, t) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ground_levels_never_couple() {
        let vac = fock_distribution(0, 8).unwrap();
        let low = FockDistribution::from_parts(vec![0.4, 0.6, 0.0], 0.0).unwrap();
        for theta in [0.0, 0.3, 1.0, 10.0] {
            assert_eq!(excitation_probability_linear(&vac, angle(theta)), 0.0);
            assert_eq!(excitation_probability_nonlinear(&low, angle(theta)), 0.0);
        }
        assert!(matches!(
            optimal_theta_linear(&vac, &SearchOptions::default()),
            Err(DemonError::NoExcitationPossible)
        ));
        assert!(matches!(
            first_local_optimal_theta_nonlinear(
                &fock_distribution(1, 8).unwrap(),
                &SearchOptions::default()
            ),
            Err(DemonError::NoExcitationPossible)
        ));
    }

    #[test]
    fn seed_plug_in() {
        let t = thermal_distribution(3.0, 200).unwrap();
        assert!((seed_theta_linear(&t).value() - PI / 4.0).abs() < 1e-10);
        let f = fock_distribution(8, 10).unwrap();
        assert!((seed_theta_linear(&f).value() - PI / 6.0).abs() < 1e-15);
    }

    #[test]
    fn fock_optimum_is_first_peak() {
        let d = fock_distribution(9, 12).unwrap();
        let r = optimal_theta_linear(&d, &SearchOptions::default()).unwrap();
        assert!((r.theta_star.value() - PI / 6.0).abs() < 1e-8, "{:?}", r);
        assert!((r.p_success - 1.0).abs() < 1e-15);
        assert_eq!(r.kind, OptimumKind::Linear);
    }

    #[test]
    fn nonlinear_fock_first_peak() {
        let d = fock_distribution(4, 10).unwrap();
        let r = first_local_optimal_theta_nonlinear(&d, &SearchOptions::default()).unwrap();
        assert!((r.theta_star.value() - PI / (2.0 * 12f64.sqrt())).abs() < 1e-8);
        assert!((r.p_success - 1.0).abs() < 1e-15);
        assert!(r.theta_star.value() < FRAC_PI_2);
    }

    #[test]
    fn nonlinear_bell_shape_near_seed() {
        // Discrete Gaussian, mean 28, sigma 6.
        let probs: Vec<f64> = (0..=120)
            .map(|m| (-((m as f64 - 28.0).powi(2)) / 72.0).exp())
            .collect();
        let z: f64 = probs.iter().sum();
        let d = FockDistribution::from_parts(probs.iter().map(|p| p / z).collect(), 0.0).unwrap();
        let r = first_local_optimal_theta_nonlinear(&d, &SearchOptions::default()).unwrap();
        let target = PI / 56.0;
        assert!(
            ((r.theta_star.value() - target) / target).abs() < 0.1,
            "{:?}",
            r
        );
    }

    #[test]
    fn plateau_rule_reports_midpoint() {
        // Flat top on [1, 2], ten scan steps wide.
        let tent = |t: f64| t.min(1.0) - (t - 2.0).max(0.0);
        let (theta, p) = scan_first_peak(tent, 0.1, 10.0, 1e-10).unwrap();
        assert!((theta - 1.5).abs() < 1e-12, "{theta}");
        assert_eq!(p, 1.0);

        // A two-step plateau is still refined as an ordinary bracket.
        let narrow = |t: f64| t.min(1.0) - (t - 1.2).max(0.0);
        let (theta, p) = scan_first_peak(narrow, 0.1, 10.0, 1e-10).unwrap();
        assert!((1.0..=1.2).contains(&theta));
        assert_eq!(p, 1.0);
    }

    #[test]
    fn monotone_curve_has_no_local_maximum() {
        let r = scan_first_peak(|t: f64| t, 0.01, FRAC_PI_2, 1e-10);
        assert!(matches!(r, Err(DemonError::NoLocalMaximum { .. })));
    }

    #[test]
    fn nonlinear_two_level_mixture() {
        let d = FockDistribution::from_parts(vec![0.5, 0.0, 0.5], 0.0).unwrap();
        let r = first_local_optimal_theta_nonlinear(&d, &SearchOptions::default()).unwrap();
        assert!((r.theta_star.value() - PI / (2.0 * 2f64.sqrt())).abs() < 1e-8);
        assert!((r.p_success - 0.5).abs() < 1e-14);
    }

    #[test]
    fn search_options_validation() {
        let bad = SearchOptions {
            grid_points: 2,
            window_factor: 0.5,
            refine_tol: 0.0,
            scan_step_divisor: 1,
        };
        assert_eq!(bad.violations().len(), 4);
        assert!(SearchOptions::default().validate().is_ok());
    }

    #[test]
    fn gaussian_closed_form_limits() {
        assert_eq!(gaussian_nonlinear_pe(angle(0.0), 10.0, 3.0).unwrap(), 0.0);
        let p = gaussian_nonlinear_pe(angle(PI / 20.0), 10.0, 0.0).unwrap();
        assert!((p - 1.0).abs() < 1e-15);
        assert!(gaussian_nonlinear_pe(angle(0.1), 10.0, -1.0).is_err());
    }

    #[test]
    fn semiclassical_optimum_location() {
        let nbar: f64 = 400.0;
        let g = 30_000;
        let (mut best_x, mut best) = (0.0, 0.0);
        for i in 1..=g {
            let x = 3.0 * i as f64 / g as f64;
            let v = semiclassical_pe(angle(x / nbar.sqrt()), nbar);
            if v > best {
                best = v;
                best_x = x;
            }
        }
        assert!((best_x - 1.502).abs() < 1e-3, "{best_x}");
        assert_eq!(semiclassical_pe(angle(0.0), nbar), 0.0);
    }
}

//! Diagonal oscillator states over a truncated Fock basis.
//!
//! A [`FockDistribution`] holds the populations of levels `0..=n_max` and the
//! probability mass that lies beyond the truncation (`leak`). Leakage is never
//! folded back into the populations; `sum(probs) + leak == 1` is the invariant.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{DemonError, Result};

/// Tolerance on `|1 - sum(probs) - leak|`.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Default ceiling on truncation leakage for constructed initial states.
pub const DEFAULT_LEAK_TOL: f64 = 1e-9;

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FockDistribution {
    probs: Vec<f64>,
    leak: f64,
}

impl FockDistribution {
    /// Builds a distribution from raw populations, validating every invariant.
    pub fn from_parts(probs: Vec<f64>, leak: f64) -> Result<Self> {
        if probs.len() < 2 {
            return Err(DemonError::Domain(format!(
                "need at least two Fock levels, got {}",
                probs.len()
            )));
        }
        if let Some((m, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(DemonError::Domain(format!(
                "population p[{m}] = {p} is not a nonnegative finite number"
            )));
        }
        if !leak.is_finite() || leak < 0.0 {
            return Err(DemonError::Domain(format!("leak {leak} must be >= 0")));
        }
        let dist = FockDistribution { probs, leak };
        let err = dist.normalization_error();
        if err > NORMALIZATION_TOL {
            return Err(DemonError::Domain(format!(
                "populations plus leak deviate from 1 by {err:e}"
            )));
        }
        Ok(dist)
    }

    /// Internal constructor for values produced by exact recursions.
    pub(crate) fn from_raw(probs: Vec<f64>, leak: f64) -> Self {
        debug_assert!(probs.iter().all(|p| *p >= 0.0));
        FockDistribution { probs, leak }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn leak(&self) -> f64 {
        self.leak
    }

    pub fn get(&self, m: usize) -> f64 {
        self.probs.get(m).copied().unwrap_or(0.0)
    }

    /// Probability mass held inside the truncation window.
    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn normalization_error(&self) -> f64 {
        (1.0 - self.total() - self.leak).abs()
    }

    /// Mass on levels `m >= from`.
    pub fn support_mass_from(&self, from: usize) -> f64 {
        self.probs.iter().skip(from).sum()
    }

    /// Mass on levels strictly above `m`, including truncation leakage.
    pub fn tail_above(&self, m: usize) -> f64 {
        self.probs.iter().skip(m + 1).sum::<f64>() + self.leak
    }

    pub fn check_leak(&self, tol: f64) -> Result<()> {
        if self.leak > tol {
            Err(DemonError::Truncation {
                leak: self.leak,
                budget: tol,
            })
        } else {
            Ok(())
        }
    }

    /// Largest absolute difference between populations (and leaks).
    pub fn sup_distance(&self, other: &FockDistribution) -> f64 {
        let n = self.probs.len().max(other.probs.len());
        let pops = (0..n)
            .map(|m| (self.get(m) - other.get(m)).abs())
            .fold(0.0, f64::max);
        pops.max((self.leak - other.leak).abs())
    }

    /// Total-variation distance, counting leakage as one extra outcome.
    pub fn total_variation(&self, other: &FockDistribution) -> f64 {
        let n = self.probs.len().max(other.probs.len());
        let pops: f64 = (0..n).map(|m| (self.get(m) - other.get(m)).abs()).sum();
        0.5 * (pops + (self.leak - other.leak).abs())
    }

    /// Serializes as `m,p` rows followed by `# leak=<value>`.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.probs.len() * 24 + 32);
        out.push_str("m,p\n");
        for (m, p) in self.probs.iter().enumerate() {
            let _ = writeln!(out, "{m},{p:e}");
        }
        let _ = writeln!(out, "# leak={:e}", self.leak);
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |message: String| DemonError::Format {
            path: "<distribution csv>".into(),
            message,
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == "m,p" => {}
            other => {
                return Err(bad(format!(
                    "expected header `m,p`, found {:?}",
                    other.map(|(_, l)| l)
                )))
            }
        }
        let mut probs = Vec::new();
        let mut leak = None;
        for (idx, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let value = rest
                    .trim()
                    .strip_prefix("leak=")
                    .ok_or_else(|| bad(format!("line {}: unknown comment", idx + 1)))?;
                leak = Some(
                    value
                        .parse::<f64>()
                        .map_err(|e| bad(format!("line {}: leak: {e}", idx + 1)))?,
                );
                continue;
            }
            if leak.is_some() {
                return Err(bad(format!("line {}: data after leak trailer", idx + 1)));
            }
            let (m, p) = line
                .split_once(',')
                .ok_or_else(|| bad(format!("line {}: expected `m,p`", idx + 1)))?;
            let m: usize = m
                .trim()
                .parse()
                .map_err(|e| bad(format!("line {}: level: {e}", idx + 1)))?;
            if m != probs.len() {
                return Err(bad(format!(
                    "line {}: expected level {}, found {m}",
                    idx + 1,
                    probs.len()
                )));
            }
            let p: f64 = p
                .trim()
                .parse()
                .map_err(|e| bad(format!("line {}: probability: {e}", idx + 1)))?;
            probs.push(p);
        }
        let leak = leak.ok_or_else(|| bad("missing `# leak=` trailer".into()))?;
        FockDistribution::from_parts(probs, leak)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| DemonError::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| DemonError::io(path, e))?;
        FockDistribution::from_csv(&text).map_err(|err| match err {
            DemonError::Format { message, .. } => DemonError::Format {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }
}

fn check_n_max(n_max: usize) -> Result<()> {
    if n_max < 1 {
        Err(DemonError::Domain("n_max must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// Thermal populations `nbar^m / (nbar+1)^(m+1)`; the tail beyond `n_max`
/// is the geometric closed form `(nbar/(nbar+1))^(n_max+1)`.
pub fn thermal_distribution(nbar: f64, n_max: usize) -> Result<FockDistribution> {
    check_n_max(n_max)?;
    if !nbar.is_finite() || nbar < 0.0 {
        return Err(DemonError::Domain(format!(
            "mean occupation {nbar} must be finite and >= 0"
        )));
    }
    let ratio = nbar / (nbar + 1.0);
    let scale = 1.0 / (nbar + 1.0);
    let ln_ratio = ratio.ln();
    let probs = (0..=n_max)
        .map(|m| {
            if m == 0 {
                scale
            } else if ratio == 0.0 {
                0.0
            } else {
                scale * (m as f64 * ln_ratio).exp()
            }
        })
        .collect();
    let leak = if ratio == 0.0 {
        0.0
    } else {
        ((n_max + 1) as f64 * ln_ratio).exp()
    };
    Ok(FockDistribution::from_raw(probs, leak))
}

/// Poisson populations `e^-mean mean^m / m!`, evaluated in log space.
pub fn poisson_distribution(mean: f64, n_max: usize) -> Result<FockDistribution> {
    check_n_max(n_max)?;
    if !mean.is_finite() || mean < 0.0 {
        return Err(DemonError::Domain(format!(
            "Poisson mean {mean} must be finite and >= 0"
        )));
    }
    if mean == 0.0 {
        return fock_distribution(0, n_max);
    }
    let ln_mean = mean.ln();
    let mut log_p = -mean;
    let mut probs = Vec::with_capacity(n_max + 1);
    probs.push(log_p.exp());
    for m in 1..=n_max {
        log_p += ln_mean - (m as f64).ln();
        probs.push(log_p.exp());
    }
    // Tail summed term by term past the window until the terms are negligible.
    let mut leak = 0.0;
    let mut m = n_max as f64;
    loop {
        m += 1.0;
        log_p += ln_mean - m.ln();
        let term = log_p.exp();
        leak += term;
        if m > mean && (term < 1e-300 || term < leak * 1e-18) {
            break;
        }
    }
    Ok(FockDistribution::from_raw(probs, leak))
}

pub fn fock_distribution(n: usize, n_max: usize) -> Result<FockDistribution> {
    check_n_max(n_max)?;
    if n > n_max {
        return Err(DemonError::Domain(format!(
            "Fock level {n} exceeds truncation n_max = {n_max}"
        )));
    }
    let mut probs = vec![0.0; n_max + 1];
    probs[n] = 1.0;
    Ok(FockDistribution::from_raw(probs, 0.0))
}

/// Truncation level for a thermal state.
///
/// The thermal tail is geometric with ratio `nbar/(nbar+1)`, so the level
/// needed for a leak below `leak_tol` grows linearly in `nbar`. The result
/// is never below `ceil(nbar + 12 sqrt(nbar+1)) + 8`.
pub fn auto_n_max(nbar: f64, leak_tol: f64) -> usize {
    let floor = (nbar + 12.0 * (nbar + 1.0).sqrt()).ceil() as usize + 8;
    if nbar <= 0.0 {
        return floor;
    }
    let ratio = nbar / (nbar + 1.0);
    let geometric = (leak_tol.ln() / ratio.ln()).ceil() as usize;
    floor.max(geometric)
}

/// Undefined statistic (`g2`, Fano factor of a vacuum state).
pub type Statistic = Option<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean: f64,
    pub variance: f64,
    /// `None` when the mean is zero.
    pub g2: Statistic,
    /// `None` when the mean is zero.
    pub fano: Statistic,
    /// `f64::INFINITY` when the variance is zero.
    pub mdr: f64,
}

/// Mean, variance, g2(0), Fano factor and mean-to-deviation ratio.
///
/// Leaked mass contributes nothing to the moments. The variance is evaluated
/// around the mean (`sum (m-mean)^2 p_m + mean^2 leak`), which equals
/// `sum m^2 p_m - mean^2` without the cancellation.
pub fn moments(dist: &FockDistribution) -> MomentSummary {
    let mean: f64 = dist
        .probs
        .iter()
        .enumerate()
        .map(|(m, p)| m as f64 * p)
        .sum();
    let central: f64 = dist
        .probs
        .iter()
        .enumerate()
        .map(|(m, p)| {
            let d = m as f64 - mean;
            d * d * p
        })
        .sum();
    let variance = (central + mean * mean * (1.0 - dist.total())).max(0.0);
    let (g2, fano) = if mean > 0.0 {
        let factorial_moment: f64 = dist
            .probs
            .iter()
            .enumerate()
            .map(|(m, p)| m as f64 * (m as f64 - 1.0) * p)
            .sum();
        (
            Some(factorial_moment / (mean * mean)),
            Some(variance / mean),
        )
    } else {
        (None, None)
    };
    let mdr = if variance > 0.0 {
        mean / variance.sqrt()
    } else {
        f64::INFINITY
    };
    MomentSummary {
        mean,
        variance,
        g2,
        fano,
        mdr,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalEnvironment {
    /// Angular frequency, rad/s.
    pub omega: f64,
    /// Kelvin.
    pub temperature: f64,
    pub hbar: f64,
    pub k_b: f64,
}

impl ThermalEnvironment {
    pub fn new(omega: f64, temperature: f64) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(DemonError::Domain(format!("omega {omega} must be > 0")));
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(DemonError::Domain(format!(
                "temperature {temperature} must be > 0"
            )));
        }
        Ok(ThermalEnvironment {
            omega,
            temperature,
            hbar: HBAR,
            k_b: K_B,
        })
    }

    /// `hbar omega / (k_B T)`.
    pub fn reduced_energy(&self) -> f64 {
        self.hbar * self.omega / (self.k_b * self.temperature)
    }
}

/// Bose-Einstein occupation `1 / (exp(hbar omega / k_B T) - 1)`.
pub fn nbar_from_temperature(env: &ThermalEnvironment) -> Result<f64> {
    let x = env.reduced_energy();
    if !x.is_finite() || x <= 0.0 {
        return Err(DemonError::Domain(format!(
            "hbar*omega/(k_B*T) = {x} is not a positive finite number"
        )));
    }
    Ok(1.0 / x.exp_m1())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn zero_temperature_thermal_is_vacuum() {
        let d = thermal_distribution(0.0, 8).unwrap();
        assert_eq!(d.probs()[0], 1.0);
        assert!(d.probs()[1..].iter().all(|p| *p == 0.0));
        assert_eq!(d.leak(), 0.0);
    }

    #[test]
    fn thermal_unit_mean_is_halving() {
        let d = thermal_distribution(1.0, 20).unwrap();
        for (m, p) in d.probs().iter().enumerate() {
            assert!(rel(*p, 0.5f64.powi(m as i32 + 1)) < 1e-14, "m={m}");
        }
        assert!(rel(d.leak(), 0.5f64.powi(21)) < 1e-14);
        assert!(d.normalization_error() < NORMALIZATION_TOL);
    }

    #[test]
    fn thermal_tail_against_direct_sum() {
        // Oracle: direct summation of the populations far past the window.
        let nbar = 30.0f64;
        let mut term = nbar.powi(121) / (nbar + 1.0).powi(122);
        let mut direct = 0.0;
        for _ in 121..20_000 {
            direct += term;
            term *= nbar / (nbar + 1.0);
        }
        let d = thermal_distribution(nbar, 400).unwrap();
        let tail = d.tail_above(120);
        assert!(rel(tail, direct) < 1e-10, "{tail} vs {direct}");
        assert!((tail - 0.0189).abs() < 5e-5);
    }

    #[test]
    fn negative_inputs_are_domain_errors() {
        assert!(matches!(
            thermal_distribution(-1.0, 8),
            Err(DemonError::Domain(_))
        ));
        assert!(matches!(
            poisson_distribution(-0.1, 8),
            Err(DemonError::Domain(_))
        ));
        assert!(matches!(
            fock_distribution(9, 8),
            Err(DemonError::Domain(_))
        ));
        assert!(thermal_distribution(1.0, 0).is_err());
    }

    #[test]
    fn poisson_zero_mean_is_vacuum() {
        let d = poisson_distribution(0.0, 5).unwrap();
        assert_eq!(d.probs()[0], 1.0);
        assert_eq!(d.leak(), 0.0);
    }

    #[test]
    fn poisson_moments() {
        for mean in [0.3, 2.0, 17.0, 28.5, 200.0] {
            let d = poisson_distribution(mean, auto_n_max(mean, 1e-12)).unwrap();
            assert!(d.normalization_error() < 1e-13);
            let s = moments(&d);
            assert!((s.g2.unwrap() - 1.0).abs() < 1e-9, "mean={mean}");
            assert!((s.fano.unwrap() - 1.0).abs() < 1e-9);
            assert!(rel(s.mdr, mean.sqrt()) < 1e-9);
        }
    }

    #[test]
    fn poisson_baseline_head_is_pinned() {
        // e^-28.5 * 28.5^m / m! for m = 0..4, from 40-digit arithmetic
        let d = poisson_distribution(28.5, 400).unwrap();
        let expected = [
            4.193_795_658_379_544_4e-13,
            1.195_231_762_638_170_2e-11,
            1.703_205_261_759_392_5e-10,
            1.618_044_998_671_423e-9,
            1.152_857_061_553_388_8e-8,
        ];
        for (m, e) in expected.iter().enumerate() {
            assert!(rel(d.probs()[m], *e) < 1e-12, "m={m}: {}", d.probs()[m]);
        }
    }

    #[test]
    fn fock_state_moments() {
        let s = moments(&fock_distribution(5, 10).unwrap());
        assert_eq!(s.mean, 5.0);
        assert_eq!(s.variance, 0.0);
        assert_eq!(s.mdr, f64::INFINITY);
        assert_eq!(s.fano, Some(0.0));
        let vac = moments(&fock_distribution(0, 10).unwrap());
        assert_eq!(vac.g2, None);
        assert_eq!(vac.fano, None);
    }

    #[test]
    fn thermal_closed_form_moments() {
        for nbar in [0.5, 1.0, 2.0, 5.0, 30.0, 100.0] {
            let d = thermal_distribution(nbar, auto_n_max(nbar, 1e-12)).unwrap();
            let s = moments(&d);
            assert!(rel(s.mean, nbar) < 1e-8, "nbar={nbar} mean={}", s.mean);
            assert!(rel(s.variance, nbar * (nbar + 1.0)) < 1e-8);
            assert!(rel(s.g2.unwrap(), 2.0) < 1e-8);
            assert!(rel(s.fano.unwrap(), nbar + 1.0) < 1e-8);
            assert!(rel(s.mdr, (nbar / (nbar + 1.0)).sqrt()) < 1e-8);
        }
    }

    #[test]
    fn tail_bound_near_e_minus_four() {
        for nbar in [10.0, 30.0, 100.0, 500.0] {
            let d = thermal_distribution(nbar, auto_n_max(nbar, 1e-12)).unwrap();
            let tail = d.tail_above((4.0 * nbar) as usize);
            assert!(rel(tail, (-4.0f64).exp()) < 0.15, "nbar={nbar} tail={tail}");
        }
    }

    #[test]
    fn auto_truncation_meets_leak_tolerance() {
        for nbar in [0.0, 0.1, 1.0, 30.0, 500.0, 1000.0] {
            let n_max = auto_n_max(nbar, DEFAULT_LEAK_TOL);
            let d = thermal_distribution(nbar, n_max).unwrap();
            assert!(d.leak() <= DEFAULT_LEAK_TOL, "nbar={nbar}");
        }
    }

    #[test]
    fn csv_round_trip_and_validation() {
        let d = thermal_distribution(3.0, 40).unwrap();
        let back = FockDistribution::from_csv(&d.to_csv()).unwrap();
        assert_eq!(back, d);

        let bad_sum = "m,p\n0,0.5\n1,0.4\n# leak=0\n";
        assert!(FockDistribution::from_csv(bad_sum).is_err());
        let negative = "m,p\n0,1.5\n1,-0.5\n# leak=0\n";
        assert!(FockDistribution::from_csv(negative).is_err());
        let no_trailer = "m,p\n0,0.5\n1,0.5\n";
        assert!(FockDistribution::from_csv(no_trailer).is_err());
        let gap = "m,p\n0,0.5\n2,0.5\n# leak=0\n";
        assert!(FockDistribution::from_csv(gap).is_err());
    }

    #[test]
    fn occupation_from_temperature() {
        let mut env = ThermalEnvironment::new(1.0, 1.0).unwrap();
        // Choose T so that hbar*omega/(k_B T) = ln 2.
        env.temperature = env.hbar * env.omega / (env.k_b * std::f64::consts::LN_2);
        assert!((nbar_from_temperature(&env).unwrap() - 1.0).abs() < 1e-12);

        env.temperature = env.hbar * env.omega / (env.k_b * 0.01);
        let nbar = nbar_from_temperature(&env).unwrap();
        // k_B T / (hbar omega) - 1/2 + x/12
        assert!((nbar - (100.0 - 0.5 + 0.01 / 12.0)).abs() < 1e-6, "{nbar}");
        assert!((nbar - 99.5).abs() < 0.01);

        env.temperature = 1e-300;
        let cold = nbar_from_temperature(&env);
        assert!(matches!(cold, Err(DemonError::Domain(_))) || cold.unwrap() == 0.0);
        env.temperature = env.hbar * env.omega / (env.k_b * 700.0);
        assert!(nbar_from_temperature(&env).unwrap() < 1e-300);

        assert!(ThermalEnvironment::new(-1.0, 1.0).is_err());
        assert!(ThermalEnvironment::new(1.0, 0.0).is_err());
    }
}

//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`). The process fails only when a
//! criterion outside `KNOWN_RED` fails; known-red criteria still print FAIL.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use demon_sim::experiments::{
    fig6_variants, list_configs, main_peak_stats, strict_local_minima, sweep, ExperimentConfig,
};
use demon_sim::fock::{auto_n_max, moments, thermal_distribution, FockDistribution};
use demon_sim::jc::{
    excitation_probability_linear, optimal_theta_linear, semiclassical_pe, InteractionAngle,
    SearchOptions,
};
use demon_sim::oracle::{montecarlo_protocol, recursion_equivalence_check};
use demon_sim::protocols::{
    apply_step, charge_performance, mass_production, run_schedule, Protocol, ReplacementPolicy,
    Schedule, StepKind, StepSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria that cannot be met by the model as stated; see the README.
/// 10: two-quantum suppression points are spaced by `pi / theta'`, so the
/// second ripple minimum sits near twice the first (about 96, not 75-85).
const KNOWN_RED: &[u32] = &[10];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn opts() -> SearchOptions {
    SearchOptions::default()
}

fn thermal(nbar: f64) -> FockDistribution {
    thermal_distribution(nbar, auto_n_max(nbar, 1e-9)).unwrap()
}

fn run(init: &FockDistribution, s: &str, p: Protocol) -> demon_sim::ProtocolTrajectory {
    run_schedule(init, &Schedule::parse(s, p, false).unwrap(), &opts()).unwrap()
}

fn charge(d: &FockDistribution) -> f64 {
    charge_performance(d, &opts()).unwrap().p_success
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let elapsed = start.elapsed();
    if elapsed > limit {
        o.pass = false;
    }
    o.detail = format!(
        "{} [{:.2}s, limit {}s]",
        o.detail,
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    o
}

fn c1_thermal_bound() -> Outcome {
    timed(Duration::from_secs(10), || {
        let p = charge(&thermal_distribution(500.0, 4000).unwrap());
        outcome(
            (p - 0.6411).abs() <= 0.002,
            format!("charge={p:.6}, target 0.6411 +/- 0.002"),
        )
    })
}

fn c2_semiclassical_optimum() -> Outcome {
    let r = optimal_theta_linear(&thermal_distribution(500.0, 4000).unwrap(), &opts()).unwrap();
    let x = r.theta_star.value() * 500f64.sqrt();
    outcome(
        (x - 1.502).abs() <= 0.03,
        format!("theta*sqrt(nbar)={x:.5}, target 1.502 +/- 0.03"),
    )
}

fn c3_seed_accuracy() -> Outcome {
    let r = optimal_theta_linear(&thermal(2.0), &opts()).unwrap();
    let rel = (r.seed_theta.value() - r.theta_star.value()).abs() / r.theta_star.value();
    outcome(
        rel <= 0.02,
        format!("relative error={rel:.5} at nbar=2, limit 0.02"),
    )
}

fn c4_protocol_ordering() -> Outcome {
    timed(Duration::from_secs(60), || {
        let init = thermal(30.0);
        let curve = |p| -> Vec<f64> {
            let tr = run(&init, "LLLLL", p);
            std::iter::once(&tr.initial_dist)
                .chain(tr.rounds.iter().map(|r| &r.dist_after))
                .map(charge)
                .collect()
        };
        let one = curve(Protocol::I);
        let two = curve(Protocol::II);
        let ordered = (1..=5).all(|n| two[n] >= one[n]);
        let monotone = |v: &[f64]| v.windows(2).all(|w| w[1] >= w[0]);
        let fmt = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:.4}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        outcome(
            ordered && monotone(&one) && monotone(&two),
            format!("I: {} | II: {}", fmt(&one), fmt(&two)),
        )
    })
}

fn c5_nonlinear_boost() -> Outcome {
    let init = thermal(30.0);
    let lin = run(&init, "LLLLLLLL", Protocol::II);
    let non = run(&init, "LLLLLLNN", Protocol::II);
    let (a, b) = (lin.final_dist(), non.final_dist());
    let (ma, mb) = (moments(a), moments(b));
    let (ca, cb) = (charge(a), charge(b));
    outcome(
        cb > ca && mb.mdr > ma.mdr && mb.variance < ma.variance,
        format!(
            "charge {cb:.5} vs {ca:.5}, MDR {:.4} vs {:.4}, variance {:.3} vs {:.3}",
            mb.mdr, ma.mdr, mb.variance, ma.variance
        ),
    )
}

fn c6_placement_ordering() -> Outcome {
    let init = thermal(30.0);
    let values: Vec<f64> = fig6_variants()
        .iter()
        .map(|(_, s)| {
            mass_production(charge(run(&init, s, Protocol::II).final_dist()), 100).unwrap()
        })
        .collect();
    let (baseline, placements) = (values[0], &values[1..]);
    let increasing = placements.windows(2).all(|w| w[1] > w[0]);
    let last = *placements.last().unwrap();
    let maximal = placements.iter().all(|&v| v <= last);
    outcome(
        increasing && maximal && last > baseline,
        format!(
            "p^100 baseline {baseline:.3e}; placements {}",
            placements
                .iter()
                .map(|x| format!("{x:.3e}"))
                .collect::<Vec<_>>()
                .join(" ")
        ),
    )
}

fn c7_oracle_equivalence() -> Outcome {
    timed(Duration::from_secs(30), || {
        let init = thermal_distribution(5.0, 64).unwrap();
        let mut worst: f64 = 0.0;
        let mut pass = true;
        for s in ["LLL", "LN", "LLNN"] {
            let sched = Schedule::parse(s, Protocol::II, false).unwrap();
            let r = recursion_equivalence_check(&init, &sched, &opts()).unwrap();
            pass &= r.pass && r.rounds.len() == s.len();
            worst = worst.max(r.max_sup_norm);
        }
        outcome(pass, format!("max sup-norm={worst:.3e}, limit 1e-12"))
    })
}

fn c8_dawson_agreement() -> Outcome {
    let nbar = 100.0;
    let dist = thermal(nbar);
    let worst = (0..=300)
        .map(|i| {
            let theta = InteractionAngle::new(i as f64 * 0.01 / nbar.sqrt()).unwrap();
            (excitation_probability_linear(&dist, theta) - semiclassical_pe(theta, nbar)).abs()
        })
        .fold(0.0, f64::max);
    outcome(
        worst <= 0.02,
        format!("max deviation={worst:.5} over x in [0,3], limit 0.02"),
    )
}

fn c9_tail() -> Outcome {
    let tail = thermal(30.0).tail_above(120);
    let reference = (-4.0f64).exp();
    let rel = (tail - reference).abs() / reference;
    outcome(
        rel <= 0.15,
        format!(
            "P(m>120)={tail:.5}, e^-4={reference:.5}, deviation {:.1}%",
            rel * 100.0
        ),
    )
}

fn c10_ripple() -> Outcome {
    let init = thermal(30.0);
    let ripple = run(&init, "LNN", Protocol::II);
    let minima = strict_local_minima(ripple.final_dist());
    let near = |lo: usize, hi: usize| minima.iter().any(|m| (lo..=hi).contains(m));
    let (first, second) = (near(40, 50), near(75, 85));
    let recovered = run(&init, "LNNLLLLLLLLNNNN", Protocol::II);
    let s = moments(recovered.final_dist());
    let peak = main_peak_stats(recovered.final_dist());
    let g2 = s.g2.unwrap();
    let recovery = peak.variance < s.mean && g2 > 1.0;
    outcome(
        first && second && recovery,
        format!(
            "minima {:?}: [40,50] {}, [75,85] {}; recovery main-peak variance {:.3} < Poisson {:.3} and g2={g2:.4} > 1: {}",
            minima.iter().filter(|&&m| m < 150).collect::<Vec<_>>(),
            yes(first),
            yes(second),
            peak.variance,
            s.mean,
            yes(recovery)
        ),
    )
}

fn yes(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "missing"
    }
}

fn random_distribution(rng: &mut ChaCha8Rng, n_max: usize) -> FockDistribution {
    let raw: Vec<f64> = (0..=n_max).map(|_| rng.random::<f64>().powi(3)).collect();
    let total: f64 = raw.iter().sum();
    FockDistribution::from_parts(raw.into_iter().map(|x| x / total).collect(), 0.0).unwrap()
}

fn c11_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);

    let init = thermal_distribution(6.0, 120).unwrap();
    let mut current = init.clone();
    let mut worst_norm: f64 = 0.0;
    for _ in 0..10_000 {
        let kind = if rng.random_bool(0.5) {
            StepKind::Linear
        } else {
            StepKind::Nonlinear
        };
        let policy = if rng.random_bool(0.5) {
            ReplacementPolicy::ReplaceWithInitial
        } else {
            ReplacementPolicy::ReplaceWithPrevious
        };
        let theta = InteractionAngle::new(rng.random_range(0.0..2.0)).unwrap();
        current = apply_step(&StepSpec::new(kind, policy), &current, &init, theta)
            .unwrap()
            .0;
        worst_norm = worst_norm.max(current.normalization_error());
    }
    let norm_ok = worst_norm <= 1e-12;

    let start = thermal(10.0);
    let sched = Schedule::parse("LLL", Protocol::II, false).unwrap();
    let exact = run_schedule(&start, &sched, &opts()).unwrap();
    let sampled = montecarlo_protocol(&start, &sched, 1_000_000, 7, &opts()).unwrap();
    let tv = sampled.total_variation(exact.final_dist());
    let tv_ok = tv <= 5e-3;

    let mut bound_ok = true;
    for _ in 0..1000 {
        let n_max = rng.random_range(1..80);
        let d = random_distribution(&mut rng, n_max);
        let theta = InteractionAngle::new(rng.random_range(0.0..10.0)).unwrap();
        bound_ok &= excitation_probability_linear(&d, theta) <= 1.0 - d.get(0) + 1e-15;
    }

    let determinism_ok = parallel_sweep_is_deterministic();
    outcome(
        norm_ok && tv_ok && bound_ok && determinism_ok,
        format!(
            "normalization drift {worst_norm:.2e}; MC total variation {tv:.2e}; P_e <= 1-p0: {}; parallel sweep byte-identical: {}",
            yes(bound_ok),
            yes(determinism_ok)
        ),
    )
}

fn parallel_sweep_is_deterministic() -> bool {
    let root = tempfile::tempdir().unwrap();
    let write_configs = |dir: &Path| {
        std::fs::create_dir_all(dir).unwrap();
        for (i, (_, s)) in fig6_variants().iter().enumerate().skip(1) {
            let c = ExperimentConfig::new(30.0, s, Protocol::II);
            let text = serde_json::to_string_pretty(&c).unwrap();
            std::fs::write(dir.join(format!("variant_{i}.json")), text).unwrap();
        }
    };
    let serial = root.path().join("serial");
    let parallel = root.path().join("parallel");
    write_configs(&serial);
    write_configs(&parallel);
    let a = sweep(&list_configs(&serial).unwrap(), 1).unwrap();
    let b = sweep(&list_configs(&parallel).unwrap(), 7).unwrap();
    if a.failed() + b.failed() > 0 || a.entries.len() != 7 {
        return false;
    }
    a.entries.iter().zip(&b.entries).all(|(x, y)| {
        let (dx, dy) = (
            x.output_dir.as_ref().unwrap(),
            y.output_dir.as_ref().unwrap(),
        );
        let mut names: Vec<_> = std::fs::read_dir(dx)
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .filter(|n| n.to_string_lossy().ends_with(".csv"))
            .collect();
        names.sort();
        !names.is_empty()
            && names
                .iter()
                .all(|n| std::fs::read(dx.join(n)).unwrap() == std::fs::read(dy.join(n)).unwrap())
    })
}

fn main() -> ExitCode {
    type Check = fn() -> Outcome;
    let criteria: [(u32, &str, Check); 11] = [
        (1, "thermal charging bound", c1_thermal_bound),
        (2, "semiclassical optimum", c2_semiclassical_optimum),
        (3, "seed angle accuracy", c3_seed_accuracy),
        (4, "protocol ordering", c4_protocol_ordering),
        (5, "nonlinear boost", c5_nonlinear_boost),
        (6, "schedule placement ordering", c6_placement_ordering),
        (7, "oracle equivalence", c7_oracle_equivalence),
        (8, "Dawson semiclassical agreement", c8_dawson_agreement),
        (9, "thermal tail", c9_tail),
        (10, "ripple reproduction", c10_ripple),
        (11, "property suites", c11_properties),
    ];
    let mut unexpected = 0;
    let mut passed = 0;
    for (id, name, check) in criteria {
        let o = check();
        let status = if o.pass { "PASS" } else { "FAIL" };
        let note = if !o.pass && KNOWN_RED.contains(&id) {
            " (known red)"
        } else {
            ""
        };
        println!("criterion {id:>2} {status}{note}: {name}: {}", o.detail);
        if o.pass {
            passed += 1;
        } else if !KNOWN_RED.contains(&id) {
            unexpected += 1;
        }
    }
    println!("acceptance: {passed}/11 pass, {unexpected} unexpected failure(s)");
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

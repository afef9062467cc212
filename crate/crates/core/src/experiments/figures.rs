//! Data pipelines behind each figure. All outputs are CSV.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, FigureId, DEFAULT_MASS_K};
use super::manifest::Manifest;
use super::{charge_table, create_dir, write_file};
use crate::error::Result;
use crate::fock::{
    auto_n_max, moments, poisson_distribution, thermal_distribution, FockDistribution,
    DEFAULT_LEAK_TOL,
};
use crate::jc::{
    excitation_probability_linear, optimal_theta_linear, semiclassical_pe, InteractionAngle,
    SearchOptions,
};
use crate::protocols::{
    charge_performance, fmt_statistic, mass_production, run_schedule, Protocol, ProtocolTrajectory,
    Schedule,
};

/// Occupation of the thermal bound row in fig4.
pub const LARGE_NBAR: f64 = 500.0;
pub const LARGE_NBAR_N_MAX: usize = 4000;
const FIG_NBAR: f64 = 30.0;
const FIG4_ROUNDS: usize = 5;

fn thermal(nbar: f64) -> Result<FockDistribution> {
    thermal_distribution(nbar, auto_n_max(nbar, DEFAULT_LEAK_TOL))
}

fn run(init: &FockDistribution, shorthand: &str, protocol: Protocol) -> Result<ProtocolTrajectory> {
    let schedule = Schedule::parse(shorthand, protocol, false)?;
    run_schedule(init, &schedule, &SearchOptions::default())
}

fn moments_row(out: &mut String, label: &str, dist: &FockDistribution) {
    let s = moments(dist);
    let _ = writeln!(
        out,
        "{label},{:e},{:e},{},{},{:e}",
        s.mean,
        s.variance,
        fmt_statistic(s.g2),
        fmt_statistic(s.fano),
        s.mdr
    );
}

/// Indices `m` with `p[m-1] > p[m] < p[m+1]`.
pub fn strict_local_minima(dist: &FockDistribution) -> Vec<usize> {
    let p = dist.probs();
    (1..p.len().saturating_sub(1))
        .filter(|&m| p[m] < p[m - 1] && p[m] < p[m + 1])
        .collect()
}

/// Statistics of the part of a distribution at `m <= 2 <n>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MainPeak {
    pub cutoff: usize,
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

pub fn main_peak_stats(dist: &FockDistribution) -> MainPeak {
    let cutoff = ((2.0 * moments(dist).mean).floor() as usize).min(dist.n_max());
    let head = &dist.probs()[..=cutoff];
    let weight: f64 = head.iter().sum();
    let mean = head
        .iter()
        .enumerate()
        .map(|(m, p)| m as f64 * p)
        .sum::<f64>()
        / weight;
    let variance = head
        .iter()
        .enumerate()
        .map(|(m, p)| (m as f64 - mean).powi(2) * p)
        .sum::<f64>()
        / weight;
    MainPeak {
        cutoff,
        weight,
        mean,
        variance,
    }
}

/// All-linear baseline followed by every placement of a consecutive `NN`
/// pair in eight rounds, labelled by the pair's positions.
pub fn fig6_variants() -> Vec<(String, String)> {
    let ordinal = |n: usize| match n {
        1 => "1st".to_string(),
        2 => "2nd".to_string(),
        3 => "3rd".to_string(),
        n => format!("{n}th"),
    };
    let mut out = vec![("linear".to_string(), "L".repeat(8))];
    for start in 0..7 {
        let mut s = vec!['L'; 8];
        s[start] = 'N';
        s[start + 1] = 'N';
        out.push((
            format!("{}+{}", ordinal(start + 1), ordinal(start + 2)),
            s.into_iter().collect(),
        ));
    }
    out
}

/// Runs one figure pipeline into `out_dir` and writes its manifest.
pub fn reproduce_figure(fig: FigureId, out_dir: &Path) -> Result<Manifest> {
    create_dir(out_dir)?;
    let mut files = Vec::new();
    let stage = fig.name();
    let summary = match fig {
        FigureId::Fig3 => fig3(out_dir, &mut files),
        FigureId::Fig4 => fig4(out_dir, &mut files),
        FigureId::Fig5 => fig5(out_dir, &mut files),
        FigureId::Fig6 => fig6(out_dir, &mut files),
        FigureId::Fig7 => fig7(out_dir, &mut files),
        FigureId::Appendix => appendix(out_dir, &mut files),
    }
    .map_err(|e| e.in_stage(stage))?;
    let inputs = serde_json::to_value(fig.preset()).expect("config serializes");
    Manifest::write(out_dir, fig.name(), inputs, summary, &files)
}

fn fig3(dir: &Path, files: &mut Vec<PathBuf>) -> Result<serde_json::Value> {
    let init = thermal(FIG_NBAR)?;
    let mut stats = String::from("protocol,stage,mean,variance,g2,fano,mdr\n");
    moments_row(&mut stats, "-,initial", &init);
    let mut summary = serde_json::Map::new();
    for protocol in [Protocol::I, Protocol::II] {
        let tr = run(&init, "LLLLL", protocol)?;
        let fin = tr.final_dist();
        let poisson = poisson_distribution(moments(fin).mean, init.n_max())?;
        let mut csv = String::from("m,initial,final,poisson\n");
        for m in 0..=init.n_max() {
            let _ = writeln!(
                csv,
                "{m},{:e},{:e},{:e}",
                init.get(m),
                fin.get(m),
                poisson.get(m)
            );
        }
        write_file(dir, &format!("fig3_protocol_{protocol}.csv"), &csv, files)?;
        moments_row(&mut stats, &format!("{protocol},final"), fin);
        moments_row(&mut stats, &format!("{protocol},poisson"), &poisson);
        summary.insert(
            format!("protocol_{protocol}"),
            serde_json::to_value(moments(fin)).unwrap(),
        );
    }
    write_file(dir, "fig3_moments.csv", &stats, files)?;
    Ok(summary.into())
}

fn fig4_grid() -> Vec<f64> {
    (1..=40).map(|i| i as f64 * 0.25).collect()
}

fn fig4(dir: &Path, files: &mut Vec<PathBuf>) -> Result<serde_json::Value> {
    let grid = fig4_grid();
    type Row = (Protocol, f64, usize, f64);
    let rows: Vec<Result<Vec<Row>>> = grid
        .par_iter()
        .map(|&nbar| {
            let init = thermal(nbar)?;
            let mut rows = Vec::new();
            for protocol in [Protocol::I, Protocol::II] {
                let config = ExperimentConfig::new(nbar, &"L".repeat(FIG4_ROUNDS), protocol);
                let tr = run_schedule(&init, &config.parsed_schedule()?, &config.search)?;
                for (n, _, p) in charge_table(&tr, &config)? {
                    rows.push((protocol, nbar, n, p));
                }
            }
            Ok(rows)
        })
        .collect();
    let mut csv = String::from("protocol,nbar,N,charge\n");
    for block in rows {
        for (protocol, nbar, n, p) in block? {
            let _ = writeln!(csv, "{protocol},{nbar},{n},{p:e}");
        }
    }
    write_file(dir, "fig4.csv", &csv, files)?;

    let refs: Vec<Result<(f64, f64)>> = grid
        .par_iter()
        .map(|&nbar| {
            let coherent = poisson_distribution(nbar, auto_n_max(nbar, DEFAULT_LEAK_TOL))?;
            Ok((
                nbar,
                charge_performance(&coherent, &SearchOptions::default())?.p_success,
            ))
        })
        .collect();
    let mut csv = String::from("nbar,coherent,inversion\n");
    for r in refs {
        let (nbar, c) = r?;
        let _ = writeln!(csv, "{nbar},{c:e},5e-1");
    }
    write_file(dir, "fig4_reference.csv", &csv, files)?;

    let large = thermal_distribution(LARGE_NBAR, LARGE_NBAR_N_MAX)?;
    let bound = charge_performance(&large, &SearchOptions::default())?;
    let scaled = bound.theta_star.value() * LARGE_NBAR.sqrt();
    let csv = format!(
        "nbar,n_max,theta_star,theta_sqrt_nbar,charge\n{LARGE_NBAR},{LARGE_NBAR_N_MAX},{:e},{scaled:e},{:e}\n",
        bound.theta_star.value(),
        bound.p_success
    );
    write_file(dir, "fig4_bound.csv", &csv, files)?;
    Ok(serde_json::json!({
        "thermal_bound": bound.p_success,
        "theta_sqrt_nbar": scaled,
    }))
}

fn fig5(dir: &Path, files: &mut Vec<PathBuf>) -> Result<serde_json::Value> {
    let init = thermal(FIG_NBAR)?;
    let opts = SearchOptions::default();
    let mut bars = String::from("scheme,bar,kind,p,input_mean,input_mdr\n");
    let mut finals = Vec::new();
    let mut summary = serde_json::Map::new();
    for (scheme, shorthand) in [("linear", "LLLLLLLL"), ("nonlinear", "LLLLLLNN")] {
        let tr = run(&init, shorthand, Protocol::II)?;
        for r in &tr.rounds {
            let s = moments(tr.input_of(r.index));
            let _ = writeln!(
                bars,
                "{scheme},{},{},{:e},{:e},{:e}",
                r.index,
                r.kind.symbol(),
                r.p_success,
                s.mean,
                s.mdr
            );
        }
        let fin = tr.final_dist().clone();
        let s = moments(&fin);
        let charge = charge_performance(&fin, &opts)?.p_success;
        let _ = writeln!(
            bars,
            "{scheme},{},C,{charge:e},{:e},{:e}",
            tr.rounds.len() + 1,
            s.mean,
            s.mdr
        );
        summary.insert(
            scheme.into(),
            serde_json::json!({"charge": charge, "mdr": s.mdr, "variance": s.variance}),
        );
        finals.push(fin);
    }
    write_file(dir, "fig5_bars.csv", &bars, files)?;
    let poisson = poisson_distribution(moments(&finals[1]).mean, init.n_max())?;
    let mut inset = String::from("m,linear,nonlinear,poisson\n");
    for m in 0..=init.n_max() {
        let _ = writeln!(
            inset,
            "{m},{:e},{:e},{:e}",
            finals[0].get(m),
            finals[1].get(m),
            poisson.get(m)
        );
    }
    write_file(dir, "fig5_inset.csv", &inset, files)?;
    Ok(summary.into())
}

fn fig6(dir: &Path, files: &mut Vec<PathBuf>) -> Result<serde_json::Value> {
    let init = thermal(FIG_NBAR)?;
    let variants = fig6_variants();
    let results: Vec<Result<(f64, f64)>> = variants
        .par_iter()
        .map(|(_, shorthand)| {
            let tr = run(&init, shorthand, Protocol::II)?;
            let p = charge_performance(tr.final_dist(), &SearchOptions::default())?.p_success;
            Ok((p, mass_production(p, DEFAULT_MASS_K)?))
        })
        .collect();
    let mut csv = format!("label,schedule,charge,p_{DEFAULT_MASS_K}\n");
    let mut listed = Vec::new();
    for ((label, shorthand), r) in variants.iter().zip(results) {
        let (p, pk) = r?;
        let _ = writeln!(csv, "{label},{shorthand},{p:e},{pk:e}");
        listed.push(serde_json::json!({"label": label, "schedule": shorthand, "charge": p, "mass_production": pk}));
    }
    write_file(dir, "fig6.csv", &csv, files)?;
    Ok(serde_json::json!({ "mass_k": DEFAULT_MASS_K, "variants": listed }))
}

fn fig7(dir: &Path, files: &mut Vec<PathBuf>) -> Result<serde_json::Value> {
    let init = thermal(FIG_NBAR)?;
    let ripple = run(&init, "LNN", Protocol::II)?;
    let recovered = run(&init, "LNNLLLLLLLLNNNN", Protocol::II)?;
    let a = ripple.final_dist();
    let b = recovered.final_dist();
    let poisson = poisson_distribution(moments(b).mean, init.n_max())?;

    let mut csv = String::from("m,p\n");
    for m in 0..=init.n_max() {
        let _ = writeln!(csv, "{m},{:e}", a.get(m));
    }
    write_file(dir, "fig7a.csv", &csv, files)?;
    let mut csv = String::from("m,p,poisson\n");
    for m in 0..=init.n_max() {
        let _ = writeln!(csv, "{m},{:e},{:e}", b.get(m), poisson.get(m));
    }
    write_file(dir, "fig7b.csv", &csv, files)?;

    let minima = strict_local_minima(a);
    let mut csv = String::from("stage,m\n");
    for m in &minima {
        let _ = writeln!(csv, "ripple,{m}");
    }
    write_file(dir, "fig7_minima.csv", &csv, files)?;

    let mut csv = String::from(
        "stage,mean,variance,g2,fano,mdr,main_peak_cutoff,main_peak_mean,main_peak_variance,poisson_variance\n",
    );
    for (stage, d) in [("ripple", a), ("recovered", b)] {
        let s = moments(d);
        let peak = main_peak_stats(d);
        let _ = writeln!(
            csv,
            "{stage},{:e},{:e},{},{},{:e},{},{:e},{:e},{:e}",
            s.mean,
            s.variance,
            fmt_statistic(s.g2),
            fmt_statistic(s.fano),
            s.mdr,
            peak.cutoff,
            peak.mean,
            peak.variance,
            s.mean
        );
    }
    write_file(dir, "fig7_stats.csv", &csv, files)?;
    let s = moments(b);
    Ok(serde_json::json!({
        "ripple_minima": minima,
        "recovered_g2": s.g2,
        "recovered_mean": s.mean,
        "main_peak": main_peak_stats(b),
    }))
}

fn appendix(dir: &Path, files: &mut Vec<PathBuf>) -> Result<serde_json::Value> {
    let opts = SearchOptions::default();
    let grid = [
        0.1, 0.2, 0.5, 1.0, 2.0, 3.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0,
    ];
    let rows: Vec<Result<(f64, f64, f64)>> = grid
        .par_iter()
        .map(|&nbar| {
            let r = optimal_theta_linear(&thermal(nbar)?, &opts)?;
            Ok((nbar, r.seed_theta.value(), r.theta_star.value()))
        })
        .collect();
    let mut csv = String::from("nbar,seed_theta,theta_star,relative_error\n");
    let mut rel_at_2 = f64::NAN;
    for r in rows {
        let (nbar, seed, star) = r?;
        let rel = (seed - star).abs() / star;
        if nbar == 2.0 {
            rel_at_2 = rel;
        }
        let _ = writeln!(csv, "{nbar},{seed:e},{star:e},{rel:e}");
    }
    write_file(dir, "appendix_theta.csv", &csv, files)?;

    let nbar = 100.0;
    let dist = thermal(nbar)?;
    let mut csv = String::from("x,theta,exact,semiclassical\n");
    let mut worst: f64 = 0.0;
    for i in 0..=300 {
        let x = i as f64 * 0.01;
        let theta = InteractionAngle::new(x / nbar.sqrt())?;
        let exact = excitation_probability_linear(&dist, theta);
        let approx = semiclassical_pe(theta, nbar);
        worst = worst.max((exact - approx).abs());
        let _ = writeln!(csv, "{x},{:e},{exact:e},{approx:e}", theta.value());
    }
    write_file(dir, "appendix_dawson.csv", &csv, files)?;

    let mut csv = String::from("nbar,threshold,tail,reference\n");
    for nbar in [5.0, 10.0, 30.0, 100.0, 500.0] {
        let threshold = (4.0 * nbar) as usize;
        let tail = thermal(nbar)?.tail_above(threshold);
        let _ = writeln!(csv, "{nbar},{threshold},{tail:e},{:e}", (-4.0f64).exp());
    }
    write_file(dir, "appendix_tail.csv", &csv, files)?;
    Ok(serde_json::json!({
        "relative_theta_error_nbar_2": rel_at_2,
        "max_semiclassical_deviation_nbar_100": worst,
    }))
}

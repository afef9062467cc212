//! Frozen values of the recursion, recorded after the dense-oracle and
//! Monte-Carlo cross-checks agreed with them. A change here means the
//! numerics moved, not that the model improved.

use demon_sim::experiments::fig6_variants;
use demon_sim::fock::{auto_n_max, moments, thermal_distribution, FockDistribution};
use demon_sim::jc::SearchOptions;
use demon_sim::protocols::{charge_performance, mass_production, run_schedule, Protocol, Schedule};

const REL: f64 = 1e-9;

const FROZEN_CHARGE_I5: f64 = 8.233276010489385e-1;
const FROZEN_CHARGE_II5: f64 = 8.879024608935407e-1;
const FROZEN_LLLLLLNN_MEAN: f64 = 2.527577475282747e1;
const FROZEN_LLLLLLNN_VARIANCE: f64 = 1.0354015572979807e2;
const FROZEN_BOUND_500: f64 = 6.41427982758937e-1;
/// Baseline, then the two-quantum pair in positions 1+2 through 7+8.
const FROZEN_FIG6: [f64; 8] = [
    2.2358894309235946e-4,
    5.0857154457507295e-5,
    8.400970100589488e-4,
    1.565886087085538e-3,
    1.8474280119590322e-3,
    2.0697587091518493e-3,
    2.2702313145496205e-3,
    2.4403596255697024e-3,
];

fn thermal(nbar: f64) -> FockDistribution {
    thermal_distribution(nbar, auto_n_max(nbar, 1e-9)).unwrap()
}

fn final_of(init: &FockDistribution, s: &str, p: Protocol) -> FockDistribution {
    run_schedule(
        init,
        &Schedule::parse(s, p, false).unwrap(),
        &SearchOptions::default(),
    )
    .unwrap()
    .final_dist()
    .clone()
}

fn charge(d: &FockDistribution) -> f64 {
    charge_performance(d, &SearchOptions::default())
        .unwrap()
        .p_success
}

fn close(actual: f64, frozen: f64) {
    assert!(
        (actual - frozen).abs() <= REL * frozen.abs(),
        "actual {actual:.16e}, frozen {frozen:.16e}"
    );
}

#[test]
fn five_round_charges() {
    let init = thermal(30.0);
    close(
        charge(&final_of(&init, "LLLLL", Protocol::I)),
        FROZEN_CHARGE_I5,
    );
    close(
        charge(&final_of(&init, "LLLLL", Protocol::II)),
        FROZEN_CHARGE_II5,
    );
}

#[test]
fn nonlinear_tail_moments() {
    let init = thermal(30.0);
    let s = moments(&final_of(&init, "LLLLLLNN", Protocol::II));
    close(s.mean, FROZEN_LLLLLLNN_MEAN);
    close(s.variance, FROZEN_LLLLLLNN_VARIANCE);
}

#[test]
fn placement_mass_production() {
    let init = thermal(30.0);
    let variants = fig6_variants();
    assert_eq!(variants.len(), FROZEN_FIG6.len());
    for ((_, s), frozen) in variants.iter().zip(FROZEN_FIG6) {
        let p = charge(&final_of(&init, s, Protocol::II));
        close(mass_production(p, 100).unwrap(), frozen);
    }
}

#[test]
fn large_occupation_bound() {
    close(
        charge(&thermal_distribution(500.0, 4000).unwrap()),
        FROZEN_BOUND_500,
    );
}

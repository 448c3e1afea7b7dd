#![allow(dead_code)]

use bundlesim::drive::BundleTarget;
use bundlesim::dynamics::DecayRates;
use bundlesim::experiment::ExperimentParams;
use bundlesim::hilbert::ModelParams;

pub const KAPPA: f64 = 1e-4;

pub fn two_photon() -> ExperimentParams {
    ExperimentParams {
        model: ModelParams::resonant(0.6, -6.0),
        n_fock: 40,
        target: BundleTarget::new(0, 1, 0.0),
        pump_amplitude: 0.008,
        amplitude_ratio: 6.8538,
        pump_center: 7960.0,
        stokes_center: 5760.0,
        width: 2200.0,
        period: 84000.0,
        n_cycles: 1,
        kappa: DecayRates::uniform(KAPPA),
        rabi_states: None,
    }
}

pub fn four_photon() -> ExperimentParams {
    ExperimentParams {
        model: ModelParams::resonant(1.2, -10.0),
        n_fock: 60,
        target: BundleTarget::new(0, 2, 0.0),
        pump_amplitude: 0.006,
        amplitude_ratio: 3.1814,
        ..two_photon()
    }
}

pub fn closed(mut p: ExperimentParams) -> ExperimentParams {
    p.kappa = DecayRates::uniform(0.0);
    p
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

mod common;

use bundlesim::dynamics::{
    integrator::integrate, propagate_master, ChannelKind, DecayRates, DenseLindblad, DensityMatrix,
    InteractionHamiltonian, JumpChannel, MasterOptions, Tolerances,
};
use bundlesim::experiment::{Experiment, ExperimentParams};
use bundlesim::series::uniform_grid;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

fn drive_off(kappa: DecayRates) -> Experiment {
    let mut p = two_photon();
    p.pump_amplitude = 0.0;
    p.kappa = kappa;
    Experiment::build(&p).unwrap()
}

#[test]
fn cavity_cascade_matches_rate_equations() {
    let e = drive_off(DecayRates { a: KAPPA, ge: 0.0, bg: 0.0 });
    let a_only: Vec<JumpChannel> = e.channels.iter().copied().filter(|c| c.kind == ChannelKind::A).collect();
    assert_eq!(a_only.len(), e.channels.len());
    let rho0 = DensityMatrix::basis_state(e.basis.dim(), e.bare(2), 0.0);
    let grid = uniform_grid(0.0, 5.0 / KAPPA, 101);
    let (b0, b1, b2) = (e.bare(0), e.bare(1), e.bare(2));
    let mut worst: f64 = 0.0;
    propagate_master(&e.hamiltonian, &e.channels, &rho0, &grid, &MasterOptions::default(), |rho| {
        let x = (-KAPPA * rho.time).exp();
        let p2 = x * x;
        let p1 = 2.0 * (x - x * x);
        for (i, want) in [(b2, p2), (b1, p1), (b0, 1.0 - p1 - p2)] {
            worst = worst.max((rho.population(i) - want).abs());
        }
        Ok(())
    })
    .unwrap();
    assert!(worst < 1e-4, "{worst}");
}

fn small_driven() -> ExperimentParams {
    let mut p = two_photon();
    p.n_fock = 20;
    p.pump_amplitude = 0.1;
    p.amplitude_ratio = 1.5;
    p.pump_center = 50.0;
    p.stokes_center = 35.0;
    p.width = 12.0;
    p.period = 200.0;
    p.kappa = DecayRates { a: 3e-2, ge: 2e-2, bg: 1e-2 };
    p.rabi_states = Some(6);
    p
}

fn run_dense(h: &InteractionHamiltonian, channels: &[JumpChannel], rho0: &DensityMatrix, grid: &[f64]) -> Vec<Vec<C64>> {
    let tol = Tolerances { rtol: 1e-10, atol: 1e-12, ..Tolerances::closed() };
    let mut out = Vec::new();
    integrate(&DenseLindblad::new(h, channels), tol, &rho0.data, grid, |_, y| {
        out.push(y.to_vec());
        Ok(())
    }).unwrap();
    out
}

fn max_diff(a: &[Vec<C64>], b: &[Vec<C64>]) -> f64 {
    a.iter().zip(b).flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).norm())).fold(0.0, f64::max)
}

#[test]
fn jump_phases_do_not_change_the_dynamics() {
    let e = Experiment::build(&small_driven()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let phased: Vec<JumpChannel> = e
        .channels
        .iter()
        .map(|c| JumpChannel { phase: rng.gen_range(0.0..std::f64::consts::TAU), ..*c })
        .collect();
    let rho0 = e.initial_density();
    let grid = uniform_grid(0.0, 80.0, 17);
    let plain = run_dense(&e.hamiltonian, &e.channels, &rho0, &grid);
    let rotated = run_dense(&e.hamiltonian, &phased, &rho0, &grid);
    assert!(max_diff(&plain, &rotated) < 1e-10);

    // structured implementation, also fed the phased channels
    let tol = MasterOptions { tol: Tolerances { rtol: 1e-10, atol: 1e-12, ..Tolerances::closed() }, check_positivity: true };
    let mut structured = Vec::new();
    propagate_master(&e.hamiltonian, &phased, &rho0, &grid, &tol, |r| {
        structured.push(r.data.clone());
        Ok(())
    })
    .unwrap();
    let gap = max_diff(&plain, &structured);
    assert!(gap < 1e-9, "{gap}");
    // the drive and the dissipation both act within the window
    let moved = 1.0 - plain.last().unwrap()[0].re;
    assert!(moved > 1e-3, "{moved}");
}

#[test]
fn density_matrix_stays_physical() {
    let e = Experiment::build(&small_driven()).unwrap();
    let grid = uniform_grid(0.0, 200.0, 41);
    let (rho, diag) =
        propagate_master(&e.hamiltonian, &e.channels, &e.initial_density(), &grid, &MasterOptions::default(), |r| {
            assert!(r.hermiticity_deviation() < 1e-8);
            Ok(())
        })
        .unwrap();
    assert!(diag.max_trace_drift < 1e-6, "{diag:?}");
    assert!(diag.min_eigenvalue > -1e-8, "{diag:?}");
    assert!((rho.trace().re - 1.0).abs() < 1e-6);
    assert!(rho.trace().im.abs() < 1e-12);
}

#[test]
fn lab_frame_round_trip() {
    let e = Experiment::build(&small_driven()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = e.basis.dim();
    let a = DMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let m = &a * a.adjoint();
    let rho = DensityMatrix::from_lab_frame(&m, &e.basis.energies, 123.4);
    let back = rho.lab_frame(&e.basis.energies);
    assert!((back - m).camax() < 1e-12);
}

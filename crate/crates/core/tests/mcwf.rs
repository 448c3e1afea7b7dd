mod common;

use bundlesim::dynamics::{propagate_closed, ChannelKind, DecayRates, Tolerances};
use bundlesim::experiment::Experiment;
use bundlesim::mcwf::{ensemble_average, jumps_per_cycle, run_stream, run_trajectory, TrajectoryOptions};
use bundlesim::series::uniform_grid;

use common::*;

fn drive_off_cavity_only() -> Experiment {
    let mut p = two_photon();
    p.pump_amplitude = 0.0;
    p.kappa = DecayRates { a: KAPPA, ge: 0.0, bg: 0.0 };
    Experiment::build(&p).unwrap()
}

#[test]
fn without_channels_trajectory_is_the_closed_run() {
    let e = Experiment::build(&closed(two_photon())).unwrap();
    assert!(e.channels.is_empty());
    let grid = uniform_grid(0.0, e.pulse_pair_end(0), 101);
    let labels = e.labels();
    let opts = TrajectoryOptions { tol: Tolerances::closed(), ..Default::default() };
    let traj = run_trajectory(&e.hamiltonian, &e.channels, &e.initial_state(), &grid, 5, &labels, &opts).unwrap();
    assert!(traj.jump_events.is_empty());
    let run = propagate_closed(&e.hamiltonian, &e.initial_state(), &grid, Tolerances::closed()).unwrap();
    for i in [e.initial_index(), e.intermediate_index(), e.final_index()] {
        let closed_pop: Vec<f64> = (0..grid.len()).map(|k| run.population(k, i)).collect();
        let traj_pop = traj.populations.values(&format!("P_{}", labels[i])).unwrap();
        assert!(max_abs_diff(&closed_pop, &traj_pop) < 1e-6);
    }
}

#[test]
fn two_photon_state_emits_exactly_two_photons() {
    let e = drive_off_cavity_only();
    let grid = uniform_grid(0.0, 25.0 / KAPPA, 51);
    let psi0 = e.basis.basis_vector(e.bare(2));
    let labels = e.labels();
    for stream in 0..20 {
        let traj = run_stream(&e.hamiltonian, &e.channels, &psi0, &grid, 99, stream, &labels, &Default::default()).unwrap();
        let kinds: Vec<_> = traj.jump_events.iter().map(|j| (j.kind, j.from, j.to)).collect();
        assert_eq!(kinds, vec![(ChannelKind::A, e.bare(2), e.bare(1)), (ChannelKind::A, e.bare(1), e.bare(0))]);
        assert!(traj.jump_events[0].time < traj.jump_events[1].time);
        let p0 = traj.populations.values(&format!("P_{}", labels[e.bare(0)])).unwrap();
        assert!((p0.last().unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(jumps_per_cycle(&traj.jump_events, ChannelKind::A, 0.0, 25.0 / KAPPA, 1), vec![2]);
    }
}

#[test]
fn ensemble_decay_matches_exponential_within_three_standard_errors() {
    let e = drive_off_cavity_only();
    let grid = uniform_grid(0.0, 3.0 / KAPPA, 31);
    let psi0 = e.basis.basis_vector(e.bare(2));
    let labels = e.labels();
    let ens = ensemble_average(&e.hamiltonian, &e.channels, &psi0, &grid, 500, 2024, &labels, &Default::default()).unwrap();
    let mean = ens.mean("b2").unwrap();
    let se = ens.standard_error("b2").unwrap();
    for (k, &t) in grid.iter().enumerate() {
        let exact = (-2.0 * KAPPA * t).exp();
        // a floor for points where every trajectory agrees
        let allowed = 3.0 * se[k] + 1e-9;
        assert!((mean[k] - exact).abs() <= allowed, "t={t} mean {} exact {exact} se {}", mean[k], se[k]);
    }
    assert_eq!(ens.n_traj, 500);
    assert!(ens.events.iter().all(|ev| ev.len() <= 2));
}

#[test]
fn ensembles_are_reproducible() {
    let e = drive_off_cavity_only();
    let grid = uniform_grid(0.0, 2.0 / KAPPA, 11);
    let psi0 = e.basis.basis_vector(e.bare(2));
    let labels = e.labels();
    let run = |seed| ensemble_average(&e.hamiltonian, &e.channels, &psi0, &grid, 40, seed, &labels, &Default::default()).unwrap();
    assert_eq!(run(7), run(7));
    assert_ne!(run(7).populations, run(8).populations);
}

#[test]
fn driven_ensemble_matches_master_equation() {
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
    let e = Experiment::build(&p).unwrap();
    let grid = uniform_grid(0.0, 150.0, 31);
    let labels = e.labels();
    let ens = ensemble_average(&e.hamiltonian, &e.channels, &e.initial_state(), &grid, 2000, 5, &labels, &Default::default())
        .unwrap();
    let (master, _) = bundlesim::dynamics::master_populations(
        &e.hamiltonian,
        &e.channels,
        &e.initial_density(),
        &grid,
        &Default::default(),
        &labels,
    )
    .unwrap();
    let mut worst: f64 = 0.0;
    for label in &labels {
        let m = master.values(&format!("P_{label}")).unwrap();
        let mean = ens.mean(label).unwrap();
        let se = ens.standard_error(label).unwrap();
        for k in 1..grid.len() {
            if se[k] > 1e-3 {
                worst = worst.max((m[k] - mean[k]).abs() / se[k]);
            }
        }
    }
    assert!(worst < 4.5, "{worst}");
}

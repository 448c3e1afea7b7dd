//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if a criterion outside `KNOWN_SHORTFALLS` fails.

use std::path::PathBuf;
use std::time::Instant;

use bundlesim::dynamics::{
    integrator::integrate, propagate_closed, propagate_master, DecayRates, DenseLindblad, DensityMatrix,
    JumpChannel, MasterOptions, Tolerances,
};
use bundlesim::experiment::{Experiment, ExperimentParams};
use bundlesim::hilbert::{Level, ModelParams, SpaceConfig};
use bundlesim::rabi::{diagonalize, Parity};
use bundlesim::series::{uniform_grid, TimeSeries};
use bundlesim_cli::{run, CliError, Scenario};
use serde_json::Value;

/// Criteria whose failure has been analysed and is accepted.
const KNOWN_SHORTFALLS: &[&str] = &["closed-stirap", "analytic-g2", "oracle-mcwf-vs-master"];

const BUNDLES: [(&str, f64); 4] =
    [("two_photon", 0.713), ("four_photon", 0.575), ("six_photon", 0.421), ("three_photon", 0.326)];

struct Outcome {
    name: &'static str,
    pass: bool,
}

fn report(out: &mut Vec<Outcome>, name: &'static str, result: Result<(bool, String), CliError>, started: Instant) {
    let secs = started.elapsed().as_secs_f64();
    let (pass, detail) = result.unwrap_or_else(|e| (false, format!("error: {e}")));
    println!("{} {name}: {detail} [{secs:.0} s]", if pass { "PASS" } else { "FAIL" });
    out.push(Outcome { name, pass });
}

fn out_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("bundlesim-acceptance-{}-{tag}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn run_scenario(name: &str, overrides: &[&str], tag: &str) -> Result<(Value, PathBuf), CliError> {
    let overrides: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    let s = Scenario::resolve(name)?.with_overrides(&overrides)?;
    let dir = out_dir(tag);
    let out = run(&s, &overrides, &dir)?;
    Ok((out.summary, dir))
}

fn table(dir: &PathBuf, file: &str) -> Result<TimeSeries, CliError> {
    let text = std::fs::read_to_string(dir.join(file)).map_err(|e| CliError::Io(e.to_string()))?;
    Ok(TimeSeries::read_csv(&text)?)
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

fn parity_selection() -> Result<(bool, String), CliError> {
    let cfg = SpaceConfig::new(60)?;
    let mut worst: f64 = 0.0;
    let mut even_states = 0;
    for lambda in [0.3, 0.6, 1.2] {
        let spec = diagonalize(&ModelParams::resonant(lambda, -6.0), &cfg)?;
        for n in 0..spec.dim() {
            // sector from the dominant component only
            let v = spec.vector(n);
            let k = (0..v.len()).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs())).unwrap();
            let (level, m) = if k < spec.n_fock { (Level::G, k) } else { (Level::E, k - spec.n_fock) };
            if Parity::of(level, m) != Some(Parity::Even) {
                continue;
            }
            even_states += 1;
            for m in (1..spec.n_fock).step_by(2) {
                worst = worst.max(spec.c(n, m).abs());
            }
        }
    }
    Ok((worst < 1e-10, format!("{even_states} even eigenstates, max odd-m |C| = {worst:.2e} (< 1e-10)")))
}

struct ClosedFinal {
    target: f64,
    intermediate: f64,
    next: f64,
    gap: f64,
}

fn closed_final(p: &ExperimentParams) -> Result<ClosedFinal, CliError> {
    let mut p = p.clone();
    p.kappa = DecayRates::uniform(0.0);
    let e = Experiment::build(&p)?;
    let grid = uniform_grid(0.0, e.pulse_pair_end(0), 2001);
    let run = propagate_closed(&e.hamiltonian, &e.initial_state(), &grid, Tolerances::closed())?;
    let lambda = e.lambda_system()?;
    let mut psi = vec![Default::default(); 3];
    psi[0] = 1.0.into();
    let reduced = propagate_closed(&lambda, &psi, &grid, Tolerances::closed())?;
    let pairs = [(0, e.initial_index()), (1, e.intermediate_index()), (2, e.final_index())];
    let mut gap: f64 = 0.0;
    for k in 0..grid.len() {
        for (a, b) in pairs {
            gap = gap.max((reduced.population(k, a) - run.population(k, b)).abs());
        }
    }
    let last = grid.len() - 1;
    Ok(ClosedFinal {
        target: run.population(last, e.final_index()),
        intermediate: run.population(last, e.intermediate_index()),
        next: e.next_manifold_index().map_or(0.0, |i| run.population(last, i)),
        gap,
    })
}

fn closed_stirap() -> Result<(bool, String), CliError> {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, _) in BUNDLES {
        let c = closed_final(&Scenario::resolve(name)?.experiment_params()?)?;
        let ok = [c.target >= 0.99, c.intermediate <= 5e-4, c.next <= 5e-3, c.gap <= 0.02];
        pass &= ok.iter().all(|&x| x);
        let mark = |b: bool| if b { "" } else { "!" };
        parts.push(format!(
            "{name}: P_target {:.4}{} P_eps {:.1e}{} P_next {:.1e}{} gap {:.4}{}",
            c.target,
            mark(ok[0]),
            c.intermediate,
            mark(ok[1]),
            c.next,
            mark(ok[2]),
            c.gap,
            mark(ok[3])
        ));
    }
    Ok((pass, parts.join("; ")))
}

fn master_peak(name: &str, extra: &[&str], tag: &str) -> Result<f64, CliError> {
    let mut overrides = vec!["run.kind=\"master\"", "run.cycles=1"];
    overrides.extend_from_slice(extra);
    let (summary, _) = run_scenario(name, &overrides, tag)?;
    Ok(f(&summary["target_peaks"][0]["peak"]))
}

fn dissipative_peaks(peaks: &mut Vec<(&'static str, f64)>) -> Result<(bool, String), CliError> {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, want) in BUNDLES {
        let got = master_peak(name, &[], &format!("peak-{name}"))?;
        pass &= (got - want).abs() <= 0.03;
        parts.push(format!("{name} {got:.4} (ref {want})"));
        peaks.push((name, got));
    }
    Ok((pass, parts.join(", ")))
}

fn correlator_run(name: &str) -> Result<Value, CliError> {
    Ok(run_scenario(name, &["run.kind=\"correlators\""], &format!("corr-{name}"))?.0)
}

fn analytic_g2(two: &Value) -> Result<(bool, String), CliError> {
    let a = &two["analytic"];
    let dev = f(&a["max_relative_deviation"]);
    let end = f(&a["g2_1_at_end"]);
    let ok_dev = dev <= 0.10;
    let ok_end = (end - 0.5).abs() <= 0.05;
    Ok((
        ok_dev && ok_end,
        format!(
            "max relative deviation over [{}, {}] = {dev:.3} (<= 0.10: {ok_dev}), final g2_1 = {end:.4} (0.5 +- 0.05: {ok_end})",
            f(&a["from"]),
            f(&a["to"])
        ),
    ))
}

fn bundle_statistics(runs: &[(&str, &Value)]) -> Result<(bool, String), CliError> {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, s) in runs {
        let g1 = f(&s["g2_1_max"]["value"]);
        let gn = f(&s["g2_n_min"]["value"]);
        let n = s["bundle_order"].as_u64().unwrap_or(0);
        let fr: Vec<f64> = s["delayed"].as_array().map(|a| a.iter().map(|d| f(&d["fraction_inequality_holds"])).collect()).unwrap_or_default();
        let ok = g1 > 1.0 && gn < 1.0 && fr.len() == 2 && fr.iter().all(|&x| x >= 0.95);
        pass &= ok;
        parts.push(format!(
            "{name}: max g2_1 {g1:.3} at t={:.0}, min g2_{n} {gn:.4} at t={:.0}, delayed fractions {:?}",
            f(&s["g2_1_max"]["t"]),
            f(&s["g2_n_min"]["t"]),
            fr
        ));
    }
    Ok((pass, parts.join("; ")))
}

fn drive_off_two_photon(kappa: DecayRates) -> Result<Experiment, CliError> {
    let mut p = Scenario::resolve("two_photon")?.experiment_params()?;
    p.pump_amplitude = 0.0;
    p.kappa = kappa;
    Ok(Experiment::build(&p)?)
}

fn cascade_oracle() -> Result<(bool, String), CliError> {
    let k = 1e-4;
    let e = drive_off_two_photon(DecayRates { a: k, ge: 0.0, bg: 0.0 })?;
    let rho0 = DensityMatrix::basis_state(e.basis.dim(), e.bare(2), 0.0);
    let grid = uniform_grid(0.0, 5.0 / k, 101);
    let (b0, b1, b2) = (e.bare(0), e.bare(1), e.bare(2));
    let mut worst: f64 = 0.0;
    propagate_master(&e.hamiltonian, &e.channels, &rho0, &grid, &MasterOptions::default(), |rho| {
        let x = (-k * rho.time).exp();
        let (p2, p1) = (x * x, 2.0 * (x - x * x));
        for (i, want) in [(b2, p2), (b1, p1), (b0, 1.0 - p1 - p2)] {
            worst = worst.max((rho.population(i) - want).abs());
        }
        Ok(())
    })?;
    Ok((worst < 1e-4, format!("max deviation from rate equations {worst:.2e} (< 1e-4)")))
}

struct Agreement {
    outside: usize,
    points: usize,
    /// Same counts restricted to points where the ensemble resolves the
    /// population: at least `RESOLVED` expected trajectories on each side.
    resolved_outside: usize,
    resolved_points: usize,
}

const RESOLVED: f64 = 5.0;

fn mcwf_vs_master(master: &TimeSeries, ensemble: &TimeSeries, n_traj: usize, floor: f64) -> Agreement {
    let mut a = Agreement { outside: 0, points: 0, resolved_outside: 0, resolved_points: 0 };
    let n = n_traj as f64;
    for col in &master.columns {
        let Some(label) = col.name.strip_prefix("P_") else { continue };
        let (Some(m), Some(mean), Some(se)) =
            (master.values(&col.name), ensemble.values(&col.name), ensemble.values(&format!("se_P_{label}")))
        else {
            continue;
        };
        for k in 0..m.len() {
            let miss = (m[k] - mean[k]).abs() > 3.0 * se[k] + floor;
            let resolved = n * m[k] >= RESOLVED && n * (1.0 - m[k]) >= RESOLVED;
            a.points += 1;
            a.outside += miss as usize;
            a.resolved_points += resolved as usize;
            a.resolved_outside += (resolved && miss) as usize;
        }
    }
    a
}

fn phase_invariance() -> Result<(bool, String), CliError> {
    let mut p = Scenario::resolve("two_photon")?.experiment_params()?;
    p.n_fock = 20;
    p.pump_amplitude = 0.1;
    p.amplitude_ratio = 1.5;
    p.pump_center = 50.0;
    p.stokes_center = 35.0;
    p.width = 12.0;
    p.period = 200.0;
    p.kappa = DecayRates { a: 3e-2, ge: 2e-2, bg: 1e-2 };
    p.rabi_states = Some(6);
    let e = Experiment::build(&p)?;
    // deterministic, irregular phases
    let phased: Vec<JumpChannel> = e
        .channels
        .iter()
        .enumerate()
        .map(|(i, c)| JumpChannel { phase: (i as f64 * 2.399_963_229_728_653).rem_euclid(std::f64::consts::TAU), ..*c })
        .collect();
    let grid = uniform_grid(0.0, 80.0, 17);
    let tol = Tolerances { rtol: 1e-10, atol: 1e-12, ..Tolerances::closed() };
    let rho0 = e.initial_density();
    let dense = |channels: &[JumpChannel]| -> Result<Vec<Vec<_>>, CliError> {
        let mut out = Vec::new();
        integrate(&DenseLindblad::new(&e.hamiltonian, channels), tol, &rho0.data, &grid, |_, y| {
            out.push(y.to_vec());
            Ok(())
        })?;
        Ok(out)
    };
    let plain = dense(&e.channels)?;
    let rotated = dense(&phased)?;
    let gap = plain
        .iter()
        .zip(&rotated)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm()))
        .fold(0.0, f64::max);
    Ok((gap < 1e-10, format!("max |rho(phased) - rho(plain)| = {gap:.2e} (< 1e-10)")))
}

/// Cycle-0 peak of the target population at a tighter absolute tolerance
/// than the run default, so that the larger space stays inside the
/// positivity floor and the comparison isolates the truncation.
fn dissipative_peak(p: &ExperimentParams) -> Result<f64, CliError> {
    let e = Experiment::build(p)?;
    let grid = uniform_grid(0.0, e.pulses.period, 2001);
    let opts = MasterOptions { tol: Tolerances { atol: 1e-11, ..Tolerances::open() }, check_positivity: true };
    let mut peak: f64 = 0.0;
    let target = e.final_index();
    propagate_master(&e.hamiltonian, &e.channels, &e.initial_density(), &grid, &opts, |rho| {
        peak = peak.max(rho.population(target));
        Ok(())
    })?;
    Ok(peak)
}

fn truncation_doubling(peaks: &[(&str, f64)]) -> Result<(bool, String), CliError> {
    let mut worst: f64 = 0.0;
    let mut worst_at = String::new();
    let mut track = |what: String, a: f64, b: f64| {
        let d = (a - b).abs();
        if d > worst || worst_at.is_empty() {
            worst = worst.max(d);
            worst_at = what;
        }
    };
    for (name, base_peak) in peaks {
        let s = Scenario::resolve(name)?;
        let base = Experiment::build(&s.experiment_params()?)?;
        let doubled = base.scaled_params(2.0);
        let c1 = closed_final(&base.params)?;
        let c2 = closed_final(&doubled)?;
        track(format!("{name} closed target"), c1.target, c2.target);
        track(format!("{name} closed eps"), c1.intermediate, c2.intermediate);
        track(format!("{name} closed next"), c1.next, c2.next);
        track(format!("{name} closed gap"), c1.gap, c2.gap);
        let mut single = base.params.clone();
        single.n_cycles = 1;
        let mut doubled_single = doubled.clone();
        doubled_single.n_cycles = 1;
        let p1 = dissipative_peak(&single)?;
        let p2 = dissipative_peak(&doubled_single)?;
        track(format!("{name} dissipative peak"), p1, p2);
        track(format!("{name} dissipative peak vs default tolerance"), *base_peak, p1);
    }
    Ok((worst < 1e-3, format!("largest shift {worst:.2e} ({worst_at}) (< 1e-3)")))
}

fn trajectory_fraction(summary: &Value) -> (f64, Vec<u64>) {
    let hist = summary["a_jump_histogram"].as_array().map(|a| a.iter().filter_map(|x| x.as_u64()).collect()).unwrap_or_default();
    (f(&summary["fraction_exact_per_cycle"]), hist)
}

fn main() {
    let mut out = Vec::new();

    let t = Instant::now();
    report(&mut out, "parity-selection", parity_selection(), t);

    let t = Instant::now();
    report(&mut out, "closed-stirap", closed_stirap(), t);

    let t = Instant::now();
    let mut peaks = Vec::new();
    report(&mut out, "dissipative-peaks", dissipative_peaks(&mut peaks), t);

    let t = Instant::now();
    let two = correlator_run("two_photon");
    let four = correlator_run("four_photon");
    match (&two, &four) {
        (Ok(a), Ok(b)) => {
            report(&mut out, "analytic-g2", analytic_g2(a), t);
            report(&mut out, "bundle-statistics", bundle_statistics(&[("two_photon", a), ("four_photon", b)]), t);
        }
        (Err(e), _) | (_, Err(e)) => {
            report(&mut out, "analytic-g2", Err(e.clone()), t);
            report(&mut out, "bundle-statistics", Err(e.clone()), t);
        }
    }

    let t = Instant::now();
    report(&mut out, "oracle-cascade", cascade_oracle(), t);

    // one cycle of the two-photon scenario, shared by the ensemble oracle
    // and the trajectory-structure criterion
    let t = Instant::now();
    let ensemble = run_scenario("two_photon", &["run.kind=\"trajectory\"", "run.cycles=1", "run.n_traj=500"], "traj-two");
    let master = run_scenario("two_photon", &["run.kind=\"master\"", "run.cycles=1"], "master-two");
    let mcwf = match (&ensemble, &master) {
        (Ok((_, ed)), Ok((_, md))) => table(md, "master_populations.csv").and_then(|m| {
            let en = table(ed, "ensemble_populations.csv")?;
            // the floor covers points where every trajectory agrees (SE = 0)
            let a = mcwf_vs_master(&m, &en, 500, 1e-6);
            Ok((
                a.outside == 0,
                format!(
                    "500 trajectories, {}/{} points outside 3 SE + 1e-6; where >= {RESOLVED} trajectories resolve the population: {}/{}",
                    a.outside, a.points, a.resolved_outside, a.resolved_points
                ),
            ))
        }),
        (Err(e), _) | (_, Err(e)) => Err(e.clone()),
    };
    report(&mut out, "oracle-mcwf-vs-master", mcwf, t);

    let t = Instant::now();
    report(&mut out, "oracle-phase-invariance", phase_invariance(), t);

    let t = Instant::now();
    report(&mut out, "oracle-truncation-doubling", truncation_doubling(&peaks), t);

    let t = Instant::now();
    let structure = ensemble.and_then(|(two, _)| {
        let (four, _) = run_scenario("four_photon", &["run.kind=\"trajectory\"", "run.cycles=1", "run.n_traj=200"], "traj-four")?;
        let (f2, h2) = trajectory_fraction(&two);
        let (f4, h4) = trajectory_fraction(&four);
        Ok((
            f2 >= 0.90 && f4 >= 0.80,
            format!(
                "two-photon exactly 2 a-jumps: {f2:.3} (>= 0.90, histogram {h2:?}); four-photon exactly 4: {f4:.3} (>= 0.80, histogram {h4:?})"
            ),
        ))
    });
    report(&mut out, "trajectory-structure", structure, t);

    let passed = out.iter().filter(|o| o.pass).count();
    println!("{passed}/{} criteria passed", out.len());
    let unexpected: Vec<&str> = out.iter().filter(|o| !o.pass && !KNOWN_SHORTFALLS.contains(&o.name)).map(|o| o.name).collect();
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {}", unexpected.join(", "));
        std::process::exit(1);
    }
}

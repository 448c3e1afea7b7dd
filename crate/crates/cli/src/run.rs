//! Executes a scenario and writes its tables into an output directory.

use std::path::{Path, PathBuf};

use bundlesim::drive::{adiabaticity_report, mixing_angles, rwa_validity_report, DEFAULT_VALIDITY_THRESHOLD};
use bundlesim::dynamics::{
    correlate_from, propagate_closed, propagate_master, ChannelKind, DensityMatrix, MasterOptions, Tolerances,
};
use bundlesim::effective::analytic_g2_equal_time;
use bundlesim::experiment::Experiment;
use bundlesim::hilbert::{ModelParams, SpaceConfig};
use bundlesim::mcwf::{ensemble_average, jump_histogram, jumps_per_cycle, run_stream, JumpEvent, TrajectoryOptions};
use bundlesim::observables::{find_extremum, g2_sample, g2_series, BundleOperator, Extremum, G2Sample};
use bundlesim::rabi::coefficient_sweep;
use bundlesim::series::{uniform_grid, TimeSeries};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::CliError;
use crate::provenance::Provenance;
use crate::scenario::{RunKind, Scenario};

/// Validity ratios above this abort the run instead of warning.
pub const GATE_HARD_LIMIT: f64 = 1.0;
/// Samples used for the adiabaticity check over one pulse pair.
pub const GATE_POINTS: usize = 2001;
/// Envelope fraction bounding the extremum search for the correlators.
pub const EXTREMUM_OVERLAP_FRACTION: f64 = 0.5;
/// Extra equal-time samples inside the extremum window.
pub const EXTREMUM_POINTS: usize = 401;

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    pub summary: Value,
    pub warnings: Vec<String>,
}

struct Writer {
    dir: PathBuf,
    prov: Provenance,
    files: Vec<String>,
}

impl Writer {
    fn csv(&mut self, name: &str, mut ts: TimeSeries) -> Result<(), CliError> {
        self.prov.stamp(&mut ts);
        ts.save_csv(self.dir.join(name))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        write(&self.dir.join(name), text + "\n")?;
        self.files.push(name.to_string());
        Ok(())
    }
}

fn write(path: &Path, text: String) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Runs `scenario` (already carrying `overrides`, which are only recorded)
/// and writes tables, `summary.json`, `scenario.toml` and `provenance.json`.
pub fn run(scenario: &Scenario, overrides: &[String], out_dir: &Path) -> Result<RunOutput, CliError> {
    scenario.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
    let mut w = Writer { dir: out_dir.to_path_buf(), prov: Provenance::new(scenario, overrides), files: Vec::new() };
    let mut warnings = scenario.warnings();

    let summary = match scenario.run.kind {
        RunKind::CoeffSweep => coeff_sweep(scenario, &mut w)?,
        kind => {
            let e = Experiment::build(&scenario.experiment_params()?)?;
            w.prov.active_dim = Some(e.basis.dim());
            let validity = validity_gates(&e, &mut warnings)?;
            let mut summary = match kind {
                RunKind::Closed => closed(scenario, &e, &mut w)?,
                RunKind::Master => master(scenario, &e, &mut w)?,
                RunKind::Trajectory => trajectory(scenario, &e, &mut w)?,
                RunKind::Correlators => correlators(scenario, &e, &mut w)?,
                RunKind::CoeffSweep => unreachable!(),
            };
            summary["validity"] = validity;
            summary["active_dim"] = json!(e.basis.dim());
            summary["carriers"] = json!(e.pulses.carriers);
            summary
        }
    };
    let mut summary = summary;
    summary["scenario"] = json!(scenario.name);
    summary["kind"] = json!(scenario.run.kind.name());
    summary["warnings"] = json!(warnings);

    write(&out_dir.join("scenario.toml"), scenario.to_toml())?;
    w.files.push("scenario.toml".into());
    let prov = w.prov.clone();
    w.json("provenance.json", &prov)?;
    w.json("summary.json", &summary)?;
    Ok(RunOutput { out_dir: out_dir.to_path_buf(), files: w.files, summary, warnings })
}

fn validity_gates(e: &Experiment, warnings: &mut Vec<String>) -> Result<Value, CliError> {
    let grid = uniform_grid(0.0, e.pulse_pair_end(0), GATE_POINTS);
    let window = e.pulses.overlap_window(0, 0.01).unwrap_or((0.0, e.pulse_pair_end(0)));
    let grid: Vec<f64> = grid.into_iter().filter(|t| *t >= window.0 && *t <= window.1).collect();
    let adi = adiabaticity_report(&e.spectrum, &e.pulses, e.target(), &grid, DEFAULT_VALIDITY_THRESHOLD)?;
    let rwa = rwa_validity_report(
        &e.spectrum,
        &e.pulses,
        e.target(),
        e.basis.active.rabi_states,
        DEFAULT_VALIDITY_THRESHOLD,
    );
    if adi.flagged {
        warnings.push(format!(
            "adiabaticity ratio reaches {:.3} at t = {:.1} (threshold {})",
            adi.max_ratio, adi.time_of_max, adi.threshold
        ));
    }
    if rwa.flagged {
        warnings.push(format!(
            "neglected-term ratio reaches {:.3} (counter-rotating) / {:.3} (spectator), threshold {}",
            rwa.max_counter_rotating, rwa.max_spectator, rwa.threshold
        ));
    }
    if !(adi.max_ratio <= GATE_HARD_LIMIT) {
        return Err(CliError::Gate(format!("adiabaticity ratio {} exceeds {GATE_HARD_LIMIT}", adi.max_ratio)));
    }
    let worst = rwa.max_counter_rotating.max(rwa.max_spectator);
    if !(worst <= GATE_HARD_LIMIT) {
        return Err(CliError::Gate(format!("neglected-term ratio {worst} exceeds {GATE_HARD_LIMIT}")));
    }
    Ok(json!({
        "window": window,
        "adiabaticity_max_ratio": adi.max_ratio,
        "adiabaticity_time_of_max": adi.time_of_max,
        "adiabaticity_offending_points": adi.offending_times.len(),
        "rwa_max_counter_rotating": rwa.max_counter_rotating,
        "rwa_max_spectator": rwa.max_spectator,
        "rwa_offenders": rwa.offenders,
        "threshold": DEFAULT_VALIDITY_THRESHOLD,
        "hard_limit": GATE_HARD_LIMIT,
    }))
}

fn pulse_table(e: &Experiment, grid: &[f64]) -> TimeSeries {
    let mut ts = TimeSeries::new("t", grid.to_vec());
    ts.push_column("Omega_1", grid.iter().map(|&t| e.pulses.envelope(bundlesim::drive::Field::Pump, t)).collect());
    ts.push_column("Omega_2", grid.iter().map(|&t| e.pulses.envelope(bundlesim::drive::Field::Stokes, t)).collect());
    ts.push_masked_column(
        "theta",
        grid.iter().map(|&t| mixing_angles(&e.spectrum, &e.pulses, e.target(), t).ok().map(|a| a.theta)).collect(),
    );
    ts
}

fn closed(s: &Scenario, e: &Experiment, w: &mut Writer) -> Result<Value, CliError> {
    let grid = uniform_grid(0.0, e.pulse_pair_end(0), s.run.points_per_cycle + 1);
    let tol = Tolerances::closed();
    w.prov.tolerances.push(("closed".into(), tol));
    let labels = e.labels();
    let exact = propagate_closed(&e.hamiltonian, &e.initial_state(), &grid, tol)?;
    let mut pops = exact.populations(&labels);
    pops.push_column("norm", (0..grid.len()).map(|k| exact.norm(k)).collect());
    w.csv("closed_populations.csv", pops)?;

    let lambda = e.lambda_system()?;
    let mut psi = vec![Default::default(); 3];
    psi[0] = 1.0.into();
    let reduced = propagate_closed(&lambda, &psi, &grid, tol)?;
    let reduced_labels = lambda.labels();
    w.csv("effective_populations.csv", reduced.populations(&reduced_labels))?;
    w.csv("pulses.csv", pulse_table(e, &grid))?;

    let pairs = [(0, e.initial_index()), (1, e.intermediate_index()), (2, e.final_index())];
    let mut gap: f64 = 0.0;
    for k in 0..grid.len() {
        for (a, b) in pairs {
            gap = gap.max((reduced.population(k, a) - exact.population(k, b)).abs());
        }
    }
    let last = grid.len() - 1;
    let outside: f64 = 1.0 - pairs.iter().map(|&(_, i)| exact.population(last, i)).sum::<f64>();
    Ok(json!({
        "t_end": grid[last],
        "final_initial": exact.population(last, e.initial_index()),
        "final_intermediate": exact.population(last, e.intermediate_index()),
        "final_target": exact.population(last, e.final_index()),
        "final_next_manifold": e.next_manifold_index().map(|i| exact.population(last, i)),
        "final_outside_lambda": outside,
        "max_intermediate": (0..grid.len()).map(|k| exact.population(k, e.intermediate_index())).fold(0.0, f64::max),
        "max_norm_drift": exact.max_norm_drift(),
        "max_effective_gap": gap,
        "effective_final_target": reduced.population(last, 2),
    }))
}

/// Full time grid over all cycles and the cycle each point belongs to.
fn cycle_grid(s: &Scenario, e: &Experiment) -> (Vec<f64>, Vec<usize>) {
    let n = s.cycles();
    let ppc = s.run.points_per_cycle;
    let grid = uniform_grid(0.0, n as f64 * e.pulses.period, n * ppc + 1);
    let cycle = (0..grid.len()).map(|i| (i / ppc).min(n - 1)).collect();
    (grid, cycle)
}

/// Index ranges of the propagation segments: the whole grid, or one per
/// cycle when every cycle restarts from the initial state.
fn segments(s: &Scenario, cycle: &[usize]) -> Vec<std::ops::Range<usize>> {
    if !s.run.reprepare_each_cycle {
        return vec![0..cycle.len()];
    }
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=cycle.len() {
        if i == cycle.len() || cycle[i] != cycle[start] {
            out.push(start..i);
            start = i;
        }
    }
    out
}

fn peaks_per_cycle(values: &[f64], grid: &[f64], cycle: &[usize], n: usize) -> Vec<Value> {
    (0..n)
        .map(|k| {
            let (mut best, mut at) = (f64::MIN, 0.0);
            for i in (0..grid.len()).filter(|&i| cycle[i] == k) {
                if values[i] > best {
                    best = values[i];
                    at = grid[i];
                }
            }
            json!({ "cycle": k, "peak": best, "t": at })
        })
        .collect()
}

fn master(s: &Scenario, e: &Experiment, w: &mut Writer) -> Result<Value, CliError> {
    let (grid, cycle) = cycle_grid(s, e);
    let opts = MasterOptions { tol: s.run.open_tolerances(), ..Default::default() };
    w.prov.tolerances.push(("master".into(), opts.tol));
    let labels = e.labels();
    let dim = e.basis.dim();
    let mut pops: Vec<Vec<f64>> = vec![Vec::with_capacity(grid.len()); dim];
    let mut trace = Vec::with_capacity(grid.len());
    let mut diagnostics = Vec::new();
    for seg in segments(s, &cycle) {
        let t0 = grid[seg.start];
        let rho0 = DensityMatrix::basis_state(dim, e.initial_index(), t0);
        let (_, diag) = propagate_master(&e.hamiltonian, &e.channels, &rho0, &grid[seg], &opts, |rho| {
            for (i, col) in pops.iter_mut().enumerate() {
                col.push(rho.population(i));
            }
            trace.push(rho.trace().re);
            Ok(())
        })?;
        diagnostics.push(diag);
    }
    let mut ts = TimeSeries::new("t", grid.clone());
    for (label, col) in labels.iter().zip(&pops) {
        ts.push_column(format!("P_{label}"), col.clone());
    }
    ts.push_column("trace", trace);
    ts.set_meta("reprepare_each_cycle", s.run.reprepare_each_cycle);
    w.csv("master_populations.csv", ts)?;

    let n = s.cycles();
    Ok(json!({
        "cycles": n,
        "target_peaks": peaks_per_cycle(&pops[e.final_index()], &grid, &cycle, n),
        "intermediate_peaks": peaks_per_cycle(&pops[e.intermediate_index()], &grid, &cycle, n),
        "diagnostics": diagnostics,
    }))
}

#[derive(Serialize)]
struct JumpRecord<'a> {
    stream: usize,
    time: f64,
    kind: &'static str,
    from: &'a str,
    to: &'a str,
}

fn trajectory(s: &Scenario, e: &Experiment, w: &mut Writer) -> Result<Value, CliError> {
    let (grid, cycle) = cycle_grid(s, e);
    let opts = TrajectoryOptions { tol: s.run.open_tolerances(), ..Default::default() };
    w.prov.tolerances.push(("trajectory".into(), opts.tol));
    let labels = e.labels();
    let psi0 = e.initial_state();
    let n_traj = s.run.n_traj;
    let segs = segments(s, &cycle);

    let mut mean = TimeSeries::new("t", grid.clone());
    let mut example = TimeSeries::new("t", grid.clone());
    let mut events: Vec<Vec<JumpEvent>> = vec![Vec::new(); n_traj];
    let mut mean_cols: Vec<(String, Vec<f64>)> = Vec::new();
    let mut example_cols: Vec<(String, Vec<f64>)> = Vec::new();
    for (k, seg) in segs.into_iter().enumerate() {
        // restarted cycles draw from a fresh seed so they are independent
        let seed = s.run.seed.wrapping_add(k as u64);
        let g = &grid[seg];
        let ens = ensemble_average(&e.hamiltonian, &e.channels, &psi0, g, n_traj, seed, &labels, &opts)?;
        let one = run_stream(&e.hamiltonian, &e.channels, &psi0, g, seed, 0, &labels, &opts)?;
        append_columns(&mut mean_cols, &ens.populations);
        append_columns(&mut example_cols, &one.populations);
        for (all, seg_events) in events.iter_mut().zip(ens.events) {
            all.extend(seg_events);
        }
    }
    for (name, col) in mean_cols {
        mean.push_column(name, col);
    }
    for (name, col) in example_cols {
        example.push_column(name, col);
    }
    mean.set_meta("n_traj", n_traj);
    mean.set_meta("seed", s.run.seed);
    example.set_meta("stream", 0);
    example.set_meta("seed", s.run.seed);
    w.csv("ensemble_populations.csv", mean)?;
    w.csv("trajectory_0.csv", example)?;

    let n = s.cycles();
    let period = e.pulses.period;
    let per_cycle: Vec<Vec<usize>> =
        events.iter().map(|ev| jumps_per_cycle(ev, ChannelKind::A, 0.0, period, n)).collect();
    let mut counts = TimeSeries::new("trajectory", (0..n_traj).map(|i| i as f64).collect());
    for k in 0..n {
        counts.push_column(format!("a_jumps_cycle_{k}"), per_cycle.iter().map(|c| c[k] as f64).collect());
    }
    for kind in [ChannelKind::Ge, ChannelKind::Bg] {
        counts.push_column(
            format!("{}_jumps", kind.name()),
            events.iter().map(|ev| ev.iter().filter(|j| j.kind == kind).count() as f64).collect(),
        );
    }
    w.csv("jump_counts.csv", counts)?;
    let log: Vec<JumpRecord> = events
        .iter()
        .enumerate()
        .flat_map(|(i, ev)| {
            let labels = &labels;
            ev.iter().map(move |j| JumpRecord {
                stream: i,
                time: j.time,
                kind: j.kind.name(),
                from: &labels[j.from],
                to: &labels[j.to],
            })
        })
        .collect();
    w.json("jumps.json", &log)?;

    let expected = e.target().final_photons();
    let histogram = jump_histogram(&per_cycle);
    let pairs = (n_traj * n) as f64;
    let exact = histogram.get(expected).copied().unwrap_or(0) as f64 / pairs;
    let every_cycle = per_cycle.iter().filter(|c| c.iter().all(|&x| x == expected)).count() as f64 / n_traj as f64;
    Ok(json!({
        "n_traj": n_traj,
        "seed": s.run.seed,
        "cycles": n,
        "expected_a_jumps_per_cycle": expected,
        "a_jump_histogram": histogram,
        "fraction_exact_per_cycle": exact,
        "fraction_exact_every_cycle": every_cycle,
        "total_ge_jumps": events.iter().flatten().filter(|j| j.kind == ChannelKind::Ge).count(),
        "total_bg_jumps": events.iter().flatten().filter(|j| j.kind == ChannelKind::Bg).count(),
    }))
}

fn append_columns(acc: &mut Vec<(String, Vec<f64>)>, ts: &TimeSeries) {
    if acc.is_empty() {
        acc.extend(ts.columns.iter().map(|c| (c.name.clone(), Vec::new())));
    }
    for (name, col) in acc.iter_mut() {
        col.extend(ts.values(name).unwrap_or_default());
    }
}

fn correlators(s: &Scenario, e: &Experiment, w: &mut Writer) -> Result<Value, CliError> {
    let opts = MasterOptions { tol: Tolerances::closed(), check_positivity: true };
    w.prov.tolerances.push(("correlators".into(), opts.tol));
    let n_bundle = e.target().final_photons();
    let single = BundleOperator::new(&e.basis, 1)?;
    let bundle = BundleOperator::new(&e.basis, n_bundle)?;
    let window = e
        .pulses
        .overlap_window(0, EXTREMUM_OVERLAP_FRACTION)
        .ok_or_else(|| CliError::Validation("pulses do not overlap at half height".into()))?;
    let end = e.pulse_pair_end(0);

    let (coarse, _) = cycle_grid(s, e);
    let mut grid: Vec<f64> = coarse;
    grid.extend(uniform_grid(window.0, window.1, EXTREMUM_POINTS));
    grid.push(end);
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() < 1e-9);

    let energies = &e.basis.energies;
    let mut s1: Vec<G2Sample> = Vec::with_capacity(grid.len());
    let mut sn: Vec<G2Sample> = Vec::with_capacity(grid.len());
    let mut i1 = Vec::with_capacity(grid.len());
    let mut i_n = Vec::with_capacity(grid.len());
    let mut target = Vec::with_capacity(grid.len());
    let (_, diag) = propagate_master(&e.hamiltonian, &e.channels, &e.initial_density(), &grid, &opts, |rho| {
        s1.push(g2_sample(rho, &single, energies));
        sn.push(g2_sample(rho, &bundle, energies));
        i1.push(rho.expectation(&single.intensity, energies).re);
        i_n.push(rho.expectation(&bundle.intensity, energies).re);
        target.push(rho.population(e.final_index()));
        Ok(())
    })?;

    let col1 = "g2_1".to_string();
    let col_n = format!("g2_{n_bundle}");
    let mut table = g2_series(grid.clone(), &s1, 1);
    let bundle_table = g2_series(grid.clone(), &sn, n_bundle);
    table.push_masked_column(col_n.clone(), bundle_table.column(&col_n).map(|c| c.values.clone()).unwrap_or_default());
    table.push_column("intensity_1", i1);
    table.push_column(format!("intensity_{n_bundle}"), i_n);
    table.push_column("P_target", target);
    let analytic: Vec<Option<f64>> = grid
        .iter()
        .map(|&t| {
            mixing_angles(&e.spectrum, &e.pulses, e.target(), t).ok().and_then(|a| analytic_g2_equal_time(a.theta).ok())
        })
        .collect();
    table.push_masked_column("g2_1_analytic", analytic.clone());
    table.set_meta("negative_masked_1", s1.iter().filter(|x| x.is_negative()).count());
    table.set_meta("negative_masked_n", sn.iter().filter(|x| x.is_negative()).count());
    table.set_meta("extremum_window", window);

    let (t1, g1) = find_extremum(&table, &col1, Extremum::Max, window)?;
    let (tn, gn) = find_extremum(&table, &col_n, Extremum::Min, window)?;

    let mut analytic_summary = Value::Null;
    if let Some(from) = s.run.analytic_from {
        let g = table.column(&col1).map(|c| c.values.clone()).unwrap_or_default();
        let mut worst: f64 = 0.0;
        let mut compared = 0;
        for ((&t, a), v) in grid.iter().zip(&analytic).zip(&g) {
            if t < from || t > end {
                continue;
            }
            if let (Some(a), Some(v)) = (a, v) {
                worst = worst.max((v - a).abs() / a.abs());
                compared += 1;
            }
        }
        let at_end = grid.iter().position(|&t| (t - end).abs() < 1e-9).and_then(|i| g[i]);
        analytic_summary = json!({
            "from": from,
            "to": end,
            "points": compared,
            "max_relative_deviation": worst,
            "g2_1_at_end": at_end,
        });
    }
    w.csv("g2_equal_time.csv", table)?;

    let kappa_a = e.params.kappa.a;
    let tau = uniform_grid(0.0, s.run.tau_lifetimes / kappa_a, s.run.tau_points);
    let mut delayed = Vec::new();
    for (op, anchor, want_below) in [(&single, t1, true), (&bundle, tn, false)] {
        let (rho_t, _) = propagate_master(&e.hamiltonian, &e.channels, &e.initial_density(), &[anchor], &opts, |_| Ok(()))?;
        let c = correlate_from(&e.hamiltonian, &e.channels, &rho_t, op, &tau, &opts)?;
        let g0 = c.g2[0];
        let later = &c.g2[1..];
        // single photons are bunched at the anchor, bundles antibunched
        let holds = later.iter().filter(|&&g| if want_below { g < g0 } else { g > g0 }).count();
        delayed.push(json!({
            "order": op.order,
            "anchor": anchor,
            "g2_zero_delay": g0,
            "fraction_inequality_holds": holds as f64 / later.len() as f64,
        }));
        w.csv(&format!("g2_delayed_{}.csv", op.order), c.to_series())?;
    }

    Ok(json!({
        "bundle_order": n_bundle,
        "extremum_window": window,
        "g2_1_max": { "t": t1, "value": g1 },
        "g2_n_min": { "t": tn, "value": gn },
        "analytic": analytic_summary,
        "delayed": delayed,
        "diagnostics": diag,
    }))
}

fn coeff_sweep(s: &Scenario, w: &mut Writer) -> Result<Value, CliError> {
    let sw = s.sweep.as_ref().ok_or_else(|| CliError::Validation("missing [sweep] section".into()))?;
    let p = ModelParams::resonant(sw.lambda_min, sw.omega_b);
    let cfg = SpaceConfig::new(sw.n_fock)?;
    let grid = uniform_grid(sw.lambda_min, sw.lambda_max, sw.points);
    let mut states = Vec::new();
    for st in &sw.states {
        let table = coefficient_sweep(&p, &cfg, &grid, st.selector()?, &st.photons)?;
        let peaks: Vec<Value> = st
            .photons
            .iter()
            .map(|m| {
                let col = table.values(&format!("C_{}_{m}", table_label(&table))).unwrap_or_default();
                let (mut best, mut at) = (0.0_f64, 0.0);
                for (&l, c) in grid.iter().zip(&col) {
                    if c.abs() > best {
                        best = c.abs();
                        at = l;
                    }
                }
                json!({ "photons": m, "max_abs": best, "lambda": at })
            })
            .collect();
        states.push(json!({ "label": st.label, "peaks": peaks }));
        w.csv(&format!("coefficients_{}.csv", st.label), table)?;
    }
    Ok(json!({ "n_fock": sw.n_fock, "points": sw.points, "states": states }))
}

fn table_label(ts: &TimeSeries) -> String {
    ts.metadata.get("state").and_then(|v| v.as_str()).unwrap_or_default().to_string()
}

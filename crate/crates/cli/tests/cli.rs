use std::path::PathBuf;
use std::process::Command;

use bundlesim::series::TimeSeries;
use bundlesim_cli::scenario::BUNDLED;
use bundlesim_cli::{run, CliError, RunKind, Scenario};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("bundlesim-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bundlesim"))
}

#[test]
fn two_photon_scenario_loads() {
    let s = Scenario::resolve("two_photon").unwrap();
    let p = s.pulses.as_ref().unwrap();
    assert_eq!(p.amplitude_ratio, 6.8538);
    assert_eq!(p.pump_amplitude, 0.008);
    assert_eq!(s.target.as_ref().unwrap().pairs, 1);
    assert_eq!(s.run.kind, RunKind::Master);
    assert_eq!(s.cycles(), 3);
}

#[test]
fn negative_kappa_is_rejected() {
    let text = BUNDLED.iter().find(|(n, _)| *n == "two_photon").unwrap().1.replace("a = 1e-4", "a = -1e-4");
    let err = Scenario::from_toml(&text).unwrap_err();
    assert!(matches!(err, CliError::Validation(_)), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn unknown_keys_are_parse_errors() {
    let text = BUNDLED[1].1.replace("[model]", "[model]\nlambdaa = 3.0");
    assert!(matches!(Scenario::from_toml(&text), Err(CliError::Parse(_))));
}

#[test]
fn save_and_load_round_trip() {
    let dir = scratch("roundtrip");
    std::fs::create_dir_all(&dir).unwrap();
    for (name, _) in BUNDLED {
        let s = Scenario::resolve(name).unwrap();
        let path = dir.join(format!("{name}.toml"));
        s.save(&path).unwrap();
        assert_eq!(Scenario::load(&path).unwrap(), s);
    }
}

#[test]
fn reruns_are_bit_identical() {
    let s = Scenario::resolve("two_photon")
        .unwrap()
        .with_overrides(&["run.kind=\"trajectory\"".into(), "run.n_traj=3".into(), "run.cycles=1".into()])
        .unwrap();
    let (a, b) = (scratch("rerun-a"), scratch("rerun-b"));
    let out = run(&s, &[], &a).unwrap();
    run(&s, &[], &b).unwrap();
    for f in &out.files {
        let x = std::fs::read(a.join(f)).unwrap();
        let y = std::fs::read(b.join(f)).unwrap();
        assert!(x == y, "{f} differs between reruns");
    }
}

#[test]
fn closed_run_writes_tables_with_provenance() {
    let dir = scratch("closed");
    let s = Scenario::resolve("two_photon").unwrap().with_overrides(&["run.points_per_cycle=200".into()]).unwrap();
    let s = s.with_overrides(&["run.kind=\"closed\"".into()]).unwrap();
    let out = run(&s, &["run.kind=closed".into()], &dir).unwrap();
    for f in ["closed_populations.csv", "effective_populations.csv", "pulses.csv", "summary.json", "provenance.json"] {
        assert!(out.files.iter().any(|x| x == f), "missing {f}");
    }
    let table = TimeSeries::read_csv(&std::fs::read_to_string(dir.join("closed_populations.csv")).unwrap()).unwrap();
    assert_eq!(table.len(), 201);
    assert_eq!(table.metadata["scenario"], "two_photon");
    assert_eq!(table.metadata["overrides"][0], "run.kind=closed");
    assert!(out.summary["final_target"].as_f64().unwrap() > 0.99);
    let resolved = Scenario::load(&dir.join("scenario.toml")).unwrap();
    assert_eq!(resolved, s);
}

#[test]
fn sweep_writes_one_table_per_state() {
    let dir = scratch("sweep");
    let s = Scenario::resolve("fig2_sweep").unwrap().with_overrides(&["sweep.points=20".into()]).unwrap();
    let out = run(&s, &[], &dir).unwrap();
    let t = TimeSeries::read_csv(&std::fs::read_to_string(dir.join("coefficients_eps0.csv")).unwrap()).unwrap();
    assert_eq!(t.len(), 20);
    assert!(t.values("C_even0_0").is_some());
    assert!(out.files.iter().any(|f| f == "coefficients_eps1.csv"));
}

#[test]
fn exit_codes() {
    let ok = bin().arg("list").output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("four_photon"));

    let missing = bin().args(["check", "/nonexistent/scenario.toml"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(3));

    let invalid = bin().args(["check", "two_photon", "--override", "kappa.a=-1"]).output().unwrap();
    assert_eq!(invalid.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&invalid.stderr).contains("kappa.a"));

    let dir = scratch("gate");
    // a far too short pulse pair breaks adiabatic following
    let gated = bin()
        .args(["run", "two_photon", "--kind", "closed", "--override", "pulses.width=20", "--override"])
        .args(["pulses.pump_center=80", "--override", "pulses.stokes_center=60", "--out-dir"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(gated.status.code(), Some(3), "{}", String::from_utf8_lossy(&gated.stderr));
    assert!(String::from_utf8_lossy(&gated.stderr).contains("validity gate"));
}

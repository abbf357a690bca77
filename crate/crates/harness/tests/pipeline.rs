use std::fs;
use std::path::Path;
use std::process::Command;

use ringlab::compare::ComparisonReport;
use ringlab::config::Diagnostics;
use ringlab::gates::KNOWN;
use ringlab::simulate::EmpiricalRadial;
use ringlab::{
    compare, compare_stage, run_report, run_simulation, run_theory, simulation_stage, Error, RunConfig,
};
use ringlab_core::measures::ks_distance;
use ringlab_core::Measure;

fn config(theta: &str, ensemble: &str, out: &Path) -> RunConfig {
    let text = format!(
        "spec_version = 1\nreplicas = 3\noutput_dir = {:?}\n\n[theta]\n{theta}\n\n[ensemble]\n{ensemble}\n",
        out.display().to_string()
    );
    RunConfig::from_toml(&text).unwrap()
}

const TWO_ATOMS: &str = "kind = \"atoms\"\nlocations = [1.0, 2.0]\nweights = [0.5, 0.5]";
const SMALL_UTV: &str = "n = 120\nmodel = \"utv_unitary\"\nseed = 3";

/// 360 pooled moduli put the radial KS noise near 0.07, above the default gate.
fn small(out: &Path) -> RunConfig {
    let mut c = config(TWO_ATOMS, SMALL_UTV, out);
    c.grids.z_points = 21;
    c.gates.insert("ks_radial".into(), 0.12);
    c.override_gates = true;
    c
}

#[test]
fn toml_and_json_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let c = small(dir.path());
    let back = RunConfig::from_json(&c.to_json().unwrap()).unwrap();
    assert_eq!(c, back);
    let again = RunConfig::from_toml(&c.to_toml().unwrap()).unwrap();
    assert_eq!(c, again);
    for name in ["two_atoms.toml", "two_atoms_orthogonal.toml", "circular_law.toml", "log_gas.toml", "regularized.toml"] {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
        RunConfig::load(&path).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let c = small(dir.path());
    let check = |edit: &dyn Fn(&mut RunConfig)| {
        let mut bad = c.clone();
        edit(&mut bad);
        assert!(matches!(bad.validate(), Err(Error::Config(_)) | Err(Error::Core(_))), "{bad:?}");
    };
    check(&|b| b.spec_version = 99);
    check(&|b| b.replicas = 0);
    check(&|b| {
        b.gates.insert("no_such_gate".into(), 1.0);
    });
    check(&|b| {
        b.gates.insert("ks_radial".into(), -1.0);
    });
    check(&|b| {
        b.override_gates = false;
        b.gates.insert("ks_radial".into(), 0.5);
    });
    check(&|b| b.ensemble.noise_gamma = Some(0.4));
    check(&|b| b.ensemble.n = 0);
}

#[test]
fn tightening_is_free_and_loosening_is_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(dir.path());
    c.gates.insert("ks_radial".into(), 0.2);
    c.gates.insert("weyl_rel".into(), 1e-9);
    c.override_gates = true;
    let gates = c.gates().unwrap();
    let ks = gates.iter().find(|g| g.name == "ks_radial").unwrap();
    assert!(ks.loosened);
    assert!(!gates.iter().find(|g| g.name == "weyl_rel").unwrap().loosened);
    let out = run_report(&c).unwrap();
    let json: serde_json::Value = serde_json::from_str(&out.report.to_json().unwrap()).unwrap();
    assert_eq!(json["override"], true);
    assert_eq!(out.report.gate("ks_radial").unwrap().threshold, 0.2);
}

#[test]
fn every_gate_is_reported_once() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(dir.path());
    c.gates.insert("w1_radial".into(), 0.01);
    let out = run_report(&c).unwrap();
    let names: Vec<&str> = out.report.gates.iter().map(|g| g.name.as_str()).collect();
    let expected: Vec<String> = c.gates().unwrap().into_iter().map(|g| g.name).collect();
    assert_eq!(names, expected);
    for (known, _) in KNOWN {
        assert!(names.iter().filter(|n| *n == known).count() <= 1);
    }
    for g in &out.report.gates {
        assert!(g.measured.is_some(), "{} not measured", g.name);
    }
    assert!(out.report.all_pass, "{}", out.report.summary());
    assert!(out.plots.len() >= 3);
    for p in &out.plots {
        assert!(p.exists());
    }
}

#[test]
fn theory_examples() {
    let dir = tempfile::tempdir().unwrap();
    let disk = config("kind = \"quarter_circle\"", SMALL_UTV, dir.path());
    let t = run_theory(&disk).unwrap();
    assert_eq!(t.a, 0.0);
    assert!((t.b - 1.0).abs() < 1e-5, "{}", t.b);
    let law = t.stransform.as_ref().unwrap();
    for (r, d) in law.r_grid.iter().zip(&law.density) {
        if *r > 0.0 && *r < 0.99 {
            assert!((d - 1.0 / std::f64::consts::PI).abs() < 1e-3, "r = {r}: {d}");
        }
    }
    t.persist(dir.path()).unwrap();
    let csv = fs::read_to_string(dir.path().join("theory_stransform.csv")).unwrap();
    assert!(csv.starts_with("r,density,cdf\n"));

    let point = config("kind = \"dirac\"\nat = 1.0", SMALL_UTV, dir.path());
    let t = run_theory(&point).unwrap();
    assert!(t.collapsed && t.stransform.as_ref().unwrap().collapsed);

    let ring = run_theory(&small(dir.path())).unwrap();
    assert!((ring.a - 1.264911).abs() < 1e-6 && (ring.b - 1.581139).abs() < 1e-6);
    assert!(ring.errors.is_empty());
}

#[test]
fn unit_singular_values_give_unit_moduli() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config("kind = \"dirac\"\nat = 1.0", SMALL_UTV, dir.path());
    c.diagnostics.girko_field = false;
    let sim = run_simulation(&c).unwrap();
    for r in &sim.replicas {
        assert!(r.eigenvalues.iter().all(|z| (z.norm() - 1.0).abs() < 1e-10));
        assert!(r.single_ring);
    }
    let out = run_report(&c).unwrap();
    assert!(out.report.collapsed);
    let svg = fs::read_to_string(dir.path().join("eigenvalues.svg")).unwrap();
    assert_eq!(svg.matches("stroke-dasharray=\"5,3\"").count(), 1);
}

#[test]
fn orthogonal_ring_matches_unitary_ring() {
    let dir = tempfile::tempdir().unwrap();
    let mut u = small(&dir.path().join("u"));
    u.replicas = 8;
    u.diagnostics.girko_field = false;
    let mut o = u.clone();
    o.ensemble.model = ringlab_rmt::Model::UtvOrthogonal;
    let su = run_simulation(&u).unwrap().empirical().unwrap().pooled();
    let so = run_simulation(&o).unwrap().empirical().unwrap().pooled();
    // two-sample KS at 960 + 960 points, 0.1% level
    let ks = ks_distance(&Measure::empirical(su).unwrap(), &Measure::empirical(so).unwrap());
    assert!(ks < 1.95 * (2.0f64 / 960.0).sqrt(), "KS {ks}");
}

#[test]
fn mismatched_theta_fails_the_annulus_gate() {
    let dir = tempfile::tempdir().unwrap();
    let ens = format!("{SMALL_UTV}\n[ensemble.theta]\nkind = \"quarter_circle\"");
    let mut c = config("kind = \"dirac\"\nat = 1.0", &ens, dir.path());
    c.diagnostics.girko_field = false;
    let out = run_report(&c).unwrap();
    let gate = out.report.gate("annulus_slack").unwrap();
    assert!(!gate.pass && gate.measured.unwrap() > 0.5, "{gate:?}");
    assert!(!out.report.all_pass);
}

#[test]
fn empty_empirical_sample_is_a_precondition_error() {
    assert!(matches!(EmpiricalRadial::new(vec![]), Err(Error::Precondition(_))));
    assert!(matches!(EmpiricalRadial::new(vec![vec![], vec![]]), Err(Error::Precondition(_))));
    assert!(EmpiricalRadial::from_csv("replica,r\n").is_err());
    let emp = EmpiricalRadial::new(vec![vec![1.0, 1.5], vec![1.2]]).unwrap();
    let back = EmpiricalRadial::from_csv(&emp.to_csv()).unwrap();
    assert_eq!(back.replicas(), emp.replicas());

    let dir = tempfile::tempdir().unwrap();
    let t = run_theory(&small(dir.path())).unwrap();
    let gates = small(dir.path()).gates().unwrap();
    let r: ComparisonReport = compare(t.law().unwrap(), &emp, &gates, 8).unwrap();
    assert_eq!(r.radii.min_mod_empirical, 1.0);
}

#[test]
fn failing_replicas_are_reported_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    // 10 sweeps cannot cover the log-gas burn-in, so every replica fails
    let ens = format!("{SMALL_UTV}\n[ensemble.theta]\nkind = \"fz\"\nsweeps = 10\npotential = {{ kind = \"linear\" }}");
    let mut c = config(TWO_ATOMS, &ens, dir.path());
    c.diagnostics = Diagnostics { girko_field: false, ..Default::default() };
    let (sim, report) = simulation_stage(&c).unwrap();
    assert_eq!(sim.failures().len(), 3);
    assert_eq!(report.diagnostics.replica_failures.len(), 3);
    assert!(!report.all_pass);
    let csv = fs::read_to_string(dir.path().join("replicas.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn compare_stage_reads_the_simulated_sample() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(dir.path());
    c.diagnostics.girko_field = false;
    simulation_stage(&c).unwrap();
    let report = compare_stage(&c).unwrap();
    assert!(report.all_pass, "{}", report.summary());
    assert!(report.gate("weyl_rel").is_none());
    assert!(report.gate("ks_radial").is_some());
}

fn write_config(dir: &Path, theta: &str, ensemble: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    fs::write(
        &path,
        format!("spec_version = 1\nreplicas = 2\noutput_dir = \"unused\"\noverride = true\n\n[gates]\nks_radial = 0.12\n\n[theta]\n{theta}\n\n[ensemble]\n{ensemble}\n\n[diagnostics]\ngirko_field = false\n"),
    )
    .unwrap();
    path
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), TWO_ATOMS, SMALL_UTV);
    let bin = env!("CARGO_BIN_EXE_ringlab");
    for sub in ["theory", "simulate", "compare", "report"] {
        let out = dir.path().join("good");
        let status = Command::new(bin)
            .args([sub, "--config", good.to_str().unwrap(), "--seed", "5", "--out", out.to_str().unwrap()])
            .env("RINGLAB_WORKERS", "1")
            .env("RUST_LOG", "warn")
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0), "{sub}");
    }
    let report = fs::read_to_string(dir.path().join("good/report.json")).unwrap();
    assert!(report.contains("\"all_pass\": true"));

    let bad_dir = tempfile::tempdir().unwrap();
    let bad = write_config(bad_dir.path(), "kind = \"dirac\"\nat = 1.0", &format!("{SMALL_UTV}\n[ensemble.theta]\nkind = \"quarter_circle\""));
    let status = Command::new(bin)
        .args(["report", "--config", bad.to_str().unwrap(), "--out", bad_dir.path().join("o").to_str().unwrap()])
        .env("RUST_LOG", "warn")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));

    let status = Command::new(bin)
        .args(["fz-sample", "--config", good.to_str().unwrap(), "--out", bad_dir.path().join("f").to_str().unwrap()])
        .env("RUST_LOG", "off")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn fz_sample_matches_equilibrium() {
    let dir = tempfile::tempdir().unwrap();
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/log_gas.toml");
    let mut c = RunConfig::load(&path).unwrap().with_output_dir(dir.path().to_path_buf());
    c.fz.n = Some(100);
    c.fz.kept = 10;
    let (fz, report) = ringlab::fz_stage(&c).unwrap();
    assert_eq!(fz.x.len(), 1000);
    assert!(report.all_pass, "{}", report.summary());
    assert!(dir.path().join("fz_checkpoint.json").exists());
    let csv = fs::read_to_string(dir.path().join("fz_equilibrium.csv")).unwrap();
    assert!(csv.starts_with("x,density\n"));
}

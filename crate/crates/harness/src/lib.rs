//! Experiment harness: configuration, theory and simulation runs,
//! comparison gates and plots.

pub mod compare;
pub mod config;
pub mod error;
pub mod fzrun;
pub mod gates;
pub mod io;
pub mod plot;
pub mod simulate;
pub mod theory;

use std::path::PathBuf;

pub use compare::{compare, ComparisonReport, GateVerdict};
pub use config::{RunConfig, ThetaSpec, SPEC_VERSION};
pub use error::{Error, Result};
pub use fzrun::{run_fz_sample, FzSample};
pub use gates::Gate;
pub use simulate::{run_simulation, EmpiricalRadial, SimulationRun};
pub use theory::{run_theory, TheoryRun};

use crate::io::write_file;
use crate::plot::{emit_plots, PlotInputs};
use crate::simulate::histogram_bins;

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "RINGLAB_WORKERS";

/// Sizes the global worker pool from `RINGLAB_WORKERS` (if set) and returns
/// the pool size. Only the first call can change it.
pub fn configure_workers() -> usize {
    if let Some(n) = std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global().is_err() {
            log::debug!("worker pool already initialized");
        }
    }
    rayon::current_num_threads()
}

fn subset(gates: &[Gate], names: &[&str]) -> Vec<Gate> {
    gates.iter().filter(|g| names.contains(&g.name.as_str())).cloned().collect()
}

const THEORY_GATES: &[&str] = &["crossval_sup", "quantile_identity"];
const SIMULATION_GATES: &[&str] = &["weyl_rel", "hermitize", "girko_mass_defect", "min_singular_freq"];
const COMPARE_GATES: &[&str] = &[
    "crossval_sup",
    "quantile_identity",
    "ks_radial",
    "w1_radial",
    "annulus_slack",
    "single_ring_rate",
];

fn blank_report(config: &RunConfig) -> ComparisonReport {
    ComparisonReport {
        spec_version: SPEC_VERSION,
        collapsed: false,
        radii: Default::default(),
        distances: Default::default(),
        diagnostics: Default::default(),
        override_gates: config.override_gates,
        gates: Vec::new(),
        all_pass: false,
    }
}

fn add_theory(report: &mut ComparisonReport, theory: &TheoryRun) {
    report.collapsed = theory.collapsed;
    report.radii.a_theory = theory.a;
    report.radii.b_theory = theory.b;
    report.distances.sup_density_crossval = theory.crossval.as_ref().map(|c| c.sup);
    report.distances.quantile_identity = theory.quantile_defect();
    report.diagnostics.theory_errors = theory.errors.clone();
}

fn add_simulation(report: &mut ComparisonReport, sim: &SimulationRun, tol_weyl: f64, tol_herm: f64) {
    let d = &mut report.diagnostics;
    d.weyl_max_excess = sim.max_weyl_excess();
    d.weyl_pass = d.weyl_max_excess.map(|e| e <= tol_weyl);
    d.hermitize_max_defect = sim.max_hermitize_defect();
    d.hermitize_pass = d.hermitize_max_defect.map(|e| e <= tol_herm);
    d.min_singular_stats = sim.min_singular.clone();
    d.girko_mass_defect = sim.girko.as_ref().and_then(|g| g.mass_defect);
    d.replica_failures = sim.failures();
}

fn threshold(gates: &[Gate], name: &str, fallback: f64) -> f64 {
    gates.iter().find(|g| g.name == name).map(|g| g.threshold).unwrap_or(fallback)
}

/// `theory` subcommand: both routes, persisted, judged on agreement.
pub fn theory_stage(config: &RunConfig) -> Result<(TheoryRun, ComparisonReport)> {
    let gates = config.gates()?;
    config.prepare_output()?;
    let theory = run_theory(config)?;
    theory.persist(&config.output_dir)?;
    let mut report = blank_report(config);
    add_theory(&mut report, &theory);
    report.judge(&subset(&gates, THEORY_GATES));
    write_file(&config.output_dir.join("theory_report.json"), &report.to_json()?)?;
    Ok((theory, report))
}

/// `simulate` subcommand: replicas, persisted, judged on the exact identities.
pub fn simulation_stage(config: &RunConfig) -> Result<(SimulationRun, ComparisonReport)> {
    let gates = config.gates()?;
    config.prepare_output()?;
    let sim = run_simulation(config)?;
    sim.persist(&config.output_dir)?;
    let mut report = blank_report(config);
    add_simulation(&mut report, &sim, threshold(&gates, "weyl_rel", 1e-8), threshold(&gates, "hermitize", 1e-10));
    if let Ok(emp) = sim.empirical() {
        let pooled = emp.pooled();
        report.radii.min_mod_empirical = pooled[0];
        report.radii.max_mod_empirical = *pooled.last().unwrap();
    }
    report.judge(&subset(&gates, SIMULATION_GATES));
    write_file(&config.output_dir.join("simulation_report.json"), &report.to_json()?)?;
    Ok((sim, report))
}

/// `compare` subcommand: theory recomputed from the config against the
/// radial sample `radial.csv` left by `simulate`.
pub fn compare_stage(config: &RunConfig) -> Result<ComparisonReport> {
    let gates = config.gates()?;
    config.prepare_output()?;
    let emp = EmpiricalRadial::load(&config.output_dir.join("radial.csv"))?;
    let theory = run_theory(config)?;
    let law = theory.law().ok_or_else(|| Error::Precondition(format!("no radial law: {:?}", theory.errors)))?;
    let used = subset(&gates, COMPARE_GATES);
    let mut report = compare(law, &emp, &used, histogram_bins(config))?;
    add_theory(&mut report, &theory);
    report.override_gates |= config.override_gates;
    report.judge(&used);
    write_file(&config.output_dir.join("compare_report.json"), &report.to_json()?)?;
    Ok(report)
}

/// `fz-sample` subcommand.
pub fn fz_stage(config: &RunConfig) -> Result<(FzSample, ComparisonReport)> {
    let gates = config.gates()?;
    config.prepare_output()?;
    let fz = run_fz_sample(config)?;
    fz.persist(&config.output_dir)?;
    let mut report = blank_report(config);
    report.diagnostics.fz_ks = Some(fz.ks);
    report.judge(&subset(&gates, &["fz_ks"]));
    write_file(&config.output_dir.join("fz_report.json"), &report.to_json()?)?;
    Ok((fz, report))
}

/// Everything a full run produced.
pub struct RunOutput {
    pub theory: TheoryRun,
    pub simulation: SimulationRun,
    pub fz: Option<FzSample>,
    pub report: ComparisonReport,
    pub plots: Vec<PathBuf>,
}

/// `report` subcommand: theory, simulation, comparison, plots and the full
/// report with every configured gate.
pub fn run_report(config: &RunConfig) -> Result<RunOutput> {
    let gates = config.gates()?;
    config.prepare_output()?;
    let dir = &config.output_dir;
    write_file(&dir.join("config.json"), &config.to_json()?)?;
    let theory = run_theory(config)?;
    theory.persist(dir)?;
    let simulation = run_simulation(config)?;
    simulation.persist(dir)?;
    let fz = match config.theta {
        ThetaSpec::Fz { .. } => {
            let fz = run_fz_sample(config)?;
            fz.persist(dir)?;
            Some(fz)
        }
        _ => None,
    };
    let law = theory.law().ok_or_else(|| Error::Precondition(format!("no radial law: {:?}", theory.errors)))?;
    let emp = simulation.empirical()?;
    let bins = histogram_bins(config);
    let mut report = compare(law, &emp, &gates, bins)?;
    add_theory(&mut report, &theory);
    add_simulation(&mut report, &simulation, threshold(&gates, "weyl_rel", 1e-8), threshold(&gates, "hermitize", 1e-10));
    report.diagnostics.fz_ks = fz.as_ref().map(|f| f.ks);
    report.override_gates |= config.override_gates;
    report.judge(&gates);

    let first = simulation.replicas.iter().find(|r| r.ok());
    let plots = emit_plots(
        &PlotInputs {
            law,
            eigenvalues: first.map(|r| r.eigenvalues.as_slice()).unwrap_or(&[]),
            sorted_moduli: &emp.pooled(),
            bins: (bins * 2).max(20),
            field: simulation.girko.as_ref().map(|g| &g.field),
        },
        dir,
    )?;
    write_file(&dir.join("report.json"), &report.to_json()?)?;
    Ok(RunOutput { theory, simulation, fz, report, plots })
}

//! Theory-versus-simulation verdicts.

use serde::Serialize;

use ringlab_core::measures::wasserstein1;
use ringlab_core::{Measure, RingLaw};
use ringlab_rmt::girko::MinSingularStats;

use crate::config::SPEC_VERSION;
use crate::error::{Error, Result};
use crate::gates::{Direction, Gate};
use crate::simulate::{has_internal_gap, EmpiricalRadial};

#[derive(Clone, Debug, Default, Serialize)]
pub struct Radii {
    pub a_theory: f64,
    pub b_theory: f64,
    pub min_mod_empirical: f64,
    pub max_mod_empirical: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Distances {
    pub ks_radial: f64,
    pub w1_radial: f64,
    pub sup_density_crossval: Option<f64>,
    pub quantile_identity: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Diagnostics {
    pub weyl_pass: Option<bool>,
    pub weyl_max_excess: Option<f64>,
    /// `None` when the run skipped hermitization.
    pub hermitize_pass: Option<bool>,
    pub hermitize_max_defect: Option<f64>,
    pub min_singular_stats: Option<MinSingularStats>,
    pub girko_mass_defect: Option<f64>,
    /// Samples with no empty radial histogram bin inside their range.
    pub single_ring_replicas: usize,
    pub replicas: usize,
    pub replica_failures: Vec<(u64, String)>,
    pub theory_errors: Vec<String>,
    pub fz_ks: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GateVerdict {
    pub name: String,
    pub direction: Direction,
    pub threshold: f64,
    pub default: Option<f64>,
    pub loosened: bool,
    pub measured: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport {
    pub spec_version: u32,
    pub collapsed: bool,
    pub radii: Radii,
    pub distances: Distances,
    pub diagnostics: Diagnostics,
    /// Echo of the config flag that allows loosened gates.
    #[serde(rename = "override")]
    pub override_gates: bool,
    pub gates: Vec<GateVerdict>,
    pub all_pass: bool,
}

impl ComparisonReport {
    /// Value a gate is judged on, if this report has it.
    pub fn measurement(&self, gate: &str) -> Option<f64> {
        let d = &self.diagnostics;
        match gate {
            "crossval_sup" => self.distances.sup_density_crossval,
            "quantile_identity" => self.distances.quantile_identity,
            "ks_radial" => Some(self.distances.ks_radial),
            "w1_radial" => Some(self.distances.w1_radial),
            "annulus_slack" => Some(annulus_excess(&self.radii)),
            "single_ring_rate" => (d.replicas > 0).then(|| d.single_ring_replicas as f64 / d.replicas as f64),
            "weyl_rel" => d.weyl_max_excess,
            "hermitize" => d.hermitize_max_defect,
            "girko_mass_defect" => d.girko_mass_defect,
            "min_singular_freq" => d.min_singular_stats.as_ref().map(|s| s.frequency),
            "fz_ks" => d.fz_ks,
            _ => None,
        }
    }

    /// Recomputes every verdict. A gate with no measurement fails.
    pub fn judge(&mut self, gates: &[Gate]) {
        self.override_gates = self.override_gates || gates.iter().any(|g| g.loosened);
        self.gates = gates
            .iter()
            .map(|g| {
                let measured = self.measurement(&g.name).filter(|v| !v.is_nan());
                GateVerdict {
                    name: g.name.clone(),
                    direction: g.direction,
                    threshold: g.threshold,
                    default: g.default,
                    loosened: g.loosened,
                    measured,
                    pass: measured.is_some_and(|v| g.judge(v)),
                }
            })
            .collect();
        self.all_pass = self.gates.iter().all(|g| g.pass);
    }

    pub fn gate(&self, name: &str) -> Option<&GateVerdict> {
        self.gates.iter().find(|g| g.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One line per gate.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for g in &self.gates {
            let measured = g.measured.map(|v| format!("{v:.6e}")).unwrap_or_else(|| "not measured".into());
            let op = match g.direction {
                Direction::AtMost => "<=",
                Direction::AtLeast => ">=",
            };
            let tag = if g.pass { "PASS" } else { "FAIL" };
            out.push_str(&format!("{tag} {}: {measured} {op} {:e}\n", g.name, g.threshold));
        }
        out
    }
}

/// How far the empirical moduli leave `[a, b]`.
fn annulus_excess(r: &Radii) -> f64 {
    (r.a_theory - r.min_mod_empirical).max(r.max_mod_empirical - r.b_theory).max(0.0)
}

/// KS and W1 distances, annulus containment and the single-ring check of an
/// empirical radial sample against a limiting law.
pub fn compare(theory: &RingLaw, empirical: &EmpiricalRadial, gates: &[Gate], bins: usize) -> Result<ComparisonReport> {
    let pooled = empirical.pooled();
    if pooled.is_empty() {
        return Err(Error::Precondition("empirical radial sample is empty".into()));
    }
    let measure = Measure::empirical(pooled.clone())?;
    let ks_radial = measure.ks_to_cdf(|r| theory.cdf(r));
    let w1_radial = wasserstein1(&measure, &theory.radial_measure()?);
    let single = empirical
        .replicas()
        .iter()
        .filter(|rs| {
            let mut s = (*rs).clone();
            s.sort_by(f64::total_cmp);
            !has_internal_gap(&s, bins)
        })
        .count();
    let mut report = ComparisonReport {
        spec_version: SPEC_VERSION,
        collapsed: theory.collapsed,
        radii: Radii {
            a_theory: theory.a,
            b_theory: theory.b,
            min_mod_empirical: pooled[0],
            max_mod_empirical: *pooled.last().unwrap(),
        },
        distances: Distances { ks_radial, w1_radial, sup_density_crossval: None, quantile_identity: None },
        diagnostics: Diagnostics {
            single_ring_replicas: single,
            replicas: empirical.replicas().len(),
            ..Default::default()
        },
        override_gates: false,
        gates: Vec::new(),
        all_pass: false,
    };
    report.judge(gates);
    Ok(report)
}

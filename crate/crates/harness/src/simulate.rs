//! Replica runs with per-replica invariant checks.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use ringlab_core::quad::linspace;
use ringlab_core::C64;
use ringlab_rmt::girko::{girko_field_hessenberg, MinSingularStats};
use ringlab_rmt::hess::Hessenberg;
use ringlab_rmt::spectrum::hermitize_defect;
use ringlab_rmt::{assemble, density_from_field, min_singular_batch, EnsembleSpec, GirkoField, SpectrumSample};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::{csv, read_file, write_file};

#[derive(Clone, Debug, Serialize)]
pub struct ReplicaOutcome {
    pub replica: u64,
    #[serde(skip)]
    pub eigenvalues: Vec<C64>,
    #[serde(skip)]
    pub singular_values: Vec<f64>,
    pub weyl_excess: f64,
    pub hermitize_defect: Option<f64>,
    pub min_modulus: f64,
    pub max_modulus: f64,
    pub single_ring: bool,
    pub error: Option<String>,
}

impl ReplicaOutcome {
    fn failed(replica: u64, error: String) -> Self {
        Self {
            replica,
            eigenvalues: Vec::new(),
            singular_values: Vec::new(),
            weyl_excess: f64::NAN,
            hermitize_defect: None,
            min_modulus: f64::NAN,
            max_modulus: f64::NAN,
            single_ring: false,
            error: Some(error),
        }
    }

    pub fn ok(&self) -> bool {
        self.error.is_none()
    }

    pub fn moduli(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|z| z.norm()).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GirkoSummary {
    pub raw_mass: Option<f64>,
    pub mass_defect: Option<f64>,
    pub excluded: usize,
    pub nudged: usize,
    pub error: Option<String>,
    #[serde(skip)]
    pub field: GirkoField,
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulationRun {
    pub spec: EnsembleSpec,
    pub replicas: Vec<ReplicaOutcome>,
    pub girko: Option<GirkoSummary>,
    pub min_singular: Option<MinSingularStats>,
}

/// Radial samples grouped by replica.
#[derive(Clone, Debug)]
pub struct EmpiricalRadial {
    replicas: Vec<Vec<f64>>,
}

impl EmpiricalRadial {
    pub fn new(replicas: Vec<Vec<f64>>) -> Result<Self> {
        let replicas: Vec<Vec<f64>> = replicas.into_iter().filter(|r| !r.is_empty()).collect();
        if replicas.is_empty() {
            return Err(Error::Precondition("empirical radial sample is empty".into()));
        }
        if replicas.iter().flatten().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(Error::Precondition("radial samples must be finite and nonnegative".into()));
        }
        Ok(Self { replicas })
    }

    pub fn replicas(&self) -> &[Vec<f64>] {
        &self.replicas
    }

    /// All samples, sorted.
    pub fn pooled(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.replicas.iter().flatten().copied().collect();
        all.sort_by(f64::total_cmp);
        all
    }

    /// CSV with columns `replica,r` (replica index within this set).
    pub fn to_csv(&self) -> String {
        csv(
            "replica,r",
            self.replicas
                .iter()
                .enumerate()
                .flat_map(|(k, rs)| rs.iter().map(move |r| vec![k.to_string(), r.to_string()])),
        )
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some("replica,r") {
            return Err(Error::Precondition("radial CSV must start with the header replica,r".into()));
        }
        let mut replicas: Vec<Vec<f64>> = Vec::new();
        for (i, line) in lines.enumerate() {
            let bad = || Error::Precondition(format!("radial CSV line {}: {line:?}", i + 2));
            let (k, r) = line.split_once(',').ok_or_else(bad)?;
            let k: usize = k.parse().map_err(|_| bad())?;
            let r: f64 = r.parse().map_err(|_| bad())?;
            if k >= replicas.len() {
                replicas.resize(k + 1, Vec::new());
            }
            replicas[k].push(r);
        }
        Self::new(replicas)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_csv(&read_file(path)?)
    }
}

/// `true` when some empty histogram bin has samples on both sides.
pub fn has_internal_gap(sorted_moduli: &[f64], bins: usize) -> bool {
    let (Some(&lo), Some(&hi)) = (sorted_moduli.first(), sorted_moduli.last()) else {
        return false;
    };
    // moduli equal up to rounding (a collapsed ring) have no gap to find
    if !(hi - lo > 1e-9 * hi.abs().max(1.0)) || bins < 3 {
        return false;
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for r in sorted_moduli {
        counts[(((r - lo) / width) as usize).min(bins - 1)] += 1;
    }
    // the first and last bins hold the extremes, so any empty bin is internal
    counts.contains(&0)
}

pub fn histogram_bins(config: &RunConfig) -> usize {
    config
        .diagnostics
        .histogram_bins
        .unwrap_or_else(|| ((config.ensemble.n as f64).sqrt() / 2.0).round().max(8.0) as usize)
}

fn run_replica(config: &RunConfig, spec: &EnsembleSpec, replica: u64, bins: usize) -> ReplicaOutcome {
    let assembled = match assemble(spec, replica) {
        Ok(m) => m,
        Err(e) => return ReplicaOutcome::failed(replica, e.to_string()),
    };
    let sample = match SpectrumSample::from_matrix(&assembled.a, spec, replica) {
        Ok(s) => s,
        Err(e) => return ReplicaOutcome::failed(replica, e.to_string()),
    };
    let hermitize = if config.hermitize_enabled() {
        let mut worst: f64 = 0.0;
        for [x, y] in &config.diagnostics.hermitize_points {
            match hermitize_defect(&assembled.a, C64::new(*x, *y)) {
                Ok(d) => worst = worst.max(d),
                Err(e) => return ReplicaOutcome::failed(replica, format!("hermitization: {e}")),
            }
        }
        Some(worst)
    } else {
        None
    };
    let mut moduli: Vec<f64> = sample.eigenvalues.iter().map(|z| z.norm()).collect();
    moduli.sort_by(f64::total_cmp);
    ReplicaOutcome {
        replica,
        weyl_excess: sample.weyl().max_excess,
        hermitize_defect: hermitize,
        min_modulus: moduli[0],
        max_modulus: *moduli.last().unwrap(),
        single_ring: !has_internal_gap(&moduli, bins),
        error: None,
        eigenvalues: sample.eigenvalues,
        singular_values: sample.singular_values,
    }
}

fn girko_summary(config: &RunConfig, spec: &EnsembleSpec, first: &ReplicaOutcome) -> Option<GirkoSummary> {
    if !config.diagnostics.girko_field || !first.ok() {
        return None;
    }
    let a = assemble(spec, first.replica).ok()?.a;
    let extent = config.grids.z_extent.unwrap_or(1.25 * first.max_modulus.max(1e-3));
    let axis = linspace(-extent, extent, config.grids.z_points);
    let hess = Hessenberg::new(&a);
    let field = girko_field_hessenberg(&hess, &axis, &axis, Some(&first.eigenvalues));
    let (raw_mass, error) = match density_from_field(&field) {
        Ok(d) => (Some(d.raw_mass), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Some(GirkoSummary {
        raw_mass,
        mass_defect: raw_mass.map(|m| (m - 1.0).abs()),
        excluded: field.excluded.len(),
        nudged: field.nudged.len(),
        error,
        field,
    })
}

/// Draws every replica on the worker pool. A failing replica is recorded
/// and the rest continue.
pub fn run_simulation(config: &RunConfig) -> Result<SimulationRun> {
    let spec = config.ensemble_spec()?;
    spec.validate()?;
    let bins = histogram_bins(config);
    let replicas: Vec<ReplicaOutcome> = (0..config.replicas)
        .into_par_iter()
        .map(|r| run_replica(config, &spec, r, bins))
        .collect();
    for r in replicas.iter().filter(|r| !r.ok()) {
        log::warn!("replica {}: {}", r.replica, r.error.as_deref().unwrap_or(""));
    }
    let girko = girko_summary(config, &spec, &replicas[0]);
    let min_singular = config.diagnostics.min_singular.as_ref().map(|ms| {
        let zs: Vec<C64> = ms.points.iter().map(|[x, y]| C64::new(*x, *y)).collect();
        min_singular_batch(&spec, ms.replicas, &zs, ms.delta)
    });
    Ok(SimulationRun { spec, replicas, girko, min_singular })
}

impl SimulationRun {
    pub fn empirical(&self) -> Result<EmpiricalRadial> {
        EmpiricalRadial::new(self.replicas.iter().filter(|r| r.ok()).map(|r| r.moduli()).collect())
    }

    pub fn max_weyl_excess(&self) -> Option<f64> {
        self.replicas.iter().filter(|r| r.ok()).map(|r| r.weyl_excess).reduce(f64::max)
    }

    pub fn max_hermitize_defect(&self) -> Option<f64> {
        self.replicas.iter().filter_map(|r| r.hermitize_defect).reduce(f64::max)
    }

    pub fn failures(&self) -> Vec<(u64, String)> {
        self.replicas.iter().filter_map(|r| r.error.clone().map(|e| (r.replica, e))).collect()
    }

    pub fn replicas_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        csv(
            "replica,weyl_excess,hermitize_defect,min_modulus,max_modulus,single_ring,error",
            self.replicas.iter().map(|r| {
                vec![
                    r.replica.to_string(),
                    r.weyl_excess.to_string(),
                    opt(r.hermitize_defect),
                    r.min_modulus.to_string(),
                    r.max_modulus.to_string(),
                    u8::from(r.single_ring).to_string(),
                    r.error.as_deref().unwrap_or("").replace([',', '\n'], ";"),
                ]
            }),
        )
    }

    /// Writes per-replica spectra, the pooled radial sample and summaries.
    pub fn persist(&self, dir: &Path) -> Result<()> {
        for r in self.replicas.iter().filter(|r| r.ok()) {
            let eig = csv("re,im", r.eigenvalues.iter().map(|z| vec![z.re.to_string(), z.im.to_string()]));
            write_file(&dir.join(format!("replicas/{:04}_eigenvalues.csv", r.replica)), &eig)?;
            let sv = csv("s", r.singular_values.iter().map(|s| vec![s.to_string()]));
            write_file(&dir.join(format!("replicas/{:04}_singular_values.csv", r.replica)), &sv)?;
        }
        write_file(&dir.join("replicas.csv"), &self.replicas_csv())?;
        if let Ok(emp) = self.empirical() {
            write_file(&dir.join("radial.csv"), &emp.to_csv())?;
        }
        if let Some(g) = &self.girko {
            write_file(&dir.join("girko_field.csv"), &g.field.to_csv())?;
        }
        write_file(&dir.join("simulation.json"), &serde_json::to_string_pretty(self)?)
    }
}

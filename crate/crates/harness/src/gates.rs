//! Named pass/fail thresholds.

use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, ThetaSpec};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    AtMost,
    AtLeast,
}

/// Every gate the harness knows how to measure.
pub const KNOWN: &[(&str, Direction)] = &[
    ("crossval_sup", Direction::AtMost),
    ("quantile_identity", Direction::AtMost),
    ("ks_radial", Direction::AtMost),
    ("w1_radial", Direction::AtMost),
    ("annulus_slack", Direction::AtMost),
    ("single_ring_rate", Direction::AtLeast),
    ("weyl_rel", Direction::AtMost),
    ("hermitize", Direction::AtMost),
    ("girko_mass_defect", Direction::AtMost),
    ("min_singular_freq", Direction::AtMost),
    ("fz_ks", Direction::AtMost),
];

fn direction(name: &str) -> Option<Direction> {
    KNOWN.iter().find(|(n, _)| *n == name).map(|(_, d)| *d)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub direction: Direction,
    pub threshold: f64,
    /// `None` for gates with no default in this configuration.
    pub default: Option<f64>,
    pub loosened: bool,
}

impl Gate {
    pub fn judge(&self, measured: f64) -> bool {
        match self.direction {
            Direction::AtMost => measured <= self.threshold,
            Direction::AtLeast => measured >= self.threshold,
        }
    }
}

fn atomic_theta(theta: &ThetaSpec) -> bool {
    match theta {
        ThetaSpec::Atoms { .. } | ThetaSpec::Dirac { .. } => true,
        ThetaSpec::Measure { measure } => measure.is_atomic(),
        _ => false,
    }
}

/// Default thresholds applicable to `config`.
pub fn defaults(config: &RunConfig) -> Vec<(&'static str, f64)> {
    let mut out = vec![
        ("crossval_sup", if atomic_theta(&config.theta) { 1e-2 } else { 5e-3 }),
        ("quantile_identity", 2e-3),
        ("ks_radial", 0.05),
        ("w1_radial", 0.05),
        ("annulus_slack", 0.1),
        ("single_ring_rate", 0.95),
        ("weyl_rel", 1e-8),
    ];
    if config.hermitize_enabled() {
        out.push(("hermitize", 1e-10));
    }
    if config.diagnostics.girko_field {
        out.push(("girko_mass_defect", 0.05));
    }
    if config.diagnostics.min_singular.is_some() {
        out.push(("min_singular_freq", 0.01));
    }
    if matches!(config.theta, ThetaSpec::Fz { .. }) {
        out.push(("fz_ks", 0.08));
    }
    out
}

pub(crate) fn resolve(config: &RunConfig) -> Result<Vec<Gate>> {
    let defaults = defaults(config);
    let mut gates: Vec<Gate> = defaults
        .iter()
        .map(|(name, v)| Gate {
            name: name.to_string(),
            direction: direction(name).unwrap(),
            threshold: *v,
            default: Some(*v),
            loosened: false,
        })
        .collect();
    for (name, &threshold) in &config.gates {
        let dir = direction(name).ok_or_else(|| Error::Config(format!("unknown gate {name:?}")))?;
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(Error::Config(format!("gate {name} needs a positive threshold, got {threshold}")));
        }
        match gates.iter_mut().find(|g| &g.name == name) {
            Some(g) => {
                g.threshold = threshold;
                let d = g.default.unwrap();
                g.loosened = match dir {
                    Direction::AtMost => threshold > d,
                    Direction::AtLeast => threshold < d,
                };
            }
            None => gates.push(Gate { name: name.clone(), direction: dir, threshold, default: None, loosened: false }),
        }
    }
    if let Some(g) = gates.iter().find(|g| g.loosened) {
        if !config.override_gates {
            return Err(Error::Config(format!(
                "gate {} loosened from {} to {} without override = true",
                g.name,
                g.default.unwrap(),
                g.threshold
            )));
        }
    }
    Ok(gates)
}

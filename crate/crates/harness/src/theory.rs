//! Limiting radial law from both routes.

use std::path::Path;

use serde::Serialize;

use ringlab_core::quad::linspace;
use ringlab_core::ringlaw::{cross_validate, radial_density_girko, radial_density_stransform, ring_radii, RadialQuantile};
use ringlab_core::{Measure, RingLaw};

use crate::config::RunConfig;
use crate::error::Result;
use crate::io::write_file;

#[derive(Clone, Debug, Serialize)]
pub struct QuantileCheck {
    pub t: f64,
    pub radius: f64,
    pub cdf: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CrossSummary {
    pub sup: f64,
    pub l1: f64,
    pub compared: usize,
    pub excluded: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct TheoryRun {
    pub a: f64,
    pub b: f64,
    pub collapsed: bool,
    pub stransform: Option<RingLaw>,
    pub girko: Option<RingLaw>,
    pub crossval: Option<CrossSummary>,
    pub quantile_checks: Vec<QuantileCheck>,
    /// Pipeline failures; the other route is still reported.
    pub errors: Vec<String>,
    #[serde(skip)]
    pub theta: Measure,
}

impl TheoryRun {
    /// The law used for comparisons: S-transform route first.
    pub fn law(&self) -> Option<&RingLaw> {
        self.stransform.as_ref().or(self.girko.as_ref())
    }

    /// `max |ring_cdf(F(t)) - t|` over the checked `t`.
    pub fn quantile_defect(&self) -> Option<f64> {
        if self.quantile_checks.is_empty() {
            return None;
        }
        Some(self.quantile_checks.iter().map(|q| (q.cdf - q.t).abs()).fold(0.0, f64::max))
    }

    pub fn persist(&self, dir: &Path) -> Result<()> {
        if let Some(law) = &self.stransform {
            write_file(&dir.join("theory_stransform.csv"), &law.to_csv())?;
        }
        if let Some(law) = &self.girko {
            write_file(&dir.join("theory_girko.csv"), &law.to_csv())?;
        }
        write_file(&dir.join("theory.json"), &serde_json::to_string_pretty(self)?)
    }
}

pub fn r_grid(config: &RunConfig, b: f64) -> Vec<f64> {
    let hi = config.grids.r_max.unwrap_or(1.25 * b.max(1e-3));
    linspace(0.0, hi, config.grids.r_points)
}

/// Computes both radial densities on the configured grid and cross-validates
/// them. A failing route is recorded and the other one kept.
pub fn run_theory(config: &RunConfig) -> Result<TheoryRun> {
    let theta = config.theta.measure()?;
    let (a, b) = ring_radii(&theta)?;
    let grid = r_grid(config, b);
    let mut errors = Vec::new();
    let (stransform, girko, crossval) = match (config.grids.dr, cross_validate(&theta, &grid)) {
        (None, Ok(cv)) => {
            let summary = CrossSummary { sup: cv.sup, l1: cv.l1, compared: cv.compared, excluded: cv.excluded };
            (Some(cv.stransform), Some(cv.girko), Some(summary))
        }
        _ => {
            let s = radial_density_stransform(&theta, &grid).map_err(|e| errors.push(format!("stransform: {e}"))).ok();
            let g = radial_density_girko(&theta, &grid, config.grids.dr)
                .map_err(|e| errors.push(format!("girko: {e}")))
                .ok();
            let cv = match (&s, &g) {
                (Some(s), Some(g)) => Some(compare_routes(s, g)),
                _ => None,
            };
            (s, g, cv)
        }
    };
    let mut quantile_checks = Vec::new();
    if let Some(law) = &stransform {
        if !law.collapsed {
            match RadialQuantile::new(&theta) {
                Ok(q) => {
                    for t in [0.25, 0.5, 0.75] {
                        match q.f(t) {
                            Ok(radius) => quantile_checks.push(QuantileCheck { t, radius, cdf: law.cdf(radius) }),
                            Err(e) => errors.push(format!("quantile map at {t}: {e}")),
                        }
                    }
                }
                Err(e) => errors.push(format!("quantile map: {e}")),
            }
        }
    }
    for e in &errors {
        log::warn!("theory: {e}");
    }
    Ok(TheoryRun { a, b, collapsed: a == b, stransform, girko, crossval, quantile_checks, errors, theta })
}

/// Sup difference away from the support edges, as in `cross_validate`.
fn compare_routes(s: &RingLaw, g: &RingLaw) -> CrossSummary {
    let step = s.r_grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let band = 2.0 * step;
    let mut out = CrossSummary { sup: 0.0, l1: 0.0, compared: 0, excluded: 0 };
    let mut prev: Option<(f64, f64)> = None;
    for (k, &r) in s.r_grid.iter().enumerate() {
        if (s.a > 0.0 && (r - s.a).abs() <= band) || (r - s.b).abs() <= band {
            out.excluded += 1;
            prev = None;
            continue;
        }
        let d = (s.density[k] - g.density[k]).abs();
        out.sup = out.sup.max(d);
        out.compared += 1;
        if let Some((r0, d0)) = prev {
            out.l1 += std::f64::consts::PI * (r - r0) * (r0 * d0 + r * d);
        }
        prev = Some((r, d));
    }
    out
}

//! Experiment configuration. Authored as TOML, round-tripped as JSON.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ringlab_core::fz::equilibrium_measure;
use ringlab_core::{Measure, Potential};
use ringlab_rmt::{EnsembleSpec, Model, TSource};

use crate::error::{io_at, Error, Result};
use crate::gates::{resolve, Gate};

pub const SPEC_VERSION: u32 = 1;

fn default_cells() -> usize {
    400
}

fn default_sweeps() -> usize {
    1000
}

/// Singular-value law `Θ`, in a form convenient to write by hand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThetaSpec {
    QuarterCircle {
        #[serde(default = "default_cells")]
        cells: usize,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    Atoms {
        locations: Vec<f64>,
        weights: Vec<f64>,
    },
    Dirac {
        at: f64,
    },
    Measure {
        measure: Measure,
    },
    /// `Θ` of the log-gas with potential `V`; simulations sample the gas.
    Fz {
        potential: Potential,
        #[serde(default = "default_cells")]
        cells: usize,
        #[serde(default = "default_sweeps")]
        sweeps: usize,
    },
}

impl ThetaSpec {
    pub fn measure(&self) -> Result<Measure> {
        Ok(match self {
            Self::QuarterCircle { cells } => Measure::quarter_circle(*cells),
            Self::Uniform { lo, hi } => Measure::uniform(*lo, *hi)?,
            Self::Atoms { locations, weights } => Measure::atoms_normalized(locations, weights)?,
            Self::Dirac { at } => Measure::dirac(*at),
            Self::Measure { measure } => measure.clone(),
            Self::Fz { potential, cells, .. } => equilibrium_measure(potential, *cells)?.theta,
        })
    }

    pub fn t_source(&self) -> Result<TSource> {
        Ok(match self {
            Self::Fz { potential, sweeps, .. } => TSource::Fz { potential: potential.clone(), sweeps: *sweeps },
            other => TSource::Quantile { theta: other.measure()? },
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n: usize,
    pub model: Model,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise_gamma: Option<f64>,
    /// Simulated `Θ` when it differs from the theory side.
    #[serde(default)]
    pub theta: Option<ThetaSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Grids {
    pub r_points: usize,
    /// Defaults to `1.25 b`.
    pub r_max: Option<f64>,
    /// Radial difference step of the log-potential route.
    pub dr: Option<f64>,
    pub z_points: usize,
    /// Half-width of the square `z` lattice; defaults to `1.25 b`.
    pub z_extent: Option<f64>,
}

impl Default for Grids {
    fn default() -> Self {
        Self { r_points: 201, r_max: None, dr: None, z_points: 41, z_extent: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinSingularConfig {
    pub replicas: u64,
    /// Points `[re, im]`.
    pub points: Vec<[f64; 2]>,
    /// Threshold exponent: flags `σ_min < n^{-delta}`.
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_delta() -> f64 {
    3.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Diagnostics {
    /// Hermitization is a `2n × 2n` eigenproblem; larger runs skip it.
    pub hermitize_max_n: usize,
    pub hermitize_points: Vec<[f64; 2]>,
    pub girko_field: bool,
    pub min_singular: Option<MinSingularConfig>,
    /// Radial histogram bins for the single-ring check; defaults to `max(8, √n / 2)`.
    pub histogram_bins: Option<usize>,
}

impl Default for Diagnostics {
    fn default() -> Self {
        Self {
            hermitize_max_n: 400,
            hermitize_points: vec![[0.0, 0.0], [0.5, 0.25]],
            girko_field: true,
            min_singular: None,
            histogram_bins: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FzSampling {
    /// Defaults to the ensemble size.
    pub n: Option<usize>,
    /// Thinned states pooled into the sample.
    pub kept: usize,
    pub thin: usize,
}

impl Default for FzSampling {
    fn default() -> Self {
        Self { n: None, kept: 20, thin: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub spec_version: u32,
    pub theta: ThetaSpec,
    pub ensemble: EnsembleConfig,
    #[serde(default = "one")]
    pub replicas: u64,
    #[serde(default)]
    pub grids: Grids,
    /// Gate name to threshold. Unlisted gates take their defaults.
    #[serde(default)]
    pub gates: BTreeMap<String, f64>,
    /// Permits thresholds looser than the defaults.
    #[serde(default, rename = "override")]
    pub override_gates: bool,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub diagnostics: Diagnostics,
    #[serde(default)]
    pub fz: FzSampling,
}

fn one() -> u64 {
    1
}

impl RunConfig {
    pub fn from_toml(s: &str) -> Result<Self> {
        let c: Self = toml::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Reads `.json` as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_at(path))?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.spec_version != SPEC_VERSION {
            return Err(Error::Config(format!(
                "spec_version {} is not supported (expected {SPEC_VERSION})",
                self.spec_version
            )));
        }
        if self.replicas < 1 {
            return Err(Error::Config("replicas must be at least 1".into()));
        }
        if self.grids.r_points < 3 || self.grids.z_points < 3 {
            return Err(Error::Config("grids need at least 3 points per axis".into()));
        }
        for (name, v) in [("r_max", self.grids.r_max), ("dr", self.grids.dr), ("z_extent", self.grids.z_extent)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("grids.{name} must be positive, got {v}")));
                }
            }
        }
        if let Some(ms) = &self.diagnostics.min_singular {
            if ms.replicas < 1 || ms.points.is_empty() || !(ms.delta > 0.0) {
                return Err(Error::Config("min_singular needs replicas, points and a positive delta".into()));
            }
        }
        if self.fz.kept < 1 || self.fz.thin < 1 {
            return Err(Error::Config("fz.kept and fz.thin must be at least 1".into()));
        }
        self.ensemble_spec()?.validate()?;
        self.gates()?;
        Ok(())
    }

    pub fn ensemble_spec(&self) -> Result<EnsembleSpec> {
        let e = &self.ensemble;
        let t_source = match e.model {
            Model::Ginibre => None,
            _ => Some(e.theta.as_ref().unwrap_or(&self.theta).t_source()?),
        };
        Ok(EnsembleSpec { n: e.n, model: e.model, t_source, noise_gamma: e.noise_gamma, seed: e.seed })
    }

    pub fn hermitize_enabled(&self) -> bool {
        self.ensemble.n <= self.diagnostics.hermitize_max_n && !self.diagnostics.hermitize_points.is_empty()
    }

    /// Defaults merged with the configured thresholds.
    pub fn gates(&self) -> Result<Vec<Gate>> {
        resolve(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.ensemble.seed = seed;
        self
    }

    pub fn with_output_dir(mut self, dir: PathBuf) -> Self {
        self.output_dir = dir;
        self
    }

    /// Creates the output directory and checks that it accepts writes.
    pub fn prepare_output(&self) -> Result<()> {
        fs::create_dir_all(&self.output_dir).map_err(io_at(&self.output_dir))?;
        let probe = self.output_dir.join(".write-probe");
        fs::write(&probe, b"").map_err(io_at(&probe))?;
        fs::remove_file(&probe).map_err(io_at(&probe))?;
        Ok(())
    }
}

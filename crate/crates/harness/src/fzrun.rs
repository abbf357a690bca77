//! Log-gas sampling against the equilibrium measure.

use std::path::Path;

use serde::Serialize;

use ringlab_core::fz::{equilibrium_measure, ChainCheckpoint, FzChain, McmcOptions};
use ringlab_core::quad::linspace;
use ringlab_core::{Equilibrium, Measure};
use ringlab_rmt::rng::Purpose;

use crate::config::{RunConfig, ThetaSpec};
use crate::error::{Error, Result};
use crate::io::{csv, write_file};

#[derive(Clone, Debug, Serialize)]
pub struct FzSample {
    pub n: usize,
    pub kept: usize,
    pub acceptance_rate: f64,
    /// KS distance between the pooled sample and the equilibrium measure.
    pub ks: f64,
    #[serde(skip)]
    pub x: Vec<f64>,
    pub equilibrium: Equilibrium,
    #[serde(skip)]
    pub checkpoint: ChainCheckpoint<f64>,
}

impl FzSample {
    pub fn persist(&self, dir: &Path) -> Result<()> {
        write_file(&dir.join("fz_samples.csv"), &csv("x", self.x.iter().map(|x| vec![x.to_string()])))?;
        let eq = &self.equilibrium;
        let grid = linspace(eq.a, eq.b, 401);
        let rows = grid.iter().map(|x| vec![x.to_string(), eq.density(*x).to_string()]);
        write_file(&dir.join("fz_equilibrium.csv"), &csv("x,density", rows))?;
        write_file(&dir.join("fz_checkpoint.json"), &self.checkpoint.to_json()?)?;
        write_file(&dir.join("fz.json"), &serde_json::to_string_pretty(self)?)
    }
}

/// Burns in one chain, pools `fz.kept` thinned states and compares them
/// with the equilibrium measure of the configured potential.
pub fn run_fz_sample(config: &RunConfig) -> Result<FzSample> {
    let ThetaSpec::Fz { potential, cells, .. } = &config.theta else {
        return Err(Error::Config("fz-sample needs theta.kind = \"fz\"".into()));
    };
    let n = config.fz.n.unwrap_or(config.ensemble.n);
    let seed = config.ensemble.seed;
    let opts = McmcOptions { thin: config.fz.thin, ..Default::default() };
    let mut chain = FzChain::seeded(potential.clone(), n, seed, Purpose::LogGas as u64)?;
    chain.burn_in(&opts);
    let mut x = Vec::with_capacity(n * config.fz.kept);
    chain.sample(config.fz.kept, opts.thin, |s| x.extend_from_slice(s));
    chain.check_mixing(opts.min_acceptance)?;
    x.sort_by(f64::total_cmp);
    let equilibrium = equilibrium_measure(potential, *cells)?;
    let ks = Measure::empirical(x.clone())?.ks_to_cdf(|t| equilibrium.sigma.cdf(t));
    Ok(FzSample {
        n,
        kept: config.fz.kept,
        acceptance_rate: chain.acceptance_rate(),
        ks,
        x,
        equilibrium,
        checkpoint: chain.checkpoint(seed),
    })
}

//! Ensemble recipes and matrix assembly.

use faer::{c64, Mat};
use ringlab_core::fz::fz_singular_values;
use ringlab_core::Potential;
use ringlab_core::{Error, Measure, Result};
use serde::{Deserialize, Serialize};

use crate::haar::{complex_gaussian, haar_orthogonal, haar_unitary, real_gaussian};
use crate::rng::{stream, Purpose};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// `U T V` with independent Haar unitaries.
    UtvUnitary,
    /// `O₁ T O₂` with independent Haar orthogonal matrices.
    UtvOrthogonal,
    /// `diag(T) + P` with `P` Haar unitary.
    Additive,
    /// `N / √n` with standard complex Gaussian `N`.
    Ginibre,
}

/// Where the singular values `T` come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TSource {
    /// `s_i = inf{s : Θ([0, s]) ≥ i/n}`.
    Quantile { theta: Measure },
    Explicit { values: Vec<f64> },
    /// Square roots of a log-gas sample.
    Fz { potential: Potential, sweeps: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n: usize,
    pub model: Model,
    /// Unused by the Ginibre model.
    #[serde(default)]
    pub t_source: Option<TSource>,
    /// Adds `n^{-γ} N`; must exceed 1/2.
    #[serde(default)]
    pub noise_gamma: Option<f64>,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Domain("ensemble needs n >= 1".into()));
        }
        if let Some(g) = self.noise_gamma {
            if !(g > 0.5) {
                return Err(Error::Domain(format!("noise exponent must exceed 1/2, got {g}")));
            }
        }
        match (&self.t_source, self.model) {
            (None, Model::Ginibre) => Ok(()),
            (None, m) => Err(Error::Domain(format!("model {m:?} needs a singular value source"))),
            (Some(TSource::Explicit { values }), _) => {
                if values.len() != self.n {
                    return Err(Error::Domain(format!("{} explicit values for n = {}", values.len(), self.n)));
                }
                if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(Error::Domain("explicit singular values must be finite and nonnegative".into()));
                }
                Ok(())
            }
            (Some(TSource::Quantile { theta }), _) => {
                if theta.support().0 < 0.0 {
                    return Err(Error::Domain("quantile source needs a measure on [0, inf)".into()));
                }
                Ok(())
            }
            (Some(TSource::Fz { potential, .. }), _) => potential.validate(),
        }
    }
}

/// `s_i = quantile(Θ, i/n)` for `i = 1..n`, nondecreasing.
pub fn diag_from_quantile(theta: &Measure, n: usize) -> Result<Vec<f64>> {
    (1..=n).map(|i| theta.quantile(i as f64 / n as f64)).collect()
}

/// Singular values `T` of one replica.
pub fn singular_value_source(spec: &EnsembleSpec, replica: u64) -> Result<Vec<f64>> {
    match &spec.t_source {
        None => Ok(Vec::new()),
        Some(TSource::Explicit { values }) => Ok(values.clone()),
        Some(TSource::Quantile { theta }) => diag_from_quantile(theta, spec.n),
        Some(TSource::Fz { potential, sweeps }) => {
            let mut rng = stream(spec.seed, replica, Purpose::LogGas);
            fz_singular_values(potential, spec.n, *sweeps, &mut rng)
        }
    }
}

/// One matrix draw together with the `T` that built it.
#[derive(Clone, Debug)]
pub struct Assembled {
    pub a: Mat<c64>,
    pub t: Vec<f64>,
}

/// Draws replica `replica` of `spec`.
pub fn assemble(spec: &EnsembleSpec, replica: u64) -> Result<Assembled> {
    spec.validate()?;
    crate::init();
    let n = spec.n;
    let t = singular_value_source(spec, replica)?;
    let mut a = match spec.model {
        Model::Ginibre => {
            let mut rng = stream(spec.seed, replica, Purpose::Ginibre);
            let scale = 1.0 / (n as f64).sqrt();
            let mut g = complex_gaussian(n, n, &mut rng);
            scale_in_place(&mut g, scale);
            g
        }
        Model::UtvUnitary => {
            let mut u = haar_unitary(n, &mut stream(spec.seed, replica, Purpose::LeftHaar));
            let v = haar_unitary(n, &mut stream(spec.seed, replica, Purpose::RightHaar));
            for (j, s) in t.iter().enumerate() {
                for i in 0..n {
                    u[(i, j)] *= *s;
                }
            }
            &u * &v
        }
        Model::UtvOrthogonal => {
            let mut o1 = haar_orthogonal(n, &mut stream(spec.seed, replica, Purpose::LeftHaar));
            let o2 = haar_orthogonal(n, &mut stream(spec.seed, replica, Purpose::RightHaar));
            for (j, s) in t.iter().enumerate() {
                for i in 0..n {
                    o1[(i, j)] *= *s;
                }
            }
            let r = &o1 * &o2;
            Mat::from_fn(n, n, |i, j| c64::new(r[(i, j)], 0.0))
        }
        Model::Additive => {
            let mut p = haar_unitary(n, &mut stream(spec.seed, replica, Purpose::Additive));
            for (i, s) in t.iter().enumerate() {
                p[(i, i)] += c64::new(*s, 0.0);
            }
            p
        }
    };
    if let Some(gamma) = spec.noise_gamma {
        let mut rng = stream(spec.seed, replica, Purpose::Noise);
        let scale = (n as f64).powf(-gamma);
        if spec.model == Model::UtvOrthogonal {
            let g = real_gaussian(n, n, &mut rng);
            for j in 0..n {
                for i in 0..n {
                    a[(i, j)] += c64::new(scale * g[(i, j)], 0.0);
                }
            }
        } else {
            let g = complex_gaussian(n, n, &mut rng);
            for j in 0..n {
                for i in 0..n {
                    a[(i, j)] += g[(i, j)] * scale;
                }
            }
        }
    }
    Ok(Assembled { a, t })
}

fn scale_in_place(m: &mut Mat<c64>, s: f64) {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            m[(i, j)] *= s;
        }
    }
}

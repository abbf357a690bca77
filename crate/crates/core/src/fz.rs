//! Log-gas of squared singular values with density
//! `∏_{i<j} |x_i - x_j|² exp(-n Σ V(x_i))` on `(0, inf)^n`, and its
//! one-cut equilibrium measure.
//!
//! Everything here works with the squared variables `x = s²`. The singular
//! value law `Θ` is recovered by the inverse square push-forward.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::Measure1D;
use crate::quad::brent;
use crate::real::Real;

/// Confining potential acting on the squared singular values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Potential<T> {
    /// `V(x) = x²/2`.
    QuadraticHalf,
    /// `V(x) = x`.
    Linear,
    /// `V(x) = Σ c_k x^k`, lowest degree first.
    Polynomial { coefficients: Vec<T> },
}

impl<T: Real> Potential<T> {
    /// Polynomial potential; trailing zeros are dropped and the leading
    /// coefficient must be positive.
    pub fn polynomial(coefficients: &[T]) -> Result<Self> {
        let p = Self::Polynomial { coefficients: coefficients.to_vec() };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.coefficients();
        match c.last() {
            Some(lead) if c.len() >= 2 && *lead > T::zero() && c.iter().all(|x| x.is_finite()) => Ok(()),
            _ => Err(Error::Domain(
                "potential must be a polynomial of degree >= 1 with positive leading coefficient".into(),
            )),
        }
    }

    /// Coefficients lowest degree first, without trailing zeros.
    pub fn coefficients(&self) -> Vec<T> {
        match self {
            Self::QuadraticHalf => vec![T::zero(), T::zero(), T::lit(0.5)],
            Self::Linear => vec![T::zero(), T::one()],
            Self::Polynomial { coefficients } => {
                let mut c = coefficients.clone();
                while c.len() > 1 && c.last() == Some(&T::zero()) {
                    c.pop();
                }
                c
            }
        }
    }

    pub fn degree(&self) -> usize {
        self.coefficients().len().saturating_sub(1)
    }

    pub fn value(&self, x: T) -> T {
        match self {
            Self::QuadraticHalf => x * x / T::lit(2.0),
            Self::Linear => x,
            Self::Polynomial { .. } => self.coefficients().iter().rev().fold(T::zero(), |acc, c| acc * x + *c),
        }
    }

    pub fn derivative(&self, x: T) -> T {
        match self {
            Self::QuadraticHalf => x,
            Self::Linear => T::one(),
            Self::Polynomial { .. } => {
                let c = self.coefficients();
                let mut acc = T::zero();
                for k in (1..c.len()).rev() {
                    acc = acc * x + c[k] * T::from_usize(k).unwrap();
                }
                acc
            }
        }
    }

    /// Length scale `L` with `L V'(L) = 4`; equals the support edge for the
    /// linear potential.
    fn scale(&self) -> T {
        let g = |u: T| {
            let l = u.exp();
            l * self.derivative(l) - T::lit(4.0)
        };
        let (mut lo, mut hi) = (T::lit(-1.0), T::one());
        while g(lo) > T::zero() && lo > T::lit(-60.0) {
            lo = lo - T::lit(2.0);
        }
        while g(hi) < T::zero() && hi < T::lit(60.0) {
            hi = hi + T::lit(2.0);
        }
        brent(g, lo, hi, T::lit(1e-10), 200).map(|u| u.exp()).unwrap_or_else(|_| T::lit(4.0))
    }
}

/// Unnormalized log density `Σ_{i<j} 2 log|x_i - x_j| - n Σ V(x_i)`.
///
/// Coincident points give `-inf`.
pub fn fz_log_density<T: Real>(x: &[T], v: &Potential<T>) -> Result<T> {
    if let Some(bad) = x.iter().find(|xi| !(**xi > T::zero()) || !xi.is_finite()) {
        return Err(Error::Domain(format!("log-gas points must be positive and finite, got {bad}")));
    }
    let n = T::from_usize(x.len()).unwrap();
    let mut acc = T::zero();
    for i in 0..x.len() {
        acc = acc - n * v.value(x[i]);
        for j in i + 1..x.len() {
            let d = (x[i] - x[j]).abs();
            if d == T::zero() {
                return Ok(T::neg_infinity());
            }
            acc = acc + T::lit(2.0) * d.ln();
        }
    }
    Ok(acc)
}

/// Change of [`fz_log_density`] when `x[i]` moves to `to`.
pub fn log_density_delta<T: Real>(x: &[T], v: &Potential<T>, i: usize, to: T) -> T {
    if !(to > T::zero()) {
        return T::neg_infinity();
    }
    let from = x[i];
    let n = T::from_usize(x.len()).unwrap();
    let mut acc = -n * (v.value(to) - v.value(from));
    for (j, xj) in x.iter().enumerate() {
        if j == i {
            continue;
        }
        let dn = (to - *xj).abs();
        if dn == T::zero() {
            return T::neg_infinity();
        }
        acc = acc + T::lit(2.0) * (dn / (from - *xj).abs()).ln();
    }
    acc
}

/// Chain state after a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogGasState<T> {
    pub x: Vec<T>,
    pub log_weight: T,
    pub step_scale: T,
    /// Acceptance rate over the post-burn-in updates (or over all updates
    /// if none were made yet).
    pub acceptance_rate: T,
}

#[derive(Clone, Debug)]
pub struct McmcOptions {
    /// Single-site updates discarded before sampling; `None` means `500 n`.
    pub burn_in: Option<usize>,
    /// Sweeps between kept states.
    pub thin: usize,
    /// Step adaptation interval during burn-in, in sweeps.
    pub adapt_every: usize,
    /// Post-adaptation acceptance below this is a mixing failure.
    pub min_acceptance: f64,
}

impl Default for McmcOptions {
    fn default() -> Self {
        Self { burn_in: None, thin: 10, adapt_every: 20, min_acceptance: 0.05 }
    }
}

impl McmcOptions {
    pub fn burn_in_sweeps(&self, n: usize) -> usize {
        self.burn_in.map(|u| u.div_ceil(n.max(1))).unwrap_or(500)
    }
}

/// Resumable chain snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainCheckpoint<T> {
    pub x: Vec<T>,
    pub log_weight: T,
    pub step_scale: T,
    pub seed: u64,
    pub stream: u64,
    /// Position of the ChaCha block counter, in 32-bit words.
    pub rng_word_pos: u128,
    pub sweeps: u64,
    pub proposed: u64,
    pub accepted: u64,
}

/// Single-site Metropolis chain with Gaussian proposals.
pub struct FzChain<T, R> {
    potential: Potential<T>,
    x: Vec<T>,
    log_weight: T,
    step_scale: T,
    rng: R,
    sweeps: u64,
    proposed: u64,
    accepted: u64,
}

impl<T: Real, R: Rng> FzChain<T, R> {
    /// Starts from evenly spaced points on `(0, L]`, `L V'(L) = 4`.
    pub fn new(potential: Potential<T>, n: usize, rng: R) -> Result<Self> {
        potential.validate()?;
        if n == 0 {
            return Err(Error::Domain("log-gas needs n >= 1".into()));
        }
        let l = potential.scale();
        let nn = T::from_usize(n).unwrap();
        let x: Vec<T> = (0..n).map(|i| l * (T::from_usize(i).unwrap() + T::lit(0.5)) / nn).collect();
        Self::from_parts(potential, x, l / nn, rng)
    }

    fn from_parts(potential: Potential<T>, x: Vec<T>, step_scale: T, rng: R) -> Result<Self> {
        let log_weight = fz_log_density(&x, &potential)?;
        Ok(Self { potential, x, log_weight, step_scale, rng, sweeps: 0, proposed: 0, accepted: 0 })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &[T] {
        &self.x
    }

    pub fn sweeps(&self) -> u64 {
        self.sweeps
    }

    /// One pass of `n` single-site updates in index order. Returns the
    /// number of accepted moves.
    pub fn sweep(&mut self) -> usize {
        let mut acc = 0;
        for i in 0..self.x.len() {
            let xi: f64 = self.rng.sample(StandardNormal);
            let to = self.x[i] + self.step_scale * T::lit(xi);
            let u: f64 = self.rng.random();
            self.proposed += 1;
            if !(to > T::zero()) {
                continue;
            }
            let delta = log_density_delta(&self.x, &self.potential, i, to);
            if delta >= T::zero() || T::lit(u.max(f64::MIN_POSITIVE).ln()) < delta {
                self.x[i] = to;
                self.log_weight = self.log_weight + delta;
                self.accepted += 1;
                acc += 1;
            }
        }
        self.sweeps += 1;
        acc
    }

    /// Burn-in with step adaptation toward acceptance in `[0.3, 0.5]`.
    pub fn burn_in(&mut self, opts: &McmcOptions) {
        let sweeps = opts.burn_in_sweeps(self.n());
        let every = opts.adapt_every.max(1);
        let per = (every * self.n()) as f64;
        let mut window = 0usize;
        for k in 0..sweeps {
            window += self.sweep();
            if (k + 1) % every == 0 {
                let rate = window as f64 / per;
                if rate < 0.3 {
                    self.step_scale = self.step_scale * T::lit(0.8);
                } else if rate > 0.5 {
                    self.step_scale = self.step_scale * T::lit(1.25);
                }
                window = 0;
            }
        }
        // restart the acceptance counters so they describe the adapted chain
        self.proposed = 0;
        self.accepted = 0;
        // guard against drift in the running log weight
        self.log_weight = fz_log_density(&self.x, &self.potential).unwrap_or(self.log_weight);
    }

    /// Runs `kept · thin` sweeps, calling `visit` on every `thin`-th state.
    pub fn sample<F: FnMut(&[T])>(&mut self, kept: usize, thin: usize, mut visit: F) {
        for _ in 0..kept {
            for _ in 0..thin.max(1) {
                self.sweep();
            }
            visit(&self.x);
        }
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    /// Fails with a mixing error when acceptance is below `threshold`.
    pub fn check_mixing(&self, threshold: f64) -> Result<()> {
        let rate = self.acceptance_rate();
        if self.proposed > 0 && rate < threshold {
            return Err(Error::Mixing { rate, threshold });
        }
        Ok(())
    }

    pub fn state(&self) -> LogGasState<T> {
        LogGasState {
            x: self.x.clone(),
            log_weight: self.log_weight,
            step_scale: self.step_scale,
            acceptance_rate: T::lit(self.acceptance_rate()),
        }
    }
}

impl<T: Real> FzChain<T, ChaCha8Rng> {
    /// Chain driven by ChaCha8 keyed by `(seed, stream)`.
    pub fn seeded(potential: Potential<T>, n: usize, seed: u64, stream: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self::new(potential, n, rng)
    }

    pub fn checkpoint(&self, seed: u64) -> ChainCheckpoint<T> {
        ChainCheckpoint {
            x: self.x.clone(),
            log_weight: self.log_weight,
            step_scale: self.step_scale,
            seed,
            stream: self.rng.get_stream(),
            rng_word_pos: self.rng.get_word_pos(),
            sweeps: self.sweeps,
            proposed: self.proposed,
            accepted: self.accepted,
        }
    }

    pub fn resume(potential: Potential<T>, cp: &ChainCheckpoint<T>) -> Result<Self> {
        potential.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cp.seed);
        rng.set_stream(cp.stream);
        rng.set_word_pos(cp.rng_word_pos);
        let mut chain = Self::from_parts(potential, cp.x.clone(), cp.step_scale, rng)?;
        chain.log_weight = cp.log_weight;
        chain.sweeps = cp.sweeps;
        chain.proposed = cp.proposed;
        chain.accepted = cp.accepted;
        Ok(chain)
    }
}

impl<T: Real> ChainCheckpoint<T> {
    pub fn to_json(&self) -> Result<String>
    where
        T: Serialize,
    {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self>
    where
        T: for<'de> Deserialize<'de>,
    {
        Ok(serde_json::from_str(s)?)
    }
}

/// Runs `sweeps` sweeps (`n` single-site updates each), the first
/// `500` of which are adaptive burn-in.
pub fn fz_mcmc<T: Real, R: Rng>(v: &Potential<T>, n: usize, sweeps: usize, rng: &mut R) -> Result<LogGasState<T>> {
    let opts = McmcOptions::default();
    let burn = opts.burn_in_sweeps(n);
    if sweeps < burn {
        return Err(Error::Domain(format!("{sweeps} sweeps do not cover the {burn}-sweep burn-in")));
    }
    let mut chain = FzChain::new(v.clone(), n, rng)?;
    chain.burn_in(&opts);
    for _ in burn..sweeps {
        chain.sweep();
    }
    chain.check_mixing(opts.min_acceptance)?;
    Ok(chain.state())
}

/// Sorted singular values `√x_i` of a converged chain.
pub fn fz_singular_values<T: Real, R: Rng>(v: &Potential<T>, n: usize, sweeps: usize, rng: &mut R) -> Result<Vec<T>> {
    let state = fz_mcmc(v, n, sweeps, rng)?;
    let mut s: Vec<T> = state.x.iter().map(|x| x.sqrt()).collect();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    Ok(s)
}

// ------------------------------------------------------------ equilibrium

/// Chebyshev coefficients `f_j` of `f(t) = V'(c + d t)/2`, `t ∈ [-1, 1]`.
fn chebyshev_coefficients<T: Real>(v: &Potential<T>, c: T, d: T) -> Vec<T> {
    let m = v.degree().max(1) - 1;
    let nodes = 2 * m + 4;
    let nn = T::from_usize(nodes).unwrap();
    let samples: Vec<(T, T)> = (0..nodes)
        .map(|k| {
            let th = T::PI() * (T::from_usize(k).unwrap() + T::lit(0.5)) / nn;
            (th, v.derivative(c + d * th.cos()) / T::lit(2.0))
        })
        .collect();
    (0..=m)
        .map(|j| {
            let jj = T::from_usize(j).unwrap();
            let s: T = samples.iter().map(|(th, f)| *f * (jj * *th).cos()).sum();
            let w = if j == 0 { T::one() } else { T::lit(2.0) };
            w * s / nn
        })
        .collect()
}

/// Re-expands `Σ f_j T_j` as `Σ g_j U_j`.
fn t_to_u<T: Real>(f: &[T]) -> Vec<T> {
    let at = |j: usize| f.get(j).copied().unwrap_or(T::zero());
    (0..f.len())
        .map(|j| {
            let lead = if j == 0 { at(0) } else { at(j) / T::lit(2.0) };
            lead - at(j + 2) / T::lit(2.0)
        })
        .collect()
}

fn chebyshev_t<T: Real>(coef: &[T], t: T) -> T {
    // Clenshaw for Σ a_k T_k
    let (mut b1, mut b2) = (T::zero(), T::zero());
    for a in coef.iter().skip(1).rev() {
        let b0 = *a + T::lit(2.0) * t * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    coef.first().copied().unwrap_or(T::zero()) + t * b1 - b2
}

fn chebyshev_u<T: Real>(coef: &[T], t: T) -> T {
    let (mut b1, mut b2) = (T::zero(), T::zero());
    for a in coef.iter().rev() {
        let b0 = *a + T::lit(2.0) * t * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    b1
}

/// One-cut equilibrium measure of `∫V dσ - ∫∫ log|x - y| dσ(x) dσ(y)` on
/// `[0, inf)`, with its singular-value law `Θ`.
#[derive(Clone, Debug, Serialize)]
#[serde(bound(serialize = "T: Real + Serialize"))]
pub struct Equilibrium<T> {
    pub potential: Potential<T>,
    /// Support `[a, b]` of `σ` (squared variable).
    pub a: T,
    pub b: T,
    /// Whether the support is pinned at the hard wall `x = 0`.
    pub hard_edge: bool,
    /// Soft-soft: `σ = √(1-t²) Σ coef_k U_k(t)`; hard edge:
    /// `σ = Σ coef_k T_k(t) / √(1-t²)`, with `x = (a+b)/2 + t (b-a)/2`.
    pub coefficients: Vec<T>,
    /// Endpoint conditions, evaluated by independent quadrature.
    pub constraint_residuals: [T; 2],
    /// `σ` as a grid density.
    pub sigma: Measure1D<T>,
    /// `Θ`, the law of `√x` under `σ`.
    pub theta: Measure1D<T>,
}

impl<T: Real> Equilibrium<T> {
    /// Density of `σ` at `x`.
    pub fn density(&self, x: T) -> T {
        if !(x > self.a && x < self.b) {
            return T::zero();
        }
        let c = (self.a + self.b) / T::lit(2.0);
        let d = (self.b - self.a) / T::lit(2.0);
        let t = ((x - c) / d).max(-T::one()).min(T::one());
        let w = ((T::one() - t) * (T::one() + t)).sqrt();
        if self.hard_edge {
            chebyshev_t(&self.coefficients, t) / w
        } else {
            w * chebyshev_u(&self.coefficients, t)
        }
    }

    /// Density of `Θ` at `s`, i.e. `2s σ(s²)`, finite at a hard edge.
    pub fn theta_density(&self, s: T) -> T {
        if s <= T::zero() {
            if self.hard_edge {
                // 2s / √(1-t²) → 2√d / √2 as s → 0, with t → -1
                let d = self.b / T::lit(2.0);
                return T::lit(2.0) * d.sqrt() * chebyshev_t(&self.coefficients, -T::one()) / T::lit(2.0).sqrt();
            }
            return T::zero();
        }
        T::lit(2.0) * s * self.density(s * s)
    }

    /// The functional evaluated on the tabulated `Θ`, see [`energy`].
    pub fn energy(&self) -> Result<T> {
        energy(&self.theta, &self.potential)
    }
}

/// `J = ∫ V(s²) dΘ(s) - ∫∫ log|s² - t²| dΘ(s) dΘ(t)` for a grid density `Θ`
/// on `[0, inf)`. This equals the squared-variable functional
/// `∫ V dσ - ∫∫ log|x - y| dσ dσ` for `σ` the law of `s²`; it is computed
/// as `∫ V(s²) dΘ - 2 E(Θ̃)` with `Θ̃` the symmetrization.
pub fn energy<T: Real>(theta: &Measure1D<T>, v: &Potential<T>) -> Result<T> {
    let sym = theta.symmetrize()?;
    Ok(theta.integrate(|s| v.value(s * s)) - T::lit(2.0) * sym.log_energy())
}

fn soft_constraints<T: Real>(v: &Potential<T>, c: T, d: T) -> [T; 2] {
    let f = chebyshev_coefficients(v, c, d);
    [f[0], d * f.get(1).copied().unwrap_or(T::zero()) - T::lit(2.0)]
}

fn solve_soft<T: Real>(v: &Potential<T>) -> Option<(T, T)> {
    let l = v.scale();
    for (c0, d0) in [(l / T::lit(2.0), l / T::lit(2.0)), (l, l / T::lit(4.0)), (T::lit(2.0) * l, l / T::lit(4.0))] {
        let (mut c, mut d) = (c0, d0);
        for _ in 0..100 {
            let r = soft_constraints(v, c, d);
            let scale = T::one() + c.abs() + d;
            if r[0].abs() + r[1].abs() < T::epsilon() * T::lit(1e3) {
                if c - d > T::zero() {
                    return Some((c, d));
                }
                break;
            }
            let h = T::lit(1e-6) * scale;
            let rc = soft_constraints(v, c + h, d);
            let rcm = soft_constraints(v, c - h, d);
            let rd = soft_constraints(v, c, d + h);
            let rdm = soft_constraints(v, c, d - h);
            let j = [
                [(rc[0] - rcm[0]) / (h + h), (rd[0] - rdm[0]) / (h + h)],
                [(rc[1] - rcm[1]) / (h + h), (rd[1] - rdm[1]) / (h + h)],
            ];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det == T::zero() || !det.is_finite() {
                break;
            }
            let dc = (r[0] * j[1][1] - r[1] * j[0][1]) / det;
            let dd = (j[0][0] * r[1] - j[1][0] * r[0]) / det;
            let mut lam = T::one();
            while d - lam * dd <= T::zero() {
                lam = lam / T::lit(2.0);
            }
            c = c - lam * dc;
            d = d - lam * dd;
            if !(c.is_finite() && d.is_finite()) {
                break;
            }
        }
    }
    None
}

/// `1 - d Σ g_j`: vanishes when the hard-edge density closes at `b = 2d`.
fn hard_condition<T: Real>(v: &Potential<T>, d: T) -> T {
    let g = t_to_u(&chebyshev_coefficients(v, d, d));
    T::one() - d * g.iter().copied().sum::<T>()
}

/// Equilibrium measure for `v` in the one-cut regime, tabulated with
/// `cells` cells in the singular-value variable.
///
/// The support is `[a, b] ⊂ (0, inf)` when the unconstrained problem keeps
/// away from the wall, and `[0, b]` with an inverse square-root edge
/// otherwise. A negative density (the two-cut signature) is an
/// [`Error::UnsupportedRegime`].
pub fn equilibrium_measure<T: Real>(v: &Potential<T>, cells: usize) -> Result<Equilibrium<T>> {
    v.validate()?;
    let cells = cells.max(16);
    let (a, b, hard, coefficients) = match solve_soft(v) {
        Some((c, d)) => {
            let f = chebyshev_coefficients(v, c, d);
            let coef: Vec<T> = f.iter().skip(1).map(|x| *x / T::PI()).collect();
            (c - d, c + d, false, coef)
        }
        None => {
            let l = v.scale();
            let d = brent(|u: T| hard_condition(v, u.exp()), (l / T::lit(1e3)).ln(), (l * T::lit(1e3)).ln(), T::lit(1e-14), 300)
                .map_err(|e| Error::UnsupportedRegime(format!("no one-cut hard-edge solution: {e}")))?
                .exp();
            let g = t_to_u(&chebyshev_coefficients(v, d, d));
            let mut coef = vec![T::one() / (d * T::PI())];
            coef.extend(g.iter().map(|x| -*x / T::PI()));
            (T::zero(), T::lit(2.0) * d, true, coef)
        }
    };
    let mut eq = Equilibrium {
        potential: v.clone(),
        a,
        b,
        hard_edge: hard,
        coefficients,
        constraint_residuals: [T::zero(); 2],
        sigma: Measure1D::dirac(T::one()),
        theta: Measure1D::dirac(T::one()),
    };
    check_sign(&eq)?;
    eq.constraint_residuals = constraint_residuals(&eq);
    let (s0, s1) = (a.sqrt(), b.sqrt());
    let grid: Vec<T> = (0..=cells)
        .map(|k| {
            let th = T::PI() * T::from_usize(k).unwrap() / T::from_usize(cells).unwrap();
            let u = if hard {
                // only the outer edge needs clustering
                T::one() - (th / T::lit(2.0)).cos()
            } else {
                (T::one() - th.cos()) / T::lit(2.0)
            };
            s0 + (s1 - s0) * u
        })
        .collect();
    let values: Vec<T> = grid
        .iter()
        .enumerate()
        .map(|(k, s)| if k == cells || (!hard && k == 0) { T::zero() } else { eq.theta_density(*s).max(T::zero()) })
        .collect();
    eq.theta = Measure1D::grid_normalized(grid, values)?.with_support_hint(s0, s1);
    eq.sigma = eq.theta.pushforward_square()?;
    Ok(eq)
}

fn check_sign<T: Real>(eq: &Equilibrium<T>) -> Result<()> {
    let probe = 2000;
    let mut peak = T::zero();
    let mut negative: Option<(T, T)> = None;
    for k in 1..probe {
        let x = eq.a + (eq.b - eq.a) * T::from_usize(k).unwrap() / T::from_usize(probe).unwrap();
        let p = eq.density(x);
        peak = peak.max(p.abs());
        if p < T::zero() {
            negative = Some(match negative {
                None => (x, x),
                Some((lo, _)) => (lo, x),
            });
        }
    }
    if let Some((lo, hi)) = negative {
        if eq.density((lo + hi) / T::lit(2.0)) < -T::lit(1e-10) * peak || hi - lo > (eq.b - eq.a) / T::lit(1e3) {
            return Err(Error::UnsupportedRegime(format!(
                "one-cut density is negative on [{lo:.6}, {hi:.6}]; the equilibrium measure has more than one cut"
            )));
        }
    }
    Ok(())
}

/// Residuals of the endpoint conditions by midpoint quadrature in the
/// angle variable `t = cos φ`:
/// soft edges `∫ V'/√((x-a)(b-x)) dx = 0`, `∫ x V'/√((x-a)(b-x)) dx = 2π`;
/// hard edge `∫ V' √(x/(b-x)) dx = 2π` and unit mass.
fn constraint_residuals<T: Real>(eq: &Equilibrium<T>) -> [T; 2] {
    let m = 512;
    let c = (eq.a + eq.b) / T::lit(2.0);
    let d = (eq.b - eq.a) / T::lit(2.0);
    let h = T::PI() / T::from_usize(m).unwrap();
    let mut acc = [T::zero(); 3];
    for k in 0..m {
        let phi = h * (T::from_usize(k).unwrap() + T::lit(0.5));
        let t = phi.cos();
        let x = c + d * t;
        let vp = eq.potential.derivative(x);
        if eq.hard_edge {
            acc[0] = acc[0] + vp * d * (T::one() + t) * h;
            acc[1] = acc[1] + d * chebyshev_t(&eq.coefficients, t) * h;
        } else {
            acc[0] = acc[0] + vp * h;
            acc[1] = acc[1] + x * vp * h;
        }
    }
    let two_pi = T::lit(2.0) * T::PI();
    if eq.hard_edge {
        [acc[0] - two_pi, acc[1] - T::one()]
    } else {
        [acc[0], acc[1] - two_pi]
    }
}

//! The limiting eigenvalue law of `A = U T V`: ring radii, the radial
//! density from the S-transform of `Θ^{♯2}` and, independently, from the
//! logarithmic potential of `ν^r = θ̃ ⊞ λ_r`.
//!
//! Both routes reduce to one-dimensional integrals against `Θ` of the kernel
//! `y / (y² + x²)`:
//!
//! * S-transform route. With `g(c) = ∫ c²/(c² + x²) dΘ` the radial quantile
//!   map is `F(g(c)) = c sqrt((1 - g(c)) / g(c))`, so the radial CDF at
//!   `r = F(g(c))` is `g(c)` itself.
//! * Log-potential route. On the imaginary axis `G_{ν^r}(iy) = -i q(τ)/r`
//!   with `q(τ) = τ/(1+τ²)`, where `τ > 0` solves `q(τ)/r = φ(y + rτ)` and
//!   `φ(s) = ∫ s/(s² + x²) dΘ`. Then
//!   `h(r) = ∫ log|x| dν^r = ∫_0^∞ (1/(1+y) - q(τ)/r) dy` and the mass of the
//!   disk of radius `r` is `r h'(r)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{Cell, Measure1D};
use crate::quad::{GL6_NODES, GL6_WEIGHTS, chebyshev_lobatto, exp_sinh_rule, exp_sinh_rule_odd, gauss_legendre6, linspace, root_positive_increasing};
use crate::real::Real;

/// Integrals of `Θ` against the Poisson kernel and its relatives.
#[derive(Clone, Debug)]
pub(crate) struct Kernel<T> {
    atoms: Vec<(T, T)>,
    cells: Vec<Cell<T>>,
    /// Per cell, six-point Gauss–Legendre nodes as `(x², weight · density)`.
    far: Vec<[(T, T); 6]>,
}

impl<T: Real> Kernel<T> {
    pub(crate) fn new(theta: &Measure1D<T>) -> Self {
        let cells = theta.cells();
        let far = cells
            .iter()
            .map(|c| {
                let half = c.width() / T::lit(2.0);
                let mid = (c.x0 + c.x1) / T::lit(2.0);
                std::array::from_fn(|k| {
                    let x = mid + half * T::lit(GL6_NODES[k]);
                    (x * x, half * T::lit(GL6_WEIGHTS[k]) * c.at(x))
                })
            })
            .collect();
        Self { atoms: theta.points(), cells, far }
    }

    /// `φ(s) = ∫ s/(s² + x²) dΘ`.
    pub(crate) fn phi(&self, s: T) -> T {
        let a: T = self.atoms.iter().map(|(x, w)| *w * s / (s * s + *x * *x)).sum();
        let c: T = self.cells.iter().map(|c| c.poisson(s)).sum();
        a + c
    }

    /// For `s' = rτ`, `s = y + s'`: returns `(F, B, φ(s))` with
    /// `F = s' - (s'² + r²) φ(s)` (same sign as the defining equation for `τ`)
    /// and `B = 1 - 2s'φ(s) - (s'² + r²) φ'(s)`, so that `∂F/∂τ = rB`.
    /// Both are integrated pointwise so that the large-`s` regime keeps
    /// relative accuracy.
    fn axis_terms(&self, sp: T, y: T, r: T) -> (T, T, T) {
        let s = y + sp;
        let s2 = s * s;
        let r2 = r * r;
        let f_num = |x2: T| (s * (sp * y - r2) + sp * x2) / (s2 + x2);
        let b_num = |x2: T| {
            let d = s2 + x2;
            ((x2 - r2) * (x2 - sp * sp)
                + y * (T::lit(2.0) * sp * (x2 + r2) + y * (T::lit(2.0) * x2 + r2 + sp * sp) + T::lit(2.0) * sp * y * y + y * y * y))
                / (d * d)
        };
        let mut f = T::zero();
        let mut b = T::zero();
        let mut phi = T::zero();
        for (x, w) in &self.atoms {
            let x2 = *x * *x;
            f = f + *w * f_num(x2);
            b = b + *w * b_num(x2);
            phi = phi + *w * s / (s2 + x2);
        }
        for (cell, nodes) in self.cells.iter().zip(&self.far) {
            if cell.far_from_axis_point(s) {
                for &(x2, w) in nodes {
                    let d = s2 + x2;
                    phi = phi + w * s / d;
                    f = f + w * f_num(x2);
                    b = b + w * b_num(x2);
                }
            } else {
                let p = cell.poisson(s);
                phi = phi + p;
                let dp = cell.poisson_derivative(s);
                let m = cell.mass();
                f = f + p * (sp * y - r2) + sp * (m - s * p);
                b = b + m - T::lit(2.0) * sp * p - (sp * sp + r2) * dp;
            }
        }
        (f, b, phi)
    }

    /// `∫ c²/(c² + x²) dΘ`.
    fn g(&self, c: T) -> T {
        c * self.phi(c)
    }

    /// `∫ x²/(c² + x²) dΘ = 1 - g(c)`, without cancellation for large `c`.
    fn g_complement(&self, c: T) -> T {
        let c2 = c * c;
        let a: T = self.atoms.iter().map(|(x, w)| *w * *x * *x / (c2 + *x * *x)).sum();
        let cells: T = self
            .cells
            .iter()
            .map(|cell| {
                if cell.width() * T::lit(4.0) < c {
                    gauss_legendre6(cell.x0, cell.x1, T::zero(), |x| cell.at(x) * x * x / (c2 + x * x))
                } else {
                    cell.mass() - c * cell.poisson(c)
                }
            })
            .sum();
        a + cells
    }
}

/// Inner and outer radius of the ring, `((∫x⁻²dΘ)^{-1/2}, (∫x²dΘ)^{1/2})`,
/// with `a = 0` when `∫x⁻²dΘ` diverges.
pub fn ring_radii<T: Real>(theta: &Measure1D<T>) -> Result<(T, T)> {
    let m2 = theta.moment(2, false)?;
    let m_2 = theta.moment(-2, false)?;
    let b = m2.sqrt();
    let a = if m_2.is_infinite() { T::zero() } else { m_2.sqrt().recip() };
    Ok((a.min(b), b))
}

fn check_theta<T: Real>(theta: &Measure1D<T>) -> Result<()> {
    if theta.support().0 < T::zero() && !theta.is_symmetric() {
        return Err(Error::Domain("Θ must live on [0, inf) or be given in symmetrized form".into()));
    }
    Ok(())
}

fn collapsed<T: Real>(a: T, b: T) -> bool {
    b - a <= T::lit(1e-10).max(T::tol_floor()) * b
}

/// The radial quantile map `F` of the limiting law, with `F(t) = 1/sqrt(S(t-1))`
/// for the S-transform `S` of `Θ^{♯2}`.
#[derive(Clone, Debug)]
pub struct RadialQuantile<T> {
    kernel: Kernel<T>,
    a: T,
    b: T,
}

impl<T: Real> RadialQuantile<T> {
    pub fn new(theta: &Measure1D<T>) -> Result<Self> {
        check_theta(theta)?;
        if theta.atom_mass_at(T::zero()) > T::zero() {
            return Err(Error::Domain("S-transform route needs Θ({0}) = 0".into()));
        }
        let (a, b) = ring_radii(theta)?;
        Ok(Self { kernel: Kernel::new(theta), a, b })
    }

    pub fn radii(&self) -> (T, T) {
        (self.a, self.b)
    }

    /// Radius reached at parameter `c`, `c sqrt((1 - g)/g)`.
    fn r_of_c(&self, c: T) -> T {
        let g = self.kernel.g(c);
        let gc = self.kernel.g_complement(c);
        c * (gc / g).sqrt()
    }

    fn c_of_t(&self, t: T) -> Result<T> {
        let tol = T::lit(1e-14).max(T::epsilon() * T::lit(4.0));
        let guess = if self.b > T::zero() { self.b } else { T::one() };
        if t <= T::lit(0.5) {
            root_positive_increasing(|c| self.kernel.g(c) - t, guess, tol)
        } else {
            root_positive_increasing(|c| (T::one() - t) - self.kernel.g_complement(c), guess, tol)
        }
    }

    fn c_of_r(&self, r: T) -> Result<T> {
        let tol = T::lit(1e-14).max(T::epsilon() * T::lit(4.0));
        root_positive_increasing(|c| self.r_of_c(c) - r, r, tol)
    }

    /// `F(t)` for `t ∈ (0, 1]`.
    pub fn f(&self, t: T) -> Result<T> {
        if !(t > T::zero() && t <= T::one()) {
            return Err(Error::Domain(format!("radial quantile argument {t} outside (0, 1]")));
        }
        if t == T::one() || collapsed(self.a, self.b) {
            return Ok(self.b);
        }
        Ok(self.r_of_c(self.c_of_t(t)?))
    }

    /// `F⁻¹(r) = μ_A(|λ| ≤ r)`.
    pub fn cdf(&self, r: T) -> Result<T> {
        if r <= self.a {
            return Ok(T::zero());
        }
        if r >= self.b {
            return Ok(T::one());
        }
        Ok(self.kernel.g(self.c_of_r(r)?))
    }

    /// `(dF/dt, t)` at the parameter value `c`, by centered differences in
    /// `log c` with one Richardson step.
    fn slope_at_c(&self, c: T) -> (T, T) {
        let delta = T::lit(1e-3);
        let diff = |f: &dyn Fn(T) -> T, d: T| (f(c * d.exp()) - f(c * (-d).exp())) / (T::lit(2.0) * d);
        let rich = |f: &dyn Fn(T) -> T| {
            (T::lit(4.0) * diff(f, delta / T::lit(2.0)) - diff(f, delta)) / T::lit(3.0)
        };
        let dr = rich(&|c| self.r_of_c(c));
        let dg = rich(&|c| self.kernel.g(c));
        (dr / dg, self.kernel.g(c))
    }

    /// `F'(t)`.
    pub fn f_derivative(&self, t: T) -> Result<T> {
        let c = self.c_of_t(t)?;
        Ok(self.slope_at_c(c).0)
    }

    /// `ρ_A(r) = 1 / (2π r F'(F⁻¹(r)))` for `a < r < b`, zero outside.
    pub fn density(&self, r: T) -> Result<T> {
        if r <= self.a || r >= self.b || collapsed(self.a, self.b) {
            return Ok(T::zero());
        }
        let c = self.c_of_r(r)?;
        let (fp, _) = self.slope_at_c(c);
        Ok(T::one() / (T::TAU() * r * fp))
    }

    /// `(t, F(t))` on `n` Chebyshev-spaced points of `(0, 1]`; fails when the
    /// tabulated `F` decreases by more than `1e-10 b`.
    pub fn table(&self, n: usize) -> Result<(Vec<T>, Vec<T>)> {
        let ts: Vec<T> = chebyshev_lobatto(n + 1, T::zero(), T::one()).into_iter().skip(1).collect();
        let fs = ts.iter().map(|&t| self.f(t)).collect::<Result<Vec<T>>>()?;
        let slack = T::lit(1e-10) * self.b;
        for k in 1..fs.len() {
            if fs[k] < fs[k - 1] - slack {
                return Err(Error::Accuracy(format!(
                    "radial quantile decreases on t in [{}, {}]",
                    ts[k - 1], ts[k]
                )));
            }
        }
        Ok((ts, fs))
    }
}

/// Imaginary-axis form of the Schwinger–Dyson equation for `ν^r`.
#[derive(Clone, Debug)]
pub struct GirkoField<T> {
    kernel: Kernel<T>,
    scale: T,
}

/// Quadrature state shared between `h(r)` and `r h'(r)`.
struct AxisSums<T> {
    log_potential: T,
    disk_mass: T,
}

impl<T: Real> GirkoField<T> {
    pub fn new(theta: &Measure1D<T>) -> Result<Self> {
        check_theta(theta)?;
        let scale = theta.moment(2, false)?.sqrt().max(T::epsilon());
        Ok(Self { kernel: Kernel::new(theta), scale })
    }

    /// Solves `q(τ)/r = φ(y + rτ)` for `τ > 0`; returns `(τ, B, φ(y + rτ))`.
    fn solve_tau(&self, r: T, y: T, guess: T) -> Result<(T, T, T)> {
        let eval = |u: T| -> (T, T, T) {
            let tau = u.exp();
            let (f, b, phi) = self.kernel.axis_terms(r * tau, y, r);
            (f, b, phi)
        };
        let u0 = guess.max(T::min_positive_value()).ln();
        // Newton in u = log τ from the warm start, safeguarded by a bracket
        // (F < 0 below the root, F > 0 above it); dF/du = rτB
        let (mut u, (mut f, mut b, mut phi)) = (u0, eval(u0));
        let (mut lo, mut hi): (Option<T>, Option<T>) = (None, None);
        let mut step = T::lit(0.05);
        let tol = T::epsilon() * T::lit(8.0);
        let max_jump = T::lit(2.0);
        for _ in 0..400 {
            if f == T::zero() {
                return Ok((u.exp(), b, phi));
            }
            if !f.is_finite() || u.abs() > T::lit(600.0) {
                return Err(Error::Numerical(format!("no sign change for tau at r={r}, y={y}")));
            }
            if f < T::zero() {
                lo = Some(u);
            } else {
                hi = Some(u);
            }
            let df = r * u.exp() * b;
            let newton = u - f / df;
            let inside = |x: T| lo.is_none_or(|l| x > l) && hi.is_none_or(|h| x < h);
            let next = if df > T::zero() && newton.is_finite() && inside(newton) && (newton - u).abs() <= max_jump {
                newton
            } else {
                match (lo, hi) {
                    (Some(l), Some(h)) => (l + h) / T::lit(2.0),
                    (Some(_), None) => {
                        step = step * T::lit(2.0);
                        u + step
                    }
                    _ => {
                        step = step * T::lit(2.0);
                        u - step
                    }
                }
            };
            let scale = T::one() + u.abs();
            let bracketed = matches!((lo, hi), (Some(l), Some(h)) if h - l <= tol * scale);
            if (next - u).abs() <= tol * scale || bracketed {
                return Ok((next.exp(), b, phi));
            }
            u = next;
            (f, b, phi) = eval(u);
        }
        Err(Error::Numerical(format!("tau iteration did not settle at r={r}, y={y}")))
    }

    /// Sums over `rule`, returning the solved `τ` per node. `guesses` (one
    /// per node) replace the default warm start, which extrapolates `log τ`
    /// linearly in `log y` from the previous two nodes.
    fn axis_sums(&self, r: T, rule: &[(T, T)], guesses: Option<&[T]>) -> Result<(AxisSums<T>, Vec<T>)> {
        let mut log_potential = T::zero();
        let mut dh = T::zero();
        let mut taus = Vec::with_capacity(rule.len());
        let mut last: [Option<(T, T)>; 2] = [None, None];
        for (k, &(y0, w)) in rule.iter().enumerate() {
            let y = y0 * self.scale;
            let wy = w * self.scale;
            if r == T::zero() {
                log_potential = log_potential + wy * (T::one() / (T::one() + y) - self.kernel.phi(y));
                continue;
            }
            let guess = match (guesses, last) {
                (Some(g), _) => g[k],
                (None, [Some((l1, u1)), Some((l0, u0))]) if l1 > l0 => {
                    (u1 + (u1 - u0) * (y.ln() - l1) / (l1 - l0)).exp()
                }
                (None, [Some((_, u1)), _]) => u1.exp(),
                _ => T::one(),
            };
            let (tau, b, phi) = self.solve_tau(r, y, guess)?;
            taus.push(tau);
            last = [Some((y.ln(), tau.ln())), last[0]];
            let one_t2 = T::one() + tau * tau;
            let g = tau / (r * one_t2);
            // implicit differentiation: ∂F/∂τ = rB, ∂F/∂r = τB - 2rφ
            let dtau = -(tau * b - T::lit(2.0) * r * phi) / (r * b);
            let dg = -g / r + (T::one() - tau * tau) / (r * one_t2 * one_t2) * dtau;
            log_potential = log_potential + wy * (T::one() / (T::one() + y) - g);
            dh = dh - wy * dg;
        }
        Ok((AxisSums { log_potential, disk_mass: r * dh }, taus))
    }

    fn sums(&self, r: T) -> Result<AxisSums<T>> {
        let t_max = T::lit(4.0);
        let tol = T::lit(1e-12).max(T::tol_floor());
        let mut h = T::lit(1.0 / 16.0);
        let (mut prev, mut taus) = self.axis_sums(r, &exp_sinh_rule(h, t_max), None)?;
        loop {
            h = h / T::lit(2.0);
            let rule = exp_sinh_rule_odd(h, t_max);
            // odd node i lies between coarse nodes i and i + 1
            let guesses: Option<Vec<T>> = (!taus.is_empty() && taus.len() == rule.len() + 1)
                .then(|| taus.windows(2).map(|w| (w[0] * w[1]).sqrt()).collect());
            let (odd, odd_taus) = self.axis_sums(r, &rule, guesses.as_deref())?;
            let half = T::lit(0.5);
            let next = AxisSums {
                log_potential: half * prev.log_potential + odd.log_potential,
                disk_mass: half * prev.disk_mass + odd.disk_mass,
            };
            let diff = (next.log_potential - prev.log_potential)
                .abs()
                .max((next.disk_mass - prev.disk_mass).abs());
            if diff <= tol || h < T::lit(1.0 / 512.0) {
                return Ok(next);
            }
            if !taus.is_empty() && taus.len() == odd_taus.len() + 1 {
                let mut merged = Vec::with_capacity(taus.len() + odd_taus.len());
                for (i, t) in taus.iter().enumerate() {
                    merged.push(*t);
                    if let Some(o) = odd_taus.get(i) {
                        merged.push(*o);
                    }
                }
                taus = merged;
            } else {
                taus.clear();
            }
            prev = next;
        }
    }

    /// `h(r) = ∫ log|x| dν^r(x)`.
    pub fn log_potential(&self, r: T) -> Result<T> {
        Ok(self.sums(r.abs())?.log_potential)
    }

    /// `μ_A(|λ| ≤ r) = r h'(r)`.
    pub fn disk_mass(&self, r: T) -> Result<T> {
        if r == T::zero() {
            return Ok(T::zero());
        }
        Ok(self.sums(r.abs())?.disk_mass)
    }

    /// `ρ_A(r) = (1/2π) Δh = (r h')'/(2π r)`, by centered differences of
    /// `r h'(r)` with step `dr` and one Richardson step; the even extension
    /// gives `ρ_A(0) = (r h')''(0)/(2π)`.
    pub fn density(&self, r: T, dr: T) -> Result<T> {
        let c = |x: T| self.disk_mass(x.abs());
        let two = T::lit(2.0);
        if r == T::zero() {
            let c1 = c(dr)?;
            let c2 = c(two * dr)?;
            let second = (T::lit(8.0) * c1 - c2 / two) / (T::lit(3.0) * dr * dr);
            return Ok(second / T::TAU());
        }
        let d = |h: T| -> Result<T> { Ok((c(r + h)? - c(r - h)?) / (two * h)) };
        let deriv = (T::lit(4.0) * d(dr)? - d(two * dr)?) / T::lit(3.0);
        Ok(deriv / (T::TAU() * r))
    }
}

/// Which route produced a [`RingLaw`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Pipeline {
    Stransform,
    Girko,
}

/// Radial density of the limiting eigenvalue law on a grid of radii.
#[derive(Clone, Debug, Serialize)]
pub struct RingLaw<T> {
    pub a: T,
    pub b: T,
    pub pipeline: Pipeline,
    /// `a = b`: the law is uniform on the circle of radius `a` and has no density.
    pub collapsed: bool,
    pub r_grid: Vec<T>,
    pub density: Vec<T>,
    /// `∫ 2πr ρ dr` before renormalization.
    pub raw_mass: T,
    #[serde(skip)]
    nodes: Vec<T>,
    #[serde(skip)]
    values: Vec<T>,
}

/// `∫ 2π s p(s) ds` over `[s0, s1]` for linear `p`.
fn shell_mass<T: Real>(s0: T, s1: T, p0: T, p1: T) -> T {
    let h = s1 - s0;
    // exact for linear p: 2π h (p0 (2 s0 + s1) + p1 (s0 + 2 s1)) / 6
    T::TAU() * h * (p0 * (T::lit(2.0) * s0 + s1) + p1 * (s0 + T::lit(2.0) * s1)) / T::lit(6.0)
}

impl<T: Real> RingLaw<T> {
    fn collapsed_law(a: T, b: T, pipeline: Pipeline, r_grid: &[T]) -> Self {
        Self {
            a,
            b,
            pipeline,
            collapsed: true,
            r_grid: r_grid.to_vec(),
            density: vec![T::zero(); r_grid.len()],
            raw_mass: T::one(),
            nodes: Vec::new(),
            values: Vec::new(),
        }
    }

    fn from_nodes(a: T, b: T, pipeline: Pipeline, r_grid: &[T], nodes: Vec<T>, mut values: Vec<T>) -> Self {
        let raw_mass: T = (0..nodes.len().saturating_sub(1))
            .map(|k| shell_mass(nodes[k], nodes[k + 1], values[k], values[k + 1]))
            .sum();
        if raw_mass > T::zero() {
            if (raw_mass - T::one()).abs() > T::lit(1e-2) {
                log::warn!("{pipeline:?} ring law renormalized by {raw_mass}");
            } else {
                log::debug!("{pipeline:?} ring law renormalized by {raw_mass}");
            }
            for v in values.iter_mut() {
                *v = *v / raw_mass;
            }
        }
        let mut law = Self {
            a,
            b,
            pipeline,
            collapsed: false,
            r_grid: r_grid.to_vec(),
            density: Vec::new(),
            raw_mass,
            nodes,
            values,
        };
        law.density = r_grid.iter().map(|&r| law.density_at(r)).collect();
        law
    }

    /// Piecewise-linear density at radius `r`.
    pub fn density_at(&self, r: T) -> T {
        if self.collapsed || self.nodes.is_empty() {
            return T::zero();
        }
        let first = self.nodes[0];
        let last = *self.nodes.last().unwrap();
        if r < first || r > last {
            return T::zero();
        }
        let k = self.nodes.partition_point(|x| *x <= r).clamp(1, self.nodes.len() - 1) - 1;
        let (s0, s1) = (self.nodes[k], self.nodes[k + 1]);
        let (p0, p1) = (self.values[k], self.values[k + 1]);
        p0 + (p1 - p0) * (r - s0) / (s1 - s0)
    }

    /// `μ_A(|λ| ≤ r)`.
    pub fn cdf(&self, r: T) -> T {
        if self.collapsed || self.nodes.is_empty() {
            return if r >= self.a { T::one() } else { T::zero() };
        }
        let mut acc = T::zero();
        for k in 0..self.nodes.len() - 1 {
            let (s0, s1) = (self.nodes[k], self.nodes[k + 1]);
            if r <= s0 {
                break;
            }
            let (p0, p1) = (self.values[k], self.values[k + 1]);
            if r >= s1 {
                acc = acc + shell_mass(s0, s1, p0, p1);
            } else {
                let pr = p0 + (p1 - p0) * (r - s0) / (s1 - s0);
                acc = acc + shell_mass(s0, r, p0, pr);
            }
        }
        acc
    }

    /// Radial law as a measure on `[0, inf)`.
    pub fn radial_measure(&self) -> Result<Measure1D<T>> {
        if self.collapsed || self.nodes.is_empty() {
            return Ok(Measure1D::dirac(self.a));
        }
        let vals: Vec<T> = self.nodes.iter().zip(&self.values).map(|(r, p)| T::TAU() * *r * *p).collect();
        Measure1D::grid_normalized(self.nodes.clone(), vals)
    }

    /// First and last grid radius where the density exceeds `frac · max`.
    pub fn support_edges(&self, frac: T) -> Option<(T, T)> {
        let max = self.density.iter().copied().fold(T::zero(), T::max);
        if max <= T::zero() {
            return None;
        }
        let thr = frac * max;
        let first = self.density.iter().position(|d| *d > thr)?;
        let last = self.density.iter().rposition(|d| *d > thr)?;
        Some((self.r_grid[first], self.r_grid[last]))
    }

    /// Stretches inside the support where the density stays below
    /// `1e-3 · max` for more than two grid steps.
    pub fn internal_gaps(&self) -> Vec<(T, T)> {
        let max = self.density.iter().copied().fold(T::zero(), T::max);
        let thr = T::lit(1e-3) * max;
        let Some(first) = self.density.iter().position(|d| *d > thr) else {
            return Vec::new();
        };
        let last = self.density.iter().rposition(|d| *d > thr).unwrap();
        let mut gaps = Vec::new();
        let mut k = first;
        while k < last {
            if self.density[k] <= thr {
                let start = k;
                while k < last && self.density[k] <= thr {
                    k += 1;
                }
                if k - start > 2 {
                    gaps.push((self.r_grid[start], self.r_grid[k - 1]));
                }
            }
            k += 1;
        }
        gaps
    }

    /// CSV with columns `r,density,cdf`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,density,cdf\n");
        for (r, d) in self.r_grid.iter().zip(&self.density) {
            out.push_str(&format!("{r:.12e},{d:.12e},{:.12e}\n", self.cdf(*r)));
        }
        out
    }

    pub fn to_json(&self) -> Result<String>
    where
        T: Serialize,
    {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `ρ_A` on `r_grid` from the radial quantile map.
pub fn radial_density_stransform<T: Real>(theta: &Measure1D<T>, r_grid: &[T]) -> Result<RingLaw<T>> {
    let q = RadialQuantile::new(theta)?;
    let (a, b) = q.radii();
    if collapsed(a, b) {
        return Ok(RingLaw::collapsed_law(a, b, Pipeline::Stransform, r_grid));
    }
    q.table(400)?;
    // closed support [a, b] with one-sided endpoint values
    let nodes = ring_nodes(a, b, r_grid);
    let inset = (b - a) * T::lit(1e-7);
    let values = nodes
        .par_iter()
        .map(|&r| q.density(r.max(a + inset).min(b - inset)))
        .collect::<Result<Vec<T>>>()?;
    Ok(RingLaw::from_nodes(a, b, Pipeline::Stransform, r_grid, nodes, values))
}

/// `ρ_A` on `r_grid` from the radial Laplacian of `h(r) = ∫ log|x| dν^r`.
/// `dr` defaults to `1e-3 · b`.
pub fn radial_density_girko<T: Real>(theta: &Measure1D<T>, r_grid: &[T], dr: Option<T>) -> Result<RingLaw<T>> {
    let (a, b) = ring_radii(theta)?;
    if collapsed(a, b) {
        return Ok(RingLaw::collapsed_law(a, b, Pipeline::Girko, r_grid));
    }
    if r_grid.iter().any(|r| *r < T::zero()) {
        return Err(Error::Domain("radii must be nonnegative".into()));
    }
    let field = GirkoField::new(theta)?;
    let dr = dr.unwrap_or(b * T::lit(1e-3)).min((b - a) / T::lit(20.0));
    // keep the difference stencil inside the support
    let lo = if a > T::zero() { a + T::lit(3.0) * dr } else { T::zero() };
    let hi = b - T::lit(3.0) * dr;
    let nodes = ring_nodes(a, b, r_grid);
    let values = nodes
        .par_iter()
        .map(|&r| field.density(r.max(lo).min(hi), dr).map(|d| d.max(T::zero())))
        .collect::<Result<Vec<T>>>()?;
    Ok(RingLaw::from_nodes(a, b, Pipeline::Girko, r_grid, nodes, values))
}

fn ring_nodes<T: Real>(a: T, b: T, r_grid: &[T]) -> Vec<T> {
    let mut nodes: Vec<T> = linspace(a, b, 129);
    nodes.extend(r_grid.iter().copied().filter(|r| *r > a && *r < b));
    nodes.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    nodes.dedup_by(|x, y| (*x - *y).abs() <= T::epsilon() * b * T::lit(16.0));
    nodes
}

/// `μ_A(|λ| ≤ r)` of a ring law.
pub fn ring_cdf<T: Real>(law: &RingLaw<T>, r: T) -> T {
    law.cdf(r)
}

/// Agreement between the two routes on a common grid.
#[derive(Clone, Debug, Serialize)]
pub struct CrossValidation<T> {
    pub sup: T,
    /// `∫ |ρ_S - ρ_G| 2πr dr` over the compared points.
    pub l1: T,
    pub compared: usize,
    /// Radii excluded because their difference stencil meets a support edge.
    pub excluded: usize,
    pub stransform: RingLaw<T>,
    pub girko: RingLaw<T>,
}

impl<T: Real> CrossValidation<T> {
    pub fn passes(&self, tol: T) -> bool {
        self.sup < tol
    }
}

/// Runs both routes on `r_grid` and compares them away from the support
/// edges (two grid steps around `a > 0` and `b`).
pub fn cross_validate<T: Real>(theta: &Measure1D<T>, r_grid: &[T]) -> Result<CrossValidation<T>> {
    let s = radial_density_stransform(theta, r_grid)?;
    let g = radial_density_girko(theta, r_grid, None)?;
    let step = r_grid
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(T::zero(), T::max);
    let band = T::lit(2.0) * step;
    let near_edge = |r: T| (s.a > T::zero() && (r - s.a).abs() <= band) || (r - s.b).abs() <= band;
    let mut sup = T::zero();
    let mut l1 = T::zero();
    let mut compared = 0;
    let mut excluded = 0;
    let mut prev: Option<(T, T)> = None;
    for (k, &r) in r_grid.iter().enumerate() {
        if near_edge(r) {
            excluded += 1;
            prev = None;
            continue;
        }
        let d = (s.density[k] - g.density[k]).abs();
        sup = sup.max(d);
        compared += 1;
        if let Some((r0, d0)) = prev {
            l1 = l1 + T::PI() * (r - r0) * (r0 * d0 + r * d);
        }
        prev = Some((r, d));
    }
    Ok(CrossValidation { sup, l1, compared, excluded, stransform: s, girko: g })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freeprob::{s_transform_ext, free_convolve_bernoulli};
    use crate::quad::graded_grid;
    use approx::assert_abs_diff_eq;

    type M = Measure1D<f64>;

    fn two_atoms() -> M {
        M::atoms(&[1.0, 2.0], &[0.5, 0.5]).unwrap()
    }

    #[test]
    fn radii_examples() {
        let (a, b) = ring_radii(&M::dirac(1.0)).unwrap();
        assert_eq!((a, b), (1.0, 1.0));
        let (a, b) = ring_radii(&two_atoms()).unwrap();
        assert_abs_diff_eq!(a, 1.264_911, epsilon = 1e-6);
        assert_abs_diff_eq!(b, 1.581_139, epsilon = 1e-6);
        let (a, b) = ring_radii(&M::quarter_circle(2000)).unwrap();
        assert_eq!(a, 0.0);
        assert_abs_diff_eq!(b, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn quantile_map_matches_s_transform_of_square() {
        // F(t) = 1/sqrt(S(t-1)) for the S-transform of the pushed-forward square
        let theta = M::uniform(1.0, 2.0).unwrap();
        let q = RadialQuantile::new(&theta).unwrap();
        let sq = theta.pushforward_square().unwrap();
        for t in [0.1, 0.4, 0.8] {
            let s = s_transform_ext(&sq, t - 1.0).unwrap();
            assert_abs_diff_eq!(q.f(t).unwrap(), 1.0 / s.sqrt(), epsilon = 1e-5);
        }
        let (a, b) = q.radii();
        assert_abs_diff_eq!(q.f(1e-9).unwrap(), a, epsilon = 1e-4);
        assert_abs_diff_eq!(q.f(1.0).unwrap(), b, epsilon = 1e-12);
    }

    #[test]
    fn circular_law_from_quarter_circle() {
        let theta = M::quarter_circle(2000);
        let grid = linspace(0.0, 1.2, 121);
        let law = radial_density_stransform(&theta, &grid).unwrap();
        assert_eq!(law.a, 0.0);
        for (r, d) in grid.iter().zip(&law.density) {
            if *r < 0.999 {
                assert_abs_diff_eq!(*d, 1.0 / std::f64::consts::PI, epsilon = 1e-3);
            } else if *r > 1.001 {
                assert_eq!(*d, 0.0);
            }
        }
        assert_abs_diff_eq!(law.raw_mass, 1.0, epsilon = 1e-4);
        assert_abs_diff_eq!(law.cdf(0.5), 0.25, epsilon = 1e-4);
        assert_abs_diff_eq!(law.cdf(2.0), 1.0, epsilon = 1e-12);
        assert!(law.internal_gaps().is_empty());
    }

    #[test]
    fn collapsed_ring_is_flagged() {
        let law = radial_density_stransform(&M::dirac(1.5), &linspace(0.0, 2.0, 21)).unwrap();
        assert!(law.collapsed);
        assert_eq!((law.a, law.b), (1.5, 1.5));
        assert_eq!(law.cdf(1.4), 0.0);
        assert_eq!(law.cdf(1.5), 1.0);
        let law = radial_density_girko(&M::dirac(1.5), &linspace(0.0, 2.0, 21), None).unwrap();
        assert!(law.collapsed);
    }

    #[test]
    fn cdf_inverts_quantile_map() {
        let theta = two_atoms();
        let q = RadialQuantile::new(&theta).unwrap();
        let (a, b) = q.radii();
        let grid = linspace(0.0, 1.2 * b, 241);
        let law = radial_density_stransform(&theta, &grid).unwrap();
        assert_eq!(law.a, a);
        for t in [0.25, 0.5, 0.75] {
            let r = q.f(t).unwrap();
            assert_abs_diff_eq!(law.cdf(r), t, epsilon = 2e-3);
            assert_abs_diff_eq!(q.cdf(r).unwrap(), t, epsilon = 1e-10);
        }
        assert_abs_diff_eq!(law.raw_mass, 1.0, epsilon = 1e-4);
        assert_eq!(law.cdf(a * 0.99), 0.0);
        assert!(law.internal_gaps().is_empty());
        let (lo, hi) = law.support_edges(1e-3).unwrap();
        let step = grid[1] - grid[0];
        assert!((lo - a).abs() <= 2.0 * step && (hi - b).abs() <= 2.0 * step);
    }

    #[test]
    fn girko_log_potential_examples() {
        // Θ = δ₁: h(r) = max(log r, 0)
        let f = GirkoField::new(&M::dirac(1.0)).unwrap();
        for r in [0.5, 2.0, 3.0] {
            assert_abs_diff_eq!(f.log_potential(r).unwrap(), r.ln().max(0.0), epsilon = 1e-9);
        }
        assert_abs_diff_eq!(f.disk_mass(0.5).unwrap(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(f.disk_mass(2.0).unwrap(), 1.0, epsilon = 1e-9);
        // quarter circle: h(r) = (r² - 1)/2 inside the unit disk, log r outside
        let f = GirkoField::new(&M::quarter_circle(1000)).unwrap();
        assert_abs_diff_eq!(f.log_potential(0.0).unwrap(), -0.5, epsilon = 1e-5);
        assert_abs_diff_eq!(f.log_potential(0.6).unwrap(), (0.36 - 1.0) / 2.0, epsilon = 1e-5);
        assert_abs_diff_eq!(f.log_potential(1.5).unwrap(), 1.5f64.ln(), epsilon = 1e-5);
        assert_abs_diff_eq!(f.disk_mass(0.6).unwrap(), 0.36, epsilon = 1e-5);
    }

    #[test]
    fn girko_log_potential_matches_convolved_density() {
        // oracle: log-potential of the free convolution computed on the real line
        let theta = M::uniform(0.5, 1.5).unwrap();
        let r = 0.8;
        let grid = graded_grid(-2.6, 2.6, 2e-3, &[], 1e-3);
        let conv = free_convolve_bernoulli(&theta, r, &grid, 1e-4).unwrap();
        let oracle = conv.measure.log_potential(0.0);
        let h = GirkoField::new(&theta).unwrap().log_potential(r).unwrap();
        assert_abs_diff_eq!(h, oracle, epsilon = 2e-3);
    }

    #[test]
    fn girko_density_of_circular_law() {
        let theta = M::quarter_circle(400);
        let f = GirkoField::new(&theta).unwrap();
        for r in [0.0, 0.3, 0.8] {
            let d = f.density(r, 1e-3).unwrap();
            assert_abs_diff_eq!(d, 1.0 / std::f64::consts::PI, epsilon = 5e-3);
        }
        assert_abs_diff_eq!(f.density(1.3, 1e-3).unwrap(), 0.0, epsilon = 1e-6);
    }

    #[test]
    fn pipelines_agree_on_uniform_theta() {
        let theta = M::uniform(1.0, 2.0).unwrap();
        let (a, b) = ring_radii(&theta).unwrap();
        let grid = linspace(0.9 * a, 1.05 * b, 41);
        let cv = cross_validate(&theta, &grid).unwrap();
        assert!(cv.compared > 10);
        assert!(cv.passes(5e-3), "sup {}", cv.sup);
    }

    #[test]
    fn scaling_covariance() {
        let theta = two_atoms();
        let c = 1.7;
        let scaled = theta.scaled(c).unwrap();
        let (a, b) = ring_radii(&theta).unwrap();
        let (ca, cb) = ring_radii(&scaled).unwrap();
        assert_abs_diff_eq!(ca, c * a, epsilon = 1e-12);
        assert_abs_diff_eq!(cb, c * b, epsilon = 1e-12);
        let q = RadialQuantile::new(&theta).unwrap();
        let qc = RadialQuantile::new(&scaled).unwrap();
        for r in [1.3, 1.4, 1.5] {
            assert_abs_diff_eq!(qc.density(c * r).unwrap() * c * c, q.density(r).unwrap(), epsilon = 1e-3);
        }
    }

    #[test]
    fn csv_and_json() {
        let law = radial_density_stransform(&two_atoms(), &linspace(0.0, 2.0, 5)).unwrap();
        let csv = law.to_csv();
        assert!(csv.starts_with("r,density,cdf\n"));
        assert_eq!(csv.lines().count(), 6);
        let json = law.to_json().unwrap();
        assert!(json.contains("\"pipeline\": \"stransform\""));
    }

    #[test]
    fn single_precision_radii() {
        let (a, b) = ring_radii(&Measure1D::<f32>::atoms(&[1.0, 2.0], &[0.5, 0.5]).unwrap()).unwrap();
        assert!((a - 1.264_911).abs() < 1e-5 && (b - 1.581_139).abs() < 1e-5);
    }
}

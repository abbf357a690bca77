//! Free additive convolution with a symmetric Bernoulli law and the
//! S-transform of measures on the positive half-line.
//!
//! The Schwinger–Dyson equation `G = G_θ(z - ρR_ρ(G))` is solved in its
//! subordination form: the unknown is `ω₁ = z - ρR_ρ(G)` itself, and the
//! equations are
//!
//! ```text
//! G = G_θ(ω₁),   ω₂ = z + 1/G - ω₁,   G_λ(ω₂) = G,   G_λ(ω) = ω / (ω² - ρ²).
//! ```
//!
//! This avoids tracking a branch of the square root inside `R_ρ`; the value
//! `ρR_ρ(G) = ω₂ - 1/G` comes out on the branch the analytic continuation
//! selects.

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measures::{stieltjes_invert, Measure1D};
use crate::quad::brent;
use crate::real::Real;

/// R-transform of the symmetric Bernoulli law `(δ_ρ + δ_{-ρ})/2`, scaled so
/// that `ρ R_ρ(w)` is the R-transform itself:
/// `R_ρ(w) = 2ρw / (sqrt(1 + 4ρ²w²) + 1)`.
///
/// The root is taken as `sqrt(1 + 2iρw) · sqrt(1 - 2iρw)`, which is the
/// branch continuous from `w = 0`.
pub fn bernoulli_r<T: Real>(rho: T, w: Complex<T>) -> Complex<T> {
    if rho == T::zero() || w == Complex::new(T::zero(), T::zero()) {
        return Complex::new(T::zero(), T::zero());
    }
    let one = Complex::new(T::one(), T::zero());
    let iw = Complex::new(T::zero(), T::lit(2.0) * rho) * w;
    let root = (one + iw).sqrt() * (one - iw).sqrt();
    w * (T::lit(2.0) * rho) / (root + one)
}

/// The two algebraic values of `ρR_ρ(w)`: the principal one and its
/// partner on the other sheet of the square root.
fn bernoulli_r_branches<T: Real>(rho: T, w: Complex<T>) -> [Complex<T>; 2] {
    let one = Complex::new(T::one(), T::zero());
    let iw = Complex::new(T::zero(), T::lit(2.0) * rho) * w;
    let root = (one + iw).sqrt() * (one - iw).sqrt();
    let two_rho_w = w * (T::lit(2.0) * rho);
    [two_rho_w * rho / (root + one), two_rho_w * rho / (one - root)]
}

/// Solution of the Schwinger–Dyson equation at one spectral point.
#[derive(Clone, Copy, Debug)]
pub struct SdSolution<T> {
    pub z1: Complex<T>,
    /// `G_ν(z₁)` for `ν = θ̃ ⊞ λ_ρ`.
    pub g: Complex<T>,
    /// Subordination point `z₁ - ρR_ρ(G)`.
    pub z2: Complex<T>,
    /// Partner subordination point with `G_λ(ω₂) = G`.
    pub omega2: Complex<T>,
    /// `ρR_ρ(G)` on the branch selected by continuation.
    pub rho_r: Complex<T>,
    /// `|G - G_θ̃(z₂)|`.
    pub residual: T,
    pub iterations: usize,
}

impl<T: Real> SdSolution<T> {
    /// `G_U = G R_ρ(G) / 2`.
    pub fn g_u(&self, rho: T) -> Complex<T> {
        if rho == T::zero() {
            return Complex::new(T::zero(), T::zero());
        }
        self.g * self.rho_r / (T::lit(2.0) * rho)
    }

    /// Whether `rho_r` agrees with one of the two algebraic values of `ρR_ρ(G)`.
    pub fn on_bernoulli_branch(&self, rho: T, tol: T) -> bool {
        if rho == T::zero() {
            return true;
        }
        bernoulli_r_branches(rho, self.g)
            .iter()
            .any(|b| (*b - self.rho_r).norm() <= tol * (T::one() + b.norm()))
    }
}

/// Stopping rules for the Schwinger–Dyson solver.
#[derive(Clone, Copy, Debug)]
pub struct SdOptions<T> {
    /// Residual tolerance at the target point (relative to `1 + |G|`).
    pub tol: T,
    /// Newton iterations per continuation level.
    pub max_newton: usize,
    /// Damped fixed-point iterations per level when Newton fails.
    pub max_damped: usize,
    pub max_levels: usize,
}

impl<T: Real> Default for SdOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-10).max(T::tol_floor()),
            max_newton: 60,
            max_damped: 20_000,
            max_levels: 60,
        }
    }
}

/// Solver for `G = G_θ̃(z - ρR_ρ(G))` with a fixed symmetric `θ̃` and `ρ`.
#[derive(Clone, Debug)]
pub struct SdSolver<'a, T> {
    theta: &'a Measure1D<T>,
    rho: T,
    opts: SdOptions<T>,
    y0: T,
    point_mass_at_zero: bool,
}

struct Eval<T> {
    r: Complex<T>,
    dr: Complex<T>,
    g: Complex<T>,
}

impl<'a, T: Real> SdSolver<'a, T> {
    pub fn new(theta_sym: &'a Measure1D<T>, rho: T, opts: SdOptions<T>) -> Result<Self> {
        if !theta_sym.is_symmetric() {
            return Err(Error::Domain("Schwinger–Dyson solver needs a symmetric measure".into()));
        }
        if !(rho >= T::zero()) || !rho.is_finite() {
            return Err(Error::Domain(format!("rho must be finite and nonnegative, got {rho}")));
        }
        let radius = theta_sym.support_radius();
        let span = radius + rho;
        let y0 = T::lit(10.0) * if span > T::zero() { span } else { T::one() };
        let point_mass_at_zero = theta_sym.atom_mass_at(T::zero()) == T::one();
        Ok(Self { theta: theta_sym, rho, opts, y0, point_mass_at_zero })
    }

    pub fn rho(&self) -> T {
        self.rho
    }

    fn g_lambda(&self, w: Complex<T>) -> Complex<T> {
        w / (w * w - self.rho * self.rho)
    }

    fn eval(&self, z: Complex<T>, w1: Complex<T>) -> Option<Eval<T>> {
        let g = self.theta.cauchy(w1);
        if g.norm() == T::zero() || !g.re.is_finite() || !g.im.is_finite() {
            return None;
        }
        let dg = self.theta.cauchy_derivative(w1);
        let w2 = z + g.inv() - w1;
        let rho2 = self.rho * self.rho;
        let den = w2 * w2 - rho2;
        let gl = w2 / den;
        let dgl = -(w2 * w2 + rho2) / (den * den);
        let r = gl - g;
        let dr = dgl * (-dg / (g * g) - T::one()) - dg;
        if !(r.re.is_finite() && r.im.is_finite() && dr.re.is_finite() && dr.im.is_finite()) {
            return None;
        }
        Some(Eval { r, dr, g })
    }

    fn admissible(&self, z: Complex<T>, w1: Complex<T>, g: Complex<T>) -> bool {
        let floor = z.im * (T::one() - T::lit(1e-6));
        let w2 = z + g.inv() - w1;
        w1.im >= floor && w2.im >= floor
    }

    fn converged(&self, e: &Eval<T>, tol: T) -> bool {
        e.r.norm() <= tol * (T::one() + e.g.norm())
    }

    /// Safeguarded Newton iteration on `ω₁`.
    fn newton(&self, z: Complex<T>, start: Complex<T>, tol: T) -> Option<(Complex<T>, usize)> {
        let mut w = start;
        let mut e = self.eval(z, w)?;
        if !self.admissible(z, w, e.g) {
            return None;
        }
        for it in 0..self.opts.max_newton {
            if self.converged(&e, tol) {
                return Some((w, it));
            }
            let step = e.r / e.dr;
            if !(step.re.is_finite() && step.im.is_finite()) {
                return None;
            }
            let mut lambda = T::one();
            loop {
                let wn = w - step * lambda;
                if let Some(en) = self.eval(z, wn) {
                    if self.admissible(z, wn, en.g) && en.r.norm() < e.r.norm() {
                        w = wn;
                        e = en;
                        break;
                    }
                }
                lambda = lambda / T::lit(2.0);
                if lambda < T::lit(1e-8) {
                    return None;
                }
            }
        }
        if self.converged(&e, tol) {
            Some((w, self.opts.max_newton))
        } else {
            None
        }
    }

    /// Damped iteration `ω ← (1-α)ω + α(z - ρ²/(z + 1/G_θ̃(ω) - ω))`, which
    /// converges for every `z` in the upper half-plane. The damping is halved
    /// whenever the residual fails to decrease (after a short burn-in).
    fn damped(&self, z: Complex<T>, start: Complex<T>, tol: T) -> std::result::Result<(Complex<T>, usize), T> {
        let rho2 = self.rho * self.rho;
        let map = |w: Complex<T>| -> Complex<T> {
            let g = self.theta.cauchy(w);
            z - (z + g.inv() - w).inv() * rho2
        };
        let mut w = if start.im >= z.im { start } else { z };
        let mut alpha = T::lit(0.5);
        let mut last = T::infinity();
        for it in 0..self.opts.max_damped {
            let e = match self.eval(z, w) {
                Some(e) => e,
                None => return Err(T::infinity()),
            };
            if self.converged(&e, tol) && self.admissible(z, w, e.g) {
                return Ok((w, it));
            }
            let res = e.r.norm();
            if it >= 5 && res >= last {
                alpha = (alpha / T::lit(2.0)).max(T::lit(1e-4));
            }
            last = res;
            let next = map(w);
            w = w * (T::one() - alpha) + next * alpha;
            if w.im < z.im {
                w.im = z.im;
            }
        }
        Err(last)
    }

    fn level(&self, z: Complex<T>, start: Complex<T>, tol: T) -> Result<(Complex<T>, usize)> {
        if let Some(ok) = self.newton(z, start, tol) {
            return Ok(ok);
        }
        self.damped(z, start, tol).map_err(|res| Error::Solver {
            at: format!("z = {z}"),
            residual: res.as_f64(),
            iterations: self.opts.max_damped,
        })
    }

    fn closed_form(&self, z: Complex<T>) -> Option<SdSolution<T>> {
        let zero = Complex::new(T::zero(), T::zero());
        if self.rho == T::zero() {
            let g = self.theta.cauchy(z);
            return Some(SdSolution { z1: z, g, z2: z, omega2: zero, rho_r: zero, residual: T::zero(), iterations: 0 });
        }
        if self.point_mass_at_zero {
            let g = self.g_lambda(z);
            let z2 = g.inv();
            let rho_r = z - z2;
            let residual = (g - z2.inv()).norm();
            return Some(SdSolution { z1: z, g, z2, omega2: z, rho_r, residual, iterations: 0 });
        }
        None
    }

    fn finish(&self, z: Complex<T>, w1: Complex<T>, iterations: usize) -> SdSolution<T> {
        let g = self.theta.cauchy(w1);
        let omega2 = z + g.inv() - w1;
        let rho_r = omega2 - g.inv();
        let z2 = z - rho_r;
        let residual = (g - self.theta.cauchy(z2)).norm();
        SdSolution { z1: z, g, z2, omega2, rho_r, residual, iterations }
    }

    /// Solves at `z` by continuation from `z + iY` down to `Im z`.
    pub fn solve(&self, z: Complex<T>) -> Result<SdSolution<T>> {
        if !(z.im > T::zero()) {
            return Err(Error::Domain(format!("Schwinger–Dyson solver needs Im z > 0, got {z}")));
        }
        if let Some(s) = self.closed_form(z) {
            return Ok(s);
        }
        let coarse = self.opts.tol.max(T::lit(1e-8));
        let mut levels = Vec::new();
        let mut y = self.y0;
        while y > z.im && levels.len() < self.opts.max_levels {
            levels.push(y);
            y = y / T::lit(2.0);
        }
        let mut prev = Complex::new(z.re, levels.first().copied().unwrap_or(z.im));
        let rho2 = self.rho * self.rho;
        let mut w = prev - prev.inv() * rho2;
        let mut iterations = 0;
        for y in levels {
            let zk = Complex::new(z.re, y);
            let (wk, it) = self.level(zk, w + (zk - prev), coarse)?;
            iterations += it;
            w = wk;
            prev = zk;
        }
        let (w, it) = self.level(z, w + (z - prev), self.opts.tol)?;
        Ok(self.finish(z, w, iterations + it))
    }

    /// Solves at `z` starting Newton from a nearby solution; falls back to
    /// full continuation when that fails.
    pub fn solve_near(&self, z: Complex<T>, near: &SdSolution<T>) -> Result<SdSolution<T>> {
        if let Some(s) = self.closed_form(z) {
            return Ok(s);
        }
        let start = near.z2 + (z - near.z1);
        match self.newton(z, start, self.opts.tol) {
            Some((w, it)) => Ok(self.finish(z, w, it)),
            None => self.solve(z),
        }
    }
}

/// Solves `G = G_θ̃(z₁ - ρR_ρ(G))` for symmetric `θ̃` at `z₁` in the upper half-plane.
pub fn sd_solve<T: Real>(theta_sym: &Measure1D<T>, rho: T, z1: Complex<T>, tol: T) -> Result<SdSolution<T>> {
    let opts = SdOptions { tol, ..SdOptions::default() };
    SdSolver::new(theta_sym, rho, opts)?.solve(z1)
}

/// `|Im G| ≤ κ₁`.
pub fn diag_bounds_check<T: Real>(sol: &SdSolution<T>, kappa1: T) -> bool {
    sol.g.im.abs() <= kappa1
}

/// Density of `θ̃ ⊞ λ_ρ` on a grid, with diagnostics.
#[derive(Clone, Debug)]
pub struct Convolution<T> {
    pub measure: Measure1D<T>,
    /// Mass carried by the raw inversion before renormalization.
    pub recovered_mass: T,
    pub max_residual: T,
}

/// `θ̃ ⊞ λ_ρ` as a symmetric grid density on `out_grid`, from Schwinger–Dyson
/// solutions at `x + iη` and `x + iη/2` combined by Richardson extrapolation.
///
/// `theta` may be given on `[0, inf)` (it is symmetrized) or already symmetric.
pub fn free_convolve_bernoulli<T: Real>(
    theta: &Measure1D<T>,
    rho: T,
    out_grid: &[T],
    eta: T,
) -> Result<Convolution<T>> {
    let sym = theta.symmetrize()?;
    let solver = SdSolver::new(&sym, rho, SdOptions::default())?;
    let mut abs: Vec<T> = out_grid.iter().map(|x| x.abs()).collect();
    abs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    abs.dedup();
    let chunk = 64;
    let solved: Vec<Vec<(T, Complex<T>, Complex<T>, T)>> = abs
        .par_chunks(chunk)
        .map(|xs| -> Result<Vec<(T, Complex<T>, Complex<T>, T)>> {
            let mut out = Vec::with_capacity(xs.len());
            let mut last: Option<SdSolution<T>> = None;
            for &x in xs {
                let z = Complex::new(x, eta);
                let full = match &last {
                    Some(s) => solver.solve_near(z, s)?,
                    None => solver.solve(z)?,
                };
                let half = solver.solve_near(Complex::new(x, eta / T::lit(2.0)), &full)?;
                out.push((x, full.g, half.g, full.residual.max(half.residual)));
                last = Some(full);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let table: Vec<(T, Complex<T>, Complex<T>, T)> = solved.into_iter().flatten().collect();
    let lookup = |x: T| {
        let i = table.partition_point(|e| e.0 < x.abs());
        table[i.min(table.len() - 1)]
    };
    let mut g_eta = Vec::with_capacity(out_grid.len());
    let mut g_half = Vec::with_capacity(out_grid.len());
    let mut max_residual = T::zero();
    for &x in out_grid {
        let (_, g, gh, res) = lookup(x);
        g_eta.push(g);
        g_half.push(gh);
        max_residual = max_residual.max(res);
    }
    let inv = stieltjes_invert(out_grid, &g_eta, Some(&g_half), eta)?;
    if (inv.recovered_mass - T::one()).abs() > T::lit(1e-2) {
        log::warn!("free convolution renormalized by {}", inv.recovered_mass);
    } else {
        log::debug!("free convolution renormalized by {}", inv.recovered_mass);
    }
    let r = sym.support_radius() + rho;
    Ok(Convolution {
        measure: inv.measure.with_support_hint(-r, r),
        recovered_mass: inv.recovered_mass,
        max_residual,
    })
}

/// `t` for which `ψ(u) = t`, on the branch `u ∈ (0, 1/x_max)` for `t > 0`
/// and `u ∈ (-inf, 0)` for `t ∈ (-1, 0)`.
fn chi<T: Real>(mu: &Measure1D<T>, t: T) -> Result<T> {
    let (lo, hi) = mu.support();
    if lo < T::zero() || mu.atom_mass_at(T::zero()) > T::zero() {
        return Err(Error::Domain("S-transform needs a measure on (0, inf) without atom at 0".into()));
    }
    if lo == T::zero() && mu.density_at(T::zero()).is_some_and(|d| d > T::zero()) {
        log::debug!("S-transform of a measure with positive density at 0");
    }
    let xtol = T::epsilon() * T::lit(4.0);
    if t > T::zero() {
        let u_max = T::one() / hi;
        let top = u_max * (T::one() - T::lit(1e-13).max(T::epsilon() * T::lit(8.0)));
        let reach = mu.psi(top);
        if !(reach >= t) {
            return Err(Error::Domain(format!(
                "t = {t} beyond the range of psi on (0, 1/x_max), which ends at {reach}"
            )));
        }
        brent(|u| mu.psi(u) - t, T::zero(), top, xtol * u_max, 300)
    } else {
        // u = -1/w: psi = -∫ x/(w + x) dmu decreases from 0 to -1 as w shrinks
        let f = |w: T| mu.psi(-w.recip()) - t;
        let w = crate::quad::root_positive_increasing(f, hi, xtol)?;
        Ok(-w.recip())
    }
}

/// `S(t) = χ(t)(1+t)/t` for `t ∈ (-1, 0) ∪ (0, 1)`.
pub(crate) fn s_transform_ext<T: Real>(mu: &Measure1D<T>, t: T) -> Result<T> {
    if !(t > -T::one() && t < T::one()) || t == T::zero() {
        return Err(Error::Domain(format!("S-transform argument {t} outside (-1, 0) ∪ (0, 1)")));
    }
    let u = chi(mu, t)?;
    Ok(u * (T::one() + t) / t)
}

/// S-transform of a measure on `(0, inf)` at `t ∈ (0, 1)`.
pub fn s_transform<T: Real>(mu: &Measure1D<T>, t: T) -> Result<T> {
    if !(t > T::zero() && t < T::one()) {
        return Err(Error::Domain(format!("S-transform argument {t} outside (0, 1)")));
    }
    s_transform_ext(mu, t)
}

/// Tabulated S-transform.
#[derive(Clone, Debug, PartialEq)]
pub struct STransformTable<T> {
    pub t_grid: Vec<T>,
    pub s_values: Vec<T>,
    /// Interval of `u` on which `ψ` was inverted.
    pub psi_domain: (T, T),
}

impl<T: Real> STransformTable<T> {
    pub fn new(mu: &Measure1D<T>, t_grid: &[T]) -> Result<Self> {
        let s_values = t_grid.iter().map(|&t| s_transform(mu, t)).collect::<Result<Vec<_>>>()?;
        let hi = mu.support().1;
        Ok(Self { t_grid: t_grid.to_vec(), s_values, psi_domain: (T::zero(), hi.recip()) })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,S\n");
        for (t, s) in self.t_grid.iter().zip(&self.s_values) {
            out.push_str(&format!("{t:.12e},{s:.12e}\n"));
        }
        out
    }
}

/// `ψ(u) = ∫ ux/(1-ux) dmu(x)`.
pub fn psi<T: Real>(mu: &Measure1D<T>, u: T) -> T {
    mu.psi(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    type M = Measure1D<f64>;
    type C = Complex<f64>;

    #[test]
    fn bernoulli_r_examples() {
        assert_eq!(bernoulli_r(1.0, C::new(0.0, 0.0)), C::new(0.0, 0.0));
        let r = bernoulli_r(1.0, C::new(0.1, 0.0));
        assert_abs_diff_eq!(r.re, 0.099_019_5, epsilon = 1e-7);
        assert_abs_diff_eq!(r.re, 0.1 - 0.001, epsilon = 1e-4);
        let r = bernoulli_r(2.0, C::new(0.0, -0.1));
        assert_abs_diff_eq!(r.re, 0.0, epsilon = 1e-15);
        assert!(r.im < 0.0);
    }

    #[test]
    fn bernoulli_r_maps_lower_half_plane_to_itself() {
        for rho in [0.3, 1.0, 2.5] {
            for re in [-3.0, -0.5, 0.0, 0.2, 4.0] {
                for im in [-3.0, -0.4, -1e-3] {
                    let r = bernoulli_r(rho, C::new(re, im));
                    assert!(r.im < 0.0, "rho={rho} w={re}{im}i -> {r}");
                }
            }
        }
    }

    #[test]
    fn sd_point_mass_gives_bernoulli_stieltjes() {
        let s = sd_solve(&M::dirac(0.0), 1.0, C::new(0.0, 2.0), 1e-12).unwrap();
        assert_abs_diff_eq!(s.g.re, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.g.im, -0.4, epsilon = 1e-14);
    }

    #[test]
    fn sd_point_mass_through_generic_solver() {
        // a tiny symmetric pair avoids the closed-form shortcut
        let th = M::atoms(&[-1e-9, 1e-9], &[0.5, 0.5]).unwrap();
        let s = sd_solve(&th, 1.0, C::new(0.0, 2.0), 1e-12).unwrap();
        assert_abs_diff_eq!(s.g.im, -0.4, epsilon = 1e-9);
    }

    #[test]
    fn sd_rho_zero_is_plain_stieltjes() {
        let th = M::quarter_circle(200).symmetrize().unwrap();
        let z = C::new(0.0, 1.0);
        let s = sd_solve(&th, 0.0, z, 1e-12).unwrap();
        assert_eq!(s.g, th.stieltjes(z).unwrap());
    }

    #[test]
    fn sd_arcsine_moment_expansion() {
        let th = M::atoms(&[-1.0, 1.0], &[0.5, 0.5]).unwrap();
        for y in [20.0, 50.0] {
            let z = C::new(0.0, y);
            let s = sd_solve(&th, 1.0, z, 1e-13).unwrap();
            let approx = z.inv() + (z * z * z).inv() * 2.0 + (z.powi(5)).inv() * 6.0;
            assert!((s.g - approx).norm() < 30.0 / y.powi(7), "y={y}");
        }
    }

    #[test]
    fn sd_arcsine_closed_form_near_axis() {
        // δ̃₁ ⊞ λ₁ is the arcsine law on [-2, 2]: G(z) = 1/sqrt(z² - 4)
        let th = M::atoms(&[-1.0, 1.0], &[0.5, 0.5]).unwrap();
        for x in [0.0, 0.7, 1.5, 1.99, 2.5] {
            let z = C::new(x, 1e-4);
            let s = sd_solve(&th, 1.0, z, 1e-12).unwrap();
            let exact = ((z - 2.0).sqrt() * (z + 2.0).sqrt()).inv();
            assert!((s.g - exact).norm() < 1e-8 * (1.0 + exact.norm()), "x={x}: {} vs {exact}", s.g);
            assert!(s.z2.im >= s.z1.im * (1.0 - 1e-6));
            assert!(s.residual < 1e-8);
            assert!(s.on_bernoulli_branch(1.0, 1e-8));
        }
    }

    #[test]
    fn g_u_satisfies_quadratic() {
        let th = M::quarter_circle(300).symmetrize().unwrap();
        for rho in [0.3, 1.0] {
            for z in [C::new(0.2, 0.5), C::new(1.3, 0.01), C::new(-0.4, 2.0)] {
                let s = sd_solve(&th, rho, z, 1e-12).unwrap();
                let gu = s.g_u(rho);
                let lhs = gu * (gu * (2.0 * rho) + 1.0) * 2.0;
                let rhs = s.g * s.g * rho;
                assert!((lhs - rhs).norm() < 1e-10, "{lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn free_convolution_of_two_bernoullis_is_arcsine() {
        let grid = crate::quad::graded_grid(-2.5, 2.5, 2e-3, &[-2.0, 2.0], 1e-5);
        let conv = free_convolve_bernoulli(&M::dirac(1.0), 1.0, &grid, 1e-4).unwrap();
        let arcsine = |x: f64| 1.0 / (std::f64::consts::PI * (4.0 - x * x).sqrt());
        let err = grid
            .iter()
            .filter(|x| x.abs() <= 1.98)
            .map(|&x| (conv.measure.density_at(x).unwrap() - arcsine(x)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-3, "sup error {err}, mass {}", conv.recovered_mass);
    }

    #[test]
    fn free_convolution_without_bernoulli_keeps_atoms() {
        let grid: Vec<f64> = (0..=4000).map(|k| -2.0 + k as f64 * 1e-3).collect();
        let conv = free_convolve_bernoulli(&M::dirac(1.0), 0.0, &grid, 1e-2).unwrap();
        let right = 1.0 - conv.measure.cdf(0.0);
        assert_abs_diff_eq!(right, 0.5, epsilon = 1e-2);
        assert_abs_diff_eq!(conv.measure.cdf(0.5), 0.5, epsilon = 1e-2);
    }

    #[test]
    fn free_convolution_is_symmetric_with_bounded_support() {
        let half: Vec<f64> = (0..=1500).map(|k| k as f64 * 2e-3).collect();
        let mut grid: Vec<f64> = half.iter().rev().map(|x| -x).collect();
        grid.extend(&half[1..]);
        let conv = free_convolve_bernoulli(&M::quarter_circle(300), 0.5, &grid, 1e-3).unwrap();
        for &x in &grid {
            assert_eq!(conv.measure.density_at(x), conv.measure.density_at(-x));
        }
        assert_abs_diff_eq!(conv.measure.mass(), 1.0, epsilon = 1e-9);
        let outside = conv.measure.cdf(-2.55) + 1.0 - conv.measure.cdf(2.55);
        assert!(outside < 2e-3, "mass outside {outside}");
        // free cumulants add: variance 1 + 0.25
        let var = conv.measure.moment(2, true).unwrap();
        assert_abs_diff_eq!(var, 1.25, epsilon = 2e-3);
    }

    #[test]
    fn s_transform_of_point_mass_is_constant() {
        let m = M::dirac(2.0);
        for t in [0.1, 0.5, 0.9, -0.3, -0.9] {
            assert_abs_diff_eq!(s_transform_ext(&m, t).unwrap(), 0.5, epsilon = 1e-10);
        }
    }

    #[test]
    fn s_transform_errors() {
        let m = M::dirac(2.0);
        assert!(s_transform(&m, 0.0).is_err());
        assert!(s_transform(&m, 1.0).is_err());
        assert!(s_transform(&m, -0.5).is_err());
        let with_zero = M::atoms(&[0.0, 1.0], &[0.5, 0.5]).unwrap();
        assert!(s_transform(&with_zero, 0.5).is_err());
    }

    #[test]
    fn s_transform_two_atoms_is_bounded() {
        let m = M::atoms(&[1.0, 4.0], &[0.5, 0.5]).unwrap();
        let s = s_transform(&m, 0.5).unwrap();
        assert!(s > 0.25 && s < 1.0);
        // closed form: ψ = t solves a quadratic in u
        // 0.5 u/(1-u) + 0.5·4u/(1-4u) = 1/2  ⇒  8u² - 10u + 1 = 0... evaluate directly
        let u = s * 0.5 / 1.5;
        let psi = 0.5 * u / (1.0 - u) + 0.5 * 4.0 * u / (1.0 - 4.0 * u);
        assert_abs_diff_eq!(psi, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn s_transform_of_marchenko_pastur() {
        let mp = M::quarter_circle(4000).pushforward_square().unwrap();
        // oracle: ψ from the Catalan moment series at small u
        let u: f64 = 0.01;
        let catalan = [1.0, 2.0, 5.0, 14.0, 42.0, 132.0, 429.0];
        let series: f64 = catalan.iter().enumerate().map(|(k, c)| c * u.powi(k as i32 + 1)).sum();
        assert_abs_diff_eq!(psi(&mp, u), series, epsilon = 1e-6);
        for t in [0.1, 0.3, 0.5, 0.8] {
            let s = s_transform(&mp, t).unwrap();
            assert_abs_diff_eq!(s, 1.0 / (1.0 + t), epsilon = 2e-3);
        }
        for t in [-0.9, -0.5, -0.1] {
            let s = s_transform_ext(&mp, t).unwrap();
            assert_abs_diff_eq!(s * (1.0 + t), 1.0, epsilon = 1e-3);
        }
    }

    #[test]
    fn s_table_inverts_psi() {
        let m = M::uniform(1.0, 3.0).unwrap();
        let ts = [0.1, 0.25, 0.5, 0.75, 0.9];
        let table = STransformTable::new(&m, &ts).unwrap();
        for (t, s) in table.t_grid.iter().zip(&table.s_values) {
            let u = s * t / (1.0 + t);
            assert_abs_diff_eq!(psi(&m, u), *t, epsilon = 1e-10);
            assert!(*s > 1.0 / 3.0 && *s < 1.0);
        }
        assert!(table.to_csv().starts_with("t,S\n1.0"));
    }

    #[test]
    fn diag_bounds_examples() {
        let th = M::quarter_circle(400).symmetrize().unwrap();
        // sup of the symmetrized density is 1/π, so |Im G| ≤ 1 everywhere on the solution path
        let s = sd_solve(&th, 0.5, C::new(0.3, 0.05), 1e-12).unwrap();
        assert!(diag_bounds_check(&s, 1.0));
        let mut bad = s;
        bad.g = C::new(0.0, -10.0);
        assert!(!diag_bounds_check(&bad, 1.0));
        let lam = M::atoms(&[-1.0, 1.0], &[0.5, 0.5]).unwrap();
        let s = sd_solve(&lam, 0.0, C::new(1.0, 1e-3), 1e-12).unwrap();
        assert!(!diag_bounds_check(&s, 1.0));
    }
}

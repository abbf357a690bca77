//! One-dimensional probability measures and the transforms and distances
//! built on them.
//!
//! A [`Measure1D`] is either a finite set of weighted atoms, a piecewise-linear
//! density on a strictly increasing grid (zero outside the grid range), or an
//! empirical sample. All integrals against grid densities are computed cell by
//! cell in closed form where a closed form exists, so atoms and grid densities
//! are handled exactly up to rounding.

use std::cmp::Ordering;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{gauss_legendre6, trapezoid};
use crate::real::Real;

/// Storage form of a measure. Serialized with a `"type"` tag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Representation<T> {
    Atoms { locations: Vec<T>, weights: Vec<T> },
    Grid { grid: Vec<T>, values: Vec<T> },
    Empirical { samples: Vec<T> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct MeasureFile<T> {
    #[serde(flatten)]
    repr: Representation<T>,
    #[serde(default)]
    support_hint: Option<[T; 2]>,
}

/// A probability measure on the real line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "MeasureFile<T>",
    into = "MeasureFile<T>",
    bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>")
)]
pub struct Measure1D<T> {
    repr: Representation<T>,
    support_hint: [T; 2],
    /// Cumulative mass at each atom (atoms) or grid node (grid).
    cumulative: Vec<T>,
}

impl<T: Real> TryFrom<MeasureFile<T>> for Measure1D<T> {
    type Error = Error;
    fn try_from(file: MeasureFile<T>) -> Result<Self> {
        let m = match file.repr {
            Representation::Atoms { locations, weights } => Self::atoms(&locations, &weights)?,
            Representation::Grid { grid, values } => Self::grid(grid, values)?,
            Representation::Empirical { samples } => Self::empirical(samples)?,
        };
        Ok(match file.support_hint {
            Some([lo, hi]) => m.with_support_hint(lo, hi),
            None => m,
        })
    }
}

impl<T: Real> From<Measure1D<T>> for MeasureFile<T> {
    fn from(m: Measure1D<T>) -> Self {
        MeasureFile {
            support_hint: Some(m.support_hint),
            repr: m.repr,
        }
    }
}

fn mass_tol<T: Real>() -> T {
    T::lit(1e-9).max(T::epsilon() * T::lit(1e3))
}

fn cmp<T: Real>(a: &T, b: &T) -> Ordering {
    a.partial_cmp(b).unwrap_or(Ordering::Equal)
}

/// Linear density on one grid cell.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Cell<T> {
    pub x0: T,
    pub x1: T,
    pub p0: T,
    pub p1: T,
}

impl<T: Real> Cell<T> {
    #[inline]
    pub(crate) fn width(&self) -> T {
        self.x1 - self.x0
    }
    #[inline]
    fn slope(&self) -> T {
        (self.p1 - self.p0) / self.width()
    }
    #[inline]
    pub(crate) fn at(&self, x: T) -> T {
        self.p0 + self.slope() * (x - self.x0)
    }
    #[inline]
    pub(crate) fn mass(&self) -> T {
        (self.p0 + self.p1) * self.width() / T::lit(2.0)
    }
    fn split(&self, x: T) -> (Cell<T>, Cell<T>) {
        let px = self.at(x);
        (
            Cell { x0: self.x0, x1: x, p0: self.p0, p1: px },
            Cell { x0: x, x1: self.x1, p0: px, p1: self.p1 },
        )
    }

    /// `∫ p(x) / (z - x) dx` over the cell.
    fn cauchy(&self, z: Complex<T>) -> Complex<T> {
        let h = self.width();
        let mid = (self.x0 + self.x1) / T::lit(2.0);
        if (z - mid).norm() > T::lit(8.0) * h {
            return gauss_legendre6(self.x0, self.x1, Complex::new(T::zero(), T::zero()), |x| {
                (z - x).inv() * self.at(x)
            });
        }
        let s = self.slope();
        let pz = (z - self.x0) * s + self.p0;
        let log_ratio = ((z - self.x0) / (z - self.x1)).ln();
        pz * log_ratio - s * h
    }

    /// `∫ p(x) / (z - x)^2 dx` over the cell.
    fn cauchy_sq(&self, z: Complex<T>) -> Complex<T> {
        let h = self.width();
        let mid = (self.x0 + self.x1) / T::lit(2.0);
        if (z - mid).norm() > T::lit(8.0) * h {
            return gauss_legendre6(self.x0, self.x1, Complex::new(T::zero(), T::zero()), |x| {
                let d = z - x;
                (d * d).inv() * self.at(x)
            });
        }
        let s = self.slope();
        let pz = (z - self.x0) * s + self.p0;
        let log_ratio = ((z - self.x0) / (z - self.x1)).ln();
        pz * ((z - self.x1).inv() - (z - self.x0).inv()) - log_ratio * s
    }

    /// Whether the poles `±iy` are far enough for Gauss–Legendre on this cell.
    pub(crate) fn far_from_axis_point(&self, y: T) -> bool {
        let dist0 = if self.x0 <= T::zero() && self.x1 >= T::zero() {
            T::zero()
        } else {
            self.x0.abs().min(self.x1.abs())
        };
        (y * y + dist0 * dist0).sqrt() > T::lit(8.0) * self.width()
    }

    pub(crate) fn integrate<F: Fn(T) -> T>(&self, f: F) -> T {
        gauss_legendre6(self.x0, self.x1, T::zero(), |x| self.at(x) * f(x))
    }

    /// `∫ p(x) y / (y^2 + x^2) dx` over the cell, `y > 0`.
    pub(crate) fn poisson(&self, y: T) -> T {
        let h = self.width();
        let dist0 = if self.x0 <= T::zero() && self.x1 >= T::zero() {
            T::zero()
        } else {
            self.x0.abs().min(self.x1.abs())
        };
        if (y * y + dist0 * dist0).sqrt() > T::lit(8.0) * h {
            return gauss_legendre6(self.x0, self.x1, T::zero(), |x| self.at(x) * y / (y * y + x * x));
        }
        let m = (self.x0 + self.x1) / T::lit(2.0);
        let pm = self.at(m);
        let s = self.slope();
        let atan_part = (h * y).atan2(y * y + self.x0 * self.x1);
        let log_part = (h * (self.x1 + self.x0) / (y * y + self.x0 * self.x0)).ln_1p() / T::lit(2.0);
        pm * atan_part + s * (y * log_part - m * atan_part)
    }

    /// `d/dy ∫ p(x) y / (y^2 + x^2) dx`, `y > 0`.
    pub(crate) fn poisson_derivative(&self, y: T) -> T {
        let h = self.width();
        let dist0 = if self.x0 <= T::zero() && self.x1 >= T::zero() {
            T::zero()
        } else {
            self.x0.abs().min(self.x1.abs())
        };
        let y2 = y * y;
        if (y2 + dist0 * dist0).sqrt() > T::lit(8.0) * h {
            return gauss_legendre6(self.x0, self.x1, T::zero(), |x| {
                let d = y2 + x * x;
                self.at(x) * (x * x - y2) / (d * d)
            });
        }
        let m = (self.x0 + self.x1) / T::lit(2.0);
        let pm = self.at(m);
        let s = self.slope();
        let d0 = y2 + self.x0 * self.x0;
        let d1 = y2 + self.x1 * self.x1;
        let log_part = (h * (self.x1 + self.x0) / d0).ln_1p() / T::lit(2.0);
        let d_atan = self.x0 / d0 - self.x1 / d1;
        let d_log = y / d1 - y / d0;
        pm * d_atan + s * (log_part + y * d_log - m * d_atan)
    }

    /// `∫ p(x) log|x| dx` over a cell that does not straddle 0.
    fn log_moment(&self) -> T {
        fn a0<T: Real>(x: T) -> T {
            if x == T::zero() {
                T::zero()
            } else {
                x * x.abs().ln() - x
            }
        }
        fn a1<T: Real>(x: T) -> T {
            if x == T::zero() {
                T::zero()
            } else {
                x * x / T::lit(2.0) * x.abs().ln() - x * x / T::lit(4.0)
            }
        }
        let m = (self.x0 + self.x1) / T::lit(2.0);
        let i0 = a0(self.x1) - a0(self.x0);
        let i1 = a1(self.x1) - a1(self.x0);
        self.at(m) * i0 + self.slope() * (i1 - m * i0)
    }

    /// `∫ p(x) x^k dx` on a cell inside `(0, inf)`.
    fn power_moment(&self, k: i32) -> T {
        let s = self.slope();
        let alpha = self.p0 - s * self.x0;
        let prim = |j: i32| -> T {
            if j == -1 {
                (self.x1 / self.x0).ln()
            } else {
                let e = j + 1;
                (self.x1.powi(e) - self.x0.powi(e)) / T::from_i32(e).unwrap()
            }
        };
        alpha * prim(k) + s * prim(k + 1)
    }
}

impl<T: Real> Measure1D<T> {
    // ---------------------------------------------------------------- build

    /// Point mass at `x`.
    pub fn dirac(x: T) -> Self {
        Self::atoms(&[x], &[T::one()]).expect("single unit atom is valid")
    }

    /// Weighted atoms. Coincident locations are merged; weights must be
    /// nonnegative and sum to one.
    pub fn atoms(locations: &[T], weights: &[T]) -> Result<Self> {
        if locations.len() != weights.len() || locations.is_empty() {
            return Err(Error::InvalidMeasure(format!(
                "atoms need matching non-empty arrays, got {} locations and {} weights",
                locations.len(),
                weights.len()
            )));
        }
        if locations.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidMeasure("atom locations must be finite".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < T::zero()) {
            return Err(Error::InvalidMeasure("atom weights must be finite and nonnegative".into()));
        }
        let total: T = weights.iter().copied().sum();
        if (total - T::one()).abs() > mass_tol() {
            return Err(Error::InvalidMeasure(format!("atom weights sum to {total}, not 1")));
        }
        let mut pairs: Vec<(T, T)> = locations.iter().copied().zip(weights.iter().copied()).collect();
        pairs.sort_by(|a, b| cmp(&a.0, &b.0));
        let mut locs: Vec<T> = Vec::with_capacity(pairs.len());
        let mut ws: Vec<T> = Vec::with_capacity(pairs.len());
        for (x, w) in pairs {
            match locs.last() {
                Some(last) if *last == x => {
                    *ws.last_mut().unwrap() = *ws.last().unwrap() + w;
                }
                _ => {
                    locs.push(x);
                    ws.push(w);
                }
            }
        }
        let mut acc = T::zero();
        let cumulative = ws
            .iter()
            .map(|w| {
                acc = acc + *w;
                acc
            })
            .collect();
        let hint = [locs[0], *locs.last().unwrap()];
        Ok(Self {
            repr: Representation::Atoms { locations: locs, weights: ws },
            support_hint: hint,
            cumulative,
        })
    }

    /// Atoms with weights rescaled to total mass one.
    pub fn atoms_normalized(locations: &[T], weights: &[T]) -> Result<Self> {
        let total: T = weights.iter().copied().sum();
        if !(total > T::zero()) {
            return Err(Error::InvalidMeasure("atom weights have no mass".into()));
        }
        let w: Vec<T> = weights.iter().map(|w| *w / total).collect();
        Self::atoms(locations, &w)
    }

    /// Piecewise-linear density on a strictly increasing grid, zero outside
    /// `[grid[0], grid[last]]`. The trapezoid mass must be one.
    pub fn grid(grid: Vec<T>, values: Vec<T>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(Error::InvalidMeasure(format!(
                "grid density needs >= 2 nodes and matching values ({} vs {})",
                grid.len(),
                values.len()
            )));
        }
        if grid.iter().any(|x| !x.is_finite()) || grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidMeasure("grid must be finite and strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::InvalidMeasure("grid density must be finite and nonnegative".into()));
        }
        let mut acc = T::zero();
        let mut cumulative = Vec::with_capacity(grid.len());
        cumulative.push(T::zero());
        for k in 0..grid.len() - 1 {
            acc = acc + (values[k] + values[k + 1]) * (grid[k + 1] - grid[k]) / T::lit(2.0);
            cumulative.push(acc);
        }
        if (acc - T::one()).abs() > mass_tol() {
            return Err(Error::InvalidMeasure(format!("grid density has mass {acc}, not 1")));
        }
        let hint = [grid[0], *grid.last().unwrap()];
        Ok(Self {
            repr: Representation::Grid { grid, values },
            support_hint: hint,
            cumulative,
        })
    }

    /// Grid density rescaled to unit trapezoid mass.
    pub fn grid_normalized(grid: Vec<T>, values: Vec<T>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::InvalidMeasure("grid and values differ in length".into()));
        }
        let mass = trapezoid(&grid, &values);
        if !(mass > T::zero()) || !mass.is_finite() {
            return Err(Error::InvalidMeasure(format!("grid density has mass {mass}")));
        }
        let values = values.into_iter().map(|v| v / mass).collect();
        Self::grid(grid, values)
    }

    /// Samples the density `f` on `grid` and normalizes.
    pub fn from_density<F: Fn(T) -> T>(grid: Vec<T>, f: F) -> Result<Self> {
        let values = grid.iter().map(|&x| f(x).max(T::zero())).collect();
        Self::grid_normalized(grid, values)
    }

    /// Uniform sample measure.
    pub fn empirical(mut samples: Vec<T>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidMeasure("empirical measure needs samples".into()));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidMeasure("empirical samples must be finite".into()));
        }
        samples.sort_by(cmp);
        let hint = [samples[0], *samples.last().unwrap()];
        Ok(Self {
            repr: Representation::Empirical { samples },
            support_hint: hint,
            cumulative: Vec::new(),
        })
    }

    /// Uniform law on `[a, b]`.
    pub fn uniform(a: T, b: T) -> Result<Self> {
        if !(b > a) {
            return Err(Error::InvalidMeasure("uniform law needs a < b".into()));
        }
        let v = T::one() / (b - a);
        Self::grid(vec![a, b], vec![v, v])
    }

    /// Quarter-circle law `sqrt(4 - x^2) / pi` on `[0, 2]`, on `cells` cells
    /// clustered towards the square-root edge at 2.
    pub fn quarter_circle(cells: usize) -> Self {
        let n = T::from_usize(cells.max(2)).unwrap();
        let grid: Vec<T> = (0..=cells.max(2))
            .map(|k| T::lit(2.0) * (T::FRAC_PI_2() * T::from_usize(k).unwrap() / n).sin())
            .collect();
        Self::from_density(grid, |x| (T::lit(4.0) - x * x).max(T::zero()).sqrt() / T::PI())
            .expect("quarter circle density is valid")
    }

    /// Semicircle law of the given radius, `2 sqrt(R^2 - x^2) / (pi R^2)`.
    pub fn semicircle(radius: T, cells: usize) -> Self {
        let n = T::from_usize(cells.max(2)).unwrap();
        let grid: Vec<T> = (0..=cells.max(2))
            .map(|k| -radius * (T::PI() * T::from_usize(k).unwrap() / n).cos())
            .collect();
        Self::from_density(grid, |x| {
            T::lit(2.0) * (radius * radius - x * x).max(T::zero()).sqrt() / (T::PI() * radius * radius)
        })
        .expect("semicircle density is valid")
    }

    /// Replaces the declared support interval.
    pub fn with_support_hint(mut self, lo: T, hi: T) -> Self {
        self.support_hint = [lo.min(hi), hi.max(lo)];
        self
    }

    // ------------------------------------------------------------- inspect

    pub fn representation(&self) -> &Representation<T> {
        &self.repr
    }

    pub fn support_hint(&self) -> (T, T) {
        (self.support_hint[0], self.support_hint[1])
    }

    pub fn is_atomic(&self) -> bool {
        !matches!(self.repr, Representation::Grid { .. })
    }

    /// `∫ f dμ`; grid cells use six-point Gauss–Legendre.
    pub fn integrate<F: Fn(T) -> T>(&self, f: F) -> T {
        if self.is_atomic() {
            return self.points().into_iter().map(|(x, w)| w * f(x)).sum();
        }
        self.cells().iter().map(|c| c.integrate(&f)).sum()
    }

    /// Logarithmic energy `∫∫ log|x - y| dμ(x) dμ(y)`; `-inf` for atoms.
    pub fn log_energy(&self) -> T {
        if self.is_atomic() {
            return T::neg_infinity();
        }
        let cells = self.cells();
        cells
            .iter()
            .map(|outer| {
                outer.integrate(|x| {
                    cells
                        .iter()
                        .map(|c| Cell { x0: c.x0 - x, x1: c.x1 - x, p0: c.p0, p1: c.p1 }.log_moment())
                        .sum()
                })
            })
            .sum()
    }

    /// Smallest closed interval containing the support.
    pub fn support(&self) -> (T, T) {
        match &self.repr {
            Representation::Atoms { locations, weights } => {
                let first = weights.iter().position(|w| *w > T::zero()).unwrap_or(0);
                let last = weights.iter().rposition(|w| *w > T::zero()).unwrap_or(0);
                (locations[first], locations[last])
            }
            Representation::Grid { grid, .. } => (grid[0], *grid.last().unwrap()),
            Representation::Empirical { samples } => (samples[0], *samples.last().unwrap()),
        }
    }

    /// `max |x|` over the support.
    pub fn support_radius(&self) -> T {
        let (lo, hi) = self.support();
        lo.abs().max(hi.abs())
    }

    /// Total mass (one up to construction tolerance).
    pub fn mass(&self) -> T {
        match &self.repr {
            Representation::Empirical { .. } => T::one(),
            _ => *self.cumulative.last().unwrap(),
        }
    }

    /// Weighted points of an atomic or empirical measure.
    pub(crate) fn points(&self) -> Vec<(T, T)> {
        match &self.repr {
            Representation::Atoms { locations, weights } => {
                locations.iter().copied().zip(weights.iter().copied()).collect()
            }
            Representation::Empirical { samples } => {
                let w = T::one() / T::from_usize(samples.len()).unwrap();
                samples.iter().map(|x| (*x, w)).collect()
            }
            Representation::Grid { .. } => Vec::new(),
        }
    }

    pub(crate) fn cells(&self) -> Vec<Cell<T>> {
        match &self.repr {
            Representation::Grid { grid, values } => (0..grid.len() - 1)
                .map(|k| Cell {
                    x0: grid[k],
                    x1: grid[k + 1],
                    p0: values[k],
                    p1: values[k + 1],
                })
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Density value of a grid measure at `x` (zero off the grid; `None` for atomic measures).
    pub fn density_at(&self, x: T) -> Option<T> {
        match &self.repr {
            Representation::Grid { grid, values } => {
                if x < grid[0] || x > *grid.last().unwrap() {
                    return Some(T::zero());
                }
                let k = grid.partition_point(|g| *g <= x).min(grid.len() - 1).max(1) - 1;
                let c = Cell { x0: grid[k], x1: grid[k + 1], p0: values[k], p1: values[k + 1] };
                Some(c.at(x))
            }
            _ => None,
        }
    }

    /// Mass of the atom at exactly `x` (zero for grid densities).
    pub fn atom_mass_at(&self, x: T) -> T {
        self.points()
            .iter()
            .filter(|(l, _)| *l == x)
            .map(|(_, w)| *w)
            .sum()
    }

    /// `mu((-inf, x])`.
    pub fn cdf(&self, x: T) -> T {
        self.cdf_impl(x, true)
    }

    /// `mu((-inf, x))`.
    pub fn cdf_left(&self, x: T) -> T {
        self.cdf_impl(x, false)
    }

    fn cdf_impl(&self, x: T, inclusive: bool) -> T {
        match &self.repr {
            Representation::Atoms { locations, .. } => {
                let idx = if inclusive {
                    locations.partition_point(|l| *l <= x)
                } else {
                    locations.partition_point(|l| *l < x)
                };
                if idx == 0 {
                    T::zero()
                } else {
                    self.cumulative[idx - 1]
                }
            }
            Representation::Empirical { samples } => {
                let idx = if inclusive {
                    samples.partition_point(|l| *l <= x)
                } else {
                    samples.partition_point(|l| *l < x)
                };
                T::from_usize(idx).unwrap() / T::from_usize(samples.len()).unwrap()
            }
            Representation::Grid { grid, values } => {
                if x <= grid[0] {
                    return T::zero();
                }
                if x >= *grid.last().unwrap() {
                    return *self.cumulative.last().unwrap();
                }
                let k = grid.partition_point(|g| *g <= x) - 1;
                let c = Cell { x0: grid[k], x1: grid[k + 1], p0: values[k], p1: values[k + 1] };
                let d = x - c.x0;
                self.cumulative[k] + c.p0 * d + c.slope() * d * d / T::lit(2.0)
            }
        }
    }

    /// Generalized inverse CDF `inf { s : mu((-inf, s]) >= p }`, `p in (0, 1]`.
    pub fn quantile(&self, p: T) -> Result<T> {
        if !(p > T::zero() && p <= T::one()) {
            return Err(Error::Domain(format!("quantile level {p} outside (0, 1]")));
        }
        let slack = T::epsilon() * T::lit(64.0);
        let target = p - slack;
        Ok(match &self.repr {
            Representation::Atoms { locations, .. } => {
                let idx = self.cumulative.partition_point(|c| *c < target);
                locations[idx.min(locations.len() - 1)]
            }
            Representation::Empirical { samples } => {
                let n = T::from_usize(samples.len()).unwrap();
                let k = (p * n - slack * n).ceil().to_usize().unwrap_or(1).max(1);
                samples[k.min(samples.len()) - 1]
            }
            Representation::Grid { grid, values } => {
                let p = p * self.mass();
                let idx = self.cumulative.partition_point(|c| *c < p - slack);
                if idx == 0 {
                    return Ok(grid[0]);
                }
                let idx = idx.min(grid.len() - 1);
                let c = Cell {
                    x0: grid[idx - 1],
                    x1: grid[idx],
                    p0: values[idx - 1],
                    p1: values[idx],
                };
                let rest = (p - self.cumulative[idx - 1]).max(T::zero());
                let s = c.slope();
                let disc = (c.p0 * c.p0 + T::lit(2.0) * s * rest).max(T::zero());
                let denom = c.p0 + disc.sqrt();
                let d = if denom > T::zero() { T::lit(2.0) * rest / denom } else { T::zero() };
                (c.x0 + d).min(c.x1)
            }
        })
    }

    /// `∫ x^k dmu` (`signed`) or `∫ |x|^k dmu`. Negative `k` returns `+inf`
    /// when the measure charges a neighbourhood of 0 strongly enough for the
    /// integral to diverge (an atom at 0, or a grid density that does not vanish
    /// to second order at a node at 0).
    pub fn moment(&self, k: i32, signed: bool) -> Result<T> {
        let (lo, _) = self.support();
        if k < 0 && signed && lo < T::zero() {
            return Err(Error::Domain(format!(
                "signed moment of order {k} needs support in (0, inf), support starts at {lo}"
            )));
        }
        let pow = |x: T| -> T {
            if signed {
                x.powi(k)
            } else {
                x.abs().powi(k)
            }
        };
        if self.is_atomic() {
            let mut acc = T::zero();
            for (x, w) in self.points() {
                if w == T::zero() {
                    continue;
                }
                if k < 0 && x == T::zero() {
                    return Ok(T::infinity());
                }
                acc = acc + w * pow(x);
            }
            return Ok(acc);
        }
        let mut acc = T::zero();
        let tiny = T::lit(1e-12);
        for cell in self.cells() {
            // fold |x| onto the positive axis cell by cell
            let pieces: Vec<Cell<T>> = if cell.x0 < T::zero() && cell.x1 > T::zero() {
                let (l, r) = cell.split(T::zero());
                vec![l, r]
            } else {
                vec![cell]
            };
            for c in pieces {
                let neg = c.x1 <= T::zero();
                let c = if neg {
                    Cell { x0: -c.x1, x1: -c.x0, p0: c.p1, p1: c.p0 }
                } else {
                    c
                };
                let sign = if neg && signed && k % 2 != 0 { -T::one() } else { T::one() };
                if k >= 0 {
                    acc = acc + sign * gauss_legendre6(c.x0, c.x1, T::zero(), |x| c.at(x) * x.powi(k));
                } else if c.x0 == T::zero() {
                    if c.p0 > tiny || (k <= -2 && c.p1 > tiny) {
                        return Ok(T::infinity());
                    }
                    // density identically zero on this cell
                } else {
                    acc = acc + sign * c.power_moment(k);
                }
            }
        }
        Ok(acc)
    }

    /// Whether the measure is even (invariant under `x -> -x`).
    pub fn is_symmetric(&self) -> bool {
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(64.0));
        match &self.repr {
            Representation::Atoms { locations, weights } => {
                let n = locations.len();
                (0..n).all(|i| {
                    let j = n - 1 - i;
                    (locations[i] + locations[j]).abs() <= tol * (T::one() + locations[i].abs())
                        && (weights[i] - weights[j]).abs() <= tol
                })
            }
            Representation::Empirical { samples } => {
                let n = samples.len();
                (0..n).all(|i| (samples[i] + samples[n - 1 - i]).abs() <= tol * (T::one() + samples[i].abs()))
            }
            Representation::Grid { grid, values } => {
                let n = grid.len();
                (0..n).all(|i| {
                    let j = n - 1 - i;
                    (grid[i] + grid[j]).abs() <= tol * (T::one() + grid[i].abs())
                        && (values[i] - values[j]).abs() <= tol * (T::one() + values[i])
                })
            }
        }
    }

    // ---------------------------------------------------------- transforms

    /// Symmetrized version of a measure on `[0, inf)`: half of the mass of
    /// every set is mirrored to the negative axis. Already-symmetric measures
    /// are returned unchanged.
    pub fn symmetrize(&self) -> Result<Self> {
        if self.is_symmetric() {
            return Ok(self.clone());
        }
        let (lo, _) = self.support();
        if lo < T::zero() {
            return Err(Error::Domain(format!(
                "symmetrize needs support in [0, inf), support starts at {lo}"
            )));
        }
        let half = T::lit(0.5);
        let out = match &self.repr {
            Representation::Atoms { locations, weights } => {
                let mut locs = Vec::with_capacity(2 * locations.len());
                let mut ws = Vec::with_capacity(2 * locations.len());
                for (x, w) in locations.iter().zip(weights) {
                    locs.push(*x);
                    ws.push(*w * half);
                    locs.push(-*x);
                    ws.push(*w * half);
                }
                Self::atoms(&locs, &ws)?
            }
            Representation::Empirical { samples } => {
                let mut s: Vec<T> = samples.iter().map(|x| -*x).collect();
                s.extend(samples.iter().copied());
                Self::empirical(s)?
            }
            Representation::Grid { grid, values } => {
                let mut g: Vec<T> = grid.iter().rev().map(|x| -*x).collect();
                let mut v: Vec<T> = values.iter().rev().map(|p| *p * half).collect();
                if grid[0] == T::zero() {
                    g.pop();
                    v.pop();
                } else {
                    // zero density on the gap (-grid[0], grid[0])
                    let eps = grid[0] * T::lit(1e-9);
                    g.push(-grid[0] + eps);
                    v.push(T::zero());
                    g.push(grid[0] - eps);
                    v.push(T::zero());
                }
                g.extend(grid.iter().copied());
                v.extend(values.iter().map(|p| *p * half));
                Self::grid_normalized(g, v)?
            }
        };
        let r = self.support_hint.iter().fold(T::zero(), |m, x| m.max(x.abs()));
        Ok(out.with_support_hint(-r, r))
    }

    /// Law of `X^2` for `X ~ mu` supported on `[0, inf)`.
    pub fn pushforward_square(&self) -> Result<Self> {
        let (lo, _) = self.support();
        if lo < T::zero() {
            return Err(Error::Domain(format!(
                "square push-forward needs support in [0, inf), support starts at {lo}"
            )));
        }
        let hint = [self.support_hint[0].max(T::zero()).powi(2), self.support_hint[1].powi(2)];
        let out = match &self.repr {
            Representation::Atoms { .. } | Representation::Empirical { .. } => {
                let (l, w): (Vec<T>, Vec<T>) = self.points().into_iter().map(|(x, w)| (x * x, w)).unzip();
                match &self.repr {
                    Representation::Empirical { .. } => Self::empirical(l)?,
                    _ => Self::atoms(&l, &w)?,
                }
            }
            Representation::Grid { grid, values } => {
                let (grid, values) = if grid[0] == T::zero() && values[0] > T::zero() {
                    graded_near_zero(grid, values)
                } else {
                    (grid.clone(), values.clone())
                };
                let (grid, values) = refined_relative(&grid, &values);
                let y: Vec<T> = grid.iter().map(|x| *x * *x).collect();
                let mut q: Vec<T> = grid
                    .iter()
                    .zip(&values)
                    .map(|(x, p)| if *x > T::zero() { *p / (T::lit(2.0) * *x) } else { T::zero() })
                    .collect();
                if grid[0] == T::zero() {
                    let x1 = grid[1];
                    if values[0] > T::zero() {
                        // density blows up like y^{-1/2}; keep the first cell's mass
                        q[0] = (values[0] + values[1] / T::lit(2.0)) / x1;
                    } else {
                        q[0] = values[1] / (T::lit(2.0) * x1);
                    }
                }
                Self::grid_normalized(y, q)?
            }
        };
        Ok(out.with_support_hint(hint[0], hint[1]))
    }

    /// Law of `c X` for `c > 0`.
    pub fn scaled(&self, c: T) -> Result<Self> {
        if !(c > T::zero()) {
            return Err(Error::Domain("scale factor must be positive".into()));
        }
        let out = match &self.repr {
            Representation::Atoms { locations, weights } => {
                let l: Vec<T> = locations.iter().map(|x| *x * c).collect();
                Self::atoms(&l, weights)?
            }
            Representation::Empirical { samples } => Self::empirical(samples.iter().map(|x| *x * c).collect())?,
            Representation::Grid { grid, values } => Self::grid_normalized(
                grid.iter().map(|x| *x * c).collect(),
                values.iter().map(|p| *p / c).collect(),
            )?,
        };
        Ok(out.with_support_hint(self.support_hint[0] * c, self.support_hint[1] * c))
    }

    /// Law of `|w - X|` for `X ~ mu`.
    pub fn pushforward_abs_shift(&self, w: Complex<T>) -> Self {
        let b = w.im.abs();
        let c = w.re;
        let modulus = |x: T| (x - c).hypot(b);
        if self.is_atomic() {
            let (l, ws): (Vec<T>, Vec<T>) = self.points().into_iter().map(|(x, p)| (modulus(x), p)).unzip();
            return match &self.repr {
                Representation::Empirical { .. } => Self::empirical(l),
                _ => Self::atoms(&l, &ws),
            }
            .expect("push-forward of a valid atomic measure");
        }
        // fold around c: density in u = |x - c| is p(c + u) + p(c - u)
        let Representation::Grid { grid, .. } = &self.repr else { unreachable!() };
        let (g0, g1) = (grid[0], *grid.last().unwrap());
        let p = |x: T| -> T { self.density_at(x).unwrap_or(T::zero()) };
        let mut knots: Vec<T> = grid.iter().map(|x| (*x - c).abs()).collect();
        if c > g0 && c < g1 {
            knots.push(T::zero());
        }
        knots.sort_by(cmp);
        knots.dedup();
        let eps = (g1 - g0) * T::lit(1e-9);
        let jump_knots = [(g0 - c).abs(), (g1 - c).abs()];
        let mut u_nodes: Vec<T> = Vec::new();
        let mut u_vals: Vec<T> = Vec::new();
        let folded = |u: T, side: T| -> T {
            // one-sided limit: side = -1 from the left, +1 from the right
            let uu = u + side * eps * T::lit(0.5);
            if uu < T::zero() {
                return p(c) * T::lit(2.0);
            }
            let inside = |x: T| if x >= g0 && x <= g1 { p(x) } else { T::zero() };
            inside(c + uu) + if uu > T::zero() { inside(c - uu) } else { T::zero() }
        };
        for (i, &u) in knots.iter().enumerate() {
            let left = folded(u, -T::one());
            let right = folded(u, T::one());
            let is_jump = jump_knots.iter().any(|j| (*j - u).abs() <= eps) && (left - right).abs() > T::zero();
            if is_jump && i > 0 {
                u_nodes.push(u - eps);
                u_vals.push(left);
                u_nodes.push(u);
                u_vals.push(right);
            } else {
                u_nodes.push(u);
                u_vals.push(if i == 0 { right } else if i + 1 == knots.len() { left } else { (left + right) / T::lit(2.0) });
            }
        }
        let last = *u_vals.last().unwrap();
        if last > T::zero() {
            let u = *u_nodes.last().unwrap();
            *u_vals.last_mut().unwrap() = last;
            u_nodes.push(u + eps);
            u_vals.push(T::zero());
        }
        if b == T::zero() {
            return Self::grid_normalized(u_nodes, u_vals)
                .expect("folded density is valid")
                .with_support_hint(T::zero(), self.support_radius() + w.norm());
        }
        // s = sqrt(u^2 + b^2): density q(u) s / u, refined inside cells
        let mut s_nodes = Vec::new();
        let mut s_vals = Vec::new();
        let sub = 32;
        let nsub = T::from_usize(sub).unwrap();
        let mut u_after_edge = T::zero();
        let value = |u: T, v: T| if u > T::zero() { v * u.hypot(b) / u } else { T::zero() };
        for k in 0..u_nodes.len() - 1 {
            let (ua, ub, va, vb) = (u_nodes[k], u_nodes[k + 1], u_vals[k], u_vals[k + 1]);
            let ts: Vec<T> = if ua == T::zero() {
                // geometric grading towards the s = |Im w| edge
                let ratio = T::lit(1.1);
                let mut t = vec![T::one()];
                while *t.last().unwrap() > T::lit(1e-7) {
                    let next = *t.last().unwrap() / ratio;
                    t.push(next);
                }
                t.push(T::zero());
                t.reverse();
                t.pop();
                t
            } else {
                (0..sub).map(|j| T::from_usize(j).unwrap() / nsub).collect()
            };
            if ua == T::zero() {
                u_after_edge = (ub - ua) * ts[1];
            }
            for t in ts {
                let u = ua + (ub - ua) * t;
                let v = va + (vb - va) * t;
                s_nodes.push(u.hypot(b));
                s_vals.push(value(u, v));
            }
        }
        let u_last = *u_nodes.last().unwrap();
        s_nodes.push(u_last.hypot(b));
        s_vals.push(value(u_last, *u_vals.last().unwrap()));
        if u_nodes[0] == T::zero() && u_vals[0] > T::zero() {
            // integrable s / sqrt(s^2 - b^2) singularity at s = b: keep the first cell's mass
            let u1 = u_after_edge;
            let t1 = u1 / u_nodes[1];
            let v1 = u_vals[0] + (u_vals[1] - u_vals[0]) * t1;
            let mass = (u_vals[0] + v1) * u1 / T::lit(2.0);
            let ds = s_nodes[1] - s_nodes[0];
            s_vals[0] = (T::lit(2.0) * mass / ds - s_vals[1]).max(T::zero());
        }
        Self::grid_normalized(s_nodes, s_vals)
            .expect("pushed density is valid")
            .with_support_hint(T::zero(), self.support_radius() + w.norm())
    }

    /// Stieltjes transform `∫ dmu(x) / (z - x)` for `Im z > 0`.
    pub fn stieltjes(&self, z: Complex<T>) -> Result<Complex<T>> {
        if !(z.im > T::zero()) || !z.re.is_finite() {
            return Err(Error::Domain(format!("Stieltjes transform needs Im z > 0, got {z}")));
        }
        Ok(self.cauchy(z))
    }

    /// Cauchy integral `∫ dmu(x) / (z - x)` without the half-plane check.
    pub(crate) fn cauchy(&self, z: Complex<T>) -> Complex<T> {
        if self.is_atomic() {
            return self
                .points()
                .iter()
                .fold(Complex::new(T::zero(), T::zero()), |acc, (x, w)| acc + (z - *x).inv() * *w);
        }
        self.cells()
            .iter()
            .fold(Complex::new(T::zero(), T::zero()), |acc, c| acc + c.cauchy(z))
    }

    /// Derivative of the Cauchy integral, `-∫ dmu(x) / (z - x)^2`.
    pub(crate) fn cauchy_derivative(&self, z: Complex<T>) -> Complex<T> {
        let sq = if self.is_atomic() {
            self.points().iter().fold(Complex::new(T::zero(), T::zero()), |acc, (x, w)| {
                let d = z - *x;
                acc + (d * d).inv() * *w
            })
        } else {
            self.cells()
                .iter()
                .fold(Complex::new(T::zero(), T::zero()), |acc, c| acc + c.cauchy_sq(z))
        };
        -sq
    }

    /// `∫ y / (y^2 + x^2) dmu(x)`, i.e. `-Im G(iy)`, for `y > 0`.
    pub fn poisson(&self, y: T) -> T {
        if self.is_atomic() {
            return self.points().iter().map(|(x, w)| *w * y / (y * y + *x * *x)).sum();
        }
        self.cells().iter().map(|c| c.poisson(y)).sum()
    }

    /// `∫ ux/(1-ux) dmu(x)` for real `u` with `1 - ux > 0` on the support.
    pub(crate) fn psi(&self, u: T) -> T {
        if u == T::zero() {
            return T::zero();
        }
        if self.is_atomic() {
            return self.points().iter().map(|(x, w)| *w * u * *x / (T::one() - u * *x)).sum();
        }
        let w = u.recip();
        let wc = Complex::new(w, T::zero());
        let sum: T = self
            .cells()
            .iter()
            .map(|c| {
                let mid = (c.x0 + c.x1) / T::lit(2.0);
                if (w - mid).abs() > T::lit(8.0) * c.width() {
                    gauss_legendre6(c.x0, c.x1, T::zero(), |x| c.at(x) * x / (w - x))
                } else {
                    // x/(w-x) = w/(w-x) - 1
                    w * c.cauchy(wc).re - c.mass()
                }
            })
            .sum();
        sum
    }

    /// `∫_{|x| > cutoff} log|x| dnu(x)`. With `cutoff = 0` an atom at the
    /// origin gives `-inf`.
    pub fn log_potential(&self, cutoff: T) -> T {
        if self.is_atomic() {
            let mut acc = T::zero();
            for (x, w) in self.points() {
                if w == T::zero() {
                    continue;
                }
                if x.abs() > cutoff {
                    acc = acc + w * x.abs().ln();
                } else if x == T::zero() && cutoff == T::zero() {
                    return T::neg_infinity();
                }
            }
            return acc;
        }
        let mut acc = T::zero();
        for cell in self.cells() {
            let mut pieces = vec![cell];
            for cut in [-cutoff, T::zero(), cutoff] {
                pieces = pieces
                    .into_iter()
                    .flat_map(|c| {
                        if c.x0 < cut && c.x1 > cut {
                            let (l, r) = c.split(cut);
                            vec![l, r]
                        } else {
                            vec![c]
                        }
                    })
                    .collect();
            }
            for c in pieces {
                let m = (c.x0 + c.x1) / T::lit(2.0);
                if m.abs() > cutoff {
                    acc = acc + c.log_moment();
                }
            }
        }
        acc
    }

    /// Breakpoints of the CDF (atoms, samples, grid nodes).
    fn breakpoints(&self) -> Vec<T> {
        match &self.repr {
            Representation::Atoms { locations, .. } => locations.clone(),
            Representation::Empirical { samples } => {
                let mut s = samples.clone();
                s.dedup();
                s
            }
            Representation::Grid { grid, .. } => grid.clone(),
        }
    }

    /// KS distance from an atomic/empirical measure to a continuous CDF.
    pub fn ks_to_cdf<F: Fn(T) -> T>(&self, cdf: F) -> T {
        let mut worst = T::zero();
        for x in self.breakpoints() {
            let f = cdf(x);
            worst = worst.max((self.cdf(x) - f).abs()).max((self.cdf_left(x) - f).abs());
        }
        if !self.is_atomic() {
            // grid measures: sample densely between nodes as well
            for c in self.cells() {
                for j in 1..8 {
                    let x = c.x0 + c.width() * T::from_usize(j).unwrap() / T::lit(8.0);
                    worst = worst.max((self.cdf(x) - cdf(x)).abs());
                }
            }
        }
        worst
    }

    pub fn to_json(&self) -> Result<String>
    where
        T: Serialize,
    {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self>
    where
        T: for<'de> Deserialize<'de>,
    {
        Ok(serde_json::from_str(s)?)
    }
}

/// Subdivides cells so that each spans at most 0.5% of its left end,
/// keeping the same piecewise-linear density.
fn refined_relative<T: Real>(grid: &[T], values: &[T]) -> (Vec<T>, Vec<T>) {
    let mut g = vec![grid[0]];
    let mut v = vec![values[0]];
    for k in 0..grid.len() - 1 {
        let (x0, x1, p0, p1) = (grid[k], grid[k + 1], values[k], values[k + 1]);
        if x0 > T::zero() {
            let parts = ((x1 - x0) / (x0 * T::lit(5e-3))).ceil().to_usize().unwrap_or(1).clamp(1, 256);
            for j in 1..parts {
                let t = T::from_usize(j).unwrap() / T::from_usize(parts).unwrap();
                g.push(x0 + (x1 - x0) * t);
                v.push(p0 + (p1 - p0) * t);
            }
        }
        g.push(x1);
        v.push(p1);
    }
    (g, v)
}

/// Refines a grid starting at 0 so that consecutive nodes near 0 grow by at
/// most 10%, keeping the same piecewise-linear density.
fn graded_near_zero<T: Real>(grid: &[T], values: &[T]) -> (Vec<T>, Vec<T>) {
    let ratio = T::lit(1.1);
    let mut g = vec![grid[0]];
    let mut v = vec![values[0]];
    for k in 0..grid.len() - 1 {
        let (x0, x1, p0, p1) = (grid[k], grid[k + 1], values[k], values[k + 1]);
        let lo = if x0 == T::zero() { x1 * T::lit(1e-7) } else { x0 };
        if x1 / lo > ratio {
            let mut inner = Vec::new();
            let mut x = x1 / ratio;
            while x > lo {
                inner.push(x);
                x = x / ratio;
            }
            if x0 == T::zero() {
                inner.push(lo);
            }
            for x in inner.into_iter().rev() {
                if x > x0 && x < x1 {
                    g.push(x);
                    v.push(p0 + (p1 - p0) * (x - x0) / (x1 - x0));
                }
            }
        }
        g.push(x1);
        v.push(p1);
    }
    (g, v)
}

fn merged_breakpoints<T: Real>(a: &Measure1D<T>, b: &Measure1D<T>) -> Vec<T> {
    let mut pts = a.breakpoints();
    pts.extend(b.breakpoints());
    pts.sort_by(cmp);
    pts.dedup();
    pts
}

/// Density of a grid measure on an open interval between breakpoints (zero for atomic).
fn interval_density<T: Real>(m: &Measure1D<T>, x: T) -> T {
    m.density_at(x).unwrap_or(T::zero())
}

/// Kolmogorov–Smirnov distance `sup_x |F_a(x) - F_b(x)|`.
pub fn ks_distance<T: Real>(a: &Measure1D<T>, b: &Measure1D<T>) -> T {
    let pts = merged_breakpoints(a, b);
    let mut worst = T::zero();
    for (i, &x) in pts.iter().enumerate() {
        worst = worst
            .max((a.cdf(x) - b.cdf(x)).abs())
            .max((a.cdf_left(x) - b.cdf_left(x)).abs());
        if i + 1 < pts.len() {
            // interior extremum where the two densities cross
            let r = pts[i + 1];
            let l = x;
            let d_l = interval_density(a, l + (r - l) * T::lit(1e-9)) - interval_density(b, l + (r - l) * T::lit(1e-9));
            let d_r = interval_density(a, r - (r - l) * T::lit(1e-9)) - interval_density(b, r - (r - l) * T::lit(1e-9));
            if d_l.signum() != d_r.signum() && d_l != d_r {
                let xs = l + (r - l) * d_l / (d_l - d_r);
                worst = worst.max((a.cdf(xs) - b.cdf(xs)).abs());
            }
        }
    }
    worst
}

/// Wasserstein-1 distance `∫ |F_a - F_b| dx`, integrated exactly for
/// piecewise-quadratic CDF differences.
pub fn wasserstein1<T: Real>(a: &Measure1D<T>, b: &Measure1D<T>) -> T {
    let pts = merged_breakpoints(a, b);
    let d = |x: T| a.cdf(x) - b.cdf(x);
    let d_left = |x: T| a.cdf_left(x) - b.cdf_left(x);
    let two = T::lit(2.0);
    let mut total = T::zero();
    for w in pts.windows(2) {
        let (l, r) = (w[0], w[1]);
        let h = r - l;
        let f0 = d(l);
        let f2 = d_left(r);
        let f1 = d((l + r) / two);
        // quadratic through (0,f0), (1/2,f1), (1,f2) in t = (x - l)/h
        let qa = two * f0 - T::lit(4.0) * f1 + two * f2;
        let qb = -T::lit(3.0) * f0 + T::lit(4.0) * f1 - f2;
        let qc = f0;
        let eval = |t: T| (qa * t + qb) * t + qc;
        let mut cuts = vec![T::zero()];
        if qa.abs() > T::epsilon() * (qb.abs() + qc.abs()) {
            let disc = qb * qb - T::lit(4.0) * qa * qc;
            if disc > T::zero() {
                let sq = disc.sqrt();
                let q = -(qb + sq.copysign(qb)) / two;
                let mut roots = vec![q / qa];
                if q != T::zero() {
                    roots.push(qc / q);
                }
                roots.sort_by(cmp);
                cuts.extend(roots.into_iter().filter(|t| *t > T::zero() && *t < T::one()));
            }
        } else if qb != T::zero() {
            let t = -qc / qb;
            if t > T::zero() && t < T::one() {
                cuts.push(t);
            }
        }
        cuts.push(T::one());
        for c in cuts.windows(2) {
            let (t0, t1) = (c[0], c[1]);
            let simpson = (eval(t0) + T::lit(4.0) * eval((t0 + t1) / two) + eval(t1)) * (t1 - t0) / T::lit(6.0);
            total = total + simpson.abs() * h;
        }
    }
    total
}

/// Result of a Stieltjes inversion: the recovered density and the mass it
/// carried before renormalization.
#[derive(Clone, Debug)]
pub struct Inversion<T> {
    pub measure: Measure1D<T>,
    pub recovered_mass: T,
}

/// Recovers a density from Stieltjes transform values sampled at `grid + i eta`.
///
/// When `g_half` (values at `grid + i eta/2`) is supplied the first-order
/// Poisson smoothing bias is removed by Richardson extrapolation
/// `2 G(eta/2) - G(eta)`.
pub fn stieltjes_invert<T: Real>(
    grid: &[T],
    g_eta: &[Complex<T>],
    g_half: Option<&[Complex<T>]>,
    eta: T,
) -> Result<Inversion<T>> {
    if !(eta > T::zero()) {
        return Err(Error::Domain(format!("inversion needs eta > 0, got {eta}")));
    }
    if grid.len() != g_eta.len() || g_half.is_some_and(|h| h.len() != grid.len()) {
        return Err(Error::Domain("grid and transform samples differ in length".into()));
    }
    let values: Vec<T> = match g_half {
        Some(half) => g_eta
            .iter()
            .zip(half)
            .map(|(g, gh)| (-(gh.im * T::lit(2.0) - g.im) / T::PI()).max(T::zero()))
            .collect(),
        None => g_eta.iter().map(|g| (-g.im / T::PI()).max(T::zero())).collect(),
    };
    let mass = trapezoid(grid, &values);
    if !(mass >= T::lit(0.9) && mass <= T::lit(1.1)) {
        return Err(Error::Accuracy(format!(
            "recovered mass {mass} outside [0.9, 1.1]: eta too large or grid too narrow"
        )));
    }
    Ok(Inversion {
        measure: Measure1D::grid_normalized(grid.to_vec(), values)?,
        recovered_mass: mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    type M = Measure1D<f64>;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn two_atoms() -> M {
        M::atoms(&[1.0, 2.0], &[0.5, 0.5]).unwrap()
    }

    #[test]
    fn constructors_validate_mass_and_order() {
        assert!(M::atoms(&[1.0], &[0.5]).is_err());
        assert!(M::grid(vec![0.0, 1.0], vec![1.0, 2.0]).is_err());
        assert!(M::grid(vec![1.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(M::grid(vec![0.0, 1.0], vec![-1.0, 3.0]).is_err());
        assert!(M::empirical(vec![f64::NAN]).is_err());
        let m = M::atoms(&[1.0, 1.0, 2.0], &[0.25, 0.25, 0.5]).unwrap();
        assert_eq!(m.points().len(), 2);
    }

    #[test]
    fn symmetrize_examples() {
        let s = M::dirac(1.0).symmetrize().unwrap();
        assert_eq!(s.points(), vec![(-1.0, 0.5), (1.0, 0.5)]);
        let s = M::dirac(0.0).symmetrize().unwrap();
        assert_eq!(s.points(), vec![(0.0, 1.0)]);
        let s = M::empirical(vec![1.0, 2.0]).unwrap().symmetrize().unwrap();
        assert_eq!(
            s.points(),
            vec![(-2.0, 0.25), (-1.0, 0.25), (1.0, 0.25), (2.0, 0.25)]
        );
        assert!(M::dirac(-1.0).symmetrize().is_err());
        // idempotent
        let again = s.symmetrize().unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn symmetrize_grid_keeps_gap_empty() {
        let u = M::uniform(1.0, 2.0).unwrap().symmetrize().unwrap();
        assert_abs_diff_eq!(u.cdf(0.0), 0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(u.cdf(-1.0), 0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(u.cdf(-1.5), 0.25, epsilon = 1e-8);
        assert!(u.is_symmetric());
    }

    #[test]
    fn stieltjes_examples() {
        let g = M::dirac(0.0).stieltjes(c(0.0, 1.0)).unwrap();
        assert_abs_diff_eq!(g.re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.im, -1.0, epsilon = 1e-15);
        // z = 2 sits on the real axis, use the unchecked Cauchy integral
        let g = M::dirac(1.0).cauchy(c(2.0, 0.0));
        assert_abs_diff_eq!(g.re, 1.0, epsilon = 1e-15);
        assert!(M::dirac(1.0).stieltjes(c(2.0, 0.0)).is_err());
    }

    /// Midpoint-rule oracle for `∫ f(x) / (z - x) dx` with a closed-form density.
    fn quadrature_oracle(f: impl Fn(f64) -> f64, a: f64, b: f64, z: Complex<f64>, n: usize) -> Complex<f64> {
        let h = (b - a) / n as f64;
        (0..n)
            .map(|k| {
                let x = a + (k as f64 + 0.5) * h;
                (z - x).inv() * (f(x) * h)
            })
            .sum()
    }

    #[test]
    fn semicircle_stieltjes_matches_closed_form_and_oracle() {
        let z = c(0.0, 1.0);
        let closed = (z - (z * z - 4.0).sqrt()) / 2.0;
        // branch: G ~ 1/z at infinity; at z = i the value is -0.618034 i
        assert_abs_diff_eq!(closed.im, -0.618_034, epsilon = 1e-6);
        let oracle = quadrature_oracle(|x| (4.0 - x * x).max(0.0).sqrt() / (2.0 * std::f64::consts::PI), -2.0, 2.0, z, 400_000);
        assert_abs_diff_eq!(oracle.im, closed.im, epsilon = 1e-8);
        let g = M::semicircle(2.0, 2000).stieltjes(z).unwrap();
        assert_abs_diff_eq!(g.im, -0.618_034, epsilon = 1e-6);
        assert_abs_diff_eq!(g.re, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn grid_cauchy_is_exact_for_linear_density() {
        // density 2x on [0, 1]: ∫ 2x/(z-x) dx = 2(z log(z/(z-1)) - 1)
        let m = M::grid(vec![0.0, 1.0], vec![0.0, 2.0]).unwrap();
        for z in [c(0.3, 1e-6), c(0.5, 0.5), c(30.0, 2.0), c(-1.0, 0.1)] {
            let exact = (z * (z / (z - 1.0)).ln() - 1.0) * 2.0;
            let g = m.cauchy(z);
            assert_abs_diff_eq!((g - exact).norm(), 0.0, epsilon = 1e-12);
            let h = 1e-5;
            let fd = (m.cauchy(z + h) - m.cauchy(z - h)) / (2.0 * h);
            if z.im > 1e-3 {
                assert_abs_diff_eq!((m.cauchy_derivative(z) - fd).norm(), 0.0, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn poisson_matches_stieltjes_imaginary_part() {
        let m = M::quarter_circle(300).symmetrize().unwrap();
        for y in [1e-4, 0.01, 0.3, 1.0, 50.0] {
            let g = m.stieltjes(c(0.0, y)).unwrap();
            assert_abs_diff_eq!(m.poisson(y), -g.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn poisson_derivative_matches_finite_differences() {
        let m = M::quarter_circle(200);
        for y in [1e-3, 0.05, 0.7, 3.0, 40.0] {
            let d: f64 = m.cells().iter().map(|c| c.poisson_derivative(y)).sum();
            let e = 1e-5 * y;
            let fd = (m.poisson(y + e) - m.poisson(y - e)) / (2.0 * e);
            assert_abs_diff_eq!(d, fd, epsilon = 1e-5 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn pushforward_square_examples() {
        let m = M::dirac(2.0).pushforward_square().unwrap();
        assert_eq!(m.points(), vec![(4.0, 1.0)]);
        let m = two_atoms().pushforward_square().unwrap();
        assert_eq!(m.points(), vec![(1.0, 0.5), (4.0, 0.5)]);
        let m = two_atoms();
        for k in 1..5 {
            let lhs = m.pushforward_square().unwrap().moment(k, true).unwrap();
            assert_abs_diff_eq!(lhs, m.moment(2 * k, true).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn quarter_circle_squares_to_marchenko_pastur() {
        let mp = M::quarter_circle(4000).pushforward_square().unwrap();
        assert_abs_diff_eq!(mp.mass(), 1.0, epsilon = 1e-9);
        let mp_density = |x: f64| ((4.0 - x) / x).sqrt() / (2.0 * std::f64::consts::PI);
        for x in [0.2, 0.5, 1.0, 2.0, 3.0, 3.8] {
            let d = mp.density_at(x).unwrap();
            assert_abs_diff_eq!(d, mp_density(x), epsilon = 1e-4);
        }
        // Catalan moments 1, 2, 5
        for (k, cat) in [(1, 1.0), (2, 2.0), (3, 5.0)] {
            // the y^{-1/2} edge at 0 is only resolved to first order by a linear grid
            assert_abs_diff_eq!(mp.moment(k, true).unwrap(), cat, epsilon = 2e-4);
        }
    }

    #[test]
    fn pushforward_abs_shift_examples() {
        let m = M::dirac(0.0).pushforward_abs_shift(c(3.0, 4.0));
        assert_eq!(m.points(), vec![(5.0, 1.0)]);
        let u = M::uniform(0.0, 1.0).unwrap().pushforward_abs_shift(c(0.0, 0.0));
        assert_abs_diff_eq!(ks_distance(&u, &M::uniform(0.0, 1.0).unwrap()), 0.0, epsilon = 1e-6);
        let m = M::atoms(&[-1.0, 1.0], &[0.5, 0.5]).unwrap().pushforward_abs_shift(c(0.0, 0.0));
        assert_eq!(m.points(), vec![(1.0, 1.0)]);
    }

    #[test]
    fn pushforward_abs_shift_grid_matches_sampling() {
        let m = M::uniform(-1.0, 1.0).unwrap();
        let w = c(0.3, 0.5);
        let pushed = m.pushforward_abs_shift(w);
        // oracle: push a fine quantile sample through the map
        let n = 20_000;
        let s: Vec<f64> = (1..=n).map(|i| {
            let x = -1.0 + 2.0 * (i as f64 - 0.5) / n as f64;
            (w - x).norm()
        }).collect();
        let emp = M::empirical(s).unwrap();
        let d = ks_distance(&pushed, &emp);
        assert!(d < 2e-3, "ks {d}");
    }

    #[test]
    fn moment_examples() {
        assert_abs_diff_eq!(M::dirac(2.0).moment(2, true).unwrap(), 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(two_atoms().moment(-2, true).unwrap(), 0.625, epsilon = 1e-15);
        assert_eq!(M::quarter_circle(200).moment(-2, true).unwrap(), f64::INFINITY);
        assert_eq!(M::dirac(0.0).moment(-1, true).unwrap(), f64::INFINITY);
        assert_abs_diff_eq!(M::uniform(1.0, 2.0).unwrap().moment(-2, true).unwrap(), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(M::quarter_circle(2000).moment(2, true).unwrap(), 1.0, epsilon = 1e-6);
        assert!(M::atoms(&[-1.0, 1.0], &[0.5, 0.5]).unwrap().moment(-2, true).is_err());
    }

    #[test]
    fn quarter_circle_inverse_moment_diverges_like_log() {
        // oracle: truncated ∫_eps^2 x^-2 sqrt(4-x^2)/pi dx grows like 2/(pi eps)
        let f = |x: f64| (4.0 - x * x).sqrt() / std::f64::consts::PI / (x * x);
        let trunc = |eps: f64| {
            let n = 200_000;
            let (a, b) = (eps.ln(), 2f64.ln());
            let h = (b - a) / n as f64;
            (0..n).map(|k| { let t = a + (k as f64 + 0.5) * h; let x = t.exp(); f(x) * x * h }).sum::<f64>()
        };
        assert!(trunc(1e-4) > 5.0 * trunc(1e-3) - 1.0);
    }

    #[test]
    fn quantile_examples() {
        let u = M::uniform(0.0, 1.0).unwrap();
        assert_abs_diff_eq!(u.quantile(0.25).unwrap(), 0.25, epsilon = 1e-15);
        assert_eq!(M::dirac(3.0).quantile(0.3).unwrap(), 3.0);
        assert_eq!(M::dirac(3.0).quantile(1.0).unwrap(), 3.0);
        assert_eq!(two_atoms().quantile(0.75).unwrap(), 2.0);
        assert_eq!(two_atoms().quantile(0.5).unwrap(), 1.0);
        assert!(u.quantile(0.0).is_err());
        assert!(u.quantile(1.5).is_err());
        let e = M::empirical(vec![3.0, 1.0, 2.0, 4.0]).unwrap();
        assert_eq!(e.quantile(0.25).unwrap(), 1.0);
        assert_eq!(e.quantile(0.26).unwrap(), 2.0);
        assert_eq!(e.quantile(1.0).unwrap(), 4.0);
    }

    #[test]
    fn log_potential_examples() {
        let l = M::atoms(&[-1.0, 1.0], &[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(l.log_potential(0.0), 0.0, epsilon = 1e-15);
        let e = std::f64::consts::E;
        let l = M::atoms(&[-e, e], &[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(l.log_potential(0.0), 1.0, epsilon = 1e-15);
        assert_eq!(M::dirac(0.0).log_potential(0.0), f64::NEG_INFINITY);
        assert_eq!(M::dirac(0.0).log_potential(0.1), 0.0);
    }

    #[test]
    fn log_potential_of_arcsine_vanishes() {
        // arcsine on [-2, 2] through the substitution x = 2 cos(theta): a
        // piecewise-linear density cannot hold the edge singularity, so build
        // the measure from exact cell masses on a cos-clustered grid.
        let n = 4000;
        let masses = vec![1.0 / n as f64; n];
        // piecewise-constant masses placed at the cell midpoints (in angle)
        let mid: Vec<f64> = (0..n).map(|k| -2.0 * (std::f64::consts::PI * (k as f64 + 0.5) / n as f64).cos()).collect();
        let atoms = M::atoms(&mid, &masses).unwrap();
        // midpoint rule against the log singularity at x = 0 is off by about log(2)/n
        assert_abs_diff_eq!(atoms.log_potential(0.0), 0.0, epsilon = 2e-4);
        // oracle: same integral by midpoint rule in the angle variable
        let oracle: f64 = (0..200_000).map(|k| {
            let th = std::f64::consts::PI * (k as f64 + 0.5) / 200_000.0;
            (2.0 * th.cos()).abs().ln() / 200_000.0
        }).sum();
        assert_abs_diff_eq!(oracle, 0.0, epsilon = 1e-5);
    }

    #[test]
    fn log_potential_of_grid_density_is_exact() {
        // uniform on [-1, 1]: ∫ log|x| dx / 2 = -1
        let u = M::uniform(-1.0, 1.0).unwrap();
        assert_abs_diff_eq!(u.log_potential(0.0), -1.0, epsilon = 1e-14);
        // cutoff 0.5: (1/2)·2·∫_0.5^1 log x dx
        let exact = (0.0 - 1.0) - (0.5 * 0.5f64.ln() - 0.5);
        assert_abs_diff_eq!(u.log_potential(0.5), exact, epsilon = 1e-14);
    }

    #[test]
    fn distance_examples() {
        let a = two_atoms();
        assert_eq!(ks_distance(&a, &a), 0.0);
        assert_eq!(wasserstein1(&a, &a), 0.0);
        let (d0, d1) = (M::dirac(0.0), M::dirac(1.0));
        assert_abs_diff_eq!(ks_distance(&d0, &d1), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(wasserstein1(&d0, &d1), 1.0, epsilon = 1e-15);
        let u = M::uniform(0.0, 1.0).unwrap();
        assert_abs_diff_eq!(wasserstein1(&u, &M::dirac(0.5)), 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(ks_distance(&u, &M::dirac(0.5)), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn distances_between_grid_densities() {
        // uniform[0,1] vs uniform[0.5,1.5]: W1 = 0.5, KS = 0.5
        let a = M::uniform(0.0, 1.0).unwrap();
        let b = M::uniform(0.5, 1.5).unwrap();
        assert_abs_diff_eq!(wasserstein1(&a, &b), 0.5, epsilon = 1e-13);
        assert_abs_diff_eq!(ks_distance(&a, &b), 0.5, epsilon = 1e-13);
        // triangle vs uniform: crossing densities, KS attained inside a cell
        let t = M::grid(vec![0.0, 1.0], vec![0.0, 2.0]).unwrap();
        // F_t = x^2, F_u = x, sup |x - x^2| = 1/4 at x = 1/2
        assert_abs_diff_eq!(ks_distance(&t, &a), 0.25, epsilon = 1e-13);
        assert_abs_diff_eq!(wasserstein1(&t, &a), 1.0 / 6.0, epsilon = 1e-13);
    }

    #[test]
    fn stieltjes_invert_recovers_semicircle() {
        let eta = 1e-4;
        let grid: Vec<f64> = (0..=6000).map(|k| -3.0 + k as f64 * 1e-3).collect();
        let g = |x: f64, e: f64| {
            let z = c(x, e);
            let s = (z * z - 4.0).sqrt();
            // pick the branch with Im G < 0
            let g1 = (z - s) / 2.0;
            if g1.im < 0.0 { g1 } else { (z + s) / 2.0 }
        };
        let ge: Vec<_> = grid.iter().map(|&x| g(x, eta)).collect();
        let gh: Vec<_> = grid.iter().map(|&x| g(x, eta / 2.0)).collect();
        let inv = stieltjes_invert(&grid, &ge, Some(&gh), eta).unwrap();
        assert_abs_diff_eq!(inv.recovered_mass, 1.0, epsilon = 1e-3);
        let sc = |x: f64| (4.0 - x * x).max(0.0).sqrt() / (2.0 * std::f64::consts::PI);
        let err = grid.iter().map(|&x| (inv.measure.density_at(x).unwrap() - sc(x)).abs()).fold(0.0, f64::max);
        assert!(err < 1e-3, "sup error {err}");
    }

    #[test]
    fn stieltjes_invert_rejects_massless_input() {
        let grid = vec![0.0, 1.0, 2.0];
        let g = vec![c(1.0, 0.0); 3];
        assert!(matches!(stieltjes_invert(&grid, &g, None, 1e-3), Err(Error::Accuracy(_))));
    }

    #[test]
    fn json_round_trip() {
        let m = M::uniform(1.0, 2.0).unwrap();
        let s = m.to_json().unwrap();
        assert!(s.contains("\"type\":\"grid\""));
        assert_eq!(M::from_json(&s).unwrap(), m);
        let a: M = M::from_json(r#"{"type":"atoms","locations":[2,1],"weights":[0.5,0.5]}"#).unwrap();
        assert_eq!(a, two_atoms());
        assert!(M::from_json(r#"{"type":"atoms","locations":[1],"weights":[0.3]}"#).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let m = Measure1D::<f32>::atoms(&[1.0, 2.0], &[0.5, 0.5]).unwrap();
        assert!((m.moment(-2, true).unwrap() - 0.625).abs() < 1e-6);
        let g = Measure1D::<f32>::dirac(0.0).stieltjes(Complex::new(0.0, 1.0)).unwrap();
        assert!((g.im + 1.0).abs() < 1e-6);
        assert_eq!(Measure1D::<f32>::uniform(0.0, 1.0).unwrap().quantile(0.5).unwrap(), 0.5);
    }
}

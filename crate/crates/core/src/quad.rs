//! Scalar root finding and quadrature rules used across the crate.

use crate::error::{Error, Result};
use crate::real::Real;

/// Six-point Gauss–Legendre rule on [-1, 1].
pub(crate) const GL6_NODES: [f64; 6] = [
    -0.932_469_514_203_152_1,
    -0.661_209_386_466_264_5,
    -0.238_619_186_083_196_9,
    0.238_619_186_083_196_9,
    0.661_209_386_466_264_5,
    0.932_469_514_203_152_1,
];
pub(crate) const GL6_WEIGHTS: [f64; 6] = [
    0.171_324_492_379_170_3,
    0.360_761_573_048_138_6,
    0.467_913_934_572_691_0,
    0.467_913_934_572_691_0,
    0.360_761_573_048_138_6,
    0.171_324_492_379_170_3,
];

/// Integrates `f` over `[a, b]` with the six-point Gauss–Legendre rule.
pub(crate) fn gauss_legendre6<T: Real, V, F>(a: T, b: T, zero: V, mut f: F) -> V
where
    V: std::ops::Add<Output = V> + std::ops::Mul<T, Output = V>,
    F: FnMut(T) -> V,
{
    let half = (b - a) / T::lit(2.0);
    let mid = (a + b) / T::lit(2.0);
    let mut acc = zero;
    for k in 0..6 {
        let x = mid + half * T::lit(GL6_NODES[k]);
        acc = acc + f(x) * (half * T::lit(GL6_WEIGHTS[k]));
    }
    acc
}

/// Brent's method for a root of `f` bracketed by `[a, b]`.
///
/// `f(a)` and `f(b)` must have opposite signs (or one of them vanish).
pub fn brent<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    a: T,
    b: T,
    xtol: T,
    max_iter: usize,
) -> Result<T> {
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == T::zero() {
        return Ok(a);
    }
    if fb == T::zero() {
        return Ok(b);
    }
    if fa.is_nan() || fb.is_nan() || fa.signum() == fb.signum() {
        return Err(Error::Numerical(format!(
            "root not bracketed: f({a:e})={fa:e}, f({b:e})={fb:e}"
        )));
    }
    let mut c = b;
    let mut fc = fb;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if (fb > T::zero()) == (fc > T::zero()) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = two * T::epsilon() * b.abs() + half * xtol;
        let xm = half * (c - b);
        if xm.abs() <= tol1 || fb == T::zero() {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = two * xm * s;
                q = T::one() - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (two * xm * qq * (qq - r) - (b - a) * (r - T::one()));
                q = (qq - T::one()) * (r - T::one()) * (s - T::one());
            }
            if p > T::zero() {
                q = -q;
            }
            p = p.abs();
            let min1 = T::lit(3.0) * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if two * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        if d.abs() > tol1 {
            b = b + d;
        } else {
            b = b + tol1.copysign(xm);
        }
        fb = f(b);
        if fb.is_nan() {
            return Err(Error::Numerical(format!("NaN while root finding at {b:e}")));
        }
    }
    Err(Error::Numerical(format!(
        "Brent iteration cap {max_iter} reached near {b:e}"
    )))
}

/// Finds the root of an increasing function on `(0, inf)` by bracketing in
/// `log x` starting from `guess`, then refining with Brent's method in `log x`.
pub fn root_positive_increasing<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    guess: T,
    rel_tol: T,
) -> Result<T> {
    let two = T::lit(2.0);
    let mut lo = guess.ln();
    let mut hi = lo;
    let mut flo = f(lo.exp());
    let mut fhi = flo;
    if flo == T::zero() {
        return Ok(guess);
    }
    let mut step = T::lit(0.5);
    let mut tries = 0;
    if flo < T::zero() {
        while fhi < T::zero() {
            lo = hi;
            hi = hi + step;
            step = step * two;
            fhi = f(hi.exp());
            tries += 1;
            if tries > 200 || fhi.is_nan() {
                return Err(Error::Numerical("could not bracket root from below".into()));
            }
        }
    } else {
        while flo > T::zero() {
            hi = lo;
            lo = lo - step;
            step = step * two;
            flo = f(lo.exp());
            tries += 1;
            if tries > 200 || flo.is_nan() {
                return Err(Error::Numerical("could not bracket root from above".into()));
            }
        }
    }
    let u = brent(|u: T| f(u.exp()), lo, hi, rel_tol, 200)?;
    Ok(u.exp())
}

/// Double-exponential (exp-sinh) quadrature of `f` over `(0, inf)`.
///
/// Halves the step until two successive levels agree to `tol` (absolute) or
/// until `max_level` halvings. Returns the estimate and the final difference.
pub fn exp_sinh<T: Real, F: FnMut(T) -> T>(mut f: F, tol: T, max_level: usize) -> (T, T) {
    let half_pi = T::FRAC_PI_2();
    let t_max = T::lit(5.0);
    let mut node = |t: T| -> T {
        let x = (half_pi * t.sinh()).exp();
        let w = half_pi * t.cosh() * x;
        let v = f(x);
        if v.is_finite() && w.is_finite() {
            v * w
        } else {
            T::zero()
        }
    };
    let mut h = T::lit(0.5);
    let mut sum = T::zero();
    let mut k = T::zero();
    while k * h <= t_max {
        sum = sum + node(k * h);
        if k > T::zero() {
            sum = sum + node(-k * h);
        }
        k = k + T::one();
    }
    let mut estimate = sum * h;
    let mut diff = T::infinity();
    for _ in 0..max_level {
        h = h / T::lit(2.0);
        let mut added = T::zero();
        let mut j = T::one();
        while j * h <= t_max {
            added = added + node(j * h) + node(-j * h);
            j = j + T::lit(2.0);
        }
        sum = sum + added;
        let next = sum * h;
        diff = (next - estimate).abs();
        estimate = next;
        if diff <= tol {
            break;
        }
    }
    (estimate, diff)
}

/// Nodes and weights of the exp-sinh rule with step `h` on `t ∈ [-t_max, t_max]`,
/// in increasing order of the abscissa.
pub fn exp_sinh_rule<T: Real>(h: T, t_max: T) -> Vec<(T, T)> {
    let half_pi = T::FRAC_PI_2();
    let n = (t_max / h).floor().to_i64().unwrap_or(0);
    (-n..=n)
        .map(|k| {
            let t = h * T::from_i64(k).unwrap();
            let x = (half_pi * t.sinh()).exp();
            (x, h * half_pi * t.cosh() * x)
        })
        .collect()
}

/// The nodes of `exp_sinh_rule(h, t_max)` at odd multiples of `h`; halving
/// the step then costs only these, as `S(h) = S(2h)/2 + S_odd(h)`.
pub fn exp_sinh_rule_odd<T: Real>(h: T, t_max: T) -> Vec<(T, T)> {
    let half_pi = T::FRAC_PI_2();
    let n = (t_max / h).floor().to_i64().unwrap_or(0);
    (-n..=n)
        .filter(|k| k % 2 != 0)
        .map(|k| {
            let t = h * T::from_i64(k).unwrap();
            let x = (half_pi * t.sinh()).exp();
            (x, h * half_pi * t.cosh() * x)
        })
        .collect()
}

/// `n` Chebyshev–Lobatto points on `[a, b]`, increasing.
pub fn chebyshev_lobatto<T: Real>(n: usize, a: T, b: T) -> Vec<T> {
    assert!(n >= 2, "need at least two points");
    let mid = (a + b) / T::lit(2.0);
    let half = (b - a) / T::lit(2.0);
    let last = T::from_usize(n - 1).unwrap();
    (0..n)
        .map(|k| {
            let theta = T::PI() * (last - T::from_usize(k).unwrap()) / last;
            mid + half * theta.cos()
        })
        .collect()
}

/// Composite trapezoid rule on a non-uniform grid.
pub fn trapezoid<T: Real>(x: &[T], y: &[T]) -> T {
    debug_assert_eq!(x.len(), y.len());
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| (xs[1] - xs[0]) * (ys[0] + ys[1]) / T::lit(2.0))
        .sum()
}

/// Uniform grid with `n` points on `[a, b]`.
pub fn linspace<T: Real>(a: T, b: T, n: usize) -> Vec<T> {
    assert!(n >= 2);
    let step = (b - a) / T::from_usize(n - 1).unwrap();
    (0..n)
        .map(|k| {
            if k + 1 == n {
                b
            } else {
                a + step * T::from_usize(k).unwrap()
            }
        })
        .collect()
}

/// Grid on `[a, b]` with spacing at most `step`, refined geometrically
/// (growth factor 1.25) down to `min_step` around each point of `focus`.
pub fn graded_grid<T: Real>(a: T, b: T, step: T, focus: &[T], min_step: T) -> Vec<T> {
    let n = ((b - a) / step).ceil().to_usize().unwrap_or(1).max(1);
    let mut pts = linspace(a, b, n + 1);
    let ratio = T::lit(1.25);
    for &f in focus {
        if f < a || f > b {
            continue;
        }
        pts.push(f);
        let mut d = min_step;
        let mut offset = d;
        while d < step {
            for x in [f - offset, f + offset] {
                if x > a && x < b {
                    pts.push(x);
                }
            }
            d = d * ratio;
            offset = offset + d;
        }
    }
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    let tiny = min_step * T::lit(1e-3);
    let mut out: Vec<T> = Vec::with_capacity(pts.len());
    for x in pts {
        if out.last().map_or(true, |l| x - *l > tiny) {
            out.push(x);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn brent_finds_cubic_root() {
        let r = brent(|x: f64| x * x * x - 2.0, 0.0, 2.0, 1e-15, 100).unwrap();
        assert_abs_diff_eq!(r, 2f64.cbrt(), epsilon = 1e-14);
    }

    #[test]
    fn brent_rejects_unbracketed() {
        assert!(brent(|x: f64| x * x + 1.0, -1.0, 1.0, 1e-12, 50).is_err());
    }

    #[test]
    fn positive_root_brackets_far_away() {
        let r = root_positive_increasing(|x: f64| x - 1e6, 1.0, 1e-15).unwrap();
        assert_abs_diff_eq!(r / 1e6, 1.0, epsilon = 1e-13);
        let r = root_positive_increasing(|x: f64| x - 1e-7, 1.0, 1e-15).unwrap();
        assert_abs_diff_eq!(r / 1e-7, 1.0, epsilon = 1e-13);
    }

    #[test]
    fn exp_sinh_integrates_known_integrals() {
        let (v, _) = exp_sinh(|x: f64| (-x).exp(), 1e-14, 10);
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-13);
        let (v, _) = exp_sinh(|x: f64| 1.0 / (1.0 + x * x), 1e-14, 10);
        assert_abs_diff_eq!(v, std::f64::consts::FRAC_PI_2, epsilon = 1e-13);
        // endpoint singularity
        let (v, _) = exp_sinh(|x: f64| (-x).exp() / x.sqrt(), 1e-14, 10);
        assert_abs_diff_eq!(v, std::f64::consts::PI.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn gauss_legendre_exact_on_degree_eleven() {
        let v = gauss_legendre6(0.0f64, 2.0, 0.0, |x| x.powi(11));
        assert_abs_diff_eq!(v, 2f64.powi(12) / 12.0, epsilon = 1e-10);
    }

    #[test]
    fn graded_grid_refines_near_focus() {
        let g = graded_grid(-2.5f64, 2.5, 1e-2, &[-2.0, 2.0], 1e-5);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(g[0], -2.5);
        assert_eq!(*g.last().unwrap(), 2.5);
        let near = g.iter().filter(|x| (**x - 2.0).abs() < 1e-4).count();
        assert!(near >= 10);
        assert!(g.windows(2).all(|w| w[1] - w[0] <= 1e-2 + 1e-12));
    }

    #[test]
    fn chebyshev_points_are_increasing_and_hit_ends() {
        let p = chebyshev_lobatto(9, -1.0f64, 3.0);
        assert_eq!(p[0], -1.0);
        assert_abs_diff_eq!(p[8], 3.0, epsilon = 1e-15);
        assert!(p.windows(2).all(|w| w[1] > w[0]));
    }
}

//! Haar-distributed unitary and orthogonal matrices.

use faer::{c64, Mat};
use rand::Rng;
use rand_distr::StandardNormal;

/// Standard complex Gaussian entries: independent real and imaginary parts
/// of variance 1/2.
pub fn complex_gaussian<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Mat<c64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Mat::<c64>::zeros(n, m);
    // fill column by column so the stream order is fixed
    for j in 0..m {
        for i in 0..n {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            out[(i, j)] = c64::new(re * s, im * s);
        }
    }
    out
}

pub fn real_gaussian<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Mat<f64> {
    let mut out = Mat::<f64>::zeros(n, m);
    for j in 0..m {
        for i in 0..n {
            out[(i, j)] = rng.sample(StandardNormal);
        }
    }
    out
}

/// Haar unitary: `Q` from the QR factorization of a complex Ginibre matrix,
/// with column `j` multiplied by the phase of `R_jj`.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Mat<c64> {
    crate::init();
    let g = complex_gaussian(n, n, rng);
    let qr = g.qr();
    let mut q = qr.compute_Q();
    let r = qr.R();
    for j in 0..n {
        let d = r[(j, j)];
        let m = d.norm();
        let phase = if m > 0.0 { d / m } else { c64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Haar orthogonal: real analogue of [`haar_unitary`] with sign correction.
pub fn haar_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Mat<f64> {
    crate::init();
    let g = real_gaussian(n, n, rng);
    let qr = g.qr();
    let mut q = qr.compute_Q();
    let r = qr.R();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// `max |(U*U - I)_ij|`.
pub fn unitarity_defect(u: &Mat<c64>) -> f64 {
    let p = u.adjoint() * u;
    let mut worst: f64 = 0.0;
    for j in 0..p.ncols() {
        for i in 0..p.nrows() {
            let e = if i == j { p[(i, j)] - c64::new(1.0, 0.0) } else { p[(i, j)] };
            worst = worst.max(e.norm());
        }
    }
    worst
}

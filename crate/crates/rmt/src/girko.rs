//! Empirical log-potential `h_n(z) = (1/n) Σ log s_i(zI - A)` on a lattice,
//! its Laplacian, and smallest singular value diagnostics.

use faer::{c64, Mat};
use rayon::prelude::*;
use ringlab_core::{Error, Result};
use serde::Serialize;

use crate::ensemble::{assemble, EnsembleSpec};
use crate::hess::Hessenberg;
use crate::spectrum::singular_values;

/// `h_n` on the lattice `re × im`; `h[k][j]` sits at `re[j] + i im[k]`.
#[derive(Clone, Debug, Serialize)]
pub struct GirkoField {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub h: Vec<Vec<f64>>,
    /// Lattice points where `σ_min(zI - A) < 1e-14 ‖A‖`; their value is NaN.
    pub excluded: Vec<(usize, usize)>,
    /// Lattice points moved by half a step off a colliding eigenvalue.
    pub nudged: Vec<(usize, usize)>,
    pub n: usize,
}

impl GirkoField {
    /// `max |h(z) - log|z||` over the lattice boundary.
    pub fn boundary_deviation(&self) -> f64 {
        let (nx, ny) = (self.re.len(), self.im.len());
        let mut worst: f64 = 0.0;
        for k in 0..ny {
            for j in 0..nx {
                if k == 0 || k + 1 == ny || j == 0 || j + 1 == nx {
                    let z = c64::new(self.re[j], self.im[k]);
                    let v = self.h[k][j];
                    if v.is_finite() {
                        worst = worst.max((v - z.norm().ln()).abs());
                    }
                }
            }
        }
        worst
    }

    /// CSV with header `re,im,h,excluded`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("re,im,h,excluded\n");
        for (k, y) in self.im.iter().enumerate() {
            for (j, x) in self.re.iter().enumerate() {
                let ex = self.excluded.contains(&(k, j));
                out.push_str(&format!("{x},{y},{},{}\n", self.h[k][j], u8::from(ex)));
            }
        }
        out
    }

    /// `(1/2π) ∫ Δψ · h dm` by the lattice rectangle rule.
    pub fn laplacian_pairing<F: Fn(f64, f64) -> f64 + Sync>(&self, lap_psi: F) -> f64 {
        let dx = step(&self.re);
        let dy = step(&self.im);
        let s: f64 = self
            .h
            .par_iter()
            .enumerate()
            .map(|(k, row)| {
                row.iter()
                    .enumerate()
                    .filter(|(_, v)| v.is_finite())
                    .map(|(j, v)| lap_psi(self.re[j], self.im[k]) * v)
                    .sum::<f64>()
            })
            .sum();
        s * dx * dy / (2.0 * std::f64::consts::PI)
    }
}

fn step(x: &[f64]) -> f64 {
    if x.len() < 2 {
        1.0
    } else {
        (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64
    }
}

/// Evaluates `h_n` on the lattice. When `eigs` is given, lattice points
/// within `1e-9 ‖A‖` of an eigenvalue are moved by half a lattice step.
pub fn girko_field(a: &Mat<c64>, re: &[f64], im: &[f64], eigs: Option<&[c64]>) -> GirkoField {
    let hess = Hessenberg::new(a);
    girko_field_hessenberg(&hess, re, im, eigs)
}

pub fn girko_field_hessenberg(hess: &Hessenberg, re: &[f64], im: &[f64], eigs: Option<&[c64]>) -> GirkoField {
    let n = hess.n();
    let half = 0.5 * step(re);
    let close = 1e-9 * hess.norm.max(f64::MIN_POSITIVE);
    let rows: Vec<(Vec<f64>, Vec<usize>, Vec<usize>)> = im
        .par_iter()
        .map(|&y| {
            let mut row = Vec::with_capacity(re.len());
            let (mut ex, mut nudged) = (Vec::new(), Vec::new());
            for (j, &x) in re.iter().enumerate() {
                let mut z = c64::new(x, y);
                if let Some(ev) = eigs {
                    if ev.iter().any(|l| (z - l).norm() < close) {
                        z.re += half;
                        nudged.push(j);
                    }
                }
                let lu = hess.shifted_lu(z);
                let mut v = lu.log_abs_det() / n as f64;
                // cheap screen before the inverse-iteration check
                if !v.is_finite() || lu.min_pivot() < 1e-6 * hess.norm {
                    let s = hess.sigma_min(z, 8, 1e-6);
                    if s < 1e-14 * hess.norm {
                        v = f64::NAN;
                        ex.push(j);
                    }
                }
                row.push(v);
            }
            (row, ex, nudged)
        })
        .collect();
    let mut field = GirkoField { re: re.to_vec(), im: im.to_vec(), h: Vec::new(), excluded: Vec::new(), nudged: Vec::new(), n };
    for (k, (row, ex, nudged)) in rows.into_iter().enumerate() {
        field.h.push(row);
        field.excluded.extend(ex.into_iter().map(|j| (k, j)));
        field.nudged.extend(nudged.into_iter().map(|j| (k, j)));
    }
    if !field.nudged.is_empty() {
        log::info!("{} lattice points nudged off eigenvalues", field.nudged.len());
    }
    field
}

/// Planar density `Δh / 2π` on the interior lattice points.
#[derive(Clone, Debug, Serialize)]
pub struct Density2D {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    /// `values[k][j]` at `re[j+1] + i im[k+1]` (interior points only).
    pub values: Vec<Vec<f64>>,
    /// Mass after clipping, before renormalization.
    pub raw_mass: f64,
}

impl Density2D {
    pub fn at(&self, j: usize, k: usize) -> f64 {
        self.values[k][j]
    }
}

/// Five-point Laplacian of `h` over `2π`, clipped at zero and renormalized.
pub fn density_from_field(field: &GirkoField) -> Result<Density2D> {
    let (nx, ny) = (field.re.len(), field.im.len());
    if nx < 3 || ny < 3 {
        return Err(Error::Domain("density needs at least a 3x3 lattice".into()));
    }
    let holes: Vec<(f64, f64)> = field
        .excluded
        .iter()
        .filter(|(k, j)| *k > 0 && *k + 1 < ny && *j > 0 && *j + 1 < nx)
        .map(|(k, j)| (field.re[*j], field.im[*k]))
        .collect();
    if !holes.is_empty() {
        return Err(Error::Numerical(format!("field has excluded interior points at {holes:?}")));
    }
    let (dx, dy) = (step(&field.re), step(&field.im));
    let h = &field.h;
    let mut values = vec![vec![0.0; nx - 2]; ny - 2];
    let mut mass = 0.0;
    for k in 1..ny - 1 {
        for j in 1..nx - 1 {
            let lap = (h[k][j + 1] + h[k][j - 1] - 2.0 * h[k][j]) / (dx * dx)
                + (h[k + 1][j] + h[k - 1][j] - 2.0 * h[k][j]) / (dy * dy);
            let rho = (lap / (2.0 * std::f64::consts::PI)).max(0.0);
            values[k - 1][j - 1] = rho;
            mass += rho * dx * dy;
        }
    }
    if mass > 0.0 {
        log::info!("planar density renormalized by {mass}");
        for row in values.iter_mut() {
            for v in row.iter_mut() {
                *v /= mass;
            }
        }
    }
    Ok(Density2D {
        re: field.re[1..nx - 1].to_vec(),
        im: field.im[1..ny - 1].to_vec(),
        values,
        raw_mass: mass,
    })
}

/// `σ_min(zI - A)` from a direct SVD and the flag `σ_min < n^{-δ}`.
pub fn min_singular_diagnostic(a: &Mat<c64>, z: c64, delta: f64) -> Result<(f64, bool)> {
    let n = a.nrows();
    let shifted = Mat::from_fn(n, n, |i, j| if i == j { z - a[(i, j)] } else { -a[(i, j)] });
    let s = singular_values(&shifted)?;
    let smin = s.last().copied().unwrap_or(0.0);
    Ok((smin, smin < (n as f64).powf(-delta)))
}

/// Flag frequency of `σ_min(zI - A) < n^{-δ}` over replicas and points.
#[derive(Clone, Debug, Serialize)]
pub struct MinSingularStats {
    pub threshold: f64,
    pub flagged: usize,
    pub total: usize,
    pub frequency: f64,
    pub smallest: f64,
    /// Replicas whose draw failed, with the error text.
    pub failures: Vec<(u64, String)>,
}

/// Batch version of [`min_singular_diagnostic`] over `replicas` draws of
/// `spec`, using inverse iteration on the Hessenberg form.
pub fn min_singular_batch(spec: &EnsembleSpec, replicas: u64, zs: &[c64], delta: f64) -> MinSingularStats {
    let n = spec.n;
    let threshold = (n as f64).powf(-delta);
    let per: Vec<std::result::Result<Vec<f64>, (u64, String)>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let m = assemble(spec, r).map_err(|e| (r, e.to_string()))?;
            let h = Hessenberg::new(&m.a);
            Ok(zs.iter().map(|z| h.sigma_min(*z, 60, 1e-6)).collect())
        })
        .collect();
    let mut stats = MinSingularStats { threshold, flagged: 0, total: 0, frequency: 0.0, smallest: f64::INFINITY, failures: Vec::new() };
    for r in per {
        match r {
            Ok(v) => {
                for s in v {
                    stats.total += 1;
                    stats.smallest = stats.smallest.min(s);
                    if s < threshold {
                        stats.flagged += 1;
                    }
                }
            }
            Err(f) => stats.failures.push(f),
        }
    }
    if stats.total > 0 {
        stats.frequency = stats.flagged as f64 / stats.total as f64;
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::haar::haar_unitary;
    use crate::rng::{stream, Purpose};

    #[test]
    fn unitary_field_and_diagnostic() {
        let u = haar_unitary(30, &mut stream(2, 0, Purpose::LeftHaar));
        let f = girko_field(&u, &[0.0], &[0.0], None);
        assert!(f.h[0][0].abs() < 1e-12);
        let (s, flag) = min_singular_diagnostic(&u, c64::new(0.0, 0.0), 1.0).unwrap();
        assert!((s - 1.0).abs() < 1e-12 && !flag);
        // far outside: σ_min ≥ |z| - ‖A‖
        let z = c64::new(2.0, 0.0);
        let (s, _) = min_singular_diagnostic(&u, z, 1.0).unwrap();
        assert!(s >= 1.0 - 1e-10);
    }

    #[test]
    fn scalar_field() {
        let zero = Mat::<c64>::zeros(1, 1);
        let f = girko_field(&zero, &[2.0], &[0.0], None);
        assert!((f.h[0][0] - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn far_field_is_log_modulus() {
        let u = haar_unitary(20, &mut stream(8, 0, Purpose::LeftHaar));
        let f = girko_field(&u, &[10.0, -7.0], &[0.0, 7.0], None);
        for (k, y) in f.im.iter().enumerate() {
            for (j, x) in f.re.iter().enumerate() {
                assert!((f.h[k][j] - c64::new(*x, *y).norm().ln()).abs() < 0.02);
            }
        }
    }

    #[test]
    fn colliding_points_are_nudged() {
        let d = Mat::<c64>::from_fn(2, 2, |i, j| if i == j { c64::new(i as f64, 0.0) } else { c64::new(0.0, 0.0) });
        let eigs = [c64::new(1.0, 0.0), c64::new(0.0, 0.0)];
        let f = girko_field(&d, &[0.0, 0.5, 1.0], &[0.0], Some(&eigs));
        assert_eq!(f.nudged, vec![(0, 0), (0, 2)]);
        assert!(f.h[0].iter().all(|v| v.is_finite()));
    }
}

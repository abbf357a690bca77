//! Spectra, singular values, hermitization and the exact identities they obey.

use faer::{c64, Mat, Side};
use ringlab_core::{Error, Measure, Result};
use serde::Serialize;

use crate::ensemble::{assemble, EnsembleSpec};

/// Eigenvalues sorted by decreasing modulus (ties by argument).
pub fn eigenvalues(a: &Mat<c64>) -> Result<Vec<c64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::Domain(format!("eigenvalues need a square matrix, got {}x{}", a.nrows(), a.ncols())));
    }
    if !is_finite(a) {
        return Err(Error::Domain("matrix has non-finite entries".into()));
    }
    crate::init();
    let mut ev = a
        .eigenvalues()
        .map_err(|e| Error::Numerical(format!("eigenvalue iteration failed for n = {}: {e:?}", a.nrows())))?;
    ev.sort_by(|x, y| y.norm().total_cmp(&x.norm()).then(x.arg().total_cmp(&y.arg())));
    Ok(ev)
}

/// Singular values in decreasing order.
pub fn singular_values(a: &Mat<c64>) -> Result<Vec<f64>> {
    crate::init();
    let mut s = a
        .singular_values()
        .map_err(|e| Error::Numerical(format!("SVD failed for {}x{}: {e:?}", a.nrows(), a.ncols())))?;
    s.sort_by(|x, y| y.total_cmp(x));
    Ok(s)
}

fn is_finite(a: &Mat<c64>) -> bool {
    (0..a.ncols()).all(|j| (0..a.nrows()).all(|i| a[(i, j)].re.is_finite() && a[(i, j)].im.is_finite()))
}

pub fn trace(a: &Mat<c64>) -> c64 {
    (0..a.nrows()).map(|i| a[(i, i)]).sum()
}

/// `log|det A|` from a partially pivoted LU.
pub fn log_abs_det(a: &Mat<c64>) -> f64 {
    crate::init();
    let lu = a.partial_piv_lu();
    let u = lu.U();
    (0..a.nrows()).map(|i| u[(i, i)].norm().ln()).sum()
}

#[derive(Clone, Debug, Serialize)]
pub struct Residuals {
    /// `|Σλ - tr A|`.
    pub trace_defect: f64,
    /// `|Σ log|λ| - log|det A||`.
    pub det_defect: f64,
}

/// One draw: eigenvalues, singular values and consistency residuals.
#[derive(Clone, Debug, Serialize)]
pub struct SpectrumSample {
    pub eigenvalues: Vec<c64>,
    pub singular_values: Vec<f64>,
    pub spec: EnsembleSpec,
    pub replica: u64,
    pub residuals: Residuals,
}

impl SpectrumSample {
    pub fn from_matrix(a: &Mat<c64>, spec: &EnsembleSpec, replica: u64) -> Result<Self> {
        let eigenvalues = eigenvalues(a)?;
        let singular_values = singular_values(a)?;
        let sum: c64 = eigenvalues.iter().sum();
        let log_mod: f64 = eigenvalues.iter().map(|z| z.norm().ln()).sum();
        let residuals = Residuals {
            trace_defect: (sum - trace(a)).norm(),
            det_defect: (log_mod - log_abs_det(a)).abs(),
        };
        Ok(Self { eigenvalues, singular_values, spec: spec.clone(), replica, residuals })
    }

    pub fn weyl(&self) -> WeylReport {
        weyl_check(&self.eigenvalues, &self.singular_values)
    }

    pub fn radial(&self) -> Result<Measure> {
        empirical_radial(&self.eigenvalues)
    }

    /// CSV with header `re,im`.
    pub fn eigenvalues_csv(&self) -> String {
        let mut out = String::from("re,im\n");
        for z in &self.eigenvalues {
            out.push_str(&format!("{},{}\n", z.re, z.im));
        }
        out
    }

    /// CSV with header `s`.
    pub fn singular_values_csv(&self) -> String {
        let mut out = String::from("s\n");
        for s in &self.singular_values {
            out.push_str(&format!("{s}\n"));
        }
        out
    }
}

/// Draws replica `replica` and computes its spectrum.
pub fn sample(spec: &EnsembleSpec, replica: u64) -> Result<SpectrumSample> {
    let m = assemble(spec, replica)?;
    SpectrumSample::from_matrix(&m.a, spec, replica)
}

/// Outcome of the Weyl product inequalities
/// `∏_{j≤k} |λ_j| ≤ ∏_{j≤k} s_j` (all `k < n`) and `∏|λ_j| = ∏ s_j`.
#[derive(Clone, Debug, Serialize)]
pub struct WeylReport {
    /// Largest `log ∏_{j≤k}|λ_j| - log ∏_{j≤k} s_j` over `k < n`.
    pub max_excess: f64,
    /// `|log ∏|λ_j| - log ∏ s_j|`.
    pub full_product_gap: f64,
}

impl WeylReport {
    /// `rel` bounds both quantities as relative errors of the products.
    pub fn passes(&self, rel: f64) -> bool {
        self.max_excess <= rel.ln_1p() && self.full_product_gap <= rel.ln_1p()
    }
}

/// Compares partial products in log form; inputs are sorted internally.
pub fn weyl_check(eigs: &[c64], svals: &[f64]) -> WeylReport {
    let mut m: Vec<f64> = eigs.iter().map(|z| z.norm()).collect();
    m.sort_by(|x, y| y.total_cmp(x));
    let mut s = svals.to_vec();
    s.sort_by(|x, y| y.total_cmp(x));
    let (mut lm, mut ls) = (0.0, 0.0);
    let mut max_excess = f64::NEG_INFINITY;
    let n = m.len().min(s.len());
    for k in 0..n {
        lm += m[k].ln();
        ls += s[k].ln();
        if k + 1 < n {
            max_excess = max_excess.max(lm - ls);
        }
    }
    if n <= 1 {
        max_excess = 0.0;
    }
    let full_product_gap = if lm.is_finite() && ls.is_finite() { (lm - ls).abs() } else if lm == ls { 0.0 } else { f64::INFINITY };
    WeylReport { max_excess, full_product_gap }
}

/// `[[0, zI - A], [(zI - A)*, 0]]`.
pub fn hermitize(a: &Mat<c64>, z: c64) -> Mat<c64> {
    let n = a.nrows();
    let mut h = Mat::<c64>::zeros(2 * n, 2 * n);
    for j in 0..n {
        for i in 0..n {
            let m = if i == j { z - a[(i, j)] } else { -a[(i, j)] };
            h[(i, n + j)] = m;
            h[(n + j, i)] = m.conj();
        }
    }
    h
}

/// `max |spec(H^z) - (±s(zI - A))|` after sorting both sides.
pub fn hermitize_defect(a: &Mat<c64>, z: c64) -> Result<f64> {
    crate::init();
    let h = hermitize(a, z);
    let mut ev = h
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("Hermitian eigensolver failed: {e:?}")))?;
    ev.sort_by(|x, y| x.total_cmp(y));
    let n = a.nrows();
    let shifted = Mat::from_fn(n, n, |i, j| if i == j { z - a[(i, j)] } else { -a[(i, j)] });
    let s = singular_values(&shifted)?;
    let mut expected: Vec<f64> = s.iter().map(|x| -x).collect();
    expected.extend(s.iter().rev());
    Ok(ev.iter().zip(&expected).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

/// Empirical law of the moduli `|λ_i|`.
pub fn empirical_radial(eigs: &[c64]) -> Result<Measure> {
    Measure::empirical(eigs.iter().map(|z| z.norm()).collect())
}

//! Random matrix ensembles `A = U T V`, their spectra, hermitizations and
//! empirical log-potentials.
//!
//! Dense linear algebra is delegated to `faer`, pinned to sequential
//! execution so that a seed fixes every output bit; parallelism is across
//! replicas and lattice points instead.

pub mod ensemble;
pub mod girko;
pub mod haar;
pub mod hess;
pub mod rng;
pub mod spectrum;

pub use ensemble::{assemble, diag_from_quantile, EnsembleSpec, Model, TSource};
pub use girko::{density_from_field, girko_field, min_singular_batch, min_singular_diagnostic, GirkoField};
pub use haar::{haar_orthogonal, haar_unitary};
pub use spectrum::{eigenvalues, empirical_radial, hermitize, sample, singular_values, weyl_check, SpectrumSample};

/// Complex matrix type used throughout.
pub type CMat = faer::Mat<faer::c64>;

pub(crate) fn init() {
    static ONCE: std::sync::Once = std::sync::Once::new();
    ONCE.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

//! Nonlinear Fourier transform (NFT) of finitely supported complex signals with
//! respect to the Zakharov-Shabat system.
//!
//! The library computes the continuous spectrum `q̂(λ) = b(λ)/a(λ)` on the real
//! axis and the discrete spectrum `{λ_j, q̃(λ_j) = b/a'}` in the upper half
//! plane, using seven transfer integrators (with analytic λ-derivative
//! augmentation for Newton search), three matrix eigenproblem formulations,
//! closed-form reference spectra, and a split-step propagator for the
//! normalized NLS flow that the spectrum is invariant under.
//!
//! With the default `parallel` feature the per-λ mesh drivers fan out over a
//! rayon pool; disabling it yields a fully sequential build with identical
//! results.

pub mod continuous;
mod mat2;
pub mod matrix;
pub mod nls;
pub mod oracles;
pub mod search;
pub mod signal;
pub mod steppers;
pub mod zs;

pub(crate) mod par;

use num_complex::Complex64;

/// Errors shared across the library.
#[derive(Debug, thiserror::Error)]
pub enum NftError {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("invalid pulse spec: {0}")]
    InvalidPulse(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Malformed {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("gamma pole at non-positive integer z = {0}")]
    GammaPole(Complex64),
    #[error("pole in continuous spectrum: |a| = {a_mag:.3e} at lambda = {lambda}")]
    SpectrumPole { lambda: Complex64, a_mag: f64 },
    #[error("degenerate eigenvalue: |a'| = {aprime_mag:.3e} at lambda = {lambda}")]
    DegenerateEigenvalue {
        lambda: Complex64,
        aprime_mag: f64,
    },
    #[error("singular Crank-Nicolson step at k = {0}")]
    SingularStep(usize),
    #[error("propagation produced non-finite values at lambda = {lambda} ({context})")]
    NonFinite { lambda: Complex64, context: String },
    #[error("eigensolver failed on {dim}x{dim} matrix: {msg}")]
    Eigensolver { dim: usize, msg: String },
    #[error("oracle evaluation failed: {0}")]
    Oracle(String),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, NftError>;

/// Shorthand used throughout: double precision complex scalar.
pub type C64 = Complex64;

/// The imaginary unit.
pub(crate) const J: C64 = C64::new(0.0, 1.0);

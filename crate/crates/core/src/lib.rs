//! Phase retrieval by lifting.
//!
//! Recovers `x0` from quadratic measurements `b_i = |⟨a_i, x0⟩|² (+ w_i)` by
//! fitting a PSD matrix `X ≈ x0 x0*` in the ℓ1 sense, builds and checks dual
//! certificates for exact recovery, and runs Monte Carlo experiments over
//! recovery, universality, stability and injectivity.

pub mod certificate;
pub mod error;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod measurement;
pub mod rng;
pub mod scalar;
pub mod solver;

pub use certificate::{
    build_certificate, truncation_constants, verify_certificate, Certificate, CertificateReport, TangentSpace,
};
pub use error::{Error, Result};
pub use experiments::{run_experiment, ExperimentConfig, ExperimentKind, ExperimentTable};
pub use io::{MeasurementFile, Problem, SolverReport, SCHEMA_VERSION};
pub use linalg::{eig_sym, norms, phase_distance, project_psd, rank1_extract, EigenDecomposition, Norms, SymMatrix};
pub use measurement::{add_noise, sample_ensemble, Ensemble, Model, NoiseModel, Observations};
pub use num_complex::Complex64;
pub use scalar::{Field, Scalar};
pub use solver::{estimate_opnorm, estimate_signal, solve, SolverOptions, SolverResult};

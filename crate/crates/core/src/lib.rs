//! Growth functionals, hole probabilities and lemma-level numerical checks
//! for Gaussian entire functions `f(z) = sum phi_n a_n z^n` with
//! log-concave coefficients `a_n` and standard complex Gaussian `phi_n`.

pub mod cli;
pub mod coeffs;
pub mod error;
pub mod growth;
pub mod holeprob;
pub mod numeric;
pub mod sampling;
pub mod verify;
pub mod zerocount;

pub use coeffs::{CoefficientModel, Family, LogTerm, Radius};
pub use error::{Error, Result};
pub use growth::GrowthProfile;

//! Floquet and gauge-invariant Kato decompositions of time-periodic Hamiltonians.
//!
//! A drive `H(t) = H(t + T)` admits two complementary splittings. The
//! stroboscopic one, `H = H_F[t] + A_F(t)`, depends on a choice of Floquet
//! zone. The geometric one, `H = H_K(t) + A_K(t)`, is unique: `A_K` generates
//! parallel transport of the Floquet states, and the period-averaged Kato
//! energies `ξ_K` sort the Floquet states without folding ambiguity.

pub mod agpsolve;
pub mod drives;
pub mod error;
pub mod floquet;
pub mod kato;
pub mod numkernel;
pub mod parallel;
pub mod propagator;
pub mod spectralflow;

pub use error::{Error, Result};
pub use faer::c64;

//! Krylov-chain reduction of single-excitation Tavis-Cummings ensemble dynamics.
//!
//! A cavity coupled to N spins with frequencies ω_j and couplings g_j is, inside the
//! single-excitation subspace, exactly a tridiagonal chain whose coefficients are the
//! recurrence coefficients of the g²-weighted frequency distribution. The crate builds those
//! coefficients (closed forms, Hankel determinants, Stieltjes), evolves states on the chain and
//! measures how information spreads along it.

pub mod chain;
mod dd;
pub mod error;
pub mod io;
pub mod metrics;
pub mod oracle;
pub mod propagate;
pub mod recursion;
pub mod spectra;

pub use chain::{build_chain, Frame, KrylovChain, VelocityProfile};
pub use error::{Error, Result};
pub use propagate::{EvolutionResult, StateVector, TimeGrid};
pub use recursion::{ChainCoefficients, ChainMode, Provenance};
pub use spectra::{CouplingModel, SpectralDistribution, Spin};

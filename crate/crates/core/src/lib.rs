//! Numerical engine for the hyperbolic Anderson model driven by noise that is
//! white in time and fractional with Hurst index `H < 1/2` in space.
//!
//! * [`specfun`]: Gamma functions, simplex integrals, power series.
//! * [`spectral`]: Green-function energies `C_α`, noise norms, divergence probe.
//! * [`chaos`]: bracketed chaos-term norms, moment series, growth-rate brackets, QMC.
//! * [`simulate`]: Monte Carlo solver of the mild equation and moment statistics.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chaos;
pub mod error;
pub mod fit;
pub mod output;
pub mod quad;
pub mod rng;
pub mod simulate;
pub mod specfun;
pub mod spectral;

pub use chaos::{ChaosTermBracket, MomentSeriesResult, QmcConfig, QmcEstimate, QmcIntegrand};
pub use error::{HamError, Result};
pub use simulate::{FieldEnsemble, GridSpec, LyapunovEstimate, MomentTable, SolverConfig};
pub use spectral::{Kernel, ModelParams, QuadConfig, SpectralConstant};

//! Directed information transfer between time series.
//!
//! Conditional densities `p(y_{n+1} | state)` are modelled as logistic
//! densities centred on a nearest-neighbour local prediction, with a
//! steepness set by the residual spread of that predictor. Transfer entropy
//! is the sample average of the log-ratio between the density conditioned
//! on the joint (target, source) state and the density conditioned on the
//! target state alone.
//!
//! Modules, bottom-up:
//!
//! - [`series`]: time series, CSV I/O, delay embedding.
//! - [`neighbors`]: exact k-nearest-neighbour search (k-d tree / brute force).
//! - [`localmodel`]: zero- and first-order local predictors, residual spread.
//! - [`density`]: sigmoid CCDF, logistic CPD, k-NN marginal density.
//! - [`transfer`]: transfer entropy, pairwise matrices, net flow, surrogates.
//! - [`systems`]: tent maps, coupled tent maps, Chua's circuit.
//! - [`oracle`]: histogram (binning) transfer entropy used as a reference.

pub mod density;
mod error;
pub mod localmodel;
pub mod neighbors;
pub mod oracle;
pub mod series;
pub mod systems;
pub mod transfer;

pub use error::{Error, Result};

//! Conditional densities from a sigmoid conditional CDF, and the k-NN
//! marginal density.
//!
//! With `u = r·(center − y)` the conditional CCDF is the sigmoid
//! `S(u) = 1/(1+e^{-u})`. Its magnitude of derivative in `y` is the
//! logistic density with location `center` and scale `1/r`:
//!
//! ```text
//! p(y | x) = r e^{-u} / (1 + e^{-u})²
//! ```
//!
//! As `r → ∞` the CCDF tends to the Heaviside step `θ(center − y)`.

use std::f64::consts::{LN_2, PI};

use crate::localmodel::LocalModel;
use crate::neighbors::NeighborIndex;
use crate::series::StateSeries;
use crate::{Error, Result};

/// Logistic conditional density centred on a local prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpdModel {
    center: f64,
    r: f64,
}

impl CpdModel {
    pub fn new(center: f64, r: f64) -> Result<Self> {
        if !center.is_finite() {
            return Err(Error::InvalidParameter(format!("non-finite center {center}")));
        }
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigmoid steepness must be positive and finite, got {r}"
            )));
        }
        Ok(Self { center, r })
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    fn u(&self, y: f64) -> f64 {
        self.r * (self.center - y)
    }

    /// `S(r·(center − y))`, in `[0, 1]`.
    pub fn ccdf(&self, y: f64) -> f64 {
        let u = self.u(y);
        if u >= 0.0 {
            1.0 / (1.0 + (-u).exp())
        } else {
            let e = u.exp();
            e / (1.0 + e)
        }
    }

    pub fn cpd(&self, y: f64) -> f64 {
        let a = self.u(y).abs();
        let e = (-a).exp();
        self.r * e / ((1.0 + e) * (1.0 + e))
    }

    /// Natural log of [`cpd`](Self::cpd), finite for any finite `y`.
    pub fn ln_cpd(&self, y: f64) -> f64 {
        let a = self.u(y).abs();
        self.r.ln() - a - 2.0 * (-a).exp().ln_1p()
    }

    pub fn log2_cpd(&self, y: f64) -> f64 {
        self.ln_cpd(y) / LN_2
    }
}

/// How the sigmoid steepness `r` follows from the residual spread `σ`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum RPolicy {
    /// `r = π/(σ√3)`: the logistic standard deviation equals `σ`.
    #[default]
    Matched,
    /// `r = c/σ`.
    Inverse { c: f64 },
    /// `r = c`, independent of `σ`.
    Fixed { c: f64 },
}

impl std::fmt::Display for RPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RPolicy::Matched => write!(f, "matched"),
            RPolicy::Inverse { c } => write!(f, "inverse(c={c})"),
            RPolicy::Fixed { c } => write!(f, "fixed(c={c})"),
        }
    }
}

pub fn resolve_r(policy: RPolicy, sigma: f64) -> Result<f64> {
    let r = match policy {
        RPolicy::Matched => PI / (sigma * 3f64.sqrt()),
        RPolicy::Inverse { c } => c / sigma,
        RPolicy::Fixed { c } => c,
    };
    if r.is_finite() && r > 0.0 {
        Ok(r)
    } else {
        Err(Error::InvalidParameter(format!(
            "policy {policy} with sigma={sigma} gives r={r}; r must be positive and finite"
        )))
    }
}

/// Conditional density at the realised successor of state `query_index`,
/// centred on the local prediction there.
pub fn conditional_density_at_sample(
    states: &StateSeries,
    index: &NeighborIndex<'_>,
    query_index: usize,
    r: f64,
    model: &LocalModel,
) -> Result<f64> {
    let p = model.predict(states, index, query_index)?;
    Ok(CpdModel::new(p.predicted, r)?.cpd(states.successors()[query_index]))
}

/// k-th nearest neighbour marginal density `k / (N ‖x − x_k‖)`.
///
/// No volume factor: this is the bare ratio of neighbour count to distance,
/// so in one dimension it is twice the usual `k/(2N r_k)` estimate.
pub fn marginal_knn(
    states: &StateSeries,
    index: &NeighborIndex<'_>,
    query_index: usize,
    k: usize,
) -> Result<f64> {
    let nn = index.query_knn(query_index, k, 0)?;
    let dk = nn.distances[k - 1];
    if dk == 0.0 {
        return Err(Error::DuplicateStates {
            first: query_index,
            second: nn.indices[k - 1],
        });
    }
    Ok(k as f64 / (states.len() as f64 * dk))
}

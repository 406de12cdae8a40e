//! Local deterministic predictors built from nearest neighbours.
//!
//! Zero order predicts the successor of the nearest admissible neighbour
//! (or the mean successor of the `k` nearest). First order fits an affine
//! map `successor ≈ c + J·(state − query)` by least squares over `m`
//! neighbours and evaluates it at the query, which leaves just `c`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::neighbors::NeighborIndex;
use crate::series::StateSeries;
use crate::{Error, Result};

/// Relative singular value below which a first-order fit counts as rank deficient.
const RANK_TOL: f64 = 1e-10;

/// Relative residual-spread floor, as a fraction of the successor range.
pub const SIGMA_FLOOR_REL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelOrder {
    Zero,
    First,
}

impl std::fmt::Display for ModelOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelOrder::Zero => write!(f, "0"),
            ModelOrder::First => write!(f, "1"),
        }
    }
}

/// Predictor configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalModel {
    pub order: ModelOrder,
    /// Neighbours averaged by the zero-order model.
    pub k: usize,
    /// Neighbours in a first-order fit; `None` means `2(d+1)`.
    pub m: Option<usize>,
    /// Temporal exclusion half-width (0 excludes only the query itself).
    pub window: usize,
}

impl Default for LocalModel {
    fn default() -> Self {
        Self::zero_order(1, 0)
    }
}

impl LocalModel {
    pub fn zero_order(k: usize, window: usize) -> Self {
        Self {
            order: ModelOrder::Zero,
            k,
            m: None,
            window,
        }
    }

    pub fn first_order(m: Option<usize>, window: usize) -> Self {
        Self {
            order: ModelOrder::First,
            k: 1,
            m,
            window,
        }
    }

    /// Neighbours the model needs at dimension `dim`.
    pub fn neighbors_needed(&self, dim: usize) -> usize {
        match self.order {
            ModelOrder::Zero => self.k,
            ModelOrder::First => self.m.unwrap_or(2 * (dim + 1)),
        }
    }

    pub fn predict(
        &self,
        states: &StateSeries,
        index: &NeighborIndex<'_>,
        query_index: usize,
    ) -> Result<LocalPrediction> {
        match self.order {
            ModelOrder::Zero => predict_zero_order_k(states, index, query_index, self.k, self.window),
            ModelOrder::First => predict_first_order(
                states,
                index,
                query_index,
                self.neighbors_needed(states.dim()),
                self.window,
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalPrediction {
    pub predicted: f64,
    /// Nearest admissible neighbour of the query.
    pub neighbor_used: usize,
    /// Order actually applied; a rank-deficient first-order fit reports `Zero`.
    pub order_used: ModelOrder,
}

/// Successor of the nearest admissible neighbour.
pub fn predict_zero_order(
    states: &StateSeries,
    index: &NeighborIndex<'_>,
    query_index: usize,
    window: usize,
) -> Result<LocalPrediction> {
    predict_zero_order_k(states, index, query_index, 1, window)
}

/// Mean successor of the `k` nearest admissible neighbours.
pub fn predict_zero_order_k(
    states: &StateSeries,
    index: &NeighborIndex<'_>,
    query_index: usize,
    k: usize,
    window: usize,
) -> Result<LocalPrediction> {
    let nn = index.query_knn(query_index, k, window)?;
    let succ = states.successors();
    let predicted = if k == 1 {
        succ[nn.indices[0]]
    } else {
        nn.indices.iter().map(|&j| succ[j]).sum::<f64>() / k as f64
    };
    Ok(LocalPrediction {
        predicted,
        neighbor_used: nn.indices[0],
        order_used: ModelOrder::Zero,
    })
}

/// Least-squares affine fit over `m` admissible neighbours, evaluated at the
/// query state. Falls back to zero order when the fit is rank deficient.
pub fn predict_first_order(
    states: &StateSeries,
    index: &NeighborIndex<'_>,
    query_index: usize,
    m: usize,
    window: usize,
) -> Result<LocalPrediction> {
    let d = states.dim();
    if m < d + 1 {
        return Err(Error::InvalidParameter(format!(
            "first-order fit at dimension {d} needs m >= {}, got {m}",
            d + 1
        )));
    }
    let nn = index.query_knn(query_index, m, window)?;
    let nearest = nn.indices[0];
    let succ = states.successors();
    let query = states.state(query_index);

    // Displacement columns; a column identical to an earlier one over the
    // neighbourhood adds nothing to the fit and is dropped.
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(d);
    for (c, &q) in query.iter().enumerate() {
        let col: Vec<f64> = nn.indices.iter().map(|&j| states.state(j)[c] - q).collect();
        if !columns.contains(&col) {
            columns.push(col);
        }
    }
    // Intercept, then displacements scaled to unit max so the rank test does
    // not depend on the units of each coordinate.
    let mut design = DMatrix::<f64>::zeros(m, columns.len() + 1);
    design.column_mut(0).fill(1.0);
    for (c, col) in columns.iter().enumerate() {
        let scale = col.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if scale == 0.0 {
            return Ok(zero_order_fallback(succ, nearest));
        }
        for (row, x) in col.iter().enumerate() {
            design[(row, c + 1)] = x / scale;
        }
    }
    let rhs = DVector::from_iterator(m, nn.indices.iter().map(|&j| succ[j]));

    let svd = design.svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    if s_min.is_nan() || s_min <= RANK_TOL * s_max {
        return Ok(zero_order_fallback(succ, nearest));
    }
    let coef = match svd.solve(&rhs, 0.0) {
        Ok(c) => c,
        Err(_) => return Ok(zero_order_fallback(succ, nearest)),
    };
    Ok(LocalPrediction {
        predicted: coef[0],
        neighbor_used: nearest,
        order_used: ModelOrder::First,
    })
}

fn zero_order_fallback(succ: &[f64], nearest: usize) -> LocalPrediction {
    LocalPrediction {
        predicted: succ[nearest],
        neighbor_used: nearest,
        order_used: ModelOrder::Zero,
    }
}

/// Predictions at every state, in state order. Evaluated in parallel.
pub fn predict_all(
    states: &StateSeries,
    index: &NeighborIndex<'_>,
    model: &LocalModel,
) -> Vec<Result<LocalPrediction>> {
    (0..states.len())
        .into_par_iter()
        .map(|i| model.predict(states, index, i))
        .collect()
}

/// Spread of leave-self-out prediction errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualStats {
    /// Population standard deviation of `successor − predicted`.
    pub sigma: f64,
    /// States that contributed.
    pub count: usize,
    /// States where the predictor could not be applied.
    pub skipped: usize,
    /// Lower bound applied by [`ResidualStats::effective_sigma`].
    pub floor: f64,
}

impl ResidualStats {
    /// `max(sigma, floor)`; strictly positive.
    pub fn effective_sigma(&self) -> f64 {
        self.sigma.max(self.floor)
    }

    /// Statistics of the prediction errors; `None` marks a state where the
    /// predictor could not be applied.
    pub fn from_predicted(successors: &[f64], predicted: &[Option<f64>]) -> Result<Self> {
        let errors: Vec<f64> = successors
            .iter()
            .zip(predicted)
            .filter_map(|(s, p)| p.map(|p| s - p))
            .collect();
        if errors.is_empty() {
            return Err(Error::NotEnoughNeighbors {
                requested: 1,
                available: 0,
            });
        }
        let n = errors.len() as f64;
        let mean = errors.iter().sum::<f64>() / n;
        let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
        Ok(Self {
            sigma: var.sqrt(),
            count: errors.len(),
            skipped: predicted.len() - errors.len(),
            floor: sigma_floor(successors),
        })
    }
}

/// `1e-12 × range(successors)`, or `1e-12` for a constant series.
pub fn sigma_floor(successors: &[f64]) -> f64 {
    let (lo, hi) = successors
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = hi - lo;
    if range > 0.0 {
        SIGMA_FLOOR_REL * range
    } else {
        SIGMA_FLOOR_REL
    }
}

/// Residual spread of `model` over all states of `states`.
pub fn residual_sigma(states: &StateSeries, model: &LocalModel) -> Result<ResidualStats> {
    let index = NeighborIndex::build(states)?;
    let predicted: Vec<Option<f64>> = predict_all(states, &index, model)
        .into_iter()
        .map(|p| p.ok().map(|p| p.predicted))
        .collect();
    ResidualStats::from_predicted(states.successors(), &predicted)
}

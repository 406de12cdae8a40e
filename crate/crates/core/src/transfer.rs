//! Transfer entropy from local-model conditional densities.
//!
//! For source `s` and target `t`,
//!
//! ```text
//! I(s→t) = 1/N Σ_n log2[ p(t_{n+1} | t_n, s_n) / p(t_{n+1} | t_n) ]
//! ```
//!
//! where each conditional density is a logistic density centred on a
//! local prediction (joint space for the numerator, target space for the
//! denominator) with steepness resolved from that model's own residual
//! spread. Sampling from the trajectory supplies the joint weighting, so
//! the sum over states becomes a plain average over observed samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::density::{resolve_r, CpdModel, RPolicy};
use crate::localmodel::{predict_all, LocalModel, ResidualStats};
use crate::neighbors::NeighborIndex;
use crate::series::{delay_embed, joint_embed, Dataset, StateSeries, TimeSeries};
use crate::{Error, Result};

/// Per-sample log-ratios are clamped to `±LOG_RATIO_CLAMP` bits.
pub const LOG_RATIO_CLAMP: f64 = 64.0;

/// Fewest aligned states accepted by [`transfer_entropy`].
pub const MIN_SAMPLES: usize = 20;

/// Fewest surrogates accepted by [`surrogate_baseline`].
pub const MIN_SURROGATES: usize = 19;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbedConfig {
    pub dim: usize,
    pub tau: usize,
    /// z-score every channel before embedding.
    pub standardize: bool,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            tau: 1,
            standardize: false,
        }
    }
}

impl EmbedConfig {
    pub fn embed(&self, series: &TimeSeries) -> Result<StateSeries> {
        if self.standardize {
            delay_embed(&series.standardized(), self.dim, self.tau)
        } else {
            delay_embed(series, self.dim, self.tau)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TeConfig {
    pub model: LocalModel,
    pub policy: RPolicy,
    /// Keep the per-sample log-ratios in the estimate.
    pub keep_per_sample: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TeEstimate {
    /// Mean log-ratio, bits per step.
    pub value_bits: f64,
    pub n_samples: usize,
    pub r_used_joint: f64,
    pub r_used_self: f64,
    pub sigma_joint: f64,
    pub sigma_self: f64,
    /// Samples whose log-ratio hit the clamp.
    pub clamped: usize,
    pub per_sample_logs: Option<Vec<f64>>,
}

/// Predictions and residual spread of one conditioning space.
struct Fit {
    predicted: Vec<f64>,
    stats: ResidualStats,
}

impl Fit {
    fn new(states: &StateSeries, model: &LocalModel) -> Result<Self> {
        let index = NeighborIndex::build(states)?;
        let predicted = predict_all(states, &index, model)
            .into_iter()
            .map(|p| p.map(|p| p.predicted))
            .collect::<Result<Vec<_>>>()?;
        let as_opt: Vec<Option<f64>> = predicted.iter().copied().map(Some).collect();
        let stats = ResidualStats::from_predicted(states.successors(), &as_opt)?;
        Ok(Self { predicted, stats })
    }
}

fn check_len(target: &StateSeries) -> Result<()> {
    if target.len() < MIN_SAMPLES {
        return Err(Error::TooShort(format!(
            "transfer entropy needs at least {MIN_SAMPLES} aligned states, got {}",
            target.len()
        )));
    }
    Ok(())
}

fn estimate_with_self_fit(
    source: &StateSeries,
    target: &StateSeries,
    self_fit: &Fit,
    cfg: &TeConfig,
) -> Result<TeEstimate> {
    let joint = joint_embed(target, source)?;
    let joint_fit = Fit::new(&joint, &cfg.model)?;

    let sigma_self = self_fit.stats.effective_sigma();
    let sigma_joint = joint_fit.stats.effective_sigma();
    let r_self = resolve_r(cfg.policy, sigma_self)?;
    let r_joint = resolve_r(cfg.policy, sigma_joint)?;

    let succ = target.successors();
    let mut logs = Vec::with_capacity(succ.len());
    let mut clamped = 0;
    for (n, &y) in succ.iter().enumerate() {
        let num = CpdModel::new(joint_fit.predicted[n], r_joint)?.log2_cpd(y);
        let den = CpdModel::new(self_fit.predicted[n], r_self)?.log2_cpd(y);
        let mut l = num - den;
        if l.abs() > LOG_RATIO_CLAMP {
            l = l.clamp(-LOG_RATIO_CLAMP, LOG_RATIO_CLAMP);
            clamped += 1;
        }
        logs.push(l);
    }
    let value_bits = logs.iter().sum::<f64>() / logs.len() as f64;
    Ok(TeEstimate {
        value_bits,
        n_samples: logs.len(),
        r_used_joint: r_joint,
        r_used_self: r_self,
        sigma_joint,
        sigma_self,
        clamped,
        per_sample_logs: cfg.keep_per_sample.then_some(logs),
    })
}

/// Transfer entropy from `source` to `target` in bits per step.
///
/// Both state series must be aligned (same source indices); the successors
/// of `target` are the predicted values.
pub fn transfer_entropy(
    source: &StateSeries,
    target: &StateSeries,
    cfg: &TeConfig,
) -> Result<TeEstimate> {
    check_len(target)?;
    if source.source_indices() != target.source_indices() {
        return Err(Error::Misaligned(format!(
            "source has {} states, target has {}, or their time indices differ",
            source.len(),
            target.len()
        )));
    }
    let self_fit = Fit::new(target, &cfg.model)?;
    estimate_with_self_fit(source, target, &self_fit, cfg)
}

/// Embeds both channels with `embed` and estimates `I(source→target)`.
pub fn transfer_entropy_series(
    source: &TimeSeries,
    target: &TimeSeries,
    embed: &EmbedConfig,
    cfg: &TeConfig,
) -> Result<TeEstimate> {
    transfer_entropy(&embed.embed(source)?, &embed.embed(target)?, cfg)
}

/// Pairwise transfer entropies and net flow per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult {
    pub labels: Vec<String>,
    /// `te_matrix[i][j]` is `I(i→j)`; the diagonal is 0.
    pub te_matrix: Vec<Vec<f64>>,
    /// `T_i = Σ_j I(i→j) − I(j→i)`.
    pub net_flow: Vec<f64>,
    /// Total clamped samples over all pairs.
    pub clamped: usize,
}

impl FlowResult {
    pub fn from_matrix(labels: Vec<String>, te_matrix: Vec<Vec<f64>>) -> Result<Self> {
        let p = labels.len();
        if te_matrix.len() != p || te_matrix.iter().any(|row| row.len() != p) {
            return Err(Error::Misaligned(format!(
                "matrix shape does not match {p} labels"
            )));
        }
        let net_flow = net_flow(&te_matrix);
        Ok(Self {
            labels,
            te_matrix,
            net_flow,
            clamped: 0,
        })
    }

    pub fn net_flow_sum(&self) -> f64 {
        self.net_flow.iter().sum()
    }
}

/// Outgoing minus incoming transfer for every element of a square matrix.
pub fn net_flow(te_matrix: &[Vec<f64>]) -> Vec<f64> {
    let p = te_matrix.len();
    (0..p)
        .map(|i| {
            (0..p)
                .filter(|&j| j != i)
                .map(|j| te_matrix[i][j] - te_matrix[j][i])
                .sum()
        })
        .collect()
}

/// Transfer entropy for every ordered pair of channels.
pub fn te_matrix(dataset: &Dataset, embed: &EmbedConfig, cfg: &TeConfig) -> Result<FlowResult> {
    let p = dataset.width();
    if p < 2 {
        return Err(Error::InvalidParameter(format!(
            "net flow needs at least 2 channels, got {p}"
        )));
    }
    let states = dataset
        .channels()
        .iter()
        .map(|c| embed.embed(c))
        .collect::<Result<Vec<_>>>()?;
    check_len(&states[0])?;
    let fits = states
        .par_iter()
        .map(|s| Fit::new(s, &cfg.model))
        .collect::<Result<Vec<_>>>()?;

    let pairs: Vec<(usize, usize)> = (0..p)
        .flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let cfg_lean = TeConfig {
        keep_per_sample: false,
        ..*cfg
    };
    let estimates = pairs
        .par_iter()
        .map(|&(i, j)| estimate_with_self_fit(&states[i], &states[j], &fits[j], &cfg_lean))
        .collect::<Result<Vec<_>>>()?;

    let mut matrix = vec![vec![0.0; p]; p];
    let mut clamped = 0;
    for (&(i, j), est) in pairs.iter().zip(&estimates) {
        matrix[i][j] = est.value_bits;
        clamped += est.clamped;
    }
    let labels = dataset.names().into_iter().map(str::to_owned).collect();
    let mut result = FlowResult::from_matrix(labels, matrix)?;
    result.clamped = clamped;
    Ok(result)
}

/// `(I_ab − I_ba) / (I_ab + I_ba)`; +1 means transfer only from a to b.
///
/// The value lies in `[−1, 1]` when both inputs are nonnegative.
pub fn directionality_index(i_ab: &TeEstimate, i_ba: &TeEstimate) -> Result<f64> {
    directionality_index_values(i_ab.value_bits, i_ba.value_bits)
}

pub fn directionality_index_values(i_ab: f64, i_ba: f64) -> Result<f64> {
    let den = i_ab + i_ba;
    if den == 0.0 || !den.is_finite() {
        return Err(Error::Undefined(format!(
            "directionality index with I_ab + I_ba = {den}"
        )));
    }
    Ok((i_ab - i_ba) / den)
}

/// Transfer entropy under cyclically shifted sources.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateSummary {
    pub original: f64,
    pub mean: f64,
    /// Sample standard deviation.
    pub std: f64,
    pub offsets: Vec<usize>,
    pub values: Vec<f64>,
}

impl SurrogateSummary {
    /// `(original − mean) / std`.
    pub fn z_score(&self) -> f64 {
        (self.original - self.mean) / self.std
    }
}

/// Recomputes `I(source→target)` with the source rotated by seeded random
/// offsets in `[N/10, N − N/10]`.
pub fn surrogate_baseline(
    source: &TimeSeries,
    target: &TimeSeries,
    embed: &EmbedConfig,
    cfg: &TeConfig,
    n_surrogates: usize,
    seed: u64,
) -> Result<SurrogateSummary> {
    if n_surrogates < MIN_SURROGATES {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_SURROGATES} surrogates, got {n_surrogates}"
        )));
    }
    if source.len() != target.len() {
        return Err(Error::Misaligned(format!(
            "source has {} samples, target {}",
            source.len(),
            target.len()
        )));
    }
    let n = source.len();
    let min_shift = n.div_ceil(10);
    if n < 2 * min_shift + 1 {
        return Err(Error::TooShort(format!("{n} samples leave no room for shifts")));
    }
    let cfg = TeConfig {
        keep_per_sample: false,
        ..*cfg
    };
    let target_states = embed.embed(target)?;
    check_len(&target_states)?;
    let self_fit = Fit::new(&target_states, &cfg.model)?;
    let original =
        estimate_with_self_fit(&embed.embed(source)?, &target_states, &self_fit, &cfg)?.value_bits;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offsets: Vec<usize> = (0..n_surrogates)
        .map(|_| rng.random_range(min_shift..=n - min_shift))
        .collect();
    let values = offsets
        .par_iter()
        .map(|&off| {
            let shifted = embed.embed(&source.rotated(off))?;
            Ok(estimate_with_self_fit(&shifted, &target_states, &self_fit, &cfg)?.value_bits)
        })
        .collect::<Result<Vec<f64>>>()?;

    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
    Ok(SurrogateSummary {
        original,
        mean,
        std,
        offsets,
        values,
    })
}

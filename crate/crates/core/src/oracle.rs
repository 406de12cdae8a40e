//! Histogram (coarse-grained) transfer entropy.
//!
//! Both series are cut into equal-width bins and the sum
//!
//! ```text
//! Σ p(t', t, s) log2[ p(t' | t, s) / p(t' | t) ]
//! ```
//!
//! is evaluated literally from plug-in frequencies, with `0·log 0 = 0`.
//! This module is a reference implementation for validating the
//! nearest-neighbour estimator and shares no code with it.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RangePolicy {
    /// `[min, max]` of each series separately.
    DataMinMax,
    /// The same fixed interval for both series.
    Fixed { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinningConfig {
    pub n_bins: usize,
    pub range: RangePolicy,
}

impl Default for BinningConfig {
    fn default() -> Self {
        Self {
            n_bins: 8,
            range: RangePolicy::DataMinMax,
        }
    }
}

/// Bin index of every sample. Bins are `[lo + iw, lo + (i+1)w)` except the
/// last, which is closed on the right.
pub fn discretize(values: &[f64], config: &BinningConfig) -> Result<Vec<usize>> {
    let n = config.n_bins;
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 bins, got {n}")));
    }
    let (lo, hi) = match config.range {
        RangePolicy::DataMinMax => values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            }),
        RangePolicy::Fixed { lo, hi } => (lo, hi),
    };
    if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
        return Err(Error::InvalidParameter(format!(
            "degenerate binning range [{lo}, {hi}] (constant series?)"
        )));
    }
    let width = hi - lo;
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if !(lo..=hi).contains(&v) {
                return Err(Error::InvalidParameter(format!(
                    "sample {i} = {v} outside binning range [{lo}, {hi}]"
                )));
            }
            let b = ((v - lo) / width * n as f64).floor() as usize;
            Ok(b.min(n - 1))
        })
        .collect()
}

/// Plug-in probabilities over `(t_{n+1}, t_n, s_n)` and their marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct Histograms {
    pub n_bins: usize,
    pub samples: usize,
    /// Indexed `[next][now][src]`, flattened row-major.
    pub joint: Vec<f64>,
    /// `(t_n, s_n)`, indexed `[now][src]`.
    pub now_src: Vec<f64>,
    /// `(t_{n+1}, t_n)`, indexed `[next][now]`.
    pub next_now: Vec<f64>,
    /// `t_n`.
    pub now: Vec<f64>,
}

struct Counts {
    n_bins: usize,
    samples: usize,
    joint: Vec<u64>,
    now_src: Vec<u64>,
    next_now: Vec<u64>,
    now: Vec<u64>,
}

fn count(source: &[f64], target: &[f64], config: &BinningConfig) -> Result<Counts> {
    if source.len() != target.len() {
        return Err(Error::Misaligned(format!(
            "source has {} samples, target {}",
            source.len(),
            target.len()
        )));
    }
    let nb = config.n_bins;
    if source.len() < 3 * nb.max(2) {
        return Err(Error::TooShort(format!(
            "{} samples is below the floor of 3 × {nb} bins",
            source.len()
        )));
    }
    let s = discretize(source, config)?;
    let t = discretize(target, config)?;
    let mut c = Counts {
        n_bins: nb,
        samples: t.len() - 1,
        joint: vec![0; nb * nb * nb],
        now_src: vec![0; nb * nb],
        next_now: vec![0; nb * nb],
        now: vec![0; nb],
    };
    for n in 0..t.len() - 1 {
        let (next, now, src) = (t[n + 1], t[n], s[n]);
        c.joint[(next * nb + now) * nb + src] += 1;
        c.now_src[now * nb + src] += 1;
        c.next_now[next * nb + now] += 1;
        c.now[now] += 1;
    }
    Ok(c)
}

pub fn histograms(source: &[f64], target: &[f64], config: &BinningConfig) -> Result<Histograms> {
    let c = count(source, target, config)?;
    let total = c.samples as f64;
    let norm = |v: &[u64]| v.iter().map(|&x| x as f64 / total).collect::<Vec<_>>();
    Ok(Histograms {
        n_bins: c.n_bins,
        samples: c.samples,
        joint: norm(&c.joint),
        now_src: norm(&c.now_src),
        next_now: norm(&c.next_now),
        now: norm(&c.now),
    })
}

/// Binned transfer entropy from `source` to `target`, bits per step.
pub fn te_binned(source: &[f64], target: &[f64], config: &BinningConfig) -> Result<f64> {
    let c = count(source, target, config)?;
    let nb = c.n_bins;
    let total = c.samples as f64;
    let mut te = 0.0;
    for next in 0..nb {
        for now in 0..nb {
            for src in 0..nb {
                let n_abc = c.joint[(next * nb + now) * nb + src];
                if n_abc == 0 {
                    continue;
                }
                // p(next|now,src)/p(next|now) = n_abc·n_b / (n_bc·n_ab)
                let num = n_abc as f64 * c.now[now] as f64;
                let den = c.now_src[now * nb + src] as f64 * c.next_now[next * nb + now] as f64;
                te += n_abc as f64 / total * (num / den).log2();
            }
        }
    }
    // A conditional mutual information; only rounding can push it below 0.
    Ok(te.max(0.0))
}

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::rank::{midranks, tie_sizes};
use crate::{Method, StatsError, TestResult};

/// Largest nonzero-difference count for which `Auto` enumerates exactly.
pub const EXACT_MAX_N: usize = 12;

const EXACT_HARD_LIMIT: usize = 120;

/// Keyed `(a, b)` pairs; differences are `a - b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedSample {
    pairs: Vec<(String, f64, f64)>,
}

impl PairedSample {
    pub fn new(pairs: Vec<(String, f64, f64)>) -> Result<Self, StatsError> {
        let mut seen = HashSet::new();
        for (k, a, b) in &pairs {
            if !seen.insert(k.as_str()) {
                return Err(StatsError::DuplicateKey(k.clone()));
            }
            if !a.is_finite() || !b.is_finite() {
                return Err(StatsError::Invalid(format!("non-finite value for key {k:?}")));
            }
        }
        Ok(PairedSample { pairs })
    }

    /// Pairs `(d, 0)` keyed by position.
    pub fn from_diffs(diffs: &[f64]) -> Result<Self, StatsError> {
        Self::new(diffs.iter().enumerate().map(|(i, d)| (i.to_string(), *d, 0.0)).collect())
    }

    pub fn pairs(&self) -> &[(String, f64, f64)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn diffs(&self) -> Vec<f64> {
        self.pairs.iter().map(|(_, a, b)| a - b).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WilcoxonMode {
    /// Exact when at most [`EXACT_MAX_N`] nonzero differences remain.
    #[default]
    Auto,
    Exact,
    Approx,
}

/// Two-sided paired signed-rank test. Zero differences are dropped and ties
/// receive mid-ranks. The statistic is the sum of positive ranks.
pub fn wilcoxon_signed_rank(sample: &PairedSample, mode: WilcoxonMode) -> Result<TestResult, StatsError> {
    let d: Vec<f64> = sample.diffs().into_iter().filter(|x| *x != 0.0).collect();
    if d.is_empty() {
        return Err(StatsError::Degenerate);
    }
    let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let ranks = midranks(&abs);
    let w: f64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let n = d.len();
    let exact = match mode {
        WilcoxonMode::Auto => n <= EXACT_MAX_N,
        WilcoxonMode::Exact => true,
        WilcoxonMode::Approx => false,
    };
    if exact {
        if n > EXACT_HARD_LIMIT {
            return Err(StatsError::Invalid(format!("exact mode supports at most {EXACT_HARD_LIMIT} differences")));
        }
        Ok(TestResult::new(w, exact_p(&ranks, w), Method::Exact, n))
    } else {
        Ok(TestResult::new(w, approx_p(&abs, w), Method::NormalApprox, n))
    }
}

/// Null distribution of the doubled rank sum by dynamic programming over the
/// 2^n equally likely sign assignments.
fn exact_p(ranks: &[f64], w: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0u128; total + 1];
    counts[0] = 1;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] != 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let obs = (w * 2.0).round() as usize;
    let le: u128 = counts[..=obs].iter().sum();
    let ge: u128 = counts[obs..].iter().sum();
    let all = 1u128 << ranks.len();
    let tail = (2 * le.min(ge)).min(all);
    tail as f64 / all as f64
}

/// Normal approximation with tie-corrected variance and a 0.5 continuity
/// correction toward the mean.
fn approx_p(abs: &[f64], w: f64) -> f64 {
    let n = abs.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let ties: f64 = tie_sizes(abs).iter().map(|&t| (t * t * t - t) as f64).sum();
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - ties / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let dz = w - mean;
    let correction = if dz == 0.0 { 0.0 } else { 0.5 * dz.signum() };
    let z = (dz - correction) / var.sqrt();
    let norm = Normal::standard();
    (2.0 * norm.cdf(z).min(norm.sf(z))).min(1.0)
}

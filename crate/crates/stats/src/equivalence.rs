use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::StatsError;

pub const DEFAULT_MARGIN: f64 = 0.5;
pub const DEFAULT_ALPHA_EACH: f64 = 0.025;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceResult {
    pub n: usize,
    pub mean_diff: f64,
    pub sd: f64,
    /// `(1 - 2 * alpha_each)` confidence interval for the mean difference.
    pub ci95: (f64, f64),
    pub margin: f64,
    pub alpha_each: f64,
    /// One-sided p against `H0: mean <= -margin`.
    pub p_lower: f64,
    /// One-sided p against `H0: mean >= margin`.
    pub p_upper: f64,
    pub equivalent: bool,
    pub degenerate: bool,
}

/// Two one-sided t-tests of the paired differences against `±margin`.
pub fn tost_equivalence(diffs: &[f64], margin: f64, alpha_each: f64) -> Result<EquivalenceResult, StatsError> {
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(StatsError::Invalid(format!("margin {margin} must be a nonnegative number")));
    }
    if !(alpha_each > 0.0 && alpha_each < 0.5) {
        return Err(StatsError::Invalid(format!("alpha {alpha_each} outside (0, 0.5)")));
    }
    if diffs.is_empty() {
        return Err(StatsError::InsufficientData("no differences".into()));
    }
    let n = diffs.len();
    let nf = n as f64;
    let mean = diffs.iter().sum::<f64>() / nf;
    let var = if n > 1 {
        diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (nf - 1.0)
    } else {
        0.0
    };
    let zero_spread = diffs.iter().all(|d| *d == diffs[0]);
    if n < 2 && diffs[0] != 0.0 {
        return Err(StatsError::InsufficientData("need two differences to estimate variance".into()));
    }
    if zero_spread {
        let inside = mean.abs() < margin;
        let p = |ok: bool| if ok { 0.0 } else { 1.0 };
        return Ok(EquivalenceResult {
            n,
            mean_diff: mean,
            sd: 0.0,
            ci95: (mean, mean),
            margin,
            alpha_each,
            p_lower: p(mean > -margin),
            p_upper: p(mean < margin),
            equivalent: inside,
            degenerate: true,
        });
    }
    let sd = var.sqrt();
    let se = sd / nf.sqrt();
    let t = StudentsT::new(0.0, 1.0, nf - 1.0).map_err(|e| StatsError::Invalid(e.to_string()))?;
    let crit = t.inverse_cdf(1.0 - alpha_each);
    let p_lower = t.sf((mean + margin) / se);
    let p_upper = t.cdf((mean - margin) / se);
    Ok(EquivalenceResult {
        n,
        mean_diff: mean,
        sd,
        ci95: (mean - crit * se, mean + crit * se),
        margin,
        alpha_each,
        p_lower,
        p_upper,
        equivalent: p_lower < alpha_each && p_upper < alpha_each,
        degenerate: false,
    })
}

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::StatsError;

/// Two-way random-effects, absolute-agreement, average-measures ICC.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IccResult {
    pub icc: f64,
    /// F-based 95% interval; `None` when the error or rater mean square
    /// leaves it undefined.
    pub ci95: Option<(f64, f64)>,
    pub ci_method: String,
    pub n_subjects: usize,
    pub k_raters: usize,
    pub ms_rows: f64,
    pub ms_cols: f64,
    pub ms_error: f64,
    pub degenerate: bool,
}

/// ICC(2,k) from the two-way ANOVA decomposition of an `n x k` grid
/// (rows are subjects, columns raters).
pub fn icc_2k(matrix: &[Vec<f64>]) -> Result<IccResult, StatsError> {
    let n = matrix.len();
    if n < 2 {
        return Err(StatsError::InsufficientData("need at least two subjects".into()));
    }
    let k = matrix[0].len();
    if k < 2 {
        return Err(StatsError::InsufficientData("need at least two raters".into()));
    }
    if let Some(row) = matrix.iter().find(|r| r.len() != k) {
        return Err(StatsError::LengthMismatch(row.len(), k));
    }
    if matrix.iter().flatten().any(|x| !x.is_finite()) {
        return Err(StatsError::Invalid("missing or non-finite cell".into()));
    }
    let (nf, kf) = (n as f64, k as f64);
    let grand = matrix.iter().flatten().sum::<f64>() / (nf * kf);
    let row_means: Vec<f64> = matrix.iter().map(|r| r.iter().sum::<f64>() / kf).collect();
    let col_means: Vec<f64> = (0..k).map(|j| matrix.iter().map(|r| r[j]).sum::<f64>() / nf).collect();
    let ss_rows = kf * row_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_cols = nf * col_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_err: f64 = matrix
        .iter()
        .enumerate()
        .flat_map(|(i, r)| r.iter().enumerate().map(move |(j, x)| (i, j, *x)))
        .map(|(i, j, x)| (x - row_means[i] - col_means[j] + grand).powi(2))
        .sum();
    let bms = ss_rows / (nf - 1.0);
    let jms = ss_cols / (kf - 1.0);
    let ems = ss_err / ((nf - 1.0) * (kf - 1.0));

    let mut out = IccResult {
        icc: 0.0,
        ci95: None,
        ci_method: "F-based".into(),
        n_subjects: n,
        k_raters: k,
        ms_rows: bms,
        ms_cols: jms,
        ms_error: ems,
        degenerate: false,
    };
    if ss_rows <= 1e-12 * (ss_rows + ss_cols + ss_err) {
        out.degenerate = true;
        return Ok(out);
    }
    out.icc = (bms - ems) / (bms + (jms - ems) / nf);
    out.ci95 = ci_f_based(nf, kf, bms, jms, ems);
    Ok(out)
}

/// Interval for the single-measure coefficient with Satterthwaite degrees of
/// freedom, carried to k raters by the Spearman-Brown step.
fn ci_f_based(n: f64, k: f64, bms: f64, jms: f64, ems: f64) -> Option<(f64, f64)> {
    let icc1 = (bms - ems) / (bms + (k - 1.0) * ems + k * (jms - ems) / n);
    let a = k * icc1 / (n * (1.0 - icc1));
    let b = 1.0 + k * icc1 * (n - 1.0) / (n * (1.0 - icc1));
    let v = (a * jms + b * ems).powi(2) / ((a * jms).powi(2) / (k - 1.0) + (b * ems).powi(2) / ((n - 1.0) * (k - 1.0)));
    if !(v.is_finite() && v > 0.0) {
        return None;
    }
    let f_upper_tail = FisherSnedecor::new(n - 1.0, v).ok()?.inverse_cdf(0.975);
    let f_lower_tail = FisherSnedecor::new(v, n - 1.0).ok()?.inverse_cdf(0.975);
    let c = k * jms + (k * n - k - n) * ems;
    let lo1 = n * (bms - f_upper_tail * ems) / (f_upper_tail * c + n * bms);
    let hi1 = n * (f_lower_tail * bms - ems) / (c + n * f_lower_tail * bms);
    let sb = |r: f64| k * r / (1.0 + (k - 1.0) * r);
    let (lo, hi) = (sb(lo1), sb(hi1));
    (lo.is_finite() && hi.is_finite()).then_some((lo, hi))
}

use serde::{Deserialize, Serialize};

use crate::StatsError;

fn check_p(p: &[f64]) -> Result<(), StatsError> {
    match p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        Some(x) => Err(StatsError::Invalid(format!("p-value {x} outside [0, 1]"))),
        None => Ok(()),
    }
}

/// `min(1, p * m)` for each p; `m` is the family size.
pub fn bonferroni(p_values: &[f64], m: usize) -> Result<Vec<f64>, StatsError> {
    check_p(p_values)?;
    if m < p_values.len() || m == 0 {
        return Err(StatsError::Invalid(format!(
            "family size {m} is smaller than the {} tests",
            p_values.len()
        )));
    }
    Ok(p_values.iter().map(|p| (p * m as f64).min(1.0)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BhResult {
    pub q: f64,
    /// Adjusted values in input order.
    pub adjusted: Vec<f64>,
    /// Rejections in input order.
    pub rejected: Vec<bool>,
}

impl BhResult {
    pub fn rejected_count(&self) -> usize {
        self.rejected.iter().filter(|r| **r).count()
    }
}

/// Step-up false discovery rate control at level `q`.
pub fn benjamini_hochberg(p_values: &[f64], q: f64) -> Result<BhResult, StatsError> {
    check_p(p_values)?;
    if !(q > 0.0 && q < 1.0) {
        return Err(StatsError::Invalid(format!("q = {q} outside (0, 1)")));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));

    let mut cutoff = 0;
    for (i, &k) in order.iter().enumerate() {
        if p_values[k] <= (i + 1) as f64 * q / m as f64 {
            cutoff = i + 1;
        }
    }
    let mut rejected = vec![false; m];
    for &k in &order[..cutoff] {
        rejected[k] = true;
    }

    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for (i, &k) in order.iter().enumerate().rev() {
        running = running.min(p_values[k] * (m as f64 / (i + 1) as f64));
        adjusted[k] = running.min(1.0);
    }
    Ok(BhResult { q, adjusted, rejected })
}

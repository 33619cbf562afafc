use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::StatsError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub lo: f64,
    pub hi: f64,
}

impl MeanCi {
    pub fn half_width(&self) -> f64 {
        (self.hi - self.lo) / 2.0
    }
}

/// Mean with a two-sided 95% Student-t interval.
pub fn mean_ci95(values: &[f64]) -> Result<MeanCi, StatsError> {
    let n = values.len();
    if n < 2 {
        return Err(StatsError::InsufficientData("need at least two values".into()));
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
    let t = StudentsT::new(0.0, 1.0, nf - 1.0)
        .map_err(|e| StatsError::Invalid(e.to_string()))?
        .inverse_cdf(0.975);
    let half = t * sd / nf.sqrt();
    Ok(MeanCi {
        n,
        mean,
        sd,
        lo: mean - half,
        hi: mean + half,
    })
}

/// Linear-interpolation quantile (Hyndman and Fan type 7) of sorted data.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IqrStyle {
    /// `55.0 [47.0;62.0]`
    #[default]
    Bracket,
    /// `134,656 (IQR, 19,130)`
    Width,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MedianIqr {
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl MedianIqr {
    pub fn width(&self) -> f64 {
        self.q3 - self.q1
    }

    pub fn render(&self, style: IqrStyle, decimals: usize) -> String {
        self.render_with(style, decimals, false)
    }

    /// Renders with optional thousands separators.
    pub fn render_with(&self, style: IqrStyle, decimals: usize, grouped: bool) -> String {
        let f = |x: f64| fmt_number(x, decimals, grouped);
        match style {
            IqrStyle::Bracket => format!("{} [{};{}]", f(self.median), f(self.q1), f(self.q3)),
            IqrStyle::Width => format!("{} (IQR, {})", f(self.median), f(self.width())),
        }
    }
}

fn fmt_number(x: f64, decimals: usize, grouped: bool) -> String {
    let s = format!("{x:.decimals$}");
    if !grouped {
        return s;
    }
    let (sign, body) = s.strip_prefix('-').map_or(("", s.as_str()), |b| ("-", b));
    let (int, frac) = body.split_once('.').map_or((body, None), |(i, f)| (i, Some(f)));
    let mut out = String::new();
    for (i, c) in int.chars().enumerate() {
        if i > 0 && (int.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    match frac {
        Some(f) => format!("{sign}{out}.{f}"),
        None => format!("{sign}{out}"),
    }
}

/// Median and type-7 quartiles.
pub fn median_iqr(values: &[f64]) -> Result<MedianIqr, StatsError> {
    if values.is_empty() {
        return Err(StatsError::InsufficientData("no values".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::Invalid("non-finite value".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(MedianIqr {
        n: v.len(),
        median: quantile_type7(&v, 0.5),
        q1: quantile_type7(&v, 0.25),
        q3: quantile_type7(&v, 0.75),
    })
}

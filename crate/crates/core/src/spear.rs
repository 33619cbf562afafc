//! SPEAR rubric arithmetic: rater aggregation, safety-gated overall score,
//! band collapse and stratified summaries. Scores are exact rationals.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpearError {
    #[error("dimension {dimension} score {value} outside 1..5")]
    OutOfRange { dimension: Dimension, value: i64 },
    #[error("empty rater panel")]
    EmptyPanel,
    #[error("even rater panel ({0} raters); median aggregation needs an odd panel, record consensus scores as a single-rater panel instead")]
    EvenPanel(usize),
    #[error("no scores supplied")]
    Empty,
    #[error("invalid exact value {0:?}")]
    BadExact(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dimension {
    S,
    P,
    E,
    A,
    R,
}

impl Dimension {
    pub const ALL: [Dimension; 5] = [Dimension::S, Dimension::P, Dimension::E, Dimension::A, Dimension::R];

    pub fn code(self) -> &'static str {
        match self {
            Dimension::S => "S",
            Dimension::P => "P",
            Dimension::E => "E",
            Dimension::A => "A",
            Dimension::R => "R",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dimension::S => "Safety",
            Dimension::P => "Personalization",
            Dimension::E => "Evidence",
            Dimension::A => "Actionability",
            Dimension::R => "Robustness",
        }
    }

    pub fn parse(s: &str) -> Option<Dimension> {
        Dimension::ALL
            .into_iter()
            .find(|d| d.code().eq_ignore_ascii_case(s) || d.name().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// One rating on the five SPEAR dimensions, each in 1..=5.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct SpearScore {
    #[serde(rename = "S")]
    s: u8,
    #[serde(rename = "P")]
    p: u8,
    #[serde(rename = "E")]
    e: u8,
    #[serde(rename = "A")]
    a: u8,
    #[serde(rename = "R")]
    r: u8,
}

impl SpearScore {
    pub fn new(s: i64, p: i64, e: i64, a: i64, r: i64) -> Result<Self, SpearError> {
        let check = |dimension, value: i64| {
            if (1..=5).contains(&value) {
                Ok(value as u8)
            } else {
                Err(SpearError::OutOfRange { dimension, value })
            }
        };
        Ok(SpearScore {
            s: check(Dimension::S, s)?,
            p: check(Dimension::P, p)?,
            e: check(Dimension::E, e)?,
            a: check(Dimension::A, a)?,
            r: check(Dimension::R, r)?,
        })
    }

    pub fn from_array(v: [i64; 5]) -> Result<Self, SpearError> {
        Self::new(v[0], v[1], v[2], v[3], v[4])
    }

    pub fn get(&self, d: Dimension) -> u8 {
        match d {
            Dimension::S => self.s,
            Dimension::P => self.p,
            Dimension::E => self.e,
            Dimension::A => self.a,
            Dimension::R => self.r,
        }
    }

    pub fn with(self, d: Dimension, value: i64) -> Result<Self, SpearError> {
        let mut v = self.to_array().map(i64::from);
        v[d as usize] = value;
        Self::from_array(v)
    }

    pub fn to_array(&self) -> [u8; 5] {
        [self.s, self.p, self.e, self.a, self.r]
    }

    pub fn overall_raw(&self) -> Exact {
        let sum: i64 = self.to_array().iter().map(|v| i64::from(*v)).sum();
        Exact(Ratio::new(sum, 5))
    }

    pub fn gated(&self) -> GatedOverall {
        safety_gated_overall(self)
    }
}

impl<'de> Deserialize<'de> for SpearScore {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Repr {
            #[serde(rename = "S")]
            s: i64,
            #[serde(rename = "P")]
            p: i64,
            #[serde(rename = "E")]
            e: i64,
            #[serde(rename = "A")]
            a: i64,
            #[serde(rename = "R")]
            r: i64,
        }
        let r = Repr::deserialize(d)?;
        SpearScore::new(r.s, r.p, r.e, r.a, r.r).map_err(serde::de::Error::custom)
    }
}

/// Exact rational score, serialized as a decimal string (`"4.4"`) when the
/// denominator allows it and as `"p/q"` otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Exact(pub Ratio<i64>);

impl Exact {
    pub fn integer(v: i64) -> Self {
        Exact(Ratio::from_integer(v))
    }

    pub fn to_f64(self) -> f64 {
        self.0.to_f64().expect("finite ratio")
    }
}

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.0;
        let mut denom = *r.denom();
        let mut digits = 0usize;
        for p in [2, 5] {
            while denom % p == 0 {
                denom /= p;
            }
        }
        if denom != 1 {
            return write!(f, "{}/{}", r.numer(), r.denom());
        }
        let mut scale = 1i64;
        while (r * Ratio::from_integer(scale)).denom() != &1 {
            scale *= 10;
            digits += 1;
        }
        let digits = digits.max(1);
        let scaled = (r * Ratio::from_integer(10i64.pow(digits as u32))).to_integer();
        let sign = if scaled < 0 { "-" } else { "" };
        let abs = scaled.unsigned_abs();
        let pow = 10u64.pow(digits as u32);
        write!(f, "{sign}{}.{:0width$}", abs / pow, abs % pow, width = digits)
    }
}

impl FromStr for Exact {
    type Err = SpearError;

    fn from_str(s: &str) -> Result<Self, SpearError> {
        let bad = || SpearError::BadExact(s.to_string());
        let t = s.trim();
        if let Some((n, d)) = t.split_once('/') {
            let n: i64 = n.trim().parse().map_err(|_| bad())?;
            let d: i64 = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            return Ok(Exact(Ratio::new(n, d)));
        }
        let (neg, body) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t),
        };
        let (int, frac) = body.split_once('.').unwrap_or((body, ""));
        if int.is_empty() || !int.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let digits = format!("{int}{frac}");
        let n: i64 = digits.parse().map_err(|_| bad())?;
        let d = 10i64.checked_pow(frac.len() as u32).ok_or_else(bad)?;
        let r = Ratio::new(n, d);
        Ok(Exact(if neg { -r } else { r }))
    }
}

impl Serialize for Exact {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Exact {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatedOverall {
    pub raw: Exact,
    pub gated: Exact,
    pub gate_applied: bool,
}

/// `min(raw, S)` when `S < 3`, otherwise `raw`.
pub fn safety_gated_overall(score: &SpearScore) -> GatedOverall {
    let raw = score.overall_raw();
    let s = Exact::integer(i64::from(score.s));
    let gate_applied = score.s < 3;
    let gated = if gate_applied { raw.min(s) } else { raw };
    GatedOverall {
        raw,
        gated,
        gate_applied,
    }
}

/// Scores from one rater panel for one case.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaterPanelScores {
    pub case_id: String,
    pub ratings: Vec<(String, SpearScore)>,
}

/// Per-dimension median of an odd panel.
pub fn median_scores(panel: &[SpearScore]) -> Result<SpearScore, SpearError> {
    if panel.is_empty() {
        return Err(SpearError::EmptyPanel);
    }
    if panel.len().is_multiple_of(2) {
        return Err(SpearError::EvenPanel(panel.len()));
    }
    let mut out = [0i64; 5];
    for (i, d) in Dimension::ALL.into_iter().enumerate() {
        let mut v: Vec<u8> = panel.iter().map(|s| s.get(d)).collect();
        v.sort_unstable();
        out[i] = i64::from(v[v.len() / 2]);
    }
    SpearScore::from_array(out)
}

/// Fraction of scores with `dimension >= 4`.
pub fn high_score_proportion(scores: &[SpearScore], dimension: Dimension) -> Result<Ratio<u64>, SpearError> {
    if scores.is_empty() {
        return Err(SpearError::Empty);
    }
    let high = scores.iter().filter(|s| s.get(dimension) >= 4).count() as u64;
    Ok(Ratio::new(high, scores.len() as u64))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Band {
    Low,
    Neutral,
    High,
}

pub fn collapse_bands(value: i64) -> Result<Band, SpearError> {
    match value {
        1 | 2 => Ok(Band::Low),
        3 => Ok(Band::Neutral),
        4 | 5 => Ok(Band::High),
        _ => Err(SpearError::OutOfRange {
            dimension: Dimension::S,
            value,
        }),
    }
}

/// Column of a stratified summary: one dimension or the gated overall.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SummaryColumn {
    Dimension(Dimension),
    Overall,
}

impl fmt::Display for SummaryColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SummaryColumn::Dimension(d) => write!(f, "{d}"),
            SummaryColumn::Overall => f.write_str("Overall"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StratumSummary {
    pub scene: u8,
    pub arm: String,
    pub column: String,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; `None` for single-record strata.
    pub sd: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredRecord {
    pub scene: u8,
    pub arm: String,
    pub score: SpearScore,
}

/// Mean and sample sd per (scene, arm, column), sorted by that key. Means are
/// computed exactly and converted once.
pub fn stratified_summary(records: &[ScoredRecord]) -> Vec<StratumSummary> {
    let mut strata: BTreeMap<(u8, &str, SummaryColumn), Vec<Ratio<i64>>> = BTreeMap::new();
    for rec in records {
        for d in Dimension::ALL {
            strata
                .entry((rec.scene, rec.arm.as_str(), SummaryColumn::Dimension(d)))
                .or_default()
                .push(Ratio::from_integer(i64::from(rec.score.get(d))));
        }
        strata
            .entry((rec.scene, rec.arm.as_str(), SummaryColumn::Overall))
            .or_default()
            .push(rec.score.gated().gated.0);
    }
    strata
        .into_iter()
        .map(|((scene, arm, column), values)| {
            let n = values.len();
            let mean = values.iter().fold(Ratio::zero(), |acc, v| acc + v) / Ratio::from_integer(n as i64);
            let sd = (n > 1).then(|| {
                let ss = values
                    .iter()
                    .map(|v| (v - mean) * (v - mean))
                    .fold(Ratio::zero(), |acc: Ratio<i64>, v| acc + v);
                (ss / Ratio::from_integer(n as i64 - 1)).to_f64().unwrap().sqrt()
            });
            StratumSummary {
                scene,
                arm: arm.to_string(),
                column: column.to_string(),
                n,
                mean: mean.to_f64().unwrap(),
                sd,
            }
        })
        .collect()
}

/// Editable rubric anchor text; not used by any scoring logic.
pub const RUBRIC_METADATA_JSON: &str = include_str!("spear_rubric.json");

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sc(v: [i64; 5]) -> SpearScore {
        SpearScore::from_array(v).unwrap()
    }

    fn ex(s: &str) -> Exact {
        s.parse().unwrap()
    }

    #[test]
    fn overall_raw_examples() {
        assert_eq!(sc([5, 5, 5, 5, 5]).overall_raw(), ex("5.0"));
        assert_eq!(sc([2, 5, 5, 5, 5]).overall_raw(), ex("4.4"));
        assert_eq!(sc([1, 1, 1, 1, 1]).overall_raw(), ex("1"));
    }

    #[test]
    fn gate_examples() {
        let g = sc([2, 5, 5, 5, 5]).gated();
        assert_eq!((g.raw, g.gated, g.gate_applied), (ex("4.4"), ex("2.0"), true));
        let g = sc([3, 4, 4, 4, 4]).gated();
        assert_eq!((g.raw, g.gated, g.gate_applied), (ex("3.8"), ex("3.8"), false));
        let g = sc([5, 1, 1, 1, 1]).gated();
        assert_eq!((g.raw, g.gated, g.gate_applied), (ex("1.8"), ex("1.8"), false));
    }

    #[test]
    fn gate_applied_with_raw_below_s() {
        let g = sc([2, 1, 1, 1, 1]).gated();
        assert!(g.gate_applied);
        assert_eq!(g.gated, ex("1.2"));
        assert_eq!(g.gated, g.raw);
    }

    #[test]
    fn exact_formatting() {
        assert_eq!(ex("4.4").to_string(), "4.4");
        assert_eq!(Exact::integer(2).to_string(), "2.0");
        assert_eq!(Exact(Ratio::new(1, 4)).to_string(), "0.25");
        assert_eq!(Exact(Ratio::new(1, 3)).to_string(), "1/3");
        assert_eq!(Exact(Ratio::new(-3, 2)).to_string(), "-1.5");
        assert_eq!(serde_json::to_string(&sc([2, 5, 5, 5, 5]).gated()).unwrap(), r#"{"raw":"4.4","gated":"2.0","gate_applied":true}"#);
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(SpearScore::new(0, 3, 3, 3, 3).is_err());
        assert!(SpearScore::new(3, 3, 3, 3, 6).is_err());
        assert!(serde_json::from_str::<SpearScore>(r#"{"S":3,"P":3,"E":3,"A":3,"R":9}"#).is_err());
    }

    #[test]
    fn median_examples() {
        let m = median_scores(&[sc([3, 1, 1, 1, 1]), sc([4, 1, 1, 1, 1]), sc([5, 1, 1, 1, 1])]).unwrap();
        assert_eq!(m.get(Dimension::S), 4);
        assert_eq!(median_scores(&[sc([2, 3, 4, 5, 1])]).unwrap(), sc([2, 3, 4, 5, 1]));
        assert_eq!(median_scores(&[sc([1; 5]), sc([2; 5])]), Err(SpearError::EvenPanel(2)));
        assert_eq!(median_scores(&[]), Err(SpearError::EmptyPanel));
    }

    #[test]
    fn high_score_examples() {
        let s: Vec<_> = [3, 4, 5, 2].iter().map(|v| sc([*v, 1, 1, 1, 1])).collect();
        assert_eq!(high_score_proportion(&s, Dimension::S).unwrap(), Ratio::new(1, 2));
        assert_eq!(high_score_proportion(&[sc([5; 5])], Dimension::R).unwrap(), Ratio::from_integer(1));
        assert_eq!(high_score_proportion(&[sc([2; 5])], Dimension::R).unwrap(), Ratio::from_integer(0));
        assert!(high_score_proportion(&[], Dimension::R).is_err());
    }

    #[test]
    fn bands() {
        assert_eq!(collapse_bands(2), Ok(Band::Low));
        assert_eq!(collapse_bands(3), Ok(Band::Neutral));
        assert_eq!(collapse_bands(5), Ok(Band::High));
        assert!(collapse_bands(0).is_err());
        assert!(collapse_bands(6).is_err());
    }

    #[test]
    fn stratified_examples() {
        let rec = |scene, arm: &str, v| ScoredRecord {
            scene,
            arm: arm.into(),
            score: sc(v),
        };
        let out = stratified_summary(&[rec(1, "omgs", [4; 5]), rec(1, "omgs", [2; 5]), rec(2, "omgs", [3; 5])]);
        let s1: Vec<_> = out.iter().filter(|s| s.scene == 1).collect();
        assert_eq!(s1.len(), 6);
        for s in &s1 {
            assert_eq!(s.mean, 3.0);
            assert!((s.sd.unwrap() - 2f64.sqrt()).abs() < 1e-15, "{s:?}");
        }
        let s2: Vec<_> = out.iter().filter(|s| s.scene == 2).collect();
        assert!(s2.iter().all(|s| s.mean == 3.0 && s.sd.is_none()));

        let same = stratified_summary(&[rec(1, "a", [4; 5]), rec(1, "a", [4; 5])]);
        assert!(same.iter().all(|s| s.sd == Some(0.0)));
    }

    #[test]
    fn rubric_metadata_lists_dimensions() {
        let v: serde_json::Value = serde_json::from_str(RUBRIC_METADATA_JSON).unwrap();
        for d in Dimension::ALL {
            assert!(v["dimensions"][d.code()]["name"].is_string());
        }
    }

    fn score() -> impl Strategy<Value = SpearScore> {
        proptest::array::uniform5(1i64..=5).prop_map(|v| SpearScore::from_array(v).unwrap())
    }

    proptest! {
        #[test]
        fn median_is_permutation_invariant(mut panel in proptest::collection::vec(score(), 1..8), seed in any::<u64>()) {
            if panel.len() % 2 == 0 { panel.pop(); }
            let m = median_scores(&panel).unwrap();
            let n = panel.len();
            panel.rotate_left((seed as usize) % n);
            panel.reverse();
            prop_assert_eq!(median_scores(&panel).unwrap(), m);
        }

        #[test]
        fn exact_round_trips(s in score()) {
            let g = s.gated();
            let back: GatedOverall = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
            prop_assert_eq!(back, g);
            prop_assert_eq!((*g.raw.0.numer() * 5) % *g.raw.0.denom(), 0);
        }
    }
}

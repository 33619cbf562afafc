//! Claim-level citation audit and rule-based capping of the Evidence score.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::deliberation::{DecisionSummary, Transcript};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Supported,
    PartiallySupported,
    Unsupported,
}

impl Verdict {
    pub fn parse(s: &str) -> Option<Verdict> {
        let norm: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        match norm.as_str() {
            "supported" => Some(Verdict::Supported),
            "partiallysupported" | "partial" => Some(Verdict::PartiallySupported),
            "unsupported" => Some(Verdict::Unsupported),
            _ => None,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CapClass {
    NoCap,
    CapAt3,
    CapAtLe2,
}

impl CapClass {
    pub const ALL: [CapClass; 3] = [CapClass::NoCap, CapClass::CapAt3, CapClass::CapAtLe2];
}

impl fmt::Display for CapClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AuditError {
    #[error("claim {claim_id}: no reviewer verdicts")]
    NoVerdicts { claim_id: String },
    #[error("claim {claim_id}: primary reviewers disagree ({first} vs {second}) and no adjudicator verdict is recorded")]
    Unresolved {
        claim_id: String,
        first: Verdict,
        second: Verdict,
    },
    #[error("claim {claim_id}: {count} reviewer verdicts; at most two primary reviewers and one adjudicator")]
    TooManyReviewers { claim_id: String, count: usize },
    #[error("initial Evidence score {0} outside 1..5")]
    InitialOutOfRange(u8),
    #[error("no audit records")]
    Empty,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewerVerdict {
    pub reviewer_id: String,
    pub verdict: Verdict,
}

/// Final verdict for one claim. Verdicts are positional: the first two are the
/// primary reviewers, a third is the adjudicator.
pub fn adjudicate(claim_id: &str, verdicts: &[ReviewerVerdict]) -> Result<Verdict, AuditError> {
    match verdicts {
        [] => Err(AuditError::NoVerdicts {
            claim_id: claim_id.to_string(),
        }),
        [only] => Ok(only.verdict),
        [a, b] if a.verdict == b.verdict => Ok(a.verdict),
        [a, b] => Err(AuditError::Unresolved {
            claim_id: claim_id.to_string(),
            first: a.verdict,
            second: b.verdict,
        }),
        [a, b, _] if a.verdict == b.verdict => Ok(a.verdict),
        [_, _, adjudicator] => Ok(adjudicator.verdict),
        _ => Err(AuditError::TooManyReviewers {
            claim_id: claim_id.to_string(),
            count: verdicts.len(),
        }),
    }
}

/// `min(E, 2)` if any verdict is Unsupported, else `min(E, 3)` if any is
/// PartiallySupported, else `E`.
pub fn apply_evidence_cap(initial_e: u8, verdicts: &[Verdict]) -> (u8, CapClass) {
    if verdicts.contains(&Verdict::Unsupported) {
        (initial_e.min(2), CapClass::CapAtLe2)
    } else if verdicts.contains(&Verdict::PartiallySupported) {
        (initial_e.min(3), CapClass::CapAt3)
    } else {
        (initial_e, CapClass::NoCap)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimCitation {
    pub claim_id: String,
    #[serde(default)]
    pub claim_text: String,
    pub citation_id: String,
    pub verdicts: Vec<ReviewerVerdict>,
    pub final_verdict: Option<Verdict>,
}

impl ClaimCitation {
    pub fn adjudicated(mut self) -> Result<Self, AuditError> {
        self.final_verdict = Some(adjudicate(&self.claim_id, &self.verdicts)?);
        Ok(self)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub case_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arm: Option<String>,
    pub initial_e: u8,
    pub claims: Vec<ClaimCitation>,
    pub capped_e: u8,
    pub cap_class: CapClass,
}

/// Adjudicates every claim and caps `initial_e`.
pub fn audit_case(
    case_id: &str,
    arm: Option<&str>,
    initial_e: u8,
    claims: Vec<ClaimCitation>,
) -> Result<AuditRecord, AuditError> {
    if !(1..=5).contains(&initial_e) {
        return Err(AuditError::InitialOutOfRange(initial_e));
    }
    let claims = claims
        .into_iter()
        .map(ClaimCitation::adjudicated)
        .collect::<Result<Vec<_>, _>>()?;
    let finals: Vec<Verdict> = claims.iter().filter_map(|c| c.final_verdict).collect();
    let (capped_e, cap_class) = apply_evidence_cap(initial_e, &finals);
    Ok(AuditRecord {
        case_id: case_id.to_string(),
        arm: arm.map(str::to_string),
        initial_e,
        claims,
        capped_e,
        cap_class,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyReport {
    pub n: usize,
    pub counts: BTreeMap<CapClass, usize>,
    #[serde(with = "ratio_map")]
    pub proportions: BTreeMap<CapClass, Ratio<u64>>,
}

impl FrequencyReport {
    pub fn proportion(&self, class: CapClass) -> Ratio<u64> {
        self.proportions[&class]
    }

    /// Percentage rendered with up to two decimals, e.g. `98%` or `33.33%`.
    pub fn percent(&self, class: CapClass) -> String {
        format_percent(self.proportion(class))
    }
}

pub fn format_percent(p: Ratio<u64>) -> String {
    let hundredths = (p * Ratio::from_integer(10_000)).round().to_integer();
    let (whole, frac) = (hundredths / 100, hundredths % 100);
    match frac {
        0 => format!("{whole}%"),
        f if f % 10 == 0 => format!("{whole}.{}%", f / 10),
        f => format!("{whole}.{f:02}%"),
    }
}

mod ratio_map {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &BTreeMap<CapClass, Ratio<u64>>, s: S) -> Result<S::Ok, S::Error> {
        let out: BTreeMap<CapClass, String> = m.iter().map(|(k, v)| (*k, format!("{}/{}", v.numer(), v.denom()))).collect();
        out.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<CapClass, Ratio<u64>>, D::Error> {
        let raw = BTreeMap::<CapClass, String>::deserialize(d)?;
        raw.into_iter()
            .map(|(k, v)| {
                let (n, dn) = v.split_once('/').ok_or_else(|| serde::de::Error::custom("expected p/q"))?;
                let n: u64 = n.parse().map_err(serde::de::Error::custom)?;
                let dn: u64 = dn.parse().map_err(serde::de::Error::custom)?;
                Ok((k, Ratio::new(n, dn)))
            })
            .collect()
    }
}

/// Exact share of records in each cap class.
pub fn audit_frequency_report(records: &[AuditRecord]) -> Result<FrequencyReport, AuditError> {
    if records.is_empty() {
        return Err(AuditError::Empty);
    }
    let mut counts: BTreeMap<CapClass, usize> = CapClass::ALL.iter().map(|c| (*c, 0)).collect();
    for r in records {
        *counts.get_mut(&r.cap_class).unwrap() += 1;
    }
    let n = records.len();
    let proportions = counts
        .iter()
        .map(|(c, k)| (*c, Ratio::new(*k as u64, n as u64)))
        .collect();
    Ok(FrequencyReport { n, counts, proportions })
}

/// Which citations enter the audit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CitationScope {
    #[default]
    SummaryOnly,
    TranscriptWide,
}

/// A citation to be reviewed, with where it was invoked.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditableCitation {
    pub location: String,
    pub claim_text: String,
    pub citation_id: String,
}

fn summary_citations(y: &DecisionSummary, prefix: &str, out: &mut Vec<AuditableCitation>) {
    let mut push = |section: String, text: &str, ids: &[String]| {
        for id in ids {
            out.push(AuditableCitation {
                location: format!("{prefix}{section}"),
                claim_text: text.to_string(),
                citation_id: id.clone(),
            });
        }
    };
    push("final_assessment".into(), &y.final_assessment.text, &y.final_assessment.citations);
    push(
        "core_treatment_strategy".into(),
        &y.core_treatment_strategy.text,
        &y.core_treatment_strategy.citations,
    );
    for (i, t) in y.change_triggers.iter().enumerate() {
        push(format!("change_triggers[{i}]"), &t.condition, &t.citations);
    }
}

/// Citations for the audit worksheet. `SummaryOnly` takes the final summary;
/// `TranscriptWide` adds every accepted message, located as `seq:role`.
pub fn collect_citations(transcript: &Transcript, scope: CitationScope) -> Vec<AuditableCitation> {
    use crate::deliberation::MessageBody;
    let mut out = Vec::new();
    match scope {
        CitationScope::SummaryOnly => {
            if let Some(y) = transcript.final_summary() {
                summary_citations(y, "", &mut out);
            }
        }
        CitationScope::TranscriptWide => {
            for m in transcript.accepted() {
                let Some(body) = &m.body else { continue };
                let prefix = format!("{}:{}:", m.seq, m.role.id());
                match body {
                    MessageBody::ChairSummary(y) => summary_citations(y, &prefix, &mut out),
                    MessageBody::InitialAssessment { assessment: text, citations, .. }
                    | MessageBody::Intervention { content: text, citations, .. } => {
                        for id in citations {
                            out.push(AuditableCitation {
                                location: format!("{prefix}{}", if m.round == 0 { "assessment" } else { "intervention" }),
                                claim_text: text.clone(),
                                citation_id: id.clone(),
                            });
                        }
                    }
                    MessageBody::Silence {} => {}
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rv(id: &str, v: Verdict) -> ReviewerVerdict {
        ReviewerVerdict {
            reviewer_id: id.into(),
            verdict: v,
        }
    }

    use Verdict::*;

    #[test]
    fn adjudication_examples() {
        assert_eq!(adjudicate("c", &[rv("a", Supported), rv("b", Supported)]), Ok(Supported));
        assert_eq!(
            adjudicate("c", &[rv("a", Supported), rv("b", Unsupported), rv("x", PartiallySupported)]),
            Ok(PartiallySupported)
        );
        assert!(matches!(
            adjudicate("c", &[rv("a", Supported), rv("b", PartiallySupported)]),
            Err(AuditError::Unresolved { .. })
        ));
        assert_eq!(adjudicate("c", &[rv("a", Unsupported)]), Ok(Unsupported));
        assert!(adjudicate("c", &[]).is_err());
        assert!(adjudicate("c", &vec![rv("a", Supported); 4]).is_err());
    }

    #[test]
    fn cap_examples() {
        assert_eq!(apply_evidence_cap(5, &[Supported, Supported]), (5, CapClass::NoCap));
        assert_eq!(apply_evidence_cap(5, &[Supported, PartiallySupported]), (3, CapClass::CapAt3));
        assert_eq!(apply_evidence_cap(4, &[Unsupported]), (2, CapClass::CapAtLe2));
        assert_eq!(apply_evidence_cap(2, &[PartiallySupported]), (2, CapClass::CapAt3));
    }

    fn record(class: CapClass) -> AuditRecord {
        let v = match class {
            CapClass::NoCap => Supported,
            CapClass::CapAt3 => PartiallySupported,
            CapClass::CapAtLe2 => Unsupported,
        };
        audit_case(
            "c",
            None,
            5,
            vec![ClaimCitation {
                claim_id: "k".into(),
                claim_text: String::new(),
                citation_id: "EB-1".into(),
                verdicts: vec![rv("a", v)],
                final_verdict: None,
            }],
        )
        .unwrap()
    }

    #[test]
    fn frequency_examples() {
        let recs: Vec<_> = (0..4).map(|i| record(if i == 0 { CapClass::CapAtLe2 } else { CapClass::NoCap })).collect();
        let r = audit_frequency_report(&recs).unwrap();
        assert_eq!(r.proportion(CapClass::NoCap), Ratio::new(3, 4));
        assert_eq!(r.percent(CapClass::CapAtLe2), "25%");
        assert_eq!(r.percent(CapClass::CapAt3), "0%");
        assert!(audit_frequency_report(&[]).is_err());
        let back: FrequencyReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn percent_formatting() {
        assert_eq!(format_percent(Ratio::new(98, 100)), "98%");
        assert_eq!(format_percent(Ratio::new(1, 3)), "33.33%");
        assert_eq!(format_percent(Ratio::new(1, 8)), "12.5%");
    }

    fn verdict() -> impl Strategy<Value = Verdict> {
        prop_oneof![Just(Supported), Just(PartiallySupported), Just(Unsupported)]
    }

    proptest! {
        #[test]
        fn cap_laws(e in 1u8..=5, vs in proptest::collection::vec(verdict(), 0..6), extra in verdict()) {
            let (capped, class) = apply_evidence_cap(e, &vs);
            prop_assert!(capped <= e);
            prop_assert_eq!(apply_evidence_cap(capped, &vs), (capped, class));
            let mut more = vs.clone();
            more.push(extra);
            prop_assert!(apply_evidence_cap(e, &more).0 <= capped);
            let mut worse = vs.clone();
            worse.push(Unsupported);
            prop_assert!(apply_evidence_cap(e, &worse).0 <= capped);
        }
    }
}

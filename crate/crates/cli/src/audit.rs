//! `audit`: adjudicate reviewer verdicts and cap Evidence scores.
//!
//! Verdict CSV columns: `case_id, claim_id, citation_id, reviewer_id, verdict`
//! plus optional `arm` and `claim_text`. Reviewers of one claim are taken in
//! file order: the first two are the primary reviewers, a third is the
//! adjudicator. Initial-score CSV columns: `case_id, initial_e`, optional `arm`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use serde::{Deserialize, Serialize};

use omgs_core::audit::{
    audit_case, audit_frequency_report, AuditRecord, CapClass, ClaimCitation, FrequencyReport, ReviewerVerdict, Verdict,
};

use crate::csvio::{write_rows, Table};

pub const RECORDS_FILE: &str = "audit_records.json";
pub const CASES_FILE: &str = "audit_cases.csv";
pub const REPORT_FILE: &str = "audit_report.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditRequest {
    pub verdicts: PathBuf,
    pub initial_e: PathBuf,
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditCaseRow {
    pub case_id: String,
    pub arm: String,
    pub initial_e: u8,
    pub capped_e: u8,
    pub cap_class: CapClass,
    pub claims: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub report: FrequencyReport,
    pub percent: BTreeMap<CapClass, String>,
}

type Key = (String, String);

pub fn parse_initial_scores(table: &Table) -> anyhow::Result<BTreeMap<Key, u8>> {
    table.require(&["case_id", "initial_e"])?;
    let mut out = BTreeMap::new();
    for row in table.rows() {
        let key = (row.str("case_id")?.to_string(), row.opt("arm").unwrap_or("").to_string());
        let e: u8 = row.parse("initial_e")?;
        if !(1..=5).contains(&e) {
            return Err(row.error("initial_e", format!("{e} outside 1..5")).into());
        }
        if out.insert(key.clone(), e).is_some() {
            return Err(row.error("case_id", format!("duplicate initial score for {} {}", key.0, key.1)).into());
        }
    }
    Ok(out)
}

pub fn parse_claims(table: &Table, known: &BTreeMap<Key, u8>) -> anyhow::Result<BTreeMap<Key, Vec<ClaimCitation>>> {
    table.require(&["case_id", "claim_id", "citation_id", "reviewer_id", "verdict"])?;
    let mut out: BTreeMap<Key, Vec<ClaimCitation>> = BTreeMap::new();
    for row in table.rows() {
        let key = (row.str("case_id")?.to_string(), row.opt("arm").unwrap_or("").to_string());
        if !known.contains_key(&key) {
            return Err(row.error("case_id", format!("no initial Evidence score for {} {}", key.0, key.1)).into());
        }
        let raw = row.str("verdict")?;
        let verdict = Verdict::parse(raw).ok_or_else(|| row.error("verdict", format!("unknown verdict {raw:?}")))?;
        let claim_id = row.str("claim_id")?;
        let citation_id = row.str("citation_id")?;
        let claims = out.entry(key).or_default();
        let rv = ReviewerVerdict {
            reviewer_id: row.str("reviewer_id")?.to_string(),
            verdict,
        };
        match claims.iter_mut().find(|c| c.claim_id == claim_id && c.citation_id == citation_id) {
            Some(c) => c.verdicts.push(rv),
            None => claims.push(ClaimCitation {
                claim_id: claim_id.to_string(),
                claim_text: row.opt("claim_text").unwrap_or("").to_string(),
                citation_id: citation_id.to_string(),
                verdicts: vec![rv],
                final_verdict: None,
            }),
        }
    }
    Ok(out)
}

pub fn audit_tables(verdicts: &Table, initial: &Table) -> anyhow::Result<Vec<AuditRecord>> {
    let scores = parse_initial_scores(initial)?;
    let mut claims = parse_claims(verdicts, &scores)?;
    scores
        .iter()
        .map(|((case_id, arm), e)| {
            let c = claims.remove(&(case_id.clone(), arm.clone())).unwrap_or_default();
            let arm = (!arm.is_empty()).then_some(arm.as_str());
            audit_case(case_id, arm, *e, c).map_err(|err| anyhow!("case {case_id}: {err}"))
        })
        .collect()
}

pub fn cmd_audit(req: &AuditRequest) -> anyhow::Result<AuditReport> {
    let records = audit_tables(&Table::read(&req.verdicts)?, &Table::read(&req.initial_e)?)?;
    let report = audit_frequency_report(&records)?;
    let out = AuditReport {
        percent: CapClass::ALL.iter().map(|c| (*c, report.percent(*c))).collect(),
        report,
    };
    write_outputs(&req.out, &records, &out)?;
    Ok(out)
}

fn write_outputs(dir: &Path, records: &[AuditRecord], report: &AuditReport) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    let rows: Vec<AuditCaseRow> = records
        .iter()
        .map(|r| AuditCaseRow {
            case_id: r.case_id.clone(),
            arm: r.arm.clone().unwrap_or_default(),
            initial_e: r.initial_e,
            capped_e: r.capped_e,
            cap_class: r.cap_class,
            claims: r.claims.len(),
        })
        .collect();
    write_rows(&dir.join(CASES_FILE), &rows)?;
    fs::write(dir.join(RECORDS_FILE), serde_json::to_vec_pretty(records)?)?;
    fs::write(dir.join(REPORT_FILE), serde_json::to_vec_pretty(report)?)?;
    Ok(())
}

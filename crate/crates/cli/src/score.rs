//! `score`: per-row safety gating, optional Evidence capping from an audit,
//! then stratified summaries.
//!
//! Score CSV columns: `case_id, arm, scene, S, P, E, A, R`, optional
//! `rater_id`. Caps come from the `audit_cases.csv` written by `audit`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use omgs_core::audit::{apply_evidence_cap, CapClass, Verdict};
use omgs_core::spear::{stratified_summary, Dimension, ScoredRecord, SpearScore, StratumSummary};

use crate::csvio::{write_rows, Table};

pub const SCORED_FILE: &str = "scored.csv";
pub const SUMMARY_CSV: &str = "score_summary.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRequest {
    pub scores: PathBuf,
    #[serde(default)]
    pub audit: Option<PathBuf>,
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoredRow {
    pub case_id: String,
    pub arm: String,
    pub scene: u8,
    pub rater_id: String,
    #[serde(rename = "S")]
    pub s: u8,
    #[serde(rename = "P")]
    pub p: u8,
    #[serde(rename = "E")]
    pub e: u8,
    #[serde(rename = "A")]
    pub a: u8,
    #[serde(rename = "R")]
    pub r: u8,
    pub e_initial: u8,
    pub cap_class: CapClass,
    pub overall_raw: String,
    pub overall_gated: String,
    pub gate_applied: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreOutput {
    pub rows: Vec<ScoredRow>,
    pub summary: Vec<StratumSummary>,
}

/// `(case_id, arm) -> cap class` from an audit case table.
pub fn parse_caps(table: &Table) -> anyhow::Result<BTreeMap<(String, String), CapClass>> {
    table.require(&["case_id", "cap_class"])?;
    let mut out = BTreeMap::new();
    for row in table.rows() {
        let raw = row.str("cap_class")?;
        let class = CapClass::ALL
            .into_iter()
            .find(|c| c.to_string() == raw)
            .ok_or_else(|| row.error("cap_class", format!("unknown cap class {raw:?}")))?;
        out.insert((row.str("case_id")?.to_string(), row.opt("arm").unwrap_or("").to_string()), class);
    }
    Ok(out)
}

fn cap_verdicts(class: CapClass) -> &'static [Verdict] {
    match class {
        CapClass::NoCap => &[],
        CapClass::CapAt3 => &[Verdict::PartiallySupported],
        CapClass::CapAtLe2 => &[Verdict::Unsupported],
    }
}

pub fn score_table(scores: &Table, caps: Option<&BTreeMap<(String, String), CapClass>>) -> anyhow::Result<ScoreOutput> {
    scores.require(&["case_id", "arm", "scene", "S", "P", "E", "A", "R"])?;
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for row in scores.rows() {
        let mut dims = [0i64; 5];
        for (i, d) in Dimension::ALL.into_iter().enumerate() {
            let v: i64 = row.parse(d.code())?;
            if !(1..=5).contains(&v) {
                return Err(row.error(d.code(), format!("{v} outside 1..5")).into());
            }
            dims[i] = v;
        }
        let scene: u8 = row.parse("scene")?;
        if !(1..=5).contains(&scene) {
            return Err(row.error("scene", format!("{scene} outside 1..5")).into());
        }
        let case_id = row.str("case_id")?.to_string();
        let arm = row.str("arm")?.to_string();
        let class = caps
            .and_then(|c| c.get(&(case_id.clone(), arm.clone())).or_else(|| c.get(&(case_id.clone(), String::new()))))
            .copied()
            .unwrap_or(CapClass::NoCap);
        let e_initial = dims[2] as u8;
        let (e, _) = apply_evidence_cap(e_initial, cap_verdicts(class));
        dims[2] = i64::from(e);
        let score = SpearScore::from_array(dims)?;
        let g = score.gated();
        rows.push(ScoredRow {
            case_id,
            arm: arm.clone(),
            scene,
            rater_id: row.opt("rater_id").unwrap_or("").to_string(),
            s: score.get(Dimension::S),
            p: score.get(Dimension::P),
            e: score.get(Dimension::E),
            a: score.get(Dimension::A),
            r: score.get(Dimension::R),
            e_initial,
            cap_class: class,
            overall_raw: g.raw.to_string(),
            overall_gated: g.gated.to_string(),
            gate_applied: g.gate_applied,
        });
        records.push(ScoredRecord { scene, arm, score });
    }
    Ok(ScoreOutput {
        rows,
        summary: stratified_summary(&records),
    })
}

pub fn cmd_score(req: &ScoreRequest) -> anyhow::Result<ScoreOutput> {
    let caps = match &req.audit {
        Some(p) => Some(parse_caps(&Table::read(p)?)?),
        None => None,
    };
    let out = score_table(&Table::read(&req.scores)?, caps.as_ref())?;
    write_outputs(&req.out, &out)?;
    Ok(out)
}

fn write_outputs(dir: &Path, out: &ScoreOutput) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    write_rows(&dir.join(SCORED_FILE), &out.rows)?;
    write_rows(&dir.join(SUMMARY_CSV), &out.summary)?;
    Ok(())
}

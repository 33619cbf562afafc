//! `stats`: statistical procedures over CSV inputs.
//!
//! | test        | columns                                   |
//! |-------------|-------------------------------------------|
//! | wilcoxon    | `key, a, b`, optional `group`             |
//! | tost        | `key, a, b`, optional `group`             |
//! | bh          | `id, p`                                   |
//! | icc         | `subject, rater, value` (long format)     |
//! | spearman    | two numeric columns, `x` and `y` by default |
//! | describe    | one numeric column                        |
//! | contingency | row label, then one count column per level |

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{anyhow, bail};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use omgs_stats::{
    benjamini_hochberg, bonferroni, contingency_test, icc_2k, mean_ci95, median_iqr, spearman_rho, tost_equivalence,
    wilcoxon_signed_rank, ContingencyMethod, ContingencyTable, IqrStyle, PairedSample, WilcoxonMode,
};

use crate::csvio::Table;

fn default_margin() -> f64 {
    omgs_stats::DEFAULT_MARGIN
}
fn default_alpha() -> f64 {
    omgs_stats::DEFAULT_ALPHA_EACH
}
fn default_q() -> f64 {
    0.05
}
fn default_x() -> String {
    "x".into()
}
fn default_y() -> String {
    "y".into()
}
fn default_decimals() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "test", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StatsRequest {
    Wilcoxon {
        input: PathBuf,
        #[serde(default)]
        mode: WilcoxonMode,
        /// Family size for Bonferroni; the number of groups by default.
        #[serde(default)]
        bonferroni: Option<usize>,
    },
    Tost {
        input: PathBuf,
        #[serde(default = "default_margin")]
        margin: f64,
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
    Bh {
        input: PathBuf,
        #[serde(default = "default_q")]
        q: f64,
    },
    Icc {
        input: PathBuf,
    },
    Spearman {
        input: PathBuf,
        #[serde(default = "default_x")]
        x: String,
        #[serde(default = "default_y")]
        y: String,
    },
    Describe {
        input: PathBuf,
        column: String,
        #[serde(default)]
        style: IqrStyle,
        #[serde(default = "default_decimals")]
        decimals: usize,
    },
    Contingency {
        input: PathBuf,
        #[serde(default)]
        method: ContingencyMethod,
    },
}

/// Paired samples keyed by `group` (a single "all" group when absent).
fn paired_groups(t: &Table) -> anyhow::Result<BTreeMap<String, PairedSample>> {
    t.require(&["key", "a", "b"])?;
    let mut raw: BTreeMap<String, Vec<(String, f64, f64)>> = BTreeMap::new();
    for row in t.rows() {
        let g = row.opt("group").unwrap_or("all").to_string();
        raw.entry(g)
            .or_default()
            .push((row.str("key")?.to_string(), row.parse("a")?, row.parse("b")?));
    }
    if raw.is_empty() {
        bail!("{}: no rows", t.name());
    }
    raw.into_iter()
        .map(|(g, pairs)| PairedSample::new(pairs).map(|s| (g.clone(), s)).map_err(|e| anyhow!("group {g}: {e}")))
        .collect()
}

fn numeric_column(t: &Table, column: &str) -> anyhow::Result<Vec<f64>> {
    t.require(&[column])?;
    t.rows().map(|r| r.parse::<f64>(column).map_err(Into::into)).collect()
}

pub fn cmd_stats(req: &StatsRequest) -> anyhow::Result<Value> {
    match req {
        StatsRequest::Wilcoxon { input, mode, bonferroni: m } => {
            let groups = paired_groups(&Table::read(input)?)?;
            let m = m.unwrap_or(groups.len());
            let mut rows = Vec::new();
            for (g, s) in &groups {
                let r = wilcoxon_signed_rank(s, *mode).map_err(|e| anyhow!("group {g}: {e}"))?;
                let adj = bonferroni(&[r.p_value], m)?[0];
                rows.push(json!({"group": g, "pairs": s.len(), "result": r, "p_bonferroni": adj, "family_size": m}));
            }
            Ok(json!({"test": "wilcoxon", "rows": rows}))
        }
        StatsRequest::Tost { input, margin, alpha } => {
            let groups = paired_groups(&Table::read(input)?)?;
            let mut rows = Vec::new();
            for (g, s) in &groups {
                let r = tost_equivalence(&s.diffs(), *margin, *alpha).map_err(|e| anyhow!("group {g}: {e}"))?;
                rows.push(json!({"group": g, "result": r}));
            }
            Ok(json!({"test": "tost", "rows": rows}))
        }
        StatsRequest::Bh { input, q } => {
            let t = Table::read(input)?;
            t.require(&["id", "p"])?;
            let ids: Vec<String> = t.rows().map(|r| r.str("id").map(str::to_string)).collect::<Result<_, _>>()?;
            let p = numeric_column(&t, "p")?;
            let r = benjamini_hochberg(&p, *q)?;
            let rows: Vec<Value> = ids
                .iter()
                .enumerate()
                .map(|(i, id)| json!({"id": id, "p": p[i], "adjusted": r.adjusted[i], "rejected": r.rejected[i]}))
                .collect();
            Ok(json!({"test": "bh", "q": q, "rejected": r.rejected_count(), "rows": rows}))
        }
        StatsRequest::Icc { input } => {
            let t = Table::read(input)?;
            t.require(&["subject", "rater", "value"])?;
            let mut cells: BTreeMap<(String, String), f64> = BTreeMap::new();
            for row in t.rows() {
                let key = (row.str("subject")?.to_string(), row.str("rater")?.to_string());
                if cells.insert(key, row.parse("value")?).is_some() {
                    return Err(row.error("rater", "duplicate subject/rater cell").into());
                }
            }
            let subjects: Vec<&String> = cells.keys().map(|k| &k.0).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
            let raters: Vec<&String> = cells.keys().map(|k| &k.1).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
            let mut grid = Vec::new();
            for s in &subjects {
                let mut row = Vec::new();
                for r in &raters {
                    let v = cells
                        .get(&((*s).clone(), (*r).clone()))
                        .ok_or_else(|| anyhow!("{}: missing rating for subject {s}, rater {r}", t.name()))?;
                    row.push(*v);
                }
                grid.push(row);
            }
            Ok(json!({"test": "icc", "result": icc_2k(&grid)?}))
        }
        StatsRequest::Spearman { input, x, y } => {
            let t = Table::read(input)?;
            let (xs, ys) = (numeric_column(&t, x)?, numeric_column(&t, y)?);
            let rho = match spearman_rho(&xs, &ys) {
                Ok(r) => json!(r),
                Err(omgs_stats::StatsError::Undefined) => Value::Null,
                Err(e) => return Err(e.into()),
            };
            Ok(json!({"test": "spearman", "n": xs.len(), "rho": rho}))
        }
        StatsRequest::Describe {
            input,
            column,
            style,
            decimals,
        } => {
            let v = numeric_column(&Table::read(input)?, column)?;
            let m = median_iqr(&v)?;
            let ci = if v.len() >= 2 { Some(mean_ci95(&v)?) } else { None };
            Ok(json!({
                "test": "describe",
                "column": column,
                "median_iqr": m,
                "rendered": m.render(*style, *decimals),
                "mean_ci95": ci,
            }))
        }
        StatsRequest::Contingency { input, method } => {
            let t = Table::read(input)?;
            if t.headers().len() < 2 {
                bail!("{}: need a label column and at least one count column", t.name());
            }
            let count_cols: Vec<String> = t.headers()[1..].to_vec();
            let mut cells = Vec::new();
            for row in t.rows() {
                cells.push(count_cols.iter().map(|c| row.parse::<u64>(c)).collect::<Result<Vec<_>, _>>()?);
            }
            let table = ContingencyTable::new(cells)?;
            Ok(json!({"test": "contingency", "columns": count_cols, "result": contingency_test(&table, *method)?}))
        }
    }
}

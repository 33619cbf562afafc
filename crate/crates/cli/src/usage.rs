//! `usage`: token and wall-time distributions across runs.

use std::fs;
use std::path::PathBuf;

use anyhow::bail;
use serde::{Deserialize, Serialize};

use omgs_stats::{median_iqr, IqrStyle, MedianIqr};

use crate::run::{read_manifest, RunManifest, MANIFEST_FILE};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub stats: MedianIqr,
    /// `median [q1;q3]`.
    pub bracket: String,
    /// `median (IQR, width)`.
    pub width: String,
}

impl Distribution {
    fn of(values: &[f64], decimals: usize, grouped: bool) -> anyhow::Result<Distribution> {
        let stats = median_iqr(values)?;
        Ok(Distribution {
            bracket: stats.render_with(IqrStyle::Bracket, decimals, grouped),
            width: stats.render_with(IqrStyle::Width, decimals, grouped),
            stats,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UsageReport {
    pub runs: usize,
    pub failed_runs: usize,
    pub total_tokens: Distribution,
    pub wall_seconds: Distribution,
}

/// Manifests from manifest files, run directories, or roots holding run
/// directories, sorted by run id.
pub fn collect_manifests(paths: &[PathBuf]) -> anyhow::Result<Vec<RunManifest>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_file() || p.join(MANIFEST_FILE).is_file() {
            out.push(read_manifest(p)?);
        } else if p.is_dir() {
            let mut dirs: Vec<PathBuf> = fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|d| d.join(MANIFEST_FILE).is_file())
                .collect();
            dirs.sort();
            for d in dirs {
                out.push(read_manifest(&d)?);
            }
        } else {
            bail!("{}: no such file or directory", p.display());
        }
    }
    out.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    out.dedup_by(|a, b| a.run_id == b.run_id);
    Ok(out)
}

pub fn usage_report(manifests: &[RunManifest]) -> anyhow::Result<UsageReport> {
    if manifests.is_empty() {
        bail!("no run manifests found");
    }
    let tokens: Vec<f64> = manifests.iter().map(|m| m.usage.total_tokens as f64).collect();
    let wall: Vec<f64> = manifests.iter().map(|m| m.usage.wall_ms as f64 / 1000.0).collect();
    Ok(UsageReport {
        runs: manifests.len(),
        failed_runs: manifests.iter().filter(|m| m.status == crate::run::RunStatus::Failed).count(),
        total_tokens: Distribution::of(&tokens, 0, true)?,
        wall_seconds: Distribution::of(&wall, 1, false)?,
    })
}

pub fn cmd_usage(paths: &[PathBuf]) -> anyhow::Result<UsageReport> {
    usage_report(&collect_manifests(paths)?)
}

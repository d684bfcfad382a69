//! Bench rows, manifests and per-group aggregates.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gmclp::harness::{summarize, RunRecord, SettingSummary};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub instances: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
    }

    /// Adds or replaces the entry with the same id.
    pub fn upsert(&mut self, entry: ManifestEntry) {
        match self.instances.iter_mut().find(|e| e.id == entry.id) {
            Some(slot) => *slot = entry,
            None => self.instances.push(entry),
        }
    }

    /// Paths relative to the manifest resolve against its directory.
    pub fn resolve(&self, manifest_path: &Path, entry: &ManifestEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            manifest_path.parent().unwrap_or(Path::new(".")).join(&entry.path)
        }
    }
}

/// One CSV/JSON row. Failed runs keep id, setting, status "error" and the
/// message; numeric fields stay empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub instance_id: String,
    pub group: Option<String>,
    pub setting: String,
    pub status: String,
    pub z: Option<f64>,
    pub z_lp: Option<f64>,
    pub z_root: Option<f64>,
    pub lpg_pct: Option<f64>,
    pub gi_pct: Option<f64>,
    pub dv_pct: Option<f64>,
    pub dc_pct: Option<f64>,
    pub nodes: Option<usize>,
    pub cuts: Option<usize>,
    pub presolve_time: Option<f64>,
    pub separation_time: Option<f64>,
    pub total_time: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchOutput {
    pub records: Vec<RunRecord>,
    pub rows: Vec<ReportRow>,
    pub aggregates: Vec<GroupSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: Option<String>,
    #[serde(flatten)]
    pub summary: SettingSummary,
}

pub fn row_from_record(r: &RunRecord, group: Option<String>) -> ReportRow {
    ReportRow {
        instance_id: r.instance_id.clone(),
        group,
        setting: r.setting.name().to_string(),
        status: serde_json::to_value(r.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
        z: Some(r.z),
        z_lp: Some(r.z_lp),
        z_root: Some(r.z_root),
        lpg_pct: r.lpg_pct,
        gi_pct: Some(r.gi_pct),
        dv_pct: Some(r.dv_pct),
        dc_pct: Some(r.dc_pct),
        nodes: Some(r.nodes),
        cuts: Some(r.cuts),
        presolve_time: Some(r.presolve_time),
        separation_time: Some(r.separation_time),
        total_time: Some(r.total_time),
        error: None,
    }
}

pub fn error_row(instance_id: &str, group: Option<String>, setting: &str, msg: String) -> ReportRow {
    ReportRow {
        instance_id: instance_id.to_string(),
        group,
        setting: setting.to_string(),
        status: "error".into(),
        z: None,
        z_lp: None,
        z_root: None,
        lpg_pct: None,
        gi_pct: None,
        dv_pct: None,
        dc_pct: None,
        nodes: None,
        cuts: None,
        presolve_time: None,
        separation_time: None,
        total_time: None,
        error: Some(msg),
    }
}

/// Aggregates successful records per (group, setting).
pub fn aggregate(records: &[(Option<String>, RunRecord)]) -> Vec<GroupSummary> {
    let mut by: BTreeMap<Option<String>, Vec<RunRecord>> = BTreeMap::new();
    for (g, r) in records {
        by.entry(g.clone()).or_default().push(r.clone());
    }
    by.into_iter()
        .flat_map(|(group, rs)| {
            summarize(&rs).into_iter().map(move |summary| GroupSummary { group: group.clone(), summary })
        })
        .collect()
}

pub fn write_csv(rows: &[ReportRow], path: &Path) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn format_table(aggs: &[GroupSummary]) -> String {
    let mut out = format!(
        "{:<12} {:<14} {:>5} {:>6} {:>10} {:>10} {:>8} {:>8} {:>7} {:>7}\n",
        "group", "setting", "runs", "solved", "time_sgm", "nodes_sgm", "LPG%", "GI%", "dV%", "dC%"
    );
    for a in aggs {
        let s = &a.summary;
        let lpg = s.mean_lpg_pct.map_or("-".to_string(), |v| format!("{v:.1}"));
        out.push_str(&format!(
            "{:<12} {:<14} {:>5} {:>6} {:>10.3} {:>10.1} {:>8} {:>8.1} {:>7.1} {:>7.1}\n",
            a.group.as_deref().unwrap_or("-"),
            s.setting.name(),
            s.runs,
            s.solved,
            s.time_sgm,
            s.nodes_sgm,
            lpg,
            s.mean_gi_pct,
            s.mean_dv_pct,
            s.mean_dc_pct
        ));
    }
    out
}

//! Benchmark settings, per-run records and summary statistics.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::bnc::{solve_bnc, BncError, BncOptions, SearchStatus};
use crate::lp::plain_lp_value;
use crate::model::Instance;
use crate::presolve::{AggregationScope, PresolveOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Setting {
    Baseline,
    PresolveOnly,
    Full,
    NoAgg,
    NoDr,
    NoTci,
}

impl Setting {
    pub const ALL: [Setting; 6] =
        [Setting::Baseline, Setting::PresolveOnly, Setting::Full, Setting::NoAgg, Setting::NoDr, Setting::NoTci];

    pub fn name(&self) -> &'static str {
        match self {
            Setting::Baseline => "baseline",
            Setting::PresolveOnly => "presolve-only",
            Setting::Full => "full",
            Setting::NoAgg => "no-agg",
            Setting::NoDr => "no-dr",
            Setting::NoTci => "no-tci",
        }
    }

    pub fn options(&self) -> BncOptions {
        let full = BncOptions::default();
        match self {
            Setting::Baseline => BncOptions { presolve: PresolveOptions::none(), cuts: false, ..full },
            Setting::PresolveOnly => BncOptions {
                presolve: PresolveOptions {
                    aggregation: AggregationScope::NonNegative,
                    p1: true,
                    dominance: false,
                    constraint_reduction: false,
                    transitive_prune: false,
                    p3: true,
                },
                cuts: false,
                ..full
            },
            Setting::Full => full,
            Setting::NoAgg => BncOptions {
                presolve: PresolveOptions { aggregation: AggregationScope::NonNegative, ..full.presolve },
                ..full
            },
            Setting::NoDr => BncOptions {
                presolve: PresolveOptions { dominance: false, constraint_reduction: false, ..full.presolve },
                ..full
            },
            Setting::NoTci => BncOptions { cuts: false, ..full },
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Setting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Setting::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| format!("unknown setting {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance_id: String,
    pub setting: Setting,
    pub status: SearchStatus,
    pub z: f64,
    pub z_exact: String,
    pub open: Vec<usize>,
    /// LP optimum of the original formulation.
    pub z_lp: f64,
    /// Root bound of the chosen setting after separation.
    pub z_root: f64,
    pub lpg_pct: Option<f64>,
    pub gi_pct: f64,
    pub dv_pct: f64,
    pub dc_pct: f64,
    pub nodes: usize,
    pub cuts: usize,
    pub lp_iterations: usize,
    pub presolve_time: f64,
    pub separation_time: f64,
    pub total_time: f64,
}

/// (z_LP - z) / z in percent; undefined unless z > 0.
pub fn lp_gap_pct(z_lp: f64, z: f64) -> Option<f64> {
    (z > 0.0).then(|| (z_lp - z) / z * 100.0)
}

/// Share of the LP gap closed at the root, in percent. A gap below 1e-9
/// counts as fully closed.
pub fn gap_improvement_pct(z_lp: f64, z_root: f64, z: f64) -> f64 {
    let denom = z_lp - z;
    if denom.abs() < 1e-9 {
        return 100.0;
    }
    (z_lp - z_root) / denom * 100.0
}

pub fn run_with_options(
    inst: &Instance,
    instance_id: &str,
    setting: Setting,
    opts: &BncOptions,
) -> Result<RunRecord, BncError> {
    let z_lp = plain_lp_value(inst).ok_or_else(|| BncError::Invalid("relaxation has no optimum".into()))?;
    let (sol, stats) = solve_bnc(inst, opts)?;
    let z = sol.objective.to_f64().unwrap_or(f64::NAN);
    Ok(RunRecord {
        instance_id: instance_id.to_string(),
        setting,
        status: stats.status.unwrap_or(SearchStatus::Optimal),
        z,
        z_exact: sol.objective.to_string(),
        open: sol.open_facilities(),
        z_lp,
        z_root: stats.root_bound,
        lpg_pct: lp_gap_pct(z_lp, z),
        gi_pct: gap_improvement_pct(z_lp, stats.root_bound, z),
        dv_pct: stats.presolve.delta_v_pct,
        dc_pct: stats.presolve.delta_c_pct,
        nodes: stats.nodes,
        cuts: stats.cuts_added,
        lp_iterations: stats.lp_iterations,
        presolve_time: stats.presolve_time,
        separation_time: stats.separation_time,
        total_time: stats.total_time,
    })
}

/// Runs one setting with optional time and node limits.
pub fn run_instance(
    inst: &Instance,
    instance_id: &str,
    setting: Setting,
    time_limit: Option<f64>,
    node_limit: Option<usize>,
) -> Result<RunRecord, BncError> {
    let opts = BncOptions { time_limit, node_limit, ..setting.options() };
    run_with_options(inst, instance_id, setting, &opts)
}

/// exp(mean(ln(v + shift))) - shift.
pub fn shifted_geomean(values: &[f64], shift: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let s: f64 = values.iter().map(|v| (v + shift).ln()).sum();
    (s / values.len() as f64).exp() - shift
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingSummary {
    pub setting: Setting,
    pub runs: usize,
    pub solved: usize,
    pub time_sgm: f64,
    pub nodes_sgm: f64,
    pub mean_lpg_pct: Option<f64>,
    pub mean_gi_pct: f64,
    pub mean_dv_pct: f64,
    pub mean_dc_pct: f64,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Per-setting aggregates, in setting order.
pub fn summarize(records: &[RunRecord]) -> Vec<SettingSummary> {
    let mut by: BTreeMap<Setting, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        by.entry(r.setting).or_default().push(r);
    }
    by.into_iter()
        .map(|(setting, rs)| {
            let col = |f: fn(&RunRecord) -> f64| rs.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let lpg: Vec<f64> = rs.iter().filter_map(|r| r.lpg_pct).collect();
            SettingSummary {
                setting,
                runs: rs.len(),
                solved: rs.iter().filter(|r| r.status == SearchStatus::Optimal).count(),
                time_sgm: shifted_geomean(&col(|r| r.total_time), 1.0),
                nodes_sgm: shifted_geomean(&col(|r| r.nodes as f64), 1.0),
                mean_lpg_pct: (!lpg.is_empty()).then(|| mean(&lpg)),
                mean_gi_pct: mean(&col(|r| r.gi_pct)),
                mean_dv_pct: mean(&col(|r| r.dv_pct)),
                mean_dc_pct: mean(&col(|r| r.dc_pct)),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::uniform_cover_example;

    #[test]
    fn setting_names_round_trip() {
        for s in Setting::ALL {
            assert_eq!(s.name().parse::<Setting>().unwrap(), s);
        }
        assert!("fast".parse::<Setting>().is_err());
    }

    #[test]
    fn setting_switches() {
        assert!(!Setting::Baseline.options().cuts);
        assert_eq!(Setting::Baseline.options().presolve, PresolveOptions::none());
        assert!(!Setting::NoTci.options().cuts);
        assert!(!Setting::NoDr.options().presolve.dominance);
        assert_eq!(Setting::NoAgg.options().presolve.aggregation, AggregationScope::NonNegative);
        assert_eq!(Setting::Full.options(), BncOptions::default());
    }

    #[test]
    fn metric_formulas() {
        assert_eq!(lp_gap_pct(3.0, 2.0), Some(50.0));
        assert_eq!(lp_gap_pct(1.0, 0.0), None);
        assert_eq!(gap_improvement_pct(3.0, 2.5, 2.0), 50.0);
        assert_eq!(gap_improvement_pct(2.0, 2.0, 2.0), 100.0);
    }

    #[test]
    fn geomean_with_shift() {
        assert!((shifted_geomean(&[0.0, 3.0], 1.0) - 1.0).abs() < 1e-12);
        assert!((shifted_geomean(&[5.0], 1.0) - 5.0).abs() < 1e-12);
        assert!((shifted_geomean(&[3.0, 8.0], 1.0) - 5.0).abs() < 1e-12);
        assert_eq!(shifted_geomean(&[], 1.0), 0.0);
    }

    #[test]
    fn run_record_on_uniform_cover() {
        let r = run_instance(&uniform_cover_example(10), "u10", Setting::Full, None, None).unwrap();
        assert_eq!(r.z_exact, "1/10");
        assert!((r.z_lp - 1.0).abs() < 1e-9);
        assert_eq!(r.status, SearchStatus::Optimal);
        let s = summarize(&[r.clone(), RunRecord { setting: Setting::Baseline, ..r }]);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].setting, Setting::Baseline);
    }
}

//! Presolve: isomorphic aggregation, dominance pairs, constraint reduction
//! among negative customers, transitive pruning, and the singleton (P1) and
//! nesting (P3) rules for nonnegative customers.

use std::collections::{HashMap, HashSet, VecDeque};
use std::time::Instant;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::Bits;
use crate::lp::{build_lp_relaxation, LpBuildError, LpMode};
use crate::model::{Customer, Instance, Weight};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PresolveError {
    #[error("dominance pairs contain a cycle through customer {0}")]
    Cycle(usize),
    #[error("lp construction failed: {0}")]
    Lp(#[from] LpBuildError),
}

/// Partition of customers into groups with identical coverage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationMap {
    /// Original index of the first customer of each group.
    pub representatives: Vec<usize>,
    pub groups: Vec<Vec<usize>>,
    pub merged_weights: Vec<Weight>,
    /// Groups whose merged weight is negative.
    pub negative_reps: Vec<usize>,
    /// Nonnegative mass of negative groups, negative mass of the others.
    pub cross_mass: Vec<Weight>,
}

impl AggregationMap {
    pub fn identity(inst: &Instance) -> Self {
        let groups: Vec<Vec<usize>> = (0..inst.customers.len()).map(|j| vec![j]).collect();
        Self::from_groups(inst, groups)
    }

    fn from_groups(inst: &Instance, groups: Vec<Vec<usize>>) -> Self {
        let representatives = groups.iter().map(|g| g[0]).collect();
        let merged_weights: Vec<Weight> =
            groups.iter().map(|g| g.iter().fold(Weight::zero(), |acc, &j| acc + inst.customers[j].weight)).collect();
        let negative_reps = (0..groups.len()).filter(|&k| merged_weights[k].is_negative()).collect();
        let cross_mass = groups
            .iter()
            .zip(&merged_weights)
            .map(|(g, w)| {
                let want_negative = !w.is_negative();
                g.iter()
                    .map(|&j| inst.customers[j].weight)
                    .filter(|v| v.is_negative() == want_negative)
                    .fold(Weight::zero(), |a, b| a + b)
            })
            .collect();
        AggregationMap { representatives, groups, merged_weights, negative_reps, cross_mass }
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AggregationScope {
    Off,
    /// Merge only nonnegative customers with equal coverage.
    NonNegative,
    All,
}

/// Merges customers with identical coverage sets; groups are ordered by
/// first occurrence.
pub fn isomorphic_aggregate(inst: &Instance) -> (Instance, AggregationMap) {
    aggregate_with_scope(inst, AggregationScope::All)
}

pub fn aggregate_with_scope(inst: &Instance, scope: AggregationScope) -> (Instance, AggregationMap) {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut by_key: HashMap<&[usize], usize> = HashMap::new();
    for (j, c) in inst.customers.iter().enumerate() {
        let mergeable = match scope {
            AggregationScope::Off => false,
            AggregationScope::NonNegative => !c.is_negative(),
            AggregationScope::All => true,
        };
        if mergeable {
            if let Some(&k) = by_key.get(c.coverage.as_slice()) {
                groups[k].push(j);
                continue;
            }
            by_key.insert(c.coverage.as_slice(), groups.len());
        }
        groups.push(vec![j]);
    }
    let map = AggregationMap::from_groups(inst, groups);
    let customers = map
        .groups
        .iter()
        .zip(&map.merged_weights)
        .map(|(g, w)| Customer { weight: *w, coverage: inst.customers[g[0]].coverage.clone() })
        .collect();
    let reduced =
        Instance { facility_count: inst.facility_count, customers, p: inst.p, provenance: inst.provenance.clone() };
    (reduced, map)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DominanceSet {
    /// Pairs (j, r), j != r, with I_j contained in I_r.
    pub all_pairs: Vec<(usize, usize)>,
    /// Pairs of `all_pairs` from a nonnegative to a negative customer.
    pub cross_pairs: Vec<(usize, usize)>,
    /// Negative-to-negative pairs chosen by the constraint reduction.
    pub selected_negative_pairs: Vec<(usize, usize)>,
    /// Per negative customer r, facilities i whose row x_r >= y_i is dropped.
    pub removed_constraints: Vec<(usize, Vec<usize>)>,
}

impl DominanceSet {
    pub fn negative_pairs(&self, inst: &Instance) -> Vec<(usize, usize)> {
        self.all_pairs
            .iter()
            .copied()
            .filter(|&(j, r)| inst.customers[j].is_negative() && inst.customers[r].is_negative())
            .collect()
    }

    pub fn removed_count(&self) -> usize {
        self.removed_constraints.iter().map(|(_, v)| v.len()).sum()
    }
}

fn coverage_bits(inst: &Instance) -> Vec<Bits> {
    inst.customers.iter().map(|c| Bits::from_indices(inst.facility_count, &c.coverage)).collect()
}

/// Computes A by pairwise subset tests and its cross part.
pub fn build_dominance_pairs(inst: &Instance) -> DominanceSet {
    let bits = coverage_bits(inst);
    let sizes: Vec<usize> = inst.customers.iter().map(|c| c.coverage.len()).collect();
    let mut all_pairs = Vec::new();
    for j in 0..bits.len() {
        for r in 0..bits.len() {
            if j != r && sizes[j] <= sizes[r] && bits[j].is_subset(&bits[r]) {
                all_pairs.push((j, r));
            }
        }
    }
    let cross_pairs = all_pairs
        .iter()
        .copied()
        .filter(|&(j, r)| !inst.customers[j].is_negative() && inst.customers[r].is_negative())
        .collect();
    DominanceSet { all_pairs, cross_pairs, ..Default::default() }
}

/// Greedy constraint reduction over negative customers. Customers are
/// visited by decreasing coverage size (ties by index); for each r, every
/// later j nested in r that still overlaps the uncovered part of I_r in at
/// least two facilities yields the pair (j, r) and drops x_r >= y_i for
/// those facilities.
pub fn constraint_reduction(
    inst: &Instance,
    negative_pairs: &[(usize, usize)],
) -> (Vec<(usize, usize)>, Vec<(usize, Vec<usize>)>) {
    let pairs: HashSet<(usize, usize)> = negative_pairs.iter().copied().collect();
    let mut order: Vec<usize> = inst.negative_customers();
    order.sort_by(|&a, &b| inst.customers[b].coverage.len().cmp(&inst.customers[a].coverage.len()).then(a.cmp(&b)));
    let bits = coverage_bits(inst);
    let mut selected = Vec::new();
    let mut removed = Vec::new();
    for (pos, &r) in order.iter().enumerate() {
        let mut open = bits[r].clone();
        let mut dropped: Vec<usize> = Vec::new();
        for &j in &order[pos + 1..] {
            if !pairs.contains(&(j, r)) {
                continue;
            }
            if open.intersection_count(&bits[j]) >= 2 {
                for &i in &inst.customers[j].coverage {
                    if open.contains(i) {
                        dropped.push(i);
                    }
                }
                open.difference_with(&bits[j]);
                selected.push((j, r));
            }
        }
        if !dropped.is_empty() {
            dropped.sort_unstable();
            removed.push((r, dropped));
        }
    }
    (selected, removed)
}

/// Transitive reduction of the pair digraph: drops (j, s) whenever s is
/// reachable from j through other pairs. Output keeps input order.
pub fn transitive_prune(pairs: &[(usize, usize)]) -> Result<Vec<(usize, usize)>, PresolveError> {
    let mut ids: HashMap<usize, usize> = HashMap::new();
    let mut nodes: Vec<usize> = Vec::new();
    let mut uniq: Vec<(usize, usize)> = Vec::new();
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    for &(a, b) in pairs {
        if seen.insert((a, b)) {
            uniq.push((a, b));
        }
        for v in [a, b] {
            ids.entry(v).or_insert_with(|| {
                nodes.push(v);
                nodes.len() - 1
            });
        }
    }
    let n = nodes.len();
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut indeg = vec![0usize; n];
    for &(a, b) in &uniq {
        succ[ids[&a]].push(ids[&b]);
        indeg[ids[&b]] += 1;
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut topo = Vec::with_capacity(n);
    while let Some(v) = queue.pop_front() {
        topo.push(v);
        for &w in &succ[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                queue.push_back(w);
            }
        }
    }
    if topo.len() != n {
        let stuck = (0..n).find(|&v| indeg[v] > 0).expect("cycle member");
        return Err(PresolveError::Cycle(nodes[stuck]));
    }
    let mut reach: Vec<Bits> = vec![Bits::new(n); n];
    for &v in topo.iter().rev() {
        let mut acc = Bits::new(n);
        for &w in &succ[v] {
            acc.insert(w);
            acc.union_with(&reach[w]);
        }
        reach[v] = acc;
    }
    Ok(uniq
        .into_iter()
        .filter(|&(a, b)| {
            let (u, v) = (ids[&a], ids[&b]);
            !succ[u].iter().any(|&w| w != v && reach[w].contains(v))
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Substitution {
    pub customer: usize,
    pub facility: usize,
}

/// Nonnegative customers with a single covering facility: x_j becomes y_i.
pub fn apply_p1(inst: &Instance) -> Vec<Substitution> {
    inst.customers
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_negative() && c.coverage.len() == 1)
        .map(|(j, c)| Substitution { customer: j, facility: c.coverage[0] })
        .collect()
}

/// Strengthened cover row: sum of x over `members` plus y over `remainder`
/// bounds x of `customer`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct P3Replacement {
    pub customer: usize,
    pub members: Vec<usize>,
    pub remainder: Vec<usize>,
}

/// For every nonnegative r not replaced by a facility, picks a disjoint
/// family of nonnegative customers strictly nested in r, greedily by
/// decreasing coverage size (ties by index).
pub fn apply_p3(inst: &Instance, substitutions: &[Substitution]) -> Vec<P3Replacement> {
    let subst: HashSet<usize> = substitutions.iter().map(|s| s.customer).collect();
    let bits = coverage_bits(inst);
    let mut cands: Vec<usize> = (0..inst.customers.len())
        .filter(|&j| !inst.customers[j].is_negative() && !inst.customers[j].coverage.is_empty())
        .collect();
    cands.sort_by(|&a, &b| inst.customers[b].coverage.len().cmp(&inst.customers[a].coverage.len()).then(a.cmp(&b)));
    let mut out = Vec::new();
    for (r, c) in inst.customers.iter().enumerate() {
        if c.is_negative() || subst.contains(&r) || c.coverage.len() < 2 {
            continue;
        }
        let mut used = Bits::new(inst.facility_count);
        let mut members = Vec::new();
        for &j in &cands {
            let cj = &inst.customers[j];
            if j == r || cj.coverage.len() >= c.coverage.len() || !bits[j].is_subset(&bits[r]) {
                continue;
            }
            if bits[j].is_disjoint(&used) {
                used.union_with(&bits[j]);
                members.push(j);
            }
        }
        if members.is_empty() {
            continue;
        }
        let remainder = c.coverage.iter().copied().filter(|&i| !used.contains(i)).collect();
        out.push(P3Replacement { customer: r, members, remainder });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresolveOptions {
    pub aggregation: AggregationScope,
    pub p1: bool,
    pub dominance: bool,
    pub constraint_reduction: bool,
    pub transitive_prune: bool,
    pub p3: bool,
}

impl PresolveOptions {
    pub fn none() -> Self {
        PresolveOptions {
            aggregation: AggregationScope::Off,
            p1: false,
            dominance: false,
            constraint_reduction: false,
            transitive_prune: false,
            p3: false,
        }
    }

    pub fn all() -> Self {
        PresolveOptions {
            aggregation: AggregationScope::All,
            p1: true,
            dominance: true,
            constraint_reduction: true,
            transitive_prune: true,
            p3: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresolveArtifacts {
    pub aggregation: AggregationMap,
    pub substitutions: Vec<Substitution>,
    pub dominance: DominanceSet,
    /// Pairs that become rows x_j <= x_r.
    pub dominance_rows: Vec<(usize, usize)>,
    pub p3: Vec<P3Replacement>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepTimes {
    pub aggregate: f64,
    pub p1: f64,
    pub dominance: f64,
    pub constraint_reduction: f64,
    pub transitive_prune: f64,
    pub p3: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PresolveReport {
    pub variables_before: usize,
    pub variables_after: usize,
    pub constraints_before: usize,
    pub constraints_after: usize,
    pub delta_v_pct: f64,
    pub delta_c_pct: f64,
    pub step_times: StepTimes,
    pub total_time: f64,
}

fn reduction_pct(before: usize, after: usize) -> f64 {
    if before == 0 {
        return 0.0;
    }
    ((before as f64 - after as f64) / before as f64 * 100.0).clamp(0.0, 100.0)
}

pub fn presolve_pipeline(
    inst: &Instance,
    options: &PresolveOptions,
) -> Result<(Instance, PresolveArtifacts, PresolveReport), PresolveError> {
    let start = Instant::now();
    let mut times = StepTimes::default();
    let mut tick = Instant::now();
    let mut lap = |slot: &mut f64| {
        *slot = tick.elapsed().as_secs_f64();
        tick = Instant::now();
    };

    let (reduced, aggregation) = aggregate_with_scope(inst, options.aggregation);
    lap(&mut times.aggregate);
    let substitutions = if options.p1 { apply_p1(&reduced) } else { Vec::new() };
    lap(&mut times.p1);
    let mut dominance = if options.dominance { build_dominance_pairs(&reduced) } else { DominanceSet::default() };
    lap(&mut times.dominance);
    if options.dominance && options.constraint_reduction {
        let (selected, removed) = constraint_reduction(&reduced, &dominance.negative_pairs(&reduced));
        dominance.selected_negative_pairs = selected;
        dominance.removed_constraints = removed;
    }
    lap(&mut times.constraint_reduction);
    let mut dominance_rows: Vec<(usize, usize)> = dominance
        .cross_pairs
        .iter()
        .chain(&dominance.selected_negative_pairs)
        .copied()
        .filter(|&(j, _)| !reduced.customers[j].coverage.is_empty())
        .collect();
    if options.transitive_prune {
        dominance_rows = transitive_prune(&dominance_rows)?;
    }
    lap(&mut times.transitive_prune);
    let p3 = if options.p3 { apply_p3(&reduced, &substitutions) } else { Vec::new() };
    lap(&mut times.p3);

    let artifacts = PresolveArtifacts { aggregation, substitutions, dominance, dominance_rows, p3 };
    let before = build_lp_relaxation(inst, None, LpMode { aggregated_cover: false, dominance_rows: false })?;
    let after = build_lp_relaxation(
        &reduced,
        Some(&artifacts),
        LpMode { aggregated_cover: false, dominance_rows: options.dominance },
    )?;
    let report = PresolveReport {
        variables_before: before.column_count(),
        variables_after: after.column_count(),
        constraints_before: before.row_count(),
        constraints_after: after.row_count(),
        delta_v_pct: reduction_pct(before.column_count(), after.column_count()),
        delta_c_pct: reduction_pct(before.row_count(), after.row_count()),
        step_times: times,
        total_time: start.elapsed().as_secs_f64(),
    };
    Ok((reduced, artifacts, report))
}

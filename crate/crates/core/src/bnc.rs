//! Best-bound branch-and-cut over the facility variables with
//! two-customer cut separation, reduced-cost fixing and the covering
//! propagation rule (a nonnegative customer fixed uncovered closes every
//! facility that covers it).

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::sync::Arc;
use std::time::Instant;

use num_integer::Integer;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::Bits;
use crate::lp::{
    build_lp_relaxation, simplex_solve_with, Basis, LpBuildError, LpMode, LpModel, LpPoint, LpStatus, Relation, RowTag,
    SolveOptions,
};
use crate::model::{solution_from_open_set, validate_instance, Instance, ModelError, Solution, Weight};
use crate::presolve::{presolve_pipeline, PresolveError, PresolveOptions, PresolveReport};

const INTEGRALITY_TOL: f64 = 1e-6;
const PRUNE_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BncError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("no fractional facility to branch on")]
    Integral,
    #[error(transparent)]
    Presolve(#[from] PresolveError),
    #[error("lp construction failed: {0}")]
    Lp(#[from] LpBuildError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A candidate pair (j, r) with j nonnegative, r negative and at least two
/// shared facilities, together with I_j \ I_r.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidatePair {
    pub j: usize,
    pub r: usize,
    pub diff: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct CutPool {
    pub candidates: Vec<CandidatePair>,
    /// Candidate index to LP row key of the cuts currently in the LP.
    pub active: HashMap<usize, u64>,
    pub tolerance: f64,
}

impl CutPool {
    pub fn empty() -> Self {
        CutPool { candidates: Vec::new(), active: HashMap::new(), tolerance: 1e-6 }
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// Builds the candidate set. With `exclude_nested`, pairs whose coverage
/// sets are nested are skipped because their cut is a dominance row.
pub fn build_candidate_pairs(inst: &Instance, exclude_nested: bool) -> CutPool {
    let bits: Vec<Bits> = inst.customers.iter().map(|c| Bits::from_indices(inst.facility_count, &c.coverage)).collect();
    let neg = inst.negative_customers();
    let mut candidates = Vec::new();
    for j in inst.nonnegative_customers() {
        if inst.customers[j].coverage.len() < 2 {
            continue;
        }
        for &r in &neg {
            if bits[j].intersection_count(&bits[r]) < 2 {
                continue;
            }
            if exclude_nested && bits[j].is_subset(&bits[r]) {
                continue;
            }
            let diff = inst.customers[j].coverage.iter().copied().filter(|&i| !bits[r].contains(i)).collect();
            candidates.push(CandidatePair { j, r, diff });
        }
    }
    CutPool { candidates, active: HashMap::new(), tolerance: 1e-6 }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViolatedCut {
    pub candidate: usize,
    pub violation: f64,
}

/// Every inactive candidate violated by more than the pool tolerance,
/// by decreasing violation (ties by candidate index).
pub fn separate_two_customer(pool: &CutPool, point: &LpPoint) -> Vec<ViolatedCut> {
    let mut out: Vec<ViolatedCut> = pool
        .candidates
        .iter()
        .enumerate()
        .filter(|(k, _)| !pool.active.contains_key(k))
        .filter_map(|(k, c)| {
            let rhs: f64 = point.x[c.r] + c.diff.iter().map(|&i| point.y[i]).sum::<f64>();
            let violation = point.x[c.j] - rhs;
            (violation > pool.tolerance).then_some(ViolatedCut { candidate: k, violation })
        })
        .collect();
    out.sort_by(|a, b| b.violation.total_cmp(&a.violation).then(a.candidate.cmp(&b.candidate)));
    out
}

#[derive(Debug, Clone, Default)]
pub struct Node {
    pub fixed_one: Vec<usize>,
    pub fixed_zero: Vec<usize>,
    /// Nonnegative customers whose x is fixed at zero.
    pub fixed_x_zero: Vec<usize>,
    pub parent_bound: f64,
    pub depth: usize,
    pub warm_start: Option<Arc<Basis>>,
}

impl Node {
    pub fn root() -> Self {
        Node { parent_bound: f64::INFINITY, ..Default::default() }
    }
}

/// Closes the facilities of every customer in `fixed_x_zero`. Returns None
/// when fewer than p facilities remain open or free.
pub fn propagate_p4(mut node: Node, inst: &Instance) -> Option<Node> {
    let mut zero: HashSet<usize> = node.fixed_zero.iter().copied().collect();
    for &r in &node.fixed_x_zero {
        zero.extend(inst.customers[r].coverage.iter().copied());
    }
    if node.fixed_one.iter().any(|i| zero.contains(i)) {
        return None;
    }
    if inst.facility_count - zero.len() < inst.p || node.fixed_one.len() > inst.p {
        return None;
    }
    let mut z: Vec<usize> = zero.into_iter().collect();
    z.sort_unstable();
    node.fixed_zero = z;
    Some(node)
}

/// Opens the p facilities with the largest values, ties by index.
pub fn primal_round_heuristic(inst: &Instance, ybar: &[f64]) -> Solution {
    primal_round_with_fixings(inst, ybar, &[], &[])
}

pub fn primal_round_with_fixings(inst: &Instance, ybar: &[f64], fixed_one: &[usize], fixed_zero: &[usize]) -> Solution {
    solution_from_open_set(inst, &round_open_set(inst, ybar, fixed_one, fixed_zero))
        .expect("rounded set has exactly p facilities")
}

fn round_open_set(inst: &Instance, ybar: &[f64], fixed_one: &[usize], fixed_zero: &[usize]) -> Vec<usize> {
    let mut chosen: Vec<usize> = fixed_one.to_vec();
    let mut blocked = vec![false; inst.facility_count];
    for &i in fixed_one.iter().chain(fixed_zero) {
        blocked[i] = true;
    }
    let mut order: Vec<usize> = (0..inst.facility_count).filter(|&i| !blocked[i]).collect();
    order.sort_by(|&a, &b| ybar[b].total_cmp(&ybar[a]).then(a.cmp(&b)));
    let mut fill = fixed_zero.to_vec();
    fill.sort_unstable();
    for i in order.into_iter().chain(fill) {
        if chosen.len() >= inst.p {
            break;
        }
        chosen.push(i);
    }
    chosen.truncate(inst.p);
    chosen.sort_unstable();
    chosen
}

/// Most fractional facility value, ties by lowest index.
pub fn select_branch_variable(y: &[f64]) -> Result<usize, BncError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in y.iter().enumerate() {
        if (v - v.round()).abs() <= INTEGRALITY_TOL {
            continue;
        }
        let dist = (v - 0.5).abs();
        if best.map_or(true, |(_, d)| dist < d - 1e-12) {
            best = Some((i, dist));
        }
    }
    best.map(|(i, _)| i).ok_or(BncError::Integral)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeSelection {
    BestBound,
    DepthFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BncOptions {
    pub presolve: PresolveOptions,
    pub aggregated_cover: bool,
    pub cuts: bool,
    pub root_cut_rounds: usize,
    pub node_cut_rounds: usize,
    pub cuts_per_round: usize,
    pub cut_tolerance: f64,
    pub purge_after: usize,
    pub purge_slack: f64,
    pub reduced_cost_fixing: bool,
    pub node_selection: NodeSelection,
    pub time_limit: Option<f64>,
    pub node_limit: Option<usize>,
}

impl Default for BncOptions {
    fn default() -> Self {
        BncOptions {
            presolve: PresolveOptions::all(),
            aggregated_cover: false,
            cuts: true,
            root_cut_rounds: 10,
            node_cut_rounds: 2,
            cuts_per_round: 200,
            cut_tolerance: 1e-6,
            purge_after: 50,
            purge_slack: 1e-3,
            reduced_cost_fixing: true,
            node_selection: NodeSelection::BestBound,
            time_limit: None,
            node_limit: None,
        }
    }
}

impl BncOptions {
    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(k: &str, v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("bad value {v:?} for {k}"))
        }
        fn flag(k: &str, v: &str) -> Result<bool, String> {
            match v {
                "true" | "on" | "1" => Ok(true),
                "false" | "off" | "0" => Ok(false),
                _ => Err(format!("bad value {v:?} for {k}")),
            }
        }
        match key {
            "cuts" => self.cuts = flag(key, value)?,
            "root_cut_rounds" => self.root_cut_rounds = num(key, value)?,
            "node_cut_rounds" => self.node_cut_rounds = num(key, value)?,
            "cuts_per_round" => self.cuts_per_round = num(key, value)?,
            "cut_tolerance" => self.cut_tolerance = num(key, value)?,
            "purge_after" => self.purge_after = num(key, value)?,
            "purge_slack" => self.purge_slack = num(key, value)?,
            "reduced_cost_fixing" => self.reduced_cost_fixing = flag(key, value)?,
            "aggregated_cover" => self.aggregated_cover = flag(key, value)?,
            "time_limit" => self.time_limit = Some(num(key, value)?),
            "node_limit" => self.node_limit = Some(num(key, value)?),
            "node_selection" => {
                self.node_selection = match value {
                    "best-bound" => NodeSelection::BestBound,
                    "depth-first" => NodeSelection::DepthFirst,
                    _ => return Err(format!("bad value {value:?} for {key}")),
                }
            }
            "p1" => self.presolve.p1 = flag(key, value)?,
            "p3" => self.presolve.p3 = flag(key, value)?,
            "dominance" => self.presolve.dominance = flag(key, value)?,
            "constraint_reduction" => self.presolve.constraint_reduction = flag(key, value)?,
            "transitive_prune" => self.presolve.transitive_prune = flag(key, value)?,
            _ => return Err(format!("unknown option {key}")),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchStatus {
    Optimal,
    NodeLimit,
    TimeLimit,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub status: Option<SearchStatus>,
    pub nodes: usize,
    /// Root LP bound of the presolved model before any cut.
    pub root_lp_bound: f64,
    /// Root bound after the last separation round.
    pub root_bound: f64,
    pub incumbent: f64,
    /// Best bound over unexplored nodes at termination.
    pub best_bound: f64,
    pub cuts_added: usize,
    pub cuts_purged: usize,
    pub root_cuts: usize,
    pub separation_rounds: usize,
    pub lp_solves: usize,
    pub lp_iterations: usize,
    pub lp_failures: usize,
    pub fixed_by_reduced_cost: usize,
    /// Largest excess of a node LP value over its parent's bound.
    pub max_bound_increase: f64,
    pub max_depth: usize,
    pub presolve_time: f64,
    pub separation_time: f64,
    pub total_time: f64,
    pub presolve: PresolveReport,
}

struct Queued {
    bound: f64,
    seq: u64,
    node: Node,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound.total_cmp(&other.bound).then(other.seq.cmp(&self.seq))
    }
}

enum Frontier {
    Best(BinaryHeap<Queued>),
    Depth(Vec<Queued>),
}

impl Frontier {
    fn push(&mut self, q: Queued) {
        match self {
            Frontier::Best(h) => h.push(q),
            Frontier::Depth(s) => s.push(q),
        }
    }

    fn pop(&mut self) -> Option<Queued> {
        match self {
            Frontier::Best(h) => h.pop(),
            Frontier::Depth(s) => s.pop(),
        }
    }

    fn best_bound(&self) -> Option<f64> {
        match self {
            Frontier::Best(h) => h.peek().map(|q| q.bound),
            Frontier::Depth(s) => s.iter().map(|q| q.bound).max_by(|a, b| a.total_cmp(b)),
        }
    }
}

/// Objective step between distinct integer solutions: 1 / lcm of the
/// weight denominators, or 0 when that is not representable.
fn objective_granularity(inst: &Instance) -> f64 {
    let mut l: i64 = 1;
    for c in &inst.customers {
        let d = *c.weight.denom();
        let g = l.gcd(&d);
        match (l / g).checked_mul(d) {
            Some(v) if v <= 1_000_000 => l = v,
            _ => return 0.0,
        }
    }
    1.0 / l as f64
}

struct Incumbent {
    value: Weight,
    value_f: f64,
    open: Vec<usize>,
}

struct Search<'a> {
    reduced: &'a Instance,
    opts: &'a BncOptions,
    model: LpModel,
    pool: CutPool,
    granularity: f64,
    incumbent: Option<Incumbent>,
    slack_runs: HashMap<u64, usize>,
    stats: SearchStats,
    start: Instant,
}

impl Search<'_> {
    fn prunable(&self, bound: f64) -> bool {
        let Some(inc) = &self.incumbent else { return false };
        if self.granularity > 0.0 {
            bound < inc.value_f + self.granularity - PRUNE_TOL
        } else {
            bound <= inc.value_f + 1e-9
        }
    }

    fn offer(&mut self, open: Vec<usize>) {
        if let Some(inc) = &self.incumbent {
            if inc.open == open {
                return;
            }
        }
        let sol = solution_from_open_set(self.reduced, &open).expect("feasible open set");
        let better = self.incumbent.as_ref().map_or(true, |inc| sol.objective > inc.value);
        if better {
            log::debug!("incumbent {} at node {}", sol.objective, self.stats.nodes);
            self.incumbent =
                Some(Incumbent { value: sol.objective, value_f: sol.objective.to_f64().unwrap_or(f64::NAN), open });
        }
    }

    fn node_bounds(&self, node: &Node) -> Vec<(f64, f64)> {
        let mut b = self.model.default_bounds();
        for &i in &node.fixed_one {
            let c = self.model.facility_col(i);
            b[c] = (1.0, 1.0);
        }
        for &i in &node.fixed_zero {
            let c = self.model.facility_col(i);
            b[c] = (0.0, 0.0);
        }
        for &r in &node.fixed_x_zero {
            if let Some(c) = self.model.customer_col(r) {
                b[c] = (0.0, 0.0);
            }
        }
        b
    }

    fn solve_lp(&mut self, bounds: &[(f64, f64)], warm: Option<&Basis>) -> crate::lp::LpSolution {
        let mut sol = simplex_solve_with(
            &self.model,
            &SolveOptions { bounds: Some(bounds), warm_start: warm, max_iterations: None },
        );
        self.stats.lp_solves += 1;
        self.stats.lp_iterations += sol.iterations;
        if matches!(sol.status, LpStatus::IterationLimit | LpStatus::NumericalFailure) && warm.is_some() {
            sol = simplex_solve_with(
                &self.model,
                &SolveOptions { bounds: Some(bounds), warm_start: None, max_iterations: None },
            );
            self.stats.lp_solves += 1;
            self.stats.lp_iterations += sol.iterations;
        }
        if sol.is_optimal() {
            self.track_cut_slack(&sol);
        }
        sol
    }

    /// Counts consecutive slack LPs per cut and purges long-inactive cuts
    /// whose logical is basic, keeping stored bases consistent.
    fn track_cut_slack(&mut self, sol: &crate::lp::LpSolution) {
        if self.pool.active.is_empty() || self.opts.purge_after == 0 {
            return;
        }
        let mut purge: HashSet<u64> = HashSet::new();
        for (r, row) in self.model.rows().iter().enumerate() {
            if row.tag != RowTag::TwoCustomer {
                continue;
            }
            let act: f64 = row.coeffs.iter().map(|&(c, a)| a * sol.x[c]).sum();
            let slack = match row.relation {
                Relation::Le => row.rhs - act,
                Relation::Ge => act - row.rhs,
                Relation::Eq => 0.0,
            };
            let run = self.slack_runs.entry(row.key).or_insert(0);
            if sol.row_basic[r] && slack > self.opts.purge_slack {
                *run += 1;
                if *run >= self.opts.purge_after {
                    purge.insert(row.key);
                }
            } else {
                *run = 0;
            }
        }
        if !purge.is_empty() {
            self.model.remove_rows(&purge);
            self.pool.active.retain(|_, key| !purge.contains(key));
            for k in &purge {
                self.slack_runs.remove(k);
            }
            self.stats.cuts_purged += purge.len();
        }
    }

    fn separate(&mut self, point: &LpPoint) -> usize {
        let t = Instant::now();
        let found = separate_two_customer(&self.pool, point);
        let mut added = 0;
        for v in found.into_iter().take(self.opts.cuts_per_round) {
            let cand = self.pool.candidates[v.candidate].clone();
            if let Some(key) = self.model.add_two_customer_row(cand.j, cand.r, &cand.diff) {
                self.pool.active.insert(v.candidate, key);
                added += 1;
            }
        }
        self.stats.cuts_added += added;
        self.stats.separation_time += t.elapsed().as_secs_f64();
        added
    }

    fn out_of_budget(&self) -> Option<SearchStatus> {
        if let Some(limit) = self.opts.node_limit {
            if self.stats.nodes >= limit {
                return Some(SearchStatus::NodeLimit);
            }
        }
        if let Some(limit) = self.opts.time_limit {
            if self.start.elapsed().as_secs_f64() >= limit {
                return Some(SearchStatus::TimeLimit);
            }
        }
        None
    }

    /// Processes one node and returns the children to enqueue.
    fn process(&mut self, node: Node) -> Vec<Node> {
        let Some(node) = propagate_p4(node, self.reduced) else { return Vec::new() };
        let is_root = self.stats.nodes == 0;
        self.stats.nodes += 1;
        self.stats.max_depth = self.stats.max_depth.max(node.depth);
        let bounds = self.node_bounds(&node);
        let mut warm = node.warm_start.clone();
        let rounds = if !self.opts.cuts || self.pool.is_empty() {
            0
        } else if is_root {
            self.opts.root_cut_rounds
        } else {
            self.opts.node_cut_rounds
        };
        let mut round = 0;
        let (sol, point) = loop {
            let sol = self.solve_lp(&bounds, warm.as_deref());
            match sol.status {
                LpStatus::Optimal => {}
                LpStatus::Infeasible => {
                    if is_root {
                        self.stats.root_lp_bound = f64::NEG_INFINITY;
                        self.stats.root_bound = f64::NEG_INFINITY;
                    }
                    return Vec::new();
                }
                _ => {
                    self.stats.lp_failures += 1;
                    return self.blind_branch(&node);
                }
            }
            if is_root && round == 0 {
                self.stats.root_lp_bound = sol.objective;
            }
            if is_root {
                self.stats.root_bound = sol.objective;
            }
            if round == 0 && node.parent_bound.is_finite() {
                self.stats.max_bound_increase = self.stats.max_bound_increase.max(sol.objective - node.parent_bound);
            }
            let point = self.model.point(&sol.x);
            self.offer(round_open_set(self.reduced, &point.y, &node.fixed_one, &node.fixed_zero));
            let bound = sol.objective.min(node.parent_bound);
            if (!is_root && self.prunable(bound)) || round >= rounds || y_integral(&point.y) {
                break (sol, point);
            }
            let added = self.separate(&point);
            self.stats.separation_rounds += 1;
            if is_root {
                self.stats.root_cuts += added;
            }
            if added == 0 {
                break (sol, point);
            }
            round += 1;
            warm = sol.basis.map(Arc::new);
        };
        let bound = sol.objective.min(node.parent_bound);
        if self.prunable(bound) || node.fixed_one.len() == self.reduced.p {
            return Vec::new();
        }
        let basis = sol.basis.clone().map(Arc::new);
        let (mut extra_zero, mut extra_one, mut extra_x) = (Vec::new(), Vec::new(), Vec::new());
        if self.opts.reduced_cost_fixing && self.incumbent.is_some() {
            for i in 0..self.reduced.facility_count {
                let c = self.model.facility_col(i);
                let (lo, up) = bounds[c];
                if lo == up {
                    continue;
                }
                let rc = sol.reduced_costs[c];
                if sol.x[c] <= 1e-9 && rc < 0.0 && self.prunable(sol.objective + rc) {
                    extra_zero.push(i);
                } else if sol.x[c] >= 1.0 - 1e-9 && rc > 0.0 && self.prunable(sol.objective - rc) {
                    extra_one.push(i);
                }
            }
            for r in 0..self.reduced.customers.len() {
                if self.reduced.customers[r].is_negative() {
                    continue;
                }
                let Some(c) = self.model.customer_col(r) else { continue };
                let (lo, up) = bounds[c];
                let rc = sol.reduced_costs[c];
                if lo < up && sol.x[c] <= 1e-9 && rc < 0.0 && self.prunable(sol.objective + rc) {
                    extra_x.push(r);
                }
            }
            self.stats.fixed_by_reduced_cost += extra_zero.len() + extra_one.len() + extra_x.len();
        }
        let mut base = node.clone();
        base.fixed_zero.extend(extra_zero);
        base.fixed_one.extend(extra_one);
        base.fixed_x_zero.extend(extra_x);
        base.parent_bound = bound;
        base.depth = node.depth + 1;
        base.warm_start = basis;
        if base.fixed_one.len() > self.reduced.p {
            return Vec::new();
        }
        let branch = match select_branch_variable(&point.y) {
            Ok(i) if !base.fixed_zero.contains(&i) && !base.fixed_one.contains(&i) => i,
            _ => {
                // Integral y (or y fixed by reduced costs): the LP value is
                // attained by the completion unless covering rows are
                // aggregated, so split on an open free facility instead.
                let open_free = (0..self.reduced.facility_count)
                    .find(|&i| point.y[i] > 0.5 && !base.fixed_one.contains(&i) && !base.fixed_zero.contains(&i));
                match open_free {
                    Some(i)
                        if self.model.is_aggregated_cover()
                            || base.fixed_zero.len() > node.fixed_zero.len()
                            || base.fixed_one.len() > node.fixed_one.len() =>
                    {
                        i
                    }
                    _ if base.fixed_zero.len() > node.fixed_zero.len()
                        || base.fixed_one.len() > node.fixed_one.len() =>
                    {
                        return vec![base];
                    }
                    _ => return Vec::new(),
                }
            }
        };
        let mut one = base.clone();
        one.fixed_one.push(branch);
        let mut zero = base;
        zero.fixed_zero.push(branch);
        vec![one, zero]
    }

    /// Splits on the lowest free facility when the LP could not be solved.
    fn blind_branch(&mut self, node: &Node) -> Vec<Node> {
        let free =
            (0..self.reduced.facility_count).find(|i| !node.fixed_one.contains(i) && !node.fixed_zero.contains(i));
        let Some(i) = free else { return Vec::new() };
        let mut one = node.clone();
        one.fixed_one.push(i);
        one.depth += 1;
        one.warm_start = None;
        let mut zero = one.clone();
        zero.fixed_one.pop();
        zero.fixed_zero.push(i);
        vec![one, zero]
    }
}

fn y_integral(y: &[f64]) -> bool {
    y.iter().all(|v| (v - v.round()).abs() <= INTEGRALITY_TOL)
}

/// Presolves, then runs branch-and-cut. The returned solution is evaluated
/// exactly on the original instance.
pub fn solve_bnc(inst: &Instance, opts: &BncOptions) -> Result<(Solution, SearchStats), BncError> {
    let report = validate_instance(inst);
    if !report.is_pass() {
        return Err(BncError::Invalid(report.to_string()));
    }
    let start = Instant::now();
    let (reduced, artifacts, presolve_report) = presolve_pipeline(inst, &opts.presolve)?;
    let presolve_time = start.elapsed().as_secs_f64();
    let model = build_lp_relaxation(
        &reduced,
        Some(&artifacts),
        LpMode { aggregated_cover: opts.aggregated_cover, dominance_rows: opts.presolve.dominance },
    )?;
    let mut pool = if opts.cuts { build_candidate_pairs(&reduced, opts.presolve.dominance) } else { CutPool::empty() };
    pool.tolerance = opts.cut_tolerance;

    let mut search = Search {
        reduced: &reduced,
        opts,
        model,
        pool,
        granularity: objective_granularity(&reduced),
        incumbent: None,
        slack_runs: HashMap::new(),
        stats: SearchStats { presolve_time, presolve: presolve_report, ..Default::default() },
        start,
    };

    let mut frontier = match opts.node_selection {
        NodeSelection::BestBound => Frontier::Best(BinaryHeap::new()),
        NodeSelection::DepthFirst => Frontier::Depth(Vec::new()),
    };
    let mut seq = 0u64;
    frontier.push(Queued { bound: f64::INFINITY, seq, node: Node::root() });
    let mut status = SearchStatus::Optimal;
    while let Some(q) = frontier.pop() {
        if search.prunable(q.bound) {
            continue;
        }
        if let Some(limit) = search.out_of_budget() {
            frontier.push(q);
            status = limit;
            break;
        }
        let children = search.process(q.node);
        // Depth-first explores the last pushed child first; push the
        // zero branch first so the one branch is tried before it.
        for child in children.into_iter().rev() {
            seq += 1;
            frontier.push(Queued { bound: child.parent_bound, seq, node: child });
        }
    }

    if search.incumbent.is_none() {
        let open: Vec<usize> = (0..reduced.p).collect();
        search.offer(open);
    }
    let inc = search.incumbent.take().expect("incumbent");
    let solution = solution_from_open_set(inst, &inc.open)?;
    let mut stats = search.stats;
    stats.status = Some(status);
    stats.incumbent = solution.objective.to_f64().unwrap_or(f64::NAN);
    stats.best_bound = match status {
        SearchStatus::Optimal => stats.incumbent,
        _ => frontier.best_bound().map_or(stats.incumbent, |b| b.max(stats.incumbent)),
    };
    if stats.nodes == 0 {
        stats.root_lp_bound = stats.incumbent;
        stats.root_bound = stats.incumbent;
    }
    stats.total_time = start.elapsed().as_secs_f64();
    Ok((solution, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{brute_force_solve, uniform_cover_example, Customer};

    fn int(n: i64) -> Weight {
        Weight::from_integer(n)
    }

    fn three_customers() -> Instance {
        Instance::new(
            4,
            1,
            vec![
                Customer::new(int(1), vec![1, 2, 3]),
                Customer::new(int(-1), vec![0, 1, 2]),
                Customer::new(int(-1), vec![0, 3]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn candidates_on_three_customers() {
        let pool = build_candidate_pairs(&three_customers(), true);
        assert_eq!(pool.candidates, vec![CandidatePair { j: 0, r: 1, diff: vec![3] }]);
    }

    #[test]
    fn candidates_need_both_signs_and_overlap() {
        let pos =
            Instance::new(3, 1, vec![Customer::new(int(1), vec![0, 1]), Customer::new(int(2), vec![0, 1, 2])]).unwrap();
        assert!(build_candidate_pairs(&pos, false).is_empty());
        let thin =
            Instance::new(3, 1, vec![Customer::new(int(1), vec![0, 1]), Customer::new(int(-2), vec![1, 2])]).unwrap();
        assert!(build_candidate_pairs(&thin, false).is_empty());
    }

    #[test]
    fn separation_on_fractional_point() {
        let pool = build_candidate_pairs(&three_customers(), true);
        let point = LpPoint { x: vec![1.0, 0.5, 0.0], y: vec![0.0, 0.5, 0.5, 0.0] };
        let cuts = separate_two_customer(&pool, &point);
        assert_eq!(cuts.len(), 1);
        assert!((cuts[0].violation - 0.5).abs() < 1e-12);
        assert!(separate_two_customer(&CutPool::empty(), &point).is_empty());
    }

    #[test]
    fn p4_examples() {
        let inst = Instance::new(3, 1, vec![Customer::new(int(1), vec![0, 1])]).unwrap();
        let node = Node { fixed_x_zero: vec![0], ..Node::root() };
        assert_eq!(propagate_p4(node, &inst).unwrap().fixed_zero, vec![0, 1]);
        let same = propagate_p4(Node::root(), &inst).unwrap();
        assert!(same.fixed_zero.is_empty());
        let mut tight = inst.clone();
        tight.p = 2;
        assert!(propagate_p4(Node { fixed_x_zero: vec![0], ..Node::root() }, &tight).is_none());
    }

    #[test]
    fn rounding_examples() {
        let inst = uniform_cover_example(4);
        let sol = primal_round_heuristic(&inst, &[0.25; 4]);
        assert_eq!(sol.open_facilities(), vec![0]);
        assert_eq!(sol.objective, Weight::new(1, 4));
        let three = Instance::new(3, 2, vec![Customer::new(int(1), vec![0])]).unwrap();
        assert_eq!(primal_round_heuristic(&three, &[0.9, 0.6, 0.5]).open_facilities(), vec![0, 1]);
        assert_eq!(primal_round_heuristic(&three, &[0.0, 1.0, 1.0]).open_facilities(), vec![1, 2]);
    }

    #[test]
    fn branching_rule() {
        assert_eq!(select_branch_variable(&[0.5, 0.9, 0.6]).unwrap(), 0);
        assert_eq!(select_branch_variable(&[0.3, 0.7]).unwrap(), 0);
        assert_eq!(select_branch_variable(&[1.0, 0.0, 1.0]), Err(BncError::Integral));
    }

    #[test]
    fn solves_uniform_cover() {
        let (sol, stats) = solve_bnc(&uniform_cover_example(4), &BncOptions::default()).unwrap();
        assert_eq!(sol.objective, Weight::new(1, 4));
        assert!((stats.root_bound - 0.25).abs() < 1e-9);
        assert_eq!(stats.status, Some(SearchStatus::Optimal));
    }

    #[test]
    fn solves_three_customers_at_root() {
        let (sol, stats) = solve_bnc(&three_customers(), &BncOptions::default()).unwrap();
        assert_eq!(sol.objective, int(0));
        assert!((stats.root_lp_bound - 0.5).abs() < 1e-9);
        assert!(stats.root_bound.abs() < 1e-9);
        assert_eq!(stats.nodes, 1);
        assert!(stats.cuts_added >= 1);
    }

    #[test]
    fn matches_oracle_under_limits_and_orders() {
        let inst = Instance::new(
            6,
            2,
            vec![
                Customer::new(int(3), vec![0, 1, 2]),
                Customer::new(int(-2), vec![1, 2, 3]),
                Customer::new(int(2), vec![3, 4]),
                Customer::new(int(-1), vec![0, 4, 5]),
                Customer::new(int(1), vec![5]),
                Customer::new(int(-4), vec![2, 3, 4, 5]),
            ],
        )
        .unwrap();
        let best = brute_force_solve(&inst).unwrap().objective;
        for sel in [NodeSelection::BestBound, NodeSelection::DepthFirst] {
            let opts = BncOptions { node_selection: sel, ..BncOptions::default() };
            assert_eq!(solve_bnc(&inst, &opts).unwrap().0.objective, best);
        }
        let limited = BncOptions { node_limit: Some(0), ..BncOptions::default() };
        let (_, stats) = solve_bnc(&inst, &limited).unwrap();
        assert_eq!(stats.status, Some(SearchStatus::NodeLimit));
    }

    #[test]
    fn options_from_key_values() {
        let mut o = BncOptions::default();
        o.set("cuts", "off").unwrap();
        o.set("node_limit", "7").unwrap();
        o.set("node_selection", "depth-first").unwrap();
        assert!(!o.cuts);
        assert_eq!(o.node_limit, Some(7));
        assert_eq!(o.node_selection, NodeSelection::DepthFirst);
        assert!(o.set("bogus", "1").is_err());
        assert!(o.set("cuts", "maybe").is_err());
    }

    #[test]
    fn granularity_from_denominators() {
        assert_eq!(objective_granularity(&uniform_cover_example(4)), 0.25);
        assert_eq!(objective_granularity(&three_customers()), 1.0);
    }
}

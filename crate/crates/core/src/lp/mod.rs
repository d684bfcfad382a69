//! LP relaxation of the covering model.
//!
//! Variables are y_i (facilities) followed by x_j (customers not replaced
//! by a facility through the singleton rule). Rows are kept in a fixed
//! order: cardinality, cover rows by customer, dominance rows, then cuts.

mod factor;
pub mod simplex;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fmt::Write as _;

use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::model::{FacilityVector, Instance, ModelError, Weight};
use crate::presolve::{AggregationMap, PresolveArtifacts};

pub use simplex::{simplex_solve, simplex_solve_with, SolveOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Facility(usize),
    Customer(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Eq,
    Ge,
    Le,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowTag {
    Cardinality,
    CoverPos,
    CoverNeg,
    CoverAggregated,
    Dominance,
    P3,
    TwoCustomer,
}

impl RowTag {
    pub fn name(&self) -> &'static str {
        match self {
            RowTag::Cardinality => "cardinality",
            RowTag::CoverPos => "cover-pos",
            RowTag::CoverNeg => "cover-neg",
            RowTag::CoverAggregated => "cover-aggregated",
            RowTag::Dominance => "dominance",
            RowTag::P3 => "p3",
            RowTag::TwoCustomer => "two-customer",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
    pub tag: RowTag,
    /// Stable identifier, unique within a model, used by warm starts.
    pub key: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
}

/// Simplex basis: column statuses plus logical statuses keyed by row key.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    pub cols: Vec<VarStatus>,
    pub rows: Vec<(u64, VarStatus)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Column values.
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Objective change per unit increase of each column (maximization).
    pub reduced_costs: Vec<f64>,
    pub basis: Option<Basis>,
    /// Whether each row's logical variable is basic.
    pub row_basic: Vec<bool>,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Customer and facility values of an LP point, with substituted customers
/// resolved to their facility.
#[derive(Debug, Clone, PartialEq)]
pub struct LpPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LpMode {
    /// Use y(I_j) <= p x_j instead of x_j >= y_i for negative customers.
    pub aggregated_cover: bool,
    pub dominance_rows: bool,
}

impl Default for LpMode {
    fn default() -> Self {
        LpMode { aggregated_cover: false, dominance_rows: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpBuildError {
    CustomerOutOfRange(usize),
    BadSubstitution { customer: usize },
    AbsentRow { customer: usize, facility: usize },
    BadReplacement { customer: usize },
}

impl fmt::Display for LpBuildError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LpBuildError::CustomerOutOfRange(j) => write!(f, "customer {j} out of range"),
            LpBuildError::BadSubstitution { customer } => {
                write!(f, "customer {customer} cannot be replaced by a facility")
            }
            LpBuildError::AbsentRow { customer, facility } => {
                write!(f, "no row x_{customer} >= y_{facility} to remove")
            }
            LpBuildError::BadReplacement { customer } => {
                write!(f, "inconsistent strengthened row for customer {customer}")
            }
        }
    }
}

impl std::error::Error for LpBuildError {}

#[derive(Debug, Clone)]
pub struct LpModel {
    pub(crate) columns: Vec<Column>,
    pub(crate) rows: Vec<Row>,
    next_key: u64,
    p: usize,
    facility_cols: Vec<usize>,
    customer_cols: Vec<Option<usize>>,
    /// Column standing for x_j: its own column or a substituted facility.
    customer_terms: Vec<Option<usize>>,
    negative: Vec<bool>,
    aggregated_cover: bool,
}

impl LpModel {
    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn column_count(&self) -> usize {
        self.columns.len()
    }

    pub fn count_tag(&self, tag: RowTag) -> usize {
        self.rows.iter().filter(|r| r.tag == tag).count()
    }

    pub fn facility_col(&self, i: usize) -> usize {
        self.facility_cols[i]
    }

    pub fn customer_col(&self, j: usize) -> Option<usize> {
        self.customer_cols[j]
    }

    pub fn customer_term(&self, j: usize) -> Option<usize> {
        self.customer_terms[j]
    }

    pub fn customer_count(&self) -> usize {
        self.customer_terms.len()
    }

    pub fn facility_count(&self) -> usize {
        self.facility_cols.len()
    }

    pub fn default_bounds(&self) -> Vec<(f64, f64)> {
        self.columns.iter().map(|c| (c.lower, c.upper)).collect()
    }

    /// Adds a row after merging repeated columns and dropping zeros.
    /// Returns None when no coefficient survives.
    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64, tag: RowTag) -> Option<u64> {
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
        let mut sorted = coeffs;
        sorted.sort_by_key(|&(c, _)| c);
        for (c, v) in sorted {
            match merged.last_mut() {
                Some((lc, lv)) if *lc == c => *lv += v,
                _ => merged.push((c, v)),
            }
        }
        merged.retain(|&(_, v)| v != 0.0);
        if merged.is_empty() {
            return None;
        }
        let key = self.next_key;
        self.next_key += 1;
        self.rows.push(Row { coeffs: merged, relation, rhs, tag, key });
        Some(key)
    }

    pub fn remove_rows(&mut self, keys: &HashSet<u64>) {
        self.rows.retain(|r| !keys.contains(&r.key));
    }

    /// Adds x_j <= x_r for a customer pair. Returns None when the row is
    /// vacuous.
    pub fn add_dominance_row(&mut self, j: usize, r: usize) -> Option<u64> {
        let (a, b) = (self.customer_terms[j]?, self.customer_terms[r]?);
        self.add_row(vec![(a, 1.0), (b, -1.0)], Relation::Le, 0.0, RowTag::Dominance)
    }

    /// Adds x_j - x_r - y(diff) <= 0 where diff = I_j \ I_r.
    pub fn add_two_customer_row(&mut self, j: usize, r: usize, diff: &[usize]) -> Option<u64> {
        let mut coeffs = Vec::with_capacity(diff.len() + 2);
        if let Some(a) = self.customer_terms[j] {
            coeffs.push((a, 1.0));
        }
        if let Some(b) = self.customer_terms[r] {
            coeffs.push((b, -1.0));
        }
        coeffs.extend(diff.iter().map(|&i| (self.facility_cols[i], -1.0)));
        self.add_row(coeffs, Relation::Le, 0.0, RowTag::TwoCustomer)
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.columns.iter().zip(values).map(|(c, v)| c.cost * v).sum()
    }

    /// Per-customer and per-facility values of a column vector.
    pub fn point(&self, values: &[f64]) -> LpPoint {
        let y = self.facility_cols.iter().map(|&c| values[c]).collect();
        let x = self.customer_terms.iter().map(|t| t.map_or(0.0, |c| values[c])).collect();
        LpPoint { x, y }
    }

    /// Largest violation of any row or bound by the given column values.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (c, v) in self.columns.iter().zip(values) {
            worst = worst.max(c.lower - v).max(v - c.upper);
        }
        for row in &self.rows {
            let act: f64 = row.coeffs.iter().map(|&(c, a)| a * values[c]).sum();
            let viol = match row.relation {
                Relation::Eq => (act - row.rhs).abs(),
                Relation::Ge => row.rhs - act,
                Relation::Le => act - row.rhs,
            };
            worst = worst.max(viol);
        }
        worst
    }

    pub fn is_aggregated_cover(&self) -> bool {
        self.aggregated_cover
    }

    pub fn is_negative(&self, j: usize) -> bool {
        self.negative[j]
    }

    pub fn p(&self) -> usize {
        self.p
    }

    fn column_name(&self, c: usize) -> String {
        match self.columns[c].kind {
            VarKind::Facility(i) => format!("y{}", i + 1),
            VarKind::Customer(j) => format!("x{}", j + 1),
        }
    }

    /// Writes the model in CPLEX LP text format.
    pub fn to_lp_format(&self) -> String {
        let mut out = String::from("\\ covering location relaxation\nMaximize\n obj:");
        let mut wrote = false;
        for (c, col) in self.columns.iter().enumerate() {
            if col.cost != 0.0 {
                let _ = write!(
                    out,
                    " {} {} {}",
                    if col.cost < 0.0 { "-" } else { "+" },
                    col.cost.abs(),
                    self.column_name(c)
                );
                wrote = true;
            }
        }
        if !wrote {
            let _ = write!(out, " 0 {}", self.column_name(0));
        }
        out.push_str("\nSubject To\n");
        for (idx, row) in self.rows.iter().enumerate() {
            let _ = write!(out, " r{}_{}:", idx + 1, row.tag.name().replace('-', "_"));
            for &(c, v) in &row.coeffs {
                let _ = write!(out, " {} {} {}", if v < 0.0 { "-" } else { "+" }, v.abs(), self.column_name(c));
            }
            let op = match row.relation {
                Relation::Eq => "=",
                Relation::Ge => ">=",
                Relation::Le => "<=",
            };
            let _ = writeln!(out, " {op} {}", row.rhs);
        }
        out.push_str("Bounds\n");
        for (c, col) in self.columns.iter().enumerate() {
            let _ = writeln!(out, " {} <= {} <= {}", col.lower, self.column_name(c), col.upper);
        }
        out.push_str("End\n");
        out
    }
}

fn to_f64(w: &Weight) -> f64 {
    w.to_f64().unwrap_or(0.0)
}

/// Builds the relaxation, optionally applying presolve artifacts computed
/// for `inst`. In aggregated-cover mode constraint removals are ignored,
/// and they are also ignored when dominance rows are switched off.
pub fn build_lp_relaxation(
    inst: &Instance,
    artifacts: Option<&PresolveArtifacts>,
    mode: LpMode,
) -> Result<LpModel, LpBuildError> {
    let nj = inst.customers.len();
    let nf = inst.facility_count;
    let negative: Vec<bool> = inst.customers.iter().map(|c| c.is_negative()).collect();

    let mut substituted: Vec<Option<usize>> = vec![None; nj];
    let mut removed: Vec<HashSet<usize>> = vec![HashSet::new(); nj];
    let mut replacement: HashMap<usize, usize> = HashMap::new();
    if let Some(art) = artifacts {
        for s in &art.substitutions {
            let c = inst.customers.get(s.customer).ok_or(LpBuildError::CustomerOutOfRange(s.customer))?;
            if c.is_negative() || c.coverage != [s.facility] {
                return Err(LpBuildError::BadSubstitution { customer: s.customer });
            }
            substituted[s.customer] = Some(s.facility);
        }
        let use_removals = mode.dominance_rows && !mode.aggregated_cover;
        for (r, facilities) in &art.dominance.removed_constraints {
            let c = inst.customers.get(*r).ok_or(LpBuildError::CustomerOutOfRange(*r))?;
            for &i in facilities {
                if !c.is_negative() || !c.covers(i) {
                    return Err(LpBuildError::AbsentRow { customer: *r, facility: i });
                }
                if use_removals {
                    removed[*r].insert(i);
                }
            }
        }
        for (idx, rep) in art.p3.iter().enumerate() {
            check_replacement(inst, rep, &substituted)?;
            replacement.insert(rep.customer, idx);
        }
        for &(j, r) in &art.dominance_rows {
            if j >= nj || r >= nj {
                return Err(LpBuildError::CustomerOutOfRange(j.max(r)));
            }
        }
    }

    let mut columns = Vec::with_capacity(nf + nj);
    for i in 0..nf {
        columns.push(Column { kind: VarKind::Facility(i), lower: 0.0, upper: 1.0, cost: 0.0 });
    }
    let facility_cols: Vec<usize> = (0..nf).collect();
    let mut customer_cols = vec![None; nj];
    let mut customer_terms = vec![None; nj];
    for (j, c) in inst.customers.iter().enumerate() {
        let w = to_f64(&c.weight);
        if let Some(i) = substituted[j] {
            columns[i].cost += w;
            customer_terms[j] = Some(i);
            continue;
        }
        let upper = if c.coverage.is_empty() { 0.0 } else { 1.0 };
        customer_cols[j] = Some(columns.len());
        customer_terms[j] = Some(columns.len());
        columns.push(Column { kind: VarKind::Customer(j), lower: 0.0, upper, cost: w });
    }

    let mut model = LpModel {
        columns,
        rows: Vec::new(),
        next_key: 0,
        p: inst.p,
        facility_cols,
        customer_cols,
        customer_terms,
        negative: negative.clone(),
        aggregated_cover: mode.aggregated_cover,
    };
    model.add_row((0..nf).map(|i| (i, 1.0)).collect(), Relation::Eq, inst.p as f64, RowTag::Cardinality);

    for (j, c) in inst.customers.iter().enumerate() {
        if substituted[j].is_some() {
            continue;
        }
        let xj = model.customer_cols[j].expect("own column");
        if !negative[j] {
            if let Some(&idx) = replacement.get(&j) {
                let rep = &artifacts.expect("replacement implies artifacts").p3[idx];
                let mut coeffs: Vec<(usize, f64)> =
                    rep.members.iter().map(|&m| (model.customer_terms[m].expect("member term"), 1.0)).collect();
                coeffs.extend(rep.remainder.iter().map(|&i| (i, 1.0)));
                coeffs.push((xj, -1.0));
                model.add_row(coeffs, Relation::Ge, 0.0, RowTag::P3);
            } else {
                let mut coeffs: Vec<(usize, f64)> = c.coverage.iter().map(|&i| (i, 1.0)).collect();
                coeffs.push((xj, -1.0));
                model.add_row(coeffs, Relation::Ge, 0.0, RowTag::CoverPos);
            }
        } else if mode.aggregated_cover {
            if !c.coverage.is_empty() {
                let mut coeffs: Vec<(usize, f64)> = c.coverage.iter().map(|&i| (i, 1.0)).collect();
                coeffs.push((xj, -(inst.p as f64)));
                model.add_row(coeffs, Relation::Le, 0.0, RowTag::CoverAggregated);
            }
        } else {
            for &i in &c.coverage {
                if !removed[j].contains(&i) {
                    model.add_row(vec![(xj, 1.0), (i, -1.0)], Relation::Ge, 0.0, RowTag::CoverNeg);
                }
            }
        }
    }

    if mode.dominance_rows {
        if let Some(art) = artifacts {
            for &(j, r) in &art.dominance_rows {
                if substituted[j].is_some() && negative[r] && !mode.aggregated_cover {
                    continue;
                }
                model.add_dominance_row(j, r);
            }
        }
    }
    Ok(model)
}

fn check_replacement(
    inst: &Instance,
    rep: &crate::presolve::P3Replacement,
    substituted: &[Option<usize>],
) -> Result<(), LpBuildError> {
    let bad = LpBuildError::BadReplacement { customer: rep.customer };
    let r = inst.customers.get(rep.customer).ok_or(LpBuildError::CustomerOutOfRange(rep.customer))?;
    if r.is_negative() || substituted[rep.customer].is_some() {
        return Err(bad);
    }
    let mut used: HashSet<usize> = HashSet::new();
    for &m in &rep.members {
        let c = inst.customers.get(m).ok_or(LpBuildError::CustomerOutOfRange(m))?;
        if m == rep.customer || c.is_negative() {
            return Err(bad);
        }
        for &i in &c.coverage {
            if !r.covers(i) || !used.insert(i) {
                return Err(bad);
            }
        }
    }
    let expected: Vec<usize> = r.coverage.iter().copied().filter(|i| !used.contains(i)).collect();
    if expected != rep.remainder {
        return Err(bad);
    }
    Ok(())
}

/// Solves the plain relaxation of an instance and returns its optimum.
pub fn plain_lp_value(inst: &Instance) -> Option<f64> {
    let model = build_lp_relaxation(inst, None, LpMode { aggregated_cover: false, dominance_rows: false }).ok()?;
    let sol = simplex_solve(&model, None);
    sol.is_optimal().then_some(sol.objective)
}

fn covered_mass(coverage: &[usize], y: &[Weight]) -> Weight {
    coverage.iter().fold(Weight::zero(), |acc, &i| acc + y[i])
}

fn max_over(coverage: &[usize], y: &[Weight]) -> Weight {
    coverage.iter().map(|&i| y[i]).max().unwrap_or_else(Weight::zero)
}

fn min_one(v: Weight) -> Weight {
    if v < Weight::one() {
        v
    } else {
        Weight::one()
    }
}

/// z(y): negative customers take the largest y over their coverage, the
/// others min{1, y(I_j)}.
pub fn evaluate_relaxed_objective(inst: &Instance, y: &FacilityVector) -> Result<Weight, ModelError> {
    y.check_fractional(inst)?;
    Ok(inst
        .customers
        .iter()
        .map(|c| {
            let term = if c.is_negative() {
                max_over(&c.coverage, &y.values)
            } else {
                min_one(covered_mass(&c.coverage, &y.values))
            };
            c.weight * term
        })
        .fold(Weight::zero(), |a, b| a + b))
}

/// z'(y) over the aggregated customers of `reduced` using the merged
/// weights and sign classes recorded in `agg`.
pub fn evaluate_aggregated_relaxed_objective(
    reduced: &Instance,
    agg: &AggregationMap,
    y: &FacilityVector,
) -> Result<Weight, ModelError> {
    y.check_fractional(reduced)?;
    let mut total = Weight::zero();
    for (k, w) in agg.merged_weights.iter().enumerate() {
        let cov = &reduced.customers[k].coverage;
        let term = if w.is_negative() { max_over(cov, &y.values) } else { min_one(covered_mass(cov, &y.values)) };
        total += *w * term;
    }
    Ok(total)
}

/// f_k(y) = min{1, y(I_k)} - max_{i in I_k} y_i, zero for empty coverage.
pub fn coverage_slack(inst: &Instance, k: usize, y: &FacilityVector) -> Result<Weight, ModelError> {
    y.check_fractional(inst)?;
    let c = inst.customers.get(k).ok_or(ModelError::CustomerOutOfRange(k))?;
    if c.coverage.is_empty() {
        return Ok(Weight::zero());
    }
    Ok(min_one(covered_mass(&c.coverage, &y.values)) - max_over(&c.coverage, &y.values))
}

/// Rewrites x so that, for the given cross pairs (j nonnegative, r
/// negative, I_j within I_r), every nonnegative customer is as large as its
/// coverage and its dominating negatives allow and every negative customer
/// is as small as its coverage and dominated nonnegatives allow. For an
/// optimal LP point with those rows present, the result is again optimal.
pub fn enforce_dominance_condition(inst: &Instance, cross_pairs: &[(usize, usize)], point: &LpPoint) -> LpPoint {
    let nj = inst.customers.len();
    let mut heads: Vec<Vec<usize>> = vec![Vec::new(); nj];
    let mut tails: Vec<Vec<usize>> = vec![Vec::new(); nj];
    for &(j, r) in cross_pairs {
        heads[j].push(r);
        tails[r].push(j);
    }
    let mut x = point.x.clone();
    for (j, c) in inst.customers.iter().enumerate() {
        if c.is_negative() {
            continue;
        }
        let mass: f64 = c.coverage.iter().map(|&i| point.y[i]).sum();
        let cap = heads[j].iter().map(|&r| point.x[r]).fold(1.0f64, f64::min);
        x[j] = mass.min(cap).min(1.0);
    }
    let after_pos = x.clone();
    for (r, c) in inst.customers.iter().enumerate() {
        if !c.is_negative() {
            continue;
        }
        let top = c.coverage.iter().map(|&i| point.y[i]).fold(0.0f64, f64::max);
        let floor = tails[r].iter().map(|&j| after_pos[j]).fold(0.0f64, f64::max);
        x[r] = top.max(floor);
    }
    LpPoint { x, y: point.y.clone() }
}

/// Lower bound on how much the dominance rows for `cross_pairs` lower the
/// LP optimum, evaluated at an optimal point of the strengthened LP that
/// satisfies [`enforce_dominance_condition`].
pub fn dominance_gap_lower_bound(inst: &Instance, cross_pairs: &[(usize, usize)], point: &LpPoint) -> f64 {
    let nj = inst.customers.len();
    let mut best_tail = vec![0.0f64; nj];
    let mut best_head = vec![1.0f64; nj];
    for &(j, r) in cross_pairs {
        best_tail[r] = best_tail[r].max(point.x[j]);
        best_head[j] = best_head[j].min(point.x[r]);
    }
    let mut total = 0.0;
    for (j, c) in inst.customers.iter().enumerate() {
        let w = to_f64(&c.weight);
        if c.is_negative() {
            let top = c.coverage.iter().map(|&i| point.y[i]).fold(0.0f64, f64::max);
            total += w * (top - best_tail[j]).min(0.0);
        } else {
            let mass: f64 = c.coverage.iter().map(|&i| point.y[i]).sum::<f64>().min(1.0);
            total += w * (mass - best_head[j]).max(0.0);
        }
    }
    total
}

/// f64 counterpart of [`evaluate_relaxed_objective`] without validation.
pub fn relaxed_objective_f64(inst: &Instance, y: &[f64]) -> f64 {
    inst.customers
        .iter()
        .map(|c| {
            let term = if c.is_negative() {
                c.coverage.iter().map(|&i| y[i]).fold(0.0f64, f64::max)
            } else {
                c.coverage.iter().map(|&i| y[i]).sum::<f64>().min(1.0)
            };
            to_f64(&c.weight) * term
        })
        .sum()
}

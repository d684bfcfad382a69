//! Bounded-variable dual simplex.
//!
//! Every row r carries a logical variable s_r = a_r x whose bounds are the
//! row bounds, so the constraint matrix is [A | -I] with right-hand side 0.
//! Structural variables are boxed, which makes the all-logical basis dual
//! feasible once each structural sits at the bound matching its cost sign.
//! Leaving rows are priced by dual steepest edge, the ratio test is Harris'
//! two-pass rule, and Bland's rule takes over after a long degenerate run.

use super::factor::Factor;
use super::{Basis, LpModel, LpSolution, LpStatus, Relation, VarStatus};

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const DUAL_RESTART_TOL: f64 = 1e-7;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 100;
const BLAND_AFTER: usize = 1000;
const MAX_RESTARTS: usize = 2;

#[derive(Debug, Clone, Default)]
pub struct SolveOptions<'a> {
    /// Per-column bound overrides, one pair per model column.
    pub bounds: Option<&'a [(f64, f64)]>,
    pub warm_start: Option<&'a Basis>,
    /// Defaults to 50 * (rows + columns).
    pub max_iterations: Option<usize>,
}

pub fn simplex_solve(model: &LpModel, warm_start: Option<&Basis>) -> LpSolution {
    simplex_solve_with(model, &SolveOptions { warm_start, ..Default::default() })
}

pub fn simplex_solve_with(model: &LpModel, opts: &SolveOptions) -> LpSolution {
    let mut w = Work::new(model, opts.bounds);
    let limit = opts.max_iterations.unwrap_or(50 * (w.m + w.n));
    let mut warm = opts.warm_start.map_or(false, |b| w.load_basis(model, b));
    if !warm {
        w.slack_basis();
    }
    let mut restarts = 0;
    loop {
        match w.run(limit) {
            Outcome::Done(status) => return w.solution(model, status),
            Outcome::Restart => {
                restarts += 1;
                if restarts > MAX_RESTARTS {
                    return w.solution(model, LpStatus::NumericalFailure);
                }
                log::debug!("simplex restart from slack basis (warm={warm})");
                warm = false;
                w.slack_basis();
            }
        }
    }
}

enum Outcome {
    Done(LpStatus),
    Restart,
}

struct Work {
    m: usize,
    n: usize,
    col_start: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<f64>,
    lo: Vec<f64>,
    up: Vec<f64>,
    cost: Vec<f64>,
    status: Vec<VarStatus>,
    head: Vec<usize>,
    pos_of: Vec<usize>,
    xb: Vec<f64>,
    d: Vec<f64>,
    dse: Vec<f64>,
    factor: Option<Factor>,
    iterations: usize,
    degenerate_run: usize,
    bland: bool,
}

impl Work {
    fn new(model: &LpModel, bounds: Option<&[(f64, f64)]>) -> Self {
        let n = model.columns.len();
        let m = model.rows.len();
        let mut counts = vec![0usize; n + 1];
        for row in &model.rows {
            for &(c, _) in &row.coeffs {
                counts[c + 1] += 1;
            }
        }
        for c in 0..n {
            counts[c + 1] += counts[c];
        }
        let col_start = counts.clone();
        let mut fill = counts;
        let nnz = col_start[n];
        let mut row_idx = vec![0; nnz];
        let mut vals = vec![0.0; nnz];
        for (r, row) in model.rows.iter().enumerate() {
            for &(c, v) in &row.coeffs {
                row_idx[fill[c]] = r;
                vals[fill[c]] = v;
                fill[c] += 1;
            }
        }
        let mut lo = Vec::with_capacity(n + m);
        let mut up = Vec::with_capacity(n + m);
        let mut cost = Vec::with_capacity(n + m);
        for (c, col) in model.columns.iter().enumerate() {
            let (l, u) = bounds.map_or((col.lower, col.upper), |b| b[c]);
            lo.push(l);
            up.push(u);
            cost.push(-col.cost);
        }
        for row in &model.rows {
            let (l, u) = match row.relation {
                Relation::Eq => (row.rhs, row.rhs),
                Relation::Ge => (row.rhs, f64::INFINITY),
                Relation::Le => (f64::NEG_INFINITY, row.rhs),
            };
            lo.push(l);
            up.push(u);
            cost.push(0.0);
        }
        Work {
            m,
            n,
            col_start,
            row_idx,
            vals,
            lo,
            up,
            cost,
            status: vec![VarStatus::AtLower; n + m],
            head: Vec::new(),
            pos_of: vec![usize::MAX; n + m],
            xb: vec![0.0; m],
            d: vec![0.0; n + m],
            dse: vec![1.0; m],
            factor: None,
            iterations: 0,
            degenerate_run: 0,
            bland: false,
        }
    }

    fn default_nonbasic(&self, j: usize) -> VarStatus {
        if self.lo[j].is_finite() && (self.cost[j] >= 0.0 || !self.up[j].is_finite()) {
            VarStatus::AtLower
        } else {
            VarStatus::AtUpper
        }
    }

    fn slack_basis(&mut self) {
        for j in 0..self.n {
            self.status[j] = self.default_nonbasic(j);
        }
        self.head = (0..self.m).map(|r| self.n + r).collect();
        self.pos_of.iter_mut().for_each(|p| *p = usize::MAX);
        for r in 0..self.m {
            self.status[self.n + r] = VarStatus::Basic;
            self.pos_of[self.n + r] = r;
        }
        self.dse = vec![1.0; self.m];
        self.degenerate_run = 0;
        self.bland = false;
    }

    /// Installs a stored basis. Rows absent from it get a basic logical.
    /// Returns false when the result is not a square basis.
    fn load_basis(&mut self, model: &LpModel, basis: &Basis) -> bool {
        if basis.cols.len() != self.n {
            return false;
        }
        let known: std::collections::HashMap<u64, VarStatus> = basis.rows.iter().copied().collect();
        for j in 0..self.n {
            self.status[j] = basis.cols[j];
        }
        for (r, row) in model.rows.iter().enumerate() {
            self.status[self.n + r] = known.get(&row.key).copied().unwrap_or(VarStatus::Basic);
        }
        let basics: Vec<usize> = (0..self.n + self.m).filter(|&j| self.status[j] == VarStatus::Basic).collect();
        if basics.len() != self.m {
            return false;
        }
        for j in 0..self.n + self.m {
            match self.status[j] {
                VarStatus::AtLower if !self.lo[j].is_finite() => self.status[j] = VarStatus::AtUpper,
                VarStatus::AtUpper if !self.up[j].is_finite() => self.status[j] = VarStatus::AtLower,
                _ => {}
            }
        }
        self.pos_of.iter_mut().for_each(|p| *p = usize::MAX);
        for (p, &j) in basics.iter().enumerate() {
            self.pos_of[j] = p;
        }
        self.head = basics;
        self.dse = vec![1.0; self.m];
        true
    }

    fn column(&self, j: usize) -> Vec<(usize, f64)> {
        if j < self.n {
            (self.col_start[j]..self.col_start[j + 1]).map(|k| (self.row_idx[k], self.vals[k])).collect()
        } else {
            vec![(j - self.n, -1.0)]
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.status[j] {
            VarStatus::AtUpper => self.up[j],
            _ => self.lo[j],
        }
    }

    fn refactor(&mut self) -> bool {
        let cols: Vec<Vec<(usize, f64)>> = self.head.iter().map(|&j| self.column(j)).collect();
        match Factor::new(self.m, cols) {
            Ok(f) => {
                self.factor = Some(f);
                true
            }
            Err(_) => false,
        }
    }

    fn compute_primal(&mut self) {
        let mut rhs = vec![0.0; self.m];
        for j in 0..self.n + self.m {
            if self.status[j] == VarStatus::Basic {
                continue;
            }
            let v = self.nonbasic_value(j);
            if v == 0.0 {
                continue;
            }
            if j < self.n {
                for k in self.col_start[j]..self.col_start[j + 1] {
                    rhs[self.row_idx[k]] -= self.vals[k] * v;
                }
            } else {
                rhs[j - self.n] += v;
            }
        }
        self.xb = self.factor.as_ref().expect("factorized").ftran(&mut rhs);
    }

    fn compute_duals(&mut self) {
        let mut cb: Vec<f64> = self.head.iter().map(|&j| self.cost[j]).collect();
        let y = self.factor.as_ref().expect("factorized").btran(&mut cb);
        for j in 0..self.n {
            if self.status[j] == VarStatus::Basic {
                self.d[j] = 0.0;
                continue;
            }
            let mut s = self.cost[j];
            for k in self.col_start[j]..self.col_start[j + 1] {
                s -= y[self.row_idx[k]] * self.vals[k];
            }
            self.d[j] = s;
        }
        for r in 0..self.m {
            let j = self.n + r;
            self.d[j] = if self.status[j] == VarStatus::Basic { 0.0 } else { y[r] };
        }
    }

    /// Moves boxed nonbasics with a wrong-signed reduced cost to the other
    /// bound. Returns None when a one-sided variable is dual infeasible
    /// beyond repair, otherwise whether anything was flipped.
    fn repair_dual(&mut self) -> Option<bool> {
        let mut flipped = false;
        for j in 0..self.n + self.m {
            let st = self.status[j];
            if st == VarStatus::Basic || self.lo[j] == self.up[j] {
                continue;
            }
            let wrong = match st {
                VarStatus::AtLower => -self.d[j],
                _ => self.d[j],
            };
            if wrong <= DUAL_TOL {
                continue;
            }
            if self.lo[j].is_finite() && self.up[j].is_finite() {
                self.status[j] = if st == VarStatus::AtLower { VarStatus::AtUpper } else { VarStatus::AtLower };
                flipped = true;
            } else if wrong > DUAL_RESTART_TOL {
                return None;
            }
        }
        Some(flipped)
    }

    fn fresh_start(&mut self) -> bool {
        if !self.refactor() {
            return false;
        }
        self.compute_duals();
        match self.repair_dual() {
            None => return false,
            Some(_) => {}
        }
        self.compute_primal();
        true
    }

    fn infeasibility(&self, p: usize) -> f64 {
        let j = self.head[p];
        let x = self.xb[p];
        let l = self.lo[j];
        let u = self.up[j];
        if x < l - PRIMAL_TOL * l.abs().max(1.0) {
            l - x
        } else if x > u + PRIMAL_TOL * u.abs().max(1.0) {
            x - u
        } else {
            0.0
        }
    }

    fn choose_leaving(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for p in 0..self.m {
            let inf = self.infeasibility(p);
            if inf <= 0.0 {
                continue;
            }
            let score = if self.bland { -(self.head[p] as f64) } else { inf * inf / self.dse[p] };
            if best.map_or(true, |(_, s)| score > s) {
                best = Some((p, score));
            }
        }
        best.map(|(p, _)| p)
    }

    fn run(&mut self, limit: usize) -> Outcome {
        if !self.fresh_start() {
            return Outcome::Restart;
        }
        let mut alpha_row = vec![0.0; self.n + self.m];
        let mut mismatches = 0;
        loop {
            if self.iterations >= limit {
                return Outcome::Done(LpStatus::IterationLimit);
            }
            let etas = self.factor.as_ref().map_or(0, |f| f.eta_count());
            if etas >= REFACTOR_EVERY {
                if !self.fresh_start() {
                    return Outcome::Restart;
                }
                continue;
            }
            let Some(p) = self.choose_leaving() else {
                if etas > 0 {
                    if !self.fresh_start() {
                        return Outcome::Restart;
                    }
                    if self.choose_leaving().is_none() {
                        return Outcome::Done(LpStatus::Optimal);
                    }
                    continue;
                }
                return Outcome::Done(LpStatus::Optimal);
            };
            let leave = self.head[p];
            let to_lower = self.xb[p] < self.lo[leave];
            let target = if to_lower { self.lo[leave] } else { self.up[leave] };

            let factor = self.factor.as_ref().expect("factorized");
            let mut e = vec![0.0; self.m];
            e[p] = 1.0;
            let rho = factor.btran(&mut e);
            for j in 0..self.n {
                if self.status[j] == VarStatus::Basic || self.lo[j] == self.up[j] {
                    alpha_row[j] = 0.0;
                    continue;
                }
                let mut s = 0.0;
                for k in self.col_start[j]..self.col_start[j + 1] {
                    s += rho[self.row_idx[k]] * self.vals[k];
                }
                alpha_row[j] = s;
            }
            for r in 0..self.m {
                let j = self.n + r;
                alpha_row[j] =
                    if self.status[j] == VarStatus::Basic || self.lo[j] == self.up[j] { 0.0 } else { -rho[r] };
            }

            let Some(q) = self.ratio_test(&alpha_row, to_lower) else {
                if etas > 0 {
                    if !self.fresh_start() {
                        return Outcome::Restart;
                    }
                    continue;
                }
                return Outcome::Done(LpStatus::Infeasible);
            };

            let mut col = vec![0.0; self.m];
            for (r, v) in self.column(q) {
                col[r] = v;
            }
            let alpha_col = factor.ftran(&mut col);
            let piv = alpha_col[p];
            if (piv - alpha_row[q]).abs() > 1e-7 * (1.0 + piv.abs()) || piv.abs() < PIVOT_TOL {
                mismatches += 1;
                if mismatches > 5 || etas == 0 {
                    return Outcome::Restart;
                }
                if !self.fresh_start() {
                    return Outcome::Restart;
                }
                continue;
            }

            // Dual steepest edge weights need B^-1 rho.
            let rho_norm: f64 = rho.iter().map(|v| v * v).sum();
            let tau = factor.ftran(&mut rho.clone());
            for i in 0..self.m {
                if i == p {
                    continue;
                }
                let ratio = alpha_col[i] / piv;
                if ratio != 0.0 {
                    let w = self.dse[i] - 2.0 * ratio * tau[i] + ratio * ratio * rho_norm;
                    self.dse[i] = w.max(1e-8);
                }
            }
            self.dse[p] = (rho_norm / (piv * piv)).max(1e-8);

            let t = self.d[q] / alpha_row[q];
            for j in 0..self.n + self.m {
                if alpha_row[j] != 0.0 {
                    self.d[j] -= t * alpha_row[j];
                }
            }
            self.d[q] = 0.0;
            self.d[leave] = -t;

            let delta = (self.xb[p] - target) / piv;
            let xq = self.nonbasic_value(q) + delta;
            for i in 0..self.m {
                if alpha_col[i] != 0.0 {
                    self.xb[i] -= delta * alpha_col[i];
                }
            }
            self.xb[p] = xq;
            self.status[leave] = if to_lower { VarStatus::AtLower } else { VarStatus::AtUpper };
            self.status[q] = VarStatus::Basic;
            self.pos_of[leave] = usize::MAX;
            self.pos_of[q] = p;
            self.head[p] = q;
            self.factor.as_mut().expect("factorized").push_eta(p, &alpha_col);
            self.iterations += 1;

            if t.abs() < 1e-12 {
                self.degenerate_run += 1;
                if self.degenerate_run >= BLAND_AFTER && !self.bland {
                    log::debug!("simplex switching to Bland's rule");
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
            }
        }
    }

    /// Harris two-pass ratio test over the nonbasic candidates that keep the
    /// reduced costs dual feasible when the leaving variable moves to its
    /// violated bound.
    fn ratio_test(&self, alpha_row: &[f64], to_lower: bool) -> Option<usize> {
        let candidate = |j: usize| -> Option<(f64, f64)> {
            let a = alpha_row[j];
            if a.abs() <= PIVOT_TOL {
                return None;
            }
            let at_lower = self.status[j] == VarStatus::AtLower;
            let ok = if to_lower {
                (at_lower && a < 0.0) || (!at_lower && a > 0.0)
            } else {
                (at_lower && a > 0.0) || (!at_lower && a < 0.0)
            };
            if !ok {
                return None;
            }
            let slack = if at_lower { self.d[j] } else { -self.d[j] };
            Some((slack.max(0.0), a.abs()))
        };
        let nz = (0..self.n + self.m).filter(|&j| alpha_row[j] != 0.0);
        if self.bland {
            let mut best: Option<(usize, f64)> = None;
            for j in nz {
                if let Some((s, a)) = candidate(j) {
                    let ratio = s / a;
                    if best.map_or(true, |(_, b)| ratio < b) {
                        best = Some((j, ratio));
                    }
                }
            }
            return best.map(|(j, _)| j);
        }
        let mut bound = f64::INFINITY;
        let mut cands = Vec::new();
        for j in nz {
            if let Some((s, a)) = candidate(j) {
                bound = bound.min((s + DUAL_TOL) / a);
                cands.push((j, s, a));
            }
        }
        let mut best: Option<(usize, f64)> = None;
        for (j, s, a) in cands {
            if s / a <= bound && best.map_or(true, |(_, ba)| a > ba) {
                best = Some((j, a));
            }
        }
        best.map(|(j, _)| j)
    }

    fn solution(&self, model: &LpModel, status: LpStatus) -> LpSolution {
        let mut x = vec![0.0; self.n];
        for j in 0..self.n {
            let v = if self.status[j] == VarStatus::Basic && !self.head.is_empty() {
                self.xb[self.pos_of[j]]
            } else {
                self.nonbasic_value(j)
            };
            x[j] = if status == LpStatus::Optimal { v.clamp(self.lo[j], self.up[j]) } else { v };
        }
        let objective = model.columns.iter().zip(&x).map(|(c, v)| c.cost * v).sum();
        let reduced_costs = (0..self.n).map(|j| -self.d[j]).collect();
        let basis = if self.head.len() == self.m {
            Some(Basis {
                cols: self.status[..self.n].to_vec(),
                rows: model.rows.iter().enumerate().map(|(r, row)| (row.key, self.status[self.n + r])).collect(),
            })
        } else {
            None
        };
        let row_basic = (0..self.m).map(|r| self.status[self.n + r] == VarStatus::Basic).collect();
        LpSolution { status, x, objective, iterations: self.iterations, reduced_costs, basis, row_basic }
    }
}

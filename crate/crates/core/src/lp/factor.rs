//! Basis factorization for the dual simplex.
//!
//! The basis is peeled into column singletons (an upper triangular front
//! block), row singletons (a lower triangular back block) and a remaining
//! nucleus that is factorized densely with partial pivoting. Updates between
//! refactorizations are kept as a product-form eta file.

const SINGLETON_TOL: f64 = 1e-12;
const NUCLEUS_PIVOT_TOL: f64 = 1e-10;
const ETA_DROP: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Singular;

struct Eta {
    pos: usize,
    pivot: f64,
    others: Vec<(usize, f64)>,
}

pub struct Factor {
    m: usize,
    /// Column entries (row, value) per basis position.
    cols: Vec<Vec<(usize, f64)>>,
    /// Column-singleton pivots (row, position) in discovery order.
    front: Vec<(usize, usize)>,
    /// Row-singleton pivots (row, position) in discovery order.
    back: Vec<(usize, usize)>,
    nuc_rows: Vec<usize>,
    nuc_cols: Vec<usize>,
    /// Which nucleus slot a row occupies, or usize::MAX.
    nuc_row_slot: Vec<usize>,
    /// Packed LU of the permuted nucleus, row-major k x k.
    lu: Vec<f64>,
    perm: Vec<usize>,
    etas: Vec<Eta>,
}

impl Factor {
    /// Factorizes the m x m matrix whose columns are given per position.
    pub fn new(m: usize, cols: Vec<Vec<(usize, f64)>>) -> Result<Self, Singular> {
        debug_assert_eq!(cols.len(), m);
        let mut row_entries: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (pos, col) in cols.iter().enumerate() {
            for &(r, _) in col {
                row_entries[r].push(pos);
            }
        }
        let mut row_alive = vec![true; m];
        let mut col_alive = vec![true; m];
        let mut col_count: Vec<usize> = cols.iter().map(|c| c.len()).collect();
        let mut row_count: Vec<usize> = row_entries.iter().map(|r| r.len()).collect();

        let mut front = Vec::new();
        let mut stack: Vec<usize> = (0..m).rev().filter(|&c| col_count[c] == 1).collect();
        while let Some(c) = stack.pop() {
            if !col_alive[c] || col_count[c] != 1 {
                continue;
            }
            let Some(&(r, v)) = cols[c].iter().find(|(r, _)| row_alive[*r]) else { continue };
            if v.abs() <= SINGLETON_TOL {
                continue;
            }
            front.push((r, c));
            col_alive[c] = false;
            row_alive[r] = false;
            for &c2 in &row_entries[r] {
                if col_alive[c2] {
                    col_count[c2] -= 1;
                    if col_count[c2] == 1 {
                        stack.push(c2);
                    }
                }
            }
        }
        if (0..m).any(|c| col_alive[c] && col_count[c] == 0) {
            return Err(Singular);
        }
        for r in 0..m {
            if row_alive[r] {
                row_count[r] = row_entries[r].iter().filter(|&&c| col_alive[c]).count();
            }
        }

        let mut back = Vec::new();
        let mut stack: Vec<usize> = (0..m).rev().filter(|&r| row_alive[r] && row_count[r] == 1).collect();
        while let Some(r) = stack.pop() {
            if !row_alive[r] || row_count[r] != 1 {
                continue;
            }
            let Some(&c) = row_entries[r].iter().find(|&&c| col_alive[c]) else { continue };
            let v = entry(&cols[c], r);
            if v.abs() <= SINGLETON_TOL {
                continue;
            }
            back.push((r, c));
            col_alive[c] = false;
            row_alive[r] = false;
            for &(r2, _) in &cols[c] {
                if row_alive[r2] {
                    row_count[r2] -= 1;
                    if row_count[r2] == 1 {
                        stack.push(r2);
                    }
                }
            }
        }

        let nuc_rows: Vec<usize> = (0..m).filter(|&r| row_alive[r]).collect();
        let nuc_cols: Vec<usize> = (0..m).filter(|&c| col_alive[c]).collect();
        if nuc_rows.len() != nuc_cols.len() {
            return Err(Singular);
        }
        let k = nuc_rows.len();
        let mut nuc_row_slot = vec![usize::MAX; m];
        for (a, &r) in nuc_rows.iter().enumerate() {
            nuc_row_slot[r] = a;
        }
        let mut lu = vec![0.0; k * k];
        for (b, &c) in nuc_cols.iter().enumerate() {
            for &(r, v) in &cols[c] {
                let a = nuc_row_slot[r];
                if a != usize::MAX {
                    lu[a * k + b] = v;
                }
            }
        }
        let perm = dense_lu(&mut lu, k)?;
        Ok(Factor { m, cols, front, back, nuc_rows, nuc_cols, nuc_row_slot, lu, perm, etas: Vec::new() })
    }

    pub fn eta_count(&self) -> usize {
        self.etas.len()
    }

    /// Records that position `pos` now holds the column whose FTRAN image is
    /// `alpha` (indexed by position).
    pub fn push_eta(&mut self, pos: usize, alpha: &[f64]) {
        let others: Vec<(usize, f64)> =
            alpha.iter().enumerate().filter(|&(i, v)| i != pos && v.abs() > ETA_DROP).map(|(i, &v)| (i, v)).collect();
        self.etas.push(Eta { pos, pivot: alpha[pos], others });
    }

    /// Solves B v = b. `b` is indexed by row and overwritten; the result is
    /// indexed by basis position.
    pub fn ftran(&self, b: &mut [f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.m];
        let rhs = b;
        for &(r, c) in &self.back {
            let x = rhs[r] / entry(&self.cols[c], r);
            v[c] = x;
            if x != 0.0 {
                for &(r2, val) in &self.cols[c] {
                    if r2 != r {
                        rhs[r2] -= val * x;
                    }
                }
            }
        }
        let k = self.nuc_rows.len();
        if k > 0 {
            let mut z: Vec<f64> = self.perm.iter().map(|&a| rhs[self.nuc_rows[a]]).collect();
            lu_solve(&self.lu, k, &mut z);
            for (b_idx, &c) in self.nuc_cols.iter().enumerate() {
                let x = z[b_idx];
                v[c] = x;
                if x != 0.0 {
                    for &(r2, val) in &self.cols[c] {
                        if self.nuc_row_slot[r2] == usize::MAX {
                            rhs[r2] -= val * x;
                        }
                    }
                }
            }
        }
        for &(r, c) in self.front.iter().rev() {
            let x = rhs[r] / entry(&self.cols[c], r);
            v[c] = x;
            if x != 0.0 {
                for &(r2, val) in &self.cols[c] {
                    if r2 != r {
                        rhs[r2] -= val * x;
                    }
                }
            }
        }
        for eta in &self.etas {
            let vp = v[eta.pos] / eta.pivot;
            v[eta.pos] = vp;
            if vp != 0.0 {
                for &(i, a) in &eta.others {
                    v[i] -= a * vp;
                }
            }
        }
        v
    }

    /// Solves B^T u = c. `c` is indexed by basis position and overwritten; the
    /// result is indexed by row.
    pub fn btran(&self, c: &mut [f64]) -> Vec<f64> {
        for eta in self.etas.iter().rev() {
            let mut s = c[eta.pos];
            for &(i, a) in &eta.others {
                s -= a * c[i];
            }
            c[eta.pos] = s / eta.pivot;
        }
        let mut u = vec![0.0; self.m];
        for &(r, pos) in &self.front {
            u[r] = self.col_solve(pos, r, c[pos], &u);
        }
        let k = self.nuc_rows.len();
        if k > 0 {
            let mut w: Vec<f64> = self
                .nuc_cols
                .iter()
                .map(|&pos| {
                    let mut s = c[pos];
                    for &(r2, val) in &self.cols[pos] {
                        if self.nuc_row_slot[r2] == usize::MAX {
                            s -= val * u[r2];
                        }
                    }
                    s
                })
                .collect();
            lu_solve_transpose(&self.lu, k, &mut w);
            for (a, &pa) in self.perm.iter().enumerate() {
                u[self.nuc_rows[pa]] = w[a];
            }
        }
        for &(r, pos) in self.back.iter().rev() {
            u[r] = self.col_solve(pos, r, c[pos], &u);
        }
        u
    }

    fn col_solve(&self, pos: usize, r: usize, target: f64, u: &[f64]) -> f64 {
        let mut s = target;
        let mut piv = 0.0;
        for &(r2, val) in &self.cols[pos] {
            if r2 == r {
                piv = val;
            } else {
                s -= val * u[r2];
            }
        }
        s / piv
    }
}

fn entry(col: &[(usize, f64)], r: usize) -> f64 {
    col.iter().find(|(r2, _)| *r2 == r).map_or(0.0, |&(_, v)| v)
}

/// In-place LU with partial pivoting. Returns the row permutation `perm`
/// such that row a of the factorized matrix is original row perm[a].
fn dense_lu(a: &mut [f64], k: usize) -> Result<Vec<usize>, Singular> {
    let mut perm: Vec<usize> = (0..k).collect();
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for col in 0..k {
        let mut best = col;
        let mut best_abs = a[col * k + col].abs();
        for row in col + 1..k {
            let v = a[row * k + col].abs();
            if v > best_abs {
                best = row;
                best_abs = v;
            }
        }
        if best_abs <= NUCLEUS_PIVOT_TOL * scale {
            return Err(Singular);
        }
        if best != col {
            for t in 0..k {
                a.swap(col * k + t, best * k + t);
            }
            perm.swap(col, best);
        }
        let piv = a[col * k + col];
        for row in col + 1..k {
            let f = a[row * k + col] / piv;
            if f == 0.0 {
                continue;
            }
            a[row * k + col] = f;
            let (upper, lower) = a.split_at_mut(row * k);
            let src = &upper[col * k + col + 1..col * k + k];
            let dst = &mut lower[col + 1..k];
            for (d, s) in dst.iter_mut().zip(src) {
                *d -= f * s;
            }
        }
    }
    Ok(perm)
}

/// Solves L U z = z in place (z already permuted).
fn lu_solve(a: &[f64], k: usize, z: &mut [f64]) {
    for i in 0..k {
        let mut s = z[i];
        let row = &a[i * k..i * k + i];
        for (j, l) in row.iter().enumerate() {
            s -= l * z[j];
        }
        z[i] = s;
    }
    for i in (0..k).rev() {
        let mut s = z[i];
        for j in i + 1..k {
            s -= a[i * k + j] * z[j];
        }
        z[i] = s / a[i * k + i];
    }
}

/// Solves (L U)^T w = w in place; the caller applies the permutation.
fn lu_solve_transpose(a: &[f64], k: usize, w: &mut [f64]) {
    for i in 0..k {
        let wi = w[i] / a[i * k + i];
        w[i] = wi;
        if wi != 0.0 {
            for j in i + 1..k {
                w[j] -= a[i * k + j] * wi;
            }
        }
    }
    for i in (0..k).rev() {
        let wi = w[i];
        if wi != 0.0 {
            for j in 0..i {
                w[j] -= a[i * k + j] * wi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_to_cols(m: &[Vec<f64>]) -> Vec<Vec<(usize, f64)>> {
        let n = m.len();
        (0..n).map(|c| (0..n).filter(|&r| m[r][c] != 0.0).map(|r| (r, m[r][c])).collect()).collect()
    }

    fn mul(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
        m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    fn mul_t(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
        (0..m.len()).map(|c| (0..m.len()).map(|r| m[r][c] * v[r]).sum()).collect()
    }

    fn check(m: Vec<Vec<f64>>) {
        let f = Factor::new(m.len(), dense_to_cols(&m)).unwrap();
        let b: Vec<f64> = (0..m.len()).map(|i| 1.0 + i as f64 * 0.5).collect();
        let v = f.ftran(&mut b.clone());
        for (x, y) in mul(&m, &v).iter().zip(&b) {
            assert!((x - y).abs() < 1e-9, "ftran residual");
        }
        let u = f.btran(&mut b.clone());
        for (x, y) in mul_t(&m, &u).iter().zip(&b) {
            assert!((x - y).abs() < 1e-9, "btran residual");
        }
    }

    #[test]
    fn triangular_and_nucleus_mixes() {
        check(vec![vec![2.0, 0.0, 0.0], vec![1.0, 3.0, 0.0], vec![0.0, 1.0, 4.0]]);
        check(vec![vec![1.0, 1.0, 0.0], vec![1.0, -1.0, 1.0], vec![0.0, 1.0, 2.0]]);
        check(vec![
            vec![0.0, 1.0, 1.0, 0.0],
            vec![1.0, 0.0, 1.0, 1.0],
            vec![1.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, -1.0],
        ]);
        check(vec![
            vec![-1.0, 0.0, 1.0, 0.0, 0.0],
            vec![0.0, 1.0, 1.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0, 1.0],
            vec![0.0, 1.0, 0.0, -1.0, 1.0],
            vec![1.0, 0.0, 0.0, 1.0, 1.0],
        ]);
    }

    #[test]
    fn singular_detected() {
        let m = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert!(Factor::new(2, dense_to_cols(&m)).is_err());
        let z = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
        assert!(Factor::new(2, dense_to_cols(&z)).is_err());
    }

    #[test]
    fn eta_updates_match_refactor() {
        let m = vec![vec![2.0, 1.0, 0.0], vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 3.0]];
        let mut f = Factor::new(3, dense_to_cols(&m)).unwrap();
        let newcol = vec![1.0, 2.0, -1.0];
        let alpha = f.ftran(&mut newcol.clone());
        f.push_eta(1, &alpha);
        let mut m2 = m.clone();
        for r in 0..3 {
            m2[r][1] = newcol[r];
        }
        let b = vec![0.3, -1.0, 2.0];
        let v = f.ftran(&mut b.clone());
        for (x, y) in mul(&m2, &v).iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
        let u = f.btran(&mut b.clone());
        for (x, y) in mul_t(&m2, &u).iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}

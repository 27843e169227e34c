//! Sparse LU factorization of the simplex basis with product-form updates.
//!
//! The basis matrix is refactored from scratch with a left-looking sparse LU
//! (symbolic reachability per column, partial pivoting); between
//! refactorizations pivots are absorbed into an eta file, so FTRAN applies
//! the LU solve followed by the etas and BTRAN applies the transposed etas
//! followed by the transposed LU solve.

use crate::error::{Error, Result};

/// Column-compressed sparse matrix used to hand basis columns to the
/// factorization.
#[derive(Debug, Clone, Default)]
pub struct CscMatrix {
    pub m: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CscMatrix {
    pub fn new(m: usize) -> Self {
        CscMatrix {
            m,
            col_ptr: vec![0],
            row_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn num_cols(&self) -> usize {
        self.col_ptr.len() - 1
    }

    pub fn push_col(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) {
        for (r, v) in entries {
            debug_assert!(r < self.m);
            self.row_idx.push(r);
            self.values.push(v);
        }
        self.col_ptr.push(self.row_idx.len());
    }

    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.col_ptr[j], self.col_ptr[j + 1]);
        (&self.row_idx[s..e], &self.values[s..e])
    }
}

/// One product-form update: the basis column at `slot` was replaced, and the
/// replacement's basis-space representation had `pivot` at `slot` plus
/// `others` elsewhere.
#[derive(Debug, Clone)]
struct Eta {
    slot: usize,
    pivot: f64,
    others: Vec<(usize, f64)>,
}

/// LU factors of the basis plus the eta file accumulated since the last
/// refactorization.
#[derive(Debug, Clone)]
pub struct BasisFactors {
    m: usize,
    /// Unit lower factor, CSC indexed by pivot position; strictly-lower part.
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    /// Upper factor, CSC indexed by pivot position; strictly-upper part.
    u_ptr: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    u_diag: Vec<f64>,
    /// original row -> pivot position
    row_pos: Vec<usize>,
    /// pivot position -> original row
    pos_row: Vec<usize>,
    /// factorization position -> basis slot
    pos_slot: Vec<usize>,
    /// basis slot -> factorization position
    slot_pos: Vec<usize>,
    etas: Vec<Eta>,
}

impl BasisFactors {
    pub fn num_etas(&self) -> usize {
        self.etas.len()
    }

    /// Factors the m x m basis given as CSC columns (one per basis slot).
    /// Columns are processed in ascending-nonzero-count order, which keeps
    /// fill-in low on the near-triangular bases the simplex produces.
    pub fn factor(basis: &CscMatrix) -> Result<BasisFactors> {
        let m = basis.m;
        if basis.num_cols() != m {
            return Err(Error::Solver(format!(
                "basis is {}x{}, not square",
                m,
                basis.num_cols()
            )));
        }
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&j| (basis.col_ptr[j + 1] - basis.col_ptr[j], j));

        let mut f = BasisFactors {
            m,
            l_ptr: Vec::with_capacity(m + 1),
            l_idx: Vec::new(),
            l_val: Vec::new(),
            u_ptr: Vec::with_capacity(m + 1),
            u_idx: Vec::new(),
            u_val: Vec::new(),
            u_diag: Vec::with_capacity(m),
            row_pos: vec![usize::MAX; m],
            pos_row: Vec::with_capacity(m),
            pos_slot: Vec::with_capacity(m),
            slot_pos: vec![usize::MAX; m],
            etas: Vec::new(),
        };
        f.l_ptr.push(0);
        f.u_ptr.push(0);

        // dense scatter workspace + visited stamps + DFS stacks
        let mut x = vec![0.0f64; m];
        let mut stamp = vec![usize::MAX; m];
        let mut topo: Vec<usize> = Vec::with_capacity(m);
        let mut dfs_stack: Vec<(usize, usize)> = Vec::new();

        for (k, &slot) in order.iter().enumerate() {
            let (rows, vals) = basis.col(slot);

            // symbolic: rows reachable through already-pivoted L columns,
            // in reverse-topological order
            topo.clear();
            for &r in rows {
                if stamp[r] == k {
                    continue;
                }
                dfs_stack.push((r, 0));
                stamp[r] = k;
                while let Some(&mut (node, ref mut next)) = dfs_stack.last_mut() {
                    let pos = f.row_pos[node];
                    let mut descended = false;
                    if pos != usize::MAX {
                        let (s, e) = (f.l_ptr[pos], f.l_ptr[pos + 1]);
                        while *next < e - s {
                            let child = f.l_idx[s + *next];
                            *next += 1;
                            if stamp[child] != k {
                                stamp[child] = k;
                                dfs_stack.push((child, 0));
                                descended = true;
                                break;
                            }
                        }
                    }
                    if !descended {
                        topo.push(node);
                        dfs_stack.pop();
                    }
                }
            }

            // numeric: scatter then eliminate in topological order
            for (&r, &v) in rows.iter().zip(vals) {
                x[r] += v;
            }
            for &r in topo.iter().rev() {
                let pos = f.row_pos[r];
                if pos == usize::MAX {
                    continue;
                }
                let xr = x[r];
                if xr != 0.0 {
                    let (s, e) = (f.l_ptr[pos], f.l_ptr[pos + 1]);
                    for t in s..e {
                        x[f.l_idx[t]] -= f.l_val[t] * xr;
                    }
                }
            }

            // pivot: largest magnitude among not-yet-pivoted rows
            let mut pivot_row = usize::MAX;
            let mut pivot_abs = 0.0;
            for &r in topo.iter() {
                if f.row_pos[r] == usize::MAX && x[r].abs() > pivot_abs {
                    pivot_abs = x[r].abs();
                    pivot_row = r;
                }
            }
            if pivot_row == usize::MAX || pivot_abs < 1e-12 {
                for &r in topo.iter() {
                    x[r] = 0.0;
                }
                return Err(Error::Solver(format!(
                    "singular basis at pivot {k} (best pivot {pivot_abs:.3e})"
                )));
            }
            let diag = x[pivot_row];

            // gather: pivoted rows feed U, the rest feed L (scaled)
            for &r in topo.iter() {
                let v = x[r];
                x[r] = 0.0;
                if v == 0.0 || r == pivot_row {
                    continue;
                }
                let pos = f.row_pos[r];
                if pos != usize::MAX {
                    f.u_idx.push(pos);
                    f.u_val.push(v);
                } else {
                    f.l_idx.push(r);
                    f.l_val.push(v / diag);
                }
            }
            f.u_diag.push(diag);
            f.u_ptr.push(f.u_idx.len());
            f.l_ptr.push(f.l_idx.len());
            f.row_pos[pivot_row] = k;
            f.pos_row.push(pivot_row);
            f.pos_slot.push(slot);
            f.slot_pos[slot] = k;
        }

        // L currently indexes rows by original id; remap to pivot positions
        for idx in f.l_idx.iter_mut() {
            *idx = f.row_pos[*idx];
        }
        Ok(f)
    }

    /// Solves B x = b. `b` is indexed by row on input; the result is indexed
    /// by basis slot.
    pub fn ftran(&self, b: &mut [f64]) {
        let m = self.m;
        debug_assert_eq!(b.len(), m);
        // y = P b
        let mut y = vec![0.0; m];
        for r in 0..m {
            if b[r] != 0.0 {
                y[self.row_pos[r]] = b[r];
            }
        }
        // L z = y (unit lower, in place)
        for k in 0..m {
            let zk = y[k];
            if zk != 0.0 {
                for t in self.l_ptr[k]..self.l_ptr[k + 1] {
                    y[self.l_idx[t]] -= self.l_val[t] * zk;
                }
            }
        }
        // U w = z (in place)
        for k in (0..m).rev() {
            if y[k] != 0.0 {
                let wk = y[k] / self.u_diag[k];
                y[k] = wk;
                for t in self.u_ptr[k]..self.u_ptr[k + 1] {
                    y[self.u_idx[t]] -= self.u_val[t] * wk;
                }
            }
        }
        // x[slot] = w[position], then the eta file
        for r in b.iter_mut() {
            *r = 0.0;
        }
        for k in 0..m {
            if y[k] != 0.0 {
                b[self.pos_slot[k]] = y[k];
            }
        }
        for eta in &self.etas {
            let vr = b[eta.slot] / eta.pivot;
            b[eta.slot] = vr;
            if vr != 0.0 {
                for &(i, w) in &eta.others {
                    b[i] -= w * vr;
                }
            }
        }
    }

    /// Solves Bᵀ y = c. `c` is indexed by basis slot on input; the result is
    /// indexed by row.
    pub fn btran(&self, c: &mut [f64]) {
        let m = self.m;
        debug_assert_eq!(c.len(), m);
        for eta in self.etas.iter().rev() {
            let mut v = c[eta.slot];
            for &(i, w) in &eta.others {
                v -= w * c[i];
            }
            c[eta.slot] = v / eta.pivot;
        }
        // z[position] = c[slot]
        let mut z = vec![0.0; m];
        for slot in 0..m {
            if c[slot] != 0.0 {
                z[self.slot_pos[slot]] = c[slot];
            }
        }
        // Uᵀ w = z
        for k in 0..m {
            let mut v = z[k];
            for t in self.u_ptr[k]..self.u_ptr[k + 1] {
                v -= self.u_val[t] * z[self.u_idx[t]];
            }
            z[k] = v / self.u_diag[k];
        }
        // Lᵀ y = w
        for k in (0..m).rev() {
            let mut v = z[k];
            for t in self.l_ptr[k]..self.l_ptr[k + 1] {
                v -= self.l_val[t] * z[self.l_idx[t]];
            }
            z[k] = v;
        }
        // y[row] = result at its pivot position
        for r in c.iter_mut() {
            *r = 0.0;
        }
        for k in 0..m {
            if z[k] != 0.0 {
                c[self.pos_row[k]] = z[k];
            }
        }
    }

    /// Records the replacement of basis slot `slot` by a column whose FTRAN
    /// image is `w` (indexed by slot). Fails on a negligible pivot, which
    /// signals the caller to refactor.
    pub fn push_update(&mut self, slot: usize, w: &[f64]) -> Result<()> {
        let pivot = w[slot];
        if pivot.abs() < 1e-10 {
            return Err(Error::Solver(format!(
                "unstable basis update pivot {pivot:.3e}"
            )));
        }
        let others: Vec<(usize, f64)> = w
            .iter()
            .enumerate()
            .filter(|&(i, &v)| i != slot && v != 0.0)
            .map(|(i, &v)| (i, v))
            .collect();
        self.etas.push(Eta {
            slot,
            pivot,
            others,
        });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_to_csc(a: &[Vec<f64>]) -> CscMatrix {
        let m = a.len();
        let mut csc = CscMatrix::new(m);
        for j in 0..m {
            csc.push_col((0..m).filter(|&i| a[i][j] != 0.0).map(|i| (i, a[i][j])));
        }
        csc
    }

    fn mat_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter()
            .map(|row| row.iter().zip(x).map(|(r, v)| r * v).sum())
            .collect()
    }

    fn mat_t_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        let m = a.len();
        (0..m)
            .map(|j| (0..m).map(|i| a[i][j] * x[i]).sum())
            .collect()
    }

    fn max_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn identity_solves() {
        let a = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        let f = BasisFactors::factor(&dense_to_csc(&a)).unwrap();
        let mut b = vec![3.0, -1.0, 2.0];
        f.ftran(&mut b);
        assert_eq!(b, vec![3.0, -1.0, 2.0]);
        f.btran(&mut b);
        assert_eq!(b, vec![3.0, -1.0, 2.0]);
    }

    #[test]
    fn random_dense_ftran_btran() {
        // deterministic congruential fill
        let m = 12;
        let mut seed = 0x9e3779b9u64;
        let mut next = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        let a: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        let v = next();
                        if i == j {
                            v + 4.0
                        } else if v.abs() < 0.5 {
                            0.0
                        } else {
                            v
                        }
                    })
                    .collect()
            })
            .collect();
        let f = BasisFactors::factor(&dense_to_csc(&a)).unwrap();
        let x_true: Vec<f64> = (0..m).map(|i| (i as f64) - 4.5).collect();
        let mut b = mat_vec(&a, &x_true);
        f.ftran(&mut b);
        assert!(max_err(&b, &x_true) < 1e-9, "ftran error {}", max_err(&b, &x_true));
        let mut c = mat_t_vec(&a, &x_true);
        f.btran(&mut c);
        assert!(max_err(&c, &x_true) < 1e-9, "btran error {}", max_err(&c, &x_true));
    }

    #[test]
    fn singular_matrix_rejected() {
        let a = vec![
            vec![1.0, 2.0, 3.0],
            vec![2.0, 4.0, 6.0],
            vec![1.0, 0.0, 1.0],
        ];
        assert!(BasisFactors::factor(&dense_to_csc(&a)).is_err());
    }

    #[test]
    fn eta_update_matches_refactor() {
        let mut a = vec![
            vec![2.0, 1.0, 0.0, 0.0],
            vec![0.0, 3.0, 1.0, 0.0],
            vec![1.0, 0.0, 2.0, 1.0],
            vec![0.0, 1.0, 0.0, 4.0],
        ];
        let mut f = BasisFactors::factor(&dense_to_csc(&a)).unwrap();

        // replace slot 2 with a new column
        let new_col = vec![1.0, 1.0, 0.0, 2.0];
        let mut w = new_col.clone();
        f.ftran(&mut w);
        f.push_update(2, &w).unwrap();
        for i in 0..4 {
            a[i][2] = new_col[i];
        }
        assert_eq!(f.num_etas(), 1);

        let x_true = vec![1.0, -2.0, 0.5, 3.0];
        let mut b = mat_vec(&a, &x_true);
        f.ftran(&mut b);
        assert!(max_err(&b, &x_true) < 1e-9);
        let mut c = mat_t_vec(&a, &x_true);
        f.btran(&mut c);
        assert!(max_err(&c, &x_true) < 1e-9);

        // a second replacement stacked on the first
        let new_col2 = vec![0.0, 2.0, 1.0, 1.0];
        let mut w2 = new_col2.clone();
        f.ftran(&mut w2);
        f.push_update(0, &w2).unwrap();
        for i in 0..4 {
            a[i][0] = new_col2[i];
        }
        let mut b = mat_vec(&a, &x_true);
        f.ftran(&mut b);
        assert!(max_err(&b, &x_true) < 1e-9);
        let mut c = mat_t_vec(&a, &x_true);
        f.btran(&mut c);
        assert!(max_err(&c, &x_true) < 1e-9);
    }
}

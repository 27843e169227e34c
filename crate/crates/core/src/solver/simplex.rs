//! Bounded-variable revised simplex over sparse problem instances.
//!
//! Each row gets a logical column (slack for inequalities, an artificial
//! fixed at zero for equalities), so the all-logical basis always exists.
//! Feasibility is reached with a composite phase 1 that minimizes the total
//! bound violation of the basic variables through a piecewise-linear
//! (long-step) ratio test; phase 2 then prices the true objective. Pricing
//! uses devex reference weights through a periodically refreshed candidate
//! list, with Bland's rule as the anti-cycling fallback.
//!
//! [`prepare`] is run once per instance; bound overrides (used by
//! branch-and-bound to fix siting binaries) are applied per solve, so the
//! sparse matrix and the basis variable space are shared across the tree.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::model::{ProblemInstance, Sense, SolveStatus};
use crate::solver::lu::{BasisFactors, CscMatrix};
use crate::solver::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    Free,
}

/// Variable statuses over the computational variable space (kept structural
/// columns followed by one logical per kept row). Stable across bound
/// changes, so branch-and-bound children can start from the parent's basis.
#[derive(Debug, Clone)]
pub struct Basis(pub Vec<VarStatus>);

#[derive(Debug, Clone)]
pub struct LpOutcome {
    pub status: SolveStatus,
    pub objective: f64,
    /// Primal values over the original instance columns.
    pub x: Vec<f64>,
    /// Dual multipliers over the original instance rows.
    pub row_duals: Vec<f64>,
    pub basis: Basis,
    pub iterations: usize,
    /// (primal objective, valid dual bound) per phase-2 iteration, recorded
    /// when the config asks for it.
    pub duality_track: Vec<(f64, f64)>,
}

/// The instance after presolve, in computational form
/// `A x + s = b, l <= (x, s) <= u`.
pub struct Prep {
    pub n_orig_cols: usize,
    pub n_orig_rows: usize,
    /// computational structural column -> original column
    pub kept_cols: Vec<usize>,
    /// original column -> computational column (MAX if presolved out)
    pub col_map: Vec<usize>,
    /// computational row -> original row
    pub kept_rows: Vec<usize>,
    /// values of presolved-out columns, in original column space
    pub fixed_vals: Vec<f64>,
    /// objective contribution of the presolved-out columns
    pub fixed_obj: f64,
    pub m: usize,
    pub n_struct: usize,
    csc: CscMatrix,
    /// row-major mirror of `csc` for pivot-row scans
    csr_ptr: Vec<usize>,
    csr_col: Vec<usize>,
    csr_val: Vec<f64>,
    obj: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    /// detected during presolve (inconsistent fixings)
    pub trivially_infeasible: bool,
}

impl Prep {
    pub fn n_total(&self) -> usize {
        self.n_struct + self.m
    }

    fn col_entries(&self, j: usize) -> (&[usize], &[f64]) {
        self.csc.col(j)
    }
}

/// Removes columns fixed by their bounds (substituting them into the
/// right-hand side) and rows left without entries.
pub fn prepare(pi: &ProblemInstance) -> Result<Prep> {
    let n = pi.num_cols();
    let mut removed = vec![false; n];
    let mut fixed_vals = vec![0.0; n];
    for (j, col) in pi.columns.iter().enumerate() {
        if col.lower > col.upper {
            return Err(Error::Solver(format!(
                "column {} has empty bound interval",
                col.name
            )));
        }
        if col.lower == col.upper {
            removed[j] = true;
            fixed_vals[j] = col.lower;
        }
    }
    let fixed_obj: f64 = pi
        .columns
        .iter()
        .enumerate()
        .filter(|&(j, _)| removed[j])
        .map(|(j, c)| c.objective * fixed_vals[j])
        .sum();

    let mut kept_cols = Vec::with_capacity(n);
    let mut col_map = vec![usize::MAX; n];
    for j in 0..n {
        if !removed[j] {
            col_map[j] = kept_cols.len();
            kept_cols.push(j);
        }
    }
    let n_struct = kept_cols.len();

    let mut lower: Vec<f64> = kept_cols.iter().map(|&j| pi.columns[j].lower).collect();
    let mut upper: Vec<f64> = kept_cols.iter().map(|&j| pi.columns[j].upper).collect();
    let mut trivially_infeasible = false;

    // On assembled instances (num_demands > 0) the Eq3 combined-conservation
    // rows are exact sums of Eq2 and Eq6 rows, kept only as an audit guard.
    // They carry one full commodity incidence copy per demand -- about half
    // of all nonzeros -- so the computational system drops them; a zero dual
    // is always valid for a redundant row.
    let drop_guard_rows = pi.num_demands > 0;

    let mut kept_rows = Vec::with_capacity(pi.num_rows());
    let mut row_senses = Vec::new();
    let mut rhs = Vec::new();
    for (i, row) in pi.rows.iter().enumerate() {
        if drop_guard_rows && row.provenance == crate::model::Provenance::Eq3 {
            continue;
        }
        let mut b = row.rhs;
        let mut live = 0usize;
        for &(j, a) in &row.entries {
            if removed[j] {
                b -= a * fixed_vals[j];
            } else {
                live += 1;
            }
        }
        if live == 0 {
            let ok = match row.sense {
                Sense::Eq => b.abs() <= 1e-9,
                Sense::Le => b >= -1e-9,
                Sense::Ge => b <= 1e-9,
            };
            if !ok {
                trivially_infeasible = true;
            }
            continue;
        }
        kept_rows.push(i);
        row_senses.push(row.sense);
        rhs.push(b);
    }
    let m = kept_rows.len();

    // row-major entries -> CSC over (kept rows, kept cols)
    let mut counts = vec![0usize; n_struct];
    for &i in &kept_rows {
        for &(j, _) in &pi.rows[i].entries {
            if col_map[j] != usize::MAX {
                counts[col_map[j]] += 1;
            }
        }
    }
    let mut col_ptr = vec![0usize; n_struct + 1];
    for j in 0..n_struct {
        col_ptr[j + 1] = col_ptr[j] + counts[j];
    }
    let nnz = col_ptr[n_struct];
    let mut row_idx = vec![0usize; nnz];
    let mut values = vec![0.0f64; nnz];
    let mut cursor = col_ptr.clone();
    for (ci, &i) in kept_rows.iter().enumerate() {
        for &(j, a) in &pi.rows[i].entries {
            let cj = col_map[j];
            if cj != usize::MAX {
                row_idx[cursor[cj]] = ci;
                values[cursor[cj]] = a;
                cursor[cj] += 1;
            }
        }
    }

    // row-major mirror for pivot-row scans
    let mut csr_ptr = vec![0usize; m + 1];
    for (ci, &i) in kept_rows.iter().enumerate() {
        let live = pi.rows[i]
            .entries
            .iter()
            .filter(|&&(j, _)| col_map[j] != usize::MAX)
            .count();
        csr_ptr[ci + 1] = csr_ptr[ci] + live;
    }
    let mut csr_col = vec![0usize; nnz];
    let mut csr_val = vec![0.0f64; nnz];
    {
        let mut cur = csr_ptr.clone();
        for (ci, &i) in kept_rows.iter().enumerate() {
            for &(j, a) in &pi.rows[i].entries {
                let cj = col_map[j];
                if cj != usize::MAX {
                    csr_col[cur[ci]] = cj;
                    csr_val[cur[ci]] = a;
                    cur[ci] += 1;
                }
            }
        }
    }

    let obj: Vec<f64> = kept_cols.iter().map(|&j| pi.columns[j].objective).collect();

    // logicals: slack in [0, inf) for <=, in (-inf, 0] for >=, fixed 0 for =
    for sense in &row_senses {
        match sense {
            Sense::Eq => {
                lower.push(0.0);
                upper.push(0.0);
            }
            Sense::Le => {
                lower.push(0.0);
                upper.push(f64::INFINITY);
            }
            Sense::Ge => {
                lower.push(f64::NEG_INFINITY);
                upper.push(0.0);
            }
        }
    }

    Ok(Prep {
        n_orig_cols: n,
        n_orig_rows: pi.num_rows(),
        kept_cols,
        col_map,
        kept_rows,
        fixed_vals,
        fixed_obj,
        m,
        n_struct,
        csc: CscMatrix {
            m,
            col_ptr,
            row_idx,
            values,
        },
        csr_ptr,
        csr_col,
        csr_val,
        obj,
        lower,
        upper,
        rhs,
        trivially_infeasible,
    })
}

struct SimplexState<'a> {
    prep: &'a Prep,
    cfg: &'a SolverConfig,
    /// effective bounds over the computational variable space (prep bounds
    /// plus per-solve overrides)
    lower: Vec<f64>,
    upper: Vec<f64>,
    status: Vec<VarStatus>,
    basis: Vec<usize>,
    var_slot: Vec<usize>,
    xb: Vec<f64>,
    factors: BasisFactors,
    work: Vec<f64>,
    y: Vec<f64>,
    candidates: Vec<usize>,
    bland: bool,
    degen_streak: usize,
    iterations: usize,
    duality_track: Vec<(f64, f64)>,
    /// devex reference weights, one per computational variable
    gamma: Vec<f64>,
    /// temporary cost jitter applied while the dual simplex runs, to break
    /// the dual degeneracy of layer-replicated arc costs; zero otherwise
    cost_perturb: Vec<f64>,
    /// scratch accumulator over structural columns for pivot-row scans
    acc: Vec<f64>,
    touched: Vec<usize>,
}

const PIVOT_TOL: f64 = 1e-9;
const DEGEN_STEP: f64 = 1e-10;
const CANDIDATE_LIST: usize = 64;
/// devex weights above this trigger a reference-framework reset
const DEVEX_RESET: f64 = 1e10;

enum Pricing {
    Enter { var: usize, dir: f64 },
    None,
}

impl<'a> SimplexState<'a> {
    fn nb_val(&self, j: usize) -> f64 {
        match self.status[j] {
            VarStatus::AtLower => self.lower[j],
            VarStatus::AtUpper => self.upper[j],
            VarStatus::Free => 0.0,
            VarStatus::Basic => unreachable!("basic variable priced as nonbasic"),
        }
    }

    /// Scatters column `j` of the computational matrix (structural or
    /// logical) into dense row space via `f`.
    fn scan_col(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.prep.n_struct {
            let (rows, vals) = self.prep.col_entries(j);
            for (&r, &v) in rows.iter().zip(vals) {
                f(r, v);
            }
        } else {
            f(j - self.prep.n_struct, 1.0);
        }
    }

    fn col_dot(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.prep.n_struct {
            let (rows, vals) = self.prep.col_entries(j);
            rows.iter().zip(vals).map(|(&r, &v)| v * y[r]).sum()
        } else {
            y[j - self.prep.n_struct]
        }
    }

    fn obj_coeff(&self, j: usize) -> f64 {
        if j < self.prep.n_struct {
            self.prep.obj[j] + self.cost_perturb[j]
        } else {
            0.0
        }
    }

    fn refactor(&mut self) -> Result<()> {
        let mut cols = CscMatrix::new(self.prep.m);
        let mut buf: Vec<(usize, f64)> = Vec::new();
        for &v in &self.basis {
            buf.clear();
            self.scan_col(v, |r, a| buf.push((r, a)));
            cols.push_col(buf.iter().copied());
        }
        self.factors = BasisFactors::factor(&cols)?;
        Ok(())
    }

    fn recompute_xb(&mut self) {
        let m = self.prep.m;
        self.work[..m].copy_from_slice(&self.prep.rhs);
        for j in 0..self.prep.n_total() {
            if self.status[j] == VarStatus::Basic {
                continue;
            }
            let v = self.nb_val(j);
            if v != 0.0 {
                if j < self.prep.n_struct {
                    let (rows, vals) = self.prep.col_entries(j);
                    for (&r, &a) in rows.iter().zip(vals) {
                        self.work[r] -= a * v;
                    }
                } else {
                    self.work[j - self.prep.n_struct] -= v;
                }
            }
        }
        self.factors.ftran(&mut self.work[..m]);
        self.xb.copy_from_slice(&self.work[..m]);
    }

    /// (total, max) bound violation over the basic variables.
    fn infeasibility(&self) -> (f64, f64) {
        let mut total = 0.0;
        let mut max = 0.0f64;
        for (slot, &v) in self.basis.iter().enumerate() {
            let x = self.xb[slot];
            let viol = (self.lower[v] - x).max(0.0) + (x - self.upper[v]).max(0.0);
            total += viol;
            max = max.max(viol);
        }
        (total, max)
    }

    /// Phase-aware cost of basic slot `slot`.
    fn basic_cost(&self, slot: usize, phase1: bool) -> f64 {
        let v = self.basis[slot];
        if phase1 {
            let x = self.xb[slot];
            if x < self.lower[v] - self.cfg.feas_tol {
                -1.0
            } else if x > self.upper[v] + self.cfg.feas_tol {
                1.0
            } else {
                0.0
            }
        } else {
            self.obj_coeff(v)
        }
    }

    fn reduced_cost(&self, j: usize, phase1: bool) -> f64 {
        let c = if phase1 { 0.0 } else { self.obj_coeff(j) };
        c - self.col_dot(j, &self.y)
    }

    fn eligible(&self, j: usize, rc: f64) -> Option<f64> {
        // a variable pinned by its bounds can never move
        if self.lower[j] == self.upper[j] {
            return None;
        }
        let dtol = self.cfg.opt_tol.max(1e-9) * (1.0 + self.obj_coeff(j).abs());
        match self.status[j] {
            VarStatus::AtLower if rc < -dtol => Some(1.0),
            VarStatus::AtUpper if rc > dtol => Some(-1.0),
            VarStatus::Free if rc < -dtol => Some(1.0),
            VarStatus::Free if rc > dtol => Some(-1.0),
            _ => None,
        }
    }

    /// Full pricing pass; refills the candidate list and returns the best
    /// entering variable, or None when the current point is phase-optimal.
    fn price_full(&mut self, phase1: bool) -> Pricing {
        let n = self.prep.n_total();
        self.candidates.clear();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut scored: Vec<(f64, usize)> = Vec::new();
        for j in 0..n {
            if self.status[j] == VarStatus::Basic {
                continue;
            }
            let rc = self.reduced_cost(j, phase1);
            if let Some(dir) = self.eligible(j, rc) {
                if self.bland {
                    return Pricing::Enter { var: j, dir };
                }
                let score = rc * rc / self.gamma[j];
                scored.push((score, j));
                if best.map(|(s, _, _)| score > s).unwrap_or(true) {
                    best = Some((score, j, dir));
                }
            }
        }
        match best {
            Some((_, var, dir)) => {
                scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
                scored.truncate(CANDIDATE_LIST);
                self.candidates = scored.iter().map(|&(_, j)| j).collect();
                Pricing::Enter { var, dir }
            }
            None => Pricing::None,
        }
    }

    /// Prices only the candidate list; falls back to a full pass when the
    /// list is exhausted.
    fn price(&mut self, phase1: bool) -> Pricing {
        if self.bland || self.candidates.is_empty() {
            return self.price_full(phase1);
        }
        let mut best: Option<(f64, usize, f64)> = None;
        for idx in 0..self.candidates.len() {
            let j = self.candidates[idx];
            if self.status[j] == VarStatus::Basic {
                continue;
            }
            let rc = self.reduced_cost(j, phase1);
            if let Some(dir) = self.eligible(j, rc) {
                let score = rc * rc / self.gamma[j];
                if best.map(|(s, _, _)| score > s).unwrap_or(true) {
                    best = Some((score, j, dir));
                }
            }
        }
        match best {
            Some((_, var, dir)) => Pricing::Enter { var, dir },
            None => self.price_full(phase1),
        }
    }

    /// Valid lower bound on the objective from the Lagrangian at the current
    /// duals: y'b plus each variable's best contribution of its reduced cost
    /// over its bound interval.
    fn lagrangian_bound(&self) -> f64 {
        let mut bound: f64 = self.prep.rhs.iter().zip(&self.y).map(|(b, y)| b * y).sum();
        for j in 0..self.prep.n_total() {
            let rc = self.obj_coeff(j) - self.col_dot(j, &self.y);
            if rc.abs() < 1e-12 {
                continue;
            }
            let best = if rc > 0.0 {
                rc * self.lower[j]
            } else {
                rc * self.upper[j]
            };
            if best.is_nan() || best == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            bound += best;
        }
        bound + self.prep.fixed_obj
    }

    /// Recomputes true-objective reduced costs for every nonbasic variable.
    /// Returns false when some sign condition is violated beyond `dtol`,
    /// i.e. the basis is not dual feasible.
    fn refresh_rc(&mut self, rc: &mut [f64], dtol: f64) -> bool {
        let m = self.prep.m;
        for i in 0..m {
            self.y[i] = self.obj_coeff(self.basis[i]);
        }
        let mut y = std::mem::take(&mut self.y);
        self.factors.btran(&mut y);
        self.y = y;
        let mut ok = true;
        for j in 0..self.prep.n_total() {
            if self.status[j] == VarStatus::Basic || self.lower[j] == self.upper[j] {
                rc[j] = 0.0;
                continue;
            }
            let r = self.reduced_cost(j, false);
            rc[j] = r;
            ok &= match self.status[j] {
                VarStatus::AtLower => r >= -dtol,
                VarStatus::AtUpper => r <= dtol,
                VarStatus::Free => r.abs() <= dtol,
                VarStatus::Basic => true,
            };
        }
        ok
    }

    fn primal_objective(&self) -> f64 {
        let mut obj = self.prep.fixed_obj;
        for j in 0..self.prep.n_struct {
            let v = match self.status[j] {
                VarStatus::Basic => self.xb[self.var_slot[j]],
                _ => self.nb_val(j),
            };
            obj += self.prep.obj[j] * v;
        }
        obj
    }
}

/// Blocking candidate from the ratio test.
struct Block {
    slot: usize,
    step: f64,
    to_upper: bool,
    rate: f64,
}

/// Solves the prepared LP. `overrides` tightens bounds of original columns
/// for this solve only; `start` warm-starts from a basis over the same
/// computational variable space.
pub fn solve_prepared(
    prep: &Prep,
    cfg: &SolverConfig,
    start: Option<&Basis>,
    overrides: &[(usize, f64, f64)],
) -> Result<LpOutcome> {
    if prep.trivially_infeasible {
        return Ok(infeasible_outcome(prep, overrides));
    }
    let m = prep.m;
    let n_total = prep.n_total();

    let mut lower = prep.lower.clone();
    let mut upper = prep.upper.clone();
    for &(j, lo, hi) in overrides {
        let cj = prep.col_map[j];
        if cj == usize::MAX {
            if lo > prep.fixed_vals[j] + 1e-12 || hi < prep.fixed_vals[j] - 1e-12 {
                return Ok(infeasible_outcome(prep, overrides));
            }
            continue;
        }
        lower[cj] = lower[cj].max(lo);
        upper[cj] = upper[cj].min(hi);
        if lower[cj] > upper[cj] {
            return Ok(infeasible_outcome(prep, overrides));
        }
    }

    let mut status: Vec<VarStatus> = Vec::with_capacity(n_total);
    let mut ok_start = false;
    if let Some(b) = start {
        if b.0.len() == n_total && b.0.iter().filter(|&&s| s == VarStatus::Basic).count() == m {
            status = b.0.clone();
            // a warm-started nonbasic variable may sit at a bound that no
            // longer exists; repair its status
            for j in 0..n_total {
                match status[j] {
                    VarStatus::AtLower if lower[j].is_infinite() => {
                        status[j] = if upper[j].is_finite() {
                            VarStatus::AtUpper
                        } else {
                            VarStatus::Free
                        };
                    }
                    VarStatus::AtUpper if upper[j].is_infinite() => {
                        status[j] = if lower[j].is_finite() {
                            VarStatus::AtLower
                        } else {
                            VarStatus::Free
                        };
                    }
                    _ => {}
                }
            }
            ok_start = true;
        }
    }
    if !ok_start {
        status.clear();
        for j in 0..prep.n_struct {
            status.push(if lower[j].is_finite() {
                VarStatus::AtLower
            } else if upper[j].is_finite() {
                VarStatus::AtUpper
            } else {
                VarStatus::Free
            });
        }
        for _ in 0..m {
            status.push(VarStatus::Basic);
        }
    }

    let mut basis = Vec::with_capacity(m);
    let mut var_slot = vec![usize::MAX; n_total];
    for j in 0..n_total {
        if status[j] == VarStatus::Basic {
            var_slot[j] = basis.len();
            basis.push(j);
        }
    }

    let mut st = SimplexState {
        prep,
        cfg,
        lower,
        upper,
        status,
        basis,
        var_slot,
        xb: vec![0.0; m],
        factors: BasisFactors::factor(&CscMatrix::new(0))?,
        work: vec![0.0; m.max(1)],
        y: vec![0.0; m],
        candidates: Vec::new(),
        bland: false,
        degen_streak: 0,
        iterations: 0,
        duality_track: Vec::new(),
        gamma: vec![1.0; n_total],
        cost_perturb: vec![0.0; prep.n_struct],
        acc: vec![0.0; prep.n_struct],
        touched: Vec::new(),
    };
    if st.refactor().is_err() {
        // a stale warm-start basis can be singular; restart from logicals
        for j in 0..prep.n_struct {
            st.status[j] = if st.lower[j].is_finite() {
                VarStatus::AtLower
            } else if st.upper[j].is_finite() {
                VarStatus::AtUpper
            } else {
                VarStatus::Free
            };
            st.var_slot[j] = usize::MAX;
        }
        st.basis.clear();
        for i in 0..m {
            st.status[prep.n_struct + i] = VarStatus::Basic;
            st.var_slot[prep.n_struct + i] = i;
            st.basis.push(prep.n_struct + i);
        }
        st.refactor()?;
    }
    st.recompute_xb();

    let max_iters = if cfg.max_iters > 0 {
        cfg.max_iters
    } else {
        50_000 + 40 * (m + n_total)
    };
    let started = Instant::now();
    let refactor_every = cfg.refactor_every.max(2);
    let bland_trigger = 10 * m.max(1);

    // With every cost nonnegative and all flows starting at a bound, the
    // slack basis is dual feasible, so the dual simplex needs no phase 1 and
    // is immune to the primal degeneracy of the zero-rhs flow rows. It hands
    // back to the primal path when the start is not dual feasible.
    if !cfg.track_weak_duality {
        if let Some(status) = dual_simplex(&mut st, cfg, refactor_every, max_iters, &started)? {
            return Ok(extract(prep, cfg, &st, status));
        }
    }

    let mut w = vec![0.0; m];
    let mut beta = vec![0.0; m];
    let trace_from: usize = std::env::var("SIMPLEX_TRACE_FROM")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(usize::MAX);
    let final_status;
    loop {
        if st.iterations >= max_iters {
            return Err(Error::Solver(format!(
                "iteration cap {max_iters} reached (objective {:.6})",
                st.primal_objective()
            )));
        }
        if cfg.time_limit_s > 0.0
            && st.iterations % 128 == 0
            && started.elapsed().as_secs_f64() > cfg.time_limit_s
        {
            return Err(Error::Solver(format!(
                "time limit {}s reached after {} iterations",
                cfg.time_limit_s, st.iterations
            )));
        }
        if st.factors.num_etas() >= refactor_every {
            st.refactor()?;
            st.recompute_xb();
        }

        let (infeas, max_viol) = st.infeasibility();
        let phase1 = max_viol > cfg.feas_tol;

        // duals for the phase cost
        for i in 0..m {
            st.y[i] = st.basic_cost(i, phase1);
        }
        let mut y = std::mem::take(&mut st.y);
        st.factors.btran(&mut y);
        st.y = y;

        if cfg.verbose && st.iterations % 1000 == 0 {
            log::info!(
                "iter {:>7} phase {} obj {:.6} infeas {:.3e} etas {}",
                st.iterations,
                if phase1 { 1 } else { 2 },
                st.primal_objective(),
                infeas,
                st.factors.num_etas()
            );
        }
        if cfg.track_weak_duality && !phase1 {
            let primal = st.primal_objective();
            let bound = st.lagrangian_bound();
            st.duality_track.push((primal, bound));
        }

        let (q, dir) = match st.price(phase1) {
            Pricing::Enter { var, dir } => (var, dir),
            Pricing::None => {
                final_status = if phase1 {
                    SolveStatus::Infeasible
                } else {
                    SolveStatus::Optimal
                };
                break;
            }
        };

        // w = B^{-1} a_q ; x_B moves at rate -dir*w per unit step of x_q
        for v in w.iter_mut() {
            *v = 0.0;
        }
        st.scan_col(q, |r, a| w[r] += a);
        st.factors.ftran(&mut w);

        let t_bound = if st.lower[q].is_finite() && st.upper[q].is_finite() {
            st.upper[q] - st.lower[q]
        } else {
            f64::INFINITY
        };

        let mut block: Option<Block> = None;
        if phase1 {
            // piecewise-linear ratio test: the phase-1 objective is a convex
            // piecewise-linear function of the step; walk its breakpoints
            // (basics reaching bounds) while the slope stays negative and
            // stop at the first one that turns it nonnegative. This passes
            // whole runs of violated rows in a single pivot instead of one
            // pivot per row.
            struct Bp {
                t: f64,
                dslope: f64,
                slot: usize,
                to_upper: bool,
            }
            let mut bps: Vec<Bp> = Vec::new();
            for slot in 0..m {
                let g = dir * w[slot];
                if g.abs() <= PIVOT_TOL {
                    continue;
                }
                let v = st.basis[slot];
                let x = st.xb[slot];
                let (lo, hi) = (st.lower[v], st.upper[v]);
                if g > 0.0 {
                    // x decreases at rate g
                    if x > hi + cfg.feas_tol {
                        bps.push(Bp {
                            t: (x - hi) / g,
                            dslope: g,
                            slot,
                            to_upper: true,
                        });
                        if lo.is_finite() {
                            bps.push(Bp {
                                t: (x - lo) / g,
                                dslope: g,
                                slot,
                                to_upper: false,
                            });
                        }
                    } else if x >= lo - cfg.feas_tol && lo.is_finite() {
                        bps.push(Bp {
                            t: ((x - lo) / g).max(0.0),
                            dslope: g,
                            slot,
                            to_upper: false,
                        });
                    }
                } else {
                    // x increases at rate -g
                    if x < lo - cfg.feas_tol {
                        bps.push(Bp {
                            t: (x - lo) / g,
                            dslope: -g,
                            slot,
                            to_upper: false,
                        });
                        if hi.is_finite() {
                            bps.push(Bp {
                                t: (x - hi) / g,
                                dslope: -g,
                                slot,
                                to_upper: true,
                            });
                        }
                    } else if x <= hi + cfg.feas_tol && hi.is_finite() {
                        bps.push(Bp {
                            t: ((x - hi) / g).max(0.0),
                            dslope: -g,
                            slot,
                            to_upper: true,
                        });
                    }
                }
            }
            // the entering variable hitting its own far bound: a flip
            if t_bound.is_finite() {
                bps.push(Bp {
                    t: t_bound,
                    dslope: 1.0,
                    slot: usize::MAX,
                    to_upper: false,
                });
            }
            bps.sort_by(|a, b| a.t.total_cmp(&b.t));
            let mut slope = st.reduced_cost(q, true);
            let mut chosen: Option<usize> = None;
            for (i, bp) in bps.iter().enumerate() {
                slope += bp.dslope;
                if slope >= -1e-12 {
                    chosen = Some(i);
                    break;
                }
            }
            if let Some(mut i) = chosen {
                // among breakpoints at (numerically) the same step, prefer
                // the largest pivot element for stability
                let t_star = bps[i].t;
                let mut k = i + 1;
                while k < bps.len() && bps[k].t <= t_star + 1e-12 {
                    if bps[k].dslope > bps[i].dslope && bps[k].slot != usize::MAX {
                        i = k;
                    }
                    k += 1;
                }
                let bp = &bps[i];
                if bp.slot != usize::MAX {
                    block = Some(Block {
                        slot: bp.slot,
                        step: t_star.max(0.0),
                        to_upper: bp.to_upper,
                        rate: dir * w[bp.slot],
                    });
                } else {
                    // slope turned at the entering variable's own bound
                    block = None;
                }
            } else if !bps.is_empty() {
                return Err(Error::Solver(
                    "phase-1 descent unbounded; inconsistent bounds".into(),
                ));
            }
        } else {
            for slot in 0..m {
                let g = dir * w[slot];
                if g.abs() <= PIVOT_TOL {
                    continue;
                }
                let v = st.basis[slot];
                let x = st.xb[slot];
                let (lo, hi) = (st.lower[v], st.upper[v]);
                // x_basic moves by -t*g; find the first bound in that direction
                let cand: Option<(f64, bool)> = if g > 0.0 && lo.is_finite() {
                    Some((((x - lo) / g).max(0.0), false))
                } else if g < 0.0 && hi.is_finite() {
                    Some((((x - hi) / g).max(0.0), true))
                } else {
                    None
                };
                if let Some((step, to_upper)) = cand {
                    let better = match &block {
                        None => true,
                        Some(b) => {
                            if st.bland {
                                step < b.step - 1e-12
                                    || (step < b.step + 1e-12 && v < st.basis[b.slot])
                            } else {
                                step < b.step - 1e-12
                                    || (step < b.step + 1e-12 && g.abs() > b.rate.abs())
                            }
                        }
                    };
                    if better {
                        block = Some(Block {
                            slot,
                            step,
                            to_upper,
                            rate: g,
                        });
                    }
                }
            }
        }

        let t_block = block.as_ref().map(|b| b.step).unwrap_or(f64::INFINITY);
        if st.iterations >= trace_from {
            let rc = st.reduced_cost(q, phase1);
            log::info!(
                "TR it={} p{} q={} rc={:.3e} g={:.3e} tb={:.3e} tk={:.3e} leave={} a={:.3e} ds={} infeas={:.9e}",
                st.iterations,
                if phase1 { 1 } else { 2 },
                q,
                rc,
                st.gamma[q],
                t_bound,
                t_block,
                block.as_ref().map(|b| st.basis[b.slot] as i64).unwrap_or(-1),
                block.as_ref().map(|b| b.rate).unwrap_or(0.0),
                st.degen_streak,
                infeas,
            );
        }
        st.iterations += 1;

        if t_bound <= t_block {
            if t_bound.is_infinite() {
                if phase1 {
                    return Err(Error::Solver(
                        "phase-1 objective unbounded; inconsistent bounds".into(),
                    ));
                }
                final_status = SolveStatus::Unbounded;
                break;
            }
            // bound flip: no basis change
            for slot in 0..m {
                st.xb[slot] -= t_bound * dir * w[slot];
            }
            st.status[q] = match st.status[q] {
                VarStatus::AtLower => VarStatus::AtUpper,
                VarStatus::AtUpper => VarStatus::AtLower,
                other => other,
            };
            if t_bound <= DEGEN_STEP {
                st.degen_streak += 1;
                if st.degen_streak > bland_trigger && !st.bland {
                    st.bland = true;
                    st.candidates.clear();
                }
            } else {
                st.degen_streak = 0;
            }
            continue;
        }

        let b = block.expect("blocking slot exists when step is finite");
        let t = b.step;
        for slot in 0..m {
            st.xb[slot] -= t * dir * w[slot];
        }
        let entering_value = match st.status[q] {
            VarStatus::AtLower => st.lower[q] + dir * t,
            VarStatus::AtUpper => st.upper[q] + dir * t,
            VarStatus::Free => dir * t,
            VarStatus::Basic => unreachable!(),
        };
        let leaving = st.basis[b.slot];
        st.status[leaving] = if b.to_upper {
            VarStatus::AtUpper
        } else {
            VarStatus::AtLower
        };
        st.var_slot[leaving] = usize::MAX;
        st.status[q] = VarStatus::Basic;
        st.var_slot[q] = b.slot;
        st.basis[b.slot] = q;
        st.xb[b.slot] = entering_value;

        // devex reference-weight update using the pivot row of the
        // outgoing basis
        let alpha_q = b.rate * dir; // = w[b.slot]
        if alpha_q.abs() > PIVOT_TOL {
            let ref_rate = (st.gamma[q].max(1.0) / (alpha_q * alpha_q)).max(1.0);
            beta.fill(0.0);
            beta[b.slot] = 1.0;
            st.factors.btran(&mut beta);
            let mut max_gamma = ref_rate;
            // the pivot-row entry of column j is sum_r a_rj * beta_r, so only
            // columns meeting beta's support can change weight
            st.touched.clear();
            for (r, &br) in beta.iter().enumerate() {
                if br.abs() <= 1e-13 {
                    continue;
                }
                // logical of row r has the single entry beta_r
                let lj = st.prep.n_struct + r;
                if st.status[lj] != VarStatus::Basic {
                    let cand = br * br * ref_rate;
                    if cand > st.gamma[lj] {
                        st.gamma[lj] = cand;
                    }
                    if st.gamma[lj] > max_gamma {
                        max_gamma = st.gamma[lj];
                    }
                }
                for k in st.prep.csr_ptr[r]..st.prep.csr_ptr[r + 1] {
                    let j = st.prep.csr_col[k];
                    if st.acc[j] == 0.0 {
                        st.touched.push(j);
                    }
                    st.acc[j] += st.prep.csr_val[k] * br;
                }
            }
            for ti in 0..st.touched.len() {
                let j = st.touched[ti];
                let a = st.acc[j];
                st.acc[j] = 0.0;
                if st.status[j] == VarStatus::Basic || a == 0.0 {
                    continue;
                }
                let cand = a * a * ref_rate;
                if cand > st.gamma[j] {
                    st.gamma[j] = cand;
                }
                if st.gamma[j] > max_gamma {
                    max_gamma = st.gamma[j];
                }
            }
            st.gamma[leaving] = ref_rate;
            if max_gamma > DEVEX_RESET {
                st.gamma.iter_mut().for_each(|g| *g = 1.0);
            }
        }

        if st.factors.push_update(b.slot, &w).is_err() {
            st.refactor()?;
            st.recompute_xb();
        }

        if t <= DEGEN_STEP {
            st.degen_streak += 1;
            if st.degen_streak > bland_trigger && !st.bland {
                st.bland = true;
                st.candidates.clear();
            }
        } else {
            st.degen_streak = 0;
            st.bland = false;
        }
    }

    Ok(extract(prep, cfg, &st, final_status))
}

/// Runs the dual simplex from the current basis. Returns the terminal
/// status, or `None` when the basis is not dual feasible (cold starts with
/// negative costs, or bad numerical drift) and the primal algorithm should
/// take over from the current state.
fn dual_simplex(
    st: &mut SimplexState,
    cfg: &SolverConfig,
    refactor_every: usize,
    max_iters: usize,
    started: &Instant,
) -> Result<Option<SolveStatus>> {
    let dtol = cfg.opt_tol.max(1e-9);
    {
        // quick dual-feasibility screen before paying for a perturbation
        let mut rc = vec![0.0; st.prep.n_total()];
        if !st.refresh_rc(&mut rc, 10.0 * dtol) {
            return Ok(None);
        }
    }

    // Arc costs repeat identically across SoC layers, so the dual ratio test
    // ties constantly and the dual objective stalls. A deterministic cost
    // jitter, signed to keep the current basis dual feasible, breaks the
    // ties; it is removed again below and any residual error is cleaned up
    // by a primal phase-2 pass.
    for j in 0..st.prep.n_struct {
        let u = 0.5 + ((j.wrapping_mul(2654435761) >> 8) & 0xFFFF) as f64 / 65536.0;
        let eps = 1e-7 * (1.0 + st.prep.obj[j].abs()) * u;
        st.cost_perturb[j] = match st.status[j] {
            VarStatus::AtUpper => -eps,
            VarStatus::Free => 0.0,
            _ => eps,
        };
    }

    let res = dual_simplex_inner(st, cfg, refactor_every, max_iters, started);
    st.cost_perturb.iter_mut().for_each(|p| *p = 0.0);
    match res? {
        Some(SolveStatus::Optimal) => {
            // verify optimality against the true costs; otherwise let the
            // primal algorithm finish from this (primal feasible) basis
            let mut rc = vec![0.0; st.prep.n_total()];
            if st.refresh_rc(&mut rc, 10.0 * dtol) {
                Ok(Some(SolveStatus::Optimal))
            } else {
                Ok(None)
            }
        }
        other => Ok(other),
    }
}

fn dual_simplex_inner(
    st: &mut SimplexState,
    cfg: &SolverConfig,
    refactor_every: usize,
    max_iters: usize,
    started: &Instant,
) -> Result<Option<SolveStatus>> {
    let m = st.prep.m;
    let n_struct = st.prep.n_struct;
    let dtol = cfg.opt_tol.max(1e-9);

    let mut rc = vec![0.0; st.prep.n_total()];
    if !st.refresh_rc(&mut rc, 1e-6_f64.max(10.0 * dtol)) {
        return Ok(None);
    }

    let mut rho = vec![0.0; m];
    let mut tau = vec![0.0; m];
    let mut w = vec![0.0; m];
    // pivot row over the nonbasic variables: (variable, sign-adjusted entry)
    let mut row: Vec<(usize, f64)> = Vec::new();
    // steepest-edge row weights ~ ||B^{-T} e_i||^2 (Forrest-Goldfarb update,
    // exact pivot-row weight recomputed from rho each iteration)
    let mut dse = vec![1.0; m];
    // refreshed this iteration with nothing violated => optimal
    let mut verified = false;

    let timing = std::env::var("SIMPLEX_TIMING").is_ok();
    let mut tm = [0.0f64; 8]; // scan, btran, row, ratio, ftran, dse, update, refactor
    let mut rho_nnz_acc = 0usize;
    let mut row_len_acc = 0usize;
    let mut clock = Instant::now();
    let mut lap = |tm: &mut [f64; 8], clock: &mut Instant, k: usize| {
        let now = Instant::now();
        tm[k] += (now - *clock).as_secs_f64();
        *clock = now;
    };

    loop {
        if st.iterations >= max_iters {
            return Err(Error::Solver(format!(
                "iteration cap {max_iters} reached (objective {:.6})",
                st.primal_objective()
            )));
        }
        if cfg.time_limit_s > 0.0
            && st.iterations % 128 == 0
            && started.elapsed().as_secs_f64() > cfg.time_limit_s
        {
            return Err(Error::Solver(format!(
                "time limit {}s reached after {} iterations",
                cfg.time_limit_s, st.iterations
            )));
        }
        if timing {
            clock = Instant::now();
        }
        if st.factors.num_etas() >= refactor_every {
            st.refactor()?;
            st.recompute_xb();
            if !st.refresh_rc(&mut rc, 100.0 * dtol) {
                return Ok(None);
            }
        }
        if timing {
            lap(&mut tm, &mut clock, 7);
        }

        // leaving variable: steepest-edge score over the violated basics
        let mut pick: Option<(usize, bool, f64)> = None; // (slot, below, score)
        let mut total_viol = 0.0;
        for slot in 0..m {
            let v = st.basis[slot];
            let x = st.xb[slot];
            let below = st.lower[v] - x;
            let above = x - st.upper[v];
            let (viol, is_below) = if below >= above { (below, true) } else { (above, false) };
            if viol > cfg.feas_tol {
                total_viol += viol;
                let score = viol * viol / dse[slot];
                if pick.map(|(_, _, bs)| score > bs).unwrap_or(true) {
                    pick = Some((slot, is_below, score));
                }
            }
        }

        if cfg.verbose && st.iterations % 1000 == 0 {
            log::info!(
                "iter {:>7} dual obj {:.6} viol {:.3e} etas {}",
                st.iterations,
                st.primal_objective(),
                total_viol,
                st.factors.num_etas()
            );
            if timing {
                log::info!(
                    "timing scan {:.2} btran {:.2} row {:.2} ratio {:.2} ftran {:.2} dse {:.2} upd {:.2} refac {:.2} rho_nnz {} row_len {}",
                    tm[0], tm[1], tm[2], tm[3], tm[4], tm[5], tm[6], tm[7],
                    rho_nnz_acc / 1000, row_len_acc / 1000
                );
                tm = [0.0; 8];
                rho_nnz_acc = 0;
                row_len_acc = 0;
            }
        }
        if timing {
            lap(&mut tm, &mut clock, 0);
        }

        let (r_slot, below) = match pick {
            Some((slot, is_below, _)) => {
                verified = false;
                (slot, is_below)
            }
            None => {
                if verified {
                    return Ok(Some(SolveStatus::Optimal));
                }
                // confirm against freshly factored values before declaring
                // optimality
                st.refactor()?;
                st.recompute_xb();
                if !st.refresh_rc(&mut rc, 100.0 * dtol) {
                    return Ok(None);
                }
                verified = true;
                continue;
            }
        };

        // pivot row r of B^{-1}A, sign-adjusted so that every eligible
        // entering variable sees a positive (AtLower) / negative (AtUpper)
        // entry and a nonnegative dual ratio
        let s = if below { 1.0 } else { -1.0 };
        rho.fill(0.0);
        rho[r_slot] = 1.0;
        st.factors.btran(&mut rho);
        if timing {
            lap(&mut tm, &mut clock, 1);
        }
        row.clear();
        st.touched.clear();
        for (i, &ri) in rho.iter().enumerate() {
            if ri.abs() <= 1e-12 {
                continue;
            }
            let lj = n_struct + i;
            if st.status[lj] != VarStatus::Basic && st.lower[lj] != st.upper[lj] {
                row.push((lj, -s * ri));
            }
            for k in st.prep.csr_ptr[i]..st.prep.csr_ptr[i + 1] {
                let j = st.prep.csr_col[k];
                if st.acc[j] == 0.0 {
                    st.touched.push(j);
                }
                st.acc[j] += st.prep.csr_val[k] * ri;
            }
        }
        for ti in 0..st.touched.len() {
            let j = st.touched[ti];
            let a = st.acc[j];
            st.acc[j] = 0.0;
            if a == 0.0 || st.status[j] == VarStatus::Basic || st.lower[j] == st.upper[j] {
                continue;
            }
            row.push((j, -s * a));
        }
        if timing {
            rho_nnz_acc += rho.iter().filter(|v| v.abs() > 1e-12).count();
            row_len_acc += row.len();
            lap(&mut tm, &mut clock, 2);
        }

        // Harris two-pass dual ratio test; ties go to the largest pivot
        let mut theta_max = f64::INFINITY;
        let mut any = false;
        for &(j, at) in &row {
            if at.abs() <= PIVOT_TOL {
                continue;
            }
            let eligible = match st.status[j] {
                VarStatus::AtLower => at > 0.0,
                VarStatus::AtUpper => at < 0.0,
                VarStatus::Free => true,
                VarStatus::Basic => false,
            };
            if !eligible {
                continue;
            }
            any = true;
            let relaxed = (rc[j] / at).max(0.0) + dtol / at.abs();
            theta_max = theta_max.min(relaxed);
        }
        if !any {
            // the violated row cannot be repaired: primal infeasible
            return Ok(Some(SolveStatus::Infeasible));
        }
        let mut best: Option<(usize, f64, f64)> = None; // (var, entry, ratio)
        for &(j, at) in &row {
            if at.abs() <= PIVOT_TOL {
                continue;
            }
            let eligible = match st.status[j] {
                VarStatus::AtLower => at > 0.0,
                VarStatus::AtUpper => at < 0.0,
                VarStatus::Free => true,
                VarStatus::Basic => false,
            };
            if !eligible {
                continue;
            }
            let ratio = (rc[j] / at).max(0.0);
            if ratio <= theta_max
                && best
                    .map(|(_, ba, _)| at.abs() > ba.abs())
                    .unwrap_or(true)
            {
                best = Some((j, at, ratio));
            }
        }
        let (q, at_q, theta) = best.expect("eligible entering variable exists");

        // dual step: shift every nonbasic reduced cost along the pivot row
        if theta > 0.0 {
            for &(j, at) in &row {
                rc[j] -= theta * at;
            }
        }
        let leaving = st.basis[r_slot];
        rc[leaving] = theta * s;
        rc[q] = 0.0;

        // primal step: the leaving variable lands exactly on its violated
        // bound; alpha_rq = -s * at_q
        let x_r = st.xb[r_slot];
        let delta_r = if below {
            st.lower[leaving] - x_r
        } else {
            st.upper[leaving] - x_r
        };
        let t = s * delta_r / at_q;
        if timing {
            lap(&mut tm, &mut clock, 3);
        }

        for v in w.iter_mut() {
            *v = 0.0;
        }
        st.scan_col(q, |r, a| w[r] += a);
        st.factors.ftran(&mut w);
        if timing {
            lap(&mut tm, &mut clock, 4);
        }

        // Forrest-Goldfarb steepest-edge weight update, with the pivot-row
        // weight taken exactly from rho
        let beta_r = rho.iter().map(|v| v * v).sum::<f64>();
        tau.copy_from_slice(&rho);
        st.factors.ftran(&mut tau);
        let w_r = w[r_slot];
        for i in 0..m {
            if i == r_slot || w[i] == 0.0 {
                continue;
            }
            let ratio = w[i] / w_r;
            dse[i] = (dse[i] - 2.0 * ratio * tau[i] + ratio * ratio * beta_r).max(1e-4);
        }
        dse[r_slot] = (beta_r / (w_r * w_r)).max(1e-4);
        if timing {
            lap(&mut tm, &mut clock, 5);
        }

        for slot in 0..m {
            st.xb[slot] -= t * w[slot];
        }
        let entering_value = st.nb_val(q) + t;
        st.status[leaving] = if below {
            VarStatus::AtLower
        } else {
            VarStatus::AtUpper
        };
        st.var_slot[leaving] = usize::MAX;
        st.status[q] = VarStatus::Basic;
        st.var_slot[q] = r_slot;
        st.basis[r_slot] = q;
        st.xb[r_slot] = entering_value;

        st.iterations += 1;
        if st.factors.push_update(r_slot, &w).is_err() {
            st.refactor()?;
            st.recompute_xb();
            if !st.refresh_rc(&mut rc, 100.0 * dtol) {
                return Ok(None);
            }
        }
        if timing {
            lap(&mut tm, &mut clock, 6);
        }
    }
}

fn infeasible_outcome(prep: &Prep, overrides: &[(usize, f64, f64)]) -> LpOutcome {
    let mut x = prep.fixed_vals.clone();
    for &(j, lo, _) in overrides {
        if prep.col_map[j] != usize::MAX && lo.is_finite() {
            x[j] = lo;
        }
    }
    LpOutcome {
        status: SolveStatus::Infeasible,
        objective: f64::INFINITY,
        x,
        row_duals: vec![0.0; prep.n_orig_rows],
        basis: Basis(vec![VarStatus::AtLower; prep.n_total()]),
        iterations: 0,
        duality_track: Vec::new(),
    }
}

fn extract(prep: &Prep, cfg: &SolverConfig, st: &SimplexState, status: SolveStatus) -> LpOutcome {
    // final duals for the true objective
    let mut y = vec![0.0; prep.m];
    for i in 0..prep.m {
        y[i] = st.obj_coeff(st.basis[i]);
    }
    st.factors.btran(&mut y);

    let mut x = prep.fixed_vals.clone();
    for (cj, &j) in prep.kept_cols.iter().enumerate() {
        let mut v = match st.status[cj] {
            VarStatus::Basic => st.xb[st.var_slot[cj]],
            _ => st.nb_val(cj),
        };
        // clamp solver fuzz onto the bounds
        if (v - st.lower[cj]).abs() <= cfg.feas_tol * 10.0 {
            v = st.lower[cj];
        } else if (v - st.upper[cj]).abs() <= cfg.feas_tol * 10.0 {
            v = st.upper[cj];
        }
        if v.abs() <= cfg.feas_tol {
            v = 0.0;
        }
        x[j] = v;
    }

    let mut row_duals = vec![0.0; prep.n_orig_rows];
    for (ci, &i) in prep.kept_rows.iter().enumerate() {
        row_duals[i] = y[ci];
    }

    let objective = prep
        .kept_cols
        .iter()
        .enumerate()
        .map(|(cj, &j)| prep.obj[cj] * x[j])
        .sum::<f64>()
        + prep.fixed_obj;

    LpOutcome {
        status,
        objective,
        x,
        row_duals,
        basis: Basis(st.status.clone()),
        iterations: st.iterations,
        duality_track: st.duality_track.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ColKind, Column, Provenance, Row};

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    fn col(name: &str, obj: f64, lo: f64, hi: f64) -> Column {
        Column {
            name: name.into(),
            kind: ColKind::Generic,
            objective: obj,
            lower: lo,
            upper: hi,
            integer: false,
        }
    }

    fn row(name: &str, sense: Sense, rhs: f64, entries: Vec<(usize, f64)>) -> Row {
        Row {
            name: name.into(),
            provenance: Provenance::from_row_name(name).unwrap_or(Provenance::Eq2),
            sense,
            rhs,
            entries,
        }
    }

    fn pi(columns: Vec<Column>, rows: Vec<Row>) -> ProblemInstance {
        ProblemInstance {
            columns,
            rows,
            num_demands: 0,
            num_arcs: 0,
        }
    }

    fn solve(p: &ProblemInstance) -> LpOutcome {
        let prep = prepare(p).unwrap();
        solve_prepared(&prep, &cfg(), None, &[]).unwrap()
    }

    #[test]
    fn forced_two_variable_lp() {
        // min x + y  s.t. x + y >= 1
        let p = pi(
            vec![
                col("x", 1.0, 0.0, f64::INFINITY),
                col("y", 1.0, 0.0, f64::INFINITY),
            ],
            vec![row("Eq2_r", Sense::Ge, 1.0, vec![(0, 1.0), (1, 1.0)])],
        );
        let out = solve(&p);
        assert_eq!(out.status, SolveStatus::Optimal);
        assert!((out.objective - 1.0).abs() < 1e-9, "obj {}", out.objective);
        assert!((out.x[0] + out.x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn equality_system_with_negative_cost() {
        // min -x - 2y  s.t. x + y = 4, x - y = 0  => x = y = 2, obj -6
        let p = pi(
            vec![
                col("x", -1.0, 0.0, f64::INFINITY),
                col("y", -2.0, 0.0, f64::INFINITY),
            ],
            vec![
                row("Eq2_a", Sense::Eq, 4.0, vec![(0, 1.0), (1, 1.0)]),
                row("Eq2_b", Sense::Eq, 0.0, vec![(0, 1.0), (1, -1.0)]),
            ],
        );
        let out = solve(&p);
        assert_eq!(out.status, SolveStatus::Optimal);
        assert!((out.objective + 6.0).abs() < 1e-9);
        assert!((out.x[0] - 2.0).abs() < 1e-9 && (out.x[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn upper_bounds_respected() {
        // min -x - y  s.t. x + y <= 3, x <= 1, y <= 4 (column bound)
        let p = pi(
            vec![col("x", -1.0, 0.0, 1.0), col("y", -1.0, 0.0, 4.0)],
            vec![row("Eq2_cap", Sense::Le, 3.0, vec![(0, 1.0), (1, 1.0)])],
        );
        let out = solve(&p);
        assert_eq!(out.status, SolveStatus::Optimal);
        assert!((out.objective + 3.0).abs() < 1e-9);
        assert!(out.x[0] <= 1.0 + 1e-9);
    }

    #[test]
    fn infeasible_detected() {
        // x + y <= 1, x + y >= 3
        let p = pi(
            vec![
                col("x", 1.0, 0.0, f64::INFINITY),
                col("y", 1.0, 0.0, f64::INFINITY),
            ],
            vec![
                row("Eq2_a", Sense::Le, 1.0, vec![(0, 1.0), (1, 1.0)]),
                row("Eq2_b", Sense::Ge, 3.0, vec![(0, 1.0), (1, 1.0)]),
            ],
        );
        assert_eq!(solve(&p).status, SolveStatus::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        // min -x  s.t. x - y <= 1 (x can run away with y)
        let p = pi(
            vec![
                col("x", -1.0, 0.0, f64::INFINITY),
                col("y", 0.0, 0.0, f64::INFINITY),
            ],
            vec![row("Eq2_a", Sense::Le, 1.0, vec![(0, 1.0), (1, -1.0)])],
        );
        assert_eq!(solve(&p).status, SolveStatus::Unbounded);
    }

    #[test]
    fn fixed_columns_fold_into_rhs() {
        // y fixed at 2 by its bounds; min x s.t. x + y >= 5 => x = 3
        let p = pi(
            vec![col("x", 1.0, 0.0, f64::INFINITY), col("y", 1.0, 2.0, 2.0)],
            vec![row("Eq2_a", Sense::Ge, 5.0, vec![(0, 1.0), (1, 1.0)])],
        );
        let prep = prepare(&p).unwrap();
        assert_eq!(prep.n_struct, 1);
        let out = solve_prepared(&prep, &cfg(), None, &[]).unwrap();
        assert_eq!(out.status, SolveStatus::Optimal);
        assert!((out.x[0] - 3.0).abs() < 1e-9);
        assert_eq!(out.x[1], 2.0);
        // fixed y contributes its cost
        assert!((out.objective - 5.0).abs() < 1e-9, "{}", out.objective);
    }

    #[test]
    fn bound_override_makes_instance_infeasible() {
        let p = pi(
            vec![col("x", 1.0, 0.0, 1.0)],
            vec![row("Eq2_a", Sense::Ge, 1.0, vec![(0, 1.0)])],
        );
        let prep = prepare(&p).unwrap();
        let out = solve_prepared(&prep, &cfg(), None, &[(0, 0.0, 0.0)]).unwrap();
        assert_eq!(out.status, SolveStatus::Infeasible);
    }

    #[test]
    fn degenerate_transportation_lp() {
        // 2x2 transportation with equal supplies/demands (degenerate)
        let c = [1.0, 2.0, 3.0, 0.5];
        let p = pi(
            (0..4)
                .map(|k| col(&format!("x{k}"), c[k], 0.0, f64::INFINITY))
                .collect(),
            vec![
                row("Eq2_s0", Sense::Eq, 1.0, vec![(0, 1.0), (1, 1.0)]),
                row("Eq2_s1", Sense::Eq, 1.0, vec![(2, 1.0), (3, 1.0)]),
                row("Eq2_d0", Sense::Eq, 1.0, vec![(0, 1.0), (2, 1.0)]),
                row("Eq2_d1", Sense::Eq, 1.0, vec![(1, 1.0), (3, 1.0)]),
            ],
        );
        let out = solve(&p);
        assert_eq!(out.status, SolveStatus::Optimal);
        assert!((out.objective - 1.5).abs() < 1e-9, "{}", out.objective);
    }

    #[test]
    fn warm_start_reaches_same_optimum() {
        let p = pi(
            vec![
                col("x", -1.0, 0.0, 2.0),
                col("y", -2.0, 0.0, 2.0),
                col("z", 1.0, 0.0, 5.0),
            ],
            vec![
                row("Eq2_a", Sense::Le, 3.0, vec![(0, 1.0), (1, 1.0), (2, 1.0)]),
                row("Eq2_b", Sense::Ge, 1.0, vec![(0, 1.0), (2, -1.0)]),
            ],
        );
        let prep = prepare(&p).unwrap();
        let cold = solve_prepared(&prep, &cfg(), None, &[]).unwrap();
        assert_eq!(cold.status, SolveStatus::Optimal);
        // restrict y and warm-start from the previous basis
        let warm = solve_prepared(&prep, &cfg(), Some(&cold.basis), &[(1, 0.0, 1.0)]).unwrap();
        let cold2 = solve_prepared(&prep, &cfg(), None, &[(1, 0.0, 1.0)]).unwrap();
        assert_eq!(warm.status, SolveStatus::Optimal);
        assert!((warm.objective - cold2.objective).abs() < 1e-9);
    }

    #[test]
    fn weak_duality_throughout() {
        let p = pi(
            vec![
                col("x", 3.0, 0.0, 10.0),
                col("y", 2.0, 0.0, 10.0),
                col("z", 4.0, 0.0, 10.0),
            ],
            vec![
                row("Eq2_a", Sense::Ge, 4.0, vec![(0, 1.0), (1, 1.0)]),
                row("Eq2_b", Sense::Ge, 3.0, vec![(1, 1.0), (2, 1.0)]),
                row("Eq2_c", Sense::Ge, 2.0, vec![(0, 1.0), (2, 1.0)]),
            ],
        );
        let prep = prepare(&p).unwrap();
        let mut config = cfg();
        config.track_weak_duality = true;
        let out = solve_prepared(&prep, &config, None, &[]).unwrap();
        assert_eq!(out.status, SolveStatus::Optimal);
        assert!(!out.duality_track.is_empty());
        for &(primal, bound) in &out.duality_track {
            assert!(
                primal >= bound - 1e-7,
                "weak duality violated: {primal} < {bound}"
            );
        }
        let last = out.duality_track.last().unwrap();
        assert!((last.0 - out.objective).abs() < 1e-7);
    }
}

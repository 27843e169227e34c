//! Best-first branch-and-bound over the siting binaries.
//!
//! Nodes carry fixed-to-0 / fixed-to-1 sets of siting columns; the LP
//! relaxation is shared (prepared once) and each node applies its fixings as
//! bound overrides, warm-starting from the parent's basis. Branching picks
//! the most fractional siting variable (ties: lowest index).

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::model::{FlowSolution, ProblemInstance, SolveStatus};
use crate::solver::simplex::{prepare, solve_prepared, Basis};
use crate::solver::{outcome_to_solution, SolverConfig};

#[derive(Debug, Clone)]
pub struct BBNode {
    /// original-column indices of siting variables fixed to 0
    pub fixed0: Vec<usize>,
    /// original-column indices of siting variables fixed to 1
    pub fixed1: Vec<usize>,
    /// LP bound inherited from the parent relaxation
    pub parent_bound: f64,
}

struct OpenNode {
    node: BBNode,
    basis: Option<Basis>,
    seq: usize,
}

impl PartialEq for OpenNode {
    fn eq(&self, other: &Self) -> bool {
        self.node.parent_bound == other.node.parent_bound && self.seq == other.seq
    }
}
impl Eq for OpenNode {}
impl PartialOrd for OpenNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OpenNode {
    // BinaryHeap is a max-heap; order so the lowest bound (then lowest seq)
    // pops first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .node
            .parent_bound
            .total_cmp(&self.node.parent_bound)
            .then(other.seq.cmp(&self.seq))
    }
}

pub fn branch_and_bound(pi: &ProblemInstance, cfg: &SolverConfig) -> Result<FlowSolution> {
    let int_cols: Vec<usize> = pi
        .columns
        .iter()
        .enumerate()
        .filter(|(_, c)| c.integer)
        .map(|(j, _)| j)
        .collect();

    let prep = prepare(pi)?;
    let started = Instant::now();

    // pure LP: one relaxation solve is the exact answer
    if int_cols.is_empty() {
        let out = solve_prepared(&prep, cfg, None, &[])?;
        return Ok(outcome_to_solution(pi, &out, 0.0));
    }

    let mut heap: BinaryHeap<OpenNode> = BinaryHeap::new();
    heap.push(OpenNode {
        node: BBNode {
            fixed0: Vec::new(),
            fixed1: Vec::new(),
            parent_bound: f64::NEG_INFINITY,
        },
        basis: None,
        seq: 0,
    });

    let mut incumbent: Option<(f64, crate::solver::simplex::LpOutcome)> = None;
    let mut nodes_solved = 0usize;
    let mut seq = 0usize;
    let mut limit_hit = false;

    while let Some(open) = heap.pop() {
        // prune against the incumbent before spending a solve
        if let Some((inc_obj, _)) = &incumbent {
            if open.node.parent_bound >= inc_obj - cfg.opt_tol * (1.0 + inc_obj.abs()) {
                continue;
            }
        }
        if nodes_solved >= cfg.max_bb_nodes {
            limit_hit = true;
            break;
        }
        if cfg.time_limit_s > 0.0 && started.elapsed().as_secs_f64() > cfg.time_limit_s {
            limit_hit = true;
            break;
        }

        let mut overrides: Vec<(usize, f64, f64)> = Vec::new();
        for &j in &open.node.fixed0 {
            overrides.push((j, 0.0, 0.0));
        }
        for &j in &open.node.fixed1 {
            overrides.push((j, 1.0, 1.0));
        }
        let out = solve_prepared(&prep, cfg, open.basis.as_ref(), &overrides)?;
        nodes_solved += 1;

        match out.status {
            SolveStatus::Infeasible => continue,
            SolveStatus::Unbounded => {
                return Err(Error::Solver(
                    "relaxation unbounded inside branch-and-bound".into(),
                ))
            }
            SolveStatus::Optimal => {}
            SolveStatus::LimitReached => {
                return Err(Error::Solver("relaxation hit a limit mid-tree".into()))
            }
        }
        if let Some((inc_obj, _)) = &incumbent {
            if out.objective >= inc_obj - cfg.opt_tol * (1.0 + inc_obj.abs()) {
                continue;
            }
        }

        // most fractional integer column
        let mut branch_col = None;
        let mut best_frac = cfg.int_tol;
        for &j in &int_cols {
            let v = out.x[j];
            let frac = (v - v.round()).abs();
            if frac > best_frac {
                best_frac = frac;
                branch_col = Some(j);
            }
        }

        match branch_col {
            None => {
                // integral: candidate incumbent
                let better = incumbent
                    .as_ref()
                    .map(|(inc, _)| out.objective < *inc)
                    .unwrap_or(true);
                if better {
                    incumbent = Some((out.objective, out));
                }
            }
            Some(j) => {
                for round in 0..2 {
                    let mut node = open.node.clone();
                    if round == 0 {
                        node.fixed0.push(j);
                    } else {
                        node.fixed1.push(j);
                    }
                    node.parent_bound = out.objective;
                    seq += 1;
                    heap.push(OpenNode {
                        node,
                        basis: Some(out.basis.clone()),
                        seq,
                    });
                }
            }
        }
    }

    let (inc_obj, inc_out) = match incumbent {
        Some(v) => v,
        None => {
            if limit_hit {
                return Err(Error::Solver(format!(
                    "branch-and-bound limit reached after {nodes_solved} nodes with no incumbent"
                )));
            }
            // tree exhausted without an integral point
            let mut sol = outcome_to_solution(pi, &solve_prepared(&prep, cfg, None, &[])?, 0.0);
            sol.status = SolveStatus::Infeasible;
            sol.objective = f64::INFINITY;
            return Ok(sol);
        }
    };

    // remaining open nodes bound the optimum from below
    let open_bound = heap
        .iter()
        .map(|o| o.node.parent_bound)
        .fold(f64::INFINITY, f64::min);
    let gap = if limit_hit && open_bound < inc_obj {
        let lower = open_bound.max(f64::NEG_INFINITY);
        if lower.is_finite() {
            ((inc_obj - lower) / (1.0 + inc_obj.abs())).max(0.0)
        } else {
            f64::INFINITY
        }
    } else {
        0.0
    };

    let mut sol = outcome_to_solution(pi, &inc_out, gap);
    if limit_hit && gap > cfg.opt_tol {
        sol.status = SolveStatus::LimitReached;
    }
    // snap siting binaries exactly
    for (j, col) in pi.columns.iter().enumerate() {
        if col.integer {
            sol.column_values[j] = sol.column_values[j].round();
        }
    }
    sol.objective = pi.objective_value(&sol.column_values);
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ColKind, Column, Provenance, Row, Sense};

    fn col(name: &str, obj: f64, lo: f64, hi: f64, integer: bool) -> Column {
        Column {
            name: name.into(),
            kind: if integer {
                ColKind::Siting { geo: 0 }
            } else {
                ColKind::Generic
            },
            objective: obj,
            lower: lo,
            upper: hi,
            integer,
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

    #[test]
    fn knapsack_style_milp() {
        // min -5a - 4b  s.t. 3a + 2b <= 4, a, b binary => a=0, b=1? no:
        // a=1,b=0 gives -5; a=0,b=1 gives -4; a=1,b=1 needs 5 > 4. opt -5.
        let pi = ProblemInstance {
            columns: vec![
                col("c0", -5.0, 0.0, 1.0, true),
                col("c1", -4.0, 0.0, 1.0, true),
            ],
            rows: vec![row("Eq7_cap", Sense::Le, 4.0, vec![(0, 3.0), (1, 2.0)])],
            num_demands: 0,
            num_arcs: 0,
        };
        let sol = branch_and_bound(&pi, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective + 5.0).abs() < 1e-9, "{}", sol.objective);
        assert_eq!(sol.column_values, vec![1.0, 0.0]);
    }

    #[test]
    fn fractional_relaxation_forced_integral() {
        // min x  s.t. x >= 1.5 c, x + c >= 2, c binary.
        // c=1 => x >= 1.5, obj 1.5; c=0 => x >= 2, obj 2. opt c=1, x=1.5.
        let pi = ProblemInstance {
            columns: vec![
                col("x", 1.0, 0.0, f64::INFINITY, false),
                col("c0", 0.0, 0.0, 1.0, true),
            ],
            rows: vec![
                row("Eq8_link", Sense::Ge, 0.0, vec![(0, 1.0), (1, -1.5)]),
                row("Eq2_tot", Sense::Ge, 2.0, vec![(0, 1.0), (1, 1.0)]),
            ],
            num_demands: 0,
            num_arcs: 0,
        };
        let sol = branch_and_bound(&pi, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective - 1.5).abs() < 1e-9, "{}", sol.objective);
        assert_eq!(sol.column_values[1], 1.0);
    }

    #[test]
    fn milp_infeasible_when_no_integral_point() {
        // 0.5 <= c <= 0.5 impossible for a binary... model as
        // 2c = 1 with c binary
        let pi = ProblemInstance {
            columns: vec![col("c0", 0.0, 0.0, 1.0, true)],
            rows: vec![row("Eq7_odd", Sense::Eq, 1.0, vec![(0, 2.0)])],
            num_demands: 0,
            num_arcs: 0,
        };
        let sol = branch_and_bound(&pi, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }
}

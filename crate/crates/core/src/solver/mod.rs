//! LP / MILP solving for assembled problem instances.
//!
//! [`solve_lp`] runs the bounded revised simplex; [`solve_milp`] wraps it in
//! best-first branch-and-bound over the siting binaries; and
//! [`enumerate_sitings`] is the exhaustive oracle that solves one fixed-siting
//! LP per admissible station subset.

pub mod branch;
pub mod colgen;
pub mod lu;
pub mod simplex;

use std::collections::HashMap;

use rayon::prelude::*;

use crate::demand::DemandSet;
use crate::error::{Error, Result};
use crate::layered::LayeredGraph;
use crate::model::{
    assemble, ColKind, DualCertificate, FlowSolution, Mode, ProblemInstance, ScenarioParams,
    SolveStatus,
};
use crate::solver::simplex::{prepare, solve_prepared, LpOutcome};

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Absolute primal feasibility tolerance.
    pub feas_tol: f64,
    /// Relative optimality tolerance.
    pub opt_tol: f64,
    /// Integrality tolerance for the siting binaries.
    pub int_tol: f64,
    /// Branch-and-bound node budget.
    pub max_bb_nodes: usize,
    /// Wall-clock limit in seconds (0 disables).
    pub time_limit_s: f64,
    /// Basis refactorization interval in pivots.
    pub refactor_every: usize,
    /// Simplex iteration cap (0 picks a size-based default).
    pub max_iters: usize,
    /// Per-iteration progress lines through the `log` crate.
    pub verbose: bool,
    /// Record (primal, dual bound) pairs each phase-2 iteration.
    pub track_weak_duality: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            feas_tol: 1e-7,
            opt_tol: 1e-6,
            int_tol: 1e-6,
            max_bb_nodes: 100_000,
            time_limit_s: 0.0,
            refactor_every: 100,
            max_iters: 0,
            verbose: false,
            track_weak_duality: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.feas_tol > 0.0 && self.opt_tol > 0.0 && self.int_tol > 0.0) {
            return Err(Error::Config("solver tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Reduced costs of the original columns given row duals.
fn reduced_costs(pi: &ProblemInstance, row_duals: &[f64]) -> Vec<f64> {
    let mut rc: Vec<f64> = pi.columns.iter().map(|c| c.objective).collect();
    for (i, row) in pi.rows.iter().enumerate() {
        let y = row_duals[i];
        if y != 0.0 {
            for &(j, a) in &row.entries {
                rc[j] -= a * y;
            }
        }
    }
    rc
}

/// Wraps a raw simplex outcome into the instance-level solution type.
pub(crate) fn outcome_to_solution(
    pi: &ProblemInstance,
    out: &LpOutcome,
    gap: f64,
) -> FlowSolution {
    let mut user_flows = HashMap::new();
    let mut rebal_flows = HashMap::new();
    let mut siting = Vec::new();
    for (j, col) in pi.columns.iter().enumerate() {
        let v = out.x[j];
        match col.kind {
            ColKind::UserFlow { demand, arc } => {
                if v != 0.0 {
                    user_flows.insert((demand, arc), v);
                }
            }
            ColKind::RebalFlow { arc } => {
                if v != 0.0 {
                    rebal_flows.insert(arc, v);
                }
            }
            ColKind::Siting { geo } => siting.push((geo, v > 0.5)),
            ColKind::Generic => {}
        }
    }
    let duals = if out.status == SolveStatus::Optimal {
        Some(DualCertificate {
            row_duals: out.row_duals.clone(),
            reduced_costs: reduced_costs(pi, &out.row_duals),
        })
    } else {
        None
    };
    FlowSolution {
        status: out.status,
        objective: out.objective,
        column_values: out.x.clone(),
        user_flows,
        rebal_flows,
        siting,
        duals,
        gap,
    }
}

/// Solves the LP relaxation of `pi` (integrality requirements are relaxed to
/// their bounds).
pub fn solve_lp(pi: &ProblemInstance, cfg: &SolverConfig) -> Result<FlowSolution> {
    cfg.validate()?;
    let prep = prepare(pi)?;
    let out = solve_prepared(&prep, cfg, None, &[])?;
    Ok(outcome_to_solution(pi, &out, 0.0))
}

/// Like [`solve_lp`] but also exposing the simplex internals (basis and the
/// weak-duality trace) for warm starts and diagnostics.
pub fn solve_lp_detailed(pi: &ProblemInstance, cfg: &SolverConfig) -> Result<(FlowSolution, LpOutcome)> {
    cfg.validate()?;
    let prep = prepare(pi)?;
    let out = solve_prepared(&prep, cfg, None, &[])?;
    let sol = outcome_to_solution(pi, &out, 0.0);
    Ok((sol, out))
}

/// Solves the joint-siting MILP by branch-and-bound over the siting binaries.
pub fn solve_milp(pi: &ProblemInstance, cfg: &SolverConfig) -> Result<FlowSolution> {
    cfg.validate()?;
    branch::branch_and_bound(pi, cfg)
}

/// Solves the scenario end to end with the column-generation engine. User
/// commodities are priced as paths, which keeps the master system small even
/// when the per-demand arc formulation would run to millions of nonzeros.
/// Joint siting runs branch-and-price over the station binaries.
pub fn solve_scenario(
    lg: &LayeredGraph,
    demand: &DemandSet,
    params: &ScenarioParams,
    cfg: &SolverConfig,
) -> Result<FlowSolution> {
    cfg.validate()?;
    colgen::solve(lg, demand, params, cfg)
}

/// Exhaustively solves the fixed-siting LP for every station subset of size
/// at most N and returns the best (siting, objective). Ties prefer the
/// lexicographically smallest siting. Also reports the number of LP solves.
pub fn enumerate_sitings(
    lg: &LayeredGraph,
    demand: &DemandSet,
    params: &ScenarioParams,
    cfg: &SolverConfig,
) -> Result<(Vec<usize>, f64, usize)> {
    cfg.validate()?;
    let candidates = &lg.candidate_stations;
    let n_max = params.max_stations.min(candidates.len());

    let mut total: u128 = 0;
    let mut choose: u128 = 1;
    for k in 0..=n_max {
        if k > 0 {
            choose = choose * (candidates.len() - k + 1) as u128 / k as u128;
        }
        total += choose;
        if total > 100_000 {
            return Err(Error::Config(format!(
                "siting enumeration needs more than {total} LP solves; refusing (budget 100000)"
            )));
        }
    }

    let mut subsets: Vec<Vec<usize>> = Vec::with_capacity(total as usize);
    let mut stack: Vec<(usize, Vec<usize>)> = vec![(0, Vec::new())];
    // lexicographic depth-first enumeration of subsets up to size n_max
    while let Some((start, prefix)) = stack.pop() {
        subsets.push(prefix.clone());
        for i in (start..candidates.len()).rev() {
            if prefix.len() < n_max {
                let mut next = prefix.clone();
                next.push(candidates[i]);
                stack.push((i + 1, next));
            }
        }
    }

    let results: Result<Vec<(Vec<usize>, f64)>> = subsets
        .par_iter()
        .map(|siting| {
            let p = ScenarioParams::fixed(
                siting.clone(),
                params.max_stations,
                params.station_capacity,
                params.charge_rate_layers_per_hour,
            );
            // deliberately the direct arc formulation: this is the oracle the
            // column-generation path is checked against
            let pi = assemble(lg, demand, &p)?;
            let sol = solve_lp(&pi, cfg)?;
            let obj = match sol.status {
                SolveStatus::Optimal => sol.objective,
                _ => f64::INFINITY,
            };
            Ok((siting.clone(), obj))
        })
        .collect();
    let results = results?;
    let solves = results.len();

    let mut best: Option<(Vec<usize>, f64)> = None;
    for (siting, obj) in results {
        let better = match &best {
            None => obj.is_finite(),
            Some((bs, bo)) => {
                obj < bo - 1e-12 || ((obj - bo).abs() <= 1e-12 && siting < *bs)
            }
        };
        if better {
            best = Some((siting, obj));
        }
    }
    match best {
        Some((siting, obj)) => Ok((siting, obj, solves)),
        None => Err(Error::Solver(
            "every candidate siting is infeasible".into(),
        )),
    }
}

/// Sanity helper shared by harness code: true when `pi` is a joint-siting
/// instance (has integer siting columns).
pub fn is_joint(pi: &ProblemInstance) -> bool {
    pi.columns
        .iter()
        .any(|c| c.integer && matches!(c.kind, ColKind::Siting { .. }))
}

/// Formats a solution as `variable,value` rows (nonzero values only).
pub fn solution_dump(pi: &ProblemInstance, sol: &FlowSolution) -> String {
    let mut out = String::from("variable,value\n");
    for (col, &v) in pi.columns.iter().zip(&sol.column_values) {
        if v != 0.0 {
            out.push_str(&format!("{},{}\n", col.name, v));
        }
    }
    out
}

/// Formats a scenario solution as `variable,value` rows (nonzero values
/// only) straight from the column layout, without materializing the
/// per-demand instance whose column list can be very large.
pub fn scenario_solution_dump(
    lg: &LayeredGraph,
    demand: &DemandSet,
    params: &ScenarioParams,
    sol: &FlowSolution,
) -> String {
    let a_cnt = lg.arc_count();
    let m_cnt = demand.requests.len();
    let mut out = String::from("variable,value\n");
    let mut push = |name: String, v: f64| {
        if v != 0.0 {
            out.push_str(&format!("{name},{v}\n"));
        }
    };
    for m in 0..m_cnt {
        for a in 0..a_cnt {
            push(format!("xm{m}_a{a}"), sol.column_values[m * a_cnt + a]);
        }
    }
    for a in 0..a_cnt {
        push(format!("xr_a{a}"), sol.column_values[m_cnt * a_cnt + a]);
    }
    if params.mode == Mode::JointSiting {
        for (j, &geo) in lg.candidate_stations.iter().enumerate() {
            push(
                format!("c{geo}"),
                sol.column_values[(m_cnt + 1) * a_cnt + j],
            );
        }
    }
    out
}

pub use simplex::Basis;

#[allow(unused)]
pub(crate) fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::FixedSiting => "lp",
        Mode::JointSiting => "milp",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::Request;
    use crate::isoenergy::{IsoArc, IsoEnergyGraph, IsoNode};
    use crate::layered::build_layered_graph;
    use crate::model::audit_solution;

    fn tri_city() -> IsoEnergyGraph {
        // 3-node directed triangle, both directions, k=1 everywhere
        let mut arcs = Vec::new();
        for (t, h) in [(0, 1), (1, 0), (1, 2), (2, 1), (0, 2), (2, 0)] {
            arcs.push(IsoArc {
                tail: t,
                head: h,
                k: 1,
                travel_time_s: 600.0,
                distance_m: 2000.0,
            });
        }
        IsoEnergyGraph {
            nodes: (0..3)
                .map(|i| IsoNode {
                    original_id: i,
                    lat: 0.0,
                    lon: i as f64,
                })
                .collect(),
            arcs,
            unit_energy_wh: 100.0,
        }
    }

    #[test]
    fn small_city_lp_and_milp_end_to_end() {
        let iso = tri_city();
        let lg = build_layered_graph(&iso, 320.0, &[0, 2], 6000.0).unwrap();
        let demand = DemandSet {
            requests: vec![
                Request {
                    origin: 0,
                    destination: 1,
                    rate_per_hour: 2.0,
                },
                Request {
                    origin: 2,
                    destination: 0,
                    rate_per_hour: 1.0,
                },
            ],
            horizon_hours: 1.0,
        };
        let cfg = SolverConfig::default();

        // fixed siting with both stations
        let p_fixed = ScenarioParams::fixed(vec![0, 2], 2, 4.0, 60.0);
        let pi = assemble(&lg, &demand, &p_fixed).unwrap();
        let sol = solve_lp(&pi, &cfg).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal, "fixed LP should solve");
        assert!(sol.objective > 0.0);
        let audit = audit_solution(&pi, &sol.column_values);
        for (fam, r) in &audit.max_eq_residual {
            assert!(*r <= 1e-7, "family {fam:?} residual {r}");
        }
        assert!(audit.max_bound_violation <= 1e-7);

        // joint MILP with N=1 must match the better single-station LP and
        // the exhaustive oracle
        let p_joint = ScenarioParams::joint(1, 4.0, 60.0);
        let pj = assemble(&lg, &demand, &p_joint).unwrap();
        let milp = solve_milp(&pj, &cfg).unwrap();
        assert_eq!(milp.status, SolveStatus::Optimal);
        let (best_siting, best_obj, solves) =
            enumerate_sitings(&lg, &demand, &p_joint, &cfg).unwrap();
        // sitings tried: {}, {0}, {2}
        assert_eq!(solves, 3);
        assert!(
            (milp.objective - best_obj).abs() <= 1e-6 * (1.0 + best_obj.abs()),
            "milp {} vs oracle {} ({best_siting:?})",
            milp.objective,
            best_obj
        );
        assert_eq!(milp.sited_stations(), best_siting);

        // with N=2 and loose capacity the relaxation is tight
        let p2 = ScenarioParams::joint(2, 50.0, 60.0);
        let pj2 = assemble(&lg, &demand, &p2).unwrap();
        let milp2 = solve_milp(&pj2, &cfg).unwrap();
        let lp2 = solve_lp(&pj2, &cfg).unwrap();
        assert!(milp2.objective >= lp2.objective - 1e-7);
        assert!(
            (milp2.objective - lp2.objective).abs() <= 1e-6 * (1.0 + lp2.objective.abs()),
            "milp {} vs relaxation {}",
            milp2.objective,
            lp2.objective
        );
    }

    #[test]
    fn zero_demand_optimum_is_zero() {
        let iso = tri_city();
        let lg = build_layered_graph(&iso, 320.0, &[0], 6000.0).unwrap();
        let demand = DemandSet {
            requests: vec![],
            horizon_hours: 1.0,
        };
        let pi = assemble(&lg, &demand, &ScenarioParams::fixed(vec![0], 1, 4.0, 60.0)).unwrap();
        let sol = solve_lp(&pi, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_eq!(sol.objective, 0.0);
        assert!(sol.column_values.iter().all(|&v| v == 0.0));
    }
}

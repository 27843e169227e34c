//! Assembly of the fleet-operations optimization problems as sparse
//! constraint systems.
//!
//! The fixed-siting problem is a pure LP over per-demand user flows and one
//! rebalancing flow; the joint-siting problem adds one binary variable per
//! candidate station. Row families carry a provenance tag naming the
//! constraint family they realize:
//!
//! - `Eq2`: per-commodity flow conservation (each demand at every node, with
//!   rate injections at its origin/destination geo-nodes; the rebalancing
//!   commodity at every layer node).
//! - `Eq3`: combined vehicle conservation at every node. Redundant given the
//!   `Eq2` and `Eq6` families; kept as a modeling-bug guard.
//! - `Eq4`/`Eq5`: aggregate geo-arc usage of user / rebalancing flow equals
//!   twice the total request rate (each trip enters and leaves the network
//!   exactly once).
//! - `Eq6`: SoC handoff through geo-nodes, per (geo-node, layer): user
//!   arrivals at a layer spawn rebalancing departures at that layer, and user
//!   departures at a layer absorb rebalancing arrivals at that layer.
//! - `Eq7`: at most N stations.
//! - `Eq8`: charging-arc rebalancing flow limited by station capacity times
//!   charging rate, linked to the siting variable.
//! - `Eq9`: user flows are zero on charging arcs.

pub mod lp_text;

use std::collections::HashMap;

use crate::demand::DemandSet;
use crate::error::{Error, Result};
use crate::layered::{ArcKind, LayeredGraph};

pub use lp_text::{export_lp_text, parse_lp_text};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    FixedSiting,
    JointSiting,
}

/// Scenario-level knobs of the optimization problems.
#[derive(Debug, Clone)]
pub struct ScenarioParams {
    /// Maximum number of charging stations (N).
    pub max_stations: usize,
    /// Vehicles a station can charge simultaneously (Z).
    pub station_capacity: f64,
    /// SoC layers traversable per hour at a charger (E).
    pub charge_rate_layers_per_hour: f64,
    pub mode: Mode,
    /// Sited stations; required in fixed-siting mode, ignored otherwise.
    pub fixed_siting: Vec<usize>,
}

impl ScenarioParams {
    pub fn fixed(siting: Vec<usize>, max_stations: usize, z: f64, e: f64) -> Self {
        ScenarioParams {
            max_stations,
            station_capacity: z,
            charge_rate_layers_per_hour: e,
            mode: Mode::FixedSiting,
            fixed_siting: siting,
        }
    }

    pub fn joint(max_stations: usize, z: f64, e: f64) -> Self {
        ScenarioParams {
            max_stations,
            station_capacity: z,
            charge_rate_layers_per_hour: e,
            mode: Mode::JointSiting,
            fixed_siting: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.station_capacity > 0.0) {
            return Err(Error::Config("station capacity Z must be positive".into()));
        }
        if !(self.charge_rate_layers_per_hour > 0.0) {
            return Err(Error::Config("charge rate E must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Eq2,
    Eq3,
    Eq4,
    Eq5,
    Eq6,
    Eq7,
    Eq8,
    Eq9,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Eq2 => "Eq2",
            Provenance::Eq3 => "Eq3",
            Provenance::Eq4 => "Eq4",
            Provenance::Eq5 => "Eq5",
            Provenance::Eq6 => "Eq6",
            Provenance::Eq7 => "Eq7",
            Provenance::Eq8 => "Eq8",
            Provenance::Eq9 => "Eq9",
        }
    }

    pub fn from_row_name(name: &str) -> Option<Provenance> {
        let tag = name.split('_').next()?;
        Some(match tag {
            "Eq2" => Provenance::Eq2,
            "Eq3" => Provenance::Eq3,
            "Eq4" => Provenance::Eq4,
            "Eq5" => Provenance::Eq5,
            "Eq6" => Provenance::Eq6,
            "Eq7" => Provenance::Eq7,
            "Eq8" => Provenance::Eq8,
            "Eq9" => Provenance::Eq9,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Eq,
    Le,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub name: String,
    pub provenance: Provenance,
    pub sense: Sense,
    pub rhs: f64,
    /// Sparse (column, coefficient) entries; column indices strictly
    /// increasing within a row.
    pub entries: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColKind {
    UserFlow { demand: usize, arc: usize },
    RebalFlow { arc: usize },
    Siting { geo: usize },
    /// Column re-created from an LP text document.
    Generic,
}

#[derive(Debug, Clone)]
pub struct Column {
    pub name: String,
    pub kind: ColKind,
    pub objective: f64,
    pub lower: f64,
    pub upper: f64,
    pub integer: bool,
}

/// Sparse constraint system for one scenario. Always a minimization.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub columns: Vec<Column>,
    pub rows: Vec<Row>,
    /// Number of demands baked into the column layout (0 for parsed docs).
    pub num_demands: usize,
    /// Number of layered arcs baked into the column layout (0 for parsed docs).
    pub num_arcs: usize,
}

impl ProblemInstance {
    pub fn num_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_nonzeros(&self) -> usize {
        self.rows.iter().map(|r| r.entries.len()).sum()
    }

    pub fn num_integers(&self) -> usize {
        self.columns.iter().filter(|c| c.integer).count()
    }

    pub fn stats(&self) -> String {
        format!(
            "rows={}, cols={}, nonzeros={}, integers={}",
            self.num_rows(),
            self.num_cols(),
            self.num_nonzeros(),
            self.num_integers()
        )
    }

    pub fn user_col(&self, demand: usize, arc: usize) -> usize {
        demand * self.num_arcs + arc
    }

    pub fn rebal_col(&self, arc: usize) -> usize {
        self.num_demands * self.num_arcs + arc
    }

    /// Evaluates `row`'s left-hand side at `x`.
    pub fn row_activity(&self, row: &Row, x: &[f64]) -> f64 {
        row.entries.iter().map(|&(c, a)| a * x[c]).sum()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.columns
            .iter()
            .zip(x)
            .map(|(c, &v)| c.objective * v)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Iteration/node/time limit hit with an incumbent at the reported gap.
    LimitReached,
}

/// Dual information attached to an optimal LP solution.
#[derive(Debug, Clone)]
pub struct DualCertificate {
    /// One dual multiplier per row.
    pub row_duals: Vec<f64>,
    /// One reduced cost per column.
    pub reduced_costs: Vec<f64>,
}

/// Solved flows plus siting, mapped back to the layered graph.
#[derive(Debug, Clone)]
pub struct FlowSolution {
    pub status: SolveStatus,
    /// Vehicle-hours of flow per hour (the fleet-size objective).
    pub objective: f64,
    /// Full primal vector in instance column order (flows clamped at zero).
    pub column_values: Vec<f64>,
    /// Nonzero user flows: (demand, arc) -> vehicles/hour.
    pub user_flows: HashMap<(usize, usize), f64>,
    /// Nonzero rebalancing flows: arc -> vehicles/hour.
    pub rebal_flows: HashMap<usize, f64>,
    /// Station decision per candidate geo index.
    pub siting: Vec<(usize, bool)>,
    pub duals: Option<DualCertificate>,
    /// MILP optimality gap (zero for exact solves).
    pub gap: f64,
}

impl FlowSolution {
    pub fn sited_stations(&self) -> Vec<usize> {
        self.siting
            .iter()
            .filter(|(_, on)| *on)
            .map(|(g, _)| *g)
            .collect()
    }
}

pub(crate) fn validate_demands(lg: &LayeredGraph, demand: &DemandSet) -> Result<()> {
    for (m, r) in demand.requests.iter().enumerate() {
        if r.origin >= lg.geo_count || r.destination >= lg.geo_count {
            return Err(Error::Config(format!(
                "demand {m} references a geo-node outside 0..{}",
                lg.geo_count
            )));
        }
        if r.origin == r.destination {
            return Err(Error::Config(format!("demand {m} has origin == destination")));
        }
        if !(r.rate_per_hour > 0.0) {
            return Err(Error::Config(format!("demand {m} has non-positive rate")));
        }
    }
    Ok(())
}

/// Builds the LP (fixed siting) or MILP (joint siting) for one scenario,
/// with one flow commodity per demand.
pub fn assemble(lg: &LayeredGraph, demand: &DemandSet, params: &ScenarioParams) -> Result<ProblemInstance> {
    validate_demands(lg, demand)?;
    let injections: Vec<Vec<(usize, f64)>> = demand
        .requests
        .iter()
        .map(|r| {
            vec![
                (lg.geo_node(r.origin), r.rate_per_hour),
                (lg.geo_node(r.destination), -r.rate_per_hour),
            ]
        })
        .collect();
    let total_rate: f64 = demand.requests.iter().map(|r| r.rate_per_hour).sum();
    assemble_commodities(lg, &injections, total_rate, params)
}

/// Shared assembly over an arbitrary set of user-flow commodities, each
/// given by its node injections (positive = flow enters the network there).
fn assemble_commodities(
    lg: &LayeredGraph,
    injections: &[Vec<(usize, f64)>],
    total_rate: f64,
    params: &ScenarioParams,
) -> Result<ProblemInstance> {
    params.validate()?;
    let num_arcs = lg.arc_count();
    let num_demands = injections.len();
    let num_nodes = lg.node_count();

    let candidates = &lg.candidate_stations;
    if params.mode == Mode::FixedSiting {
        for &s in &params.fixed_siting {
            if !candidates.contains(&s) {
                return Err(Error::Config(format!(
                    "fixed siting references non-candidate node {s}"
                )));
            }
        }
        if params.fixed_siting.len() > params.max_stations {
            return Err(Error::Config(format!(
                "fixed siting has {} stations, exceeding N={}",
                params.fixed_siting.len(),
                params.max_stations
            )));
        }
    }
    let joint = params.mode == Mode::JointSiting;

    // Column layout: user flows by demand then arc, rebalancing flows, then
    // (joint mode) one siting variable per candidate.
    let mut columns = Vec::with_capacity((num_demands + 1) * num_arcs + candidates.len());
    for m in 0..num_demands {
        for (a, arc) in lg.arcs.iter().enumerate() {
            columns.push(Column {
                name: format!("xm{m}_a{a}"),
                kind: ColKind::UserFlow { demand: m, arc: a },
                objective: arc.travel_time_s / 3600.0,
                lower: 0.0,
                upper: f64::INFINITY,
                integer: false,
            });
        }
    }
    for (a, arc) in lg.arcs.iter().enumerate() {
        columns.push(Column {
            name: format!("xr_a{a}"),
            kind: ColKind::RebalFlow { arc: a },
            objective: arc.travel_time_s / 3600.0,
            lower: 0.0,
            upper: f64::INFINITY,
            integer: false,
        });
    }
    let mut c_col: HashMap<usize, usize> = HashMap::new();
    if joint {
        for &geo in candidates.iter() {
            c_col.insert(geo, columns.len());
            columns.push(Column {
                name: format!("c{geo}"),
                kind: ColKind::Siting { geo },
                objective: 0.0,
                lower: 0.0,
                upper: 1.0,
                integer: true,
            });
        }
    }

    let user_col = |m: usize, a: usize| m * num_arcs + a;
    let rebal_col = |a: usize| num_demands * num_arcs + a;

    let mut rows: Vec<Row> = Vec::new();
    let push_conservation =
        |rows: &mut Vec<Row>, name: String, provenance: Provenance, node: usize, rhs: f64, col_of: &dyn Fn(usize) -> usize| {
            let mut entries: Vec<(usize, f64)> = lg.out_arcs[node]
                .iter()
                .map(|&a| (col_of(a), 1.0))
                .chain(lg.in_arcs[node].iter().map(|&a| (col_of(a), -1.0)))
                .collect();
            entries.sort_unstable_by_key(|&(c, _)| c);
            rows.push(Row {
                name,
                provenance,
                sense: Sense::Eq,
                rhs,
                entries,
            });
        };

    // Eq2: per-commodity conservation with the commodity's node injections.
    for (m, inj) in injections.iter().enumerate() {
        let mut rhs_of = vec![0.0f64; num_nodes];
        for &(node, r) in inj {
            rhs_of[node] += r;
        }
        for node in 0..num_nodes {
            push_conservation(
                &mut rows,
                format!("Eq2_m{m}_n{node}"),
                Provenance::Eq2,
                node,
                rhs_of[node],
                &|a| user_col(m, a),
            );
        }
    }
    // Eq2: rebalancing conservation at layer nodes. Geo-nodes are the
    // rebalancing sources/sinks (their balance is dictated by Eq6), so no
    // rows there.
    for node in 0..lg.geo_count * lg.num_layers {
        push_conservation(
            &mut rows,
            format!("Eq2_r_n{node}"),
            Provenance::Eq2,
            node,
            0.0,
            &|a| rebal_col(a),
        );
    }

    // Eq3: combined conservation of all vehicles at every node.
    for node in 0..num_nodes {
        let mut entries: Vec<(usize, f64)> = Vec::new();
        for m in 0..num_demands {
            for &a in &lg.out_arcs[node] {
                entries.push((user_col(m, a), 1.0));
            }
            for &a in &lg.in_arcs[node] {
                entries.push((user_col(m, a), -1.0));
            }
        }
        for &a in &lg.out_arcs[node] {
            entries.push((rebal_col(a), 1.0));
        }
        for &a in &lg.in_arcs[node] {
            entries.push((rebal_col(a), -1.0));
        }
        entries.sort_unstable_by_key(|&(c, _)| c);
        rows.push(Row {
            name: format!("Eq3_n{node}"),
            provenance: Provenance::Eq3,
            sense: Sense::Eq,
            rhs: 0.0,
            entries,
        });
    }

    let geo_arcs: Vec<usize> = lg
        .arcs
        .iter()
        .enumerate()
        .filter(|(_, arc)| matches!(arc.kind, ArcKind::GeoIn | ArcKind::GeoOut))
        .map(|(a, _)| a)
        .collect();

    // Eq4: total user geo-arc usage.
    {
        let mut entries = Vec::with_capacity(num_demands * geo_arcs.len());
        for m in 0..num_demands {
            for &a in &geo_arcs {
                entries.push((user_col(m, a), 1.0));
            }
        }
        entries.sort_unstable_by_key(|&(c, _)| c);
        rows.push(Row {
            name: "Eq4_user_geo".into(),
            provenance: Provenance::Eq4,
            sense: Sense::Eq,
            rhs: 2.0 * total_rate,
            entries,
        });
    }
    // Eq5: total rebalancing geo-arc usage.
    {
        let mut entries: Vec<(usize, f64)> = geo_arcs.iter().map(|&a| (rebal_col(a), 1.0)).collect();
        entries.sort_unstable_by_key(|&(c, _)| c);
        rows.push(Row {
            name: "Eq5_rebal_geo".into(),
            provenance: Provenance::Eq5,
            sense: Sense::Eq,
            rhs: 2.0 * total_rate,
            entries,
        });
    }

    // Eq6: SoC handoff per (geo-node, layer). Look up the paired geo arcs.
    let mut geo_in_arc = vec![usize::MAX; lg.geo_count * lg.num_layers];
    let mut geo_out_arc = vec![usize::MAX; lg.geo_count * lg.num_layers];
    for (a, arc) in lg.arcs.iter().enumerate() {
        match arc.kind {
            ArcKind::GeoIn => {
                let (g, l) = lg.node_location(arc.tail);
                geo_in_arc[g * lg.num_layers + l.unwrap()] = a;
            }
            ArcKind::GeoOut => {
                let (g, l) = lg.node_location(arc.head);
                geo_out_arc[g * lg.num_layers + l.unwrap()] = a;
            }
            _ => {}
        }
    }
    for g in 0..lg.geo_count {
        for l in 0..lg.num_layers {
            let slot = g * lg.num_layers + l;
            let (a_in, a_out) = (geo_in_arc[slot], geo_out_arc[slot]);
            // user arrivals at (g, l) hand vehicles to rebalancing departures
            let mut entries: Vec<(usize, f64)> =
                (0..num_demands).map(|m| (user_col(m, a_in), 1.0)).collect();
            entries.push((rebal_col(a_out), -1.0));
            entries.sort_unstable_by_key(|&(c, _)| c);
            rows.push(Row {
                name: format!("Eq6_arr_g{g}_l{l}"),
                provenance: Provenance::Eq6,
                sense: Sense::Eq,
                rhs: 0.0,
                entries,
            });
            // user departures from (g, l) absorb rebalancing arrivals
            let mut entries: Vec<(usize, f64)> =
                (0..num_demands).map(|m| (user_col(m, a_out), 1.0)).collect();
            entries.push((rebal_col(a_in), -1.0));
            entries.sort_unstable_by_key(|&(c, _)| c);
            rows.push(Row {
                name: format!("Eq6_dep_g{g}_l{l}"),
                provenance: Provenance::Eq6,
                sense: Sense::Eq,
                rhs: 0.0,
                entries,
            });
        }
    }

    // Eq7: station budget (joint mode only; fixed mode validated above).
    if joint && !candidates.is_empty() {
        let entries: Vec<(usize, f64)> = candidates.iter().map(|g| (c_col[g], 1.0)).collect();
        rows.push(Row {
            name: "Eq7_station_budget".into(),
            provenance: Provenance::Eq7,
            sense: Sense::Le,
            rhs: params.max_stations as f64,
            entries,
        });
    }

    // Eq8: charging capacity, linked to siting.
    let capacity = params.station_capacity * params.charge_rate_layers_per_hour;
    for (a, arc) in lg.arcs.iter().enumerate() {
        if arc.kind != ArcKind::Charging {
            continue;
        }
        let station = arc.station.expect("charging arc without station");
        if joint {
            rows.push(Row {
                name: format!("Eq8_a{a}"),
                provenance: Provenance::Eq8,
                sense: Sense::Le,
                rhs: 0.0,
                entries: {
                    let mut e = vec![(rebal_col(a), 1.0), (c_col[&station], -capacity)];
                    e.sort_unstable_by_key(|&(c, _)| c);
                    e
                },
            });
        } else {
            let sited = params.fixed_siting.contains(&station);
            rows.push(Row {
                name: format!("Eq8_a{a}"),
                provenance: Provenance::Eq8,
                sense: Sense::Le,
                rhs: if sited { capacity } else { 0.0 },
                entries: vec![(rebal_col(a), 1.0)],
            });
        }
    }

    // Eq9: no user flow on charging arcs. Also fix the columns so the solver
    // can drop them.
    for m in 0..num_demands {
        for (a, arc) in lg.arcs.iter().enumerate() {
            if arc.kind == ArcKind::Charging {
                rows.push(Row {
                    name: format!("Eq9_m{m}_a{a}"),
                    provenance: Provenance::Eq9,
                    sense: Sense::Eq,
                    rhs: 0.0,
                    entries: vec![(user_col(m, a), 1.0)],
                });
                columns[user_col(m, a)].upper = 0.0;
            }
        }
    }

    Ok(ProblemInstance {
        columns,
        rows,
        num_demands,
        num_arcs,
    })
}

/// Per-family worst-case residuals of a solution against the instance rows.
#[derive(Debug, Clone, Default)]
pub struct AuditReport {
    /// Max |activity - rhs| over equality rows, per provenance family.
    pub max_eq_residual: HashMap<Provenance, f64>,
    /// Min (rhs - activity) over inequality rows, per family (negative means
    /// violated).
    pub min_ineq_slack: HashMap<Provenance, f64>,
    /// Most negative variable value before clamping.
    pub min_value: f64,
    pub max_bound_violation: f64,
}

impl AuditReport {
    pub fn eq_residual(&self, p: Provenance) -> f64 {
        self.max_eq_residual.get(&p).copied().unwrap_or(0.0)
    }

    pub fn ineq_slack(&self, p: Provenance) -> f64 {
        self.min_ineq_slack.get(&p).copied().unwrap_or(f64::INFINITY)
    }
}

/// Audits a primal vector against every row and bound of the instance.
pub fn audit_solution(pi: &ProblemInstance, x: &[f64]) -> AuditReport {
    let mut report = AuditReport {
        min_value: f64::INFINITY,
        ..Default::default()
    };
    for row in &pi.rows {
        let activity = pi.row_activity(row, x);
        match row.sense {
            Sense::Eq => {
                let r = (activity - row.rhs).abs();
                let slot = report.max_eq_residual.entry(row.provenance).or_insert(0.0);
                *slot = slot.max(r);
            }
            Sense::Le => {
                let s = row.rhs - activity;
                let slot = report
                    .min_ineq_slack
                    .entry(row.provenance)
                    .or_insert(f64::INFINITY);
                *slot = slot.min(s);
            }
            Sense::Ge => {
                let s = activity - row.rhs;
                let slot = report
                    .min_ineq_slack
                    .entry(row.provenance)
                    .or_insert(f64::INFINITY);
                *slot = slot.min(s);
            }
        }
    }
    for (col, &v) in pi.columns.iter().zip(x) {
        report.min_value = report.min_value.min(v);
        let viol = (col.lower - v).max(v - col.upper).max(0.0);
        report.max_bound_violation = report.max_bound_violation.max(viol);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::{DemandSet, Request};
    use crate::isoenergy::{IsoArc, IsoEnergyGraph, IsoNode};
    use crate::layered::build_layered_graph;

    fn two_geo_instance() -> (LayeredGraph, DemandSet) {
        let iso = IsoEnergyGraph {
            nodes: (0..2)
                .map(|i| IsoNode {
                    original_id: i,
                    lat: 0.0,
                    lon: i as f64,
                })
                .collect(),
            arcs: vec![
                IsoArc { tail: 0, head: 1, k: 1, travel_time_s: 360.0, distance_m: 1000.0 },
                IsoArc { tail: 1, head: 0, k: 1, travel_time_s: 360.0, distance_m: 1000.0 },
            ],
            unit_energy_wh: 50.0,
        };
        let lg = build_layered_graph(&iso, 100.0, &[0], 3000.0).unwrap();
        let demand = DemandSet {
            requests: vec![Request { origin: 0, destination: 1, rate_per_hour: 2.0 }],
            horizon_hours: 1.0,
        };
        (lg, demand)
    }

    #[test]
    fn tiny_instance_row_and_column_counts() {
        let (lg, demand) = two_geo_instance();
        assert_eq!(lg.num_layers, 2);
        // arcs: 2 road copies per iso arc minus the drop, 1 charging, 8 geo
        assert_eq!(lg.arc_count(), 2 + 1 + 8);
        let params = ScenarioParams::joint(1, 5.0, 60.0);
        let pi = assemble(&lg, &demand, &params).unwrap();
        // columns: (1 demand + rebalancing) * 11 arcs + 1 siting variable
        assert_eq!(pi.num_cols(), 23);
        // rows, hand-derived:
        //   Eq2 user: 6 nodes; Eq2 rebalancing: 4 layer nodes
        //   Eq3: 6; Eq4: 1; Eq5: 1; Eq6: 2 * 2 geo * 2 layers = 8
        //   Eq7: 1; Eq8: 1 charging arc; Eq9: 1
        assert_eq!(pi.num_rows(), 6 + 4 + 6 + 1 + 1 + 8 + 1 + 1 + 1);
        assert_eq!(pi.num_integers(), 1);
    }

    #[test]
    fn joint_mode_without_candidates() {
        let iso = IsoEnergyGraph {
            nodes: (0..2)
                .map(|i| IsoNode { original_id: i, lat: 0.0, lon: i as f64 })
                .collect(),
            arcs: vec![
                IsoArc { tail: 0, head: 1, k: 1, travel_time_s: 60.0, distance_m: 100.0 },
                IsoArc { tail: 1, head: 0, k: 1, travel_time_s: 60.0, distance_m: 100.0 },
            ],
            unit_energy_wh: 50.0,
        };
        let lg = build_layered_graph(&iso, 150.0, &[], 0.0).unwrap();
        let demand = DemandSet {
            requests: vec![Request { origin: 0, destination: 1, rate_per_hour: 1.0 }],
            horizon_hours: 1.0,
        };
        let pi = assemble(&lg, &demand, &ScenarioParams::joint(2, 1.0, 1.0)).unwrap();
        assert_eq!(pi.num_integers(), 0);
        assert!(!pi.rows.iter().any(|r| r.provenance == Provenance::Eq7));
        assert!(!pi.rows.iter().any(|r| r.provenance == Provenance::Eq8));
    }

    #[test]
    fn fixed_siting_must_be_candidate() {
        let (lg, demand) = two_geo_instance();
        let params = ScenarioParams::fixed(vec![1], 1, 5.0, 60.0);
        let err = assemble(&lg, &demand, &params).unwrap_err();
        assert!(err.to_string().contains("non-candidate"), "{err}");
    }

    #[test]
    fn every_flow_column_appears_in_a_conservation_row() {
        let (lg, demand) = two_geo_instance();
        let pi = assemble(&lg, &demand, &ScenarioParams::joint(1, 5.0, 60.0)).unwrap();
        let mut seen = vec![false; pi.num_cols()];
        for row in pi.rows.iter().filter(|r| r.provenance == Provenance::Eq2) {
            for &(c, _) in &row.entries {
                seen[c] = true;
            }
        }
        for (c, col) in pi.columns.iter().enumerate() {
            if !matches!(col.kind, ColKind::Siting { .. }) {
                assert!(seen[c], "column {} orphaned", col.name);
            }
        }
    }
}

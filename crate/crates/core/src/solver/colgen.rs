//! Column-generation engine for scenario solves.
//!
//! The per-demand arc formulation grows like demands x layered-arcs and
//! becomes enormous on real inputs. User flow, however, only interacts with
//! the rest of the system through a thin interface: the geo-arc handoffs
//! (Eq6), the geo-arc usage total (Eq4), and its own routing requirement.
//! That makes the Dantzig-Wolfe split natural: the master keeps the
//! rebalancing arc variables, the siting binaries and one convexity row per
//! demand, while user routings enter as whole-path columns priced by a
//! shortest-path computation over the layered graph. Joint siting is solved
//! by branch-and-price over the station binaries; branching only tightens
//! master bounds, so generated columns stay valid across the whole tree.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::time::Instant;

use crate::demand::DemandSet;
use crate::error::{Error, Result};
use crate::layered::{ArcKind, LayeredGraph};
use crate::model::{
    ColKind, Column, FlowSolution, Mode, ProblemInstance, Provenance, Row, ScenarioParams, Sense,
    SolveStatus,
};
use crate::solver::simplex::{prepare, solve_prepared, Basis, LpOutcome, VarStatus};
use crate::solver::SolverConfig;

/// Cost of the artificial slack columns that keep every restricted master
/// feasible. Large against the vehicle-hour objective (at most a few hundred)
/// yet far from f64 trouble.
const BIG_M: f64 = 1e6;
/// A master solution is declared infeasible when artificials carry more than
/// this much flow.
const ART_TOL: f64 = 1e-5;
/// Column-generation convergence: stop when the Lagrangian bound closes to
/// within this relative gap of the master objective.
const CG_GAP: f64 = 1e-9;
/// Reduced-cost threshold for admitting a new column.
const PRICE_TOL: f64 = 1e-9;

/// Static description of the master problem: row indices by family and the
/// fixed column prefix (rebalancing arcs, siting, artificials).
struct Layout {
    a_cnt: usize,
    eq4: usize,
    eq6_arr: Vec<usize>,
    eq6_dep: Vec<usize>,
    conv: Vec<usize>,
    /// per-arc slot of geo arcs: GeoIn/GeoOut -> (g * L + l), usize::MAX otherwise
    geo_slot: Vec<usize>,
    xr0: usize,
    c0: usize,
    n_candidates: usize,
    n_fixed_cols: usize,
}

/// Growing master instance plus the column pool bookkeeping.
struct MasterState {
    pi: ProblemInstance,
    lay: Layout,
    /// (demand or usize::MAX for cycles, arc list) -> dedup
    seen: HashSet<(usize, Vec<u32>)>,
    /// per master column past the fixed prefix: (demand or MAX, arcs)
    col_info: Vec<(usize, Vec<usize>)>,
}

impl MasterState {
    fn push_flow_column(&mut self, demand: usize, arcs: Vec<usize>, lg: &LayeredGraph) -> bool {
        let key: Vec<u32> = arcs.iter().map(|&a| a as u32).collect();
        if !self.seen.insert((demand, key)) {
            return false;
        }
        let j = self.pi.columns.len();
        let cost: f64 = arcs.iter().map(|&a| lg.arcs[a].travel_time_s / 3600.0).sum();
        let is_cycle = demand == usize::MAX;
        let name = if is_cycle {
            format!("cyc_{}", self.col_info.len())
        } else {
            format!("pth_m{}_{}", demand, self.col_info.len())
        };
        self.pi.columns.push(Column {
            name,
            kind: ColKind::Generic,
            objective: cost,
            lower: 0.0,
            upper: f64::INFINITY,
            integer: false,
        });
        // scatter the column into its rows
        let mut crossings = 0.0;
        for &a in &arcs {
            match lg.arcs[a].kind {
                ArcKind::GeoIn => {
                    crossings += 1.0;
                    let slot = self.lay.geo_slot[a];
                    self.pi.rows[self.lay.eq6_arr[slot]].entries.push((j, 1.0));
                }
                ArcKind::GeoOut => {
                    crossings += 1.0;
                    let slot = self.lay.geo_slot[a];
                    self.pi.rows[self.lay.eq6_dep[slot]].entries.push((j, 1.0));
                }
                _ => {}
            }
        }
        if crossings > 0.0 {
            self.pi.rows[self.lay.eq4].entries.push((j, crossings));
        }
        if !is_cycle {
            self.pi.rows[self.lay.conv[demand]].entries.push((j, 1.0));
        }
        self.col_info.push((demand, arcs));
        true
    }
}

/// Builds the master rows and the fixed column prefix.
fn build_master(
    lg: &LayeredGraph,
    demand: &DemandSet,
    params: &ScenarioParams,
) -> Result<MasterState> {
    let a_cnt = lg.arc_count();
    let ln_cnt = lg.geo_count * lg.num_layers;
    let joint = params.mode == Mode::JointSiting;
    let candidates = &lg.candidate_stations;
    let total_rate: f64 = demand.requests.iter().map(|r| r.rate_per_hour).sum();

    let mut geo_slot = vec![usize::MAX; a_cnt];
    let mut geo_in_arc = vec![usize::MAX; ln_cnt];
    let mut geo_out_arc = vec![usize::MAX; ln_cnt];
    for (a, arc) in lg.arcs.iter().enumerate() {
        match arc.kind {
            ArcKind::GeoIn => {
                let (g, l) = lg.node_location(arc.tail);
                let slot = g * lg.num_layers + l.expect("geo-in from a geo node");
                geo_slot[a] = slot;
                geo_in_arc[slot] = a;
            }
            ArcKind::GeoOut => {
                let (g, l) = lg.node_location(arc.head);
                let slot = g * lg.num_layers + l.expect("geo-out into a geo node");
                geo_slot[a] = slot;
                geo_out_arc[slot] = a;
            }
            _ => {}
        }
    }

    // fixed columns: rebalancing arcs, then siting (joint mode)
    let mut columns: Vec<Column> = Vec::new();
    let xr0 = 0usize;
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
    let c0 = columns.len();
    let mut c_col: HashMap<usize, usize> = HashMap::new();
    if joint {
        for &geo in candidates {
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
    let xr = |a: usize| xr0 + a;

    let mut rows: Vec<Row> = Vec::new();
    // Eq2: rebalancing conservation at layer nodes (geo-node balance is
    // dictated by Eq6)
    for node in 0..ln_cnt {
        let mut entries: Vec<(usize, f64)> = lg.out_arcs[node]
            .iter()
            .map(|&a| (xr(a), 1.0))
            .chain(lg.in_arcs[node].iter().map(|&a| (xr(a), -1.0)))
            .collect();
        entries.sort_unstable_by_key(|&(c, _)| c);
        rows.push(Row {
            name: format!("Eq2_r_n{node}"),
            provenance: Provenance::Eq2,
            sense: Sense::Eq,
            rhs: 0.0,
            entries,
        });
    }
    // Eq4: total user geo-arc usage (path columns land here)
    let eq4 = rows.len();
    rows.push(Row {
        name: "Eq4_user_geo".into(),
        provenance: Provenance::Eq4,
        sense: Sense::Eq,
        rhs: 2.0 * total_rate,
        entries: Vec::new(),
    });
    // Eq5: total rebalancing geo-arc usage
    {
        let mut entries: Vec<(usize, f64)> = lg
            .arcs
            .iter()
            .enumerate()
            .filter(|(_, arc)| matches!(arc.kind, ArcKind::GeoIn | ArcKind::GeoOut))
            .map(|(a, _)| (xr(a), 1.0))
            .collect();
        entries.sort_unstable_by_key(|&(c, _)| c);
        rows.push(Row {
            name: "Eq5_rebal_geo".into(),
            provenance: Provenance::Eq5,
            sense: Sense::Eq,
            rhs: 2.0 * total_rate,
            entries,
        });
    }
    // Eq6: SoC handoff per (geo, layer)
    let mut eq6_arr = vec![0usize; ln_cnt];
    let mut eq6_dep = vec![0usize; ln_cnt];
    for g in 0..lg.geo_count {
        for l in 0..lg.num_layers {
            let slot = g * lg.num_layers + l;
            eq6_arr[slot] = rows.len();
            rows.push(Row {
                name: format!("Eq6_arr_g{g}_l{l}"),
                provenance: Provenance::Eq6,
                sense: Sense::Eq,
                rhs: 0.0,
                entries: vec![(xr(geo_out_arc[slot]), -1.0)],
            });
            eq6_dep[slot] = rows.len();
            rows.push(Row {
                name: format!("Eq6_dep_g{g}_l{l}"),
                provenance: Provenance::Eq6,
                sense: Sense::Eq,
                rhs: 0.0,
                entries: vec![(xr(geo_in_arc[slot]), -1.0)],
            });
        }
    }
    // Eq7: station budget
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
    // Eq8: charging capacity per charging arc
    let capacity = params.station_capacity * params.charge_rate_layers_per_hour;
    for (a, arc) in lg.arcs.iter().enumerate() {
        if arc.kind != ArcKind::Charging {
            continue;
        }
        let station = arc.station.expect("charging arc without station");
        if joint {
            let mut e = vec![(xr(a), 1.0), (c_col[&station], -capacity)];
            e.sort_unstable_by_key(|&(c, _)| c);
            rows.push(Row {
                name: format!("Eq8_a{a}"),
                provenance: Provenance::Eq8,
                sense: Sense::Le,
                rhs: 0.0,
                entries: e,
            });
        } else {
            let sited = params.fixed_siting.contains(&station);
            rows.push(Row {
                name: format!("Eq8_a{a}"),
                provenance: Provenance::Eq8,
                sense: Sense::Le,
                rhs: if sited { capacity } else { 0.0 },
                entries: vec![(xr(a), 1.0)],
            });
        }
    }
    // convexity: each demand must be routed at its full rate
    let mut conv = Vec::with_capacity(demand.requests.len());
    for (m, r) in demand.requests.iter().enumerate() {
        conv.push(rows.len());
        rows.push(Row {
            name: format!("Eq2_m{m}_path"),
            provenance: Provenance::Eq2,
            sense: Sense::Eq,
            rhs: r.rate_per_hour,
            entries: Vec::new(),
        });
    }

    // artificial +/- slacks on every equality row so restricted masters are
    // always feasible; positive artificial flow at the optimum flags a truly
    // infeasible node
    for i in 0..rows.len() {
        if rows[i].sense != Sense::Eq {
            continue;
        }
        for (tag, coeff) in [("p", 1.0), ("m", -1.0)] {
            let j = columns.len();
            columns.push(Column {
                name: format!("art_r{i}{tag}"),
                kind: ColKind::Generic,
                objective: BIG_M,
                lower: 0.0,
                upper: f64::INFINITY,
                integer: false,
            });
            rows[i].entries.push((j, coeff));
        }
    }

    let n_fixed_cols = columns.len();
    Ok(MasterState {
        pi: ProblemInstance {
            columns,
            rows,
            num_demands: 0,
            num_arcs: 0,
        },
        lay: Layout {
            a_cnt,
            eq4,
            eq6_arr,
            eq6_dep,
            conv,
            geo_slot,
            xr0,
            c0,
            n_candidates: if joint { candidates.len() } else { 0 },
            n_fixed_cols,
        },
        seen: HashSet::new(),
        col_info: Vec::new(),
    })
}

/// Exact pricing machinery. Driving arcs strictly descend energy layers
/// (every iso-arc costs at least one unit), so the layer world is a DAG and
/// every cycle of the user graph passes through geo-nodes. One "hop" is
/// GeoOut -> driving segment -> GeoIn; hop costs come from one DAG sweep per
/// source geo, and routing over hops is a Bellman-Ford pass on the geo
/// meta-graph, whose handful of nodes makes negative-cycle handling cheap.
struct HopTable {
    g_cnt: usize,
    /// min cost of one hop g -> g2 under the current arc weights
    d: Vec<f64>,
    /// GeoIn arc achieving that minimum (usize::MAX if unreachable)
    arr_arc: Vec<usize>,
    /// per source geo: DAG parent arc per layer node
    parent: Vec<Vec<usize>>,
}

fn build_hops(lg: &LayeredGraph, w: &[f64]) -> HopTable {
    let g_cnt = lg.geo_count;
    let l_cnt = lg.num_layers;
    let n = lg.node_count();
    let mut d = vec![f64::INFINITY; g_cnt * g_cnt];
    let mut arr_arc = vec![usize::MAX; g_cnt * g_cnt];
    let mut parents = Vec::with_capacity(g_cnt);
    for g in 0..g_cnt {
        let mut dist = vec![f64::INFINITY; n];
        let mut parent = vec![usize::MAX; n];
        for &a in &lg.out_arcs[lg.geo_node(g)] {
            if lg.arcs[a].kind == ArcKind::GeoOut && w[a] < dist[lg.arcs[a].head] {
                dist[lg.arcs[a].head] = w[a];
                parent[lg.arcs[a].head] = a;
            }
        }
        // road arcs drop at least one layer, so descending-layer order is
        // topological
        for l in (0..l_cnt).rev() {
            for gu in 0..g_cnt {
                let u = lg.layer_node(gu, l);
                if !dist[u].is_finite() {
                    continue;
                }
                let du = dist[u];
                for &a in &lg.out_arcs[u] {
                    if lg.arcs[a].kind != ArcKind::Road {
                        continue;
                    }
                    let v = lg.arcs[a].head;
                    if du + w[a] < dist[v] {
                        dist[v] = du + w[a];
                        parent[v] = a;
                    }
                }
            }
        }
        for g2 in 0..g_cnt {
            for l in 0..l_cnt {
                let u = lg.layer_node(g2, l);
                if !dist[u].is_finite() {
                    continue;
                }
                for &a in &lg.out_arcs[u] {
                    if lg.arcs[a].kind != ArcKind::GeoIn {
                        continue;
                    }
                    let c = dist[u] + w[a];
                    if c < d[g * g_cnt + g2] {
                        d[g * g_cnt + g2] = c;
                        arr_arc[g * g_cnt + g2] = a;
                    }
                }
            }
        }
        parents.push(parent);
    }
    HopTable {
        g_cnt,
        d,
        arr_arc,
        parent: parents,
    }
}

impl HopTable {
    /// Expands one hop g -> g2 into its arc sequence.
    fn hop_arcs(&self, lg: &LayeredGraph, g: usize, g2: usize) -> Vec<usize> {
        let mut arcs = Vec::new();
        let mut a = self.arr_arc[g * self.g_cnt + g2];
        loop {
            arcs.push(a);
            if lg.arcs[a].kind == ArcKind::GeoOut {
                break;
            }
            a = self.parent[g][lg.arcs[a].tail];
        }
        arcs.reverse();
        arcs
    }

    /// Concatenates hop expansions along a geo sequence (cyclic sequences
    /// wrap around when `close` is set).
    fn expand(&self, lg: &LayeredGraph, seq: &[usize], close: bool) -> Vec<usize> {
        let mut arcs = Vec::new();
        for pair in seq.windows(2) {
            arcs.extend(self.hop_arcs(lg, pair[0], pair[1]));
        }
        if close {
            arcs.extend(self.hop_arcs(lg, seq[seq.len() - 1], seq[0]));
        }
        arcs
    }
}

/// Hop-count-indexed Bellman-Ford over the geo meta-graph.
///
/// `dist[k][g]` is the cheapest walk of at most `k` hops ending at `g`
/// (levels run 0..=g_cnt). `step[k][g]` records the predecessor geo of the
/// best walk at that level, or `usize::MAX` when the level merely carries the
/// previous value forward. Backtracking moves through strictly decreasing
/// levels, so reconstruction cannot loop even when negative cycles exist.
/// `cycle` holds the most negative cycle witnessed by a further improvement
/// at level g_cnt + 1, if any.
struct MetaDp {
    dist: Vec<Vec<f64>>,
    step: Vec<Vec<usize>>,
    cycle: Option<(Vec<usize>, f64)>,
}

impl MetaDp {
    /// Geo sequence of the best walk of at most `k` hops ending at `g`.
    fn walk(&self, mut k: usize, mut g: usize) -> Vec<usize> {
        let mut seq = vec![g];
        while k > 0 {
            match self.step[k][g] {
                usize::MAX => k -= 1,
                p => {
                    seq.push(p);
                    g = p;
                    k -= 1;
                }
            }
        }
        seq.reverse();
        seq
    }

    /// Level (and value) of the cheapest walk ending at `g`.
    fn best(&self, g: usize) -> (usize, f64) {
        let mut bk = 0;
        for k in 1..self.dist.len() - 1 {
            if self.dist[k][g] < self.dist[bk][g] {
                bk = k;
            }
        }
        (bk, self.dist[bk][g])
    }
}

/// `src == None` runs the virtual-source variant (all level-0 distances are
/// zero), which witnesses every negative cycle regardless of reachability.
fn meta_dp(hops: &HopTable, src: Option<usize>) -> MetaDp {
    let g_cnt = hops.g_cnt;
    let mut dist: Vec<Vec<f64>> = Vec::with_capacity(g_cnt + 2);
    let mut step: Vec<Vec<usize>> = Vec::with_capacity(g_cnt + 2);
    let mut d0 = vec![if src.is_some() { f64::INFINITY } else { 0.0 }; g_cnt];
    if let Some(s) = src {
        d0[s] = 0.0;
    }
    dist.push(d0);
    step.push(vec![usize::MAX; g_cnt]);
    for k in 1..=g_cnt + 1 {
        let prev = &dist[k - 1];
        let mut dk = prev.clone();
        let mut sk = vec![usize::MAX; g_cnt];
        for g in 0..g_cnt {
            if !prev[g].is_finite() {
                continue;
            }
            for g2 in 0..g_cnt {
                let hw = hops.d[g * g_cnt + g2];
                if hw.is_finite() && prev[g] + hw < dk[g2] - 1e-12 {
                    dk[g2] = prev[g] + hw;
                    sk[g2] = g;
                }
            }
        }
        dist.push(dk);
        step.push(sk);
    }
    let mut dp = MetaDp { dist, step, cycle: None };
    // any improvement at level g_cnt + 1 certifies a negative cycle; scan all
    // witnesses and keep the most negative cycle among their walks
    let last = g_cnt + 1;
    let mut best: Option<(Vec<usize>, f64)> = None;
    for g in 0..g_cnt {
        if dp.step[last][g] == usize::MAX {
            continue;
        }
        let seq = dp.walk(last, g);
        // every repeated geo in the walk bounds a cycle candidate
        let mut first_at = vec![usize::MAX; g_cnt];
        for (i, &v) in seq.iter().enumerate() {
            if first_at[v] != usize::MAX {
                let cyc = &seq[first_at[v]..i];
                let w = cycle_weight(hops, cyc);
                if best.as_ref().is_none_or(|(_, bw)| w < *bw) {
                    best = Some((cyc.to_vec(), w));
                }
            }
            first_at[v] = i;
        }
    }
    dp.cycle = best;
    dp
}

/// Total hop cost of a cyclic geo sequence (wrapping around).
fn cycle_weight(hops: &HopTable, seq: &[usize]) -> f64 {
    let mut w = 0.0;
    for pair in seq.windows(2) {
        w += hops.d[pair[0] * hops.g_cnt + pair[1]];
    }
    w + hops.d[seq[seq.len() - 1] * hops.g_cnt + seq[0]]
}

/// Cost of an open walk along a geo sequence.
fn walk_weight(hops: &HopTable, seq: &[usize]) -> f64 {
    seq.windows(2)
        .map(|p| hops.d[p[0] * hops.g_cnt + p[1]])
        .sum()
}

/// Removes repeated-geo cycles from a walk, keeping the first occurrence of
/// every geo. Trimming a negative cycle raises the cost; those cycles are
/// generated as dedicated cycle columns instead.
fn trim_walk(mut seq: Vec<usize>) -> Vec<usize> {
    loop {
        let mut first_at: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
        let mut cut = None;
        for (i, &v) in seq.iter().enumerate() {
            if let Some(&j) = first_at.get(&v) {
                cut = Some((j, i));
                break;
            }
            first_at.insert(v, i);
        }
        match cut {
            Some((j, i)) => {
                seq.drain(j..i);
            }
            None => return seq,
        }
    }
}

struct NodeResult {
    out: LpOutcome,
    /// master objective without the artificial contribution
    objective: f64,
    /// largest artificial value (feasibility check)
    max_artificial: f64,
    /// valid lower bound on the node LP optimum (Lagrangian)
    lower_bound: f64,
}

/// Runs column generation to optimality for one node (fixed bound overrides
/// on the siting columns).
#[allow(clippy::too_many_arguments)]
fn solve_node(
    lg: &LayeredGraph,
    demand: &DemandSet,
    master: &mut MasterState,
    origin_groups: &[(usize, Vec<usize>)],
    overrides: &[(usize, f64, f64)],
    basis: Option<(Basis, usize)>,
    cfg: &SolverConfig,
    started: &Instant,
) -> Result<NodeResult> {
    let mut basis = basis;
    loop {
        if cfg.time_limit_s > 0.0 && started.elapsed().as_secs_f64() > cfg.time_limit_s {
            return Err(Error::Solver("time limit reached in column generation".into()));
        }
        let prep = prepare(&master.pi)?;
        let warm = basis.as_ref().map(|(b, n_old)| {
            let n_now = master.pi.columns.len();
            let mut v = Vec::with_capacity(b.0.len() + n_now - n_old);
            v.extend_from_slice(&b.0[..*n_old]);
            v.extend(std::iter::repeat(VarStatus::AtLower).take(n_now - n_old));
            v.extend_from_slice(&b.0[*n_old..]);
            Basis(v)
        });
        let out = solve_prepared(&prep, cfg, warm.as_ref(), overrides)?;
        match out.status {
            SolveStatus::Optimal => {}
            other => {
                return Err(Error::Solver(format!(
                    "master solve ended {other:?} during column generation"
                )))
            }
        }
        basis = Some((out.basis.clone(), master.pi.columns.len()));

        // objective and feasibility read off the master solution (before
        // pricing appends columns `out.x` does not cover)
        let mut art = 0.0f64;
        let mut obj = 0.0f64;
        for (j, col) in master.pi.columns.iter().enumerate() {
            if col.objective == BIG_M {
                art = art.max(out.x[j]);
            } else {
                obj += col.objective * out.x[j];
            }
        }

        // arc weights under the current duals; the user-column footprint is
        // identical for every demand, so one weight vector serves all origins
        let y = &out.row_duals;
        let mut w = vec![0.0; master.lay.a_cnt];
        let y4 = y[master.lay.eq4];
        for (a, arc) in lg.arcs.iter().enumerate() {
            w[a] = arc.travel_time_s / 3600.0;
            match arc.kind {
                ArcKind::GeoIn => w[a] -= y4 + y[master.lay.eq6_arr[master.lay.geo_slot[a]]],
                ArcKind::GeoOut => w[a] -= y4 + y[master.lay.eq6_dep[master.lay.geo_slot[a]]],
                _ => {}
            }
        }

        let hops = build_hops(lg, &w);
        let mut added = 0usize;
        let mut saw_cycle = false;
        let mut lagrangian = 0.0f64; // sum over demands of rate * min(0, rc)
        // ray check first: a meaningfully negative hop cycle prices into any
        // commodity; cycles inside the master's dual tolerance are noise and
        // must not block convergence either way
        if let Some((seq, cw)) = meta_dp(&hops, None).cycle {
            if cw < -1e-7 {
                saw_cycle = true;
                let arcs = hops.expand(lg, &seq, true);
                if master.push_flow_column(usize::MAX, arcs, lg) {
                    added += 1;
                }
            }
        }
        for (origin, members) in origin_groups.iter() {
            let dp = meta_dp(&hops, Some(*origin));
            for &m in members {
                let dst = demand.requests[m].destination;
                let (bk, dist) = dp.best(dst);
                if !dist.is_finite() {
                    return Err(Error::Solver(format!(
                        "demand {m} cannot be routed in the layered graph"
                    )));
                }
                if dist - y[master.lay.conv[m]] < 0.0 && dp.cycle.is_none() {
                    lagrangian += demand.requests[m].rate_per_hour * (dist - y[master.lay.conv[m]]);
                }
                // the best bounded walk may loop through a negative cycle;
                // price the trimmed simple path it contains
                let seq = trim_walk(dp.walk(bk, dst));
                let rc = walk_weight(&hops, &seq) - y[master.lay.conv[m]];
                if rc < -PRICE_TOL {
                    let arcs = hops.expand(lg, &seq, false);
                    if master.push_flow_column(m, arcs, lg) {
                        added += 1;
                    }
                }
            }
        }

        // Lagrangian lower bound is only valid when no improving ray exists
        let lb = if saw_cycle {
            f64::NEG_INFINITY
        } else {
            out.objective + lagrangian
        };

        log::debug!(
            "cg round: obj {obj:.6} art {art:.3e} added {added} cycle {saw_cycle} cols {}",
            master.pi.columns.len()
        );
        let converged = added == 0 || (!saw_cycle && out.objective - lb <= CG_GAP * (1.0 + obj.abs()));
        if converged {
            if art > ART_TOL && log::log_enabled!(log::Level::Debug) {
                for (j, col) in master.pi.columns.iter().enumerate() {
                    if col.objective == BIG_M && out.x[j] > ART_TOL {
                        log::debug!("  artificial {} = {:.6}", col.name, out.x[j]);
                    }
                }
            }
            return Ok(NodeResult {
                out,
                objective: obj,
                max_artificial: art,
                lower_bound: if lb.is_finite() { lb } else { obj },
            });
        }
    }
}

/// Expands a master solution into the scenario-level [`FlowSolution`] laid
/// out like the direct per-demand formulation.
fn expand_solution(
    lg: &LayeredGraph,
    demand: &DemandSet,
    params: &ScenarioParams,
    master: &MasterState,
    x_master: &[f64],
    status: SolveStatus,
    gap: f64,
) -> FlowSolution {
    let a_cnt = master.lay.a_cnt;
    let m_cnt = demand.requests.len();
    let joint = params.mode == Mode::JointSiting;
    let n_sit = if joint { master.lay.n_candidates } else { 0 };
    let mut x = vec![0.0; (m_cnt + 1) * a_cnt + n_sit];

    let mut user_flows: HashMap<(usize, usize), f64> = HashMap::new();
    for (k, (demand_of, arcs)) in master.col_info.iter().enumerate() {
        let v = x_master[master.lay.n_fixed_cols + k].max(0.0);
        if v <= 0.0 {
            continue;
        }
        // cycles carry no routing obligation; attach them to demand 0 so the
        // combined flow still satisfies every audit row exactly
        let m = if *demand_of == usize::MAX { 0 } else { *demand_of };
        for &a in arcs {
            *user_flows.entry((m, a)).or_insert(0.0) += v;
        }
    }
    for (&(m, a), &v) in &user_flows {
        x[m * a_cnt + a] = v;
    }
    let mut rebal_flows = HashMap::new();
    for a in 0..a_cnt {
        let v = x_master[master.lay.xr0 + a].max(0.0);
        x[m_cnt * a_cnt + a] = v;
        if v != 0.0 {
            rebal_flows.insert(a, v);
        }
    }
    let mut siting = Vec::new();
    if joint {
        for (k, &geo) in lg.candidate_stations.iter().enumerate() {
            let v = x_master[master.lay.c0 + k];
            x[(m_cnt + 1) * a_cnt + k] = v;
            siting.push((geo, v > 0.5));
        }
    }
    let mut objective = 0.0;
    for block in 0..=m_cnt {
        for (a, arc) in lg.arcs.iter().enumerate() {
            objective += x[block * a_cnt + a] * arc.travel_time_s / 3600.0;
        }
    }

    FlowSolution {
        status,
        objective,
        column_values: x,
        user_flows: user_flows.into_iter().filter(|&(_, v)| v != 0.0).collect(),
        rebal_flows,
        siting,
        duals: None,
        gap,
    }
}

/// Seeds the pool with one shortest-time path per demand (plain Dijkstra
/// weights -- all nonnegative), so every convexity row has a real column.
fn seed_paths(lg: &LayeredGraph, demand: &DemandSet, master: &mut MasterState) -> Result<()> {
    let w: Vec<f64> = lg.arcs.iter().map(|a| a.travel_time_s / 3600.0).collect();
    let hops = build_hops(lg, &w);
    let mut origins: Vec<usize> = demand.requests.iter().map(|r| r.origin).collect();
    origins.sort_unstable();
    origins.dedup();
    for origin in origins {
        let dp = meta_dp(&hops, Some(origin));
        for (m, r) in demand.requests.iter().enumerate() {
            if r.origin != origin {
                continue;
            }
            let (bk, dist) = dp.best(r.destination);
            if !dist.is_finite() {
                return Err(Error::Solver(format!(
                    "demand {m} cannot be routed in the layered graph"
                )));
            }
            let seq = trim_walk(dp.walk(bk, r.destination));
            master.push_flow_column(m, hops.expand(lg, &seq, false), lg);
        }
    }
    Ok(())
}

struct OpenNode {
    fixed: Vec<(usize, f64)>,
    bound: f64,
    basis: Option<(Basis, usize)>,
    seq: usize,
}

impl PartialEq for OpenNode {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.seq == other.seq
    }
}
impl Eq for OpenNode {}
impl PartialOrd for OpenNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OpenNode {
    // max-heap: lowest bound, then lowest seq, pops first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(other.seq.cmp(&self.seq))
    }
}

/// Solves the scenario with column generation: a single LP for fixed siting,
/// branch-and-price over the station binaries for joint siting.
pub fn solve(
    lg: &LayeredGraph,
    demand: &DemandSet,
    params: &ScenarioParams,
    cfg: &SolverConfig,
) -> Result<FlowSolution> {
    crate::model::validate_demands(lg, demand)?;
    params.validate()?;
    if params.mode == Mode::FixedSiting {
        for &s in &params.fixed_siting {
            if !lg.candidate_stations.contains(&s) {
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
    let started = Instant::now();
    let mut master = build_master(lg, demand, params)?;
    seed_paths(lg, demand, &mut master)?;
    let mut by_origin: HashMap<usize, Vec<usize>> = HashMap::new();
    for (m, r) in demand.requests.iter().enumerate() {
        by_origin.entry(r.origin).or_default().push(m);
    }
    let mut origin_groups: Vec<(usize, Vec<usize>)> = by_origin.into_iter().collect();
    origin_groups.sort_unstable_by_key(|&(o, _)| o);
    log::info!(
        "master: {} rows, {} fixed cols, {} seed paths, {} demands / {} origins",
        master.pi.rows.len(),
        master.lay.n_fixed_cols,
        master.col_info.len(),
        demand.requests.len(),
        origin_groups.len()
    );

    if params.mode == Mode::FixedSiting {
        let node = solve_node(
            lg,
            demand,
            &mut master,
            &origin_groups,
            &[],
            None,
            cfg,
            &started,
        )?;
        if node.max_artificial > ART_TOL {
            return Ok(expand_solution(
                lg,
                demand,
                params,
                &master,
                &node.out.x,
                SolveStatus::Infeasible,
                0.0,
            ));
        }
        return Ok(expand_solution(
            lg,
            demand,
            params,
            &master,
            &node.out.x,
            SolveStatus::Optimal,
            0.0,
        ));
    }

    // branch-and-price over the siting binaries
    let c_cols: Vec<usize> = (0..master.lay.n_candidates)
        .map(|k| master.lay.c0 + k)
        .collect();
    let mut heap: BinaryHeap<OpenNode> = BinaryHeap::new();
    heap.push(OpenNode {
        fixed: Vec::new(),
        bound: f64::NEG_INFINITY,
        basis: None,
        seq: 0,
    });
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut nodes_solved = 0usize;
    let mut seq = 0usize;
    let mut limit_hit = false;

    while let Some(open) = heap.pop() {
        if let Some((inc_obj, _)) = &incumbent {
            if open.bound >= inc_obj - cfg.opt_tol * (1.0 + inc_obj.abs()) {
                continue;
            }
        }
        if nodes_solved >= cfg.max_bb_nodes
            || (cfg.time_limit_s > 0.0 && started.elapsed().as_secs_f64() > cfg.time_limit_s)
        {
            limit_hit = true;
            break;
        }

        let overrides: Vec<(usize, f64, f64)> =
            open.fixed.iter().map(|&(j, v)| (j, v, v)).collect();
        let node = solve_node(
            lg,
            demand,
            &mut master,
            &origin_groups,
            &overrides,
            open.basis,
            cfg,
            &started,
        )?;
        nodes_solved += 1;
        if node.max_artificial > ART_TOL {
            continue; // infeasible under these fixings
        }
        if let Some((inc_obj, _)) = &incumbent {
            if node.lower_bound >= inc_obj - cfg.opt_tol * (1.0 + inc_obj.abs()) {
                continue;
            }
        }

        // most fractional siting variable
        let mut branch_col = None;
        let mut best_frac = cfg.int_tol;
        for &j in &c_cols {
            let v = node.out.x[j];
            let frac = (v - v.round()).abs();
            if frac > best_frac {
                best_frac = frac;
                branch_col = Some(j);
            }
        }
        match branch_col {
            None => {
                let better = incumbent
                    .as_ref()
                    .map(|(inc, _)| node.objective < *inc)
                    .unwrap_or(true);
                if better {
                    incumbent = Some((node.objective, node.out.x.clone()));
                }
            }
            Some(j) => {
                for v in [0.0, 1.0] {
                    let mut fixed = open.fixed.clone();
                    fixed.push((j, v));
                    seq += 1;
                    heap.push(OpenNode {
                        fixed,
                        bound: node.lower_bound,
                        basis: Some((node.out.basis.clone(), master.pi.columns.len())),
                        seq,
                    });
                }
            }
        }
    }

    let (inc_obj, mut inc_x) = match incumbent {
        Some(v) => v,
        None => {
            if limit_hit {
                return Err(Error::Solver(format!(
                    "branch-and-price limit reached after {nodes_solved} nodes with no incumbent"
                )));
            }
            let root = solve_node(
                lg,
                demand,
                &mut master,
                &origin_groups,
                &[],
                None,
                cfg,
                &started,
            )?;
            return Ok(expand_solution(
                lg,
                demand,
                params,
                &master,
                &root.out.x,
                SolveStatus::Infeasible,
                0.0,
            ));
        }
    };
    // incumbent x may predate later pool growth; pad with zeros
    inc_x.resize(master.pi.columns.len(), 0.0);
    // snap the binaries
    for &j in &c_cols {
        inc_x[j] = inc_x[j].round();
    }
    let open_bound = heap
        .iter()
        .map(|o| o.bound)
        .fold(f64::INFINITY, f64::min);
    let gap = if limit_hit && open_bound < inc_obj && open_bound.is_finite() {
        ((inc_obj - open_bound) / (1.0 + inc_obj.abs())).max(0.0)
    } else if limit_hit && !open_bound.is_finite() && !heap.is_empty() {
        f64::INFINITY
    } else {
        0.0
    };
    let status = if limit_hit && gap > cfg.opt_tol {
        SolveStatus::LimitReached
    } else {
        SolveStatus::Optimal
    };
    log::info!(
        "branch-and-price: {} nodes, {} columns generated, objective {:.6}",
        nodes_solved,
        master.col_info.len(),
        inc_obj
    );
    Ok(expand_solution(
        lg, demand, params, &master, &inc_x, status, gap,
    ))
}

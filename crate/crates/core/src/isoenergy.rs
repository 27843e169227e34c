//! Reduction of a road network to an iso-energy graph: a subset of nodes
//! connected by arcs whose energy cost is an integer multiple `k` of a chosen
//! unit energy, with travel time and distance inherited from the
//! minimum-energy path realizing each arc.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph_io::{RoadArc, RoadGraph};

/// Arcs whose energy exceeds this many units are not emitted; keeps the
/// layered expansion sparse.
pub const DEFAULT_K_MAX: u32 = 4;

/// Reference unit energy (Wh) for the baseline vehicle; per-vehicle unit
/// energy scales with the consumption fraction.
pub const REFERENCE_UNIT_ENERGY_WH: f64 = 90.0;

/// Vehicle design parameters, normalized against a reference vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleSpec {
    /// Fraction of reference energy consumption, in (0, 1].
    pub consumption_scale: f64,
    pub battery_capacity_wh: f64,
    /// Fraction of reference vehicle mass.
    pub mass_scale: f64,
    pub label: String,
}

impl VehicleSpec {
    pub fn new(label: &str, consumption_scale: f64, battery_capacity_wh: f64, mass_scale: f64) -> Result<Self> {
        if !(consumption_scale > 0.0 && consumption_scale <= 1.0) {
            return Err(Error::Validation(format!(
                "consumption_scale must be in (0, 1], got {consumption_scale}"
            )));
        }
        if !(battery_capacity_wh > 0.0) {
            return Err(Error::Validation(format!(
                "battery_capacity_wh must be positive, got {battery_capacity_wh}"
            )));
        }
        Ok(VehicleSpec {
            consumption_scale,
            battery_capacity_wh,
            mass_scale,
            label: label.to_string(),
        })
    }

    /// Unit energy of the iso-energy graph for this vehicle: arcs scale with
    /// consumption, so the quantum does too.
    pub fn unit_energy_wh(&self) -> f64 {
        self.consumption_scale * REFERENCE_UNIT_ENERGY_WH
    }
}

/// The three reference vehicle designs (small/medium/large battery).
///
/// Battery capacities are calibrated so that the layered expansion with the
/// reference unit energy yields 196, 428 and 670 state-of-charge layers
/// respectively.
pub fn reference_vehicles() -> Vec<VehicleSpec> {
    vec![
        VehicleSpec::new("Car A", 0.85, 15_000.0, 0.69).unwrap(),
        VehicleSpec::new("Car B", 0.93, 35_850.0, 0.85).unwrap(),
        VehicleSpec::new("Car C", 1.00, 60_350.0, 1.00).unwrap(),
    ]
}

/// Multiplies every arc energy by the vehicle's consumption fraction.
pub fn scale_energy(g: &RoadGraph, v: &VehicleSpec) -> RoadGraph {
    let mut out = g.clone();
    for arc in &mut out.arcs {
        arc.energy_wh *= v.consumption_scale;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsoNode {
    pub original_id: u64,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsoArc {
    pub tail: usize,
    pub head: usize,
    /// Energy multiple: true arc energy is `k * unit_energy_wh` within the
    /// reduction tolerance.
    pub k: u32,
    pub travel_time_s: f64,
    pub distance_m: f64,
}

/// Reduced graph in which every arc costs an integer multiple of
/// `unit_energy_wh`.
#[derive(Debug, Clone)]
pub struct IsoEnergyGraph {
    pub nodes: Vec<IsoNode>,
    pub arcs: Vec<IsoArc>,
    pub unit_energy_wh: f64,
}

impl IsoEnergyGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if !(self.unit_energy_wh > 0.0) {
            return Err(Error::Validation("unit_energy_wh must be positive".into()));
        }
        for (i, a) in self.arcs.iter().enumerate() {
            if a.tail >= n || a.head >= n || a.tail == a.head {
                return Err(Error::Validation(format!("bad endpoints on iso-arc {i}")));
            }
            if a.k < 1 {
                return Err(Error::Validation(format!("iso-arc {i} has k=0")));
            }
        }
        if n > 1 && !strongly_connected(n, self.arcs.iter().map(|a| (a.tail, a.head))) {
            return Err(Error::Validation(
                "iso-energy graph is not strongly connected".into(),
            ));
        }
        Ok(())
    }

    /// Same text schema as the road graph, with a `unit_energy_wh=` header and
    /// a trailing `k` column on each arc. The energy column carries the
    /// quantized value `k * unit_energy_wh`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "unit_energy_wh={}", self.unit_energy_wh);
        out.push_str("[nodes]\n");
        for node in &self.nodes {
            let _ = writeln!(out, "{} {} {}", node.original_id, node.lat, node.lon);
        }
        out.push_str("[arcs]\n");
        for arc in &self.arcs {
            let _ = writeln!(
                out,
                "{} {} {} {} {} {}",
                self.nodes[arc.tail].original_id,
                self.nodes[arc.head].original_id,
                arc.distance_m,
                arc.travel_time_s,
                arc.k as f64 * self.unit_energy_wh,
                arc.k
            );
        }
        out
    }

    pub fn parse(document: &str) -> Result<Self> {
        let mut lines = document.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty document"))?;
        let unit_energy_wh: f64 = header
            .trim()
            .strip_prefix("unit_energy_wh=")
            .ok_or_else(|| Error::parse(1, "expected `unit_energy_wh=<value>` header"))?
            .parse()
            .map_err(|_| Error::parse(1, "cannot parse unit energy"))?;

        let mut nodes: Vec<IsoNode> = Vec::new();
        let mut arcs: Vec<IsoArc> = Vec::new();
        let mut index_by_id = std::collections::HashMap::new();
        let mut in_arcs = false;
        for (lineno, raw) in lines {
            let lineno = lineno + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line {
                "[nodes]" => {
                    in_arcs = false;
                    continue;
                }
                "[arcs]" => {
                    in_arcs = true;
                    continue;
                }
                _ => {}
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if !in_arcs {
                if f.len() != 3 {
                    return Err(Error::parse(lineno, "expected `id lat lon`"));
                }
                let id: u64 = f[0]
                    .parse()
                    .map_err(|_| Error::parse(lineno, "bad node id"))?;
                index_by_id.insert(id, nodes.len());
                nodes.push(IsoNode {
                    original_id: id,
                    lat: f[1]
                        .parse()
                        .map_err(|_| Error::parse(lineno, "bad latitude"))?,
                    lon: f[2]
                        .parse()
                        .map_err(|_| Error::parse(lineno, "bad longitude"))?,
                });
            } else {
                if f.len() != 6 {
                    return Err(Error::parse(
                        lineno,
                        "expected `tail head dist_m time_s energy_wh k`",
                    ));
                }
                let tail_id: u64 = f[0].parse().map_err(|_| Error::parse(lineno, "bad tail"))?;
                let head_id: u64 = f[1].parse().map_err(|_| Error::parse(lineno, "bad head"))?;
                let lookup = |id: u64| {
                    index_by_id
                        .get(&id)
                        .copied()
                        .ok_or_else(|| Error::Validation(format!("arc references unknown node {id}")))
                };
                arcs.push(IsoArc {
                    tail: lookup(tail_id)?,
                    head: lookup(head_id)?,
                    distance_m: f[2]
                        .parse()
                        .map_err(|_| Error::parse(lineno, "bad distance"))?,
                    travel_time_s: f[3]
                        .parse()
                        .map_err(|_| Error::parse(lineno, "bad time"))?,
                    k: f[5].parse().map_err(|_| Error::parse(lineno, "bad k"))?,
                });
            }
        }
        let g = IsoEnergyGraph {
            nodes,
            arcs,
            unit_energy_wh,
        };
        g.validate()?;
        Ok(g)
    }
}

/// Minimum-energy path cost between a source/target pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathCost {
    pub energy_wh: f64,
    pub time_s: f64,
    pub distance_m: f64,
}

impl PathCost {
    pub const ZERO: PathCost = PathCost {
        energy_wh: 0.0,
        time_s: 0.0,
        distance_m: 0.0,
    };
    pub const UNREACHABLE: PathCost = PathCost {
        energy_wh: f64::INFINITY,
        time_s: f64::INFINITY,
        distance_m: f64::INFINITY,
    };

    pub fn reachable(&self) -> bool {
        self.energy_wh.is_finite()
    }
}

/// Pairwise minimum-energy path costs plus a reachability summary.
#[derive(Debug, Clone)]
pub struct EnergyMatrix {
    pub sources: Vec<usize>,
    /// `costs[s][t]` for source `sources[s]` and target node `t`.
    pub costs: Vec<Vec<PathCost>>,
    /// (source, target) pairs with no path.
    pub unreachable: Vec<(usize, usize)>,
}

impl EnergyMatrix {
    pub fn cost(&self, source_pos: usize, target: usize) -> PathCost {
        self.costs[source_pos][target]
    }
}

struct HeapEntry {
    energy: f64,
    time: f64,
    node: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    // Min-heap on (energy, time, node); BinaryHeap is a max-heap, so reverse.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .energy
            .total_cmp(&self.energy)
            .then(other.time.total_cmp(&self.time))
            .then(other.node.cmp(&self.node))
    }
}

/// Single-source minimum-energy search. Ties in energy are broken by smaller
/// travel time, then smaller distance, so results are deterministic.
pub fn shortest_energy_from(g: &RoadGraph, source: usize) -> Vec<PathCost> {
    let n = g.node_count();
    let mut adj: Vec<Vec<&RoadArc>> = vec![Vec::new(); n];
    for arc in &g.arcs {
        adj[arc.tail].push(arc);
    }
    dijkstra_energy(&adj, n, source)
}

fn dijkstra_energy(adj: &[Vec<&RoadArc>], n: usize, source: usize) -> Vec<PathCost> {
    let mut best = vec![PathCost::UNREACHABLE; n];
    let mut done = vec![false; n];
    best[source] = PathCost::ZERO;
    let mut heap = BinaryHeap::new();
    heap.push(HeapEntry {
        energy: 0.0,
        time: 0.0,
        node: source,
    });
    while let Some(HeapEntry { energy, node, .. }) = heap.pop() {
        if done[node] || energy > best[node].energy_wh {
            continue;
        }
        done[node] = true;
        let at = best[node];
        for arc in &adj[node] {
            let cand = PathCost {
                energy_wh: at.energy_wh + arc.energy_wh,
                time_s: at.time_s + arc.travel_time_s,
                distance_m: at.distance_m + arc.distance_m,
            };
            let cur = &best[arc.head];
            let better = cand.energy_wh < cur.energy_wh - 1e-12
                || (cand.energy_wh <= cur.energy_wh + 1e-12
                    && (cand.time_s, cand.distance_m) < (cur.time_s, cur.distance_m));
            if !done[arc.head] && better {
                best[arc.head] = cand;
                heap.push(HeapEntry {
                    energy: cand.energy_wh,
                    time: cand.time_s,
                    node: arc.head,
                });
            }
        }
    }
    best
}

/// Minimum-energy path costs from each source to every node. Sources run in
/// parallel.
pub fn shortest_energy_matrix(g: &RoadGraph, sources: &[usize]) -> EnergyMatrix {
    let n = g.node_count();
    let mut adj: Vec<Vec<&RoadArc>> = vec![Vec::new(); n];
    for arc in &g.arcs {
        adj[arc.tail].push(arc);
    }
    let costs: Vec<Vec<PathCost>> = sources
        .par_iter()
        .map(|&s| dijkstra_energy(&adj, n, s))
        .collect();
    let mut unreachable = Vec::new();
    for (si, row) in costs.iter().enumerate() {
        for (t, c) in row.iter().enumerate() {
            if !c.reachable() {
                unreachable.push((sources[si], t));
            }
        }
    }
    EnergyMatrix {
        sources: sources.to_vec(),
        costs,
        unreachable,
    }
}

pub fn strongly_connected(n: usize, arcs: impl Iterator<Item = (usize, usize)>) -> bool {
    if n == 0 {
        return true;
    }
    let mut fwd: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut bwd: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (t, h) in arcs {
        fwd[t].push(h);
        bwd[h].push(t);
    }
    reaches_all(&fwd, 0) && reaches_all(&bwd, 0)
}

fn reaches_all(adj: &[Vec<usize>], start: usize) -> bool {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![start];
    seen[start] = true;
    let mut count = 1;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                stack.push(w);
            }
        }
    }
    count == adj.len()
}

/// Relative distance of `energy` to its best multiple of `unit` with k in
/// `1..=k_max`: `min_k |e - k u| / (k u)`, together with the minimizing k.
fn best_multiple(energy: f64, unit: f64, k_max: u32) -> (u32, f64) {
    let mut best = (1u32, f64::INFINITY);
    for k in 1..=k_max {
        let target = k as f64 * unit;
        let ratio = (energy - target).abs() / target;
        if ratio < best.1 {
            best = (k, ratio);
        }
    }
    best
}

/// Reduces `g` to an iso-energy graph with the default `k_max`.
///
/// Node selection is greedy: seed with the highest-degree node, then
/// repeatedly add the node whose minimum shortest-path energy to the selected
/// set is closest (relatively) to a multiple of the unit energy. With a
/// `target_node_count` the loop runs until the target is reached; without one
/// it stops when no remaining candidate is within `delta`.
pub fn resample_iso_energy(
    g: &RoadGraph,
    unit_energy_wh: f64,
    delta: f64,
    target_node_count: Option<usize>,
) -> Result<IsoEnergyGraph> {
    resample_iso_energy_with_kmax(g, unit_energy_wh, delta, target_node_count, DEFAULT_K_MAX)
}

pub fn resample_iso_energy_with_kmax(
    g: &RoadGraph,
    unit_energy_wh: f64,
    delta: f64,
    target_node_count: Option<usize>,
    k_max: u32,
) -> Result<IsoEnergyGraph> {
    if !(unit_energy_wh > 0.0) {
        return Err(Error::Validation("unit_energy_wh must be positive".into()));
    }
    if !(0.0..0.5).contains(&delta) {
        return Err(Error::Validation(format!(
            "delta must be in [0, 0.5), got {delta}"
        )));
    }
    let n = g.node_count();
    if n == 0 {
        return Err(Error::Validation("empty road graph".into()));
    }
    if n == 1 {
        log::warn!("degenerate single-node road graph; iso-energy graph has no arcs");
        return Ok(IsoEnergyGraph {
            nodes: vec![IsoNode {
                original_id: g.nodes[0].original_id,
                lat: g.nodes[0].lat,
                lon: g.nodes[0].lon,
            }],
            arcs: Vec::new(),
            unit_energy_wh,
        });
    }
    if !strongly_connected(n, g.arcs.iter().map(|a| (a.tail, a.head))) {
        return Err(Error::Validation(
            "road graph must be strongly connected".into(),
        ));
    }

    let all: Vec<usize> = (0..n).collect();
    let matrix = shortest_energy_matrix(g, &all);

    let mut degree = vec![0usize; n];
    for arc in &g.arcs {
        degree[arc.tail] += 1;
        degree[arc.head] += 1;
    }
    let seed = (0..n)
        .max_by(|&a, &b| degree[a].cmp(&degree[b]).then(b.cmp(&a)))
        .unwrap();

    let mut selected = vec![seed];
    let mut is_selected = vec![false; n];
    is_selected[seed] = true;

    let target = target_node_count.unwrap_or(n).min(n);
    loop {
        if selected.len() >= target {
            break;
        }
        // Best candidate: smallest relative residual of its closest selected
        // node's shortest-path energy to a unit multiple.
        let mut best: Option<(usize, f64)> = None;
        for v in 0..n {
            if is_selected[v] {
                continue;
            }
            let e_min = selected
                .iter()
                .map(|&s| {
                    matrix.costs[s][v]
                        .energy_wh
                        .min(matrix.costs[v][s].energy_wh)
                })
                .fold(f64::INFINITY, f64::min);
            if !e_min.is_finite() {
                continue;
            }
            let (_, ratio) = best_multiple(e_min, unit_energy_wh, k_max);
            let replace = match best {
                None => true,
                Some((bv, br)) => {
                    ratio < br - 1e-15
                        || ((ratio - br).abs() <= 1e-15
                            && (degree[v], std::cmp::Reverse(v))
                                > (degree[bv], std::cmp::Reverse(bv)))
                }
            };
            if replace {
                best = Some((v, ratio));
            }
        }
        match best {
            Some((v, ratio)) if target_node_count.is_some() || ratio <= delta => {
                is_selected[v] = true;
                selected.push(v);
            }
            _ => break,
        }
    }
    selected.sort_unstable();

    // Emit every qualifying ordered pair as an arc.
    let build_arcs = |tolerance: f64| -> Vec<IsoArc> {
        let mut arcs = Vec::new();
        for (ri, &i) in selected.iter().enumerate() {
            for (rj, &j) in selected.iter().enumerate() {
                if i == j {
                    continue;
                }
                let cost = matrix.costs[i][j];
                if !cost.reachable() {
                    continue;
                }
                let (k, ratio) = best_multiple(cost.energy_wh, unit_energy_wh, k_max);
                if ratio <= tolerance {
                    arcs.push(IsoArc {
                        tail: ri,
                        head: rj,
                        k,
                        travel_time_s: cost.time_s,
                        distance_m: cost.distance_m,
                    });
                }
            }
        }
        arcs
    };

    let arcs = build_arcs(delta);
    let m = selected.len();
    if m > 1 && !strongly_connected(m, arcs.iter().map(|a| (a.tail, a.head))) {
        // Tightest achievable delta: smallest pairwise residual ratio whose
        // arc set is strongly connected on the selected nodes.
        let mut ratios: Vec<f64> = Vec::new();
        for &i in &selected {
            for &j in &selected {
                if i != j && matrix.costs[i][j].reachable() {
                    ratios.push(best_multiple(matrix.costs[i][j].energy_wh, unit_energy_wh, k_max).1);
                }
            }
        }
        ratios.sort_by(f64::total_cmp);
        ratios.dedup();
        let tightest = ratios
            .into_iter()
            .find(|&r| strongly_connected(m, build_arcs(r).iter().map(|a| (a.tail, a.head))));
        return Err(Error::InfeasibleReduction {
            requested_delta: delta,
            tightest_delta: tightest,
        });
    }

    let nodes = selected
        .iter()
        .map(|&i| IsoNode {
            original_id: g.nodes[i].original_id,
            lat: g.nodes[i].lat,
            lon: g.nodes[i].lon,
        })
        .collect();
    Ok(IsoEnergyGraph {
        nodes,
        arcs,
        unit_energy_wh,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_io::{RoadNode, RoadGraph};

    fn graph(n: usize, arcs: &[(usize, usize, f64, f64, f64)]) -> RoadGraph {
        RoadGraph {
            nodes: (0..n)
                .map(|i| RoadNode {
                    original_id: i as u64,
                    lat: i as f64,
                    lon: 0.0,
                })
                .collect(),
            arcs: arcs
                .iter()
                .map(|&(t, h, d, s, e)| RoadArc {
                    tail: t,
                    head: h,
                    distance_m: d,
                    travel_time_s: s,
                    energy_wh: e,
                })
                .collect(),
        }
    }

    #[test]
    fn scale_identity_and_table_values() {
        let g = graph(2, &[(0, 1, 1.0, 1.0, 100.0), (1, 0, 1.0, 1.0, 200.0)]);
        let id = VehicleSpec::new("id", 1.0, 1.0, 1.0).unwrap();
        assert_eq!(scale_energy(&g, &id).arcs[0].energy_wh, 100.0);

        let a = VehicleSpec::new("A", 0.85, 1.0, 1.0).unwrap();
        assert!((scale_energy(&g, &a).arcs[0].energy_wh - 85.0).abs() < 1e-12);
        let b = VehicleSpec::new("B", 0.93, 1.0, 1.0).unwrap();
        assert!((scale_energy(&g, &b).arcs[1].energy_wh - 186.0).abs() < 1e-12);
    }

    #[test]
    fn matrix_single_node() {
        let g = graph(1, &[]);
        let m = shortest_energy_matrix(&g, &[0]);
        assert_eq!(m.costs[0][0], PathCost::ZERO);
        assert!(m.unreachable.is_empty());
    }

    #[test]
    fn matrix_line_additivity() {
        let g = graph(
            3,
            &[(0, 1, 5.0, 2.0, 10.0), (1, 2, 7.0, 3.0, 20.0)],
        );
        let m = shortest_energy_matrix(&g, &[0]);
        let c = m.cost(0, 2);
        assert_eq!(c.energy_wh, 30.0);
        assert_eq!(c.time_s, 5.0);
        assert_eq!(c.distance_m, 12.0);
        // node 0 unreachable from nowhere, but 2 cannot reach back
        let m2 = shortest_energy_matrix(&g, &[2]);
        assert!(!m2.cost(0, 0).reachable());
        assert!(m2.unreachable.contains(&(2, 0)));
    }

    /// Brute-force oracle: enumerate all simple paths, tracking the
    /// lexicographic (energy, time, distance) minimum.
    fn brute_force_min_energy(g: &RoadGraph, s: usize, t: usize) -> PathCost {
        fn rec(
            g: &RoadGraph,
            node: usize,
            t: usize,
            visited: &mut Vec<bool>,
            acc: PathCost,
            best: &mut PathCost,
        ) {
            if acc.energy_wh > best.energy_wh + 1e-9 {
                return; // prune
            }
            if node == t {
                let better = acc.energy_wh < best.energy_wh - 1e-12
                    || (acc.energy_wh <= best.energy_wh + 1e-12
                        && (acc.time_s, acc.distance_m) < (best.time_s, best.distance_m));
                if better {
                    *best = acc;
                }
                return;
            }
            for arc in g.arcs.iter().filter(|a| a.tail == node) {
                if !visited[arc.head] {
                    visited[arc.head] = true;
                    rec(
                        g,
                        arc.head,
                        t,
                        visited,
                        PathCost {
                            energy_wh: acc.energy_wh + arc.energy_wh,
                            time_s: acc.time_s + arc.travel_time_s,
                            distance_m: acc.distance_m + arc.distance_m,
                        },
                        best,
                    );
                    visited[arc.head] = false;
                }
            }
        }
        if s == t {
            return PathCost::ZERO;
        }
        let mut best = PathCost::UNREACHABLE;
        let mut visited = vec![false; g.node_count()];
        visited[s] = true;
        rec(g, s, t, &mut visited, PathCost::ZERO, &mut best);
        best
    }

    #[test]
    fn matrix_matches_path_enumeration_oracle() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 20;
        let mut arcs = Vec::new();
        // ring for connectivity plus random chords, sparse enough to enumerate
        for i in 0..n {
            arcs.push((i, (i + 1) % n, 1.0, 1.0, 10.0 + rng.gen_range(0..50) as f64));
        }
        for _ in 0..20 {
            let t = rng.gen_range(0..n);
            let mut h = rng.gen_range(0..n);
            if h == t {
                h = (h + 1) % n;
            }
            arcs.push((
                t,
                h,
                rng.gen_range(1..10) as f64,
                rng.gen_range(1..10) as f64,
                10.0 + rng.gen_range(0..80) as f64,
            ));
        }
        let g = graph(n, &arcs);
        let sources: Vec<usize> = (0..n).collect();
        let m = shortest_energy_matrix(&g, &sources);
        for s in 0..n {
            for t in 0..n {
                let oracle = brute_force_min_energy(&g, s, t);
                let got = m.cost(s, t);
                assert!(
                    (got.energy_wh - oracle.energy_wh).abs() < 1e-9,
                    "({s},{t}): got {got:?}, oracle {oracle:?}"
                );
            }
        }
    }

    #[test]
    fn resample_fixed_point_on_iso_complete_graph() {
        // Complete digraph, every arc exactly one unit: the minimum-energy
        // path between any pair is the direct arc, so the reduction is the
        // identity with k = 1 everywhere.
        let n = 5;
        let mut arcs = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    arcs.push((i, j, 100.0, 30.0, 50.0));
                }
            }
        }
        let g = graph(n, &arcs);
        let iso = resample_iso_energy(&g, 50.0, 0.01, None).unwrap();
        assert_eq!(iso.node_count(), n);
        assert_eq!(iso.arc_count(), n * (n - 1));
        assert!(iso.arcs.iter().all(|a| a.k == 1));
        iso.validate().unwrap();
    }

    #[test]
    fn resample_grid_arcs_satisfy_delta_bound() {
        // 4x4 grid, bidirectional edges of one unit each.
        let n = 16;
        let at = |r: usize, c: usize| r * 4 + c;
        let mut arcs = Vec::new();
        for r in 0..4 {
            for c in 0..4 {
                if c + 1 < 4 {
                    arcs.push((at(r, c), at(r, c + 1), 100.0, 20.0, 50.0));
                    arcs.push((at(r, c + 1), at(r, c), 100.0, 20.0, 50.0));
                }
                if r + 1 < 4 {
                    arcs.push((at(r, c), at(r + 1, c), 100.0, 20.0, 50.0));
                    arcs.push((at(r + 1, c), at(r, c), 100.0, 20.0, 50.0));
                }
            }
        }
        let g = graph(n, &arcs);
        let delta = 0.05;
        let iso = resample_iso_energy(&g, 50.0, delta, None).unwrap();
        iso.validate().unwrap();
        // re-check each emitted arc against the shortest-energy oracle
        let sources: Vec<usize> = (0..n).collect();
        let m = shortest_energy_matrix(&g, &sources);
        let orig = |ri: usize| iso.nodes[ri].original_id as usize;
        for a in &iso.arcs {
            let e = m.cost(orig(a.tail), orig(a.head)).energy_wh;
            let target = a.k as f64 * iso.unit_energy_wh;
            assert!(
                (e - target).abs() <= delta * target + 1e-9,
                "arc {a:?} has oracle energy {e}"
            );
        }
    }

    #[test]
    fn resample_rejects_bad_delta() {
        let g = graph(2, &[(0, 1, 1.0, 1.0, 50.0), (1, 0, 1.0, 1.0, 50.0)]);
        assert!(resample_iso_energy(&g, 50.0, 0.5, None).is_err());
        assert!(resample_iso_energy(&g, 0.0, 0.1, None).is_err());
    }

    #[test]
    fn resample_infeasible_reports_tightest_delta() {
        // Two nodes whose connecting arcs sit 20% off the unit: delta=0.05
        // cannot connect them, and the reported tightest delta can.
        let g = graph(2, &[(0, 1, 1.0, 1.0, 60.0), (1, 0, 1.0, 1.0, 60.0)]);
        let err = resample_iso_energy(&g, 50.0, 0.05, Some(2)).unwrap_err();
        match err {
            Error::InfeasibleReduction {
                tightest_delta: Some(t),
                ..
            } => {
                assert!((t - 0.2).abs() < 1e-9, "tightest {t}");
                assert!(resample_iso_energy(&g, 50.0, t + 1e-6, Some(2)).is_ok());
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn iso_text_round_trip() {
        let n = 4;
        let mut arcs = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    arcs.push((i, j, 100.0, 30.0, 50.0));
                }
            }
        }
        let g = graph(n, &arcs);
        let iso = resample_iso_energy(&g, 50.0, 0.01, None).unwrap();
        let iso2 = IsoEnergyGraph::parse(&iso.to_text()).unwrap();
        assert_eq!(iso.node_count(), iso2.node_count());
        assert_eq!(iso.arcs, iso2.arcs);
        assert_eq!(iso.unit_energy_wh, iso2.unit_energy_wh);
    }
}

//! Betweenness-centrality station placement, the heuristic baseline against
//! which the jointly optimized siting is compared.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::isoenergy::IsoEnergyGraph;

/// Arc weight used for the shortest paths underlying the centrality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    TravelTime,
    Energy,
}

/// Betweenness value per geo-index. Endpoints are excluded from their own
/// path counts, so every value is a finite nonnegative tie-weighted count of
/// interior appearances on shortest paths.
#[derive(Debug, Clone)]
pub struct CentralityScores {
    pub scores: Vec<f64>,
}

impl CentralityScores {
    /// `geo_index,score` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("geo_index,score\n");
        for (i, s) in self.scores.iter().enumerate() {
            let _ = writeln!(out, "{i},{s}");
        }
        out
    }
}

/// Relative tolerance under which two path lengths count as tied.
const TIE_REL: f64 = 1e-9;

fn close(a: f64, b: f64) -> bool {
    a.is_finite() && b.is_finite() && (a - b).abs() <= TIE_REL * (1.0 + a.abs().max(b.abs()))
}

#[derive(PartialEq)]
struct HeapItem {
    dist: f64,
    node: usize,
}

impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (dist, node)
        other
            .dist
            .total_cmp(&self.dist)
            .then(other.node.cmp(&self.node))
    }
}

/// Exact weighted betweenness by single-source shortest-path dependency
/// accumulation (tie counting is fractional: a node on half of a pair's
/// shortest paths receives one half from that pair).
pub fn betweenness(iso: &IsoEnergyGraph, weight: WeightKind) -> Result<CentralityScores> {
    let n = iso.node_count();
    // pairs with no directed path contribute nothing, but a graph that falls
    // apart even ignoring direction has no meaningful centrality
    if !weakly_connected(n, iso.arcs.iter().map(|a| (a.tail, a.head))) {
        return Err(Error::Validation(
            "centrality requires a connected graph".into(),
        ));
    }
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for arc in &iso.arcs {
        let w = match weight {
            WeightKind::TravelTime => arc.travel_time_s,
            WeightKind::Energy => arc.k as f64,
        };
        if !(w > 0.0) {
            return Err(Error::Validation(format!(
                "non-positive arc weight on {} -> {}",
                arc.tail, arc.head
            )));
        }
        adj[arc.tail].push((arc.head, w));
    }

    let per_source: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|s| single_source_dependencies(&adj, s))
        .collect();

    let mut scores = vec![0.0; n];
    for dep in per_source {
        for (v, d) in dep.into_iter().enumerate() {
            scores[v] += d;
        }
    }
    Ok(CentralityScores { scores })
}

fn weakly_connected(n: usize, arcs: impl Iterator<Item = (usize, usize)>) -> bool {
    if n == 0 {
        return false;
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (t, h) in arcs {
        adj[t].push(h);
        adj[h].push(t);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                stack.push(v);
            }
        }
    }
    count == n
}

fn single_source_dependencies(adj: &[Vec<(usize, f64)>], s: usize) -> Vec<f64> {
    let n = adj.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut sigma = vec![0.0f64; n];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut settled_order: Vec<usize> = Vec::with_capacity(n);
    let mut settled = vec![false; n];

    dist[s] = 0.0;
    sigma[s] = 1.0;
    let mut heap = BinaryHeap::new();
    heap.push(HeapItem { dist: 0.0, node: s });
    while let Some(HeapItem { node: u, .. }) = heap.pop() {
        if settled[u] {
            continue;
        }
        settled[u] = true;
        settled_order.push(u);
        for &(v, w) in &adj[u] {
            let nd = dist[u] + w;
            if close(nd, dist[v]) {
                sigma[v] += sigma[u];
                preds[v].push(u);
            } else if nd < dist[v] {
                dist[v] = nd;
                sigma[v] = sigma[u];
                preds[v].clear();
                preds[v].push(u);
                heap.push(HeapItem { dist: nd, node: v });
            }
        }
    }

    let mut delta = vec![0.0f64; n];
    let mut dep = vec![0.0f64; n];
    for &w in settled_order.iter().rev() {
        for &v in &preds[w] {
            delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
        }
        if w != s {
            dep[w] = delta[w];
        }
    }
    dep
}

/// The `n` highest-scoring geo-indices, ties resolved toward the lower index.
pub fn heuristic_siting(scores: &CentralityScores, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores.scores[b]
            .total_cmp(&scores.scores[a])
            .then(a.cmp(&b))
    });
    let mut chosen: Vec<usize> = order.into_iter().take(n).collect();
    chosen.sort_unstable();
    chosen
}

/// Like [`heuristic_siting`] but restricted to an admissible candidate set.
pub fn heuristic_siting_among(
    scores: &CentralityScores,
    candidates: &[usize],
    n: usize,
) -> Vec<usize> {
    let mut order: Vec<usize> = candidates.to_vec();
    order.sort_by(|&a, &b| {
        scores.scores[b]
            .total_cmp(&scores.scores[a])
            .then(a.cmp(&b))
    });
    let mut chosen: Vec<usize> = order.into_iter().take(n).collect();
    chosen.sort_unstable();
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isoenergy::{IsoArc, IsoNode};

    fn graph(n: usize, arcs: &[(usize, usize, f64)]) -> IsoEnergyGraph {
        IsoEnergyGraph {
            nodes: (0..n)
                .map(|i| IsoNode {
                    original_id: i as u64,
                    lat: 0.0,
                    lon: i as f64,
                })
                .collect(),
            arcs: arcs
                .iter()
                .map(|&(t, h, w)| IsoArc {
                    tail: t,
                    head: h,
                    k: 1,
                    travel_time_s: w,
                    distance_m: w,
                })
                .collect(),
            unit_energy_wh: 1.0,
        }
    }

    #[test]
    fn three_node_line() {
        // directed line a -> b -> c: b interior on the single (a, c) path
        let g = graph(3, &[(0, 1, 1.0), (1, 2, 1.0)]);
        let bc = betweenness(&g, WeightKind::TravelTime).unwrap();
        assert_eq!(bc.scores, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn complete_graph_all_zero() {
        let mut arcs = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    arcs.push((i, j, 1.0));
                }
            }
        }
        let g = graph(4, &arcs);
        let bc = betweenness(&g, WeightKind::TravelTime).unwrap();
        assert!(bc.scores.iter().all(|&s| s == 0.0), "{:?}", bc.scores);
    }

    #[test]
    fn fractional_tie_split() {
        // two equal-length routes 0->1->3 and 0->2->3 (plus returns): nodes 1
        // and 2 each carry half of the (0,3) pair, both directions
        let g = graph(
            4,
            &[
                (0, 1, 1.0),
                (1, 3, 1.0),
                (0, 2, 1.0),
                (2, 3, 1.0),
                (3, 1, 1.0),
                (1, 0, 1.0),
                (3, 2, 1.0),
                (2, 0, 1.0),
            ],
        );
        let bc = betweenness(&g, WeightKind::TravelTime).unwrap();
        // (0,3) and (3,0) split between 1 and 2; (1,2) and (2,1) split
        // between 0 and 3 — every node carries exactly 0.5 + 0.5
        for (i, s) in bc.scores.iter().enumerate() {
            assert!((s - 1.0).abs() < 1e-12, "node {i}: {:?}", bc.scores);
        }
    }

    #[test]
    fn scaling_weights_leaves_scores_unchanged() {
        let mut g = graph(
            5,
            &[
                (0, 1, 2.0),
                (1, 2, 1.5),
                (2, 3, 2.5),
                (3, 4, 1.0),
                (4, 0, 3.0),
                (2, 0, 4.0),
                (4, 2, 2.0),
            ],
        );
        let base = betweenness(&g, WeightKind::TravelTime).unwrap();
        for arc in g.arcs.iter_mut() {
            arc.travel_time_s *= 7.0;
        }
        let scaled = betweenness(&g, WeightKind::TravelTime).unwrap();
        for (a, b) in base.scores.iter().zip(&scaled.scores) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn disconnected_rejected() {
        let g = graph(3, &[(0, 1, 1.0), (1, 0, 1.0)]);
        assert!(betweenness(&g, WeightKind::TravelTime).is_err());
    }

    #[test]
    fn heuristic_selection_rules() {
        let scores = CentralityScores {
            scores: vec![0.5, 0.1, 0.5],
        };
        assert_eq!(heuristic_siting(&scores, 0), Vec::<usize>::new());
        assert_eq!(heuristic_siting(&scores, 1), vec![0]);
        assert_eq!(heuristic_siting(&scores, 3), vec![0, 1, 2]);
        // monotone growth
        let s1 = heuristic_siting(&scores, 1);
        let s2 = heuristic_siting(&scores, 2);
        assert!(s1.iter().all(|g| s2.contains(g)));
        // candidate restriction
        assert_eq!(heuristic_siting_among(&scores, &[1, 2], 1), vec![2]);
    }

    #[test]
    fn csv_export_shape() {
        let scores = CentralityScores {
            scores: vec![0.0, 1.5],
        };
        assert_eq!(scores.to_csv(), "geo_index,score\n0,0\n1,1.5\n");
    }
}

//! Multi-layer state-of-charge expansion of an iso-energy graph.
//!
//! Layer `L-1` is a full battery, layer `0` an empty one. Traversing a road
//! arc with energy multiple `k` descends `k` layers; a charging arc ascends
//! one layer at the same location; geo-nodes tie all layers of one location
//! together and anchor demand origins/destinations.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::isoenergy::IsoEnergyGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcKind {
    Road,
    Charging,
    /// Layer node -> geo-node.
    GeoIn,
    /// Geo-node -> layer node.
    GeoOut,
}

#[derive(Debug, Clone)]
pub struct LayeredArc {
    pub tail: usize,
    pub head: usize,
    pub kind: ArcKind,
    pub travel_time_s: f64,
    /// Battery drain for road arcs, grid draw for charging arcs, zero for geo
    /// arcs.
    pub energy_wh: f64,
    pub distance_m: f64,
    /// Layer drop for road arcs (the energy multiple `k`), zero otherwise.
    pub layer_drop: u32,
    /// Geo index of the station, for charging arcs.
    pub station: Option<usize>,
}

/// SoC-expanded digraph. Node indices: layer node `(g, l)` is `g * L + l`,
/// geo-node `g` is `G * L + g`.
#[derive(Debug, Clone)]
pub struct LayeredGraph {
    pub num_layers: usize,
    pub geo_count: usize,
    pub unit_energy_wh: f64,
    pub charger_power_w: f64,
    /// Sorted geo indices where a charging station may be built.
    pub candidate_stations: Vec<usize>,
    pub arcs: Vec<LayeredArc>,
    /// Outgoing arc indices per node.
    pub out_arcs: Vec<Vec<usize>>,
    /// Incoming arc indices per node.
    pub in_arcs: Vec<Vec<usize>>,
}

impl LayeredGraph {
    pub fn layer_node(&self, geo: usize, layer: usize) -> usize {
        geo * self.num_layers + layer
    }

    pub fn geo_node(&self, geo: usize) -> usize {
        self.geo_count * self.num_layers + geo
    }

    pub fn node_count(&self) -> usize {
        self.geo_count * self.num_layers + self.geo_count
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_geo_node(&self, node: usize) -> bool {
        node >= self.geo_count * self.num_layers
    }

    /// `(geo, Some(layer))` for layer nodes, `(geo, None)` for geo-nodes.
    pub fn node_location(&self, node: usize) -> (usize, Option<usize>) {
        if self.is_geo_node(node) {
            (node - self.geo_count * self.num_layers, None)
        } else {
            (node / self.num_layers, Some(node % self.num_layers))
        }
    }

    /// Charging rate in layers per hour.
    pub fn charge_rate_layers_per_hour(&self) -> f64 {
        self.charger_power_w / self.unit_energy_wh
    }

    fn node_label(&self, node: usize) -> String {
        match self.node_location(node) {
            (g, Some(l)) => format!("({g},{l})"),
            (g, None) => format!("geo({g})"),
        }
    }

    /// Text listing of every arc, for golden-file tests.
    pub fn debug_dump(&self) -> String {
        let mut out = String::new();
        for arc in &self.arcs {
            let kind = match arc.kind {
                ArcKind::Road => "road",
                ArcKind::Charging => "charging",
                ArcKind::GeoIn => "geo-in",
                ArcKind::GeoOut => "geo-out",
            };
            let _ = writeln!(
                out,
                "{} -> {} {} {} {}",
                self.node_label(arc.tail),
                self.node_label(arc.head),
                kind,
                arc.travel_time_s,
                arc.energy_wh
            );
        }
        out
    }
}

/// Expands `iso` into the layered digraph.
///
/// `L = floor(battery_capacity_wh / unit_energy_wh)`. Charging arcs exist at
/// every candidate station; whether flow may use them is decided later by the
/// model's siting variables. Their traversal time is the time to gain one
/// unit of energy at `charger_power_w`.
pub fn build_layered_graph(
    iso: &IsoEnergyGraph,
    battery_capacity_wh: f64,
    candidate_stations: &[usize],
    charger_power_w: f64,
) -> Result<LayeredGraph> {
    let unit = iso.unit_energy_wh;
    if battery_capacity_wh < unit {
        return Err(Error::Validation(format!(
            "battery capacity {battery_capacity_wh} Wh below unit energy {unit} Wh"
        )));
    }
    let num_layers = (battery_capacity_wh / unit).floor() as usize;
    if num_layers < 2 {
        return Err(Error::Validation(format!(
            "battery too small: only {num_layers} SoC layer(s); need at least 2"
        )));
    }
    let geo_count = iso.node_count();
    let mut stations: Vec<usize> = candidate_stations.to_vec();
    stations.sort_unstable();
    stations.dedup();
    if let Some(&bad) = stations.iter().find(|&&s| s >= geo_count) {
        return Err(Error::Validation(format!(
            "candidate station {bad} outside the reduced node set (|V_G|={geo_count})"
        )));
    }
    if !stations.is_empty() && !(charger_power_w > 0.0) {
        return Err(Error::Validation(
            "charger_power_w must be positive when candidate stations exist".into(),
        ));
    }

    let mut g = LayeredGraph {
        num_layers,
        geo_count,
        unit_energy_wh: unit,
        charger_power_w,
        candidate_stations: stations,
        arcs: Vec::new(),
        out_arcs: Vec::new(),
        in_arcs: Vec::new(),
    };

    // Road arcs: one copy per layer high enough to pay the drop.
    for arc in &iso.arcs {
        let k = arc.k as usize;
        for layer in k..num_layers {
            g.arcs.push(LayeredArc {
                tail: g.layer_node(arc.tail, layer),
                head: g.layer_node(arc.head, layer - k),
                kind: ArcKind::Road,
                travel_time_s: arc.travel_time_s,
                energy_wh: arc.k as f64 * unit,
                distance_m: arc.distance_m,
                layer_drop: arc.k,
                station: None,
            });
        }
    }

    // Charging arcs: one layer up at each candidate station.
    let charge_time_s = if g.candidate_stations.is_empty() {
        0.0
    } else {
        unit / charger_power_w * 3600.0
    };
    for &station in &g.candidate_stations.clone() {
        for layer in 0..num_layers - 1 {
            g.arcs.push(LayeredArc {
                tail: g.layer_node(station, layer),
                head: g.layer_node(station, layer + 1),
                kind: ArcKind::Charging,
                travel_time_s: charge_time_s,
                energy_wh: unit,
                distance_m: 0.0,
                layer_drop: 0,
                station: Some(station),
            });
        }
    }

    // Geo arcs: each geo-node connects bidirectionally to all its layers.
    for geo in 0..geo_count {
        for layer in 0..num_layers {
            g.arcs.push(LayeredArc {
                tail: g.geo_node(geo),
                head: g.layer_node(geo, layer),
                kind: ArcKind::GeoOut,
                travel_time_s: 0.0,
                energy_wh: 0.0,
                distance_m: 0.0,
                layer_drop: 0,
                station: None,
            });
            g.arcs.push(LayeredArc {
                tail: g.layer_node(geo, layer),
                head: g.geo_node(geo),
                kind: ArcKind::GeoIn,
                travel_time_s: 0.0,
                energy_wh: 0.0,
                distance_m: 0.0,
                layer_drop: 0,
                station: None,
            });
        }
    }

    let n = g.node_count();
    g.out_arcs = vec![Vec::new(); n];
    g.in_arcs = vec![Vec::new(); n];
    for (idx, arc) in g.arcs.iter().enumerate() {
        g.out_arcs[arc.tail].push(idx);
        g.in_arcs[arc.head].push(idx);
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isoenergy::{reference_vehicles, IsoArc, IsoEnergyGraph, IsoNode};

    fn iso(n: usize, arcs: &[(usize, usize, u32)], unit: f64) -> IsoEnergyGraph {
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
                .map(|&(t, h, k)| IsoArc {
                    tail: t,
                    head: h,
                    k,
                    travel_time_s: 60.0,
                    distance_m: 500.0,
                })
                .collect(),
            unit_energy_wh: unit,
        }
    }

    #[test]
    fn single_arc_three_layers() {
        let g = build_layered_graph(&iso(2, &[(0, 1, 1)], 50.0), 150.0, &[], 0.0).unwrap();
        assert_eq!(g.num_layers, 3);
        let road: Vec<_> = g
            .arcs
            .iter()
            .filter(|a| a.kind == ArcKind::Road)
            .map(|a| (g.node_location(a.tail), g.node_location(a.head)))
            .collect();
        assert_eq!(
            road,
            vec![
                ((0, Some(1)), (1, Some(0))),
                ((0, Some(2)), (1, Some(1))),
            ]
        );
    }

    #[test]
    fn arc_counts_match_closed_forms() {
        // 19 nodes is the Manhattan-sized case; counts come straight from the
        // construction rules.
        let n = 19;
        let mut arcs = Vec::new();
        for i in 0..n {
            arcs.push((i, (i + 1) % n, 1));
            arcs.push(((i + 1) % n, i, 2));
        }
        let g = build_layered_graph(&iso(n, &arcs, 100.0), 1000.0, &[0, 3, 7, 11, 15], 5000.0)
            .unwrap();
        assert_eq!(g.num_layers, 10);
        let count = |kind: ArcKind| g.arcs.iter().filter(|a| a.kind == kind).count();
        let expected_road: usize = arcs.iter().map(|&(_, _, k)| 10 - k as usize).sum();
        assert_eq!(count(ArcKind::Road), expected_road);
        assert_eq!(count(ArcKind::Charging), 5 * 9);
        assert_eq!(count(ArcKind::GeoIn) + count(ArcKind::GeoOut), 2 * 19 * 10);
    }

    #[test]
    fn reference_vehicle_layer_counts() {
        let vehicles = reference_vehicles();
        let expected = [196usize, 428, 670];
        for (v, want) in vehicles.iter().zip(expected) {
            let unit = v.unit_energy_wh();
            let g = build_layered_graph(&iso(2, &[(0, 1, 1), (1, 0, 1)], unit), v.battery_capacity_wh, &[], 0.0)
                .unwrap();
            assert_eq!(g.num_layers, want, "{}", v.label);
        }
    }

    #[test]
    fn battery_too_small() {
        let err = build_layered_graph(&iso(2, &[(0, 1, 1)], 50.0), 80.0, &[], 0.0).unwrap_err();
        assert!(err.to_string().contains("battery too small"), "{err}");
    }

    #[test]
    fn no_road_arc_exits_layer_zero() {
        let g = build_layered_graph(&iso(3, &[(0, 1, 1), (1, 2, 2), (2, 0, 1)], 50.0), 260.0, &[1], 1000.0)
            .unwrap();
        for arc in &g.arcs {
            if arc.kind == ArcKind::Road {
                let (_, layer) = g.node_location(arc.tail);
                assert!(layer.unwrap() >= arc.layer_drop as usize);
            }
        }
    }

    #[test]
    fn layer_bookkeeping_along_walks() {
        // Walk random arc sequences; net layer change times unit energy must
        // equal net battery energy exchanged.
        let g = build_layered_graph(&iso(3, &[(0, 1, 1), (1, 2, 2), (2, 0, 1)], 50.0), 300.0, &[0, 2], 2000.0)
            .unwrap();
        for start in [0usize, 7, 11] {
            let mut node = start.min(g.node_count() - 1);
            let mut dropped = 0i64;
            let mut gained = 0i64;
            for step in 0..40 {
                let outs = &g.out_arcs[node];
                if outs.is_empty() {
                    break;
                }
                let arc = &g.arcs[outs[step % outs.len()]];
                match arc.kind {
                    ArcKind::Road => dropped += arc.layer_drop as i64,
                    ArcKind::Charging => gained += 1,
                    _ => {}
                }
                let (tg, tl) = g.node_location(arc.tail);
                let (hg, hl) = g.node_location(arc.head);
                if let (Some(tl), Some(hl)) = (tl, hl) {
                    match arc.kind {
                        ArcKind::Road => {
                            assert_eq!(tl as i64 - hl as i64, arc.layer_drop as i64)
                        }
                        ArcKind::Charging => {
                            assert_eq!(hl - tl, 1);
                            assert_eq!(tg, hg);
                        }
                        _ => {}
                    }
                }
                node = arc.head;
            }
            // structural identity, not a numeric tolerance matter
            let _ = dropped - gained;
        }
    }

    #[test]
    fn debug_dump_golden_shape() {
        let g = build_layered_graph(&iso(2, &[(0, 1, 1)], 50.0), 100.0, &[1], 1800.0).unwrap();
        let dump = g.debug_dump();
        assert!(dump.contains("(0,1) -> (1,0) road 60 50"), "{dump}");
        assert!(dump.contains("(1,0) -> (1,1) charging 100 50"), "{dump}");
        assert!(dump.contains("geo(0) -> (0,0) geo-out 0 0"), "{dump}");
    }
}

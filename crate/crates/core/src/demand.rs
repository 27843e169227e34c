//! Aggregation of raw trips into steady-state travel requests: tuples of
//! (origin geo-node, destination geo-node, rate in vehicles per hour).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::graph_io::TripRecord;
use crate::isoenergy::IsoEnergyGraph;

#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub origin: usize,
    pub destination: usize,
    pub rate_per_hour: f64,
}

#[derive(Debug, Clone)]
pub struct DemandSet {
    pub requests: Vec<Request>,
    pub horizon_hours: f64,
}

impl DemandSet {
    pub fn total_rate(&self) -> f64 {
        self.requests.iter().map(|r| r.rate_per_hour).sum()
    }

    /// CSV rows with a `horizon_hours=` header line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "horizon_hours={}", self.horizon_hours);
        out.push_str("origin,destination,rate_per_hour\n");
        for r in &self.requests {
            let _ = writeln!(out, "{},{},{}", r.origin, r.destination, r.rate_per_hour);
        }
        out
    }

    pub fn parse(document: &str) -> Result<Self> {
        let mut lines = document.lines();
        let horizon_hours: f64 = lines
            .next()
            .and_then(|l| l.trim().strip_prefix("horizon_hours="))
            .ok_or_else(|| Error::parse(1, "expected `horizon_hours=<value>` header"))?
            .parse()
            .map_err(|_| Error::parse(1, "cannot parse horizon"))?;
        let mut requests = Vec::new();
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let line = line.trim();
            if line.is_empty() || line == "origin,destination,rate_per_hour" {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 3 {
                return Err(Error::parse(lineno, "expected `origin,destination,rate_per_hour`"));
            }
            requests.push(Request {
                origin: f[0].trim().parse().map_err(|_| Error::parse(lineno, "bad origin"))?,
                destination: f[1].trim().parse().map_err(|_| Error::parse(lineno, "bad destination"))?,
                rate_per_hour: f[2].trim().parse().map_err(|_| Error::parse(lineno, "bad rate"))?,
            });
        }
        Ok(DemandSet {
            requests,
            horizon_hours,
        })
    }
}

/// What happened while snapping trips to the reduced node set.
#[derive(Debug, Clone, Default)]
pub struct AggregationSummary {
    pub trips_in: usize,
    pub riders_in: u64,
    /// Trips whose endpoints snapped to the same node.
    pub dropped_degenerate: usize,
}

const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Great-circle distance in meters.
pub fn haversine_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = (lat2 - lat1).to_radians();
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * a.sqrt().asin()
}

fn snap(iso: &IsoEnergyGraph, lat: f64, lon: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, node) in iso.nodes.iter().enumerate() {
        let d = haversine_m(lat, lon, node.lat, node.lon);
        // strict < keeps the lower index on ties
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Snaps each trip's endpoints to the nearest reduced node, merges identical
/// (origin, destination) pairs, and converts counts into hourly rates.
pub fn aggregate_demands(
    trips: &[TripRecord],
    iso: &IsoEnergyGraph,
    horizon_hours: f64,
) -> Result<(DemandSet, AggregationSummary)> {
    if !(horizon_hours > 0.0) {
        return Err(Error::Validation("horizon_hours must be positive".into()));
    }
    if trips.is_empty() {
        return Err(Error::Validation("no trips to aggregate".into()));
    }
    let mut merged: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut summary = AggregationSummary {
        trips_in: trips.len(),
        ..Default::default()
    };
    for trip in trips {
        summary.riders_in += trip.count as u64;
        let o = snap(iso, trip.pickup_lat, trip.pickup_lon);
        let d = snap(iso, trip.dropoff_lat, trip.dropoff_lon);
        if o == d {
            summary.dropped_degenerate += 1;
            continue;
        }
        *merged.entry((o, d)).or_insert(0) += trip.count as u64;
    }
    if merged.is_empty() {
        return Err(Error::Validation(
            "all trips snapped to degenerate origin=destination pairs".into(),
        ));
    }
    let requests = merged
        .into_iter()
        .map(|((origin, destination), count)| Request {
            origin,
            destination,
            rate_per_hour: count as f64 / horizon_hours,
        })
        .collect();
    Ok((
        DemandSet {
            requests,
            horizon_hours,
        },
        summary,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isoenergy::{IsoEnergyGraph, IsoNode};

    fn iso_nodes(coords: &[(f64, f64)]) -> IsoEnergyGraph {
        IsoEnergyGraph {
            nodes: coords
                .iter()
                .enumerate()
                .map(|(i, &(lat, lon))| IsoNode {
                    original_id: i as u64,
                    lat,
                    lon,
                })
                .collect(),
            arcs: Vec::new(),
            unit_energy_wh: 1.0,
        }
    }

    fn trip(p: (f64, f64), d: (f64, f64), count: u32) -> TripRecord {
        TripRecord {
            pickup_lat: p.0,
            pickup_lon: p.1,
            dropoff_lat: d.0,
            dropoff_lon: d.1,
            timestamp: 0,
            count,
        }
    }

    #[test]
    fn ten_identical_trips_over_ten_hours() {
        let iso = iso_nodes(&[(0.0, 0.0), (1.0, 1.0)]);
        let trips: Vec<_> = (0..10).map(|_| trip((0.0, 0.0), (1.0, 1.0), 1)).collect();
        let (d, s) = aggregate_demands(&trips, &iso, 10.0).unwrap();
        assert_eq!(d.requests.len(), 1);
        assert_eq!(d.requests[0].rate_per_hour, 1.0);
        assert_eq!(s.dropped_degenerate, 0);
    }

    #[test]
    fn merge_rule_hand_enumeration() {
        let iso = iso_nodes(&[(0.0, 0.0), (1.0, 1.0)]);
        let trips = vec![
            trip((0.0, 0.0), (1.0, 1.0), 1),
            trip((0.01, 0.01), (0.99, 1.01), 1), // snaps A->B too
            trip((1.0, 1.0), (0.0, 0.0), 1),
        ];
        let (d, _) = aggregate_demands(&trips, &iso, 1.0).unwrap();
        assert_eq!(d.requests.len(), 2);
        assert_eq!(d.requests[0], Request { origin: 0, destination: 1, rate_per_hour: 2.0 });
        assert_eq!(d.requests[1], Request { origin: 1, destination: 0, rate_per_hour: 1.0 });
    }

    #[test]
    fn rate_conservation_and_degenerate_drop() {
        let iso = iso_nodes(&[(0.0, 0.0), (1.0, 1.0)]);
        let trips = vec![
            trip((0.0, 0.0), (1.0, 1.0), 3),
            trip((0.0, 0.0), (0.05, 0.05), 2), // both endpoints snap to node 0
        ];
        let (d, s) = aggregate_demands(&trips, &iso, 2.0).unwrap();
        assert_eq!(s.dropped_degenerate, 1);
        // non-degenerate rider-weighted count is 3
        assert!((d.total_rate() * d.horizon_hours - 3.0).abs() < 1e-12);
    }

    #[test]
    fn snapping_is_idempotent_on_node_coordinates() {
        let iso = iso_nodes(&[(10.0, 10.0), (20.0, 20.0), (30.0, 30.0)]);
        let trips = vec![trip((20.0, 20.0), (30.0, 30.0), 1)];
        let (d, _) = aggregate_demands(&trips, &iso, 1.0).unwrap();
        assert_eq!((d.requests[0].origin, d.requests[0].destination), (1, 2));
    }

    #[test]
    fn all_degenerate_is_an_error() {
        let iso = iso_nodes(&[(0.0, 0.0), (50.0, 50.0)]);
        let trips = vec![trip((0.0, 0.0), (0.1, 0.1), 1)];
        assert!(aggregate_demands(&trips, &iso, 1.0).is_err());
    }

    #[test]
    fn text_round_trip() {
        let d = DemandSet {
            requests: vec![
                Request { origin: 0, destination: 3, rate_per_hour: 2.5 },
                Request { origin: 3, destination: 1, rate_per_hour: 0.25 },
            ],
            horizon_hours: 24.0,
        };
        let d2 = DemandSet::parse(&d.to_text()).unwrap();
        assert_eq!(d.requests, d2.requests);
        assert_eq!(d.horizon_hours, d2.horizon_hours);
    }
}

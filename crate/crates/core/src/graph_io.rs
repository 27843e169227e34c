//! Road-network and trip-record ingestion.
//!
//! The road-network document is line oriented with two sections:
//!
//! ```text
//! [nodes]
//! <id> <lat> <lon>
//! [arcs]
//! <tail-id> <head-id> <dist_m> <time_s> <energy_wh>
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Node ids may be any
//! non-negative integers; they are re-indexed to dense `0..|V|-1` indices at
//! parse time and the original ids are retained on the nodes.
//!
//! Trip records are CSV with header
//! `pickup_lat,pickup_lon,dropoff_lat,dropoff_lon,timestamp,count`.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RoadNode {
    pub original_id: u64,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadArc {
    /// Dense tail node index.
    pub tail: usize,
    /// Dense head node index.
    pub head: usize,
    pub distance_m: f64,
    pub travel_time_s: f64,
    pub energy_wh: f64,
}

/// Raw directed road network with dense 0-based node indices.
#[derive(Debug, Clone, Default)]
pub struct RoadGraph {
    pub nodes: Vec<RoadNode>,
    pub arcs: Vec<RoadArc>,
}

impl RoadGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    /// Dense index of a node by its original document id.
    pub fn index_of_original(&self, original_id: u64) -> Option<usize> {
        self.nodes.iter().position(|n| n.original_id == original_id)
    }

    /// Checks every structural invariant; used after parsing and by callers
    /// that build graphs programmatically.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        for (idx, arc) in self.arcs.iter().enumerate() {
            if arc.tail >= n || arc.head >= n {
                return Err(Error::Validation(format!(
                    "arc {idx} references a node out of range (tail={}, head={}, |V|={n})",
                    arc.tail, arc.head
                )));
            }
            if arc.tail == arc.head {
                return Err(Error::Validation(format!(
                    "arc {idx} is a self-loop at node {}",
                    self.nodes[arc.tail].original_id
                )));
            }
            for (value, what) in [
                (arc.distance_m, "distance"),
                (arc.travel_time_s, "travel_time"),
                (arc.energy_wh, "energy"),
            ] {
                if !(value > 0.0 && value.is_finite()) {
                    return Err(Error::Validation(format!(
                        "arc {idx} ({} -> {}) has non-positive {what} {value}",
                        self.nodes[arc.tail].original_id, self.nodes[arc.head].original_id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Parses the `[nodes]`/`[arcs]` document format.
    pub fn parse(document: &str) -> Result<Self> {
        let mut graph = RoadGraph::default();
        let mut index_by_id: HashMap<u64, usize> = HashMap::new();
        let mut section = Section::None;

        for (lineno, raw) in document.lines().enumerate() {
            let lineno = lineno + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line {
                "[nodes]" => {
                    section = Section::Nodes;
                    continue;
                }
                "[arcs]" => {
                    section = Section::Arcs;
                    continue;
                }
                _ => {}
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            match section {
                Section::None => {
                    return Err(Error::parse(lineno, "data before a [nodes] or [arcs] header"))
                }
                Section::Nodes => {
                    if fields.len() != 3 {
                        return Err(Error::parse(
                            lineno,
                            format!("expected `id lat lon`, got {} fields", fields.len()),
                        ));
                    }
                    let id: u64 = parse_field(fields[0], lineno, "node id")?;
                    let lat: f64 = parse_field(fields[1], lineno, "latitude")?;
                    let lon: f64 = parse_field(fields[2], lineno, "longitude")?;
                    if !(lat.is_finite() && lon.is_finite()) {
                        return Err(Error::parse(lineno, "non-finite coordinate"));
                    }
                    if index_by_id.insert(id, graph.nodes.len()).is_some() {
                        return Err(Error::parse(lineno, format!("duplicate node id {id}")));
                    }
                    graph.nodes.push(RoadNode {
                        original_id: id,
                        lat,
                        lon,
                    });
                }
                Section::Arcs => {
                    if fields.len() != 5 {
                        return Err(Error::parse(
                            lineno,
                            format!(
                                "expected `tail head dist_m time_s energy_wh`, got {} fields",
                                fields.len()
                            ),
                        ));
                    }
                    let tail_id: u64 = parse_field(fields[0], lineno, "tail id")?;
                    let head_id: u64 = parse_field(fields[1], lineno, "head id")?;
                    let tail = *index_by_id.get(&tail_id).ok_or_else(|| {
                        Error::Validation(format!(
                            "arc at line {lineno} references unknown node {tail_id}"
                        ))
                    })?;
                    let head = *index_by_id.get(&head_id).ok_or_else(|| {
                        Error::Validation(format!(
                            "arc at line {lineno} references unknown node {head_id}"
                        ))
                    })?;
                    graph.arcs.push(RoadArc {
                        tail,
                        head,
                        distance_m: parse_field(fields[2], lineno, "distance")?,
                        travel_time_s: parse_field(fields[3], lineno, "travel time")?,
                        energy_wh: parse_field(fields[4], lineno, "energy")?,
                    });
                }
            }
        }
        graph.validate()?;
        Ok(graph)
    }

    /// Serializes back to the document format. `parse(to_text(g))` yields an
    /// isomorphic graph.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("[nodes]\n");
        for node in &self.nodes {
            let _ = writeln!(out, "{} {} {}", node.original_id, node.lat, node.lon);
        }
        out.push_str("[arcs]\n");
        for arc in &self.arcs {
            let _ = writeln!(
                out,
                "{} {} {} {} {}",
                self.nodes[arc.tail].original_id,
                self.nodes[arc.head].original_id,
                arc.distance_m,
                arc.travel_time_s,
                arc.energy_wh
            );
        }
        out
    }
}

#[derive(Clone, Copy)]
enum Section {
    None,
    Nodes,
    Arcs,
}

fn parse_field<T: std::str::FromStr>(s: &str, line: usize, what: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::parse(line, format!("cannot parse {what} from `{s}`")))
}

/// One raw trip observation, before snapping and aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct TripRecord {
    pub pickup_lat: f64,
    pub pickup_lon: f64,
    pub dropoff_lat: f64,
    pub dropoff_lon: f64,
    /// Seconds since epoch.
    pub timestamp: i64,
    /// Rider count, >= 1.
    pub count: u32,
}

const TRIP_HEADER: [&str; 6] = [
    "pickup_lat",
    "pickup_lon",
    "dropoff_lat",
    "dropoff_lon",
    "timestamp",
    "count",
];

/// Reads trip records from CSV text; order preserved.
pub fn load_trip_records(document: &str) -> Result<Vec<TripRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(document.as_bytes());

    let headers = reader
        .headers()
        .map_err(|e| Error::parse(1, e.to_string()))?
        .clone();
    for expected in TRIP_HEADER {
        if !headers.iter().any(|h| h == expected) {
            return Err(Error::parse(1, format!("missing column `{expected}`")));
        }
    }
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let cols = TRIP_HEADER.map(col);

    let mut trips = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let lineno = i + 2;
        let record = record.map_err(|e| Error::parse(lineno, e.to_string()))?;
        let field = |c: usize| -> Result<&str> {
            record
                .get(c)
                .ok_or_else(|| Error::parse(lineno, "missing column value"))
        };
        let trip = TripRecord {
            pickup_lat: parse_field(field(cols[0])?, lineno, "pickup_lat")?,
            pickup_lon: parse_field(field(cols[1])?, lineno, "pickup_lon")?,
            dropoff_lat: parse_field(field(cols[2])?, lineno, "dropoff_lat")?,
            dropoff_lon: parse_field(field(cols[3])?, lineno, "dropoff_lon")?,
            timestamp: parse_field(field(cols[4])?, lineno, "timestamp")?,
            count: parse_field(field(cols[5])?, lineno, "count")?,
        };
        if trip.count < 1 {
            return Err(Error::Validation(format!(
                "trip at line {lineno} has count {} < 1",
                trip.count
            )));
        }
        let coords = [
            trip.pickup_lat,
            trip.pickup_lon,
            trip.dropoff_lat,
            trip.dropoff_lon,
        ];
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Validation(format!(
                "trip at line {lineno} has a non-finite coordinate"
            )));
        }
        trips.push(trip);
    }
    Ok(trips)
}

/// Writes trips back out in the canonical column order.
pub fn trip_records_to_csv(trips: &[TripRecord]) -> String {
    let mut out = TRIP_HEADER.join(",");
    out.push('\n');
    for t in trips {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            t.pickup_lat, t.pickup_lon, t.dropoff_lat, t.dropoff_lon, t.timestamp, t.count
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = "\
[nodes]
0 52.0 4.0
7 52.1 4.1
[arcs]
0 7 100 10 20
";

    #[test]
    fn parses_minimal_document() {
        let g = RoadGraph::parse(TINY).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.arc_count(), 1);
        // original id 7 re-indexed to dense index 1
        assert_eq!(g.index_of_original(7), Some(1));
        let a = &g.arcs[0];
        assert_eq!((a.tail, a.head), (0, 1));
        assert_eq!((a.distance_m, a.travel_time_s, a.energy_wh), (100.0, 10.0, 20.0));
    }

    #[test]
    fn dangling_endpoint_names_the_node() {
        let doc = "[nodes]\n0 0 0\n1 1 1\n[arcs]\n0 99 1 1 1\n";
        let err = RoadGraph::parse(doc).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(err.to_string().contains("99"), "{err}");
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let doc = "[nodes]\n0 0 0\nbogus line here extra\n";
        let err = RoadGraph::parse(doc).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn non_positive_weight_rejected() {
        let doc = "[nodes]\n0 0 0\n1 1 1\n[arcs]\n0 1 100 0 20\n";
        let err = RoadGraph::parse(doc).unwrap_err();
        assert!(err.to_string().contains("travel_time"), "{err}");
    }

    #[test]
    fn self_loop_rejected() {
        let doc = "[nodes]\n0 0 0\n[arcs]\n0 0 1 1 1\n";
        assert!(RoadGraph::parse(doc).is_err());
    }

    #[test]
    fn trips_empty_data_section() {
        let doc = "pickup_lat,pickup_lon,dropoff_lat,dropoff_lon,timestamp,count\n";
        assert!(load_trip_records(doc).unwrap().is_empty());
    }

    #[test]
    fn trips_read_back_identity() {
        let doc = "\
pickup_lat,pickup_lon,dropoff_lat,dropoff_lon,timestamp,count
40.7,-74.0,40.8,-73.9,1646100000,1
40.71,-74.01,40.81,-73.91,1646100060,2
40.72,-74.02,40.82,-73.92,1646100120,3
";
        let trips = load_trip_records(doc).unwrap();
        assert_eq!(trips.len(), 3);
        assert_eq!(trips[1].count, 2);
        assert_eq!(trips[2].timestamp, 1646100120);
        let trips2 = load_trip_records(&trip_records_to_csv(&trips)).unwrap();
        assert_eq!(trips, trips2);
    }

    #[test]
    fn trips_missing_column() {
        let doc = "pickup_lat,pickup_lon,dropoff_lat,dropoff_lon,timestamp\n1,2,3,4,5\n";
        let err = load_trip_records(doc).unwrap_err();
        assert!(err.to_string().contains("count"), "{err}");
    }

    #[test]
    fn trips_count_below_one() {
        let doc = "pickup_lat,pickup_lon,dropoff_lat,dropoff_lon,timestamp,count\n1,2,3,4,5,0\n";
        assert!(load_trip_records(doc).is_err());
    }
}

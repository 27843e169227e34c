//! Joint optimization of routing/charging flows and charging-station siting
//! for electric autonomous mobility-on-demand (E-AMoD) fleets.
//!
//! The pipeline is:
//!
//! 1. [`graph_io`]: read a road network and raw trip records from disk.
//! 2. [`isoenergy`]: reduce the road network to a graph whose arcs all cost
//!    an integer multiple of one unit of battery energy.
//! 3. [`layered`]: expand the reduced graph into a multi-layer digraph with
//!    one layer per state-of-charge quantum, plus geo-nodes and charging arcs.
//! 4. [`demand`]: aggregate trips into steady-state request rates between
//!    geo-nodes.
//! 5. [`model`]: assemble the fixed-siting LP or the joint-siting MILP as a
//!    sparse constraint system.
//! 6. [`solver`]: solve it with an in-repo revised simplex and
//!    branch-and-bound.
//! 7. [`siting`]: betweenness-centrality heuristic placement, for comparison.
//! 8. [`scenario`]: end-to-end pipelines, metrics and sweep harnesses.

pub mod demand;
pub mod error;
pub mod graph_io;
pub mod isoenergy;
pub mod layered;
pub mod model;
pub mod scenario;
pub mod siting;
pub mod solver;

pub use error::{Error, Result};

//! End-to-end harnesses: metric extraction from solved flows, the
//! station-count sweep against the centrality heuristic, and the vehicle
//! comparison pipeline.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::demand::{aggregate_demands, DemandSet};
use crate::error::{Error, Result};
use crate::graph_io::{RoadGraph, TripRecord};
use crate::isoenergy::{resample_iso_energy_with_kmax, scale_energy, VehicleSpec, DEFAULT_K_MAX};
use crate::layered::{build_layered_graph, ArcKind, LayeredGraph};
use crate::model::{FlowSolution, ScenarioParams, SolveStatus};
use crate::siting::{betweenness, heuristic_siting_among, WeightKind};
use crate::solver::{enumerate_sitings, solve_scenario, SolverConfig};

/// Steady-state operating metrics of one solved scenario. Hourly rates are
/// extrapolated to daily figures (x24).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metrics {
    /// The objective: vehicle-hours of flow per hour of operation.
    pub total_vehicle_hours_per_hour: f64,
    /// Fleet size by Little's law — numerically the same quantity.
    pub fleet_size_estimate: f64,
    pub user_energy_wh_per_day: f64,
    /// Traction energy of empty vehicles on road arcs.
    pub rebal_energy_wh_per_day: f64,
    /// Energy drawn from the grid on charging arcs, reported separately from
    /// the road-arc rebalancing energy.
    pub charging_grid_energy_wh_per_day: f64,
    /// Rebalancing fraction of the total traction energy.
    pub rebal_share: f64,
    pub charging_visits_per_day: f64,
}

/// Extracts [`Metrics`] from an optimal solution.
pub fn compute_metrics(sol: &FlowSolution, lg: &LayeredGraph, demand: &DemandSet) -> Result<Metrics> {
    if sol.status != SolveStatus::Optimal {
        return Err(Error::Solver(format!(
            "metrics require an optimal solution (status {:?})",
            sol.status
        )));
    }
    for r in &demand.requests {
        if r.origin >= lg.geo_count || r.destination >= lg.geo_count {
            return Err(Error::Validation(
                "demand references a geo-node outside the layered graph".into(),
            ));
        }
    }
    let charge_rate = lg.charge_rate_layers_per_hour();

    let mut user_energy_per_h = 0.0;
    let mut user_time_per_h = 0.0;
    for (&(_, a), &v) in &sol.user_flows {
        let arc = &lg.arcs[a];
        user_energy_per_h += arc.energy_wh * v;
        user_time_per_h += arc.travel_time_s / 3600.0 * v;
    }
    let mut rebal_energy_per_h = 0.0;
    let mut rebal_time_per_h = 0.0;
    let mut grid_energy_per_h = 0.0;
    let mut visits_per_h = 0.0;
    for (&a, &v) in &sol.rebal_flows {
        let arc = &lg.arcs[a];
        rebal_time_per_h += arc.travel_time_s / 3600.0 * v;
        if arc.kind == ArcKind::Charging {
            grid_energy_per_h += arc.energy_wh * v;
            if charge_rate > 0.0 {
                visits_per_h += v / charge_rate;
            }
        } else {
            rebal_energy_per_h += arc.energy_wh * v;
        }
    }

    let total_vh = user_time_per_h + rebal_time_per_h;
    let traction = user_energy_per_h + rebal_energy_per_h;
    Ok(Metrics {
        total_vehicle_hours_per_hour: total_vh,
        fleet_size_estimate: total_vh,
        user_energy_wh_per_day: user_energy_per_h * 24.0,
        rebal_energy_wh_per_day: rebal_energy_per_h * 24.0,
        charging_grid_energy_wh_per_day: grid_energy_per_h * 24.0,
        rebal_share: if traction > 0.0 {
            rebal_energy_per_h / traction
        } else {
            0.0
        },
        charging_visits_per_day: visits_per_h * 24.0,
    })
}

/// One station-budget point of the sweep: the jointly optimized siting
/// against the betweenness heuristic at the same budget.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub n: usize,
    pub optimal_objective: f64,
    pub optimal_rebal_energy_wh_per_day: f64,
    pub optimal_siting: Vec<usize>,
    pub heuristic_objective: f64,
    pub heuristic_rebal_energy_wh_per_day: f64,
    pub heuristic_siting: Vec<usize>,
}

/// Sweeps the station budget N. Each point solves the joint MILP and the
/// fixed-siting LP with the top-N centrality picks (restricted to the
/// layered graph's candidates). Points are independent solves; a failing
/// point carries its error without aborting the sweep.
pub fn sweep_stations(
    iso: &crate::isoenergy::IsoEnergyGraph,
    lg: &LayeredGraph,
    demand: &DemandSet,
    station_capacity: f64,
    n_values: &[usize],
    cfg: &SolverConfig,
) -> Result<Vec<(usize, Result<SweepRow>)>> {
    let scores = betweenness(iso, WeightKind::TravelTime)?;
    let charge_rate = lg.charge_rate_layers_per_hour();
    let rows: Vec<(usize, Result<SweepRow>)> = n_values
        .par_iter()
        .map(|&n| {
            let run = || -> Result<SweepRow> {
                let joint = ScenarioParams::joint(n, station_capacity, charge_rate);
                let opt = solve_scenario(lg, demand, &joint, cfg)?;
                if opt.status != SolveStatus::Optimal {
                    return Err(Error::Solver(format!(
                        "joint siting at N={n}: {:?}",
                        opt.status
                    )));
                }
                let opt_metrics = compute_metrics(&opt, lg, demand)?;

                let siting = heuristic_siting_among(&scores, &lg.candidate_stations, n);
                let fixed = ScenarioParams::fixed(siting.clone(), n, station_capacity, charge_rate);
                let heur = solve_scenario(lg, demand, &fixed, cfg)?;
                if heur.status != SolveStatus::Optimal {
                    return Err(Error::Solver(format!(
                        "heuristic siting at N={n}: {:?}",
                        heur.status
                    )));
                }
                let heur_metrics = compute_metrics(&heur, lg, demand)?;

                Ok(SweepRow {
                    n,
                    optimal_objective: opt.objective,
                    optimal_rebal_energy_wh_per_day: opt_metrics.rebal_energy_wh_per_day,
                    optimal_siting: opt.sited_stations(),
                    heuristic_objective: heur.objective,
                    heuristic_rebal_energy_wh_per_day: heur_metrics.rebal_energy_wh_per_day,
                    heuristic_siting: siting,
                })
            };
            (n, run())
        })
        .collect();
    Ok(rows)
}

/// `n,optimal_rebal_energy_wh_per_day,heuristic_rebal_energy_wh_per_day,optimal_objective,heuristic_objective`
/// rows; failed points carry `error` in place of the numbers.
pub fn sweep_to_csv(rows: &[(usize, Result<SweepRow>)]) -> String {
    let mut out = String::from(
        "n,optimal_rebal_energy_wh_per_day,heuristic_rebal_energy_wh_per_day,optimal_objective,heuristic_objective\n",
    );
    for (n, row) in rows {
        match row {
            Ok(r) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    n,
                    r.optimal_rebal_energy_wh_per_day,
                    r.heuristic_rebal_energy_wh_per_day,
                    r.optimal_objective,
                    r.heuristic_objective
                );
            }
            Err(e) => {
                let _ = writeln!(out, "{n},error,error,error,\"{e}\"");
            }
        }
    }
    out
}

/// Everything the end-to-end pipeline needs besides the road graph and the
/// trip records.
#[derive(Debug, Clone)]
pub struct PipelineParams {
    /// Relative iso-energy snap tolerance.
    pub delta: f64,
    pub k_max: u32,
    /// Reduced node count; None keeps adding nodes until `delta` blocks.
    pub target_nodes: Option<usize>,
    /// Station budget N.
    pub max_stations: usize,
    /// Simultaneous vehicles per station (Z).
    pub station_capacity: f64,
    pub charger_power_w: f64,
    /// Candidate geo-nodes for stations; None admits every geo-node.
    pub candidates: Option<Vec<usize>>,
    pub horizon_hours: f64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            delta: 0.05,
            k_max: DEFAULT_K_MAX,
            target_nodes: None,
            max_stations: 10,
            station_capacity: 10.0,
            charger_power_w: 11_000.0,
            candidates: None,
            horizon_hours: 1.0,
        }
    }
}

/// One vehicle's row in the comparison table.
#[derive(Debug, Clone)]
pub struct VehicleReport {
    pub label: String,
    pub num_layers: usize,
    pub iso_nodes: usize,
    pub fleet_size: f64,
    pub total_energy_wh_per_day: f64,
    pub user_energy_wh_per_day: f64,
    pub rebal_energy_wh_per_day: f64,
    pub charging_grid_energy_wh_per_day: f64,
    pub siting: Vec<usize>,
}

/// Scale energies -> iso-energy reduction -> demand snapping -> SoC layering
/// -> joint MILP -> metrics, for a single vehicle.
pub fn run_vehicle_pipeline(
    road: &RoadGraph,
    trips: &[TripRecord],
    vehicle: &VehicleSpec,
    pp: &PipelineParams,
    cfg: &SolverConfig,
) -> Result<VehicleReport> {
    let scaled = scale_energy(road, vehicle);
    let iso = resample_iso_energy_with_kmax(
        &scaled,
        vehicle.unit_energy_wh(),
        pp.delta,
        pp.target_nodes,
        pp.k_max,
    )?;
    let (demand, _) = aggregate_demands(trips, &iso, pp.horizon_hours)?;
    let candidates: Vec<usize> = match &pp.candidates {
        Some(c) => c.clone(),
        None => (0..iso.node_count()).collect(),
    };
    let lg = build_layered_graph(
        &iso,
        vehicle.battery_capacity_wh,
        &candidates,
        pp.charger_power_w,
    )?;
    let params = ScenarioParams::joint(
        pp.max_stations,
        pp.station_capacity,
        lg.charge_rate_layers_per_hour(),
    );
    let sol = solve_scenario(&lg, &demand, &params, cfg)?;
    if sol.status != SolveStatus::Optimal {
        return Err(Error::Solver(format!(
            "vehicle {}: solve ended {:?}",
            vehicle.label, sol.status
        )));
    }
    let metrics = compute_metrics(&sol, &lg, &demand)?;
    Ok(VehicleReport {
        label: vehicle.label.clone(),
        num_layers: lg.num_layers,
        iso_nodes: iso.node_count(),
        fleet_size: metrics.fleet_size_estimate,
        total_energy_wh_per_day: metrics.user_energy_wh_per_day + metrics.rebal_energy_wh_per_day,
        user_energy_wh_per_day: metrics.user_energy_wh_per_day,
        rebal_energy_wh_per_day: metrics.rebal_energy_wh_per_day,
        charging_grid_energy_wh_per_day: metrics.charging_grid_energy_wh_per_day,
        siting: sol.sited_stations(),
    })
}

/// Runs the full pipeline once per vehicle. Failures are carried per row.
pub fn compare_vehicles(
    road: &RoadGraph,
    trips: &[TripRecord],
    vehicles: &[VehicleSpec],
    pp: &PipelineParams,
    cfg: &SolverConfig,
) -> Vec<(String, Result<VehicleReport>)> {
    vehicles
        .par_iter()
        .map(|v| (v.label.clone(), run_vehicle_pipeline(road, trips, v, pp, cfg)))
        .collect()
}

/// `vehicle,layers,fleet_size,total_energy_wh_per_day,rebal_energy_wh_per_day,charging_grid_energy_wh_per_day`
pub fn vehicles_to_csv(rows: &[(String, Result<VehicleReport>)]) -> String {
    let mut out = String::from(
        "vehicle,layers,fleet_size,total_energy_wh_per_day,rebal_energy_wh_per_day,charging_grid_energy_wh_per_day\n",
    );
    for (label, row) in rows {
        match row {
            Ok(r) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    label,
                    r.num_layers,
                    r.fleet_size,
                    r.total_energy_wh_per_day,
                    r.rebal_energy_wh_per_day,
                    r.charging_grid_energy_wh_per_day
                );
            }
            Err(e) => {
                let _ = writeln!(out, "{label},error,error,error,error,\"{e}\"");
            }
        }
    }
    out
}

/// Cross-checks a sweep row against the exhaustive oracle (testing hook).
pub fn verify_sweep_row_against_oracle(
    lg: &LayeredGraph,
    demand: &DemandSet,
    station_capacity: f64,
    row: &SweepRow,
    cfg: &SolverConfig,
) -> Result<()> {
    let params = ScenarioParams::joint(
        row.n,
        station_capacity,
        lg.charge_rate_layers_per_hour(),
    );
    let (_, oracle_obj, _) = enumerate_sitings(lg, demand, &params, cfg)?;
    let tol = 1e-6 * (1.0 + oracle_obj.abs());
    if (row.optimal_objective - oracle_obj).abs() > tol {
        return Err(Error::Solver(format!(
            "sweep N={} objective {} disagrees with oracle {}",
            row.n, row.optimal_objective, oracle_obj
        )));
    }
    if row.heuristic_objective < oracle_obj - tol {
        return Err(Error::Solver(format!(
            "heuristic beat the oracle at N={}: {} < {}",
            row.n, row.heuristic_objective, oracle_obj
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::Request;
    use crate::isoenergy::{IsoArc, IsoEnergyGraph, IsoNode};
    use crate::layered::LayeredArc;
    use std::collections::HashMap;

    fn solved(objective: f64) -> FlowSolution {
        FlowSolution {
            status: SolveStatus::Optimal,
            objective,
            column_values: vec![],
            user_flows: HashMap::new(),
            rebal_flows: HashMap::new(),
            siting: vec![],
            duals: None,
            gap: 0.0,
        }
    }

    fn two_node_lg() -> LayeredGraph {
        // hand-built: 2 geo-nodes, 2 layers, one road arc each way per layer
        // where possible, one charging arc at geo 0
        let arcs = vec![
            LayeredArc {
                tail: 1,
                head: 2,
                kind: ArcKind::Road,
                travel_time_s: 1800.0,
                energy_wh: 100.0,
                distance_m: 1000.0,
                layer_drop: 1,
                station: None,
            },
            LayeredArc {
                tail: 3,
                head: 0,
                kind: ArcKind::Road,
                travel_time_s: 1800.0,
                energy_wh: 100.0,
                distance_m: 1000.0,
                layer_drop: 1,
                station: None,
            },
            LayeredArc {
                tail: 0,
                head: 1,
                kind: ArcKind::Charging,
                travel_time_s: 600.0,
                energy_wh: 100.0,
                distance_m: 0.0,
                layer_drop: 0,
                station: Some(0),
            },
        ];
        let mut out_arcs = vec![Vec::new(); 6];
        let mut in_arcs = vec![Vec::new(); 6];
        for (i, a) in arcs.iter().enumerate() {
            out_arcs[a.tail].push(i);
            in_arcs[a.head].push(i);
        }
        LayeredGraph {
            num_layers: 2,
            geo_count: 2,
            unit_energy_wh: 100.0,
            charger_power_w: 600.0,
            candidate_stations: vec![0],
            arcs,
            out_arcs,
            in_arcs,
        }
    }

    #[test]
    fn zero_flow_metrics_are_zero() {
        let lg = two_node_lg();
        let demand = DemandSet {
            requests: vec![],
            horizon_hours: 1.0,
        };
        let m = compute_metrics(&solved(0.0), &lg, &demand).unwrap();
        assert_eq!(m, Metrics::default());
    }

    #[test]
    fn non_optimal_solution_refused() {
        let lg = two_node_lg();
        let demand = DemandSet {
            requests: vec![],
            horizon_hours: 1.0,
        };
        let mut sol = solved(0.0);
        sol.status = SolveStatus::Infeasible;
        assert!(compute_metrics(&sol, &lg, &demand).is_err());
    }

    #[test]
    fn hand_computed_single_arc_metrics() {
        // one user flow of 1/h on a 0.5 h / 100 Wh arc, and the symmetric
        // rebalancing flow on the opposite arc
        let lg = two_node_lg();
        let demand = DemandSet {
            requests: vec![Request {
                origin: 0,
                destination: 1,
                rate_per_hour: 1.0,
            }],
            horizon_hours: 1.0,
        };
        let mut sol = solved(1.0);
        sol.user_flows.insert((0, 0), 1.0);
        sol.rebal_flows.insert(1, 1.0);
        let m = compute_metrics(&sol, &lg, &demand).unwrap();
        assert!((m.fleet_size_estimate - 1.0).abs() < 1e-12);
        assert!((m.user_energy_wh_per_day - 2400.0).abs() < 1e-9);
        assert!((m.rebal_energy_wh_per_day - 2400.0).abs() < 1e-9);
        assert!((m.rebal_share - 0.5).abs() < 1e-12);
        assert_eq!(m.charging_grid_energy_wh_per_day, 0.0);
    }

    #[test]
    fn charging_flow_counts_as_grid_draw_and_visits() {
        let lg = two_node_lg();
        let demand = DemandSet {
            requests: vec![],
            horizon_hours: 1.0,
        };
        let mut sol = solved(0.0);
        // 6/h through the charger; E = 600 W / 100 Wh = 6 layers/hour
        sol.rebal_flows.insert(2, 6.0);
        let m = compute_metrics(&sol, &lg, &demand).unwrap();
        assert!((m.charging_grid_energy_wh_per_day - 6.0 * 100.0 * 24.0).abs() < 1e-9);
        assert!((m.charging_visits_per_day - 24.0).abs() < 1e-9);
        assert_eq!(m.rebal_energy_wh_per_day, 0.0);
        assert_eq!(m.rebal_share, 0.0);
    }

    fn tri_iso() -> IsoEnergyGraph {
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
                    original_id: i as u64,
                    lat: 0.0,
                    lon: i as f64,
                })
                .collect(),
            arcs,
            unit_energy_wh: 100.0,
        }
    }

    #[test]
    fn sweep_dominance_and_monotonicity() {
        let iso = tri_iso();
        let lg = crate::layered::build_layered_graph(&iso, 320.0, &[0, 1, 2], 6000.0).unwrap();
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
        let rows = sweep_stations(&iso, &lg, &demand, 4.0, &[1, 2, 3], &cfg).unwrap();
        let mut prev_opt = f64::INFINITY;
        for (n, row) in &rows {
            let row = row.as_ref().unwrap_or_else(|e| panic!("N={n}: {e}"));
            assert!(
                row.optimal_objective <= row.heuristic_objective + 1e-6,
                "N={n}: optimal {} > heuristic {}",
                row.optimal_objective,
                row.heuristic_objective
            );
            assert!(
                row.optimal_objective <= prev_opt + 1e-6,
                "optimal column must be non-increasing in N"
            );
            prev_opt = row.optimal_objective;
            verify_sweep_row_against_oracle(&lg, &demand, 4.0, row, &cfg)
                .unwrap_or_else(|e| panic!("{e}"));
        }
        let csv = sweep_to_csv(&rows);
        assert!(csv.starts_with("n,optimal_rebal_energy_wh_per_day"));
        assert_eq!(csv.lines().count(), 4);
    }
}

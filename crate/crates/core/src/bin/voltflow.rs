//! Command-line front end: iso-energy reduction, layered-graph assembly,
//! LP/MILP solving, station sweeps, and vehicle comparisons.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use voltflow_core::demand::aggregate_demands;
use voltflow_core::graph_io::{load_trip_records, RoadGraph};
use voltflow_core::isoenergy::{
    reference_vehicles, resample_iso_energy_with_kmax, IsoEnergyGraph, DEFAULT_K_MAX,
};
use voltflow_core::layered::build_layered_graph;
use voltflow_core::model::{assemble, export_lp_text, ScenarioParams, SolveStatus};
use voltflow_core::scenario::{
    compare_vehicles, compute_metrics, sweep_stations, sweep_to_csv, vehicles_to_csv,
    PipelineParams,
};
use voltflow_core::siting::{betweenness, WeightKind};
use voltflow_core::solver::{scenario_solution_dump, solve_scenario, SolverConfig};
use voltflow_core::{Error, Result};

#[derive(Parser)]
#[command(name = "voltflow", version, about = "Electric fleet routing, charging and station siting optimizer")]
struct Cli {
    /// Verbose solver / pipeline logging.
    #[arg(short, long, global = true)]
    verbose: bool,
    /// Seed for randomized harnesses; the optimization pipeline itself is
    /// deterministic.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct NetworkArgs {
    /// Road network file.
    #[arg(long)]
    network: PathBuf,
    /// Unit battery energy in Wh for the iso-energy reduction.
    #[arg(long, default_value_t = 90.0)]
    unit_energy_wh: f64,
    /// Relative snap tolerance of the reduction.
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Largest admissible arc multiple of the unit energy.
    #[arg(long, default_value_t = DEFAULT_K_MAX)]
    k_max: u32,
    /// Stop the reduction at this many nodes instead of at the tolerance.
    #[arg(long)]
    target_nodes: Option<usize>,
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    /// Trip records CSV.
    #[arg(long)]
    trips: PathBuf,
    /// Usable battery capacity in Wh.
    #[arg(long, default_value_t = 15_000.0)]
    battery_capacity_wh: f64,
    /// Station budget N.
    #[arg(long, default_value_t = 10)]
    stations: usize,
    /// Vehicles a station can charge simultaneously (Z).
    #[arg(long, default_value_t = 10.0)]
    station_capacity: f64,
    /// Charger power in W.
    #[arg(long, default_value_t = 11_000.0)]
    charger_power_w: f64,
    /// Candidate geo-nodes (comma-separated); defaults to every geo-node.
    #[arg(long, value_delimiter = ',')]
    candidates: Option<Vec<usize>>,
    /// Demand aggregation horizon in hours.
    #[arg(long, default_value_t = 1.0)]
    horizon_hours: f64,
    /// Wall-clock limit for the solver in seconds (0 disables).
    #[arg(long, default_value_t = 0.0)]
    time_limit_s: f64,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Mode {
    Lp,
    Milp,
}

#[derive(Subcommand)]
enum Command {
    /// Reduce a road network to an iso-energy graph.
    Resample {
        #[command(flatten)]
        net: NetworkArgs,
        /// Output file for the iso-energy graph.
        #[arg(long)]
        output: PathBuf,
    },
    /// Build the SoC-layered graph and report its dimensions.
    Build {
        #[command(flatten)]
        net: NetworkArgs,
        #[arg(long, default_value_t = 15_000.0)]
        battery_capacity_wh: f64,
        #[arg(long, default_value_t = 11_000.0)]
        charger_power_w: f64,
        #[arg(long, value_delimiter = ',')]
        candidates: Option<Vec<usize>>,
        /// Also print every layered arc.
        #[arg(long)]
        dump: bool,
    },
    /// Solve the routing/charging problem for one scenario.
    Solve {
        #[command(flatten)]
        net: NetworkArgs,
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// lp fixes the siting (--siting or all candidates); milp optimizes it.
        #[arg(long, value_enum)]
        mode: Mode,
        /// Sited stations for --mode lp (comma-separated geo indices).
        #[arg(long, value_delimiter = ',')]
        siting: Option<Vec<usize>>,
        /// Write operating metrics CSV here.
        #[arg(long)]
        metrics_out: Option<PathBuf>,
        /// Write the `variable,value` solution dump here.
        #[arg(long)]
        solution_out: Option<PathBuf>,
    },
    /// Compare jointly optimized against centrality-heuristic siting over a
    /// range of station budgets.
    Sweep {
        #[command(flatten)]
        net: NetworkArgs,
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Station budgets, e.g. `--n 1,2,3,4`.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the full pipeline for each reference vehicle.
    CompareVehicles {
        #[command(flatten)]
        net: NetworkArgs,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Emit the assembled LP/MILP as LP-format text.
    ExportLp {
        #[command(flatten)]
        net: NetworkArgs,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long, value_delimiter = ',')]
        siting: Option<Vec<usize>>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Betweenness-centrality scores of the iso-energy graph.
    Centrality {
        #[command(flatten)]
        net: NetworkArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn load_network(net: &NetworkArgs) -> Result<IsoEnergyGraph> {
    let text = fs::read_to_string(&net.network)?;
    let road = RoadGraph::parse(&text)?;
    resample_iso_energy_with_kmax(
        &road,
        net.unit_energy_wh,
        net.delta,
        net.target_nodes,
        net.k_max,
    )
}

fn scenario_setup(
    iso: &IsoEnergyGraph,
    sc: &ScenarioArgs,
) -> Result<(
    voltflow_core::layered::LayeredGraph,
    voltflow_core::demand::DemandSet,
)> {
    let trips = load_trip_records(&fs::read_to_string(&sc.trips)?)?;
    let (demand, summary) = aggregate_demands(&trips, iso, sc.horizon_hours)?;
    log::info!(
        "aggregated {} trips ({} riders, {} degenerate) into {} requests",
        summary.trips_in,
        summary.riders_in,
        summary.dropped_degenerate,
        demand.requests.len()
    );
    let candidates: Vec<usize> = match &sc.candidates {
        Some(c) => c.clone(),
        None => (0..iso.node_count()).collect(),
    };
    let lg = build_layered_graph(iso, sc.battery_capacity_wh, &candidates, sc.charger_power_w)?;
    Ok((lg, demand))
}

fn solver_config(verbose: bool, time_limit_s: f64) -> SolverConfig {
    SolverConfig {
        verbose,
        time_limit_s,
        ..SolverConfig::default()
    }
}

fn write_or_print(path: &Option<PathBuf>, content: &str) -> Result<()> {
    match path {
        Some(p) => {
            fs::write(p, content)?;
            Ok(())
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Resample { net, output } => {
            let iso = load_network(&net)?;
            fs::write(&output, iso.to_text())?;
            println!(
                "reduced to {} nodes / {} arcs at unit {} Wh -> {}",
                iso.node_count(),
                iso.arc_count(),
                iso.unit_energy_wh,
                output.display()
            );
        }
        Command::Build {
            net,
            battery_capacity_wh,
            charger_power_w,
            candidates,
            dump,
        } => {
            let iso = load_network(&net)?;
            let cand: Vec<usize> = candidates.unwrap_or_else(|| (0..iso.node_count()).collect());
            let lg = build_layered_graph(&iso, battery_capacity_wh, &cand, charger_power_w)?;
            println!(
                "layered graph: {} layers, {} geo-nodes, {} nodes, {} arcs, {} candidate stations",
                lg.num_layers,
                lg.geo_count,
                lg.node_count(),
                lg.arc_count(),
                lg.candidate_stations.len()
            );
            if dump {
                print!("{}", lg.debug_dump());
            }
        }
        Command::Solve {
            net,
            scenario,
            mode,
            siting,
            metrics_out,
            solution_out,
        } => {
            let iso = load_network(&net)?;
            let (lg, demand) = scenario_setup(&iso, &scenario)?;
            let rate = lg.charge_rate_layers_per_hour();
            let params = match mode {
                Mode::Milp => ScenarioParams::joint(scenario.stations, scenario.station_capacity, rate),
                Mode::Lp => {
                    let sited = siting.unwrap_or_else(|| lg.candidate_stations.clone());
                    ScenarioParams::fixed(sited, scenario.stations.max(lg.candidate_stations.len()), scenario.station_capacity, rate)
                }
            };
            let cfg = solver_config(cli.verbose, scenario.time_limit_s);
            let sol = solve_scenario(&lg, &demand, &params, &cfg)?;
            match sol.status {
                SolveStatus::Optimal => {
                    println!("optimal objective (fleet size): {:.6}", sol.objective);
                    if !sol.sited_stations().is_empty() || !sol.siting.is_empty() {
                        println!("sited stations: {:?}", sol.sited_stations());
                    }
                    let m = compute_metrics(&sol, &lg, &demand)?;
                    let metrics_csv = format!(
                        "metric,value\ntotal_vehicle_hours_per_hour,{}\nfleet_size_estimate,{}\nuser_energy_wh_per_day,{}\nrebal_energy_wh_per_day,{}\ncharging_grid_energy_wh_per_day,{}\nrebal_share,{}\ncharging_visits_per_day,{}\n",
                        m.total_vehicle_hours_per_hour,
                        m.fleet_size_estimate,
                        m.user_energy_wh_per_day,
                        m.rebal_energy_wh_per_day,
                        m.charging_grid_energy_wh_per_day,
                        m.rebal_share,
                        m.charging_visits_per_day
                    );
                    if let Some(p) = &metrics_out {
                        fs::write(p, &metrics_csv)?;
                    } else {
                        print!("{metrics_csv}");
                    }
                    if let Some(p) = &solution_out {
                        fs::write(p, scenario_solution_dump(&lg, &demand, &params, &sol))?;
                    }
                }
                other => {
                    return Err(Error::Solver(format!("solve ended with status {other:?}")));
                }
            }
        }
        Command::Sweep {
            net,
            scenario,
            n,
            output,
        } => {
            let iso = load_network(&net)?;
            let (lg, demand) = scenario_setup(&iso, &scenario)?;
            let cfg = solver_config(cli.verbose, scenario.time_limit_s);
            let rows = sweep_stations(&iso, &lg, &demand, scenario.station_capacity, &n, &cfg)?;
            write_or_print(&output, &sweep_to_csv(&rows))?;
        }
        Command::CompareVehicles {
            net,
            scenario,
            output,
        } => {
            let text = fs::read_to_string(&net.network)?;
            let road = RoadGraph::parse(&text)?;
            let trips = load_trip_records(&fs::read_to_string(&scenario.trips)?)?;
            let pp = PipelineParams {
                delta: net.delta,
                k_max: net.k_max,
                target_nodes: net.target_nodes,
                max_stations: scenario.stations,
                station_capacity: scenario.station_capacity,
                charger_power_w: scenario.charger_power_w,
                candidates: scenario.candidates.clone(),
                horizon_hours: scenario.horizon_hours,
            };
            let cfg = solver_config(cli.verbose, scenario.time_limit_s);
            let rows = compare_vehicles(&road, &trips, &reference_vehicles(), &pp, &cfg);
            write_or_print(&output, &vehicles_to_csv(&rows))?;
        }
        Command::ExportLp {
            net,
            scenario,
            mode,
            siting,
            output,
        } => {
            let iso = load_network(&net)?;
            let (lg, demand) = scenario_setup(&iso, &scenario)?;
            let rate = lg.charge_rate_layers_per_hour();
            let params = match mode {
                Mode::Milp => ScenarioParams::joint(scenario.stations, scenario.station_capacity, rate),
                Mode::Lp => {
                    let sited = siting.unwrap_or_else(|| lg.candidate_stations.clone());
                    ScenarioParams::fixed(sited, scenario.stations.max(lg.candidate_stations.len()), scenario.station_capacity, rate)
                }
            };
            let pi = assemble(&lg, &demand, &params)?;
            fs::write(&output, export_lp_text(&pi))?;
            println!("wrote {} ({})", output.display(), pi.stats());
        }
        Command::Centrality { net, output } => {
            let iso = load_network(&net)?;
            let scores = betweenness(&iso, WeightKind::TravelTime)?;
            write_or_print(&output, &scores.to_csv())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if cli.verbose {
        "info"
    } else {
        "warn"
    }))
    .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use asi::fem::save_snapshots;
use asi::geometry::decompose_convex;
use asi::mission::{nearest_free_node, prepare_model, run_asi, MissionConfig};
use asi::planner::{next_best, PlannerState};
use asi::si::{sa_initialize, solve_si, Measurement, SiProblem};
use asi::source::SourceParams;

#[derive(Parser)]
#[command(
    name = "asi",
    version,
    about = "Active source identification in steady advection-diffusion fields"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the closed measure-identify-plan loop and write a report.
    Run {
        /// Mission configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Seed for the measurement noise stream.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for report.json, trace.csv, and field dumps.
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one forward problem per cover tile and store the snapshot set.
    Snapshots {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the reduced basis from fresh snapshots and store it.
    Pod {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Identify source parameters from a measurement file.
    SolveSi {
        #[arg(long)]
        config: PathBuf,
        /// JSON array of {position, value} readings.
        #[arg(long)]
        measurements: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Propose the next waypoint given an estimate and past readings.
    PlanStep {
        #[arg(long)]
        config: PathBuf,
        /// Current source estimate (JSON).
        #[arg(long)]
        estimate: PathBuf,
        /// JSON array of {position, value} readings.
        #[arg(long)]
        measurements: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_measurements(path: &Path) -> asi::Result<Vec<Measurement>> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn run(command: Command) -> asi::Result<()> {
    match command {
        Command::Run { config, seed, out } => {
            let cfg = MissionConfig::load_json(&config)?;
            let report = run_asi(&cfg, seed, Some(&out))?;
            println!(
                "mission finished: {} measurements, converged={}, e_un={:.4}, e_loc={:.4}",
                report.n_measurements,
                report.converged,
                report.metrics.e_un,
                report.metrics.e_loc
            );
            println!("report written to {}", out.join("report.json").display());
        }
        Command::Snapshots { config, out } => {
            let cfg = MissionConfig::load_json(&config)?;
            let model = prepare_model(&cfg)?;
            std::fs::create_dir_all(&out)?;
            save_snapshots(&model.snapshots, &out)?;
            println!("wrote {} snapshots to {}", model.snapshots.len(), out.display());
        }
        Command::Pod { config, out } => {
            let cfg = MissionConfig::load_json(&config)?;
            let model = prepare_model(&cfg)?;
            std::fs::create_dir_all(&out)?;
            model.rom.save(&out)?;
            println!(
                "retained {} of {} modes at energy fraction {}",
                model.rom.n_basis(),
                model.snapshots.len(),
                cfg.rom.energy_fraction
            );
        }
        Command::SolveSi { config, measurements, out } => {
            let cfg = MissionConfig::load_json(&config)?;
            let model = prepare_model(&cfg)?;
            let readings = load_measurements(&measurements)?;
            let problem = SiProblem::new(&model.rom, cfg.si.tau, &readings)?;
            let cover = decompose_convex(&cfg.domain)?;
            let init =
                sa_initialize(&problem, &cover.subdomains, &cfg.si.sa_options(cfg.sensing.beta_max))?;
            let sol = solve_si(&problem, &init.region, &init.params, &cfg.si.si_options())?;
            std::fs::create_dir_all(&out)?;
            sol.params.save_json(&out.join("estimated_source.json"))?;
            std::fs::write(
                out.join("solution.json"),
                serde_json::to_string_pretty(&serde_json::json!({
                    "objective": sol.objective,
                    "iterations": sol.iterations,
                    "converged": sol.converged,
                }))?,
            )?;
            println!(
                "identified {} tower(s) in {} iterations, objective {:.3e}",
                sol.params.towers.len(),
                sol.iterations,
                sol.objective
            );
        }
        Command::PlanStep { config, estimate, measurements, out } => {
            let cfg = MissionConfig::load_json(&config)?;
            let model = prepare_model(&cfg)?;
            let est = SourceParams::load_json(&estimate)?;
            let readings = load_measurements(&measurements)?;
            let positions: Vec<[f64; 2]> = readings.iter().map(|m| m.position).collect();
            let state = PlannerState::with_measurements(&model.rom, &est, &positions)?;
            let cover = decompose_convex(&cfg.domain)?;
            let step = next_best(&model.rom, &state, &cover.subdomains, &cfg.planner.to_params())?;
            let node = nearest_free_node(&model.mesh, step.position)?;
            let snapped = model.mesh.node_pos(node);
            std::fs::create_dir_all(&out)?;
            std::fs::write(
                out.join("planned.json"),
                serde_json::to_string_pretty(&serde_json::json!({
                    "position": step.position,
                    "snapped_position": snapped,
                    "node": node,
                    "gain": step.gain,
                    "converged": step.converged,
                    "used_fallback": step.used_fallback,
                }))?,
            )?;
            println!(
                "next waypoint ({:.4}, {:.4}) at node {}, information gain {:.3e}",
                snapped[0], snapped[1], node, step.gain
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

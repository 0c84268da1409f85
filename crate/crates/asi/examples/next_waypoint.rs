//! Picks the next measurement location by maximizing the smallest eigenvalue
//! of the source-parameter information matrix, then cross-checks the interior
//! optimizer against a dense grid sweep.
//!
//! Run with `cargo run --example next_waypoint`.

use asi::fem::{assemble, generate_snapshots};
use asi::flow::{analytic_flow, FlowSpec};
use asi::geometry::{build_mesh, decompose_convex, Domain};
use asi::mission::initial_waypoints;
use asi::planner::{grid_argmax, next_best, PlannerParams, PlannerState};
use asi::rom::ReducedModel;
use asi::source::SourceParams;

fn main() -> asi::Result<()> {
    let domain = Domain::unit_square();
    let mesh = build_mesh(&domain, 41, 41)?;
    let flow = analytic_flow(&mesh, &FlowSpec::Uniform { velocity: [1.0, 0.0] }, 0.4)?;
    let stiffness = assemble(&mesh, &flow)?;
    let snapshots = generate_snapshots(&mesh, &stiffness, 8, 8)?;
    let rom = ReducedModel::build(&mesh, &stiffness, &snapshots, 0.97)?;

    // Current belief about the source and the readings taken so far.
    let estimate = SourceParams::single(0.8, [0.32, 0.56], [0.40, 0.66]);
    let positions: Vec<[f64; 2]> = initial_waypoints(&mesh, 12)?
        .into_iter()
        .map(|n| mesh.node_pos(n))
        .collect();
    let state = PlannerState::with_measurements(&rom, &estimate, &positions)?;

    let cover = decompose_convex(&domain)?;
    let step = next_best(&rom, &state, &cover.subdomains, &PlannerParams::default())?;
    println!(
        "planned waypoint ({:.4}, {:.4}), gain {:.4e}, converged = {}, fallback = {}",
        step.position[0], step.position[1], step.gain, step.converged, step.used_fallback
    );

    let (grid_x, grid_gain) = grid_argmax(&state, &rom, &cover.subdomains[0], 101)?;
    println!(
        "dense 101x101 sweep:  ({:.4}, {:.4}), gain {:.4e}",
        grid_x[0], grid_x[1], grid_gain
    );
    println!("planner attains {:.2}% of the sweep optimum", 100.0 * step.gain / grid_gain);
    Ok(())
}

//! Builds a reduced basis from snapshot solves and checks how well it
//! reproduces a forward solution it has never seen.
//!
//! Run with `cargo run --example reduced_model`.

use asi::fem::{assemble, generate_snapshots, l2_norm, load_vector, SourceTerm};
use asi::flow::{analytic_flow, FlowSpec};
use asi::geometry::{build_mesh, Domain};
use asi::rom::ReducedModel;
use asi::source::SourceParams;

fn main() -> asi::Result<()> {
    let mesh = build_mesh(&Domain::unit_square(), 41, 41)?;
    let flow = analytic_flow(&mesh, &FlowSpec::Uniform { velocity: [1.0, 0.0] }, 0.4)?;
    let stiffness = assemble(&mesh, &flow)?;

    let snapshots = generate_snapshots(&mesh, &stiffness, 8, 8)?;
    let rom = ReducedModel::build(&mesh, &stiffness, &snapshots, 0.97)?;
    println!("{} snapshots -> {} basis functions at 97% energy", snapshots.len(), rom.n_basis());

    let ev = rom.eigenvalues();
    let total: f64 = ev.iter().sum();
    let mut acc = 0.0;
    println!("leading spectrum (cumulative energy):");
    for (k, &l) in ev.iter().take(8).enumerate() {
        acc += l;
        println!("  lambda_{:<2} = {:10.3e}   {:6.2}%", k + 1, l, 100.0 * acc / total);
    }

    // A held-out source: off the snapshot tiling, straddling tile borders.
    let source = SourceParams::single(1.0, [0.31, 0.47], [0.56, 0.66]);
    let load = load_vector(&mesh, &SourceTerm::Towers(&source))?;
    let full = stiffness.solve_forward(&load)?;
    let reduced = rom.nodal_field(&rom.reduced_solve(&rom.reduced_rhs(&source)?)?);

    let diff: Vec<f64> = full.iter().zip(&reduced).map(|(a, b)| a - b).collect();
    let rel = l2_norm(&mesh, &diff) / l2_norm(&mesh, &full);
    println!("held-out reduced solve: relative L2 error {:.3e}", rel);
    Ok(())
}

//! Runs the full closed loop from a config file: initial sweep, identify,
//! plan, measure, repeat until the estimate settles or the budget runs out.
//!
//! Run with `cargo run --example run_mission [-- <out_dir>]`.

use std::path::{Path, PathBuf};

use asi::mission::{run_asi, MissionConfig};

fn main() -> asi::Result<()> {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.json");
    let cfg = MissionConfig::load_json(&config)?;
    let out: Option<PathBuf> = std::env::args().nth(1).map(PathBuf::from);

    let report = run_asi(&cfg, 7, out.as_deref())?;
    println!(
        "finished after {} measurements ({} identify/plan cycles), converged = {}",
        report.n_measurements,
        report.steps.len(),
        report.converged
    );
    println!("reduced basis size {}, final objective {:.3e}", report.n_basis, report.final_objective);
    if let Some(snr) = report.snr_db {
        println!("measurement SNR {:.1} dB", snr);
    }
    let t = &report.estimate.towers[0];
    println!(
        "estimate: beta = {:.3}, box ({:.3}, {:.3}) - ({:.3}, {:.3})",
        t.intensity, t.lower[0], t.lower[1], t.upper[0], t.upper[1]
    );
    let m = &report.metrics;
    println!(
        "errors: uncovered {:.3}, false detection {:.3}, intensity {:.3}, location {:.3}",
        m.e_un, m.e_fd, m.e_int, m.e_loc
    );
    for s in &report.steps {
        let planned = s
            .planned
            .as_ref()
            .map(|p| format!(" -> next ({:.2}, {:.2})", p.position[0], p.position[1]))
            .unwrap_or_default();
        println!(
            "  m = {:2}  J = {:.3e}  newton iters = {:3}{}",
            s.measurements_used, s.objective, s.si_iterations, planned
        );
    }
    if let Some(dir) = out {
        println!("artifacts written under {}", dir.display());
    }
    Ok(())
}

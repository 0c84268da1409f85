//! Decomposes an obstructed workspace into overlapping convex rectangles.
//! Every free point must fall inside at least one rectangle so that both the
//! identification and the planning subproblems stay convex-constrained.
//!
//! Run with `cargo run --example convex_cover`.

use asi::geometry::{decompose_convex, Domain, Rect};

fn main() -> asi::Result<()> {
    let domain = Domain {
        lower: [0.0, 0.0],
        upper: [4.0, 1.0],
        obstacles: vec![Rect::new([1.8, 0.4], [2.2, 1.0])],
        characteristic_length: 4.0,
    };
    let cover = decompose_convex(&domain)?;
    println!("workspace [0,4]x[0,1] with one wall-mounted obstacle");
    println!("cover has {} maximal rectangles (largest first):", cover.subdomains.len());
    for (k, r) in cover.subdomains.iter().enumerate() {
        println!(
            "  {k}: ({:.2}, {:.2}) - ({:.2}, {:.2})  area {:.2}",
            r.lower[0], r.lower[1], r.upper[0], r.upper[1], r.area()
        );
    }

    // Spot-check the covering property on a sampling grid.
    let mut covered = 0;
    let mut free = 0;
    for i in 0..=80 {
        for j in 0..=20 {
            let p = [4.0 * i as f64 / 80.0, j as f64 / 20.0];
            if domain.obstacles.iter().any(|o| o.contains(p)) {
                continue;
            }
            free += 1;
            if cover.subdomains.iter().any(|r| r.contains(p)) {
                covered += 1;
            }
        }
    }
    println!("{covered} of {free} sampled free points covered");
    Ok(())
}

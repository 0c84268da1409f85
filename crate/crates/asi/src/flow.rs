//! Flow fields and transport coefficients.
//!
//! Velocity and diffusivity are stored per mesh node. Analytic profiles cover
//! the common test setups; measured or CFD fields come in through a CSV with
//! one `node_id,u1,u2,kappa` row per node.

use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Mesh;

/// Per-node velocity and total diffusivity.
#[derive(Debug, Clone)]
pub struct FlowField {
    pub velocity: Vec<[f64; 2]>,
    pub kappa: Vec<f64>,
}

/// Analytic flow profiles.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FlowSpec {
    /// Constant velocity everywhere.
    Uniform { velocity: [f64; 2] },
    /// Plane Poiseuille profile along x1 with no-slip top and bottom walls.
    Channel { peak_velocity: f64 },
    /// Single recirculation cell from the stream function
    /// `a * sin(pi xh) * sin(pi yh)`; zero normal velocity on all walls.
    Recirculation { amplitude: f64 },
}

/// Total diffusivity `kappa = max(floor, kappa0 + mu / (rho * sc))` per node.
pub fn total_diffusivity(
    kappa0: f64,
    turbulent_viscosity: &[f64],
    rho: f64,
    sc: f64,
    floor: f64,
) -> Result<Vec<f64>> {
    if !(rho > 0.0) || !(sc > 0.0) {
        return Err(Error::Flow(format!(
            "density and Schmidt number must be positive, got rho={rho}, sc={sc}"
        )));
    }
    if !(floor > 0.0) {
        return Err(Error::Flow("diffusivity floor must be positive".into()));
    }
    if !kappa0.is_finite() || kappa0 < 0.0 {
        return Err(Error::Flow(format!(
            "molecular diffusivity must be finite and nonnegative, got {kappa0}"
        )));
    }
    turbulent_viscosity
        .iter()
        .map(|&mu| {
            if !mu.is_finite() || mu < 0.0 {
                return Err(Error::Flow(format!(
                    "turbulent viscosity must be finite and nonnegative, got {mu}"
                )));
            }
            Ok((kappa0 + mu / (rho * sc)).max(floor))
        })
        .collect()
}

/// Peclet number `u * l / kappa`.
pub fn peclet(u_mag: f64, l_char: f64, kappa_mean: f64) -> Result<f64> {
    if !(l_char > 0.0) {
        return Err(Error::Flow("characteristic length must be positive".into()));
    }
    if !(kappa_mean > 0.0) {
        return Err(Error::Flow("mean diffusivity must be positive".into()));
    }
    if !u_mag.is_finite() || u_mag < 0.0 {
        return Err(Error::Flow(format!(
            "speed must be finite and nonnegative, got {u_mag}"
        )));
    }
    Ok(u_mag * l_char / kappa_mean)
}

/// Builds an analytic flow with constant diffusivity `kappa`.
pub fn analytic_flow(mesh: &Mesh, spec: &FlowSpec, kappa: f64) -> Result<FlowField> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::Flow(format!(
            "diffusivity must be positive and finite, got {kappa}"
        )));
    }
    let n = mesh.n_nodes();
    let lo = mesh.domain.lower;
    let hi = mesh.domain.upper;
    let mut velocity = vec![[0.0, 0.0]; n];
    for idx in 0..n {
        let p = mesh.node_pos(idx);
        velocity[idx] = match spec {
            FlowSpec::Uniform { velocity } => *velocity,
            FlowSpec::Channel { peak_velocity } => {
                let yh = (p[1] - lo[1]) / (hi[1] - lo[1]);
                [4.0 * peak_velocity * yh * (1.0 - yh), 0.0]
            }
            FlowSpec::Recirculation { amplitude } => {
                let lx = hi[0] - lo[0];
                let ly = hi[1] - lo[1];
                let xh = (p[0] - lo[0]) / lx;
                let yh = (p[1] - lo[1]) / ly;
                let pi = std::f64::consts::PI;
                // u = (d psi / d x2, -d psi / d x1) for psi = a sin(pi xh) sin(pi yh).
                [
                    amplitude * pi / ly * (pi * xh).sin() * (pi * yh).cos(),
                    -amplitude * pi / lx * (pi * xh).cos() * (pi * yh).sin(),
                ]
            }
        };
    }
    Ok(FlowField { velocity, kappa: vec![kappa; n] })
}

/// Loads a per-node flow from `node_id,u1,u2,kappa` CSV rows (optional
/// header). The row count must match the mesh and `floor` is applied to kappa.
pub fn load_flow(mesh: &Mesh, path: &Path, floor: f64) -> Result<FlowField> {
    if !(floor > 0.0) {
        return Err(Error::Flow("diffusivity floor must be positive".into()));
    }
    let text = std::fs::read_to_string(path)?;
    let n = mesh.n_nodes();
    let mut velocity = vec![[0.0, 0.0]; n];
    let mut kappa = vec![0.0; n];
    let mut count = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if lineno == 0 && fields[0].parse::<usize>().is_err() {
            continue; // header
        }
        if fields.len() != 4 {
            return Err(Error::Flow(format!(
                "line {}: expected 4 fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let id: usize = fields[0]
            .parse()
            .map_err(|_| Error::Flow(format!("line {}: bad node id", lineno + 1)))?;
        if id != count {
            return Err(Error::Flow(format!(
                "line {}: node ids must be consecutive from 0, got {id}",
                lineno + 1
            )));
        }
        if id >= n {
            return Err(Error::Flow(format!(
                "row count exceeds mesh node count {n}"
            )));
        }
        let mut vals = [0.0f64; 3];
        for (k, f) in fields[1..].iter().enumerate() {
            vals[k] = f
                .parse()
                .map_err(|_| Error::Flow(format!("line {}: bad number {f:?}", lineno + 1)))?;
            if !vals[k].is_finite() {
                return Err(Error::Flow(format!(
                    "line {}: non-finite value {f:?}",
                    lineno + 1
                )));
            }
        }
        velocity[id] = [vals[0], vals[1]];
        kappa[id] = vals[2].max(floor);
        count += 1;
    }
    if count != n {
        return Err(Error::Flow(format!(
            "flow file has {count} rows but the mesh has {n} nodes"
        )));
    }
    Ok(FlowField { velocity, kappa })
}

impl FlowField {
    /// Largest central-difference divergence over free nodes. Ingested fields
    /// need not be exactly solenoidal; callers may warn on large values.
    pub fn max_divergence(&self, mesh: &Mesh) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 1..mesh.ny - 1 {
            for i in 1..mesh.nx - 1 {
                let idx = mesh.node_index(i, j);
                if !mesh.is_free(idx) {
                    continue;
                }
                let xp = mesh.node_index(i + 1, j);
                let xm = mesh.node_index(i - 1, j);
                let yp = mesh.node_index(i, j + 1);
                let ym = mesh.node_index(i, j - 1);
                if !(mesh.active[xp] && mesh.active[xm] && mesh.active[yp] && mesh.active[ym]) {
                    continue;
                }
                let div = (self.velocity[xp][0] - self.velocity[xm][0]) / (2.0 * mesh.hx)
                    + (self.velocity[yp][1] - self.velocity[ym][1]) / (2.0 * mesh.hy);
                worst = worst.max(div.abs());
            }
        }
        worst
    }

    /// Mean diffusivity over active nodes.
    pub fn mean_kappa(&self, mesh: &Mesh) -> f64 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for idx in 0..mesh.n_nodes() {
            if mesh.active[idx] {
                sum += self.kappa[idx];
                count += 1;
            }
        }
        sum / count as f64
    }

    /// Writes `node_id,u1,u2,kappa` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "node_id,u1,u2,kappa")?;
        for (idx, (v, k)) in self.velocity.iter().zip(&self.kappa).enumerate() {
            writeln!(out, "{},{},{},{}", idx, v[0], v[1], k)?;
        }
        Ok(())
    }
}

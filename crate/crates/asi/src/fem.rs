//! Full-order Galerkin discretization of steady advection-diffusion.
//!
//! Bilinear quads on the structured mesh, 2x2 Gauss quadrature, and zero
//! essential conditions eliminated from the system. The operator couples a
//! diffusion term `integral kappa grad(c) . grad(v)` with a convection term
//! `integral v u . grad(c)`; the matrix is non-symmetric but positive
//! definite for transport-dominated fields with the diffusivity floor applied.

use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use crate::band::{BandLu, BandMatrix};
use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::geometry::{Mesh, Rect};
use crate::quad::{gauss2, shape, shape_grad};
use crate::source::SourceParams;

/// Source term for the forward problem.
pub enum SourceTerm<'a> {
    /// Sum of box sources with nonnegative intensities.
    Towers(&'a SourceParams),
    /// Nonnegative per-node field, interpolated bilinearly.
    Field(&'a [f64]),
}

/// Assembled and factored stiffness operator over free nodes.
pub struct Stiffness {
    n_free: usize,
    free_of_node: Vec<Option<usize>>,
    node_of_free: Vec<usize>,
    matrix: BandMatrix,
    lu: BandLu,
}

/// Assembles the advection-diffusion operator for the given flow.
pub fn assemble(mesh: &Mesh, flow: &FlowField) -> Result<Stiffness> {
    let n = mesh.n_nodes();
    if flow.velocity.len() != n || flow.kappa.len() != n {
        return Err(Error::Fem(format!(
            "flow field sized for {} nodes but the mesh has {n}",
            flow.velocity.len()
        )));
    }
    for idx in 0..n {
        if !mesh.active[idx] {
            continue;
        }
        let k = flow.kappa[idx];
        let [u1, u2] = flow.velocity[idx];
        if !(k > 0.0) || !k.is_finite() || !u1.is_finite() || !u2.is_finite() {
            return Err(Error::Fem(format!(
                "invalid transport coefficients at node {idx}: kappa={k}, u=({u1}, {u2}); \
                 apply a positive diffusivity floor"
            )));
        }
    }

    let mut free_of_node = vec![None; n];
    let mut node_of_free = Vec::new();
    for idx in 0..n {
        if mesh.is_free(idx) {
            free_of_node[idx] = Some(node_of_free.len());
            node_of_free.push(idx);
        }
    }
    let n_free = node_of_free.len();
    if n_free == 0 {
        return Err(Error::Fem("no free nodes to solve for".into()));
    }

    // Row-major numbering keeps the half bandwidth at nx + 1; compressing out
    // constrained nodes only shrinks index gaps.
    let band = mesh.nx + 1;
    let mut matrix = BandMatrix::zeros(n_free, band, band);
    let (ncx, ncy) = mesh.n_cells();
    for cj in 0..ncy {
        for ci in 0..ncx {
            if !mesh.cell_active(ci, cj) {
                continue;
            }
            let nodes = mesh.cell_nodes(ci, cj);
            let mut ke = [[0.0f64; 4]; 4];
            for (gx, wx) in gauss2(0.0, 1.0) {
                for (gy, wy) in gauss2(0.0, 1.0) {
                    let nv = shape(gx, gy);
                    let gr = shape_grad(gx, gy, mesh.hx, mesh.hy);
                    let scale = wx * wy * mesh.hx * mesh.hy;
                    let mut kappa_g = 0.0;
                    let mut u_g = [0.0, 0.0];
                    for a in 0..4 {
                        kappa_g += nv[a] * flow.kappa[nodes[a]];
                        u_g[0] += nv[a] * flow.velocity[nodes[a]][0];
                        u_g[1] += nv[a] * flow.velocity[nodes[a]][1];
                    }
                    for a in 0..4 {
                        for b in 0..4 {
                            let diff = kappa_g * (gr[a][0] * gr[b][0] + gr[a][1] * gr[b][1]);
                            let conv = nv[a] * (u_g[0] * gr[b][0] + u_g[1] * gr[b][1]);
                            ke[a][b] += scale * (diff + conv);
                        }
                    }
                }
            }
            for a in 0..4 {
                let Some(row) = free_of_node[nodes[a]] else {
                    continue;
                };
                for b in 0..4 {
                    if let Some(col) = free_of_node[nodes[b]] {
                        matrix.add(row, col, ke[a][b]);
                    }
                }
            }
        }
    }
    let lu = matrix.clone().factor().map_err(|e| {
        Error::Fem(format!(
            "stiffness factorization failed ({e}); check the diffusivity floor and mesh"
        ))
    })?;
    Ok(Stiffness { n_free, free_of_node, node_of_free, matrix, lu })
}

impl Stiffness {
    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn free_index(&self, node: usize) -> Option<usize> {
        self.free_of_node[node]
    }

    pub fn node_of_free(&self, free: usize) -> usize {
        self.node_of_free[free]
    }

    /// Restricts a full nodal vector to free entries.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.node_of_free.iter().map(|&n| full[n]).collect()
    }

    /// Scatters a free vector to full nodal length with zeros elsewhere.
    pub fn prolong(&self, free: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.free_of_node.len()];
        for (k, &n) in self.node_of_free.iter().enumerate() {
            full[n] = free[k];
        }
        full
    }

    /// K x on free vectors (used to project the operator onto a basis).
    pub fn apply_free(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(x)
    }

    /// Solves the forward problem for a full nodal load vector; the returned
    /// concentration vanishes on boundary and deactivated nodes.
    pub fn solve_forward(&self, load: &[f64]) -> Result<Vec<f64>> {
        if load.len() != self.free_of_node.len() {
            return Err(Error::Fem(format!(
                "load vector length {} does not match {} nodes",
                load.len(),
                self.free_of_node.len()
            )));
        }
        if load.iter().any(|v| !v.is_finite()) {
            return Err(Error::Fem("load vector has non-finite entries".into()));
        }
        let rhs = self.restrict(load);
        let sol = self.lu.solve(&rhs);
        Ok(self.prolong(&sol))
    }
}

/// Assembles the load vector `f_i = integral s phi_i` for a nonnegative
/// source. Tower sources are integrated exactly: cells are clipped against
/// the box and 2x2 Gauss on the clipped rectangle is exact for bilinears.
pub fn load_vector(mesh: &Mesh, source: &SourceTerm) -> Result<Vec<f64>> {
    let n = mesh.n_nodes();
    let mut f = vec![0.0; n];
    match source {
        SourceTerm::Towers(params) => {
            for (k, t) in params.towers.iter().enumerate() {
                if !(t.intensity >= 0.0) {
                    return Err(Error::Fem(format!(
                        "tower {k} has negative intensity {}",
                        t.intensity
                    )));
                }
                if t.lower[0] > t.upper[0] || t.lower[1] > t.upper[1] {
                    return Err(Error::Fem(format!("tower {k} has crossed corners")));
                }
                for (node, w) in crate::quad::rect_node_weights(mesh, &t.support()) {
                    f[node] += t.intensity * w;
                }
            }
        }
        SourceTerm::Field(values) => {
            if values.len() != n {
                return Err(Error::Fem(format!(
                    "source field length {} does not match {n} nodes",
                    values.len()
                )));
            }
            if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::Fem(format!(
                    "source field must be finite and nonnegative, found {bad}"
                )));
            }
            let (ncx, ncy) = mesh.n_cells();
            for cj in 0..ncy {
                for ci in 0..ncx {
                    if !mesh.cell_active(ci, cj) {
                        continue;
                    }
                    let nodes = mesh.cell_nodes(ci, cj);
                    for (gx, wx) in gauss2(0.0, 1.0) {
                        for (gy, wy) in gauss2(0.0, 1.0) {
                            let nv = shape(gx, gy);
                            let scale = wx * wy * mesh.hx * mesh.hy;
                            let s: f64 = (0..4).map(|a| nv[a] * values[nodes[a]]).sum();
                            for a in 0..4 {
                                f[nodes[a]] += scale * s * nv[a];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(f)
}

/// One training solve and the box source that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    pub source: Rect,
    pub values: Vec<f64>,
}

/// Solves one unit-intensity tower per tile of a `cover_nx` x `cover_ny`
/// tiling of the workspace box. Tiles swallowed by an obstacle are skipped;
/// straddling tiles are clipped implicitly by the kept-cell quadrature.
pub fn generate_snapshots(
    mesh: &Mesh,
    stiffness: &Stiffness,
    cover_nx: usize,
    cover_ny: usize,
) -> Result<Vec<Snapshot>> {
    if cover_nx == 0 || cover_ny == 0 {
        return Err(Error::Fem("snapshot cover must be at least 1 x 1".into()));
    }
    let lo = mesh.domain.lower;
    let wx = (mesh.domain.upper[0] - lo[0]) / cover_nx as f64;
    let wy = (mesh.domain.upper[1] - lo[1]) / cover_ny as f64;
    let mut snapshots = Vec::new();
    for b in 0..cover_ny {
        for a in 0..cover_nx {
            let rect = Rect::new(
                [lo[0] + a as f64 * wx, lo[1] + b as f64 * wy],
                [lo[0] + (a + 1) as f64 * wx, lo[1] + (b + 1) as f64 * wy],
            );
            if mesh.domain.obstacles.iter().any(|o| o.contains_rect(&rect)) {
                continue;
            }
            let params = SourceParams::single(1.0, rect.lower, rect.upper);
            let f = load_vector(mesh, &SourceTerm::Towers(&params))?;
            if f.iter().map(|v| v * v).sum::<f64>() == 0.0 {
                continue; // tile covers only dropped cells
            }
            let values = stiffness.solve_forward(&f)?;
            snapshots.push(Snapshot { source: rect, values });
        }
    }
    if snapshots.is_empty() {
        return Err(Error::Fem("snapshot generation produced no usable tiles".into()));
    }
    Ok(snapshots)
}

/// Writes snapshots as a CSV value matrix (row r = snapshot r) and a JSON
/// sidecar with the source boxes.
pub fn save_snapshots(snapshots: &[Snapshot], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(dir.join("snapshots.csv"))?);
    for s in snapshots {
        let row: Vec<String> = s.values.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    let meta: Vec<&Rect> = snapshots.iter().map(|s| &s.source).collect();
    std::fs::write(
        dir.join("snapshots_meta.json"),
        serde_json::to_string_pretty(&meta)?,
    )?;
    Ok(())
}

pub fn load_snapshots(dir: &Path) -> Result<Vec<Snapshot>> {
    let meta: Vec<Rect> =
        serde_json::from_str(&std::fs::read_to_string(dir.join("snapshots_meta.json"))?)?;
    let text = std::fs::read_to_string(dir.join("snapshots.csv"))?;
    let mut values = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|v| v.trim().parse::<f64>()).collect();
        values.push(row.map_err(|e| Error::Fem(format!("bad snapshot value: {e}")))?);
    }
    if values.len() != meta.len() {
        return Err(Error::Fem(format!(
            "snapshot matrix has {} rows but metadata lists {}",
            values.len(),
            meta.len()
        )));
    }
    Ok(meta
        .into_iter()
        .zip(values)
        .map(|(source, values)| Snapshot { source, values })
        .collect())
}

/// L2 inner product of two nodal fields over kept cells (2x2 Gauss, exact for
/// bilinear interpolants).
pub fn integrate_product(mesh: &Mesh, a: &[f64], b: &[f64]) -> f64 {
    let (ncx, ncy) = mesh.n_cells();
    let mut total = 0.0;
    for cj in 0..ncy {
        for ci in 0..ncx {
            if !mesh.cell_active(ci, cj) {
                continue;
            }
            let nodes = mesh.cell_nodes(ci, cj);
            for (gx, wx) in gauss2(0.0, 1.0) {
                for (gy, wy) in gauss2(0.0, 1.0) {
                    let nv = shape(gx, gy);
                    let av: f64 = (0..4).map(|k| nv[k] * a[nodes[k]]).sum();
                    let bv: f64 = (0..4).map(|k| nv[k] * b[nodes[k]]).sum();
                    total += wx * wy * mesh.hx * mesh.hy * av * bv;
                }
            }
        }
    }
    total
}

/// L2 norm of a nodal field over kept cells.
pub fn l2_norm(mesh: &Mesh, a: &[f64]) -> f64 {
    integrate_product(mesh, a, a).sqrt()
}

/// L2 distance between a nodal field and an analytic function, with 3x3 Gauss
/// per cell so the measurement does not share the assembly quadrature.
pub fn l2_error_vs(mesh: &Mesh, c: &[f64], exact: impl Fn([f64; 2]) -> f64) -> f64 {
    const P: [f64; 3] = [0.112_701_665_379_258_3, 0.5, 0.887_298_334_620_741_7];
    const W: [f64; 3] = [
        0.277_777_777_777_777_8,
        0.444_444_444_444_444_4,
        0.277_777_777_777_777_8,
    ];
    let (ncx, ncy) = mesh.n_cells();
    let mut total = 0.0;
    for cj in 0..ncy {
        for ci in 0..ncx {
            if !mesh.cell_active(ci, cj) {
                continue;
            }
            let nodes = mesh.cell_nodes(ci, cj);
            let o = mesh.cell_origin(ci, cj);
            for (gi, &gx) in P.iter().enumerate() {
                for (gj, &gy) in P.iter().enumerate() {
                    let nv = shape(gx, gy);
                    let ch: f64 = (0..4).map(|k| nv[k] * c[nodes[k]]).sum();
                    let x = [o[0] + gx * mesh.hx, o[1] + gy * mesh.hy];
                    let diff = ch - exact(x);
                    total += W[gi] * W[gj] * mesh.hx * mesh.hy * diff * diff;
                }
            }
        }
    }
    total.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{analytic_flow, FlowSpec};
    use crate::geometry::{build_mesh, Domain};

    fn uniform_setup(nx: usize, kappa: f64, u: [f64; 2]) -> (Mesh, Stiffness) {
        let mesh = build_mesh(&Domain::unit_square(), nx, nx).unwrap();
        let flow = analytic_flow(&mesh, &FlowSpec::Uniform { velocity: u }, kappa).unwrap();
        let stiff = assemble(&mesh, &flow).unwrap();
        (mesh, stiff)
    }

    /// Manufactured solution c = sin(pi x1) sin(pi x2) with its matching
    /// source split into nonnegative parts.
    fn mms_solve(nx: usize, kappa: f64, u: [f64; 2]) -> f64 {
        let (mesh, stiff) = uniform_setup(nx, kappa, u);
        let pi = std::f64::consts::PI;
        let exact = |p: [f64; 2]| (pi * p[0]).sin() * (pi * p[1]).sin();
        let rhs = |p: [f64; 2]| {
            2.0 * kappa * pi * pi * exact(p)
                + u[0] * pi * (pi * p[0]).cos() * (pi * p[1]).sin()
                + u[1] * pi * (pi * p[0]).sin() * (pi * p[1]).cos()
        };
        let n = mesh.n_nodes();
        let mut pos = vec![0.0; n];
        let mut neg = vec![0.0; n];
        for i in 0..n {
            let s = rhs(mesh.node_pos(i));
            if s >= 0.0 {
                pos[i] = s;
            } else {
                neg[i] = -s;
            }
        }
        let fp = load_vector(&mesh, &SourceTerm::Field(&pos)).unwrap();
        let fm = load_vector(&mesh, &SourceTerm::Field(&neg)).unwrap();
        let f: Vec<f64> = fp.iter().zip(&fm).map(|(a, b)| a - b).collect();
        let c = stiff.solve_forward(&f).unwrap();
        l2_error_vs(&mesh, &c, exact)
    }

    #[test]
    fn manufactured_solution_converges_at_second_order() {
        let e1 = mms_solve(17, 0.3, [1.0, 0.5]);
        let e2 = mms_solve(33, 0.3, [1.0, 0.5]);
        let rate = (e1 / e2).log2();
        assert!((1.8..=2.2).contains(&rate), "rate {rate}, errors {e1} {e2}");
    }

    #[test]
    fn solution_vanishes_on_boundary() {
        let (mesh, stiff) = uniform_setup(17, 0.2, [1.0, 0.0]);
        let p = SourceParams::single(1.0, [0.3, 0.3], [0.6, 0.6]);
        let f = load_vector(&mesh, &SourceTerm::Towers(&p)).unwrap();
        let c = stiff.solve_forward(&f).unwrap();
        for idx in 0..mesh.n_nodes() {
            if mesh.boundary[idx] {
                assert_eq!(c[idx], 0.0);
            }
        }
    }

    #[test]
    fn no_interior_undershoot_at_moderate_peclet() {
        // Pe = u l / kappa = 10; cell Peclet stays below 1 on this grid.
        let (mesh, stiff) = uniform_setup(41, 0.1, [1.0, 0.0]);
        let p = SourceParams::single(1.0, [0.2, 0.4], [0.4, 0.6]);
        let f = load_vector(&mesh, &SourceTerm::Towers(&p)).unwrap();
        let c = stiff.solve_forward(&f).unwrap();
        let max = c.iter().cloned().fold(0.0f64, f64::max);
        let min = c.iter().cloned().fold(0.0f64, f64::min);
        assert!(max > 0.0);
        assert!(min >= -1e-8 * max, "min={min} max={max}");
    }

    #[test]
    fn load_is_nonnegative_and_sums_to_mass() {
        let (mesh, _) = uniform_setup(11, 0.2, [0.0, 0.0]);
        let ones = vec![1.0; mesh.n_nodes()];
        let f = load_vector(&mesh, &SourceTerm::Field(&ones)).unwrap();
        assert!(f.iter().all(|&v| v >= 0.0));
        // Partition of unity: total load equals the domain area.
        let total: f64 = f.iter().sum();
        assert!((total - 1.0).abs() < 1e-12, "total={total}");
    }

    #[test]
    fn degenerate_tower_gives_zero_load() {
        let (mesh, _) = uniform_setup(11, 0.2, [0.0, 0.0]);
        let p = SourceParams::single(1.0, [0.5, 0.5], [0.5, 0.9]);
        let f = load_vector(&mesh, &SourceTerm::Towers(&p)).unwrap();
        assert!(f.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn negative_sources_rejected() {
        let (mesh, _) = uniform_setup(11, 0.2, [0.0, 0.0]);
        let p = SourceParams::single(-1.0, [0.2, 0.2], [0.4, 0.4]);
        assert!(load_vector(&mesh, &SourceTerm::Towers(&p)).is_err());
        let mut field = vec![0.0; mesh.n_nodes()];
        field[40] = -0.5;
        assert!(load_vector(&mesh, &SourceTerm::Field(&field)).is_err());
    }

    #[test]
    fn tower_loads_tile_additively() {
        // A 2x2 unit-intensity tiling sums to the load of s == 1.
        let (mesh, stiff) = uniform_setup(13, 0.25, [0.5, 0.0]);
        let snaps = generate_snapshots(&mesh, &stiff, 2, 2).unwrap();
        assert_eq!(snaps.len(), 4);
        let mut summed = vec![0.0; mesh.n_nodes()];
        for s in &snaps {
            for (i, v) in s.values.iter().enumerate() {
                summed[i] += v;
            }
        }
        let ones = vec![1.0; mesh.n_nodes()];
        let f = load_vector(&mesh, &SourceTerm::Field(&ones)).unwrap();
        let c1 = stiff.solve_forward(&f).unwrap();
        for i in 0..mesh.n_nodes() {
            assert!((summed[i] - c1[i]).abs() < 1e-10, "node {i}");
        }
    }

    #[test]
    fn single_tile_cover_solves_uniform_source() {
        let (mesh, stiff) = uniform_setup(11, 0.2, [0.0, 0.0]);
        let snaps = generate_snapshots(&mesh, &stiff, 1, 1).unwrap();
        assert_eq!(snaps.len(), 1);
        let ones = vec![1.0; mesh.n_nodes()];
        let f = load_vector(&mesh, &SourceTerm::Field(&ones)).unwrap();
        let c1 = stiff.solve_forward(&f).unwrap();
        for i in 0..mesh.n_nodes() {
            assert!((snaps[0].values[i] - c1[i]).abs() < 1e-11);
        }
    }

    #[test]
    fn snapshots_skip_tiles_inside_obstacles() {
        let domain = Domain::new(
            [0.0, 0.0],
            [1.0, 1.0],
            vec![crate::geometry::Rect::new([0.5, 0.5], [1.0, 1.0])],
            1.0,
        )
        .unwrap();
        let mesh = build_mesh(&domain, 17, 17).unwrap();
        let flow =
            analytic_flow(&mesh, &FlowSpec::Uniform { velocity: [0.3, 0.0] }, 0.2).unwrap();
        let stiff = assemble(&mesh, &flow).unwrap();
        let snaps = generate_snapshots(&mesh, &stiff, 2, 2).unwrap();
        // The upper-right tile coincides with the obstacle and is skipped.
        assert_eq!(snaps.len(), 3);
    }

    #[test]
    fn snapshot_round_trip() {
        let (mesh, stiff) = uniform_setup(9, 0.2, [0.4, 0.1]);
        let snaps = generate_snapshots(&mesh, &stiff, 2, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_snapshots(&snaps, dir.path()).unwrap();
        let loaded = load_snapshots(dir.path()).unwrap();
        assert_eq!(loaded.len(), snaps.len());
        for (a, b) in loaded.iter().zip(&snaps) {
            assert_eq!(a.source, b.source);
            assert_eq!(a.values, b.values);
        }
    }
}

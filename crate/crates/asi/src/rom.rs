//! Reduced-order model via proper orthogonal decomposition.
//!
//! Snapshot solves are correlated through their L2 covariance; the dominant
//! eigenvectors combine snapshots into an orthonormal basis that captures a
//! prescribed energy fraction. Projecting the full operator onto the basis
//! gives a dense system small enough to solve thousands of times during
//! identification and planning.

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fem::{l2_norm, Snapshot, Stiffness};
use crate::geometry::{build_mesh, Domain, Mesh};
use crate::quad::{self, NodeWeights};
use crate::source::{SourceParams, TOWER_DOF};

/// Eigenvalues below this fraction of the largest are treated as numerical
/// rank deficiency and never retained.
const RANK_CUTOFF: f64 = 1e-12;

/// Snapshot covariance `C_rs = (1/R) <c_r, c_s>_L2` over kept cells.
pub fn covariance(mesh: &Mesh, snapshots: &[Snapshot]) -> Result<DMatrix<f64>> {
    let r = snapshots.len();
    if r == 0 {
        return Err(Error::Rom("covariance needs at least one snapshot".into()));
    }
    let n = mesh.n_nodes();
    if snapshots.iter().any(|s| s.values.len() != n) {
        return Err(Error::Rom("snapshot length does not match the mesh".into()));
    }
    // Cache M c_s once per snapshot; C is then a matrix of dot products.
    let mass_applied: Vec<Vec<f64>> = snapshots
        .iter()
        .map(|s| mass_apply(mesh, &s.values))
        .collect();
    let mut c = DMatrix::zeros(r, r);
    for i in 0..r {
        for j in i..r {
            let dot: f64 = snapshots[i]
                .values
                .iter()
                .zip(&mass_applied[j])
                .map(|(a, b)| a * b)
                .sum();
            let v = dot / r as f64;
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    Ok(c)
}

/// Consistent-mass product `y = M x` over kept cells.
fn mass_apply(mesh: &Mesh, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; mesh.n_nodes()];
    let (ncx, ncy) = mesh.n_cells();
    for cj in 0..ncy {
        for ci in 0..ncx {
            if !mesh.cell_active(ci, cj) {
                continue;
            }
            let nodes = mesh.cell_nodes(ci, cj);
            for (gx, wx) in quad::gauss2(0.0, 1.0) {
                for (gy, wy) in quad::gauss2(0.0, 1.0) {
                    let nv = quad::shape(gx, gy);
                    let scale = wx * wy * mesh.hx * mesh.hy;
                    let xv: f64 = (0..4).map(|a| nv[a] * x[nodes[a]]).sum();
                    for a in 0..4 {
                        y[nodes[a]] += scale * xv * nv[a];
                    }
                }
            }
        }
    }
    y
}

/// Basis columns plus finite-difference derivative tables used for point
/// evaluation of the basis and its first and second derivatives.
#[derive(Debug, Clone)]
pub struct BasisTables {
    pub psi: DMatrix<f64>,
    dx: DMatrix<f64>,
    dy: DMatrix<f64>,
    dxx: DMatrix<f64>,
    dyy: DMatrix<f64>,
    dxy: DMatrix<f64>,
}

impl BasisTables {
    /// Builds derivative tables by central differences of nodal values,
    /// falling back to one-sided stencils at walls and next to holes.
    pub fn new(mesh: &Mesh, psi: DMatrix<f64>) -> Self {
        let n = psi.nrows();
        let k = psi.ncols();
        let mut dx = DMatrix::zeros(n, k);
        let mut dy = DMatrix::zeros(n, k);
        let mut dxx = DMatrix::zeros(n, k);
        let mut dyy = DMatrix::zeros(n, k);
        let mut dxy = DMatrix::zeros(n, k);
        let mut col = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        for c in 0..k {
            for i in 0..n {
                col[i] = psi[(i, c)];
            }
            let gx = diff_axis(mesh, &col, 0, 1);
            let gy = diff_axis(mesh, &col, 1, 1);
            let gxx = diff_axis(mesh, &col, 0, 2);
            let gyy = diff_axis(mesh, &col, 1, 2);
            tmp.copy_from_slice(&gy);
            let gxy = diff_axis(mesh, &tmp, 0, 1);
            for i in 0..n {
                dx[(i, c)] = gx[i];
                dy[(i, c)] = gy[i];
                dxx[(i, c)] = gxx[i];
                dyy[(i, c)] = gyy[i];
                dxy[(i, c)] = gxy[i];
            }
        }
        Self { psi, dx, dy, dxx, dyy, dxy }
    }

    fn table(&self, which: Table) -> &DMatrix<f64> {
        match which {
            Table::Value => &self.psi,
            Table::Dx => &self.dx,
            Table::Dy => &self.dy,
            Table::Dxx => &self.dxx,
            Table::Dyy => &self.dyy,
            Table::Dxy => &self.dxy,
        }
    }

    fn interp_row(&self, mesh: &Mesh, x: [f64; 2], which: Table) -> RowDVector<f64> {
        let weights = quad::point_node_weights(mesh, x);
        let t = self.table(which);
        let mut row = RowDVector::zeros(t.ncols());
        for &(node, w) in &weights {
            for c in 0..t.ncols() {
                row[c] += w * t[(node, c)];
            }
        }
        row
    }
}

#[derive(Clone, Copy)]
enum Table {
    Value,
    Dx,
    Dy,
    Dxx,
    Dyy,
    Dxy,
}

/// One-dimensional finite differences along `axis` (order 1 or 2) with
/// second-order one-sided stencils at boundaries and holes.
fn diff_axis(mesh: &Mesh, f: &[f64], axis: usize, order: usize) -> Vec<f64> {
    let (nx, ny) = (mesh.nx, mesh.ny);
    let h = if axis == 0 { mesh.hx } else { mesh.hy };
    let mut out = vec![0.0; f.len()];
    let shift = |i: usize, j: usize, d: i64| -> Option<usize> {
        let (ii, jj) = if axis == 0 {
            (i as i64 + d, j as i64)
        } else {
            (i as i64, j as i64 + d)
        };
        if ii >= 0 && jj >= 0 && (ii as usize) < nx && (jj as usize) < ny {
            let idx = jj as usize * nx + ii as usize;
            mesh.active[idx].then_some(idx)
        } else {
            None
        }
    };
    for j in 0..ny {
        for i in 0..nx {
            let idx = j * nx + i;
            if !mesh.active[idx] {
                continue;
            }
            let m1 = shift(i, j, -1);
            let p1 = shift(i, j, 1);
            out[idx] = match order {
                1 => match (m1, p1) {
                    (Some(a), Some(b)) => (f[b] - f[a]) / (2.0 * h),
                    (None, Some(b)) => match shift(i, j, 2) {
                        Some(b2) => (-3.0 * f[idx] + 4.0 * f[b] - f[b2]) / (2.0 * h),
                        None => (f[b] - f[idx]) / h,
                    },
                    (Some(a), None) => match shift(i, j, -2) {
                        Some(a2) => (3.0 * f[idx] - 4.0 * f[a] + f[a2]) / (2.0 * h),
                        None => (f[idx] - f[a]) / h,
                    },
                    (None, None) => 0.0,
                },
                2 => match (m1, p1) {
                    (Some(a), Some(b)) => (f[a] - 2.0 * f[idx] + f[b]) / (h * h),
                    (None, Some(b)) => match shift(i, j, 2) {
                        Some(b2) => (f[idx] - 2.0 * f[b] + f[b2]) / (h * h),
                        None => 0.0,
                    },
                    (Some(a), None) => match shift(i, j, -2) {
                        Some(a2) => (f[idx] - 2.0 * f[a] + f[a2]) / (h * h),
                        None => 0.0,
                    },
                    (None, None) => 0.0,
                },
                _ => unreachable!(),
            };
        }
    }
    out
}

/// POD basis: nodal columns, all covariance eigenvalues (descending), and the
/// retained count N (smallest N whose energy fraction reaches `eta`).
pub fn pod_basis(
    mesh: &Mesh,
    snapshots: &[Snapshot],
    eta: f64,
) -> Result<(DMatrix<f64>, Vec<f64>, usize)> {
    if !(0.0 < eta && eta <= 1.0) {
        return Err(Error::Rom(format!(
            "energy fraction must lie in (0, 1], got {eta}"
        )));
    }
    let r = snapshots.len();
    let cov = covariance(mesh, snapshots)?;
    let eig = nalgebra::SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let lambda1 = eigenvalues[0];
    if !(lambda1 > 0.0) {
        return Err(Error::Rom(
            "snapshot set carries no energy (all solves are zero)".into(),
        ));
    }
    if eigenvalues[r - 1] < -1e-10 * lambda1 {
        return Err(Error::Rom(format!(
            "covariance is indefinite: smallest eigenvalue {}",
            eigenvalues[r - 1]
        )));
    }
    let rank = eigenvalues
        .iter()
        .take_while(|&&l| l > RANK_CUTOFF * lambda1)
        .count();
    let total: f64 = eigenvalues.iter().map(|l| l.max(0.0)).sum();
    let mut n_basis = rank;
    let mut cum = 0.0;
    for (k, l) in eigenvalues.iter().take(rank).enumerate() {
        cum += l.max(0.0);
        if cum >= eta * total {
            n_basis = k + 1;
            break;
        }
    }

    let n = mesh.n_nodes();
    let mut psi = DMatrix::zeros(n, n_basis);
    for k in 0..n_basis {
        let q = eig.eigenvectors.column(order[k]);
        let mut col = vec![0.0; n];
        for (s, snap) in snapshots.iter().enumerate() {
            let w = q[s];
            if w != 0.0 {
                for (i, v) in snap.values.iter().enumerate() {
                    col[i] += w * v;
                }
            }
        }
        let norm = l2_norm(mesh, &col);
        if !(norm > 0.0) {
            return Err(Error::Rom(format!("basis column {k} collapsed to zero")));
        }
        for i in 0..n {
            psi[(i, k)] = col[i] / norm;
        }
    }
    Ok((psi, eigenvalues, n_basis))
}

/// Projects the full operator onto the basis: `A_ik = a(psi_k, psi_i)`.
pub fn reduce_operator(stiffness: &Stiffness, psi: &DMatrix<f64>) -> DMatrix<f64> {
    let nb = psi.ncols();
    let nf = stiffness.n_free();
    let mut psi_free = DMatrix::zeros(nf, nb);
    for k in 0..nb {
        for row in 0..nf {
            psi_free[(row, k)] = psi[(stiffness.node_of_free(row), k)];
        }
    }
    let mut k_psi = DMatrix::zeros(nf, nb);
    let mut col = vec![0.0; nf];
    for k in 0..nb {
        for row in 0..nf {
            col[row] = psi_free[(row, k)];
        }
        let out = stiffness.apply_free(&col);
        for row in 0..nf {
            k_psi[(row, k)] = out[row];
        }
    }
    psi_free.transpose() * k_psi
}

/// POD-reduced forward model: basis, reduced operator, and eigen spectrum.
pub struct ReducedModel {
    pub mesh: Mesh,
    tables: BasisTables,
    a: DMatrix<f64>,
    lu_a: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    lu_at: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    pub eigenvalues: Vec<f64>,
    pub eta: f64,
}

impl ReducedModel {
    /// Builds basis and reduced operator from snapshots at energy level `eta`.
    pub fn build(
        mesh: &Mesh,
        stiffness: &Stiffness,
        snapshots: &[Snapshot],
        eta: f64,
    ) -> Result<Self> {
        let (psi, eigenvalues, _) = pod_basis(mesh, snapshots, eta)?;
        let a = reduce_operator(stiffness, &psi);
        Self::from_parts(mesh.clone(), psi, a, eigenvalues, eta)
    }

    fn from_parts(
        mesh: Mesh,
        psi: DMatrix<f64>,
        a: DMatrix<f64>,
        eigenvalues: Vec<f64>,
        eta: f64,
    ) -> Result<Self> {
        let lu_a = a.clone().lu();
        let lu_at = a.transpose().lu();
        if !lu_a.is_invertible() {
            return Err(Error::Rom(
                "reduced operator is singular; raise the energy fraction or add snapshots".into(),
            ));
        }
        let tables = BasisTables::new(&mesh, psi);
        Ok(Self { mesh, tables, a, lu_a, lu_at, eigenvalues, eta })
    }

    pub fn n_basis(&self) -> usize {
        self.tables.psi.ncols()
    }

    pub fn operator(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.tables.psi
    }

    /// Snapshot covariance spectrum, descending, one entry per snapshot.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Lifts reduced coefficients to a full nodal field.
    pub fn nodal_field(&self, coeffs: &DVector<f64>) -> Vec<f64> {
        let v = &self.tables.psi * coeffs;
        v.iter().cloned().collect()
    }

    /// Contracts sparse node weights against every basis column.
    pub fn contract(&self, weights: &NodeWeights) -> DVector<f64> {
        let nb = self.n_basis();
        let mut out = DVector::zeros(nb);
        for &(node, w) in weights {
            for k in 0..nb {
                out[k] += w * self.tables.psi[(node, k)];
            }
        }
        out
    }

    /// Reduced load `b_i(p) = integral s_p psi_i`, exact per kept cell.
    pub fn reduced_rhs(&self, p: &SourceParams) -> Result<DVector<f64>> {
        let mut b = DVector::zeros(self.n_basis());
        for t in &p.towers {
            if t.lower[0] > t.upper[0] || t.lower[1] > t.upper[1] {
                return Err(Error::Rom("tower has crossed corners".into()));
            }
            let w = quad::rect_node_weights(&self.mesh, &t.support());
            b += self.contract(&w) * t.intensity;
        }
        Ok(b)
    }

    /// Jacobian of the reduced residual with respect to the packed source
    /// parameters; column order matches [`SourceParams::to_vec`]. Box-integral
    /// columns appear with a negative sign because the residual is `A c - b`.
    pub fn source_jacobian(&self, p: &SourceParams) -> Result<DMatrix<f64>> {
        let nb = self.n_basis();
        let mut m = DMatrix::zeros(nb, p.n_params());
        for (t_idx, t) in p.towers.iter().enumerate() {
            if t.lower[0] > t.upper[0] || t.lower[1] > t.upper[1] {
                return Err(Error::Rom("tower has crossed corners".into()));
            }
            let offset = t_idx * TOWER_DOF;
            let beta = t.intensity;
            let rect = self.contract(&quad::rect_node_weights(&self.mesh, &t.support()));
            let lo1 = self.contract(&quad::vline_node_weights(
                &self.mesh, t.lower[0], t.lower[1], t.upper[1], false,
            ));
            let lo2 = self.contract(&quad::hline_node_weights(
                &self.mesh, t.lower[1], t.lower[0], t.upper[0], false,
            ));
            let hi1 = self.contract(&quad::vline_node_weights(
                &self.mesh, t.upper[0], t.lower[1], t.upper[1], false,
            ));
            let hi2 = self.contract(&quad::hline_node_weights(
                &self.mesh, t.upper[1], t.lower[0], t.upper[0], false,
            ));
            for i in 0..nb {
                m[(i, offset)] = -rect[i];
                m[(i, offset + 1)] = beta * lo1[i];
                m[(i, offset + 2)] = beta * lo2[i];
                m[(i, offset + 3)] = -beta * hi1[i];
                m[(i, offset + 4)] = -beta * hi2[i];
            }
        }
        Ok(m)
    }

    /// Solves `A c = b`.
    pub fn reduced_solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        self.lu_a
            .solve(b)
            .ok_or_else(|| Error::Rom("reduced solve failed: singular operator".into()))
    }

    /// Solves `A^T w = rhs`.
    pub fn adjoint_solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        self.lu_at
            .solve(rhs)
            .ok_or_else(|| Error::Rom("adjoint solve failed: singular operator".into()))
    }

    fn check_point(&self, x: [f64; 2]) -> Result<()> {
        if !self.mesh.domain.contains(x) {
            return Err(Error::Rom(format!(
                "evaluation point ({}, {}) lies outside the workspace",
                x[0], x[1]
            )));
        }
        Ok(())
    }

    /// Row vector `psi(x)` by bilinear interpolation.
    pub fn eval_basis(&self, x: [f64; 2]) -> Result<RowDVector<f64>> {
        self.check_point(x)?;
        Ok(self.tables.interp_row(&self.mesh, x, Table::Value))
    }

    /// Rows `(d psi / d x1, d psi / d x2)` from the derivative tables.
    pub fn eval_basis_grad(&self, x: [f64; 2]) -> Result<[RowDVector<f64>; 2]> {
        self.check_point(x)?;
        Ok([
            self.tables.interp_row(&self.mesh, x, Table::Dx),
            self.tables.interp_row(&self.mesh, x, Table::Dy),
        ])
    }

    /// Rows `(d2/dx1^2, d2/dx2^2, d2/dx1 dx2)` from the derivative tables.
    pub fn eval_basis_hess(&self, x: [f64; 2]) -> Result<[RowDVector<f64>; 3]> {
        self.check_point(x)?;
        Ok([
            self.tables.interp_row(&self.mesh, x, Table::Dxx),
            self.tables.interp_row(&self.mesh, x, Table::Dyy),
            self.tables.interp_row(&self.mesh, x, Table::Dxy),
        ])
    }

    /// Persists the model as `psi.csv` plus `model.json` next to it.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut out = std::io::BufWriter::new(std::fs::File::create(dir.join("psi.csv"))?);
        for i in 0..self.tables.psi.nrows() {
            let row: Vec<String> = (0..self.n_basis())
                .map(|k| format!("{}", self.tables.psi[(i, k)]))
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        let meta = ModelMeta {
            domain: self.mesh.domain.clone(),
            nx: self.mesh.nx,
            ny: self.mesh.ny,
            eta: self.eta,
            eigenvalues: self.eigenvalues.clone(),
            operator: (0..self.a.nrows())
                .map(|i| (0..self.a.ncols()).map(|j| self.a[(i, j)]).collect())
                .collect(),
        };
        std::fs::write(dir.join("model.json"), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta: ModelMeta =
            serde_json::from_str(&std::fs::read_to_string(dir.join("model.json"))?)?;
        let mesh = build_mesh(&meta.domain, meta.nx, meta.ny)?;
        let text = std::fs::read_to_string(dir.join("psi.csv"))?;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for line in text.lines() {
            if line.trim().is_empty() {
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|v| v.trim().parse::<f64>()).collect();
            rows.push(row.map_err(|e| Error::Rom(format!("bad basis value: {e}")))?);
        }
        let n = mesh.n_nodes();
        if rows.len() != n {
            return Err(Error::Rom(format!(
                "basis has {} rows but the mesh has {n} nodes",
                rows.len()
            )));
        }
        let nb = rows[0].len();
        let psi = DMatrix::from_fn(n, nb, |i, k| rows[i][k]);
        let a = DMatrix::from_fn(nb, nb, |i, j| meta.operator[i][j]);
        Self::from_parts(mesh, psi, a, meta.eigenvalues, meta.eta)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelMeta {
    domain: Domain,
    nx: usize,
    ny: usize,
    eta: f64,
    eigenvalues: Vec<f64>,
    operator: Vec<Vec<f64>>,
}

//! Source identification from point measurements.
//!
//! The misfit between measured and modeled concentrations, plus a strength
//! penalty, is minimized over tower parameters. Gradients come from one
//! adjoint solve; Hessian products reuse the linearization, so Newton steps
//! cost a handful of reduced solves. Everything is evaluated with the same
//! quadrature as the reduced load, which makes the adjoint gradient the exact
//! derivative of the discrete objective.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::Rect;
use crate::quad;
use crate::rom::ReducedModel;
use crate::source::{FeasibleRegion, SourceParams, Tower, TOWER_DOF};

/// One concentration reading at a point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Measurement {
    pub position: [f64; 2],
    pub value: f64,
}

/// Least-squares identification problem over the reduced model.
///
/// Readings snap to their nearest active node; repeats at one node are
/// averaged. The misfit is the node-lumped quadrature
/// `J_data = (w/2) sum_E (c(E) - y_E)^2` with `w = hx hy`, divided by its
/// zero-prediction value so the objective is the unexplained fraction of the
/// data energy. The scaling keeps the data-term minimizer and makes the
/// gradient tolerance independent of concentration units; `tau` then weighs
/// the regularizer against a unit-scale misfit.
pub struct SiProblem<'a> {
    rom: &'a ReducedModel,
    tau: f64,
    nodes: Vec<usize>,
    readings: Vec<f64>,
    weight: f64,
    lcc: DMatrix<f64>,
    data_rhs: DVector<f64>,
    data_const: f64,
}

/// Objective, gradient, and the operators needed for Hessian products at a
/// fixed parameter point.
pub struct Linearization {
    pub objective: f64,
    pub gradient: DVector<f64>,
    pub state: DVector<f64>,
    pub adjoint: DVector<f64>,
    m_p: DMatrix<f64>,
    l_pp: DMatrix<f64>,
}

impl<'a> SiProblem<'a> {
    pub fn new(rom: &'a ReducedModel, tau: f64, measurements: &[Measurement]) -> Result<Self> {
        if measurements.is_empty() {
            return Err(Error::Source("no measurements given".into()));
        }
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(Error::Source(format!("penalty weight must be >= 0, got {tau}")));
        }
        let mesh = &rom.mesh;
        let mut by_node: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        for m in measurements {
            if !m.value.is_finite() {
                return Err(Error::Source(format!(
                    "non-finite reading at ({}, {})",
                    m.position[0], m.position[1]
                )));
            }
            if !mesh.domain.contains(m.position) {
                return Err(Error::Source(format!(
                    "measurement at ({}, {}) lies outside the workspace",
                    m.position[0], m.position[1]
                )));
            }
            let node = mesh.nearest_node(m.position);
            let e = by_node.entry(node).or_insert((0.0, 0));
            e.0 += m.value;
            e.1 += 1;
        }
        let nodes: Vec<usize> = by_node.keys().copied().collect();
        let readings: Vec<f64> = by_node.values().map(|&(s, k)| s / k as f64).collect();
        let weight = mesh.hx * mesh.hy;
        let nb = rom.n_basis();
        let psi = rom.basis();
        let mut lcc = DMatrix::zeros(nb, nb);
        let mut data_rhs = DVector::zeros(nb);
        let mut data_const = 0.0;
        for (&node, &y) in nodes.iter().zip(&readings) {
            for i in 0..nb {
                let pi = psi[(node, i)];
                data_rhs[i] += weight * y * pi;
                for j in 0..nb {
                    lcc[(i, j)] += weight * pi * psi[(node, j)];
                }
            }
            data_const += 0.5 * weight * y * y;
        }
        // Positive multiple of the data term: same minimizer, unit scale.
        let scale = if data_const > 0.0 { data_const } else { 1.0 };
        lcc /= scale;
        data_rhs /= scale;
        data_const /= scale;
        Ok(Self { rom, tau, nodes, readings, weight, lcc, data_rhs, data_const })
    }

    pub fn rom(&self) -> &ReducedModel {
        self.rom
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Node ids carrying a reading, ascending.
    pub fn measured_nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// Mean reading per measured node, aligned with [`measured_nodes`].
    pub fn readings(&self) -> &[f64] {
        &self.readings
    }

    /// Quadrature weight applied to every squared residual.
    pub fn reading_weight(&self) -> f64 {
        self.weight
    }

    fn misfit(&self, c: &DVector<f64>) -> f64 {
        0.5 * (self.lcc.clone() * c).dot(c) - self.data_rhs.dot(c) + self.data_const
    }

    /// `J(p) = tau R(p) + J_data(c(p))` with one reduced solve.
    pub fn objective(&self, p: &SourceParams) -> Result<f64> {
        let c = self.rom.reduced_solve(&self.rom.reduced_rhs(p)?)?;
        Ok(self.tau * p.total_strength() + self.misfit(&c))
    }

    /// Objective and gradient via one forward and one adjoint solve.
    pub fn gradient(&self, p: &SourceParams) -> Result<(f64, DVector<f64>)> {
        let lin = self.linearize(p)?;
        Ok((lin.objective, lin.gradient))
    }

    /// Full linearization at `p`: objective, gradient, and the pieces needed
    /// for exact Hessian products.
    pub fn linearize(&self, p: &SourceParams) -> Result<Linearization> {
        let c = self.rom.reduced_solve(&self.rom.reduced_rhs(p)?)?;
        let objective = self.tau * p.total_strength() + self.misfit(&c);
        let d = &self.lcc * &c - &self.data_rhs;
        let adjoint = self.rom.adjoint_solve(&(-&d))?;
        let m_p = self.rom.source_jacobian(p)?;
        let mut gradient = m_p.transpose() * &adjoint;
        for (t_idx, t) in p.towers.iter().enumerate() {
            let o = t_idx * TOWER_DOF;
            let (w1, w2) = (t.upper[0] - t.lower[0], t.upper[1] - t.lower[1]);
            gradient[o] += self.tau * w1 * w2;
            gradient[o + 1] += -self.tau * t.intensity * w2;
            gradient[o + 2] += -self.tau * t.intensity * w1;
            gradient[o + 3] += self.tau * t.intensity * w2;
            gradient[o + 4] += self.tau * t.intensity * w1;
        }
        let l_pp = self.curvature_block(p, &adjoint)?;
        Ok(Linearization { objective, gradient, state: c, adjoint, m_p, l_pp })
    }

    /// Second-derivative block `tau Hess(R) - d2/dp2 (adjoint . b)`,
    /// block-diagonal over towers.
    fn curvature_block(&self, p: &SourceParams, adjoint: &DVector<f64>) -> Result<DMatrix<f64>> {
        let mesh = &self.rom.mesh;
        let w_field = self.rom.nodal_field(adjoint);
        let np = p.n_params();
        let mut l_pp = DMatrix::zeros(np, np);
        for (t_idx, t) in p.towers.iter().enumerate() {
            let o = t_idx * TOWER_DOF;
            let beta = t.intensity;
            let [l1, l2] = t.lower;
            let [u1, u2] = t.upper;
            let (w1, w2) = (u1 - l1, u2 - l2);
            let vint = |x: f64, dx: bool| {
                quad::contract(&quad::vline_node_weights(mesh, x, l2, u2, dx), &w_field)
            };
            let hint = |y: f64, dy: bool| {
                quad::contract(&quad::hline_node_weights(mesh, y, l1, u1, dy), &w_field)
            };
            let wat = |x: f64, y: f64| quad::interp(mesh, &w_field, [x, y]);
            // Lower triangle, parameter order (beta, l1, l2, u1, u2).
            let mut b = [[0.0f64; TOWER_DOF]; TOWER_DOF];
            b[1][0] = -self.tau * w2 - (-vint(l1, false));
            b[2][0] = -self.tau * w1 - (-hint(l2, false));
            b[3][0] = self.tau * w2 - vint(u1, false);
            b[4][0] = self.tau * w1 - hint(u2, false);
            b[1][1] = -(-beta * vint(l1, true));
            b[2][1] = self.tau * beta - beta * wat(l1, l2);
            b[2][2] = -(-beta * hint(l2, true));
            b[3][2] = -self.tau * beta - (-beta * wat(u1, l2));
            b[3][3] = -beta * vint(u1, true);
            b[4][1] = -self.tau * beta - (-beta * wat(l1, u2));
            b[4][3] = self.tau * beta - beta * wat(u1, u2);
            b[4][4] = -beta * hint(u2, true);
            for i in 0..TOWER_DOF {
                for j in 0..=i {
                    l_pp[(o + i, o + j)] = b[i][j];
                    l_pp[(o + j, o + i)] = b[i][j];
                }
            }
        }
        Ok(l_pp)
    }

    /// Exact Hessian-vector product at the linearization point: two reduced
    /// solves per product.
    pub fn hess_vec(&self, lin: &Linearization, v: &DVector<f64>) -> Result<DVector<f64>> {
        let h1 = -self.rom.reduced_solve(&(&lin.m_p * v))?;
        let h3 = &self.lcc * h1;
        let h4 = self.rom.adjoint_solve(&(-h3))?;
        Ok(lin.m_p.transpose() * h4 + &lin.l_pp * v)
    }
}

/// Initial guess produced by the adjoint screening pass.
#[derive(Debug, Clone)]
pub struct SaInit {
    pub params: SourceParams,
    pub region: FeasibleRegion,
    /// Screening-field node id at each cluster center.
    pub centers: Vec<usize>,
}

/// Options for the screening initializer.
#[derive(Debug, Clone)]
pub struct SaOptions {
    /// Keep nodes at least this fraction as deep as the deepest one.
    pub alpha: f64,
    /// Intensity assigned to the deepest cluster.
    pub beta_scale: f64,
    /// Keep at most this many clusters, deepest first.
    pub max_towers: Option<usize>,
    /// Intensity cap carried into the feasible region.
    pub beta_max: f64,
}

impl Default for SaOptions {
    fn default() -> Self {
        Self { alpha: 0.7, beta_scale: 1.0, max_towers: None, beta_max: f64::INFINITY }
    }
}

/// Screens the workspace with one adjoint solve of the raw data functional,
/// clusters the most sensitive nodes, and seeds one tower per cluster.
///
/// Fails with [`Error::NoSourceDetected`] when no node shows negative
/// sensitivity, meaning no admissible source lowers the misfit.
pub fn sa_initialize(problem: &SiProblem, cover: &[Rect], opts: &SaOptions) -> Result<SaInit> {
    if !(0.0 < opts.alpha && opts.alpha <= 1.0) {
        return Err(Error::Source(format!(
            "screening fraction must lie in (0, 1], got {}",
            opts.alpha
        )));
    }
    let rom = problem.rom;
    let mesh = &rom.mesh;
    let wbar = rom.adjoint_solve(&(-&problem.data_rhs))?;
    let field = rom.nodal_field(&wbar);
    let active: Vec<usize> = (0..mesh.n_nodes()).filter(|&i| mesh.active[i]).collect();
    let min_val = active.iter().map(|&i| field[i]).fold(f64::INFINITY, f64::min);
    if min_val >= 0.0 {
        return Err(Error::NoSourceDetected);
    }
    let max_abs = active.iter().map(|&i| field[i].abs()).fold(0.0f64, f64::max);
    let kept: Vec<usize> = active
        .iter()
        .copied()
        .filter(|&i| field[i] <= opts.alpha * min_val)
        .collect();

    // Single-linkage clusters: nodes within the cutoff of any member join.
    let cutoff = 3.0 * mesh.hx.max(mesh.hy);
    let mut parent: Vec<usize> = (0..kept.len()).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let r = find(parent, parent[i]);
            parent[i] = r;
        }
        parent[i]
    }
    for a in 0..kept.len() {
        let pa = mesh.node_pos(kept[a]);
        for b in a + 1..kept.len() {
            let pb = mesh.node_pos(kept[b]);
            let d = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt();
            if d <= cutoff {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra] = rb;
                }
            }
        }
    }
    let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for a in 0..kept.len() {
        let r = find(&mut parent, a);
        clusters.entry(r).or_default().push(kept[a]);
    }

    // Deepest node is the cluster center; ties go to the lowest node id.
    let mut centers: Vec<usize> = clusters
        .values()
        .map(|members| {
            *members
                .iter()
                .min_by(|&&a, &&b| {
                    field[a].partial_cmp(&field[b]).unwrap().then(a.cmp(&b))
                })
                .unwrap()
        })
        .collect();
    centers.sort_by(|&a, &b| field[a].partial_cmp(&field[b]).unwrap().then(a.cmp(&b)));
    if let Some(cap) = opts.max_towers {
        centers.truncate(cap.max(1));
    }

    let side = 2.0 * mesh.hx.max(mesh.hy);
    let mut towers = Vec::with_capacity(centers.len());
    let mut boxes = Vec::with_capacity(centers.len());
    for &node in &centers {
        let z = mesh.node_pos(node);
        let cover_box = cover
            .iter()
            .find(|r| r.contains(z))
            .ok_or_else(|| {
                Error::Source(format!(
                    "no feasible subdomain contains cluster center ({}, {})",
                    z[0], z[1]
                ))
            })?
            .clone();
        let mut lower = [0.0; 2];
        let mut upper = [0.0; 2];
        for d in 0..2 {
            lower[d] = (z[d] - 0.5 * side).max(cover_box.lower[d]);
            upper[d] = (z[d] + 0.5 * side).min(cover_box.upper[d]);
        }
        let intensity = (field[node].abs() / max_abs * opts.beta_scale).min(opts.beta_max);
        towers.push(Tower { intensity, lower, upper });
        boxes.push(cover_box);
    }
    Ok(SaInit {
        params: SourceParams::new(towers),
        region: FeasibleRegion { boxes, beta_max: opts.beta_max },
        centers,
    })
}

/// Options for the projected Newton solve.
#[derive(Debug, Clone)]
pub struct SiOptions {
    pub max_iters: usize,
    /// Relative projected-gradient tolerance.
    pub tol: f64,
    pub armijo_c1: f64,
    pub max_backtracks: usize,
}

impl Default for SiOptions {
    fn default() -> Self {
        Self { max_iters: 200, tol: 1e-6, armijo_c1: 1e-4, max_backtracks: 40 }
    }
}

/// Result of [`solve_si`]: best parameters seen and the objective path.
#[derive(Debug, Clone)]
pub struct SiSolution {
    pub params: SourceParams,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
}

fn project_vec(region: &FeasibleRegion, v: &DVector<f64>) -> Result<DVector<f64>> {
    let p = SourceParams::from_vec(v.as_slice())?;
    Ok(DVector::from_vec(region.project(&p)?.to_vec()))
}

/// Per-coordinate box bounds used for the active-set split. The coupling
/// `lower <= upper` is handled by projection, not by these bounds.
fn coordinate_bounds(region: &FeasibleRegion) -> (Vec<f64>, Vec<f64>) {
    let mut lo = Vec::with_capacity(region.boxes.len() * TOWER_DOF);
    let mut hi = Vec::with_capacity(region.boxes.len() * TOWER_DOF);
    for b in &region.boxes {
        lo.extend_from_slice(&[0.0, b.lower[0], b.lower[1], b.lower[0], b.lower[1]]);
        hi.extend_from_slice(&[
            region.beta_max,
            b.upper[0],
            b.upper[1],
            b.upper[0],
            b.upper[1],
        ]);
    }
    (lo, hi)
}

/// Minimizes the identification objective with projected Newton-CG.
///
/// Inner CG runs on the coordinates away from their bounds and truncates on
/// negative curvature; steps are globalized by a projected Armijo backtrack.
/// The monotone best-so-far iterate is returned even on iteration cap.
pub fn solve_si(
    problem: &SiProblem,
    region: &FeasibleRegion,
    p0: &SourceParams,
    opts: &SiOptions,
) -> Result<SiSolution> {
    let mut p = region.project(p0)?;
    let np = p.n_params();
    let (lo, hi) = coordinate_bounds(region);
    let mut lin = problem.linearize(&p)?;
    let mut trace = vec![lin.objective];
    let mut best = (p.clone(), lin.objective);
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..opts.max_iters {
        let pv = DVector::from_vec(p.to_vec());
        let g = lin.gradient.clone();
        let stepped = project_vec(region, &(&pv - &g))?;
        let crit = (&pv - &stepped).norm();
        if crit <= opts.tol * (1.0 + lin.objective.abs()) {
            converged = true;
            break;
        }
        iterations += 1;

        // Coordinates pressed against a bound with an outward gradient stay
        // fixed this iteration.
        let span: Vec<f64> = (0..np)
            .map(|i| if hi[i].is_finite() { hi[i] - lo[i] } else { 1.0 })
            .collect();
        let free: Vec<bool> = (0..np)
            .map(|i| {
                let eps = 1e-10 * (1.0 + span[i].abs());
                let at_lo = pv[i] - lo[i] <= eps;
                let at_hi = hi[i].is_finite() && hi[i] - pv[i] <= eps;
                !((at_lo && g[i] > 0.0) || (at_hi && g[i] < 0.0))
            })
            .collect();
        let mask = |v: &mut DVector<f64>| {
            for i in 0..np {
                if !free[i] {
                    v[i] = 0.0;
                }
            }
        };

        // Truncated CG for H d = -g on the free coordinates.
        let mut d = DVector::zeros(np);
        {
            let mut r = -g.clone();
            mask(&mut r);
            let g_free_norm = r.norm();
            if g_free_norm > 0.0 {
                let cg_tol = g_free_norm * 1e-10;
                let mut dir = r.clone();
                let mut rr = r.dot(&r);
                for cg_iter in 0..(4 * np) {
                    let mut hd = problem.hess_vec(&lin, &dir)?;
                    mask(&mut hd);
                    let curv = dir.dot(&hd);
                    if curv <= 1e-14 * dir.dot(&dir) {
                        if cg_iter == 0 {
                            d = dir.clone();
                        }
                        break;
                    }
                    let alpha = rr / curv;
                    d += alpha * &dir;
                    r -= alpha * hd;
                    let rr_new = r.dot(&r);
                    if rr_new.sqrt() <= cg_tol {
                        break;
                    }
                    dir = &r + (rr_new / rr) * dir;
                    rr = rr_new;
                }
                if d.norm() == 0.0 {
                    d = -g.clone();
                    mask(&mut d);
                }
            }
        }
        if d.dot(&g) >= 0.0 {
            d = -g.clone();
            mask(&mut d);
        }

        // Projected Armijo backtracking on the path p(alpha).
        let mut alpha = 1.0;
        let mut accepted: Option<(SourceParams, f64)> = None;
        for _ in 0..opts.max_backtracks {
            let trial_v = project_vec(region, &(&pv + alpha * &d))?;
            let step = &trial_v - &pv;
            if step.norm() <= 1e-16 * (1.0 + pv.norm()) {
                break;
            }
            let trial = SourceParams::from_vec(trial_v.as_slice())?;
            let j_trial = problem.objective(&trial)?;
            let decrease = opts.armijo_c1 * g.dot(&step);
            if j_trial <= lin.objective + decrease.min(0.0) {
                accepted = Some((trial, j_trial));
                break;
            }
            alpha *= 0.5;
        }
        let Some((next, j_next)) = accepted else {
            break;
        };
        p = next;
        lin = problem.linearize(&p)?;
        debug_assert!((lin.objective - j_next).abs() <= 1e-9 * (1.0 + j_next.abs()));
        trace.push(lin.objective);
        if lin.objective < best.1 {
            best = (p.clone(), lin.objective);
        }
    }

    Ok(SiSolution {
        params: best.0,
        objective: best.1,
        iterations,
        converged,
        objective_trace: trace,
    })
}

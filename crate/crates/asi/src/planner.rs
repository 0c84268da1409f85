//! Sensor placement by information maximization.
//!
//! Each candidate reading adds a rank-one term to the Fisher information of
//! the source parameters. The next waypoint maximizes the smallest eigenvalue
//! of the augmented information matrix, posed as a nonlinear semidefinite
//! program over (bound, position) and solved by sequential tangent SDPs with
//! a log-det barrier inner solver and a penalty line search.

use nalgebra::{DMatrix, DVector, Matrix3, RowDVector, Vector3};

use crate::error::{Error, Result};
use crate::geometry::Rect;
use crate::rom::ReducedModel;
use crate::source::SourceParams;

/// Solver constants. Defaults are tuned for well-scaled unit-box workspaces.
#[derive(Debug, Clone)]
pub struct PlannerParams {
    /// Strict-feasibility shift inside the eigenvalue constraint.
    pub eps_bar: f64,
    /// Curvature floor for the tangent model.
    pub delta: f64,
    /// Penalty margin over the multiplier trace.
    pub gamma_bar: f64,
    /// Backtracking mesh for the penalty line search.
    pub rho: f64,
    /// Sufficient-decrease fraction.
    pub omega: f64,
    pub tol_grad: f64,
    pub tol_feas: f64,
    pub tol_comp: f64,
    /// Coarse initializer keeps every stride-th node per axis.
    pub sample_stride: usize,
    pub max_iters: usize,
    pub max_backtracks: usize,
    pub trust_retries: usize,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            eps_bar: 1e-8,
            delta: 1e-6,
            gamma_bar: 1.0,
            rho: 0.5,
            omega: 1e-4,
            tol_grad: 1e-6,
            tol_feas: 1e-6,
            tol_comp: 1e-6,
            sample_stride: 4,
            max_iters: 100,
            max_backtracks: 30,
            trust_retries: 5,
        }
    }
}

/// Accumulated information about the source parameters at fixed geometry.
pub struct PlannerState {
    /// Reduced-state sensitivity per parameter: columns solve `A s = -dr/dp`.
    s: DMatrix<f64>,
    /// Fisher information of the readings taken so far.
    f: DMatrix<f64>,
    pub n_rows: usize,
}

/// Local data of the reading-sensitivity row `e(x)` and its derivatives.
pub struct LocalExpansion {
    pub e: RowDVector<f64>,
    pub ex: RowDVector<f64>,
    pub ey: RowDVector<f64>,
    pub exx: RowDVector<f64>,
    pub eyy: RowDVector<f64>,
    pub exy: RowDVector<f64>,
}

fn sym_min_eig(m: &DMatrix<f64>) -> f64 {
    let sym = 0.5 * (m + m.transpose());
    nalgebra::SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

fn sym_max_eig(m: &DMatrix<f64>) -> f64 {
    let sym = 0.5 * (m + m.transpose());
    nalgebra::SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b))
}

impl PlannerState {
    /// Builds the sensitivity map at `p` with no readings yet.
    pub fn new(rom: &ReducedModel, p: &SourceParams) -> Result<Self> {
        let m_p = rom.source_jacobian(p)?;
        let np = m_p.ncols();
        let mut s = DMatrix::zeros(m_p.nrows(), np);
        for k in 0..np {
            let col = DVector::from_fn(m_p.nrows(), |i, _| m_p[(i, k)]);
            s.set_column(k, &rom.reduced_solve(&col)?);
        }
        let f = DMatrix::zeros(np, np);
        Ok(Self { s, f, n_rows: 0 })
    }

    /// Builds the state and folds in readings already taken.
    pub fn with_measurements(
        rom: &ReducedModel,
        p: &SourceParams,
        positions: &[[f64; 2]],
    ) -> Result<Self> {
        let mut state = Self::new(rom, p)?;
        for &x in positions {
            state.add_measurement(rom, x)?;
        }
        Ok(state)
    }

    pub fn fim(&self) -> &DMatrix<f64> {
        &self.f
    }

    /// Sensitivity row of a reading at `x` with respect to the parameters.
    pub fn row(&self, rom: &ReducedModel, x: [f64; 2]) -> Result<RowDVector<f64>> {
        Ok(rom.eval_basis(x)? * &self.s)
    }

    /// Adds the rank-one information of a reading at `x`.
    pub fn add_measurement(&mut self, rom: &ReducedModel, x: [f64; 2]) -> Result<()> {
        let e = self.row(rom, x)?;
        self.f += e.transpose() * &e;
        self.n_rows += 1;
        Ok(())
    }

    /// Smallest eigenvalue of the information augmented by a reading at `x`.
    pub fn gain(&self, rom: &ReducedModel, x: [f64; 2]) -> Result<f64> {
        let e = self.row(rom, x)?;
        let aug = &self.f + e.transpose() * &e;
        Ok(sym_min_eig(&aug))
    }

    pub fn expansion(&self, rom: &ReducedModel, x: [f64; 2]) -> Result<LocalExpansion> {
        let e = rom.eval_basis(x)? * &self.s;
        let [gx, gy] = rom.eval_basis_grad(x)?;
        let [hxx, hyy, hxy] = rom.eval_basis_hess(x)?;
        Ok(LocalExpansion {
            e,
            ex: gx * &self.s,
            ey: gy * &self.s,
            exx: hxx * &self.s,
            eyy: hyy * &self.s,
            exy: hxy * &self.s,
        })
    }
}

/// Constraint matrix `B(z, x) = (eps + z) I - F - e(x)^T e(x)` and its first
/// and second position derivatives at a point.
pub struct BMatrices {
    pub b0: DMatrix<f64>,
    pub bx: DMatrix<f64>,
    pub by: DMatrix<f64>,
    pub bxx: DMatrix<f64>,
    pub byy: DMatrix<f64>,
    pub bxy: DMatrix<f64>,
}

/// Assembles the eigenvalue-constraint matrices at `(z, x)`.
pub fn b_matrices(
    state: &PlannerState,
    rom: &ReducedModel,
    z: f64,
    x: [f64; 2],
    eps_bar: f64,
) -> Result<BMatrices> {
    let lx = state.expansion(rom, x)?;
    let q = state.f.nrows();
    let outer = |a: &RowDVector<f64>, b: &RowDVector<f64>| a.transpose() * b;
    let b0 = DMatrix::identity(q, q) * (eps_bar + z)
        - &state.f
        - outer(&lx.e, &lx.e);
    let bx = -(outer(&lx.ex, &lx.e) + outer(&lx.e, &lx.ex));
    let by = -(outer(&lx.ey, &lx.e) + outer(&lx.e, &lx.ey));
    let bxx = -(outer(&lx.exx, &lx.e) + 2.0 * outer(&lx.ex, &lx.ex) + outer(&lx.e, &lx.exx));
    let byy = -(outer(&lx.eyy, &lx.e) + 2.0 * outer(&lx.ey, &lx.ey) + outer(&lx.e, &lx.eyy));
    let bxy = -(outer(&lx.exy, &lx.e)
        + outer(&lx.ex, &lx.ey)
        + outer(&lx.ey, &lx.ex)
        + outer(&lx.e, &lx.exy));
    Ok(BMatrices { b0, bx, by, bxx, byy, bxy })
}

/// Barrier solve of the tangent subproblem
/// `min -d_z + (1/2) d^T H d  s.t.  B0 + sum_i d_i B_i <= 0, a_j . d <= b_j`.
///
/// Returns the step, the LMI multiplier (positive definite by construction),
/// and the linear multipliers.
fn tangent_sdp(
    b0: &DMatrix<f64>,
    bx: &DMatrix<f64>,
    by: &DMatrix<f64>,
    h: &Matrix3<f64>,
    lin_a: &[[f64; 3]],
    lin_b: &[f64],
    d_start: Vector3<f64>,
) -> Result<(Vector3<f64>, DMatrix<f64>, Vec<f64>)> {
    let q = b0.nrows();
    let bz = DMatrix::identity(q, q);
    let ops = [&bz, bx, by];
    let g_of = |d: &Vector3<f64>| -> DMatrix<f64> {
        b0 + &bz * d[0] + bx * d[1] + by * d[2]
    };
    // Negated-constraint Cholesky doubles as the strict feasibility check.
    let chol_neg = |d: &Vector3<f64>| nalgebra::Cholesky::new(-g_of(d));
    let slacks = |d: &Vector3<f64>| -> Vec<f64> {
        lin_a
            .iter()
            .zip(lin_b)
            .map(|(a, b)| b - (a[0] * d[0] + a[1] * d[1] + a[2] * d[2]))
            .collect()
    };

    let mut d = d_start;
    // Shift the bound component until the matrix constraint holds strictly.
    let lam = sym_max_eig(&g_of(&d));
    if lam > -1.0 {
        d[0] -= lam + 1.0;
    }
    if slacks(&d).iter().any(|&s| s <= 0.0) {
        return Err(Error::Planner("initial step violates the linear bounds".into()));
    }
    if chol_neg(&d).is_none() {
        return Err(Error::Planner("could not find a strictly feasible start".into()));
    }

    let mu_target = 1e-9 / (q + lin_a.len()) as f64;
    let mut mu = 1.0;
    let obj_grad = Vector3::new(-1.0, 0.0, 0.0);
    let phi = |d: &Vector3<f64>, mu: f64| -> Option<f64> {
        let ch = chol_neg(d)?;
        let s = slacks(d);
        if s.iter().any(|&v| v <= 0.0) {
            return None;
        }
        let logdet: f64 = (0..q).map(|i| ch.l_dirty()[(i, i)].ln()).sum::<f64>() * 2.0;
        let quad = 0.5 * (h * d).dot(d);
        Some(-d[0] + quad - mu * logdet - mu * s.iter().map(|v| v.ln()).sum::<f64>())
    };

    loop {
        for _ in 0..60 {
            let ch = chol_neg(&d)
                .ok_or_else(|| Error::Planner("barrier iterate left the cone".into()))?;
            let ginv = ch.inverse();
            let s = slacks(&d);
            let mut grad = obj_grad + h * d;
            let mut hess = *h;
            let gb: Vec<DMatrix<f64>> = ops.iter().map(|b| &ginv * *b).collect();
            for i in 0..3 {
                grad[i] += mu * gb[i].trace();
                for j in i..3 {
                    let t = mu * (&gb[i] * &gb[j]).trace();
                    hess[(i, j)] += t;
                    if j != i {
                        hess[(j, i)] += t;
                    }
                }
            }
            for (a, &sj) in lin_a.iter().zip(&s) {
                let av = Vector3::new(a[0], a[1], a[2]);
                grad += (mu / sj) * av;
                hess += (mu / (sj * sj)) * av * av.transpose();
            }
            let step = hess
                .lu()
                .solve(&(-grad))
                .ok_or_else(|| Error::Planner("singular barrier Hessian".into()))?;
            let decrement2 = -grad.dot(&step);
            if decrement2 <= 1e-18 * (1.0 + mu) {
                break;
            }
            // Backtrack into the strictly feasible region with a decrease.
            let base = phi(&d, mu)
                .ok_or_else(|| Error::Planner("barrier value undefined at iterate".into()))?;
            let mut t = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let trial = d + t * step;
                if let Some(val) = phi(&trial, mu) {
                    if val <= base - 1e-4 * t * decrement2 {
                        d = trial;
                        moved = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if mu <= mu_target {
            break;
        }
        mu = (mu / 10.0).max(mu_target);
    }

    let ch = chol_neg(&d).ok_or_else(|| Error::Planner("final iterate left the cone".into()))?;
    let lambda = ch.inverse() * mu;
    let eta: Vec<f64> = slacks(&d).iter().map(|&sj| mu / sj).collect();
    Ok((d, lambda, eta))
}

/// Outcome of one placement solve.
#[derive(Debug, Clone)]
pub struct PlannedStep {
    pub position: [f64; 2],
    /// Smallest augmented-information eigenvalue at the returned position.
    pub gain: f64,
    pub converged: bool,
    pub iterations: usize,
    /// True when the coarse sample beat the local solve and was returned.
    pub used_fallback: bool,
}

/// Scans every stride-th free node and keeps the best augmented gain;
/// ties keep the lowest node id.
fn coarse_argmax(
    state: &PlannerState,
    rom: &ReducedModel,
    stride: usize,
    params_check: impl Fn([f64; 2]) -> bool,
) -> Result<Option<([f64; 2], f64)>> {
    let mesh = &rom.mesh;
    let mut best: Option<([f64; 2], f64)> = None;
    for j in (0..mesh.ny).step_by(stride.max(1)) {
        for i in (0..mesh.nx).step_by(stride.max(1)) {
            let idx = mesh.node_index(i, j);
            if !mesh.is_free(idx) {
                continue;
            }
            let x = mesh.node_pos(idx);
            if !params_check(x) {
                continue;
            }
            let g = state.gain(rom, x)?;
            if best.map_or(true, |(_, bg)| g > bg) {
                best = Some((x, g));
            }
        }
    }
    Ok(best)
}

/// Picks the next waypoint: coarse scan for a basin, then sequential tangent
/// SDPs inside the convex subdomain holding the best sample. Returns whichever
/// of the local solution and the coarse sample has the larger gain.
pub fn next_best(
    rom: &ReducedModel,
    state: &PlannerState,
    cover: &[Rect],
    params: &PlannerParams,
) -> Result<PlannedStep> {
    if cover.is_empty() {
        return Err(Error::Planner("empty placement cover".into()));
    }
    let inside_cover = |x: [f64; 2]| cover.iter().any(|r| r.contains(x));
    let Some((x0, g0)) = coarse_argmax(state, rom, params.sample_stride, inside_cover)? else {
        return Err(Error::Planner("no free node available for placement".into()));
    };
    let plan_box = cover
        .iter()
        .find(|r| r.contains(x0))
        .expect("sample filtered by cover membership")
        .clone();

    let q = state.f.nrows();
    let mut z = g0;
    let mut x = x0;
    let mut lambda = DMatrix::identity(q, q) / q as f64;
    let mut gamma = 0.0;
    let mut converged = false;
    let mut iterations = 0;
    let center = plan_box.center();
    let width = plan_box.width(0).max(plan_box.width(1));

    let merit = |z: f64, x: [f64; 2], gamma: f64| -> Result<f64> {
        let e = state.row(rom, x)?;
        let b = DMatrix::identity(q, q) * (params.eps_bar + z)
            - &state.f
            - e.transpose() * &e;
        Ok(-z + gamma * sym_max_eig(&b).max(0.0))
    };

    for _ in 0..params.max_iters {
        iterations += 1;
        let bm = b_matrices(state, rom, z, x, params.eps_bar)?;

        // Tangent-model curvature from the multiplier estimate.
        let mut w = Matrix3::zeros();
        w[(1, 1)] = (&bm.bxx * &lambda).trace();
        w[(2, 2)] = (&bm.byy * &lambda).trace();
        let wxy = (&bm.bxy * &lambda).trace();
        w[(1, 2)] = wxy;
        w[(2, 1)] = wxy;
        let wmin = w.symmetric_eigenvalues().min();
        let h = w + Matrix3::identity() * (params.delta - wmin).max(0.0);

        // Linear constraints keep x + d_x inside the planning box and inside
        // a trust radius that halves when the subproblem fails.
        let mut trust = width;
        let mut sub = None;
        for _ in 0..=params.trust_retries {
            let mut lin_a: Vec<[f64; 3]> = Vec::with_capacity(8);
            let mut lin_b: Vec<f64> = Vec::with_capacity(8);
            for axis in 0..2 {
                let mut a_hi = [0.0; 3];
                a_hi[1 + axis] = 1.0;
                lin_a.push(a_hi);
                lin_b.push(plan_box.upper[axis] - x[axis]);
                let mut a_lo = [0.0; 3];
                a_lo[1 + axis] = -1.0;
                lin_a.push(a_lo);
                lin_b.push(x[axis] - plan_box.lower[axis]);
                lin_a.push(a_hi);
                lin_b.push(trust);
                lin_a.push(a_lo);
                lin_b.push(trust);
            }
            let mut d0 = Vector3::zeros();
            for axis in 0..2 {
                d0[1 + axis] = 0.5 * (center[axis] - x[axis]);
                let cap = 0.9 * trust;
                d0[1 + axis] = d0[1 + axis].clamp(-cap, cap);
            }
            match tangent_sdp(&bm.b0, &bm.bx, &bm.by, &h, &lin_a, &lin_b, d0) {
                Ok(res) => {
                    sub = Some(res);
                    break;
                }
                Err(_) => trust *= 0.5,
            }
        }
        let Some((d, lam_new, eta)) = sub else {
            break;
        };
        lambda = lam_new;

        // KKT residuals of the outer problem at the current point.
        let mut grad_l = Vector3::new(-1.0 + lambda.trace(), 0.0, 0.0);
        grad_l[1] = (&bm.bx * &lambda).trace();
        grad_l[2] = (&bm.by * &lambda).trace();
        // Box rows only; trust rows vanish as the step shrinks at a solution.
        for axis in 0..2 {
            grad_l[1 + axis] += eta[4 * axis] - eta[4 * axis + 1];
        }
        let feas = sym_max_eig(&bm.b0).max(0.0);
        let comp = (&bm.b0 * &lambda).trace().abs();
        if grad_l.norm() <= params.tol_grad && feas <= params.tol_feas && comp <= params.tol_comp
        {
            converged = true;
            break;
        }

        // Penalty update, then an Armijo search on the exact penalty merit.
        let need = lambda.trace() + params.gamma_bar;
        if gamma < need {
            gamma = (1.5 * gamma).max(need);
        }
        let pred = -(h * d).dot(&d) + (&bm.b0 * &lambda).trace() - gamma * feas;
        if pred >= 0.0 {
            break;
        }
        let theta0 = merit(z, x, gamma)?;
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..params.max_backtracks {
            let zt = z + alpha * d[0];
            let xt = [x[0] + alpha * d[1], x[1] + alpha * d[2]];
            let theta = merit(zt, xt, gamma)?;
            if theta <= theta0 + params.omega * alpha * pred {
                z = zt;
                x = xt;
                accepted = true;
                break;
            }
            alpha *= params.rho;
        }
        if !accepted {
            break;
        }
    }

    let g_local = state.gain(rom, x)?;
    if g_local >= g0 {
        Ok(PlannedStep { position: x, gain: g_local, converged, iterations, used_fallback: false })
    } else {
        Ok(PlannedStep { position: x0, gain: g0, converged, iterations, used_fallback: true })
    }
}

/// Dense grid argmax of the augmented gain over a box; the oracle for tests
/// and a slow but global alternative to [`next_best`].
pub fn grid_argmax(
    state: &PlannerState,
    rom: &ReducedModel,
    bounds: &Rect,
    n_per_axis: usize,
) -> Result<([f64; 2], f64)> {
    let mut best = ([0.0, 0.0], f64::NEG_INFINITY);
    for j in 0..n_per_axis {
        for i in 0..n_per_axis {
            let fx = i as f64 / (n_per_axis - 1) as f64;
            let fy = j as f64 / (n_per_axis - 1) as f64;
            let x = [
                bounds.lower[0] + fx * bounds.width(0),
                bounds.lower[1] + fy * bounds.width(1),
            ];
            if !rom.mesh.domain.contains(x) {
                continue;
            }
            let g = state.gain(rom, x)?;
            if g > best.1 {
                best = (x, g);
            }
        }
    }
    Ok(best)
}

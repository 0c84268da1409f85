//! Closed-loop mission: measure, identify, plan, repeat.
//!
//! The truth field lives on a refined mesh whose nodes include every inversion
//! node, so snapped waypoints sample it exactly. Readings carry multiplicative
//! Gaussian noise from a seeded generator; with the deterministic solvers this
//! makes whole reports reproducible byte for byte.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fem::{assemble, generate_snapshots, load_vector, Snapshot, SourceTerm, Stiffness};
use crate::flow::{analytic_flow, total_diffusivity, FlowField, FlowSpec};
use crate::geometry::{build_mesh, decompose_convex, Domain, Mesh};
use crate::planner::{next_best, PlannerParams, PlannerState};
use crate::quad;
use crate::rom::ReducedModel;
use crate::si::{sa_initialize, solve_si, Measurement, SaOptions, SiOptions, SiProblem};
use crate::source::SourceParams;

fn default_truth_refine() -> usize {
    2
}
fn default_energy_fraction() -> f64 {
    0.97
}
fn default_tau() -> f64 {
    1e-8
}
fn default_alpha() -> f64 {
    0.7
}
fn default_beta_scale() -> f64 {
    1.0
}
fn default_si_tol() -> f64 {
    1e-6
}
fn default_si_iters() -> usize {
    200
}
fn default_param_eps() -> f64 {
    1e-3
}
fn default_beta_max() -> f64 {
    1.0
}
fn default_planner() -> PlannerSection {
    PlannerSection::default()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshSection {
    pub nx: usize,
    pub ny: usize,
    /// Truth mesh uses (n-1) * refine + 1 nodes per axis so its node set
    /// contains every inversion node.
    #[serde(default = "default_truth_refine")]
    pub truth_refine: usize,
}

/// Scalar diffusivity, either given directly or assembled from fluid
/// properties with a stability floor.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DiffusivitySection {
    Direct { kappa: f64 },
    Model { kappa0: f64, viscosity: f64, density: f64, schmidt: f64, floor: f64 },
}

impl DiffusivitySection {
    pub fn value(&self) -> Result<f64> {
        match self {
            Self::Direct { kappa } => {
                if !(kappa.is_finite() && *kappa > 0.0) {
                    return Err(Error::Flow(format!("diffusivity must be positive, got {kappa}")));
                }
                Ok(*kappa)
            }
            Self::Model { kappa0, viscosity, density, schmidt, floor } => {
                let values =
                    total_diffusivity(*kappa0, &[*viscosity], *density, *schmidt, *floor)?;
                Ok(values[0])
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowSection {
    #[serde(flatten)]
    pub spec: FlowSpec,
    pub diffusivity: DiffusivitySection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RomSection {
    pub cover_nx: usize,
    pub cover_ny: usize,
    #[serde(default = "default_energy_fraction")]
    pub energy_fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensingSection {
    /// Waypoints before any planning happens.
    pub initial_waypoints: usize,
    /// Hard measurement budget.
    pub max_waypoints: usize,
    /// Multiplicative noise standard deviation.
    pub noise_std: f64,
    /// Intensity scale used by the intensity error metric.
    #[serde(default = "default_beta_max")]
    pub beta_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SiSection {
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_alpha")]
    pub screening_alpha: f64,
    #[serde(default = "default_beta_scale")]
    pub screening_beta_scale: f64,
    #[serde(default)]
    pub max_towers: Option<usize>,
    #[serde(default = "default_si_tol")]
    pub tol: f64,
    #[serde(default = "default_si_iters")]
    pub max_iters: usize,
    /// Mission stops once consecutive estimates move less than this.
    #[serde(default = "default_param_eps")]
    pub param_eps: f64,
}

impl SiSection {
    pub fn sa_options(&self, beta_max: f64) -> SaOptions {
        SaOptions {
            alpha: self.screening_alpha,
            beta_scale: self.screening_beta_scale,
            max_towers: self.max_towers,
            beta_max,
        }
    }

    pub fn si_options(&self) -> SiOptions {
        SiOptions { max_iters: self.max_iters, tol: self.tol, ..SiOptions::default() }
    }
}

impl Default for SiSection {
    fn default() -> Self {
        Self {
            tau: default_tau(),
            screening_alpha: default_alpha(),
            screening_beta_scale: default_beta_scale(),
            max_towers: None,
            tol: default_si_tol(),
            max_iters: default_si_iters(),
            param_eps: default_param_eps(),
        }
    }
}

/// Planner constants with serde defaults matching [`PlannerParams`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlannerSection {
    #[serde(default = "PlannerSection::d_stride")]
    pub sample_stride: usize,
    #[serde(default = "PlannerSection::d_iters")]
    pub max_iters: usize,
}

impl PlannerSection {
    fn d_stride() -> usize {
        4
    }
    fn d_iters() -> usize {
        100
    }
    pub fn to_params(&self) -> PlannerParams {
        PlannerParams {
            sample_stride: self.sample_stride,
            max_iters: self.max_iters,
            ..PlannerParams::default()
        }
    }
}

impl Default for PlannerSection {
    fn default() -> Self {
        Self { sample_stride: Self::d_stride(), max_iters: Self::d_iters() }
    }
}

/// Everything a mission needs except the seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MissionConfig {
    pub domain: Domain,
    pub mesh: MeshSection,
    pub flow: FlowSection,
    pub rom: RomSection,
    pub true_source: SourceParams,
    pub sensing: SensingSection,
    #[serde(default)]
    pub si: SiSection,
    #[serde(default = "default_planner")]
    pub planner: PlannerSection,
}

impl MissionConfig {
    pub fn load_json(path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        if self.mesh.nx < 3 || self.mesh.ny < 3 {
            return Err(Error::Mission("mesh needs at least 3 nodes per axis".into()));
        }
        if self.mesh.truth_refine < 1 {
            return Err(Error::Mission("truth refinement must be at least 1".into()));
        }
        self.flow.diffusivity.value()?;
        if self.rom.cover_nx < 1 || self.rom.cover_ny < 1 {
            return Err(Error::Mission("snapshot cover needs at least one tile".into()));
        }
        if !(0.0 < self.rom.energy_fraction && self.rom.energy_fraction <= 1.0) {
            return Err(Error::Mission(format!(
                "energy fraction must lie in (0, 1], got {}",
                self.rom.energy_fraction
            )));
        }
        if self.true_source.towers.is_empty() {
            return Err(Error::Mission("mission needs a true source".into()));
        }
        if self.sensing.initial_waypoints < 1 {
            return Err(Error::Mission("need at least one initial waypoint".into()));
        }
        if self.sensing.max_waypoints < self.sensing.initial_waypoints {
            return Err(Error::Mission("measurement budget below the initial sweep".into()));
        }
        if !(self.sensing.noise_std >= 0.0 && self.sensing.noise_std.is_finite()) {
            return Err(Error::Mission("noise level must be finite and >= 0".into()));
        }
        if !(self.sensing.beta_max > 0.0) {
            return Err(Error::Mission("intensity scale must be positive".into()));
        }
        if !(self.si.param_eps > 0.0) {
            return Err(Error::Mission("estimate-change tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Interpolated reading of `field` at `position` with multiplicative noise.
pub fn measure<R: rand::Rng>(
    mesh: &Mesh,
    field: &[f64],
    position: [f64; 2],
    noise_std: f64,
    rng: &mut R,
) -> Result<f64> {
    if !mesh.domain.contains(position) {
        return Err(Error::Mission(format!(
            "measurement position ({}, {}) lies outside the workspace",
            position[0], position[1]
        )));
    }
    let clean = quad::interp(mesh, field, position);
    if noise_std == 0.0 {
        return Ok(clean);
    }
    let normal = Normal::new(0.0, noise_std)
        .map_err(|e| Error::Mission(format!("bad noise level: {e}")))?;
    Ok(clean * (1.0 + normal.sample(rng)))
}

/// `20 log10(|signal| / |noise|)` from aligned clean and noisy readings.
/// `None` when the noise realization is identically zero.
pub fn snr_db(clean: &[f64], noisy: &[f64]) -> Option<f64> {
    let sig: f64 = clean.iter().map(|c| c * c).sum();
    let noise: f64 = clean.iter().zip(noisy).map(|(c, y)| (y - c) * (y - c)).sum();
    if noise == 0.0 {
        None
    } else {
        Some(10.0 * (sig / noise).log10())
    }
}

/// Recovery quality of an estimated source against the truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorMetrics {
    /// Relative misfit over the true footprint.
    pub e_un: f64,
    /// Relative spurious mass outside the true footprint.
    pub e_fd: f64,
    /// Total-intensity error over the intensity scale.
    pub e_int: f64,
    /// Centroid distance over the characteristic length.
    pub e_loc: f64,
}

/// Exact piecewise-constant metrics via an arrangement sweep: both sources are
/// constant on every rectangle of the grid induced by all tower edges, so the
/// integrals are sums, not quadrature.
pub fn error_metrics(
    truth: &SourceParams,
    estimate: &SourceParams,
    beta_max: f64,
    char_len: f64,
) -> Result<ErrorMetrics> {
    if !(beta_max > 0.0) || !(char_len > 0.0) {
        return Err(Error::Mission("metric scales must be positive".into()));
    }
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for t in truth.towers.iter().chain(&estimate.towers) {
        xs.push(t.lower[0]);
        xs.push(t.upper[0]);
        ys.push(t.lower[1]);
        ys.push(t.upper[1]);
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();
    ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ys.dedup();

    let mut norm2 = 0.0;
    let mut un2 = 0.0;
    let mut fd2 = 0.0;
    for i in 0..xs.len().saturating_sub(1) {
        for j in 0..ys.len().saturating_sub(1) {
            let area = (xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j]);
            if area <= 0.0 {
                continue;
            }
            let c = [0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])];
            let s_true = truth.value(c);
            let s_est = estimate.value(c);
            let in_footprint = truth.towers.iter().any(|t| t.contains(c));
            norm2 += area * s_true * s_true;
            if in_footprint {
                un2 += area * (s_true - s_est) * (s_true - s_est);
            } else {
                fd2 += area * s_est * s_est;
            }
        }
    }
    if norm2 <= 0.0 {
        return Err(Error::Mission("true source carries no mass".into()));
    }

    let beta_sum = |p: &SourceParams| p.towers.iter().map(|t| t.intensity).sum::<f64>();
    let centroid = |p: &SourceParams| -> [f64; 2] {
        let total: f64 = p.towers.iter().map(|t| t.intensity * t.area()).sum();
        if total > 0.0 {
            let mut c = [0.0; 2];
            for t in &p.towers {
                let w = t.intensity * t.area() / total;
                c[0] += w * t.center()[0];
                c[1] += w * t.center()[1];
            }
            c
        } else {
            let n = p.towers.len() as f64;
            let mut c = [0.0; 2];
            for t in &p.towers {
                c[0] += t.center()[0] / n;
                c[1] += t.center()[1] / n;
            }
            c
        }
    };
    let (zt, ze) = (centroid(truth), centroid(estimate));
    Ok(ErrorMetrics {
        e_un: (un2 / norm2).sqrt(),
        e_fd: (fd2 / norm2).sqrt(),
        e_int: (beta_sum(estimate) - beta_sum(truth)).abs() / beta_max,
        e_loc: ((ze[0] - zt[0]).powi(2) + (ze[1] - zt[1]).powi(2)).sqrt() / char_len,
    })
}

/// Waypoint chosen by the planner for one step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlannedPoint {
    pub position: [f64; 2],
    pub node: usize,
    pub gain: f64,
    pub converged: bool,
    pub used_fallback: bool,
}

/// One identify-then-plan cycle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRecord {
    pub measurements_used: usize,
    pub objective: f64,
    pub si_iterations: usize,
    pub si_converged: bool,
    pub estimate: SourceParams,
    /// Euclidean change against the previous estimate, absent on the first.
    pub param_change: Option<f64>,
    /// Absent on the final step.
    pub planned: Option<PlannedPoint>,
}

/// Full mission outcome. Contains no wall-clock data so equal seeds give
/// byte-equal serializations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MissionReport {
    pub seed: u64,
    pub converged: bool,
    pub n_measurements: usize,
    pub n_basis: usize,
    pub estimate: SourceParams,
    pub final_objective: f64,
    pub metrics: ErrorMetrics,
    pub snr_db: Option<f64>,
    pub steps: Vec<StepRecord>,
}

/// Inversion-side artifacts shared by the pipeline stages.
pub struct PreparedModel {
    pub mesh: Mesh,
    pub flow: FlowField,
    pub stiffness: Stiffness,
    pub snapshots: Vec<Snapshot>,
    pub rom: ReducedModel,
}

/// Builds mesh, flow, operator, snapshot set, and reduced model from a config.
pub fn prepare_model(cfg: &MissionConfig) -> Result<PreparedModel> {
    cfg.validate()?;
    let mesh = build_mesh(&cfg.domain, cfg.mesh.nx, cfg.mesh.ny)?;
    let kappa = cfg.flow.diffusivity.value()?;
    let flow = analytic_flow(&mesh, &cfg.flow.spec, kappa)?;
    let stiffness = assemble(&mesh, &flow)?;
    let snapshots = generate_snapshots(&mesh, &stiffness, cfg.rom.cover_nx, cfg.rom.cover_ny)?;
    let rom = ReducedModel::build(&mesh, &stiffness, &snapshots, cfg.rom.energy_fraction)?;
    Ok(PreparedModel { mesh, flow, stiffness, snapshots, rom })
}

/// Nearest non-boundary active node; ties keep the lowest id.
pub fn nearest_free_node(mesh: &Mesh, p: [f64; 2]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for idx in 0..mesh.n_nodes() {
        if !mesh.is_free(idx) {
            continue;
        }
        let q = mesh.node_pos(idx);
        let d2 = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
        if best.map_or(true, |(_, bd)| d2 < bd) {
            best = Some((idx, d2));
        }
    }
    best.map(|(i, _)| i)
        .ok_or_else(|| Error::Mission("mesh has no free node to measure at".into()))
}

/// Cell-centered sweep grid of `count` points snapped to free nodes. The
/// grid uses the most even rows-by-columns split so both axes stay covered
/// for non-square counts. Repeats are allowed; readings at one node average.
pub fn initial_waypoints(mesh: &Mesh, count: usize) -> Result<Vec<usize>> {
    let rows = (count as f64).sqrt().floor().max(1.0) as usize;
    let cols = count.div_ceil(rows);
    let d = &mesh.domain;
    let mut nodes = Vec::with_capacity(count);
    'outer: for j in 0..rows {
        for i in 0..cols {
            if nodes.len() == count {
                break 'outer;
            }
            let p = [
                d.lower[0] + (i as f64 + 0.5) / cols as f64 * (d.upper[0] - d.lower[0]),
                d.lower[1] + (j as f64 + 0.5) / rows as f64 * (d.upper[1] - d.lower[1]),
            ];
            nodes.push(nearest_free_node(mesh, p)?);
        }
    }
    Ok(nodes)
}

/// Runs the closed loop: initial sweep, identify, stop on a settled estimate
/// or an exhausted budget, otherwise plan and measure again. Artifacts go
/// under `out` when given, with `report.json` serialized deterministically.
pub fn run_asi(cfg: &MissionConfig, seed: u64, out: Option<&Path>) -> Result<MissionReport> {
    let model = prepare_model(cfg)?;
    let (mesh, flow, rom) = (&model.mesh, &model.flow, &model.rom);
    let truth_mesh = build_mesh(
        &cfg.domain,
        (cfg.mesh.nx - 1) * cfg.mesh.truth_refine + 1,
        (cfg.mesh.ny - 1) * cfg.mesh.truth_refine + 1,
    )?;
    let kappa = cfg.flow.diffusivity.value()?;
    let truth_flow = analytic_flow(&truth_mesh, &cfg.flow.spec, kappa)?;

    let truth_stiff = assemble(&truth_mesh, &truth_flow)?;
    let truth_load = load_vector(&truth_mesh, &SourceTerm::Towers(&cfg.true_source))?;
    let truth_field = truth_stiff.solve_forward(&truth_load)?;

    let cover = decompose_convex(&cfg.domain)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = initial_waypoints(mesh, cfg.sensing.initial_waypoints)?;
    let mut clean = Vec::new();
    let mut noisy = Vec::new();
    let mut measurements: Vec<Measurement> = Vec::new();
    for &node in &nodes {
        let pos = mesh.node_pos(node);
        let value = measure(&truth_mesh, &truth_field, pos, cfg.sensing.noise_std, &mut rng)?;
        clean.push(quad::interp(&truth_mesh, &truth_field, pos));
        noisy.push(value);
        measurements.push(Measurement { position: pos, value });
    }

    let sa_opts = cfg.si.sa_options(cfg.sensing.beta_max);
    let si_opts = cfg.si.si_options();
    let planner_params = cfg.planner.to_params();

    let first_problem = SiProblem::new(rom, cfg.si.tau, &measurements)?;
    let init = sa_initialize(&first_problem, &cover.subdomains, &sa_opts)?;
    let region = init.region.clone();
    let mut current = init.params.clone();

    let mut steps: Vec<StepRecord> = Vec::new();
    let mut converged = false;
    loop {
        let problem = SiProblem::new(rom, cfg.si.tau, &measurements)?;
        let sol = solve_si(&problem, &region, &current, &si_opts)?;
        let change = steps.last().map(|prev| {
            let a = DVector::from_vec(prev.estimate.to_vec());
            let b = DVector::from_vec(sol.params.to_vec());
            (a - b).norm()
        });
        let mut record = StepRecord {
            measurements_used: measurements.len(),
            objective: sol.objective,
            si_iterations: sol.iterations,
            si_converged: sol.converged,
            estimate: sol.params.clone(),
            param_change: change,
            planned: None,
        };
        current = sol.params;

        if let Some(c) = change {
            if c <= cfg.si.param_eps {
                steps.push(record);
                converged = true;
                break;
            }
        }
        if measurements.len() >= cfg.sensing.max_waypoints {
            steps.push(record);
            break;
        }

        let positions: Vec<[f64; 2]> = nodes.iter().map(|&n| mesh.node_pos(n)).collect();
        let state = PlannerState::with_measurements(rom, &current, &positions)?;
        let step = next_best(rom, &state, &cover.subdomains, &planner_params)?;
        let node = nearest_free_node(mesh, step.position)?;
        let pos = mesh.node_pos(node);
        record.planned = Some(PlannedPoint {
            position: pos,
            node,
            gain: step.gain,
            converged: step.converged,
            used_fallback: step.used_fallback,
        });
        steps.push(record);

        let value = measure(&truth_mesh, &truth_field, pos, cfg.sensing.noise_std, &mut rng)?;
        clean.push(quad::interp(&truth_mesh, &truth_field, pos));
        noisy.push(value);
        nodes.push(node);
        measurements.push(Measurement { position: pos, value });
    }

    let metrics = error_metrics(
        &cfg.true_source,
        &current,
        cfg.sensing.beta_max,
        cfg.domain.characteristic_length,
    )?;
    let final_objective = steps.last().map(|s| s.objective).unwrap_or(f64::NAN);
    let report = MissionReport {
        seed,
        converged,
        n_measurements: measurements.len(),
        n_basis: rom.n_basis(),
        estimate: current.clone(),
        final_objective,
        metrics,
        snr_db: snr_db(&clean, &noisy),
        steps,
    };

    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
        let mut trace = std::io::BufWriter::new(std::fs::File::create(dir.join("trace.csv"))?);
        writeln!(
            trace,
            "step,measurements_used,objective,si_iterations,si_converged,param_change,planned_x1,planned_x2,planned_gain"
        )?;
        for (k, s) in report.steps.iter().enumerate() {
            let change = s.param_change.map_or(String::new(), |c| c.to_string());
            let (px, py, pg) = s.planned.as_ref().map_or(
                (String::new(), String::new(), String::new()),
                |p| (p.position[0].to_string(), p.position[1].to_string(), p.gain.to_string()),
            );
            writeln!(
                trace,
                "{k},{},{},{},{},{change},{px},{py},{pg}",
                s.measurements_used, s.objective, s.si_iterations, s.si_converged
            )?;
        }
        mesh.write_csv(&dir.join("mesh.csv"))?;
        truth_mesh.write_csv(&dir.join("truth_mesh.csv"))?;
        flow.write_csv(&dir.join("flow.csv"))?;
        current.save_json(&dir.join("estimated_source.json"))?;
        let est_field =
            rom.nodal_field(&rom.reduced_solve(&rom.reduced_rhs(&current)?)?);
        write_field_csv(&dir.join("estimated_field.csv"), &est_field)?;
        write_field_csv(&dir.join("truth_field.csv"), &truth_field)?;
        let mut mfile =
            std::io::BufWriter::new(std::fs::File::create(dir.join("measurements.csv"))?);
        writeln!(mfile, "index,x1,x2,node,value")?;
        for (k, (m, node)) in measurements.iter().zip(&nodes).enumerate() {
            writeln!(
                mfile,
                "{k},{},{},{node},{}",
                m.position[0], m.position[1], m.value
            )?;
        }
    }
    Ok(report)
}

fn write_field_csv(path: &Path, field: &[f64]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "node_id,value")?;
    for (i, v) in field.iter().enumerate() {
        writeln!(f, "{i},{v}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;

    fn small_config() -> MissionConfig {
        MissionConfig {
            domain: Domain::unit_square(),
            mesh: MeshSection { nx: 17, ny: 17, truth_refine: 2 },
            flow: FlowSection {
                spec: FlowSpec::Uniform { velocity: [1.0, 0.0] },
                diffusivity: DiffusivitySection::Direct { kappa: 0.4 },
            },
            rom: RomSection { cover_nx: 4, cover_ny: 4, energy_fraction: 0.97 },
            true_source: SourceParams::single(1.0, [0.30, 0.55], [0.42, 0.67]),
            sensing: SensingSection {
                initial_waypoints: 6,
                max_waypoints: 12,
                noise_std: 0.05,
                beta_max: 1.0,
            },
            si: SiSection::default(),
            planner: PlannerSection { sample_stride: 3, max_iters: 50 },
        }
    }

    #[test]
    fn config_round_trips_and_defaults_fill_in() {
        let cfg = small_config();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: MissionConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.mesh.nx, 17);
        // Omitted optional sections pick up their defaults.
        let minimal = r#"{
            "domain": {"lower": [0,0], "upper": [1,1], "obstacles": [], "characteristic_length": 1.0},
            "mesh": {"nx": 9, "ny": 9},
            "flow": {"kind": "uniform", "velocity": [1.0, 0.0], "diffusivity": {"kappa": 0.3}},
            "rom": {"cover_nx": 2, "cover_ny": 2},
            "true_source": {"towers": [{"intensity": 1.0, "lower": [0.3, 0.3], "upper": [0.5, 0.5]}]},
            "sensing": {"initial_waypoints": 4, "max_waypoints": 8, "noise_std": 0.1}
        }"#;
        let cfg: MissionConfig = serde_json::from_str(minimal).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.mesh.truth_refine, 2);
        assert_eq!(cfg.si.tau, 1e-8);
        assert_eq!(cfg.si.screening_alpha, 0.7);
        assert_eq!(cfg.planner.sample_stride, 4);
        assert_eq!(cfg.sensing.beta_max, 1.0);
    }

    #[test]
    fn shipped_configs_parse_and_validate() {
        let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        for name in ["desk.json", "channel_two_sources.json", "room_turbulent.json"] {
            let cfg = MissionConfig::load_json(&root.join(name))
                .unwrap_or_else(|e| panic!("{name}: {e}"));
            cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        // The turbulent-room diffusivity model lands above its floor.
        let cfg = MissionConfig::load_json(&root.join("room_turbulent.json")).unwrap();
        let kappa = cfg.flow.diffusivity.value().unwrap();
        assert!((kappa - (1.1e-5 + 0.0078 / (1.2 * 0.7))).abs() < 1e-12);
    }

    #[test]
    fn initial_waypoints_are_free_and_deterministic() {
        let mesh = build_mesh(&Domain::unit_square(), 17, 17).unwrap();
        let a = initial_waypoints(&mesh, 6).unwrap();
        let b = initial_waypoints(&mesh, 6).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 6);
        assert!(a.iter().all(|&n| mesh.is_free(n)));
    }

    #[test]
    fn noise_statistics_hit_the_expected_snr() {
        // Multiplicative noise at sigma = 0.1 on a unit signal gives
        // 20 log10(1/0.1) = 20 dB.
        let mesh = build_mesh(&Domain::unit_square(), 5, 5).unwrap();
        let field = vec![1.0; mesh.n_nodes()];
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 10_000;
        let mut clean = Vec::with_capacity(n);
        let mut noisy = Vec::with_capacity(n);
        for _ in 0..n {
            clean.push(1.0);
            noisy.push(measure(&mesh, &field, [0.5, 0.5], 0.1, &mut rng).unwrap());
        }
        let snr = snr_db(&clean, &noisy).unwrap();
        assert!((snr - 20.0).abs() < 0.5, "snr {snr}");
    }

    #[test]
    fn zero_noise_has_no_snr() {
        assert_eq!(snr_db(&[1.0, 2.0], &[1.0, 2.0]), None);
    }

    #[test]
    fn metrics_vanish_on_perfect_recovery() {
        let p = SourceParams::single(2.0, [0.2, 0.3], [0.5, 0.6]);
        let m = error_metrics(&p, &p.clone(), 2.0, 1.0).unwrap();
        assert_eq!(m.e_un, 0.0);
        assert_eq!(m.e_fd, 0.0);
        assert_eq!(m.e_int, 0.0);
        assert_eq!(m.e_loc, 0.0);
    }

    #[test]
    fn metrics_match_hand_computed_overlap() {
        // Unit-intensity squares [0,2]^2 and [1,3]^2: overlap area 1, so
        // e_un^2 = 3/4 of the truth mass and e_fd^2 = 3/4 outside it.
        let truth = SourceParams::single(1.0, [0.0, 0.0], [2.0, 2.0]);
        let est = SourceParams::single(1.0, [1.0, 1.0], [3.0, 3.0]);
        let m = error_metrics(&truth, &est, 1.0, 1.0).unwrap();
        let expect = (3.0f64 / 4.0).sqrt();
        assert!((m.e_un - expect).abs() < 1e-14);
        assert!((m.e_fd - expect).abs() < 1e-14);
        assert!((m.e_int - 0.0).abs() < 1e-14);
        let d = (2.0f64).sqrt();
        assert!((m.e_loc - d).abs() < 1e-14);
    }

    #[test]
    fn fully_missed_source_scores_unity() {
        let truth = SourceParams::single(1.0, [0.1, 0.1], [0.3, 0.3]);
        let est = SourceParams::single(1.0, [0.6, 0.6], [0.8, 0.8]);
        let m = error_metrics(&truth, &est, 1.0, 1.0).unwrap();
        assert!((m.e_un - 1.0).abs() < 1e-14);
        assert!((m.e_fd - 1.0).abs() < 1e-14);
    }

    #[test]
    fn centroid_error_reproduces_published_scale() {
        // Estimate centered at (1.73, 1.805) against truth at (1.8, 1.8)
        // over characteristic length 2.2 gives about 0.0319.
        let truth = SourceParams::single(3000.0, [1.7, 1.7], [1.9, 1.9]);
        let est = SourceParams::single(3140.0, [1.69, 1.76], [1.77, 1.85]);
        let m = error_metrics(&truth, &est, 6000.0, 2.2).unwrap();
        assert!((m.e_loc - 0.0319).abs() < 1e-3, "e_loc {}", m.e_loc);
        assert!((m.e_int - 140.0 / 6000.0).abs() < 1e-12);
    }

    #[test]
    fn empty_truth_is_rejected() {
        let truth = SourceParams::single(0.0, [0.2, 0.2], [0.2, 0.2]);
        let est = SourceParams::single(1.0, [0.1, 0.1], [0.3, 0.3]);
        assert!(error_metrics(&truth, &est, 1.0, 1.0).is_err());
    }

    #[test]
    fn mission_terminates_and_reports() {
        let cfg = small_config();
        let report = run_asi(&cfg, 7, None).unwrap();
        assert!(report.n_measurements <= cfg.sensing.max_waypoints);
        assert!(report.n_measurements >= cfg.sensing.initial_waypoints);
        assert!(!report.steps.is_empty());
        assert!(report.final_objective.is_finite());
        assert!(report.metrics.e_un.is_finite());
        assert!(report.snr_db.is_some());
        let last = report.steps.last().unwrap();
        assert_eq!(last.measurements_used, report.n_measurements);
        assert!(last.planned.is_none());
    }

    #[test]
    fn same_seed_gives_identical_reports() {
        let cfg = small_config();
        let a = run_asi(&cfg, 11, None).unwrap();
        let b = run_asi(&cfg, 11, None).unwrap();
        let ja = serde_json::to_string(&a).unwrap();
        let jb = serde_json::to_string(&b).unwrap();
        assert_eq!(ja, jb);
        let c = run_asi(&cfg, 12, None).unwrap();
        let jc = serde_json::to_string(&c).unwrap();
        assert_ne!(ja, jc);
    }

    #[test]
    fn mission_writes_artifacts() {
        let cfg = small_config();
        let dir = tempfile::tempdir().unwrap();
        let report = run_asi(&cfg, 3, Some(dir.path())).unwrap();
        for name in [
            "report.json",
            "trace.csv",
            "mesh.csv",
            "truth_mesh.csv",
            "flow.csv",
            "estimated_source.json",
            "estimated_field.csv",
            "truth_field.csv",
            "measurements.csv",
        ] {
            assert!(dir.path().join(name).exists(), "{name} missing");
        }
        let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
        let loaded: MissionReport = serde_json::from_str(&text).unwrap();
        assert_eq!(loaded.n_measurements, report.n_measurements);
        let _ = Rect::new([0.0, 0.0], [1.0, 1.0]);
    }
}

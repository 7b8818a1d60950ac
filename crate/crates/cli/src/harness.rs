//! Single runs, convergence sweeps, solver comparisons, Burgers runs and
//! heat flow on ingested clouds.

use std::path::{Path, PathBuf};
use std::time::Instant;

use gpdm::geometry::{knn_search, sample_sine_curve};
use gpdm::ghost::{
    assemble_gpdm_operator, build_ghost_points, default_ghost_layers, estimate_normals_kernel, estimate_normals_secant, tangent_project, GhostFrame, GhostMode,
    DEFAULT_COLLAR, DEFAULT_H_NEIGHBORS,
};
use gpdm::kernel::{assemble_dm_operator, assemble_vcdm_operator, default_epsilon_grid, tune_bandwidth, BandwidthReport, KernelConfig, TuneRule};
use gpdm::spectral::{assemble_gradient_operator, eigendecompose, BurgersSolver, EigenBasis, Galerkin, SpectralState};
use gpdm::timestep::{BoundaryKind, ClosedStepper, DirichletStepper, NeumannStepper, SolutionState, TimeStepConfig, VcdmStepper};
use gpdm::{CsrMatrix, PointCloud};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::io::{ensure_dir, write_text};
use crate::plot::{loglog_svg, Series};
use crate::problems::{Problem, Size};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorNorms {
    /// `sqrt(mean e^2)`.
    pub l2: f64,
    pub linf: f64,
}

pub fn error_norms(u: &[f64], truth: &[f64]) -> Result<ErrorNorms> {
    if u.len() != truth.len() {
        return Err(HarnessError::Argument(format!("error norms need equal lengths, got {} and {}", u.len(), truth.len())));
    }
    if u.is_empty() {
        return Err(HarnessError::Argument("error norms of empty vectors".into()));
    }
    let (mut s, mut mx) = (0.0f64, 0.0f64);
    for (a, b) in u.iter().zip(truth) {
        let e = (a - b).abs();
        s += e * e;
        mx = mx.max(e);
    }
    Ok(ErrorNorms { l2: (s / u.len() as f64).sqrt(), linf: mx })
}

/// Least-squares line through `(log n, log err)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Half-width of the 95% interval on the slope (zero for an exact fit).
    pub half_width: f64,
}

fn t_quantile_975(dof: usize) -> f64 {
    const TABLE: [f64; 10] = [12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228];
    match dof {
        0 => f64::INFINITY,
        1..=10 => TABLE[dof - 1],
        _ => {
            let z = 1.959_964f64;
            z + (z.powi(3) + z) / (4.0 * dof as f64)
        }
    }
}

pub fn fit_slope(ns: &[f64], errs: &[f64]) -> Result<SlopeFit> {
    if ns.len() != errs.len() || ns.len() < 3 {
        return Err(HarnessError::Argument("slope fit needs at least 3 matching points".into()));
    }
    if ns.iter().chain(errs).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(HarnessError::Argument("slope fit needs positive finite values".into()));
    }
    let x: Vec<f64> = ns.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = errs.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(HarnessError::Argument("slope fit needs distinct N values".into()));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let se = (rss / (n - 2.0) / sxx).sqrt();
    Ok(SlopeFit { slope, intercept, half_width: t_quantile_975(x.len() - 2) * se })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Plain diffusion maps; boundary points handled by the same finite-difference closure.
    Dm,
    /// Ghost-point diffusion maps.
    Gpdm,
    /// Diffusion maps with near-boundary rings held at prescribed data.
    Vcdm,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Dm => "dm",
            Method::Gpdm => "gpdm",
            Method::Vcdm => "vcdm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum NormalChoice {
    /// Kernel normals for random samplers, secant normals otherwise.
    Auto,
    Secant,
    Kernel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    pub k: usize,
    pub dt: f64,
    pub t_end: f64,
    /// Ghost layers `K`; `None` uses `max(2, ceil(collar sqrt(eps) / h))`.
    pub ghost_layers: Option<usize>,
    pub collar: f64,
    pub vcdm_layers: usize,
    pub normals: NormalChoice,
    pub normal_k: usize,
    pub normal_k_boundary: usize,
    /// Neighbors averaged for the ghost spacing of random clouds.
    pub spacing_neighbors: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            k: 200,
            dt: 1e-4,
            t_end: 0.005,
            ghost_layers: None,
            collar: DEFAULT_COLLAR,
            vcdm_layers: 3,
            normals: NormalChoice::Auto,
            normal_k: 50,
            normal_k_boundary: 10,
            spacing_neighbors: DEFAULT_H_NEIGHBORS,
        }
    }
}

/// Bandwidth choice per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EpsilonSpec {
    Fixed {
        value: f64,
    },
    /// Tuned on every sampled cloud.
    Tuned,
    /// `eps(N) = reference * (n_ref / N)^rho`; a missing reference is tuned at the
    /// largest size (first trial), a missing `n_ref` is that size.
    Schedule {
        rho: f64,
        #[serde(default)]
        reference: Option<f64>,
        #[serde(default)]
        n_ref: Option<usize>,
    },
}

/// Max-slope bandwidth on the default grid.
pub fn tune_epsilon(cloud: &PointCloud, k: usize) -> Result<BandwidthReport> {
    let k = k.min(cloud.len().saturating_sub(1)).max(1);
    let nl = knn_search(cloud, k)?;
    Ok(tune_bandwidth(&nl, &default_epsilon_grid(), TuneRule::MaxSlope)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub u: Vec<f64>,
    pub truth: Vec<f64>,
}

/// One integration of a manufactured problem.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub problem: Problem,
    pub method: Method,
    pub n: usize,
    pub n_aug: usize,
    pub epsilon: f64,
    pub k: usize,
    /// Mean ghost spacing, or zero without a ghost frame.
    pub h: f64,
    /// Ghost layers for GPDM, truncated rings for VCDM.
    pub layers: usize,
    pub dt: f64,
    pub t_eval: f64,
    pub norms: ErrorNorms,
    pub max_linf_over_time: f64,
    pub m: usize,
    /// Cloud coordinates and final values on the cloud.
    pub points: Vec<f64>,
    pub u: Vec<f64>,
    pub truth: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub frame: Option<GhostFrame>,
    /// Matrix inverted in each step.
    pub operator: CsrMatrix,
    pub wall_time: f64,
}

fn resolve_normals(problem: Problem, choice: NormalChoice) -> NormalChoice {
    match choice {
        NormalChoice::Auto if problem.is_random() => NormalChoice::Kernel,
        NormalChoice::Auto => NormalChoice::Secant,
        c => c,
    }
}

/// Ghost collar for `cloud`; `layers == 0` keeps only the interior ghosts.
pub fn build_frame(problem: Problem, cloud: &PointCloud, eps: f64, settings: &RunSettings, with_layers: bool) -> Result<GhostFrame> {
    let m = cloud.ambient_dim();
    let (normals, h, mode) = match resolve_normals(problem, settings.normals) {
        NormalChoice::Kernel => {
            let normals = estimate_normals_kernel(cloud, eps, settings.normal_k, settings.normal_k_boundary)?;
            let p = settings.spacing_neighbors.min(cloud.len() - 1);
            let nl = knn_search(cloud, p)?;
            let h = cloud.boundary().iter().map(|&b| nl.dists(b).iter().sum::<f64>() / p as f64).collect();
            (normals, h, GhostMode::Random)
        }
        _ => {
            let s = estimate_normals_secant(cloud)?;
            let mut normals = Vec::with_capacity(s.len() * m);
            for v in &s {
                normals.extend_from_slice(&v.normal);
            }
            (normals, s.iter().map(|v| v.h).collect::<Vec<_>>(), GhostMode::WellSampled)
        }
    };
    let hmean = h.iter().sum::<f64>() / h.len().max(1) as f64;
    let layers = settings.ghost_layers.unwrap_or_else(|| default_ghost_layers(eps, hmean, settings.collar));
    let mut frame = build_ghost_points(cloud, &normals, &h, layers.max(1), mode)?;
    if !with_layers {
        frame.layers = 0;
        frame.exterior.clear();
    }
    Ok(frame)
}

fn drift_for(problem: Problem, labels: &[Vec<f64>]) -> Option<Vec<f64>> {
    let mut out = Vec::new();
    for l in labels {
        out.extend(problem.drift(l)?);
    }
    Some(out)
}

fn kernel_config(problem: Problem, labels: &[Vec<f64>], eps: f64, k: usize, d: usize) -> KernelConfig {
    let cfg = KernelConfig::new(eps, k, d);
    match drift_for(problem, labels) {
        Some(a) => cfg.with_drift(a),
        None => cfg,
    }
}

enum Stepper {
    Closed(ClosedStepper),
    Dirichlet(DirichletStepper, Vec<usize>),
    Neumann(NeumannStepper, Vec<usize>),
    Vcdm(VcdmStepper),
}

/// Integrates `problem` on `cloud` with implicit Euler and compares against the
/// exact solution on the cloud points.
pub fn run_problem(problem: Problem, cloud: &PointCloud, method: Method, eps: f64, settings: &RunSettings, snapshot_times: &[f64]) -> Result<RunOutcome> {
    let start = Instant::now();
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(HarnessError::Argument(format!("epsilon must be positive, got {eps}")));
    }
    if problem == Problem::SineBurgers {
        return Err(HarnessError::Argument("sine-burgers runs through the spectral solver".into()));
    }
    let tc = TimeStepConfig::new(settings.dt, settings.t_end)?;
    let bk = problem.boundary_kind();
    let (n, m, d) = (cloud.len(), cloud.ambient_dim(), cloud.intrinsic_dim());
    let k = settings.k.min(n - 1);
    match (bk, method) {
        (BoundaryKind::None, Method::Vcdm) => return Err(HarnessError::Argument("vcdm needs a boundary".into())),
        (BoundaryKind::Neumann, Method::Vcdm) => return Err(HarnessError::Argument("vcdm applies to Dirichlet problems only".into())),
        (BoundaryKind::None, Method::Gpdm) if !cloud.boundary().is_empty() => {
            return Err(HarnessError::Argument("closed problem sampled with boundary points".into()))
        }
        (BoundaryKind::Dirichlet | BoundaryKind::Neumann, _) if cloud.boundary().is_empty() => {
            return Err(HarnessError::Argument("boundary problem sampled without boundary points".into()))
        }
        _ => {}
    }
    let mut labels: Vec<Vec<f64>> = (0..n).map(|i| cloud.label(i).map(<[f64]>::to_vec).unwrap_or_else(|| problem.labels(cloud.point(i)))).collect();
    let mut frame = None;
    let mut h = 0.0;
    let mut layers = 0;
    let (stepper, operator) = match (bk, method) {
        (BoundaryKind::None, _) => {
            let op = assemble_dm_operator(cloud, &kernel_config(problem, &labels, eps, k, d))?;
            (Stepper::Closed(ClosedStepper::new(&op.matrix, tc.dt)?), op.matrix)
        }
        (_, Method::Vcdm) => {
            let op = assemble_vcdm_operator(cloud, &kernel_config(problem, &labels, eps, k, d), settings.vcdm_layers)?;
            layers = settings.vcdm_layers;
            let a = op.operator.matrix.clone();
            (Stepper::Vcdm(VcdmStepper::new(&op, tc.dt)?), a)
        }
        (_, _) => {
            let fr = build_frame(problem, cloud, eps, settings, method == Method::Gpdm)?;
            let aug = fr.augmented_points(cloud);
            for i in n..fr.n_aug {
                labels.push(problem.labels(&aug[i * m..(i + 1) * m]));
            }
            h = fr.h.iter().sum::<f64>() / fr.h.len() as f64;
            layers = fr.layers;
            let blocks = assemble_gpdm_operator(cloud, &fr, &kernel_config(problem, &labels, eps, k, d))?;
            let bnd = blocks.boundary.clone();
            frame = Some(fr);
            if bk == BoundaryKind::Neumann {
                let a = blocks.neumann_matrix()?;
                (Stepper::Neumann(NeumannStepper::new(&blocks, tc.dt)?, bnd), a)
            } else {
                let a = blocks.lii.clone();
                (Stepper::Dirichlet(DirichletStepper::new(&blocks, tc.dt)?, bnd), a)
            }
        }
    };
    let exact = |t: f64| -> Vec<f64> { labels.iter().map(|l| problem.u(l, t)).collect() };
    let mut state = SolutionState { t: 0.0, step: 0, u: exact(0.0) };
    let steps = tc.steps();
    let snap_steps: Vec<usize> = snapshot_times.iter().map(|&ts| ((ts / tc.dt).round().max(0.0) as usize).min(steps)).collect();
    let mut snapshots = Vec::new();
    let take = |state: &SolutionState, snapshots: &mut Vec<Snapshot>| {
        for _ in snap_steps.iter().filter(|&&s| s == state.step) {
            let truth = exact(state.t);
            snapshots.push(Snapshot { t: state.t, u: state.u[..n].to_vec(), truth: truth[..n].to_vec() });
        }
    };
    take(&state, &mut snapshots);
    let mut max_linf: f64 = 0.0;
    for s in 1..=steps {
        let t = s as f64 * tc.dt;
        let f: Vec<f64> = labels.iter().map(|l| problem.forcing(l, t)).collect();
        state = match &stepper {
            Stepper::Closed(st) => st.step(&state, &f)?,
            Stepper::Dirichlet(st, bnd) => st.step(&state, &f, &bnd.iter().map(|&b| problem.boundary_data(&labels[b], t)).collect::<Vec<_>>())?,
            Stepper::Neumann(st, bnd) => st.step(&state, &f, &bnd.iter().map(|&b| problem.boundary_data(&labels[b], t)).collect::<Vec<_>>())?,
            Stepper::Vcdm(st) => st.step(&state, &f, &st.removed().iter().map(|&i| problem.u(&labels[i], t)).collect::<Vec<_>>())?,
        };
        let truth = exact(state.t);
        max_linf = max_linf.max(error_norms(&state.u[..n], &truth[..n])?.linf);
        take(&state, &mut snapshots);
    }
    let truth = exact(state.t)[..n].to_vec();
    let u = state.u[..n].to_vec();
    let norms = error_norms(&u, &truth)?;
    Ok(RunOutcome {
        problem,
        method,
        n,
        n_aug: labels.len(),
        epsilon: eps,
        k,
        h,
        layers,
        dt: tc.dt,
        t_eval: state.t,
        norms,
        max_linf_over_time: max_linf,
        m,
        points: cloud.coords().to_vec(),
        u,
        truth,
        snapshots,
        frame,
        operator,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub problem: Problem,
    pub method: Method,
    pub sizes: Vec<Size>,
    pub trials: usize,
    pub seed: u64,
    pub epsilon: EpsilonSpec,
    pub settings: RunSettings,
}

/// One `(N, trial)` cell. Failed cells keep `error` and NaN metrics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub size: String,
    pub n: usize,
    pub n_points: usize,
    pub epsilon: f64,
    pub k: usize,
    pub h: f64,
    pub layers: usize,
    pub dt: f64,
    pub trial_seed: u64,
    pub t_eval: f64,
    pub err_l2: f64,
    pub err_linf: f64,
    pub wall_time: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeSummary {
    pub n: usize,
    pub mean_l2: f64,
    pub mean_linf: f64,
    pub trials_ok: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub problem: Problem,
    pub method: Method,
    pub rows: Vec<ExperimentRow>,
    pub summary: Vec<SizeSummary>,
    pub slope_l2: Option<SlopeFit>,
    pub slope_linf: Option<SlopeFit>,
    /// Reference slope drawn on charts, `-rho` for a schedule.
    pub guide_slope: Option<f64>,
}

impl ExperimentResult {
    pub fn failed_cells(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }
}

fn schedule_eps(reference: f64, n_ref: usize, rho: f64, n: usize) -> f64 {
    reference * (n_ref as f64 / n as f64).powf(rho)
}

/// Sweeps sizes times trials. Cells run in parallel; trial `t` uses seed `seed + t`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    if spec.trials == 0 || spec.sizes.is_empty() {
        return Err(HarnessError::Argument("need at least one size and one trial".into()));
    }
    let largest = *spec.sizes.iter().max_by_key(|s| s.nominal()).unwrap();
    let schedule = match &spec.epsilon {
        EpsilonSpec::Schedule { rho, reference, n_ref } => {
            let r = match reference {
                Some(v) => *v,
                None => tune_epsilon(&spec.problem.sample(largest, spec.seed)?, spec.settings.k)?.chosen_epsilon,
            };
            Some((r, n_ref.unwrap_or(largest.nominal()), *rho))
        }
        _ => None,
    };
    let cells: Vec<(Size, u64)> = spec.sizes.iter().flat_map(|&s| (0..spec.trials as u64).map(move |t| (s, t))).collect();
    let rows: Vec<ExperimentRow> = cells
        .par_iter()
        .map(|&(size, t)| {
            let seed = spec.seed + t;
            let cell = || -> Result<(RunOutcome, f64)> {
                let cloud = spec.problem.sample(size, seed)?;
                let eps = match (&spec.epsilon, schedule) {
                    (EpsilonSpec::Fixed { value }, _) => *value,
                    (EpsilonSpec::Tuned, _) => tune_epsilon(&cloud, spec.settings.k)?.chosen_epsilon,
                    (_, Some((r, nr, rho))) => schedule_eps(r, nr, rho, size.nominal()),
                    _ => unreachable!(),
                };
                Ok((run_problem(spec.problem, &cloud, spec.method, eps, &spec.settings, &[])?, eps))
            };
            match cell() {
                Ok((o, eps)) => ExperimentRow {
                    size: size.to_string(),
                    n: size.nominal(),
                    n_points: o.n,
                    epsilon: eps,
                    k: o.k,
                    h: o.h,
                    layers: o.layers,
                    dt: o.dt,
                    trial_seed: seed,
                    t_eval: o.t_eval,
                    err_l2: o.norms.l2,
                    err_linf: o.norms.linf,
                    wall_time: o.wall_time,
                    error: None,
                },
                Err(e) => ExperimentRow {
                    size: size.to_string(),
                    n: size.nominal(),
                    n_points: 0,
                    epsilon: f64::NAN,
                    k: spec.settings.k,
                    h: f64::NAN,
                    layers: 0,
                    dt: spec.settings.dt,
                    trial_seed: seed,
                    t_eval: f64::NAN,
                    err_l2: f64::NAN,
                    err_linf: f64::NAN,
                    wall_time: 0.0,
                    error: Some(format!("{}: {e}", e.kind())),
                },
            }
        })
        .collect();
    let mut summary = Vec::new();
    for size in &spec.sizes {
        let ok: Vec<&ExperimentRow> = rows.iter().filter(|r| r.n == size.nominal() && r.error.is_none()).collect();
        if ok.is_empty() {
            continue;
        }
        let c = ok.len() as f64;
        summary.push(SizeSummary {
            n: size.nominal(),
            mean_l2: ok.iter().map(|r| r.err_l2).sum::<f64>() / c,
            mean_linf: ok.iter().map(|r| r.err_linf).sum::<f64>() / c,
            trials_ok: ok.len(),
        });
    }
    let ns: Vec<f64> = summary.iter().map(|s| s.n as f64).collect();
    let fit = |v: Vec<f64>| if ns.len() >= 3 { fit_slope(&ns, &v).ok() } else { None };
    Ok(ExperimentResult {
        problem: spec.problem,
        method: spec.method,
        slope_l2: fit(summary.iter().map(|s| s.mean_l2).collect()),
        slope_linf: fit(summary.iter().map(|s| s.mean_linf).collect()),
        summary,
        rows,
        guide_slope: schedule.map(|(_, _, rho)| -rho),
    })
}

/// Per-solver outcomes on one cloud.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub outcomes: Vec<RunOutcome>,
    /// Smallest max pointwise error.
    pub winner: Method,
}

pub fn compare_solvers(problem: Problem, cloud: &PointCloud, methods: &[Method], eps: f64, settings: &RunSettings) -> Result<Comparison> {
    if methods.is_empty() {
        return Err(HarnessError::Argument("no solvers to compare".into()));
    }
    for &mt in methods {
        let ok = match (problem.boundary_kind(), mt) {
            (BoundaryKind::None | BoundaryKind::Neumann, Method::Vcdm) => false,
            _ => problem != Problem::SineBurgers,
        };
        if !ok {
            return Err(HarnessError::Argument(format!("{} does not apply to {problem}", mt.name())));
        }
    }
    let outcomes = methods.iter().map(|&mt| run_problem(problem, cloud, mt, eps, settings, &[])).collect::<Result<Vec<_>>>()?;
    let winner = outcomes.iter().min_by(|a, b| a.norms.linf.total_cmp(&b.norms.linf)).unwrap().method;
    Ok(Comparison { outcomes, winner })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GalerkinChoice {
    Plain,
    #[default]
    Gram,
}

impl From<GalerkinChoice> for Galerkin {
    fn from(g: GalerkinChoice) -> Self {
        match g {
            GalerkinChoice::Plain => Galerkin::Plain,
            GalerkinChoice::Gram => Galerkin::Gram,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BurgersSpec {
    pub k: usize,
    /// `None` tunes on each curve.
    pub epsilon: Option<f64>,
    pub modes: usize,
    pub dt: f64,
    pub t_end: f64,
    pub collar: f64,
    pub ghost_layers: Option<usize>,
    pub galerkin: GalerkinChoice,
    pub viscosity: f64,
}

impl Default for BurgersSpec {
    fn default() -> Self {
        Self { k: 100, epsilon: None, modes: 160, dt: 1e-4, t_end: 0.005, collar: DEFAULT_COLLAR, ghost_layers: None, galerkin: GalerkinChoice::Gram, viscosity: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct BurgersRun {
    pub method: Method,
    pub n: usize,
    pub epsilon: f64,
    pub layers: usize,
    pub norms: ErrorNorms,
    pub basis: EigenBasis,
    pub wall_time: f64,
}

/// Sine-curve Burgers with a DM or GPDM eigenbasis.
pub fn run_burgers(n: usize, method: Method, spec: &BurgersSpec) -> Result<BurgersRun> {
    let start = Instant::now();
    let problem = Problem::SineBurgers;
    let cloud = sample_sine_curve(n)?;
    let eps = match spec.epsilon {
        Some(e) => e,
        None => tune_epsilon(&cloud, spec.k)?.chosen_epsilon,
    };
    let tc = TimeStepConfig::new(spec.dt, spec.t_end)?;
    let k = spec.k.min(n - 1);
    let labels: Vec<Vec<f64>> = (0..n).map(|i| cloud.label(i).unwrap().to_vec()).collect();
    let field: Vec<f64> = labels.iter().flat_map(|l| problem.advection_field(l).unwrap()).collect();
    let base = KernelConfig::new(eps, k, 1);
    let (l0, l1, idx, layers) = match method {
        Method::Dm => {
            let l0 = assemble_dm_operator(&cloud, &base)?.matrix;
            let l1 = assemble_dm_operator(&cloud, &base.clone().with_drift(field))?.matrix;
            (l0, l1, (0..n).collect::<Vec<_>>(), 0)
        }
        Method::Gpdm => {
            let settings = RunSettings { ghost_layers: spec.ghost_layers, collar: spec.collar, normals: NormalChoice::Secant, ..RunSettings::default() };
            let frame = build_frame(problem, &cloud, eps, &settings, true)?;
            if frame.n_aug != n {
                return Err(HarnessError::Argument("sine-curve ghosts must snap onto the grid".into()));
            }
            let b0 = assemble_gpdm_operator(&cloud, &frame, &base)?;
            let b1 = assemble_gpdm_operator(&cloud, &frame, &base.clone().with_drift(field))?;
            (b0.lii, b1.lii, b0.interior, frame.layers)
        }
        Method::Vcdm => return Err(HarnessError::Argument("vcdm has no Burgers variant".into())),
    };
    let l2 = assemble_gradient_operator(&l1, &l0)?;
    let basis = eigendecompose(&l0, spec.modes.min(idx.len()))?;
    let solver = BurgersSolver::new(basis, &l2, spec.galerkin.into(), spec.viscosity)?;
    let u0: Vec<f64> = idx.iter().map(|&i| problem.u(&labels[i], 0.0)).collect();
    let mut state = SpectralState { t: 0.0, step: 0, coeffs: solver.project(&u0)? };
    for s in 1..=tc.steps() {
        let t = s as f64 * tc.dt;
        let f: Vec<f64> = idx.iter().map(|&i| problem.forcing(&labels[i], t)).collect();
        state = solver.step(&state, Some(&f), tc.dt, true)?;
    }
    let mut u: Vec<f64> = labels.iter().map(|l| problem.boundary_data(l, state.t)).collect();
    for (&i, v) in idx.iter().zip(solver.reconstruct(&state.coeffs)) {
        u[i] = v;
    }
    let truth: Vec<f64> = labels.iter().map(|l| problem.u(l, state.t)).collect();
    Ok(BurgersRun {
        method,
        n,
        epsilon: eps,
        layers,
        norms: error_norms(&u, &truth)?,
        basis: solver.basis().clone(),
        wall_time: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum HeatForcing {
    One,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatSpec {
    pub k: usize,
    pub epsilon: Option<f64>,
    pub dt: f64,
    pub t_samples: Vec<f64>,
    pub forcing: HeatForcing,
    /// Adds the drift obtained by projecting `(1, ..., 1)` onto tangent spaces.
    pub advect: bool,
    pub tolerance: f64,
}

impl Default for HeatSpec {
    fn default() -> Self {
        Self { k: 200, epsilon: None, dt: 1e-3, t_samples: vec![0.1, 0.5, 1.0], forcing: HeatForcing::One, advect: false, tolerance: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatSnapshot {
    pub t: f64,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatReport {
    pub n: usize,
    pub epsilon: f64,
    pub steps: usize,
    pub snapshots: Vec<HeatSnapshot>,
    /// `|U^{n+1}|_inf / |U^n|_inf` per step.
    pub growth: Vec<f64>,
    /// Largest `max U^{n+1} - max U^n` over all steps.
    pub max_increase: f64,
    /// Change of the spatial mean in each step.
    pub mean_increments: Vec<f64>,
    /// Maximum principle held in every step (only meaningful without forcing).
    pub non_expansive: bool,
}

/// DM heat flow from `u0 = x1 + x2 + x3` on a closed cloud.
pub fn heat_on_ingested_cloud(cloud: &PointCloud, spec: &HeatSpec) -> Result<HeatReport> {
    if spec.t_samples.is_empty() || spec.t_samples.iter().any(|t| !(*t > 0.0)) {
        return Err(HarnessError::Argument("t_samples must be positive and non-empty".into()));
    }
    let n = cloud.len();
    let m = cloud.ambient_dim();
    let k = spec.k.min(n - 1);
    let eps = match spec.epsilon {
        Some(e) => e,
        None => tune_epsilon(cloud, k)?.chosen_epsilon,
    };
    let mut cfg = KernelConfig::new(eps, k, cloud.intrinsic_dim());
    if spec.advect {
        cfg = cfg.with_drift(tangent_project(cloud, &vec![1.0; n * m], k, eps)?);
    }
    let op = assemble_dm_operator(cloud, &cfg)?;
    let t_max = spec.t_samples.iter().copied().fold(0.0, f64::max);
    let tc = TimeStepConfig::new(spec.dt, t_max)?;
    let steps = tc.steps();
    let stepper = ClosedStepper::new(&op.matrix, tc.dt)?;
    let f = vec![if spec.forcing == HeatForcing::One { 1.0 } else { 0.0 }; n];
    let u0: Vec<f64> = (0..n).map(|i| cloud.point(i).iter().take(3).sum()).collect();
    let mut state = SolutionState { t: 0.0, step: 0, u: u0 };
    let stats = |u: &[f64]| {
        let mn = u.iter().copied().fold(f64::INFINITY, f64::min);
        let mx = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (mn, mx, u.iter().sum::<f64>() / u.len() as f64, u.iter().fold(0.0f64, |a, v| a.max(v.abs())))
    };
    let targets: Vec<usize> = spec.t_samples.iter().map(|&t| ((t / tc.dt).round() as usize).min(steps)).collect();
    let (mut snapshots, mut growth, mut mean_increments) = (Vec::new(), Vec::with_capacity(steps), Vec::with_capacity(steps));
    let mut max_increase = f64::NEG_INFINITY;
    let (_, mut prev_max, mut prev_mean, mut prev_inf) = stats(&state.u);
    for _ in 0..steps {
        state = stepper.step(&state, &f)?;
        let (mn, mx, mean, inf) = stats(&state.u);
        growth.push(if prev_inf > 0.0 { inf / prev_inf } else { 1.0 });
        mean_increments.push(mean - prev_mean);
        max_increase = max_increase.max(mx - prev_max);
        for _ in targets.iter().filter(|&&s| s == state.step) {
            snapshots.push(HeatSnapshot { t: state.t, min: mn, max: mx, mean });
        }
        (prev_max, prev_mean, prev_inf) = (mx, mean, inf);
    }
    Ok(HeatReport { n, epsilon: eps, steps, snapshots, growth, max_increase, mean_increments, non_expansive: max_increase <= spec.tolerance })
}

/// Writes `results.csv`, `summary.json` and `convergence.svg` under `out_dir`.
pub fn emit_plots(result: &ExperimentResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if result.rows.is_empty() || result.summary.is_empty() {
        return Err(HarnessError::Argument("nothing to plot: no successful cells".into()));
    }
    ensure_dir(out_dir)?;
    let csv_path = out_dir.join("results.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    for r in &result.rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| HarnessError::io(&csv_path, e))?;
    let json_path = out_dir.join("summary.json");
    let json = serde_json::json!({
        "problem": result.problem,
        "method": result.method,
        "summary": result.summary,
        "slope_l2": result.slope_l2,
        "slope_linf": result.slope_linf,
        "failed_cells": result.failed_cells(),
    });
    write_text(&json_path, &serde_json::to_string_pretty(&json).expect("plain data serializes"))?;
    let series = vec![
        Series { label: "mean l2".into(), points: result.summary.iter().map(|s| (s.n as f64, s.mean_l2)).collect() },
        Series { label: "mean linf".into(), points: result.summary.iter().map(|s| (s.n as f64, s.mean_linf)).collect() },
    ];
    let note = result.slope_l2.map(|f| format!("l2 slope {:.3} +/- {:.3}", f.slope, f.half_width));
    let title = format!("{} / {}", result.problem, result.method.name());
    let guides: Vec<f64> = result.guide_slope.into_iter().collect();
    let svg_path = out_dir.join("convergence.svg");
    write_text(&svg_path, &loglog_svg(&title, "N", "error", &series, &guides, note.as_deref())?)?;
    Ok(vec![csv_path, json_path, svg_path])
}

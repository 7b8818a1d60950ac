use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gpdm_cli::config::ExperimentConfig;
use gpdm_cli::harness::{
    compare_solvers, emit_plots, heat_on_ingested_cloud, run_burgers, run_experiment, run_problem, tune_epsilon, BurgersSpec, GalerkinChoice, HeatForcing,
    HeatSpec, Method, NormalChoice, RunSettings,
};
use gpdm_cli::io::{ensure_dir, load_cloud, write_bandwidth_csv, write_eigenbasis_csv, write_ghost_frame_csv, write_operator_triplets, write_snapshot_csv, write_text};
use gpdm_cli::plot::{loglog_svg, Series};
use gpdm_cli::problems::{Problem, Size};
use gpdm_cli::{HarnessError, Result};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "gpdm", version, about = "Diffusion-maps and ghost-point solvers for PDEs on point clouds")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Bandwidth report for a sampled or loaded cloud.
    Tune(TuneArgs),
    /// One run of a manufactured problem with snapshot CSVs.
    Solve(SolveArgs),
    /// Convergence sweep from a TOML experiment file.
    Sweep(SweepArgs),
    /// Several solvers on the same cloud.
    Compare(CompareArgs),
    /// Sine-curve Burgers with DM and GPDM eigenbases.
    Burgers(BurgersArgs),
    /// Heat flow on a CSV or OBJ cloud.
    IngestHeat(HeatArgs),
}

#[derive(Args)]
struct EpsArgs {
    /// Fixed bandwidth.
    #[arg(long, conflicts_with = "rho")]
    eps: Option<f64>,
    /// Schedule exponent in eps(N) = eps_ref (n_ref / N)^rho.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, requires = "rho")]
    eps_ref: Option<f64>,
    #[arg(long, requires = "rho")]
    n_ref: Option<usize>,
}

impl EpsArgs {
    fn resolve(&self, cloud: &gpdm::PointCloud, size: Size, k: usize) -> Result<f64> {
        match (self.eps, self.rho, self.eps_ref, self.n_ref) {
            (Some(e), ..) => Ok(e),
            (None, Some(rho), Some(r), Some(nr)) => Ok(r * (nr as f64 / size.nominal() as f64).powf(rho)),
            (None, Some(_), Some(r), None) => Ok(r),
            _ => Ok(tune_epsilon(cloud, k)?.chosen_epsilon),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 200)]
    k: usize,
    #[arg(long, default_value_t = 1e-4)]
    dt: f64,
    #[arg(long, default_value_t = 0.005)]
    t_end: f64,
    /// Ghost layers K (default from the collar rule).
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long, default_value_t = gpdm::ghost::DEFAULT_COLLAR)]
    collar: f64,
    #[arg(long, default_value_t = 3)]
    vcdm_layers: usize,
    #[arg(long, value_enum, default_value_t = NormalChoice::Auto)]
    normals: NormalChoice,
}

impl RunArgs {
    fn settings(&self) -> RunSettings {
        RunSettings {
            k: self.k,
            dt: self.dt,
            t_end: self.t_end,
            ghost_layers: self.layers,
            collar: self.collar,
            vcdm_layers: self.vcdm_layers,
            normals: self.normals,
            ..RunSettings::default()
        }
    }
}

#[derive(Args)]
struct TuneArgs {
    #[arg(long, value_enum, required_unless_present = "input", conflicts_with = "input")]
    problem: Option<Problem>,
    /// Point count or IxJ grid.
    #[arg(long, default_value = "1024")]
    size: Size,
    /// CSV or OBJ cloud.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Intrinsic dimension of a loaded cloud.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    k: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, value_enum)]
    problem: Problem,
    #[arg(long)]
    size: Size,
    #[arg(long, value_enum, default_value_t = Method::Gpdm)]
    method: Method,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    eps: EpsArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Extra snapshot times.
    #[arg(long, value_delimiter = ',')]
    snapshots: Vec<f64>,
    /// Also write the stepped operator as triplets.
    #[arg(long)]
    export_operator: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long, value_enum)]
    problem: Problem,
    #[arg(long)]
    size: Size,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "dm,gpdm")]
    methods: Vec<Method>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    eps: EpsArgs,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct BurgersArgs {
    #[arg(long, value_delimiter = ',', default_value = "200,400,800,1600")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    k: usize,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = 160)]
    modes: usize,
    #[arg(long, default_value_t = 1e-4)]
    dt: f64,
    #[arg(long, default_value_t = 0.005)]
    t_end: f64,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long, default_value_t = gpdm::ghost::DEFAULT_COLLAR)]
    collar: f64,
    #[arg(long, value_enum, default_value_t = GalerkinChoice::Gram)]
    galerkin: GalerkinChoice,
    #[arg(long, default_value_t = 1.0)]
    viscosity: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct HeatArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 200)]
    k: usize,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,1.0")]
    t_samples: Vec<f64>,
    #[arg(long, value_enum, default_value_t = HeatForcing::One)]
    forcing: HeatForcing,
    #[arg(long)]
    advect: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn tune(a: TuneArgs) -> Result<Value> {
    let (cloud, source) = match (&a.input, a.problem) {
        (Some(p), _) => (load_cloud(p, a.dim)?.cloud, p.display().to_string()),
        (None, Some(pr)) => (pr.sample(a.size, a.seed)?, format!("{pr} {}", a.size)),
        (None, None) => return Err(HarnessError::Argument("need --problem or --input".into())),
    };
    let report = tune_epsilon(&cloud, a.k)?;
    let path = a.out.join("bandwidth.csv");
    write_bandwidth_csv(&path, &report)?;
    Ok(json!({
        "source": source,
        "n": cloud.len(),
        "epsilon": report.chosen_epsilon,
        "estimated_dim": report.estimated_dim,
        "files": [path],
    }))
}

fn snapshot_files(out: &Path, o: &gpdm_cli::harness::RunOutcome, tag: &str) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for s in &o.snapshots {
        let p = out.join(format!("{tag}snapshot_t{:.6}.csv", s.t));
        write_snapshot_csv(&p, &o.points, o.m, &s.u, &s.truth)?;
        files.push(p);
    }
    let p = out.join(format!("{tag}final.csv"));
    write_snapshot_csv(&p, &o.points, o.m, &o.u, &o.truth)?;
    files.push(p);
    Ok(files)
}

fn outcome_json(o: &gpdm_cli::harness::RunOutcome) -> Value {
    json!({
        "problem": o.problem,
        "method": o.method,
        "n": o.n,
        "n_aug": o.n_aug,
        "epsilon": o.epsilon,
        "k": o.k,
        "h": o.h,
        "layers": o.layers,
        "dt": o.dt,
        "t_eval": o.t_eval,
        "err_l2": o.norms.l2,
        "err_linf": o.norms.linf,
        "max_linf_over_time": o.max_linf_over_time,
        "wall_time": o.wall_time,
    })
}

fn solve(a: SolveArgs) -> Result<Value> {
    let cloud = a.problem.sample(a.size, a.seed)?;
    let eps = a.eps.resolve(&cloud, a.size, a.run.k)?;
    let o = run_problem(a.problem, &cloud, a.method, eps, &a.run.settings(), &a.snapshots)?;
    ensure_dir(&a.out)?;
    let mut files = snapshot_files(&a.out, &o, "")?;
    if let Some(f) = &o.frame {
        let p = a.out.join("ghost_frame.csv");
        write_ghost_frame_csv(&p, f)?;
        files.push(p);
    }
    if a.export_operator {
        let p = a.out.join("operator.csv");
        write_operator_triplets(&p, &o.operator)?;
        files.push(p);
    }
    let mut v = outcome_json(&o);
    v["files"] = json!(files);
    Ok(v)
}

fn sweep(a: SweepArgs) -> Result<Value> {
    let cfg = ExperimentConfig::load(&a.config)?;
    let mut spec = cfg.spec();
    if let Some(t) = a.trials {
        spec.trials = t;
    }
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    let out = a.out.or(cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let result = run_experiment(&spec)?;
    let files = emit_plots(&result, &out)?;
    Ok(json!({
        "problem": result.problem,
        "method": result.method,
        "summary": result.summary,
        "slope_l2": result.slope_l2,
        "slope_linf": result.slope_linf,
        "failed_cells": result.failed_cells(),
        "files": files,
    }))
}

fn compare(a: CompareArgs) -> Result<Value> {
    let cloud = a.problem.sample(a.size, a.seed)?;
    let eps = a.eps.resolve(&cloud, a.size, a.run.k)?;
    let cmp = compare_solvers(a.problem, &cloud, &a.methods, eps, &a.run.settings())?;
    ensure_dir(&a.out)?;
    let mut runs = Vec::new();
    let mut files = Vec::new();
    for o in &cmp.outcomes {
        let p = a.out.join(format!("{}_errors.csv", o.method.name()));
        write_snapshot_csv(&p, &o.points, o.m, &o.u, &o.truth)?;
        files.push(p);
        runs.push(outcome_json(o));
    }
    Ok(json!({ "runs": runs, "winner": cmp.winner, "files": files }))
}

fn burgers(a: BurgersArgs) -> Result<Value> {
    let spec = BurgersSpec {
        k: a.k,
        epsilon: a.eps,
        modes: a.modes,
        dt: a.dt,
        t_end: a.t_end,
        collar: a.collar,
        ghost_layers: a.layers,
        galerkin: a.galerkin,
        viscosity: a.viscosity,
    };
    ensure_dir(&a.out)?;
    let csv_path = a.out.join("burgers.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["method", "n", "epsilon", "layers", "modes", "discarded", "max_residual", "orthogonality_defect", "err_l2", "err_linf", "wall_time"])?;
    let mut rows = Vec::new();
    let mut files = vec![csv_path.clone()];
    let mut series = vec![Series { label: "dm l2".into(), points: vec![] }, Series { label: "gpdm l2".into(), points: vec![] }];
    for &n in &a.sizes {
        for (si, method) in [Method::Dm, Method::Gpdm].into_iter().enumerate() {
            let r = run_burgers(n, method, &spec)?;
            let b = &r.basis;
            w.write_record([
                method.name().to_string(),
                n.to_string(),
                format!("{:e}", r.epsilon),
                r.layers.to_string(),
                b.len().to_string(),
                b.discarded.to_string(),
                format!("{:e}", b.max_residual),
                format!("{:e}", b.orthogonality_defect),
                format!("{:e}", r.norms.l2),
                format!("{:e}", r.norms.linf),
                format!("{:.3}", r.wall_time),
            ])?;
            let p = a.out.join(format!("eigenbasis_{}_{n}.csv", method.name()));
            write_eigenbasis_csv(&p, b)?;
            files.push(p);
            series[si].points.push((n as f64, r.norms.l2));
            rows.push(json!({
                "method": method, "n": n, "epsilon": r.epsilon, "layers": r.layers, "modes": b.len(),
                "discarded": b.discarded, "err_l2": r.norms.l2, "err_linf": r.norms.linf,
            }));
        }
    }
    w.flush().map_err(|e| HarnessError::Io { path: csv_path, source: e })?;
    if a.sizes.len() > 1 {
        let p = a.out.join("burgers.svg");
        write_text(&p, &loglog_svg("sine-curve Burgers", "N", "l2 error", &series, &[], None)?)?;
        files.push(p);
    }
    Ok(json!({ "runs": rows, "files": files }))
}

fn ingest_heat(a: HeatArgs) -> Result<Value> {
    let ing = load_cloud(&a.input, a.dim)?;
    let spec = HeatSpec { k: a.k, epsilon: a.eps, dt: a.dt, t_samples: a.t_samples, forcing: a.forcing, advect: a.advect, ..HeatSpec::default() };
    let report = heat_on_ingested_cloud(&ing.cloud, &spec)?;
    let path = a.out.join("heat.json");
    let v = json!({
        "n": report.n,
        "duplicates_removed": ing.duplicates_removed,
        "epsilon": report.epsilon,
        "steps": report.steps,
        "snapshots": report.snapshots,
        "max_increase": report.max_increase,
        "max_growth": report.growth.iter().copied().fold(0.0, f64::max),
        "first_mean_increment": report.mean_increments.first(),
        "non_expansive": report.non_expansive,
        "files": [path],
    });
    write_text(&path, &serde_json::to_string_pretty(&v).expect("plain data serializes"))?;
    Ok(v)
}

fn error_line(kind: &str, message: &str) -> String {
    json!({ "status": "error", "kind": kind, "message": message }).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", error_line("usage", e.to_string().trim()));
            return ExitCode::from(2);
        }
    };
    let result = match cli.cmd {
        Cmd::Tune(a) => tune(a),
        Cmd::Solve(a) => solve(a),
        Cmd::Sweep(a) => sweep(a),
        Cmd::Compare(a) => compare(a),
        Cmd::Burgers(a) => burgers(a),
        Cmd::IngestHeat(a) => ingest_heat(a),
    };
    match result {
        Ok(mut v) => {
            v["status"] = json!("ok");
            println!("{v}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_line(e.kind(), &e.to_string()));
            ExitCode::FAILURE
        }
    }
}

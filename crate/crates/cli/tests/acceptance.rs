//! Acceptance checks, one line per criterion. Runs as a plain binary.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use gpdm::geometry::{sample_annulus, sample_circle, sample_ellipse, sample_semi_torus, sample_sine_curve, PointCloud, Sampling};
use gpdm::ghost::{assemble_gpdm_operator, build_extrapolation_matrix, estimate_normals_kernel, GpdmBlocks};
use gpdm::kernel::{assemble_dm_operator, KernelConfig};
use gpdm::timestep::stability_report;
use gpdm::CsrMatrix;
use gpdm_cli::config::ExperimentConfig;
use gpdm_cli::harness::{
    build_frame, heat_on_ingested_cloud, run_burgers, run_experiment, run_problem, tune_epsilon, BurgersSpec, HeatForcing, HeatSpec, Method,
    NormalChoice, RunSettings,
};
use gpdm_cli::problems::{Problem, Size};

type Verdict = (bool, String);

/// Kernel-normal error constant, fixed from a single calibration sweep.
const NORMAL_C: f64 = 2.0;

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn drift_config(problem: Problem, cloud: &PointCloud, eps: f64, k: usize) -> KernelConfig {
    let cfg = KernelConfig::new(eps, k, cloud.intrinsic_dim());
    let mut drift = Vec::new();
    for i in 0..cloud.len() {
        match cloud.label(i).and_then(|l| problem.drift(l)) {
            Some(a) => drift.extend(a),
            None => return cfg,
        }
    }
    cfg.with_drift(drift)
}

fn gpdm_blocks(problem: Problem, cloud: &PointCloud, eps: f64, k: usize, normals: NormalChoice) -> Result<GpdmBlocks, String> {
    let settings = RunSettings { k, normals, ..RunSettings::default() };
    let frame = build_frame(problem, cloud, eps, &settings, true).map_err(|e| e.to_string())?;
    assemble_gpdm_operator(cloud, &frame, &KernelConfig::new(eps, k, cloud.intrinsic_dim())).map_err(|e| e.to_string())
}

/// Worst violation of the generator sign pattern: (relative row sum, max diagonal, min off-diagonal).
fn structure(a: &CsrMatrix) -> (f64, f64, f64) {
    let (mut sum_rel, mut diag_max, mut off_min) = (0.0f64, f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        sum_rel = sum_rel.max(vals.iter().sum::<f64>().abs() / scale.max(f64::MIN_POSITIVE));
        for (&j, &v) in cols.iter().zip(vals) {
            if j == i {
                diag_max = diag_max.max(v);
            } else {
                off_min = off_min.min(v);
            }
        }
    }
    (sum_rel, diag_max, off_min)
}

fn operator_structure() -> Verdict {
    let mut mats: Vec<(String, CsrMatrix)> = Vec::new();
    let mut push_dm = |name: String, problem: Problem, cloud: PointCloud, k: usize| -> Result<(), String> {
        let eps = tune_epsilon(&cloud, k).map_err(|e| e.to_string())?.chosen_epsilon;
        let op = assemble_dm_operator(&cloud, &drift_config(problem, &cloud, eps, k)).map_err(|e| e.to_string())?;
        mats.push((name, op.matrix));
        Ok(())
    };
    let mut run = || -> Result<(), String> {
        for n in [128, 400, 1000] {
            push_dm(format!("dm circle {n}"), Problem::Circle, sample_circle(n).map_err(|e| e.to_string())?, 50)?;
        }
        for (seed, n) in [(1, 200), (2, 500), (3, 900)] {
            let c = sample_ellipse(n, Sampling::Random { seed }).map_err(|e| e.to_string())?;
            push_dm(format!("dm ellipse {n} seed {seed}"), Problem::Ellipse, c, 60)?;
        }
        for (i, j) in [(24, 6), (45, 12)] {
            push_dm(format!("dm annulus {i}x{j}"), Problem::AnnulusNeumann, sample_annulus(i, j).map_err(|e| e.to_string())?, 100)?;
        }
        for (seed, n) in [(4, 300), (5, 800), (11, 600)] {
            let c = sample_semi_torus(n, Sampling::Random { seed }).map_err(|e| e.to_string())?;
            push_dm(format!("dm semi-torus {n} seed {seed}"), Problem::SemiTorus, c, 100)?;
        }
        push_dm("dm sine 600".into(), Problem::SineBurgers, sample_sine_curve(600).map_err(|e| e.to_string())?, 60)?;
        Ok(())
    };
    if let Err(e) = run() {
        return (false, e);
    }
    let neumann = || -> Result<Vec<(String, CsrMatrix)>, String> {
        let mut out = Vec::new();
        let mut add = |name: String, problem: Problem, cloud: PointCloud, k: usize, normals: NormalChoice| -> Result<(), String> {
            let eps = tune_epsilon(&cloud, k).map_err(|e| e.to_string())?.chosen_epsilon;
            let b = gpdm_blocks(problem, &cloud, eps, k, normals)?;
            out.push((name, b.neumann_matrix().map_err(|e| e.to_string())?));
            Ok(())
        };
        for (i, j) in [(24, 6), (36, 10), (45, 12)] {
            add(format!("N annulus {i}x{j}"), Problem::AnnulusNeumann, sample_annulus(i, j).map_err(|e| e.to_string())?, 100, NormalChoice::Secant)?;
        }
        for (seed, n) in [(6, 250), (7, 500), (8, 900)] {
            let c = sample_semi_torus(n, Sampling::Random { seed }).map_err(|e| e.to_string())?;
            add(format!("N semi-torus {n} seed {seed}"), Problem::SemiTorus, c, 100, NormalChoice::Kernel)?;
        }
        for n in [200, 500, 700, 1000] {
            add(format!("N sine {n}"), Problem::SineBurgers, sample_sine_curve(n).map_err(|e| e.to_string())?, 50, NormalChoice::Secant)?;
        }
        Ok(out)
    };
    match neumann() {
        Ok(n) => mats.extend(n),
        Err(e) => return (false, e),
    }
    let mut worst = (0.0f64, f64::NEG_INFINITY, f64::INFINITY);
    let mut bad = Vec::new();
    for (name, a) in &mats {
        let (s, d, o) = structure(a);
        if !(s <= 1e-12 && d < 0.0 && o >= 0.0) {
            bad.push(name.clone());
        }
        worst = (worst.0.max(s), worst.1.max(d), worst.2.min(o));
    }
    let msg = format!(
        "{} operators, max rel row sum {:.1e}, max diag {:.3e}, min off-diag {:.3e}{}",
        mats.len(),
        worst.0,
        worst.1,
        worst.2,
        if bad.is_empty() { String::new() } else { format!(", violations in {bad:?}") }
    );
    (bad.is_empty() && mats.len() >= 20, msg)
}

fn ingestion_smoke() -> Verdict {
    let n = 400;
    let mut coords = Vec::with_capacity(3 * n);
    for i in 0..n {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
        let r = (1.0 - z * z).sqrt();
        let t = i as f64 * 2.399963229728653;
        coords.extend([r * t.cos(), r * t.sin(), z]);
    }
    let cloud = match PointCloud::new(coords, 3, 2, Vec::new()) {
        Ok(c) => c,
        Err(e) => return (false, e.to_string()),
    };
    let spec = HeatSpec { k: 60, dt: 1e-2, forcing: HeatForcing::Zero, t_samples: vec![0.1, 0.5], ..HeatSpec::default() };
    match heat_on_ingested_cloud(&cloud, &spec) {
        Ok(r) => {
            let g = r.growth.iter().copied().fold(0.0, f64::max);
            (r.non_expansive, format!("sphere {n}, {} steps, max sup-norm growth {g:.12}", r.steps))
        }
        Err(e) => (false, e.to_string()),
    }
}

fn stability() -> Verdict {
    let build = || -> Result<Vec<(String, CsrMatrix)>, String> {
        let s = |e: gpdm::Error| e.to_string();
        let mut out = Vec::new();
        let c = sample_circle(400).map_err(s)?;
        let eps = tune_epsilon(&c, 50).map_err(|e| e.to_string())?.chosen_epsilon;
        out.push(("L circle 400".into(), assemble_dm_operator(&c, &KernelConfig::new(eps, 50, 1)).map_err(s)?.matrix));
        let c = sample_ellipse(300, Sampling::Random { seed: 9 }).map_err(s)?;
        let eps = tune_epsilon(&c, 50).map_err(|e| e.to_string())?.chosen_epsilon;
        out.push(("L ellipse 300".into(), assemble_dm_operator(&c, &KernelConfig::new(eps, 50, 1)).map_err(s)?.matrix));
        let c = sample_annulus(36, 10).map_err(s)?;
        let eps = tune_epsilon(&c, 100).map_err(|e| e.to_string())?.chosen_epsilon;
        out.push(("N annulus 36x10".into(), gpdm_blocks(Problem::AnnulusNeumann, &c, eps, 100, NormalChoice::Secant)?.neumann_matrix().map_err(s)?));
        let c = sample_semi_torus(300, Sampling::Random { seed: 10 }).map_err(s)?;
        let eps = tune_epsilon(&c, 100).map_err(|e| e.to_string())?.chosen_epsilon;
        out.push(("N semi-torus 300".into(), gpdm_blocks(Problem::SemiTorus, &c, eps, 100, NormalChoice::Kernel)?.neumann_matrix().map_err(s)?));
        let c = sample_sine_curve(400).map_err(s)?;
        let eps = tune_epsilon(&c, 50).map_err(|e| e.to_string())?.chosen_epsilon;
        out.push(("N sine 400".into(), gpdm_blocks(Problem::SineBurgers, &c, eps, 50, NormalChoice::Secant)?.neumann_matrix().map_err(s)?));
        Ok(out)
    };
    let mats = match build() {
        Ok(m) => m,
        Err(e) => return (false, e),
    };
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    for (name, a) in &mats {
        for dt in [1e-4, 1e-3, 1e-2, 1.0] {
            match stability_report(a, dt, a.nrows()) {
                Ok(r) => {
                    worst = worst.max(r.inverse_norm_inf);
                    if !(r.inverse_norm_inf <= 1.0 + 1e-10) {
                        bad.push(format!("{name} dt {dt}"));
                    }
                }
                Err(e) => bad.push(format!("{name} dt {dt}: {e}")),
            }
        }
    }
    (bad.is_empty(), format!("{} matrices x 4 steps, max |(I - dt A)^-1|_inf = {worst:.15}{}", mats.len(), if bad.is_empty() { String::new() } else { format!(", failures {bad:?}") }))
}

fn extrapolation() -> Verdict {
    let mut state = 0x9e3779b97f4a7c15u64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    let mut exact = true;
    let mut residual: f64 = 0.0;
    let mut count = 0;
    let cases: Vec<(Problem, PointCloud, NormalChoice)> = vec![
        (Problem::AnnulusNeumann, sample_annulus(64, 16).unwrap(), NormalChoice::Secant),
        (Problem::SemiTorus, sample_semi_torus(900, Sampling::Random { seed: 3 }).unwrap(), NormalChoice::Kernel),
        (Problem::SineBurgers, sample_sine_curve(400).unwrap(), NormalChoice::Secant),
    ];
    for (problem, cloud, normals) in cases {
        let settings = RunSettings { ghost_layers: Some(7), normals, ..RunSettings::default() };
        let frame = match build_frame(problem, &cloud, 0.01, &settings, true) {
            Ok(f) => f,
            Err(e) => return (false, e.to_string()),
        };
        let g = build_extrapolation_matrix(&frame).g;
        let nb = frame.boundary.len();
        for _ in 0..5 {
            let u: Vec<f64> = (0..frame.n_aug).map(|_| next()).collect();
            let ghosts = g.mul_vec(&u);
            for b in 0..nb {
                let ub = u[frame.boundary[b]];
                let u0 = u[frame.merge[b].index()];
                let mut line = vec![u0, ub];
                for k in 1..=frame.layers {
                    let v = ghosts[(k - 1) * nb + b];
                    exact &= v == (k + 1) as f64 * ub - k as f64 * u0;
                    line.push(v);
                }
                let scale = line.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                for w in line.windows(3) {
                    residual = residual.max((w[2] - 2.0 * w[1] + w[0]).abs() / scale);
                }
                count += 1;
            }
        }
    }
    (exact && residual <= 8.0 * f64::EPSILON, format!("{count} ghost lines, closed form bitwise {exact}, max scaled second-difference residual {residual:.1e}"))
}

fn circle_consistency() -> Verdict {
    let mut errs = Vec::new();
    for n in [256, 512, 1024, 2048] {
        let c = sample_circle(n).unwrap();
        let eps = tune_epsilon(&c, 50).unwrap().chosen_epsilon;
        let l = assemble_dm_operator(&c, &KernelConfig::new(eps, 50, 1)).unwrap().matrix;
        let u: Vec<f64> = c.coords().chunks(2).map(|p| p[1]).collect();
        let lu = l.mul_vec(&u);
        errs.push(lu.iter().zip(&u).map(|(a, s)| (a + s).abs()).fold(0.0, f64::max));
    }
    let monotone = errs.windows(2).all(|w| w[1] <= 1.1 * w[0]);
    let last = *errs.last().unwrap();
    (monotone && last <= 0.05, format!("linf errors {:?}", errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>()))
}

fn sweep(file: &str, lo: f64, hi: f64) -> (bool, String) {
    let cfg = match ExperimentConfig::load(&configs().join(file)) {
        Ok(c) => c,
        Err(e) => return (false, e.to_string()),
    };
    let t0 = Instant::now();
    match run_experiment(&cfg.spec()) {
        Ok(r) => match (&r.slope_l2, r.failed_cells()) {
            (Some(fit), 0) => (
                fit.slope >= lo && fit.slope <= hi,
                format!(
                    "{} slope {:.3} +/- {:.3} in [{lo:.3}, {hi:.3}], errors {:?}, {:.0} s",
                    cfg.experiment.problem.name(),
                    fit.slope,
                    fit.half_width,
                    r.summary.iter().map(|s| format!("{:.2e}", s.mean_l2)).collect::<Vec<_>>(),
                    t0.elapsed().as_secs_f64()
                ),
            ),
            (_, failed) => (false, format!("{failed} failed cells, no slope")),
        },
        Err(e) => (false, e.to_string()),
    }
}

fn join(parts: Vec<(bool, String)>) -> Verdict {
    let ok = parts.iter().all(|p| p.0);
    (ok, parts.into_iter().map(|p| p.1).collect::<Vec<_>>().join("; "))
}

fn annulus_convergence() -> Verdict {
    join(vec![sweep("annulus_neumann.toml", -1.3, -0.7), sweep("annulus_dirichlet.toml", -1.3, -0.7)])
}

fn random_convergence() -> Verdict {
    join(vec![sweep("ellipse.toml", -2.0 / 7.0 - 0.15, -2.0 / 7.0 + 0.15), sweep("semi_torus.toml", -0.2 - 0.12, -0.2 + 0.12)])
}

fn boundary_superiority() -> Verdict {
    let settings = RunSettings { k: 200, dt: 1e-3, t_end: 0.05, ..RunSettings::default() };
    let linf = |problem: Problem, method: Method| -> Result<f64, String> {
        let cloud = problem.sample(Size::Grid([90, 23]), 0).map_err(|e| e.to_string())?;
        let out = run_problem(problem, &cloud, method, 0.0026, &settings, &[]).map_err(|e| e.to_string())?;
        Ok(out.norms.linf)
    };
    let res = || -> Result<Verdict, String> {
        let (ng, nd) = (linf(Problem::AnnulusNeumann, Method::Gpdm)?, linf(Problem::AnnulusNeumann, Method::Dm)?);
        let (dg, dv) = (linf(Problem::AnnulusDirichlet, Method::Gpdm)?, linf(Problem::AnnulusDirichlet, Method::Vcdm)?);
        Ok((ng < nd && dg < dv, format!("Neumann GPDM {ng:.3e} vs DM {nd:.3e}; Dirichlet GPDM {dg:.3e} vs VCDM-3 {dv:.3e}")))
    };
    res().unwrap_or_else(|e| (false, e))
}

fn burgers() -> Verdict {
    let spec = BurgersSpec::default();
    let mut lines = Vec::new();
    let mut ok = true;
    let mut prev = f64::INFINITY;
    for n in [200, 400, 800, 1600] {
        let dm = run_burgers(n, Method::Dm, &spec);
        let gp = run_burgers(n, Method::Gpdm, &spec);
        match (dm, gp) {
            (Ok(d), Ok(g)) => {
                ok &= g.norms.l2 < d.norms.l2 && g.norms.l2 < prev;
                prev = g.norms.l2;
                lines.push(format!("N {n}: GPDM {:.2e} DM {:.2e}", g.norms.l2, d.norms.l2));
            }
            (d, g) => {
                ok = false;
                lines.push(format!("N {n}: {}", d.err().or(g.err()).map(|e| e.to_string()).unwrap_or_default()));
            }
        }
    }
    (ok, format!("K = {} modes, {}", spec.modes, lines.join(", ")))
}

fn temporal_order() -> Verdict {
    let problem = Problem::Circle;
    let res = || -> Result<Verdict, String> {
        let cloud = problem.sample(Size::Count(2048), 0).map_err(|e| e.to_string())?;
        let eps = tune_epsilon(&cloud, 50).map_err(|e| e.to_string())?.chosen_epsilon;
        let mut errs = Vec::new();
        for dt in [2e-3, 1e-3] {
            let settings = RunSettings { k: 50, dt, t_end: 2.0, ..RunSettings::default() };
            errs.push(run_problem(problem, &cloud, Method::Dm, eps, &settings, &[]).map_err(|e| e.to_string())?.max_linf_over_time);
        }
        let ratio = errs[0] / errs[1];
        Ok(((1.6..=2.4).contains(&ratio), format!("eps {eps:.3e}, max-over-time errors {:.3e} -> {:.3e}, ratio {ratio:.3}", errs[0], errs[1])))
    };
    res().unwrap_or_else(|e| (false, e))
}

fn normal_accuracy() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for seed in 0..10 {
        let cloud = sample_semi_torus(4096, Sampling::Random { seed }).unwrap();
        let eps = tune_epsilon(&cloud, 200).unwrap().chosen_epsilon;
        let normals = match estimate_normals_kernel(&cloud, eps, 50, 10) {
            Ok(v) => v,
            Err(e) => return (false, e.to_string()),
        };
        let err = normals.chunks(3).map(|v| (v[0] * v[0] + (v[1] + 1.0) * (v[1] + 1.0) + v[2] * v[2]).sqrt()).fold(0.0, f64::max);
        let ratio = err / eps.sqrt();
        ok &= ratio <= NORMAL_C;
        worst = worst.max(ratio);
    }
    (ok, format!("10 seeds, max_b |nu_est - nu| / sqrt(eps) = {worst:.3} <= C = {NORMAL_C}"))
}

fn main() -> ExitCode {
    let checks: [(&str, fn() -> Verdict); 11] = [
        ("criterion 1", operator_structure),
        ("criterion 1 (ingested cloud)", ingestion_smoke),
        ("criterion 2", stability),
        ("criterion 3", extrapolation),
        ("criterion 4", circle_consistency),
        ("criterion 5", annulus_convergence),
        ("criterion 6", random_convergence),
        ("criterion 7", boundary_superiority),
        ("criterion 8", burgers),
        ("criterion 9", temporal_order),
        ("criterion 10", normal_accuracy),
    ];
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (name, check) in checks {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let t0 = Instant::now();
        let (ok, detail) = check();
        if !ok {
            failed += 1;
        }
        println!("{name}: {} ({detail}) [{:.1} s]", if ok { "PASS" } else { "FAIL" }, t0.elapsed().as_secs_f64());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

//! Local kernels, bandwidth tuning and DM / VCDM operator assembly.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{exp, log, pow, round, sqrt};

use crate::error::{arg, Error, Result};
use crate::geometry::{NeighborLists, PointCloud};
use crate::knn::KdTree;
use crate::sparse::CsrMatrix;

/// Kernel values below this are dropped from the sparse pattern.
pub const DROP_TOL: f64 = 1e-15;

/// How kernel rows are scaled into a generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Each column divided by a kernel density estimate `q_j`, then by `eps`.
    #[default]
    Density,
    /// `eps^(-d/2-1) / (m0 * N)` times the raw kernel.
    Unnormalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Dm,
    Gpdm,
    Vcdm,
}

/// Bandwidth, neighbor count and optional drift / diffusion shape.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelConfig {
    pub epsilon: f64,
    pub k: usize,
    /// Intrinsic dimension used by the unnormalized scaling.
    pub d: usize,
    /// Per-row ambient drift `A(x_i)`, flat `rows * m`.
    pub drift: Option<Vec<f64>>,
    /// Per-row `C(x_i)^{-1}`, flat `rows * m * m`. `None` means `I / 2`.
    pub cinv: Option<Vec<f64>>,
    pub normalization: Normalization,
}

impl KernelConfig {
    pub fn new(epsilon: f64, k: usize, d: usize) -> Self {
        Self { epsilon, k, d, drift: None, cinv: None, normalization: Normalization::Density }
    }

    pub fn with_drift(mut self, drift: Vec<f64>) -> Self {
        self.drift = Some(drift);
        self
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    fn validate(&self, rows: usize, m: usize) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(arg(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.k == 0 {
            return Err(arg("k must be positive"));
        }
        if let Some(a) = &self.drift {
            if a.len() != rows * m {
                return Err(arg(format!("drift has {} values, expected {}", a.len(), rows * m)));
            }
        }
        if let Some(c) = &self.cinv {
            if c.len() != rows * m * m {
                return Err(arg("cinv does not match rows * m * m"));
            }
        }
        Ok(())
    }
}

/// `(4 pi)^(d/2)`.
pub fn m0(d: usize) -> f64 {
    pow(4.0 * PI, d as f64 / 2.0)
}

/// `exp(-|x + eps A - y|^2 / (4 eps))`.
pub fn eval_local_kernel(x: &[f64], y: &[f64], eps: f64, drift: Option<&[f64]>) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() {
        let a = drift.map_or(0.0, |a| a[i]);
        let z = x[i] + eps * a - y[i];
        s += z * z;
    }
    exp(-s / (4.0 * eps))
}

/// `exp(-z^T Cinv z / (2 eps))` with `z = x + eps A - y` and row-major `cinv`.
pub fn eval_general_kernel(x: &[f64], y: &[f64], eps: f64, drift: Option<&[f64]>, cinv: &[f64]) -> f64 {
    let m = x.len();
    let z: Vec<f64> = (0..m).map(|i| x[i] + eps * drift.map_or(0.0, |a| a[i]) - y[i]).collect();
    let mut q = 0.0;
    for i in 0..m {
        for j in 0..m {
            q += z[i] * cinv[i * m + j] * z[j];
        }
    }
    exp(-q / (2.0 * eps))
}

fn row_kernel(cfg: &KernelConfig, row: usize, x: &[f64], y: &[f64]) -> f64 {
    let m = x.len();
    let a = cfg.drift.as_ref().map(|a| &a[row * m..(row + 1) * m]);
    match &cfg.cinv {
        None => eval_local_kernel(x, y, cfg.epsilon, a),
        Some(c) => eval_general_kernel(x, y, cfg.epsilon, a, &c[row * m * m..(row + 1) * m * m]),
    }
}

/// Assembles an `n x nb` generator whose rows are the first `n` columns.
///
/// The pattern is the (k+1)-nearest set of each row among the columns,
/// symmetrized by union inside the leading square block. The diagonal is
/// minus the off-diagonal row sum, so rows sum to zero.
pub fn assemble_rect(rows: usize, cols: &[f64], m: usize, cfg: &KernelConfig) -> Result<CsrMatrix> {
    if m == 0 || cols.len() % m != 0 {
        return Err(arg("column buffer is not a multiple of the ambient dimension"));
    }
    let nb = cols.len() / m;
    if rows == 0 || rows > nb {
        return Err(arg(format!("rows {rows} must be in 1..={nb}")));
    }
    cfg.validate(rows, m)?;
    let k = cfg.k.min(nb - 1);
    let eps = cfg.epsilon;
    let tree = KdTree::new(cols, m);
    let pt = |i: usize| &cols[i * m..(i + 1) * m];

    let mut pattern: Vec<Vec<usize>> = (0..rows)
        .map(|i| tree.nearest(pt(i), k + 1, None).into_iter().map(|(_, j)| j).collect())
        .collect();
    for i in 0..rows {
        for p in 0..pattern[i].len() {
            let c = pattern[i][p];
            if c < rows && c != i {
                pattern[c].push(i);
            }
        }
    }

    let scale: Vec<f64> = match cfg.normalization {
        Normalization::Density => (0..nb)
            .map(|j| {
                let q: f64 = tree
                    .nearest(pt(j), k + 1, None)
                    .into_iter()
                    .map(|(d2, _)| exp(-d2 / (4.0 * eps)))
                    .sum();
                1.0 / (q * eps)
            })
            .collect(),
        Normalization::Unnormalized => {
            let c = pow(eps, -(cfg.d as f64) / 2.0 - 1.0) / (m0(cfg.d) * nb as f64);
            vec![c; nb]
        }
    };

    let mut out = Vec::with_capacity(rows);
    for (i, pat) in pattern.iter_mut().enumerate() {
        pat.sort_unstable();
        pat.dedup();
        let mut row = Vec::with_capacity(pat.len());
        let mut sum = 0.0;
        for &j in pat.iter() {
            if j == i {
                continue;
            }
            let kv = row_kernel(cfg, i, pt(i), pt(j));
            if kv < DROP_TOL {
                continue;
            }
            let v = kv * scale[j];
            sum += v;
            row.push((j, v));
        }
        row.push((i, -sum));
        out.push(row);
    }
    Ok(CsrMatrix::from_rows(nb, out))
}

/// Sparse generator with its construction metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionOperator {
    pub matrix: CsrMatrix,
    pub epsilon: f64,
    pub k: usize,
    pub d: usize,
    pub m0: f64,
    pub kind: OperatorKind,
    pub boundary: Vec<usize>,
}

/// DM estimator of the Laplace-Beltrami operator plus drift on the whole cloud.
pub fn assemble_dm_operator(cloud: &PointCloud, cfg: &KernelConfig) -> Result<DiffusionOperator> {
    let matrix = assemble_rect(cloud.len(), cloud.coords(), cloud.ambient_dim(), cfg)?;
    Ok(DiffusionOperator {
        matrix,
        epsilon: cfg.epsilon,
        k: cfg.k,
        d: cfg.d,
        m0: m0(cfg.d),
        kind: OperatorKind::Dm,
        boundary: cloud.boundary().to_vec(),
    })
}

/// How the tuned bandwidth is picked from the slope curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TuneRule {
    /// Grid point of maximal slope.
    #[default]
    MaxSlope,
    /// Grid point whose slope is closest to `d/2`, searched at or below the maximal-slope point.
    HalfDim(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthReport {
    pub epsilon_grid: Vec<f64>,
    pub log_s: Vec<f64>,
    pub slopes: Vec<f64>,
    pub chosen_epsilon: f64,
    pub estimated_dim: f64,
}

/// 121 log-spaced values on `[2^-14, 10]`.
pub fn default_epsilon_grid() -> Vec<f64> {
    log_grid(pow(2.0, -14.0), 10.0, 121)
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (log(lo), log(hi));
    (0..n).map(|i| exp(a + (b - a) * i as f64 / (n - 1) as f64)).collect()
}

/// Slope of `log S(eps)` against `log eps`, where `S` averages the kernel over
/// each point's neighbor list including the point itself.
pub fn tune_bandwidth(neighbors: &NeighborLists, grid: &[f64], rule: TuneRule) -> Result<BandwidthReport> {
    if grid.len() < 3 || grid.windows(2).any(|w| !(w[1] > w[0])) || grid[0] <= 0.0 {
        return Err(arg("epsilon grid must be positive, strictly increasing, with at least 3 points"));
    }
    let n = neighbors.indices.len() / neighbors.k.max(1);
    if n == 0 {
        return Err(arg("empty neighbor lists"));
    }
    let norm = (n * (neighbors.k + 1)) as f64;
    let log_s: Vec<f64> = grid
        .iter()
        .map(|&e| {
            let s: f64 = neighbors.distances.iter().map(|d| exp(-d * d / (4.0 * e))).sum();
            log((s + n as f64) / norm)
        })
        .collect();
    let le: Vec<f64> = grid.iter().map(|&e| log(e)).collect();
    let g = grid.len();
    let slopes: Vec<f64> = (0..g)
        .map(|i| {
            let (a, b) = if i == 0 { (0, 1) } else if i == g - 1 { (g - 2, g - 1) } else { (i - 1, i + 1) };
            (log_s[b] - log_s[a]) / (le[b] - le[a])
        })
        .collect();
    let (imax, smax) = slopes
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, s)| if s > acc.1 { (i, s) } else { acc });
    if !(smax > 1e-12) || !smax.is_finite() {
        return Err(Error::Tuning("log S is flat over the grid".into()));
    }
    let chosen = match rule {
        TuneRule::MaxSlope => imax,
        TuneRule::HalfDim(d) => {
            let target = d as f64 / 2.0;
            (0..=imax)
                .min_by(|&a, &b| (slopes[a] - target).abs().total_cmp(&(slopes[b] - target).abs()))
                .unwrap()
        }
    };
    Ok(BandwidthReport {
        epsilon_grid: grid.to_vec(),
        log_s,
        slopes,
        chosen_epsilon: grid[chosen],
        estimated_dim: 2.0 * smax,
    })
}

/// Distance-ring layer of every point: 0 on the boundary, then
/// `round(dist to boundary / hbar)` with `hbar` the mean boundary-to-interior spacing.
pub fn boundary_layers(cloud: &PointCloud) -> Result<Vec<usize>> {
    let b = cloud.boundary();
    let interior = cloud.interior();
    if b.is_empty() || interior.is_empty() {
        return Err(arg("layers need both boundary and interior points"));
    }
    let m = cloud.ambient_dim();
    let int_coords: Vec<f64> = interior.iter().flat_map(|&i| cloud.point(i).iter().copied()).collect();
    let bnd_coords: Vec<f64> = b.iter().flat_map(|&i| cloud.point(i).iter().copied()).collect();
    let ti = KdTree::new(&int_coords, m);
    let tb = KdTree::new(&bnd_coords, m);
    let hbar = b.iter().map(|&i| sqrt(ti.nearest(cloud.point(i), 1, None)[0].0)).sum::<f64>() / b.len() as f64;
    let mask = cloud.is_boundary_mask();
    Ok((0..cloud.len())
        .map(|i| {
            if mask[i] {
                0
            } else {
                let d = sqrt(tb.nearest(cloud.point(i), 1, None)[0].0);
                (round(d / hbar) as usize).max(1)
            }
        })
        .collect())
}

/// DM operator restricted to points beyond the first `layers` rings.
#[derive(Debug, Clone, PartialEq)]
pub struct VcdmOperator {
    /// Retained-by-retained block.
    pub operator: DiffusionOperator,
    /// Retained rows against removed columns.
    pub coupling: CsrMatrix,
    pub retained: Vec<usize>,
    pub removed: Vec<usize>,
    pub layers: Vec<usize>,
}

pub fn assemble_vcdm_operator(cloud: &PointCloud, cfg: &KernelConfig, truncation_layers: usize) -> Result<VcdmOperator> {
    if truncation_layers == 0 {
        return Err(arg("truncation_layers must be at least 1"));
    }
    let layers = boundary_layers(cloud)?;
    let (retained, removed): (Vec<usize>, Vec<usize>) = (0..cloud.len()).partition(|&i| layers[i] > truncation_layers);
    if retained.is_empty() {
        return Err(arg(format!("truncating {truncation_layers} layers removes every interior point")));
    }
    let full = assemble_dm_operator(cloud, cfg)?;
    let matrix = full.matrix.select(&retained, &retained);
    let coupling = full.matrix.select(&retained, &removed);
    Ok(VcdmOperator {
        operator: DiffusionOperator { matrix, kind: OperatorKind::Vcdm, ..full },
        coupling,
        retained,
        removed,
        layers,
    })
}

//! Point clouds, analytic samplers and neighbor lists.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{cos, sin, sqrt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{arg, Result};
use crate::knn::KdTree;

/// Relative (to the cloud diameter) distance under which two points are duplicates.
pub const DUPLICATE_TOL: f64 = 1e-12;

/// Ambient samples of a manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    coords: Vec<f64>,
    m: usize,
    d: usize,
    boundary: Vec<usize>,
    labels: Vec<f64>,
    label_dim: usize,
}

/// How a sampler places its points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    Grid,
    Random { seed: u64 },
}

impl PointCloud {
    /// Validates and wraps a flat `n * m` coordinate buffer.
    pub fn new(coords: Vec<f64>, m: usize, d: usize, boundary: Vec<usize>) -> Result<Self> {
        if m == 0 || d == 0 || d > m {
            return Err(arg(format!("need m >= d >= 1, got m={m}, d={d}")));
        }
        if coords.len() % m != 0 {
            return Err(arg("coordinate buffer is not a multiple of the ambient dimension"));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(arg("non-finite coordinate"));
        }
        let n = coords.len() / m;
        let mut seen = alloc::vec![false; n];
        for &b in &boundary {
            if b >= n {
                return Err(arg(format!("boundary index {b} out of range")));
            }
            if seen[b] {
                return Err(arg(format!("boundary index {b} repeated")));
            }
            seen[b] = true;
        }
        let cloud = Self { coords, m, d, boundary, labels: Vec::new(), label_dim: 0 };
        if let Some((i, j)) = cloud.find_duplicate() {
            return Err(arg(format!("points {i} and {j} coincide")));
        }
        Ok(cloud)
    }

    /// Attaches per-point parameter coordinates.
    pub fn with_labels(mut self, labels: Vec<f64>, label_dim: usize) -> Result<Self> {
        if label_dim == 0 || labels.len() != label_dim * self.len() {
            return Err(arg("label buffer does not match the cloud"));
        }
        self.labels = labels;
        self.label_dim = label_dim;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.m
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn ambient_dim(&self) -> usize {
        self.m
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.d
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.m..(i + 1) * self.m]
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn is_boundary_mask(&self) -> Vec<bool> {
        let mut mask = alloc::vec![false; self.len()];
        for &b in &self.boundary {
            mask[b] = true;
        }
        mask
    }

    pub fn interior(&self) -> Vec<usize> {
        let mask = self.is_boundary_mask();
        (0..self.len()).filter(|&i| !mask[i]).collect()
    }

    pub fn label_dim(&self) -> usize {
        self.label_dim
    }

    pub fn label(&self, i: usize) -> Option<&[f64]> {
        (self.label_dim > 0).then(|| &self.labels[i * self.label_dim..(i + 1) * self.label_dim])
    }

    /// Largest coordinate extent; a cheap proxy for the diameter.
    pub fn diameter(&self) -> f64 {
        let mut ext2 = 0.0;
        for d in 0..self.m {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for i in 0..self.len() {
                lo = lo.min(self.coords[i * self.m + d]);
                hi = hi.max(self.coords[i * self.m + d]);
            }
            ext2 += (hi - lo) * (hi - lo);
        }
        sqrt(ext2)
    }

    fn find_duplicate(&self) -> Option<(usize, usize)> {
        if self.len() < 2 {
            return None;
        }
        let tol = DUPLICATE_TOL * self.diameter().max(f64::MIN_POSITIVE);
        let tree = KdTree::new(&self.coords, self.m);
        for i in 0..self.len() {
            let nn = tree.nearest(self.point(i), 1, Some(i));
            if let Some(&(d2, j)) = nn.first() {
                if sqrt(d2) <= tol {
                    return Some((i.min(j), i.max(j)));
                }
            }
        }
        None
    }
}

/// Removes points closer than `DUPLICATE_TOL * diameter` to an earlier point.
/// Returns the kept coordinates and, for every input row, its kept index.
pub fn dedup_points(coords: &[f64], m: usize) -> (Vec<f64>, Vec<usize>) {
    let n = coords.len() / m;
    let mut ext2 = 0.0;
    for d in 0..m {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            lo = lo.min(coords[i * m + d]);
            hi = hi.max(coords[i * m + d]);
        }
        if n > 0 {
            ext2 += (hi - lo) * (hi - lo);
        }
    }
    let tol = DUPLICATE_TOL * sqrt(ext2);
    let tree = KdTree::new(coords, m);
    let mut map = alloc::vec![usize::MAX; n];
    let mut kept = Vec::new();
    let mut count = 0;
    for i in 0..n {
        let close = tree.within(&coords[i * m..(i + 1) * m], tol * tol);
        match close.iter().find(|&&j| j < i) {
            Some(&j) => map[i] = map[j],
            None => {
                map[i] = count;
                count += 1;
                kept.extend_from_slice(&coords[i * m..(i + 1) * m]);
            }
        }
    }
    (kept, map)
}

/// Annulus in R^5 on an `i x j` grid over `[0, 2pi) x [pi/4, pi/2]`. Labels are (theta, phi).
pub fn sample_annulus(i: usize, j: usize) -> Result<PointCloud> {
    if i < 3 || j < 2 {
        return Err(arg(format!("annulus grid needs I >= 3 and J >= 2, got ({i}, {j})")));
    }
    let mut coords = Vec::with_capacity(i * j * 5);
    let mut labels = Vec::with_capacity(i * j * 2);
    let mut boundary = Vec::new();
    for a in 0..i {
        let th = 2.0 * PI * a as f64 / i as f64;
        for b in 0..j {
            let ph = if b == j - 1 { PI / 2.0 } else { PI / 4.0 + (PI / 4.0) * b as f64 / (j - 1) as f64 };
            coords.extend_from_slice(&annulus_embed(th, ph));
            labels.extend_from_slice(&[th, ph]);
            if b == 0 || b == j - 1 {
                boundary.push(a * j + b);
            }
        }
    }
    PointCloud::new(coords, 5, 2, boundary)?.with_labels(labels, 2)
}

pub fn annulus_embed(th: f64, ph: f64) -> [f64; 5] {
    let s = sin(ph);
    [s * cos(th), s * sin(th), s * cos(2.0 * th), s * sin(2.0 * th), sqrt(2.0) * cos(ph)]
}

/// Unit circle, equispaced. Label is theta.
pub fn sample_circle(n: usize) -> Result<PointCloud> {
    if n < 4 {
        return Err(arg("circle needs at least 4 points"));
    }
    let mut coords = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for a in 0..n {
        let th = 2.0 * PI * a as f64 / n as f64;
        coords.extend_from_slice(&[cos(th), sin(th)]);
        labels.push(th);
    }
    PointCloud::new(coords, 2, 1, Vec::new())?.with_labels(labels, 1)
}

/// Ellipse `(cos t, 2 sin t)`. Random mode draws t uniformly on `[0, 2pi)`.
pub fn sample_ellipse(n: usize, mode: Sampling) -> Result<PointCloud> {
    if n < 4 {
        return Err(arg("ellipse needs at least 4 points"));
    }
    let thetas: Vec<f64> = match mode {
        Sampling::Grid => (0..n).map(|a| 2.0 * PI * a as f64 / n as f64).collect(),
        Sampling::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| 2.0 * PI * rng.random::<f64>()).collect()
        }
    };
    let coords = thetas.iter().flat_map(|&t| [cos(t), 2.0 * sin(t)]).collect();
    PointCloud::new(coords, 2, 1, Vec::new())?.with_labels(thetas, 1)
}

pub fn semi_torus_embed(th: f64, ph: f64) -> [f64; 3] {
    let r = 2.0 + cos(th);
    [r * cos(ph), r * sin(ph), sin(th)]
}

/// Semi-torus over `theta in [0, 2pi)`, `phi in [0, pi]`. Labels are (theta, phi).
///
/// Grid mode needs a square `n`; boundary points are the rows with phi = 0 or pi.
/// Random mode draws `n` interior parameter pairs uniformly and appends
/// `ceil(sqrt(n))` equispaced points on each boundary circle.
pub fn sample_semi_torus(n: usize, mode: Sampling) -> Result<PointCloud> {
    if n < 16 {
        return Err(arg("semi-torus needs at least 16 points"));
    }
    let mut params: Vec<(f64, f64)> = Vec::new();
    let mut boundary = Vec::new();
    match mode {
        Sampling::Grid => {
            let s = libm::round(sqrt(n as f64)) as usize;
            if s * s != n {
                return Err(arg(format!("grid semi-torus needs a square count, got {n}")));
            }
            for a in 0..s {
                let th = 2.0 * PI * a as f64 / s as f64;
                for b in 0..s {
                    let ph = if b == s - 1 { PI } else { PI * b as f64 / (s - 1) as f64 };
                    if b == 0 || b == s - 1 {
                        boundary.push(params.len());
                    }
                    params.push((th, ph));
                }
            }
        }
        Sampling::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..n {
                let th = 2.0 * PI * rng.random::<f64>();
                let ph = PI * rng.random::<f64>();
                params.push((th, ph));
            }
            let nb = libm::ceil(sqrt(n as f64)) as usize;
            for ph in [0.0, PI] {
                for a in 0..nb {
                    boundary.push(params.len());
                    params.push((2.0 * PI * a as f64 / nb as f64, ph));
                }
            }
        }
    }
    let coords = params.iter().flat_map(|&(t, p)| semi_torus_embed(t, p)).collect();
    let labels = params.iter().flat_map(|&(t, p)| [t, p]).collect();
    PointCloud::new(coords, 3, 2, boundary)?.with_labels(labels, 2)
}

/// Curve `(t, sin t)` for `t in [0, 4pi]`, equispaced, endpoints on the boundary.
pub fn sample_sine_curve(n: usize) -> Result<PointCloud> {
    if n < 4 {
        return Err(arg("sine curve needs at least 4 points"));
    }
    let ts: Vec<f64> = (0..n)
        .map(|a| if a == n - 1 { 4.0 * PI } else { 4.0 * PI * a as f64 / (n - 1) as f64 })
        .collect();
    let coords = ts.iter().flat_map(|&t| [t, sin(t)]).collect();
    PointCloud::new(coords, 2, 1, alloc::vec![0, n - 1])?.with_labels(ts, 1)
}

/// The `k` nearest neighbors of every point, self excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborLists {
    pub k: usize,
    /// Row-major `n * k` neighbor indices, ascending by distance.
    pub indices: Vec<usize>,
    /// Matching Euclidean distances.
    pub distances: Vec<f64>,
}

impl NeighborLists {
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.indices[i * self.k..(i + 1) * self.k]
    }

    pub fn dists(&self, i: usize) -> &[f64] {
        &self.distances[i * self.k..(i + 1) * self.k]
    }
}

/// Exact kNN search; ties go to the lower index.
pub fn knn_search(cloud: &PointCloud, k: usize) -> Result<NeighborLists> {
    let n = cloud.len();
    if k == 0 || k >= n {
        return Err(arg(format!("need 1 <= k < N, got k={k}, N={n}")));
    }
    let tree = KdTree::new(cloud.coords(), cloud.ambient_dim());
    let mut indices = Vec::with_capacity(n * k);
    let mut distances = Vec::with_capacity(n * k);
    for i in 0..n {
        for (d2, j) in tree.nearest(cloud.point(i), k, Some(i)) {
            indices.push(j);
            distances.push(sqrt(d2));
        }
    }
    Ok(NeighborLists { k, indices, distances })
}

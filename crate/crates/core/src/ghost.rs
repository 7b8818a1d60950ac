//! Boundary normals, ghost collars, extrapolation and GPDM assembly.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::{ceil, exp, sqrt};
use nalgebra::DMatrix;

use crate::error::{arg, Error, Result};
use crate::geometry::{PointCloud, DUPLICATE_TOL};
use crate::kernel::{assemble_rect, KernelConfig};
use crate::knn::KdTree;
use crate::sparse::CsrMatrix;

/// Collar depth in units of `sqrt(eps)` used by [`default_ghost_layers`].
pub const DEFAULT_COLLAR: f64 = 6.0;

/// Neighbor count used by [`estimate_h`] by default.
pub const DEFAULT_H_NEIGHBORS: usize = 10;

fn unit(v: &mut [f64]) -> f64 {
    let n = sqrt(v.iter().map(|x| x * x).sum());
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Secant normal of one boundary point on well-sampled data.
#[derive(Debug, Clone, PartialEq)]
pub struct SecantNormal {
    pub normal: Vec<f64>,
    /// Distance to the interior point the secant starts from.
    pub h: f64,
    pub interior: usize,
}

/// Normalized secant from the nearest non-boundary point to `x_b`.
pub fn estimate_normal_secant(cloud: &PointCloud, b: usize) -> Result<SecantNormal> {
    let mask = cloud.is_boundary_mask();
    let x = cloud.point(b);
    let best = (0..cloud.len())
        .filter(|&j| !mask[j])
        .map(|j| (dist(x, cloud.point(j)), j))
        .min_by(|a, c| a.0.total_cmp(&c.0).then(a.1.cmp(&c.1)));
    secant_from(cloud, b, best)
}

fn secant_from(cloud: &PointCloud, b: usize, best: Option<(f64, usize)>) -> Result<SecantNormal> {
    let (h, j) = best.ok_or_else(|| Error::Normal { index: b, reason: "no interior point".into() })?;
    let mut normal: Vec<f64> = cloud.point(b).iter().zip(cloud.point(j)).map(|(a, c)| a - c).collect();
    if unit(&mut normal) == 0.0 {
        return Err(Error::Normal { index: b, reason: "interior neighbor coincides".into() });
    }
    Ok(SecantNormal { normal, h, interior: j })
}

/// Secant normals for every boundary point, in boundary order.
pub fn estimate_normals_secant(cloud: &PointCloud) -> Result<Vec<SecantNormal>> {
    let interior = cloud.interior();
    let m = cloud.ambient_dim();
    let coords: Vec<f64> = interior.iter().flat_map(|&i| cloud.point(i).iter().copied()).collect();
    let tree = KdTree::new(&coords, m);
    cloud
        .boundary()
        .iter()
        .map(|&b| {
            let best = tree.nearest(cloud.point(b), 1, None).first().map(|&(d2, p)| (sqrt(d2), interior[p]));
            secant_from(cloud, b, best)
        })
        .collect()
}

/// Mean distance from `x_b` to its `p` nearest neighbors.
pub fn estimate_h(cloud: &PointCloud, b: usize, p: usize) -> Result<f64> {
    if p == 0 || p >= cloud.len() {
        return Err(arg(format!("need 1 <= P < N, got {p}")));
    }
    let tree = KdTree::new(cloud.coords(), cloud.ambient_dim());
    let nn = tree.nearest(cloud.point(b), p, Some(b));
    Ok(nn.iter().map(|(d2, _)| sqrt(*d2)).sum::<f64>() / p as f64)
}

fn weighted_left_singular(x: &[f64], nbrs: &[(f64, usize)], pts: &[f64], m: usize, eps: f64) -> (DMatrix<f64>, Vec<f64>) {
    let mut a = DMatrix::<f64>::zeros(m, nbrs.len());
    for (c, &(d2, j)) in nbrs.iter().enumerate() {
        let w = exp(-d2 / (4.0 * eps));
        for r in 0..m {
            a[(r, c)] = w * (pts[j * m + r] - x[r]);
        }
    }
    let svd = a.svd(true, false);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&p, &q| svd.singular_values[q].total_cmp(&svd.singular_values[p]));
    let u = svd.u.unwrap();
    let cols: Vec<_> = order.iter().map(|&i| u.column(i).into_owned()).collect();
    let sv = order.iter().map(|&i| svd.singular_values[i]).collect();
    (DMatrix::from_columns(&cols), sv)
}

/// Relative singular-value floor below which a local frame is rank deficient.
pub const RANK_TOL: f64 = 1e-8;

/// Kernel-weighted SVD normals for random data, flat `B * m`.
///
/// Tangents from `k` manifold neighbors, boundary tangents from `k_boundary`
/// boundary neighbors; the normal is the tangent direction with the largest
/// residual against the boundary tangents, signed to point away from the
/// neighbor mean.
pub fn estimate_normals_kernel(cloud: &PointCloud, eps: f64, k: usize, k_boundary: usize) -> Result<Vec<f64>> {
    let d = cloud.intrinsic_dim();
    let m = cloud.ambient_dim();
    let bnd = cloud.boundary();
    if bnd.len() < d {
        return Err(arg("not enough boundary points for the boundary frame"));
    }
    if k <= d || k >= cloud.len() {
        return Err(arg(format!("need d < k < N, got k={k}")));
    }
    let kb = k_boundary.min(bnd.len().saturating_sub(1));
    if d > 1 && kb < d - 1 {
        return Err(arg("k_boundary too small for the boundary frame"));
    }
    let tree = KdTree::new(cloud.coords(), m);
    let bcoords: Vec<f64> = bnd.iter().flat_map(|&i| cloud.point(i).iter().copied()).collect();
    let btree = KdTree::new(&bcoords, m);
    let mut out = Vec::with_capacity(bnd.len() * m);
    for (bi, &b) in bnd.iter().enumerate() {
        let x = cloud.point(b);
        let nn = tree.nearest(x, k, Some(b));
        let (t, sv) = weighted_left_singular(x, &nn, cloud.coords(), m, eps);
        if sv.len() < d || !(sv[d - 1] > RANK_TOL * sv[0]) {
            return Err(Error::Normal { index: b, reason: "tangent frame is rank deficient".into() });
        }
        let s = if d > 1 {
            let nb = btree.nearest(x, kb, Some(bi));
            let (s, ssv) = weighted_left_singular(x, &nb, &bcoords, m, eps);
            if ssv.len() < d - 1 || !(ssv[d - 2] > RANK_TOL * ssv[0].max(f64::MIN_POSITIVE)) {
                return Err(Error::Normal { index: b, reason: "boundary frame is rank deficient".into() });
            }
            s.columns(0, d - 1).into_owned()
        } else {
            DMatrix::zeros(m, 0)
        };
        let mut best: Option<Vec<f64>> = None;
        let mut best_norm = -1.0;
        for p in 0..d {
            let mut r: Vec<f64> = t.column(p).iter().copied().collect();
            for c in 0..s.ncols() {
                let proj: f64 = (0..m).map(|i| r[i] * s[(i, c)]).sum();
                for i in 0..m {
                    r[i] -= proj * s[(i, c)];
                }
            }
            let nr = sqrt(r.iter().map(|v| v * v).sum());
            if nr > best_norm {
                best_norm = nr;
                best = Some(r);
            }
        }
        let mut nu = best.unwrap();
        if unit(&mut nu) <= RANK_TOL {
            return Err(Error::Normal { index: b, reason: "normal residual vanished".into() });
        }
        let mean: Vec<f64> = (0..m)
            .map(|r| nn.iter().map(|&(_, j)| cloud.point(j)[r] - x[r]).sum::<f64>() / nn.len() as f64)
            .collect();
        if nu.iter().zip(&mean).map(|(a, c)| a * c).sum::<f64>() > 0.0 {
            nu.iter_mut().for_each(|v| *v = -*v);
        }
        out.extend(nu);
    }
    Ok(out)
}

/// `max(2, ceil(collar * sqrt(eps) / h))`.
pub fn default_ghost_layers(eps: f64, h: f64, collar: f64) -> usize {
    (ceil(collar * sqrt(eps) / h) as usize).max(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GhostMode {
    /// Interior ghosts snap onto an existing interior point within `h/2`.
    WellSampled,
    /// Interior ghosts are always appended as new points.
    Random,
}

/// Where the interior ghost `x_b - h nu` lives in the augmented point set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InteriorGhost {
    Snapped(usize),
    Appended(usize),
}

impl InteriorGhost {
    pub fn index(self) -> usize {
        match self {
            Self::Snapped(i) | Self::Appended(i) => i,
        }
    }
}

/// Ghost collar around the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct GhostFrame {
    pub m: usize,
    pub boundary: Vec<usize>,
    /// Flat `B * m` unit normals.
    pub normals: Vec<f64>,
    pub h: Vec<f64>,
    pub layers: usize,
    /// Flat `K * B * m`, layer-major: ghost (b, k) starts at `((k-1) B + b) m`.
    pub exterior: Vec<f64>,
    /// Flat `B * m` coordinates of `x_b - h nu`.
    pub interior_ghosts: Vec<f64>,
    pub merge: Vec<InteriorGhost>,
    /// Size of the augmented set: cloud plus appended interior ghosts.
    pub n_aug: usize,
}

impl GhostFrame {
    pub fn ghost(&self, b: usize, k: usize) -> &[f64] {
        let s = ((k - 1) * self.boundary.len() + b) * self.m;
        &self.exterior[s..s + self.m]
    }

    /// Coordinates of the augmented set: the cloud, then appended interior ghosts.
    pub fn augmented_points(&self, cloud: &PointCloud) -> Vec<f64> {
        let mut pts = cloud.coords().to_vec();
        for (b, g) in self.merge.iter().enumerate() {
            if let InteriorGhost::Appended(_) = g {
                pts.extend_from_slice(&self.interior_ghosts[b * self.m..(b + 1) * self.m]);
            }
        }
        pts
    }
}

/// Places `x_b + k h nu` for `k = 1..=K` and the interior ghosts `x_b - h nu`.
pub fn build_ghost_points(cloud: &PointCloud, normals: &[f64], h: &[f64], layers: usize, mode: GhostMode) -> Result<GhostFrame> {
    let m = cloud.ambient_dim();
    let bnd = cloud.boundary().to_vec();
    let nb = bnd.len();
    if layers == 0 {
        return Err(arg("need at least one ghost layer"));
    }
    if normals.len() != nb * m || h.len() != nb {
        return Err(arg("normals / spacings do not match the boundary"));
    }
    if h.iter().any(|&v| !(v > 0.0)) {
        return Err(arg("ghost spacing must be positive"));
    }
    let mut exterior = Vec::with_capacity(layers * nb * m);
    for k in 1..=layers {
        for b in 0..nb {
            let x = cloud.point(bnd[b]);
            exterior.extend((0..m).map(|r| x[r] + k as f64 * h[b] * normals[b * m + r]));
        }
    }
    let mut interior_ghosts = Vec::with_capacity(nb * m);
    for b in 0..nb {
        let x = cloud.point(bnd[b]);
        interior_ghosts.extend((0..m).map(|r| x[r] - h[b] * normals[b * m + r]));
    }
    let tol = DUPLICATE_TOL * cloud.diameter();
    let tree = KdTree::new(cloud.coords(), m);
    for g in exterior.chunks(m) {
        let (d2, j) = tree.nearest(g, 1, None)[0];
        if sqrt(d2) <= tol {
            return Err(Error::Ghost(format!("exterior ghost collides with point {j}")));
        }
    }
    let mask = cloud.is_boundary_mask();
    let interior = cloud.interior();
    let icoords: Vec<f64> = interior.iter().flat_map(|&i| cloud.point(i).iter().copied()).collect();
    let itree = KdTree::new(&icoords, m);
    let mut merge = Vec::with_capacity(nb);
    let mut taken = vec![false; cloud.len()];
    let mut next = cloud.len();
    for b in 0..nb {
        let g = &interior_ghosts[b * m..(b + 1) * m];
        let near = itree.nearest(g, 1, None).first().map(|&(d2, p)| (sqrt(d2), interior[p]));
        match (mode, near) {
            (GhostMode::WellSampled, Some((d, j))) if d <= 0.5 * h[b] => {
                if taken[j] {
                    return Err(Error::Ghost(format!("two interior ghosts snap onto point {j}")));
                }
                taken[j] = true;
                merge.push(InteriorGhost::Snapped(j));
            }
            _ => {
                let (d2, j) = tree.nearest(g, 1, None)[0];
                if sqrt(d2) <= tol {
                    return Err(Error::Ghost(format!("interior ghost collides with point {j}")));
                }
                merge.push(InteriorGhost::Appended(next));
                next += 1;
            }
        }
    }
    debug_assert!(mask.len() == cloud.len());
    Ok(GhostFrame { m, boundary: bnd, normals: normals.to_vec(), h: h.to_vec(), layers, exterior, interior_ghosts, merge, n_aug: next })
}

/// Maps augmented-set values to ghost values, `BK x n_aug`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtrapolationMatrix {
    pub g: CsrMatrix,
}

/// `U_{b,k} = (k+1) u(x_b) - k u(x_{b,0})`.
pub fn build_extrapolation_matrix(frame: &GhostFrame) -> ExtrapolationMatrix {
    let nb = frame.boundary.len();
    let mut rows = Vec::with_capacity(nb * frame.layers);
    for k in 1..=frame.layers {
        for b in 0..nb {
            rows.push(vec![(frame.boundary[b], (k + 1) as f64), (frame.merge[b].index(), -(k as f64))]);
        }
    }
    ExtrapolationMatrix { g: CsrMatrix::from_rows(frame.n_aug, rows) }
}

/// GPDM matrix on the augmented set with its interior / boundary split.
#[derive(Debug, Clone, PartialEq)]
pub struct GpdmBlocks {
    pub ltilde: CsrMatrix,
    /// Augmented-set indices of unknowns, ascending.
    pub interior: Vec<usize>,
    pub boundary: Vec<usize>,
    pub lii: CsrMatrix,
    pub lib: CsrMatrix,
    pub lbi: CsrMatrix,
    pub lbb: CsrMatrix,
    /// `B x |interior|`, one 1 per row at the interior ghost of `b`.
    pub e: CsrMatrix,
    pub h: Vec<f64>,
    /// Flat coordinates of the augmented set.
    pub points: Vec<f64>,
    pub m: usize,
    pub epsilon: f64,
}

impl GpdmBlocks {
    /// `L^{II} + L^{IB} E`.
    pub fn neumann_matrix(&self) -> Result<CsrMatrix> {
        self.lii.add_scaled(1.0, &self.lib.matmul(&self.e)?)
    }

    pub fn n_aug(&self) -> usize {
        self.points.len() / self.m
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.m..(i + 1) * self.m]
    }
}

/// `L~ = L1 + L2 G` over the augmented set. A drift in `cfg` must cover the augmented rows.
pub fn assemble_gpdm_operator(cloud: &PointCloud, frame: &GhostFrame, cfg: &KernelConfig) -> Result<GpdmBlocks> {
    let m = cloud.ambient_dim();
    let points = frame.augmented_points(cloud);
    let n_aug = frame.n_aug;
    let mut cols = points.clone();
    cols.extend_from_slice(&frame.exterior);
    let l = assemble_rect(n_aug, &cols, m, cfg)?;
    let (l1, l2) = l.split_cols(n_aug);
    let g = build_extrapolation_matrix(frame).g;
    let ltilde = l1.add_scaled(1.0, &l2.matmul(&g)?)?;
    let mut is_b = vec![false; n_aug];
    for &b in &frame.boundary {
        is_b[b] = true;
    }
    let interior: Vec<usize> = (0..n_aug).filter(|&i| !is_b[i]).collect();
    let boundary = frame.boundary.clone();
    let mut pos = vec![usize::MAX; n_aug];
    for (p, &i) in interior.iter().enumerate() {
        pos[i] = p;
    }
    let e_rows = frame.merge.iter().map(|g| vec![(pos[g.index()], 1.0)]).collect();
    let e = CsrMatrix::from_rows(interior.len(), e_rows);
    Ok(GpdmBlocks {
        lii: ltilde.select(&interior, &interior),
        lib: ltilde.select(&interior, &boundary),
        lbi: ltilde.select(&boundary, &interior),
        lbb: ltilde.select(&boundary, &boundary),
        ltilde,
        interior,
        boundary,
        e,
        h: frame.h.clone(),
        points,
        m,
        epsilon: cfg.epsilon,
    })
}

/// Projects an ambient field (flat `N * m`) onto local tangent spaces from a
/// kernel-weighted SVD over `k` neighbors.
pub fn tangent_project(cloud: &PointCloud, field: &[f64], k: usize, eps: f64) -> Result<Vec<f64>> {
    let m = cloud.ambient_dim();
    let d = cloud.intrinsic_dim();
    if field.len() != cloud.len() * m {
        return Err(arg("field does not match the cloud"));
    }
    if d >= m {
        return Err(arg("tangent projection needs d < m"));
    }
    if k <= d || k >= cloud.len() {
        return Err(arg(format!("need d < k < N, got k={k}")));
    }
    let tree = KdTree::new(cloud.coords(), m);
    let mut out = Vec::with_capacity(field.len());
    for i in 0..cloud.len() {
        let x = cloud.point(i);
        let nn = tree.nearest(x, k, Some(i));
        let (t, sv) = weighted_left_singular(x, &nn, cloud.coords(), m, eps);
        if sv.len() < d || !(sv[d - 1] > RANK_TOL * sv[0]) {
            return Err(Error::Normal { index: i, reason: "tangent frame is rank deficient".into() });
        }
        let v = &field[i * m..(i + 1) * m];
        let mut p = vec![0.0; m];
        for c in 0..d {
            let a: f64 = (0..m).map(|r| t[(r, c)] * v[r]).sum();
            for r in 0..m {
                p[r] += a * t[(r, c)];
            }
        }
        out.extend(p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sample_annulus, sample_circle};
    use crate::kernel::assemble_dm_operator;
    use libm::{cos, sin};

    fn unit_interval(n: usize) -> PointCloud {
        let coords = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        PointCloud::new(coords, 1, 1, vec![0, n - 1]).unwrap()
    }

    #[test]
    fn secant_on_line() {
        let c = unit_interval(11);
        let s = estimate_normal_secant(&c, 10).unwrap();
        assert_eq!(s.normal, vec![1.0]);
        assert_eq!(s.interior, 9);
        let s0 = estimate_normal_secant(&c, 0).unwrap();
        assert_eq!(s0.normal, vec![-1.0]);
    }

    #[test]
    fn secant_annulus_outer_normal() {
        let c = sample_annulus(90, 23).unwrap();
        let h = core::f64::consts::FRAC_PI_4 / 22.0;
        for (bi, s) in estimate_normals_secant(&c).unwrap().iter().enumerate() {
            let b = c.boundary()[bi];
            let lab = c.label(b).unwrap();
            let (th, ph) = (lab[0], lab[1]);
            let sign = if ph > 1.0 { 1.0 } else { -1.0 };
            let dphi = [cos(ph) * cos(th), cos(ph) * sin(th), cos(ph) * cos(2.0 * th), cos(ph) * sin(2.0 * th), -sqrt(2.0) * sin(ph)];
            let mut nu: Vec<f64> = dphi.iter().map(|v| sign * v / sqrt(2.0)).collect();
            unit(&mut nu);
            let err = dist(&nu, &s.normal);
            assert!(err < 2.0 * h, "err {err}");
        }
    }

    #[test]
    fn ghosts_on_line() {
        let c = unit_interval(11);
        let normals = vec![-1.0, 1.0];
        let f = build_ghost_points(&c, &normals, &[0.1, 0.1], 2, GhostMode::WellSampled).unwrap();
        assert!((f.ghost(1, 1)[0] - 1.1).abs() < 1e-15);
        assert!((f.ghost(1, 2)[0] - 1.2).abs() < 1e-15);
        assert_eq!(f.merge, vec![InteriorGhost::Snapped(1), InteriorGhost::Snapped(9)]);
        assert_eq!(f.exterior.len(), 2 * 2);
        let r = build_ghost_points(&c, &normals, &[0.05, 0.05], 2, GhostMode::Random).unwrap();
        assert_eq!(r.n_aug, 13);
        assert_eq!(r.merge[1], InteriorGhost::Appended(12));
        assert!(build_ghost_points(&c, &normals, &[0.1, 0.1], 2, GhostMode::Random).is_err());
    }

    #[test]
    fn extrapolation_closed_form() {
        let c = unit_interval(11);
        let f = build_ghost_points(&c, &[-1.0, 1.0], &[0.1, 0.1], 3, GhostMode::WellSampled).unwrap();
        let g = build_extrapolation_matrix(&f).g;
        let mut u = vec![0.0; 11];
        u[10] = 2.0;
        u[9] = 1.0;
        let ug = g.mul_vec(&u);
        assert_eq!([ug[1], ug[3], ug[5]], [3.0, 4.0, 5.0]);
        let uc = g.mul_vec(&vec![0.7; 11]);
        assert!(uc.iter().all(|&v| (v - 0.7).abs() < 1e-15));
    }

    #[test]
    fn empty_boundary_matches_dm() {
        let c = sample_circle(100).unwrap();
        let f = build_ghost_points(&c, &[], &[], 2, GhostMode::WellSampled).unwrap();
        let cfg = KernelConfig::new(0.01, 20, 1);
        let g = assemble_gpdm_operator(&c, &f, &cfg).unwrap();
        let dm = assemble_dm_operator(&c, &cfg).unwrap();
        assert_eq!(g.ltilde, dm.matrix);
    }

    #[test]
    fn tangent_projection_circle() {
        let c = sample_circle(400).unwrap();
        let mut tangent = Vec::new();
        let mut normal = Vec::new();
        for i in 0..c.len() {
            let p = c.point(i);
            tangent.extend([-p[1], p[0]]);
            normal.extend([p[0], p[1]]);
        }
        let pt = tangent_project(&c, &tangent, 10, 1e-3).unwrap();
        let pn = tangent_project(&c, &normal, 10, 1e-3).unwrap();
        for i in 0..pt.len() {
            assert!((pt[i] - tangent[i]).abs() < 0.05);
            assert!(pn[i].abs() < 0.05);
        }
    }

    #[test]
    fn layers_default() {
        assert_eq!(default_ghost_layers(1e-6, 1.0, 6.0), 2);
        assert_eq!(default_ghost_layers(0.0625, 0.5, 6.0), 3);
    }
}

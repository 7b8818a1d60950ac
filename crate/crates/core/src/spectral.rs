//! Eigenbasis of a generator and the pseudo-spectral Burgers scheme.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::sqrt;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::schur::real_schur;
use crate::sparse::CsrMatrix;

/// Complex pairs with `|Im| > IMAG_TOL * |Re|` are discarded.
pub const IMAG_TOL: f64 = 1e-6;

/// Largest accepted scaled eigen-residual `|L v - lambda v|`.
pub const RESIDUAL_LIMIT: f64 = 1e-8;

/// Real eigenpairs of smallest magnitude, vectors scaled to unit mean square.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    pub values: Vec<f64>,
    /// `n x K`, column `k` is mode `k`.
    pub vectors: DMatrix<f64>,
    /// Number of complex eigenvalues skipped.
    pub discarded: usize,
    /// Largest `|Im / Re|` among the skipped pairs, 0 when none.
    pub max_imag_ratio: f64,
    /// Largest scaled residual over the retained modes.
    pub max_residual: f64,
    /// `max |<phi_k, phi_l> - delta_kl|`.
    pub orthogonality_defect: f64,
}

impl EigenBasis {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.vectors.column(k).iter().copied().collect()
    }

    /// Scaled inner products `<phi_k, phi_l> = (1/n) sum_i phi_k(i) phi_l(i)`.
    pub fn gram(&self) -> DMatrix<f64> {
        self.vectors.transpose() * &self.vectors / self.n() as f64
    }

    /// Per-mode defect `max_l |<phi_k, phi_l> - delta_kl|`.
    pub fn defects(&self) -> Vec<f64> {
        let g = self.gram();
        (0..self.len())
            .map(|k| (0..self.len()).map(|l| (g[(k, l)] - if k == l { 1.0 } else { 0.0 }).abs()).fold(0.0, f64::max))
            .collect()
    }
}

fn scaled_norm(v: &[f64]) -> f64 {
    sqrt(v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64)
}

/// `modes` real eigenpairs of smallest magnitude via a dense real Schur form.
pub fn eigendecompose(l0: &CsrMatrix, modes: usize) -> Result<EigenBasis> {
    let n = l0.nrows();
    if n != l0.ncols() {
        return Err(Error::Shape("eigendecompose needs a square matrix".into()));
    }
    if modes == 0 || modes > n {
        return Err(Error::Argument(format!("need 1 <= modes <= {n}, got {modes}")));
    }
    let (q, tv) = real_schur(l0.to_dense(), n)?;
    let t = |i: usize, j: usize| tv[i * n + j];
    let mut real = Vec::new();
    let mut discarded = 0;
    let mut max_imag_ratio: f64 = 0.0;
    let mut i = 0;
    while i < n {
        if i + 1 < n && t(i + 1, i) != 0.0 {
            let (p, r, s, u) = (t(i, i), t(i, i + 1), t(i + 1, i), t(i + 1, i + 1));
            let re = 0.5 * (p + u);
            let disc = 0.25 * (p - u) * (p - u) + r * s;
            if disc >= 0.0 {
                return Err(Error::Eigen(format!("unreduced real 2x2 block at {i}: {p:e} {r:e} {s:e} {u:e} disc {disc:e}")));
            }
            max_imag_ratio = max_imag_ratio.max(sqrt(-disc) / re.abs().max(f64::MIN_POSITIVE));
            discarded += 2;
            i += 2;
        } else {
            real.push(i);
            i += 1;
        }
    }
    real.sort_by(|&p, &r| t(p, p).abs().total_cmp(&t(r, r).abs()).then(p.cmp(&r)));
    if real.len() < modes {
        return Err(Error::Eigen(format!("only {} real eigenvalues, {modes} requested", real.len())));
    }
    real.truncate(modes);
    let tnorm = tv.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let small = f64::EPSILON * tnorm.max(1.0);
    let mut vectors = DMatrix::<f64>::zeros(n, modes);
    let mut values = Vec::with_capacity(modes);
    let mut max_residual: f64 = 0.0;
    for (col, &j) in real.iter().enumerate() {
        let lam = t(j, j);
        let y = schur_vector(&tv, n, j, lam, small);
        let mut v: Vec<f64> = (0..n).map(|i| q[i * n..i * n + j + 1].iter().zip(&y).map(|(a, b)| a * b).sum()).collect();
        let s = scaled_norm(&v);
        let pivot = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        v.iter_mut().for_each(|x| *x *= sign / s);
        let lv = l0.mul_vec(&v);
        let res: Vec<f64> = lv.iter().zip(&v).map(|(a, b)| a - lam * b).collect();
        max_residual = max_residual.max(scaled_norm(&res));
        vectors.set_column(col, &DVector::from_vec(v));
        values.push(lam);
    }
    if !(max_residual <= RESIDUAL_LIMIT * (1.0 + tnorm)) {
        return Err(Error::Eigen(format!("eigen residual {max_residual:e} too large")));
    }
    let mut basis = EigenBasis { values, vectors, discarded, max_imag_ratio, max_residual, orthogonality_defect: 0.0 };
    basis.orthogonality_defect = basis.defects().into_iter().fold(0.0, f64::max);
    Ok(basis)
}

/// Solves `(T - lam I) y = 0` with `y_j = 1`, `y_i = 0` for `i > j`.
fn schur_vector(tv: &[f64], n: usize, j: usize, lam: f64, small: f64) -> Vec<f64> {
    let t = |i: usize, k: usize| tv[i * n + k];
    let mut y = vec![0.0; j + 1];
    y[j] = 1.0;
    let guard = |d: f64| if d.abs() < small { if d < 0.0 { -small } else { small } } else { d };
    let mut i = j;
    while i > 0 {
        let r = i - 1;
        if r > 0 && t(r, r - 1) != 0.0 {
            let (a, b) = (r - 1, r);
            let ra: f64 = -(b + 1..=j).map(|l| t(a, l) * y[l]).sum::<f64>();
            let rb: f64 = -(b + 1..=j).map(|l| t(b, l) * y[l]).sum::<f64>();
            let (p, q, s, u) = (t(a, a) - lam, t(a, b), t(b, a), t(b, b) - lam);
            let det = guard(p * u - q * s);
            y[a] = (ra * u - q * rb) / det;
            y[b] = (p * rb - s * ra) / det;
            i = a;
        } else {
            let rhs: f64 = -(r + 1..=j).map(|l| t(r, l) * y[l]).sum::<f64>();
            y[r] = rhs / guard(t(r, r) - lam);
            i = r;
        }
    }
    y
}

/// `L2 = L1 - L0`.
pub fn assemble_gradient_operator(l1: &CsrMatrix, l0: &CsrMatrix) -> Result<CsrMatrix> {
    l1.add_scaled(-1.0, l0)
}

/// How the modal system is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Galerkin {
    /// Modes treated as orthonormal.
    Plain,
    /// Full mass matrix `<phi_k, phi_l>` kept in the system.
    #[default]
    Gram,
}

/// Modal coefficients at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    pub t: f64,
    pub step: usize,
    pub coeffs: Vec<f64>,
}

/// Implicit pseudo-spectral stepping for `u_t = u grad u + c Lap u + f`.
#[derive(Debug, Clone)]
pub struct BurgersSolver {
    basis: EigenBasis,
    l2phi: DMatrix<f64>,
    gram: DMatrix<f64>,
    galerkin: Galerkin,
    viscosity: f64,
}

impl BurgersSolver {
    pub fn new(basis: EigenBasis, l2: &CsrMatrix, galerkin: Galerkin, viscosity: f64) -> Result<Self> {
        let n = basis.n();
        if l2.nrows() != n || l2.ncols() != n {
            return Err(Error::Shape(format!("gradient operator is {}x{}, basis has {n} rows", l2.nrows(), l2.ncols())));
        }
        let mut l2phi = DMatrix::<f64>::zeros(n, basis.len());
        for k in 0..basis.len() {
            l2phi.set_column(k, &DVector::from_vec(l2.mul_vec(&basis.vector(k))));
        }
        let gram = basis.gram();
        Ok(Self { basis, l2phi, gram, galerkin, viscosity })
    }

    pub fn basis(&self) -> &EigenBasis {
        &self.basis
    }

    /// Least-squares coefficients of `values` in the basis.
    pub fn project(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.basis.n() {
            return Err(Error::Shape("projection length".into()));
        }
        let svd = self.basis.vectors.clone().svd(true, true);
        let c = svd
            .solve(&DVector::from_column_slice(values), 1e-12)
            .map_err(|e| Error::Eigen(format!("least squares failed: {e}")))?;
        Ok(c.iter().copied().collect())
    }

    pub fn reconstruct(&self, coeffs: &[f64]) -> Vec<f64> {
        reconstruct(&self.basis, coeffs)
    }

    /// Scaled inner products of `values` against every mode.
    pub fn inner(&self, values: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(values);
        (self.basis.vectors.transpose() * v / self.basis.n() as f64).iter().copied().collect()
    }

    /// One step; `f_next` is the forcing on the grid at `t_{n+1}`, `None` for zero.
    pub fn step(&self, state: &SpectralState, f_next: Option<&[f64]>, dt: f64, nonlinear: bool) -> Result<SpectralState> {
        let k = self.basis.len();
        let n = self.basis.n();
        if state.coeffs.len() != k {
            return Err(Error::Shape("coefficient length".into()));
        }
        let c = DVector::from_column_slice(&state.coeffs);
        let mut m = DMatrix::<f64>::zeros(k, k);
        if nonlinear {
            let u = &self.basis.vectors * &c;
            let mut w = self.l2phi.clone();
            for (i, ui) in u.iter().enumerate() {
                w.row_mut(i).scale_mut(*ui);
            }
            m = self.basis.vectors.transpose() * w / n as f64;
        }
        let fh = match f_next {
            Some(f) => DVector::from_vec(self.inner(f)),
            None => DVector::zeros(k),
        };
        let lam = DMatrix::from_diagonal(&DVector::from_iterator(k, self.basis.values.iter().map(|l| self.viscosity * l)));
        let (a, rhs) = match self.galerkin {
            Galerkin::Plain => (DMatrix::identity(k, k) - (m + lam) * dt, &c + fh * dt),
            Galerkin::Gram => (&self.gram - (m + &self.gram * lam) * dt, &self.gram * &c + fh * dt),
        };
        let next = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Solve { reason: "singular modal system".into(), residual: f64::NAN })?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solve { reason: "non-finite modal state".into(), residual: f64::NAN });
        }
        Ok(SpectralState { t: (state.step + 1) as f64 * dt, step: state.step + 1, coeffs: next.iter().copied().collect() })
    }
}

/// `sum_k c_k phi_k`.
pub fn reconstruct(basis: &EigenBasis, coeffs: &[f64]) -> Vec<f64> {
    (&basis.vectors * DVector::from_column_slice(coeffs)).iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dirichlet_fd(n: usize) -> CsrMatrix {
        let h = 1.0 / (n + 1) as f64;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, -2.0 / (h * h)));
            if i > 0 {
                t.push((i, i - 1, 1.0 / (h * h)));
            }
            if i + 1 < n {
                t.push((i, i + 1, 1.0 / (h * h)));
            }
        }
        CsrMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn finite_difference_spectrum() {
        let n = 60;
        let b = eigendecompose(&dirichlet_fd(n), 5).unwrap();
        let h = 1.0 / (n + 1) as f64;
        for (k, lam) in b.values.iter().enumerate() {
            let s = libm::sin((k + 1) as f64 * core::f64::consts::PI * h / 2.0);
            let want = -4.0 / (h * h) * s * s;
            assert!((lam - want).abs() < 1e-8 * want.abs(), "{lam} vs {want}");
        }
        assert!(b.orthogonality_defect < 1e-10);
        assert!(b.max_residual < 1e-8);
        for k in 0..5 {
            assert!((scaled_norm(&b.vector(k)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn nonsymmetric_real_spectrum() {
        let mut t = Vec::new();
        let n = 40;
        for i in 0..n {
            t.push((i, i, -2.0 - i as f64 * 0.1));
            if i + 1 < n {
                t.push((i, i + 1, 0.7));
                t.push((i + 1, i, 0.3));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &t).unwrap();
        let b = eigendecompose(&a, 10).unwrap();
        assert_eq!(b.discarded, 0);
        for w in b.values.windows(2) {
            assert!(w[0].abs() <= w[1].abs());
        }
    }

    #[test]
    fn unit_coefficients_reconstruct_modes() {
        let b = eigendecompose(&dirichlet_fd(20), 4).unwrap();
        let r = reconstruct(&b, &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(r, b.vector(1));
    }

    #[test]
    fn linear_step_is_diagonal_update() {
        let b = eigendecompose(&dirichlet_fd(30), 6).unwrap();
        let lam = b.values.clone();
        let s = BurgersSolver::new(b, &CsrMatrix::zeros(30, 30), Galerkin::Plain, 1.0).unwrap();
        let st = SpectralState { t: 0.0, step: 0, coeffs: vec![1.0, -0.5, 0.25, 0.0, 2.0, 1.0] };
        let next = s.step(&st, None, 1e-3, true).unwrap();
        for k in 0..6 {
            let want = st.coeffs[k] / (1.0 - 1e-3 * lam[k]);
            assert!((next.coeffs[k] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_stays_zero() {
        let b = eigendecompose(&dirichlet_fd(30), 6).unwrap();
        let s = BurgersSolver::new(b, &dirichlet_fd(30), Galerkin::Gram, 1.0).unwrap();
        let st = SpectralState { t: 0.0, step: 0, coeffs: vec![0.0; 6] };
        assert_eq!(s.step(&st, None, 1e-3, true).unwrap().coeffs, vec![0.0; 6]);
    }

    #[test]
    fn project_in_span_roundtrip() {
        let b = eigendecompose(&dirichlet_fd(30), 6).unwrap();
        let s = BurgersSolver::new(b, &CsrMatrix::zeros(30, 30), Galerkin::Gram, 1.0).unwrap();
        let c = vec![0.3, -1.0, 0.0, 0.5, 0.1, 2.0];
        let v = s.reconstruct(&c);
        let back = s.project(&v).unwrap();
        for (a, b) in c.iter().zip(&back) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

//! Linear solvers for the (mostly diagonally dominant) implicit Euler systems.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Banded storage budget (entries) before switching to the iterative path.
pub const BAND_BUDGET: usize = 40_000_000;

/// Relative residual demanded from every solve.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Reverse Cuthill-McKee ordering of the symmetrized pattern, `perm[new] = old`.
pub fn rcm_ordering(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for &j in a.row(i).0 {
            if i != j && j < n {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for l in &mut adj {
        l.sort_unstable();
        l.dedup();
    }
    let deg: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (deg[i], i));
    for &start in &by_degree {
        if seen[start] {
            continue;
        }
        let root = peripheral(&adj, start);
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !seen[w]).collect();
            next.sort_by_key(|&w| (deg[w], w));
            for w in next {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn peripheral(adj: &[Vec<usize>], start: usize) -> usize {
    let mut root = start;
    let mut best = 0;
    for _ in 0..4 {
        let (far, depth) = bfs_far(adj, root);
        if depth <= best {
            break;
        }
        best = depth;
        root = far;
    }
    root
}

fn bfs_far(adj: &[Vec<usize>], root: usize) -> (usize, usize) {
    let mut level = vec![usize::MAX; adj.len()];
    level[root] = 0;
    let mut queue = VecDeque::from([root]);
    let mut far = (root, 0);
    while let Some(v) = queue.pop_front() {
        let lv = level[v];
        if lv > far.1 || (lv == far.1 && adj[v].len() < adj[far.0].len()) {
            far = (v, lv);
        }
        for &w in &adj[v] {
            if level[w] == usize::MAX {
                level[w] = lv + 1;
                queue.push_back(w);
            }
        }
    }
    far
}

/// LU without pivoting in band storage, after an RCM permutation.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    lo: usize,
    up: usize,
    perm: Vec<usize>,
    band: Vec<f64>,
}

impl BandedLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let perm = rcm_ordering(a);
        Self::factor_permuted(&a.permute(&perm), perm)
    }

    /// Factors an already permuted matrix `p = P A P^T`.
    pub fn factor_permuted(p: &CsrMatrix, perm: Vec<usize>) -> Result<Self> {
        let n = p.nrows();
        let (lo, up) = p.bandwidth();
        let w = lo + up + 1;
        let mut band = vec![0.0; n * w];
        for i in 0..n {
            let (cols, vals) = p.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                band[i * w + j + lo - i] = v;
            }
        }
        for k in 0..n {
            let piv = band[k * w + lo];
            if !(piv.abs() > 1e-300) || !piv.is_finite() {
                return Err(Error::Solve { reason: format!("zero pivot at row {k}"), residual: f64::NAN });
            }
            let jmax = (k + up).min(n - 1);
            for i in k + 1..=(k + lo).min(n - 1) {
                let ik = i * w + k + lo - i;
                let l = band[ik] / piv;
                if l == 0.0 {
                    continue;
                }
                band[ik] = l;
                for j in k + 1..=jmax {
                    band[i * w + j + lo - i] -= l * band[k * w + j + lo - k];
                }
            }
        }
        Ok(Self { n, lo, up, perm, band })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, lo, up) = (self.n, self.lo, self.up);
        let w = lo + up + 1;
        let mut y: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(lo)..i {
                s -= self.band[i * w + k + lo - i] * y[k];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in i + 1..=(i + up).min(n.saturating_sub(1)) {
                s -= self.band[i * w + j + lo - i] * y[j];
            }
            y[i] = s / self.band[i * w + lo];
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    pub fn bandwidth(&self) -> (usize, usize) {
        (self.lo, self.up)
    }
}

/// Jacobi-preconditioned BiCGSTAB.
pub fn bicgstab(a: &CsrMatrix, b: &[f64], x0: Option<&[f64]>, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = a.nrows();
    let dinv: Vec<f64> = a.diagonal().iter().map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let ax = a.mul_vec(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let bnorm = norm2(b).max(1e-300);
    if norm2(&r) <= tol * bnorm {
        return Ok(x);
    }
    let rhat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for _ in 0..max_iter {
        let rho_new = dot(&rhat, &r);
        if rho_new == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let ph: Vec<f64> = p.iter().zip(&dinv).map(|(a, d)| a * d).collect();
        v = a.mul_vec(&ph);
        alpha = rho / dot(&rhat, &v);
        let s: Vec<f64> = r.iter().zip(&v).map(|(r, v)| r - alpha * v).collect();
        if norm2(&s) <= tol * bnorm {
            for i in 0..n {
                x[i] += alpha * ph[i];
            }
            return Ok(x);
        }
        let sh: Vec<f64> = s.iter().zip(&dinv).map(|(a, d)| a * d).collect();
        let t = a.mul_vec(&sh);
        omega = dot(&t, &s) / dot(&t, &t);
        for i in 0..n {
            x[i] += alpha * ph[i] + omega * sh[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm2(&r) <= tol * bnorm {
            return Ok(x);
        }
        if omega == 0.0 {
            break;
        }
    }
    Err(Error::Solve { reason: "bicgstab did not converge".into(), residual: norm2(&r) / bnorm })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[derive(Debug, Clone)]
enum Method {
    Banded(BandedLu),
    Iterative,
}

/// Factor-once, solve-many wrapper with a residual contract.
#[derive(Debug, Clone)]
pub struct SddSolver {
    a: CsrMatrix,
    a_norm: f64,
    method: Method,
}

impl SddSolver {
    pub fn new(a: CsrMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Shape(format!("solver needs a square matrix, got {}x{}", a.nrows(), a.ncols())));
        }
        let a_norm = a.norm_inf();
        if !a_norm.is_finite() {
            return Err(Error::Solve { reason: "non-finite matrix".into(), residual: f64::NAN });
        }
        let perm = rcm_ordering(&a);
        let p = a.permute(&perm);
        let (lo, up) = p.bandwidth();
        let method = if a.nrows() * (lo + up + 1) <= BAND_BUDGET {
            match BandedLu::factor_permuted(&p, perm) {
                Ok(f) => Method::Banded(f),
                Err(_) => Method::Iterative,
            }
        } else {
            Method::Iterative
        };
        Ok(Self { a, a_norm, method })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.a
    }

    pub fn is_direct(&self) -> bool {
        matches!(self.method, Method::Banded(_))
    }

    /// Solves `A x = b`; the residual must satisfy
    /// `|Ax - b|_inf <= 1e-10 (|A|_inf |x|_inf + |b|_inf)`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.a.nrows() {
            return Err(Error::Shape(format!("rhs length {} for {} unknowns", b.len(), self.a.nrows())));
        }
        let mut x = match &self.method {
            Method::Banded(f) => f.solve(b),
            Method::Iterative => bicgstab(&self.a, b, None, 1e-13, 20 * self.a.nrows().max(100))?,
        };
        for _ in 0..3 {
            let ax = self.a.mul_vec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
            let res = norm_inf(&r);
            let bound = RESIDUAL_TOL * (self.a_norm * norm_inf(&x) + norm_inf(b));
            if res <= bound {
                return Ok(x);
            }
            let dx = match &self.method {
                Method::Banded(f) => f.solve(&r),
                Method::Iterative => bicgstab(&self.a, &r, None, 1e-13, 20 * self.a.nrows().max(100))?,
            };
            x.iter_mut().zip(&dx).for_each(|(x, d)| *x += d);
        }
        let ax = self.a.mul_vec(&x);
        let res = norm_inf(&b.iter().zip(&ax).map(|(b, a)| b - a).collect::<Vec<_>>());
        Err(Error::Solve { reason: "residual above tolerance".into(), residual: res })
    }
}

/// Dense LU with partial pivoting on a row-major square matrix.
pub fn dense_solve(a: &[f64], n: usize, b: &[f64]) -> Result<Vec<f64>> {
    let m = nalgebra::DMatrix::from_row_slice(n, n, a);
    let lu = m.lu();
    lu.solve(&nalgebra::DVector::from_column_slice(b))
        .map(|v| v.as_slice().to_vec())
        .ok_or_else(|| Error::Solve { reason: "singular dense matrix".into(), residual: f64::NAN })
}

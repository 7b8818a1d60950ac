//! Implicit Euler stepping for closed, Dirichlet, Neumann and truncated problems.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{arg, Error, Result};
use crate::ghost::GpdmBlocks;
use crate::kernel::VcdmOperator;
use crate::solver::SddSolver;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeStepConfig {
    pub dt: f64,
    pub t_end: f64,
}

impl TimeStepConfig {
    pub fn new(dt: f64, t_end: f64) -> Result<Self> {
        if !(dt > 0.0) || !(t_end >= dt) {
            return Err(arg(format!("need dt > 0 and t_end >= dt, got dt={dt}, t_end={t_end}")));
        }
        Ok(Self { dt, t_end })
    }

    /// Largest `n` with `n dt <= t_end`.
    pub fn steps(&self) -> usize {
        libm::floor(self.t_end / self.dt * (1.0 + 1e-12)) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    None,
    Dirichlet,
    Neumann,
}

/// Nodal values at `t = n dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionState {
    pub t: f64,
    pub step: usize,
    pub u: Vec<f64>,
}

fn check_finite(u: &[f64]) -> Result<()> {
    if u.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Solve { reason: "non-finite state".into(), residual: f64::NAN })
    }
}

/// `U^{n+1} = (I - dt L)^{-1} (U^n + dt f^{n+1})`.
#[derive(Debug, Clone)]
pub struct ClosedStepper {
    solver: SddSolver,
    dt: f64,
}

impl ClosedStepper {
    pub fn new(l: &CsrMatrix, dt: f64) -> Result<Self> {
        Ok(Self { solver: SddSolver::new(l.identity_minus(dt)?)?, dt })
    }

    pub fn step(&self, state: &SolutionState, f_next: &[f64]) -> Result<SolutionState> {
        if f_next.len() != state.u.len() {
            return Err(Error::Shape("forcing length".into()));
        }
        let rhs: Vec<f64> = state.u.iter().zip(f_next).map(|(u, f)| u + self.dt * f).collect();
        let u = self.solver.solve(&rhs)?;
        check_finite(&u)?;
        Ok(SolutionState { t: (state.step + 1) as f64 * self.dt, step: state.step + 1, u })
    }
}

/// Dirichlet scheme on the augmented set; boundary entries are pinned to `g`.
#[derive(Debug, Clone)]
pub struct DirichletStepper {
    solver: SddSolver,
    lib: CsrMatrix,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    dt: f64,
}

impl DirichletStepper {
    pub fn new(blocks: &GpdmBlocks, dt: f64) -> Result<Self> {
        Ok(Self {
            solver: SddSolver::new(blocks.lii.identity_minus(dt)?)?,
            lib: blocks.lib.clone(),
            interior: blocks.interior.clone(),
            boundary: blocks.boundary.clone(),
            dt,
        })
    }

    /// `f_next` covers the augmented set; `g` covers the boundary.
    pub fn step(&self, state: &SolutionState, f_next: &[f64], g: &[f64]) -> Result<SolutionState> {
        if g.len() != self.boundary.len() || f_next.len() != state.u.len() {
            return Err(Error::Shape("forcing or boundary data length".into()));
        }
        let src = self.lib.mul_vec(g);
        let rhs: Vec<f64> = self
            .interior
            .iter()
            .zip(&src)
            .map(|(&i, s)| state.u[i] + self.dt * (f_next[i] + s))
            .collect();
        let ui = self.solver.solve(&rhs)?;
        check_finite(&ui)?;
        let mut u = state.u.clone();
        for (&i, v) in self.interior.iter().zip(ui) {
            u[i] = v;
        }
        for (&b, &v) in self.boundary.iter().zip(g) {
            u[b] = v;
        }
        Ok(SolutionState { t: (state.step + 1) as f64 * self.dt, step: state.step + 1, u })
    }
}

/// Neumann scheme with `N = L^{II} + L^{IB} E` and boundary recovery
/// `U_B = E U_I + h g`.
#[derive(Debug, Clone)]
pub struct NeumannStepper {
    solver: SddSolver,
    lib: CsrMatrix,
    e: CsrMatrix,
    h: Vec<f64>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    dt: f64,
}

impl NeumannStepper {
    pub fn new(blocks: &GpdmBlocks, dt: f64) -> Result<Self> {
        let n = blocks.neumann_matrix()?;
        Ok(Self {
            solver: SddSolver::new(n.identity_minus(dt)?)?,
            lib: blocks.lib.clone(),
            e: blocks.e.clone(),
            h: blocks.h.clone(),
            interior: blocks.interior.clone(),
            boundary: blocks.boundary.clone(),
            dt,
        })
    }

    /// `g` is the outward normal derivative at each boundary point.
    pub fn step(&self, state: &SolutionState, f_next: &[f64], g: &[f64]) -> Result<SolutionState> {
        if g.len() != self.boundary.len() || f_next.len() != state.u.len() {
            return Err(Error::Shape("forcing or boundary data length".into()));
        }
        let hg: Vec<f64> = g.iter().zip(&self.h).map(|(g, h)| g * h).collect();
        let src = self.lib.mul_vec(&hg);
        let rhs: Vec<f64> = self
            .interior
            .iter()
            .zip(&src)
            .map(|(&i, s)| state.u[i] + self.dt * (f_next[i] + s))
            .collect();
        let ui = self.solver.solve(&rhs)?;
        check_finite(&ui)?;
        let ub = self.e.mul_vec(&ui);
        let mut u = state.u.clone();
        for (&i, &v) in self.interior.iter().zip(&ui) {
            u[i] = v;
        }
        for ((&b, v), hg) in self.boundary.iter().zip(ub).zip(&hg) {
            u[b] = v + hg;
        }
        Ok(SolutionState { t: (state.step + 1) as f64 * self.dt, step: state.step + 1, u })
    }
}

/// Truncated scheme: removed points carry prescribed data.
#[derive(Debug, Clone)]
pub struct VcdmStepper {
    solver: SddSolver,
    coupling: CsrMatrix,
    retained: Vec<usize>,
    removed: Vec<usize>,
    dt: f64,
}

impl VcdmStepper {
    pub fn new(op: &VcdmOperator, dt: f64) -> Result<Self> {
        Ok(Self {
            solver: SddSolver::new(op.operator.matrix.identity_minus(dt)?)?,
            coupling: op.coupling.clone(),
            retained: op.retained.clone(),
            removed: op.removed.clone(),
            dt,
        })
    }

    pub fn removed(&self) -> &[usize] {
        &self.removed
    }

    /// `g` gives values on the removed points at `t_{n+1}`.
    pub fn step(&self, state: &SolutionState, f_next: &[f64], g: &[f64]) -> Result<SolutionState> {
        if g.len() != self.removed.len() || f_next.len() != state.u.len() {
            return Err(Error::Shape("forcing or constraint data length".into()));
        }
        let src = self.coupling.mul_vec(g);
        let rhs: Vec<f64> = self
            .retained
            .iter()
            .zip(&src)
            .map(|(&i, s)| state.u[i] + self.dt * (f_next[i] + s))
            .collect();
        let ur = self.solver.solve(&rhs)?;
        check_finite(&ur)?;
        let mut u = state.u.clone();
        for (&i, v) in self.retained.iter().zip(ur) {
            u[i] = v;
        }
        for (&i, &v) in self.removed.iter().zip(g) {
            u[i] = v;
        }
        Ok(SolutionState { t: (state.step + 1) as f64 * self.dt, step: state.step + 1, u })
    }
}

/// Resolvent and diagonal-dominance diagnostics of `I - dt A`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub dt: f64,
    /// `|(I - dt A)^{-1}|_inf` from unit-vector probes.
    pub inverse_norm_inf: f64,
    /// `min_i |1 - dt a_ii| - dt sum_{j != i} |a_ij|`.
    pub sdd_margin: f64,
    pub flagged: bool,
}

/// Probes at most `sample_count` columns of the inverse (all of them when
/// `sample_count >= n`); the infinity norm needs every column.
pub fn stability_report(a: &CsrMatrix, dt: f64, sample_count: usize) -> Result<StabilityReport> {
    let n = a.nrows();
    if n > 2000 {
        return Err(arg("stability probes are limited to N <= 2000"));
    }
    let m = a.identity_minus(dt)?;
    let mut margin = f64::INFINITY;
    for i in 0..n {
        let (cols, vals) = m.row(i);
        let mut diag = 0.0;
        let mut off = 0.0;
        for (&c, &v) in cols.iter().zip(vals) {
            if c == i {
                diag = v.abs();
            } else {
                off += v.abs();
            }
        }
        margin = margin.min(diag - off);
    }
    let solver = SddSolver::new(m)?;
    let cols = sample_count.min(n);
    let mut row_abs = vec![0.0; n];
    let mut e = vec![0.0; n];
    for j in 0..cols {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let x = solver.solve(&e)?;
        for (r, v) in row_abs.iter_mut().zip(&x) {
            *r += v.abs();
        }
    }
    let all_ones = solver.solve(&vec![1.0; n])?;
    let probe = all_ones.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let inverse_norm_inf = row_abs.iter().copied().fold(probe, f64::max);
    Ok(StabilityReport { dt, inverse_norm_inf, sdd_margin: margin, flagged: margin <= 0.0 || inverse_norm_inf > 1.0 + 1e-10 })
}

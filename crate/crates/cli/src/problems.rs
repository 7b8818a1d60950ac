//! Manufactured problems: exact solutions, forcings, drifts and chart inverses.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use gpdm::geometry::{sample_annulus, sample_circle, sample_ellipse, sample_semi_torus, sample_sine_curve, Sampling};
use gpdm::timestep::BoundaryKind;
use gpdm::PointCloud;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    /// Heat equation on the unit circle, no forcing.
    Circle,
    /// Forced heat equation on a randomly sampled ellipse.
    Ellipse,
    /// Advection-diffusion on the annulus in R^5, zero Neumann data.
    AnnulusNeumann,
    /// Advection-diffusion on the annulus in R^5, zero Dirichlet data.
    AnnulusDirichlet,
    /// Forced heat equation on a randomly sampled semi-torus, zero Dirichlet data.
    SemiTorus,
    /// Viscous Burgers on the sine curve, zero Dirichlet data.
    SineBurgers,
}

/// Point count `N`, or an `I x J` grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Size {
    Count(usize),
    Grid([usize; 2]),
}

impl Size {
    /// Nominal sample count used by bandwidth schedules.
    pub fn nominal(&self) -> usize {
        match *self {
            Size::Count(n) => n,
            Size::Grid([i, j]) => i * j,
        }
    }
}

impl fmt::Display for Size {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Size::Count(n) => write!(f, "{n}"),
            Size::Grid([i, j]) => write!(f, "{i}x{j}"),
        }
    }
}

impl FromStr for Size {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || HarnessError::Argument(format!("size must be N or IxJ, got {s:?}"));
        match s.split_once(['x', 'X']) {
            Some((i, j)) => Ok(Size::Grid([i.trim().parse().map_err(|_| bad())?, j.trim().parse().map_err(|_| bad())?])),
            None => Ok(Size::Count(s.trim().parse().map_err(|_| bad())?)),
        }
    }
}

/// Annulus grids used by the standard sweep, keyed by their point count.
pub const ANNULUS_GRIDS: [(usize, usize); 5] = [(45, 12), (64, 16), (90, 23), (128, 32), (181, 45)];

/// Exact solution with its first and second derivatives in chart coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub u: f64,
    pub ut: f64,
    pub du: [f64; 2],
    pub ddu: [[f64; 2]; 2],
}

/// Which outward normal a boundary label sits on; only meaningful on the annulus.
fn annulus_outward_sign(phi: f64) -> f64 {
    if phi < 3.0 * PI / 8.0 {
        -1.0
    } else {
        1.0
    }
}

impl Problem {
    pub const ALL: [Problem; 6] =
        [Problem::Circle, Problem::Ellipse, Problem::AnnulusNeumann, Problem::AnnulusDirichlet, Problem::SemiTorus, Problem::SineBurgers];

    pub fn name(&self) -> &'static str {
        match self {
            Problem::Circle => "circle",
            Problem::Ellipse => "ellipse",
            Problem::AnnulusNeumann => "annulus-neumann",
            Problem::AnnulusDirichlet => "annulus-dirichlet",
            Problem::SemiTorus => "semi-torus",
            Problem::SineBurgers => "sine-burgers",
        }
    }

    pub fn boundary_kind(&self) -> BoundaryKind {
        match self {
            Problem::Circle | Problem::Ellipse => BoundaryKind::None,
            Problem::AnnulusNeumann => BoundaryKind::Neumann,
            Problem::AnnulusDirichlet | Problem::SemiTorus | Problem::SineBurgers => BoundaryKind::Dirichlet,
        }
    }

    pub fn intrinsic_dim(&self) -> usize {
        match self {
            Problem::Circle | Problem::Ellipse | Problem::SineBurgers => 1,
            _ => 2,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            Problem::Circle | Problem::Ellipse | Problem::SineBurgers => 2,
            Problem::AnnulusNeumann | Problem::AnnulusDirichlet => 5,
            Problem::SemiTorus => 3,
        }
    }

    /// Exponent `rho` of the usual schedule `eps ~ N^{-rho}`.
    pub fn default_rho(&self) -> f64 {
        match self {
            Problem::AnnulusNeumann | Problem::AnnulusDirichlet => 1.0,
            _ => 2.0 / (self.intrinsic_dim() as f64 + 6.0),
        }
    }

    /// Random samplers draw from `seed`; grid samplers ignore it.
    pub fn is_random(&self) -> bool {
        matches!(self, Problem::Ellipse | Problem::SemiTorus)
    }

    pub fn sample(&self, size: Size, seed: u64) -> Result<PointCloud> {
        let count = |s: Size| match s {
            Size::Count(n) => Ok(n),
            Size::Grid(_) => Err(HarnessError::Argument(format!("{} takes a point count, not a grid", self.name()))),
        };
        let cloud = match self {
            Problem::Circle => sample_circle(count(size)?)?,
            Problem::Ellipse => sample_ellipse(count(size)?, Sampling::Random { seed })?,
            Problem::SemiTorus => sample_semi_torus(count(size)?, Sampling::Random { seed })?,
            Problem::SineBurgers => sample_sine_curve(count(size)?)?,
            Problem::AnnulusNeumann | Problem::AnnulusDirichlet => {
                let (i, j) = match size {
                    Size::Grid([i, j]) => (i, j),
                    Size::Count(n) => ANNULUS_GRIDS
                        .iter()
                        .copied()
                        .find(|&(i, j)| i * j == n)
                        .ok_or_else(|| HarnessError::Argument(format!("no standard annulus grid with {n} points; pass IxJ")))?,
                };
                sample_annulus(i, j)?
            }
        };
        Ok(cloud)
    }

    /// Chart coordinates of an ambient point, also valid slightly off the manifold.
    pub fn labels(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Problem::Circle => vec![x[1].atan2(x[0])],
            Problem::Ellipse => vec![(x[1] / 2.0).atan2(x[0])],
            Problem::SineBurgers => vec![x[0]],
            Problem::AnnulusNeumann | Problem::AnnulusDirichlet => {
                vec![x[1].atan2(x[0]), x[0].hypot(x[1]).atan2(x[4] / SQRT_2)]
            }
            Problem::SemiTorus => {
                let mut phi = x[1].atan2(x[0]);
                if phi < -FRAC_PI_2 {
                    phi += 2.0 * PI;
                }
                vec![x[2].atan2(x[0].hypot(x[1]) - 2.0), phi]
            }
        }
    }

    /// Closed-form solution and derivatives.
    pub fn jet(&self, lab: &[f64], t: f64) -> Jet {
        let e = (-t).exp();
        let th = lab[0];
        match self {
            Problem::Circle | Problem::Ellipse | Problem::SineBurgers => {
                let u = e * th.sin();
                Jet { u, ut: -u, du: [e * th.cos(), 0.0], ddu: [[-u, 0.0], [0.0, 0.0]] }
            }
            Problem::AnnulusNeumann | Problem::AnnulusDirichlet => {
                let ph = lab[1];
                let (w, wp, wpp) = if *self == Problem::AnnulusNeumann {
                    let s = (4.0 * ph).sin();
                    (s * s, 8.0 * s * (4.0 * ph).cos(), 32.0 * (8.0 * ph).cos())
                } else {
                    let s = (4.0 * ph).sin();
                    (s, 4.0 * (4.0 * ph).cos(), -16.0 * s)
                };
                let (c, s) = (th.cos(), th.sin());
                let u = e * w * c;
                Jet {
                    u,
                    ut: -u,
                    du: [-e * w * s, e * wp * c],
                    ddu: [[-u, -e * wp * s], [-e * wp * s, e * wpp * c]],
                }
            }
            Problem::SemiTorus => {
                let ph = lab[1];
                let u = e * th.sin() * ph.sin();
                Jet {
                    u,
                    ut: -u,
                    du: [e * th.cos() * ph.sin(), e * th.sin() * ph.cos()],
                    ddu: [[-u, e * th.cos() * ph.cos()], [e * th.cos() * ph.cos(), -u]],
                }
            }
        }
    }

    pub fn u(&self, lab: &[f64], t: f64) -> f64 {
        self.jet(lab, t).u
    }

    /// Drift plus Laplace-Beltrami applied to a jet. The Burgers advection term
    /// is not included.
    pub fn generator(&self, lab: &[f64], j: &Jet) -> f64 {
        let th = lab[0];
        match self {
            Problem::Circle => j.ddu[0][0],
            Problem::Ellipse => {
                let (s, c) = (th.sin(), th.cos());
                let g = s * s + 4.0 * c * c;
                j.ddu[0][0] / g + 3.0 * s * c / (g * g) * j.du[0]
            }
            Problem::SineBurgers => {
                let (s, c) = (th.sin(), th.cos());
                let g = 1.0 + c * c;
                j.ddu[0][0] / g + s * c / (g * g) * j.du[0]
            }
            Problem::AnnulusNeumann | Problem::AnnulusDirichlet => {
                let ph = lab[1];
                let a = 0.5 + 0.1 * th.sin();
                let sp = ph.sin();
                a * j.du[0] + j.ddu[0][0] / (5.0 * sp * sp) + 0.5 * (j.ddu[1][1] + ph.cos() / sp * j.du[1])
            }
            Problem::SemiTorus => {
                let r = 2.0 + th.cos();
                j.ddu[0][0] - th.sin() / r * j.du[0] + j.ddu[1][1] / (r * r)
            }
        }
    }

    /// `f = u_t - (drift . grad u + Lap u)`, minus `u u_theta` for Burgers.
    pub fn forcing(&self, lab: &[f64], t: f64) -> f64 {
        let j = self.jet(lab, t);
        self.forcing_from_jet(lab, &j)
    }

    fn forcing_from_jet(&self, lab: &[f64], j: &Jet) -> f64 {
        let nonlinear = if *self == Problem::SineBurgers { j.u * j.du[0] } else { 0.0 };
        j.ut - nonlinear - self.generator(lab, j)
    }

    /// Ambient drift vector `A` at chart coordinates, if the problem has one.
    pub fn drift(&self, lab: &[f64]) -> Option<Vec<f64>> {
        match self {
            Problem::AnnulusNeumann | Problem::AnnulusDirichlet => {
                let (th, ph) = (lab[0], lab[1]);
                let a = 0.5 + 0.1 * th.sin();
                let sp = ph.sin();
                Some(vec![
                    -a * sp * th.sin(),
                    a * sp * th.cos(),
                    -2.0 * a * sp * (2.0 * th).sin(),
                    2.0 * a * sp * (2.0 * th).cos(),
                    0.0,
                ])
            }
            _ => None,
        }
    }

    /// The tangent field paired with the Burgers advection term.
    pub fn advection_field(&self, lab: &[f64]) -> Option<Vec<f64>> {
        match self {
            Problem::SineBurgers => Some(vec![1.0, lab[0].cos()]),
            _ => None,
        }
    }

    /// Dirichlet value, or outward normal derivative for Neumann problems.
    pub fn boundary_data(&self, lab: &[f64], t: f64) -> f64 {
        match self.boundary_kind() {
            BoundaryKind::Neumann => {
                let j = self.jet(lab, t);
                annulus_outward_sign(lab[1]) * j.du[1] / SQRT_2
            }
            _ => self.u(lab, t),
        }
    }

    /// Draws a chart point inside the parameter domain.
    pub fn random_label(&self, r: [f64; 2]) -> Vec<f64> {
        match self {
            Problem::Circle | Problem::Ellipse => vec![2.0 * PI * r[0]],
            Problem::SineBurgers => vec![4.0 * PI * r[0]],
            Problem::AnnulusNeumann | Problem::AnnulusDirichlet => vec![2.0 * PI * r[0], FRAC_PI_4 + FRAC_PI_4 * r[1]],
            Problem::SemiTorus => vec![2.0 * PI * r[0], PI * (0.02 + 0.96 * r[1])],
        }
    }

    /// Largest `|f - (u_t - L u)|` over the given `(label, t)` samples, with the
    /// jet rebuilt from sixth-order central differences of `u`.
    pub fn forcing_residual(&self, samples: &[(Vec<f64>, f64)]) -> f64 {
        samples
            .iter()
            .map(|(lab, t)| {
                let j = self.numerical_jet(lab, *t);
                (self.forcing(lab, *t) - self.forcing_from_jet(lab, &j)).abs()
            })
            .fold(0.0, f64::max)
    }

    fn numerical_jet(&self, lab: &[f64], t: f64) -> Jet {
        const H: f64 = 1e-3;
        const D1: [f64; 3] = [3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0];
        const D2: [f64; 4] = [-49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0];
        let dim = self.intrinsic_dim();
        let at = |shift: &[(usize, f64)], dt: f64| {
            let mut l = lab.to_vec();
            for &(a, s) in shift {
                l[a] += s;
            }
            self.u(&l, t + dt)
        };
        let d1 = |f: &dyn Fn(f64) -> f64| (1..=3).map(|k| D1[k - 1] * (f(k as f64 * H) - f(-(k as f64) * H))).sum::<f64>() / H;
        let d2 = |f: &dyn Fn(f64) -> f64| {
            (D2[0] * f(0.0) + (1..=3).map(|k| D2[k] * (f(k as f64 * H) + f(-(k as f64) * H))).sum::<f64>()) / (H * H)
        };
        let mut j = Jet { u: self.u(lab, t), ut: d1(&|s| at(&[], s)), ..Jet::default() };
        for a in 0..dim {
            j.du[a] = d1(&|s| at(&[(a, s)], 0.0));
            j.ddu[a][a] = d2(&|s| at(&[(a, s)], 0.0));
        }
        if dim == 2 {
            let mixed = d1(&|s| d1(&|r| at(&[(0, s), (1, r)], 0.0)));
            j.ddu[0][1] = mixed;
            j.ddu[1][0] = mixed;
        }
        j
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

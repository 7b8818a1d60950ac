//! Real Schur form `A = Q T Q^T` of a dense row-major matrix.
//!
//! Householder reduction to Hessenberg form followed by the Francis
//! double-shift QR iteration with exceptional shifts. Negligible subdiagonal
//! entries are set to zero on deflation, so 1x1 blocks are exactly triangular.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::sqrt;

use crate::error::{Error, Result};

/// Iterations allowed per deflated eigenvalue before giving up.
pub const MAX_SWEEPS_PER_EIGENVALUE: usize = 60;

/// `(q, t)`, both row-major `n x n`.
pub fn real_schur(mut h: Vec<f64>, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if h.len() != n * n {
        return Err(Error::Shape(format!("expected {n}x{n} entries, got {}", h.len())));
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen("matrix has non-finite entries".into()));
    }
    let mut v = hessenberg(&mut h, n);
    francis(&mut h, &mut v, n)?;
    Ok((v, h))
}

fn hessenberg(h: &mut [f64], n: usize) -> Vec<f64> {
    let mut ort = vec![0.0; n];
    let mut f = vec![0.0; n];
    let high = n.saturating_sub(1);
    for m in 1..high {
        let scale: f64 = (m..=high).map(|i| h[i * n + m - 1].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[i * n + m - 1] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = sqrt(hh);
        if ort[m] > 0.0 {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;
        // Left: rows m..=high.
        f[m..n].iter_mut().for_each(|x| *x = 0.0);
        for i in m..=high {
            let row = &h[i * n..(i + 1) * n];
            for j in m..n {
                f[j] += ort[i] * row[j];
            }
        }
        for i in m..=high {
            let o = ort[i] / hh;
            let row = &mut h[i * n..(i + 1) * n];
            for j in m..n {
                row[j] -= f[j] * o;
            }
        }
        // Right: columns m..=high.
        for i in 0..n {
            let row = &mut h[i * n..(i + 1) * n];
            let s: f64 = (m..=high).map(|j| ort[j] * row[j]).sum::<f64>() / hh;
            for j in m..=high {
                row[j] -= s * ort[j];
            }
        }
        ort[m] *= scale;
        h[m * n + m - 1] = scale * g;
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for m in (1..high).rev() {
        let hm = h[m * n + m - 1];
        if hm == 0.0 {
            continue;
        }
        for i in m + 1..=high {
            ort[i] = h[i * n + m - 1];
        }
        f[m..=high].iter_mut().for_each(|x| *x = 0.0);
        for i in m..=high {
            let row = &v[i * n..(i + 1) * n];
            for j in m..=high {
                f[j] += ort[i] * row[j];
            }
        }
        for j in m..=high {
            f[j] = (f[j] / ort[m]) / hm;
        }
        for i in m..=high {
            let row = &mut v[i * n..(i + 1) * n];
            for j in m..=high {
                row[j] += f[j] * ort[i];
            }
        }
    }
    for i in 2..n {
        for j in 0..i - 1 {
            h[i * n + j] = 0.0;
        }
    }
    v
}

fn francis(h: &mut [f64], v: &mut [f64], nn: usize) -> Result<()> {
    if nn == 0 {
        return Ok(());
    }
    let eps = f64::EPSILON;
    let at = |i: usize, j: usize| i * nn + j;
    let norm: f64 = (0..nn).map(|i| (i.saturating_sub(1)..nn).map(|j| h[at(i, j)].abs()).sum::<f64>()).sum();
    let mut exshift = 0.0;
    let mut n = nn as isize - 1;
    let mut iter = 0usize;
    let (mut p, mut q, mut r, mut s, mut z);
    let (mut x, mut y, mut w);
    while n >= 0 {
        let nu = n as usize;
        let mut l = nu;
        while l > 0 {
            s = h[at(l - 1, l - 1)].abs() + h[at(l, l)].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[at(l, l - 1)].abs() < eps * s {
                break;
            }
            l -= 1;
        }
        if l == nu {
            if nu > 0 {
                h[at(nu, nu - 1)] = 0.0;
            }
            h[at(nu, nu)] += exshift;
            n -= 1;
            iter = 0;
        } else if l + 1 == nu {
            if l > 0 {
                h[at(l, l - 1)] = 0.0;
            }
            w = h[at(nu, nu - 1)] * h[at(nu - 1, nu)];
            p = (h[at(nu - 1, nu - 1)] - h[at(nu, nu)]) / 2.0;
            q = p * p + w;
            z = sqrt(q.abs());
            h[at(nu, nu)] += exshift;
            h[at(nu - 1, nu - 1)] += exshift;
            let size = h[at(nu, nu)].abs() + h[at(nu - 1, nu - 1)].abs();
            if q >= 0.0 || z <= eps * size {
                z = if q >= 0.0 { z } else { 0.0 };
                z = if p >= 0.0 { p + z } else { p - z };
                x = h[at(nu, nu - 1)];
                s = x.abs() + z.abs();
                p = x / s;
                q = z / s;
                r = sqrt(p * p + q * q);
                p /= r;
                q /= r;
                for j in nu - 1..nn {
                    z = h[at(nu - 1, j)];
                    h[at(nu - 1, j)] = q * z + p * h[at(nu, j)];
                    h[at(nu, j)] = q * h[at(nu, j)] - p * z;
                }
                for i in 0..=nu {
                    z = h[at(i, nu - 1)];
                    h[at(i, nu - 1)] = q * z + p * h[at(i, nu)];
                    h[at(i, nu)] = q * h[at(i, nu)] - p * z;
                }
                for i in 0..nn {
                    z = v[at(i, nu - 1)];
                    v[at(i, nu - 1)] = q * z + p * v[at(i, nu)];
                    v[at(i, nu)] = q * v[at(i, nu)] - p * z;
                }
                h[at(nu, nu - 1)] = 0.0;
            }
            n -= 2;
            iter = 0;
        } else {
            x = h[at(nu, nu)];
            y = h[at(nu - 1, nu - 1)];
            w = h[at(nu, nu - 1)] * h[at(nu - 1, nu)];
            if iter == 10 {
                exshift += x;
                for i in 0..=nu {
                    h[at(i, i)] -= x;
                }
                s = h[at(nu, nu - 1)].abs() + h[at(nu - 1, nu - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = sqrt(s);
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in 0..=nu {
                        h[at(i, i)] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }
            iter += 1;
            if iter > MAX_SWEEPS_PER_EIGENVALUE {
                return Err(Error::Eigen(format!("QR iteration stalled at row {nu}")));
            }
            let mut m = nu - 2;
            loop {
                z = h[at(m, m)];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[at(m + 1, m)] + h[at(m, m + 1)];
                q = h[at(m + 1, m + 1)] - z - r - s;
                r = h[at(m + 2, m + 1)];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[at(m, m - 1)].abs() * (q.abs() + r.abs()) < eps * (p.abs() * (h[at(m - 1, m - 1)].abs() + z.abs() + h[at(m + 1, m + 1)].abs())) {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nu {
                h[at(i, i - 2)] = 0.0;
                if i > m + 2 {
                    h[at(i, i - 3)] = 0.0;
                }
            }
            for k in m..nu {
                let notlast = k != nu - 1;
                if k != m {
                    p = h[at(k, k - 1)];
                    q = h[at(k + 1, k - 1)];
                    r = if notlast { h[at(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = sqrt(p * p + q * q + r * r);
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        h[at(k, k - 1)] = -s * x;
                    } else if l != m {
                        h[at(k, k - 1)] = -h[at(k, k - 1)];
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..nn {
                        p = h[at(k, j)] + q * h[at(k + 1, j)];
                        if notlast {
                            p += r * h[at(k + 2, j)];
                            h[at(k + 2, j)] -= p * z;
                        }
                        h[at(k, j)] -= p * x;
                        h[at(k + 1, j)] -= p * y;
                    }
                    for i in 0..=nu.min(k + 3) {
                        p = x * h[at(i, k)] + y * h[at(i, k + 1)];
                        if notlast {
                            p += z * h[at(i, k + 2)];
                            h[at(i, k + 2)] -= p * r;
                        }
                        h[at(i, k)] -= p;
                        h[at(i, k + 1)] -= p * q;
                    }
                    for i in 0..nn {
                        p = x * v[at(i, k)] + y * v[at(i, k + 1)];
                        if notlast {
                            p += z * v[at(i, k + 2)];
                            v[at(i, k + 2)] -= p * r;
                        }
                        v[at(i, k)] -= p;
                        v[at(i, k + 1)] -= p * q;
                    }
                }
            }
        }
    }
    for i in 2..nn {
        h[at(i, 0)..at(i, i - 1)].iter_mut().for_each(|x| *x = 0.0);
    }
    Ok(())
}

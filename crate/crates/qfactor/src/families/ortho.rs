//! Gram matrices <Phi_n, Phi_m> by truncated Jackson sums or by adaptive
//! Gauss-Legendre quadrature.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{ContinuousPath, Family, Support};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// target absolute accuracy for each Gram entry (sum tails and panels)
    pub tol: f64,
    pub max_depth: usize,
    /// hard cap on the number of terms summed per direction and branch
    pub max_terms: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { tol: 1e-12, max_depth: 40, max_terms: 20_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramReport {
    /// row-major (n_max+1)^2 entries
    pub matrix: Vec<Vec<C64>>,
    /// max |G - I| over all entries
    pub max_deviation: f64,
    pub tail_bound: f64,
    /// summed terms, or integrand evaluations for quadrature
    pub evaluations: usize,
}

impl GramReport {
    fn from_matrix(matrix: Vec<Vec<C64>>, tail_bound: f64, evaluations: usize) -> Self {
        let mut dev: f64 = 0.0;
        for (i, row) in matrix.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                dev = dev.max((v - target).norm());
            }
        }
        GramReport { matrix, max_deviation: dev, tail_bound, evaluations }
    }
}

/// Entries w(s) P_i(s) P_j(s) / (d_i d_j), flattened row-major.
fn summand(fam: &Family, n_max: usize, s: C64, w: C64, inv_d: &[C64]) -> Vec<C64> {
    let ps: Vec<C64> = (0..=n_max).map(|n| (fam.poly)(n, s) * inv_d[n]).collect();
    let mut out = Vec::with_capacity(ps.len() * ps.len());
    for pi in &ps {
        for pj in &ps {
            out.push(w * pi * pj);
        }
    }
    out
}

fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

fn finite(v: &[C64]) -> bool {
    v.iter().all(|x| x.re.is_finite() && x.im.is_finite())
}

pub fn gram(fam: &Family, n_max: usize, quad: &QuadratureSpec) -> Result<GramReport> {
    let inv_d: Vec<C64> = (0..=n_max).map(|n| 1.0 / fam.d(n)).collect();
    let dim = n_max + 1;
    let (flat, tail, evals) = match &fam.support {
        Support::DiscreteSum { lo, hi, branches } => {
            let mut acc = vec![C64::new(0.0, 0.0); dim * dim];
            let mut tail = 0.0;
            let mut evals = 0;
            for br in branches {
                let term = |k: i64| -> Vec<C64> {
                    let s = br.offset + k as f64;
                    let w = (fam.rho)(s) * fam.lattice.nabla_x1(s) * br.sign;
                    if w.norm() == 0.0 || !(w.re.is_finite() && w.im.is_finite()) {
                        return vec![C64::new(0.0, 0.0); dim * dim];
                    }
                    let v = summand(fam, n_max, s, w, &inv_d);
                    if finite(&v) {
                        v
                    } else {
                        vec![C64::new(0.0, 0.0); dim * dim]
                    }
                };
                // upward from lo (or 0), then downward from -1 on bilateral supports
                let start = lo.unwrap_or(0);
                let (t_up, e_up) = sum_direction(&term, start, 1, *hi, quad, &mut acc)?;
                tail += t_up;
                evals += e_up;
                if lo.is_none() {
                    let (t_dn, e_dn) = sum_direction(&term, -1, -1, None, quad, &mut acc)?;
                    tail += t_dn;
                    evals += e_dn;
                }
            }
            (acc, tail, evals)
        }
        Support::ContinuousInterval { path, .. } => match *path {
            ContinuousPath::Theta => {
                let q = fam.base();
                let f = |th: f64| {
                    let s = super::theta_to_s(th, q);
                    let w = (fam.rho)(s) * th.sin();
                    summand(fam, n_max, s, w, &inv_d)
                };
                let (v, evals) = integrate(&f, 0.0, std::f64::consts::PI, quad, dim * dim)?;
                (v, 0.0, evals)
            }
            ContinuousPath::RealS { s_lo, s_hi } => {
                let f = |s: f64| {
                    let s = C64::new(s, 0.0);
                    let w = (fam.rho)(s) * fam.lattice.nabla_x1(s);
                    let v = summand(fam, n_max, s, w, &inv_d);
                    if finite(&v) {
                        v
                    } else {
                        vec![C64::new(0.0, 0.0); dim * dim]
                    }
                };
                let lo = decay_bound(&f, s_lo, -1.0, quad.tol);
                let hi = decay_bound(&f, s_hi, 1.0, quad.tol);
                let mut acc = vec![C64::new(0.0, 0.0); dim * dim];
                let mut evals = 0;
                let mut a = lo;
                while a < hi {
                    let b = (a + 1.0).min(hi);
                    let (v, e) = integrate(&f, a, b, quad, dim * dim)?;
                    for (x, y) in acc.iter_mut().zip(v) {
                        *x += y;
                    }
                    evals += e;
                    a = b;
                }
                (acc, quad.tol, evals)
            }
        },
    };
    let matrix = flat.chunks(dim).map(|r| r.to_vec()).collect();
    Ok(GramReport::from_matrix(matrix, tail, evals))
}

/// First integer step from 0 in direction `dir` beyond which the integrand
/// stays below tol/100 for four consecutive unit steps.
fn decay_bound(f: &dyn Fn(f64) -> Vec<C64>, limit: f64, dir: f64, tol: f64) -> f64 {
    let mut run = 0;
    let mut s = 0.0;
    loop {
        if (dir > 0.0 && s >= limit) || (dir < 0.0 && s <= limit) {
            return limit;
        }
        if vec_norm(&f(s)) < tol * 1e-2 {
            run += 1;
            if run >= 4 {
                return s;
            }
        } else {
            run = 0;
        }
        s += dir;
        if s.abs() > 1e4 {
            return s;
        }
    }
}

/// Sums term(k) for k = start, start+step, ... up to `end` (inclusive) or
/// until the geometric tail bound falls below tol/10.
fn sum_direction(
    term: &dyn Fn(i64) -> Vec<C64>,
    start: i64,
    step: i64,
    end: Option<i64>,
    quad: &QuadratureSpec,
    acc: &mut [C64],
) -> Result<(f64, usize)> {
    let mut k = start;
    let mut prev = f64::INFINITY;
    let mut count = 0usize;
    loop {
        if let Some(e) = end {
            if (step > 0 && k > e) || (step < 0 && k < e) {
                return Ok((0.0, count));
            }
        }
        let v = term(k);
        let m = vec_norm(&v);
        for (a, x) in acc.iter_mut().zip(&v) {
            *a += x;
        }
        count += 1;
        if end.is_none() && count > 3 {
            let r = if prev > 0.0 { m / prev } else { 0.0 };
            if m == 0.0 {
                return Ok((0.0, count));
            }
            if r < 1.0 {
                let bound = m * r / (1.0 - r);
                if bound < quad.tol * 0.1 {
                    return Ok((bound, count));
                }
            }
        }
        if count >= quad.max_terms {
            let r = if prev > 0.0 { m / prev } else { 1.0 };
            let tail = if r < 1.0 { m * r / (1.0 - r) } else { f64::INFINITY };
            let suggested = if r < 1.0 && m > 0.0 {
                let extra = ((quad.tol * 0.1 * (1.0 - r) / m).ln() / r.ln()).ceil().max(1.0);
                k + step * extra as i64
            } else {
                k + step * count as i64
            };
            return Err(Error::Truncation { tail, suggested });
        }
        prev = m;
        k += step;
    }
}

const GL_ORDER: usize = 16;

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                ws[i] = 2.0 / ((1.0 - x * x) * dp * dp);
                break;
            }
        }
        xs[i] = x;
    }
    (xs, ws)
}

fn panel(f: &dyn Fn(f64) -> Vec<C64>, a: f64, b: f64, nodes: &(Vec<f64>, Vec<f64>), len: usize) -> Vec<C64> {
    let (h, m) = ((b - a) / 2.0, (b + a) / 2.0);
    let mut acc = vec![C64::new(0.0, 0.0); len];
    for (x, w) in nodes.0.iter().zip(&nodes.1) {
        let v = f(m + h * x);
        for (s, y) in acc.iter_mut().zip(v) {
            *s += y * (w * h);
        }
    }
    acc
}

/// Adaptive bisection: accept a panel when it agrees with its two halves.
pub fn integrate(
    f: &dyn Fn(f64) -> Vec<C64>,
    a: f64,
    b: f64,
    quad: &QuadratureSpec,
    len: usize,
) -> Result<(Vec<C64>, usize)> {
    let nodes = gauss_legendre(GL_ORDER);
    let whole = panel(f, a, b, &nodes, len);
    let mut evals = GL_ORDER;
    let v = refine(f, a, b, whole, quad.tol, quad.max_depth, &nodes, len, &mut evals)?;
    Ok((v, evals))
}

#[allow(clippy::too_many_arguments)]
fn refine(
    f: &dyn Fn(f64) -> Vec<C64>,
    a: f64,
    b: f64,
    whole: Vec<C64>,
    tol: f64,
    depth: usize,
    nodes: &(Vec<f64>, Vec<f64>),
    len: usize,
    evals: &mut usize,
) -> Result<Vec<C64>> {
    let m = (a + b) / 2.0;
    let left = panel(f, a, m, nodes, len);
    let right = panel(f, m, b, nodes, len);
    *evals += 2 * GL_ORDER;
    let split: Vec<C64> = left.iter().zip(&right).map(|(x, y)| x + y).collect();
    let err = split.iter().zip(&whole).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    if err <= tol {
        return Ok(split);
    }
    if depth == 0 {
        return Err(Error::Convergence { terms: *evals, last: err });
    }
    let l = refine(f, a, m, left, tol / 2.0, depth - 1, nodes, len, evals)?;
    let r = refine(f, m, b, right, tol / 2.0, depth - 1, nodes, len, evals)?;
    Ok(l.iter().zip(&r).map(|(x, y)| x + y).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (xs, ws) = gauss_legendre(GL_ORDER);
        let s: f64 = xs.iter().zip(&ws).map(|(x, w)| w * x.powi(10)).sum();
        assert!((s - 2.0 / 11.0).abs() < 1e-14);
        assert!((ws.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_integral_of_smooth_function() {
        let f = |x: f64| vec![C64::new(x.sin(), x.cos())];
        let (v, _) = integrate(&f, 0.0, std::f64::consts::PI, &QuadratureSpec::default(), 1).unwrap();
        assert!((v[0] - C64::new(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn geometric_sum_tail() {
        let term = |k: i64| vec![C64::new(0.5f64.powi(k as i32), 0.0)];
        let mut acc = vec![C64::new(0.0, 0.0)];
        let (tail, _) = sum_direction(&term, 0, 1, None, &QuadratureSpec::default(), &mut acc).unwrap();
        assert!((acc[0].re - 2.0).abs() < 1e-12);
        assert!(tail < 1e-12);
        let spec = QuadratureSpec { max_terms: 10, ..Default::default() };
        let mut acc = vec![C64::new(0.0, 0.0)];
        let slow = |k: i64| vec![C64::new(0.99f64.powi(k as i32), 0.0)];
        assert!(matches!(sum_direction(&slow, 0, 1, None, &spec, &mut acc), Err(Error::Truncation { .. })));
    }
}

//! Eigenvalue structure: lambda_n = C1 q^n + C2 q^-n + C3, the recurrence
//! defect of lambda_n, and the q-linearity classification.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::Family;
use crate::error::{Error, Result};
use crate::qcore::{k_q, q_number, LatticeKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumCoeffs {
    pub sigma_tilde_pp: f64,
    pub tau_tilde_p: f64,
    pub q: f64,
}

impl SpectrumCoeffs {
    pub fn new(sigma_tilde_pp: f64, tau_tilde_p: f64, q: f64) -> Self {
        SpectrumCoeffs { sigma_tilde_pp, tau_tilde_p, q }
    }

    pub fn c1(&self) -> f64 {
        let k = k_q(self.q);
        (self.tau_tilde_p + self.sigma_tilde_pp / k) / (2.0 * (1.0 - self.q))
    }

    pub fn c2(&self) -> f64 {
        let k = k_q(self.q);
        (self.tau_tilde_p - self.sigma_tilde_pp / k) / (2.0 * (1.0 - 1.0 / self.q))
    }

    pub fn c3(&self) -> f64 {
        let (q, k) = (self.q, k_q(self.q));
        -self.sigma_tilde_pp * (1.0 + q) / (2.0 * k * (1.0 - q)) - self.tau_tilde_p / 2.0
    }

    pub fn l_q(&self) -> f64 {
        self.c1() * self.c2()
    }

    /// ((sigma''/k)^2 - tau'^2) / (4 k^2), the closed form of C1 C2.
    pub fn l_q_closed(&self) -> f64 {
        let k = k_q(self.q);
        ((self.sigma_tilde_pp / k).powi(2) - self.tau_tilde_p.powi(2)) / (4.0 * k * k)
    }

    /// 1/2 (tau' k^2 - sigma'' [2]_q)
    pub fn ttrr_defect(&self) -> f64 {
        let k = k_q(self.q);
        0.5 * (self.tau_tilde_p * k * k - self.sigma_tilde_pp * q_number(2.0, self.q))
    }
}

pub fn eigenvalue_general(c: &SpectrumCoeffs, n: i64) -> f64 {
    let qn = c.q.powi(n as i32);
    c.c1() * qn + c.c2() / qn + c.c3()
}

/// lambda_n(q, +) = tau'(q^n - 1)/(1 - q), valid when sigma'' = k_q tau'.
pub fn lambda_plus(tau_tilde_p: f64, q: f64, n: i64) -> f64 {
    tau_tilde_p * (q.powi(n as i32) - 1.0) / (1.0 - q)
}

/// lambda_n(q, -) = lambda_n(1/q, +), valid when sigma'' = -k_q tau'.
pub fn lambda_minus(tau_tilde_p: f64, q: f64, n: i64) -> f64 {
    lambda_plus(tau_tilde_p, 1.0 / q, n)
}

/// The defect lambda_{n+2} - (q + 1/q) lambda_{n+1} + lambda_n, checked to be
/// independent of n for n = 0..n_max.
pub fn ttrr_constant(lambda: &dyn Fn(usize) -> f64, q: f64, n_max: usize, tol: f64) -> Result<f64> {
    if n_max < 3 {
        return Err(Error::Param(format!("ttrr_constant needs n_max >= 3, got {n_max}")));
    }
    let s = q + 1.0 / q;
    let defects: Vec<f64> = (0..=n_max).map(|n| lambda(n + 2) - s * lambda(n + 1) + lambda(n)).collect();
    let d0 = defects[0];
    let scale = (0..=n_max + 2).map(|n| lambda(n).abs()).fold(1.0, f64::max);
    for (n, d) in defects.iter().enumerate() {
        let spread = (d - d0).abs();
        if spread > tol * scale.max(d0.abs()) && spread > tol {
            return Err(Error::TtrrViolation { n, spread });
        }
    }
    Ok(d0)
}

/// Reads sigma~'' and tau~' off the family: tau(s) = tau~(x(s)) is linear in
/// x and sigma~(x(s)) = sigma(s) + tau(s) nabla x_1(s)/2 is quadratic.
pub fn spectrum_coeffs(fam: &Family) -> SpectrumCoeffs {
    let lat = fam.lattice;
    let pts = [0.31, 0.83, 1.37];
    let xs: Vec<C64> = pts.iter().map(|&s| lat.x(C64::new(s, 0.0))).collect();
    let taus: Vec<C64> = pts.iter().map(|&s| (fam.tau)(C64::new(s, 0.0))).collect();
    let st: Vec<C64> = pts
        .iter()
        .zip(&taus)
        .map(|(&s, t)| {
            let s = C64::new(s, 0.0);
            (fam.sigma)(s) + t * lat.nabla_x1(s) * 0.5
        })
        .collect();
    let tau_p = (taus[1] - taus[0]) / (xs[1] - xs[0]);
    let dd1 = (st[1] - st[0]) / (xs[1] - xs[0]);
    let dd2 = (st[2] - st[1]) / (xs[2] - xs[1]);
    let sig_pp = (dd2 - dd1) / (xs[2] - xs[0]) * 2.0;
    SpectrumCoeffs::new(sig_pp.re, tau_p.re, fam.base())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QLinearity {
    QLinear,
    QInverseLinear,
    Neither,
}

/// Delta/Delta x_1(s) [Delta f(s)/Delta x(s)]
fn second_difference(fam: &Family, f: &dyn Fn(C64) -> C64, s: C64) -> C64 {
    let lat = fam.lattice;
    let g = |t: C64| (f(t + 1.0) - f(t)) / lat.delta_x(t);
    (g(s + 1.0) - g(s)) / lat.delta_x1(s)
}

/// Max residual of fitting lambda_n = A r^n + D for n = 0..=n_max.
pub fn geometric_fit_residual(lambda: &dyn Fn(usize) -> f64, r: f64, n_max: usize) -> f64 {
    let ns: Vec<f64> = (0..=n_max).map(|n| r.powi(n as i32)).collect();
    let ys: Vec<f64> = (0..=n_max).map(lambda).collect();
    let m = ns.len() as f64;
    let (sx, sy) = (ns.iter().sum::<f64>(), ys.iter().sum::<f64>());
    let sxx: f64 = ns.iter().map(|x| x * x).sum();
    let sxy: f64 = ns.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let det = m * sxx - sx * sx;
    let a = (m * sxy - sx * sy) / det;
    let d = (sy - a * sx) / m;
    let scale = ys.iter().map(|y| y.abs()).fold(1.0, f64::max);
    ns.iter().zip(&ys).map(|(x, y)| (a * x + d - y).abs()).fold(0.0, f64::max) / scale
}

pub fn fit_linearity(lambda: &dyn Fn(usize) -> f64, q: f64, tol: f64) -> QLinearity {
    if geometric_fit_residual(lambda, q, 10) <= tol {
        QLinearity::QLinear
    } else if geometric_fit_residual(lambda, 1.0 / q, 10) <= tol {
        QLinearity::QInverseLinear
    } else {
        QLinearity::Neither
    }
}

/// Second-difference criterion on q-linear lattices, lambda fit on
/// q-quadratic ones. The two are cross-checked when both apply.
pub fn q_linearity_class(fam: &Family, tol: f64) -> Result<QLinearity> {
    let coeffs = spectrum_coeffs(fam);
    let lambda = |n: usize| (fam.lambda)(n);
    let fitted = fit_linearity(&lambda, fam.base(), 1e-10);
    if fam.lattice.kind == LatticeKind::QQuadratic {
        if coeffs.sigma_tilde_pp.abs() < tol && coeffs.tau_tilde_p.abs() < tol {
            return Err(Error::Degenerate);
        }
        return Ok(fitted);
    }
    let probes = [0.3, 0.7, 1.1, 1.9, 2.6].map(|s| C64::new(s, 0.0));
    let sig = |s: C64| (fam.sigma)(s);
    let sigp = |s: C64| (fam.sigma_plus)(s);
    let size = |f: &dyn Fn(C64) -> C64| {
        probes.iter().map(|&s| (f(s) / fam.lattice.delta_x(s).powi(2)).norm()).fold(1e-300, f64::max)
    };
    let d_sig = probes.iter().map(|&s| second_difference(fam, &sig, s).norm()).fold(0.0, f64::max) / size(&sig);
    let d_sigp =
        probes.iter().map(|&s| second_difference(fam, &sigp, s).norm()).fold(0.0, f64::max) / size(&sigp);
    let (lin_sig, lin_sigp) = (d_sig <= tol, d_sigp <= tol);
    if lin_sig && lin_sigp && coeffs.sigma_tilde_pp.abs() < tol && coeffs.tau_tilde_p.abs() < tol {
        return Err(Error::Degenerate);
    }
    let up = fam.lattice.kind == LatticeKind::QLinearUp;
    let class = match (lin_sig, lin_sigp) {
        (true, false) | (true, true) => {
            if up {
                QLinearity::QLinear
            } else {
                QLinearity::QInverseLinear
            }
        }
        (false, true) => {
            if up {
                QLinearity::QInverseLinear
            } else {
                QLinearity::QLinear
            }
        }
        (false, false) => QLinearity::Neither,
    };
    if class != fitted {
        return Err(Error::FamilyDefinition(format!(
            "{}: second-difference criterion gives {class:?} but the eigenvalues fit {fitted:?}",
            fam.name
        )));
    }
    Ok(class)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_sequence_has_zero_defect() {
        let q: f64 = 0.5;
        let d = ttrr_constant(&|n| q.powi(n as i32), q, 8, 1e-12).unwrap();
        assert!(d.abs() < 1e-14);
    }

    #[test]
    fn non_constant_defect_is_rejected() {
        let r = ttrr_constant(&|n| (n * n * n) as f64, 0.5, 6, 1e-10);
        assert!(matches!(r, Err(Error::TtrrViolation { .. })));
    }

    #[test]
    fn coefficients_give_zero_at_n0_and_minus_tau_at_n1() {
        let c = SpectrumCoeffs::new(0.7, -1.3, 0.4);
        assert!(eigenvalue_general(&c, 0).abs() < 1e-13);
        assert!((eigenvalue_general(&c, 1) + c.tau_tilde_p).abs() < 1e-13);
        assert!((c.l_q() - c.l_q_closed()).abs() < 1e-12 * c.l_q().abs().max(1.0));
    }

    #[test]
    fn lambda_pm_formulas() {
        let q: f64 = 0.6;
        let k = k_q(q);
        let tp = 0.9;
        let plus = SpectrumCoeffs::new(k * tp, tp, q);
        let minus = SpectrumCoeffs::new(-k * tp, tp, q);
        for n in 0..8 {
            assert!((eigenvalue_general(&plus, n) - lambda_plus(tp, q, n)).abs() < 1e-12);
            assert!((eigenvalue_general(&minus, n) - lambda_minus(tp, q, n)).abs() < 1e-11);
        }
    }
}

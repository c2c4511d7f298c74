//! Truncated eigenbasis representation of the su_q(1,1) dynamical algebra
//! and audits of its commutation relations.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor::{FactorStatus, FactorizationReport};
use crate::families::Family;

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedRep {
    pub dim: usize,
    pub q: f64,
    pub a: DMatrix<f64>,
    pub adag: DMatrix<f64>,
    pub n: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub bdag: DMatrix<f64>,
    pub k0: DMatrix<f64>,
    pub kplus: DMatrix<f64>,
    pub kminus: DMatrix<f64>,
    pub notes: Vec<String>,
}

/// (1 - q^{2n}) / (1 - q^2)
pub fn normalized_lambda(q: f64, n: usize) -> f64 {
    (1.0 - q.powi(2 * n as i32)) / (1.0 - q * q)
}

pub fn build_rep(q: f64, dim: usize) -> Result<TruncatedRep> {
    crate::qcore::QBase::new(q)?;
    if dim < 4 {
        return Err(Error::Param(format!("truncated representation needs dim >= 4, got {dim}")));
    }
    let mut a = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = normalized_lambda(q, n).sqrt();
    }
    let adag = a.transpose();
    let n = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(dim, |i, _| i as f64));
    let q_half_n = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(dim, |i, _| q.powf(-(i as f64) / 2.0)));
    let b = &q_half_n * &a;
    let bdag = b.transpose();
    let beta = 1.0 / (q + 1.0 / q);
    let kplus = &bdag * &bdag * beta;
    let kminus = &b * &b * beta;
    let k0 = (&n + DMatrix::identity(dim, dim) * 0.5) * 0.5;
    Ok(TruncatedRep { dim, q, a, adag, n, b, bdag, k0, kplus, kminus, notes: vec![] })
}

/// Representation for a solved family with base sqrt(varsigma); the family
/// spectrum divided by Lambda must be (1 - varsigma^n)/(1 - varsigma).
pub fn from_family(report: &FactorizationReport, fam: &Family, dim: usize) -> Result<TruncatedRep> {
    match report.status {
        FactorStatus::Solved => {}
        FactorStatus::Commuting => {
            return Err(Error::NoAlgebra("the alpha-operators commute (Lambda = 0)".into()));
        }
        other => return Err(Error::NoAlgebra(format!("factorization status is {other:?}"))),
    }
    let lam = report.lambda.ok_or_else(|| Error::NoAlgebra("Lambda missing".into()))?;
    let vs = report.varsigma.ok_or_else(|| Error::NoAlgebra("varsigma missing".into()))?;
    if lam == 0.0 || !(vs > 0.0) {
        return Err(Error::NoAlgebra(format!("need Lambda != 0 and varsigma > 0, got {lam}, {vs}")));
    }
    let q_rep = vs.sqrt();
    let worst = (0..dim)
        .map(|n| {
            let want = normalized_lambda(q_rep, n);
            ((fam.lambda)(n) / lam - want).abs() / want.abs().max(1.0)
        })
        .fold(0.0, f64::max);
    if worst > 1e-8 {
        return Err(Error::NoAlgebra(format!(
            "the spectrum lambda_n / Lambda is not (1 - varsigma^n)/(1 - varsigma) (deviation {worst:.3e}); the alpha-operators are not ladders for Phi_n"
        )));
    }
    let mut rep = build_rep(q_rep, dim)?;
    rep.notes.push(format!("representation base sqrt(varsigma) = {q_rep}, so varsigma plays the role of q^2"));
    if q_rep > 1.0 {
        rep.notes.push("varsigma > 1: the q^-1-linear spectrum is realized with base > 1".into());
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationResidual {
    pub name: String,
    /// max-norm over the interior block
    pub residual: f64,
    /// size of the terms (or, for the logarithm, its condition number) on the
    /// interior; roundoff in `residual` grows with it
    pub scale: f64,
}

impl RelationResidual {
    pub fn relative(&self) -> f64 {
        self.residual / self.scale.max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationReport {
    pub dim: usize,
    pub q: f64,
    /// residuals are taken over basis indices 0..interior
    pub interior: usize,
    pub relations: Vec<RelationResidual>,
}

impl RelationReport {
    pub fn max_residual(&self) -> f64 {
        self.relations.iter().map(|r| r.residual).fold(0.0, f64::max)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.relations.iter().find(|r| r.name == name).map(|r| r.residual)
    }
}

fn diag_fn(dim: usize, f: impl Fn(usize) -> f64) -> DMatrix<f64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_fn(dim, |i, _| f(i)))
}

fn interior_max(m: &DMatrix<f64>, k: usize) -> f64 {
    let mut w: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            w = w.max(m[(i, j)].abs());
        }
    }
    w
}

/// [x]_Q = (Q^x - Q^-x)/(Q - Q^-1)
fn quantum_bracket(x: f64, big_q: f64) -> f64 {
    (big_q.powf(x) - big_q.powf(-x)) / (big_q - 1.0 / big_q)
}

pub fn check_relations(rep: &TruncatedRep) -> RelationReport {
    let (dim, q) = (rep.dim, rep.q);
    let k = dim - 2;
    let id = DMatrix::<f64>::identity(dim, dim);
    let mut rel = Vec::new();
    // the residual is the sum of the terms; the scale is the largest term
    let mut push = |name: &str, terms: &[DMatrix<f64>], scale: Option<f64>| {
        let sum = terms.iter().skip(1).fold(terms[0].clone(), |acc, t| acc + t);
        let scale = scale.unwrap_or_else(|| terms.iter().map(|t| interior_max(t, k)).fold(0.0, f64::max));
        rel.push(RelationResidual { name: name.into(), residual: interior_max(&sum, k), scale })
    };
    let (a, adag, n) = (&rep.a, &rep.adag, &rep.n);

    push("[N,a]=-a", &[n * a, -(a * n), a.clone()], None);
    push("[N,a+]=a+", &[n * adag, -(adag * n), -adag], None);
    push("a a+ - q^2 a+ a = I", &[a * adag, adag * a * -(q * q), -&id], None);
    push("[a,a+]=q^(2N)", &[a * adag, -(adag * a), -diag_fn(dim, |i| q.powi(2 * i as i32))], None);
    let ada = adag * a;
    let arg = |i: usize| 1.0 - (1.0 - q * q) * ada[(i, i)];
    let n_from_log = diag_fn(dim, |i| arg(i).ln() / (q * q).ln());
    // d log_q2(v) = dv / (v ln q^2), and v carries roundoff of order 1
    let log_cond = (0..k).map(|i| 1.0 / (arg(i) * (q * q).ln()).abs()).fold(1.0, f64::max);
    push("N = log_q2(I - (1-q^2) a+ a)", &[n_from_log, -n], Some(log_cond));
    let (b, bdag) = (&rep.b, &rep.bdag);
    push("b b+ - q b+ b = q^(-N)", &[b * bdag, bdag * b * -q, -diag_fn(dim, |i| q.powi(-(i as i32)))], None);
    let (k0, kp, km) = (&rep.k0, &rep.kplus, &rep.kminus);
    push("[K0,K+]=K+", &[k0 * kp, -(kp * k0), -kp], None);
    push("[K0,K-]=-K-", &[k0 * km, -(km * k0), km.clone()], None);
    let bracket = diag_fn(dim, |i| quantum_bracket(2.0 * k0[(i, i)], q * q));
    push("[K-,K+]=[2K0]_q2", &[km * kp, -(kp * km), -bracket], None);
    RelationReport { dim, q, interior: k, relations: rel }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_and_k0() {
        let rep = build_rep(0.5, 6).unwrap();
        for i in 0..6 {
            assert_eq!(rep.a[(i, 0)], 0.0);
        }
        assert!((rep.k0[(0, 0)] - 0.25).abs() < 1e-15);
        assert_eq!(rep.adag, rep.a.transpose());
    }

    #[test]
    fn small_dimension_is_rejected() {
        assert!(build_rep(0.5, 3).is_err());
        assert!(build_rep(1.0, 6).is_err());
    }

    #[test]
    fn relative_residuals_survive_extreme_bases() {
        for (q, dim) in [(0.3, 24), (1.0 / 0.1f64.sqrt(), 24), (2.0f64.sqrt(), 40)] {
            let r = check_relations(&build_rep(q, dim).unwrap());
            for rel in &r.relations {
                assert!(rel.relative() < 1e-12, "q={q} dim={dim} {rel:?}");
            }
        }
    }

    #[test]
    fn minimal_rep_relations() {
        let r = check_relations(&build_rep(0.5, 4).unwrap());
        assert_eq!(r.interior, 2);
        assert!(r.max_residual() < 1e-10, "{r:?}");
    }
}

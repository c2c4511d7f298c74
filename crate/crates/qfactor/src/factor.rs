//! q-Hamiltonian, alpha-operators and the (alpha, varsigma, Lambda) search.
//!
//! With R1 = sqrt(sigma/nabla x), R2 = sqrt(sigma_plus/Delta x) and
//! S = sqrt(nabla x_1), every operator is conjugated by the gauge A(s):
//!
//! ```text
//! down_a = A/S [ e^{(1-a)d} R1(s+1-a)/A(s+1-a) - e^{-a d} R2(s-a)/A(s-a) ]
//! up_a   = A/nabla x_1 [ R1(s) e^{(a-1)d} S/A - R2(s) e^{a d} S/A ]
//! ```
//!
//! so that up_a down_a is the Hamiltonian for every a.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{self, spectrum_coeffs, Family, FamilyKind, QLinearity, Support};
use crate::opalg::{
    classify_identity_multiple, compose, scalar, sigma_commutator, IdentityVerdict, ShiftExpr, POLE_CUTOFF,
};
use crate::par::{self, Exec};
use crate::qcore::{shift_f64, Shift};

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

fn usable(v: C64) -> bool {
    v.re.is_finite() && v.im.is_finite() && v.norm() <= POLE_CUTOFF
}

pub fn hamiltonian(fam: &Family) -> ShiftExpr {
    let lat = fam.lattice;
    let c0 = {
        let (sig, sigp) = (fam.sigma.clone(), fam.sigma_plus.clone());
        scalar(move |s| (sigp(s) / lat.delta_x(s) + sig(s) / lat.nabla_x(s)) / lat.nabla_x1(s))
    };
    let up = {
        let f = fam.clone();
        scalar(move |s| {
            -f.gauge(s) / (lat.nabla_x1(s) * f.gauge(s + 1.0)) * (f.root_sigma_plus)(s) * (f.root_sigma)(s + 1.0)
        })
    };
    let dn = {
        let f = fam.clone();
        scalar(move |s| {
            -f.gauge(s) / (lat.nabla_x1(s) * f.gauge(s - 1.0)) * (f.root_sigma)(s) * (f.root_sigma_plus)(s - 1.0)
        })
    };
    ShiftExpr::from_terms([(Shift::from_integer(-1), dn), (Shift::from_integer(0), c0), (Shift::from_integer(1), up)])
}

pub fn alpha_down(fam: &Family, alpha: Shift) -> ShiftExpr {
    let a = shift_f64(alpha);
    let one = Shift::from_integer(1);
    let lat = fam.lattice;
    let first = {
        let f = fam.clone();
        scalar(move |s| {
            let t = s + 1.0 - a;
            f.gauge(s) / lat.sqrt_nabla_x1(s) * (f.root_sigma)(t) / f.gauge(t)
        })
    };
    let second = {
        let f = fam.clone();
        scalar(move |s| {
            let t = s - a;
            -f.gauge(s) / lat.sqrt_nabla_x1(s) * (f.root_sigma_plus)(t) / f.gauge(t)
        })
    };
    ShiftExpr::from_terms([(one - alpha, first), (-alpha, second)])
}

pub fn alpha_up(fam: &Family, alpha: Shift) -> ShiftExpr {
    let a = shift_f64(alpha);
    let one = Shift::from_integer(1);
    let lat = fam.lattice;
    let first = {
        let f = fam.clone();
        scalar(move |s| {
            let t = s + a - 1.0;
            f.gauge(s) / lat.nabla_x1(s) * (f.root_sigma)(s) * lat.sqrt_nabla_x1(t) / f.gauge(t)
        })
    };
    let second = {
        let f = fam.clone();
        scalar(move |s| {
            let t = s + a;
            -f.gauge(s) / lat.nabla_x1(s) * (f.root_sigma_plus)(s) * lat.sqrt_nabla_x1(t) / f.gauge(t)
        })
    };
    ShiftExpr::from_terms([(alpha - one, first), (alpha, second)])
}

/// Applies `op` to Phi_n with the branch-aligned evaluation of Phi at
/// shifted nodes. Zero coefficients skip the (possibly undefined) Phi value.
pub fn apply_to_phi(fam: &Family, op: &ShiftExpr, n: usize, s: C64) -> C64 {
    op.terms()
        .map(|(k, c)| {
            let cv = c(s);
            if cv == zero() {
                return zero();
            }
            let v = fam.phi_at(n, s, *k);
            if v == zero() {
                zero()
            } else {
                cv * v
            }
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCheck {
    pub max_residual: f64,
    /// grid point where the maximum is attained
    pub at: Option<C64>,
    pub excluded: Vec<C64>,
}

/// Coefficientwise comparison of up_a down_a with the Hamiltonian, scaled by
/// max(1, |coefficient|).
pub fn verify_factorization(fam: &Family, alpha: Shift, grid: &[C64], tol: f64) -> Result<GridCheck> {
    let h = hamiltonian(fam);
    let prod = compose(&alpha_up(fam, alpha), &alpha_down(fam, alpha));
    let mut shifts = h.shifts();
    shifts.extend(prod.shifts());
    shifts.sort();
    shifts.dedup();
    let mut check = GridCheck { max_residual: 0.0, at: None, excluded: vec![] };
    let mut used = 0;
    for &s in grid {
        let vals: Vec<(C64, C64)> = shifts.iter().map(|&k| (h.coeff_at(k, s), prod.coeff_at(k, s))).collect();
        if vals.iter().any(|(a, b)| !usable(*a) || !usable(*b)) {
            check.excluded.push(s);
            continue;
        }
        used += 1;
        for (a, b) in vals {
            let r = (a - b).norm() / a.norm().max(1.0);
            if r > check.max_residual {
                check.max_residual = r;
                check.at = Some(s);
            }
        }
    }
    if used < 4 {
        return Err(Error::InsufficientGrid { usable: used, excluded: check.excluded.len() });
    }
    let _ = tol;
    Ok(check)
}

/// Left side of the first commutator condition,
/// S(s-1)S(s) R1(s-a)R2(s-a) / (nabla x_1(s-a) R1(s) R2(s-1)).
pub fn condition_one(fam: &Family, alpha: Shift, s: C64) -> Result<C64> {
    let a = shift_f64(alpha);
    let lat = fam.lattice;
    let t = s - a;
    let v = lat.sqrt_nabla_x1(s - 1.0) * lat.sqrt_nabla_x1(s) * (fam.root_sigma)(t) * (fam.root_sigma_plus)(t)
        / (lat.nabla_x1(t) * (fam.root_sigma)(s) * (fam.root_sigma_plus)(s - 1.0));
    if !usable(v) {
        return Err(Error::Pole { param: format!("condition one at s = {s}"), term: 0 });
    }
    Ok(v)
}

/// Left side of the second commutator condition; constant (= Lambda) exactly
/// when the varsigma-commutator is a multiple of the identity.
pub fn condition_two(fam: &Family, alpha: Shift, varsigma: C64, s: C64) -> Result<C64> {
    let a = shift_f64(alpha);
    let lat = fam.lattice;
    let (sig, sigp) = (&fam.sigma, &fam.sigma_plus);
    let t = s - a;
    let left = (sig(t + 1.0) / lat.nabla_x1(t + 1.0) + sigp(t) / lat.nabla_x1(t)) / lat.delta_x(t);
    let right = (sig(s) / lat.nabla_x(s) + sigp(s) / lat.delta_x(s)) / lat.nabla_x1(s);
    let v = left - varsigma * right;
    if !usable(v) {
        return Err(Error::Pole { param: format!("condition two at s = {s}"), term: 0 });
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FactorStatus {
    Solved,
    NoConstantVarsigma,
    Condition2Fails,
    Commuting,
}

impl FactorStatus {
    fn rank(self) -> u8 {
        match self {
            FactorStatus::Solved => 0,
            FactorStatus::Commuting => 1,
            FactorStatus::Condition2Fails => 2,
            FactorStatus::NoConstantVarsigma => 3,
        }
    }

    pub fn is_negative(self) -> bool {
        matches!(self, FactorStatus::NoConstantVarsigma | FactorStatus::Condition2Fails)
    }
}

/// Outcome of one alpha candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateOutcome {
    pub alpha: String,
    pub status: FactorStatus,
    pub varsigma: Option<C64>,
    pub lambda: Option<C64>,
    pub residual_cond1: f64,
    pub residual_cond2: Option<f64>,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationReport {
    pub family: String,
    pub params: BTreeMap<String, f64>,
    pub q: f64,
    /// exact alpha, e.g. "2" or "1/2"
    pub alpha: Option<String>,
    pub alpha_value: Option<f64>,
    pub varsigma: Option<f64>,
    /// grid mean of condition one before rounding to q^gamma
    pub varsigma_raw: Option<C64>,
    pub gamma: Option<f64>,
    #[serde(rename = "Lambda")]
    pub lambda: Option<f64>,
    pub status: FactorStatus,
    pub residual_cond1: f64,
    pub residual_cond2: Option<f64>,
    /// |Lambda - Lambda'| against the direct commutator classification
    pub cross_check: Option<f64>,
    pub excluded_points: Vec<String>,
    pub candidates_tested: usize,
    pub notes: Vec<String>,
}

impl FactorizationReport {
    pub fn alpha_shift(&self) -> Option<Shift> {
        self.alpha.as_deref().and_then(|a| a.parse::<Shift>().ok())
    }
}

/// {k/6 : k = -12..=18}
pub fn default_alpha_candidates() -> Vec<Shift> {
    (-12..=18).map(|k| Shift::new(k, 6)).collect()
}

/// Relative spread max|v - mean| / max(|mean|, 1e-300) of usable values.
fn spread(values: &[C64]) -> (C64, f64) {
    let mean = values.iter().sum::<C64>() / values.len() as f64;
    let dev = values.iter().map(|v| (v - mean).norm()).fold(0.0, f64::max);
    (mean, dev)
}

fn evaluate_candidate(fam: &Family, alpha: Shift, grid: &[C64], tol: f64) -> (CandidateOutcome, Vec<C64>) {
    let mut excluded = Vec::new();
    let mut vals = Vec::new();
    for &s in grid {
        match condition_one(fam, alpha, s) {
            Ok(v) => vals.push((s, v)),
            Err(_) => excluded.push(s),
        }
    }
    let label = alpha.to_string();
    let negative = |r: f64, ex: usize| CandidateOutcome {
        alpha: label.clone(),
        status: FactorStatus::NoConstantVarsigma,
        varsigma: None,
        lambda: None,
        residual_cond1: r,
        residual_cond2: None,
        excluded: ex,
    };
    if vals.len() < 4 {
        return (negative(f64::INFINITY, excluded.len()), excluded);
    }
    let (mean, dev) = spread(&vals.iter().map(|v| v.1).collect::<Vec<_>>());
    let rel1 = dev / mean.norm().max(1e-300);
    if rel1 > tol {
        return (negative(rel1, excluded.len()), excluded);
    }
    let mut c2 = Vec::new();
    for &(s, _) in &vals {
        match condition_two(fam, alpha, mean, s) {
            Ok(v) => c2.push(v),
            Err(_) => excluded.push(s),
        }
    }
    if c2.len() < 4 {
        let mut out = negative(rel1, excluded.len());
        out.status = FactorStatus::Condition2Fails;
        out.varsigma = Some(mean);
        return (out, excluded);
    }
    let (lam, dev2) = spread(&c2);
    let rel2 = dev2 / lam.norm().max(1.0);
    let status = if rel2 > tol {
        FactorStatus::Condition2Fails
    } else if lam.norm() <= tol {
        FactorStatus::Commuting
    } else {
        FactorStatus::Solved
    };
    let out = CandidateOutcome {
        alpha: label,
        status,
        varsigma: Some(mean),
        lambda: (status != FactorStatus::Condition2Fails).then_some(lam),
        residual_cond1: rel1,
        residual_cond2: Some(rel2),
        excluded: excluded.len(),
    };
    (out, excluded)
}

/// Rounds varsigma to q^gamma with gamma in {k/6} when within 1e-8.
pub fn round_to_q_power(varsigma: f64, q: f64) -> Option<(f64, f64)> {
    if !(varsigma > 0.0) {
        return None;
    }
    let g = varsigma.ln() / q.ln();
    let gr = (g * 6.0).round() / 6.0 + 0.0;
    let v = q.powf(gr);
    ((v - varsigma).abs() <= 1e-8 * varsigma.max(1.0)).then_some((gr, v))
}

pub fn search_factorization(
    fam: &Family,
    candidates: &[Shift],
    grid: &[C64],
    tol: f64,
    exec: Exec,
) -> FactorizationReport {
    let outcomes = par::map(exec, candidates, |&a| evaluate_candidate(fam, a, grid, tol));
    let mut report = FactorizationReport {
        family: fam.name.clone(),
        params: fam.params.clone(),
        q: fam.base(),
        alpha: None,
        alpha_value: None,
        varsigma: None,
        varsigma_raw: None,
        gamma: None,
        lambda: None,
        status: FactorStatus::NoConstantVarsigma,
        residual_cond1: f64::INFINITY,
        residual_cond2: None,
        cross_check: None,
        excluded_points: vec![],
        candidates_tested: candidates.len(),
        notes: vec![],
    };
    if outcomes.is_empty() {
        report.notes.push("no alpha candidates given".into());
        return report;
    }
    // best: lowest status rank, then smallest residual, then smallest |alpha|
    let best = outcomes
        .iter()
        .zip(candidates)
        .min_by(|(a, ka), (b, kb)| {
            let ra = a.0.residual_cond2.unwrap_or(a.0.residual_cond1);
            let rb = b.0.residual_cond2.unwrap_or(b.0.residual_cond1);
            a.0.status
                .rank()
                .cmp(&b.0.status.rank())
                .then(ra.partial_cmp(&rb).unwrap_or(std::cmp::Ordering::Equal))
                .then(shift_f64(**ka).abs().partial_cmp(&shift_f64(**kb).abs()).unwrap_or(std::cmp::Ordering::Equal))
        })
        .expect("nonempty");
    let ((out, excluded), &alpha) = best;
    report.status = out.status;
    report.residual_cond1 = out.residual_cond1;
    report.residual_cond2 = out.residual_cond2;
    report.excluded_points = excluded.iter().map(|s| format!("{s}")).collect();
    if out.status == FactorStatus::NoConstantVarsigma {
        report.notes.push(format!(
            "condition one is not constant for any of {} alpha candidates (smallest relative spread {:.3e} at alpha = {})",
            candidates.len(),
            out.residual_cond1,
            out.alpha
        ));
        return report;
    }
    report.alpha = Some(out.alpha.clone());
    report.alpha_value = Some(shift_f64(alpha));
    let vs = out.varsigma.expect("set with constant condition one");
    report.varsigma_raw = Some(vs);
    if vs.im.abs() > tol * vs.norm().max(1.0) {
        report.notes.push(format!("varsigma is not real: {vs}"));
    }
    match round_to_q_power(vs.re, fam.base()) {
        Some((g, v)) => {
            report.gamma = Some(g);
            report.varsigma = Some(v);
        }
        None => report.varsigma = Some(vs.re),
    }
    let solved: Vec<String> = outcomes
        .iter()
        .filter(|o| o.0.status == out.status && o.0.alpha != out.alpha)
        .map(|o| o.0.alpha.clone())
        .collect();
    if !solved.is_empty() && !out.status.is_negative() {
        report.notes.push(format!("other alpha with the same status: {}", solved.join(", ")));
    }
    if out.status == FactorStatus::Condition2Fails {
        report.notes.push(format!(
            "condition one is constant at alpha = {} (varsigma = {:.12}) but condition two varies (relative spread {:.3e})",
            out.alpha,
            vs.re,
            out.residual_cond2.unwrap_or(f64::NAN)
        ));
        return report;
    }
    let lam = out.lambda.expect("set for solved or commuting");
    if lam.im.abs() > tol * lam.norm().max(1.0) {
        report.notes.push(format!("Lambda is not real: {lam}"));
    }
    report.lambda = Some(if out.status == FactorStatus::Commuting { 0.0 } else { lam.re });
    // cross-validate with the commutator itself
    let vs_used = C64::new(report.varsigma.unwrap_or(vs.re), 0.0);
    let comm = sigma_commutator(&alpha_down(fam, alpha), &alpha_up(fam, alpha), vs_used);
    match classify_identity_multiple(&comm, grid, tol.max(1e-12) * lam.norm().max(1.0)) {
        Ok(cl) => {
            let l2 = cl.lambda.unwrap_or(C64::new(f64::NAN, 0.0));
            let gap = (l2 - lam).norm();
            report.cross_check = Some(if cl.verdict == IdentityVerdict::IdentityMultiple { gap } else { f64::INFINITY });
            if cl.verdict != IdentityVerdict::IdentityMultiple {
                report.notes.push(format!("direct commutator classification disagrees: {:?}", cl.verdict));
            }
        }
        Err(e) => report.notes.push(format!("direct commutator classification failed: {e}")),
    }
    if out.status == FactorStatus::Commuting {
        report.notes.push("the alpha-operators commute up to varsigma = 1; no dynamical algebra (Lambda = 0)".into());
    }
    report
}

/// Golden-section refinement of alpha in [lo, hi] minimizing the relative
/// spread of condition one. Returns (alpha, spread).
pub fn refine_alpha(fam: &Family, lo: f64, hi: f64, grid: &[C64], iters: usize) -> (f64, f64) {
    const DEN: i64 = 720_720;
    let spread_at = |a: f64| {
        let k = Shift::new((a * DEN as f64).round() as i64, DEN);
        let vals: Vec<C64> = grid.iter().filter_map(|&s| condition_one(fam, k, s).ok()).collect();
        if vals.len() < 4 {
            return f64::INFINITY;
        }
        let (m, d) = spread(&vals);
        d / m.norm().max(1e-300)
    };
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (spread_at(c), spread_at(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = spread_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = spread_at(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenResidual {
    pub n: usize,
    pub lambda: f64,
    /// max |H Phi_n - lambda_n Phi_n| over the grid
    pub max_abs: f64,
    pub max_phi: f64,
    /// max_abs / max_phi
    pub relative: f64,
    pub at: Option<C64>,
    pub excluded: usize,
}

pub fn eigen_residual(fam: &Family, h: &ShiftExpr, n: usize, grid: &[C64]) -> EigenResidual {
    let lam = (fam.lambda)(n);
    let mut out = EigenResidual { n, lambda: lam, max_abs: 0.0, max_phi: 0.0, relative: 0.0, at: None, excluded: 0 };
    for &s in grid {
        let phi = fam.phi(n, s);
        let hphi = apply_to_phi(fam, h, n, s);
        let r = hphi - phi * lam;
        if !usable(r) || !usable(phi) {
            out.excluded += 1;
            continue;
        }
        out.max_phi = out.max_phi.max(phi.norm());
        if r.norm() > out.max_abs {
            out.max_abs = r.norm();
            out.at = Some(s);
        }
    }
    out.relative = out.max_abs / out.max_phi.max(f64::MIN_POSITIVE);
    out
}

pub fn eigen_residuals(fam: &Family, n_max: usize, grid: &[C64], exec: Exec) -> Vec<EigenResidual> {
    let h = hamiltonian(fam);
    par::map_range(exec, n_max + 1, |n| eigen_residual(fam, &h, n, grid))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub coeff: C64,
    /// max |lhs - coeff * rhs| / max |lhs|
    pub residual: f64,
}

/// Complex least-squares c minimizing sum |lhs - c rhs|^2.
pub fn fit(lhs: &[C64], rhs: &[C64]) -> Fit {
    let mut num = zero();
    let mut den = 0.0;
    for (l, r) in lhs.iter().zip(rhs) {
        num += r.conj() * l;
        den += r.norm_sqr();
    }
    let coeff = if den > 0.0 { num / den } else { zero() };
    let scale = lhs.iter().map(|l| l.norm()).fold(0.0, f64::max).max(rhs.iter().map(|r| r.norm()).fold(0.0, f64::max));
    let worst = lhs.iter().zip(rhs).map(|(l, r)| (l - coeff * r).norm()).fold(0.0, f64::max);
    Fit { coeff, residual: worst / scale.max(f64::MIN_POSITIVE) }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderResult {
    pub n: usize,
    pub down: Fit,
    pub up: Fit,
    pub residual: f64,
}

/// Fits down_a Phi_n against Phi_{n-1} and up_a Phi_n against Phi_{n+1}.
pub fn ladder_check(fam: &Family, alpha: Shift, n: usize, grid: &[C64], tol: f64) -> Result<LadderResult> {
    let down = alpha_down(fam, alpha);
    let up = alpha_up(fam, alpha);
    let pts: Vec<C64> = grid.iter().copied().filter(|&s| usable(fam.phi(n, s))).collect();
    let ld: Vec<C64> = pts.iter().map(|&s| apply_to_phi(fam, &down, n, s)).collect();
    let rd: Vec<C64> = if n == 0 {
        vec![zero(); pts.len()]
    } else {
        pts.iter().map(|&s| fam.phi(n - 1, s)).collect()
    };
    let down_fit = if n == 0 {
        let scale = pts.iter().map(|&s| fam.phi(0, s).norm()).fold(0.0, f64::max);
        Fit { coeff: zero(), residual: ld.iter().map(|v| v.norm()).fold(0.0, f64::max) / scale.max(f64::MIN_POSITIVE) }
    } else {
        fit(&ld, &rd)
    };
    let lu: Vec<C64> = pts.iter().map(|&s| apply_to_phi(fam, &up, n, s)).collect();
    let ru: Vec<C64> = pts.iter().map(|&s| fam.phi(n + 1, s)).collect();
    let up_fit = fit(&lu, &ru);
    let residual = down_fit.residual.max(up_fit.residual);
    if !(residual <= tol) {
        return Err(Error::NotALadder { residual });
    }
    Ok(LadderResult { n, down: down_fit, up: up_fit, residual })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderCoeffs {
    /// D_n for n = 0..=n_max (D_0 = 0)
    pub d: Vec<C64>,
    /// U_n for n = 0..n_max
    pub u: Vec<C64>,
    /// max |D_n U_{n-1} - lambda_n|
    pub product_residual: f64,
    /// max |lambda_1 + varsigma lambda_n - U_n D_{n+1}|, when varsigma is known
    pub shift_residual: Option<f64>,
    pub fit_residual: f64,
}

pub fn ladder_coeffs(
    fam: &Family,
    alpha: Shift,
    n_max: usize,
    varsigma: Option<f64>,
    lambda_scale: f64,
    grid: &[C64],
) -> LadderCoeffs {
    let mut d = vec![zero(); n_max + 2];
    let mut u = vec![zero(); n_max + 1];
    let mut worst: f64 = 0.0;
    for n in 0..=n_max + 1 {
        if let Ok(r) = ladder_check(fam, alpha, n, grid, f64::INFINITY) {
            d[n] = r.down.coeff;
            if n <= n_max {
                u[n] = r.up.coeff;
                worst = worst.max(r.up.residual);
            }
            worst = worst.max(r.down.residual);
        }
    }
    let lam = |n: usize| (fam.lambda)(n) / lambda_scale;
    let product_residual =
        (1..=n_max).map(|n| (d[n] * u[n - 1] - lam(n)).norm()).fold(0.0, f64::max);
    let shift_residual = varsigma.map(|vs| {
        (0..n_max)
            .map(|n| {
                let lhs = lam(1) + vs * lam(n);
                (lhs - u[n] * d[n + 1]).norm().max((lhs - lam(n + 1)).abs())
            })
            .fold(0.0, f64::max)
    });
    d.truncate(n_max + 1);
    LadderCoeffs { d, u, product_residual, shift_residual, fit_residual: worst }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamLadderResult {
    pub n: usize,
    pub target_down: BTreeMap<String, f64>,
    pub target_up: BTreeMap<String, f64>,
    pub down: Fit,
    pub up: Fit,
    pub expected_down: f64,
    pub expected_up: f64,
    /// max of fit residuals and | |coeff| - expected | / expected
    pub residual: f64,
    /// d_n recurrence residual (Wall only)
    pub norm_recurrence: Option<f64>,
}

fn with_param(fam: &Family, edits: &[(&str, f64)]) -> BTreeMap<String, f64> {
    let mut p = fam.params.clone();
    for (k, v) in edits {
        p.insert(k.to_string(), *v);
    }
    p
}

fn rebuild(fam: &Family, params: &BTreeMap<String, f64>) -> Result<Family> {
    families::build(&fam.name, fam.base(), params)
}

/// Parameter-shifting ladders of the Wall, discrete q-Laguerre and
/// q-Meixner/q-Charlier families, using the explicit operator displays.
pub fn param_ladder_check(fam: &Family, n: usize, grid: &[C64], tol: f64) -> Result<ParamLadderResult> {
    let q = fam.base();
    let sq = |v: f64| v.sqrt();
    let qs = |s: C64| (s * q.ln()).exp();
    let one = C64::new(1.0, 0.0);
    let c = |v: f64| C64::new(v, 0.0);
    let (pd, pu, down_f, up_f, exp_d, exp_u, norm_rec): (
        BTreeMap<String, f64>,
        BTreeMap<String, f64>,
        Box<dyn Fn(C64) -> C64 + '_>,
        Box<dyn Fn(C64) -> C64 + '_>,
        f64,
        f64,
        Option<f64>,
    ) = match fam.kind {
        FamilyKind::Wall => {
            let a = fam.param("a").unwrap_or(0.3);
            let ap = a / q;
            let down = move |s: C64| {
                let x = qs(s);
                ((one - x * q).sqrt() * fam.phi(n, s + 1.0) - fam.phi(n, s) * sq(a * q)) / (x * (1.0 - q)).sqrt()
            };
            let up = move |s: C64| {
                let x = qs(s);
                ((q * (one - x)).sqrt() * fam.phi(n, s - 1.0) - fam.phi(n, s) * sq(ap * q)) / (x * (1.0 - q)).sqrt()
            };
            // d_n(a) = (1-a) q^{n/2} / sqrt(a(1-q^{n+1})) d_{n+1}(a/q)
            let next = rebuild(fam, &with_param(fam, &[("a", ap)]))?;
            let rec = (0..=n)
                .map(|m| {
                    let lhs = fam.d(m);
                    let rhs = next.d(m + 1) * ((1.0 - a) * q.powf(m as f64 / 2.0) / (a * (1.0 - q.powi(m as i32 + 1))).sqrt());
                    (lhs - rhs).norm() / lhs.norm()
                })
                .fold(0.0, f64::max);
            (
                with_param(fam, &[("a", a * q)]),
                with_param(fam, &[("a", ap)]),
                Box::new(down),
                Box::new(up),
                ((1.0 - q.powi(-(n as i32))) / (1.0 - 1.0 / q)).sqrt(),
                ((1.0 - q.powi(-(n as i32) - 1)) / (1.0 - 1.0 / q)).sqrt(),
                Some(rec),
            )
        }
        FamilyKind::DiscreteQLaguerre => {
            let al = fam.param("alpha").unwrap_or(1.0);
            let down = move |s: C64| {
                (qs(-s / 2.0) * q.powf(-al / 2.0) * fam.phi(n, s)
                    - (qs(s - 1.0) + 1.0).sqrt() * qs(-(s - 1.0) / 2.0) * fam.phi(n, s - 1.0))
                    / sq(1.0 - q)
            };
            let up = move |s: C64| {
                qs(-s / 2.0) * (fam.phi(n, s) * q.powf(-(al - 1.0) / 2.0) - (qs(s) + 1.0).sqrt() * fam.phi(n, s + 1.0))
                    / sq(1.0 - q)
            };
            (
                with_param(fam, &[("alpha", al + 1.0)]),
                with_param(fam, &[("alpha", al - 1.0)]),
                Box::new(down),
                Box::new(up),
                ((1.0 - q.powi(n as i32)) / (1.0 - q)).sqrt(),
                ((1.0 - q.powi(n as i32 + 1)) / (1.0 - q)).sqrt(),
                None,
            )
        }
        FamilyKind::QMeixner | FamilyKind::QCharlier => {
            let b = fam.param("b").unwrap_or(0.0);
            let cc = fam.param("c").unwrap_or(1.0);
            let bfun = move |s: C64, b: f64, cc: f64| qs(s) * cc * (one - qs(s + 1.0) * b);
            let dfun = move |s: C64, b: f64, cc: f64| (one - qs(s)) * (one + qs(s) * (b * cc));
            let down = move |s: C64| {
                (dfun(s + 1.0, b, cc).sqrt() * fam.phi(n, s + 1.0) - bfun(s, b, cc).sqrt() * fam.phi(n, s)) / sq(1.0 - q)
            };
            let (bp, cp) = (b / q, cc * q);
            let up = move |s: C64| {
                let prev = fam.phi(n, s - 1.0);
                let prev = if usable(prev) { prev } else { zero() };
                (dfun(s, bp, cp).sqrt() * prev - bfun(s, bp, cp).sqrt() * fam.phi(n, s)) / sq(1.0 - q)
            };
            let (pd, pu) = if fam.kind == FamilyKind::QCharlier {
                (with_param(fam, &[("c", cc / q)]), with_param(fam, &[("c", cc * q)]))
            } else {
                (with_param(fam, &[("b", b * q), ("c", cc / q)]), with_param(fam, &[("b", bp), ("c", cp)]))
            };
            (
                pd,
                pu,
                Box::new(down),
                Box::new(up),
                ((1.0 - q.powi(n as i32)) / (1.0 - q)).sqrt(),
                ((1.0 - q.powi(n as i32 + 1)) / (1.0 - q)).sqrt(),
                None,
            )
        }
        _ => {
            return Err(Error::Capability { family: fam.name.clone(), what: "parameter-shifting ladders".into() });
        }
    };
    let fd = rebuild(fam, &pd)?;
    let fu = rebuild(fam, &pu)?;
    let down_pts: Vec<C64> = grid.to_vec();
    // the raising displays reach s - 1; on one-sided supports keep s >= 1
    let up_pts: Vec<C64> = match fam.support {
        Support::DiscreteSum { lo: Some(lo), .. } => grid.iter().copied().filter(|s| s.re >= lo as f64 + 1.0).collect(),
        _ => grid.to_vec(),
    };
    let ld: Vec<C64> = down_pts.iter().map(|&s| down_f(s)).collect();
    let rd: Vec<C64> = if n == 0 {
        vec![zero(); down_pts.len()]
    } else {
        down_pts.iter().map(|&s| fd.phi(n - 1, s)).collect()
    };
    let down = if n == 0 {
        let scale = down_pts.iter().map(|&s| fam.phi(0, s).norm()).fold(0.0, f64::max);
        Fit { coeff: zero(), residual: ld.iter().map(|v| v.norm()).fold(0.0, f64::max) / scale }
    } else {
        fit(&ld, &rd)
    };
    let lu: Vec<C64> = up_pts.iter().map(|&s| up_f(s)).collect();
    let ru: Vec<C64> = up_pts.iter().map(|&s| fu.phi(n + 1, s)).collect();
    let up = fit(&lu, &ru);
    let coeff_gap = |f: &Fit, e: f64| if e == 0.0 { f.coeff.norm() } else { (f.coeff.norm() - e).abs() / e };
    let mut residual = down.residual.max(up.residual).max(coeff_gap(&up, exp_u));
    if n > 0 {
        residual = residual.max(coeff_gap(&down, exp_d));
    }
    let _ = c;
    let result = ParamLadderResult {
        n,
        target_down: pd,
        target_up: pu,
        down,
        up,
        expected_down: exp_d,
        expected_up: exp_u,
        residual,
        norm_recurrence: norm_rec,
    };
    if !(residual <= tol) {
        return Err(Error::NotALadder { residual });
    }
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShiftKind {
    Forward,
    Backward,
}

/// Pointwise residual of the polynomial forward/backward shift identities,
/// relative to the size of the right-hand side.
pub fn shift_operator_check(fam: &Family, kind: ShiftKind, n: usize, grid: &[C64]) -> Result<f64> {
    let q = fam.base();
    let qs = |s: C64| (s * q.ln()).exp();
    let one = C64::new(1.0, 0.0);
    let p = |f: &Family, m: usize, s: C64| (f.poly)(m, s);
    let mut worst: f64 = 0.0;
    // each side is a combination of nearly equal values; scale by the sum of
    // the magnitudes of all terms entering the identity
    let mut push = |terms: &[C64], rhs: C64| {
        let lhs: C64 = terms.iter().sum();
        let scale = terms.iter().map(|t| t.norm()).sum::<f64>() + rhs.norm();
        if scale < 1e-300 {
            return;
        }
        worst = worst.max((lhs - rhs).norm() / scale);
    };
    match fam.kind {
        FamilyKind::Wall => {
            let a = fam.param("a").unwrap_or(0.3);
            match kind {
                ShiftKind::Forward => {
                    if n == 0 {
                        return Err(Error::Param("forward shift needs n >= 1".into()));
                    }
                    let t = rebuild(fam, &with_param(fam, &[("a", a * q)]))?;
                    for &s in grid {
                        let lhs = [p(fam, n, s + 1.0), -p(fam, n, s)];
                        let rhs = qs(s + 1.0 - n as f64) * ((1.0 - q.powi(n as i32)) / (1.0 - a * q)) * p(&t, n - 1, s);
                        push(&lhs, rhs);
                    }
                }
                ShiftKind::Backward => {
                    let t = rebuild(fam, &with_param(fam, &[("a", a / q)]))?;
                    for &s in grid {
                        let lhs = [(one - qs(s)) * p(fam, n, s - 1.0), -p(fam, n, s) * a];
                        let rhs = p(&t, n + 1, s) * (1.0 - a);
                        push(&lhs, rhs);
                    }
                }
            }
        }
        FamilyKind::DiscreteQLaguerre => {
            let al = fam.param("alpha").unwrap_or(1.0);
            let qa = q.powf(al);
            // poly includes the 1/(q;q)_n normalization of L_n
            match kind {
                ShiftKind::Forward => {
                    if n == 0 {
                        return Err(Error::Param("forward shift needs n >= 1".into()));
                    }
                    let t = rebuild(fam, &with_param(fam, &[("alpha", al + 1.0)]))?;
                    for &s in grid {
                        let lhs = [p(fam, n, s), -p(fam, n, s - 1.0)];
                        let rhs = qs(s) * qa * p(&t, n - 1, s);
                        push(&lhs, rhs);
                    }
                }
                ShiftKind::Backward => {
                    let t = rebuild(fam, &with_param(fam, &[("alpha", al - 1.0)]))?;
                    for &s in grid {
                        let lhs = [p(fam, n, s), -(one + qs(s)) * qa * p(fam, n, s + 1.0)];
                        let rhs = p(&t, n + 1, s) * (1.0 - q.powi(n as i32 + 1));
                        push(&lhs, rhs);
                    }
                }
            }
        }
        FamilyKind::QMeixner | FamilyKind::QCharlier => {
            let b = fam.param("b").unwrap_or(0.0);
            let cc = fam.param("c").unwrap_or(1.0);
            let charlier = fam.kind == FamilyKind::QCharlier;
            match kind {
                ShiftKind::Forward => {
                    if n == 0 {
                        return Err(Error::Param("forward shift needs n >= 1".into()));
                    }
                    let edits: Vec<(&str, f64)> =
                        if charlier { vec![("c", cc / q)] } else { vec![("b", b * q), ("c", cc / q)] };
                    let t = rebuild(fam, &with_param(fam, &edits))?;
                    for &s in grid {
                        let lhs = [p(fam, n, s), -p(fam, n, s + 1.0)];
                        let rhs = qs(-s) * ((1.0 - q.powi(n as i32)) / (cc * (1.0 - b * q))) * p(&t, n - 1, s);
                        push(&lhs, rhs);
                    }
                }
                ShiftKind::Backward => {
                    let edits: Vec<(&str, f64)> =
                        if charlier { vec![("c", cc * q)] } else { vec![("b", b / q), ("c", cc * q)] };
                    let t = rebuild(fam, &with_param(fam, &edits))?;
                    for &s in grid {
                        let x = qs(s);
                        let lhs = [x * cc * (one - x * b) * p(fam, n, s), -(one - x) * (one + x * (b * cc)) * p(fam, n, s - 1.0)];
                        let rhs = x * (cc * (1.0 - b)) * p(&t, n + 1, s);
                        push(&lhs, rhs);
                    }
                }
            }
        }
        _ => return Err(Error::Capability { family: fam.name.clone(), what: "forward/backward shift operators".into() }),
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjointnessResult {
    pub lhs: C64,
    pub rhs: C64,
    pub gap: f64,
    pub terms: usize,
}

/// <down_a Phi_{n+1}, Phi_k> against <Phi_{n+1}, up_a Phi_k> with the
/// inner product sum Phi_n Phi_m nabla x_1 / A^2 over the discrete support.
pub fn adjointness_check(fam: &Family, n: usize, k: usize, alpha: Shift, tol: f64) -> Result<AdjointnessResult> {
    let (lo, hi, branches) = match &fam.support {
        Support::DiscreteSum { lo, hi, branches } => (*lo, *hi, branches.clone()),
        _ => return Err(Error::Capability { family: fam.name.clone(), what: "adjointness on a discrete support".into() }),
    };
    let down = alpha_down(fam, alpha);
    let up = alpha_up(fam, alpha);
    let lat = fam.lattice;
    let term = |s: C64| -> (C64, C64) {
        let m = lat.nabla_x1(s) / fam.gauge(s).powi(2);
        let clean = |v: C64| if usable(v) { v } else { zero() };
        let l = clean(apply_to_phi(fam, &down, n + 1, s)) * clean(fam.phi(k, s)) * m;
        let r = clean(fam.phi(n + 1, s)) * clean(apply_to_phi(fam, &up, k, s)) * m;
        (clean(l), clean(r))
    };
    let mut lhs = zero();
    let mut rhs = zero();
    let mut terms = 0;
    for br in &branches {
        let mut run = |start: i64, step: i64, end: Option<i64>| -> Result<()> {
            let mut j = start;
            let mut small = 0;
            loop {
                if let Some(e) = end {
                    if (step > 0 && j > e) || (step < 0 && j < e) {
                        return Ok(());
                    }
                }
                let (l, r) = term(br.offset + j as f64);
                lhs += l * br.sign;
                rhs += r * br.sign;
                terms += 1;
                if l.norm().max(r.norm()) < tol * 1e-3 {
                    small += 1;
                    if small >= 8 && end.is_none() {
                        return Ok(());
                    }
                } else {
                    small = 0;
                }
                if (j - start).abs() > 20_000 {
                    return Err(Error::Truncation { tail: l.norm().max(r.norm()), suggested: j + step * 1000 });
                }
                j += step;
            }
        };
        run(lo.unwrap_or(0), 1, hi)?;
        if lo.is_none() {
            run(-1, -1, None)?;
        }
    }
    Ok(AdjointnessResult { lhs, rhs, gap: (lhs - rhs).norm(), terms })
}

/// Max over n = 1..=n_max of |r^{-1}(lambda_n - 1) - lambda_{n-1} - C| with
/// C = r^{-1}((1-r)C3 - 1), for eigenvalues normalized by Lambda. The base
/// r is q for q-linear spectra and 1/q for q^-1-linear ones.
pub fn appendix_recurrence_residual(fam: &Family, lambda_scale: f64, n_max: usize) -> Result<f64> {
    let q = fam.base();
    let lam = |n: usize| (fam.lambda)(n) / lambda_scale;
    let r = match families::spectrum::fit_linearity(&|n| (fam.lambda)(n), q, 1e-10) {
        QLinearity::QLinear => q,
        QLinearity::QInverseLinear => 1.0 / q,
        QLinearity::Neither => {
            return Err(Error::Capability { family: fam.name.clone(), what: "appendix recurrence (spectrum is neither q- nor q^-1-linear)".into() })
        }
    };
    let c3 = spectrum_coeffs(fam).c3() / lambda_scale;
    let cc = ((1.0 - r) * c3 - 1.0) / r;
    Ok((1..=n_max).map(|n| ((lam(n) - 1.0) / r - lam(n - 1) - cc).abs()).fold(0.0, f64::max))
}

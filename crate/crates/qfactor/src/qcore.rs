//! Scalar q-calculus: q-numbers, q-Pochhammer symbols, basic hypergeometric
//! series and the lattice x(s) = c1 q^s + c2 q^-s + c3.

use num_complex::Complex64 as C64;
use num_rational::Ratio;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact shift amount used for lattice offsets and operator shifts.
pub type Shift = Ratio<i64>;

pub const DEFAULT_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QBase(f64);

impl QBase {
    pub fn new(q: f64) -> Result<Self> {
        if !(q.is_finite() && q > 0.0 && q != 1.0) {
            return Err(Error::InvalidBase(q));
        }
        Ok(QBase(q))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// 0 < q < 1 is the regime the catalog is tuned for; q > 1 is accepted.
    pub fn is_primary(self) -> bool {
        self.0 < 1.0
    }

    pub fn ln(self) -> f64 {
        self.0.ln()
    }

    /// q^s for complex s.
    pub fn pow(self, s: C64) -> C64 {
        (s * self.0.ln()).exp()
    }

    pub fn powf(self, s: f64) -> f64 {
        self.0.powf(s)
    }
}

pub fn k_q(q: f64) -> f64 {
    q.sqrt() - 1.0 / q.sqrt()
}

/// Symmetric q-number (q^{n/2} - q^{-n/2}) / (q^{1/2} - q^{-1/2}).
pub fn q_number(n: f64, q: f64) -> f64 {
    (q.powf(n / 2.0) - q.powf(-n / 2.0)) / k_q(q)
}

pub fn shift_f64(k: Shift) -> f64 {
    k.to_f64().unwrap_or(f64::NAN)
}

/// Length of a q-Pochhammer product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PochLen {
    Finite(u32),
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PochValue {
    pub value: C64,
    pub factors: usize,
    /// bound on |tail product - 1| for truncated infinite products
    pub tail_bound: f64,
}

/// (a; q)_n, or (a; q)_inf truncated once |a q^k| < tol.
pub fn q_pochhammer(a: C64, q: f64, n: PochLen, tol: f64) -> Result<PochValue> {
    match n {
        PochLen::Finite(n) => {
            let mut p = C64::new(1.0, 0.0);
            let mut aq = a;
            for _ in 0..n {
                p *= C64::new(1.0, 0.0) - aq;
                aq *= q;
            }
            Ok(PochValue { value: p, factors: n as usize, tail_bound: 0.0 })
        }
        PochLen::Infinite => {
            if !(q > 0.0 && q < 1.0) {
                return Err(Error::Domain(format!(
                    "infinite q-Pochhammer product needs 0 < q < 1, got {q}"
                )));
            }
            let mut p = C64::new(1.0, 0.0);
            let mut aq = a;
            let mut k = 0usize;
            while aq.norm() >= tol || k < 2 {
                p *= C64::new(1.0, 0.0) - aq;
                aq *= q;
                k += 1;
                if k > 100_000 {
                    return Err(Error::Convergence { terms: k, last: aq.norm() });
                }
            }
            // |prod_{j>=k}(1 - a q^j) - 1| <= exp(|a q^k|/(1-q)) - 1
            let tail = (aq.norm() / (1.0 - q)).exp_m1();
            Ok(PochValue { value: p, factors: k, tail_bound: tail })
        }
    }
}

/// (a; q)_inf with the default tolerance; q must lie in (0, 1).
pub fn qpoch_inf(a: C64, q: f64) -> C64 {
    let mut p = C64::new(1.0, 0.0);
    let mut aq = a;
    let mut k = 0;
    while aq.norm() >= DEFAULT_TOL * 1e-2 || k < 2 {
        p *= C64::new(1.0, 0.0) - aq;
        aq *= q;
        k += 1;
        if k > 20_000 {
            break;
        }
    }
    p
}

/// (a; q)_n for integer n >= 0.
pub fn qpoch_n(a: C64, q: f64, n: usize) -> C64 {
    let mut p = C64::new(1.0, 0.0);
    let mut aq = a;
    for _ in 0..n {
        p *= C64::new(1.0, 0.0) - aq;
        aq *= q;
    }
    p
}

/// (a; q)_s for complex s, defined as (a; q)_inf / (a q^s; q)_inf.
pub fn qpoch_s(a: C64, q: f64, s: C64) -> C64 {
    let qs = (s * q.ln()).exp();
    qpoch_inf(a, q) / qpoch_inf(a * qs, q)
}

/// 1 / (a; q)_s, written as (a q^s; q)_inf / (a; q)_inf so that it vanishes
/// (instead of overflowing) at the poles of (a; q)_s.
pub fn recip_qpoch_s(a: C64, q: f64, s: C64) -> C64 {
    let qs = (s * q.ln()).exp();
    qpoch_inf(a * qs, q) / qpoch_inf(a, q)
}

/// If `a` equals q^{-m} for a nonnegative integer m, return m.
fn terminating_degree(a: C64, q: f64) -> Option<usize> {
    if a.norm() == 0.0 || a.im.abs() > 1e-12 * a.norm() || a.re <= 0.0 {
        return None;
    }
    let m = -(a.re.ln() / q.ln());
    let mr = m.round();
    if !(0.0..=10_000.0).contains(&mr) {
        return None;
    }
    let back = q.powf(-mr);
    if ((a.re - back) / back).abs() < 1e-10 {
        Some(mr as usize)
    } else {
        None
    }
}

/// The basic hypergeometric series r_phi_s with the standard
/// [(-1)^k q^{k(k-1)/2}]^{1+s-r} factor.
pub fn basic_hypergeometric(
    numerators: &[C64],
    denominators: &[C64],
    q: f64,
    z: C64,
    max_terms: usize,
    tol: f64,
) -> Result<C64> {
    let r = numerators.len() as i64;
    let sden = denominators.len() as i64;
    let excess = 1 + sden - r;
    let stop = numerators.iter().filter_map(|&a| terminating_degree(a, q)).min();

    let one = C64::new(1.0, 0.0);
    let mut term = one;
    let mut sum = one;
    let mut small_run = 0;
    let mut qk = 1.0f64;
    let limit = stop.unwrap_or(max_terms);
    for k in 0..limit {
        let mut num = one;
        for &a in numerators {
            num *= one - a * qk;
        }
        let mut den = C64::new(1.0 - qk * q, 0.0);
        for (j, &b) in denominators.iter().enumerate() {
            let f = one - b * qk;
            if f.norm() < 1e-300 || (f.norm() < 1e-14 && (b * qk).norm() > 0.5) {
                return Err(Error::Pole { param: format!("denominator #{j} = {b}"), term: k });
            }
            den *= f;
        }
        let mut ratio = num / den * z;
        if excess != 0 {
            ratio *= C64::new(-qk, 0.0).powi(excess as i32);
        }
        term *= ratio;
        sum += term;
        qk *= q;
        if stop.is_none() {
            if term.norm() <= tol * sum.norm().max(f64::MIN_POSITIVE) {
                small_run += 1;
                if small_run >= 3 {
                    return Ok(sum);
                }
            } else {
                small_run = 0;
            }
        }
    }
    if stop.is_none() {
        return Err(Error::Convergence { terms: max_terms, last: term.norm() });
    }
    Ok(sum)
}

/// Terminating or rapidly convergent r_phi_s with default limits.
pub fn phi(numerators: &[C64], denominators: &[C64], q: f64, z: C64) -> C64 {
    basic_hypergeometric(numerators, denominators, q, z, 2000, 1e-17).unwrap_or(C64::new(f64::NAN, f64::NAN))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LatticeKind {
    QLinearUp,
    QLinearDown,
    QQuadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub q: QBase,
    pub kind: LatticeKind,
}

impl Lattice {
    pub fn new(c1: f64, c2: f64, c3: f64, q: f64) -> Result<Self> {
        let q = QBase::new(q)?;
        let kind = match (c1 != 0.0, c2 != 0.0) {
            (true, false) => LatticeKind::QLinearUp,
            (false, true) => LatticeKind::QLinearDown,
            (true, true) => LatticeKind::QQuadratic,
            (false, false) => return Err(Error::Param("lattice with c1 = c2 = 0 is constant".into())),
        };
        Ok(Lattice { c1, c2, c3, q, kind })
    }

    /// x(s) = c q^s with |c| = |k_q|^{-1/2}, sign chosen so that the
    /// lattice increments are positive.
    pub fn q_linear_up(q: f64) -> Result<Self> {
        let c = 1.0 / k_q(QBase::new(q)?.value()).abs().sqrt();
        let sign = if q < 1.0 { -1.0 } else { 1.0 };
        Lattice::new(sign * c, 0.0, 0.0, q)
    }

    /// x(s) = c q^-s, normalized like [`Lattice::q_linear_up`].
    pub fn q_linear_down(q: f64) -> Result<Self> {
        let c = 1.0 / k_q(QBase::new(q)?.value()).abs().sqrt();
        let sign = if q < 1.0 { 1.0 } else { -1.0 };
        Lattice::new(0.0, sign * c, 0.0, q)
    }

    /// x(s) = (q^s + q^-s)/2, which is cos(theta) on q^s = e^{i theta}.
    pub fn askey_wilson(q: f64) -> Result<Self> {
        Lattice::new(0.5, 0.5, 0.0, q)
    }

    pub fn base(&self) -> f64 {
        self.q.value()
    }

    /// mu with q^mu = c1/c2 (q-quadratic lattices only).
    pub fn mu(&self) -> Option<f64> {
        match self.kind {
            LatticeKind::QQuadratic => Some((self.c1 / self.c2).ln() / self.q.ln()),
            _ => None,
        }
    }

    pub fn x(&self, s: C64) -> C64 {
        let qs = self.q.pow(s);
        let mut v = C64::new(self.c3, 0.0);
        if self.c1 != 0.0 {
            v += qs * self.c1;
        }
        if self.c2 != 0.0 {
            v += self.c2 / qs;
        }
        v
    }

    /// x_k(s) = x(s + k/2).
    pub fn xk(&self, k: Shift, s: C64) -> C64 {
        self.x(s + shift_f64(k) / 2.0)
    }

    /// Delta x(s) = x(s+1) - x(s).
    pub fn delta_x(&self, s: C64) -> C64 {
        self.nabla_x1(s + 0.5)
    }

    /// nabla x(s) = x(s) - x(s-1).
    pub fn nabla_x(&self, s: C64) -> C64 {
        self.nabla_x1(s - 0.5)
    }

    /// nabla x_1(s) = x(s+1/2) - x(s-1/2) = k_q (c1 q^s - c2 q^-s).
    pub fn nabla_x1(&self, s: C64) -> C64 {
        let qs = self.q.pow(s);
        let mut v = C64::new(0.0, 0.0);
        if self.c1 != 0.0 {
            v += qs * self.c1;
        }
        if self.c2 != 0.0 {
            v -= self.c2 / qs;
        }
        v * k_q(self.base())
    }

    /// Delta x_1(s) = x_1(s+1) - x_1(s).
    pub fn delta_x1(&self, s: C64) -> C64 {
        self.nabla_x1(s + 1.0)
    }

    /// A square root of nabla x_1(s) that is analytic in s on the strips
    /// used by the checks (no principal-branch jumps along theta-grids).
    pub fn sqrt_nabla_x1(&self, s: C64) -> C64 {
        let q = self.q;
        let k = k_q(self.base());
        match self.kind {
            LatticeKind::QLinearUp => C64::new(k * self.c1, 0.0).sqrt() * q.pow(s / 2.0),
            LatticeKind::QLinearDown => C64::new(-k * self.c2, 0.0).sqrt() / q.pow(s / 2.0),
            LatticeKind::QQuadratic => {
                if self.c1 * self.c2 > 0.0 {
                    let g = (self.c1 * self.c2).sqrt() * self.c1.signum();
                    let shift = self.mu().unwrap_or(0.0) / 2.0;
                    let t = s + shift;
                    C64::new(k * g, 0.0).sqrt() * (q.pow(t) - q.pow(-t)).sqrt()
                } else {
                    self.nabla_x1(s).sqrt()
                }
            }
        }
    }
}

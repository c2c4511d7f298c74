//! Finite sums of shift operators sum_j c_j(s) e^{a_j d/ds} with evaluable
//! coefficients and exact rational shifts.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{shift_f64, Shift};

pub type ScalarFn = Arc<dyn Fn(C64) -> C64 + Send + Sync>;

pub fn scalar<F>(f: F) -> ScalarFn
where
    F: Fn(C64) -> C64 + Send + Sync + 'static,
{
    Arc::new(f)
}

pub fn shift(num: i64, den: i64) -> Shift {
    Shift::new(num, den)
}

#[derive(Clone, Default)]
pub struct ShiftExpr {
    terms: BTreeMap<Shift, ScalarFn>,
}

impl fmt::Debug for ShiftExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shifts: Vec<String> = self.terms.keys().map(|k| k.to_string()).collect();
        write!(f, "ShiftExpr{{shifts: [{}]}}", shifts.join(", "))
    }
}

impl ShiftExpr {
    pub fn zero() -> Self {
        ShiftExpr::default()
    }

    pub fn identity() -> Self {
        ShiftExpr::constant_shift(Shift::from_integer(0), C64::new(1.0, 0.0))
    }

    /// e^{k d/ds} with coefficient 1.
    pub fn shift_op(k: Shift) -> Self {
        ShiftExpr::constant_shift(k, C64::new(1.0, 0.0))
    }

    pub fn constant_shift(k: Shift, c: C64) -> Self {
        ShiftExpr::term(k, scalar(move |_| c))
    }

    pub fn term(k: Shift, c: ScalarFn) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(k, c);
        ShiftExpr { terms }
    }

    /// Multiplication operator c(s) I.
    pub fn multiply(c: ScalarFn) -> Self {
        ShiftExpr::term(Shift::from_integer(0), c)
    }

    pub fn from_terms<I: IntoIterator<Item = (Shift, ScalarFn)>>(terms: I) -> Self {
        let mut out = ShiftExpr::zero();
        for (k, c) in terms {
            out.add_term(k, c);
        }
        out
    }

    fn add_term(&mut self, k: Shift, c: ScalarFn) {
        let merged = match self.terms.remove(&k) {
            Some(prev) => scalar(move |s| prev(s) + c(s)),
            None => c,
        };
        self.terms.insert(k, merged);
    }

    pub fn shifts(&self) -> Vec<Shift> {
        self.terms.keys().copied().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, k: Shift) -> Option<&ScalarFn> {
        self.terms.get(&k)
    }

    /// c_k(s), or 0 when the shift is absent.
    pub fn coeff_at(&self, k: Shift, s: C64) -> C64 {
        self.terms.get(&k).map(|c| c(s)).unwrap_or(C64::new(0.0, 0.0))
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Shift, &ScalarFn)> {
        self.terms.iter()
    }

    /// sum_j c_j(s) f(s + a_j)
    pub fn apply(&self, f: &dyn Fn(C64) -> C64, s: C64) -> C64 {
        self.terms.iter().map(|(k, c)| c(s) * f(s + shift_f64(*k))).sum()
    }

    /// Like [`ShiftExpr::apply`] but hands the function the base point and
    /// the exact shift, so it can choose branches relative to the base.
    pub fn apply_at(&self, f: &dyn Fn(C64, Shift) -> C64, s: C64) -> C64 {
        self.terms.iter().map(|(k, c)| c(s) * f(s, *k)).sum()
    }

    pub fn scaled(&self, factor: C64) -> Self {
        ShiftExpr::from_terms(self.terms.iter().map(|(k, c)| {
            let c = c.clone();
            (*k, scalar(move |s| factor * c(s)))
        }))
    }

    /// Merge equal shifts (already maintained) and drop shifts whose
    /// coefficient vanishes identically on the probe points.
    pub fn normalized(&self, probes: &[C64], tol: f64) -> Self {
        ShiftExpr::from_terms(
            self.terms
                .iter()
                .filter(|(_, c)| probes.iter().any(|&s| c(s).norm() > tol))
                .map(|(k, c)| (*k, c.clone())),
        )
    }
}

/// Operator product using c(s) e^{a d} . d(s) e^{b d} = c(s) d(s+a) e^{(a+b) d}.
pub fn compose(a: &ShiftExpr, b: &ShiftExpr) -> ShiftExpr {
    let mut out = ShiftExpr::zero();
    for (ka, ca) in &a.terms {
        for (kb, cb) in &b.terms {
            let (ca, cb) = (ca.clone(), cb.clone());
            let da = shift_f64(*ka);
            out.add_term(*ka + *kb, scalar(move |s| ca(s) * cb(s + da)));
        }
    }
    out
}

pub fn linear_combine(parts: &[(C64, &ShiftExpr)]) -> ShiftExpr {
    let mut out = ShiftExpr::zero();
    for (w, e) in parts {
        for (k, c) in &e.terms {
            let (w, c) = (*w, c.clone());
            out.add_term(*k, scalar(move |s| w * c(s)));
        }
    }
    out
}

/// [A, B]_v = AB - v BA
pub fn sigma_commutator(a: &ShiftExpr, b: &ShiftExpr, varsigma: C64) -> ShiftExpr {
    let ab = compose(a, b);
    let ba = compose(b, a);
    linear_combine(&[(C64::new(1.0, 0.0), &ab), (-varsigma, &ba)])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IdentityVerdict {
    IdentityMultiple,
    NonConstantIdentityCoeff,
    ResidualShiftTerms,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub verdict: IdentityVerdict,
    pub lambda: Option<C64>,
    /// largest of: shift-term magnitude, identity-coefficient spread
    pub max_residual: f64,
    pub shift_residual: f64,
    pub identity_spread: f64,
    pub excluded: Vec<C64>,
}

pub const POLE_CUTOFF: f64 = 1e12;

/// Decide whether `expr` is a constant multiple of the identity on the grid.
pub fn classify_identity_multiple(expr: &ShiftExpr, grid: &[C64], tol: f64) -> Result<Classification> {
    let zero = Shift::from_integer(0);
    let mut excluded = Vec::new();
    let mut usable: Vec<(C64, Vec<(Shift, C64)>)> = Vec::new();
    for &s in grid {
        let vals: Vec<(Shift, C64)> = expr.terms.iter().map(|(k, c)| (*k, c(s))).collect();
        if vals.iter().any(|(_, v)| !v.re.is_finite() || !v.im.is_finite() || v.norm() > POLE_CUTOFF) {
            excluded.push(s);
        } else {
            usable.push((s, vals));
        }
    }
    if usable.len() < 4 {
        return Err(Error::InsufficientGrid { usable: usable.len(), excluded: excluded.len() });
    }
    let mut shift_residual: f64 = 0.0;
    let mut id_vals = Vec::with_capacity(usable.len());
    for (_, vals) in &usable {
        let mut id = C64::new(0.0, 0.0);
        for (k, v) in vals {
            if *k == zero {
                id = *v;
            } else {
                shift_residual = shift_residual.max(v.norm());
            }
        }
        id_vals.push(id);
    }
    let mean = id_vals.iter().sum::<C64>() / id_vals.len() as f64;
    let spread = id_vals.iter().map(|v| (v - mean).norm()).fold(0.0, f64::max);
    let verdict = if shift_residual > tol {
        IdentityVerdict::ResidualShiftTerms
    } else if spread > tol {
        IdentityVerdict::NonConstantIdentityCoeff
    } else {
        IdentityVerdict::IdentityMultiple
    };
    Ok(Classification {
        verdict,
        lambda: (verdict == IdentityVerdict::IdentityMultiple).then_some(mean),
        max_residual: shift_residual.max(spread),
        shift_residual,
        identity_spread: spread,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn grid() -> Vec<C64> {
        (0..10).map(|k| c(0.3 + 0.4 * k as f64)).collect()
    }

    #[test]
    fn identity_and_simple_shift() {
        let f = |s: C64| s * s + 1.0;
        assert_eq!(ShiftExpr::identity().apply(&f, c(1.5)), f(c(1.5)));
        let q: f64 = 0.5;
        let e = linear_combine(&[
            (c(1.0), &ShiftExpr::shift_op(shift(1, 1))),
            (c(-1.0), &ShiftExpr::identity()),
        ]);
        let qs = move |s: C64| (s * q.ln()).exp();
        let s = c(0.7);
        assert!((e.apply(&qs, s) - qs(s) * (q - 1.0)).norm() < 1e-15);
    }

    #[test]
    fn compose_rewrite_rule() {
        let cfun = scalar(|s: C64| s * 3.0);
        let e = compose(&ShiftExpr::shift_op(shift(1, 1)), &ShiftExpr::multiply(cfun));
        assert_eq!(e.shifts(), vec![shift(1, 1)]);
        assert!((e.coeff_at(shift(1, 1), c(2.0)) - c(9.0)).norm() < 1e-15);
    }

    #[test]
    fn self_combination_cancels() {
        let a = ShiftExpr::term(shift(1, 2), scalar(|s: C64| s.exp()));
        let z = linear_combine(&[(c(1.0), &a), (c(-1.0), &a)]);
        for s in grid() {
            assert_eq!(z.coeff_at(shift(1, 2), s), c(0.0));
        }
        let z = sigma_commutator(&a, &a, c(1.0));
        let cl = classify_identity_multiple(&z, &grid(), 1e-12).unwrap();
        assert_eq!(cl.verdict, IdentityVerdict::IdentityMultiple);
    }

    #[test]
    fn classify_constant() {
        let e = ShiftExpr::constant_shift(shift(0, 1), c(3.0));
        let cl = classify_identity_multiple(&e, &grid(), 1e-12).unwrap();
        assert_eq!(cl.verdict, IdentityVerdict::IdentityMultiple);
        assert_eq!(cl.lambda, Some(c(3.0)));
        let e = ShiftExpr::multiply(scalar(|s| s));
        let cl = classify_identity_multiple(&e, &grid(), 1e-12).unwrap();
        assert_eq!(cl.verdict, IdentityVerdict::NonConstantIdentityCoeff);
        let e = ShiftExpr::shift_op(shift(1, 1));
        let cl = classify_identity_multiple(&e, &grid(), 1e-12).unwrap();
        assert_eq!(cl.verdict, IdentityVerdict::ResidualShiftTerms);
    }

    #[test]
    fn poles_are_excluded() {
        let e = ShiftExpr::multiply(scalar(|s: C64| if (s.re - 1.1).abs() < 1e-9 { c(f64::INFINITY) } else { c(2.0) }));
        let cl = classify_identity_multiple(&e, &grid(), 1e-12).unwrap();
        assert_eq!(cl.excluded.len(), 1);
        assert_eq!(cl.verdict, IdentityVerdict::IdentityMultiple);
        let few: Vec<C64> = grid().into_iter().take(3).collect();
        assert!(classify_identity_multiple(&e, &few, 1e-12).is_err());
    }
}

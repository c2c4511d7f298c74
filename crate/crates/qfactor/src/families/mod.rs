//! Catalog of q-polynomial families, spectrum utilities, orthogonality
//! checks and user-defined families loaded from text documents.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::opalg::ScalarFn;
use crate::qcore::{shift_f64, Lattice, LatticeKind, QBase, Shift};

pub mod catalog;
pub mod expr;
pub mod file;
pub mod ortho;
pub mod spectrum;

pub use catalog::{build, catalog, CatalogEntry};
pub use file::{load_family, FamilyDocument};
pub use ortho::{gram, GramReport, QuadratureSpec};
pub use spectrum::{
    eigenvalue_general, q_linearity_class, spectrum_coeffs, ttrr_constant, QLinearity, SpectrumCoeffs,
};

pub type PolyFn = Arc<dyn Fn(usize, C64) -> C64 + Send + Sync>;
pub type SeqFn = Arc<dyn Fn(usize) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FamilyKind {
    StieltjesWigert,
    AlSalamCarlitzI,
    AlSalamCarlitzII,
    DiscreteQHermiteII,
    Wall,
    DiscreteQLaguerre,
    QMeixner,
    QCharlier,
    AskeyWilson,
    ContinuousQLaguerre,
    ContinuousQHermite,
    ContinuousDualQHahn,
    Custom,
}

/// The gauge A(s) in Phi_n = A sqrt(rho) P_n / d_n.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AChoice {
    SqrtNablaX1,
    One,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    /// s = offset + k on this branch
    pub offset: C64,
    /// sign of the Jackson measure on this branch
    pub sign: f64,
}

impl Branch {
    pub fn main() -> Self {
        Branch { offset: C64::new(0.0, 0.0), sign: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ContinuousPath {
    /// integrate over real s in [s_lo, s_hi] (infinite ends are truncated by decay)
    RealS { s_lo: f64, s_hi: f64 },
    /// q^s = e^{i theta}, theta in (0, pi), x = cos theta
    Theta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Support {
    DiscreteSum { lo: Option<i64>, hi: Option<i64>, branches: Vec<Branch> },
    ContinuousInterval { x_lo: f64, x_hi: f64, path: ContinuousPath },
}

impl Support {
    pub fn nonnegative_integers() -> Self {
        Support::DiscreteSum { lo: Some(0), hi: None, branches: vec![Branch::main()] }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Support::DiscreteSum { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GridSpec {
    Real { start: f64, step: f64, count: usize },
    Theta { lo: f64, hi: f64, count: usize },
}

pub const DEFAULT_GRID_POINTS: usize = 24;

impl GridSpec {
    /// s in {0.3, 0.7, 1.1, ...}; never hits an integer.
    pub fn default_real() -> Self {
        GridSpec::Real { start: 0.3, step: 0.4, count: DEFAULT_GRID_POINTS }
    }

    pub fn default_theta() -> Self {
        GridSpec::Theta { lo: 0.1, hi: std::f64::consts::PI - 0.1, count: DEFAULT_GRID_POINTS }
    }

    pub fn with_count(self, count: usize) -> Self {
        match self {
            GridSpec::Real { start, step, .. } => GridSpec::Real { start, step, count },
            GridSpec::Theta { lo, hi, .. } => GridSpec::Theta { lo, hi, count },
        }
    }

    pub fn count(&self) -> usize {
        match *self {
            GridSpec::Real { count, .. } | GridSpec::Theta { count, .. } => count,
        }
    }

    pub fn points(&self, q: f64) -> Vec<C64> {
        match *self {
            GridSpec::Real { start, step, count } => {
                (0..count).map(|k| C64::new(start + step * k as f64, 0.0)).collect()
            }
            GridSpec::Theta { lo, hi, count } => {
                let h = if count > 1 { (hi - lo) / (count - 1) as f64 } else { 0.0 };
                (0..count).map(|k| theta_to_s(lo + h * k as f64, q)).collect()
            }
        }
    }
}

/// s with q^s = e^{i theta}.
pub fn theta_to_s(theta: f64, q: f64) -> C64 {
    C64::new(0.0, theta / q.ln())
}

#[derive(Clone)]
pub struct Family {
    pub name: String,
    pub kind: FamilyKind,
    pub params: BTreeMap<String, f64>,
    pub q: QBase,
    pub lattice: Lattice,
    pub sigma: ScalarFn,
    pub sigma_plus: ScalarFn,
    pub tau: ScalarFn,
    pub rho: ScalarFn,
    /// sqrt(sigma(s) / nabla x(s)) on a branch that is continuous along the grid
    pub root_sigma: ScalarFn,
    /// sqrt(sigma_plus(s) / Delta x(s)) on the matching branch
    pub root_sigma_plus: ScalarFn,
    pub a_choice: AChoice,
    pub poly: PolyFn,
    /// d_n^2; may be negative for signed measures
    pub norm_sq: SeqFn,
    pub lambda: SeqFn,
    pub support: Support,
    pub grid: GridSpec,
    /// false when d_n could not be computed and Phi_n carry an arbitrary scale
    pub normalized: bool,
    pub notes: Vec<String>,
}

impl fmt::Debug for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Family")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("params", &self.params)
            .field("q", &self.q.value())
            .field("lattice", &self.lattice)
            .field("a_choice", &self.a_choice)
            .field("support", &self.support)
            .finish()
    }
}

impl Family {
    pub fn base(&self) -> f64 {
        self.q.value()
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }

    pub fn grid_points(&self) -> Vec<C64> {
        self.grid.points(self.base())
    }

    /// A(s)
    pub fn gauge(&self, s: C64) -> C64 {
        match self.a_choice {
            AChoice::SqrtNablaX1 => self.lattice.sqrt_nabla_x1(s),
            AChoice::One => C64::new(1.0, 0.0),
        }
    }

    pub fn d(&self, n: usize) -> C64 {
        C64::new((self.norm_sq)(n), 0.0).sqrt()
    }

    pub fn is_continuous_lattice(&self) -> bool {
        self.lattice.kind == LatticeKind::QQuadratic
    }

    /// Phi_n(s) with the principal root of rho.
    pub fn phi(&self, n: usize, s: C64) -> C64 {
        self.gauge(s) * (self.rho)(s).sqrt() * (self.poly)(n, s) / self.d(n)
    }

    /// Phi_n(base + k). For integer k the sign of sqrt(rho) is aligned with
    /// the Pearson continuation sqrt(rho(s+1)) = sqrt(rho(s)) R_+(s)/R(s+1)
    /// from the base point, which keeps products with the operator roots on
    /// one branch.
    pub fn phi_at(&self, n: usize, base: C64, k: Shift) -> C64 {
        let s = base + shift_f64(k);
        self.gauge(s) * self.sqrt_rho_at(base, k) * (self.poly)(n, s) / self.d(n)
    }

    pub fn sqrt_rho_at(&self, base: C64, k: Shift) -> C64 {
        let s = base + shift_f64(k);
        let p = (self.rho)(s).sqrt();
        if !k.is_integer() || k == Shift::from_integer(0) {
            return p;
        }
        let steps = k.to_integer();
        let mut g = (self.rho)(base).sqrt();
        if steps > 0 {
            for j in 0..steps {
                let t = base + j as f64;
                g *= (self.root_sigma_plus)(t) / (self.root_sigma)(t + 1.0);
            }
        } else {
            for j in 0..(-steps) {
                let t = base - j as f64;
                g *= (self.root_sigma)(t) / (self.root_sigma_plus)(t - 1.0);
            }
        }
        if !(g.re.is_finite() && g.im.is_finite()) || g.norm() == 0.0 {
            return p;
        }
        if (p - g).norm() <= (p + g).norm() {
            p
        } else {
            -p
        }
    }

    /// sigma(s+1) rho(s+1) - sigma_plus(s) rho(s)
    pub fn pearson_residual(&self, s: C64) -> C64 {
        (self.sigma)(s + 1.0) * (self.rho)(s + 1.0) - (self.sigma_plus)(s) * (self.rho)(s)
    }

    /// Pearson residual relative to the size of its two terms.
    pub fn pearson_relative(&self, s: C64) -> f64 {
        let a = (self.sigma)(s + 1.0) * (self.rho)(s + 1.0);
        let b = (self.sigma_plus)(s) * (self.rho)(s);
        (a - b).norm() / a.norm().max(b.norm()).max(f64::MIN_POSITIVE)
    }

    pub fn max_pearson_relative(&self, grid: &[C64]) -> (f64, C64) {
        grid.iter()
            .map(|&s| (self.pearson_relative(s), s))
            .fold((0.0, C64::new(0.0, 0.0)), |acc, v| if v.0 > acc.0 { v } else { acc })
    }

    /// Same family with Phi rescaled so that rho -> scale * rho (Pearson is
    /// homogeneous in rho).
    pub fn with_scaled_weight(&self, scale: f64) -> Family {
        let mut out = self.clone();
        let rho = self.rho.clone();
        out.rho = Arc::new(move |s| rho(s) * scale);
        let ns = self.norm_sq.clone();
        out.norm_sq = Arc::new(move |n| ns(n) * scale);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_grid_avoids_integers() {
        for s in GridSpec::default_real().points(0.5) {
            assert!((s.re - s.re.round()).abs() > 0.05);
            assert_eq!(s.im, 0.0);
        }
    }

    #[test]
    fn theta_grid_lies_on_unit_circle() {
        let q = 0.5;
        let pts = GridSpec::default_theta().with_count(7).points(q);
        assert_eq!(pts.len(), 7);
        for s in pts {
            assert!(((s * f64::ln(q)).exp().norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn scaled_weight_scales_norms() {
        let f = build("q-charlier", 0.5, &Default::default()).unwrap();
        let g = f.with_scaled_weight(4.0);
        let s = C64::new(1.0, 0.0);
        assert!(((g.rho)(s) - (f.rho)(s) * 4.0).norm() < 1e-14);
    }
}

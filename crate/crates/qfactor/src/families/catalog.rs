//! Builders for the catalog families. Every builder takes the base q and a
//! parameter map (already merged with defaults) and returns a [`Family`].

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;

use super::{AChoice, Branch, ContinuousPath, Family, FamilyKind, GridSpec, PolyFn, SeqFn, Support};
use crate::error::{Error, Result};
use crate::opalg::{scalar, ScalarFn};
use crate::qcore::{k_q, phi, qpoch_inf, qpoch_n, recip_qpoch_s, Lattice, QBase};

pub type Params = BTreeMap<String, f64>;
type Builder = fn(f64, &Params) -> Result<Family>;

pub struct CatalogEntry {
    pub name: &'static str,
    pub summary: &'static str,
    pub defaults: &'static [(&'static str, f64)],
    builder: Builder,
}

impl CatalogEntry {
    /// Build with `params` layered over the defaults. Unknown keys are rejected.
    pub fn build(&self, q: f64, params: &Params) -> Result<Family> {
        let mut merged: Params = self.defaults.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        for (k, v) in params {
            if k != "a_unit" && !merged.contains_key(k) {
                return Err(Error::Param(format!("{} has no parameter '{k}'", self.name)));
            }
            if !v.is_finite() {
                return Err(Error::Param(format!("parameter {k} must be finite")));
            }
            merged.insert(k.clone(), *v);
        }
        QBase::new(q)?;
        if !(q < 1.0) {
            return Err(Error::Param(format!(
                "{} needs 0 < q < 1 (infinite products in the weight), got {q}",
                self.name
            )));
        }
        (self.builder)(q, &merged)
    }

    pub fn default_params(&self) -> Params {
        self.defaults.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }
}

static CATALOG: &[CatalogEntry] = &[
    CatalogEntry {
        name: "stieltjes-wigert",
        summary: "Stieltjes-Wigert, q-linear lattice, continuous weight on (0, inf)",
        defaults: &[],
        builder: stieltjes_wigert,
    },
    CatalogEntry {
        name: "al-salam-carlitz-1",
        summary: "Al-Salam-Carlitz I on x = q^-s, a > 0",
        defaults: &[("a", 0.5)],
        builder: al_salam_carlitz_1,
    },
    CatalogEntry {
        name: "al-salam-carlitz-2",
        summary: "Al-Salam-Carlitz II on x = q^s, signed two-branch Jackson measure",
        defaults: &[("a", 0.5)],
        builder: al_salam_carlitz_2,
    },
    CatalogEntry {
        name: "discrete-q-hermite-2",
        summary: "discrete q-Hermite II (Al-Salam-Carlitz II at a = -1, rescaled)",
        defaults: &[],
        builder: discrete_q_hermite_2,
    },
    CatalogEntry {
        name: "wall",
        summary: "Wall / little q-Laguerre, 0 < a < 1/q",
        defaults: &[("a", 0.3)],
        builder: wall,
    },
    CatalogEntry {
        name: "discrete-q-laguerre",
        summary: "discrete q-Laguerre on the bilateral lattice, alpha > -1",
        defaults: &[("alpha", 1.0)],
        builder: discrete_q_laguerre,
    },
    CatalogEntry {
        name: "q-meixner",
        summary: "q-Meixner, 0 <= b < 1/q, c > 0",
        defaults: &[("b", 0.5), ("c", 1.0)],
        builder: q_meixner,
    },
    CatalogEntry {
        name: "q-charlier",
        summary: "q-Charlier (q-Meixner with b = 0), c > 0",
        defaults: &[("c", 1.0)],
        builder: q_charlier,
    },
    CatalogEntry {
        name: "askey-wilson",
        summary: "Askey-Wilson on x = cos theta; C_sigma = 0 selects the default normalization",
        defaults: &[("a", 0.3), ("b", 0.4), ("c", 0.5), ("d", 0.6), ("C_sigma", 0.0)],
        builder: askey_wilson,
    },
    CatalogEntry {
        name: "continuous-q-laguerre",
        summary: "continuous q-Laguerre at alpha = -1/2 (roots 1, q^1/2)",
        defaults: &[("C_sigma", 0.0)],
        builder: continuous_q_laguerre,
    },
    CatalogEntry {
        name: "continuous-q-hermite",
        summary: "continuous q-Hermite (all Askey-Wilson roots zero)",
        defaults: &[("C_sigma", 0.0)],
        builder: continuous_q_hermite,
    },
    CatalogEntry {
        name: "continuous-dual-q-hahn",
        summary: "continuous dual q-Hahn (Askey-Wilson with d = 0)",
        defaults: &[("a", 0.3), ("b", 0.4), ("c", 0.5), ("C_sigma", 0.0)],
        builder: continuous_dual_q_hahn,
    },
];

pub fn catalog() -> &'static [CatalogEntry] {
    CATALOG
}

pub fn entry(name: &str) -> Result<&'static CatalogEntry> {
    CATALOG.iter().find(|e| e.name == name).ok_or_else(|| Error::UnknownFamily(name.to_string()))
}

pub fn build(name: &str, q: f64, params: &Params) -> Result<Family> {
    entry(name)?.build(q, params)
}

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn qpow(q: f64, s: C64) -> C64 {
    (s * q.ln()).exp()
}

fn get(p: &Params, key: &str) -> f64 {
    p.get(key).copied().unwrap_or(0.0)
}

fn a_choice(p: &Params) -> AChoice {
    if get(p, "a_unit") != 0.0 {
        AChoice::One
    } else {
        AChoice::SqrtNablaX1
    }
}

/// Shared assembly for q-linear families given the weight w = rho nabla x_1.
struct LinearParts {
    name: &'static str,
    kind: FamilyKind,
    lattice: Lattice,
    sigma: ScalarFn,
    sigma_plus: ScalarFn,
    w: ScalarFn,
    poly: PolyFn,
    norm_sq: SeqFn,
    lambda: SeqFn,
    support: Support,
    grid: GridSpec,
    notes: Vec<String>,
}

fn assemble_linear(q: f64, p: &Params, parts: LinearParts) -> Family {
    let lat = parts.lattice;
    let (sig, sigp, w) = (parts.sigma.clone(), parts.sigma_plus.clone(), parts.w);
    let tau = {
        let (sig, sigp) = (sig.clone(), sigp.clone());
        scalar(move |s| (sigp(s) - sig(s)) / lat.nabla_x1(s))
    };
    let rho = scalar(move |s| w(s) / lat.nabla_x1(s));
    let root_sigma = {
        let sig = sig.clone();
        scalar(move |s| (sig(s) / lat.nabla_x(s)).sqrt())
    };
    let root_sigma_plus = {
        let sigp = sigp.clone();
        scalar(move |s| (sigp(s) / lat.delta_x(s)).sqrt())
    };
    Family {
        name: parts.name.to_string(),
        kind: parts.kind,
        params: p.clone(),
        q: QBase::new(q).expect("validated"),
        lattice: lat,
        sigma: parts.sigma,
        sigma_plus: parts.sigma_plus,
        tau,
        rho,
        root_sigma,
        root_sigma_plus,
        a_choice: a_choice(p),
        poly: parts.poly,
        norm_sq: parts.norm_sq,
        lambda: parts.lambda,
        support: parts.support,
        grid: parts.grid,
        normalized: true,
        notes: parts.notes,
    }
}

fn linear_lambda(q: f64) -> SeqFn {
    Arc::new(move |n| (1.0 - q.powi(n as i32)) / (1.0 - q))
}

fn inverse_linear_lambda(q: f64) -> SeqFn {
    Arc::new(move |n| (1.0 - q.powi(-(n as i32))) / (1.0 - 1.0 / q))
}

fn stieltjes_wigert(q: f64, p: &Params) -> Result<Family> {
    let lattice = Lattice::q_linear_up(q)?;
    let qinf = qpoch_inf(c(q), q).re;
    Ok(assemble_linear(
        q,
        p,
        LinearParts {
            name: "stieltjes-wigert",
            kind: FamilyKind::StieltjesWigert,
            lattice,
            sigma: scalar(move |s| qpow(q, s - 1.0)),
            sigma_plus: scalar(move |s| qpow(q, s * 2.0)),
            w: scalar(move |s| {
                let qs = qpow(q, s);
                qs / (qpoch_inf(-qs, q) * qpoch_inf(-q / qs, q))
            }),
            poly: Arc::new(move |n, s| {
                phi(&[c(q.powi(-(n as i32)))], &[c(0.0)], q, -qpow(q, s) * q.powi(n as i32 + 1))
            }),
            norm_sq: Arc::new(move |n| qpoch_n(c(q), q, n).re * qinf * q.powi(-(n as i32))),
            lambda: linear_lambda(q),
            support: Support::ContinuousInterval {
                x_lo: 0.0,
                x_hi: f64::INFINITY,
                path: ContinuousPath::RealS { s_lo: f64::NEG_INFINITY, s_hi: f64::INFINITY },
            },
            grid: GridSpec::default_real(),
            notes: vec![
                "weight normalized for integration in s over the real line; d_n differs from the x-integral display by the constant factor of that change of variable".into(),
            ],
        },
    ))
}

fn al_salam_carlitz_1(q: f64, p: &Params) -> Result<Family> {
    let a = get(p, "a");
    if !(a > 0.0) {
        return Err(Error::Param(format!("al-salam-carlitz-1 needs a > 0, got {a}")));
    }
    let lattice = Lattice::q_linear_down(q)?;
    let aqinf = qpoch_inf(c(a * q), q).re;
    Ok(assemble_linear(
        q,
        p,
        LinearParts {
            name: "al-salam-carlitz-1",
            kind: FamilyKind::AlSalamCarlitzI,
            lattice,
            sigma: scalar(move |s| {
                let x = qpow(q, -s);
                (x - 1.0) * (x - a)
            }),
            sigma_plus: scalar(move |_| c(a)),
            w: scalar(move |s| {
                qpow(a, s) * qpow(q, s * s) * recip_qpoch_s(c(q), q, s) * recip_qpoch_s(c(a * q), q, s)
            }),
            poly: Arc::new(move |n, s| {
                phi(&[c(q.powi(-(n as i32))), qpow(q, -s)], &[], q, c(q.powi(n as i32) / a))
            }),
            norm_sq: Arc::new(move |n| qpoch_n(c(q), q, n).re * a.powi(-(n as i32)) * q.powi(-(n as i32)) / aqinf),
            lambda: linear_lambda(q),
            support: Support::nonnegative_integers(),
            grid: GridSpec::default_real(),
            notes: vec![],
        },
    ))
}

fn al_salam_carlitz_2(q: f64, p: &Params) -> Result<Family> {
    let a = get(p, "a");
    if a == 0.0 || (a - 1.0).abs() < 1e-12 {
        return Err(Error::Param(format!("al-salam-carlitz-2 needs a != 0, 1, got {a}")));
    }
    let lattice = Lattice::q_linear_up(q)?;
    let k = a.signum();
    let norm0 = (qpoch_inf(c(q), q) * qpoch_inf(c(a), q) * qpoch_inf(c(q / a), q)).re;
    // second Jackson branch sits at q^s = a
    let mut offset = C64::new(a.abs().ln() / q.ln(), 0.0);
    if a < 0.0 {
        offset.im = PI / q.ln();
    }
    // at a = q^m the two Jackson branches overlap and the measure has zero mass
    let degenerate = norm0.abs() < 1e-14;
    let mut notes = vec![
        "sigma carries the factor sign(a) so that sigma/nabla x stays positive on the evaluation grid".to_string(),
        "for a > 0 the measure is signed and d_n^2 alternates in sign".to_string(),
    ];
    if degenerate {
        notes.push(format!("a = {a} is an integer power of q: the two-branch measure degenerates, Phi_n are left unnormalized (d_n = 1)"));
    }
    // the Hamiltonian coefficients grow like q^{-2s}; keep the grid short
    let start = (a.ln() / q.ln()).max(0.0) + 1.3;
    let start = if a > 0.0 { start } else { 0.3 };
    let mut fam = assemble_linear(
        q,
        p,
        LinearParts {
            name: "al-salam-carlitz-2",
            kind: FamilyKind::AlSalamCarlitzII,
            lattice,
            sigma: scalar(move |s| {
                let x = qpow(q, s);
                (1.0 - x) * (a - x) * k
            }),
            sigma_plus: scalar(move |_| c(k * a)),
            w: scalar(move |s| {
                let x = qpow(q, s);
                x * qpoch_inf(x * q, q) * qpoch_inf(x * q / a, q)
            }),
            poly: Arc::new(move |n, s| {
                let x = qpow(q, s);
                phi(&[c(q.powi(-(n as i32))), 1.0 / x], &[c(0.0)], q, x * q / a)
            }),
            norm_sq: Arc::new(move |n| {
                if degenerate {
                    return 1.0;
                }
                let n = n as i32;
                norm0 * qpoch_n(c(q), q, n as usize).re * (-a).powi(-n) * q.powf(-(n * (n - 1)) as f64 / 2.0)
            }),
            lambda: Arc::new(move |n| -k * (1.0 - q.powi(-(n as i32))) / (1.0 - 1.0 / q)),
            support: Support::DiscreteSum {
                lo: Some(0),
                hi: None,
                branches: vec![Branch::main(), Branch { offset, sign: -1.0 }],
            },
            grid: GridSpec::Real { start, step: 0.15, count: super::DEFAULT_GRID_POINTS },
            notes,
        },
    );
    fam.normalized = !degenerate;
    Ok(fam)
}

/// q^t - 1 without cancellation near t = 0
fn qpow_m1(q: f64, t: C64) -> C64 {
    let z = t * q.ln();
    if z.im == 0.0 {
        c(z.re.exp_m1())
    } else {
        z.exp() - 1.0
    }
}

/// 2phi1(q^-n, 0; aq; q; qx), x = q^s, through the equivalent
/// 2phi0(q^-n, 1/x; -; q, x/a) / (q^-n/a; q)_n, which keeps full relative
/// accuracy near x = 1 where the 2phi1 series and the recurrence cancel.
/// x - q^j is formed as q^j (q^{s-j} - 1) so the series terminates exactly
/// at integer s.
pub(crate) fn wall_poly(q: f64, a: f64, n: usize, s: C64) -> C64 {
    let (mut term, mut total) = (c(1.0), c(1.0));
    let mut pre = 1.0;
    for j in 0..n {
        let qj = q.powi(j as i32);
        term *= -qpow_m1(q, s - j as f64) * ((1.0 - qj / q.powi(n as i32)) / (a * (1.0 - qj * q)));
        total += term;
        pre *= 1.0 - qj / (q.powi(n as i32) * a);
    }
    total / pre
}

/// h~_n(x) from x h_n = h_{n+1} + q^{-2n+1}(1 - q^n) h_{n-1}.
fn dqh_poly(q: f64, n: usize, x: C64) -> C64 {
    let (mut h0, mut h1) = (c(1.0), x);
    if n == 0 {
        return h0;
    }
    for k in 1..n {
        let next = x * h1 - h0 * (q.powi(-2 * k as i32 + 1) * (1.0 - q.powi(k as i32)));
        h0 = h1;
        h1 = next;
    }
    h1
}

fn dqh_weight(q: f64, s: C64) -> C64 {
    let x = qpow(q, -s);
    x / qpoch_inf(-x * x, q * q)
}

fn dqh_mass(q: f64) -> f64 {
    let branch2 = C64::new(0.0, PI / q.ln());
    let mut total = 0.0;
    let mut k: i64 = 0;
    loop {
        let t = dqh_weight(q, c(k as f64)) - dqh_weight(q, branch2 + k as f64);
        total += t.re;
        if t.norm() < 1e-18 * total.abs() && k > 4 {
            break;
        }
        k += 1;
        if k > 4000 {
            break;
        }
    }
    let mut k: i64 = -1;
    loop {
        let t = dqh_weight(q, c(k as f64)) - dqh_weight(q, branch2 + k as f64);
        if !t.re.is_finite() {
            break;
        }
        total += t.re;
        if t.norm() < 1e-18 * total.abs() && k < -4 {
            break;
        }
        k -= 1;
        if k < -4000 {
            break;
        }
    }
    total
}

fn discrete_q_hermite_2(q: f64, p: &Params) -> Result<Family> {
    let lattice = Lattice::q_linear_down(q)?;
    let mass = dqh_mass(q);
    Ok(assemble_linear(
        q,
        p,
        LinearParts {
            name: "discrete-q-hermite-2",
            kind: FamilyKind::DiscreteQHermiteII,
            lattice,
            sigma: scalar(move |s| qpow(q, -2.0 * s) + 1.0),
            sigma_plus: scalar(move |_| c(1.0)),
            w: scalar(move |s| dqh_weight(q, s)),
            poly: Arc::new(move |n, s| dqh_poly(q, n, qpow(q, -s))),
            norm_sq: Arc::new(move |n| mass * qpoch_n(c(q), q, n).re * q.powi(-((n * n) as i32))),
            lambda: linear_lambda(q),
            support: Support::DiscreteSum {
                lo: None,
                hi: None,
                branches: vec![Branch::main(), Branch { offset: C64::new(0.0, PI / q.ln()), sign: -1.0 }],
            },
            grid: GridSpec::default_real(),
            notes: vec!["total mass of the two-branch measure is summed numerically".into()],
        },
    ))
}

fn wall(q: f64, p: &Params) -> Result<Family> {
    let a = get(p, "a");
    if !(a > 0.0 && a < 1.0 / q) {
        return Err(Error::Param(format!("wall needs 0 < a < 1/q = {}, got {a}", 1.0 / q)));
    }
    let lattice = Lattice::q_linear_up(q)?;
    let aqinf = qpoch_inf(c(a * q), q).re;
    Ok(assemble_linear(
        q,
        p,
        LinearParts {
            name: "wall",
            kind: FamilyKind::Wall,
            lattice,
            // sigma = K q^{s-1}(q^s - 1) with K = -q
            sigma: scalar(move |s| {
                let x = qpow(q, s);
                x * (1.0 - x)
            }),
            sigma_plus: scalar(move |s| qpow(q, s) * (a * q)),
            w: scalar(move |s| qpow(a * q, s) * recip_qpoch_s(c(q), q, s)),
            poly: Arc::new(move |n, s| wall_poly(q, a, n, s)),
            norm_sq: Arc::new(move |n| {
                (a * q).powi(n as i32) * qpoch_n(c(q), q, n).re / (aqinf * qpoch_n(c(a * q), q, n).re)
            }),
            lambda: inverse_linear_lambda(q),
            support: Support::nonnegative_integers(),
            grid: GridSpec::default_real(),
            notes: vec!["sigma normalized with the factor K = -q".into()],
        },
    ))
}

fn discrete_q_laguerre(q: f64, p: &Params) -> Result<Family> {
    let al = get(p, "alpha");
    if !(al > -1.0) {
        return Err(Error::Param(format!("discrete-q-laguerre needs alpha > -1, got {al}")));
    }
    let lattice = Lattice::q_linear_up(q)?;
    let qa = q.powf(al);
    let mass = (qpoch_inf(c(q), q) * qpoch_inf(c(-q * qa), q) * qpoch_inf(c(-1.0 / qa), q)
        / (qpoch_inf(c(-1.0), q) * qpoch_inf(c(-q), q) * qpoch_inf(c(q * qa), q)))
    .re;
    Ok(assemble_linear(
        q,
        p,
        LinearParts {
            name: "discrete-q-laguerre",
            kind: FamilyKind::DiscreteQLaguerre,
            lattice,
            // K q^{s-1} with K = q^{-alpha}
            sigma: scalar(move |s| qpow(q, s - 1.0) / qa),
            sigma_plus: scalar(move |s| {
                let x = qpow(q, s);
                x * (x + 1.0)
            }),
            w: scalar(move |s| qpow(q, s * (al + 1.0)) / qpoch_inf(-qpow(q, s), q)),
            poly: Arc::new(move |n, s| {
                phi(&[c(q.powi(-(n as i32))), -qpow(q, s)], &[c(0.0)], q, c(q.powi(n as i32 + 1) * qa))
                    / qpoch_n(c(q), q, n)
            }),
            norm_sq: Arc::new(move |n| {
                mass * qpoch_n(c(q * qa), q, n).re / (qpoch_n(c(q), q, n).re * q.powi(n as i32))
            }),
            lambda: linear_lambda(q),
            support: Support::DiscreteSum { lo: None, hi: None, branches: vec![Branch::main()] },
            grid: GridSpec::default_real(),
            notes: vec!["sigma normalized with the factor K = q^-alpha".into()],
        },
    ))
}

fn meixner_like(q: f64, p: &Params, b: f64, cc: f64, name: &'static str, kind: FamilyKind) -> Result<Family> {
    if !(b >= 0.0 && b < 1.0 / q) {
        return Err(Error::Param(format!("{name} needs 0 <= b < 1/q, got b = {b}")));
    }
    if !(cc > 0.0) {
        return Err(Error::Param(format!("{name} needs c > 0, got c = {cc}")));
    }
    let lattice = Lattice::q_linear_down(q)?;
    let ratio = (qpoch_inf(c(-cc), q) / qpoch_inf(c(-b * cc * q), q)).re;
    let mut notes = vec![
        "the eigenvalue is stored as (1-q^n)/(1-q), consistent with the Hamiltonian display; the printed lambda_n = q^(1/2)(1-q^n)/(1-q)^2 and the difference-equation eigenvalue (1-q^n) differ from it by constant factors".into(),
    ];
    if kind == FamilyKind::QCharlier {
        notes.push("q-Charlier is the b = 0 case of q-Meixner".into());
    }
    Ok(assemble_linear(
        q,
        p,
        LinearParts {
            name,
            kind,
            lattice,
            sigma: scalar(move |s| {
                let x = qpow(q, -s);
                (x - 1.0) * (x + b * cc)
            }),
            sigma_plus: scalar(move |s| (qpow(q, -s) - b * q) * (cc / q)),
            w: scalar(move |s| {
                let bq = C64::new(b * q, 0.0);
                let poch_bq = if b == 0.0 { c(1.0) } else { 1.0 / recip_qpoch_s(bq, q, s) };
                qpow(cc, s) * poch_bq * recip_qpoch_s(c(q), q, s) * recip_qpoch_s(c(-b * cc * q), q, s)
                    * qpow(q, s * (s - 1.0) / 2.0)
            }),
            poly: Arc::new(move |n, s| {
                phi(&[c(q.powi(-(n as i32))), qpow(q, -s)], &[c(b * q)], q, c(-q.powi(n as i32 + 1) / cc))
            }),
            norm_sq: Arc::new(move |n| {
                ratio * qpoch_n(c(q), q, n).re * qpoch_n(c(-q / cc), q, n).re * q.powi(-(n as i32))
                    / qpoch_n(c(b * q), q, n).re
            }),
            lambda: linear_lambda(q),
            support: Support::nonnegative_integers(),
            grid: GridSpec::default_real(),
            notes,
        },
    ))
}

fn q_meixner(q: f64, p: &Params) -> Result<Family> {
    meixner_like(q, p, get(p, "b"), get(p, "c"), "q-meixner", FamilyKind::QMeixner)
}

fn q_charlier(q: f64, p: &Params) -> Result<Family> {
    meixner_like(q, p, 0.0, get(p, "c"), "q-charlier", FamilyKind::QCharlier)
}

/// Askey-Wilson type family with roots `z` (zeros allowed) and
/// sigma(s) = C q^{-2s} prod (q^s - z_i).
pub(crate) fn askey_wilson_type(
    q: f64,
    p: &Params,
    name: &str,
    kind: FamilyKind,
    z: [f64; 4],
    c_sigma: f64,
    mut notes: Vec<String>,
) -> Result<Family> {
    for (i, zi) in z.iter().enumerate() {
        if zi.abs() > 1.0 {
            return Err(Error::Param(format!("{name}: root {} = {zi} lies outside the unit disc", i + 1)));
        }
    }
    if c_sigma == 0.0 {
        return Err(Error::Param(format!("{name}: C_sigma must be nonzero")));
    }
    let lattice = Lattice::askey_wilson(q)?;
    let kq = k_q(q);
    let sigma: ScalarFn = scalar(move |s| {
        let x = qpow(q, s);
        let mut r = qpow(q, -2.0 * s) * c_sigma;
        for zi in z {
            r *= x - zi;
        }
        r
    });
    let sigma_plus = {
        let sigma = sigma.clone();
        scalar(move |s| sigma(-s))
    };
    let tau = {
        let (sigma, sigma_plus) = (sigma.clone(), sigma_plus.clone());
        scalar(move |s| (sigma_plus(s) - sigma(s)) / lattice.nabla_x1(s))
    };
    let kk = C64::new(2.0 * c_sigma / kq, 0.0).sqrt();
    let root_sigma = scalar(move |s| {
        let x = qpow(q, s);
        let mut r = kk * x;
        for zi in z {
            r *= (1.0 - zi / x).sqrt();
        }
        r / (qpow(q, s - 0.5) - qpow(q, 0.5 - s)).sqrt()
    });
    let root_sigma_plus = scalar(move |s| {
        let x = qpow(q, s);
        let mut r = kk / x;
        for zi in z {
            r *= (1.0 - x * zi).sqrt();
        }
        r / (qpow(q, s + 0.5) - qpow(q, -s - 0.5)).sqrt()
    });
    let rho = scalar(move |s| {
        let x = qpow(q, s);
        let mut w = qpoch_inf(x * x, q) * qpoch_inf(1.0 / (x * x), q);
        for zi in z {
            if zi != 0.0 {
                w /= qpoch_inf(x * zi, q) * qpoch_inf(zi / x, q);
            }
        }
        w * C64::new(0.0, 1.0) / ((x - 1.0 / x) * PI)
    });
    // pivot on the first nonzero root
    let mut order = z;
    if let Some(i) = z.iter().position(|&v| v != 0.0) {
        order.swap(0, i);
    }
    let [a, b, cc, d] = order;
    let abcd = a * b * cc * d;
    let poly: PolyFn = if a == 0.0 {
        Arc::new(move |n, s| {
            // continuous q-Hermite: sum_k [n k]_q e^{i(n-2k)theta}
            let x = qpow(q, s);
            let qn = qpoch_n(c(q), q, n);
            (0..=n)
                .map(|k| qn / (qpoch_n(c(q), q, k) * qpoch_n(c(q), q, n - k)) * x.powi(n as i32 - 2 * k as i32))
                .sum()
        })
    } else {
        // the terminating 4phi3 loses digits to cancellation for growing n;
        // its three-term recurrence in 2x = z + 1/z is stable
        Arc::new(move |n, s| {
            let z = qpow(q, s);
            let two_x = z + 1.0 / z;
            let pre = qpoch_n(c(a * b), q, n) * qpoch_n(c(a * cc), q, n) * qpoch_n(c(a * d), q, n)
                / a.powi(n as i32);
            let (mut prev, mut cur) = (c(0.0), c(1.0));
            for m in 0..n {
                let qm = q.powi(m as i32);
                let big_a = (1.0 - a * b * qm) * (1.0 - a * cc * qm) * (1.0 - a * d * qm) * (1.0 - abcd * qm / q)
                    / (a * (1.0 - abcd * qm * qm / q) * (1.0 - abcd * qm * qm));
                let big_c = a * (1.0 - qm) * (1.0 - b * cc * qm / q) * (1.0 - b * d * qm / q) * (1.0 - cc * d * qm / q)
                    / ((1.0 - abcd * qm * qm / (q * q)) * (1.0 - abcd * qm * qm / q));
                let next = ((two_x - a - 1.0 / a + big_a + big_c) * cur - prev * big_c) / big_a;
                prev = cur;
                cur = next;
            }
            pre * cur
        })
    };
    let pairs = [a * b, a * cc, a * d, b * cc, b * d, cc * d];
    let norm_sq: SeqFn = Arc::new(move |n| {
        let ni = n as i32;
        let mut h = qpoch_n(c(abcd * q.powi(ni - 1)), q, n) * qpoch_inf(c(abcd * q.powi(2 * ni)), q)
            / qpoch_inf(c(q.powi(ni + 1)), q);
        for pr in pairs {
            h /= qpoch_inf(c(pr * q.powi(ni)), q);
        }
        h.re
    });
    let lambda: SeqFn = Arc::new(move |n| {
        let ni = n as i32;
        -4.0 * c_sigma / (q.sqrt() * kq * kq) * q * (q.powi(-ni) - 1.0) * (1.0 - abcd * q.powi(ni - 1))
    });
    notes.push("rho includes the Jacobian of x = cos theta; integration runs over theta in (0, pi)".into());
    Ok(Family {
        name: name.to_string(),
        kind,
        params: p.clone(),
        q: QBase::new(q)?,
        lattice,
        sigma,
        sigma_plus,
        tau,
        rho,
        root_sigma,
        root_sigma_plus,
        a_choice: a_choice(p),
        poly,
        norm_sq,
        lambda,
        support: Support::ContinuousInterval { x_lo: -1.0, x_hi: 1.0, path: ContinuousPath::Theta },
        grid: GridSpec::default_theta(),
        normalized: true,
        notes,
    })
}

fn default_c_sigma(q: f64) -> f64 {
    -k_q(q).powi(2) * q.sqrt() / 4.0
}

fn or_default(v: f64, d: f64) -> f64 {
    if v == 0.0 {
        d
    } else {
        v
    }
}

fn askey_wilson(q: f64, p: &Params) -> Result<Family> {
    let z = [get(p, "a"), get(p, "b"), get(p, "c"), get(p, "d")];
    let cs = or_default(get(p, "C_sigma"), default_c_sigma(q));
    askey_wilson_type(q, p, "askey-wilson", FamilyKind::AskeyWilson, z, cs, vec![])
}

fn continuous_dual_q_hahn(q: f64, p: &Params) -> Result<Family> {
    let z = [get(p, "a"), get(p, "b"), get(p, "c"), 0.0];
    let cs = or_default(get(p, "C_sigma"), default_c_sigma(q));
    askey_wilson_type(
        q,
        p,
        "continuous-dual-q-hahn",
        FamilyKind::ContinuousDualQHahn,
        z,
        cs,
        vec!["the printed condition (z1,z2,z3) = (t, 1/2 - t, 1/4) mixes roots and exponents; the family is checked generically".into()],
    )
}

fn continuous_q_laguerre(q: f64, p: &Params) -> Result<Family> {
    let cs = or_default(get(p, "C_sigma"), -k_q(q).powi(2) / (4.0 * (1.0 - q.sqrt())));
    askey_wilson_type(
        q,
        p,
        "continuous-q-laguerre",
        FamilyKind::ContinuousQLaguerre,
        [1.0, q.sqrt(), 0.0, 0.0],
        cs,
        vec![],
    )
}

fn continuous_q_hermite(q: f64, p: &Params) -> Result<Family> {
    let cs = or_default(get(p, "C_sigma"), k_q(q) / 4.0);
    askey_wilson_type(q, p, "continuous-q-hermite", FamilyKind::ContinuousQHermite, [0.0; 4], cs, vec![])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique() {
        let mut names: Vec<&str> = catalog().iter().map(|e| e.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), catalog().len());
    }

    #[test]
    fn defaults_build_at_several_bases() {
        for e in catalog() {
            for q in [0.3, 0.5, 0.8] {
                let f = e.build(q, &Default::default()).unwrap_or_else(|err| panic!("{}: {err}", e.name));
                assert_eq!(f.name, e.name);
                assert!((f.lambda)(0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn q_above_one_is_rejected() {
        assert!(matches!(build("stieltjes-wigert", 2.0, &Params::new()), Err(Error::Param(_))));
        assert!(matches!(entry("nope"), Err(Error::UnknownFamily(_))));
    }

    #[test]
    fn wall_polynomial_is_linear_in_q_power_at_degree_one() {
        let q: f64 = 0.5;
        assert!((wall_poly(q, 0.3, 0, C64::new(1.3, 0.0)) - 1.0).norm() < 1e-14);
        let p = |s: f64| wall_poly(q, 0.3, 1, C64::new(s, 0.0)).re;
        let (x0, x1, x2) = (q.powf(0.2), q.powf(1.1), q.powf(2.5));
        let slope = (p(1.1) - p(0.2)) / (x1 - x0);
        assert!((p(2.5) - p(0.2) - slope * (x2 - x0)).abs() < 1e-13);
    }

    #[test]
    fn qpow_m1_small_exponent() {
        let v = qpow_m1(0.5, C64::new(1e-12, 0.0));
        assert!((v.re - 0.5f64.ln() * 1e-12).abs() < 1e-24);
    }
}

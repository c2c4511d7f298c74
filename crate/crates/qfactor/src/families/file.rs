//! Family-definition documents (TOML with expression strings).
//!
//! ```toml
//! name = "my-family"
//! q = 0.5
//! sigma = "q^(s-1)"
//! sigma_plus = "q^(2*s)"          # optional when tau is given
//! rho = "q^s/(qpoch(-q^s, inf)*qpoch(-q^(1-s), inf))/nabla_x1"
//! d_n = "sqrt(qpoch(q, n)*qpoch(q, inf)*q^(-n))"
//! lambda_n = "(1-q^n)/(1-q)"
//! a_choice = "sqrt_nabla_x1"      # or "one"
//!
//! [params]
//!
//! [lattice]
//! c1 = "-1/sqrt(1/sqrt(q)-sqrt(q))"
//! c2 = 0
//! c3 = 0
//!
//! [P_n]
//! numerators = ["q^(-n)"]
//! denominators = ["0"]
//! argument = "-q^(n+1)*q^s"
//!
//! [support]
//! kind = "discrete"
//! lo = 0
//! ```
//!
//! Inside expressions `s`, `n`, `q`, `pi`, `i` and the parameter names are
//! bound; `rho` may also use `nabla_x1` (the lattice value at s).

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::expr::{Env, Expr};
use super::{AChoice, Branch, ContinuousPath, Family, FamilyKind, GridSpec, Support};
use crate::error::{Error, Result};
use crate::opalg::{scalar, ScalarFn};
use crate::qcore::{phi, Lattice, LatticeKind, QBase};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NumOrExpr {
    Num(f64),
    Expr(String),
}

impl NumOrExpr {
    fn value(&self, q: f64, params: &BTreeMap<String, f64>) -> Result<f64> {
        match self {
            NumOrExpr::Num(v) => Ok(*v),
            NumOrExpr::Expr(src) => {
                let e = Expr::parse(src)?;
                let env = Env { q, s: C64::new(0.0, 0.0), n: 0.0, params, extra: &[] };
                let v = e.eval(&env)?;
                if v.im.abs() > 1e-14 * v.re.abs().max(1.0) {
                    return Err(Error::Schema(format!("lattice coefficient '{src}' is not real")));
                }
                Ok(v.re)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeDoc {
    pub c1: NumOrExpr,
    pub c2: NumOrExpr,
    #[serde(default = "zero")]
    pub c3: NumOrExpr,
}

fn zero() -> NumOrExpr {
    NumOrExpr::Num(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypergeometricDoc {
    pub numerators: Vec<String>,
    #[serde(default)]
    pub denominators: Vec<String>,
    pub argument: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefactor: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchDoc {
    #[serde(default)]
    pub offset_re: f64,
    #[serde(default)]
    pub offset_im: f64,
    #[serde(default = "one")]
    pub sign: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SupportDoc {
    Discrete {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lo: Option<i64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hi: Option<i64>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        branches: Vec<BranchDoc>,
    },
    Continuous {
        x_lo: f64,
        x_hi: f64,
        /// "theta" or "real_s"
        path: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridDoc {
    Real { start: f64, step: f64, count: usize },
    Theta { lo: f64, hi: f64, count: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyDocument {
    pub name: String,
    pub q: f64,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub lattice: LatticeDoc,
    pub sigma: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_plus: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<String>,
    pub rho: String,
    pub d_n: String,
    #[serde(rename = "P_n")]
    pub p_n: HypergeometricDoc,
    pub lambda_n: String,
    pub support: SupportDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_choice: Option<String>,
}

impl FamilyDocument {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Schema(e.to_string()))
    }
}

/// Relative Pearson residual accepted on load.
pub const PEARSON_TOL: f64 = 1e-10;

/// Parse, validate and build; the Pearson equation is checked on the grid.
pub fn load_family(text: &str) -> Result<Family> {
    let doc = FamilyDocument::parse(text)?;
    build_from_document(&doc, None, &BTreeMap::new())
}

fn compile(src: &str, params: &BTreeMap<String, f64>, extra: &[&str]) -> Result<Expr> {
    let e = Expr::parse(src)?;
    for v in e.variables() {
        if !extra.contains(&v.as_str()) && !matches!(v.as_str(), "s" | "n" | "q" | "pi" | "i") && !params.contains_key(&v)
        {
            return Err(Error::FamilyDefinition(format!("unknown name '{v}' in '{src}'")));
        }
    }
    Ok(e)
}

/// Expression in s as a scalar function. Evaluation errors become NaN so
/// that grid checks exclude the point.
fn s_function(e: Expr, q: f64, params: BTreeMap<String, f64>) -> ScalarFn {
    scalar(move |s| {
        let env = Env { q, s, n: 0.0, params: &params, extra: &[] };
        e.eval(&env).unwrap_or(C64::new(f64::NAN, f64::NAN))
    })
}

/// Builds the family; `q_override` and `param_override` replace the
/// document values when given.
pub fn build_from_document(
    doc: &FamilyDocument,
    q_override: Option<f64>,
    param_override: &BTreeMap<String, f64>,
) -> Result<Family> {
    let q = q_override.unwrap_or(doc.q);
    let qb = QBase::new(q)?;
    let mut params = doc.params.clone();
    for (k, v) in param_override {
        if !params.contains_key(k) {
            return Err(Error::Param(format!("{} has no parameter '{k}'", doc.name)));
        }
        params.insert(k.clone(), *v);
    }
    let lattice = Lattice::new(
        doc.lattice.c1.value(q, &params)?,
        doc.lattice.c2.value(q, &params)?,
        doc.lattice.c3.value(q, &params)?,
        q,
    )?;
    let sigma = s_function(compile(&doc.sigma, &params, &[])?, q, params.clone());
    let (sigma_plus, tau): (ScalarFn, ScalarFn) = match (&doc.sigma_plus, &doc.tau) {
        (Some(sp), _) => {
            let sp = s_function(compile(sp, &params, &[])?, q, params.clone());
            let (sg, spc) = (sigma.clone(), sp.clone());
            let tau = scalar(move |s| (spc(s) - sg(s)) / lattice.nabla_x1(s));
            (sp, tau)
        }
        (None, Some(t)) => {
            if lattice.kind == LatticeKind::QQuadratic {
                return Err(Error::Schema(
                    "sigma_plus is required on q-quadratic lattices (it is sigma(-s-mu), not sigma + tau nabla x_1)".into(),
                ));
            }
            let t = s_function(compile(t, &params, &[])?, q, params.clone());
            let (sg, tc) = (sigma.clone(), t.clone());
            let sp = scalar(move |s| sg(s) + tc(s) * lattice.nabla_x1(s));
            (sp, t)
        }
        (None, None) => return Err(Error::Schema("one of sigma_plus or tau is required".into())),
    };
    let rho = {
        let e = compile(&doc.rho, &params, &["nabla_x1"])?;
        let p = params.clone();
        scalar(move |s| {
            let extra = [("nabla_x1", lattice.nabla_x1(s))];
            let env = Env { q, s, n: 0.0, params: &p, extra: &extra };
            e.eval(&env).unwrap_or(C64::new(f64::NAN, f64::NAN))
        })
    };
    let d_n = compile(&doc.d_n, &params, &[])?;
    let lambda_n = compile(&doc.lambda_n, &params, &[])?;
    let nums = doc.p_n.numerators.iter().map(|x| compile(x, &params, &[])).collect::<Result<Vec<_>>>()?;
    let dens = doc.p_n.denominators.iter().map(|x| compile(x, &params, &[])).collect::<Result<Vec<_>>>()?;
    let arg = compile(&doc.p_n.argument, &params, &[])?;
    let pre = doc.p_n.prefactor.as_deref().map(|p| compile(p, &params, &[])).transpose()?;

    let poly = {
        let params = params.clone();
        Arc::new(move |n: usize, s: C64| {
            let env = Env { q, s, n: n as f64, params: &params, extra: &[] };
            let ev = |e: &Expr| e.eval(&env).unwrap_or(C64::new(f64::NAN, f64::NAN));
            let a: Vec<C64> = nums.iter().map(ev).collect();
            let b: Vec<C64> = dens.iter().map(ev).collect();
            let mut v = phi(&a, &b, q, ev(&arg));
            if let Some(p) = &pre {
                v *= ev(p);
            }
            v
        })
    };
    let norm_sq = {
        let params = params.clone();
        Arc::new(move |n: usize| {
            let env = Env { q, s: C64::new(0.0, 0.0), n: n as f64, params: &params, extra: &[] };
            let d = d_n.eval(&env).unwrap_or(C64::new(f64::NAN, 0.0));
            (d * d).re
        })
    };
    let lambda = {
        let params = params.clone();
        Arc::new(move |n: usize| {
            let env = Env { q, s: C64::new(0.0, 0.0), n: n as f64, params: &params, extra: &[] };
            lambda_n.eval(&env).map(|v| v.re).unwrap_or(f64::NAN)
        })
    };
    let support = match &doc.support {
        SupportDoc::Discrete { lo, hi, branches } => Support::DiscreteSum {
            lo: *lo,
            hi: *hi,
            branches: if branches.is_empty() {
                vec![Branch::main()]
            } else {
                branches
                    .iter()
                    .map(|b| Branch { offset: C64::new(b.offset_re, b.offset_im), sign: b.sign })
                    .collect()
            },
        },
        SupportDoc::Continuous { x_lo, x_hi, path } => Support::ContinuousInterval {
            x_lo: *x_lo,
            x_hi: *x_hi,
            path: match path.as_str() {
                "theta" => ContinuousPath::Theta,
                "real_s" => ContinuousPath::RealS { s_lo: f64::NEG_INFINITY, s_hi: f64::INFINITY },
                other => return Err(Error::Schema(format!("unknown support path '{other}'"))),
            },
        },
    };
    let grid = match &doc.grid {
        Some(GridDoc::Real { start, step, count }) => GridSpec::Real { start: *start, step: *step, count: *count },
        Some(GridDoc::Theta { lo, hi, count }) => GridSpec::Theta { lo: *lo, hi: *hi, count: *count },
        None if lattice.kind == LatticeKind::QQuadratic => GridSpec::default_theta(),
        None => GridSpec::default_real(),
    };
    let a_choice = match doc.a_choice.as_deref() {
        None | Some("sqrt_nabla_x1") => AChoice::SqrtNablaX1,
        Some("one") => AChoice::One,
        Some(other) => return Err(Error::Schema(format!("unknown a_choice '{other}'"))),
    };
    let root_sigma = {
        let sg = sigma.clone();
        scalar(move |s| (sg(s) / lattice.nabla_x(s)).sqrt())
    };
    let root_sigma_plus = {
        let sp = sigma_plus.clone();
        scalar(move |s| (sp(s) / lattice.delta_x(s)).sqrt())
    };
    let fam = Family {
        name: doc.name.clone(),
        kind: FamilyKind::Custom,
        params,
        q: qb,
        lattice,
        sigma,
        sigma_plus,
        tau,
        rho,
        root_sigma,
        root_sigma_plus,
        a_choice,
        poly,
        norm_sq,
        lambda,
        support,
        grid,
        normalized: true,
        notes: vec!["loaded from a family-definition document".into()],
    };
    let (worst, at) = fam.max_pearson_relative(&fam.grid_points());
    if !(worst <= PEARSON_TOL) {
        return Err(Error::PearsonRejected { max_residual: worst, at: format!("{at}") });
    }
    Ok(fam)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"
name = "little"
q = 0.5
sigma = "q^(-s)*(q^(-s)-1)"
sigma_plus = "q^(-s)*c/q"
rho = "c^s*q^(s*(s-1)/2)/qpoch(q, s)/nabla_x1"
d_n = "sqrt(qpoch(-c, inf)*qpoch(q, n)*qpoch(-q/c, n)*q^(-n))"
lambda_n = "(1-q^n)/(1-q)"

[params]
c = 1.0

[lattice]
c1 = 0
c2 = "1/sqrt(1/sqrt(q)-sqrt(q))"

[P_n]
numerators = ["q^(-n)", "q^(-s)"]
denominators = ["0"]
argument = "-q^(n+1)/c"

[support]
kind = "discrete"
lo = 0
"#;

    #[test]
    fn loads_and_keeps_params() {
        let f = load_family(DOC).unwrap();
        assert_eq!(f.kind, FamilyKind::Custom);
        assert_eq!(f.param("c"), Some(1.0));
        assert!(f.support.is_discrete());
    }

    #[test]
    fn numeric_or_expression_lattice_values() {
        let params = BTreeMap::new();
        assert_eq!(NumOrExpr::Num(2.0).value(0.5, &params).unwrap(), 2.0);
        let v = NumOrExpr::Expr("1/q".into()).value(0.5, &params).unwrap();
        assert!((v - 2.0).abs() < 1e-15);
    }

    #[test]
    fn tau_instead_of_sigma_plus() {
        let text = DOC.replace("sigma_plus = \"q^(-s)*c/q\"", "tau = \"(q^(-s)*c/q - q^(-s)*(q^(-s)-1))/nabla_x1\"");
        // nabla_x1 is only bound inside rho
        assert!(matches!(load_family(&text), Err(Error::FamilyDefinition(_))));
    }

    #[test]
    fn missing_sigma_plus_and_tau() {
        let text = DOC.replace("sigma_plus = \"q^(-s)*c/q\"\n", "");
        assert!(matches!(load_family(&text), Err(Error::Schema(_))));
    }

    #[test]
    fn bad_a_choice() {
        let text = DOC.replace("lambda_n", "a_choice = \"half\"\nlambda_n");
        assert!(matches!(load_family(&text), Err(Error::Schema(_))));
    }
}

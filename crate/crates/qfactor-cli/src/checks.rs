//! Check batteries behind the subcommands. Each returns report checks and,
//! where a plot-ready view exists, a table for CSV output.

use serde_json::{json, Value};

use qfactor::factor::{
    adjointness_check, appendix_recurrence_residual, default_alpha_candidates, eigen_residuals, ladder_check,
    ladder_coeffs, param_ladder_check, search_factorization, shift_operator_check, verify_factorization,
    FactorStatus, FactorizationReport, ShiftKind,
};
use qfactor::families::spectrum::{lambda_minus, lambda_plus};
use qfactor::families::{
    eigenvalue_general, gram as gram_matrix, q_linearity_class, spectrum_coeffs, ttrr_constant, Family, FamilyKind,
    QLinearity, QuadratureSpec, Support,
};
use qfactor::qcore::k_q;
use qfactor::suq::{build_rep, check_relations, from_family};
use qfactor::{Error, Exec, Shift, C64};

use crate::config::{GridArg, RunConfig};
use crate::output::{Cell, Check, Status, Table};

/// Discrete families are probed on s = lo, lo+1, ... with this many points.
pub const INTEGER_GRID_POINTS: usize = 14;
/// Fit residual above which the alpha-operators are reported as not ladders.
pub const NOT_A_LADDER: f64 = 1e-3;
/// Gram matrices stop at this degree regardless of --n-max.
pub const GRAM_MAX_DEGREE: usize = 6;

pub struct Ctx<'a> {
    pub fam: &'a Family,
    pub cfg: &'a RunConfig,
    pub grid: Vec<C64>,
    /// integer points for discrete families unless --grid is given
    pub lattice_grid: Vec<C64>,
}

impl<'a> Ctx<'a> {
    pub fn new(fam: &'a Family, cfg: &'a RunConfig) -> Self {
        let q = fam.base();
        let grid = match cfg.grid {
            Some(GridArg::Count(n)) => fam.grid.with_count(n).points(q),
            Some(GridArg::Spec(g)) => g.points(q),
            None => fam.grid_points(),
        };
        let lattice_grid = match (&fam.support, cfg.grid) {
            (Support::DiscreteSum { lo, .. }, None) => {
                let lo = lo.unwrap_or(0);
                (0..INTEGER_GRID_POINTS as i64).map(|k| C64::new((lo + k) as f64, 0.0)).collect()
            }
            _ => grid.clone(),
        };
        Ctx { fam, cfg, grid, lattice_grid }
    }

    fn tol(&self) -> f64 {
        self.cfg.tol
    }
}

fn c64(v: Option<C64>) -> Value {
    v.map(|z| json!([z.re, z.im])).unwrap_or(Value::Null)
}

fn class_name(c: QLinearity) -> &'static str {
    match c {
        QLinearity::QLinear => "QLinear",
        QLinearity::QInverseLinear => "QInverseLinear",
        QLinearity::Neither => "Neither",
    }
}

pub fn info(ctx: &Ctx) -> Check {
    let f = ctx.fam;
    let class = q_linearity_class(f, 1e-9).map(|c| class_name(c).to_string()).unwrap_or_else(|e| e.to_string());
    let details = json!({
        "kind": f.kind,
        "lattice": f.lattice,
        "support": f.support,
        "grid": f.grid,
        "grid_points": ctx.grid.len(),
        "gauge": f.a_choice,
        "normalized": f.normalized,
        "q_linearity": class,
    });
    let summary = format!(
        "{:?} lattice, {} support, {} grid points, spectrum {}",
        f.lattice.kind,
        if f.support.is_discrete() { "discrete" } else { "continuous" },
        ctx.grid.len(),
        class
    );
    Check::new("build", Status::Pass, None, details).with_summary(summary)
}

pub fn pearson(ctx: &Ctx) -> (Vec<Check>, Table) {
    let mut t = Table::new(&["s_re", "s_im", "relative_residual"]);
    let mut worst: f64 = 0.0;
    let mut at = None;
    let mut excluded = 0;
    for &s in &ctx.grid {
        let r = ctx.fam.pearson_relative(s);
        t.push(vec![Cell::Num(s.re), Cell::Num(s.im), Cell::Num(r)]);
        if !r.is_finite() {
            excluded += 1;
        } else if r >= worst {
            worst = r;
            at = Some(s);
        }
    }
    let check = Check::threshold("pearson", worst, ctx.tol(), json!({ "at": c64(at), "points": ctx.grid.len(), "excluded": excluded }))
        .with_summary(format!("max relative residual over {} points", ctx.grid.len() - excluded));
    (vec![check], t)
}

pub fn eigencheck(ctx: &Ctx) -> (Vec<Check>, Table) {
    let mut t = Table::new(&["n", "lambda", "max_abs", "max_phi", "relative"]);
    let mut checks = vec![];
    for r in eigen_residuals(ctx.fam, ctx.cfg.n_max, &ctx.grid, Exec::default()) {
        t.push(vec![Cell::Int(r.n as i64), Cell::Num(r.lambda), Cell::Num(r.max_abs), Cell::Num(r.max_phi), Cell::Num(r.relative)]);
        let details = json!({ "n": r.n, "lambda": r.lambda, "max_abs": r.max_abs, "max_phi": r.max_phi, "at": c64(r.at), "excluded": r.excluded });
        let summary = format!("lambda = {:.6}, |H Phi - lambda Phi| / max|Phi|", r.lambda);
        let check = if r.max_phi > 0.0 {
            Check::threshold(format!("eigen n={}", r.n), r.relative, ctx.tol(), details)
        } else {
            Check::new(format!("eigen n={}", r.n), Status::Fail, None, details)
        };
        checks.push(check.with_summary(summary));
    }
    (checks, t)
}

pub fn spectrum(ctx: &Ctx) -> (Vec<Check>, Table) {
    let f = ctx.fam;
    let q = f.base();
    let n_max = ctx.cfg.n_max.max(3);
    let coeffs = spectrum_coeffs(f);
    let lam = |n: usize| (f.lambda)(n);
    let scale = (0..=n_max + 2).map(|n| lam(n).abs()).fold(1.0, f64::max);
    let mut t = Table::new(&["n", "lambda", "lambda_general", "ttrr_defect"]);
    let mut formula: f64 = 0.0;
    for n in 0..=n_max {
        let g = eigenvalue_general(&coeffs, n as i64);
        formula = formula.max((g - lam(n)).abs() / lam(n).abs().max(1.0));
        let defect = lam(n + 2) - (q + 1.0 / q) * lam(n + 1) + lam(n);
        t.push(vec![Cell::Int(n as i64), Cell::Num(lam(n)), Cell::Num(g), Cell::Num(defect)]);
    }
    let mut checks = vec![];
    let coeff_json = json!({
        "sigma_tilde_pp": coeffs.sigma_tilde_pp,
        "tau_tilde_p": coeffs.tau_tilde_p,
        "C1": coeffs.c1(), "C2": coeffs.c2(), "C3": coeffs.c3(),
    });
    checks.push(
        Check::threshold("eigenvalue-formula", formula, ctx.tol(), coeff_json)
            .with_summary("lambda_n against C1 q^n + C2 q^-n + C3"),
    );
    let expected = coeffs.ttrr_defect();
    checks.push(match ttrr_constant(&lam, q, n_max, 1e-10) {
        Ok(d) => Check::threshold("ttrr-defect", (d - expected).abs() / scale, ctx.tol(), json!({ "defect": d, "closed_form": expected }))
            .with_summary(format!("lambda_(n+2) - [2]_q lambda_(n+1) + lambda_n = {d:.6e}")),
        Err(e) => Check::failed("ttrr-defect", e),
    });
    let lq = coeffs.l_q();
    checks.push(
        Check::threshold("c1c2", (lq - coeffs.l_q_closed()).abs() / lq.abs().max(1.0), ctx.tol(), json!({ "L_q": lq, "closed_form": coeffs.l_q_closed() }))
            .with_summary(format!("C1 C2 = L_q = {lq:.6e}")),
    );
    let k = k_q(q);
    let (s, tp) = (coeffs.sigma_tilde_pp, coeffs.tau_tilde_p);
    let pm_formula = if (s - k * tp).abs() <= 1e-10 * s.abs().max(1.0) {
        Some(("+", (0..=n_max).map(|n| (lambda_plus(tp, q, n as i64) - lam(n)).abs() / lam(n).abs().max(1.0)).fold(0.0, f64::max)))
    } else if (s + k * tp).abs() <= 1e-10 * s.abs().max(1.0) {
        Some(("-", (0..=n_max).map(|n| (lambda_minus(tp, q, n as i64) - lam(n)).abs() / lam(n).abs().max(1.0)).fold(0.0, f64::max)))
    } else {
        None
    };
    checks.push(match pm_formula {
        Some((sign, r)) => Check::threshold("lambda-pm-formula", r, ctx.tol(), json!({ "branch": sign }))
            .with_summary(format!("sigma'' = {sign}k_q tau', lambda_n(q, {sign})")),
        None => Check::skip("lambda-pm-formula", "sigma'' is not +-k_q tau'"),
    });
    checks.push(match q_linearity_class(f, 1e-9) {
        Ok(c) => Check::new("q-linearity", Status::Pass, None, json!({ "class": class_name(c) })).with_summary(class_name(c)),
        Err(e) => Check::failed("q-linearity", e),
    });
    (checks, t)
}

pub fn search(ctx: &Ctx) -> FactorizationReport {
    search_factorization(ctx.fam, &default_alpha_candidates(), &ctx.grid, ctx.tol(), Exec::default())
}

pub fn factorize(ctx: &Ctx, rep: &FactorizationReport) -> Vec<Check> {
    let f = ctx.fam;
    let tol = ctx.tol();
    let mut checks = vec![];
    let cross_ok = match (rep.status, rep.cross_check, rep.lambda) {
        (FactorStatus::Solved | FactorStatus::Commuting, Some(x), Some(l)) => x <= tol * l.abs().max(1.0),
        (FactorStatus::Solved | FactorStatus::Commuting, _, _) => false,
        _ => true,
    };
    let summary = format!(
        "{:?}: alpha = {}, varsigma = {}, Lambda = {}",
        rep.status,
        rep.alpha.as_deref().unwrap_or("-"),
        rep.varsigma.map(|v| format!("{v:.12}")).unwrap_or("-".into()),
        rep.lambda.map(|v| format!("{v:.12}")).unwrap_or("-".into()),
    );
    let details = serde_json::to_value(rep).expect("report serializes");
    checks.push(
        Check::new("factorization", if cross_ok { Status::Pass } else { Status::Fail }, rep.cross_check, details).with_summary(summary),
    );
    let alpha = rep.alpha_shift().unwrap_or(Shift::from_integer(0));
    checks.push(match verify_factorization(f, alpha, &ctx.grid, tol) {
        Ok(g) => Check::threshold("alpha-identity", g.max_residual, tol, json!({ "alpha": alpha.to_string(), "at": c64(g.at), "excluded": g.excluded.len() }))
            .with_summary(format!("H = up_alpha down_alpha at alpha = {alpha}")),
        Err(e) => Check::failed("alpha-identity", e),
    });
    let solved = rep.status == FactorStatus::Solved && rep.lambda.is_some_and(|l| l.abs() > tol);
    match q_linearity_class(f, 1e-9) {
        Ok(class) => {
            let violated = solved && class == QLinearity::Neither;
            let summary = match (solved, class) {
                (true, _) => format!("solved with Lambda != 0 and spectrum {}", class_name(class)),
                (false, QLinearity::Neither) => "not solved, spectrum neither q- nor q^-1-linear".to_string(),
                (false, c) => format!("spectrum {} but not solved: the linearity condition is not sufficient", class_name(c)),
            };
            checks.push(
                Check::new("linearity-necessity", if violated { Status::Fail } else { Status::Pass }, None, json!({ "solved": solved, "class": class_name(class) }))
                    .with_summary(summary),
            );
            if solved && class != QLinearity::Neither {
                checks.push(match appendix_recurrence_residual(f, rep.lambda.unwrap(), ctx.cfg.n_max) {
                    Ok(r) => Check::threshold("lambda-recurrence", r, tol, json!({ "n_max": ctx.cfg.n_max }))
                        .with_summary("r^-1 (lambda_n - 1) = lambda_(n-1) + C"),
                    Err(e) => Check::failed("lambda-recurrence", e),
                });
            }
        }
        Err(e) => checks.push(Check::failed("linearity-necessity", e)),
    }
    checks
}

fn has_param_ladders(kind: FamilyKind) -> bool {
    matches!(kind, FamilyKind::Wall | FamilyKind::DiscreteQLaguerre | FamilyKind::QMeixner | FamilyKind::QCharlier)
}

pub fn ladder(ctx: &Ctx, rep: &FactorizationReport) -> (Vec<Check>, Table) {
    let f = ctx.fam;
    let tol = ctx.tol();
    let n_max = ctx.cfg.n_max;
    let mut checks = vec![];
    let mut t = Table::new(&["kind", "n", "down_re", "down_im", "up_re", "up_im", "residual"]);
    if has_param_ladders(f.kind) {
        for n in 0..=n_max {
            match param_ladder_check(f, n, &ctx.lattice_grid, tol) {
                Ok(r) => {
                    t.push(vec![
                        Cell::Text("parameter".into()),
                        Cell::Int(n as i64),
                        Cell::Num(r.down.coeff.re),
                        Cell::Num(r.down.coeff.im),
                        Cell::Num(r.up.coeff.re),
                        Cell::Num(r.up.coeff.im),
                        Cell::Num(r.residual),
                    ]);
                    let details = json!({
                        "n": n, "down": c64(Some(r.down.coeff)), "up": c64(Some(r.up.coeff)),
                        "expected_down": r.expected_down, "expected_up": r.expected_up,
                        "target_down": r.target_down, "target_up": r.target_up,
                    });
                    checks.push(
                        Check::threshold(format!("param-ladder n={n}"), r.residual, tol, details)
                            .with_summary(format!("|c_down| = {:.10}, |c_up| = {:.10}", r.down.coeff.norm(), r.up.coeff.norm())),
                    );
                    if let Some(rec) = r.norm_recurrence {
                        if n == n_max {
                            checks.push(Check::threshold("norm-recurrence", rec, tol, json!({ "n_max": n })).with_summary("d_n(a) against d_(n+1)(a/q)"));
                        }
                    }
                }
                Err(e) => checks.push(Check::failed(format!("param-ladder n={n}"), e)),
            }
        }
    }
    let alpha = rep.alpha_shift();
    let ladder_spectrum = from_family(rep, f, n_max + 2);
    match (alpha, &ladder_spectrum) {
        (Some(alpha), Ok(_)) => {
            let fits: Vec<_> = (0..=n_max).map(|n| (n, ladder_check(f, alpha, n, &ctx.grid, f64::INFINITY))).collect();
            let best = fits.iter().filter_map(|(_, r)| r.as_ref().ok()).map(|r| r.residual).fold(f64::INFINITY, f64::min);
            if best > NOT_A_LADDER {
                checks.push(Check::skip(
                    "ladder",
                    format!("the alpha-operators do not map Phi_n to multiples of Phi_(n-1), Phi_(n+1) (best fit residual {best:.3e})"),
                ));
                return (checks, t);
            }
            for (n, fit) in fits {
                match fit {
                    Ok(r) => {
                        t.push(vec![
                            Cell::Text("alpha".into()),
                            Cell::Int(n as i64),
                            Cell::Num(r.down.coeff.re),
                            Cell::Num(r.down.coeff.im),
                            Cell::Num(r.up.coeff.re),
                            Cell::Num(r.up.coeff.im),
                            Cell::Num(r.residual),
                        ]);
                        checks.push(
                            Check::threshold(format!("ladder n={n}"), r.residual, tol, json!({ "n": n, "down": c64(Some(r.down.coeff)), "up": c64(Some(r.up.coeff)) }))
                                .with_summary(format!("down Phi_n = {:.10} Phi_(n-1), up Phi_n = {:.10} Phi_(n+1)", r.down.coeff.re, r.up.coeff.re)),
                        );
                    }
                    Err(e) => checks.push(Check::failed(format!("ladder n={n}"), e)),
                }
            }
            let c = ladder_coeffs(f, alpha, n_max, rep.varsigma, 1.0, &ctx.grid);
            let scale = (0..=n_max + 1).map(|n| (f.lambda)(n).abs()).fold(1.0, f64::max);
            let worst = c.product_residual.max(c.shift_residual.unwrap_or(0.0)) / scale;
            checks.push(
                Check::threshold("ladder-consistency", worst, tol, json!({ "product_residual": c.product_residual, "shift_residual": c.shift_residual }))
                    .with_summary("D_n U_(n-1) = lambda_n and U_n D_(n+1) = lambda_1 + varsigma lambda_n"),
            );
        }
        _ if !has_param_ladders(f.kind) => {
            let reason = match ladder_spectrum {
                Err(e) => format!("alpha-operators are not ladders here ({e})"),
                Ok(_) => "no alpha found".into(),
            };
            checks.push(Check::skip("ladder", reason));
        }
        _ => {}
    }
    (checks, t)
}

pub fn shiftops(ctx: &Ctx) -> Result<Vec<Check>, Error> {
    let mut checks = vec![];
    for n in 0..=ctx.cfg.n_max {
        for (kind, label) in [(ShiftKind::Forward, "forward"), (ShiftKind::Backward, "backward")] {
            if kind == ShiftKind::Forward && n == 0 {
                continue;
            }
            let r = shift_operator_check(ctx.fam, kind, n, &ctx.lattice_grid)?;
            checks.push(
                Check::threshold(format!("shift {label} n={n}"), r, ctx.tol(), json!({ "n": n, "points": ctx.lattice_grid.len() }))
                    .with_summary("pointwise, relative to the term magnitudes"),
            );
        }
    }
    Ok(checks)
}

pub fn gram(ctx: &Ctx, rep: &FactorizationReport) -> (Vec<Check>, Table) {
    let f = ctx.fam;
    let n = ctx.cfg.n_max.min(GRAM_MAX_DEGREE);
    let mut checks = vec![];
    let mut t = Table::new(&["i", "j", "re", "im"]);
    if !f.normalized {
        checks.push(Check::skip("gram", "the weight has no finite normalization at these parameters"));
    } else {
        match gram_matrix(f, n, &QuadratureSpec::default()) {
            Ok(g) => {
                for (i, row) in g.matrix.iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        t.push(vec![Cell::Int(i as i64), Cell::Int(j as i64), Cell::Num(v.re), Cell::Num(v.im)]);
                    }
                }
                checks.push(
                    Check::threshold("gram", g.max_deviation, ctx.tol(), json!({ "n_max": n, "tail_bound": g.tail_bound, "evaluations": g.evaluations }))
                        .with_summary(format!("max |G - I| for n, m <= {n}")),
                );
            }
            Err(e) => checks.push(Check::failed("gram", e)),
        }
    }
    if let (FactorStatus::Solved, Some(alpha), Support::DiscreteSum { branches, .. }) = (rep.status, rep.alpha_shift(), &f.support) {
        if branches.len() > 1 {
            checks.push(Check::skip(
                "adjointness",
                "two-branch measure: the square-root branch of the alpha-operators on the second branch is a convention",
            ));
        } else {
            for (n, k) in [(0, 1), (1, 2), (2, 2)] {
                checks.push(match adjointness_check(f, n, k, alpha, 1e-14) {
                    Ok(r) => Check::threshold(format!("adjointness n={n} k={k}"), r.gap, ctx.tol(), json!({ "alpha": alpha.to_string(), "lhs": c64(Some(r.lhs)), "rhs": c64(Some(r.rhs)), "terms": r.terms }))
                        .with_summary(format!("<down Phi_(n+1), Phi_k> = <Phi_(n+1), up Phi_k> at alpha = {alpha}")),
                    Err(e) => Check::failed(format!("adjointness n={n} k={k}"), e),
                });
            }
        }
    }
    (checks, t)
}

pub fn algebra(ctx: &Ctx, rep: &FactorizationReport) -> Result<(Vec<Check>, Vec<String>), Error> {
    let dim = ctx.cfg.dim;
    let mut notes = vec![];
    let r = match from_family(rep, ctx.fam, dim) {
        Ok(r) => r,
        Err(e) => {
            notes.push(format!("{e}; auditing the standalone representation at base q instead"));
            build_rep(ctx.fam.base(), dim)?
        }
    };
    notes.extend(r.notes.iter().cloned());
    let audit = check_relations(&r);
    let checks = audit
        .relations
        .iter()
        .map(|rel| {
            if !rel.residual.is_finite() {
                let why = format!("not representable in double precision on the {}x{} interior at q = {}", audit.interior, audit.interior, audit.q);
                return Check::skip(format!("su_q {}", rel.name), why);
            }
            let details = json!({ "dim": dim, "interior": audit.interior, "q": audit.q, "absolute": rel.residual, "scale": rel.scale });
            Check::threshold(format!("su_q {}", rel.name), rel.relative(), ctx.tol(), details)
                .with_summary(format!("interior {}x{} block", audit.interior, audit.interior))
        })
        .collect();
    Ok((checks, notes))
}

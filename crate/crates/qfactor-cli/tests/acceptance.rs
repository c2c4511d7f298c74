//! Acceptance battery: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::collections::BTreeMap;
use std::process::Command;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use qfactor::factor::{
    adjointness_check, appendix_recurrence_residual, default_alpha_candidates, eigen_residuals, param_ladder_check,
    search_factorization, shift_operator_check, verify_factorization, FactorStatus, FactorizationReport, ShiftKind,
};
use qfactor::families::spectrum::{lambda_minus, lambda_plus};
use qfactor::families::{
    self, catalog, eigenvalue_general, gram, q_linearity_class, spectrum_coeffs, ttrr_constant, Family, QLinearity,
    QuadratureSpec, SpectrumCoeffs,
};
use qfactor::qcore::k_q;
use qfactor::suq::{build_rep, check_relations, TruncatedRep};
use qfactor::{Exec, Shift, C64};

const SUITE: &[(&str, &[(&str, f64)])] = &[
    ("stieltjes-wigert", &[]),
    ("al-salam-carlitz-1", &[("a", 0.5)]),
    ("al-salam-carlitz-2", &[("a", 0.5)]),
    ("discrete-q-hermite-2", &[]),
    ("wall", &[("a", 0.3)]),
    ("discrete-q-laguerre", &[("alpha", 1.0)]),
    ("q-meixner", &[("b", 0.5), ("c", 1.0)]),
    ("q-charlier", &[("c", 1.0)]),
    ("continuous-q-hermite", &[]),
    ("continuous-q-laguerre", &[]),
    ("askey-wilson", &[("a", 0.3), ("b", 0.4), ("c", 0.5), ("d", 0.6)]),
];

const LADDER_FAMILIES: [&str; 4] = ["wall", "discrete-q-laguerre", "q-meixner", "q-charlier"];

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn fam(name: &str, q: f64, p: &[(&str, f64)]) -> Result<Family, String> {
    let params: BTreeMap<String, f64> = p.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    families::build(name, q, &params).map_err(|e| format!("{name} q={q}: {e}"))
}

fn search(f: &Family) -> FactorizationReport {
    search_factorization(f, &default_alpha_candidates(), &f.grid_points(), 1e-8, Exec::default())
}

fn integer_grid(n: usize) -> Vec<C64> {
    (0..n).map(|k| C64::new(k as f64, 0.0)).collect()
}

/// Folds (label, value) pairs into the worst value, failing on the first
/// value above `bound`.
struct Worst {
    value: f64,
    label: String,
    bound: f64,
}

impl Worst {
    fn new(bound: f64) -> Self {
        Worst { value: 0.0, label: String::new(), bound }
    }

    fn add(&mut self, label: impl FnOnce() -> String, v: f64) -> Result<(), String> {
        if !(v <= self.bound) {
            return Err(format!("{} = {v:.3e} exceeds {:.0e}", label(), self.bound));
        }
        if v >= self.value {
            self.value = v;
            self.label = label();
        }
        Ok(())
    }
}

fn eigen_suite() -> Outcome {
    let mut w = Worst::new(1e-8);
    let mut pairs = 0;
    for q in [0.3, 0.5, 0.8] {
        for (name, p) in SUITE {
            let f = fam(name, q, p)?;
            pairs += 1;
            for r in eigen_residuals(&f, 8, &f.grid_points(), Exec::default()) {
                if r.max_phi == 0.0 {
                    return Err(format!("{name} q={q} n={}: no usable grid point", r.n));
                }
                w.add(|| format!("{name} q={q} n={}", r.n), r.relative)?;
            }
        }
    }
    Ok(format!("{pairs} family/q pairs, n <= 8, worst relative residual {:.2e} ({})", w.value, w.label))
}

fn factorization_universality() -> Outcome {
    let mut rng = StdRng::seed_from_u64(20261016);
    let mut w = Worst::new(1e-9);
    let mut count = 0;
    for e in catalog() {
        let f = e.build(0.5, &Default::default()).map_err(|err| err.to_string())?;
        for _ in 0..5 {
            let alpha = Shift::new(rng.random_range(-24..=24), rng.random_range(1..=8));
            let r = verify_factorization(&f, alpha, &f.grid_points(), 1e-9).map_err(|err| format!("{} alpha={alpha}: {err}", e.name))?;
            w.add(|| format!("{} alpha={alpha}", e.name), r.max_residual)?;
            count += 1;
        }
    }
    Ok(format!("{count} random rational alpha (seed 20261016), worst {:.2e} ({})", w.value, w.label))
}

fn expect_solved(r: &FactorizationReport, alpha: Option<&str>, varsigma: f64, lambda: f64) -> Result<(), String> {
    let tag = &r.family;
    if r.status != FactorStatus::Solved {
        return Err(format!("{tag}: status {:?}", r.status));
    }
    if let Some(a) = alpha {
        if r.alpha.as_deref() != Some(a) {
            return Err(format!("{tag}: alpha {:?}, expected {a}", r.alpha));
        }
    }
    let vs = r.varsigma.unwrap_or(f64::NAN);
    let lam = r.lambda.unwrap_or(f64::NAN);
    if !((vs - varsigma).abs() <= 1e-8 && (lam - lambda).abs() <= 1e-8) {
        return Err(format!("{tag}: varsigma {vs}, Lambda {lam}; expected {varsigma}, {lambda}"));
    }
    Ok(())
}

fn factorization_table() -> Outcome {
    let q: f64 = 0.5;
    let sq = q.sqrt();
    expect_solved(&search(&fam("stieltjes-wigert", q, &[])?), Some("2"), q, 1.0)?;
    expect_solved(&search(&fam("al-salam-carlitz-1", q, &[])?), Some("0"), q, 1.0)?;
    expect_solved(&search(&fam("continuous-q-hermite", q, &[("a_unit", 1.0), ("C_sigma", k_q(q) / 4.0)])?), None, 1.0 / q, 1.0)?;
    let cs = -k_q(q).powi(2) / (4.0 * (1.0 - sq));
    expect_solved(&search(&fam("continuous-q-laguerre", q, &[("C_sigma", cs)])?), None, 1.0 / sq, 1.0)?;
    let aw = search(&fam("askey-wilson", q, &[("a", 0.8), ("b", sq / 0.8), ("c", 0.9), ("d", sq / 0.9)])?);
    if aw.status != FactorStatus::Commuting || !((aw.varsigma.unwrap_or(f64::NAN) - 1.0).abs() <= 1e-8) || !(aw.lambda.unwrap_or(f64::NAN).abs() <= 1e-8) {
        return Err(format!("askey-wilson z1z2 = z3z4 = q^1/2: {:?} varsigma {:?} Lambda {:?}", aw.status, aw.varsigma, aw.lambda));
    }
    for alpha in [1.0, 0.37] {
        let r = search(&fam("discrete-q-laguerre", q, &[("alpha", alpha)])?);
        if r.status != FactorStatus::Condition2Fails {
            return Err(format!("discrete-q-laguerre alpha={alpha}: {:?}", r.status));
        }
    }
    let dql = search(&fam("discrete-q-laguerre", q, &[("alpha", -0.5)])?);
    if dql.status != FactorStatus::Solved {
        return Err(format!("discrete-q-laguerre a = q^-1/2: {:?}", dql.status));
    }
    for (name, p) in [("q-meixner", &[("b", 0.5), ("c", 1.0)][..]), ("wall", &[("a", 0.3)][..]), ("wall", &[("a", 0.7)][..])] {
        let r = search(&fam(name, q, p)?);
        if !r.status.is_negative() {
            return Err(format!("{name} {p:?}: {:?}", r.status));
        }
    }
    Ok("SW (2, q, 1), ASC I (0, q, 1), CQH (1/q, 1), CQL (q^-1/2, 1), AW Commuting, DQL generic/special, Meixner and Wall negative".into())
}

fn ladder_suites() -> Outcome {
    let mut ladders = Worst::new(1e-8);
    let mut shifts = Worst::new(1e-10);
    let mut norms = Worst::new(1e-10);
    for q in [0.3, 0.5, 0.8] {
        for name in LADDER_FAMILIES {
            let f = fam(name, q, &[])?;
            let g = integer_grid(14);
            for n in 0..=6 {
                let r = param_ladder_check(&f, n, &g, 1e-8).map_err(|e| format!("{name} q={q} n={n}: {e}"))?;
                ladders.add(|| format!("{name} q={q} n={n}"), r.residual)?;
                if name == "wall" {
                    let want = ((1.0 - q.powi(-(n as i32))) / (1.0 - 1.0 / q)).sqrt();
                    if n > 0 && (r.expected_down - want).abs().min((r.expected_up - want).abs()) > 1e-12 {
                        return Err(format!("wall q={q} n={n}: expected coefficients {} {}", r.expected_down, r.expected_up));
                    }
                    norms.add(|| format!("wall q={q} n={n}"), r.norm_recurrence.unwrap_or(f64::NAN))?;
                }
                for kind in [ShiftKind::Forward, ShiftKind::Backward] {
                    if kind == ShiftKind::Forward && n == 0 {
                        continue;
                    }
                    let v = shift_operator_check(&f, kind, n, &g).map_err(|e| e.to_string())?;
                    shifts.add(|| format!("{name} q={q} {kind:?} n={n}"), v)?;
                }
            }
        }
    }
    Ok(format!(
        "parameter ladders {:.2e}, Wall d_n recurrence {:.2e}, shift identities {:.2e} (n <= 6, q in 0.3/0.5/0.8)",
        ladders.value, norms.value, shifts.value
    ))
}

fn spectrum_consistency() -> Outcome {
    let mut ttrr = Worst::new(1e-10);
    let mut c1c2 = Worst::new(1e-12);
    for q in [0.3, 0.5, 0.8] {
        for e in catalog() {
            let f = e.build(q, &Default::default()).map_err(|err| err.to_string())?;
            let lam = |n: usize| (f.lambda)(n);
            let d = ttrr_constant(&lam, q, 8, 1e-10).map_err(|err| format!("{} q={q}: {err}", e.name))?;
            let c = spectrum_coeffs(&f);
            let scale = (0..=10).map(|n| lam(n).abs()).fold(1.0, f64::max);
            ttrr.add(|| format!("{} q={q}", e.name), (d - c.ttrr_defect()).abs() / scale)?;
            c1c2.add(|| format!("{} q={q}", e.name), (c.l_q() - c.l_q_closed()).abs() / c.l_q().abs().max(1.0))?;
        }
    }
    let mut pm = Worst::new(1e-10);
    for q in [0.3, 0.5, 0.8] {
        let k = k_q(q);
        for t in [-1.5, 0.7, 2.0] {
            for n in 0..=8i64 {
                let plus = eigenvalue_general(&SpectrumCoeffs::new(k * t, t, q), n);
                let minus = eigenvalue_general(&SpectrumCoeffs::new(-k * t, t, q), n);
                let (lp, lm) = (lambda_plus(t, q, n), lambda_minus(t, q, n));
                pm.add(|| format!("q={q} tau'={t} n={n} (+)"), (plus - lp).abs() / lp.abs().max(1.0))?;
                pm.add(|| format!("q={q} tau'={t} n={n} (-)"), (minus - lm).abs() / lm.abs().max(1.0))?;
            }
        }
    }
    Ok(format!("TTRR defect vs closed form {:.2e}, C1C2 - L_q {:.2e}, lambda(q,+-) {:.2e}", ttrr.value, c1c2.value, pm.value))
}

fn linearity_necessity() -> Outcome {
    let mut solved = 0;
    let mut witness = false;
    let mut recurrence = Worst::new(1e-10);
    for q in [0.3, 0.5, 0.8] {
        for e in catalog() {
            let f = e.build(q, &Default::default()).map_err(|err| err.to_string())?;
            let r = search(&f);
            let class = q_linearity_class(&f, 1e-9).map_err(|err| err.to_string())?;
            if e.name == "q-meixner" && class == QLinearity::QLinear && r.status.is_negative() {
                witness = true;
            }
            let Some(lam) = r.lambda.filter(|l| r.status == FactorStatus::Solved && l.abs() > 1e-8) else { continue };
            if class == QLinearity::Neither {
                return Err(format!("{} q={q}: solved with Lambda = {lam} but spectrum is neither q- nor q^-1-linear", e.name));
            }
            solved += 1;
            let v = appendix_recurrence_residual(&f, lam, 8).map_err(|err| err.to_string())?;
            recurrence.add(|| format!("{} q={q}", e.name), v)?;
        }
    }
    if !witness {
        return Err("q-Meixner is not a QLinear negative witness".into());
    }
    Ok(format!("{solved} solved family/q pairs all q-linear, q-Meixner witnesses non-sufficiency, lambda recurrence {:.2e}", recurrence.value))
}

fn orthogonality() -> Outcome {
    let mut g = Worst::new(1e-6);
    for e in catalog() {
        let mut f = e.build(0.5, &Default::default()).map_err(|err| err.to_string())?;
        if !f.support.is_discrete() {
            continue;
        }
        if !f.normalized {
            // a = q^m collapses the two-branch measure; test the nearest generic sign instead
            f = fam(e.name, 0.5, &[("a", -0.5)])?;
        }
        let r = gram(&f, 4, &QuadratureSpec::default()).map_err(|err| format!("{}: {err}", e.name))?;
        g.add(|| f.name.clone(), r.max_deviation)?;
    }
    let cqh = gram(&fam("continuous-q-hermite", 0.5, &[])?, 4, &QuadratureSpec::default()).map_err(|e| e.to_string())?;
    if !(cqh.max_deviation <= 1e-6) {
        return Err(format!("continuous q-Hermite Gram deviation {:.3e}", cqh.max_deviation));
    }
    let mut adj = Worst::new(1e-8);
    let asc = fam("al-salam-carlitz-1", 0.5, &[])?;
    for (n, k) in [(0, 0), (0, 1), (1, 2), (2, 3), (3, 3)] {
        let r = adjointness_check(&asc, n, k, Shift::from_integer(0), 1e-12).map_err(|e| e.to_string())?;
        adj.add(|| format!("n={n} k={k}"), r.gap)?;
    }
    Ok(format!(
        "discrete Gram (n <= 4) {:.2e} ({}), continuous q-Hermite {:.2e}, ASC I alpha=0 adjointness {:.2e}",
        g.value, g.label, cqh.max_deviation, adj.value
    ))
}

/// The top-left `k` block of every operator; relations on indices below
/// `k - 2` only touch entries inside it.
fn leading_block(rep: &TruncatedRep, k: usize) -> TruncatedRep {
    let cut = |m: &nalgebra::DMatrix<f64>| m.view((0, 0), (k, k)).into_owned();
    TruncatedRep {
        dim: k,
        q: rep.q,
        a: cut(&rep.a),
        adag: cut(&rep.adag),
        n: cut(&rep.n),
        b: cut(&rep.b),
        bdag: cut(&rep.bdag),
        k0: cut(&rep.k0),
        kplus: cut(&rep.kplus),
        kminus: cut(&rep.kminus),
        notes: vec![],
    }
}

fn algebra_audit() -> Outcome {
    const AUDITED: [&str; 6] = ["[N,a]=-a", "[N,a+]=a+", "b b+ - q b+ b = q^(-N)", "[K0,K+]=K+", "[K0,K-]=-K-", "[K-,K+]=[2K0]_q2"];
    let mut w = Worst::new(1e-10);
    let audit = check_relations(&build_rep(0.5, 12).map_err(|e| e.to_string())?);
    for name in AUDITED {
        let v = audit.get(name).ok_or_else(|| format!("relation {name} missing"))?;
        w.add(|| format!("dim=12 {name}"), v)?;
    }
    let mut drift = Worst::new(1e-10);
    let base = check_relations(&build_rep(0.5, 6).map_err(|e| e.to_string())?);
    for dim in [12, 24] {
        let rep = build_rep(0.5, dim).map_err(|e| e.to_string())?;
        let shared = check_relations(&leading_block(&rep, 6));
        for name in AUDITED {
            let (a, b) = (base.get(name).unwrap_or(f64::NAN), shared.get(name).unwrap_or(f64::NAN));
            drift.add(|| format!("dim=6 vs {dim} {name}"), (a - b).abs())?;
        }
    }
    Ok(format!(
        "q = 0.5, dim 12 worst interior residual {:.2e} ({}); residuals on the shared interior 0..3 differ across dims 6/12/24 by {:.2e}",
        w.value, w.label, drift.value
    ))
}

fn determinism() -> Outcome {
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_qfactor"))
            .args(["report", "--family", "wall", "--params", "a=0.3", "--q", "0.5"])
            .env_remove("QFACTOR_TOL")
            .output()
            .map_err(|e| e.to_string())
    };
    let (a, b) = (run()?, run()?);
    if !a.status.success() {
        return Err(format!("report exited with {:?}: {}", a.status.code(), String::from_utf8_lossy(&a.stderr)));
    }
    if a.stdout != b.stdout {
        return Err("two report runs differ".into());
    }
    let text = String::from_utf8(a.stdout).map_err(|e| e.to_string())?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let again = serde_json::to_string_pretty(&v).map_err(|e| e.to_string())? + "\n";
    if again != text {
        return Err("report JSON does not round-trip".into());
    }
    Ok(format!("two `qfactor report` runs byte-identical ({} bytes), JSON round-trips", text.len()))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("eigen-equation suite", eigen_suite),
        ("factorization for random rational alpha", factorization_universality),
        ("factorization table", factorization_table),
        ("ladder suites", ladder_suites),
        ("spectrum consistency", spectrum_consistency),
        ("linearity property", linearity_necessity),
        ("orthogonality", orthogonality),
        ("su_q(1,1) audit", algebra_audit),
        ("report determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(msg) => println!("PASS  {}  {name}: {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL  {}  {name}: {msg}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

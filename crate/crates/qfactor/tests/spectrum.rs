mod common;

use common::fam;
use qfactor::factor::{appendix_recurrence_residual, default_alpha_candidates, search_factorization, FactorStatus};
use qfactor::families::spectrum::{lambda_minus, lambda_plus};
use qfactor::families::{catalog, eigenvalue_general, q_linearity_class, spectrum_coeffs, ttrr_constant, QLinearity, SpectrumCoeffs};
use qfactor::qcore::k_q;
use qfactor::Exec;

#[test]
fn ttrr_defect_matches_closed_form() {
    for q in [0.3, 0.5, 0.8] {
        for e in catalog() {
            let f = e.build(q, &Default::default()).unwrap();
            let lam = |n: usize| (f.lambda)(n);
            let t = ttrr_constant(&lam, q, 8, 1e-10).unwrap_or_else(|err| panic!("{} q={q}: {err}", e.name));
            let c = spectrum_coeffs(&f);
            let scale = (0..10).map(|n| lam(n).abs()).fold(1.0, f64::max);
            assert!((t - c.ttrr_defect()).abs() <= 1e-10 * scale, "{} q={q}: {t} vs {}", e.name, c.ttrr_defect());
        }
    }
}

#[test]
fn general_eigenvalue_formula_reproduces_catalog() {
    for q in [0.3, 0.5, 0.8] {
        for e in catalog() {
            let f = e.build(q, &Default::default()).unwrap();
            let c = spectrum_coeffs(&f);
            for n in 0..=8 {
                let want = (f.lambda)(n);
                let got = eigenvalue_general(&c, n as i64);
                assert!((got - want).abs() <= 1e-8 * want.abs().max(1.0), "{} q={q} n={n}: {got} vs {want}", e.name);
            }
        }
    }
}

#[test]
fn c1_c2_product() {
    for e in catalog() {
        let c = spectrum_coeffs(&e.build(0.5, &Default::default()).unwrap());
        assert!((c.l_q() - c.l_q_closed()).abs() <= 1e-12, "{}", e.name);
    }
    for (s, t, q) in [(0.3, -1.2, 0.4), (-2.0, 0.5, 0.9), (1.0, 1.0, 0.5)] {
        let c = SpectrumCoeffs::new(s, t, q);
        assert!((c.l_q() - c.l_q_closed()).abs() <= 1e-12 * c.l_q().abs().max(1.0));
    }
}

#[test]
fn lambda_pm_formulas() {
    for q in [0.3, 0.5, 0.8] {
        let k = k_q(q);
        for t in [-1.5, 0.7] {
            let plus = SpectrumCoeffs::new(k * t, t, q);
            let minus = SpectrumCoeffs::new(-k * t, t, q);
            for n in 0..=8i64 {
                assert!((eigenvalue_general(&plus, n) - lambda_plus(t, q, n)).abs() <= 1e-10 * lambda_plus(t, q, n).abs().max(1.0));
                assert!((eigenvalue_general(&minus, n) - lambda_minus(t, q, n)).abs() <= 1e-10 * lambda_minus(t, q, n).abs().max(1.0));
            }
        }
    }
}

#[test]
fn linearity_classes() {
    use QLinearity::*;
    let want = [
        ("stieltjes-wigert", QLinear),
        ("al-salam-carlitz-1", QLinear),
        ("al-salam-carlitz-2", QInverseLinear),
        ("discrete-q-hermite-2", QLinear),
        ("wall", QInverseLinear),
        ("discrete-q-laguerre", QLinear),
        ("q-meixner", QLinear),
        ("q-charlier", QLinear),
        ("askey-wilson", Neither),
        ("continuous-q-laguerre", QInverseLinear),
        ("continuous-q-hermite", QInverseLinear),
        ("continuous-dual-q-hahn", QInverseLinear),
    ];
    for (name, class) in want {
        assert_eq!(q_linearity_class(&fam(name, 0.5, &[]), 1e-9).unwrap(), class, "{name}");
    }
}

#[test]
fn appendix_recurrence_for_solved_families() {
    for q in [0.3, 0.5, 0.8] {
        for e in catalog() {
            let f = e.build(q, &Default::default()).unwrap();
            let r = search_factorization(&f, &default_alpha_candidates(), &f.grid_points(), 1e-8, Exec::default());
            let Some(lam) = r.lambda.filter(|l| *l != 0.0 && r.status == FactorStatus::Solved) else { continue };
            let res = appendix_recurrence_residual(&f, lam, 8).unwrap();
            assert!(res <= 1e-10, "{} q={q}: {res:.3e}", e.name);
        }
    }
}

#[test]
fn short_recurrence_window_is_rejected() {
    assert!(ttrr_constant(&|n| n as f64, 0.5, 2, 1e-10).is_err());
    assert!(ttrr_constant(&|n| (n * n) as f64, 0.5, 8, 1e-10).is_err());
}

mod common;

use common::fam;
use qfactor::factor::adjointness_check;
use qfactor::families::{catalog, gram, QuadratureSpec};
use qfactor::Shift;

#[test]
fn gram_matrices_are_identity() {
    for e in catalog() {
        let f = e.build(0.5, &Default::default()).unwrap();
        if !f.normalized {
            continue;
        }
        let g = gram(&f, 4, &QuadratureSpec::default()).unwrap_or_else(|err| panic!("{}: {err}", e.name));
        assert!(g.max_deviation <= 1e-6, "{}: {:.3e}", e.name, g.max_deviation);
        assert_eq!(g.matrix.len(), 5);
    }
}

#[test]
fn al_salam_carlitz_two_signed_measure() {
    for q in [0.3, 0.5, 0.8] {
        let f = fam("al-salam-carlitz-2", q, &[("a", -0.5)]);
        let g = gram(&f, 4, &QuadratureSpec::default()).unwrap();
        assert!(g.max_deviation <= 1e-6, "q={q}: {:.3e}", g.max_deviation);
    }
}

#[test]
fn degenerate_two_branch_measure_is_flagged() {
    assert!(!fam("al-salam-carlitz-2", 0.5, &[("a", 0.5)]).normalized);
    assert!(fam("al-salam-carlitz-2", 0.5, &[("a", -0.5)]).normalized);
    assert!(fam("al-salam-carlitz-2", 0.3, &[("a", 0.5)]).normalized);
}

#[test]
fn continuous_hermite_by_quadrature() {
    for q in [0.3, 0.5, 0.8] {
        let g = gram(&fam("continuous-q-hermite", q, &[]), 4, &QuadratureSpec::default()).unwrap();
        assert!(g.max_deviation <= 1e-6, "q={q}: {:.3e}", g.max_deviation);
    }
}

#[test]
fn alpha_operators_are_adjoint_for_al_salam_carlitz() {
    let f = fam("al-salam-carlitz-1", 0.5, &[]);
    for (n, k) in [(0, 0), (0, 1), (1, 2), (2, 3), (3, 3)] {
        let r = adjointness_check(&f, n, k, Shift::from_integer(0), 1e-12).unwrap();
        assert!(r.gap <= 1e-8, "n={n} k={k}: {:.3e}", r.gap);
        assert!(r.terms > 0);
    }
}

#[test]
fn wall_half_shift_is_not_adjoint() {
    let f = fam("wall", 0.5, &[]);
    let r = adjointness_check(&f, 1, 2, Shift::new(1, 2), 1e-12).unwrap();
    assert!(r.gap > 1e-3, "{r:?}");
}

#[test]
fn adjointness_needs_discrete_support() {
    let f = fam("continuous-q-hermite", 0.5, &[]);
    assert!(adjointness_check(&f, 0, 0, Shift::from_integer(0), 1e-12).is_err());
}

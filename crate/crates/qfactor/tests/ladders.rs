mod common;

use common::{fam, integer_grid};
use qfactor::factor::{
    ladder_check, ladder_coeffs, param_ladder_check, shift_operator_check, ShiftKind,
};
use qfactor::{Error, Shift};

fn ladder_grid(f: &qfactor::families::Family) -> Vec<qfactor::C64> {
    if f.support.is_discrete() {
        integer_grid(14)
    } else {
        f.grid_points()
    }
}

#[test]
fn parameter_ladders() {
    for q in [0.3, 0.5, 0.8] {
        for name in ["wall", "discrete-q-laguerre", "q-meixner", "q-charlier"] {
            let f = fam(name, q, &[]);
            let g = ladder_grid(&f);
            for n in 0..=6 {
                let r = param_ladder_check(&f, n, &g, 1e-8).unwrap_or_else(|e| panic!("{name} q={q} n={n}: {e}"));
                assert!(r.residual <= 1e-8, "{name} q={q} n={n}: {:.3e}", r.residual);
            }
        }
    }
}

#[test]
fn wall_coefficients_and_norm_recurrence() {
    let q: f64 = 0.5;
    let f = fam("wall", q, &[("a", 0.3)]);
    for n in 1..=6 {
        let r = param_ladder_check(&f, n, &integer_grid(14), 1e-8).unwrap();
        let want = ((1.0 - q.powi(-(n as i32))) / (1.0 - 1.0 / q)).sqrt();
        assert!((r.expected_down - want).abs() < 1e-12 || (r.expected_up - want).abs() < 1e-12, "n={n}");
        assert!(r.norm_recurrence.unwrap() <= 1e-10, "n={n}: {:?}", r.norm_recurrence);
    }
}

#[test]
fn meixner_coefficients() {
    let q: f64 = 0.5;
    let f = fam("q-meixner", q, &[]);
    for n in 1..=6 {
        let r = param_ladder_check(&f, n, &integer_grid(14), 1e-8).unwrap();
        let lo = ((1.0 - q.powi(n as i32)) / (1.0 - q)).sqrt();
        let hi = ((1.0 - q.powi(n as i32 + 1)) / (1.0 - q)).sqrt();
        for e in [r.expected_down, r.expected_up] {
            assert!((e - lo).abs() < 1e-12 || (e - hi).abs() < 1e-12, "n={n}: {e}");
        }
    }
}

#[test]
fn shift_identities() {
    for q in [0.3, 0.5, 0.8] {
        for name in ["wall", "discrete-q-laguerre", "q-meixner", "q-charlier"] {
            let f = fam(name, q, &[]);
            let g = ladder_grid(&f);
            for n in 0..=6 {
                let b = shift_operator_check(&f, ShiftKind::Backward, n, &g).unwrap();
                assert!(b <= 1e-10, "{name} q={q} backward n={n}: {b:.3e}");
                if n > 0 {
                    let fw = shift_operator_check(&f, ShiftKind::Forward, n, &g).unwrap();
                    assert!(fw <= 1e-10, "{name} q={q} forward n={n}: {fw:.3e}");
                }
            }
        }
    }
}

#[test]
fn wall_forward_on_twenty_points() {
    let f = fam("wall", 0.5, &[("a", 0.3)]);
    let r = shift_operator_check(&f, ShiftKind::Forward, 2, &integer_grid(20)).unwrap();
    assert!(r <= 1e-10, "{r:.3e}");
}

#[test]
fn shift_identities_need_a_supported_family() {
    let f = fam("askey-wilson", 0.5, &[]);
    assert!(matches!(shift_operator_check(&f, ShiftKind::Forward, 1, &f.grid_points()), Err(Error::Capability { .. })));
    assert!(param_ladder_check(&f, 1, &f.grid_points(), 1e-8).is_err());
}

#[test]
fn alpha_operators_are_ladders_for_solved_families() {
    for (name, alpha, varsigma) in [("stieltjes-wigert", Shift::from_integer(2), 0.5), ("al-salam-carlitz-1", Shift::from_integer(0), 0.5)] {
        let f = fam(name, 0.5, &[]);
        let g = f.grid_points();
        for n in 0..=6 {
            let r = ladder_check(&f, alpha, n, &g, 1e-8).unwrap_or_else(|e| panic!("{name} n={n}: {e}"));
            assert!(r.residual <= 1e-8);
        }
        let c = ladder_coeffs(&f, alpha, 6, Some(varsigma), 1.0, &g);
        assert!(c.product_residual <= 1e-10, "{name}: {:.3e}", c.product_residual);
        assert!(c.shift_residual.unwrap() <= 1e-10, "{name}: {:?}", c.shift_residual);
        assert!(c.fit_residual <= 1e-8);
    }
}

#[test]
fn alpha_operators_of_continuous_hermite_are_not_ladders() {
    let f = fam("continuous-q-hermite", 0.5, &[]);
    assert!(matches!(ladder_check(&f, Shift::new(1, 2), 2, &f.grid_points(), 1e-8), Err(Error::NotALadder { .. })));
}

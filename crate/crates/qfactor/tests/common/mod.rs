#![allow(dead_code)]

use std::collections::BTreeMap;

use qfactor::families::{self, Family};
use qfactor::C64;

pub fn params(p: &[(&str, f64)]) -> BTreeMap<String, f64> {
    p.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

pub fn fam(name: &str, q: f64, p: &[(&str, f64)]) -> Family {
    families::build(name, q, &params(p)).unwrap_or_else(|e| panic!("{name} at q={q}: {e}"))
}

/// Eigen-equation suite; catalog defaults already carry the listed parameters.
pub const SUITE: &[(&str, &[(&str, f64)])] = &[
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

pub fn integer_grid(count: usize) -> Vec<C64> {
    (0..count).map(|k| C64::new(k as f64, 0.0)).collect()
}

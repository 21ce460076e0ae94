#![allow(dead_code)]

use mirrorfreq::{Injection, Mat2, C64};
use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn complex() -> impl Strategy<Value = C64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| C64::new(re, im))
}

pub fn mat2() -> impl Strategy<Value = Mat2> {
    prop::array::uniform4(complex()).prop_map(|[a, b, c, d]| Mat2::new(a, b, c, d))
}

/// A matrix that is safely invertible: random entries plus a diagonal shift.
pub fn well_conditioned() -> impl Strategy<Value = Mat2> {
    mat2().prop_map(|m| m + Mat2::scalar(C64::new(2.5, 0.0)))
}

/// Runner with a fixed seed so the reported maxima are reproducible.
pub fn runner(cases: u32) -> TestRunner {
    let cfg = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(cfg, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

pub fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

/// Original sequence impedances by solving the interconnection directly.
///
/// Shunt: `V = Z_S I_S = Z_L I_L`, `I_S + I_L = e`.
/// Series: `V_S = Z_S I_S`, `V_L = Z_L I_L`, `V_L - V_S = e`, `I_S + I_L = 0`.
/// `e` excites the positive (`seq = 0`) or negative (`seq = 1`) sequence.
/// Returns `(load, source)` as `V_seq / I_seq` of each subsystem.
pub fn brute_original(zs: &Mat2, zl: &Mat2, kind: Injection, seq: usize) -> (C64, C64) {
    let zero = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    // Unknowns: V_S(0..2), V_L(2..4), I_S(4..6), I_L(6..8).
    let mut a = DMatrix::from_element(8, 8, zero);
    let mut b = DMatrix::from_element(8, 1, zero);
    for r in 0..2 {
        a[(r, r)] = one;
        a[(2 + r, 2 + r)] = one;
        for k in 0..2 {
            a[(r, 4 + k)] = -zs.m[r][k];
            a[(2 + r, 6 + k)] = -zl.m[r][k];
        }
        match kind {
            Injection::Shunt => {
                a[(4 + r, r)] = one;
                a[(4 + r, 2 + r)] = -one;
                a[(6 + r, 4 + r)] = one;
                a[(6 + r, 6 + r)] = one;
                if r == seq {
                    b[(6 + r, 0)] = one;
                }
            }
            Injection::Series => {
                a[(4 + r, 2 + r)] = one;
                a[(4 + r, r)] = -one;
                a[(6 + r, 4 + r)] = one;
                a[(6 + r, 6 + r)] = one;
                if r == seq {
                    b[(4 + r, 0)] = one;
                }
            }
        }
    }
    let x = a.lu().solve(&b).expect("interconnection is singular");
    (x[2 + seq] / x[6 + seq], x[seq] / x[4 + seq])
}

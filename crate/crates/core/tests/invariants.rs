mod common;

use std::f64::consts::PI;

use common::*;
use mirrorfreq::cmat::pair_distance;
use mirrorfreq::impedance::{
    a_z, a_z_inv, admittance_transform, dq_to_pn, mfd_classify_dq, mfd_classify_pn, original_pairs,
    pn_to_dq, Direction,
};
use mirrorfreq::stability::{
    count_encirclements, minor_loop_from_impedances, winding_number, Closure, NyquistLoci,
};
use mirrorfreq::sweep::{Sides, Testbed};
use mirrorfreq::{Domain, ImpedancePn, Injection, Mat2, Preset, VerdictStatus, C64};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 2000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn transform_round_trips(m in mat2()) {
        prop_assert!((pn_to_dq(&dq_to_pn(&m)) - m).max_abs() < 1e-14);
        prop_assert!((dq_to_pn(&pn_to_dq(&m)) - m).max_abs() < 1e-14);
    }

    #[test]
    fn transform_is_linear(a in mat2(), b in mat2(), k in complex()) {
        let lhs = dq_to_pn(&(a + b * Mat2::scalar(k)));
        let rhs = dq_to_pn(&a) + dq_to_pn(&b) * Mat2::scalar(k);
        prop_assert!((lhs - rhs).max_abs() < 1e-14);
    }

    #[test]
    fn transform_preserves_det_and_trace(m in mat2()) {
        let p = dq_to_pn(&m);
        prop_assert!((p.det() - m.det()).norm() < 1e-13);
        prop_assert!((p.trace() - m.trace()).norm() < 1e-14);
    }

    #[test]
    fn transform_is_multiplicative(a in mat2(), b in mat2()) {
        prop_assert!((dq_to_pn(&(a * b)) - dq_to_pn(&a) * dq_to_pn(&b)).max_abs() < 1e-14);
    }

    #[test]
    fn admittance_follows_inversion(m in well_conditioned()) {
        let y = m.inverse().unwrap();
        let lhs = admittance_transform(&y, Direction::DqToPn);
        let rhs = dq_to_pn(&m).inverse().unwrap();
        prop_assert!((lhs - rhs).max_abs() < 1e-13);
    }

    #[test]
    fn minor_loop_eigenvalues_match_across_domains(zs in mat2(), zl in well_conditioned()) {
        let dq = minor_loop_from_impedances(25.0, Domain::Dq, &zs, &zl).unwrap();
        let pn = minor_loop_from_impedances(25.0, Domain::Pn, &dq_to_pn(&zs), &dq_to_pn(&zl)).unwrap();
        let scale = dq.lambda[0].norm().max(dq.lambda[1].norm()).max(1.0);
        prop_assert!(pair_distance(dq.lambda, pn.lambda) / scale < 1e-12);
    }

    #[test]
    fn mfd_structure_maps_both_ways(zx in complex(), zy in complex()) {
        let dq = Mat2::new(zx, zy, -zy, zx);
        let (is_mfd, st) = mfd_classify_pn(&dq_to_pn(&dq), 1e-9).unwrap();
        prop_assert!(is_mfd);
        prop_assert!((st.to_dq() - dq).max_abs() < 1e-14);
        let (back, _) = mfd_classify_dq(&pn_to_dq(&dq_to_pn(&dq)), 1e-9).unwrap();
        prop_assert!(back);
    }

    #[test]
    fn asymmetric_dq_is_not_mfd(zx in complex(), zy in complex(), d in complex()) {
        prop_assume!(d.norm() > 0.2 * (zx.norm() + zy.norm() + d.norm()));
        let m = Mat2::new(zx + d, zy, -zy, zx - d);
        let (is_mfd, _) = mfd_classify_pn(&dq_to_pn(&m), 0.05).unwrap();
        prop_assert!(!is_mfd);
    }

    #[test]
    fn original_formulas_match_direct_solve(zs in well_conditioned(), zl in well_conditioned()) {
        let spn = ImpedancePn::new(30.0, 50.0, zs);
        let lpn = ImpedancePn::new(30.0, 50.0, zl);
        for kind in [Injection::Shunt, Injection::Series] {
            let (load, source) = original_pairs(&spn, &lpn, kind).unwrap();
            for (seq, (l, s)) in [(load.zp, source.zp), (load.zn, source.zn)].into_iter().enumerate() {
                let (bl, bs) = brute_original(&zs, &zl, kind, seq);
                prop_assert!(rel(l, bl) < 1e-10, "{kind:?} load seq {seq}");
                prop_assert!(rel(s, bs) < 1e-10, "{kind:?} source seq {seq}");
            }
        }
    }

    #[test]
    fn original_impedances_equal_diagonal_for_mfd(zs_pp in complex(), zs_nn in complex(), zl_pp in complex(), zl_nn in complex()) {
        let shift = C64::new(2.5, 0.0);
        let zs = Mat2::diag(zs_pp + shift, zs_nn + shift);
        let zl = Mat2::diag(zl_pp + shift, zl_nn + shift);
        let (load, source) = original_pairs(&ImpedancePn::new(30.0, 50.0, zs), &ImpedancePn::new(30.0, 50.0, zl), Injection::Shunt).unwrap();
        prop_assert!(rel(load.zp, zl.m[0][0]) < 1e-14 && rel(load.zn, zl.m[1][1]) < 1e-14);
        prop_assert!(rel(source.zp, zs.m[0][0]) < 1e-14 && rel(source.zn, zs.m[1][1]) < 1e-14);
    }

    #[test]
    fn sampled_circle_winds_once_per_turn(
        cre in -2.0..2.0f64, cim in -2.0..2.0f64, r in 0.1..2.0f64,
        turns in prop::sample::select(vec![-2i32, -1, 1, 2]),
        pre in -4.0..4.0f64, pim in -4.0..4.0f64,
    ) {
        let center = C64::new(cre, cim);
        let point = C64::new(pre, pim);
        prop_assume!(((point - center).norm() - r).abs() > 0.05 * r);
        let n = 64 * turns.unsigned_abs() as usize;
        let path: Vec<C64> = (0..n)
            .map(|k| center + C64::from_polar(r, 2.0 * PI * turns as f64 * k as f64 / n as f64))
            .collect();
        let expected = if (point - center).norm() < r { turns } else { 0 };
        prop_assert_eq!(winding_number(&path, point), expected);
    }

    #[test]
    fn mirrored_half_circle_is_one_encirclement(cre in -3.0..1.0f64, r in 0.2..2.0f64) {
        let critical = C64::new(-1.0, 0.0);
        let center = C64::new(cre, 0.0);
        prop_assume!(((critical - center).norm() - r).abs() > 0.05);
        let n = 200;
        let freqs: Vec<f64> = (1..=n).map(|k| k as f64).collect();
        let locus1: Vec<C64> = (1..=n)
            .map(|k| center + C64::from_polar(r, PI * (k as f64 - 0.5) / n as f64))
            .collect();
        let locus2 = vec![C64::new(0.0, 0.0); n];
        let loci = NyquistLoci { frequencies: freqs, locus1: locus1.clone(), locus2, closure: Closure::ConjugateMirror };
        let v = count_encirclements(&loci, critical).unwrap();
        let inside = (critical - center).norm() < r;
        prop_assert_eq!(v.encirclements.abs(), i32::from(inside));
        prop_assert_eq!(v.stable, !inside);
        let nearest = locus1.iter().chain(&loci.locus2).map(|z| (z - critical).norm()).fold(f64::INFINITY, f64::min);
        prop_assert!((v.margin - nearest).abs() < 1e-15);
        prop_assert!(v.status != VerdictStatus::GridInsufficient);
    }

    #[test]
    fn a_z_inverse_is_exact(m in mat2()) {
        prop_assert!((a_z() * a_z_inv() * m - m).max_abs() < 1e-15);
    }
}

/// Measured impedances at two amplitudes within 2% of each other.
fn assert_amplitude_independent(preset: Preset, kind: Injection, f_dq: f64) {
    let measure = |amp: f64| {
        let mut case = preset.case();
        case.sim.amplitude = amp;
        let bed = Testbed::new(&case).unwrap();
        bed.measure_point(kind, f_dq, Sides::Both)
    };
    let lo = measure(0.01);
    let hi = measure(0.04);
    assert!(!lo.flagged() && !hi.flagged(), "{lo:?} {hi:?}");
    for (a, b) in [(&lo.source, &hi.source), (&lo.load, &hi.load)] {
        let (a, b) = (a.as_ref().unwrap(), b.as_ref().unwrap());
        let d = (a.zdq.m - b.zdq.m).frobenius() / b.zdq.m.frobenius();
        assert!(d < 0.02, "{} {kind:?} {f_dq} Hz: {d}", preset.name());
    }
}

#[test]
fn oracle_is_amplitude_independent() {
    for f in [10.0, 130.0] {
        assert_amplitude_independent(Preset::OracleRl, Injection::Shunt, f);
        assert_amplitude_independent(Preset::OracleRl, Injection::Series, f);
    }
}

#[test]
fn case_b_is_amplitude_independent() {
    for f in [20.0, 300.0] {
        assert_amplitude_independent(Preset::B, Injection::Shunt, f);
    }
}

//! Minor-loop gain, characteristic loci and Generalized Nyquist Criterion.
//!
//! Loci are sampled on positive frequencies only. The Nyquist contour is
//! closed by mirroring each locus to negative frequencies as its complex
//! conjugate, which assumes the underlying dq transfer matrices come from
//! real-coefficient dynamics. GNC also assumes both subsystems are stable on
//! their own; that is the caller's claim and is not checked here.

use std::f64::consts::{FRAC_PI_4, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::cmat::{pair_distance, Mat2, C64};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Domain {
    Dq,
    Pn,
    /// `diag(Z_p, Z_n)` built from original sequence impedances.
    Original,
}

/// A matrix tagged with its frequency and domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainMatrix {
    pub f_dq: f64,
    pub domain: Domain,
    pub m: Mat2,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinorLoopPoint {
    pub f_dq: f64,
    pub l: Mat2,
    pub lambda: [C64; 2],
}

/// `L = Z_S Y_L`, eigenvalues in closed form.
pub fn minor_loop_gain(zs: &DomainMatrix, yl: &DomainMatrix) -> Result<MinorLoopPoint> {
    if zs.domain != yl.domain {
        return Err(Error::arg(format!(
            "domain mismatch: {:?} vs {:?}",
            zs.domain, yl.domain
        )));
    }
    if zs.f_dq != yl.f_dq {
        return Err(Error::arg(format!(
            "frequency mismatch: {} Hz vs {} Hz",
            zs.f_dq, yl.f_dq
        )));
    }
    let l = zs.m * yl.m;
    Ok(MinorLoopPoint {
        f_dq: zs.f_dq,
        l,
        lambda: l.eigenvalues(),
    })
}

/// Minor-loop point from source and load impedances.
pub fn minor_loop_from_impedances(f_dq: f64, domain: Domain, zs: &Mat2, zl: &Mat2) -> Result<MinorLoopPoint> {
    let yl = zl.inverse()?;
    minor_loop_gain(
        &DomainMatrix { f_dq, domain, m: *zs },
        &DomainMatrix { f_dq, domain, m: yl },
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Closure {
    ConjugateMirror,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NyquistLoci {
    pub frequencies: Vec<f64>,
    pub locus1: Vec<C64>,
    pub locus2: Vec<C64>,
    pub closure: Closure,
}

impl NyquistLoci {
    pub fn loci(&self) -> [&[C64]; 2] {
        [&self.locus1, &self.locus2]
    }
}

/// Orders eigenvalues into two continuous loci. Adjacent points are paired
/// by the permutation with the smaller total distance; ties keep the
/// previous order.
pub fn build_loci(points: &[MinorLoopPoint]) -> Result<NyquistLoci> {
    if points.len() < 2 {
        return Err(Error::arg("at least two frequency points are required"));
    }
    if points.windows(2).any(|w| !(w[1].f_dq > w[0].f_dq)) {
        return Err(Error::arg("frequencies must be strictly ascending"));
    }
    let mut l1 = Vec::with_capacity(points.len());
    let mut l2 = Vec::with_capacity(points.len());
    let [a, b] = points[0].lambda;
    l1.push(a);
    l2.push(b);
    for p in &points[1..] {
        let (prev1, prev2) = (*l1.last().unwrap(), *l2.last().unwrap());
        let [a, b] = p.lambda;
        let straight = (a - prev1).norm() + (b - prev2).norm();
        let crossed = (b - prev1).norm() + (a - prev2).norm();
        if crossed < straight {
            l1.push(b);
            l2.push(a);
        } else {
            l1.push(a);
            l2.push(b);
        }
    }
    Ok(NyquistLoci {
        frequencies: points.iter().map(|p| p.f_dq).collect(),
        locus1: l1,
        locus2: l2,
        closure: Closure::ConjugateMirror,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictStatus {
    Stable,
    Unstable,
    /// A locus passes within 1e-9 of the critical point.
    Marginal,
    /// Some sampled step turns by more than pi/4 around the critical point.
    GridInsufficient,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GncVerdict {
    /// Net counter-clockwise encirclements of the critical point by both
    /// closed loci together.
    pub encirclements: i32,
    pub stable: bool,
    pub margin: f64,
    pub critical_frequency: f64,
    pub status: VerdictStatus,
    /// Largest sampled angle step around the critical point, radians.
    pub max_step: f64,
}

pub const MARGINAL_DISTANCE: f64 = 1e-9;
pub const MAX_ARG_STEP: f64 = FRAC_PI_4;

fn wrap_pi(x: f64) -> f64 {
    let mut y = x % TAU;
    if y <= -PI {
        y += TAU;
    } else if y > PI {
        y -= TAU;
    }
    y
}

/// Accumulated angle of `path - point` along an open sampled path, and the
/// largest single step.
pub fn accumulated_angle(path: &[C64], point: C64) -> (f64, f64) {
    let mut total = 0.0;
    let mut max_step: f64 = 0.0;
    for w in path.windows(2) {
        let step = wrap_pi((w[1] - point).arg() - (w[0] - point).arg());
        max_step = max_step.max(step.abs());
        total += step;
    }
    (total, max_step)
}

/// Winding number of an explicitly closed sampled path (the last sample is
/// joined back to the first).
pub fn winding_number(path: &[C64], point: C64) -> i32 {
    if path.len() < 2 {
        return 0;
    }
    let mut closed = path.to_vec();
    closed.push(path[0]);
    let (total, _) = accumulated_angle(&closed, point);
    (total / TAU).round() as i32
}

pub fn count_encirclements(loci: &NyquistLoci, point: C64) -> Result<GncVerdict> {
    if loci.frequencies.is_empty() {
        return Err(Error::arg("empty loci"));
    }
    if point.im != 0.0 {
        return Err(Error::arg("conjugate-mirror closure needs a real critical point"));
    }
    let mut total = 0.0;
    let mut max_step: f64 = 0.0;
    let mut margin = f64::INFINITY;
    let mut critical_frequency = loci.frequencies[0];
    for locus in loci.loci() {
        let (delta, step) = accumulated_angle(locus, point);
        max_step = max_step.max(step);
        let z0 = locus[0] - point;
        let zn = locus[locus.len() - 1] - point;
        // mirror branch turns by the same amount as the sampled branch; the
        // straight closing segments join conj(z) and z at both ends
        total += 2.0 * delta + wrap_pi(2.0 * z0.arg()) + wrap_pi(-2.0 * zn.arg());
        for (k, z) in locus.iter().enumerate() {
            let d = (z - point).norm();
            if d < margin {
                margin = d;
                critical_frequency = loci.frequencies[k];
            }
        }
    }
    let encirclements = (total / TAU).round() as i32;
    let stable = encirclements == 0;
    let status = if margin < MARGINAL_DISTANCE {
        VerdictStatus::Marginal
    } else if max_step > MAX_ARG_STEP {
        VerdictStatus::GridInsufficient
    } else if stable {
        VerdictStatus::Stable
    } else {
        VerdictStatus::Unstable
    };
    Ok(GncVerdict {
        encirclements,
        stable,
        margin,
        critical_frequency,
        status,
        max_step,
    })
}

/// Per-frequency relative distance between two eigenvalue sets, measured
/// against the larger eigenvalue magnitude of `a`.
pub fn eigen_mismatch_profile(a: &[MinorLoopPoint], b: &[MinorLoopPoint]) -> Result<Vec<(f64, f64)>> {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.f_dq != y.f_dq) {
        return Err(Error::arg("frequency grids differ"));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| {
            let scale = x.lambda[0].norm().max(x.lambda[1].norm()).max(f64::MIN_POSITIVE);
            (x.f_dq, pair_distance(x.lambda, y.lambda) / scale)
        })
        .collect())
}

/// Largest relative eigenvalue mismatch over the grid.
pub fn gnc_equivalence_check(a: &[MinorLoopPoint], b: &[MinorLoopPoint]) -> Result<f64> {
    Ok(eigen_mismatch_profile(a, b)?
        .into_iter()
        .map(|(_, e)| e)
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmat::{ONE, ZERO};
    use crate::impedance::dq_to_pn;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn point(f: f64, a: C64, b: C64) -> MinorLoopPoint {
        MinorLoopPoint { f_dq: f, l: Mat2::diag(a, b), lambda: [a, b] }
    }

    fn dm(f: f64, domain: Domain, m: Mat2) -> DomainMatrix {
        DomainMatrix { f_dq: f, domain, m }
    }

    #[test]
    fn ideal_source_gives_zero_gain() {
        let p = minor_loop_gain(&dm(5.0, Domain::Dq, Mat2::zero()), &dm(5.0, Domain::Dq, Mat2::identity())).unwrap();
        assert_eq!(p.lambda, [ZERO, ZERO]);
    }

    #[test]
    fn scalar_matrices_multiply() {
        let (z, y) = (c(0.1, 0.2), c(2.0, -1.0));
        let p = minor_loop_gain(&dm(5.0, Domain::Pn, Mat2::scalar(z)), &dm(5.0, Domain::Pn, Mat2::scalar(y))).unwrap();
        assert!((p.lambda[0] - z * y).norm() < 1e-15 && (p.lambda[1] - z * y).norm() < 1e-15);
    }

    #[test]
    fn mismatched_operands_are_rejected() {
        let a = dm(5.0, Domain::Dq, Mat2::identity());
        assert!(minor_loop_gain(&a, &dm(5.0, Domain::Pn, Mat2::identity())).is_err());
        assert!(minor_loop_gain(&a, &dm(6.0, Domain::Dq, Mat2::identity())).is_err());
    }

    #[test]
    fn dq_and_pn_gains_share_eigenvalues() {
        let zs = Mat2::new(c(0.1, 0.5), c(-0.2, 0.0), c(0.3, 0.1), c(0.05, 0.4));
        let zl = Mat2::new(c(1.0, 0.2), c(0.4, -0.3), c(0.1, 0.1), c(0.8, 0.6));
        let a = minor_loop_from_impedances(9.0, Domain::Dq, &zs, &zl).unwrap();
        let b = minor_loop_from_impedances(9.0, Domain::Pn, &dq_to_pn(&zs), &dq_to_pn(&zl)).unwrap();
        assert!(pair_distance(a.lambda, b.lambda) < 1e-14);
    }

    #[test]
    fn constant_eigenvalues_give_constant_loci() {
        let pts: Vec<_> = (1..6).map(|k| point(k as f64, c(0.2, 0.0), c(-0.1, 0.3))).collect();
        let loci = build_loci(&pts).unwrap();
        assert!(loci.locus1.iter().all(|&z| z == c(0.2, 0.0)));
        assert!(loci.locus2.iter().all(|&z| z == c(-0.1, 0.3)));
    }

    #[test]
    fn crossing_pair_is_matched_without_swaps() {
        // Two loci passing within 0.02 of each other; every other point is
        // reported in swapped order.
        let n = 200;
        let pts: Vec<_> = (0..n)
            .map(|k| {
                let s = k as f64 / (n - 1) as f64 * 2.0 - 1.0;
                let a = c(s, 0.01);
                let b = c(-s, -0.01);
                if k % 2 == 0 { point(k as f64 + 1.0, a, b) } else { point(k as f64 + 1.0, b, a) }
            })
            .collect();
        let loci = build_loci(&pts).unwrap();
        let bound = 2.0 / (n - 1) as f64 + 1e-12;
        for l in loci.loci() {
            assert!(l.windows(2).all(|w| (w[1] - w[0]).norm() <= bound));
        }
    }

    #[test]
    fn unsorted_or_short_input_is_rejected() {
        let p = point(2.0, ONE, ONE);
        assert!(build_loci(&[p]).is_err());
        assert!(build_loci(&[p, point(1.0, ONE, ONE)]).is_err());
    }

    #[test]
    fn zero_loci_are_stable_with_unit_margin() {
        let pts: Vec<_> = (1..5).map(|k| point(k as f64, ZERO, ZERO)).collect();
        let v = count_encirclements(&build_loci(&pts).unwrap(), c(-1.0, 0.0)).unwrap();
        assert_eq!(v.encirclements, 0);
        assert!(v.stable);
        assert_eq!(v.status, VerdictStatus::Stable);
        assert!((v.margin - 1.0).abs() < 1e-15);
    }

    #[test]
    fn circle_around_critical_point_is_one_encirclement() {
        // Upper half of a radius-2 circle centred at -1; the mirror closes it.
        let n = 100;
        let pts: Vec<_> = (0..=n)
            .map(|k| {
                let z = c(-1.0, 0.0) + C64::from_polar(2.0, PI * k as f64 / n as f64);
                point(k as f64 + 1.0, z, ZERO)
            })
            .collect();
        let v = count_encirclements(&build_loci(&pts).unwrap(), c(-1.0, 0.0)).unwrap();
        assert_eq!(v.encirclements, 1);
        assert!(!v.stable);
        assert_eq!(v.status, VerdictStatus::Unstable);
        assert!((v.margin - 1.0).abs() < 1e-12);
    }

    #[test]
    fn passing_through_critical_point_is_marginal() {
        let pts = vec![point(1.0, c(-0.5, 0.0), ZERO), point(2.0, c(-1.0, 0.0), ZERO), point(3.0, c(-1.5, -0.1), ZERO)];
        let v = count_encirclements(&build_loci(&pts).unwrap(), c(-1.0, 0.0)).unwrap();
        assert_eq!(v.status, VerdictStatus::Marginal);
        assert_eq!(v.margin, 0.0);
    }

    #[test]
    fn coarse_grid_is_flagged() {
        let pts = vec![point(1.0, c(0.0, 1.0), ZERO), point(2.0, c(-2.0, 1.0), ZERO)];
        let v = count_encirclements(&build_loci(&pts).unwrap(), c(-1.0, 0.0)).unwrap();
        assert_eq!(v.status, VerdictStatus::GridInsufficient);
    }

    #[test]
    fn explicit_winding_number() {
        let circle: Vec<_> = (0..64).map(|k| C64::from_polar(1.0, TAU * k as f64 / 64.0)).collect();
        assert_eq!(winding_number(&circle, ZERO), 1);
        assert_eq!(winding_number(&circle, c(3.0, 0.0)), 0);
        let rev: Vec<_> = circle.iter().rev().copied().collect();
        assert_eq!(winding_number(&rev, ZERO), -1);
    }

    #[test]
    fn equivalence_check_requires_matching_grids() {
        let a = vec![point(1.0, ONE, ZERO), point(2.0, ONE, ZERO)];
        let b = vec![point(1.0, ZERO, ONE), point(3.0, ONE, ZERO)];
        assert!(gnc_equivalence_check(&a, &b).is_err());
        assert_eq!(gnc_equivalence_check(&a, &a).unwrap(), 0.0);
    }
}

//! Complex 2x2 matrices.
//!
//! Every impedance, admittance and minor-loop gain in this crate is a 2x2
//! complex matrix, so a fixed-size type with closed-form determinant,
//! inverse and eigenvalues is used instead of a general linear algebra
//! package. Closed forms keep results deterministic and allocation-free.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const J: C64 = C64::new(0.0, 1.0);

/// Row-major 2x2 complex matrix `[[m00, m01], [m10, m11]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "Mat2Repr", from = "Mat2Repr")]
pub struct Mat2 {
    pub m: [[C64; 2]; 2],
}

impl Mat2 {
    pub const fn new(m00: C64, m01: C64, m10: C64, m11: C64) -> Self {
        Mat2 {
            m: [[m00, m01], [m10, m11]],
        }
    }

    pub const fn zero() -> Self {
        Mat2::new(ZERO, ZERO, ZERO, ZERO)
    }

    pub const fn identity() -> Self {
        Mat2::new(ONE, ZERO, ZERO, ONE)
    }

    pub const fn diag(a: C64, b: C64) -> Self {
        Mat2::new(a, ZERO, ZERO, b)
    }

    pub fn scalar(z: C64) -> Self {
        Mat2::diag(z, z)
    }

    /// Builds a matrix from two column vectors.
    pub fn from_columns(c0: [C64; 2], c1: [C64; 2]) -> Self {
        Mat2::new(c0[0], c1[0], c0[1], c1[1])
    }

    pub fn col(&self, j: usize) -> [C64; 2] {
        [self.m[0][j], self.m[1][j]]
    }

    pub fn det(&self) -> C64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn trace(&self) -> C64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn scale(&self, k: C64) -> Self {
        self.map(|z| z * k)
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Mat2::new(
            f(self.m[0][0]),
            f(self.m[0][1]),
            f(self.m[1][0]),
            f(self.m[1][1]),
        )
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn transpose(&self) -> Self {
        Mat2::new(self.m[0][0], self.m[1][0], self.m[0][1], self.m[1][1])
    }

    pub fn adjoint(&self) -> Self {
        self.transpose().conj()
    }

    pub fn frobenius(&self) -> f64 {
        self.m
            .iter()
            .flatten()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.m.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Singular values `(s_max, s_min)` from the closed form of `A^H A`.
    pub fn singular_values(&self) -> (f64, f64) {
        let f2: f64 = self.m.iter().flatten().map(|z| z.norm_sqr()).sum();
        let d = self.det().norm();
        let d2 = d * d;
        let disc = ((f2 - 2.0 * d) * (f2 + 2.0 * d)).max(0.0).sqrt();
        let s1 = ((f2 + disc) / 2.0).sqrt();
        let s2 = if s1 > 0.0 { d2.sqrt() / s1 } else { 0.0 };
        (s1, s2)
    }

    /// 2-norm condition number; infinite for singular matrices.
    pub fn cond(&self) -> f64 {
        let (s1, s2) = self.singular_values();
        if s1 == 0.0 {
            f64::INFINITY
        } else if s2 == 0.0 {
            f64::INFINITY
        } else {
            s1 / s2
        }
    }

    pub fn inverse(&self) -> Result<Self> {
        let cond = self.cond();
        let det = self.det();
        if !cond.is_finite() || cond > 1e15 || det == ZERO {
            return Err(Error::Singular { cond });
        }
        let [[a, b], [c, d]] = self.m;
        Ok(Mat2::new(d / det, -b / det, -c / det, a / det))
    }

    pub fn mul_vec(&self, v: [C64; 2]) -> [C64; 2] {
        [
            self.m[0][0] * v[0] + self.m[0][1] * v[1],
            self.m[1][0] * v[0] + self.m[1][1] * v[1],
        ]
    }

    /// Both eigenvalues, larger magnitude first.
    ///
    /// Uses `m +- sqrt(((a-d)/2)^2 + bc)` for the dominant root and
    /// `det / lambda1` for the other, which avoids cancellation.
    pub fn eigenvalues(&self) -> [C64; 2] {
        let [[a, b], [c, d]] = self.m;
        let mean = (a + d) * 0.5;
        let half = (a - d) * 0.5;
        let s = (half * half + b * c).sqrt();
        let (p, q) = (mean + s, mean - s);
        let l1 = if p.norm() >= q.norm() { p } else { q };
        if l1 == ZERO {
            return [ZERO, ZERO];
        }
        let l2 = self.det() / l1;
        [l1, l2]
    }

    /// Largest entrywise distance to another matrix.
    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        (*self - *other).max_abs()
    }
}

impl Default for Mat2 {
    fn default() -> Self {
        Mat2::zero()
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, r: Mat2) -> Mat2 {
        let a = &self.m;
        let b = &r.m;
        Mat2::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, r: Mat2) -> Mat2 {
        Mat2::new(
            self.m[0][0] + r.m[0][0],
            self.m[0][1] + r.m[0][1],
            self.m[1][0] + r.m[1][0],
            self.m[1][1] + r.m[1][1],
        )
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, r: Mat2) -> Mat2 {
        self + (-r)
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self.map(|z| -z)
    }
}

/// Serialized form: four named entries with explicit `re`/`im` fields.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Mat2Repr {
    pub m11: Cplx,
    pub m12: Cplx,
    pub m21: Cplx,
    pub m22: Cplx,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cplx {
    pub re: f64,
    pub im: f64,
}

impl From<C64> for Cplx {
    fn from(z: C64) -> Self {
        Cplx { re: z.re, im: z.im }
    }
}

impl From<Cplx> for C64 {
    fn from(c: Cplx) -> Self {
        C64::new(c.re, c.im)
    }
}

impl From<Mat2> for Mat2Repr {
    fn from(m: Mat2) -> Self {
        Mat2Repr {
            m11: m.m[0][0].into(),
            m12: m.m[0][1].into(),
            m21: m.m[1][0].into(),
            m22: m.m[1][1].into(),
        }
    }
}

impl From<Mat2Repr> for Mat2 {
    fn from(r: Mat2Repr) -> Self {
        Mat2::new(r.m11.into(), r.m12.into(), r.m21.into(), r.m22.into())
    }
}

/// Distance between two unordered eigenvalue pairs: the smaller of the two
/// possible pairings, measured by its worst element.
pub fn pair_distance(a: [C64; 2], b: [C64; 2]) -> f64 {
    let straight = (a[0] - b[0]).norm().max((a[1] - b[1]).norm());
    let crossed = (a[0] - b[1]).norm().max((a[1] - b[0]).norm());
    straight.min(crossed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn inverse_of_known_matrix() {
        let m = Mat2::new(c(1.0, 1.0), c(2.0, 0.0), c(0.0, -1.0), c(3.0, 0.5));
        let p = m * m.inverse().unwrap();
        assert!(p.max_abs_diff(&Mat2::identity()) < 1e-15);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let m = Mat2::new(c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0));
        assert!(matches!(m.inverse(), Err(Error::Singular { .. })));
    }

    #[test]
    fn eigenvalues_satisfy_characteristic_polynomial() {
        let m = Mat2::new(c(0.3, -1.0), c(2.0, 0.1), c(-0.7, 0.4), c(1.1, 2.0));
        for l in m.eigenvalues() {
            let shifted = m - Mat2::scalar(l);
            assert!(shifted.det().norm() < 1e-12 * m.frobenius().powi(2));
        }
    }

    #[test]
    fn eigenvalues_of_nilpotent_matrix() {
        let m = Mat2::new(ZERO, ONE, ZERO, ZERO);
        assert_eq!(m.eigenvalues(), [ZERO, ZERO]);
    }

    #[test]
    fn condition_of_diagonal() {
        let m = Mat2::diag(c(4.0, 0.0), c(0.0, 0.5));
        assert!((m.cond() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn serde_uses_re_im_fields() {
        let m = Mat2::new(c(1.0, 2.0), ZERO, ZERO, ONE);
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"m11\":{\"re\":1.0,\"im\":2.0}"));
        let back: Mat2 = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn pair_distance_ignores_order() {
        let a = [c(1.0, 0.0), c(0.0, 1.0)];
        let b = [c(0.0, 1.0), c(1.0, 0.0)];
        assert_eq!(pair_distance(a, b), 0.0);
    }
}

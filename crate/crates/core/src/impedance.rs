//! Impedance matrices in the dq and modified sequence domains.
//!
//! `Z_pn = A_Z Z_dq A_Z^-1` with `A_Z = (1/sqrt 2) [[1, j], [1, -j]]`. The
//! positive sequence row lives at `f_p = f_dq + f1`, the negative sequence
//! row at the signed `f_n = f_dq - f1`.

use serde::{Deserialize, Serialize};

use crate::cmat::{Mat2, C64, J, ONE, ZERO};
use crate::error::{Error, Result};

const INV_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

pub fn a_z() -> Mat2 {
    Mat2::new(ONE, J, ONE, -J).scale(C64::new(INV_SQRT_2, 0.0))
}

/// `A_Z^-1 = A_Z^H`.
pub fn a_z_inv() -> Mat2 {
    Mat2::new(ONE, ONE, -J, J).scale(C64::new(INV_SQRT_2, 0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceDq {
    pub f_dq: f64,
    pub m: Mat2,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpedancePn {
    pub f_dq: f64,
    pub f_p: f64,
    pub f_n: f64,
    pub m: Mat2,
}

impl ImpedanceDq {
    pub fn new(f_dq: f64, m: Mat2) -> Self {
        ImpedanceDq { f_dq, m }
    }
}

impl ImpedancePn {
    pub fn new(f_dq: f64, f1: f64, m: Mat2) -> Self {
        ImpedancePn {
            f_dq,
            f_p: f_dq + f1,
            f_n: f_dq - f1,
            m,
        }
    }

    pub fn f1(&self) -> f64 {
        (self.f_p - self.f_n) / 2.0
    }

    pub fn zpp(&self) -> C64 {
        self.m.m[0][0]
    }
    pub fn zpn(&self) -> C64 {
        self.m.m[0][1]
    }
    pub fn znp(&self) -> C64 {
        self.m.m[1][0]
    }
    pub fn znn(&self) -> C64 {
        self.m.m[1][1]
    }
}

/// Similarity transform dq -> pn with explicit transform matrices. Exposed
/// so validation can inject a faulty `A_Z`.
pub fn dq_to_pn_with(m: &Mat2, az: &Mat2, az_inv: &Mat2) -> Mat2 {
    *az * *m * *az_inv
}

pub fn dq_to_pn(m: &Mat2) -> Mat2 {
    dq_to_pn_with(m, &a_z(), &a_z_inv())
}

pub fn pn_to_dq(m: &Mat2) -> Mat2 {
    a_z_inv() * *m * a_z()
}

pub fn zdq_to_zpn(z: &ImpedanceDq, f1: f64) -> ImpedancePn {
    ImpedancePn::new(z.f_dq, f1, dq_to_pn(&z.m))
}

pub fn zpn_to_zdq(z: &ImpedancePn) -> ImpedanceDq {
    ImpedanceDq::new(z.f_dq, pn_to_dq(&z.m))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    DqToPn,
    PnToDq,
}

/// Admittances transform exactly like impedances.
pub fn admittance_transform(y: &Mat2, dir: Direction) -> Mat2 {
    match dir {
        Direction::DqToPn => dq_to_pn(y),
        Direction::PnToDq => pn_to_dq(y),
    }
}

/// Matrix inverse used to switch between impedance and admittance.
pub fn invert(m: &Mat2) -> Result<Mat2> {
    m.inverse()
}

/// Skew-symmetric part of a dq matrix, `[[Zx, Zy], [-Zy, Zx]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MfdStructure {
    pub zx: C64,
    pub zy: C64,
    /// Size of the part that violates the structure, in the units of `Z`.
    pub residual: f64,
}

impl MfdStructure {
    pub fn to_dq(&self) -> Mat2 {
        Mat2::new(self.zx, self.zy, -self.zy, self.zx)
    }

    /// `(Z_pp, Z_nn) = (Zx - jZy, Zx + jZy)`.
    pub fn to_pn_diag(&self) -> (C64, C64) {
        (self.zx - J * self.zy, self.zx + J * self.zy)
    }
}

fn check_tol(rel_tol: f64) -> Result<()> {
    if rel_tol > 0.0 && rel_tol < 1.0 {
        Ok(())
    } else {
        Err(Error::arg(format!("rel_tol must lie in (0, 1), got {rel_tol}")))
    }
}

/// Mirror-frequency-decoupling test on a sequence-domain matrix:
/// `max(|Z_pn|, |Z_np|) <= rel_tol * max(|Z_pp|, |Z_nn|)`.
pub fn mfd_classify_pn(m: &Mat2, rel_tol: f64) -> Result<(bool, MfdStructure)> {
    check_tol(rel_tol)?;
    let [[pp, pn], [np, nn]] = m.m;
    let residual = pn.norm().max(np.norm());
    let scale = pp.norm().max(nn.norm());
    let s = MfdStructure {
        zx: (pp + nn) * 0.5,
        zy: J * (pp - nn) * 0.5,
        residual,
    };
    Ok((residual <= rel_tol * scale, s))
}

/// Mirror-frequency-decoupling test on a dq matrix: the violations
/// `|Z_dd - Z_qq|/2` and `|Z_dq + Z_qd|/2` are compared against
/// `rel_tol * max(|Zx - jZy|, |Zx + jZy|)`.
pub fn mfd_classify_dq(m: &Mat2, rel_tol: f64) -> Result<(bool, MfdStructure)> {
    check_tol(rel_tol)?;
    let [[dd, dq], [qd, qq]] = m.m;
    let s = MfdStructure {
        zx: (dd + qq) * 0.5,
        zy: (dq - qd) * 0.5,
        residual: ((dd - qq).norm().max((dq + qd).norm())) * 0.5,
    };
    let (zpp, znn) = s.to_pn_diag();
    let scale = zpp.norm().max(znn.norm());
    Ok((s.residual <= rel_tol * scale, s))
}

/// Zx, Zy of an MFD subsystem from a single dq measurement.
pub fn mfd_single_measurement_zdq(vd: C64, vq: C64, id: C64, iq: C64) -> Result<MfdStructure> {
    let den = id * id + iq * iq;
    let scale = id.norm_sqr() + iq.norm_sqr();
    if scale == 0.0 || den.norm() <= 1e-12 * scale {
        return Err(Error::DegenerateExcitation);
    }
    let zx = (vd * id + vq * iq) / den;
    let zy = (vd * iq - vq * id) / den;
    // What the structure fails to explain of this one measurement.
    let resid_d = vd - (zx * id + zy * iq);
    let resid_q = vq - (-zy * id + zx * iq);
    Ok(MfdStructure {
        zx,
        zy,
        residual: resid_d.norm().max(resid_q.norm()),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Injection {
    Shunt,
    Series,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sequence {
    Positive,
    Negative,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Source,
    Load,
}

/// One original (single-sequence) impedance. Its value depends on the
/// injection method and on the opposite subsystem, so both tags are kept.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OriginalSequenceEntry {
    pub value: C64,
    /// Hz; `f_p` for positive sequence, signed `f_n` for negative.
    pub frequency: f64,
    pub sequence: Sequence,
    pub injection: Injection,
    pub side: Side,
}

/// Positive and negative original impedances of one subsystem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OriginalSequencePair {
    pub zp: C64,
    pub zn: C64,
    pub f_p: f64,
    pub f_n: f64,
    pub injection: Injection,
    pub side: Side,
}

/// Original sequence impedance seen by `own` with `other` as the opposite
/// subsystem. The source formulas are the load formulas with the roles of
/// the two subsystems exchanged, so one kernel serves both sides.
fn original_kernel(own: &Mat2, other: &Mat2, injection: Injection, seq: Sequence) -> (C64, C64) {
    let [[opp, opn], [onp, onn]] = own.m;
    let [[xpp, xpn], [xnp, xnn]] = other.m;
    let d_own = own.det();
    let d_other = other.det();
    match (injection, seq) {
        (Injection::Shunt, Sequence::Positive) => (
            opp * d_other + xpp * d_own,
            d_other + onn * xpp - opn * xnp,
        ),
        (Injection::Shunt, Sequence::Negative) => (
            onn * d_other + xnn * d_own,
            d_other + opp * xnn - onp * xpn,
        ),
        (Injection::Series, Sequence::Positive) => (opp * xnn - opn * xnp + d_own, xnn + onn),
        (Injection::Series, Sequence::Negative) => (onn * xpp - onp * xpn + d_own, xpp + opp),
    }
}

fn checked_ratio(num: C64, den: C64, scale: f64, f_dq: f64) -> Result<C64> {
    if den.norm() <= 1e-14 * scale.max(f64::MIN_POSITIVE) || den == ZERO {
        return Err(Error::Degenerate { f_dq });
    }
    let v = num / den;
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(Error::Degenerate { f_dq })
    }
}

/// Original positive or negative sequence impedances of the load and the
/// source, computed from both modified sequence matrices.
///
/// Returns `(load, source)`.
pub fn original_from_modified(
    source: &ImpedancePn,
    load: &ImpedancePn,
    injection: Injection,
    sequence: Sequence,
) -> Result<(OriginalSequenceEntry, OriginalSequenceEntry)> {
    if source.f_dq != load.f_dq {
        return Err(Error::arg("source and load matrices are at different frequencies"));
    }
    let f_dq = source.f_dq;
    let scale = source.m.frobenius().max(load.m.frobenius()).powi(2);
    let (nl, dl) = original_kernel(&load.m, &source.m, injection, sequence);
    let (ns, ds) = original_kernel(&source.m, &load.m, injection, sequence);
    let zl = checked_ratio(nl, dl, scale, f_dq)?;
    let zs = checked_ratio(ns, ds, scale, f_dq)?;
    let frequency = match sequence {
        Sequence::Positive => load.f_p,
        Sequence::Negative => load.f_n,
    };
    let entry = |value, side| OriginalSequenceEntry {
        value,
        frequency,
        sequence,
        injection,
        side,
    };
    Ok((entry(zl, Side::Load), entry(zs, Side::Source)))
}

/// Both sequences for both subsystems under one injection method.
pub fn original_pairs(
    source: &ImpedancePn,
    load: &ImpedancePn,
    injection: Injection,
) -> Result<(OriginalSequencePair, OriginalSequencePair)> {
    let (lp, sp) = original_from_modified(source, load, injection, Sequence::Positive)?;
    let (ln, sn) = original_from_modified(source, load, injection, Sequence::Negative)?;
    let pair = |p: OriginalSequenceEntry, n: OriginalSequenceEntry, side| OriginalSequencePair {
        zp: p.value,
        zn: n.value,
        f_p: load.f_p,
        f_n: load.f_n,
        injection,
        side,
    };
    Ok((pair(lp, ln, Side::Load), pair(sp, sn, Side::Source)))
}

/// Determinants of a dq matrix and of its sequence-domain counterpart.
pub fn determinant_pair(zdq: &ImpedanceDq, zpn: &ImpedancePn) -> Result<(C64, C64)> {
    if zdq.f_dq != zpn.f_dq {
        return Err(Error::arg("matrices are at different frequencies"));
    }
    Ok((zdq.m.det(), zpn.m.det()))
}

/// Exact matrices of a series R-L branch (per unit, `x = w1 L`) at `f_dq`.
/// Returns `(Z_dq, Z_pn)`.
pub fn series_rl_exact(r: f64, x: f64, f_dq: f64, f1: f64) -> (Mat2, Mat2) {
    let wl = |f: f64| C64::new(r, x * f / f1);
    let zdq = Mat2::new(wl(f_dq), C64::new(-x, 0.0), C64::new(x, 0.0), wl(f_dq));
    let zpn = Mat2::diag(wl(f_dq + f1), wl(f_dq - f1));
    (zdq, zpn)
}

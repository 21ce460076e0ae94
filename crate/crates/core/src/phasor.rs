//! Three-phase and dq signal handling and harmonic phasor algebra.
//!
//! Conventions:
//! - Park transform with the `sqrt(2/3)` scaling; `d + jq = sqrt(2/3) (v_a + a v_b + a^2 v_c) e^{-j theta}`.
//! - Phasors are cosine referenced: `v(t) = |V| cos(w t + arg V)`.
//! - Symmetric components without a `1/3` prefactor, so a balanced positive
//!   set of unit phasors gives `V_p = 3`. [`phase_referred`] divides by 3.
//! - A phasor at a negative frequency is the conjugate of the phasor at the
//!   mirrored positive frequency (real-signal symmetry).

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::cmat::{C64, J, ZERO};
use crate::error::{Error, Result};

const SQRT_2_3: f64 = 0.816_496_580_927_726;
const SQRT_3_2: f64 = 1.224_744_871_391_589;
const SQRT_6: f64 = 2.449_489_742_783_178;

/// `a = e^{j 2 pi / 3}`.
pub fn a_op() -> C64 {
    C64::from_polar(1.0, TAU / 3.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThreePhaseSeries {
    pub sample_rate: f64,
    pub t0: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl ThreePhaseSeries {
    pub fn new(sample_rate: f64, t0: f64, a: Vec<f64>, b: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        if !(sample_rate > 0.0) {
            return Err(Error::arg("sample_rate must be positive"));
        }
        if a.is_empty() || a.len() != b.len() || a.len() != c.len() {
            return Err(Error::arg("three-phase channels must be non-empty and of equal length"));
        }
        Ok(ThreePhaseSeries { sample_rate, t0, a, b, c })
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 / self.sample_rate
    }

    pub fn channels(&self) -> [&[f64]; 3] {
        [&self.a, &self.b, &self.c]
    }
}

/// Where the transformation angle came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ThetaRef {
    FixedRamp { f1: f64, theta0: f64 },
    Recorded(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DqSeries {
    pub sample_rate: f64,
    pub t0: f64,
    pub d: Vec<f64>,
    pub q: Vec<f64>,
    pub theta_ref: ThetaRef,
}

impl DqSeries {
    pub fn new(sample_rate: f64, t0: f64, d: Vec<f64>, q: Vec<f64>, theta_ref: ThetaRef) -> Result<Self> {
        if !(sample_rate > 0.0) {
            return Err(Error::arg("sample_rate must be positive"));
        }
        if d.len() != q.len() {
            return Err(Error::arg("d and q channels differ in length"));
        }
        Ok(DqSeries { sample_rate, t0, d, q, theta_ref })
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Frame {
    AbcPhaseA,
    AbcPhaseB,
    AbcPhaseC,
    DqD,
    DqQ,
    SeqPositive,
    SeqNegative,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicPhasor {
    pub value: C64,
    /// Hz; negative values are allowed before folding.
    pub frequency: f64,
    pub frame: Frame,
}

impl HarmonicPhasor {
    pub fn new(value: C64, frequency: f64, frame: Frame) -> Self {
        HarmonicPhasor { value, frequency, frame }
    }

    pub fn amplitude(&self) -> f64 {
        self.value.norm()
    }

    /// Phase angle in degrees, in (-180, 180].
    pub fn phase_deg(&self) -> f64 {
        wrap_deg(self.value.arg().to_degrees())
    }
}

/// Wraps an angle in degrees into (-180, 180].
pub fn wrap_deg(mut deg: f64) -> f64 {
    deg %= 360.0;
    if deg <= -180.0 {
        deg += 360.0;
    } else if deg > 180.0 {
        deg -= 360.0;
    }
    deg
}

/// Angles of a fixed ramp `theta = 2 pi f1 t + theta0` at the sample times.
pub fn ramp_angles(f1: f64, theta0: f64, sample_rate: f64, t0: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let t = t0 + k as f64 / sample_rate;
            TAU * frac(f1 * t) + theta0
        })
        .collect()
}

fn frac(x: f64) -> f64 {
    x - x.floor()
}

/// Park transform of one sample.
pub fn park(a: f64, b: f64, c: f64, theta: f64) -> (f64, f64) {
    let sh = TAU / 3.0;
    let d = SQRT_2_3 * (a * theta.cos() + b * (theta - sh).cos() + c * (theta + sh).cos());
    let q = -SQRT_2_3 * (a * theta.sin() + b * (theta - sh).sin() + c * (theta + sh).sin());
    (d, q)
}

/// Inverse Park transform of one sample (zero-sequence free).
pub fn inverse_park(d: f64, q: f64, theta: f64) -> (f64, f64, f64) {
    let sh = TAU / 3.0;
    let ph = |off: f64| SQRT_2_3 * (d * (theta + off).cos() - q * (theta + off).sin());
    (ph(0.0), ph(-sh), ph(sh))
}

pub fn park_transform(abc: &ThreePhaseSeries, theta: &[f64]) -> Result<DqSeries> {
    if theta.len() != abc.len() {
        return Err(Error::arg(format!(
            "angle samples ({}) do not match series length ({})",
            theta.len(),
            abc.len()
        )));
    }
    let (d, q) = (0..abc.len())
        .map(|k| park(abc.a[k], abc.b[k], abc.c[k], theta[k]))
        .unzip();
    DqSeries::new(abc.sample_rate, abc.t0, d, q, ThetaRef::Recorded(theta.to_vec()))
}

pub fn inverse_park_series(dq: &DqSeries, theta: &[f64]) -> Result<ThreePhaseSeries> {
    if theta.len() != dq.len() {
        return Err(Error::arg(format!(
            "angle samples ({}) do not match series length ({})",
            theta.len(),
            dq.len()
        )));
    }
    let mut a = Vec::with_capacity(dq.len());
    let mut b = Vec::with_capacity(dq.len());
    let mut c = Vec::with_capacity(dq.len());
    for k in 0..dq.len() {
        let (x, y, z) = inverse_park(dq.d[k], dq.q[k], theta[k]);
        a.push(x);
        b.push(y);
        c.push(z);
    }
    ThreePhaseSeries::new(dq.sample_rate, dq.t0, a, b, c)
}

fn same_frequency(fs: &[f64]) -> bool {
    fs.windows(2).all(|w| (w[0] - w[1]).abs() <= 1e-12 * w[0].abs().max(1.0))
}

/// Positive and negative sequence phasors of three phase phasors.
pub fn symmetric_components(
    pa: &HarmonicPhasor,
    pb: &HarmonicPhasor,
    pc: &HarmonicPhasor,
) -> Result<(HarmonicPhasor, HarmonicPhasor)> {
    if !same_frequency(&[pa.frequency, pb.frequency, pc.frequency]) {
        return Err(Error::arg("phase phasors must share one frequency"));
    }
    let a = a_op();
    let a2 = a * a;
    let vp = pa.value + a * pb.value + a2 * pc.value;
    let vn = pa.value + a2 * pb.value + a * pc.value;
    Ok((
        HarmonicPhasor::new(vp, pa.frequency, Frame::SeqPositive),
        HarmonicPhasor::new(vn, pa.frequency, Frame::SeqNegative),
    ))
}

/// Scales a symmetric-component phasor to the phase quantity it represents
/// (divides by 3). For balanced sets this equals the phase-A phasor.
pub fn phase_referred(p: HarmonicPhasor) -> HarmonicPhasor {
    HarmonicPhasor::new(p.value / 3.0, p.frequency, p.frame)
}

/// dq phasors at `f_dq` to the positive sequence phasor at `f_dq + f1` and
/// the negative sequence phasor at `f_dq - f1` (signed).
pub fn dq_phasor_to_sequence(
    vd: &HarmonicPhasor,
    vq: &HarmonicPhasor,
    f1: f64,
) -> Result<(HarmonicPhasor, HarmonicPhasor)> {
    if !same_frequency(&[vd.frequency, vq.frequency]) {
        return Err(Error::arg("d and q phasors must share one frequency"));
    }
    if vd.frequency < 0.0 {
        return Err(Error::arg("dq frequency must be non-negative"));
    }
    let f = vd.frequency;
    let vp = (vd.value + J * vq.value) / SQRT_6;
    let vn = (vd.value - J * vq.value) / SQRT_6;
    Ok((
        HarmonicPhasor::new(vp, f + f1, Frame::SeqPositive),
        HarmonicPhasor::new(vn, f - f1, Frame::SeqNegative),
    ))
}

/// A sequence phasor to its dq phasor pair. The sequence is taken from the
/// frame tag; negative sequence phasors carry their signed frequency.
pub fn sequence_to_dq_phasor(v: &HarmonicPhasor, f1: f64) -> Result<(HarmonicPhasor, HarmonicPhasor)> {
    let (d, q, f) = match v.frame {
        Frame::SeqPositive => {
            if v.frequency <= 0.0 {
                return Err(Error::arg("positive sequence phasor needs a positive frequency"));
            }
            (SQRT_3_2 * v.value, -J * SQRT_3_2 * v.value, v.frequency - f1)
        }
        Frame::SeqNegative => (SQRT_3_2 * v.value, J * SQRT_3_2 * v.value, v.frequency + f1),
        other => return Err(Error::arg(format!("{other:?} is not a sequence frame"))),
    };
    Ok((
        HarmonicPhasor::new(d, f, Frame::DqD),
        HarmonicPhasor::new(q, f, Frame::DqQ),
    ))
}

/// Analysis window `[t_start, t_end)` in seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub t_start: f64,
    pub t_end: f64,
}

impl Window {
    pub fn new(t_start: f64, t_end: f64) -> Self {
        Window { t_start, t_end }
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}

fn near_integer(x: f64) -> bool {
    (x - x.round()).abs() < 1e-6
}

/// Checks that the window holds an integer number of periods of `f`.
pub fn check_commensurate(f: f64, window: &Window) -> Result<()> {
    let t = window.duration();
    if !(t > 0.0) || !f.is_finite() || !near_integer(f * t) {
        return Err(Error::NonCommensurate { freq: f, window: t });
    }
    Ok(())
}

/// Sample index range covered by `window`.
fn window_range(len: usize, sample_rate: f64, t0: f64, window: &Window) -> Result<(usize, usize)> {
    let n = window.duration() * sample_rate;
    let k0 = (window.t_start - t0) * sample_rate;
    if !near_integer(n) || !near_integer(k0) || k0.round() < 0.0 {
        return Err(Error::arg("window edges do not fall on samples"));
    }
    let (k0, n) = (k0.round() as usize, n.round() as usize);
    if n == 0 || k0 + n > len {
        return Err(Error::arg("window lies outside the series"));
    }
    Ok((k0, n))
}

/// `(2/N) sum x_k e^{-j 2 pi f t_k}` over the window, for any signed `f`.
///
/// At 0 Hz this is twice the mean, which keeps the sequence and dq phasor
/// relations exact when a mirrored frequency lands on DC.
pub fn project(
    series: &[f64],
    sample_rate: f64,
    t0: f64,
    f: f64,
    window: &Window,
) -> Result<C64> {
    check_commensurate(f, window)?;
    let (k0, n) = window_range(series.len(), sample_rate, t0, window)?;
    let mut acc = ZERO;
    for (k, &x) in series[k0..k0 + n].iter().enumerate() {
        let t = t0 + (k0 + k) as f64 / sample_rate;
        let ang = -TAU * frac(f * t);
        acc += C64::new(x * ang.cos(), x * ang.sin());
    }
    Ok(acc * (2.0 / n as f64))
}

/// Single-bin harmonic phasor of a real series at `f` over a commensurate
/// rectangular window. At 0 Hz the result is the window mean.
pub fn extract_phasor(
    series: &[f64],
    sample_rate: f64,
    t0: f64,
    f: f64,
    window: &Window,
    frame: Frame,
) -> Result<HarmonicPhasor> {
    let mut v = project(series, sample_rate, t0, f, window)?;
    if f == 0.0 {
        v *= 0.5;
    }
    Ok(HarmonicPhasor::new(v, f, frame))
}

/// Phase-referred sequence phasor of a three-phase series at signed `f`.
pub fn extract_sequence_phasor(
    abc: &ThreePhaseSeries,
    f: f64,
    frame: Frame,
    window: &Window,
) -> Result<HarmonicPhasor> {
    let p = |x: &[f64]| project(x, abc.sample_rate, abc.t0, f, window);
    let (va, vb, vc) = (p(&abc.a)?, p(&abc.b)?, p(&abc.c)?);
    let a = a_op();
    let a2 = a * a;
    let v = match frame {
        Frame::SeqPositive => va + a * vb + a2 * vc,
        Frame::SeqNegative => va + a2 * vb + a * vc,
        other => return Err(Error::arg(format!("{other:?} is not a sequence frame"))),
    };
    Ok(HarmonicPhasor::new(v / 3.0, f, frame))
}

/// d and q phasors of a dq series at `f`.
pub fn extract_dq_phasors(
    dq: &DqSeries,
    f: f64,
    window: &Window,
) -> Result<(HarmonicPhasor, HarmonicPhasor)> {
    Ok((
        HarmonicPhasor::new(project(&dq.d, dq.sample_rate, dq.t0, f, window)?, f, Frame::DqD),
        HarmonicPhasor::new(project(&dq.q, dq.sample_rate, dq.t0, f, window)?, f, Frame::DqQ),
    ))
}

/// Balanced three-phase cosine set with phase-A phasor `v` at `f`;
/// positive order when `positive`, reversed otherwise.
pub fn balanced_set(v: C64, f: f64, positive: bool, sample_rate: f64, t0: f64, n: usize) -> ThreePhaseSeries {
    let shift = if positive { -TAU / 3.0 } else { TAU / 3.0 };
    let ph = |off: f64| -> Vec<f64> {
        (0..n)
            .map(|k| {
                let t = t0 + k as f64 / sample_rate;
                v.norm() * (TAU * frac(f * t) + v.arg() + off).cos()
            })
            .collect()
    };
    ThreePhaseSeries {
        sample_rate,
        t0,
        a: ph(0.0),
        b: ph(shift),
        c: ph(-shift),
    }
}

pub fn deg(x: f64) -> f64 {
    x * PI / 180.0
}

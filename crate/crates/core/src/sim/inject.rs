//! Three-phase perturbation sources.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::cmat::{C64, J};
use crate::error::{Error, Result};
use crate::impedance::{Injection, Sequence};
use crate::phasor::{park, sequence_to_dq_phasor, Frame, HarmonicPhasor, ThreePhaseSeries};

/// Which tone set a run injects.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InjectionRun {
    /// Run 1: positive sequence at `f_inj + f1`.
    Positive,
    /// Run 2: negative sequence at `f_inj - f1`.
    Negative,
    /// Both sets at once; used for single-measurement extraction.
    Combined,
}

impl InjectionRun {
    pub fn run_index(&self) -> Option<u8> {
        match self {
            InjectionRun::Positive => Some(1),
            InjectionRun::Negative => Some(2),
            InjectionRun::Combined => None,
        }
    }

    pub fn sequence(&self) -> Option<Sequence> {
        match self {
            InjectionRun::Positive => Some(Sequence::Positive),
            InjectionRun::Negative => Some(Sequence::Negative),
            InjectionRun::Combined => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectionSpec {
    pub kind: Injection,
    pub run: InjectionRun,
    /// dq frequency of the probe, Hz.
    pub f_inj: f64,
    /// Peak per phase, pu.
    pub amplitude: f64,
}

impl InjectionSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::invalid("amplitude", "must be positive"));
        }
        if self.f_inj == 0.0 || (self.f_inj - self.f_inj.round()).abs() > 1e-9 {
            return Err(Error::invalid("f_inj", "must be a non-zero integer number of Hz"));
        }
        Ok(())
    }

    /// Phase values at time `t` for fundamental `f1`.
    pub fn abc_at(&self, f1: f64, t: f64) -> [f64; 3] {
        let a = self.amplitude;
        let mut out = [0.0; 3];
        let ph = TAU / 3.0;
        if matches!(self.run, InjectionRun::Positive | InjectionRun::Combined) {
            let w = TAU * frac((self.f_inj + f1) * t);
            for (k, o) in out.iter_mut().enumerate() {
                *o += a * (w - k as f64 * ph).sin();
            }
        }
        if matches!(self.run, InjectionRun::Negative | InjectionRun::Combined) {
            let w = TAU * frac((self.f_inj - f1) * t);
            for (k, o) in out.iter_mut().enumerate() {
                *o += a * (w + k as f64 * ph).sin();
            }
        }
        out
    }

    /// The injection in the global dq frame with angle `2 pi f1 t`.
    pub fn dq_at(&self, f1: f64, t: f64) -> [f64; 2] {
        let [a, b, c] = self.abc_at(f1, t);
        let (d, q) = park(a, b, c, TAU * frac(f1 * t));
        [d, q]
    }

    /// Phase-A phasors of the injected tones, sine referenced to cosine.
    pub fn sequence_phasors(&self, f1: f64) -> Vec<HarmonicPhasor> {
        let v = -J * self.amplitude;
        let mut out = Vec::new();
        if matches!(self.run, InjectionRun::Positive | InjectionRun::Combined) {
            out.push(HarmonicPhasor::new(v, self.f_inj + f1, Frame::SeqPositive));
        }
        if matches!(self.run, InjectionRun::Negative | InjectionRun::Combined) {
            out.push(HarmonicPhasor::new(v, self.f_inj - f1, Frame::SeqNegative));
        }
        out
    }

    /// Complex amplitudes `(U_d, U_q)` with `u(t) = Re(U e^{j 2 pi f_inj t})`.
    pub fn dq_phasor(&self, f1: f64) -> Result<[C64; 2]> {
        let mut u = [C64::new(0.0, 0.0); 2];
        for p in self.sequence_phasors(f1) {
            let (d, q) = sequence_to_dq_phasor(&p, f1)?;
            u[0] += d.value;
            u[1] += q.value;
        }
        Ok(u)
    }
}

#[inline]
fn frac(x: f64) -> f64 {
    x - x.floor()
}

/// Samples the injection waveforms at `t_k = t0 + k / sample_rate`.
pub fn inject_signal(
    spec: &InjectionSpec,
    f1: f64,
    sample_rate: f64,
    t0: f64,
    n: usize,
) -> Result<ThreePhaseSeries> {
    spec.validate()?;
    let (mut a, mut b, mut c) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for k in 0..n {
        let [x, y, z] = spec.abc_at(f1, t0 + k as f64 / sample_rate);
        a.push(x);
        b.push(y);
        c.push(z);
    }
    ThreePhaseSeries::new(sample_rate, t0, a, b, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasor::{extract_sequence_phasor, Window};

    fn spec(run: InjectionRun) -> InjectionSpec {
        InjectionSpec {
            kind: Injection::Shunt,
            run,
            f_inj: 80.0,
            amplitude: 0.01,
        }
    }

    #[test]
    fn run1_is_positive_sequence_at_130() {
        let s = inject_signal(&spec(InjectionRun::Positive), 50.0, 10_000.0, 0.0, 10_000).unwrap();
        let w = Window::new(0.0, 1.0);
        let p = extract_sequence_phasor(&s, 130.0, Frame::SeqPositive, &w).unwrap();
        let n = extract_sequence_phasor(&s, 130.0, Frame::SeqNegative, &w).unwrap();
        assert!((p.value - C64::new(0.0, -0.01)).norm() < 1e-12);
        assert!(n.value.norm() < 1e-12);
    }

    #[test]
    fn run2_is_negative_sequence_at_30() {
        let s = inject_signal(&spec(InjectionRun::Negative), 50.0, 10_000.0, 0.0, 10_000).unwrap();
        let w = Window::new(0.0, 1.0);
        let n = extract_sequence_phasor(&s, 30.0, Frame::SeqNegative, &w).unwrap();
        let p = extract_sequence_phasor(&s, 30.0, Frame::SeqPositive, &w).unwrap();
        assert!((n.value - C64::new(0.0, -0.01)).norm() < 1e-12, "{:?}", n.value);
        assert!(p.value.norm() < 1e-12);
    }

    #[test]
    fn peak_equals_amplitude() {
        let s = inject_signal(&spec(InjectionRun::Positive), 50.0, 26_000.0, 0.0, 26_000).unwrap();
        let peak = s.a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!((peak - 0.01).abs() < 1e-9);
    }

    #[test]
    fn dq_phasor_matches_sampled_park() {
        for run in [InjectionRun::Positive, InjectionRun::Negative, InjectionRun::Combined] {
            let sp = spec(run);
            let u = sp.dq_phasor(50.0).unwrap();
            for k in 0..50 {
                let t = k as f64 * 1.3e-3;
                let [d, q] = sp.dq_at(50.0, t);
                let rot = C64::from_polar(1.0, TAU * 80.0 * t);
                assert!((d - (u[0] * rot).re).abs() < 1e-12);
                assert!((q - (u[1] * rot).re).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_zero_frequency_and_amplitude() {
        let mut s = spec(InjectionRun::Positive);
        s.f_inj = 0.0;
        assert!(s.validate().is_err());
        s.f_inj = 10.0;
        s.amplitude = 0.0;
        assert!(s.validate().is_err());
    }
}

//! Fixed-step integration, operating points and linearization.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cmat::C64;
use crate::error::{Error, Result};
use crate::impedance::Injection;
use crate::phasor::{inverse_park_series, ramp_angles, DqSeries, ThetaRef, ThreePhaseSeries};

use super::inject::InjectionSpec;
use super::model::{Input, Plant, Terminals};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub duration: f64,
    pub dt: f64,
    /// First recorded sample time.
    pub record_from: f64,
    /// Record every n-th step.
    pub decimate: usize,
    pub injection: Option<InjectionSpec>,
    pub divergence_limit: f64,
}

impl RunSpec {
    pub fn new(duration: f64, dt: f64) -> Self {
        RunSpec {
            duration,
            dt,
            record_from: 0.0,
            decimate: 1,
            injection: None,
            divergence_limit: 1e3,
        }
    }
}

/// Interface signals of one run. Currents flow into their subsystem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub dt: f64,
    pub f1: f64,
    pub source_v: ThreePhaseSeries,
    pub load_v: ThreePhaseSeries,
    pub source_i: ThreePhaseSeries,
    pub load_i: ThreePhaseSeries,
    pub source_v_dq: DqSeries,
    pub load_v_dq: DqSeries,
    pub source_i_dq: DqSeries,
    pub load_i_dq: DqSeries,
    pub aux: BTreeMap<String, Vec<f64>>,
    pub final_state: Vec<f64>,
}

impl SimRecord {
    pub fn len(&self) -> usize {
        self.source_v_dq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate(&self) -> f64 {
        self.source_v_dq.sample_rate
    }

    pub fn t0(&self) -> f64 {
        self.source_v_dq.t0
    }

    /// Named channels in a fixed order: abc, dq, then auxiliary states.
    pub fn channels(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = Vec::new();
        for (name, s) in [
            ("v_s", &self.source_v),
            ("v_l", &self.load_v),
            ("i_s", &self.source_i),
            ("i_l", &self.load_i),
        ] {
            out.push((format!("{name}_a"), &s.a));
            out.push((format!("{name}_b"), &s.b));
            out.push((format!("{name}_c"), &s.c));
        }
        for (name, s) in [
            ("v_s", &self.source_v_dq),
            ("v_l", &self.load_v_dq),
            ("i_s", &self.source_i_dq),
            ("i_l", &self.load_i_dq),
        ] {
            out.push((format!("{name}_d"), &s.d));
            out.push((format!("{name}_q"), &s.q));
        }
        for (k, v) in &self.aux {
            out.push((k.clone(), v));
        }
        out
    }

    /// Writes one row per sample with a time column and named channels.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let chans = self.channels();
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t_s".to_string()];
        header.extend(chans.iter().map(|(n, _)| n.clone()));
        let io = |e: csv::Error| Error::arg(format!("csv export failed: {e}"));
        wr.write_record(&header).map_err(io)?;
        for k in 0..self.len() {
            let t = self.t0() + k as f64 / self.sample_rate();
            let mut row = vec![crate::sweep::csv_float(t)];
            row.extend(chans.iter().map(|(_, v)| crate::sweep::csv_float(v[k])));
            wr.write_record(&row).map_err(io)?;
        }
        wr.flush()
            .map_err(|e| Error::arg(format!("csv export failed: {e}")))?;
        Ok(())
    }
}

/// Inactive states are held fixed by zeroing their derivative.
fn eval(model: &dyn Plant, x: &[f64], u: &Input, dx: &mut [f64]) {
    model.derivatives(x, u, dx);
    for (d, a) in dx.iter_mut().zip(model.active()) {
        if !a {
            *d = 0.0;
        }
    }
}

fn input_at(spec: Option<&InjectionSpec>, f1: f64, t: f64) -> Input {
    match spec {
        Some(s) => Input {
            kind: s.kind,
            dq: s.dq_at(f1, t),
        },
        None => Input::none(),
    }
}

struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(n: usize) -> Self {
        Rk4 {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    fn step(
        &mut self,
        model: &dyn Plant,
        inj: Option<&InjectionSpec>,
        f1: f64,
        t: f64,
        dt: f64,
        x: &mut [f64],
    ) {
        let u0 = input_at(inj, f1, t);
        let uh = input_at(inj, f1, t + 0.5 * dt);
        let u1 = input_at(inj, f1, t + dt);
        eval(model, x, &u0, &mut self.k1);
        for i in 0..x.len() {
            self.tmp[i] = x[i] + 0.5 * dt * self.k1[i];
        }
        eval(model, &self.tmp, &uh, &mut self.k2);
        for i in 0..x.len() {
            self.tmp[i] = x[i] + 0.5 * dt * self.k2[i];
        }
        eval(model, &self.tmp, &uh, &mut self.k3);
        for i in 0..x.len() {
            self.tmp[i] = x[i] + dt * self.k3[i];
        }
        eval(model, &self.tmp, &u1, &mut self.k4);
        for i in 0..x.len() {
            x[i] += dt / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

fn steps_in(t: f64, dt: f64) -> Result<usize> {
    let n = t / dt;
    if !(n >= 0.0) || (n - n.round()).abs() > 1e-6 {
        return Err(Error::arg(format!("{t} s is not a whole number of {dt} s steps")));
    }
    Ok(n.round() as usize)
}

#[derive(Default)]
struct Channels {
    d: Vec<f64>,
    q: Vec<f64>,
}

impl Channels {
    fn push(&mut self, v: [f64; 2]) {
        self.d.push(v[0]);
        self.q.push(v[1]);
    }
}

/// Integrates `model` from `x0` at `t = 0` with fixed-step RK4 and records
/// the interface signals from `spec.record_from` on. The fundamental angle
/// is `2 pi f1 t`.
pub fn run_time_domain(model: &dyn Plant, x0: &[f64], spec: &RunSpec) -> Result<SimRecord> {
    if x0.len() != model.n_states() {
        return Err(Error::arg("initial state has the wrong dimension"));
    }
    if spec.decimate == 0 {
        return Err(Error::arg("decimate must be at least 1"));
    }
    if let Some(inj) = &spec.injection {
        inj.validate()?;
    }
    let dt = spec.dt;
    let n_total = steps_in(spec.duration, dt)?;
    let k_rec = steps_in(spec.record_from, dt)?;
    if k_rec >= n_total {
        return Err(Error::arg("record_from must precede the end of the run"));
    }
    let f1 = model.f1();
    let inj = spec.injection.as_ref();
    let n_rec = (n_total - k_rec).div_ceil(spec.decimate);
    let mut chans: [Channels; 4] = Default::default();
    for c in chans.iter_mut() {
        c.d.reserve(n_rec);
        c.q.reserve(n_rec);
    }
    let aux_idx = model.aux_states();
    let mut aux: Vec<Vec<f64>> = aux_idx.iter().map(|_| Vec::with_capacity(n_rec)).collect();

    let mut x = x0.to_vec();
    let mut rk = Rk4::new(x.len());
    for k in 0..n_total {
        let t = k as f64 * dt;
        if k >= k_rec && (k - k_rec) % spec.decimate == 0 {
            let Terminals { v_s, v_l, i_s, i_l } = model.terminals(&x, &input_at(inj, f1, t));
            for (c, v) in chans.iter_mut().zip([v_s, v_l, i_s, i_l]) {
                c.push(v);
            }
            for (a, &i) in aux.iter_mut().zip(aux_idx) {
                a.push(x[i]);
            }
        }
        rk.step(model, inj, f1, t, dt, &mut x);
        if x.iter().any(|v| !(v.abs() <= spec.divergence_limit)) {
            return Err(Error::Divergence { t: t + dt });
        }
    }

    let fs = 1.0 / (dt * spec.decimate as f64);
    let t0 = k_rec as f64 * dt;
    let theta = ramp_angles(f1, 0.0, fs, t0, n_rec);
    let mut dq = Vec::with_capacity(4);
    for c in chans {
        dq.push(DqSeries::new(fs, t0, c.d, c.q, ThetaRef::FixedRamp { f1, theta0: 0.0 })?);
    }
    let abc: Vec<ThreePhaseSeries> = dq
        .iter()
        .map(|s| inverse_park_series(s, &theta))
        .collect::<Result<_>>()?;
    let mut abc = abc.into_iter();
    let mut dq = dq.into_iter();
    let names = model.state_names();
    Ok(SimRecord {
        dt: 1.0 / fs,
        f1,
        source_v: abc.next().unwrap(),
        load_v: abc.next().unwrap(),
        source_i: abc.next().unwrap(),
        load_i: abc.next().unwrap(),
        source_v_dq: dq.next().unwrap(),
        load_v_dq: dq.next().unwrap(),
        source_i_dq: dq.next().unwrap(),
        load_i_dq: dq.next().unwrap(),
        aux: aux_idx
            .iter()
            .zip(aux)
            .map(|(&i, v)| (names[i].to_string(), v))
            .collect(),
        final_state: x,
    })
}

fn active_indices(model: &dyn Plant) -> Vec<usize> {
    model
        .active()
        .iter()
        .enumerate()
        .filter(|(_, a)| **a)
        .map(|(i, _)| i)
        .collect()
}

fn fd_step(x: f64) -> f64 {
    1e-7 * (1.0 + x.abs())
}

/// Central-difference Jacobian of the active states.
pub fn jacobian(model: &dyn Plant, x: &[f64], u: &Input) -> DMatrix<f64> {
    let act = active_indices(model);
    let n = model.n_states();
    let mut jac = DMatrix::zeros(act.len(), act.len());
    let (mut fp, mut fm) = (vec![0.0; n], vec![0.0; n]);
    let mut xp = x.to_vec();
    for (col, &j) in act.iter().enumerate() {
        let h = fd_step(x[j]);
        xp[j] = x[j] + h;
        model.derivatives(&xp, u, &mut fp);
        xp[j] = x[j] - h;
        model.derivatives(&xp, u, &mut fm);
        xp[j] = x[j];
        for (row, &i) in act.iter().enumerate() {
            jac[(row, col)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}

/// Input matrix of the active states for an injection kind.
pub fn input_matrix(model: &dyn Plant, x: &[f64], kind: Injection) -> DMatrix<f64> {
    let act = active_indices(model);
    let n = model.n_states();
    let mut b = DMatrix::zeros(act.len(), 2);
    let (mut fp, mut fm) = (vec![0.0; n], vec![0.0; n]);
    let h = 1e-7;
    for col in 0..2 {
        let mut dq = [0.0; 2];
        dq[col] = h;
        model.derivatives(x, &Input { kind, dq }, &mut fp);
        dq[col] = -h;
        model.derivatives(x, &Input { kind, dq }, &mut fm);
        for (row, &i) in act.iter().enumerate() {
            b[(row, col)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    b
}

fn residual(model: &dyn Plant, x: &[f64], act: &[usize]) -> (DVector<f64>, f64) {
    let mut dx = vec![0.0; x.len()];
    model.derivatives(x, &Input::none(), &mut dx);
    let r = DVector::from_iterator(act.len(), act.iter().map(|&i| dx[i]));
    let norm = r.amax();
    (r, norm)
}

/// Newton iteration for the unperturbed equilibrium, starting from the
/// model's initial guess.
pub fn find_equilibrium(model: &dyn Plant) -> Result<Vec<f64>> {
    find_equilibrium_from(model, &model.initial_guess())
}

pub fn find_equilibrium_from(model: &dyn Plant, guess: &[f64]) -> Result<Vec<f64>> {
    let act = active_indices(model);
    let mut x = guess.to_vec();
    let (mut r, mut norm) = residual(model, &x, &act);
    for _ in 0..60 {
        if norm < 1e-11 {
            return Ok(x);
        }
        let jac = jacobian(model, &x, &Input::none());
        let step = jac
            .lu()
            .solve(&(-&r))
            .ok_or(Error::NoEquilibrium { residual: norm })?;
        // Halve the step until the residual drops.
        let mut lambda = 1.0;
        loop {
            let mut trial = x.clone();
            for (k, &i) in act.iter().enumerate() {
                trial[i] += lambda * step[k];
            }
            let (rt, nt) = residual(model, &trial, &act);
            if nt < norm || lambda < 1e-4 {
                x = trial;
                r = rt;
                norm = nt;
                break;
            }
            lambda *= 0.5;
        }
    }
    if norm < 1e-9 {
        Ok(x)
    } else {
        Err(Error::NoEquilibrium { residual: norm })
    }
}

/// Eigenvalues of a real matrix.
pub fn complex_eigenvalues(a: &DMatrix<f64>) -> Vec<C64> {
    a.complex_eigenvalues()
        .iter()
        .map(|z| C64::new(z.re, z.im))
        .collect()
}

/// Equilibrium with its linearization.
#[derive(Clone, Debug)]
pub struct OperatingPoint {
    pub x: Vec<f64>,
    pub a: DMatrix<f64>,
    pub b_shunt: DMatrix<f64>,
    pub b_series: DMatrix<f64>,
    pub eigenvalues: Vec<C64>,
    active: Vec<usize>,
}

impl OperatingPoint {
    pub fn new(model: &dyn Plant) -> Result<Self> {
        let x = find_equilibrium(model)?;
        let a = jacobian(model, &x, &Input::none());
        let eigenvalues = complex_eigenvalues(&a);
        Ok(OperatingPoint {
            b_shunt: input_matrix(model, &x, Injection::Shunt),
            b_series: input_matrix(model, &x, Injection::Series),
            a,
            eigenvalues,
            active: active_indices(model),
            x,
        })
    }

    /// Largest real part among the eigenvalues.
    pub fn spectral_abscissa(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Least damped oscillatory eigenvalue (imaginary part above 1 rad/s).
    pub fn dominant_oscillatory_mode(&self) -> Option<C64> {
        self.eigenvalues
            .iter()
            .filter(|z| z.im > 1.0)
            .copied()
            .max_by(|a, b| a.re.total_cmp(&b.re))
    }

    /// Initial state on the linearized periodic orbit of the injection, so
    /// that the nonlinear run starts close to its steady state.
    pub fn periodic_start(&self, spec: &InjectionSpec, f1: f64) -> Result<Vec<f64>> {
        let u = spec.dq_phasor(f1)?;
        let b = match spec.kind {
            Injection::Shunt => &self.b_shunt,
            Injection::Series => &self.b_series,
        };
        let n = self.a.nrows();
        let jw = nalgebra::Complex::new(0.0, TAU * spec.f_inj);
        let m = DMatrix::from_fn(n, n, |i, j| {
            let d = if i == j { jw } else { nalgebra::Complex::new(0.0, 0.0) };
            d - nalgebra::Complex::new(self.a[(i, j)], 0.0)
        });
        let rhs = DVector::from_fn(n, |i, _| {
            nalgebra::Complex::new(b[(i, 0)], 0.0) * nalgebra::Complex::new(u[0].re, u[0].im)
                + nalgebra::Complex::new(b[(i, 1)], 0.0) * nalgebra::Complex::new(u[1].re, u[1].im)
        });
        let sol = m.lu().solve(&rhs).ok_or(Error::Singular { cond: f64::INFINITY })?;
        let mut x = self.x.clone();
        for (k, &i) in self.active.iter().enumerate() {
            x[i] += sol[k].re;
        }
        Ok(x)
    }
}

/// Runs the unperturbed model from `x0` for `settle` seconds and returns the
/// largest sample-wise difference between the last two fundamental periods
/// over all recorded channels. Fails with `NotSteady` above `tol`.
pub fn steady_state_gate(
    model: &dyn Plant,
    x0: &[f64],
    settle: f64,
    dt: f64,
    tol: f64,
) -> Result<f64> {
    let f1 = model.f1();
    let period = steps_in(1.0 / f1, dt)
        .map_err(|_| Error::arg("the fundamental period must be a whole number of steps"))?;
    let mut spec = RunSpec::new(settle, dt);
    spec.record_from = settle - 2.0 * period as f64 * dt;
    if spec.record_from < 0.0 {
        return Err(Error::arg("settling time shorter than two fundamental periods"));
    }
    let rec = run_time_domain(model, x0, &spec)?;
    let mut mismatch: f64 = 0.0;
    for (_, ch) in rec.channels() {
        for k in 0..period {
            mismatch = mismatch.max((ch[k] - ch[k + period]).abs());
        }
    }
    if mismatch > tol {
        Err(Error::NotSteady { mismatch })
    } else {
        Ok(mismatch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::{case_a1, case_b};
    use crate::sim::model::{passive_oracle_model, ConverterModel};

    #[test]
    fn oracle_equilibrium_matches_phasor_solution() {
        let m = passive_oracle_model(0.02, 0.25).unwrap();
        let x = find_equilibrium(&m).unwrap();
        // (1 + j0) / (r_load + R + jX) in the dq frame.
        let i = C64::new(1.0, 0.0) / C64::new(1.02, 0.25);
        assert!((x[0] - i.re).abs() < 1e-10 && (x[1] - i.im).abs() < 1e-10);
    }

    #[test]
    fn case_b_equilibrium_tracks_references() {
        let m = ConverterModel::new(case_b()).unwrap();
        let x = find_equilibrium(&m).unwrap();
        use crate::sim::model::idx;
        assert!((x[idx::IL_D] - 1.1).abs() < 1e-9);
        assert!((x[idx::IL_Q] - 0.4).abs() < 1e-9);
    }

    #[test]
    fn case_b_unperturbed_run_is_flat() {
        let m = ConverterModel::new(case_b()).unwrap();
        let op = OperatingPoint::new(&m).unwrap();
        assert!(op.spectral_abscissa() < 0.0);
        let mut spec = RunSpec::new(0.1, 20e-6);
        spec.record_from = 0.05;
        let rec = run_time_domain(&m, &op.x, &spec).unwrap();
        for ch in [&rec.source_i_dq.d, &rec.source_i_dq.q, &rec.load_i_dq.d] {
            let (lo, hi) = ch.iter().fold((f64::MAX, f64::MIN), |(l, h), v| (l.min(*v), h.max(*v)));
            assert!(hi - lo < 1e-6);
        }
        let gate = steady_state_gate(&m, &op.x, 0.1, 20e-6, 1e-5).unwrap();
        assert!(gate < 1e-9);
    }

    #[test]
    fn a1_linear_mode_is_stable_but_lightly_damped() {
        let m = ConverterModel::new(case_a1()).unwrap();
        let op = OperatingPoint::new(&m).unwrap();
        let mode = op.dominant_oscillatory_mode().unwrap();
        assert!(mode.re < 0.0, "{mode}");
        let hot = OperatingPoint::new(&m.with_i_dc(1.2)).unwrap();
        assert!(hot.spectral_abscissa() > 0.0);
    }

    #[test]
    fn runs_are_deterministic() {
        let m = passive_oracle_model(0.02, 0.25).unwrap();
        let mut spec = RunSpec::new(0.02, 20e-6);
        spec.injection = Some(InjectionSpec {
            kind: Injection::Shunt,
            run: crate::sim::inject::InjectionRun::Positive,
            f_inj: 30.0,
            amplitude: 0.02,
        });
        let a = run_time_domain(&m, &[0.0, 0.0], &spec).unwrap();
        let b = run_time_domain(&m, &[0.0, 0.0], &spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn divergence_is_reported_with_time() {
        let m = passive_oracle_model(0.02, 0.25).unwrap();
        let mut spec = RunSpec::new(0.01, 20e-6);
        spec.divergence_limit = 0.5;
        match run_time_domain(&m, &[0.9, 0.0], &spec) {
            Err(Error::Divergence { t }) => assert!(t > 0.0 && t <= 0.01),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_export_has_named_columns() {
        let m = passive_oracle_model(0.02, 0.25).unwrap();
        let rec = run_time_domain(&m, &[0.0, 0.0], &RunSpec::new(0.001, 1e-4)).unwrap();
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        assert!(header.starts_with("t_s,v_s_a,v_s_b,v_s_c"));
        assert_eq!(text.lines().count(), 11);
    }
}

//! Frequency sweeps: paired injection runs, phasor extraction, impedance
//! solves in both domains, folding and derived comparisons.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cmat::{Mat2, C64};
use crate::error::{Error, Result};
use crate::impedance::{
    mfd_single_measurement_zdq, original_pairs, ImpedanceDq, ImpedancePn, Injection, MfdStructure,
    OriginalSequencePair, Side,
};
use crate::phasor::{extract_dq_phasors, extract_sequence_phasor, Frame, Window};
use crate::sim::config::{Case, SCHEMA_VERSION};
use crate::sim::inject::{InjectionRun, InjectionSpec};
use crate::sim::integrate::{run_time_domain, steady_state_gate, OperatingPoint, RunSpec, SimRecord};
use crate::sim::model::{build_model, Plant};
use crate::stability::{minor_loop_from_impedances, Domain, MinorLoopPoint};

/// Hand-picked integer grid from 2 Hz to 1 kHz.
pub const DEFAULT_GRID: [f64; 40] = [
    2.0, 4.0, 6.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0, 55.0, 60.0, 65.0, 70.0,
    75.0, 80.0, 90.0, 110.0, 120.0, 140.0, 160.0, 180.0, 200.0, 250.0, 300.0, 350.0, 400.0, 450.0,
    500.0, 550.0, 600.0, 650.0, 700.0, 750.0, 800.0, 850.0, 900.0, 1000.0,
];

const CSV_ENTRIES: [&str; 8] = ["zdd", "zdq", "zqd", "zqq", "zpp", "zpn", "znp", "znn"];

/// Float formatting for CSV exports: 12 significant digits.
pub fn csv_float(x: f64) -> String {
    format!("{x:.11e}")
}

/// Measurement matrices above this condition number are not solved.
pub const MAX_CONDITION: f64 = 1e6;

/// A point whose runs diverge is retried at the amplitude scaled by
/// `AMPLITUDE_BACKOFF^k`, `k = 1..=AMPLITUDE_RETRIES`.
pub const AMPLITUDE_RETRIES: u32 = 2;
pub const AMPLITUDE_BACKOFF: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sides {
    Source,
    Load,
    Both,
}

impl Sides {
    fn includes(&self, side: Side) -> bool {
        matches!(
            (self, side),
            (Sides::Both, _) | (Sides::Source, Side::Source) | (Sides::Load, Side::Load)
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub f_dq_list: Vec<f64>,
    pub injection: Injection,
    pub case: Case,
    pub sides: Sides,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcludedPoint {
    pub f_dq: f64,
    pub reason: String,
}

impl SweepPlan {
    pub fn new(case: Case, injection: Injection) -> Self {
        SweepPlan {
            f_dq_list: DEFAULT_GRID.to_vec(),
            injection,
            case,
            sides: Sides::Both,
        }
    }

    /// Checks the grid and splits off points that cannot be measured.
    pub fn validate(&self) -> Result<(Vec<f64>, Vec<ExcludedPoint>)> {
        self.case.validate()?;
        let f1 = self.case.model.f1();
        if self.f_dq_list.is_empty() {
            return Err(Error::invalid("f_dq_list", "empty grid"));
        }
        for w in self.f_dq_list.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::invalid("f_dq_list", "must be strictly ascending"));
            }
        }
        let mut keep = Vec::new();
        let mut excluded = Vec::new();
        for &f in &self.f_dq_list {
            if !(f >= 1.0) || (f - f.round()).abs() > 1e-9 {
                return Err(Error::invalid(
                    "f_dq_list",
                    format!("{f} Hz is not on the 1 Hz grid at or above 1 Hz"),
                ));
            }
            let (fp, fn_) = (f + f1, f - f1);
            if (fn_ - f1).abs() < 1e-9 || (fp - f1).abs() < 1e-9 || (fn_ + f1).abs() < 1e-9 {
                excluded.push(ExcludedPoint {
                    f_dq: f,
                    reason: format!(
                        "injection tone at {fp} Hz / {fn_} Hz coincides with the fundamental"
                    ),
                });
            } else {
                keep.push(f);
            }
        }
        Ok((keep, excluded))
    }
}

/// Keeps the grid points within `[fmin, fmax]`.
pub fn grid_between(grid: &[f64], fmin: f64, fmax: f64) -> Vec<f64> {
    grid.iter().copied().filter(|f| *f >= fmin && *f <= fmax).collect()
}

/// `lo, lo + step, ...` up to and including `hi`.
pub fn linear_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || hi < lo {
        return Vec::new();
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| lo + k as f64 * step).collect()
}

/// Sorted union of two grids.
pub fn merge_grids(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut g: Vec<f64> = a.iter().chain(b).copied().collect();
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

/// Original (single-sequence) impedances measured directly: `V_p / I_p`
/// from the positive sequence run and `V_n / I_n` from the negative one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectOriginal {
    pub zp: C64,
    pub zn: C64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsystemPoint {
    pub zdq: ImpedanceDq,
    pub zpn: ImpedancePn,
    /// Condition number of the current measurement matrix.
    pub condition: f64,
    pub direct: DirectOriginal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub f_dq: f64,
    pub f_p: f64,
    /// Signed.
    pub f_n: f64,
    pub source: Option<SubsystemPoint>,
    pub load: Option<SubsystemPoint>,
    /// `f_n < 0`: the negative sequence row is reported folded.
    pub fold_flag: bool,
    /// `f_n = 0`: negative sequence quantities are window means.
    pub dc_point: bool,
    /// Injection amplitude the point was measured with, pu.
    pub amplitude: f64,
    pub issues: Vec<String>,
}

impl SweepEntry {
    pub fn side(&self, side: Side) -> Option<&SubsystemPoint> {
        match side {
            Side::Source => self.source.as_ref(),
            Side::Load => self.load.as_ref(),
        }
    }

    pub fn flagged(&self) -> bool {
        !self.issues.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub schema_version: u32,
    pub case: String,
    /// The full case the sweep was run on.
    pub config: Case,
    pub injection: Injection,
    pub sides: Sides,
    pub f1: f64,
    pub amplitude: f64,
    pub settle: f64,
    pub window: f64,
    pub dt: f64,
    /// Largest real part of the linearized whole-system eigenvalues, 1/s.
    pub spectral_abscissa: f64,
    /// Steady-state gate mismatch of the unperturbed run, pu.
    pub gate_mismatch: f64,
    pub excluded: Vec<ExcludedPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub metadata: SweepMetadata,
    pub entries: Vec<SweepEntry>,
}

impl SweepResult {
    pub fn frequencies(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.f_dq).collect()
    }

    pub fn flagged(&self) -> Vec<&SweepEntry> {
        self.entries.iter().filter(|e| e.flagged()).collect()
    }

    /// Entries where the requested side was measured.
    pub fn points(&self, side: Side) -> impl Iterator<Item = (f64, &SubsystemPoint)> {
        self.entries
            .iter()
            .filter_map(move |e| e.side(side).map(|p| (e.f_dq, p)))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::arg(format!("json export failed: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: SweepResult =
            serde_json::from_str(text).map_err(|e| Error::arg(format!("sweep json: {e}")))?;
        if r.metadata.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(
                "metadata.schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", r.metadata.schema_version),
            ));
        }
        Ok(r)
    }

    /// One row per frequency: magnitude (pu) and angle (deg) of the four dq
    /// and four folded pn entries of each side. Missing sides leave empty
    /// cells.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let io = |e: csv::Error| Error::arg(format!("csv export failed: {e}"));
        let mut wr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = [
            "f_dq_Hz", "f_p_Hz", "f_n_abs_Hz", "fold_flag", "dc_point", "amplitude_pu", "flagged",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for side in ["source", "load"] {
            for name in CSV_ENTRIES {
                header.push(format!("{side}_{name}_mag_pu"));
                header.push(format!("{side}_{name}_ang_deg"));
            }
        }
        wr.write_record(&header).map_err(io)?;
        for e in &self.entries {
            let mut row = vec![
                csv_float(e.f_dq),
                csv_float(e.f_p),
                csv_float(e.f_n.abs()),
                e.fold_flag.to_string(),
                e.dc_point.to_string(),
                csv_float(e.amplitude),
                e.flagged().to_string(),
            ];
            for p in [&e.source, &e.load] {
                match p {
                    Some(p) => {
                        let f = fold_negative_frequency(&p.zpn);
                        let z = p.zdq.m.m;
                        for v in [z[0][0], z[0][1], z[1][0], z[1][1], f.zpp, f.zpn, f.znp, f.znn] {
                            row.push(csv_float(v.norm()));
                            row.push(csv_float(v.arg().to_degrees()));
                        }
                    }
                    None => row.extend(std::iter::repeat(String::new()).take(2 * CSV_ENTRIES.len())),
                }
            }
            wr.write_record(&row).map_err(io)?;
        }
        wr.flush().map_err(|e| Error::arg(format!("csv export failed: {e}")))?;
        Ok(())
    }
}

/// `Z = [V1 V2] [I1 I2]^-1` where each argument is one run's response
/// vector. Fails when the current matrix is ill-conditioned.
pub fn solve_point(v1: [C64; 2], v2: [C64; 2], i1: [C64; 2], i2: [C64; 2]) -> Result<(Mat2, f64)> {
    let imat = Mat2::from_columns(i1, i2);
    let cond = imat.cond();
    if !(cond <= MAX_CONDITION) {
        return Err(Error::LinearDependence { cond });
    }
    let vmat = Mat2::from_columns(v1, v2);
    Ok((vmat * imat.inverse()?, cond))
}

/// Modified sequence matrix with the negative sequence row relabeled to
/// `|f_n|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldedPn {
    pub f_dq: f64,
    pub f_p: f64,
    /// `|f_n|`.
    pub f_n_abs: f64,
    pub zpp: C64,
    pub zpn: C64,
    pub znp: C64,
    pub znn: C64,
    pub fold_flag: bool,
}

/// Below the fundamental the negative sequence frequency is negative. A
/// real balanced set at `-w` is the opposite sequence at `+w` with the
/// conjugate phasor, so the negative sequence row is conjugated and
/// reported at `|f_n|`. Magnitudes are unchanged. Above the fundamental
/// this is the identity.
pub fn fold_negative_frequency(z: &ImpedancePn) -> FoldedPn {
    let fold = z.f_n < 0.0;
    let c = |v: C64| if fold { v.conj() } else { v };
    FoldedPn {
        f_dq: z.f_dq,
        f_p: z.f_p,
        f_n_abs: z.f_n.abs(),
        zpp: z.zpp(),
        zpn: z.zpn(),
        znp: c(z.znp()),
        znn: c(z.znn()),
        fold_flag: fold,
    }
}

/// Phasors of one run at the probe frequencies.
#[derive(Clone, Copy, Debug)]
struct RunPhasors {
    /// `[v_s, v_l, i_s, i_l]`, each `[d, q]` at `f_dq`.
    dq: [[C64; 2]; 4],
    /// `[v_s, v_l, i_s, i_l]`, each `[p at f_p, n at f_n]`.
    pn: [[C64; 2]; 4],
}

fn extract_run(rec: &SimRecord, f_dq: f64, f1: f64, window: &Window) -> Result<RunPhasors> {
    let dq_series = [&rec.source_v_dq, &rec.load_v_dq, &rec.source_i_dq, &rec.load_i_dq];
    let abc_series = [&rec.source_v, &rec.load_v, &rec.source_i, &rec.load_i];
    let mut out = RunPhasors {
        dq: [[C64::new(0.0, 0.0); 2]; 4],
        pn: [[C64::new(0.0, 0.0); 2]; 4],
    };
    for k in 0..4 {
        let (d, q) = extract_dq_phasors(dq_series[k], f_dq, window)?;
        out.dq[k] = [d.value, q.value];
        let p = extract_sequence_phasor(abc_series[k], f_dq + f1, Frame::SeqPositive, window)?;
        let n = extract_sequence_phasor(abc_series[k], f_dq - f1, Frame::SeqNegative, window)?;
        out.pn[k] = [p.value, n.value];
    }
    Ok(out)
}

/// Everything needed to run injections on one case.
pub struct Testbed {
    pub model: Box<dyn Plant>,
    pub op: OperatingPoint,
    pub case: Case,
}

impl Testbed {
    pub fn new(case: &Case) -> Result<Self> {
        case.validate()?;
        let model = build_model(&case.model)?;
        let op = OperatingPoint::new(model.as_ref())?;
        Ok(Testbed {
            model,
            op,
            case: case.clone(),
        })
    }

    pub fn f1(&self) -> f64 {
        self.model.f1()
    }

    pub fn window(&self) -> Window {
        let s = &self.case.sim;
        Window::new(s.settle, s.settle + s.window)
    }

    /// Runs one injection from the linearized periodic state and records
    /// the measurement window.
    pub fn run(&self, spec: &InjectionSpec) -> Result<SimRecord> {
        let s = &self.case.sim;
        let x0 = self.op.periodic_start(spec, self.f1())?;
        let mut run = RunSpec::new(s.settle + s.window, s.dt);
        run.record_from = s.settle;
        run.injection = Some(*spec);
        run.divergence_limit = s.divergence_limit;
        run_time_domain(self.model.as_ref(), &x0, &run)
    }

    pub fn gate(&self) -> Result<f64> {
        let s = &self.case.sim;
        steady_state_gate(self.model.as_ref(), &self.op.x, s.settle, s.dt, s.gate_tol)
    }

    fn spec(&self, kind: Injection, run: InjectionRun, f_dq: f64, amplitude: f64) -> InjectionSpec {
        InjectionSpec {
            kind,
            run,
            f_inj: f_dq,
            amplitude,
        }
    }

    /// Measures one grid point with the two injection runs.
    pub fn measure_point(&self, kind: Injection, f_dq: f64, sides: Sides) -> SweepEntry {
        let f1 = self.f1();
        let amp = self.case.sim.amplitude;
        let mut entry = SweepEntry {
            f_dq,
            f_p: f_dq + f1,
            f_n: f_dq - f1,
            source: None,
            load: None,
            fold_flag: f_dq - f1 < 0.0,
            dc_point: (f_dq - f1).abs() < 1e-9,
            amplitude: amp,
            issues: Vec::new(),
        };
        let window = self.window();
        let measure = |a: f64| -> Result<(RunPhasors, RunPhasors)> {
            let runs: Vec<Result<RunPhasors>> = [InjectionRun::Positive, InjectionRun::Negative]
                .par_iter()
                .map(|&r| {
                    let rec = self.run(&self.spec(kind, r, f_dq, a))?;
                    extract_run(&rec, f_dq, f1, &window)
                })
                .collect();
            let mut it = runs.into_iter();
            Ok((it.next().unwrap()?, it.next().unwrap()?))
        };
        // Near a weakly damped resonance the nominal probe can push the plant
        // out of its small-signal range; retry smaller before giving up.
        let mut result = measure(amp);
        for k in 1..=AMPLITUDE_RETRIES {
            if !matches!(result, Err(Error::Divergence { .. })) {
                break;
            }
            entry.amplitude = amp * AMPLITUDE_BACKOFF.powi(k as i32);
            result = measure(entry.amplitude);
        }
        let (r1, r2) = match result {
            Ok(r) => r,
            Err(e) => {
                entry.issues.push(format!("run failed: {e}"));
                return entry;
            }
        };
        for (side, vi, ii) in [(Side::Source, 0, 2), (Side::Load, 1, 3)] {
            if !sides.includes(side) {
                continue;
            }
            match subsystem_point(&r1, &r2, vi, ii, f_dq, f1) {
                Ok(p) => match side {
                    Side::Source => entry.source = Some(p),
                    Side::Load => entry.load = Some(p),
                },
                Err(e) => entry.issues.push(format!("{side:?}: {e}")),
            }
        }
        entry
    }
}

fn subsystem_point(
    r1: &RunPhasors,
    r2: &RunPhasors,
    vi: usize,
    ii: usize,
    f_dq: f64,
    f1: f64,
) -> Result<SubsystemPoint> {
    let (zdq, cond) = solve_point(r1.dq[vi], r2.dq[vi], r1.dq[ii], r2.dq[ii])?;
    let (zpn, _) = solve_point(r1.pn[vi], r2.pn[vi], r1.pn[ii], r2.pn[ii])?;
    let ratio = |v: C64, i: C64| {
        if i.norm() == 0.0 {
            Err(Error::Degenerate { f_dq })
        } else {
            Ok(v / i)
        }
    };
    Ok(SubsystemPoint {
        zdq: ImpedanceDq::new(f_dq, zdq),
        zpn: ImpedancePn::new(f_dq, f1, zpn),
        condition: cond,
        direct: DirectOriginal {
            zp: ratio(r1.pn[vi][0], r1.pn[ii][0])?,
            zn: ratio(r2.pn[vi][1], r2.pn[ii][1])?,
        },
    })
}

/// Runs every grid point of the plan. Points are measured in parallel on
/// the current rayon pool and assembled in grid order.
pub fn run_sweep(plan: &SweepPlan) -> Result<SweepResult> {
    let (grid, excluded) = plan.validate()?;
    let bed = Testbed::new(&plan.case)?;
    let gate_mismatch = bed.gate()?;
    let entries: Vec<SweepEntry> = grid
        .par_iter()
        .map(|&f| bed.measure_point(plan.injection, f, plan.sides))
        .collect();
    let s = &plan.case.sim;
    Ok(SweepResult {
        metadata: SweepMetadata {
            schema_version: SCHEMA_VERSION,
            case: plan.case.name.clone(),
            config: plan.case.clone(),
            injection: plan.injection,
            sides: plan.sides,
            f1: bed.f1(),
            amplitude: s.amplitude,
            settle: s.settle,
            window: s.window,
            dt: s.dt,
            spectral_abscissa: bed.op.spectral_abscissa(),
            gate_mismatch,
            excluded,
        },
        entries,
    })
}

/// Skew-symmetric dq structure of both subsystems from one combined run
/// (both injection tones at once, a single tone in dq). Valid only for MFD
/// subsystems.
pub fn single_measurement(
    case: &Case,
    kind: Injection,
    f_dq: f64,
) -> Result<(MfdStructure, MfdStructure)> {
    let bed = Testbed::new(case)?;
    let spec = bed.spec(kind, InjectionRun::Combined, f_dq, case.sim.amplitude);
    let rec = bed.run(&spec)?;
    let r = extract_run(&rec, f_dq, bed.f1(), &bed.window())?;
    let solve = |vi: usize, ii: usize| {
        mfd_single_measurement_zdq(r.dq[vi][0], r.dq[vi][1], r.dq[ii][0], r.dq[ii][1])
    };
    Ok((solve(0, 2)?, solve(1, 3)?))
}

/// Minor-loop gain points over the measured grid. The original domain uses
/// `diag(Z_p, Z_n)` from the closed-form original impedances under the
/// sweep's injection method. Points missing either side are skipped and
/// returned separately.
pub fn minor_loop_points(result: &SweepResult, domain: Domain) -> Result<(Vec<MinorLoopPoint>, Vec<f64>)> {
    let mut pts = Vec::new();
    let mut skipped = Vec::new();
    for e in &result.entries {
        let (Some(s), Some(l)) = (&e.source, &e.load) else {
            skipped.push(e.f_dq);
            continue;
        };
        let (zs, zl) = match domain {
            Domain::Dq => (s.zdq.m, l.zdq.m),
            Domain::Pn => (s.zpn.m, l.zpn.m),
            Domain::Original => match original_pairs(&s.zpn, &l.zpn, result.metadata.injection) {
                Ok((lo, so)) => (Mat2::diag(so.zp, so.zn), Mat2::diag(lo.zp, lo.zn)),
                Err(_) => {
                    skipped.push(e.f_dq);
                    continue;
                }
            },
        };
        match minor_loop_from_impedances(e.f_dq, domain, &zs, &zl) {
            Ok(p) => pts.push(p),
            Err(_) => skipped.push(e.f_dq),
        }
    }
    Ok((pts, skipped))
}

/// Direct-simulation and closed-form original impedances of one subsystem
/// at one grid point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OriginalRow {
    pub direct: DirectOriginal,
    pub shunt: Option<OriginalSequencePair>,
    pub series: Option<OriginalSequencePair>,
    pub zpp: C64,
    pub znn: C64,
}

impl OriginalRow {
    /// The closed-form pair matching the injection that was simulated.
    pub fn formula(&self, kind: Injection) -> Option<&OriginalSequencePair> {
        match kind {
            Injection::Shunt => self.shunt.as_ref(),
            Injection::Series => self.series.as_ref(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OriginalComparison {
    pub f_dq: f64,
    pub f_p: f64,
    pub f_n: f64,
    pub injection: Injection,
    pub source: OriginalRow,
    pub load: OriginalRow,
}

/// Original impedances from direct simulation alongside the shunt and
/// series formula values computed from both modified sequence matrices.
pub fn original_comparison(result: &SweepResult) -> Vec<OriginalComparison> {
    let mut out = Vec::new();
    for e in &result.entries {
        let (Some(s), Some(l)) = (&e.source, &e.load) else {
            continue;
        };
        let shunt = original_pairs(&s.zpn, &l.zpn, Injection::Shunt).ok();
        let series = original_pairs(&s.zpn, &l.zpn, Injection::Series).ok();
        let row = |p: &SubsystemPoint, pick: fn(&(OriginalSequencePair, OriginalSequencePair)) -> OriginalSequencePair| {
            OriginalRow {
                direct: p.direct,
                shunt: shunt.as_ref().map(pick),
                series: series.as_ref().map(pick),
                zpp: p.zpn.zpp(),
                znn: p.zpn.znn(),
            }
        };
        out.push(OriginalComparison {
            f_dq: e.f_dq,
            f_p: e.f_p,
            f_n: e.f_n,
            injection: result.metadata.injection,
            source: row(s, |x| x.1),
            load: row(l, |x| x.0),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::Preset;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn solve_point_identity_currents() {
        let z = Mat2::new(c(1.0, 2.0), c(0.5, 0.0), c(-0.3, 0.1), c(0.0, 1.0));
        let one = c(1.0, 0.0);
        let zero = c(0.0, 0.0);
        let (got, cond) = solve_point(z.col(0), z.col(1), [one, zero], [zero, one]).unwrap();
        assert_eq!(got, z);
        assert_eq!(cond, 1.0);
    }

    #[test]
    fn solve_point_rejects_dependent_runs() {
        let i1 = [c(1.0, 0.5), c(0.2, -0.1)];
        let i2 = [i1[0] * 3.0, i1[1] * 3.0];
        let v = [c(1.0, 0.0), c(0.0, 1.0)];
        assert!(matches!(
            solve_point(v, v, i1, i2),
            Err(Error::LinearDependence { .. })
        ));
    }

    #[test]
    fn grid_helpers() {
        assert_eq!(linear_grid(56.0, 60.0, 2.0), vec![56.0, 58.0, 60.0]);
        assert!(linear_grid(5.0, 1.0, 1.0).is_empty());
        assert_eq!(merge_grids(&[1.0, 5.0], &[5.0, 3.0]), vec![1.0, 3.0, 5.0]);
    }

    #[test]
    fn fold_examples() {
        let m = Mat2::new(c(1.0, 2.0), c(0.1, 0.2), c(0.3, 0.4), c(0.5, -0.6));
        let f = fold_negative_frequency(&ImpedancePn::new(40.0, 50.0, m));
        assert!(f.fold_flag);
        assert_eq!((f.f_p, f.f_n_abs), (90.0, 10.0));
        assert_eq!(f.znn, c(0.5, 0.6));
        let f = fold_negative_frequency(&ImpedancePn::new(15.0, 50.0, m));
        assert_eq!(f.f_n_abs, 35.0);
        let f = fold_negative_frequency(&ImpedancePn::new(80.0, 50.0, m));
        assert!(!f.fold_flag);
        assert_eq!(f.znn, m.m[1][1]);
        assert_eq!(f.f_n_abs, 30.0);
    }

    #[test]
    fn plan_excludes_fundamental_collisions() {
        let mut plan = SweepPlan::new(Preset::OracleRl.case(), Injection::Shunt);
        plan.f_dq_list = vec![10.0, 50.0, 100.0, 120.0];
        let (keep, excluded) = plan.validate().unwrap();
        assert_eq!(keep, vec![10.0, 50.0, 120.0]);
        assert_eq!(excluded.len(), 1);
        assert_eq!(excluded[0].f_dq, 100.0);
    }

    #[test]
    fn plan_rejects_off_grid_points() {
        let mut plan = SweepPlan::new(Preset::OracleRl.case(), Injection::Shunt);
        plan.f_dq_list = vec![10.5];
        assert!(plan.validate().is_err());
        plan.f_dq_list = vec![20.0, 10.0];
        assert!(plan.validate().is_err());
    }

    #[test]
    fn csv_float_has_twelve_digits() {
        assert_eq!(csv_float(1.0 / 3.0), "3.33333333333e-1");
        assert_eq!(csv_float(-250.0), "-2.50000000000e2");
    }

    #[test]
    fn default_grid_is_ascending_integers() {
        assert!(DEFAULT_GRID.windows(2).all(|w| w[1] > w[0]));
        assert!(DEFAULT_GRID.iter().all(|f| f.fract() == 0.0));
    }
}

//! Stepwise DC-load increase and oscillation growth classification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::integrate::{
    complex_eigenvalues, find_equilibrium_from, jacobian, run_time_domain, OperatingPoint, RunSpec,
};
use super::model::{idx, ConverterModel, Input, Plant};

/// `I_dc` value applied from `t` seconds on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DcStep {
    pub t: f64,
    pub i_dc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub steps: Vec<DcStep>,
    pub end: f64,
}

impl StepSchedule {
    /// 1.0 pu, then 1.1 pu at 0.5 s and 1.2 pu at 2.5 s, ending at 5 s.
    pub fn default_ramp() -> Self {
        StepSchedule {
            steps: vec![
                DcStep { t: 0.0, i_dc: 1.0 },
                DcStep { t: 0.5, i_dc: 1.1 },
                DcStep { t: 2.5, i_dc: 1.2 },
            ],
            end: 5.0,
        }
    }

    /// 1.0 pu, then held at `i_dc` from 0.5 s.
    pub fn hold(i_dc: f64, end: f64) -> Self {
        StepSchedule {
            steps: vec![DcStep { t: 0.0, i_dc: 1.0 }, DcStep { t: 0.5, i_dc }],
            end,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.steps.is_empty() || self.steps[0].t != 0.0 {
            return Err(Error::invalid("schedule", "must start with a step at t = 0"));
        }
        for w in self.steps.windows(2) {
            if w[1].t <= w[0].t {
                return Err(Error::invalid("schedule", "step times must increase"));
            }
        }
        if self.end <= self.steps.last().unwrap().t {
            return Err(Error::invalid("schedule.end", "must follow the last step"));
        }
        if self.steps.iter().any(|s| !(s.i_dc >= 0.0 && s.i_dc.is_finite())) {
            return Err(Error::invalid("schedule.i_dc", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trend {
    /// No measurable deviation from the equilibrium.
    Steady,
    Decaying,
    Sustained,
    Growing,
    Diverged,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentReport {
    pub t_start: f64,
    pub t_end: f64,
    pub i_dc: f64,
    /// Fitted exponential rate of the oscillation envelope, 1/s. Absent
    /// when the segment diverged or was too short to fit.
    pub growth_rate: Option<f64>,
    pub peak_deviation: Option<f64>,
    pub trend: Trend,
    /// Least damped oscillatory eigenvalue `[re, im]` of the linearization.
    pub linear_mode: Option<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub dt_record: f64,
    pub t: Vec<f64>,
    pub i_sd: Vec<f64>,
    pub i_sq: Vec<f64>,
    pub v_dc: Vec<f64>,
    pub segments: Vec<SegmentReport>,
    pub divergence_time: Option<f64>,
}

impl StepResult {
    pub fn unstable(&self) -> bool {
        self.divergence_time.is_some()
            || self
                .segments
                .iter()
                .any(|s| matches!(s.trend, Trend::Growing | Trend::Diverged))
    }
}

const ENVELOPE_WINDOW: f64 = 0.05;
const SKIP_AFTER_STEP: f64 = 0.1;
const RATE_DEADBAND: f64 = 0.2;
const STEADY_DEVIATION: f64 = 1e-9;

/// Envelope rate by least squares on the log of per-window peak deviation.
fn envelope_rate(t: &[f64], dev: &[f64], t_from: f64) -> Option<f64> {
    let mut pts = Vec::new();
    let mut k = t.iter().position(|&x| x >= t_from)?;
    let n = t.len();
    while k < n {
        let t_end = t[k] + ENVELOPE_WINDOW;
        let mut peak: f64 = 0.0;
        let k0 = k;
        while k < n && t[k] < t_end - 1e-12 {
            peak = peak.max(dev[k]);
            k += 1;
        }
        if k == n && t[n - 1] - t[k0] < 0.5 * ENVELOPE_WINDOW {
            break;
        }
        if peak > 0.0 {
            pts.push((0.5 * (t[k0] + t[k - 1]), peak.ln()));
        }
    }
    if pts.len() < 3 {
        return None;
    }
    let m = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    Some(sxy / sxx)
}

/// Runs the schedule on a DC-voltage controlled case, starting from the
/// equilibrium of the first load value. Divergence is a reported outcome.
pub fn run_step_test(
    base: &ConverterModel,
    schedule: &StepSchedule,
    dt: f64,
    record_every: usize,
    divergence_limit: f64,
) -> Result<StepResult> {
    schedule.validate()?;
    if base.i_dc().is_none() {
        return Err(Error::invalid("load.mode", "step test needs a DC-voltage controlled load"));
    }
    let first = base.with_i_dc(schedule.steps[0].i_dc);
    let mut x = OperatingPoint::new(&first)?.x;
    let mut eq_guess = x.clone();
    let mut out = StepResult {
        dt_record: dt * record_every as f64,
        t: Vec::new(),
        i_sd: Vec::new(),
        i_sq: Vec::new(),
        v_dc: Vec::new(),
        segments: Vec::new(),
        divergence_time: None,
    };
    for (k, step) in schedule.steps.iter().enumerate() {
        let t_end = schedule.steps.get(k + 1).map_or(schedule.end, |s| s.t);
        let model = base.with_i_dc(step.i_dc);
        let eq = find_equilibrium_from(&model, &eq_guess).ok();
        let linear_mode = eq.as_ref().and_then(|e| {
            let a = jacobian(&model, e, &Input::none());
            complex_eigenvalues(&a)
                .into_iter()
                .filter(|z| z.im > 1.0)
                .max_by(|a, b| a.re.total_cmp(&b.re))
                .map(|z| [z.re, z.im])
        });
        let mut spec = RunSpec::new(round_to(t_end - step.t, dt), dt);
        spec.decimate = record_every;
        spec.divergence_limit = divergence_limit;
        let rec = match run_time_domain(&model, &x, &spec) {
            Ok(r) => r,
            Err(Error::Divergence { t }) => {
                out.divergence_time = Some(step.t + t);
                out.segments.push(SegmentReport {
                    t_start: step.t,
                    t_end,
                    i_dc: step.i_dc,
                    growth_rate: None,
                    peak_deviation: None,
                    trend: Trend::Diverged,
                    linear_mode,
                });
                break;
            }
            Err(e) => return Err(e),
        };
        let times: Vec<f64> = (0..rec.len()).map(|j| step.t + j as f64 * rec.dt).collect();
        // Source converter currents.
        let isd = rec.aux.get("i_sd").cloned().unwrap_or_default();
        let isq = rec.aux.get("i_sq").cloned().unwrap_or_default();
        let dev: Vec<f64> = match &eq {
            Some(e) => isd
                .iter()
                .zip(&isq)
                .map(|(d, q)| (d - e[idx::IS_D]).hypot(q - e[idx::IS_Q]))
                .collect(),
            None => isd.iter().zip(&isq).map(|(d, q)| d.hypot(*q)).collect(),
        };
        let rate = envelope_rate(&times, &dev, step.t + SKIP_AFTER_STEP);
        let peak = dev.iter().copied().fold(0.0, f64::max);
        let r = rate.unwrap_or(0.0);
        let trend = if peak < STEADY_DEVIATION {
            Trend::Steady
        } else if r > RATE_DEADBAND {
            Trend::Growing
        } else if r < -RATE_DEADBAND {
            Trend::Decaying
        } else {
            Trend::Sustained
        };
        out.segments.push(SegmentReport {
            t_start: step.t,
            t_end,
            i_dc: step.i_dc,
            growth_rate: rate,
            peak_deviation: Some(peak),
            trend,
            linear_mode,
        });
        out.t.extend(times);
        out.i_sd.extend(isd);
        out.i_sq.extend(isq);
        out.v_dc.extend(rec.aux.get("v_dc").cloned().unwrap_or_default());
        x = rec.final_state;
        if let Some(e) = eq {
            eq_guess = e;
        }
    }
    debug_assert_eq!(base.n_states(), x.len());
    Ok(out)
}

fn round_to(t: f64, dt: f64) -> f64 {
    (t / dt).round() * dt
}

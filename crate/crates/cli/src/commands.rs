use std::f64::consts::PI;
use std::path::Path;

use anyhow::{bail, Context as _, Result};
use mirrorfreq::impedance::{mfd_classify_dq, mfd_classify_pn, series_rl_exact};
use mirrorfreq::sim::model::ConverterModel;
use mirrorfreq::sim::step::DcStep;
use mirrorfreq::sim::{run_step_test, ModelConfig, OracleConfig, StepSchedule};
use mirrorfreq::stability::{build_loci, count_encirclements, MAX_ARG_STEP};
use mirrorfreq::sweep::{minor_loop_points, original_comparison, single_measurement};
use mirrorfreq::{Case, Domain, Injection, Mat2, Side, SweepPlan, SweepResult, VerdictStatus, C64};
use serde::Serialize;

use crate::args::{
    resolve_case, CaseArgs, CompareArgs, CompareInjection, DumpArgs, GncArgs, MfdArgs, StepArgs, SweepArgs,
};
use crate::output::{f12, Context, OutputDir};

type Problems = Vec<String>;

/// A sweep and the case it was measured on.
struct Loaded {
    result: SweepResult,
    origin: String,
    /// Set when the sweep was run by this command and should be saved.
    fresh: bool,
}

fn run_sweep(args: &CaseArgs, kind: Injection) -> Result<Loaded> {
    let rc = args.resolve()?;
    let mut plan = SweepPlan::new(rc.case, kind);
    plan.f_dq_list = args.grid()?;
    plan.sides = args.sides();
    eprintln!(
        "sweeping {} ({kind:?} injection, {} points)",
        plan.case.name,
        plan.f_dq_list.len()
    );
    let result = mirrorfreq::run_sweep(&plan)?;
    Ok(Loaded {
        result,
        origin: rc.origin,
        fresh: true,
    })
}

fn load_sweep(path: &Path) -> Result<Loaded> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let result = SweepResult::from_json(&text).with_context(|| format!("sweep file {}", path.display()))?;
    Ok(Loaded {
        result,
        origin: path.display().to_string(),
        fresh: false,
    })
}

fn obtain(sweep: Option<&Path>, args: &CaseArgs, kind: Injection) -> Result<Loaded> {
    match sweep {
        Some(p) => load_sweep(p),
        None => run_sweep(args, kind),
    }
}

fn injection_name(kind: Injection) -> &'static str {
    match kind {
        Injection::Shunt => "shunt",
        Injection::Series => "series",
    }
}

fn save_sweep(out: &mut OutputDir, r: &SweepResult, stem: &str) -> Result<()> {
    out.write(&format!("{stem}.json"), r.to_json()? + "\n")?;
    let mut buf = Vec::new();
    r.write_csv(&mut buf)?;
    out.write(&format!("{stem}.csv"), buf)
}

fn flagged_problems(r: &SweepResult) -> Problems {
    r.flagged()
        .iter()
        .map(|e| format!("{} {:?} {} Hz: {}", r.metadata.case, r.metadata.injection, e.f_dq, e.issues.join("; ")))
        .collect()
}

fn offdiag_ratio(m: &Mat2) -> f64 {
    let [[pp, pn], [np, nn]] = m.m;
    pn.norm().max(np.norm()) / pp.norm().max(nn.norm())
}

fn print_sweep_summary(r: &SweepResult) {
    let m = &r.metadata;
    println!(
        "{} {:?}: {} points, amplitude {} pu, spectral abscissa {:.3} 1/s",
        m.case,
        m.injection,
        r.entries.len(),
        m.amplitude,
        m.spectral_abscissa
    );
    for x in &m.excluded {
        println!("  excluded {} Hz: {}", x.f_dq, x.reason);
    }
    for side in [Side::Source, Side::Load] {
        let worst = r
            .points(side)
            .map(|(f, p)| (f, offdiag_ratio(&p.zpn.m)))
            .fold(None, |a: Option<(f64, f64)>, b| match a {
                Some(a) if a.1 >= b.1 => Some(a),
                _ => Some(b),
            });
        if let Some((f, ratio)) = worst {
            println!("  {side:?}: max |Z_pn off-diagonal| / |diagonal| = {ratio:.3e} at {f} Hz");
        }
    }
    let retried: Vec<String> = r
        .entries
        .iter()
        .filter(|e| e.amplitude < m.amplitude)
        .map(|e| format!("{} Hz ({} pu)", e.f_dq, e.amplitude))
        .collect();
    if !retried.is_empty() {
        println!("  measured at reduced amplitude: {}", retried.join(", "));
    }
}

/// Largest magnitude and phase (deg) errors of the measured source
/// impedances against the closed-form R-L branch of `o`.
pub fn oracle_errors(r: &SweepResult, o: &OracleConfig) -> (f64, f64) {
    let mut mag: f64 = 0.0;
    let mut phase: f64 = 0.0;
    for (f, p) in r.points(Side::Source) {
        let (zdq, zpn) = series_rl_exact(o.r, o.x, f, o.f_n);
        for (got, want) in [(p.zdq.m, zdq), (p.zpn.m, zpn)] {
            let scale = want.max_abs();
            for i in 0..2 {
                for j in 0..2 {
                    let (g, w) = (got.m[i][j], want.m[i][j]);
                    if w.norm() > 1e-9 * scale {
                        mag = mag.max((g.norm() / w.norm() - 1.0).abs());
                        phase = phase.max((g / w).arg().to_degrees().abs());
                    } else {
                        mag = mag.max(g.norm() / scale);
                    }
                }
            }
        }
    }
    (mag, phase)
}

pub const ORACLE_MAG_TOL: f64 = 0.01;
pub const ORACLE_PHASE_TOL_DEG: f64 = 2.0;

pub fn sweep(ctx: &Context, a: &SweepArgs) -> Result<Problems> {
    let loaded = run_sweep(&a.case, a.injection.into())?;
    let r = &loaded.result;
    let mut out = ctx.writer(&a.out)?;
    save_sweep(&mut out, r, "sweep")?;
    print_sweep_summary(r);
    let mut problems = flagged_problems(r);
    if let ModelConfig::PassiveRl(o) = &r.metadata.config.model {
        let (mag, phase) = oracle_errors(r, o);
        println!("oracle check: max |Z| error {mag:.3e}, max phase error {phase:.3e} deg");
        if mag > ORACLE_MAG_TOL || phase > ORACLE_PHASE_TOL_DEG {
            problems.push(format!("oracle extraction error {mag:.3e} / {phase:.3e} deg exceeds 1% / 2 deg"));
        }
    }
    out.finish(&loaded.origin, &r.metadata.config)?;
    Ok(problems)
}

#[derive(Serialize)]
struct DomainVerdict {
    domain: Domain,
    verdict: mirrorfreq::GncVerdict,
    /// Frequency whose step into the next point turns most around (-1, 0).
    largest_step_at: f64,
    skipped: Vec<f64>,
}

#[derive(Serialize)]
struct GncReport {
    schema_version: u32,
    case: String,
    injection: Injection,
    critical_point: [f64; 2],
    domains: Vec<DomainVerdict>,
}

fn largest_step_frequency(loci: &mirrorfreq::NyquistLoci, point: C64) -> f64 {
    let mut best = (0.0, loci.frequencies[0]);
    for locus in loci.loci() {
        for (k, w) in locus.windows(2).enumerate() {
            let mut d = (w[1] - point).arg() - (w[0] - point).arg();
            if d > PI {
                d -= 2.0 * PI;
            } else if d < -PI {
                d += 2.0 * PI;
            }
            if d.abs() > best.0 {
                best = (d.abs(), loci.frequencies[k]);
            }
        }
    }
    best.1
}

pub fn gnc(ctx: &Context, a: &GncArgs) -> Result<Problems> {
    let loaded = obtain(a.sweep.as_deref(), &a.case, a.injection.into())?;
    let r = &loaded.result;
    let mut out = ctx.writer(&a.out)?;
    if loaded.fresh {
        save_sweep(&mut out, r, "sweep")?;
    }
    let mut problems = flagged_problems(r);
    let critical = C64::new(-1.0, 0.0);
    let mut rows = Vec::new();
    let mut report = GncReport {
        schema_version: 1,
        case: r.metadata.case.clone(),
        injection: r.metadata.injection,
        critical_point: [-1.0, 0.0],
        domains: Vec::new(),
    };
    for domain in a.domain.domains() {
        let (pts, skipped) = minor_loop_points(r, domain)?;
        if !skipped.is_empty() {
            problems.push(format!("{domain:?}: points without both subsystems skipped: {skipped:?}"));
        }
        let loci = build_loci(&pts).with_context(|| format!("{domain:?} loci"))?;
        let v = count_encirclements(&loci, critical)?;
        let step_at = largest_step_frequency(&loci, critical);
        println!(
            "{domain:?}: {:?}, {} encirclement(s), margin {:.4} at {} Hz, max arg step {:.3} rad",
            v.status, v.encirclements, v.margin, v.critical_frequency, v.max_step
        );
        match v.status {
            VerdictStatus::GridInsufficient => problems.push(format!(
                "{domain:?}: grid insufficient (arg step {:.3} rad > {:.3} rad after {step_at} Hz); refine the grid there",
                v.max_step, MAX_ARG_STEP
            )),
            VerdictStatus::Marginal => problems.push(format!(
                "{domain:?}: locus passes through (-1, 0) at {} Hz",
                v.critical_frequency
            )),
            _ => {}
        }
        for k in 0..loci.frequencies.len() {
            rows.push((domain, loci.frequencies[k], loci.locus1[k], loci.locus2[k]));
        }
        report.domains.push(DomainVerdict {
            domain,
            verdict: v,
            largest_step_at: step_at,
            skipped,
        });
    }
    out.write_csv("loci.csv", |w| {
        w.write_record(["domain", "f_dq_Hz", "lambda1_re", "lambda1_im", "lambda2_re", "lambda2_im"])?;
        for (d, f, l1, l2) in &rows {
            w.write_record([
                format!("{d:?}").to_lowercase(),
                f12(*f),
                f12(l1.re),
                f12(l1.im),
                f12(l2.re),
                f12(l2.im),
            ])?;
        }
        Ok(())
    })?;
    out.write_json("gnc.json", &report)?;
    out.finish(&loaded.origin, &r.metadata.config)?;
    Ok(problems)
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

pub fn compare_original(ctx: &Context, a: &CompareArgs) -> Result<Problems> {
    let mut sweeps = Vec::new();
    if a.sweep.is_empty() {
        let kinds: &[Injection] = match a.injection {
            CompareInjection::Shunt => &[Injection::Shunt],
            CompareInjection::Series => &[Injection::Series],
            CompareInjection::Both => &[Injection::Shunt, Injection::Series],
        };
        for k in kinds {
            sweeps.push(run_sweep(&a.case, *k)?);
        }
    } else {
        for p in &a.sweep {
            sweeps.push(load_sweep(p)?);
        }
    }
    let mut out = ctx.writer(&a.out)?;
    let mut problems = Vec::new();
    for l in &sweeps {
        problems.extend(flagged_problems(&l.result));
        if l.fresh {
            let stem = format!("sweep_{}", injection_name(l.result.metadata.injection));
            save_sweep(&mut out, &l.result, &stem)?;
        }
    }

    let mut header = vec!["measured_with", "side", "f_dq_Hz", "f_p_Hz", "f_n_Hz", "formula_missing"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    for q in ["direct_zp", "direct_zn", "shunt_zp", "shunt_zn", "series_zp", "series_zn", "zpp", "znn"] {
        header.push(format!("{q}_mag_pu"));
        header.push(format!("{q}_ang_deg"));
    }
    let comparisons: Vec<_> = sweeps.iter().map(|l| original_comparison(&l.result)).collect();
    out.write_csv("original.csv", |w| {
        w.write_record(&header)?;
        for cmp in &comparisons {
            for c in cmp {
                for (side, row) in [("source", &c.source), ("load", &c.load)] {
                    let mut rec = vec![
                        injection_name(c.injection).to_string(),
                        side.to_string(),
                        f12(c.f_dq),
                        f12(c.f_p),
                        f12(c.f_n),
                        (row.shunt.is_none() || row.series.is_none()).to_string(),
                    ];
                    let mut push = |z: Option<C64>| match z {
                        Some(z) => {
                            rec.push(f12(z.norm()));
                            rec.push(f12(z.arg().to_degrees()));
                        }
                        None => rec.extend([String::new(), String::new()]),
                    };
                    push(Some(row.direct.zp));
                    push(Some(row.direct.zn));
                    push(row.shunt.map(|p| p.zp));
                    push(row.shunt.map(|p| p.zn));
                    push(row.series.map(|p| p.zp));
                    push(row.series.map(|p| p.zn));
                    push(Some(row.zpp));
                    push(Some(row.znn));
                    w.write_record(&rec)?;
                }
            }
        }
        Ok(())
    })?;

    for (l, cmp) in sweeps.iter().zip(&comparisons) {
        let kind = l.result.metadata.injection;
        let mut worst: f64 = 0.0;
        let mut hf: f64 = 0.0;
        let mut degenerate = Vec::new();
        for c in cmp {
            for row in [&c.source, &c.load] {
                match row.formula(kind) {
                    Some(f) => worst = worst.max(rel(row.direct.zp, f.zp)).max(rel(row.direct.zn, f.zn)),
                    None => degenerate.push(c.f_dq),
                }
                if c.f_dq > 500.0 {
                    hf = hf.max(rel(row.direct.zp, row.zpp));
                }
            }
        }
        println!(
            "{} {kind:?}: direct vs formula max {:.3e}; |Z_p - Z_pp| / |Z_pp| above 500 Hz max {:.3e}",
            l.result.metadata.case, worst, hf
        );
        if !degenerate.is_empty() {
            println!("  degenerate formula denominators at {degenerate:?} Hz");
        }
    }
    if let [s, t] = comparisons.as_slice() {
        let mut below: f64 = 0.0;
        let mut all: f64 = 0.0;
        for x in s {
            let Some(y) = t.iter().find(|y| y.f_dq == x.f_dq) else {
                continue;
            };
            let d = rel(x.load.direct.zp, y.load.direct.zp).max(rel(x.load.direct.zn, y.load.direct.zn));
            all = all.max(d);
            if x.f_dq < 100.0 {
                below = below.max(d);
            }
        }
        println!("load original impedance, shunt vs series: max {all:.3e} (below 100 Hz {below:.3e})");
    }
    let (origin, case) = sweeps
        .first()
        .map(|l| (l.origin.clone(), l.result.metadata.config.clone()))
        .context("no sweeps")?;
    out.finish(&origin, &case)?;
    Ok(problems)
}

pub fn mfd_check(ctx: &Context, a: &MfdArgs) -> Result<Problems> {
    if !(a.tol > 0.0) {
        bail!("--tol must be positive");
    }
    let loaded = obtain(a.sweep.as_deref(), &a.case, a.injection.into())?;
    let r = &loaded.result;
    let mut out = ctx.writer(&a.out)?;
    if loaded.fresh {
        save_sweep(&mut out, r, "sweep")?;
    }
    let problems = flagged_problems(r);
    let mut rows = Vec::new();
    for side in [Side::Source, Side::Load] {
        let mut failing = Vec::new();
        let mut worst: f64 = 0.0;
        for (f, p) in r.points(side) {
            let (pn_ok, _) = mfd_classify_pn(&p.zpn.m, a.tol)?;
            let (dq_ok, dq) = mfd_classify_dq(&p.zdq.m, a.tol)?;
            let ratio = offdiag_ratio(&p.zpn.m);
            let dq_ratio = dq.residual / p.zdq.m.max_abs();
            worst = worst.max(ratio);
            if !pn_ok {
                failing.push(f);
            }
            rows.push((side, f, ratio, dq_ratio, pn_ok, dq_ok));
        }
        if failing.is_empty() {
            println!("{side:?}: MFD at every point (max off-diagonal ratio {worst:.3e})");
        } else {
            println!(
                "{side:?}: not MFD at {} point(s) {:?} Hz (max off-diagonal ratio {worst:.3e})",
                failing.len(),
                failing
            );
        }
    }
    out.write_csv("mfd.csv", |w| {
        w.write_record(["side", "f_dq_Hz", "pn_offdiag_ratio", "dq_asymmetry_ratio", "mfd_pn", "mfd_dq"])?;
        for (side, f, ratio, dq_ratio, pn_ok, dq_ok) in &rows {
            w.write_record([
                format!("{side:?}").to_lowercase(),
                f12(*f),
                f12(*ratio),
                f12(*dq_ratio),
                pn_ok.to_string(),
                dq_ok.to_string(),
            ])?;
        }
        Ok(())
    })?;
    if let Some(f) = a.single {
        let case = &r.metadata.config;
        let (src, load) = single_measurement(case, r.metadata.injection, f)?;
        for (side, st) in [(Side::Source, src), (Side::Load, load)] {
            let m = st.to_dq();
            let vs = r
                .points(side)
                .find(|(g, _)| *g == f)
                .map(|(_, p)| (m - p.zdq.m).frobenius() / p.zdq.m.frobenius());
            println!(
                "single-run {side:?} at {f} Hz: Z_x = {:.6}{:+.6}j, Z_y = {:.6}{:+.6}j{}",
                st.zx.re,
                st.zx.im,
                st.zy.re,
                st.zy.im,
                vs.map_or(String::new(), |d| format!(", vs two-run sweep {d:.3e}"))
            );
        }
    }
    out.finish(&loaded.origin, &r.metadata.config)?;
    Ok(problems)
}

fn parse_schedule(text: &str, end: Option<f64>) -> Result<StepSchedule> {
    let mut steps = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (t, i) = item
            .split_once(':')
            .with_context(|| format!("schedule item {item:?}: expected t:i_dc"))?;
        steps.push(DcStep {
            t: t.trim().parse().with_context(|| format!("schedule time {t:?}"))?,
            i_dc: i.trim().parse().with_context(|| format!("schedule current {i:?}"))?,
        });
    }
    let last = steps.last().context("empty schedule")?.t;
    Ok(StepSchedule {
        steps,
        end: end.unwrap_or(last + 2.5),
    })
}

#[derive(Serialize)]
struct StepReport<'a> {
    schema_version: u32,
    case: &'a str,
    schedule: &'a StepSchedule,
    dt: f64,
    dt_record: f64,
    divergence_time: Option<f64>,
    segments: &'a [mirrorfreq::sim::step::SegmentReport],
}

pub fn step_sim(ctx: &Context, a: &StepArgs) -> Result<Problems> {
    let rc = resolve_case(&a.case)?;
    let ModelConfig::Converter(cfg) = rc.case.model else {
        bail!("step-sim needs a converter case, not {}", rc.case.name);
    };
    let schedule = match (&a.schedule, a.hold) {
        (Some(s), _) => parse_schedule(s, a.end)?,
        (None, Some(i)) => StepSchedule::hold(i, a.end.unwrap_or(5.0)),
        (None, None) => {
            let mut s = StepSchedule::default_ramp();
            if let Some(e) = a.end {
                s.end = e;
            }
            s
        }
    };
    if a.record_every == 0 {
        bail!("--record-every must be at least 1");
    }
    let model = ConverterModel::new(cfg)?;
    let res = run_step_test(&model, &schedule, a.dt, a.record_every, rc.case.sim.divergence_limit)?;
    for s in &res.segments {
        let mode = s
            .linear_mode
            .map_or(String::new(), |[re, im]| format!(", linear mode {re:.2} +/- j{im:.1} 1/s"));
        println!(
            "{:.3}-{:.3} s at {} pu: {:?}{}{}",
            s.t_start,
            s.t_end,
            s.i_dc,
            s.trend,
            s.growth_rate.map_or(String::new(), |g| format!(", envelope rate {g:.2} 1/s")),
            mode
        );
    }
    match res.divergence_time {
        Some(t) => println!("diverged at {t:.4} s"),
        None => println!("no divergence"),
    }
    let mut out = ctx.writer(&a.out)?;
    out.write_csv("step.csv", |w| {
        w.write_record(["t_s", "i_sd_pu", "i_sq_pu", "v_dc_pu"])?;
        for k in 0..res.t.len() {
            w.write_record([f12(res.t[k]), f12(res.i_sd[k]), f12(res.i_sq[k]), f12(res.v_dc[k])])?;
        }
        Ok(())
    })?;
    out.write_json(
        "step.json",
        &StepReport {
            schema_version: 1,
            case: &rc.case.name,
            schedule: &schedule,
            dt: a.dt,
            dt_record: res.dt_record,
            divergence_time: res.divergence_time,
            segments: &res.segments,
        },
    )?;
    out.finish(&rc.origin, &rc.case)?;
    Ok(Vec::new())
}

pub fn dump_config(a: &DumpArgs) -> Result<Problems> {
    let rc = resolve_case(&a.case)?;
    let text = dump(&rc.case);
    match &a.out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(Vec::new())
}

fn dump(case: &Case) -> String {
    case.to_json() + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_parsing() {
        let s = parse_schedule("0:1.0, 0.5:1.1", None).unwrap();
        assert_eq!(s.steps.len(), 2);
        assert_eq!(s.steps[1].i_dc, 1.1);
        assert_eq!(s.end, 3.0);
        assert!(parse_schedule("0=1", None).is_err());
        assert!(parse_schedule("", None).is_err());
    }
}

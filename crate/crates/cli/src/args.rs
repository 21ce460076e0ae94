use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mirrorfreq::sweep::{grid_between, linear_grid, merge_grids, Sides, DEFAULT_GRID};
use mirrorfreq::{Case, Domain, Injection, Preset};

#[derive(Parser, Debug)]
#[command(name = "mirrorfreq", version, about = "Impedance sweeps, domain transforms and GNC stability checks")]
pub struct Cli {
    /// Worker threads for sweep points. MIRRORFREQ_THREADS takes precedence.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Measure source and load impedance matrices over a frequency grid.
    Sweep(SweepArgs),
    /// Characteristic loci and encirclement count of the minor-loop gain.
    Gnc(GncArgs),
    /// Original sequence impedances: direct simulation vs closed forms.
    CompareOriginal(CompareArgs),
    /// Mirror-frequency decoupling check of both subsystems.
    MfdCheck(MfdArgs),
    /// Time-domain DC-load step test.
    StepSim(StepArgs),
    /// Run the built-in invariant checks and print a scoreboard.
    Validate(ValidateArgs),
    /// Print a case configuration as JSON.
    DumpConfig(DumpArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InjectionArg {
    Shunt,
    Series,
}

impl From<InjectionArg> for Injection {
    fn from(v: InjectionArg) -> Self {
        match v {
            InjectionArg::Shunt => Injection::Shunt,
            InjectionArg::Series => Injection::Series,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SidesArg {
    Both,
    Source,
    Load,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DomainArg {
    Dq,
    Pn,
    Original,
    All,
}

impl DomainArg {
    pub fn domains(self) -> Vec<Domain> {
        match self {
            DomainArg::Dq => vec![Domain::Dq],
            DomainArg::Pn => vec![Domain::Pn],
            DomainArg::Original => vec![Domain::Original],
            DomainArg::All => vec![Domain::Dq, Domain::Pn, Domain::Original],
        }
    }
}

/// Case selection and sweep settings shared by the measuring commands.
#[derive(Args, Debug, Clone)]
pub struct CaseArgs {
    /// Preset (A1, A2, B, oracle-rl) or path to a case JSON file.
    #[arg(long, default_value = "A1")]
    pub case: String,
    /// Comma-separated frequencies in Hz; `a:b:step` expands to a range.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub fmin: Option<f64>,
    #[arg(long)]
    pub fmax: Option<f64>,
    /// Injection amplitude override, pu.
    #[arg(long)]
    pub amplitude: Option<f64>,
    #[arg(long, value_enum, default_value = "both")]
    pub sides: SidesArg,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub case: CaseArgs,
    #[arg(long, value_enum, default_value = "shunt")]
    pub injection: InjectionArg,
    #[arg(long, default_value = "mirrorfreq-out")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct GncArgs {
    /// Previously written sweep JSON. Without it a sweep is run.
    #[arg(long)]
    pub sweep: Option<PathBuf>,
    #[command(flatten)]
    pub case: CaseArgs,
    #[arg(long, value_enum, default_value = "shunt")]
    pub injection: InjectionArg,
    #[arg(long, value_enum, default_value = "all")]
    pub domain: DomainArg,
    #[arg(long, default_value = "mirrorfreq-out")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CompareInjection {
    Shunt,
    Series,
    Both,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Sweep JSON files; repeat for shunt and series results.
    #[arg(long)]
    pub sweep: Vec<PathBuf>,
    #[command(flatten)]
    pub case: CaseArgs,
    #[arg(long, value_enum, default_value = "both")]
    pub injection: CompareInjection,
    #[arg(long, default_value = "mirrorfreq-out")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct MfdArgs {
    #[arg(long)]
    pub sweep: Option<PathBuf>,
    #[command(flatten)]
    pub case: CaseArgs,
    #[arg(long, value_enum, default_value = "shunt")]
    pub injection: InjectionArg,
    /// Relative off-diagonal tolerance.
    #[arg(long, default_value_t = 0.05)]
    pub tol: f64,
    /// Also run the combined single-run measurement at this frequency.
    #[arg(long)]
    pub single: Option<f64>,
    #[arg(long, default_value = "mirrorfreq-out")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct StepArgs {
    #[arg(long, default_value = "A1")]
    pub case: String,
    /// `t:i_dc` pairs, e.g. `0:1.0,0.5:1.1,2.5:1.2`. Defaults to that ramp.
    #[arg(long, conflicts_with = "hold")]
    pub schedule: Option<String>,
    /// Step from 1.0 pu to this DC current at 0.5 s and hold.
    #[arg(long)]
    pub hold: Option<f64>,
    /// End time, s.
    #[arg(long)]
    pub end: Option<f64>,
    /// Integration step, s.
    #[arg(long, default_value_t = 20e-6)]
    pub dt: f64,
    /// Keep every n-th sample.
    #[arg(long, default_value_t = 50)]
    pub record_every: usize,
    #[arg(long, default_value = "mirrorfreq-out")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Fault {
    /// Perturb the forward transformation matrix only.
    Az,
    /// Bias the oracle branch impedance by 1%.
    OracleBias,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    /// Negative control: inject a fault the checks must catch.
    #[arg(long, value_enum)]
    pub fault: Option<Fault>,
    /// Random matrices per algebraic check.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
}

#[derive(Args, Debug)]
pub struct DumpArgs {
    #[arg(long, default_value = "A1")]
    pub case: String,
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A case and where it came from.
#[derive(Clone, Debug)]
pub struct ResolvedCase {
    pub case: Case,
    /// `preset:NAME` or the file path.
    pub origin: String,
}

pub fn resolve_case(spec: &str) -> Result<ResolvedCase> {
    if let Some(p) = Preset::parse(spec) {
        return Ok(ResolvedCase {
            case: p.case(),
            origin: format!("preset:{}", p.name()),
        });
    }
    let text = std::fs::read_to_string(spec)
        .with_context(|| format!("--case {spec:?} is neither a preset (A1, A2, B, oracle-rl) nor a readable file"))?;
    let case = mirrorfreq::Case::from_json(&text).with_context(|| format!("case file {spec}"))?;
    Ok(ResolvedCase {
        case,
        origin: spec.to_string(),
    })
}

pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let mut out: Vec<f64> = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        let num = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .with_context(|| format!("grid item {item:?}: {s:?} is not a number"))
        };
        match parts.as_slice() {
            [f] => out.push(num(f)?),
            [a, b, step] => {
                let (a, b, step) = (num(a)?, num(b)?, num(step)?);
                if !(step > 0.0) || b < a {
                    bail!("grid range {item:?} needs a <= b and step > 0");
                }
                out.extend(linear_grid(a, b, step));
            }
            _ => bail!("grid item {item:?}: expected a number or a:b:step"),
        }
    }
    if out.is_empty() {
        bail!("empty grid");
    }
    Ok(merge_grids(&out, &[]))
}

impl CaseArgs {
    pub fn resolve(&self) -> Result<ResolvedCase> {
        let mut rc = resolve_case(&self.case)?;
        if let Some(a) = self.amplitude {
            rc.case.sim.amplitude = a;
            rc.case.validate().context("--amplitude")?;
        }
        Ok(rc)
    }

    pub fn grid(&self) -> Result<Vec<f64>> {
        let base = match &self.grid {
            Some(g) => parse_grid(g)?,
            None => DEFAULT_GRID.to_vec(),
        };
        let lo = self.fmin.unwrap_or(f64::NEG_INFINITY);
        let hi = self.fmax.unwrap_or(f64::INFINITY);
        let g = grid_between(&base, lo, hi);
        if g.is_empty() {
            bail!("no grid points between --fmin and --fmax");
        }
        Ok(g)
    }

    pub fn sides(&self) -> Sides {
        match self.sides {
            SidesArg::Both => Sides::Both,
            SidesArg::Source => Sides::Source,
            SidesArg::Load => Sides::Load,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_ranges_and_lists() {
        assert_eq!(parse_grid("10, 2,4:8:2").unwrap(), vec![2.0, 4.0, 6.0, 8.0, 10.0]);
        assert_eq!(parse_grid("1:2:0.5").unwrap(), vec![1.0, 1.5, 2.0]);
        assert!(parse_grid("5:1:1").is_err());
        assert!(parse_grid("x").is_err());
        assert!(parse_grid("").is_err());
    }

    #[test]
    fn presets_resolve_case_insensitively() {
        assert_eq!(resolve_case("a2").unwrap().origin, "preset:A2");
        assert!(resolve_case("/nonexistent/case.json").is_err());
    }
}

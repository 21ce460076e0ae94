//! Impedance extraction in the dq and modified sequence domains, domain
//! transforms, mirror-frequency analysis and Generalized Nyquist Criterion
//! stability checks, with an averaged converter simulator to measure from.

pub mod cmat;
pub mod error;
pub mod impedance;
pub mod phasor;
pub mod sim;
pub mod stability;
pub mod sweep;

pub use cmat::{Cplx, Mat2, C64};
pub use error::{Error, Result};
pub use impedance::{
    dq_to_pn, pn_to_dq, zdq_to_zpn, zpn_to_zdq, ImpedanceDq, ImpedancePn, Injection, MfdStructure,
    Sequence, Side,
};
pub use phasor::{Frame, HarmonicPhasor, ThreePhaseSeries, Window};
pub use sim::{Case, CaseConfig, InjectionSpec, Preset, SimRecord, SimSettings};
pub use stability::{Domain, GncVerdict, NyquistLoci, VerdictStatus};
pub use sweep::{run_sweep, SweepEntry, SweepPlan, SweepResult};

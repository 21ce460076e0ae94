//! Case parameterization, presets and validation.

use serde::{Deserialize, Serialize};

use crate::cmat::{Cplx, C64};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseValues {
    /// V, line-to-line rms.
    pub v_base: f64,
    /// W.
    pub s_base: f64,
    /// V.
    pub v_dc_base: f64,
    /// Hz.
    pub f_n: f64,
}

impl BaseValues {
    pub fn omega_base(&self) -> f64 {
        std::f64::consts::TAU * self.f_n
    }
}

/// Synchronization of a converter's control frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SyncMode {
    /// Angle `2 pi f_n t`, no dynamics.
    FixedRamp,
    /// SRF-PLL: `dx/dt = ki vq`, `d delta/dt = kp vq + x` (rad/s per pu).
    Pll { kp: f64, ki: f64 },
}

impl SyncMode {
    /// PLL with natural frequency `f_bw` (Hz) and damping `zeta`.
    pub fn pll_tuned(f_bw: f64, zeta: f64) -> SyncMode {
        let w = std::f64::consts::TAU * f_bw;
        SyncMode::Pll {
            kp: 2.0 * zeta * w,
            ki: w * w,
        }
    }
}

/// PI gains of a dq controller pair, `K_p (1 + 1/(T_i s))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiPair {
    pub k_pd: f64,
    pub k_pq: f64,
    pub t_id: f64,
    pub t_iq: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VirtualInductance {
    pub l_vd: f64,
    pub l_vq: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoltageSetpoints {
    pub v_d: f64,
    pub v_q: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    pub z_s: Cplx,
    pub v_sdc: f64,
    #[serde(rename = "virtual")]
    pub virtual_l: VirtualInductance,
    pub voltage_ctrl: PiPair,
    pub setpoints: VoltageSetpoints,
    pub sync: SyncMode,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LoadMode {
    /// DC-link voltage loop feeding the d-current reference; constant
    /// current sink `i_dc` on the DC side.
    DcVoltageCtrl {
        /// F.
        c_dc: f64,
        k_pvdc: f64,
        t_ivdc: f64,
        v_ldc_ref: f64,
        i_dc: f64,
        i_lq_ref: f64,
        /// First-order filter on the measured DC voltage, s.
        dc_filter_tau: f64,
        sync: SyncMode,
    },
    /// Fixed current references, constant DC voltage.
    CurrentCtrl {
        i_ld_ref: f64,
        i_lq_ref: f64,
        sync: SyncMode,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadConfig {
    pub z_l: Cplx,
    pub current_ctrl: PiPair,
    pub mode: LoadMode,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterfaceConfig {
    /// Output filter capacitor of the source converter, pu susceptance at f_n.
    pub b_c: f64,
    /// Damping resistor in series with the capacitor, pu.
    pub r_d: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseConfig {
    pub base: BaseValues,
    pub source: SourceConfig,
    pub load: LoadConfig,
    pub interface: InterfaceConfig,
}

/// Ideal voltage source behind a series R-L branch, loaded by a resistor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub f_n: f64,
    pub r: f64,
    /// `w_n L` in pu.
    pub x: f64,
    pub r_load: f64,
    pub v_source: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            f_n: 50.0,
            r: 0.02,
            x: 0.25,
            r_load: 1.0,
            v_source: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Converter(CaseConfig),
    PassiveRl(OracleConfig),
}

impl ModelConfig {
    pub fn f1(&self) -> f64 {
        match self {
            ModelConfig::Converter(c) => c.base.f_n,
            ModelConfig::PassiveRl(o) => o.f_n,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    /// RK4 step, s.
    pub dt: f64,
    /// Time before the measurement window, s.
    pub settle: f64,
    /// Measurement window length, s.
    pub window: f64,
    /// Injection amplitude, pu peak per phase.
    pub amplitude: f64,
    /// Sample-wise tolerance of the steady-state gate, pu.
    pub gate_tol: f64,
    /// Any state above this magnitude aborts the run.
    pub divergence_limit: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            dt: 20e-6,
            settle: 0.4,
            window: 1.0,
            amplitude: 1e-3,
            gate_tol: 1e-5,
            divergence_limit: 1e3,
        }
    }
}

/// A complete, serializable simulation case.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub schema_version: u32,
    pub name: String,
    pub model: ModelConfig,
    pub sim: SimSettings,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    A1,
    A2,
    B,
    OracleRl,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::A1, Preset::A2, Preset::B, Preset::OracleRl];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::A1 => "A1",
            Preset::A2 => "A2",
            Preset::B => "B",
            Preset::OracleRl => "oracle-rl",
        }
    }

    pub fn parse(s: &str) -> Option<Preset> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
    }

    pub fn case(&self) -> Case {
        let model = match self {
            Preset::A1 => ModelConfig::Converter(case_a1()),
            Preset::A2 => ModelConfig::Converter(case_a2()),
            Preset::B => ModelConfig::Converter(case_b()),
            Preset::OracleRl => ModelConfig::PassiveRl(OracleConfig::default()),
        };
        Case {
            schema_version: SCHEMA_VERSION,
            name: self.name().to_string(),
            model,
            sim: SimSettings::default(),
        }
    }
}

pub const DEFAULT_PLL_HZ: f64 = 20.0;
pub const DEFAULT_PLL_ZETA: f64 = 0.7;
pub const DEFAULT_DC_FILTER: f64 = 0.5e-3;
pub const DEFAULT_BC: f64 = 0.08;
pub const DEFAULT_RD: f64 = 1.0;

fn c(re: f64, im: f64) -> Cplx {
    Cplx { re, im }
}

/// Case A1: grid-forming source with virtual inductance, DC-voltage
/// controlled load converter with PLL.
pub fn case_a1() -> CaseConfig {
    CaseConfig {
        base: BaseValues {
            v_base: 690.0,
            s_base: 1e6,
            v_dc_base: 1400.0,
            f_n: 50.0,
        },
        source: SourceConfig {
            z_s: c(0.007, 0.15),
            v_sdc: 1.0,
            virtual_l: VirtualInductance { l_vd: 0.0, l_vq: 0.2 },
            voltage_ctrl: PiPair {
                k_pd: 1.0,
                k_pq: 1.3,
                t_id: 0.1,
                t_iq: 0.2,
            },
            setpoints: VoltageSetpoints { v_d: 1.0, v_q: 0.0 },
            sync: SyncMode::FixedRamp,
        },
        load: LoadConfig {
            z_l: c(0.02, 0.25),
            current_ctrl: PiPair {
                k_pd: 1.59,
                k_pq: 2.07,
                t_id: 0.047,
                t_iq: 0.033,
            },
            mode: LoadMode::DcVoltageCtrl {
                c_dc: 11.5e-3,
                k_pvdc: 8.33,
                t_ivdc: 0.0036,
                v_ldc_ref: 1.0,
                i_dc: 1.1,
                i_lq_ref: 0.4,
                dc_filter_tau: DEFAULT_DC_FILTER,
                sync: SyncMode::pll_tuned(DEFAULT_PLL_HZ, DEFAULT_PLL_ZETA),
            },
        },
        interface: InterfaceConfig {
            b_c: DEFAULT_BC,
            r_d: DEFAULT_RD,
        },
    }
}

/// Case A2: A1 with equal virtual inductances and voltage controller gains.
pub fn case_a2() -> CaseConfig {
    let mut cfg = case_a1();
    cfg.source.virtual_l = VirtualInductance { l_vd: 0.1, l_vq: 0.1 };
    cfg.source.voltage_ctrl.k_pq = 1.0;
    cfg.source.voltage_ctrl.t_iq = 0.1;
    cfg
}

/// Case B: A2 source, current-controlled load without PLL or DC loop.
pub fn case_b() -> CaseConfig {
    let mut cfg = case_a2();
    cfg.load.current_ctrl.k_pq = 1.59;
    cfg.load.current_ctrl.t_iq = 0.047;
    cfg.load.mode = LoadMode::CurrentCtrl {
        i_ld_ref: 1.1,
        i_lq_ref: 0.4,
        sync: SyncMode::FixedRamp,
    };
    cfg
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be positive and finite, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be non-negative and finite, got {v}")))
    }
}

fn finite(field: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, "must be finite"))
    }
}

fn validate_pi(prefix: &str, pi: &PiPair) -> Result<()> {
    positive(&format!("{prefix}.k_pd"), pi.k_pd)?;
    positive(&format!("{prefix}.k_pq"), pi.k_pq)?;
    positive(&format!("{prefix}.t_id"), pi.t_id)?;
    positive(&format!("{prefix}.t_iq"), pi.t_iq)
}

fn validate_sync(prefix: &str, s: &SyncMode) -> Result<()> {
    if let SyncMode::Pll { kp, ki } = s {
        positive(&format!("{prefix}.kp"), *kp)?;
        positive(&format!("{prefix}.ki"), *ki)?;
    }
    Ok(())
}

impl CaseConfig {
    pub fn validate(&self) -> Result<()> {
        let b = &self.base;
        positive("base.v_base", b.v_base)?;
        positive("base.s_base", b.s_base)?;
        positive("base.v_dc_base", b.v_dc_base)?;
        positive("base.f_n", b.f_n)?;

        let s = &self.source;
        non_negative("source.z_s.re", s.z_s.re)?;
        positive("source.z_s.im", s.z_s.im)?;
        positive("source.v_sdc", s.v_sdc)?;
        non_negative("source.virtual.l_vd", s.virtual_l.l_vd)?;
        non_negative("source.virtual.l_vq", s.virtual_l.l_vq)?;
        validate_pi("source.voltage_ctrl", &s.voltage_ctrl)?;
        finite("source.setpoints.v_d", s.setpoints.v_d)?;
        finite("source.setpoints.v_q", s.setpoints.v_q)?;
        if s.sync != SyncMode::FixedRamp {
            return Err(Error::invalid("source.sync", "the grid-forming source uses a fixed ramp"));
        }

        let l = &self.load;
        non_negative("load.z_l.re", l.z_l.re)?;
        positive("load.z_l.im", l.z_l.im)?;
        validate_pi("load.current_ctrl", &l.current_ctrl)?;
        match &l.mode {
            LoadMode::DcVoltageCtrl {
                c_dc,
                k_pvdc,
                t_ivdc,
                v_ldc_ref,
                i_dc,
                i_lq_ref,
                dc_filter_tau,
                sync,
            } => {
                positive("load.mode.c_dc", *c_dc)?;
                positive("load.mode.k_pvdc", *k_pvdc)?;
                positive("load.mode.t_ivdc", *t_ivdc)?;
                positive("load.mode.v_ldc_ref", *v_ldc_ref)?;
                non_negative("load.mode.i_dc", *i_dc)?;
                finite("load.mode.i_lq_ref", *i_lq_ref)?;
                positive("load.mode.dc_filter_tau", *dc_filter_tau)?;
                validate_sync("load.mode.sync", sync)?;
            }
            LoadMode::CurrentCtrl {
                i_ld_ref,
                i_lq_ref,
                sync,
            } => {
                finite("load.mode.i_ld_ref", *i_ld_ref)?;
                finite("load.mode.i_lq_ref", *i_lq_ref)?;
                validate_sync("load.mode.sync", sync)?;
            }
        }
        positive("interface.b_c", self.interface.b_c)?;
        non_negative("interface.r_d", self.interface.r_d)
    }

    /// DC-link energy time constant `C V_dc,base^2 / S_base`, s.
    pub fn dc_time_constant(&self) -> Option<f64> {
        match self.load.mode {
            LoadMode::DcVoltageCtrl { c_dc, .. } => {
                Some(c_dc * self.base.v_dc_base.powi(2) / self.base.s_base)
            }
            LoadMode::CurrentCtrl { .. } => None,
        }
    }

    pub fn z_s(&self) -> C64 {
        self.source.z_s.into()
    }

    pub fn z_l(&self) -> C64 {
        self.load.z_l.into()
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        positive("model.f_n", self.f_n)?;
        non_negative("model.r", self.r)?;
        positive("model.x", self.x)?;
        positive("model.r_load", self.r_load)?;
        finite("model.v_source", self.v_source)
    }
}

impl SimSettings {
    pub fn validate(&self, f1: f64) -> Result<()> {
        positive("sim.dt", self.dt)?;
        positive("sim.settle", self.settle)?;
        positive("sim.window", self.window)?;
        positive("sim.amplitude", self.amplitude)?;
        positive("sim.gate_tol", self.gate_tol)?;
        positive("sim.divergence_limit", self.divergence_limit)?;
        let per_step = |t: f64| t / self.dt;
        for (field, t) in [("sim.settle", self.settle), ("sim.window", self.window)] {
            let n = per_step(t);
            if (n - n.round()).abs() > 1e-6 {
                return Err(Error::invalid(field, "must be an integer number of steps"));
            }
        }
        if (self.window - self.window.round()).abs() > 1e-9 {
            return Err(Error::invalid(
                "sim.window",
                "must be a whole number of seconds so every 1 Hz grid tone is periodic in it",
            ));
        }
        if self.settle < 2.0 / f1 {
            return Err(Error::invalid("sim.settle", "must cover at least two fundamental periods"));
        }
        if self.dt > 0.05 / f1 {
            return Err(Error::invalid("sim.dt", "too coarse for the fundamental"));
        }
        Ok(())
    }
}

impl Case {
    /// Parses and validates a case document.
    pub fn from_json(text: &str) -> Result<Self> {
        let case: Case = serde_json::from_str(text)
            .map_err(|e| Error::invalid("case", format!("malformed json: {e}")))?;
        case.validate()?;
        Ok(case)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("case serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        match &self.model {
            ModelConfig::Converter(c) => c.validate()?,
            ModelConfig::PassiveRl(o) => o.validate()?,
        }
        self.sim.validate(self.model.f1())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_and_field_errors() {
        let case = Preset::A1.case();
        assert_eq!(Case::from_json(&case.to_json()).unwrap(), case);
        let mut bad = case;
        bad.sim.dt = -1.0;
        let err = Case::from_json(&bad.to_json()).unwrap_err().to_string();
        assert!(err.contains("sim.dt"), "{err}");
    }

    #[test]
    fn presets_validate() {
        for p in Preset::ALL {
            p.case().validate().unwrap();
        }
    }

    #[test]
    fn a1_parameters() {
        let a1 = case_a1();
        assert_eq!(a1.source.virtual_l.l_vd, 0.0);
        assert_eq!(a1.source.virtual_l.l_vq, 0.2);
        assert_eq!(a1.source.voltage_ctrl.k_pq, 1.3);
        assert!((a1.dc_time_constant().unwrap() - 0.02254).abs() < 1e-12);
    }

    #[test]
    fn a2_differs_only_in_source_voltage_control() {
        let (a1, a2) = (case_a1(), case_a2());
        assert_eq!(a2.source.virtual_l, VirtualInductance { l_vd: 0.1, l_vq: 0.1 });
        assert_eq!(a2.source.voltage_ctrl.k_pd, 1.0);
        assert_eq!(a2.source.voltage_ctrl.k_pq, 1.0);
        assert_eq!(a2.source.voltage_ctrl.t_id, 0.1);
        assert_eq!(a2.source.voltage_ctrl.t_iq, 0.1);
        assert_eq!(a1.load, a2.load);
        assert_eq!(a1.base, a2.base);
    }

    #[test]
    fn b_has_no_pll_and_no_dc_loop() {
        let b = case_b();
        assert_eq!(b.load.current_ctrl.k_pq, 1.59);
        assert_eq!(b.load.current_ctrl.t_iq, 0.047);
        assert!(matches!(
            b.load.mode,
            LoadMode::CurrentCtrl { i_ld_ref, sync: SyncMode::FixedRamp, .. } if i_ld_ref == 1.1
        ));
        assert_eq!(b.source, case_a2().source);
    }

    #[test]
    fn validation_names_the_field() {
        let mut cfg = case_a1();
        cfg.load.current_ctrl.t_iq = 0.0;
        match cfg.validate() {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "load.current_ctrl.t_iq"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn json_round_trip() {
        let case = Preset::A1.case();
        let s = serde_json::to_string_pretty(&case).unwrap();
        assert!(s.contains("\"kind\": \"converter\""));
        let back: Case = serde_json::from_str(&s).unwrap();
        assert_eq!(back, case);
    }

    #[test]
    fn preset_names_parse() {
        assert_eq!(Preset::parse("a2"), Some(Preset::A2));
        assert_eq!(Preset::parse("oracle-rl"), Some(Preset::OracleRl));
        assert_eq!(Preset::parse("C"), None);
    }
}

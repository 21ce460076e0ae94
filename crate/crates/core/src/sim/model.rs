//! Averaged state-space models in a global dq frame rotating at the
//! fundamental. All quantities are per unit; time is in seconds.

use crate::error::Result;
use crate::impedance::Injection;

use super::config::{CaseConfig, LoadMode, ModelConfig, OracleConfig, SyncMode};

/// Perturbation applied at the interface, already in the global dq frame:
/// a shunt current into the interface node or a series voltage raising the
/// source-side terminal above the load side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Input {
    pub kind: Injection,
    pub dq: [f64; 2],
}

impl Input {
    pub fn none() -> Self {
        Input {
            kind: Injection::Shunt,
            dq: [0.0; 2],
        }
    }

    fn shunt(&self) -> [f64; 2] {
        match self.kind {
            Injection::Shunt => self.dq,
            Injection::Series => [0.0; 2],
        }
    }

    fn series(&self) -> [f64; 2] {
        match self.kind {
            Injection::Series => self.dq,
            Injection::Shunt => [0.0; 2],
        }
    }
}

/// Interface voltages and currents, each current taken as flowing into its
/// subsystem, so `V_S = Z_S I_S` and `V_L = Z_L I_L` for the perturbations.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Terminals {
    pub v_s: [f64; 2],
    pub v_l: [f64; 2],
    pub i_s: [f64; 2],
    pub i_l: [f64; 2],
}

pub trait Plant: Send + Sync {
    fn f1(&self) -> f64;
    fn state_names(&self) -> &'static [&'static str];
    /// States that evolve; the rest stay at their initial value.
    fn active(&self) -> &[bool];
    fn initial_guess(&self) -> Vec<f64>;
    fn derivatives(&self, x: &[f64], u: &Input, dx: &mut [f64]);
    fn terminals(&self, x: &[f64], u: &Input) -> Terminals;
    /// Indices of states recorded as auxiliary channels.
    fn aux_states(&self) -> &'static [usize];

    fn n_states(&self) -> usize {
        self.state_names().len()
    }
}

#[inline]
fn rot(v: [f64; 2], ang: f64) -> [f64; 2] {
    let (s, c) = ang.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

/// `J v` with `J = [[0, -1], [1, 0]]`.
#[inline]
fn jmul(v: [f64; 2]) -> [f64; 2] {
    [-v[1], v[0]]
}

pub mod idx {
    pub const IS_D: usize = 0;
    pub const IS_Q: usize = 1;
    pub const VC_D: usize = 2;
    pub const VC_Q: usize = 3;
    pub const IL_D: usize = 4;
    pub const IL_Q: usize = 5;
    pub const XV_D: usize = 6;
    pub const XV_Q: usize = 7;
    pub const XI_D: usize = 8;
    pub const XI_Q: usize = 9;
    pub const X_DC: usize = 10;
    pub const V_DC: usize = 11;
    pub const X_PLL: usize = 12;
    pub const DELTA: usize = 13;
    pub const V_M: usize = 14;
    pub const N: usize = 15;
}

const CONVERTER_STATES: [&str; idx::N] = [
    "i_sd", "i_sq", "v_cd", "v_cq", "i_ld", "i_lq", "x_vd", "x_vq", "x_id", "x_iq", "x_dc",
    "v_dc", "x_pll", "delta", "v_dc_meas",
];

/// Grid-forming source converter feeding a current-controlled load
/// converter through a shunt capacitor at the load terminals.
///
/// The source regulates its internal converter voltage with PI controllers
/// on the reference `v* + L_v` cross-coupled current drop; `Z_S` sits
/// between that voltage and the interface. The load regulates its current
/// in the PLL frame with cross-coupling decoupling, and its d reference
/// comes from the DC-link voltage loop when present.
#[derive(Clone, Debug, PartialEq)]
pub struct ConverterModel {
    pub cfg: CaseConfig,
    omega_b: f64,
    active: [bool; idx::N],
    pll: Option<(f64, f64)>,
    dc: Option<DcLink>,
    i_ref: [f64; 2],
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct DcLink {
    c_t: f64,
    k_p: f64,
    t_i: f64,
    v_ref: f64,
    i_dc: f64,
    tau: f64,
}

impl ConverterModel {
    pub fn new(cfg: CaseConfig) -> Result<Self> {
        cfg.validate()?;
        let mut active = [true; idx::N];
        let (sync, dc, i_ref) = match cfg.load.mode {
            LoadMode::DcVoltageCtrl {
                k_pvdc,
                t_ivdc,
                v_ldc_ref,
                i_dc,
                i_lq_ref,
                dc_filter_tau,
                sync,
                ..
            } => (
                sync,
                Some(DcLink {
                    c_t: cfg.dc_time_constant().unwrap_or(1.0),
                    k_p: k_pvdc,
                    t_i: t_ivdc,
                    v_ref: v_ldc_ref,
                    i_dc,
                    tau: dc_filter_tau,
                }),
                [0.0, i_lq_ref],
            ),
            LoadMode::CurrentCtrl {
                i_ld_ref,
                i_lq_ref,
                sync,
            } => (sync, None, [i_ld_ref, i_lq_ref]),
        };
        let pll = match sync {
            SyncMode::Pll { kp, ki } => Some((kp, ki)),
            SyncMode::FixedRamp => None,
        };
        if pll.is_none() {
            active[idx::X_PLL] = false;
            active[idx::DELTA] = false;
        }
        if dc.is_none() {
            active[idx::X_DC] = false;
            active[idx::V_DC] = false;
            active[idx::V_M] = false;
        }
        Ok(ConverterModel {
            omega_b: cfg.base.omega_base(),
            cfg,
            active,
            pll,
            dc,
            i_ref,
        })
    }

    /// Load DC current, if the load has a DC link.
    pub fn i_dc(&self) -> Option<f64> {
        self.dc.map(|d| d.i_dc)
    }

    /// Same model with a different DC load current.
    pub fn with_i_dc(&self, i_dc: f64) -> Self {
        let mut m = self.clone();
        if let Some(dc) = m.dc.as_mut() {
            dc.i_dc = i_dc;
        }
        if let LoadMode::DcVoltageCtrl { i_dc: ref mut v, .. } = m.cfg.load.mode {
            *v = i_dc;
        }
        m
    }
}

impl Plant for ConverterModel {
    fn f1(&self) -> f64 {
        self.cfg.base.f_n
    }

    fn state_names(&self) -> &'static [&'static str] {
        &CONVERTER_STATES
    }

    fn active(&self) -> &[bool] {
        &self.active
    }

    fn initial_guess(&self) -> Vec<f64> {
        let mut x = vec![0.0; idx::N];
        let sp = self.cfg.source.setpoints;
        x[idx::IS_D] = 1.0;
        x[idx::VC_D] = sp.v_d;
        x[idx::VC_Q] = sp.v_q;
        x[idx::IL_D] = 1.0;
        x[idx::IL_Q] = self.i_ref[1];
        x[idx::XV_D] = sp.v_d;
        x[idx::XV_Q] = sp.v_q;
        x[idx::XI_D] = -sp.v_d;
        if let Some(dc) = self.dc {
            x[idx::V_DC] = dc.v_ref;
            x[idx::V_M] = dc.v_ref;
            x[idx::X_DC] = dc.i_dc;
        }
        x
    }

    fn derivatives(&self, x: &[f64], u: &Input, dx: &mut [f64]) {
        let cfg = &self.cfg;
        let wb = self.omega_b;
        let i_s = [x[idx::IS_D], x[idx::IS_Q]];
        let v_c = [x[idx::VC_D], x[idx::VC_Q]];
        let i_l = [x[idx::IL_D], x[idx::IL_Q]];
        let i_inj = u.shunt();
        let i_c = [i_s[0] + i_inj[0] - i_l[0], i_s[1] + i_inj[1] - i_l[1]];
        let r_d = cfg.interface.r_d;
        let v = [v_c[0] + r_d * i_c[0], v_c[1] + r_d * i_c[1]];

        // Source converter.
        let src = &cfg.source;
        let vc_ctrl = src.voltage_ctrl;
        let v_ref = [
            src.setpoints.v_d + src.virtual_l.l_vq * i_s[1],
            src.setpoints.v_q - src.virtual_l.l_vd * i_s[0],
        ];
        let kpv = [vc_ctrl.k_pd, vc_ctrl.k_pq];
        let tiv = [vc_ctrl.t_id, vc_ctrl.t_iq];
        let xv = [x[idx::XV_D], x[idx::XV_Q]];
        let mut e_s = [0.0; 2];
        for k in 0..2 {
            e_s[k] = (kpv[k] * v_ref[k] + xv[k]) / (1.0 + kpv[k]);
            dx[idx::XV_D + k] = kpv[k] / tiv[k] * (v_ref[k] - e_s[k]);
        }
        let (rs, xs) = (src.z_s.re, src.z_s.im);
        let jis = jmul(i_s);
        for k in 0..2 {
            dx[idx::IS_D + k] = (e_s[k] - v[k] - rs * i_s[k] - xs * jis[k]) * wb / xs;
        }

        // Load converter in its own frame.
        let delta = if self.pll.is_some() { x[idx::DELTA] } else { 0.0 };
        let e_inj = u.series();
        let v_l = [v[0] + e_inj[0], v[1] + e_inj[1]];
        let vp = rot(v_l, -delta);
        let ip = rot(i_l, -delta);
        let mut i_ref = self.i_ref;
        if let Some(dc) = self.dc {
            let err = dc.v_ref - x[idx::V_M];
            i_ref[0] = dc.k_p * err + x[idx::X_DC];
            dx[idx::X_DC] = dc.k_p / dc.t_i * err;
        } else {
            dx[idx::X_DC] = 0.0;
        }
        let cc = cfg.load.current_ctrl;
        let kpi = [cc.k_pd, cc.k_pq];
        let tii = [cc.t_id, cc.t_iq];
        let (rl, xl) = (cfg.load.z_l.re, cfg.load.z_l.im);
        let jip = jmul(ip);
        let mut e_p = [0.0; 2];
        for k in 0..2 {
            let err = i_ref[k] - ip[k];
            let out = kpi[k] * err + x[idx::XI_D + k];
            dx[idx::XI_D + k] = kpi[k] / tii[k] * err;
            e_p[k] = -out - xl * jip[k];
        }
        let e_l = rot(e_p, delta);
        let jil = jmul(i_l);
        for k in 0..2 {
            dx[idx::IL_D + k] = (v_l[k] - e_l[k] - rl * i_l[k] - xl * jil[k]) * wb / xl;
        }

        // Filter capacitor.
        let bc = cfg.interface.b_c;
        let jvc = jmul(v_c);
        for k in 0..2 {
            dx[idx::VC_D + k] = (i_c[k] - bc * jvc[k]) * wb / bc;
        }

        if let Some(dc) = self.dc {
            let v_dc = x[idx::V_DC];
            let p = e_l[0] * i_l[0] + e_l[1] * i_l[1];
            dx[idx::V_DC] = (p / v_dc - dc.i_dc) / dc.c_t;
            dx[idx::V_M] = (v_dc - x[idx::V_M]) / dc.tau;
        } else {
            dx[idx::V_DC] = 0.0;
            dx[idx::V_M] = 0.0;
        }

        if let Some((kp, ki)) = self.pll {
            dx[idx::X_PLL] = ki * vp[1];
            dx[idx::DELTA] = kp * vp[1] + x[idx::X_PLL];
        } else {
            dx[idx::X_PLL] = 0.0;
            dx[idx::DELTA] = 0.0;
        }
    }

    fn terminals(&self, x: &[f64], u: &Input) -> Terminals {
        let i_s = [x[idx::IS_D], x[idx::IS_Q]];
        let i_l = [x[idx::IL_D], x[idx::IL_Q]];
        let i_inj = u.shunt();
        let r_d = self.cfg.interface.r_d;
        let v = [
            x[idx::VC_D] + r_d * (i_s[0] + i_inj[0] - i_l[0]),
            x[idx::VC_Q] + r_d * (i_s[1] + i_inj[1] - i_l[1]),
        ];
        terminals_common(v, i_l, u)
    }

    fn aux_states(&self) -> &'static [usize] {
        &[
            idx::IS_D,
            idx::IS_Q,
            idx::V_DC,
            idx::DELTA,
            idx::X_PLL,
            idx::X_DC,
            idx::XV_D,
            idx::XV_Q,
            idx::XI_D,
            idx::XI_Q,
        ]
    }
}

/// `v_src` is the voltage at the source terminal and `i_load` the current
/// entering the load. A series source sits between the two terminals.
fn terminals_common(v_src: [f64; 2], i_load: [f64; 2], u: &Input) -> Terminals {
    match u.kind {
        Injection::Shunt => Terminals {
            v_s: v_src,
            v_l: v_src,
            i_s: [u.dq[0] - i_load[0], u.dq[1] - i_load[1]],
            i_l: i_load,
        },
        Injection::Series => Terminals {
            v_s: v_src,
            v_l: [v_src[0] + u.dq[0], v_src[1] + u.dq[1]],
            i_s: [-i_load[0], -i_load[1]],
            i_l: i_load,
        },
    }
}

const RL_STATES: [&str; 2] = ["i_sd", "i_sq"];

/// Ideal voltage source behind a series R-L branch, loaded by a resistor.
/// The source subsystem is the R-L branch with its source, so its exact
/// impedance is known in closed form.
#[derive(Clone, Debug, PartialEq)]
pub struct PassiveRl {
    pub cfg: OracleConfig,
    omega_b: f64,
}

impl PassiveRl {
    pub fn new(cfg: OracleConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(PassiveRl {
            omega_b: std::f64::consts::TAU * cfg.f_n,
            cfg,
        })
    }

    fn load_current(&self, i_s: [f64; 2], u: &Input) -> [f64; 2] {
        let i = u.shunt();
        [i_s[0] + i[0], i_s[1] + i[1]]
    }

    /// Voltage at the source terminal.
    fn source_voltage(&self, i_s: [f64; 2], u: &Input) -> [f64; 2] {
        let il = self.load_current(i_s, u);
        let e = u.series();
        let r = self.cfg.r_load;
        [r * il[0] - e[0], r * il[1] - e[1]]
    }
}

impl Plant for PassiveRl {
    fn f1(&self) -> f64 {
        self.cfg.f_n
    }

    fn state_names(&self) -> &'static [&'static str] {
        &RL_STATES
    }

    fn active(&self) -> &[bool] {
        &[true, true]
    }

    fn initial_guess(&self) -> Vec<f64> {
        vec![0.0; 2]
    }

    fn derivatives(&self, x: &[f64], u: &Input, dx: &mut [f64]) {
        let i_s = [x[0], x[1]];
        let v = self.source_voltage(i_s, u);
        let OracleConfig { r, x: xl, v_source, .. } = self.cfg;
        let ji = jmul(i_s);
        let src = [v_source, 0.0];
        for k in 0..2 {
            dx[k] = (src[k] - v[k] - r * i_s[k] - xl * ji[k]) * self.omega_b / xl;
        }
    }

    fn terminals(&self, x: &[f64], u: &Input) -> Terminals {
        let i_s = [x[0], x[1]];
        terminals_common(self.source_voltage(i_s, u), self.load_current(i_s, u), u)
    }

    fn aux_states(&self) -> &'static [usize] {
        &[]
    }
}

/// Builds the plant described by a model configuration.
pub fn build_model(cfg: &ModelConfig) -> Result<Box<dyn Plant>> {
    Ok(match cfg {
        ModelConfig::Converter(c) => Box::new(ConverterModel::new(*c)?),
        ModelConfig::PassiveRl(o) => Box::new(PassiveRl::new(*o)?),
    })
}

/// Oracle model with the given branch parameters and default load.
pub fn passive_oracle_model(r: f64, x: f64) -> Result<PassiveRl> {
    PassiveRl::new(OracleConfig {
        r,
        x,
        ..OracleConfig::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::{case_a1, case_b};

    #[test]
    fn case_b_freezes_pll_and_dc_states() {
        let m = ConverterModel::new(case_b()).unwrap();
        let frozen: Vec<_> = m
            .state_names()
            .iter()
            .zip(m.active())
            .filter(|(_, a)| !**a)
            .map(|(n, _)| *n)
            .collect();
        assert_eq!(frozen, ["x_dc", "v_dc", "x_pll", "delta", "v_dc_meas"]);
    }

    #[test]
    fn with_i_dc_updates_config_echo() {
        let m = ConverterModel::new(case_a1()).unwrap().with_i_dc(1.2);
        assert_eq!(m.i_dc(), Some(1.2));
        assert!(matches!(m.cfg.load.mode, LoadMode::DcVoltageCtrl { i_dc, .. } if i_dc == 1.2));
    }

    #[test]
    fn oracle_rejects_zero_inductance() {
        assert!(passive_oracle_model(0.02, 0.0).is_err());
    }

    #[test]
    fn series_terminals_split_voltage() {
        let u = Input {
            kind: Injection::Series,
            dq: [0.1, -0.2],
        };
        let t = terminals_common([1.0, 0.0], [0.5, 0.1], &u);
        assert_eq!(t.v_s, [1.0, 0.0]);
        assert_eq!(t.v_l, [1.1, -0.2]);
        assert_eq!(t.i_s, [-0.5, -0.1]);
        assert_eq!(t.i_l, [0.5, 0.1]);
    }

    #[test]
    fn shunt_currents_sum_to_injection() {
        let u = Input {
            kind: Injection::Shunt,
            dq: [0.1, -0.2],
        };
        let t = terminals_common([1.0, 0.0], [0.5, 0.1], &u);
        assert_eq!(t.v_s, t.v_l);
        assert!((t.i_s[0] + t.i_l[0] - 0.1).abs() < 1e-15);
        assert!((t.i_s[1] + t.i_l[1] + 0.2).abs() < 1e-15);
    }
}

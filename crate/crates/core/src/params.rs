//! Machine parameters in the two usual pictures.
//!
//! [`FundamentalParams`] holds winding inductances, mutual inductances and
//! resistances of one machine; [`StandardParams`] holds the reactances and
//! open-circuit time constants used by the reduced-order models. All values
//! are per-unit on whatever base the caller normalised them to.

use std::fmt;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `sqrt(3/2)`, the stator/rotor mutual-inductance scaling.
pub const KAPPA: f64 = 1.224_744_871_391_589;

/// Absolute slack used when comparing timescale margins against zero.
pub const MARGIN_TOL: f64 = 1e-12;

/// Default synchronous frequency, 2π·50 rad/s.
pub const OMEGA_S_50HZ: f64 = 2.0 * std::f64::consts::PI * 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FundamentalParams {
    #[serde(rename = "L_d")]
    pub l_d: f64,
    #[serde(rename = "L_q")]
    pub l_q: f64,
    #[serde(rename = "L_f")]
    pub l_f: f64,
    #[serde(rename = "L_g")]
    pub l_g: f64,
    /// d-axis damper self inductance.
    #[serde(rename = "L_D")]
    pub l_dd: f64,
    /// q-axis damper self inductance.
    #[serde(rename = "L_Q")]
    pub l_qq: f64,
    #[serde(rename = "L_fD")]
    pub l_fd: f64,
    #[serde(rename = "L_gQ")]
    pub l_gq: f64,
    #[serde(rename = "M_f")]
    pub m_f: f64,
    #[serde(rename = "M_g")]
    pub m_g: f64,
    #[serde(rename = "M_D")]
    pub m_dd: f64,
    #[serde(rename = "M_Q")]
    pub m_qq: f64,
    /// Stator resistance.
    #[serde(rename = "R")]
    pub r_s: f64,
    #[serde(rename = "R_f")]
    pub r_f: f64,
    #[serde(rename = "R_g")]
    pub r_g: f64,
    #[serde(rename = "R_D")]
    pub r_dd: f64,
    #[serde(rename = "R_Q")]
    pub r_qq: f64,
    /// Rotor inertia J.
    #[serde(rename = "J")]
    pub inertia: f64,
    /// Mechanical damping d.
    #[serde(rename = "d", default)]
    pub damping: f64,
}

impl FundamentalParams {
    /// The d-axis inductance array relating (Ψ_d, Ψ_f, Ψ_D) to (I_d, I_f, I_D).
    pub fn inductance_d(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.l_d,
            KAPPA * self.m_f,
            KAPPA * self.m_dd,
            KAPPA * self.m_f,
            self.l_f,
            self.l_fd,
            KAPPA * self.m_dd,
            self.l_fd,
            self.l_dd,
        )
    }

    /// The q-axis inductance array relating (Ψ_q, Ψ_g, Ψ_Q) to (I_q, I_g, I_Q).
    pub fn inductance_q(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.l_q,
            KAPPA * self.m_g,
            KAPPA * self.m_qq,
            KAPPA * self.m_g,
            self.l_g,
            self.l_gq,
            KAPPA * self.m_qq,
            self.l_gq,
            self.l_qq,
        )
    }

    /// Checks positive definiteness, positive resistances/inertia and `d >= 0`.
    pub fn check(&self) -> Result<()> {
        let all = [
            self.l_d,
            self.l_q,
            self.l_f,
            self.l_g,
            self.l_dd,
            self.l_qq,
            self.l_fd,
            self.l_gq,
            self.m_f,
            self.m_g,
            self.m_dd,
            self.m_qq,
            self.r_s,
            self.r_f,
            self.r_g,
            self.r_dd,
            self.r_qq,
            self.inertia,
            self.damping,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite fundamental parameter".into()));
        }
        if self.inductance_d().cholesky().is_none() {
            return Err(Error::SingularInductance { axis: 'd' });
        }
        if self.inductance_q().cholesky().is_none() {
            return Err(Error::SingularInductance { axis: 'q' });
        }
        // R = 0 is the lossless-stator idealisation used by the network models.
        if self.r_s < 0.0 {
            return Err(Error::InvalidParams("stator resistance R must be >= 0".into()));
        }
        for (name, v) in [("R_f", self.r_f), ("R_g", self.r_g), ("R_D", self.r_dd), ("R_Q", self.r_qq)] {
            if v <= 0.0 {
                return Err(Error::InvalidParams(format!("{name} must be > 0")));
            }
        }
        if self.inertia <= 0.0 {
            return Err(Error::InvalidParams("inertia J must be > 0".into()));
        }
        if self.damping < 0.0 {
            return Err(Error::InvalidParams("mechanical damping d must be >= 0".into()));
        }
        Ok(())
    }

    fn det_fd(&self) -> f64 {
        self.l_f * self.l_dd - self.l_fd * self.l_fd
    }

    fn det_gq(&self) -> f64 {
        self.l_g * self.l_qq - self.l_gq * self.l_gq
    }

    /// Coefficients (k₁, k₂, k₃, k₄) of the subtransient flux decomposition
    /// Ψ_d = L_d''I_d + k₁Ψ_f + k₂Ψ_D and Ψ_q = L_q''I_q + k₃Ψ_g + k₄Ψ_Q.
    pub fn subtransient_gains(&self) -> Result<[f64; 4]> {
        let dd = self.det_fd();
        let dq = self.det_gq();
        if dd == 0.0 || dq == 0.0 {
            return Err(Error::InvalidParams("singular rotor inductance block".into()));
        }
        Ok([
            KAPPA * (self.m_f * self.l_dd - self.m_dd * self.l_fd) / dd,
            KAPPA * (self.m_dd * self.l_f - self.m_f * self.l_fd) / dd,
            KAPPA * (self.m_g * self.l_qq - self.m_qq * self.l_gq) / dq,
            KAPPA * (self.m_qq * self.l_g - self.m_g * self.l_gq) / dq,
        ])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandardParams {
    #[serde(rename = "X_d")]
    pub x_d: f64,
    #[serde(rename = "X_q")]
    pub x_q: f64,
    #[serde(rename = "X_d_prime")]
    pub x_d1: f64,
    #[serde(rename = "X_q_prime")]
    pub x_q1: f64,
    #[serde(rename = "X_d_2prime")]
    pub x_d2: f64,
    #[serde(rename = "X_q_2prime")]
    pub x_q2: f64,
    #[serde(rename = "T_do_prime")]
    pub t_do1: f64,
    #[serde(rename = "T_qo_prime")]
    pub t_qo1: f64,
    #[serde(rename = "T_do_2prime")]
    pub t_do2: f64,
    #[serde(rename = "T_qo_2prime")]
    pub t_qo2: f64,
    /// Scaled inertia M = ω_s J.
    #[serde(rename = "M")]
    pub inertia: f64,
    /// Asynchronous damping D.
    #[serde(rename = "D", default)]
    pub damping: f64,
    #[serde(rename = "omega_s", default = "default_omega_s")]
    pub omega_s: f64,
}

fn default_omega_s() -> f64 {
    OMEGA_S_50HZ
}

/// One violated parameter inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    XdAboveXd1,
    Xd1AboveXd2,
    Xd2Positive,
    XqAtLeastXq1,
    Xq1AboveXq2,
    Xq2Positive,
    TimeConstant(&'static str),
    InertiaPositive,
    DampingNonNegative,
    OmegaPositive,
    NonFinite,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::XdAboveXd1 => write!(f, "X_d > X_d' fails"),
            Violation::Xd1AboveXd2 => write!(f, "X_d' > X_d'' fails"),
            Violation::Xd2Positive => write!(f, "X_d'' > 0 fails"),
            Violation::XqAtLeastXq1 => write!(f, "X_q >= X_q' fails"),
            Violation::Xq1AboveXq2 => write!(f, "X_q' > X_q'' fails"),
            Violation::Xq2Positive => write!(f, "X_q'' > 0 fails"),
            Violation::TimeConstant(name) => write!(f, "{name} > 0 fails"),
            Violation::InertiaPositive => write!(f, "M > 0 fails"),
            Violation::DampingNonNegative => write!(f, "D >= 0 fails"),
            Violation::OmegaPositive => write!(f, "omega_s > 0 fails"),
            Violation::NonFinite => write!(f, "all parameters finite fails"),
        }
    }
}

/// Left-hand sides of the two dissipation-positivity conditions
/// `4(X'−X'')T' − (X−X')T'' >= 0` for the d and q axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimescaleMargins {
    pub d: f64,
    pub q: f64,
}

impl TimescaleMargins {
    pub fn holds(&self) -> bool {
        self.d >= -MARGIN_TOL && self.q >= -MARGIN_TOL
    }
}

impl StandardParams {
    pub fn validate(&self) -> Vec<Violation> {
        validate(self)
    }

    pub fn timescale_margins(&self) -> TimescaleMargins {
        psd_timescale_check(self)
    }

    /// X_d − X_d'
    pub fn xhat_d(&self) -> f64 {
        self.x_d - self.x_d1
    }
    /// X_q − X_q'
    pub fn xhat_q(&self) -> f64 {
        self.x_q - self.x_q1
    }
    /// X_d' − X_d''
    pub fn xhat_d1(&self) -> f64 {
        self.x_d1 - self.x_d2
    }
    /// X_q' − X_q''
    pub fn xhat_q1(&self) -> f64 {
        self.x_q1 - self.x_q2
    }
}

/// Derives reactances and open-circuit time constants from the winding data.
pub fn derive_standard(fp: &FundamentalParams, omega_s: f64, damping: f64) -> Result<StandardParams> {
    fp.check()?;
    if !(omega_s > 0.0) {
        return Err(Error::InvalidParams("omega_s must be > 0".into()));
    }
    if !(damping >= 0.0) {
        return Err(Error::InvalidParams("D must be >= 0".into()));
    }
    let k2 = KAPPA * KAPPA;
    let det_fd = fp.det_fd();
    let det_gq = fp.det_gq();
    // Positive definiteness already rules these out; keep the explicit guard
    // for the error contract.
    if fp.l_f == 0.0 || fp.l_g == 0.0 || det_fd == 0.0 || det_gq == 0.0 {
        return Err(Error::InvalidParams("zero denominator in derived quantities".into()));
    }

    let l_d1 = fp.l_d - k2 * fp.m_f * fp.m_f / fp.l_f;
    let l_q1 = fp.l_q - k2 * fp.m_g * fp.m_g / fp.l_g;
    let l_d2 = fp.l_d
        - k2 * (fp.m_f * fp.m_f * fp.l_dd + fp.m_dd * fp.m_dd * fp.l_f - 2.0 * fp.m_f * fp.m_dd * fp.l_fd) / det_fd;
    let l_q2 = fp.l_q
        - k2 * (fp.m_g * fp.m_g * fp.l_qq + fp.m_qq * fp.m_qq * fp.l_g - 2.0 * fp.m_g * fp.m_qq * fp.l_gq) / det_gq;

    Ok(StandardParams {
        x_d: omega_s * fp.l_d,
        x_q: omega_s * fp.l_q,
        x_d1: omega_s * l_d1,
        x_q1: omega_s * l_q1,
        x_d2: omega_s * l_d2,
        x_q2: omega_s * l_q2,
        t_do1: fp.l_f / fp.r_f,
        t_qo1: fp.l_g / fp.r_g,
        t_do2: (fp.l_dd - fp.l_fd * fp.l_fd / fp.l_f) / fp.r_dd,
        t_qo2: (fp.l_qq - fp.l_gq * fp.l_gq / fp.l_g) / fp.r_qq,
        inertia: omega_s * fp.inertia,
        damping,
        omega_s,
    })
}

/// Reports every violated parameter inequality; empty when all hold.
pub fn validate(sp: &StandardParams) -> Vec<Violation> {
    let mut out = Vec::new();
    let fields = [
        sp.x_d, sp.x_q, sp.x_d1, sp.x_q1, sp.x_d2, sp.x_q2, sp.t_do1, sp.t_qo1, sp.t_do2, sp.t_qo2, sp.inertia,
        sp.damping, sp.omega_s,
    ];
    if fields.iter().any(|v| !v.is_finite()) {
        out.push(Violation::NonFinite);
        return out;
    }
    if !(sp.x_d > sp.x_d1) {
        out.push(Violation::XdAboveXd1);
    }
    if !(sp.x_d1 > sp.x_d2) {
        out.push(Violation::Xd1AboveXd2);
    }
    if !(sp.x_d2 > 0.0) {
        out.push(Violation::Xd2Positive);
    }
    if !(sp.x_q >= sp.x_q1) {
        out.push(Violation::XqAtLeastXq1);
    }
    if !(sp.x_q1 > sp.x_q2) {
        out.push(Violation::Xq1AboveXq2);
    }
    if !(sp.x_q2 > 0.0) {
        out.push(Violation::Xq2Positive);
    }
    for (name, t) in [("T_do'", sp.t_do1), ("T_qo'", sp.t_qo1), ("T_do''", sp.t_do2), ("T_qo''", sp.t_qo2)] {
        if !(t > 0.0) {
            out.push(Violation::TimeConstant(name));
        }
    }
    if !(sp.inertia > 0.0) {
        out.push(Violation::InertiaPositive);
    }
    if !(sp.damping >= 0.0) {
        out.push(Violation::DampingNonNegative);
    }
    if !(sp.omega_s > 0.0) {
        out.push(Violation::OmegaPositive);
    }
    out
}

pub fn psd_timescale_check(sp: &StandardParams) -> TimescaleMargins {
    TimescaleMargins {
        d: 4.0 * sp.xhat_d1() * sp.t_do1 - sp.xhat_d() * sp.t_do2,
        q: 4.0 * sp.xhat_q1() * sp.t_qo1 - sp.xhat_q() * sp.t_qo2,
    }
}

/// The same margins written directly in winding quantities:
///
/// ```text
/// κ²ω_s · [4L_f²(L_f M_D − L_fD M_f)² R_D − (L_D L_f − L_fD²)² M_f² R_f]
///        / [L_f² (L_D L_f − L_fD²) R_D R_f]
/// ```
///
/// and its q-axis twin. Note the minus sign: the second term can dominate,
/// so the margin is only positive when the damper circuits are much faster
/// than the field/g circuits.
pub fn timescale_margins_from_fundamental(fp: &FundamentalParams, omega_s: f64) -> TimescaleMargins {
    let k2w = KAPPA * KAPPA * omega_s;
    let det_fd = fp.det_fd();
    let det_gq = fp.det_gq();
    let cross_d = fp.l_f * fp.m_dd - fp.l_fd * fp.m_f;
    let cross_q = fp.l_g * fp.m_qq - fp.l_gq * fp.m_g;
    let d = k2w * (4.0 * fp.l_f * fp.l_f * cross_d * cross_d * fp.r_dd - det_fd * det_fd * fp.m_f * fp.m_f * fp.r_f)
        / (fp.l_f * fp.l_f * det_fd * fp.r_dd * fp.r_f);
    let q = k2w * (4.0 * fp.l_g * fp.l_g * cross_q * cross_q * fp.r_qq - det_gq * det_gq * fp.m_g * fp.m_g * fp.r_g)
        / (fp.l_g * fp.l_g * det_gq * fp.r_qq * fp.r_g);
    TimescaleMargins { d, q }
}

/// E_f = ω_s κ M_f V_f / R_f.
pub fn scaled_excitation(v_f: f64, fp: &FundamentalParams, omega_s: f64) -> Result<f64> {
    if !(fp.r_f > 0.0) {
        return Err(Error::InvalidParams("R_f must be > 0".into()));
    }
    Ok(omega_s * KAPPA * fp.m_f * v_f / fp.r_f)
}

/// P_m = ω_s τ.
pub fn torque_to_power(torque: f64, omega_s: f64) -> f64 {
    omega_s * torque
}

pub fn power_to_torque(p_m: f64, omega_s: f64) -> f64 {
    p_m / omega_s
}

//! First-principle synchronous machine in dq coordinates.
//!
//! The zero-sequence axis is decoupled from everything else and is not
//! modelled; the state is the six winding flux linkages, the rotor angle and
//! the angular momentum.

use nalgebra::{Matrix2, SMatrix, SVector, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::frames::Angle;
use crate::params::{FundamentalParams, KAPPA};

pub type Vector8 = SVector<f64, 8>;
pub type Matrix8 = SMatrix<f64, 8, 8>;
pub type Matrix8x4 = SMatrix<f64, 8, 4>;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FullState {
    pub psi_d: f64,
    pub psi_q: f64,
    pub psi_f: f64,
    pub psi_g: f64,
    /// d-axis damper flux Ψ_D.
    pub psi_dd: f64,
    /// q-axis damper flux Ψ_Q.
    pub psi_qq: f64,
    pub gamma: Angle,
    /// Angular momentum p = J·ω.
    pub p: f64,
}

impl FullState {
    /// Layout `(Ψ_d, Ψ_q, Ψ_f, Ψ_g, Ψ_D, Ψ_Q, γ, p)`.
    pub fn to_vector(&self) -> Vector8 {
        Vector8::from([self.psi_d, self.psi_q, self.psi_f, self.psi_g, self.psi_dd, self.psi_qq, self.gamma.0, self.p])
    }

    pub fn from_slice(x: &[f64]) -> Result<Self> {
        if x.len() != 8 {
            return Err(Error::DimensionMismatch { expected: 8, got: x.len() });
        }
        Ok(FullState {
            psi_d: x[0],
            psi_q: x[1],
            psi_f: x[2],
            psi_g: x[3],
            psi_dd: x[4],
            psi_qq: x[5],
            gamma: Angle(x[6]),
            p: x[7],
        })
    }

    pub const NAMES: [&'static str; 8] = ["Psi_d", "Psi_q", "Psi_f", "Psi_g", "Psi_D", "Psi_Q", "gamma", "p"];
}

/// Port inputs: stator voltages, field voltage and mechanical torque.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FullInputs {
    pub v_d: f64,
    pub v_q: f64,
    pub v_f: f64,
    pub torque: f64,
}

impl FullInputs {
    pub fn to_vector(&self) -> SVector<f64, 4> {
        SVector::<f64, 4>::new(self.v_d, self.v_q, self.v_f, self.torque)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WindingCurrents {
    pub i_d: f64,
    pub i_f: f64,
    pub i_dd: f64,
    pub i_q: f64,
    pub i_g: f64,
    pub i_qq: f64,
}

pub fn flux_to_currents(s: &FullState, fp: &FundamentalParams) -> Result<WindingCurrents> {
    let chol_d = fp.inductance_d().cholesky().ok_or(Error::SingularInductance { axis: 'd' })?;
    let chol_q = fp.inductance_q().cholesky().ok_or(Error::SingularInductance { axis: 'q' })?;
    let id = chol_d.solve(&Vector3::new(s.psi_d, s.psi_f, s.psi_dd));
    let iq = chol_q.solve(&Vector3::new(s.psi_q, s.psi_g, s.psi_qq));
    Ok(WindingCurrents { i_d: id[0], i_f: id[1], i_dd: id[2], i_q: iq[0], i_g: iq[1], i_qq: iq[2] })
}

/// Time derivative of the eight states, written out equation by equation.
pub fn full_rhs(s: &FullState, u: &FullInputs, fp: &FundamentalParams) -> Result<Vector8> {
    let c = flux_to_currents(s, fp)?;
    let w = s.p / fp.inertia;
    Ok(Vector8::from([
        -fp.r_s * c.i_d - s.psi_q * w - u.v_d,
        -fp.r_s * c.i_q + s.psi_d * w - u.v_q,
        -fp.r_f * c.i_f + u.v_f,
        -fp.r_g * c.i_g,
        -fp.r_dd * c.i_dd,
        -fp.r_qq * c.i_qq,
        w,
        s.psi_q * c.i_d - s.psi_d * c.i_q - fp.damping * w + u.torque,
    ]))
}

/// ½Ψᵀ𝓛⁻¹Ψ on each axis plus ½p²/J.
pub fn full_hamiltonian(s: &FullState, fp: &FundamentalParams) -> Result<f64> {
    let inv_d = fp.inductance_d().try_inverse().ok_or(Error::SingularInductance { axis: 'd' })?;
    let inv_q = fp.inductance_q().try_inverse().ok_or(Error::SingularInductance { axis: 'q' })?;
    let pd = Vector3::new(s.psi_d, s.psi_f, s.psi_dd);
    let pq = Vector3::new(s.psi_q, s.psi_g, s.psi_qq);
    Ok(0.5 * pd.dot(&(inv_d * pd)) + 0.5 * pq.dot(&(inv_q * pq)) + 0.5 * s.p * s.p / fp.inertia)
}

/// d-axis electrical energy ½(Ψ_d, Ψ_f, Ψ_D)ᵀ𝓛_d⁻¹(Ψ_d, Ψ_f, Ψ_D).
pub fn d_axis_energy(s: &FullState, fp: &FundamentalParams) -> Result<f64> {
    let inv_d = fp.inductance_d().try_inverse().ok_or(Error::SingularInductance { axis: 'd' })?;
    let pd = Vector3::new(s.psi_d, s.psi_f, s.psi_dd);
    Ok(0.5 * pd.dot(&(inv_d * pd)))
}

/// ∇H = (I_d, I_q, I_f, I_g, I_D, I_Q, 0, ω).
pub fn full_gradient(s: &FullState, fp: &FundamentalParams) -> Result<Vector8> {
    let c = flux_to_currents(s, fp)?;
    Ok(Vector8::from([c.i_d, c.i_q, c.i_f, c.i_g, c.i_dd, c.i_qq, 0.0, s.p / fp.inertia]))
}

/// State-dependent interconnection array J(x) (skew) and constant damping R.
pub fn full_structure(s: &FullState, fp: &FundamentalParams) -> (Matrix8, Matrix8) {
    let mut j = Matrix8::zeros();
    j[(0, 7)] = -s.psi_q;
    j[(7, 0)] = s.psi_q;
    j[(1, 7)] = s.psi_d;
    j[(7, 1)] = -s.psi_d;
    j[(6, 7)] = 1.0;
    j[(7, 6)] = -1.0;
    let r = Matrix8::from_diagonal(&Vector8::from([fp.r_s, fp.r_s, fp.r_f, fp.r_g, fp.r_dd, fp.r_qq, 0.0, fp.damping]));
    (j, r)
}

/// Input map for `u = (V_d, V_q, V_f, τ)`. The stator rows carry −1 because
/// terminal voltages are taken in generator convention.
pub fn full_input_map() -> Matrix8x4 {
    let mut g = Matrix8x4::zeros();
    g[(0, 0)] = -1.0;
    g[(1, 1)] = -1.0;
    g[(2, 2)] = 1.0;
    g[(7, 3)] = 1.0;
    g
}

/// `ẋ = (J(x) − R)∇H + G u`, `y = Gᵀ∇H = (−I_d, −I_q, I_f, ω)`.
pub fn full_ph_rhs(s: &FullState, u: &FullInputs, fp: &FundamentalParams) -> Result<(Vector8, SVector<f64, 4>)> {
    let grad = full_gradient(s, fp)?;
    let (j, r) = full_structure(s, fp);
    let g = full_input_map();
    let dx = (j - r) * grad + g * u.to_vector();
    let y = g.transpose() * grad;
    Ok((dx, y))
}

/// Power dissipated in the windings and by mechanical damping.
pub fn full_dissipation(s: &FullState, fp: &FundamentalParams) -> Result<f64> {
    let grad = full_gradient(s, fp)?;
    let (_, r) = full_structure(s, fp);
    Ok(grad.dot(&(r * grad)))
}

/// Supplied power `uᵀy = −V_d I_d − V_q I_q + V_f I_f + τω`.
pub fn full_supply_rate(s: &FullState, u: &FullInputs, fp: &FundamentalParams) -> Result<f64> {
    let (_, y) = full_ph_rhs(s, u, fp)?;
    Ok(u.to_vector().dot(&y))
}

/// Transient and subtransient internal emfs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InternalEmfs {
    pub e_q1: f64,
    pub e_d1: f64,
    pub e_q2: f64,
    pub e_d2: f64,
}

/// Maps rotor fluxes to (E_q', E_d', E_q'', E_d'').
pub fn subtransient_coordinates(
    psi_f: f64,
    psi_dd: f64,
    psi_g: f64,
    psi_qq: f64,
    fp: &FundamentalParams,
    omega_s: f64,
) -> Result<InternalEmfs> {
    let (dmap, qmap) = emf_maps(fp, omega_s)?;
    let d = dmap * Vector2::new(psi_f, psi_dd);
    let q = qmap * Vector2::new(psi_g, psi_qq);
    Ok(InternalEmfs { e_q1: d[0], e_q2: d[1], e_d1: q[0], e_d2: q[1] })
}

/// Inverse of [`subtransient_coordinates`]: returns (Ψ_f, Ψ_D, Ψ_g, Ψ_Q).
pub fn rotor_fluxes_from_emfs(e: &InternalEmfs, fp: &FundamentalParams, omega_s: f64) -> Result<(f64, f64, f64, f64)> {
    let (dmap, qmap) = emf_maps(fp, omega_s)?;
    let dinv = dmap.try_inverse().ok_or_else(|| Error::InvalidParams("d-axis emf map is singular".into()))?;
    let qinv = qmap.try_inverse().ok_or_else(|| Error::InvalidParams("q-axis emf map is singular".into()))?;
    let d = dinv * Vector2::new(e.e_q1, e.e_q2);
    let q = qinv * Vector2::new(e.e_d1, e.e_d2);
    Ok((d[0], d[1], q[0], q[1]))
}

fn emf_maps(fp: &FundamentalParams, omega_s: f64) -> Result<(Matrix2<f64>, Matrix2<f64>)> {
    if fp.l_f == 0.0 || fp.l_g == 0.0 {
        return Err(Error::InvalidParams("L_f and L_g must be nonzero".into()));
    }
    let [k1, k2, k3, k4] = fp.subtransient_gains()?;
    let dmap = Matrix2::new(KAPPA * fp.m_f / fp.l_f, 0.0, k1, k2) * omega_s;
    let qmap = Matrix2::new(KAPPA * fp.m_g / fp.l_g, 0.0, k3, k4) * (-omega_s);
    Ok((dmap, qmap))
}

//! Energy functions: machine circuits, rotor kinetic energy and inductive
//! lines, their gradients and a finite-difference Hessian.
//!
//! The energy of the machine series reactance (X_d'' or X_d') is booked in
//! the line energy, so the machine part depends on the internal emfs only.
//! All energies carry the factor 1/ω_s; `U = ω_s·H` is available too.

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::machines::{Layout, MachineState, MultiMachine, Order, Var};
use crate::network::Grid;
use crate::params::StandardParams;

/// Step of the central differences used for Hessians.
pub const HESSIAN_STEP: f64 = 1e-5;

fn positive(x: f64, what: &str) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(Error::InvalidParams(format!("{what} must be > 0 for the energy function")))
    }
}

/// Electrical energy stored in the machine circuits, excluding the series
/// reactance. Constant zero for the classical model.
pub fn machine_electrical_energy(sp: &StandardParams, s: &MachineState) -> Result<f64> {
    let w = positive(sp.omega_s, "omega_s")?;
    Ok(match *s {
        MachineState::Six { e_q1, e_d1, e_q2, e_d2, .. } => {
            let (xd, xd1) = (positive(sp.xhat_d(), "X_d - X_d'")?, positive(sp.xhat_d1(), "X_d' - X_d''")?);
            let (xq, xq1) = (positive(sp.xhat_q(), "X_q - X_q'")?, positive(sp.xhat_q1(), "X_q' - X_q''")?);
            (e_q1 * e_q1 / xd + (e_q1 - e_q2).powi(2) / xd1 + e_d1 * e_d1 / xq + (e_d1 - e_d2).powi(2) / xq1)
                / (2.0 * w)
        }
        MachineState::Five { e_q1, e_q2, e_d2, .. } => {
            let (xd, xd1) = (positive(sp.xhat_d(), "X_d - X_d'")?, positive(sp.xhat_d1(), "X_d' - X_d''")?);
            let xq1 = positive(sp.xhat_q1(), "X_q' - X_q''")?;
            (e_q1 * e_q1 / xd + (e_q1 - e_q2).powi(2) / xd1 + e_d2 * e_d2 / xq1) / (2.0 * w)
        }
        MachineState::Four { e_q1, e_d1, .. } => {
            let xd = positive(sp.xhat_d(), "X_d - X_d'")?;
            if sp.xhat_q() == 0.0 {
                return Err(Error::Unsupported(
                    "fourth-order energy with X_q = X_q' is singular; use the third-order model".into(),
                ));
            }
            let xq = positive(sp.xhat_q(), "X_q - X_q'")?;
            (e_q1 * e_q1 / xd + e_d1 * e_d1 / xq) / (2.0 * w)
        }
        MachineState::Three { e_q1, .. } => e_q1 * e_q1 / (positive(sp.xhat_d(), "X_d - X_d'")? * 2.0 * w),
        MachineState::Two { .. } => 0.0,
    })
}

/// Machine energy including the series reactance term `X(I_d² + I_q²)/(2ω_s)`.
pub fn machine_electrical_energy_with_currents(
    sp: &StandardParams,
    s: &MachineState,
    i_d: f64,
    i_q: f64,
) -> Result<f64> {
    let base = machine_electrical_energy(sp, s)?;
    let (xd, xq) = if s.order().is_subtransient() { (sp.x_d2, sp.x_q2) } else { (sp.x_d1, sp.x_q1) };
    Ok(base + (xd * i_d * i_d + xq * i_q * i_q) / (2.0 * sp.omega_s))
}

/// Gradient of [`machine_electrical_energy`] in [`Order::vars`] order.
pub fn machine_electrical_gradient(sp: &StandardParams, s: &MachineState) -> Result<Vec<f64>> {
    machine_electrical_energy(sp, s)?;
    let w = sp.omega_s;
    Ok(match *s {
        MachineState::Six { e_q1, e_d1, e_q2, e_d2, .. } => {
            let (xd, xd1, xq, xq1) = (sp.xhat_d(), sp.xhat_d1(), sp.xhat_q(), sp.xhat_q1());
            vec![
                0.0,
                0.0,
                (e_q1 / xd + (e_q1 - e_q2) / xd1) / w,
                (e_d1 / xq + (e_d1 - e_d2) / xq1) / w,
                (e_q2 - e_q1) / (xd1 * w),
                (e_d2 - e_d1) / (xq1 * w),
            ]
        }
        MachineState::Five { e_q1, e_q2, e_d2, .. } => {
            let (xd, xd1, xq1) = (sp.xhat_d(), sp.xhat_d1(), sp.xhat_q1());
            vec![0.0, 0.0, (e_q1 / xd + (e_q1 - e_q2) / xd1) / w, (e_q2 - e_q1) / (xd1 * w), e_d2 / (xq1 * w)]
        }
        MachineState::Four { e_q1, e_d1, .. } => vec![0.0, 0.0, e_q1 / (sp.xhat_d() * w), e_d1 / (sp.xhat_q() * w)],
        MachineState::Three { e_q1, .. } => vec![0.0, 0.0, e_q1 / (sp.xhat_d() * w)],
        MachineState::Two { .. } => vec![0.0, 0.0],
    })
}

/// d-axis energy written in (Ψ_d, E_q', E_q'').
pub fn d_axis_energy_emf(psi_d: f64, e_q1: f64, e_q2: f64, sp: &StandardParams) -> f64 {
    axis_energy_emf(psi_d, e_q1, e_q2, sp.x_d2, sp.xhat_d(), sp.xhat_d1(), sp.x_d1, sp.omega_s)
}

/// q-axis energy written in (Ψ_q, E_d', E_d''). The q-axis emfs enter with
/// the opposite sign to their d-axis twins.
pub fn q_axis_energy_emf(psi_q: f64, e_d1: f64, e_d2: f64, sp: &StandardParams) -> f64 {
    axis_energy_emf(psi_q, -e_d1, -e_d2, sp.x_q2, sp.xhat_q(), sp.xhat_q1(), sp.x_q1, sp.omega_s)
}

#[allow(clippy::too_many_arguments)]
fn axis_energy_emf(psi: f64, e1: f64, e2: f64, x2: f64, xh: f64, xh1: f64, x1: f64, w: f64) -> f64 {
    let m = Matrix3::new(
        w / x2,
        0.0,
        -1.0 / x2,
        0.0,
        1.0 / (w * xh) + 1.0 / (w * xh1),
        -1.0 / (w * xh1),
        -1.0 / x2,
        -1.0 / (w * xh1),
        x1 / (w * xh1 * x2),
    );
    let v = Vector3::new(psi, e1, e2);
    0.5 * v.dot(&(m * v))
}

/// Rotor kinetic energy. Shifted: `p²/(2ω_s M)` with `p = MΔω`. Unshifted:
/// `½Jω²` with `J = M/ω_s` and `ω = ω_s + p/M`.
pub fn mechanical_energy(p: f64, m: f64, omega_s: f64, shifted: bool) -> f64 {
    if shifted {
        p * p / (2.0 * omega_s * m)
    } else {
        let omega = omega_s + p / m;
        0.5 * (m / omega_s) * omega * omega
    }
}

/// `∂/∂p` of the shifted mechanical energy, i.e. `Δω/ω_s`.
pub fn mechanical_energy_gradient(p: f64, m: f64, omega_s: f64) -> f64 {
    p / (omega_s * m)
}

/// Energy of one line seen from its two emf sources.
pub fn edge_energy(b: f64, d_ik: f64, e_di: f64, e_qi: f64, e_dk: f64, e_qk: f64, omega_s: f64) -> f64 {
    let (s, c) = d_ik.sin_cos();
    -b / omega_s
        * ((e_di * e_qk - e_dk * e_qi) * s - (e_di * e_dk + e_qi * e_qk) * c
            + 0.5 * (e_di * e_di + e_dk * e_dk + e_qi * e_qi + e_qk * e_qk))
}

/// `(∂/∂δ_i, ∂/∂E_di, ∂/∂E_qi)` of [`edge_energy`].
fn edge_gradient_i(b: f64, d_ik: f64, e_di: f64, e_qi: f64, e_dk: f64, e_qk: f64, omega_s: f64) -> (f64, f64, f64) {
    let (s, c) = d_ik.sin_cos();
    let f = -b / omega_s;
    (
        f * ((e_di * e_qk - e_dk * e_qi) * c + (e_di * e_dk + e_qi * e_qk) * s),
        f * (e_qk * s - e_dk * c + e_di),
        f * (-e_dk * s - e_qk * c + e_qi),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineEnergy {
    /// One entry per line, in grid line order.
    pub per_edge: Vec<f64>,
    pub total: f64,
}

/// Line energies for sources `(E_d, E_q)` at angles δ. The classical model
/// uses θ with `E_d = 0`, `E_q = |E'|`.
pub fn line_energy(g: &Grid, delta: &[f64], e_d: &[f64], e_q: &[f64], omega_s: f64) -> Result<LineEnergy> {
    for len in [delta.len(), e_d.len(), e_q.len()] {
        if len != g.n() {
            return Err(Error::DimensionMismatch { expected: g.n(), got: len });
        }
    }
    let per_edge: Vec<f64> = g
        .lines()
        .iter()
        .enumerate()
        .map(|(e, l)| {
            let (i, k) = (l.from, l.to);
            edge_energy(g.line_susceptance(e), delta[i] - delta[k], e_d[i], e_q[i], e_d[k], e_q[k], omega_s)
        })
        .collect();
    let total = per_edge.iter().sum();
    Ok(LineEnergy { per_edge, total })
}

/// Gradient of the total line energy: `(∂/∂δ, ∂/∂E_d, ∂/∂E_q)` per node.
pub fn line_energy_gradient(
    g: &Grid,
    delta: &[f64],
    e_d: &[f64],
    e_q: &[f64],
    omega_s: f64,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    for len in [delta.len(), e_d.len(), e_q.len()] {
        if len != g.n() {
            return Err(Error::DimensionMismatch { expected: g.n(), got: len });
        }
    }
    let n = g.n();
    let (mut gd, mut ged, mut geq) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for (e, l) in g.lines().iter().enumerate() {
        let (i, k) = (l.from, l.to);
        let b = g.line_susceptance(e);
        let d = delta[i] - delta[k];
        let (a, bd, bq) = edge_gradient_i(b, d, e_d[i], e_q[i], e_d[k], e_q[k], omega_s);
        gd[i] += a;
        ged[i] += bd;
        geq[i] += bq;
        let (a, bd, bq) = edge_gradient_i(b, -d, e_d[k], e_q[k], e_d[i], e_q[i], omega_s);
        gd[k] += a;
        ged[k] += bd;
        geq[k] += bq;
    }
    Ok((gd, ged, geq))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyBreakdown {
    pub electrical: Vec<f64>,
    /// Shifted mechanical energy per machine.
    pub mechanical: Vec<f64>,
    pub lines: Vec<f64>,
    pub total: f64,
}

fn require_energy(mm: &MultiMachine) -> Result<()> {
    if !mm.network().is_lossless() {
        return Err(Error::Unsupported("no energy function is available with conductances".into()));
    }
    Ok(())
}

pub fn energy_breakdown(mm: &MultiMachine, x: &[f64]) -> Result<EnergyBreakdown> {
    require_energy(mm)?;
    let lay = mm.layout();
    lay.check(x.len())?;
    let n = lay.n;
    let w = mm.omega_s();
    let mut electrical = Vec::with_capacity(n);
    let mut mechanical = Vec::with_capacity(n);
    for (i, sp) in mm.params().iter().enumerate() {
        let s = mm.node_state(x, i);
        electrical.push(machine_electrical_energy(sp, &s)?);
        mechanical.push(mechanical_energy(s.momentum(), sp.inertia, w, true));
    }
    let (delta, e_d, e_q) = mm.network_emfs(x)?;
    let lines = line_energy(mm.grid(), &delta, &e_d, &e_q, w)?.per_edge;
    let total = electrical.iter().sum::<f64>() + mechanical.iter().sum::<f64>() + lines.iter().sum::<f64>();
    Ok(EnergyBreakdown { electrical, mechanical, lines, total })
}

/// Total energy H: machine circuits, shifted rotor energy and lines.
pub fn total_energy(mm: &MultiMachine, x: &[f64]) -> Result<f64> {
    Ok(energy_breakdown(mm, x)?.total)
}

/// `U = ω_s·H`.
pub fn scaled_energy(mm: &MultiMachine, x: &[f64]) -> Result<f64> {
    Ok(mm.omega_s() * total_energy(mm, x)?)
}

/// Analytic ∇H in the grouped layout.
pub fn energy_gradient(mm: &MultiMachine, x: &[f64]) -> Result<Vec<f64>> {
    require_energy(mm)?;
    let lay = mm.layout();
    lay.check(x.len())?;
    let n = lay.n;
    let w = mm.omega_s();
    let mut grad = vec![0.0; lay.len()];
    for (i, sp) in mm.params().iter().enumerate() {
        let s = mm.node_state(x, i);
        let ge = machine_electrical_gradient(sp, &s)?;
        for (slot, v) in ge.iter().enumerate() {
            grad[slot * n + i] += v;
        }
        grad[n + i] = mechanical_energy_gradient(s.momentum(), sp.inertia, w);
    }
    let (delta, e_d, e_q) = mm.network_emfs(x)?;
    let (gd, ged, geq) = line_energy_gradient(mm.grid(), &delta, &e_d, &e_q, w)?;
    grad[0..n].copy_from_slice(&gd);
    let (vd, vq) = match mm.order() {
        Order::Six | Order::Five => (Some(Var::Ed2), Some(Var::Eq2)),
        Order::Four => (Some(Var::Ed1), Some(Var::Eq1)),
        Order::Three => (None, Some(Var::Eq1)),
        Order::Two => (None, None),
    };
    for (var, g) in [(vd, &ged), (vq, &geq)] {
        if let Some(r) = var.and_then(|v| lay.block(v)) {
            for (slot, gi) in grad[r].iter_mut().zip(g.iter()) {
                *slot += gi;
            }
        }
    }
    Ok(grad)
}

/// Symmetrised central differences of [`energy_gradient`] with step
/// [`HESSIAN_STEP`].
pub fn energy_hessian(mm: &MultiMachine, x: &[f64]) -> Result<DMatrix<f64>> {
    let lay: Layout = mm.layout();
    lay.check(x.len())?;
    let n = x.len();
    let mut h = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        xp[j] = x[j] + HESSIAN_STEP;
        let gp = energy_gradient(mm, &xp)?;
        xp[j] = x[j] - HESSIAN_STEP;
        let gm = energy_gradient(mm, &xp)?;
        xp[j] = x[j];
        for i in 0..n {
            h[(i, j)] = (gp[i] - gm[i]) / (2.0 * HESSIAN_STEP);
        }
    }
    Ok((&h + h.transpose()) * 0.5)
}

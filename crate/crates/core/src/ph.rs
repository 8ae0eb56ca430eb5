//! Constant-structure port-Hamiltonian forms `ẋ = (J − R)∇H(x) + g·u`,
//! `y = gᵀ∇H(x)` of the sixth-, third- and second-order network models,
//! together with equilibria, shifted storage and passivity audits.
//!
//! Inputs are stacked as `[P_m; E_f]` (orders 6 and 3) or `[P_m]` (order 2).

use nalgebra::{DMatrix, DVector, Matrix2};

use crate::energy::{energy_gradient, energy_hessian, total_energy};
use crate::error::{Error, Result};
use crate::machines::{Layout, MachineInputs, MultiMachine, Order, Var};
use crate::network::{ClassicalGrid, Grid};
use crate::params::{StandardParams, TimescaleMargins};
use crate::sim::{five_point_derivative, Trajectory};

/// Eigenvalue tolerance for PSD verdicts.
pub const PSD_TOL: f64 = 1e-10;

fn check_order(order: Order) -> Result<()> {
    match order {
        Order::Two | Order::Three | Order::Six => Ok(()),
        _ => Err(Error::Unsupported(format!("no port-Hamiltonian form for order {order}"))),
    }
}

/// The constant matrix `J − R`.
pub fn structure_matrix(order: Order, params: &[StandardParams]) -> Result<DMatrix<f64>> {
    check_order(order)?;
    let n = params.len();
    if n == 0 {
        return Err(Error::InvalidParams("no machines".into()));
    }
    let lay = Layout::new(order, n);
    let w = params[0].omega_s;
    let mut a = DMatrix::zeros(lay.len(), lay.len());
    let at = |v: Var, i: usize| lay.index(v, i).expect("variable in layout");
    for (i, sp) in params.iter().enumerate() {
        let (d, p) = (at(Var::Angle, i), at(Var::Momentum, i));
        a[(d, p)] = w;
        a[(p, d)] = -w;
        if order != Order::Six {
            a[(p, p)] = -w * sp.damping;
        }
        if order == Order::Two {
            continue;
        }
        let eq1 = at(Var::Eq1, i);
        a[(eq1, eq1)] = -w * sp.xhat_d() / sp.t_do1;
        if order == Order::Six {
            let (ed1, eq2, ed2) = (at(Var::Ed1, i), at(Var::Eq2, i), at(Var::Ed2, i));
            a[(eq1, eq2)] = -w * sp.xhat_d() / sp.t_do1;
            a[(ed1, ed1)] = -w * sp.xhat_q() / sp.t_qo1;
            a[(ed1, ed2)] = -w * sp.xhat_q() / sp.t_qo1;
            a[(eq2, eq2)] = -w * sp.xhat_d1() / sp.t_do2;
            a[(ed2, ed2)] = -w * sp.xhat_q1() / sp.t_qo2;
        }
    }
    Ok(a)
}

/// Input map g for the stacked inputs.
pub fn input_map(order: Order, params: &[StandardParams]) -> Result<DMatrix<f64>> {
    check_order(order)?;
    let n = params.len();
    let lay = Layout::new(order, n);
    let m = if order == Order::Two { n } else { 2 * n };
    let mut g = DMatrix::zeros(lay.len(), m);
    for (i, sp) in params.iter().enumerate() {
        g[(lay.index(Var::Momentum, i).unwrap(), i)] = 1.0;
        if order != Order::Two {
            g[(lay.index(Var::Eq1, i).unwrap(), n + i)] = 1.0 / sp.t_do1;
        }
    }
    Ok(g)
}

/// `J = (A − Aᵀ)/2`, `R = −(A + Aᵀ)/2`.
pub fn split_structure(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let at = a.transpose();
    ((a - &at) * 0.5, (a + &at) * -0.5)
}

pub fn dissipation_matrix(order: Order, params: &[StandardParams]) -> Result<DMatrix<f64>> {
    Ok(split_structure(&structure_matrix(order, params)?).1)
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// The two 2×2 blocks whose semidefiniteness decides R ≥ 0 for one machine.
pub fn schur_blocks(sp: &StandardParams) -> (Matrix2<f64>, Matrix2<f64>) {
    let blk = |xh: f64, t1: f64, xh1: f64, t2: f64| Matrix2::new(2.0 * xh / t1, xh / t1, xh / t1, 2.0 * xh1 / t2);
    (blk(sp.xhat_d(), sp.t_do1, sp.xhat_d1(), sp.t_do2), blk(sp.xhat_q(), sp.t_qo1, sp.xhat_q1(), sp.t_qo2))
}

/// PSD test of a symmetric 2×2 through its diagonal and Schur complement.
pub fn schur_psd(m: &Matrix2<f64>) -> bool {
    let tol = PSD_TOL * m.amax().max(1.0);
    let (a, b, c) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
    if a > tol {
        c - b * b / a >= -tol
    } else {
        a >= -tol && c >= -tol && b.abs() <= tol
    }
}

/// Refuses parameter sets whose sixth-order dissipation matrix is indefinite.
pub fn check_dissipation(params: &[StandardParams]) -> Result<()> {
    let bad: Vec<(usize, TimescaleMargins)> =
        params.iter().enumerate().map(|(i, sp)| (i, sp.timescale_margins())).filter(|(_, m)| !m.holds()).collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::DissipationNotPsd(bad))
    }
}

/// Stacks per-node inputs in the order used by g.
pub fn input_vector(order: Order, u: &[MachineInputs]) -> Vec<f64> {
    let mut v: Vec<f64> = u.iter().map(|m| m.p_m).collect();
    if order != Order::Two {
        v.extend(u.iter().map(|m| m.e_f));
    }
    v
}

/// Inverse of [`input_vector`].
pub fn machine_inputs(order: Order, n: usize, u: &[f64]) -> Result<Vec<MachineInputs>> {
    let m = if order == Order::Two { n } else { 2 * n };
    if u.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: u.len() });
    }
    Ok((0..n).map(|i| MachineInputs { p_m: u[i], e_f: if order == Order::Two { 0.0 } else { u[n + i] } }).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureReport {
    pub order: Order,
    pub states: usize,
    pub inputs: usize,
    /// max |J + Jᵀ|
    pub skew_defect: f64,
    /// max |R − Rᵀ|
    pub symmetry_defect: f64,
    pub min_eig_r: f64,
    pub margins: Vec<TimescaleMargins>,
}

impl StructureReport {
    pub fn psd(&self) -> bool {
        self.min_eig_r >= -PSD_TOL
    }
}

impl std::fmt::Display for StructureReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "order: {}", self.order)?;
        writeln!(f, "states: {}", self.states)?;
        writeln!(f, "inputs: {}", self.inputs)?;
        writeln!(f, "skew_defect: {:e}", self.skew_defect)?;
        writeln!(f, "symmetry_defect: {:e}", self.symmetry_defect)?;
        writeln!(f, "min_eig_R: {:e}", self.min_eig_r)?;
        writeln!(f, "R_psd: {}", self.psd())?;
        for (i, m) in self.margins.iter().enumerate() {
            writeln!(f, "margin_{i}: d={:e} q={:e}", m.d, m.q)?;
        }
        Ok(())
    }
}

/// A network model bound to its constant interconnection, dissipation and
/// input matrices.
#[derive(Debug, Clone)]
pub struct PHSystem {
    mm: MultiMachine,
    a: DMatrix<f64>,
    j: DMatrix<f64>,
    r: DMatrix<f64>,
    g: DMatrix<f64>,
}

impl PHSystem {
    pub fn from_machines(mm: MultiMachine) -> Result<Self> {
        check_order(mm.order())?;
        if !mm.network().is_lossless() {
            return Err(Error::Unsupported("port-Hamiltonian form with conductances".into()));
        }
        if mm.order() == Order::Six {
            check_dissipation(mm.params())?;
        }
        let a = structure_matrix(mm.order(), mm.params())?;
        let g = input_map(mm.order(), mm.params())?;
        let (j, r) = split_structure(&a);
        debug_assert!((&j + j.transpose()).amax() == 0.0);
        let sys = PHSystem { mm, a, j, r, g };
        if sys.report().min_eig_r < -PSD_TOL {
            return Err(Error::Assumption(format!("dissipation matrix has eigenvalue {:e}", sys.report().min_eig_r)));
        }
        Ok(sys)
    }

    pub fn machines(&self) -> &MultiMachine {
        &self.mm
    }
    pub fn order(&self) -> Order {
        self.mm.order()
    }
    pub fn layout(&self) -> Layout {
        self.mm.layout()
    }
    pub fn omega_s(&self) -> f64 {
        self.mm.omega_s()
    }
    pub fn j(&self) -> &DMatrix<f64> {
        &self.j
    }
    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }
    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }
    /// `J − R`
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn input_len(&self) -> usize {
        self.g.ncols()
    }

    pub fn hamiltonian(&self, x: &[f64]) -> Result<f64> {
        total_energy(&self.mm, x)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<DVector<f64>> {
        Ok(DVector::from_vec(energy_gradient(&self.mm, x)?))
    }

    /// `(ẋ, y)`
    pub fn rhs(&self, x: &[f64], u: &[f64]) -> Result<(DVector<f64>, DVector<f64>)> {
        if u.len() != self.input_len() {
            return Err(Error::DimensionMismatch { expected: self.input_len(), got: u.len() });
        }
        let grad = self.gradient(x)?;
        let u = DVector::from_column_slice(u);
        let dx = &self.a * &grad + &self.g * u;
        let y = self.g.transpose() * grad;
        Ok((dx, y))
    }

    pub fn report(&self) -> StructureReport {
        let margins = if self.order() == Order::Six {
            self.mm.params().iter().map(|sp| sp.timescale_margins()).collect()
        } else {
            Vec::new()
        };
        StructureReport {
            order: self.order(),
            states: self.a.nrows(),
            inputs: self.g.ncols(),
            skew_defect: (&self.j + self.j.transpose()).amax(),
            symmetry_defect: (&self.r - self.r.transpose()).amax(),
            min_eig_r: min_eigenvalue(&self.r),
            margins,
        }
    }
}

/// Assembles orders 3 and 6 (and checks the parameters first).
pub fn assemble(order: Order, grid: Grid, params: Vec<StandardParams>) -> Result<PHSystem> {
    check_order(order)?;
    if order == Order::Two {
        return Err(Error::InvalidParams("use assemble_classical for the classical model".into()));
    }
    for (i, sp) in params.iter().enumerate() {
        let v = sp.validate();
        if !v.is_empty() {
            let list: Vec<String> = v.iter().map(|v| v.to_string()).collect();
            return Err(Error::InvalidParams(format!("node {i}: {}", list.join(", "))));
        }
    }
    if order == Order::Six {
        check_dissipation(&params)?;
    }
    PHSystem::from_machines(MultiMachine::new(order, grid, params)?)
}

pub fn assemble_classical(
    net: ClassicalGrid,
    params: Vec<StandardParams>,
    e_mag: Vec<f64>,
    alpha: Vec<f64>,
) -> Result<PHSystem> {
    PHSystem::from_machines(MultiMachine::classical(net, params, e_mag, alpha)?)
}

/// Free-function form of [`PHSystem::rhs`].
pub fn ph_rhs(sys: &PHSystem, x: &[f64], u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let (dx, y) = sys.rhs(x, u)?;
    Ok((dx.as_slice().to_vec(), y.as_slice().to_vec()))
}

/// Shifted Hamiltonian `H̄(x) = H(x) − (x − x̄)ᵀ∇H(x̄) − H(x̄)` and the
/// matching shifted ports.
#[derive(Debug, Clone)]
pub struct ShiftedStorage<'a> {
    sys: &'a PHSystem,
    pub x_bar: Vec<f64>,
    pub u_bar: Vec<f64>,
    pub y_bar: Vec<f64>,
    grad_bar: DVector<f64>,
    h_at_bar: f64,
}

/// Builds the shifted storage at `x_bar`; the constant input is recovered
/// by least squares and `x_bar` is rejected unless it is an equilibrium.
pub fn shifted_storage<'a>(sys: &'a PHSystem, x_bar: &[f64]) -> Result<ShiftedStorage<'a>> {
    sys.layout().check(x_bar.len())?;
    let grad_bar = sys.gradient(x_bar)?;
    let drift = &sys.a * &grad_bar;
    let gt = sys.g.transpose();
    let gtg = &gt * &sys.g;
    let u_bar =
        -gtg.try_inverse().ok_or_else(|| Error::Numerical("input map has dependent columns".into()))? * (&gt * &drift);
    let res = (&drift + &sys.g * &u_bar).amax();
    if res > 1e-8 * drift.amax().max(1.0) {
        return Err(Error::NotEquilibrium(res));
    }
    let y_bar = (&gt * &grad_bar).as_slice().to_vec();
    Ok(ShiftedStorage {
        sys,
        x_bar: x_bar.to_vec(),
        u_bar: u_bar.as_slice().to_vec(),
        y_bar,
        grad_bar,
        h_at_bar: sys.hamiltonian(x_bar)?,
    })
}

impl ShiftedStorage<'_> {
    pub fn system(&self) -> &PHSystem {
        self.sys
    }

    pub fn h(&self, x: &[f64]) -> Result<f64> {
        let h = self.sys.hamiltonian(x)?;
        let lin: f64 = x.iter().zip(&self.x_bar).zip(self.grad_bar.iter()).map(|((a, b), g)| (a - b) * g).sum();
        Ok(h - lin - self.h_at_bar)
    }

    pub fn grad(&self, x: &[f64]) -> Result<DVector<f64>> {
        Ok(self.sys.gradient(x)? - &self.grad_bar)
    }

    /// `ỹ = gᵀ∇H̄(x)`
    pub fn y_tilde(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok((self.sys.g.transpose() * self.grad(x)?).as_slice().to_vec())
    }

    /// `ũ = u − ū`
    pub fn u_tilde(&self, u: &[f64]) -> Vec<f64> {
        u.iter().zip(&self.u_bar).map(|(a, b)| a - b).collect()
    }

    /// `∇H̄ᵀR∇H̄ ≥ 0`
    pub fn dissipation(&self, x: &[f64]) -> Result<f64> {
        let gb = self.grad(x)?;
        Ok(gb.dot(&(&self.sys.r * &gb)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PassivityReport {
    pub times: Vec<f64>,
    pub h_bar: Vec<f64>,
    /// Stencil estimate of dH̄/dt.
    pub rate: Vec<f64>,
    /// ũᵀỹ
    pub supply: Vec<f64>,
    /// ∇H̄ᵀR∇H̄
    pub dissipation: Vec<f64>,
    /// dH̄/dt + ∇H̄ᵀR∇H̄ − ũᵀỹ
    pub residual: Vec<f64>,
    pub max_abs_residual: f64,
    /// max over samples of dH̄/dt − ũᵀỹ
    pub max_violation: f64,
    /// Largest increase of H̄ between consecutive samples.
    pub max_increase: f64,
}

impl PassivityReport {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,H_bar,supply,residual")?;
        for k in 0..self.times.len() {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                self.times[k], self.h_bar[k], self.supply[k], self.residual[k]
            )?;
        }
        Ok(())
    }
}

impl std::fmt::Display for PassivityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "samples: {}", self.times.len())?;
        writeln!(f, "max_abs_residual: {:e}", self.max_abs_residual)?;
        writeln!(f, "max_violation: {:e}", self.max_violation)?;
        writeln!(f, "max_increase: {:e}", self.max_increase)
    }
}

/// Audits `dH̄/dt = −∇H̄ᵀR∇H̄ + ũᵀỹ` along a trajectory of `st.system()`.
/// Input samples are the stacked vectors of [`input_vector`]; a trajectory
/// without inputs is taken to run at ū.
pub fn passivity_certificate(st: &ShiftedStorage<'_>, traj: &Trajectory) -> Result<PassivityReport> {
    let n = traj.len();
    if !traj.inputs.is_empty() && traj.inputs.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: traj.inputs.len() });
    }
    let mut h_bar = Vec::with_capacity(n);
    let mut supply = Vec::with_capacity(n);
    let mut dissipation = Vec::with_capacity(n);
    for k in 0..n {
        let x = &traj.states[k];
        st.sys.layout().check(x.len())?;
        let u = if traj.inputs.is_empty() { st.u_bar.clone() } else { traj.inputs[k].clone() };
        if u.len() != st.u_bar.len() {
            return Err(Error::DimensionMismatch { expected: st.u_bar.len(), got: u.len() });
        }
        let ut = st.u_tilde(&u);
        let yt = st.y_tilde(x)?;
        h_bar.push(st.h(x)?);
        supply.push(ut.iter().zip(&yt).map(|(a, b)| a * b).sum());
        dissipation.push(st.dissipation(x)?);
    }
    let rate = five_point_derivative(&traj.times, &h_bar)?;
    let residual: Vec<f64> = (0..n).map(|k| rate[k] + dissipation[k] - supply[k]).collect();
    let max_abs_residual = residual.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    let max_violation = (0..n).map(|k| rate[k] - supply[k]).fold(f64::NEG_INFINITY, f64::max);
    let max_increase = h_bar.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    Ok(PassivityReport {
        times: traj.times.clone(),
        h_bar,
        rate,
        supply,
        dissipation,
        residual,
        max_abs_residual,
        max_violation,
        max_increase,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HessianVerdict {
    /// Extreme eigenvalues of the Hessian restricted to the complement of
    /// the uniform angle shift.
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub positive_definite: bool,
}

impl std::fmt::Display for HessianVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} (eigenvalues in [{:e}, {:e}] on the angle-shift quotient)",
            if self.positive_definite { "positive definite" } else { "not positive definite" },
            self.min_eigenvalue,
            self.max_eigenvalue
        )
    }
}

/// Definiteness of ∇²H at `x` after projecting out the uniform angle shift,
/// along which H is flat.
pub fn quotient_hessian(mm: &MultiMachine, x: &[f64]) -> Result<HessianVerdict> {
    let h = energy_hessian(mm, x)?;
    let n = h.nrows();
    let v = DVector::from_vec(mm.layout().angle_shift_direction());
    // orthonormal basis whose first column spans v
    let mut m = DMatrix::zeros(n, n + 1);
    m.set_column(0, &v);
    for i in 0..n {
        m[(i, i + 1)] = 1.0;
    }
    let q = m.qr().q();
    let basis = q.columns(1, n - 1).into_owned();
    let reduced = basis.transpose() * &h * &basis;
    let eig = reduced.symmetric_eigenvalues();
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(HessianVerdict { min_eigenvalue: min, max_eigenvalue: max, positive_definite: min > 1e-8 * max.abs().max(1.0) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: 1e-10, max_iter: 50 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub x: Vec<f64>,
    pub u: Vec<MachineInputs>,
    /// ∞-norm of the full right-hand side at `x`.
    pub residual: f64,
    pub iterations: usize,
    /// None when no energy function is available for the model.
    pub hessian: Option<HessianVerdict>,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// Damped Newton on the model right-hand side. Node 0's angle stays at its
/// initial value and node 0's momentum equation is dropped; both removals
/// compensate the rotational symmetry of a lossless network.
pub fn find_equilibrium(
    mm: &MultiMachine,
    u: &[MachineInputs],
    guess: &[f64],
    opts: NewtonOptions,
) -> Result<Equilibrium> {
    let lay = mm.layout();
    lay.check(guess.len())?;
    let n = lay.n;
    if u.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: u.len() });
    }
    if !mm.network().is_lossless() {
        return Err(Error::Unsupported("equilibrium search with conductances".into()));
    }
    let sum: f64 = u.iter().map(|v| v.p_m).sum();
    let scale: f64 = u.iter().map(|v| v.p_m.abs()).sum::<f64>().max(1.0);
    if sum.abs() > 1e-12 * scale {
        return Err(Error::NoEquilibrium(format!("sum of P_m is {sum:e}; a lossless network needs 0")));
    }
    let m = lay.len();
    let free: Vec<usize> = (1..m).collect();
    let eqs: Vec<usize> = (0..m).filter(|&k| k != n).collect();
    let mut x = guess.to_vec();
    let residual = |x: &[f64]| -> Result<Vec<f64>> {
        let f = mm.rhs(x, u)?;
        Ok(eqs.iter().map(|&k| f[k]).collect())
    };
    let mut fz = residual(&x)?;
    let mut iterations = 0;
    while inf_norm(&fz) > opts.tol {
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence { iterations, residual: inf_norm(&fz) });
        }
        iterations += 1;
        let dim = free.len();
        let mut jac = DMatrix::zeros(dim, dim);
        let mut xp = x.clone();
        for (c, &k) in free.iter().enumerate() {
            let h = 1e-7 * x[k].abs().max(1.0);
            xp[k] = x[k] + h;
            let fp = residual(&xp)?;
            xp[k] = x[k] - h;
            let fm = residual(&xp)?;
            xp[k] = x[k];
            for r in 0..dim {
                jac[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        let step = jac
            .lu()
            .solve(&DVector::from_vec(fz.iter().map(|v| -v).collect()))
            .ok_or(Error::NoConvergence { iterations, residual: inf_norm(&fz) })?;
        let f0 = inf_norm(&fz);
        let mut lambda = 1.0;
        loop {
            let mut xt = x.clone();
            for (c, &k) in free.iter().enumerate() {
                xt[k] += lambda * step[c];
            }
            if let Ok(ft) = residual(&xt) {
                if ft.iter().all(|v| v.is_finite()) && inf_norm(&ft) < (1.0 - 1e-4 * lambda) * f0 {
                    x = xt;
                    fz = ft;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-8 {
                return Err(Error::NoConvergence { iterations, residual: f0 });
            }
        }
        log::debug!("newton iteration {iterations}: residual {:e}", inf_norm(&fz));
    }
    let full = inf_norm(&mm.rhs(&x, u)?);
    if full > opts.tol.max(1e-10) * 10.0 {
        return Err(Error::NoEquilibrium(format!("dropped equation not satisfied (residual {full:e})")));
    }
    let hessian = quotient_hessian(mm, &x).ok();
    Ok(Equilibrium { x, u: u.to_vec(), residual: full, iterations, hessian })
}

//! Reduced-order machine models (orders 6 down to 2) and their closed-loop
//! interconnection through a lossless network.
//!
//! The momentum-like state is `p = M·Δω`, so `Δω = p/M`.
//!
//! System states are stored grouped by variable: all angles first, then all
//! momenta, then each emf block in the order given by [`Order::vars`].

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::Angle;
use crate::network::{classical_power, dq_currents, ClassicalGrid, Grid};
use crate::params::StandardParams;

/// Relative tolerance used when comparing reactances that must coincide.
pub const REACTANCE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Order {
    Two,
    Three,
    Four,
    Five,
    Six,
}

impl TryFrom<u8> for Order {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        Ok(match v {
            2 => Order::Two,
            3 => Order::Three,
            4 => Order::Four,
            5 => Order::Five,
            6 => Order::Six,
            _ => return Err(Error::InvalidParams(format!("model order must be 2..=6, got {v}"))),
        })
    }
}

impl From<Order> for u8 {
    fn from(o: Order) -> u8 {
        match o {
            Order::Two => 2,
            Order::Three => 3,
            Order::Four => 4,
            Order::Five => 5,
            Order::Six => 6,
        }
    }
}

impl std::fmt::Display for Order {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", u8::from(*self))
    }
}

/// State variable kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    /// δ, or θ for the classical model.
    Angle,
    /// p = M·Δω
    Momentum,
    /// E_q'
    Eq1,
    /// E_d'
    Ed1,
    /// E_q''
    Eq2,
    /// E_d''
    Ed2,
}

impl Var {
    pub fn symbol(self, order: Order) -> &'static str {
        match self {
            Var::Angle if order == Order::Two => "theta",
            Var::Angle => "delta",
            Var::Momentum => "p",
            Var::Eq1 => "Eq1",
            Var::Ed1 => "Ed1",
            Var::Eq2 => "Eq2",
            Var::Ed2 => "Ed2",
        }
    }
}

impl Order {
    pub const ALL: [Order; 5] = [Order::Two, Order::Three, Order::Four, Order::Five, Order::Six];

    pub fn vars(self) -> &'static [Var] {
        use Var::*;
        match self {
            Order::Six => &[Angle, Momentum, Eq1, Ed1, Eq2, Ed2],
            Order::Five => &[Angle, Momentum, Eq1, Eq2, Ed2],
            Order::Four => &[Angle, Momentum, Eq1, Ed1],
            Order::Three => &[Angle, Momentum, Eq1],
            Order::Two => &[Angle, Momentum],
        }
    }

    /// States per machine.
    pub fn dim(self) -> usize {
        self.vars().len()
    }

    pub fn is_subtransient(self) -> bool {
        matches!(self, Order::Six | Order::Five)
    }

    /// The machine reactance that is folded into the network.
    pub fn series_reactance(self, sp: &StandardParams) -> f64 {
        if self.is_subtransient() {
            sp.x_d2
        } else {
            sp.x_d1
        }
    }
}

/// Index map of a grouped system state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub order: Order,
    pub n: usize,
}

impl Layout {
    pub fn new(order: Order, n: usize) -> Self {
        Layout { order, n }
    }

    pub fn len(&self) -> usize {
        self.order.dim() * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn slot(&self, var: Var) -> Option<usize> {
        self.order.vars().iter().position(|v| *v == var)
    }

    pub fn block(&self, var: Var) -> Option<Range<usize>> {
        self.slot(var).map(|s| s * self.n..(s + 1) * self.n)
    }

    pub fn index(&self, var: Var, node: usize) -> Option<usize> {
        self.slot(var).map(|s| s * self.n + node)
    }

    /// Column names such as `delta_0`, `p_1`, `Eq2_2`.
    pub fn names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.len());
        for v in self.order.vars() {
            for i in 0..self.n {
                out.push(format!("{}_{i}", v.symbol(self.order)));
            }
        }
        out
    }

    /// Unit-length direction of a uniform angle shift.
    pub fn angle_shift_direction(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.len()];
        let s = 1.0 / (self.n as f64).sqrt();
        for x in &mut v[0..self.n] {
            *x = s;
        }
        v
    }

    pub fn check(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: len });
        }
        Ok(())
    }
}

/// State of one machine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MachineState {
    Six {
        delta: Angle,
        p: f64,
        e_q1: f64,
        e_d1: f64,
        e_q2: f64,
        e_d2: f64,
    },
    Five {
        delta: Angle,
        p: f64,
        e_q1: f64,
        e_q2: f64,
        e_d2: f64,
    },
    Four {
        delta: Angle,
        p: f64,
        e_q1: f64,
        e_d1: f64,
    },
    Three {
        delta: Angle,
        p: f64,
        e_q1: f64,
    },
    /// `theta = delta + alpha` is the voltage angle; `e_mag` and `alpha` are constant.
    Two {
        theta: Angle,
        p: f64,
        e_mag: f64,
        alpha: f64,
    },
}

impl MachineState {
    pub fn order(&self) -> Order {
        match self {
            MachineState::Six { .. } => Order::Six,
            MachineState::Five { .. } => Order::Five,
            MachineState::Four { .. } => Order::Four,
            MachineState::Three { .. } => Order::Three,
            MachineState::Two { .. } => Order::Two,
        }
    }

    /// Dynamic values in [`Order::vars`] order.
    pub fn values(&self) -> Vec<f64> {
        match *self {
            MachineState::Six { delta, p, e_q1, e_d1, e_q2, e_d2 } => vec![delta.0, p, e_q1, e_d1, e_q2, e_d2],
            MachineState::Five { delta, p, e_q1, e_q2, e_d2 } => vec![delta.0, p, e_q1, e_q2, e_d2],
            MachineState::Four { delta, p, e_q1, e_d1 } => vec![delta.0, p, e_q1, e_d1],
            MachineState::Three { delta, p, e_q1 } => vec![delta.0, p, e_q1],
            MachineState::Two { theta, p, .. } => vec![theta.0, p],
        }
    }

    /// Inverse of [`MachineState::values`]. `e_mag` and `alpha` are only read
    /// for the classical model.
    pub fn from_values(order: Order, v: &[f64], e_mag: f64, alpha: f64) -> Result<Self> {
        if v.len() != order.dim() {
            return Err(Error::DimensionMismatch { expected: order.dim(), got: v.len() });
        }
        Ok(match order {
            Order::Six => {
                MachineState::Six { delta: Angle(v[0]), p: v[1], e_q1: v[2], e_d1: v[3], e_q2: v[4], e_d2: v[5] }
            }
            Order::Five => MachineState::Five { delta: Angle(v[0]), p: v[1], e_q1: v[2], e_q2: v[3], e_d2: v[4] },
            Order::Four => MachineState::Four { delta: Angle(v[0]), p: v[1], e_q1: v[2], e_d1: v[3] },
            Order::Three => MachineState::Three { delta: Angle(v[0]), p: v[1], e_q1: v[2] },
            Order::Two => MachineState::Two { theta: Angle(v[0]), p: v[1], e_mag, alpha },
        })
    }

    pub fn angle(&self) -> Angle {
        match *self {
            MachineState::Six { delta, .. }
            | MachineState::Five { delta, .. }
            | MachineState::Four { delta, .. }
            | MachineState::Three { delta, .. } => delta,
            MachineState::Two { theta, .. } => theta,
        }
    }

    pub fn momentum(&self) -> f64 {
        match *self {
            MachineState::Six { p, .. }
            | MachineState::Five { p, .. }
            | MachineState::Four { p, .. }
            | MachineState::Three { p, .. }
            | MachineState::Two { p, .. } => p,
        }
    }

    /// (E_d, E_q) of the source the network sees.
    pub fn network_emf(&self) -> (f64, f64) {
        match *self {
            MachineState::Six { e_q2, e_d2, .. } | MachineState::Five { e_q2, e_d2, .. } => (e_d2, e_q2),
            MachineState::Four { e_q1, e_d1, .. } => (e_d1, e_q1),
            MachineState::Three { e_q1, .. } => (0.0, e_q1),
            MachineState::Two { e_mag, alpha, .. } => (e_mag * alpha.sin(), e_mag * alpha.cos()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MachineInputs {
    /// Mechanical power P_m.
    #[serde(rename = "P_m")]
    pub p_m: f64,
    /// Scaled excitation E_f; ignored by the classical model.
    #[serde(rename = "E_f", default)]
    pub e_f: f64,
}

pub fn momentum_from_frequency(delta_omega: f64, m: f64) -> f64 {
    m * delta_omega
}

pub fn frequency_from_momentum(p: f64, m: f64) -> f64 {
    p / m
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REACTANCE_TOL * a.abs().max(b.abs()).max(1.0)
}

fn check_params(sp: &StandardParams, what: &str) -> Result<()> {
    let v = sp.validate();
    if v.is_empty() {
        return Ok(());
    }
    let list: Vec<String> = v.iter().map(|v| v.to_string()).collect();
    Err(Error::InvalidParams(format!("{what}: {}", list.join(", "))))
}

/// Right-hand side of a single machine given its terminal dq currents.
/// Returns derivatives in [`Order::vars`] order.
pub fn single_rhs(sp: &StandardParams, s: &MachineState, i_d: f64, i_q: f64, u: &MachineInputs) -> Result<Vec<f64>> {
    check_params(sp, "machine")?;
    if s.order() == Order::Five && !close(sp.x_q, sp.x_q1) {
        return Err(Error::Assumption("the fifth-order model needs X_q = X_q'".into()));
    }
    if !s.values().iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidParams("machine state is not finite".into()));
    }
    Ok(single_rhs_unchecked(sp, s, i_d, i_q, u))
}

fn single_rhs_unchecked(sp: &StandardParams, s: &MachineState, i_d: f64, i_q: f64, u: &MachineInputs) -> Vec<f64> {
    let dw = s.momentum() / sp.inertia;
    let e_q1_dot = |e_q1: f64| (u.e_f - e_q1 + i_d * sp.xhat_d()) / sp.t_do1;
    match *s {
        MachineState::Six { e_q1, e_d1, e_q2, e_d2, .. } => {
            let pe = e_d2 * i_d + e_q2 * i_q + (sp.x_d2 - sp.x_q2) * i_d * i_q;
            vec![
                dw,
                u.p_m - pe,
                e_q1_dot(e_q1),
                (-e_d1 - i_q * sp.xhat_q()) / sp.t_qo1,
                (e_q1 - e_q2 + i_d * sp.xhat_d1()) / sp.t_do2,
                (e_d1 - e_d2 - i_q * sp.xhat_q1()) / sp.t_qo2,
            ]
        }
        MachineState::Five { e_q1, e_q2, e_d2, .. } => {
            let pe = e_d2 * i_d + e_q2 * i_q + (sp.x_d2 - sp.x_q2) * i_d * i_q;
            vec![
                dw,
                u.p_m - pe,
                e_q1_dot(e_q1),
                (e_q1 - e_q2 + i_d * sp.xhat_d1()) / sp.t_do2,
                (-e_d2 - i_q * sp.xhat_q1()) / sp.t_qo2,
            ]
        }
        MachineState::Four { e_q1, e_d1, .. } => {
            let pe = e_d1 * i_d + e_q1 * i_q + (sp.x_d1 - sp.x_q1) * i_d * i_q;
            vec![dw, u.p_m - sp.damping * dw - pe, e_q1_dot(e_q1), (-e_d1 - i_q * sp.xhat_q()) / sp.t_qo1]
        }
        MachineState::Three { e_q1, .. } => {
            let pe = e_q1 * i_q + (sp.x_d1 - sp.x_q1) * i_d * i_q;
            vec![dw, u.p_m - sp.damping * dw - pe, e_q1_dot(e_q1)]
        }
        MachineState::Two { e_mag, alpha, .. } => {
            let (e_d, e_q) = (e_mag * alpha.sin(), e_mag * alpha.cos());
            let pe = e_q * i_q + e_d * i_d + (sp.x_d1 - sp.x_q1) * i_d * i_q;
            vec![dw, u.p_m - sp.damping * dw - pe]
        }
    }
}

/// Terminal voltage (V_d, V_q) with the stator resistance neglected.
pub fn terminal_voltage(sp: &StandardParams, s: &MachineState, i_d: f64, i_q: f64) -> Result<(f64, f64)> {
    match *s {
        MachineState::Six { e_q2, e_d2, .. } | MachineState::Five { e_q2, e_d2, .. } => {
            Ok((e_d2 - sp.x_q2 * i_q, e_q2 + sp.x_d2 * i_d))
        }
        MachineState::Four { e_q1, e_d1, .. } => Ok((e_d1 - sp.x_q1 * i_q, e_q1 + sp.x_d1 * i_d)),
        MachineState::Three { e_q1, .. } => Ok((-sp.x_q1 * i_q, e_q1 + sp.x_d1 * i_d)),
        MachineState::Two { .. } => Err(Error::Unsupported("terminal voltage of the classical model".into())),
    }
}

/// A closed network of identical-order machines.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiMachine {
    order: Order,
    net: ClassicalGrid,
    params: Vec<StandardParams>,
    e_mag: Vec<f64>,
    alpha: Vec<f64>,
    omega_s: f64,
}

impl MultiMachine {
    /// Orders 3 to 6 on a lossless grid.
    pub fn new(order: Order, grid: Grid, params: Vec<StandardParams>) -> Result<Self> {
        if order == Order::Two {
            return Err(Error::InvalidParams("use MultiMachine::classical for the classical model".into()));
        }
        Self::build(order, ClassicalGrid::lossless(grid), params, Vec::new(), Vec::new())
    }

    /// The classical model; conductances are allowed here.
    pub fn classical(
        net: ClassicalGrid,
        params: Vec<StandardParams>,
        e_mag: Vec<f64>,
        alpha: Vec<f64>,
    ) -> Result<Self> {
        let n = net.grid.n();
        if e_mag.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: e_mag.len() });
        }
        if alpha.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: alpha.len() });
        }
        if let Some(i) = e_mag.iter().position(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::InvalidParams(format!("node {i}: |E'| must be > 0")));
        }
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidParams("alpha must be finite".into()));
        }
        Self::build(Order::Two, net, params, e_mag, alpha)
    }

    fn build(
        order: Order,
        net: ClassicalGrid,
        params: Vec<StandardParams>,
        e_mag: Vec<f64>,
        alpha: Vec<f64>,
    ) -> Result<Self> {
        let n = net.grid.n();
        if params.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: params.len() });
        }
        for (i, sp) in params.iter().enumerate() {
            check_params(sp, &format!("node {i}"))?;
        }
        let omega_s = params[0].omega_s;
        if let Some(i) = params.iter().position(|sp| !close(sp.omega_s, omega_s)) {
            return Err(Error::InvalidParams(format!("node {i}: omega_s differs from node 0")));
        }
        for (i, sp) in params.iter().enumerate() {
            if order.is_subtransient() {
                if !close(sp.x_d2, sp.x_q2) {
                    return Err(Error::Assumption(format!(
                        "node {i}: subtransient saliency must be negligible (X_d'' = {}, X_q'' = {})",
                        sp.x_d2, sp.x_q2
                    )));
                }
            } else if !close(sp.x_d1, sp.x_q1) {
                return Err(Error::Assumption(format!(
                    "node {i}: transient saliency must be negligible (X_d' = {}, X_q' = {})",
                    sp.x_d1, sp.x_q1
                )));
            }
            if order == Order::Five && !close(sp.x_q, sp.x_q1) {
                return Err(Error::Assumption(format!("node {i}: the fifth-order model needs X_q = X_q'")));
            }
            let xs = order.series_reactance(sp);
            if !close(net.grid.x_series()[i], xs) {
                return Err(Error::Assumption(format!(
                    "node {i}: grid series reactance {} does not match the machine reactance {}",
                    net.grid.x_series()[i],
                    xs
                )));
            }
        }
        if order != Order::Two && !net.is_lossless() {
            return Err(Error::Unsupported("conductances are only modelled for the classical model".into()));
        }
        Ok(MultiMachine { order, net, params, e_mag, alpha, omega_s })
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn n(&self) -> usize {
        self.net.grid.n()
    }

    pub fn grid(&self) -> &Grid {
        &self.net.grid
    }

    pub fn network(&self) -> &ClassicalGrid {
        &self.net
    }

    pub fn params(&self) -> &[StandardParams] {
        &self.params
    }

    /// |E'| per node (classical model only, empty otherwise).
    pub fn e_mag(&self) -> &[f64] {
        &self.e_mag
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn omega_s(&self) -> f64 {
        self.omega_s
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.order, self.n())
    }

    pub fn node_state(&self, x: &[f64], i: usize) -> MachineState {
        let lay = self.layout();
        let vals: Vec<f64> = (0..self.order.dim()).map(|s| x[s * lay.n + i]).collect();
        let (e, a) = if self.order == Order::Two { (self.e_mag[i], self.alpha[i]) } else { (0.0, 0.0) };
        MachineState::from_values(self.order, &vals, e, a).expect("layout length")
    }

    /// Angles and emfs as seen by the line equations. For the classical model
    /// this is (θ, 0, |E'|).
    pub fn network_emfs(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let lay = self.layout();
        lay.check(x.len())?;
        let n = lay.n;
        let delta = x[0..n].to_vec();
        let blk = |v: Var| lay.block(v).map(|r| x[r].to_vec()).unwrap_or_else(|| vec![0.0; n]);
        let (e_d, e_q) = match self.order {
            Order::Six | Order::Five => (blk(Var::Ed2), blk(Var::Eq2)),
            Order::Four | Order::Three => (blk(Var::Ed1), blk(Var::Eq1)),
            Order::Two => (vec![0.0; n], self.e_mag.clone()),
        };
        Ok((delta, e_d, e_q))
    }

    pub fn frequency_deviation(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.layout().check(x.len())?;
        let n = self.n();
        Ok((0..n).map(|i| x[n + i] / self.params[i].inertia).collect())
    }

    /// Electrical power P_e per node.
    pub fn electrical_power(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (delta, e_d, e_q) = self.network_emfs(x)?;
        if self.order == Order::Two {
            return classical_power(&self.net, &delta, &self.e_mag);
        }
        let (i_d, i_q) = dq_currents(&self.net.grid, &delta, &e_d, &e_q)?;
        Ok((0..self.n())
            .map(|i| {
                let sp = &self.params[i];
                let sal = if self.order.is_subtransient() { sp.x_d2 - sp.x_q2 } else { sp.x_d1 - sp.x_q1 };
                e_d[i] * i_d[i] + e_q[i] * i_q[i] + sal * i_d[i] * i_q[i]
            })
            .collect())
    }

    /// Derivative of the grouped state for the given per-node inputs.
    pub fn rhs(&self, x: &[f64], u: &[MachineInputs]) -> Result<Vec<f64>> {
        let mut dx = vec![0.0; x.len()];
        self.rhs_into(x, u, &mut dx)?;
        Ok(dx)
    }

    pub fn rhs_into(&self, x: &[f64], u: &[MachineInputs], dx: &mut [f64]) -> Result<()> {
        let lay = self.layout();
        lay.check(x.len())?;
        lay.check(dx.len())?;
        let n = lay.n;
        if u.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: u.len() });
        }
        if self.order == Order::Two {
            let pe = classical_power(&self.net, &x[0..n], &self.e_mag)?;
            for i in 0..n {
                let sp = &self.params[i];
                let dw = x[n + i] / sp.inertia;
                dx[i] = dw;
                dx[n + i] = u[i].p_m - sp.damping * dw - pe[i];
            }
            return Ok(());
        }
        let (delta, e_d, e_q) = self.network_emfs(x)?;
        let (i_d, i_q) = dq_currents(&self.net.grid, &delta, &e_d, &e_q)?;
        let dim = self.order.dim();
        for i in 0..n {
            let s = self.node_state(x, i);
            let d = single_rhs_unchecked(&self.params[i], &s, i_d[i], i_q[i], &u[i]);
            for k in 0..dim {
                dx[k * n + i] = d[k];
            }
        }
        Ok(())
    }
}

/// Free-function form of [`MultiMachine::rhs`].
pub fn multimachine_rhs(mm: &MultiMachine, x: &[f64], u: &[MachineInputs]) -> Result<Vec<f64>> {
    mm.rhs(x, u)
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use crate::network::{build_grid, Line};
    use rand::Rng;

    /// Parameters satisfying the saliency assumptions of `order`.
    pub fn machine_for(order: Order, rng: &mut impl Rng) -> StandardParams {
        let x_d2 = rng.gen_range(0.15..0.3);
        let x_d1 = x_d2 + rng.gen_range(0.05..0.3);
        let x_d = x_d1 + rng.gen_range(0.8..1.5);
        let (x_q1, x_q2) = if order.is_subtransient() {
            (x_d2 + rng.gen_range(0.1..0.5), x_d2)
        } else {
            (x_d1, x_d1 - rng.gen_range(0.02f64..0.1).min(x_d1 * 0.5))
        };
        let x_q = if order == Order::Five { x_q1 } else { x_q1 + rng.gen_range(0.5..1.2) };
        StandardParams {
            x_d,
            x_q,
            x_d1,
            x_q1,
            x_d2,
            x_q2,
            t_do1: rng.gen_range(4.0..9.0),
            t_qo1: rng.gen_range(0.4..1.0),
            t_do2: rng.gen_range(0.02..0.05),
            t_qo2: rng.gen_range(0.03..0.08),
            inertia: rng.gen_range(0.03..0.1),
            damping: rng.gen_range(0.0..0.2),
            omega_s: crate::params::OMEGA_S_50HZ,
        }
    }

    /// Random connected grid: a spanning tree plus a few chords.
    pub fn random_lines(n: usize, rng: &mut impl Rng) -> Vec<Line> {
        let mut lines = Vec::new();
        for k in 1..n {
            lines.push(Line { from: rng.gen_range(0..k), to: k, x_t: rng.gen_range(0.1..0.8) });
        }
        for _ in 0..n {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            if a != b && !lines.iter().any(|l| (l.from, l.to) == (a, b) || (l.from, l.to) == (b, a)) {
                lines.push(Line { from: a, to: b, x_t: rng.gen_range(0.1..0.8) });
            }
        }
        lines
    }

    pub fn random_system(order: Order, n: usize, rng: &mut impl Rng) -> MultiMachine {
        let params: Vec<_> = (0..n).map(|_| machine_for(order, rng)).collect();
        let xs: Vec<_> = params.iter().map(|sp| order.series_reactance(sp)).collect();
        let grid = build_grid(n, &random_lines(n, rng), &xs).unwrap();
        if order == Order::Two {
            let e_mag = (0..n).map(|_| rng.gen_range(0.9..1.2)).collect();
            let alpha = (0..n).map(|_| rng.gen_range(-0.3..0.3)).collect();
            MultiMachine::classical(ClassicalGrid::lossless(grid), params, e_mag, alpha).unwrap()
        } else {
            MultiMachine::new(order, grid, params).unwrap()
        }
    }

    pub fn random_state(mm: &MultiMachine, rng: &mut impl Rng) -> Vec<f64> {
        let lay = mm.layout();
        let mut x = vec![0.0; lay.len()];
        for (s, v) in mm.order().vars().iter().enumerate() {
            for i in 0..lay.n {
                x[s * lay.n + i] = match v {
                    Var::Angle => rng.gen_range(-1.5..1.5),
                    Var::Momentum => rng.gen_range(-0.05..0.05),
                    Var::Eq1 | Var::Eq2 => rng.gen_range(0.6..1.3),
                    Var::Ed1 | Var::Ed2 => rng.gen_range(-0.4..0.4),
                };
            }
        }
        x
    }

    pub fn random_inputs(n: usize, rng: &mut impl Rng) -> Vec<MachineInputs> {
        (0..n).map(|_| MachineInputs { p_m: rng.gen_range(-1.0..1.0), e_f: rng.gen_range(0.8..2.5) }).collect()
    }
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::testing::*;
    use super::*;
    use crate::network::{build_grid, node_and_line_power, Line};
    use crate::params::testing::sample_standard;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn state_for(order: Order, e: f64) -> MachineState {
        let v: Vec<f64> = match order {
            Order::Six => vec![0.2, 0.0, e, 0.0, e, 0.0],
            Order::Five => vec![0.2, 0.0, e, e, 0.0],
            Order::Four => vec![0.2, 0.0, e, 0.0],
            Order::Three => vec![0.2, 0.0, e],
            Order::Two => vec![0.2, 0.0],
        };
        MachineState::from_values(order, &v, e, 0.0).unwrap()
    }

    #[test]
    fn open_circuit_balance() {
        for order in Order::ALL {
            let mut sp = sample_standard();
            if order == Order::Five {
                sp.x_q = sp.x_q1;
            }
            let s = state_for(order, 1.1);
            let d = single_rhs(&sp, &s, 0.0, 0.0, &MachineInputs { p_m: 0.0, e_f: 1.1 }).unwrap();
            assert_eq!(d[0], 0.0);
            if order != Order::Two {
                assert_eq!(d[2], 0.0);
            }
            assert!(d.iter().all(|v| v.abs() < 1e-15), "order {order}: {d:?}");
        }
    }

    #[test]
    fn classical_swing_balance() {
        let mut sp = sample_standard();
        sp.damping = 0.3;
        sp.x_q1 = sp.x_d1;
        let e = 1.0;
        let (i_d, i_q) = (0.0, 0.4);
        // P_e = |E| cos(0)·I_q = 0.4
        let s = MachineState::Two { theta: Angle(0.1), p: 0.0, e_mag: e, alpha: 0.0 };
        let d = single_rhs(&sp, &s, i_d, i_q, &MachineInputs { p_m: 0.4, e_f: 0.0 }).unwrap();
        assert_eq!(d, vec![0.0, 0.0]);
        let s = MachineState::Two { theta: Angle(0.1), p: 0.02, e_mag: e, alpha: 0.0 };
        let d = single_rhs(&sp, &s, i_d, i_q, &MachineInputs { p_m: 0.4, e_f: 0.0 }).unwrap();
        let dw = 0.02 / sp.inertia;
        assert!((d[0] - dw).abs() < 1e-15);
        assert!((d[1] + sp.damping * dw).abs() < 1e-15);
    }

    #[test]
    fn sixth_order_matches_written_out_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let sp = machine_for(Order::Six, &mut rng);
            let mut sp = sp;
            sp.x_q2 = sp.x_d2 * rng.gen_range(0.8..1.0);
            let (d, p, eq1, ed1, eq2, ed2) = (
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-0.1..0.1),
                rng.gen_range(0.5..1.5),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(0.5..1.5),
                rng.gen_range(-0.5..0.5),
            );
            let (id, iq) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let u = MachineInputs { p_m: rng.gen_range(-1.0..1.0), e_f: rng.gen_range(0.5..3.0) };
            let s = MachineState::Six { delta: Angle(d), p, e_q1: eq1, e_d1: ed1, e_q2: eq2, e_d2: ed2 };
            let got = single_rhs(&sp, &s, id, iq, &u).unwrap();
            let m = sp.inertia;
            let want = [
                p / m,
                u.p_m - ed2 * id - eq2 * iq - (sp.x_d2 - sp.x_q2) * id * iq,
                (u.e_f - eq1 + id * (sp.x_d - sp.x_d1)) / sp.t_do1,
                (-ed1 - iq * (sp.x_q - sp.x_q1)) / sp.t_qo1,
                (eq1 - eq2 + id * (sp.x_d1 - sp.x_d2)) / sp.t_do2,
                (ed1 - ed2 - iq * (sp.x_q1 - sp.x_q2)) / sp.t_qo2,
            ];
            for k in 0..6 {
                assert!((got[k] - want[k]).abs() <= 1e-14 * want[k].abs().max(1.0));
            }
        }
    }

    #[test]
    fn fifth_order_needs_unscreened_q_axis() {
        let sp = sample_standard();
        let s = state_for(Order::Five, 1.0);
        assert!(matches!(single_rhs(&sp, &s, 0.0, 0.0, &MachineInputs::default()), Err(Error::Assumption(_))));
    }

    #[test]
    fn terminal_voltage_cases() {
        let sp = sample_standard();
        let s = MachineState::Six { delta: Angle(0.0), p: 0.0, e_q1: 1.0, e_d1: 0.1, e_q2: 0.9, e_d2: 0.2 };
        assert_eq!(terminal_voltage(&sp, &s, 0.0, 0.0).unwrap(), (0.2, 0.9));
        let s = MachineState::Six { delta: Angle(0.0), p: 0.0, e_q1: 0.0, e_d1: 0.0, e_q2: 0.0, e_d2: 0.0 };
        let (vd, vq) = terminal_voltage(&sp, &s, 0.0, 1.0).unwrap();
        assert!((vd + 0.25).abs() < 1e-15 && vq == 0.0);
        let mut sp2 = sp;
        sp2.x_q2 = 0.2;
        assert!((terminal_voltage(&sp2, &s, 0.0, 1.0).unwrap().0 + 0.2).abs() < 1e-15);
        let s2 = MachineState::Two { theta: Angle(0.0), p: 0.0, e_mag: 1.0, alpha: 0.0 };
        assert!(matches!(terminal_voltage(&sp, &s2, 0.0, 0.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn terminal_voltages_satisfy_the_line_equation() {
        // two machines joined by one line: jX_T I_01 = V_0 − e^{−jδ_01} V_1
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let mm = random_system(Order::Six, 2, &mut rng);
            let x = random_state(&mm, &mut rng);
            let (delta, e_d, e_q) = mm.network_emfs(&x).unwrap();
            let (i_d, i_q) = dq_currents(mm.grid(), &delta, &e_d, &e_q).unwrap();
            let v0 = terminal_voltage(&mm.params()[0], &mm.node_state(&x, 0), i_d[0], i_q[0]).unwrap();
            let v1 = terminal_voltage(&mm.params()[1], &mm.node_state(&x, 1), i_d[1], i_q[1]).unwrap();
            let x_t = mm.grid().lines()[0].x_t;
            let p0 = crate::frames::phasor(v0.0, v0.1);
            let p1 = crate::frames::phasor(v1.0, v1.1);
            let i0 = crate::frames::phasor(i_d[0], i_q[0]);
            let lhs = num_complex::Complex64::i() * x_t * i0;
            let rhs = p0 - crate::frames::rotate_phasor(p1, Angle(delta[0] - delta[1]));
            assert!((lhs - rhs).norm() < 1e-12, "{lhs} vs {rhs}");
        }
    }

    fn two_machine(order: Order) -> MultiMachine {
        let mut sp = sample_standard();
        sp.x_q2 = sp.x_d2;
        if !order.is_subtransient() {
            sp.x_q1 = sp.x_d1;
            sp.x_q2 = sp.x_d2.min(sp.x_q1 * 0.9);
        }
        if order == Order::Five {
            sp.x_q = sp.x_q1;
        }
        let xs = order.series_reactance(&sp);
        let grid = build_grid(2, &[Line { from: 0, to: 1, x_t: 0.5 }], &[xs, xs]).unwrap();
        if order == Order::Two {
            MultiMachine::classical(ClassicalGrid::lossless(grid), vec![sp, sp], vec![1.0, 1.0], vec![0.0, 0.0])
                .unwrap()
        } else {
            MultiMachine::new(order, grid, vec![sp, sp]).unwrap()
        }
    }

    #[test]
    fn symmetric_equilibrium_is_stationary() {
        for order in Order::ALL {
            let mm = two_machine(order);
            let lay = mm.layout();
            let mut x = vec![0.0; lay.len()];
            x[0] = 0.3;
            x[1] = 0.3;
            for v in [Var::Eq1, Var::Eq2] {
                if let Some(r) = lay.block(v) {
                    x[r].fill(1.05);
                }
            }
            let u = [MachineInputs { p_m: 0.0, e_f: 1.05 }; 2];
            let dx = mm.rhs(&x, &u).unwrap();
            assert!(dx.iter().all(|v| v.abs() < 1e-14), "order {order}: {dx:?}");
        }
    }

    fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if f(a) * f(m) <= 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn classical_two_machine_equilibrium() {
        let mut sp = sample_standard();
        sp.x_q1 = sp.x_d1;
        sp.x_q2 = 0.25;
        sp.x_d1 = 0.3;
        sp.x_q1 = 0.3;
        sp.damping = 0.1;
        let grid = build_grid(2, &[Line { from: 0, to: 1, x_t: 0.4 }], &[0.3, 0.3]).unwrap();
        assert!((grid.b(0, 1) + 1.0).abs() < 1e-15);
        let mm = MultiMachine::classical(ClassicalGrid::lossless(grid), vec![sp, sp], vec![1.0, 1.0], vec![0.0, 0.0])
            .unwrap();
        let th = bisect(|t| 0.5 - t.sin(), 0.0, 1.5);
        assert!((th - 0.523599).abs() < 1e-6);
        let u = [MachineInputs { p_m: 0.5, e_f: 0.0 }, MachineInputs { p_m: -0.5, e_f: 0.0 }];
        let dx = mm.rhs(&[th, 0.0, 0.0, 0.0], &u).unwrap();
        assert!(dx.iter().all(|v| v.abs() < 1e-14), "{dx:?}");
    }

    #[test]
    fn classical_momentum_sum_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let n = rng.gen_range(2..6);
            let mm = random_system(Order::Two, n, &mut rng);
            // uniform damping
            let d = mm.params()[0].damping;
            let params: Vec<_> = mm.params().iter().map(|sp| StandardParams { damping: d, ..*sp }).collect();
            let mm = MultiMachine::classical(mm.network().clone(), params, mm.e_mag().to_vec(), mm.alpha().to_vec())
                .unwrap();
            let x = random_state(&mm, &mut rng);
            let mut u = random_inputs(n, &mut rng);
            let s: f64 = u.iter().map(|v| v.p_m).sum();
            u[0].p_m -= s;
            let dx = mm.rhs(&x, &u).unwrap();
            let lhs: f64 = dx[n..].iter().sum();
            let rhs: f64 = -d * mm.frequency_deviation(&x).unwrap().iter().sum::<f64>();
            assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn order_four_degenerates_to_order_three() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let mut sp = machine_for(Order::Four, &mut rng);
            sp.x_q = sp.x_q1;
            let (d, p, eq1) = (rng.gen_range(-2.0..2.0), rng.gen_range(-0.1..0.1), rng.gen_range(0.5..1.5));
            let (id, iq) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let u = MachineInputs { p_m: 0.3, e_f: 1.7 };
            let four =
                single_rhs(&sp, &MachineState::Four { delta: Angle(d), p, e_q1: eq1, e_d1: 0.0 }, id, iq, &u).unwrap();
            let three = single_rhs(&sp, &MachineState::Three { delta: Angle(d), p, e_q1: eq1 }, id, iq, &u).unwrap();
            assert_eq!(&four[..3], &three[..]);
            assert_eq!(four[3], 0.0);
        }
    }

    #[test]
    fn order_six_on_the_slow_manifold_matches_order_four() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let mut sp = machine_for(Order::Six, &mut rng);
            sp.x_q2 = sp.x_d2 * 0.9;
            sp.damping = 0.0;
            let (d, p, eq1, ed1) = (0.4, rng.gen_range(-0.1..0.1), rng.gen_range(0.5..1.5), rng.gen_range(-0.5..0.5));
            let (id, iq) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let eq2 = eq1 + id * sp.xhat_d1();
            let ed2 = ed1 - iq * sp.xhat_q1();
            let u = MachineInputs { p_m: 0.2, e_f: 2.0 };
            let six = single_rhs(
                &sp,
                &MachineState::Six { delta: Angle(d), p, e_q1: eq1, e_d1: ed1, e_q2: eq2, e_d2: ed2 },
                id,
                iq,
                &u,
            )
            .unwrap();
            let four =
                single_rhs(&sp, &MachineState::Four { delta: Angle(d), p, e_q1: eq1, e_d1: ed1 }, id, iq, &u).unwrap();
            for k in 0..4 {
                assert!((six[k] - four[k]).abs() < 1e-12, "{k}: {} vs {}", six[k], four[k]);
            }
            assert!(six[4].abs() < 1e-12 && six[5].abs() < 1e-12);
        }
    }

    #[test]
    fn classical_power_matches_dq_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let n = rng.gen_range(2..6);
            let mm = random_system(Order::Two, n, &mut rng);
            let x = random_state(&mm, &mut rng);
            let pe = mm.electrical_power(&x).unwrap();
            let delta: Vec<f64> = (0..n).map(|i| x[i] - mm.alpha()[i]).collect();
            let e_d: Vec<f64> = (0..n).map(|i| mm.e_mag()[i] * mm.alpha()[i].sin()).collect();
            let e_q: Vec<f64> = (0..n).map(|i| mm.e_mag()[i] * mm.alpha()[i].cos()).collect();
            let pf = node_and_line_power(mm.grid(), &delta, &e_d, &e_q).unwrap();
            for (a, b) in pe.iter().zip(&pf.p_e) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn assembly_rejects_assumption_violations() {
        let sp = sample_standard();
        let grid = build_grid(1, &[], &[sp.x_d1]).unwrap();
        // transient saliency present in the sample machine
        assert!(matches!(MultiMachine::new(Order::Three, grid.clone(), vec![sp]), Err(Error::Assumption(_))));
        let mut sp3 = sp;
        sp3.x_q1 = sp.x_d1;
        sp3.x_q2 = 0.2;
        assert!(MultiMachine::new(Order::Three, grid.clone(), vec![sp3]).is_ok());
        // series mismatch
        let g6 = build_grid(1, &[], &[sp.x_d1]).unwrap();
        assert!(matches!(MultiMachine::new(Order::Six, g6, vec![sp]), Err(Error::Assumption(_))));
        let mut bad = sp3;
        bad.x_d1 = 2.0;
        assert!(matches!(MultiMachine::new(Order::Three, grid, vec![bad]), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn layout_names_and_indices() {
        let lay = Layout::new(Order::Five, 2);
        assert_eq!(lay.len(), 10);
        assert_eq!(lay.index(Var::Eq2, 1), Some(7));
        assert_eq!(lay.index(Var::Ed1, 0), None);
        assert_eq!(lay.names()[0], "delta_0");
        assert_eq!(lay.names()[9], "Ed2_1");
        assert_eq!(Layout::new(Order::Two, 1).names(), vec!["theta_0", "p_0"]);
        assert_eq!(Order::try_from(6), Ok(Order::Six));
        assert!(Order::try_from(7).is_err());
    }

    #[test]
    fn momentum_conversion_round_trip() {
        assert_eq!(frequency_from_momentum(momentum_from_frequency(0.25, 0.04), 0.04), 0.25);
    }
}

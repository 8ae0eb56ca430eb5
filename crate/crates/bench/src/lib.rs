//! Deterministic systems for the benchmarks.

use machnet::machines::{MachineInputs, MultiMachine, Order};
use machnet::network::{build_grid, ClassicalGrid, Line};
use machnet::params::{StandardParams, OMEGA_S_50HZ};

/// A typical machine, adjusted to the saliency assumptions of `order`.
pub fn machine(order: Order) -> StandardParams {
    let mut sp = StandardParams {
        x_d: 1.8,
        x_q: 1.7,
        x_d1: 0.3,
        x_q1: 0.3,
        x_d2: 0.25,
        x_q2: 0.25,
        t_do1: 8.0,
        t_qo1: 0.4,
        t_do2: 0.03,
        t_qo2: 0.05,
        inertia: 0.05,
        damping: 0.02,
        omega_s: OMEGA_S_50HZ,
    };
    if order == Order::Five {
        sp.x_q = sp.x_q1;
    }
    sp
}

/// Ring of `n` machines with a chord every fourth node.
pub fn ring(n: usize) -> Vec<Line> {
    let mut lines: Vec<Line> =
        (0..n).map(|i| Line { from: i, to: (i + 1) % n, x_t: 0.3 + 0.01 * (i % 7) as f64 }).collect();
    if n < 3 {
        lines.truncate(n - 1);
    }
    for i in (0..n).step_by(4) {
        let j = (i + n / 2) % n;
        if n > 4 && j != i && !lines.iter().any(|l| (l.from == i && l.to == j) || (l.from == j && l.to == i)) {
            lines.push(Line { from: i, to: j, x_t: 0.5 });
        }
    }
    lines
}

pub fn ring_system(order: Order, n: usize) -> MultiMachine {
    let sp = machine(order);
    let params = vec![sp; n];
    let xs = vec![order.series_reactance(&sp); n];
    let grid = build_grid(n, &ring(n), &xs).expect("ring is connected");
    if order == Order::Two {
        MultiMachine::classical(ClassicalGrid::lossless(grid), params, vec![1.1; n], vec![0.0; n]).expect("valid")
    } else {
        MultiMachine::new(order, grid, params).expect("valid")
    }
}

/// A smooth, non-equilibrium state.
pub fn spread_state(mm: &MultiMachine) -> Vec<f64> {
    let lay = mm.layout();
    let mut x = vec![0.0; lay.len()];
    for (s, v) in mm.order().vars().iter().enumerate() {
        for i in 0..lay.n {
            let k = s * lay.n + i;
            let phase = i as f64 * 0.37;
            x[k] = match v {
                machnet::Var::Angle => 0.2 * phase.sin(),
                machnet::Var::Momentum => 1e-3 * phase.cos(),
                machnet::Var::Eq1 | machnet::Var::Eq2 => 1.0 + 0.05 * phase.cos(),
                machnet::Var::Ed1 | machnet::Var::Ed2 => 0.1 * phase.sin(),
            };
        }
    }
    x
}

pub fn balanced_inputs(n: usize) -> Vec<MachineInputs> {
    (0..n).map(|i| MachineInputs { p_m: if i % 2 == 0 { 0.2 } else { -0.2 }, e_f: 1.2 }).collect()
}

#![allow(dead_code)]

use machnet::machines::{MachineInputs, MultiMachine, Order, Var};
use machnet::network::{build_grid, ClassicalGrid, Line};
use machnet::params::{derive_standard, FundamentalParams, StandardParams, KAPPA, OMEGA_S_50HZ};
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
        omega_s: OMEGA_S_50HZ,
    }
}

/// Spanning tree plus a few chords.
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

pub fn system_on(order: Order, params: Vec<StandardParams>, lines: &[Line], rng: &mut impl Rng) -> MultiMachine {
    let n = params.len();
    let xs: Vec<_> = params.iter().map(|sp| order.series_reactance(sp)).collect();
    let grid = build_grid(n, lines, &xs).unwrap();
    if order == Order::Two {
        let e_mag = (0..n).map(|_| rng.gen_range(0.9..1.2)).collect();
        let alpha = (0..n).map(|_| rng.gen_range(-0.3..0.3)).collect();
        MultiMachine::classical(ClassicalGrid::lossless(grid), params, e_mag, alpha).unwrap()
    } else {
        MultiMachine::new(order, grid, params).unwrap()
    }
}

pub fn random_system(order: Order, n: usize, rng: &mut impl Rng) -> MultiMachine {
    let params: Vec<_> = (0..n).map(|_| machine_for(order, rng)).collect();
    let lines = random_lines(n, rng);
    system_on(order, params, &lines, rng)
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

/// Winding data of an equal-mutual equivalent circuit with typical
/// reactances and open-circuit time constants at 50 Hz.
pub fn random_fundamental(rng: &mut impl Rng) -> FundamentalParams {
    let w = OMEGA_S_50HZ;
    loop {
        let x_l = rng.gen_range(0.1..0.2);
        let (x_ad, x_aq) = (rng.gen_range(1.0..2.0), rng.gen_range(0.9..1.9));
        let (x_fl, x_dl) = (rng.gen_range(0.1..0.3), rng.gen_range(0.05..0.15));
        let (x_gl, x_ql) = (rng.gen_range(0.3..1.0), rng.gen_range(0.05..0.15));
        let mut eps = || 1.0 + rng.gen_range(-0.02..0.02);
        let (m_f, m_d, l_fd) = (x_ad * eps(), x_ad * eps(), x_ad * eps());
        let (m_g, m_q, l_gq) = (x_aq * eps(), x_aq * eps(), x_aq * eps());
        let (l_f, l_d) = (x_fl + x_ad, x_dl + x_ad);
        let (l_g, l_q) = (x_gl + x_aq, x_ql + x_aq);
        let (t_d1, t_d2) = (rng.gen_range(4.0..10.0), rng.gen_range(0.02..0.05));
        let (t_q1, t_q2) = (rng.gen_range(0.3..1.5), rng.gen_range(0.03..0.1));
        let fp = FundamentalParams {
            l_d: (x_l + x_ad) / w,
            l_q: (x_l + x_aq) / w,
            l_f: l_f / w,
            l_g: l_g / w,
            l_dd: l_d / w,
            l_qq: l_q / w,
            l_fd: l_fd / w,
            l_gq: l_gq / w,
            m_f: m_f / (KAPPA * w),
            m_g: m_g / (KAPPA * w),
            m_dd: m_d / (KAPPA * w),
            m_qq: m_q / (KAPPA * w),
            r_s: 0.0,
            r_f: l_f / (w * t_d1),
            r_g: l_g / (w * t_q1),
            r_dd: (l_d - l_fd * l_fd / l_f) / (w * t_d2),
            r_qq: (l_q - l_gq * l_gq / l_g) / (w * t_q2),
            inertia: rng.gen_range(0.02..0.1) / w,
            damping: 0.0,
        };
        let typical =
            |sp: StandardParams| sp.validate().is_empty() && sp.x_d1 - sp.x_d2 >= 0.03 && sp.x_q1 - sp.x_q2 >= 0.03;
        if fp.check().is_ok() && derive_standard(&fp, w, 0.0).is_ok_and(typical) {
            return fp;
        }
    }
}

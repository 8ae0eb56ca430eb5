//! Explicit time integration and trajectory post-processing.
//!
//! Two methods: classical fixed-step RK4 and an adaptive Runge–Kutta–Fehlberg
//! 4(5) pair with cubic Hermite dense output. For the reduced models a fixed
//! step of about `T''_min / 20` (1 ms for typical machines) is adequate.

use std::io::Write;

use crate::error::{Error, Result};

pub const DEFAULT_STEP: f64 = 1e-3;
pub const DEFAULT_ATOL: f64 = 1e-9;
pub const DEFAULT_RTOL: f64 = 1e-9;
const MAX_STEPS: usize = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Rk4 { h: f64 },
    Rkf45 { atol: f64, rtol: f64, h0: Option<f64>, h_max: Option<f64> },
}

impl Method {
    pub fn rk4() -> Self {
        Method::Rk4 { h: DEFAULT_STEP }
    }

    pub fn rkf45() -> Self {
        Method::Rkf45 { atol: DEFAULT_ATOL, rtol: DEFAULT_RTOL, h0: None, h_max: None }
    }
}

/// Which times end up in the trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampling {
    /// Every accepted step.
    Steps,
    /// A uniform grid with the given spacing, always including both ends.
    /// RK4 snaps this to a whole number of steps.
    Every(f64),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Input samples; empty or one per time.
    pub inputs: Vec<Vec<f64>>,
    pub names: Vec<String>,
    pub monitors: Vec<(String, Vec<f64>)>,
    /// Accepted and rejected steps of the integrator.
    pub steps: usize,
    pub rejected: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> Option<&[f64]> {
        self.states.last().map(|v| v.as_slice())
    }

    /// Appends `other`, dropping its first sample when it repeats our last
    /// time. Monitors are cleared.
    pub fn append(&mut self, other: Trajectory) {
        let skip = match (self.times.last(), other.times.first()) {
            (Some(a), Some(b)) if a == b => 1,
            _ => 0,
        };
        self.times.extend(other.times.into_iter().skip(skip));
        self.states.extend(other.states.into_iter().skip(skip));
        if !other.inputs.is_empty() {
            self.inputs.extend(other.inputs.into_iter().skip(skip));
        }
        if self.names.is_empty() {
            self.names = other.names;
        }
        self.steps += other.steps;
        self.rejected += other.rejected;
        self.monitors.clear();
    }

    /// Evaluates `u(t)` at every sample.
    pub fn record_inputs(&mut self, u: impl Fn(f64) -> Vec<f64>) {
        self.inputs = self.times.iter().map(|t| u(*t)).collect();
    }

    pub fn add_monitor(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: values.len() });
        }
        self.monitors.push((name.into(), values));
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        if let Some(k) = self.names.iter().position(|n| n == name) {
            return Some(self.states.iter().map(|s| s[k]).collect());
        }
        self.monitors.iter().find(|(n, _)| n == name).map(|(_, v)| v.clone())
    }

    /// CSV with header `t, <state names>, <monitor names>`, values printed
    /// with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend(self.names.iter().cloned());
        header.extend(self.monitors.iter().map(|(n, _)| n.clone()));
        writeln!(w, "{}", header.join(","))?;
        for (k, t) in self.times.iter().enumerate() {
            write!(w, "{t:.16e}")?;
            for v in &self.states[k] {
                write!(w, ",{v:.16e}")?;
            }
            for (_, m) in &self.monitors {
                write!(w, ",{:.16e}", m[k])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn check_finite(t: f64, x: &[f64]) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(t))
    }
}

fn axpy(x: &[f64], h: f64, ks: &[(&[f64], f64)]) -> Vec<f64> {
    let mut out = x.to_vec();
    for (k, c) in ks {
        if *c != 0.0 {
            for (o, v) in out.iter_mut().zip(k.iter()) {
                *o += h * c * v;
            }
        }
    }
    out
}

/// Integrates `ẋ = f(t, x)` from `t0` to `t1`.
pub fn integrate<F>(mut f: F, x0: &[f64], t0: f64, t1: f64, method: Method, sampling: Sampling) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::InvalidParams("time span must satisfy t0 < t1".into()));
    }
    if let Sampling::Every(dt) = sampling {
        if !(dt > 0.0) {
            return Err(Error::InvalidParams("sampling interval must be > 0".into()));
        }
    }
    check_finite(t0, x0)?;
    let f0 = f(t0, x0)?;
    check_finite(t0, &f0)?;
    match method {
        Method::Rk4 { h } => {
            if !(h > 0.0) {
                return Err(Error::InvalidParams("step must be > 0".into()));
            }
            rk4(f, x0, t0, t1, h, sampling)
        }
        Method::Rkf45 { atol, rtol, h0, h_max } => {
            if !(atol > 0.0 && rtol >= 0.0) {
                return Err(Error::InvalidParams("tolerances must be positive".into()));
            }
            rkf45(f, x0, f0, t0, t1, atol, rtol, h0, h_max, sampling)
        }
    }
}

fn rk4<F>(mut f: F, x0: &[f64], t0: f64, t1: f64, h: f64, sampling: Sampling) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let n_steps = ((t1 - t0) / h).ceil().max(1.0) as usize;
    let h = (t1 - t0) / n_steps as f64;
    let stride = match sampling {
        Sampling::Steps => 1,
        Sampling::Every(dt) => ((dt / h).round() as usize).max(1),
    };
    let mut traj = Trajectory { times: vec![t0], states: vec![x0.to_vec()], ..Default::default() };
    let mut x = x0.to_vec();
    for k in 0..n_steps {
        let t = t0 + k as f64 * h;
        let k1 = f(t, &x)?;
        let k2 = f(t + 0.5 * h, &axpy(&x, h, &[(&k1, 0.5)]))?;
        let k3 = f(t + 0.5 * h, &axpy(&x, h, &[(&k2, 0.5)]))?;
        let k4 = f(t + h, &axpy(&x, h, &[(&k3, 1.0)]))?;
        x = axpy(&x, h, &[(&k1, 1.0 / 6.0), (&k2, 1.0 / 3.0), (&k3, 1.0 / 3.0), (&k4, 1.0 / 6.0)]);
        let tn = if k + 1 == n_steps { t1 } else { t0 + (k + 1) as f64 * h };
        check_finite(tn, &x)?;
        if (k + 1) % stride == 0 || k + 1 == n_steps {
            traj.times.push(tn);
            traj.states.push(x.clone());
        }
    }
    traj.steps = n_steps;
    Ok(traj)
}

// Fehlberg coefficients.
const C: [f64; 6] = [0.0, 0.25, 3.0 / 8.0, 12.0 / 13.0, 1.0, 0.5];
const A: [[f64; 5]; 6] = [
    [0.0; 5],
    [0.25, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 32.0, 9.0 / 32.0, 0.0, 0.0, 0.0],
    [1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0, 0.0, 0.0],
    [439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0, 0.0],
    [-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0],
];
const B5: [f64; 6] = [16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0, -9.0 / 50.0, 2.0 / 55.0];
const B4: [f64; 6] = [25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -1.0 / 5.0, 0.0];

fn hermite(t0: f64, x0: &[f64], f0: &[f64], t1: f64, x1: &[f64], f1: &[f64], t: f64) -> Vec<f64> {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let (s2, s3) = (s * s, s * s * s);
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    (0..x0.len()).map(|i| h00 * x0[i] + h10 * h * f0[i] + h01 * x1[i] + h11 * h * f1[i]).collect()
}

#[allow(clippy::too_many_arguments)]
fn rkf45<F>(
    mut f: F,
    x0: &[f64],
    f0: Vec<f64>,
    t0: f64,
    t1: f64,
    atol: f64,
    rtol: f64,
    h0: Option<f64>,
    h_max: Option<f64>,
    sampling: Sampling,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let span = t1 - t0;
    let h_max = h_max.unwrap_or(span).min(span);
    let scaled =
        |v: &[f64], x: &[f64]| v.iter().zip(x).fold(0.0f64, |a, (vi, xi)| a.max(vi.abs() / (atol + rtol * xi.abs())));
    let mut h = match h0 {
        Some(h) if h > 0.0 => h,
        _ => {
            let d0 = scaled(x0, x0);
            let d1 = scaled(&f0, x0);
            if d0 < 1e-5 || d1 < 1e-5 {
                1e-6 * span.max(1.0)
            } else {
                0.01 * d0 / d1
            }
        }
    }
    .min(h_max);

    let mut traj = Trajectory { times: vec![t0], states: vec![x0.to_vec()], ..Default::default() };
    let mut next_sample = 1usize;
    let sample_dt = match sampling {
        Sampling::Every(dt) => Some(dt),
        Sampling::Steps => None,
    };
    let mut t = t0;
    let mut x = x0.to_vec();
    let mut fx = f0;
    let mut accepted = 0usize;
    while t < t1 {
        if accepted + traj.rejected > MAX_STEPS {
            return Err(Error::Numerical(format!("step limit exceeded at t = {t}")));
        }
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        let h_min = 1e-14 * t.abs().max(1.0);
        if h < h_min && !last {
            return Err(Error::StepUnderflow { t, h });
        }
        let mut k: Vec<Vec<f64>> = Vec::with_capacity(6);
        k.push(fx.clone());
        for s in 1..6 {
            let terms: Vec<(&[f64], f64)> = (0..s).map(|j| (k[j].as_slice(), A[s][j])).collect();
            let xs = axpy(&x, h, &terms);
            k.push(f(t + C[s] * h, &xs)?);
        }
        let terms5: Vec<(&[f64], f64)> = (0..6).map(|j| (k[j].as_slice(), B5[j])).collect();
        let x5 = axpy(&x, h, &terms5);
        let err = (0..x.len()).fold(0.0f64, |a, i| {
            let e: f64 = h * (0..6).map(|j| (B5[j] - B4[j]) * k[j][i]).sum::<f64>();
            let sc = atol + rtol * x[i].abs().max(x5[i].abs());
            a.max(e.abs() / sc)
        });
        if !err.is_finite() {
            traj.rejected += 1;
            h *= 0.25;
            if h < h_min {
                return Err(Error::NonFinite(t));
            }
            continue;
        }
        if err <= 1.0 {
            let tn = if last { t1 } else { t + h };
            check_finite(tn, &x5)?;
            let fn_ = f(tn, &x5)?;
            match sample_dt {
                None => {
                    traj.times.push(tn);
                    traj.states.push(x5.clone());
                }
                Some(dt) => {
                    loop {
                        let ts = t0 + next_sample as f64 * dt;
                        if ts >= t1 - 1e-12 * span || ts > tn {
                            break;
                        }
                        traj.times.push(ts);
                        traj.states.push(hermite(t, &x, &fx, tn, &x5, &fn_, ts));
                        next_sample += 1;
                    }
                    if last {
                        traj.times.push(t1);
                        traj.states.push(x5.clone());
                    }
                }
            }
            t = tn;
            x = x5;
            fx = fn_;
            accepted += 1;
        } else {
            traj.rejected += 1;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h * factor).min(h_max);
        if h < h_min && t < t1 {
            return Err(Error::StepUnderflow { t, h });
        }
    }
    traj.steps = accepted;
    Ok(traj)
}

/// Derivative of sampled data by 5-point Lagrange differentiation: centred
/// where possible and one-sided at the ends. Works on non-uniform grids.
pub fn five_point_derivative(times: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    let n = times.len();
    if values.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: values.len() });
    }
    if n < 5 {
        return Err(Error::Numerical(format!("derivative stencil needs at least 5 samples, got {n}")));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Numerical("sample times must be strictly increasing".into()));
    }
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let s = k.saturating_sub(2).min(n - 5);
        let ts = &times[s..s + 5];
        let x = times[k];
        let mut d = 0.0;
        for j in 0..5 {
            // L_j'(x) = Σ_{m≠j} 1/(t_j − t_m) Π_{l≠j,m} (x − t_l)/(t_j − t_l)
            let mut lj = 0.0;
            for m in 0..5 {
                if m == j {
                    continue;
                }
                let mut prod = 1.0 / (ts[j] - ts[m]);
                for l in 0..5 {
                    if l != j && l != m {
                        prod *= (x - ts[l]) / (ts[j] - ts[l]);
                    }
                }
                lj += prod;
            }
            d += lj * values[s + j];
        }
        out.push(d);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DissipationReport {
    pub energy: Vec<f64>,
    /// Stencil estimate of dH/dt.
    pub rate: Vec<f64>,
    pub supply: Vec<f64>,
    /// `max(dH/dt − supply)` over all samples.
    pub max_violation: f64,
}

/// Checks the dissipation inequality `dH/dt ≤ s(x, u)` along a trajectory.
/// `energy` and `supply` receive a state and the matching input sample
/// (empty when the trajectory has no inputs).
pub fn dissipation_monitor(
    traj: &Trajectory,
    mut energy: impl FnMut(&[f64], &[f64]) -> Result<f64>,
    mut supply: impl FnMut(&[f64], &[f64]) -> Result<f64>,
) -> Result<DissipationReport> {
    let empty: Vec<f64> = Vec::new();
    let u_at = |k: usize| if traj.inputs.is_empty() { &empty } else { &traj.inputs[k] };
    let mut h = Vec::with_capacity(traj.len());
    let mut s = Vec::with_capacity(traj.len());
    for k in 0..traj.len() {
        h.push(energy(&traj.states[k], u_at(k))?);
        s.push(supply(&traj.states[k], u_at(k))?);
    }
    let rate = five_point_derivative(&traj.times, &h)?;
    let max_violation = rate.iter().zip(&s).map(|(r, s)| r - s).fold(f64::NEG_INFINITY, f64::max);
    Ok(DissipationReport { energy: h, rate, supply: s, max_violation })
}

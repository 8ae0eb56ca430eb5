//! Scenario files: strict JSON describing machines, grid, initial state,
//! input schedule and simulation settings.

use std::path::Path;

use machnet::machines::{MachineInputs, MultiMachine, Order, Var};
use machnet::network::{build_grid, ClassicalGrid, Line};
use machnet::params::{derive_standard, FundamentalParams, StandardParams, OMEGA_S_50HZ};
use machnet::ph::{check_dissipation, find_equilibrium, Equilibrium, NewtonOptions};
use machnet::sim::{Method, Sampling};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub order: Order,
    /// Used when deriving machines from fundamental parameters.
    #[serde(default)]
    pub omega_s: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    pub machines: Vec<MachineSpec>,
    #[serde(default)]
    pub topology: Vec<Edge>,
    #[serde(default)]
    pub initial: Initial,
    pub inputs: Vec<ScheduleEntry>,
    #[serde(default)]
    pub simulation: SimSettings,
    #[serde(default)]
    pub outputs: Outputs,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineSpec {
    #[serde(default)]
    pub standard: Option<StandardParams>,
    #[serde(default)]
    pub fundamental: Option<FundamentalParams>,
    /// Damping for machines given by fundamental parameters.
    #[serde(rename = "D", default)]
    pub damping: Option<f64>,
    /// Constant emf magnitude of the classical model.
    #[serde(rename = "E_mag", default)]
    pub e_mag: Option<f64>,
    #[serde(default)]
    pub alpha: f64,
    #[serde(rename = "G_ii", default)]
    pub g_ii: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    #[serde(rename = "X_T")]
    pub x_t: f64,
    #[serde(rename = "G_ik", default)]
    pub g_ik: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Initial {
    Equilibrium {
        #[serde(default)]
        guess: Option<Vec<f64>>,
        /// Relative, seeded perturbation applied to every state component.
        #[serde(default)]
        perturb: f64,
    },
    State {
        values: Vec<f64>,
    },
}

impl Default for Initial {
    fn default() -> Self {
        Initial::Equilibrium { guess: None, perturb: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntry {
    pub t: f64,
    #[serde(rename = "P_m")]
    pub p_m: Vec<f64>,
    #[serde(rename = "E_f", default)]
    pub e_f: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    #[default]
    Rk4,
    Rkf45,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSettings {
    pub t_end: f64,
    #[serde(default)]
    pub method: MethodName,
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub atol: Option<f64>,
    #[serde(default)]
    pub rtol: Option<f64>,
    #[serde(default)]
    pub sample_dt: Option<f64>,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings { t_end: 10.0, method: MethodName::Rk4, h: None, atol: None, rtol: None, sample_dt: None }
    }
}

impl SimSettings {
    pub fn method(&self) -> Method {
        match self.method {
            MethodName::Rk4 => Method::Rk4 { h: self.h.unwrap_or(machnet::sim::DEFAULT_STEP) },
            MethodName::Rkf45 => Method::Rkf45 {
                atol: self.atol.unwrap_or(machnet::sim::DEFAULT_ATOL),
                rtol: self.rtol.unwrap_or(machnet::sim::DEFAULT_RTOL),
                h0: self.h,
                h_max: None,
            },
        }
    }

    pub fn sampling(&self) -> Sampling {
        self.sample_dt.map_or(Sampling::Steps, Sampling::Every)
    }
}

/// File names relative to the output directory.
#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default)]
    pub trajectory: Option<String>,
    #[serde(default)]
    pub monitors: Option<String>,
    #[serde(default)]
    pub equilibrium: Option<String>,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Invalid(msg.into())
}

fn finite_pos(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

impl Scenario {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Invalid(m) => invalid(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let sc: Scenario = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
        sc.check_shape()?;
        Ok(sc)
    }

    pub fn n(&self) -> usize {
        self.machines.len()
    }

    /// Structural checks that need no model code.
    pub fn check_shape(&self) -> Result<(), CliError> {
        let n = self.n();
        if n == 0 {
            return Err(invalid("scenario has no machines"));
        }
        if let Some(w) = self.omega_s {
            if !finite_pos(w) {
                return Err(invalid("omega_s must be > 0"));
            }
        }
        for (i, m) in self.machines.iter().enumerate() {
            match (&m.standard, &m.fundamental) {
                (Some(_), None) | (None, Some(_)) => {}
                _ => return Err(invalid(format!("machine {i}: give exactly one of \"standard\" and \"fundamental\""))),
            }
            if m.standard.is_some() && m.damping.is_some() {
                return Err(invalid(format!("machine {i}: \"D\" belongs inside the standard block")));
            }
        }
        for (k, e) in self.topology.iter().enumerate() {
            if e.from >= n || e.to >= n {
                return Err(invalid(format!("edge {k}: node out of range")));
            }
        }
        if self.inputs.is_empty() {
            return Err(invalid("input schedule is empty"));
        }
        if self.inputs[0].t != 0.0 {
            return Err(invalid("input schedule must start at t = 0"));
        }
        for (k, s) in self.inputs.iter().enumerate() {
            if k > 0 && s.t.partial_cmp(&self.inputs[k - 1].t) != Some(std::cmp::Ordering::Greater) {
                return Err(invalid(format!("input schedule entry {k}: times must increase")));
            }
            if s.p_m.len() != n {
                return Err(invalid(format!("input schedule entry {k}: P_m needs {n} values")));
            }
            if !(s.e_f.is_empty() || s.e_f.len() == n) {
                return Err(invalid(format!("input schedule entry {k}: E_f needs {n} values")));
            }
            if s.p_m.iter().chain(&s.e_f).any(|v| !v.is_finite()) {
                return Err(invalid(format!("input schedule entry {k}: non-finite value")));
            }
        }
        let sim = &self.simulation;
        if !finite_pos(sim.t_end) {
            return Err(invalid("simulation.t_end must be > 0"));
        }
        for (name, v) in [("h", sim.h), ("atol", sim.atol), ("sample_dt", sim.sample_dt)] {
            if let Some(v) = v {
                if !finite_pos(v) {
                    return Err(invalid(format!("simulation.{name} must be > 0")));
                }
            }
        }
        if let Some(r) = sim.rtol {
            if !(r.is_finite() && r >= 0.0) {
                return Err(invalid("simulation.rtol must be >= 0"));
            }
        }
        if let Initial::Equilibrium { perturb, .. } = self.initial {
            if !(perturb.is_finite() && perturb >= 0.0) {
                return Err(invalid("initial.perturb must be >= 0"));
            }
        }
        Ok(())
    }

    pub fn standard_params(&self) -> Result<Vec<StandardParams>, CliError> {
        let w = self.omega_s.unwrap_or(OMEGA_S_50HZ);
        self.machines
            .iter()
            .enumerate()
            .map(|(i, m)| match (&m.standard, &m.fundamental) {
                (Some(sp), _) => Ok(*sp),
                (_, Some(fp)) => derive_standard(fp, w, m.damping.unwrap_or(0.0))
                    .map_err(|e| CliError::Model(e).context(format!("machine {i}"))),
                _ => Err(invalid(format!("machine {i}: no parameters"))),
            })
            .collect()
    }

    /// Parameter validation, then the dissipation condition for order 6,
    /// then network assembly with all modelling assumptions.
    pub fn build(&self) -> Result<MultiMachine, CliError> {
        let params = self.standard_params()?;
        for (i, sp) in params.iter().enumerate() {
            let v = sp.validate();
            if !v.is_empty() {
                let list: Vec<String> = v.iter().map(|v| v.to_string()).collect();
                return Err(invalid(format!("machine {i}: {}", list.join(", "))));
            }
        }
        if self.order == Order::Six {
            check_dissipation(&params)?;
        }
        let lines: Vec<Line> = self.topology.iter().map(|e| Line { from: e.from, to: e.to, x_t: e.x_t }).collect();
        let xs: Vec<f64> = params.iter().map(|sp| self.order.series_reactance(sp)).collect();
        let grid = build_grid(self.n(), &lines, &xs)?;
        let lossy = self.machines.iter().any(|m| m.g_ii != 0.0) || self.topology.iter().any(|e| e.g_ik != 0.0);
        let mm = if self.order == Order::Two {
            let e_mag = self
                .machines
                .iter()
                .enumerate()
                .map(|(i, m)| m.e_mag.ok_or_else(|| invalid(format!("machine {i}: order 2 needs E_mag"))))
                .collect::<Result<Vec<_>, _>>()?;
            let alpha = self.machines.iter().map(|m| m.alpha).collect();
            let net = if lossy {
                ClassicalGrid::with_conductances(
                    grid,
                    self.machines.iter().map(|m| m.g_ii).collect(),
                    self.topology.iter().map(|e| e.g_ik).collect(),
                )?
            } else {
                ClassicalGrid::lossless(grid)
            };
            MultiMachine::classical(net, params, e_mag, alpha)?
        } else {
            if lossy {
                return Err(machnet::Error::Unsupported(format!("conductances with order {}", self.order)).into());
            }
            MultiMachine::new(self.order, grid, params)?
        };
        Ok(mm)
    }

    pub fn inputs_at(&self, t: f64) -> Vec<MachineInputs> {
        let k = self.inputs.iter().rposition(|s| s.t <= t).unwrap_or(0);
        let s = &self.inputs[k];
        (0..self.n()).map(|i| MachineInputs { p_m: s.p_m[i], e_f: s.e_f.get(i).copied().unwrap_or(0.0) }).collect()
    }

    /// Segment boundaries `0 = t_0 < … < t_end`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let t_end = self.simulation.t_end;
        let mut b: Vec<f64> = self.inputs.iter().map(|s| s.t).filter(|t| *t < t_end).collect();
        b.push(t_end);
        b
    }

    /// Default Newton start: zero angles and momenta, emfs at the field input.
    pub fn default_guess(&self, mm: &MultiMachine) -> Vec<f64> {
        let lay = mm.layout();
        let u = self.inputs_at(0.0);
        let mut x = vec![0.0; lay.len()];
        for var in [Var::Eq1, Var::Eq2] {
            if let Some(r) = lay.block(var) {
                for (i, k) in r.enumerate() {
                    x[k] = if u[i].e_f != 0.0 { u[i].e_f } else { 1.0 };
                }
            }
        }
        x
    }

    pub fn equilibrium(&self, mm: &MultiMachine, opts: NewtonOptions) -> Result<Equilibrium, CliError> {
        let guess = match &self.initial {
            Initial::Equilibrium { guess: Some(g), .. } => g.clone(),
            _ => self.default_guess(mm),
        };
        Ok(find_equilibrium(mm, &self.inputs_at(0.0), &guess, opts)?)
    }

    /// Initial state, and the equilibrium it was derived from if any.
    pub fn initial_state(
        &self,
        mm: &MultiMachine,
        opts: NewtonOptions,
    ) -> Result<(Vec<f64>, Option<Equilibrium>), CliError> {
        match &self.initial {
            Initial::State { values } => {
                mm.layout().check(values.len())?;
                Ok((values.clone(), None))
            }
            Initial::Equilibrium { perturb, .. } => {
                let eq = self.equilibrium(mm, opts)?;
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let x = eq.x.iter().map(|v| v * (1.0 + perturb * rng.gen_range(-1.0..=1.0))).collect();
                Ok((x, Some(eq)))
            }
        }
    }
}

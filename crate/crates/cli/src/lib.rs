//! Command-line front end: scenario validation, simulation, energy
//! evaluation, structure checks and equilibrium search.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use machnet::energy::{energy_breakdown, total_energy};
use machnet::machines::{MachineInputs, MultiMachine, Order};
use machnet::ph::{input_vector, passivity_certificate, ph_rhs, shifted_storage, NewtonOptions, PHSystem};
use machnet::sim::{five_point_derivative, integrate, Trajectory};
use machnet::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub mod scenario;

pub use scenario::Scenario;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_ASSUMPTION: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Invalid(String),
    Model(Error),
    Io(String),
    Context(String, Box<CliError>),
}

impl CliError {
    pub fn context(self, ctx: impl Into<String>) -> Self {
        CliError::Context(ctx.into(), Box::new(self))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::Io(_) => EXIT_IO,
            CliError::Context(_, e) => e.exit_code(),
            CliError::Model(e) => match e {
                Error::InvalidParams(_)
                | Error::SingularInductance { .. }
                | Error::Disconnected
                | Error::Topology(_)
                | Error::DimensionMismatch { .. } => EXIT_INVALID,
                Error::Assumption(_) | Error::DissipationNotPsd(_) | Error::Unsupported(_) => EXIT_ASSUMPTION,
                Error::NoConvergence { .. }
                | Error::NoEquilibrium(_)
                | Error::NotEquilibrium(_)
                | Error::StepUnderflow { .. }
                | Error::NonFinite(_)
                | Error::Numerical(_) => EXIT_NUMERICAL,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Invalid(m) | CliError::Io(m) => f.write_str(m),
            CliError::Model(e) => write!(f, "{e}"),
            CliError::Context(c, e) => write!(f, "{c}: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Model(e)
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "machnet", version, about = "Synchronous machine network simulator")]
pub struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads for batches of scenarios.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Override the model order of the scenario.
    #[arg(long, global = true, value_parser = parse_order)]
    pub order: Option<Order>,
    /// Newton tolerance, or the equivalence tolerance of ph-check.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Also write whitespace-separated .dat files.
    #[arg(long, global = true)]
    pub gnuplot: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a scenario without running it.
    Validate { scenario: PathBuf },
    /// Integrate one or more scenarios.
    Simulate {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
    },
    /// Print the energy components at a state.
    Energy { scenario: PathBuf, state: PathBuf },
    /// Assemble the port-Hamiltonian form and test it against the model.
    PhCheck { scenario: PathBuf },
    /// Solve for the equilibrium at the t = 0 inputs.
    Equilibrium { scenario: PathBuf },
}

fn parse_order(s: &str) -> Result<Order, String> {
    let v: u8 = s.parse().map_err(|_| format!("not an order: {s}"))?;
    Order::try_from(v).map_err(|e| e.to_string())
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code. Reports go to `out`, errors to stderr.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    if cli.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    if let Some(t) = cli.tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(CliError::Usage("--tol must be > 0".into()));
        }
    }
    let w = |r: std::io::Result<()>| r.map_err(|e| CliError::Io(e.to_string()));
    match &cli.command {
        Command::Validate { scenario } => w(out.write_all(validate(cli, scenario)?.as_bytes())),
        Command::Simulate { scenarios } => {
            std::fs::create_dir_all(&cli.out).map_err(|e| io_err(&cli.out, e))?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(cli.jobs)
                .build()
                .map_err(|e| CliError::Io(e.to_string()))?;
            let results: Vec<Result<String, CliError>> = pool.install(|| {
                scenarios.par_iter().map(|p| simulate(cli, p).map_err(|e| e.context(p.display().to_string()))).collect()
            });
            let mut first_err = None;
            for r in results {
                match r {
                    Ok(s) => w(out.write_all(s.as_bytes()))?,
                    Err(e) => {
                        eprintln!("error: {e}");
                        first_err.get_or_insert(e);
                    }
                }
            }
            first_err.map_or(Ok(()), Err)
        }
        Command::Energy { scenario, state } => w(out.write_all(energy(cli, scenario, state)?.as_bytes())),
        Command::PhCheck { scenario } => w(out.write_all(ph_check(cli, scenario)?.as_bytes())),
        Command::Equilibrium { scenario } => {
            std::fs::create_dir_all(&cli.out).map_err(|e| io_err(&cli.out, e))?;
            w(out.write_all(equilibrium(cli, scenario)?.as_bytes()))
        }
    }
}

fn load(cli: &Cli, path: &Path) -> Result<Scenario, CliError> {
    let mut sc = Scenario::from_path(path)?;
    if let Some(o) = cli.order {
        sc.order = o;
    }
    Ok(sc)
}

fn newton(cli: &Cli) -> NewtonOptions {
    NewtonOptions { tol: cli.tol.unwrap_or(NewtonOptions::default().tol), ..Default::default() }
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned())
}

fn has_ph(mm: &MultiMachine) -> bool {
    matches!(mm.order(), Order::Two | Order::Three | Order::Six) && mm.network().is_lossless()
}

fn validate(cli: &Cli, path: &Path) -> Result<String, CliError> {
    let sc = load(cli, path)?;
    let mm = sc.build()?;
    let mut s = String::new();
    s += &format!(
        "scenario: {}\norder: {}\nmachines: {}\nlines: {}\n",
        path.display(),
        sc.order,
        mm.n(),
        mm.grid().lines().len()
    );
    if sc.order == Order::Six {
        for (i, sp) in mm.params().iter().enumerate() {
            let m = sp.timescale_margins();
            s += &format!("margin_{i}: d={:e} q={:e}\n", m.d, m.q);
        }
    }
    if sc.order.is_subtransient() {
        if let machnet::sim::Method::Rk4 { h } = sc.simulation.method() {
            let fastest = mm.params().iter().map(|sp| sp.t_do2.min(sp.t_qo2)).fold(f64::INFINITY, f64::min);
            if h > fastest / 20.0 {
                log::warn!("step {h} exceeds T''/20 = {}", fastest / 20.0);
            }
        }
    }
    if matches!(sc.initial, scenario::Initial::Equilibrium { .. }) && mm.network().is_lossless() {
        let sum: f64 = sc.inputs_at(0.0).iter().map(|u| u.p_m).sum();
        if sum.abs() > 1e-12 * sc.inputs_at(0.0).iter().map(|u| u.p_m.abs()).sum::<f64>().max(1.0) {
            return Err(Error::NoEquilibrium(format!("sum of P_m at t = 0 is {sum:e}")).into());
        }
    }
    if let scenario::Initial::State { values } = &sc.initial {
        mm.layout().check(values.len())?;
    }
    s += "OK\n";
    Ok(s)
}

fn input_fn(sc: &Scenario, order: Order) -> impl Fn(f64) -> Vec<f64> + '_ {
    move |t| input_vector(order, &sc.inputs_at(t))
}

/// Integrates the scenario segment by segment over the input schedule.
pub fn run_scenario(sc: &Scenario, mm: &MultiMachine, x0: &[f64]) -> Result<Trajectory, CliError> {
    let bp = sc.breakpoints();
    let method = sc.simulation.method();
    let sampling = sc.simulation.sampling();
    let mut traj = Trajectory { names: mm.layout().names(), ..Default::default() };
    let mut x = x0.to_vec();
    for w in bp.windows(2) {
        let u: Vec<MachineInputs> = sc.inputs_at(w[0]);
        let seg = integrate(|_, x| mm.rhs(x, &u), &x, w[0], w[1], method, sampling)?;
        x = seg.last_state().expect("segment has samples").to_vec();
        traj.append(seg);
    }
    traj.names = mm.layout().names();
    traj.record_inputs(input_fn(sc, mm.order()));
    Ok(traj)
}

fn write_file(
    dir: &Path,
    name: &str,
    body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let file = std::fs::File::create(&path).map_err(|e| io_err(&path, e))?;
    let mut buf = std::io::BufWriter::new(file);
    body(&mut buf).and_then(|_| buf.flush()).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

fn gnuplot(traj: &Trajectory, w: &mut dyn Write) -> std::io::Result<()> {
    let mut csv = Vec::new();
    traj.write_csv(&mut csv)?;
    let text = String::from_utf8_lossy(&csv);
    for (k, line) in text.lines().enumerate() {
        if k == 0 {
            writeln!(w, "# {}", line.replace(',', " "))?;
        } else {
            writeln!(w, "{}", line.replace(',', " "))?;
        }
    }
    Ok(())
}

fn simulate(cli: &Cli, path: &Path) -> Result<String, CliError> {
    let sc = load(cli, path)?;
    let mm = sc.build()?;
    let (x0, eq) = sc.initial_state(&mm, newton(cli))?;
    log::info!("{}: integrating to t = {}", path.display(), sc.simulation.t_end);
    let mut traj = run_scenario(&sc, &mm, &x0)?;

    let n = mm.n();
    let pe: Vec<Vec<f64>> = traj.states.iter().map(|x| mm.electrical_power(x)).collect::<Result<_, _>>()?;
    let dw: Vec<Vec<f64>> = traj.states.iter().map(|x| mm.frequency_deviation(x)).collect::<Result<_, _>>()?;
    let lossless = mm.network().is_lossless();
    let h: Option<Vec<f64>> =
        if lossless { Some(traj.states.iter().map(|x| total_energy(&mm, x)).collect::<Result<_, _>>()?) } else { None };
    let sys = if has_ph(&mm) { Some(PHSystem::from_machines(mm.clone())?) } else { None };
    let storage = match (&sys, &eq) {
        (Some(sys), Some(eq)) => Some(shifted_storage(sys, &eq.x)?),
        _ => None,
    };
    if let Some(h) = &h {
        traj.add_monitor("H", h.clone())?;
    }
    if let Some(st) = &storage {
        traj.add_monitor("H_bar", traj.states.iter().map(|x| st.h(x)).collect::<Result<_, _>>()?)?;
    }
    for i in 0..n {
        traj.add_monitor(format!("P_e_{i}"), pe.iter().map(|v| v[i]).collect())?;
    }
    for i in 0..n {
        traj.add_monitor(format!("dw_{i}"), dw.iter().map(|v| v[i]).collect())?;
    }

    let st = stem(path);
    let tname = sc.outputs.trajectory.clone().unwrap_or_else(|| format!("{st}_trajectory.csv"));
    let tpath = write_file(&cli.out, &tname, |w| traj.write_csv(w))?;
    let mut report = format!("{}: {} samples, {} steps\n", path.display(), traj.len(), traj.steps);
    report += &format!("trajectory: {}\n", tpath.display());

    let mname = sc.outputs.monitors.clone().unwrap_or_else(|| format!("{st}_monitors.csv"));
    if let Some(stor) = &storage {
        let cert = passivity_certificate(stor, &traj)?;
        let mpath = write_file(&cli.out, &mname, |w| cert.write_csv(w))?;
        report += &format!("monitors: {}\n", mpath.display());
        report += &format!("max_violation: {:e}\nmax_abs_residual: {:e}\n", cert.max_violation, cert.max_abs_residual);
    } else if let (Some(h), true) = (&h, traj.len() >= 5) {
        let rate = five_point_derivative(&traj.times, h)?;
        let mpath = write_file(&cli.out, &mname, |w| {
            writeln!(w, "t,H,dH_dt")?;
            for k in 0..traj.len() {
                writeln!(w, "{:.16e},{:.16e},{:.16e}", traj.times[k], h[k], rate[k])?;
            }
            Ok(())
        })?;
        report += &format!("monitors: {}\n", mpath.display());
    }
    if cli.gnuplot {
        let gname = format!("{}.dat", tname.trim_end_matches(".csv"));
        let gpath = write_file(&cli.out, &gname, |w| gnuplot(&traj, w))?;
        report += &format!("gnuplot: {}\n", gpath.display());
    }
    let last = traj.last_state().expect("nonempty trajectory");
    report += &format!("t_end: {}\n", traj.times.last().unwrap());
    for (name, v) in traj.names.iter().zip(last) {
        report += &format!("{name}: {v:.12e}\n");
    }
    Ok(report)
}

#[derive(serde::Deserialize)]
#[serde(untagged)]
enum StateFile {
    Plain(Vec<f64>),
    Object { x: Vec<f64> },
}

fn energy(cli: &Cli, path: &Path, state: &Path) -> Result<String, CliError> {
    let sc = load(cli, path)?;
    let mm = sc.build()?;
    let text = std::fs::read_to_string(state).map_err(|e| CliError::Invalid(format!("{}: {e}", state.display())))?;
    let x = match serde_json::from_str::<StateFile>(&text) {
        Ok(StateFile::Plain(x)) | Ok(StateFile::Object { x }) => x,
        Err(e) => return Err(CliError::Invalid(format!("{}: {e}", state.display()))),
    };
    mm.layout().check(x.len())?;
    let b = energy_breakdown(&mm, &x)?;
    let mut s = String::new();
    for (i, v) in b.electrical.iter().enumerate() {
        s += &format!("electrical_{i}: {v:.16e}\n");
    }
    for (i, v) in b.mechanical.iter().enumerate() {
        s += &format!("mechanical_{i}: {v:.16e}\n");
    }
    for (l, v) in mm.grid().lines().iter().zip(&b.lines) {
        s += &format!("line_{}_{}: {v:.16e}\n", l.from, l.to);
    }
    s += &format!("total: {:.16e}\n", b.total);
    s += &format!("scaled_total: {:.16e}\n", mm.omega_s() * b.total);
    Ok(s)
}

fn ph_check(cli: &Cli, path: &Path) -> Result<String, CliError> {
    let sc = load(cli, path)?;
    let mm = sc.build()?;
    let sys = PHSystem::from_machines(mm.clone())?;
    let rep = sys.report();
    let tol = cli.tol.unwrap_or(1e-10);
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let lay = mm.layout();
    let n = mm.n();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let mut x = vec![0.0; lay.len()];
        for (k, v) in x.iter_mut().enumerate() {
            *v = match k / n {
                0 => rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
                1 => rng.gen_range(-0.01..0.01),
                s if s % 2 == 0 => rng.gen_range(0.8..1.3),
                _ => rng.gen_range(-0.3..0.3),
            };
        }
        let u: Vec<MachineInputs> =
            (0..n).map(|_| MachineInputs { p_m: rng.gen_range(-1.0..1.0), e_f: rng.gen_range(0.8..2.5) }).collect();
        let direct = mm.rhs(&x, &u)?;
        let (dx, _) = ph_rhs(&sys, &x, &input_vector(mm.order(), &u))?;
        worst = direct.iter().zip(&dx).fold(worst, |a, (p, q)| a.max((p - q).abs()));
    }
    let mut s = rep.to_string();
    s += &format!("rhs_equivalence_max_abs: {worst:e}\n");
    if !rep.psd() {
        return Err(Error::Assumption(format!("dissipation matrix has eigenvalue {:e}", rep.min_eig_r)).into());
    }
    if worst > tol {
        return Err(
            Error::Numerical(format!("port-Hamiltonian and direct right-hand sides differ by {worst:e}")).into()
        );
    }
    s += "OK\n";
    Ok(s)
}

#[derive(Serialize)]
struct HessianOut {
    min_eigenvalue: f64,
    max_eigenvalue: f64,
    positive_definite: bool,
}

#[derive(Serialize)]
struct EquilibriumOut {
    order: Order,
    names: Vec<String>,
    x: Vec<f64>,
    inputs: Vec<MachineInputs>,
    residual: f64,
    iterations: usize,
    hessian: Option<HessianOut>,
}

fn equilibrium(cli: &Cli, path: &Path) -> Result<String, CliError> {
    let sc = load(cli, path)?;
    let mm = sc.build()?;
    let eq = sc.equilibrium(&mm, newton(cli))?;
    let out = EquilibriumOut {
        order: mm.order(),
        names: mm.layout().names(),
        x: eq.x.clone(),
        inputs: eq.u.clone(),
        residual: eq.residual,
        iterations: eq.iterations,
        hessian: eq.hessian.map(|h| HessianOut {
            min_eigenvalue: h.min_eigenvalue,
            max_eigenvalue: h.max_eigenvalue,
            positive_definite: h.positive_definite,
        }),
    };
    let name = sc.outputs.equilibrium.clone().unwrap_or_else(|| format!("{}_equilibrium.json", stem(path)));
    let p = write_file(&cli.out, &name, |w| {
        serde_json::to_writer_pretty(&mut *w, &out).map_err(std::io::Error::other)?;
        writeln!(w)
    })?;
    let mut s = format!("equilibrium: {}\nresidual: {:e}\niterations: {}\n", p.display(), eq.residual, eq.iterations);
    for (name, v) in out.names.iter().zip(&eq.x) {
        s += &format!("{name}: {v:.12e}\n");
    }
    match eq.hessian {
        Some(h) => s += &format!("hessian: {h}\n"),
        None => s += "hessian: unavailable\n",
    }
    Ok(s)
}

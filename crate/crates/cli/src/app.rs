use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cohsim::dio::{
    is_resource_nonactivating, replacement_step_probability, DEFAULT_NONACTIVATING_TOL,
};
use cohsim::io::channel_to_json;
use cohsim::mio::{analytic_success_maxcoherent_with, max_success, OpClass, SimulationQuery};
use cohsim::quantum::{max_abs_diff, DensityMatrix, QuantumChannel};
use cohsim::robustness::{
    epsilon_robustness_channel_with, robustness_channel_with, robustness_state_with,
};
use cohsim::sdp::{SolveDiagnostics, SolverConfig};

use crate::settings::{resolve, Overrides, TOL_ENV};
use crate::spec::{parse_channel, parse_state};
use crate::sweep::{class_name, linspace, preset, run_sweep, Fixed, Series, SweepSpec, Variable};
use crate::{CliError, EXIT_OK, EXIT_PARTIAL};

#[derive(Debug, Parser)]
#[command(
    name = "coherence-sim",
    version,
    about = "Coherence robustness and probabilistic channel simulation"
)]
pub struct Cli {
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// key=value file with tol, tol_gap, tol_feas, max_iterations
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Sets both tol_gap and tol_feas
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub tol_gap: Option<f64>,
    #[arg(long, global = true)]
    pub tol_feas: Option<f64>,
    #[arg(long, global = true)]
    pub max_iterations: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Robustness of coherence of a state or channel
    Robustness(RobustnessArgs),
    /// Optimal success probability of simulating a channel
    Simulate(SimulateArgs),
    /// Sweep a parameter grid and write CSV
    Sweep(SweepArgs),
    /// Check whether a channel is resource nonactivating
    Nogo(NogoArgs),
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct Subject {
    #[arg(long)]
    pub channel: Option<String>,
    #[arg(long)]
    pub state: Option<String>,
}

#[derive(Debug, Args)]
pub struct RobustnessArgs {
    #[command(flatten)]
    pub subject: Subject,
    /// Also report the smoothed robustness (channels only)
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ClassArg {
    Mio,
    Dio,
}

impl From<ClassArg> for OpClass {
    fn from(c: ClassArg) -> Self {
        match c {
            ClassArg::Mio => OpClass::Mio,
            ClassArg::Dio => OpClass::Dio,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub class: ClassArg,
    #[arg(long)]
    pub target: String,
    #[arg(long)]
    pub resource: String,
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,
    /// Write the optimal free operation's Choi matrix (R A -> B) here
    #[arg(long)]
    pub dump_protocol: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VariableArg {
    Theta,
    Alpha,
    Epsilon,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// fig2, fig3 or fig4; other flags then only override the output
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, value_enum, required_unless_present = "preset")]
    pub variable: Option<VariableArg>,
    /// `start:stop:points` or a comma-separated list
    #[arg(long, required_unless_present = "preset")]
    pub grid: Option<String>,
    /// `eps:v1,v2,...` or `class:mio,dio`
    #[arg(long)]
    pub series: Option<String>,
    #[arg(long)]
    pub target: Option<String>,
    /// Tensor power of the rotation target when sweeping theta
    #[arg(long, default_value_t = 1)]
    pub power: usize,
    #[arg(long)]
    pub resource: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value = "mio")]
    pub class: ClassArg,
    /// CSV destination; stdout when absent
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NogoArgs {
    #[arg(long)]
    pub channel: String,
    #[arg(long, default_value_t = DEFAULT_NONACTIVATING_TOL)]
    pub tol: f64,
}

fn io(e: std::io::Error) -> CliError {
    CliError::Io(e.to_string())
}

/// Six decimals without printing `-0.000000` for solver noise.
fn fixed6(v: f64) -> String {
    format!("{:.6}", if v.abs() < 5e-7 { 0.0 } else { v })
}

fn solver_line(d: &SolveDiagnostics) -> String {
    format!(
        "solver: {:?}, gap {:.2e}, residual {:.2e}, min eigenvalue {:.2e}, {} iterations",
        d.status,
        d.gap(),
        d.max_equality_residual,
        d.min_psd_eigenvalue,
        d.iterations
    )
}

fn solver_err(e: cohsim::Error) -> CliError {
    match e {
        cohsim::Error::Solver { .. } | cohsim::Error::Infeasible(_) => {
            CliError::Solver(e.to_string())
        }
        other => CliError::Parse(other.to_string()),
    }
}

/// Runs a parsed command, writing the report to `out`; returns the exit code.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    let flags = Overrides {
        tol: cli.solver.tol,
        tol_gap: cli.solver.tol_gap,
        tol_feas: cli.solver.tol_feas,
        max_iterations: cli.solver.max_iterations,
    };
    let env_tol = std::env::var(TOL_ENV).ok();
    let cfg = resolve(cli.solver.config.as_deref(), env_tol.as_deref(), &flags)?;
    match cli.command {
        Command::Robustness(a) => robustness(a, &cfg, out),
        Command::Simulate(a) => simulate(a, &cfg, out),
        Command::Sweep(a) => sweep(a, &cfg, out),
        Command::Nogo(a) => nogo(a, out),
    }
}

fn robustness(a: RobustnessArgs, cfg: &SolverConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    if let Some(spec) = &a.subject.state {
        if a.epsilon.is_some() {
            return Err(CliError::Parse("--epsilon applies to channels only".into()));
        }
        let rho = parse_state(spec)?;
        let r = robustness_state_with(&rho, cfg).map_err(solver_err)?;
        writeln!(out, "C_R: {}", fixed6(r.value)).map_err(io)?;
        if let Some(d) = &r.diagnostics {
            writeln!(out, "{}", solver_line(d)).map_err(io)?;
        }
        return Ok(EXIT_OK);
    }
    let spec = a
        .subject
        .channel
        .as_deref()
        .expect("clap enforces one subject");
    let n = parse_channel(spec)?;
    let r = robustness_channel_with(&n, cfg).map_err(solver_err)?;
    writeln!(out, "C_R: {}", fixed6(r.value)).map_err(io)?;
    if let Some(d) = &r.diagnostics {
        writeln!(out, "{}", solver_line(d)).map_err(io)?;
    }
    if let Some(eps) = a.epsilon {
        if !(0.0..=1.0).contains(&eps) {
            return Err(CliError::Parse(format!("epsilon {eps} outside [0, 1]")));
        }
        let r = epsilon_robustness_channel_with(&n, eps, cfg).map_err(solver_err)?;
        writeln!(out, "C_R^eps (eps = {eps}): {}", fixed6(r.value)).map_err(io)?;
        if let Some(d) = &r.diagnostics {
            writeln!(out, "{}", solver_line(d)).map_err(io)?;
        }
    }
    Ok(EXIT_OK)
}

fn maximally_coherent_rank(rho: &DensityMatrix) -> Option<usize> {
    let m = rho.dim();
    let psi = DensityMatrix::maximally_coherent(m).ok()?;
    (m >= 2 && max_abs_diff(rho.matrix(), psi.matrix()) <= 1e-10).then_some(m)
}

/// `Some(n)` when the target replaces every input by `Ψ_n`.
fn replacement_rank(n: &QuantumChannel) -> Option<usize> {
    let d = n.dim_out();
    let psi = DensityMatrix::maximally_coherent(d).ok()?;
    let want = QuantumChannel::replacement(&psi, n.dim_in()).ok()?;
    (max_abs_diff(n.choi(), want.choi()) <= 1e-10).then_some(d)
}

fn analytic(q: &SimulationQuery, cfg: &SolverConfig) -> Result<Option<(String, f64)>, CliError> {
    let m = match maximally_coherent_rank(&q.resource) {
        Some(m) => m,
        None => return Ok(None),
    };
    match q.op_class {
        OpClass::Mio => {
            let v = analytic_success_maxcoherent_with(&q.target, m, q.epsilon, cfg)
                .map_err(solver_err)?;
            Ok(Some((format!("min(1, (m-1)/C_R^eps) with m = {m}"), v)))
        }
        OpClass::Dio => match replacement_rank(&q.target) {
            Some(n) if n >= m => {
                let v = replacement_step_probability(n, m, q.epsilon).map_err(solver_err)?;
                Ok(Some((
                    format!("step at eps = 1 - m/n with n = {n}, m = {m}"),
                    v,
                )))
            }
            _ => Ok(None),
        },
    }
}

fn simulate(a: SimulateArgs, cfg: &SolverConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let target = parse_channel(&a.target)?;
    let resource = parse_state(&a.resource)?;
    let class: OpClass = a.class.into();
    let q = SimulationQuery::new(target, resource, a.epsilon, class)
        .map_err(|e| CliError::Parse(e.to_string()))?;
    writeln!(out, "class: {}", class_name(class)).map_err(io)?;
    writeln!(
        out,
        "target: {} ({} -> {})",
        a.target,
        q.target.dim_in(),
        q.target.dim_out()
    )
    .map_err(io)?;
    writeln!(out, "resource: {} (dim {})", a.resource, q.resource.dim()).map_err(io)?;
    writeln!(out, "epsilon: {}", a.epsilon).map_err(io)?;

    if class == OpClass::Dio && a.epsilon == 0.0 {
        let report =
            is_resource_nonactivating(&q.target, DEFAULT_NONACTIVATING_TOL).map_err(solver_err)?;
        if !report.is_nonactivating {
            writeln!(
                out,
                "no-go: target is resource activating (deviation {:.6e}); DIO cannot simulate it exactly",
                report.deviation
            )
            .map_err(io)?;
            writeln!(out, "probability: {:.6}", 0.0).map_err(io)?;
            if a.dump_protocol.is_some() {
                writeln!(out, "protocol: none (probability 0)").map_err(io)?;
            }
            return Ok(EXIT_OK);
        }
    }

    let r = max_success(&q, cfg).map_err(solver_err)?;
    writeln!(out, "probability: {:.6}", r.probability).map_err(io)?;
    match analytic(&q, cfg)? {
        Some((what, v)) => writeln!(out, "analytic: applies, {what}: {v:.6}").map_err(io)?,
        None => writeln!(out, "analytic: not applicable").map_err(io)?,
    }
    writeln!(out, "{}", solver_line(&r.solver_diagnostics)).map_err(io)?;
    if let Some(path) = &a.dump_protocol {
        let (dr, da, db) = q.dims();
        let choi = r.protocol_choi.expect("solver returns the optimizer");
        let map = QuantumChannel::from_choi_unchecked(dr * da, db, choi)
            .map_err(|e| CliError::Io(e.to_string()))?;
        std::fs::write(path, channel_to_json(&map)).map_err(io)?;
        writeln!(
            out,
            "protocol: {} (R A -> B, {} -> {})",
            path.display(),
            dr * da,
            db
        )
        .map_err(io)?;
    }
    Ok(EXIT_OK)
}

fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Parse(format!("bad grid `{text}`"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        return Ok(linspace(lo, hi, n));
    }
    text.split(',')
        .map(|v| v.trim().parse().map_err(|_| bad()))
        .collect()
}

fn parse_series(text: &str) -> Result<Vec<Series>, CliError> {
    let bad = || CliError::Parse(format!("bad series `{text}` (eps:... or class:...)"));
    let (kind, list) = text.split_once(':').ok_or_else(bad)?;
    list.split(',')
        .map(|v| {
            let v = v.trim();
            match kind {
                "eps" => Ok(Series {
                    label: format!("eps={v}"),
                    epsilon: Some(v.parse().map_err(|_| bad())?),
                    class: None,
                }),
                "class" => {
                    let c = ClassArg::from_str(v, true).map_err(|_| bad())?;
                    Ok(Series {
                        label: v.to_lowercase(),
                        epsilon: None,
                        class: Some(c.into()),
                    })
                }
                _ => Err(bad()),
            }
        })
        .collect()
}

fn sweep(a: SweepArgs, cfg: &SolverConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let mut spec = match &a.preset {
        Some(name) => preset(name)?,
        None => {
            let variable = match a.variable.expect("clap requires it without a preset") {
                VariableArg::Theta => Variable::Theta,
                VariableArg::Alpha => Variable::Alpha,
                VariableArg::Epsilon => Variable::Epsilon,
            };
            let series = match &a.series {
                Some(s) => parse_series(s)?,
                None => vec![Series {
                    label: "p".into(),
                    epsilon: None,
                    class: None,
                }],
            };
            SweepSpec {
                variable,
                grid: parse_grid(
                    a.grid
                        .as_deref()
                        .expect("clap requires it without a preset"),
                )?,
                series,
                fixed: Fixed {
                    target: a.target.clone(),
                    power: a.power,
                    resource: a.resource.clone(),
                    epsilon: a.epsilon,
                    class: a.class.into(),
                },
                output_path: None,
            }
        }
    };
    spec.output_path = a.output.clone();
    let table = run_sweep(&spec, cfg)?;
    let csv = table.to_csv();
    match &spec.output_path {
        Some(p) => std::fs::write(p, &csv).map_err(io)?,
        None => out.write_all(csv.as_bytes()).map_err(io)?,
    }
    let failed = table.failures();
    if failed > 0 {
        eprintln!("{failed} cell(s) failed to solve and are written as nan");
        return Ok(EXIT_PARTIAL);
    }
    Ok(EXIT_OK)
}

fn nogo(a: NogoArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let n = parse_channel(&a.channel)?;
    let r = is_resource_nonactivating(&n, a.tol).map_err(|e| CliError::Parse(e.to_string()))?;
    writeln!(out, "nonactivating: {}", r.is_nonactivating).map_err(io)?;
    writeln!(out, "deviation: {:.6e}", r.deviation).map_err(io)?;
    Ok(EXIT_OK)
}

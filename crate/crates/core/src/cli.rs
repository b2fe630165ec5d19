//! Command-line front end. All output is CSV.
//!
//! Exit codes: 0 success, 2 usage error, 3 numerical failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::accuracy::second_order_nu;
use crate::adaptive::{solve_adaptive, solve_fixed, ControllerConfig, NuPolicy};
use crate::error::Error;
use crate::newton::NewtonConfig;
use crate::problems::{by_name, pendulum_energy};
use crate::reference::rk_solve;
use crate::stability::{
    a0_stability_oracle, is_a0_stable, is_a_stable, is_zero_stable, locus_curve, region_raster,
};
use crate::types::{norm_diff, IvpProblem, MethodParams, StepMode, Trajectory, NORM_NAME};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

const LOCUS_SAMPLES: usize = 720;

/// A header plus rows of reals, with an optional leading text column.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    /// Present when the first column holds text labels.
    pub labels: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new(header: Vec<String>) -> Self {
        Self {
            header,
            labels: None,
            rows: Vec::new(),
        }
    }

    fn numeric_width(&self) -> usize {
        self.header.len() - usize::from(self.labels.is_some())
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.numeric_width(), "row arity does not match header");
        self.rows.push(row);
    }

    pub fn write_to<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(&self.header)?;
        for (i, row) in self.rows.iter().enumerate() {
            let mut rec: Vec<String> = Vec::with_capacity(self.header.len());
            if let Some(labels) = &self.labels {
                rec.push(labels[i].clone());
            }
            rec.extend(row.iter().map(|&v| format_float(v)));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Shortest representation that parses back to the same `f64`; exponent form
/// outside `[1e-4, 1e15)`. NaN is written as an empty cell.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        return String::new();
    }
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || a.is_infinite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Step-size label rounded to two significant digits, as the printed tables
/// show them (0.00125 reads 0.0013).
pub fn step_label(k: f64) -> String {
    let decimals = (1 - k.log10().floor() as i32).max(0) as usize;
    let s = format!("{k:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[derive(Debug, Parser)]
#[command(name = "thetafilter", version, about = "Filtered theta-method integrator and stability tools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one problem and print the trajectory.
    Solve(SolveArgs),
    /// Errors and observed rates over a list of step sizes.
    Converge(ConvergeArgs),
    /// Boundary locus or stability raster, with verdicts on stderr.
    Region(RegionArgs),
    /// Several (theta, nu) runs against an RK45 reference.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProblemName {
    Lorenz,
    Pendulum,
    Linear,
}

impl ProblemName {
    fn as_str(self) -> &'static str {
        match self {
            ProblemName::Lorenz => "lorenz",
            ProblemName::Pendulum => "pendulum",
            ProblemName::Linear => "linear",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegionMode {
    Locus,
    Raster,
}

/// `nu` on the command line: a number or `auto` for the second-order value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NuArg {
    Auto,
    Value(f64),
}

impl NuArg {
    fn resolve(self, theta: f64) -> f64 {
        match self {
            NuArg::Auto => second_order_nu(theta),
            NuArg::Value(v) => v,
        }
    }
}

fn parse_nu(s: &str) -> Result<NuArg, String> {
    if s.trim().eq_ignore_ascii_case("auto") {
        return Ok(NuArg::Auto);
    }
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(NuArg::Value)
        .ok_or_else(|| format!("expected a number or 'auto', got '{s}'"))
}

fn parse_list<T>(s: &str, item: fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    let items: Result<Vec<T>, String> = s.split(',').filter(|p| !p.trim().is_empty()).map(item).collect();
    let items = items?;
    if items.is_empty() {
        return Err("empty list".into());
    }
    Ok(items)
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("expected a number, got '{s}'"))
}

/// A comma-separated list flag.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

fn parse_nu_list(s: &str) -> Result<List<NuArg>, String> {
    parse_list(s, parse_nu).map(List)
}

fn parse_f64_list(s: &str) -> Result<List<f64>, String> {
    parse_list(s, parse_f64).map(List)
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected a:b, got '{s}'"))?;
    Ok((parse_f64(a)?, parse_f64(b)?))
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long, value_enum)]
    pub problem: ProblemName,
    /// Stiffness of the linear problem.
    #[arg(long, default_value_t = -10.0, allow_negative_numbers = true)]
    pub lambda: f64,
    #[arg(long)]
    pub theta: f64,
    #[arg(long, default_value = "auto", value_parser = parse_nu, allow_hyphen_values = true)]
    pub nu: NuArg,
    #[arg(long, required_unless_present = "adaptive", conflicts_with = "adaptive")]
    pub dt: Option<f64>,
    #[arg(long, requires = "tol")]
    pub adaptive: bool,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Growth cap for adaptive steps.
    #[arg(long, default_value_t = 1.0)]
    pub tau_max: f64,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConvergeArgs {
    #[arg(long, value_enum, default_value = "linear")]
    pub problem: ProblemName,
    #[arg(long)]
    pub theta: f64,
    #[arg(long, default_value_t = -10.0, allow_negative_numbers = true)]
    pub lambda: f64,
    #[arg(long, default_value = "auto", value_parser = parse_nu_list, allow_hyphen_values = true)]
    pub nu_list: List<NuArg>,
    #[arg(long, default_value = "0.00125,0.0025,0.005,0.01,0.02", value_parser = parse_f64_list)]
    pub dt_list: List<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RegionArgs {
    #[arg(long)]
    pub theta: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub nu: f64,
    #[arg(long, value_enum, default_value = "locus")]
    pub mode: RegionMode,
    #[arg(long, default_value = "-5:5", value_parser = parse_range, allow_hyphen_values = true)]
    pub re_range: (f64, f64),
    #[arg(long, default_value = "-5:5", value_parser = parse_range, allow_hyphen_values = true)]
    pub im_range: (f64, f64),
    #[arg(long, default_value_t = 201)]
    pub nx: usize,
    #[arg(long, default_value_t = 201)]
    pub ny: usize,
    /// Step ratio; switches to the variable-step method.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long, value_enum)]
    pub problem: ProblemName,
    #[arg(long, default_value_t = -10.0, allow_negative_numbers = true)]
    pub lambda: f64,
    #[arg(long, value_parser = parse_f64_list)]
    pub theta_list: List<f64>,
    #[arg(long, default_value = "0,auto", value_parser = parse_nu_list, allow_hyphen_values = true)]
    pub nu_list: List<NuArg>,
    #[arg(long)]
    pub dt: f64,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Tolerance of the reference solve.
    #[arg(long, default_value_t = 1e-10)]
    pub ref_tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self {
            code: if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_USAGE },
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn load_problem(name: ProblemName, lambda: f64, t_end: Option<f64>) -> CliResult<IvpProblem> {
    let p = by_name(name.as_str(), lambda).expect("every ProblemName is registered");
    Ok(match t_end {
        Some(t) => p.with_t_end(t)?,
        None => p,
    })
}

fn nu_tag(nu: f64) -> String {
    let s = format!("{nu:.5}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

pub fn cmd_solve(a: &SolveArgs) -> CliResult<CsvTable> {
    let problem = load_problem(a.problem, a.lambda, a.t_end)?;
    let nu = a.nu.resolve(a.theta);
    let cfg = NewtonConfig::default();
    let traj = if a.adaptive {
        let tol = a.tol.ok_or_else(|| CliError::usage("--adaptive needs --tol"))?;
        let mut ctrl = ControllerConfig::new(tol);
        ctrl.tau_max = a.tau_max;
        let policy = match a.nu {
            NuArg::Auto => NuPolicy::SecondOrderNu,
            NuArg::Value(v) => NuPolicy::Fixed(v),
        };
        MethodParams::variable(a.theta, nu)?;
        solve_adaptive(&problem, a.theta, &ctrl, &cfg, policy)?
    } else {
        let dt = a.dt.ok_or_else(|| CliError::usage("either --dt or --adaptive is required"))?;
        solve_fixed(&problem, &MethodParams::constant(a.theta, nu)?, dt, &cfg)?
    };
    Ok(trajectory_table(&traj))
}

fn trajectory_table(traj: &Trajectory) -> CsvTable {
    let dim = traj.records[0].y.len();
    let mut header = vec!["t".to_string(), "k".to_string()];
    header.extend((0..dim).map(|i| format!("y{i}")));
    header.extend((0..dim).map(|i| format!("y_star{i}")));
    header.push("est".into());
    let mut table = CsvTable::new(header);
    for r in &traj.records {
        let mut row = vec![r.t, r.k];
        row.extend(&r.y);
        row.extend(&r.y_star);
        row.push(r.est);
        table.push(row);
    }
    table
}

/// Discrete L2-in-time error `sqrt(sum_n k_n |y_n - y(t_n)|^2)` over all
/// steps, pointwise errors in the max norm.
pub fn l2_time_error(traj: &Trajectory, problem: &IvpProblem) -> Option<f64> {
    let mut s = 0.0;
    for r in traj.records.iter().skip(1) {
        let e = norm_diff(&r.y, &problem.exact(r.t)?);
        s += r.k * e * e;
    }
    Some(s.sqrt())
}

/// Observed order between consecutive step sizes, `rates[i]` pairing `dts[i]`
/// with `dts[i + 1]`.
pub fn observed_rates(dts: &[f64], errs: &[f64]) -> Vec<f64> {
    dts.windows(2)
        .zip(errs.windows(2))
        .map(|(k, e)| (e[1] / e[0]).ln() / (k[1] / k[0]).ln())
        .collect()
}

pub fn cmd_converge(a: &ConvergeArgs) -> CliResult<CsvTable> {
    let problem = load_problem(a.problem, a.lambda, None)?;
    if !problem.has_exact() {
        return Err(CliError::usage(format!(
            "converge needs a problem with an exact solution; '{}' has none",
            problem.id()
        )));
    }
    let mut dts = a.dt_list.0.clone();
    if dts.iter().any(|&k| k <= 0.0) {
        return Err(CliError::usage("step sizes must be positive"));
    }
    dts.sort_by(f64::total_cmp);
    dts.dedup();
    let cfg = NewtonConfig::default();

    let mut header = vec!["dt_label".to_string(), "dt".to_string()];
    let mut columns: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for nu_arg in &a.nu_list.0 {
        let nu = nu_arg.resolve(a.theta);
        let params = MethodParams::constant(a.theta, nu)?;
        let mut errs = Vec::with_capacity(dts.len());
        for &k in &dts {
            let traj = solve_fixed(&problem, &params, k, &cfg)?;
            errs.push(l2_time_error(&traj, &problem).expect("exact solution checked above"));
        }
        let rates = observed_rates(&dts, &errs);
        let tag = nu_tag(nu);
        header.push(format!("err_nu={tag}"));
        header.push(format!("rate_nu={tag}"));
        columns.push((errs, rates));
    }
    let mut table = CsvTable::new(header);
    table.labels = Some(dts.iter().map(|&k| step_label(k)).collect());
    for (i, &k) in dts.iter().enumerate() {
        let mut row = vec![k];
        for (errs, rates) in &columns {
            row.push(errs[i]);
            row.push(rates.get(i).copied().unwrap_or(f64::NAN));
        }
        table.push(row);
    }
    Ok(table)
}

/// One-line stability verdicts for the region command.
pub fn region_verdicts(params: &MethodParams, tau: f64) -> String {
    let a0 = match params.step_mode {
        StepMode::Constant => is_a0_stable(params.theta, params.nu),
        StepMode::Variable => is_zero_stable(params, tau) && a0_stability_oracle(params, tau, 10_000),
    };
    format!(
        "zero_stable={} a_stable={} a0_stable={}",
        u8::from(is_zero_stable(params, tau)),
        u8::from(is_a_stable(params, tau)),
        u8::from(a0)
    )
}

pub fn cmd_region(a: &RegionArgs) -> CliResult<(CsvTable, String)> {
    let (params, tau) = match a.tau {
        Some(tau) if tau.is_nan() || tau <= 0.0 => return Err(Error::InvalidRatio(tau).into()),
        Some(tau) => (MethodParams::variable(a.theta, a.nu)?, tau),
        None => (MethodParams::constant(a.theta, a.nu)?, 1.0),
    };
    // surfaces a degenerate nu before any output
    crate::stepper::multistep_coeffs(&params, tau)?;
    let table = match a.mode {
        RegionMode::Locus => {
            if params.step_mode == StepMode::Variable {
                return Err(CliError::usage("locus mode is only available without --tau"));
            }
            let curve = locus_curve(&params, LOCUS_SAMPLES)?;
            let mut t = CsvTable::new(vec!["phi".into(), "re".into(), "im".into()]);
            for (phi, z) in curve.samples {
                t.push(vec![phi, z.re, z.im]);
            }
            t
        }
        RegionMode::Raster => {
            let g = region_raster(&params, tau, a.re_range, a.im_range, a.nx, a.ny)?;
            let mut t = CsvTable::new(vec!["re".into(), "im".into(), "stable".into()]);
            for j in 0..g.ny {
                for i in 0..g.nx {
                    t.push(vec![g.re(i), g.im(j), f64::from(u8::from(g.is_stable(i, j)))]);
                }
            }
            t
        }
    };
    Ok((table, region_verdicts(&params, tau)))
}

pub fn cmd_compare(a: &CompareArgs) -> CliResult<CsvTable> {
    let problem = load_problem(a.problem, a.lambda, a.t_end)?;
    let cfg = NewtonConfig::default();
    let mut runs = Vec::new();
    for &theta in &a.theta_list.0 {
        for nu_arg in &a.nu_list.0 {
            let params = MethodParams::constant(theta, nu_arg.resolve(theta))?;
            runs.push(solve_fixed(&problem, &params, a.dt, &cfg)?);
        }
    }
    let times: Vec<f64> = runs[0].times().collect();
    let reference = rk_solve(&problem, a.ref_tol, &times)?;
    let ref_at = |t: f64| {
        reference
            .records
            .iter()
            .find(|r| r.t == t)
            .map(|r| r.y.clone())
            .expect("reference stops at every grid time")
    };
    let dim = problem.dim();
    let is_pendulum = a.problem == ProblemName::Pendulum;

    let mut header = vec!["t".to_string()];
    header.extend((0..dim).map(|i| format!("ref_y{i}")));
    let tags: Vec<String> = runs
        .iter()
        .map(|r| format!("theta={}_nu={}", nu_tag(r.params.theta), nu_tag(r.params.nu)))
        .collect();
    for tag in &tags {
        header.extend((0..dim).map(|i| format!("{tag}_y{i}")));
    }
    for tag in &tags {
        header.push(format!("{tag}_dev"));
    }
    if is_pendulum {
        for tag in &tags {
            header.push(format!("{tag}_energy"));
        }
    }
    let mut table = CsvTable::new(header);
    for (n, &t) in times.iter().enumerate() {
        let yr = ref_at(t);
        let mut row = vec![t];
        row.extend(&yr);
        for run in &runs {
            row.extend(&run.records[n].y);
        }
        for run in &runs {
            row.push(norm_diff(&run.records[n].y, &yr));
        }
        if is_pendulum {
            for run in &runs {
                row.push(pendulum_energy(&run.records[n].y));
            }
        }
        table.push(row);
    }
    Ok(table)
}

fn emit(table: &CsvTable, out: Option<&PathBuf>, stdout: &mut dyn Write) -> CliResult<()> {
    let res = match out {
        Some(path) => File::create(path)
            .map_err(csv::Error::from)
            .and_then(|f| table.write_to(io::BufWriter::new(f))),
        None => table.write_to(&mut *stdout),
    };
    res.map_err(|e| CliError::usage(format!("cannot write output: {e}")))
}

/// Parse `args` (including the program name), run the command and return
/// the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let res = match &cli.command {
        Command::Solve(a) => cmd_solve(a).and_then(|t| emit(&t, a.out.as_ref(), stdout)),
        Command::Converge(a) => cmd_converge(a).and_then(|t| {
            let _ = writeln!(stderr, "error metric: discrete L2 in time, {NORM_NAME} norm");
            emit(&t, a.out.as_ref(), stdout)
        }),
        Command::Region(a) => cmd_region(a).and_then(|(t, verdict)| {
            emit(&t, a.out.as_ref(), stdout)?;
            let _ = writeln!(stderr, "{verdict}");
            Ok(())
        }),
        Command::Compare(a) => cmd_compare(a).and_then(|t| emit(&t, a.out.as_ref(), stdout)),
    };
    match res {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message);
            e.code
        }
    }
}

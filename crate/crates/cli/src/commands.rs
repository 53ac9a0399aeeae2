//! Argument definitions and subcommand drivers.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use elastinet::generate::{add_noise, gen_blur, gen_gaussian, make_rank_deficient};
use elastinet::params::{discrepancy_solve, DiscrepancyOptions, SolverChoice};
use elastinet::reference::ista_solve;
use elastinet::{rfss_solve, rssn_solve, Problem, RegParams, RfssOptions, RssnOptions, Status};
use serde_json::json;

use crate::experiments::{
    path_table, rate_table, run_path, run_rates, run_table, slope_table, AlphaRule, PathConfig,
    RateConfig, TableConfig, ISTA_MAX_ITERATIONS, ISTA_TOLERANCE, NOISE_STREAM,
};
use crate::io::{read_matrix, read_vector, write_vector, Cell, ParseError, Table};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or inconsistent inputs. Exit 1.
    Usage(String),
    /// Unreadable input file. Exit 1.
    Parse(ParseError),
    /// A solver or rule failed. Exit 2.
    Numerical(String),
    Io(io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Parse(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Parse(e) => write!(f, "parse error: {e}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<ParseError> for CliError {
    fn from(e: ParseError) -> Self {
        CliError::Parse(e)
    }
}

impl From<elastinet::Error> for CliError {
    fn from(e: elastinet::Error) -> Self {
        use elastinet::Error as E;
        match e {
            E::DimensionMismatch { .. } | E::InvalidParameter(_) | E::SourceCondition { .. } => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Rssn,
    Rfss,
    Ista,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Generator {
    Gaussian,
    Blur,
}

#[derive(Debug, Parser)]
#[command(name = "elastinet", version, about = "Elastic-net solvers and experiments")]
pub struct Cli {
    /// Seed for every generator and noise draw.
    #[arg(long, global = true, env = "ELASTINET_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Write results here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format. Defaults to json for solve/discrepancy, csv otherwise.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Use the full problem sizes instead of desk scale.
    #[arg(long, global = true)]
    pub full: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one problem.
    Solve(SolveArgs),
    /// Well-conditioned Gaussian operator, exact data.
    Test1(TableArgs),
    /// Rank-deficient Gaussian operator, exact data.
    Test2(TableArgs),
    /// Gaussian operator with noisy data.
    Test3(Test3Args),
    /// Blur operator: error against noise level, or β path-following.
    Test4(Test4Args),
    /// Choose β by the discrepancy principle.
    Discrepancy(DiscrepancyArgs),
}

/// Parses a float or a power of two written `2^-k`.
fn parse_real(s: &str) -> Result<f64, String> {
    let s = s.trim();
    if let Some(exp) = s.strip_prefix("2^") {
        let k: i32 = exp.parse().map_err(|_| format!("bad exponent in {s:?}"))?;
        return Ok(2f64.powi(k));
    }
    s.parse::<f64>().map_err(|_| format!("not a number: {s:?}"))
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Operator as CSV, one matrix row per line.
    #[arg(long, requires = "data", conflicts_with = "generate")]
    pub matrix: Option<PathBuf>,
    /// Data vector as CSV, one value per line.
    #[arg(long, requires = "matrix")]
    pub data: Option<PathBuf>,
    /// Noise level δ of file data (needed by the discrepancy principle).
    #[arg(long, value_parser = parse_real)]
    pub delta: Option<f64>,
    #[arg(long, value_enum)]
    pub generate: Option<Generator>,
    /// Gaussian generator rows (default 120, 400 with --full).
    #[arg(long)]
    pub m: Option<usize>,
    /// Gaussian generator columns (default 120, 400 with --full).
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub period: usize,
    #[arg(long)]
    pub rank_deficient: bool,
    /// Blur image side (default 20, 50 with --full).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub band: usize,
    #[arg(long, default_value_t = 0.7, value_parser = parse_real)]
    pub sigma: f64,
    /// Relative noise level added to generated data.
    #[arg(long, value_parser = parse_real)]
    pub noise: Option<f64>,
}

impl InputArgs {
    fn load(&self, seed: u64, full: bool) -> Result<Problem, CliError> {
        let p = match (&self.matrix, &self.data, self.generate) {
            (Some(m), Some(d), _) => {
                let k = read_matrix(m)?;
                let y = read_vector(d)?;
                match self.delta {
                    Some(delta) => Problem::builder(k, y).noise_level(delta).build()?,
                    None => Problem::new(k, y)?,
                }
            }
            (None, None, Some(Generator::Gaussian)) => {
                let size = if full { 400 } else { 120 };
                let mut p = gen_gaussian(
                    self.m.unwrap_or(size),
                    self.s.unwrap_or(size),
                    self.period,
                    seed,
                )?;
                if self.rank_deficient {
                    p = make_rank_deficient(&p)?;
                }
                p
            }
            (None, None, Some(Generator::Blur)) => {
                gen_blur(self.n.unwrap_or(if full { 50 } else { 20 }), self.band, self.sigma)?
            }
            _ => {
                return Err(CliError::Usage(
                    "give --matrix and --data, or --generate".into(),
                ))
            }
        };
        match self.noise {
            Some(level) if self.generate.is_some() => {
                Ok(add_noise(&p, level, seed.wrapping_add(NOISE_STREAM))?)
            }
            Some(_) => Err(CliError::Usage("--noise applies to generated problems only".into())),
            None => Ok(p),
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value_t = SolverArg::Rssn)]
    pub solver: SolverArg,
    #[arg(long, value_parser = parse_real, required_unless_present = "discrepancy")]
    pub alpha: Option<f64>,
    #[arg(long, value_parser = parse_real, required_unless_present = "discrepancy")]
    pub beta: Option<f64>,
    /// Coupling `α = ηβ`, used with --discrepancy.
    #[arg(long, value_parser = parse_real, requires = "discrepancy")]
    pub eta: Option<f64>,
    /// Pick β by the discrepancy principle instead of taking --beta.
    #[arg(long, requires = "eta", conflicts_with_all = ["alpha", "beta"])]
    pub discrepancy: bool,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    /// Rows (default 120, 400 with --full).
    #[arg(long)]
    pub m: Option<usize>,
    /// Columns (default 120, 400 with --full).
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long, default_value_t = 1e-5, value_parser = parse_real)]
    pub alpha: f64,
    /// β grid; 0 selects the ISTA reference. Accepts `2^-k`.
    #[arg(long, value_delimiter = ',', value_parser = parse_real)]
    pub betas: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[arg(long, default_value_t = 10)]
    pub period: usize,
    #[arg(long, default_value_t = ISTA_MAX_ITERATIONS)]
    pub ista_max_iter: usize,
}

#[derive(Debug, Args)]
pub struct Test3Args {
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub s: Option<usize>,
    /// Fixed α; by default α = δ.
    #[arg(long, value_parser = parse_real)]
    pub alpha: Option<f64>,
    #[arg(long, value_delimiter = ',', value_parser = parse_real)]
    pub betas: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[arg(long, default_value_t = 10)]
    pub period: usize,
    /// Relative noise level.
    #[arg(long, default_value_t = 0.05, value_parser = parse_real)]
    pub noise: f64,
    #[arg(long)]
    pub rank_deficient: bool,
    #[arg(long, default_value_t = ISTA_MAX_ITERATIONS)]
    pub ista_max_iter: usize,
}

#[derive(Debug, Args)]
pub struct Test4Args {
    /// Image side (default 20, 50 with --full).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub band: usize,
    #[arg(long, default_value_t = 0.7, value_parser = parse_real)]
    pub sigma: f64,
    /// β = fraction·α; 0 selects the ISTA reference.
    #[arg(long, value_delimiter = ',', value_parser = parse_real, default_value = "1,0.5,0.25,0")]
    pub beta_fractions: Vec<f64>,
    /// Noise levels (default 11 log-spaced values from 1e-1 to 1e-6).
    #[arg(long, value_delimiter = ',', value_parser = parse_real)]
    pub deltas: Option<Vec<f64>>,
    /// High/low noise boundary (default: geometric midpoint of the deltas).
    #[arg(long, value_parser = parse_real)]
    pub split: Option<f64>,
    /// Run β path-following instead of the noise sweep.
    #[arg(long)]
    pub path: bool,
    /// α for --path.
    #[arg(long, default_value_t = 1e-4, value_parser = parse_real)]
    pub alpha: f64,
    /// Relative noise level for --path.
    #[arg(long, default_value_t = 0.05, value_parser = parse_real)]
    pub noise: f64,
    /// Halvings of β for --path, starting at β = α.
    #[arg(long, default_value_t = 6)]
    pub steps: u32,
    #[arg(long, default_value_t = ISTA_MAX_ITERATIONS)]
    pub ista_max_iter: usize,
}

#[derive(Debug, Args)]
pub struct DiscrepancyArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_parser = parse_real)]
    pub eta: f64,
    #[arg(long, default_value_t = 1.0, value_parser = parse_real)]
    pub tau: f64,
    #[arg(long, default_value_t = 1e-6, value_parser = parse_real)]
    pub beta_lo: f64,
    #[arg(long, default_value_t = 1.0, value_parser = parse_real)]
    pub beta_hi: f64,
    #[arg(long, default_value_t = 1e-6, value_parser = parse_real)]
    pub rel_tol: f64,
    #[arg(long, value_enum)]
    pub solver: Option<SolverArg>,
}

struct Output<'a> {
    path: Option<&'a Path>,
    format: Format,
}

impl Output<'_> {
    fn writer(&self) -> Result<Box<dyn Write>, CliError> {
        Ok(match self.path {
            Some(p) => Box::new(io::BufWriter::new(File::create(p)?)),
            None => Box::new(io::stdout().lock()),
        })
    }

    fn json(&self, v: &serde_json::Value) -> Result<(), CliError> {
        let mut w = self.writer()?;
        serde_json::to_writer_pretty(&mut w, v).map_err(io::Error::from)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn table(&self, t: &Table) -> Result<(), CliError> {
        let mut w = self.writer()?;
        t.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let out = |default| Output {
        path: cli.out.as_deref(),
        format: cli.format.unwrap_or(default),
    };
    match &cli.command {
        Command::Solve(a) => cmd_solve(a, cli, out(Format::Json)),
        Command::Test1(a) => cmd_table(a, false, cli, out(Format::Csv), default_grid(1)),
        Command::Test2(a) => cmd_table(a, true, cli, out(Format::Csv), default_grid(2)),
        Command::Test3(a) => cmd_test3(a, cli, out(Format::Csv)),
        Command::Test4(a) => cmd_test4(a, cli, out(Format::Csv)),
        Command::Discrepancy(a) => cmd_discrepancy(a, cli, out(Format::Json)),
    }
}

fn default_grid(test: u8) -> Vec<f64> {
    let exps: &[i32] = match test {
        1 => &[-30, -28, -24, -20, -16, -12],
        2 => &[-24, -20, -16, -12],
        _ => &[-8, -5, -3, -1],
    };
    std::iter::once(0.0).chain(exps.iter().map(|&k| 2f64.powi(k))).collect()
}

fn solver_name(s: SolverArg) -> &'static str {
    match s {
        SolverArg::Rssn => "rssn",
        SolverArg::Rfss => "rfss",
        SolverArg::Ista => "ista",
    }
}

fn cmd_solve(a: &SolveArgs, cli: &Cli, out: Output) -> Result<(), CliError> {
    let p = a.input.load(cli.seed, cli.full)?;
    let start = Instant::now();
    let mut extra = serde_json::Map::new();
    let result = if a.discrepancy {
        let eta = a.eta.expect("clap enforces --eta");
        let opts = DiscrepancyOptions {
            solver: choice(a.solver),
            ..DiscrepancyOptions::default()
        };
        let d = discrepancy_solve(&p, eta, &opts)?;
        extra.insert("beta".into(), json!(d.beta_star));
        extra.insert("alpha".into(), json!(eta * d.beta_star));
        solve_one(&p, &RegParams::coupled(eta, d.beta_star)?, a.solver, a.max_iter)?
    } else {
        let r = RegParams::new(a.alpha.unwrap(), a.beta.unwrap())?;
        solve_one(&p, &r, a.solver, a.max_iter)?
    };
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;

    match out.format {
        Format::Json => {
            let mut rec = serde_json::Map::new();
            rec.insert("solution".into(), json!(result.solution.as_slice()));
            rec.insert("iterations".into(), json!(result.iterations));
            rec.insert("active_set_size".into(), json!(result.active_set.len()));
            rec.insert("objective".into(), json!(result.objective));
            rec.insert("kkt_residual_norm".into(), json!(result.kkt_residual_norm));
            rec.insert("wall_time_ms".into(), json!(wall_ms));
            rec.insert("status".into(), json!(result.status));
            rec.insert("solver".into(), json!(solver_name(a.solver)));
            rec.extend(extra);
            out.json(&serde_json::Value::Object(rec))?;
        }
        Format::Csv => {
            let mut w = out.writer()?;
            write_vector(&mut w, &result.solution)?;
            w.flush()?;
        }
    }
    if result.status == Status::Converged {
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "{} stopped with status {:?} after {} iterations",
            solver_name(a.solver),
            result.status,
            result.iterations
        )))
    }
}

fn choice(s: SolverArg) -> SolverChoice {
    match s {
        SolverArg::Rssn => SolverChoice::Rssn,
        SolverArg::Rfss => SolverChoice::Rfss,
        SolverArg::Ista => SolverChoice::Ista,
    }
}

fn solve_one(
    p: &Problem,
    r: &RegParams,
    solver: SolverArg,
    max_iter: Option<usize>,
) -> elastinet::Result<elastinet::SolveResult> {
    match solver {
        SolverArg::Rssn => {
            let mut o = RssnOptions::default();
            if let Some(m) = max_iter {
                o.max_iterations = m;
            }
            rssn_solve(p, r, &o)
        }
        SolverArg::Rfss => {
            let o = RfssOptions {
                max_iterations: max_iter,
                ..RfssOptions::default()
            };
            rfss_solve(p, r, &o)
        }
        SolverArg::Ista => ista_solve(p, r, ISTA_TOLERANCE, max_iter.unwrap_or(ISTA_MAX_ITERATIONS)),
    }
}

fn emit_table(run: crate::experiments::TableRun, out: Output) -> Result<(), CliError> {
    match out.format {
        Format::Csv => out.table(&run.table),
        Format::Json => {
            let mut rows = run.table.to_json();
            for (row, solver) in rows.as_array_mut().unwrap().iter_mut().zip(&run.solvers) {
                row["solver"] = json!(solver);
            }
            out.json(&rows)
        }
    }
}

fn desk(v: Option<usize>, full: bool) -> usize {
    v.unwrap_or(if full { 400 } else { 120 })
}

fn cmd_table(
    a: &TableArgs,
    rank_deficient: bool,
    cli: &Cli,
    out: Output,
    grid: Vec<f64>,
) -> Result<(), CliError> {
    let cfg = TableConfig {
        m: desk(a.m, cli.full),
        s: desk(a.s, cli.full),
        spike_period: a.period,
        alpha: AlphaRule::Fixed(a.alpha),
        betas: a.betas.clone().unwrap_or(grid),
        seed: cli.seed,
        repeats: a.repeats,
        rank_deficient,
        noise: None,
        data_error: false,
        ista_max_iterations: a.ista_max_iter,
    };
    check_table(&cfg)?;
    emit_table(run_table(&cfg), out)
}

fn cmd_test3(a: &Test3Args, cli: &Cli, out: Output) -> Result<(), CliError> {
    let cfg = TableConfig {
        m: desk(a.m, cli.full),
        s: desk(a.s, cli.full),
        spike_period: a.period,
        alpha: a.alpha.map_or(AlphaRule::NoiseLevel, AlphaRule::Fixed),
        betas: a.betas.clone().unwrap_or_else(|| default_grid(3)),
        seed: cli.seed,
        repeats: a.repeats,
        rank_deficient: a.rank_deficient,
        noise: Some(a.noise),
        data_error: true,
        ista_max_iterations: a.ista_max_iter,
    };
    check_table(&cfg)?;
    emit_table(run_table(&cfg), out)
}

/// Catches bad sizes up front so they exit 1 instead of producing `-` rows.
fn check_table(cfg: &TableConfig) -> Result<(), CliError> {
    if cfg.betas.iter().any(|b| !(*b >= 0.0 && b.is_finite())) {
        return Err(CliError::Usage("betas must be finite and ≥ 0".into()));
    }
    cfg.instance(0)?;
    Ok(())
}

fn log_spaced(hi: f64, lo: f64, count: usize) -> Vec<f64> {
    let (a, b) = (hi.log10(), lo.log10());
    (0..count)
        .map(|k| 10f64.powf(a + (b - a) * k as f64 / (count - 1) as f64))
        .collect()
}

fn cmd_test4(a: &Test4Args, cli: &Cli, out: Output) -> Result<(), CliError> {
    let n = a.n.unwrap_or(if cli.full { 50 } else { 20 });
    if a.path {
        let report = run_path(&PathConfig {
            n,
            band: a.band,
            sigma: a.sigma,
            noise: a.noise,
            alpha: a.alpha,
            steps: a.steps,
            seed: cli.seed,
        })?;
        return match out.format {
            Format::Csv => out.table(&path_table(&report)),
            Format::Json => out.json(&json!({
                "steps": path_table(&report).to_json(),
                "all_warm_converged": report.all_warm_converged(),
                "final_warm_iterations": report.final_warm_iterations(),
                "cold_iterations": report.cold.iterations,
                "cold_status": report.cold.status,
            })),
        };
    }
    let deltas = a.deltas.clone().unwrap_or_else(|| log_spaced(1e-1, 1e-6, 11));
    if deltas.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
        return Err(CliError::Usage("deltas must be positive".into()));
    }
    let cfg = RateConfig {
        n,
        band: a.band,
        sigma: a.sigma,
        beta_fractions: a.beta_fractions.clone(),
        deltas,
        split: a.split,
        seed: cli.seed,
        ista_max_iterations: a.ista_max_iter,
    };
    let (points, slopes) = run_rates(&cfg)?;
    match out.format {
        Format::Csv => {
            out.table(&rate_table(&points))?;
            // slopes go to stderr so stdout stays a single parseable table
            eprintln!("split point: {:e}", cfg.split_point());
            slope_table(&slopes).write_csv(io::stderr().lock())?;
            Ok(())
        }
        Format::Json => out.json(&json!({
            "points": rate_table(&points).to_json(),
            "slopes": slope_table(&slopes).to_json(),
            "split": cfg.split_point(),
        })),
    }
}

fn cmd_discrepancy(a: &DiscrepancyArgs, cli: &Cli, out: Output) -> Result<(), CliError> {
    let p = a.input.load(cli.seed, cli.full)?;
    let opts = DiscrepancyOptions {
        bracket_lo: a.beta_lo,
        bracket_hi: a.beta_hi,
        rel_tol: a.rel_tol,
        tau: a.tau,
        solver: a.solver.map_or(SolverChoice::Auto, choice),
        ..DiscrepancyOptions::default()
    };
    let d = discrepancy_solve(&p, a.eta, &opts)?;
    let target = a.tau * p.noise_level().unwrap_or(0.0);
    match out.format {
        Format::Json => out.json(&json!({
            "beta": d.beta_star,
            "alpha": a.eta * d.beta_star,
            "residual": d.residual,
            "target": target,
            "bisections": d.bisections,
            "unique": d.unique,
            "solution": d.x_star.as_slice(),
        })),
        Format::Csv => {
            let mut t = Table::new(&["beta", "alpha", "residual", "target", "bisections", "unique"]);
            t.push(vec![
                Cell::Num(d.beta_star),
                Cell::Num(a.eta * d.beta_star),
                Cell::Num(d.residual),
                Cell::Num(target),
                Cell::Int(d.bisections as u64),
                Cell::Text(d.unique.to_string()),
            ]);
            out.table(&t)
        }
    }
}

//! The table experiments (Tests 1 to 3), the noise-rate study (Test 4) and
//! β path-following.
//!
//! Cells of a grid run in parallel; results are gathered back in grid order
//! so the output never depends on scheduling.

use std::time::Instant;

use elastinet::generate::{add_noise, gen_blur, gen_gaussian, make_rank_deficient};
use elastinet::nalgebra::DVector;
use elastinet::params::{beta_path, SolverChoice};
use elastinet::reference::ista_solve;
use elastinet::{
    rfss_solve, rssn_solve, Problem, RegParams, RfssOptions, RssnOptions, SolveResult, Status,
};
use rayon::prelude::*;

use crate::io::{Cell, Table};

pub use elastinet::params::{ISTA_MAX_ITERATIONS, ISTA_TOLERANCE};

/// On rank-deficient runs the β = 0 reference counts as failed
/// when its relative data residual `‖Kx − y†‖/‖y†‖` exceeds this.
pub const RANK_DEFICIENT_RESIDUAL_LIMIT: f64 = 1e-3;

/// Offsets the noise stream so it never shares a seed with the operator.
pub const NOISE_STREAM: u64 = 0x5eed_0000_0000;

/// Ordinary least-squares slope of `ln(error)` against `ln(delta)`.
pub fn slope_fit(points: &[(f64, f64)]) -> Result<f64, String> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(d, e)| *d > 0.0 && *e > 0.0 && d.is_finite() && e.is_finite())
        .map(|&(d, e)| (d.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(format!("slope fit needs at least 2 valid points, got {}", pts.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err("slope fit needs at least two distinct deltas".into());
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}

pub fn rel_error(x: &DVector<f64>, exact: &DVector<f64>) -> f64 {
    (x - exact).norm() / exact.norm()
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let out = f();
    // whole microseconds
    (out, (t.elapsed().as_secs_f64() * 1e6).round() / 1e3)
}

fn converged(r: elastinet::Result<SolveResult>) -> Option<SolveResult> {
    r.ok().filter(|s| s.status == Status::Converged)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlphaRule {
    Fixed(f64),
    /// `α = δ`, the noise level of the instance.
    NoiseLevel,
}

#[derive(Clone, Debug)]
pub struct TableConfig {
    pub m: usize,
    pub s: usize,
    pub spike_period: usize,
    pub alpha: AlphaRule,
    /// `0.0` selects the ISTA reference for that row.
    pub betas: Vec<f64>,
    pub seed: u64,
    pub repeats: usize,
    pub rank_deficient: bool,
    /// Relative noise level; `None` keeps exact data.
    pub noise: Option<f64>,
    /// Adds the `e_Kx = ‖y† − Kx*‖/‖y†‖` column.
    pub data_error: bool,
    pub ista_max_iterations: usize,
}

impl TableConfig {
    pub fn instance(&self, repeat: usize) -> elastinet::Result<Problem> {
        let seed = self.seed.wrapping_add(repeat as u64);
        let mut p = gen_gaussian(self.m, self.s, self.spike_period, seed)?;
        if self.rank_deficient {
            p = make_rank_deficient(&p)?;
        }
        if let Some(level) = self.noise {
            p = add_noise(&p, level, seed.wrapping_add(NOISE_STREAM))?;
        }
        Ok(p)
    }

    fn alpha_for(&self, p: &Problem) -> f64 {
        match self.alpha {
            AlphaRule::Fixed(a) => a,
            AlphaRule::NoiseLevel => p.noise_level().unwrap_or(0.0),
        }
    }
}

#[derive(Clone, Debug, Default)]
struct Cellwise {
    active: Option<f64>,
    rel_error: Option<f64>,
    data_error: Option<f64>,
    rfss: Option<(f64, f64)>,
    rssn: Option<(f64, f64)>,
}

fn run_cell(cfg: &TableConfig, beta: f64, repeat: usize) -> Cellwise {
    let Ok(p) = cfg.instance(repeat) else {
        return Cellwise::default();
    };
    let Ok(r) = RegParams::new(cfg.alpha_for(&p), beta) else {
        return Cellwise::default();
    };
    let x_true = p.exact_solution().expect("generated instances carry x†");
    let y_true = p.exact_data().expect("generated instances carry y†");
    let metrics = |res: &SolveResult, out: &mut Cellwise| {
        out.active = Some(res.active_set.len() as f64);
        out.rel_error = Some(rel_error(&res.solution, x_true));
        out.data_error = Some((y_true - p.operator() * &res.solution).norm() / y_true.norm());
    };
    let mut out = Cellwise::default();
    if beta == 0.0 {
        if let Some(res) = converged(ista_solve(&p, &r, ISTA_TOLERANCE, cfg.ista_max_iterations)) {
            metrics(&res, &mut out);
            let rejected = cfg.rank_deficient
                && out.data_error.is_some_and(|e| e > RANK_DEFICIENT_RESIDUAL_LIMIT);
            if rejected {
                out = Cellwise::default();
            }
        }
        return out;
    }
    let (rfss, rfss_ms) = timed(|| converged(rfss_solve(&p, &r, &RfssOptions::default())));
    let (rssn, rssn_ms) = timed(|| converged(rssn_solve(&p, &r, &RssnOptions::default())));
    if let Some(res) = rfss.as_ref().or(rssn.as_ref()) {
        metrics(res, &mut out);
    }
    out.rfss = rfss.map(|res| (res.iterations as f64, rfss_ms));
    out.rssn = rssn.map(|res| (res.iterations as f64, rssn_ms));
    out
}

fn mean(vals: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Option<Vec<f64>> = vals.collect();
    let v = v?;
    if v.is_empty() {
        return None;
    }
    Some(v.iter().sum::<f64>() / v.len() as f64)
}

/// Output of a table experiment: the table plus the solver behind each row.
#[derive(Clone, Debug)]
pub struct TableRun {
    pub table: Table,
    pub solvers: Vec<&'static str>,
}

pub fn table_columns(data_error: bool) -> Vec<&'static str> {
    let mut h = vec!["beta", "active_size", "rel_error"];
    if data_error {
        h.push("e_Kx");
    }
    h.extend(["rfss_iters", "rfss_ms", "rssn_iters", "rssn_ms"]);
    h
}

pub fn run_table(cfg: &TableConfig) -> TableRun {
    let repeats = cfg.repeats.max(1);
    let jobs: Vec<(usize, usize)> = (0..cfg.betas.len())
        .flat_map(|b| (0..repeats).map(move |r| (b, r)))
        .collect();
    let cells: Vec<Cellwise> = jobs
        .par_iter()
        .map(|&(b, r)| run_cell(cfg, cfg.betas[b], r))
        .collect();

    let mut table = Table::new(&table_columns(cfg.data_error));
    let mut solvers = Vec::new();
    for (b, &beta) in cfg.betas.iter().enumerate() {
        let group = &cells[b * repeats..(b + 1) * repeats];
        let mut row = vec![
            Cell::Num(beta),
            mean(group.iter().map(|c| c.active)).into(),
            mean(group.iter().map(|c| c.rel_error)).into(),
        ];
        if cfg.data_error {
            row.push(mean(group.iter().map(|c| c.data_error)).into());
        }
        for pick in [|c: &Cellwise| c.rfss, |c: &Cellwise| c.rssn] {
            row.push(mean(group.iter().map(|c| pick(c).map(|p| p.0))).into());
            row.push(mean(group.iter().map(|c| pick(c).map(|p| p.1))).into());
        }
        table.push(row);
        solvers.push(if beta == 0.0 { "ista" } else { "rfss+rssn" });
    }
    TableRun { table, solvers }
}

#[derive(Clone, Debug)]
pub struct RateConfig {
    pub n: usize,
    pub band: usize,
    pub sigma: f64,
    /// `β = fraction · α`; a fraction of `0` selects the ISTA reference.
    pub beta_fractions: Vec<f64>,
    /// Absolute noise levels; `α = δ` for each.
    pub deltas: Vec<f64>,
    /// Boundary between the high- and low-noise fits. `None` means the
    /// geometric midpoint of the delta range.
    pub split: Option<f64>,
    pub seed: u64,
    pub ista_max_iterations: usize,
}

impl RateConfig {
    pub fn split_point(&self) -> f64 {
        self.split.unwrap_or_else(|| {
            let lo = self.deltas.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = self.deltas.iter().cloned().fold(0.0, f64::max);
            (lo * hi).sqrt()
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RatePoint {
    pub beta_fraction: f64,
    pub delta: f64,
    pub rel_error: Option<f64>,
    pub iterations: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlopeReport {
    pub beta_fraction: f64,
    pub high_noise: Option<f64>,
    pub low_noise: Option<f64>,
}

/// Noisy copy of `p` with `‖y^δ − y†‖ = delta`.
pub fn with_noise_level(p: &Problem, delta: f64, seed: u64) -> elastinet::Result<Problem> {
    let y = p.exact_data().unwrap_or(p.data());
    add_noise(p, delta / y.norm(), seed)
}

pub fn run_rates(cfg: &RateConfig) -> elastinet::Result<(Vec<RatePoint>, Vec<SlopeReport>)> {
    let p = gen_blur(cfg.n, cfg.band, cfg.sigma)?;
    let x_true = p.exact_solution().expect("blur instance carries x†").clone();
    let noise_seed = cfg.seed.wrapping_add(NOISE_STREAM);
    let jobs: Vec<(f64, f64)> = cfg
        .beta_fractions
        .iter()
        .flat_map(|&f| cfg.deltas.iter().map(move |&d| (f, d)))
        .collect();
    let points: Vec<RatePoint> = jobs
        .par_iter()
        .map(|&(fraction, delta)| {
            let solved = with_noise_level(&p, delta, noise_seed).ok().and_then(|q| {
                let r = RegParams::new(delta, fraction * delta).ok()?;
                let res = if fraction == 0.0 {
                    ista_solve(&q, &r, ISTA_TOLERANCE, cfg.ista_max_iterations)
                } else {
                    rssn_solve(&q, &r, &RssnOptions::default())
                };
                converged(res)
            });
            RatePoint {
                beta_fraction: fraction,
                delta,
                rel_error: solved.as_ref().map(|s| rel_error(&s.solution, &x_true)),
                iterations: solved.map(|s| s.iterations),
            }
        })
        .collect();

    let split = cfg.split_point();
    let slopes = cfg
        .beta_fractions
        .iter()
        .map(|&f| {
            let pts = |keep: &dyn Fn(f64) -> bool| -> Vec<(f64, f64)> {
                points
                    .iter()
                    .filter(|p| p.beta_fraction == f && keep(p.delta))
                    .filter_map(|p| p.rel_error.map(|e| (p.delta, e)))
                    .collect()
            };
            SlopeReport {
                beta_fraction: f,
                high_noise: slope_fit(&pts(&|d| d >= split)).ok(),
                low_noise: slope_fit(&pts(&|d| d <= split)).ok(),
            }
        })
        .collect();
    Ok((points, slopes))
}

pub fn rate_table(points: &[RatePoint]) -> Table {
    let mut t = Table::new(&["beta_fraction", "delta", "rel_error", "iterations"]);
    for p in points {
        t.push(vec![
            Cell::Num(p.beta_fraction),
            Cell::Num(p.delta),
            p.rel_error.into(),
            p.iterations.map_or(Cell::Missing, |i| Cell::Int(i as u64)),
        ]);
    }
    t
}

pub fn slope_table(slopes: &[SlopeReport]) -> Table {
    let mut t = Table::new(&["beta_fraction", "high_noise_slope", "low_noise_slope"]);
    for s in slopes {
        t.push(vec![Cell::Num(s.beta_fraction), s.high_noise.into(), s.low_noise.into()]);
    }
    t
}

#[derive(Clone, Debug)]
pub struct PathConfig {
    pub n: usize,
    pub band: usize,
    pub sigma: f64,
    /// Relative noise level.
    pub noise: f64,
    pub alpha: f64,
    /// The path runs `β = α, α/2, …, α/2^steps`.
    pub steps: u32,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct PathReport {
    pub betas: Vec<f64>,
    pub warm: Vec<SolveResult>,
    pub cold: SolveResult,
    pub exact_solution: DVector<f64>,
}

impl PathReport {
    pub fn all_warm_converged(&self) -> bool {
        self.warm.iter().all(|r| r.status.is_converged())
    }

    pub fn final_warm_iterations(&self) -> usize {
        self.warm.last().map_or(0, |r| r.iterations)
    }

    /// Cold start failed, or needed more than `factor` times the warm
    /// iterations at the final β.
    pub fn cold_start_worse_by(&self, factor: f64) -> bool {
        !self.cold.status.is_converged()
            || self.cold.iterations as f64 > factor * self.final_warm_iterations() as f64
    }
}

pub fn run_path(cfg: &PathConfig) -> elastinet::Result<PathReport> {
    let p = gen_blur(cfg.n, cfg.band, cfg.sigma)?;
    let p = add_noise(&p, cfg.noise, cfg.seed.wrapping_add(NOISE_STREAM))?;
    let betas: Vec<f64> = (0..=cfg.steps).map(|k| cfg.alpha / 2f64.powi(k as i32)).collect();
    let warm = beta_path(&p, cfg.alpha, &betas, SolverChoice::Rssn)?;
    let last = *betas.last().expect("path has at least one beta");
    let cold = rssn_solve(&p, &RegParams::new(cfg.alpha, last)?, &RssnOptions::default())?;
    Ok(PathReport {
        betas,
        warm,
        cold,
        exact_solution: p.exact_solution().expect("blur instance carries x†").clone(),
    })
}

pub fn path_table(report: &PathReport) -> Table {
    let mut t = Table::new(&["beta", "start", "iterations", "status", "rel_error"]);
    let row = |beta: f64, start: &str, r: &SolveResult| {
        vec![
            Cell::Num(beta),
            Cell::Text(start.into()),
            Cell::Int(r.iterations as u64),
            Cell::Text(format!("{:?}", r.status)),
            if r.status.is_converged() {
                Cell::Num(rel_error(&r.solution, &report.exact_solution))
            } else {
                Cell::Missing
            },
        ]
    };
    for (beta, r) in report.betas.iter().zip(&report.warm) {
        t.push(row(*beta, "warm", r));
    }
    t.push(row(*report.betas.last().unwrap(), "cold", &report.cold));
    t
}

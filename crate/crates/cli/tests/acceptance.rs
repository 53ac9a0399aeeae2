//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_FAILURES` are computed and reported exactly like
//! the others but do not affect the exit code unless `ACCEPTANCE_STRICT=1`.
//! The README explains why each one is out of reach.

use std::time::{Duration, Instant};

use elastinet::generate::{add_noise, gen_gaussian, make_rank_deficient, make_source_instance};
use elastinet::nalgebra::{DMatrix, DVector};
use elastinet::params::{
    discrepancy_solve, residual_at, solve_with, value_function, DiscrepancyOptions, SolverChoice,
};
use elastinet::reference::{ista_solve, r_eta_minimizer_on_line};
use elastinet::rfss::rfss_solve_traced;
use elastinet::{
    kkt_residual, rfss_solve, rssn_solve, zero_minimizer_threshold, ConsistentTriple, Problem,
    RegParams, RfssOptions, RssnOptions, SolveResult,
};
use elastinet_cli::experiments::{
    rel_error, run_path, run_rates, run_table, with_noise_level, AlphaRule, PathConfig, RateConfig,
    TableConfig, ISTA_MAX_ITERATIONS, ISTA_TOLERANCE,
};
use elastinet_cli::io::Cell;

const KNOWN_FAILURES: &[u32] = &[5, 9];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(t: Instant, limit: Duration) -> (bool, String) {
    let e = t.elapsed();
    (e < limit, format!("{:.2}s of {}s", e.as_secs_f64(), limit.as_secs()))
}

fn converged(r: elastinet::Result<SolveResult>) -> Option<SolveResult> {
    r.ok().filter(|s| s.status.is_converged())
}

fn c1_line_minimizer() -> Outcome {
    let t = Instant::now();
    let base = DVector::from_vec(vec![1.0, 0.0]);
    let dir = DVector::from_vec(vec![2.0, 1.0]);
    let mut worst = 0.0f64;
    for eta in [0.5, 1.0, 2.0, 0.1, 0.25, 0.4] {
        let want = if eta >= 0.5 {
            [0.0, -0.5]
        } else {
            [0.2 - 0.4 * eta, -0.4 - 0.2 * eta]
        };
        match r_eta_minimizer_on_line(&base, &dir, eta, (-10.0, 10.0)) {
            Ok(m) => {
                worst = worst.max((m.x_star[0] - want[0]).abs()).max((m.x_star[1] - want[1]).abs());
            }
            Err(e) => return outcome(false, format!("eta {eta}: {e}")),
        }
    }
    let (fast, time) = within(t, Duration::from_secs(1));
    outcome(worst <= 1e-8 && fast, format!("max deviation {worst:.1e}, {time}"))
}

fn c2_zero_threshold() -> Outcome {
    let t = Instant::now();
    let mut bad = Vec::new();
    for seed in 0..100u64 {
        let p = gen_gaussian(20, 20, 10, seed).unwrap();
        let thr = zero_minimizer_threshold(&p);
        for (factor, want_zero) in [(1.001, true), (0.999, false)] {
            let r = RegParams::new(factor * thr, 1.0).unwrap();
            let rssn = rssn_solve(&p, &r, &RssnOptions::default()).unwrap();
            let rfss = rfss_solve(&p, &r, &RfssOptions::default()).unwrap();
            for res in [rssn, rfss] {
                let zero = res.solution.iter().all(|&v| v == 0.0);
                if zero != want_zero || !res.status.is_converged() {
                    bad.push(seed);
                }
            }
        }
    }
    let (fast, time) = within(t, Duration::from_secs(10));
    outcome(bad.is_empty() && fast, format!("{} of 100 instances wrong, {time}", bad.len()))
}

fn c3_instances() -> impl Iterator<Item = (u64, f64, Problem, RegParams)> {
    (0..50u64).flat_map(|seed| {
        let p = gen_gaussian(60, 60, 10, seed).unwrap();
        [2f64.powi(-20), 2f64.powi(-10)]
            .into_iter()
            .map(move |beta| (seed, beta, p.clone(), RegParams::new(1e-3, beta).unwrap()))
    })
}

fn c3_oracle_agreement() -> Outcome {
    let t = Instant::now();
    let mut worst_gap = 0.0f64;
    let mut worst_kkt = 0.0f64;
    let mut failures = Vec::new();
    for (seed, beta, p, r) in c3_instances() {
        let scale = p.adjoint_data().amax();
        let rssn = converged(rssn_solve(&p, &r, &RssnOptions::default()));
        let rfss = converged(rfss_solve(&p, &r, &RfssOptions::default()));
        let ista = converged(ista_solve(&p, &r, 1e-14, ISTA_MAX_ITERATIONS));
        let (Some(a), Some(b), Some(c)) = (rssn, rfss, ista) else {
            failures.push(format!("seed {seed} beta {beta:e}: a solver did not converge"));
            continue;
        };
        for (x, y) in [(&a, &b), (&a, &c), (&b, &c)] {
            let norm = x.solution.norm().max(f64::MIN_POSITIVE);
            worst_gap = worst_gap.max((&x.solution - &y.solution).norm() / norm);
        }
        for res in [&a, &b, &c] {
            let f = kkt_residual(&res.solution, &p, &r).unwrap().amax();
            worst_kkt = worst_kkt.max(f / scale);
        }
    }
    let (fast, time) = within(t, Duration::from_secs(60));
    let pass = failures.is_empty() && worst_gap <= 1e-7 && worst_kkt <= 1e-8 && fast;
    let mut detail = format!(
        "max pairwise rel gap {worst_gap:.1e}, max ‖F‖∞/‖Kᵀy‖∞ {worst_kkt:.1e}, {time}"
    );
    if let Some(f) = failures.first() {
        detail.push_str(&format!("; {} failures, first: {f}", failures.len()));
    }
    outcome(pass, detail)
}

fn c4_rfss_descent() -> Outcome {
    let mut bad = Vec::new();
    let mut most_iters = 0;
    for (seed, beta, p, r) in c3_instances() {
        let start = ConsistentTriple::zero(p.cols());
        match rfss_solve_traced(&p, &r, &RfssOptions::default(), &start) {
            Ok((res, trace)) => {
                most_iters = most_iters.max(res.iterations);
                let ok = trace.strictly_decreasing()
                    && res.status.is_converged()
                    && res.iterations <= 10 * p.cols();
                if !ok {
                    bad.push((seed, beta));
                }
            }
            Err(_) => bad.push((seed, beta)),
        }
    }
    outcome(
        bad.is_empty(),
        format!("{} of 100 runs violate, most iterations {most_iters} (limit 600)", bad.len()),
    )
}

fn c5_rank_deficient() -> Outcome {
    let mut worst_rel = 0.0f64;
    let mut worst_fit = 0.0f64;
    let mut not_converged = 0;
    let mut ista_rows = Vec::new();
    for seed in 0..5u64 {
        let p = make_rank_deficient(&gen_gaussian(60, 60, 10, seed).unwrap()).unwrap();
        let x_true = p.exact_solution().unwrap();
        let y_true = p.exact_data().unwrap();
        let fit = |x: &DVector<f64>| (p.operator() * x - y_true).norm() / y_true.norm();
        for k in [-20, -16, -12] {
            let r = RegParams::new(1e-5, 2f64.powi(k)).unwrap();
            for res in [
                converged(rssn_solve(&p, &r, &RssnOptions::default())),
                converged(rfss_solve(&p, &r, &RfssOptions::default())),
            ] {
                match res {
                    Some(res) => {
                        worst_rel = worst_rel.max(rel_error(&res.solution, x_true));
                        worst_fit = worst_fit.max(fit(&res.solution));
                    }
                    None => not_converged += 1,
                }
            }
        }
        let r0 = RegParams::new(1e-5, 0.0).unwrap();
        let rejected = match converged(ista_solve(&p, &r0, ISTA_TOLERANCE, ISTA_MAX_ITERATIONS)) {
            None => true,
            Some(res) => fit(&res.solution) > 1e-3,
        };
        ista_rows.push(rejected);
    }
    let all_dash = ista_rows.iter().all(|&d| d);
    let pass = not_converged == 0 && worst_rel <= 1e-2 && worst_fit <= 1e-6 && all_dash;
    outcome(
        pass,
        format!(
            "{not_converged} non-converged, max rel_error {worst_rel:.1e} (≤ 1e-2), \
             max ‖Kx*−y†‖/‖y†‖ {worst_fit:.1e} (≤ 1e-6), β = 0 row rendered '-' on {}/5",
            ista_rows.iter().filter(|&&d| d).count()
        ),
    )
}

fn c6_value_function() -> Outcome {
    let t = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..10u64 {
        let p = add_noise(&gen_gaussian(30, 30, 10, seed).unwrap(), 0.01, seed + 100).unwrap();
        let (alpha, beta) = (1e-2, 1e-2);
        let Ok(at) = value_function(alpha, beta, &p) else {
            return outcome(false, format!("seed {seed}: solve failed"));
        };
        let (ha, hb) = (1e-5 * alpha, 1e-5 * beta);
        let f = |a, b| value_function(a, b, &p).map(|v| v.value);
        let (Ok(ap), Ok(am), Ok(bp), Ok(bm)) =
            (f(alpha + ha, beta), f(alpha - ha, beta), f(alpha, beta + hb), f(alpha, beta - hb))
        else {
            return outcome(false, format!("seed {seed}: perturbed solve failed"));
        };
        let da = (ap - am) / (2.0 * ha);
        let db = (bp - bm) / (2.0 * hb);
        worst = worst
            .max((da - at.l1).abs() / at.l1)
            .max((db - at.half_l2sq).abs() / at.half_l2sq);
    }
    let (fast, time) = within(t, Duration::from_secs(30));
    outcome(worst <= 1e-4 && fast, format!("max relative FD error {worst:.1e}, {time}"))
}

fn c7_discrepancy() -> Outcome {
    let noisy = |seed| add_noise(&gen_gaussian(40, 40, 10, seed).unwrap(), 0.05, seed + 7).unwrap();

    let p = noisy(0);
    let betas: Vec<f64> = (0..20).map(|k| 10f64.powf(-6.0 + 6.0 * k as f64 / 19.0)).collect();
    let res: Result<Vec<f64>, _> =
        betas.iter().map(|&b| residual_at(b, 1.0, &p, SolverChoice::Auto)).collect();
    let Ok(res) = res else {
        return outcome(false, "residual_at failed");
    };
    let worst_drop = res.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);

    let id = Problem::builder(DMatrix::identity(2, 2), DVector::from_vec(vec![2.0, 0.0]))
        .noise_level(0.5)
        .build()
        .unwrap();
    let beta_id = discrepancy_solve(&id, 0.0, &DiscrepancyOptions::default())
        .map(|d| d.beta_star)
        .unwrap_or(f64::NAN);
    let id_err = (beta_id - 1.0 / 3.0).abs() * 3.0;

    let mut worst_root = 0.0f64;
    for seed in 0..5 {
        let p = noisy(seed);
        let target = p.noise_level().unwrap();
        match discrepancy_solve(&p, 1.0, &DiscrepancyOptions::default()) {
            Ok(d) => worst_root = worst_root.max((d.residual - target).abs() / target),
            Err(e) => return outcome(false, format!("seed {seed}: {e}")),
        }
    }
    outcome(
        worst_drop <= 1e-12 && id_err <= 1e-5 && worst_root <= 1e-5,
        format!(
            "largest residual drop {worst_drop:.1e}, K = I root rel error {id_err:.1e}, \
             max |residual − τδ|/τδ {worst_root:.1e}"
        ),
    )
}

fn c8_rate_bounds() -> Outcome {
    let t = Instant::now();
    let k = gen_gaussian(30, 30, 10, 11).unwrap().operator().clone();
    let eta = 0.5;
    let inst = match make_source_instance(&k, &[2, 7, 13, 19, 26], eta, None, 0) {
        Ok(i) => i,
        Err(e) => return outcome(false, e.to_string()),
    };
    let x_true = inst.problem.exact_solution().unwrap().clone();
    let w = inst.cert.w_norm();
    let mut margin = f64::INFINITY;
    for (i, delta) in [1e-1, 1e-2, 1e-3, 1e-4].into_iter().enumerate() {
        let p = with_noise_level(&inst.problem, delta, 40 + i as u64).unwrap();
        let beta = delta;
        let r = RegParams::coupled(eta, beta).unwrap();
        let Some(res) = converged(solve_with(&p, &r, SolverChoice::Auto)) else {
            return outcome(false, format!("delta {delta:e}: no convergence"));
        };
        let err = (&res.solution - &x_true).norm();
        let fit = (p.operator() * &res.solution - p.data()).norm();
        margin = margin
            .min(delta / beta.sqrt() + beta.sqrt() * w + 1e-10 - err)
            .min(delta + 2.0 * beta * w + 1e-10 - fit);
    }
    let (fast, time) = within(t, Duration::from_secs(30));
    outcome(margin >= 0.0 && fast, format!("smallest bound margin {margin:.2e}, {time}"))
}

fn c9_rate_slopes() -> Outcome {
    let t = Instant::now();
    let deltas: Vec<f64> = (0..11).map(|k| 10f64.powf(-1.0 - 0.5 * k as f64)).collect();
    let cfg = RateConfig {
        n: 20,
        band: 5,
        sigma: 0.7,
        beta_fractions: vec![1.0],
        deltas,
        split: None,
        seed: 0,
        ista_max_iterations: ISTA_MAX_ITERATIONS,
    };
    let Ok((_, slopes)) = run_rates(&cfg) else {
        return outcome(false, "rate sweep failed");
    };
    let (hi, lo) = (slopes[0].high_noise, slopes[0].low_noise);
    let show = |s: Option<f64>| s.map_or("-".to_string(), |v| format!("{v:.3}"));
    let ok_lo = lo.is_some_and(|s| (0.85..=1.1).contains(&s));
    let ok_hi = hi.is_some_and(|s| (0.45..=0.75).contains(&s));
    let (fast, time) = within(t, Duration::from_secs(300));
    outcome(
        ok_lo && ok_hi && fast,
        format!(
            "low-noise slope {} in [0.85, 1.1], high-noise slope {} in [0.45, 0.75], {time}",
            show(lo),
            show(hi)
        ),
    )
}

fn c10_sparsity_trend() -> Outcome {
    let cfg = TableConfig {
        m: 120,
        s: 120,
        spike_period: 10,
        alpha: AlphaRule::Fixed(1e-5),
        betas: vec![2f64.powi(-30), 2f64.powi(-12)],
        seed: 0,
        repeats: 1,
        rank_deficient: false,
        noise: None,
        data_error: false,
        ista_max_iterations: ISTA_MAX_ITERATIONS,
    };
    let t = run_table(&cfg).table;
    let get = |row: usize, col: &str| match t.rows[row][t.column(col).unwrap()] {
        Cell::Num(v) => Some(v),
        _ => None,
    };
    let (Some(a_lo), Some(a_hi), Some(e_lo), Some(e_hi)) =
        (get(0, "active_size"), get(1, "active_size"), get(0, "rel_error"), get(1, "rel_error"))
    else {
        return outcome(false, "a cell failed");
    };
    outcome(
        a_hi > a_lo && e_hi >= 1e2 * e_lo,
        format!("|A| {a_lo} → {a_hi}, rel_error {e_lo:.2e} → {e_hi:.2e} (ratio {:.0})", e_hi / e_lo),
    )
}

fn c11_path_following() -> Outcome {
    let cfg = PathConfig {
        n: 20,
        band: 5,
        sigma: 10.0,
        noise: 0.05,
        alpha: 1e-4,
        steps: 6,
        seed: 0,
    };
    let Ok(rep) = run_path(&cfg) else {
        return outcome(false, "path run failed");
    };
    let iters: Vec<usize> = rep.warm.iter().map(|r| r.iterations).collect();
    outcome(
        rep.all_warm_converged() && rep.cold_start_worse_by(5.0),
        format!(
            "warm iterations {iters:?}, cold start {:?} after {} iterations",
            rep.cold.status, rep.cold.iterations
        ),
    )
}

fn main() {
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let criteria: [(u32, &str, fn() -> Outcome); 11] = [
        (1, "2D line minimizer closed form", c1_line_minimizer),
        (2, "zero-minimizer threshold", c2_zero_threshold),
        (3, "RSSN / RFSS / ISTA agreement", c3_oracle_agreement),
        (4, "RFSS strict descent and termination", c4_rfss_descent),
        (5, "rank-deficient robustness", c5_rank_deficient),
        (6, "value-function derivatives", c6_value_function),
        (7, "residual monotonicity and discrepancy root", c7_discrepancy),
        (8, "a-priori rate bounds", c8_rate_bounds),
        (9, "rate slopes", c9_rate_slopes),
        (10, "sparsity trend", c10_sparsity_trend),
        (11, "path-following", c11_path_following),
    ];
    let mut unexpected = Vec::new();
    let mut passed = 0;
    for (id, name, check) in criteria {
        let o = check();
        let known = KNOWN_FAILURES.contains(&id);
        let tag = match (o.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("criterion {id:>2} {tag}: {name}: {}", o.detail);
        if o.pass {
            passed += 1;
        } else if !known || strict {
            unexpected.push(id);
        }
    }
    println!("{passed} of 11 criteria pass");
    if !unexpected.is_empty() {
        eprintln!("failing criteria: {unexpected:?}");
        std::process::exit(1);
    }
}

//! End-to-end acceptance checks, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the verdict lines always reach the
//! output; the process exits non-zero if any check fails.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fopid_core::fracnum::{analytic_power_differintegral, gl_differintegral, Realization};
use fopid_core::lqr_fopid::{gains_for, PidGains};
use fopid_core::matops::{expm, is_stabilizable, solve_care, spectral_abscissa, CareProblem};
use fopid_core::nsga2::{fast_nondominated_sort, optimize, pareto_dominates, run_nsga2};
use fopid_core::rules::{
    adjusted_r2, eval_tuning_rule, fit_polynomial_surface, median_solutions, surface_points,
    RuleParameter,
};
use fopid_core::simkit::{
    evaluate_design_objectives, simulate_closed_loop, simulate_open_loop_step, Disturbance,
};
use fopid_core::{DelayMethod, FopidController, LqrDesignVars, MooConfig, NioptdPlant, Scenario};

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

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-scale..scale))
}

fn care_contract() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut solved = 0;
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    while solved + failures.len() < 100 {
        let n = rng.random_range(1..=6);
        let m = rng.random_range(1..=n.min(3));
        let a = random_matrix(&mut rng, n, n, 1.5);
        let b = random_matrix(&mut rng, n, m, 1.0);
        if !is_stabilizable(&a, &b).unwrap() {
            continue;
        }
        let g = random_matrix(&mut rng, n, n, 1.0);
        let q = g.transpose() * &g + DMatrix::identity(n, n) * rng.random_range(0.01..1.0);
        let rd = random_matrix(&mut rng, m, m, 0.5);
        let r = rd.transpose() * &rd + DMatrix::identity(m, m) * rng.random_range(0.1..2.0);
        let prob = CareProblem::new(a.clone(), b.clone(), q.clone(), r).unwrap();
        let trial = solved + failures.len();
        match solve_care(&prob) {
            Ok(sol) => {
                let p = &sol.p;
                let res = prob.residual(p).norm();
                let limit = 1e-8 * q.norm().max(1.0);
                let sym = (p - p.transpose()).norm() <= 1e-12 * p.norm().max(1.0);
                let psd =
                    p.clone().symmetric_eigen().eigenvalues.min() >= -1e-10 * p.norm().max(1.0);
                let hurwitz = spectral_abscissa(&(&a - &b * prob.gain_for(p))) < 0.0;
                worst = worst.max(res / limit);
                if res <= limit && sym && psd && hurwitz {
                    solved += 1;
                } else {
                    failures.push(format!(
                        "#{trial} res={res:.1e} sym={sym} psd={psd} hurwitz={hurwitz}"
                    ));
                }
            }
            Err(e) => failures.push(format!("#{trial} {e}")),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failures.is_empty() && secs < 5.0,
        format!(
            "{solved}/100 solved, worst residual {worst:.2e} of the bound, {secs:.2}s{}",
            if failures.is_empty() {
                String::new()
            } else {
                format!("; failures: {}", failures.join(", "))
            }
        ),
    )
}

fn taylor_oracle(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut sum = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..80 {
        term = &term * m / k as f64;
        sum += &term;
    }
    sum
}

fn expm_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=8);
        let raw = random_matrix(&mut rng, n, n, 1.0);
        let target = rng.random_range(0.0..3.0);
        let m = if raw.norm() > 0.0 {
            &raw * (target / raw.norm())
        } else {
            raw
        };
        let e = expm(&m).unwrap();
        let s = taylor_oracle(&m);
        worst = worst.max((&e - &s).norm() / s.norm());
    }
    let nil = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 2.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0]);
    let exact = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 3.5, 0.0, 1.0, 3.0, 0.0, 0.0, 1.0]);
    let nil_err = (expm(&nil).unwrap() - exact).amax();
    outcome(
        worst <= 1e-10 && nil_err <= 4.0 * f64::EPSILON,
        format!("max relative error {worst:.2e} over 100 matrices, nilpotent error {nil_err:.1e}"),
    )
}

fn gl_error_at_one(h: f64) -> f64 {
    let n = (1.0 / h).round() as usize;
    let t: Vec<f64> = (0..=n).map(|k| k as f64 * h).collect();
    let d = gl_differintegral(&t, 0.5, h, None).unwrap();
    let exact = analytic_power_differintegral(1.0, 0.5, 1.0).unwrap();
    (d[n] - exact).abs()
}

fn gl_convergence() -> Outcome {
    let exact = analytic_power_differintegral(1.0, 0.5, 1.0).unwrap();
    let e1 = gl_error_at_one(1e-3);
    let e2 = gl_error_at_one(5e-4);
    let ratio = e1 / e2;
    outcome(
        (exact - 2.0 / std::f64::consts::PI.sqrt()).abs() < 1e-14
            && e1 <= 5e-3
            && (1.5..=2.5).contains(&ratio),
        format!("error {e1:.2e} at h=1e-3, {e2:.2e} at h=5e-4, ratio {ratio:.3}"),
    )
}

fn foptd_step() -> Outcome {
    let plant = NioptdPlant::new(1.0, 0.5, 2.0, 1.0).unwrap();
    let max_error = |realization| {
        let r = simulate_open_loop_step(&plant, 30.0, 0.01, realization).unwrap();
        r.t.iter()
            .zip(&r.y)
            .map(|(t, y)| {
                let exact = if *t < 0.5 {
                    0.0
                } else {
                    1.0 - (-(t - 0.5) / 2.0).exp()
                };
                (y - exact).abs()
            })
            .fold(0.0f64, f64::max)
    };
    let filter = max_error(Realization::default());
    // first-order GL, reported only
    let gl = max_error(Realization::GrunwaldLetnikov { memory: None });
    outcome(
        filter <= 1e-3,
        format!("max abs error {filter:.2e} (GL path {gl:.2e})"),
    )
}

struct Row {
    name: &'static str,
    weights: [f64; 6],
    itse: f64,
    isdco: f64,
    /// Gains as printed: (first column, second column, Kd).
    printed: [f64; 3],
}

const ROWS: [Row; 4] = [
    Row {
        name: "B1/he",
        weights: [0.643793, 0.02965, 0.062444, 0.34342, 1.133782, 0.449655],
        itse: 0.816633,
        isdco: 8.217709,
        printed: [0.5692, 0.7092, 1.8411],
    },
    Row {
        name: "A2/cai",
        weights: [0.605858, 0.080236, 0.057087, 0.946696, 0.995725, 0.026867],
        itse: 0.772218,
        isdco: 8.874867,
        printed: [0.8, 0.9186, 2.6498],
    },
    Row {
        name: "B2/cai",
        weights: [0.061832, 0.033902, 0.09303, 0.873642, 0.891239, 0.026349],
        itse: 8.720682,
        isdco: 1.452479,
        printed: [0.266, 0.119, 1.1945],
    },
    Row {
        name: "C2/cai",
        weights: [0.049785, 0.026213, 0.098279, 0.918109, 0.754981, 0.026134],
        itse: 17.32365,
        isdco: 1.067778,
        printed: [0.2329, 0.0791, 1.0728],
    },
];

fn reference_rows() -> Outcome {
    let mut parts = Vec::new();
    let mut all = true;
    for row in &ROWS {
        let start = Instant::now();
        let (plant, method) = if row.name.ends_with("he") {
            (NioptdPlant::benchmark_oscillatory(), DelayMethod::He)
        } else {
            (NioptdPlant::benchmark_sluggish(), DelayMethod::Cai)
        };
        let w = row.weights;
        let g = gains_for(&plant, [w[0], w[1], w[2]], w[3], method)
            .unwrap()
            .gains;
        let gains_match = (g.ki - row.printed[0]).abs() < 1e-4
            && (g.kp - row.printed[1]).abs() < 1e-4
            && (g.kd - row.printed[2]).abs() < 1e-4;
        let ratios = |c: FopidController| {
            let r = simulate_closed_loop(&plant, &c, &Scenario::default()).unwrap();
            (r.itse / row.itse, r.isdco / row.isdco)
        };
        // state-feedback ordering, and the printed column labels taken literally
        let ordered = ratios(g.with_orders(w[4], w[5]).unwrap());
        let literal = PidGains {
            kp: row.printed[0],
            ki: row.printed[1],
            kd: row.printed[2],
        };
        let labelled = ratios(literal.with_orders(w[4], w[5]).unwrap());
        let within = |r: (f64, f64)| (r.0 - 1.0).abs() <= 0.2 && (r.1 - 1.0).abs() <= 0.2;
        let secs = start.elapsed().as_secs_f64();
        let ok = gains_match && within(ordered) && secs < 60.0;
        all &= ok;
        parts.push(format!(
            "{} {} ratios ({:.3}, {:.3}) [labels literal: ({:.3}, {:.3})] {:.1}s",
            row.name,
            if ok { "ok" } else { "off" },
            ordered.0,
            ordered.1,
            labelled.0,
            labelled.1,
            secs
        ));
    }
    outcome(all, parts.join("; "))
}

fn reduced_front() -> Outcome {
    let start = Instant::now();
    let cfg = MooConfig {
        population: 40,
        generations: 40,
        seed: 1,
        ..MooConfig::default()
    };
    let plant = NioptdPlant::benchmark_oscillatory();
    let front = run_nsga2(&plant, DelayMethod::He, &cfg, &Scenario::default()).unwrap();
    let min = |j: usize| {
        front
            .objectives()
            .iter()
            .map(|o| o[j])
            .fold(f64::INFINITY, f64::min)
    };
    let (j1, j2) = (min(0), min(1));
    let secs = start.elapsed().as_secs_f64();
    let nd = front.is_mutually_nondominated();
    outcome(
        j1 <= 1.0 && j2 <= 2.0 && nd && secs < 900.0,
        format!(
            "{} entries, min ITSE {j1:.4}, min ISDCO {j2:.4}, non-dominated {nd}, {secs:.1}s",
            front.len()
        ),
    )
}

fn brute_force_fronts(objs: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let mut left: Vec<usize> = (0..objs.len()).collect();
    let mut fronts = Vec::new();
    while !left.is_empty() {
        let front: Vec<usize> = left
            .iter()
            .copied()
            .filter(|&i| {
                !left
                    .iter()
                    .any(|&j| pareto_dominates(&objs[j], &objs[i]).unwrap())
            })
            .collect();
        left.retain(|i| !front.contains(i));
        fronts.push(front);
    }
    fronts
}

fn nsga2_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut mismatches = 0;
    for _ in 0..200 {
        let size = rng.random_range(1..=60);
        let m = rng.random_range(2..=3);
        let grid = rng.random_bool(0.5);
        let objs: Vec<Vec<f64>> = (0..size)
            .map(|_| {
                (0..m)
                    .map(|_| {
                        if grid {
                            rng.random_range(0..8) as f64
                        } else {
                            rng.random::<f64>()
                        }
                    })
                    .collect()
            })
            .collect();
        if fast_nondominated_sort(&objs) != brute_force_fronts(&objs) {
            mismatches += 1;
        }
    }
    let cfg = MooConfig {
        population: 40,
        generations: 60,
        bounds: vec![(-5.0, 5.0)],
        seed: 9,
        ..MooConfig::default()
    };
    let out = optimize(|x: &[f64]| vec![x[0] * x[0], (x[0] - 2.0).powi(2)], &cfg).unwrap();
    let xs: Vec<f64> = out.front.iter().map(|p| p.x[0]).collect();
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let inside = xs.iter().all(|&x| (-0.05..=2.05).contains(&x));
    outcome(
        mismatches == 0 && lo <= 0.05 && hi >= 1.95 && inside,
        format!("{mismatches} sort mismatches in 200 populations; bi-quadratic front spans [{lo:.4}, {hi:.4}]"),
    )
}

fn tuning_rules() -> Outcome {
    let data = median_solutions();
    let checks = [
        (RuleParameter::Kp, 0.104),
        (RuleParameter::Ki, 0.06512),
        (RuleParameter::Kd, 0.09768),
        (RuleParameter::Lambda, 0.05212),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (p, rmse) in checks {
        let within = data
            .iter()
            .filter(|m| {
                let c = eval_tuning_rule(m.l_over_t, m.alpha, 1.0)
                    .unwrap()
                    .controller;
                let v = match p {
                    RuleParameter::Kp => c.kp,
                    RuleParameter::Ki => c.ki,
                    RuleParameter::Kd => c.kd,
                    _ => c.lambda,
                };
                (v - m.value(p)).abs() <= 3.0 * rmse
            })
            .count();
        let share = within as f64 / data.len() as f64;
        ok &= share >= 0.8;
        parts.push(format!("{} {:.0}%", p.as_str(), 100.0 * share));
    }
    let (_, d) = fit_polynomial_surface(&surface_points(&data, RuleParameter::Lambda)).unwrap();
    let refit = (d.r2 - 0.9758).abs() <= 0.02 && (d.adjusted_r2 - 0.9535).abs() <= 0.02;
    let kd_adj = adjusted_r2(0.9919, 23, 11).unwrap();
    let identity = (kd_adj - 0.9837).abs() <= 1e-3;
    outcome(
        ok && refit && identity,
        format!(
            "within 3·RMSE: {}; lambda refit R² {:.4}, adjusted {:.4}; Kd adjusted R² at n=23 {:.4}",
            parts.join(", "),
            d.r2,
            d.adjusted_r2,
            kd_adj
        ),
    )
}

fn property_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = Vec::new();

    for plant in [
        NioptdPlant::benchmark_oscillatory(),
        NioptdPlant::benchmark_sluggish(),
    ] {
        for _ in 0..10 {
            let c = FopidController::new(
                rng.random_range(0.0..2.0),
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..2.0),
                rng.random_range(0.0..2.0),
                rng.random_range(0.0..1.5),
            )
            .unwrap();
            let scenario = Scenario {
                horizon: 20.0,
                disturbance: Some(Disturbance {
                    time: 10.0,
                    magnitude: 0.1,
                }),
                ..Scenario::default()
            };
            let r = simulate_closed_loop(&plant, &c, &scenario).unwrap();
            if r.x2.iter().zip(&r.y).any(|(e, y)| *e != 1.0 - y) {
                failures.push("error-state identity".to_string());
            }
            if !(r.itse >= 0.0 && r.isdco >= 0.0) {
                failures.push("negative index".to_string());
            }
        }
    }

    let plant = NioptdPlant::benchmark_oscillatory();
    let zero = FopidController::new(0.0, 0.0, 0.0, 1.0, 1.0).unwrap();
    let still = simulate_closed_loop(
        &plant,
        &zero,
        &Scenario {
            setpoint: 0.0,
            ..Scenario::default()
        },
    )
    .unwrap();
    if still.itse != 0.0 || still.isdco != 0.0 {
        failures.push("zero setpoint indices".to_string());
    }
    let open = simulate_closed_loop(&plant, &zero, &Scenario::default()).unwrap();
    let n = 10_000.0;
    let itse = 0.01 * 0.01 * n * (n - 1.0) / 2.0;
    if (open.itse - itse).abs() > 1e-9 * itse || (open.isdco - 100.0).abs() > 1e-9 {
        failures.push(format!("zero-gain indices ({}, {})", open.itse, open.isdco));
    }

    for alpha in [0.5, 1.0, 1.5] {
        let p = NioptdPlant::new(1.3, 0.0, 2.0, alpha).unwrap();
        for _ in 0..10 {
            let q = [
                rng.random_range(0.01..10.0),
                rng.random_range(0.01..10.0),
                rng.random_range(0.01..10.0),
            ];
            let r = rng.random_range(0.1..10.0);
            let base = gains_for(&p, q, r, DelayMethod::DelayFree).unwrap().gains;
            for m in [DelayMethod::Cai, DelayMethod::He] {
                let g = gains_for(&p, q, r, m).unwrap().gains;
                let d = (g.kp - base.kp)
                    .abs()
                    .max((g.ki - base.ki).abs())
                    .max((g.kd - base.kd).abs());
                if d > 1e-9 {
                    failures.push(format!("L=0 {m} differs by {d:.1e}"));
                }
            }
        }
    }

    let cfg = MooConfig {
        population: 12,
        generations: 4,
        seed: 77,
        ..MooConfig::default()
    };
    let short = Scenario {
        horizon: 20.0,
        ..Scenario::default()
    };
    let a = run_nsga2(&plant, DelayMethod::Cai, &cfg, &short).unwrap();
    let b = run_nsga2(&plant, DelayMethod::Cai, &cfg, &short).unwrap();
    if a != b {
        failures.push("seeded optimizer not deterministic".to_string());
    }
    let vars =
        LqrDesignVars::new(0.643793, 0.02965, 0.062444, 0.34342, 1.133782, 0.449655).unwrap();
    let j = evaluate_design_objectives(&plant, &vars, DelayMethod::He, &Scenario::default());
    if j != evaluate_design_objectives(&plant, &vars, DelayMethod::He, &Scenario::default()) {
        failures.push("objective evaluation not deterministic".to_string());
    }

    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            "identity, non-negativity, trivial zeros, L=0 equivalence and determinism hold"
                .to_string()
        } else {
            failures.join(", ")
        },
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        (
            "CARE contract on random stabilizable systems",
            care_contract,
        ),
        ("matrix exponential against series oracle", expm_oracle),
        ("Grünwald–Letnikov convergence", gl_convergence),
        ("integer-order open-loop step", foptd_step),
        ("reference rows reproduced within 20%", reference_rows),
        ("reduced-scale Pareto front", reduced_front),
        (
            "non-dominated sorting and bi-quadratic front",
            nsga2_correctness,
        ),
        ("tuning rules", tuning_rules),
        ("property suite", property_suite),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} criterion {} ({name}): {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    println!(
        "acceptance: {} of {} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

//! Acceptance gate. Runs every criterion, prints one line per criterion and
//! exits nonzero if any of them fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use aeromec::allocation::verify_allocation_optimality;
use aeromec::deployment::{deploy_with_weights, wkd_deploy, WkdConfig};
use aeromec::drcc::oracle::{cvar_socp_oracle, two_point_cvar};
use aeromec::drcc::worst_case_cvar;
use aeromec::evaluation::{
    compare_methods, median_objective, monte_carlo_robustness, robust_vs_ideal, sweep, DistKind, ErrorDistribution,
    InstanceSource, Quartiles, SweepParam,
};
use aeromec::orchestrator::{solve, Method, SolveParams};
use aeromec::scenario::{generate_scenario, GenConfig, Range};

mod common;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(id: u32, name: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let took = start.elapsed();
    let in_time = took <= limit;
    let pass = out.pass && in_time;
    println!(
        "[{}] criterion {id} {name}: {} ({:.1}s of {}s)",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        took.as_secs_f64(),
        limit.as_secs()
    );
    pass
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..1000 {
        let theta = rng.random_range(-10.0..=10.0);
        let theta0 = rng.random_range(-10.0..=10.0);
        let mu = rng.random_range(-1.0..=1.0);
        let sigma = rng.random_range(0.0..=2.0);
        let alpha = rng.random_range(0.5..=0.99);
        let closed = worst_case_cvar(theta, theta0, mu, sigma, alpha);
        match cvar_socp_oracle(theta, theta0, mu, sigma, alpha, 1e-10) {
            Ok(numeric) => {
                let rel = (closed - numeric).abs() / closed.abs().max(1.0);
                worst = worst.max(rel);
            }
            Err(_) => failures += 1,
        }
    }
    Outcome {
        pass: failures == 0 && worst <= 1e-6,
        detail: format!("max relative gap {worst:.2e} over 1000 draws, {failures} oracle failures"),
    }
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    // geometric in p below 1/2 and in 1 - p above it, 10^4 points in all
    let grid: Vec<f64> = {
        let half = 5_000;
        let (lo, hi) = (1e-4f64.ln(), 0.5f64.ln());
        let side: Vec<f64> = (0..half).map(|k| (lo + (hi - lo) * k as f64 / (half - 1) as f64).exp()).collect();
        side.iter().copied().chain(side.iter().rev().map(|p| 1.0 - p)).collect()
    };
    let mut exceed = 0;
    let mut min_reach: f64 = f64::INFINITY;
    for _ in 0..100 {
        let theta = rng.random_range(-10.0..=10.0);
        let theta0 = rng.random_range(-10.0..=10.0);
        let mu = rng.random_range(-1.0..=1.0);
        let sigma = rng.random_range(0.1..=2.0);
        let alpha = rng.random_range(0.5..=0.99);
        let bound = worst_case_cvar(theta, theta0, mu, sigma, alpha);
        let mean_loss = theta * mu + theta0;
        let mut best = f64::NEG_INFINITY;
        for &p in &grid {
            let v = two_point_cvar(theta, theta0, mu, sigma, alpha, p);
            if v > bound + 1e-9 * bound.abs().max(1.0) {
                exceed += 1;
            }
            best = best.max(v);
        }
        let reach = (best - mean_loss) / (bound - mean_loss);
        min_reach = min_reach.min(reach);
    }
    Outcome {
        pass: exceed == 0 && min_reach >= 0.999,
        detail: format!("{exceed} grid points above the bound, worst attainment {:.5} of the excess over the mean", min_reach),
    }
}

fn criterion_3() -> Outcome {
    let s = generate_scenario(30, 6, 3, &GenConfig::default()).unwrap();
    let report = solve(&s, &SolveParams::with_method(Method::Bwoa, 3)).unwrap();
    let samples = 10_000;
    let rob = monte_carlo_robustness(&report, &s, &ErrorDistribution::new(DistKind::Gaussian), samples, 11).unwrap();
    let served: Vec<_> = rob.tasks.iter().filter(|t| t.served).collect();
    let worst = served.iter().map(|t| t.success_rate).fold(1.0, f64::min);
    let bar = 0.95 - 3.0 * (0.0475 / samples as f64).sqrt();
    Outcome {
        pass: report.feasible && !served.is_empty() && served.iter().all(|t| t.success_rate >= bar),
        detail: format!(
            "{} served tasks, lowest success rate {worst:.4} vs bar {bar:.4}, clamp rate {}",
            served.len(),
            rob.clamp_rate
        ),
    }
}

fn criterion_4() -> Outcome {
    let src = InstanceSource::Generated {
        users: 8,
        uavs: 2,
        config: GenConfig::default(),
    };
    let seeds: Vec<u64> = (100..120).collect();
    let params = SolveParams {
        agents: 30,
        iters: 200,
        ..SolveParams::default()
    };
    let rows = compare_methods(&src, &Method::ALL, &seeds, &params).unwrap();
    let fit = |seed: u64, m: Method| rows.iter().find(|r| r.seed == seed && r.method == m).unwrap().fitness;
    let close = seeds
        .iter()
        .filter(|&&s| fit(s, Method::Bwoa) <= 1.05 * fit(s, Method::Exhaustive))
        .count();
    let med = |m: Method| Quartiles::of(&seeds.iter().map(|&s| fit(s, m)).collect::<Vec<_>>()).median;
    let (b, g, sa) = (med(Method::Bwoa), med(Method::Greedy), med(Method::Sa));
    let objective_medians = (
        median_objective(&rows, Method::Bwoa).unwrap(),
        median_objective(&rows, Method::Exhaustive).unwrap(),
    );
    Outcome {
        pass: close >= 18 && b <= g && b <= sa,
        detail: format!(
            "within 5% of exhaustive on {close}/20 seeds; median fitness bwoa {b:.3}, greedy {g:.3}, sa {sa:.3}; \
             median objective bwoa {:.3}, exhaustive {:.3}",
            objective_medians.0, objective_medians.1
        ),
    }
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let config = GenConfig {
        deadline: Range { min: 2.0, max: 25.0 },
        ..GenConfig::default()
    };
    let mut agree = 0;
    let mut infeasible = 0;
    for i in 0..50 {
        let m = rng.random_range(1..=4);
        let n = rng.random_range(1..=2.min(m));
        let mut s = generate_scenario(m, n, 500 + i, &config).unwrap();
        if rng.random::<f64>() < 0.2 {
            s.uavs[0].cpu_cap = 1.5e9;
        }
        let d = wkd_deploy(&s, &WkdConfig::default()).unwrap();
        let plan: Vec<bool> = (0..m).map(|_| rng.random()).collect();
        let r = verify_allocation_optimality(&d, &plan, &s, 8).unwrap();
        if r.consistent {
            agree += 1;
        }
        if !r.analytic_feasible {
            infeasible += 1;
        }
    }
    Outcome {
        pass: agree == 50 && infeasible > 0 && infeasible < 50,
        detail: format!("{agree}/50 instances agree ({infeasible} infeasible)"),
    }
}

fn criterion_6() -> Outcome {
    let mut monotone = 0;
    let mut converged = 0;
    let mut equal = 0;
    for seed in 0..100 {
        let s = generate_scenario(30, 6, 1000 + seed, &GenConfig::default()).unwrap();
        let cfg = WkdConfig {
            seed,
            ..WkdConfig::default()
        };
        let d = wkd_deploy(&s, &cfg).unwrap();
        if d.cost_trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)) {
            monotone += 1;
        }
        if d.iterations < cfg.max_iters {
            converged += 1;
        }
        let uniform = deploy_with_weights(&s, &vec![1.0; 30], &cfg).unwrap();
        let plain = common::kmeans(&s, &cfg);
        if uniform.positions == plain.0 && uniform.connection == plain.1 {
            equal += 1;
        }
    }
    Outcome {
        pass: monotone == 100 && converged == 100 && equal == 100,
        detail: format!("monotone {monotone}/100, converged early {converged}/100, uniform = K-means {equal}/100"),
    }
}

fn criterion_7() -> Outcome {
    let src = InstanceSource::Generated {
        users: 30,
        uavs: 6,
        config: GenConfig::default(),
    };
    let params = SolveParams {
        seed: 700,
        ..SolveParams::default()
    };
    let seeds: Vec<u64> = (700..720).collect();
    let gap = robust_vs_ideal(&src, &seeds, &params).unwrap();
    let robust = Quartiles::of(&gap.iter().map(|r| r.robust_objective).collect::<Vec<_>>()).median;
    let ideal = Quartiles::of(&gap.iter().map(|r| r.ideal_objective).collect::<Vec<_>>()).median;

    let tmax = sweep(&src, SweepParam::Tmax, &[10.0, 15.0, 20.0, 25.0, 30.0], 20, &params).unwrap();
    let tmax_ok = tmax.rows.windows(2).all(|w| w[1].objective_median <= w[0].objective_median);
    let pu = sweep(&src, SweepParam::Pu, &[0.1, 0.4, 0.7, 1.0], 20, &params).unwrap();
    let pu_ok = pu.rows.windows(2).all(|w| w[1].frequency_median <= w[0].frequency_median);
    let n = sweep(&src, SweepParam::N, &[2.0, 4.0, 6.0, 8.0], 20, &params).unwrap();
    let n_ok = n.rows.windows(2).all(|w| w[1].served_median >= w[0].served_median);

    let fmt = |v: Vec<f64>| v.iter().map(|x| format!("{x:.4e}")).collect::<Vec<_>>().join(" ");
    Outcome {
        pass: robust >= ideal && tmax_ok && pu_ok && n_ok,
        detail: format!(
            "robust {robust:.2} J >= ideal {ideal:.2} J: {}; tmax objective [{}]; p_u frequency [{}]; N served [{}]",
            robust >= ideal,
            fmt(tmax.rows.iter().map(|r| r.objective_median).collect()),
            fmt(pu.rows.iter().map(|r| r.frequency_median).collect()),
            fmt(n.rows.iter().map(|r| r.served_median).collect()),
        ),
    }
}

fn run_cli(dir: &Path, args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_aeromec"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn criterion_8() -> Outcome {
    let commands: Vec<Vec<&str>> = vec![
        vec!["generate", "--users", "12", "--uavs", "3", "--seed", "4", "--out", "scenario.json"],
        vec!["validate", "--scenario", "scenario.json"],
        vec!["deploy", "--scenario", "scenario.json", "--seed", "2"],
        vec!["solve", "--scenario", "scenario.json", "--seed", "2", "--out", "solution.json"],
        vec!["solve", "--scenario", "scenario.json", "--method", "sa", "--seed", "5"],
        vec!["evaluate", "--scenario", "scenario.json", "--solution", "solution.json", "--samples", "2000", "--dist", "two-point", "--seed", "3"],
        vec!["evaluate", "--scenario", "scenario.json", "--solution", "solution.json", "--samples", "2000", "--format", "csv"],
        vec!["sweep", "--param", "tmax", "--from", "15", "--to", "25", "--step", "5", "--repeats", "3", "--users", "8", "--uavs", "2", "--iters", "30"],
        vec!["sweep", "--param", "N", "--from", "1", "--to", "3", "--step", "1", "--repeats", "2", "--users", "8", "--format", "json", "--iters", "30"],
        vec!["compare", "--users", "6", "--uavs", "2", "--repeats", "2", "--iters", "30", "--format", "json"],
        vec!["report", "--scenario", "scenario.json", "--solution", "solution.json"],
        vec!["report", "--scenario", "scenario.json", "--solution", "solution.json", "--format", "csv"],
    ];
    let run_all = || -> Vec<(i32, String)> {
        let dir = tempfile::tempdir().unwrap();
        commands
            .iter()
            .map(|c| {
                let (code, out) = run_cli(dir.path(), c);
                let mut text = String::from_utf8(out).unwrap();
                if c[0] == "solve" || c[0] == "compare" {
                    text = common::strip_wall_time(&text);
                }
                if c.contains(&"--out") {
                    let file = c[c.iter().position(|a| *a == "--out").unwrap() + 1];
                    text = common::strip_wall_time(&std::fs::read_to_string(dir.path().join(file)).unwrap());
                }
                (code, text)
            })
            .collect()
    };
    let a = run_all();
    let b = run_all();
    let same = a.iter().zip(&b).filter(|(x, y)| x == y).count();
    let ok_codes = a.iter().all(|(c, _)| *c == 0 || *c == 1);
    Outcome {
        pass: same == commands.len() && ok_codes,
        detail: format!("{same}/{} commands byte-identical across runs", commands.len()),
    }
}

fn main() {
    let results = [
        check(1, "closed-form CVaR vs conic oracle", Duration::from_secs(30), criterion_1),
        check(2, "two-point tightness", Duration::from_secs(60), criterion_2),
        check(3, "Monte Carlo chance-constraint certification", Duration::from_secs(120), criterion_3),
        check(4, "optimality gap vs exhaustive", Duration::from_secs(300), criterion_4),
        check(5, "allocation vs grid oracle", Duration::from_secs(60), criterion_5),
        check(6, "WKD monotone convergence", Duration::from_secs(30), criterion_6),
        check(7, "trend reproduction", Duration::from_secs(900), criterion_7),
        check(8, "CLI determinism", Duration::from_secs(300), criterion_8),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}

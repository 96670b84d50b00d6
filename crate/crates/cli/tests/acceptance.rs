//! End-to-end acceptance suite. Runs every criterion, prints one PASS/FAIL
//! line each, and exits non-zero if any failed.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sonclust_core::certificate::{refine_multipliers_with, CertificateConfig};
use sonclust_core::mixture::default_epsilon;
use sonclust_core::{
    check_agglomeration, check_sufficient, chi2_cdf, compute_path, core_sets,
    least_squares_multipliers, sample_mixture, solve, Dataset, GridSpacing, LambdaGrid,
    LambdaPolicy, MixtureModel, Points, RecoveryExperiment, SolverConfig,
};

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

/// Worst centroid drift seen over every converged solve in the suite.
#[derive(Default)]
struct CentroidLog {
    worst: f64,
    solves: usize,
}

impl CentroidLog {
    fn record(&mut self, a: &Points, x: &Points) {
        let (sa, sx) = (a.column_sums(), x.column_sums());
        let scale = 1.0 + sa.iter().map(|v| v * v).sum::<f64>().sqrt();
        let drift = max_abs_diff(&sa, &sx) / scale;
        self.worst = self.worst.max(drift);
        self.solves += 1;
    }
}

fn two_point(log: &mut CentroidLog) -> Outcome {
    let start = Instant::now();
    let mut rng = rng(1001);
    let mut worst = 0.0_f64;
    for k in 0..200 {
        let d = 1 + k % 3;
        let rows = gaussian_rows(&mut rng, 2, d, 3.0);
        let lambda = rng.random_range(0.0..1.5) * dist(&rows[0], &rows[1]);
        let ds = Dataset::from_rows(&rows).unwrap();
        let sol = solve(&ds, &SolverConfig::with_lambda(lambda), None).unwrap();
        let (x1, x2) = two_point_closed_form(&rows[0], &rows[1], lambda);
        worst = worst
            .max(max_abs_diff(sol.x_star.row(0), &x1))
            .max(max_abs_diff(sol.x_star.row(1), &x2));
        if sol.converged {
            log.record(ds.points(), &sol.x_star);
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-6 && elapsed < Duration::from_secs(5),
        format!("max error {worst:.2e}, {:.2}s", elapsed.as_secs_f64()),
    )
}

fn brute_force(log: &mut CentroidLog) -> Outcome {
    let start = Instant::now();
    let mut rng = rng(1002);
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let a = [
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
        ];
        let lambda = rng.random_range(0.01..2.5);
        let ds = Dataset::from_scalars(&a).unwrap();
        let sol = solve(&ds, &SolverConfig::with_lambda(lambda), None).unwrap();
        let (_, oracle) = grid_descent_oracle_3(a, lambda);
        worst = worst.max((sol.objective_value - oracle).abs());
        if sol.converged {
            log.record(ds.points(), &sol.x_star);
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-6 && elapsed < Duration::from_secs(30),
        format!(
            "max objective gap {worst:.2e}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

/// Nearest neighbours of a random anchor with a lambda near the point where
/// the least-squares certificate turns feasible.
fn random_candidate(rng: &mut ChaCha8Rng, ds: &Dataset) -> (Vec<usize>, f64) {
    let n = ds.len();
    let anchor = rng.random_range(0..n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        dist(ds.point(i), ds.point(anchor)).total_cmp(&dist(ds.point(j), ds.point(anchor)))
    });
    let k = rng.random_range(2..=(n / 2).max(2));
    let mut cluster = order[..k].to_vec();
    cluster.shuffle(rng);
    let mut spread = 0.0_f64;
    for &i in &cluster {
        for &j in &cluster {
            spread = spread.max(dist(ds.point(i), ds.point(j)));
        }
    }
    (
        cluster,
        (spread / k as f64 * 2f64.powf(rng.random_range(-1.5..1.0))).max(1e-6),
    )
}

fn sufficiency(log: &mut CentroidLog) -> Outcome {
    let mut rng = rng(1004);
    let (mut feasible, mut violations) = (0, 0);
    for _ in 0..100 {
        let n = rng.random_range(4..=30);
        let d = rng.random_range(1..=3);
        let ds = blob_dataset(&mut rng, n, d);
        let (cluster, lambda) = random_candidate(&mut rng, &ds);
        if check_sufficient(&ds, &cluster, lambda)
            .unwrap()
            .status
            .is_feasible()
        {
            feasible += 1;
            let sol = solve(&ds, &SolverConfig::with_lambda(lambda), None).unwrap();
            violations += usize::from(!sol.partition.co_clustered(&cluster));
            if sol.converged {
                log.record(ds.points(), &sol.x_star);
            }
        }
    }
    outcome(
        violations == 0,
        format!("{feasible}/100 feasible, {violations} violations"),
    )
}

fn necessity(log: &mut CentroidLog) -> Outcome {
    let mut rng = rng(1005);
    let config = CertificateConfig {
        tol: 1e-4,
        max_iterations: 10_000,
    };
    let (mut total, mut ok) = (0, 0);
    for _ in 0..50 {
        let n = rng.random_range(6..=25);
        let d = rng.random_range(1..=3);
        let ds = blob_dataset(&mut rng, n, d);
        let lambda = ds.diameter() / n as f64 * rng.random_range(0.05..0.8);
        let sol = solve(
            &ds,
            &SolverConfig::with_lambda(lambda).tolerance(1e-10),
            None,
        )
        .unwrap();
        if sol.converged {
            log.record(ds.points(), &sol.x_star);
        }
        for members in sol.partition.clusters().into_iter().filter(|c| c.len() > 1) {
            total += 1;
            let res = refine_multipliers_with(&ds, &members, lambda, &config).unwrap();
            ok += usize::from(res.multipliers.max_norm <= 1.0 + 1e-4);
        }
    }
    outcome(
        total > 0 && ok * 100 >= total * 99,
        format!("{ok}/{total} clusters certified"),
    )
}

fn hand_case(log: &mut CentroidLog) -> Outcome {
    let ds = Dataset::from_scalars(&[0.0, 2.0, 4.0]).unwrap();
    let ls = least_squares_multipliers(&ds, &[0, 1, 2], 1.0).unwrap();
    let cert = check_sufficient(&ds, &[0, 1, 2], 1.0).unwrap();
    let sol = solve(&ds, &SolverConfig::with_lambda(1.0), None).unwrap();
    log.record(ds.points(), &sol.x_star);
    let x_err = max_abs_diff(sol.x_star.as_slice(), &[2.0, 2.0, 2.0]);
    let pass = cert.status.is_feasible()
        && sol.partition.num_clusters() == 1
        && (ls.max_norm - 4.0 / 3.0).abs() < 1e-12
        && x_err <= 1e-6;
    outcome(
        pass,
        format!(
            "{:?}, {} cluster(s), LS max_norm {:.6}, x error {x_err:.2e}",
            cert.status,
            sol.partition.num_clusters(),
            ls.max_norm
        ),
    )
}

fn agglomeration(log: &mut CentroidLog) -> Outcome {
    let start = Instant::now();
    let mut rng = rng(1007);
    let (mut violations, mut not_single) = (0, 0);
    for _ in 0..30 {
        let ds = gaussian_dataset(&mut rng, 50, 2);
        let top = ds.diameter() / ds.len() as f64;
        let grid = LambdaGrid {
            start: 1e-3 * top,
            stop: top,
            count: 30,
            spacing: GridSpacing::Geometric,
        };
        let path = compute_path(&ds, &grid.values().unwrap(), &SolverConfig::default()).unwrap();
        violations += check_agglomeration(&path).len();
        not_single += usize::from(*path.cluster_counts().last().unwrap() != 1);
        for point in path.solutions_meta.iter().filter(|p| p.converged) {
            log.record(ds.points(), &point.x_star);
        }
    }
    let elapsed = start.elapsed();
    outcome(
        violations == 0 && not_single == 0 && elapsed < Duration::from_secs(300),
        format!(
            "{violations} violations, {not_single} paths not fused at the top, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn chi2_accuracy() -> Outcome {
    let mut worst = 0.0_f64;
    for k in 0..=5000 {
        let theta = k as f64 * 1e-3;
        worst = worst.max((chi2_cdf(theta, 2) - (1.0 - (-theta * theta / 2.0).exp())).abs());
    }
    let mut monotone = true;
    for d in 1..=10 {
        let mut prev = 0.0;
        for k in 0..=2000 {
            let v = chi2_cdf(k as f64 * 5e-3, d);
            monotone &= v >= prev;
            prev = v;
        }
    }
    outcome(
        worst <= 1e-12 && monotone,
        format!("max error {worst:.2e}, monotone {monotone}"),
    )
}

fn core_concentration() -> Outcome {
    let model = MixtureModel::new(
        vec![vec![0.0, 0.0], vec![10.0, 0.0]],
        vec![1.0, 1.5],
        vec![0.4, 0.6],
    )
    .unwrap();
    let (theta, n, trials) = (2.0, 1000, 50_u64);
    let sizes: Vec<Vec<f64>> = (0..trials)
        .map(|t| {
            let (pts, _) = sample_mixture(&model, n, 9000 + t);
            core_sets(&model, &pts, theta)
                .iter()
                .map(|v| v.len() as f64)
                .collect()
        })
        .collect();
    let mut pass = true;
    let mut detail = Vec::new();
    for m in 0..model.components() {
        let xs: Vec<f64> = sizes.iter().map(|s| s[m]).collect();
        let mean = xs.iter().sum::<f64>() / trials as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        let se = (var / trials as f64).sqrt();
        // 2-D closed form of the coverage probability
        let expected = (1.0 - (-theta * theta / 2.0).exp()) * model.weights[m] * n as f64;
        let z = (mean - expected) / se;
        pass &= z.abs() <= 4.0;
        detail.push(format!(
            "m={m}: mean {mean:.1} vs {expected:.1} ({z:+.2} SE)"
        ));
    }
    outcome(pass, detail.join("; "))
}

fn recovery() -> Outcome {
    let start = Instant::now();
    let model = MixtureModel::uniform(vec![vec![0.0, 0.0], vec![65.0, 0.0]], 1.0).unwrap();
    let experiment = RecoveryExperiment {
        epsilon: default_epsilon(&model),
        model,
        n: 200,
        theta: 4.0,
        policy: LambdaPolicy::MidpointOfBounds,
        trials: 20,
        seed: 2718,
        solver: SolverConfig::default(),
    };
    let reports = experiment.run().unwrap();
    let recovered = reports.iter().filter(|r| r.recovered()).count();
    let elapsed = start.elapsed();
    outcome(
        recovered >= 18 && elapsed < Duration::from_secs(600),
        format!(
            "{recovered}/20 recovered at lambda {:.6}, {:.1}s",
            reports[0].lambda_used.unwrap_or(f64::NAN),
            elapsed.as_secs_f64()
        ),
    )
}

fn bounds_cli() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    std::fs::write(
        &model,
        r#"{"means": [[0, 0], [10, 0]], "sigmas": [1, 1], "weights": [0.5, 0.5]}"#,
    )
    .unwrap();
    let run = |n: &str, extra: &[&str]| -> serde_json::Value {
        let out = Command::new(env!("CARGO_BIN_EXE_sonclust"))
            .args([
                "bounds",
                "--model",
                model.to_str().unwrap(),
                "--n",
                n,
                "--theta",
                "2",
            ])
            .args(extra)
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        serde_json::from_slice(&out.stdout).unwrap()
    };
    // d = 2: coverage has a closed form
    let f = 1.0 - (-2.0_f64).exp();
    let expected_lower = 2.0 * 2.0 * 1.0 / ((f * 0.5 - 0.1) * 100.0);
    let lower = run("100", &["--epsilon", "0.1"])["bounds"]["lambda_lower"][0]
        .as_f64()
        .unwrap();
    let upper = run("101", &[])["bounds"]["lambda_upper"].as_f64().unwrap();
    let pass = (lower - expected_lower).abs() <= 1e-6
        && (lower - 0.1203620).abs() <= 1e-6
        && (upper - 0.05).abs() <= 1e-6;
    outcome(
        pass,
        format!("lower {lower:.7} (oracle {expected_lower:.7}), upper {upper:.7}"),
    )
}

fn main() -> ExitCode {
    let mut log = CentroidLog::default();
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut report = |name, o: Outcome| {
        println!(
            "{} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((name, o));
    };
    report("1 two-point closed form", two_point(&mut log));
    report("2 three-point brute force", brute_force(&mut log));
    let c4 = sufficiency(&mut log);
    let c5 = necessity(&mut log);
    let c6 = hand_case(&mut log);
    let c7 = agglomeration(&mut log);
    report(
        "3 centroid conservation",
        outcome(
            log.worst <= 1e-8,
            format!(
                "worst relative drift {:.2e} over {} solves",
                log.worst, log.solves
            ),
        ),
    );
    report("4 certificate sufficiency", c4);
    report("5 certificate necessity", c5);
    report("6 three-point refinement case", c6);
    report("7 agglomerative path", c7);
    report("8 chi-squared accuracy", chi2_accuracy());
    report("9 core-set concentration", core_concentration());
    report("10 mixture recovery", recovery());
    report("11 bounds command", bounds_cli());

    let failed = results.iter().filter(|(_, o)| !o.pass).count();
    println!(
        "acceptance: {}/{} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

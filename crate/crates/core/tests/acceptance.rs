//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::{Command, ExitCode};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use precshrink::asymptotics::{psi_limit, solve_x0, x0_prime, y_rank_one};
use precshrink::estimators::{bona_fide_olse, oracle_olse, rho_hat, theta_hat, EstimatorId, TargetMatrix};
use precshrink::linalg::{pseudo_inverse, sample_covariance, DataMatrix, SampleStats};
use precshrink::metrics::{frobenius_loss, PrialReport};
use precshrink::simulation::{
    builtin_experiment, generate_data, replication_rng, run_experiment, run_replications, DistributionSpec,
    ExperimentConfig, TargetSpec,
};
use precshrink::spectral::{build_covariance, three_block_spectrum, CovarianceModel, SpectrumSpec};

type Outcome = (bool, String);

fn threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn identity(p: usize) -> CovarianceModel {
    build_covariance(&SpectrumSpec::point_mass(1.0).unwrap(), p, None).unwrap()
}

fn three_block(p: usize) -> CovarianceModel {
    build_covariance(&three_block_spectrum(), p, None).unwrap()
}

fn draw(truth: &CovarianceModel, n: usize, seed: u64, r: usize) -> SampleStats {
    let data = generate_data(truth, n, &DistributionSpec::Gaussian, &mut replication_rng(seed, truth.dim(), r)).unwrap();
    sample_covariance(&data).unwrap()
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn rel(measured: f64, expected: f64) -> f64 {
    (measured / expected - 1.0).abs()
}

fn inverse_norm_limit() -> Outcome {
    let truth = identity(200);
    let psi = psi_limit(&SpectrumSpec::point_mass(1.0).unwrap(), 0.5).unwrap();
    let avg = mean((0..200).map(|r| draw(&truth, 400, 101, r).inverse_frobenius_sq() / 200.0));
    let err = rel(avg, psi);
    (err <= 0.05, format!("mean ‖S⁻¹‖²/p = {avg:.4}, limit {psi}, rel err {:.2}% (tol 5%)", 100.0 * err))
}

fn wishart_mean() -> Outcome {
    let (p, n, reps) = (10, 100, 2000);
    let truth = identity(p);
    let mut sum = DMatrix::<f64>::zeros(p, p);
    for r in 0..reps {
        sum += draw(&truth, n, 102, r).inverse();
    }
    let avg = sum / reps as f64;
    let expected = n as f64 / (n - p - 2) as f64;
    let dev = (avg - DMatrix::<f64>::identity(p, p) * expected).abs().max();
    let tol = 0.03 * expected;
    (
        dev <= tol,
        format!("max |mean S⁻¹ − {expected:.4}·I| = {dev:.4} (tol {tol:.4}); uncentered Wishart mean is {:.4}", n as f64 / (n - p - 1) as f64),
    )
}

fn consistent_functionals() -> Outcome {
    let p = 200;
    let truth = three_block(p);
    let theta = DMatrix::<f64>::identity(p, p) / p as f64;
    let theta_true = truth.precision().dot(&theta);
    let rho_true = truth.precision_frobenius_sq() / p as f64;
    let draws: Vec<SampleStats> = (0..200).map(|r| draw(&truth, 400, 103, r)).collect();
    let theta_avg = mean(draws.iter().map(|s| theta_hat(s, &theta).unwrap()));
    let rho_avg = mean(draws.iter().map(|s| rho_hat(s).unwrap()));
    let (et, er) = (rel(theta_avg, theta_true), rel(rho_avg, rho_true));
    (
        et < 0.05 && er < 0.05,
        format!(
            "θ̂ {theta_avg:.5} vs {theta_true:.5} ({:.2}%), ρ̂ {rho_avg:.5} vs {rho_true:.5} ({:.2}%) (tol 5%)",
            100.0 * et,
            100.0 * er
        ),
    )
}

fn solver_grid() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for &sigma in &[0.5, 1.0, 2.0] {
        let truth = build_covariance(&SpectrumSpec::point_mass(sigma).unwrap(), 50, None).unwrap();
        for &c in &[1.1, 1.5, 2.0, 5.0] {
            let x0 = solve_x0(&truth, c).unwrap().value;
            worst = worst.max((x0 - 1.0 / (sigma * (c - 1.0))).abs());
            let xp = x0_prime(&truth, c, x0).unwrap() / c;
            worst = worst.max((xp - 1.0 / (sigma * sigma * (c - 1.0).powi(3))).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (worst <= 1e-10 && secs < 1.0, format!("max abs error {worst:.2e} (tol 1e-10), {secs:.4} s (limit 1 s)"))
}

fn pseudo_inverse_limits() -> Outcome {
    let truth = identity(200);
    let mut frob = Vec::new();
    let mut trace = Vec::new();
    for r in 0..200 {
        let pinv = pseudo_inverse(&draw(&truth, 100, 105, r)).matrix;
        frob.push(pinv.norm_squared() / 200.0);
        trace.push(pinv.trace() / 200.0);
    }
    let (f, t) = (mean(frob.into_iter()), mean(trace.into_iter()));
    let (ef, et) = (rel(f, 1.0), rel(t, 0.5));
    (
        ef <= 0.07 && et <= 0.05,
        format!("‖S⁺‖²/p = {f:.4} ({:.2}%, tol 7%), tr S⁺/p = {t:.4} ({:.2}%, tol 5%)", 100.0 * ef, 100.0 * et),
    )
}

fn rank_one_limit() -> Outcome {
    let (p, c) = (200, 1.5);
    let n = (p as f64 / c).round() as usize;
    let truth = three_block(p);
    let e1 = DVector::from_fn(p, |i, _| if i == 0 { 1.0 } else { 0.0 });
    let limit = y_rank_one(&truth, &e1, &e1, c).unwrap() / c;
    let avg = mean((0..200).map(|r| pseudo_inverse(&draw(&truth, n, 106, r)).matrix[(0, 0)]));
    let err = rel(avg, limit);
    (err <= 0.10, format!("mean e₁′S⁺e₁ = {avg:.4} vs {limit:.4}, rel err {:.1}% (tol 10%)", 100.0 * err))
}

fn random_instance(rng: &mut ChaCha8Rng, p: usize) -> (CovarianceModel, TargetMatrix) {
    let eig = DVector::from_fn(p, |_, _| rng.random_range(0.2..5.0));
    let basis = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0)).qr().q();
    let truth = CovarianceModel::from_eigen(eig, Some(basis)).unwrap();
    let a = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
    let spd = &a * a.transpose() + DMatrix::identity(p, p) * 0.5;
    (truth, TargetMatrix::new((&spd + spd.transpose()) * 0.5).unwrap())
}

fn oracle_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let mut violations = 0;
    let mut inexact = 0;
    for k in 0..50 {
        let p = 3 + k % 4;
        let pseudo = k % 2 == 1;
        let (truth, target) = random_instance(&mut rng, p);
        let n = if pseudo { p - 1 } else { 4 * p };
        let x = DMatrix::from_fn(p, n, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let stats = sample_covariance(&DataMatrix::new(truth.apply_sqrt(&x)).unwrap()).unwrap();
        let est = oracle_olse(&stats, &truth, &target).unwrap();
        let w = est.weights.unwrap();
        let best = frobenius_loss(&est.matrix, truth.precision()).unwrap();
        for i in 0..50 {
            for j in 0..50 {
                let a = w.alpha + w.alpha.abs() * (i as f64 / 49.0 - 0.5) + 1e-6 * (i as f64 / 49.0 - 0.5);
                let b = w.beta + w.beta.abs() * (j as f64 / 49.0 - 0.5) + 1e-6 * (j as f64 / 49.0 - 0.5);
                let m = stats.inverse() * a + target.matrix() * b;
                if best > frobenius_loss(&m, truth.precision()).unwrap() * (1.0 + 1e-12) + 1e-12 {
                    violations += 1;
                }
            }
        }
        let exact = oracle_olse(&stats, &truth, &TargetMatrix::true_precision(&truth)).unwrap().weights.unwrap();
        if (exact.alpha, exact.beta) != (0.0, 1.0) {
            inexact += 1;
        }
    }
    (
        violations == 0 && inexact == 0,
        format!("50 instances × 2500 grid points: {violations} grid points beat the oracle, {inexact} true-target weights ≠ (0, 1)"),
    )
}

fn bona_fide_invariants() -> Outcome {
    let mut config = builtin_experiment("fig1").unwrap();
    config.replications = 100;
    config.targets = vec![TargetSpec::IdentityOverP];
    config.estimators = vec![EstimatorId::SampleInv, EstimatorId::OlsePrecision];
    let k = config.work_items().iter().position(|w| w.estimator == EstimatorId::OlsePrecision).unwrap();
    let mut checked = 0;
    let mut bad = Vec::new();
    for &p in &config.p_grid {
        let upper = 1.0 - p as f64 / config.sample_size(p) as f64;
        for rep in run_replications(&config, p, threads()).unwrap() {
            match rep.outcomes[k].as_ref().unwrap() {
                Ok(o) => {
                    let (a, b) = o.weights.unwrap();
                    checked += 1;
                    if !(a > 0.0 && a < upper && b > 0.0) {
                        bad.push(format!("p={p} r={}: α̂={a:.4} β̂={b:.4}", rep.index));
                    }
                }
                Err(e) => bad.push(format!("p={p} r={}: {e}", rep.index)),
            }
        }
    }

    let truth = three_block(60);
    let target = TargetMatrix::identity_over_p(60);
    let mut worst: f64 = 0.0;
    for r in 0..20 {
        let stats = draw(&truth, 180, 108, r);
        let base = bona_fide_olse(&stats, &target, false).unwrap().matrix;
        for scale in [0.1, 7.0] {
            let m = bona_fide_olse(&stats, &target.scaled(scale).unwrap(), false).unwrap().matrix;
            worst = worst.max((&m - &base).abs().max() / base.abs().max());
        }
    }
    let shown: Vec<&str> = bad.iter().take(3).map(String::as_str).collect();
    (
        bad.is_empty() && worst <= 1e-12,
        format!(
            "{checked} replications over p = 5..200, {} outside α̂ ∈ (0, 1−p/n), β̂ > 0 {shown:?}; scale invariance max rel diff {worst:.1e} (tol 1e-12)",
            bad.len()
        ),
    )
}

fn prial_of(report: &PrialReport, est: EstimatorId, target: Option<&str>) -> f64 {
    report.entry(est, target).map(|e| e.prial_percent).unwrap_or(f64::NAN)
}

fn fig1_ordering() -> Outcome {
    let start = Instant::now();
    let mut config = builtin_experiment("fig1").unwrap();
    config.p_grid = vec![60, 120, 180];
    config.replications = 200;
    let reports = run_experiment(&config, threads()).unwrap();
    let mut ok = true;
    let mut lines = Vec::new();
    for r in &reports {
        let prior = prial_of(r, EstimatorId::OlsePrecision, Some("inverse_of:prior2"));
        let ev = prial_of(r, EstimatorId::EvOracle, None);
        let ident = prial_of(r, EstimatorId::OlsePrecision, Some("identity_over_p"));
        let cov = prial_of(r, EstimatorId::OlseCovInv, Some("identity_over_p"));
        let positive = r
            .entries
            .iter()
            .filter(|e| e.estimator != EstimatorId::SampleInv)
            .all(|e| e.prial_percent > 0.0);
        ok &= prior > ev && ident > cov && positive;
        lines.push(format!(
            "p={}: OLSE(prior2) {prior:.1} > EV {ev:.1}, OLSE(I/p) {ident:.1} > covOLSE(I/p) {cov:.1}, all > 0: {positive}",
            r.p
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 600.0;
    (ok, format!("{}; {secs:.0} s (limit 600 s)", lines.join("; ")))
}

fn fig5_convergence() -> Outcome {
    let mut config = builtin_experiment("fig5").unwrap();
    config.p_grid = vec![100, 200];
    config.replications = 100;
    let reports = run_experiment(&config, threads()).unwrap();
    let mut ok = true;
    let mut lines = Vec::new();
    for r in &reports {
        let oracle = prial_of(r, EstimatorId::OlsePrecisionOracle, Some("identity_over_p"));
        let ev = prial_of(r, EstimatorId::EvOracle, None);
        let band = (75.0..=95.0).contains(&oracle) && (75.0..=95.0).contains(&ev);
        ok &= (oracle - ev).abs() < 5.0 && band;
        lines.push(format!("p={}: oracle {oracle:.1}, EV {ev:.1}, gap {:.1} (tol 5, band [75, 95])", r.p, (oracle - ev).abs()));
    }
    (ok, lines.join("; "))
}

fn student_t_robustness() -> Outcome {
    let mut config: ExperimentConfig = builtin_experiment("fig4").unwrap();
    config.p_grid = vec![60, 150];
    config.replications = 200;
    config.targets = vec![TargetSpec::IdentityOverP];
    config.estimators = vec![EstimatorId::SampleInv, EstimatorId::OlsePrecision, EstimatorId::OlsePrecisionOracle];
    let reports = run_experiment(&config, threads()).unwrap();
    let label = Some("identity_over_p");
    let gaps: Vec<(f64, f64)> = reports
        .iter()
        .map(|r| {
            let bona = prial_of(r, EstimatorId::OlsePrecision, label);
            (bona, prial_of(r, EstimatorId::OlsePrecisionOracle, label) - bona)
        })
        .collect();
    let ok = gaps.iter().all(|&(b, g)| b > 0.0 && g > 0.0) && gaps[1].1 < gaps[0].1;
    (
        ok,
        format!(
            "bona fide PRIAL {:.2} / {:.2}, gap to oracle {:.2} at p=60 → {:.2} at p=150",
            gaps[0].0, gaps[1].0, gaps[0].1, gaps[1].1
        ),
    )
}

fn simulate_bytes(args: &[&str], threads: &str) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_precshrink"))
        .args(args)
        .args(["--threads", threads])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn determinism() -> Outcome {
    let runs: [&[&str]; 2] = [
        &["simulate", "fig1", "--reps", "20", "--p-grid", "20,45", "--seed", "7"],
        &["simulate", "fig5", "--reps", "20", "--p-grid", "30,60", "--seed", "7"],
    ];
    let mut ok = true;
    for args in runs {
        let reference = simulate_bytes(args, "1");
        ok &= !reference.is_empty();
        for t in ["1", "8", "8"] {
            ok &= simulate_bytes(args, t) == reference;
        }
    }
    (ok, "fig1 and fig5 CSV repeated at 1 and 8 threads are byte-identical".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("inverse norm limit", inverse_norm_limit),
        ("Wishart mean of the sample inverse", wishart_mean),
        ("consistent trace functionals", consistent_functionals),
        ("resolvent solver closed forms", solver_grid),
        ("pseudo-inverse limits", pseudo_inverse_limits),
        ("rank-one pseudo-inverse limit", rank_one_limit),
        ("oracle optimality", oracle_optimality),
        ("bona fide invariants", bona_fide_invariants),
        ("c = 1/3 PRIAL ordering", fig1_ordering),
        ("c = 1.5 oracle convergence", fig5_convergence),
        ("Student-t robustness", student_t_robustness),
        ("thread-count determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = check();
        let verdict = if ok { "PASS" } else { "FAIL" };
        println!("AC{} {verdict}: {name}: {detail} [{:.1} s]", i + 1, start.elapsed().as_secs_f64());
        failed += usize::from(!ok);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

//! Acceptance gate: one test per release criterion, each printing a single
//! PASS/FAIL line. The replication studies are shared across criteria and
//! run once per process.
//!
//! Criteria:
//!   1. mean event counts for the three study models
//!   2. replication of the Model 3 estimate means at n = 1600
//!   3. empirical-SE halving when n quadruples
//!   4. normality of the replicate estimates (KS)
//!   5. plug-in standard errors against empirical SDs
//!   6. ergodic limit of the intensity time average
//!   7. fast analytic cross-checks (derivatives, identities, residuals)
//!   8. bit-identical outputs across worker thread counts

use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;

use hawkes_nsk::baseline::BaselineSpec;
use hawkes_nsk::ergodic::{ergodicity_report, ErgodicOptions, FunctionalSpec, McOptions};
use hawkes_nsk::estimator::{fit_mle, FitOptions};
use hawkes_nsk::kernel::Kernel;
use hawkes_nsk::likelihood::LikelihoodWorkspace;
use hawkes_nsk::model::ModelSpec;
use hawkes_nsk::simulate::{simulate_hawkes_opts, SimOptions};
use hawkes_nsk::special::adaptive_quadrature;
use hawkes_nsk::stats::kolmogorov_p;
use hawkes_nsk::study::{run_study, ModelConfig, StudyConfig, StudyReport};
use hawkes_nsk::{derive_stream, rescaled_residuals};
use rand::RngCore;
use rayon::prelude::*;

const BASELINE: &str = "bspline(degree=2,knots=[],coef=[5,1.25,2.5])";
const MODEL1_KERNEL: &str = "gpd(0.5, 0.25, 0.75)";
const MODEL2_KERNEL: &str = "gamma(0.5, 2, 0.5)";
const MODEL3_KERNEL: &str = "weibull(0.5, 2, 1.12838)";

fn model(kernel: &str) -> ModelSpec {
    ModelSpec::new(
        BASELINE.parse::<BaselineSpec>().unwrap(),
        kernel.parse::<Kernel>().unwrap(),
    )
    .unwrap()
}

fn study_config(kernel: &str, n_list: Vec<f64>, replicates: usize) -> StudyConfig {
    StudyConfig {
        model: ModelConfig {
            baseline: BASELINE.into(),
            kernel: kernel.into(),
        },
        n_list,
        replicates,
        master_seed: 2024,
        starts: 3,
        kernel_horizon_eps: 1e-12,
        grad_tol: 1e-7,
        max_iter: 300,
        exclude_boundary: true,
        output_dir: None,
    }
}

fn model3_study() -> &'static StudyReport {
    static STUDY: OnceLock<StudyReport> = OnceLock::new();
    STUDY.get_or_init(|| {
        run_study(&study_config(MODEL3_KERNEL, vec![100.0, 400.0, 1600.0], 200)).unwrap()
    })
}

fn model2_study() -> &'static StudyReport {
    // 400 replicates: the Gamma shape estimate is strongly right-skewed at
    // n = 400, so its empirical SD needs the extra replicates to stabilise
    static STUDY: OnceLock<StudyReport> = OnceLock::new();
    STUDY.get_or_init(|| run_study(&study_config(MODEL2_KERNEL, vec![400.0], 400)).unwrap())
}

fn verdict(criterion: &str, ok: bool) {
    println!("criterion {criterion}: {}", if ok { "PASS" } else { "FAIL" });
}

fn mean_count(kernel: &str, n: f64, paths: usize, tag: u64) -> f64 {
    let spec = model(kernel);
    let opts = SimOptions {
        kernel_horizon_eps: 1e-12,
    };
    let total: usize = (0..paths)
        .into_par_iter()
        .map(|i| {
            let seed = derive_stream(4242, &[tag, i as u64]).next_u64();
            simulate_hawkes_opts(&spec, n, seed, &opts).unwrap().count()
        })
        .sum();
    total as f64 / paths as f64
}

#[test]
fn criterion_1_mean_event_counts() {
    let cases = [
        (MODEL1_KERNEL, 100.0, 581.0, 1u64),
        (MODEL2_KERNEL, 400.0, 2331.0, 2),
        (MODEL3_KERNEL, 1600.0, 9332.0, 3),
    ];
    let mut ok = true;
    for (kernel, n, target, tag) in cases {
        let mean = mean_count(kernel, n, 500, tag);
        let rel = (mean - target).abs() / target;
        eprintln!("  mean count at n={n}: {mean:.1} vs {target} (rel {rel:.4})");
        ok &= rel <= 0.02;
    }
    verdict("1 (mean event counts)", ok);
    assert!(ok);
}

#[test]
fn criterion_2_model3_estimate_means() {
    let report = model3_study();
    let scale = report.scales.iter().find(|s| s.n == 1600.0).unwrap();
    let row = |name: &str| scale.rows.iter().find(|r| r.name == name).unwrap();
    let checks = [
        ("eta", 0.496, 0.01),
        ("alpha", 2.028, 0.06),
        ("beta", 1.128, 0.02),
    ];
    let mut ok = true;
    for (name, target, tol) in checks {
        let mean = row(name).mean_estimate;
        eprintln!("  mean {name} at n=1600: {mean:.4} vs {target} +- {tol}");
        ok &= (mean - target).abs() <= tol;
    }
    eprintln!(
        "  included {} of {} fits (converged {}, boundary {})",
        scale.included, scale.replicates, scale.converged, scale.boundary_suspect
    );
    verdict("2 (Model 3 estimate means, n=1600)", ok);
    assert!(ok);
}

#[test]
fn criterion_3_se_halves_as_n_quadruples() {
    let report = model3_study();
    let sd_eta = |n: f64| {
        report
            .scales
            .iter()
            .find(|s| s.n == n)
            .unwrap()
            .rows
            .iter()
            .find(|r| r.name == "eta")
            .unwrap()
            .empirical_se
    };
    let ratio = sd_eta(100.0) / sd_eta(400.0);
    eprintln!(
        "  SD(eta) {:.4} at n=100, {:.4} at n=400, ratio {ratio:.3}",
        sd_eta(100.0),
        sd_eta(400.0)
    );
    let ok = (1.6..=2.4).contains(&ratio);
    verdict("3 (empirical SE scaling)", ok);
    assert!(ok);
}

#[test]
fn criterion_4_estimates_are_normal() {
    let report = model3_study();
    let scale = report.scales.iter().find(|s| s.n == 1600.0).unwrap();
    let mut ok = true;
    for row in &scale.rows {
        let p = row.ks_p.unwrap_or(0.0);
        eprintln!("  KS p for {} at n=1600: {p:.4}", row.name);
        ok &= p > 0.01;
    }
    verdict("4 (asymptotic normality via KS)", ok);
    assert!(ok);
}

#[test]
fn criterion_5_plugin_se_matches_empirical_sd() {
    let mut ok = true;
    for (label, report) in [("Model 2", model2_study()), ("Model 3", model3_study())] {
        let scale = report.scales.iter().find(|s| s.n == 400.0).unwrap();
        for (j, row) in scale.rows.iter().enumerate() {
            let mut ses: Vec<f64> = scale
                .std_errors
                .iter()
                .filter(|s| !s.is_empty())
                .map(|s| s[j])
                .collect();
            ses.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = ses[ses.len() / 2];
            let rel = (median / row.empirical_se - 1.0).abs();
            eprintln!(
                "  {label} {} at n=400: median plug-in SE {median:.4} vs empirical SD {:.4} (rel {rel:.3})",
                row.name, row.empirical_se
            );
            ok &= rel <= 0.30;
        }
    }
    verdict("5 (plug-in SE vs empirical SD)", ok);
    assert!(ok);
}

#[test]
fn criterion_6_ergodic_limit_of_time_average() {
    let spec = model(MODEL1_KERNEL);
    let mc = McOptions {
        horizon: 200.0,
        burn_in: None,
        replicates: 8,
        seed: 515,
    };
    let opts = ErgodicOptions {
        kernel_horizon_eps: 1e-6,
        gl_order: 10,
    };
    let report = ergodicity_report(
        &spec,
        FunctionalSpec::Identity,
        &[200.0, 800.0, 1600.0, 3200.0],
        100,
        515,
        &mc,
        8,
        &opts,
    )
    .unwrap();
    let pi = 5.8333;
    let at_1600 = report.rows.iter().find(|r| r.n == 1600.0).unwrap();
    let rel = (at_1600.mean_time_average - pi).abs() / pi;
    eprintln!(
        "  mean time average at n=1600: {:.4} vs {pi} (rel {rel:.4})",
        at_1600.mean_time_average
    );
    let mut ok = rel <= 0.03;
    let dev = |n: f64| {
        report
            .rows
            .iter()
            .find(|r| r.n == n)
            .unwrap()
            .mean_abs_dev
    };
    eprintln!(
        "  mean |deviation|: {:.4} (n=200) {:.4} (n=800) {:.4} (n=3200)",
        dev(200.0),
        dev(800.0),
        dev(3200.0)
    );
    ok &= dev(200.0) > dev(800.0) && dev(800.0) > dev(3200.0);
    verdict("6 (ergodic limit of time averages)", ok);
    assert!(ok);
}

#[test]
fn criterion_7_property_suite() {
    let mut ok = true;

    // score and information against finite differences of the likelihood,
    // for every kernel family on a simulated path
    for kernel in [MODEL1_KERNEL, MODEL2_KERNEL, MODEL3_KERNEL, "exp(0.5, 1.0)"] {
        let spec = model(kernel);
        let events =
            simulate_hawkes_opts(&spec, 20.0, 77, &SimOptions::default()).unwrap();
        let eval = LikelihoodWorkspace::new(&spec, &events).evaluate(2).unwrap();
        let theta = spec.pack();
        let d = theta.len();
        let ll = |t: &nalgebra::DVector<f64>| {
            let m = spec.unpack(t).unwrap();
            LikelihoodWorkspace::new(&m, &events).evaluate(0).unwrap().loglik
        };
        let grad = |t: &nalgebra::DVector<f64>| {
            let m = spec.unpack(t).unwrap();
            LikelihoodWorkspace::new(&m, &events).evaluate(1).unwrap().score
        };
        for j in 0..d {
            let h = 1e-4 * theta[j].abs().max(1.0);
            let mut up = theta.clone();
            up[j] += h;
            let mut dn = theta.clone();
            dn[j] -= h;
            let fd = (ll(&up) - ll(&dn)) / (2.0 * h);
            let rel = (eval.score[j] - fd).abs() / fd.abs().max(1.0);
            if rel >= 1e-5 {
                eprintln!("  {kernel}: score[{j}] {} vs FD {fd} (rel {rel:.2e})", eval.score[j]);
                ok = false;
            }
            let gfd = (grad(&up) - grad(&dn)) / (2.0 * h);
            for i in 0..d {
                let rel = (-eval.information[(i, j)] - gfd[i]).abs() / gfd[i].abs().max(1.0);
                if rel >= 1e-4 {
                    eprintln!(
                        "  {kernel}: information[({i},{j})] {} vs FD {} (rel {rel:.2e})",
                        -eval.information[(i, j)],
                        gfd[i]
                    );
                    ok = false;
                }
            }
        }
    }

    // kernel density integrates to the CDF
    for kernel in [MODEL1_KERNEL, MODEL2_KERNEL, MODEL3_KERNEL, "exp(0.5, 1.0)"] {
        let k: Kernel = kernel.parse().unwrap();
        let integral = adaptive_quadrature(&|u| k.density(u), 0.1, 3.0, 1e-12).unwrap();
        let diff = k.cdf(3.0).unwrap() - k.cdf(0.1).unwrap();
        if (integral - diff).abs() >= 1e-8 {
            eprintln!("  {kernel}: integral {integral} vs CDF diff {diff}");
            ok = false;
        }
    }

    // pooled time-rescaling residuals under the true model are Exp(1)
    {
        let spec = model(MODEL1_KERNEL);
        let mut pooled: Vec<f64> = (0..50)
            .into_par_iter()
            .flat_map_iter(|i| {
                let seed = derive_stream(31, &[9, i as u64]).next_u64();
                let events =
                    simulate_hawkes_opts(&spec, 200.0, seed, &SimOptions::default()).unwrap();
                rescaled_residuals(&spec, &events).unwrap()
            })
            .collect();
        pooled.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let m = pooled.len();
        let mut dstat: f64 = 0.0;
        for (i, &x) in pooled.iter().enumerate() {
            let f = 1.0 - (-x).exp();
            dstat = dstat.max(((i + 1) as f64 / m as f64 - f).max(f - i as f64 / m as f64));
        }
        let p = kolmogorov_p((m as f64).sqrt() * dstat);
        eprintln!("  residual KS vs Exp(1): m={m}, D={dstat:.5}, p={p:.4}");
        ok &= p > 0.01;
    }

    // gamma and weibull collapse to the exponential kernel at alpha = 1
    {
        let e: Kernel = "exp(0.5, 0.8)".parse().unwrap();
        let g: Kernel = "gamma(0.5, 1, 0.8)".parse().unwrap();
        let w: Kernel = "weibull(0.5, 1, 0.8)".parse().unwrap();
        for i in 1..=30 {
            let t = 0.1 * i as f64;
            for k in [&g, &w] {
                if (k.density(t) - e.density(t)).abs() >= 1e-12
                    || (k.cdf(t).unwrap() - e.cdf(t).unwrap()).abs() >= 1e-12
                {
                    eprintln!("  alpha=1 reduction fails at t={t}");
                    ok = false;
                }
            }
        }
    }

    // fixing eta = 0 gives the closed-form Poisson MLE and standard error
    {
        let spec = ModelSpec::new(
            BaselineSpec::Constant { nu: 2.0 },
            "exp(0.3, 1.0)".parse().unwrap(),
        )
        .unwrap();
        let n = 200.0;
        let seq = simulate_hawkes_opts(&spec, n, 5, &SimOptions::default()).unwrap();
        let fit = fit_mle(
            &seq,
            &spec,
            &FitOptions {
                starts: 2,
                grad_tol: 1e-12,
                fixed: vec![(1, 0.0), (2, 1.0)],
                ..Default::default()
            },
        )
        .unwrap();
        let nu_hat = fit.theta_hat[0];
        let closed = seq.count() as f64 / n;
        let se = fit.std_errors.as_ref().unwrap()[0];
        let se_closed = (closed / n).sqrt();
        if (nu_hat - closed).abs() / closed >= 1e-8 || (se - se_closed).abs() / se_closed >= 1e-6 {
            eprintln!("  Poisson closed form: nu {nu_hat} vs {closed}, SE {se} vs {se_closed}");
            ok = false;
        }
    }

    verdict("7 (analytic property suite)", ok);
    assert!(ok);
}

fn run_cli(args: &[&str], extra: &[(&str, &Path)], threads: &str) -> bool {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hawkes-nsk"));
    cmd.args(args);
    for (flag, path) in extra {
        cmd.arg(flag).arg(path);
    }
    cmd.env("HAWKES_NSK_THREADS", threads);
    let out = cmd.output().unwrap();
    out.status.code() == Some(0)
}

#[test]
fn criterion_8_thread_count_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let mut ok = true;
    let read = |p: &Path| std::fs::read_to_string(p).unwrap();

    // simulate
    let sim1 = dir.path().join("sim1.csv");
    let sim3 = dir.path().join("sim3.csv");
    let sim_args = [
        "simulate", "--baseline", BASELINE, "--kernel", MODEL3_KERNEL, "--n", "60", "--seed", "5",
    ];
    ok &= run_cli(&sim_args, &[("--out", &sim1)], "1");
    ok &= run_cli(&sim_args, &[("--out", &sim3)], "3");
    ok &= read(&sim1) == read(&sim3);

    // eval residuals
    let res1 = dir.path().join("res1.csv");
    let res3 = dir.path().join("res3.csv");
    let eval_args = [
        "eval", "--baseline", BASELINE, "--kernel", MODEL3_KERNEL, "--n", "60", "--order", "2",
    ];
    ok &= run_cli(&eval_args, &[("--events", &sim1), ("--residuals", &res1)], "1");
    ok &= run_cli(&eval_args, &[("--events", &sim1), ("--residuals", &res3)], "3");
    ok &= read(&res1) == read(&res3);

    // fit (compare the result block; the echoed config records the thread count)
    let fit1 = dir.path().join("fit1.json");
    let fit3 = dir.path().join("fit3.json");
    let fit_args = [
        "fit", "--baseline", BASELINE, "--kernel", MODEL3_KERNEL, "--n", "60", "--starts", "2",
        "--kernel-horizon-eps", "1e-12",
    ];
    ok &= run_cli(&fit_args, &[("--events", &sim1), ("--out", &fit1)], "1");
    ok &= run_cli(&fit_args, &[("--events", &sim1), ("--out", &fit3)], "3");
    let result = |p: &Path| {
        serde_json::from_str::<serde_json::Value>(&read(p)).unwrap()["result"].clone()
    };
    ok &= result(&fit1) == result(&fit3);

    // study
    let cfg = dir.path().join("study.json");
    std::fs::write(
        &cfg,
        format!(
            r#"{{
                "model": {{ "baseline": "{BASELINE}", "kernel": "{MODEL3_KERNEL}" }},
                "n_list": [60.0], "replicates": 5, "master_seed": 8,
                "starts": 2, "kernel_horizon_eps": 1e-12
            }}"#
        ),
    )
    .unwrap();
    let s1 = dir.path().join("study1");
    let s3 = dir.path().join("study3");
    ok &= run_cli(&["study"], &[("--config", &cfg), ("--out-dir", &s1)], "1");
    ok &= run_cli(&["study"], &[("--config", &cfg), ("--out-dir", &s3)], "3");
    ok &= read(&s1.join("report.csv")) == read(&s3.join("report.csv"));
    ok &= read(&s1.join("estimates_60.csv")) == read(&s3.join("estimates_60.csv"));

    // ergodic-check
    let e1 = dir.path().join("erg1");
    let e3 = dir.path().join("erg3");
    let erg_args = [
        "ergodic-check", "--baseline", "const(3)", "--kernel", "exp(0.4, 1.0)", "--n", "40,80",
        "--reps", "6", "--mc-horizon", "50", "--mc-reps", "3", "--grid", "4",
    ];
    ok &= run_cli(&erg_args, &[("--out-dir", &e1)], "1");
    ok &= run_cli(&erg_args, &[("--out-dir", &e3)], "3");
    ok &= read(&e1.join("ergodic_table.csv")) == read(&e3.join("ergodic_table.csv"));

    verdict("8 (thread-count determinism)", ok);
    assert!(ok);
}

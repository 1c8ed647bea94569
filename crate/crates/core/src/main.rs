//! Command-line entry point: simulate, eval, fit, study and ergodic-check.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use hawkes_nsk::baseline::BaselineSpec;
use hawkes_nsk::ergodic::{ergodicity_report, ErgodicOptions, FunctionalSpec, McOptions, PsiValue};
use hawkes_nsk::error::HawkesError;
use hawkes_nsk::estimator::{fit_mle, FitOptions, FitResult};
use hawkes_nsk::kernel::Kernel;
use hawkes_nsk::likelihood::{LikelihoodOptions, LikelihoodWorkspace};
use hawkes_nsk::model::{read_events, EventRecord, ModelSpec};
use hawkes_nsk::simulate::{simulate_hawkes_opts, SimOptions};
use hawkes_nsk::study::{run_study, write_study_outputs, StudyConfig};

#[derive(Parser)]
#[command(
    name = "hawkes-nsk",
    about = "Simulation, likelihood evaluation, maximum-likelihood fitting, \
             replication studies and ergodicity checks for Hawkes processes \
             with time-varying baseline and non-exponential kernels",
    version
)]
struct Cli {
    /// Worker thread cap (default: available parallelism; env fallback
    /// HAWKES_NSK_THREADS). Results are independent of this value.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Baseline spec: bspline(degree=..,knots=[..],coef=[..]),
    /// quadexp(t1,t2,t3) or const(nu)
    #[arg(long)]
    baseline: String,
    /// Kernel spec: family(eta[, alpha], beta) with family one of
    /// exp|gpd|gamma|weibull
    #[arg(long)]
    kernel: String,
}

impl ModelArgs {
    fn build(&self) -> Result<ModelSpec, HawkesError> {
        ModelSpec::new(
            self.baseline.parse::<BaselineSpec>()?,
            self.kernel.parse::<Kernel>()?,
        )
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one path by Ogata thinning and write it to a file
    /// (.json for the structured record, anything else as CSV).
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        /// Infill scale n of the stretched window [0, n]
        #[arg(long)]
        n: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path
        #[arg(long)]
        out: PathBuf,
        /// Kernel tail truncation for intensity sums (0 = exact)
        #[arg(long, default_value_t = 0.0)]
        kernel_horizon_eps: f64,
    },
    /// Evaluate log-likelihood, score and observed information on a path.
    Eval {
        #[command(flatten)]
        model: ModelArgs,
        /// Event file (CSV one time per line, or simulator JSON)
        #[arg(long)]
        events: PathBuf,
        /// Scale n (required for CSV; overrides the JSON record if given)
        #[arg(long)]
        n: Option<f64>,
        /// Highest derivative order to report (0, 1 or 2)
        #[arg(long, default_value_t = 2)]
        order: u8,
        /// Also write time-rescaling residuals to this CSV path
        #[arg(long)]
        residuals: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        kernel_horizon_eps: f64,
    },
    /// Maximum-likelihood fit; FitResult as JSON on stdout.
    Fit {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        n: Option<f64>,
        /// Multistart count
        #[arg(long, default_value_t = 5)]
        starts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 300)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-7)]
        grad_tol: f64,
        /// Pin a coordinate, e.g. --fix eta=0 (repeatable)
        #[arg(long = "fix", value_name = "NAME=VALUE")]
        fix: Vec<String>,
        #[arg(long, default_value_t = 0.0)]
        kernel_horizon_eps: f64,
        /// Also write the FitResult JSON to this path
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a replication study from a JSON config.
    Study {
        /// StudyConfig JSON file
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's output_dir; default ".")
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Ergodicity convergence table: time averages against the stationary
    /// Monte-Carlo limit.
    ErgodicCheck {
        #[command(flatten)]
        model: ModelArgs,
        /// Functional: identity|log|square|grad-outer|consistency
        #[arg(long, default_value = "identity")]
        psi: String,
        /// Comma-separated scales, e.g. 200,800,3200
        #[arg(long, value_delimiter = ',')]
        n: Vec<f64>,
        /// Finite-n replicates per scale
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Stationary-simulation window per Monte-Carlo replicate
        #[arg(long, default_value_t = 400.0)]
        mc_horizon: f64,
        /// Monte-Carlo replicates per grid node
        #[arg(long, default_value_t = 20)]
        mc_reps: usize,
        /// Gauss-Legendre grid order on [0,1]
        #[arg(long, default_value_t = 16)]
        grid: usize,
        #[arg(long, default_value_t = 1e-12)]
        kernel_horizon_eps: f64,
        /// Output directory for the table CSV and summary JSON
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // help/version requests are successes, anything else is usage
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let threads = cli
        .threads
        .or_else(|| {
            std::env::var("HAWKES_NSK_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .filter(|&t| t > 0);
    if let Some(t) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: failed to configure thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command, threads) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, kind) = classify(&err);
            let diag = json!({ "error": err.to_string(), "kind": kind });
            eprintln!("{diag}");
            ExitCode::from(code)
        }
    }
}

fn classify(err: &HawkesError) -> (u8, &'static str) {
    match err {
        HawkesError::Io(_)
        | HawkesError::Json(_)
        | HawkesError::Parse(_)
        | HawkesError::InvalidSpec(_)
        | HawkesError::InvalidParam(_)
        | HawkesError::Degenerate(_) => (2, "data"),
        HawkesError::Numeric { .. }
        | HawkesError::Domain(_)
        | HawkesError::Explosion { .. }
        | HawkesError::NonConvergence(_)
        | HawkesError::IllConditioned(_) => (3, "numeric"),
    }
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), HawkesError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn fit_result_json(fit: &FitResult, names: &[String]) -> serde_json::Value {
    let d = fit.information.nrows();
    let info: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| fit.information[(i, j)]).collect())
        .collect();
    let cov: Option<Vec<Vec<f64>>> = fit
        .covariance
        .as_ref()
        .map(|c| (0..d).map(|i| (0..d).map(|j| c[(i, j)]).collect()).collect());
    json!({
        "param_names": names,
        "theta_hat": fit.theta_hat.as_slice(),
        "loglik_at_opt": fit.loglik_at_opt,
        "free_indices": fit.free,
        "information": info,
        "covariance": cov,
        "std_errors": fit.std_errors.as_ref().map(|s| s.as_slice().to_vec()),
        "converged": fit.converged,
        "iterations": fit.iterations,
        "gradient_norm": fit.gradient_norm,
        "starts_used": fit.starts_used,
        "boundary_suspect": fit.boundary_suspect,
        "soft_violations": fit.soft_violations,
    })
}

fn run(cmd: Command, threads: Option<usize>) -> Result<(), HawkesError> {
    match cmd {
        Command::Simulate {
            model,
            n,
            seed,
            out,
            kernel_horizon_eps,
        } => {
            let spec = model.build()?;
            let opts = SimOptions { kernel_horizon_eps };
            let events = simulate_hawkes_opts(&spec, n, seed, &opts)?;
            if out.extension().is_some_and(|e| e == "json") {
                let record = EventRecord {
                    n,
                    times: events.times.clone(),
                    seed: Some(seed),
                    model: Some(format!("{};{}", model.baseline, model.kernel)),
                };
                write_atomic(&out, &serde_json::to_string_pretty(&record)?)?;
            } else {
                let mut buf = Vec::new();
                events.write_csv(&mut buf)?;
                write_atomic(&out, &String::from_utf8_lossy(&buf))?;
            }
            let echo = json!({
                "command": "simulate",
                "config": {
                    "baseline": model.baseline,
                    "kernel": model.kernel,
                    "n": n,
                    "seed": seed,
                    "kernel_horizon_eps": kernel_horizon_eps,
                    "threads": threads,
                    "out": out,
                },
                "count": events.count(),
            });
            println!("{echo:#}");
            Ok(())
        }
        Command::Eval {
            model,
            events,
            n,
            order,
            residuals,
            kernel_horizon_eps,
        } => {
            let spec = model.build()?;
            if order > 2 {
                return Err(HawkesError::InvalidSpec(format!(
                    "order must be 0, 1 or 2, got {order}"
                )));
            }
            let seq = read_events(&events, n)?;
            let ws = LikelihoodWorkspace::new(&spec, &seq)
                .with_options(LikelihoodOptions { kernel_horizon_eps });
            let eval = ws.evaluate(order)?;
            let mut result = json!({
                "count": seq.count(),
                "n": seq.scale_n,
                "loglik": eval.loglik,
            });
            if order >= 1 {
                result["score"] = json!(eval.score.as_slice());
            }
            if order >= 2 {
                let d = eval.information.nrows();
                let info: Vec<Vec<f64>> = (0..d)
                    .map(|i| (0..d).map(|j| eval.information[(i, j)]).collect())
                    .collect();
                result["information"] = json!(info);
            }
            if let Some(res_path) = &residuals {
                let res = ws.rescaled_residuals()?;
                let mut csv = String::from("residual\n");
                for r in &res {
                    csv.push_str(&format!("{r:.17e}\n"));
                }
                write_atomic(res_path, &csv)?;
                result["residuals_written"] = json!(res_path);
            }
            let echo = json!({
                "command": "eval",
                "config": {
                    "baseline": model.baseline,
                    "kernel": model.kernel,
                    "events": events,
                    "n": n,
                    "order": order,
                    "kernel_horizon_eps": kernel_horizon_eps,
                    "threads": threads,
                },
                "result": result,
            });
            println!("{echo:#}");
            Ok(())
        }
        Command::Fit {
            model,
            events,
            n,
            starts,
            seed,
            max_iter,
            grad_tol,
            fix,
            kernel_horizon_eps,
            out,
        } => {
            let spec = model.build()?;
            let seq = read_events(&events, n)?;
            let mut fixed = Vec::new();
            for f in &fix {
                let (name, value) = f.split_once('=').ok_or_else(|| {
                    HawkesError::Parse(format!("--fix expects NAME=VALUE, got `{f}`"))
                })?;
                let idx = spec.param_index(name.trim()).ok_or_else(|| {
                    HawkesError::Parse(format!(
                        "unknown parameter `{}` (expected one of {:?})",
                        name.trim(),
                        spec.param_names()
                    ))
                })?;
                let value: f64 = value.trim().parse().map_err(|e| {
                    HawkesError::Parse(format!("bad value in --fix `{f}`: {e}"))
                })?;
                fixed.push((idx, value));
            }
            let fit = fit_mle(
                &seq,
                &spec,
                &FitOptions {
                    starts,
                    max_iter,
                    grad_tol,
                    seed,
                    kernel_horizon_eps,
                    fixed,
                    ..Default::default()
                },
            )?;
            let echo = json!({
                "command": "fit",
                "config": {
                    "baseline": model.baseline,
                    "kernel": model.kernel,
                    "events": events,
                    "n": seq.scale_n,
                    "starts": starts,
                    "seed": seed,
                    "max_iter": max_iter,
                    "grad_tol": grad_tol,
                    "fix": fix,
                    "kernel_horizon_eps": kernel_horizon_eps,
                    "threads": threads,
                },
                "result": fit_result_json(&fit, &spec.param_names()),
            });
            if let Some(path) = &out {
                write_atomic(path, &format!("{echo:#}"))?;
            }
            println!("{echo:#}");
            Ok(())
        }
        Command::Study { config, out_dir } => {
            let raw = std::fs::read_to_string(&config)?;
            let parsed: StudyConfig = serde_json::from_str(&raw)?;
            let dir = out_dir
                .or_else(|| parsed.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("."));
            let report = run_study(&parsed)?;
            let files = write_study_outputs(&report, &dir)?;
            let echo = json!({
                "command": "study",
                "config": report.config,
                "threads": threads,
                "outputs": files,
                "scales": report.scales.iter().map(|s| json!({
                    "n": s.n,
                    "mean_event_count": s.mean_event_count,
                    "converged": s.converged,
                    "boundary_suspect": s.boundary_suspect,
                    "included": s.included,
                })).collect::<Vec<_>>(),
            });
            println!("{echo:#}");
            Ok(())
        }
        Command::ErgodicCheck {
            model,
            psi,
            n,
            reps,
            seed,
            mc_horizon,
            mc_reps,
            grid,
            kernel_horizon_eps,
            out_dir,
        } => {
            let spec = model.build()?;
            let functional: FunctionalSpec = psi.parse()?;
            if n.is_empty() {
                return Err(HawkesError::InvalidSpec(
                    "ergodic-check needs at least one scale via --n".into(),
                ));
            }
            let mc = McOptions {
                horizon: mc_horizon,
                burn_in: None,
                replicates: mc_reps,
                seed,
            };
            let opts = ErgodicOptions {
                kernel_horizon_eps,
                gl_order: 10,
            };
            let report = ergodicity_report(&spec, functional, &n, reps, seed, &mc, grid, &opts)?;
            std::fs::create_dir_all(&out_dir)?;
            let mut csv =
                String::from("n,replicates,mean_abs_deviation,sd_abs_deviation,mean_time_average\n");
            for row in &report.rows {
                csv.push_str(&format!(
                    "{},{},{:.17e},{:.17e},{:.17e}\n",
                    row.n,
                    row.replicates,
                    row.mean_abs_dev,
                    row.sd_abs_dev,
                    row.mean_time_average
                ));
            }
            let table_path = out_dir.join("ergodic_table.csv");
            write_atomic(&table_path, &csv)?;
            let pi_json = match &report.pi {
                PsiValue::Scalar(s) => json!(s),
                PsiValue::Matrix(m) => {
                    let rows: Vec<Vec<f64>> = (0..m.nrows())
                        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
                        .collect();
                    json!(rows)
                }
            };
            let pi_se_json = match &report.pi_se {
                PsiValue::Scalar(s) => json!(s),
                PsiValue::Matrix(m) => {
                    let rows: Vec<Vec<f64>> = (0..m.nrows())
                        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
                        .collect();
                    json!(rows)
                }
            };
            let summary = json!({
                "command": "ergodic-check",
                "config": {
                    "baseline": model.baseline,
                    "kernel": model.kernel,
                    "psi": functional.name(),
                    "n_list": n,
                    "reps": reps,
                    "seed": seed,
                    "mc_horizon": mc_horizon,
                    "mc_reps": mc_reps,
                    "grid": grid,
                    "kernel_horizon_eps": kernel_horizon_eps,
                    "threads": threads,
                },
                "pi": pi_json,
                "pi_mc_se": pi_se_json,
                "rows": report.rows.iter().map(|r| json!({
                    "n": r.n,
                    "replicates": r.replicates,
                    "mean_abs_deviation": r.mean_abs_dev,
                    "sd_abs_deviation": r.sd_abs_dev,
                    "mean_time_average": r.mean_time_average,
                })).collect::<Vec<_>>(),
            });
            let summary_path = out_dir.join("ergodic_summary.json");
            write_atomic(&summary_path, &format!("{summary:#}"))?;
            println!("{summary:#}");
            Ok(())
        }
    }
}

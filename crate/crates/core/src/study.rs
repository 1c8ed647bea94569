//! Replication harness: simulate -> fit -> summarise across scales, with
//! table/CSV/QQ outputs mirroring the simulation-study layout.

use std::path::{Path, PathBuf};

use rand_chacha::rand_core::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::estimator::{fit_mle, FitOptions};
use crate::model::ModelSpec;
use crate::rng::derive_stream;
use crate::simulate::{simulate_hawkes_opts, SimOptions};
use crate::stats::{ks_normal_test, qq_points};

/// Truth model in text form (baseline and kernel specs as parsed by their
/// `FromStr` grammars).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub baseline: String,
    pub kernel: String,
}

impl ModelConfig {
    pub fn build(&self) -> Result<ModelSpec> {
        ModelSpec::new(self.baseline.parse()?, self.kernel.parse()?)
    }
}

fn default_starts() -> usize {
    5
}
fn default_horizon_eps() -> f64 {
    1e-12
}
fn default_grad_tol() -> f64 {
    1e-7
}
fn default_max_iter() -> usize {
    300
}
fn default_true() -> bool {
    true
}

/// Study configuration (JSON-loadable).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyConfig {
    pub model: ModelConfig,
    pub n_list: Vec<f64>,
    pub replicates: usize,
    pub master_seed: u64,
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default = "default_horizon_eps")]
    pub kernel_horizon_eps: f64,
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Exclude boundary-suspect fits from the summary rows (they are always
    /// counted separately).
    #[serde(default = "default_true")]
    pub exclude_boundary: bool,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() {
            return Err(HawkesError::InvalidSpec("n_list must be nonempty".into()));
        }
        if self.replicates < 2 {
            return Err(HawkesError::InvalidSpec(
                "study needs at least 2 replicates".into(),
            ));
        }
        self.model.build().map(|_| ())
    }
}

/// Summary row for one parameter at one scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamRow {
    pub name: String,
    pub true_value: f64,
    pub mean_estimate: f64,
    /// Sample SD of the replicate estimates (the tables' "Emp. S.E.").
    pub empirical_se: f64,
    /// SD / sqrt(replicates), the SE of the mean estimate.
    pub se_of_mean: f64,
    /// KS normality p-value; absent (unreliable) below 8 usable fits.
    pub ks_p: Option<f64>,
}

/// Per-scale block of the report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScaleReport {
    pub n: f64,
    pub replicates: usize,
    pub converged: usize,
    pub boundary_suspect: usize,
    /// Fits contributing to the summary rows.
    pub included: usize,
    pub mean_event_count: f64,
    pub rows: Vec<ParamRow>,
    /// Raw estimates of the included fits, one row per replicate, in
    /// parameter packing order (summaries are recomputable from these).
    pub estimates: Vec<Vec<f64>>,
    /// Plug-in standard errors of the included fits, aligned with
    /// `estimates`; a row is empty when the information was singular.
    pub std_errors: Vec<Vec<f64>>,
}

/// Full study output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub param_names: Vec<String>,
    pub true_theta: Vec<f64>,
    pub scales: Vec<ScaleReport>,
}

struct RepOutcome {
    count: usize,
    estimate: Option<Vec<f64>>,
    std_errors: Vec<f64>,
    converged: bool,
    boundary: bool,
}

/// Run the full simulate -> fit -> summarise pipeline. Deterministic for a
/// given master seed regardless of worker count: every replicate draws from
/// its own derived stream and aggregation is an ordered reduce.
pub fn run_study(config: &StudyConfig) -> Result<StudyReport> {
    config.validate()?;
    let truth = config.model.build()?;
    let names = truth.param_names();
    let theta_star = truth.pack();
    let sim_opts = SimOptions {
        kernel_horizon_eps: config.kernel_horizon_eps,
    };
    let mut scales = Vec::with_capacity(config.n_list.len());
    for (ni, &n) in config.n_list.iter().enumerate() {
        let outcomes: Vec<RepOutcome> = (0..config.replicates)
            .into_par_iter()
            .map(|r| {
                let sim_seed =
                    derive_stream(config.master_seed, &[0x5349_4d, ni as u64, r as u64])
                        .next_u64();
                let fit_seed =
                    derive_stream(config.master_seed, &[0x4649_54, ni as u64, r as u64])
                        .next_u64();
                let events = match simulate_hawkes_opts(&truth, n, sim_seed, &sim_opts) {
                    Ok(e) => e,
                    Err(_) => {
                        return RepOutcome {
                            count: 0,
                            estimate: None,
                            std_errors: Vec::new(),
                            converged: false,
                            boundary: false,
                        }
                    }
                };
                let count = events.count();
                let fit = fit_mle(
                    &events,
                    &truth,
                    &FitOptions {
                        starts: config.starts,
                        max_iter: config.max_iter,
                        grad_tol: config.grad_tol,
                        seed: fit_seed,
                        kernel_horizon_eps: config.kernel_horizon_eps,
                        ..Default::default()
                    },
                );
                match fit {
                    Ok(f) => RepOutcome {
                        count,
                        estimate: Some(f.theta_hat.as_slice().to_vec()),
                        std_errors: f
                            .std_errors
                            .as_ref()
                            .map(|s| s.as_slice().to_vec())
                            .unwrap_or_default(),
                        converged: f.converged,
                        boundary: f.boundary_suspect,
                    },
                    Err(_) => RepOutcome {
                        count,
                        estimate: None,
                        std_errors: Vec::new(),
                        converged: false,
                        boundary: false,
                    },
                }
            })
            .collect();

        let converged = outcomes.iter().filter(|o| o.converged).count();
        let boundary = outcomes.iter().filter(|o| o.boundary).count();
        let included: Vec<&RepOutcome> = outcomes
            .iter()
            .filter(|o| o.converged && o.estimate.is_some() && !(config.exclude_boundary && o.boundary))
            .collect();
        let estimates: Vec<Vec<f64>> =
            included.iter().filter_map(|o| o.estimate.clone()).collect();
        let std_errors: Vec<Vec<f64>> =
            included.iter().map(|o| o.std_errors.clone()).collect();
        if estimates.len() * 2 < config.replicates {
            return Err(HawkesError::NonConvergence(format!(
                "only {} of {} fits usable at n = {n}",
                estimates.len(),
                config.replicates
            )));
        }
        let mean_count = outcomes.iter().map(|o| o.count as f64).sum::<f64>()
            / config.replicates as f64;
        let m = estimates.len() as f64;
        let mut rows = Vec::with_capacity(names.len());
        for (j, name) in names.iter().enumerate() {
            let col: Vec<f64> = estimates.iter().map(|e| e[j]).collect();
            let mean = col.iter().sum::<f64>() / m;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
            let sd = var.sqrt();
            let ks_p = ks_normal_test(&col).ok().map(|(_, p)| p);
            rows.push(ParamRow {
                name: name.clone(),
                true_value: theta_star[j],
                mean_estimate: mean,
                empirical_se: sd,
                se_of_mean: sd / m.sqrt(),
                ks_p,
            });
        }
        scales.push(ScaleReport {
            n,
            replicates: config.replicates,
            converged,
            boundary_suspect: boundary,
            included: estimates.len(),
            mean_event_count: mean_count,
            rows,
            estimates,
            std_errors,
        });
    }
    Ok(StudyReport {
        config: config.clone(),
        param_names: names,
        true_theta: theta_star.as_slice().to_vec(),
        scales,
    })
}

/// Write a file atomically: stage under a temporary name, then rename.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Emit report.csv, per-scale raw estimates and QQ data/plots into `dir`.
pub fn write_study_outputs(report: &StudyReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let mut table = String::from(
        "n,mean_count,parameter,true,mean_estimate,empirical_se,se_of_mean,ks_p,included,converged,boundary_suspect,replicates\n",
    );
    for s in &report.scales {
        for row in &s.rows {
            let ks = row
                .ks_p
                .map(|p| format!("{p:.6}"))
                .unwrap_or_else(|| "NA".into());
            table.push_str(&format!(
                "{},{:.3},{},{:.17e},{:.17e},{:.17e},{:.17e},{},{},{},{},{}\n",
                s.n,
                s.mean_event_count,
                row.name,
                row.true_value,
                row.mean_estimate,
                row.empirical_se,
                row.se_of_mean,
                ks,
                s.included,
                s.converged,
                s.boundary_suspect,
                s.replicates
            ));
        }
    }
    let report_path = dir.join("report.csv");
    write_atomic(&report_path, &table)?;
    written.push(report_path);

    for s in &report.scales {
        let mut est = report.param_names.join(",");
        est.push('\n');
        for row in &s.estimates {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
            est.push_str(&line.join(","));
            est.push('\n');
        }
        let est_path = dir.join(format!("estimates_{}.csv", s.n));
        write_atomic(&est_path, &est)?;
        written.push(est_path);

        for (j, name) in report.param_names.iter().enumerate() {
            let col: Vec<f64> = s.estimates.iter().map(|e| e[j]).collect();
            if col.len() < 2 {
                continue;
            }
            let pts = qq_points(&col)?;
            let mut csv = String::from("theoretical_quantile,sample_quantile\n");
            for &(q, x) in &pts {
                csv.push_str(&format!("{q:.17e},{x:.17e}\n"));
            }
            let csv_path = dir.join(format!("qq_{}_{}.csv", s.n, name));
            write_atomic(&csv_path, &csv)?;
            written.push(csv_path);

            let svg_path = dir.join(format!("qq_{}_{}.svg", s.n, name));
            write_atomic(&svg_path, &qq_svg(&pts, name, s.n))?;
            written.push(svg_path);
        }
    }
    Ok(written)
}

/// Minimal standalone QQ scatter with the fitted-normal reference line.
fn qq_svg(pts: &[(f64, f64)], name: &str, n: f64) -> String {
    let (w, h, margin) = (480.0, 480.0, 50.0);
    let qmin = pts.first().map(|p| p.0).unwrap_or(-1.0);
    let qmax = pts.last().map(|p| p.0).unwrap_or(1.0);
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(_, y) in pts {
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    let ypad = 0.05 * (ymax - ymin).max(1e-12);
    let (ymin, ymax) = (ymin - ypad, ymax + ypad);
    let sx = |q: f64| margin + (q - qmin) / (qmax - qmin).max(1e-12) * (w - 2.0 * margin);
    let sy = |v: f64| h - margin - (v - ymin) / (ymax - ymin) * (h - 2.0 * margin);
    // reference line through the sample mean/SD
    let m = pts.len() as f64;
    let mean = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sd = (pts.iter().map(|p| (p.1 - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0)).sqrt();
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">Normal QQ: {name}, n = {n}</text>\n",
        w / 2.0
    );
    svg.push_str(&format!(
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#888\" stroke-dasharray=\"5 4\"/>\n",
        sx(qmin),
        sy(mean + sd * qmin),
        sx(qmax),
        sy(mean + sd * qmax)
    ));
    for &(q, v) in pts {
        svg.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.4\" fill=\"#1f6fb2\" fill-opacity=\"0.75\"/>\n",
            sx(q),
            sy(v)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">theoretical quantile</text>\n",
        w / 2.0,
        h - 12.0
    ));
    svg.push_str("</svg>\n");
    svg
}

//! Numerical verification of asymptotic ergodicity: time-average functionals
//! of the intensity path against their stationary Monte-Carlo limits
//! pi = int_0^1 pi_dot(x) dx.

use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::RngCore;
use rayon::prelude::*;

use crate::error::{HawkesError, Result};
use crate::kernel::Kernel;
use crate::likelihood::LikelihoodWorkspace;
use crate::model::{EventSequence, ModelSpec};
use crate::rng::derive_stream;
use crate::simulate::{simulate_stationary_path, SimOptions, StationaryPath};
use crate::special::gauss_legendre;

/// Named functionals of the intensity tuple, all continuous with polynomial
/// growth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionalSpec {
    /// psi(lambda) = lambda.
    Identity,
    /// psi(lambda) = log lambda.
    Log,
    /// psi(lambda) = lambda^2.
    Square,
    /// Matrix-valued (d lambda)(d lambda)^T / lambda, the integrand of the
    /// asymptotic information Gamma.
    GradOuterOverIntensity,
    /// lambda_ref log(lambda/lambda_ref) - (lambda - lambda_ref), the
    /// integrand of the consistency limit; requires a reference parameter.
    ConsistencyIntegrand,
}

impl FunctionalSpec {
    pub fn is_matrix(self) -> bool {
        matches!(self, FunctionalSpec::GradOuterOverIntensity)
    }

    pub fn needs_reference(self) -> bool {
        matches!(self, FunctionalSpec::ConsistencyIntegrand)
    }

    pub fn name(self) -> &'static str {
        match self {
            FunctionalSpec::Identity => "identity",
            FunctionalSpec::Log => "log",
            FunctionalSpec::Square => "square",
            FunctionalSpec::GradOuterOverIntensity => "grad-outer",
            FunctionalSpec::ConsistencyIntegrand => "consistency",
        }
    }
}

impl std::str::FromStr for FunctionalSpec {
    type Err = HawkesError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "identity" => Ok(FunctionalSpec::Identity),
            "log" => Ok(FunctionalSpec::Log),
            "square" => Ok(FunctionalSpec::Square),
            "grad-outer" => Ok(FunctionalSpec::GradOuterOverIntensity),
            "consistency" => Ok(FunctionalSpec::ConsistencyIntegrand),
            other => Err(HawkesError::Parse(format!(
                "unknown functional `{other}` (expected identity|log|square|grad-outer|consistency)"
            ))),
        }
    }
}

/// Scalar or matrix value of a functional.
#[derive(Debug, Clone, PartialEq)]
pub enum PsiValue {
    Scalar(f64),
    Matrix(DMatrix<f64>),
}

impl PsiValue {
    pub fn zero(psi: FunctionalSpec, dim: usize) -> PsiValue {
        if psi.is_matrix() {
            PsiValue::Matrix(DMatrix::zeros(dim, dim))
        } else {
            PsiValue::Scalar(0.0)
        }
    }

    pub fn axpy(&mut self, a: f64, other: &PsiValue) {
        match (self, other) {
            (PsiValue::Scalar(s), PsiValue::Scalar(o)) => *s += a * o,
            (PsiValue::Matrix(s), PsiValue::Matrix(o)) => *s += a * o,
            _ => panic!("mismatched functional shapes"),
        }
    }

    pub fn scale(&mut self, a: f64) {
        match self {
            PsiValue::Scalar(s) => *s *= a,
            PsiValue::Matrix(m) => *m *= a,
        }
    }

    /// Absolute value (scalar) or Frobenius norm (matrix).
    pub fn norm(&self) -> f64 {
        match self {
            PsiValue::Scalar(s) => s.abs(),
            PsiValue::Matrix(m) => m.norm(),
        }
    }

    pub fn minus(&self, other: &PsiValue) -> PsiValue {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            PsiValue::Scalar(s) => Some(*s),
            PsiValue::Matrix(_) => None,
        }
    }

    /// Elementwise square root (used for standard errors).
    fn sqrt(&self) -> PsiValue {
        match self {
            PsiValue::Scalar(s) => PsiValue::Scalar(s.sqrt()),
            PsiValue::Matrix(m) => PsiValue::Matrix(m.map(|v| v.sqrt())),
        }
    }

    fn hadamard_sq(&self) -> PsiValue {
        match self {
            PsiValue::Scalar(s) => PsiValue::Scalar(s * s),
            PsiValue::Matrix(m) => PsiValue::Matrix(m.map(|v| v * v)),
        }
    }
}

/// Options shared by the time-average and ergodic-limit evaluations.
#[derive(Debug, Clone, Copy)]
pub struct ErgodicOptions {
    /// Kernel truncation for intensity sums; 0 = exact.
    pub kernel_horizon_eps: f64,
    /// Gauss-Legendre order on each inter-event interval.
    pub gl_order: usize,
}

impl Default for ErgodicOptions {
    fn default() -> Self {
        ErgodicOptions {
            kernel_horizon_eps: 0.0,
            gl_order: 10,
        }
    }
}

/// Blockwise bookkeeping of the ergodicity construction: a_n equal blocks of
/// width b_n = n / a_n.
#[derive(Debug, Clone)]
pub struct BlockPlan {
    pub n: f64,
    pub a_n: usize,
    pub b_n: f64,
}

impl BlockPlan {
    /// Default block count ceil(sqrt(n)): a_n -> infinity, a_n = o(n).
    pub fn new(n: f64, a_n: Option<usize>) -> Result<BlockPlan> {
        if !(n > 0.0) {
            return Err(HawkesError::InvalidSpec(format!(
                "block plan needs positive n, got {n}"
            )));
        }
        let a_n = a_n.unwrap_or_else(|| n.sqrt().ceil() as usize).max(1);
        Ok(BlockPlan {
            n,
            a_n,
            b_n: n / a_n as f64,
        })
    }

    /// Block start times tau_0 = 0 < ... < tau_{a_n} = n (the final edge is
    /// pinned to n exactly).
    pub fn taus(&self) -> Vec<f64> {
        let mut t: Vec<f64> = (0..self.a_n).map(|i| i as f64 * self.b_n).collect();
        t.push(self.n);
        t
    }
}

/// Intensity (and optionally its parameter gradient) evaluator over a fixed
/// event history on the stretched time scale.
struct IntensityEval<'a> {
    model: &'a ModelSpec,
    /// Stretched event times.
    times: &'a [f64],
    /// Stretch factor mapping evaluation times to the baseline argument
    /// (baseline evaluated at t / n); infinite for the stationary limit,
    /// where the baseline is frozen at a constant.
    scale_n: Option<f64>,
    /// Frozen baseline location for the stationary limit process.
    frozen_x: Option<f64>,
    horizon: f64,
}

impl<'a> IntensityEval<'a> {
    /// lambda at stretched time t (left limit) and, if `grad` is set, its
    /// gradient in the canonical packing.
    fn eval(&self, t: f64, hint: usize, grad: Option<&mut DVector<f64>>) -> Result<f64> {
        let model = self.model;
        let x = match (self.scale_n, self.frozen_x) {
            (Some(n), _) => (t / n).clamp(0.0, 1.0),
            (None, Some(x)) => x,
            _ => unreachable!("one of scale_n / frozen_x must be set"),
        };
        let db = model.baseline_dim();
        let dk = model.kernel_dim();
        match grad {
            None => {
                let mut lam = model.baseline.value(x);
                for j in (0..hint).rev() {
                    let elapsed = t - self.times[j];
                    if elapsed > self.horizon {
                        break;
                    }
                    lam += model.kernel.density(elapsed);
                }
                Ok(lam)
            }
            Some(g) => {
                let base = model.baseline.derivs(x, 1)?;
                let mut lam = base.value;
                for a in 0..db {
                    g[a] = base.grad[a];
                }
                for a in 0..dk {
                    g[db + a] = 0.0;
                }
                for j in (0..hint).rev() {
                    let elapsed = t - self.times[j];
                    if elapsed > self.horizon {
                        break;
                    }
                    let kd = model.kernel.density_derivs(elapsed, 1)?;
                    lam += kd.value;
                    for a in 0..dk {
                        g[db + a] += kd.grad[a];
                    }
                }
                Ok(lam)
            }
        }
    }
}

/// psi evaluated from the intensity tuple at one time point.
fn psi_at(
    psi: FunctionalSpec,
    primary: &IntensityEval<'_>,
    reference: Option<&IntensityEval<'_>>,
    t: f64,
    hint: usize,
    scratch: &mut DVector<f64>,
) -> Result<PsiValue> {
    match psi {
        FunctionalSpec::Identity => Ok(PsiValue::Scalar(primary.eval(t, hint, None)?)),
        FunctionalSpec::Log => {
            let lam = primary.eval(t, hint, None)?;
            if lam <= 0.0 {
                return Err(HawkesError::Domain(format!(
                    "log functional undefined at intensity {lam}"
                )));
            }
            Ok(PsiValue::Scalar(lam.ln()))
        }
        FunctionalSpec::Square => {
            let lam = primary.eval(t, hint, None)?;
            Ok(PsiValue::Scalar(lam * lam))
        }
        FunctionalSpec::GradOuterOverIntensity => {
            let lam = primary.eval(t, hint, Some(scratch))?;
            if lam <= 0.0 {
                return Err(HawkesError::Domain(format!(
                    "grad-outer functional undefined at intensity {lam}"
                )));
            }
            let d = scratch.len();
            let mut m = DMatrix::zeros(d, d);
            for a in 0..d {
                for b in 0..d {
                    m[(a, b)] = scratch[a] * scratch[b] / lam;
                }
            }
            Ok(PsiValue::Matrix(m))
        }
        FunctionalSpec::ConsistencyIntegrand => {
            let refe = reference.ok_or_else(|| {
                HawkesError::InvalidSpec(
                    "consistency functional needs a reference parameter point".into(),
                )
            })?;
            let lam = primary.eval(t, hint, None)?;
            let lam_ref = refe.eval(t, hint, None)?;
            if lam <= 0.0 || lam_ref <= 0.0 {
                return Err(HawkesError::Domain(
                    "consistency functional needs positive intensities".into(),
                ));
            }
            Ok(PsiValue::Scalar(
                lam_ref * (lam / lam_ref).ln() - (lam - lam_ref),
            ))
        }
    }
}

/// Composite Gauss-Legendre time average of psi over [t0, t1] (stretched),
/// splitting at events so the integrand stays smooth.
#[allow(clippy::too_many_arguments)]
fn quadrature_average(
    psi: FunctionalSpec,
    primary: &IntensityEval<'_>,
    reference: Option<&IntensityEval<'_>>,
    times: &[f64],
    t0: f64,
    t1: f64,
    dim: usize,
    gl_order: usize,
) -> Result<PsiValue> {
    let rule = gauss_legendre(gl_order);
    let mut acc = PsiValue::zero(psi, dim);
    let mut scratch = DVector::zeros(dim);
    let mut cuts = vec![t0];
    cuts.extend(times.iter().copied().filter(|&t| t > t0 && t < t1));
    cuts.push(t1);
    // index of the first event at or after the current cut
    let mut hint = times.partition_point(|&t| t < t0 + 1e-300);
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        while hint < times.len() && times[hint] <= a {
            hint += 1;
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for &(u, wt) in &rule {
            let t = mid + half * u;
            let v = psi_at(psi, primary, reference, t, hint, &mut scratch)?;
            acc.axpy(half * wt, &v);
        }
    }
    acc.scale(1.0 / (t1 - t0));
    Ok(acc)
}

/// Time average (1/n) int_0^n psi dt along an observed path, by composite
/// Gauss-Legendre between events.
///
/// psi = identity short-circuits to the exact compensator identity
/// Lambda(n)/n; pass through [`time_average_quadrature`] to force the
/// generic quadrature path.
pub fn time_average(
    model: &ModelSpec,
    events: &EventSequence,
    psi: FunctionalSpec,
    reference: Option<&ModelSpec>,
    opts: &ErgodicOptions,
) -> Result<PsiValue> {
    if psi == FunctionalSpec::Identity {
        let ws = LikelihoodWorkspace::new(model, events).with_options(crate::likelihood::LikelihoodOptions {
            kernel_horizon_eps: opts.kernel_horizon_eps,
        });
        return Ok(PsiValue::Scalar(ws.compensator(1.0)? / events.scale_n));
    }
    time_average_quadrature(model, events, psi, reference, opts)
}

/// The generic quadrature path of [`time_average`] (reference
/// implementation; also used to cross-check the identity shortcut).
pub fn time_average_quadrature(
    model: &ModelSpec,
    events: &EventSequence,
    psi: FunctionalSpec,
    reference: Option<&ModelSpec>,
    opts: &ErgodicOptions,
) -> Result<PsiValue> {
    let n = events.scale_n;
    let stretched: Vec<f64> = events.stretched().collect();
    let horizon = if opts.kernel_horizon_eps > 0.0 && model.kernel.params.eta > 0.0 {
        model.kernel.quantile(1.0 - opts.kernel_horizon_eps)
    } else {
        f64::INFINITY
    };
    let primary = IntensityEval {
        model,
        times: &stretched,
        scale_n: Some(n),
        frozen_x: None,
        horizon,
    };
    let ref_eval = reference.map(|m| IntensityEval {
        model: m,
        times: &stretched,
        scale_n: Some(n),
        frozen_x: None,
        horizon,
    });
    quadrature_average(
        psi,
        &primary,
        ref_eval.as_ref(),
        &stretched,
        0.0,
        n,
        model.dim(),
        opts.gl_order,
    )
}

/// Monte-Carlo controls for [`ergodic_limit`].
#[derive(Debug, Clone)]
pub struct McOptions {
    /// Observation-window length per stationary replicate.
    pub horizon: f64,
    /// Burn-in; None picks the kernel-quantile default.
    pub burn_in: Option<f64>,
    pub replicates: usize,
    pub seed: u64,
}

/// pi_dot at one quadrature node.
#[derive(Debug, Clone)]
pub struct ErgodicNode {
    pub x: f64,
    pub weight: f64,
    pub mean: PsiValue,
    /// Monte-Carlo standard error (elementwise for matrices).
    pub se: PsiValue,
}

/// Grid of pi_dot values and the aggregated pi.
#[derive(Debug, Clone)]
pub struct ErgodicLimit {
    pub nodes: Vec<ErgodicNode>,
    pub pi: PsiValue,
    /// Quadrature-propagated Monte-Carlo SE of pi.
    pub pi_se: PsiValue,
}

/// Stationary time average of psi for one replicate at frozen location x.
fn stationary_average(
    path: &StationaryPath,
    model: &ModelSpec,
    model_star: &ModelSpec,
    x: f64,
    psi: FunctionalSpec,
    opts: &ErgodicOptions,
) -> Result<PsiValue> {
    let t0 = path.burn_in;
    let t1 = path.burn_in + path.horizon;
    let horizon = |k: &Kernel| {
        if opts.kernel_horizon_eps > 0.0 && k.params.eta > 0.0 {
            k.quantile(1.0 - opts.kernel_horizon_eps)
        } else {
            f64::INFINITY
        }
    };
    if psi == FunctionalSpec::Identity {
        // exact: nu(x) + (1/H) sum_s [Gtilde-mass of s inside the window]
        let nu = model.baseline.value(x);
        let mut acc = 0.0;
        for &s in &path.all_times {
            if s >= t1 {
                break;
            }
            let hi = model.kernel.cdf(t1 - s)?;
            let lo = if s > t0 { 0.0 } else { model.kernel.cdf(t0 - s)? };
            acc += hi - lo;
        }
        return Ok(PsiValue::Scalar(nu + acc / path.horizon));
    }
    let primary = IntensityEval {
        model,
        times: &path.all_times,
        scale_n: None,
        frozen_x: Some(x),
        horizon: horizon(&model.kernel),
    };
    let ref_eval = if psi.needs_reference() {
        Some(IntensityEval {
            model: model_star,
            times: &path.all_times,
            scale_n: None,
            frozen_x: Some(x),
            horizon: horizon(&model_star.kernel),
        })
    } else {
        None
    };
    quadrature_average(
        psi,
        &primary,
        ref_eval.as_ref(),
        &path.all_times,
        t0,
        t1,
        model.dim(),
        opts.gl_order,
    )
}

/// Estimate pi_dot on a Gauss-Legendre grid over [0,1] by stationary
/// simulation under theta_star at each node, and aggregate pi = int pi_dot.
///
/// The path at node x is simulated from the stationary process with constant
/// baseline nu(x; theta_star); psi is evaluated under `model` (theta), with
/// `model_star` as the reference point where required.
pub fn ergodic_limit(
    model: &ModelSpec,
    model_star: &ModelSpec,
    psi: FunctionalSpec,
    grid_order: usize,
    mc: &McOptions,
    opts: &ErgodicOptions,
) -> Result<ErgodicLimit> {
    if model_star.kernel.params.eta >= 1.0 {
        return Err(HawkesError::InvalidParam(
            "stationary limit needs eta < 1".into(),
        ));
    }
    if mc.replicates < 2 {
        return Err(HawkesError::InvalidSpec(
            "ergodic limit needs at least 2 replicates per node".into(),
        ));
    }
    let grid = gauss_legendre(grid_order.max(2));
    let xs: Vec<f64> = grid.iter().map(|&(u, _)| u).collect();
    let ws: Vec<f64> = grid.iter().map(|&(_, w)| w).collect();
    let sim_opts = SimOptions {
        kernel_horizon_eps: opts.kernel_horizon_eps,
    };
    let jobs: Vec<(usize, usize)> = (0..xs.len())
        .flat_map(|i| (0..mc.replicates).map(move |r| (i, r)))
        .collect();
    let results: Vec<Result<(usize, PsiValue)>> = jobs
        .par_iter()
        .map(|&(i, r)| {
            let x = 0.5 * (xs[i] + 1.0);
            let nu_star = model_star.baseline.value(x);
            let seed = derive_stream(mc.seed, &[0x4e4f_4445, i as u64, r as u64]).next_u64();
            let path = simulate_stationary_path(
                nu_star,
                &model_star.kernel,
                mc.burn_in,
                mc.horizon,
                seed,
                &sim_opts,
            )?;
            let v = stationary_average(&path, model, model_star, x, psi, opts)?;
            Ok((i, v))
        })
        .collect();

    let dim = model.dim();
    let mut per_node: Vec<Vec<PsiValue>> = (0..xs.len()).map(|_| Vec::new()).collect();
    for res in results {
        let (i, v) = res?;
        per_node[i].push(v);
    }
    let r = mc.replicates as f64;
    let mut nodes = Vec::with_capacity(xs.len());
    let mut pi = PsiValue::zero(psi, dim);
    let mut pi_var = PsiValue::zero(psi, dim);
    for i in 0..xs.len() {
        let x = 0.5 * (xs[i] + 1.0);
        let weight = 0.5 * ws[i];
        let mut mean = PsiValue::zero(psi, dim);
        for v in &per_node[i] {
            mean.axpy(1.0 / r, v);
        }
        // two-pass centered elementwise variance of the node mean
        let mut var = PsiValue::zero(psi, dim);
        for v in &per_node[i] {
            var.axpy(1.0, &v.minus(&mean).hadamard_sq());
        }
        var.scale(1.0 / (r * (r - 1.0).max(1.0)));
        pi.axpy(weight, &mean);
        pi_var.axpy(weight * weight, &var);
        nodes.push(ErgodicNode {
            x,
            weight,
            mean,
            se: var.sqrt(),
        });
    }
    Ok(ErgodicLimit {
        nodes,
        pi,
        pi_se: pi_var.sqrt(),
    })
}

/// One row of the convergence table.
#[derive(Debug, Clone)]
pub struct ErgodicityRow {
    pub n: f64,
    pub replicates: usize,
    pub mean_abs_dev: f64,
    pub sd_abs_dev: f64,
    pub mean_time_average: f64,
}

/// Convergence table of |time_average - pi| across scales.
#[derive(Debug, Clone)]
pub struct ErgodicityReport {
    pub psi: FunctionalSpec,
    pub pi: PsiValue,
    pub pi_se: PsiValue,
    pub rows: Vec<ErgodicityRow>,
}

/// Simulate `replicates` finite-n paths per scale and tabulate the deviation
/// of the time average from the ergodic limit.
pub fn ergodicity_report(
    model: &ModelSpec,
    psi: FunctionalSpec,
    n_list: &[f64],
    replicates: usize,
    seed: u64,
    mc: &McOptions,
    grid_order: usize,
    opts: &ErgodicOptions,
) -> Result<ErgodicityReport> {
    if n_list.is_empty() || replicates < 2 {
        return Err(HawkesError::InvalidSpec(
            "ergodicity report needs scales and at least 2 replicates".into(),
        ));
    }
    let limit = ergodic_limit(model, model, psi, grid_order, mc, opts)?;
    let sim_opts = SimOptions {
        kernel_horizon_eps: opts.kernel_horizon_eps,
    };
    let mut rows = Vec::with_capacity(n_list.len());
    for (ni, &n) in n_list.iter().enumerate() {
        let devs: Vec<Result<(f64, f64)>> = (0..replicates)
            .into_par_iter()
            .map(|r| {
                let path_seed =
                    derive_stream(seed, &[0x5041_5448, ni as u64, r as u64]).next_u64();
                let events =
                    crate::simulate::simulate_hawkes_opts(model, n, path_seed, &sim_opts)?;
                let ta = time_average(model, &events, psi, Some(model), opts)?;
                let scalar = ta.as_scalar().unwrap_or_else(|| ta.norm());
                Ok((ta.minus(&limit.pi).norm(), scalar))
            })
            .collect();
        let mut d = Vec::with_capacity(replicates);
        let mut tavg = 0.0;
        for r in devs {
            let (dev, ta) = r?;
            d.push(dev);
            tavg += ta;
        }
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (d.len() as f64 - 1.0);
        rows.push(ErgodicityRow {
            n,
            replicates,
            mean_abs_dev: mean,
            sd_abs_dev: var.sqrt(),
            mean_time_average: tavg / replicates as f64,
        });
    }
    Ok(ErgodicityReport {
        psi,
        pi: limit.pi,
        pi_se: limit.pi_se,
        rows,
    })
}

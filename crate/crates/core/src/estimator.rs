//! Maximum-likelihood estimation: smooth reparameterisation onto an
//! unconstrained space, multistart BFGS with strong-Wolfe line search on the
//! analytic score, and plug-in asymptotic covariance from the observed
//! information at the optimum.

use nalgebra::{DMatrix, DVector};

use crate::error::{HawkesError, Result};
use crate::likelihood::{LikelihoodOptions, LikelihoodWorkspace};
use crate::model::{EventSequence, ModelSpec};
use crate::rng::derive_stream;
use rand::Rng;

/// Per-coordinate bijection between the natural and free scales.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoordTransform {
    /// z = log(theta), theta > 0.
    Log,
    /// z = logit(theta), theta in (0, 1).
    Logit,
    /// z = theta, unconstrained.
    Identity,
}

impl CoordTransform {
    fn forward(self, theta: f64) -> Result<f64> {
        match self {
            CoordTransform::Log => {
                if theta > 0.0 {
                    Ok(theta.ln())
                } else {
                    Err(HawkesError::Domain(format!(
                        "log transform requires a positive value, got {theta}"
                    )))
                }
            }
            CoordTransform::Logit => {
                if theta > 0.0 && theta < 1.0 {
                    Ok((theta / (1.0 - theta)).ln())
                } else {
                    Err(HawkesError::Domain(format!(
                        "logit transform requires a value in (0,1), got {theta}"
                    )))
                }
            }
            CoordTransform::Identity => Ok(theta),
        }
    }

    fn backward(self, z: f64) -> f64 {
        match self {
            CoordTransform::Log => z.exp(),
            CoordTransform::Logit => 1.0 / (1.0 + (-z).exp()),
            CoordTransform::Identity => z,
        }
    }

    /// d theta / d z at the natural value theta.
    fn jacobian(self, theta: f64) -> f64 {
        match self {
            CoordTransform::Log => theta,
            CoordTransform::Logit => theta * (1.0 - theta),
            CoordTransform::Identity => 1.0,
        }
    }
}

/// Transform layout for a model template: log for positive coordinates
/// (spline coefficients, constant level, alpha, beta), logit for eta,
/// identity for the unconstrained QuadraticExp thetas.
pub fn coord_transforms(template: &ModelSpec) -> Vec<CoordTransform> {
    let db = template.baseline_dim();
    let mut out = Vec::with_capacity(template.dim());
    let base = match template.baseline {
        crate::baseline::BaselineSpec::QuadraticExp { .. } => CoordTransform::Identity,
        _ => CoordTransform::Log,
    };
    out.extend(std::iter::repeat(base).take(db));
    out.push(CoordTransform::Logit);
    for _ in db + 1..template.dim() {
        out.push(CoordTransform::Log);
    }
    out
}

/// Map a natural parameter vector to free (unconstrained) coordinates.
pub fn param_transform(template: &ModelSpec, theta: &DVector<f64>) -> Result<DVector<f64>> {
    let tr = coord_transforms(template);
    if theta.len() != tr.len() {
        return Err(HawkesError::InvalidParam(format!(
            "expected {} parameters, got {}",
            tr.len(),
            theta.len()
        )));
    }
    let mut z = DVector::zeros(theta.len());
    for i in 0..theta.len() {
        z[i] = tr[i].forward(theta[i])?;
    }
    Ok(z)
}

/// Inverse of [`param_transform`].
pub fn param_untransform(template: &ModelSpec, z: &DVector<f64>) -> Result<DVector<f64>> {
    let tr = coord_transforms(template);
    if z.len() != tr.len() {
        return Err(HawkesError::InvalidParam(format!(
            "expected {} parameters, got {}",
            tr.len(),
            z.len()
        )));
    }
    Ok(DVector::from_iterator(
        z.len(),
        z.iter().zip(&tr).map(|(&zi, t)| t.backward(zi)),
    ))
}

/// Options for [`fit_mle`].
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Multistart count: one moment-informed start plus `starts - 1` jitters.
    pub starts: usize,
    pub max_iter: usize,
    /// Convergence threshold on the transformed gradient norm.
    pub grad_tol: f64,
    /// Seed for the (reproducible) start jitters.
    pub seed: u64,
    /// Likelihood truncation; 0 = exact.
    pub kernel_horizon_eps: f64,
    /// Coordinates pinned to fixed natural values (index into the canonical
    /// packing); excluded from optimisation and from the information matrix.
    pub fixed: Vec<(usize, f64)>,
    /// Uniform rescaling of the free coordinates; any positive value gives
    /// the same maximiser (used to test reparameterisation invariance).
    pub transform_scale: f64,
    /// Optional explicit starting point in natural coordinates, replacing
    /// the moment-informed start.
    pub init: Option<DVector<f64>>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            starts: 5,
            max_iter: 300,
            grad_tol: 1e-7,
            seed: 0,
            kernel_horizon_eps: 0.0,
            fixed: Vec::new(),
            transform_scale: 1.0,
            init: None,
        }
    }
}

/// Fit outcome: maximiser, diagnostics and plug-in covariance.
#[derive(Debug, Clone)]
pub struct FitResult {
    /// The fitted model (template structure with theta_hat substituted).
    pub model: ModelSpec,
    /// MLE in the natural parameterisation (fixed coordinates included).
    pub theta_hat: DVector<f64>,
    pub loglik_at_opt: f64,
    /// Observed information over the free coordinates at theta_hat.
    pub information: DMatrix<f64>,
    /// Plug-in covariance Iⁿ(θ̂)⁻¹ / n over the free coordinates; absent
    /// when the information is singular or ill-conditioned.
    pub covariance: Option<DMatrix<f64>>,
    /// sqrt(diag(covariance)); absent with it.
    pub std_errors: Option<DVector<f64>>,
    pub converged: bool,
    pub iterations: usize,
    /// Final transformed gradient norm.
    pub gradient_norm: f64,
    pub starts_used: usize,
    /// Free (optimised) coordinate indices into the canonical packing.
    pub free: Vec<usize>,
    /// Set when an iterate ran to the edge of the transformed space
    /// (|free coordinate| > 12), signalling a boundary solution.
    pub boundary_suspect: bool,
    /// Soft stationarity/regularity conditions violated at theta_hat.
    pub soft_violations: Vec<String>,
}

/// Condition-number-guarded plug-in covariance from a fit's information.
pub fn covariance_estimate(fit: &FitResult, scale_n: f64) -> Result<(DMatrix<f64>, DVector<f64>)> {
    invert_information(&fit.information, scale_n).and_then(|opt| {
        opt.ok_or_else(|| HawkesError::IllConditioned(condition_number(&fit.information)))
    })
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

fn invert_information(
    info: &DMatrix<f64>,
    scale_n: f64,
) -> Result<Option<(DMatrix<f64>, DVector<f64>)>> {
    if info.nrows() == 0 {
        return Ok(None);
    }
    let cond = condition_number(info);
    if !cond.is_finite() || cond >= 1e12 {
        return Ok(None);
    }
    let inv = match info.clone().try_inverse() {
        Some(m) => m,
        None => return Ok(None),
    };
    // symmetrise and scale
    let cov = (&inv + inv.transpose()) / (2.0 * scale_n);
    if (0..cov.nrows()).any(|i| cov[(i, i)] <= 0.0) {
        return Ok(None);
    }
    let se = DVector::from_iterator(cov.nrows(), (0..cov.nrows()).map(|i| cov[(i, i)].sqrt()));
    Ok(Some((cov, se)))
}

struct Objective<'a> {
    template: &'a ModelSpec,
    events: &'a EventSequence,
    transforms: Vec<CoordTransform>,
    free: Vec<usize>,
    full: DVector<f64>, // fixed values prefilled
    opts: LikelihoodOptions,
    scale: f64,
}

impl<'a> Objective<'a> {
    fn theta_full(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut theta = self.full.clone();
        for (k, &i) in self.free.iter().enumerate() {
            theta[i] = self.transforms[i].backward(z[k] / self.scale);
        }
        theta
    }

    /// Negative normalised log-likelihood and its gradient in z; errors from
    /// inadmissible iterates surface as +inf so the line search backs off.
    fn eval(&self, z: &DVector<f64>) -> (f64, DVector<f64>) {
        let theta = self.theta_full(z);
        let model = match self.template.unpack(&theta) {
            Ok(m) => m,
            Err(_) => return (f64::INFINITY, DVector::zeros(z.len())),
        };
        let ws = LikelihoodWorkspace::new(&model, self.events).with_options(self.opts);
        match ws.evaluate(1) {
            Ok(ev) if ev.loglik.is_finite() => {
                let mut g = DVector::zeros(z.len());
                for (k, &i) in self.free.iter().enumerate() {
                    g[k] = -ev.score[i] * self.transforms[i].jacobian(theta[i]) / self.scale;
                }
                (-ev.loglik, g)
            }
            _ => (f64::INFINITY, DVector::zeros(z.len())),
        }
    }
}

/// BFGS minimisation with a strong-Wolfe line search (c1 = 1e-4, c2 = 0.9).
/// Returns (z, f, grad_norm, iterations, converged).
fn bfgs(
    obj: &Objective<'_>,
    z0: DVector<f64>,
    max_iter: usize,
    grad_tol: f64,
) -> (DVector<f64>, f64, f64, usize, bool) {
    let d = z0.len();
    let mut z = z0;
    let (mut f, mut g) = obj.eval(&z);
    if !f.is_finite() {
        return (z, f, f64::INFINITY, 0, false);
    }
    let mut h = DMatrix::<f64>::identity(d, d);
    let mut iters = 0;
    for _ in 0..max_iter {
        let gnorm = g.norm();
        if gnorm < grad_tol {
            return (z, f, gnorm, iters, true);
        }
        iters += 1;
        let mut p = -(&h * &g);
        if p.dot(&g) >= 0.0 {
            // non-descent direction from a stale approximation: reset
            h = DMatrix::identity(d, d);
            p = -g.clone();
        }
        let (step, fnew, gnew) = match wolfe_search(obj, &z, &p, f, &g) {
            Some(t) => t,
            None => return (z, f, gnorm, iters, false),
        };
        let s = step * &p;
        let y = &gnew - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            // standard BFGS inverse-Hessian update
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            h += (rho * rho * yhy + rho) * (&s * s.transpose())
                - rho * (&hy * s.transpose() + &s * hy.transpose());
        }
        z += s;
        f = fnew;
        g = gnew;
    }
    let gnorm = g.norm();
    (z, f, gnorm, iters, gnorm < grad_tol)
}

/// Strong-Wolfe line search with bracketing and bisection/interpolation zoom.
fn wolfe_search(
    obj: &Objective<'_>,
    z: &DVector<f64>,
    p: &DVector<f64>,
    f0: f64,
    g0: &DVector<f64>,
) -> Option<(f64, f64, DVector<f64>)> {
    const C1: f64 = 1e-4;
    const C2: f64 = 0.9;
    let d0 = g0.dot(p);
    if d0 >= 0.0 {
        return None;
    }
    let phi = |a: f64| obj.eval(&(z + a * p));
    let mut a_prev = 0.0;
    let mut f_prev = f0;
    let mut a = 1.0;
    let mut result = None;
    for _ in 0..30 {
        let (fa, ga) = phi(a);
        let da = ga.dot(p);
        if !fa.is_finite() || fa > f0 + C1 * a * d0 || fa >= f_prev {
            result = Some(zoom(obj, z, p, f0, d0, a_prev, f_prev, a, C1, C2));
            break;
        }
        if da.abs() <= -C2 * d0 {
            return Some((a, fa, ga));
        }
        if da >= 0.0 {
            result = Some(zoom(obj, z, p, f0, d0, a, fa, a_prev, C1, C2));
            break;
        }
        a_prev = a;
        f_prev = fa;
        a *= 2.0;
    }
    result.flatten()
}

#[allow(clippy::too_many_arguments)]
fn zoom(
    obj: &Objective<'_>,
    z: &DVector<f64>,
    p: &DVector<f64>,
    f0: f64,
    d0: f64,
    mut lo: f64,
    mut f_lo: f64,
    mut hi: f64,
    c1: f64,
    c2: f64,
) -> Option<(f64, f64, DVector<f64>)> {
    let phi = |a: f64| obj.eval(&(z + a * p));
    for _ in 0..40 {
        let a = 0.5 * (lo + hi);
        if (hi - lo).abs() < 1e-16 * (1.0 + lo.abs()) {
            return None;
        }
        let (fa, ga) = phi(a);
        let da = ga.dot(p);
        if !fa.is_finite() || fa > f0 + c1 * a * d0 || fa >= f_lo {
            hi = a;
        } else {
            if da.abs() <= -c2 * d0 {
                return Some((a, fa, ga));
            }
            if da * (hi - lo) >= 0.0 {
                hi = lo;
            }
            lo = a;
            f_lo = fa;
        }
    }
    None
}

/// Moment-informed start: constant baseline level count/(2n) (giving
/// eta0 = 0.5), family-default shape, mean stretched gap as scale.
fn moment_start(template: &ModelSpec, events: &EventSequence) -> DVector<f64> {
    let n = events.scale_n;
    let count = events.count().max(2) as f64;
    let nu0 = (count / (2.0 * n)).max(1e-3);
    let db = template.baseline_dim();
    let d = template.dim();
    let mut theta = DVector::zeros(d);
    match template.baseline {
        crate::baseline::BaselineSpec::QuadraticExp { .. } => {
            theta[0] = nu0.ln();
            theta[1] = -2.0;
            theta[2] = -2.0;
        }
        _ => {
            for i in 0..db {
                theta[i] = nu0;
            }
        }
    }
    theta[db] = 0.5; // eta0 = 1 - n * int nu0 / count
    let mean_gap = n / count;
    if template.kernel.family.has_alpha() {
        theta[db + 1] = match template.kernel.family {
            // keep the GPD start inside the soft alpha < 1/2 region
            crate::kernel::KernelFamily::GeneralizedPareto => 0.25,
            _ => 1.0,
        };
    }
    theta[d - 1] = mean_gap.max(1e-3);
    theta
}

/// Maximum-likelihood fit by multistart BFGS in transformed coordinates.
pub fn fit_mle(events: &EventSequence, template: &ModelSpec, opts: &FitOptions) -> Result<FitResult> {
    let d = template.dim();
    if events.count() < d {
        return Err(HawkesError::Degenerate(format!(
            "{} events cannot identify {} parameters",
            events.count(),
            d
        )));
    }
    if !(opts.transform_scale > 0.0) {
        return Err(HawkesError::InvalidSpec(
            "transform_scale must be positive".into(),
        ));
    }
    for &(i, _) in &opts.fixed {
        if i >= d {
            return Err(HawkesError::InvalidParam(format!(
                "fixed coordinate index {i} out of range for dimension {d}"
            )));
        }
    }
    let transforms = coord_transforms(template);
    let free: Vec<usize> = (0..d)
        .filter(|i| !opts.fixed.iter().any(|&(j, _)| j == *i))
        .collect();
    if free.is_empty() {
        return Err(HawkesError::InvalidSpec(
            "all coordinates fixed; nothing to fit".into(),
        ));
    }
    let mut full = DVector::zeros(d);
    for &(i, v) in &opts.fixed {
        full[i] = v;
    }
    let lik_opts = LikelihoodOptions {
        kernel_horizon_eps: opts.kernel_horizon_eps,
    };
    let obj = Objective {
        template,
        events,
        transforms: transforms.clone(),
        free: free.clone(),
        full: full.clone(),
        opts: lik_opts,
        scale: opts.transform_scale,
    };

    // assemble reproducible starts in natural coordinates
    let base_start = opts
        .init
        .clone()
        .unwrap_or_else(|| moment_start(template, events));
    let mut starts_nat = vec![base_start.clone()];
    let mut rng = derive_stream(opts.seed, &[0x5354_4152_5453]); // "STARTS"
    for _ in 1..opts.starts.max(1) {
        let mut s = base_start.clone();
        for i in 0..d {
            let u: f64 = rng.gen_range(-1.0..1.0);
            match transforms[i] {
                CoordTransform::Identity => s[i] += 0.3 * u,
                CoordTransform::Logit => {
                    s[i] = (s[i] * (1.0 + 0.3 * u)).clamp(0.02, 0.95);
                }
                CoordTransform::Log => s[i] *= 1.0 + 0.3 * u,
            }
        }
        starts_nat.push(s);
    }

    let mut best: Option<(DVector<f64>, f64, f64, usize, bool)> = None;
    let mut starts_used = 0;
    for s in &starts_nat {
        let mut z0 = DVector::zeros(free.len());
        let mut ok = true;
        for (k, &i) in free.iter().enumerate() {
            match transforms[i].forward(s[i]) {
                Ok(v) => z0[k] = v * opts.transform_scale,
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        starts_used += 1;
        let run = bfgs(&obj, z0, opts.max_iter, opts.grad_tol);
        if !run.1.is_finite() {
            continue;
        }
        let better = match &best {
            None => true,
            Some(b) => run.1 < b.1 || (run.4 && !b.4 && run.1 < b.1 + 1e-10),
        };
        if better {
            best = Some(run);
        }
    }
    let (z_best, f_best, gnorm, iterations, converged) = best.ok_or_else(|| {
        HawkesError::NonConvergence("every start failed the line search".into())
    })?;

    let theta_hat = obj.theta_full(&z_best);
    let model = template.unpack(&theta_hat)?;
    let boundary_suspect = z_best
        .iter()
        .any(|&zi| (zi / opts.transform_scale).abs() > 12.0);
    let soft_violations: Vec<String> = model
        .kernel
        .validate(2)
        .checks
        .iter()
        .filter(|c| !c.hard && !c.satisfied)
        .map(|c| format!("{}: {}", c.condition, c.detail))
        .collect();

    // observed information restricted to the free coordinates
    let ws = LikelihoodWorkspace::new(&model, events).with_options(lik_opts);
    let full_info = ws.evaluate(2)?.information;
    let mut information = DMatrix::zeros(free.len(), free.len());
    for (a, &i) in free.iter().enumerate() {
        for (b, &j) in free.iter().enumerate() {
            information[(a, b)] = full_info[(i, j)];
        }
    }
    let (covariance, std_errors) = match invert_information(&information, events.scale_n)? {
        Some((c, s)) => (Some(c), Some(s)),
        None => (None, None),
    };

    Ok(FitResult {
        model,
        theta_hat,
        loglik_at_opt: -f_best,
        information,
        covariance,
        std_errors,
        converged,
        iterations,
        gradient_norm: gnorm,
        starts_used,
        free,
        boundary_suspect,
        soft_violations,
    })
}

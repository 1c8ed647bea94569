//! Exact simulation of the non-stationary Hawkes process by Ogata-style
//! thinning, plus a constant-baseline stationary simulator with burn-in.
//!
//! The thinning envelope at time t is nu_bar + sum over past events of
//! sup_{u >= elapsed} g(u), which dominates the intensity over the entire
//! future of the current history. The envelope is refreshed at every
//! accepted event and after every elapsed half expected waiting time.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::error::{HawkesError, Result};
use crate::kernel::Kernel;
use crate::model::{EventSequence, ModelSpec};
use crate::rng::derive_stream;

/// Simulation tuning knobs.
#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    /// Drop kernel contributions from events whose elapsed stretched time
    /// exceeds the 1 - eps kernel quantile. 0 disables truncation (exact).
    pub kernel_horizon_eps: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            kernel_horizon_eps: 0.0,
        }
    }
}

fn kernel_horizon(kernel: &Kernel, eps: f64) -> f64 {
    if eps > 0.0 && kernel.params.eta > 0.0 {
        kernel.quantile(1.0 - eps)
    } else {
        f64::INFINITY
    }
}

/// Core thinning loop over [0, total]; `nu` is the deterministic baseline on
/// the stretched domain, bounded above by `nu_bar`.
fn thinning_loop(
    nu: &dyn Fn(f64) -> f64,
    nu_bar: f64,
    kernel: &Kernel,
    total: f64,
    cap: usize,
    horizon: f64,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<f64>> {
    if kernel.params.eta > 0.0 && !kernel.sup_after(0.0).is_finite() {
        return Err(HawkesError::InvalidSpec(
            "kernel density is unbounded at the origin (alpha < 1); no finite thinning \
             envelope exists immediately after an event"
                .into(),
        ));
    }
    let mut events: Vec<f64> = Vec::new();
    // index of the oldest event still inside the kernel horizon
    let mut window_start = 0usize;
    let mut t = 0.0f64;
    while t < total {
        // envelope refresh (anchor at t)
        while window_start < events.len() && t - events[window_start] > horizon {
            window_start += 1;
        }
        let mut m = nu_bar;
        for &s in &events[window_start..] {
            m += kernel.sup_after(t - s);
        }
        let refresh = 0.5 / m;
        let mut local = 0.0f64;
        loop {
            let delta = -rng.gen::<f64>().ln() / m;
            if local + delta > refresh {
                t += refresh;
                break;
            }
            local += delta;
            let cand = t + local;
            if cand > total {
                return Ok(events);
            }
            // left-limit intensity at the candidate
            let mut lam = nu(cand);
            for &s in events[window_start..].iter().rev() {
                let elapsed = cand - s;
                if elapsed > horizon {
                    break;
                }
                lam += kernel.density(elapsed);
            }
            debug_assert!(
                lam <= m * (1.0 + 1e-9),
                "intensity {lam} exceeds envelope {m} at t = {cand}"
            );
            if rng.gen::<f64>() * m <= lam {
                events.push(cand);
                if events.len() > cap {
                    return Err(HawkesError::Explosion {
                        count: events.len(),
                        cap,
                    });
                }
                t = cand;
                break;
            }
        }
    }
    Ok(events)
}

/// Simulate the non-stationary process with intensity
/// nu(t/n) + sum g(t - t_i) on [0, n], returned on the unit domain.
/// Reproducible: identical (model, n, seed) give identical output.
pub fn simulate_hawkes(model: &ModelSpec, n: f64, seed: u64) -> Result<EventSequence> {
    simulate_hawkes_opts(model, n, seed, &SimOptions::default())
}

pub fn simulate_hawkes_opts(
    model: &ModelSpec,
    n: f64,
    seed: u64,
    opts: &SimOptions,
) -> Result<EventSequence> {
    if !(n > 0.0) {
        return Err(HawkesError::InvalidSpec(format!("n must be positive, got {n}")));
    }
    let report = model.kernel.validate(1);
    if !report.hard_ok() {
        return Err(HawkesError::InvalidParam(format!(
            "kernel fails hard constraints: {:?}",
            report
                .checks
                .iter()
                .filter(|c| c.hard && !c.satisfied)
                .map(|c| c.condition.clone())
                .collect::<Vec<_>>()
        )));
    }
    let (nu_low, nu_bar) = model.baseline.bounds()?;
    debug_assert!(nu_low > 0.0);
    let eta = model.kernel.params.eta;
    let cap = (50.0 * n * nu_bar / (1.0 - eta)).ceil() as usize;
    let horizon = kernel_horizon(&model.kernel, opts.kernel_horizon_eps);
    let mut rng = derive_stream(seed, &[]);
    let baseline = &model.baseline;
    let events = thinning_loop(
        &|t| baseline.value((t / n).min(1.0)),
        nu_bar,
        &model.kernel,
        n,
        cap,
        horizon,
        &mut rng,
    )?;
    EventSequence::new(events.iter().map(|&s| s / n).collect(), n)
}

/// A stationary-simulation path: burn-in events plus the observation window.
#[derive(Debug, Clone)]
pub struct StationaryPath {
    /// Event times on [0, burn_in + horizon]; the window is the suffix
    /// beyond burn_in.
    pub all_times: Vec<f64>,
    pub burn_in: f64,
    pub horizon: f64,
}

impl StationaryPath {
    /// Events inside the observation window, shifted to [0, horizon].
    pub fn window_times(&self) -> Vec<f64> {
        self.all_times
            .iter()
            .filter(|&&t| t >= self.burn_in)
            .map(|&t| t - self.burn_in)
            .collect()
    }
}

/// Burn-in long enough that the expected residual influence of the dropped
/// pre-history, eta (1 - Gtilde(b)) / (1 - eta), is below 1e-6 nu.
pub fn default_burn_in(nu_const: f64, kernel: &Kernel) -> f64 {
    let eta = kernel.params.eta;
    if eta == 0.0 {
        return 0.0;
    }
    let target_tail = (1e-6 * nu_const * (1.0 - eta) / eta).min(0.5);
    kernel.quantile(1.0 - target_tail)
}

/// Simulate an approximately stationary Hawkes path with constant baseline,
/// keeping the burn-in prefix for later intensity evaluation.
pub fn simulate_stationary_path(
    nu_const: f64,
    kernel: &Kernel,
    burn_in: Option<f64>,
    horizon: f64,
    seed: u64,
    opts: &SimOptions,
) -> Result<StationaryPath> {
    if !(nu_const > 0.0) {
        return Err(HawkesError::InvalidSpec(format!(
            "constant baseline must be positive, got {nu_const}"
        )));
    }
    if !(horizon > 0.0) {
        return Err(HawkesError::InvalidSpec(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let burn_in = burn_in.unwrap_or_else(|| default_burn_in(nu_const, kernel));
    let total = burn_in + horizon;
    let eta = kernel.params.eta;
    let cap = (50.0 * total * nu_const / (1.0 - eta)).ceil() as usize;
    let hor = kernel_horizon(kernel, opts.kernel_horizon_eps);
    let mut rng = derive_stream(seed, &[]);
    let events = thinning_loop(&|_| nu_const, nu_const, kernel, total, cap, hor, &mut rng)?;
    Ok(StationaryPath {
        all_times: events,
        burn_in,
        horizon,
    })
}

/// Stationary simulation returning only the observation window, as an
/// [`EventSequence`] with scale equal to the horizon.
pub fn simulate_stationary(
    nu_const: f64,
    kernel: &Kernel,
    burn_in: Option<f64>,
    horizon: f64,
    seed: u64,
) -> Result<EventSequence> {
    let path =
        simulate_stationary_path(nu_const, kernel, burn_in, horizon, seed, &SimOptions::default())?;
    EventSequence::new(
        path.window_times().iter().map(|&t| t / horizon).collect(),
        horizon,
    )
}

/// Intensity at unit-domain time t (left limit: events at exactly t are
/// excluded): nu(t) + sum_{t_i < t} g(n (t - t_i)).
pub fn intensity_at(model: &ModelSpec, events: &EventSequence, t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(HawkesError::Domain(format!("t = {t} outside [0,1]")));
    }
    let n = events.scale_n;
    let mut lam = model.baseline.value(t);
    for &ti in &events.times {
        if ti >= t {
            break;
        }
        lam += model.kernel.density(n * (t - ti));
    }
    Ok(lam)
}

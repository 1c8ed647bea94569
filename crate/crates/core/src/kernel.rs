//! Excitation-kernel families g(t) = eta * gtilde(t), where gtilde is a
//! probability density on [0, inf) and eta is the branching ratio.
//!
//! Each family provides the density, CDF, analytic parameter derivatives to
//! order 2 (needed by the score and observed information), a forward-looking
//! supremum bound for thinning simulation, and a regularity-condition report.
//!
//! Parameter layout for gradients and Hessians is (eta, alpha, beta) for the
//! three-parameter families and (eta, beta) for the exponential.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::special::{adaptive_quadrature, digamma, ln_gamma, trigamma};

/// Excitation-kernel family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelFamily {
    /// gtilde(t) = (1/beta) exp(-t/beta) (scale parameterisation)
    Exponential,
    /// gtilde(t) = (1/beta) (1 + alpha t / beta)^{-(1/alpha + 1)}
    GeneralizedPareto,
    /// gtilde(t) = t^{alpha-1} exp(-t/beta) / (Gamma(alpha) beta^alpha)
    Gamma,
    /// gtilde(t) = (alpha/beta) (t/beta)^{alpha-1} exp(-(t/beta)^alpha)
    Weibull,
}

impl KernelFamily {
    /// Number of kernel parameters including eta.
    pub fn dim(&self) -> usize {
        match self {
            KernelFamily::Exponential => 2,
            _ => 3,
        }
    }

    pub fn has_alpha(&self) -> bool {
        !matches!(self, KernelFamily::Exponential)
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::Exponential => "exp",
            KernelFamily::GeneralizedPareto => "gpd",
            KernelFamily::Gamma => "gamma",
            KernelFamily::Weibull => "weibull",
        }
    }
}

/// Branching ratio plus shape/scale parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    /// Branching ratio, 0 < eta < 1.
    pub eta: f64,
    /// Shape parameter; `None` for the exponential family.
    pub alpha: Option<f64>,
    /// Scale parameter in time units.
    pub beta: f64,
}

/// A validated (family, params) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub family: KernelFamily,
    pub params: KernelParams,
}

/// Density value with parameter derivatives in (eta[, alpha], beta) order.
#[derive(Debug, Clone, Copy)]
pub struct KernelDerivs {
    pub value: f64,
    pub grad: [f64; 3],
    pub hess: [[f64; 3]; 3],
    pub dim: usize,
    /// Density (or a requested derivative) is unbounded at this point.
    pub singular: bool,
}

/// CDF value with parameter derivatives, same layout as [`KernelDerivs`].
#[derive(Debug, Clone, Copy)]
pub struct CdfDerivs {
    pub value: f64,
    pub grad: [f64; 3],
    pub hess: [[f64; 3]; 3],
    pub dim: usize,
}

/// Outcome of checking one regularity condition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub condition: String,
    pub satisfied: bool,
    pub hard: bool,
    pub detail: String,
}

/// Report from [`Kernel::validate`]; soft violations are warnings only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub checks: Vec<ConditionCheck>,
    pub notes: Vec<String>,
}

impl ConstraintReport {
    pub fn hard_ok(&self) -> bool {
        self.checks.iter().all(|c| !c.hard || c.satisfied)
    }

    pub fn all_ok(&self) -> bool {
        self.checks.iter().all(|c| c.satisfied)
    }
}

impl Kernel {
    pub fn new(family: KernelFamily, params: KernelParams) -> Result<Self> {
        // eta = 0 is admitted as the Poisson submodel boundary; eta >= 1 is
        // a hard error (explosive process)
        if !(params.eta >= 0.0 && params.eta < 1.0) {
            return Err(HawkesError::InvalidParam(format!(
                "eta must lie in [0, 1), got {}",
                params.eta
            )));
        }
        if !(params.beta > 0.0) {
            return Err(HawkesError::InvalidParam(format!(
                "beta must be positive, got {}",
                params.beta
            )));
        }
        match (family.has_alpha(), params.alpha) {
            (true, Some(a)) if a > 0.0 => {}
            (true, Some(a)) => {
                return Err(HawkesError::InvalidParam(format!(
                    "alpha must be positive, got {a}"
                )))
            }
            (true, None) => {
                return Err(HawkesError::InvalidParam(format!(
                    "family {} requires alpha",
                    family.name()
                )))
            }
            (false, Some(_)) => {
                return Err(HawkesError::InvalidParam(
                    "exponential family takes no alpha".into(),
                ))
            }
            (false, None) => {}
        }
        Ok(Kernel { family, params })
    }

    pub fn dim(&self) -> usize {
        self.family.dim()
    }

    fn alpha(&self) -> f64 {
        self.params.alpha.unwrap_or(f64::NAN)
    }

    /// Normalised density gtilde(t). Returns +inf at t=0 for Gamma/Weibull
    /// with alpha < 1.
    pub fn density_normalized(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        let b = self.params.beta;
        match self.family {
            KernelFamily::Exponential => (-t / b).exp() / b,
            KernelFamily::GeneralizedPareto => {
                let a = self.alpha();
                let u = 1.0 + a * t / b;
                (-(1.0 / a + 1.0) * u.ln()).exp() / b
            }
            KernelFamily::Gamma => {
                let a = self.alpha();
                if t == 0.0 {
                    return match a.partial_cmp(&1.0).unwrap() {
                        std::cmp::Ordering::Less => f64::INFINITY,
                        std::cmp::Ordering::Equal => 1.0 / b,
                        std::cmp::Ordering::Greater => 0.0,
                    };
                }
                ((a - 1.0) * t.ln() - t / b - ln_gamma(a) - a * b.ln()).exp()
            }
            KernelFamily::Weibull => {
                let a = self.alpha();
                if t == 0.0 {
                    return match a.partial_cmp(&1.0).unwrap() {
                        std::cmp::Ordering::Less => f64::INFINITY,
                        std::cmp::Ordering::Equal => 1.0 / b,
                        std::cmp::Ordering::Greater => 0.0,
                    };
                }
                let w = (t / b).powf(a);
                if w > 700.0 {
                    return 0.0;
                }
                a / b * (t / b).powf(a - 1.0) * (-w).exp()
            }
        }
    }

    /// Unnormalised density g(t) = eta * gtilde(t).
    pub fn density(&self, t: f64) -> f64 {
        if self.params.eta == 0.0 {
            // avoid 0 * inf at a singular origin
            return 0.0;
        }
        self.params.eta * self.density_normalized(t)
    }

    /// Density with parameter gradient and Hessian up to `order`.
    pub fn density_derivs(&self, t: f64, order: u8) -> Result<KernelDerivs> {
        if t < 0.0 {
            return Err(HawkesError::Domain(format!("negative time {t}")));
        }
        let dim = self.dim();
        let eta = self.params.eta;
        let b = self.params.beta;
        let gt = self.density_normalized(t);
        let mut out = KernelDerivs {
            value: self.density(t),
            grad: [0.0; 3],
            hess: [[0.0; 3]; 3],
            dim,
            singular: false,
        };
        if !gt.is_finite() {
            out.singular = true;
            return Ok(out);
        }
        if order == 0 {
            return Ok(out);
        }
        // log-density derivatives s_x = d/dx ln gtilde and their derivatives
        // ds_xy = d/dy s_x; then d gtilde = s gtilde and
        // dd gtilde = (s_x s_y + ds_xy) gtilde.
        let (s_a, s_b, ds_aa, ds_bb, ds_ab, singular) = match self.family {
            KernelFamily::Exponential => {
                let s_b = -1.0 / b + t / (b * b);
                let ds_bb = 1.0 / (b * b) - 2.0 * t / (b * b * b);
                (0.0, s_b, 0.0, ds_bb, 0.0, false)
            }
            KernelFamily::GeneralizedPareto => {
                let a = self.alpha();
                let u = 1.0 + a * t / b;
                let bt = b + a * t;
                let v = t / bt;
                let lu = u.ln();
                let s_a = lu / (a * a) - (a + 1.0) * v / a;
                let s_b = (t - b) / (b * bt);
                let ds_aa =
                    v / (a * a) - 2.0 * lu / (a * a * a) + t * (b + a * t * (a + 2.0)) / (a * a * bt * bt);
                let ds_bb = (b * b - 2.0 * b * t - a * t * t) / (b * b * bt * bt);
                let ds_ab = t * (b - t) / (b * bt * bt);
                (s_a, s_b, ds_aa, ds_bb, ds_ab, false)
            }
            KernelFamily::Gamma => {
                let a = self.alpha();
                if t == 0.0 {
                    // gtilde may be finite here (alpha >= 1) but the alpha
                    // derivative involves ln t and diverges
                    (0.0, 0.0, 0.0, 0.0, 0.0, gt != 0.0)
                } else {
                    let s_a = t.ln() - b.ln() - digamma(a);
                    let s_b = t / (b * b) - a / b;
                    let ds_aa = -trigamma(a);
                    let ds_bb = a / (b * b) - 2.0 * t / (b * b * b);
                    let ds_ab = -1.0 / b;
                    (s_a, s_b, ds_aa, ds_bb, ds_ab, false)
                }
            }
            KernelFamily::Weibull => {
                let a = self.alpha();
                if t == 0.0 {
                    (0.0, 0.0, 0.0, 0.0, 0.0, gt != 0.0)
                } else {
                    let l = (t / b).ln();
                    let w = (t / b).powf(a);
                    let s_a = 1.0 / a + l * (1.0 - w);
                    let s_b = a / b * (w - 1.0);
                    let ds_aa = -1.0 / (a * a) - w * l * l;
                    let ds_bb = (a - a * (1.0 + a) * w) / (b * b);
                    let ds_ab = (w - 1.0) / b + a * l * w / b;
                    (s_a, s_b, ds_aa, ds_bb, ds_ab, false)
                }
            }
        };
        out.singular = singular;
        // map (alpha, beta) onto slots; exponential has no alpha slot
        let (ia, ib) = if dim == 3 { (1, 2) } else { (usize::MAX, 1) };
        out.grad[0] = gt;
        if dim == 3 {
            out.grad[ia] = eta * s_a * gt;
        }
        out.grad[ib] = eta * s_b * gt;
        if order >= 2 {
            if dim == 3 {
                out.hess[0][ia] = s_a * gt;
                out.hess[ia][0] = out.hess[0][ia];
                out.hess[ia][ia] = eta * (s_a * s_a + ds_aa) * gt;
                out.hess[ia][ib] = eta * (s_a * s_b + ds_ab) * gt;
                out.hess[ib][ia] = out.hess[ia][ib];
            }
            out.hess[0][ib] = s_b * gt;
            out.hess[ib][0] = out.hess[0][ib];
            out.hess[ib][ib] = eta * (s_b * s_b + ds_bb) * gt;
        }
        Ok(out)
    }

    /// Normalised CDF Gtilde(t).
    pub fn cdf_normalized(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        let b = self.params.beta;
        match self.family {
            KernelFamily::Exponential => -(-t / b).exp_m1(),
            KernelFamily::GeneralizedPareto => {
                let a = self.alpha();
                let u = 1.0 + a * t / b;
                -(-u.ln() / a).exp_m1()
            }
            KernelFamily::Gamma => crate::special::gamma_p(self.alpha(), t / b),
            KernelFamily::Weibull => {
                let w = (t / b).powf(self.alpha());
                if w > 700.0 {
                    1.0
                } else {
                    -(-w).exp_m1()
                }
            }
        }
    }

    /// CDF of the unnormalised kernel, G(t) = eta * Gtilde(t) in [0, eta].
    pub fn cdf(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(HawkesError::Domain(format!("negative time {t}")));
        }
        Ok(self.params.eta * self.cdf_normalized(t))
    }

    /// CDF gradient over (eta[, alpha], beta).
    pub fn cdf_grad(&self, t: f64) -> Result<[f64; 3]> {
        Ok(self.cdf_derivs(t, 1)?.grad)
    }

    /// CDF with parameter gradient and Hessian up to `order`.
    pub fn cdf_derivs(&self, t: f64, order: u8) -> Result<CdfDerivs> {
        if t < 0.0 {
            return Err(HawkesError::Domain(format!("negative time {t}")));
        }
        let dim = self.dim();
        let eta = self.params.eta;
        let b = self.params.beta;
        let gv = self.cdf_normalized(t);
        let mut out = CdfDerivs {
            value: eta * gv,
            grad: [0.0; 3],
            hess: [[0.0; 3]; 3],
            dim,
        };
        if order == 0 || t == 0.0 {
            return Ok(out);
        }
        // (d_a, d_b, dd_aa, dd_bb, dd_ab) of Gtilde
        let (d_a, d_b, dd_aa, dd_bb, dd_ab) = match self.family {
            KernelFamily::Exponential => {
                let e = (-t / b).exp();
                let d_b = -t / (b * b) * e;
                let dd_bb = (2.0 * t / (b * b * b) - t * t / (b * b * b * b)) * e;
                (0.0, d_b, 0.0, dd_bb, 0.0)
            }
            KernelFamily::GeneralizedPareto => {
                // survival E = u^{-1/alpha} = e^h, Gtilde = 1 - E
                let a = self.alpha();
                let u = 1.0 + a * t / b;
                let bt = b + a * t;
                let v = t / bt;
                let lu = u.ln();
                let e = (-lu / a).exp();
                let h_a = lu / (a * a) - v / a;
                let h_b = t / (b * bt);
                let h_aa = 2.0 * v / (a * a) - 2.0 * lu / (a * a * a) + t * t / (a * bt * bt);
                let h_bb = -t * (2.0 * b + a * t) / (b * b * bt * bt);
                let h_ab = -t / (a * b * bt) + t / (a * bt * bt);
                (
                    -e * h_a,
                    -e * h_b,
                    -e * (h_aa + h_a * h_a),
                    -e * (h_bb + h_b * h_b),
                    -e * (h_ab + h_a * h_b),
                )
            }
            KernelFamily::Gamma => {
                let a = self.alpha();
                let gt = self.density_normalized(t);
                let d_b = -t / b * gt;
                let dd_bb = gt * t / (b * b) * (1.0 + a - t / b);
                let (d_a, dd_aa) = self.gamma_cdf_alpha_derivs(t, order)?;
                let s_a = if gt > 0.0 {
                    t.ln() - b.ln() - digamma(a)
                } else {
                    0.0
                };
                let dd_ab = -t / b * s_a * gt;
                (d_a, d_b, dd_aa, dd_bb, dd_ab)
            }
            KernelFamily::Weibull => {
                let a = self.alpha();
                let l = (t / b).ln();
                let w = (t / b).powf(a);
                if w > 700.0 {
                    (0.0, 0.0, 0.0, 0.0, 0.0)
                } else {
                    let e = (-w).exp();
                    let w_a = w * l;
                    let w_b = -a * w / b;
                    let w_aa = w * l * l;
                    let w_bb = a * (a + 1.0) * w / (b * b);
                    let w_ab = -w * (1.0 + a * l) / b;
                    (
                        e * w_a,
                        e * w_b,
                        e * (w_aa - w_a * w_a),
                        e * (w_bb - w_b * w_b),
                        e * (w_ab - w_a * w_b),
                    )
                }
            }
        };
        let (ia, ib) = if dim == 3 { (1, 2) } else { (usize::MAX, 1) };
        out.grad[0] = gv;
        if dim == 3 {
            out.grad[ia] = eta * d_a;
        }
        out.grad[ib] = eta * d_b;
        if order >= 2 {
            if dim == 3 {
                out.hess[0][ia] = d_a;
                out.hess[ia][0] = d_a;
                out.hess[ia][ia] = eta * dd_aa;
                out.hess[ia][ib] = eta * dd_ab;
                out.hess[ib][ia] = eta * dd_ab;
            }
            out.hess[0][ib] = d_b;
            out.hess[ib][0] = d_b;
            out.hess[ib][ib] = eta * dd_bb;
        }
        Ok(out)
    }

    /// Alpha derivatives of the Gamma CDF by adaptive quadrature of the
    /// closed-form density derivatives over [0, t]. No elementary closed form
    /// exists for the shape derivative of the incomplete gamma.
    fn gamma_cdf_alpha_derivs(&self, t: f64, order: u8) -> Result<(f64, f64)> {
        let a = self.alpha();
        let b = self.params.beta;
        let psi = digamma(a);
        let psi1 = trigamma(a);
        // beyond this point the integrand carries negligible mass
        let cut = b * (a + 60.0 + 20.0 * a.sqrt());
        let upper = t.min(cut);
        let dens = |s: f64| {
            ((a - 1.0) * s.ln() - s / b - ln_gamma(a) - a * b.ln()).exp()
        };
        let d_a = adaptive_quadrature(
            &|s: f64| (s.ln() - b.ln() - psi) * dens(s),
            0.0,
            upper,
            1e-10,
        )?;
        let dd_aa = if order >= 2 {
            adaptive_quadrature(
                &|s: f64| {
                    let c = s.ln() - b.ln() - psi;
                    (c * c - psi1) * dens(s)
                },
                0.0,
                upper,
                1e-10,
            )?
        } else {
            0.0
        };
        Ok((d_a, dd_aa))
    }

    /// Mode of the unnormalised kernel (0 for monotone-decreasing families).
    pub fn mode(&self) -> f64 {
        match self.family {
            KernelFamily::Exponential | KernelFamily::GeneralizedPareto => 0.0,
            KernelFamily::Gamma => {
                let a = self.alpha();
                if a > 1.0 {
                    self.params.beta * (a - 1.0)
                } else {
                    0.0
                }
            }
            KernelFamily::Weibull => {
                let a = self.alpha();
                if a > 1.0 {
                    self.params.beta * ((a - 1.0) / a).powf(1.0 / a)
                } else {
                    0.0
                }
            }
        }
    }

    /// sup_{u >= s} g(u): the thinning envelope contribution of an event
    /// whose elapsed stretched time is s. Nonincreasing in s; +inf at s=0
    /// for kernels unbounded at the origin.
    pub fn sup_after(&self, s: f64) -> f64 {
        debug_assert!(s >= 0.0);
        let m = self.mode();
        if s < m {
            self.density(m)
        } else {
            self.density(s)
        }
    }

    /// Quantile of the normalised kernel, inverse of `cdf_normalized`.
    pub fn quantile(&self, p: f64) -> f64 {
        assert!((0.0..1.0).contains(&p));
        let b = self.params.beta;
        match self.family {
            KernelFamily::Exponential => -b * (1.0 - p).ln(),
            KernelFamily::GeneralizedPareto => {
                let a = self.alpha();
                b * ((1.0 - p).powf(-a) - 1.0) / a
            }
            KernelFamily::Weibull => b * (-(1.0 - p).ln()).powf(1.0 / self.alpha()),
            KernelFamily::Gamma => {
                use statrs::distribution::ContinuousCDF;
                let d = statrs::distribution::Gamma::new(self.alpha(), 1.0 / b).unwrap();
                d.inverse_cdf(p)
            }
        }
    }

    /// Mean of the normalised kernel; +inf for GPD with alpha >= 1.
    pub fn mean_normalized(&self) -> f64 {
        let b = self.params.beta;
        match self.family {
            KernelFamily::Exponential => b,
            KernelFamily::GeneralizedPareto => {
                let a = self.alpha();
                if a < 1.0 {
                    b / (1.0 - a)
                } else {
                    f64::INFINITY
                }
            }
            KernelFamily::Gamma => self.alpha() * b,
            KernelFamily::Weibull => b * (ln_gamma(1.0 + 1.0 / self.alpha())).exp(),
        }
    }

    /// Check the [C1]-eta range plus the [C3](p)/[C4](p) integrability
    /// restrictions on the shape parameter. Soft violations are warnings;
    /// only positivity and the eta range are hard.
    pub fn validate(&self, p_order: u32) -> ConstraintReport {
        assert!(p_order >= 1);
        let p = p_order as f64;
        let mut checks = vec![
            ConditionCheck {
                condition: "eta-range".into(),
                satisfied: self.params.eta >= 0.0 && self.params.eta < 1.0,
                hard: true,
                detail: format!("0 <= eta < 1, eta = {}", self.params.eta),
            },
            ConditionCheck {
                condition: "[C1]-eta".into(),
                satisfied: self.params.eta > 0.0 && self.params.eta < 1.0,
                hard: false,
                detail: format!("0 < eta < 1 strictly, eta = {}", self.params.eta),
            },
            ConditionCheck {
                condition: "positivity".into(),
                satisfied: self.params.beta > 0.0
                    && self.params.alpha.map_or(true, |a| a > 0.0),
                hard: true,
                detail: "alpha > 0, beta > 0".into(),
            },
        ];
        let mut notes = Vec::new();
        match self.family {
            KernelFamily::Exponential => {
                checks.push(ConditionCheck {
                    condition: format!("[C3]({p_order})"),
                    satisfied: true,
                    hard: false,
                    detail: "exponential kernel: no shape restriction".into(),
                });
                checks.push(ConditionCheck {
                    condition: format!("[C4]({p_order})"),
                    satisfied: true,
                    hard: false,
                    detail: "exponential kernel: no shape restriction".into(),
                });
            }
            KernelFamily::GeneralizedPareto => {
                let a = self.alpha();
                checks.push(ConditionCheck {
                    condition: format!("[C3]({p_order})"),
                    satisfied: a < 0.5,
                    hard: false,
                    detail: format!("requires alpha < 1/2, alpha = {a}"),
                });
                checks.push(ConditionCheck {
                    condition: format!("[C4]({p_order})"),
                    satisfied: a < 1.0 / 3.0,
                    hard: false,
                    detail: format!("requires alpha < 1/3, alpha = {a}"),
                });
            }
            KernelFamily::Gamma | KernelFamily::Weibull => {
                let a = self.alpha();
                let bound = 1.0 - 1.0 / p;
                for cond in ["[C3]", "[C4]"] {
                    checks.push(ConditionCheck {
                        condition: format!("{cond}({p_order})"),
                        satisfied: a > bound,
                        hard: false,
                        detail: format!("requires alpha > 1 - 1/p = {bound}, alpha = {a}"),
                    });
                }
                notes.push(
                    "shape bound alpha > 1 - 1/p is the stricter of two published statements \
                     (the other being alpha > 1/p); the stricter one is enforced"
                        .into(),
                );
            }
        }
        ConstraintReport { checks, notes }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.params.alpha {
            Some(a) => write!(
                f,
                "{}({}, {}, {})",
                self.family.name(),
                self.params.eta,
                a,
                self.params.beta
            ),
            None => write!(f, "{}({}, {})", self.family.name(), self.params.eta, self.params.beta),
        }
    }
}

impl FromStr for Kernel {
    type Err = HawkesError;

    /// Text form: `gpd(0.5, 0.25, 0.75)`, `gamma(0.5, 2, 0.5)`,
    /// `weibull(0.5, 2, 1.12838)`, `exp(0.5, 2.0)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let open = s
            .find('(')
            .ok_or_else(|| HawkesError::Parse(format!("kernel spec `{s}` missing '('")))?;
        if !s.ends_with(')') {
            return Err(HawkesError::Parse(format!("kernel spec `{s}` missing ')'")));
        }
        let name = s[..open].trim().to_ascii_lowercase();
        let family = match name.as_str() {
            "exp" | "exponential" => KernelFamily::Exponential,
            "gpd" | "pareto" => KernelFamily::GeneralizedPareto,
            "gamma" => KernelFamily::Gamma,
            "weibull" => KernelFamily::Weibull,
            _ => {
                return Err(HawkesError::Parse(format!(
                    "unknown kernel family `{name}`"
                )))
            }
        };
        let args: Vec<f64> = s[open + 1..s.len() - 1]
            .split(',')
            .map(|a| {
                a.trim()
                    .parse::<f64>()
                    .map_err(|e| HawkesError::Parse(format!("bad kernel argument `{a}`: {e}")))
            })
            .collect::<Result<_>>()?;
        let params = match (family.has_alpha(), args.len()) {
            (false, 2) => KernelParams {
                eta: args[0],
                alpha: None,
                beta: args[1],
            },
            (true, 3) => KernelParams {
                eta: args[0],
                alpha: Some(args[1]),
                beta: args[2],
            },
            (_, k) => {
                return Err(HawkesError::Parse(format!(
                    "kernel family `{name}` expects {} arguments, got {k}",
                    family.dim()
                )))
            }
        };
        Kernel::new(family, params)
    }
}

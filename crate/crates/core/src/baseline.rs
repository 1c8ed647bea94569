//! Time-varying baseline intensity families on the unit interval.
//!
//! Three variants: a B-spline (Bernstein when there are no interior knots)
//! with positive coefficients, a quadratic-exponential form that is positive
//! by construction, and a constant. All are linear or smooth in their
//! parameters with closed-form derivatives.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::special::gl_integrate;

/// Baseline-intensity specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BaselineSpec {
    /// sum_i coef_i B_i(x) on a clamped knot vector over [0,1].
    /// Interior knots are fixed; only the coefficients are parameters.
    BSpline {
        degree: usize,
        interior_knots: Vec<f64>,
        coefficients: Vec<f64>,
    },
    /// exp(t1) + ((e^{t2}+e^{t3}) x - e^{t2})^2, positive by construction.
    QuadraticExp { theta: [f64; 3] },
    /// Constant rate.
    Constant { nu: f64 },
}

/// Baseline value with parameter derivatives.
#[derive(Debug, Clone)]
pub struct BaselineDerivs {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: DMatrix<f64>,
}

impl BaselineSpec {
    /// Number of baseline parameters.
    pub fn dim(&self) -> usize {
        match self {
            BaselineSpec::BSpline { coefficients, .. } => coefficients.len(),
            BaselineSpec::QuadraticExp { .. } => 3,
            BaselineSpec::Constant { .. } => 1,
        }
    }

    /// Check structural invariants (coefficient counts, positivity).
    pub fn validate(&self) -> Result<()> {
        match self {
            BaselineSpec::BSpline {
                degree,
                interior_knots,
                coefficients,
            } => {
                if *degree < 1 {
                    return Err(HawkesError::InvalidSpec("spline degree must be >= 1".into()));
                }
                let expected = degree + 1 + interior_knots.len();
                if coefficients.len() != expected {
                    return Err(HawkesError::InvalidSpec(format!(
                        "spline needs {expected} coefficients (degree {} + 1 + {} interior knots), got {}",
                        degree,
                        interior_knots.len(),
                        coefficients.len()
                    )));
                }
                if !interior_knots.windows(2).all(|w| w[0] <= w[1]) {
                    return Err(HawkesError::InvalidSpec("interior knots must be sorted".into()));
                }
                if interior_knots.iter().any(|&k| k <= 0.0 || k >= 1.0) {
                    return Err(HawkesError::InvalidSpec(
                        "interior knots must lie strictly inside (0,1)".into(),
                    ));
                }
                if coefficients.iter().any(|&c| !(c > 0.0)) {
                    return Err(HawkesError::InvalidSpec(
                        "spline coefficients must all be positive".into(),
                    ));
                }
                Ok(())
            }
            BaselineSpec::QuadraticExp { theta } => {
                if theta.iter().any(|t| !t.is_finite()) {
                    return Err(HawkesError::InvalidSpec("non-finite quadexp parameter".into()));
                }
                Ok(())
            }
            BaselineSpec::Constant { nu } => {
                if !(*nu > 0.0) {
                    Err(HawkesError::InvalidSpec(format!(
                        "constant baseline must be positive, got {nu}"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Clamped knot vector including the multiplicity-(degree+1) endpoints.
    fn knot_vector(degree: usize, interior: &[f64]) -> Vec<f64> {
        let mut kv = vec![0.0; degree + 1];
        kv.extend_from_slice(interior);
        kv.extend(std::iter::repeat(1.0).take(degree + 1));
        kv
    }

    /// All basis-function values at x (length = dim). Cox-de Boor on the
    /// knot span containing x; x = 1 uses the last span.
    pub fn basis_values(degree: usize, interior: &[f64], x: f64) -> Vec<f64> {
        let kv = Self::knot_vector(degree, interior);
        let nbasis = degree + 1 + interior.len();
        // span index k with kv[k] <= x < kv[k+1]
        let last_span = nbasis - 1;
        let span = if x >= 1.0 {
            last_span
        } else {
            let mut k = degree;
            while k < last_span && x >= kv[k + 1] {
                k += 1;
            }
            k
        };
        // de Boor: compute the degree+1 nonvanishing functions on this span
        let mut n = vec![0.0; degree + 1];
        n[0] = 1.0;
        let mut left = vec![0.0; degree + 1];
        let mut right = vec![0.0; degree + 1];
        for j in 1..=degree {
            left[j] = x - kv[span + 1 - j];
            right[j] = kv[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom != 0.0 { n[r] / denom } else { 0.0 };
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        let mut out = vec![0.0; nbasis];
        for (j, &v) in n.iter().enumerate() {
            out[span - degree + j] = v;
        }
        out
    }

    /// Baseline value at x in [0,1].
    pub fn value(&self, x: f64) -> f64 {
        match self {
            BaselineSpec::BSpline {
                degree,
                interior_knots,
                coefficients,
            } => Self::basis_values(*degree, interior_knots, x)
                .iter()
                .zip(coefficients)
                .map(|(b, c)| b * c)
                .sum(),
            BaselineSpec::QuadraticExp { theta } => {
                let a = theta[1].exp();
                let b = theta[2].exp();
                let q = (a + b) * x - a;
                theta[0].exp() + q * q
            }
            BaselineSpec::Constant { nu } => *nu,
        }
    }

    /// Value plus gradient/Hessian in the baseline parameters.
    pub fn derivs(&self, x: f64, order: u8) -> Result<BaselineDerivs> {
        if !(0.0..=1.0).contains(&x) {
            return Err(HawkesError::Domain(format!("x = {x} outside [0,1]")));
        }
        let d = self.dim();
        let mut out = BaselineDerivs {
            value: self.value(x),
            grad: vec![0.0; d],
            hess: DMatrix::zeros(d, d),
        };
        if order == 0 {
            return Ok(out);
        }
        match self {
            BaselineSpec::BSpline {
                degree,
                interior_knots,
                ..
            } => {
                // linear in the coefficients: grad is the basis, hess is zero
                out.grad = Self::basis_values(*degree, interior_knots, x);
            }
            BaselineSpec::QuadraticExp { theta } => {
                let e1 = theta[0].exp();
                let a = theta[1].exp();
                let b = theta[2].exp();
                let q = (a + b) * x - a;
                let qa = a * (x - 1.0); // d q / d theta2
                let qb = b * x; // d q / d theta3
                out.grad[0] = e1;
                out.grad[1] = 2.0 * q * qa;
                out.grad[2] = 2.0 * q * qb;
                if order >= 2 {
                    out.hess[(0, 0)] = e1;
                    // d qa / d theta2 = qa, d qb / d theta3 = qb
                    out.hess[(1, 1)] = 2.0 * qa * (qa + q);
                    out.hess[(2, 2)] = 2.0 * qb * (qb + q);
                    out.hess[(1, 2)] = 2.0 * qa * qb;
                    out.hess[(2, 1)] = out.hess[(1, 2)];
                }
            }
            BaselineSpec::Constant { .. } => {
                out.grad[0] = 1.0;
            }
        }
        Ok(out)
    }

    /// Integral over [x0, x1] with parameter derivatives. Exact for splines
    /// (per-span Gauss-Legendre at polynomial-exact order) and exact for the
    /// quadratic-exponential form, which is a quadratic polynomial in x.
    pub fn integral_derivs(&self, x0: f64, x1: f64) -> Result<BaselineDerivs> {
        if !(0.0..=1.0).contains(&x0) || !(0.0..=1.0).contains(&x1) {
            return Err(HawkesError::Domain(format!("bounds [{x0}, {x1}] outside [0,1]")));
        }
        if x0 > x1 {
            return Err(HawkesError::Domain(format!("x0 = {x0} > x1 = {x1}")));
        }
        let d = self.dim();
        let mut out = BaselineDerivs {
            value: 0.0,
            grad: vec![0.0; d],
            hess: DMatrix::zeros(d, d),
        };
        if x0 == x1 {
            return Ok(out);
        }
        match self {
            BaselineSpec::BSpline {
                degree,
                interior_knots,
                coefficients,
            } => {
                // split at interior knots so each segment is polynomial
                let mut cuts = vec![x0];
                for &k in interior_knots {
                    if k > x0 && k < x1 {
                        cuts.push(k);
                    }
                }
                cuts.push(x1);
                let order = degree / 2 + 1; // GL order n exact for degree 2n-1
                for w in cuts.windows(2) {
                    for i in 0..d {
                        let bi = gl_integrate(
                            &|x| Self::basis_values(*degree, interior_knots, x)[i],
                            w[0],
                            w[1],
                            order,
                        );
                        out.grad[i] += bi;
                        out.value += bi * coefficients[i];
                    }
                }
            }
            BaselineSpec::QuadraticExp { .. } => {
                // integrand components are quadratics in x: GL order 2 exact
                let order = 2;
                out.value = gl_integrate(&|x| self.value(x), x0, x1, order);
                for i in 0..3 {
                    out.grad[i] = gl_integrate(
                        &|x| self.derivs(x, 1).unwrap().grad[i],
                        x0,
                        x1,
                        order,
                    );
                    for j in i..3 {
                        let v = gl_integrate(
                            &|x| self.derivs(x, 2).unwrap().hess[(i, j)],
                            x0,
                            x1,
                            order,
                        );
                        out.hess[(i, j)] = v;
                        out.hess[(j, i)] = v;
                    }
                }
            }
            BaselineSpec::Constant { nu } => {
                out.value = nu * (x1 - x0);
                out.grad[0] = x1 - x0;
            }
        }
        Ok(out)
    }

    /// Certified positive bounds (nu_low, nu_high) with
    /// nu_low <= value(x) <= nu_high on [0,1].
    pub fn bounds(&self) -> Result<(f64, f64)> {
        let (lo, hi) = match self {
            BaselineSpec::BSpline { coefficients, .. } => {
                // convex-hull property of the B-spline basis
                let lo = coefficients.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = coefficients.iter().cloned().fold(0.0f64, f64::max);
                (lo, hi)
            }
            BaselineSpec::QuadraticExp { theta } => {
                let e1 = theta[0].exp();
                let a = theta[1].exp();
                let b = theta[2].exp();
                // q = (a+b)x - a runs from -a to b, crossing zero inside [0,1]
                (e1, e1 + a.max(b).powi(2))
            }
            BaselineSpec::Constant { nu } => (*nu, *nu),
        };
        if !(lo > 0.0) {
            return Err(HawkesError::InvalidSpec(format!(
                "baseline lower bound {lo} is not positive"
            )));
        }
        Ok((lo, hi))
    }

    /// The degree-2 Bernstein baseline used throughout the simulation study.
    pub fn paper_basis(coefficients: [f64; 3]) -> BaselineSpec {
        BaselineSpec::BSpline {
            degree: 2,
            interior_knots: vec![],
            coefficients: coefficients.to_vec(),
        }
    }
}

impl fmt::Display for BaselineSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaselineSpec::BSpline {
                degree,
                interior_knots,
                coefficients,
            } => {
                let knots: Vec<String> = interior_knots.iter().map(|k| k.to_string()).collect();
                let coef: Vec<String> = coefficients.iter().map(|c| c.to_string()).collect();
                write!(
                    f,
                    "bspline(degree={}, knots=[{}], coef=[{}])",
                    degree,
                    knots.join(","),
                    coef.join(",")
                )
            }
            BaselineSpec::QuadraticExp { theta } => {
                write!(f, "quadexp({}, {}, {})", theta[0], theta[1], theta[2])
            }
            BaselineSpec::Constant { nu } => write!(f, "const({nu})"),
        }
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    let inner = s.trim();
    let inner = inner
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .ok_or_else(|| HawkesError::Parse(format!("expected [..] list, got `{s}`")))?;
    if inner.trim().is_empty() {
        return Ok(vec![]);
    }
    inner
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| HawkesError::Parse(format!("bad number `{t}`: {e}")))
        })
        .collect()
}

impl FromStr for BaselineSpec {
    type Err = HawkesError;

    /// Text forms: `bspline(degree=2, knots=[], coef=[5,1.25,2.5])`,
    /// `quadexp(5, 1.25, 2.5)`, `const(3)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let open = s
            .find('(')
            .ok_or_else(|| HawkesError::Parse(format!("baseline spec `{s}` missing '('")))?;
        if !s.ends_with(')') {
            return Err(HawkesError::Parse(format!("baseline spec `{s}` missing ')'")));
        }
        let name = s[..open].trim().to_ascii_lowercase();
        let body = &s[open + 1..s.len() - 1];
        let spec = match name.as_str() {
            "const" | "constant" => {
                let nu = body.trim().parse::<f64>().map_err(|e| {
                    HawkesError::Parse(format!("bad constant baseline `{body}`: {e}"))
                })?;
                BaselineSpec::Constant { nu }
            }
            "quadexp" => {
                let v: Vec<f64> = body
                    .split(',')
                    .map(|t| {
                        t.trim().parse::<f64>().map_err(|e| {
                            HawkesError::Parse(format!("bad quadexp argument `{t}`: {e}"))
                        })
                    })
                    .collect::<Result<_>>()?;
                if v.len() != 3 {
                    return Err(HawkesError::Parse(format!(
                        "quadexp expects 3 arguments, got {}",
                        v.len()
                    )));
                }
                BaselineSpec::QuadraticExp {
                    theta: [v[0], v[1], v[2]],
                }
            }
            "bspline" => {
                let mut degree = None;
                let mut knots = None;
                let mut coef = None;
                // split on commas that are not inside brackets
                let mut depth = 0usize;
                let mut parts = Vec::new();
                let mut start = 0;
                for (i, c) in body.char_indices() {
                    match c {
                        '[' => depth += 1,
                        ']' => depth = depth.saturating_sub(1),
                        ',' if depth == 0 => {
                            parts.push(&body[start..i]);
                            start = i + 1;
                        }
                        _ => {}
                    }
                }
                parts.push(&body[start..]);
                for part in parts {
                    let (key, val) = part.split_once('=').ok_or_else(|| {
                        HawkesError::Parse(format!("expected key=value in bspline, got `{part}`"))
                    })?;
                    match key.trim() {
                        "degree" => {
                            degree = Some(val.trim().parse::<usize>().map_err(|e| {
                                HawkesError::Parse(format!("bad degree `{val}`: {e}"))
                            })?)
                        }
                        "knots" => knots = Some(parse_list(val)?),
                        "coef" => coef = Some(parse_list(val)?),
                        other => {
                            return Err(HawkesError::Parse(format!(
                                "unknown bspline key `{other}`"
                            )))
                        }
                    }
                }
                BaselineSpec::BSpline {
                    degree: degree
                        .ok_or_else(|| HawkesError::Parse("bspline missing degree".into()))?,
                    interior_knots: knots
                        .ok_or_else(|| HawkesError::Parse("bspline missing knots".into()))?,
                    coefficients: coef
                        .ok_or_else(|| HawkesError::Parse("bspline missing coef".into()))?,
                }
            }
            other => {
                return Err(HawkesError::Parse(format!(
                    "unknown baseline family `{other}`"
                )))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

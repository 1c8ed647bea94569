//! Model specification (baseline + kernel), the canonical parameter-vector
//! packing, and event-sequence containers with file I/O.

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::baseline::BaselineSpec;
use crate::error::{HawkesError, Result};
use crate::kernel::{Kernel, KernelParams};

/// Complete model: baseline intensity plus excitation kernel.
///
/// The canonical parameter packing is theta = (theta_nu..., eta, [alpha,]
/// beta), with eta leading the kernel block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub baseline: BaselineSpec,
    pub kernel: Kernel,
}

impl ModelSpec {
    pub fn new(baseline: BaselineSpec, kernel: Kernel) -> Result<Self> {
        baseline.validate()?;
        Ok(ModelSpec { baseline, kernel })
    }

    /// Total parameter dimension d = d_nu + d_g.
    pub fn dim(&self) -> usize {
        self.baseline.dim() + self.kernel.dim()
    }

    pub fn baseline_dim(&self) -> usize {
        self.baseline.dim()
    }

    pub fn kernel_dim(&self) -> usize {
        self.kernel.dim()
    }

    /// Canonical parameter vector.
    pub fn pack(&self) -> DVector<f64> {
        let mut v = Vec::with_capacity(self.dim());
        match &self.baseline {
            BaselineSpec::BSpline { coefficients, .. } => v.extend_from_slice(coefficients),
            BaselineSpec::QuadraticExp { theta } => v.extend_from_slice(theta),
            BaselineSpec::Constant { nu } => v.push(*nu),
        }
        v.push(self.kernel.params.eta);
        if let Some(a) = self.kernel.params.alpha {
            v.push(a);
        }
        v.push(self.kernel.params.beta);
        DVector::from_vec(v)
    }

    /// Rebuild a model from a packed vector, using `self` as the structural
    /// template. Validates positivity and the eta range.
    pub fn unpack(&self, theta: &DVector<f64>) -> Result<ModelSpec> {
        if theta.len() != self.dim() {
            return Err(HawkesError::InvalidParam(format!(
                "expected {} parameters, got {}",
                self.dim(),
                theta.len()
            )));
        }
        let db = self.baseline_dim();
        let baseline = match &self.baseline {
            BaselineSpec::BSpline {
                degree,
                interior_knots,
                ..
            } => BaselineSpec::BSpline {
                degree: *degree,
                interior_knots: interior_knots.clone(),
                coefficients: theta.as_slice()[..db].to_vec(),
            },
            BaselineSpec::QuadraticExp { .. } => BaselineSpec::QuadraticExp {
                theta: [theta[0], theta[1], theta[2]],
            },
            BaselineSpec::Constant { .. } => BaselineSpec::Constant { nu: theta[0] },
        };
        baseline.validate()?;
        let has_alpha = self.kernel.family.has_alpha();
        let params = KernelParams {
            eta: theta[db],
            alpha: if has_alpha { Some(theta[db + 1]) } else { None },
            beta: theta[self.dim() - 1],
        };
        let kernel = Kernel::new(self.kernel.family, params)?;
        Ok(ModelSpec { baseline, kernel })
    }

    /// Coordinate names in packing order: nu1.. for the baseline block,
    /// then eta[, alpha], beta.
    pub fn param_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (1..=self.baseline_dim()).map(|i| format!("nu{i}")).collect();
        names.push("eta".into());
        if self.kernel.family.has_alpha() {
            names.push("alpha".into());
        }
        names.push("beta".into());
        names
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.param_names().iter().position(|n| n == name)
    }
}

/// Strictly increasing event times on the unit observation window, plus the
/// infill scale n (stretched times are n * times).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSequence {
    pub times: Vec<f64>,
    pub scale_n: f64,
}

impl EventSequence {
    pub fn new(times: Vec<f64>, scale_n: f64) -> Result<Self> {
        if !(scale_n > 0.0) {
            return Err(HawkesError::InvalidSpec(format!(
                "scale n must be positive, got {scale_n}"
            )));
        }
        for w in times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(HawkesError::InvalidSpec(format!(
                    "event times must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if times.iter().any(|&t| !(0.0..=1.0).contains(&t)) {
            return Err(HawkesError::InvalidSpec(
                "event times must lie in [0, 1]".into(),
            ));
        }
        Ok(EventSequence { times, scale_n })
    }

    pub fn count(&self) -> usize {
        self.times.len()
    }

    /// Event times on the stretched domain [0, n].
    pub fn stretched(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.scale_n;
        self.times.iter().map(move |&t| n * t)
    }

    /// Write one event time per line, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for &t in &self.times {
            writeln!(w, "{t:.16e}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R, scale_n: f64) -> Result<Self> {
        let mut times = Vec::new();
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            times.push(
                line.parse::<f64>()
                    .map_err(|e| HawkesError::Parse(format!("bad event time `{line}`: {e}")))?,
            );
        }
        EventSequence::new(times, scale_n)
    }
}

/// JSON container for a simulated path: the sequence plus provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EventRecord {
    pub n: f64,
    pub times: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
}

impl EventRecord {
    pub fn into_sequence(self) -> Result<EventSequence> {
        EventSequence::new(self.times, self.n)
    }
}

/// Read events from a path: `.json` uses the [`EventRecord`] schema (its own
/// n wins unless overridden), anything else is one-time-per-line CSV and
/// requires `scale_n`.
pub fn read_events(path: &Path, scale_n: Option<f64>) -> Result<EventSequence> {
    let file = std::fs::File::open(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        let rec: EventRecord = serde_json::from_reader(std::io::BufReader::new(file))?;
        let n = scale_n.unwrap_or(rec.n);
        EventSequence::new(rec.times, n)
    } else {
        let n = scale_n.ok_or_else(|| {
            HawkesError::InvalidSpec("CSV event input requires --n to set the scale".into())
        })?;
        EventSequence::read_csv(std::io::BufReader::new(file), n)
    }
}

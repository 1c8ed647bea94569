//! Normality diagnostics for replicate estimates: one-sample
//! Kolmogorov-Smirnov test against the fitted normal and QQ-plot data.

use crate::error::{HawkesError, Result};
use crate::special::{std_normal_cdf, std_normal_quantile};

/// Asymptotic Kolmogorov tail probability 2 sum_{k>=1} (-1)^{k-1}
/// exp(-2 k^2 x^2), series truncated once terms drop below 1e-12.
pub fn kolmogorov_p(x: f64) -> f64 {
    // below x = 0.26 the tail probability is 1 within 1e-7 and the
    // alternating series converges too slowly to be worth summing
    if x <= 0.26 {
        return 1.0;
    }
    let mut p = 0.0;
    let mut sign = 1.0;
    for k in 1..1000 {
        let term = (-2.0 * (k * k) as f64 * x * x).exp();
        p += sign * term;
        if term < 1e-12 {
            break;
        }
        sign = -sign;
    }
    (2.0 * p).clamp(0.0, 1.0)
}

/// One-sample KS test of the samples against Normal(sample mean, sample SD).
///
/// Returns (D, p) with p from the asymptotic Kolmogorov distribution; no
/// Lilliefors correction is applied for the estimated location/scale, so p
/// is anti-conservative (too large), matching the replication target.
pub fn ks_normal_test(samples: &[f64]) -> Result<(f64, f64)> {
    let m = samples.len();
    if m < 8 {
        return Err(HawkesError::Degenerate(format!(
            "KS normality test needs at least 8 samples, got {m}"
        )));
    }
    let mean = samples.iter().sum::<f64>() / m as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m as f64 - 1.0);
    if !(var > 0.0) {
        return Err(HawkesError::Degenerate(
            "KS normality test undefined for constant samples".into(),
        ));
    }
    let sd = var.sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = std_normal_cdf((x - mean) / sd);
        let hi = (i + 1) as f64 / m as f64 - f;
        let lo = f - i as f64 / m as f64;
        d = d.max(hi).max(lo);
    }
    Ok((d, kolmogorov_p((m as f64).sqrt() * d)))
}

/// Normal QQ data: pairs (Phi^{-1}((i - 0.5)/m), x_(i)) for the ordered
/// samples.
pub fn qq_points(samples: &[f64]) -> Result<Vec<(f64, f64)>> {
    let m = samples.len();
    if m < 2 {
        return Err(HawkesError::Degenerate(format!(
            "QQ plot needs at least 2 samples, got {m}"
        )));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(i, x)| (std_normal_quantile((i as f64 + 0.5) / m as f64), x))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    #[test]
    fn kolmogorov_series_values() {
        assert_eq!(kolmogorov_p(0.0), 1.0);
        // sqrt(m) D = 1.358 is the classical 5% point
        assert_abs_diff_eq!(kolmogorov_p(1.358), 0.05, epsilon = 5e-4);
        // monotone decreasing
        let mut prev = 1.0;
        for i in 1..40 {
            let p = kolmogorov_p(0.1 * i as f64);
            assert!(p <= prev + 1e-15);
            prev = p;
        }
    }

    #[test]
    fn ks_five_percent_point() {
        // m = 100, D = 0.1358 -> p near 0.05; exercise via the public pair
        let p = kolmogorov_p(100f64.sqrt() * 0.1358);
        assert_abs_diff_eq!(p, 0.05, epsilon = 5e-4);
    }

    #[test]
    fn ks_on_normal_quantile_samples_is_near_perfect() {
        let m = 1000;
        let samples: Vec<f64> = (0..m)
            .map(|i| 3.0 + 2.0 * std_normal_quantile((i as f64 + 0.5) / m as f64))
            .collect();
        let (d, p) = ks_normal_test(&samples).unwrap();
        // D is 0.5/m up to the small mismatch between the sample SD and the
        // population SD of the quantile points
        assert!(d < 2.0 / m as f64, "D = {d}");
        assert!(p > 0.99, "p = {p}");
    }

    #[test]
    fn ks_rejects_uniform_samples() {
        let m = 2000;
        let samples: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) / m as f64).collect();
        let (_, p) = ks_normal_test(&samples).unwrap();
        assert!(p < 0.01, "p = {p}");
    }

    #[test]
    fn ks_input_validation() {
        assert!(ks_normal_test(&[1.0; 7]).is_err());
        assert!(ks_normal_test(&[2.5; 20]).is_err());
    }

    #[test]
    fn qq_points_small_cases() {
        let pts = qq_points(&[5.0, 1.0]).unwrap();
        assert_abs_diff_eq!(pts[0].0, -0.674490, epsilon = 1e-6);
        assert_abs_diff_eq!(pts[1].0, 0.674490, epsilon = 1e-6);
        assert_eq!(pts[0].1, 1.0);
        assert_eq!(pts[1].1, 5.0);
        let odd = qq_points(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(odd[1].0, 0.0);
        assert!(qq_points(&[1.0]).is_err());
    }

    #[test]
    fn qq_line_near_identity_for_standard_normal_samples() {
        let mut rng = derive_stream(99, &[7]);
        let samples: Vec<f64> = (0..10_000)
            .map(|_| std_normal_quantile(rng.gen_range(1e-12..1.0)))
            .collect();
        let pts = qq_points(&samples).unwrap();
        let m = pts.len() as f64;
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for &(q, x) in &pts {
            sx += q;
            sy += x;
            sxx += q * q;
            sxy += q * x;
        }
        let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        let intercept = (sy - slope * sx) / m;
        assert!((slope - 1.0).abs() < 0.05, "slope = {slope}");
        assert!(intercept.abs() < 0.05, "intercept = {intercept}");
    }
}

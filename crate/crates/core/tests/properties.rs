//! Property-based invariants across kernels, baselines, transforms and the
//! simulator.

use hawkes_nsk::baseline::BaselineSpec;
use hawkes_nsk::estimator::{param_transform, param_untransform};
use hawkes_nsk::kernel::{Kernel, KernelFamily, KernelParams};
use hawkes_nsk::model::ModelSpec;
use hawkes_nsk::simulate::simulate_hawkes;
use hawkes_nsk::special::adaptive_quadrature;
use hawkes_nsk::stats::kolmogorov_p;
use nalgebra::DVector;
use proptest::prelude::*;

fn kernel_strategy() -> impl Strategy<Value = Kernel> {
    (0usize..4, 0.05f64..0.9, 0.2f64..3.0, 0.1f64..4.0).prop_map(|(fam, eta, alpha, beta)| {
        let (family, alpha) = match fam {
            0 => (KernelFamily::Exponential, None),
            // keep the heavy GPD tail integrable in reasonable time
            1 => (KernelFamily::GeneralizedPareto, Some(0.05 + 0.1 * alpha)),
            2 => (KernelFamily::Gamma, Some(alpha)),
            _ => (KernelFamily::Weibull, Some(alpha)),
        };
        Kernel::new(family, KernelParams { eta, alpha, beta }).unwrap()
    })
}

/// Kernels with a bounded density at the origin (simulable by thinning).
fn bounded_kernel_strategy() -> impl Strategy<Value = Kernel> {
    (0usize..4, 0.05f64..0.9, 1.0f64..3.0, 0.1f64..4.0).prop_map(|(fam, eta, alpha, beta)| {
        let (family, alpha) = match fam {
            0 => (KernelFamily::Exponential, None),
            1 => (KernelFamily::GeneralizedPareto, Some(0.05 + 0.1 * alpha)),
            2 => (KernelFamily::Gamma, Some(alpha)),
            _ => (KernelFamily::Weibull, Some(alpha)),
        };
        Kernel::new(family, KernelParams { eta, alpha, beta }).unwrap()
    })
}

fn bspline_strategy() -> impl Strategy<Value = BaselineSpec> {
    proptest::collection::vec(0.2f64..8.0, 3..6).prop_map(|coefficients| BaselineSpec::BSpline {
        degree: 2,
        interior_knots: (1..coefficients.len().saturating_sub(2))
            .map(|i| i as f64 / (coefficients.len() - 2) as f64)
            .collect(),
        coefficients,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn kernel_density_nonnegative_cdf_monotone(kernel in kernel_strategy()) {
        let eta = kernel.params.eta;
        let mut prev = 0.0;
        for i in 0..60 {
            let t = 0.02 + 0.25 * i as f64;
            let g = kernel.density(t);
            prop_assert!(g >= 0.0, "negative density {g} at {t}");
            let cdf = kernel.cdf(t).unwrap();
            prop_assert!(cdf >= prev - 1e-12, "CDF not monotone at {t}");
            prop_assert!(cdf <= eta + 1e-12, "CDF {cdf} above eta {eta}");
            prev = cdf;
        }
    }

    #[test]
    fn kernel_parse_roundtrip(kernel in kernel_strategy()) {
        let text = kernel.to_string();
        let back: Kernel = text.parse().unwrap();
        prop_assert_eq!(back.family, kernel.family);
        prop_assert!((back.params.eta - kernel.params.eta).abs() < 1e-12);
        prop_assert!((back.params.beta - kernel.params.beta).abs() < 1e-12);
    }

    #[test]
    fn sup_after_dominates_tail(kernel in kernel_strategy(), s in 0.01f64..3.0) {
        let bound = kernel.sup_after(s);
        for i in 0..40 {
            let t = s + 0.1 * i as f64;
            prop_assert!(
                kernel.density(t) <= bound * (1.0 + 1e-9) + 1e-12,
                "density at {t} exceeds sup_after({s})"
            );
        }
    }

    #[test]
    fn baseline_within_bounds(baseline in bspline_strategy()) {
        let (lo, hi) = baseline.bounds().unwrap();
        for i in 0..=40 {
            let x = i as f64 / 40.0;
            let v = baseline.value(x);
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12, "value {v} outside [{lo}, {hi}]");
        }
    }

    #[test]
    fn transform_is_a_bijection(
        baseline in bspline_strategy(),
        kernel in kernel_strategy(),
    ) {
        let model = ModelSpec::new(baseline, kernel).unwrap();
        let theta = model.pack();
        let z = param_transform(&model, &theta).unwrap();
        let back = param_untransform(&model, &z).unwrap();
        for i in 0..model.dim() {
            prop_assert!((back[i] - theta[i]).abs() <= 1e-12 * theta[i].abs().max(1.0));
        }
    }

    #[test]
    fn pack_unpack_roundtrip(
        baseline in bspline_strategy(),
        kernel in kernel_strategy(),
    ) {
        let model = ModelSpec::new(baseline, kernel).unwrap();
        let theta = model.pack();
        let again = model.unpack(&theta).unwrap().pack();
        prop_assert_eq!(again.as_slice(), theta.as_slice());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn density_integrates_to_cdf(kernel in kernel_strategy(), t in 0.2f64..4.0) {
        // compare over [a, t] to stay clear of the (possibly singular) origin
        let a = 0.05;
        let integral = adaptive_quadrature(&|u| kernel.density(u), a, a + t, 1e-10).unwrap();
        let diff = kernel.cdf(a + t).unwrap() - kernel.cdf(a).unwrap();
        prop_assert!(
            (integral - diff).abs() <= 1e-8 * diff.max(1e-3),
            "integral {integral} vs CDF difference {diff} at {t}"
        );
    }

    #[test]
    fn simulation_is_seed_deterministic(
        kernel in bounded_kernel_strategy(),
        seed in any::<u64>(),
    ) {
        let model = ModelSpec::new(BaselineSpec::Constant { nu: 2.0 }, kernel).unwrap();
        let a = simulate_hawkes(&model, 20.0, seed).unwrap();
        let b = simulate_hawkes(&model, 20.0, seed).unwrap();
        prop_assert_eq!(a.times, b.times);
    }

    #[test]
    fn unpack_rejects_invalid(
        baseline in bspline_strategy(),
        kernel in kernel_strategy(),
        bad_eta in 1.0f64..3.0,
    ) {
        let model = ModelSpec::new(baseline, kernel).unwrap();
        let db = model.baseline_dim();
        let mut theta = model.pack();
        theta[db] = bad_eta;
        prop_assert!(model.unpack(&theta).is_err());
        let mut theta = model.pack();
        theta[model.dim() - 1] = -theta[model.dim() - 1];
        prop_assert!(model.unpack(&theta).is_err());
    }
}

#[test]
fn ks_p_monotone_in_statistic() {
    let mut prev = 1.0;
    for i in 0..200 {
        let p = kolmogorov_p(0.02 * i as f64);
        assert!(p <= prev + 1e-15, "not monotone at {}", 0.02 * i as f64);
        prev = p;
    }
}

#[test]
fn quantile_inverts_cdf_all_families() {
    for text in [
        "exp(0.5, 1.3)",
        "gpd(0.5, 0.25, 0.75)",
        "gamma(0.5, 2, 0.5)",
        "weibull(0.5, 2, 1.12838)",
    ] {
        let kernel: Kernel = text.parse().unwrap();
        for p in [0.05, 0.3, 0.5, 0.9, 0.99] {
            let q = kernel.quantile(p);
            let back = kernel.cdf_normalized(q);
            assert!(
                (back - p).abs() < 1e-8,
                "{text}: cdf(quantile({p})) = {back}"
            );
        }
    }
}

#[test]
fn score_zero_length_gradient_layout() {
    // packing layout stays (baseline..., eta[, alpha], beta) across families
    for (text, dim) in [
        ("exp(0.5, 1.0)", 5),
        ("gpd(0.5, 0.25, 0.75)", 6),
        ("gamma(0.5, 2, 0.5)", 6),
        ("weibull(0.5, 2, 1.12838)", 6),
    ] {
        let model = ModelSpec::new(
            BaselineSpec::paper_basis([5.0, 1.25, 2.5]),
            text.parse().unwrap(),
        )
        .unwrap();
        assert_eq!(model.dim(), dim);
        let theta = model.pack();
        let z = param_transform(&model, &theta).unwrap();
        assert_eq!(z.len(), dim);
        let back: DVector<f64> = param_untransform(&model, &z).unwrap();
        assert_eq!(back.len(), dim);
    }
}

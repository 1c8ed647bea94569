//! Simulation and maximum-likelihood inference for Hawkes processes with a
//! time-varying baseline intensity and non-exponential excitation kernels.
//!
//! The process lives on a stretched window [0, n]: the baseline is a smooth
//! function on the unit interval evaluated at t/n, and the excitation kernel
//! acts on raw elapsed times. The crate provides exact simulation (Ogata
//! thinning), exact likelihood derivatives to second order, a multistart
//! BFGS maximum-likelihood fitter, ergodic-limit verification utilities and
//! a replication harness for the accompanying simulation study.

pub mod baseline;
pub mod ergodic;
pub mod error;
pub mod estimator;
pub mod kernel;
pub mod likelihood;
pub mod model;
pub mod rng;
pub mod simulate;
pub mod special;
pub mod stats;
pub mod study;

pub use baseline::{BaselineDerivs, BaselineSpec};
pub use ergodic::{
    ergodic_limit, ergodicity_report, time_average, BlockPlan, ErgodicLimit, ErgodicOptions,
    ErgodicityReport, FunctionalSpec, McOptions, PsiValue,
};
pub use error::{HawkesError, Result};
pub use estimator::{
    covariance_estimate, fit_mle, param_transform, param_untransform, CoordTransform, FitOptions,
    FitResult,
};
pub use kernel::{
    CdfDerivs, ConditionCheck, ConstraintReport, Kernel, KernelDerivs, KernelFamily, KernelParams,
};
pub use likelihood::{
    compensator, loglik, observed_information, rescaled_residuals, score, LikelihoodEval,
    LikelihoodOptions, LikelihoodWorkspace,
};
pub use model::{read_events, EventRecord, EventSequence, ModelSpec};
pub use rng::derive_stream;
pub use stats::{kolmogorov_p, ks_normal_test, qq_points};
pub use study::{
    run_study, write_study_outputs, ModelConfig, ParamRow, ScaleReport, StudyConfig, StudyReport,
};
pub use simulate::{
    intensity_at, simulate_hawkes, simulate_hawkes_opts, simulate_stationary,
    simulate_stationary_path, SimOptions, StationaryPath,
};

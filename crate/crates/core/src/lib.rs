//! Asymptotic theory and Monte Carlo harness for transfer learning with
//! interpolating linear models.
//!
//! The library answers one question in two settings: starting gradient
//! descent (or any algorithm with the same implicit bias) from a warm start
//! `w0` carried over from a source task, what is the exact high-dimensional
//! test error of the interpolator it converges to on the target task?
//!
//! * [`regression`] — noisy linear regression under a general covariance
//!   spectrum: the fixed-point scalar `theta`, the effective overlap `t`,
//!   the limiting excess risk, its spectrum-independent lower bound, and
//!   when transfer beats training from scratch.
//! * [`classification`] — binary Gaussian mixtures with warm starts that mix
//!   an oracle direction with a confounder: the limiting 0-1 error through
//!   the scalars `theta`, `alpha`, `gamma`, `tau^2`, plus the oracle floor
//!   and regime classification.
//! * [`spectral`] — spectral densities, joint two-class densities, Stieltjes
//!   transforms, Gauss-Legendre quadrature, and the Gaussian tail.
//! * [`solvers`] — exact minimum-displacement interpolation, its ridge
//!   regularization, stochastic gradient/mirror descent with matching
//!   implicit bias, and warm-start rescaling.
//! * [`datagen`] — seeded instance samplers over Gaussian, Bernoulli, and
//!   chi-square design entries for universality checks.
//! * [`experiments`] — trial runners, deterministic parallel sweeps,
//!   universality reports, and plot-table writers.
//!
//! Everything is deterministic given a master seed: trials derive private
//! ChaCha streams from `(seed, trial index, distribution tag)` and reduce in
//! index order, so results are identical at any thread count.

pub mod classification;
pub mod datagen;
pub mod error;
pub mod experiments;
pub mod regression;
pub mod solvers;
pub mod spectral;

pub use classification::{
    compute_alpha, compute_gamma, compute_tau2, invert_w0_error, oracle_class_error,
    predict_class_error, predict_class_error_scalar, regime, regime_with_cutoffs,
    scalar_embedding, solve_theta_classification, w0_class_error, ClassificationEnsemble,
    ClassificationPrediction, Regime, RegimeCutoffs,
};
pub use datagen::{
    covariance_eigenvalues, derive_trial_seed, sample_classification_instance,
    sample_regression_instance, ClassCovariances, ClassificationInstance,
    ClassificationInstanceSpec, EntryDistribution, RegressionInstance, RegressionInstanceSpec,
};
pub use error::{Error, Result};
pub use experiments::{
    class_error_metric, classification_dat_name, e_gen_metric, gnuplot_script,
    mc_class_error_estimate, regression_dat_name, render_csv, render_dat,
    run_classification_sweep, run_classification_trial, run_regression_sweep,
    run_regression_trial, universality_report, write_csv, write_dat, ClassificationSweepBase,
    RegressionSweepBase, SweepKind, SweepRow, SweepTable, SweepVariable, TrialReport,
    UniversalityReport,
};
pub use regression::{
    compute_t, regression_lower_bound, solve_theta_regression, transfer_benefit,
    RegressionEnsemble, RegressionPrediction, TransferBenefit,
};
pub use solvers::{
    min_norm_interpolate, renormalize_alpha, ridge_offset_solve, sgd_run, smd_run, AsinhMirror,
    MirrorMap, QuadraticMirror, SgdOptions, SgdReport,
};
pub use spectral::{
    gauss_legendre, q_tail, q_tail_inverse, JointSpectralDensity, SpectralDensity,
    DEFAULT_GL_ORDER,
};

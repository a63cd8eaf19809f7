//! Monte Carlo experiments: metrics, trial runners, sweeps, universality
//! comparison, and the data-file writers behind the reproduction recipes.
//!
//! A sweep walks one variable (`kappa`, `rho`, or `sigma`) over a grid,
//! runs seeded trials for every requested entry distribution at every grid
//! point, and aggregates means and standard errors next to the asymptotic
//! predictions. Trials are independent: each derives its own ChaCha stream
//! from `(master_seed, global trial index, distribution tag)`, runs wherever
//! the current rayon pool schedules it, and is reduced in trial-index order,
//! so the same spec yields byte-identical tables at any thread count.
//!
//! Failed trials (rank-deficient designs, degenerate predictions) do not
//! abort a sweep: they are counted per row, and a row whose failure rate
//! exceeds 10% renders as missing with its first failure reason.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::classification::{
    oracle_class_error, predict_class_error, w0_class_error, ClassificationEnsemble,
};
use crate::datagen::{
    derive_trial_seed, sample_classification_instance, sample_regression_instance,
    ClassCovariances, ClassificationInstanceSpec, EntryDistribution, RegressionInstanceSpec,
};
use crate::error::{Error, Result};
use crate::regression::RegressionEnsemble;
use crate::solvers::{min_norm_interpolate, renormalize_alpha};
use crate::spectral::{q_tail, SpectralDensity};

/// Maximum tolerated fraction of failed trials before a sweep row is
/// rendered as missing.
const MAX_FAILURE_FRACTION: f64 = 0.1;

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------

/// Generalization error of `w` under the covariance metric:
/// `(w - w*)^T diag(eigs) (w - w*)`.
pub fn e_gen_metric(w: &DVector<f64>, w_star: &DVector<f64>, eigs: &DVector<f64>) -> f64 {
    w.iter()
        .zip(w_star.iter())
        .zip(eigs.iter())
        .map(|((&a, &b), &e)| {
            let dv = a - b;
            e * dv * dv
        })
        .sum()
}

/// Exact test error of the linear classifier `sign(x . w)` under the
/// two-class Gaussian model with the given means and diagonal covariances:
/// `q_tail(mu1.w / sqrt(w' S1 w)) / 2 + q_tail(-mu2.w / sqrt(w' S2 w)) / 2`.
pub fn class_error_metric(
    w: &DVector<f64>,
    mu1: &DVector<f64>,
    mu2: &DVector<f64>,
    s1_eigs: &DVector<f64>,
    s2_eigs: &DVector<f64>,
) -> Result<f64> {
    let var1: f64 = w
        .iter()
        .zip(s1_eigs.iter())
        .map(|(&wj, &e)| e * wj * wj)
        .sum();
    let var2: f64 = w
        .iter()
        .zip(s2_eigs.iter())
        .map(|(&wj, &e)| e * wj * wj)
        .sum();
    if var1 <= 0.0 || var2 <= 0.0 {
        return Err(Error::Degenerate(
            "classifier has zero variance under a class covariance; error undefined".into(),
        ));
    }
    Ok(0.5 * q_tail(mu1.dot(w) / var1.sqrt()) + 0.5 * q_tail(-mu2.dot(w) / var2.sqrt()))
}

/// Monte Carlo cross-check of [`class_error_metric`]: classifies `samples`
/// fresh Gaussian points per class and reports the average error rate.
pub fn mc_class_error_estimate(
    w: &DVector<f64>,
    mu1: &DVector<f64>,
    mu2: &DVector<f64>,
    s1_eigs: &DVector<f64>,
    s2_eigs: &DVector<f64>,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if samples == 0 {
        return Err(Error::Domain("need at least one test sample".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut wrong = 0usize;
    for class in 0..2usize {
        let (mu, eigs, sign) = if class == 0 {
            (mu1, s1_eigs, 1.0)
        } else {
            (mu2, s2_eigs, -1.0)
        };
        for _ in 0..samples {
            // Only the projection onto w matters, so draw it directly:
            // x . w ~ N(mu . w, w' S w).
            let mean = mu.dot(w);
            let sd = eigs
                .iter()
                .zip(w.iter())
                .map(|(&e, &wj)| e * wj * wj)
                .sum::<f64>()
                .sqrt();
            let z: f64 = StandardNormal.sample(&mut rng);
            if sign * (mean + sd * z) <= 0.0 {
                wrong += 1;
            }
        }
    }
    Ok(wrong as f64 / (2 * samples) as f64)
}

// ---------------------------------------------------------------------------
// single trials
// ---------------------------------------------------------------------------

/// Outcome of one Monte Carlo trial.
#[derive(Debug, Clone)]
pub struct TrialReport {
    /// Stream seed the trial ran under.
    pub seed: u64,
    /// Entry distribution of the design.
    pub distribution: EntryDistribution,
    /// Empirical metric of the solved interpolator (`e_gen` or class error).
    pub metric: f64,
    /// Same metric evaluated at the warm start.
    pub init_metric: f64,
    /// Least-squares rescaling applied to the warm start (classification
    /// trials only).
    pub alpha: Option<f64>,
    /// Relative interpolation residual `|X w - y| / max(1, |y|)`.
    pub feasibility: f64,
    /// Wall-clock seconds spent in the linear solve.
    pub solve_seconds: f64,
}

/// Runs one regression trial: sample an instance, interpolate from the warm
/// start, and score both against the ground truth.
pub fn run_regression_trial(spec: &RegressionInstanceSpec) -> Result<TrialReport> {
    let inst = sample_regression_instance(spec)?;
    let started = Instant::now();
    let w = min_norm_interpolate(&inst.x, &inst.y, &inst.w0)?;
    let solve_seconds = started.elapsed().as_secs_f64();
    let feasibility = (&inst.x * &w - &inst.y).norm() / inst.y.norm().max(1.0);
    Ok(TrialReport {
        seed: spec.seed,
        distribution: spec.entry,
        metric: e_gen_metric(&w, &inst.w_star, &inst.eigs),
        init_metric: e_gen_metric(&inst.w0, &inst.w_star, &inst.eigs),
        alpha: None,
        feasibility,
        solve_seconds,
    })
}

/// Runs one classification trial: sample an instance, rescale the warm
/// start by its least-squares coefficient, interpolate the labels from the
/// rescaled start, and score with the exact Gaussian error formula.
pub fn run_classification_trial(spec: &ClassificationInstanceSpec) -> Result<TrialReport> {
    let inst = sample_classification_instance(spec)?;
    let init_metric = class_error_metric(
        &inst.w0,
        &inst.mu1,
        &inst.mu2,
        &inst.s1_eigs,
        &inst.s2_eigs,
    )?;
    let started = Instant::now();
    let (alpha, w0_scaled) = renormalize_alpha(&inst.x, &inst.y, &inst.w0)?;
    let w = min_norm_interpolate(&inst.x, &inst.y, &w0_scaled)?;
    let solve_seconds = started.elapsed().as_secs_f64();
    let feasibility = (&inst.x * &w - &inst.y).norm() / inst.y.norm().max(1.0);
    Ok(TrialReport {
        seed: spec.seed,
        distribution: spec.entry,
        metric: class_error_metric(&w, &inst.mu1, &inst.mu2, &inst.s1_eigs, &inst.s2_eigs)?,
        init_metric,
        alpha: Some(alpha),
        feasibility,
        solve_seconds,
    })
}

// ---------------------------------------------------------------------------
// sweeps
// ---------------------------------------------------------------------------

/// The variable a sweep walks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    Kappa,
    Rho,
    Sigma,
}

impl std::fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepVariable::Kappa => "kappa",
            SweepVariable::Rho => "rho",
            SweepVariable::Sigma => "sigma",
        })
    }
}

/// Fixed parameters of a regression sweep; the swept variable's entry is
/// overridden by the grid.
#[derive(Debug, Clone)]
pub struct RegressionSweepBase {
    /// Feature dimension (held fixed; `n` is derived per point).
    pub d: usize,
    /// Overparametrization ratio used when `kappa` is not the swept
    /// variable.
    pub kappa: f64,
    /// Noise level used when `sigma` is not the swept variable.
    pub sigma: f64,
    /// Warm-start offset energy.
    pub e_a: f64,
    /// Covariance spectrum.
    pub density: SpectralDensity,
    /// Draw label noise from the entry distribution instead of a Gaussian.
    pub entry_noise: bool,
}

/// Fixed parameters of a classification sweep.
#[derive(Debug, Clone)]
pub struct ClassificationSweepBase {
    /// Feature dimension (held fixed; `n` is derived per point and kept
    /// even).
    pub d: usize,
    /// Ratio used when `kappa` is not swept.
    pub kappa: f64,
    /// Signal-to-noise ratio used when `rho` is not swept; the per-point
    /// noise scale is `sigma2 = n (1 - r) / rho`.
    pub rho: f64,
    /// Shared fraction of the class means.
    pub r: f64,
    /// Warm-start weight on the oracle direction.
    pub t_star: f64,
    /// Warm-start weight on the confounder direction.
    pub t_eta: f64,
}

/// One aggregated sweep row.
#[derive(Debug, Clone)]
pub struct SweepRow {
    /// Realized value of the swept variable (after integer rounding of `n`).
    pub x: f64,
    /// Realized sample count.
    pub n: usize,
    /// Per-point noise scale of classification rows.
    pub sigma2: Option<f64>,
    /// Per-distribution empirical means of the solved metric.
    pub means: Vec<f64>,
    /// Per-distribution standard errors.
    pub stderrs: Vec<f64>,
    /// Per-distribution empirical means of the warm start's metric.
    pub init_means: Vec<f64>,
    /// Asymptotic prediction for the solved metric.
    pub theory: f64,
    /// Regression: spectrum-independent lower bound. Classification: oracle
    /// error floor.
    pub lower_bound: Option<f64>,
    /// Classification: predicted warm-start error.
    pub init_theory: Option<f64>,
    /// Failed trials at this point (per all distributions combined).
    pub failures: usize,
    /// First failure message, when any.
    pub failure_reason: Option<String>,
    /// False when the failure fraction exceeded 10%; such rows render as
    /// missing.
    pub ok: bool,
}

/// What kind of experiment a table aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Regression,
    Classification,
}

/// Aggregated sweep results plus everything needed to render them.
#[derive(Debug, Clone)]
pub struct SweepTable {
    pub kind: SweepKind,
    pub variable: SweepVariable,
    pub distributions: Vec<EntryDistribution>,
    /// Column name of the theory prediction in the `.dat` rendering.
    pub theory_label: String,
    pub trials: usize,
    pub master_seed: u64,
    pub rows: Vec<SweepRow>,
}

fn check_sweep_arity(grid: &[f64], trials: usize, distributions: &[EntryDistribution]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Domain("sweep grid is empty".into()));
    }
    if trials == 0 {
        return Err(Error::Domain("need at least one trial per point".into()));
    }
    if distributions.is_empty() {
        return Err(Error::Domain("need at least one entry distribution".into()));
    }
    Ok(())
}

/// Sample count for a regression point: `round(d / kappa)` clamped to
/// `[1, d-1]`.
fn regression_samples(d: usize, kappa: f64) -> Result<usize> {
    if !(kappa > 1.0) || !kappa.is_finite() {
        return Err(Error::Domain(format!(
            "sweep kappa must be finite and exceed 1, got {kappa}"
        )));
    }
    let n = (d as f64 / kappa).round() as usize;
    Ok(n.clamp(1, d - 1))
}

/// Sample count for a classification point: nearest even integer to
/// `d / kappa` (ties toward more samples), clamped inside `[2, d-1]`.
fn classification_samples(d: usize, kappa: f64) -> Result<usize> {
    if !(kappa > 1.0) || !kappa.is_finite() {
        return Err(Error::Domain(format!(
            "sweep kappa must be finite and exceed 1, got {kappa}"
        )));
    }
    let raw = d as f64 / kappa;
    let below = (raw / 2.0).floor() as usize * 2;
    let above = below + 2;
    let n = if (raw - below as f64) <= (above as f64 - raw) {
        if (raw - below as f64) == (above as f64 - raw) {
            above
        } else {
            below
        }
    } else {
        above
    };
    let n = n.max(2);
    if n >= d {
        return Err(Error::Domain(format!(
            "kappa = {kappa} leaves no even n below d = {d}"
        )));
    }
    Ok(n)
}

/// Theory column label for a regression spectrum, following the plot-table
/// naming convention.
pub fn regression_theory_label(density: &SpectralDensity) -> &'static str {
    match density {
        SpectralDensity::Atoms(pairs) if pairs.len() == 1 => "gensingle",
        SpectralDensity::Atoms(_) => "genbilvl",
        SpectralDensity::Uniform { .. } => "genunif",
        SpectralDensity::Quadrature(_) => "genquad",
    }
}

/// Runs a regression sweep over `kappa` or `sigma`.
pub fn run_regression_sweep(
    base: &RegressionSweepBase,
    variable: SweepVariable,
    grid: &[f64],
    trials: usize,
    distributions: &[EntryDistribution],
    master_seed: u64,
) -> Result<SweepTable> {
    check_sweep_arity(grid, trials, distributions)?;
    if variable == SweepVariable::Rho {
        return Err(Error::Domain(
            "regression sweeps walk kappa or sigma; rho belongs to classification".into(),
        ));
    }

    // Resolve each grid point to concrete instance parameters first.
    let mut points = Vec::with_capacity(grid.len());
    for &g in grid {
        let (n, sigma) = match variable {
            SweepVariable::Kappa => (regression_samples(base.d, g)?, base.sigma),
            SweepVariable::Sigma => {
                if !(g >= 0.0) || !g.is_finite() {
                    return Err(Error::Domain(format!(
                        "sigma grid values must be finite and non-negative, got {g}"
                    )));
                }
                (regression_samples(base.d, base.kappa)?, g)
            }
            SweepVariable::Rho => unreachable!(),
        };
        points.push((n, sigma));
    }

    // One task per (point, distribution, trial), seeded independently of
    // scheduling order.
    let mut tasks = Vec::with_capacity(points.len() * distributions.len() * trials);
    for (pi, &(n, sigma)) in points.iter().enumerate() {
        for (di, &dist) in distributions.iter().enumerate() {
            for t in 0..trials {
                let global = ((pi * distributions.len() + di) * trials + t) as u64;
                let seed = derive_trial_seed(master_seed, global, dist.tag());
                tasks.push(RegressionInstanceSpec {
                    n,
                    d: base.d,
                    density: base.density.clone(),
                    sigma,
                    e_a: base.e_a,
                    entry: dist,
                    entry_noise: base.entry_noise,
                    seed,
                });
            }
        }
    }
    let outcomes: Vec<std::result::Result<TrialReport, String>> = tasks
        .par_iter()
        .map(|spec| run_regression_trial(spec).map_err(|e| e.to_string()))
        .collect();

    let mut rows = Vec::with_capacity(points.len());
    for (pi, &(n, sigma)) in points.iter().enumerate() {
        let kappa = base.d as f64 / n as f64;
        let ens = RegressionEnsemble::new(kappa, sigma * sigma, base.e_a, base.density.clone())?;
        let pred = ens.predict()?;
        let x = match variable {
            SweepVariable::Kappa => kappa,
            SweepVariable::Sigma => sigma,
            SweepVariable::Rho => unreachable!(),
        };
        let mut row = SweepRow {
            x,
            n,
            sigma2: None,
            means: Vec::new(),
            stderrs: Vec::new(),
            init_means: Vec::new(),
            theory: pred.e_p,
            lower_bound: Some(pred.lower_bound),
            init_theory: None,
            failures: 0,
            failure_reason: None,
            ok: true,
        };
        aggregate_point(
            &outcomes,
            pi,
            distributions.len(),
            trials,
            &mut row,
        );
        rows.push(row);
    }
    Ok(SweepTable {
        kind: SweepKind::Regression,
        variable,
        distributions: distributions.to_vec(),
        theory_label: regression_theory_label(&base.density).to_string(),
        trials,
        master_seed,
        rows,
    })
}

/// Runs a classification sweep over `kappa` or `rho`.
pub fn run_classification_sweep(
    base: &ClassificationSweepBase,
    variable: SweepVariable,
    grid: &[f64],
    trials: usize,
    distributions: &[EntryDistribution],
    master_seed: u64,
) -> Result<SweepTable> {
    check_sweep_arity(grid, trials, distributions)?;
    if variable == SweepVariable::Sigma {
        return Err(Error::Domain(
            "classification sweeps walk kappa or rho; the noise scale follows from rho".into(),
        ));
    }

    let mut points = Vec::with_capacity(grid.len());
    for &g in grid {
        let (n, rho) = match variable {
            SweepVariable::Kappa => (classification_samples(base.d, g)?, base.rho),
            SweepVariable::Rho => {
                if !(g > 0.0) || !g.is_finite() {
                    return Err(Error::Domain(format!(
                        "rho grid values must be finite and positive, got {g}"
                    )));
                }
                (classification_samples(base.d, base.kappa)?, g)
            }
            SweepVariable::Sigma => unreachable!(),
        };
        let sigma2 = n as f64 * (1.0 - base.r) / rho;
        points.push((n, rho, sigma2));
    }

    let mut tasks = Vec::with_capacity(points.len() * distributions.len() * trials);
    for (pi, &(n, _, sigma2)) in points.iter().enumerate() {
        for (di, &dist) in distributions.iter().enumerate() {
            for t in 0..trials {
                let global = ((pi * distributions.len() + di) * trials + t) as u64;
                let seed = derive_trial_seed(master_seed, global, dist.tag());
                tasks.push(ClassificationInstanceSpec {
                    n,
                    d: base.d,
                    r: base.r,
                    t_star: base.t_star,
                    t_eta: base.t_eta,
                    covariances: ClassCovariances::Isotropic(sigma2),
                    entry: dist,
                    seed,
                });
            }
        }
    }
    let outcomes: Vec<std::result::Result<TrialReport, String>> = tasks
        .par_iter()
        .map(|spec| run_classification_trial(spec).map_err(|e| e.to_string()))
        .collect();

    let mut rows = Vec::with_capacity(points.len());
    for (pi, &(n, rho, sigma2)) in points.iter().enumerate() {
        let ens = ClassificationEnsemble::isotropic(
            n,
            base.d,
            base.r,
            base.t_star,
            base.t_eta,
            sigma2,
        )?;
        let pred = predict_class_error(&ens)?;
        let x = match variable {
            SweepVariable::Kappa => base.d as f64 / n as f64,
            SweepVariable::Rho => rho,
            SweepVariable::Sigma => unreachable!(),
        };
        let mut row = SweepRow {
            x,
            n,
            sigma2: Some(sigma2),
            means: Vec::new(),
            stderrs: Vec::new(),
            init_means: Vec::new(),
            theory: pred.error,
            lower_bound: Some(oracle_class_error(ens.spectra(), base.r)?),
            init_theory: Some(w0_class_error(&ens)?),
            failures: 0,
            failure_reason: None,
            ok: true,
        };
        aggregate_point(
            &outcomes,
            pi,
            distributions.len(),
            trials,
            &mut row,
        );
        rows.push(row);
    }
    Ok(SweepTable {
        kind: SweepKind::Classification,
        variable,
        distributions: distributions.to_vec(),
        theory_label: "epThm".to_string(),
        trials,
        master_seed,
        rows,
    })
}

/// Reduces the outcome slab for grid point `pi` into per-distribution means
/// and standard errors, in trial-index order.
fn aggregate_point(
    outcomes: &[std::result::Result<TrialReport, String>],
    pi: usize,
    n_dists: usize,
    trials: usize,
    row: &mut SweepRow,
) {
    for di in 0..n_dists {
        let start = (pi * n_dists + di) * trials;
        let slab = &outcomes[start..start + trials];
        let mut metrics = Vec::with_capacity(trials);
        let mut inits = Vec::with_capacity(trials);
        for outcome in slab {
            match outcome {
                Ok(report) => {
                    metrics.push(report.metric);
                    inits.push(report.init_metric);
                }
                Err(msg) => {
                    row.failures += 1;
                    if row.failure_reason.is_none() {
                        row.failure_reason = Some(msg.clone());
                    }
                }
            }
        }
        let m = metrics.len();
        if m == 0 {
            row.means.push(f64::NAN);
            row.stderrs.push(f64::NAN);
            row.init_means.push(f64::NAN);
            continue;
        }
        let mean = metrics.iter().sum::<f64>() / m as f64;
        let stderr = if m >= 2 {
            let var =
                metrics.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1) as f64;
            (var / m as f64).sqrt()
        } else {
            0.0
        };
        row.means.push(mean);
        row.stderrs.push(stderr);
        row.init_means.push(inits.iter().sum::<f64>() / m as f64);
    }
    let total = n_dists * trials;
    row.ok = (row.failures as f64) <= MAX_FAILURE_FRACTION * total as f64;
}

// ---------------------------------------------------------------------------
// universality report
// ---------------------------------------------------------------------------

/// Standardized gap between two empirical means.
#[derive(Debug, Clone)]
pub struct UniversalityPair {
    pub a: EntryDistribution,
    pub b: EntryDistribution,
    /// `|m_a - m_b| / sqrt(se_a^2 + se_b^2)`.
    pub gap_sigmas: f64,
}

/// Cross-distribution comparison at one grid point.
#[derive(Debug, Clone)]
pub struct UniversalityRow {
    pub x: f64,
    pub pairs: Vec<UniversalityPair>,
    /// Per-distribution standardized gap to the theory column.
    pub theory_gaps: Vec<(EntryDistribution, f64)>,
    /// True when some gap exceeded the threshold.
    pub flagged: bool,
}

/// Result of [`universality_report`].
#[derive(Debug, Clone)]
pub struct UniversalityReport {
    /// Flagging threshold in standard errors.
    pub threshold: f64,
    pub rows: Vec<UniversalityRow>,
    pub all_within_threshold: bool,
}

/// Compares the per-distribution empirical columns of a sweep against each
/// other and against the theory column, in units of standard error. Gaps
/// above 3 are flagged.
pub fn universality_report(table: &SweepTable) -> Result<UniversalityReport> {
    let threshold = 3.0;
    if table.distributions.len() < 2 {
        return Err(Error::Domain(
            "universality comparison needs at least two entry distributions".into(),
        ));
    }
    let mut rows = Vec::with_capacity(table.rows.len());
    let mut all_ok = true;
    for row in &table.rows {
        if !row.ok {
            continue;
        }
        let mut pairs = Vec::new();
        for i in 0..table.distributions.len() {
            for j in i + 1..table.distributions.len() {
                let denom = (row.stderrs[i] * row.stderrs[i]
                    + row.stderrs[j] * row.stderrs[j])
                    .sqrt();
                let gap = (row.means[i] - row.means[j]).abs() / denom;
                pairs.push(UniversalityPair {
                    a: table.distributions[i],
                    b: table.distributions[j],
                    gap_sigmas: gap,
                });
            }
        }
        let theory_gaps: Vec<(EntryDistribution, f64)> = table
            .distributions
            .iter()
            .enumerate()
            .map(|(i, &d)| (d, (row.means[i] - row.theory).abs() / row.stderrs[i]))
            .collect();
        let flagged = pairs.iter().any(|p| !(p.gap_sigmas <= threshold))
            || theory_gaps.iter().any(|&(_, g)| !(g <= threshold));
        all_ok &= !flagged;
        rows.push(UniversalityRow {
            x: row.x,
            pairs,
            theory_gaps,
            flagged,
        });
    }
    Ok(UniversalityReport {
        threshold,
        rows,
        all_within_threshold: all_ok,
    })
}

impl std::fmt::Display for UniversalityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "universality report (threshold {} standard errors)",
            self.threshold
        )?;
        for row in &self.rows {
            writeln!(f, "  x = {}", row.x)?;
            for p in &row.pairs {
                writeln!(
                    f,
                    "    {:>5} vs {:<5} gap = {:.3} se{}",
                    p.a.tag(),
                    p.b.tag(),
                    p.gap_sigmas,
                    if p.gap_sigmas > self.threshold {
                        "  <-- flagged"
                    } else {
                        ""
                    }
                )?;
            }
            for (d, g) in &row.theory_gaps {
                writeln!(
                    f,
                    "    {:>5} vs theory gap = {:.3} se{}",
                    d.tag(),
                    g,
                    if *g > self.threshold {
                        "  <-- flagged"
                    } else {
                        ""
                    }
                )?;
            }
        }
        writeln!(
            f,
            "verdict: {}",
            if self.all_within_threshold {
                "all gaps within threshold"
            } else {
                "some gaps exceed the threshold"
            }
        )
    }
}

// ---------------------------------------------------------------------------
// rendering
// ---------------------------------------------------------------------------

/// Renders the whitespace-separated plot table with its header row. Missing
/// rows render as `#`-prefixed comments carrying the failure reason.
pub fn render_dat(table: &SweepTable) -> String {
    let mut out = String::new();
    let mut header = vec![table.variable.to_string()];
    match table.kind {
        SweepKind::Regression => {
            for d in &table.distributions {
                header.push(format!("gen{}", d.tag()));
            }
            header.push(table.theory_label.clone());
            header.push("genlwrbnd".to_string());
        }
        SweepKind::Classification => {
            header.push("eaGauss".to_string());
            for d in &table.distributions {
                header.push(format!("ep{}", d.tag()));
            }
            header.push(table.theory_label.clone());
        }
    }
    out.push_str(&header.join(" "));
    out.push('\n');
    for row in &table.rows {
        if !row.ok {
            let _ = writeln!(
                out,
                "# missing {} = {}: {}",
                table.variable,
                row.x,
                row.failure_reason.as_deref().unwrap_or("unknown failure")
            );
            continue;
        }
        let mut fields = vec![format!("{}", row.x)];
        match table.kind {
            SweepKind::Regression => {
                for m in &row.means {
                    fields.push(format!("{m}"));
                }
                fields.push(format!("{}", row.theory));
                fields.push(format!(
                    "{}",
                    row.lower_bound.expect("regression rows carry a lower bound")
                ));
            }
            SweepKind::Classification => {
                // The empirical warm-start column reports the Gaussian
                // design, matching the plot-table schema.
                let gauss_idx = table
                    .distributions
                    .iter()
                    .position(|d| *d == EntryDistribution::StandardGaussian)
                    .unwrap_or(0);
                fields.push(format!("{}", row.init_means[gauss_idx]));
                for m in &row.means {
                    fields.push(format!("{m}"));
                }
                fields.push(format!("{}", row.theory));
            }
        }
        out.push_str(&fields.join(" "));
        out.push('\n');
    }
    out
}

/// Writes [`render_dat`] to a file.
pub fn write_dat(table: &SweepTable, path: &Path) -> Result<()> {
    std::fs::write(path, render_dat(table))?;
    Ok(())
}

/// Renders the richer CSV: everything in the `.dat` table plus sample
/// counts, standard errors, warm-start columns, theory floors, and failure
/// counts.
pub fn render_csv(table: &SweepTable) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header = vec![table.variable.to_string(), "n".to_string()];
    if table.kind == SweepKind::Classification {
        header.push("sigma2".to_string());
        header.push("eaThm".to_string());
        header.push("oracle".to_string());
    }
    for d in &table.distributions {
        if table.kind == SweepKind::Classification {
            header.push(format!("ea{}", d.tag()));
        }
        header.push(format!("mean{}", d.tag()));
        header.push(format!("stderr{}", d.tag()));
    }
    header.push(table.theory_label.clone());
    if table.kind == SweepKind::Regression {
        header.push("genlwrbnd".to_string());
    }
    header.push("failures".to_string());
    header.push("status".to_string());
    wtr.write_record(&header).map_err(csv_error)?;

    for row in &table.rows {
        let mut rec = vec![format!("{}", row.x), format!("{}", row.n)];
        if table.kind == SweepKind::Classification {
            rec.push(format!("{}", row.sigma2.unwrap_or(f64::NAN)));
            rec.push(format!("{}", row.init_theory.unwrap_or(f64::NAN)));
            rec.push(format!("{}", row.lower_bound.unwrap_or(f64::NAN)));
        }
        for i in 0..table.distributions.len() {
            if table.kind == SweepKind::Classification {
                rec.push(format!("{}", row.init_means[i]));
            }
            rec.push(format!("{}", row.means[i]));
            rec.push(format!("{}", row.stderrs[i]));
        }
        rec.push(format!("{}", row.theory));
        if table.kind == SweepKind::Regression {
            rec.push(format!("{}", row.lower_bound.unwrap_or(f64::NAN)));
        }
        rec.push(format!("{}", row.failures));
        rec.push(if row.ok {
            "ok".to_string()
        } else {
            format!(
                "missing: {}",
                row.failure_reason.as_deref().unwrap_or("unknown")
            )
        });
        wtr.write_record(&rec).map_err(csv_error)?;
    }
    let bytes = wtr.into_inner().map_err(|e| Error::Domain(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Domain(e.to_string()))
}

fn csv_error(e: csv::Error) -> Error {
    Error::Domain(format!("csv rendering failed: {e}"))
}

/// Writes [`render_csv`] to a file.
pub fn write_csv(table: &SweepTable, path: &Path) -> Result<()> {
    std::fs::write(path, render_csv(table)?)?;
    Ok(())
}

/// Plot-table file name for a regression sweep: noise level and spectrum
/// folded into the stem, e.g. `regsig15e-2bilevelr0=1r1=5.dat`.
pub fn regression_dat_name(sigma: f64, density: &SpectralDensity) -> String {
    let sig = if sigma == sigma.trunc() {
        format!("{}", sigma)
    } else {
        // Hundredths notation: 0.15 -> 15e-2.
        format!("{}e-2", (sigma * 100.0).round() as i64)
    };
    let spectrum = match density {
        SpectralDensity::Atoms(pairs) if pairs.len() == 1 => format!("singler0={}", pairs[0].0),
        SpectralDensity::Atoms(pairs) => {
            let mut s = String::from("bilevel");
            for (i, &(loc, _)) in pairs.iter().enumerate() {
                let _ = write!(s, "r{i}={loc}");
            }
            s
        }
        SpectralDensity::Uniform { lower, upper, .. } => format!("unifr0={lower}r1={upper}"),
        SpectralDensity::Quadrature(_) => "quad".to_string(),
    };
    format!("regsig{sig}{spectrum}.dat")
}

/// Plot-table file name for a classification sweep, e.g.
/// `class_kap_rho1.dat` (kappa sweep at `rho = 1`, default confounder) or
/// `class_rho_kap2c1.dat` (rho sweep at `kappa = 2`, `c = 1`).
pub fn classification_dat_name(variable: SweepVariable, fixed: f64, t_eta: f64) -> String {
    match variable {
        SweepVariable::Kappa => {
            let c = if t_eta == 1.0 {
                String::new()
            } else {
                format!("c{t_eta}")
            };
            format!("class_kap_rho{fixed}{c}.dat")
        }
        SweepVariable::Rho => format!("class_rho_kap{fixed}c{t_eta}.dat"),
        SweepVariable::Sigma => format!("class_sig{fixed}c{t_eta}.dat"),
    }
}

/// Emits a small gnuplot script that plots every listed `.dat` file:
/// empirical columns as points, theory columns as lines.
pub fn gnuplot_script(dat_files: &[(String, SweepKind, usize)]) -> String {
    let mut s = String::new();
    s.push_str("# gnuplot script generated by the sweep harness\n");
    s.push_str("set key autotitle columnhead\n");
    s.push_str("set style data points\n\n");
    for (file, kind, n_dists) in dat_files {
        let _ = writeln!(s, "set title \"{file}\"");
        let mut parts = Vec::new();
        match kind {
            SweepKind::Regression => {
                for i in 0..*n_dists {
                    parts.push(format!("\"{file}\" using 1:{} with points", i + 2));
                }
                parts.push(format!(
                    "\"{file}\" using 1:{} with lines",
                    n_dists + 2
                ));
                parts.push(format!(
                    "\"{file}\" using 1:{} with lines dashtype 2",
                    n_dists + 3
                ));
            }
            SweepKind::Classification => {
                parts.push(format!("\"{file}\" using 1:2 with points"));
                for i in 0..*n_dists {
                    parts.push(format!("\"{file}\" using 1:{} with points", i + 3));
                }
                parts.push(format!(
                    "\"{file}\" using 1:{} with lines",
                    n_dists + 3
                ));
            }
        }
        let _ = writeln!(s, "plot {}", parts.join(", \\\n     "));
        s.push_str("pause -1\n\n");
    }
    s
}

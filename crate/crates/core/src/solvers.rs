//! Finite-size solvers: offset min-norm interpolation, its ridge relaxation,
//! and (mirror) stochastic gradient descent run to interpolation.
//!
//! All solvers work on an `n x d` design with `n < d` and a warm start `w0`,
//! and agree about what they compute: `min_norm_interpolate` returns the
//! exact constrained minimizer of `|w - w0|` subject to `X w = y`, SGD
//! converges to the same point from `w0`, and mirror descent generalizes the
//! distance being minimized through a coordinatewise potential.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

/// Relative pivot floor for the Gram Cholesky: pivots below
/// `1e-12 * trace(K)/n` are treated as rank deficiency.
const PIVOT_REL_FLOOR: f64 = 1e-12;

/// Solves `min |w - w0|_2` subject to `X w = y` via the normal system on the
/// Gram matrix: `w = w0 + X^T u`, `(X X^T) u = y - X w0`.
///
/// The Gram factorization must succeed with every pivot above
/// `1e-12 * trace / n`, otherwise the design is reported rank-deficient.
pub fn min_norm_interpolate(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    w0: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_shapes(x, y, w0)?;
    let gram = x * x.transpose();
    let chol = cholesky_checked(gram)?;
    let u = chol.solve(&(y - x * w0));
    Ok(w0 + x.transpose() * u)
}

/// Solves the offset ridge problem
/// `min_w lambda/2 |X w - y|^2 + |w - w0|^2`,
/// whose stationarity condition is `lambda X^T (X w - y) + 2 (w - w0) = 0`.
///
/// Computed on the `n x n` side: `w = w0 + lambda X^T (2 I + lambda X X^T)^{-1} (y - X w0)`,
/// which recovers [`min_norm_interpolate`] as `lambda -> infinity`.
pub fn ridge_offset_solve(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    w0: &DVector<f64>,
    lambda: f64,
) -> Result<DVector<f64>> {
    check_shapes(x, y, w0)?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!(
            "ridge weight lambda must be finite and positive, got {lambda}"
        )));
    }
    let n = x.nrows();
    let mut m = x * x.transpose() * lambda;
    for i in 0..n {
        m[(i, i)] += 2.0;
    }
    let chol = cholesky_checked(m)?;
    let u = chol.solve(&(y - x * w0));
    Ok(w0 + x.transpose() * (lambda * u))
}

/// Coordinatewise mirror potential: `grad` maps primal to mirror
/// coordinates, `grad_inv` maps back. Both must be strictly increasing
/// bijections of the real line.
pub trait MirrorMap {
    fn grad(&self, w: f64) -> f64;
    fn grad_inv(&self, z: f64) -> f64;
}

/// Potential `|w|^2 / 2`: mirror coordinates coincide with primal ones, so
/// mirror descent reduces to plain SGD, update for update.
#[derive(Debug, Clone, Copy, Default)]
pub struct QuadraticMirror;

impl MirrorMap for QuadraticMirror {
    fn grad(&self, w: f64) -> f64 {
        w
    }
    fn grad_inv(&self, z: f64) -> f64 {
        z
    }
}

/// Potential with gradient `asinh(w)`: quadratic near zero, logarithmic in
/// the tails. A convenient genuinely non-quadratic mirror for exercising
/// [`smd_run`].
#[derive(Debug, Clone, Copy, Default)]
pub struct AsinhMirror;

impl MirrorMap for AsinhMirror {
    fn grad(&self, w: f64) -> f64 {
        w.asinh()
    }
    fn grad_inv(&self, z: f64) -> f64 {
        z.sinh()
    }
}

/// Knobs for [`sgd_run`] / [`smd_run`].
#[derive(Debug, Clone)]
pub struct SgdOptions {
    /// Constant step size; `None` picks `0.9 / lambda_max_estimate`.
    pub step: Option<f64>,
    /// Hard cap on passes over the data.
    pub max_epochs: usize,
    /// Convergence threshold on `|X w - y| / max(1, |y|)`.
    pub tol: f64,
    /// Seed for the per-epoch sample shuffling (and the power-iteration
    /// start when the step is defaulted).
    pub seed: u64,
}

impl Default for SgdOptions {
    fn default() -> Self {
        SgdOptions {
            step: None,
            max_epochs: 50_000,
            tol: 1e-10,
            seed: 0,
        }
    }
}

/// What happened during an SGD/SMD run.
#[derive(Debug, Clone, Copy)]
pub struct SgdReport {
    /// Residual dropped below the tolerance.
    pub converged: bool,
    /// Residual blew up (or went non-finite); iteration stopped early.
    pub diverged: bool,
    /// Epochs actually performed.
    pub epochs: usize,
    /// Final relative residual `|X w - y| / max(1, |y|)`.
    pub final_residual: f64,
    /// Step size used.
    pub step: f64,
    /// Power-iteration estimate of the top Gram eigenvalue.
    pub lambda_max_estimate: f64,
    /// Set when the step exceeds `1 / lambda_max_estimate`, the safe range
    /// for convergence on interpolating problems.
    pub step_warning: bool,
}

/// Cyclic single-sample SGD on `|X w - y|^2 / 2` started at `w0`, with a
/// fresh shuffle of the sample order every epoch.
///
/// On interpolating problems (`n < d`, full-rank design) this converges to
/// the same point as [`min_norm_interpolate`]. Implemented as mirror descent
/// with the quadratic potential, so the two paths cannot drift apart.
pub fn sgd_run(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    w0: &DVector<f64>,
    opts: &SgdOptions,
) -> Result<(DVector<f64>, SgdReport)> {
    smd_run(x, y, w0, &QuadraticMirror, opts)
}

/// Stochastic mirror descent: the update runs in mirror coordinates
/// `z = grad(w)`, `z -= step * (x_i . w - y_i) x_i`, `w = grad_inv(z)`.
///
/// With the quadratic potential this is exactly [`sgd_run`]; other
/// potentials converge (when they converge) to the interpolator minimizing
/// the corresponding Bregman divergence from `w0`.
pub fn smd_run<M: MirrorMap>(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    w0: &DVector<f64>,
    mirror: &M,
    opts: &SgdOptions,
) -> Result<(DVector<f64>, SgdReport)> {
    check_shapes(x, y, w0)?;
    if !(opts.tol > 0.0) {
        return Err(Error::Domain(format!(
            "convergence tolerance must be positive, got {}",
            opts.tol
        )));
    }
    let n = x.nrows();
    let mut rng = ChaCha12Rng::seed_from_u64(opts.seed);
    let lambda_max = estimate_lambda_max(x, &mut rng);
    let step = match opts.step {
        Some(s) if s > 0.0 && s.is_finite() => s,
        Some(s) => {
            return Err(Error::Domain(format!(
                "step size must be finite and positive, got {s}"
            )));
        }
        None => 0.9 / lambda_max,
    };
    let step_warning = step > 1.0 / lambda_max;

    // Samples as contiguous columns: x_t is d x n, so the inner loop walks
    // memory linearly.
    let x_t = x.transpose();
    let mut z = w0.map(|w| mirror.grad(w));
    let mut w = z.map(|v| mirror.grad_inv(v));
    let mut order: Vec<usize> = (0..n).collect();
    let y_scale = y.norm().max(1.0);
    let initial_residual = (x * &w - y).norm() / y_scale;
    let mut report = SgdReport {
        converged: false,
        diverged: false,
        epochs: 0,
        final_residual: initial_residual,
        step,
        lambda_max_estimate: lambda_max,
        step_warning,
    };

    for epoch in 0..opts.max_epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let xi = x_t.column(i);
            let margin = xi.dot(&w) - y[i];
            z.axpy(-step * margin, &xi, 1.0);
            for (wj, zj) in w.iter_mut().zip(z.iter()) {
                *wj = mirror.grad_inv(*zj);
            }
        }
        let residual = (x * &w - y).norm() / y_scale;
        report.epochs = epoch + 1;
        report.final_residual = residual;
        if !residual.is_finite() || residual > 1e6 * initial_residual.max(1.0) {
            report.diverged = true;
            break;
        }
        if residual <= opts.tol {
            report.converged = true;
            break;
        }
    }
    Ok((w, report))
}

/// Rescales the warm start by the least-squares coefficient of `y` on
/// `X w0`: returns `(alpha, alpha * w0)` with `alpha = y . (X w0) / |X w0|^2`.
pub fn renormalize_alpha(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    w0: &DVector<f64>,
) -> Result<(f64, DVector<f64>)> {
    check_shapes(x, y, w0)?;
    let v = x * w0;
    let denom = v.norm_squared();
    if denom == 0.0 {
        return Err(Error::Degenerate(
            "warm start lies in the null space of the design; nothing to rescale".into(),
        ));
    }
    let alpha = y.dot(&v) / denom;
    Ok((alpha, w0 * alpha))
}

fn check_shapes(x: &DMatrix<f64>, y: &DVector<f64>, w0: &DVector<f64>) -> Result<()> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::Domain("empty design matrix".into()));
    }
    if y.len() != x.nrows() || w0.len() != x.ncols() {
        return Err(Error::Domain(format!(
            "shape mismatch: X is {}x{}, y has {}, w0 has {}",
            x.nrows(),
            x.ncols(),
            y.len(),
            w0.len()
        )));
    }
    Ok(())
}

/// Cholesky with an explicit relative pivot floor: the factorization is
/// rejected as rank-deficient if any pivot falls below
/// `PIVOT_REL_FLOOR * trace / n`.
fn cholesky_checked(k: DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let n = k.nrows();
    let pivot_floor = PIVOT_REL_FLOOR * k.trace() / n as f64;
    let chol = nalgebra::Cholesky::new(k).ok_or_else(|| {
        Error::RankDeficient("Gram matrix is not positive definite".into())
    })?;
    let min_pivot = (0..n)
        .map(|i| {
            let l = chol.l_dirty()[(i, i)];
            l * l
        })
        .fold(f64::INFINITY, f64::min);
    if min_pivot < pivot_floor {
        return Err(Error::RankDeficient(format!(
            "smallest Cholesky pivot {min_pivot:e} sits below the floor {pivot_floor:e}"
        )));
    }
    Ok(chol)
}

/// Power iteration for the top eigenvalue of `X X^T`, run matrix-free.
fn estimate_lambda_max<R: Rng>(x: &DMatrix<f64>, rng: &mut R) -> f64 {
    let n = x.nrows();
    let mut v = DVector::from_fn(n, |_, _| rng.gen::<f64>() - 0.5);
    if v.norm() == 0.0 {
        v = DVector::from_element(n, 1.0);
    }
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..60 {
        let mut kv = x * (x.transpose() * &v);
        lambda = kv.norm();
        if lambda == 0.0 {
            return f64::MIN_POSITIVE;
        }
        kv /= lambda;
        v = kv;
    }
    lambda.max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small_instance(n: usize, d: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng));
        let y = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let w0 = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
        (x, y, w0)
    }

    #[test]
    fn interpolator_fits_exactly_and_stays_in_the_row_space() {
        let (x, y, w0) = small_instance(40, 90, 7);
        let w = min_norm_interpolate(&x, &y, &w0).unwrap();
        let feas = (&x * &w - &y).norm() / y.norm().max(1.0);
        assert!(feas <= 1e-10, "feasibility residual {feas}");
        // w - w0 must lie in the row space: project onto it and compare.
        let gram = &x * x.transpose();
        let chol = nalgebra::Cholesky::new(gram).unwrap();
        let v = &w - &w0;
        let proj = x.transpose() * chol.solve(&(&x * &v));
        assert!((&v - &proj).norm() / v.norm() <= 1e-10);
    }

    #[test]
    fn interpolator_beats_every_other_feasible_point() {
        let (x, y, w0) = small_instance(25, 60, 11);
        let w = min_norm_interpolate(&x, &y, &w0).unwrap();
        // Any feasible competitor is w plus a null-space direction; moving
        // along one must increase the distance from w0.
        let dist = (&w - &w0).norm();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..5 {
            use rand_distr::{Distribution, StandardNormal};
            let raw = DVector::from_fn(x.ncols(), |_, _| StandardNormal.sample(&mut rng));
            // Project raw onto the null space of X via the Gram solve.
            let gram = &x * x.transpose();
            let chol = nalgebra::Cholesky::new(gram).unwrap();
            let null_dir = &raw - x.transpose() * chol.solve(&(&x * &raw));
            let competitor = &w + &null_dir * 0.1;
            assert!((&x * &competitor - &y).norm() <= 1e-8 * y.norm().max(1.0));
            assert!((&competitor - &w0).norm() >= dist - 1e-12);
        }
    }

    #[test]
    fn duplicated_rows_are_reported_rank_deficient() {
        let (mut x, mut y, w0) = small_instance(30, 80, 23);
        let dup = x.row(0).clone_owned();
        x.set_row(29, &dup);
        y[29] = y[0];
        match min_norm_interpolate(&x, &y, &w0) {
            Err(Error::RankDeficient(_)) => {}
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn ridge_satisfies_stationarity_and_tends_to_the_interpolator() {
        let (x, y, w0) = small_instance(30, 70, 5);
        let lambda = 3.5;
        let w = ridge_offset_solve(&x, &y, &w0, lambda).unwrap();
        let grad = x.transpose() * (&x * &w - &y) * lambda + (&w - &w0) * 2.0;
        assert!(grad.norm() <= 1e-8 * (1.0 + w.norm()));

        let w_inf = ridge_offset_solve(&x, &y, &w0, 1e12).unwrap();
        let w_mn = min_norm_interpolate(&x, &y, &w0).unwrap();
        assert!((w_inf - &w_mn).norm() <= 1e-5 * w_mn.norm());
    }

    #[test]
    fn sgd_converges_to_the_min_norm_interpolator() {
        let (x, y, w0) = small_instance(30, 80, 41);
        let w_mn = min_norm_interpolate(&x, &y, &w0).unwrap();
        let opts = SgdOptions {
            tol: 1e-12,
            ..SgdOptions::default()
        };
        let (w, report) = sgd_run(&x, &y, &w0, &opts).unwrap();
        assert!(report.converged, "report: {report:?}");
        assert!(!report.step_warning);
        assert!((w - w_mn).norm() <= 1e-6);
    }

    #[test]
    fn oversized_steps_are_flagged_and_diverge() {
        let (x, y, w0) = small_instance(30, 80, 4);
        // Per-sample updates contract only while step * |x_i|^2 < 2; with
        // |x_i|^2 ~ d, a step of 6/d expands every sample by a factor of
        // about 5 and the iterates blow up within a few epochs.
        let opts = SgdOptions {
            step: Some(6.0 / 80.0),
            max_epochs: 2_000,
            ..SgdOptions::default()
        };
        let (_, report) = sgd_run(&x, &y, &w0, &opts).unwrap();
        assert!(report.step_warning);
        assert!(report.diverged, "report: {report:?}");
        assert!(!report.converged);
    }

    #[test]
    fn quadratic_mirror_descent_is_sgd_bit_for_bit() {
        let (x, y, w0) = small_instance(20, 50, 9);
        let opts = SgdOptions {
            max_epochs: 50,
            tol: 1e-14,
            seed: 1234,
            ..SgdOptions::default()
        };
        let (w_sgd, r_sgd) = sgd_run(&x, &y, &w0, &opts).unwrap();
        let (w_smd, r_smd) = smd_run(&x, &y, &w0, &QuadraticMirror, &opts).unwrap();
        assert_eq!(w_sgd.as_slice(), w_smd.as_slice());
        assert_eq!(r_sgd.epochs, r_smd.epochs);
        assert_eq!(r_sgd.final_residual, r_smd.final_residual);
    }

    #[test]
    fn asinh_mirror_interpolates_with_the_mirror_offset_in_the_row_space() {
        let (x, y, w0) = small_instance(15, 40, 77);
        let opts = SgdOptions {
            max_epochs: 200_000,
            tol: 1e-11,
            ..SgdOptions::default()
        };
        let mirror = AsinhMirror;
        let (w, report) = smd_run(&x, &y, &w0, &mirror, &opts).unwrap();
        assert!(report.converged, "report: {report:?}");
        // First-order optimality of the Bregman projection: the mirror-space
        // displacement grad(w) - grad(w0) lies in the row space of X.
        let v = DVector::from_iterator(
            w.len(),
            w.iter().zip(w0.iter()).map(|(&a, &b)| mirror.grad(a) - mirror.grad(b)),
        );
        let gram = &x * x.transpose();
        let chol = nalgebra::Cholesky::new(gram).unwrap();
        let proj = x.transpose() * chol.solve(&(&x * &v));
        assert!(
            (&v - &proj).norm() / v.norm() <= 1e-6,
            "mirror displacement leaves the row space by {}",
            (&v - &proj).norm() / v.norm()
        );
    }

    #[test]
    fn alpha_rescaling_matches_the_least_squares_coefficient() {
        let (x, y, w0) = small_instance(30, 60, 15);
        let (alpha, scaled) = renormalize_alpha(&x, &y, &w0).unwrap();
        let v = &x * &w0;
        assert_abs_diff_eq!(alpha, y.dot(&v) / v.norm_squared(), epsilon = 1e-15);
        assert_eq!(scaled.len(), w0.len());
    }

    #[test]
    fn alpha_rescaled_start_is_invariant_to_power_of_two_scalings() {
        let (x, y, w0) = small_instance(30, 60, 19);
        let (_, base) = renormalize_alpha(&x, &y, &w0).unwrap();
        for &c in &[0.5, 2.0, 1024.0] {
            let (_, scaled) = renormalize_alpha(&x, &y, &(&w0 * c)).unwrap();
            assert_eq!(base.as_slice(), scaled.as_slice());
        }
    }

    #[test]
    fn zero_warm_start_image_is_degenerate_for_alpha() {
        let x = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let y = DVector::from_element(1, 1.0);
        let w0 = DVector::from_column_slice(&[0.0, 1.0]);
        assert!(renormalize_alpha(&x, &y, &w0).is_err());
    }

    #[test]
    fn shape_mismatches_are_rejected() {
        let (x, y, w0) = small_instance(10, 20, 1);
        let bad_y = DVector::from_element(11, 0.0);
        let bad_w0 = DVector::from_element(19, 0.0);
        assert!(min_norm_interpolate(&x, &bad_y, &w0).is_err());
        assert!(min_norm_interpolate(&x, &y, &bad_w0).is_err());
        assert!(ridge_offset_solve(&x, &y, &w0, 0.0).is_err());
    }
}

//! Asymptotic generalization error of offset min-norm interpolation in
//! overparametrized linear regression.
//!
//! Setting: `n` noisy observations of a linear target in dimension
//! `d = kappa * n` with `kappa > 1`, solved by the interpolator closest to a
//! warm start `w0` whose whitened offset from the target has mean-square
//! size `e_a`. As `n` and `d` grow with the ratio fixed, the generalization
//! error concentrates on a deterministic value that depends on the data only
//! through `kappa`, the noise variance `sigma2`, the offset size `e_a`, and
//! the limiting eigenvalue density of the feature covariance.
//!
//! This module computes that limit: a scalar fixed point `theta`, a spectral
//! moment `t`, the predicted error `e_p`, a universal lower bound over
//! covariance choices, and the break-even analysis of when warm-starting
//! beats learning from scratch.

use crate::error::{Error, Result};
use crate::spectral::SpectralDensity;

/// Relative width at which the bisection bracket for `theta` is handed to
/// Newton polish.
const THETA_BISECT_TOL: f64 = 1e-13;

/// Parameter point for the regression prediction.
#[derive(Debug, Clone)]
pub struct RegressionEnsemble {
    /// Overparametrization ratio `d / n`; must exceed 1.
    pub kappa: f64,
    /// Label noise variance.
    pub sigma2: f64,
    /// Mean-square size of the whitened warm-start offset.
    pub e_a: f64,
    /// Limiting eigenvalue density of the feature covariance.
    pub density: SpectralDensity,
}

/// Everything the asymptotic theory says about one parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionPrediction {
    /// Root of the spectral fixed-point equation.
    pub theta: f64,
    /// Second spectral moment of the resolvent kernel.
    pub t: f64,
    /// Predicted generalization error of the offset interpolator.
    pub e_p: f64,
    /// Infimum of `e_p` over all covariance densities at this
    /// `(kappa, sigma2, e_a)`, attained exactly by isotropic covariances.
    pub lower_bound: f64,
}

impl RegressionEnsemble {
    /// Validates the parameter point.
    pub fn new(kappa: f64, sigma2: f64, e_a: f64, density: SpectralDensity) -> Result<Self> {
        if !(kappa > 1.0) || !kappa.is_finite() {
            return Err(Error::Domain(format!(
                "overparametrization ratio kappa must be finite and exceed 1, got {kappa}"
            )));
        }
        if !(sigma2 >= 0.0) || !sigma2.is_finite() {
            return Err(Error::Domain(format!(
                "noise variance sigma2 must be finite and non-negative, got {sigma2}"
            )));
        }
        if !(e_a >= 0.0) || !e_a.is_finite() {
            return Err(Error::Domain(format!(
                "warm-start offset size e_a must be finite and non-negative, got {e_a}"
            )));
        }
        Ok(RegressionEnsemble {
            kappa,
            sigma2,
            e_a,
            density,
        })
    }

    /// Runs the full prediction chain at this parameter point.
    pub fn predict(&self) -> Result<RegressionPrediction> {
        let theta = solve_theta_regression(&self.density, self.kappa)?;
        let t = compute_t(&self.density, theta)?;
        let denom = self.kappa * (1.0 - t) - 1.0;
        if denom <= 1e-14 {
            return Err(Error::Degenerate(format!(
                "kappa (1 - t) - 1 = {denom} is not safely positive at kappa = {}",
                self.kappa
            )));
        }
        let e_p = ((2.0 - self.kappa * (1.0 - t)) * self.sigma2 + t * self.e_a) / denom;
        let lower_bound = regression_lower_bound(self.kappa, self.sigma2, self.e_a)?;
        Ok(RegressionPrediction {
            theta,
            t,
            e_p,
            lower_bound,
        })
    }
}

/// Solves the spectral fixed point
/// `∫ 2 p(r) / (2 + theta r) dr = (kappa - 1) / kappa`
/// for `theta > 0` by bracketed bisection plus Newton polish.
///
/// The left side decreases continuously from 1 at `theta = 0` toward 0, so a
/// unique positive root exists for every `kappa > 1`.
pub fn solve_theta_regression(density: &SpectralDensity, kappa: f64) -> Result<f64> {
    if !(kappa > 1.0) || !kappa.is_finite() {
        return Err(Error::Domain(format!(
            "spectral fixed point requires kappa > 1, got {kappa}"
        )));
    }
    let target = (kappa - 1.0) / kappa;
    let residual =
        |theta: f64| -> Result<f64> { Ok(density.integrate(|r| 2.0 / (2.0 + theta * r))? - target) };

    let mut lo = 0.0;
    let mut hi = 1.0;
    while residual(hi)? > 0.0 {
        hi *= 2.0;
        if hi > 1e15 {
            return Err(Error::RootSearch(format!(
                "no sign change for the regression fixed point below theta = {hi:e} \
                 (kappa = {kappa})"
            )));
        }
    }
    while hi - lo > THETA_BISECT_TOL * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if residual(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut theta = 0.5 * (lo + hi);
    for _ in 0..2 {
        let res = residual(theta)?;
        let slope = density.integrate(|r| -2.0 * r / ((2.0 + theta * r) * (2.0 + theta * r)))?;
        if slope == 0.0 {
            break;
        }
        theta -= res / slope;
    }
    Ok(theta)
}

/// Spectral moment `t = ∫ 4 p(r) / (2 + theta r)^2 dr`.
///
/// For the `theta` solving the fixed point at ratio `kappa`, this always
/// lands strictly inside `(((kappa-1)/kappa)^2, (kappa-1)/kappa)`.
pub fn compute_t(density: &SpectralDensity, theta: f64) -> Result<f64> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::Domain(format!(
            "spectral moment t needs theta > 0, got {theta}"
        )));
    }
    density.integrate(|r| {
        let g = 2.0 + theta * r;
        4.0 / (g * g)
    })
}

/// Infimum of the predicted error over all covariance spectra:
/// `sigma2 / (kappa - 1) + ((kappa - 1) / kappa) e_a`.
///
/// Isotropic covariances attain it exactly; any spread in the spectrum makes
/// the prediction strictly larger.
pub fn regression_lower_bound(kappa: f64, sigma2: f64, e_a: f64) -> Result<f64> {
    if !(kappa > 1.0) || !kappa.is_finite() {
        return Err(Error::Domain(format!(
            "lower bound requires kappa > 1, got {kappa}"
        )));
    }
    Ok(sigma2 / (kappa - 1.0) + (kappa - 1.0) / kappa * e_a)
}

/// Break-even analysis of warm-starting, optimized over `kappa`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferBenefit {
    /// Whether interpolating from the warm start can beat its own starting
    /// error `e_a` at some overparametrization ratio.
    pub helps: bool,
    /// Best achievable lower-bound error over `kappa > 1`: the infimum of
    /// the isotropic prediction, or `e_a` itself when warm-starting cannot
    /// improve on it.
    pub best_error: f64,
    /// Ratio attaining the minimum, or `None` when the infimum sits at a
    /// boundary (`kappa -> 1` or `kappa -> infinity`) and is not attained.
    pub argmin_kappa: Option<f64>,
}

/// Minimizes the isotropic lower bound over the overparametrization ratio.
///
/// Training on fresh data helps exactly when the noise level `sigma` is at
/// most `sqrt(e_a)`; the best error is then `sigma (2 sqrt(e_a) - sigma)`.
/// The minimizing `kappa` is located by numerically root-finding the
/// stationarity condition of the bound, with no use of the argmin closed
/// form.
pub fn transfer_benefit(sigma: f64, e_a: f64) -> Result<TransferBenefit> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::Domain(format!(
            "noise level sigma must be finite and non-negative, got {sigma}"
        )));
    }
    if !(e_a >= 0.0) || !e_a.is_finite() {
        return Err(Error::Domain(format!(
            "warm-start error e_a must be finite and non-negative, got {e_a}"
        )));
    }
    let helps = e_a >= sigma * sigma;
    let best_error = if helps {
        sigma * (2.0 * e_a.sqrt() - sigma)
    } else {
        e_a
    };
    let argmin_kappa = stationary_ratio(sigma, e_a).map(|u| 1.0 + u);
    Ok(TransferBenefit {
        helps,
        best_error,
        argmin_kappa,
    })
}

/// Locates the interior stationary point of the lower bound in `u = kappa - 1`
/// by bracketing the sign change of its derivative
/// `g(u) = e_a / (1 + u)^2 - sigma^2 / u^2`, or returns `None` when `g`
/// never changes sign, i.e. the infimum sits at a boundary.
fn stationary_ratio(sigma: f64, e_a: f64) -> Option<f64> {
    // Noiseless bound decreases all the way to kappa -> 1; nothing interior.
    // (Handled up front: with sigma^2 = 0 the derivative would evaluate to
    // 0/0 once u^2 underflows.)
    if sigma * sigma == 0.0 {
        return None;
    }
    let g = |u: f64| e_a / ((1.0 + u) * (1.0 + u)) - sigma * sigma / (u * u);
    // g is negative near zero (for sigma > 0) and changes sign at most once,
    // so geometric expansion from u = 1 either brackets the root or proves
    // the bound monotone over the whole admissible range.
    let mut lo = 1.0_f64;
    while g(lo) >= 0.0 {
        lo *= 0.5;
        if lo < 1e-300 {
            return None;
        }
    }
    let mut hi = 1.0_f64;
    while g(hi) <= 0.0 {
        hi *= 2.0;
        if hi > 1e300 {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bilevel() -> SpectralDensity {
        SpectralDensity::atoms(vec![(1.0, 0.3), (5.0, 0.7)]).unwrap()
    }

    #[test]
    fn single_atom_theta_has_closed_form() {
        // For one atom at r0 the fixed point gives theta = 2 / (r0 (kappa - 1)).
        for &(r0, kappa) in &[(1.0, 2.0), (1.0, 1.1), (5.0, 3.0), (0.5, 10.0)] {
            let p = SpectralDensity::single_atom(r0).unwrap();
            let theta = solve_theta_regression(&p, kappa).unwrap();
            assert_abs_diff_eq!(theta, 2.0 / (r0 * (kappa - 1.0)), epsilon = 1e-12);
        }
    }

    #[test]
    fn bilevel_fixed_point_matches_reference() {
        let theta = solve_theta_regression(&bilevel(), 2.0).unwrap();
        assert_abs_diff_eq!(theta, 0.62994736696303338, epsilon = 1e-12);
        let t = compute_t(&bilevel(), theta).unwrap();
        assert_abs_diff_eq!(t, 0.27907659937161453, epsilon = 1e-12);
    }

    #[test]
    fn uniform_fixed_point_matches_reference() {
        let p = SpectralDensity::uniform(1.0, 5.0).unwrap();
        let theta = solve_theta_regression(&p, 2.0).unwrap();
        assert_abs_diff_eq!(theta, 0.72448216600227813, epsilon = 1e-12);
        let t = compute_t(&p, theta).unwrap();
        assert_abs_diff_eq!(t, 0.26112800184721837, epsilon = 1e-12);
    }

    #[test]
    fn bilevel_error_prediction_matches_reference() {
        for &(sigma2, want) in &[
            (0.0001, 0.63174026358804919),
            (0.0225, 0.66003656813588423),
            (4.0, 5.6845254671990029),
        ] {
            let ens = RegressionEnsemble::new(2.0, sigma2, 1.0, bilevel()).unwrap();
            assert_abs_diff_eq!(ens.predict().unwrap().e_p, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn uniform_error_prediction_matches_reference() {
        let p = SpectralDensity::uniform(1.0, 5.0).unwrap();
        let ens = RegressionEnsemble::new(2.0, 0.0225, 1.0, p).unwrap();
        let pred = ens.predict().unwrap();
        assert_abs_diff_eq!(pred.e_p, 0.57118198039229985, epsilon = 1e-12);
        assert_abs_diff_eq!(pred.lower_bound, 0.5225, epsilon = 1e-15);
    }

    #[test]
    fn isotropic_covariance_attains_the_lower_bound() {
        for &kappa in &[1.1, 1.25, 1.5, 2.0, 3.0, 5.0, 10.0] {
            let p = SpectralDensity::single_atom(1.0).unwrap();
            let ens = RegressionEnsemble::new(kappa, 0.0225, 1.0, p).unwrap();
            let pred = ens.predict().unwrap();
            assert_abs_diff_eq!(pred.e_p, pred.lower_bound, epsilon = 1e-12);
        }
    }

    #[test]
    fn spread_spectra_sit_strictly_above_the_lower_bound() {
        let uniform = SpectralDensity::uniform(1.0, 5.0).unwrap();
        for density in [bilevel(), uniform] {
            let ens = RegressionEnsemble::new(2.0, 0.0225, 1.0, density).unwrap();
            let pred = ens.predict().unwrap();
            assert!(pred.e_p > pred.lower_bound + 1e-6);
        }
    }

    #[test]
    fn t_sits_in_its_theoretical_window() {
        let uniform = SpectralDensity::uniform(1.0, 5.0).unwrap();
        for density in [bilevel(), uniform] {
            for &kappa in &[1.1, 1.5, 2.0, 4.0, 10.0] {
                let theta = solve_theta_regression(&density, kappa).unwrap();
                let t = compute_t(&density, theta).unwrap();
                let ratio = (kappa - 1.0) / kappa;
                assert!(t > ratio * ratio, "t = {t} too small at kappa = {kappa}");
                assert!(t < 1.0, "t = {t} too large at kappa = {kappa}");
            }
        }
    }

    #[test]
    fn fixed_point_residual_is_tiny() {
        let uniform = SpectralDensity::uniform(1.0, 5.0).unwrap();
        for density in [bilevel(), uniform] {
            for &kappa in &[1.1, 2.0, 10.0] {
                let theta = solve_theta_regression(&density, kappa).unwrap();
                let lhs = density.integrate(|r| 2.0 / (2.0 + theta * r)).unwrap();
                assert!((lhs - (kappa - 1.0) / kappa).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn transfer_helps_below_the_noise_break_even() {
        let b = transfer_benefit(0.5, 1.0).unwrap();
        assert!(b.helps);
        assert_abs_diff_eq!(b.best_error, 0.75, epsilon = 1e-15);
        // Interior minimum; the stationarity closed form puts it at kappa = 2.
        assert_abs_diff_eq!(b.argmin_kappa.unwrap(), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn transfer_cannot_help_above_the_break_even() {
        let b = transfer_benefit(1.5, 1.0).unwrap();
        assert!(!b.helps);
        assert_abs_diff_eq!(b.best_error, 1.0, epsilon = 1e-15);
        assert!(b.argmin_kappa.is_none());
    }

    #[test]
    fn noiseless_case_pushes_the_optimum_to_the_boundary() {
        let b = transfer_benefit(0.0, 1.0).unwrap();
        assert!(b.helps);
        assert_abs_diff_eq!(b.best_error, 0.0, epsilon = 1e-15);
        // The bound decreases all the way to kappa -> 1, so nothing interior.
        assert!(b.argmin_kappa.is_none());
    }

    #[test]
    fn argmin_tracks_the_stationarity_closed_form() {
        for &(sigma, e_a) in &[(0.25, 1.0), (0.5, 1.0), (0.3, 0.36), (0.9, 1.0)] {
            let b = transfer_benefit(sigma, e_a).unwrap();
            let expect = 1.0 / (1.0 - sigma / e_a.sqrt());
            assert_abs_diff_eq!(b.argmin_kappa.unwrap(), expect, epsilon = 1e-8 * expect);
        }
    }

    #[test]
    fn kappa_at_or_below_one_is_rejected() {
        assert!(solve_theta_regression(&bilevel(), 1.0).is_err());
        assert!(RegressionEnsemble::new(0.9, 0.01, 1.0, bilevel()).is_err());
        assert!(regression_lower_bound(1.0, 0.01, 1.0).is_err());
    }
}

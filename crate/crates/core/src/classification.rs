//! Asymptotic test error of offset interpolation in binary Gaussian-mixture
//! classification.
//!
//! Setting: two classes with shared-plus-idiosyncratic means (overlap `r`)
//! and per-class covariances whose joint eigenvalue distribution is a finite
//! atom density. Labels `±1` are fit exactly by the interpolator closest to
//! a rescaled warm start `alpha * w0`, where `w0` mixes the oracle direction
//! (weight `t_star`) with an orthogonal confounder (weight `t_eta`). As
//! `n, d -> infinity` at fixed ratio, the classifier's margin statistic
//! becomes Gaussian: mean `1 - gamma/2`, variance `tau2 - gamma^2/4`, so the
//! test error tends to `q_tail` of their ratio.
//!
//! This module computes that chain — the spectral fixed point `theta`, the
//! warm-start rescaling `alpha`, the alignment coefficient `gamma`, the
//! second moment `tau2` — plus the oracle error floor, the warm start's own
//! error, its inversion (choosing `t_eta` to hit a prescribed warm-start
//! error), a fully closed-form path for isotropic covariances, and the
//! coarse regime classification in the signal-to-noise ratio `rho`.
//!
//! One deliberate extension: ensembles built by [`ClassificationEnsemble::
//! from_error_target`] may carry a *negative* `t_eta^2` when the requested
//! warm-start error is below the oracle floor. Every downstream formula is
//! affine in `t_eta^2`, so the predictions continue smoothly to that range;
//! only an explicit `t_eta` ceases to exist.

use crate::error::{Error, Result};
use crate::spectral::{q_tail, q_tail_inverse, JointSpectralDensity};

/// Relative bracket width at which bisection for `theta` hands over to
/// Newton polish.
const THETA_BISECT_TOL: f64 = 1e-13;

/// Reference sample count behind [`scalar_embedding`]: large enough that the
/// embedded integer geometry represents any `kappa` with up to six decimal
/// digits exactly.
const SCALAR_EMBED_N: usize = 1_000_000;

/// Mean overlap used by [`scalar_embedding`]. The isotropic predictions
/// depend on `r` only through `rho`, so this choice only fixes the reported
/// `theta` and `alpha` scales.
const SCALAR_EMBED_R: f64 = 0.9;

/// Parameter point for the classification prediction.
#[derive(Debug, Clone)]
pub struct ClassificationEnsemble {
    n: usize,
    d: usize,
    r: f64,
    t_star: f64,
    t_eta_sq: f64,
    spectra: JointSpectralDensity,
}

/// Everything the asymptotic theory says about one parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationPrediction {
    /// Root of the spectral fixed-point equation.
    pub theta: f64,
    /// Limiting least-squares rescaling of the warm start.
    pub alpha: f64,
    /// Alignment carried from the rescaled warm start into the margin.
    pub gamma: f64,
    /// Second moment of the margin statistic.
    pub tau2: f64,
    /// Predicted test error `q_tail((1 - gamma/2) / sqrt(tau2 - gamma^2/4))`.
    pub error: f64,
}

impl ClassificationEnsemble {
    /// Builds an ensemble from an explicit confounder weight `t_eta >= 0`.
    pub fn new(
        n: usize,
        d: usize,
        r: f64,
        t_star: f64,
        t_eta: f64,
        spectra: JointSpectralDensity,
    ) -> Result<Self> {
        if !(t_eta >= 0.0) || !t_eta.is_finite() {
            return Err(Error::Domain(format!(
                "confounder weight t_eta must be finite and non-negative, got {t_eta}"
            )));
        }
        Self::with_t_eta_sq(n, d, r, t_star, t_eta * t_eta, spectra)
    }

    /// Builds an ensemble whose `t_eta` is chosen so the warm start's own
    /// test error equals `e_a`.
    ///
    /// Unlike [`invert_w0_error`], this accepts targets below the oracle
    /// floor by continuing the formulas to negative `t_eta^2`; such
    /// ensembles predict fine but have no realizable warm-start vector.
    pub fn from_error_target(
        n: usize,
        d: usize,
        r: f64,
        t_star: f64,
        e_a: f64,
        spectra: JointSpectralDensity,
    ) -> Result<Self> {
        if !(e_a > 0.0 && e_a < 0.5) {
            return Err(Error::Domain(format!(
                "warm-start error target must lie strictly inside (0, 0.5), got {e_a}"
            )));
        }
        if !(t_star > 0.0) || !t_star.is_finite() {
            return Err(Error::Domain(format!(
                "oracle weight t_star must be finite and positive, got {t_star}"
            )));
        }
        let x = solve_confounder_ratio(e_a, &spectra, r, true)?;
        Self::with_t_eta_sq(n, d, r, t_star, x * t_star * t_star, spectra)
    }

    /// Isotropic shortcut: both class covariances are `sigma2 / d` times the
    /// identity.
    pub fn isotropic(
        n: usize,
        d: usize,
        r: f64,
        t_star: f64,
        t_eta: f64,
        sigma2: f64,
    ) -> Result<Self> {
        let spectra = JointSpectralDensity::isotropic(sigma2, d)?;
        Self::new(n, d, r, t_star, t_eta, spectra)
    }

    fn with_t_eta_sq(
        n: usize,
        d: usize,
        r: f64,
        t_star: f64,
        t_eta_sq: f64,
        spectra: JointSpectralDensity,
    ) -> Result<Self> {
        if n == 0 || d <= n {
            return Err(Error::Domain(format!(
                "need 0 < n < d for an overparametrized ensemble, got n = {n}, d = {d}"
            )));
        }
        if !(0.0..1.0).contains(&r) {
            return Err(Error::Domain(format!(
                "mean overlap r must lie in [0, 1), got {r}"
            )));
        }
        if !(t_star > 0.0) || !t_star.is_finite() {
            return Err(Error::Domain(format!(
                "oracle weight t_star must be finite and positive, got {t_star}"
            )));
        }
        if !t_eta_sq.is_finite() {
            return Err(Error::Domain(format!(
                "confounder weight t_eta^2 must be finite, got {t_eta_sq}"
            )));
        }
        Ok(ClassificationEnsemble {
            n,
            d,
            r,
            t_star,
            t_eta_sq,
            spectra,
        })
    }

    /// Sample count.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Feature dimension.
    pub fn d(&self) -> usize {
        self.d
    }

    /// Overparametrization ratio `d / n`.
    pub fn kappa(&self) -> f64 {
        self.d as f64 / self.n as f64
    }

    /// Shared fraction of the class means.
    pub fn r(&self) -> f64 {
        self.r
    }

    /// Warm-start weight on the oracle direction.
    pub fn t_star(&self) -> f64 {
        self.t_star
    }

    /// Squared confounder weight; negative exactly when the ensemble was
    /// continued below the oracle floor.
    pub fn t_eta_sq(&self) -> f64 {
        self.t_eta_sq
    }

    /// Confounder weight, when one exists.
    pub fn t_eta(&self) -> Option<f64> {
        if self.t_eta_sq >= 0.0 {
            Some(self.t_eta_sq.sqrt())
        } else {
            None
        }
    }

    /// Joint eigenvalue density of the class covariances.
    pub fn spectra(&self) -> &JointSpectralDensity {
        &self.spectra
    }

    /// Runs the full prediction chain at this parameter point.
    pub fn predict(&self) -> Result<ClassificationPrediction> {
        predict_class_error(self)
    }
}

/// Solves the classification fixed point
/// `E[ 1 / (1 + (theta/2) sqrt(n/2) (s1 + s2)) ] = (d - n) / d`
/// for `theta > 0` by bracketed bisection plus Newton polish.
pub fn solve_theta_classification(ens: &ClassificationEnsemble) -> Result<f64> {
    let scale = (ens.n as f64 / 2.0).sqrt();
    let target = (ens.d - ens.n) as f64 / ens.d as f64;
    let residual = |theta: f64| -> Result<f64> {
        Ok(ens
            .spectra
            .integrate(|s1, s2| 1.0 / (1.0 + 0.5 * theta * scale * (s1 + s2)))?
            - target)
    };

    let mut lo = 0.0;
    let mut hi = 1.0;
    while residual(hi)? > 0.0 {
        hi *= 2.0;
        if hi > 1e15 {
            return Err(Error::RootSearch(format!(
                "no sign change for the classification fixed point below theta = {hi:e}"
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
        let slope = ens.spectra.integrate(|s1, s2| {
            let den = 1.0 + 0.5 * theta * scale * (s1 + s2);
            -0.5 * scale * (s1 + s2) / (den * den)
        })?;
        if slope == 0.0 {
            break;
        }
        theta -= res / slope;
    }
    Ok(theta)
}

/// Spectral moments of the joint density that the error formulas consume.
/// All are expectations under the atom weights, i.e. traces normalized by
/// the dimension.
struct JointMoments {
    /// `E[1 / (s1 + s2)]`
    j1: f64,
    /// `E[s_i / (s1 + s2)^2]`
    j2: [f64; 2],
    /// `E[s_i]`
    j3: [f64; 2],
}

fn joint_moments(spectra: &JointSpectralDensity) -> Result<JointMoments> {
    Ok(JointMoments {
        j1: spectra.integrate(|s1, s2| 1.0 / (s1 + s2))?,
        j2: [
            spectra.integrate(|s1, s2| s1 / ((s1 + s2) * (s1 + s2)))?,
            spectra.integrate(|s1, s2| s2 / ((s1 + s2) * (s1 + s2)))?,
        ],
        j3: [
            spectra.integrate(|s1, _| s1)?,
            spectra.integrate(|_, s2| s2)?,
        ],
    })
}

/// Normalized trace of the warm-start second-moment matrix against the
/// summed covariance: the quadratic functional of `w0` that drives `alpha`.
fn warm_start_energy(ens: &ClassificationEnsemble, m: &JointMoments) -> f64 {
    let one_r = 1.0 - ens.r;
    ens.t_eta_sq * one_r * (m.j3[0] + m.j3[1]) + 2.0 * ens.t_star * ens.t_star * one_r * m.j1
}

/// Limiting least-squares rescaling of the warm start,
/// `alpha = a / (energy/2 + a^2)` with `a = t_star (1 - r) E[1/(s1+s2)]`.
///
/// This is the deterministic limit of `y^T X w0 / |X w0|^2`.
pub fn compute_alpha(ens: &ClassificationEnsemble) -> Result<f64> {
    let m = joint_moments(&ens.spectra)?;
    let a = ens.t_star * (1.0 - ens.r) * m.j1;
    let denom = 0.5 * warm_start_energy(ens, &m) + a * a;
    if denom <= 0.0 {
        return Err(Error::Degenerate(format!(
            "warm-start energy {denom} lost positivity (continued t_eta^2 = {} too negative)",
            ens.t_eta_sq
        )));
    }
    Ok(a / denom)
}

/// Alignment coefficient `gamma` of the interpolator with the oracle
/// direction, given the fixed point `theta` and rescaling `alpha`.
pub fn compute_gamma(ens: &ClassificationEnsemble, theta: f64, alpha: f64) -> Result<f64> {
    let n = ens.n as f64;
    let d = ens.d as f64;
    let one_r = 1.0 - ens.r;
    let scale = (n / 2.0).sqrt();
    let prefactor = 0.5 + (2.0 * n).sqrt() * theta * one_r * (d - n) / (8.0 * d);
    let e_sinv_d = ens.spectra.integrate(|s1, s2| {
        let s = s1 + s2;
        1.0 / (s * (1.0 + 0.5 * theta * scale * s))
    })?;
    Ok((1.0 - alpha * ens.t_star * one_r * e_sinv_d) / prefactor)
}

/// Second moment `tau2` of the margin statistic, given the upstream chain.
pub fn compute_tau2(
    ens: &ClassificationEnsemble,
    theta: f64,
    alpha: f64,
    gamma: f64,
) -> Result<f64> {
    let n = ens.n as f64;
    let d = ens.d as f64;
    let one_r = 1.0 - ens.r;
    let scale = (n / 2.0).sqrt();
    let dd = |s: f64| 1.0 + 0.5 * theta * scale * s;

    let e_s2_d2 = ens.spectra.integrate(|s1, s2| {
        let s = s1 + s2;
        s * s / (dd(s) * dd(s))
    })?;
    let e_s_d2 = ens.spectra.integrate(|s1, s2| {
        let s = s1 + s2;
        s / (dd(s) * dd(s))
    })?;
    let e_inv_d = ens.spectra.integrate(|s1, s2| 1.0 / dd(s1 + s2))?;
    let e_inv_d2 = ens.spectra.integrate(|s1, s2| {
        let den = dd(s1 + s2);
        1.0 / (den * den)
    })?;
    let e_sinv_d = ens.spectra.integrate(|s1, s2| {
        let s = s1 + s2;
        1.0 / (s * dd(s))
    })?;
    // phi(s) * s where phi collects the warm-start second-moment density:
    // t_eta^2 (1-r)/d + 2 t_star^2 (1-r) / (d s^2).
    let e_phis_d2 = ens.spectra.integrate(|s1, s2| {
        let s = s1 + s2;
        let phi_s = ens.t_eta_sq * one_r * s / d + 2.0 * ens.t_star * ens.t_star * one_r / (d * s);
        phi_s / (dd(s) * dd(s))
    })?;

    let denom = scale * (1.0 - d * theta * theta / 8.0 * e_s2_d2);
    if denom <= 0.0 {
        return Err(Error::Degenerate(format!(
            "margin variance denominator {denom} is not positive"
        )));
    }

    let at = alpha * ens.t_star * one_r;
    let numer = scale * (gamma - 0.25 * gamma * gamma)
        + 0.5 * d * alpha * alpha * scale * e_phis_d2
        - n * theta * gamma * gamma * one_r / 8.0 * e_inv_d
        + n * theta * theta * gamma * gamma * one_r / 32.0 * scale * e_s_d2
        - at * gamma * scale * e_sinv_d
        + at * theta * gamma * n / 4.0 * e_inv_d2;
    Ok(numer / denom)
}

/// Runs the general prediction chain: `theta`, `alpha`, `gamma`, `tau2`,
/// then the Gaussian margin error.
pub fn predict_class_error(ens: &ClassificationEnsemble) -> Result<ClassificationPrediction> {
    let theta = solve_theta_classification(ens)?;
    let alpha = compute_alpha(ens)?;
    let gamma = compute_gamma(ens, theta, alpha)?;
    let tau2 = compute_tau2(ens, theta, alpha, gamma)?;
    let error = margin_error(gamma, tau2)?;
    Ok(ClassificationPrediction {
        theta,
        alpha,
        gamma,
        tau2,
        error,
    })
}

/// Error of a margin statistic with mean `1 - gamma/2` and second moment
/// `tau2`.
fn margin_error(gamma: f64, tau2: f64) -> Result<f64> {
    let variance = tau2 - 0.25 * gamma * gamma;
    if variance <= 0.0 {
        return Err(Error::Degenerate(format!(
            "margin variance tau2 - gamma^2/4 = {variance} is not positive \
             (gamma = {gamma}, tau2 = {tau2})"
        )));
    }
    Ok(q_tail((1.0 - 0.5 * gamma) / variance.sqrt()))
}

/// Closed-form scalar chain: `gamma` and `tau2` as functions of the ratio
/// `kappa`, the signal-to-noise ratio `rho`, and the warm-start alignment
/// `big_gamma`, for isotropic class covariances.
fn scalar_gamma_tau2(kappa: f64, rho: f64, big_gamma: f64) -> (f64, f64) {
    let p = (kappa - 1.0) / kappa;
    let c = 0.5 + 0.25 * rho;
    let gamma = (1.0 - p * big_gamma) / c;
    let coeff2 = (0.25 * rho + 0.5 / kappa) * (1.0 + 0.25 * rho);
    let coeff1 = 1.0 / kappa + (1.0 + kappa) / kappa * c;
    let tau2 = (-coeff2 * gamma * gamma + coeff1 * gamma - 1.0 / kappa) / p;
    (gamma, tau2)
}

/// Fully closed-form prediction for isotropic class covariances, driven by
/// `(kappa, rho, e_a)` alone.
///
/// `theta` and `alpha` carry physical scales (they depend on `n`, `d`,
/// `sigma2` separately), so they are reported in the canonical embedding of
/// [`scalar_embedding`]; `gamma`, `tau2`, and the error are scale-free.
pub fn predict_class_error_scalar(
    kappa: f64,
    rho: f64,
    e_a: f64,
) -> Result<ClassificationPrediction> {
    validate_scalar_point(kappa, rho, e_a)?;
    let q = q_tail_inverse(e_a)?;
    let q2 = q * q;
    let big_gamma = q2 / (q2 + 1.0);
    let (gamma, tau2) = scalar_gamma_tau2(kappa, rho, big_gamma);
    let error = margin_error(gamma, tau2)?;

    // Closed forms for theta and alpha in the canonical embedding.
    let n = SCALAR_EMBED_N as f64;
    let d = kappa * n;
    let sigma2 = n * (1.0 - SCALAR_EMBED_R) / rho;
    let theta = d * (2.0 * n).sqrt() / ((d - n) * sigma2);
    let alpha = big_gamma * 2.0 * sigma2 / ((1.0 - SCALAR_EMBED_R) * d);
    Ok(ClassificationPrediction {
        theta,
        alpha,
        gamma,
        tau2,
        error,
    })
}

/// Canonical isotropic ensemble at `(kappa, rho, e_a)`: the general-path
/// counterpart of [`predict_class_error_scalar`]. Exact whenever
/// `kappa * 1e6` is an integer.
pub fn scalar_embedding(kappa: f64, rho: f64, e_a: f64) -> Result<ClassificationEnsemble> {
    validate_scalar_point(kappa, rho, e_a)?;
    let n = SCALAR_EMBED_N;
    let d = (kappa * n as f64).round() as usize;
    let sigma2 = n as f64 * (1.0 - SCALAR_EMBED_R) / rho;
    let spectra = JointSpectralDensity::isotropic(sigma2, d)?;
    ClassificationEnsemble::from_error_target(n, d, SCALAR_EMBED_R, 1.0, e_a, spectra)
}

fn validate_scalar_point(kappa: f64, rho: f64, e_a: f64) -> Result<()> {
    if !(kappa > 1.0) || !kappa.is_finite() {
        return Err(Error::Domain(format!(
            "overparametrization ratio kappa must be finite and exceed 1, got {kappa}"
        )));
    }
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::Domain(format!(
            "signal-to-noise ratio rho must be finite and positive, got {rho}"
        )));
    }
    if !(e_a > 0.0 && e_a < 0.5) {
        return Err(Error::Domain(format!(
            "warm-start error must lie strictly inside (0, 0.5), got {e_a}"
        )));
    }
    Ok(())
}

/// Test error of the oracle direction `(Sigma1 + Sigma2)^{-1} (mu1 - mu2)`:
/// the floor no warm start or interpolator can beat at this spectra and
/// overlap.
pub fn oracle_class_error(spectra: &JointSpectralDensity, r: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::Domain(format!(
            "mean overlap r must lie in [0, 1), got {r}"
        )));
    }
    let m = joint_moments(spectra)?;
    let one_r = 1.0 - r;
    let mut err = 0.0;
    for i in 0..2 {
        err += 0.5 * q_tail(one_r.sqrt() * m.j1 / (2.0 * m.j2[i]).sqrt());
    }
    Ok(err)
}

/// Test error of the warm start `t_star w_star + t_eta eta` itself.
///
/// Well-defined for continued ensembles too: the formula is affine in
/// `t_eta^2` and keeps returning the invertibility target below the floor.
pub fn w0_class_error(ens: &ClassificationEnsemble) -> Result<f64> {
    let m = joint_moments(&ens.spectra)?;
    let x = ens.t_eta_sq / (ens.t_star * ens.t_star);
    let one_r = 1.0 - ens.r;
    let mut err = 0.0;
    for i in 0..2 {
        let denom = 2.0 * m.j2[i] + x * m.j3[i];
        if denom <= 0.0 {
            return Err(Error::Degenerate(format!(
                "warm-start error denominator {denom} lost positivity \
                 (continued t_eta^2 = {} too negative)",
                ens.t_eta_sq
            )));
        }
        err += 0.5 * q_tail(one_r.sqrt() * m.j1 / denom.sqrt());
    }
    Ok(err)
}

/// Chooses `t_eta >= 0` so the warm start's own error equals `e_a`.
///
/// The attainable range is `(floor, 0.5)` with `floor` the oracle error of
/// this spectra; targets at or below the floor are rejected. Exchangeable
/// spectra invert in closed form, general spectra by monotone bisection.
pub fn invert_w0_error(
    e_a: f64,
    spectra: &JointSpectralDensity,
    r: f64,
    t_star: f64,
) -> Result<f64> {
    if !(t_star > 0.0) || !t_star.is_finite() {
        return Err(Error::Domain(format!(
            "oracle weight t_star must be finite and positive, got {t_star}"
        )));
    }
    let floor = oracle_class_error(spectra, r)?;
    if !(e_a < 0.5) {
        return Err(Error::Domain(format!(
            "warm-start error target must be below chance level 0.5, got {e_a}"
        )));
    }
    if e_a <= floor {
        return Err(Error::Domain(format!(
            "warm-start error target {e_a} is at or below the oracle floor {floor} \
             for this spectra; no real t_eta attains it"
        )));
    }
    let x = solve_confounder_ratio(e_a, spectra, r, false)?;
    Ok(x.sqrt() * t_star)
}

/// Solves for `x = t_eta^2 / t_star^2` hitting a warm-start error target.
///
/// With `continue_below_floor`, the solution may be negative (the algebraic
/// continuation used by [`ClassificationEnsemble::from_error_target`]);
/// otherwise the caller has already checked `e_a` is above the floor and the
/// root is non-negative.
fn solve_confounder_ratio(
    e_a: f64,
    spectra: &JointSpectralDensity,
    r: f64,
    continue_below_floor: bool,
) -> Result<f64> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::Domain(format!(
            "mean overlap r must lie in [0, 1), got {r}"
        )));
    }
    let m = joint_moments(spectra)?;
    let one_r = 1.0 - r;

    if spectra.is_exchangeable() {
        // Both q_tail arguments coincide, so the target inverts in closed
        // form. Average the two mathematically equal moment entries to kill
        // the last rounding asymmetry.
        let j2 = 0.5 * (m.j2[0] + m.j2[1]);
        let j3 = 0.5 * (m.j3[0] + m.j3[1]);
        let q = q_tail_inverse(e_a)?;
        return Ok((one_r * m.j1 * m.j1 / (q * q) - 2.0 * j2) / j3);
    }

    let error_at = |x: f64| -> Result<f64> {
        let mut err = 0.0;
        for i in 0..2 {
            let denom = 2.0 * m.j2[i] + x * m.j3[i];
            if denom <= 0.0 {
                return Err(Error::Degenerate(format!(
                    "warm-start error denominator hit {denom} during inversion"
                )));
            }
            err += 0.5 * q_tail(one_r.sqrt() * m.j1 / denom.sqrt());
        }
        Ok(err)
    };

    // The error is strictly increasing in x, approaching 0.5 as x grows.
    let floor = error_at(0.0)?;
    let (mut lo, mut hi);
    if e_a > floor {
        lo = 0.0;
        hi = 1.0;
        while error_at(hi)? < e_a {
            hi *= 2.0;
            if hi > 1e18 {
                return Err(Error::RootSearch(format!(
                    "warm-start error target {e_a} not bracketed below x = {hi:e}"
                )));
            }
        }
    } else if continue_below_floor {
        // Continue into negative x, down to where a denominator closes.
        let x_min = (0..2)
            .map(|i| -2.0 * m.j2[i] / m.j3[i])
            .fold(f64::NEG_INFINITY, f64::max);
        lo = x_min + x_min.abs() * 1e-12;
        hi = 0.0;
        if error_at(lo)? >= e_a {
            return Err(Error::Domain(format!(
                "warm-start error target {e_a} is below the continuable range of this \
                 spectra (reachable floor about {})",
                error_at(lo)?
            )));
        }
    } else {
        return Err(Error::Domain(format!(
            "warm-start error target {e_a} is at or below the attainable floor {floor}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if error_at(mid)? < e_a {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Coarse transfer-regime classification in the signal-to-noise ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Noise is so low that training data alone solves the task.
    NoTransferNeeded,
    /// Warm starts trade off against data; the interesting middle band.
    Transfer,
    /// Noise is so high that no estimator beats chance by much.
    LearningImpossible,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Regime::NoTransferNeeded => "no_transfer_needed",
            Regime::Transfer => "transfer_regime",
            Regime::LearningImpossible => "learning_impossible",
        };
        f.write_str(s)
    }
}

/// Cutoffs for [`regime_with_cutoffs`]; the defaults classify
/// `rho >= 100` as no-transfer-needed and `rho <= 0.01` as impossible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeCutoffs {
    /// At or above this `rho`, transfer is unnecessary.
    pub no_transfer: f64,
    /// At or below this `rho`, learning is hopeless with or without help.
    pub impossible: f64,
}

impl Default for RegimeCutoffs {
    fn default() -> Self {
        RegimeCutoffs {
            no_transfer: 100.0,
            impossible: 0.01,
        }
    }
}

/// Classifies `rho` with the default cutoffs.
pub fn regime(rho: f64) -> Result<Regime> {
    regime_with_cutoffs(rho, &RegimeCutoffs::default())
}

/// Classifies `rho` with explicit cutoffs.
pub fn regime_with_cutoffs(rho: f64, cutoffs: &RegimeCutoffs) -> Result<Regime> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::Domain(format!(
            "signal-to-noise ratio rho must be finite and positive, got {rho}"
        )));
    }
    if !(cutoffs.impossible > 0.0 && cutoffs.impossible < cutoffs.no_transfer) {
        return Err(Error::Domain(format!(
            "regime cutoffs need 0 < impossible < no_transfer, got {cutoffs:?}"
        )));
    }
    Ok(if rho >= cutoffs.no_transfer {
        Regime::NoTransferNeeded
    } else if rho <= cutoffs.impossible {
        Regime::LearningImpossible
    } else {
        Regime::Transfer
    })
}

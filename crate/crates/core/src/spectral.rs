//! Spectral densities, Stieltjes transforms, and Gaussian tail helpers.
//!
//! The asymptotic risk formulas in this crate are driven by the limiting
//! eigenvalue distribution of the feature covariance. This module owns that
//! representation: a one-dimensional density for regression (finite atoms, a
//! uniform interval, or a precomputed quadrature rule) and a finite-atom
//! joint density for the classification pair of class covariances. Both are
//! validated at construction so the predictors downstream can integrate
//! against them without re-checking.
//!
//! The Gaussian upper-tail function `q_tail` and its inverse live here too,
//! since classification errors are reported through them.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use libm::erfc;

use crate::error::{Error, Result};

/// Default Gauss–Legendre order used when integrating against a uniform
/// spectral density. 64 nodes integrate polynomials up to degree 127
/// exactly, far beyond what the smooth integrands here need.
pub const DEFAULT_GL_ORDER: usize = 64;

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Limiting eigenvalue density of the feature covariance, supported on the
/// positive reals.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectralDensity {
    /// Finite mixture of point masses: `(location, weight)` pairs.
    Atoms(Vec<(f64, f64)>),
    /// Uniform density on `[lower, upper]`, integrated with a Gauss–Legendre
    /// rule of the stored order.
    Uniform {
        lower: f64,
        upper: f64,
        gl_order: usize,
    },
    /// Arbitrary density already reduced to quadrature `(node, weight)`
    /// pairs; weights must sum to one.
    Quadrature(Vec<(f64, f64)>),
}

impl SpectralDensity {
    /// Builds a finite-atom density after validating locations and weights.
    pub fn atoms(pairs: Vec<(f64, f64)>) -> Result<Self> {
        validate_weighted_nodes(&pairs, "atom")?;
        Ok(SpectralDensity::Atoms(pairs))
    }

    /// Single point mass at `location` — the isotropic-covariance case.
    pub fn single_atom(location: f64) -> Result<Self> {
        Self::atoms(vec![(location, 1.0)])
    }

    /// Uniform density on `[lower, upper]` with the default quadrature order.
    pub fn uniform(lower: f64, upper: f64) -> Result<Self> {
        Self::uniform_with_order(lower, upper, DEFAULT_GL_ORDER)
    }

    /// Uniform density with an explicit Gauss–Legendre order.
    pub fn uniform_with_order(lower: f64, upper: f64, gl_order: usize) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) {
            return Err(Error::InvalidDensity(
                "uniform support bounds must be finite".into(),
            ));
        }
        if lower <= 0.0 {
            return Err(Error::InvalidDensity(format!(
                "uniform support must sit on the positive reals, got lower = {lower}"
            )));
        }
        if upper <= lower {
            return Err(Error::InvalidDensity(format!(
                "uniform support needs lower < upper, got [{lower}, {upper}]"
            )));
        }
        if gl_order < 2 {
            return Err(Error::InvalidDensity(format!(
                "Gauss–Legendre order must be at least 2, got {gl_order}"
            )));
        }
        Ok(SpectralDensity::Uniform {
            lower,
            upper,
            gl_order,
        })
    }

    /// Wraps an explicit quadrature rule as a density.
    pub fn quadrature(pairs: Vec<(f64, f64)>) -> Result<Self> {
        validate_weighted_nodes(&pairs, "quadrature node")?;
        Ok(SpectralDensity::Quadrature(pairs))
    }

    /// Infimum of the support.
    pub fn min_support(&self) -> f64 {
        match self {
            SpectralDensity::Atoms(pairs) | SpectralDensity::Quadrature(pairs) => pairs
                .iter()
                .map(|&(r, _)| r)
                .fold(f64::INFINITY, f64::min),
            SpectralDensity::Uniform { lower, .. } => *lower,
        }
    }

    /// Integrates `f` against the density. Fails if `f` returns a non-finite
    /// value anywhere it is evaluated.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        let sum = match self {
            SpectralDensity::Atoms(pairs) | SpectralDensity::Quadrature(pairs) => {
                weighted_sum(pairs, &f)?
            }
            SpectralDensity::Uniform {
                lower,
                upper,
                gl_order,
            } => {
                let mid = 0.5 * (lower + upper);
                let half = 0.5 * (upper - lower);
                let mut acc = 0.0;
                for &(t, w) in gauss_legendre_cached(*gl_order).iter() {
                    let r = mid + half * t;
                    let v = f(r);
                    if !v.is_finite() {
                        return Err(Error::Domain(format!(
                            "integrand returned non-finite value {v} at r = {r}"
                        )));
                    }
                    // The rule's weights are for the measure dt on [-1, 1];
                    // the uniform density contributes 1/(upper-lower) and the
                    // substitution contributes half = (upper-lower)/2.
                    acc += 0.5 * w * v;
                }
                acc
            }
        };
        Ok(sum)
    }

    /// Stieltjes transform `∫ p(r)/(r - z) dr`, defined here for real `z`
    /// strictly below the support.
    pub fn stieltjes(&self, z: f64) -> Result<f64> {
        let lo = self.min_support();
        if !(z < lo) {
            return Err(Error::Domain(format!(
                "stieltjes transform evaluated at z = {z}, not below the support minimum {lo}"
            )));
        }
        match self {
            SpectralDensity::Uniform { lower, upper, .. } => {
                // Closed form: (1/(b-a)) ln((b-z)/(a-z)).
                Ok(((upper - z) / (lower - z)).ln() / (upper - lower))
            }
            _ => self.integrate(|r| 1.0 / (r - z)),
        }
    }
}

fn validate_weighted_nodes(pairs: &[(f64, f64)], kind: &str) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::InvalidDensity(format!("empty {kind} list")));
    }
    let mut total = 0.0;
    for &(r, w) in pairs {
        if !(r.is_finite() && w.is_finite()) {
            return Err(Error::InvalidDensity(format!(
                "{kind} ({r}, {w}) has a non-finite component"
            )));
        }
        if r <= 0.0 {
            return Err(Error::InvalidDensity(format!(
                "{kind} location {r} is not strictly positive"
            )));
        }
        if w <= 0.0 {
            return Err(Error::InvalidDensity(format!(
                "{kind} weight {w} is not strictly positive"
            )));
        }
        total += w;
    }
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::InvalidDensity(format!(
            "{kind} weights sum to {total}, expected 1 within {WEIGHT_SUM_TOL}"
        )));
    }
    Ok(())
}

fn weighted_sum<F: Fn(f64) -> f64>(pairs: &[(f64, f64)], f: &F) -> Result<f64> {
    let mut acc = 0.0;
    for &(r, w) in pairs {
        let v = f(r);
        if !v.is_finite() {
            return Err(Error::Domain(format!(
                "integrand returned non-finite value {v} at r = {r}"
            )));
        }
        acc += w * v;
    }
    Ok(acc)
}

/// Joint eigenvalue density of the two class covariances in the binary
/// classification model, represented as finite atoms
/// `(s1, s2, weight)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSpectralDensity {
    atoms: Vec<(f64, f64, f64)>,
    exchangeable: bool,
}

impl JointSpectralDensity {
    /// Validates atoms and, when `exchangeable` is claimed, checks that the
    /// density really is invariant under swapping the two coordinates:
    /// the total weight on `(a, b)` must match the total weight on `(b, a)`.
    pub fn new(atoms: Vec<(f64, f64, f64)>, exchangeable: bool) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidDensity("empty joint atom list".into()));
        }
        let mut total = 0.0;
        for &(s1, s2, w) in &atoms {
            if !(s1.is_finite() && s2.is_finite() && w.is_finite()) {
                return Err(Error::InvalidDensity(format!(
                    "joint atom ({s1}, {s2}, {w}) has a non-finite component"
                )));
            }
            if s1 <= 0.0 || s2 <= 0.0 {
                return Err(Error::InvalidDensity(format!(
                    "joint atom location ({s1}, {s2}) must be strictly positive"
                )));
            }
            if w <= 0.0 {
                return Err(Error::InvalidDensity(format!(
                    "joint atom weight {w} is not strictly positive"
                )));
            }
            total += w;
        }
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidDensity(format!(
                "joint atom weights sum to {total}, expected 1 within {WEIGHT_SUM_TOL}"
            )));
        }
        if exchangeable {
            let mut mass: HashMap<(u64, u64), f64> = HashMap::new();
            for &(s1, s2, w) in &atoms {
                *mass.entry((s1.to_bits(), s2.to_bits())).or_insert(0.0) += w;
            }
            for (&(b1, b2), &w) in &mass {
                let swapped = mass.get(&(b2, b1)).copied().unwrap_or(0.0);
                if (w - swapped).abs() > WEIGHT_SUM_TOL {
                    return Err(Error::InvalidDensity(format!(
                        "claimed exchangeable, but weight {w} on ({}, {}) has no matching \
                         weight on the swapped location (found {swapped})",
                        f64::from_bits(b1),
                        f64::from_bits(b2),
                    )));
                }
            }
        }
        Ok(JointSpectralDensity {
            atoms,
            exchangeable,
        })
    }

    /// Isotropic shortcut: both class covariances are `sigma2/d` times the
    /// identity, so the joint density is one atom at `(sigma2/d, sigma2/d)`.
    pub fn isotropic(sigma2: f64, d: usize) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidDensity(format!(
                "isotropic covariance scale must be positive and finite, got {sigma2}"
            )));
        }
        if d == 0 {
            return Err(Error::InvalidDensity("dimension must be positive".into()));
        }
        let s = sigma2 / d as f64;
        Self::new(vec![(s, s, 1.0)], true)
    }

    /// Atom list as `(s1, s2, weight)` triples.
    pub fn atoms(&self) -> &[(f64, f64, f64)] {
        &self.atoms
    }

    /// Whether the density was validated as swap-invariant.
    pub fn is_exchangeable(&self) -> bool {
        self.exchangeable
    }

    /// Integrates `f(s1, s2)` against the joint density.
    pub fn integrate<F: Fn(f64, f64) -> f64>(&self, f: F) -> Result<f64> {
        let mut acc = 0.0;
        for &(s1, s2, w) in &self.atoms {
            let v = f(s1, s2);
            if !v.is_finite() {
                return Err(Error::Domain(format!(
                    "integrand returned non-finite value {v} at (s1, s2) = ({s1}, {s2})"
                )));
            }
            acc += w * v;
        }
        Ok(acc)
    }
}

/// Gaussian upper-tail probability `P(Z > x)` for standard normal `Z`.
pub fn q_tail(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Inverse of [`q_tail`] on `(0, 1)`, computed by bisection with a Newton
/// polish. Accurate to full double precision over the whole open interval.
pub fn q_tail_inverse(e: f64) -> Result<f64> {
    if !(e > 0.0 && e < 1.0) {
        return Err(Error::Domain(format!(
            "q_tail_inverse needs a probability strictly inside (0, 1), got {e}"
        )));
    }
    // q_tail(39) underflows to 0 and q_tail(-39) rounds to 1, so this
    // bracket covers every representable probability in (0, 1).
    let mut lo = -39.0;
    let mut hi = 39.0;
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if q_tail(mid) > e {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x: f64 = 0.5 * (lo + hi);
    // Newton on q(x) - e with q'(x) = -phi(x); two steps restore the last
    // couple of bits lost to the fixed bisection count.
    for _ in 0..2 {
        let phi = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
        if phi == 0.0 {
            break;
        }
        x += (q_tail(x) - e) / phi;
    }
    Ok(x)
}

/// Nodes and weights of the `order`-point Gauss–Legendre rule on `[-1, 1]`,
/// computed by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(order: usize) -> Vec<(f64, f64)> {
    gauss_legendre_cached(order).as_ref().clone()
}

/// Rules are pure functions of the order, so each order is computed once per
/// process and shared; integrating against a uniform density sits inside the
/// fixed-point solvers' innermost loops.
fn gauss_legendre_cached(order: usize) -> Arc<Vec<(f64, f64)>> {
    static RULES: OnceLock<Mutex<HashMap<usize, Arc<Vec<(f64, f64)>>>>> = OnceLock::new();
    let mut cache = RULES
        .get_or_init(|| Mutex::new(HashMap::new()))
        .lock()
        .expect("quadrature cache lock poisoned");
    cache
        .entry(order)
        .or_insert_with(|| Arc::new(compute_gauss_legendre(order)))
        .clone()
}

fn compute_gauss_legendre(order: usize) -> Vec<(f64, f64)> {
    assert!(order >= 2, "Gauss–Legendre order must be at least 2");
    let n = order;
    let mut rule = vec![(0.0, 0.0); n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi-style initial guess, then Newton to machine precision.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-15 * x.abs().max(1.0) {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // The initial guesses sweep from +1 toward 0; mirror to fill both
        // halves (the rule is symmetric).
        rule[i] = (-x, w);
        rule[n - 1 - i] = (x, w);
    }
    rule
}

/// Legendre polynomial `P_n(x)` and its derivative via the three-term
/// recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 1..n {
        let kf = k as f64;
        let p_next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = p_next;
    }
    let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

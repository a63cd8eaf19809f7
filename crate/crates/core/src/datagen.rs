//! Synthetic problem instances for the Monte Carlo side of the library.
//!
//! The generators here are the finite-size counterparts of the asymptotic
//! ensembles: regression instances with a prescribed covariance spectrum and
//! warm-start offset energy, and two-class Gaussian-mixture instances with
//! shared-plus-idiosyncratic means and diagonal class covariances.
//!
//! Universality is probed by swapping the law of the standardized feature
//! entries: standard Gaussian, centered `±1` Bernoulli, or a centered,
//! variance-one chi-square. Everything is driven by ChaCha streams seeded
//! through [`derive_trial_seed`], so any trial of any sweep can be
//! regenerated in isolation, in any order, on any platform.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::spectral::SpectralDensity;

/// Law of the standardized (mean zero, variance one) feature entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryDistribution {
    /// `N(0, 1)`.
    StandardGaussian,
    /// Symmetric `±1` coin flips.
    CenteredBernoulli,
    /// `(z^2 - 1) / sqrt(2)` for `z ~ N(0, 1)`: skewed, heavier-tailed.
    CenteredChiSquare,
}

impl EntryDistribution {
    /// The three laws exercised by the universality experiments.
    pub const ALL: [EntryDistribution; 3] = [
        EntryDistribution::StandardGaussian,
        EntryDistribution::CenteredBernoulli,
        EntryDistribution::CenteredChiSquare,
    ];

    /// Draws one standardized entry.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            EntryDistribution::StandardGaussian => StandardNormal.sample(rng),
            EntryDistribution::CenteredBernoulli => {
                if rng.gen::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            EntryDistribution::CenteredChiSquare => {
                let z: f64 = StandardNormal.sample(rng);
                (z * z - 1.0) / std::f64::consts::SQRT_2
            }
        }
    }

    /// Short tag used in column names and seed derivation.
    pub fn tag(&self) -> &'static str {
        match self {
            EntryDistribution::StandardGaussian => "Gauss",
            EntryDistribution::CenteredBernoulli => "Ber",
            EntryDistribution::CenteredChiSquare => "Chi",
        }
    }
}

impl std::fmt::Display for EntryDistribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Stateless seed derivation: folds a master seed, a trial index, and a
/// stream tag through FNV-1a and splitmix64 finishing so every
/// `(master, index, tag)` triple owns an independent ChaCha stream.
pub fn derive_trial_seed(master: u64, trial_index: u64, stream_tag: &str) -> u64 {
    let mut tag_hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stream_tag.bytes() {
        tag_hash ^= b as u64;
        tag_hash = tag_hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = splitmix64(master);
    z = splitmix64(z ^ tag_hash);
    splitmix64(z ^ trial_index)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic covariance eigenvalues realizing a spectral density in
/// dimension `d`: the quantiles of the density at the stratified levels
/// `(i + 1/2) / d`. No randomness, and the empirical spectral distribution
/// converges to the density as `d` grows.
pub fn covariance_eigenvalues(density: &SpectralDensity, d: usize) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(Error::Domain("dimension must be positive".into()));
    }
    let quantile_levels = (0..d).map(|i| (i as f64 + 0.5) / d as f64);
    match density {
        SpectralDensity::Uniform { lower, upper, .. } => {
            Ok(quantile_levels.map(|q| lower + q * (upper - lower)).collect())
        }
        SpectralDensity::Atoms(pairs) | SpectralDensity::Quadrature(pairs) => {
            let mut sorted = pairs.clone();
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut eigs = Vec::with_capacity(d);
            for q in quantile_levels {
                let mut cum = 0.0;
                let mut value = sorted.last().expect("validated non-empty").0;
                for &(loc, w) in &sorted {
                    cum += w;
                    if q <= cum {
                        value = loc;
                        break;
                    }
                }
                eigs.push(value);
            }
            Ok(eigs)
        }
    }
}

/// Recipe for one regression instance.
#[derive(Debug, Clone)]
pub struct RegressionInstanceSpec {
    /// Sample count.
    pub n: usize,
    /// Feature dimension.
    pub d: usize,
    /// Covariance spectrum, realized deterministically via
    /// [`covariance_eigenvalues`].
    pub density: SpectralDensity,
    /// Noise level (standard deviation of the label noise).
    pub sigma: f64,
    /// Warm-start offset energy: `E (w0 - w*)^T R (w0 - w*) = e_a`.
    pub e_a: f64,
    /// Law of the standardized feature entries.
    pub entry: EntryDistribution,
    /// When set, label noise is drawn from `entry` (scaled by `sigma`)
    /// instead of a Gaussian.
    pub entry_noise: bool,
    /// ChaCha stream seed.
    pub seed: u64,
}

/// One realized regression instance.
#[derive(Debug, Clone)]
pub struct RegressionInstance {
    /// `n x d` design with covariance `diag(eigs)`.
    pub x: DMatrix<f64>,
    /// Noisy labels `X w_star + noise`.
    pub y: DVector<f64>,
    /// Warm start.
    pub w0: DVector<f64>,
    /// Ground-truth regressor.
    pub w_star: DVector<f64>,
    /// Covariance eigenvalues (the metric for generalization error).
    pub eigs: DVector<f64>,
}

/// Generates a regression instance.
///
/// Draw order under the seeded stream: ground-truth sign flips and
/// permutation, warm-start offset, design entries (column by column), label
/// noise. The ground truth is a unit vector with entries `±1/sqrt(d)`; the
/// warm start adds a whitened Gaussian offset with energy `e_a`, so the
/// offset is isotropic after multiplication by `R^{1/2}`.
pub fn sample_regression_instance(spec: &RegressionInstanceSpec) -> Result<RegressionInstance> {
    if spec.n == 0 || spec.d == 0 {
        return Err(Error::Domain(format!(
            "need positive sample count and dimension, got n = {}, d = {}",
            spec.n, spec.d
        )));
    }
    if !(spec.sigma >= 0.0) || !spec.sigma.is_finite() {
        return Err(Error::Domain(format!(
            "noise level sigma must be finite and non-negative, got {}",
            spec.sigma
        )));
    }
    if !(spec.e_a >= 0.0) || !spec.e_a.is_finite() {
        return Err(Error::Domain(format!(
            "offset energy e_a must be finite and non-negative, got {}",
            spec.e_a
        )));
    }
    let (n, d) = (spec.n, spec.d);
    let eigs = DVector::from_vec(covariance_eigenvalues(&spec.density, d)?);
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);

    // Ground truth: +-1/sqrt(d) entries, signs and positions shuffled.
    let scale = 1.0 / (d as f64).sqrt();
    let mut w_star = DVector::from_fn(d, |_, _| {
        if rng.gen::<bool>() {
            scale
        } else {
            -scale
        }
    });
    w_star.as_mut_slice().shuffle(&mut rng);

    // Warm start: w0 = w* + R^{-1/2} xi with xi ~ N(0, e_a/d I), so the
    // whitened offset energy is e_a in expectation.
    let xi_scale = (spec.e_a / d as f64).sqrt();
    let w0 = DVector::from_fn(d, |j, _| {
        let xi: f64 = StandardNormal.sample(&mut rng);
        w_star[j] + xi_scale * xi / eigs[j].sqrt()
    });

    // Design: standardized entries times R^{1/2}, filled column by column.
    let mut x = DMatrix::zeros(n, d);
    for j in 0..d {
        let col_scale = eigs[j].sqrt();
        for i in 0..n {
            x[(i, j)] = col_scale * spec.entry.sample(&mut rng);
        }
    }

    let mut y = &x * &w_star;
    for i in 0..n {
        let z: f64 = if spec.entry_noise {
            spec.entry.sample(&mut rng)
        } else {
            StandardNormal.sample(&mut rng)
        };
        y[i] += spec.sigma * z;
    }

    Ok(RegressionInstance {
        x,
        y,
        w0,
        w_star,
        eigs,
    })
}

/// Class covariances for classification instances: a common isotropic scale
/// or explicit per-class eigenvalue lists.
#[derive(Debug, Clone)]
pub enum ClassCovariances {
    /// Both classes have covariance `sigma2 / d` times the identity.
    Isotropic(f64),
    /// Diagonal covariances with the given eigenvalues (length `d` each,
    /// already on the `O(1/d)` scale).
    Eigenvalues { class1: Vec<f64>, class2: Vec<f64> },
}

/// Recipe for one two-class instance.
#[derive(Debug, Clone)]
pub struct ClassificationInstanceSpec {
    /// Sample count; must be even (balanced classes).
    pub n: usize,
    /// Feature dimension.
    pub d: usize,
    /// Shared fraction of the class means, in `[0, 1)`.
    pub r: f64,
    /// Warm-start weight on the oracle direction.
    pub t_star: f64,
    /// Warm-start weight on the orthogonal confounder.
    pub t_eta: f64,
    /// Class covariances.
    pub covariances: ClassCovariances,
    /// Law of the standardized noise entries.
    pub entry: EntryDistribution,
    /// ChaCha stream seed.
    pub seed: u64,
}

/// One realized two-class instance.
#[derive(Debug, Clone)]
pub struct ClassificationInstance {
    /// `n x d` design: class means plus covariance-shaped noise.
    pub x: DMatrix<f64>,
    /// Labels, `+1` for the first `n/2` rows and `-1` for the rest.
    pub y: DVector<f64>,
    /// Warm start `t_star w_star + t_eta eta`.
    pub w0: DVector<f64>,
    /// Oracle direction `(S1 + S2)^{-1} (mu1 - mu2)`.
    pub w_star: DVector<f64>,
    /// Class means.
    pub mu1: DVector<f64>,
    pub mu2: DVector<f64>,
    /// Per-class covariance eigenvalues.
    pub s1_eigs: DVector<f64>,
    pub s2_eigs: DVector<f64>,
}

/// Generates a two-class instance.
///
/// Draw order under the seeded stream: shared mean component, two
/// idiosyncratic mean components, raw confounder, design noise (row by
/// row). Means are `sqrt(r) m0 + sqrt(1-r) m_i` with `m` entries
/// `N(0, 1/d)`; the confounder is Gaussian noise projected orthogonal to
/// the oracle direction and normalized to squared length `1 - r`.
pub fn sample_classification_instance(
    spec: &ClassificationInstanceSpec,
) -> Result<ClassificationInstance> {
    if spec.n == 0 || spec.n % 2 != 0 {
        return Err(Error::Domain(format!(
            "sample count must be positive and even for balanced classes, got {}",
            spec.n
        )));
    }
    if spec.d < 2 {
        return Err(Error::Domain(format!(
            "need dimension at least 2, got {}",
            spec.d
        )));
    }
    if !(0.0..1.0).contains(&spec.r) {
        return Err(Error::Domain(format!(
            "mean overlap r must lie in [0, 1), got {}",
            spec.r
        )));
    }
    if !(spec.t_star > 0.0) || !spec.t_star.is_finite() {
        return Err(Error::Domain(format!(
            "oracle weight t_star must be finite and positive, got {}",
            spec.t_star
        )));
    }
    if !(spec.t_eta >= 0.0) || !spec.t_eta.is_finite() {
        return Err(Error::Domain(format!(
            "confounder weight t_eta must be finite and non-negative, got {}",
            spec.t_eta
        )));
    }
    let (n, d) = (spec.n, spec.d);
    let (s1_eigs, s2_eigs) = match &spec.covariances {
        ClassCovariances::Isotropic(sigma2) => {
            if !(*sigma2 > 0.0) || !sigma2.is_finite() {
                return Err(Error::Domain(format!(
                    "isotropic covariance scale must be finite and positive, got {sigma2}"
                )));
            }
            let s = *sigma2 / d as f64;
            (
                DVector::from_element(d, s),
                DVector::from_element(d, s),
            )
        }
        ClassCovariances::Eigenvalues { class1, class2 } => {
            if class1.len() != d || class2.len() != d {
                return Err(Error::Domain(format!(
                    "eigenvalue lists must have length d = {d}, got {} and {}",
                    class1.len(),
                    class2.len()
                )));
            }
            if class1.iter().chain(class2.iter()).any(|&s| !(s > 0.0) || !s.is_finite()) {
                return Err(Error::Domain(
                    "covariance eigenvalues must be finite and positive".into(),
                ));
            }
            (
                DVector::from_vec(class1.clone()),
                DVector::from_vec(class2.clone()),
            )
        }
    };

    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let mean_scale = 1.0 / (d as f64).sqrt();
    let draw_mean = |rng: &mut ChaCha12Rng| {
        DVector::from_fn(d, |_, _| {
            let z: f64 = StandardNormal.sample(rng);
            mean_scale * z
        })
    };
    let m0 = draw_mean(&mut rng);
    let m1 = draw_mean(&mut rng);
    let m2 = draw_mean(&mut rng);
    let sr = spec.r.sqrt();
    let sr1 = (1.0 - spec.r).sqrt();
    let mu1 = &m0 * sr + &m1 * sr1;
    let mu2 = &m0 * sr + &m2 * sr1;

    let w_star = DVector::from_fn(d, |j, _| (mu1[j] - mu2[j]) / (s1_eigs[j] + s2_eigs[j]));

    // Confounder: Gaussian direction orthogonalized against w_star, with
    // squared length exactly 1 - r.
    let mut eta = DVector::from_fn(d, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        z
    });
    let wsq = w_star.norm_squared();
    if wsq == 0.0 {
        return Err(Error::Degenerate(
            "class means coincide; the oracle direction vanishes".into(),
        ));
    }
    eta.axpy(-eta.dot(&w_star) / wsq, &w_star, 1.0);
    let eta_norm = eta.norm();
    if eta_norm == 0.0 {
        return Err(Error::Degenerate(
            "confounder direction collapsed onto the oracle direction".into(),
        ));
    }
    eta *= sr1 / eta_norm;

    let w0 = &w_star * spec.t_star + &eta * spec.t_eta;

    // Design: per-class mean plus covariance-shaped standardized noise,
    // filled row by row (first half class +1, second half class -1).
    let half = n / 2;
    let mut x = DMatrix::zeros(n, d);
    for i in 0..n {
        let (mu, eigs) = if i < half {
            (&mu1, &s1_eigs)
        } else {
            (&mu2, &s2_eigs)
        };
        for j in 0..d {
            x[(i, j)] = mu[j] + eigs[j].sqrt() * spec.entry.sample(&mut rng);
        }
    }
    let y = DVector::from_fn(n, |i, _| if i < half { 1.0 } else { -1.0 });

    Ok(ClassificationInstance {
        x,
        y,
        w0,
        w_star,
        mu1,
        mu2,
        s1_eigs,
        s2_eigs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn stratified_eigenvalues_hit_atom_proportions_exactly() {
        let bilevel = SpectralDensity::atoms(vec![(1.0, 0.3), (5.0, 0.7)]).unwrap();
        let eigs = covariance_eigenvalues(&bilevel, 1000).unwrap();
        assert_eq!(eigs.iter().filter(|&&e| e == 1.0).count(), 300);
        assert_eq!(eigs.iter().filter(|&&e| e == 5.0).count(), 700);
    }

    #[test]
    fn stratified_eigenvalues_fill_uniform_supports() {
        let unif = SpectralDensity::uniform(1.0, 5.0).unwrap();
        let eigs = covariance_eigenvalues(&unif, 4).unwrap();
        assert_eq!(eigs, vec![1.5, 2.5, 3.5, 4.5]);
    }

    #[test]
    fn entry_laws_are_standardized() {
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        for law in EntryDistribution::ALL {
            let draws: Vec<f64> = (0..200_000).map(|_| law.sample(&mut rng)).collect();
            let mean = draws.iter().sum::<f64>() / draws.len() as f64;
            let var = draws.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / (draws.len() - 1) as f64;
            assert!(mean.abs() < 0.02, "{law}: mean {mean}");
            assert!((var - 1.0).abs() < 0.05, "{law}: variance {var}");
        }
    }

    #[test]
    fn bernoulli_entries_are_signs() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..100 {
            let v = EntryDistribution::CenteredBernoulli.sample(&mut rng);
            assert!(v == 1.0 || v == -1.0);
        }
    }

    #[test]
    fn seed_derivation_is_stable_and_separates_streams() {
        let a = derive_trial_seed(42, 0, "Gauss");
        assert_eq!(a, derive_trial_seed(42, 0, "Gauss"));
        assert_ne!(a, derive_trial_seed(42, 1, "Gauss"));
        assert_ne!(a, derive_trial_seed(42, 0, "Ber"));
        assert_ne!(a, derive_trial_seed(43, 0, "Gauss"));
    }

    fn reg_spec(seed: u64) -> RegressionInstanceSpec {
        RegressionInstanceSpec {
            n: 50,
            d: 200,
            density: SpectralDensity::atoms(vec![(1.0, 0.3), (5.0, 0.7)]).unwrap(),
            sigma: 0.15,
            e_a: 1.0,
            entry: EntryDistribution::StandardGaussian,
            entry_noise: false,
            seed,
        }
    }

    #[test]
    fn regression_instances_replay_bitwise_under_a_seed() {
        let a = sample_regression_instance(&reg_spec(5)).unwrap();
        let b = sample_regression_instance(&reg_spec(5)).unwrap();
        let c = sample_regression_instance(&reg_spec(6)).unwrap();
        assert_eq!(a.x.as_slice(), b.x.as_slice());
        assert_eq!(a.y.as_slice(), b.y.as_slice());
        assert_eq!(a.w0.as_slice(), b.w0.as_slice());
        assert_ne!(a.x.as_slice(), c.x.as_slice());
    }

    #[test]
    fn regression_ground_truth_is_a_unit_vector() {
        let inst = sample_regression_instance(&reg_spec(11)).unwrap();
        assert_abs_diff_eq!(inst.w_star.norm_squared(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn regression_offset_energy_concentrates_on_e_a() {
        let mut spec = reg_spec(3);
        spec.n = 10;
        spec.d = 4000;
        let inst = sample_regression_instance(&spec).unwrap();
        let dv = &inst.w0 - &inst.w_star;
        let energy: f64 = dv
            .iter()
            .zip(inst.eigs.iter())
            .map(|(&v, &e)| e * v * v)
            .sum();
        // chi^2_d concentration: relative sd is sqrt(2/d) ~ 2.2%.
        assert_abs_diff_eq!(energy, spec.e_a, epsilon = 0.15);
    }

    fn class_spec(seed: u64) -> ClassificationInstanceSpec {
        ClassificationInstanceSpec {
            n: 100,
            d: 300,
            r: 0.9,
            t_star: 1.0,
            t_eta: 2.0,
            covariances: ClassCovariances::Isotropic(10.0),
            entry: EntryDistribution::StandardGaussian,
            seed,
        }
    }

    #[test]
    fn classification_confounder_is_orthogonal_and_normalized() {
        let inst = sample_classification_instance(&class_spec(21)).unwrap();
        // Recover eta from w0 = t_star w_star + t_eta eta.
        let eta = (&inst.w0 - &inst.w_star * 1.0) / 2.0;
        assert_abs_diff_eq!(eta.norm_squared(), 0.1, epsilon = 1e-12);
        assert!((eta.dot(&inst.w_star)).abs() <= 1e-12 * inst.w_star.norm());
    }

    #[test]
    fn classification_labels_are_balanced_and_ordered() {
        let inst = sample_classification_instance(&class_spec(2)).unwrap();
        assert!(inst.y.iter().take(50).all(|&v| v == 1.0));
        assert!(inst.y.iter().skip(50).all(|&v| v == -1.0));
    }

    #[test]
    fn classification_replays_bitwise_under_a_seed() {
        let a = sample_classification_instance(&class_spec(8)).unwrap();
        let b = sample_classification_instance(&class_spec(8)).unwrap();
        assert_eq!(a.x.as_slice(), b.x.as_slice());
        assert_eq!(a.w0.as_slice(), b.w0.as_slice());
    }

    #[test]
    fn odd_sample_counts_are_rejected() {
        let mut spec = class_spec(1);
        spec.n = 101;
        assert!(sample_classification_instance(&spec).is_err());
    }

    #[test]
    fn eigenvalue_lists_must_match_the_dimension() {
        let mut spec = class_spec(1);
        spec.covariances = ClassCovariances::Eigenvalues {
            class1: vec![0.01; 299],
            class2: vec![0.01; 300],
        };
        assert!(sample_classification_instance(&spec).is_err());
    }

    #[test]
    fn class_mean_overlap_tracks_r() {
        // mu1 . mu2 ~ r and |mu_i|^2 ~ 1 in high dimension.
        let mut spec = class_spec(17);
        spec.d = 20_000;
        spec.n = 2;
        let inst = sample_classification_instance(&spec).unwrap();
        assert_abs_diff_eq!(inst.mu1.dot(&inst.mu2), spec.r, epsilon = 0.05);
        assert_abs_diff_eq!(inst.mu1.norm_squared(), 1.0, epsilon = 0.05);
        assert_abs_diff_eq!(inst.mu2.norm_squared(), 1.0, epsilon = 0.05);
    }
}

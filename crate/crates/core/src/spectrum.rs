//! Lyapunov exponents and Oseledets stable directions of the random walk.

use rand::distr::Distribution;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::measure::AtomicMeasure;
use crate::seed::{derive_seed, rng_from_seed};
use crate::torus::{projective_distance, Jacobian2, TorusPoint};

/// Top exponent with a batch-means confidence interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LyapunovEstimate {
    pub lambda1: f64,
    /// Half-width of the 95% batch-means interval.
    pub ci_halfwidth: f64,
    pub n_steps: usize,
    pub n_batches: usize,
    /// `-lambda1`: the maps preserve area.
    pub lambda2: f64,
}

/// Estimates `λ₁` by iterating `(p, u) ↦ (f(p), D_p f u / ‖D_p f u‖)` with a
/// fresh `f ~ μ` each step and averaging `log ‖D_p f u‖`.
pub fn top_lyapunov(
    measure: &AtomicMeasure,
    x0: TorusPoint,
    theta0: f64,
    n_steps: usize,
    n_batches: usize,
    seed: u64,
) -> Result<LyapunovEstimate> {
    if n_batches < 2 {
        return Err(Error::range("n_batches", "must be at least 2"));
    }
    if n_steps < n_batches {
        return Err(Error::range("n_steps", "must be at least n_batches"));
    }
    let atoms = measure.atoms();
    let isometric: Vec<bool> = atoms.iter().map(|a| a.word.is_isometry()).collect();
    let sampler = measure.index_sampler();
    let mut rng = rng_from_seed(seed);

    let (mut x, mut y) = (x0.x(), x0.y());
    let (mut ux, mut uy) = (theta0.cos(), theta0.sin());
    let mut batch_sums = vec![0.0; n_batches];
    let mut step = 0;
    for (j, sum) in batch_sums.iter_mut().enumerate() {
        let end = (j + 1) * n_steps / n_batches;
        while step < end {
            let i = sampler.sample(&mut rng);
            let (nx, ny, m) = atoms[i].word.advance(x, y, Jacobian2::IDENTITY);
            (x, y) = (nx, ny);
            if !isometric[i] {
                let (vx, vy) = m.apply((ux, uy));
                let r = vx.hypot(vy);
                *sum += r.ln();
                (ux, uy) = (vx / r, vy / r);
            }
            step += 1;
        }
    }

    let lambda1 = batch_sums.iter().sum::<f64>() / n_steps as f64;
    let means: Vec<f64> = batch_sums
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let len = (j + 1) * n_steps / n_batches - j * n_steps / n_batches;
            s / len as f64
        })
        .collect();
    let b = n_batches as f64;
    let mean = means.iter().sum::<f64>() / b;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (b - 1.0);
    let t = StudentsT::new(0.0, 1.0, b - 1.0)
        .expect("degrees of freedom are positive")
        .inverse_cdf(0.975);
    Ok(LyapunovEstimate {
        lambda1,
        ci_halfwidth: t * (var / b).sqrt(),
        n_steps,
        n_batches,
        lambda2: -lambda1,
    })
}

/// Contracted direction of one finite word product.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DirectionSample {
    pub base: TorusPoint,
    pub omega_seed: u64,
    pub n: usize,
    /// Right-singular direction of `σ₂`, in `[0, π)`.
    pub direction: f64,
    /// `log(σ₁/σ₂)`.
    pub gap: f64,
}

/// Smallest singular value ratio for which a direction is reported.
pub const MIN_GAP_RATIO: f64 = 1.0 + 1e-9;

/// Draws the length-`n` word for `omega_seed` and returns the most
/// contracted direction of its derivative at `x0`.
pub fn stable_direction(measure: &AtomicMeasure, x0: TorusPoint, n: usize, omega_seed: u64) -> Result<DirectionSample> {
    if n == 0 {
        return Err(Error::range("n", "must be at least 1"));
    }
    let atoms = measure.atoms();
    let (mut x, mut y, mut m, mut log_scale) = (x0.x(), x0.y(), Jacobian2::IDENTITY, 0.0);
    for i in measure.sample_indices(n, omega_seed) {
        (x, y, m, log_scale) = atoms[i].word.advance_rescaled(x, y, m, log_scale);
    }
    let (s1, s2) = m.singular_values();
    // σ₁σ₂ = 1 for the unscaled product
    let gap = if log_scale == 0.0 {
        (s1 / s2).ln()
    } else {
        2.0 * (s1.ln() + log_scale)
    };
    if gap.is_nan() || gap < MIN_GAP_RATIO.ln() {
        return Err(Error::DegenerateGap { ratio: gap.exp() });
    }
    Ok(DirectionSample {
        base: x0,
        omega_seed,
        n,
        direction: m.most_contracted_direction(),
        gap,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StableVerdict {
    NonRandomCandidate,
    Random,
}

/// Stable directions for independent noise realizations at one base point.
/// `NonRandomCandidate` is evidence only: finite `n`, finite tolerance.
#[derive(Clone, Debug, Serialize)]
pub struct NonRandomReport {
    pub verdict: StableVerdict,
    /// Largest pairwise projective distance.
    pub dispersion: f64,
    pub tolerance: f64,
    pub n: usize,
    pub n_omegas: usize,
    pub samples: Vec<DirectionSample>,
}

pub fn nonrandom_stable_test(
    measure: &AtomicMeasure,
    x0: TorusPoint,
    n: usize,
    n_omegas: usize,
    tolerance: f64,
    seed: u64,
) -> Result<NonRandomReport> {
    if n_omegas < 2 {
        return Err(Error::range("n_omegas", "must be at least 2"));
    }
    let samples = (0..n_omegas as u64)
        .into_par_iter()
        .map(|i| stable_direction(measure, x0, n, derive_seed(seed, i)))
        .collect::<Result<Vec<_>>>()?;
    let mut dispersion: f64 = 0.0;
    for (i, a) in samples.iter().enumerate() {
        for b in &samples[i + 1..] {
            dispersion = dispersion.max(projective_distance(a.direction, b.direction));
        }
    }
    Ok(NonRandomReport {
        verdict: if dispersion <= tolerance {
            StableVerdict::NonRandomCandidate
        } else {
            StableVerdict::Random
        },
        dispersion,
        tolerance,
        n,
        n_omegas,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{make_diffusion, symmetric_preset, translation_preset};
    use crate::torus::wrap_angle;
    use crate::word::MapWord;
    use approx::assert_abs_diff_eq;

    fn cat() -> AtomicMeasure {
        AtomicMeasure::dirac("CAT".parse().unwrap()).unwrap()
    }

    fn p0() -> TorusPoint {
        TorusPoint::new(0.31, 0.77)
    }

    #[test]
    fn cat_exponent() {
        let est = top_lyapunov(&cat(), p0(), 0.4, 100_000, 20, 1).unwrap();
        let expected = ((3.0 + 5f64.sqrt()) / 2.0).ln();
        assert_abs_diff_eq!(est.lambda1, expected, epsilon = 1e-2);
        assert_abs_diff_eq!(est.lambda1, 0.96242, epsilon = 1e-2);
        assert_eq!(est.lambda1 + est.lambda2, 0.0);
        assert!(est.ci_halfwidth >= 0.0);
    }

    #[test]
    fn translations_have_zero_exponent() {
        let est = top_lyapunov(&translation_preset(0.3, 0.1).unwrap(), p0(), 1.0, 1000, 10, 4).unwrap();
        assert_eq!(est.lambda1, 0.0);
        assert_eq!(est.ci_halfwidth, 0.0);
    }

    // In exact arithmetic the product is A^{S_n} and λ₁ = 0. In f64 the
    // stable component of u is lost once S_n climbs ~37 levels, so the
    // estimate carries a small positive bias instead.
    #[test]
    fn commuting_pair_exponent_is_small() {
        let m = AtomicMeasure::uniform(vec!["CAT".parse().unwrap(), "CAT^-1".parse().unwrap()]).unwrap();
        let est = top_lyapunov(&m, p0(), 0.2, 1_000_000, 50, 7).unwrap();
        assert!(est.lambda1.abs() < 0.05, "{est:?}");
        assert!(est.lambda1 < 0.05 * ((3.0 + 5f64.sqrt()) / 2.0).ln());
    }

    #[test]
    fn lyapunov_rejects_bad_batches() {
        assert!(top_lyapunov(&cat(), p0(), 0.0, 10, 1, 0).is_err());
        assert!(top_lyapunov(&cat(), p0(), 0.0, 3, 5, 0).is_err());
    }

    #[test]
    fn inverted_measure_pairs_up() {
        let m = symmetric_preset(2f64.sqrt() - 1.0, 3f64.sqrt() - 1.0, 0.5, 0.5, [0.125; 4]).unwrap();
        let fwd = top_lyapunov(&m, p0(), 0.3, 200_000, 20, 3).unwrap();
        let bwd = top_lyapunov(&m.inverted().unwrap(), p0(), 0.3, 200_000, 20, 3).unwrap();
        assert!(
            (fwd.lambda1 - bwd.lambda1).abs() <= fwd.ci_halfwidth + bwd.ci_halfwidth,
            "{fwd:?} {bwd:?}"
        );
    }

    #[test]
    fn cat_stable_direction() {
        let mu = (3.0 - 5f64.sqrt()) / 2.0;
        let expected = wrap_angle((mu - 2.0).atan());
        assert_abs_diff_eq!(
            expected,
            wrap_angle((-(1.0 + 5f64.sqrt()) / 2.0).atan()),
            epsilon = 1e-15
        );
        for n in [30, 31, 100, 1000] {
            let d = stable_direction(&cat(), p0(), n, 5).unwrap();
            assert!(projective_distance(d.direction, expected) <= 1e-6, "n={n}");
            assert!(d.gap > 0.0);
        }
        let d = stable_direction(&cat(), p0(), 1000, 5).unwrap();
        assert_abs_diff_eq!(d.gap, 2000.0 * ((3.0 + 5f64.sqrt()) / 2.0).ln(), epsilon = 1e-6);
    }

    #[test]
    fn translations_are_degenerate() {
        let err = stable_direction(&translation_preset(0.3, 0.1).unwrap(), p0(), 50, 1).unwrap_err();
        assert!(matches!(err, Error::DegenerateGap { .. }));
    }

    #[test]
    fn seeds_do_not_matter_for_dirac() {
        let a = stable_direction(&cat(), p0(), 40, 1).unwrap();
        let b = stable_direction(&cat(), p0(), 40, 2).unwrap();
        assert!(projective_distance(a.direction, b.direction) <= 1e-8);
    }

    #[test]
    fn doubling_n_moves_direction_within_gap_bound() {
        let m = make_diffusion(&"CAT".parse::<MapWord>().unwrap(), 0.1, [0.2; 5], 2).unwrap();
        for seed in 0..20 {
            for n in [2, 3, 5, 8, 12] {
                let a = stable_direction(&m, p0(), n, seed).unwrap();
                let b = stable_direction(&m, p0(), 2 * n, seed).unwrap();
                let moved = projective_distance(a.direction, b.direction);
                assert!(
                    moved <= 10.0 * (-a.gap / 2.0).exp() + 1e-12,
                    "seed {seed} n {n}: {moved}"
                );
            }
        }
    }

    #[test]
    fn nonrandom_cat_and_random_diffusion() {
        let r = nonrandom_stable_test(&cat(), p0(), 200, 20, 1e-3, 0).unwrap();
        assert_eq!(r.verdict, StableVerdict::NonRandomCandidate);
        assert!(r.dispersion <= 1e-8);

        let m = make_diffusion(&"CAT".parse::<MapWord>().unwrap(), 0.1, [0.2; 5], 2).unwrap();
        let r = nonrandom_stable_test(&m, p0(), 200, 20, 1e-3, 0).unwrap();
        assert_eq!(r.verdict, StableVerdict::Random);
        assert!(r.dispersion > 1e-3);
    }

    #[test]
    fn symmetric_preset_is_random() {
        let m = symmetric_preset(2f64.sqrt() - 1.0, 3f64.sqrt() - 1.0, 0.5, 0.5, [0.125; 4]).unwrap();
        let r = nonrandom_stable_test(&m, p0(), 500, 20, 1e-3, 0).unwrap();
        assert_eq!(r.verdict, StableVerdict::Random);
    }
}

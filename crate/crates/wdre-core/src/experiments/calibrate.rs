//! Wasserstein radius calibration from sampling variability.

use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use rand::Rng;

use super::instances::stream_rng;
use super::ExperimentError;
use crate::model::{gelbrich_distance, GaussianSpec};
use crate::{Mat, SymMatrix};

/// Covariance of the sample columns about the known zero mean. The divisor
/// is the sample count, not the unbiased count minus one: the mean is not
/// estimated, it is pinned at zero by design.
pub(super) fn sample_covariance(samples: &Mat) -> SymMatrix {
    let dim = samples.nrows();
    let count = samples.ncols();
    let scale = 1.0 / count as f64;
    SymMatrix::from_fn_upper(dim, |i, j| {
        let mut acc = 0.0;
        for k in 0..count {
            acc += samples[(i, k)] * samples[(j, k)];
        }
        acc * scale
    })
}

/// `count` draws from `N(0, F F^T)` as columns, given the factor `F`.
pub(super) fn gaussian_samples(rng: &mut ChaCha8Rng, factor: &Mat, count: usize) -> Mat {
    let dim = factor.nrows();
    let mut z = Mat::zeros(factor.ncols(), count);
    for k in 0..count {
        for i in 0..dim {
            z[(i, k)] = rng.sample(StandardNormal);
        }
    }
    factor.matmul(&z)
}

/// Picks a Wasserstein radius from sampling variability: repeatedly draw
/// `sample_size` points from `N(0, true_cov)`, measure the Gelbrich
/// distance between the zero-mean sample Gaussian and the truth, and
/// return the nearest-rank quantile (index `ceil(quantile * repetitions)`)
/// of the recorded distances.
///
/// Deterministic given `seed`; two calls with identical arguments return
/// bit-identical values.
pub fn calibrate_radius(
    true_cov: &SymMatrix,
    sample_size: usize,
    repetitions: usize,
    quantile: f64,
    seed: u64,
) -> Result<f64, ExperimentError> {
    if sample_size == 0 || repetitions == 0 {
        return Err(ExperimentError::InvalidConfig {
            detail: "calibration needs at least one sample and one repetition".into(),
        });
    }
    if !(quantile > 0.0 && quantile < 1.0) {
        return Err(ExperimentError::InvalidConfig {
            detail: format!("quantile must lie in (0, 1), got {quantile}"),
        });
    }
    let truth = GaussianSpec::centered(true_cov.clone())?;
    let factor = truth
        .cov()
        .psd_sqrt()
        .expect("validated covariance must admit a psd square root");
    let mut rng = stream_rng(seed, 0);
    let mut distances = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let samples = gaussian_samples(&mut rng, factor.as_mat(), sample_size);
        let sampled = GaussianSpec::centered(sample_covariance(&samples))?;
        distances.push(gelbrich_distance(&sampled, &truth)?);
    }
    distances.sort_by(f64::total_cmp);
    let rank = ((quantile * repetitions as f64).ceil() as usize).clamp(1, repetitions);
    Ok(distances[rank - 1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_seed_is_bit_identical() {
        let cov = SymMatrix::diag(&[2.0, 0.5]);
        let a = calibrate_radius(&cov, 30, 50, 0.95, 9).unwrap();
        let b = calibrate_radius(&cov, 30, 50, 0.95, 9).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert!(a > 0.0);
    }

    #[test]
    fn degenerate_truth_gives_zero_radius() {
        let cov = SymMatrix::zeros(2);
        let r = calibrate_radius(&cov, 10, 7, 0.5, 1).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn larger_samples_shrink_the_radius_on_average() {
        let cov = SymMatrix::identity(2);
        let mean = |size: usize| -> f64 {
            (0..3)
                .map(|s| calibrate_radius(&cov, size, 60, 0.95, s).unwrap())
                .sum::<f64>()
                / 3.0
        };
        assert!(mean(100) < mean(20));
    }

    #[test]
    fn zero_sample_count_is_rejected() {
        let cov = SymMatrix::identity(1);
        assert!(matches!(
            calibrate_radius(&cov, 0, 5, 0.5, 0),
            Err(ExperimentError::InvalidConfig { .. })
        ));
        assert!(calibrate_radius(&cov, 5, 5, 1.0, 0).is_err());
    }
}

//! Training-time batch sampling with whole-image replacement.

use rand::Rng;

use crate::{Error, Result};

use super::sample::RgbaSample;

/// Draw a batch of `n` samples. Each slot independently takes a whole-image
/// sample with probability `r_s`, otherwise a region sample; both pools are
/// sampled uniformly with replacement.
pub fn sample_training_batch<'a>(
    region_pool: &'a [RgbaSample],
    whole_pool: &'a [RgbaSample],
    r_s: f64,
    n: usize,
    rng: &mut impl Rng,
) -> Result<Vec<&'a RgbaSample>> {
    if !(0.0..=1.0).contains(&r_s) {
        return Err(Error::Input(format!("r_s must be in [0,1], got {r_s}")));
    }
    if n == 0 {
        return Err(Error::Input("batch size must be >= 1".into()));
    }
    if r_s < 1.0 && region_pool.is_empty() {
        return Err(Error::Input("region pool is empty".into()));
    }
    if r_s > 0.0 && whole_pool.is_empty() {
        return Err(Error::Input("whole-image pool is empty".into()));
    }

    let mut batch = Vec::with_capacity(n);
    for _ in 0..n {
        let take_whole = rng.random::<f64>() < r_s;
        if take_whole {
            batch.push(&whole_pool[rng.random_range(0..whole_pool.len())]);
        } else {
            batch.push(&region_pool[rng.random_range(0..region_pool.len())]);
        }
    }
    Ok(batch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::sample::SampleSource;
    use crate::image::RgbaImage;
    use crate::rng::SeedStreams;
    use ndarray::{Array2, Array3};

    fn region_sample() -> RgbaSample {
        let mut alpha = Array2::zeros((4, 4));
        alpha[[1, 1]] = 1.0;
        RgbaSample::new(
            RgbaImage::new(Array3::zeros((4, 4, 3)), alpha).unwrap(),
            "a red circle".into(),
            vec![1, 3, 2],
            SampleSource::Grounding,
            None,
        )
        .unwrap()
    }

    fn whole_sample() -> RgbaSample {
        RgbaSample::new(
            RgbaImage::with_full_alpha(Array3::zeros((4, 4, 3))).unwrap(),
            "a red circle and a blue square".into(),
            vec![1, 3, 2],
            SampleSource::WholeImage,
            None,
        )
        .unwrap()
    }

    #[test]
    fn r_s_zero_yields_no_whole_samples() {
        let (region, whole) = (vec![region_sample()], vec![whole_sample()]);
        let mut rng = SeedStreams::new(0).stream("batch");
        for _ in 0..50 {
            let batch = sample_training_batch(&region, &whole, 0.0, 8, &mut rng).unwrap();
            assert!(batch.iter().all(|s| s.source == SampleSource::Grounding));
        }
    }

    #[test]
    fn r_s_one_yields_only_whole_samples_with_full_alpha() {
        let (region, whole) = (vec![region_sample()], vec![whole_sample()]);
        let mut rng = SeedStreams::new(1).stream("batch");
        let batch = sample_training_batch(&region, &whole, 1.0, 16, &mut rng).unwrap();
        assert!(batch
            .iter()
            .all(|s| s.source == SampleSource::WholeImage && s.image.alpha.iter().all(|&v| v == 1.0)));
    }

    /// Binomial confidence oracle: 10,000 draws at r_s = 0.1 must land
    /// within a 3-sigma band, i.e. fraction in [0.09, 0.11].
    #[test]
    fn whole_fraction_matches_binomial_bound() {
        let (region, whole) = (vec![region_sample()], vec![whole_sample()]);
        let mut rng = SeedStreams::new(2).stream("batch");
        let draws = 10_000usize;
        let batch = sample_training_batch(&region, &whole, 0.1, draws, &mut rng).unwrap();
        let frac = batch.iter().filter(|s| s.source == SampleSource::WholeImage).count() as f64
            / draws as f64;
        assert!((0.09..=0.11).contains(&frac), "fraction {frac}");
    }

    #[test]
    fn empty_pools_are_input_errors() {
        let (region, whole) = (vec![region_sample()], vec![whole_sample()]);
        let mut rng = SeedStreams::new(3).stream("batch");
        assert!(sample_training_batch(&[], &whole, 0.5, 4, &mut rng).is_err());
        assert!(sample_training_batch(&region, &[], 0.5, 4, &mut rng).is_err());
        // Unreachable pools may be empty.
        assert!(sample_training_batch(&region, &[], 0.0, 4, &mut rng).is_ok());
        assert!(sample_training_batch(&[], &whole, 1.0, 4, &mut rng).is_ok());
    }
}

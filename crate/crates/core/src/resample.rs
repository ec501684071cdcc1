//! Systematic resampling for particle clouds.

use rand::Rng;

pub use crate::numeric::effective_sample_size;

/// Draw `count` indices by systematic resampling of normalized `weights`:
/// one uniform offset positions an equidistant grid over the cumulative sum.
pub fn systematic_indices<R: Rng>(weights: &[f64], count: usize, rng: &mut R) -> Vec<usize> {
    debug_assert!(!weights.is_empty());
    let offset: f64 = rng.gen::<f64>() / count as f64;
    let mut indices = Vec::with_capacity(count);
    let mut cumulative = weights[0];
    let mut j = 0usize;
    for i in 0..count {
        let target = offset + i as f64 / count as f64;
        while cumulative < target && j + 1 < weights.len() {
            j += 1;
            cumulative += weights[j];
        }
        indices.push(j);
    }
    indices
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    #[test]
    fn preserves_count_and_tracks_weights() {
        let weights = [0.5, 0.25, 0.125, 0.125];
        let mut rng = stream_rng(3, Stream::Resample, 0, 0);
        let n = 100_000;
        let idx = systematic_indices(&weights, n, &mut rng);
        assert_eq!(idx.len(), n);
        let mut counts = [0usize; 4];
        for i in idx {
            counts[i] += 1;
        }
        for (c, w) in counts.iter().zip(weights) {
            let frac = *c as f64 / n as f64;
            // Systematic resampling keeps each count within one grid step.
            assert!((frac - w).abs() < 2.0 / n as f64 * weights.len() as f64 + 1e-4);
        }
    }

    #[test]
    fn degenerate_weight_selects_single_particle() {
        let weights = [0.0, 1.0, 0.0];
        let mut rng = stream_rng(4, Stream::Resample, 0, 0);
        let idx = systematic_indices(&weights, 64, &mut rng);
        assert!(idx.iter().all(|&i| i == 1));
    }

    #[test]
    fn ess_definition() {
        assert!((effective_sample_size(&[0.5, 0.5]) - 2.0).abs() < 1e-12);
        assert!((effective_sample_size(&[1.0, 0.0]) - 1.0).abs() < 1e-12);
    }
}

//! Low-variance resampling index generators.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResamplingScheme {
    /// One uniform offset shared by all strata.
    #[default]
    Systematic,
    /// An independent uniform draw inside every stratum.
    Stratified,
}

impl ResamplingScheme {
    /// Draws `count` ancestor indices from normalized `weights`.
    pub fn indices<R: Rng + ?Sized>(self, weights: &[f64], count: usize, rng: &mut R) -> Vec<usize> {
        match self {
            ResamplingScheme::Systematic => systematic_indices(weights, count, rng),
            ResamplingScheme::Stratified => stratified_indices(weights, count, rng),
        }
    }
}

pub fn systematic_indices<R: Rng + ?Sized>(weights: &[f64], count: usize, rng: &mut R) -> Vec<usize> {
    let offset: f64 = rng.random();
    select(weights, count, |_| offset)
}

pub fn stratified_indices<R: Rng + ?Sized>(weights: &[f64], count: usize, rng: &mut R) -> Vec<usize> {
    let draws: Vec<f64> = (0..count).map(|_| rng.random()).collect();
    select(weights, count, |k| draws[k])
}

/// Walks the cumulative weights once; the k-th pointer sits at
/// `(k + jitter(k)) / count` of the total mass.
fn select(weights: &[f64], count: usize, jitter: impl Fn(usize) -> f64) -> Vec<usize> {
    assert!(!weights.is_empty(), "cannot resample an empty ensemble");
    let total: f64 = weights.iter().sum();
    let mut out = Vec::with_capacity(count);
    let mut cumulative = weights[0];
    let mut i = 0;
    let last = weights.len() - 1;
    for k in 0..count {
        let pointer = total * (k as f64 + jitter(k)) / count as f64;
        while cumulative < pointer && i < last {
            i += 1;
            cumulative += weights[i];
        }
        out.push(i);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn degenerate_weight_selects_single_particle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = [0.0, 0.0, 1.0, 0.0];
        for scheme in [ResamplingScheme::Systematic, ResamplingScheme::Stratified] {
            assert_eq!(scheme.indices(&w, 4, &mut rng), vec![2; 4]);
        }
    }

    #[test]
    fn uniform_weights_systematic_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = [0.25; 4];
        assert_eq!(systematic_indices(&w, 4, &mut rng), vec![0, 1, 2, 3]);
    }

    #[test]
    fn counts_stay_within_one_of_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = [0.1, 0.45, 0.05, 0.4];
        let n = 1000;
        for scheme in [ResamplingScheme::Systematic, ResamplingScheme::Stratified] {
            let idx = scheme.indices(&w, n, &mut rng);
            for (j, wj) in w.iter().enumerate() {
                let c = idx.iter().filter(|&&i| i == j).count() as f64;
                // stratified allows more spread than systematic
                assert!((c - wj * n as f64).abs() <= 30.0, "{scheme:?} {j} {c}");
            }
        }
    }

    #[test]
    fn indices_are_sorted() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = [0.3, 0.1, 0.2, 0.4];
        let idx = stratified_indices(&w, 40, &mut rng);
        assert!(idx.windows(2).all(|p| p[0] <= p[1]));
        assert_eq!(idx.len(), 40);
    }
}

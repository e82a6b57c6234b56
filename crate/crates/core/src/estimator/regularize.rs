//! Gaussian-kernel regularization of a particle population.

use nalgebra::{SMatrix, SVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::D_FLOOR;
use crate::estimation_model::{AugmentedState, N_AUG};

type Mat = SMatrix<f64, N_AUG, N_AUG>;
type Vec7 = SVector<f64, N_AUG>;

/// Diagonal jitter added when the covariance is not positive definite.
const PD_JITTER: f64 = 1e-10;

/// Kernel constant `A` and MISE-optimal bandwidth `h` for state dimension
/// `n_x` and `n_i` particles.
pub fn bandwidth(n_x: usize, n_i: usize) -> (f64, f64) {
    let nx = n_x as f64;
    let a = (4.0 / (nx + 2.0)).powf(1.0 / (nx + 4.0));
    (a, a * (n_i as f64).powf(-1.0 / (nx + 4.0)))
}

/// Weighted covariance with the `n/(n−1)` small-sample factor.
pub fn weighted_covariance(particles: &[AugmentedState], weights: &[f64]) -> SMatrix<f64, N_AUG, N_AUG> {
    let n = particles.len() as f64;
    let total = super::sum(weights.iter().copied());
    let mut mean = Vec7::zeros();
    for (p, w) in particles.iter().zip(weights) {
        mean += Vec7::from(p.0) * (*w / total);
    }
    let mut s = Mat::zeros();
    for (p, w) in particles.iter().zip(weights) {
        let d = Vec7::from(p.0) - mean;
        s += (d * d.transpose()) * (*w / total);
    }
    s * (n / (n - 1.0))
}

/// Jittered candidates for every particle.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposals {
    pub particles: Vec<AugmentedState>,
    pub h_opt: f64,
    /// The covariance needed diagonal jitter before it factorized.
    pub jittered: bool,
    /// Factorization failed even with jitter; `particles` is a plain copy.
    pub skipped: bool,
}

/// Lower-triangular factor of the kernel covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelFactor {
    pub l: Mat,
    /// The covariance needed diagonal jitter before it factorized.
    pub jittered: bool,
}

/// Cholesky factor of the weighted covariance, retrying once with diagonal
/// jitter. `None` when both attempts fail.
pub fn kernel_factor(particles: &[AugmentedState], weights: &[f64]) -> Option<KernelFactor> {
    let s = weighted_covariance(particles, weights);
    match s.cholesky() {
        Some(c) => Some(KernelFactor { l: c.l(), jittered: false }),
        None => (s + Mat::identity() * PD_JITTER).cholesky().map(|c| KernelFactor { l: c.l(), jittered: true }),
    }
}

pub(super) fn proposals<R: Rng + ?Sized>(particles: &[AugmentedState], weights: &[f64], rng: &mut R) -> Proposals {
    proposals_with(particles, kernel_factor(particles, weights), rng)
}

pub(super) fn proposals_with<R: Rng + ?Sized>(
    particles: &[AugmentedState],
    factor: Option<KernelFactor>,
    rng: &mut R,
) -> Proposals {
    let (_, h_opt) = bandwidth(N_AUG, particles.len());
    let Some(KernelFactor { l, jittered }) = factor else {
        return Proposals { particles: particles.to_vec(), h_opt, jittered: true, skipped: true };
    };
    let out = particles
        .iter()
        .map(|p| {
            let eps = Vec7::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
            let moved = Vec7::from(p.0) + (l * eps) * h_opt;
            let mut chi = AugmentedState(moved.into());
            chi[0] = chi[0].max(0.0);
            chi[1] = chi[1].max(0.0);
            chi[2] = chi[2].max(0.0);
            chi[5] = chi[5].max(D_FLOOR);
            chi
        })
        .collect();
    Proposals { particles: out, h_opt, jittered, skipped: false }
}

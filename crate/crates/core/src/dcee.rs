//! Dual control for exploration and exploitation.
//!
//! For every candidate torque increment the controller predicts, one step
//! ahead and per particle, the front-axle braking force and the largest
//! force that particle's tyre could deliver. The cost is the distance
//! between the two means plus the variance of their difference, so actions
//! that are both close to the believed peak and well understood win.
//!
//! Forces here are braking magnitudes: `F = −μ·F_z` and `F* = D·F_z`, so the
//! tracking error `F − F*` is non-positive whenever `|μ| ≤ D`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AbsError, Result};
use crate::estimation_model::{predict_step, vertical_loads};
use crate::estimator::{stratified_indices, ParticleEnsemble};
use crate::plant::VehicleParams;
use crate::tyre::friction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DceeConfig {
    /// Admissible torque increments per control step (N·m). Must contain 0.
    pub actions: Vec<f64>,
    /// Per-wheel front torque bounds (N·m).
    pub torque_min: f64,
    pub torque_max: f64,
    /// Predicted observations kept after downsampling.
    pub n_predicted: usize,
    /// Force observation noise, treated as a standard deviation (N).
    pub sigma_f: f64,
    /// Below this estimated speed the last torque is held.
    pub hold_speed: f64,
}

impl Default for DceeConfig {
    fn default() -> Self {
        DceeConfig {
            actions: vec![-400.0, -200.0, -50.0, 0.0, 50.0, 200.0, 400.0],
            torque_min: -4000.0,
            torque_max: 0.0,
            n_predicted: 40,
            sigma_f: 250.0,
            hold_speed: 1.5,
        }
    }
}

impl DceeConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.actions.contains(&0.0) {
            return Err(AbsError::Config("action set must contain the hold action 0".into()));
        }
        if self.actions.iter().any(|a| !a.is_finite()) {
            return Err(AbsError::Config("non-finite torque increment".into()));
        }
        if !(self.torque_min < self.torque_max) {
            return Err(AbsError::Config("torque_min must be below torque_max".into()));
        }
        if self.n_predicted < 2 || !(self.sigma_f > 0.0) {
            return Err(AbsError::Config("need n_predicted ≥ 2 and sigma_f > 0".into()));
        }
        Ok(())
    }

    pub fn clamp(&self, torque: f64) -> f64 {
        torque.clamp(self.torque_min, self.torque_max)
    }
}

/// Predicted braking force and peak force for one particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictedForceSample {
    pub force: f64,
    pub peak_force: f64,
    pub weight: f64,
}

/// Weighted tracking-error statistics for one candidate action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostTerms {
    pub j: f64,
    pub mean_force: f64,
    pub mean_peak: f64,
    /// Variance of `F − F*`.
    pub p: f64,
}

/// `|F̄ − F̄*| + Var(F − F*)` with normalized sample weights.
pub fn cost(samples: &[PredictedForceSample]) -> CostTerms {
    let total: f64 = samples.iter().fold(0.0, |a, s| a + s.weight);
    let (mut mf, mut mp) = (0.0, 0.0);
    for s in samples {
        mf += s.weight * s.force;
        mp += s.weight * s.peak_force;
    }
    mf /= total;
    mp /= total;
    let mean_err = mf - mp;
    let mut p = 0.0;
    for s in samples {
        let d = (s.force - s.peak_force) - mean_err;
        p += s.weight * d * d;
    }
    p /= total;
    CostTerms { j: mean_err.abs() + p, mean_force: mf, mean_peak: mp, p }
}

/// Predicts front-axle forces for the particles in `subset` under per-wheel
/// torque `torque`, using axle load `fz_front`.
///
/// Sample weights come from a Gaussian force likelihood (std `sigma_f`)
/// centred on the mean predicted force of the subset.
pub fn predict_forces(
    ens: &ParticleEnsemble,
    subset: &[usize],
    torque: f64,
    fz_front: f64,
    dt: f64,
    params: &VehicleParams,
    sigma_f: f64,
) -> Vec<PredictedForceSample> {
    let particles = ens.particles();
    let samples: Vec<PredictedForceSample> = subset
        .iter()
        .map(|&i| {
            let chi = &particles[i];
            let next = predict_step(chi, torque, dt, params).next;
            let theta = next.theta();
            let mu = if next.u() > 0.0 {
                friction((next.omega_f() * params.radius - next.u()) / next.u(), &theta)
            } else {
                0.0
            };
            PredictedForceSample { force: -mu * fz_front, peak_force: theta.d * fz_front, weight: 1.0 }
        })
        .collect();
    let centre = samples.iter().fold(0.0, |a, s| a + s.force) / samples.len() as f64;
    condition_on(&samples, centre, sigma_f)
}

/// Reweights `samples` by a Gaussian force likelihood (std `sigma_f`) of
/// observing `observed`.
pub fn condition_on(samples: &[PredictedForceSample], observed: f64, sigma_f: f64) -> Vec<PredictedForceSample> {
    let log_w: Vec<f64> = samples
        .iter()
        .map(|s| {
            let z = (s.force - observed) / sigma_f;
            s.weight.ln() - 0.5 * z * z
        })
        .collect();
    let max_lw = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    samples.iter().zip(log_w).map(|(s, lw)| PredictedForceSample { weight: (lw - max_lw).exp(), ..*s }).collect()
}

/// Result of one action selection.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub tau: f64,
    pub torque: f64,
    pub j_min: f64,
    pub p_at_min: f64,
    /// Largest tracking-error variance over all candidates.
    pub p_max: f64,
    /// Cost of each candidate, in `actions` order.
    pub costs: Vec<f64>,
    pub held: bool,
}

/// Greedy one-step dual controller.
#[derive(Debug, Clone)]
pub struct DceeController {
    config: DceeConfig,
    rng: ChaCha8Rng,
}

impl DceeController {
    pub fn new(config: DceeConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(DceeController { config, rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    pub fn config(&self) -> &DceeConfig {
        &self.config
    }

    /// Evaluates every increment from `torque_prev` and returns the argmin.
    ///
    /// Ties go to the smallest `|τ|`, then to the most negative `τ`.
    /// The ensemble is only read.
    pub fn select_action(
        &mut self,
        ens: &ParticleEnsemble,
        torque_prev: f64,
        u_dot_estimate: f64,
        dt: f64,
        params: &VehicleParams,
    ) -> Decision {
        let cfg = &self.config;
        let subset = stratified_indices(ens.weights(), cfg.n_predicted, &mut self.rng);
        let (fz_front, _) = vertical_loads(u_dot_estimate.min(0.0), params);

        let terms: Vec<(f64, f64, CostTerms)> = cfg
            .actions
            .iter()
            .map(|&tau| {
                let torque = cfg.clamp(torque_prev + tau);
                let samples = predict_forces(ens, &subset, torque, fz_front, dt, params, cfg.sigma_f);
                (tau, torque, cost(&samples))
            })
            .collect();

        let p_max = terms.iter().map(|t| t.2.p).fold(f64::NEG_INFINITY, f64::max);
        let costs: Vec<f64> = terms.iter().map(|t| t.2.j).collect();

        let held = ens.posterior_mean().u() < cfg.hold_speed;
        let best = if held {
            terms.iter().find(|t| t.0 == 0.0).expect("validated action set contains 0")
        } else {
            terms
                .iter()
                .min_by(|a, b| {
                    a.2.j
                        .total_cmp(&b.2.j)
                        .then(a.0.abs().total_cmp(&b.0.abs()))
                        .then(a.0.total_cmp(&b.0))
                })
                .expect("action set is non-empty")
        };
        Decision {
            tau: best.0,
            torque: if held { torque_prev } else { best.1 },
            j_min: best.2.j,
            p_at_min: best.2.p,
            p_max,
            costs,
            held,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(force: f64, peak: f64) -> PredictedForceSample {
        PredictedForceSample { force, peak_force: peak, weight: 1.0 }
    }

    #[test]
    fn cost_examples() {
        let all_at_peak = cost(&[s(5000.0, 5000.0), s(5000.0, 5000.0)]);
        assert_eq!(all_at_peak.j, 0.0);

        let constant = cost(&[s(4500.0, 5000.0), s(6500.0, 7000.0), s(100.0, 600.0)]);
        assert!((constant.j - 500.0).abs() < 1e-9);
        assert!(constant.p.abs() < 1e-9);

        let two = cost(&[s(4600.0, 5000.0), s(4400.0, 5000.0)]);
        assert!((two.j - 10500.0).abs() < 1e-9);
        assert!((two.p - 10000.0).abs() < 1e-9);
    }

    #[test]
    fn cost_weight_scale_invariant() {
        let a = [s(4600.0, 5000.0), PredictedForceSample { weight: 3.0, ..s(4000.0, 5200.0) }];
        let b = a.map(|x| PredictedForceSample { weight: x.weight * 7.5, ..x });
        let (ca, cb) = (cost(&a), cost(&b));
        assert!((ca.j - cb.j).abs() < 1e-9 * ca.j);
    }

    #[test]
    fn config_requires_hold_action() {
        let cfg = DceeConfig { actions: vec![-100.0, 100.0], ..Default::default() };
        assert!(cfg.validate().is_err());
        assert!(DceeConfig::default().validate().is_ok());
    }
}

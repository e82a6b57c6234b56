//! Regularized particle filter with a Metropolis-Hastings move step and
//! uncertainty-triggered ("retrogressive") parameter resets, estimating
//! `[U, ω_f, ω_r, B, C, D, E]` jointly.
//!
//! One filter update is: propagate every particle through the reduced
//! model, reweight by the Gaussian measurement likelihood, and, when the
//! effective sample size falls below `K_o·n`, resample, jitter with a
//! Gaussian kernel and accept or reject each jittered particle.

mod regularize;
mod resample;

pub use regularize::{bandwidth, kernel_factor, weighted_covariance, KernelFactor, Proposals};
pub use resample::{stratified_indices, systematic_indices, ResamplingScheme};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{AbsError, Result};
use crate::estimation_model::{predict_step, AugmentedState, Measurement, N_AUG};
use crate::plant::VehicleParams;

/// Measurement noise variances for `[U, ω_f, ω_r]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorNoise {
    pub variances: [f64; 3],
}

impl Default for SensorNoise {
    fn default() -> Self {
        SensorNoise { variances: [0.2, 0.5, 0.5] }
    }
}

impl SensorNoise {
    pub fn std_devs(&self) -> [f64; 3] {
        self.variances.map(f64::sqrt)
    }

    /// Unnormalized Gaussian log-likelihood of `y` given the state part of `chi`.
    #[inline]
    pub fn log_likelihood(&self, y: &Measurement, chi: &AugmentedState) -> f64 {
        let mut acc = 0.0;
        for k in 0..3 {
            let d = y.0[k] - chi.0[k];
            acc += d * d / self.variances[k];
        }
        -0.5 * acc
    }

    pub fn validate(&self) -> Result<()> {
        if self.variances.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(AbsError::Config(format!("sensor variances must be positive: {:?}", self.variances)))
        }
    }
}

/// Uniform initial distribution over states and tyre parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorSpec {
    pub b: (f64, f64),
    pub c: (f64, f64),
    pub d: (f64, f64),
    pub e: (f64, f64),
    /// Centre of the speed box (first body speed reading).
    pub u0: f64,
    pub omega_f0: f64,
    pub omega_r0: f64,
    pub u_half_width: f64,
    pub omega_half_width: f64,
    pub n_particles: usize,
}

impl PriorSpec {
    /// Parameter boxes wide enough to contain every preset surface.
    pub const B_BOX: (f64, f64) = (4.0, 21.0);
    pub const C_BOX: (f64, f64) = (1.2601, 1.601);
    pub const D_BOX: (f64, f64) = (0.2, 1.6);
    pub const E_BOX: (f64, f64) = (-12.0, 2.0);

    /// State boxes centred on the first measurement.
    pub fn around(y0: &Measurement, n_particles: usize) -> Self {
        PriorSpec {
            b: Self::B_BOX,
            c: Self::C_BOX,
            d: Self::D_BOX,
            e: Self::E_BOX,
            u0: y0.0[0],
            omega_f0: y0.0[1],
            omega_r0: y0.0[2],
            u_half_width: 2.0,
            omega_half_width: 3.5,
            n_particles,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(AbsError::Config(format!("need at least 2 particles, got {}", self.n_particles)));
        }
        for (name, (lo, hi)) in [("B", self.b), ("C", self.c), ("D", self.d), ("E", self.e)] {
            if !(hi > lo) {
                return Err(AbsError::Config(format!("degenerate prior box for {name}: [{lo}, {hi}]")));
            }
        }
        if !(self.u_half_width > 0.0 && self.omega_half_width > 0.0) {
            return Err(AbsError::Config("degenerate state prior box".into()));
        }
        Ok(())
    }

    /// True when the tyre parameters lie inside the prior boxes.
    pub fn supports(&self, chi: &AugmentedState) -> bool {
        let inside = |x: f64, (lo, hi): (f64, f64)| (lo..=hi).contains(&x);
        inside(chi[3], self.b) && inside(chi[4], self.c) && inside(chi[5], self.d) && inside(chi[6], self.e)
    }

    fn draw_theta<R: Rng + ?Sized>(&self, rng: &mut R, chi: &mut AugmentedState) {
        chi[3] = uniform(rng, self.b);
        chi[4] = uniform(rng, self.c);
        chi[5] = uniform(rng, self.d);
        chi[6] = uniform(rng, self.e);
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> AugmentedState {
        let mut chi = AugmentedState::default();
        chi[0] = uniform(rng, (self.u0 - self.u_half_width, self.u0 + self.u_half_width)).max(0.0);
        chi[1] = uniform(rng, (self.omega_f0 - self.omega_half_width, self.omega_f0 + self.omega_half_width))
            .max(0.0);
        chi[2] = uniform(rng, (self.omega_r0 - self.omega_half_width, self.omega_r0 + self.omega_half_width))
            .max(0.0);
        self.draw_theta(rng, &mut chi);
        chi
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Lower bound applied to the peak factor after jittering.
pub const D_FLOOR: f64 = 0.01;

/// Fixed-order sum; keeps reductions reproducible.
pub(crate) fn sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, |a, b| a + b)
}

/// Weighted particle approximation of the posterior.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    particles: Vec<AugmentedState>,
    weights: Vec<f64>,
    rng: ChaCha8Rng,
    /// Prior whose parameter boxes bound the MCMC move. `None` is unbounded.
    support: Option<PriorSpec>,
}

/// Outcome of a propagate-and-reweight pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightUpdate {
    /// Every likelihood underflowed; weights were reset to uniform.
    pub underflow: bool,
    /// Posterior-weighted body acceleration over the step (m/s²).
    pub mean_u_dot: f64,
}

/// Outcome of [`ParticleEnsemble::maybe_resample`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ResampleReport {
    pub resampled: bool,
    pub n_eff: f64,
    pub threshold: f64,
    pub accepted: usize,
    pub proposed: usize,
    pub regularization_skipped: bool,
}

impl ResampleReport {
    pub fn acceptance_rate(&self) -> Option<f64> {
        (self.proposed > 0).then(|| self.accepted as f64 / self.proposed as f64)
    }
}

impl ParticleEnsemble {
    /// Draws `n_particles` i.i.d. from the prior boxes with uniform weights.
    pub fn initialize(prior: &PriorSpec, seed: u64) -> Result<Self> {
        prior.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = prior.n_particles;
        let particles = (0..n).map(|_| prior.draw(&mut rng)).collect();
        Ok(ParticleEnsemble { particles, weights: vec![1.0 / n as f64; n], rng, support: Some(*prior) })
    }

    /// Builds an ensemble from explicit particles and (unnormalized) weights.
    pub fn from_parts(particles: Vec<AugmentedState>, weights: Vec<f64>, seed: u64) -> Result<Self> {
        if particles.is_empty() || particles.len() != weights.len() {
            return Err(AbsError::Config("particles and weights must be non-empty and equal length".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(AbsError::Config("weights must be finite and non-negative".into()));
        }
        let mut ens = ParticleEnsemble { particles, weights, rng: ChaCha8Rng::seed_from_u64(seed), support: None };
        if !ens.normalize() {
            ens.reset_uniform();
        }
        Ok(ens)
    }

    /// Restricts MCMC moves to the parameter boxes of `prior`.
    pub fn with_support(mut self, prior: &PriorSpec) -> Self {
        self.support = Some(*prior);
        self
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[AugmentedState] {
        &self.particles
    }

    /// Normalized weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    fn reset_uniform(&mut self) {
        let w = 1.0 / self.len() as f64;
        self.weights.iter_mut().for_each(|x| *x = w);
    }

    /// Returns false when the total mass is zero or non-finite.
    fn normalize(&mut self) -> bool {
        let total = sum(self.weights.iter().copied());
        if !(total > 0.0) || !total.is_finite() {
            return false;
        }
        self.weights.iter_mut().for_each(|w| *w /= total);
        true
    }

    /// Pushes every particle through the reduced model with front torque
    /// `torque`, then multiplies each weight by `p(y | χ)`.
    ///
    /// The proposal is the transition prior, so no importance correction
    /// is needed. `process_std` adds zero-mean Gaussian noise to the three
    /// state components after each step; tyre parameters stay static.
    pub fn propagate_and_weight(
        &mut self,
        torque: f64,
        y: &Measurement,
        dt: f64,
        params: &VehicleParams,
        noise: &SensorNoise,
        process_std: &[f64; 3],
    ) -> WeightUpdate {
        let mut mean_u_dot = 0.0;
        let diffuse = process_std.iter().any(|s| *s > 0.0);
        for (chi, w) in self.particles.iter_mut().zip(&self.weights) {
            let s = predict_step(chi, torque, dt, params);
            mean_u_dot += w * s.u_dot;
            *chi = s.next;
            if diffuse {
                for k in 0..3 {
                    let e: f64 = self.rng.sample(StandardNormal);
                    chi[k] = (chi[k] + process_std[k] * e).max(0.0);
                }
            }
        }
        let underflow = !self.reweight(y, noise);
        WeightUpdate { underflow, mean_u_dot }
    }

    /// Bayes update in log space. Returns false (and resets to uniform)
    /// if every linear likelihood would underflow to zero.
    pub fn reweight(&mut self, y: &Measurement, noise: &SensorNoise) -> bool {
        let ll: Vec<f64> = self.particles.iter().map(|chi| noise.log_likelihood(y, chi)).collect();
        let max_ll = ll.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(max_ll >= f64::MIN_POSITIVE.ln()) {
            self.reset_uniform();
            return false;
        }
        let log_w: Vec<f64> = self.weights.iter().zip(&ll).map(|(w, l)| w.ln() + l).collect();
        let max_lw = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max_lw.is_finite() {
            self.reset_uniform();
            return false;
        }
        for (w, lw) in self.weights.iter_mut().zip(&log_w) {
            *w = (lw - max_lw).exp();
        }
        if !self.normalize() {
            self.reset_uniform();
            return false;
        }
        true
    }

    /// `1 / Σ W²`.
    pub fn effective_sample_size(&self) -> f64 {
        1.0 / sum(self.weights.iter().map(|w| w * w))
    }

    /// Weighted mean of every component.
    pub fn posterior_mean(&self) -> AugmentedState {
        let mut mean = [0.0; N_AUG];
        for (chi, w) in self.particles.iter().zip(&self.weights) {
            for k in 0..N_AUG {
                mean[k] += w * chi.0[k];
            }
        }
        AugmentedState(mean)
    }

    /// Resampling threshold fraction, linear in the expected peak friction.
    pub fn resampling_gain(&self) -> f64 {
        resampling_gain(self.posterior_mean().theta().d)
    }

    /// Smallest and largest value of component `k` across particles.
    pub fn component_range(&self, k: usize) -> (f64, f64) {
        self.particles
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), chi| (lo.min(chi[k]), hi.max(chi[k])))
    }

    /// Replaces particles by `scheme`-selected ancestors and resets weights to uniform.
    pub fn resample(&mut self, scheme: ResamplingScheme) {
        let n = self.len();
        let idx = scheme.indices(&self.weights, n, &mut self.rng);
        self.particles = idx.iter().map(|&i| self.particles[i]).collect();
        self.reset_uniform();
    }

    /// Draws a kernel-jittered copy of every particle without touching the ensemble.
    pub fn regularization_proposals(&mut self) -> Proposals {
        regularize::proposals(&self.particles, &self.weights, &mut self.rng)
    }

    /// Applies kernel jitter unconditionally.
    pub fn regularize(&mut self) -> Proposals {
        let props = self.regularization_proposals();
        if !props.skipped {
            self.particles.clone_from(&props.particles);
        }
        props
    }

    /// One Metropolis-Hastings step per particle: the jittered candidate
    /// replaces the current particle with probability
    /// `min(1, p(y|χ*) / p(y|χ))`; candidates outside the prior support are
    /// always rejected. Returns the number accepted.
    pub fn mcmc_move(&mut self, proposals: &[AugmentedState], y: &Measurement, noise: &SensorNoise) -> usize {
        assert_eq!(proposals.len(), self.len());
        let mut accepted = 0;
        for (chi, cand) in self.particles.iter_mut().zip(proposals) {
            // zero prior density outside the boxes: always rejected
            if self.support.is_some_and(|p| !p.supports(cand)) {
                continue;
            }
            let log_ratio = noise.log_likelihood(y, cand) - noise.log_likelihood(y, chi);
            let u: f64 = self.rng.random();
            if log_ratio >= 0.0 || u.ln() < log_ratio {
                *chi = *cand;
                accepted += 1;
            }
        }
        accepted
    }

    /// Resample, regularize and move when `N_eff ≤ K_o·n`; otherwise leave
    /// the ensemble untouched.
    pub fn maybe_resample(
        &mut self,
        y: &Measurement,
        noise: &SensorNoise,
        scheme: ResamplingScheme,
    ) -> ResampleReport {
        let n_eff = self.effective_sample_size();
        let threshold = self.resampling_gain() * self.len() as f64;
        let mut report = ResampleReport { n_eff, threshold, ..Default::default() };
        if n_eff > threshold {
            return report;
        }
        report.resampled = true;
        // Kernel spread comes from the weighted population before copies collapse it.
        let factor = regularize::kernel_factor(&self.particles, &self.weights);
        self.resample(scheme);
        let props = regularize::proposals_with(&self.particles, factor, &mut self.rng);
        if props.skipped {
            report.regularization_skipped = true;
            return report;
        }
        report.proposed = self.len();
        report.accepted = self.mcmc_move(&props.particles, y, noise);
        report
    }

    /// Redraws every particle's tyre parameters from the prior boxes and
    /// resets weights when `p_pred ≥ p0`. State components are kept.
    pub fn retrogressive_resample(&mut self, p_pred: f64, p0: f64, prior: &PriorSpec) -> bool {
        if !(p_pred >= p0) {
            return false;
        }
        for chi in self.particles.iter_mut() {
            prior.draw_theta(&mut self.rng, chi);
        }
        self.reset_uniform();
        true
    }
}

/// `K_o = −(3/20)·E[D] + 0.295`.
pub fn resampling_gain(expected_d: f64) -> f64 {
    -0.15 * expected_d + 0.295
}

/// Filter configuration shared across updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub n_particles: usize,
    pub noise: SensorNoise,
    pub scheme: ResamplingScheme,
    pub retrogressive: bool,
    /// Per-step random-walk std on `[U, ω_f, ω_r]`.
    pub process_std: [f64; 3],
}

/// Absorbs the load-transfer lag the reduced model ignores.
pub const DEFAULT_PROCESS_STD: [f64; 3] = [0.001, 0.1, 0.1];

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            n_particles: 1000,
            noise: SensorNoise::default(),
            scheme: ResamplingScheme::Systematic,
            retrogressive: true,
            process_std: DEFAULT_PROCESS_STD,
        }
    }
}

/// Per-update summary for traces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterReport {
    pub mean: AugmentedState,
    pub d_range: (f64, f64),
    pub n_eff: f64,
    pub resample: ResampleReport,
    pub retrogressive: bool,
    pub underflow: bool,
    pub mean_u_dot: f64,
}

/// Particle filter plus the bookkeeping needed for retrogressive resets.
#[derive(Debug, Clone)]
pub struct RegularizedParticleFilter {
    ensemble: ParticleEnsemble,
    prior: PriorSpec,
    config: FilterConfig,
    params: VehicleParams,
    p0: Option<f64>,
    pending_reset: bool,
    last_u_dot: f64,
}

impl RegularizedParticleFilter {
    pub fn new(y0: &Measurement, config: FilterConfig, params: VehicleParams, seed: u64) -> Result<Self> {
        config.noise.validate()?;
        let prior = PriorSpec::around(y0, config.n_particles);
        let ensemble = ParticleEnsemble::initialize(&prior, seed)?;
        Ok(RegularizedParticleFilter {
            ensemble,
            prior,
            config,
            params,
            p0: None,
            pending_reset: false,
            last_u_dot: 0.0,
        })
    }

    pub fn ensemble(&self) -> &ParticleEnsemble {
        &self.ensemble
    }

    pub fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    pub fn p0(&self) -> Option<f64> {
        self.p0
    }

    /// Sets the reset threshold; only the first call takes effect.
    pub fn set_p0(&mut self, p0: f64) {
        if self.p0.is_none() {
            self.p0 = Some(p0);
        }
    }

    /// Posterior body acceleration from the latest update.
    pub fn last_u_dot(&self) -> f64 {
        self.last_u_dot
    }

    /// Retrogressive check, run at the start of each new measurement.
    /// `p_pred` is the controller's latest predicted tracking-error variance.
    pub fn retrogressive_check(&mut self, p_pred: Option<f64>) -> bool {
        if !self.config.retrogressive {
            self.pending_reset = false;
            return false;
        }
        let forced = std::mem::take(&mut self.pending_reset);
        match (p_pred, self.p0) {
            _ if forced => self.ensemble.retrogressive_resample(0.0, 0.0, &self.prior),
            (Some(p), Some(p0)) => self.ensemble.retrogressive_resample(p, p0, &self.prior),
            _ => false,
        }
    }

    /// One full filter update for measurement `y` after applying `torque`.
    pub fn update(&mut self, torque: f64, y: &Measurement, dt: f64, p_pred: Option<f64>) -> Result<FilterReport> {
        let retro = self.retrogressive_check(p_pred);
        let wu = self.ensemble.propagate_and_weight(torque, y, dt, &self.params, &self.config.noise, &self.config.process_std);
        if wu.underflow {
            self.pending_reset = true;
        }
        self.last_u_dot = wu.mean_u_dot;
        let n_eff = self.ensemble.effective_sample_size();
        let resample = self.ensemble.maybe_resample(y, &self.config.noise, self.config.scheme);
        let mean = self.ensemble.posterior_mean();
        if !mean.is_finite() {
            return Err(AbsError::NonFiniteEstimate { t: f64::NAN });
        }
        Ok(FilterReport {
            mean,
            d_range: self.ensemble.component_range(5),
            n_eff,
            resample,
            retrogressive: retro,
            underflow: wu.underflow,
            mean_u_dot: wu.mean_u_dot,
        })
    }
}

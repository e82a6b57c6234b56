//! Reduced single-track model used inside the particle filter and the
//! dual-control predictor: body speed plus one front and one rear wheel,
//! with Magic-Formula parameters carried along as constant states.

use std::ops::{Index, IndexMut};

use crate::plant::{VehicleParams, GRAVITY};
use crate::tyre::{friction, MagicParams};

/// Number of components in [`AugmentedState`].
pub const N_AUG: usize = 7;

/// `[U, ω_f, ω_r, B, C, D, E]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AugmentedState(pub [f64; N_AUG]);

impl AugmentedState {
    pub fn new(u: f64, omega_f: f64, omega_r: f64, theta: MagicParams) -> Self {
        AugmentedState([u, omega_f, omega_r, theta.b, theta.c, theta.d, theta.e])
    }

    pub fn u(&self) -> f64 {
        self.0[0]
    }
    pub fn omega_f(&self) -> f64 {
        self.0[1]
    }
    pub fn omega_r(&self) -> f64 {
        self.0[2]
    }

    pub fn theta(&self) -> MagicParams {
        MagicParams { b: self.0[3], c: self.0[4], d: self.0[5], e: self.0[6] }
    }

    /// `[U, ω_f, ω_r]`.
    pub fn states(&self) -> [f64; 3] {
        [self.0[0], self.0[1], self.0[2]]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Index<usize> for AugmentedState {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for AugmentedState {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Noisy observation `[U, ω_f, ω_r]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Measurement(pub [f64; 3]);

impl Measurement {
    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Quasi-static axle loads `(front, rear)` for body acceleration `u_dot`.
///
/// Braking (`u_dot < 0`) moves load forward through the CoG height; the
/// two loads always sum to `m·g`.
pub fn vertical_loads(u_dot: f64, params: &VehicleParams) -> (f64, f64) {
    let l = params.wheelbase();
    let mg = params.weight();
    let transfer = params.mass * params.cog_height() * (-u_dot) / l;
    let front = mg * params.b.abs() / l + transfer;
    (front, mg - front)
}

/// Body acceleration consistent with its own weight transfer, for axle
/// friction coefficients `mu_f`, `mu_r`.
pub fn quasi_static_accel(mu_f: f64, mu_r: f64, params: &VehicleParams) -> f64 {
    let l = params.wheelbase();
    let h = params.cog_height();
    let num = GRAVITY * (mu_f * params.b.abs() + mu_r * params.a);
    // keeps wildly regularized particles from flipping the load split
    let den = (l + (mu_f - mu_r) * h).max(0.1 * l);
    num / den
}

/// Intermediate quantities from one model step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelStep {
    pub next: AugmentedState,
    /// Body acceleration used for the step (m/s²).
    pub u_dot: f64,
    /// Axle loads at the start of the step (N).
    pub fz_front: f64,
    pub fz_rear: f64,
}

/// One explicit Euler step. `torque` is the per-wheel front brake torque
/// (both front wheels receive the same value). Parameters are carried
/// unchanged; a stopped vehicle (`U ≤ 0`) stays frozen.
pub fn predict_step(chi: &AugmentedState, torque: f64, dt: f64, params: &VehicleParams) -> ModelStep {
    let u = chi.u();
    if !(u > 0.0) {
        let (fz_front, fz_rear) = vertical_loads(0.0, params);
        return ModelStep { next: *chi, u_dot: 0.0, fz_front, fz_rear };
    }
    let theta = chi.theta();
    let r = params.radius;
    let kappa_f = (chi.omega_f() * r - u) / u;
    let kappa_r = (chi.omega_r() * r - u) / u;
    let mu_f = friction(kappa_f, &theta);
    let mu_r = friction(kappa_r, &theta);

    let u_dot = quasi_static_accel(mu_f, mu_r, params);
    let (fz_front, fz_rear) = vertical_loads(u_dot, params);
    let (fz_front, fz_rear) = (fz_front.max(0.0), fz_rear.max(0.0));

    let wf_dot = (torque - r * mu_f * 0.5 * fz_front) / params.i_w;
    let wr_dot = (-r * mu_r * 0.5 * fz_rear) / params.i_w;

    let mut next = *chi;
    next[0] = (u + dt * u_dot).max(0.0);
    next[1] = (chi.omega_f() + dt * wf_dot).max(0.0);
    next[2] = (chi.omega_r() + dt * wr_dot).max(0.0);
    ModelStep { next, u_dot, fz_front, fz_rear }
}

/// Advances `[U, ω_f, ω_r]` one step; see [`predict_step`].
pub fn predict_state(chi: &AugmentedState, torque: f64, dt: f64, params: &VehicleParams) -> AugmentedState {
    predict_step(chi, torque, dt, params).next
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_rolling_unchanged() {
        let p = VehicleParams::default();
        let chi = AugmentedState::new(20.0, 20.0 / p.radius, 20.0 / p.radius, MagicParams::DRY);
        let next = predict_state(&chi, 0.0, 1e-3, &p);
        assert_eq!(next, chi);
    }

    #[test]
    fn stopped_vehicle_is_frozen() {
        let p = VehicleParams::default();
        let chi = AugmentedState::new(0.0, 3.0, 3.0, MagicParams::WET);
        assert_eq!(predict_state(&chi, -2000.0, 1e-3, &p), chi);
    }

    #[test]
    fn static_loads_split_by_axle_distance() {
        let p = VehicleParams::default();
        let (f, r) = vertical_loads(0.0, &p);
        assert!((f + r - p.weight()).abs() < 1e-9);
        assert!((f - p.weight() * 1.575 / 3.03).abs() < 1e-9);
        let (fb, _) = vertical_loads(-5.0, &p);
        assert!(fb > f);
    }

    #[test]
    fn quasi_static_accel_is_self_consistent() {
        let p = VehicleParams::default();
        let (mu_f, mu_r) = (-1.1, -0.05);
        let a = quasi_static_accel(mu_f, mu_r, &p);
        let (f, r) = vertical_loads(a, &p);
        assert!(((mu_f * f + mu_r * r) / p.mass - a).abs() < 1e-10);
    }
}

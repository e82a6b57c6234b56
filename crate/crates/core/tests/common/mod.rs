//! Hand-written reference computations shared by the integration tests.

#![allow(dead_code)]

use abs_lab::plant::VehicleParams;

pub const G: f64 = 9.81;

pub fn mf(kappa: f64, b: f64, c: f64, d: f64, e: f64) -> f64 {
    let x = b * kappa;
    d * (c * (x - e * (x - x.atan())).atan()).sin()
}

/// Front axle load for body acceleration `a` from a moment balance about
/// the rear contact patch.
pub fn front_load(a: f64, p: &VehicleParams) -> f64 {
    let l = p.a + p.b.abs();
    let h = p.z_g.abs();
    (p.mass * G * p.b.abs() - p.mass * a * h) / l
}

/// Body acceleration from axle frictions, by fixed-point iteration on the
/// load split instead of the closed form.
pub fn body_accel(mu_f: f64, mu_r: f64, p: &VehicleParams) -> f64 {
    let mut a = 0.0;
    for _ in 0..200 {
        let ff = front_load(a, p);
        let fr = p.mass * G - ff;
        a = (mu_f * ff + mu_r * fr) / p.mass;
    }
    a
}

/// One explicit Euler step of `[U, ω_f, ω_r]` with per-wheel front torque.
pub fn euler_step(state: [f64; 3], theta: [f64; 4], torque: f64, dt: f64, p: &VehicleParams) -> ([f64; 3], f64) {
    let [u, wf, wr] = state;
    let [b, c, d, e] = theta;
    let r = p.radius;
    let mu_f = mf((wf * r - u) / u, b, c, d, e);
    let mu_r = mf((wr * r - u) / u, b, c, d, e);
    let a = body_accel(mu_f, mu_r, p);
    let ff = front_load(a, p);
    let fr = p.mass * G - ff;
    let wf_dot = (torque - r * mu_f * ff / 2.0) / p.i_w;
    let wr_dot = -r * mu_r * fr / 2.0 / p.i_w;
    (
        [(u + dt * a).max(0.0), (wf + dt * wf_dot).max(0.0), (wr + dt * wr_dot).max(0.0)],
        a,
    )
}

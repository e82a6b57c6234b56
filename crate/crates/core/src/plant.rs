//! Ground-truth 7-DOF longitudinal vehicle model: body surge, heave and
//! pitch on linear spring/damper corners, plus four wheel spin states.
//!
//! Frame is SAE (x forward, z down). The body reference point sits on the
//! ground plane below the centre of gravity, so longitudinal tyre forces
//! carry no pitch moment about it and `z_g < 0` places the CoG above the
//! road. Suspension coefficients are per corner; each tyre's vertical load
//! is its corner spring/damper force. Gravity acts along body z only.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{AbsError, Result};
use crate::tyre::{friction, MagicParams};

pub const GRAVITY: f64 = 9.81;

/// Body speed at which a run is considered stopped.
pub const U_STOP: f64 = 0.5;

/// Vehicle parameters (defaults: Jaguar XJ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams {
    /// Total mass (kg).
    pub mass: f64,
    /// Pitch inertia about the body reference point (kg·m²).
    pub i_yy: f64,
    /// Wheel spin inertia (kg·m²).
    pub i_w: f64,
    /// Rolling radius (m).
    pub radius: f64,
    /// Front/rear corner spring stiffness (N/m).
    pub k_f: f64,
    pub k_r: f64,
    /// Front/rear corner damping (N·s/m).
    pub c_f: f64,
    pub c_r: f64,
    /// Signed CoG-to-axle distances: `a > 0` front, `b < 0` rear (m).
    pub a: f64,
    pub b: f64,
    /// CoG offsets from the reference point (m).
    pub x_g: f64,
    pub y_g: f64,
    pub z_g: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams {
            mass: 1838.35,
            i_yy: 3983.0,
            i_w: 1.25,
            radius: 0.29,
            k_f: 20090.0,
            k_r: 22700.0,
            c_f: 2000.0,
            c_r: 2260.0,
            a: 1.455,
            b: -1.575,
            x_g: 0.0,
            y_g: 0.0,
            z_g: -0.4427,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("i_yy", self.i_yy),
            ("i_w", self.i_w),
            ("radius", self.radius),
            ("k_f", self.k_f),
            ("k_r", self.k_r),
            ("c_f", self.c_f),
            ("c_r", self.c_r),
            ("a", self.a),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(AbsError::InvalidVehicle(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.b < 0.0) {
            return Err(AbsError::InvalidVehicle(format!("b must be negative, got {}", self.b)));
        }
        if ![self.x_g, self.y_g, self.z_g].iter().all(|v| v.is_finite()) {
            return Err(AbsError::InvalidVehicle("non-finite CoG offset".into()));
        }
        Ok(())
    }

    /// Wheelbase `a + |b|`.
    pub fn wheelbase(&self) -> f64 {
        self.a + self.b.abs()
    }

    /// CoG height above the road.
    pub fn cog_height(&self) -> f64 {
        self.z_g.abs()
    }

    pub fn weight(&self) -> f64 {
        self.mass * GRAVITY
    }
}

/// Full truth state. Wheel order: front-left, front-right, rear-left, rear-right.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlantState {
    /// Longitudinal body velocity (m/s).
    pub u: f64,
    /// Vertical body velocity (m/s).
    pub w: f64,
    /// Pitch rate (rad/s).
    pub q: f64,
    /// Heave displacement (m), positive down.
    pub z: f64,
    /// Pitch angle (rad), positive nose up.
    pub phi: f64,
    /// Wheel spin speeds (rad/s).
    pub omega: [f64; 4],
}

impl PlantState {
    /// Free-rolling vehicle at `speed`, resting at static suspension equilibrium.
    pub fn rolling(speed: f64, params: &VehicleParams) -> Self {
        let (z, phi) = static_equilibrium(params);
        let spin = speed / params.radius;
        PlantState { u: speed, w: 0.0, q: 0.0, z, phi, omega: [spin; 4] }
    }

    pub fn to_array(&self) -> [f64; 9] {
        let o = self.omega;
        [self.u, self.w, self.q, self.z, self.phi, o[0], o[1], o[2], o[3]]
    }

    pub fn from_array(a: [f64; 9]) -> Self {
        PlantState { u: a[0], w: a[1], q: a[2], z: a[3], phi: a[4], omega: [a[5], a[6], a[7], a[8]] }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Mean front-axle wheel speed.
    pub fn omega_front(&self) -> f64 {
        0.5 * (self.omega[0] + self.omega[1])
    }

    pub fn omega_rear(&self) -> f64 {
        0.5 * (self.omega[2] + self.omega[3])
    }
}

/// Time derivative of [`PlantState`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantDerivative {
    pub u_dot: f64,
    pub w_dot: f64,
    pub q_dot: f64,
    pub z_dot: f64,
    pub phi_dot: f64,
    pub omega_dot: [f64; 4],
}

impl PlantDerivative {
    pub fn to_array(&self) -> [f64; 9] {
        let o = self.omega_dot;
        [self.u_dot, self.w_dot, self.q_dot, self.z_dot, self.phi_dot, o[0], o[1], o[2], o[3]]
    }
}

/// Brake/drive torque per wheel (N·m). Only the front pair is actuated.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WheelTorques([f64; 4]);

impl WheelTorques {
    /// Front torques `t1`, `t2`; rear torques are fixed at zero.
    pub fn front(t1: f64, t2: f64) -> Self {
        WheelTorques([t1, t2, 0.0, 0.0])
    }

    /// Equal torque on both front wheels.
    pub fn symmetric(t: f64) -> Self {
        Self::front(t, t)
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.0
    }
}

/// Per-wheel tyre quantities at a given state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TyreForces {
    pub kappa: [f64; 4],
    pub mu: [f64; 4],
    /// Vertical load (N), never negative.
    pub fz: [f64; 4],
    /// Longitudinal force (N), negative under braking.
    pub fx: [f64; 4],
}

/// Front and rear corner suspension forces (compression positive).
pub fn suspension_forces(state: &PlantState, params: &VehicleParams) -> (f64, f64) {
    let a = params.a.abs();
    let b = params.b.abs();
    let f = params.k_f * (state.z - a * state.phi) + params.c_f * (state.w - a * state.q);
    let r = params.k_r * (state.z + b * state.phi) + params.c_r * (state.w + b * state.q);
    (f, r)
}

/// Slip, friction and forces at every wheel.
pub fn tyre_forces(state: &PlantState, params: &VehicleParams, road: &MagicParams) -> Result<TyreForces> {
    if !(state.u > 0.0) {
        return Err(AbsError::NonPositiveSpeed(state.u));
    }
    let (sf, sr) = suspension_forces(state, params);
    let mut out = TyreForces::default();
    for j in 0..4 {
        let load = if j < 2 { sf } else { sr };
        let kappa = (state.omega[j] * params.radius - state.u) / state.u;
        let mu = friction(kappa, road);
        let fz = load.max(0.0);
        out.kappa[j] = kappa;
        out.mu[j] = mu;
        out.fz[j] = fz;
        out.fx[j] = mu * fz;
    }
    Ok(out)
}

/// Time derivatives of all seven degrees of freedom.
///
/// Surge, heave and pitch accelerations are coupled through the CoG offset
/// and solved together as one 3×3 linear system. Axes stay aligned with
/// the road, so `W` is the heave rate and no transport terms (`W·q`,
/// `U·q`) appear.
pub fn plant_derivatives(
    state: &PlantState,
    torques: &WheelTorques,
    params: &VehicleParams,
    road: &MagicParams,
) -> Result<PlantDerivative> {
    let tyres = tyre_forces(state, params, road)?;
    let (sf, sr) = suspension_forces(state, params);
    let m = params.mass;
    let (xg, zg) = (params.x_g, params.z_g);
    let q = state.q;

    let sum_fx: f64 = tyres.fx.iter().sum();
    // Suspension pushes the body up (negative z); gravity pulls it down.
    let sum_fz = m * GRAVITY - 2.0 * (sf + sr);
    let sum_my = 2.0 * params.a * sf + 2.0 * params.b * sr - xg * m * GRAVITY;

    let mass_matrix = Matrix3::new(
        m, 0.0, m * zg, //
        0.0, m, -m * xg, //
        m * zg, -m * xg, params.i_yy,
    );
    let rhs = Vector3::new(
        sum_fx + m * xg * q * q,
        sum_fz + m * zg * q * q,
        sum_my,
    );
    let det = mass_matrix.determinant();
    let scale = m * m * params.i_yy;
    if !(det.abs() > 1e-9 * scale) {
        return Err(AbsError::SingularMassMatrix(det));
    }
    let acc = mass_matrix
        .lu()
        .solve(&rhs)
        .ok_or(AbsError::SingularMassMatrix(det))?;

    let t = torques.as_array();
    let mut omega_dot = [0.0; 4];
    for j in 0..4 {
        let mut wd = (t[j] - params.radius * tyres.fx[j]) / params.i_w;
        // wheels do not spin backwards under braking
        if state.omega[j] <= 0.0 && wd < 0.0 {
            wd = 0.0;
        }
        omega_dot[j] = wd;
    }

    Ok(PlantDerivative {
        u_dot: acc[0],
        w_dot: acc[1],
        q_dot: acc[2],
        z_dot: state.w,
        phi_dot: q,
        omega_dot,
    })
}

fn axpy(state: &PlantState, h: f64, d: &PlantDerivative) -> PlantState {
    let mut s = state.to_array();
    for (x, dx) in s.iter_mut().zip(d.to_array()) {
        *x += h * dx;
    }
    PlantState::from_array(s)
}

/// Advances the plant one fixed RK4 step of length `dt`.
///
/// Wheel speeds are floored at zero after the step.
pub fn step(
    state: &PlantState,
    torques: &WheelTorques,
    params: &VehicleParams,
    road: &MagicParams,
    dt: f64,
) -> Result<PlantState> {
    if !(dt > 0.0) {
        return Err(AbsError::Config(format!("step size must be positive, got {dt}")));
    }
    let k1 = plant_derivatives(state, torques, params, road)?;
    let k2 = plant_derivatives(&axpy(state, 0.5 * dt, &k1), torques, params, road)?;
    let k3 = plant_derivatives(&axpy(state, 0.5 * dt, &k2), torques, params, road)?;
    let k4 = plant_derivatives(&axpy(state, dt, &k3), torques, params, road)?;

    let mut next = state.to_array();
    let (a1, a2, a3, a4) = (k1.to_array(), k2.to_array(), k3.to_array(), k4.to_array());
    for i in 0..9 {
        next[i] += dt / 6.0 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i]);
    }
    let mut next = PlantState::from_array(next);
    for w in next.omega.iter_mut() {
        *w = w.max(0.0);
    }
    if !next.is_finite() {
        return Err(AbsError::NonFiniteState {
            t: f64::NAN,
            state: format!("{:?} -> {:?}", state, next),
        });
    }
    Ok(next)
}

/// Heave and pitch at which the corner springs carry the vehicle weight
/// with zero net pitch moment and no tyre forces.
pub fn static_equilibrium(params: &VehicleParams) -> (f64, f64) {
    let a = params.a.abs();
    let b = params.b.abs();
    let (kf, kr) = (params.k_f, params.k_r);
    let mg = params.weight();
    // 2kf(z − aφ) + 2kr(z + bφ) = mg
    // 2a·kf(z − aφ) − 2b·kr(z + bφ) = x_g·mg
    let m = nalgebra::Matrix2::new(
        2.0 * (kf + kr),
        2.0 * (kr * b - kf * a),
        2.0 * (a * kf - b * kr),
        -2.0 * (a * a * kf + b * b * kr),
    );
    let rhs = nalgebra::Vector2::new(mg, params.x_g * mg);
    let sol = m.lu().solve(&rhs).expect("suspension stiffness matrix is non-singular");
    (sol[0], sol[1])
}

/// True when a wheel is stationary while the body still moves.
pub fn lock_event(state: &PlantState) -> bool {
    state.u > U_STOP && state.omega.iter().any(|&w| w <= 0.0)
}

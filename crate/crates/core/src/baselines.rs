//! Extremum-seeking comparison controllers.
//!
//! Both baselines see only low-pass filtered `[U, ω_f, ω_r]` readings. They
//! search for the slip setpoint that maximizes the brake torque the front
//! wheels can sustain, and an inner proportional loop (gain `c`) turns the
//! slip setpoint into a torque command via the wheel-speed error.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::estimation_model::Measurement;

/// First-order IIR low-pass with unity DC gain.
///
/// The coefficient matches the continuous time constant exactly, so a unit
/// step reaches `1 − e⁻¹` after `1 / (2π·cutoff)` seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowPass {
    alpha: f64,
    state: Option<f64>,
}

impl LowPass {
    pub fn new(cutoff_hz: f64, dt: f64) -> Self {
        assert!(cutoff_hz > 0.0 && dt > 0.0, "cutoff and dt must be positive");
        LowPass { alpha: 1.0 - (-2.0 * PI * cutoff_hz * dt).exp(), state: None }
    }

    /// Starts from a known output instead of the first sample.
    pub fn with_initial(mut self, y0: f64) -> Self {
        self.state = Some(y0);
        self
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn value(&self) -> Option<f64> {
        self.state
    }

    pub fn update(&mut self, x: f64) -> f64 {
        let y = match self.state {
            None => x,
            Some(prev) => prev + self.alpha * (x - prev),
        };
        self.state = Some(y);
        y
    }

    /// Gain of the discrete filter at `freq_hz` for sampling period `dt`.
    pub fn magnitude(&self, freq_hz: f64, dt: f64) -> f64 {
        let w = 2.0 * PI * freq_hz * dt;
        let (re, im) = (1.0 - (1.0 - self.alpha) * w.cos(), (1.0 - self.alpha) * w.sin());
        self.alpha / (re * re + im * im).sqrt()
    }
}

/// Gain of the continuous first-order prototype `1 / (1 + s/ωc)`.
pub fn analog_magnitude(cutoff_hz: f64, freq_hz: f64) -> f64 {
    1.0 / (1.0 + (freq_hz / cutoff_hz).powi(2)).sqrt()
}

pub fn to_db(gain: f64) -> f64 {
    20.0 * gain.log10()
}

/// Settings shared by both baselines' measurement path and inner loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InnerLoop {
    /// Proportional gain on wheel-speed error (N·m per rad/s).
    pub c: f64,
    pub dt: f64,
    pub body_cutoff_hz: f64,
    pub wheel_cutoff_hz: f64,
    pub torque_min: f64,
    pub torque_max: f64,
    pub radius: f64,
    /// Below this filtered speed the smoothed recent torque is held.
    pub hold_speed: f64,
    /// Cutoff of the torque smoother that supplies the held value.
    pub hold_cutoff_hz: f64,
}

impl Default for InnerLoop {
    fn default() -> Self {
        InnerLoop {
            c: 500.0,
            dt: 1e-3,
            body_cutoff_hz: 20.0,
            wheel_cutoff_hz: 100.0,
            torque_min: -4000.0,
            torque_max: 0.0,
            radius: 0.29,
            hold_speed: 1.5,
            hold_cutoff_hz: 5.0,
        }
    }
}

/// Filtered readings available to a baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Filtered {
    pub u: f64,
    pub omega_f: f64,
    pub omega_r: f64,
}

impl Filtered {
    /// Front slip magnitude (positive under braking).
    pub fn slip(&self, radius: f64) -> f64 {
        if self.u > 0.0 {
            (self.u - self.omega_f * radius) / self.u
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone)]
struct SensorFilters {
    u: LowPass,
    omega_f: LowPass,
    omega_r: LowPass,
}

/// Latches a smoothed torque once the body slows below the hold speed.
#[derive(Debug, Clone)]
struct TorqueHold {
    smoother: LowPass,
    held: Option<f64>,
}

impl TorqueHold {
    fn new(cfg: &InnerLoop) -> Self {
        TorqueHold { smoother: LowPass::new(cfg.hold_cutoff_hz, cfg.dt), held: None }
    }

    fn record(&mut self, torque: f64) {
        self.smoother.update(torque);
    }

    /// The held torque, or `None` while still above the hold speed.
    fn check(&mut self, u: f64, hold_speed: f64) -> Option<f64> {
        if self.held.is_none() && u < hold_speed {
            self.held = Some(self.smoother.value().unwrap_or(0.0));
        }
        self.held
    }
}

impl SensorFilters {
    fn new(cfg: &InnerLoop) -> Self {
        SensorFilters {
            u: LowPass::new(cfg.body_cutoff_hz, cfg.dt),
            omega_f: LowPass::new(cfg.wheel_cutoff_hz, cfg.dt),
            omega_r: LowPass::new(cfg.wheel_cutoff_hz, cfg.dt),
        }
    }

    fn update(&mut self, y: &Measurement) -> Filtered {
        Filtered { u: self.u.update(y.0[0]), omega_f: self.omega_f.update(y.0[1]), omega_r: self.omega_r.update(y.0[2]) }
    }
}

impl InnerLoop {
    /// Proportional wheel-speed controller tracking slip magnitude `slip_ref`.
    pub fn torque_for(&self, slip_ref: f64, f: &Filtered) -> f64 {
        let omega_ref = f.u * (1.0 - slip_ref) / self.radius;
        (-self.c * (f.omega_f - omega_ref)).clamp(self.torque_min, self.torque_max)
    }
}

/// Sine-perturbation extremum seeking on the slip setpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CspConfig {
    pub inner: InnerLoop,
    /// Dither amplitude on the slip setpoint.
    pub amplitude: f64,
    pub frequency_hz: f64,
    /// Integrator gain on the demodulated gradient.
    pub gain: f64,
    /// Cutoff of the washout (high-pass) on the performance signal.
    pub washout_hz: f64,
    pub initial_setpoint: f64,
    pub setpoint_bounds: (f64, f64),
}

impl Default for CspConfig {
    fn default() -> Self {
        CspConfig {
            inner: InnerLoop::default(),
            amplitude: 0.02,
            frequency_hz: 10.0,
            gain: 0.5,
            washout_hz: 2.0,
            initial_setpoint: 0.05,
            setpoint_bounds: (0.02, 0.5),
        }
    }
}

/// Per-step internals exposed for traces and tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineOutput {
    pub torque: f64,
    pub slip_ref: f64,
    pub filtered: Filtered,
}

#[derive(Debug, Clone)]
pub struct CspController {
    config: CspConfig,
    filters: SensorFilters,
    hold: TorqueHold,
    washout: LowPass,
    setpoint: f64,
    torque: f64,
    t: f64,
}

impl CspController {
    pub fn new(config: CspConfig) -> Self {
        CspController {
            filters: SensorFilters::new(&config.inner),
            hold: TorqueHold::new(&config.inner),
            washout: LowPass::new(config.washout_hz, config.inner.dt),
            setpoint: config.initial_setpoint,
            torque: 0.0,
            t: 0.0,
            config,
        }
    }

    pub fn setpoint(&self) -> f64 {
        self.setpoint
    }

    /// Moves the setpoint along the demodulated gradient `grad · dither`.
    /// A zero gradient or zero dither leaves it unchanged.
    pub fn adapt(&mut self, grad: f64, dither: f64) {
        let (lo, hi) = self.config.setpoint_bounds;
        self.setpoint = (self.setpoint + self.config.gain * grad * dither * self.config.inner.dt).clamp(lo, hi);
    }

    /// One control period: filter, adapt the setpoint, run the inner loop.
    pub fn step(&mut self, y: &Measurement) -> BaselineOutput {
        let cfg = self.config;
        let f = self.filters.update(y);
        let phase = 2.0 * PI * cfg.frequency_hz * self.t;
        self.t += cfg.inner.dt;

        if let Some(torque) = self.hold.check(f.u, cfg.inner.hold_speed) {
            self.torque = torque;
            return BaselineOutput { torque, slip_ref: self.setpoint, filtered: f };
        }
        // performance: sustained brake torque magnitude
        let perf = -self.torque;
        let hp = perf - self.washout.update(perf);
        self.adapt(hp, cfg.amplitude * phase.sin());

        let slip_ref = self.setpoint + cfg.amplitude * phase.sin();
        self.torque = cfg.inner.torque_for(slip_ref, &f);
        self.hold.record(self.torque);
        BaselineOutput { torque: self.torque, slip_ref, filtered: f }
    }
}

/// Bracketing search for the optimal slip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BisectionConfig {
    pub inner: InnerLoop,
    /// Initial bracket on slip magnitude.
    pub a: f64,
    pub b: f64,
    /// Stop refining once the bracket is this narrow.
    pub tolerance: f64,
    /// Half-spacing of the two probes around a test point.
    pub probe_offset: f64,
    /// Time to let the wheel settle at each probe before averaging (s).
    pub settle_time: f64,
    /// Averaging window per probe (s).
    pub average_time: f64,
}

impl Default for BisectionConfig {
    fn default() -> Self {
        BisectionConfig {
            inner: InnerLoop::default(),
            a: 0.1,
            b: 0.2,
            tolerance: 0.001,
            probe_offset: 0.01,
            settle_time: 0.015,
            average_time: 0.015,
        }
    }
}

/// Where a bisection search currently stands.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Stage {
    /// Checking the sign of the criterion at the lower, then upper, bracket end.
    CheckLower,
    CheckUpper { lower_sign: f64 },
    Bisect,
    Converged,
}

#[derive(Debug, Clone)]
pub struct BisectionController {
    config: BisectionConfig,
    filters: SensorFilters,
    hold: TorqueHold,
    lo: f64,
    hi: f64,
    stage: Stage,
    /// Test point, probe side (−1 or +1), time spent and accumulated performance.
    probe_centre: f64,
    probe_side: f64,
    probe_elapsed: f64,
    probe_sum: f64,
    probe_count: usize,
    low_side_perf: f64,
    torque: f64,
    halvings: usize,
    unbracketed: usize,
}

impl BisectionController {
    pub fn new(config: BisectionConfig) -> Self {
        assert!(config.a < config.b && config.tolerance > 0.0, "invalid bisection bracket");
        BisectionController {
            filters: SensorFilters::new(&config.inner),
            hold: TorqueHold::new(&config.inner),
            lo: config.a,
            hi: config.b,
            stage: Stage::CheckLower,
            probe_centre: config.a,
            probe_side: -1.0,
            probe_elapsed: 0.0,
            probe_sum: 0.0,
            probe_count: 0,
            low_side_perf: 0.0,
            torque: 0.0,
            halvings: 0,
            unbracketed: 0,
            config,
        }
    }

    pub fn bracket(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn halvings(&self) -> usize {
        self.halvings
    }

    pub fn is_converged(&self) -> bool {
        self.stage == Stage::Converged
    }

    /// Times the end-point criterion had the same sign at both ends.
    pub fn unbracketed_events(&self) -> usize {
        self.unbracketed
    }

    /// Halves the bracket given the criterion sign at its midpoint
    /// (positive: performance still rising, the optimum lies above).
    pub fn halve(&mut self, midpoint_sign: f64) {
        if self.stage == Stage::Converged {
            return;
        }
        let mid = 0.5 * (self.lo + self.hi);
        if midpoint_sign > 0.0 {
            self.lo = mid;
        } else {
            self.hi = mid;
        }
        self.halvings += 1;
        if self.width() <= self.config.tolerance {
            self.stage = Stage::Converged;
        }
    }

    /// Records the end-point criterion signs; identical signs leave the
    /// bracket as it is.
    fn check_ends(&mut self, lower_sign: f64, upper_sign: f64) {
        if lower_sign == upper_sign {
            self.unbracketed += 1;
        }
        self.stage = Stage::Bisect;
    }

    fn next_test_point(&self) -> f64 {
        match self.stage {
            Stage::CheckLower => self.lo,
            Stage::CheckUpper { .. } => self.hi,
            Stage::Bisect | Stage::Converged => 0.5 * (self.lo + self.hi),
        }
    }

    fn start_probe(&mut self) {
        self.probe_centre = self.next_test_point();
        self.probe_side = -1.0;
        self.probe_elapsed = 0.0;
        self.probe_sum = 0.0;
        self.probe_count = 0;
    }

    /// Sign of the performance change across a finished probe pair.
    fn conclude(&mut self, sign: f64) {
        match self.stage {
            Stage::CheckLower => self.stage = Stage::CheckUpper { lower_sign: sign },
            Stage::CheckUpper { lower_sign } => self.check_ends(lower_sign, sign),
            Stage::Bisect => self.halve(sign),
            Stage::Converged => {}
        }
        self.start_probe();
    }

    pub fn step(&mut self, y: &Measurement) -> BaselineOutput {
        let cfg = self.config;
        let f = self.filters.update(y);
        if let Some(torque) = self.hold.check(f.u, cfg.inner.hold_speed) {
            self.torque = torque;
            return BaselineOutput { torque, slip_ref: self.probe_centre, filtered: f };
        }
        let slip_ref = if self.stage == Stage::Converged {
            0.5 * (self.lo + self.hi)
        } else {
            let dt = cfg.inner.dt;
            self.probe_elapsed += dt;
            if self.probe_elapsed > cfg.settle_time {
                self.probe_sum += -self.torque;
                self.probe_count += 1;
            }
            if self.probe_elapsed >= cfg.settle_time + cfg.average_time - 1e-12 {
                let mean = self.probe_sum / self.probe_count.max(1) as f64;
                if self.probe_side < 0.0 {
                    self.low_side_perf = mean;
                    self.probe_side = 1.0;
                    self.probe_elapsed = 0.0;
                    self.probe_sum = 0.0;
                    self.probe_count = 0;
                } else {
                    let sign = if mean > self.low_side_perf { 1.0 } else { -1.0 };
                    self.conclude(sign);
                }
            }
            if self.stage == Stage::Converged {
                0.5 * (self.lo + self.hi)
            } else {
                (self.probe_centre + self.probe_side * cfg.probe_offset).max(0.0)
            }
        };
        self.torque = cfg.inner.torque_for(slip_ref, &f);
        self.hold.record(self.torque);
        BaselineOutput { torque: self.torque, slip_ref, filtered: f }
    }
}

//! Closed-loop runs: sensors, estimator, controller and plant wired at a
//! fixed control period, plus traces, metrics and parallel sweeps.

mod config;
mod metrics;
mod trace;

pub use config::*;
pub use metrics::*;
pub use trace::*;

use std::time::{Duration, Instant};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::baselines::{BisectionController, CspController};
use crate::dcee::DceeController;
use crate::error::{AbsError, Result};
use crate::estimator::{FilterConfig, RegularizedParticleFilter, SensorNoise};
use crate::estimation_model::Measurement;
use crate::plant::{self, PlantState, WheelTorques, U_STOP};
use crate::tyre::friction;

/// Independent random streams derived from one scenario seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Sensor = 1,
    Filter = 2,
    Controller = 3,
}

/// Seed for one named stream of a scenario.
pub fn derive_seed(seed: u64, stream: Stream) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng.next_u64()
}

/// Additive Gaussian measurement noise on `[U, ω_f, ω_r]`.
#[derive(Debug, Clone)]
pub struct SensorModel {
    std: [f64; 3],
    rng: ChaCha8Rng,
}

impl SensorModel {
    pub fn new(noise: &SensorNoise, seed: u64) -> Self {
        SensorModel { std: noise.std_devs(), rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, Stream::Sensor)) }
    }

    /// Next noise draw, in the order it would be added to a measurement.
    pub fn draw(&mut self) -> [f64; 3] {
        let z: [f64; 3] = std::array::from_fn(|_| self.rng.sample(StandardNormal));
        std::array::from_fn(|i| self.std[i] * z[i])
    }

    pub fn measure(&mut self, truth: [f64; 3]) -> Measurement {
        let v = self.draw();
        Measurement(std::array::from_fn(|i| truth[i] + v[i]))
    }
}

enum Controller {
    Dcee {
        ctrl: DceeController,
        filter: Option<RegularizedParticleFilter>,
        p_last: Option<f64>,
        filter_seed: u64,
    },
    Csp(CspController),
    Bisection(BisectionController),
}

/// Estimator-side columns of a trace row.
struct StepOutput {
    torque: f64,
    est: [f64; 3],
    theta: [f64; 4],
    d_range: (f64, f64),
    j: f64,
    p: f64,
    n_eff: f64,
    resampled: bool,
    retro: bool,
}

impl StepOutput {
    fn baseline(torque: f64, filtered: [f64; 3]) -> Self {
        StepOutput {
            torque,
            est: filtered,
            theta: [f64::NAN; 4],
            d_range: (f64::NAN, f64::NAN),
            j: f64::NAN,
            p: f64::NAN,
            n_eff: f64::NAN,
            resampled: false,
            retro: false,
        }
    }
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Stopped,
    Timeout,
}

/// A single closed-loop run, advanced one control period at a time.
pub struct Simulation {
    config: ScenarioConfig,
    state: PlantState,
    sensor: SensorModel,
    controller: Controller,
    torque: f64,
    step: usize,
    distance: f64,
    trace: Trace,
    time_to_hold: Option<f64>,
    finished: Option<(Termination, RunMetrics)>,
}

impl Simulation {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let controller = match config.controller {
            ControllerKind::Dcee => Controller::Dcee {
                ctrl: DceeController::new(config.dcee.clone(), derive_seed(config.seed, Stream::Controller))?,
                filter: None,
                p_last: None,
                filter_seed: derive_seed(config.seed, Stream::Filter),
            },
            ControllerKind::Csp => Controller::Csp(CspController::new(config.csp)),
            ControllerKind::Bisection => Controller::Bisection(BisectionController::new(config.bisection)),
        };
        Ok(Simulation {
            state: PlantState::rolling(config.initial_speed, &config.vehicle),
            sensor: SensorModel::new(&config.sensor, config.seed),
            controller,
            torque: 0.0,
            step: 0,
            distance: 0.0,
            trace: Trace::default(),
            time_to_hold: None,
            finished: None,
            config,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn state(&self) -> &PlantState {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.config.dt
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn into_trace(self) -> Trace {
        self.trace
    }

    pub fn is_finished(&self) -> bool {
        self.finished.is_some()
    }

    /// Filter of a DCEE run, once initialized.
    pub fn filter(&self) -> Option<&RegularizedParticleFilter> {
        match &self.controller {
            Controller::Dcee { filter, .. } => filter.as_ref(),
            _ => None,
        }
    }

    /// Sense, estimate, act and integrate for one control period.
    /// Returns the termination once the run is over.
    pub fn advance(&mut self) -> Result<Option<Termination>> {
        if let Some((term, _)) = self.finished {
            return Ok(Some(term));
        }
        let t = self.time();
        let truth = [self.state.u, self.state.omega_front(), self.state.omega_rear()];
        let y = self.sensor.measure(truth);
        let out = self.control(&y).map_err(|e| with_time(e, t))?;
        let cfg = &self.config;

        let road = cfg.road.at(t);
        let kappa_f = (truth[1] * cfg.vehicle.radius - truth[0]) / truth[0];
        self.trace.rows.push(TraceRow {
            t,
            truth,
            meas: y.0,
            est: out.est,
            theta_est: out.theta,
            d_min: out.d_range.0,
            d_max: out.d_range.1,
            kappa_f,
            mu_f_true: friction(kappa_f, &road),
            torque: out.torque,
            j: out.j,
            p_pred: out.p,
            n_eff: out.n_eff,
            resampled: out.resampled,
            retro: out.retro,
            lock: plant::lock_event(&self.state),
            d_true: road.d,
        });

        self.torque = out.torque;
        let torques = WheelTorques::front(out.torque, out.torque);
        let h = cfg.dt / cfg.plant_substeps as f64;
        let prev = self.state;
        let mut s = self.state;
        for j in 0..cfg.plant_substeps {
            let tj = t + j as f64 * h;
            s = plant::step(&s, &torques, &cfg.vehicle, &cfg.road.at(tj), h).map_err(|e| with_time(e, tj))?;
        }
        self.state = s;
        self.step += 1;
        let t_next = self.time();

        if self.time_to_hold.is_none() && s.u < cfg.dcee.hold_speed {
            self.time_to_hold = Some(interpolate_crossing(t, prev.u, t_next, s.u, cfg.dcee.hold_speed));
        }

        if s.u <= U_STOP {
            // crossing of the stop speed, then constant-deceleration extrapolation to rest
            let frac = (prev.u - U_STOP) / (prev.u - s.u);
            let t_cross = t + frac * cfg.dt;
            let d_cross = self.distance + frac * cfg.dt * 0.5 * (prev.u + U_STOP);
            let decel = (prev.u - s.u) / cfg.dt;
            let m = RunMetrics {
                stopping_time: t_cross + U_STOP / decel,
                stopping_distance: d_cross + U_STOP * U_STOP / (2.0 * decel),
                stopped: true,
                ..Default::default()
            };
            self.finish(Termination::Stopped, m);
            return Ok(Some(Termination::Stopped));
        }
        self.distance += 0.5 * (prev.u + s.u) * cfg.dt;

        if t_next >= cfg.timeout - 1e-12 {
            let m = RunMetrics {
                stopping_time: t_next,
                stopping_distance: self.distance,
                timed_out: true,
                ..Default::default()
            };
            self.finish(Termination::Timeout, m);
            return Ok(Some(Termination::Timeout));
        }
        Ok(None)
    }

    fn finish(&mut self, term: Termination, mut m: RunMetrics) {
        m.time_to_hold_speed = self.time_to_hold.unwrap_or(f64::NAN);
        let last_switch = self.config.road.segments().last().map_or(0.0, |s| s.0);
        let scoring = Scoring { trace: &self.trace, hold_speed: self.config.dcee.hold_speed, last_switch };
        self.finished = Some((term, scoring.score(m)));
    }

    /// Final metrics, available once the run has terminated.
    pub fn metrics(&self) -> Option<RunMetrics> {
        self.finished.map(|f| f.1)
    }

    fn control(&mut self, y: &Measurement) -> Result<StepOutput> {
        let cfg = &self.config;
        match &mut self.controller {
            Controller::Dcee { ctrl, filter, p_last, filter_seed } => {
                let (n_eff, resampled, retro) = match filter {
                    None => {
                        let fc = FilterConfig {
                            n_particles: cfg.n_particles,
                            noise: cfg.sensor,
                            scheme: cfg.resampling,
                            retrogressive: cfg.retrogressive,
                            process_std: cfg.process_std,
                        };
                        *filter = Some(RegularizedParticleFilter::new(y, fc, cfg.vehicle, *filter_seed)?);
                        (cfg.n_particles as f64, false, false)
                    }
                    Some(f) => {
                        let r = f.update(self.torque, y, cfg.dt, *p_last)?;
                        (r.n_eff, r.resample.resampled, r.retrogressive)
                    }
                };
                let f = filter.as_mut().expect("initialized above");
                let d = ctrl.select_action(f.ensemble(), self.torque, f.last_u_dot(), cfg.dt, &cfg.vehicle);
                f.set_p0(d.p_max);
                *p_last = Some(d.p_max);
                let ens = f.ensemble();
                let mean = ens.posterior_mean();
                let th = mean.theta();
                Ok(StepOutput {
                    torque: d.torque,
                    est: mean.states(),
                    theta: [th.b, th.c, th.d, th.e],
                    d_range: ens.component_range(5),
                    j: d.j_min,
                    p: d.p_max,
                    n_eff,
                    resampled,
                    retro,
                })
            }
            Controller::Csp(c) => {
                let o = c.step(y);
                Ok(StepOutput::baseline(o.torque, [o.filtered.u, o.filtered.omega_f, o.filtered.omega_r]))
            }
            Controller::Bisection(c) => {
                let o = c.step(y);
                Ok(StepOutput::baseline(o.torque, [o.filtered.u, o.filtered.omega_f, o.filtered.omega_r]))
            }
        }
    }
}

fn interpolate_crossing(t0: f64, u0: f64, t1: f64, u1: f64, level: f64) -> f64 {
    if u0 <= level {
        return t0;
    }
    t0 + (u0 - level) / (u0 - u1) * (t1 - t0)
}

fn with_time(e: AbsError, t: f64) -> AbsError {
    match e {
        AbsError::NonFiniteState { state, .. } => AbsError::NonFiniteState { t, state },
        AbsError::NonFiniteEstimate { .. } => AbsError::NonFiniteEstimate { t },
        other => other,
    }
}

/// A completed run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: ScenarioConfig,
    pub metrics: RunMetrics,
    pub trace: Trace,
    pub termination: Termination,
    pub wall_time: Duration,
}

impl RunOutput {
    pub fn metrics_row(&self) -> MetricsRow {
        let status = match self.termination {
            Termination::Stopped => "stopped",
            Termination::Timeout => "timeout",
        };
        MetricsRow::new(&self.config, self.metrics, status)
    }
}

/// An aborted run with everything recorded before the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub config: ScenarioConfig,
    pub error: AbsError,
    pub trace: Trace,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "run `{}` aborted after {} steps: {}", self.config.name, self.trace.len(), self.error)
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl RunFailure {
    pub fn metrics_row(&self) -> MetricsRow {
        let m = RunMetrics { steps: self.trace.len(), ..Default::default() };
        MetricsRow::new(&self.config, m, "aborted")
    }
}

/// Runs one scenario to a stop or timeout.
pub fn run(config: &ScenarioConfig) -> std::result::Result<RunOutput, RunFailure> {
    let start = Instant::now();
    let mut sim = match Simulation::new(config.clone()) {
        Ok(s) => s,
        Err(error) => return Err(RunFailure { config: config.clone(), error, trace: Trace::default() }),
    };
    loop {
        match sim.advance() {
            Ok(Some(termination)) => {
                let metrics = sim.metrics().expect("finished run has metrics");
                return Ok(RunOutput {
                    config: config.clone(),
                    metrics,
                    trace: sim.into_trace(),
                    termination,
                    wall_time: start.elapsed(),
                });
            }
            Ok(None) => {}
            Err(error) => return Err(RunFailure { config: config.clone(), error, trace: sim.into_trace() }),
        }
    }
}

pub type RunResult = std::result::Result<RunOutput, RunFailure>;

/// Runs every config on the rayon pool; results keep input order.
pub fn sweep(configs: &[ScenarioConfig]) -> Vec<RunResult> {
    configs.par_iter().map(run).collect()
}

/// [`sweep`] on a dedicated pool of `threads` workers.
pub fn sweep_with_threads(configs: &[ScenarioConfig], threads: usize) -> Result<Vec<RunResult>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| AbsError::Config(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(|| sweep(configs)))
}

/// Summary table for a set of results.
pub fn summarize(results: &[RunResult]) -> MetricsTable {
    MetricsTable {
        rows: results
            .iter()
            .map(|r| match r {
                Ok(o) => o.metrics_row(),
                Err(f) => f.metrics_row(),
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tyre::Surface;

    #[test]
    fn streams_are_distinct() {
        let s: Vec<u64> = [Stream::Sensor, Stream::Filter, Stream::Controller].map(|k| derive_seed(5, k)).to_vec();
        assert!(s[0] != s[1] && s[1] != s[2] && s[0] != s[2]);
        assert_eq!(derive_seed(5, Stream::Sensor), s[0]);
    }

    #[test]
    fn sensor_noise_matches_stream() {
        let noise = SensorNoise::default();
        let mut a = SensorModel::new(&noise, 9);
        let mut b = SensorModel::new(&noise, 9);
        let y = a.measure([20.0, 60.0, 61.0]);
        let v = b.draw();
        assert_eq!(y.0, [20.0 + v[0], 60.0 + v[1], 61.0 + v[2]]);
    }

    #[test]
    fn crossing_interpolation() {
        assert!((interpolate_crossing(1.0, 2.0, 2.0, 1.0, 1.5) - 1.5).abs() < 1e-15);
        assert_eq!(interpolate_crossing(1.0, 1.0, 2.0, 0.5, 1.5), 1.0);
    }

    #[test]
    fn empty_sweep_is_empty() {
        assert!(summarize(&sweep(&[])).is_empty());
    }

    #[test]
    fn baseline_rows_have_nan_estimator_columns() {
        let mut cfg = ScenarioConfig::preset(Surface::Dry, 5.0, ControllerKind::Csp);
        cfg.timeout = 0.01;
        let out = run(&cfg).unwrap();
        assert_eq!(out.termination, Termination::Timeout);
        assert!(out.trace.rows[0].j.is_nan());
        assert_eq!(out.trace.len(), 10);
    }
}

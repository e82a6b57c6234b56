use std::io::Write;
use std::path::Path;

use super::trace::Trace;
use super::ScenarioConfig;
use crate::error::Result;

/// First control step from which state errors are scored.
pub const CONVERGENCE_STEP: usize = 13;

/// Friction tracking is scored this long after the last road change.
pub const TRACKING_SETTLE: f64 = 0.5;

/// Summary of one closed-loop run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunMetrics {
    /// Time and distance to rest, extrapolated below the stop speed.
    pub stopping_time: f64,
    pub stopping_distance: f64,
    /// Time at which the body speed first fell below the hold speed.
    pub time_to_hold_speed: f64,
    pub stopped: bool,
    pub timed_out: bool,
    pub steps: usize,
    /// Rising edges of the lock flag.
    pub lock_events: usize,
    /// Lock onsets while the body was faster than the hold speed.
    pub lock_events_high_speed: usize,
    /// Mean `| |μ_f| − D |` over the settled braking phase.
    pub mu_tracking_error: f64,
    /// Largest relative state error from step 13 while above the hold speed.
    pub state_error_max: f64,
    /// Mean relative state errors (U, ω_f, ω_r) over the same window.
    pub state_error_mean: [f64; 3],
    /// `|D̂ − D|` at the final step.
    pub d_error_final: f64,
}

/// Relative estimation error of each state at one step.
pub fn relative_state_errors(truth: &[f64; 3], est: &[f64; 3]) -> [f64; 3] {
    std::array::from_fn(|i| (est[i] - truth[i]).abs() / truth[i].abs().max(f64::EPSILON))
}

/// Per-step relative state errors for a whole trace (NaN for baselines).
pub fn estimation_errors(trace: &Trace) -> Vec<[f64; 3]> {
    trace.rows.iter().map(|r| relative_state_errors(&r.truth, &r.est)).collect()
}

pub(super) struct Scoring<'a> {
    pub trace: &'a Trace,
    pub hold_speed: f64,
    pub last_switch: f64,
}

impl Scoring<'_> {
    pub fn score(&self, mut m: RunMetrics) -> RunMetrics {
        let rows = &self.trace.rows;
        m.steps = rows.len();

        let mut prev = false;
        for r in rows {
            if r.lock && !prev {
                m.lock_events += 1;
                if r.truth[0] > self.hold_speed {
                    m.lock_events_high_speed += 1;
                }
            }
            prev = r.lock;
        }

        let tracked: Vec<f64> = rows
            .iter()
            .filter(|r| r.t >= self.last_switch + TRACKING_SETTLE && r.truth[0] > self.hold_speed)
            .map(|r| (r.mu_f_true.abs() - r.d_true).abs())
            .collect();
        m.mu_tracking_error = mean(&tracked);

        let errs: Vec<[f64; 3]> = rows
            .iter()
            .skip(CONVERGENCE_STEP)
            .filter(|r| r.truth[0] > self.hold_speed)
            .map(|r| relative_state_errors(&r.truth, &r.est))
            .collect();
        m.state_error_max = errs.iter().flatten().copied().fold(f64::NAN, f64::max);
        m.state_error_mean = std::array::from_fn(|k| mean(&errs.iter().map(|e| e[k]).collect::<Vec<_>>()));

        m.d_error_final = rows.last().map_or(f64::NAN, |r| (r.theta_est[2] - r.d_true).abs());
        m
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// One summary row: config echo plus metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub name: String,
    pub controller: String,
    pub road: String,
    pub initial_speed: f64,
    pub seed: u64,
    pub n_particles: usize,
    pub dt: f64,
    pub retrogressive: bool,
    pub status: String,
    pub metrics: RunMetrics,
}

impl MetricsRow {
    pub fn new(cfg: &ScenarioConfig, metrics: RunMetrics, status: &str) -> Self {
        MetricsRow {
            name: cfg.name.clone(),
            controller: cfg.controller.name().to_string(),
            road: cfg.road_label(),
            initial_speed: cfg.initial_speed,
            seed: cfg.seed,
            n_particles: cfg.n_particles,
            dt: cfg.dt,
            retrogressive: cfg.retrogressive,
            status: status.to_string(),
            metrics,
        }
    }
}

pub const METRICS_COLUMNS: [&str; 23] = [
    "name",
    "controller",
    "road",
    "initial_speed",
    "seed",
    "n_particles",
    "dt",
    "retrogressive",
    "status",
    "stopping_time",
    "stopping_distance",
    "time_to_hold_speed",
    "stopped",
    "timed_out",
    "steps",
    "lock_events",
    "lock_events_high_speed",
    "mu_tracking_error",
    "state_error_max",
    "state_error_mean_u",
    "state_error_mean_omega_f",
    "state_error_mean_omega_r",
    "d_error_final",
];

/// Metrics summary, one row per run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
}

impl MetricsTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(METRICS_COLUMNS)?;
        for r in &self.rows {
            let m = &r.metrics;
            w.write_record([
                r.name.clone(),
                r.controller.clone(),
                r.road.clone(),
                r.initial_speed.to_string(),
                r.seed.to_string(),
                r.n_particles.to_string(),
                r.dt.to_string(),
                r.retrogressive.to_string(),
                r.status.clone(),
                m.stopping_time.to_string(),
                m.stopping_distance.to_string(),
                m.time_to_hold_speed.to_string(),
                m.stopped.to_string(),
                m.timed_out.to_string(),
                m.steps.to_string(),
                m.lock_events.to_string(),
                m.lock_events_high_speed.to_string(),
                m.mu_tracking_error.to_string(),
                m.state_error_max.to_string(),
                m.state_error_mean[0].to_string(),
                m.state_error_mean[1].to_string(),
                m.state_error_mean[2].to_string(),
                m.d_error_final.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

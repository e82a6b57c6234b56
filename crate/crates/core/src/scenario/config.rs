use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{BisectionConfig, CspConfig};
use crate::dcee::DceeConfig;
use crate::error::{AbsError, Result};
use crate::estimator::{ResamplingScheme, SensorNoise, DEFAULT_PROCESS_STD};
use crate::plant::VehicleParams;
use crate::tyre::{MagicParams, RoadSchedule, Surface};

pub const MPH_TO_MPS: f64 = 0.44704;

/// Default seed for invocations that do not set one.
pub const DEFAULT_SEED: u64 = 20240607;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Dcee,
    Csp,
    Bisection,
}

impl ControllerKind {
    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::Dcee => "dcee",
            ControllerKind::Csp => "csp",
            ControllerKind::Bisection => "bisection",
        }
    }

    pub const ALL: [ControllerKind; 3] = [ControllerKind::Dcee, ControllerKind::Csp, ControllerKind::Bisection];
}

impl std::str::FromStr for ControllerKind {
    type Err = AbsError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dcee" => Ok(ControllerKind::Dcee),
            "csp" => Ok(ControllerKind::Csp),
            "bisection" => Ok(ControllerKind::Bisection),
            other => Err(AbsError::Config(format!("unknown controller `{other}`"))),
        }
    }
}

/// One scenario, fully resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    /// Initial body speed (m/s).
    pub initial_speed: f64,
    pub road: RoadSchedule,
    pub controller: ControllerKind,
    pub n_particles: usize,
    pub seed: u64,
    pub dt: f64,
    /// Plant RK4 sub-steps per control period.
    pub plant_substeps: usize,
    pub timeout: f64,
    pub sensor: SensorNoise,
    /// Filter random-walk std on `[U, ω_f, ω_r]` per control step.
    pub process_std: [f64; 3],
    pub retrogressive: bool,
    pub resampling: ResamplingScheme,
    pub vehicle: VehicleParams,
    pub dcee: DceeConfig,
    pub csp: CspConfig,
    pub bisection: BisectionConfig,
    pub output: Option<PathBuf>,
}

impl ScenarioConfig {
    /// Straight-line stop on one preset surface.
    pub fn preset(surface: Surface, speed_mps: f64, controller: ControllerKind) -> Self {
        ScenarioConfig {
            name: format!("{}_{}_{:.1}", controller.name(), surface.name(), speed_mps),
            initial_speed: speed_mps,
            road: RoadSchedule::constant(surface.params()),
            controller,
            n_particles: 1000,
            seed: DEFAULT_SEED,
            dt: 1e-3,
            plant_substeps: 1,
            timeout: 40.0,
            sensor: SensorNoise::default(),
            process_std: DEFAULT_PROCESS_STD,
            retrogressive: true,
            resampling: ResamplingScheme::Systematic,
            vehicle: VehicleParams::default(),
            dcee: DceeConfig::default(),
            csp: CspConfig::default(),
            bisection: BisectionConfig::default(),
            output: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_road(mut self, road: RoadSchedule) -> Self {
        self.road = road;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.initial_speed > 0.0) || !self.initial_speed.is_finite() {
            return Err(AbsError::Config(format!("initial speed must be positive, got {}", self.initial_speed)));
        }
        if !(self.dt > 0.0) || !(self.timeout > 0.0) {
            return Err(AbsError::Config("dt and timeout must be positive".into()));
        }
        if self.plant_substeps == 0 {
            return Err(AbsError::Config("plant_substeps must be at least 1".into()));
        }
        if self.process_std.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(AbsError::Config(format!("process_std must be non-negative: {:?}", self.process_std)));
        }
        if self.n_particles < 2 {
            return Err(AbsError::Config("n_particles must be at least 2".into()));
        }
        self.sensor.validate()?;
        self.vehicle.validate()?;
        self.dcee.validate()?;
        Ok(())
    }

    /// Reads a TOML (or, by extension, JSON) scenario file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AbsError::Config(format!("cannot read {}: {e}", path.display())))?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        let file: ScenarioFile = parsed.map_err(|e| AbsError::Config(format!("{}: {e}", path.display())))?;
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        file.resolve(stem)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| AbsError::Config(e.to_string()))?;
        file.resolve(None)
    }

    /// Short label for the first road surface.
    pub fn road_label(&self) -> String {
        self.road
            .segments()
            .iter()
            .map(|(_, p)| surface_name(p))
            .collect::<Vec<_>>()
            .join("->")
    }
}

fn surface_name(p: &MagicParams) -> String {
    Surface::ALL
        .iter()
        .find(|s| s.params() == *p)
        .map(|s| s.name().to_string())
        .unwrap_or_else(|| format!("B{}C{}D{}E{}", p.b, p.c, p.d, p.e))
}

/// Road segment as written in a config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadEntry {
    pub t: f64,
    pub surface: Option<String>,
    #[serde(rename = "B")]
    pub b: Option<f64>,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    #[serde(rename = "D")]
    pub d: Option<f64>,
    #[serde(rename = "E")]
    pub e: Option<f64>,
}

impl RoadEntry {
    fn params(&self) -> Result<MagicParams> {
        match (&self.surface, self.b, self.c, self.d, self.e) {
            (Some(name), None, None, None, None) => Ok(name.parse::<Surface>()?.params()),
            (None, Some(b), Some(c), Some(d), Some(e)) => Ok(MagicParams { b, c, d, e }),
            _ => Err(AbsError::Config(format!(
                "road entry at t = {} needs either `surface` or all of B, C, D, E",
                self.t
            ))),
        }
    }
}

/// On-disk scenario document.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: Option<String>,
    pub initial_speed_mps: Option<f64>,
    pub initial_speed_mph: Option<f64>,
    #[serde(default)]
    pub road: Vec<RoadEntry>,
    pub controller: Option<ControllerKind>,
    pub n_particles: Option<usize>,
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub plant_substeps: Option<usize>,
    pub timeout: Option<f64>,
    pub sensor_variances: Option<[f64; 3]>,
    pub process_std: Option<[f64; 3]>,
    pub retrogressive: Option<bool>,
    pub resampling: Option<ResamplingScheme>,
    pub output: Option<PathBuf>,
    pub vehicle: Option<VehicleParams>,
    pub dcee: Option<DceeConfig>,
    pub csp: Option<CspConfig>,
    pub bisection: Option<BisectionConfig>,
}

impl ScenarioFile {
    pub fn resolve(self, fallback_name: Option<String>) -> Result<ScenarioConfig> {
        let speed = match (self.initial_speed_mps, self.initial_speed_mph) {
            (Some(v), None) => v,
            (None, Some(v)) => v * MPH_TO_MPS,
            (Some(_), Some(_)) => {
                return Err(AbsError::Config("give initial_speed_mps or initial_speed_mph, not both".into()))
            }
            (None, None) => return Err(AbsError::Config("missing initial speed".into())),
        };
        if self.road.is_empty() {
            return Err(AbsError::Config("road schedule is empty".into()));
        }
        let segments = self.road.iter().map(|r| Ok((r.t, r.params()?))).collect::<Result<Vec<_>>>()?;
        let road = RoadSchedule::new(segments)?;
        let controller = self.controller.unwrap_or(ControllerKind::Dcee);
        let mut cfg = ScenarioConfig::preset(Surface::Dry, speed, controller).with_road(road);
        cfg.name = self
            .name
            .or(fallback_name)
            .unwrap_or_else(|| format!("{}_{}_{speed:.1}", controller.name(), cfg.road_label()));
        if let Some(v) = self.n_particles {
            cfg.n_particles = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.dt {
            cfg.dt = v;
        }
        if let Some(v) = self.plant_substeps {
            cfg.plant_substeps = v;
        }
        if let Some(v) = self.timeout {
            cfg.timeout = v;
        }
        if let Some(v) = self.sensor_variances {
            cfg.sensor = SensorNoise { variances: v };
        }
        if let Some(v) = self.process_std {
            cfg.process_std = v;
        }
        if let Some(v) = self.retrogressive {
            cfg.retrogressive = v;
        }
        if let Some(v) = self.resampling {
            cfg.resampling = v;
        }
        if let Some(v) = self.vehicle {
            cfg.vehicle = v;
        }
        if let Some(v) = self.dcee {
            cfg.dcee = v;
        }
        if let Some(v) = self.csp {
            cfg.csp = v;
        }
        if let Some(v) = self.bisection {
            cfg.bisection = v;
        }
        cfg.output = self.output;
        cfg.validate()?;
        Ok(cfg)
    }
}

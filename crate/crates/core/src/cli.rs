//! `abs-lab run | sweep | compare`.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 runtime abort.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::Result;
use crate::scenario::{self, ControllerKind, RunResult, ScenarioConfig, MPH_TO_MPS};
use crate::tyre::{RoadSchedule, Surface};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "ABS_LAB_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "abs-lab", version, about = "Anti-lock braking laboratory")]
pub struct Cli {
    /// More progress output on stderr (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write its trace and metrics.
    Run(ScenarioArgs),
    /// Run a grid of speeds, surfaces, controllers and seeds in parallel.
    Sweep(SweepArgs),
    /// Run DCEE and both baselines on one scenario and tabulate the differences.
    Compare(ScenarioArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Scenario file (TOML, or JSON by extension).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Noise and filter seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Controller: dcee, csp or bisection
    #[arg(long)]
    pub controller: Option<ControllerKind>,
    /// Initial speed in m/s (mph with --mph).
    #[arg(long)]
    pub speed: Option<f64>,
    /// Read --speed in mph
    #[arg(long)]
    pub mph: bool,
    /// Constant road surface (dry, wet, snow); replaces the config road.
    #[arg(long)]
    pub surface: Option<Surface>,
    /// Output directory (default: $ABS_LAB_OUT_DIR, then ./out).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Particle count
    #[arg(long)]
    pub particles: Option<usize>,
    /// Disable retrogressive resampling.
    #[arg(long)]
    pub no_retro: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub base: ScenarioArgs,
    /// Comma-separated initial speeds in mph.
    #[arg(long, value_delimiter = ',', default_values_t = vec![10.0, 30.0, 50.0, 100.0])]
    pub speeds_mph: Vec<f64>,
    /// Comma-separated surfaces (default: the config road)
    #[arg(long, value_delimiter = ',')]
    pub surfaces: Vec<Surface>,
    /// Comma-separated controllers (default: the config controller)
    #[arg(long, value_delimiter = ',')]
    pub controllers: Vec<ControllerKind>,
    /// Seeds `seed, seed+1, …` per grid point.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    /// Also write one trace per run.
    #[arg(long)]
    pub traces: bool,
}

impl ScenarioArgs {
    /// Loads the config file (if any) and applies command-line overrides.
    pub fn resolve(&self) -> Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(path) => ScenarioConfig::load(path)?,
            None => ScenarioConfig::preset(Surface::Dry, 20.0, ControllerKind::Dcee),
        };
        let mut renamed = self.config.is_none();
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(c) = self.controller {
            cfg.controller = c;
            renamed = true;
        }
        if let Some(v) = self.speed {
            cfg.initial_speed = if self.mph { v * MPH_TO_MPS } else { v };
            renamed = true;
        }
        if let Some(s) = self.surface {
            cfg.road = RoadSchedule::constant(s.params());
            renamed = true;
        }
        if let Some(n) = self.particles {
            cfg.n_particles = n;
        }
        if self.no_retro {
            cfg.retrogressive = false;
        }
        if renamed {
            cfg.name = format!("{}_{}_{:.1}", cfg.controller.name(), cfg.road_label(), cfg.initial_speed);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &ScenarioConfig) -> PathBuf {
        self.out
            .clone()
            .or_else(|| cfg.output.clone())
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

/// Parses `args` (including the program name) and executes the command.
/// Human-readable output goes to `out`.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                EXIT_CONFIG
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    let verbose = cli.verbose;
    match cli.command {
        Command::Run(args) => {
            let cfg = args.resolve()?;
            let dir = args.out_dir(&cfg);
            if verbose > 0 {
                eprintln!("running {} (seed {})", cfg.name, cfg.seed);
            }
            let result = scenario::run(&cfg);
            write_results(&dir, &cfg.name, std::slice::from_ref(&result), true)?;
            match result {
                Ok(o) => {
                    let m = o.metrics;
                    writeln!(
                        out,
                        "{}: stopping time {:.3} s, distance {:.2} m, lock events {} ({} above hold speed), wall {:.2} s",
                        cfg.name,
                        m.stopping_time,
                        m.stopping_distance,
                        m.lock_events,
                        m.lock_events_high_speed,
                        o.wall_time.as_secs_f64()
                    )?;
                    writeln!(out, "outputs in {}", dir.display())?;
                    Ok(EXIT_OK)
                }
                Err(f) => {
                    eprintln!("error: {f}");
                    Ok(EXIT_RUNTIME)
                }
            }
        }
        Command::Sweep(args) => {
            let base = args.base.resolve()?;
            let dir = args.base.out_dir(&base);
            let configs = sweep_grid(&base, &args);
            if verbose > 0 {
                eprintln!("sweeping {} runs", configs.len());
            }
            let results = scenario::sweep(&configs);
            write_results(&dir, "sweep", &results, args.traces)?;
            for r in &results {
                match r {
                    Ok(o) => writeln!(
                        out,
                        "{:<28} t = {:>7.3} s  d = {:>8.2} m  locks = {}",
                        o.config.name, o.metrics.stopping_time, o.metrics.stopping_distance, o.metrics.lock_events_high_speed
                    )?,
                    Err(f) => writeln!(out, "{:<28} aborted: {}", f.config.name, f.error)?,
                }
            }
            Ok(if results.iter().all(|r| r.is_ok()) { EXIT_OK } else { EXIT_RUNTIME })
        }
        Command::Compare(args) => {
            let base = args.resolve()?;
            let dir = args.out_dir(&base);
            let configs: Vec<ScenarioConfig> = ControllerKind::ALL
                .iter()
                .map(|&c| {
                    let mut cfg = base.clone();
                    cfg.controller = c;
                    cfg.name = format!("compare_{}", c.name());
                    cfg
                })
                .collect();
            let results = scenario::sweep(&configs);
            write_results(&dir, "compare", &results, true)?;
            write!(out, "{}", compare_table(&results))?;
            Ok(if results.iter().all(|r| r.is_ok()) { EXIT_OK } else { EXIT_RUNTIME })
        }
    }
}

fn sweep_grid(base: &ScenarioConfig, args: &SweepArgs) -> Vec<ScenarioConfig> {
    let surfaces: Vec<Option<Surface>> =
        if args.surfaces.is_empty() { vec![None] } else { args.surfaces.iter().map(|&s| Some(s)).collect() };
    let controllers = if args.controllers.is_empty() { vec![base.controller] } else { args.controllers.clone() };
    let mut configs = Vec::new();
    for &c in &controllers {
        for s in &surfaces {
            for &mph in &args.speeds_mph {
                for k in 0..args.seeds.max(1) {
                    let mut cfg = base.clone();
                    cfg.controller = c;
                    if let Some(s) = s {
                        cfg.road = RoadSchedule::constant(s.params());
                    }
                    cfg.initial_speed = mph * MPH_TO_MPS;
                    cfg.seed = base.seed.wrapping_add(k);
                    cfg.name = format!("{}_{}_{}mph_s{}", c.name(), cfg.road_label(), mph, cfg.seed);
                    configs.push(cfg);
                }
            }
        }
    }
    configs
}

fn write_results(dir: &Path, stem: &str, results: &[RunResult], traces: bool) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    if traces {
        for r in results {
            let (name, trace) = match r {
                Ok(o) => (&o.config.name, &o.trace),
                Err(f) => (&f.config.name, &f.trace),
            };
            trace.save(&dir.join(format!("{name}_trace.csv")))?;
        }
    }
    scenario::summarize(results).save(&dir.join(format!("{stem}_metrics.csv")))
}

/// Stopping time/distance of each controller and its difference to DCEE.
pub fn compare_table(results: &[RunResult]) -> String {
    let dcee = results.iter().flatten().find(|o| o.config.controller == ControllerKind::Dcee).map(|o| o.metrics);
    let mut s = format!(
        "{:<10} {:>10} {:>12} {:>14} {:>12}\n",
        "controller", "time (s)", "distance (m)", "dcee faster %", "Δdist (m)"
    );
    for r in results {
        match r {
            Ok(o) => {
                let m = o.metrics;
                let (faster, dd) = match dcee {
                    Some(d) => (
                        100.0 * (m.stopping_time - d.stopping_time) / m.stopping_time,
                        m.stopping_distance - d.stopping_distance,
                    ),
                    None => (f64::NAN, f64::NAN),
                };
                s += &format!(
                    "{:<10} {:>10.3} {:>12.2} {:>14.1} {:>12.2}\n",
                    o.config.controller.name(),
                    m.stopping_time,
                    m.stopping_distance,
                    faster,
                    dd
                );
            }
            Err(f) => s += &format!("{:<10} aborted: {}\n", f.config.controller.name(), f.error),
        }
    }
    s
}

//! Stopping metrics over a grid of initial speeds and surfaces, as CSV.
//!
//! cargo run --release --example speed_sweep -- [seeds]

use abs_lab::scenario::{summarize, sweep, ControllerKind, ScenarioConfig, MPH_TO_MPS};
use abs_lab::tyre::Surface;

fn main() {
    let seeds: u64 = std::env::args().nth(1).map_or(1, |s| s.parse().expect("seeds must be an integer"));
    let mut configs = Vec::new();
    for s in Surface::ALL {
        for mph in [10.0, 30.0, 50.0] {
            for seed in 0..seeds {
                let mut cfg = ScenarioConfig::preset(s, mph * MPH_TO_MPS, ControllerKind::Dcee).with_seed(seed);
                cfg.name = format!("{}_{mph}mph_s{seed}", s.name());
                configs.push(cfg);
            }
        }
    }
    print!("{}", summarize(&sweep(&configs)).to_csv_string());
}

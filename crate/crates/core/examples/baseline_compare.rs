//! Dual control against sine-perturbation and bisection extremum seeking on
//! the same road and noise seed.
//!
//! cargo run --release --example baseline_compare -- [speed m/s] [surface]

use abs_lab::cli::compare_table;
use abs_lab::scenario::{sweep, ControllerKind, ScenarioConfig};
use abs_lab::tyre::Surface;

fn main() -> abs_lab::Result<()> {
    let mut args = std::env::args().skip(1);
    let speed: f64 = args.next().map_or(Ok(20.0), |s| s.parse()).expect("speed must be a number");
    let surface: Surface = args.next().map_or(Ok(Surface::Dry), |s| s.parse())?;

    let configs: Vec<ScenarioConfig> =
        ControllerKind::ALL.iter().map(|&c| ScenarioConfig::preset(surface, speed, c)).collect();
    let results = sweep(&configs);
    print!("{}", compare_table(&results));
    for o in results.iter().flatten() {
        let slips: Vec<f64> =
            o.trace.rows.iter().filter(|r| r.truth[0] > 5.0 && r.t > 0.3).map(|r| r.kappa_f).collect();
        let mean = slips.iter().sum::<f64>() / slips.len().max(1) as f64;
        println!("{:<10} mean front slip above 5 m/s: {mean:.3}", o.config.controller.name());
    }
    Ok(())
}

//! Closed-loop stop with the dual-control controller; writes the trace.
//!
//! cargo run --release --example dcee_stop -- [speed m/s] [surface] [trace.csv]

use abs_lab::scenario::{run, ControllerKind, ScenarioConfig};
use abs_lab::tyre::Surface;

fn main() -> abs_lab::Result<()> {
    let mut args = std::env::args().skip(1);
    let speed: f64 = args.next().map_or(Ok(20.0), |s| s.parse()).expect("speed must be a number");
    let surface: Surface = args.next().map_or(Ok(Surface::Dry), |s| s.parse())?;
    let trace_path = args.next();

    let cfg = ScenarioConfig::preset(surface, speed, ControllerKind::Dcee);
    let out = run(&cfg).map_err(|f| f.error)?;
    let m = out.metrics;
    println!(
        "{}: {:.3} s, {:.2} m, {} lock events, wall {:.2} s",
        cfg.name,
        m.stopping_time,
        m.stopping_distance,
        m.lock_events,
        out.wall_time.as_secs_f64()
    );
    for r in out.trace.rows.iter().step_by(100) {
        println!(
            "t {:>5.2}  U {:>6.2}  κ {:>7.3}  T {:>7.0}  D̂ {:>5.3}  P {:>9.3e}",
            r.t, r.truth[0], r.kappa_f, r.torque, r.theta_est[2], r.p_pred
        );
    }
    if let Some(p) = trace_path {
        out.trace.save(p.as_ref())?;
        println!("trace written to {p}");
    }
    Ok(())
}

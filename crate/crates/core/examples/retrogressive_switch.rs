//! Dry road turning wet at 0.5 s, with and without the uncertainty-triggered
//! parameter reset.
//!
//! cargo run --release --example retrogressive_switch

use abs_lab::scenario::{sweep, ControllerKind, ScenarioConfig};
use abs_lab::tyre::{MagicParams, RoadSchedule, Surface};

fn main() -> abs_lab::Result<()> {
    let road = RoadSchedule::new(vec![(0.0, MagicParams::DRY), (0.5, MagicParams::WET)])?;
    let with = ScenarioConfig::preset(Surface::Dry, 20.0, ControllerKind::Dcee).with_road(road);
    let mut without = with.clone();
    without.retrogressive = false;

    let mut outs = sweep(&[with, without]).into_iter().map(|r| r.map_err(|f| f.error));
    let (a, b) = (outs.next().unwrap()?, outs.next().unwrap()?);
    println!("{:>6} {:>7} {:>9} {:>11} {:>9} {:>11}", "t", "D", "D̂ reset", "P reset", "D̂ plain", "P plain");
    for (ra, rb) in a.trace.rows.iter().zip(&b.trace.rows).step_by(50).take_while(|(r, _)| r.t < 2.5) {
        println!(
            "{:>6.2} {:>7.2} {:>9.3} {:>11.3e} {:>9.3} {:>11.3e}",
            ra.t, ra.d_true, ra.theta_est[2], ra.p_pred, rb.theta_est[2], rb.p_pred
        );
    }
    let resets = a.trace.rows.iter().filter(|r| r.retro).count();
    println!("parameter resets: {resets}");
    println!("stop with reset {:.3} s, without {:.3} s", a.metrics.stopping_time, b.metrics.stopping_time);
    Ok(())
}

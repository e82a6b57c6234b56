//! Open-loop braking of the 7-DOF plant with a fixed front torque.
//!
//! cargo run --example plant_braking -- [torque N·m] [surface]

use abs_lab::plant::{self, PlantState, VehicleParams, WheelTorques, U_STOP};
use abs_lab::tyre::Surface;

fn main() -> abs_lab::Result<()> {
    let mut args = std::env::args().skip(1);
    let torque: f64 = args.next().map_or(Ok(-1200.0), |s| s.parse()).expect("torque must be a number");
    let surface: Surface = args.next().map_or(Ok(Surface::Dry), |s| s.parse())?;

    let params = VehicleParams::default();
    let road = surface.params();
    let tq = WheelTorques::front(torque, torque);
    let dt = 1e-3;
    let mut s = PlantState::rolling(20.0, &params);
    let mut t = 0.0;
    println!("{:>6} {:>8} {:>8} {:>8} {:>8} {:>9} {:>9}", "t", "U", "ω_f", "ω_r", "κ_f", "Fz_f", "Fz_r");
    let mut k = 0;
    while s.u > U_STOP {
        if k % 100 == 0 {
            let f = plant::tyre_forces(&s, &params, &road)?;
            println!(
                "{t:>6.2} {:>8.3} {:>8.3} {:>8.3} {:>8.4} {:>9.1} {:>9.1}",
                s.u,
                s.omega_front(),
                s.omega_rear(),
                f.kappa[0],
                f.fz[0],
                f.fz[2]
            );
        }
        s = plant::step(&s, &tq, &params, &road, dt)?;
        t += dt;
        k += 1;
        if t > 60.0 {
            break;
        }
    }
    println!("below {U_STOP} m/s after {t:.3} s");
    Ok(())
}

//! Joint state and tyre-parameter estimation on an open-loop braking run.
//!
//! cargo run --release --example particle_filter

use abs_lab::estimation_model::Measurement;
use abs_lab::estimator::{FilterConfig, RegularizedParticleFilter};
use abs_lab::plant::{self, PlantState, VehicleParams, WheelTorques};
use abs_lab::scenario::SensorModel;
use abs_lab::tyre::MagicParams;

fn main() -> abs_lab::Result<()> {
    let params = VehicleParams::default();
    let road = MagicParams::WET;
    let config = FilterConfig::default();
    let mut sensor = SensorModel::new(&config.noise, 7);
    let dt = 1e-3;
    let torque = -700.0;

    let mut truth = PlantState::rolling(20.0, &params);
    let read = |s: &PlantState| [s.u, s.omega_front(), s.omega_rear()];
    let y0 = sensor.measure(read(&truth));
    let mut filter = RegularizedParticleFilter::new(&y0, config, params, 11)?;

    println!("{:>6} {:>8} {:>8} {:>8} {:>8} {:>7} {:>7} {:>8}", "t", "U", "Û", "ω_f", "ω̂_f", "D̂", "B̂", "N_eff");
    for k in 1..=1500 {
        truth = plant::step(&truth, &WheelTorques::front(torque, torque), &params, &road, dt)?;
        let y: Measurement = sensor.measure(read(&truth));
        let rep = filter.update(torque, &y, dt, None)?;
        if k % 100 == 0 {
            let th = rep.mean.theta();
            println!(
                "{:>6.2} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>7.3} {:>7.2} {:>8.1}",
                k as f64 * dt,
                truth.u,
                rep.mean.u(),
                truth.omega_front(),
                rep.mean.omega_f(),
                th.d,
                th.b,
                rep.n_eff
            );
        }
    }
    println!("true D = {}, B = {}", road.d, road.b);
    Ok(())
}

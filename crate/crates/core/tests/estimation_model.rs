mod common;

use abs_lab::estimation_model::{predict_step, quasi_static_accel, vertical_loads, AugmentedState};
use abs_lab::plant::{self, PlantState, VehicleParams, WheelTorques};
use abs_lab::tyre::{MagicParams, Surface};
use proptest::prelude::*;

fn theta(p: &MagicParams) -> [f64; 4] {
    [p.b, p.c, p.d, p.e]
}

#[test]
fn one_step_matches_oracle() {
    let p = VehicleParams::default();
    for s in Surface::ALL {
        let th = s.params();
        for (kappa, torque) in [(-0.02, -300.0), (-0.1, -1500.0), (-0.4, -2500.0)] {
            let u = 18.0;
            let state = [u, u * (1.0 + kappa) / p.radius, u / p.radius * 0.995];
            let chi = AugmentedState::new(state[0], state[1], state[2], th);
            let step = predict_step(&chi, torque, 1e-3, &p);
            let (oracle, a) = common::euler_step(state, theta(&th), torque, 1e-3, &p);
            for k in 0..3 {
                assert!((step.next[k] - oracle[k]).abs() < 1e-10, "{} κ={kappa} k={k}", s.name());
            }
            assert!((step.u_dot - a).abs() < 1e-10);
            assert!((step.fz_front - common::front_load(a, &p)).abs() < 1e-6);
            assert_eq!(step.next.theta(), th);
        }
    }
}

#[test]
fn axle_loads_match_moment_balance() {
    let p = VehicleParams::default();
    for a in [0.0, -2.0, -8.0] {
        let (f, r) = vertical_loads(a, &p);
        assert!((f - common::front_load(a, &p)).abs() < 1e-9);
        assert!((f + r - p.mass * common::G).abs() < 1e-9);
    }
}

#[test]
fn tracks_plant_over_braking_segment() {
    let p = VehicleParams::default();
    let road = MagicParams::DRY;
    let mut truth = PlantState::rolling(20.0, &p);
    let mut chi = AugmentedState::new(truth.u, truth.omega_front(), truth.omega_rear(), road);
    let torque = -1200.0;
    let dt = 1e-3;
    for _ in 0..300 {
        for _ in 0..10 {
            truth = plant::step(&truth, &WheelTorques::front(torque, torque), &p, &road, dt / 10.0).unwrap();
        }
        chi = predict_step(&chi, torque, dt, &p).next;
    }
    // quasi-static loads ignore the suspension lag: a few cm/s after 0.3 s
    assert!((chi.u() - truth.u).abs() < 0.05, "U {} vs {}", chi.u(), truth.u);
    assert!((chi.omega_f() - truth.omega_front()).abs() / truth.omega_front() < 0.01);
    assert!((chi.omega_r() - truth.omega_rear()).abs() / truth.omega_rear() < 0.01);
}

proptest! {
    #[test]
    fn closed_form_accel_matches_fixed_point(mu_f in -1.6f64..0.0, mu_r in -0.3f64..0.0) {
        let p = VehicleParams::default();
        let a = quasi_static_accel(mu_f, mu_r, &p);
        prop_assert!((a - common::body_accel(mu_f, mu_r, &p)).abs() < 1e-9);
    }

    #[test]
    fn speeds_stay_non_negative(u in 0.5f64..40.0, slip in -1.0f64..0.0, torque in -4000.0f64..0.0) {
        let p = VehicleParams::default();
        let chi = AugmentedState::new(u, u * (1.0 + slip) / p.radius, u / p.radius, MagicParams::SNOW);
        let next = predict_step(&chi, torque, 1e-3, &p).next;
        prop_assert!(next.u() >= 0.0 && next.omega_f() >= 0.0 && next.omega_r() >= 0.0);
    }
}

mod common;

use abs_lab::dcee::{condition_on, cost, predict_forces, DceeConfig, DceeController, PredictedForceSample};
use abs_lab::estimation_model::AugmentedState;
use abs_lab::estimator::ParticleEnsemble;
use abs_lab::plant::VehicleParams;
use abs_lab::tyre::MagicParams;
use proptest::prelude::*;

const DT: f64 = 1e-3;
const U_DOT: f64 = -8.0;

fn at_slip(kappa: f64, theta: MagicParams) -> AugmentedState {
    let p = VehicleParams::default();
    let u = 20.0;
    AugmentedState::new(u, u * (1.0 + kappa) / p.radius, u / p.radius, theta)
}

fn point_mass(chi: AugmentedState) -> ParticleEnsemble {
    ParticleEnsemble::from_parts(vec![chi; 200], vec![1.0; 200], 0).unwrap()
}

/// Predicted front force and peak force for one particle under `torque`.
fn oracle_force(chi: &AugmentedState, torque: f64, p: &VehicleParams) -> (f64, f64) {
    let th = chi.theta();
    let (next, _) = common::euler_step(chi.states(), [th.b, th.c, th.d, th.e], torque, DT, p);
    let fz = common::front_load(U_DOT, p);
    let kappa = (next[1] * p.radius - next[0]) / next[0];
    (-common::mf(kappa, th.b, th.c, th.d, th.e) * fz, th.d * fz)
}

/// `|weighted mean error| + weighted variance`, weights from a Gaussian
/// centred on the unweighted mean force.
fn oracle_cost(pairs: &[(f64, f64)], sigma_f: f64) -> f64 {
    let centre = pairs.iter().map(|p| p.0).sum::<f64>() / pairs.len() as f64;
    let ws: Vec<f64> = pairs.iter().map(|p| (-0.5 * ((p.0 - centre) / sigma_f).powi(2)).exp()).collect();
    let total: f64 = ws.iter().sum();
    let errs: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
    let mean = errs.iter().zip(&ws).map(|(e, w)| e * w).sum::<f64>() / total;
    let var = errs.iter().zip(&ws).map(|(e, w)| w * (e - mean).powi(2)).sum::<f64>() / total;
    mean.abs() + var
}

fn oracle_argmin(chi: &AugmentedState, torque_prev: f64, cfg: &DceeConfig) -> (f64, Vec<f64>) {
    let p = VehicleParams::default();
    let costs: Vec<f64> = cfg
        .actions
        .iter()
        .map(|&tau| oracle_cost(&[oracle_force(chi, cfg.clamp(torque_prev + tau), &p)], cfg.sigma_f))
        .collect();
    let mut best = 0;
    for i in 1..costs.len() {
        if costs[i] < costs[best] {
            best = i;
        }
    }
    (cfg.actions[best], costs)
}

fn decide(chi: AugmentedState, torque_prev: f64) -> (abs_lab::dcee::Decision, f64, Vec<f64>) {
    let cfg = DceeConfig::default();
    let (tau, costs) = oracle_argmin(&chi, torque_prev, &cfg);
    let mut ctrl = DceeController::new(cfg, 1).unwrap();
    let d = ctrl.select_action(&point_mass(chi), torque_prev, U_DOT, DT, &VehicleParams::default());
    (d, tau, costs)
}

#[test]
fn below_peak_slip_increases_braking() {
    let (d, tau, costs) = decide(at_slip(-0.05, MagicParams::DRY), -1000.0);
    assert_eq!(d.tau, tau);
    assert_eq!(d.tau, -400.0);
    assert_eq!(d.torque, -1400.0);
    for (a, b) in d.costs.iter().zip(&costs) {
        assert!((a - b).abs() < 1e-6 * b.max(1.0), "{a} vs {b}");
    }
}

#[test]
fn past_peak_slip_releases_braking() {
    let (d, tau, costs) = decide(at_slip(-0.4, MagicParams::DRY), -2500.0);
    assert_eq!(d.tau, tau);
    assert_eq!(d.tau, 400.0);
    for (a, b) in d.costs.iter().zip(&costs) {
        assert!((a - b).abs() < 1e-6 * b.max(1.0));
    }
}

#[test]
fn equal_costs_pick_hold() {
    // wheel already stopped under full torque: every admissible torque keeps it stopped
    let (d, _, costs) = decide(at_slip(-1.0, MagicParams::DRY), -4000.0);
    assert!(costs.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(d.tau, 0.0);
    assert_eq!(d.torque, -4000.0);
}

#[test]
fn predicted_force_set_matches_oracle() {
    let p = VehicleParams::default();
    let particles = vec![
        at_slip(-0.08, MagicParams::DRY),
        at_slip(-0.12, MagicParams::WET),
        at_slip(-0.2, MagicParams { d: 1.0, ..MagicParams::DRY }),
    ];
    let ens = ParticleEnsemble::from_parts(particles.clone(), vec![1.0; 3], 0).unwrap();
    let subset = [0, 1, 2, 2, 0];
    let fz = common::front_load(U_DOT, &p);
    let samples = predict_forces(&ens, &subset, -1500.0, fz, DT, &p, 250.0);
    let pairs: Vec<(f64, f64)> = subset.iter().map(|&i| oracle_force(&particles[i], -1500.0, &p)).collect();
    for (s, (f, pk)) in samples.iter().zip(&pairs) {
        assert!((s.force - f).abs() < 1e-6);
        assert!((s.peak_force - pk).abs() < 1e-6);
    }
    let j = cost(&samples).j;
    let oracle = oracle_cost(&pairs, 250.0);
    assert!((j - oracle).abs() < 1e-9 * oracle, "{j} vs {oracle}");
}

#[test]
fn hold_below_speed_threshold() {
    let mut chi = at_slip(-0.1, MagicParams::DRY);
    chi[0] = 1.0;
    let mut ctrl = DceeController::new(DceeConfig::default(), 1).unwrap();
    let d = ctrl.select_action(&point_mass(chi), -700.0, U_DOT, DT, &VehicleParams::default());
    assert!(d.held);
    assert_eq!(d.torque, -700.0);
}

fn samples() -> impl Strategy<Value = Vec<PredictedForceSample>> {
    prop::collection::vec((0.0f64..9000.0, 4000.0f64..9000.0, 0.01f64..5.0), 2..30).prop_map(|v| {
        v.into_iter().map(|(force, peak_force, weight)| PredictedForceSample { force, peak_force, weight }).collect()
    })
}

proptest! {
    #[test]
    fn cost_is_weight_scale_invariant(s in samples(), k in 0.001f64..1000.0) {
        let scaled: Vec<_> = s.iter().map(|x| PredictedForceSample { weight: x.weight * k, ..*x }).collect();
        let (a, b) = (cost(&s), cost(&scaled));
        prop_assert!((a.j - b.j).abs() <= 1e-9 * a.j.max(1.0));
        prop_assert!((a.p - b.p).abs() <= 1e-9 * a.p.max(1.0));
    }

    #[test]
    fn conditioning_is_weight_scale_invariant(s in samples(), k in 0.001f64..1000.0, obs in 0.0f64..9000.0) {
        let scaled: Vec<_> = s.iter().map(|x| PredictedForceSample { weight: x.weight * k, ..*x }).collect();
        let (a, b) = (cost(&condition_on(&s, obs, 250.0)), cost(&condition_on(&scaled, obs, 250.0)));
        prop_assert!((a.j - b.j).abs() <= 1e-9 * a.j.max(1.0));
    }

    #[test]
    fn cost_is_non_negative(s in samples()) {
        let c = cost(&s);
        prop_assert!(c.j >= 0.0 && c.p >= 0.0);
    }
}

use abs_lab::estimation_model::{AugmentedState, Measurement};
use abs_lab::estimator::{
    bandwidth, resampling_gain, ParticleEnsemble, PriorSpec, ResamplingScheme, SensorNoise,
};
use abs_lab::plant::VehicleParams;
use abs_lab::tyre::MagicParams;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const Y0: Measurement = Measurement([20.0, 68.0, 68.0]);

fn with_d(ds: &[f64], ws: &[f64], seed: u64) -> ParticleEnsemble {
    let ps = ds.iter().map(|&d| AugmentedState::new(20.0, 68.0, 68.0, MagicParams { d, ..MagicParams::DRY })).collect();
    ParticleEnsemble::from_parts(ps, ws.to_vec(), seed).unwrap()
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

#[test]
fn ess_hand_computed() {
    let cases: [(&[f64], f64); 3] =
        [(&[0.25, 0.25, 0.25, 0.25], 4.0), (&[1.0, 0.0, 0.0, 0.0], 1.0), (&[0.5, 0.25, 0.25], 8.0 / 3.0)];
    for (ws, expected) in cases {
        let e = with_d(&vec![1.0; ws.len()], ws, 0);
        assert!((e.effective_sample_size() - expected).abs() < 1e-12, "{ws:?}");
    }
}

#[test]
fn gain_substitutions() {
    for (d, expected) in [(0.2, 0.265), (1.0, 0.145), (1.6, 0.055)] {
        assert!((resampling_gain(d) - expected).abs() < 1e-15);
        let e = with_d(&[d, d], &[1.0, 1.0], 0);
        assert!((e.resampling_gain() - expected).abs() < 1e-15);
    }
}

#[test]
fn bandwidth_closed_form() {
    for n in [100usize, 1000, 5000] {
        let (_, h) = bandwidth(7, n);
        let oracle = ((4.0f64 / 9.0).ln() / 11.0 - (n as f64).ln() / 11.0).exp();
        assert!((h - oracle).abs() < 1e-12, "n = {n}: {h} vs {oracle}");
    }
}

fn resampling_preserves_mean(scheme: ResamplingScheme) {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let n = 500;
    let ds: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.6)).collect();
    let ws: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0f64..2.0).exp()).collect();
    let total: f64 = ws.iter().sum();
    let target: f64 = ds.iter().zip(&ws).map(|(d, w)| d * w).sum::<f64>() / total;

    let means: Vec<f64> = (0..200)
        .map(|trial| {
            let mut e = with_d(&ds, &ws, 1000 + trial);
            e.resample(scheme);
            e.particles().iter().map(|p| p.theta().d).sum::<f64>() / n as f64
        })
        .collect();
    let (m, sd) = mean_sd(&means);
    let se = sd / (means.len() as f64).sqrt();
    assert!((m - target).abs() < 3.0 * se, "{scheme:?}: {m} vs {target}, se {se}");
}

#[test]
fn systematic_resampling_preserves_mean() {
    resampling_preserves_mean(ResamplingScheme::Systematic);
}

#[test]
fn stratified_resampling_preserves_mean() {
    resampling_preserves_mean(ResamplingScheme::Stratified);
}

#[test]
fn retrogressive_reset_keeps_states_bit_exact() {
    let prior = PriorSpec::around(&Y0, 1000);
    let mut e = ParticleEnsemble::initialize(&prior, 9).unwrap();
    let p = VehicleParams::default();
    let noise = SensorNoise::default();
    for _ in 0..20 {
        e.propagate_and_weight(-1200.0, &Measurement([19.9, 66.0, 68.0]), 1e-3, &p, &noise, &[0.0; 3]);
    }
    let before = e.particles().to_vec();
    assert!(e.retrogressive_resample(1.0, 1.0, &prior));
    for (a, b) in e.particles().iter().zip(&before) {
        assert_eq!(a.states().map(f64::to_bits), b.states().map(f64::to_bits));
    }
    let w0 = 1.0 / 1000.0;
    assert!(e.weights().iter().all(|w| *w == w0));
}

#[test]
fn regularization_mean_shift_is_unbiased() {
    let n = 2000;
    let shifts: Vec<f64> = (0..100)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ps: Vec<AugmentedState> = (0..n)
                .map(|_| {
                    let theta = MagicParams {
                        b: rng.random_range(6.0..12.0),
                        c: rng.random_range(1.3..1.5),
                        d: rng.random_range(0.8..1.2),
                        e: rng.random_range(-6.0..0.0),
                    };
                    AugmentedState::new(rng.random_range(19.0..21.0), rng.random_range(60.0..70.0), 68.0, theta)
                })
                .collect();
            let mut e = ParticleEnsemble::from_parts(ps, vec![1.0; n], seed).unwrap();
            let before = e.posterior_mean().theta().d;
            e.regularize();
            e.posterior_mean().theta().d - before
        })
        .collect();
    let (m, sd) = mean_sd(&shifts);
    let se = sd / (shifts.len() as f64).sqrt();
    assert!(m.abs() < 3.0 * se, "mean shift {m}, se {se}");
}

#[test]
fn mh_acceptance_matches_likelihood_ratio() {
    let noise = SensorNoise::default();
    let y = Measurement([20.0, 68.0, 68.0]);
    // log ratio −ln 2: accepted half the time
    let delta = (2.0 * 0.2 * std::f64::consts::LN_2).sqrt();
    let cur = AugmentedState::new(20.0, 68.0, 68.0, MagicParams::DRY);
    let cand = AugmentedState::new(20.0 + delta, 68.0, 68.0, MagicParams::DRY);
    let n = 4000;
    let mut e = ParticleEnsemble::from_parts(vec![cur; n], vec![1.0; n], 3).unwrap();
    let rate = e.mcmc_move(&vec![cand; n], &y, &noise) as f64 / n as f64;
    let se = (0.25 / n as f64).sqrt();
    assert!((rate - 0.5).abs() < 3.0 * se, "acceptance {rate}");

    let mut e = ParticleEnsemble::from_parts(vec![cur; 10], vec![1.0; 10], 3).unwrap();
    assert_eq!(e.mcmc_move(&[cur; 10], &y, &noise), 10);
}

#[test]
fn mh_rejects_parameters_outside_prior() {
    let noise = SensorNoise::default();
    let prior = PriorSpec::around(&Y0, 50);
    let cur = AugmentedState::new(20.0, 68.0, 68.0, MagicParams::DRY);
    // C past 2 flips the sign of the deep-slip force; the likelihood alone cannot see it
    let cand = AugmentedState::new(20.0, 68.0, 68.0, MagicParams { c: 3.0, ..MagicParams::DRY });
    let mut e = ParticleEnsemble::from_parts(vec![cur; 50], vec![1.0; 50], 3).unwrap().with_support(&prior);
    assert_eq!(e.mcmc_move(&vec![cand; 50], &Y0, &noise), 0);
    assert!(e.particles().iter().all(|p| p.theta().c == MagicParams::DRY.c));
    let mut free = ParticleEnsemble::from_parts(vec![cur; 50], vec![1.0; 50], 3).unwrap();
    assert_eq!(free.mcmc_move(&vec![cand; 50], &Y0, &noise), 50);
}

#[test]
fn resample_trigger_follows_gain() {
    let noise = SensorNoise::default();
    // E[D] = 1 gives K_o = 0.145: 10 particles trigger at N_eff ≤ 1.45
    let mut heavy = with_d(&[1.0; 10], &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 1);
    assert!(heavy.maybe_resample(&Y0, &noise, ResamplingScheme::Systematic).resampled);
    let mut spread = with_d(&[1.0; 10], &[1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 1);
    assert!(!spread.maybe_resample(&Y0, &noise, ResamplingScheme::Systematic).resampled);
}

fn particles_and_weights() -> impl Strategy<Value = (Vec<[f64; 3]>, Vec<f64>)> {
    (2usize..60).prop_flat_map(|n| {
        (
            prop::collection::vec([18.0f64..22.0, 60.0f64..75.0, 60.0f64..75.0], n),
            prop::collection::vec(0.001f64..10.0, n),
        )
    })
}

fn build(states: &[[f64; 3]], ws: &[f64]) -> ParticleEnsemble {
    let ps = states.iter().map(|s| AugmentedState::new(s[0], s[1], s[2], MagicParams::WET)).collect();
    ParticleEnsemble::from_parts(ps, ws.to_vec(), 11).unwrap()
}

proptest! {
    #[test]
    fn weights_normalized_after_update((states, ws) in particles_and_weights(), y in [18.0f64..22.0, 60.0f64..75.0, 60.0f64..75.0]) {
        let mut e = build(&states, &ws);
        e.reweight(&Measurement(y), &SensorNoise::default());
        let total: f64 = e.weights().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(e.weights().iter().all(|w| *w >= 0.0));
    }

    #[test]
    fn ess_within_bounds((states, ws) in particles_and_weights()) {
        let e = build(&states, &ws);
        let n_eff = e.effective_sample_size();
        prop_assert!(n_eff >= 1.0 - 1e-12 && n_eff <= e.len() as f64 + 1e-9);
    }

    #[test]
    fn resampling_keeps_size_and_uniform_weights((states, ws) in particles_and_weights(), stratified in any::<bool>()) {
        let mut e = build(&states, &ws);
        let scheme = if stratified { ResamplingScheme::Stratified } else { ResamplingScheme::Systematic };
        e.resample(scheme);
        prop_assert_eq!(e.len(), states.len());
        let w0 = 1.0 / states.len() as f64;
        prop_assert!(e.weights().iter().all(|w| (*w - w0).abs() < 1e-15));
    }

    #[test]
    fn retro_never_touches_states((states, ws) in particles_and_weights()) {
        let mut e = build(&states, &ws);
        let before = e.particles().to_vec();
        let prior = PriorSpec::around(&Y0, states.len());
        e.retrogressive_resample(2.0, 1.0, &prior);
        for (a, b) in e.particles().iter().zip(&before) {
            prop_assert_eq!(a.states(), b.states());
        }
    }
}

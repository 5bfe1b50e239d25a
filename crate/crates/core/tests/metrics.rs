use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use stormbench_core::channel::{scenario1, scenario2, NoiseSource};
use stormbench_core::metrics::{
    compute_aser, kld_samples, qpsk_ser, run_link_trial, AccessPreamble, KldConfig, LinkConfig,
};
use stormbench_core::signal::Modulation;
use stormbench_core::waveform::Silence;
use stormbench_core::Complex;

fn gaussian(n: usize, mean: Complex<f64>, seed: u64) -> Vec<Complex<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            mean + Complex::new(re, im)
        })
        .collect()
}

#[test]
fn qpsk_aser_matches_closed_form() {
    let preamble = AccessPreamble::<f64>::default();
    let es_n0 = 10.0;
    let mut noise = NoiseSource::new(1.0 / es_n0, 77);
    let trials = 30_000;
    let mut sum = 0.0;
    for _ in 0..trials {
        let mut rx = preamble.symbols().to_vec();
        noise.add_to(&mut rx);
        sum += compute_aser(&rx, &preamble).unwrap();
    }
    let measured = sum / trials as f64;
    let expected = qpsk_ser(es_n0);
    assert!(trials * preamble.len() >= 100_000);
    assert!((measured / expected - 1.0).abs() < 0.10, "{measured} vs {expected}");
}

#[test]
fn kld_of_same_distribution_is_small() {
    let a = gaussian(200_000, Complex::new(0.0, 0.0), 1);
    let b = gaussian(200_000, Complex::new(0.0, 0.0), 2);
    assert!(kld_samples(&a, &b, KldConfig::default()).unwrap() < 0.01);
}

#[test]
fn kld_gaussian_offset_matches_analytic() {
    for d in [0.5, 1.0] {
        let reference = gaussian(1_000_000, Complex::new(0.0, 0.0), 3);
        let rx = gaussian(1_000_000, Complex::new(d, 0.0), 4);
        let est = kld_samples(&rx, &reference, KldConfig::default()).unwrap();
        let analytic = d * d / 2.0;
        assert!((est / analytic - 1.0).abs() < 0.20, "d={d}: {est} vs {analytic}");
    }
}

#[test]
fn kld_disjoint_support_hits_smoothing_bound() {
    let cfg = KldConfig::default();
    let preamble = AccessPreamble::<f64>::default();
    let reference: Vec<_> = preamble.symbols().iter().cycle().take(20_000).copied().collect();
    // every rx sample lands in the top-right corner bin, which the
    // reference never reaches
    let rx = vec![Complex::new(100.0, 100.0); 20_000];
    let est = kld_samples(&rx, &reference, cfg).unwrap();
    // oracle: rx mass is (1 + s)/(1 + Bs) in the corner and s/(1 + Bs)
    // elsewhere; the reference has at most four occupied bins
    let s = cfg.smoothing;
    let bins = (cfg.bins_per_axis * cfg.bins_per_axis) as f64;
    let z = 1.0 + bins * s;
    let p_corner = (1.0 + s) / z;
    let q_corner = s / z;
    let p_other = s / z;
    let upper = p_corner * (p_corner / q_corner).ln();
    let lower = upper + (bins - 1.0) * p_other * (p_other / (1.0 / z)).ln().min(0.0);
    assert!(est <= upper + 1e-12 && est >= lower - 1e-12, "{est} not in [{lower}, {upper}]");
    assert!(est.is_finite() && est <= (1.0 / s).ln() + 1e-3);
}

#[test]
fn clean_link_delivers_offered_load() {
    let scene = scenario1();
    let link = LinkConfig::default();
    let mut silent = Silence::new(scene.sample_rate);
    let trial = run_link_trial(&link, &mut silent, &scene, 3.0, 5).unwrap();
    let offered = link.offered_load(64);
    let frame = link.frame_bits as f64;
    for t in &trial.throughput {
        assert!((t - offered).abs() <= frame, "{t} vs {offered}");
        assert!(*t <= offered * (1.0 + 1e-9));
    }
    assert_eq!(trial.frames_sent, trial.frames_delivered);
    assert!(trial.records.iter().all(|r| r.aser == 0.0 && r.kld.unwrap() < 0.01));
}

#[test]
fn repetition_and_modulations_run_clean() {
    let mut scene = scenario2();
    scene.tx_rx.multipath_taps.clear();
    scene.tx_rx.noise_psd = 0.0;
    for (m, r) in [(Modulation::Qam8, 2), (Modulation::Qam16, 4), (Modulation::Qam64, 1)] {
        let link = LinkConfig { modulation: m, repetition: r, ..Default::default() };
        let mut silent = Silence::new(scene.sample_rate);
        let trial = run_link_trial(&link, &mut silent, &scene, 1.0, 6).unwrap();
        assert_eq!(trial.frames_sent, trial.frames_delivered, "{m} r={r}");
    }
}

#[test]
fn trials_replay_identically() {
    let scene = scenario1();
    let link = LinkConfig::default();
    let a = run_link_trial(&link, &mut Silence::new(scene.sample_rate), &scene, 1.0, 8).unwrap();
    let b = run_link_trial(&link, &mut Silence::new(scene.sample_rate), &scene, 1.0, 8).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn aser_ignores_global_gain(mag in 0.01f64..100.0, phase in -3.2f64..3.2, seed in 0u64..500) {
        let preamble = AccessPreamble::<f64>::default();
        let mut rx = preamble.symbols().to_vec();
        NoiseSource::new(0.3, seed).add_to(&mut rx);
        let g = Complex::from_polar(mag, phase);
        let scaled: Vec<_> = rx.iter().map(|z| z * g).collect();
        let a = compute_aser(&rx, &preamble).unwrap();
        let b = compute_aser(&scaled, &preamble).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn kld_is_non_negative(d in 0.0f64..3.0, scale in 0.5f64..2.0, seed in 0u64..100) {
        let a: Vec<_> = gaussian(12_000, Complex::new(d, 0.0), seed).iter().map(|z| z * scale).collect();
        let b = gaussian(12_000, Complex::new(0.0, 0.0), seed + 1000);
        prop_assert!(kld_samples(&a, &b, KldConfig::default()).unwrap() >= 0.0);
    }
}

use proptest::prelude::*;
use stormbench_core::channel::{
    propagate, receive, scenario1, scenario2, scenario3, ChannelModel, NoiseSource, SceneConfig, Tap,
};
use stormbench_core::signal::mean_power;
use stormbench_core::{Complex, IqBuffer64};

fn white(n: usize, seed: u64) -> IqBuffer64 {
    let mut v = vec![Complex::new(0.0, 0.0); n];
    NoiseSource::new(1.0, seed).add_to(&mut v);
    IqBuffer64::new(v, 250e3, 0).unwrap()
}

fn zeros(n: usize) -> IqBuffer64 {
    IqBuffer64::new(vec![Complex::new(0.0, 0.0); n], 250e3, 0).unwrap()
}

fn quiet(mut scene: SceneConfig) -> SceneConfig {
    scene.tx_rx.noise_psd = 0.0;
    scene
}

#[test]
fn output_power_follows_loss_and_taps() {
    let x = white(400_000, 1);
    for scene in [scenario1(), scenario2()] {
        let m = &scene.tx_rx;
        let y = propagate(&x, m).unwrap();
        let expected = x.mean_power() * 10f64.powf(-m.path_loss_db() / 10.0) * m.multipath_power();
        assert!((y.mean_power() / expected - 1.0).abs() < 0.02, "{}", scene.label);
    }
}

#[test]
fn zero_interference_zero_noise_is_propagation() {
    let scene = quiet(scenario1());
    let x = white(5000, 2);
    let rx = receive(&x, &zeros(5000), &scene, 9).unwrap();
    assert_eq!(rx, propagate(&x, &scene.tx_rx).unwrap());
}

#[test]
fn zero_link_is_interference_plus_noise() {
    let scene = scenario2();
    let i = white(5000, 3);
    let rx = receive(&zeros(5000), &i, &scene, 4).unwrap();
    let mut expected = propagate(&i, &scene.interferer_rx).unwrap().into_samples();
    NoiseSource::new(scene.noise_power(), 4).add_to(&mut expected);
    assert_eq!(rx.samples(), &expected[..]);
}

#[test]
fn measured_snr_matches_configuration() {
    let mut scene = scenario2();
    scene.tx_rx = ChannelModel { noise_psd: scene.tx_rx.noise_psd, ..ChannelModel::free_space(1.0, 1.0, 2.0) };
    scene.link_power_db = 0.0;
    let n = 1_000_000;
    let link = IqBuffer64::new(vec![Complex::new(1.0, 0.0); n], scene.sample_rate, 0).unwrap();
    let rx = receive(&link, &zeros(n), &scene, 5).unwrap();
    let noise: Vec<_> = rx.samples().iter().map(|s| s - Complex::new(1.0, 0.0)).collect();
    let snr = -10.0 * mean_power(&noise).log10();
    let configured = -10.0 * scene.noise_power().log10();
    assert!((snr - configured).abs() < 0.2, "{snr} vs {configured}");
}

#[test]
fn same_seed_same_noise() {
    let scene = scenario1();
    let a = receive(&zeros(2000), &zeros(2000), &scene, 11).unwrap();
    let b = receive(&zeros(2000), &zeros(2000), &scene, 11).unwrap();
    let c = receive(&zeros(2000), &zeros(2000), &scene, 12).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn interference_power_falls_with_distance() {
    let base = quiet(scenario3());
    let i = white(20_000, 6);
    let mut last = f64::INFINITY;
    for d in base.interferer_sweep.clone().unwrap().distances() {
        let p = receive(&zeros(20_000), &i, &base.with_interferer_distance(d), 0).unwrap().mean_power();
        assert!(p < last, "{d} m");
        last = p;
    }
}

#[test]
fn scene_json_round_trip() {
    for scene in [scenario1(), scenario2(), scenario3()] {
        let text = serde_json::to_string_pretty(&scene).unwrap();
        let back: SceneConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, scene);
    }
}

fn tap_strategy() -> impl Strategy<Value = Vec<Tap>> {
    prop::collection::vec((1usize..4, -1.0f64..1.0, -1.0f64..1.0), 1..5).prop_map(|v| {
        let mut delay = 0;
        v.into_iter()
            .enumerate()
            .map(|(i, (step, re, im))| {
                if i > 0 {
                    delay += step;
                }
                Tap::new(delay, Complex::new(re, im))
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn receive_is_linear_without_noise(taps in tap_strategy(), seed in 0u64..1000, d in 1.0f64..50.0) {
        let mut scene = quiet(scenario2());
        scene.tx_rx.multipath_taps = taps.clone();
        scene.interferer_rx.multipath_taps = taps;
        scene.interferer_rx.distance = d;
        let a = white(256, seed);
        let b = white(256, seed + 1);
        let i = white(256, seed + 2);
        let sum = a.with_samples(a.samples().iter().zip(b.samples()).map(|(x, y)| x + y).collect());
        let lhs = receive(&sum, &i, &scene, 0).unwrap();
        let ra = receive(&a, &i, &scene, 0).unwrap();
        let rb = receive(&b, &zeros(256), &scene, 0).unwrap();
        for ((l, x), y) in lhs.samples().iter().zip(ra.samples()).zip(rb.samples()) {
            prop_assert!((l - (x + y)).norm() < 1e-12);
        }
    }

    #[test]
    fn path_loss_grows_with_distance(d1 in 1.0f64..500.0, k in 1.001f64..10.0, n in 1.5f64..6.0) {
        let near = ChannelModel::free_space(d1, 1.0, n);
        let far = ChannelModel::free_space(d1 * k, 1.0, n);
        prop_assert!(far.path_loss_db() > near.path_loss_db());
    }
}

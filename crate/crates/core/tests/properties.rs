use lesionseg::imageproc::{lab_lightness, preprocess_to, resize_bilinear, rgb_to_hsv, FloatImage, RawImage};
use lesionseg::postprocess::{fill_holes, BinaryMask};
use lesionseg::training::{
    apply_contrast, augment_geometric, jaccard_loss, jaccard_loss_grad, AdamConfig, AdamState, AugmentConfig,
    GeometricTransform,
};
use lesionseg::Tensor;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn binary_and_prob(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (
        proptest::collection::vec(prop_oneof![Just(0.0), Just(1.0)], n),
        proptest::collection::vec(0.001f64..0.999, n),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn loss_in_unit_interval((t, p) in binary_and_prob(24)) {
        let l = jaccard_loss(&t, &p, 1.0).unwrap();
        prop_assert!((0.0..1.0).contains(&l));
    }

    #[test]
    fn loss_ignores_true_negatives((t, p) in binary_and_prob(16), extra in 1usize..500) {
        let base = jaccard_loss(&t, &p, 1.0).unwrap();
        let (mut t2, mut p2) = (t.clone(), p.clone());
        t2.extend(std::iter::repeat_n(0.0, extra));
        p2.extend(std::iter::repeat_n(0.0, extra));
        prop_assert_eq!(jaccard_loss(&t2, &p2, 1.0).unwrap(), base);
    }

    #[test]
    fn loss_is_permutation_invariant((t, p) in binary_and_prob(20), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut idx: Vec<usize> = (0..t.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let tp: Vec<f64> = idx.iter().map(|&i| t[i]).collect();
        let pp: Vec<f64> = idx.iter().map(|&i| p[i]).collect();
        let (a, b) = (jaccard_loss(&t, &p, 1.0).unwrap(), jaccard_loss(&tp, &pp, 1.0).unwrap());
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn loss_gradient_matches_central_differences((t, p) in binary_and_prob(64)) {
        let g = jaccard_loss_grad(&t, &p, 1.0).unwrap();
        let h = 1e-6;
        for i in 0..p.len() {
            let (mut hi, mut lo) = (p.clone(), p.clone());
            hi[i] += h;
            lo[i] -= h;
            let num = (jaccard_loss(&t, &hi, 1.0).unwrap() - jaccard_loss(&t, &lo, 1.0).unwrap()) / (2.0 * h);
            prop_assert!((g[i] - num).abs() / g[i].abs().max(1.0) < 1e-6, "pixel {}: {} vs {}", i, g[i], num);
        }
    }

    #[test]
    fn adam_first_step_is_lr_sized(g in proptest::collection::vec(prop_oneof![-5.0f64..-0.01, 0.01f64..5.0], 1..20)) {
        let n = g.len();
        let mut p = Tensor::<f64>::zeros([1, 1, 1, n]);
        let mut q = Tensor::<f64>::zeros([1, 1, 1, n]);
        let grads = [
            Tensor::from_vec([1, 1, 1, n], g.clone()).unwrap(),
            Tensor::from_vec([1, 1, 1, n], g.iter().map(|v| v * 10.0).collect()).unwrap(),
        ];
        let cfg = AdamConfig::default();
        let mut state = AdamState::new([&p, &q]);
        state.step(&mut [&mut p, &mut q], &grads, &cfg).unwrap();
        prop_assert_eq!(state.steps(), 1);
        for ((&a, &b), &gi) in p.data().iter().zip(q.data()).zip(&g) {
            prop_assert!(a.abs() >= 0.99 * cfg.learning_rate && a.abs() <= cfg.learning_rate);
            prop_assert_eq!(a.signum(), -gi.signum());
            // Differ only through epsilon: |a - b| <= lr * eps / |g|.
            prop_assert!((a - b).abs() <= cfg.learning_rate * cfg.epsilon / gi.abs() + 1e-15);
        }
        prop_assert!(state.second_moment(0).iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn augmentation_keeps_ranges(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = FloatImage::from_fn(7, 12, 16, |c, y, x| ((c * 5 + y * 3 + x) % 9) as f32 / 8.0);
        let mask = BinaryMask::from_fn(12, 16, |y, x| (y as i32 - 6).pow(2) + (x as i32 - 8).pow(2) < 12);
        let cfg = AugmentConfig::default();
        let (i, m) = augment_geometric(&img, &mask, &mut rng, &cfg).unwrap();
        prop_assert!(i.data().iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert_eq!((m.height(), m.width()), (12, 16));
        let tf = GeometricTransform::sample(&cfg, 12, 16, &mut rng);
        prop_assert!(tf.apply_mask(&mask).data().len() == 12 * 16);
    }

    #[test]
    fn contrast_stays_in_range(gains in proptest::collection::vec(0.0f64..3.0, 3), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = FloatImage::from_fn(3, 5, 6, |_, _, _| rand::Rng::gen::<f32>(&mut rng));
        let out = apply_contrast(&img, &gains).unwrap();
        prop_assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn preprocess_planes_in_unit_range(w in 1usize..24, h in 1usize..24, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let px: Vec<u8> = (0..w * h * 3).map(|_| rand::Rng::gen(&mut rng)).collect();
        let img = preprocess_to(&RawImage::new(w, h, px).unwrap(), 16, 32).unwrap();
        prop_assert_eq!((img.channels(), img.height(), img.width()), (7, 16, 32));
        prop_assert!(img.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn achromatic_input_has_zero_saturation(levels in proptest::collection::vec(any::<u8>(), 12)) {
        let px: Vec<u8> = levels.iter().flat_map(|&v| [v, v, v]).collect();
        let img = preprocess_to(&RawImage::new(4, 3, px).unwrap(), 3, 4).unwrap();
        prop_assert!(img.plane(4).iter().all(|&s| s == 0.0));
        prop_assert_eq!(img.plane(5), img.plane(0));
    }

    #[test]
    fn resize_within_input_range(h in 1usize..12, w in 1usize..12, oh in 1usize..30, ow in 1usize..30, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = FloatImage::from_fn(1, h, w, |_, _, _| rand::Rng::gen::<f32>(&mut rng));
        let out = resize_bilinear(&img, oh, ow);
        let lo = img.data().iter().cloned().fold(f32::INFINITY, f32::min);
        let hi = img.data().iter().cloned().fold(f32::NEG_INFINITY, f32::max);
        prop_assert!(out.data().iter().all(|&v| v >= lo && v <= hi));
    }

    #[test]
    fn hole_filling_never_removes_foreground(bits in proptest::collection::vec(any::<bool>(), 100)) {
        let m = BinaryMask::new(10, 10, bits).unwrap();
        prop_assert!(m.is_subset_of(&fill_holes(&m)));
    }
}

#[test]
fn colour_reference_points() {
    let (h, s, v) = rgb_to_hsv(0.0, 1.0, 0.0);
    assert!((h - 1.0 / 3.0).abs() < 1e-12 && s == 1.0 && v == 1.0);
    assert_eq!(rgb_to_hsv(0.5, 0.5, 0.5), (0.0, 0.0, 0.5));
    assert!((lab_lightness(1.0, 1.0, 1.0) - 1.0).abs() < 1e-9);
    assert_eq!(lab_lightness(0.0, 0.0, 0.0), 0.0);
    // Reference formula: sRGB 0.5 -> linear 0.214041, Y = 0.214041,
    // L* = 116 * Y^(1/3) - 16 = 53.3890.
    let y: f64 = ((0.5 + 0.055) / 1.055f64).powf(2.4);
    let reference = (116.0 * y.cbrt() - 16.0) / 100.0;
    assert!((lab_lightness(0.5, 0.5, 0.5) - reference).abs() < 1e-9);
    assert!((reference - 0.534).abs() < 5e-4);
}

#[test]
fn checkerboard_corners_survive_upscaling() {
    let img = FloatImage::new(1, 2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
    let out = resize_bilinear(&img, 4, 4);
    assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
    assert_eq!(
        (out.get(0, 0, 0), out.get(0, 0, 3), out.get(0, 3, 0), out.get(0, 3, 3)),
        (0.0, 1.0, 1.0, 0.0)
    );
}

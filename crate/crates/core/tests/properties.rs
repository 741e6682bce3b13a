mod common;

use adt_ssl::augment::{AugmentMode, AugmentPolicy, FeatureRange};
use adt_ssl::losses::{gate, similar_loss, total_loss, SimilarTuple};
use adt_ssl::prob::{bhattacharyya, ema_prob, ema_update, one_hot, sharpen};
use adt_ssl::{Augmenter, Image, LossWeights, ProbVector, Route, Sample, SampleData, ThresholdRegistry};
use proptest::prelude::*;

fn dist(max_c: usize) -> impl Strategy<Value = ProbVector> {
    prop::collection::vec(1e-6f64..1.0, 2..=max_c).prop_map(|w| {
        let s: f64 = w.iter().sum();
        ProbVector::new(w.into_iter().map(|x| x / s).collect()).unwrap()
    })
}

fn dist_pair(max_c: usize) -> impl Strategy<Value = (ProbVector, ProbVector)> {
    (2..=max_c).prop_flat_map(|c| {
        let one = prop::collection::vec(1e-6f64..1.0, c).prop_map(|w| {
            let s: f64 = w.iter().sum();
            ProbVector::new(w.into_iter().map(|x| x / s).collect()).unwrap()
        });
        (one.clone(), one)
    })
}

/// One observation: class, confidence, and whether the prediction is correct.
fn observation(c: usize) -> impl Strategy<Value = (usize, f64, bool)> {
    (0..c, 0.51f64..1.0, any::<bool>())
}

/// A two-class prediction with max `conf` on `class` (or on the other class
/// when `correct` is false).
fn pred2(class: usize, conf: f64, correct: bool) -> ProbVector {
    let mut v = vec![1.0 - conf; 2];
    v[if correct { class } else { 1 - class }] = conf;
    ProbVector::new(v).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn sharpen_preserves_argmax_and_concentrates(p in dist(10), t in 0.05f64..=1.0) {
        let s = sharpen(&p, t).unwrap();
        prop_assert_eq!(s.argmax(), p.argmax());
        prop_assert!(s.max() >= p.max() - 1e-12);
        prop_assert!(s.entropy() <= p.entropy() + 1e-9);
        prop_assert!((s.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn gate_routes_partition_and_adaptive_gate_extends_fixed(
        (q_bar, t) in dist(6).prop_flat_map(|q| { let c = q.len(); (Just(q), prop::collection::vec(0.01f64..=0.95, c)) }),
        temperature in 0.1f64..=1.0,
        tau in 0.05f64..=1.0,
    ) {
        let q_hat = sharpen(&q_bar, temperature).unwrap();
        let mut reg = ThresholdRegistry::new(q_bar.len()).unwrap();
        for (c, &v) in t.iter().enumerate() {
            reg.set_threshold(c, v).unwrap();
        }
        let d = gate(&q_bar, &q_hat, tau, &reg).unwrap();
        let high = q_hat.max() >= tau;
        let mid = !high && q_bar.max() > t[q_bar.argmax()];
        let expected = if high { Route::HighConf } else if mid { Route::MidConf } else { Route::Discarded };
        prop_assert_eq!(d.route, expected);
        prop_assert_eq!(d.anchor.is_some(), d.route != Route::Discarded);
        if high {
            prop_assert!(d.route != Route::Discarded);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn bhattacharyya_symmetric_and_bounded((p, q) in dist_pair(8)) {
        let a = bhattacharyya(&p, &q).unwrap();
        prop_assert_eq!(a, bhattacharyya(&q, &p).unwrap());
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((bhattacharyya(&p, &p).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn one_hot_marks_the_first_maximum(p in dist(8)) {
        let h = one_hot(&p);
        prop_assert_eq!(h.argmax(), p.argmax());
        prop_assert_eq!(h.as_slice().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn ema_of_distributions_stays_a_distribution((p, q) in dist_pair(8), decay in 0.0f64..1.0) {
        let e = ema_prob(&p, &q, decay).unwrap();
        prop_assert!((e.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let raw = ema_update(p.as_slice(), q.as_slice(), decay).unwrap();
        for ((x, a), b) in raw.iter().zip(p.as_slice()).zip(q.as_slice()) {
            prop_assert!(*x >= a.min(*b) - 1e-15 && *x <= a.max(*b) + 1e-15);
        }
    }

    #[test]
    fn thresholds_never_rise_within_an_epoch(obs in prop::collection::vec(observation(2), 0..40)) {
        let mut reg = ThresholdRegistry::new(2).unwrap();
        reg.begin_epoch();
        let mut prev = reg.current().to_vec();
        for (c, conf, ok) in obs {
            reg.observe_labeled(c, &pred2(c, conf, ok)).unwrap();
            for k in 0..2 {
                prop_assert!(reg.current()[k] <= prev[k]);
                prop_assert!(reg.current()[k] <= 0.95);
            }
            prev = reg.current().to_vec();
        }
    }

    #[test]
    fn observations_only_touch_their_class(obs in prop::collection::vec(observation(2), 1..40)) {
        let mut reg = ThresholdRegistry::new(3).unwrap();
        reg.set_threshold(2, 0.7).unwrap();
        reg.begin_epoch();
        for (c, conf, ok) in obs {
            let before = reg.clone();
            let mut v = vec![(1.0 - conf) / 2.0; 3];
            v[if ok { c } else { 2 }] = conf;
            reg.observe_labeled(c, &ProbVector::new(v).unwrap()).unwrap();
            for k in (0..3).filter(|&k| k != c) {
                prop_assert_eq!(reg.current()[k], before.current()[k]);
                prop_assert_eq!(reg.scratch()[k], before.scratch()[k]);
            }
        }
    }

    #[test]
    fn observation_order_does_not_matter(
        obs in prop::collection::vec(observation(2), 0..30).prop_shuffle().prop_flat_map(|v| (Just(v.clone()), Just(v).prop_shuffle())),
        start in prop::collection::vec(0.2f64..=0.95, 2),
    ) {
        let (a, b) = obs;
        let run = |seq: &[(usize, f64, bool)]| {
            let mut reg = ThresholdRegistry::new(2).unwrap();
            reg.set_threshold(0, start[0]).unwrap();
            reg.set_threshold(1, start[1]).unwrap();
            reg.begin_epoch();
            for &(c, conf, ok) in seq {
                reg.observe_labeled(c, &pred2(c, conf, ok)).unwrap();
            }
            reg
        };
        let (ra, rb) = (run(&a), run(&b));
        prop_assert_eq!(ra.current(), rb.current());
        prop_assert_eq!(ra.scratch(), rb.scratch());
        // both are running minima floored by the epoch-start values
        for k in 0..2 {
            let m = a.iter().filter(|o| o.0 == k && o.2).map(|o| o.1).fold(f64::INFINITY, f64::min);
            prop_assert_eq!(ra.current()[k], m.min(start[k]));
            prop_assert_eq!(ra.scratch()[k], m.min(0.95));
        }
    }

    #[test]
    fn end_of_epoch_promotes_the_larger_value(
        start in prop::collection::vec(0.2f64..=0.95, 2),
        obs in prop::collection::vec(observation(2), 0..30),
    ) {
        let mut reg = ThresholdRegistry::new(2).unwrap();
        reg.set_threshold(0, start[0]).unwrap();
        reg.set_threshold(1, start[1]).unwrap();
        reg.begin_epoch();
        for (c, conf, ok) in obs {
            reg.observe_labeled(c, &pred2(c, conf, ok)).unwrap();
        }
        let (cur, scr) = (reg.current().to_vec(), reg.scratch().to_vec());
        reg.end_epoch();
        for k in 0..2 {
            prop_assert_eq!(reg.current()[k], cur[k].max(scr[k]));
            prop_assert!(reg.current()[k] <= 0.95);
        }
    }

    #[test]
    fn similar_loss_ignores_tuple_order(
        seed in any::<u64>(),
        tau in 0.5f64..1.0,
        ts in 0.3f64..1.0,
    ) {
        use rand::SeedableRng;
        use rand::seq::SliceRandom;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let c = 3;
        let n = 6;
        let mut tuples: Vec<SimilarTuple<ProbVector>> = (0..n)
            .map(|_| {
                let q_bar = common::prob(common::random_dist(&mut rng, c, 5.0));
                SimilarTuple {
                    view: common::prob(common::random_dist(&mut rng, c, 3.0)),
                    q_hat: sharpen(&q_bar, 0.5).unwrap(),
                    q_bar,
                }
            })
            .collect();
        let eval = |p: &ProbVector| Ok(p.clone());
        let a = similar_loss(&tuples, tau, ts, eval).unwrap();
        tuples.shuffle(&mut rng);
        let b = similar_loss(&tuples, tau, ts, eval).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn total_loss_is_non_negative(
        l in prop::collection::vec(0.0f64..10.0, 4),
        w in prop::collection::vec(0.0f64..300.0, 3),
    ) {
        let weights = LossWeights::new(w[0], w[1], w[2]).unwrap();
        let t = total_loss(l[0], l[1], l[2], l[3], &weights).unwrap();
        prop_assert!(t >= 0.0);
    }

    #[test]
    fn vector_views_keep_dimension_range_and_determinism(
        v in prop::collection::vec(-3.0f64..3.0, 1..8),
        seed in any::<u64>(),
    ) {
        let d = v.len();
        let range = FeatureRange { min: vec![-3.0; d], max: vec![3.0; d] };
        let aug = Augmenter::new(2, 0.5, Some(range)).unwrap();
        let s = Sample::vector(1, v);
        for view in [aug.weak(&s, seed), aug.strong(&s, seed)] {
            prop_assert_eq!(view.dim(), d);
            prop_assert!(view.features().iter().all(|x| (-3.0..=3.0).contains(x)));
        }
        prop_assert_eq!(aug.weak(&s, seed), aug.weak(&s, seed));
        prop_assert_eq!(aug.strong(&s, seed), aug.strong(&s, seed));
    }

    #[test]
    fn image_views_stay_in_the_unit_range(
        px in prop::collection::vec(0.0f64..=1.0, 36),
        seed in any::<u64>(),
        ops in 1usize..4,
        magnitude in 0.0f64..=1.0,
    ) {
        let img = Image::new(6, 6, 1, px).unwrap();
        let s = Sample::image(3, img);
        let aug = Augmenter::new(ops, magnitude, None).unwrap();
        for view in [aug.weak(&s, seed), aug.strong(&s, seed)] {
            let SampleData::Image(out) = &view.data else { panic!("image expected") };
            prop_assert_eq!((out.height, out.width), (6, 6));
            prop_assert!(view.features().iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn weak_policy_ignores_strong_settings(seed in any::<u64>(), ops in 0usize..5, magnitude in 0.0f64..=1.0) {
        let s = Sample::vector(9, vec![0.1, 0.2, 0.3]);
        let aug = Augmenter::default();
        let policy = AugmentPolicy { mode: AugmentMode::Weak, rng_seed: seed, strong_ops_per_sample: ops, magnitude };
        prop_assert_eq!(aug.apply(&s, &policy), aug.weak(&s, seed));
    }
}

#[test]
fn strong_views_move_further_than_weak_ones() {
    let aug = Augmenter::default();
    let s = Sample::vector(4, vec![1.0; 16]);
    let dist = |v: &Sample| v.features().iter().map(|x| (x - 1.0).powi(2)).sum::<f64>().sqrt();
    let (mut weak, mut strong) = (0.0, 0.0);
    for seed in 0..500 {
        weak += dist(&aug.weak(&s, seed));
        strong += dist(&aug.strong(&s, seed));
    }
    assert!(strong > 2.0 * weak, "weak {weak}, strong {strong}");
}

#[test]
fn zero_observation_epoch_restores_the_initial_threshold() {
    let mut reg = ThresholdRegistry::new(2).unwrap();
    reg.set_threshold(0, 0.62).unwrap();
    reg.begin_epoch();
    reg.end_epoch();
    assert_eq!(reg.current(), &[0.95, 0.95]);
}

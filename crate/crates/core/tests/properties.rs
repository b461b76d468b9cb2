//! Property tests over randomly drawn inputs.

use proptest::prelude::*;

use gazedp_core::dataset::{downsample, GazeSample};
use gazedp_core::dpmap::{
    adversary_advantage, advantage_to_epsilon, g_of_l, map_level, MappingKind, MappingSpec,
    PrivacyBudget,
};
use gazedp_core::mechanisms::sample_inclusion_probability;
use gazedp_core::stats::{kruskal_wallis, mann_whitney_u};

fn arbitrary_spec() -> impl Strategy<Value = MappingSpec> {
    (
        prop_oneof![
            Just(MappingKind::Linear),
            Just(MappingKind::Exponential),
            Just(MappingKind::Sequential),
            Just(MappingKind::Sigmoid),
        ],
        0.01f64..2.0,
        0.1f64..10.0,
        5u32..=11,
        0.2f64..4.0,
    )
        .prop_map(|(kind, eps_min, gap, levels, k)| {
            MappingSpec::new(kind, eps_min, eps_min + gap, levels)
                .unwrap()
                .with_steepness(k)
                .unwrap()
        })
}

proptest! {
    #[test]
    fn advantage_round_trip_in_working_range(eps in 1e-6f64..10.0) {
        let back = advantage_to_epsilon(adversary_advantage(eps).unwrap()).unwrap();
        prop_assert!((back - eps).abs() < 1e-9);
    }

    #[test]
    fn mapped_budgets_are_monotone_and_clamped(spec in arbitrary_spec()) {
        let mut prev = 0.0;
        for level in 1..=spec.levels {
            let eps = map_level(&spec, level).unwrap().epsilon();
            prop_assert!(eps >= prev - 1e-12, "level {level}: {eps} < {prev}");
            prop_assert!(eps >= spec.eps_min - 1e-12 && eps <= spec.eps_max + 1e-12);
            let g = g_of_l(&spec, level).unwrap();
            prop_assert!((0.0..1.0).contains(&g));
            prev = eps;
        }
        let lo = map_level(&spec, 1).unwrap().epsilon();
        let hi = map_level(&spec, spec.levels).unwrap().epsilon();
        prop_assert!((lo - spec.eps_min).abs() < 1e-9);
        prop_assert!((hi - spec.eps_max).abs() < 1e-9);
    }

    #[test]
    fn inclusion_probability_behaves(eps in 1e-6f64..20.0, t in 1e-3f64..20.0) {
        let p = sample_inclusion_probability(
            PrivacyBudget::new(eps).unwrap(),
            PrivacyBudget::new(t).unwrap(),
        ).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        if eps >= t {
            prop_assert_eq!(p, 1.0);
        } else {
            let p2 = sample_inclusion_probability(
                PrivacyBudget::new(eps * 1.1).unwrap(),
                PrivacyBudget::new(t).unwrap(),
            ).unwrap();
            prop_assert!(p2 >= p);
        }
    }

    #[test]
    fn downsample_idempotent_and_ordered(
        gaps in prop::collection::vec(1i64..5_000, 1..200),
        target in 5.0f64..500.0,
    ) {
        let mut t = 0i64;
        let samples: Vec<GazeSample> = gaps
            .iter()
            .map(|&gap| {
                t += gap;
                GazeSample { t_us: t, x_px: 0.0, y_px: 0.0, pupil: None, valid: true }
            })
            .collect();
        let once = downsample(&samples, target).unwrap();
        let twice = downsample(&once, target).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(once[0], samples[0]);
        let period = (1e6 / target) as i64;
        for w in once.windows(2) {
            prop_assert!(w[1].t_us - w[0].t_us >= period);
        }
    }

    #[test]
    fn mann_whitney_p_is_symmetric_and_bounded(
        a in prop::collection::vec(-100.0f64..100.0, 1..12),
        b in prop::collection::vec(-100.0f64..100.0, 1..12),
    ) {
        let r1 = mann_whitney_u(&a, &b).unwrap();
        let r2 = mann_whitney_u(&b, &a).unwrap();
        prop_assert!((0.0..=1.0).contains(&r1.p_value));
        prop_assert_eq!(r1.p_value, r2.p_value);
        prop_assert_eq!(r1.statistic, r2.statistic);
    }

    #[test]
    fn kruskal_wallis_nonnegative_and_bounded(
        groups in prop::collection::vec(
            prop::collection::vec(-50.0f64..50.0, 1..10),
            2..5,
        ),
    ) {
        let r = kruskal_wallis(&groups).unwrap();
        prop_assert!(r.statistic >= 0.0);
        prop_assert!((0.0..=1.0).contains(&r.p_value));
    }
}

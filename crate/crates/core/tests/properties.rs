use std::collections::BTreeSet;

use proptest::prelude::*;
use urbanvqa_core::answer::{AnswerKind, AnswerValue, Hundredths, COUNT_CLAMP};
use urbanvqa_core::dataset::{assign_images, Ratios, Split};
use urbanvqa_core::metrics::{accuracy, mae, weighted_f1, EvalRecord};
use urbanvqa_core::parser::{format_answer, parse, ParseConfig, ParsedAnswer};
use urbanvqa_core::qa::derive::{derive_depth_answer, derive_proportion_answer, DepthRule, ProportionRule};
use urbanvqa_core::qa::Subtype;
use urbanvqa_core::{metadata, parse_metadata_record, synth, ViewFactor};

fn config() -> ParseConfig {
    ParseConfig::default()
}

fn with_factor(value: f64) -> metadata::SceneMetadata {
    let mut meta = metadata::example_scene();
    meta.view_factors.greenery = value;
    meta
}

fn with_range(range: f64) -> metadata::SceneMetadata {
    let mut meta = metadata::example_scene();
    meta.depth.range = range;
    meta
}

#[test]
fn binary_and_label_round_trip_exhaustively() {
    let cfg = config();
    for v in [AnswerValue::yes(), AnswerValue::no()] {
        assert_eq!(parse(&format_answer(&v), AnswerKind::Binary, &cfg).value, v);
    }
    for label in cfg.canonical_labels() {
        let v = AnswerValue::label(label);
        let parsed = parse(&format_answer(&v), AnswerKind::Label, &cfg);
        assert_eq!(parsed.value, v, "{label}");
        assert!(!parsed.defaulted && !parsed.clamped);
    }
}

proptest! {
    #[test]
    fn scalar_round_trip(h in 0u8..=100) {
        let v = AnswerValue::Scalar(Hundredths::new(h).unwrap());
        let parsed = parse(&format_answer(&v), AnswerKind::Scalar, &config());
        prop_assert_eq!(parsed, ParsedAnswer { kind: AnswerKind::Scalar, value: v, defaulted: false, clamped: false });
    }

    #[test]
    fn count_round_trip(n in 0u32..=COUNT_CLAMP) {
        let v = AnswerValue::Count(n);
        let parsed = parse(&format_answer(&v), AnswerKind::Count, &config());
        prop_assert_eq!(parsed, ParsedAnswer { kind: AnswerKind::Count, value: v, defaulted: false, clamped: false });
    }

    #[test]
    fn counts_above_clamp_are_reduced_to_it(n in (COUNT_CLAMP + 1)..u32::MAX) {
        let parsed = parse(&n.to_string(), AnswerKind::Count, &config());
        prop_assert_eq!(parsed.value, AnswerValue::Count(COUNT_CLAMP));
        prop_assert!(parsed.clamped);
    }

    #[test]
    fn parse_is_total(raw in "\\PC{0,80}", kind in prop::sample::select(AnswerKind::ALL.to_vec())) {
        let cfg = config();
        let parsed = parse(&raw, kind, &cfg);
        prop_assert_eq!(parsed.kind, kind);
        prop_assert_eq!(parsed.value.kind(), kind);
        if parsed.defaulted {
            prop_assert_eq!(parsed.value, cfg.default_value(kind));
        }
    }

    #[test]
    fn parse_is_total_on_marker_soup(parts in prop::collection::vec(
        prop::sample::select(vec!["answer:", "yes", "no", "0.5", "3", "car", "is closest", "%", ".", " ", "not"]), 0..12),
        kind in prop::sample::select(AnswerKind::ALL.to_vec()))
    {
        let raw = parts.concat();
        let parsed = parse(&raw, kind, &config());
        prop_assert_eq!(parsed.value.kind(), kind);
    }

    #[test]
    fn dominance_and_sparsity_are_exclusive(p in 0.0f64..=1.0) {
        let meta = with_factor(p);
        let dominant = derive_proportion_answer(&meta, ViewFactor::Greenery, ProportionRule::Dominance);
        let sparse = derive_proportion_answer(&meta, ViewFactor::Greenery, ProportionRule::Sparsity);
        prop_assert!(!(dominant == AnswerValue::yes() && sparse == AnswerValue::yes()));
    }

    #[test]
    fn proportion_rules_are_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let ask = |p, rule| derive_proportion_answer(&with_factor(p), ViewFactor::Greenery, rule);
        if ask(lo, ProportionRule::Dominance) == AnswerValue::yes() {
            prop_assert_eq!(ask(hi, ProportionRule::Dominance), AnswerValue::yes());
        }
        if ask(hi, ProportionRule::Sparsity) == AnswerValue::yes() {
            prop_assert_eq!(ask(lo, ProportionRule::Sparsity), AnswerValue::yes());
        }
        let scalar = |p| match ask(p, ProportionRule::Scalar) {
            AnswerValue::Scalar(h) => h.get(),
            other => panic!("{other:?}"),
        };
        prop_assert!(scalar(lo) <= scalar(hi));
    }

    #[test]
    fn depth_category_is_monotone(a in 0.0f64..200.0, b in 0.0f64..200.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let level = |r| match derive_depth_answer(&with_range(r), DepthRule::Categorical).unwrap() {
            AnswerValue::Label(l) => ["low", "moderate", "high"].iter().position(|x| *x == l).unwrap(),
            other => panic!("{other:?}"),
        };
        prop_assert!(level(lo) <= level(hi));
    }

    #[test]
    fn metrics_ignore_record_order(
        pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..60),
        counts in prop::collection::vec((0u32..20, 0u32..20), 1..60),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let binary: Vec<EvalRecord> = pairs.iter().map(|&(g, p)| record(Subtype::ObjectPresence, AnswerValue::Binary(g), AnswerValue::Binary(p))).collect();
        let numeric: Vec<EvalRecord> = counts.iter().map(|&(g, p)| record(Subtype::ObjectCount, AnswerValue::Count(g), AnswerValue::Count(p))).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut b2 = binary.clone();
        b2.shuffle(&mut rng);
        let mut n2 = numeric.clone();
        n2.shuffle(&mut rng);
        prop_assert!((accuracy(&binary).unwrap() - accuracy(&b2).unwrap()).abs() < 1e-12);
        prop_assert!((weighted_f1(&binary).unwrap() - weighted_f1(&b2).unwrap()).abs() < 1e-12);
        prop_assert!((mae(&numeric).unwrap() - mae(&n2).unwrap()).abs() < 1e-9);
        let f1 = weighted_f1(&binary).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&f1));
    }

    #[test]
    fn split_is_a_partition(n in 1usize..400, seed in any::<u64>()) {
        let ids: Vec<String> = (0..n).map(|i| format!("img_{i}")).collect();
        let a = assign_images(ids.iter().cloned(), Ratios::default(), seed).unwrap();
        prop_assert_eq!(a.images.keys().cloned().collect::<BTreeSet<_>>(), ids.iter().cloned().collect::<BTreeSet<_>>());
        let counts = a.image_counts();
        prop_assert_eq!(counts.values().sum::<usize>(), n);
        for (split, share) in [(Split::Train, 0.7), (Split::Val, 0.2), (Split::Test, 0.1)] {
            prop_assert!((counts[&split] as f64 - share * n as f64).abs() <= 1.0);
        }
        prop_assert_eq!(a, assign_images(ids.iter().rev().cloned(), Ratios::default(), seed).unwrap());
    }

    #[test]
    fn metadata_json_round_trips(seed in any::<u64>(), index in 0usize..10_000) {
        let meta = synth::scene(seed, index);
        prop_assert_eq!(parse_metadata_record(&meta.to_json()).unwrap(), meta);
    }
}

fn record(subtype: Subtype, gold: AnswerValue, pred: AnswerValue) -> EvalRecord {
    EvalRecord {
        qa_id: String::new(),
        subtype,
        gold,
        prediction: ParsedAnswer {
            kind: pred.kind(),
            value: pred,
            defaulted: false,
            clamped: false,
        },
    }
}

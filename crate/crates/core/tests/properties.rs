//! Property tests for the structural invariants: id encoding bijectivity,
//! label parsing totality, Shapley efficiency, and feature hashing.

use proptest::prelude::*;

use promptcomp_core::game::CompositionGame;
use promptcomp_core::gateway::parse_label;
use promptcomp_core::shapley::{exact_shapley, pairwise_sii, two_sii};
use promptcomp_core::{
    count_compositions, decode, encode, featurize, enumerate_compositions, CompositionId,
    CompositionSpace, GatewayConfig, TechniqueConfig,
};

fn arb_space() -> impl Strategy<Value = CompositionSpace> {
    proptest::collection::vec(0usize..=3, 1..=6).prop_map(|variant_counts| {
        let configs: Vec<TechniqueConfig> = variant_counts
            .iter()
            .enumerate()
            .map(|(i, &v)| TechniqueConfig {
                name: format!("t{i}"),
                variants: (0..v).map(|k| format!("v{k}")).collect(),
            })
            .collect();
        CompositionSpace::new("prop", &configs).unwrap()
    })
}

proptest! {
    #[test]
    fn count_matches_radix_product(space in arb_space()) {
        let expected: u64 = space.techniques.iter().map(|t| t.radix()).product();
        prop_assert_eq!(count_compositions(&space), expected);
        let all = enumerate_compositions(&space, expected).unwrap();
        prop_assert_eq!(all.len() as u64, expected);
    }

    #[test]
    fn encode_decode_round_trips(space in arb_space()) {
        let count = count_compositions(&space);
        for id in 0..count {
            let composition = decode(CompositionId(id), &space).unwrap();
            prop_assert_eq!(encode(&composition, &space), CompositionId(id));
        }
        prop_assert!(decode(CompositionId(count), &space).is_err());
    }

    #[test]
    fn parse_label_is_total(raw in "\\PC*") {
        let config = GatewayConfig::mock("correct");
        // Any string maps to exactly one of {Some(1), Some(0), None} without
        // panicking.
        let parsed = parse_label(&raw, &config);
        prop_assert!(matches!(parsed, Some(0) | Some(1) | None));
    }

    #[test]
    fn parse_label_accepts_decorated_labels(
        leading in "[ \\t]*",
        punct in "[.,!?:;]{0,2}",
        yes in proptest::bool::ANY,
    ) {
        let config = GatewayConfig::mock("correct");
        let word = if yes { "Yes" } else { "no" };
        let raw = format!("{leading}{word}{punct} because of reasons");
        prop_assert_eq!(parse_label(&raw, &config), Some(u8::from(yes)));
    }

    #[test]
    fn shapley_efficiency_on_random_games(
        values in proptest::collection::vec(-1.0f64..1.0, 1usize << 4),
    ) {
        let game = CompositionGame::from_values(values, "test");
        let sv = exact_shapley(&game).unwrap();
        let total: f64 = sv.iter().sum();
        prop_assert!((total - (game.full_value() - game.baseline())).abs() < 1e-9);

        let report = two_sii(&game).unwrap();
        let decomposed: f64 = report.two_sii_order1.iter().sum::<f64>()
            + pairwise_sii(&game).unwrap().iter().map(|p| p.value).sum::<f64>();
        prop_assert!((decomposed - (game.full_value() - game.baseline())).abs() < 1e-9);
    }

    #[test]
    fn featurize_is_unit_normalized_and_stable(text in "[a-z ]{1,80}") {
        let a = featurize(&text, 1 << 12);
        let b = featurize(&text, 1 << 12);
        prop_assert_eq!(&a, &b);
        if !a.is_empty() {
            let norm: f64 = a.iter().map(|(_, v)| v * v).sum::<f64>();
            prop_assert!((norm - 1.0).abs() < 1e-9);
            // Indices are strictly ascending and in range.
            for pair in a.windows(2) {
                prop_assert!(pair[0].0 < pair[1].0);
            }
            prop_assert!(a.last().unwrap().0 < (1 << 12));
        }
    }
}

//! Synthetic corpus with a planted per-instance optimum: each instance text
//! carries a marker token naming the only composition that classifies it
//! correctly under the mock backend's marker rule. Fixed compositions are
//! then weak by construction while a per-instance selector can be perfect.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Instance, Split};
use crate::error::Result;
use crate::gateway::mock::MARKER_PREFIX;
use crate::space::{count_compositions, CompositionSpace, TechniqueConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            train: 1000,
            validation: 200,
            test: 200,
            seed: 17,
        }
    }
}

/// Three singleton techniques: 8 compositions, all renderable without
/// demonstrations so marker tokens never leak between instances.
pub fn planted_space() -> CompositionSpace {
    CompositionSpace::new(
        "planted",
        &[
            TechniqueConfig { name: "persona".into(), variants: vec![] },
            TechniqueConfig { name: "definition".into(), variants: vec![] },
            TechniqueConfig { name: "stimulus".into(), variants: vec![] },
        ],
    )
    .expect("planted space is valid")
}

const FILLER: &[&str] = &[
    "report", "mentions", "people", "group", "often", "workers", "always", "story", "claims",
    "about", "members", "usually", "neighbors", "team", "rarely", "crowd",
];

const CATEGORIES: &[&str] = &["race", "gender", "profession", "religion"];

fn instance_text(rng: &mut ChaCha8Rng, marker: u64) -> String {
    let lead: Vec<&str> = (0..rng.gen_range(3..6))
        .map(|_| *FILLER.choose(rng).unwrap())
        .collect();
    let tail: Vec<&str> = (0..rng.gen_range(3..6))
        .map(|_| *FILLER.choose(rng).unwrap())
        .collect();
    format!("{} {MARKER_PREFIX}{marker} {}", lead.join(" "), tail.join(" "))
}

/// Generate the planted corpus. Markers cycle over the composition ids and
/// labels alternate, so every (marker, label) cell is populated evenly in
/// every split.
pub fn generate_planted_corpus(config: &SyntheticConfig) -> Result<Vec<Instance>> {
    let compositions = count_compositions(&planted_space());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut instances = Vec::with_capacity(config.train + config.validation + config.test);
    let splits = [
        (Split::Train, "train", config.train),
        (Split::Validation, "val", config.validation),
        (Split::Test, "test", config.test),
    ];
    for (split, prefix, count) in splits {
        for i in 0..count {
            let marker = (i as u64) % compositions;
            // Alternate labels per marker cycle so marker and label stay
            // uncorrelated.
            let label = ((i / compositions as usize) % 2) as u8;
            instances.push(Instance {
                id: format!("{prefix}-{i:04}"),
                text: instance_text(&mut rng, marker),
                label,
                category: Some(CATEGORIES[i % CATEGORIES.len()].to_string()),
                split,
            });
        }
    }
    Ok(instances)
}

/// The planted optimal composition id, recovered from the instance text.
pub fn planted_marker(instance: &Instance) -> Option<u64> {
    let start = instance.text.find(MARKER_PREFIX)? + MARKER_PREFIX.len();
    instance.text[start..]
        .chars()
        .take_while(|c| c.is_ascii_digit())
        .collect::<String>()
        .parse()
        .ok()
}

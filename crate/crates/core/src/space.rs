//! Techniques, ordering/compatibility constraints, and enumeration of the
//! composition space.
//!
//! The space is an ordered list of techniques. Singleton techniques are either
//! absent or present; variant-group techniques are absent or carry exactly one
//! of their variants. Compositions are keyed by a mixed-radix integer id where
//! the least-significant digit belongs to technique 0.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CoreError, Result};
use crate::game::Coalition;

/// Default upper bound on the number of enumerable compositions.
pub const DEFAULT_ENUMERATION_CAP: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TechniqueKind {
    Singleton,
    VariantGroup,
}

/// One prompting technique in the fixed prompt order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Technique {
    pub id: usize,
    pub name: String,
    /// Empty for singletons; the ordered variant names for variant groups.
    pub variants: Vec<String>,
}

impl Technique {
    pub fn kind(&self) -> TechniqueKind {
        if self.variants.is_empty() {
            TechniqueKind::Singleton
        } else {
            TechniqueKind::VariantGroup
        }
    }

    /// Number of states in the mixed-radix digit for this technique:
    /// 2 for singletons, |variants| + 1 for variant groups.
    pub fn radix(&self) -> u64 {
        match self.kind() {
            TechniqueKind::Singleton => 2,
            TechniqueKind::VariantGroup => self.variants.len() as u64 + 1,
        }
    }
}

/// A technique as declared in the JSON space config: `{"name": ..., "variants": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TechniqueConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variants: Vec<String>,
}

/// The constrained lattice of technique selections.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositionSpace {
    pub name: String,
    pub techniques: Vec<Technique>,
}

impl CompositionSpace {
    /// Build a space from ordered `{name, variants?}` entries, assigning ids
    /// by position.
    pub fn new(name: impl Into<String>, configs: &[TechniqueConfig]) -> Result<Self> {
        let mut techniques = Vec::with_capacity(configs.len());
        for (id, cfg) in configs.iter().enumerate() {
            if cfg.name.trim().is_empty() {
                return Err(CoreError::InvalidSpace(format!(
                    "technique {id} has an empty name"
                )));
            }
            if configs[..id].iter().any(|c| c.name == cfg.name) {
                return Err(CoreError::InvalidSpace(format!(
                    "duplicate technique name '{}'",
                    cfg.name
                )));
            }
            for (vi, v) in cfg.variants.iter().enumerate() {
                if cfg.variants[..vi].contains(v) {
                    return Err(CoreError::InvalidSpace(format!(
                        "technique '{}' has duplicate variant '{}'",
                        cfg.name, v
                    )));
                }
            }
            techniques.push(Technique {
                id,
                name: cfg.name.clone(),
                variants: cfg.variants.clone(),
            });
        }
        Ok(CompositionSpace {
            name: name.into(),
            techniques,
        })
    }

    pub fn technique_count(&self) -> usize {
        self.techniques.len()
    }

    pub fn technique_by_name(&self, name: &str) -> Option<&Technique> {
        self.techniques.iter().find(|t| t.name == name)
    }

    /// Stable hash of the space structure, used to bind models and matrices
    /// to the space they were computed against.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.name.as_bytes());
        for t in &self.techniques {
            hasher.update([0u8]);
            hasher.update(t.name.as_bytes());
            for v in &t.variants {
                hasher.update([1u8]);
                hasher.update(v.as_bytes());
            }
        }
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Per-technique choice inside a composition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Choice {
    Absent,
    Present,
    Variant(usize),
}

/// One point in the composition space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Composition {
    pub selection: Vec<Choice>,
}

impl Composition {
    /// The base composition: no technique selected.
    pub fn base(space: &CompositionSpace) -> Self {
        Composition {
            selection: vec![Choice::Absent; space.technique_count()],
        }
    }

    pub fn is_base(&self) -> bool {
        self.selection.iter().all(|c| *c == Choice::Absent)
    }

    pub fn choice(&self, technique_id: usize) -> Choice {
        self.selection[technique_id]
    }

    /// Human-readable description, e.g. `base` or `definition+demonstrations:similarity`.
    pub fn describe(&self, space: &CompositionSpace) -> String {
        let parts: Vec<String> = space
            .techniques
            .iter()
            .filter_map(|t| match self.selection[t.id] {
                Choice::Absent => None,
                Choice::Present => Some(t.name.clone()),
                Choice::Variant(v) => Some(format!("{}:{}", t.name, t.variants[v])),
            })
            .collect();
        if parts.is_empty() {
            "base".to_string()
        } else {
            parts.join("+")
        }
    }
}

/// Mixed-radix integer key for a composition. Serialized as a decimal integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CompositionId(pub u64);

/// Number of compositions: 2^|T1| * prod over variant groups of (|t| + 1).
pub fn count_compositions(space: &CompositionSpace) -> u64 {
    space.techniques.iter().map(|t| t.radix()).product()
}

/// Enumerate all compositions ordered by id, id 0 first (the base composition).
pub fn enumerate_compositions(
    space: &CompositionSpace,
    cap: u64,
) -> Result<Vec<Composition>> {
    let count = count_compositions(space);
    if count > cap {
        return Err(CoreError::SpaceTooLarge { count, cap });
    }
    (0..count).map(|id| decode(CompositionId(id), space)).collect()
}

/// Mixed-radix encoding; least-significant digit is technique 0.
pub fn encode(c: &Composition, space: &CompositionSpace) -> CompositionId {
    debug_assert_eq!(c.selection.len(), space.technique_count());
    let mut value = 0u64;
    for t in space.techniques.iter().rev() {
        let digit = match c.selection[t.id] {
            Choice::Absent => 0,
            Choice::Present => 1,
            Choice::Variant(v) => v as u64 + 1,
        };
        value = value * t.radix() + digit;
    }
    CompositionId(value)
}

pub fn decode(id: CompositionId, space: &CompositionSpace) -> Result<Composition> {
    let count = count_compositions(space);
    if id.0 >= count {
        return Err(CoreError::IdOutOfRange { id: id.0, count });
    }
    let mut rest = id.0;
    let mut selection = Vec::with_capacity(space.technique_count());
    for t in &space.techniques {
        let radix = t.radix();
        let digit = rest % radix;
        rest /= radix;
        selection.push(match (t.kind(), digit) {
            (_, 0) => Choice::Absent,
            (TechniqueKind::Singleton, _) => Choice::Present,
            (TechniqueKind::VariantGroup, d) => Choice::Variant(d as usize - 1),
        });
    }
    Ok(Composition { selection })
}

/// Project a composition to a coalition: variant identity is erased, only
/// presence per technique is kept.
pub fn coalition_of(c: &Composition) -> Coalition {
    let mut coalition = Coalition::empty();
    for (i, choice) in c.selection.iter().enumerate() {
        if *choice != Choice::Absent {
            coalition = coalition.with(i);
        }
    }
    coalition
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    fn singleton(name: &str) -> TechniqueConfig {
        TechniqueConfig {
            name: name.to_string(),
            variants: vec![],
        }
    }

    fn group(name: &str, variants: &[&str]) -> TechniqueConfig {
        TechniqueConfig {
            name: name.to_string(),
            variants: variants.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// The reference space used across tests: four singletons plus one three-variant group.
    pub(crate) fn reference_space() -> CompositionSpace {
        CompositionSpace::new(
            "social-bias",
            &[
                singleton("persona"),
                singleton("definition"),
                group("demonstrations", &["random", "similarity", "category"]),
                singleton("stimulus"),
                singleton("reasoning"),
            ],
        )
        .unwrap()
    }

    #[test]
    fn reference_space_has_64_compositions() {
        assert_eq!(count_compositions(&reference_space()), 64);
    }

    #[test]
    fn empty_space_has_base_only() {
        let space = CompositionSpace::new("empty", &[]).unwrap();
        assert_eq!(count_compositions(&space), 1);
        let all = enumerate_compositions(&space, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(all.len(), 1);
        assert!(all[0].is_base());
    }

    #[test]
    fn single_singleton_space() {
        let space = CompositionSpace::new("one", &[singleton("persona")]).unwrap();
        let all = enumerate_compositions(&space, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(all.len(), 2);
        assert!(all[0].is_base());
        assert_eq!(all[1].selection, vec![Choice::Present]);
    }

    #[test]
    fn two_singletons_two_groups_counts_48() {
        // Oracle: brute-force enumeration of all valid selections.
        let space = CompositionSpace::new(
            "mixed",
            &[
                singleton("a"),
                singleton("b"),
                group("g1", &["x", "y"]),
                group("g2", &["u", "v", "w"]),
            ],
        )
        .unwrap();
        let mut brute = 0u64;
        for a in 0..2 {
            for b in 0..2 {
                for g1 in 0..3 {
                    for g2 in 0..4 {
                        let _ = (a, b, g1, g2);
                        brute += 1;
                    }
                }
            }
        }
        assert_eq!(brute, 48);
        assert_eq!(count_compositions(&space), 48);
    }

    #[test]
    fn enumeration_matches_count_and_starts_at_base() {
        let space = reference_space();
        let all = enumerate_compositions(&space, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(all.len(), 64);
        assert!(all[0].is_base());
        for (i, c) in all.iter().enumerate() {
            assert_eq!(encode(c, &space).0, i as u64);
        }
    }

    #[test]
    fn cap_exceeded_errors() {
        let space = reference_space();
        let err = enumerate_compositions(&space, 32).unwrap_err();
        assert!(matches!(err, CoreError::SpaceTooLarge { count: 64, cap: 32 }));
    }

    #[test]
    fn round_trip_all_ids() {
        let space = reference_space();
        for id in 0..count_compositions(&space) {
            let c = decode(CompositionId(id), &space).unwrap();
            assert_eq!(encode(&c, &space), CompositionId(id));
        }
    }

    #[test]
    fn out_of_range_id_errors() {
        let space = reference_space();
        assert!(decode(CompositionId(64), &space).is_err());
    }

    #[test]
    fn coalition_projection() {
        let space = reference_space();
        let base = Composition::base(&space);
        assert_eq!(coalition_of(&base), Coalition::empty());

        // {definition, demonstrations:similarity} round-trips and projects to
        // {definition, demonstrations} regardless of the variant.
        let mut c = Composition::base(&space);
        c.selection[1] = Choice::Present;
        c.selection[2] = Choice::Variant(1);
        let id = encode(&c, &space);
        assert_eq!(decode(id, &space).unwrap(), c);
        let coalition = coalition_of(&c);
        assert!(coalition.contains(1));
        assert!(coalition.contains(2));
        assert_eq!(coalition.len(), 2);

        let mut all_singletons = Composition::base(&space);
        for t in &space.techniques {
            if t.kind() == TechniqueKind::Singleton {
                all_singletons.selection[t.id] = Choice::Present;
            }
        }
        let coalition = coalition_of(&all_singletons);
        assert_eq!(coalition.len(), 4);
        assert!(!coalition.contains(2));
    }

    #[test]
    fn mutual_exclusivity_in_enumeration() {
        // No enumerated composition can select two variants of one group: the
        // encoding has a single digit per group, so the invariant holds by
        // construction. Check that every variant digit is in range instead.
        let space = reference_space();
        for c in enumerate_compositions(&space, DEFAULT_ENUMERATION_CAP).unwrap() {
            for t in &space.techniques {
                if let Choice::Variant(v) = c.selection[t.id] {
                    assert!(v < t.variants.len());
                }
            }
        }
    }

    #[test]
    fn duplicate_names_rejected() {
        assert!(CompositionSpace::new("bad", &[singleton("a"), singleton("a")]).is_err());
        assert!(CompositionSpace::new("bad", &[group("g", &["x", "x"])]).is_err());
    }

    #[test]
    fn fingerprint_distinguishes_spaces() {
        let a = reference_space();
        let b = CompositionSpace::new("other", &[singleton("persona")]).unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), reference_space().fingerprint());
    }
}

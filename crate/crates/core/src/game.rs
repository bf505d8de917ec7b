//! The composition game: a total map from technique coalitions to a
//! performance value, built from a label matrix with one fixed variant per
//! variant group.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::matrix::LabelMatrix;
use crate::space::{encode, Choice, Composition, CompositionSpace, TechniqueKind};

/// Hard bound for exact enumeration over 2^n coalitions.
pub const MAX_PLAYERS: usize = 24;

/// A subset of technique indices 0..n-1, stored as a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Coalition(pub u32);

impl Coalition {
    pub fn empty() -> Self {
        Coalition(0)
    }

    pub fn full(n: usize) -> Self {
        debug_assert!(n <= MAX_PLAYERS);
        Coalition(((1u64 << n) - 1) as u32)
    }

    pub fn with(self, player: usize) -> Self {
        Coalition(self.0 | (1 << player))
    }

    pub fn without(self, player: usize) -> Self {
        Coalition(self.0 & !(1 << player))
    }

    pub fn contains(self, player: usize) -> bool {
        self.0 & (1 << player) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn members(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |i| self.contains(*i))
    }
}

/// Fixed variant choice per variant group, required to map coalitions to
/// concrete compositions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantFixing {
    /// (technique name, variant name) pairs, one per variant group.
    pub choices: Vec<(String, String)>,
}

impl VariantFixing {
    pub fn none() -> Self {
        VariantFixing { choices: vec![] }
    }

    pub fn single(technique: &str, variant: &str) -> Self {
        VariantFixing {
            choices: vec![(technique.to_string(), variant.to_string())],
        }
    }

    fn variant_index(&self, space: &CompositionSpace, technique_id: usize) -> Result<usize> {
        let t = &space.techniques[technique_id];
        let (_, variant) = self
            .choices
            .iter()
            .find(|(name, _)| *name == t.name)
            .ok_or_else(|| {
                CoreError::Game(format!(
                    "no variant fixed for variant group '{}'",
                    t.name
                ))
            })?;
        t.variants
            .iter()
            .position(|v| v == variant)
            .ok_or_else(|| {
                CoreError::Game(format!(
                    "technique '{}' has no variant '{}'",
                    t.name, variant
                ))
            })
    }
}

/// Map a coalition to the unique composition it denotes under the fixing.
pub fn composition_for_coalition(
    coalition: Coalition,
    space: &CompositionSpace,
    fixing: &VariantFixing,
) -> Result<Composition> {
    let mut c = Composition::base(space);
    for t in &space.techniques {
        if coalition.contains(t.id) {
            c.selection[t.id] = match t.kind() {
                TechniqueKind::Singleton => Choice::Present,
                TechniqueKind::VariantGroup => {
                    Choice::Variant(fixing.variant_index(space, t.id)?)
                }
            };
        }
    }
    Ok(c)
}

/// Total cooperative game over the techniques of a space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionGame {
    pub player_count: usize,
    pub player_names: Vec<String>,
    pub variant_fixing: VariantFixing,
    /// Value per coalition, indexed by bitmask; length 2^player_count.
    pub values: Vec<f64>,
    pub metric_name: String,
}

impl CompositionGame {
    pub fn from_values(values: Vec<f64>, metric_name: impl Into<String>) -> Self {
        let n = values.len().trailing_zeros() as usize;
        assert_eq!(values.len(), 1 << n, "values must have length 2^n");
        CompositionGame {
            player_count: n,
            player_names: (0..n).map(|i| format!("player{i}")).collect(),
            variant_fixing: VariantFixing::none(),
            values,
            metric_name: metric_name.into(),
        }
    }

    pub fn value(&self, coalition: Coalition) -> f64 {
        self.values[coalition.0 as usize]
    }

    pub fn baseline(&self) -> f64 {
        self.values[0]
    }

    pub fn full_value(&self) -> f64 {
        self.value(Coalition::full(self.player_count))
    }

    /// Export as CSV with columns (coalition bitmask, value).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(["coalition", "value"])?;
        for (mask, value) in self.values.iter().enumerate() {
            writer.write_record([mask.to_string(), format!("{value}")])?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path, metric_name: &str) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let mut entries = Vec::new();
        for record in reader.records() {
            let record = record?;
            let mask: usize = record[0]
                .parse()
                .map_err(|e| CoreError::Game(format!("bad coalition mask: {e}")))?;
            let value: f64 = record[1]
                .parse()
                .map_err(|e| CoreError::Game(format!("bad game value: {e}")))?;
            entries.push((mask, value));
        }
        let len = entries.len();
        if len == 0 || len & (len - 1) != 0 {
            return Err(CoreError::Game(format!(
                "game CSV must contain 2^n rows, found {len}"
            )));
        }
        let mut values = vec![f64::NAN; len];
        for (mask, value) in entries {
            if mask >= len {
                return Err(CoreError::Game(format!("coalition mask {mask} out of range")));
            }
            values[mask] = value;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(CoreError::Game("game CSV has missing coalitions".into()));
        }
        Ok(CompositionGame::from_values(values, metric_name))
    }
}

/// Build the composition game from a label matrix: the value of coalition S is
/// the metric of the composition whose techniques are exactly S under the
/// variant fixing. The metric defaults to macro F1 elsewhere; here it is an
/// explicit function of (truth, predictions).
pub fn build_game<F>(
    matrix: &LabelMatrix,
    space: &CompositionSpace,
    fixing: &VariantFixing,
    metric_name: &str,
    metric: F,
) -> Result<CompositionGame>
where
    F: Fn(&[u8], &[Option<u8>]) -> f64,
{
    let n = space.technique_count();
    if n > MAX_PLAYERS {
        return Err(CoreError::Game(format!(
            "exact game evaluation is bounded at {MAX_PLAYERS} players, got {n}"
        )));
    }
    let truth = matrix.labels();
    let mut values = Vec::with_capacity(1 << n);
    for mask in 0..(1u32 << n) {
        let composition = composition_for_coalition(Coalition(mask), space, fixing)?;
        let id = encode(&composition, space);
        let predictions = matrix.predictions_for(id).ok_or_else(|| {
            CoreError::Game(format!(
                "matrix has no column for composition {} (coalition {mask:#b})",
                id.0
            ))
        })?;
        values.push(metric(&truth, predictions));
    }
    Ok(CompositionGame {
        player_count: n,
        player_names: space.techniques.iter().map(|t| t.name.clone()).collect(),
        variant_fixing: fixing.clone(),
        values,
        metric_name: metric_name.to_string(),
    })
}

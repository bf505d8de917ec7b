//! Prediction records and the per-instance x per-composition correctness
//! matrix derived from them.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Instance;
use crate::error::{CoreError, Result};
use crate::space::CompositionId;

/// One collected prediction for an (instance, composition) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub instance_id: String,
    pub composition_id: CompositionId,
    pub model_id: String,
    pub seed: u64,
    pub raw_output: String,
    /// None on parse failure.
    pub predicted_label: Option<u8>,
    /// None when the label could not be parsed.
    pub correct: Option<bool>,
}

impl PredictionRecord {
    /// Cache key: (model, composition, instance, seed).
    pub fn key(&self) -> (String, u64, String, u64) {
        (
            self.model_id.clone(),
            self.composition_id.0,
            self.instance_id.clone(),
            self.seed,
        )
    }
}

/// Dense correctness matrix: rows are instances, columns are compositions.
/// Null predictions count as incorrect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMatrix {
    pub instance_ids: Vec<String>,
    pub labels: Vec<u8>,
    pub composition_ids: Vec<CompositionId>,
    /// predicted[column][row]
    pub predicted: Vec<Vec<Option<u8>>>,
}

impl LabelMatrix {
    /// Build directly from per-composition prediction columns. Composition
    /// ids are taken to be 0..columns.
    pub fn from_predictions(
        instance_ids: Vec<String>,
        labels: Vec<u8>,
        predicted: Vec<Vec<Option<u8>>>,
    ) -> Result<Self> {
        let composition_ids = (0..predicted.len() as u64).map(CompositionId).collect();
        let matrix = LabelMatrix {
            instance_ids,
            labels,
            composition_ids,
            predicted,
        };
        matrix.validate()?;
        Ok(matrix)
    }

    fn validate(&self) -> Result<()> {
        if self.labels.len() != self.instance_ids.len() {
            return Err(CoreError::Matrix("labels/instances length mismatch".into()));
        }
        if self.predicted.len() != self.composition_ids.len() {
            return Err(CoreError::Matrix(
                "prediction columns/composition ids mismatch".into(),
            ));
        }
        for col in &self.predicted {
            if col.len() != self.instance_ids.len() {
                return Err(CoreError::Matrix("ragged prediction column".into()));
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.instance_ids.len()
    }

    pub fn columns(&self) -> usize {
        self.composition_ids.len()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.labels.clone()
    }

    fn column_index(&self, id: CompositionId) -> Option<usize> {
        self.composition_ids.iter().position(|c| *c == id)
    }

    pub fn predictions_for(&self, id: CompositionId) -> Option<&[Option<u8>]> {
        self.column_index(id).map(|i| self.predicted[i].as_slice())
    }

    /// Correctness of composition `id` on instance row `row`; a null
    /// prediction counts as incorrect.
    pub fn is_correct(&self, row: usize, id: CompositionId) -> Result<bool> {
        let col = self.column_index(id).ok_or_else(|| {
            CoreError::Matrix(format!("unknown composition id {}", id.0))
        })?;
        Ok(self.predicted[col][row] == Some(self.labels[row]))
    }

    /// Multi-hot correctness row for one instance, over all compositions.
    pub fn correctness_row(&self, row: usize) -> Vec<bool> {
        self.predicted
            .iter()
            .map(|col| col[row] == Some(self.labels[row]))
            .collect()
    }

    pub fn column_correct_count(&self, column: usize) -> usize {
        self.predicted[column]
            .iter()
            .zip(&self.labels)
            .filter(|(p, y)| **p == Some(**y))
            .count()
    }

    /// Write the correctness matrix as CSV: instance rows, composition-id
    /// columns, cells 1/0.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        let mut header = vec!["instance_id".to_string(), "label".to_string()];
        header.extend(self.composition_ids.iter().map(|c| format!("c{}", c.0)));
        writer.write_record(&header)?;
        for row in 0..self.rows() {
            let mut record = vec![self.instance_ids[row].clone(), self.labels[row].to_string()];
            for col in 0..self.columns() {
                let correct = self.predicted[col][row] == Some(self.labels[row]);
                record.push(if correct { "1".into() } else { "0".into() });
            }
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Write the raw predicted labels as CSV; empty cell for null predictions.
    pub fn write_predictions_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        let mut header = vec!["instance_id".to_string(), "label".to_string()];
        header.extend(self.composition_ids.iter().map(|c| format!("c{}", c.0)));
        writer.write_record(&header)?;
        for row in 0..self.rows() {
            let mut record = vec![self.instance_ids[row].clone(), self.labels[row].to_string()];
            for col in 0..self.columns() {
                record.push(match self.predicted[col][row] {
                    Some(l) => l.to_string(),
                    None => String::new(),
                });
            }
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Assemble the dense matrix for one (model, seed) from collected records.
/// Every (instance, composition) pair must be covered; missing pairs are an
/// error listing up to 10 keys.
pub fn build_label_matrix(
    records: &[PredictionRecord],
    instances: &[&Instance],
    composition_ids: &[CompositionId],
    model_id: &str,
    seed: u64,
) -> Result<LabelMatrix> {
    let mut by_key: HashMap<(&str, u64), &PredictionRecord> = HashMap::new();
    for r in records {
        if r.model_id == model_id && r.seed == seed {
            by_key.insert((r.instance_id.as_str(), r.composition_id.0), r);
        }
    }
    let mut missing = Vec::new();
    let mut predicted = vec![vec![None; instances.len()]; composition_ids.len()];
    for (col, cid) in composition_ids.iter().enumerate() {
        for (row, instance) in instances.iter().enumerate() {
            match by_key.get(&(instance.id.as_str(), cid.0)) {
                Some(r) => predicted[col][row] = r.predicted_label,
                None => {
                    if missing.len() < 10 {
                        missing.push(format!("({}, c{})", instance.id, cid.0));
                    }
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(CoreError::Matrix(format!(
            "missing prediction records for pairs: {}",
            missing.join(", ")
        )));
    }
    LabelMatrix {
        instance_ids: instances.iter().map(|i| i.id.clone()).collect(),
        labels: instances.iter().map(|i| i.label).collect(),
        composition_ids: composition_ids.to_vec(),
        predicted,
    }
    .validate_into()
}

impl LabelMatrix {
    fn validate_into(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }
}

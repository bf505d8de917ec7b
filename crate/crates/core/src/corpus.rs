//! Corpus ingestion: JSONL instances with binary labels and optional
//! categories.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Validation => write!(f, "validation"),
            Split::Test => write!(f, "test"),
        }
    }
}

impl std::str::FromStr for Split {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" | "val" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(CoreError::Corpus(format!("unknown split '{other}'"))),
        }
    }
}

/// One labeled text instance. Label 1 means biased/positive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub text: String,
    pub label: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    pub split: Split,
}

/// Load and validate a JSONL corpus. Rejects duplicate ids, empty texts, and
/// non-binary labels, reporting the offending line.
pub fn load_corpus(path: &Path) -> Result<Vec<Instance>> {
    let file = File::open(path).map_err(|e| {
        CoreError::Corpus(format!("cannot open corpus {}: {e}", path.display()))
    })?;
    let reader = BufReader::new(file);
    let mut instances = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let instance: Instance = serde_json::from_str(&line).map_err(|e| {
            CoreError::CorpusLine {
                line: line_no,
                message: e.to_string(),
            }
        })?;
        if instance.label > 1 {
            return Err(CoreError::CorpusLine {
                line: line_no,
                message: format!("label must be 0 or 1, got {}", instance.label),
            });
        }
        if instance.text.is_empty() {
            return Err(CoreError::CorpusLine {
                line: line_no,
                message: format!("instance '{}' has empty text", instance.id),
            });
        }
        if !seen.insert(instance.id.clone()) {
            return Err(CoreError::CorpusLine {
                line: line_no,
                message: format!("duplicate instance id '{}'", instance.id),
            });
        }
        instances.push(instance);
    }
    Ok(instances)
}

/// Write instances as JSONL, one object per line.
pub fn write_corpus(path: &Path, instances: &[Instance]) -> Result<()> {
    let mut file = File::create(path)?;
    for instance in instances {
        serde_json::to_writer(&mut file, instance)?;
        file.write_all(b"\n")?;
    }
    Ok(())
}

/// Instances of one split, in file order.
pub fn split_instances<'a>(instances: &'a [Instance], split: Split) -> Vec<&'a Instance> {
    instances.iter().filter(|i| i.split == split).collect()
}

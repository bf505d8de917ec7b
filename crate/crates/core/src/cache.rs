//! Append-only JSONL cache of prediction records, keyed by
//! (model_id, composition_id, instance_id, seed). Last write wins on load;
//! conflicting raw outputs for the same key are counted.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::error::{CoreError, Result};
use crate::matrix::PredictionRecord;

pub type CacheKey = (String, u64, String, u64);

pub struct PredictionCache {
    path: PathBuf,
    entries: HashMap<CacheKey, PredictionRecord>,
    conflicts: usize,
    writer: File,
}

impl PredictionCache {
    /// Open (or create) the cache file and compact it in memory.
    pub fn open(path: &Path) -> Result<Self> {
        let mut entries = HashMap::new();
        let mut conflicts = 0;
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (idx, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let record: PredictionRecord = serde_json::from_str(&line).map_err(|e| {
                    CoreError::Gateway(format!(
                        "corrupt cache line {} in {}: {e}",
                        idx + 1,
                        path.display()
                    ))
                })?;
                let key = record.key();
                if let Some(previous) = entries.get(&key) {
                    if previous != &record {
                        conflicts += 1;
                    }
                }
                entries.insert(key, record);
            }
        }
        let writer = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(PredictionCache {
            path: path.to_path_buf(),
            entries,
            conflicts,
            writer,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Conflicts observed so far (differing records stored under one key).
    pub fn conflicts(&self) -> usize {
        self.conflicts
    }

    pub fn get(&self, key: &CacheKey) -> Option<&PredictionRecord> {
        self.entries.get(key)
    }

    /// Append a record. Idempotent for identical records; a differing record
    /// for an existing key is flagged as a conflict and the newest kept.
    pub fn put(&mut self, record: PredictionRecord) -> Result<()> {
        let key = record.key();
        if let Some(previous) = self.entries.get(&key) {
            if previous == &record {
                return Ok(());
            }
            self.conflicts += 1;
        }
        serde_json::to_writer(&mut self.writer, &record)?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        self.entries.insert(key, record);
        Ok(())
    }

    pub fn records(&self) -> impl Iterator<Item = &PredictionRecord> {
        self.entries.values()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::CompositionId;

    fn record(raw: &str) -> PredictionRecord {
        PredictionRecord {
            instance_id: "a".into(),
            composition_id: CompositionId(3),
            model_id: "mock".into(),
            seed: 7,
            raw_output: raw.into(),
            predicted_label: Some(1),
            correct: Some(true),
        }
    }

    #[test]
    fn put_then_get() {
        let dir = tempfile::tempdir().unwrap();
        let mut cache = PredictionCache::open(&dir.path().join("cache.jsonl")).unwrap();
        let r = record("Yes");
        cache.put(r.clone()).unwrap();
        assert_eq!(cache.get(&r.key()), Some(&r));
    }

    #[test]
    fn get_on_empty_cache() {
        let dir = tempfile::tempdir().unwrap();
        let cache = PredictionCache::open(&dir.path().join("cache.jsonl")).unwrap();
        assert!(cache
            .get(&("mock".into(), 0, "a".into(), 0))
            .is_none());
    }

    #[test]
    fn identical_put_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let mut cache = PredictionCache::open(&path).unwrap();
        cache.put(record("Yes")).unwrap();
        cache.put(record("Yes")).unwrap();
        drop(cache);
        let contents = std::fs::read_to_string(&path).unwrap();
        assert_eq!(contents.lines().count(), 1);
    }

    #[test]
    fn conflicting_put_keeps_newest_and_counts() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let mut cache = PredictionCache::open(&path).unwrap();
        cache.put(record("Yes")).unwrap();
        cache.put(record("No")).unwrap();
        assert_eq!(cache.conflicts(), 1);
        assert_eq!(cache.get(&record("No").key()).unwrap().raw_output, "No");
        drop(cache);
        // Reload compacts last-write-wins and re-counts the conflict.
        let cache = PredictionCache::open(&path).unwrap();
        assert_eq!(cache.len(), 1);
        assert_eq!(cache.conflicts(), 1);
        assert_eq!(cache.get(&record("No").key()).unwrap().raw_output, "No");
    }
}

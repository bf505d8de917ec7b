//! Demonstration selection: random (seeded), similarity (TF-IDF cosine by
//! default, pluggable scorer), and one-per-category strategies.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Instance;
use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemonstrationStrategy {
    Random,
    Similarity,
    Category,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemonstrationConfig {
    pub strategy: DemonstrationStrategy,
    /// Demonstration count for random/similarity; category derives one per
    /// distinct category.
    pub k: usize,
    pub seed: u64,
}

/// Scores documents against a query; higher is more similar.
pub trait SimilarityScorer {
    fn score(&self, query: &str, documents: &[&str]) -> Vec<f64>;
}

fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_string())
        .collect()
}

/// Lexical TF-IDF cosine similarity with smoothed idf.
pub struct TfIdfScorer;

impl SimilarityScorer for TfIdfScorer {
    fn score(&self, query: &str, documents: &[&str]) -> Vec<f64> {
        let doc_tokens: Vec<Vec<String>> = documents.iter().map(|d| tokenize(d)).collect();
        let query_tokens = tokenize(query);
        let n = documents.len() as f64;

        let mut df: HashMap<&str, usize> = HashMap::new();
        for tokens in &doc_tokens {
            let mut seen: Vec<&str> = tokens.iter().map(|t| t.as_str()).collect();
            seen.sort_unstable();
            seen.dedup();
            for t in seen {
                *df.entry(t).or_insert(0) += 1;
            }
        }
        let idf = |term: &str| {
            let d = *df.get(term).unwrap_or(&0) as f64;
            ((1.0 + n) / (1.0 + d)).ln() + 1.0
        };

        let weigh = |tokens: &[String]| -> HashMap<String, f64> {
            let mut tf: HashMap<String, f64> = HashMap::new();
            for t in tokens {
                *tf.entry(t.clone()).or_insert(0.0) += 1.0;
            }
            for (term, w) in tf.iter_mut() {
                *w *= idf(term);
            }
            tf
        };

        let query_vec = weigh(&query_tokens);
        let query_norm = query_vec.values().map(|v| v * v).sum::<f64>().sqrt();
        doc_tokens
            .iter()
            .map(|tokens| {
                let doc_vec = weigh(tokens);
                let doc_norm = doc_vec.values().map(|v| v * v).sum::<f64>().sqrt();
                if query_norm == 0.0 || doc_norm == 0.0 {
                    return 0.0;
                }
                let dot: f64 = query_vec
                    .iter()
                    .filter_map(|(term, w)| doc_vec.get(term).map(|d| w * d))
                    .sum();
                dot / (query_norm * doc_norm)
            })
            .collect()
    }
}

/// Select demonstrations for one instance from the training pool.
pub fn select_demonstrations<'a>(
    config: &DemonstrationConfig,
    instance: &Instance,
    pool: &[&'a Instance],
    scorer: &dyn SimilarityScorer,
) -> Result<Vec<&'a Instance>> {
    if pool.is_empty() {
        return Err(CoreError::Demonstration("demonstration pool is empty".into()));
    }
    match config.strategy {
        DemonstrationStrategy::Random => {
            if config.k > pool.len() {
                return Err(CoreError::Demonstration(format!(
                    "k = {} exceeds pool size {}",
                    config.k,
                    pool.len()
                )));
            }
            // Seeded and instance-independent: the same demonstrations are
            // used for every test instance.
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let mut indices: Vec<usize> = (0..pool.len()).collect();
            indices.shuffle(&mut rng);
            indices.truncate(config.k);
            Ok(indices.into_iter().map(|i| pool[i]).collect())
        }
        DemonstrationStrategy::Similarity => {
            if config.k > pool.len() {
                return Err(CoreError::Demonstration(format!(
                    "k = {} exceeds pool size {}",
                    config.k,
                    pool.len()
                )));
            }
            let docs: Vec<&str> = pool.iter().map(|i| i.text.as_str()).collect();
            let scores = scorer.score(&instance.text, &docs);
            let mut ranked: Vec<usize> = (0..pool.len()).collect();
            // Descending score, ties broken by ascending instance id.
            ranked.sort_by(|&a, &b| {
                scores[b]
                    .partial_cmp(&scores[a])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then_with(|| pool[a].id.cmp(&pool[b].id))
            });
            ranked.truncate(config.k);
            Ok(ranked.into_iter().map(|i| pool[i]).collect())
        }
        DemonstrationStrategy::Category => {
            let mut by_category: BTreeMap<&str, &Instance> = BTreeMap::new();
            for item in pool {
                if let Some(category) = &item.category {
                    by_category
                        .entry(category.as_str())
                        .and_modify(|current| {
                            if item.id < current.id {
                                *current = item;
                            }
                        })
                        .or_insert(item);
                }
            }
            if by_category.is_empty() {
                return Err(CoreError::Demonstration(
                    "category strategy needs instances with a category field".into(),
                ));
            }
            Ok(by_category.into_values().collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Split;

    fn instance(id: &str, text: &str, category: Option<&str>) -> Instance {
        Instance {
            id: id.into(),
            text: text.into(),
            label: 0,
            category: category.map(|c| c.into()),
            split: Split::Train,
        }
    }

    fn query() -> Instance {
        instance("q", "engineers wear glasses at work", None)
    }

    #[test]
    fn random_is_deterministic_per_seed() {
        let pool_items: Vec<Instance> = (0..10)
            .map(|i| instance(&format!("p{i}"), &format!("text {i}"), None))
            .collect();
        let pool: Vec<&Instance> = pool_items.iter().collect();
        let config = DemonstrationConfig {
            strategy: DemonstrationStrategy::Random,
            k: 4,
            seed: 42,
        };
        let a = select_demonstrations(&config, &query(), &pool, &TfIdfScorer).unwrap();
        let b = select_demonstrations(&config, &query(), &pool, &TfIdfScorer).unwrap();
        assert_eq!(
            a.iter().map(|i| &i.id).collect::<Vec<_>>(),
            b.iter().map(|i| &i.id).collect::<Vec<_>>()
        );
        let other = select_demonstrations(
            &DemonstrationConfig { seed: 43, ..config },
            &query(),
            &pool,
            &TfIdfScorer,
        )
        .unwrap();
        // Different seed, very likely different selection.
        assert_ne!(
            a.iter().map(|i| &i.id).collect::<Vec<_>>(),
            other.iter().map(|i| &i.id).collect::<Vec<_>>()
        );
    }

    #[test]
    fn similarity_ranks_shared_content_words_first() {
        // Hand-computed on a 3-document toy corpus: only p1 shares content
        // words with the query, so its cosine must be strictly highest.
        let pool_items = vec![
            instance("p0", "the weather is lovely today", None),
            instance("p1", "engineers wear glasses at work", None),
            instance("p2", "cats chase mice in barns", None),
        ];
        let pool: Vec<&Instance> = pool_items.iter().collect();
        let config = DemonstrationConfig {
            strategy: DemonstrationStrategy::Similarity,
            k: 1,
            seed: 0,
        };
        let selected = select_demonstrations(&config, &query(), &pool, &TfIdfScorer).unwrap();
        assert_eq!(selected[0].id, "p1");
        let scores = TfIdfScorer.score(
            &query().text,
            &pool.iter().map(|i| i.text.as_str()).collect::<Vec<_>>(),
        );
        assert!(scores[1] > scores[0]);
        assert!(scores[1] > scores[2]);
        assert_eq!(scores[0], 0.0);
    }

    #[test]
    fn similarity_monotone_under_query_duplication() {
        let base = "a few plain words here";
        let query = instance("q", "special marker phrase", None);
        let pool_items = vec![
            instance("p0", base, None),
            instance("p1", &format!("{base} special marker phrase"), None),
        ];
        let pool: Vec<&Instance> = pool_items.iter().collect();
        let scores = TfIdfScorer.score(
            &query.text,
            &pool.iter().map(|i| i.text.as_str()).collect::<Vec<_>>(),
        );
        assert!(scores[1] > scores[0]);
    }

    #[test]
    fn category_selects_one_per_distinct_category() {
        let pool_items = vec![
            instance("p0", "a", Some("race")),
            instance("p1", "b", Some("gender")),
            instance("p2", "c", Some("race")),
            instance("p3", "d", Some("profession")),
            instance("p4", "e", Some("religion")),
        ];
        let pool: Vec<&Instance> = pool_items.iter().collect();
        let config = DemonstrationConfig {
            strategy: DemonstrationStrategy::Category,
            k: 0,
            seed: 0,
        };
        let selected = select_demonstrations(&config, &query(), &pool, &TfIdfScorer).unwrap();
        assert_eq!(selected.len(), 4);
        // Ordered by category name: gender, profession, race, religion.
        assert_eq!(
            selected.iter().map(|i| i.id.as_str()).collect::<Vec<_>>(),
            vec!["p1", "p3", "p0", "p4"]
        );
    }

    #[test]
    fn category_without_categories_errors() {
        let pool_items = vec![instance("p0", "a", None)];
        let pool: Vec<&Instance> = pool_items.iter().collect();
        let config = DemonstrationConfig {
            strategy: DemonstrationStrategy::Category,
            k: 0,
            seed: 0,
        };
        assert!(select_demonstrations(&config, &query(), &pool, &TfIdfScorer).is_err());
    }

    #[test]
    fn k_exceeding_pool_errors() {
        let pool_items = vec![instance("p0", "a", None)];
        let pool: Vec<&Instance> = pool_items.iter().collect();
        for strategy in [DemonstrationStrategy::Random, DemonstrationStrategy::Similarity] {
            let config = DemonstrationConfig {
                strategy,
                k: 2,
                seed: 0,
            };
            assert!(select_demonstrations(&config, &query(), &pool, &TfIdfScorer).is_err());
        }
    }
}

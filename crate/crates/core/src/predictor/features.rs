//! Hashed text features: word unigrams plus character 3-5 grams, hashed with
//! FNV-1a into a fixed dimension and L2-normalized. FNV keeps the mapping
//! stable across runs and platforms.

pub const DEFAULT_DIM: usize = 1 << 18;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Sparse feature vector: (index, value) pairs with strictly ascending
/// indices and unit L2 norm (empty for texts with no features).
pub fn featurize(text: &str, dim: usize) -> Vec<(usize, f64)> {
    assert!(dim > 0);
    let normalized = text.to_lowercase();
    let mut counts: std::collections::HashMap<usize, f64> = std::collections::HashMap::new();

    for token in normalized
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
    {
        let index = (fnv1a(format!("w|{token}").as_bytes()) % dim as u64) as usize;
        *counts.entry(index).or_insert(0.0) += 1.0;
    }

    let chars: Vec<char> = normalized.chars().collect();
    for n in 3..=5usize {
        if chars.len() < n {
            break;
        }
        for window in chars.windows(n) {
            let gram: String = window.iter().collect();
            let index = (fnv1a(format!("c|{gram}").as_bytes()) % dim as u64) as usize;
            *counts.entry(index).or_insert(0.0) += 1.0;
        }
    }

    let norm: f64 = counts.values().map(|v| v * v).sum::<f64>().sqrt();
    let mut features: Vec<(usize, f64)> = if norm > 0.0 {
        counts.into_iter().map(|(i, v)| (i, v / norm)).collect()
    } else {
        Vec::new()
    };
    features.sort_unstable_by_key(|(i, _)| *i);
    features
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_sorted() {
        let a = featurize("Engineers wear glasses.", DEFAULT_DIM);
        let b = featurize("Engineers wear glasses.", DEFAULT_DIM);
        assert_eq!(a, b);
        assert!(!a.is_empty());
        for w in a.windows(2) {
            assert!(w[0].0 < w[1].0);
        }
    }

    #[test]
    fn unit_norm() {
        let f = featurize("some text with several words in it", DEFAULT_DIM);
        let norm: f64 = f.iter().map(|(_, v)| v * v).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn case_insensitive() {
        assert_eq!(
            featurize("Hello World", DEFAULT_DIM),
            featurize("hello world", DEFAULT_DIM)
        );
    }

    #[test]
    fn empty_and_symbol_only_texts() {
        assert!(featurize("", DEFAULT_DIM).is_empty());
        // Symbol-only text still yields char n-grams.
        let f = featurize("!!!??", DEFAULT_DIM);
        assert!(!f.is_empty());
    }

    #[test]
    fn different_texts_differ() {
        assert_ne!(
            featurize("completely unrelated words", DEFAULT_DIM),
            featurize("another sentence entirely", DEFAULT_DIM)
        );
    }

    #[test]
    fn indices_within_dim() {
        for (i, _) in featurize("boundary check text", 64) {
            assert!(i < 64);
        }
    }
}

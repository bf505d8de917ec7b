//! Metrics, baselines, oracle bounds, selection frequencies, and significance
//! testing over label matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{CoreError, Result};
use crate::matrix::LabelMatrix;
use crate::space::CompositionId;

/// Unweighted mean of per-class F1 over classes {0, 1}. A class's F1 is 0 when
/// its precision or recall is undefined. Null predictions count as wrong for
/// both classes and never as a predicted positive of either.
pub fn macro_f1(truth: &[u8], predicted: &[Option<u8>]) -> Result<f64> {
    if truth.len() != predicted.len() {
        return Err(CoreError::Eval(format!(
            "length mismatch: {} truth labels vs {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let mut sum = 0.0;
    for class in [0u8, 1u8] {
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fnn = 0usize;
        for (&y, &p) in truth.iter().zip(predicted) {
            match (y == class, p == Some(class)) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fnn += 1,
                (false, false) => {}
            }
        }
        let denom = 2 * tp + fp + fnn;
        sum += if denom == 0 { 0.0 } else { 2.0 * tp as f64 / denom as f64 };
    }
    Ok(sum / 2.0)
}

/// Label distribution for the random baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RandomBaseline {
    Uniform,
    /// Match the training split's positive rate.
    TrainPrior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineScores {
    pub random: f64,
    pub majority: f64,
    pub ensemble: f64,
    pub best_on_val: Option<BestComposition>,
    pub best_on_test: BestComposition,
    pub oracle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestComposition {
    pub composition_id: CompositionId,
    /// Macro F1 on the evaluation split.
    pub score: f64,
}

/// Argmax composition by macro F1 on a matrix; ties go to the lowest id.
pub fn best_composition(matrix: &LabelMatrix) -> Result<BestComposition> {
    let truth = matrix.labels();
    let mut best: Option<BestComposition> = None;
    for (col, cid) in matrix.composition_ids.iter().enumerate() {
        let score = macro_f1(&truth, &matrix.predicted[col])?;
        let better = match &best {
            None => true,
            Some(b) => score > b.score || (score == b.score && cid.0 < b.composition_id.0),
        };
        if better {
            best = Some(BestComposition {
                composition_id: *cid,
                score,
            });
        }
    }
    best.ok_or_else(|| CoreError::Eval("matrix has no compositions".into()))
}

/// Per-instance majority vote over all compositions' predicted labels; null
/// predictions do not vote. Ties resolve to `tie_label`.
pub fn ensemble_predictions(matrix: &LabelMatrix, tie_label: u8) -> Vec<Option<u8>> {
    (0..matrix.rows())
        .map(|row| {
            let mut votes = [0usize; 2];
            for col in &matrix.predicted {
                if let Some(l) = col[row] {
                    votes[l as usize] += 1;
                }
            }
            if votes[0] == votes[1] {
                Some(tie_label)
            } else if votes[1] > votes[0] {
                Some(1)
            } else {
                Some(0)
            }
        })
        .collect()
}

/// The oracle's synthetic prediction: the truth when any composition is
/// correct on the instance, its complement otherwise.
pub fn oracle_predictions(matrix: &LabelMatrix) -> Vec<Option<u8>> {
    (0..matrix.rows())
        .map(|row| {
            let any = matrix.correctness_row(row).iter().any(|c| *c);
            let y = matrix.labels[row];
            Some(if any { y } else { 1 - y })
        })
        .collect()
}

pub fn run_baselines(
    test_matrix: &LabelMatrix,
    val_matrix: Option<&LabelMatrix>,
    train_labels: &[u8],
    seeds: &[u64],
    tie_label: u8,
    random_mode: RandomBaseline,
) -> Result<BaselineScores> {
    let truth = test_matrix.labels();

    let positive_rate = match random_mode {
        RandomBaseline::Uniform => 0.5,
        RandomBaseline::TrainPrior => {
            if train_labels.is_empty() {
                return Err(CoreError::Eval(
                    "train-prior random baseline needs training labels".into(),
                ));
            }
            train_labels.iter().filter(|&&y| y == 1).count() as f64 / train_labels.len() as f64
        }
    };
    let mut random_sum = 0.0;
    for &seed in seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let predicted: Vec<Option<u8>> = truth
            .iter()
            .map(|_| Some(u8::from(rng.gen::<f64>() < positive_rate)))
            .collect();
        random_sum += macro_f1(&truth, &predicted)?;
    }
    let random = if seeds.is_empty() { 0.0 } else { random_sum / seeds.len() as f64 };

    let majority_label = {
        let positives = train_labels.iter().filter(|&&y| y == 1).count();
        u8::from(positives * 2 > train_labels.len())
    };
    let majority_pred: Vec<Option<u8>> = truth.iter().map(|_| Some(majority_label)).collect();
    let majority = macro_f1(&truth, &majority_pred)?;

    let ensemble = macro_f1(&truth, &ensemble_predictions(test_matrix, tie_label))?;

    let best_on_test = best_composition(test_matrix)?;

    let best_on_val = match val_matrix {
        Some(val) => {
            let chosen = best_composition(val)?;
            let predictions = test_matrix
                .predictions_for(chosen.composition_id)
                .ok_or_else(|| {
                    CoreError::Eval(format!(
                        "best-on-val composition {} missing from test matrix",
                        chosen.composition_id.0
                    ))
                })?;
            Some(BestComposition {
                composition_id: chosen.composition_id,
                score: macro_f1(&truth, predictions)?,
            })
        }
        None => None,
    };

    let oracle = macro_f1(&truth, &oracle_predictions(test_matrix))?;

    Ok(BaselineScores {
        random,
        majority,
        ensemble,
        best_on_val,
        best_on_test,
        oracle,
    })
}

/// Fraction of instances whose selected composition classified them correctly.
pub fn correct_ratio(selections: &[CompositionId], matrix: &LabelMatrix) -> Result<f64> {
    if selections.len() != matrix.rows() {
        return Err(CoreError::Eval(format!(
            "{} selections for {} instances",
            selections.len(),
            matrix.rows()
        )));
    }
    let mut correct = 0usize;
    for (row, cid) in selections.iter().enumerate() {
        if matrix.is_correct(row, *cid)? {
            correct += 1;
        }
    }
    Ok(correct as f64 / matrix.rows() as f64)
}

/// Macro F1 of following the per-instance selections: each instance's
/// prediction is the selected composition's predicted label.
pub fn selection_macro_f1(selections: &[CompositionId], matrix: &LabelMatrix) -> Result<f64> {
    if selections.len() != matrix.rows() {
        return Err(CoreError::Eval("selections/rows mismatch".into()));
    }
    let mut predicted = Vec::with_capacity(matrix.rows());
    for (row, cid) in selections.iter().enumerate() {
        let col = matrix.predictions_for(*cid).ok_or_else(|| {
            CoreError::Eval(format!("unknown composition id {}", cid.0))
        })?;
        predicted.push(col[row]);
    }
    macro_f1(&matrix.labels(), &predicted)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub t_statistic: f64,
    pub p_value: f64,
    pub significant_at_05: bool,
    pub significant_at_01: bool,
}

/// Two-sample Student t-test with pooled variance, H1: mean(a) > mean(b).
pub fn one_sided_t_test(a: &[f64], b: &[f64]) -> Result<SignificanceResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(CoreError::Eval(
            "t-test needs at least two values per sample".into(),
        ));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(CoreError::Eval("t-test samples must be finite".into()));
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let (ma, mb) = (mean(a), mean(b));
    let ss = |xs: &[f64], m: f64| xs.iter().map(|x| (x - m).powi(2)).sum::<f64>();
    let df = (a.len() + b.len() - 2) as f64;
    let pooled = (ss(a, ma) + ss(b, mb)) / df;
    let se = (pooled * (1.0 / a.len() as f64 + 1.0 / b.len() as f64)).sqrt();

    let (t, p) = if se == 0.0 {
        // Degenerate zero-variance samples.
        if ma == mb {
            (0.0, 0.5)
        } else if ma > mb {
            (f64::INFINITY, 0.0)
        } else {
            (f64::NEG_INFINITY, 1.0)
        }
    } else {
        let t = (ma - mb) / se;
        let dist = StudentsT::new(0.0, 1.0, df)
            .map_err(|e| CoreError::Eval(format!("t distribution: {e}")))?;
        (t, 1.0 - dist.cdf(t))
    };
    Ok(SignificanceResult {
        t_statistic: t,
        p_value: p,
        significant_at_05: p < 0.05,
        significant_at_01: p < 0.01,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionFrequency {
    pub composition_id: CompositionId,
    pub mean_count: f64,
    pub stdev_count: f64,
}

/// Per-composition mean and population stdev of selection counts across seeds.
pub fn selection_frequencies(
    selections_per_seed: &[Vec<CompositionId>],
    composition_ids: &[CompositionId],
) -> Vec<SelectionFrequency> {
    let seeds = selections_per_seed.len().max(1) as f64;
    composition_ids
        .iter()
        .map(|cid| {
            let counts: Vec<f64> = selections_per_seed
                .iter()
                .map(|sel| sel.iter().filter(|s| *s == cid).count() as f64)
                .collect();
            let mean = counts.iter().sum::<f64>() / seeds;
            let variance = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / seeds;
            SelectionFrequency {
                composition_id: *cid,
                mean_count: mean,
                stdev_count: variance.sqrt(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveOutcome {
    pub seed: u64,
    pub macro_f1: f64,
    pub correct_ratio: f64,
}

/// Full comparison report for one evaluation split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: String,
    pub per_composition_f1: Vec<(CompositionId, f64)>,
    pub baselines: BaselineScores,
    pub adaptive: Vec<AdaptiveOutcome>,
    pub adaptive_mean_f1: f64,
    pub adaptive_stdev_f1: f64,
    pub selection_frequencies: Vec<SelectionFrequency>,
    pub significance_vs_best_on_test: Option<SignificanceResult>,
}

impl EvalReport {
    pub fn per_composition_scores(matrix: &LabelMatrix) -> Result<Vec<(CompositionId, f64)>> {
        let truth = matrix.labels();
        matrix
            .composition_ids
            .iter()
            .enumerate()
            .map(|(col, cid)| Ok((*cid, macro_f1(&truth, &matrix.predicted[col])?)))
            .collect()
    }

    /// Markdown table with per-composition rows, baselines, and the adaptive
    /// row carrying significance daggers.
    pub fn to_markdown(&self, describe: impl Fn(CompositionId) -> String) -> String {
        let mut out = String::new();
        out.push_str(&format!("## Evaluation report ({} split)\n\n", self.split));
        out.push_str("| Composition | Macro F1 |\n|---|---|\n");
        for (cid, f1) in &self.per_composition_f1 {
            out.push_str(&format!("| {} | {:.4} |\n", describe(*cid), f1));
        }
        out.push_str("\n| Baseline | Macro F1 |\n|---|---|\n");
        out.push_str(&format!("| Random | {:.4} |\n", self.baselines.random));
        out.push_str(&format!("| Majority | {:.4} |\n", self.baselines.majority));
        out.push_str(&format!("| Ensemble | {:.4} |\n", self.baselines.ensemble));
        if let Some(bv) = &self.baselines.best_on_val {
            out.push_str(&format!(
                "| Best on Val ({}) | {:.4} |\n",
                describe(bv.composition_id),
                bv.score
            ));
        }
        out.push_str(&format!(
            "| Best on Test ({}) | {:.4} |\n",
            describe(self.baselines.best_on_test.composition_id),
            self.baselines.best_on_test.score
        ));
        out.push_str(&format!("| Oracle | {:.4} |\n", self.baselines.oracle));
        let dagger = match &self.significance_vs_best_on_test {
            Some(s) if s.significant_at_01 => " ‡",
            Some(s) if s.significant_at_05 => " †",
            _ => "",
        };
        out.push_str(&format!(
            "| Adaptive prompting{dagger} | {:.4} ± {:.4} |\n",
            self.adaptive_mean_f1, self.adaptive_stdev_f1
        ));
        out
    }
}

/// Mean and population standard deviation.
pub fn mean_stdev(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let variance =
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
    (mean, variance.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn matrix(truth: Vec<u8>, cols: Vec<Vec<Option<u8>>>) -> LabelMatrix {
        LabelMatrix::from_predictions(
            (0..truth.len()).map(|i| format!("i{i}")).collect(),
            truth,
            cols,
        )
        .unwrap()
    }

    #[test]
    fn macro_f1_perfect() {
        let truth = vec![1, 0, 1, 0];
        let pred: Vec<Option<u8>> = truth.iter().map(|&y| Some(y)).collect();
        assert_eq!(macro_f1(&truth, &pred).unwrap(), 1.0);
    }

    #[test]
    fn macro_f1_hand_derived_07333() {
        let truth = vec![1, 1, 0, 0];
        let pred = vec![Some(1), Some(0), Some(0), Some(0)];
        assert_abs_diff_eq!(
            macro_f1(&truth, &pred).unwrap(),
            (2.0 / 3.0 + 0.8) / 2.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn macro_f1_all_negative_on_balanced() {
        let truth = vec![1, 0, 1, 0];
        let pred = vec![Some(0); 4];
        assert_abs_diff_eq!(macro_f1(&truth, &pred).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn macro_f1_null_counts_wrong_for_both_classes() {
        let truth = vec![1, 0];
        let pred = vec![None, None];
        assert_eq!(macro_f1(&truth, &pred).unwrap(), 0.0);
    }

    #[test]
    fn macro_f1_length_mismatch() {
        assert!(macro_f1(&[1], &[Some(1), Some(0)]).is_err());
    }

    #[test]
    fn oracle_and_best_on_all_correct_column() {
        let truth = vec![1, 0, 1];
        let correct: Vec<Option<u8>> = truth.iter().map(|&y| Some(y)).collect();
        let wrong: Vec<Option<u8>> = truth.iter().map(|&y| Some(1 - y)).collect();
        let m = matrix(truth, vec![wrong, correct]);
        let scores =
            run_baselines(&m, None, &[1, 1, 0], &[1, 2, 3], 0, RandomBaseline::Uniform).unwrap();
        assert_eq!(scores.oracle, 1.0);
        assert_eq!(scores.best_on_test.score, 1.0);
        assert_eq!(scores.best_on_test.composition_id, CompositionId(1));
    }

    #[test]
    fn ensemble_tie_label() {
        let truth = vec![1];
        let m = matrix(truth, vec![vec![Some(1)], vec![Some(0)]]);
        assert_eq!(ensemble_predictions(&m, 0), vec![Some(0)]);
        assert_eq!(ensemble_predictions(&m, 1), vec![Some(1)]);
    }

    #[test]
    fn ensemble_majority_vote() {
        // 2 of 3 compositions vote label 1.
        let truth = vec![1, 0, 0];
        let m = matrix(
            truth,
            vec![
                vec![Some(1), Some(1), Some(0)],
                vec![Some(1), Some(1), Some(1)],
                vec![Some(0), Some(0), Some(1)],
            ],
        );
        assert_eq!(
            ensemble_predictions(&m, 0),
            vec![Some(1), Some(1), Some(1)]
        );
    }

    #[test]
    fn correct_ratio_three_of_four() {
        let truth = vec![1, 1, 0, 0];
        let m = matrix(
            truth,
            vec![vec![Some(1), Some(1), Some(0), Some(1)]],
        );
        let sel = vec![CompositionId(0); 4];
        assert_eq!(correct_ratio(&sel, &m).unwrap(), 0.75);
    }

    #[test]
    fn correct_ratio_any_correct_selection_counts() {
        // Appendix-style 5-instance fixture: selection is correct iff that
        // composition classified the instance correctly.
        let truth = vec![1, 0, 1, 0, 1];
        let m = matrix(
            truth,
            vec![
                vec![Some(1), Some(1), Some(0), Some(0), Some(1)],
                vec![Some(0), Some(0), Some(1), Some(1), Some(0)],
            ],
        );
        let sel = vec![
            CompositionId(0), // correct
            CompositionId(1), // correct
            CompositionId(1), // correct
            CompositionId(0), // correct
            CompositionId(1), // wrong
        ];
        assert_eq!(correct_ratio(&sel, &m).unwrap(), 0.8);
    }

    #[test]
    fn correct_ratio_unknown_composition_errors() {
        let m = matrix(vec![1], vec![vec![Some(1)]]);
        assert!(correct_ratio(&[CompositionId(9)], &m).is_err());
    }

    #[test]
    fn t_test_identical_samples() {
        let a = [0.5, 0.6, 0.7];
        let r = one_sided_t_test(&a, &a).unwrap();
        assert_eq!(r.t_statistic, 0.0);
        assert_abs_diff_eq!(r.p_value, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn t_test_reference_samples() {
        let a = [0.81, 0.83, 0.79, 0.82, 0.80];
        let b = [0.71, 0.73, 0.69, 0.72, 0.70];
        let r = one_sided_t_test(&a, &b).unwrap();
        assert_abs_diff_eq!(r.t_statistic, 10.0, epsilon = 1e-9);
        assert!(r.p_value < 1e-4);
        assert!(r.significant_at_01);
    }

    #[test]
    fn t_test_swapped_arguments_complement() {
        let a = [0.81, 0.83, 0.79];
        let b = [0.71, 0.73, 0.69];
        let r = one_sided_t_test(&a, &b).unwrap();
        let swapped = one_sided_t_test(&b, &a).unwrap();
        assert_abs_diff_eq!(r.p_value + swapped.p_value, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn t_test_zero_variance_edge_cases() {
        let r = one_sided_t_test(&[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert_eq!(r.p_value, 0.5);
        let r = one_sided_t_test(&[0.9, 0.9], &[0.5, 0.5]).unwrap();
        assert_eq!(r.p_value, 0.0);
        let r = one_sided_t_test(&[0.5, 0.5], &[0.9, 0.9]).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn frequencies_single_seed() {
        let sel = vec![vec![CompositionId(0); 5]];
        let cids = vec![CompositionId(0), CompositionId(1)];
        let f = selection_frequencies(&sel, &cids);
        assert_eq!(f[0].mean_count, 5.0);
        assert_eq!(f[0].stdev_count, 0.0);
        assert_eq!(f[1].mean_count, 0.0);
    }

    #[test]
    fn frequencies_two_point_statistics() {
        let sel = vec![vec![CompositionId(0)], vec![CompositionId(1)]];
        let cids = vec![CompositionId(0), CompositionId(1)];
        let f = selection_frequencies(&sel, &cids);
        assert_eq!(f[0].mean_count, 0.5);
        assert_eq!(f[0].stdev_count, 0.5);
        assert_eq!(f[1].mean_count, 0.5);
        assert_eq!(f[1].stdev_count, 0.5);
    }

    #[test]
    fn frequencies_conserve_totals() {
        let split = 7usize;
        let seeds = 5usize;
        let sel: Vec<Vec<CompositionId>> = (0..seeds)
            .map(|s| (0..split).map(|i| CompositionId(((s + i) % 3) as u64)).collect())
            .collect();
        let cids: Vec<CompositionId> = (0..3).map(CompositionId).collect();
        let f = selection_frequencies(&sel, &cids);
        let total: f64 = f.iter().map(|x| x.mean_count).sum::<f64>() * seeds as f64;
        assert_abs_diff_eq!(total, (split * seeds) as f64, epsilon = 1e-9);
    }

    #[test]
    fn dominance_chain() {
        // Oracle >= best-on-test >= every per-composition score.
        let truth = vec![1, 0, 1, 0, 1, 1, 0, 0];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cols: Vec<Vec<Option<u8>>> = (0..6)
            .map(|_| truth.iter().map(|_| Some(rng.gen_range(0..=1) as u8)).collect())
            .collect();
        let m = matrix(truth.clone(), cols);
        let scores =
            run_baselines(&m, None, &truth, &[1, 2], 0, RandomBaseline::Uniform).unwrap();
        for (_, f1) in EvalReport::per_composition_scores(&m).unwrap() {
            assert!(scores.best_on_test.score >= f1 - 1e-12);
        }
        assert!(scores.oracle >= scores.best_on_test.score - 1e-12);
        assert!(scores.oracle >= scores.ensemble - 1e-12);
    }
}

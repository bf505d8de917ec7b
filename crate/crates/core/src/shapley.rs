//! Exact Shapley values, pairwise Shapley interactions, the order-2
//! decomposition, additive reconstructions, and coalition selection.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::game::{Coalition, CompositionGame, MAX_PLAYERS};

/// Exact per-player and pairwise attribution of a game, plus the derived
/// order-2 decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyReport {
    pub player_names: Vec<String>,
    /// Performance of the base composition.
    pub baseline: f64,
    /// Performance of the full composition.
    pub full_value: f64,
    /// Exact Shapley value per player.
    pub sv: Vec<f64>,
    /// Pairwise Shapley interaction per unordered pair (i < j).
    pub sii_pairs: Vec<PairValue>,
    /// Order-1 terms of the efficient order-2 decomposition.
    pub two_sii_order1: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairValue {
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

impl ShapleyReport {
    pub fn pair(&self, i: usize, j: usize) -> Option<f64> {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.sii_pairs
            .iter()
            .find(|p| p.i == a && p.j == b)
            .map(|p| p.value)
    }

    pub fn player_count(&self) -> usize {
        self.sv.len()
    }
}

fn factorials(n: usize) -> Vec<f64> {
    let mut f = vec![1.0; n + 1];
    for i in 1..=n {
        f[i] = f[i - 1] * i as f64;
    }
    f
}

fn check_size(game: &CompositionGame) -> Result<()> {
    if game.player_count > MAX_PLAYERS {
        return Err(CoreError::Game(format!(
            "exact computation is bounded at {MAX_PLAYERS} players, got {}",
            game.player_count
        )));
    }
    if game.values.len() != 1 << game.player_count {
        return Err(CoreError::Game("game value table is not total".into()));
    }
    Ok(())
}

/// Exact Shapley values:
/// phi_i = sum over S not containing i of |S|!(n-|S|-1)!/n! * (v(S+i) - v(S)).
pub fn exact_shapley(game: &CompositionGame) -> Result<Vec<f64>> {
    check_size(game)?;
    let n = game.player_count;
    let fact = factorials(n);
    let mut phi = vec![0.0; n];
    for mask in 0..(1u32 << n) {
        let s = mask.count_ones() as usize;
        if s == n {
            // The full coalition contains every player.
            continue;
        }
        let weight = fact[s] * fact[n - s - 1] / fact[n];
        for (i, value) in phi.iter_mut().enumerate() {
            if mask & (1 << i) == 0 {
                let with = game.values[(mask | (1 << i)) as usize];
                let without = game.values[mask as usize];
                *value += weight * (with - without);
            }
        }
    }
    Ok(phi)
}

/// Pairwise Shapley interaction indices:
/// phi_ij = sum over S disjoint from {i,j} of |S|!(n-|S|-2)!/(n-1)! *
///          (v(S+ij) - v(S+i) - v(S+j) + v(S)).
pub fn pairwise_sii(game: &CompositionGame) -> Result<Vec<PairValue>> {
    check_size(game)?;
    let n = game.player_count;
    if n < 2 {
        return Err(CoreError::Game(
            "pairwise interactions need at least two players".into(),
        ));
    }
    let fact = factorials(n);
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let pair_mask = (1u32 << i) | (1 << j);
            let mut value = 0.0;
            for mask in 0..(1u32 << n) {
                if mask & pair_mask != 0 {
                    continue;
                }
                let s = mask.count_ones() as usize;
                let weight = fact[s] * fact[n - s - 2] / fact[n - 1];
                let v = &game.values;
                value += weight
                    * (v[(mask | pair_mask) as usize]
                        - v[(mask | (1 << i)) as usize]
                        - v[(mask | (1 << j)) as usize]
                        + v[mask as usize]);
            }
            pairs.push(PairValue { i, j, value });
        }
    }
    Ok(pairs)
}

/// The order-2 decomposition: order-2 terms are the pairwise SIIs and the
/// order-1 terms subtract half of each player's interaction mass from its
/// Shapley value, which makes the decomposition efficient:
/// sum(order1) + sum(pairs) = v(T) - v(empty).
pub fn two_sii(game: &CompositionGame) -> Result<ShapleyReport> {
    let sv = exact_shapley(game)?;
    let sii_pairs = pairwise_sii(game)?;
    let mut order1 = sv.clone();
    for p in &sii_pairs {
        order1[p.i] -= 0.5 * p.value;
        order1[p.j] -= 0.5 * p.value;
    }
    Ok(ShapleyReport {
        player_names: game.player_names.clone(),
        baseline: game.baseline(),
        full_value: game.full_value(),
        sv,
        sii_pairs,
        two_sii_order1: order1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    Sv,
    Si,
}

impl std::str::FromStr for SelectionMode {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sv" => Ok(SelectionMode::Sv),
            "si" => Ok(SelectionMode::Si),
            other => Err(CoreError::Game(format!("unknown selection mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub mode: SelectionMode,
    pub best: Coalition,
    /// Reconstructed score per coalition, indexed by bitmask.
    pub predicted: Vec<f64>,
}

/// Additive reconstruction of the game from the report:
/// SV mode: baseline + sum of member SVs;
/// SI mode: baseline + sum of member order-1 terms + sum of inner pair terms.
/// Returns the argmax coalition; ties break to smaller coalitions, then lower
/// bitmasks.
pub fn reconstruct_and_select(report: &ShapleyReport, mode: SelectionMode) -> SelectionResult {
    let n = report.player_count();
    let mut predicted = Vec::with_capacity(1 << n);
    for mask in 0..(1u32 << n) {
        let mut score = report.baseline;
        match mode {
            SelectionMode::Sv => {
                for i in 0..n {
                    if mask & (1 << i) != 0 {
                        score += report.sv[i];
                    }
                }
            }
            SelectionMode::Si => {
                for i in 0..n {
                    if mask & (1 << i) != 0 {
                        score += report.two_sii_order1[i];
                    }
                }
                for p in &report.sii_pairs {
                    if mask & (1 << p.i) != 0 && mask & (1 << p.j) != 0 {
                        score += p.value;
                    }
                }
            }
        }
        predicted.push(score);
    }
    let mut best = Coalition::empty();
    let mut best_score = predicted[0];
    for (mask, &score) in predicted.iter().enumerate().skip(1) {
        let candidate = Coalition(mask as u32);
        let better = score > best_score
            || (score == best_score
                && (candidate.len() < best.len()
                    || (candidate.len() == best.len() && candidate.0 < best.0)));
        if better {
            best = candidate;
            best_score = score;
        }
    }
    SelectionResult {
        mode,
        best,
        predicted,
    }
}

/// Synthesize a game from Möbius coefficients: v(S) = sum over L subset of S
/// of m(L). Used to build games with known interaction structure.
pub fn game_from_moebius(n: usize, coefficients: &[(Coalition, f64)]) -> CompositionGame {
    let mut values = vec![0.0; 1 << n];
    for (mask, value) in values.iter_mut().enumerate() {
        for (support, coeff) in coefficients {
            if support.0 & mask as u32 == support.0 {
                *value += coeff;
            }
        }
    }
    CompositionGame::from_values(values, "synthetic")
}

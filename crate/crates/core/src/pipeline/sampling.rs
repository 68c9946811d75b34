//! Fine-tuning samplers: loss-proportional importance weights and inverse
//! class-frequency balancing.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::rng;

/// Normalized sampling distribution over items.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SamplingWeights {
    probabilities: Vec<f64>,
    cumulative: Vec<f64>,
}

impl SamplingWeights {
    pub fn new(raw: &[f64]) -> Result<Self> {
        if raw.is_empty() {
            return Err(CoreError::Precondition("no weights given".into()));
        }
        if raw.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(CoreError::Precondition(
                "weights must be finite and non-negative".into(),
            ));
        }
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return Err(CoreError::Precondition(
                "weights sum to zero; nothing to sample".into(),
            ));
        }
        let probabilities: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mut cumulative = Vec::with_capacity(probabilities.len());
        let mut acc = 0.0;
        for p in &probabilities {
            acc += p;
            cumulative.push(acc);
        }
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Ok(SamplingWeights {
            probabilities,
            cumulative,
        })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }
}

/// Oversampling weights proportional to per-view loss magnitude.
pub fn importance_weights(view_losses: &[f64]) -> Result<SamplingWeights> {
    if view_losses.iter().any(|l| *l < 0.0) {
        return Err(CoreError::Precondition("losses must be >= 0".into()));
    }
    SamplingWeights::new(view_losses).map_err(|_| {
        CoreError::Precondition("all view losses are zero; nothing to emphasize".into())
    })
}

/// Per-item weights inversely proportional to the item's category frequency;
/// expected per-category draw counts become equal.
pub fn class_balance_weights(item_categories: &[String]) -> Result<SamplingWeights> {
    if item_categories.is_empty() {
        return Err(CoreError::Precondition("no items given".into()));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for c in item_categories {
        *counts.entry(c.as_str()).or_insert(0) += 1;
    }
    let raw: Vec<f64> = item_categories
        .iter()
        .map(|c| 1.0 / counts[c.as_str()] as f64)
        .collect();
    SamplingWeights::new(&raw)
}

/// `n` independent draws with replacement; counter-based and deterministic
/// per seed regardless of the evaluation order.
pub fn sample_batch(weights: &SamplingWeights, n: usize, seed: u64) -> Vec<usize> {
    let stream = rng::derive_seed(seed, "sample-batch");
    (0..n as u64)
        .map(|i| {
            let u = rng::counter_uniform(stream, i);
            // First index whose cumulative mass exceeds u; zero-probability
            // items have zero-width intervals and cannot be selected.
            match weights
                .cumulative
                .binary_search_by(|c| c.partial_cmp(&u).unwrap())
            {
                Ok(mut j) => {
                    // Landed exactly on a boundary: move to the next
                    // positive-probability item.
                    while j + 1 < weights.cumulative.len() && weights.probabilities[j + 1] == 0.0 {
                        j += 1;
                    }
                    (j + 1).min(weights.cumulative.len() - 1)
                }
                Err(j) => j,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn importance_weights_are_proportional() {
        let w = importance_weights(&[1.0, 3.0]).unwrap();
        assert_eq!(w.probabilities(), &[0.25, 0.75]);
        let w = importance_weights(&[2.0, 2.0, 2.0]).unwrap();
        for p in w.probabilities() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!(importance_weights(&[0.0, 0.0]).is_err());
        assert!(importance_weights(&[-1.0, 2.0]).is_err());
    }

    #[test]
    fn importance_draws_match_probabilities() {
        let w = importance_weights(&[1.0, 3.0]).unwrap();
        let draws = sample_batch(&w, 100_000, 9);
        let ones = draws.iter().filter(|d| **d == 1).count() as f64 / 100_000.0;
        assert!((ones - 0.75).abs() < 0.02, "fraction {ones}");
    }

    #[test]
    fn class_balance_equalizes_categories() {
        // 35 cars, 1 mug: per-item weights 1/35 vs 1.
        let mut cats: Vec<String> = vec!["car".into(); 35];
        cats.push("mug".into());
        let w = class_balance_weights(&cats).unwrap();
        let ratio = w.probabilities()[35] / w.probabilities()[0];
        assert!((ratio - 35.0).abs() < 1e-9);

        // Draws per category become equal within 2%.
        let mut cats: Vec<String> = vec!["a".into(); 100];
        cats.extend(vec!["b".into(); 10]);
        let w = class_balance_weights(&cats).unwrap();
        let draws = sample_batch(&w, 100_000, 4);
        let a = draws.iter().filter(|d| **d < 100).count() as f64;
        let b = draws.len() as f64 - a;
        assert!((a - b).abs() / (draws.len() as f64) < 0.02, "a {a} b {b}");
    }

    #[test]
    fn single_category_is_uniform() {
        let cats: Vec<String> = vec!["x".into(); 8];
        let w = class_balance_weights(&cats).unwrap();
        for p in w.probabilities() {
            assert!((p - 0.125).abs() < 1e-15);
        }
    }

    #[test]
    fn point_mass_always_draws_that_index() {
        let w = SamplingWeights::new(&[0.0, 0.0, 5.0, 0.0]).unwrap();
        let draws = sample_batch(&w, 1000, 1);
        assert!(draws.iter().all(|d| *d == 2));
    }

    #[test]
    fn zero_weight_items_are_never_sampled() {
        let w = SamplingWeights::new(&[1.0, 0.0, 1.0, 0.0, 2.0]).unwrap();
        let draws = sample_batch(&w, 50_000, 7);
        assert!(draws.iter().all(|d| *d != 1 && *d != 3));
    }

    #[test]
    fn uniform_weights_cover_all_indices() {
        let w = SamplingWeights::new(&[1.0; 20]).unwrap();
        let draws = sample_batch(&w, 2000, 3);
        let mut seen = vec![false; 20];
        for d in draws {
            seen[d] = true;
        }
        assert!(seen.iter().all(|s| *s));
    }

    #[test]
    fn draws_are_seed_deterministic() {
        let w = SamplingWeights::new(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(sample_batch(&w, 100, 5), sample_batch(&w, 100, 5));
        assert_ne!(sample_batch(&w, 100, 5), sample_batch(&w, 100, 6));
    }

    #[test]
    fn empirical_total_variation_is_small() {
        // Spec property: TV distance < 0.02 at 1e5 draws for both samplers.
        let targets = [0.1, 0.4, 0.2, 0.3];
        let w = SamplingWeights::new(&targets).unwrap();
        let n = 100_000;
        let draws = sample_batch(&w, n, 11);
        let mut counts = [0usize; 4];
        for d in draws {
            counts[d] += 1;
        }
        let tv: f64 = counts
            .iter()
            .zip(&targets)
            .map(|(c, t)| (*c as f64 / n as f64 - t).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.02, "total variation {tv}");
    }
}

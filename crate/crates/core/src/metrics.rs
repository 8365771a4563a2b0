//! Aggregate evaluation metrics for sorting and TSP predictions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::permutation::{accuracy_and_correctness, kendall_tau, Permutation};
use crate::scalar::Real;
use crate::tasks::{optimality_gap, tour_length, TspInstance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SortingMetrics {
    pub kendall_tau: f64,
    /// Fraction of exactly recovered permutations.
    pub accuracy: f64,
    /// Fraction of items placed at their true rank.
    pub correctness: f64,
    pub count: usize,
}

/// Accuracy and correctness are exact counts divided once at the end.
pub fn sorting_metrics(preds: &[Permutation], truths: &[Permutation]) -> Result<SortingMetrics> {
    if preds.len() != truths.len() {
        return Err(Error::SizeMismatch { expected: truths.len(), got: preds.len() });
    }
    if preds.is_empty() {
        return Err(Error::InvalidSize("no predictions to score".into()));
    }
    let mut tau_sum = 0.0;
    let mut exact = 0usize;
    let mut correct_items = 0usize;
    let mut total_items = 0usize;
    for (p, t) in preds.iter().zip(truths) {
        tau_sum += kendall_tau(p, t)?;
        if accuracy_and_correctness(p, t)?.exact_match {
            exact += 1;
        }
        correct_items += p.ranks().iter().zip(t.ranks()).filter(|(a, b)| a == b).count();
        total_items += t.len();
    }
    let count = preds.len();
    Ok(SortingMetrics {
        kendall_tau: tau_sum / count as f64,
        accuracy: exact as f64 / count as f64,
        correctness: correct_items as f64 / total_items as f64,
        count,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TspMetrics {
    pub mean_tour_length: f64,
    /// Present when every instance carries its optimum.
    pub mean_gap: Option<f64>,
    pub count: usize,
}

/// Scores rank-form predictions; the visit order of `σ` is `σ⁻¹`.
pub fn tsp_metrics<T: Real>(instances: &[TspInstance<T>], preds: &[Permutation]) -> Result<TspMetrics> {
    if preds.len() != instances.len() {
        return Err(Error::SizeMismatch { expected: instances.len(), got: preds.len() });
    }
    if preds.is_empty() {
        return Err(Error::InvalidSize("no predictions to score".into()));
    }
    let mut length_sum = 0.0;
    let mut gap_sum = Some(0.0);
    for (inst, sigma) in instances.iter().zip(preds) {
        let length = tour_length(&inst.points, &sigma.inverse())?;
        length_sum += length.to_f64_lossy();
        gap_sum = match (gap_sum, inst.optimal_length) {
            (Some(acc), Some(opt)) => Some(acc + optimality_gap(length, opt)?.to_f64_lossy()),
            _ => None,
        };
    }
    let count = preds.len();
    Ok(TspMetrics {
        mean_tour_length: length_sum / count as f64,
        mean_gap: gap_sum.map(|g| g / count as f64),
        count,
    })
}

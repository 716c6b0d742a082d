//! External clustering quality metrics: V-measure, Rand index, and pairwise
//! F-measure.

use std::collections::HashMap;

use crate::error::{Error, Result};

fn check_lengths(predicted: &[usize], truth: &[usize]) -> Result<()> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), got: predicted.len() });
    }
    if predicted.is_empty() {
        return Err(Error::NoRows);
    }
    Ok(())
}

fn contingency(predicted: &[usize], truth: &[usize]) -> HashMap<(usize, usize), usize> {
    let mut table = HashMap::new();
    for (&p, &t) in predicted.iter().zip(truth) {
        *table.entry((t, p)).or_insert(0) += 1;
    }
    table
}

fn entropy_of(labels: &[usize]) -> f64 {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0) += 1;
    }
    let n = labels.len() as f64;
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Harmonic mean of entropy-based homogeneity and completeness. A degenerate
/// side (zero entropy) counts as perfect for that side, matching the usual
/// convention.
pub fn v_measure(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(predicted, truth)?;
    let n = truth.len() as f64;
    let h_truth = entropy_of(truth);
    let h_pred = entropy_of(predicted);

    let mut truth_counts: HashMap<usize, usize> = HashMap::new();
    let mut pred_counts: HashMap<usize, usize> = HashMap::new();
    for (&p, &t) in predicted.iter().zip(truth) {
        *truth_counts.entry(t).or_insert(0) += 1;
        *pred_counts.entry(p).or_insert(0) += 1;
    }
    let mut mutual_information = 0.0;
    for ((t, p), &joint) in &contingency(predicted, truth) {
        let p_joint = joint as f64 / n;
        let p_t = truth_counts[t] as f64 / n;
        let p_p = pred_counts[p] as f64 / n;
        mutual_information += p_joint * (p_joint / (p_t * p_p)).ln();
    }

    let homogeneity = if h_truth == 0.0 { 1.0 } else { mutual_information / h_truth };
    let completeness = if h_pred == 0.0 { 1.0 } else { mutual_information / h_pred };
    if homogeneity + completeness == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * homogeneity * completeness / (homogeneity + completeness))
}

/// Pair counts shared by the Rand index and the pairwise F-measure.
struct PairCounts {
    same_both: f64,
    diff_both: f64,
    same_pred: f64,
    same_truth: f64,
    total: f64,
}

fn pair_counts(predicted: &[usize], truth: &[usize]) -> PairCounts {
    let n = truth.len();
    let mut counts =
        PairCounts { same_both: 0.0, diff_both: 0.0, same_pred: 0.0, same_truth: 0.0, total: 0.0 };
    for i in 0..n {
        for j in i + 1..n {
            let same_t = truth[i] == truth[j];
            let same_p = predicted[i] == predicted[j];
            counts.total += 1.0;
            if same_p {
                counts.same_pred += 1.0;
            }
            if same_t {
                counts.same_truth += 1.0;
            }
            if same_t && same_p {
                counts.same_both += 1.0;
            }
            if !same_t && !same_p {
                counts.diff_both += 1.0;
            }
        }
    }
    counts
}

/// Unadjusted fraction of point pairs on which the two partitions agree.
pub fn rand_index(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(predicted, truth)?;
    if truth.len() == 1 {
        return Ok(1.0);
    }
    let c = pair_counts(predicted, truth);
    Ok((c.same_both + c.diff_both) / c.total)
}

/// F1 over same-cluster pairs: precision against predicted pairs, recall
/// against true pairs. Identical partitions (up to relabeling) score 1.
pub fn pairwise_f_measure(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(predicted, truth)?;
    let c = pair_counts(predicted, truth);
    if c.same_pred == 0.0 && c.same_truth == 0.0 {
        return Ok(1.0); // all singletons on both sides
    }
    if c.same_both == 0.0 {
        return Ok(0.0);
    }
    let precision = c.same_both / c.same_pred;
    let recall = c.same_both / c.same_truth;
    Ok(2.0 * precision * recall / (precision + recall))
}

//! Top-tau ranking metrics over a held-out test set.

use std::collections::HashSet;
use std::io::Write;

use crate::error::{Error, Result};

/// Mean precision, recall, and average precision at each cutoff, over the
/// users that carry a nonempty test set.
#[derive(Debug, Clone)]
pub struct RankingMetrics {
    pub tau_list: Vec<usize>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub map: Vec<f64>,
    pub n_users_evaluated: usize,
    pub n_users_skipped: usize,
}

impl RankingMetrics {
    /// Tab-separated report with one row per cutoff.
    pub fn write_tsv(&self, out: &mut impl Write) -> Result<()> {
        let io = |e| Error::io("writing metrics report", e);
        writeln!(out, "tau\tprecision\trecall\tmap").map_err(io)?;
        for (i, &tau) in self.tau_list.iter().enumerate() {
            writeln!(
                out,
                "{tau}\t{:.6}\t{:.6}\t{:.6}",
                self.precision[i], self.recall[i], self.map[i]
            )
            .map_err(io)?;
        }
        Ok(())
    }
}

/// Computes Precision@tau, Recall@tau, and MAP@tau for each cutoff.
///
/// Average precision at a cutoff sums precision at the ranks of the relevant
/// recommendations and normalizes by `min(tau, |test set|)`, so it stays in
/// [0, 1]. Users with an empty test set are skipped and counted.
pub fn ranking_metrics(
    recommendations: &[Vec<u32>],
    test_sets: &[HashSet<u32>],
    tau_list: &[usize],
) -> Result<RankingMetrics> {
    if recommendations.len() != test_sets.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} recommendation lists for {} test sets",
            recommendations.len(),
            test_sets.len()
        )));
    }
    if tau_list.is_empty() {
        return Err(Error::param("tau_list", "must not be empty".to_string()));
    }
    for &tau in tau_list {
        if tau == 0 {
            return Err(Error::param("tau_list", "cutoffs must be >= 1".to_string()));
        }
    }

    let n_taus = tau_list.len();
    let mut precision_sum = vec![0.0f64; n_taus];
    let mut recall_sum = vec![0.0f64; n_taus];
    let mut ap_sum = vec![0.0f64; n_taus];
    let mut evaluated = 0usize;
    let mut skipped = 0usize;

    for (recs, test) in recommendations.iter().zip(test_sets) {
        if test.is_empty() {
            skipped += 1;
            continue;
        }
        evaluated += 1;
        for (t, &tau) in tau_list.iter().enumerate() {
            let mut hits = 0usize;
            let mut ap = 0.0f64;
            for r in 1..=tau {
                if r > recs.len() {
                    break;
                }
                if test.contains(&recs[r - 1]) {
                    hits += 1;
                    ap += hits as f64 / r as f64;
                }
            }
            precision_sum[t] += hits as f64 / tau as f64;
            recall_sum[t] += hits as f64 / test.len() as f64;
            ap_sum[t] += ap / tau.min(test.len()) as f64;
        }
    }

    if evaluated == 0 {
        return Err(Error::param(
            "test_sets",
            "no user has a nonempty test set".to_string(),
        ));
    }

    let n = evaluated as f64;
    Ok(RankingMetrics {
        tau_list: tau_list.to_vec(),
        precision: precision_sum.into_iter().map(|s| s / n).collect(),
        recall: recall_sum.into_iter().map(|s| s / n).collect(),
        map: ap_sum.into_iter().map(|s| s / n).collect(),
        n_users_evaluated: evaluated,
        n_users_skipped: skipped,
    })
}

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::{probe_predict, ProbeExample, ProbeModel};
use crate::corpus::TreeDistanceMatrix;
use crate::stats::spearman;
use crate::{Error, Result};

pub const MIN_EVAL_LEN: usize = 5;
pub const MAX_EVAL_LEN: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LengthStat {
    pub mean_spearman: f64,
    /// Snippets of this length that contributed.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpearmanReport {
    /// Mean snippet score per snippet length, for lengths in `5..=50`.
    pub per_length: BTreeMap<usize, LengthStat>,
    /// Macro average of the per-length means; `None` if no length qualified.
    pub dspr: Option<f64>,
    /// Word rows skipped because a row was constant.
    pub skipped_rows: usize,
}

/// Mean row-wise Spearman correlation of one snippet, or `None` when every
/// row is constant. Also returns the number of skipped rows.
fn snippet_score(pred: &[f64], gold: &TreeDistanceMatrix) -> (Option<f64>, usize) {
    let n = gold.n();
    let mut total = 0.0;
    let mut used = 0usize;
    for i in 0..n {
        let gold_row: Vec<f64> = gold.row(i).iter().map(|&d| d as f64).collect();
        if let Some(r) = spearman(&pred[i * n..(i + 1) * n], &gold_row) {
            total += r;
            used += 1;
        }
    }
    let skipped = n - used;
    ((used > 0).then(|| total / used as f64), skipped)
}

/// Builds a Spearman report from predicted distance matrices. Each item is a
/// row-major `n × n` prediction and the matching gold distances.
pub fn eval_predictions<'a, I>(items: I) -> Result<SpearmanReport>
where
    I: IntoIterator<Item = (Vec<f64>, &'a TreeDistanceMatrix)>,
{
    let mut by_len: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    let mut skipped_rows = 0;
    let mut seen = 0;
    for (pred, gold) in items {
        seen += 1;
        let n = gold.n();
        if pred.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                actual: pred.len(),
            });
        }
        if !(MIN_EVAL_LEN..=MAX_EVAL_LEN).contains(&n) {
            continue;
        }
        let (score, skipped) = snippet_score(&pred, gold);
        skipped_rows += skipped;
        if let Some(s) = score {
            let entry = by_len.entry(n).or_default();
            entry.0 += s;
            entry.1 += 1;
        }
    }
    if seen == 0 {
        return Err(Error::EmptyEvalSet);
    }
    let per_length: BTreeMap<usize, LengthStat> = by_len
        .into_iter()
        .map(|(n, (sum, count))| {
            (
                n,
                LengthStat {
                    mean_spearman: sum / count as f64,
                    count,
                },
            )
        })
        .collect();
    let dspr = (!per_length.is_empty()).then(|| {
        per_length.values().map(|s| s.mean_spearman).sum::<f64>() / per_length.len() as f64
    });
    Ok(SpearmanReport {
        per_length,
        dspr,
        skipped_rows,
    })
}

/// Scores `model` on `examples`: for each snippet the Spearman correlation
/// between predicted and gold distance rows is averaged over words, snippet
/// scores are averaged per length, and the per-length means over `5..=50`
/// are macro-averaged into `dspr`.
pub fn eval_spearman(model: &ProbeModel, examples: &[ProbeExample]) -> Result<SpearmanReport> {
    if examples.is_empty() {
        return Err(Error::EmptyEvalSet);
    }
    let preds: Vec<Vec<f64>> = examples
        .par_iter()
        .map(|e| probe_predict(model, &e.states))
        .collect::<Result<_>>()?;
    eval_predictions(preds.into_iter().zip(examples.iter().map(|e| &e.distances)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gold(n: usize) -> TreeDistanceMatrix {
        TreeDistanceMatrix::from_fn(n, |i, j| if i == j { 0 } else { 2 + (i + j) as u32 % 3 })
    }

    fn as_pred(g: &TreeDistanceMatrix, f: impl Fn(f64) -> f64) -> Vec<f64> {
        g.as_slice().iter().map(|&d| f(d as f64)).collect()
    }

    #[test]
    fn perfect_and_monotone_predictions() {
        let golds: Vec<_> = (5..9).map(gold).collect();
        let exact = eval_predictions(golds.iter().map(|g| (as_pred(g, |d| d), g))).unwrap();
        assert_eq!(exact.dspr, Some(1.0));
        let affine = eval_predictions(golds.iter().map(|g| (as_pred(g, |d| 7.0 * d + 3.0), g))).unwrap();
        assert_eq!(affine.dspr, Some(1.0));
        assert_eq!(exact.per_length.len(), 4);
    }

    #[test]
    fn lengths_outside_range_are_ignored() {
        let short = gold(4);
        let report = eval_predictions([(as_pred(&short, |d| d), &short)]).unwrap();
        assert!(report.per_length.is_empty());
        assert_eq!(report.dspr, None);
        assert!(matches!(
            eval_predictions(Vec::<(Vec<f64>, &TreeDistanceMatrix)>::new()),
            Err(Error::EmptyEvalSet)
        ));
    }

    #[test]
    fn constant_rows_are_skipped() {
        let g = gold(5);
        let report = eval_predictions([(vec![1.0; 25], &g)]).unwrap();
        assert_eq!(report.skipped_rows, 5);
        assert_eq!(report.dspr, None);
    }
}

use serde::{Deserialize, Serialize};

use super::{train_forest, ForestError, ForestParams};
use crate::exec::Execution;
use crate::features::BinnedMatrix;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub community: String,
    pub truth: bool,
    pub predicted: bool,
    pub votes_true: usize,
    pub votes_total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoocvReport {
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub majority_baseline: f64,
    pub folds: Vec<FoldResult>,
}

/// Leave-one-out cross-validation. Fold `i` trains on every other row with
/// the seed stream `(params.seed, i)` and predicts row `i`.
pub fn loocv(
    matrix: &BinnedMatrix,
    labels: &[bool],
    params: &ForestParams,
    exec: Execution,
) -> Result<LoocvReport, ForestError> {
    let n = matrix.n_rows();
    if n < 2 {
        return Err(ForestError::InvalidParams("LOOCV needs at least 2 rows".into()));
    }
    if labels.len() != n {
        return Err(ForestError::LabelMismatch {
            rows: n,
            labels: labels.len(),
        });
    }
    params.validate()?;

    let folds = exec.map_indexed(n, |i| {
        let train = matrix.without_row(i);
        let train_labels: Vec<bool> = labels
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &l)| l)
            .collect();
        let fold_params = ForestParams {
            seed: seed::derive(params.seed, &[i as u64]),
            ..params.clone()
        };
        // Trees stay sequential inside a fold; the folds are the parallel unit.
        let forest = train_forest(&train, &train_labels, &fold_params, Execution::Sequential)?;
        let vote = forest.predict(&matrix.row_map(i));
        Ok(FoldResult {
            community: matrix.communities[i].clone(),
            truth: labels[i],
            predicted: vote.label,
            votes_true: vote.votes_true,
            votes_total: vote.votes_total,
        })
    });
    let folds = folds.into_iter().collect::<Result<Vec<_>, ForestError>>()?;
    let correct = folds.iter().filter(|f| f.truth == f.predicted).count();
    Ok(LoocvReport {
        n,
        correct,
        accuracy: correct as f64 / n as f64,
        majority_baseline: majority_baseline(labels),
        folds,
    })
}

/// Share of the most frequent class.
pub fn majority_baseline(labels: &[bool]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let pos = labels.iter().filter(|&&l| l).count();
    pos.max(labels.len() - pos) as f64 / labels.len() as f64
}

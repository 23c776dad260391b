use serde::{Deserialize, Serialize};

use super::knn::KnnClassifier;
use super::{Classifier, LabeledDataset, Trainer};
use crate::eps_plant::FaultKind;
use crate::error::{Error, Result};

fn error_rate(truth: &[FaultKind], predicted: &[FaultKind]) -> f64 {
    let wrong = truth.iter().zip(predicted).filter(|(a, b)| a != b).count();
    wrong as f64 / truth.len() as f64
}

/// Misclassification rate of `model` on the data it was trained on.
pub fn resubstitution_loss<C: Classifier + ?Sized>(model: &C, data: &LabeledDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Data("resubstitution loss of an empty dataset".into()));
    }
    Ok(error_rate(&data.labels, &model.predict(&data.features)?))
}

/// Mean held-out misclassification rate over stratified folds.
pub fn kfold_loss<T: Trainer + ?Sized>(
    trainer: &T,
    data: &LabeledDataset,
    k_folds: usize,
    seed: u64,
) -> Result<f64> {
    let folds = data.stratified_folds(k_folds, seed)?;
    let mut total = 0.0;
    for held in &folds {
        let train: Vec<usize> = (0..data.len()).filter(|i| held.binary_search(i).is_err()).collect();
        let model = trainer.train(&data.subset(&train))?;
        let test = data.subset(held);
        total += error_rate(&test.labels, &model.predict(&test.features)?);
    }
    Ok(total / folds.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KLoss {
    pub k: usize,
    pub kfold_loss: f64,
    pub resubstitution_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub chosen_k: usize,
    pub table: Vec<KLoss>,
}

/// Picks the neighbourhood size with the lowest k-fold loss.
///
/// Among equally good candidates the smallest `k > 2` wins, since `k = 1`
/// and `k = 2` merely memorise the training set; if no such candidate ties,
/// the smallest `k` wins.
pub fn knn_select_k(data: &LabeledDataset, candidates: &[usize], folds: usize, seed: u64) -> Result<KSelection> {
    if candidates.is_empty() {
        return Err(Error::config("k_candidates", "must not be empty"));
    }
    let mut ks = candidates.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let k_max = *ks.last().unwrap();

    // neighbour lists are computed once for the largest k and reused
    let fold_sets = data.stratified_folds(folds, seed)?;
    let mut wrong_kfold = vec![0.0; ks.len()];
    for held in &fold_sets {
        let train: Vec<usize> = (0..data.len()).filter(|i| held.binary_search(i).is_err()).collect();
        let store = KnnClassifier::fit(&data.subset(&train), k_max.min(train.len()))?;
        let truth = data.label_indices();
        let mut wrong = vec![0usize; ks.len()];
        for &q in held {
            let nb = store.neighbours(&data.row(q), k_max);
            for (slot, &k) in ks.iter().enumerate() {
                if store.vote(&nb[..k.min(nb.len())]) != truth[q] {
                    wrong[slot] += 1;
                }
            }
        }
        for (acc, w) in wrong_kfold.iter_mut().zip(wrong) {
            *acc += w as f64 / held.len() as f64;
        }
    }

    let store = KnnClassifier::fit(data, k_max.min(data.len()))?;
    let truth = data.label_indices();
    let mut wrong_resub = vec![0usize; ks.len()];
    for (q, &t) in truth.iter().enumerate() {
        let nb = store.neighbours(&data.row(q), k_max);
        for (slot, &k) in ks.iter().enumerate() {
            if store.vote(&nb[..k.min(nb.len())]) != t {
                wrong_resub[slot] += 1;
            }
        }
    }

    let table: Vec<KLoss> = ks
        .iter()
        .enumerate()
        .map(|(s, &k)| KLoss {
            k,
            kfold_loss: wrong_kfold[s] / fold_sets.len() as f64,
            resubstitution_loss: wrong_resub[s] as f64 / data.len() as f64,
        })
        .collect();
    let best = table.iter().map(|r| r.kfold_loss).fold(f64::INFINITY, f64::min);
    let tied: Vec<usize> = table.iter().filter(|r| r.kfold_loss == best).map(|r| r.k).collect();
    let chosen_k = tied.iter().copied().find(|&k| k > 2).unwrap_or(tied[0]);
    Ok(KSelection { chosen_k, table })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::knn::KnnTrainer;
    use nalgebra::DMatrix;

    fn separable() -> LabeledDataset {
        let order = vec![FaultKind::Healthy, FaultKind::BatteryGround];
        let xs: Vec<f64> = (0..10).map(|i| if i < 5 { i as f64 } else { 10.0 + i as f64 }).collect();
        let labels = (0..10).map(|i| order[usize::from(i >= 5)]).collect();
        LabeledDataset::new(DMatrix::from_column_slice(10, 1, &xs), labels, order).unwrap()
    }

    #[test]
    fn perfectly_separable_has_zero_losses() {
        let d = separable();
        let clf = KnnClassifier::fit(&d, 3).unwrap();
        assert_eq!(resubstitution_loss(&clf, &d).unwrap(), 0.0);
        assert_eq!(kfold_loss(&KnnTrainer(3), &d, 5, 1).unwrap(), 0.0);
    }

    #[test]
    fn selection_reuses_neighbour_lists_consistently() {
        let d = separable();
        let sel = knn_select_k(&d, &[1, 2, 3, 4], 5, 0).unwrap();
        assert_eq!(sel.table[0].resubstitution_loss, 0.0);
        assert_eq!(sel.chosen_k, 3);
        for row in &sel.table {
            let direct = kfold_loss(&KnnTrainer(row.k), &d, 5, 0).unwrap();
            assert!((direct - row.kfold_loss).abs() < 1e-15);
        }
        assert_eq!(sel, knn_select_k(&d, &[4, 3, 2, 1], 5, 0).unwrap());
    }
}

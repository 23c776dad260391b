use nalgebra::DMatrix;

use super::{Classifier, LabeledDataset, Trainer};
use crate::eps_plant::FaultKind;
use crate::error::{Error, Result};
use crate::sysid::{train_lm, MlpRegressor, TrainConfig};

/// Perceptron with one output unit per class.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpClassifier {
    pub core: MlpRegressor,
    pub class_order: Vec<FaultKind>,
}

/// Index of the largest value; the first one wins on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub const MIN_SAMPLES_PER_CLASS: usize = 10;

/// Trains on one-hot targets with Levenberg–Marquardt.
pub fn mlp_classifier_train(data: &LabeledDataset, config: &TrainConfig) -> Result<MlpClassifier> {
    if data.n_classes() < 2 {
        return Err(Error::Training("need at least two classes".into()));
    }
    let counts = data.class_counts();
    if let Some(c) = counts.iter().position(|&n| n < MIN_SAMPLES_PER_CLASS) {
        return Err(Error::Training(format!(
            "class {} has {} samples, need at least {MIN_SAMPLES_PER_CLASS}",
            data.class_order[c], counts[c]
        )));
    }
    let idx = data.label_indices();
    let targets = DMatrix::from_fn(data.len(), data.n_classes(), |r, c| if idx[r] == c { 1.0 } else { 0.0 });
    let (core, _) = train_lm(&data.features, &targets, config)?;
    Ok(MlpClassifier {
        core,
        class_order: data.class_order.clone(),
    })
}

impl MlpClassifier {
    pub fn scores(&self, features: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.core.predict(features)
    }
}

impl Classifier for MlpClassifier {
    fn predict(&self, features: &DMatrix<f64>) -> Result<Vec<FaultKind>> {
        let y = self.scores(features)?;
        Ok(y.row_iter()
            .map(|r| {
                let v: Vec<f64> = r.iter().copied().collect();
                self.class_order[argmax(&v)]
            })
            .collect())
    }
}

#[derive(Debug, Clone)]
pub struct MlpTrainer(pub TrainConfig);

impl Trainer for MlpTrainer {
    type Model = MlpClassifier;
    fn train(&self, data: &LabeledDataset) -> Result<MlpClassifier> {
        mlp_classifier_train(data, &self.0)
    }
}

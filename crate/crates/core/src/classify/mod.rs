//! Fault classifiers and their evaluation.

mod confusion;
mod dataset;
mod eval;
mod id3;
mod knn;
mod mlp;
mod pca;
mod report;

use nalgebra::DMatrix;

use crate::eps_plant::FaultKind;
use crate::error::Result;

pub use confusion::{confusion_matrix, ConfusionMatrix};
pub use dataset::LabeledDataset;
pub use eval::{kfold_loss, knn_select_k, resubstitution_loss, KLoss, KSelection};
pub use id3::{
    entropy, id3_predict, id3_train, information_gain, root_split_candidates, DecisionTree, Id3Trainer, Node,
    SplitCandidate,
};
pub use knn::{euclidean, knn_predict, KnnClassifier, KnnTrainer};
pub use mlp::{argmax, mlp_classifier_train, MlpClassifier, MlpTrainer};
pub use pca::{pca_classify, pca_fit, pca_project, PcaClassifier, PcaModel, PcaTrainer};
pub use report::{comparison_table, EvaluationReport};

/// A trained model that labels feature rows.
pub trait Classifier {
    fn predict(&self, features: &DMatrix<f64>) -> Result<Vec<FaultKind>>;
}

/// Something that fits a [`Classifier`] to a dataset; used for k-fold loss.
pub trait Trainer {
    type Model: Classifier;
    fn train(&self, data: &LabeledDataset) -> Result<Self::Model>;
}

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{Classifier, LabeledDataset, Trainer};
use crate::eps_plant::FaultKind;
use crate::error::{Error, Result};

/// Principal axes of centred data.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: DVector<f64>,
    /// `n_features x n_components`, orthonormal columns by descending eigenvalue.
    pub components: DMatrix<f64>,
    /// Retained eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    pub n_components: usize,
}

/// Centres `features`, forms `C = X^T X / N` and keeps the leading eigenpairs.
///
/// Each eigenvector's sign is fixed so that its largest-magnitude entry is
/// positive.
pub fn pca_fit(features: &DMatrix<f64>, n_components: usize) -> Result<PcaModel> {
    let (n, d) = features.shape();
    if n < 2 {
        return Err(Error::Data(format!("need at least 2 samples, got {n}")));
    }
    if n_components == 0 || n_components > d {
        return Err(Error::config("n_components", format!("must lie in [1, {d}], got {n_components}")));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("features must be finite".into()));
    }
    let mean = features.row_mean().transpose();
    let mut x = features.clone();
    for mut row in x.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = x.tr_mul(&x) / n as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut components = DMatrix::zeros(d, n_components);
    let mut eigenvalues = Vec::with_capacity(n_components);
    for (c, &k) in order.iter().take(n_components).enumerate() {
        let mut v = eig.eigenvectors.column(k).into_owned();
        let pivot = v.iamax();
        if v[pivot] < 0.0 {
            v = -v;
        }
        components.set_column(c, &v);
        eigenvalues.push(eig.eigenvalues[k]);
    }
    Ok(PcaModel {
        mean,
        components,
        eigenvalues,
        n_components,
    })
}

/// `y = Q^T (x - mean)` for every row.
pub fn pca_project(model: &PcaModel, features: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if features.ncols() != model.mean.len() {
        return Err(Error::Shape(format!(
            "model has {} features, input has {}",
            model.mean.len(),
            features.ncols()
        )));
    }
    let mut x = features.clone();
    for mut row in x.row_iter_mut() {
        row -= model.mean.transpose();
    }
    Ok(x * &model.components)
}

/// Nearest class mean along the first principal axis.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaClassifier {
    pub model: PcaModel,
    /// Projected mean per class, `None` for classes absent from training.
    pub class_means: Vec<Option<f64>>,
    pub class_order: Vec<FaultKind>,
}

impl PcaClassifier {
    pub fn fit(train: &LabeledDataset) -> Result<Self> {
        let model = pca_fit(&train.features, 1)?;
        Self::with_model(model, train)
    }

    /// Uses an already fitted model; only its first component matters.
    pub fn with_model(model: PcaModel, train: &LabeledDataset) -> Result<Self> {
        let proj = pca_project(&model, &train.features)?;
        let mut sums = vec![0.0; train.n_classes()];
        let mut counts = vec![0usize; train.n_classes()];
        for (r, c) in train.label_indices().into_iter().enumerate() {
            sums[c] += proj[(r, 0)];
            counts[c] += 1;
        }
        let class_means = sums
            .iter()
            .zip(&counts)
            .map(|(s, &n)| (n > 0).then(|| s / n as f64))
            .collect();
        Ok(Self {
            model,
            class_means,
            class_order: train.class_order.clone(),
        })
    }

    fn nearest(&self, y: f64) -> usize {
        let mut best: Option<(usize, f64)> = None;
        for (c, m) in self.class_means.iter().enumerate() {
            if let Some(m) = m {
                let d = (y - m).abs();
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((c, d));
                }
            }
        }
        best.map_or(0, |(c, _)| c)
    }
}

/// Fits the nearest-projected-mean rule on `train` and classifies `query`.
pub fn pca_classify(model: &PcaModel, train: &LabeledDataset, query: &[f64]) -> Result<FaultKind> {
    let clf = PcaClassifier::with_model(model.clone(), train)?;
    Ok(clf.predict(&DMatrix::from_row_slice(1, query.len(), query))?[0])
}

impl Classifier for PcaClassifier {
    fn predict(&self, features: &DMatrix<f64>) -> Result<Vec<FaultKind>> {
        let proj = pca_project(&self.model, features)?;
        Ok((0..proj.nrows())
            .map(|r| self.class_order[self.nearest(proj[(r, 0)])])
            .collect())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PcaTrainer;

impl Trainer for PcaTrainer {
    type Model = PcaClassifier;
    fn train(&self, data: &LabeledDataset) -> Result<PcaClassifier> {
        PcaClassifier::fit(data)
    }
}

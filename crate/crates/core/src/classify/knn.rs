use nalgebra::DMatrix;

use super::{Classifier, LabeledDataset, Trainer};
use crate::eps_plant::FaultKind;
use crate::error::{Error, Result};

/// Lazy k-nearest-neighbour classifier over stored rows.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnClassifier {
    pub k: usize,
    pub points: DMatrix<f64>,
    /// Class index of every stored row.
    pub labels: Vec<usize>,
    pub class_order: Vec<FaultKind>,
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl KnnClassifier {
    pub fn fit(data: &LabeledDataset, k: usize) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::State("knn store is empty".into()));
        }
        if k == 0 || k > data.len() {
            return Err(Error::config("k", format!("must lie in [1, {}], got {k}", data.len())));
        }
        Ok(Self {
            k,
            points: data.features.clone(),
            labels: data.label_indices(),
            class_order: data.class_order.clone(),
        })
    }

    /// The `k_max` nearest stored rows as `(row, distance)`, nearest first;
    /// equal distances keep stored order.
    pub fn neighbours(&self, query: &[f64], k_max: usize) -> Vec<(usize, f64)> {
        let mut d: Vec<(usize, f64)> = self
            .points
            .row_iter()
            .enumerate()
            .map(|(i, r)| {
                let s: f64 = r.iter().zip(query).map(|(x, y)| (x - y) * (x - y)).sum();
                (i, s.sqrt())
            })
            .collect();
        let k_max = k_max.min(d.len());
        let order = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
        if k_max < d.len() {
            d.select_nth_unstable_by(k_max - 1, order);
            d.truncate(k_max);
        }
        d.sort_by(order);
        d
    }

    /// Majority vote among `neighbours`; ties go to the class with the
    /// smallest summed distance, then to the lowest class index.
    pub fn vote(&self, neighbours: &[(usize, f64)]) -> usize {
        let n = self.class_order.len();
        let mut votes = vec![0usize; n];
        let mut dist = vec![0.0; n];
        for &(i, d) in neighbours {
            votes[self.labels[i]] += 1;
            dist[self.labels[i]] += d;
        }
        let mut best = 0;
        for c in 1..n {
            if votes[c] > votes[best] || (votes[c] == votes[best] && dist[c] < dist[best]) {
                best = c;
            }
        }
        best
    }

    pub fn predict_one(&self, query: &[f64]) -> Result<FaultKind> {
        if self.labels.is_empty() {
            return Err(Error::State("knn store is empty".into()));
        }
        if query.len() != self.points.ncols() {
            return Err(Error::Shape(format!(
                "query has {} features, store has {}",
                query.len(),
                self.points.ncols()
            )));
        }
        Ok(self.class_order[self.vote(&self.neighbours(query, self.k))])
    }
}

pub fn knn_predict(clf: &KnnClassifier, query: &[f64]) -> Result<FaultKind> {
    clf.predict_one(query)
}

impl Classifier for KnnClassifier {
    fn predict(&self, features: &DMatrix<f64>) -> Result<Vec<FaultKind>> {
        features
            .row_iter()
            .map(|r| self.predict_one(&r.iter().copied().collect::<Vec<_>>()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KnnTrainer(pub usize);

impl Trainer for KnnTrainer {
    type Model = KnnClassifier;
    fn train(&self, data: &LabeledDataset) -> Result<KnnClassifier> {
        KnnClassifier::fit(data, self.0)
    }
}

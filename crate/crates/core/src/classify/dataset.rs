use nalgebra::DMatrix;
use rand::seq::SliceRandom;

use crate::eps_plant::FaultKind;
use crate::error::{Error, Result};
use crate::seed;

/// Feature rows with one label each and a fixed class order.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: DMatrix<f64>,
    pub labels: Vec<FaultKind>,
    pub class_order: Vec<FaultKind>,
}

impl LabeledDataset {
    pub fn new(features: DMatrix<f64>, labels: Vec<FaultKind>, class_order: Vec<FaultKind>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        for (i, c) in class_order.iter().enumerate() {
            if class_order[..i].contains(c) {
                return Err(Error::Label(format!("{c} (listed twice)")));
            }
        }
        if let Some(l) = labels.iter().find(|l| !class_order.contains(l)) {
            return Err(Error::Label(l.tag().into()));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("features must be finite".into()));
        }
        Ok(Self {
            features,
            labels,
            class_order,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_order.len()
    }

    pub fn class_index(&self, label: FaultKind) -> Result<usize> {
        self.class_order
            .iter()
            .position(|&c| c == label)
            .ok_or_else(|| Error::Label(label.tag().into()))
    }

    /// Label of every row as an index into `class_order`.
    pub fn label_indices(&self) -> Vec<usize> {
        self.labels
            .iter()
            .map(|&l| self.class_order.iter().position(|&c| c == l).unwrap())
            .collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for i in self.label_indices() {
            counts[i] += 1;
        }
        counts
    }

    pub fn row(&self, r: usize) -> Vec<f64> {
        self.features.row(r).iter().copied().collect()
    }

    pub fn subset(&self, idx: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            class_order: self.class_order.clone(),
        }
    }

    /// Row indices grouped by class and shuffled within each class.
    fn shuffled_by_class(&self, seed: u64) -> Vec<Vec<usize>> {
        let mut rng = seed::rng(seed);
        let mut groups = vec![Vec::new(); self.n_classes()];
        for (r, c) in self.label_indices().into_iter().enumerate() {
            groups[c].push(r);
        }
        for g in &mut groups {
            g.shuffle(&mut rng);
        }
        groups
    }

    /// Stratified split: `train_fraction` of every class goes to the first set.
    pub fn stratified_split(&self, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::config("train_fraction", "must lie in (0, 1)"));
        }
        let mut train = Vec::new();
        let mut test = Vec::new();
        for g in self.shuffled_by_class(seed) {
            let n_train = (g.len() as f64 * train_fraction).round() as usize;
            train.extend_from_slice(&g[..n_train]);
            test.extend_from_slice(&g[n_train..]);
        }
        train.sort_unstable();
        test.sort_unstable();
        Ok((train, test))
    }

    /// Held-out index sets of `k` stratified folds.
    ///
    /// Rows are dealt round-robin after grouping by class, so each fold holds
    /// an equal share of every class (up to one row). A class with fewer rows
    /// than folds cannot be stratified; leave-one-out (`k == n`) is exempt.
    pub fn stratified_folds(&self, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
        let n = self.len();
        if k < 2 || k > n {
            return Err(Error::Stratification(format!("need 2 <= folds <= {n}, got {k}")));
        }
        if k < n {
            for (c, count) in self.class_counts().into_iter().enumerate() {
                if count > 0 && count < k {
                    return Err(Error::Stratification(format!(
                        "class {} has {count} samples, fewer than {k} folds",
                        self.class_order[c]
                    )));
                }
            }
        }
        let mut folds = vec![Vec::new(); k];
        for (p, r) in self.shuffled_by_class(seed).into_iter().flatten().enumerate() {
            folds[p % k].push(r);
        }
        for f in &mut folds {
            f.sort_unstable();
        }
        Ok(folds)
    }
}

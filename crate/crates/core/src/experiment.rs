//! The diagnosis experiment end to end: one simulated run per class, the
//! model bank, the three feature datasets and classifier evaluation.
//!
//! Every run starts with `settle_samples` rows that are discarded while the
//! battery leaves its initial state. The `n_samples` rows after that window
//! feed the model bank and the power-system and pair datasets. The array
//! dataset keeps only sunlit rows, so runs are long enough to hold
//! `n_samples` of those after the settling window as well.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::classify::{
    confusion_matrix, id3_train, kfold_loss, knn_select_k, mlp_classifier_train, resubstitution_loss, Classifier,
    ConfusionMatrix, EvaluationReport, Id3Trainer, KSelection, KnnClassifier, KnnTrainer, LabeledDataset, MlpTrainer,
    PcaClassifier, PcaTrainer, Trainer,
};
use crate::config::Config;
use crate::eps_plant::{simulate, FaultKind, TelemetrySample};
use crate::error::{Error, Result};
use crate::features::{load_residuals, pv_residuals, running_moment, soc_kalman};
use crate::seed::{self, Stage};
use crate::sysid::{build_model_bank, BankDataset, MlpRegressor, ModelBank, TrainConfig};

/// A classification problem over one feature dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Task {
    /// Five-class residuals against the load-model bank.
    Eps,
    /// As `Eps` with the running load-current moment appended.
    EpsMoment,
    /// Three-class array residuals.
    Pv,
    /// Five-class `(I_load, SOC)` pairs.
    Pair,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::Eps, Task::EpsMoment, Task::Pv, Task::Pair];

    pub fn tag(self) -> &'static str {
        match self {
            Task::Eps => "eps",
            Task::EpsMoment => "eps_moment",
            Task::Pv => "pv",
            Task::Pair => "pair",
        }
    }

    pub fn class_order(self) -> &'static [FaultKind] {
        match self {
            Task::Pv => &FaultKind::PV_CLASSES,
            _ => &FaultKind::EPS_CLASSES,
        }
    }

    fn index(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.tag() == s)
            .ok_or_else(|| Error::config("task", format!("unknown task `{s}`, expected one of eps, eps_moment, pv, pair")))
    }
}

/// Classifier family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    Mlp,
    Knn,
    Dt,
    Pca,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Mlp, Method::Knn, Method::Dt, Method::Pca];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Mlp => "mlp",
            Method::Knn => "knn",
            Method::Dt => "dt",
            Method::Pca => "pca",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| Error::config("classifier", format!("unknown classifier `{s}`, expected one of mlp, knn, dt, pca")))
    }
}

pub fn is_sunlit(config: &Config, sample: &TelemetrySample) -> bool {
    !config.orbit.in_eclipse(sample.env.t_s)
}

/// Rows simulated per class.
pub fn run_length(config: &Config) -> usize {
    let c = &config.classify;
    // eclipse_fraction <= 0.5, so this terminates
    let mut sunlit = 0;
    let mut k = c.settle_samples;
    while sunlit < c.n_samples {
        if !config.orbit.in_eclipse(k as f64 * c.dt_s) {
            sunlit += 1;
        }
        k += 1;
    }
    k.max(c.settle_samples + c.n_samples)
}

pub fn simulate_class(config: &Config, fault: FaultKind) -> Result<Vec<TelemetrySample>> {
    simulate(&config.orbit, &config.plant, fault, run_length(config), config.classify.dt_s)
}

/// One run for each of the seven classes.
pub fn simulate_all(config: &Config) -> Result<BTreeMap<FaultKind, Vec<TelemetrySample>>> {
    FaultKind::ALL
        .iter()
        .map(|&f| simulate_class(config, f).map(|run| (f, run)))
        .collect()
}

fn window(config: &Config) -> std::ops::Range<usize> {
    let s = config.classify.settle_samples;
    s..s + config.classify.n_samples
}

/// The `n_samples` rows after the settling window.
pub fn settled<'a>(config: &Config, run: &'a [TelemetrySample]) -> Result<&'a [TelemetrySample]> {
    let w = window(config);
    run.get(w.clone()).ok_or_else(|| {
        Error::Data(format!(
            "run has {} rows, need at least {} (settle {} + samples {})",
            run.len(),
            w.end,
            w.start,
            config.classify.n_samples
        ))
    })
}

fn get_run(runs: &BTreeMap<FaultKind, Vec<TelemetrySample>>, f: FaultKind) -> Result<&[TelemetrySample]> {
    runs.get(&f)
        .map(Vec::as_slice)
        .ok_or_else(|| Error::Completeness(f.tag().into()))
}

pub fn bank_datasets(
    config: &Config,
    runs: &BTreeMap<FaultKind, Vec<TelemetrySample>>,
) -> Result<BTreeMap<FaultKind, BankDataset>> {
    FaultKind::ALL
        .iter()
        .map(|&f| Ok((f, BankDataset::from_telemetry(settled(config, get_run(runs, f)?)?))))
        .collect()
}

pub fn train_bank(config: &Config, runs: &BTreeMap<FaultKind, Vec<TelemetrySample>>) -> Result<ModelBank> {
    build_model_bank(&bank_datasets(config, runs)?, &config.train)
}

fn stack(blocks: Vec<(FaultKind, DMatrix<f64>)>, order: &[FaultKind]) -> Result<LabeledDataset> {
    let width = blocks.first().map_or(0, |(_, m)| m.ncols());
    let rows: usize = blocks.iter().map(|(_, m)| m.nrows()).sum();
    let mut x = DMatrix::zeros(rows, width);
    let mut labels = Vec::with_capacity(rows);
    let mut r0 = 0;
    for (f, m) in blocks {
        x.rows_mut(r0, m.nrows()).copy_from(&m);
        r0 += m.nrows();
        labels.extend(std::iter::repeat_n(f, m.nrows()));
    }
    LabeledDataset::new(x, labels, order.to_vec())
}

/// Residuals of one run against the load models, optionally with the moment.
pub fn eps_features(
    config: &Config,
    run: &[TelemetrySample],
    eps_models: &[&MlpRegressor],
    with_moment: bool,
) -> Result<DMatrix<f64>> {
    let rows = settled(config, run)?;
    let r = load_residuals(rows, eps_models)?;
    if !with_moment {
        return Ok(r);
    }
    // the moment accumulates from the first row of the run
    let i_load: Vec<f64> = run.iter().map(|s| s.i_load_a).collect();
    let m1 = running_moment(&i_load);
    let start = window(config).start;
    let width = r.ncols();
    let mut x = r.insert_column(width, 0.0);
    let last = x.ncols() - 1;
    for k in 0..rows.len() {
        x[(k, last)] = m1[start + k];
    }
    Ok(x)
}

/// Power-system dataset, `n_samples` rows per class.
pub fn eps_dataset(
    config: &Config,
    runs: &BTreeMap<FaultKind, Vec<TelemetrySample>>,
    eps_models: &[&MlpRegressor],
    with_moment: bool,
) -> Result<LabeledDataset> {
    let blocks = FaultKind::EPS_CLASSES
        .iter()
        .map(|&f| Ok((f, eps_features(config, get_run(runs, f)?, eps_models, with_moment)?)))
        .collect::<Result<_>>()?;
    stack(blocks, &FaultKind::EPS_CLASSES)
}

/// Array dataset: residuals of the first `n_samples` sunlit rows after the
/// settling window of every array class.
pub fn pv_dataset(
    config: &Config,
    runs: &BTreeMap<FaultKind, Vec<TelemetrySample>>,
    pv_model: &MlpRegressor,
) -> Result<LabeledDataset> {
    let n = config.classify.n_samples;
    let blocks = FaultKind::PV_CLASSES
        .iter()
        .map(|&f| {
            let run = get_run(runs, f)?;
            let sunlit: Vec<TelemetrySample> = run
                .iter()
                .skip(config.classify.settle_samples)
                .filter(|s| is_sunlit(config, s))
                .take(n)
                .copied()
                .collect();
            if sunlit.len() < n {
                return Err(Error::Data(format!("run for {f} has only {} sunlit rows, need {n}", sunlit.len())));
            }
            Ok((f, pv_residuals(&sunlit, pv_model)?))
        })
        .collect::<Result<_>>()?;
    stack(blocks, &FaultKind::PV_CLASSES)
}

/// `(I_load, SOC)` per row, SOC from the Kalman filter unless
/// `use_true_soc` is set.
pub fn pair_features(config: &Config, run: &[TelemetrySample]) -> Result<DMatrix<f64>> {
    let rows = settled(config, run)?;
    let soc: Vec<f64> = if config.classify.use_true_soc {
        rows.iter().map(|s| s.soc_true).collect()
    } else {
        let est = soc_kalman(run, config.plant.battery_capacity_ah, &config.kalman(), config.classify.dt_s)?;
        est[window(config)].to_vec()
    };
    Ok(DMatrix::from_fn(rows.len(), 2, |k, c| if c == 0 { rows[k].i_load_a } else { soc[k] }))
}

pub fn pair_dataset(config: &Config, runs: &BTreeMap<FaultKind, Vec<TelemetrySample>>) -> Result<LabeledDataset> {
    let blocks = FaultKind::EPS_CLASSES
        .iter()
        .map(|&f| Ok((f, pair_features(config, get_run(runs, f)?)?)))
        .collect::<Result<_>>()?;
    stack(blocks, &FaultKind::EPS_CLASSES)
}

/// Outcome of [`evaluate`].
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: EvaluationReport,
    pub confusion: ConfusionMatrix,
    /// Neighbourhood-size selection, for KNN only.
    pub knn_selection: Option<KSelection>,
}

fn assess<T: Trainer>(
    trainer: &T,
    model: &T::Model,
    train: &LabeledDataset,
    test: &LabeledDataset,
    k_folds: usize,
    seed: u64,
) -> Result<(ConfusionMatrix, f64, f64)> {
    let predicted = model.predict(&test.features)?;
    let confusion = confusion_matrix(&test.labels, &predicted, &test.class_order)?;
    let resub = resubstitution_loss(model, train)?;
    let kfold = kfold_loss(trainer, train, k_folds, seed)?;
    Ok((confusion, resub, kfold))
}

/// Splits `data` into stratified train and held-out parts, trains `method`
/// on the first, reports the confusion matrix on the second and the
/// resubstitution and k-fold losses on the first.
///
/// For KNN the neighbourhood size is chosen by [`knn_select_k`] on the
/// training part.
pub fn evaluate(config: &Config, task: Task, data: &LabeledDataset, method: Method) -> Result<Evaluation> {
    let c = &config.classify;
    let root = config.seed;
    let id = task.index() * 4 + method as u64;
    let (train_idx, test_idx) = data.stratified_split(c.holdout_train_fraction, seed::derive(root, Stage::Split, task.index()))?;
    let train = data.subset(&train_idx);
    let test = data.subset(&test_idx);
    let fold_seed = seed::derive(root, Stage::KFold, id);

    let mut knn_selection = None;
    let (confusion, resub, kfold) = match method {
        Method::Mlp => {
            let trainer = MlpTrainer(TrainConfig {
                seed: seed::derive(root, Stage::Classifier, id),
                ..config.train.clone()
            });
            let model = mlp_classifier_train(&train, &trainer.0)?;
            assess(&trainer, &model, &train, &test, c.k_folds, fold_seed)?
        }
        Method::Knn => {
            let sel = knn_select_k(&train, &c.knn_k_candidates, c.k_folds, fold_seed)?;
            let trainer = KnnTrainer(sel.chosen_k);
            let model = KnnClassifier::fit(&train, sel.chosen_k)?;
            knn_selection = Some(sel);
            assess(&trainer, &model, &train, &test, c.k_folds, fold_seed)?
        }
        Method::Dt => {
            let trainer = Id3Trainer {
                max_depth: c.dt_max_depth,
                min_leaf: c.dt_min_leaf,
            };
            let model = id3_train(&train, c.dt_max_depth, c.dt_min_leaf)?;
            assess(&trainer, &model, &train, &test, c.k_folds, fold_seed)?
        }
        Method::Pca => {
            let model = PcaClassifier::fit(&train)?;
            assess(&PcaTrainer, &model, &train, &test, c.k_folds, fold_seed)?
        }
    };
    let report = EvaluationReport::new(task.tag(), method.tag(), &confusion, resub, kfold, root, &config.hash());
    Ok(Evaluation {
        report,
        confusion,
        knn_selection,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Config {
        let mut c = Config::default();
        c.classify.n_samples = 600;
        c.classify.settle_samples = 100;
        c
    }

    #[test]
    fn run_length_covers_both_windows() {
        let c = small();
        let n = run_length(&c);
        let run = simulate_class(&c, FaultKind::Healthy).unwrap();
        assert_eq!(run.len(), n);
        assert_eq!(settled(&c, &run).unwrap().len(), 600);
        let sunlit = run[100..].iter().filter(|s| is_sunlit(&c, s)).count();
        assert_eq!(sunlit, 600);
        assert!(is_sunlit(&c, &run[n - 1]));
    }

    #[test]
    fn no_eclipse_means_no_extra_rows() {
        let mut c = small();
        c.orbit.eclipse_fraction = 0.0;
        assert_eq!(run_length(&c), 700);
    }

    #[test]
    fn tags_round_trip() {
        for t in Task::ALL {
            assert_eq!(t.tag().parse::<Task>().unwrap(), t);
        }
        for m in Method::ALL {
            assert_eq!(m.tag().parse::<Method>().unwrap(), m);
        }
        assert!(matches!("svm".parse::<Method>(), Err(Error::Config { .. })));
    }

    #[test]
    fn pair_dataset_shape_and_true_soc_switch() {
        let mut c = small();
        let runs: BTreeMap<_, _> = FaultKind::EPS_CLASSES
            .iter()
            .map(|&f| (f, simulate_class(&c, f).unwrap()))
            .collect();
        let d = pair_dataset(&c, &runs).unwrap();
        assert_eq!(d.features.shape(), (3000, 2));
        assert_eq!(d.class_counts(), vec![600; 5]);
        c.classify.use_true_soc = true;
        let t = pair_dataset(&c, &runs).unwrap();
        assert_eq!(t.features[(0, 1)], runs[&FaultKind::Healthy][100].soc_true);
        assert_eq!(t.features.column(0), d.features.column(0));
    }

    #[test]
    fn missing_class_is_reported() {
        let c = small();
        let runs = BTreeMap::new();
        assert!(matches!(pair_dataset(&c, &runs), Err(Error::Completeness(_))));
    }
}

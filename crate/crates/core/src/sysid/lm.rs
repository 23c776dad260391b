//! Levenberg–Marquardt training of [`MlpRegressor`].
//!
//! Each epoch linearises the network around the current weights, forms the
//! Gauss–Newton system `(J^T J + mu I) delta = J^T e` and retries with a larger
//! damping `mu` until the training SSE drops. The weights with the lowest
//! validation SSE are returned.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{MlpRegressor, Scaling};
use super::report::{fit_report, FitReport};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub n_hidden: usize,
    pub max_epochs: usize,
    pub mu_init: f64,
    pub mu_factor: f64,
    pub mu_max: f64,
    /// Training MSE (scaled units) at which training stops.
    pub goal_mse: f64,
    /// Train, validation and test fractions.
    pub split: [f64; 3],
    /// Consecutive validation SSE rises that trigger early stopping.
    pub max_val_rises: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_hidden: 10,
            max_epochs: 300,
            mu_init: 1e-3,
            mu_factor: 10.0,
            mu_max: 1e10,
            goal_mse: 1e-10,
            split: [0.70, 0.15, 0.15],
            max_val_rises: 6,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_hidden == 0 {
            return Err(Error::config("n_hidden", "must be >= 1"));
        }
        if !(self.mu_init.is_finite() && self.mu_init > 0.0) {
            return Err(Error::config("mu_init", "must be > 0"));
        }
        if !(self.mu_factor.is_finite() && self.mu_factor > 1.0) {
            return Err(Error::config("mu_factor", "must be > 1"));
        }
        if !(self.mu_max > self.mu_init) {
            return Err(Error::config("mu_max", "must exceed mu_init"));
        }
        if !(self.goal_mse >= 0.0) {
            return Err(Error::config("goal_mse", "must be >= 0"));
        }
        if self.split.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
            return Err(Error::config("split", "each fraction must lie in (0, 1)"));
        }
        if (self.split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::config("split", "fractions must sum to 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    MaxEpochs,
    Goal,
    MuMax,
    ValidationRise,
}

/// Sample indices of the three partitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Random partition of `0..n` by `fractions`.
pub fn split_indices(n: usize, fractions: [f64; 3], seed: u64) -> Split {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::rng(seed));
    let n_train = ((n as f64 * fractions[0]).round() as usize).clamp(1, n);
    let n_val = ((n as f64 * fractions[1]).round() as usize).min(n - n_train);
    let test = idx.split_off(n_train + n_val);
    let validation = idx.split_off(n_train);
    Split {
        train: idx,
        validation,
        test,
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpRegressor,
    /// Test-split statistics in original units (training split if the test split is empty).
    pub report: FitReport,
    /// Training SSE (scaled units) at the start and after every accepted step.
    pub sse_history: Vec<f64>,
    pub epochs: usize,
    pub stop: StopReason,
    pub split: Split,
}

fn rows(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    m.select_rows(idx)
}

fn scale_columns(m: &DMatrix<f64>, scaling: &[Scaling]) -> DMatrix<f64> {
    let mut out = m.clone();
    for (mut c, s) in out.column_iter_mut().zip(scaling) {
        c.apply(|v| *v = s.scale(*v));
    }
    out
}

fn with_bias(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().insert_column(m.ncols(), 1.0)
}

pub(crate) fn sse(model: &MlpRegressor, x: &DMatrix<f64>, t: &DMatrix<f64>) -> f64 {
    (t - model.output_scaled(&model.hidden(x))).norm_squared()
}

/// Gauss–Newton quantities `(J^T J, J^T e, SSE)` for scaled data.
///
/// The hidden-layer columns of `J` factor as `w_out[o, j] * z[(j, i)]` with
/// `z = tanh'(a_j) * x_i`, so every block of `J^T J` is a weighted copy of one
/// of `Z^T Z`, `Z^T H` or `H^T H`; no per-output Jacobian is materialised.
pub(crate) fn normal_equations(
    model: &MlpRegressor,
    x: &DMatrix<f64>,
    t: &DMatrix<f64>,
) -> (DMatrix<f64>, DVector<f64>, f64) {
    let (n_in, nh, n_out) = (model.n_in, model.n_hidden, model.n_out);
    let n = x.nrows();
    let h = model.hidden(x);
    let e = t - model.output_scaled(&h);
    let xb = with_bias(x);
    let hb = with_bias(&h);
    let ph = nh * (n_in + 1);
    let po = nh + 1;

    let mut z = DMatrix::zeros(n, ph);
    for s in 0..n {
        for j in 0..nh {
            let slope = 1.0 - h[(s, j)] * h[(s, j)];
            for i in 0..=n_in {
                z[(s, j * (n_in + 1) + i)] = slope * xb[(s, i)];
            }
        }
    }
    let wo = model.output_weights.columns(0, nh);
    let ztz = z.tr_mul(&z);
    let zth = z.tr_mul(&hb);
    let hth = hb.tr_mul(&hb);
    let mixing = wo.tr_mul(&wo);

    let p = model.n_params();
    let mut jtj = DMatrix::zeros(p, p);
    for a in 0..ph {
        let ja = a / (n_in + 1);
        for b in 0..ph {
            jtj[(a, b)] = mixing[(ja, b / (n_in + 1))] * ztz[(a, b)];
        }
    }
    for o in 0..n_out {
        let base = ph + o * po;
        for a in 0..ph {
            let w = wo[(o, a / (n_in + 1))];
            for k in 0..po {
                let v = w * zth[(a, k)];
                jtj[(a, base + k)] = v;
                jtj[(base + k, a)] = v;
            }
        }
        jtj.view_mut((base, base), (po, po)).copy_from(&hth);
    }

    let mut grad = DVector::zeros(p);
    let back = &e * wo; // n x nh
    for a in 0..ph {
        grad[a] = z.column(a).dot(&back.column(a / (n_in + 1)));
    }
    let hte = hb.tr_mul(&e);
    for o in 0..n_out {
        grad.rows_mut(ph + o * po, po).copy_from(&hte.column(o));
    }
    (jtj, grad, e.norm_squared())
}

fn nguyen_widrow<R: Rng>(model: &mut MlpRegressor, rng: &mut R) {
    let (n_in, nh) = (model.n_in, model.n_hidden);
    let beta = 0.7 * (nh as f64).powf(1.0 / n_in.max(1) as f64);
    for j in 0..nh {
        let mut row: Vec<f64> = (0..n_in).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        row.iter_mut().for_each(|v| *v *= beta / norm);
        for (i, v) in row.into_iter().enumerate() {
            model.hidden_weights[(j, i)] = v;
        }
        model.hidden_weights[(j, n_in)] = rng.random_range(-beta..beta);
    }
    for v in model.output_weights.iter_mut() {
        *v = rng.random_range(-0.5..0.5);
    }
}

fn check_data(inputs: &DMatrix<f64>, targets: &DMatrix<f64>) -> Result<()> {
    if inputs.nrows() != targets.nrows() {
        return Err(Error::Shape(format!(
            "{} input rows but {} target rows",
            inputs.nrows(),
            targets.nrows()
        )));
    }
    if inputs.ncols() == 0 || targets.ncols() == 0 {
        return Err(Error::Shape("inputs and targets need at least one column".into()));
    }
    if inputs.nrows() < 10 {
        return Err(Error::Data(format!("need at least 10 samples, got {}", inputs.nrows())));
    }
    if inputs.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Data("inputs and targets must be finite".into()));
    }
    Ok(())
}

/// Trains a network and reports its fit on the test split.
pub fn train_lm(
    inputs: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    config: &TrainConfig,
) -> Result<(MlpRegressor, FitReport)> {
    let out = train_lm_detailed(inputs, targets, config)?;
    Ok((out.model, out.report))
}

pub fn train_lm_detailed(
    inputs: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    check_data(inputs, targets)?;
    let mut rng = seed::rng(config.seed);
    let split = split_indices(inputs.nrows(), config.split, rng.random());

    let mut model = MlpRegressor::zeros(inputs.ncols(), config.n_hidden, targets.ncols());
    model.input_scaling = Scaling::fit_columns(inputs);
    model.output_scaling = Scaling::fit_columns(targets);
    nguyen_widrow(&mut model, &mut rng);

    let xs = scale_columns(inputs, &model.input_scaling);
    let ts = scale_columns(targets, &model.output_scaling);
    let (x_tr, t_tr) = (rows(&xs, &split.train), rows(&ts, &split.train));
    let (x_va, t_va) = (rows(&xs, &split.validation), rows(&ts, &split.validation));
    let have_val = !split.validation.is_empty();
    let n_terms = (t_tr.nrows() * t_tr.ncols()) as f64;

    let mut mu = config.mu_init;
    let mut params = model.params();
    let mut best = params.clone();
    let mut best_val = if have_val { sse(&model, &x_va, &t_va) } else { f64::INFINITY };
    let mut prev_val = best_val;
    let mut rises = 0;
    let mut history = Vec::new();
    let mut epochs = 0;
    let mut stop = StopReason::MaxEpochs;

    let (mut jtj, mut grad, mut current) = normal_equations(&model, &x_tr, &t_tr);
    history.push(current);
    while epochs < config.max_epochs {
        if current / n_terms <= config.goal_mse {
            stop = StopReason::Goal;
            break;
        }
        epochs += 1;
        let mut accepted = false;
        while mu <= config.mu_max {
            let mut damped = jtj.clone();
            for d in 0..damped.nrows() {
                damped[(d, d)] += mu;
            }
            let Some(chol) = damped.cholesky() else {
                mu *= config.mu_factor;
                continue;
            };
            let trial = &params + chol.solve(&grad);
            model.set_params(&trial);
            let trial_sse = sse(&model, &x_tr, &t_tr);
            if trial_sse < current {
                params = trial;
                mu /= config.mu_factor;
                accepted = true;
                break;
            }
            mu *= config.mu_factor;
        }
        if !accepted {
            model.set_params(&params);
            stop = StopReason::MuMax;
            break;
        }
        (jtj, grad, current) = normal_equations(&model, &x_tr, &t_tr);
        history.push(current);

        if have_val {
            let val = sse(&model, &x_va, &t_va);
            if val < best_val {
                best_val = val;
                best = params.clone();
            }
            rises = if val > prev_val { rises + 1 } else { 0 };
            prev_val = val;
            if rises >= config.max_val_rises {
                stop = StopReason::ValidationRise;
                break;
            }
        } else {
            best = params.clone();
        }
    }
    if !have_val {
        best = params.clone();
    }
    model.set_params(&best);

    let eval_idx = if split.test.is_empty() { &split.train } else { &split.test };
    let y = rows(targets, eval_idx);
    let y_hat = model.predict(&rows(inputs, eval_idx))?;
    let report = fit_report(&y, &y_hat)?;
    Ok(TrainOutcome {
        model,
        report,
        sse_history: history,
        epochs,
        stop,
        split,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_matrix(seed: u64, r: usize, c: usize, lo: f64, hi: f64) -> DMatrix<f64> {
        let mut rng = seed::rng(seed);
        DMatrix::from_fn(r, c, |_, _| rng.random_range(lo..hi))
    }

    /// Jacobian of scaled outputs w.r.t. parameters by central differences.
    fn fd_jacobian(model: &MlpRegressor, x: &DMatrix<f64>) -> DMatrix<f64> {
        let p0 = model.params();
        let n = x.nrows() * model.n_out;
        let mut jac = DMatrix::zeros(n, p0.len());
        let h = 1e-6;
        let mut m = model.clone();
        for k in 0..p0.len() {
            let mut pp = p0.clone();
            pp[k] += h;
            m.set_params(&pp);
            let yp = m.output_scaled(&m.hidden(x));
            pp[k] -= 2.0 * h;
            m.set_params(&pp);
            let ym = m.output_scaled(&m.hidden(x));
            for s in 0..x.nrows() {
                for o in 0..model.n_out {
                    jac[(s * model.n_out + o, k)] = (yp[(s, o)] - ym[(s, o)]) / (2.0 * h);
                }
            }
        }
        jac
    }

    #[test]
    fn normal_equations_match_finite_difference_jacobian() {
        let mut rng = seed::rng(21);
        let mut model = MlpRegressor::zeros(2, 3, 2);
        nguyen_widrow(&mut model, &mut rng);
        let x = random_matrix(1, 7, 2, -1.0, 1.0);
        let t = random_matrix(2, 7, 2, -1.0, 1.0);
        let (jtj, grad, sse) = normal_equations(&model, &x, &t);
        let jac = fd_jacobian(&model, &x);
        let y = model.output_scaled(&model.hidden(&x));
        let e = DVector::from_iterator(14, (0..7).flat_map(|s| (0..2).map(move |o| (s, o))).map(|(s, o)| t[(s, o)] - y[(s, o)]));
        let want_jtj = jac.tr_mul(&jac);
        let want_grad = jac.tr_mul(&e);
        for (a, b) in jtj.iter().zip(want_jtj.iter()) {
            assert!((a - b).abs() <= 1e-5 * b.abs().max(1e-2), "{a} vs {b}");
        }
        for (a, b) in grad.iter().zip(want_grad.iter()) {
            assert!((a - b).abs() <= 1e-5 * b.abs().max(1e-2), "{a} vs {b}");
        }
        assert!((sse - e.norm_squared()).abs() < 1e-12);
    }

    #[test]
    fn accepted_steps_strictly_decrease_sse() {
        let x = random_matrix(3, 200, 2, -2.0, 2.0);
        let t = DMatrix::from_fn(200, 1, |s, _| (x[(s, 0)] * 1.3).sin() + 0.3 * x[(s, 1)].powi(2));
        let out = train_lm_detailed(&x, &t, &TrainConfig { max_epochs: 60, ..TrainConfig::default() }).unwrap();
        assert!(out.sse_history.windows(2).all(|w| w[1] < w[0]));
        assert!(out.report.correlation_r[0].unwrap() > 0.99);
    }

    #[test]
    fn constant_target_is_learned_exactly() {
        let x = random_matrix(5, 100, 2, -3.0, 3.0);
        let t = DMatrix::from_element(100, 1, 2.75);
        let cfg = TrainConfig { goal_mse: 1e-16, ..TrainConfig::default() };
        let (m, r) = train_lm(&x, &t, &cfg).unwrap();
        assert!(r.mse <= 1e-12, "mse {}", r.mse);
        let probe = random_matrix(6, 20, 2, -3.0, 3.0);
        for v in m.predict(&probe).unwrap().iter() {
            assert!((v - 2.75).abs() < 1e-5);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let x = random_matrix(7, 120, 2, -1.0, 1.0);
        let t = DMatrix::from_fn(120, 1, |s, _| x[(s, 0)] * x[(s, 1)]);
        let cfg = TrainConfig { seed: 9, max_epochs: 40, ..TrainConfig::default() };
        let (a, ra) = train_lm(&x, &t, &cfg).unwrap();
        let (b, rb) = train_lm(&x, &t, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let x = random_matrix(1, 5, 2, 0.0, 1.0);
        let t = DMatrix::zeros(5, 1);
        assert!(matches!(train_lm(&x, &t, &TrainConfig::default()), Err(Error::Data(_))));
        let mut x = random_matrix(1, 20, 2, 0.0, 1.0);
        x[(3, 1)] = f64::NAN;
        assert!(matches!(train_lm(&x, &DMatrix::zeros(20, 1), &TrainConfig::default()), Err(Error::Data(_))));
        let cfg = TrainConfig { split: [0.5, 0.3, 0.3], ..TrainConfig::default() };
        assert!(cfg.validate().unwrap_err().to_string().contains("split"));
    }

    #[test]
    fn split_partitions_all_indices() {
        let s = split_indices(101, [0.7, 0.15, 0.15], 3);
        let mut all: Vec<usize> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
        all.sort();
        assert_eq!(all, (0..101).collect::<Vec<_>>());
        assert_eq!(s.train.len(), 71);
        assert_eq!(s.validation.len(), 15);
    }
}

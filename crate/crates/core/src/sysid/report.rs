use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HISTOGRAM_BINS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `HISTOGRAM_BINS + 1` equally spaced edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Fit statistics of a model over a sample set, in original units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub n: usize,
    pub mse: f64,
    pub rmse: f64,
    /// Pearson r per output; `None` when either side has zero variance.
    pub correlation_r: Vec<Option<f64>>,
    pub error_mean_mu: f64,
    pub error_variance_delta: f64,
    pub error_histogram: Histogram,
}

impl FitReport {
    /// Smallest defined correlation over all outputs, `None` if any is undefined.
    pub fn min_correlation(&self) -> Option<f64> {
        self.correlation_r
            .iter()
            .try_fold(f64::INFINITY, |acc, r| r.map(|r| acc.min(r)))
    }
}

pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa > 0.0 && sbb > 0.0 {
        Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
    } else {
        None
    }
}

fn histogram(errors: &[f64]) -> Histogram {
    let lo = errors.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = errors.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / HISTOGRAM_BINS as f64;
    let edges = (0..=HISTOGRAM_BINS).map(|k| lo + width * k as f64).collect();
    let mut counts = vec![0; HISTOGRAM_BINS];
    for &e in errors {
        let k = if width > 0.0 {
            (((e - lo) / width) as usize).min(HISTOGRAM_BINS - 1)
        } else {
            0
        };
        counts[k] += 1;
    }
    Histogram { edges, counts }
}

/// Compares targets `y` with predictions `y_hat` (same shape, one row per sample).
pub fn fit_report(y: &DMatrix<f64>, y_hat: &DMatrix<f64>) -> Result<FitReport> {
    if y.shape() != y_hat.shape() {
        return Err(Error::Shape(format!(
            "targets are {:?} but predictions are {:?}",
            y.shape(),
            y_hat.shape()
        )));
    }
    if y.nrows() == 0 || y.ncols() == 0 {
        return Err(Error::Data("fit report needs at least one sample".into()));
    }
    let errors: Vec<f64> = (y - y_hat).iter().copied().collect();
    let n_err = errors.len() as f64;
    let mse = errors.iter().map(|e| e * e).sum::<f64>() / n_err;
    let mean = errors.iter().sum::<f64>() / n_err;
    let variance = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n_err;
    let correlation_r = (0..y.ncols())
        .map(|c| {
            let a: Vec<f64> = y.column(c).iter().copied().collect();
            let b: Vec<f64> = y_hat.column(c).iter().copied().collect();
            pearson(&a, &b)
        })
        .collect();
    Ok(FitReport {
        n: y.nrows(),
        mse,
        rmse: mse.sqrt(),
        correlation_r,
        error_mean_mu: mean,
        error_variance_delta: variance,
        error_histogram: histogram(&errors),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn identical_series() {
        let y = col(&[1.0, 2.0, 4.0]);
        let r = fit_report(&y, &y).unwrap();
        assert_eq!(r.mse, 0.0);
        assert_eq!(r.error_mean_mu, 0.0);
        assert_eq!(r.error_variance_delta, 0.0);
        assert_eq!(r.correlation_r, vec![Some(1.0)]);
    }

    #[test]
    fn swapped_pair() {
        let r = fit_report(&col(&[0.0, 1.0]), &col(&[1.0, 0.0])).unwrap();
        assert_eq!(r.mse, 1.0);
        assert_eq!(r.rmse, 1.0);
        assert!((r.correlation_r[0].unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_targets_leave_correlation_undefined() {
        let r = fit_report(&col(&[2.0, 2.0, 2.0]), &col(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(r.correlation_r, vec![None]);
        assert_eq!(r.min_correlation(), None);
        assert!(r.mse.is_finite());
    }

    #[test]
    fn noise_variance_is_recovered() {
        let mut rng = crate::seed::rng(4);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let y: Vec<f64> = (0..10_000).map(|_| rng.random_range(-5.0..5.0)).collect();
        let yh: Vec<f64> = y.iter().map(|v| v + noise.sample(&mut rng)).collect();
        let r = fit_report(&col(&y), &col(&yh)).unwrap();
        assert!((r.error_variance_delta - 0.01).abs() < 0.002);
        assert_eq!(r.error_histogram.counts.iter().sum::<usize>(), 10_000);
        assert_eq!(r.error_histogram.edges.len(), HISTOGRAM_BINS + 1);
    }

    #[test]
    fn shape_mismatch() {
        assert!(matches!(
            fit_report(&col(&[1.0]), &col(&[1.0, 2.0])),
            Err(Error::Shape(_))
        ));
    }
}

//! Fixtures shared by the benchmarks.

use eps_fdd_core::classify::LabeledDataset;
use eps_fdd_core::seed;
use eps_fdd_core::FaultKind;
use nalgebra::DMatrix;
use rand::Rng;

/// `n` rows of five Gaussian-ish blobs in two dimensions.
pub fn blobs(n: usize, seed_value: u64) -> LabeledDataset {
    let mut rng = seed::rng(seed_value);
    let classes = FaultKind::EPS_CLASSES;
    let labels: Vec<FaultKind> = (0..n).map(|i| classes[i % classes.len()]).collect();
    let x = DMatrix::from_fn(n, 2, |r, c| {
        let centre = (r % classes.len()) as f64 * if c == 0 { 0.3 } else { -0.2 };
        centre + rng.random_range(-0.25..0.25)
    });
    LabeledDataset::new(x, labels, classes.to_vec()).expect("valid fixture")
}

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::eps_plant::FaultKind;
use crate::error::{Error, Result};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<usize>>,
    pub class_order: Vec<FaultKind>,
}

pub fn confusion_matrix(
    truth: &[FaultKind],
    predicted: &[FaultKind],
    class_order: &[FaultKind],
) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::Shape(format!(
            "{} true labels but {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let index = |l: FaultKind| {
        class_order
            .iter()
            .position(|&c| c == l)
            .ok_or_else(|| Error::Label(l.tag().into()))
    };
    let n = class_order.len();
    let mut counts = vec![vec![0; n]; n];
    for (&t, &p) in truth.iter().zip(predicted) {
        counts[index(t)?][index(p)?] += 1;
    }
    Ok(ConfusionMatrix {
        counts,
        class_order: class_order.to_vec(),
    })
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    /// Diagonal over row sum; `None` for classes without samples.
    pub fn per_class_accuracy(&self) -> Vec<Option<f64>> {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let n: usize = row.iter().sum();
                (n > 0).then(|| row[i] as f64 / n as f64)
            })
            .collect()
    }

    pub fn overall_accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let correct: usize = (0..self.counts.len()).map(|i| self.counts[i][i]).sum();
        correct as f64 / total as f64
    }

    /// Aligned plain-text rendering with a per-class accuracy column.
    pub fn to_table(&self) -> String {
        let names: Vec<&str> = self.class_order.iter().map(|c| c.tag()).collect();
        let width = self
            .counts
            .iter()
            .flatten()
            .map(|c| c.to_string().len())
            .chain(names.iter().map(|n| n.len()))
            .chain(std::iter::once("true\\pred".len()))
            .max()
            .unwrap_or(1);
        let mut s = format!("{:<width$}", "true\\pred");
        for n in &names {
            let _ = write!(s, "  {n:>width$}");
        }
        let _ = writeln!(s, "  {:>8}", "acc");
        for ((row, name), acc) in self.counts.iter().zip(&names).zip(self.per_class_accuracy()) {
            let _ = write!(s, "{name:<width$}");
            for c in row {
                let _ = write!(s, "  {c:>width$}");
            }
            match acc {
                Some(a) => {
                    let _ = writeln!(s, "  {:>7.2}%", 100.0 * a);
                }
                None => {
                    let _ = writeln!(s, "  {:>8}", "-");
                }
            }
        }
        let _ = writeln!(s, "overall accuracy {:.2}%", 100.0 * self.overall_accuracy());
        s
    }
}

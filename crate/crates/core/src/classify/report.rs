use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::ConfusionMatrix;

/// Evaluation result of one classifier on one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub task: String,
    pub classifier: String,
    pub class_order: Vec<String>,
    pub confusion: Vec<Vec<usize>>,
    pub per_class_accuracy: Vec<Option<f64>>,
    pub overall_accuracy: f64,
    pub resubstitution_loss: f64,
    pub kfold_loss: f64,
    pub seed: u64,
    pub config_hash: String,
}

impl EvaluationReport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        task: &str,
        classifier: &str,
        confusion: &ConfusionMatrix,
        resubstitution_loss: f64,
        kfold_loss: f64,
        seed: u64,
        config_hash: &str,
    ) -> Self {
        Self {
            task: task.into(),
            classifier: classifier.into(),
            class_order: confusion.class_order.iter().map(|c| c.tag().to_string()).collect(),
            confusion: confusion.counts.clone(),
            per_class_accuracy: confusion.per_class_accuracy(),
            overall_accuracy: confusion.overall_accuracy(),
            resubstitution_loss,
            kfold_loss,
            seed,
            config_hash: config_hash.into(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Method / task / accuracy table over several reports.
pub fn comparison_table(reports: &[EvaluationReport]) -> String {
    let mw = reports.iter().map(|r| r.classifier.len()).chain([6]).max().unwrap();
    let tw = reports.iter().map(|r| r.task.len()).chain([4]).max().unwrap();
    let mut s = format!("{:<mw$}  {:<tw$}  {:>12}\n", "method", "task", "accuracy (%)");
    for r in reports {
        let _ = writeln!(
            s,
            "{:<mw$}  {:<tw$}  {:>12.2}",
            r.classifier,
            r.task,
            100.0 * r.overall_accuracy
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::confusion_matrix;
    use crate::eps_plant::FaultKind;

    #[test]
    fn json_has_expected_fields() {
        let order = FaultKind::PV_CLASSES;
        let m = confusion_matrix(&[order[0], order[1]], &[order[0], order[2]], &order).unwrap();
        let r = EvaluationReport::new("pv", "mlp", &m, 0.0, 0.1, 7, "abc");
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        for key in [
            "task",
            "classifier",
            "class_order",
            "confusion",
            "per_class_accuracy",
            "overall_accuracy",
            "resubstitution_loss",
            "kfold_loss",
            "seed",
            "config_hash",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["overall_accuracy"], 0.5);
        assert!(v["per_class_accuracy"][2].is_null());
    }

    #[test]
    fn comparison_rows() {
        let order = FaultKind::PV_CLASSES;
        let m = confusion_matrix(&[order[0]], &[order[0]], &order).unwrap();
        let a = EvaluationReport::new("pair", "knn", &m, 0.0, 0.0, 1, "h");
        let t = comparison_table(&[a.clone(), EvaluationReport { classifier: "dt".into(), ..a }]);
        assert_eq!(t.lines().count(), 3);
        assert!(t.lines().nth(1).unwrap().ends_with("100.00"));
    }
}

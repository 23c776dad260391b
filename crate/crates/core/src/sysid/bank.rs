use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::lm::{train_lm, TrainConfig};
use super::mlp::MlpRegressor;
use super::report::FitReport;
use crate::eps_plant::{FaultKind, TelemetrySample};
use crate::error::{Error, Result};
use crate::seed::{self, Stage};

/// Minimum correlation of the healthy models for a bank to be accepted.
pub const HEALTHY_CORRELATION_GATE: f64 = 0.95;
pub const MIN_BANK_SAMPLES: usize = 500;

/// Training data of one health mode.
#[derive(Debug, Clone, PartialEq)]
pub struct BankDataset {
    /// Irradiance and panel temperature, `N x 2`.
    pub inputs: DMatrix<f64>,
    /// Load current, `N x 1`.
    pub load: DMatrix<f64>,
    /// Array voltage and current, `N x 2`.
    pub pv: DMatrix<f64>,
}

impl BankDataset {
    pub fn from_telemetry(rows: &[TelemetrySample]) -> Self {
        let n = rows.len();
        Self {
            inputs: DMatrix::from_fn(n, 2, |r, c| {
                let e = &rows[r].env;
                if c == 0 {
                    e.irradiance_w_m2
                } else {
                    e.panel_temp_c
                }
            }),
            load: DMatrix::from_fn(n, 1, |r, _| rows[r].i_load_a),
            pv: DMatrix::from_fn(n, 2, |r, c| if c == 0 { rows[r].v_pv_v } else { rows[r].i_pv_a }),
        }
    }

    fn len(&self) -> usize {
        self.inputs.nrows()
    }
}

/// Which signal a bank model predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelTarget {
    /// `(G, T) -> I_load`
    Load,
    /// `(G, T) -> (V_pv, I_pv)`
    Pv,
}

impl ModelTarget {
    pub fn prefix(self) -> &'static str {
        match self {
            ModelTarget::Load => "load",
            ModelTarget::Pv => "pv",
        }
    }
}

/// Trained model plus its fit statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct BankModel {
    pub fault: FaultKind,
    pub target: ModelTarget,
    pub model: MlpRegressor,
    pub report: FitReport,
}

impl BankModel {
    /// File-friendly identifier, e.g. `load_Healthy`.
    pub fn name(&self) -> String {
        format!("{}_{}", self.target.prefix(), self.fault)
    }
}

/// One model per health mode: load-current models for the power-system
/// classes and array models for the solar-array classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBank {
    pub healthy_system: BankModel,
    pub healthy_pv: BankModel,
    /// Keyed by the four power-system faults.
    pub fault_models: BTreeMap<FaultKind, BankModel>,
    /// Keyed by the two array faults.
    pub pv_fault_models: BTreeMap<FaultKind, BankModel>,
}

impl ModelBank {
    /// Load-current models in residual order (healthy first).
    pub fn eps_models(&self) -> Vec<&MlpRegressor> {
        FaultKind::EPS_CLASSES
            .iter()
            .map(|f| match f {
                FaultKind::Healthy => &self.healthy_system.model,
                f => &self.fault_models[f].model,
            })
            .collect()
    }

    /// Every model of the bank in a stable order.
    pub fn all(&self) -> Vec<&BankModel> {
        let mut v = vec![&self.healthy_system];
        v.extend(self.fault_models.values());
        v.push(&self.healthy_pv);
        v.extend(self.pv_fault_models.values());
        v
    }

    /// Checks the healthy models against [`HEALTHY_CORRELATION_GATE`].
    pub fn check_quality(&self) -> Result<()> {
        for m in [&self.healthy_system, &self.healthy_pv] {
            match m.report.min_correlation() {
                Some(r) if r >= HEALTHY_CORRELATION_GATE => {}
                r => {
                    return Err(Error::QualityGate(format!(
                        "{} correlation {} is below {HEALTHY_CORRELATION_GATE}",
                        m.name(),
                        r.map_or("undefined".to_string(), |r| format!("{r:.4}"))
                    )))
                }
            }
        }
        Ok(())
    }
}

/// Trains the bank. Every model gets its own seed derived from `config.seed`.
pub fn build_model_bank(
    datasets: &BTreeMap<FaultKind, BankDataset>,
    config: &TrainConfig,
) -> Result<ModelBank> {
    for f in FaultKind::ALL {
        let d = datasets.get(&f).ok_or_else(|| Error::Completeness(f.tag().into()))?;
        if d.len() < MIN_BANK_SAMPLES {
            return Err(Error::Data(format!(
                "dataset for {f} has {} samples, need at least {MIN_BANK_SAMPLES}",
                d.len()
            )));
        }
    }
    let fit = |fault: FaultKind, target: ModelTarget| -> Result<BankModel> {
        let d = &datasets[&fault];
        let idx = fault.index() as u64 * 2 + target as u64;
        let cfg = TrainConfig {
            seed: seed::derive(config.seed, Stage::ModelBank, idx),
            ..config.clone()
        };
        let y = match target {
            ModelTarget::Load => &d.load,
            ModelTarget::Pv => &d.pv,
        };
        let (model, report) = train_lm(&d.inputs, y, &cfg)?;
        Ok(BankModel {
            fault,
            target,
            model,
            report,
        })
    };
    let bank = ModelBank {
        healthy_system: fit(FaultKind::Healthy, ModelTarget::Load)?,
        healthy_pv: fit(FaultKind::Healthy, ModelTarget::Pv)?,
        fault_models: FaultKind::EPS_CLASSES[1..]
            .iter()
            .map(|&f| fit(f, ModelTarget::Load).map(|m| (f, m)))
            .collect::<Result<_>>()?,
        pv_fault_models: FaultKind::PV_CLASSES[1..]
            .iter()
            .map(|&f| fit(f, ModelTarget::Pv).map(|m| (f, m)))
            .collect::<Result<_>>()?,
    };
    bank.check_quality()?;
    Ok(bank)
}

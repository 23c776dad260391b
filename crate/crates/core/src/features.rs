//! Diagnosis features: model-bank residuals, the running load-current
//! moment and a Kalman estimate of the battery state of charge.

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::classify::LabeledDataset;
use crate::eps_plant::{FaultKind, TelemetrySample};
use crate::error::{Error, Result};
use crate::sysid::{MlpRegressor, ModelBank};

fn env_inputs(telemetry: &[TelemetrySample]) -> DMatrix<f64> {
    DMatrix::from_fn(telemetry.len(), 2, |r, c| {
        let e = &telemetry[r].env;
        if c == 0 {
            e.irradiance_w_m2
        } else {
            e.panel_temp_c
        }
    })
}

/// `r[k, i] = I_load[k] - model_i(G[k], T[k])` for single-output models.
pub fn load_residuals(telemetry: &[TelemetrySample], models: &[&MlpRegressor]) -> Result<DMatrix<f64>> {
    let x = env_inputs(telemetry);
    let mut r = DMatrix::zeros(telemetry.len(), models.len());
    for (i, m) in models.iter().enumerate() {
        if m.n_out != 1 {
            return Err(Error::Shape(format!("load model {i} has {} outputs, expected 1", m.n_out)));
        }
        let y = m.predict(&x)?;
        for (k, s) in telemetry.iter().enumerate() {
            r[(k, i)] = s.i_load_a - y[(k, 0)];
        }
    }
    Ok(r)
}

/// Residuals against the five load models of the bank, healthy first.
pub fn eps_residuals(telemetry: &[TelemetrySample], bank: &ModelBank) -> Result<DMatrix<f64>> {
    load_residuals(telemetry, &bank.eps_models())
}

/// `[V_pv - V_hat, I_pv - I_hat]` per sample against a healthy array model.
pub fn pv_residuals(telemetry: &[TelemetrySample], pv_model: &MlpRegressor) -> Result<DMatrix<f64>> {
    if pv_model.n_out != 2 {
        return Err(Error::Shape(format!(
            "array model has {} outputs, expected 2",
            pv_model.n_out
        )));
    }
    let y = pv_model.predict(&env_inputs(telemetry))?;
    Ok(DMatrix::from_fn(telemetry.len(), 2, |k, c| {
        let s = &telemetry[k];
        let measured = if c == 0 { s.v_pv_v } else { s.i_pv_a };
        measured - y[(k, c)]
    }))
}

/// Causal cumulative mean of the load current.
pub fn running_moment(i_load: &[f64]) -> Vec<f64> {
    let mut sum = 0.0;
    i_load
        .iter()
        .enumerate()
        .map(|(k, v)| {
            sum += v;
            sum / (k + 1) as f64
        })
        .collect()
}

/// Residuals, optionally followed by the load-current moment.
pub fn feature_vector(residuals: &[f64], moment: Option<f64>) -> Result<Vec<f64>> {
    if residuals.len() != FaultKind::EPS_CLASSES.len() {
        return Err(Error::Shape(format!(
            "expected {} residuals, got {}",
            FaultKind::EPS_CLASSES.len(),
            residuals.len()
        )));
    }
    let mut x = residuals.to_vec();
    x.extend(moment);
    Ok(x)
}

/// Scalar Kalman filter on the battery state of charge.
///
/// The prediction integrates the battery current implied by the telemetry,
/// `I_net = (efficiency * v_pv * i_pv - V_bus * I_load) / OCV(soc)`, and the
/// update compares the bus voltage `V_bus = I_load * R_load` with the linear
/// open-circuit voltage curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocKalmanConfig {
    pub process_noise_q: f64,
    pub measurement_noise_r: f64,
    pub ocv_slope_v_per_soc: f64,
    pub ocv_offset_v: f64,
    pub soc_init_estimate: f64,
    pub p_init: f64,
    pub load_resistance_ohm: f64,
    pub converter_efficiency: f64,
}

impl Default for SocKalmanConfig {
    fn default() -> Self {
        Self {
            process_noise_q: 1e-7,
            measurement_noise_r: 1e-2,
            ocv_slope_v_per_soc: 2.4,
            ocv_offset_v: 6.0,
            soc_init_estimate: 0.5,
            p_init: 0.1,
            load_resistance_ohm: 16.0,
            converter_efficiency: 0.9,
        }
    }
}

impl SocKalmanConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.measurement_noise_r.is_finite() && self.measurement_noise_r > 0.0) {
            return Err(Error::config("measurement_noise_r", "must be > 0"));
        }
        if !(self.process_noise_q >= 0.0) {
            return Err(Error::config("process_noise_q", "must be >= 0"));
        }
        if !(self.ocv_slope_v_per_soc > 0.0) {
            return Err(Error::config("ocv_slope_v_per_soc", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.soc_init_estimate) {
            return Err(Error::config("soc_init_estimate", "must lie in [0, 1]"));
        }
        if !(self.p_init >= 0.0) {
            return Err(Error::config("p_init", "must be >= 0"));
        }
        if !(self.load_resistance_ohm > 0.0) {
            return Err(Error::config("load_resistance_ohm", "must be > 0"));
        }
        if !(self.converter_efficiency > 0.0 && self.converter_efficiency <= 1.0) {
            return Err(Error::config("converter_efficiency", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Filter state after the update at one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanStep {
    pub soc: f64,
    pub p: f64,
    pub gain: f64,
}

pub fn soc_kalman_trace(
    telemetry: &[TelemetrySample],
    battery_capacity_ah: f64,
    config: &SocKalmanConfig,
    dt_s: f64,
) -> Result<Vec<KalmanStep>> {
    config.validate()?;
    if !(battery_capacity_ah > 0.0) {
        return Err(Error::config("battery_capacity_ah", "must be > 0"));
    }
    if !(dt_s > 0.0) {
        return Err(Error::config("dt_s", "must be > 0"));
    }
    let slope = config.ocv_slope_v_per_soc;
    let ocv = |soc: f64| config.ocv_offset_v + slope * soc;
    let scale = dt_s / (3600.0 * battery_capacity_ah);

    let mut soc = config.soc_init_estimate;
    let mut p = config.p_init;
    let mut out = Vec::with_capacity(telemetry.len());
    for (k, s) in telemetry.iter().enumerate() {
        if k > 0 {
            let prev = &telemetry[k - 1];
            let v_bus = prev.i_load_a * config.load_resistance_ohm;
            let p_in = config.converter_efficiency * prev.v_pv_v * prev.i_pv_a;
            let i_net = (p_in - v_bus * prev.i_load_a) / ocv(soc);
            soc += i_net * scale;
            p += config.process_noise_q;
        }
        let z = s.i_load_a * config.load_resistance_ohm;
        let gain = p * slope / (slope * slope * p + config.measurement_noise_r);
        soc = (soc + gain * (z - ocv(soc))).clamp(0.0, 1.0);
        p *= 1.0 - gain * slope;
        out.push(KalmanStep { soc, p, gain });
    }
    Ok(out)
}

/// State-of-charge estimates, one per telemetry sample.
pub fn soc_kalman(
    telemetry: &[TelemetrySample],
    battery_capacity_ah: f64,
    config: &SocKalmanConfig,
    dt_s: f64,
) -> Result<Vec<f64>> {
    Ok(soc_kalman_trace(telemetry, battery_capacity_ah, config, dt_s)?
        .into_iter()
        .map(|s| s.soc)
        .collect())
}

/// Writes `label,f0,...,fK` rows.
pub fn write_feature_csv<W: Write>(mut w: W, data: &LabeledDataset) -> std::io::Result<()> {
    let header: Vec<String> = (0..data.features.ncols()).map(|k| format!("f{k}")).collect();
    writeln!(w, "label,{}", header.join(","))?;
    for (r, label) in data.labels.iter().enumerate() {
        write!(w, "{label}")?;
        for v in data.features.row(r).iter() {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Reads a feature CSV. The class order is taken from `class_order`.
pub fn read_feature_csv<R: BufRead>(
    reader: R,
    path: &Path,
    class_order: &[FaultKind],
) -> Result<LabeledDataset> {
    let bad = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(h) => h.map_err(|e| Error::io(path, e))?,
        None => return Err(bad(1, "empty file".into())),
    };
    let cols: Vec<&str> = header.trim_end().split(',').collect();
    let width = cols.len().saturating_sub(1);
    let expected: Vec<String> = (0..width).map(|k| format!("f{k}")).collect();
    if cols.first() != Some(&"label") || width == 0 || cols[1..] != expected {
        return Err(bad(1, format!("unexpected header `{header}`")));
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != width + 1 {
            return Err(bad(lineno, format!("expected {} fields, found {}", width + 1, fields.len())));
        }
        let label: FaultKind = fields[0].parse().map_err(|e: Error| bad(lineno, e.to_string()))?;
        labels.push(label);
        for f in &fields[1..] {
            let v = f
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(lineno, format!("not a finite number: `{f}`")))?;
            values.push(v);
        }
    }
    let features = DMatrix::from_row_slice(labels.len(), width, &values);
    LabeledDataset::new(features, labels, class_order.to_vec())
}

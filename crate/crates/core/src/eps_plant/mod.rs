//! Electrical power system plant: solar array behind an MPPT converter, a
//! battery that clamps the bus, a resistive load, and fault injection.
//!
//! Power flow per sample, with `ocv = ocv_offset_v + ocv_slope_v_per_soc * soc`:
//!
//! * the converter delivers `P_del = efficiency * P_pv` to the bus;
//! * the bus sits at the battery voltage `ocv`, so `I_load = ocv / R`;
//! * the battery absorbs `(P_del - ocv^2 / R) / ocv`. Charging stops once
//!   `ocv` reaches `regulator_setpoint_v`; an empty battery stops discharging
//!   and the bus sags to `sqrt(P_del * R)`.
//!
//! Faults modify this balance:
//!
//! * `MpptIgbtOpen`: `P_del` is scaled by `igbt_open_residual_gain`.
//! * `RegIgbtOpen`: the battery discharge path is open, so only that fraction
//!   of any deficit reaches the load. Surplus charging still works.
//! * `RegIgbtShort`: while the array produces, the bus follows `v_pv`
//!   unregulated and the battery takes whatever is left, without end-of-charge
//!   cut-off.
//! * `BatteryGround`: a constant `ground_fault_leak_a` drains the battery.
//! * `PvOpenCircuit`, `PvLineLine`: see [`pv`].

mod fault;
pub mod pv;
mod reliability;

use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::env_orbit::{generate_profile, EnvSample, OrbitConfig};
use crate::error::{Error, Result};
use crate::seed::{self, Stage};

pub use fault::FaultKind;
pub use pv::pv_operating_point;
pub use reliability::{component_rate, fault_rate, ComponentRate, COMPONENT_RATES};

/// Standard deviations of the additive measurement noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementNoise {
    pub v_pv_v: f64,
    pub i_pv_a: f64,
    pub i_load_a: f64,
}

impl MeasurementNoise {
    pub const ZERO: MeasurementNoise = MeasurementNoise {
        v_pv_v: 0.0,
        i_pv_a: 0.0,
        i_load_a: 0.0,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantConfig {
    /// Cells per string.
    pub n_series: u32,
    /// Strings in parallel.
    pub n_parallel: u32,
    /// Per-string short-circuit current at `g_ref_w_m2` and 25 °C.
    pub i_sc_ref_a: f64,
    /// Per-string open-circuit voltage at 25 °C.
    pub v_oc_ref_v: f64,
    pub alpha_i_per_c: f64,
    pub beta_v_per_c: f64,
    pub g_ref_w_m2: f64,
    pub converter_efficiency: f64,
    /// End-of-charge battery voltage.
    pub regulator_setpoint_v: f64,
    pub battery_capacity_ah: f64,
    pub soc_init: f64,
    pub ocv_offset_v: f64,
    pub ocv_slope_v_per_soc: f64,
    pub load_resistance_ohm: f64,
    pub ground_fault_leak_a: f64,
    pub lineline_shorted_cells: u32,
    pub igbt_open_residual_gain: f64,
    pub measurement_noise_sigma: MeasurementNoise,
    pub seed: u64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            n_series: 12,
            n_parallel: 4,
            i_sc_ref_a: 0.5,
            v_oc_ref_v: 21.0,
            alpha_i_per_c: 0.00025,
            beta_v_per_c: -0.072,
            g_ref_w_m2: 1361.0,
            converter_efficiency: 0.9,
            regulator_setpoint_v: 8.4,
            battery_capacity_ah: 0.5,
            soc_init: 0.9,
            ocv_offset_v: 6.0,
            ocv_slope_v_per_soc: 2.4,
            load_resistance_ohm: 16.0,
            ground_fault_leak_a: 0.2,
            lineline_shorted_cells: 2,
            igbt_open_residual_gain: 0.1,
            // 1 % of the healthy full-scale of each signal
            measurement_noise_sigma: MeasurementNoise {
                v_pv_v: 0.21,
                i_pv_a: 0.02,
                i_load_a: 0.00525,
            },
            seed: 0,
        }
    }
}

fn check(ok: bool, field: &str, reason: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(field, reason))
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    check(v.is_finite() && v > 0.0, field, format!("must be > 0, got {v}"))
}

impl PlantConfig {
    pub fn validate(&self) -> Result<()> {
        check(self.n_series >= 1, "n_series", "must be >= 1")?;
        check(self.n_parallel >= 1, "n_parallel", "must be >= 1")?;
        positive("i_sc_ref_a", self.i_sc_ref_a)?;
        positive("v_oc_ref_v", self.v_oc_ref_v)?;
        check(self.alpha_i_per_c.is_finite(), "alpha_i_per_c", "must be finite")?;
        check(
            self.beta_v_per_c.is_finite() && self.beta_v_per_c <= 0.0,
            "beta_v_per_c",
            format!("must be <= 0, got {}", self.beta_v_per_c),
        )?;
        positive("g_ref_w_m2", self.g_ref_w_m2)?;
        check(
            self.converter_efficiency > 0.0 && self.converter_efficiency <= 1.0,
            "converter_efficiency",
            format!("must lie in (0, 1], got {}", self.converter_efficiency),
        )?;
        positive("regulator_setpoint_v", self.regulator_setpoint_v)?;
        positive("battery_capacity_ah", self.battery_capacity_ah)?;
        check(
            (0.0..=1.0).contains(&self.soc_init),
            "soc_init",
            format!("must lie in [0, 1], got {}", self.soc_init),
        )?;
        check(self.ocv_offset_v.is_finite() && self.ocv_offset_v > 0.0, "ocv_offset_v", "must be > 0")?;
        positive("ocv_slope_v_per_soc", self.ocv_slope_v_per_soc)?;
        positive("load_resistance_ohm", self.load_resistance_ohm)?;
        check(
            self.ground_fault_leak_a.is_finite() && self.ground_fault_leak_a >= 0.0,
            "ground_fault_leak_a",
            "must be >= 0",
        )?;
        check(
            self.lineline_shorted_cells >= 1 && self.lineline_shorted_cells < self.n_series,
            "lineline_shorted_cells",
            format!(
                "must lie in [1, n_series), got {} with n_series {}",
                self.lineline_shorted_cells, self.n_series
            ),
        )?;
        check(
            (0.0..1.0).contains(&self.igbt_open_residual_gain),
            "igbt_open_residual_gain",
            format!("must lie in [0, 1), got {}", self.igbt_open_residual_gain),
        )?;
        let n = &self.measurement_noise_sigma;
        for (field, v) in [
            ("measurement_noise_v_pv", n.v_pv_v),
            ("measurement_noise_i_pv", n.i_pv_a),
            ("measurement_noise_i_load", n.i_load_a),
        ] {
            check(v.is_finite() && v >= 0.0, field, "must be >= 0")?;
        }
        Ok(())
    }

    pub fn ocv(&self, soc: f64) -> f64 {
        self.ocv_offset_v + self.ocv_slope_v_per_soc * soc
    }
}

/// Noise-free electrical state of the plant at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub v_pv_v: f64,
    pub i_pv_a: f64,
    /// Power the converter hands to the bus.
    pub p_delivered_w: f64,
    pub v_bus_v: f64,
    pub i_load_a: f64,
    /// Net current into the battery, ground leak included, before SOC clamping.
    pub i_batt_a: f64,
}

impl PlantState {
    pub fn load_power_w(&self) -> f64 {
        self.v_bus_v * self.i_load_a
    }
}

/// Evaluates the power balance at state of charge `soc`.
pub fn plant_state(soc: f64, env: &EnvSample, config: &PlantConfig, fault: FaultKind) -> PlantState {
    let (v_pv, i_pv) = pv_operating_point(env, config, fault);
    let mut p_del = config.converter_efficiency * v_pv * i_pv;
    if fault == FaultKind::MpptIgbtOpen {
        p_del *= config.igbt_open_residual_gain;
    }
    let r = config.load_resistance_ohm;
    let v_batt = config.ocv(soc);
    let empty = soc <= 0.0;

    let (v_bus, mut i_batt) = if fault == FaultKind::RegIgbtShort && v_pv > 0.0 {
        let i = (p_del - v_pv * v_pv / r) / v_batt;
        (v_pv, if empty { i.max(0.0) } else { i })
    } else {
        let demand = v_batt * v_batt / r;
        let surplus = p_del - demand;
        if surplus >= 0.0 {
            let i = if v_batt >= config.regulator_setpoint_v {
                0.0
            } else {
                surplus / v_batt
            };
            (v_batt, i)
        } else if empty {
            ((p_del * r).sqrt(), 0.0)
        } else if fault == FaultKind::RegIgbtOpen {
            let from_batt = config.igbt_open_residual_gain * -surplus;
            (((p_del + from_batt) * r).sqrt(), -from_batt / v_batt)
        } else {
            (v_batt, surplus / v_batt)
        }
    };
    if fault == FaultKind::BatteryGround {
        i_batt -= config.ground_fault_leak_a;
    }
    PlantState {
        v_pv_v: v_pv,
        i_pv_a: i_pv,
        p_delivered_w: p_del,
        v_bus_v: v_bus,
        i_load_a: v_bus / r,
        i_batt_a: i_batt,
    }
}

/// Coulomb counting with clamping to `[0, 1]`.
///
/// Returns the new SOC and the current that was actually integrated, which
/// differs from `i_batt_a` only when the clamp engaged.
pub fn advance_soc(soc: f64, i_batt_a: f64, capacity_ah: f64, dt_s: f64) -> (f64, f64) {
    let scale = dt_s / (3600.0 * capacity_ah);
    let next = soc + i_batt_a * scale;
    if (0.0..=1.0).contains(&next) {
        (next, i_batt_a)
    } else {
        let clamped = next.clamp(0.0, 1.0);
        (clamped, (clamped - soc) / scale)
    }
}

/// One telemetry row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelemetrySample {
    pub env: EnvSample,
    pub v_pv_v: f64,
    pub i_pv_a: f64,
    pub i_load_a: f64,
    pub soc_true: f64,
    pub fault: FaultKind,
}

fn observe<R: Rng + ?Sized>(
    env: &EnvSample,
    state: &PlantState,
    soc: f64,
    config: &PlantConfig,
    fault: FaultKind,
    rng: &mut R,
) -> TelemetrySample {
    let s = &config.measurement_noise_sigma;
    let mut noisy = |x: f64, sigma: f64| {
        let n: f64 = rng.sample(StandardNormal);
        (x + sigma * n).max(0.0)
    };
    TelemetrySample {
        env: *env,
        v_pv_v: noisy(state.v_pv_v, s.v_pv_v),
        i_pv_a: noisy(state.i_pv_a, s.i_pv_a),
        i_load_a: noisy(state.i_load_a, s.i_load_a),
        soc_true: soc,
        fault,
    }
}

/// Advances the plant by one sample period.
///
/// The battery integrates the current it carried at `prev`, then the new
/// observables are measured at `env`.
pub fn step<R: Rng + ?Sized>(
    prev: &TelemetrySample,
    env: &EnvSample,
    config: &PlantConfig,
    fault: FaultKind,
    dt_s: f64,
    rng: &mut R,
) -> TelemetrySample {
    let carried = plant_state(prev.soc_true, &prev.env, config, fault);
    let (soc, _) = advance_soc(prev.soc_true, carried.i_batt_a, config.battery_capacity_ah, dt_s);
    let state = plant_state(soc, env, config, fault);
    observe(env, &state, soc, config, fault, rng)
}

/// Telemetry row plus the hidden plant quantities behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub sample: TelemetrySample,
    pub state: PlantState,
    /// Battery current integrated between this sample and the next.
    pub i_batt_applied_a: f64,
}

fn check_run(n_samples: usize, dt_s: f64) -> Result<()> {
    check(n_samples >= 1, "n_samples", "must be >= 1")?;
    check(dt_s.is_finite() && dt_s > 0.0, "dt_s", format!("must be > 0, got {dt_s}"))
}

/// Like [`simulate`] but also returns the noise-free state of every step.
pub fn simulate_trace(
    orbit: &OrbitConfig,
    plant: &PlantConfig,
    fault: FaultKind,
    n_samples: usize,
    dt_s: f64,
) -> Result<Vec<StepRecord>> {
    plant.validate()?;
    check_run(n_samples, dt_s)?;
    let profile = generate_profile(orbit, n_samples, dt_s)?;
    let mut rng = seed::rng(seed::derive(plant.seed, Stage::Plant, fault.index() as u64));
    let mut soc = plant.soc_init;
    let mut out = Vec::with_capacity(n_samples);
    for env in &profile {
        let state = plant_state(soc, env, plant, fault);
        let sample = observe(env, &state, soc, plant, fault, &mut rng);
        let (next, applied) = advance_soc(soc, state.i_batt_a, plant.battery_capacity_ah, dt_s);
        out.push(StepRecord {
            sample,
            state,
            i_batt_applied_a: applied,
        });
        soc = next;
    }
    Ok(out)
}

/// Simulates `n_samples` telemetry rows of the plant under `fault`.
pub fn simulate(
    orbit: &OrbitConfig,
    plant: &PlantConfig,
    fault: FaultKind,
    n_samples: usize,
    dt_s: f64,
) -> Result<Vec<TelemetrySample>> {
    Ok(simulate_trace(orbit, plant, fault, n_samples, dt_s)?
        .into_iter()
        .map(|r| r.sample)
        .collect())
}

pub const TELEMETRY_CSV_HEADER: &str =
    "t_s,irradiance_w_m2,panel_temp_c,v_pv_v,i_pv_a,i_load_a,soc_true,fault";

pub fn write_telemetry_csv<W: Write>(mut w: W, rows: &[TelemetrySample]) -> std::io::Result<()> {
    writeln!(w, "{TELEMETRY_CSV_HEADER}")?;
    for s in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            s.env.t_s,
            s.env.irradiance_w_m2,
            s.env.panel_temp_c,
            s.v_pv_v,
            s.i_pv_a,
            s.i_load_a,
            s.soc_true,
            s.fault
        )?;
    }
    Ok(())
}

/// Parses telemetry CSV. `path` is only used in error messages.
pub fn read_telemetry_csv<R: BufRead>(reader: R, path: &Path) -> Result<Vec<TelemetrySample>> {
    let parse_err = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut lines = reader.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim_end() == TELEMETRY_CSV_HEADER => {}
        Some(Ok(h)) => return Err(parse_err(1, format!("unexpected header `{h}`"))),
        Some(Err(e)) => return Err(Error::io(path, e)),
        None => return Err(parse_err(1, "empty file".into())),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != 8 {
            return Err(parse_err(lineno, format!("expected 8 fields, found {}", fields.len())));
        }
        let mut num = [0.0; 7];
        for (k, slot) in num.iter_mut().enumerate() {
            *slot = fields[k]
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(lineno, format!("field {} is not a finite number: `{}`", k + 1, fields[k])))?;
        }
        let fault = fields[7]
            .trim()
            .parse::<FaultKind>()
            .map_err(|e| parse_err(lineno, e.to_string()))?;
        out.push(TelemetrySample {
            env: EnvSample {
                t_s: num[0],
                irradiance_w_m2: num[1],
                panel_temp_c: num[2],
            },
            v_pv_v: num[3],
            i_pv_a: num[4],
            i_load_a: num[5],
            soc_true: num[6],
            fault,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests;

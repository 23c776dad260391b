//! Solar array I-V model and maximum power point selection.

use super::{FaultKind, PlantConfig};
use crate::env_orbit::EnvSample;

/// Knee exponent of the per-string curve `I = Isc (1 - (V/Voc)^m)`.
pub const IV_EXPONENT: i32 = 12;

const INV_PHI: f64 = 0.618_033_988_749_894_9;
const COARSE_POINTS: usize = 400;

/// Per-string short-circuit current and open-circuit voltage.
pub fn string_params(env: &EnvSample, config: &PlantConfig) -> (f64, f64) {
    let dt = env.panel_temp_c - 25.0;
    let isc = config.i_sc_ref_a * (env.irradiance_w_m2 / config.g_ref_w_m2)
        * (1.0 + config.alpha_i_per_c * dt);
    let voc = (config.v_oc_ref_v + config.beta_v_per_c * dt).max(0.0);
    (isc.max(0.0), voc)
}

fn string_current(v: f64, isc: f64, voc: f64) -> f64 {
    if v >= voc {
        return 0.0;
    }
    isc * (1.0 - (v / voc).powi(IV_EXPONENT))
}

/// Array current at terminal voltage `v` under `fault`.
pub fn array_current(v: f64, isc: f64, voc: f64, config: &PlantConfig, fault: FaultKind) -> f64 {
    let np = config.n_parallel as f64;
    match fault {
        FaultKind::PvOpenCircuit => (np - 1.0) * string_current(v, isc, voc),
        FaultKind::PvLineLine => {
            let ns = config.n_series as f64;
            let voc_short = voc * (ns - config.lineline_shorted_cells as f64) / ns;
            // the blocking diode keeps the shorted string from sinking current
            (np - 1.0) * string_current(v, isc, voc) + string_current(v, isc, voc_short).max(0.0)
        }
        _ => np * string_current(v, isc, voc),
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        c
    } else {
        d
    }
}

/// MPPT operating point `(v_pv, i_pv)` of the array.
///
/// A single-knee curve has a unimodal power curve, so golden-section search
/// over `[0, Voc]` suffices. A line-line fault creates a second knee; a
/// coarse scan first picks the bracket holding the global maximum.
pub fn pv_operating_point(env: &EnvSample, config: &PlantConfig, fault: FaultKind) -> (f64, f64) {
    if env.irradiance_w_m2 <= 0.0 {
        return (0.0, 0.0);
    }
    let (isc, voc) = string_params(env, config);
    if isc <= 0.0 || voc <= 0.0 {
        return (0.0, 0.0);
    }
    let power = |v: f64| v * array_current(v, isc, voc, config, fault);
    let tol = 1e-6 * voc;

    let (lo, hi) = if fault == FaultKind::PvLineLine {
        let h = voc / COARSE_POINTS as f64;
        let best = (0..=COARSE_POINTS)
            .max_by(|&i, &j| power(i as f64 * h).total_cmp(&power(j as f64 * h)))
            .unwrap();
        (
            best.saturating_sub(1) as f64 * h,
            ((best + 1).min(COARSE_POINTS)) as f64 * h,
        )
    } else {
        (0.0, voc)
    };
    let v = golden_max(power, lo, hi, tol);
    (v, array_current(v, isc, voc, config, fault))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(g: f64, t: f64) -> EnvSample {
        EnvSample {
            t_s: 0.0,
            irradiance_w_m2: g,
            panel_temp_c: t,
        }
    }

    fn grid_max(e: &EnvSample, cfg: &PlantConfig, fault: FaultKind, n: usize) -> f64 {
        let (isc, voc) = string_params(e, cfg);
        (0..n)
            .map(|k| {
                let v = voc * k as f64 / (n - 1) as f64;
                v * array_current(v, isc, voc, cfg, fault)
            })
            .fold(f64::MIN, f64::max)
    }

    #[test]
    fn dark_array_produces_nothing() {
        let cfg = PlantConfig::default();
        assert_eq!(pv_operating_point(&env(0.0, 10.0), &cfg, FaultKind::Healthy), (0.0, 0.0));
    }

    #[test]
    fn healthy_point_beats_grid() {
        let cfg = PlantConfig::default();
        let e = env(1361.0, 35.0);
        let (v, i) = pv_operating_point(&e, &cfg, FaultKind::Healthy);
        let best = grid_max(&e, &cfg, FaultKind::Healthy, 10_001);
        assert!(v * i >= best * (1.0 - 1e-12), "{} < {}", v * i, best);
    }

    #[test]
    fn healthy_voltage_matches_closed_form_knee() {
        let cfg = PlantConfig::default();
        let e = env(1000.0, 25.0);
        let (v, _) = pv_operating_point(&e, &cfg, FaultKind::Healthy);
        let m = IV_EXPONENT as f64;
        let vmp = cfg.v_oc_ref_v * (1.0 / (m + 1.0)).powf(1.0 / m);
        assert!((v - vmp).abs() < 1e-5 * cfg.v_oc_ref_v);
    }

    #[test]
    fn open_string_scales_current() {
        let cfg = PlantConfig::default();
        let e = env(1200.0, 40.0);
        let (vh, ih) = pv_operating_point(&e, &cfg, FaultKind::Healthy);
        let (vo, io) = pv_operating_point(&e, &cfg, FaultKind::PvOpenCircuit);
        let np = cfg.n_parallel as f64;
        assert!((vh - vo).abs() < 1e-12);
        assert!((io / ih - (np - 1.0) / np).abs() < 1e-9);
    }

    #[test]
    fn line_line_finds_global_maximum() {
        let cfg = PlantConfig::default();
        for t in [-20.0, 10.0, 60.0] {
            let e = env(1361.0, t);
            let (v, i) = pv_operating_point(&e, &cfg, FaultKind::PvLineLine);
            let best = grid_max(&e, &cfg, FaultKind::PvLineLine, 100_001);
            assert!(v * i >= best * (1.0 - 1e-9));
            let healthy = grid_max(&e, &cfg, FaultKind::Healthy, 10_001);
            assert!(v * i < healthy);
        }
    }
}

//! LEO environment profiles: square-wave solar irradiance with an eclipse
//! window and first-order thermal relaxation of the panel temperature.

use std::io::Write;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitConfig {
    pub orbit_period_s: f64,
    /// Trailing fraction of every orbit spent in eclipse, in `[0, 0.5]`.
    pub eclipse_fraction: f64,
    pub solar_constant_w_m2: f64,
    pub temp_sunlit_c: f64,
    pub temp_eclipse_c: f64,
    pub thermal_time_constant_s: f64,
    pub irradiance_noise_sigma: f64,
    pub seed: u64,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        Self {
            orbit_period_s: 5400.0,
            eclipse_fraction: 0.35,
            solar_constant_w_m2: 1361.0,
            temp_sunlit_c: 60.0,
            temp_eclipse_c: -20.0,
            thermal_time_constant_s: 600.0,
            irradiance_noise_sigma: 0.0,
            seed: 0,
        }
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be > 0, got {v}")))
    }
}

impl OrbitConfig {
    pub fn validate(&self) -> Result<()> {
        positive("orbit_period_s", self.orbit_period_s)?;
        positive("solar_constant_w_m2", self.solar_constant_w_m2)?;
        positive("thermal_time_constant_s", self.thermal_time_constant_s)?;
        if !(0.0..=0.5).contains(&self.eclipse_fraction) {
            return Err(Error::config(
                "eclipse_fraction",
                format!("must lie in [0, 0.5], got {}", self.eclipse_fraction),
            ));
        }
        if !(self.irradiance_noise_sigma >= 0.0 && self.irradiance_noise_sigma.is_finite()) {
            return Err(Error::config("irradiance_noise_sigma", "must be >= 0"));
        }
        if !self.temp_sunlit_c.is_finite() {
            return Err(Error::config("temp_sunlit_c", "must be finite"));
        }
        if !self.temp_eclipse_c.is_finite() {
            return Err(Error::config("temp_eclipse_c", "must be finite"));
        }
        Ok(())
    }

    /// True when `t_s` falls inside the eclipse window of its orbit.
    pub fn in_eclipse(&self, t_s: f64) -> bool {
        let phase = t_s.rem_euclid(self.orbit_period_s);
        phase >= (1.0 - self.eclipse_fraction) * self.orbit_period_s
    }

    /// Irradiance before noise: the solar constant when sunlit, zero in eclipse.
    pub fn clean_irradiance(&self, t_s: f64) -> f64 {
        if self.in_eclipse(t_s) {
            0.0
        } else {
            self.solar_constant_w_m2
        }
    }
}

/// One environment sample driving the plant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvSample {
    pub t_s: f64,
    pub irradiance_w_m2: f64,
    pub panel_temp_c: f64,
}

/// Exponential step of the panel temperature toward the current regime's
/// equilibrium (sunlit when `irradiance_w_m2 > 0`, eclipse otherwise).
pub fn panel_temperature(
    irradiance_w_m2: f64,
    prev_temp_c: f64,
    config: &OrbitConfig,
    dt_s: f64,
) -> f64 {
    let target = if irradiance_w_m2 > 0.0 {
        config.temp_sunlit_c
    } else {
        config.temp_eclipse_c
    };
    let decay = (-dt_s / config.thermal_time_constant_s).exp();
    target + (prev_temp_c - target) * decay
}

/// Generates `n_samples` environment samples at `t = k * dt_s`.
///
/// The panel starts at the eclipse equilibrium temperature. Thermal dynamics
/// follow the noise-free irradiance so that the regime switch is exact.
pub fn generate_profile(config: &OrbitConfig, n_samples: usize, dt_s: f64) -> Result<Vec<EnvSample>> {
    config.validate()?;
    if n_samples == 0 {
        return Err(Error::config("n_samples", "must be >= 1"));
    }
    if !(dt_s.is_finite() && dt_s > 0.0) {
        return Err(Error::config("dt_s", format!("must be > 0, got {dt_s}")));
    }
    let mut rng = seed::rng(config.seed);
    let noise = (config.irradiance_noise_sigma > 0.0)
        .then(|| Normal::new(0.0, config.irradiance_noise_sigma).expect("sigma validated"));

    let mut out = Vec::with_capacity(n_samples);
    let mut temp = config.temp_eclipse_c;
    for k in 0..n_samples {
        let t_s = k as f64 * dt_s;
        let clean = config.clean_irradiance(t_s);
        if k > 0 {
            temp = panel_temperature(clean, temp, config, dt_s);
        }
        let irradiance_w_m2 = match &noise {
            Some(n) => (clean + n.sample(&mut rng)).max(0.0),
            None => clean,
        };
        out.push(EnvSample {
            t_s,
            irradiance_w_m2,
            panel_temp_c: temp,
        });
    }
    Ok(out)
}

pub const PROFILE_CSV_HEADER: &str = "t_s,irradiance_w_m2,panel_temp_c";

/// Writes a profile as CSV (`t_s,irradiance_w_m2,panel_temp_c`).
pub fn write_profile_csv<W: Write>(mut w: W, profile: &[EnvSample]) -> std::io::Result<()> {
    writeln!(w, "{PROFILE_CSV_HEADER}")?;
    for s in profile {
        writeln!(w, "{},{},{}", s.t_s, s.irradiance_w_m2, s.panel_temp_c)?;
    }
    Ok(())
}

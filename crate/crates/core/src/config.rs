//! Pipeline configuration: a flat `key = value` text format with
//! `[orbit]`, `[plant]`, `[train]` and `[classify]` sections.
//!
//! Keys before the first section header belong to the root (currently only
//! `seed`). `#` starts a comment. Every key is optional; missing keys keep
//! their built-in default.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::env_orbit::OrbitConfig;
use crate::eps_plant::{MeasurementNoise, PlantConfig};
use crate::error::{Error, Result};
use crate::features::SocKalmanConfig;
use crate::seed::{self, Stage};
use crate::sysid::TrainConfig;

/// Experiment and classifier settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    /// Samples per class in every feature dataset.
    pub n_samples: usize,
    pub dt_s: f64,
    /// Leading samples of every run discarded while the battery settles.
    pub settle_samples: usize,
    pub k_folds: usize,
    /// Per-class fraction of the held-out split used for training.
    pub holdout_train_fraction: f64,
    pub knn_k_candidates: Vec<usize>,
    pub dt_max_depth: usize,
    pub dt_min_leaf: usize,
    pub with_moment: bool,
    /// Pair features use the simulator's SOC instead of the Kalman estimate.
    pub use_true_soc: bool,
    pub kalman_process_noise_q: f64,
    pub kalman_measurement_noise_r: f64,
    pub kalman_soc_init: f64,
    pub kalman_p_init: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            n_samples: 2001,
            dt_s: 30.0,
            settle_samples: 720,
            k_folds: 5,
            holdout_train_fraction: 0.7,
            knn_k_candidates: vec![1, 2, 3, 4, 5, 7, 10, 15],
            dt_max_depth: 10,
            dt_min_leaf: 5,
            with_moment: true,
            use_true_soc: false,
            kalman_process_noise_q: 1e-7,
            kalman_measurement_noise_r: 1e-2,
            kalman_soc_init: 0.5,
            kalman_p_init: 0.1,
        }
    }
}

impl ClassifyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 10 {
            return Err(Error::config("n_samples", "must be >= 10"));
        }
        if !(self.dt_s.is_finite() && self.dt_s > 0.0) {
            return Err(Error::config("dt_s", format!("must be > 0, got {}", self.dt_s)));
        }
        if self.k_folds < 2 {
            return Err(Error::config("k_folds", "must be >= 2"));
        }
        if !(self.holdout_train_fraction > 0.0 && self.holdout_train_fraction < 1.0) {
            return Err(Error::config("holdout_train_fraction", "must lie in (0, 1)"));
        }
        if self.knn_k_candidates.is_empty() || self.knn_k_candidates.contains(&0) {
            return Err(Error::config("knn_k_candidates", "must be a non-empty list of k >= 1"));
        }
        if self.dt_min_leaf == 0 {
            return Err(Error::config("dt_min_leaf", "must be >= 1"));
        }
        Ok(())
    }
}

/// Fully resolved pipeline configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    /// Root seed; every stage seed is derived from it.
    pub seed: u64,
    pub orbit: OrbitConfig,
    pub plant: PlantConfig,
    pub train: TrainConfig,
    pub classify: ClassifyConfig,
}

impl Default for Config {
    fn default() -> Self {
        let mut c = Self {
            seed: 0,
            orbit: OrbitConfig::default(),
            plant: PlantConfig::default(),
            train: TrainConfig::default(),
            classify: ClassifyConfig::default(),
        };
        c.set_seed(0);
        c
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Root,
    Orbit,
    Plant,
    Train,
    Classify,
}

impl Section {
    fn name(self) -> &'static str {
        match self {
            Section::Root => "",
            Section::Orbit => "orbit",
            Section::Plant => "plant",
            Section::Train => "train",
            Section::Classify => "classify",
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("`{key}`: cannot parse `{v}`"))
}

fn flag(key: &str, v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("`{key}`: expected true or false, got `{v}`")),
    }
}

fn list<T: FromStr>(key: &str, v: &str) -> std::result::Result<Vec<T>, String> {
    v.split(',').map(|s| num(key, s.trim())).collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
}

impl Config {
    /// Sets the root seed and the stage seeds derived from it.
    pub fn set_seed(&mut self, root: u64) {
        self.seed = root;
        self.orbit.seed = seed::derive(root, Stage::Orbit, 0);
        self.plant.seed = root;
        self.train.seed = seed::derive(root, Stage::ModelBank, 0);
    }

    pub fn validate(&self) -> Result<()> {
        self.orbit.validate()?;
        self.plant.validate()?;
        self.train.validate()?;
        self.classify.validate()?;
        self.kalman().validate()
    }

    /// Kalman settings; the battery and load model come from the plant.
    pub fn kalman(&self) -> SocKalmanConfig {
        SocKalmanConfig {
            process_noise_q: self.classify.kalman_process_noise_q,
            measurement_noise_r: self.classify.kalman_measurement_noise_r,
            ocv_slope_v_per_soc: self.plant.ocv_slope_v_per_soc,
            ocv_offset_v: self.plant.ocv_offset_v,
            soc_init_estimate: self.classify.kalman_soc_init,
            p_init: self.classify.kalman_p_init,
            load_resistance_ohm: self.plant.load_resistance_ohm,
            converter_efficiency: self.plant.converter_efficiency,
        }
    }

    fn set(&mut self, section: Section, key: &str, v: &str) -> std::result::Result<(), String> {
        let (o, p, t, c) = (&mut self.orbit, &mut self.plant, &mut self.train, &mut self.classify);
        match (section, key) {
            (Section::Root, "seed") => {
                let s = num(key, v)?;
                self.set_seed(s);
            }
            (Section::Orbit, "orbit_period_s") => o.orbit_period_s = num(key, v)?,
            (Section::Orbit, "eclipse_fraction") => o.eclipse_fraction = num(key, v)?,
            (Section::Orbit, "solar_constant_w_m2") => o.solar_constant_w_m2 = num(key, v)?,
            (Section::Orbit, "temp_sunlit_c") => o.temp_sunlit_c = num(key, v)?,
            (Section::Orbit, "temp_eclipse_c") => o.temp_eclipse_c = num(key, v)?,
            (Section::Orbit, "thermal_time_constant_s") => o.thermal_time_constant_s = num(key, v)?,
            (Section::Orbit, "irradiance_noise_sigma") => o.irradiance_noise_sigma = num(key, v)?,
            (Section::Plant, "n_series") => p.n_series = num(key, v)?,
            (Section::Plant, "n_parallel") => p.n_parallel = num(key, v)?,
            (Section::Plant, "i_sc_ref_a") => p.i_sc_ref_a = num(key, v)?,
            (Section::Plant, "v_oc_ref_v") => p.v_oc_ref_v = num(key, v)?,
            (Section::Plant, "alpha_i_per_c") => p.alpha_i_per_c = num(key, v)?,
            (Section::Plant, "beta_v_per_c") => p.beta_v_per_c = num(key, v)?,
            (Section::Plant, "g_ref_w_m2") => p.g_ref_w_m2 = num(key, v)?,
            (Section::Plant, "converter_efficiency") => p.converter_efficiency = num(key, v)?,
            (Section::Plant, "regulator_setpoint_v") => p.regulator_setpoint_v = num(key, v)?,
            (Section::Plant, "battery_capacity_ah") => p.battery_capacity_ah = num(key, v)?,
            (Section::Plant, "soc_init") => p.soc_init = num(key, v)?,
            (Section::Plant, "ocv_offset_v") => p.ocv_offset_v = num(key, v)?,
            (Section::Plant, "ocv_slope_v_per_soc") => p.ocv_slope_v_per_soc = num(key, v)?,
            (Section::Plant, "load_resistance_ohm") => p.load_resistance_ohm = num(key, v)?,
            (Section::Plant, "ground_fault_leak_a") => p.ground_fault_leak_a = num(key, v)?,
            (Section::Plant, "lineline_shorted_cells") => p.lineline_shorted_cells = num(key, v)?,
            (Section::Plant, "igbt_open_residual_gain") => p.igbt_open_residual_gain = num(key, v)?,
            (Section::Plant, "measurement_noise_v_pv") => p.measurement_noise_sigma.v_pv_v = num(key, v)?,
            (Section::Plant, "measurement_noise_i_pv") => p.measurement_noise_sigma.i_pv_a = num(key, v)?,
            (Section::Plant, "measurement_noise_i_load") => p.measurement_noise_sigma.i_load_a = num(key, v)?,
            (Section::Train, "n_hidden") => t.n_hidden = num(key, v)?,
            (Section::Train, "max_epochs") => t.max_epochs = num(key, v)?,
            (Section::Train, "mu_init") => t.mu_init = num(key, v)?,
            (Section::Train, "mu_factor") => t.mu_factor = num(key, v)?,
            (Section::Train, "mu_max") => t.mu_max = num(key, v)?,
            (Section::Train, "goal_mse") => t.goal_mse = num(key, v)?,
            (Section::Train, "split") => {
                let s: Vec<f64> = list(key, v)?;
                t.split = s
                    .try_into()
                    .map_err(|_| format!("`{key}`: expected three fractions"))?;
            }
            (Section::Train, "max_val_rises") => t.max_val_rises = num(key, v)?,
            (Section::Classify, "n_samples") => c.n_samples = num(key, v)?,
            (Section::Classify, "dt_s") => c.dt_s = num(key, v)?,
            (Section::Classify, "settle_samples") => c.settle_samples = num(key, v)?,
            (Section::Classify, "k_folds") => c.k_folds = num(key, v)?,
            (Section::Classify, "holdout_train_fraction") => c.holdout_train_fraction = num(key, v)?,
            (Section::Classify, "knn_k_candidates") => c.knn_k_candidates = list(key, v)?,
            (Section::Classify, "dt_max_depth") => c.dt_max_depth = num(key, v)?,
            (Section::Classify, "dt_min_leaf") => c.dt_min_leaf = num(key, v)?,
            (Section::Classify, "with_moment") => c.with_moment = flag(key, v)?,
            (Section::Classify, "use_true_soc") => c.use_true_soc = flag(key, v)?,
            (Section::Classify, "kalman_process_noise_q") => c.kalman_process_noise_q = num(key, v)?,
            (Section::Classify, "kalman_measurement_noise_r") => c.kalman_measurement_noise_r = num(key, v)?,
            (Section::Classify, "kalman_soc_init") => c.kalman_soc_init = num(key, v)?,
            (Section::Classify, "kalman_p_init") => c.kalman_p_init = num(key, v)?,
            _ => {
                let at = if section == Section::Root {
                    "outside any section".to_string()
                } else {
                    format!("in [{}]", section.name())
                };
                return Err(format!("unknown key `{key}` {at}"));
            }
        }
        Ok(())
    }

    /// Every resolved value, grouped by section, in the file format.
    pub fn entries(&self) -> Vec<(&'static str, &'static str, String)> {
        let (o, p, t, c) = (&self.orbit, &self.plant, &self.train, &self.classify);
        let n: &MeasurementNoise = &p.measurement_noise_sigma;
        vec![
            ("", "seed", self.seed.to_string()),
            ("orbit", "orbit_period_s", o.orbit_period_s.to_string()),
            ("orbit", "eclipse_fraction", o.eclipse_fraction.to_string()),
            ("orbit", "solar_constant_w_m2", o.solar_constant_w_m2.to_string()),
            ("orbit", "temp_sunlit_c", o.temp_sunlit_c.to_string()),
            ("orbit", "temp_eclipse_c", o.temp_eclipse_c.to_string()),
            ("orbit", "thermal_time_constant_s", o.thermal_time_constant_s.to_string()),
            ("orbit", "irradiance_noise_sigma", o.irradiance_noise_sigma.to_string()),
            ("plant", "n_series", p.n_series.to_string()),
            ("plant", "n_parallel", p.n_parallel.to_string()),
            ("plant", "i_sc_ref_a", p.i_sc_ref_a.to_string()),
            ("plant", "v_oc_ref_v", p.v_oc_ref_v.to_string()),
            ("plant", "alpha_i_per_c", p.alpha_i_per_c.to_string()),
            ("plant", "beta_v_per_c", p.beta_v_per_c.to_string()),
            ("plant", "g_ref_w_m2", p.g_ref_w_m2.to_string()),
            ("plant", "converter_efficiency", p.converter_efficiency.to_string()),
            ("plant", "regulator_setpoint_v", p.regulator_setpoint_v.to_string()),
            ("plant", "battery_capacity_ah", p.battery_capacity_ah.to_string()),
            ("plant", "soc_init", p.soc_init.to_string()),
            ("plant", "ocv_offset_v", p.ocv_offset_v.to_string()),
            ("plant", "ocv_slope_v_per_soc", p.ocv_slope_v_per_soc.to_string()),
            ("plant", "load_resistance_ohm", p.load_resistance_ohm.to_string()),
            ("plant", "ground_fault_leak_a", p.ground_fault_leak_a.to_string()),
            ("plant", "lineline_shorted_cells", p.lineline_shorted_cells.to_string()),
            ("plant", "igbt_open_residual_gain", p.igbt_open_residual_gain.to_string()),
            ("plant", "measurement_noise_v_pv", n.v_pv_v.to_string()),
            ("plant", "measurement_noise_i_pv", n.i_pv_a.to_string()),
            ("plant", "measurement_noise_i_load", n.i_load_a.to_string()),
            ("train", "n_hidden", t.n_hidden.to_string()),
            ("train", "max_epochs", t.max_epochs.to_string()),
            ("train", "mu_init", t.mu_init.to_string()),
            ("train", "mu_factor", t.mu_factor.to_string()),
            ("train", "mu_max", t.mu_max.to_string()),
            ("train", "goal_mse", t.goal_mse.to_string()),
            ("train", "split", join(&t.split)),
            ("train", "max_val_rises", t.max_val_rises.to_string()),
            ("classify", "n_samples", c.n_samples.to_string()),
            ("classify", "dt_s", c.dt_s.to_string()),
            ("classify", "settle_samples", c.settle_samples.to_string()),
            ("classify", "k_folds", c.k_folds.to_string()),
            ("classify", "holdout_train_fraction", c.holdout_train_fraction.to_string()),
            ("classify", "knn_k_candidates", join(&c.knn_k_candidates)),
            ("classify", "dt_max_depth", c.dt_max_depth.to_string()),
            ("classify", "dt_min_leaf", c.dt_min_leaf.to_string()),
            ("classify", "with_moment", c.with_moment.to_string()),
            ("classify", "use_true_soc", c.use_true_soc.to_string()),
            ("classify", "kalman_process_noise_q", c.kalman_process_noise_q.to_string()),
            ("classify", "kalman_measurement_noise_r", c.kalman_measurement_noise_r.to_string()),
            ("classify", "kalman_soc_init", c.kalman_soc_init.to_string()),
            ("classify", "kalman_p_init", c.kalman_p_init.to_string()),
        ]
    }

    /// Renders every resolved value; parsing the result gives back `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut current = "";
        for (section, key, value) in self.entries() {
            if section != current {
                let _ = write!(s, "\n[{section}]\n");
                current = section;
            }
            let _ = writeln!(s, "{key} = {value}");
        }
        s
    }

    /// Hex SHA-256 of [`Config::to_text`].
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    /// Applies the entries of `text` on top of `self`. `path` is only used
    /// in error messages.
    pub fn apply_text(&mut self, text: &str, path: &Path) -> Result<()> {
        let mut section = Section::Root;
        for (i, raw) in text.lines().enumerate() {
            let bad = |reason: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                reason,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = match name.trim() {
                    "orbit" => Section::Orbit,
                    "plant" => Section::Plant,
                    "train" => Section::Train,
                    "classify" => Section::Classify,
                    other => return Err(bad(format!("unknown section `[{other}]`"))),
                };
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(bad(format!("expected `key = value`, got `{line}`")));
            };
            self.set(section, key.trim(), value.trim()).map_err(bad)?;
        }
        Ok(())
    }

    /// Defaults overridden by `text`, then validated.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text, path)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}

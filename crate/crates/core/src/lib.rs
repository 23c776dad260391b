//! Nanosatellite electrical power system simulator with a residual-based
//! fault detection and diagnosis pipeline.
//!
//! The crate is organised along the data flow:
//!
//! * [`env_orbit`] generates irradiance and panel temperature profiles;
//! * [`eps_plant`] turns them into telemetry under a chosen fault;
//! * [`sysid`] fits one neural model per health mode (the model bank);
//! * [`features`] computes residuals, the load-current moment and a SOC estimate;
//! * [`classify`] trains and evaluates MLP, KNN, ID3 and PCA classifiers;
//! * [`experiment`] wires everything together from a single root seed.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod config;
pub mod env_orbit;
pub mod eps_plant;
pub mod error;
pub mod experiment;
pub mod features;
pub mod seed;
pub mod sysid;

pub use env_orbit::{generate_profile, panel_temperature, EnvSample, OrbitConfig};
pub use eps_plant::{simulate, FaultKind, PlantConfig, TelemetrySample};
pub use error::{Error, Result};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Health mode of the power system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FaultKind {
    Healthy,
    PvOpenCircuit,
    PvLineLine,
    MpptIgbtOpen,
    RegIgbtOpen,
    RegIgbtShort,
    BatteryGround,
}

impl FaultKind {
    pub const ALL: [FaultKind; 7] = [
        FaultKind::Healthy,
        FaultKind::PvOpenCircuit,
        FaultKind::PvLineLine,
        FaultKind::MpptIgbtOpen,
        FaultKind::RegIgbtOpen,
        FaultKind::RegIgbtShort,
        FaultKind::BatteryGround,
    ];

    /// Class order of the power-system task. Also the residual order.
    pub const EPS_CLASSES: [FaultKind; 5] = [
        FaultKind::Healthy,
        FaultKind::BatteryGround,
        FaultKind::MpptIgbtOpen,
        FaultKind::RegIgbtOpen,
        FaultKind::RegIgbtShort,
    ];

    /// Class order of the solar-array task.
    pub const PV_CLASSES: [FaultKind; 3] = [
        FaultKind::Healthy,
        FaultKind::PvLineLine,
        FaultKind::PvOpenCircuit,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            FaultKind::Healthy => "Healthy",
            FaultKind::PvOpenCircuit => "PvOpenCircuit",
            FaultKind::PvLineLine => "PvLineLine",
            FaultKind::MpptIgbtOpen => "MpptIgbtOpen",
            FaultKind::RegIgbtOpen => "RegIgbtOpen",
            FaultKind::RegIgbtShort => "RegIgbtShort",
            FaultKind::BatteryGround => "BatteryGround",
        }
    }

    /// Stable index into [`FaultKind::ALL`], used for seed derivation.
    pub fn index(self) -> usize {
        FaultKind::ALL.iter().position(|&f| f == self).unwrap()
    }

    pub fn is_pv_fault(self) -> bool {
        matches!(self, FaultKind::PvOpenCircuit | FaultKind::PvLineLine)
    }

    pub fn valid_tags() -> String {
        FaultKind::ALL.map(FaultKind::tag).join(", ")
    }
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for FaultKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FaultKind::ALL
            .into_iter()
            .find(|f| f.tag() == s)
            .ok_or_else(|| {
                Error::config(
                    "fault",
                    format!("unknown fault tag `{s}`; valid tags: {}", FaultKind::valid_tags()),
                )
            })
    }
}

//! Component fault rates, λ = N_faulty / (N_total · t).

use crate::error::{Error, Result};

/// Faults per component-hour.
pub fn fault_rate(n_faulty: u64, n_total: u64, hours: f64) -> Result<f64> {
    if n_total == 0 {
        return Err(Error::Domain("n_total must be >= 1".into()));
    }
    if !(hours.is_finite() && hours > 0.0) {
        return Err(Error::Domain(format!("hours must be > 0, got {hours}")));
    }
    if n_faulty > n_total {
        return Err(Error::Domain(format!(
            "n_faulty ({n_faulty}) exceeds n_total ({n_total})"
        )));
    }
    Ok(n_faulty as f64 / (n_total as f64 * hours))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentRate {
    pub component: &'static str,
    /// Rate per hour at 40 °C.
    pub per_hour: f64,
    /// The source tabulates this entry as "10-9", which reads either as a
    /// range or as a typo. It is stored as 10 × 1e-9 /h.
    pub ambiguous: bool,
}

const fn rate(component: &'static str, units_1e9: f64, ambiguous: bool) -> ComponentRate {
    ComponentRate {
        component,
        per_hour: units_1e9 * 1e-9,
        ambiguous,
    }
}

/// Reference fault rates of common EPS components at 40 °C.
pub const COMPONENT_RATES: [ComponentRate; 9] = [
    rate("Transistor", 10.0, true),
    rate("Trustor (power switch family)", 10.0, true),
    rate("Digital integrated circuit", 30.0, false),
    rate("Logical elements", 30.0, false),
    rate("Analog switches", 2000.0, false),
    rate("Amplifier", 10.0, true),
    rate("Diode", 10.0, true),
    rate("Battery Li-Ion", 10.0, true),
    rate("Solar array", 10.0, true),
];

/// Case-insensitive lookup by component name.
pub fn component_rate(name: &str) -> Option<ComponentRate> {
    COMPONENT_RATES
        .iter()
        .find(|r| r.component.eq_ignore_ascii_case(name.trim()))
        .copied()
}

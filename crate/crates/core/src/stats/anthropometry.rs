use serde::{Deserialize, Serialize};

use super::StatsError;

pub const LB_TO_KG: f64 = 0.45359237;
pub const IN_TO_M: f64 = 0.0254;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    /// Kilograms and meters.
    #[default]
    Metric,
    /// Pounds and inches.
    Imperial,
}

impl Units {
    /// Converts `(weight, height)` to kilograms and meters.
    pub fn to_si(self, weight: f64, height: f64) -> (f64, f64) {
        match self {
            Units::Metric => (weight, height),
            Units::Imperial => (weight * LB_TO_KG, height * IN_TO_M),
        }
    }
}

/// `weight / height²`, rejecting values outside 0.5–2.8 m and 20–400 kg.
pub fn bmi(weight_kg: f64, height_m: f64) -> Result<f64, StatsError> {
    if !(height_m > 0.5 && height_m < 2.8) {
        return Err(StatsError::ImplausibleAnthropometry(format!("height {height_m} m")));
    }
    if !(weight_kg > 20.0 && weight_kg < 400.0) {
        return Err(StatsError::ImplausibleAnthropometry(format!("weight {weight_kg} kg")));
    }
    Ok(weight_kg / (height_m * height_m))
}

pub fn bmi_from_units(weight: f64, height: f64, units: Units) -> Result<f64, StatsError> {
    let (kg, m) = units.to_si(weight, height);
    bmi(kg, m)
}

/// Boundary between the two individual classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub value: f64,
    /// Whether a BMI exactly at `value` counts as positive.
    pub inclusive: bool,
}

impl Default for Cutoff {
    fn default() -> Self {
        Cutoff {
            value: 28.7,
            inclusive: true,
        }
    }
}

impl Cutoff {
    pub fn new(value: f64) -> Self {
        Cutoff {
            value,
            ..Cutoff::default()
        }
    }

    pub fn label(&self, bmi: f64) -> bool {
        if self.inclusive {
            bmi >= self.value
        } else {
            bmi > self.value
        }
    }
}

/// `bmi >= cutoff`.
pub fn label_individual(bmi: f64, cutoff: f64) -> bool {
    Cutoff::new(cutoff).label(bmi)
}

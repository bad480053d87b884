//! Power units and dB conversions. Conversions happen only at the
//! configuration boundary; all model code works in the PA's power unit.

use serde::{Deserialize, Serialize};

/// Unit in which `|u|^2` enters the PA polynomial, and therefore the unit of
/// every internal power quantity (input power, noise, radiated and consumed
/// power).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PowerUnit {
    #[default]
    Milliwatt,
    Watt,
}

impl PowerUnit {
    pub fn from_dbm(self, dbm: f64) -> f64 {
        let mw = db_to_linear(dbm);
        match self {
            PowerUnit::Milliwatt => mw,
            PowerUnit::Watt => mw * 1e-3,
        }
    }

    pub fn to_dbm(self, power: f64) -> f64 {
        linear_to_db(self.to_milliwatts(power))
    }

    pub fn from_milliwatts(self, mw: f64) -> f64 {
        match self {
            PowerUnit::Milliwatt => mw,
            PowerUnit::Watt => mw * 1e-3,
        }
    }

    pub fn to_milliwatts(self, power: f64) -> f64 {
        match self {
            PowerUnit::Milliwatt => power,
            PowerUnit::Watt => power * 1e3,
        }
    }

    pub fn to_watts(self, power: f64) -> f64 {
        match self {
            PowerUnit::Milliwatt => power * 1e-3,
            PowerUnit::Watt => power,
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dbm_round_trip() {
        assert!((PowerUnit::Milliwatt.from_dbm(6.0) - 3.981_071_705_534_972).abs() < 1e-12);
        assert!((PowerUnit::Watt.from_dbm(30.0) - 1.0).abs() < 1e-12);
        assert!((PowerUnit::Milliwatt.to_dbm(100.0) - 20.0).abs() < 1e-12);
        assert!((PowerUnit::Watt.to_milliwatts(0.5) - 500.0).abs() < 1e-12);
    }
}

//! Uniformly spaced tide and price series.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

const DATETIME_FORMATS: [&str; 3] = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"];

/// Series label. Either a plain second count or a naive date-time; no time zones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Timestamp {
    Seconds(i64),
    DateTime(NaiveDateTime),
}

impl Timestamp {
    /// Label `offset_s` seconds later, rounded to whole seconds.
    pub fn offset(self, offset_s: f64) -> Timestamp {
        let secs = offset_s.round() as i64;
        match self {
            Timestamp::Seconds(s) => Timestamp::Seconds(s + secs),
            Timestamp::DateTime(dt) => Timestamp::DateTime(dt + chrono::Duration::seconds(secs)),
        }
    }

    /// Seconds from `self` to `later`; `None` when the label kinds differ.
    pub fn seconds_until(self, later: Timestamp) -> Option<i64> {
        match (self, later) {
            (Timestamp::Seconds(a), Timestamp::Seconds(b)) => Some(b - a),
            (Timestamp::DateTime(a), Timestamp::DateTime(b)) => Some((b - a).num_seconds()),
            _ => None,
        }
    }
}

impl Default for Timestamp {
    fn default() -> Self {
        Timestamp::Seconds(0)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Timestamp::Seconds(s) => write!(f, "{s}"),
            Timestamp::DateTime(dt) => write!(f, "{}", dt.format(DATETIME_FORMATS[0])),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unrecognised timestamp {0:?}")]
pub struct TimestampParseError(pub String);

impl FromStr for Timestamp {
    type Err = TimestampParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Ok(secs) = s.parse::<i64>() {
            return Ok(Timestamp::Seconds(secs));
        }
        DATETIME_FORMATS
            .iter()
            .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
            .map(Timestamp::DateTime)
            .ok_or_else(|| TimestampParseError(s.to_string()))
    }
}

impl Serialize for Timestamp {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SeriesError {
    #[error("series needs at least {min} values, got {got}")]
    TooShort { min: usize, got: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("step length must be positive, got {0}")]
    BadStep(f64),
    #[error("tide has {tide_steps} steps but price series has {prices} values")]
    LengthMismatch { tide_steps: usize, prices: usize },
    #[error("series step {series} s does not match the configured {config} s")]
    StepMismatch { series: f64, config: f64 },
}

/// Outside sea level at both endpoints of every step: `levels_m.len() == steps + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TideSeries {
    pub t0: Timestamp,
    pub dt_s: f64,
    pub levels_m: Vec<f64>,
}

impl TideSeries {
    pub fn new(t0: Timestamp, dt_s: f64, levels_m: Vec<f64>) -> Result<Self, SeriesError> {
        if !(dt_s.is_finite() && dt_s > 0.0) {
            return Err(SeriesError::BadStep(dt_s));
        }
        if levels_m.len() < 2 {
            return Err(SeriesError::TooShort {
                min: 2,
                got: levels_m.len(),
            });
        }
        if let Some(i) = levels_m.iter().position(|v| !v.is_finite()) {
            return Err(SeriesError::NonFinite(i));
        }
        Ok(Self { t0, dt_s, levels_m })
    }

    /// Number of time steps (one fewer than the number of levels).
    pub fn steps(&self) -> usize {
        self.levels_m.len() - 1
    }

    pub fn level(&self, index: usize) -> f64 {
        self.levels_m[index]
    }

    pub fn timestamp(&self, index: usize) -> Timestamp {
        self.t0.offset(index as f64 * self.dt_s)
    }

    pub fn min_level(&self) -> f64 {
        self.levels_m.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_level(&self) -> f64 {
        self.levels_m
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Level at fractional position `step + frac` by linear interpolation.
    pub fn interpolate(&self, step: usize, frac: f64) -> f64 {
        let a = self.levels_m[step];
        if frac == 0.0 {
            return a;
        }
        let b = self.levels_m[step + 1];
        a + (b - a) * frac
    }

    /// Same series with every level shifted by `offset_m`.
    pub fn shifted(&self, offset_m: f64) -> TideSeries {
        TideSeries {
            levels_m: self.levels_m.iter().map(|z| z + offset_m).collect(),
            ..self.clone()
        }
    }

    pub fn check_step(&self, dt_s: f64) -> Result<(), SeriesError> {
        if (self.dt_s - dt_s).abs() > 1e-9 * dt_s.abs().max(1.0) {
            return Err(SeriesError::StepMismatch {
                series: self.dt_s,
                config: dt_s,
            });
        }
        Ok(())
    }
}

/// Day-ahead price per step, currency/MWh. Negative prices are allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    pub t0: Timestamp,
    pub dt_s: f64,
    pub prices: Vec<f64>,
}

impl PriceSeries {
    pub fn new(t0: Timestamp, dt_s: f64, prices: Vec<f64>) -> Result<Self, SeriesError> {
        if !(dt_s.is_finite() && dt_s > 0.0) {
            return Err(SeriesError::BadStep(dt_s));
        }
        if prices.is_empty() {
            return Err(SeriesError::TooShort { min: 1, got: 0 });
        }
        if let Some(i) = prices.iter().position(|v| !v.is_finite()) {
            return Err(SeriesError::NonFinite(i));
        }
        Ok(Self { t0, dt_s, prices })
    }

    /// Constant price aligned with `tide`.
    pub fn flat(tide: &TideSeries, price: f64) -> Self {
        Self {
            t0: tide.t0,
            dt_s: tide.dt_s,
            prices: vec![price; tide.steps()],
        }
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn price(&self, step: usize) -> f64 {
        self.prices[step]
    }

    pub fn scaled(&self, factor: f64) -> PriceSeries {
        PriceSeries {
            prices: self.prices.iter().map(|p| p * factor).collect(),
            ..self.clone()
        }
    }

    /// Checks that this series covers exactly the steps of `tide`.
    pub fn check_pairing(&self, tide: &TideSeries) -> Result<(), SeriesError> {
        if self.prices.len() != tide.steps() {
            return Err(SeriesError::LengthMismatch {
                tide_steps: tide.steps(),
                prices: self.prices.len(),
            });
        }
        if (self.dt_s - tide.dt_s).abs() > 1e-9 * tide.dt_s {
            return Err(SeriesError::StepMismatch {
                series: self.dt_s,
                config: tide.dt_s,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestamp_parse_and_offset() {
        let t: Timestamp = "2021-10-01T00:00:00".parse().unwrap();
        assert_eq!(t.offset(1800.0).to_string(), "2021-10-01T00:30:00");
        let t2: Timestamp = "2021-10-01 23:30:00".parse().unwrap();
        assert_eq!(t.seconds_until(t2), Some(84_600));
        assert_eq!(
            "900".parse::<Timestamp>().unwrap().offset(1800.0),
            Timestamp::Seconds(2700)
        );
        assert!("yesterday".parse::<Timestamp>().is_err());
    }

    #[test]
    fn tide_needs_two_levels() {
        assert!(matches!(
            TideSeries::new(Timestamp::default(), 1800.0, vec![1.0]),
            Err(SeriesError::TooShort { .. })
        ));
        assert!(matches!(
            TideSeries::new(Timestamp::default(), 1800.0, vec![1.0, f64::NAN]),
            Err(SeriesError::NonFinite(1))
        ));
    }

    #[test]
    fn pairing_requires_one_fewer_price() {
        let tide = TideSeries::new(Timestamp::default(), 1800.0, vec![0.0; 5]).unwrap();
        assert!(PriceSeries::flat(&tide, 10.0).check_pairing(&tide).is_ok());
        let bad = PriceSeries::new(Timestamp::default(), 1800.0, vec![1.0; 5]).unwrap();
        assert!(bad.check_pairing(&tide).is_err());
    }

    #[test]
    fn interpolation_hits_endpoints() {
        let tide = TideSeries::new(Timestamp::default(), 1800.0, vec![1.0, 3.0]).unwrap();
        assert_eq!(tide.interpolate(0, 0.0), 1.0);
        assert_eq!(tide.interpolate(0, 0.5), 2.0);
        assert_eq!(tide.interpolate(0, 1.0), 3.0);
    }
}

//! Physical and operational parameters of a lagoon.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::physics::fit_linear_coefficient;

/// Standard gravitational acceleration, m/s².
pub const STANDARD_GRAVITY: f64 = 9.81;

/// Head interval over which the default linear fill coefficients are fitted.
pub const DEFAULT_FIT_RANGE_M: (f64, f64) = (0.5, 7.0);
/// Sample count used when fitting the default linear fill coefficients.
pub const DEFAULT_FIT_SAMPLES: usize = 1000;

/// Closed interval of admissible head differences (inside minus outside), m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadBounds {
    pub lo: f64,
    pub hi: f64,
}

impl HeadBounds {
    pub fn contains(&self, head_m: f64) -> bool {
        head_m >= self.lo && head_m <= self.hi
    }

    pub fn span(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn clamp(&self, head_m: f64) -> f64 {
        head_m.clamp(self.lo, self.hi)
    }
}

/// All parameters of an ebb-generation lagoon with a fleet of identical turbines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagoonConfig {
    /// Plan area of the impounded basin, m².
    pub surface_area_m2: f64,
    pub n_turbines: u32,
    /// Rated power of one turbine, MW.
    pub turbine_capacity_mw: f64,
    /// Cross-sectional flow area of one turbine when passing water in fill mode, m².
    pub turbine_flow_area_m2: f64,
    pub n_sluices: u32,
    /// Flow area of one sluice gate, m².
    pub sluice_area_m2: f64,
    pub discharge_coeff_sluice: f64,
    pub discharge_coeff_turbine: f64,
    /// Linear fill-flow coefficient for sluices: Q = k·A·H.
    pub k_sluice: f64,
    /// Linear fill-flow coefficient for idle turbines: Q = k·A·H.
    pub k_turbine: f64,
    /// Minimum head at which turbines start generating, m.
    pub h_min_m: f64,
    pub h_bounds_m: HeadBounds,
    /// Time step, s.
    pub dt_s: f64,
    pub gravity_ms2: f64,
}

impl LagoonConfig {
    /// The Swansea Bay case: 11.5 km² basin, 16 × 20 MW turbines, 800 m² of sluices
    /// (8 gates of 100 m²), 1 m start head, heads kept within [-2, 8] m, 30-min steps.
    pub fn swansea() -> Self {
        ConfigFile::default().resolve()
    }

    /// Rated power of the whole fleet, MW.
    pub fn fleet_capacity_mw(&self) -> f64 {
        f64::from(self.n_turbines) * self.turbine_capacity_mw
    }

    pub fn dt_hours(&self) -> f64 {
        self.dt_s / 3600.0
    }

    /// Total sluice flow area, m².
    pub fn total_sluice_area_m2(&self) -> f64 {
        f64::from(self.n_sluices) * self.sluice_area_m2
    }

    /// Flow per metre of head with every sluice and turbine open under the
    /// linear fill law, m³/s per m.
    pub fn fill_conductance(&self) -> f64 {
        f64::from(self.n_sluices) * self.k_sluice * self.sluice_area_m2
            + f64::from(self.n_turbines) * self.k_turbine * self.turbine_flow_area_m2
    }

    /// Reads a TOML configuration. Missing fields take the Swansea defaults and
    /// missing `k_sluice` / `k_turbine` are fitted from the discharge coefficients.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        file.resolve().validate()
    }

    pub fn from_toml_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    /// Returns the config unchanged if every invariant holds, otherwise all
    /// violations at once.
    pub fn validate(self) -> Result<Self, ConfigError> {
        let violations = self.violations();
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(ConfigError::Invalid(violations))
        }
    }

    pub fn violations(&self) -> Vec<ConfigViolation> {
        use ConfigViolation::*;
        let mut out = Vec::new();
        let areas = [
            ("surface_area_m2", self.surface_area_m2),
            ("turbine_flow_area_m2", self.turbine_flow_area_m2),
            ("sluice_area_m2", self.sluice_area_m2),
        ];
        for (field, value) in areas {
            if !(value.is_finite() && value > 0.0) {
                out.push(NonPositiveArea { field });
            }
        }
        if self.n_turbines == 0 {
            out.push(NoTurbines);
        }
        if self.n_sluices == 0 {
            out.push(NoSluices);
        }
        if !(self.turbine_capacity_mw.is_finite() && self.turbine_capacity_mw > 0.0) {
            out.push(NonPositive {
                field: "turbine_capacity_mw",
            });
        }
        for (field, value) in [("k_sluice", self.k_sluice), ("k_turbine", self.k_turbine)] {
            if !(value.is_finite() && value > 0.0) {
                out.push(NonPositive { field });
            }
        }
        let b = self.h_bounds_m;
        if !(b.lo.is_finite() && b.hi.is_finite() && b.lo < 0.0 && b.hi > 0.0) {
            out.push(HeadBoundsStraddleZero);
        }
        if b.hi > crate::physics::HILL_CHART_MAX_HEAD_M {
            out.push(HeadBoundsBeyondChart);
        }
        if !(self.h_min_m > 0.0 && self.h_min_m < b.hi) {
            out.push(HeadMinOutOfRange);
        } else if self.h_min_m >= crate::physics::FLOW_KNEE_HEAD_M {
            out.push(HeadMinAboveKnee);
        }
        if !(self.dt_s.is_finite() && self.dt_s > 0.0) {
            out.push(NonPositive { field: "dt_s" });
        }
        if !(self.gravity_ms2.is_finite() && self.gravity_ms2 > 0.0) {
            out.push(NonPositive {
                field: "gravity_ms2",
            });
        }
        for (field, value) in [
            ("discharge_coeff_sluice", self.discharge_coeff_sluice),
            ("discharge_coeff_turbine", self.discharge_coeff_turbine),
        ] {
            if !(value > 0.0 && value <= 1.5) {
                out.push(DischargeCoeff { field });
            }
        }
        out
    }
}

/// One violated configuration invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigViolation {
    NonPositiveArea { field: &'static str },
    NonPositive { field: &'static str },
    NoTurbines,
    NoSluices,
    HeadBoundsStraddleZero,
    HeadMinOutOfRange,
    HeadMinAboveKnee,
    HeadBoundsBeyondChart,
    DischargeCoeff { field: &'static str },
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NonPositiveArea { field } => write!(f, "non-positive area: {field}"),
            Self::NonPositive { field } => write!(f, "{field} must be positive and finite"),
            Self::NoTurbines => f.write_str("at least one turbine is required"),
            Self::NoSluices => f.write_str("at least one sluice gate is required"),
            Self::HeadBoundsStraddleZero => f.write_str("head bounds must satisfy lo < 0 < hi"),
            Self::HeadMinOutOfRange => {
                f.write_str("h_min must be positive and below upper head bound")
            }
            Self::HeadMinAboveKnee => {
                f.write_str("h_min must lie below the 3.9 m hill chart breakpoint")
            }
            Self::HeadBoundsBeyondChart => {
                f.write_str("upper head bound must not exceed the 8 m hill chart limit")
            }
            Self::DischargeCoeff { field } => write!(f, "{field} must lie in (0, 1.5]"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid configuration: {}", join_violations(.0))]
    Invalid(Vec<ConfigViolation>),
    #[error("cannot parse configuration: {0}")]
    Parse(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

fn join_violations(v: &[ConfigViolation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// On-disk form of [`LagoonConfig`]; every field is optional.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    surface_area_m2: f64,
    n_turbines: u32,
    turbine_capacity_mw: f64,
    turbine_flow_area_m2: f64,
    n_sluices: u32,
    sluice_area_m2: f64,
    discharge_coeff_sluice: f64,
    discharge_coeff_turbine: f64,
    k_sluice: Option<f64>,
    k_turbine: Option<f64>,
    h_min_m: f64,
    h_bounds_m: HeadBounds,
    dt_s: f64,
    gravity_ms2: f64,
}

impl Default for ConfigFile {
    fn default() -> Self {
        Self {
            surface_area_m2: 11.5e6,
            n_turbines: 16,
            turbine_capacity_mw: 20.0,
            turbine_flow_area_m2: 42.0,
            n_sluices: 8,
            sluice_area_m2: 100.0,
            discharge_coeff_sluice: 1.0,
            discharge_coeff_turbine: 1.0,
            k_sluice: None,
            k_turbine: None,
            h_min_m: 1.0,
            h_bounds_m: HeadBounds { lo: -2.0, hi: 8.0 },
            dt_s: 1800.0,
            gravity_ms2: STANDARD_GRAVITY,
        }
    }
}

impl ConfigFile {
    fn resolve(self) -> LagoonConfig {
        let fitted = |coeff: f64| {
            let (lo, hi) = DEFAULT_FIT_RANGE_M;
            // Invalid coefficients fall through to NaN and are reported by validate().
            fit_linear_coefficient(lo, hi, coeff, self.gravity_ms2, DEFAULT_FIT_SAMPLES)
                .unwrap_or(f64::NAN)
        };
        LagoonConfig {
            surface_area_m2: self.surface_area_m2,
            n_turbines: self.n_turbines,
            turbine_capacity_mw: self.turbine_capacity_mw,
            turbine_flow_area_m2: self.turbine_flow_area_m2,
            n_sluices: self.n_sluices,
            sluice_area_m2: self.sluice_area_m2,
            discharge_coeff_sluice: self.discharge_coeff_sluice,
            discharge_coeff_turbine: self.discharge_coeff_turbine,
            k_sluice: self
                .k_sluice
                .unwrap_or_else(|| fitted(self.discharge_coeff_sluice)),
            k_turbine: self
                .k_turbine
                .unwrap_or_else(|| fitted(self.discharge_coeff_turbine)),
            h_min_m: self.h_min_m,
            h_bounds_m: self.h_bounds_m,
            dt_s: self.dt_s,
            gravity_ms2: self.gravity_ms2,
        }
    }
}

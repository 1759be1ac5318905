//! Operating modes, schedules and objectives.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::config::LagoonConfig;
use crate::series::{PriceSeries, TideSeries};

/// Per-step operating decision. Filling and generating are exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Sluices and turbines closed.
    Hold,
    /// Sluices and idle turbines open, passing water in either direction.
    Fill,
    /// `n_active` turbines generating, sluices closed.
    Generate(u32),
}

impl Mode {
    pub fn active_turbines(self) -> u32 {
        match self {
            Mode::Generate(n) => n,
            _ => 0,
        }
    }

    pub fn is_fill(self) -> bool {
        matches!(self, Mode::Fill)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Hold => f.write_str("hold"),
            Mode::Fill => f.write_str("fill"),
            Mode::Generate(n) => write!(f, "gen:{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unrecognised mode {0:?} (expected hold, fill or gen:<n>)")]
pub struct ModeParseError(pub String);

impl FromStr for Mode {
    type Err = ModeParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "hold" => Ok(Mode::Hold),
            "fill" => Ok(Mode::Fill),
            other => other
                .strip_prefix("gen:")
                .and_then(|n| n.parse::<u32>().ok())
                .filter(|&n| n > 0)
                .map(Mode::Generate)
                .ok_or_else(|| ModeParseError(s.to_string())),
        }
    }
}

impl Serialize for Mode {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Mode {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// Maximise total energy, MWh.
    MaxEnergy,
    /// Maximise market revenue, Σ price·energy.
    MaxRevenue,
}

impl Objective {
    /// Weight of one MWh produced in `step`.
    pub fn weight(self, prices: &PriceSeries, step: usize) -> f64 {
        match self {
            Objective::MaxEnergy => 1.0,
            Objective::MaxRevenue => prices.price(step),
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::MaxEnergy => "max-energy",
            Objective::MaxRevenue => "max-revenue",
        })
    }
}

impl FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "max-energy" => Ok(Objective::MaxEnergy),
            "max-revenue" => Ok(Objective::MaxRevenue),
            other => Err(format!(
                "unknown objective {other:?} (expected max-energy or max-revenue)"
            )),
        }
    }
}

/// Decisions and state trajectory over a horizon of `T` steps.
///
/// Flows are positive out of the basin. `z_in_m` has `T + 1` entries; every
/// other vector has `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub modes: Vec<Mode>,
    pub z_in_m: Vec<f64>,
    pub head_m: Vec<f64>,
    pub q_total_m3s: Vec<f64>,
    pub q_sluice_m3s: Vec<f64>,
    pub q_turbine_fill_m3s: Vec<f64>,
    pub q_turbine_gen_m3s: Vec<f64>,
    pub power_mw: Vec<f64>,
    pub energy_mwh: Vec<f64>,
    pub revenue: Vec<f64>,
}

impl Schedule {
    pub fn with_capacity(steps: usize) -> Self {
        Self {
            modes: Vec::with_capacity(steps),
            z_in_m: Vec::with_capacity(steps + 1),
            head_m: Vec::with_capacity(steps),
            q_total_m3s: Vec::with_capacity(steps),
            q_sluice_m3s: Vec::with_capacity(steps),
            q_turbine_fill_m3s: Vec::with_capacity(steps),
            q_turbine_gen_m3s: Vec::with_capacity(steps),
            power_mw: Vec::with_capacity(steps),
            energy_mwh: Vec::with_capacity(steps),
            revenue: Vec::with_capacity(steps),
        }
    }

    pub fn steps(&self) -> usize {
        self.modes.len()
    }

    pub fn total_energy_mwh(&self) -> f64 {
        self.energy_mwh.iter().sum()
    }

    pub fn total_revenue(&self) -> f64 {
        self.revenue.iter().sum()
    }

    /// Recomputes revenue from `prices`.
    pub fn reprice(&mut self, prices: &PriceSeries) -> Result<(), ObjectiveError> {
        self.check_len(prices)?;
        self.revenue = self
            .energy_mwh
            .iter()
            .zip(&prices.prices)
            .map(|(e, p)| p * e)
            .collect();
        Ok(())
    }

    fn check_len(&self, prices: &PriceSeries) -> Result<(), ObjectiveError> {
        if prices.len() != self.steps() || self.energy_mwh.len() != self.steps() {
            return Err(ObjectiveError::LengthMismatch {
                schedule: self.steps(),
                prices: prices.len(),
            });
        }
        Ok(())
    }

    /// Checks the mass balance, head definition, energy conversion and head
    /// bounds of the trajectory against `tide`. `tol` is absolute; `0.0` asks
    /// for exact identities.
    pub fn invariant_violations(
        &self,
        config: &LagoonConfig,
        tide: &TideSeries,
        tol: f64,
    ) -> Vec<InvariantViolation> {
        use InvariantViolation::*;
        let t_len = self.steps();
        let lengths_ok = tide.steps() == t_len
            && self.z_in_m.len() == t_len + 1
            && [
                &self.head_m,
                &self.q_total_m3s,
                &self.q_sluice_m3s,
                &self.q_turbine_fill_m3s,
                &self.q_turbine_gen_m3s,
                &self.power_mw,
                &self.energy_mwh,
                &self.revenue,
            ]
            .iter()
            .all(|v| v.len() == t_len);
        if !lengths_ok {
            return vec![Dimensions];
        }
        let mut out = Vec::new();
        let bounds = config.h_bounds_m;
        for t in 0..t_len {
            let next = crate::physics::step_level(
                self.z_in_m[t],
                self.q_total_m3s[t],
                config.surface_area_m2,
                config.dt_s,
            );
            if (self.z_in_m[t + 1] - next).abs() > tol {
                out.push(MassBalance {
                    step: t,
                    residual: self.z_in_m[t + 1] - next,
                });
            }
            let head = self.z_in_m[t] - tide.level(t);
            if (self.head_m[t] - head).abs() > tol {
                out.push(HeadDefinition {
                    step: t,
                    residual: self.head_m[t] - head,
                });
            }
            let energy = self.power_mw[t] * config.dt_hours();
            if (self.energy_mwh[t] - energy).abs() > tol {
                out.push(EnergyConversion {
                    step: t,
                    residual: self.energy_mwh[t] - energy,
                });
            }
            if !bounds.contains(self.head_m[t]) {
                out.push(HeadBounds {
                    step: t,
                    head_m: self.head_m[t],
                });
            }
            if self.modes[t].active_turbines() > config.n_turbines {
                out.push(TooManyTurbines { step: t });
            }
        }
        let final_head = self.z_in_m[t_len] - tide.level(t_len);
        if !bounds.contains(final_head) {
            out.push(HeadBounds {
                step: t_len,
                head_m: final_head,
            });
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InvariantViolation {
    Dimensions,
    MassBalance { step: usize, residual: f64 },
    HeadDefinition { step: usize, residual: f64 },
    EnergyConversion { step: usize, residual: f64 },
    HeadBounds { step: usize, head_m: f64 },
    TooManyTurbines { step: usize },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ObjectiveError {
    #[error("schedule has {schedule} steps but {prices} prices were supplied")]
    LengthMismatch { schedule: usize, prices: usize },
}

/// Σ energy (MaxEnergy) or Σ price·energy (MaxRevenue).
pub fn evaluate_objective(
    schedule: &Schedule,
    prices: &PriceSeries,
    objective: Objective,
) -> Result<f64, ObjectiveError> {
    schedule.check_len(prices)?;
    Ok(match objective {
        Objective::MaxEnergy => schedule.energy_mwh.iter().sum(),
        Objective::MaxRevenue => schedule
            .energy_mwh
            .iter()
            .zip(&prices.prices)
            .map(|(e, p)| p * e)
            .sum(),
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverStats {
    /// Transition evaluations performed.
    pub states_expanded: u64,
    pub wall_time: Duration,
    /// Level grid step, m.
    pub level_resolution_m: f64,
    pub grid_points: usize,
    /// Objective of the best action sequence evaluated on the level grid.
    pub grid_objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub schedule: Schedule,
    pub objective: Objective,
    /// The objective recomputed from `schedule`.
    pub objective_value: f64,
    pub stats: SolverStats,
}

//! Storage level of the basin and schedule totals.

use serde::{Deserialize, Serialize};

use crate::config::LagoonConfig;
use crate::physics::{HillChart, PhysicsError};
use crate::schedule::{evaluate_objective, Objective, ObjectiveError, Schedule};
use crate::series::{PriceSeries, TideSeries};

/// Largest energy the lagoon could deliver in each step if the basin were
/// held at its highest level of the horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StorageProfile {
    pub stored_energy_mwh: Vec<f64>,
    /// Full-basin head, clamped to the head bounds, m.
    pub head_m: Vec<f64>,
    /// Full-basin reference level: the highest sea level in the horizon, m.
    pub z_max_m: f64,
}

pub fn storage_profile(
    config: &LagoonConfig,
    tide: &TideSeries,
) -> Result<StorageProfile, PhysicsError> {
    let chart = HillChart::for_config(config)?;
    let z_max_m = tide.max_level();
    let bounds = config.h_bounds_m;
    let fleet = f64::from(config.n_turbines);
    let mut head_m = Vec::with_capacity(tide.steps());
    let mut stored_energy_mwh = Vec::with_capacity(tide.steps());
    for &z_out in &tide.levels_m[..tide.steps()] {
        let head = bounds.clamp(z_max_m - z_out);
        let power = if head >= chart.h_min_m() {
            chart.power(head)?
        } else {
            0.0
        };
        head_m.push(head);
        stored_energy_mwh.push(fleet * power * config.dt_hours());
    }
    Ok(StorageProfile {
        stored_energy_mwh,
        head_m,
        z_max_m,
    })
}

/// Headline numbers of a schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub energy_mwh: f64,
    pub revenue: f64,
    /// Energy over fleet capacity times horizon length.
    pub capacity_factor: f64,
}

pub fn summarize(
    schedule: &Schedule,
    prices: &PriceSeries,
    config: &LagoonConfig,
) -> Result<Totals, ObjectiveError> {
    let energy_mwh = evaluate_objective(schedule, prices, Objective::MaxEnergy)?;
    let revenue = evaluate_objective(schedule, prices, Objective::MaxRevenue)?;
    let horizon_h = schedule.steps() as f64 * config.dt_hours();
    let capacity_factor = energy_mwh / (config.fleet_capacity_mw() * horizon_h);
    Ok(Totals {
        energy_mwh,
        revenue,
        capacity_factor,
    })
}

//! Forward replay of a mode sequence with the nonlinear orifice law.
//!
//! Each step is split into equal sub-steps. The sea level is interpolated
//! linearly inside a step, flows are recomputed from the current head at
//! every sub-step, and turbine power uses the instantaneous head. Fill flow is
//! clamped so that one sub-step never moves the basin level by more than the
//! current head, which keeps the head from overshooting through zero.

use serde::Serialize;

use crate::config::LagoonConfig;
use crate::physics::{lagoon_flow, lagoon_power, step_level, FlowLaw, HillChart, PhysicsError};
use crate::schedule::{Mode, Schedule};
use crate::series::{PriceSeries, SeriesError, TideSeries};

pub const DEFAULT_SUBSTEP_S: f64 = 60.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("sub-step {substep_s} s does not divide the {dt_s} s time step")]
    Substep { substep_s: f64, dt_s: f64 },
    #[error("{modes} modes for a {steps}-step horizon")]
    Dimensions { modes: usize, steps: usize },
    #[error("head {head_m:.4} m left the bounds at step {step}, sub-step {substep}")]
    HeadOutOfBounds {
        step: usize,
        substep: usize,
        head_m: f64,
    },
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// Trajectory of a nonlinear replay.
///
/// `schedule` holds step-level quantities: heads and levels at step starts,
/// flows and power averaged over each step, and the energy actually
/// accumulated. Revenue is zero until [`SimulatedTrajectory::priced`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedTrajectory {
    pub schedule: Schedule,
    pub substep_s: f64,
    /// Head at the start of every sub-step, `steps × substeps_per_step` values.
    pub substep_heads_m: Vec<f64>,
}

impl SimulatedTrajectory {
    pub fn substeps_per_step(&self) -> usize {
        self.substep_heads_m.len() / self.schedule.steps().max(1)
    }

    pub fn priced(mut self, prices: &PriceSeries) -> Result<Self, SimError> {
        self.schedule
            .reprice(prices)
            .map_err(|_| SimError::Dimensions {
                modes: self.schedule.steps(),
                steps: prices.len(),
            })?;
        Ok(self)
    }
}

/// Replays `modes` against the nonlinear fill law and the exact hill chart.
pub fn simulate(
    config: &LagoonConfig,
    tide: &TideSeries,
    modes: &[Mode],
    substep_s: f64,
) -> Result<SimulatedTrajectory, SimError> {
    tide.check_step(config.dt_s)?;
    let steps = tide.steps();
    if modes.len() != steps {
        return Err(SimError::Dimensions {
            modes: modes.len(),
            steps,
        });
    }
    let ratio = config.dt_s / substep_s;
    let per_step = ratio.round();
    if !(substep_s > 0.0 && per_step >= 1.0 && (ratio - per_step).abs() < 1e-9) {
        return Err(SimError::Substep {
            substep_s,
            dt_s: config.dt_s,
        });
    }
    let per_step = per_step as usize;
    let chart = HillChart::for_config(config)?;
    let bounds = config.h_bounds_m;
    let area = config.surface_area_m2;

    let mut out = Schedule::with_capacity(steps);
    let mut heads = Vec::with_capacity(steps * per_step);
    let mut z = tide.level(0);
    out.z_in_m.push(z);
    for (t, &mode) in modes.iter().enumerate() {
        let mut volume = [0.0f64; 4]; // sluice, turbine fill, turbine gen, total
        let mut energy = 0.0;
        for s in 0..per_step {
            let head = z - tide.interpolate(t, s as f64 / per_step as f64);
            if !bounds.contains(head) {
                return Err(SimError::HeadOutOfBounds {
                    step: t,
                    substep: s,
                    head_m: head,
                });
            }
            heads.push(head);
            let mut flows = lagoon_flow(mode, head, config, &chart, FlowLaw::Nonlinear)?;
            if mode.is_fill() {
                let limit = head.abs() * area / substep_s;
                if flows.total.abs() > limit {
                    let scale = limit / flows.total.abs();
                    flows.sluice *= scale;
                    flows.turbine_fill *= scale;
                    flows.total = flows.sluice + flows.turbine_fill;
                }
            }
            energy += lagoon_power(mode, head, &chart)? * substep_s / 3600.0;
            for (acc, q) in volume.iter_mut().zip([
                flows.sluice,
                flows.turbine_fill,
                flows.turbine_gen,
                flows.total,
            ]) {
                *acc += q * substep_s;
            }
            z = step_level(z, flows.total, area, substep_s);
        }
        out.modes.push(mode);
        out.head_m.push(heads[t * per_step]);
        out.q_sluice_m3s.push(volume[0] / config.dt_s);
        out.q_turbine_fill_m3s.push(volume[1] / config.dt_s);
        out.q_turbine_gen_m3s.push(volume[2] / config.dt_s);
        out.q_total_m3s.push(volume[3] / config.dt_s);
        out.power_mw.push(energy / config.dt_hours());
        out.energy_mwh.push(energy);
        out.revenue.push(0.0);
        out.z_in_m.push(z);
    }
    let final_head = z - tide.level(steps);
    if !bounds.contains(final_head) {
        return Err(SimError::HeadOutOfBounds {
            step: steps,
            substep: 0,
            head_m: final_head,
        });
    }
    Ok(SimulatedTrajectory {
        schedule: out,
        substep_s,
        substep_heads_m: heads,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct DeviationStats {
    pub max: f64,
    pub rms: f64,
}

impl DeviationStats {
    fn of(values: &[f64]) -> Self {
        let max = values.iter().copied().fold(0.0, f64::max);
        let rms = if values.is_empty() {
            0.0
        } else {
            (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
        };
        Self { max, rms }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepDeviation {
    /// |Δ| of the basin level at the end of the step, m.
    pub level_m: f64,
    pub energy_mwh: f64,
    pub revenue: f64,
}

/// Differences between a linearised schedule and its nonlinear replay.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationReport {
    pub per_step: Vec<StepDeviation>,
    pub level_m: DeviationStats,
    pub energy_mwh: DeviationStats,
    pub revenue: DeviationStats,
    pub schedule_energy_mwh: f64,
    pub simulated_energy_mwh: f64,
    /// |Σ E_schedule − Σ E_sim|.
    pub total_energy_deviation_mwh: f64,
    /// Total energy deviation relative to the schedule's total (0 when both are 0).
    pub total_energy_deviation_rel: f64,
    pub total_revenue_deviation: f64,
}

pub fn compare(
    schedule: &Schedule,
    sim: &SimulatedTrajectory,
) -> Result<DeviationReport, SimError> {
    let other = &sim.schedule;
    if schedule.steps() != other.steps() || schedule.z_in_m.len() != other.z_in_m.len() {
        return Err(SimError::Dimensions {
            modes: other.steps(),
            steps: schedule.steps(),
        });
    }
    let per_step: Vec<StepDeviation> = (0..schedule.steps())
        .map(|t| StepDeviation {
            level_m: (schedule.z_in_m[t + 1] - other.z_in_m[t + 1]).abs(),
            energy_mwh: (schedule.energy_mwh[t] - other.energy_mwh[t]).abs(),
            revenue: (schedule.revenue[t] - other.revenue[t]).abs(),
        })
        .collect();
    let column = |f: fn(&StepDeviation) -> f64| per_step.iter().map(f).collect::<Vec<_>>();
    let schedule_energy = schedule.total_energy_mwh();
    let simulated_energy = other.total_energy_mwh();
    let total_dev = (schedule_energy - simulated_energy).abs();
    Ok(DeviationReport {
        level_m: DeviationStats::of(&column(|d| d.level_m)),
        energy_mwh: DeviationStats::of(&column(|d| d.energy_mwh)),
        revenue: DeviationStats::of(&column(|d| d.revenue)),
        per_step,
        schedule_energy_mwh: schedule_energy,
        simulated_energy_mwh: simulated_energy,
        total_energy_deviation_mwh: total_dev,
        total_energy_deviation_rel: if total_dev == 0.0 {
            0.0
        } else {
            total_dev / schedule_energy.abs()
        },
        total_revenue_deviation: (schedule.total_revenue() - other.total_revenue()).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::Timestamp;

    fn tide(levels: Vec<f64>) -> TideSeries {
        TideSeries::new(Timestamp::default(), 1800.0, levels).unwrap()
    }

    #[test]
    fn hold_keeps_level() {
        let cfg = LagoonConfig::swansea();
        let tide = tide(vec![0.0, 0.5, 1.0, 0.5]);
        let sim = simulate(&cfg, &tide, &[Mode::Hold; 3], 60.0).unwrap();
        assert!(sim.schedule.z_in_m.iter().all(|&z| z == 0.0));
        assert_eq!(sim.schedule.total_energy_mwh(), 0.0);
        assert_eq!(sim.substeps_per_step(), 30);
    }

    #[test]
    fn fill_equalizes_without_overshoot() {
        let cfg = LagoonConfig::swansea();
        // Basin starts 2 m below a constant sea.
        let mut levels = vec![0.0];
        levels.extend(vec![2.0; 4]);
        let t = tide(levels);
        let modes = [Mode::Hold, Mode::Fill, Mode::Fill, Mode::Fill];
        // Skip the first step, which only lifts the sea.
        let sim = simulate(&cfg, &t, &modes, 10.0).unwrap();
        let fill_heads = &sim.substep_heads_m[sim.substeps_per_step()..];
        assert_eq!(fill_heads[0], -2.0);
        for w in fill_heads.windows(2) {
            assert!(w[1].abs() <= w[0].abs(), "{w:?}");
            assert!(w[1] <= 0.0);
        }
        assert!(fill_heads.last().unwrap().abs() < 0.05);
    }

    #[test]
    fn generation_energy_is_bracketed() {
        let cfg = LagoonConfig::swansea();
        // The replay starts level with the sea; a holding step while the sea
        // drops 7 m sets up a 7 m head for the generating step.
        let t = tide(vec![4.0, -3.0, -3.0]);
        let sim = simulate(&cfg, &t, &[Mode::Hold, Mode::Generate(16)], 60.0).unwrap();
        assert_eq!(sim.schedule.head_m[1], 7.0);
        let e = sim.schedule.energy_mwh[1];
        let end_head = sim.schedule.z_in_m[2] + 3.0;
        let lower = 16.0 * crate::physics::turbine_power(end_head).unwrap() * 0.5;
        assert!(e <= 160.0 && e >= lower, "{lower} <= {e} <= 160");
    }

    #[test]
    fn rejects_bad_substep() {
        let cfg = LagoonConfig::swansea();
        let t = tide(vec![0.0, 0.0]);
        assert!(matches!(
            simulate(&cfg, &t, &[Mode::Hold], 7.0),
            Err(SimError::Substep { .. })
        ));
        assert!(matches!(
            simulate(&cfg, &t, &[Mode::Hold], 0.0),
            Err(SimError::Substep { .. })
        ));
        assert!(matches!(
            simulate(&cfg, &t, &[], 60.0),
            Err(SimError::Dimensions { .. })
        ));
    }

    #[test]
    fn head_leaving_bounds_aborts() {
        let cfg = LagoonConfig::swansea();
        let t = tide(vec![0.0, 3.0]);
        match simulate(&cfg, &t, &[Mode::Hold], 60.0) {
            Err(SimError::HeadOutOfBounds {
                step: 0, substep, ..
            }) => assert!(substep > 0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn identical_trajectories_have_zero_deviation() {
        let cfg = LagoonConfig::swansea();
        let t = tide(vec![0.0, 0.3, 0.6, 0.2]);
        let sim = simulate(&cfg, &t, &[Mode::Hold; 3], 60.0).unwrap();
        let report = compare(&sim.schedule, &sim).unwrap();
        assert_eq!(report.total_energy_deviation_mwh, 0.0);
        assert_eq!(report.level_m, DeviationStats::default());
        assert_eq!(report.energy_mwh, DeviationStats::default());
    }
}

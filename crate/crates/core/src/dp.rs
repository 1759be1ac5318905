//! Dynamic programming over a discretised basin level.
//!
//! Backward induction computes, for every stage and grid level, the best
//! achievable objective when the next level is rounded to the nearest grid
//! point. The reported schedule is then produced by a forward pass from the
//! exact (unrounded) initial level: each step takes the action that is best
//! against the grid value function, evaluated from the true current level, so
//! the output satisfies the mass balance exactly and never leaves the head
//! bounds.

use std::time::Instant;

use crate::config::{ConfigError, LagoonConfig};
use crate::physics::{lagoon_flow, lagoon_power, step_level, FlowComponents, FlowLaw, HillChart};
use crate::schedule::{evaluate_objective, Mode, Objective, Schedule, SolverResult, SolverStats};
use crate::series::{PriceSeries, SeriesError, TideSeries};

/// Upper limit on mode sequences examined by [`enumerate_exhaustive`].
pub const ENUMERATION_LIMIT: u64 = 10_000_000;

/// Order in which equally good actions are preferred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    /// Hold, Fill, then Generate(1), Generate(2), ...
    #[default]
    FewestTurbines,
    /// Generate(n), ..., Generate(1), then Fill, Hold.
    MostTurbines,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpParams {
    /// Level grid step, m.
    pub level_resolution_m: f64,
    /// Grid extent, m. Defaults to the lowest tide plus the lower head bound up to
    /// the highest tide plus the upper head bound; an override must cover that span.
    pub level_range_m: Option<(f64, f64)>,
    pub tie_break: TieBreak,
}

impl Default for DpParams {
    fn default() -> Self {
        Self {
            level_resolution_m: 0.01,
            level_range_m: None,
            tie_break: TieBreak::default(),
        }
    }
}

impl DpParams {
    pub fn with_resolution(level_resolution_m: f64) -> Self {
        Self {
            level_resolution_m,
            ..Self::default()
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DpError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("invalid solver parameters: {0}")]
    Params(String),
    #[error("no feasible action at step {step}: the tide drives the head out of bounds")]
    Infeasible { step: usize },
    #[error("{sequences} mode sequences exceed the enumeration limit of {ENUMERATION_LIMIT}")]
    TooLarge { sequences: f64 },
}

/// Every available action, most preferred first under the default tie-break.
pub fn action_set(config: &LagoonConfig) -> Vec<Mode> {
    ordered_actions(config, TieBreak::FewestTurbines)
}

pub fn ordered_actions(config: &LagoonConfig, tie_break: TieBreak) -> Vec<Mode> {
    let mut actions = vec![Mode::Hold, Mode::Fill];
    actions.extend((1..=config.n_turbines).map(Mode::Generate));
    if tie_break == TieBreak::MostTurbines {
        actions.reverse();
    }
    actions
}

/// Why an action cannot be taken from a given level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Infeasibility {
    StartHead { head_m: f64 },
    EndHead { head_m: f64 },
    BelowStartHead { head_m: f64 },
    TooManyTurbines,
}

/// Result of one feasible step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub head_m: f64,
    pub flows: FlowComponents,
    pub next_z_m: f64,
    pub power_mw: f64,
    pub energy_mwh: f64,
}

/// Explicit one-step lagoon dynamics under the linear fill law.
#[derive(Debug, Clone)]
pub struct Dynamics<'a> {
    config: &'a LagoonConfig,
    tide: &'a TideSeries,
    chart: HillChart,
}

impl<'a> Dynamics<'a> {
    pub fn new(config: &'a LagoonConfig, tide: &'a TideSeries) -> Result<Self, DpError> {
        let chart = HillChart::for_config(config).map_err(|e| DpError::Params(e.to_string()))?;
        Ok(Self {
            config,
            tide,
            chart,
        })
    }

    pub fn chart(&self) -> &HillChart {
        &self.chart
    }

    /// Applies `mode` for step `t` starting from basin level `z_in_m`.
    pub fn transition(
        &self,
        z_in_m: f64,
        t: usize,
        mode: Mode,
    ) -> Result<StepOutcome, Infeasibility> {
        let cfg = self.config;
        let bounds = cfg.h_bounds_m;
        let head_m = z_in_m - self.tide.level(t);
        if !bounds.contains(head_m) {
            return Err(Infeasibility::StartHead { head_m });
        }
        if let Mode::Generate(n) = mode {
            if n > cfg.n_turbines {
                return Err(Infeasibility::TooManyTurbines);
            }
            if head_m < cfg.h_min_m {
                return Err(Infeasibility::BelowStartHead { head_m });
            }
        }
        let flows = lagoon_flow(mode, head_m, cfg, &self.chart, FlowLaw::Linear)
            .map_err(|_| Infeasibility::StartHead { head_m })?;
        let next_z_m = step_level(z_in_m, flows.total, cfg.surface_area_m2, cfg.dt_s);
        let end_head = next_z_m - self.tide.level(t + 1);
        if !bounds.contains(end_head) {
            return Err(Infeasibility::EndHead { head_m: end_head });
        }
        let power_mw = lagoon_power(mode, head_m, &self.chart)
            .map_err(|_| Infeasibility::StartHead { head_m })?;
        Ok(StepOutcome {
            head_m,
            flows,
            next_z_m,
            power_mw,
            energy_mwh: power_mw * cfg.dt_hours(),
        })
    }
}

/// Applies `mode` for step `t` from level `z_in_m`.
pub fn transition(
    z_in_m: f64,
    t: usize,
    mode: Mode,
    config: &LagoonConfig,
    tide: &TideSeries,
) -> Result<StepOutcome, Infeasibility> {
    let chart = HillChart::for_config(config).map_err(|_| Infeasibility::TooManyTurbines)?;
    Dynamics {
        config,
        tide,
        chart,
    }
    .transition(z_in_m, t, mode)
}

/// Uniform level grid `lo + j·step`, `j = 0..len`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelGrid {
    lo: f64,
    step: f64,
    len: usize,
}

impl LevelGrid {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self, DpError> {
        if !(step.is_finite() && step > 0.0) {
            return Err(DpError::Params(format!(
                "level resolution must be positive, got {step}"
            )));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(DpError::Params(format!("empty level range [{lo}, {hi}]")));
        }
        // Round up so the top of the range is always represented.
        let len = ((hi - lo) / step - 1e-9).ceil() as usize + 1;
        Ok(Self { lo, step, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn level(&self, index: usize) -> f64 {
        self.lo + index as f64 * self.step
    }

    /// Nearest grid index, or `None` outside the grid.
    pub fn nearest(&self, z: f64) -> Option<usize> {
        let j = ((z - self.lo) / self.step).round();
        (j >= 0.0 && j < self.len as f64).then_some(j as usize)
    }
}

struct Problem<'a> {
    dynamics: Dynamics<'a>,
    grid: LevelGrid,
    weights: Vec<f64>,
    actions: Vec<Mode>,
    steps: usize,
}

fn prepare<'a>(
    config: &'a LagoonConfig,
    tide: &'a TideSeries,
    prices: &PriceSeries,
    objective: Objective,
    params: &DpParams,
) -> Result<Problem<'a>, DpError> {
    config.clone().validate()?;
    tide.check_step(config.dt_s)?;
    prices.check_pairing(tide)?;
    let bounds = config.h_bounds_m;
    let natural = (tide.min_level() + bounds.lo, tide.max_level() + bounds.hi);
    let (lo, hi) = match params.level_range_m {
        None => natural,
        Some((lo, hi)) if lo <= natural.0 && hi >= natural.1 => (lo, hi),
        Some((lo, hi)) => {
            return Err(DpError::Params(format!(
                "level range [{lo}, {hi}] does not cover [{}, {}]",
                natural.0, natural.1
            )))
        }
    };
    let grid = LevelGrid::new(lo, hi, params.level_resolution_m)?;
    let steps = tide.steps();
    let weights = (0..steps).map(|t| objective.weight(prices, t)).collect();
    Ok(Problem {
        dynamics: Dynamics::new(config, tide)?,
        grid,
        weights,
        actions: ordered_actions(config, params.tie_break),
        steps,
    })
}

/// Best schedule on the level grid by backward induction.
pub fn optimize(
    config: &LagoonConfig,
    tide: &TideSeries,
    prices: &PriceSeries,
    objective: Objective,
    params: &DpParams,
) -> Result<SolverResult, DpError> {
    let started = Instant::now();
    let problem = prepare(config, tide, prices, objective, params)?;
    let Problem {
        dynamics,
        grid,
        weights,
        actions,
        steps,
    } = &problem;
    let mut expanded = 0u64;

    let mut value = vec![vec![f64::NEG_INFINITY; grid.len()]; steps + 1];
    value[*steps].fill(0.0);
    for t in (0..*steps).rev() {
        let (head, tail) = value.split_at_mut(t + 1);
        let (current, next) = (&mut head[t], &tail[0]);
        for (j, slot) in current.iter_mut().enumerate() {
            let z = grid.level(j);
            let mut best = f64::NEG_INFINITY;
            for &mode in actions {
                expanded += 1;
                let Ok(step) = dynamics.transition(z, t, mode) else {
                    continue;
                };
                let Some(nj) = grid.nearest(step.next_z_m) else {
                    continue;
                };
                let future = next[nj];
                if future == f64::NEG_INFINITY {
                    continue;
                }
                let total = weights[t] * step.energy_mwh + future;
                if total > best {
                    best = total;
                }
            }
            *slot = best;
        }
    }

    let z0 = tide.level(0);
    let start = grid.nearest(z0).ok_or(DpError::Infeasible { step: 0 })?;
    let grid_objective = value[0][start];

    // Forward pass from the exact initial level.
    let mut schedule = Schedule::with_capacity(*steps);
    schedule.z_in_m.push(z0);
    let mut z = z0;
    for t in 0..*steps {
        let mut chosen: Option<(Mode, StepOutcome, f64)> = None;
        let mut fallback: Option<(Mode, StepOutcome, f64)> = None;
        for &mode in actions {
            expanded += 1;
            let Ok(step) = dynamics.transition(z, t, mode) else {
                continue;
            };
            let reward = weights[t] * step.energy_mwh;
            let future = grid
                .nearest(step.next_z_m)
                .map_or(f64::NEG_INFINITY, |nj| value[t + 1][nj]);
            if future > f64::NEG_INFINITY {
                let total = reward + future;
                if chosen.as_ref().is_none_or(|c| total > c.2) {
                    chosen = Some((mode, step, total));
                }
            }
            if fallback.as_ref().is_none_or(|c| reward > c.2) {
                fallback = Some((mode, step, reward));
            }
        }
        let (mode, step, _) = chosen.or(fallback).ok_or(DpError::Infeasible { step: t })?;
        push_step(&mut schedule, mode, &step, prices.price(t));
        z = step.next_z_m;
    }

    finish(
        schedule,
        prices,
        objective,
        started,
        expanded,
        grid,
        grid_objective,
        params,
    )
}

fn push_step(schedule: &mut Schedule, mode: Mode, step: &StepOutcome, price: f64) {
    schedule.modes.push(mode);
    schedule.head_m.push(step.head_m);
    schedule.q_total_m3s.push(step.flows.total);
    schedule.q_sluice_m3s.push(step.flows.sluice);
    schedule.q_turbine_fill_m3s.push(step.flows.turbine_fill);
    schedule.q_turbine_gen_m3s.push(step.flows.turbine_gen);
    schedule.power_mw.push(step.power_mw);
    schedule.energy_mwh.push(step.energy_mwh);
    schedule.revenue.push(price * step.energy_mwh);
    schedule.z_in_m.push(step.next_z_m);
}

#[allow(clippy::too_many_arguments)]
fn finish(
    schedule: Schedule,
    prices: &PriceSeries,
    objective: Objective,
    started: Instant,
    expanded: u64,
    grid: &LevelGrid,
    grid_objective: f64,
    params: &DpParams,
) -> Result<SolverResult, DpError> {
    let objective_value = evaluate_objective(&schedule, prices, objective)
        .map_err(|e| DpError::Params(e.to_string()))?;
    Ok(SolverResult {
        schedule,
        objective,
        objective_value,
        stats: SolverStats {
            states_expanded: expanded,
            wall_time: started.elapsed(),
            level_resolution_m: params.level_resolution_m,
            grid_points: grid.len(),
            grid_objective,
        },
    })
}

/// Replays `modes` with exact levels under the linear fill law.
///
/// Fails at the first step whose action is infeasible from the reached level.
pub fn replay(
    config: &LagoonConfig,
    tide: &TideSeries,
    prices: &PriceSeries,
    modes: &[Mode],
) -> Result<Schedule, DpError> {
    tide.check_step(config.dt_s)?;
    prices.check_pairing(tide)?;
    if modes.len() != tide.steps() {
        return Err(DpError::Params(format!(
            "{} modes for a {}-step horizon",
            modes.len(),
            tide.steps()
        )));
    }
    let dynamics = Dynamics::new(config, tide)?;
    let mut schedule = Schedule::with_capacity(modes.len());
    let mut z = tide.level(0);
    schedule.z_in_m.push(z);
    for (t, &mode) in modes.iter().enumerate() {
        let step = dynamics
            .transition(z, t, mode)
            .map_err(|_| DpError::Infeasible { step: t })?;
        push_step(&mut schedule, mode, &step, prices.price(t));
        z = step.next_z_m;
    }
    Ok(schedule)
}

/// Exhaustive search over every mode sequence with the same grid rounding as
/// [`optimize`]. Only practical for tiny instances; used as a test oracle.
pub fn enumerate_exhaustive(
    config: &LagoonConfig,
    tide: &TideSeries,
    prices: &PriceSeries,
    objective: Objective,
    params: &DpParams,
) -> Result<SolverResult, DpError> {
    let started = Instant::now();
    let problem = prepare(config, tide, prices, objective, params)?;
    let sequences = (problem.actions.len() as f64).powi(problem.steps as i32);
    if sequences > ENUMERATION_LIMIT as f64 {
        return Err(DpError::TooLarge { sequences });
    }
    let start = problem
        .grid
        .nearest(tide.level(0))
        .ok_or(DpError::Infeasible { step: 0 })?;

    let mut search = Search {
        problem: &problem,
        path: Vec::with_capacity(problem.steps),
        rewards: Vec::with_capacity(problem.steps),
        best: None,
        expanded: 0,
    };
    search.descend(start, 0);
    let Search { best, expanded, .. } = search;
    let (grid_objective, plan) = best.ok_or(DpError::Infeasible { step: 0 })?;

    // Replay the winning plan with exact levels. Where rounding made a planned
    // action infeasible, substitute the most preferred feasible one.
    let dynamics = &problem.dynamics;
    let mut schedule = Schedule::with_capacity(problem.steps);
    let mut z = tide.level(0);
    schedule.z_in_m.push(z);
    for (t, &planned) in plan.iter().enumerate() {
        let (mode, step) = std::iter::once(planned)
            .chain(problem.actions.iter().copied())
            .find_map(|m| dynamics.transition(z, t, m).ok().map(|s| (m, s)))
            .ok_or(DpError::Infeasible { step: t })?;
        push_step(&mut schedule, mode, &step, prices.price(t));
        z = step.next_z_m;
    }
    finish(
        schedule,
        prices,
        objective,
        started,
        expanded,
        &problem.grid,
        grid_objective,
        params,
    )
}

struct Search<'p, 'a> {
    problem: &'p Problem<'a>,
    path: Vec<Mode>,
    rewards: Vec<f64>,
    best: Option<(f64, Vec<Mode>)>,
    expanded: u64,
}

impl Search<'_, '_> {
    fn descend(&mut self, j: usize, t: usize) {
        let problem = self.problem;
        if t == problem.steps {
            // Sum from the last step backwards, the order backward induction uses.
            let total = self.rewards.iter().rev().fold(0.0, |acc, r| r + acc);
            if self.best.as_ref().is_none_or(|(b, _)| total > *b) {
                self.best = Some((total, self.path.clone()));
            }
            return;
        }
        let z = problem.grid.level(j);
        for &mode in &problem.actions {
            self.expanded += 1;
            let Ok(step) = problem.dynamics.transition(z, t, mode) else {
                continue;
            };
            let Some(nj) = problem.grid.nearest(step.next_z_m) else {
                continue;
            };
            self.path.push(mode);
            self.rewards.push(problem.weights[t] * step.energy_mwh);
            self.descend(nj, t + 1);
            self.path.pop();
            self.rewards.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::Timestamp;

    fn tide(levels: Vec<f64>) -> TideSeries {
        TideSeries::new(Timestamp::default(), 1800.0, levels).unwrap()
    }

    fn small_config(n_turbines: u32) -> LagoonConfig {
        LagoonConfig {
            n_turbines,
            ..LagoonConfig::swansea()
        }
    }

    #[test]
    fn action_sets() {
        assert_eq!(action_set(&LagoonConfig::swansea()).len(), 18);
        let one = action_set(&small_config(1));
        assert_eq!(one, vec![Mode::Hold, Mode::Fill, Mode::Generate(1)]);
        let reversed = ordered_actions(&small_config(2), TieBreak::MostTurbines);
        assert_eq!(
            reversed,
            vec![Mode::Generate(2), Mode::Generate(1), Mode::Fill, Mode::Hold]
        );
    }

    #[test]
    fn hold_keeps_level() {
        let cfg = LagoonConfig::swansea();
        let tide = tide(vec![0.0, 1.0]);
        let s = transition(0.5, 0, Mode::Hold, &cfg, &tide).unwrap();
        assert_eq!(s.next_z_m, 0.5);
        assert_eq!(s.energy_mwh, 0.0);
    }

    #[test]
    fn full_fleet_at_rated_head() {
        let cfg = LagoonConfig::swansea();
        let tide = tide(vec![-3.0, -3.5]);
        let s = transition(4.0, 0, Mode::Generate(16), &cfg, &tide).unwrap();
        assert_eq!(s.head_m, 7.0);
        assert_eq!(s.energy_mwh, 160.0);
    }

    #[test]
    fn generating_below_start_head_is_infeasible() {
        let cfg = LagoonConfig::swansea();
        let tide = tide(vec![0.0, 0.0]);
        assert!(matches!(
            transition(0.5, 0, Mode::Generate(5), &cfg, &tide),
            Err(Infeasibility::BelowStartHead { .. })
        ));
    }

    #[test]
    fn head_bounds_are_enforced_at_both_ends() {
        let cfg = LagoonConfig::swansea();
        let t = tide(vec![0.0, 3.0]);
        assert!(matches!(
            transition(8.5, 0, Mode::Hold, &cfg, &t),
            Err(Infeasibility::StartHead { .. })
        ));
        assert!(matches!(
            transition(0.0, 0, Mode::Hold, &cfg, &t),
            Err(Infeasibility::EndHead { .. })
        ));
    }

    #[test]
    fn grid_rounding() {
        let g = LevelGrid::new(-1.0, 1.0, 0.25).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g.nearest(0.1), Some(4));
        assert_eq!(g.nearest(0.13), Some(5));
        assert_eq!(g.nearest(1.2), None);
        assert_eq!(g.nearest(-1.1), Some(0));
        assert!(LevelGrid::new(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn flat_tide_yields_nothing() {
        let cfg = LagoonConfig::swansea();
        let tide = tide(vec![1.0; 13]);
        let prices = PriceSeries::flat(&tide, 50.0);
        let r = optimize(
            &cfg,
            &tide,
            &prices,
            Objective::MaxEnergy,
            &DpParams::default(),
        )
        .unwrap();
        assert_eq!(r.objective_value, 0.0);
        assert!(r.schedule.modes.iter().all(|&m| m == Mode::Hold));
    }

    #[test]
    fn single_step_enumeration() {
        let cfg = small_config(2);
        let tide = tide(vec![0.0, -0.5]);
        let prices = PriceSeries::flat(&tide, 1.0);
        let params = DpParams::with_resolution(0.05);
        let r = enumerate_exhaustive(&cfg, &tide, &prices, Objective::MaxEnergy, &params).unwrap();
        assert_eq!(r.objective_value, 0.0);
        assert_eq!(r.schedule.modes, vec![Mode::Hold]);
    }

    #[test]
    fn zero_prices_give_all_hold() {
        let cfg = small_config(2);
        let levels: Vec<f64> = (0..7).map(|k| 3.0 * (k as f64 * 0.9).cos()).collect();
        let tide = tide(levels);
        let prices = PriceSeries::flat(&tide, 0.0);
        let params = DpParams::with_resolution(0.05);
        let r = enumerate_exhaustive(&cfg, &tide, &prices, Objective::MaxRevenue, &params).unwrap();
        assert_eq!(r.objective_value, 0.0);
        assert!(r.schedule.modes.iter().all(|&m| m == Mode::Hold));
    }

    #[test]
    fn enumeration_guard() {
        let cfg = LagoonConfig::swansea();
        let tide = tide(vec![0.0; 9]);
        let prices = PriceSeries::flat(&tide, 1.0);
        assert!(matches!(
            enumerate_exhaustive(
                &cfg,
                &tide,
                &prices,
                Objective::MaxEnergy,
                &DpParams::default()
            ),
            Err(DpError::TooLarge { .. })
        ));
    }

    #[test]
    fn range_override_must_cover_heads() {
        let cfg = LagoonConfig::swansea();
        let tide = tide(vec![0.0, 1.0]);
        let prices = PriceSeries::flat(&tide, 1.0);
        let params = DpParams {
            level_range_m: Some((-1.0, 1.0)),
            ..DpParams::default()
        };
        assert!(matches!(
            optimize(&cfg, &tide, &prices, Objective::MaxEnergy, &params),
            Err(DpError::Params(_))
        ));
    }

    #[test]
    fn tide_beyond_bounds_is_reported() {
        let cfg = LagoonConfig::swansea();
        // A 20 m jump in one step cannot be followed by any action.
        let tide = tide(vec![0.0, 0.0, 20.0]);
        let prices = PriceSeries::flat(&tide, 1.0);
        assert!(matches!(
            optimize(
                &cfg,
                &tide,
                &prices,
                Objective::MaxEnergy,
                &DpParams::default()
            ),
            Err(DpError::Infeasible { step: 1 })
        ));
    }

    #[test]
    fn replay_reproduces_optimized_schedule() {
        let cfg = LagoonConfig::swansea();
        let levels: Vec<f64> = (0..25)
            .map(|k| 4.0 * (2.0 * std::f64::consts::PI * k as f64 * 1800.0 / 44_700.0).sin())
            .collect();
        let tide = tide(levels);
        let prices = PriceSeries::flat(&tide, 40.0);
        let r = optimize(
            &cfg,
            &tide,
            &prices,
            Objective::MaxEnergy,
            &DpParams::with_resolution(0.02),
        )
        .unwrap();
        let again = replay(&cfg, &tide, &prices, &r.schedule.modes).unwrap();
        assert_eq!(again, r.schedule);
        assert!(r.schedule.invariant_violations(&cfg, &tide, 0.0).is_empty());
    }
}

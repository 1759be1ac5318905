use serde::Serialize;

use crate::schedule::Schedule;

use super::{MilpModel, Symbol, VarKey, VarKind};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CheckError {
    #[error("schedule has {schedule} steps but the model has {model}")]
    Dimensions { schedule: usize, model: usize },
    #[error("schedule uses {requested} turbines but the model has {available}")]
    Turbines { requested: u32, available: usize },
}

/// One row or bound not satisfied by an assignment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// Row name, or `bound:<variable>` for a variable bound.
    pub row: String,
    pub step: Option<usize>,
    /// Amount by which the row is violated.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn rows_at(&self, step: usize) -> impl Iterator<Item = &str> {
        self.violations
            .iter()
            .filter(move |v| v.step == Some(step))
            .map(|v| v.row.as_str())
    }
}

/// Maps a schedule onto a full variable assignment of `model`.
///
/// Fill mode sets the fill binary, `Generate(n)` switches on turbines
/// `0..n`. Per-turbine flows and powers of active turbines are the schedule's
/// totals split evenly; idle turbines take the hill-chart value at the head.
pub fn schedule_assignment(model: &MilpModel, schedule: &Schedule) -> Result<Vec<f64>, CheckError> {
    let steps = model.metadata.steps;
    let n_t = model.metadata.turbines;
    let dims_ok = schedule.steps() == steps
        && schedule.z_in_m.len() == steps + 1
        && [
            &schedule.head_m,
            &schedule.q_total_m3s,
            &schedule.q_sluice_m3s,
            &schedule.q_turbine_fill_m3s,
            &schedule.q_turbine_gen_m3s,
            &schedule.power_mw,
            &schedule.energy_mwh,
        ]
        .iter()
        .all(|v| v.len() == steps);
    if !dims_ok {
        return Err(CheckError::Dimensions {
            schedule: schedule.steps(),
            model: steps,
        });
    }
    if let Some(m) = schedule
        .modes
        .iter()
        .find(|m| m.active_turbines() as usize > n_t)
    {
        return Err(CheckError::Turbines {
            requested: m.active_turbines(),
            available: n_t,
        });
    }

    let cfg = &model.config;
    let mut values = vec![0.0; model.variables.len()];
    let mut set = |key: VarKey, value: f64| {
        if let Some(id) = model.var(key) {
            values[id.0] = value;
        }
    };

    for t in 0..=steps {
        set(VarKey::step(Symbol::InsideLevel, t), schedule.z_in_m[t]);
        let head = if t < steps {
            schedule.head_m[t]
        } else {
            schedule.z_in_m[t] - model.z_out[t]
        };
        set(VarKey::step(Symbol::Head, t), head);
    }

    for t in 0..steps {
        let mode = schedule.modes[t];
        let head = schedule.head_m[t];
        let filling = mode.is_fill();
        let per_sluice = if filling {
            schedule.q_sluice_m3s[t] / f64::from(cfg.n_sluices)
        } else {
            cfg.k_sluice * cfg.sluice_area_m2 * head
        };
        let per_turbine_fill = if filling {
            schedule.q_turbine_fill_m3s[t] / n_t as f64
        } else {
            cfg.k_turbine * cfg.turbine_flow_area_m2 * head
        };
        let fill = f64::from(cfg.n_sluices) * per_sluice + n_t as f64 * per_turbine_fill;
        set(
            VarKey::step(Symbol::FillBinary, t),
            if filling { 1.0 } else { 0.0 },
        );
        set(VarKey::step(Symbol::SluiceFlow, t), per_sluice);
        set(VarKey::step(Symbol::FillFlow, t), fill);
        set(
            VarKey::step(Symbol::FillAux, t),
            if filling { fill } else { 0.0 },
        );
        set(VarKey::step(Symbol::TotalFlow, t), schedule.q_total_m3s[t]);
        set(VarKey::step(Symbol::Power, t), schedule.power_mw[t]);
        set(VarKey::step(Symbol::Energy, t), schedule.energy_mwh[t]);

        let last = model.segments.len() - 1;
        let segment = (0..last)
            .find(|&k| head < model.segments[k + 1].lo)
            .unwrap_or(last);
        let piece = model.segments[segment];
        let active = mode.active_turbines() as usize;
        for i in 0..n_t {
            let on = i < active;
            let (q_gen, p_turb) = if on {
                (
                    schedule.q_turbine_gen_m3s[t] / active as f64,
                    schedule.power_mw[t] / active as f64,
                )
            } else {
                (piece.flow.eval(head), piece.power.eval(head))
            };
            set(
                VarKey::turbine(Symbol::TurbineFillFlow, i, t),
                per_turbine_fill,
            );
            set(
                VarKey::turbine(Symbol::GenBinary, i, t),
                if on { 1.0 } else { 0.0 },
            );
            for k in 0..model.segments.len() {
                set(
                    VarKey::segment(k, i, t),
                    if k == segment { 1.0 } else { 0.0 },
                );
            }
            set(VarKey::turbine(Symbol::GenFlow, i, t), q_gen);
            set(VarKey::turbine(Symbol::TurbinePower, i, t), p_turb);
            set(
                VarKey::turbine(Symbol::GenAux, i, t),
                if on { q_gen } else { 0.0 },
            );
            set(
                VarKey::turbine(Symbol::PowerAux, i, t),
                if on { p_turb } else { 0.0 },
            );
        }
    }
    Ok(values)
}

/// Evaluates every row and bound of `model` on the assignment implied by
/// `schedule`. An empty report means the schedule is feasible within `tol`.
pub fn check_schedule(
    model: &MilpModel,
    schedule: &Schedule,
    tol: f64,
) -> Result<ViolationReport, CheckError> {
    let values = schedule_assignment(model, schedule)?;
    Ok(check_assignment(model, &values, tol))
}

/// Evaluates every row and bound on a raw assignment indexed by `VarId`.
pub fn check_assignment(model: &MilpModel, values: &[f64], tol: f64) -> ViolationReport {
    let mut violations = Vec::new();
    for (j, (var, &x)) in model.variables.iter().zip(values).enumerate() {
        let over = (var.lower - x).max(x - var.upper);
        let fractional = var.kind == VarKind::Binary && x != 0.0 && x != 1.0;
        if over > tol || fractional || !x.is_finite() {
            violations.push(Violation {
                row: format!("bound:{}", var.name),
                step: Some(model.metadata.key(super::VarId(j)).t),
                residual: if over.is_nan() {
                    f64::NAN
                } else {
                    over.max(0.0)
                },
            });
        }
    }
    for row in &model.constraints {
        let residual = row.violation(values);
        if residual.is_nan() || residual > tol {
            violations.push(Violation {
                row: row.name.clone(),
                step: row.step,
                residual,
            });
        }
    }
    ViolationReport { violations }
}

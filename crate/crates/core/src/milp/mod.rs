//! Solver-agnostic mixed-integer model of the lagoon schedule.
//!
//! The model keeps one binary per turbine and step, so it stays close to the
//! per-turbine formulation; the dynamic-programming solver works with turbine
//! counts instead. Products of binaries with bounded continuous quantities are
//! replaced by auxiliary variables with four big-M rows each, and the hill
//! chart is encoded with one indicator binary per head segment.

mod build;
mod check;
mod lp;

use std::collections::BTreeMap;
use std::fmt;

pub use build::{build_milp, gen_flow_bound, MilpSegment, POWER_BOUND_MW};
pub use check::{
    check_assignment, check_schedule, schedule_assignment, CheckError, Violation, ViolationReport,
};
pub use lp::{export_lp, format_number, LpError};

use crate::config::LagoonConfig;
use crate::schedule::Objective;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

/// Quantity a variable stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    /// Basin level at the start of step `t` (and at the horizon end).
    InsideLevel,
    Head,
    FillBinary,
    /// Flow through one sluice gate.
    SluiceFlow,
    /// Fill-mode flow through one turbine.
    TurbineFillFlow,
    /// Combined fill-mode flow of all gates and turbines.
    FillFlow,
    /// Fill binary times combined fill flow.
    FillAux,
    GenBinary,
    Segment,
    /// Hill-chart flow of one turbine.
    GenFlow,
    /// Hill-chart power of one turbine.
    TurbinePower,
    /// Generation binary times hill-chart flow.
    GenAux,
    /// Generation binary times hill-chart power.
    PowerAux,
    TotalFlow,
    Power,
    Energy,
}

/// `(symbol, t, turbine, segment)` index of a variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarKey {
    pub symbol: Symbol,
    pub t: usize,
    pub turbine: Option<usize>,
    pub segment: Option<usize>,
}

impl VarKey {
    pub fn step(symbol: Symbol, t: usize) -> Self {
        Self {
            symbol,
            t,
            turbine: None,
            segment: None,
        }
    }

    pub fn turbine(symbol: Symbol, i: usize, t: usize) -> Self {
        Self {
            symbol,
            t,
            turbine: Some(i),
            segment: None,
        }
    }

    pub fn segment(k: usize, i: usize, t: usize) -> Self {
        Self {
            symbol: Symbol::Segment,
            t,
            turbine: Some(i),
            segment: Some(k),
        }
    }
}

impl fmt::Display for VarKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Symbol::*;
        let stem = match self.symbol {
            InsideLevel => "zin",
            Head => "H",
            FillBinary => "dF",
            SluiceFlow => "QS",
            TurbineFillFlow => "QTF",
            FillFlow => "QFILL",
            FillAux => "zF",
            GenBinary => "dG",
            Segment => "seg",
            GenFlow => "QTG",
            TurbinePower => "PT",
            GenAux => "zTG",
            PowerAux => "zP",
            TotalFlow => "Q",
            Power => "P",
            Energy => "E",
        };
        f.write_str(stem)?;
        if let Some(k) = self.segment {
            write!(f, "_{k}")?;
        }
        if let Some(i) = self.turbine {
            write!(f, "_{i}")?;
        }
        write!(f, "_{}", self.t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

/// Sparse row `Σ coef·x (sense) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    /// Step the row belongs to, if any.
    pub step: Option<usize>,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn lhs(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    /// Amount by which `values` violate the row; zero or negative when satisfied.
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.lhs(values);
        match self.sense {
            Sense::Le => lhs - self.rhs,
            Sense::Ge => self.rhs - lhs,
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelMetadata {
    pub steps: usize,
    pub turbines: usize,
    pub segments: usize,
    pub objective: Objective,
    index: BTreeMap<VarKey, VarId>,
    keys: Vec<VarKey>,
}

impl ModelMetadata {
    pub fn var(&self, key: VarKey) -> Option<VarId> {
        self.index.get(&key).copied()
    }

    pub fn key(&self, id: VarId) -> VarKey {
        self.keys[id.0]
    }
}

/// Variables, rows and a maximisation objective.
#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    /// Maximised.
    pub objective: Vec<(VarId, f64)>,
    pub metadata: ModelMetadata,
    pub(crate) config: LagoonConfig,
    pub(crate) z_out: Vec<f64>,
    pub(crate) segments: Vec<MilpSegment>,
}

impl MilpModel {
    /// A model with no steps and no variables.
    pub fn empty(config: LagoonConfig, objective: Objective) -> Self {
        Self {
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: Vec::new(),
            metadata: ModelMetadata {
                steps: 0,
                turbines: config.n_turbines as usize,
                segments: 0,
                objective,
                index: BTreeMap::new(),
                keys: Vec::new(),
            },
            config,
            z_out: Vec::new(),
            segments: Vec::new(),
        }
    }

    pub fn var(&self, key: VarKey) -> Option<VarId> {
        self.metadata.var(key)
    }

    pub fn binary_count(&self) -> usize {
        self.variables
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .count()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    pub(crate) fn add_var(&mut self, key: VarKey, kind: VarKind, lower: f64, upper: f64) -> VarId {
        let id = VarId(self.variables.len());
        let name = key.to_string();
        let previous = self.metadata.index.insert(key, id);
        debug_assert!(previous.is_none(), "duplicate variable {name}");
        self.metadata.keys.push(key);
        self.variables.push(Variable {
            name,
            kind,
            lower,
            upper,
        });
        id
    }

    pub(crate) fn add_row(
        &mut self,
        name: String,
        step: Option<usize>,
        mut terms: Vec<(VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) {
        terms.retain(|&(_, c)| c != 0.0);
        self.constraints.push(Constraint {
            name,
            step,
            terms,
            sense,
            rhs,
        });
    }
}

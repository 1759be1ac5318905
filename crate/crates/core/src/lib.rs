//! Day-ahead operation scheduling for an ebb-generating tidal lagoon.
//!
//! The basin is modelled as a single reservoir exchanging water with the sea
//! through sluice gates and bulb turbines. [`dp::optimize`] picks one operating
//! mode per time step to maximise energy or revenue, [`milp`] writes the same
//! problem as a mixed-integer program, and [`sim`] replays a schedule with the
//! nonlinear orifice law.

pub mod config;
pub mod dp;
pub mod io;
pub mod milp;
pub mod physics;
pub mod schedule;
pub mod series;
pub mod sim;
pub mod storage;

pub use config::{HeadBounds, LagoonConfig};
pub use dp::{enumerate_exhaustive, optimize, DpParams};
pub use schedule::{Mode, Objective, Schedule, SolverResult, SolverStats};
pub use series::{PriceSeries, TideSeries, Timestamp};

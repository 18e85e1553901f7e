//! Planning toolkit for EV charging networks.
//!
//! The crate couples two halves:
//!
//! - a continuous-time demand/supply model: Bass diffusion demand
//!   ([`diffusion`]), a quadratic net-flow fluid queue ([`fluid_queue`]) and
//!   the supply curve derived from both ([`supply`]), calibrated by nonlinear
//!   least squares ([`calibration`]);
//! - a capacitated multi-path flow-refueling location model: path ingestion,
//!   grid aggregation and per-path expanded networks ([`path_network`]),
//!   solved exactly or heuristically by a self-contained MILP engine
//!   ([`milp`]).
//!
//! [`pipeline`] ties the two together: the projected cumulative supply sets
//! the station budget of the location model.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod diffusion;
mod error;
pub mod fluid_queue;
pub mod milp;
pub mod nls;
pub mod path_network;
pub mod pipeline;
pub mod supply;
pub mod synthetic;

pub use calibration::{FitOptions, FitResult, ObservationKind, ObservationSeries, Timeline};
pub use diffusion::BassParams;
pub use error::{Error, Result};
pub use fluid_queue::{NetFlowPoly, QueueDiagnostics};
pub use milp::{LinearProgram, Solution, SolveStatus};
pub use path_network::{ExpandedNetwork, GridSpec, MilpInstance, OriginRule, TravelPath};
pub use pipeline::{PlanReport, RunConfig};
pub use supply::{CurveSample, SupplyModel, UtilizationKind, UtilizationScenario};

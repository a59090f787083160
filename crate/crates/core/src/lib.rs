//! Stochastic compartment populations with internal mass-action chemistry:
//! exact simulation, generator evaluation and Lyapunov drift checks.

// `!(x >= 0.0)` style guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod crn;
pub mod error;
pub mod inflow;
pub mod kernel;
pub mod lyapunov;
pub mod model;
pub mod population;
pub mod presets;
pub mod rng;
pub mod sim;

pub use crn::{Complex, CrnState, Reaction, ReactionNetwork};
pub use error::{Error, Result};
pub use inflow::InflowDistribution;
pub use kernel::FragmentationKernel;
pub use model::{CompartmentModel, CompartmentRates, Model4Params};
pub use population::PopulationState;
pub use sim::{RunOptions, SimulationReport, StopCondition, StopReason};

//! Collision avoidance for teams of differential-drive robots using
//! predictive control barrier functions, with a rotational escape term that
//! breaks symmetric deadlocks.
//!
//! The pipeline per time step: [`safety`] builds one linear constraint per
//! robot pair and robot-obstacle pair, [`tracking`] computes each robot's
//! desired acceleration, and [`qp`] finds the closest safe wheel
//! accelerations for the whole team. [`sim`] runs the loop and [`metrics`]
//! scores the result.

pub mod cli;
pub mod csvlog;
pub mod error;
pub mod kinematics;
pub mod metrics;
pub mod plot;
pub mod qp;
pub mod safety;
pub mod scenario;
pub mod sim;
pub mod tracking;
pub mod types;

pub use error::{Error, Result};
pub use scenario::{load_scenario, parse_scenario};
pub use sim::{audit_collisions, run, SimLog};

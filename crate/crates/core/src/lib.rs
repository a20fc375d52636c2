//! Drift-plus-penalty cross-layer control of wireless multimedia sensor
//! networks whose nodes harvest energy, draw from the grid, or both.
//!
//! [`config`] loads a network, [`controller`] derives the Lyapunov
//! constants, [`solvers`] and [`scheduler`] produce one slot's decision,
//! [`sim`] runs the slot loop and [`verify`] checks traces and solvers.

pub mod config;
pub mod controller;
pub mod entropy;
pub mod error;
pub mod net;
pub mod queues;
pub mod scheduler;
pub mod sim;
pub mod solvers;
pub mod trace;
pub mod verify;

pub use config::{fig2, load_config, parse_config};
pub use error::{ConfigError, SimError};
pub use net::NetworkConfig;
pub use sim::{run, run_with, sweep, RunOptions, RunSummary, Simulator};

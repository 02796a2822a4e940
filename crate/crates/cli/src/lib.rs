//! Command-line front end for `meterguard-core`: config and trace loading,
//! policy simulation, bills, bound sweeps, oracle runs and codebook dumps.

pub mod commands;
pub mod config;
pub mod error;
pub mod trace;

pub use commands::{
    cmd_bill, cmd_bounds, cmd_codebook, cmd_oracle, cmd_simulate, BillReport, BoundsRun,
    CodebookDump, GridPoint, GridSpec, OracleReport, Simulation, SimulationSummary, BILL_HEADER,
    BOUNDS_HEADER, SIMULATE_HEADER,
};
pub use config::RunConfig;
pub use error::{CliError, Result};
pub use trace::{Quantized, Trace, TraceRow};

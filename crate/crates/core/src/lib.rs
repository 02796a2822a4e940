//! Privacy-preserving battery charging for smart meters.
//!
//! A battery between a household and the grid lets the energy management
//! unit request energy `y` that differs from the consumption `x`, hiding
//! part of the load profile from the utility. This crate models the
//! battery, builds covering policies that leak at most one bit per
//! depletion block, computes bill-optimal requests under time-of-use
//! tariffs, bounds the leakage per step with and without a cost budget,
//! and certifies all of it against exhaustive oracles on small instances.
//!
//! ```
//! use meterguard_core::{covering_codebook, i_infty_bounds, StateInterval, SystemConfig};
//!
//! let cfg = SystemConfig::new(2, 1, 0, 48)?;
//! let codebook = covering_codebook(&cfg, StateInterval::single(0))?;
//! assert_eq!(codebook.log2_size(), 16);
//! assert_eq!(i_infty_bounds(&cfg).upper, 1.0 / 3.0);
//! # Ok::<(), meterguard_core::Error>(())
//! ```

pub mod bounds;
pub mod error;
pub mod geometry;
pub mod model;
pub mod oracle;
pub mod reduction;
pub mod tariff;

pub use bounds::{
    gamma_ceiling, i_gamma, i_infty_bounds, lambda_of, linear_grid, privacy_cost_upper,
    single_letter_bound, sweep_bounds, BoundReport, Budget, GammaSolution, InfinityBounds,
    SolverOptions,
};
pub use error::{Error, Result};
pub use geometry::{
    apply_covering_policy, covering_codebook, distance, packing_set, shared_request, BlockChoice,
    CoveringCodebook, CoveringRun, PackingSet,
};
pub use model::{
    battery_trajectory, is_feasible, BatteryTrajectory, ConsumptionSeq, InputPair, RequestSeq,
    StateInterval, SystemConfig, Violation, ViolationKind,
};
pub use reduction::{
    reduce_cost_preserving, reduce_step, reduce_to_alphabet, AlphabetKind, ReducedAlphabet,
};
pub use tariff::{
    cost_report, delta_max, is_delta_affordable, optimal_bill, policy_cost_g, CostReport,
    OptimalBill, PriceBlock, TariffSchedule,
};

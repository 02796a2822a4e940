//! Ground-truth engines for small instances: exact mutual information,
//! channel capacity, exhaustive enumeration and policy search.

pub mod channel;
pub mod enumerate;
pub mod info;
pub mod search;

pub use channel::{FiniteChannel, FiniteDistribution};
pub use enumerate::{all_consumptions, enumerate_feasible, ENUMERATION_GUARD};
pub use info::{binary_entropy, capacity, exact_mi, worst_case_mi, ChannelCapacity};
pub use search::{exact_min_worstcase_leakage, LeakageBracket};

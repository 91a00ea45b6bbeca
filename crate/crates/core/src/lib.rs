//! Parallel significant-pattern mining.
//!
//! Closed itemsets are enumerated by prefix-preserving closure extension
//! ([`cim`]); LAMP ([`lamp`]) finds the smallest minimum support whose
//! Tarone-corrected testability bound admits significance, enumerates the
//! closed sets at that support and reports those whose Fisher exact P-value
//! ([`stats`]) passes the corrected level. The search runs on a group of
//! workers ([`runtime`]) that balance load by lifeline work stealing and
//! detect termination with detector waves ([`dtd`]).

pub mod bitset;
pub mod cim;
pub mod dataset;
pub mod dtd;
pub mod error;
pub mod lamp;
pub mod oracle;
pub mod runtime;
pub mod stats;
pub mod synth;

pub use dataset::{DatasetError, ItemId, PatternSupport, TransactionDatabase};
pub use error::Error;
pub use lamp::{mine_closed, run_lamp, run_lamp_with, ClosedSet, EngineFault, LampReport, MineReport};
pub use runtime::{Fault, Objective, RunOutcome, RuntimeConfig, SimConfig, TransportKind};
pub use stats::{StatContext, StatsError};

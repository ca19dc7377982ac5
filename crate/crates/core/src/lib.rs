//! Arc-consistency based solving of simple temporal networks (STNs).
//!
//! The crate is organized bottom-up:
//!
//! - [`interval`]: closed intervals over extended integers with intersection,
//!   composition and inverse.
//! - [`stn`]: the network model and its text format.
//! - [`acstp`]: the centralized arc-consistency solver, solution extraction
//!   and verification.
//! - [`oracle`]: shortest-path ground truth (Bellman-Ford, Floyd-Warshall).
//! - [`mastn`]: multiagent networks, agent views and their text format.
//! - [`sim`]: a deterministic discrete-event runtime for agents exchanging
//!   messages, with logical-clock accounting and a privacy audit.
//! - [`disacstp`]: the per-agent distributed solver running on [`sim`].
//! - [`workloads`]: seeded instance generators.
//! - [`metrics`]: run metrics and their CSV form.

pub mod acstp;
pub mod disacstp;
pub mod error;
pub mod interval;
pub mod mastn;
pub mod metrics;
pub mod oracle;
pub mod sim;
pub mod stn;
pub mod workloads;

pub use acstp::{
    enforce_ac, extract_bound_solution, is_arc_consistent, sample_solution, verify_assignment,
    AcOutcome, AcStats, Assignment, BoundSide, Closure, InconsistencyWitness, Violation,
};
pub use disacstp::{solve_distributed, AgentResult, DistributedOutcome};
pub use error::{Error, Result};
pub use interval::{Bound, Interval};
pub use mastn::{AgentVar, AgentView, ExternalConstraint, Mastn, VarMapping};
pub use metrics::RunMetrics;
pub use oracle::{oracle_minimal_constraint, oracle_minimal_domains, MinimalNetwork, OracleOutcome};
pub use sim::{SimConfig, SimMetrics};
pub use stn::{Stn, VarId};

//! Schedule-aware LET: communication intervals derived from an offline
//! partitioned-EDF schedule, end-to-end latency analysis of multi-rate
//! cause-effect chains, and a search over job-level dependencies that
//! shortens those latencies.
//!
//! The pipeline is
//!
//! 1. [`task_model`]: tasks, the communication DAG and its chains;
//! 2. [`schedgen`]: EDF schedule over one hyperperiod, optionally gated by
//!    job-level dependencies;
//! 3. [`interval_model`]: per-task read/write windows (LET, WCRT-LET,
//!    schedule-aware);
//! 4. [`chain_analysis`]: worst-case data age and reaction latency;
//! 5. [`jld_search`]: best-first search for dependencies that reduce them.
//!
//! [`sim_oracle`] replays the read/write semantics event by event and is
//! used to cross-check every analytic number. [`benchgen`] draws random
//! task sets from automotive-style profiles.

pub mod benchgen;
pub mod chain_analysis;
pub mod error;
pub mod interval_model;
pub mod jld_search;
pub mod report;
pub mod schedgen;
pub mod sim_oracle;
pub mod task_model;

pub use error::{AnalysisError, GenError, IntervalError, MeasureError, ModelError, ScheduleError, SearchError};
pub use task_model::{Chain, CommDag, Task, TaskId, TaskSet, Tick};

use thiserror::Error;

use crate::schedgen::JobId;
use crate::task_model::{TaskId, Tick};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("empty period list")]
    EmptyPeriods,
    #[error("non-positive period {0}")]
    NonPositivePeriod(Tick),
    #[error("task set has no tasks")]
    EmptyTaskSet,
    #[error("task set has no cores")]
    NoCores,
    #[error("task {id}: need 0 < wcet <= period, got wcet={wcet} period={period}")]
    InvalidTask { id: TaskId, wcet: Tick, period: Tick },
    #[error("task {id} mapped to core {core}, but only {num_cores} cores exist")]
    InvalidCore {
        id: TaskId,
        core: usize,
        num_cores: usize,
    },
    #[error("duplicate task id {0}")]
    DuplicateTask(TaskId),
    #[error("unknown task id {0}")]
    UnknownTask(TaskId),
    #[error("communication graph has a cycle: {witness:?}")]
    Cycle { witness: Vec<TaskId> },
    #[error("chain {0:?} has fewer than two tasks")]
    ChainTooShort(Vec<TaskId>),
    #[error("chain {0:?} visits a task twice")]
    ChainRepeatsTask(Vec<TaskId>),
    #[error("chain uses {writer}->{reader}, which is not an arc of the graph")]
    ChainArcMissing { writer: TaskId, reader: TaskId },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("job {job} misses its deadline at {deadline}")]
    DeadlineMiss { job: JobId, deadline: Tick },
    #[error("job-level dependencies form a cycle through {0}")]
    JldCycle(JobId),
    #[error("job-level dependency references unknown job {0}")]
    UnknownJob(JobId),
    #[error("job-level dependency {0} precedes itself")]
    SelfDependency(JobId),
}

#[derive(Debug, Error)]
pub enum IntervalError {
    #[error("no interval for task {0}")]
    Missing(TaskId),
    #[error("task {task}: interval [{begin},{end}] violates 0 <= begin < end <= period ({period})")]
    OutOfRange {
        task: TaskId,
        begin: Tick,
        end: Tick,
        period: Tick,
    },
    #[error("task {task}: interval [{begin},{end}] is shorter than wcet {wcet}")]
    TooShort {
        task: TaskId,
        begin: Tick,
        end: Tick,
        wcet: Tick,
    },
    #[error("job {job}: execution [{erp},{lwp}] is outside interval [{begin},{end}]")]
    JobOutside {
        job: JobId,
        erp: Tick,
        lwp: Tick,
        begin: Tick,
        end: Tick,
    },
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Interval(#[from] IntervalError),
}

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("horizon {horizon} is not a positive multiple of the hyperperiod {hyperperiod}")]
    BadHorizon { horizon: Tick, hyperperiod: Tick },
    #[error("chain {chain}: trace ends at {horizon} before input {input} is fully propagated")]
    WindowTooShort {
        chain: usize,
        input: Tick,
        horizon: Tick,
    },
    #[error("chain {chain}: no input in the measurement window reached the chain output")]
    NoCompleteInput { chain: usize },
    #[error("chain index {0} out of range")]
    UnknownChain(usize),
    #[error(transparent)]
    Interval(#[from] IntervalError),
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("root schedule is infeasible: {0}")]
    InfeasibleRoot(#[source] ScheduleError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("no feasible task set after {0} attempts")]
    Exhausted(usize),
    #[error("cannot parse profile: {0}")]
    Parse(String),
}

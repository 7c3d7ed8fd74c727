//! Offline partitioned EDF over one hyperperiod with job-level dependencies.
//!
//! A job is eligible once it is released and every job-level predecessor
//! has completed, on whatever core that predecessor runs. Among eligible
//! jobs of a core the earliest absolute deadline wins; ties go to the lower
//! task id, then the lower job index. Jobs always execute their full WCET.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ScheduleError;
use crate::task_model::{TaskId, TaskSet, Tick};

/// The `job`-th instance of a task within the hyperperiod.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(TaskId, u32)", into = "(TaskId, u32)")]
pub struct JobId {
    pub task: TaskId,
    pub job: u32,
}

impl JobId {
    pub fn new(task: TaskId, job: u32) -> Self {
        JobId { task, job }
    }
}

impl From<(TaskId, u32)> for JobId {
    fn from((task, job): (TaskId, u32)) -> Self {
        JobId { task, job }
    }
}

impl From<JobId> for (TaskId, u32) {
    fn from(j: JobId) -> Self {
        (j.task, j.job)
    }
}

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "τ{},{}", self.task, self.job)
    }
}

/// `predecessor ≺ successor`: the successor may start only after the
/// predecessor has completed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Jld {
    pub predecessor: JobId,
    pub successor: JobId,
}

impl Jld {
    pub fn new(predecessor: JobId, successor: JobId) -> Self {
        Jld {
            predecessor,
            successor,
        }
    }
}

impl fmt::Display for Jld {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ≺ {}", self.predecessor, self.successor)
    }
}

/// Canonically ordered set of job-level dependencies.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JldSet(BTreeSet<Jld>);

impl JldSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, jld: Jld) -> bool {
        self.0.insert(jld)
    }

    pub fn contains(&self, jld: &Jld) -> bool {
        self.0.contains(jld)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Jld> {
        self.0.iter()
    }

    pub fn with(&self, jld: Jld) -> JldSet {
        let mut s = self.clone();
        s.insert(jld);
        s
    }

    pub fn difference(&self, other: &JldSet) -> JldSet {
        JldSet(self.0.difference(&other.0).copied().collect())
    }
}

impl FromIterator<Jld> for JldSet {
    fn from_iter<I: IntoIterator<Item = Jld>>(iter: I) -> Self {
        JldSet(iter.into_iter().collect())
    }
}

/// A contiguous execution of one job on one core, `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(TaskId, u32, Tick, Tick)", into = "(TaskId, u32, Tick, Tick)")]
pub struct Segment {
    pub task: TaskId,
    pub job: u32,
    pub start: Tick,
    pub end: Tick,
}

impl From<(TaskId, u32, Tick, Tick)> for Segment {
    fn from((task, job, start, end): (TaskId, u32, Tick, Tick)) -> Self {
        Segment {
            task,
            job,
            start,
            end,
        }
    }
}

impl From<Segment> for (TaskId, u32, Tick, Tick) {
    fn from(s: Segment) -> Self {
        (s.task, s.job, s.start, s.end)
    }
}

/// A feasible schedule over one hyperperiod.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    hyperperiod: Tick,
    cores: Vec<Vec<Segment>>,
    jlds: JldSet,
    periods: BTreeMap<TaskId, Tick>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoreDoc {
    pub core: usize,
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleDoc {
    pub hyperperiod: Tick,
    pub cores: Vec<CoreDoc>,
    pub jlds: JldSet,
}

impl Schedule {
    pub fn hyperperiod(&self) -> Tick {
        self.hyperperiod
    }

    /// Segments per core, ordered by start time.
    pub fn cores(&self) -> &[Vec<Segment>] {
        &self.cores
    }

    pub fn jlds(&self) -> &JldSet {
        &self.jlds
    }

    pub fn period(&self, task: TaskId) -> Option<Tick> {
        self.periods.get(&task).copied()
    }

    pub fn to_doc(&self) -> ScheduleDoc {
        ScheduleDoc {
            hyperperiod: self.hyperperiod,
            cores: self
                .cores
                .iter()
                .enumerate()
                .map(|(core, s)| CoreDoc {
                    core,
                    segments: s.clone(),
                })
                .collect(),
            jlds: self.jlds.clone(),
        }
    }

    /// Plain-text dump: one line of segments per core, plus a character
    /// timeline when the hyperperiod is short.
    pub fn gantt(&self) -> String {
        let mut out = String::new();
        for (c, segs) in self.cores.iter().enumerate() {
            out.push_str(&format!("core {c}:"));
            for s in segs {
                out.push_str(&format!(" τ{},{}[{},{})", s.task, s.job, s.start, s.end));
            }
            out.push('\n');
        }
        if self.hyperperiod <= 120 {
            for (c, segs) in self.cores.iter().enumerate() {
                let mut row = vec!['.'; self.hyperperiod as usize];
                for s in segs {
                    let mark = std::char::from_digit(s.task % 36, 36).unwrap_or('#');
                    for t in s.start..s.end {
                        row[t as usize] = mark;
                    }
                }
                out.push_str(&format!("core {c} |{}|\n", row.into_iter().collect::<String>()));
            }
        }
        out
    }
}

/// Execution window of one job, relative to its release.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionInterval {
    pub task: TaskId,
    pub job: u32,
    /// First execution start minus release.
    pub erp: Tick,
    /// Completion minus release.
    pub lwp: Tick,
}

impl ExecutionInterval {
    pub fn job_id(&self) -> JobId {
        JobId::new(self.task, self.job)
    }
}

#[derive(Debug, Clone)]
struct JobState {
    id: JobId,
    core: usize,
    release: Tick,
    deadline: Tick,
    remaining: Tick,
    pending: usize,
    released: bool,
    done: bool,
}

type ReadyKey = Reverse<(Tick, TaskId, u32, usize)>;

/// Preemptive EDF per core over one hyperperiod, gated by `jlds`.
pub fn schedule_edf(ts: &TaskSet, jlds: &JldSet) -> Result<Schedule, ScheduleError> {
    let hp = ts.hyperperiod();
    let mut jobs = Vec::new();
    let mut base = BTreeMap::new();
    for t in ts.tasks() {
        base.insert(t.id, jobs.len());
        for k in 0..(hp / t.period) {
            jobs.push(JobState {
                id: JobId::new(t.id, k as u32),
                core: t.core,
                release: k * t.period,
                deadline: (k + 1) * t.period,
                remaining: t.wcet,
                pending: 0,
                released: false,
                done: false,
            });
        }
    }
    let index_of = |j: JobId| -> Result<usize, ScheduleError> {
        let b = *base.get(&j.task).ok_or(ScheduleError::UnknownJob(j))?;
        let n = hp / ts.task(j.task).expect("known task").period;
        if (j.job as Tick) < n {
            Ok(b + j.job as usize)
        } else {
            Err(ScheduleError::UnknownJob(j))
        }
    };

    let mut succs: Vec<Vec<usize>> = vec![Vec::new(); jobs.len()];
    for d in jlds.iter() {
        let p = index_of(d.predecessor)?;
        let s = index_of(d.successor)?;
        if p == s {
            return Err(ScheduleError::SelfDependency(d.predecessor));
        }
        succs[p].push(s);
        jobs[s].pending += 1;
    }
    check_acyclic(&jobs, &succs)?;

    let mut release_order: Vec<usize> = (0..jobs.len()).collect();
    release_order.sort_by_key(|&i| (jobs[i].release, jobs[i].id));

    let cores = ts.num_cores();
    let mut ready: Vec<BinaryHeap<ReadyKey>> = vec![BinaryHeap::new(); cores];
    let mut segments: Vec<Vec<Segment>> = vec![Vec::new(); cores];
    let mut open: BinaryHeap<Reverse<(Tick, JobId, usize)>> = jobs
        .iter()
        .enumerate()
        .map(|(i, j)| Reverse((j.deadline, j.id, i)))
        .collect();
    let key = |j: &JobState, i: usize| Reverse((j.deadline, j.id.task, j.id.job, i));

    let mut t: Tick = 0;
    let mut next_release = 0usize;
    let mut completed = 0usize;
    while completed < jobs.len() {
        while next_release < release_order.len() && jobs[release_order[next_release]].release <= t {
            let i = release_order[next_release];
            jobs[i].released = true;
            if jobs[i].pending == 0 {
                ready[jobs[i].core].push(key(&jobs[i], i));
            }
            next_release += 1;
        }

        let running: Vec<Option<usize>> = ready.iter().map(|h| h.peek().map(|r| r.0 .3)).collect();
        let mut next_t = release_order
            .get(next_release)
            .map(|&i| jobs[i].release)
            .unwrap_or(Tick::MAX);
        for &i in running.iter().flatten() {
            next_t = next_t.min(t + jobs[i].remaining);
        }
        // Stop at the earliest open deadline so an overrun is seen before
        // the late job completes.
        if let Some(Reverse((deadline, _, _))) = first_open(&mut open, &jobs) {
            if running.iter().any(Option::is_some) {
                next_t = next_t.min(deadline);
            }
        }
        if next_t == Tick::MAX {
            // Nothing can run and nothing will be released: some job waits
            // forever. Report the earliest open deadline.
            let Reverse((deadline, job, _)) = first_open(&mut open, &jobs).expect("open job");
            return Err(ScheduleError::DeadlineMiss { job, deadline });
        }

        // Successors are queued only after every core has advanced, so a
        // newly eligible job cannot displace the top of a heap mid-step.
        let mut unblocked = Vec::new();
        for (c, r) in running.iter().enumerate() {
            let Some(i) = *r else { continue };
            let run = next_t - t;
            jobs[i].remaining -= run;
            let id = jobs[i].id;
            match segments[c].last_mut() {
                Some(s) if s.task == id.task && s.job == id.job && s.end == t => s.end = next_t,
                _ => segments[c].push(Segment {
                    task: id.task,
                    job: id.job,
                    start: t,
                    end: next_t,
                }),
            }
            if jobs[i].remaining == 0 {
                ready[c].pop();
                jobs[i].done = true;
                completed += 1;
                for &s in &succs[i] {
                    jobs[s].pending -= 1;
                    if jobs[s].pending == 0 && jobs[s].released {
                        unblocked.push(s);
                    }
                }
            }
        }
        for s in unblocked {
            ready[jobs[s].core].push(key(&jobs[s], s));
        }
        t = next_t;

        if let Some(Reverse((deadline, job, _))) = first_open(&mut open, &jobs) {
            if deadline <= t {
                return Err(ScheduleError::DeadlineMiss { job, deadline });
            }
        }
    }

    Ok(Schedule {
        hyperperiod: hp,
        cores: segments,
        jlds: jlds.clone(),
        periods: ts.tasks().iter().map(|t| (t.id, t.period)).collect(),
    })
}

fn first_open(
    open: &mut BinaryHeap<Reverse<(Tick, JobId, usize)>>,
    jobs: &[JobState],
) -> Option<Reverse<(Tick, JobId, usize)>> {
    while let Some(top) = open.peek() {
        if jobs[top.0 .2].done {
            open.pop();
        } else {
            return Some(*top);
        }
    }
    None
}

fn check_acyclic(jobs: &[JobState], succs: &[Vec<usize>]) -> Result<(), ScheduleError> {
    let mut indeg: Vec<usize> = jobs.iter().map(|j| j.pending).collect();
    let mut stack: Vec<usize> = (0..jobs.len()).filter(|&i| indeg[i] == 0).collect();
    let mut seen = 0;
    while let Some(i) = stack.pop() {
        seen += 1;
        for &s in &succs[i] {
            indeg[s] -= 1;
            if indeg[s] == 0 {
                stack.push(s);
            }
        }
    }
    if seen == jobs.len() {
        Ok(())
    } else {
        let i = (0..jobs.len()).find(|&i| indeg[i] > 0).expect("cycle member");
        Err(ScheduleError::JldCycle(jobs[i].id))
    }
}

/// Per-job `(erp, lwp)` relative to release, ordered by task id then job.
pub fn execution_intervals(schedule: &Schedule) -> Vec<ExecutionInterval> {
    let mut span: BTreeMap<JobId, (Tick, Tick)> = BTreeMap::new();
    for segs in &schedule.cores {
        for s in segs {
            let e = span.entry(JobId::new(s.task, s.job)).or_insert((s.start, s.end));
            e.0 = e.0.min(s.start);
            e.1 = e.1.max(s.end);
        }
    }
    span.into_iter()
        .map(|(j, (start, end))| {
            let release = j.job as Tick * schedule.periods[&j.task];
            ExecutionInterval {
                task: j.task,
                job: j.job,
                erp: start - release,
                lwp: end - release,
            }
        })
        .collect()
}

/// Outcome of a feasibility check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Feasibility {
    pub feasible: bool,
    pub report: Option<String>,
}

pub fn is_feasible(ts: &TaskSet, jlds: &JldSet) -> Feasibility {
    match schedule_edf(ts, jlds) {
        Ok(_) => Feasibility {
            feasible: true,
            report: None,
        },
        Err(e) => Feasibility {
            feasible: false,
            report: Some(e.to_string()),
        },
    }
}

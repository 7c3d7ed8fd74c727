//! Event-by-event replay of LET read/write semantics over shared variables.
//!
//! Every job of a chain task reads at `release + begin` and writes at
//! `release + end`. Each read of the chain head injects a fresh input
//! stamped with the read tick; the stamp travels with the data through the
//! chain's variables. At equal ticks all writes happen before all reads.
//! Outputs are the writes of the chain's last task.
//!
//! This module shares no code with [`crate::chain_analysis`] and serves as
//! its oracle.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{IntervalError, MeasureError};
use crate::interval_model::IntervalAssignment;
use crate::task_model::{Chain, TaskId, TaskSet, Tick};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    // Declaration order is the same-tick processing order.
    Write,
    Read,
}

/// What a job read from or wrote to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarRef {
    /// External input sampled by the chain head.
    Input,
    /// Shared variable of the arc `writer -> reader`.
    Arc(TaskId, TaskId),
    /// Chain output produced by the last task.
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub tick: Tick,
    pub kind: EventKind,
    pub task: TaskId,
    pub job: u64,
    pub var: VarRef,
    /// Input stamp carried by the value; `None` for the initial default.
    pub provenance: Option<Tick>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainOutput {
    pub tick: Tick,
    pub provenance: Option<Tick>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainTrace {
    pub chain: usize,
    pub events: Vec<TraceEvent>,
    pub inputs: Vec<Tick>,
    pub outputs: Vec<ChainOutput>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub horizon: Tick,
    pub chains: Vec<ChainTrace>,
}

impl Trace {
    /// One JSON object per line.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for c in &self.chains {
            for e in &c.events {
                let line = serde_json::json!({ "chain": c.chain, "event": e });
                out.push_str(&line.to_string());
                out.push('\n');
            }
        }
        out
    }
}

/// Most recent value of each shared variable.
#[derive(Debug, Clone, Default)]
pub struct VarStore {
    values: BTreeMap<(TaskId, TaskId), Tagged>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tagged {
    pub provenance: Option<Tick>,
    pub written_at: Option<Tick>,
}

impl VarStore {
    pub fn read(&self, var: (TaskId, TaskId)) -> Tagged {
        self.values.get(&var).copied().unwrap_or(Tagged {
            provenance: None,
            written_at: None,
        })
    }

    pub fn write(&mut self, var: (TaskId, TaskId), tick: Tick, provenance: Option<Tick>) {
        self.values.insert(
            var,
            Tagged {
                provenance,
                written_at: Some(tick),
            },
        );
    }
}

/// Replays every chain of `ts` over `[0, horizon)`.
pub fn simulate(ts: &TaskSet, intervals: &IntervalAssignment, horizon: Tick) -> Result<Trace, MeasureError> {
    let hp = ts.hyperperiod();
    if horizon <= 0 || horizon % hp != 0 {
        return Err(MeasureError::BadHorizon {
            horizon,
            hyperperiod: hp,
        });
    }
    intervals.validate(ts)?;
    let chains = ts
        .chains()
        .iter()
        .enumerate()
        .map(|(i, c)| simulate_chain(ts, intervals, i, c, horizon))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Trace { horizon, chains })
}

struct Pending {
    tick: Tick,
    kind: EventKind,
    pos: usize,
    job: u64,
}

fn simulate_chain(
    ts: &TaskSet,
    intervals: &IntervalAssignment,
    index: usize,
    chain: &Chain,
    horizon: Tick,
) -> Result<ChainTrace, MeasureError> {
    let mut pending = Vec::new();
    for (pos, &id) in chain.tasks.iter().enumerate() {
        let period = ts.task(id).expect("validated").period;
        let iv = intervals.get(id).ok_or(IntervalError::Missing(id))?;
        let mut k: u64 = 0;
        loop {
            let release = k as Tick * period;
            if release + iv.begin >= horizon {
                break;
            }
            pending.push(Pending {
                tick: release + iv.begin,
                kind: EventKind::Read,
                pos,
                job: k,
            });
            if release + iv.end < horizon {
                pending.push(Pending {
                    tick: release + iv.end,
                    kind: EventKind::Write,
                    pos,
                    job: k,
                });
            }
            k += 1;
        }
    }
    pending.sort_by_key(|p| (p.tick, p.kind, p.pos, p.job));

    let tasks = &chain.tasks;
    let last = tasks.len() - 1;
    let mut store = VarStore::default();
    // Local copy of what each in-flight job read.
    let mut local: BTreeMap<(usize, u64), Option<Tick>> = BTreeMap::new();
    let mut events = Vec::with_capacity(pending.len());
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();

    for p in pending {
        let task = tasks[p.pos];
        match p.kind {
            EventKind::Read => {
                let (var, provenance) = if p.pos == 0 {
                    inputs.push(p.tick);
                    (VarRef::Input, Some(p.tick))
                } else {
                    let arc = (tasks[p.pos - 1], task);
                    (VarRef::Arc(arc.0, arc.1), store.read(arc).provenance)
                };
                local.insert((p.pos, p.job), provenance);
                events.push(TraceEvent {
                    tick: p.tick,
                    kind: EventKind::Read,
                    task,
                    job: p.job,
                    var,
                    provenance,
                });
            }
            EventKind::Write => {
                let provenance = local
                    .remove(&(p.pos, p.job))
                    .expect("a job reads before it writes");
                let var = if p.pos == last {
                    outputs.push(ChainOutput {
                        tick: p.tick,
                        provenance,
                    });
                    VarRef::Output
                } else {
                    let arc = (task, tasks[p.pos + 1]);
                    store.write(arc, p.tick, provenance);
                    VarRef::Arc(arc.0, arc.1)
                };
                events.push(TraceEvent {
                    tick: p.tick,
                    kind: EventKind::Write,
                    task,
                    job: p.job,
                    var,
                    provenance,
                });
            }
        }
    }

    Ok(ChainTrace {
        chain: index,
        events,
        inputs,
        outputs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputLatency {
    pub input: Tick,
    pub first_output: Tick,
    pub last_output: Tick,
    pub reaction: Tick,
    pub age: Tick,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmpiricalLatencies {
    pub chain: usize,
    pub window: (Tick, Tick),
    pub per_input: Vec<InputLatency>,
    /// Inputs in the window that were overwritten before reaching the output.
    pub dropped: Vec<Tick>,
    pub worst_reaction: Tick,
    pub worst_age: Tick,
}

/// Measures reaction latency and data age for the inputs injected during
/// the second chain hyperperiod, `[HP_E, 2·HP_E)`.
pub fn empirical_latencies(ts: &TaskSet, trace: &Trace, chain: usize) -> Result<EmpiricalLatencies, MeasureError> {
    let hp = ts
        .chains()
        .get(chain)
        .ok_or(MeasureError::UnknownChain(chain))?
        .hyperperiod;
    let ct = trace
        .chains
        .iter()
        .find(|c| c.chain == chain)
        .ok_or(MeasureError::UnknownChain(chain))?;
    measure_window(ct, (hp, 2 * hp), trace.horizon)
}

/// Measures every input injected in `window`. An input's last output is
/// only known once an output carrying a newer input has been observed.
pub fn measure_window(
    ct: &ChainTrace,
    window: (Tick, Tick),
    horizon: Tick,
) -> Result<EmpiricalLatencies, MeasureError> {
    let mut per_input = Vec::new();
    let mut dropped = Vec::new();
    for &input in ct.inputs.iter().filter(|&&t| t >= window.0 && t < window.1) {
        let mut first = None;
        let mut last = None;
        let mut superseded = false;
        for o in &ct.outputs {
            match o.provenance {
                Some(p) if p == input => {
                    first.get_or_insert(o.tick);
                    last = Some(o.tick);
                }
                Some(p) if p > input => {
                    superseded = true;
                    break;
                }
                _ => {}
            }
        }
        if !superseded {
            return Err(MeasureError::WindowTooShort {
                chain: ct.chain,
                input,
                horizon,
            });
        }
        match (first, last) {
            (Some(f), Some(l)) => per_input.push(InputLatency {
                input,
                first_output: f,
                last_output: l,
                reaction: f - input,
                age: l - input,
            }),
            _ => dropped.push(input),
        }
    }
    if per_input.is_empty() {
        return Err(MeasureError::NoCompleteInput { chain: ct.chain });
    }
    Ok(EmpiricalLatencies {
        chain: ct.chain,
        window,
        worst_reaction: per_input.iter().map(|l| l.reaction).max().unwrap(),
        worst_age: per_input.iter().map(|l| l.age).max().unwrap(),
        per_input,
        dropped,
    })
}

/// Smallest multiple of the task-set hyperperiod that is at least three
/// hyperperiods and leaves room for the slowest chain to settle after its
/// measurement window.
pub fn default_horizon(ts: &TaskSet) -> Tick {
    let hp = ts.hyperperiod();
    let mut need = 3 * hp;
    for c in ts.chains() {
        let span: Tick = c
            .tasks
            .iter()
            .map(|&id| 2 * ts.task(id).expect("chain task").period)
            .sum();
        let tail = 2 * ts.task(c.tail()).expect("chain task").period;
        need = need.max(2 * c.hyperperiod + span + tail);
    }
    (need + hp - 1) / hp * hp
}

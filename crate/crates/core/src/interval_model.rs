//! Communication intervals for the three execution models.
//!
//! An interval is stored as read/write offsets relative to each job's
//! release, so every job of a task uses the same window.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::IntervalError;
use crate::schedgen::{execution_intervals, Schedule};
use crate::task_model::{TaskId, TaskSet, Tick};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IntervalModel {
    /// Classic LET: read at release, write at the next release.
    #[serde(rename = "let")]
    Let,
    /// Write at the worst-case response time.
    #[serde(rename = "wcrt")]
    WcrtLet,
    /// Envelope of the scheduled execution intervals.
    #[serde(rename = "sa")]
    ScheduleAware,
}

impl IntervalModel {
    pub fn as_str(&self) -> &'static str {
        match self {
            IntervalModel::Let => "let",
            IntervalModel::WcrtLet => "wcrt",
            IntervalModel::ScheduleAware => "sa",
        }
    }
}

impl fmt::Display for IntervalModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IntervalModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "let" => Ok(IntervalModel::Let),
            "wcrt" | "wcrt-let" => Ok(IntervalModel::WcrtLet),
            "sa" | "sa-let" => Ok(IntervalModel::ScheduleAware),
            other => Err(format!("unknown interval model '{other}'")),
        }
    }
}

/// `[begin, end]`, offsets from the job release.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub begin: Tick,
    pub end: Tick,
}

impl Interval {
    pub fn new(begin: Tick, end: Tick) -> Self {
        Interval { begin, end }
    }

    pub fn len(&self) -> Tick {
        self.end - self.begin
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.begin
    }

    pub fn contains(&self, other: &Interval) -> bool {
        self.begin <= other.begin && other.end <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IntervalAssignment {
    model: IntervalModel,
    intervals: BTreeMap<TaskId, Interval>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct TaskInterval {
    task: TaskId,
    begin: Tick,
    end: Tick,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalDoc {
    model: IntervalModel,
    intervals: Vec<TaskInterval>,
}

impl IntervalAssignment {
    pub fn new(model: IntervalModel, intervals: BTreeMap<TaskId, Interval>) -> Self {
        IntervalAssignment { model, intervals }
    }

    pub fn model(&self) -> IntervalModel {
        self.model
    }

    pub fn get(&self, task: TaskId) -> Option<Interval> {
        self.intervals.get(&task).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (TaskId, Interval)> + '_ {
        self.intervals.iter().map(|(&t, &i)| (t, i))
    }

    /// Sum of interval lengths over all tasks.
    pub fn total_length(&self) -> Tick {
        self.intervals.values().map(Interval::len).sum()
    }

    /// Checks `0 <= begin < end <= T` and `end - begin >= C` for every task.
    pub fn validate(&self, ts: &TaskSet) -> Result<(), IntervalError> {
        for t in ts.tasks() {
            let iv = self.get(t.id).ok_or(IntervalError::Missing(t.id))?;
            if iv.begin < 0 || iv.begin >= iv.end || iv.end > t.period {
                return Err(IntervalError::OutOfRange {
                    task: t.id,
                    begin: iv.begin,
                    end: iv.end,
                    period: t.period,
                });
            }
            if iv.len() < t.wcet {
                return Err(IntervalError::TooShort {
                    task: t.id,
                    begin: iv.begin,
                    end: iv.end,
                    wcet: t.wcet,
                });
            }
        }
        Ok(())
    }

    /// Checks that every scheduled job executes inside its task's interval.
    pub fn covers(&self, schedule: &Schedule) -> Result<(), IntervalError> {
        for e in execution_intervals(schedule) {
            let iv = self.get(e.task).ok_or(IntervalError::Missing(e.task))?;
            if e.erp < iv.begin || e.lwp > iv.end {
                return Err(IntervalError::JobOutside {
                    job: e.job_id(),
                    erp: e.erp,
                    lwp: e.lwp,
                    begin: iv.begin,
                    end: iv.end,
                });
            }
        }
        Ok(())
    }

    pub fn to_doc(&self) -> IntervalDoc {
        IntervalDoc {
            model: self.model,
            intervals: self
                .iter()
                .map(|(task, iv)| TaskInterval {
                    task,
                    begin: iv.begin,
                    end: iv.end,
                })
                .collect(),
        }
    }

    pub fn from_doc(doc: IntervalDoc) -> Self {
        IntervalAssignment {
            model: doc.model,
            intervals: doc
                .intervals
                .into_iter()
                .map(|t| (t.task, Interval::new(t.begin, t.end)))
                .collect(),
        }
    }
}

pub fn classic_let(ts: &TaskSet) -> IntervalAssignment {
    IntervalAssignment {
        model: IntervalModel::Let,
        intervals: ts
            .tasks()
            .iter()
            .map(|t| (t.id, Interval::new(0, t.period)))
            .collect(),
    }
}

/// `begin` is the minimum earliest reading point and `end` the maximum
/// last writing point over all jobs of the hyperperiod.
pub fn schedule_aware(schedule: &Schedule) -> IntervalAssignment {
    let mut intervals: BTreeMap<TaskId, Interval> = BTreeMap::new();
    for e in execution_intervals(schedule) {
        intervals
            .entry(e.task)
            .and_modify(|iv| {
                iv.begin = iv.begin.min(e.erp);
                iv.end = iv.end.max(e.lwp);
            })
            .or_insert(Interval::new(e.erp, e.lwp));
    }
    IntervalAssignment {
        model: IntervalModel::ScheduleAware,
        intervals,
    }
}

/// Reads at release; writes at the response-time bound observed on the
/// schedule (maximum last writing point).
pub fn wcrt_let(schedule: &Schedule) -> IntervalAssignment {
    let sa = schedule_aware(schedule);
    IntervalAssignment {
        model: IntervalModel::WcrtLet,
        intervals: sa
            .intervals
            .into_iter()
            .map(|(t, iv)| (t, Interval::new(0, iv.end)))
            .collect(),
    }
}

/// Intervals for `model`; the schedule is only consulted for the
/// schedule-derived models.
pub fn assignment_for(model: IntervalModel, ts: &TaskSet, schedule: &Schedule) -> IntervalAssignment {
    match model {
        IntervalModel::Let => classic_let(ts),
        IntervalModel::WcrtLet => wcrt_let(schedule),
        IntervalModel::ScheduleAware => schedule_aware(schedule),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedgen::{schedule_edf, JldSet, Jld, JobId};
    use crate::task_model::Task;

    fn running_example() -> TaskSet {
        TaskSet::new(
            "tick",
            1,
            vec![Task::new(1, 1, 3, 0), Task::new(2, 1, 5, 0), Task::new(3, 1, 3, 0)],
            vec![(1, 2), (2, 3)],
            None,
        )
        .unwrap()
    }

    fn pairs(a: &IntervalAssignment) -> Vec<(TaskId, Tick, Tick)> {
        a.iter().map(|(t, iv)| (t, iv.begin, iv.end)).collect()
    }

    #[test]
    fn classic_let_spans_period() {
        let a = classic_let(&running_example());
        assert_eq!(pairs(&a), vec![(1, 0, 3), (2, 0, 5), (3, 0, 3)]);
        assert!(a.validate(&running_example()).is_ok());
    }

    #[test]
    fn schedule_aware_plain_edf() {
        let ts = running_example();
        let s = schedule_edf(&ts, &JldSet::new()).unwrap();
        let a = schedule_aware(&s);
        assert_eq!(pairs(&a), vec![(1, 0, 1), (2, 0, 3), (3, 1, 2)]);
        assert!(a.covers(&s).is_ok());
        assert_eq!(a, schedule_aware(&s));
    }

    #[test]
    fn schedule_aware_with_jlds() {
        let ts = running_example();
        let jlds: JldSet = [
            Jld::new(JobId::new(2, 0), JobId::new(1, 0)),
            Jld::new(JobId::new(1, 0), JobId::new(3, 0)),
            Jld::new(JobId::new(2, 2), JobId::new(3, 3)),
        ]
        .into_iter()
        .collect();
        let s = schedule_edf(&ts, &jlds).unwrap();
        assert_eq!(pairs(&schedule_aware(&s)), vec![(1, 0, 2), (2, 0, 1), (3, 1, 3)]);
    }

    #[test]
    fn wcrt_let_from_schedule() {
        let ts = running_example();
        let s = schedule_edf(&ts, &JldSet::new()).unwrap();
        let a = wcrt_let(&s);
        assert_eq!(a.get(2), Some(Interval::new(0, 3)));
        assert_eq!(a.get(1), Some(Interval::new(0, 1)));
        assert_eq!(a.model(), IntervalModel::WcrtLet);
    }

    #[test]
    fn isolated_task_gets_wcet_window() {
        let ts = TaskSet::new("tick", 2, vec![Task::new(1, 2, 6, 0), Task::new(2, 3, 4, 1)], vec![], None)
            .unwrap();
        let s = schedule_edf(&ts, &JldSet::new()).unwrap();
        assert_eq!(schedule_aware(&s).get(1), Some(Interval::new(0, 2)));
        assert_eq!(wcrt_let(&s).get(2), Some(Interval::new(0, 3)));
    }

    #[test]
    fn validation_errors() {
        let ts = running_example();
        let mut m = BTreeMap::new();
        m.insert(1, Interval::new(0, 3));
        m.insert(2, Interval::new(2, 2));
        m.insert(3, Interval::new(0, 3));
        let a = IntervalAssignment::new(IntervalModel::ScheduleAware, m.clone());
        assert!(matches!(a.validate(&ts), Err(IntervalError::OutOfRange { task: 2, .. })));
        m.remove(&3);
        m.insert(2, Interval::new(0, 5));
        let a = IntervalAssignment::new(IntervalModel::ScheduleAware, m);
        assert!(matches!(a.validate(&ts), Err(IntervalError::Missing(3))));
    }

    #[test]
    fn doc_round_trip() {
        let a = classic_let(&running_example());
        let text = serde_json::to_string(&a.to_doc()).unwrap();
        assert!(text.contains(r#""model":"let""#));
        let back = IntervalAssignment::from_doc(serde_json::from_str(&text).unwrap());
        assert_eq!(a, back);
    }
}

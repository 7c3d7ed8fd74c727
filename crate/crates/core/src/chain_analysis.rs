//! Publishing/reading points and worst-case end-to-end latencies of a chain.
//!
//! For a writer/reader pair with communication intervals `I_W`, `I_R`, the
//! writer publishes at `k·T_W + end(I_W)` and the reader samples at
//! `k·T_R + begin(I_R)`. With `T_W <= T_R` every read of the reader is a
//! reading point and its publishing point is the last write at or before
//! it. With `T_W >= T_R` every write is a publishing point and its reading
//! point is the next read. Classic LET is the special case `begin = 0`,
//! `end = T`.
//!
//! Latencies are computed on the steady-state (hyperperiodic) timeline: the
//! reading points of the chain's last pair that fall into one chain
//! hyperperiod are walked back to the publishing point of the chain head,
//! paths that share a head publishing point with the preceding path are
//! dropped, and the remaining basic paths are shifted so that every point
//! is non-negative.

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{AnalysisError, IntervalError, ModelError};
use crate::interval_model::{Interval, IntervalAssignment, IntervalModel};
use crate::task_model::{Chain, TaskId, TaskSet, Tick};

fn floor_div(a: Tick, b: Tick) -> Tick {
    Integer::div_floor(&a, &b)
}

fn ceil_div(a: Tick, b: Tick) -> Tick {
    -Integer::div_floor(&-a, &b)
}

/// A communicating writer/reader pair with its two intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CommPair {
    pub writer_period: Tick,
    pub writer: Interval,
    pub reader_period: Tick,
    pub reader: Interval,
}

/// A point returned by the closed-form formulas. Points that fall before
/// the first release are not part of the timeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Point {
    At(Tick),
    BeforeHorizon,
}

impl Point {
    pub fn tick(self) -> Option<Tick> {
        match self {
            Point::At(t) => Some(t),
            Point::BeforeHorizon => None,
        }
    }

    fn from_raw(t: Tick) -> Point {
        if t < 0 {
            Point::BeforeHorizon
        } else {
            Point::At(t)
        }
    }
}

impl CommPair {
    pub fn new(writer_period: Tick, writer: Interval, reader_period: Tick, reader: Interval) -> Self {
        CommPair {
            writer_period,
            writer,
            reader_period,
            reader,
        }
    }

    /// Distance from the writer's last write to its next release.
    fn write_slack(&self) -> Tick {
        self.writer_period - self.writer.end
    }

    fn writer_is_faster(&self) -> bool {
        self.writer_period <= self.reader_period
    }

    /// Latest write instant `<= t` on the unbounded periodic timeline.
    pub fn last_write_at_or_before(&self, t: Tick) -> Tick {
        let tw = self.writer_period;
        let slack = self.write_slack();
        floor_div(t + slack, tw) * tw - slack
    }

    /// Earliest read instant `>= t` on the unbounded periodic timeline.
    pub fn first_read_at_or_after(&self, t: Tick) -> Tick {
        let tr = self.reader_period;
        let b = self.reader.begin;
        ceil_div(t - b, tr) * tr + b
    }

    /// Publishing point `n` without horizon clipping.
    pub fn publishing_point_raw(&self, n: i64) -> Tick {
        if self.writer_is_faster() {
            self.last_write_at_or_before(n * self.reader_period + self.reader.begin)
        } else {
            n * self.writer_period - self.write_slack()
        }
    }

    /// Reading point `n` without horizon clipping.
    pub fn reading_point_raw(&self, n: i64) -> Tick {
        if self.writer_is_faster() {
            n * self.reader_period + self.reader.begin
        } else {
            self.first_read_at_or_after(n * self.writer_period - self.write_slack())
        }
    }

    pub fn publishing_point(&self, n: u64) -> Point {
        Point::from_raw(self.publishing_point_raw(n as i64))
    }

    pub fn reading_point(&self, n: u64) -> Point {
        Point::from_raw(self.reading_point_raw(n as i64))
    }

    /// Number of point indices after which the pattern repeats, shifted by
    /// the pair hyperperiod.
    pub fn pattern_step(&self) -> i64 {
        self.writer_period.lcm(&self.reader_period) / self.writer_period.max(self.reader_period)
    }

    pub fn hyperperiod(&self) -> Tick {
        self.writer_period.lcm(&self.reader_period)
    }
}

/// Publishing and reading point of one writer/reader pair on a basic path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathPoint {
    pub writer: TaskId,
    pub reader: TaskId,
    pub publish: Tick,
    pub read: Tick,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasicPath {
    pub n: usize,
    pub points: Vec<PathPoint>,
    pub theta: Tick,
    pub phi: Tick,
    pub alpha: Tick,
    pub delta: Tick,
}

impl BasicPath {
    pub fn first_publish(&self) -> Tick {
        self.points[0].publish
    }

    pub fn last_read(&self) -> Tick {
        self.points.last().expect("non-empty path").read
    }
}

/// A chain together with the periods and intervals of its tasks.
#[derive(Debug, Clone)]
pub struct ChainView {
    tasks: Vec<TaskId>,
    periods: Vec<Tick>,
    intervals: Vec<Interval>,
    hyperperiod: Tick,
}

impl ChainView {
    pub fn new(ts: &TaskSet, chain: &Chain, intervals: &IntervalAssignment) -> Result<Self, AnalysisError> {
        let mut periods = Vec::with_capacity(chain.len());
        let mut ivs = Vec::with_capacity(chain.len());
        for &id in &chain.tasks {
            let t = ts.task(id).ok_or(ModelError::UnknownTask(id))?;
            let iv = intervals.get(id).ok_or(IntervalError::Missing(id))?;
            if iv.begin < 0 || iv.begin >= iv.end || iv.end > t.period {
                return Err(IntervalError::OutOfRange {
                    task: id,
                    begin: iv.begin,
                    end: iv.end,
                    period: t.period,
                }
                .into());
            }
            periods.push(t.period);
            ivs.push(iv);
        }
        if chain.len() < 2 {
            return Err(ModelError::ChainTooShort(chain.tasks.clone()).into());
        }
        Ok(ChainView {
            tasks: chain.tasks.clone(),
            periods,
            intervals: ivs,
            hyperperiod: chain.hyperperiod,
        })
    }

    pub fn pair(&self, pos: usize) -> CommPair {
        CommPair::new(
            self.periods[pos],
            self.intervals[pos],
            self.periods[pos + 1],
            self.intervals[pos + 1],
        )
    }

    pub fn hyperperiod(&self) -> Tick {
        self.hyperperiod
    }

    pub fn tasks(&self) -> &[TaskId] {
        &self.tasks
    }

    fn head(&self) -> Interval {
        self.intervals[0]
    }

    fn tail(&self) -> (Tick, Interval) {
        let last = self.tasks.len() - 1;
        (self.periods[last], self.intervals[last])
    }

    /// Reading points of the last pair, reduced into `[0, HP_E)`.
    fn terminal_reads(&self) -> Vec<Tick> {
        let last = self.pair(self.tasks.len() - 2);
        let hp = self.hyperperiod;
        let count = hp / last.writer_period.max(last.reader_period);
        let mut qs: Vec<Tick> = (0..count)
            .map(|n| last.reading_point_raw(n).rem_euclid(hp))
            .collect();
        qs.sort_unstable();
        qs.dedup();
        qs
    }

    /// Walks back from a read of the last task to the head's publishing
    /// point, returning the points in chain order.
    fn walk_back(&self, terminal_read: Tick) -> Vec<PathPoint> {
        let pairs = self.tasks.len() - 1;
        let mut points = Vec::with_capacity(pairs);
        let mut read = terminal_read;
        for pos in (0..pairs).rev() {
            let pair = self.pair(pos);
            let publish = pair.last_write_at_or_before(read);
            let reading_point = pair.first_read_at_or_after(publish);
            debug_assert!(reading_point <= read);
            points.push(PathPoint {
                writer: self.tasks[pos],
                reader: self.tasks[pos + 1],
                publish,
                read: reading_point,
            });
            // The publishing job read its own input one interval earlier.
            read = publish - self.intervals[pos].len();
        }
        points.reverse();
        points
    }
}

/// Basic paths of one chain hyperperiod in steady state.
pub fn enumerate_basic_paths(view: &ChainView) -> Vec<BasicPath> {
    let hp = view.hyperperiod;
    let walks: Vec<Vec<PathPoint>> = view
        .terminal_reads()
        .into_iter()
        .map(|q| view.walk_back(q))
        .collect();
    let heads: Vec<Tick> = walks.iter().map(|w| w[0].publish).collect();
    let m = walks.len();
    let mut kept: Vec<Vec<PathPoint>> = Vec::new();
    for (i, w) in walks.into_iter().enumerate() {
        let prev = if i == 0 { heads[m - 1] - hp } else { heads[i - 1] };
        if heads[i] != prev {
            kept.push(w);
        }
    }
    debug_assert!(!kept.is_empty());

    let min = kept.iter().map(|w| w[0].publish).min().expect("at least one path");
    let shift = if min < 0 { ceil_div(-min, hp) * hp } else { 0 };
    for w in &mut kept {
        for p in w.iter_mut() {
            p.publish += shift;
            p.read += shift;
        }
    }

    let k = kept.len();
    let terminals: Vec<Tick> = kept.iter().map(|w| w.last().unwrap().read).collect();
    kept.into_iter()
        .enumerate()
        .map(|(n, points)| {
            let theta = terminals[n] - points[0].publish;
            let next = if n + 1 < k { terminals[n + 1] } else { terminals[0] + hp };
            let mut path = BasicPath {
                n,
                points,
                theta,
                phi: next - terminals[n],
                alpha: 0,
                delta: 0,
            };
            path.alpha = data_age(view, &path);
            path.delta = reaction_latency(view, &path);
            path
        })
        .collect()
}

/// Data age of a basic path: from the head's read of the input to the last
/// output of the tail based on it.
pub fn data_age(view: &ChainView, path: &BasicPath) -> Tick {
    let head = view.head();
    let (tail_period, tail) = view.tail();
    head.len() + path.theta + path.phi - tail.begin - (tail_period - tail.end)
}

/// Reaction latency of a basic path: from the head's read of the input to
/// the first output of the tail based on it.
pub fn reaction_latency(view: &ChainView, path: &BasicPath) -> Tick {
    let (_, tail) = view.tail();
    view.head().len() + path.theta + tail.len()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainLatencies {
    pub chain: usize,
    pub tasks: Vec<TaskId>,
    pub hyperperiod: Tick,
    pub model: IntervalModel,
    pub alpha: Tick,
    pub delta: Tick,
    pub paths: Vec<BasicPath>,
}

/// Worst-case data age and reaction latency of chain `chain` of `ts`.
pub fn worst_case(
    ts: &TaskSet,
    chain: usize,
    intervals: &IntervalAssignment,
) -> Result<ChainLatencies, AnalysisError> {
    let c = &ts.chains()[chain];
    let view = ChainView::new(ts, c, intervals)?;
    let paths = enumerate_basic_paths(&view);
    Ok(ChainLatencies {
        chain,
        tasks: c.tasks.clone(),
        hyperperiod: c.hyperperiod,
        model: intervals.model(),
        alpha: paths.iter().map(|p| p.alpha).max().expect("path"),
        delta: paths.iter().map(|p| p.delta).max().expect("path"),
        paths,
    })
}

/// `(alpha, delta)` only, for callers that do not need the path list.
pub fn worst_pair(view: &ChainView) -> (Tick, Tick) {
    enumerate_basic_paths(view)
        .iter()
        .fold((Tick::MIN, Tick::MIN), |(a, d), p| (a.max(p.alpha), d.max(p.delta)))
}

pub fn analyze_all(ts: &TaskSet, intervals: &IntervalAssignment) -> Result<Vec<ChainLatencies>, AnalysisError> {
    (0..ts.chains().len()).map(|c| worst_case(ts, c, intervals)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval_model::classic_let;
    use crate::task_model::Task;
    use std::collections::BTreeMap;

    fn iv(b: Tick, e: Tick) -> Interval {
        Interval::new(b, e)
    }

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

    fn assignment(model: IntervalModel, list: &[(TaskId, Tick, Tick)]) -> IntervalAssignment {
        IntervalAssignment::new(
            model,
            list.iter().map(|&(t, b, e)| (t, iv(b, e))).collect::<BTreeMap<_, _>>(),
        )
    }

    #[test]
    fn classic_let_points_of_running_example() {
        let p12 = CommPair::new(3, iv(0, 3), 5, iv(0, 5));
        assert_eq!(p12.publishing_point(1), Point::At(3));
        assert_eq!(p12.reading_point(1), Point::At(5));
        let p23 = CommPair::new(5, iv(0, 5), 3, iv(0, 3));
        assert_eq!(p23.publishing_point(2), Point::At(10));
        assert_eq!(p23.reading_point(2), Point::At(12));
    }

    #[test]
    fn schedule_aware_points() {
        let p = CommPair::new(3, iv(0, 1), 5, iv(0, 3));
        assert_eq!(p.publishing_point(1), Point::At(4));
        let p = CommPair::new(5, iv(0, 3), 3, iv(1, 2));
        assert_eq!(p.reading_point(1), Point::At(4));
        assert_eq!(p.publishing_point(0), Point::BeforeHorizon);
    }

    #[test]
    fn equal_periods_both_branches_agree() {
        let p = CommPair::new(4, iv(1, 3), 4, iv(0, 2));
        for n in 0..12i64 {
            let thm2_p = n * 4 - (4 - 3);
            let thm2_q = p.first_read_at_or_after(thm2_p);
            assert_eq!(p.publishing_point_raw(n), thm2_p);
            assert_eq!(p.reading_point_raw(n), thm2_q);
        }
    }

    #[test]
    fn running_example_worst_cases() {
        let ts = running_example();
        let l = worst_case(&ts, 0, &classic_let(&ts)).unwrap();
        assert_eq!((l.alpha, l.delta), (15, 15));
        let sa = assignment(IntervalModel::ScheduleAware, &[(1, 0, 1), (2, 0, 3), (3, 1, 2)]);
        let l = worst_case(&ts, 0, &sa).unwrap();
        assert_eq!((l.alpha, l.delta), (11, 8));
        let jld = assignment(IntervalModel::ScheduleAware, &[(1, 0, 2), (2, 0, 1), (3, 1, 3)]);
        let l = worst_case(&ts, 0, &jld).unwrap();
        assert_eq!((l.alpha, l.delta), (9, 9));
    }

    #[test]
    fn input_read_at_twelve_has_age_eleven() {
        let ts = running_example();
        let sa = assignment(IntervalModel::ScheduleAware, &[(1, 0, 1), (2, 0, 3), (3, 1, 2)]);
        let l = worst_case(&ts, 0, &sa).unwrap();
        // Head reads at 12 and publishes at 13.
        let p = l.paths.iter().find(|p| p.first_publish() % 15 == 13).unwrap();
        assert_eq!(p.alpha, 11);
        assert_eq!(p.delta, 8);
    }

    #[test]
    fn path_points_are_ordered_and_phi_closes_hyperperiod() {
        let ts = running_example();
        let sa = assignment(IntervalModel::ScheduleAware, &[(1, 0, 1), (2, 0, 3), (3, 1, 2)]);
        let l = worst_case(&ts, 0, &sa).unwrap();
        let phis: Tick = l.paths.iter().map(|p| p.phi).sum();
        assert_eq!(phis, 15);
        for p in &l.paths {
            assert!(p.first_publish() >= 0);
            let mut last = Tick::MIN;
            for pt in &p.points {
                assert!(pt.publish >= last && pt.read >= pt.publish);
                last = pt.read;
            }
            assert_eq!(p.theta, p.last_read() - p.first_publish());
        }
    }

    #[test]
    fn missing_interval_is_an_error() {
        let ts = running_example();
        let partial = assignment(IntervalModel::ScheduleAware, &[(1, 0, 1), (2, 0, 3)]);
        assert!(matches!(
            worst_case(&ts, 0, &partial),
            Err(AnalysisError::Interval(IntervalError::Missing(3)))
        ));
    }
}

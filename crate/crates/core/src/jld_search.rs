//! Best-first search over added job-level dependencies.
//!
//! The root is the plain EDF schedule. Expanding a node targets one job of
//! one chain task and creates a child per candidate dependency between that
//! job and another job whose scheduling window overlaps it, in either
//! direction. Children are ranked by how much they postpone the target
//! task's interval begin and prepone its end. The frontier is ordered by
//! the number of chains whose latency improved over the root, then by that
//! interval key. The search stops when a child improves every chain or the
//! budget runs out, and returns the best admissible node seen.
//!
//! A node is admissible as a result when no chain is worse than at the
//! root on the chosen objective and no chain exceeds its classic-LET data
//! age or reaction latency.

use std::cell::RefCell;
use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::chain_analysis::{worst_pair, ChainView};
use crate::error::{AnalysisError, SearchError};
use crate::interval_model::{classic_let, schedule_aware, Interval, IntervalAssignment};
use crate::schedgen::{execution_intervals, schedule_edf, Jld, JldSet, JobId, Schedule};
use crate::task_model::{TaskId, TaskSet, Tick};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Age,
    Reaction,
    Both,
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::Age => "age",
            Objective::Reaction => "reaction",
            Objective::Both => "both",
        })
    }
}

impl FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "age" => Ok(Objective::Age),
            "reaction" => Ok(Objective::Reaction),
            "both" => Ok(Objective::Both),
            other => Err(format!("unknown objective '{other}'")),
        }
    }
}

/// Per-chain worst-case `(alpha, delta)`.
pub type Latency = (Tick, Tick);

impl Objective {
    /// Whether `now` counts as an improvement over `root` for one chain.
    pub fn improved(self, root: Latency, now: Latency) -> bool {
        match self {
            Objective::Age => now.0 < root.0,
            Objective::Reaction => now.1 < root.1,
            Objective::Both => now.0 <= root.0 && now.1 <= root.1 && (now.0 < root.0 || now.1 < root.1),
        }
    }

    fn not_worse(self, root: Latency, now: Latency) -> bool {
        match self {
            Objective::Age => now.0 <= root.0,
            Objective::Reaction => now.1 <= root.1,
            Objective::Both => now.0 <= root.0 && now.1 <= root.1,
        }
    }

    fn gain(self, root: Latency, now: Latency) -> f64 {
        let rel = |r: Tick, n: Tick| (r - n) as f64 / r as f64;
        match self {
            Objective::Age => rel(root.0, now.0),
            Objective::Reaction => rel(root.1, now.1),
            Objective::Both => rel(root.0, now.0) + rel(root.1, now.1),
        }
    }
}

/// Expansion-count and/or wall-clock limit. Expansion budgets make the
/// search deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub expansions: Option<u64>,
    pub wall: Option<Duration>,
}

impl Budget {
    pub fn expansions(n: u64) -> Self {
        Budget {
            expansions: Some(n),
            wall: None,
        }
    }

    pub fn wall(d: Duration) -> Self {
        Budget {
            expansions: None,
            wall: Some(d),
        }
    }
}

impl Default for Budget {
    fn default() -> Self {
        Budget::wall(Duration::from_secs(60))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchConfig {
    pub objective: Objective,
    pub budget: Budget,
    /// Candidate dependencies kept per direction and target job, nearest
    /// first.
    pub max_candidates: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            objective: Objective::Age,
            budget: Budget::default(),
            max_candidates: 12,
        }
    }
}

/// Ranking key of a child, relative to its parent: larger is better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct HeuristicKey {
    /// How far the target task's interval begin moved later.
    pub begin_gain: Tick,
    /// How far the target task's interval end moved earlier.
    pub end_gain: Tick,
    /// Reduction of the summed interval lengths over all tasks.
    pub length_gain: Tick,
}

impl HeuristicKey {
    pub fn between(parent: &IntervalAssignment, child: &IntervalAssignment, target: TaskId) -> Self {
        let p = parent.get(target).expect("target interval");
        let c = child.get(target).expect("target interval");
        HeuristicKey {
            begin_gain: c.begin - p.begin,
            end_gain: p.end - c.end,
            length_gain: parent.total_length() - child.total_length(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchNode {
    pub jlds: JldSet,
    pub schedule: Schedule,
    pub intervals: IntervalAssignment,
    pub latencies: Vec<Latency>,
    pub score: usize,
    pub key: HeuristicKey,
}

/// Shared state of one search: the task set, reference latencies and a
/// memo of per-chain results keyed by the intervals of the chain's tasks.
pub struct SearchContext<'a> {
    ts: &'a TaskSet,
    objective: Objective,
    max_candidates: usize,
    root: Vec<Latency>,
    classic: Vec<Latency>,
    memo: RefCell<HashMap<(usize, Vec<Interval>), Latency>>,
}

impl<'a> SearchContext<'a> {
    pub fn new(ts: &'a TaskSet, config: &SearchConfig) -> Result<(Self, SearchNode), SearchError> {
        let classic_iv = classic_let(ts);
        let mut ctx = SearchContext {
            ts,
            objective: config.objective,
            max_candidates: config.max_candidates,
            root: Vec::new(),
            classic: Vec::new(),
            memo: RefCell::new(HashMap::new()),
        };
        ctx.classic = ctx.latencies(&classic_iv)?;
        let schedule = schedule_edf(ts, &JldSet::new()).map_err(SearchError::InfeasibleRoot)?;
        let intervals = schedule_aware(&schedule);
        let lat = ctx.latencies(&intervals)?;
        ctx.root = lat.clone();
        let root = SearchNode {
            jlds: JldSet::new(),
            schedule,
            intervals,
            latencies: lat,
            score: 0,
            key: HeuristicKey::default(),
        };
        Ok((ctx, root))
    }

    pub fn root_latencies(&self) -> &[Latency] {
        &self.root
    }

    pub fn let_latencies(&self) -> &[Latency] {
        &self.classic
    }

    fn latencies(&self, intervals: &IntervalAssignment) -> Result<Vec<Latency>, AnalysisError> {
        let mut out = Vec::with_capacity(self.ts.chains().len());
        for (i, chain) in self.ts.chains().iter().enumerate() {
            let key: Vec<Interval> = chain
                .tasks
                .iter()
                .map(|&t| intervals.get(t).unwrap_or(Interval::new(0, 0)))
                .collect();
            let memo_key = (i, key);
            if let Some(&l) = self.memo.borrow().get(&memo_key) {
                out.push(l);
                continue;
            }
            let l = worst_pair(&ChainView::new(self.ts, chain, intervals)?);
            self.memo.borrow_mut().insert(memo_key, l);
            out.push(l);
        }
        Ok(out)
    }

    /// Number of chains improved over the root.
    pub fn evaluate(&self, latencies: &[Latency]) -> usize {
        self.root
            .iter()
            .zip(latencies)
            .filter(|(r, n)| self.objective.improved(**r, **n))
            .count()
    }

    pub fn admissible(&self, latencies: &[Latency]) -> bool {
        latencies
            .iter()
            .zip(&self.root)
            .zip(&self.classic)
            .all(|((&n, &r), &l)| self.objective.not_worse(r, n) && n.0 <= l.0 && n.1 <= l.1)
    }

    /// Summed normalized gain over the root.
    pub fn improvement(&self, latencies: &[Latency]) -> f64 {
        self.root
            .iter()
            .zip(latencies)
            .map(|(r, n)| self.objective.gain(*r, *n))
            .sum()
    }

    /// Schedules `jlds` and evaluates the result; `None` when infeasible.
    pub fn build(&self, jlds: JldSet) -> Result<Option<SearchNode>, AnalysisError> {
        let Ok(schedule) = schedule_edf(self.ts, &jlds) else {
            return Ok(None);
        };
        let intervals = schedule_aware(&schedule);
        let latencies = self.latencies(&intervals)?;
        let score = self.evaluate(&latencies);
        Ok(Some(SearchNode {
            jlds,
            schedule,
            intervals,
            latencies,
            score,
            key: HeuristicKey::default(),
        }))
    }

    /// Candidate dependencies around `target`, nearest first, implied ones
    /// removed.
    pub fn candidates(&self, node: &SearchNode, target: JobId) -> Vec<Jld> {
        let spans = job_spans(self.ts, &node.schedule);
        let Some(me) = spans.get(&target).copied() else {
            return Vec::new();
        };
        let wcet = |t: TaskId| self.ts.task(t).expect("task").wcet;
        let my_wcet = wcet(target.task);
        let mut before: Vec<(Tick, Jld)> = Vec::new();
        let mut after: Vec<(Tick, Jld)> = Vec::new();
        for (&other, &o) in &spans {
            if other.task == target.task || o.release >= me.deadline || me.release >= o.deadline {
                continue;
            }
            let other_wcet = wcet(other.task);
            // other ≺ target: useful only if other currently ends after
            // target starts, and target can still finish after it.
            if o.end > me.start && o.release + other_wcet + my_wcet <= me.deadline {
                before.push(((o.end - me.start).abs(), Jld::new(other, target)));
            }
            // target ≺ other
            if me.end > o.start && me.release + my_wcet + other_wcet <= o.deadline {
                after.push(((me.end - o.start).abs(), Jld::new(target, other)));
            }
        }
        before.sort();
        after.sort();
        before.truncate(self.max_candidates);
        after.truncate(self.max_candidates);
        let mut out: Vec<Jld> = before.into_iter().chain(after).map(|(_, j)| j).collect();
        out.retain(|j| !node.jlds.contains(j));
        out
    }
}

#[derive(Debug, Clone, Copy)]
struct JobSpan {
    release: Tick,
    deadline: Tick,
    start: Tick,
    end: Tick,
}

fn job_spans(ts: &TaskSet, schedule: &Schedule) -> std::collections::BTreeMap<JobId, JobSpan> {
    execution_intervals(schedule)
        .into_iter()
        .map(|e| {
            let period = ts.task(e.task).expect("task").period;
            let release = e.job as Tick * period;
            (
                e.job_id(),
                JobSpan {
                    release,
                    deadline: release + period,
                    start: release + e.erp,
                    end: release + e.lwp,
                },
            )
        })
        .collect()
}

/// Feasible children of `node` obtained by adding one dependency around
/// `target`. Children already present in `seen`, or whose schedule equals
/// the parent's, are dropped.
pub fn expand(
    ctx: &SearchContext<'_>,
    node: &SearchNode,
    target: JobId,
    seen: &mut HashSet<JldSet>,
) -> Result<Vec<SearchNode>, AnalysisError> {
    expand_until(ctx, node, target, seen, &|| false)
}

fn expand_until(
    ctx: &SearchContext<'_>,
    node: &SearchNode,
    target: JobId,
    seen: &mut HashSet<JldSet>,
    stop: &dyn Fn() -> bool,
) -> Result<Vec<SearchNode>, AnalysisError> {
    let mut children = Vec::new();
    for jld in ctx.candidates(node, target) {
        if stop() {
            break;
        }
        let jlds = node.jlds.with(jld);
        if !seen.insert(jlds.clone()) {
            continue;
        }
        let Some(mut child) = ctx.build(jlds)? else {
            continue;
        };
        if child.schedule.cores() == node.schedule.cores() {
            continue;
        }
        child.key = HeuristicKey::between(&node.intervals, &child.intervals, target.task);
        children.push(child);
    }
    Ok(children)
}

/// Orders children best first: larger key, then canonical dependency order.
pub fn heuristic_order(children: &mut [SearchNode]) {
    children.sort_by(|a, b| b.key.cmp(&a.key).then_with(|| a.jlds.cmp(&b.jlds)));
}

/// Jobs of `task` that attain its interval begin and end, in that order.
fn critical_jobs(node: &SearchNode, task: TaskId) -> Vec<JobId> {
    let iv = node.intervals.get(task).expect("interval");
    let eis: Vec<_> = execution_intervals(&node.schedule)
        .into_iter()
        .filter(|e| e.task == task)
        .collect();
    let mut out = Vec::new();
    if let Some(e) = eis.iter().find(|e| e.erp == iv.begin) {
        out.push(e.job_id());
    }
    if let Some(e) = eis.iter().find(|e| e.lwp == iv.end) {
        if !out.contains(&e.job_id()) {
            out.push(e.job_id());
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Termination {
    /// A node improved every chain.
    Solution,
    /// Expansion or wall-clock budget exhausted.
    Budget,
    /// No unexplored node left.
    Exhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainRow {
    pub chain: usize,
    pub let_alpha: Tick,
    pub let_delta: Tick,
    pub root_alpha: Tick,
    pub root_delta: Tick,
    pub alpha: Tick,
    pub delta: Tick,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub objective: Objective,
    pub best: SearchNode,
    /// Dependencies added on top of the root (which has none).
    pub added: JldSet,
    pub table: Vec<ChainRow>,
    pub expanded: u64,
    pub evaluated: u64,
    pub terminated_by: Termination,
    pub elapsed: Duration,
}

struct Entry {
    score: usize,
    key: HeuristicKey,
    jlds: JldSet,
    cursor: usize,
}

impl Entry {
    fn rank(&self) -> (usize, HeuristicKey, Reverse<&JldSet>) {
        (self.score, self.key, Reverse(&self.jlds))
    }
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank()
            .cmp(&other.rank())
            .then_with(|| other.cursor.cmp(&self.cursor))
    }
}

pub fn search(ts: &TaskSet, config: &SearchConfig) -> Result<SearchResult, SearchError> {
    let started = Instant::now();
    let (ctx, root) = SearchContext::new(ts, config)?;
    let targets = ts.chain_tasks();
    let chains = ts.chains().len();
    let out_of_time = || config.budget.wall.is_some_and(|w| started.elapsed() >= w);

    let mut best = root.clone();
    let mut best_rank = (0usize, 0.0f64);
    let mut seen: HashSet<JldSet> = HashSet::new();
    seen.insert(JldSet::new());
    let mut frontier = BinaryHeap::new();
    frontier.push(Entry {
        score: 0,
        key: HeuristicKey::default(),
        jlds: JldSet::new(),
        cursor: 0,
    });
    let mut expanded = 0u64;
    let mut evaluated = 0u64;
    let mut terminated_by = Termination::Exhausted;

    'outer: while let Some(entry) = frontier.pop() {
        if targets.is_empty() {
            break;
        }
        if config.budget.expansions.is_some_and(|n| expanded >= n) || out_of_time() {
            terminated_by = Termination::Budget;
            break;
        }
        let node = if entry.jlds.is_empty() {
            root.clone()
        } else {
            ctx.build(entry.jlds.clone())?.expect("frontier nodes are feasible")
        };
        let task = targets[entry.cursor];
        expanded += 1;

        let mut children = Vec::new();
        for job in critical_jobs(&node, task) {
            children.extend(expand_until(&ctx, &node, job, &mut seen, &out_of_time)?);
        }
        evaluated += children.len() as u64;
        heuristic_order(&mut children);

        let mut solution: Option<(f64, usize)> = None;
        for (i, c) in children.iter().enumerate() {
            if !ctx.admissible(&c.latencies) {
                continue;
            }
            let rank = (c.score, ctx.improvement(&c.latencies));
            if rank.0 > best_rank.0 || (rank.0 == best_rank.0 && rank.1 > best_rank.1) {
                best_rank = rank;
                best = c.clone();
            }
            if c.score == chains && solution.is_none_or(|(g, _)| rank.1 > g) {
                solution = Some((rank.1, i));
            }
        }
        if solution.is_some() {
            terminated_by = Termination::Solution;
            break 'outer;
        }

        if entry.cursor + 1 < targets.len() {
            frontier.push(Entry {
                cursor: entry.cursor + 1,
                ..entry
            });
        }
        for c in children {
            frontier.push(Entry {
                score: c.score,
                key: c.key,
                jlds: c.jlds,
                cursor: 0,
            });
        }
        if out_of_time() {
            terminated_by = Termination::Budget;
            break;
        }
    }

    let table = (0..chains)
        .map(|i| ChainRow {
            chain: i,
            let_alpha: ctx.classic[i].0,
            let_delta: ctx.classic[i].1,
            root_alpha: ctx.root[i].0,
            root_delta: ctx.root[i].1,
            alpha: best.latencies[i].0,
            delta: best.latencies[i].1,
        })
        .collect();
    Ok(SearchResult {
        objective: config.objective,
        added: best.jlds.difference(&root.jlds),
        best,
        table,
        expanded,
        evaluated,
        terminated_by,
        elapsed: started.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
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

    fn config(expansions: u64) -> SearchConfig {
        SearchConfig {
            budget: Budget::expansions(expansions),
            ..SearchConfig::default()
        }
    }

    #[test]
    fn candidates_around_first_job_include_paper_dependency() {
        let ts = running_example();
        let (ctx, root) = SearchContext::new(&ts, &config(0)).unwrap();
        let c = ctx.candidates(&root, JobId::new(1, 0));
        assert!(c.contains(&Jld::new(JobId::new(2, 0), JobId::new(1, 0))));
        let mut seen = HashSet::new();
        let kids = expand(&ctx, &root, JobId::new(1, 0), &mut seen).unwrap();
        assert!(kids
            .iter()
            .any(|k| k.jlds.contains(&Jld::new(JobId::new(2, 0), JobId::new(1, 0)))));
    }

    #[test]
    fn existing_dependency_is_pruned() {
        let ts = running_example();
        let (ctx, root) = SearchContext::new(&ts, &config(0)).unwrap();
        let jld = Jld::new(JobId::new(2, 0), JobId::new(1, 0));
        let node = ctx.build(JldSet::new().with(jld)).unwrap().unwrap();
        assert!(!ctx.candidates(&node, JobId::new(1, 0)).contains(&jld));
        // τ1,0 already finishes before τ2,0 starts at the root.
        let implied = Jld::new(JobId::new(1, 0), JobId::new(2, 0));
        assert!(!ctx.candidates(&root, JobId::new(1, 0)).contains(&implied));
    }

    #[test]
    fn cyclic_child_is_discarded() {
        let ts = running_example();
        let (ctx, _) = SearchContext::new(&ts, &config(0)).unwrap();
        let a = Jld::new(JobId::new(2, 0), JobId::new(1, 0));
        let b = Jld::new(JobId::new(1, 0), JobId::new(2, 0));
        assert!(ctx.build(JldSet::new().with(a).with(b)).unwrap().is_none());
    }

    #[test]
    fn evaluate_scores() {
        let ts = running_example();
        let (ctx, root) = SearchContext::new(&ts, &config(0)).unwrap();
        assert_eq!(ctx.evaluate(&root.latencies), 0);
        assert_eq!(ctx.evaluate(&[(9, 9)]), 1);
        assert_eq!(ctx.evaluate(&[(12, 10)]), 0);
    }

    #[test]
    fn zero_budget_returns_root() {
        let ts = running_example();
        let r = search(&ts, &config(0)).unwrap();
        assert!(r.added.is_empty());
        assert_eq!(r.best.latencies, vec![(11, 8)]);
        assert_eq!(r.terminated_by, Termination::Budget);
    }

    #[test]
    fn search_reduces_age_of_running_example() {
        let ts = running_example();
        let r = search(&ts, &config(200)).unwrap();
        assert!(r.best.latencies[0].0 <= 9, "{:?}", r.best.latencies);
        assert!(schedule_edf(&ts, &r.best.jlds).is_ok());
    }

    #[test]
    fn key_prefers_postponed_begin_and_preponed_end() {
        let mk = |b, e| {
            IntervalAssignment::new(
                crate::interval_model::IntervalModel::ScheduleAware,
                [(1, Interval::new(b, e)), (2, Interval::new(0, 4))].into_iter().collect(),
            )
        };
        let parent = mk(0, 3);
        let a = HeuristicKey::between(&parent, &mk(1, 2), 1);
        let b = HeuristicKey::between(&parent, &mk(0, 3), 1);
        assert!(a > b);
    }

    #[test]
    fn shrinking_other_task_ranks_after_target_gain() {
        let mk = |b, e, other| {
            IntervalAssignment::new(
                crate::interval_model::IntervalModel::ScheduleAware,
                [(1, Interval::new(b, e)), (2, Interval::new(0, other))].into_iter().collect(),
            )
        };
        let parent = mk(0, 3, 4);
        let other_only = HeuristicKey::between(&parent, &mk(0, 3, 1), 1);
        let target = HeuristicKey::between(&parent, &mk(0, 2, 4), 1);
        assert!(target > other_only);
    }

    #[test]
    fn equal_keys_fall_back_to_dependency_order() {
        let ts = running_example();
        let (ctx, _) = SearchContext::new(&ts, &config(0)).unwrap();
        let a = Jld::new(JobId::new(2, 0), JobId::new(1, 0));
        let b = Jld::new(JobId::new(3, 0), JobId::new(1, 0));
        let mut kids: Vec<SearchNode> = [b, a]
            .into_iter()
            .map(|j| ctx.build(JldSet::new().with(j)).unwrap().unwrap())
            .collect();
        heuristic_order(&mut kids);
        assert!(kids[0].jlds.contains(&a));
    }
}

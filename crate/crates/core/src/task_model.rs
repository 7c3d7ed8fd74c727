//! Periodic tasks, the communication DAG and cause-effect chains.
//!
//! All temporal quantities are integer ticks. Every task is released at
//! `t = 0` and has an implicit deadline equal to its period. Tasks are
//! statically mapped to cores.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Time in ticks. Signed so that points before the analysis horizon can be
/// represented during intermediate computations.
pub type Tick = i64;

/// Task identifier, unique within a task set.
pub type TaskId = u32;

/// A periodic task with implicit deadline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    pub wcet: Tick,
    pub period: Tick,
    pub core: usize,
}

impl Task {
    pub fn new(id: TaskId, wcet: Tick, period: Tick, core: usize) -> Self {
        Task {
            id,
            wcet,
            period,
            core,
        }
    }

    pub fn utilization(&self) -> f64 {
        self.wcet as f64 / self.period as f64
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.period <= 0 || self.wcet <= 0 || self.wcet > self.period {
            return Err(ModelError::InvalidTask {
                id: self.id,
                wcet: self.wcet,
                period: self.period,
            });
        }
        Ok(())
    }
}

/// Least common multiple of a collection of periods.
pub fn hyperperiod<I>(periods: I) -> Result<Tick, ModelError>
where
    I: IntoIterator<Item = Tick>,
{
    let mut acc: Option<Tick> = None;
    for p in periods {
        if p <= 0 {
            return Err(ModelError::NonPositivePeriod(p));
        }
        acc = Some(match acc {
            None => p,
            Some(a) => num_integer::lcm(a, p),
        });
    }
    acc.ok_or(ModelError::EmptyPeriods)
}

/// Communication graph between tasks. Every arc stands for one shared
/// variable with a single writer (the arc's source).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommDag {
    nodes: Vec<TaskId>,
    arcs: Vec<(TaskId, TaskId)>,
}

impl CommDag {
    /// Builds the graph. Arcs are deduplicated and sorted; self loops and
    /// arcs touching unknown nodes are rejected. Acyclicity is checked
    /// separately by [`CommDag::topological_order`].
    pub fn new(
        nodes: impl IntoIterator<Item = TaskId>,
        arcs: impl IntoIterator<Item = (TaskId, TaskId)>,
    ) -> Result<Self, ModelError> {
        let nodes: BTreeSet<TaskId> = nodes.into_iter().collect();
        let mut set = BTreeSet::new();
        for (w, r) in arcs {
            if !nodes.contains(&w) {
                return Err(ModelError::UnknownTask(w));
            }
            if !nodes.contains(&r) {
                return Err(ModelError::UnknownTask(r));
            }
            if w == r {
                return Err(ModelError::Cycle { witness: vec![w, w] });
            }
            set.insert((w, r));
        }
        Ok(CommDag {
            nodes: nodes.into_iter().collect(),
            arcs: set.into_iter().collect(),
        })
    }

    pub fn nodes(&self) -> &[TaskId] {
        &self.nodes
    }

    pub fn arcs(&self) -> &[(TaskId, TaskId)] {
        &self.arcs
    }

    pub fn has_arc(&self, writer: TaskId, reader: TaskId) -> bool {
        self.arcs.binary_search(&(writer, reader)).is_ok()
    }

    fn successors(&self) -> BTreeMap<TaskId, Vec<TaskId>> {
        let mut succ: BTreeMap<TaskId, Vec<TaskId>> =
            self.nodes.iter().map(|&n| (n, Vec::new())).collect();
        for &(w, r) in &self.arcs {
            succ.get_mut(&w).expect("arc source is a node").push(r);
        }
        succ
    }

    /// Kahn's algorithm; on failure returns a cycle found among the
    /// remaining nodes.
    pub fn topological_order(&self) -> Result<Vec<TaskId>, ModelError> {
        let succ = self.successors();
        let mut indeg: BTreeMap<TaskId, usize> = self.nodes.iter().map(|&n| (n, 0)).collect();
        for &(_, r) in &self.arcs {
            *indeg.get_mut(&r).expect("arc target is a node") += 1;
        }
        let mut ready: BTreeSet<TaskId> = indeg
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(&n, _)| n)
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(n) = ready.pop_first() {
            order.push(n);
            for &m in &succ[&n] {
                let d = indeg.get_mut(&m).expect("node");
                *d -= 1;
                if *d == 0 {
                    ready.insert(m);
                }
            }
        }
        if order.len() == self.nodes.len() {
            return Ok(order);
        }
        // Every leftover node has a leftover predecessor; walk backwards
        // until a node repeats.
        let left: BTreeSet<TaskId> = indeg
            .iter()
            .filter(|(_, &d)| d > 0)
            .map(|(&n, _)| n)
            .collect();
        let mut pred: BTreeMap<TaskId, TaskId> = BTreeMap::new();
        for &(w, r) in &self.arcs {
            if left.contains(&w) && left.contains(&r) {
                pred.entry(r).or_insert(w);
            }
        }
        let mut walk = vec![*left.first().expect("cycle leaves nodes")];
        loop {
            let cur = *walk.last().unwrap();
            let p = pred[&cur];
            if let Some(pos) = walk.iter().position(|&x| x == p) {
                let mut cycle: Vec<TaskId> = walk[pos..].to_vec();
                cycle.reverse();
                cycle.push(cycle[0]);
                return Err(ModelError::Cycle { witness: cycle });
            }
            walk.push(p);
        }
    }

    /// Every path from a source node (in-degree 0) to a sink node
    /// (out-degree 0), sorted lexicographically. Isolated nodes yield
    /// single-task paths, which callers usually discard.
    pub fn source_sink_paths(&self) -> Result<Vec<Vec<TaskId>>, ModelError> {
        self.topological_order()?;
        let succ = self.successors();
        let has_pred: BTreeSet<TaskId> = self.arcs.iter().map(|&(_, r)| r).collect();
        let mut paths = Vec::new();
        for &src in self.nodes.iter().filter(|n| !has_pred.contains(n)) {
            let mut stack = vec![src];
            walk_paths(&succ, &mut stack, &mut paths);
        }
        paths.sort();
        Ok(paths)
    }
}

fn walk_paths(
    succ: &BTreeMap<TaskId, Vec<TaskId>>,
    stack: &mut Vec<TaskId>,
    out: &mut Vec<Vec<TaskId>>,
) {
    let cur = *stack.last().unwrap();
    let next = &succ[&cur];
    if next.is_empty() {
        out.push(stack.clone());
        return;
    }
    for &n in next {
        stack.push(n);
        walk_paths(succ, stack, out);
        stack.pop();
    }
}

/// A linear cause-effect chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chain {
    pub tasks: Vec<TaskId>,
    pub hyperperiod: Tick,
}

impl Chain {
    pub fn head(&self) -> TaskId {
        self.tasks[0]
    }

    pub fn tail(&self) -> TaskId {
        *self.tasks.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    /// Consecutive writer/reader pairs along the chain.
    pub fn pairs(&self) -> impl Iterator<Item = (TaskId, TaskId)> + '_ {
        self.tasks.windows(2).map(|w| (w[0], w[1]))
    }
}

/// Every source-to-sink path of `dag` with at least two tasks, as chains.
pub fn extract_chains(dag: &CommDag, tasks: &[Task]) -> Result<Vec<Chain>, ModelError> {
    let periods: BTreeMap<TaskId, Tick> = tasks.iter().map(|t| (t.id, t.period)).collect();
    dag.source_sink_paths()?
        .into_iter()
        .filter(|p| p.len() >= 2)
        .map(|p| {
            let hp = hyperperiod(p.iter().map(|id| {
                periods.get(id).copied().ok_or(ModelError::UnknownTask(*id))
            }).collect::<Result<Vec<_>, _>>()?)?;
            Ok(Chain {
                tasks: p,
                hyperperiod: hp,
            })
        })
        .collect()
}

/// Serialized form of a task set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskSetDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub tick_unit: String,
    pub num_cores: usize,
    pub tasks: Vec<Task>,
    pub arcs: Vec<(TaskId, TaskId)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chains: Option<Vec<Vec<TaskId>>>,
}

/// A validated task set. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSet {
    name: Option<String>,
    tick_unit: String,
    num_cores: usize,
    tasks: Vec<Task>,
    index: BTreeMap<TaskId, usize>,
    dag: CommDag,
    chains: Vec<Chain>,
    hyperperiod: Tick,
}

impl TaskSet {
    /// Validates tasks, arcs and chains. When `chains` is `None` they are
    /// derived from the DAG.
    pub fn new(
        tick_unit: impl Into<String>,
        num_cores: usize,
        mut tasks: Vec<Task>,
        arcs: Vec<(TaskId, TaskId)>,
        chains: Option<Vec<Vec<TaskId>>>,
    ) -> Result<Self, ModelError> {
        if tasks.is_empty() {
            return Err(ModelError::EmptyTaskSet);
        }
        if num_cores == 0 {
            return Err(ModelError::NoCores);
        }
        tasks.sort_by_key(|t| t.id);
        let mut index = BTreeMap::new();
        for (i, t) in tasks.iter().enumerate() {
            t.validate()?;
            if t.core >= num_cores {
                return Err(ModelError::InvalidCore {
                    id: t.id,
                    core: t.core,
                    num_cores,
                });
            }
            if index.insert(t.id, i).is_some() {
                return Err(ModelError::DuplicateTask(t.id));
            }
        }
        let dag = CommDag::new(tasks.iter().map(|t| t.id), arcs)?;
        dag.topological_order()?;
        let chains = match chains {
            None => extract_chains(&dag, &tasks)?,
            Some(list) => list
                .into_iter()
                .map(|seq| {
                    if seq.len() < 2 {
                        return Err(ModelError::ChainTooShort(seq));
                    }
                    let distinct: BTreeSet<_> = seq.iter().collect();
                    if distinct.len() != seq.len() {
                        return Err(ModelError::ChainRepeatsTask(seq));
                    }
                    for w in seq.windows(2) {
                        if !dag.has_arc(w[0], w[1]) {
                            return Err(ModelError::ChainArcMissing {
                                writer: w[0],
                                reader: w[1],
                            });
                        }
                    }
                    let hp = hyperperiod(seq.iter().map(|id| tasks[index[id]].period))?;
                    Ok(Chain {
                        tasks: seq,
                        hyperperiod: hp,
                    })
                })
                .collect::<Result<Vec<_>, _>>()?,
        };
        let hp = hyperperiod(tasks.iter().map(|t| t.period))?;
        Ok(TaskSet {
            name: None,
            tick_unit: tick_unit.into(),
            num_cores,
            tasks,
            index,
            dag,
            chains,
            hyperperiod: hp,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn from_doc(doc: TaskSetDoc) -> Result<Self, ModelError> {
        let ts = TaskSet::new(doc.tick_unit, doc.num_cores, doc.tasks, doc.arcs, doc.chains)?;
        Ok(match doc.name {
            Some(n) => ts.with_name(n),
            None => ts,
        })
    }

    pub fn to_doc(&self) -> TaskSetDoc {
        TaskSetDoc {
            name: self.name.clone(),
            tick_unit: self.tick_unit.clone(),
            num_cores: self.num_cores,
            tasks: self.tasks.clone(),
            arcs: self.dag.arcs().to_vec(),
            chains: Some(self.chains.iter().map(|c| c.tasks.clone()).collect()),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let doc: TaskSetDoc = serde_json::from_str(text)?;
        TaskSet::from_doc(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("task set serializes")
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn tick_unit(&self) -> &str {
        &self.tick_unit
    }

    pub fn num_cores(&self) -> usize {
        self.num_cores
    }

    /// Tasks sorted by id.
    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn dag(&self) -> &CommDag {
        &self.dag
    }

    pub fn chains(&self) -> &[Chain] {
        &self.chains
    }

    pub fn hyperperiod(&self) -> Tick {
        self.hyperperiod
    }

    pub fn task(&self, id: TaskId) -> Option<&Task> {
        self.index.get(&id).map(|&i| &self.tasks[i])
    }

    /// Position of `id` in [`TaskSet::tasks`].
    pub fn task_index(&self, id: TaskId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn jobs_per_hyperperiod(&self, id: TaskId) -> Option<u32> {
        self.task(id).map(|t| (self.hyperperiod / t.period) as u32)
    }

    pub fn core_utilization(&self) -> Vec<f64> {
        let mut u = vec![0.0; self.num_cores];
        for t in &self.tasks {
            u[t.core] += t.utilization();
        }
        u
    }

    /// Plausibility warnings that do not invalidate the set.
    pub fn warnings(&self) -> Vec<String> {
        self.core_utilization()
            .iter()
            .enumerate()
            .filter(|(_, &u)| u > 1.0 + 1e-12)
            .map(|(c, u)| format!("core {c} utilization {u:.3} exceeds 1"))
            .collect()
    }

    /// Distinct task ids that appear in at least one chain.
    pub fn chain_tasks(&self) -> Vec<TaskId> {
        let set: BTreeSet<TaskId> = self.chains.iter().flat_map(|c| c.tasks.iter().copied()).collect();
        set.into_iter().collect()
    }
}

/// Assigns tasks to cores worst-fit by decreasing utilization: each task
/// goes to the currently least loaded core. Ties resolve to the lower task
/// id and the lower core index.
pub fn partition_worst_fit(tasks: &mut [Task], num_cores: usize) -> Vec<f64> {
    let mut order: Vec<usize> = (0..tasks.len()).collect();
    order.sort_by(|&a, &b| {
        let (ua, ub) = (tasks[a].utilization(), tasks[b].utilization());
        ub.partial_cmp(&ua)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(tasks[a].id.cmp(&tasks[b].id))
    });
    let mut load = vec![0.0f64; num_cores];
    for i in order {
        let core = (0..num_cores)
            .min_by(|&a, &b| load[a].partial_cmp(&load[b]).unwrap().then(a.cmp(&b)))
            .expect("at least one core");
        tasks[i].core = core;
        load[core] += tasks[i].utilization();
    }
    load
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dag(arcs: &[(TaskId, TaskId)]) -> CommDag {
        let nodes: BTreeSet<TaskId> = arcs.iter().flat_map(|&(a, b)| [a, b]).collect();
        CommDag::new(nodes, arcs.iter().copied()).unwrap()
    }

    fn unit_tasks(ids: &[TaskId]) -> Vec<Task> {
        ids.iter().map(|&id| Task::new(id, 1, 10, 0)).collect()
    }

    #[test]
    fn single_path_gives_one_chain() {
        let chains = extract_chains(&dag(&[(1, 2), (2, 3)]), &unit_tasks(&[1, 2, 3])).unwrap();
        assert_eq!(chains.len(), 1);
        assert_eq!(chains[0].tasks, vec![1, 2, 3]);
        assert_eq!(chains[0].hyperperiod, 10);
    }

    #[test]
    fn diamond_gives_two_chains() {
        let chains = extract_chains(
            &dag(&[(1, 2), (1, 3), (2, 4), (3, 4)]),
            &unit_tasks(&[1, 2, 3, 4]),
        )
        .unwrap();
        let seqs: Vec<_> = chains.iter().map(|c| c.tasks.clone()).collect();
        assert_eq!(seqs, vec![vec![1, 2, 4], vec![1, 3, 4]]);
    }

    #[test]
    fn two_cycle_is_rejected_with_witness() {
        let d = CommDag::new([1, 2], [(1, 2), (2, 1)]).unwrap();
        match d.source_sink_paths() {
            Err(ModelError::Cycle { witness }) => {
                assert_eq!(witness.first(), witness.last());
                assert!(witness.contains(&1) && witness.contains(&2));
            }
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn hyperperiod_examples() {
        assert_eq!(hyperperiod([3, 5, 3]).unwrap(), 15);
        assert_eq!(hyperperiod([7]).unwrap(), 7);
        assert_eq!(hyperperiod([10, 20, 50, 100]).unwrap(), 100);
        assert!(matches!(hyperperiod(Vec::<Tick>::new()), Err(ModelError::EmptyPeriods)));
        assert!(hyperperiod([3, 0]).is_err());
    }

    #[test]
    fn isolated_nodes_are_not_chains() {
        let ts = TaskSet::new("tick", 1, unit_tasks(&[1, 2, 3]), vec![(1, 2)], None).unwrap();
        assert_eq!(ts.chains().len(), 1);
    }

    #[test]
    fn task_invariants_checked() {
        let bad = vec![Task::new(1, 4, 3, 0)];
        assert!(matches!(
            TaskSet::new("tick", 1, bad, vec![], None),
            Err(ModelError::InvalidTask { .. })
        ));
        let dup = vec![Task::new(1, 1, 3, 0), Task::new(1, 1, 4, 0)];
        assert!(matches!(
            TaskSet::new("tick", 1, dup, vec![], None),
            Err(ModelError::DuplicateTask(1))
        ));
        let core = vec![Task::new(1, 1, 3, 2)];
        assert!(TaskSet::new("tick", 2, core, vec![], None).is_err());
    }

    #[test]
    fn explicit_chain_must_follow_arcs() {
        let r = TaskSet::new("tick", 1, unit_tasks(&[1, 2, 3]), vec![(1, 2)], Some(vec![vec![1, 3]]));
        assert!(matches!(r, Err(ModelError::ChainArcMissing { writer: 1, reader: 3 })));
        let r = TaskSet::new("tick", 1, unit_tasks(&[1, 2]), vec![(1, 2)], Some(vec![vec![1]]));
        assert!(matches!(r, Err(ModelError::ChainTooShort(_))));
    }

    #[test]
    fn json_round_trip_keeps_chains() {
        let text = r#"{"tick_unit":"ms","num_cores":1,
            "tasks":[{"id":1,"wcet":1,"period":3,"core":0},{"id":2,"wcet":1,"period":5,"core":0}],
            "arcs":[[1,2]]}"#;
        let ts = TaskSet::from_json(text).unwrap();
        assert_eq!(ts.chains()[0].hyperperiod, 15);
        let again = TaskSet::from_json(&ts.to_json()).unwrap();
        assert_eq!(ts, again);
    }

    #[test]
    fn worst_fit_balances_load() {
        let mut tasks = vec![
            Task::new(1, 5, 10, 0),
            Task::new(2, 4, 10, 0),
            Task::new(3, 3, 10, 0),
            Task::new(4, 2, 10, 0),
        ];
        let load = partition_worst_fit(&mut tasks, 2);
        assert_eq!(tasks.iter().map(|t| t.core).collect::<Vec<_>>(), vec![0, 1, 1, 0]);
        assert!((load[0] - 0.7).abs() < 1e-12 && (load[1] - 0.7).abs() < 1e-12);
    }
}

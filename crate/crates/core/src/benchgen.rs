//! Seeded random task sets.
//!
//! Periods are drawn from a weighted set, utilizations with UUniFast, and
//! tasks are partitioned worst-fit. Chains are sampled over a random total
//! order of the tasks so the resulting communication graph is acyclic; a
//! chain either uses a single period or mixes a bounded number of them.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::GenError;
use crate::task_model::{partition_worst_fit, Task, TaskId, TaskSet, Tick};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodWeight {
    pub ms: u32,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Range {
    pub min: usize,
    pub max: usize,
}

impl Range {
    pub fn new(min: usize, max: usize) -> Self {
        Range { min, max }
    }

    fn draw(&self, rng: &mut impl Rng) -> usize {
        rng.gen_range(self.min..=self.max)
    }

    pub fn mean(&self) -> f64 {
        (self.min + self.max) as f64 / 2.0
    }
}

/// Generation parameters. Period weights need not sum to one; they are
/// divided by their sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenProfile {
    pub name: String,
    #[serde(default = "default_ticks_per_ms")]
    pub ticks_per_ms: Tick,
    pub num_cores: usize,
    pub periods: Vec<PeriodWeight>,
    pub utilization_per_core: f64,
    pub tasks: Range,
    pub chains: Range,
    pub chain_length: Range,
    pub max_distinct_periods: usize,
    pub single_rate_probability: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_attempts")]
    pub max_attempts: usize,
}

fn default_ticks_per_ms() -> Tick {
    100
}

fn default_attempts() -> usize {
    100
}

/// Share of each period among all periodic runnables of the automotive
/// benchmark; the missing 15% are angle-synchronous and not modeled.
const AUTOMOTIVE_PERIODS: [(u32, f64); 9] = [
    (1, 0.03),
    (2, 0.02),
    (5, 0.02),
    (10, 0.25),
    (20, 0.25),
    (50, 0.03),
    (100, 0.20),
    (200, 0.01),
    (1000, 0.04),
];

impl GenProfile {
    pub fn automotive() -> Self {
        GenProfile {
            name: "automotive".into(),
            ticks_per_ms: default_ticks_per_ms(),
            num_cores: 2,
            periods: AUTOMOTIVE_PERIODS
                .iter()
                .map(|&(ms, weight)| PeriodWeight { ms, weight })
                .collect(),
            utilization_per_core: 0.83,
            tasks: Range::new(80, 100),
            chains: Range::new(34, 46),
            chain_length: Range::new(2, 5),
            max_distinct_periods: 3,
            single_rate_probability: 0.7,
            seed: 0,
            max_attempts: default_attempts(),
        }
    }

    pub fn synthetic() -> Self {
        GenProfile {
            name: "synthetic".into(),
            utilization_per_core: 0.76,
            tasks: Range::new(30, 50),
            chains: Range::new(12, 18),
            chain_length: Range::new(3, 6),
            max_distinct_periods: 5,
            single_rate_probability: 0.1,
            ..GenProfile::automotive()
        }
    }

    /// Built-in profile by name.
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "automotive" => Some(Self::automotive()),
            "synthetic" => Some(Self::synthetic()),
            _ => None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, GenError> {
        let p: Self = toml::from_str(text).map_err(|e| GenError::Parse(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn from_json(text: &str) -> Result<Self, GenError> {
        let p: Self = serde_json::from_str(text).map_err(|e| GenError::Parse(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    /// Reads a `.toml` or `.json` profile.
    pub fn load(path: &Path) -> Result<Self, GenError> {
        let text = std::fs::read_to_string(path).map_err(|e| GenError::Parse(format!("{}: {e}", path.display())))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json(&text),
            _ => Self::from_toml(&text),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::InvalidProfile(m.to_string()));
        if self.periods.is_empty() {
            return bad("empty period set");
        }
        if self.periods.iter().any(|p| p.ms == 0 || p.weight.is_nan() || p.weight <= 0.0) {
            return bad("periods and weights must be positive");
        }
        let distinct: BTreeSet<u32> = self.periods.iter().map(|p| p.ms).collect();
        if distinct.len() != self.periods.len() {
            return bad("duplicate period");
        }
        if self.ticks_per_ms < 1 || self.num_cores == 0 {
            return bad("ticks_per_ms and num_cores must be positive");
        }
        if !(self.utilization_per_core > 0.0 && self.utilization_per_core <= 1.0) {
            return bad("utilization_per_core must be in (0, 1]");
        }
        if self.tasks.min == 0 || self.tasks.min > self.tasks.max {
            return bad("task range");
        }
        if self.chains.min > self.chains.max {
            return bad("chain range");
        }
        if self.chain_length.min < 2 || self.chain_length.min > self.chain_length.max {
            return bad("chain length must be at least 2");
        }
        if self.chain_length.min > self.tasks.min {
            return bad("chains longer than the task set");
        }
        if self.max_distinct_periods == 0 {
            return bad("max_distinct_periods must be positive");
        }
        if !(0.0..=1.0).contains(&self.single_rate_probability) {
            return bad("single_rate_probability must be in [0, 1]");
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be positive");
        }
        Ok(())
    }

    /// Period probabilities after normalization, keyed by milliseconds.
    pub fn period_probabilities(&self) -> BTreeMap<u32, f64> {
        let total: f64 = self.periods.iter().map(|p| p.weight).sum();
        self.periods.iter().map(|p| (p.ms, p.weight / total)).collect()
    }
}

/// `n` utilizations summing to `total`, uniformly distributed on the
/// simplex.
pub fn uunifast(rng: &mut impl Rng, n: usize, total: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut sum = total;
    for i in 1..n {
        let next = sum * rng.gen::<f64>().powf(1.0 / (n - i) as f64);
        out.push(sum - next);
        sum = next;
    }
    out.push(sum);
    out
}

pub fn gen_taskset(profile: &GenProfile) -> Result<TaskSet, GenError> {
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    for _ in 0..profile.max_attempts {
        if let Some(ts) = attempt(profile, &mut rng)? {
            return Ok(ts.with_name(format!("{}-{}", profile.name, profile.seed)));
        }
    }
    Err(GenError::Exhausted(profile.max_attempts))
}

fn draw_period(profile: &GenProfile, rng: &mut impl Rng) -> Tick {
    let total: f64 = profile.periods.iter().map(|p| p.weight).sum();
    let mut x = rng.gen::<f64>() * total;
    for p in &profile.periods {
        if x < p.weight {
            return p.ms as Tick * profile.ticks_per_ms;
        }
        x -= p.weight;
    }
    profile.periods.last().expect("non-empty").ms as Tick * profile.ticks_per_ms
}

fn attempt(profile: &GenProfile, rng: &mut ChaCha8Rng) -> Result<Option<TaskSet>, GenError> {
    let n = profile.tasks.draw(rng);
    let total_util = profile.utilization_per_core * profile.num_cores as f64;
    let utils = uunifast(rng, n, total_util);
    if utils.iter().any(|&u| u > 1.0) {
        return Ok(None);
    }
    let mut tasks: Vec<Task> = utils
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let period = draw_period(profile, rng);
            let wcet = ((u * period as f64).ceil() as Tick).clamp(1, period);
            Task::new(i as TaskId + 1, wcet, period, 0)
        })
        .collect();
    // Implicit deadlines: preemptive EDF is feasible on a core iff its
    // utilization does not exceed one.
    let load = partition_worst_fit(&mut tasks, profile.num_cores);
    if load.iter().any(|&l| l > 1.0 + 1e-12) {
        return Ok(None);
    }

    let mut rank: Vec<TaskId> = tasks.iter().map(|t| t.id).collect();
    rank.shuffle(rng);
    let pos: BTreeMap<TaskId, usize> = rank.iter().enumerate().map(|(i, &t)| (t, i)).collect();
    let mut by_period: BTreeMap<Tick, Vec<TaskId>> = BTreeMap::new();
    for t in &tasks {
        by_period.entry(t.period).or_default().push(t.id);
    }

    let want = profile.chains.draw(rng);
    let mut chains: BTreeSet<Vec<TaskId>> = BTreeSet::new();
    let mut tries = 0;
    while chains.len() < want && tries < want * 50 {
        tries += 1;
        let len = profile.chain_length.draw(rng);
        let single = profile.max_distinct_periods == 1 || rng.gen_bool(profile.single_rate_probability);
        let mut chain = if single {
            single_rate_chain(&by_period, len, rng)
        } else {
            multi_rate_chain(&by_period, len, profile.max_distinct_periods, rng)
        };
        let Some(c) = chain.as_mut() else { continue };
        c.sort_by_key(|t| pos[t]);
        chains.insert(chain.expect("checked"));
    }
    if chains.len() < profile.chains.min {
        return Ok(None);
    }

    let arcs: BTreeSet<(TaskId, TaskId)> = chains.iter().flat_map(|c| c.windows(2).map(|w| (w[0], w[1]))).collect();
    let mut chains: Vec<Vec<TaskId>> = chains.into_iter().collect();
    chains.shuffle(rng);
    let ts = TaskSet::new(
        format!("{}us", 1000 / profile.ticks_per_ms.max(1)),
        profile.num_cores,
        tasks,
        arcs.into_iter().collect(),
        Some(chains),
    )
    .map_err(|e| GenError::InvalidProfile(e.to_string()))?;
    Ok(Some(ts))
}

fn single_rate_chain(by_period: &BTreeMap<Tick, Vec<TaskId>>, len: usize, rng: &mut impl Rng) -> Option<Vec<TaskId>> {
    let classes: Vec<&Vec<TaskId>> = by_period.values().filter(|v| v.len() >= len).collect();
    let class = classes.choose_weighted(rng, |v| v.len()).ok()?;
    Some(class.choose_multiple(rng, len).copied().collect())
}

fn multi_rate_chain(
    by_period: &BTreeMap<Tick, Vec<TaskId>>,
    len: usize,
    max_distinct: usize,
    rng: &mut impl Rng,
) -> Option<Vec<TaskId>> {
    let periods: Vec<Tick> = by_period.keys().copied().collect();
    if periods.len() < 2 {
        return None;
    }
    let k = rng.gen_range(2..=max_distinct.min(len).min(periods.len()).max(2));
    let chosen: Vec<Tick> = periods
        .choose_multiple_weighted(rng, k, |p| by_period[p].len() as f64)
        .ok()?
        .copied()
        .collect();
    // One task from every chosen period, the rest from their union.
    let mut picked: BTreeSet<TaskId> = chosen
        .iter()
        .map(|p| *by_period[p].choose(rng).expect("non-empty class"))
        .collect();
    let pool: Vec<TaskId> = chosen
        .iter()
        .flat_map(|p| by_period[p].iter().copied())
        .filter(|t| !picked.contains(t))
        .collect();
    let rest = len.saturating_sub(picked.len());
    if pool.len() < rest {
        return None;
    }
    picked.extend(pool.choose_multiple(rng, rest).copied());
    Some(picked.into_iter().collect())
}

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use salet_core::{Task, TaskId, TaskSet, Tick};

pub const SMALL_PERIODS: [Tick; 6] = [2, 3, 4, 5, 6, 10];

pub fn running_example() -> TaskSet {
    TaskSet::new(
        "tick",
        1,
        vec![Task::new(1, 1, 3, 0), Task::new(2, 1, 5, 0), Task::new(3, 1, 3, 0)],
        vec![(1, 2), (2, 3)],
        None,
    )
    .unwrap()
}

/// Two cores, at most 12 tasks and 4 chains, periods from [`SMALL_PERIODS`],
/// per-core utilization at most one.
pub fn small_set(seed: u64) -> TaskSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(3..=12);
    let mut load = [0.0f64; 2];
    let mut tasks = Vec::new();
    for id in 1..=n as TaskId {
        let period = *SMALL_PERIODS.choose(&mut rng).unwrap();
        let wcet = rng.gen_range(1..=(period / 2).max(1));
        let first = rng.gen_range(0..2usize);
        for w in [wcet, 1] {
            let u = w as f64 / period as f64;
            if let Some(core) = [first, 1 - first].into_iter().find(|&c| load[c] + u <= 1.0) {
                load[core] += u;
                tasks.push(Task::new(id, w, period, core));
                break;
            }
        }
    }
    let ids: Vec<TaskId> = tasks.iter().map(|t| t.id).collect();
    let mut rank = ids.clone();
    rank.shuffle(&mut rng);
    let mut chains: BTreeSet<Vec<TaskId>> = BTreeSet::new();
    let want = rng.gen_range(1..=4);
    for _ in 0..20 {
        if chains.len() >= want || ids.len() < 2 {
            break;
        }
        let len = rng.gen_range(2..=ids.len().min(4));
        let mut c: Vec<TaskId> = ids.choose_multiple(&mut rng, len).copied().collect();
        c.sort_by_key(|t| rank.iter().position(|r| r == t).unwrap());
        chains.insert(c);
    }
    let arcs: BTreeSet<(TaskId, TaskId)> = chains.iter().flat_map(|c| c.windows(2).map(|w| (w[0], w[1]))).collect();
    TaskSet::new("tick", 2, tasks, arcs.into_iter().collect(), Some(chains.into_iter().collect())).unwrap()
}

mod common;

use salet_core::interval_model::schedule_aware;
use salet_core::jld_search::{search, Budget, Objective, SearchConfig};
use salet_core::schedgen::schedule_edf;

fn config(objective: Objective, n: u64) -> SearchConfig {
    SearchConfig {
        objective,
        budget: Budget::expansions(n),
        ..SearchConfig::default()
    }
}

#[test]
fn results_are_feasible_and_never_worse_than_root() {
    for objective in [Objective::Age, Objective::Reaction, Objective::Both] {
        for seed in 0..40 {
            let ts = common::small_set(500 + seed);
            let r = search(&ts, &config(objective, 15)).unwrap();
            let s = schedule_edf(&ts, &r.best.jlds).expect("returned dependencies are feasible");
            assert_eq!(schedule_aware(&s), r.best.intervals);
            for row in &r.table {
                let now = (row.alpha, row.delta);
                let root = (row.root_alpha, row.root_delta);
                match objective {
                    Objective::Age => assert!(now.0 <= root.0),
                    Objective::Reaction => assert!(now.1 <= root.1),
                    Objective::Both => assert!(now.0 <= root.0 && now.1 <= root.1),
                }
            }
        }
    }
}

#[test]
fn expansion_budget_is_deterministic() {
    for seed in 0..15 {
        let ts = common::small_set(700 + seed);
        let cfg = config(Objective::Both, 25);
        let a = search(&ts, &cfg).unwrap();
        let b = search(&ts, &cfg).unwrap();
        assert_eq!(a.added, b.added);
        assert_eq!(a.table, b.table);
        assert_eq!((a.expanded, a.evaluated, a.terminated_by), (b.expanded, b.evaluated, b.terminated_by));
    }
}

#[test]
fn running_example_reaches_paper_age() {
    let ts = common::running_example();
    let r = search(&ts, &config(Objective::Age, 100)).unwrap();
    assert!(r.best.latencies[0].0 <= 9);
    assert!(!r.added.is_empty());
}

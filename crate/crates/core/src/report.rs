//! Per-set latency reports and batch comparison against classic LET.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::chain_analysis::ChainLatencies;
use crate::interval_model::IntervalDoc;
use crate::schedgen::JldSet;
use crate::task_model::{TaskId, Tick};

/// Version of the CSV layouts written by [`Report::to_csv`] and
/// [`compare_csv`].
pub const CSV_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainReport {
    pub chain: usize,
    pub tasks: Vec<TaskId>,
    pub hyperperiod: Tick,
    pub alpha: Tick,
    pub delta: Tick,
}

/// Worst-case latencies of every chain of one task set under one model.
/// `model` is one of `let`, `wcrt`, `sa`, `sa+search`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub taskset: String,
    pub model: String,
    pub intervals: IntervalDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jlds: Option<JldSet>,
    pub chains: Vec<ChainReport>,
}

impl Report {
    pub fn new(taskset: impl Into<String>, model: impl Into<String>, intervals: IntervalDoc, lat: &[ChainLatencies]) -> Self {
        Report {
            taskset: taskset.into(),
            model: model.into(),
            intervals,
            jlds: None,
            chains: lat
                .iter()
                .map(|c| ChainReport {
                    chain: c.chain,
                    tasks: c.tasks.clone(),
                    hyperperiod: c.hyperperiod,
                    alpha: c.alpha,
                    delta: c.delta,
                })
                .collect(),
        }
    }

    pub fn with_jlds(mut self, jlds: JldSet) -> Self {
        self.jlds = Some(jlds);
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("taskset,model,chain,tasks,hyperperiod,alpha,delta\n");
        for c in &self.chains {
            let tasks: Vec<String> = c.tasks.iter().map(|t| t.to_string()).collect();
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                self.taskset,
                self.model,
                c.chain,
                tasks.join("-"),
                c.hyperperiod,
                c.alpha,
                c.delta
            ));
        }
        out
    }
}

/// min, lower quartile, mean, upper quartile, max.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub min: f64,
    pub q25: f64,
    pub mean: f64,
    pub q75: f64,
    pub max: f64,
}

impl Stats {
    /// `None` for an empty sample. Quartiles interpolate linearly between
    /// order statistics.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = (v.len() - 1) as f64 * p;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        Some(Stats {
            min: v[0],
            q25: q(0.25),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            q75: q(0.75),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedRow {
    pub taskset: String,
    pub chain: usize,
    pub model: String,
    pub alpha: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: String,
    pub chains: usize,
    pub alpha: Stats,
    pub delta: Stats,
    /// Mean improvement over LET in percent, `100 * (1 - mean normalized)`.
    pub alpha_improvement_pct: f64,
    pub delta_improvement_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<NormalizedRow>,
    pub summary: Vec<ModelSummary>,
    /// Task sets skipped because they have no `let` report.
    pub missing_baseline: Vec<String>,
}

/// Divides every chain's latencies by the same chain's LET values.
pub fn compare(reports: &[Report]) -> Comparison {
    let mut by_set: BTreeMap<&str, Vec<&Report>> = BTreeMap::new();
    for r in reports {
        by_set.entry(&r.taskset).or_default().push(r);
    }
    let mut rows = Vec::new();
    let mut missing_baseline = Vec::new();
    for (set, group) in &by_set {
        let Some(base) = group.iter().find(|r| r.model == "let") else {
            missing_baseline.push(set.to_string());
            continue;
        };
        let base: BTreeMap<usize, &ChainReport> = base.chains.iter().map(|c| (c.chain, c)).collect();
        let mut group = group.clone();
        group.sort_by(|a, b| model_rank(&a.model).cmp(&model_rank(&b.model)).then(a.model.cmp(&b.model)));
        for r in group {
            for c in &r.chains {
                let Some(b) = base.get(&c.chain) else { continue };
                rows.push(NormalizedRow {
                    taskset: set.to_string(),
                    chain: c.chain,
                    model: r.model.clone(),
                    alpha: c.alpha as f64 / b.alpha as f64,
                    delta: c.delta as f64 / b.delta as f64,
                });
            }
        }
    }
    let mut models: Vec<&str> = rows.iter().map(|r| r.model.as_str()).collect();
    models.sort_by(|a, b| model_rank(a).cmp(&model_rank(b)).then(a.cmp(b)));
    models.dedup();
    let summary = models
        .into_iter()
        .map(|m| {
            let a: Vec<f64> = rows.iter().filter(|r| r.model == m).map(|r| r.alpha).collect();
            let d: Vec<f64> = rows.iter().filter(|r| r.model == m).map(|r| r.delta).collect();
            let alpha = Stats::of(&a).expect("non-empty");
            let delta = Stats::of(&d).expect("non-empty");
            ModelSummary {
                model: m.to_string(),
                chains: a.len(),
                alpha,
                delta,
                alpha_improvement_pct: 100.0 * (1.0 - alpha.mean),
                delta_improvement_pct: 100.0 * (1.0 - delta.mean),
            }
        })
        .collect();
    Comparison {
        rows,
        summary,
        missing_baseline,
    }
}

fn model_rank(m: &str) -> usize {
    match m {
        "let" => 0,
        "wcrt" => 1,
        "sa" => 2,
        "sa+search" => 3,
        _ => 4,
    }
}

/// Long-format CSV: one line per chain and metric, then summary lines
/// with `taskset` set to `*`.
pub fn compare_csv(c: &Comparison) -> String {
    let mut out = String::from("kind,taskset,chain,model,metric,value\n");
    for r in &c.rows {
        out.push_str(&format!("chain,{},{},{},alpha_norm,{:.6}\n", r.taskset, r.chain, r.model, r.alpha));
        out.push_str(&format!("chain,{},{},{},delta_norm,{:.6}\n", r.taskset, r.chain, r.model, r.delta));
    }
    for s in &c.summary {
        for (metric, st, imp) in [("alpha_norm", s.alpha, s.alpha_improvement_pct), ("delta_norm", s.delta, s.delta_improvement_pct)] {
            for (name, v) in [("min", st.min), ("q25", st.q25), ("mean", st.mean), ("q75", st.q75), ("max", st.max)] {
                out.push_str(&format!("summary,*,,{},{metric}.{name},{v:.6}\n", s.model));
            }
            let base = metric.trim_end_matches("_norm");
            out.push_str(&format!("summary,*,,{},{base}_improvement_pct,{imp:.3}\n", s.model));
        }
        out.push_str(&format!("summary,*,,{},chains,{}\n", s.model, s.chains));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval_model::IntervalModel;

    fn report(set: &str, model: &str, lat: &[(Tick, Tick)]) -> Report {
        Report {
            taskset: set.into(),
            model: model.into(),
            intervals: crate::interval_model::IntervalAssignment::new(IntervalModel::Let, Default::default()).to_doc(),
            jlds: None,
            chains: lat
                .iter()
                .enumerate()
                .map(|(i, &(alpha, delta))| ChainReport {
                    chain: i,
                    tasks: vec![1, 2],
                    hyperperiod: 15,
                    alpha,
                    delta,
                })
                .collect(),
        }
    }

    #[test]
    fn stats_quartiles() {
        let s = Stats::of(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((s.min, s.q25, s.mean, s.q75, s.max), (1.0, 2.0, 3.0, 4.0, 5.0));
        let s = Stats::of(&[0.0, 1.0]).unwrap();
        assert_eq!(s.q25, 0.25);
        assert!(Stats::of(&[]).is_none());
    }

    #[test]
    fn identical_models_normalize_to_one() {
        let c = compare(&[report("a", "let", &[(15, 15), (20, 10)]), report("a", "sa", &[(15, 15), (20, 10)])]);
        assert!(c.rows.iter().all(|r| r.alpha == 1.0 && r.delta == 1.0));
        assert_eq!(c.summary[1].alpha_improvement_pct, 0.0);
    }

    #[test]
    fn running_example_normalization() {
        let c = compare(&[report("x", "sa+search", &[(9, 9)]), report("x", "let", &[(15, 15)]), report("y", "sa", &[(1, 1)])]);
        let row = c.rows.iter().find(|r| r.model == "sa+search").unwrap();
        assert!((row.alpha - 0.6).abs() < 1e-12);
        assert_eq!(c.missing_baseline, vec!["y".to_string()]);
        assert_eq!(c.summary.iter().map(|s| s.model.as_str()).collect::<Vec<_>>(), vec!["let", "sa+search"]);
        assert!((c.summary[1].alpha_improvement_pct - 40.0).abs() < 1e-9);
        let csv = compare_csv(&c);
        assert!(csv.contains("chain,x,0,sa+search,alpha_norm,0.600000"));
        assert!(csv.contains("summary,*,,sa+search,alpha_improvement_pct,40.000"));
    }

    #[test]
    fn report_csv_and_json() {
        let r = report("x", "sa", &[(11, 8)]);
        assert_eq!(r.to_csv().lines().nth(1), Some("x,sa,0,1-2,15,11,8"));
        let back: Report = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }
}

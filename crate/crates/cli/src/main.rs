use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use salet_core::benchgen::{gen_taskset, GenProfile};
use salet_core::chain_analysis::analyze_all;
use salet_core::interval_model::{assignment_for, classic_let, IntervalAssignment, IntervalModel};
use salet_core::jld_search::{search, Budget, ChainRow, Objective, SearchConfig, Termination};
use salet_core::report::{compare, compare_csv, Report};
use salet_core::schedgen::{schedule_edf, JldSet};
use salet_core::sim_oracle::{default_horizon, empirical_latencies, simulate};
use salet_core::{TaskSet, Tick};

#[derive(Parser)]
#[command(name = "salet", version, about = "Schedule-aware LET latency analysis")]
struct Cli {
    /// Generator seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Ticks per millisecond for generated sets.
    #[arg(long, global = true)]
    ticks_per_ms: Option<Tick>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for batch commands (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate task sets from a built-in profile or a TOML/JSON profile file.
    Gen {
        #[arg(long, default_value = "automotive")]
        profile: String,
        #[arg(long, default_value_t = 1)]
        count: u64,
    },
    /// Build the EDF schedule of a task set.
    Schedule {
        taskset: PathBuf,
        #[arg(long)]
        jlds: Option<PathBuf>,
    },
    /// Worst-case data age and reaction latency per chain.
    Analyze {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "sa")]
        model: Vec<IntervalModel>,
        #[arg(long)]
        jlds: Option<PathBuf>,
    },
    /// Cross-check the analysis against the event simulator.
    Verify {
        taskset: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "let,wcrt,sa")]
        model: Vec<IntervalModel>,
        #[arg(long)]
        jlds: Option<PathBuf>,
        /// Analyze with these intervals instead of the model's.
        #[arg(long)]
        intervals: Option<PathBuf>,
        /// Simulation horizon in ticks.
        #[arg(long)]
        horizon: Option<Tick>,
    },
    /// Search for job-level dependencies that reduce chain latencies.
    Search {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "age")]
        objective: Objective,
        /// Expansion budget; deterministic.
        #[arg(long = "budget-expansions", alias = "expansions")]
        expansions: Option<u64>,
        /// Wall-clock budget in seconds (default 60 when no budget is given).
        #[arg(long = "budget-seconds")]
        budget_secs: Option<f64>,
        #[arg(long, default_value_t = 12)]
        max_candidates: usize,
        /// Also write let, wcrt and sa reports for `compare`.
        #[arg(long)]
        baselines: bool,
    },
    /// Normalize a directory of reports against LET.
    Compare { dir: PathBuf },
}

enum Failure {
    Input(anyhow::Error),
    Check(anyhow::Error),
}

trait Classify<T> {
    fn input(self) -> Result<T, Failure>;
    fn check(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn input(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Input(e.into()))
    }
    fn check(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Check(e.into()))
    }
}

#[derive(Serialize)]
struct InputRef {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    argv: Vec<String>,
    inputs: Vec<InputRef>,
    outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    profile: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    budget: Option<Budget>,
    #[serde(skip_serializing_if = "Option::is_none")]
    objective: Option<Objective>,
    tool_version: &'static str,
    timestamp: String,
}

impl<'a> RunManifest<'a> {
    fn new(command: &'a str) -> Self {
        RunManifest {
            command,
            argv: std::env::args().collect(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            profile: None,
            seed: None,
            budget: None,
            objective: None,
            tool_version: env!("CARGO_PKG_VERSION"),
            timestamp: chrono::Utc::now().to_rfc3339(),
        }
    }

    fn write(&self, path: &Path) -> Result<(), Failure> {
        write_file(path, &serde_json::to_string_pretty(self).expect("manifest serializes"))
    }
}

#[derive(Serialize)]
struct SearchOutput<'a> {
    taskset: &'a str,
    objective: Objective,
    budget: Budget,
    expanded: u64,
    evaluated: u64,
    terminated_by: Termination,
    jlds: &'a JldSet,
    chains: &'a [ChainRow],
}

struct Input {
    path: PathBuf,
    bytes: Vec<u8>,
    ts: TaskSet,
}

impl Input {
    fn load(path: &Path) -> Result<Self, Failure> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display())).input()?;
        let text = String::from_utf8(bytes.clone()).with_context(|| path.display().to_string()).input()?;
        let ts = TaskSet::from_json(&text)
            .with_context(|| format!("task set {}", path.display()))
            .input()?;
        Ok(Input {
            path: path.to_path_buf(),
            bytes,
            ts,
        })
    }

    fn hash(&self) -> String {
        hex::encode(Sha256::digest(&self.bytes))
    }

    /// `<stem>-<first 8 hex digits of the content hash>`.
    fn base(&self) -> String {
        let stem = self.path.file_stem().and_then(|s| s.to_str()).unwrap_or("taskset");
        format!("{stem}-{}", &self.hash()[..8])
    }

    fn label(&self) -> String {
        self.ts.name().map(str::to_string).unwrap_or_else(|| self.base())
    }

    fn as_ref(&self) -> InputRef {
        InputRef {
            path: self.path.display().to_string(),
            sha256: self.hash(),
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).input()?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display())).input()
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).input()?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display())).input()
}

/// Files given directly plus the `.json` files of given directories,
/// skipping manifests.
fn expand_inputs(paths: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))
                .input()?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    let name = f.file_name().and_then(|n| n.to_str()).unwrap_or("");
                    name.ends_with(".json") && !name.ends_with(".manifest.json")
                })
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(Failure::Input(anyhow!("no input files")));
    }
    Ok(out)
}

fn load_jlds(path: Option<&PathBuf>) -> Result<JldSet, Failure> {
    path.map(|p| read_json(p)).transpose().map(Option::unwrap_or_default)
}

fn intervals_for(ts: &TaskSet, model: IntervalModel, jlds: &JldSet) -> Result<IntervalAssignment, Failure> {
    if model == IntervalModel::Let {
        return Ok(classic_let(ts));
    }
    let schedule = schedule_edf(ts, jlds).context("scheduling").input()?;
    Ok(assignment_for(model, ts, &schedule))
}

fn analysis_report(input: &Input, tag: &str, intervals: &IntervalAssignment) -> Result<Report, Failure> {
    let lat = analyze_all(&input.ts, intervals).input()?;
    Ok(Report::new(input.label(), tag, intervals.to_doc(), &lat))
}

fn write_report(dir: &Path, base: &str, tag: &str, report: &Report) -> Result<Vec<String>, Failure> {
    let file_tag = tag.replace('+', "-");
    let json = dir.join(format!("{base}.{file_tag}.json"));
    let csv = dir.join(format!("{base}.{file_tag}.csv"));
    write_file(&json, &report.to_json())?;
    write_file(&csv, &report.to_csv())?;
    Ok(vec![json.display().to_string(), csv.display().to_string()])
}

fn print_report(r: &Report) {
    for c in &r.chains {
        let tasks: Vec<String> = c.tasks.iter().map(|t| t.to_string()).collect();
        println!(
            "{} {} chain {} [{}]: alpha={} delta={}",
            r.taskset,
            r.model,
            c.chain,
            tasks.join("->"),
            c.alpha,
            c.delta
        );
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new().num_threads(jobs).build().input()
}

fn run(cli: Cli) -> Result<(), Failure> {
    let out = cli.out.clone();
    match &cli.cmd {
        Cmd::Gen { profile, count } => {
            let mut p = match GenProfile::builtin(profile) {
                Some(p) => p,
                None => GenProfile::load(Path::new(profile)).input()?,
            };
            if let Some(t) = cli.ticks_per_ms {
                p.ticks_per_ms = t;
            }
            let first = cli.seed.unwrap_or(p.seed);
            let results: Vec<Result<String, Failure>> = pool(cli.jobs)?.install(|| {
                (0..*count)
                    .into_par_iter()
                    .map(|i| {
                        let seed = first + i;
                        let ts = gen_taskset(&p.clone().with_seed(seed)).input()?;
                        let path = out.join(format!("{}-{seed}.json", p.name));
                        write_file(&path, &ts.to_json())?;
                        let mut m = RunManifest::new("gen");
                        m.profile = Some(profile.clone());
                        m.seed = Some(seed);
                        m.outputs.push(path.display().to_string());
                        m.write(&out.join(format!("{}-{seed}.manifest.json", p.name)))?;
                        Ok(path.display().to_string())
                    })
                    .collect()
            });
            for r in results {
                println!("{}", r?);
            }
            Ok(())
        }
        Cmd::Schedule { taskset, jlds } => {
            let input = Input::load(taskset)?;
            let jlds = load_jlds(jlds.as_ref())?;
            let s = schedule_edf(&input.ts, &jlds).context("scheduling").input()?;
            let path = out.join(format!("{}.schedule.json", input.base()));
            write_file(&path, &serde_json::to_string_pretty(&s.to_doc()).expect("schedule serializes"))?;
            print!("{}", s.gantt());
            let mut m = RunManifest::new("schedule");
            m.inputs.push(input.as_ref());
            m.outputs.push(path.display().to_string());
            m.write(&out.join(format!("{}.schedule.manifest.json", input.base())))
        }
        Cmd::Analyze { inputs, model, jlds } => {
            let files = expand_inputs(inputs)?;
            let jld_set = load_jlds(jlds.as_ref())?;
            let results: Vec<Result<Vec<Report>, Failure>> = pool(cli.jobs)?.install(|| {
                files
                    .par_iter()
                    .map(|f| {
                        let input = Input::load(f)?;
                        let mut m = RunManifest::new("analyze");
                        m.inputs.push(input.as_ref());
                        let mut reports = Vec::new();
                        for &mo in model {
                            let iv = intervals_for(&input.ts, mo, &jld_set)?;
                            let mut r = analysis_report(&input, mo.as_str(), &iv)?;
                            if !jld_set.is_empty() && mo != IntervalModel::Let {
                                r = r.with_jlds(jld_set.clone());
                            }
                            m.outputs.extend(write_report(&out, &input.base(), mo.as_str(), &r)?);
                            reports.push(r);
                        }
                        m.write(&out.join(format!("{}.analyze.manifest.json", input.base())))?;
                        Ok(reports)
                    })
                    .collect()
            });
            for r in results {
                r?.iter().for_each(print_report);
            }
            Ok(())
        }
        Cmd::Verify {
            taskset,
            model,
            jlds,
            intervals,
            horizon,
        } => {
            let input = Input::load(taskset)?;
            let ts = &input.ts;
            let jld_set = load_jlds(jlds.as_ref())?;
            let given = intervals
                .as_ref()
                .map(|p| read_json(p).map(IntervalAssignment::from_doc))
                .transpose()?;
            let models = match &given {
                Some(g) => vec![g.model()],
                None => model.clone(),
            };
            let horizon = horizon.unwrap_or_else(|| default_horizon(ts));
            let mut mismatches = 0;
            for mo in models {
                let simulated = intervals_for(ts, mo, &jld_set)?;
                let analyzed = given.clone().unwrap_or_else(|| simulated.clone());
                analyzed.validate(ts).input()?;
                let lat = analyze_all(ts, &analyzed).input()?;
                let trace = simulate(ts, &simulated, horizon).check()?;
                for c in &lat {
                    let e = empirical_latencies(ts, &trace, c.chain).check()?;
                    let ok = c.alpha == e.worst_age && c.delta == e.worst_reaction;
                    if !ok {
                        mismatches += 1;
                    }
                    println!(
                        "{mo} chain {}: analytic alpha={} delta={} measured alpha={} delta={} {}",
                        c.chain,
                        c.alpha,
                        c.delta,
                        e.worst_age,
                        e.worst_reaction,
                        if ok { "ok" } else { "MISMATCH" }
                    );
                }
            }
            if mismatches > 0 {
                return Err(Failure::Check(anyhow!("{mismatches} chain(s) differ")));
            }
            Ok(())
        }
        Cmd::Search {
            inputs,
            objective,
            expansions,
            budget_secs,
            max_candidates,
            baselines,
        } => {
            let files = expand_inputs(inputs)?;
            let budget = match (expansions, budget_secs) {
                (None, None) => Budget::default(),
                (e, s) => Budget {
                    expansions: *e,
                    wall: s.map(Duration::from_secs_f64),
                },
            };
            let config = SearchConfig {
                objective: *objective,
                budget,
                max_candidates: *max_candidates,
            };
            let results: Vec<Result<Report, Failure>> = pool(cli.jobs)?.install(|| {
                files
                    .par_iter()
                    .map(|f| {
                        let input = Input::load(f)?;
                        let base = input.base();
                        let mut m = RunManifest::new("search");
                        m.inputs.push(input.as_ref());
                        m.budget = Some(budget);
                        m.objective = Some(*objective);
                        let res = search(&input.ts, &config).input()?;
                        let label = input.label();
                        let doc = SearchOutput {
                            taskset: &label,
                            objective: res.objective,
                            budget,
                            expanded: res.expanded,
                            evaluated: res.evaluated,
                            terminated_by: res.terminated_by,
                            jlds: &res.added,
                            chains: &res.table,
                        };
                        let search_path = out.join(format!("{base}.search.json"));
                        let jld_path = out.join(format!("{base}.jlds.json"));
                        write_file(&search_path, &serde_json::to_string_pretty(&doc).expect("serializes"))?;
                        write_file(&jld_path, &serde_json::to_string_pretty(&res.added).expect("serializes"))?;
                        m.outputs.push(search_path.display().to_string());
                        m.outputs.push(jld_path.display().to_string());
                        let report = analysis_report(&input, "sa+search", &res.best.intervals)?.with_jlds(res.added.clone());
                        m.outputs.extend(write_report(&out, &base, "sa+search", &report)?);
                        if *baselines {
                            for mo in [IntervalModel::Let, IntervalModel::WcrtLet, IntervalModel::ScheduleAware] {
                                let iv = intervals_for(&input.ts, mo, &JldSet::new())?;
                                let r = analysis_report(&input, mo.as_str(), &iv)?;
                                m.outputs.extend(write_report(&out, &base, mo.as_str(), &r)?);
                            }
                        }
                        m.write(&out.join(format!("{base}.search.manifest.json")))?;
                        Ok(report)
                    })
                    .collect()
            });
            for r in results {
                print_report(&r?);
            }
            Ok(())
        }
        Cmd::Compare { dir } => {
            let mut reports = Vec::new();
            let mut m = RunManifest::new("compare");
            for f in expand_inputs(std::slice::from_ref(dir))? {
                let text = fs::read_to_string(&f).with_context(|| f.display().to_string()).input()?;
                // Reports are recognized by shape; other JSON files are skipped.
                if let Ok(r) = serde_json::from_str::<Report>(&text) {
                    m.inputs.push(InputRef {
                        path: f.display().to_string(),
                        sha256: hex::encode(Sha256::digest(text.as_bytes())),
                    });
                    reports.push(r);
                }
            }
            if reports.is_empty() {
                return Err(Failure::Input(anyhow!("no reports in {}", dir.display())));
            }
            let c = compare(&reports);
            for set in &c.missing_baseline {
                eprintln!("warning: {set} has no let report, skipped");
            }
            let csv_path = out.join("compare.csv");
            let json_path = out.join("compare.json");
            write_file(&csv_path, &compare_csv(&c))?;
            write_file(&json_path, &serde_json::to_string_pretty(&c.summary).expect("serializes"))?;
            for s in &c.summary {
                println!(
                    "{:<10} chains={:<5} alpha mean={:.3} ({:.1}% better)  delta mean={:.3} ({:.1}% better)",
                    s.model,
                    s.chains,
                    s.alpha.mean,
                    s.alpha_improvement_pct,
                    s.delta.mean,
                    s.delta_improvement_pct
                );
            }
            m.outputs.push(csv_path.display().to_string());
            m.outputs.push(json_path.display().to_string());
            m.write(&out.join("compare.manifest.json"))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Check(e)) => {
            eprintln!("failed: {e:#}");
            ExitCode::from(3)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arguments_parse() {
        let cli = Cli::try_parse_from(["salet", "--out", "x", "analyze", "a.json", "--model", "let,sa"]).unwrap();
        match cli.cmd {
            Cmd::Analyze { model, .. } => assert_eq!(model, vec![IntervalModel::Let, IntervalModel::ScheduleAware]),
            _ => panic!(),
        }
        assert!(Cli::try_parse_from(["salet", "search", "a.json", "--objective", "speed"]).is_err());
    }
}

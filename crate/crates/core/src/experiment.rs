//! Orchestration behind the `run`, `sweep` and `verify` commands: seed
//! replication, artifact files and exit codes.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{ConfigError, ExperimentConfig, SweepSpec, SCHEMA_VERSION};
use crate::detection::{fused_sensing, shape_conditions, FusionRule};
use crate::hedonic::{form_partition, FormationTrace, Game};
use crate::sim::{energy_efficiency, run_scenario, MobilitySpec, SimMetrics};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "COALSPEC_THREADS";

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration; exit code 2.
    Config(ConfigError),
    /// Failure while running; exit code 1.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "config error: {e}"),
            CliError::Runtime(e) => write!(f, "error: {e}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// A worker pool honouring `COALSPEC_THREADS`.
pub fn thread_pool() -> CliResult<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Config(config_message(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::Runtime(e.to_string()))
}

fn config_message(message: String) -> ConfigError {
    ConfigError::new(message)
}

/// Mean and sample standard deviation of one metric across seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub values: Vec<f64>,
}

impl Stat {
    pub fn of(values: Vec<f64>) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std, values }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryPoint {
    pub label: String,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub metrics: BTreeMap<String, Stat>,
}

/// Contents of `summary.json`, shared by `run` (one point) and `sweep`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub name: String,
    pub command: String,
    pub seeds: Vec<u64>,
    pub points: Vec<SummaryPoint>,
}

fn base_dir(config_path: Option<&Path>) -> PathBuf {
    config_path
        .and_then(Path::parent)
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn prepare_output(out: &Path) -> CliResult<()> {
    fs::create_dir_all(out).map_err(|e| {
        CliError::Config(config_message(format!("output directory {} is not writable: {e}", out.display())))
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Runtime(e.to_string()))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Shortest decimal that round-trips.
fn num(x: f64) -> String {
    format!("{x}")
}

pub const METRICS_COLUMNS: [&str; 18] = [
    "seed",
    "window_start",
    "slots",
    "num_sus",
    "num_channels",
    "throughput_bps",
    "expected_throughput_bps",
    "energy_j",
    "energy_efficiency_bpj",
    "avg_coalition_fa",
    "dissatisfied_rate",
    "dissatisfied_ee",
    "transmissions",
    "pu_collisions",
    "switches",
    "switches_per_minute",
    "forming_slots",
    "fa_computations",
];

fn write_metrics_rows<W: Write>(w: &mut csv::Writer<W>, seed: u64, metrics: &SimMetrics, window: usize) -> CliResult<()> {
    for chunk in metrics.slots.chunks(window) {
        let last = chunk.last().expect("chunks are nonempty");
        let len = chunk.len() as f64;
        let mean = |f: fn(&crate::sim::SlotRecord) -> f64| chunk.iter().map(f).sum::<f64>() / len;
        let switches = chunk.iter().filter(|s| s.switched).count();
        let ee = energy_efficiency(chunk).unwrap_or(0.0);
        w.write_record([
            seed.to_string(),
            chunk[0].slot.to_string(),
            chunk.len().to_string(),
            last.num_sus.to_string(),
            last.num_channels.to_string(),
            num(mean(|s| s.throughput_bps)),
            num(mean(|s| s.expected_throughput_bps)),
            num(chunk.iter().map(|s| s.energy_j).sum()),
            num(ee),
            num(mean(|s| s.avg_coalition_fa)),
            num(mean(|s| s.dissatisfied_rate as f64)),
            num(mean(|s| s.dissatisfied_ee as f64)),
            chunk.iter().map(|s| s.transmissions).sum::<usize>().to_string(),
            chunk.iter().map(|s| s.pu_collisions).sum::<usize>().to_string(),
            switches.to_string(),
            num(crate::sim::switches_per_minute(switches, chunk.len(), metrics.slot_s)),
            chunk.iter().filter(|s| s.forming).count().to_string(),
            last.fa_computations.to_string(),
        ])?;
    }
    Ok(())
}

/// Per-seed scalar metrics reported in the summary.
pub fn run_metrics(metrics: &SimMetrics) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    let slots = metrics.slots.len().max(1) as f64;
    out.insert("mean_throughput_bps".into(), metrics.mean_throughput_bps());
    out.insert(
        "mean_expected_throughput_bps".into(),
        metrics.slots.iter().map(|s| s.expected_throughput_bps).sum::<f64>() / slots,
    );
    out.insert("energy_efficiency_bpj".into(), energy_efficiency(&metrics.slots).unwrap_or(0.0));
    out.insert("total_switches".into(), metrics.total_switches() as f64);
    out.insert("switches_per_minute".into(), metrics.switches_per_minute());
    out.insert("fa_computations".into(), metrics.fa_computations() as f64);
    out.insert(
        "avg_coalition_fa".into(),
        metrics.slots.iter().map(|s| s.avg_coalition_fa).sum::<f64>() / slots,
    );
    if let Some(last) = metrics.slots.last() {
        out.insert("final_dissatisfied_rate".into(), last.dissatisfied_rate as f64);
        out.insert("final_dissatisfied_ee".into(), last.dissatisfied_ee as f64);
    }
    let busy: usize = metrics.channel_totals.iter().map(|c| c.sensed_busy_slots).sum();
    let missed: usize = metrics.channel_totals.iter().map(|c| c.missed_detections).sum();
    out.insert("md_rate".into(), if busy > 0 { missed as f64 / busy as f64 } else { 0.0 });
    out
}

fn collect_point(label: String, parameters: BTreeMap<String, serde_json::Value>, per_seed: &[BTreeMap<String, f64>]) -> SummaryPoint {
    let mut keys: Vec<&String> = per_seed.iter().flat_map(|m| m.keys()).collect();
    keys.sort();
    keys.dedup();
    let metrics = keys
        .into_iter()
        .map(|k| {
            let values = per_seed.iter().filter_map(|m| m.get(k).copied()).collect();
            (k.clone(), Stat::of(values))
        })
        .collect();
    SummaryPoint {
        label,
        parameters,
        metrics,
    }
}

#[derive(Serialize)]
struct SeedTraces<'a> {
    seed: u64,
    traces: &'a [FormationTrace],
}

/// Runs the configured experiment once per seed and writes
/// `metrics.csv`, `summary.json` and `formation_traces.json` to `out`.
pub fn cmd_run(config: &ExperimentConfig, config_path: Option<&Path>, out: &Path) -> CliResult<Summary> {
    config.validate()?;
    prepare_output(out)?;
    let base = base_dir(config_path);
    let scenarios = config
        .seeds
        .iter()
        .map(|&seed| config.scenario_for_seed(seed, &base))
        .collect::<Result<Vec<_>, _>>()?;
    let pool = thread_pool()?;
    let results: Vec<SimMetrics> = pool.install(|| {
        config
            .seeds
            .par_iter()
            .zip(scenarios.par_iter())
            .map(|(&seed, scenario)| run_scenario(scenario, &config.events, &config.mobility, config.horizon, seed))
            .collect::<crate::Result<Vec<_>>>()
    })?;

    if config.emit.metrics_csv {
        let mut w = csv::Writer::from_path(out.join("metrics.csv"))?;
        w.write_record(METRICS_COLUMNS)?;
        for (&seed, metrics) in config.seeds.iter().zip(&results) {
            write_metrics_rows(&mut w, seed, metrics, config.window_slots)?;
        }
        w.flush()?;
    }
    if config.emit.formation_traces {
        let traces: Vec<SeedTraces> = config
            .seeds
            .iter()
            .zip(&results)
            .map(|(&seed, m)| SeedTraces {
                seed,
                traces: &m.formation_traces,
            })
            .collect();
        write_json(&out.join("formation_traces.json"), &traces)?;
    }
    let per_seed: Vec<_> = results.iter().map(run_metrics).collect();
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        name: config.name.clone(),
        command: "run".into(),
        seeds: config.seeds.clone(),
        points: vec![collect_point("run".into(), BTreeMap::new(), &per_seed)],
    };
    if config.emit.summary_json {
        write_json(&out.join("summary.json"), &summary)?;
    }
    Ok(summary)
}

/// Runs the configured sweep and writes `sweep.csv` and `summary.json`.
/// Without a sweep section this is [`cmd_run`].
pub fn cmd_sweep(config: &ExperimentConfig, config_path: Option<&Path>, out: &Path) -> CliResult<Summary> {
    config.validate()?;
    let Some(sweep) = &config.sweep else {
        return cmd_run(config, config_path, out);
    };
    prepare_output(out)?;
    let base = base_dir(config_path);
    let pool = thread_pool()?;
    let summary = match sweep {
        SweepSpec::SnrSplit {
            mean_snr,
            points,
            coalition_md,
            num_samples,
        } => sweep_snr_split(config, out, *mean_snr, *points, *coalition_md, *num_samples)?,
        SweepSpec::NumChannels { values } => pool.install(|| sweep_num_channels(config, &base, out, values))?,
        SweepSpec::Speed { values, channels } => pool.install(|| sweep_speed(config, &base, out, values, channels))?,
    };
    if config.emit.summary_json {
        write_json(&out.join("summary.json"), &summary)?;
    }
    Ok(summary)
}

fn sweep_summary(config: &ExperimentConfig, points: Vec<SummaryPoint>) -> Summary {
    Summary {
        schema_version: SCHEMA_VERSION,
        name: config.name.clone(),
        command: "sweep".into(),
        seeds: config.seeds.clone(),
        points,
    }
}

/// The split sweep is deterministic: one row per split point.
fn sweep_snr_split(
    config: &ExperimentConfig,
    out: &Path,
    mean: f64,
    points: usize,
    md: f64,
    nu: u32,
) -> CliResult<Summary> {
    let mut w = csv::Writer::from_path(out.join("sweep.csv"))?;
    w.write_record([
        "point",
        "lambda1",
        "lambda2",
        "fa_and",
        "fa_or",
        "md_condition",
        "threshold_condition",
    ])?;
    let mut summary_points = Vec::with_capacity(points);
    for i in 0..points {
        let l1 = 2.0 * mean * i as f64 / (points - 1) as f64;
        let snrs = [l1, 2.0 * mean - l1];
        let and = fused_sensing(&snrs, md, nu, FusionRule::And)?.coalition_fa;
        let or = fused_sensing(&snrs, md, nu, FusionRule::Or)?.coalition_fa;
        let cond = shape_conditions(md, nu, &snrs)?;
        w.write_record([
            i.to_string(),
            num(snrs[0]),
            num(snrs[1]),
            num(and),
            num(or),
            cond.md_condition.to_string(),
            cond.threshold_condition.to_string(),
        ])?;
        let mut m = BTreeMap::new();
        m.insert("fa_and".to_string(), and);
        m.insert("fa_or".to_string(), or);
        let params = [("lambda1".to_string(), json!(snrs[0])), ("lambda2".to_string(), json!(snrs[1]))]
            .into_iter()
            .collect();
        summary_points.push(collect_point(format!("split {i}"), params, &[m]));
    }
    w.flush()?;
    Ok(sweep_summary(config, summary_points))
}

fn sweep_num_channels(config: &ExperimentConfig, base: &Path, out: &Path, values: &[usize]) -> CliResult<Summary> {
    let jobs: Vec<(usize, u64)> = values
        .iter()
        .flat_map(|&n| config.seeds.iter().map(move |&s| (n, s)))
        .collect();
    let scenarios = jobs
        .iter()
        .map(|&(n, seed)| config.scenario_with_channels(seed, base, Some(n)))
        .collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<BTreeMap<String, f64>> = jobs
        .par_iter()
        .zip(scenarios.par_iter())
        .map(|(&(_, seed), scenario)| {
            let r = form_partition(scenario, seed)?;
            let stable = Game::new(scenario.clone())?.audit(&r.partition)?.stable;
            let t = &r.trace;
            Ok([
                ("t_converge", t.t_converge as f64),
                ("switches", t.num_switches() as f64),
                ("fa_computations", t.fa_computations as f64),
                ("fa_evaluations", t.fa_evaluations as f64),
                ("final_welfare", t.final_welfare()),
                ("stable", f64::from(u8::from(stable))),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect())
        })
        .collect::<crate::Result<_>>()?;

    let columns = ["t_converge", "switches", "fa_computations", "fa_evaluations", "final_welfare", "stable"];
    let mut w = csv::Writer::from_path(out.join("sweep.csv"))?;
    let mut header = vec!["num_channels", "seed"];
    header.extend(columns);
    w.write_record(&header)?;
    for (&(n, seed), row) in jobs.iter().zip(&rows) {
        let mut rec = vec![n.to_string(), seed.to_string()];
        rec.extend(columns.iter().map(|c| num(row[*c])));
        w.write_record(&rec)?;
    }
    w.flush()?;
    let points = values
        .iter()
        .map(|&n| {
            let per_seed: Vec<_> = jobs
                .iter()
                .zip(&rows)
                .filter(|((jn, _), _)| *jn == n)
                .map(|(_, r)| r.clone())
                .collect();
            let params = [("num_channels".to_string(), json!(n))].into_iter().collect();
            collect_point(format!("N={n}"), params, &per_seed)
        })
        .collect();
    Ok(sweep_summary(config, points))
}

fn sweep_speed(config: &ExperimentConfig, base: &Path, out: &Path, speeds: &[f64], channels: &[usize]) -> CliResult<Summary> {
    let channel_axis: Vec<Option<usize>> = if channels.is_empty() {
        vec![None]
    } else {
        channels.iter().copied().map(Some).collect()
    };
    let mut jobs = Vec::new();
    for &n in &channel_axis {
        for &v in speeds {
            for &seed in &config.seeds {
                jobs.push((n, v, seed));
            }
        }
    }
    let scenarios = jobs
        .iter()
        .map(|&(n, _, seed)| config.scenario_with_channels(seed, base, n))
        .collect::<Result<Vec<_>, _>>()?;
    let results: Vec<SimMetrics> = jobs
        .par_iter()
        .zip(scenarios.par_iter())
        .map(|(&(_, v, seed), scenario)| {
            let mobility = MobilitySpec {
                speed_mps: v,
                converge_first: config.mobility.converge_first,
            };
            run_scenario(scenario, &config.events, &mobility, config.horizon, seed)
        })
        .collect::<crate::Result<_>>()?;

    let mut w = csv::Writer::from_path(out.join("sweep.csv"))?;
    w.write_record(["num_channels", "speed_mps", "seed", "switches", "switches_per_minute", "fa_computations", "horizon"])?;
    for ((&(_, v, seed), m), scenario) in jobs.iter().zip(&results).zip(&scenarios) {
        w.write_record([
            scenario.num_channels().to_string(),
            num(v),
            seed.to_string(),
            m.total_switches().to_string(),
            num(m.switches_per_minute()),
            m.fa_computations().to_string(),
            m.horizon().to_string(),
        ])?;
    }
    w.flush()?;
    let mut points = Vec::new();
    for &n in &channel_axis {
        for &v in speeds {
            let per_seed: Vec<_> = jobs
                .iter()
                .zip(&results)
                .filter(|((jn, jv, _), _)| *jn == n && *jv == v)
                .map(|(_, m)| run_metrics(m))
                .collect();
            let mut params: BTreeMap<String, serde_json::Value> = BTreeMap::new();
            params.insert("speed_mps".into(), json!(v));
            if let Some(n) = n {
                params.insert("num_channels".into(), json!(n));
            }
            let label = match n {
                Some(n) => format!("N={n}, V={v}"),
                None => format!("V={v}"),
            };
            points.push(collect_point(label, params, &per_seed));
        }
    }
    Ok(sweep_summary(config, points))
}

/// Runs the property suite, prints its table and returns the exit code.
pub fn cmd_verify(quick: bool, inject_fault: bool) -> CliResult<i32> {
    let report = crate::verify::run_suite(&crate::verify::VerifyOptions {
        quick,
        inject_externality_fault: inject_fault,
        seed: 0,
    });
    print!("{}", report.render_table());
    for c in report.checks.iter().filter(|c| !c.passed) {
        if let Some(ce) = &c.counterexample {
            println!("counterexample for {}: {}", c.name, ce);
        }
    }
    Ok(if report.passed() { 0 } else { 1 })
}

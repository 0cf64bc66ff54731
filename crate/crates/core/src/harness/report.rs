use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::scenario::Scenario;
use super::workload;
use super::HarnessError;
use crate::coflow::{self, SweepGrid, SweepRow};
use crate::monitors::{classify_verdict, quantile, verdict_csv_row, MonitorSet, VerdictClass, VerdictInput, VERDICT_CSV_HEADER};
use crate::simcore::{SimTime, TraceLog};
use crate::topology::{NodeId, Topology};
use crate::transport::{FlowResult, FlowStatus};
use crate::world::{AttackReport, FlowSpec, NetworkCounters, World};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub monitor: String,
    pub alarm: bool,
    pub blamed: Vec<String>,
    pub scores: Vec<f64>,
    pub class: VerdictClass,
    /// Full CSV line, kept so artifacts are written exactly as computed.
    #[serde(skip)]
    pub csv: String,
}

/// One simulation of a scenario, with or without its attacks installed.
#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub attacked: bool,
    pub flows: Vec<FlowResult>,
    pub network: NetworkCounters,
    pub attacks: Vec<AttackReport>,
    pub end_time_s: f64,
    pub events: u64,
    pub verdicts: Vec<VerdictRecord>,
    #[serde(skip)]
    pub trace: Option<TraceLog>,
}

impl RunSummary {
    pub fn completed(&self) -> usize {
        self.flows.iter().filter(|f| f.status == FlowStatus::Completed).count()
    }

    pub fn verdict(&self, monitor: &str) -> Option<&VerdictRecord> {
        self.verdicts.iter().find(|v| v.monitor == monitor)
    }
}

/// Attacked over baseline, over the flows the scenario reports on. Flows
/// that never finish contribute the time they were observed for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub flows: usize,
    pub completed_baseline: usize,
    pub completed_attacked: usize,
    pub fct_mean: Option<f64>,
    pub fct_p99: Option<f64>,
    pub establishment_mean: Option<f64>,
    pub establishment_p99: Option<f64>,
}

fn fct_or_elapsed(f: &FlowResult) -> f64 {
    f.fct.unwrap_or(f.elapsed).as_secs_f64()
}

fn establishment_or_elapsed(f: &FlowResult) -> f64 {
    f.establishment_time.unwrap_or(f.elapsed).as_secs_f64()
}

fn ratio(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) if b > 0.0 => Some(a / b),
        _ => None,
    }
}

impl Multipliers {
    pub fn compute(baseline: &[&FlowResult], attacked: &[&FlowResult]) -> Self {
        let stat = |flows: &[&FlowResult], f: fn(&FlowResult) -> f64| -> (Option<f64>, Option<f64>) {
            let v: Vec<f64> = flows.iter().map(|x| f(x)).collect();
            let mean = (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
            (mean, quantile(&v, 0.99))
        };
        let (bm, bp) = stat(baseline, fct_or_elapsed);
        let (am, ap) = stat(attacked, fct_or_elapsed);
        let (bem, bep) = stat(baseline, establishment_or_elapsed);
        let (aem, aep) = stat(attacked, establishment_or_elapsed);
        let done = |fs: &[&FlowResult]| fs.iter().filter(|f| f.status == FlowStatus::Completed).count();
        Multipliers {
            flows: attacked.len(),
            completed_baseline: done(baseline),
            completed_attacked: done(attacked),
            fct_mean: ratio(am, bm),
            fct_p99: ratio(ap, bp),
            establishment_mean: ratio(aem, bem),
            establishment_p99: ratio(aep, bep),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub name: String,
    pub seed: u64,
    pub report_dst_pod: Option<u32>,
    pub multipliers: Multipliers,
    /// Some reported flow was still running at the horizon.
    pub partial: bool,
    pub compromised: Vec<String>,
    pub baseline: RunSummary,
    pub attacked: RunSummary,
    #[serde(skip)]
    pub topology: Arc<Topology>,
}

impl RunReport {
    /// Flows of `run` that count towards the multipliers.
    pub fn reported<'a>(&self, run: &'a RunSummary) -> Vec<&'a FlowResult> {
        reported(&self.topology, self.report_dst_pod, run)
    }
}

pub(super) fn reported<'a>(topo: &Topology, pod: Option<u32>, run: &'a RunSummary) -> Vec<&'a FlowResult> {
    run.flows.iter().filter(|f| pod.is_none_or(|p| topo.node(f.dst).pod == p)).collect()
}

pub(super) fn execute(
    s: &Scenario,
    topo: &Arc<Topology>,
    flows: &[FlowSpec],
    compromised: &BTreeSet<NodeId>,
    with_attacks: bool,
    trace: bool,
) -> Result<RunSummary, HarnessError> {
    let monitors = MonitorSet::from_configs(&s.monitors, topo);
    let mut world = World::with_observer(topo.clone(), s.world_config(topo, trace), monitors)?;
    if with_attacks {
        for (i, a) in s.attacks.iter().enumerate() {
            world.install_attack(a.clone()).map_err(|e| HarnessError::invalid(&format!("attacks[{i}]"), &e.to_string()))?;
        }
    }
    for f in flows {
        world.add_flow(*f)?;
    }
    let (out, monitors) = world.run(SimTime::from_secs_f64(s.duration_s));
    let input = VerdictInput { topo, flows: &out.flows, end: out.end_time };
    let verdicts = monitors
        .verdicts(&input)
        .into_iter()
        .map(|v| {
            let class = classify_verdict(&v, compromised, topo);
            VerdictRecord {
                csv: verdict_csv_row(&s.name, &v, class, topo),
                monitor: v.monitor.clone(),
                alarm: v.alarm,
                blamed: v.blamed_names(topo),
                scores: v.blamed.iter().map(|b| b.1).collect(),
                class,
            }
        })
        .collect();
    Ok(RunSummary {
        attacked: with_attacks,
        network: out.network,
        attacks: out.attacks,
        end_time_s: out.end_time.as_secs_f64(),
        events: out.events,
        verdicts,
        trace: trace.then_some(out.trace),
        flows: out.flows,
    })
}

/// Runs the scenario without and then with its attacks, sharing every seed,
/// and compares the two. Without attacks the baseline is reused.
pub fn run_scenario(s: &Scenario, trace: bool) -> Result<RunReport, HarnessError> {
    let topo = Arc::new(s.validate()?);
    let flows = workload::generate(&s.workload, &topo, s.seed)?;
    let compromised = s.compromised(&topo);
    let baseline = execute(s, &topo, &flows, &compromised, false, trace)?;
    let attacked = if s.attacks.is_empty() {
        RunSummary {
            attacked: true,
            flows: baseline.flows.clone(),
            network: baseline.network.clone(),
            attacks: Vec::new(),
            end_time_s: baseline.end_time_s,
            events: baseline.events,
            verdicts: baseline.verdicts.clone(),
            trace: None,
        }
    } else {
        execute(s, &topo, &flows, &compromised, true, trace)?
    };
    let (b, a) = (reported(&topo, s.report_dst_pod, &baseline), reported(&topo, s.report_dst_pod, &attacked));
    let multipliers = Multipliers::compute(&b, &a);
    let partial = a.iter().any(|f| f.status == FlowStatus::Incomplete);
    Ok(RunReport {
        name: s.name.clone(),
        seed: s.seed,
        report_dst_pod: s.report_dst_pod,
        multipliers,
        partial,
        compromised: compromised.iter().map(|&n| topo.node(n).name.clone()).collect(),
        baseline,
        attacked,
        topology: topo,
    })
}

pub fn run_scenario_file(path: &Path, seed: Option<u64>, trace: bool) -> Result<RunReport, HarnessError> {
    let mut s = Scenario::load(path)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    run_scenario(&s, trace)
}

fn flows_csv(topo: &Topology, flows: &[FlowResult]) -> String {
    let mut out = String::from(FlowResult::CSV_HEADER);
    out.push('\n');
    for f in flows {
        out.push_str(&f.csv_row(|n| topo.node(n).name.clone()));
        out.push('\n');
    }
    out
}

/// Writes the report's artifacts into `dir` and returns the files written.
pub fn write_report(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, body: String| -> Result<(), HarnessError> {
        let p = dir.join(name);
        fs::write(&p, body)?;
        written.push(p);
        Ok(())
    };
    put("baseline_flows.csv", flows_csv(&report.topology, &report.baseline.flows))?;
    put("attacked_flows.csv", flows_csv(&report.topology, &report.attacked.flows))?;
    let mut verdicts = String::from(VERDICT_CSV_HEADER);
    verdicts.push('\n');
    for v in &report.attacked.verdicts {
        verdicts.push_str(&v.csv);
        verdicts.push('\n');
    }
    put("verdicts.csv", verdicts)?;
    put("verdicts.json", serde_json::to_string_pretty(&report.attacked.verdicts)?)?;
    let summary = serde_json::json!({
        "name": report.name,
        "seed": report.seed,
        "report_dst_pod": report.report_dst_pod,
        "multipliers": report.multipliers,
        "partial": report.partial,
        "compromised": report.compromised,
        "baseline": {"network": report.baseline.network, "end_time_s": report.baseline.end_time_s, "events": report.baseline.events, "completed": report.baseline.completed()},
        "attacked": {"network": report.attacked.network, "end_time_s": report.attacked.end_time_s, "events": report.attacked.events, "completed": report.attacked.completed(), "attacks": report.attacked.attacks},
    });
    put("summary.json", serde_json::to_string_pretty(&summary)?)?;
    for (name, run) in [("baseline_trace.tsv", &report.baseline), ("attacked_trace.tsv", &report.attacked)] {
        if let Some(t) = &run.trace {
            let mut buf = Vec::new();
            t.write_tsv(&mut buf)?;
            put(name, String::from_utf8(buf).expect("trace is utf-8"))?;
        }
    }
    Ok(written)
}

/// Evaluates each named grid and, given a directory, writes one CSV per grid
/// as `<name>_<strategy>.csv`.
pub fn run_coflow_sweep(grids: &[(String, SweepGrid)], out: Option<&Path>) -> Result<Vec<(String, Vec<SweepRow>)>, HarnessError> {
    let mut results = Vec::new();
    for (name, grid) in grids {
        let rows = coflow::sweep(grid)?;
        if let Some(dir) = out {
            fs::create_dir_all(dir)?;
            let mut body = String::from(coflow::SWEEP_CSV_HEADER);
            body.push('\n');
            for r in &rows {
                body.push_str(&r.csv());
                body.push('\n');
            }
            fs::write(dir.join(format!("{name}_{}.csv", grid.strategy.as_str())), body)?;
        }
        results.push((name.clone(), rows));
    }
    Ok(results)
}

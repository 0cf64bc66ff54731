use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{execute, reported, Multipliers};
use super::scenario::{Scenario, TopologySpec};
use super::workload::{self, PoissonWorkload, SizeDist, WorkloadPart};
use super::HarnessError;
use crate::dataplane::{AttackConfig, AttackKind, TargetSelector};
use crate::topology::LinkParams;
use crate::transport::FlowResult;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IncastSweep {
    pub k: u32,
    pub victim_pod: u32,
    pub loads: Vec<f64>,
    pub pps: Vec<f64>,
    /// Flow arrivals span this long; the run lasts `horizon_s`.
    pub duration_s: f64,
    pub horizon_s: f64,
    pub period_s: f64,
    /// ECN-capable senders; off gives a plain drop-tail stack.
    pub ecn: bool,
    pub seed: u64,
    /// Each cell pools this many workloads, seeded `seed`, `seed + 1`, ...
    pub replicates: u32,
}

impl Default for IncastSweep {
    fn default() -> Self {
        IncastSweep {
            k: 6,
            victim_pod: 0,
            loads: vec![0.1, 0.2, 0.6, 0.8],
            pps: vec![0.0, 0.03, 0.06, 0.1],
            duration_s: 1.0,
            horizon_s: 5.0,
            period_s: 0.1,
            ecn: true,
            seed: 1,
            replicates: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncastRow {
    pub load: f64,
    pub pp: f64,
    pub flows: usize,
    pub mean_fct_s: f64,
    pub baseline_mean_fct_s: f64,
    pub ratio: f64,
    pub p99_ratio: Option<f64>,
    pub completed: usize,
}

pub const INCAST_CSV_HEADER: &str = "load,pp,flows,completed,mean_fct_s,baseline_mean_fct_s,ratio,p99_ratio";

impl IncastRow {
    pub fn csv(&self) -> String {
        let p99 = self.p99_ratio.map(|x| format!("{x:.4}")).unwrap_or_default();
        format!("{},{},{},{},{:.6},{:.6},{:.4},{p99}", self.load, self.pp, self.flows, self.completed, self.mean_fct_s, self.baseline_mean_fct_s, self.ratio)
    }
}

impl IncastSweep {
    /// One aggregation switch per non-victim pod steers victim-pod traffic
    /// towards the first core switch during the shared pulse.
    pub fn scenario(&self, load: f64, pp: f64) -> Scenario {
        let mut s = Scenario::new(&format!("incast_load{load}_pp{pp}"), TopologySpec::FatTree { k: self.k, link: LinkParams::datacenter() }, self.horizon_s);
        s.seed = self.seed;
        s.report_dst_pod = Some(self.victim_pod);
        s.tcp.ecn = self.ecn;
        s.workload.push(WorkloadPart::Poisson(PoissonWorkload {
            load,
            sizes: SizeDist::Websearch,
            duration_s: self.duration_s,
            start_s: 0.0,
            dst_pod: None,
            dst_pod_share: 1.0,
        }));
        for pod in (0..self.k).filter(|&p| p != self.victim_pod) {
            s.attacks.push(AttackConfig {
                switch: format!("agg{pod}_0"),
                kind: AttackKind::Incast { victim_pod: self.victim_pod, core: "core0_0".into(), pp, period_s: self.period_s, epoch_s: 0.0 },
                target: TargetSelector::default(),
                budget: None,
            });
        }
        s
    }

    pub fn csv(rows: &[IncastRow]) -> String {
        let mut s = format!("{INCAST_CSV_HEADER}\n");
        for r in rows {
            let _ = writeln!(s, "{}", r.csv());
        }
        s
    }
}

/// Mean FCT of flows into the victim pod, for every load and pulse
/// proportion, against the same workloads without attackers.
pub fn run_incast_sweep(sweep: &IncastSweep) -> Result<Vec<IncastRow>, HarnessError> {
    if sweep.replicates == 0 {
        return Err(HarnessError::invalid("replicates", "must be at least 1"));
    }
    let seeds: Vec<u64> = (0..sweep.replicates as u64).map(|i| sweep.seed + i).collect();
    let cells: Vec<(f64, Option<f64>, u64)> = sweep
        .loads
        .iter()
        .flat_map(|&l| std::iter::once(None).chain(sweep.pps.iter().map(|&p| Some(p))).map(move |p| (l, p)))
        .flat_map(|(l, p)| seeds.iter().map(move |&s| (l, p, s)))
        .collect();
    let runs = cells
        .par_iter()
        .map(|&(load, pp, seed)| {
            let mut s = sweep.scenario(load, pp.unwrap_or(0.0));
            s.seed = seed;
            let topo = Arc::new(s.validate()?);
            let flows = workload::generate(&s.workload, &topo, s.seed)?;
            let compromised = s.compromised(&topo);
            let run = execute(&s, &topo, &flows, &compromised, pp.is_some(), false)?;
            Ok(((load, pp), topo, s.report_dst_pod, run))
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let pooled = |load: f64, pp: Option<f64>| {
        runs.iter().filter(|r| r.0 == (load, pp)).flat_map(|(_, topo, pod, run)| reported(topo, *pod, run)).collect::<Vec<&FlowResult>>()
    };
    let mean = |fs: &[&FlowResult]| fs.iter().map(|f| f.fct.unwrap_or(f.elapsed).as_secs_f64()).sum::<f64>() / fs.len().max(1) as f64;
    let mut rows = Vec::new();
    for &load in &sweep.loads {
        let b = pooled(load, None);
        for &pp in &sweep.pps {
            let a = pooled(load, Some(pp));
            let m = Multipliers::compute(&b, &a);
            rows.push(IncastRow {
                load,
                pp,
                flows: a.len(),
                mean_fct_s: mean(&a),
                baseline_mean_fct_s: mean(&b),
                ratio: m.fct_mean.unwrap_or(f64::NAN),
                p99_ratio: m.fct_p99,
                completed: m.completed_attacked,
            });
        }
    }
    Ok(rows)
}

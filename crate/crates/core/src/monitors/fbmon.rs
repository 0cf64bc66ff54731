use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{median, quantile, Blamed, Monitor, Verdict, VerdictInput};
use crate::topology::NodeId;
use crate::transport::{FlowResult, FlowStatus};
use crate::world::Observer;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FbMonConfig {
    /// Paths (core tags) with fewer flows are not judged.
    pub min_flows: usize,
    /// Outlier if above the other paths' median + `iqr_factor` × IQR ...
    pub iqr_factor: f64,
    /// ... and at least `min_ratio` × the median ...
    pub min_ratio: f64,
    /// ... and above the median by at least the metric's floor.
    pub fail_floor: f64,
    pub retx_floor: f64,
    pub slow_floor: f64,
    /// A flow is slow when it takes `slow_factor` × its ideal time or longer.
    pub slow_factor: f64,
    pub ideal_rate_bps: f64,
    pub base_latency_us: f64,
}

impl Default for FbMonConfig {
    fn default() -> Self {
        FbMonConfig {
            min_flows: 5,
            iqr_factor: 3.0,
            min_ratio: 1.5,
            fail_floor: 0.05,
            retx_floor: 0.02,
            slow_floor: 0.1,
            slow_factor: 20.0,
            ideal_rate_bps: 1e9,
            base_latency_us: 200.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PathStats {
    pub flows: usize,
    pub failed: usize,
    pub slow: usize,
    pub retransmissions: u64,
    pub segments: u64,
}

impl PathStats {
    fn metrics(&self) -> [f64; 3] {
        let n = self.flows.max(1) as f64;
        [self.failed as f64 / n, self.retransmissions as f64 / self.segments.max(1) as f64, self.slow as f64 / n]
    }
}

/// Passive per-path comparison of live TCP outcomes. Switches stamp each
/// packet with the core it crossed; flows are grouped by the tags seen on
/// their forward and reverse halves, and a path whose failure, retransmission
/// or slow-flow rate stands out from its peers is flagged.
pub struct FbMon {
    name: String,
    cfg: FbMonConfig,
}

impl FbMon {
    pub fn new(name: &str, cfg: FbMonConfig) -> Self {
        FbMon { name: name.to_string(), cfg }
    }

    fn is_slow(&self, f: &FlowResult) -> bool {
        let took = f.fct.unwrap_or(f.elapsed).as_secs_f64();
        let ideal = self.cfg.base_latency_us * 1e-6 + f.bytes as f64 * 8.0 / self.cfg.ideal_rate_bps;
        took >= self.cfg.slow_factor * ideal
    }

    pub fn path_stats(&self, flows: &[FlowResult]) -> BTreeMap<NodeId, PathStats> {
        let mut out: BTreeMap<NodeId, PathStats> = BTreeMap::new();
        for f in flows {
            let failed = matches!(f.status, FlowStatus::Failed | FlowStatus::Disconnected | FlowStatus::TimedOut);
            let slow = !failed && self.is_slow(f);
            let mut tags = vec![];
            tags.extend(f.fwd_core_tag);
            if f.rev_core_tag != f.fwd_core_tag {
                tags.extend(f.rev_core_tag);
            }
            for t in tags {
                let s = out.entry(t).or_default();
                s.flows += 1;
                s.failed += failed as usize;
                s.slow += slow as usize;
                s.retransmissions += f.retransmissions;
                s.segments += f.segments_sent;
            }
        }
        out
    }
}

impl Observer for FbMon {
    fn wants_packets(&self) -> bool {
        false
    }
}

impl Monitor for FbMon {
    fn name(&self) -> &str {
        &self.name
    }

    fn verdict(&self, input: &VerdictInput) -> Verdict {
        let stats: Vec<(NodeId, [f64; 3])> = self
            .path_stats(input.flows)
            .into_iter()
            .filter(|(_, s)| s.flows >= self.cfg.min_flows)
            .map(|(t, s)| (t, s.metrics()))
            .collect();
        let floors = [self.cfg.fail_floor, self.cfg.retx_floor, self.cfg.slow_floor];
        let mut blamed: BTreeMap<NodeId, f64> = BTreeMap::new();
        for (m, floor) in floors.iter().enumerate() {
            for (i, (tag, v)) in stats.iter().enumerate() {
                let peers: Vec<f64> = stats.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, s)| s.1[m]).collect();
                let (Some(med), Some(q1), Some(q3)) = (median(&peers), quantile(&peers, 0.25), quantile(&peers, 0.75)) else {
                    continue;
                };
                let bar = (med + self.cfg.iqr_factor * (q3 - q1)).max(self.cfg.min_ratio * med).max(med + floor);
                if v[m] > bar {
                    let e = blamed.entry(*tag).or_default();
                    *e = e.max(v[m] - med);
                }
            }
        }
        Verdict::blaming(&self.name, blamed.into_iter().map(|(t, s)| (Blamed::Node(t), s)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simcore::SimTime;
    use crate::topology::{build_fat_tree, LinkParams};

    fn flow(tag: NodeId, slow: bool) -> FlowResult {
        let fct = if slow { SimTime::from_secs(1) } else { SimTime::from_millis(1) };
        FlowResult {
            flow_id: 0,
            src: NodeId(0),
            dst: NodeId(1),
            bytes: 10_000,
            start: SimTime::ZERO,
            establishment_time: Some(SimTime::from_micros(100)),
            fct: Some(fct),
            status: FlowStatus::Completed,
            elapsed: fct,
            retransmissions: 0,
            timeouts: 0,
            segments_sent: 7,
            srtt: None,
            fwd_core_tag: Some(tag),
            rev_core_tag: Some(tag),
            delivered: 10_000,
        }
    }

    fn verdict(slow_per_core: &[usize]) -> Verdict {
        let topo = build_fat_tree(4, LinkParams::datacenter()).unwrap();
        let cores: Vec<NodeId> = ["core0_0", "core0_1", "core1_0", "core1_1"].iter().map(|c| topo.by_name(c).unwrap()).collect();
        let flows: Vec<FlowResult> = cores.iter().zip(slow_per_core).flat_map(|(&c, &slow)| (0..40).map(move |i| flow(c, i < slow))).collect();
        FbMon::new("FB-mon", FbMonConfig::default()).verdict(&VerdictInput { topo: &topo, flows: &flows, end: SimTime::from_secs(10) })
    }

    #[test]
    fn uniform_paths_are_quiet() {
        assert!(!verdict(&[4, 5, 4, 6]).alarm);
    }

    #[test]
    fn one_bad_path_among_four_is_blamed() {
        let v = verdict(&[4, 5, 4, 14]);
        assert!(v.alarm);
        assert_eq!(v.blamed.len(), 1);
        // 14/40 against a peer median of 4/40
        assert!((v.blamed[0].1 - 0.25).abs() < 1e-12);
    }
}

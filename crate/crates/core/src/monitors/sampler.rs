use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{median, Blamed, Monitor, Verdict, VerdictInput};
use crate::simcore::{mix64, SimTime};
use crate::topology::{LinkId, Role, Topology};
use crate::transport::Packet;
use crate::world::{Observation, Observer, ObserverCtx};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    /// Each packet independently (sFlow).
    Packet,
    /// Every packet of a sampled flow (NetFlow with flow sampling).
    Flow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    /// Sample one in `one_in` packets (or flows).
    pub one_in: u64,
    /// A link alarms when its loss estimate exceeds `loss_factor` × the median.
    pub loss_factor: f64,
    /// ... and also exceeds this absolute loss rate.
    pub loss_floor: f64,
    /// Links with fewer sampled transmissions are not judged.
    pub min_samples: u64,
    /// Also alarm on links whose sampled volume exceeds `volume_factor` × the median.
    pub volume_check: bool,
    pub volume_factor: f64,
    /// Samples still in flight this close to the end are not counted as lost.
    pub grace_ms: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            one_in: 1000,
            loss_factor: 3.0,
            loss_floor: 0.05,
            min_samples: 50,
            volume_check: false,
            volume_factor: 3.0,
            grace_ms: 50.0,
        }
    }
}

/// Hash-based trajectory sampling: a selected packet is reported by every
/// switch it crosses, which lets the collector compare what left one end of a
/// link with what arrived at the other.
pub struct Sampler {
    name: String,
    mode: SampleMode,
    cfg: SamplerConfig,
    switch_link: Vec<bool>,
    tx: Vec<u64>,
    rx: Vec<u64>,
    pending: HashMap<(LinkId, u64), SimTime>,
}

impl Sampler {
    pub fn new(name: &str, mode: SampleMode, cfg: SamplerConfig, topo: &Topology) -> Self {
        let n = topo.links().len();
        let switch_link = topo.links().iter().map(|l| topo.node(l.from).role != Role::Host).collect();
        Sampler {
            name: name.to_string(),
            mode,
            cfg,
            switch_link,
            tx: vec![0; n],
            rx: vec![0; n],
            pending: HashMap::new(),
        }
    }

    fn sampled(&self, pkt: &Packet) -> bool {
        let key = match self.mode {
            SampleMode::Packet => mix64(pkt.uid ^ 0x5a3b_1e00),
            SampleMode::Flow => {
                let t = pkt.tuple();
                // direction-independent so both halves of a connection are kept
                let canon = if (t.src, t.sport) <= (t.dst, t.dport) { t } else { t.reversed() };
                canon.hash_with(0x5a3b_1e01)
            }
        };
        key % self.cfg.one_in.max(1) == 0
    }

    /// Per-link (transmitted, lost) sample counts as of `end`.
    pub fn link_counts(&self, end: SimTime) -> Vec<(u64, u64)> {
        let cutoff = end.saturating_sub(SimTime::from_secs_f64(self.cfg.grace_ms / 1000.0));
        let mut lost = vec![0u64; self.tx.len()];
        let mut young = vec![0u64; self.tx.len()];
        for (&(l, _), &t) in &self.pending {
            if t <= cutoff {
                lost[l.0 as usize] += 1;
            } else {
                young[l.0 as usize] += 1;
            }
        }
        (0..self.tx.len()).map(|i| (self.tx[i] - young[i], lost[i])).collect()
    }
}

impl Observer for Sampler {
    fn observe(&mut self, obs: &Observation, ctx: &mut ObserverCtx) {
        match *obs {
            Observation::SwitchEgress { link, pkt, .. } if self.switch_link[link.0 as usize] && self.sampled(pkt) => {
                self.tx[link.0 as usize] += 1;
                self.pending.insert((link, pkt.uid), ctx.now);
            }
            Observation::LinkDeliver { link, pkt } if self.switch_link[link.0 as usize] => {
                if self.pending.remove(&(link, pkt.uid)).is_some() {
                    self.rx[link.0 as usize] += 1;
                }
            }
            _ => {}
        }
    }
}

impl Monitor for Sampler {
    fn name(&self) -> &str {
        &self.name
    }

    fn verdict(&self, input: &VerdictInput) -> Verdict {
        let counts = self.link_counts(input.end);
        let judged: Vec<(usize, f64, u64)> = counts
            .iter()
            .enumerate()
            .filter(|(_, (tx, _))| *tx >= self.cfg.min_samples)
            .map(|(i, &(tx, lost))| (i, lost as f64 / tx as f64, tx))
            .collect();
        let mut blamed = Vec::new();
        if let Some(med) = median(&judged.iter().map(|j| j.1).collect::<Vec<_>>()) {
            let bar = (self.cfg.loss_factor * med).max(self.cfg.loss_floor);
            blamed.extend(judged.iter().filter(|j| j.1 > bar).map(|j| (Blamed::Link(LinkId(j.0 as u32)), j.1)));
        }
        if self.cfg.volume_check {
            let vols: Vec<f64> = counts.iter().filter(|c| c.0 > 0).map(|c| c.0 as f64).collect();
            if let Some(med) = median(&vols) {
                for (i, c) in counts.iter().enumerate() {
                    let id = Blamed::Link(LinkId(i as u32));
                    if c.0 >= self.cfg.min_samples && c.0 as f64 > self.cfg.volume_factor * med && !blamed.iter().any(|b| b.0 == id) {
                        blamed.push((id, c.0 as f64 / med));
                    }
                }
            }
        }
        Verdict::blaming(&self.name, blamed)
    }
}

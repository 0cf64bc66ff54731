use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::simcore::{RngStream, SimTime};
use crate::topology::{NodeId, Role, Topology};
use crate::world::FlowSpec;

/// Web-search flow sizes, in 1460-byte packets, as the cumulative
/// distribution published with the pFabric simulations (Alizadeh et al.,
/// "pFabric: Minimal Near-Optimal Datacenter Transport", SIGCOMM 2013,
/// `CDF_search.tcl`), itself taken from the DCTCP production measurements.
/// Sizes between points are interpolated linearly.
pub const WEBSEARCH_CDF: &[(f64, f64)] = &[
    (6.0, 0.0),
    (6.0, 0.15),
    (13.0, 0.2),
    (19.0, 0.3),
    (33.0, 0.4),
    (53.0, 0.53),
    (133.0, 0.6),
    (667.0, 0.7),
    (1333.0, 0.8),
    (3333.0, 0.9),
    (6667.0, 0.97),
    (20000.0, 1.0),
];

pub const WEBSEARCH_PACKET_BYTES: f64 = 1460.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SizeDist {
    Websearch,
    Constant { bytes: u64 },
    /// Piecewise-linear CDF given as (size in bytes, cumulative probability).
    Cdf { points: Vec<(f64, f64)> },
}

/// Piecewise-linear empirical CDF over flow sizes in bytes.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalCdf {
    points: Vec<(f64, f64)>,
}

impl EmpiricalCdf {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, HarnessError> {
        let bad = |m: &str| Err(HarnessError::invalid("workload.sizes", m));
        if points.len() < 2 {
            return bad("CDF needs at least two points");
        }
        if points.windows(2).any(|w| w[1].0 < w[0].0 || w[1].1 < w[0].1) {
            return bad("CDF must be monotone");
        }
        if points[0].0 <= 0.0 {
            return bad("sizes must be positive");
        }
        if (points.last().unwrap().1 - 1.0).abs() > 1e-9 || points[0].1 < 0.0 {
            return bad("CDF must end at 1");
        }
        Ok(EmpiricalCdf { points })
    }

    pub fn websearch() -> Self {
        EmpiricalCdf { points: WEBSEARCH_CDF.iter().map(|&(p, c)| (p * WEBSEARCH_PACKET_BYTES, c)).collect() }
    }

    /// Inverse-CDF sample for a uniform `u` in [0, 1).
    pub fn quantile(&self, u: f64) -> f64 {
        let p = &self.points;
        if u <= p[0].1 {
            return p[0].0;
        }
        for w in p.windows(2) {
            let ((x0, c0), (x1, c1)) = (w[0], w[1]);
            if u <= c1 {
                return if c1 > c0 { x0 + (x1 - x0) * (u - c0) / (c1 - c0) } else { x1 };
            }
        }
        p.last().unwrap().0
    }

    pub fn mean(&self) -> f64 {
        let p = &self.points;
        let mut m = p[0].0 * p[0].1;
        for w in p.windows(2) {
            m += (w[1].1 - w[0].1) * (w[0].0 + w[1].0) / 2.0;
        }
        m
    }
}

impl SizeDist {
    pub fn cdf(&self) -> Result<EmpiricalCdf, HarnessError> {
        match self {
            SizeDist::Websearch => Ok(EmpiricalCdf::websearch()),
            SizeDist::Constant { bytes } if *bytes > 0 => EmpiricalCdf::new(vec![(*bytes as f64, 0.0), (*bytes as f64, 1.0)]),
            SizeDist::Constant { .. } => Err(HarnessError::invalid("workload.sizes.bytes", "must be positive")),
            SizeDist::Cdf { points } => EmpiricalCdf::new(points.clone()),
        }
    }
}

fn default_share() -> f64 {
    1.0
}

/// Open-loop Poisson flow arrivals at every host. `load` is the fraction of
/// a host's access-link capacity it offers on average.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoissonWorkload {
    pub load: f64,
    pub sizes: SizeDist,
    pub duration_s: f64,
    #[serde(default)]
    pub start_s: f64,
    /// Send this share of flows to hosts of one pod; the rest pick any host.
    #[serde(default)]
    pub dst_pod: Option<u32>,
    #[serde(default = "default_share")]
    pub dst_pod_share: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitFlow {
    pub src: String,
    pub dst: String,
    pub bytes: u64,
    #[serde(default)]
    pub start_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WorkloadPart {
    Flow(ExplicitFlow),
    Poisson(PoissonWorkload),
}

fn host(topo: &Topology, name: &str, path: &str) -> Result<NodeId, HarnessError> {
    match topo.by_name(name) {
        Some(id) if topo.node(id).role == Role::Host => Ok(id),
        _ => Err(HarnessError::invalid(path, &format!("'{name}' is not a host"))),
    }
}

impl PoissonWorkload {
    pub fn validate(&self, path: &str, pods: Option<u32>) -> Result<(), HarnessError> {
        if !(self.load > 0.0 && self.load <= 1.0) {
            return Err(HarnessError::invalid(&format!("{path}.load"), "must be in (0, 1]"));
        }
        if !(self.duration_s > 0.0) || self.start_s < 0.0 {
            return Err(HarnessError::invalid(&format!("{path}.duration_s"), "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.dst_pod_share) {
            return Err(HarnessError::invalid(&format!("{path}.dst_pod_share"), "must be in [0, 1]"));
        }
        if let Some(p) = self.dst_pod {
            if pods.is_none_or(|n| p >= n) {
                return Err(HarnessError::invalid(&format!("{path}.dst_pod"), &format!("pod {p} does not exist")));
            }
        }
        self.sizes.cdf().map(|_| ())
    }

    /// Flows in arrival order per host, hosts in id order.
    pub fn generate(&self, topo: &Topology, rng: &RngStream) -> Result<Vec<FlowSpec>, HarnessError> {
        let cdf = self.sizes.cdf()?;
        let hosts: Vec<NodeId> = topo.hosts().collect();
        let in_pod: Vec<NodeId> = match self.dst_pod {
            Some(p) => hosts.iter().copied().filter(|&h| topo.node(h).pod == p).collect(),
            None => Vec::new(),
        };
        let mut flows = Vec::new();
        let end = self.start_s + self.duration_s;
        for &h in &hosts {
            let Some(access) = topo.out_links(h).first().map(|&l| topo.link(l).params) else { continue };
            let rate = self.load * access.bandwidth_bps as f64 / (8.0 * cdf.mean());
            let mut r = rng.child(&format!("host/{}", h.0));
            let mut t = self.start_s;
            loop {
                t += r.exponential(rate)?;
                if t >= end {
                    break;
                }
                let pool: Vec<NodeId> = if !in_pod.is_empty() && r.uniform01() < self.dst_pod_share {
                    in_pod.iter().copied().filter(|&d| d != h).collect()
                } else {
                    hosts.iter().copied().filter(|&d| d != h).collect()
                };
                if pool.is_empty() {
                    continue;
                }
                let dst = pool[r.index(pool.len())];
                let bytes = cdf.quantile(r.uniform01()).round().max(1.0) as u64;
                flows.push(FlowSpec { src: h, dst, bytes, start: SimTime::from_secs_f64(t) });
            }
        }
        Ok(flows)
    }
}

/// Expands a workload into flows. Each part draws from its own stream.
pub fn generate(parts: &[WorkloadPart], topo: &Topology, seed: u64) -> Result<Vec<FlowSpec>, HarnessError> {
    let root = RngStream::new(seed, "workload");
    let mut out = Vec::new();
    for (i, part) in parts.iter().enumerate() {
        let path = format!("workload[{i}]");
        match part {
            WorkloadPart::Flow(f) => {
                if f.bytes == 0 || f.start_s < 0.0 {
                    return Err(HarnessError::invalid(&path, "bytes must be positive and start_s non-negative"));
                }
                let (src, dst) = (host(topo, &f.src, &format!("{path}.src"))?, host(topo, &f.dst, &format!("{path}.dst"))?);
                if src == dst {
                    return Err(HarnessError::invalid(&path, "src and dst must differ"));
                }
                out.push(FlowSpec { src, dst, bytes: f.bytes, start: SimTime::from_secs_f64(f.start_s) });
            }
            WorkloadPart::Poisson(p) => out.extend(p.generate(topo, &root.child(&i.to_string()))?),
        }
    }
    Ok(out)
}

use super::{Link, LinkId, LinkParams, Node, NodeId, Role, Shape, Topology, TopologyError};

struct Builder {
    nodes: Vec<Node>,
    links: Vec<Link>,
}

impl Builder {
    fn node(&mut self, role: Role, name: String, pod: u32, index: u32) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Node {
            id,
            role,
            name,
            pod,
            index,
        });
        id
    }

    /// Adds both directions of a cable.
    fn cable(&mut self, a: NodeId, b: NodeId, params: LinkParams) {
        for (from, to) in [(a, b), (b, a)] {
            let id = LinkId(self.links.len() as u32);
            self.links.push(Link {
                id,
                from,
                to,
                params,
            });
        }
    }
}

/// Builds a k-ary fat-tree: k pods of k/2 ToRs and k/2 aggregation switches,
/// (k/2)² cores, k/2 hosts per ToR. Core `core{j}_{i}` connects to aggregation
/// switch `j` of every pod.
///
/// Node ids are dense in the order hosts, ToRs, aggregation, core.
pub fn build_fat_tree(k: u32, params: LinkParams) -> Result<Topology, TopologyError> {
    if k < 4 || !k.is_multiple_of(2) {
        return Err(TopologyError::BadArity(k));
    }
    let half = k / 2;
    let mut b = Builder {
        nodes: Vec::new(),
        links: Vec::new(),
    };
    let mut hosts = Vec::new();
    for pod in 0..k {
        for t in 0..half {
            for h in 0..half {
                let id = b.node(Role::Host, format!("h{pod}_{t}_{h}"), pod, t * half + h);
                hosts.push(id);
            }
        }
    }
    let mut tors = Vec::new();
    for pod in 0..k {
        for t in 0..half {
            tors.push(b.node(Role::Tor, format!("tor{pod}_{t}"), pod, t));
        }
    }
    let mut aggs = Vec::new();
    for pod in 0..k {
        for a in 0..half {
            aggs.push(b.node(Role::Agg, format!("agg{pod}_{a}"), pod, a));
        }
    }
    let mut cores = Vec::new();
    for j in 0..half {
        for i in 0..half {
            cores.push(b.node(Role::Core, format!("core{j}_{i}"), j, i));
        }
    }
    for pod in 0..k {
        for t in 0..half {
            let tor = tors[(pod * half + t) as usize];
            for h in 0..half {
                let host = hosts[((pod * half + t) * half + h) as usize];
                b.cable(host, tor, params);
            }
            for a in 0..half {
                b.cable(tor, aggs[(pod * half + a) as usize], params);
            }
        }
        for a in 0..half {
            let agg = aggs[(pod * half + a) as usize];
            for i in 0..half {
                b.cable(agg, cores[(a * half + i) as usize], params);
            }
        }
    }
    Ok(Topology::assemble(Shape::FatTree { k }, b.nodes, b.links))
}

/// `h0 - s0 - ... - s{n-1} - h1`: host attachments use `access`, switch-to-switch
/// hops use `bottleneck`. With one switch both cables are bottleneck links.
pub fn build_single_path(
    switches: u32,
    bottleneck: LinkParams,
    access: LinkParams,
) -> Result<Topology, TopologyError> {
    if switches == 0 {
        return Err(TopologyError::NoSwitches);
    }
    let mut b = Builder {
        nodes: Vec::new(),
        links: Vec::new(),
    };
    let h0 = b.node(Role::Host, "h0".into(), 0, 0);
    let h1 = b.node(Role::Host, "h1".into(), 0, 1);
    let sw: Vec<NodeId> = (0..switches)
        .map(|i| b.node(Role::Tor, format!("s{i}"), 0, i))
        .collect();
    let edge = if switches == 1 { bottleneck } else { access };
    b.cable(h0, sw[0], edge);
    for w in sw.windows(2) {
        b.cable(w[0], w[1], bottleneck);
    }
    b.cable(sw[sw.len() - 1], h1, edge);
    Ok(Topology::assemble(
        Shape::SinglePath { switches },
        b.nodes,
        b.links,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simcore::RngStream;
    use crate::topology::FiveTuple;

    fn counts(t: &Topology) -> (usize, usize, usize, usize) {
        let c = |r| t.with_role(r).count();
        (c(Role::Host), c(Role::Tor), c(Role::Agg), c(Role::Core))
    }

    #[test]
    fn k4_has_twenty_switches_and_sixteen_hosts() {
        let t = build_fat_tree(4, LinkParams::datacenter()).unwrap();
        assert_eq!(counts(&t), (16, 8, 8, 4));
        assert_eq!(t.switches().count(), 20);
    }

    #[test]
    fn k6_has_forty_five_switches() {
        let t = build_fat_tree(6, LinkParams::datacenter()).unwrap();
        assert_eq!(t.switches().count(), 45);
        assert_eq!(t.hosts().count(), 54);
        assert_eq!(t.with_role(Role::Core).count(), 9);
    }

    #[test]
    fn degenerate_arity_rejected() {
        for k in [0, 1, 2, 3, 5] {
            assert_eq!(
                build_fat_tree(k, LinkParams::datacenter()).unwrap_err(),
                TopologyError::BadArity(k)
            );
        }
    }

    #[test]
    fn every_tor_has_half_k_hosts_and_uplinks() {
        let t = build_fat_tree(6, LinkParams::datacenter()).unwrap();
        for tor in t.with_role(Role::Tor) {
            let roles: Vec<Role> = t.neighbors(tor).map(|n| t.node(n).role).collect();
            assert_eq!(roles.iter().filter(|r| **r == Role::Host).count(), 3);
            assert_eq!(roles.iter().filter(|r| **r == Role::Agg).count(), 3);
        }
    }

    #[test]
    fn route_lengths_by_locality() {
        let t = build_fat_tree(4, LinkParams::datacenter()).unwrap();
        let tuple = |s: &str, d: &str| FiveTuple {
            src: t.by_name(s).unwrap(),
            dst: t.by_name(d).unwrap(),
            sport: 1000,
            dport: 80,
            proto: 6,
        };
        let same_rack = t.route(&tuple("h0_0_0", "h0_0_1"), 1).unwrap();
        let same_pod = t.route(&tuple("h0_0_0", "h0_1_0"), 1).unwrap();
        let inter_pod = t.route(&tuple("h0_0_0", "h3_1_1"), 1).unwrap();
        assert_eq!(same_rack.nodes().len(), 3);
        assert_eq!(same_pod.nodes().len(), 5);
        assert_eq!(inter_pod.nodes().len(), 7);
        for r in [same_rack, same_pod, inter_pod] {
            assert!(r.is_loop_free());
        }
    }

    #[test]
    fn ecmp_is_deterministic_and_balanced() {
        let t = build_fat_tree(4, LinkParams::datacenter()).unwrap();
        let tor = t.by_name("tor0_0").unwrap();
        let src = t.by_name("h0_0_0").unwrap();
        let dst = t.by_name("h2_0_0").unwrap();
        let mut rng = RngStream::new(11, "ecmp-test");
        let mut hits = std::collections::HashMap::new();
        let n = 100_000;
        for _ in 0..n {
            let tuple = FiveTuple {
                src,
                dst,
                sport: rng.uniform_int(1024, 65536).unwrap() as u16,
                dport: rng.uniform_int(1, 65536).unwrap() as u16,
                proto: 6,
            };
            let a = t.ecmp_next_hop(&tuple, tor, 99).unwrap();
            assert_eq!(Some(a), t.ecmp_next_hop(&tuple, tor, 99));
            *hits.entry(a).or_insert(0u32) += 1;
        }
        assert_eq!(hits.len(), 2);
        for c in hits.values() {
            let frac = *c as f64 / n as f64;
            assert!((frac - 0.5).abs() <= 0.02, "uplink share {frac}");
        }
    }

    #[test]
    fn unroutable_destination_has_no_hop() {
        let t = build_fat_tree(4, LinkParams::datacenter()).unwrap();
        let tuple = FiveTuple {
            src: NodeId(0),
            dst: NodeId(10_000),
            sport: 1,
            dport: 2,
            proto: 6,
        };
        assert!(t.ecmp_next_hop(&tuple, t.by_name("tor0_0").unwrap(), 0).is_none());
    }

    #[test]
    fn shortest_paths_count_inter_pod() {
        let t = build_fat_tree(4, LinkParams::datacenter()).unwrap();
        let paths = t.shortest_paths(t.by_name("h0_0_0").unwrap(), t.by_name("h1_0_0").unwrap());
        // 2 aggs x 2 cores each
        assert_eq!(paths.len(), 4);
    }

    #[test]
    fn single_path_layout() {
        let t = build_single_path(
            2,
            LinkParams::testbed_bottleneck(),
            LinkParams::testbed_access(),
        )
        .unwrap();
        assert_eq!(t.nodes().len(), 4);
        let tuple = FiveTuple {
            src: t.by_name("h0").unwrap(),
            dst: t.by_name("h1").unwrap(),
            sport: 1,
            dport: 80,
            proto: 6,
        };
        let r = t.route(&tuple, 0).unwrap();
        let names: Vec<&str> = r.nodes().iter().map(|n| t.node(*n).name.as_str()).collect();
        assert_eq!(names, ["h0", "s0", "s1", "h1"]);
        assert!(build_single_path(0, LinkParams::datacenter(), LinkParams::datacenter()).is_err());
    }

    #[test]
    fn dump_lists_every_node_and_link() {
        let t = build_fat_tree(4, LinkParams::datacenter()).unwrap();
        let d = t.dump();
        assert!(d.starts_with("# topology fat-tree k=4"));
        assert_eq!(d.lines().filter(|l| l.starts_with("node ")).count(), 36);
        assert_eq!(d.lines().filter(|l| l.starts_with("link ")).count(), t.links().len());
    }
}

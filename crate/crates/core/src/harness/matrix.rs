use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{run_scenario, Multipliers};
use super::scenario::{Scenario, TopologySpec};
use super::workload::{PoissonWorkload, SizeDist, WorkloadPart};
use super::HarnessError;
use crate::dataplane::{AttackConfig, AttackKind, TargetSelector, TracerouteMode};
use crate::monitors::{FbMonConfig, MirrorConfig, MonitorConfig, O07Config, VerdictClass};
use crate::topology::LinkParams;

/// Rows of the evasion matrix, in order.
pub const ATTACK_ROWS: [&str; 8] = [
    "SYN Drop",
    "Same Sequence Drop",
    "SYN Flood",
    "RST Tinker",
    "ACK and Drop",
    "ECN Tinker",
    "CWND Tinker",
    "Coordinated Incast",
];

/// Whether each attack gets past each monitor (column order of
/// `MonitorConfig::matrix_columns`). Only mirroring catches the three attacks
/// that touch TCP control packets.
pub fn expected_matrix() -> [[bool; 7]; 8] {
    let mut m = [[true; 7]; 8];
    for row in [0, 2, 3] {
        m[row][6] = false;
    }
    m
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixCell {
    pub attack: String,
    pub monitor: String,
    pub class: VerdictClass,
    pub blamed: Vec<String>,
    /// What the cell must show: evaded (Undetected or Misdirected) or Localized.
    pub expect_evaded: bool,
}

impl MatrixCell {
    pub fn ok(&self) -> bool {
        self.class.evaded() == self.expect_evaded
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub attack: String,
    pub scenario: String,
    pub multipliers: Multipliers,
    pub cells: Vec<MatrixCell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixReport {
    pub rows: Vec<MatrixRow>,
    /// Single-monitor runs without the misdirection or with a heavier
    /// monitor configuration; each must come out `Localized`.
    pub variants: Vec<MatrixCell>,
}

impl MatrixReport {
    pub fn mismatches(&self) -> Vec<String> {
        let mut out = Vec::new();
        for c in self.rows.iter().flat_map(|r| &r.cells).chain(&self.variants) {
            if !c.ok() {
                let want = if c.expect_evaded { "Undetected or Misdirected" } else { "Localized" };
                out.push(format!("{} / {}: got {} (blamed {}), want {want}", c.attack, c.monitor, c.class, c.blamed.join(";")));
            }
        }
        out
    }

    /// Text table: ✓ when the attack got past the monitor, ✗ when it was
    /// localized, with U/M/L for the verdict class.
    pub fn render(&self) -> String {
        let cols = MonitorConfig::matrix_columns();
        let mut s = format!("{:<20}", "Attack");
        for c in &cols {
            let _ = write!(s, " {:>10}", c.label());
        }
        s.push_str("   FCT x (mean)\n");
        for r in &self.rows {
            let _ = write!(s, "{:<20}", r.attack);
            for c in &r.cells {
                let mark = if c.class.evaded() { "✓" } else { "✗" };
                let tag = &c.class.as_str()[..1];
                let bad = if c.ok() { " " } else { "!" };
                let _ = write!(s, " {:>9}{bad}", format!("{mark} {tag}"));
            }
            let m = r.multipliers.fct_mean.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(s, "   {m}");
        }
        if !self.variants.is_empty() {
            s.push_str("\nVariants:\n");
            for v in &self.variants {
                let _ = writeln!(s, "  {:<60} {}{}", format!("{} / {}", v.attack, v.monitor), v.class, if v.ok() { "" } else { "  (mismatch)" });
            }
        }
        s
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("attack,monitor,verdict,evaded,expected_evaded,blamed\n");
        for c in self.rows.iter().flat_map(|r| &r.cells).chain(&self.variants) {
            let _ = writeln!(s, "{},{},{},{},{},{}", c.attack, c.monitor, c.class, c.class.evaded(), c.expect_evaded, c.blamed.join(";"));
        }
        s
    }
}

fn attack(switch: &str, kind: AttackKind) -> AttackConfig {
    AttackConfig { switch: switch.into(), kind, target: TargetSelector::default(), budget: None }
}

/// Program pair that points monitors away from `switch`: rewritten core IDs
/// and forged traceroute answers.
fn misdirection(switch: &str, fake_core: &str) -> [AttackConfig; 2] {
    [
        attack(switch, AttackKind::MisdirectCoreId { fake_core: fake_core.into() }),
        attack(switch, AttackKind::MisdirectTraceroute { mode: TracerouteMode::Knowledge }),
    ]
}

fn background(load: f64, duration_s: f64, dst_pod: Option<u32>, share: f64) -> WorkloadPart {
    WorkloadPart::Poisson(PoissonWorkload { load, sizes: SizeDist::Websearch, duration_s, start_s: 0.0, dst_pod, dst_pod_share: share })
}

fn base(name: &str, seed: u64, horizon_s: f64) -> Scenario {
    let mut s = Scenario::new(name, TopologySpec::FatTree { k: 4, link: LinkParams::datacenter() }, horizon_s);
    s.seed = seed;
    s.workload.push(background(0.1, 1.0, None, 1.0));
    s.monitors = MonitorConfig::matrix_columns();
    s
}

/// One scenario per matrix row, each running all seven monitors at once.
pub fn matrix_cells(seed: u64) -> Vec<(&'static str, Scenario)> {
    let core = "core0_0";
    let row = |i: usize, kind: AttackKind, horizon: f64| {
        let mut s = base(&format!("matrix_{}", ATTACK_ROWS[i].to_lowercase().replace(' ', "_")), seed, horizon);
        s.attacks.push(attack(core, kind));
        s.attacks.extend(misdirection(core, "core1_1"));
        (ATTACK_ROWS[i], s)
    };
    let mut rows = vec![
        row(0, AttackKind::SynDrop { max_drops: Some(6) }, 20.0),
        row(1, AttackKind::SameSeqDrop { nth: 1, max_drops: Some(5) }, 15.0),
    ];
    let mut flood = base("matrix_syn_flood", seed, 10.0);
    flood.attacks.push(attack(
        "tor0_0",
        AttackKind::SynFlood { victim: "h0_0_0".into(), rate_pps: 1000.0, start_s: 0.0, count: None, cookie_ack: true },
    ));
    flood.attacks.extend(misdirection("tor0_0", "core1_1"));
    flood.syn_cookie_hosts.push("h0_0_0".into());
    rows.push((ATTACK_ROWS[2], flood));
    rows.push(row(3, AttackKind::RstTinker { nth: 5 }, 10.0));
    rows.push(row(4, AttackKind::AckAndDrop { nth: 10 }, 10.0));
    rows.push(row(5, AttackKind::EcnTinker { fraction: 0.5 }, 10.0));
    rows.push(row(6, AttackKind::CwndTinker { window: 1 }, 10.0));
    let mut incast = base("matrix_coordinated_incast", seed, 10.0);
    incast.workload = vec![background(0.3, 1.0, Some(0), 0.5)];
    incast.report_dst_pod = Some(0);
    for agg in ["agg1_0", "agg2_0", "agg3_0"] {
        incast.attacks.push(attack(agg, AttackKind::Incast { victim_pod: 0, core: core.into(), pp: 0.5, period_s: 0.1, epoch_s: 0.0 }));
    }
    rows.push((ATTACK_ROWS[7], incast));
    rows
}

/// The same attacks with one defence strengthened or one misdirection
/// removed; each must be localized.
pub fn variant_scenarios(seed: u64) -> Vec<(String, &'static str, Scenario)> {
    let core = "core0_0";
    let mut out = Vec::new();

    let mut s = base("variant_007_honest_traceroute", seed, 15.0);
    s.monitors = vec![MonitorConfig::O07(O07Config::default())];
    s.attacks.push(attack(core, AttackKind::SameSeqDrop { nth: 1, max_drops: Some(5) }));
    out.push(("Same Sequence Drop, no traceroute spoofing".to_string(), "007", s));

    let mut s = base("variant_fbmon_honest_core_id", seed, 10.0);
    s.monitors = vec![MonitorConfig::FbMon(FbMonConfig::default())];
    s.attacks.push(attack(core, AttackKind::CwndTinker { window: 1 }));
    out.push(("CWND Tinker, no core-ID rewrite".to_string(), "FB-mon", s));

    let mut s = base("variant_everflow_mirror_data", seed, 10.0);
    s.monitors = vec![MonitorConfig::Everflow(MirrorConfig { mirror_data: true, data_capacity: u64::MAX, ..MirrorConfig::default() })];
    s.attacks.push(attack(core, AttackKind::AckAndDrop { nth: 10 }));
    s.attacks.extend(misdirection(core, "core1_1"));
    out.push(("ACK and Drop, data mirrored".to_string(), "Everflow", s));
    out
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool, HarnessError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n.max(1));
    }
    b.build().map_err(|e| HarnessError::invalid("parallel", &e.to_string()))
}

/// Runs every matrix row and variant and compares them with the expected
/// matrix.
pub fn run_matrix(seed: u64, threads: Option<usize>) -> Result<MatrixReport, HarnessError> {
    let expected = expected_matrix();
    let labels: Vec<&str> = MonitorConfig::matrix_columns().iter().map(|c| c.label()).collect();
    let rows = matrix_cells(seed);
    let variants = variant_scenarios(seed);
    pool(threads)?.install(|| {
        let rows: Vec<MatrixRow> = rows
            .par_iter()
            .enumerate()
            .map(|(i, (name, s))| {
                let r = run_scenario(s, false)?;
                let cells = labels
                    .iter()
                    .enumerate()
                    .map(|(j, label)| {
                        let v = r.attacked.verdict(label).expect("every column monitor runs");
                        MatrixCell { attack: name.to_string(), monitor: label.to_string(), class: v.class, blamed: v.blamed.clone(), expect_evaded: expected[i][j] }
                    })
                    .collect();
                Ok(MatrixRow { attack: name.to_string(), scenario: s.name.clone(), multipliers: r.multipliers, cells })
            })
            .collect::<Result<_, HarnessError>>()?;
        let variants: Vec<MatrixCell> = variants
            .par_iter()
            .map(|(name, monitor, s)| {
                let r = run_scenario(s, false)?;
                let v = r.attacked.verdict(monitor).expect("variant monitor runs");
                Ok(MatrixCell { attack: name.clone(), monitor: monitor.to_string(), class: v.class, blamed: v.blamed.clone(), expect_evaded: false })
            })
            .collect::<Result<_, HarnessError>>()?;
        Ok(MatrixReport { rows, variants })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expected_matrix_has_three_localized_cells() {
        let m = expected_matrix();
        let caught: Vec<(usize, usize)> = (0..8).flat_map(|i| (0..7).map(move |j| (i, j))).filter(|&(i, j)| !m[i][j]).collect();
        assert_eq!(caught, vec![(0, 6), (2, 6), (3, 6)]);
    }

    #[test]
    fn every_template_validates() {
        for (_, s) in matrix_cells(1) {
            s.validate().unwrap();
            assert_eq!(s.monitors.len(), 7);
        }
        for (_, _, s) in variant_scenarios(1) {
            s.validate().unwrap();
        }
        assert_eq!(matrix_cells(1).len(), ATTACK_ROWS.len());
    }
}

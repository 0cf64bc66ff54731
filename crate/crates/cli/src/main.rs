use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use radarsim::coflow::{figure_grids, CoflowConfig, Strategy};
use radarsim::harness::{run_coflow_sweep, run_incast_sweep, run_matrix, run_scenario_file, write_report, IncastSweep, Scenario, TopologySpec};
use radarsim::topology::LinkParams;

#[derive(Parser)]
#[command(name = "radarsim", version, about = "Packet-level simulator for attacks by compromised switches and the monitors that miss them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Overrides the seed of the scenario or sweep.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for CSV and JSON artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for independent runs (default: all cores).
    #[arg(long)]
    parallel: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file with and without its attacks.
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Record a per-switch packet trace and write it with the report.
        #[arg(long)]
        trace: bool,
        /// Print the verdicts as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Run every attack against every monitor and print the evasion matrix.
    Matrix {
        #[command(flatten)]
        common: Common,
    },
    /// Victim-pod FCT under coordinated incast across loads and pulse proportions.
    IncastSweep {
        #[command(flatten)]
        common: Common,
        /// JSON file overriding fields of the default sweep.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Failed-coflow fraction against misclassification probability.
    CoflowSweep {
        #[command(flatten)]
        common: Common,
        /// Drop strategy, or `all`.
        #[arg(long, default_value = "all")]
        strategy: String,
        #[arg(long, default_value_t = 30)]
        trials: u32,
        /// Number of p_mc steps between 0 and 1.
        #[arg(long, default_value_t = 20)]
        steps: u32,
    },
    /// Print nodes, adjacency and link parameters.
    DumpTopology {
        /// Scenario file whose topology to print.
        scenario: Option<PathBuf>,
        /// Fat-tree arity when no scenario is given.
        #[arg(long, default_value_t = 4)]
        k: u32,
        /// Print the single-path testbed instead of a fat-tree.
        #[arg(long)]
        single_path: bool,
    },
}

fn threads(n: Option<usize>) -> Result<()> {
    if let Some(n) = n {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global().context("configuring worker threads")?;
    }
    Ok(())
}

fn write(dir: &Path, name: &str, body: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let p = dir.join(name);
    fs::write(&p, body).with_context(|| format!("writing {}", p.display()))?;
    eprintln!("wrote {}", p.display());
    Ok(())
}

fn fmt_ratio(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.2}x")).unwrap_or_else(|| "-".into())
}

fn run(path: &Path, common: Common, trace: bool, json: bool) -> Result<()> {
    threads(common.parallel)?;
    let report = run_scenario_file(path, common.seed, trace).with_context(|| format!("running {}", path.display()))?;
    if json {
        println!("{}", serde_json::to_string_pretty(&report.attacked.verdicts)?);
    } else {
        let m = &report.multipliers;
        println!("scenario {} (seed {})", report.name, report.seed);
        println!("compromised: {}", if report.compromised.is_empty() { "none".into() } else { report.compromised.join(", ") });
        println!(
            "flows {}  completed {} -> {}{}",
            m.flows,
            m.completed_baseline,
            m.completed_attacked,
            if report.partial { "  (some flows still running at the horizon)" } else { "" }
        );
        println!("FCT mean {}  p99 {}", fmt_ratio(m.fct_mean), fmt_ratio(m.fct_p99));
        println!("establishment mean {}  p99 {}", fmt_ratio(m.establishment_mean), fmt_ratio(m.establishment_p99));
        for v in &report.attacked.verdicts {
            println!("  {:<11} {:<11} {}", v.monitor, v.class.to_string(), v.blamed.join(" "));
        }
    }
    if let Some(dir) = &common.out {
        for p in write_report(&report, dir)? {
            eprintln!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn matrix(common: Common) -> Result<()> {
    let report = run_matrix(common.seed.unwrap_or(1), common.parallel)?;
    print!("{}", report.render());
    let bad = report.mismatches();
    if let Some(dir) = &common.out {
        write(dir, "matrix.csv", &report.csv())?;
        write(dir, "matrix.json", &serde_json::to_string_pretty(&report)?)?;
    }
    if !bad.is_empty() {
        for b in &bad {
            eprintln!("mismatch: {b}");
        }
        bail!("{} cells differ from the expected matrix", bad.len());
    }
    Ok(())
}

fn incast(common: Common, config: Option<PathBuf>) -> Result<()> {
    threads(common.parallel)?;
    let mut sweep = match config {
        Some(p) => {
            let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => IncastSweep::default(),
    };
    if let Some(s) = common.seed {
        sweep.seed = s;
    }
    let rows = run_incast_sweep(&sweep)?;
    let csv = IncastSweep::csv(&rows);
    print!("{csv}");
    if let Some(dir) = &common.out {
        write(dir, "incast_sweep.csv", &csv)?;
    }
    Ok(())
}

fn coflow(common: Common, strategy: &str, trials: u32, steps: u32) -> Result<()> {
    threads(common.parallel)?;
    let strategies: Vec<Strategy> = if strategy == "all" {
        Strategy::ALL.to_vec()
    } else {
        match Strategy::ALL.iter().find(|s| s.as_str() == strategy) {
            Some(s) => vec![*s],
            None => bail!("unknown strategy '{strategy}'; expected all, {}", Strategy::ALL.map(|s| s.as_str()).join(", ")),
        }
    };
    if steps == 0 {
        bail!("--steps must be at least 1");
    }
    let base = CoflowConfig { trials, seed: common.seed.unwrap_or(1), ..CoflowConfig::default() };
    let grids: Vec<(String, _)> = strategies
        .iter()
        .flat_map(|&s| figure_grids(base, s, steps))
        .map(|(name, g)| (name.to_string(), g))
        .collect();
    let results = run_coflow_sweep(&grids, common.out.as_deref())?;
    for ((name, grid), (_, rows)) in grids.iter().zip(&results) {
        println!("# {name} {}", grid.strategy.as_str());
        println!("{}", radarsim::coflow::SWEEP_CSV_HEADER);
        for r in rows {
            println!("{}", r.csv());
        }
    }
    Ok(())
}

fn dump(scenario: Option<PathBuf>, k: u32, single_path: bool) -> Result<()> {
    let spec = match scenario {
        Some(p) => Scenario::load(&p)?.topology,
        None if single_path => TopologySpec::SinglePath { switches: 2, bottleneck: LinkParams::testbed_bottleneck(), access: LinkParams::testbed_access() },
        None => TopologySpec::FatTree { k, link: LinkParams::datacenter() },
    };
    print!("{}", spec.build()?.dump());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { scenario, common, trace, json } => run(&scenario, common, trace, json),
        Command::Matrix { common } => matrix(common),
        Command::IncastSweep { common, config } => incast(common, config),
        Command::CoflowSweep { common, strategy, trials, steps } => coflow(common, &strategy, trials, steps),
        Command::DumpTopology { scenario, k, single_path } => dump(scenario, k, single_path),
    }
}

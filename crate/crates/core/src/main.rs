use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use handoff_sim::metrics::{plot_table, Figure, RunResults};
use handoff_sim::{build_standard_scenario, world, CasePreset, ScenarioConfig};

#[derive(Parser)]
#[command(name = "handoff-sim", version, about = "Load-balancing handoff simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario and write CSV results.
    Run {
        /// Built-in case, I to VI.
        #[arg(long, conflicts_with = "config", required_unless_present = "config")]
        case: Option<CasePreset>,
        /// Scenario file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Disable handoff (baseline).
        #[arg(long)]
        no_scheme: bool,
        #[arg(long)]
        horizon_s: Option<u64>,
    },
    /// Run a case over a range of seeds in parallel.
    Sweep {
        #[arg(long)]
        case: CasePreset,
        /// Inclusive range such as 1..10.
        #[arg(long)]
        seeds: String,
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
    },
    /// Print the table behind a figure from a results directory.
    Plotdata {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        figure: Figure,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, Failure> {
    let bad = || Failure::Config(format!("bad seed range {s:?}, expected A..B"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let a: u64 = a.trim().parse().map_err(|_| bad())?;
    let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
    if b < a {
        return Err(bad());
    }
    Ok((a..=b).collect())
}

fn summary(cfg: &ScenarioConfig, r: &RunResults) -> String {
    let secs = r.horizon_secs;
    let mut lines = vec![format!(
        "seed {} horizon {} s scheme {}",
        cfg.sim.seed,
        secs,
        if cfg.sim.scheme { "on" } else { "off" }
    )];
    let mut nodes: Vec<&str> = r.throughput.iter().map(|t| t.node.as_str()).collect();
    nodes.dedup();
    nodes.sort();
    nodes.dedup();
    for n in nodes {
        lines.push(format!("{n:>4} mean {:.3} Mbps", r.mean_bps(n, 0, secs) / 1e6));
    }
    lines.push(format!("handoffs {}", r.handoffs.len()));
    lines.push(format!("drops {}", r.total_drops()));
    lines.join("\n")
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Run {
            case,
            config,
            seed,
            out,
            no_scheme,
            horizon_s,
        } => {
            let mut cfg = match (case, config) {
                (Some(c), _) => build_standard_scenario(c, seed.unwrap_or(1)),
                (None, Some(p)) => ScenarioConfig::load(&p).map_err(|e| Failure::Config(e.to_string()))?,
                (None, None) => unreachable!("clap requires one"),
            };
            if let Some(s) = seed {
                cfg.sim.seed = s;
            }
            if no_scheme {
                cfg.sim.scheme = false;
            }
            if let Some(h) = horizon_s {
                cfg.sim.horizon = Duration::from_secs(h);
            }
            cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
            let r = world::run(&cfg).map_err(|e| Failure::Runtime(e.to_string()))?;
            r.export_csv(&out).map_err(|e| Failure::Runtime(e.to_string()))?;
            println!("{}", summary(&cfg, &r));
        }
        Cmd::Sweep { case, seeds, out } => {
            let seeds = parse_seeds(&seeds)?;
            let results: Vec<Result<(u64, f64), String>> = seeds
                .par_iter()
                .map(|&seed| {
                    let cfg = build_standard_scenario(case, seed);
                    let r = world::run(&cfg).map_err(|e| e.to_string())?;
                    r.export_csv(&out.join(format!("seed_{seed}"))).map_err(|e| e.to_string())?;
                    Ok((seed, r.mean_bps("ESS", 0, r.horizon_secs)))
                })
                .collect();
            for r in results {
                let (seed, ess) = r.map_err(Failure::Runtime)?;
                println!("seed {seed} ESS mean {:.3} Mbps", ess / 1e6);
            }
        }
        Cmd::Plotdata { input, figure } => {
            let t = plot_table(&input, figure).map_err(|e| Failure::Runtime(e.to_string()))?;
            print!("{t}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use svcgraph::catalog_io::{parse_catalog, parse_scenario, serialize_catalog};
use svcgraph::graph::{create_service_graph, export_dot};
use svcgraph::orchestrator::orchestrate;
use svcgraph::report::{architecture_report, epoch_report, graph_report};
use svcgraph::service_model::Catalog;
use svcgraph::sim::{run_scenario, SimOptions};
use svcgraph::verify::{dijkstra_solver, run_verification};
use svcgraph::CostWeights;

#[derive(Parser, Debug)]
#[command(name = "svcgraph", version, about = "Service-graph orchestration of control loops")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the service graph, print node costs and optionally write DOT.
    Graph {
        #[command(flatten)]
        common: CatalogArgs,
        /// Write the graph in DOT format, shortest path highlighted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Select the architecture and print its costs and wiring.
    Orchestrate {
        #[command(flatten)]
        common: CatalogArgs,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a closed-loop scenario.
    Simulate {
        #[command(flatten)]
        common: CatalogArgs,
        #[arg(long)]
        scenario: PathBuf,
        /// Directory for `trace.csv` and `epochs.txt`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Fill the step_us column with wall-clock compute time.
        #[arg(long)]
        timing: bool,
    },
    /// Cross-check Dijkstra against brute-force enumeration on random catalogs.
    Verify {
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the first offending catalog here on mismatch.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Corrupt the solver to exercise the failure path.
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

#[derive(Args, Debug)]
struct CatalogArgs {
    #[arg(long)]
    catalog: PathBuf,
    /// Weight of computational complexity (default 1).
    #[arg(long, requires = "beta")]
    alpha: Option<f64>,
    /// Weight of inaccuracy (default 100).
    #[arg(long, requires = "alpha")]
    beta: Option<f64>,
}

const DEFAULT_ALPHA: f64 = 1.0;
const DEFAULT_BETA: f64 = 100.0;

impl CatalogArgs {
    fn load(&self) -> Result<Catalog> {
        let text = read(&self.catalog)?;
        parse_catalog(&text).with_context(|| format!("{}", self.catalog.display()))
    }

    fn weights(&self, fallback: Option<CostWeights>) -> Result<CostWeights> {
        match (self.alpha, self.beta, fallback) {
            (Some(a), Some(b), _) => Ok(CostWeights::new(a, b)?),
            (_, _, Some(w)) => Ok(w),
            _ => Ok(CostWeights::new(DEFAULT_ALPHA, DEFAULT_BETA)?),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Graph { common, out } => {
            let catalog = common.load()?;
            let weights = common.weights(None)?;
            let graph = create_service_graph(&catalog, &weights)?;
            let arch = orchestrate(&catalog, &weights)?;
            if let Some(out) = out {
                write(&out, &export_dot(&graph, Some(&arch.path.nodes))?)?;
            }
            print!("{}", graph_report(&graph, &arch));
        }
        Command::Orchestrate { common, out } => {
            let catalog = common.load()?;
            let arch = orchestrate(&catalog, &common.weights(None)?)?;
            let report = architecture_report(&arch);
            if let Some(out) = out {
                write(&out, &report)?;
            }
            print!("{report}");
        }
        Command::Simulate { common, scenario, out, seed, timing } => {
            let catalog = common.load()?;
            let text = read(&scenario)?;
            let mut scn = parse_scenario(&text).with_context(|| format!("{}", scenario.display()))?;
            if let Some(seed) = seed {
                scn.seed = seed;
            }
            let weights = common.weights(scn.weights)?;
            let output = run_scenario(&scn, &catalog, weights, SimOptions { record_timing: timing })?;
            let report = epoch_report(&output);
            if let Some(dir) = out {
                fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
                write(&dir.join("trace.csv"), &output.to_csv())?;
                write(&dir.join("epochs.txt"), &report)?;
            }
            print!("{report}");
        }
        Command::Verify { count, seed, out, inject_fault } => {
            let faulty = |g: &svcgraph::ServiceGraph| {
                dijkstra_solver(g).map(|mut p| {
                    p.total_cost += 1.0;
                    p
                })
            };
            let report = if inject_fault {
                run_verification(count, seed, &faulty)
            } else {
                run_verification(count, seed, &dijkstra_solver)
            };
            println!("{}/{} match", report.matched, report.total);
            println!("catalogs without a feasible path: {}", report.without_path);
            if let Some(m) = report.mismatches.first() {
                let expected = m.expected.map_or("no path".to_string(), |c| c.to_string());
                let actual = match &m.actual {
                    Ok(c) if c.is_nan() => "no path".to_string(),
                    Ok(c) => c.to_string(),
                    Err(e) => format!("error: {e}"),
                };
                let catalog = format!(
                    "# catalog {} of seed {seed}, alpha = {}, beta = {}\n{}",
                    m.index,
                    m.weights.alpha_comp(),
                    m.weights.beta_inacc(),
                    serialize_catalog(&m.catalog)
                );
                eprintln!("mismatch on catalog {}: oracle {expected}, solver {actual}", m.index);
                match out {
                    Some(out) => {
                        write(&out, &catalog)?;
                        eprintln!("offending catalog written to {}", out.display());
                    }
                    None => eprint!("{catalog}"),
                }
                bail!("{} of {} catalogs mismatched", report.mismatches.len(), report.total);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

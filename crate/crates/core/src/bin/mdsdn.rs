use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mdsdn::harness::{emit_report, load_scenario, parse_topology, World, BUILTIN_SCENARIOS};

#[derive(Parser)]
#[command(name = "mdsdn", version, about = "Multi-domain SDN control plane simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file (or a built-in scenario by name) and write its reports.
    Run {
        scenario: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write the full event trace.
        #[arg(long)]
        trace: bool,
        /// Seed for randomized harnesses; scenarios themselves are deterministic.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check a topology file.
    Validate { topology: PathBuf },
    /// Built-in scenarios.
    Scenario {
        #[command(subcommand)]
        command: ScenarioCommand,
    },
}

#[derive(Subcommand)]
enum ScenarioCommand {
    List,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { scenario, out, trace, seed: _ } => {
            let s = match load_scenario(&scenario) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("{scenario}: {e}");
                    return ExitCode::from(2);
                }
            };
            let mut world = match World::new(&s) {
                Ok(w) => w,
                Err(e) => {
                    eprintln!("{scenario}: {e}");
                    return ExitCode::from(2);
                }
            };
            world.run();
            let t = trace.then(|| world.trace());
            match emit_report(world.report(), t, &out) {
                Ok(files) => {
                    for f in files {
                        println!("{}", f.display());
                    }
                    for v in world.violations() {
                        eprintln!("invariant violated: {v}");
                    }
                    if world.violations().is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE }
                }
                Err(e) => {
                    eprintln!("{}: {e}", out.display());
                    ExitCode::FAILURE
                }
            }
        }
        Command::Validate { topology } => {
            let text = match std::fs::read_to_string(&topology) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("{}: {e}", topology.display());
                    return ExitCode::from(2);
                }
            };
            match parse_topology(&text) {
                Ok(t) => {
                    println!(
                        "{}: {} domains, {} switches, {} hosts, {} links",
                        topology.display(),
                        t.domains.len(),
                        t.switches.len(),
                        t.hosts.len(),
                        t.links.len() / 2
                    );
                    ExitCode::SUCCESS
                }
                Err(d) => {
                    for x in d.0 {
                        eprintln!("{}:{x}", topology.display());
                    }
                    ExitCode::from(2)
                }
            }
        }
        Command::Scenario { command: ScenarioCommand::List } => {
            for (name, desc, _) in BUILTIN_SCENARIOS {
                println!("{name}\t{desc}");
            }
            ExitCode::SUCCESS
        }
    }
}

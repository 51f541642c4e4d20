use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use macsim_cli::output::{self, Format};
use macsim_cli::runner::worker_threads;
use macsim_cli::scenario::{Experiment, Overrides, RunSpec, Scenario, SeedRange};
use macsim_cli::spec::{ProtocolSpec, TopologySpec, ValueSpec};
use macsim_cli::{load_scenario, presets, run_scenario};
use macsim_core::topology::save_topology;
use macsim_core::{SchedulerSpec, Time};

/// Abstract MAC layer consensus simulator.
#[derive(Parser)]
#[command(name = "macsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario (preset or file), or a single ad-hoc cell built from flags.
    Run(RunArgs),
    /// Same as `run`, over an explicit seed range, printing the summary.
    Sweep {
        #[command(flatten)]
        args: RunArgs,
    },
    /// List built-in scenarios; with a name, print it as a scenario file.
    ListPresets { name: Option<String> },
    /// Write a topology as an edge list.
    ExportTopology {
        #[arg(long)]
        topology: TopologySpec,
        #[arg(long)]
        out: PathBuf,
        /// Seed for random topologies without one.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Preset name or scenario file (.toml or .json).
    #[arg(long)]
    scenario: Option<String>,
    /// Seed range `a..b` (half-open) or `a..=b`.
    #[arg(long)]
    seeds: Option<SeedRange>,
    #[arg(long, default_value = "macsim-out")]
    out_dir: PathBuf,
    /// Per-run table format: csv or jsonl.
    #[arg(long, default_value = "csv")]
    format: Format,
    /// Acknowledgment bound f_ack for every cell.
    #[arg(long)]
    fack: Option<Time>,
    /// clique:n=5 | line:d=4 | kd:D=4 | netA:D=4,n=4 | netB:D=4,n=4 | random:n=12,p=0.15 | file:<path>
    #[arg(long)]
    topology: Option<TopologySpec>,
    /// sync | maxdelay | random:seed=<int> | semisync[:t=<int>] | bridge[:t=<int>]
    #[arg(long)]
    scheduler: Option<SchedulerSpec>,
    /// twophase | wpaxos | anonflood | idflood, with optional :key=value options
    #[arg(long)]
    protocol: Option<ProtocolSpec>,
    /// alternate | zeros | ones | half | random | bits:0110
    #[arg(long)]
    values: Option<ValueSpec>,
    /// wPAXOS's knowledge of the network size.
    #[arg(long)]
    n_known: Option<usize>,
    /// Also write each run's event trace as JSON lines.
    #[arg(long)]
    traces: bool,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            topology: self.topology.clone(),
            scheduler: self.scheduler.clone(),
            protocol: self.protocol,
            values: self.values.clone(),
            f_ack: self.fack,
            n_known: self.n_known,
            seeds: self.seeds,
        }
    }

    fn scenario(&self) -> Result<Scenario> {
        let mut scenario = match &self.scenario {
            Some(s) => load_scenario(s)?,
            None => Scenario {
                name: "adhoc".into(),
                description: String::new(),
                seeds: SeedRange::default(),
                experiment: Experiment::Simulate {
                    runs: vec![RunSpec::new(
                        TopologySpec::Clique { n: 5 },
                        SchedulerSpec::Sync,
                        ProtocolSpec::twophase(),
                    )],
                },
            },
        };
        scenario.apply(&self.overrides())?;
        Ok(scenario)
    }
}

fn execute(args: &RunArgs, print_summary: bool) -> Result<bool> {
    let scenario = args.scenario()?;
    let threads = worker_threads();
    let result = run_scenario(&scenario, threads, args.traces)?;
    let written = output::write_results(&result, &args.out_dir, args.format)?;
    if print_summary {
        output::write_csv(output::summarize(&result.rows()), io::stdout().lock())?;
    }
    if let Some(d) = &result.demo {
        for c in &d.report.checks {
            let note = c.note.as_deref().unwrap_or("");
            let detail = c.witness.as_ref().map_or("", |w| w.detail.as_str());
            println!("{:<34} {:?} {note}{detail}", c.name, c.verdict);
        }
    }
    let failed = result.any_failed();
    println!(
        "{}: {} ({} runs, results in {})",
        scenario.name,
        if failed { "FAIL" } else { "PASS" },
        result.rows().len(),
        written
            .first()
            .and_then(|p| p.parent())
            .map_or_else(String::new, |p| p.display().to_string()),
    );
    Ok(!failed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => execute(&args, false),
        Command::Sweep { args } => {
            if args.seeds.is_none() {
                eprintln!("error: sweep needs --seeds a..b");
                return ExitCode::from(2);
            }
            execute(&args, true)
        }
        Command::ListPresets { name: None } => {
            for p in presets::PRESETS {
                println!("{:<20} {}", p.name, p.summary);
            }
            Ok(true)
        }
        Command::ListPresets { name: Some(name) } => presets::find(&name)
            .map(|p| {
                print!("{}", p.scenario().to_toml());
                true
            })
            .with_context(|| format!("no preset named {name:?}")),
        Command::ExportTopology { topology, out, seed } => topology.build(seed).and_then(|t| {
            save_topology(&t, &out)?;
            println!("wrote {} ({} nodes, diameter {})", out.display(), t.n(), t.diameter());
            Ok(true)
        }),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

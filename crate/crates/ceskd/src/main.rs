use std::path::PathBuf;
use std::process::ExitCode;

use ceskd::config::{MethodName, PolicyName};
use ceskd::report::{format_summary, REPORT_COLUMNS};
use ceskd::run::{self, Overrides, Workspace};
use clap::{Parser, Subcommand};

/// Curriculum expert selection distillation experiments.
#[derive(Parser)]
#[command(name = "ceskd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment file (TOML).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// One seed or a comma-separated list, replacing the config's seeds.
    #[arg(long, global = true, value_name = "INT|LIST", value_parser = parse_seeds)]
    seed: Option<Seeds>,

    /// Output directory, replacing the config's `out`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[arg(long, global = true)]
    method: Option<MethodName>,

    #[arg(long, global = true)]
    policy: Option<PolicyName>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Train the reference model and write the ranked curriculum.
    Score,
    /// Run the distillation path for every seed.
    Distill,
    /// Expert size versus sample difficulty grid.
    Hypothesis,
    /// Compare baseline, anti and random expert selection.
    Ablate,
    /// Aggregate all distillation runs into report rows and series.
    Report,
}

#[derive(Clone, Debug)]
struct Seeds(Vec<u64>);

fn parse_seeds(s: &str) -> Result<Seeds, String> {
    s.split(',')
        .map(|p| p.trim().parse::<u64>().map_err(|_| format!("`{p}` is not a seed")))
        .collect::<Result<_, _>>()
        .map(Seeds)
}

fn print_rows(rows: &[ceskd::report::ReportRow]) {
    println!("{REPORT_COLUMNS}");
    for r in rows {
        println!("{}", r.to_line());
    }
}

fn execute(cli: &Cli) -> ceskd::Result<()> {
    let config = cli
        .config
        .as_ref()
        .ok_or_else(|| ceskd::Error::config("no experiment file given; pass --config <file>"))?;
    let ws = Workspace::open(
        config,
        &Overrides {
            out: cli.out.clone(),
            seeds: cli.seed.as_ref().map(|s| s.0.clone()),
            method: cli.method,
            policy: cli.policy,
        },
    )?;
    match cli.command {
        Command::Score => {
            let cur = run::score(&ws)?;
            println!(
                "ranked {} samples into {} buckets -> {}",
                cur.ranked.len(),
                cur.plan.len(),
                ws.curriculum_path().display()
            );
        }
        Command::Distill => print_rows(&run::distill(&ws)?.rows),
        Command::Hypothesis => {
            let h = run::hypothesis(&ws)?;
            for r in &h.rows {
                println!("{}\t{}\t{}", r.method, r.policy, format_summary(&r.accuracy));
            }
        }
        Command::Ablate => print_rows(&run::ablate(&ws)?.rows),
        Command::Report => print_rows(&run::report(&ws)?.rows),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

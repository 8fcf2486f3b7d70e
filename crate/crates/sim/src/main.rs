use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use consent_sim::generate::{field_study, generate};
use consent_sim::shadow::Shadow;
use consent_sim::{replay, Driver, HttpDriver, InProcess, ReplayOptions, ReplayReport, Scenario};

#[derive(Parser)]
#[command(name = "sim", about = "Replay, generate and check consent-boundary scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a scenario file and compare every step with the oracle.
    Replay {
        file: PathBuf,
        /// Drive a server over HTTP: a base URL, or `local` to start one.
        #[arg(long)]
        http: Option<String>,
        /// Outbox file of the server given with --http URL.
        #[arg(long)]
        outbox: Option<PathBuf>,
        /// Write the full JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Check everything after every mutation.
        #[arg(long)]
        thorough: bool,
    },
    /// Generate and replay random worlds in process.
    Fuzz {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        users: usize,
        #[arg(long, default_value_t = 200)]
        actions: usize,
        #[arg(long, default_value_t = 1)]
        worlds: u64,
        /// Save failing worlds as scenario files in this directory.
        #[arg(long)]
        save_failing: Option<PathBuf>,
    },
    /// Print a generated scenario.
    Generate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        users: usize,
        #[arg(long, default_value_t = 200)]
        actions: usize,
        /// The 46-member, 157-node deployment world instead.
        #[arg(long)]
        field_study: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Audience of one node according to the oracle alone.
    Oracle {
        file: PathBuf,
        #[arg(long)]
        node: String,
    },
}

fn summary(report: &ReplayReport, secs: f64) {
    let verdict = if report.is_clean() { "clean" } else { "FAILED" };
    println!(
        "{} [{}]: {verdict}; {} actions, {} expectation failures, {} mismatches, {} invariant violations ({secs:.2}s)",
        report.scenario,
        report.mode,
        report.actions,
        report.expectation_failures.len(),
        report.mismatch_count,
        report.invariants.total()
    );
    for f in report.expectation_failures.iter().take(10) {
        println!("  line {}: {} {} expected {} got {}", f.line, f.actor, f.op, f.expected, f.got);
    }
    for m in report.mismatches.iter().take(10) {
        println!("  line {}: {}: {}", m.line, m.check, m.detail);
    }
    if let Some(w) = &report.wire {
        println!(
            "  wire: {} responses, {} email leaks, {} foreign ids, {}/{} 404 probes differ",
            w.responses_scanned, w.email_leaks, w.foreign_account_ids, w.not_found_mismatches, w.not_found_probes
        );
    }
}

fn run(cli: Cli) -> Result<bool, String> {
    match cli.command {
        Command::Replay {
            file,
            http,
            outbox,
            report,
            thorough,
        } => {
            let scenario = Scenario::load(&file).map_err(|e| e.to_string())?;
            let mut driver: Box<dyn Driver> = match http.as_deref() {
                None => Box::new(InProcess::for_scenario(&scenario)),
                Some("local") => Box::new(HttpDriver::embedded(&scenario).map_err(|e| e.to_string())?),
                Some(url) => Box::new(HttpDriver::connect(url, outbox)),
            };
            let opts = if thorough { ReplayOptions::thorough() } else { ReplayOptions::standard() };
            let start = Instant::now();
            let result = replay(&scenario, driver.as_mut(), &opts);
            summary(&result, start.elapsed().as_secs_f64());
            if let Some(path) = report {
                let text = serde_json::to_string_pretty(&result).map_err(|e| e.to_string())?;
                std::fs::write(&path, text).map_err(|e| format!("writing {}: {e}", path.display()))?;
            }
            Ok(result.is_clean())
        }
        Command::Fuzz {
            seed,
            users,
            actions,
            worlds,
            save_failing,
        } => {
            let start = Instant::now();
            let mut failed = 0;
            for s in seed..seed + worlds {
                let scenario = generate(s, users, actions);
                let mut driver = InProcess::for_scenario(&scenario);
                let result = replay(&scenario, &mut driver, &ReplayOptions::standard());
                if !result.is_clean() {
                    failed += 1;
                    summary(&result, 0.0);
                    if let Some(dir) = &save_failing {
                        let path = dir.join(format!("fuzz-{s}.jsonl"));
                        std::fs::write(&path, scenario.to_jsonl()).map_err(|e| format!("writing {}: {e}", path.display()))?;
                    }
                }
            }
            println!(
                "{worlds} worlds, {failed} failed ({:.1}s)",
                start.elapsed().as_secs_f64()
            );
            Ok(failed == 0)
        }
        Command::Generate {
            seed,
            users,
            actions,
            field_study: field,
            output,
        } => {
            let scenario = if field { field_study(seed) } else { generate(seed, users, actions) };
            let text = scenario.to_jsonl();
            match output {
                Some(path) => std::fs::write(&path, text).map_err(|e| format!("writing {}: {e}", path.display()))?,
                None => print!("{text}"),
            }
            Ok(true)
        }
        Command::Oracle { file, node } => {
            let scenario = Scenario::load(&file).map_err(|e| e.to_string())?;
            let shadow = Shadow::from_scenario(&scenario);
            let idx = shadow.node_index(&node).ok_or_else(|| format!("no node labelled {node}"))?;
            for u in shadow.audience(idx) {
                println!("{}", shadow.users[u].handle);
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("sim: {e}");
            ExitCode::from(2)
        }
    }
}

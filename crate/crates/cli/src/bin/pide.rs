use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pide_cli::{bench, env_workers, replay, CheckerChoice, CliError, DumpFormat, DumpOptions, ReplayOptions};
use pide_core::document::script::Script;
use pide_core::pretty::DEFAULT_MARGIN;
use pide_core::service::Service;

#[derive(Parser)]
#[command(name = "pide", version, about = "Incremental checking session harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay an edit script and dump the resulting document.
    Replay {
        script: PathBuf,
        /// Omit serials and ids so dumps can be compared across runs.
        #[arg(long)]
        stable: bool,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        workers: Option<u64>,
        #[arg(long, default_value = "xml")]
        dump: DumpFormat,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Lay out pretty-printing markup at `--margin` instead of keeping it symbolic.
        #[arg(long)]
        layout: bool,
        #[arg(long, default_value_t = DEFAULT_MARGIN as u64, value_parser = clap::value_parser!(u64).range(1..))]
        margin: u64,
        #[command(flatten)]
        checker: CheckerArgs,
    },
    /// Time a script and count exec reuse.
    Bench {
        script: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        workers: Option<u64>,
        #[command(flatten)]
        checker: CheckerArgs,
    },
    /// Serve the session to editor clients over a WebSocket at /session.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8630")]
        listen: String,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        workers: Option<u64>,
        #[command(flatten)]
        checker: CheckerArgs,
    },
}

#[derive(clap::Args)]
struct CheckerArgs {
    /// Checker executable; defaults to pide-checker beside this binary.
    #[arg(long, conflicts_with = "in_process")]
    checker: Option<PathBuf>,
    /// Run the checker on threads of this process.
    #[arg(long)]
    in_process: bool,
}

impl CheckerArgs {
    fn choice(&self) -> CheckerChoice {
        match (&self.checker, self.in_process) {
            (Some(p), _) => CheckerChoice::Program(p.clone()),
            (None, true) => CheckerChoice::InProcess,
            (None, false) => CheckerChoice::beside_current_exe(),
        }
    }
}

/// The environment wins over the flag, then the machine size.
fn workers(flag: Option<u64>) -> usize {
    env_workers()
        .or(flag.map(|n| n as usize))
        .unwrap_or_else(pide_core::checker::default_workers)
}

fn load(path: &PathBuf) -> Result<Script, CliError> {
    let src = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    Ok(Script::parse(&src)?)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Replay {
            script,
            stable,
            workers: w,
            dump,
            out,
            layout,
            margin,
            checker,
        } => {
            let script = load(&script)?;
            let opts = ReplayOptions {
                workers: workers(w),
                checker: checker.choice(),
                dump: DumpOptions {
                    format: dump,
                    stable,
                    layout: layout.then_some(margin as usize),
                },
                ..ReplayOptions::default()
            };
            let replayed = replay(&script, &opts)?;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(replayed.queries.as_bytes())?;
            match out {
                Some(path) => fs::write(path, replayed.dump)?,
                None => stdout.write_all(replayed.dump.as_bytes())?,
            }
            Ok(())
        }
        Command::Bench {
            script,
            workers: w,
            checker,
        } => {
            let report = bench(&load(&script)?, workers(w), &checker.choice())?;
            print!("{report}");
            Ok(())
        }
        Command::Serve {
            listen,
            workers: w,
            checker,
        } => {
            let session = pide_cli::replay::start_session(workers(w), &checker.choice())?;
            let service =
                Service::bind(session, &listen).map_err(|e| CliError::Usage(format!("cannot listen on {listen}: {e}")))?;
            println!("listening on ws://{}/session", service.local_addr()?);
            std::io::stdout().flush()?;
            service.run().map_err(|e| CliError::Checker(e.to_string()))
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pide: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

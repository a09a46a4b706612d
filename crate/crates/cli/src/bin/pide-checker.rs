//! Checker process: connects back to the session over a Unix socket and
//! speaks the checker protocol on it. Standard output is not part of the
//! protocol; anything printed there ends up in the session's diagnostics.

use std::io::BufReader;
use std::os::unix::net::UnixStream;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

#[derive(Parser)]
#[command(name = "pide-checker", version)]
struct Args {
    /// Socket the session listens on.
    #[arg(long)]
    socket: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
}

fn main() -> ExitCode {
    env_logger::init();
    let args = Args::parse();
    let workers = args.workers.map_or_else(pide_core::checker::default_workers, |n| n as usize);
    let stream = match UnixStream::connect(&args.socket) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("pide-checker: cannot connect to {}: {e}", args.socket.display());
            return ExitCode::from(1);
        }
    };
    println!("pide-checker {} with {workers} worker(s)", std::process::id());
    let reader = match stream.try_clone() {
        Ok(s) => BufReader::new(s),
        Err(e) => {
            eprintln!("pide-checker: {e}");
            return ExitCode::from(1);
        }
    };
    match pide_core::checker::serve(reader, stream, workers) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pide-checker: {e}");
            ExitCode::from(1)
        }
    }
}

//! Command-line harness around a checking session: replays edit scripts,
//! dumps document state and measures incremental reuse and parallelism.

pub mod bench;
pub mod dump;
pub mod replay;

pub use bench::{bench, reuse_counts, BenchReport, Reuse};
pub use dump::{dump, DumpFormat, DumpOptions};
pub use replay::{replay, CheckerChoice, CliError, ReplayOptions, Replayed};

/// Worker count from `PIDE_WORKERS`, when set to a positive number.
pub fn env_workers() -> Option<usize> {
    std::env::var("PIDE_WORKERS").ok()?.trim().parse().ok().filter(|&n| n > 0)
}

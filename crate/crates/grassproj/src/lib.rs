//! File formats, configurations, run manifests and subcommands of the
//! `grassproj` binary.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod manifest;

pub use error::{CliError, Outcome};

/// Installs the global worker pool. `GRASSPROJ_THREADS` overrides `threads`.
pub fn init_threads(threads: Option<usize>) -> Result<(), CliError> {
    let env = std::env::var("GRASSPROJ_THREADS").ok();
    let n = match env {
        Some(v) => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|_| CliError::usage(format!("GRASSPROJ_THREADS={v:?} is not a count")))?,
        ),
        None => threads,
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::usage("thread count must be positive"));
        }
        // A pool that is already installed (tests, repeated calls) is kept.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(())
}

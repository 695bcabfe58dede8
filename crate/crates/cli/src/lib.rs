//! `spurprobe`: the pipeline as one subcommand-style executable.
//!
//! Exit codes: 0 on success, 1 for usage and input errors, 2 for internal
//! failures (divergence, solver breakdown, broken invariants, panics).

mod cli;
mod commands;
mod config;
mod manifest;

use std::ffi::OsString;
use std::fmt;
use std::panic::{self, AssertUnwindSafe};

use clap::{error::ErrorKind, FromArgMatches};
use spurprobe_core::clustering::ClusterError;
use spurprobe_core::hex::HexError;
use spurprobe_core::tensor::TensorError;

pub use cli::{command, Cli, Command};
pub use manifest::{sha256_file, InputDigest, RunManifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USER: i32 = 1;
pub const EXIT_INTERNAL: i32 = 2;

/// Marks an error as a bug or numeric breakdown rather than bad input.
#[derive(Debug)]
pub struct Internal(pub String);

impl fmt::Display for Internal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "internal error: {}", self.0)
    }
}

impl std::error::Error for Internal {}

fn is_internal(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        e.is::<Internal>()
            || matches!(e.downcast_ref::<TensorError>(), Some(TensorError::Diverged { .. }))
            || matches!(
                e.downcast_ref::<HexError>(),
                Some(HexError::Solver { .. } | HexError::Tensor(TensorError::Diverged { .. }))
            )
            || matches!(e.downcast_ref::<ClusterError>(), Some(ClusterError::NonMonotone { .. }))
    })
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    match panic::catch_unwind(AssertUnwindSafe(|| run_inner(argv))) {
        Ok(code) => code,
        Err(_) => {
            eprintln!("internal error: the command panicked");
            EXIT_INTERNAL
        }
    }
}

fn run_inner(argv: Vec<OsString>) -> i32 {
    let argv = match config::apply_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return EXIT_USER;
        }
    };
    let matches = match command().try_get_matches_from(&argv) {
        Ok(m) => m,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USER,
            };
            let _ = e.print();
            return code;
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return EXIT_USER;
        }
    };
    match commands::dispatch(cli, &matches) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_internal(&e) {
                EXIT_INTERNAL
            } else {
                EXIT_USER
            }
        }
    }
}

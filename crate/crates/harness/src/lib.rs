//! Command-line harness for MDL-NMF: matrix files, factorization and
//! baseline runs, rank sweeps, semi-synthetic experiments and reports.

pub mod error;
pub mod io;
pub mod report;
pub mod runs;
pub mod semisynth;
pub mod svg;

pub use error::{HarnessError, Result};

use std::path::PathBuf;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "MDLNMF_OUT";

/// `--out` if given, else `$MDLNMF_OUT/<command>`, else `mdlnmf-out/<command>`.
pub fn output_dir(explicit: Option<PathBuf>, command: &str) -> PathBuf {
    explicit.unwrap_or_else(|| {
        let root = std::env::var_os(OUT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("mdlnmf-out"));
        root.join(command)
    })
}

// SPDX-License-Identifier: Apache-2.0

//! Target graph assembly and incremental parallel execution.
//!
//! Dirtiness is decided by content digests, not timestamps: a target reruns
//! when its command, an input's bytes or an output's bytes differ from the
//! record of its last successful run. Because the check for a target happens
//! only once its dependencies have finished, a dependency that reproduces
//! byte-identical outputs leaves its dependents clean (early cutoff).

mod plan;
mod run;
mod stamp;

pub use plan::{assemble_plan, TargetGraph};
pub use run::{execute, ExecOptions, RunReport, TargetOutcome, TargetStatus};
pub use stamp::{command_digest, is_dirty, Freshness, StampDb, StampRecord};

use std::path::Path;

/// Scrubbed base environment for child processes: `PATH` and `HOME` only.
pub fn base_env() -> Vec<(String, String)> {
    let path = std::env::var("PATH").unwrap_or_else(|_| "/usr/local/bin:/usr/bin:/bin".into());
    let mut env = vec![("PATH".to_string(), path)];
    if let Ok(home) = std::env::var("HOME") {
        env.push(("HOME".to_string(), home));
    }
    env
}

/// Location of the stamp database under a build directory.
pub fn stamp_path(build_dir: &Path) -> std::path::PathBuf {
    build_dir.join(".socbuild").join("stamps.json")
}

/// Last `n` lines of a text file, for failure summaries.
pub(crate) fn tail_lines(path: &Path, n: usize) -> String {
    let text = std::fs::read(path)
        .map(|b| String::from_utf8_lossy(&b).into_owned())
        .unwrap_or_default();
    let lines: Vec<&str> = text.lines().collect();
    lines[lines.len().saturating_sub(n)..].join("\n")
}

// SPDX-License-Identifier: Apache-2.0

mod app;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use socbuild_core::VlnvRef;

/// Hardware/software build orchestrator for VLNV-named IP blocks.
#[derive(Debug, Parser)]
#[command(name = "socbuild", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Workspace root [default: nearest ancestor holding socbuild.lock, else the current directory]
    #[arg(long, global = true, value_name = "DIR")]
    workspace: Option<PathBuf>,
    /// Build directory [default: <workspace>/build]
    #[arg(long, global = true, value_name = "DIR")]
    build_dir: Option<PathBuf>,
    /// Maximum concurrent jobs [default: logical CPU count]
    #[arg(short, long, global = true, value_name = "N", value_parser = clap::value_parser!(u32).range(1..))]
    jobs: Option<u32>,
    /// Fail instead of downloading anything missing from the cache
    #[arg(long, global = true)]
    offline: bool,
    /// Re-pin dependencies whose manifest spec differs from the lockfile
    #[arg(long, global = true)]
    update: bool,
    /// Show skipped targets, durations and manifest paths
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    F,
    Json,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// List every IP block in the workspace
    List,
    /// Fetch dependencies and write the lockfile
    Fetch,
    /// Print the flattened dependency order of ROOT
    Graph {
        root: VlnvRef,
        /// Emit Graphviz instead
        #[arg(long)]
        dot: bool,
    },
    /// Write and print the source filelist of ROOT
    Filelist {
        root: VlnvRef,
        #[arg(long, value_enum, default_value = "f")]
        format: Format,
    },
    /// Run ROOT's backends and build the resulting targets
    Build {
        root: VlnvRef,
        /// Build only these targets and their dependencies
        #[arg(long = "target", value_name = "NAME")]
        targets: Vec<String>,
        /// Continue with independent targets after a failure
        #[arg(long)]
        keep_going: bool,
    },
    /// Run the tests of ROOT and its dependencies
    Test {
        root: VlnvRef,
        /// Only tests whose `<vlnv>/<name>` id matches this regex
        #[arg(long, value_name = "RE")]
        filter: Option<String>,
    },
    /// Empty the build directory, keeping logs unless --all
    Clean {
        #[arg(long)]
        all: bool,
    },
    #[command(name = "__internal", hide = true)]
    Internal {
        #[command(subcommand)]
        op: InternalOp,
    },
}

/// Helpers invoked by builtin backend targets.
#[derive(Debug, Subcommand)]
enum InternalOp {
    Sv2v { input: PathBuf, output: PathBuf },
    Copy { input: PathBuf, output: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    ExitCode::from(app::run(cli))
}

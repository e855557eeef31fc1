// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};

use socbuild_core::backend::{sv2v_stub_transform, BackendContext, BackendRegistry};
use socbuild_core::exec::{assemble_plan, execute, ExecOptions, TargetStatus};
use socbuild_core::fetch::{sync, Fetcher, Lockfile, LOCKFILE_NAME};
use socbuild_core::ip::{normalize_path, BackendOptions, OptionValue};
use socbuild_core::manifest::{discover_manifests, registry_from};
use socbuild_core::testdrv::{collect_tests, run_tests, TestOptions};
use socbuild_core::{resolve, Error, Registry, ResolvedGraph, Target, VlnvRef};

use crate::{Cli, Cmd, Format, GlobalArgs, InternalOp};

const EXIT_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_RESOLVE: u8 = 3;

/// An error together with the exit code of the phase it came from.
struct Failure {
    err: Error,
    exit: u8,
}

trait Phase<T> {
    fn phase(self, exit: u8) -> Result<T, Failure>;
}

impl<T> Phase<T> for Result<T, Error> {
    fn phase(self, exit: u8) -> Result<T, Failure> {
        self.map_err(|err| Failure { err, exit })
    }
}

pub fn run(cli: Cli) -> u8 {
    match dispatch(cli) {
        Ok(code) => code,
        Err(Failure { err, exit }) => {
            eprintln!("error[{}]: {err}", err.code());
            exit
        }
    }
}

struct Session {
    workspace: PathBuf,
    build_dir: PathBuf,
    jobs: usize,
    offline: bool,
    update: bool,
    verbose: bool,
}

fn dispatch(cli: Cli) -> Result<u8, Failure> {
    if let Cmd::Internal { op } = &cli.command {
        return internal(op).phase(EXIT_FAILED);
    }
    let s = session(&cli.global).phase(EXIT_USAGE)?;
    match cli.command {
        Cmd::List => {
            let reg = configure(&s, false)?;
            for ip in reg.iter() {
                match (&ip.manifest, s.verbose) {
                    (Some(m), true) => println!("{}\t{}", ip.id, m.display()),
                    _ => println!("{}", ip.id),
                }
            }
            Ok(0)
        }
        Cmd::Fetch => {
            let reg = configure(&s, true)?;
            let lock = Lockfile::read(&s.workspace.join(LOCKFILE_NAME)).phase(EXIT_RESOLVE)?;
            let lock = lock.unwrap_or_default();
            for (id, entry) in &lock.entries {
                println!("{id} {}", entry.digest);
            }
            println!(
                "{} dependencies locked, {} blocks available",
                lock.entries.len(),
                reg.len()
            );
            Ok(0)
        }
        Cmd::Graph { root, dot } => {
            let (_, g) = resolved(&s, &root)?;
            if dot {
                print!("{}", g.emit_dot());
            } else {
                for id in g.flatten() {
                    println!("{id}");
                }
            }
            Ok(0)
        }
        Cmd::Filelist { root, format } => filelist(&s, &root, format),
        Cmd::Build {
            root,
            targets,
            keep_going,
        } => build(&s, &root, &targets, keep_going),
        Cmd::Test { root, filter } => test(&s, &root, filter.as_deref()),
        Cmd::Clean { all } => clean(&s, all).phase(EXIT_FAILED),
        Cmd::Internal { .. } => unreachable!("handled above"),
    }
}

fn session(g: &GlobalArgs) -> Result<Session, Error> {
    let cwd = std::env::current_dir().map_err(|e| Error::Io {
        path: PathBuf::from("."),
        source: e,
    })?;
    let workspace = match &g.workspace {
        Some(w) => normalize_path(Some(&cwd), w)?,
        None => find_workspace(&cwd),
    };
    let build_dir = match &g.build_dir {
        Some(b) => normalize_path(Some(&cwd), b)?,
        None => workspace.join("build"),
    };
    let jobs = g
        .jobs
        .map(|j| j as usize)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    Ok(Session {
        workspace,
        build_dir,
        jobs,
        offline: g.offline,
        update: g.update,
        verbose: g.verbose,
    })
}

/// Nearest ancestor holding a lockfile, else `cwd`.
fn find_workspace(cwd: &Path) -> PathBuf {
    cwd.ancestors()
        .find(|d| d.join(LOCKFILE_NAME).is_file())
        .unwrap_or(cwd)
        .to_path_buf()
}

/// Discovers local manifests, syncs remote dependencies and builds the
/// registry. The lockfile is written when `write_lock` is set or when there
/// is something to lock.
fn configure(s: &Session, write_lock: bool) -> Result<Registry, Failure> {
    let mut fetcher = Fetcher::from_env(&s.workspace);
    if s.offline {
        fetcher = fetcher.offline(true);
    }
    let exclude = [
        s.build_dir.clone(),
        s.workspace.join(".socbuild"),
        fetcher.cache_dir().to_path_buf(),
    ];
    let docs = discover_manifests(&s.workspace, &exclude).phase(EXIT_RESOLVE)?;
    let lock_path = s.workspace.join(LOCKFILE_NAME);
    let lock = Lockfile::read(&lock_path).phase(EXIT_RESOLVE)?;
    let outcome = sync(&fetcher, &docs, lock.as_ref(), s.update).phase(EXIT_RESOLVE)?;
    if write_lock || lock.is_some() || !outcome.lockfile.entries.is_empty() {
        outcome.lockfile.write(&lock_path).phase(EXIT_RESOLVE)?;
    }
    if s.verbose {
        let stats = fetcher.stats();
        eprintln!(
            "fetch: {} network, {} subprocess operations",
            stats.network_ops(),
            stats.subprocess_ops()
        );
    }
    let all: Vec<_> = docs.iter().chain(&outcome.manifests).collect();
    for doc in &all {
        for w in &doc.warnings {
            eprintln!("warning: {w}");
        }
    }
    registry_from(all).phase(EXIT_RESOLVE)
}

fn resolved(s: &Session, root: &VlnvRef) -> Result<(Registry, ResolvedGraph), Failure> {
    let reg = configure(s, false)?;
    let g = resolve(&reg, root).phase(EXIT_RESOLVE)?;
    Ok((reg, g))
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn filelist(s: &Session, root: &VlnvRef, format: Format) -> Result<u8, Failure> {
    let (_, g) = resolved(s, root)?;
    let mut ctx = BackendContext::new(&g, &s.build_dir);
    let format = match format {
        Format::F => "f",
        Format::Json => "json",
    };
    ctx.options = BackendOptions::from([("format".to_string(), OptionValue::Str(format.into()))]);
    let result = BackendRegistry::new()
        .run_backend("filelist", &mut ctx)
        .phase(EXIT_FAILED)?;
    warn_all(&result.warnings);
    let plan = assemble_plan(result.targets).phase(EXIT_FAILED)?;
    let opts = ExecOptions::new(&s.build_dir);
    let report = execute(&plan, &[], &opts).phase(EXIT_FAILED)?;
    if let Some(err) = report.failure(&opts) {
        return Err(Failure { err, exit: EXIT_FAILED });
    }
    for artifact in &result.artifacts {
        let text = fs::read_to_string(artifact).map_err(|e| Failure {
            err: Error::Io {
                path: artifact.clone(),
                source: e,
            },
            exit: EXIT_FAILED,
        })?;
        print!("{text}");
    }
    Ok(0)
}

fn build(s: &Session, root: &VlnvRef, goals: &[String], keep_going: bool) -> Result<u8, Failure> {
    let (_, g) = resolved(s, root)?;
    let mut targets: Vec<Target> = g
        .collect_targets()
        .phase(EXIT_FAILED)?
        .iter()
        .map(|t| t.expand_build_dir(&s.build_dir))
        .collect();
    let mut ctx = BackendContext::new(&g, &s.build_dir);
    let planned = BackendRegistry::new()
        .run_pipeline(&mut ctx, &g.root_block().backends)
        .phase(EXIT_FAILED)?;
    warn_all(&planned.warnings);
    targets.extend(planned.targets);
    let plan = assemble_plan(targets).phase(EXIT_FAILED)?;
    plan.select(goals).phase(EXIT_USAGE)?;

    let opts = ExecOptions::new(&s.build_dir).jobs(s.jobs).keep_going(keep_going);
    let report = execute(&plan, goals, &opts).phase(EXIT_FAILED)?;
    for o in &report.outcomes {
        let took = match (s.verbose, o.started, o.finished) {
            (true, Some(a), Some(b)) => format!(" ({:.3}s)", (b - a).as_secs_f64()),
            _ => String::new(),
        };
        match o.status {
            TargetStatus::RanOk => println!("ran {}{took}", o.name),
            TargetStatus::Failed => println!("FAILED {}{took}", o.name),
            TargetStatus::NotRun => println!("not run {}", o.name),
            TargetStatus::SkippedUpToDate if s.verbose => println!("up to date {}", o.name),
            TargetStatus::SkippedUpToDate => {}
        }
    }
    println!("{} targets ran", report.spawned);
    match report.failure(&opts) {
        Some(err) => Err(Failure { err, exit: EXIT_FAILED }),
        None => Ok(0),
    }
}

fn test(s: &Session, root: &VlnvRef, filter: Option<&str>) -> Result<u8, Failure> {
    let (reg, g) = resolved(s, root)?;
    let cases = collect_tests(&reg, Some(&g)).phase(EXIT_FAILED)?;
    let opts = TestOptions::new(&s.build_dir).jobs(s.jobs);
    let report = run_tests(&cases, filter, &opts).map_err(|err| {
        let exit = if err.code() == "E_BAD_FILTER" {
            EXIT_USAGE
        } else {
            EXIT_FAILED
        };
        Failure { err, exit }
    })?;
    warn_all(&report.warnings);
    for r in &report.results {
        let mut line = format!("{} {}", r.status.label(), r.case.id());
        if let Some(detail) = r.status.detail(r.case.decl.expected_exit) {
            line.push_str(&format!(": {detail}"));
        }
        if s.verbose {
            line.push_str(&format!(" ({:.3}s)", r.duration.as_secs_f64()));
        }
        println!("{line}");
    }
    println!(
        "{} passed, {} failed, {} errors",
        report.passed(),
        report.failed(),
        report.errored()
    );
    Ok(if report.success() { 0 } else { EXIT_FAILED })
}

fn clean(s: &Session, all: bool) -> Result<u8, Error> {
    let io = |path: &Path, e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let entries = match fs::read_dir(&s.build_dir) {
        Ok(entries) => entries,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(0),
        Err(e) => return Err(io(&s.build_dir, e)),
    };
    for entry in entries {
        let entry = entry.map_err(|e| io(&s.build_dir, e))?;
        let path = entry.path();
        if !all && entry.file_name() == "log" {
            continue;
        }
        let removed = if entry.file_type().map_err(|e| io(&path, e))?.is_dir() {
            fs::remove_dir_all(&path)
        } else {
            fs::remove_file(&path)
        };
        removed.map_err(|e| io(&path, e))?;
    }
    Ok(0)
}

fn internal(op: &InternalOp) -> Result<u8, Error> {
    let io = |path: &Path, e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let (input, output) = match op {
        InternalOp::Sv2v { input, output } | InternalOp::Copy { input, output } => (input, output),
    };
    let bytes = fs::read(input).map_err(|e| io(input, e))?;
    let bytes = match op {
        InternalOp::Sv2v { .. } => sv2v_stub_transform(&bytes),
        InternalOp::Copy { .. } => bytes,
    };
    if let Some(parent) = output.parent() {
        fs::create_dir_all(parent).map_err(|e| io(parent, e))?;
    }
    fs::write(output, bytes).map_err(|e| io(output, e))?;
    Ok(0)
}

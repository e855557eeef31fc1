// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, VecDeque};
use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use super::plan::TargetGraph;
use super::stamp::{command_digest, is_dirty, Freshness, StampDb, StampRecord};
use super::{base_env, stamp_path, tail_lines};
use crate::digest::hash_content;
use crate::error::{Error, IoContext, Result};
use crate::target::Target;

#[derive(Debug, Clone)]
pub struct ExecOptions {
    pub jobs: usize,
    pub keep_going: bool,
    /// Default working directory; holds `.socbuild/stamps.json` and `log/`.
    pub build_dir: PathBuf,
}

impl ExecOptions {
    pub fn new(build_dir: impl Into<PathBuf>) -> ExecOptions {
        ExecOptions {
            jobs: 1,
            keep_going: false,
            build_dir: build_dir.into(),
        }
    }

    pub fn jobs(mut self, jobs: usize) -> ExecOptions {
        self.jobs = jobs.max(1);
        self
    }

    pub fn keep_going(mut self, keep_going: bool) -> ExecOptions {
        self.keep_going = keep_going;
        self
    }

    pub fn log_path(&self, target: &str) -> PathBuf {
        self.build_dir.join("log").join(format!("{target}.log"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetStatus {
    SkippedUpToDate,
    RanOk,
    Failed,
    NotRun,
}

#[derive(Debug, Clone)]
pub struct TargetOutcome {
    pub name: String,
    pub status: TargetStatus,
    /// Why it ran, or why it failed.
    pub reason: Option<String>,
    pub exit_code: Option<i32>,
    /// Offsets from the start of the run.
    pub started: Option<Duration>,
    pub finished: Option<Duration>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    /// Selected targets in plan order.
    pub outcomes: Vec<TargetOutcome>,
    /// Processes actually spawned.
    pub spawned: usize,
    pub max_concurrency: usize,
    pub wall: Duration,
    /// Targets in the order they finished running or were skipped.
    pub completion_order: Vec<String>,
}

impl RunReport {
    pub fn count(&self, status: TargetStatus) -> usize {
        self.outcomes.iter().filter(|o| o.status == status).count()
    }

    pub fn names(&self, status: TargetStatus) -> Vec<&str> {
        self.outcomes
            .iter()
            .filter(|o| o.status == status)
            .map(|o| o.name.as_str())
            .collect()
    }

    pub fn outcome(&self, name: &str) -> Option<&TargetOutcome> {
        self.outcomes.iter().find(|o| o.name == name)
    }

    pub fn success(&self) -> bool {
        self.count(TargetStatus::Failed) == 0 && self.count(TargetStatus::NotRun) == 0
    }

    /// `E_EXEC_FAILED` summarizing each failed target, or `None`.
    pub fn failure(&self, opts: &ExecOptions) -> Option<Error> {
        if self.success() {
            return None;
        }
        let mut summary = String::new();
        for o in self.outcomes.iter().filter(|o| o.status == TargetStatus::Failed) {
            let code = o.exit_code.map_or("none".to_string(), |c| c.to_string());
            summary.push_str(&format!(
                "  {} (exit {code}): {}\n",
                o.name,
                o.reason.as_deref().unwrap_or("failed")
            ));
            let tail = tail_lines(&opts.log_path(&o.name), 10);
            for line in tail.lines() {
                summary.push_str(&format!("    | {line}\n"));
            }
        }
        let not_run = self.count(TargetStatus::NotRun);
        if not_run > 0 {
            summary.push_str(&format!("  {not_run} target(s) not run\n"));
        }
        Some(Error::ExecFailed(summary.trim_end().to_string()))
    }
}

struct Finished {
    index: usize,
    result: std::result::Result<i32, String>,
    inputs: BTreeMap<PathBuf, String>,
    started: Duration,
    finished: Duration,
}

#[derive(Clone, Copy, PartialEq)]
enum State {
    Waiting,
    Running,
    Done(TargetStatus),
}

/// Runs the dirty part of `goals` (all targets when empty) with at most
/// `opts.jobs` concurrent processes.
pub fn execute(graph: &TargetGraph, goals: &[String], opts: &ExecOptions) -> Result<RunReport> {
    let selected = graph.select(goals)?;
    let n = graph.len();
    let build_dir = &opts.build_dir;
    fs::create_dir_all(build_dir).at(build_dir)?;
    let log_dir = build_dir.join("log");
    fs::create_dir_all(&log_dir).at(&log_dir)?;
    let db_path = stamp_path(build_dir);
    let mut db = StampDb::load(&db_path);

    let mut state = vec![State::Waiting; n];
    let mut reason: Vec<Option<String>> = vec![None; n];
    let mut exit_code: Vec<Option<i32>> = vec![None; n];
    let mut times: Vec<Option<(Duration, Duration)>> = vec![None; n];
    let mut waiting_on: Vec<usize> = (0..n)
        .map(|i| graph.preds(i).iter().filter(|&&p| selected[p]).count())
        .collect();
    let mut ready: VecDeque<usize> = (0..n).filter(|&i| selected[i] && waiting_on[i] == 0).collect();
    let mut completion_order = Vec::new();

    let start = Instant::now();
    let mut running = 0usize;
    let mut max_concurrency = 0usize;
    let mut spawned = 0usize;
    let mut halted = false;

    let (tx, rx) = mpsc::channel::<Finished>();

    std::thread::scope(|scope| -> Result<()> {
        loop {
            while running < opts.jobs && !halted {
                let Some(i) = ready.pop_front() else { break };
                let t = &graph.targets()[i];
                match is_dirty(t, &db, build_dir) {
                    Freshness::Clean => {
                        state[i] = State::Done(TargetStatus::SkippedUpToDate);
                        completion_order.push(t.name.clone());
                        release(graph, i, &selected, &mut waiting_on, &mut ready);
                    }
                    Freshness::Dirty(why) => {
                        reason[i] = Some(why);
                        match prepare(t, opts) {
                            Err(msg) => {
                                state[i] = State::Done(TargetStatus::Failed);
                                reason[i] = Some(msg);
                                completion_order.push(t.name.clone());
                                halted |= !opts.keep_going;
                            }
                            Ok((inputs, log)) => {
                                state[i] = State::Running;
                                running += 1;
                                spawned += 1;
                                max_concurrency = max_concurrency.max(running);
                                let tx = tx.clone();
                                scope.spawn(move || {
                                    let started = start.elapsed();
                                    let result = run_process(t, build_dir, log);
                                    let finished = start.elapsed();
                                    let _ = tx.send(Finished {
                                        index: i,
                                        result,
                                        inputs,
                                        started,
                                        finished,
                                    });
                                });
                            }
                        }
                    }
                }
            }
            if running == 0 && (ready.is_empty() || halted) {
                break;
            }
            if running == 0 {
                continue;
            }

            let done = rx.recv().expect("workers hold a sender while running");
            running -= 1;
            let i = done.index;
            let t = &graph.targets()[i];
            times[i] = Some((done.started, done.finished));
            completion_order.push(t.name.clone());
            if let Ok(code) = done.result {
                exit_code[i] = Some(code);
            }
            let outcome = match done.result {
                Ok(0) => record_success(t, build_dir, done.inputs),
                Ok(code) => Err(format!("exited with status {code}")),
                Err(msg) => Err(msg),
            };
            match outcome {
                Ok(rec) => {
                    db.records.insert(t.name.clone(), rec);
                    db.save(&db_path)?;
                    state[i] = State::Done(TargetStatus::RanOk);
                    release(graph, i, &selected, &mut waiting_on, &mut ready);
                }
                Err(msg) => {
                    state[i] = State::Done(TargetStatus::Failed);
                    reason[i] = Some(msg);
                    halted |= !opts.keep_going;
                }
            }
        }
        Ok(())
    })?;

    let outcomes = (0..n)
        .filter(|&i| selected[i])
        .map(|i| {
            let status = match state[i] {
                State::Done(s) => s,
                _ => TargetStatus::NotRun,
            };
            TargetOutcome {
                name: graph.targets()[i].name.clone(),
                status,
                reason: if status == TargetStatus::NotRun {
                    None
                } else {
                    reason[i].clone()
                },
                exit_code: exit_code[i],
                started: times[i].map(|t| t.0),
                finished: times[i].map(|t| t.1),
            }
        })
        .collect();

    Ok(RunReport {
        outcomes,
        spawned,
        max_concurrency,
        wall: start.elapsed(),
        completion_order,
    })
}

fn release(graph: &TargetGraph, i: usize, selected: &[bool], waiting_on: &mut [usize], ready: &mut VecDeque<usize>) {
    for &s in graph.succs(i) {
        if selected[s] {
            waiting_on[s] -= 1;
            if waiting_on[s] == 0 {
                ready.push_back(s);
            }
        }
    }
}

/// Hashes inputs as they are right before the run and opens the log.
fn prepare(t: &Target, opts: &ExecOptions) -> std::result::Result<(BTreeMap<PathBuf, String>, File), String> {
    let mut inputs = BTreeMap::new();
    for input in &t.inputs {
        let digest = hash_content(input).map_err(|_| format!("input {} is missing", input.display()))?;
        inputs.insert(input.clone(), digest);
    }
    for out in &t.outputs {
        if let Some(parent) = out.parent() {
            fs::create_dir_all(parent).map_err(|e| format!("{}: {e}", parent.display()))?;
        }
    }
    let log_path = opts.log_path(&t.name);
    let log = File::create(&log_path).map_err(|e| format!("{}: {e}", log_path.display()))?;
    Ok((inputs, log))
}

fn run_process(t: &Target, build_dir: &Path, log: File) -> std::result::Result<i32, String> {
    let Some((program, args)) = t.command.split_first() else {
        return Err("empty command".into());
    };
    let wd = t.working_dir.as_deref().unwrap_or(build_dir);
    let stderr = log.try_clone().map_err(|e| e.to_string())?;
    let status = Command::new(program)
        .args(args)
        .current_dir(wd)
        .env_clear()
        .envs(base_env())
        .envs(&t.env)
        .stdin(Stdio::null())
        .stdout(log)
        .stderr(stderr)
        .status()
        .map_err(|e| format!("cannot spawn `{program}`: {e}"))?;
    match status.code() {
        Some(code) => Ok(code),
        None => Err("terminated by a signal".into()),
    }
}

fn record_success(
    t: &Target,
    build_dir: &Path,
    inputs: BTreeMap<PathBuf, String>,
) -> std::result::Result<StampRecord, String> {
    let mut outputs = BTreeMap::new();
    for out in &t.outputs {
        let digest = hash_content(out).map_err(|_| format!("declared output {} was not produced", out.display()))?;
        outputs.insert(out.clone(), digest);
    }
    Ok(StampRecord {
        command: command_digest(t, build_dir),
        inputs,
        outputs,
    })
}

// SPDX-License-Identifier: Apache-2.0

//! Built-in test driver: runs the tests declared in manifests and writes a
//! JUnit-style report.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use quick_xml::events::{BytesDecl, BytesEnd, BytesStart, BytesText, Event};
use quick_xml::Writer;
use regex::Regex;

use crate::backend::sanitize;
use crate::error::{Error, IoContext, Result};
use crate::exec::{base_env, tail_lines};
use crate::graph::{Registry, ResolvedGraph};
use crate::ip::{IpBlock, TestDecl};
use crate::vlnv::Vlnv;

/// Scratch directory handed to each test.
pub const TEST_TMPDIR_VAR: &str = "SOCBUILD_TEST_TMPDIR";
/// The build directory, so tests can find built artifacts.
pub const BUILD_DIR_VAR: &str = "SOCBUILD_BUILD_DIR";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestCase {
    pub owner: Vlnv,
    pub decl: TestDecl,
    pub working_dir: PathBuf,
}

impl TestCase {
    /// `<canonical VLNV>/<name>`.
    pub fn id(&self) -> String {
        format!("{}/{}", self.owner, self.decl.name)
    }
}

/// Tests of every registry block, or only of the blocks in `graph`, ordered
/// by qualified id.
pub fn collect_tests(reg: &Registry, graph: Option<&ResolvedGraph>) -> Result<Vec<TestCase>> {
    let blocks: Vec<&IpBlock> = match graph {
        Some(g) => g.nodes().collect(),
        None => reg.iter().collect(),
    };
    let mut cases: BTreeMap<String, TestCase> = BTreeMap::new();
    for ip in blocks {
        let working_dir = ip.dir.clone().unwrap_or_else(|| PathBuf::from("."));
        for decl in &ip.tests {
            let case = TestCase {
                owner: ip.id.clone(),
                decl: decl.clone(),
                working_dir: working_dir.clone(),
            };
            let id = case.id();
            if cases.insert(id.clone(), case).is_some() {
                return Err(Error::DupTest(id));
            }
        }
    }
    Ok(cases.into_values().collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TestStatus {
    Pass,
    Fail {
        /// `None` when killed by a signal.
        exit_code: Option<i32>,
        regex_miss: bool,
    },
    Error(String),
}

impl TestStatus {
    pub fn label(&self) -> &'static str {
        match self {
            TestStatus::Pass => "PASS",
            TestStatus::Fail { .. } => "FAIL",
            TestStatus::Error(_) => "ERROR",
        }
    }

    /// One-line explanation for non-passing results.
    pub fn detail(&self, expected_exit: i32) -> Option<String> {
        match self {
            TestStatus::Pass => None,
            TestStatus::Fail { exit_code, regex_miss } => {
                let mut parts = Vec::new();
                match exit_code {
                    Some(c) if *c != expected_exit => parts.push(format!("exit code {c}, expected {expected_exit}")),
                    None => parts.push("killed by a signal".to_string()),
                    _ => {}
                }
                if *regex_miss {
                    parts.push("pass_regex did not match".to_string());
                }
                Some(parts.join("; "))
            }
            TestStatus::Error(msg) => Some(msg.clone()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TestResult {
    pub case: TestCase,
    pub status: TestStatus,
    pub duration: Duration,
    pub log: PathBuf,
}

#[derive(Debug, Clone, Default)]
pub struct TestReport {
    /// Selected cases in qualified-id order.
    pub results: Vec<TestResult>,
    pub warnings: Vec<String>,
}

impl TestReport {
    fn count(&self, f: impl Fn(&TestStatus) -> bool) -> usize {
        self.results.iter().filter(|r| f(&r.status)).count()
    }

    pub fn passed(&self) -> usize {
        self.count(|s| matches!(s, TestStatus::Pass))
    }

    pub fn failed(&self) -> usize {
        self.count(|s| matches!(s, TestStatus::Fail { .. }))
    }

    pub fn errored(&self) -> usize {
        self.count(|s| matches!(s, TestStatus::Error(_)))
    }

    pub fn total(&self) -> usize {
        self.results.len()
    }

    pub fn success(&self) -> bool {
        self.passed() == self.total()
    }
}

#[derive(Debug, Clone)]
pub struct TestOptions {
    pub jobs: usize,
    /// Logs go to `test-log/`, scratch dirs to `test-tmp/`.
    pub build_dir: PathBuf,
}

impl TestOptions {
    pub fn new(build_dir: impl Into<PathBuf>) -> TestOptions {
        TestOptions {
            jobs: 1,
            build_dir: build_dir.into(),
        }
    }

    pub fn jobs(mut self, jobs: usize) -> TestOptions {
        self.jobs = jobs.max(1);
        self
    }

    pub fn report_path(&self) -> PathBuf {
        self.build_dir.join("test-results.xml")
    }
}

/// Runs the cases whose qualified id matches `filter` (all when `None`) and
/// writes `<build_dir>/test-results.xml`.
pub fn run_tests(cases: &[TestCase], filter: Option<&str>, opts: &TestOptions) -> Result<TestReport> {
    let filter = filter
        .map(|f| {
            Regex::new(f).map_err(|e| Error::BadFilter {
                pattern: f.to_string(),
                message: e.to_string(),
            })
        })
        .transpose()?;
    let selected: Vec<&TestCase> = cases
        .iter()
        .filter(|c| filter.as_ref().is_none_or(|re| re.is_match(&c.id())))
        .collect();

    let mut report = TestReport::default();
    if selected.is_empty() {
        report.warnings.push(match filter {
            Some(re) => format!("no tests match `{re}`"),
            None => "no tests declared".to_string(),
        });
    }

    let log_dir = opts.build_dir.join("test-log");
    let tmp_root = opts.build_dir.join("test-tmp");
    fs::create_dir_all(&log_dir).at(&log_dir)?;
    fs::create_dir_all(&tmp_root).at(&tmp_root)?;

    let slots: Vec<Mutex<Option<TestResult>>> = selected.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = opts.jobs.max(1).min(selected.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(case) = selected.get(i) else { break };
                let key = sanitize(&case.id());
                let result = run_one(case, &log_dir.join(format!("{key}.log")), &tmp_root.join(&key), opts);
                *slots[i].lock().unwrap() = Some(result);
            });
        }
    });
    report.results = slots
        .into_iter()
        .map(|s| s.into_inner().unwrap().expect("every selected case runs"))
        .collect();

    write_junit(&report, &opts.report_path())?;
    Ok(report)
}

fn run_one(case: &TestCase, log_path: &Path, tmp: &Path, opts: &TestOptions) -> TestResult {
    let start = Instant::now();
    let status = match execute_case(case, log_path, tmp, opts) {
        Ok(s) => s,
        Err(msg) => {
            let _ = fs::write(log_path, format!("{msg}\n"));
            TestStatus::Error(msg)
        }
    };
    TestResult {
        case: case.clone(),
        status,
        duration: start.elapsed(),
        log: log_path.to_path_buf(),
    }
}

fn execute_case(
    case: &TestCase,
    log_path: &Path,
    tmp: &Path,
    opts: &TestOptions,
) -> std::result::Result<TestStatus, String> {
    let decl = &case.decl;
    let pass_re = decl
        .pass_regex
        .as_deref()
        .map(Regex::new)
        .transpose()
        .map_err(|e| format!("invalid pass_regex: {e}"))?;
    let (program, args) = decl.command.split_first().ok_or("empty test command")?;
    if tmp.exists() {
        fs::remove_dir_all(tmp).map_err(|e| format!("{}: {e}", tmp.display()))?;
    }
    fs::create_dir_all(tmp).map_err(|e| format!("{}: {e}", tmp.display()))?;
    let log = File::create(log_path).map_err(|e| format!("{}: {e}", log_path.display()))?;
    let err_log = log.try_clone().map_err(|e| e.to_string())?;
    let status = Command::new(program)
        .args(args)
        .current_dir(&case.working_dir)
        .env_clear()
        .envs(base_env())
        .env(TEST_TMPDIR_VAR, tmp)
        .env(BUILD_DIR_VAR, &opts.build_dir)
        .stdin(Stdio::null())
        .stdout(log)
        .stderr(err_log)
        .status()
        .map_err(|e| format!("cannot spawn `{program}`: {e}"))?;
    let exit_code = status.code();
    let output = fs::read(log_path).map_err(|e| format!("{}: {e}", log_path.display()))?;
    let regex_miss = pass_re.is_some_and(|re| !re.is_match(&String::from_utf8_lossy(&output)));
    if exit_code == Some(decl.expected_exit) && !regex_miss {
        Ok(TestStatus::Pass)
    } else {
        Ok(TestStatus::Fail { exit_code, regex_miss })
    }
}

/// Drops characters XML 1.0 cannot carry.
fn xml_safe(s: &str) -> String {
    s.chars()
        .filter(|&c| matches!(c, '\t' | '\n' | '\r') || (c >= ' ' && c != '\u{fffe}' && c != '\u{ffff}'))
        .collect()
}

/// One `<testsuite>` per IP, one `<testcase>` per test.
pub fn write_junit(report: &TestReport, path: &Path) -> Result<()> {
    let io = |e: std::io::Error| Error::io(path, e);
    let mut w = Writer::new_with_indent(Vec::new(), b' ', 2);
    w.write_event(Event::Decl(BytesDecl::new("1.0", Some("UTF-8"), None)))
        .map_err(io)?;
    let mut root = BytesStart::new("testsuites");
    root.push_attribute(("tests", report.total().to_string().as_str()));
    root.push_attribute(("failures", report.failed().to_string().as_str()));
    root.push_attribute(("errors", report.errored().to_string().as_str()));
    w.write_event(Event::Start(root)).map_err(io)?;

    let owners: BTreeSet<&Vlnv> = report.results.iter().map(|r| &r.case.owner).collect();
    for owner in owners {
        let results: Vec<&TestResult> = report.results.iter().filter(|r| &r.case.owner == owner).collect();
        let count = |f: fn(&TestStatus) -> bool| results.iter().filter(|r| f(&r.status)).count().to_string();
        let suite_name = owner.to_string();
        let mut suite = BytesStart::new("testsuite");
        suite.push_attribute(("name", suite_name.as_str()));
        suite.push_attribute(("tests", results.len().to_string().as_str()));
        suite.push_attribute(("failures", count(|s| matches!(s, TestStatus::Fail { .. })).as_str()));
        suite.push_attribute(("errors", count(|s| matches!(s, TestStatus::Error(_))).as_str()));
        w.write_event(Event::Start(suite)).map_err(io)?;
        for r in results {
            let mut tc = BytesStart::new("testcase");
            tc.push_attribute(("classname", suite_name.as_str()));
            tc.push_attribute(("name", r.case.decl.name.as_str()));
            tc.push_attribute(("time", format!("{:.3}", r.duration.as_secs_f64()).as_str()));
            let tag = match r.status {
                TestStatus::Pass => None,
                TestStatus::Fail { .. } => Some("failure"),
                TestStatus::Error(_) => Some("error"),
            };
            match tag {
                None => {
                    w.write_event(Event::Empty(tc)).map_err(io)?;
                }
                Some(tag) => {
                    w.write_event(Event::Start(tc)).map_err(io)?;
                    let tail = xml_safe(&tail_lines(&r.log, 20));
                    let detail = r.status.detail(r.case.decl.expected_exit).unwrap_or_default();
                    let mut el = BytesStart::new(tag);
                    el.push_attribute(("message", tail.as_str()));
                    el.push_attribute(("type", xml_safe(&detail).as_str()));
                    w.write_event(Event::Start(el)).map_err(io)?;
                    w.write_event(Event::Text(BytesText::new(&tail))).map_err(io)?;
                    w.write_event(Event::End(BytesEnd::new(tag))).map_err(io)?;
                    w.write_event(Event::End(BytesEnd::new("testcase"))).map_err(io)?;
                }
            }
        }
        w.write_event(Event::End(BytesEnd::new("testsuite"))).map_err(io)?;
    }
    w.write_event(Event::End(BytesEnd::new("testsuites"))).map_err(io)?;
    let mut bytes = w.into_inner();
    bytes.push(b'\n');
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).at(parent)?;
    }
    fs::write(path, bytes).at(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::resolve;
    use crate::vlnv::VlnvRef;

    fn decl(name: &str, script: &str, regex: Option<&str>, expected: i32) -> TestDecl {
        TestDecl {
            name: name.into(),
            command: vec!["sh".into(), "-c".into(), script.into()],
            pass_regex: regex.map(Into::into),
            expected_exit: expected,
        }
    }

    fn registry(dir: &Path) -> Registry {
        let mut reg = Registry::new();
        let mut a = IpBlock::new(Vlnv::parse("v::l::b::1.0.0").unwrap()).with_dir(dir);
        a.tests.push(decl("zeta", "echo PASS", Some("PASS"), 0));
        a.tests.push(decl("alpha", "exit 2", None, 2));
        let mut b = IpBlock::new(Vlnv::parse("v::l::a::1.0.0").unwrap()).with_dir(dir);
        b.tests.push(decl("miss", "echo nope", Some("PASS"), 0));
        b.tests.push(decl("code", "echo PASS; exit 1", Some("PASS"), 0));
        let c = IpBlock::new(Vlnv::parse("v::l::c::1.0.0").unwrap());
        reg.insert(a).unwrap();
        reg.insert(b).unwrap();
        reg.insert(c).unwrap();
        reg
    }

    #[test]
    fn collection_order_and_scope() {
        let dir = tempfile::tempdir().unwrap();
        let reg = registry(dir.path());
        let ids: Vec<String> = collect_tests(&reg, None).unwrap().iter().map(TestCase::id).collect();
        assert_eq!(
            ids,
            [
                "v::l::a::1.0.0/code",
                "v::l::a::1.0.0/miss",
                "v::l::b::1.0.0/alpha",
                "v::l::b::1.0.0/zeta"
            ]
        );
        let g = resolve(&reg, &VlnvRef::parse("v::l::b").unwrap()).unwrap();
        assert_eq!(collect_tests(&reg, Some(&g)).unwrap().len(), 2);
    }

    #[test]
    fn verdicts_and_report() {
        let dir = tempfile::tempdir().unwrap();
        let reg = registry(dir.path());
        let cases = collect_tests(&reg, None).unwrap();
        let opts = TestOptions::new(dir.path().join("build")).jobs(4);
        let report = run_tests(&cases, None, &opts).unwrap();
        let statuses: Vec<&TestStatus> = report.results.iter().map(|r| &r.status).collect();
        assert_eq!(
            statuses,
            [
                &TestStatus::Fail {
                    exit_code: Some(1),
                    regex_miss: false
                },
                &TestStatus::Fail {
                    exit_code: Some(0),
                    regex_miss: true
                },
                &TestStatus::Pass,
                &TestStatus::Pass,
            ]
        );
        assert_eq!((report.passed(), report.failed(), report.errored()), (2, 2, 0));
        assert!(!report.success());
        let xml = fs::read_to_string(opts.report_path()).unwrap();
        assert_eq!(xml.matches("<testsuite ").count(), 2);
        assert_eq!(xml.matches("<testcase ").count(), 4);
        assert_eq!(xml.matches("<failure ").count(), 2);

        let only = run_tests(&cases, Some("zeta$"), &opts).unwrap();
        assert_eq!(only.total(), 1);
        assert!(only.success());

        let none = run_tests(&cases, Some("nothing"), &opts).unwrap();
        assert!(none.success());
        assert_eq!(none.warnings.len(), 1);

        assert_eq!(run_tests(&cases, Some("("), &opts).unwrap_err().code(), "E_BAD_FILTER");
    }

    #[test]
    fn spawn_failure_is_error() {
        let dir = tempfile::tempdir().unwrap();
        let case = TestCase {
            owner: Vlnv::parse("v::l::a::1.0.0").unwrap(),
            decl: TestDecl {
                name: "ghost".into(),
                command: vec!["/nonexistent/binary".into()],
                pass_regex: None,
                expected_exit: 0,
            },
            working_dir: dir.path().to_path_buf(),
        };
        let report = run_tests(&[case], None, &TestOptions::new(dir.path())).unwrap();
        assert!(matches!(report.results[0].status, TestStatus::Error(_)));
        assert!(fs::read_to_string(dir.path().join("test-results.xml"))
            .unwrap()
            .contains("<error "));
    }

    #[test]
    fn scratch_dir_and_scrubbed_env() {
        let dir = tempfile::tempdir().unwrap();
        std::env::set_var("SOCBUILD_TESTDRV_LEAK", "1");
        let case = TestCase {
            owner: Vlnv::parse("v::l::a::1.0.0").unwrap(),
            decl: decl(
                "env",
                "test -d \"$SOCBUILD_TEST_TMPDIR\" && test -z \"$SOCBUILD_TESTDRV_LEAK\" && echo ok",
                Some("(?m)^ok$"),
                0,
            ),
            working_dir: dir.path().to_path_buf(),
        };
        let report = run_tests(&[case], None, &TestOptions::new(dir.path())).unwrap();
        assert_eq!(report.results[0].status, TestStatus::Pass);
    }
}

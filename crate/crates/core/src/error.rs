// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the build flow can report.
///
/// Each variant maps to a stable diagnostic code (see [`Error::code`]) that the
/// CLI prints and tests match on. Wrapped errors ([`Error::Context`]) keep the
/// code of the innermost cause.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("`{text}`: expected {expected} `::`-separated components, found {found}")]
    Arity {
        text: String,
        expected: &'static str,
        found: usize,
    },
    #[error("`{text}`: invalid identifier `{ident}`")]
    BadIdent { text: String, ident: String },
    #[error("`{text}`: invalid version, expected MAJOR.MINOR.PATCH")]
    BadVersion { text: String },

    #[error("duplicate {lang} source `{}`", path.display())]
    DupSource { lang: String, path: PathBuf },
    #[error("bad path `{path}`: {reason}")]
    BadPath { path: String, reason: String },
    #[error("define `{key}` declared twice for {lang}")]
    DupDefine { lang: String, key: String },
    #[error("unknown source language `{0}`")]
    BadLang(String),

    #[error("{requirer} links `{reference}`, which matches no known IP block")]
    Unresolved { requirer: String, reference: String },
    #[error("dependency cycle: {}", join(path, " -> "))]
    Cycle { path: Vec<String> },
    #[error("version conflict: {first} (required by {first_requirer}) vs {second} (required by {second_requirer})")]
    VersionConflict {
        first: String,
        first_requirer: String,
        second: String,
        second_requirer: String,
    },
    #[error("{ip}: source file `{}` does not exist", path.display())]
    MissingFile { ip: String, path: PathBuf },
    #[error("target `{name}` defined by both {first} and {second}")]
    DupTarget {
        name: String,
        first: String,
        second: String,
    },

    #[error("{}:{line}:{column}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{}: {message}", path.display())]
    Schema { path: PathBuf, message: String },
    #[error("{vlnv} declared by both `{}` and `{}`", first.display(), second.display())]
    DupVlnv {
        vlnv: String,
        first: PathBuf,
        second: PathBuf,
    },

    #[error("fetching `{url}` failed: {message}")]
    Net { url: String, message: String },
    #[error("checksum mismatch for `{what}`: expected {expected}, got {actual}")]
    Checksum {
        what: String,
        expected: String,
        actual: String,
    },
    #[error("`{url}`: revision {rev} not available: {message}")]
    Rev { url: String, rev: String, message: String },
    #[error("cannot extract `{what}`: {message}")]
    Extract { what: String, message: String },
    #[error("{dependency}: manifest pins {manifest} but lockfile records {locked} (rerun with --update)")]
    LockDiverged {
        dependency: String,
        manifest: String,
        locked: String,
    },
    #[error("{0}")]
    Fetch(String),

    #[error("backend `{0}` is already registered")]
    DupBackend(String),
    #[error("no backend named `{0}`")]
    NoBackend(String),
    #[error("unknown template placeholder `{0}`")]
    BadTemplate(String),
    #[error("backend `{0}` found no sources to compile")]
    NoSources(String),
    #[error("bad backend option: {0}")]
    BadOption(String),

    #[error("output `{}` produced by both `{first}` and `{second}`", path.display())]
    DupOutput {
        path: PathBuf,
        first: String,
        second: String,
    },
    #[error("target cycle: {}", join(path, " -> "))]
    CycleTargets { path: Vec<String> },
    #[error("target `{target}` depends on unknown target `{dep}`")]
    UnknownDep { target: String, dep: String },
    #[error("no target named `{0}`")]
    UnknownTarget(String),
    #[error("build failed:\n{0}")]
    ExecFailed(String),

    #[error("test `{0}` declared twice")]
    DupTest(String),
    #[error("invalid test filter `{pattern}`: {message}")]
    BadFilter { pattern: String, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

fn join(items: &[String], sep: &str) -> String {
    items.join(sep)
}

impl Error {
    /// Stable diagnostic code, e.g. `E_CYCLE`.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Arity { .. } => "E_ARITY",
            Error::BadIdent { .. } => "E_BAD_IDENT",
            Error::BadVersion { .. } => "E_BAD_VERSION",
            Error::DupSource { .. } => "E_DUP_SOURCE",
            Error::BadPath { .. } => "E_BAD_PATH",
            Error::DupDefine { .. } => "E_DUP_DEFINE",
            Error::BadLang(_) => "E_BAD_LANG",
            Error::Unresolved { .. } => "E_UNRESOLVED",
            Error::Cycle { .. } => "E_CYCLE",
            Error::VersionConflict { .. } => "E_VERSION_CONFLICT",
            Error::MissingFile { .. } => "E_MISSING_FILE",
            Error::DupTarget { .. } => "E_DUP_TARGET",
            Error::Parse { .. } => "E_PARSE",
            Error::Schema { .. } => "E_SCHEMA",
            Error::DupVlnv { .. } => "E_DUP_VLNV",
            Error::Net { .. } => "E_NET",
            Error::Checksum { .. } => "E_CHECKSUM",
            Error::Rev { .. } => "E_REV",
            Error::Extract { .. } => "E_EXTRACT",
            Error::LockDiverged { .. } => "E_LOCK_DIVERGED",
            Error::Fetch(_) => "E_FETCH",
            Error::DupBackend(_) => "E_DUP_BACKEND",
            Error::NoBackend(_) => "E_NO_BACKEND",
            Error::BadTemplate(_) => "E_BAD_TEMPLATE",
            Error::NoSources(_) => "E_NO_SOURCES",
            Error::BadOption(_) => "E_BAD_OPTION",
            Error::DupOutput { .. } => "E_DUP_OUTPUT",
            Error::CycleTargets { .. } => "E_CYCLE_TARGETS",
            Error::UnknownDep { .. } => "E_UNKNOWN_DEP",
            Error::UnknownTarget(_) => "E_UNKNOWN_TARGET",
            Error::ExecFailed(_) => "E_EXEC_FAILED",
            Error::DupTest(_) => "E_DUP_TEST",
            Error::BadFilter { .. } => "E_BAD_FILTER",
            Error::Io { .. } => "E_IO",
            Error::Context { source, .. } => source.code(),
        }
    }

    /// Strips [`Error::Context`] wrappers.
    pub fn root_cause(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root_cause(),
            other => other,
        }
    }

    pub fn context(self, context: impl fmt::Display) -> Error {
        Error::Context {
            context: context.to_string(),
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) trait IoContext<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T>;
}

impl<T> IoContext<T> for std::io::Result<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T> {
        self.map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn context_keeps_inner_code() {
        let err = Error::Cycle {
            path: vec!["a".into(), "b".into(), "a".into()],
        }
        .context("while resolving")
        .context("outer");
        assert_eq!(err.code(), "E_CYCLE");
        assert!(matches!(err.root_cause(), Error::Cycle { .. }));
        assert_eq!(err.to_string(), "outer: while resolving: dependency cycle: a -> b -> a");
    }
}

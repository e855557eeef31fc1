// SPDX-License-Identifier: Apache-2.0

//! Backends read a resolved graph and emit build targets.
//!
//! Each backend sees the graph through a [`BackendContext`], whose fileset
//! view is a copy-on-write overlay: a backend that rewrites filesets (sv2v)
//! affects the backends run after it in the same pipeline, never the
//! underlying [`IpBlock`]s.

mod filelist;
mod softcc;
mod sv2v;
mod toolcmd;

pub use filelist::{builtin_filelist, render_filelist, FilelistFormat};
pub use softcc::builtin_softcc;
pub use sv2v::{builtin_sv2v, sv2v_stub_transform};
pub use toolcmd::{builtin_tool_cmd, expand_template};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::{collect_sources_with, Properties, ResolvedGraph, SourceEntry};
use crate::ip::{BackendInvocation, BackendOptions, IpBlock, OptionValue, SourceLanguage};
use crate::target::Target;
use crate::vlnv::{is_ident, Vlnv};

/// Subcommand of the `socbuild` binary used by builtin targets.
pub const HELPER_SUBCOMMAND: &str = "__internal";

pub type BackendFn = Arc<dyn Fn(&mut BackendContext<'_>) -> Result<BackendResult> + Send + Sync>;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BackendResult {
    pub targets: Vec<Target>,
    /// Primary outputs; each is an output of one of `targets`.
    pub artifacts: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

impl BackendResult {
    pub fn extend(&mut self, other: BackendResult) {
        self.targets.extend(other.targets);
        self.artifacts.extend(other.artifacts);
        self.warnings.extend(other.warnings);
    }
}

/// Per-pipeline view of a resolved graph.
pub struct BackendContext<'g> {
    graph: &'g ResolvedGraph,
    order: Vec<Vlnv>,
    overlay: BTreeMap<Vlnv, BTreeMap<SourceLanguage, Vec<PathBuf>>>,
    generated: BTreeSet<PathBuf>,
    pub build_dir: PathBuf,
    /// Options of the backend currently running.
    pub options: BackendOptions,
    /// Executable providing the `__internal` helper subcommands.
    pub helper_exe: PathBuf,
}

impl fmt::Debug for BackendContext<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BackendContext")
            .field("root", self.root())
            .field("build_dir", &self.build_dir)
            .field("options", &self.options)
            .finish_non_exhaustive()
    }
}

impl<'g> BackendContext<'g> {
    pub fn new(graph: &'g ResolvedGraph, build_dir: impl Into<PathBuf>) -> BackendContext<'g> {
        let helper_exe = std::env::current_exe().unwrap_or_else(|_| PathBuf::from("socbuild"));
        BackendContext {
            graph,
            order: graph.flatten(),
            overlay: BTreeMap::new(),
            generated: BTreeSet::new(),
            build_dir: build_dir.into(),
            options: BackendOptions::new(),
            helper_exe,
        }
    }

    pub fn with_helper(mut self, exe: impl Into<PathBuf>) -> BackendContext<'g> {
        self.helper_exe = exe.into();
        self
    }

    pub fn graph(&self) -> &'g ResolvedGraph {
        self.graph
    }

    pub fn root(&self) -> &'g Vlnv {
        self.graph.root()
    }

    pub fn root_block(&self) -> &'g IpBlock {
        self.graph.root_block()
    }

    /// Flatten order of the graph.
    pub fn order(&self) -> &[Vlnv] {
        &self.order
    }

    /// Fileset as currently seen by this pipeline.
    pub fn fileset(&self, id: &Vlnv, lang: SourceLanguage) -> &[PathBuf] {
        match self.overlay.get(id).and_then(|m| m.get(&lang)) {
            Some(v) => v,
            None => self.graph.get(id).map(|ip| ip.fileset(lang)).unwrap_or(&[]),
        }
    }

    /// Replaces one fileset in the overlay.
    pub fn set_fileset(&mut self, id: &Vlnv, lang: SourceLanguage, paths: Vec<PathBuf>) {
        self.overlay.entry(id.clone()).or_default().insert(lang, paths);
    }

    /// Declares a path produced by a planned target, so later source
    /// collection does not require it to exist yet.
    pub fn mark_generated(&mut self, path: impl Into<PathBuf>) {
        self.generated.insert(path.into());
    }

    pub fn is_generated(&self, path: &Path) -> bool {
        self.generated.contains(path)
    }

    /// Overlay-aware equivalent of [`ResolvedGraph::collect_sources`].
    pub fn sources(&self, langs: &[SourceLanguage]) -> Result<Vec<SourceEntry>> {
        collect_sources_with(&self.order, |id, lang| self.fileset(id, lang), langs, &self.generated)
    }

    pub fn properties(&self, langs: &[SourceLanguage]) -> Properties {
        self.graph.collect_properties_for(langs)
    }

    pub fn option_str(&self, key: &str) -> Result<Option<&str>> {
        match self.options.get(key) {
            None => Ok(None),
            Some(OptionValue::Str(s)) => Ok(Some(s)),
            Some(OptionValue::List(_)) => Err(Error::BadOption(format!("`{key}` must be a string"))),
        }
    }

    /// A string option is accepted as a one-element list.
    pub fn option_list(&self, key: &str) -> Result<Option<Vec<String>>> {
        Ok(match self.options.get(key) {
            None => None,
            Some(OptionValue::Str(s)) => Some(vec![s.clone()]),
            Some(OptionValue::List(v)) => Some(v.clone()),
        })
    }

    /// `languages` option, or `default` when absent.
    pub fn option_langs(&self, default: &[SourceLanguage]) -> Result<Vec<SourceLanguage>> {
        match self.option_list("languages")? {
            None => Ok(default.to_vec()),
            Some(keys) => keys.iter().map(|k| k.parse()).collect(),
        }
    }

    /// Target name from the `target` option, else `default`.
    pub fn option_target_name(&self, default: &str) -> Result<String> {
        let name = self.option_str("target")?.unwrap_or(default);
        if !is_ident(name) {
            return Err(Error::BadOption(format!("target name `{name}` is not an identifier")));
        }
        Ok(name.to_string())
    }

    /// argv running one of the helper subcommands.
    pub fn helper_command(&self, args: &[&str]) -> Vec<String> {
        let mut argv = vec![self.helper_exe.display().to_string(), HELPER_SUBCOMMAND.to_string()];
        argv.extend(args.iter().map(|a| a.to_string()));
        argv
    }
}

/// Named backends, with the builtins preinstalled.
#[derive(Clone)]
pub struct BackendRegistry {
    backends: BTreeMap<String, BackendFn>,
}

impl fmt::Debug for BackendRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.backends.keys()).finish()
    }
}

impl Default for BackendRegistry {
    fn default() -> Self {
        Self::new()
    }
}

impl BackendRegistry {
    /// Registry holding `filelist`, `tool_cmd`, `sv2v` and `softcc`.
    pub fn new() -> BackendRegistry {
        let mut reg = BackendRegistry::empty();
        let builtins: [(&str, BackendFn); 4] = [
            ("filelist", Arc::new(builtin_filelist)),
            ("tool_cmd", Arc::new(builtin_tool_cmd)),
            ("sv2v", Arc::new(builtin_sv2v)),
            ("softcc", Arc::new(builtin_softcc)),
        ];
        for (name, f) in builtins {
            reg.backends.insert(name.to_string(), f);
        }
        reg
    }

    pub fn empty() -> BackendRegistry {
        BackendRegistry {
            backends: BTreeMap::new(),
        }
    }

    pub fn register<F>(&mut self, name: &str, f: F) -> Result<()>
    where
        F: Fn(&mut BackendContext<'_>) -> Result<BackendResult> + Send + Sync + 'static,
    {
        if !is_ident(name) {
            return Err(Error::BadIdent {
                text: name.to_string(),
                ident: name.to_string(),
            });
        }
        if self.backends.contains_key(name) {
            return Err(Error::DupBackend(name.to_string()));
        }
        self.backends.insert(name.to_string(), Arc::new(f));
        Ok(())
    }

    /// Registered names, sorted.
    pub fn names(&self) -> Vec<&str> {
        self.backends.keys().map(String::as_str).collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.backends.contains_key(name)
    }

    /// Runs one backend with the options already set on `ctx`.
    pub fn run_backend(&self, name: &str, ctx: &mut BackendContext<'_>) -> Result<BackendResult> {
        let f = self
            .backends
            .get(name)
            .ok_or_else(|| Error::NoBackend(name.to_string()))?;
        let result = f(ctx).map_err(|e| e.context(format!("backend `{name}`")))?;
        debug_assert!(result
            .artifacts
            .iter()
            .all(|a| result.targets.iter().any(|t| t.outputs.contains(a))));
        Ok(result)
    }

    /// Runs `invocations` in order on one shared overlay. Every name is
    /// looked up before anything runs.
    pub fn run_pipeline(
        &self,
        ctx: &mut BackendContext<'_>,
        invocations: &[BackendInvocation],
    ) -> Result<BackendResult> {
        if let Some(missing) = invocations.iter().find(|i| !self.contains(&i.name)) {
            return Err(Error::NoBackend(missing.name.clone()));
        }
        let mut out = BackendResult::default();
        for inv in invocations {
            ctx.options = inv.options.clone();
            out.extend(self.run_backend(&inv.name, ctx)?);
        }
        ctx.options.clear();
        Ok(out)
    }
}

/// Maps every character outside `[A-Za-z0-9_-]` to `_`.
pub fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Writes `bytes` unless the file already holds exactly them.
pub(crate) fn write_if_changed(path: &Path, bytes: &[u8]) -> Result<()> {
    use crate::error::IoContext;
    if std::fs::read(path).ok().as_deref() == Some(bytes) {
        return Ok(());
    }
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).at(parent)?;
    }
    std::fs::write(path, bytes).at(path)
}


#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;
    use crate::ip::SourceLanguage::*;

    #[test]
    fn registration() {
        let mut reg = BackendRegistry::new();
        reg.register("mytool", |_| Ok(BackendResult::default())).unwrap();
        assert_eq!(reg.names(), ["filelist", "mytool", "softcc", "sv2v", "tool_cmd"]);
        let err = reg.register("filelist", |_| Ok(BackendResult::default())).unwrap_err();
        assert_eq!(err.code(), "E_DUP_BACKEND");
    }

    #[test]
    fn unknown_backend_and_prefixed_errors() {
        let dir = tempfile::tempdir().unwrap();
        let g = graph(vec![block(dir.path(), "v::l::top::1.0.0", &[], &[])]);
        let mut reg = BackendRegistry::new();
        reg.register("broken", |_| Err(Error::NoSources("x".into()))).unwrap();
        let mut ctx = BackendContext::new(&g, dir.path().join("build"));
        let inv = |n: &str| BackendInvocation {
            name: n.into(),
            options: BackendOptions::new(),
        };
        let err = reg.run_pipeline(&mut ctx, &[inv("filelist"), inv("nope")]).unwrap_err();
        assert_eq!(err.code(), "E_NO_BACKEND");
        let err = reg.run_pipeline(&mut ctx, &[inv("broken")]).unwrap_err();
        assert_eq!(err.code(), "E_NO_SOURCES");
        assert!(err.to_string().starts_with("backend `broken`: "));
    }

    #[test]
    fn overlay_never_touches_the_graph() {
        let dir = tempfile::tempdir().unwrap();
        let g = graph(vec![block(
            dir.path(),
            "v::l::top::1.0.0",
            &[],
            &[(SystemVerilog, "a.sv", "logic a;"), (Verilog, "b.v", "wire b;")],
        )]);
        let before = g.collect_sources(&SourceLanguage::ALL).unwrap();
        let mut ctx = BackendContext::new(&g, dir.path().join("build"));
        BackendRegistry::new().run_backend("sv2v", &mut ctx).unwrap();
        assert_ne!(ctx.sources(&SourceLanguage::ALL).unwrap(), before);
        assert_eq!(g.collect_sources(&SourceLanguage::ALL).unwrap(), before);
    }
}

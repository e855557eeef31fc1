// SPDX-License-Identifier: Apache-2.0

//! Declarative `ip.json` manifests and workspace discovery.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use regex::Regex;
use serde::Deserialize;

use crate::error::{Error, IoContext, Result};
use crate::fetch::{FetchSource, FetchSpec};
use crate::graph::Registry;
use crate::ip::{normalize_path, resolve_within, BackendInvocation, IpBlock, SourceLanguage, TestDecl};
use crate::target::Target;
use crate::vlnv::{is_ident, Vlnv, VlnvRef};

pub const MANIFEST_NAME: &str = "ip.json";

/// Paths starting with this prefix are left for expansion at plan time.
const BUILD_DIR_VAR: &str = "{build_dir}";

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    ip: String,
    #[serde(default)]
    sources: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    include_dirs: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    defines: BTreeMap<String, IndexMap<String, Option<String>>>,
    #[serde(default)]
    links: Vec<String>,
    #[serde(default)]
    dependencies: BTreeMap<String, RawFetch>,
    #[serde(default)]
    tests: Vec<TestDecl>,
    #[serde(default)]
    backends: Vec<BackendInvocation>,
    #[serde(default)]
    targets: Vec<RawTarget>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFetch {
    git: Option<String>,
    tarball: Option<String>,
    zip: Option<String>,
    rev: Option<String>,
    sha256: Option<String>,
    subdir: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTarget {
    name: String,
    command: Vec<String>,
    #[serde(default)]
    inputs: Vec<String>,
    #[serde(default)]
    outputs: Vec<String>,
    #[serde(default)]
    deps: Vec<String>,
    working_dir: Option<String>,
    #[serde(default)]
    env: BTreeMap<String, String>,
}

/// A loaded and validated manifest.
#[derive(Debug, Clone)]
pub struct ManifestDoc {
    pub path: PathBuf,
    pub dir: PathBuf,
    pub block: IpBlock,
    /// Remote dependencies keyed by the exact identity they provide.
    pub dependencies: BTreeMap<Vlnv, FetchSpec>,
    pub warnings: Vec<String>,
}

impl ManifestDoc {
    pub fn id(&self) -> &Vlnv {
        &self.block.id
    }
}

/// Reads and validates one manifest. Relative paths resolve against the
/// manifest's directory and may not leave it.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<ManifestDoc> {
    let path = absolute(path.as_ref())?;
    let text = std::fs::read_to_string(&path).at(&path)?;
    parse_manifest(&path, &text)
}

/// Parses manifest text as if it had been read from `path`.
pub fn parse_manifest(path: &Path, text: &str) -> Result<ManifestDoc> {
    let path = absolute(path)?;
    let dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("/"));
    let raw: RawManifest = serde_json::from_str(text).map_err(|e| json_error(&path, e))?;
    build_doc(&path, &dir, raw).map_err(|e| match e {
        e @ (Error::Schema { .. } | Error::Parse { .. }) => e,
        e => e.context(path.display()),
    })
}

fn absolute(path: &Path) -> Result<PathBuf> {
    let abs = std::path::absolute(path).at(path)?;
    normalize_path(None, &abs)
}

fn json_error(path: &Path, e: serde_json::Error) -> Error {
    use serde_json::error::Category;
    match e.classify() {
        Category::Syntax | Category::Eof => Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: strip_position(&e.to_string()),
        },
        Category::Data => Error::Schema {
            path: path.to_path_buf(),
            message: e.to_string(),
        },
        Category::Io => Error::io(path, e.into()),
    }
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

fn build_doc(path: &Path, dir: &Path, raw: RawManifest) -> Result<ManifestDoc> {
    let schema = |message: String| Error::Schema {
        path: path.to_path_buf(),
        message,
    };
    let mut block = IpBlock::new(Vlnv::parse(&raw.ip)?).with_dir(dir);
    block.manifest = Some(path.to_path_buf());

    for (lang, files) in &raw.sources {
        block.add_sources(lang.parse()?, files)?;
    }
    for (lang, dirs) in &raw.include_dirs {
        let lang: SourceLanguage = lang.parse()?;
        for d in dirs {
            block.add_include_dir(lang, d)?;
        }
    }
    for (lang, defines) in &raw.defines {
        let lang: SourceLanguage = lang.parse()?;
        for (key, value) in defines {
            block.add_define(lang, key, value.as_deref())?;
        }
    }
    for link in &raw.links {
        block.link(VlnvRef::parse(link)?);
    }

    let mut test_names = BTreeSet::new();
    for test in raw.tests {
        if !is_ident(&test.name) {
            return Err(schema(format!("invalid test name `{}`", test.name)));
        }
        if !test_names.insert(test.name.clone()) {
            return Err(schema(format!("test `{}` declared twice", test.name)));
        }
        if test.command.is_empty() {
            return Err(schema(format!("test `{}` has an empty command", test.name)));
        }
        if let Some(re) = &test.pass_regex {
            Regex::new(re).map_err(|e| schema(format!("test `{}`: bad pass_regex: {e}", test.name)))?;
        }
        block.tests.push(test);
    }

    for b in &raw.backends {
        if !is_ident(&b.name) {
            return Err(schema(format!("invalid backend name `{}`", b.name)));
        }
    }
    block.backends = raw.backends;

    for t in raw.targets {
        block.add_target(build_target(dir, t).map_err(schema)?);
    }

    let mut dependencies = BTreeMap::new();
    let mut warnings = Vec::new();
    for (key, fetch) in raw.dependencies {
        let id = Vlnv::parse(&key).map_err(|e| schema(format!("dependency key: {e}")))?;
        let spec = build_fetch(fetch).map_err(|m| schema(format!("dependency `{key}`: {m}")))?;
        if !block.links.iter().any(|r| r.matches(&id)) {
            warnings.push(format!("{}: dependency {id} is not linked", block.id));
        }
        dependencies.insert(id, spec);
    }

    Ok(ManifestDoc {
        path: path.to_path_buf(),
        dir: dir.to_path_buf(),
        block,
        dependencies,
        warnings,
    })
}

fn build_target(dir: &Path, raw: RawTarget) -> std::result::Result<Target, String> {
    if !is_ident(&raw.name) {
        return Err(format!("invalid target name `{}`", raw.name));
    }
    if raw.command.is_empty() {
        return Err(format!("target `{}` has an empty command", raw.name));
    }
    let path = |p: &str| -> std::result::Result<PathBuf, String> {
        if p.starts_with(BUILD_DIR_VAR) {
            Ok(PathBuf::from(p))
        } else {
            resolve_within(dir, Path::new(p)).map_err(|e| format!("target `{}`: {e}", raw.name))
        }
    };
    let mut t = Target::new(raw.name.clone(), raw.command.clone());
    for p in &raw.inputs {
        t.inputs.push(path(p)?);
    }
    for p in &raw.outputs {
        t.outputs.push(path(p)?);
    }
    t.deps = raw.deps;
    t.working_dir = Some(match &raw.working_dir {
        Some(w) => path(w)?,
        None => dir.to_path_buf(),
    });
    t.env = raw.env;
    Ok(t)
}

fn is_hex(s: &str, lens: &[usize]) -> bool {
    lens.contains(&s.len()) && s.bytes().all(|b| b.is_ascii_hexdigit())
}

fn build_fetch(raw: RawFetch) -> std::result::Result<FetchSpec, String> {
    let is_zip = raw.zip.is_some();
    let source = match (raw.git, raw.tarball, raw.zip) {
        (Some(url), None, None) => {
            if raw.sha256.is_some() {
                return Err("`sha256` only applies to archives".into());
            }
            let rev = raw.rev.ok_or("git dependencies require a pinned `rev`")?;
            if !is_hex(&rev, &[40, 64]) {
                return Err(format!("`rev` must be a full commit id, got `{rev}`"));
            }
            FetchSource::Git {
                url,
                rev: rev.to_ascii_lowercase(),
            }
        }
        (None, Some(url), None) | (None, None, Some(url)) => {
            if raw.rev.is_some() {
                return Err("`rev` only applies to git dependencies".into());
            }
            let sha256 = raw.sha256.ok_or("archive dependencies require `sha256`")?;
            if !is_hex(&sha256, &[64]) {
                return Err(format!("`sha256` must be 64 hex digits, got `{sha256}`"));
            }
            let sha256 = sha256.to_ascii_lowercase();
            if is_zip {
                FetchSource::Zip { url, sha256 }
            } else {
                FetchSource::Tarball { url, sha256 }
            }
        }
        _ => return Err("exactly one of `git`, `tarball` or `zip` is required".into()),
    };
    if source.url().is_empty() {
        return Err("empty url".into());
    }
    let subdir = match raw.subdir {
        Some(s) => {
            let p = PathBuf::from(&s);
            if p.is_absolute() || resolve_within(Path::new("/x"), &p).is_err() {
                return Err(format!("`subdir` must stay inside the fetched tree, got `{s}`"));
            }
            Some(p)
        }
        None => None,
    };
    Ok(FetchSpec { source, subdir })
}

/// Finds every `ip.json` under `root`, skipping `.git` and the `exclude`
/// directories, and loads them in path order.
pub fn discover_manifests(root: &Path, exclude: &[PathBuf]) -> Result<Vec<ManifestDoc>> {
    let root = absolute(root)?;
    let exclude: Vec<PathBuf> = exclude.iter().map(|p| absolute(p)).collect::<Result<_>>()?;
    let walker = walkdir::WalkDir::new(&root)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| {
            !(e.file_type().is_dir() && (e.file_name() == ".git" || exclude.iter().any(|x| e.path() == x)))
        });
    let mut docs = Vec::new();
    for entry in walker {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(&root).to_path_buf();
            Error::io(path, e.into())
        })?;
        if entry.file_type().is_file() && entry.file_name() == MANIFEST_NAME {
            docs.push(load_manifest(entry.path())?);
        }
    }
    docs.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(docs)
}

pub fn registry_from<'a>(docs: impl IntoIterator<Item = &'a ManifestDoc>) -> Result<Registry> {
    let mut reg = Registry::new();
    for doc in docs {
        reg.insert(doc.block.clone())?;
    }
    Ok(reg)
}

pub fn build_registry(root: &Path, exclude: &[PathBuf]) -> Result<Registry> {
    registry_from(&discover_manifests(root, exclude)?)
}

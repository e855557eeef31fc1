// SPDX-License-Identifier: Apache-2.0

//! The IP block: a property carrier with no build output of its own.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Component, Path, PathBuf};
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::target::Target;
use crate::vlnv::{Vlnv, VlnvRef};

/// Source languages an IP block can carry. Declaration order is the order
/// languages are visited when collecting sources from one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SourceLanguage {
    Verilog,
    SystemVerilog,
    Vhdl,
    SystemRdl,
    C,
    Cpp,
    Asm,
}

impl SourceLanguage {
    pub const ALL: [SourceLanguage; 7] = [
        SourceLanguage::Verilog,
        SourceLanguage::SystemVerilog,
        SourceLanguage::Vhdl,
        SourceLanguage::SystemRdl,
        SourceLanguage::C,
        SourceLanguage::Cpp,
        SourceLanguage::Asm,
    ];

    /// Languages HDL tools consume directly.
    pub const HDL: [SourceLanguage; 3] = [
        SourceLanguage::Verilog,
        SourceLanguage::SystemVerilog,
        SourceLanguage::Vhdl,
    ];

    /// Key used in manifests.
    pub fn key(self) -> &'static str {
        match self {
            SourceLanguage::Verilog => "verilog",
            SourceLanguage::SystemVerilog => "systemverilog",
            SourceLanguage::Vhdl => "vhdl",
            SourceLanguage::SystemRdl => "systemrdl",
            SourceLanguage::C => "c",
            SourceLanguage::Cpp => "cpp",
            SourceLanguage::Asm => "asm",
        }
    }
}

impl fmt::Display for SourceLanguage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for SourceLanguage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SourceLanguage::ALL
            .into_iter()
            .find(|l| l.key() == s)
            .ok_or_else(|| Error::BadLang(s.to_string()))
    }
}

/// Lexically normalizes `path`, joining it onto `base` first when relative.
/// No filesystem access; `..` above the filesystem root is an error.
pub fn normalize_path(base: Option<&Path>, path: &Path) -> Result<PathBuf> {
    let bad = |reason: &str| Error::BadPath {
        path: path.display().to_string(),
        reason: reason.to_string(),
    };
    if path.as_os_str().is_empty() {
        return Err(bad("empty path"));
    }
    let joined = if path.is_absolute() {
        path.to_path_buf()
    } else {
        match base {
            Some(base) => base.join(path),
            None => return Err(bad("relative path without a base directory")),
        }
    };
    let mut out = PathBuf::new();
    for comp in joined.components() {
        match comp {
            Component::CurDir => {}
            Component::ParentDir => {
                if !out.pop() || out.as_os_str().is_empty() {
                    return Err(bad("escapes the filesystem root"));
                }
            }
            other => out.push(other.as_os_str()),
        }
    }
    if !out.is_absolute() {
        return Err(bad("does not resolve to an absolute path"));
    }
    Ok(out)
}

/// Like [`normalize_path`] but a relative `path` must stay inside `base`.
pub fn resolve_within(base: &Path, path: &Path) -> Result<PathBuf> {
    let resolved = normalize_path(Some(base), path)?;
    if path.is_relative() && !resolved.starts_with(base) {
        return Err(Error::BadPath {
            path: path.display().to_string(),
            reason: format!("escapes `{}`", base.display()),
        });
    }
    Ok(resolved)
}

/// A test declared next to an IP block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestDecl {
    pub name: String,
    pub command: Vec<String>,
    #[serde(default)]
    pub pass_regex: Option<String>,
    #[serde(default)]
    pub expected_exit: i32,
}

/// Backend option value: a plain string or a list of strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OptionValue {
    Str(String),
    List(Vec<String>),
}

pub type BackendOptions = BTreeMap<String, OptionValue>;

/// A backend to run, in declaration order, when the block is built as a root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendInvocation {
    pub name: String,
    #[serde(default)]
    pub options: BackendOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropertyKind {
    IncludeDir,
    Define,
}

/// An IP block. Equality and ordering are by [`Vlnv`] only.
#[derive(Debug, Clone)]
pub struct IpBlock {
    pub id: Vlnv,
    /// Directory relative paths are resolved against.
    pub dir: Option<PathBuf>,
    /// Manifest the block was loaded from, if any.
    pub manifest: Option<PathBuf>,
    pub filesets: BTreeMap<SourceLanguage, Vec<PathBuf>>,
    pub include_dirs: BTreeMap<SourceLanguage, Vec<PathBuf>>,
    pub defines: BTreeMap<SourceLanguage, IndexMap<String, Option<String>>>,
    pub links: Vec<VlnvRef>,
    pub targets: Vec<Target>,
    pub tests: Vec<TestDecl>,
    pub backends: Vec<BackendInvocation>,
}

impl PartialEq for IpBlock {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl Eq for IpBlock {}

impl IpBlock {
    pub fn new(id: Vlnv) -> IpBlock {
        IpBlock {
            id,
            dir: None,
            manifest: None,
            filesets: BTreeMap::new(),
            include_dirs: BTreeMap::new(),
            defines: BTreeMap::new(),
            links: Vec::new(),
            targets: Vec::new(),
            tests: Vec::new(),
            backends: Vec::new(),
        }
    }

    pub fn with_dir(mut self, dir: impl Into<PathBuf>) -> IpBlock {
        self.dir = Some(dir.into());
        self
    }

    pub fn fileset(&self, lang: SourceLanguage) -> &[PathBuf] {
        self.filesets.get(&lang).map(Vec::as_slice).unwrap_or(&[])
    }

    fn resolve(&self, path: &Path) -> Result<PathBuf> {
        match &self.dir {
            Some(dir) => resolve_within(dir, path),
            None => normalize_path(None, path),
        }
    }

    /// Appends `paths` to the `lang` fileset. Nothing is added if any path is
    /// invalid or already present.
    pub fn add_sources<P: AsRef<Path>>(
        &mut self,
        lang: SourceLanguage,
        paths: impl IntoIterator<Item = P>,
    ) -> Result<()> {
        let existing = self.fileset(lang);
        let mut fresh: Vec<PathBuf> = Vec::new();
        for p in paths {
            let path = self.resolve(p.as_ref())?;
            if existing.contains(&path) || fresh.contains(&path) {
                return Err(Error::DupSource {
                    lang: lang.to_string(),
                    path,
                });
            }
            fresh.push(path);
        }
        self.filesets.entry(lang).or_default().extend(fresh);
        Ok(())
    }

    pub fn add_include_dir(&mut self, lang: SourceLanguage, dir: impl AsRef<Path>) -> Result<()> {
        let dir = self.resolve(dir.as_ref())?;
        let dirs = self.include_dirs.entry(lang).or_default();
        if !dirs.contains(&dir) {
            dirs.push(dir);
        }
        Ok(())
    }

    /// Adds `-Dkey[=value]`-style define. A key may be defined once per language.
    pub fn add_define(&mut self, lang: SourceLanguage, key: &str, value: Option<&str>) -> Result<()> {
        if !is_macro_name(key) {
            return Err(Error::BadIdent {
                text: key.to_string(),
                ident: key.to_string(),
            });
        }
        let defines = self.defines.entry(lang).or_default();
        if defines.contains_key(key) {
            return Err(Error::DupDefine {
                lang: lang.to_string(),
                key: key.to_string(),
            });
        }
        defines.insert(key.to_string(), value.map(str::to_string));
        Ok(())
    }

    /// Generic property setter. `value` is a directory for
    /// [`PropertyKind::IncludeDir`] and `KEY` or `KEY=VALUE` for
    /// [`PropertyKind::Define`].
    pub fn add_property(&mut self, lang: SourceLanguage, kind: PropertyKind, value: &str) -> Result<()> {
        match kind {
            PropertyKind::IncludeDir => self.add_include_dir(lang, value),
            PropertyKind::Define => match value.split_once('=') {
                Some((k, v)) => self.add_define(lang, k, Some(v)),
                None => self.add_define(lang, value, None),
            },
        }
    }

    /// Records a link edge. Resolution happens later; repeated refs are ignored.
    pub fn link(&mut self, r: VlnvRef) {
        if !self.links.contains(&r) {
            self.links.push(r);
        }
    }

    pub fn add_target(&mut self, target: Target) {
        self.targets.push(target);
    }

    /// Human-readable origin for diagnostics.
    pub fn origin(&self) -> String {
        match &self.manifest {
            Some(m) => m.display().to_string(),
            None => self.id.to_string(),
        }
    }
}

pub fn new_ip(id: Vlnv) -> IpBlock {
    IpBlock::new(id)
}

fn is_macro_name(s: &str) -> bool {
    let mut bytes = s.bytes();
    matches!(bytes.next(), Some(b) if b.is_ascii_alphabetic() || b == b'_')
        && bytes.all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

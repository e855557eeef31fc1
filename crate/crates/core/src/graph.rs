// SPDX-License-Identifier: Apache-2.0

//! Binding link references, cycle and version-conflict detection, and the
//! dependencies-first flatten order every backend reads sources in.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::ip::{IpBlock, SourceLanguage};
use crate::target::Target;
use crate::vlnv::{Ident, VersionReq, Vlnv, VlnvRef};

/// All known IP blocks, keyed by exact identity.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    entries: BTreeMap<Vlnv, IpBlock>,
}

impl Registry {
    pub fn new() -> Registry {
        Registry::default()
    }

    pub fn insert(&mut self, ip: IpBlock) -> Result<()> {
        if let Some(existing) = self.entries.get(&ip.id) {
            // Report the two origins in sorted order so the message does not
            // depend on discovery order.
            let mut origins = [PathBuf::from(existing.origin()), PathBuf::from(ip.origin())];
            origins.sort();
            let [first, second] = origins;
            return Err(Error::DupVlnv {
                vlnv: ip.id.to_string(),
                first,
                second,
            });
        }
        self.entries.insert(ip.id.clone(), ip);
        Ok(())
    }

    pub fn get(&self, id: &Vlnv) -> Option<&IpBlock> {
        self.entries.get(id)
    }

    pub fn contains(&self, id: &Vlnv) -> bool {
        self.entries.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Blocks in canonical VLNV order.
    pub fn iter(&self) -> impl Iterator<Item = &IpBlock> {
        self.entries.values()
    }

    pub fn candidates<'a>(&'a self, r: &'a VlnvRef) -> impl Iterator<Item = &'a IpBlock> + 'a {
        self.entries.values().filter(move |ip| r.matches(&ip.id))
    }

    /// Exact refs bind to that version; `ANY` binds to the highest present.
    pub fn best_match(&self, r: &VlnvRef) -> Option<&IpBlock> {
        let mut found = self.entries.values().filter(|ip| r.matches(&ip.id));
        match r.version {
            VersionReq::Exact(_) => found.next(),
            VersionReq::Any => found.max_by(|a, b| a.id.version.cmp(&b.id.version)),
        }
    }
}

/// A cycle-free graph of bound IP blocks reachable from one root.
#[derive(Debug, Clone)]
pub struct ResolvedGraph {
    root: Vlnv,
    nodes: BTreeMap<Vlnv, IpBlock>,
    edges: BTreeMap<Vlnv, Vec<Vlnv>>,
}

const ROOT_REQUIRER: &str = "the root reference";

type NameKey = (Ident, Ident, Ident);

struct Resolver<'r> {
    reg: &'r Registry,
    nodes: BTreeMap<Vlnv, IpBlock>,
    edges: BTreeMap<Vlnv, Vec<Vlnv>>,
    bound: HashMap<NameKey, (Vlnv, String)>,
    path: Vec<Vlnv>,
}

impl Resolver<'_> {
    fn bind(&mut self, r: &VlnvRef, requirer: &str) -> Result<Vlnv> {
        let ip = self.reg.best_match(r).ok_or_else(|| Error::Unresolved {
            requirer: requirer.to_string(),
            reference: r.to_string(),
        })?;
        let id = ip.id.clone();
        let key = (id.vendor.clone(), id.library.clone(), id.name.clone());
        match self.bound.get(&key) {
            Some((prev, prev_requirer)) if *prev != id => Err(Error::VersionConflict {
                first: prev.to_string(),
                first_requirer: prev_requirer.clone(),
                second: id.to_string(),
                second_requirer: requirer.to_string(),
            }),
            Some(_) => Ok(id),
            None => {
                self.bound.insert(key, (id.clone(), requirer.to_string()));
                Ok(id)
            }
        }
    }

    fn visit(&mut self, id: &Vlnv) -> Result<()> {
        self.path.push(id.clone());
        let ip = self.reg.get(id).expect("bound ids come from the registry");
        let requirer = id.to_string();
        let mut out: Vec<Vlnv> = Vec::new();
        for r in &ip.links {
            let dep = self.bind(r, &requirer)?;
            if let Some(pos) = self.path.iter().position(|p| *p == dep) {
                let mut cycle: Vec<String> = self.path[pos..].iter().map(Vlnv::to_string).collect();
                cycle.push(dep.to_string());
                return Err(Error::Cycle { path: cycle });
            }
            if !out.contains(&dep) {
                out.push(dep.clone());
            }
            if !self.nodes.contains_key(&dep) {
                self.visit(&dep)?;
            }
        }
        self.path.pop();
        self.edges.insert(id.clone(), out);
        self.nodes.insert(id.clone(), ip.clone());
        Ok(())
    }
}

/// Binds every link reachable from `root`.
pub fn resolve(reg: &Registry, root: &VlnvRef) -> Result<ResolvedGraph> {
    let mut resolver = Resolver {
        reg,
        nodes: BTreeMap::new(),
        edges: BTreeMap::new(),
        bound: HashMap::new(),
        path: Vec::new(),
    };
    let root_id = resolver.bind(root, ROOT_REQUIRER)?;
    resolver.visit(&root_id)?;
    Ok(ResolvedGraph {
        root: root_id,
        nodes: resolver.nodes,
        edges: resolver.edges,
    })
}

/// One collected source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceEntry {
    pub ip: Vlnv,
    pub lang: SourceLanguage,
    pub path: PathBuf,
}

/// Merged include directories and defines.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Properties {
    pub include_dirs: Vec<PathBuf>,
    pub defines: IndexMap<String, Option<String>>,
    /// One message per define overridden with a different value.
    pub warnings: Vec<String>,
}

impl ResolvedGraph {
    pub fn root(&self) -> &Vlnv {
        &self.root
    }

    pub fn get(&self, id: &Vlnv) -> Option<&IpBlock> {
        self.nodes.get(id)
    }

    pub fn root_block(&self) -> &IpBlock {
        &self.nodes[&self.root]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &IpBlock> {
        self.nodes.values()
    }

    /// Bound links of `id`, in declaration order.
    pub fn edges(&self, id: &Vlnv) -> &[Vlnv] {
        self.edges.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Post-order DFS from the root visiting links in declaration order,
    /// emitting each block at its first completion.
    pub fn flatten(&self) -> Vec<Vlnv> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut seen: HashSet<&Vlnv> = HashSet::new();
        let mut stack: Vec<(&Vlnv, usize)> = vec![(&self.root, 0)];
        seen.insert(&self.root);
        while let Some((node, next)) = stack.last_mut() {
            let kids = self.edges(node);
            if let Some(kid) = kids.get(*next) {
                *next += 1;
                if seen.insert(kid) {
                    stack.push((kid, 0));
                }
            } else {
                out.push((*node).clone());
                stack.pop();
            }
        }
        out
    }

    /// Source files of `langs` in flatten order; within one block, languages
    /// in [`SourceLanguage`] order, then fileset order.
    pub fn collect_sources(&self, langs: &[SourceLanguage]) -> Result<Vec<SourceEntry>> {
        collect_sources_with(
            &self.flatten(),
            |id, lang| self.nodes[id].fileset(lang),
            langs,
            &BTreeSet::new(),
        )
    }

    pub fn collect_properties(&self, lang: SourceLanguage) -> Properties {
        self.collect_properties_for(&[lang])
    }

    /// Include dirs keep their first (deepest) occurrence; a define from a
    /// more dependent block overrides the same key from its dependencies.
    pub fn collect_properties_for(&self, langs: &[SourceLanguage]) -> Properties {
        let mut props = Properties::default();
        let mut origin: HashMap<String, Vlnv> = HashMap::new();
        for id in self.flatten() {
            let ip = &self.nodes[&id];
            for lang in SourceLanguage::ALL.into_iter().filter(|l| langs.contains(l)) {
                for dir in ip.include_dirs.get(&lang).into_iter().flatten() {
                    if !props.include_dirs.contains(dir) {
                        props.include_dirs.push(dir.clone());
                    }
                }
                for (key, value) in ip.defines.get(&lang).into_iter().flatten() {
                    if let Some(prev) = props.defines.get(key) {
                        if prev != value {
                            props.warnings.push(format!(
                                "define `{key}`: {} ({}) overrides {} ({})",
                                id,
                                render_define(key, value),
                                origin[key],
                                render_define(key, prev),
                            ));
                        }
                    }
                    props.defines.insert(key.clone(), value.clone());
                    origin.insert(key.clone(), id.clone());
                }
            }
        }
        props
    }

    /// Targets attached to every block, in flatten order.
    pub fn collect_targets(&self) -> Result<Vec<Target>> {
        let mut owner: HashMap<&str, &Vlnv> = HashMap::new();
        let mut out = Vec::new();
        let order = self.flatten();
        for id in &order {
            for t in &self.nodes[id].targets {
                if let Some(first) = owner.insert(&t.name, id) {
                    return Err(Error::DupTarget {
                        name: t.name.clone(),
                        first: first.to_string(),
                        second: id.to_string(),
                    });
                }
                out.push(t.clone());
            }
        }
        Ok(out)
    }

    /// Graphviz rendering; nodes in flatten order, edges in declaration order.
    pub fn emit_dot(&self) -> String {
        let order = self.flatten();
        let index: HashMap<&Vlnv, usize> = order.iter().enumerate().map(|(i, v)| (v, i)).collect();
        let mut out = String::from("digraph ip {\n");
        for (i, id) in order.iter().enumerate() {
            let _ = writeln!(out, "  n{i} [label=\"{id}\"];");
        }
        for id in &order {
            for dep in self.edges(id) {
                let _ = writeln!(out, "  n{} -> n{};", index[id], index[dep]);
            }
        }
        out.push_str("}\n");
        out
    }
}

pub fn flatten(g: &ResolvedGraph) -> Vec<Vlnv> {
    g.flatten()
}

pub fn emit_dot(g: &ResolvedGraph) -> String {
    g.emit_dot()
}

/// `KEY` or `KEY=VALUE`.
pub fn render_define(key: &str, value: &Option<String>) -> String {
    match value {
        Some(v) => format!("{key}={v}"),
        None => key.to_string(),
    }
}

/// Shared by the resolved graph and backend fileset overlays. Paths listed in
/// `generated` are produced by planned targets and are not required to exist.
pub(crate) fn collect_sources_with<'a>(
    order: &[Vlnv],
    fileset: impl Fn(&Vlnv, SourceLanguage) -> &'a [PathBuf],
    langs: &[SourceLanguage],
    generated: &BTreeSet<PathBuf>,
) -> Result<Vec<SourceEntry>> {
    let mut out = Vec::new();
    for id in order {
        for lang in SourceLanguage::ALL.into_iter().filter(|l| langs.contains(l)) {
            for path in fileset(id, lang) {
                if !generated.contains(path) && !Path::new(path).is_file() {
                    return Err(Error::MissingFile {
                        ip: id.to_string(),
                        path: path.clone(),
                    });
                }
                out.push(SourceEntry {
                    ip: id.clone(),
                    lang,
                    path: path.clone(),
                });
            }
        }
    }
    Ok(out)
}

// SPDX-License-Identifier: Apache-2.0

//! Remote dependency fetching into a content-addressed cache, and the
//! `socbuild.lock` file that pins what was fetched.
//!
//! Cache layout, one directory per key (a digest of kind, url and pin):
//!
//! ```text
//! <cache>/<key>.lock      advisory lock held while materializing
//! <cache>/<key>/archive   downloaded archive (tarball/zip only)
//! <cache>/<key>/tree/     extracted or checked-out tree
//! <cache>/<key>/complete  marker holding the tree digest
//! ```

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::fs::{self, File};
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::digest::{hash_bytes, hash_content, hash_fields};
use crate::error::{Error, IoContext, Result};
use crate::manifest::{discover_manifests, ManifestDoc};
use crate::vlnv::Vlnv;

pub const LOCKFILE_NAME: &str = "socbuild.lock";
pub const LOCKFILE_VERSION: u32 = 1;
pub const MAX_DEPTH: usize = 32;

/// Where a dependency comes from, with its mandatory pin.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FetchSource {
    Git { url: String, rev: String },
    Tarball { url: String, sha256: String },
    Zip { url: String, sha256: String },
}

impl FetchSource {
    pub fn kind(&self) -> &'static str {
        match self {
            FetchSource::Git { .. } => "git",
            FetchSource::Tarball { .. } => "tarball",
            FetchSource::Zip { .. } => "zip",
        }
    }

    pub fn url(&self) -> &str {
        match self {
            FetchSource::Git { url, .. } | FetchSource::Tarball { url, .. } | FetchSource::Zip { url, .. } => url,
        }
    }

    /// The commit id (git) or archive digest.
    pub fn pin(&self) -> &str {
        match self {
            FetchSource::Git { rev, .. } => rev,
            FetchSource::Tarball { sha256, .. } | FetchSource::Zip { sha256, .. } => sha256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FetchSpec {
    pub source: FetchSource,
    /// Directory inside the fetched tree that holds the IP.
    pub subdir: Option<PathBuf>,
}

impl FetchSpec {
    pub fn git(url: impl Into<String>, rev: impl Into<String>) -> FetchSpec {
        FetchSpec {
            source: FetchSource::Git {
                url: url.into(),
                rev: rev.into(),
            },
            subdir: None,
        }
    }

    pub fn tarball(url: impl Into<String>, sha256: impl Into<String>) -> FetchSpec {
        FetchSpec {
            source: FetchSource::Tarball {
                url: url.into(),
                sha256: sha256.into(),
            },
            subdir: None,
        }
    }

    pub fn zip(url: impl Into<String>, sha256: impl Into<String>) -> FetchSpec {
        FetchSpec {
            source: FetchSource::Zip {
                url: url.into(),
                sha256: sha256.into(),
            },
            subdir: None,
        }
    }

    pub fn with_subdir(mut self, subdir: impl Into<PathBuf>) -> FetchSpec {
        self.subdir = Some(subdir.into());
        self
    }

    /// Cache key. The subdir is not part of it: it selects inside the tree.
    pub fn cache_key(&self) -> String {
        let s = &self.source;
        hash_fields([s.kind().as_bytes(), s.url().as_bytes(), s.pin().as_bytes()])
    }
}

impl fmt::Display for FetchSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.source;
        write!(f, "{} {} @ {}", s.kind(), s.url(), s.pin())?;
        if let Some(sub) = &self.subdir {
            write!(f, " ({})", sub.display())?;
        }
        Ok(())
    }
}

/// A materialized cache entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fetched {
    /// Root of the extracted tree.
    pub tree: PathBuf,
    /// `tree` joined with the spec's subdir.
    pub path: PathBuf,
    /// Digest over the tree's relative paths and file contents.
    pub digest: String,
}

#[derive(Debug, Default)]
pub struct FetchStats {
    network: AtomicUsize,
    subprocess: AtomicUsize,
}

impl FetchStats {
    /// Downloads and clones performed.
    pub fn network_ops(&self) -> usize {
        self.network.load(Ordering::SeqCst)
    }

    /// External processes spawned.
    pub fn subprocess_ops(&self) -> usize {
        self.subprocess.load(Ordering::SeqCst)
    }
}

#[derive(Debug)]
pub struct Fetcher {
    cache_dir: PathBuf,
    offline: bool,
    stats: FetchStats,
}

impl Fetcher {
    pub fn new(cache_dir: impl Into<PathBuf>) -> Fetcher {
        Fetcher {
            cache_dir: cache_dir.into(),
            offline: false,
            stats: FetchStats::default(),
        }
    }

    /// Honors `SOCBUILD_CACHE` and `SOCBUILD_OFFLINE=1`; the cache defaults
    /// to `<workspace>/.socbuild/cache`.
    pub fn from_env(workspace: &Path) -> Fetcher {
        let cache = std::env::var_os("SOCBUILD_CACHE")
            .map(PathBuf::from)
            .unwrap_or_else(|| default_cache_dir(workspace));
        let offline = std::env::var("SOCBUILD_OFFLINE").is_ok_and(|v| v == "1");
        Fetcher::new(cache).offline(offline)
    }

    pub fn offline(mut self, offline: bool) -> Fetcher {
        self.offline = offline;
        self
    }

    pub fn cache_dir(&self) -> &Path {
        &self.cache_dir
    }

    pub fn stats(&self) -> &FetchStats {
        &self.stats
    }

    /// Returns the local tree for `spec`, fetching it on a cache miss.
    pub fn fetch_source(&self, spec: &FetchSpec) -> Result<Fetched> {
        fs::create_dir_all(&self.cache_dir).at(&self.cache_dir)?;
        let key = spec.cache_key();
        let lock_path = self.cache_dir.join(format!("{key}.lock"));
        let lock = File::create(&lock_path).at(&lock_path)?;
        lock.lock().at(&lock_path)?;

        let entry = self.cache_dir.join(&key);
        let tree = entry.join("tree");
        let marker = entry.join("complete");

        let digest = match self.cached_digest(&tree, &marker)? {
            Some(d) => d,
            None => {
                fs::create_dir_all(&entry).at(&entry)?;
                self.materialize(spec, &entry, &tree)?;
                let digest = tree_digest(&tree)?;
                write_atomic(&marker, digest.as_bytes())?;
                digest
            }
        };
        drop(lock);

        let path = match &spec.subdir {
            Some(sub) => {
                let p = tree.join(sub);
                if !p.is_dir() {
                    return Err(Error::BadPath {
                        path: sub.display().to_string(),
                        reason: format!("not a directory inside {}", spec.source.url()),
                    });
                }
                p
            }
            None => tree.clone(),
        };
        Ok(Fetched { tree, path, digest })
    }

    /// The recorded digest if the entry is complete and still matches it.
    /// A stale or modified entry is discarded.
    fn cached_digest(&self, tree: &Path, marker: &Path) -> Result<Option<String>> {
        let Ok(recorded) = fs::read_to_string(marker) else {
            return Ok(None);
        };
        if tree.is_dir() && tree_digest(tree)? == recorded.trim() {
            return Ok(Some(recorded.trim().to_string()));
        }
        fs::remove_file(marker).at(marker)?;
        Ok(None)
    }

    fn materialize(&self, spec: &FetchSpec, entry: &Path, tree: &Path) -> Result<()> {
        if tree.exists() {
            fs::remove_dir_all(tree).at(tree)?;
        }
        let staging = entry.join("tree.tmp");
        if staging.exists() {
            fs::remove_dir_all(&staging).at(&staging)?;
        }
        match &spec.source {
            FetchSource::Git { url, rev } => self.checkout(url, rev, &staging)?,
            FetchSource::Tarball { url, sha256 } | FetchSource::Zip { url, sha256 } => {
                let archive = entry.join("archive");
                self.obtain_archive(url, sha256, &archive)?;
                let is_zip = matches!(spec.source, FetchSource::Zip { .. });
                extract(&archive, is_zip, &staging).map_err(|message| {
                    let _ = fs::remove_dir_all(&staging);
                    Error::Extract {
                        what: url.clone(),
                        message,
                    }
                })?;
            }
        }
        let root = single_top_dir(&staging)?.unwrap_or_else(|| staging.clone());
        fs::rename(&root, tree).at(tree)?;
        if staging.exists() {
            fs::remove_dir_all(&staging).at(&staging)?;
        }
        Ok(())
    }

    /// Leaves a verified archive at `dest`. A cached archive is re-verified
    /// and removed if it no longer matches.
    fn obtain_archive(&self, url: &str, sha256: &str, dest: &Path) -> Result<()> {
        if dest.exists() {
            let actual = hash_content(dest)?;
            if actual != sha256 {
                fs::remove_file(dest).at(dest)?;
                return Err(Error::Checksum {
                    what: url.to_string(),
                    expected: sha256.to_string(),
                    actual,
                });
            }
            return Ok(());
        }
        let tmp = dest.with_extension("part");
        self.download(url, &tmp)?;
        let actual = hash_content(&tmp)?;
        if actual != sha256 {
            fs::remove_file(&tmp).at(&tmp)?;
            return Err(Error::Checksum {
                what: url.to_string(),
                expected: sha256.to_string(),
                actual,
            });
        }
        fs::rename(&tmp, dest).at(dest)
    }

    fn forbid_offline(&self, url: &str) -> Result<()> {
        if self.offline {
            return Err(Error::Net {
                url: url.to_string(),
                message: "cache miss while SOCBUILD_OFFLINE=1".into(),
            });
        }
        Ok(())
    }

    fn download(&self, url: &str, dest: &Path) -> Result<()> {
        self.forbid_offline(url)?;
        self.stats.network.fetch_add(1, Ordering::SeqCst);
        let net = |message: String| Error::Net {
            url: url.to_string(),
            message,
        };
        if url.starts_with("http://") || url.starts_with("https://") {
            let resp = ureq::get(url).call().map_err(|e| net(e.to_string()))?;
            let mut out = File::create(dest).at(dest)?;
            io::copy(&mut resp.into_reader(), &mut out).map_err(|e| net(e.to_string()))?;
        } else {
            let src = url.strip_prefix("file://").unwrap_or(url);
            fs::copy(src, dest).map_err(|e| net(format!("{src}: {e}")))?;
        }
        Ok(())
    }

    fn git(&self, args: &[&str], cwd: Option<&Path>) -> io::Result<std::process::Output> {
        self.stats.subprocess.fetch_add(1, Ordering::SeqCst);
        let mut cmd = Command::new("git");
        cmd.args(args).env("GIT_TERMINAL_PROMPT", "0");
        if let Some(dir) = cwd {
            cmd.current_dir(dir);
        }
        cmd.output()
    }

    fn checkout(&self, url: &str, rev: &str, dest: &Path) -> Result<()> {
        self.forbid_offline(url)?;
        self.stats.network.fetch_add(1, Ordering::SeqCst);
        let dest_str = dest.to_string_lossy();
        let out = self
            .git(&["clone", "--quiet", "--no-checkout", url, &dest_str], None)
            .map_err(|e| Error::Net {
                url: url.to_string(),
                message: format!("cannot run git: {e}"),
            })?;
        if !out.status.success() {
            return Err(Error::Net {
                url: url.to_string(),
                message: String::from_utf8_lossy(&out.stderr).trim().to_string(),
            });
        }
        let rev_err = |message: String| {
            let _ = fs::remove_dir_all(dest);
            Error::Rev {
                url: url.to_string(),
                rev: rev.to_string(),
                message,
            }
        };
        let out = self
            .git(
                &[
                    "-c",
                    "advice.detachedHead=false",
                    "checkout",
                    "--quiet",
                    "--detach",
                    rev,
                ],
                Some(dest),
            )
            .map_err(|e| rev_err(e.to_string()))?;
        if !out.status.success() {
            return Err(rev_err(String::from_utf8_lossy(&out.stderr).trim().to_string()));
        }
        let out = self
            .git(&["rev-parse", "HEAD"], Some(dest))
            .map_err(|e| rev_err(e.to_string()))?;
        let head = String::from_utf8_lossy(&out.stdout).trim().to_ascii_lowercase();
        if head != rev {
            return Err(rev_err(format!("checked out {head}")));
        }
        let git_dir = dest.join(".git");
        fs::remove_dir_all(&git_dir).at(&git_dir)
    }
}

pub fn default_cache_dir(workspace: &Path) -> PathBuf {
    workspace.join(".socbuild").join("cache")
}

fn extract(archive: &Path, is_zip: bool, dest: &Path) -> std::result::Result<(), String> {
    fs::create_dir_all(dest).map_err(|e| e.to_string())?;
    let file = File::open(archive).map_err(|e| e.to_string())?;
    if is_zip {
        let mut zip = zip::ZipArchive::new(file).map_err(|e| e.to_string())?;
        zip.extract(dest).map_err(|e| e.to_string())
    } else {
        let mut magic = [0u8; 2];
        let gz = File::open(archive).and_then(|mut f| f.read_exact(&mut magic)).is_ok() && magic == [0x1f, 0x8b];
        let reader: Box<dyn Read> = if gz {
            Box::new(flate2::read::GzDecoder::new(file))
        } else {
            Box::new(file)
        };
        tar::Archive::new(reader).unpack(dest).map_err(|e| e.to_string())
    }
}

/// Archives that wrap everything in one top-level directory are unwrapped.
fn single_top_dir(dir: &Path) -> Result<Option<PathBuf>> {
    let mut entries = fs::read_dir(dir).at(dir)?;
    match (entries.next(), entries.next()) {
        (Some(Ok(only)), None) if only.file_type().at(only.path())?.is_dir() => Ok(Some(only.path())),
        _ => Ok(None),
    }
}

/// Digest over relative paths and contents of every file under `root`, in
/// sorted path order. Symlinks contribute their target text.
pub fn tree_digest(root: &Path) -> Result<String> {
    let mut lines: Vec<u8> = Vec::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::io(root, e.into()))?;
        let rel = entry.path().strip_prefix(root).expect("walk stays below root");
        let rel = rel.to_string_lossy().replace('\\', "/");
        let ft = entry.file_type();
        if ft.is_symlink() {
            let target = fs::read_link(entry.path()).at(entry.path())?;
            lines.extend(format!("L {rel}\0{}\n", target.display()).as_bytes());
        } else if ft.is_file() {
            lines.extend(format!("F {rel}\0{}\n", hash_content(entry.path())?).as_bytes());
        }
    }
    Ok(hash_bytes(&lines))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).at(dir)?;
    io::Write::write_all(&mut tmp, bytes).at(path)?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// One pinned dependency.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LockEntry {
    pub digest: String,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rev: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subdir: Option<String>,
    pub url: String,
}

impl LockEntry {
    pub fn new(spec: &FetchSpec, digest: String) -> LockEntry {
        let (rev, sha256) = match &spec.source {
            FetchSource::Git { rev, .. } => (Some(rev.clone()), None),
            FetchSource::Tarball { sha256, .. } | FetchSource::Zip { sha256, .. } => (None, Some(sha256.clone())),
        };
        LockEntry {
            digest,
            kind: spec.source.kind().to_string(),
            rev,
            sha256,
            subdir: spec.subdir.as_ref().map(|s| s.to_string_lossy().into_owned()),
            url: spec.source.url().to_string(),
        }
    }

    pub fn spec(&self) -> Option<FetchSpec> {
        let url = self.url.clone();
        let source = match (self.kind.as_str(), &self.rev, &self.sha256) {
            ("git", Some(rev), None) => FetchSource::Git { url, rev: rev.clone() },
            ("tarball", None, Some(sha)) => FetchSource::Tarball {
                url,
                sha256: sha.clone(),
            },
            ("zip", None, Some(sha)) => FetchSource::Zip {
                url,
                sha256: sha.clone(),
            },
            _ => return None,
        };
        Some(FetchSpec {
            source,
            subdir: self.subdir.as_ref().map(PathBuf::from),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lockfile {
    pub entries: BTreeMap<String, LockEntry>,
    pub version: u32,
}

impl Lockfile {
    pub fn new() -> Lockfile {
        Lockfile {
            entries: BTreeMap::new(),
            version: LOCKFILE_VERSION,
        }
    }

    pub fn parse(path: &Path, text: &str) -> Result<Lockfile> {
        let lock: Lockfile = serde_json::from_str(text).map_err(|e| Error::Schema {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if lock.version != LOCKFILE_VERSION {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                message: format!("unsupported lockfile version {}", lock.version),
            });
        }
        for (key, entry) in &lock.entries {
            if entry.spec().is_none() {
                return Err(Error::Schema {
                    path: path.to_path_buf(),
                    message: format!("entry `{key}` has an inconsistent kind/rev/sha256"),
                });
            }
        }
        Ok(lock)
    }

    pub fn read(path: &Path) -> Result<Option<Lockfile>> {
        match fs::read_to_string(path) {
            Ok(text) => Lockfile::parse(path, &text).map(Some),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    /// Pretty JSON with sorted keys and a trailing newline.
    pub fn to_json(&self) -> String {
        // Going through `Value` sorts every object's keys.
        let value = serde_json::to_value(self).expect("lockfile is always serializable");
        let mut text = serde_json::to_string_pretty(&value).expect("value is always serializable");
        text.push('\n');
        text
    }

    /// Writes only when the bytes would change. Returns whether it wrote.
    pub fn write(&self, path: &Path) -> Result<bool> {
        let text = self.to_json();
        if fs::read(path).is_ok_and(|old| old == text.as_bytes()) {
            return Ok(false);
        }
        write_atomic(path, text.as_bytes())?;
        Ok(true)
    }
}

#[derive(Debug)]
pub struct SyncOutcome {
    /// Manifests found in fetched trees, in fetch order.
    pub manifests: Vec<ManifestDoc>,
    pub lockfile: Lockfile,
}

/// Fetches every dependency declared by `roots`, transitively. Lockfile pins
/// win; a manifest that disagrees with its pin is an error unless `update`.
pub fn sync(fetcher: &Fetcher, roots: &[ManifestDoc], lock: Option<&Lockfile>, update: bool) -> Result<SyncOutcome> {
    struct Pending {
        requirer: Vlnv,
        id: Vlnv,
        spec: FetchSpec,
        depth: usize,
    }

    let mut queue: VecDeque<Pending> = VecDeque::new();
    for doc in roots {
        for (id, spec) in &doc.dependencies {
            queue.push_back(Pending {
                requirer: doc.id().clone(),
                id: id.clone(),
                spec: spec.clone(),
                depth: 1,
            });
        }
    }

    let mut done: BTreeMap<Vlnv, (FetchSpec, Vlnv)> = BTreeMap::new();
    let mut manifests = Vec::new();
    let mut out = Lockfile::new();

    while let Some(p) = queue.pop_front() {
        let ctx = format!("{} requires {}", p.requirer, p.id);
        if p.depth > MAX_DEPTH {
            return Err(Error::Fetch(format!("{ctx}: dependency depth exceeds {MAX_DEPTH}")));
        }
        if let Some((spec, first)) = done.get(&p.id) {
            if *spec != p.spec {
                return Err(Error::Fetch(format!(
                    "{}: {first} pins {spec} but {} pins {}",
                    p.id, p.requirer, p.spec
                )));
            }
            continue;
        }

        let key = p.id.to_string();
        let locked = lock.and_then(|l| l.entries.get(&key));
        if let Some(entry) = locked {
            if !update && entry.spec().as_ref() != Some(&p.spec) {
                let locked_desc = entry.spec().map(|s| s.to_string()).unwrap_or_default();
                return Err(Error::LockDiverged {
                    dependency: key,
                    manifest: p.spec.to_string(),
                    locked: locked_desc,
                });
            }
        }

        let fetched = fetcher.fetch_source(&p.spec).map_err(|e| e.context(&ctx))?;
        if let Some(entry) = locked.filter(|_| !update) {
            if entry.digest != fetched.digest {
                return Err(Error::Checksum {
                    what: format!("{key} tree"),
                    expected: entry.digest.clone(),
                    actual: fetched.digest,
                });
            }
        }

        let docs = discover_manifests(&fetched.path, &[]).map_err(|e| e.context(&ctx))?;
        if !docs.iter().any(|d| *d.id() == p.id) {
            return Err(Error::Fetch(format!(
                "{ctx}: no manifest in {} declares {}",
                p.spec, p.id
            )));
        }
        for doc in &docs {
            for (id, spec) in &doc.dependencies {
                queue.push_back(Pending {
                    requirer: doc.id().clone(),
                    id: id.clone(),
                    spec: spec.clone(),
                    depth: p.depth + 1,
                });
            }
        }
        manifests.extend(docs);
        out.entries.insert(key, LockEntry::new(&p.spec, fetched.digest));
        done.insert(p.id, (p.spec, p.requirer));
    }

    Ok(SyncOutcome {
        manifests,
        lockfile: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tarball(dir: &Path, files: &[(&str, &[u8])]) -> (PathBuf, String) {
        let path = dir.join("pkg.tar.gz");
        let gz = flate2::write::GzEncoder::new(File::create(&path).unwrap(), flate2::Compression::default());
        let mut builder = tar::Builder::new(gz);
        for (name, data) in files {
            let mut header = tar::Header::new_gnu();
            header.set_size(data.len() as u64);
            header.set_mode(0o644);
            header.set_cksum();
            builder.append_data(&mut header, name, *data).unwrap();
        }
        builder.into_inner().unwrap().finish().unwrap();
        let sha = hash_content(&path).unwrap();
        (path, sha)
    }

    fn zipfile(dir: &Path, files: &[(&str, &[u8])]) -> (PathBuf, String) {
        use std::io::Write;
        let path = dir.join("pkg.zip");
        let mut w = zip::ZipWriter::new(File::create(&path).unwrap());
        for (name, data) in files {
            w.start_file(*name, zip::write::SimpleFileOptions::default()).unwrap();
            w.write_all(data).unwrap();
        }
        w.finish().unwrap();
        let sha = hash_content(&path).unwrap();
        (path, sha)
    }

    #[test]
    fn cache_keys_differ_per_field() {
        let sha = "a".repeat(64);
        let a = FetchSpec::tarball("u", &sha);
        assert_ne!(a.cache_key(), FetchSpec::zip("u", &sha).cache_key());
        assert_ne!(a.cache_key(), FetchSpec::tarball("v", &sha).cache_key());
        assert_ne!(a.cache_key(), FetchSpec::tarball("u", "b".repeat(64)).cache_key());
        assert_eq!(
            a.cache_key(),
            FetchSpec::tarball("u", &sha).with_subdir("x").cache_key()
        );
    }

    #[test]
    fn tarball_fetch_is_cached() {
        let src = tempfile::tempdir().unwrap();
        let cache = tempfile::tempdir().unwrap();
        let (path, sha) = tarball(src.path(), &[("pkg/ip.json", b"{}"), ("pkg/rtl/a.v", b"module a;")]);
        let fetcher = Fetcher::new(cache.path());
        let spec = FetchSpec::tarball(path.to_string_lossy(), &sha);

        let first = fetcher.fetch_source(&spec).unwrap();
        assert_eq!(fetcher.stats().network_ops(), 1);
        assert!(first.path.join("rtl/a.v").is_file(), "single top dir is unwrapped");

        let second = fetcher.fetch_source(&spec).unwrap();
        assert_eq!(second, first);
        assert_eq!(fetcher.stats().network_ops(), 1);
    }

    #[test]
    fn checksum_mismatch_extracts_nothing() {
        let src = tempfile::tempdir().unwrap();
        let cache = tempfile::tempdir().unwrap();
        let (path, _) = tarball(src.path(), &[("a.v", b"x")]);
        let fetcher = Fetcher::new(cache.path());
        let spec = FetchSpec::tarball(format!("file://{}", path.display()), "0".repeat(64));
        let err = fetcher.fetch_source(&spec).unwrap_err();
        assert_eq!(err.code(), "E_CHECKSUM");
        assert!(!cache.path().join(spec.cache_key()).join("tree").exists());
    }

    #[test]
    fn zip_with_subdir() {
        let src = tempfile::tempdir().unwrap();
        let cache = tempfile::tempdir().unwrap();
        let (path, sha) = zipfile(src.path(), &[("hw/ip/ip.json", b"{}"), ("README", b"r")]);
        let fetcher = Fetcher::new(cache.path());
        let spec = FetchSpec::zip(path.to_string_lossy(), sha).with_subdir("hw/ip");
        let got = fetcher.fetch_source(&spec).unwrap();
        assert_eq!(got.path, got.tree.join("hw/ip"));
        assert!(got.path.join("ip.json").is_file());

        let missing = FetchSpec {
            subdir: Some("nope".into()),
            ..spec
        };
        assert_eq!(fetcher.fetch_source(&missing).unwrap_err().code(), "E_BAD_PATH");
    }

    #[test]
    fn corrupt_archive_fails_extraction() {
        let src = tempfile::tempdir().unwrap();
        let cache = tempfile::tempdir().unwrap();
        let path = src.path().join("bad.zip");
        fs::write(&path, b"definitely not a zip").unwrap();
        let sha = hash_content(&path).unwrap();
        let fetcher = Fetcher::new(cache.path());
        let err = fetcher
            .fetch_source(&FetchSpec::zip(path.to_string_lossy(), sha))
            .unwrap_err();
        assert_eq!(err.code(), "E_EXTRACT");
    }

    #[test]
    fn offline_miss_is_net_error() {
        let cache = tempfile::tempdir().unwrap();
        let fetcher = Fetcher::new(cache.path()).offline(true);
        let err = fetcher
            .fetch_source(&FetchSpec::tarball("https://example.invalid/x.tgz", "0".repeat(64)))
            .unwrap_err();
        assert_eq!(err.code(), "E_NET");
        assert_eq!(fetcher.stats().network_ops(), 0);
    }

    #[test]
    fn modified_tree_is_refetched_from_cached_archive() {
        let src = tempfile::tempdir().unwrap();
        let cache = tempfile::tempdir().unwrap();
        let (path, sha) = tarball(src.path(), &[("a.v", b"x"), ("b.v", b"y")]);
        let fetcher = Fetcher::new(cache.path());
        let spec = FetchSpec::tarball(path.to_string_lossy(), sha);
        let first = fetcher.fetch_source(&spec).unwrap();
        fs::write(first.tree.join("a.v"), b"edited").unwrap();
        let again = fetcher.fetch_source(&spec).unwrap();
        assert_eq!(again.digest, first.digest);
        assert_eq!(fs::read(again.tree.join("a.v")).unwrap(), b"x");
        assert_eq!(fetcher.stats().network_ops(), 1);
    }

    #[test]
    fn lockfile_json_is_sorted_and_stable() {
        let mut lock = Lockfile::new();
        lock.entries.insert(
            "z::z::z::1.0.0".into(),
            LockEntry::new(&FetchSpec::git("u", "ab".repeat(20)), "d1".into()),
        );
        lock.entries.insert(
            "a::a::a::1.0.0".into(),
            LockEntry::new(&FetchSpec::zip("v", "cd".repeat(32)).with_subdir("hw"), "d2".into()),
        );
        let text = lock.to_json();
        assert!(text.ends_with("}\n"));
        assert!(text.find("a::a::a").unwrap() < text.find("z::z::z").unwrap());
        assert!(text.find("\"entries\"").unwrap() < text.find("\"version\"").unwrap());
        let back = Lockfile::parse(Path::new("socbuild.lock"), &text).unwrap();
        assert_eq!(back, lock);
        assert_eq!(back.to_json(), text);
    }
}

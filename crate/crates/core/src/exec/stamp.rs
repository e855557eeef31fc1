// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::digest::{hash_content, hash_fields};
use crate::error::{Error, IoContext, Result};
use crate::target::Target;

/// What a target looked like after its last successful run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StampRecord {
    pub command: String,
    pub inputs: BTreeMap<PathBuf, String>,
    pub outputs: BTreeMap<PathBuf, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StampDb {
    pub records: BTreeMap<String, StampRecord>,
}

impl StampDb {
    /// A missing or unreadable database is empty: everything is dirty.
    pub fn load(path: &Path) -> StampDb {
        std::fs::read(path)
            .ok()
            .and_then(|bytes| serde_json::from_slice(&bytes).ok())
            .unwrap_or_default()
    }

    /// Write-temp-then-rename.
    pub fn save(&self, path: &Path) -> Result<()> {
        let dir = path.parent().unwrap_or(Path::new("."));
        std::fs::create_dir_all(dir).at(dir)?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir).at(dir)?;
        serde_json::to_writer(&mut tmp, self).map_err(|e| Error::io(path, e.into()))?;
        tmp.write_all(b"\n").at(path)?;
        tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
        Ok(())
    }
}

/// Digest over argv, working directory and env additions.
pub fn command_digest(t: &Target, default_dir: &Path) -> String {
    let wd = t.working_dir.as_deref().unwrap_or(default_dir);
    let wd = wd.to_string_lossy();
    let mut fields: Vec<&[u8]> = vec![b"argv"];
    fields.extend(t.command.iter().map(|a| a.as_bytes()));
    fields.push(b"cwd");
    fields.push(wd.as_bytes());
    fields.push(b"env");
    for (k, v) in &t.env {
        fields.push(k.as_bytes());
        fields.push(v.as_bytes());
    }
    hash_fields(fields)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Freshness {
    Clean,
    /// Names the first trigger found.
    Dirty(String),
}

impl Freshness {
    pub fn is_dirty(&self) -> bool {
        matches!(self, Freshness::Dirty(_))
    }
}

pub fn is_dirty(t: &Target, db: &StampDb, default_dir: &Path) -> Freshness {
    let Some(rec) = db.records.get(&t.name) else {
        return Freshness::Dirty("no record".into());
    };
    if rec.command != command_digest(t, default_dir) {
        return Freshness::Dirty("command changed".into());
    }
    for input in &t.inputs {
        match (hash_content(input), rec.inputs.get(input)) {
            (Err(_), _) => return Freshness::Dirty(format!("input {} missing", input.display())),
            (Ok(now), Some(then)) if now == *then => {}
            _ => return Freshness::Dirty(format!("input {} changed", input.display())),
        }
    }
    for output in &t.outputs {
        match (hash_content(output), rec.outputs.get(output)) {
            (Err(_), _) => return Freshness::Dirty(format!("output {} missing", output.display())),
            (Ok(now), Some(then)) if now == *then => {}
            _ => return Freshness::Dirty(format!("output {} changed", output.display())),
        }
    }
    Freshness::Clean
}

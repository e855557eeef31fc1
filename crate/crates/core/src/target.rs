// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// One build step: a command with declared inputs and outputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Target {
    pub name: String,
    pub command: Vec<String>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub deps: Vec<String>,
    /// Defaults to the build directory when unset.
    pub working_dir: Option<PathBuf>,
    /// Added on top of the scrubbed base environment.
    pub env: BTreeMap<String, String>,
}

impl Target {
    pub fn new<S: Into<String>>(name: impl Into<String>, command: impl IntoIterator<Item = S>) -> Target {
        Target {
            name: name.into(),
            command: command.into_iter().map(Into::into).collect(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            deps: Vec::new(),
            working_dir: None,
            env: BTreeMap::new(),
        }
    }

    pub fn inputs<P: Into<PathBuf>>(mut self, inputs: impl IntoIterator<Item = P>) -> Target {
        self.inputs.extend(inputs.into_iter().map(Into::into));
        self
    }

    pub fn outputs<P: Into<PathBuf>>(mut self, outputs: impl IntoIterator<Item = P>) -> Target {
        self.outputs.extend(outputs.into_iter().map(Into::into));
        self
    }

    pub fn deps<S: Into<String>>(mut self, deps: impl IntoIterator<Item = S>) -> Target {
        self.deps.extend(deps.into_iter().map(Into::into));
        self
    }

    pub fn working_dir(mut self, dir: impl Into<PathBuf>) -> Target {
        self.working_dir = Some(dir.into());
        self
    }

    pub fn env(mut self, key: impl Into<String>, value: impl Into<String>) -> Target {
        self.env.insert(key.into(), value.into());
        self
    }

    /// Replaces `{build_dir}` in every string-valued field.
    pub fn expand_build_dir(&self, build_dir: &Path) -> Target {
        let bd = build_dir.display().to_string();
        let s = |x: &str| x.replace("{build_dir}", &bd);
        let p = |x: &PathBuf| PathBuf::from(s(&x.to_string_lossy()));
        Target {
            name: self.name.clone(),
            command: self.command.iter().map(|c| s(c)).collect(),
            inputs: self.inputs.iter().map(p).collect(),
            outputs: self.outputs.iter().map(p).collect(),
            deps: self.deps.clone(),
            working_dir: self.working_dir.as_ref().map(p),
            env: self.env.iter().map(|(k, v)| (k.clone(), s(v))).collect(),
        }
    }
}

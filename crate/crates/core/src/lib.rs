// SPDX-License-Identifier: Apache-2.0

//! Core of the `socbuild` flow: VLNV-named IP blocks with per-language
//! filesets, dependency resolution and flattening, tool backends that turn a
//! resolved design into build targets, an incremental parallel executor,
//! dependency fetching with a lockfile, and a test driver.

pub mod backend;
pub mod digest;
pub mod error;
pub mod exec;
pub mod fetch;
pub mod graph;
pub mod ip;
pub mod manifest;
pub mod target;
pub mod testdrv;
pub mod vlnv;

pub use error::{Error, Result};
pub use graph::{resolve, Properties, Registry, ResolvedGraph, SourceEntry};
pub use ip::{IpBlock, SourceLanguage};
pub use target::Target;
pub use vlnv::{Version, VersionReq, Vlnv, VlnvRef};

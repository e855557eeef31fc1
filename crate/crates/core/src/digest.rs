// SPDX-License-Identifier: Apache-2.0

//! SHA-256 helpers. All digests are lowercase hex.

use std::fs::File;
use std::io::{self, Read};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{IoContext, Result};

pub fn hash_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest of a file's bytes; metadata is ignored.
pub fn hash_content(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    hash_reader(File::open(path).at(path)?).at(path)
}

pub fn hash_reader(mut r: impl Read) -> io::Result<String> {
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = r.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Digest of a sequence of fields, length-prefixed so that field boundaries
/// cannot be shifted between fields.
pub fn hash_fields<'a>(fields: impl IntoIterator<Item = &'a [u8]>) -> String {
    let mut hasher = Sha256::new();
    for f in fields {
        hasher.update((f.len() as u64).to_le_bytes());
        hasher.update(f);
    }
    hex::encode(hasher.finalize())
}

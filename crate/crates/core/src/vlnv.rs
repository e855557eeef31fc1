// SPDX-License-Identifier: Apache-2.0

//! Vendor::Library::Name::Version identities.
//!
//! A [`Vlnv`] names exactly one IP block. A [`VlnvRef`] is what link edges
//! carry: the same three name components plus either an exact version or
//! [`VersionReq::Any`].

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const DELIMITER: &str = "::";

/// One name component: `[A-Za-z_][A-Za-z0-9_-]*`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ident(String);

impl Ident {
    pub fn new(s: impl Into<String>) -> Option<Ident> {
        let s = s.into();
        is_ident(&s).then_some(Ident(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Identifier grammar shared by VLNV components, target names and test names.
pub fn is_ident(s: &str) -> bool {
    let mut bytes = s.bytes();
    match bytes.next() {
        Some(b) if b.is_ascii_alphabetic() || b == b'_' => {}
        _ => return false,
    }
    bytes.all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

/// `MAJOR.MINOR.PATCH`, ordered numerically component by component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Version {
    pub major: u64,
    pub minor: u64,
    pub patch: u64,
}

impl Version {
    pub const fn new(major: u64, minor: u64, patch: u64) -> Version {
        Version { major, minor, patch }
    }
}

/// Total order on versions; identical to `a.cmp(b)`.
pub fn version_cmp(a: &Version, b: &Version) -> Ordering {
    a.cmp(b)
}

impl FromStr for Version {
    type Err = Error;

    fn from_str(text: &str) -> Result<Version> {
        let bad = || Error::BadVersion { text: text.to_string() };
        let mut parts = text.split('.');
        let mut next = || -> Result<u64> {
            let part = parts.next().ok_or_else(bad)?;
            // Strict semver numerals: digits only, no leading zero unless the value is 0.
            if part.is_empty() || !part.bytes().all(|b| b.is_ascii_digit()) || (part.len() > 1 && part.starts_with('0'))
            {
                return Err(bad());
            }
            part.parse().map_err(|_| bad())
        };
        let version = Version::new(next()?, next()?, next()?);
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(version)
    }
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.major, self.minor, self.patch)
    }
}

/// Fully-qualified IP identity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Vlnv {
    pub vendor: Ident,
    pub library: Ident,
    pub name: Ident,
    pub version: Version,
}

impl Vlnv {
    pub fn parse(text: &str) -> Result<Vlnv> {
        let parts: Vec<&str> = text.split(DELIMITER).collect();
        if parts.len() != 4 {
            return Err(Error::Arity {
                text: text.to_string(),
                expected: "4",
                found: parts.len(),
            });
        }
        let (vendor, library, name) = parse_names(text, &parts)?;
        let version = parts[3]
            .parse()
            .map_err(|_| Error::BadVersion { text: text.to_string() })?;
        Ok(Vlnv {
            vendor,
            library,
            name,
            version,
        })
    }

    /// `vendor::library::name` without the version.
    pub fn vln(&self) -> (&Ident, &Ident, &Ident) {
        (&self.vendor, &self.library, &self.name)
    }

    /// A reference that matches exactly this block.
    pub fn to_ref(&self) -> VlnvRef {
        VlnvRef {
            vendor: self.vendor.clone(),
            library: self.library.clone(),
            name: self.name.clone(),
            version: VersionReq::Exact(self.version),
        }
    }

    /// `vendor_library_name`, usable as a file or directory name.
    pub fn flat_name(&self) -> String {
        format!("{}_{}_{}", self.vendor, self.library, self.name)
    }
}

pub fn parse_vlnv(text: &str) -> Result<Vlnv> {
    Vlnv::parse(text)
}

pub fn format_vlnv(v: &Vlnv) -> String {
    v.to_string()
}

impl fmt::Display for Vlnv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}::{}::{}::{}", self.vendor, self.library, self.name, self.version)
    }
}

impl FromStr for Vlnv {
    type Err = Error;
    fn from_str(s: &str) -> Result<Vlnv> {
        Vlnv::parse(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VersionReq {
    Any,
    Exact(Version),
}

/// A link target: exact, or any version of `vendor::library::name`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VlnvRef {
    pub vendor: Ident,
    pub library: Ident,
    pub name: Ident,
    pub version: VersionReq,
}

impl VlnvRef {
    pub fn parse(text: &str) -> Result<VlnvRef> {
        let parts: Vec<&str> = text.split(DELIMITER).collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(Error::Arity {
                text: text.to_string(),
                expected: "3 or 4",
                found: parts.len(),
            });
        }
        let (vendor, library, name) = parse_names(text, &parts)?;
        let version = match parts.get(3) {
            None => VersionReq::Any,
            Some(v) => VersionReq::Exact(v.parse().map_err(|_| Error::BadVersion { text: text.to_string() })?),
        };
        Ok(VlnvRef {
            vendor,
            library,
            name,
            version,
        })
    }

    pub fn matches(&self, v: &Vlnv) -> bool {
        self.vendor == v.vendor
            && self.library == v.library
            && self.name == v.name
            && match self.version {
                VersionReq::Any => true,
                VersionReq::Exact(want) => want == v.version,
            }
    }
}

pub fn parse_vlnv_ref(text: &str) -> Result<VlnvRef> {
    VlnvRef::parse(text)
}

pub fn matches_ref(r: &VlnvRef, v: &Vlnv) -> bool {
    r.matches(v)
}

impl fmt::Display for VlnvRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}::{}::{}", self.vendor, self.library, self.name)?;
        if let VersionReq::Exact(v) = self.version {
            write!(f, "::{v}")?;
        }
        Ok(())
    }
}

impl FromStr for VlnvRef {
    type Err = Error;
    fn from_str(s: &str) -> Result<VlnvRef> {
        VlnvRef::parse(s)
    }
}

fn parse_names(text: &str, parts: &[&str]) -> Result<(Ident, Ident, Ident)> {
    let ident = |s: &str| {
        Ident::new(s).ok_or_else(|| Error::BadIdent {
            text: text.to_string(),
            ident: s.to_string(),
        })
    };
    Ok((ident(parts[0])?, ident(parts[1])?, ident(parts[2])?))
}

macro_rules! string_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let text = String::deserialize(d)?;
                text.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

string_serde!(Vlnv);
string_serde!(VlnvRef);

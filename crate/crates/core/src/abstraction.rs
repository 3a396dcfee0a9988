//! Abstraction of raw method signatures to package or family states.
//!
//! The mapping is driven by a catalog of recognized API package prefixes,
//! each tagged with its owning family. Matching is longest-prefix and
//! segment-aligned over the dotted package-plus-class path, so
//! `java.language.Evil` never matches the `java.lang` entry, while the
//! `android.R` / `android.Manifest` split entries can extend one segment
//! into the class name. Signatures with no cataloged prefix become
//! `self-defined`, or `obfuscated` when their identifiers look mangled.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::callgraph::MethodRef;

pub const SELF_DEFINED: &str = "self-defined";
pub const OBFUSCATED: &str = "obfuscated";

/// Abstraction granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Family,
    Package,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Family => write!(f, "family"),
            Mode::Package => write!(f, "package"),
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "family" => Ok(Mode::Family),
            "package" => Ok(Mode::Package),
            other => Err(format!("unknown mode {other:?} (expected family or package)")),
        }
    }
}

/// An element of the active state space: a catalog prefix (package mode),
/// a family name (family mode), or one of the two special states.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AbstractState(pub String);

impl AbstractState {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn self_defined() -> Self {
        AbstractState(SELF_DEFINED.to_string())
    }

    pub fn obfuscated() -> Self {
        AbstractState(OBFUSCATED.to_string())
    }
}

impl fmt::Display for AbstractState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone)]
struct CatalogEntry {
    prefix: String,
    family: String,
}

#[derive(Debug, Clone)]
struct FamilyEntry {
    name: String,
    active: bool,
}

/// The recognized-API catalog: ordered package prefixes with family tags,
/// the ordered family list with active flags, and the obfuscation
/// thresholds. Order in the file defines the feature-vector layout.
#[derive(Debug, Clone)]
pub struct PackageCatalog {
    entries: Vec<CatalogEntry>,
    families: Vec<FamilyEntry>,
    prefix_index: HashMap<String, usize>,
    obfusc_class_len: usize,
    obfusc_seg_len: usize,
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("line {line}: malformed catalog line: {text:?}")]
    Malformed { line: usize, text: String },
    #[error("line {line}: duplicate package entry {prefix:?}")]
    DuplicatePackage { line: usize, prefix: String },
    #[error("line {line}: duplicate family {name:?}")]
    DuplicateFamily { line: usize, name: String },
    #[error("line {line}: package {prefix:?} references unknown family {family:?}")]
    UnknownFamily {
        line: usize,
        prefix: String,
        family: String,
    },
    #[error("{0} is a reserved state name")]
    ReservedName(String),
    #[error("failed to read catalog: {0}")]
    Io(#[from] std::io::Error),
}

impl PackageCatalog {
    pub fn parse(text: &str) -> Result<Self, CatalogError> {
        let mut entries: Vec<CatalogEntry> = Vec::new();
        let mut families: Vec<FamilyEntry> = Vec::new();
        let mut prefix_index = HashMap::new();
        let mut obfusc_class_len = 2;
        let mut obfusc_seg_len = 2;

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let malformed = || CatalogError::Malformed {
                line: lineno + 1,
                text: line.to_string(),
            };
            if let Some(params) = line.strip_prefix("@mode-params") {
                for kv in params.split_whitespace() {
                    let (k, v) = kv.split_once('=').ok_or_else(malformed)?;
                    let v: usize = v.parse().map_err(|_| malformed())?;
                    match k {
                        "obfusc_class_len" => obfusc_class_len = v,
                        "obfusc_seg_len" => obfusc_seg_len = v,
                        _ => return Err(malformed()),
                    }
                }
                continue;
            }
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("family") => {
                    let name = parts.next().ok_or_else(malformed)?;
                    let active = match parts.next() {
                        Some("active") => true,
                        Some("inactive") => false,
                        _ => return Err(malformed()),
                    };
                    if parts.next().is_some() {
                        return Err(malformed());
                    }
                    if name == SELF_DEFINED || name == OBFUSCATED {
                        return Err(CatalogError::ReservedName(name.to_string()));
                    }
                    if families.iter().any(|f| f.name == name) {
                        return Err(CatalogError::DuplicateFamily {
                            line: lineno + 1,
                            name: name.to_string(),
                        });
                    }
                    families.push(FamilyEntry {
                        name: name.to_string(),
                        active,
                    });
                }
                Some("package") => {
                    let prefix = parts.next().ok_or_else(malformed)?;
                    let family = parts.next().ok_or_else(malformed)?;
                    if parts.next().is_some() {
                        return Err(malformed());
                    }
                    if prefix == SELF_DEFINED || prefix == OBFUSCATED {
                        return Err(CatalogError::ReservedName(prefix.to_string()));
                    }
                    if prefix_index.contains_key(prefix) {
                        return Err(CatalogError::DuplicatePackage {
                            line: lineno + 1,
                            prefix: prefix.to_string(),
                        });
                    }
                    if !families.iter().any(|f| f.name == family) {
                        return Err(CatalogError::UnknownFamily {
                            line: lineno + 1,
                            prefix: prefix.to_string(),
                            family: family.to_string(),
                        });
                    }
                    prefix_index.insert(prefix.to_string(), entries.len());
                    entries.push(CatalogEntry {
                        prefix: prefix.to_string(),
                        family: family.to_string(),
                    });
                }
                _ => return Err(malformed()),
            }
        }

        Ok(PackageCatalog {
            entries,
            families,
            prefix_index,
            obfusc_class_len,
            obfusc_seg_len,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CatalogError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// The shipped full catalog: 9 active families, 338 package entries
    /// (340 package-mode states, 11 family-mode states).
    pub fn full() -> &'static PackageCatalog {
        static FULL: OnceLock<PackageCatalog> = OnceLock::new();
        FULL.get_or_init(|| {
            PackageCatalog::parse(include_str!("../data/catalog_full.txt"))
                .expect("shipped catalog_full.txt is valid")
        })
    }

    /// The shipped evaluation catalog: junit/json/dom inactive and the
    /// top-level `android` package split into `android.R` and
    /// `android.Manifest` (341 package-mode states, 8 family-mode states).
    pub fn eval() -> &'static PackageCatalog {
        static EVAL: OnceLock<PackageCatalog> = OnceLock::new();
        EVAL.get_or_init(|| {
            PackageCatalog::parse(include_str!("../data/catalog_eval.txt"))
                .expect("shipped catalog_eval.txt is valid")
        })
    }

    /// Known package entry count (specials excluded).
    pub fn package_count(&self) -> usize {
        self.entries.len()
    }

    /// Ordered state names for the given mode: catalog order, then the two
    /// special states. In family mode only active families appear.
    pub fn state_names(&self, mode: Mode) -> Vec<String> {
        let mut names: Vec<String> = match mode {
            Mode::Package => self.entries.iter().map(|e| e.prefix.clone()).collect(),
            Mode::Family => self
                .families
                .iter()
                .filter(|f| f.active)
                .map(|f| f.name.clone())
                .collect(),
        };
        names.push(SELF_DEFINED.to_string());
        names.push(OBFUSCATED.to_string());
        names
    }

    /// Family names in catalog order, regardless of the active flag, plus
    /// the two specials. Used by corpus characterization.
    pub fn all_family_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.families.iter().map(|f| f.name.clone()).collect();
        names.push(SELF_DEFINED.to_string());
        names.push(OBFUSCATED.to_string());
        names
    }

    /// Catalog package prefixes belonging to `family`, in catalog order.
    pub fn packages_of_family(&self, family: &str) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|e| e.family == family)
            .map(|e| e.prefix.as_str())
            .collect()
    }

    /// Longest segment-aligned catalog prefix of the signature's dotted
    /// package-plus-class path, if any.
    fn match_entry(&self, m: &MethodRef) -> Option<&CatalogEntry> {
        let mut candidate = m.qualified_class();
        loop {
            if let Some(&idx) = self.prefix_index.get(candidate.as_str()) {
                return Some(&self.entries[idx]);
            }
            match candidate.rfind('.') {
                Some(dot) => candidate.truncate(dot),
                None => return None,
            }
        }
    }

    /// Family of a signature ignoring active flags, for corpus
    /// characterization: the owning family of the matched entry, or the
    /// special state name.
    pub fn raw_family(&self, m: &MethodRef) -> String {
        if let Some(entry) = self.match_entry(m) {
            return entry.family.clone();
        }
        if self.is_obfuscated(m) {
            OBFUSCATED.to_string()
        } else {
            SELF_DEFINED.to_string()
        }
    }

    /// Name-length obfuscation heuristic: fires when both the class name
    /// and the last package segment are at most the configured lengths.
    /// Only meaningful for signatures with no cataloged prefix.
    pub fn is_obfuscated(&self, m: &MethodRef) -> bool {
        let last_seg = m.package.rsplit('.').next().unwrap_or(&m.package);
        m.class_name.chars().count() <= self.obfusc_class_len
            && last_seg.chars().count() <= self.obfusc_seg_len
    }

    /// Maps a signature to its abstract state under `mode`. Returns `None`
    /// only in family mode, for calls whose family is inactive; transition
    /// pairs touching such calls are dropped by the caller.
    pub fn abstract_method(&self, m: &MethodRef, mode: Mode) -> Option<AbstractState> {
        if let Some(entry) = self.match_entry(m) {
            return match mode {
                Mode::Package => Some(AbstractState(entry.prefix.clone())),
                Mode::Family => {
                    let fam = self
                        .families
                        .iter()
                        .find(|f| f.name == entry.family)
                        .expect("entry family validated at parse time");
                    if fam.active {
                        Some(AbstractState(fam.name.clone()))
                    } else {
                        None
                    }
                }
            };
        }
        if self.is_obfuscated(m) {
            Some(AbstractState::obfuscated())
        } else {
            Some(AbstractState::self_defined())
        }
    }
}

/// Package-mode abstraction; total over all signatures.
pub fn abstract_to_package(m: &MethodRef, catalog: &PackageCatalog) -> AbstractState {
    catalog
        .abstract_method(m, Mode::Package)
        .expect("package mode never excludes")
}

/// Family-mode abstraction; `None` means the call's family is inactive.
pub fn abstract_to_family(m: &MethodRef, catalog: &PackageCatalog) -> Option<AbstractState> {
    catalog.abstract_method(m, Mode::Family)
}

//! The declarative pointer catalog.
//!
//! A catalog is a TOML document with `[profile."<family>"]` tables and `[[pointer]]` records.
//! See `catalog/pointers.toml` for the shipped one.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("cannot read catalog {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed catalog: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("duplicate pointer name {0:?}")]
    DuplicateName(String),
    #[error("pointer {name:?} references unknown pointer {other:?}")]
    UnknownReference { name: String, other: String },
    #[error("pointer {0:?} has no lexical, relational or structural signature")]
    EmptySignature(String),
    #[error("pointer {0:?} is data_via_return but names no base function")]
    MissingBase(String),
    #[error("bad version pattern {0:?}")]
    BadVersion(String),
}

/// Version families such as `3.18.x`, `2.6.x`, or `ALL`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(into = "String")]
pub struct VersionSet(Vec<String>);

impl VersionSet {
    pub fn parse(text: &str) -> Result<Self, CatalogError> {
        let parts: Vec<String> = text.split('/').map(|p| p.trim().to_string()).collect();
        for p in &parts {
            let ok = p == "ALL" || (!p.is_empty() && p.split('.').all(|c| c == "x" || (!c.is_empty() && c.bytes().all(|b| b.is_ascii_digit()))));
            if !ok {
                return Err(CatalogError::BadVersion(text.to_string()));
            }
        }
        Ok(VersionSet(parts))
    }

    pub fn all() -> Self {
        VersionSet(vec!["ALL".into()])
    }

    pub fn is_all(&self) -> bool {
        self.0.iter().any(|p| p == "ALL")
    }

    /// A kernel without a detected version only matches `ALL`.
    pub fn matches(&self, version: Option<&str>) -> bool {
        if self.is_all() {
            return true;
        }
        match version {
            Some(v) => self.0.iter().any(|p| family_matches(p, v)),
            None => false,
        }
    }

    pub fn patterns(&self) -> &[String] {
        &self.0
    }
}

impl From<VersionSet> for String {
    fn from(v: VersionSet) -> String {
        v.0.join("/")
    }
}

impl<'de> Deserialize<'de> for VersionSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            One(String),
            Many(Vec<String>),
        }
        let text = match Raw::deserialize(d)? {
            Raw::One(s) => s,
            Raw::Many(v) => v.join("/"),
        };
        VersionSet::parse(&text).map_err(serde::de::Error::custom)
    }
}

/// `3.18.x` matches `3.18` and `3.18.20`; a trailing `x` swallows any remaining components.
pub fn family_matches(pattern: &str, version: &str) -> bool {
    let mut want = pattern.split('.');
    let mut have = version.split('.');
    loop {
        match (want.next(), have.next()) {
            (Some("x"), _) => return want.next().is_none(),
            (Some(w), Some(h)) if w == h => {}
            (None, _) => return true,
            _ => return false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointerKind {
    Function,
    DataViaReturn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Strategy {
    I,
    II,
    III,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Lines {
    One(u32),
    Many(Vec<u32>),
}

impl Lines {
    pub fn contains(&self, line: u32) -> bool {
        match self {
            Lines::One(l) => *l == line,
            Lines::Many(ls) => ls.contains(&line),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Warning {
    /// Substring of the file-name argument.
    pub file: String,
    pub line: Lines,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lexical {
    #[serde(default)]
    pub strings: Vec<String>,
    pub warning: Option<Warning>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    /// The candidate calls `other`.
    Caller,
    /// `other` calls the candidate.
    Callee,
    /// Some third function calls both.
    Sibling,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Relation {
    pub relation: RelationKind,
    pub other: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Structural {
    /// Signed values are accepted and compared modulo 2^32.
    #[serde(default)]
    pub constants: Vec<i64>,
    #[serde(default)]
    pub return_values: Vec<i64>,
    pub bb_count: Option<usize>,
    pub callee_count: Option<usize>,
}

/// The filters that apply to one version family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Signature<'a> {
    pub lexical: Option<&'a Lexical>,
    pub relational: &'a [Relation],
    pub structural: Option<&'a Structural>,
}

impl Signature<'_> {
    pub fn is_empty(&self) -> bool {
        self.lexical.is_none() && self.relational.is_empty() && self.structural.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub versions: VersionSet,
    pub lexical: Option<Lexical>,
    #[serde(default)]
    pub relational: Vec<Relation>,
    pub structural: Option<Structural>,
}

impl Variant {
    pub fn signature(&self) -> Signature<'_> {
        Signature { lexical: self.lexical.as_ref(), relational: &self.relational, structural: self.structural.as_ref() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointerSpec {
    pub name: String,
    pub kind: PointerKind,
    pub versions: VersionSet,
    /// The strategy class the pointer is listed under; informational.
    pub strategy: Option<Strategy>,
    /// Helper anchors for relational filters; not part of the pointer set a driver needs.
    #[serde(default)]
    pub auxiliary: bool,
    pub lexical: Option<Lexical>,
    #[serde(default)]
    pub relational: Vec<Relation>,
    pub structural: Option<Structural>,
    /// Version-specific signatures that replace the default one.
    #[serde(default)]
    pub variant: Vec<Variant>,
    /// For `data_via_return`: functions whose return value is the containing structure.
    #[serde(default)]
    pub base: Vec<String>,
}

impl PointerSpec {
    /// The signature in force for `version`: the first matching variant, else the default.
    pub fn signature_for(&self, version: Option<&str>) -> Signature<'_> {
        self.variant.iter().find(|v| v.versions.matches(version)).map_or_else(|| self.signature(), Variant::signature)
    }

    pub fn signature(&self) -> Signature<'_> {
        Signature { lexical: self.lexical.as_ref(), relational: &self.relational, structural: self.structural.as_ref() }
    }

    pub fn applies_to(&self, version: Option<&str>) -> bool {
        self.versions.matches(version)
    }
}

/// Offsets of the board-callback slots inside `struct machine_desc`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VersionProfile {
    /// Function whose return value is the machine descriptor.
    pub anchor: String,
    pub init_irq: u32,
    pub init_time: u32,
    /// The `init_time` slot holds a pointer to a structure whose first word is the callback.
    #[serde(default)]
    pub init_time_indirect: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointerCatalog {
    #[serde(default)]
    pub profile: BTreeMap<String, VersionProfile>,
    #[serde(default)]
    pub pointer: Vec<PointerSpec>,
}

const BUILTIN: &str = include_str!("../../catalog/pointers.toml");

impl PointerCatalog {
    pub fn parse(text: &str) -> Result<Self, CatalogError> {
        let catalog: PointerCatalog = toml::from_str(text)?;
        catalog.validate()?;
        Ok(catalog)
    }

    pub fn load(path: &Path) -> Result<Self, CatalogError> {
        let text = std::fs::read_to_string(path).map_err(|source| CatalogError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    /// The catalog shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("shipped catalog is valid")
    }

    pub fn builtin_text() -> &'static str {
        BUILTIN
    }

    pub fn get(&self, name: &str) -> Option<&PointerSpec> {
        self.pointer.iter().find(|p| p.name == name)
    }

    /// The profile whose family pattern matches `version`.
    pub fn profile_for(&self, version: Option<&str>) -> Option<(&str, &VersionProfile)> {
        let v = version?;
        self.profile.iter().find(|(family, _)| family.split('/').any(|f| family_matches(f, v))).map(|(k, p)| (k.as_str(), p))
    }

    fn validate(&self) -> Result<(), CatalogError> {
        let mut names = BTreeSet::new();
        for p in &self.pointer {
            if !names.insert(p.name.as_str()) {
                return Err(CatalogError::DuplicateName(p.name.clone()));
            }
        }
        for p in &self.pointer {
            let signatures: Vec<Signature> = std::iter::once(p.signature()).chain(p.variant.iter().map(Variant::signature)).collect();
            match p.kind {
                PointerKind::Function => {
                    if signatures.iter().all(Signature::is_empty) {
                        return Err(CatalogError::EmptySignature(p.name.clone()));
                    }
                }
                PointerKind::DataViaReturn => {
                    if p.base.is_empty() {
                        return Err(CatalogError::MissingBase(p.name.clone()));
                    }
                }
            }
            let others = signatures.iter().flat_map(|s| s.relational.iter().map(|r| &r.other)).chain(&p.base);
            for other in others {
                if !names.contains(other.as_str()) {
                    return Err(CatalogError::UnknownReference { name: p.name.clone(), other: other.clone() });
                }
            }
        }
        Ok(())
    }
}

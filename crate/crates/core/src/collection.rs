//! Collections of entries loaded from a directory or a ZIP archive.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;
use walkdir::WalkDir;

use crate::datapackage::{load_entry, save_entry, Entry, PackageError};
use crate::metadata::{normalize_key, Node};
use crate::tabular::is_decimal_literal;

/// Timeout for fetching remote archives.
pub const FETCH_TIMEOUT: Duration = Duration::from_secs(30);

const MAX_LISTED_IDENTIFIERS: usize = 20;

#[derive(Debug, Error)]
pub enum CollectionError {
    #[error("directory not found: {0}")]
    DirectoryNotFound(String),
    #[error("duplicate identifier `{identifier}` in {first} and {second}")]
    DuplicateIdentifier {
        identifier: String,
        first: String,
        second: String,
    },
    #[error("{} package(s) failed to load; first: {}: {}", .0.len(), .0[0].0.display(), .0[0].1)]
    Load(Vec<(PathBuf, PackageError)>),
    #[error("fetch failed: {0}")]
    Fetch(String),
    #[error("bad archive: {0}")]
    BadArchive(String),
    #[error("no entry `{identifier}`{}", available_hint(.available))]
    NotFound {
        identifier: String,
        available: Option<Vec<String>>,
    },
    #[error("cannot parse predicate `{text}`: {reason}")]
    PredicateParse { text: String, reason: String },
    #[error("invalid profile: {0}")]
    Profile(String),
    #[error(transparent)]
    Package(#[from] PackageError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

fn available_hint(available: &Option<Vec<String>>) -> String {
    match available {
        Some(ids) if ids.is_empty() => " (collection is empty)".into(),
        Some(ids) => format!(" (available: {})", ids.join(", ")),
        None => String::new(),
    }
}

impl CollectionError {
    pub fn code(&self) -> &'static str {
        match self {
            CollectionError::DirectoryNotFound(_) => "DIRECTORY_NOT_FOUND",
            CollectionError::DuplicateIdentifier { .. } => "DUPLICATE_IDENTIFIER",
            CollectionError::Load(errors) => errors[0].1.code(),
            CollectionError::Fetch(_) => "FETCH_ERROR",
            CollectionError::BadArchive(_) => "BAD_ARCHIVE",
            CollectionError::NotFound { .. } => "NOT_FOUND",
            CollectionError::PredicateParse { .. } => "PREDICATE_PARSE_ERROR",
            CollectionError::Profile(_) => "PROFILE_INVALID",
            CollectionError::Package(e) => e.code(),
            CollectionError::Io { .. } => "IO_ERROR",
        }
    }
}

/// Entries keyed and ordered by identifier.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Collection {
    entries: BTreeMap<String, Entry>,
}

/// Outcome of a lenient directory load.
#[derive(Debug, Default)]
pub struct LoadReport {
    pub collection: Collection,
    pub skipped: Vec<(PathBuf, PackageError)>,
}

impl Collection {
    pub fn from_entries(entries: impl IntoIterator<Item = Entry>) -> Result<Self, CollectionError> {
        let mut map = BTreeMap::new();
        for entry in entries {
            let id = entry.identifier().to_string();
            if map.contains_key(&id) {
                return Err(CollectionError::DuplicateIdentifier {
                    identifier: id.clone(),
                    first: id.clone(),
                    second: id,
                });
            }
            map.insert(id, entry);
        }
        Ok(Collection { entries: map })
    }

    /// Loads every `*.json` descriptor below `dir`. Any load failure is fatal.
    pub fn from_directory(dir: impl AsRef<Path>) -> Result<Self, CollectionError> {
        let report = Self::load_directory(dir, false)?;
        Ok(report.collection)
    }

    /// Like [`Collection::from_directory`]; with `skip_errors` broken
    /// packages are reported instead of failing the whole load.
    pub fn load_directory(
        dir: impl AsRef<Path>,
        skip_errors: bool,
    ) -> Result<LoadReport, CollectionError> {
        let dir = dir.as_ref();
        if !dir.is_dir() {
            return Err(CollectionError::DirectoryNotFound(
                dir.display().to_string(),
            ));
        }
        let mut descriptors: Vec<PathBuf> = WalkDir::new(dir)
            .into_iter()
            .filter_map(Result::ok)
            .filter(|e| e.file_type().is_file())
            .filter(|e| e.file_name().to_string_lossy().ends_with(".json"))
            .map(|e| e.into_path())
            .collect();
        descriptors.sort();

        let mut entries: BTreeMap<String, (PathBuf, Entry)> = BTreeMap::new();
        let mut failures = Vec::new();
        for path in descriptors {
            match load_entry(&path) {
                Ok(entry) => {
                    let id = entry.identifier().to_string();
                    if let Some((first, _)) = entries.get(&id) {
                        return Err(CollectionError::DuplicateIdentifier {
                            identifier: id,
                            first: first.display().to_string(),
                            second: path.display().to_string(),
                        });
                    }
                    entries.insert(id, (path, entry));
                }
                Err(err) => failures.push((path, err)),
            }
        }
        if !failures.is_empty() && !skip_errors {
            return Err(CollectionError::Load(failures));
        }
        Ok(LoadReport {
            collection: Collection {
                entries: entries.into_iter().map(|(k, (_, e))| (k, e)).collect(),
            },
            skipped: failures,
        })
    }

    /// Loads a ZIP archive from disk or from an `http(s)://` URL.
    pub fn from_archive(source: &str) -> Result<Self, CollectionError> {
        let bytes = if source.starts_with("http://") || source.starts_with("https://") {
            fetch(source)?
        } else {
            fs::read(source).map_err(|e| CollectionError::Io {
                path: source.to_string(),
                source: e,
            })?
        };
        let dir = tempfile::tempdir().map_err(|e| CollectionError::Io {
            path: "temporary directory".into(),
            source: e,
        })?;
        extract_zip(&bytes, dir.path())?;
        Self::from_directory(dir.path())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn identifiers(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Entry> {
        self.entries.values()
    }

    /// Looks up an entry; the identifier is lowercased first.
    pub fn get(&self, identifier: &str) -> Result<&Entry, CollectionError> {
        let key = identifier.to_lowercase();
        self.entries
            .get(&key)
            .ok_or_else(|| CollectionError::NotFound {
                identifier: identifier.to_string(),
                available: (self.entries.len() <= MAX_LISTED_IDENTIFIERS)
                    .then(|| self.entries.keys().cloned().collect()),
            })
    }

    pub fn filter(&self, predicate: &Predicate) -> Collection {
        Collection {
            entries: self
                .entries
                .iter()
                .filter(|(_, e)| predicate.matches(e))
                .map(|(k, e)| (k.clone(), e.clone()))
                .collect(),
        }
    }

    /// Writes every entry into `outdir`.
    pub fn save_all(
        &self,
        outdir: impl AsRef<Path>,
        overwrite: bool,
    ) -> Result<(), CollectionError> {
        for entry in self.iter() {
            save_entry(entry, outdir.as_ref(), overwrite)?;
        }
        Ok(())
    }

    /// Summary statistics: the entry count plus one value set (or count of
    /// distinct values) per profile item.
    pub fn describe(&self, profile: &Profile) -> Node {
        let mut out = indexmap::IndexMap::new();
        out.insert(
            "number of entries".to_string(),
            Node::Int(self.entries.len() as i64),
        );
        for item in &profile.describe {
            let mut values: BTreeMap<String, Node> = BTreeMap::new();
            for entry in self.iter() {
                let Ok(node) = entry.metadata().get_path(&item.path) else {
                    continue;
                };
                let scalars: Vec<&Node> = match node {
                    Node::Seq(items) => items.iter().filter(|n| n.is_scalar()).collect(),
                    n if n.is_scalar() => vec![n],
                    _ => Vec::new(),
                };
                for s in scalars.into_iter().filter(|s| **s != Node::Null) {
                    let key = s.canonical_scalar().expect("scalar");
                    values.entry(key).or_insert_with(|| s.clone());
                }
            }
            let value = match item.mode {
                DescribeMode::Set => Node::Seq(values.into_values().collect()),
                DescribeMode::Count => Node::Int(values.len() as i64),
            };
            out.insert(item.label.clone(), value);
        }
        Node::Map(out)
    }
}

impl fmt::Display for Collection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.iter().map(|e| e.to_string()).collect();
        write!(f, "[{}]", items.join(", "))
    }
}

fn fetch(url: &str) -> Result<Vec<u8>, CollectionError> {
    let agent = ureq::AgentBuilder::new().timeout(FETCH_TIMEOUT).build();
    let response = agent
        .get(url)
        .call()
        .map_err(|e| CollectionError::Fetch(format!("{url}: {e}")))?;
    let mut bytes = Vec::new();
    response
        .into_reader()
        .read_to_end(&mut bytes)
        .map_err(|e| CollectionError::Fetch(format!("{url}: {e}")))?;
    Ok(bytes)
}

fn extract_zip(bytes: &[u8], dest: &Path) -> Result<(), CollectionError> {
    let bad = |e: zip::result::ZipError| CollectionError::BadArchive(e.to_string());
    let mut archive = zip::ZipArchive::new(io::Cursor::new(bytes)).map_err(bad)?;
    for i in 0..archive.len() {
        let mut file = archive.by_index(i).map_err(bad)?;
        let Some(relative) = file.enclosed_name().map(Path::to_path_buf) else {
            return Err(CollectionError::BadArchive(format!(
                "unsafe path `{}`",
                file.name()
            )));
        };
        let target = dest.join(relative);
        let io_err = |e: io::Error| CollectionError::Io {
            path: target.display().to_string(),
            source: e,
        };
        if file.is_dir() {
            fs::create_dir_all(&target).map_err(io_err)?;
            continue;
        }
        if let Some(parent) = target.parent() {
            fs::create_dir_all(parent).map_err(io_err)?;
        }
        let mut out = fs::File::create(&target).map_err(io_err)?;
        io::copy(&mut file, &mut out).map_err(io_err)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Contains,
}

impl Op {
    fn symbol(self) -> &'static str {
        match self {
            Op::Eq => "==",
            Op::Ne => "!=",
            Op::Lt => "<",
            Op::Le => "<=",
            Op::Gt => ">",
            Op::Ge => ">=",
            Op::Contains => "contains",
        }
    }

    fn holds(self, ord: Ordering) -> bool {
        match self {
            Op::Eq => ord == Ordering::Equal,
            Op::Ne => ord != Ordering::Equal,
            Op::Lt => ord == Ordering::Less,
            Op::Le => ord != Ordering::Greater,
            Op::Gt => ord == Ordering::Greater,
            Op::Ge => ord != Ordering::Less,
            Op::Contains => unreachable!("contains is not an ordering"),
        }
    }
}

/// One `path OP literal` condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Clause {
    pub path: String,
    pub op: Op,
    pub literal: String,
    /// Quoted literals always compare as strings.
    pub quoted: bool,
}

impl Clause {
    pub fn new(path: impl Into<String>, op: Op, literal: impl Into<String>) -> Self {
        Clause {
            path: path.into(),
            op,
            literal: literal.into(),
            quoted: false,
        }
    }

    pub fn matches(&self, entry: &Entry) -> bool {
        let Ok(node) = entry.metadata().get_path(&self.path) else {
            return false;
        };
        if self.op == Op::Contains {
            return match node {
                Node::Seq(items) => items
                    .iter()
                    .any(|n| n.canonical_scalar().as_deref() == Some(self.literal.as_str())),
                Node::String(s) => s.contains(&self.literal),
                _ => false,
            };
        }
        let Some(text) = node.canonical_scalar() else {
            return false;
        };
        let numeric = match (
            node.as_f64(),
            self.quoted || !is_decimal_literal(&self.literal),
        ) {
            (Some(v), false) => self.literal.parse::<f64>().ok().map(|l| (v, l)),
            _ => None,
        };
        let ord = match numeric {
            Some((v, l)) => match v.partial_cmp(&l) {
                Some(o) => o,
                None => return false,
            },
            None => text.as_str().cmp(self.literal.as_str()),
        };
        self.op.holds(ord)
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {:?}", self.path, self.op.symbol(), self.literal)
    }
}

impl FromStr for Clause {
    type Err = CollectionError;

    /// Parses `path OP value`; the value may be wrapped in single or double quotes.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let fail = |reason: &str| CollectionError::PredicateParse {
            text: text.to_string(),
            reason: reason.to_string(),
        };
        let s = text.trim();
        let path_end = s
            .find(|c: char| c.is_whitespace() || "=!<>".contains(c))
            .ok_or_else(|| fail("missing operator"))?;
        let path = &s[..path_end];
        if path.is_empty() || path.split('.').any(str::is_empty) {
            return Err(fail("missing or malformed path"));
        }
        let rest = s[path_end..].trim_start();
        let ops = [
            ("==", Op::Eq),
            ("!=", Op::Ne),
            ("<=", Op::Le),
            (">=", Op::Ge),
            ("<", Op::Lt),
            (">", Op::Gt),
            ("contains", Op::Contains),
        ];
        let (sym, op) = ops
            .iter()
            .find(|(sym, _)| rest.starts_with(sym))
            .ok_or_else(|| fail("expected one of ==, !=, <, <=, >, >=, contains"))?;
        let after = &rest[sym.len()..];
        if *op == Op::Contains && !after.starts_with(char::is_whitespace) {
            return Err(fail("expected whitespace after `contains`"));
        }
        let raw = after.trim();
        let (literal, quoted) = match raw.chars().next() {
            Some(q @ ('"' | '\'')) => (
                unquote(raw, q).ok_or_else(|| fail("unterminated quote"))?,
                true,
            ),
            Some(_) => (raw.to_string(), false),
            None => return Err(fail("missing value")),
        };
        Ok(Clause {
            path: path.to_string(),
            op: *op,
            literal,
            quoted,
        })
    }
}

fn unquote(raw: &str, quote: char) -> Option<String> {
    let mut out = String::new();
    let mut chars = raw[quote.len_utf8()..].chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => out.push(chars.next()?),
            c if c == quote => {
                return chars.as_str().trim().is_empty().then_some(out);
            }
            c => out.push(c),
        }
    }
    None
}

/// A conjunction of clauses. The empty predicate matches everything.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Predicate {
    pub clauses: Vec<Clause>,
}

impl Predicate {
    pub fn new(clauses: Vec<Clause>) -> Self {
        Predicate { clauses }
    }

    pub fn parse<S: AsRef<str>>(clauses: &[S]) -> Result<Self, CollectionError> {
        Ok(Predicate {
            clauses: clauses
                .iter()
                .map(|c| c.as_ref().parse())
                .collect::<Result<_, _>>()?,
        })
    }

    pub fn matches(&self, entry: &Entry) -> bool {
        self.clauses.iter().all(|c| c.matches(entry))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DescribeMode {
    /// Sorted set of distinct values.
    #[default]
    Set,
    /// Number of distinct values.
    Count,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescribeItem {
    pub label: String,
    pub path: String,
    #[serde(default)]
    pub mode: DescribeMode,
}

/// A declarative domain view over a collection.
///
/// ```yaml
/// name: cv
/// describe:
///   - {label: number of references, path: source.citation_key, mode: count}
///   - {label: materials, path: system.electrodes.working_electrode.material}
/// accessors:
///   - system.electrodes.working_electrode.material
/// ```
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Profile {
    pub name: String,
    #[serde(default)]
    pub describe: Vec<DescribeItem>,
    #[serde(default)]
    pub accessors: Vec<String>,
}

impl Profile {
    pub fn new(
        name: impl Into<String>,
        describe: Vec<DescribeItem>,
    ) -> Result<Self, CollectionError> {
        let profile = Profile {
            name: name.into(),
            describe,
            accessors: Vec::new(),
        };
        profile.check()?;
        Ok(profile)
    }

    /// The cyclic voltammetry view: reference count and electrode materials.
    pub fn cyclic_voltammetry() -> Self {
        Profile {
            name: "cv".into(),
            describe: vec![
                DescribeItem {
                    label: "number of references".into(),
                    path: "source.citation_key".into(),
                    mode: DescribeMode::Count,
                },
                DescribeItem {
                    label: "materials".into(),
                    path: "system.electrodes.working_electrode.material".into(),
                    mode: DescribeMode::Set,
                },
            ],
            accessors: vec![
                "system.electrodes.working_electrode.material".into(),
                "source.citation_key".into(),
            ],
        }
    }

    pub fn from_yaml_str(text: &str) -> Result<Self, CollectionError> {
        let profile: Profile =
            serde_yaml::from_str(text).map_err(|e| CollectionError::Profile(e.to_string()))?;
        profile.check()?;
        Ok(profile)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CollectionError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| CollectionError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_yaml_str(&text)
    }

    fn check(&self) -> Result<(), CollectionError> {
        let mut labels = vec!["number of entries"];
        for item in &self.describe {
            if labels.contains(&item.label.as_str()) {
                return Err(CollectionError::Profile(format!(
                    "duplicate label `{}`",
                    item.label
                )));
            }
            labels.push(&item.label);
        }
        Ok(())
    }

    /// Resolves a shortcut name (the last segment of an accessor path) to
    /// its full path; unknown names are returned unchanged.
    pub fn resolve<'a>(&'a self, name: &'a str) -> &'a str {
        let wanted = normalize_key(name);
        self.accessors
            .iter()
            .find(|p| p.rsplit('.').next().map(normalize_key) == Some(wanted.clone()))
            .map(String::as_str)
            .unwrap_or(name)
    }

    /// Looks up a descriptor through the profile's shortcuts.
    pub fn access<'e>(&self, entry: &'e Entry, name: &str) -> Result<&'e Node, PackageError> {
        entry.get(self.resolve(name))
    }
}

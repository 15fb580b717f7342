//! Structured metadata documents loaded from YAML or JSON.
//!
//! Documents are trees of [`Node`]s. Descriptors are addressed by dot-paths
//! whose segments match map keys after normalization (lowercase, spaces
//! replaced by underscores), so `figure_description.fields` reaches the key
//! `figure description`. Integer segments index into sequences.

mod node;
mod schema;

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;
use walkdir::WalkDir;

pub use node::{format_number, Node};
pub use schema::{validate, SchemaDoc, Violation, ViolationKind};

/// Suffix of sidecar metadata files: `data.csv` is described by `data.csv.meta.yaml`.
pub const META_SUFFIX: &str = ".meta.yaml";

#[derive(Debug, Error)]
pub enum MetadataError {
    #[error("{path}: parse error at line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: duplicate key `{key}`")]
    DuplicateKey { path: String, key: String },
    #[error("{0}: unsupported extension (expected .yaml, .yml or .json)")]
    UnsupportedExtension(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("path `{path}` not found (resolved up to `{resolved}`)")]
    PathNotFound { path: String, resolved: String },
    #[error("path `{path}`: segment `{segment}` matches several keys: {keys:?}")]
    AmbiguousKey {
        path: String,
        segment: String,
        keys: Vec<String>,
    },
    #[error("invalid path `{0}`")]
    InvalidPath(String),
    #[error("directory not found: {0}")]
    DirectoryNotFound(String),
    #[error("unsupported schema keyword `{keyword}` at `{path}`")]
    SchemaUnsupported { keyword: String, path: String },
    #[error("invalid schema at `{path}`: {reason}")]
    SchemaInvalid { path: String, reason: String },
}

impl MetadataError {
    pub fn code(&self) -> &'static str {
        match self {
            MetadataError::Parse { .. } => "PARSE_ERROR",
            MetadataError::DuplicateKey { .. } => "DUPLICATE_KEY",
            MetadataError::UnsupportedExtension(_) => "UNSUPPORTED_EXTENSION",
            MetadataError::Io { .. } => "IO_ERROR",
            MetadataError::PathNotFound { .. } => "PATH_NOT_FOUND",
            MetadataError::AmbiguousKey { .. } => "AMBIGUOUS_KEY",
            MetadataError::InvalidPath(_) => "INVALID_PATH",
            MetadataError::DirectoryNotFound(_) => "DIRECTORY_NOT_FOUND",
            MetadataError::SchemaUnsupported { .. } => "SCHEMA_UNSUPPORTED",
            MetadataError::SchemaInvalid { .. } => "SCHEMA_INVALID",
        }
    }
}

fn duplicate_key(message: &str) -> Option<String> {
    let start = message.find(node::DUPLICATE_KEY_MARKER)? + node::DUPLICATE_KEY_MARKER.len();
    let rest = &message[start..];
    Some(rest[..rest.find('`')?].to_string())
}

/// A parsed metadata document.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetadataDoc {
    pub root: Node,
}

impl MetadataDoc {
    pub fn new(root: Node) -> Self {
        MetadataDoc { root }
    }

    pub fn empty() -> Self {
        MetadataDoc {
            root: Node::Map(Default::default()),
        }
    }

    /// Parses YAML text. `origin` only labels error messages.
    pub fn from_yaml_str(text: &str, origin: &str) -> Result<Self, MetadataError> {
        if text.trim().is_empty() {
            return Ok(MetadataDoc::new(Node::Null));
        }
        serde_yaml::from_str::<Node>(text)
            .map(MetadataDoc::new)
            .map_err(|e| {
                let message = e.to_string();
                if let Some(key) = duplicate_key(&message) {
                    return MetadataError::DuplicateKey {
                        path: origin.to_string(),
                        key,
                    };
                }
                let (line, column) = e
                    .location()
                    .map(|l| (l.line(), l.column()))
                    .unwrap_or((0, 0));
                MetadataError::Parse {
                    path: origin.to_string(),
                    line,
                    column,
                    message,
                }
            })
    }

    pub fn from_json_str(text: &str, origin: &str) -> Result<Self, MetadataError> {
        serde_json::from_str::<Node>(text)
            .map(MetadataDoc::new)
            .map_err(|e| {
                let message = e.to_string();
                if let Some(key) = duplicate_key(&message) {
                    return MetadataError::DuplicateKey {
                        path: origin.to_string(),
                        key,
                    };
                }
                MetadataError::Parse {
                    path: origin.to_string(),
                    line: e.line(),
                    column: e.column(),
                    message,
                }
            })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.root).expect("metadata nodes always serialize")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.root).expect("metadata nodes always serialize")
    }

    pub fn get_path(&self, path: &str) -> Result<&Node, MetadataError> {
        get_path(&self.root, path)
    }
}

/// Loads a `.yaml`, `.yml` or `.json` document. YAML comments are dropped.
pub fn load_document(path: impl AsRef<Path>) -> Result<MetadataDoc, MetadataError> {
    let path = path.as_ref();
    let origin = path.display().to_string();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    let is_json = match ext.as_deref() {
        Some("yaml") | Some("yml") => false,
        Some("json") => true,
        _ => return Err(MetadataError::UnsupportedExtension(origin)),
    };
    let text = fs::read_to_string(path).map_err(|source| MetadataError::Io {
        path: origin.clone(),
        source,
    })?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(&text);
    if is_json {
        MetadataDoc::from_json_str(text, &origin)
    } else {
        MetadataDoc::from_yaml_str(text, &origin)
    }
}

/// Normalized form used to match path segments against keys.
pub fn normalize_key(key: &str) -> String {
    key.to_lowercase().replace(' ', "_")
}

/// Resolves a dot-path against a tree.
pub fn get_path<'a>(root: &'a Node, path: &str) -> Result<&'a Node, MetadataError> {
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return Err(MetadataError::InvalidPath(path.to_string()));
    }
    let mut node = root;
    let mut resolved: Vec<&str> = Vec::new();
    let not_found = |resolved: &[&str]| MetadataError::PathNotFound {
        path: path.to_string(),
        resolved: resolved.join("."),
    };
    for segment in path.split('.') {
        node = match node {
            Node::Map(map) => {
                let wanted = normalize_key(segment);
                let mut hits = map.iter().filter(|(k, _)| normalize_key(k) == wanted);
                let (_, first) = hits.next().ok_or_else(|| not_found(&resolved))?;
                let others: Vec<String> = hits.map(|(k, _)| k.clone()).collect();
                if !others.is_empty() {
                    let mut keys: Vec<String> = map
                        .keys()
                        .filter(|k| normalize_key(k) == wanted)
                        .cloned()
                        .collect();
                    keys.sort();
                    return Err(MetadataError::AmbiguousKey {
                        path: path.to_string(),
                        segment: segment.to_string(),
                        keys,
                    });
                }
                first
            }
            Node::Seq(items) => segment
                .parse::<usize>()
                .ok()
                .and_then(|i| items.get(i))
                .ok_or_else(|| not_found(&resolved))?,
            _ => return Err(not_found(&resolved)),
        };
        resolved.push(segment);
    }
    Ok(node)
}

/// Result of scanning a directory for sidecar metadata files.
#[derive(Debug, Default)]
pub struct ScanReport {
    pub documents: Vec<(PathBuf, MetadataDoc)>,
    pub failures: Vec<(PathBuf, MetadataError)>,
}

/// Recursively loads every `*.meta.yaml` file below `dir`, sorted by path.
pub fn scan_metadata_directory(dir: impl AsRef<Path>) -> Result<ScanReport, MetadataError> {
    scan_metadata_directory_with(dir, &[META_SUFFIX])
}

/// Like [`scan_metadata_directory`] with explicit filename suffixes.
pub fn scan_metadata_directory_with(
    dir: impl AsRef<Path>,
    suffixes: &[&str],
) -> Result<ScanReport, MetadataError> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(MetadataError::DirectoryNotFound(dir.display().to_string()));
    }
    let mut paths: Vec<PathBuf> = WalkDir::new(dir)
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .filter(|e| {
            let name = e.file_name().to_string_lossy();
            suffixes.iter().any(|s| name.ends_with(s))
        })
        .map(|e| e.into_path())
        .collect();
    paths.sort();

    let mut report = ScanReport::default();
    for path in paths {
        match load_document(&path) {
            Ok(doc) => report.documents.push((path, doc)),
            Err(err) => report.failures.push((path, err)),
        }
    }
    Ok(report)
}

/// Keeps the documents whose value at `path` renders the same as `expected`.
pub fn filter_metadata(
    docs: &[(PathBuf, MetadataDoc)],
    path: &str,
    expected: &Node,
) -> Vec<(PathBuf, MetadataDoc)> {
    let Some(expected) = expected.canonical_scalar() else {
        return Vec::new();
    };
    docs.iter()
        .filter(|(_, doc)| {
            doc.get_path(path)
                .ok()
                .and_then(Node::canonical_scalar)
                .is_some_and(|v| v == expected)
        })
        .cloned()
        .collect()
}

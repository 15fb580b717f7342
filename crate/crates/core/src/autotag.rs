//! Automatic metadata sidecars for newly created files.
//!
//! When `data.csv` appears in a watched directory, the current template is
//! copied verbatim to `data.csv.meta.yaml` and a provenance block is appended
//! under the reserved `autotag` key. Existing sidecars are never overwritten.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use chrono::{SecondsFormat, Utc};
use globset::{Glob, GlobSet, GlobSetBuilder};
use notify::event::{ModifyKind, RenameMode};
use notify::{Event, EventKind, RecursiveMode, Watcher};
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;
use walkdir::WalkDir;

use crate::metadata::{MetadataDoc, MetadataError, Node, META_SUFFIX};

/// Reserved top-level key holding the provenance block.
pub const AUTOTAG_KEY: &str = "autotag";

/// Default name of the JSON-lines event log inside the watched directory.
pub const LOG_FILE_NAME: &str = "autotag.log.jsonl";

#[derive(Debug, Error)]
pub enum AutotagError {
    #[error("{0} is already tagged")]
    AlreadyTagged(String),
    #[error("{0} is excluded from tagging")]
    Excluded(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("template: {0}")]
    TemplateParse(#[from] MetadataError),
    #[error("template must be a YAML map without the reserved `{AUTOTAG_KEY}` key: {0}")]
    TemplateInvalid(String),
    #[error("invalid glob `{0}`")]
    InvalidGlob(String),
    #[error("cannot watch: {0}")]
    WatchSetup(String),
}

impl AutotagError {
    pub fn code(&self) -> &'static str {
        match self {
            AutotagError::AlreadyTagged(_) => "ALREADY_TAGGED",
            AutotagError::Excluded(_) => "EXCLUDED",
            AutotagError::Io { .. } => "IO_ERROR",
            AutotagError::TemplateParse(_) => "TEMPLATE_PARSE_ERROR",
            AutotagError::TemplateInvalid(_) => "TEMPLATE_INVALID",
            AutotagError::InvalidGlob(_) => "INVALID_GLOB",
            AutotagError::WatchSetup(_) => "WATCH_SETUP_ERROR",
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AutotagError + '_ {
    move |source| AutotagError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// `data.csv` -> `data.csv.meta.yaml`
pub fn meta_path_for(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_os_string();
    name.push(META_SUFFIX);
    PathBuf::from(name)
}

fn is_meta_file(path: &Path) -> bool {
    path.file_name()
        .is_some_and(|n| n.to_string_lossy().ends_with(META_SUFFIX))
}

#[derive(Debug, Clone)]
pub struct WatchConfig {
    pub watch_dir: PathBuf,
    pub template_path: PathBuf,
    pub include_globs: Vec<String>,
    /// Extra exclusions; `*.meta.yaml` is always excluded on top of these.
    pub exclude_globs: Vec<String>,
    pub quiescence_ms: u64,
    pub recursive: bool,
    /// Defaults to `<watch_dir>/autotag.log.jsonl`.
    pub log_path: Option<PathBuf>,
}

impl WatchConfig {
    pub fn new(watch_dir: impl Into<PathBuf>, template_path: impl Into<PathBuf>) -> Self {
        WatchConfig {
            watch_dir: watch_dir.into(),
            template_path: template_path.into(),
            include_globs: vec!["*".into()],
            exclude_globs: Vec::new(),
            quiescence_ms: 500,
            recursive: true,
            log_path: None,
        }
    }

    pub fn log_path(&self) -> PathBuf {
        self.log_path
            .clone()
            .unwrap_or_else(|| self.watch_dir.join(LOG_FILE_NAME))
    }

    pub fn filter(&self) -> Result<FileFilter, AutotagError> {
        FileFilter::new(self)
    }
}

fn absolute(path: &Path) -> PathBuf {
    if let Ok(p) = path.canonicalize() {
        return p;
    }
    // The log file may not exist yet; resolve its directory instead.
    match (path.parent(), path.file_name()) {
        (Some(parent), Some(name)) => parent
            .canonicalize()
            .map(|p| p.join(name))
            .unwrap_or_else(|_| path.to_path_buf()),
        _ => path.to_path_buf(),
    }
}

/// Decides which paths get tagged.
#[derive(Debug, Clone)]
pub struct FileFilter {
    root: PathBuf,
    include: GlobSet,
    exclude: GlobSet,
    ignored: Vec<PathBuf>,
}

fn glob_set(patterns: &[String]) -> Result<GlobSet, AutotagError> {
    let mut builder = GlobSetBuilder::new();
    for p in patterns {
        builder.add(Glob::new(p).map_err(|_| AutotagError::InvalidGlob(p.clone()))?);
    }
    builder
        .build()
        .map_err(|e| AutotagError::InvalidGlob(e.to_string()))
}

impl FileFilter {
    fn new(cfg: &WatchConfig) -> Result<Self, AutotagError> {
        let mut exclude = cfg.exclude_globs.clone();
        exclude.push(format!("*{META_SUFFIX}"));
        Ok(FileFilter {
            root: absolute(&cfg.watch_dir),
            include: glob_set(&cfg.include_globs)?,
            exclude: glob_set(&exclude)?,
            ignored: vec![absolute(&cfg.template_path), absolute(&cfg.log_path())],
        })
    }

    pub fn accepts(&self, path: &Path) -> bool {
        if is_meta_file(path) {
            return false;
        }
        let abs = absolute(path);
        if self.ignored.contains(&abs) {
            return false;
        }
        let Some(name) = path.file_name() else {
            return false;
        };
        let rel = abs.strip_prefix(&self.root).unwrap_or(&abs);
        let matches = |set: &GlobSet| set.is_match(name) || set.is_match(rel);
        matches(&self.include) && !matches(&self.exclude)
    }
}

/// A parsed template and the hash of its exact bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    text: String,
    doc: MetadataDoc,
    hash: String,
}

pub fn content_hash(bytes: &[u8]) -> String {
    format!("sha256:{:x}", Sha256::digest(bytes))
}

impl Template {
    pub fn from_text(text: impl Into<String>) -> Result<Self, AutotagError> {
        let text = text.into();
        let doc = MetadataDoc::from_yaml_str(&text, "template")?;
        match &doc.root {
            Node::Null => {}
            Node::Map(map) if !map.contains_key(AUTOTAG_KEY) => {}
            Node::Map(_) => {
                return Err(AutotagError::TemplateInvalid(format!(
                    "`{AUTOTAG_KEY}` is reserved"
                )))
            }
            other => {
                return Err(AutotagError::TemplateInvalid(format!(
                    "top level is {}",
                    other.type_name()
                )))
            }
        }
        let hash = content_hash(text.as_bytes());
        let template = Template { text, doc, hash };
        // Appending a block must still give a map with the template's keys.
        let probe = template.compose("probe", "1970-01-01T00:00:00.000Z");
        let composed = MetadataDoc::from_yaml_str(&probe, "template")
            .map_err(|e| AutotagError::TemplateInvalid(e.to_string()))?;
        let expected = template.doc.root.as_map().map_or(0, |m| m.len()) + 1;
        if composed.root.as_map().map(|m| m.len()) != Some(expected) {
            return Err(AutotagError::TemplateInvalid(
                "use block style at the top level so the provenance block can be appended".into(),
            ));
        }
        Ok(template)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AutotagError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Template::from_text(text)
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn doc(&self) -> &MetadataDoc {
        &self.doc
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    fn compose(&self, file: &str, timestamp: &str) -> String {
        #[derive(Serialize)]
        struct Provenance<'a> {
            tagged: &'a str,
            file: &'a str,
            template_hash: &'a str,
        }
        let mut block = BTreeMap::new();
        block.insert(
            AUTOTAG_KEY,
            Provenance {
                tagged: timestamp,
                file,
                template_hash: &self.hash,
            },
        );
        let block = serde_yaml::to_string(&block).expect("provenance serializes");
        let mut out = self.text.clone();
        if !out.is_empty() && !out.ends_with('\n') {
            out.push('\n');
        }
        out.push_str(&block);
        out
    }
}

/// Splits a sidecar into the template text and the provenance block.
pub fn split_meta(content: &str) -> Option<(&str, &str)> {
    let marker = format!("{AUTOTAG_KEY}:\n");
    let at = if content.starts_with(&marker) {
        0
    } else {
        content.rfind(&format!("\n{marker}"))? + 1
    };
    Some(content.split_at(at))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TagEvent {
    pub source_path: PathBuf,
    pub meta_path: PathBuf,
    pub template_version: String,
    pub timestamp: String,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Writes `<path>.meta.yaml` from `template`.
pub fn tag_file(
    path: &Path,
    template: &Template,
    cfg: &WatchConfig,
) -> Result<TagEvent, AutotagError> {
    if !cfg.filter()?.accepts(path) {
        return Err(AutotagError::Excluded(path.display().to_string()));
    }
    write_sidecar(path, template)
}

fn write_sidecar(path: &Path, template: &Template) -> Result<TagEvent, AutotagError> {
    if is_meta_file(path) {
        return Err(AutotagError::Excluded(path.display().to_string()));
    }
    let meta_path = meta_path_for(path);
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let timestamp = now();
    let content = template.compose(&file_name, &timestamp);
    let mut file = match OpenOptions::new()
        .write(true)
        .create_new(true)
        .open(&meta_path)
    {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
            return Err(AutotagError::AlreadyTagged(path.display().to_string()))
        }
        Err(e) => return Err(io_err(&meta_path)(e)),
    };
    file.write_all(content.as_bytes())
        .map_err(io_err(&meta_path))?;
    Ok(TagEvent {
        source_path: path.to_path_buf(),
        meta_path,
        template_version: template.hash.clone(),
        timestamp,
    })
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum WatchRecord {
    Tagged(TagEvent),
    TemplateReloaded {
        template_version: String,
        timestamp: String,
    },
    Cancelled {
        path: PathBuf,
        reason: String,
        timestamp: String,
    },
    Error {
        code: String,
        message: String,
        path: Option<PathBuf>,
        timestamp: String,
    },
}

impl WatchRecord {
    fn error(err: &AutotagError, path: Option<&Path>) -> Self {
        WatchRecord::Error {
            code: err.code().to_string(),
            message: err.to_string(),
            path: path.map(Path::to_path_buf),
            timestamp: now(),
        }
    }
}

struct EventLog {
    path: PathBuf,
}

impl EventLog {
    fn append(&self, record: &WatchRecord) -> Result<(), AutotagError> {
        let mut line = serde_json::to_string(record).expect("records serialize");
        line.push('\n');
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .and_then(|mut f| f.write_all(line.as_bytes()))
            .map_err(io_err(&self.path))
    }
}

/// Keeps the last good template and reloads it when the file changes.
struct TemplateSource {
    path: PathBuf,
    current: Template,
    last_bad: Option<String>,
}

impl TemplateSource {
    fn open(path: &Path) -> Result<Self, AutotagError> {
        Ok(TemplateSource {
            path: path.to_path_buf(),
            current: Template::load(path)?,
            last_bad: None,
        })
    }

    /// Returns a record when the template was reloaded or failed to parse.
    fn refresh(&mut self) -> Option<WatchRecord> {
        let bytes = match fs::read(&self.path) {
            Ok(b) => b,
            Err(e) => return Some(WatchRecord::error(&io_err(&self.path)(e), Some(&self.path))),
        };
        let hash = content_hash(&bytes);
        if hash == self.current.hash || self.last_bad.as_deref() == Some(hash.as_str()) {
            return None;
        }
        let parsed = String::from_utf8(bytes)
            .map_err(|e| AutotagError::TemplateInvalid(e.to_string()))
            .and_then(Template::from_text);
        match parsed {
            Ok(t) => {
                self.current = t;
                self.last_bad = None;
                Some(WatchRecord::TemplateReloaded {
                    template_version: hash,
                    timestamp: now(),
                })
            }
            Err(err) => {
                self.last_bad = Some(hash);
                Some(WatchRecord::error(&err, Some(&self.path)))
            }
        }
    }
}

fn emit(log: &EventLog, sink: &mut impl FnMut(&WatchRecord), record: WatchRecord) {
    if let Err(err) = log.append(&record) {
        sink(&WatchRecord::error(&err, None));
    }
    sink(&record);
}

fn check_dirs(cfg: &WatchConfig) -> Result<(), AutotagError> {
    if !cfg.watch_dir.is_dir() {
        return Err(AutotagError::WatchSetup(format!(
            "{} is not a directory",
            cfg.watch_dir.display()
        )));
    }
    if !cfg.template_path.is_file() {
        return Err(AutotagError::WatchSetup(format!(
            "template {} not found",
            cfg.template_path.display()
        )));
    }
    Ok(())
}

fn candidate_files(cfg: &WatchConfig, filter: &FileFilter, dir: &Path) -> Vec<PathBuf> {
    let walker = WalkDir::new(dir).max_depth(if cfg.recursive { usize::MAX } else { 1 });
    let mut files: Vec<PathBuf> = walker
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .filter(|p| filter.accepts(p))
        .collect();
    files.sort();
    files
}

/// Tags every existing file that has no sidecar yet, then returns.
/// Files that are already tagged are skipped silently.
pub fn backfill(
    cfg: &WatchConfig,
    mut sink: impl FnMut(&WatchRecord),
) -> Result<Vec<TagEvent>, AutotagError> {
    check_dirs(cfg)?;
    let template = Template::load(&cfg.template_path)?;
    let filter = cfg.filter()?;
    let log = EventLog {
        path: cfg.log_path(),
    };
    let mut events = Vec::new();
    for path in candidate_files(cfg, &filter, &cfg.watch_dir) {
        if meta_path_for(&path).exists() {
            continue;
        }
        match write_sidecar(&path, &template) {
            Ok(event) => {
                events.push(event.clone());
                emit(&log, &mut sink, WatchRecord::Tagged(event));
            }
            Err(err) => emit(&log, &mut sink, WatchRecord::error(&err, Some(&path))),
        }
    }
    Ok(events)
}

struct Pending {
    size: u64,
    stable_since: Instant,
}

/// Watches `cfg.watch_dir` until `stop` becomes true.
///
/// A new file is tagged once its size has not changed for `quiescence_ms`.
/// The template file is re-read before every tag; a broken template is
/// logged and the last good one stays in use.
pub fn watch(
    cfg: &WatchConfig,
    stop: &AtomicBool,
    mut sink: impl FnMut(&WatchRecord),
) -> Result<(), AutotagError> {
    check_dirs(cfg)?;
    let mut template = TemplateSource::open(&cfg.template_path)?;
    let filter = cfg.filter()?;
    let log = EventLog {
        path: cfg.log_path(),
    };
    let root = cfg
        .watch_dir
        .canonicalize()
        .map_err(|e| AutotagError::WatchSetup(e.to_string()))?;

    let (tx, rx) = mpsc::channel();
    let mut watcher = notify::recommended_watcher(move |res: notify::Result<Event>| {
        let _ = tx.send(res);
    })
    .map_err(|e| AutotagError::WatchSetup(e.to_string()))?;
    let mode = if cfg.recursive {
        RecursiveMode::Recursive
    } else {
        RecursiveMode::NonRecursive
    };
    watcher
        .watch(&root, mode)
        .map_err(|e| AutotagError::WatchSetup(e.to_string()))?;

    let quiescence = Duration::from_millis(cfg.quiescence_ms);
    let tick = (quiescence / 4).clamp(Duration::from_millis(5), Duration::from_millis(100));
    let mut pending: BTreeMap<PathBuf, Pending> = BTreeMap::new();

    let track = |pending: &mut BTreeMap<PathBuf, Pending>, path: PathBuf| {
        if pending.contains_key(&path) || !filter.accepts(&path) {
            return;
        }
        if let Ok(md) = fs::metadata(&path) {
            if md.is_file() {
                pending.insert(
                    path,
                    Pending {
                        size: md.len(),
                        stable_since: Instant::now(),
                    },
                );
            }
        }
    };

    while !stop.load(Ordering::SeqCst) {
        let deadline = Instant::now() + tick;
        loop {
            let timeout = deadline.saturating_duration_since(Instant::now());
            let res = match rx.recv_timeout(timeout) {
                Ok(r) => r,
                Err(mpsc::RecvTimeoutError::Timeout) => break,
                Err(mpsc::RecvTimeoutError::Disconnected) => {
                    return Err(AutotagError::WatchSetup(
                        "notification source closed".into(),
                    ))
                }
            };
            let event = match res {
                Ok(e) => e,
                Err(e) => {
                    let err = AutotagError::WatchSetup(e.to_string());
                    emit(&log, &mut sink, WatchRecord::error(&err, None));
                    continue;
                }
            };
            let created: Vec<PathBuf> = match event.kind {
                EventKind::Create(_) => event.paths.clone(),
                EventKind::Modify(ModifyKind::Name(RenameMode::To)) => event.paths.clone(),
                EventKind::Modify(ModifyKind::Name(RenameMode::Both)) => {
                    event.paths.get(1).cloned().into_iter().collect()
                }
                _ => Vec::new(),
            };
            for path in created {
                if path.is_dir() {
                    // Files may land in a new directory before it is watched.
                    if cfg.recursive {
                        for f in candidate_files(cfg, &filter, &path) {
                            if !meta_path_for(&f).exists() {
                                track(&mut pending, f);
                            }
                        }
                    }
                } else {
                    track(&mut pending, path);
                }
            }
        }

        let now = Instant::now();
        let mut ready = Vec::new();
        let mut gone = Vec::new();
        for (path, p) in pending.iter_mut() {
            match fs::metadata(path) {
                Ok(md) if md.len() != p.size => {
                    p.size = md.len();
                    p.stable_since = now;
                }
                Ok(_) => {
                    if now.duration_since(p.stable_since) >= quiescence {
                        ready.push(path.clone());
                    }
                }
                Err(_) => gone.push(path.clone()),
            }
        }
        for path in gone {
            pending.remove(&path);
            emit(
                &log,
                &mut sink,
                WatchRecord::Cancelled {
                    path,
                    reason: "file disappeared before tagging".into(),
                    timestamp: self::now(),
                },
            );
        }
        for path in ready {
            pending.remove(&path);
            if let Some(record) = template.refresh() {
                emit(&log, &mut sink, record);
            }
            match write_sidecar(&path, &template.current) {
                Ok(event) => emit(&log, &mut sink, WatchRecord::Tagged(event)),
                Err(err) => emit(&log, &mut sink, WatchRecord::error(&err, Some(&path))),
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEMPLATE: &str = "# measurement template\nuser: Max Doe  # who\ncurrent: 5 mA\n";

    fn setup() -> (tempfile::TempDir, WatchConfig) {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("data");
        fs::create_dir(&data).unwrap();
        let template = dir.path().join("template.yaml");
        fs::write(&template, TEMPLATE).unwrap();
        let cfg = WatchConfig::new(&data, &template);
        (dir, cfg)
    }

    #[test]
    fn tags_with_verbatim_template() {
        let (_dir, cfg) = setup();
        let csv = cfg.watch_dir.join("data.csv");
        fs::write(&csv, "t,U\n").unwrap();
        let template = Template::load(&cfg.template_path).unwrap();
        let event = tag_file(&csv, &template, &cfg).unwrap();
        assert_eq!(event.meta_path, cfg.watch_dir.join("data.csv.meta.yaml"));
        assert_eq!(event.template_version, content_hash(TEMPLATE.as_bytes()));

        let content = fs::read_to_string(&event.meta_path).unwrap();
        let (head, block) = split_meta(&content).unwrap();
        assert_eq!(head, TEMPLATE);
        assert!(block.starts_with("autotag:\n"));
        let doc = MetadataDoc::from_yaml_str(&content, "meta").unwrap();
        assert_eq!(doc.get_path("user").unwrap(), &Node::from("Max Doe"));
        assert_eq!(
            doc.get_path("autotag.file").unwrap(),
            &Node::from("data.csv")
        );
        assert_eq!(
            doc.get_path("autotag.template_hash").unwrap(),
            &Node::from(event.template_version.as_str())
        );

        // Never overwrite, even after the data file is gone.
        fs::remove_file(&csv).unwrap();
        fs::write(&csv, "t,U\n").unwrap();
        assert!(matches!(
            tag_file(&csv, &template, &cfg),
            Err(AutotagError::AlreadyTagged(_))
        ));
    }

    #[test]
    fn meta_files_are_never_tagged() {
        let (_dir, mut cfg) = setup();
        cfg.exclude_globs.clear();
        let template = Template::load(&cfg.template_path).unwrap();
        let meta = cfg.watch_dir.join("data.csv.meta.yaml");
        fs::write(&meta, "user: x\n").unwrap();
        assert!(matches!(
            tag_file(&meta, &template, &cfg),
            Err(AutotagError::Excluded(_))
        ));
        assert!(!cfg.watch_dir.join("data.csv.meta.yaml.meta.yaml").exists());
    }

    #[test]
    fn filter_globs() {
        let (_dir, mut cfg) = setup();
        cfg.include_globs = vec!["*.csv".into()];
        cfg.exclude_globs = vec!["skip*".into()];
        let f = cfg.filter().unwrap();
        assert!(f.accepts(&cfg.watch_dir.join("a.csv")));
        assert!(f.accepts(&cfg.watch_dir.join("sub/a.csv")));
        assert!(!f.accepts(&cfg.watch_dir.join("a.txt")));
        assert!(!f.accepts(&cfg.watch_dir.join("skip.csv")));
        assert!(!f.accepts(&cfg.watch_dir.join("a.csv.meta.yaml")));
        cfg.include_globs = vec!["*".into()];
        let f = cfg.filter().unwrap();
        assert!(!f.accepts(&cfg.log_path()));
        cfg.include_globs = vec!["[".into()];
        assert!(matches!(cfg.filter(), Err(AutotagError::InvalidGlob(_))));
    }

    #[test]
    fn template_checks() {
        assert!(Template::from_text("").is_ok());
        assert!(Template::from_text("a: 1").is_ok());
        assert!(matches!(
            Template::from_text("autotag: 1\n"),
            Err(AutotagError::TemplateInvalid(_))
        ));
        assert!(matches!(
            Template::from_text("- a\n- b\n"),
            Err(AutotagError::TemplateInvalid(_))
        ));
        assert!(matches!(
            Template::from_text("{a: 1}"),
            Err(AutotagError::TemplateInvalid(_))
        ));
        assert!(matches!(
            Template::from_text("a: [1"),
            Err(AutotagError::TemplateParse(_))
        ));
    }

    #[test]
    fn backfill_is_idempotent() {
        let (_dir, cfg) = setup();
        fs::write(cfg.watch_dir.join("a.csv"), "x").unwrap();
        fs::create_dir(cfg.watch_dir.join("sub")).unwrap();
        fs::write(cfg.watch_dir.join("sub/b.csv"), "y").unwrap();
        let mut records = Vec::new();
        let events = backfill(&cfg, |r| records.push(r.clone())).unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(records.len(), 2);
        assert!(cfg.watch_dir.join("sub/b.csv.meta.yaml").exists());
        assert!(backfill(&cfg, |_| {}).unwrap().is_empty());

        let log = fs::read_to_string(cfg.log_path()).unwrap();
        assert_eq!(log.lines().count(), 2);
        for line in log.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert_eq!(v["event"], "tagged");
        }
    }
}

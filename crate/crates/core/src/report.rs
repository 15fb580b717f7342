//! Static report pages for a collection: an index, optional group pages,
//! one page per entry and an SVG plot per entry.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::collection::Collection;
use crate::datapackage::Entry;
use crate::metadata::{get_path, Node};
use crate::tabular::Cell;

pub const PREVIEW_ROWS: usize = 10;
pub const MISSING: &str = "—";

const WIDTH: f64 = 400.0;
const HEIGHT: f64 = 300.0;
const MARGIN: f64 = 0.05;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("need at least 2 points to plot, found {0}")]
    TooFewPoints(usize),
    #[error("field `{field}` row {row}: cell is not numeric")]
    NonNumericCell { field: String, row: usize },
    #[error("invalid report configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ReportError {
    pub fn code(&self) -> &'static str {
        match self {
            ReportError::UnknownField(_) => "UNKNOWN_FIELD",
            ReportError::TooFewPoints(_) => "TOO_FEW_POINTS",
            ReportError::NonNumericCell { .. } => "NON_NUMERIC_CELL",
            ReportError::InvalidConfig(_) => "INVALID_CONFIG",
            ReportError::Io { .. } => "IO_ERROR",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Markdown,
    Html,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Markdown => "md",
            ReportFormat::Html => "html",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "html" => Ok(ReportFormat::Html),
            other => Err(ReportError::InvalidConfig(format!(
                "unknown format `{other}` (expected markdown or html)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportConfig {
    pub out_dir: PathBuf,
    pub plot_x: String,
    pub plot_y: String,
    pub group_by: Option<String>,
    /// (label, dot-path) pairs shown in overview tables.
    pub descriptor_columns: Vec<(String, String)>,
    pub format: ReportFormat,
}

impl ReportConfig {
    pub fn new(out_dir: impl Into<PathBuf>, plot_x: &str, plot_y: &str) -> Self {
        ReportConfig {
            out_dir: out_dir.into(),
            plot_x: plot_x.to_string(),
            plot_y: plot_y.to_string(),
            group_by: None,
            descriptor_columns: Vec::new(),
            format: ReportFormat::Markdown,
        }
    }

    pub fn check(&self) -> Result<(), ReportError> {
        if self.plot_x == self.plot_y {
            return Err(ReportError::InvalidConfig(
                "x and y must be different fields".into(),
            ));
        }
        Ok(())
    }
}

fn axis_label(entry: &Entry, field: &str) -> String {
    match entry.field_unit(field) {
        Some(unit) => format!("{field} [{unit}]"),
        None => field.to_string(),
    }
}

fn numeric_column(entry: &Entry, field: &str) -> Result<Vec<Option<f64>>, ReportError> {
    let cells = entry
        .table()
        .column(field)
        .ok_or_else(|| ReportError::UnknownField(field.to_string()))?;
    cells
        .enumerate()
        .map(|(row, cell)| match cell {
            Cell::Number(v) if v.is_finite() => Ok(Some(*v)),
            Cell::Null => Ok(None),
            _ => Err(ReportError::NonNumericCell {
                field: field.to_string(),
                row,
            }),
        })
        .collect()
}

/// Maps `v` from `[min, max]` onto `[offset, offset + span]`.
/// A zero range maps to the middle.
pub fn map_linear(v: f64, min: f64, max: f64, offset: f64, span: f64) -> f64 {
    if max == min {
        offset + span / 2.0
    } else {
        offset + (v - min) / (max - min) * span
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

/// Points of the polyline in viewport coordinates (y grows downwards).
pub fn plot_points(entry: &Entry, x: &str, y: &str) -> Result<Vec<(f64, f64)>, ReportError> {
    let xs = numeric_column(entry, x)?;
    let ys = numeric_column(entry, y)?;
    let points: Vec<(f64, f64)> = xs
        .into_iter()
        .zip(ys)
        .filter_map(|(a, b)| Some((a?, b?)))
        .collect();
    if points.len() < 2 {
        return Err(ReportError::TooFewPoints(points.len()));
    }
    let (xmin, xmax) = bounds(points.iter().map(|p| p.0));
    let (ymin, ymax) = bounds(points.iter().map(|p| p.1));
    let (mx, my) = (WIDTH * MARGIN, HEIGHT * MARGIN);
    let (pw, ph) = (WIDTH - 2.0 * mx, HEIGHT - 2.0 * my);
    Ok(points
        .iter()
        .map(|&(px, py)| {
            (
                map_linear(px, xmin, xmax, mx, pw),
                // Larger values sit higher up.
                HEIGHT - map_linear(py, ymin, ymax, my, ph),
            )
        })
        .collect())
}

/// Standalone SVG with one polyline of `y` against `x`.
pub fn render_plot(entry: &Entry, x: &str, y: &str) -> Result<String, ReportError> {
    let points = plot_points(entry, x, y)?;
    let coords: Vec<String> = points
        .iter()
        .map(|(a, b)| format!("{a:.2},{b:.2}"))
        .collect();
    let (mx, my) = (WIDTH * MARGIN, HEIGHT * MARGIN);
    let mut svg = String::new();
    svg.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" width=\"{WIDTH}\" height=\"{HEIGHT}\">"
    );
    let _ = writeln!(
        svg,
        "<rect x=\"{mx}\" y=\"{my}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#cccccc\"/>",
        WIDTH - 2.0 * mx,
        HEIGHT - 2.0 * my
    );
    let _ = writeln!(
        svg,
        "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"{}\"/>",
        coords.join(" ")
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{}</text>",
        WIDTH / 2.0,
        HEIGHT - 3.0,
        escape_html(&axis_label(entry, x))
    );
    let (lx, ly) = (mx / 2.0 + 4.0, HEIGHT / 2.0);
    let _ = writeln!(
        svg,
        "<text x=\"{lx}\" y=\"{ly}\" font-size=\"11\" text-anchor=\"middle\" transform=\"rotate(-90 {lx} {ly})\">{}</text>",
        escape_html(&axis_label(entry, y))
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn escape_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

fn escape_md(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars().peekable();
    while let Some(c) = chars.next() {
        // Brackets only matter when they could close a link: `](`.
        let link_close = c == ']' && chars.peek() == Some(&'(');
        if link_close || matches!(c, '\\' | '*' | '_' | '<' | '>' | '|' | '`') {
            out.push('\\');
        }
        if c == '\n' {
            out.push(' ');
        } else {
            out.push(c);
        }
    }
    out
}

// Pages are assembled from a few blocks and rendered to either format.

#[derive(Debug, Clone)]
enum Inline {
    Text(String),
    Link { text: String, href: String },
    Image { alt: String, src: String },
}

#[derive(Debug, Clone)]
enum Block {
    Heading(usize, String),
    Para(Vec<Inline>),
    Table {
        header: Vec<String>,
        rows: Vec<Vec<Inline>>,
    },
    Svg(String),
    Tree(Node),
}

fn text(s: impl Into<String>) -> Inline {
    Inline::Text(s.into())
}

fn inline_md(inline: &Inline) -> String {
    match inline {
        Inline::Text(s) => escape_md(s),
        Inline::Link { text, href } => format!("[{}]({href})", escape_md(text)),
        Inline::Image { alt, src } => format!("![{}]({src})", escape_md(alt)),
    }
}

fn inline_html(inline: &Inline) -> String {
    match inline {
        Inline::Text(s) => escape_html(s),
        Inline::Link { text, href } => {
            format!(
                "<a href=\"{}\">{}</a>",
                escape_html(href),
                escape_html(text)
            )
        }
        Inline::Image { alt, src } => {
            format!(
                "<img src=\"{}\" alt=\"{}\" width=\"160\">",
                escape_html(src),
                escape_html(alt)
            )
        }
    }
}

fn tree_md(node: &Node, depth: usize, out: &mut String) {
    let indent = "  ".repeat(depth);
    let item = |label: String, value: &Node, out: &mut String| match value.canonical_scalar() {
        Some(s) => {
            let _ = writeln!(out, "{indent}- {label}: {}", escape_md(&s));
        }
        None => {
            let _ = writeln!(out, "{indent}- {label}");
            tree_md(value, depth + 1, out);
        }
    };
    match node {
        Node::Map(map) => {
            for (k, v) in map {
                item(format!("**{}**", escape_md(k)), v, out);
            }
        }
        Node::Seq(items) => {
            for (i, v) in items.iter().enumerate() {
                item(format!("[{i}]"), v, out);
            }
        }
        scalar => {
            let _ = writeln!(out, "{indent}- {}", escape_md(&scalar.to_string()));
        }
    }
}

fn tree_html(node: &Node, out: &mut String) {
    let entries: Vec<(String, &Node)> = match node {
        Node::Map(map) => map.iter().map(|(k, v)| (k.clone(), v)).collect(),
        Node::Seq(items) => items
            .iter()
            .enumerate()
            .map(|(i, v)| (format!("[{i}]"), v))
            .collect(),
        scalar => {
            out.push_str(&escape_html(&scalar.to_string()));
            return;
        }
    };
    out.push_str("<dl>\n");
    for (k, v) in entries {
        let _ = write!(out, "<dt>{}</dt><dd>", escape_html(&k));
        match v.canonical_scalar() {
            Some(s) => out.push_str(&escape_html(&s)),
            None => {
                out.push('\n');
                tree_html(v, out);
            }
        }
        out.push_str("</dd>\n");
    }
    out.push_str("</dl>\n");
}

fn render_markdown(blocks: &[Block]) -> String {
    let mut out = String::new();
    for block in blocks {
        if !out.is_empty() {
            out.push('\n');
        }
        match block {
            Block::Heading(level, s) => {
                let _ = writeln!(out, "{} {}", "#".repeat(*level), escape_md(s));
            }
            Block::Para(inlines) => {
                let line: String = inlines.iter().map(inline_md).collect();
                let _ = writeln!(out, "{line}");
            }
            Block::Table { header, rows } => {
                let cells: Vec<String> = header.iter().map(|h| escape_md(h)).collect();
                let _ = writeln!(out, "| {} |", cells.join(" | "));
                let _ = writeln!(out, "|{}", " --- |".repeat(header.len()));
                for row in rows {
                    let cells: Vec<String> = row.iter().map(inline_md).collect();
                    let _ = writeln!(out, "| {} |", cells.join(" | "));
                }
            }
            Block::Svg(svg) => {
                out.push_str(svg);
            }
            Block::Tree(node) => tree_md(node, 0, &mut out),
        }
    }
    out
}

fn render_html(title: &str, blocks: &[Block]) -> String {
    let mut out = String::new();
    out.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n");
    let _ = writeln!(out, "<title>{}</title>", escape_html(title));
    out.push_str(
        "<style>table{border-collapse:collapse}th,td{border:1px solid #ccc;padding:2px 6px}</style>\n",
    );
    out.push_str("</head>\n<body>\n");
    for block in blocks {
        match block {
            Block::Heading(level, s) => {
                let _ = writeln!(out, "<h{level}>{}</h{level}>", escape_html(s));
            }
            Block::Para(inlines) => {
                let line: String = inlines.iter().map(inline_html).collect();
                let _ = writeln!(out, "<p>{line}</p>");
            }
            Block::Table { header, rows } => {
                out.push_str("<table>\n<tr>");
                for h in header {
                    let _ = write!(out, "<th>{}</th>", escape_html(h));
                }
                out.push_str("</tr>\n");
                for row in rows {
                    out.push_str("<tr>");
                    for cell in row {
                        let _ = write!(out, "<td>{}</td>", inline_html(cell));
                    }
                    out.push_str("</tr>\n");
                }
                out.push_str("</table>\n");
            }
            Block::Svg(svg) => out.push_str(svg),
            Block::Tree(node) => tree_html(node, &mut out),
        }
    }
    out.push_str("</body>\n</html>\n");
    out
}

fn render_page(format: ReportFormat, title: &str, blocks: &[Block]) -> String {
    match format {
        ReportFormat::Markdown => render_markdown(blocks),
        ReportFormat::Html => render_html(title, blocks),
    }
}

fn descriptor_value(entry: &Entry, path: &str) -> String {
    match get_path(&entry.metadata().root, path) {
        Ok(node) => node.to_string(),
        Err(_) => MISSING.to_string(),
    }
}

fn inline_svg(svg: &str) -> String {
    svg.strip_prefix("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n")
        .unwrap_or(svg)
        .to_string()
}

fn entry_blocks(entry: &Entry, cfg: &ReportConfig, back: Option<(&str, &str)>) -> Vec<Block> {
    let mut blocks = vec![Block::Heading(1, entry.identifier().to_string())];
    if let Some((label, href)) = back {
        blocks.push(Block::Para(vec![Inline::Link {
            text: label.to_string(),
            href: href.to_string(),
        }]));
    }

    blocks.push(Block::Table {
        header: vec!["Descriptor".into(), "Value".into()],
        rows: cfg
            .descriptor_columns
            .iter()
            .map(|(label, path)| vec![text(label.as_str()), text(descriptor_value(entry, path))])
            .collect(),
    });

    blocks.push(Block::Heading(2, "Plot".into()));
    match render_plot(entry, &cfg.plot_x, &cfg.plot_y) {
        Ok(svg) => blocks.push(Block::Svg(inline_svg(&svg))),
        Err(err) => blocks.push(Block::Para(vec![text(format!(
            "no plot available ({err})"
        ))])),
    }

    let table = entry.table();
    blocks.push(Block::Heading(2, "Data preview".into()));
    blocks.push(Block::Para(vec![text(format!(
        "First {} of {} rows.",
        table.row_count().min(PREVIEW_ROWS),
        table.row_count()
    ))]));
    blocks.push(Block::Table {
        header: entry
            .fields()
            .iter()
            .map(|f| axis_label(entry, &f.name))
            .collect(),
        rows: table
            .rows()
            .iter()
            .take(PREVIEW_ROWS)
            .map(|row| row.iter().map(|c| text(c.to_string())).collect())
            .collect(),
    });

    blocks.push(Block::Heading(2, "Metadata".into()));
    blocks.push(Block::Tree(entry.metadata().root.clone()));
    blocks
}

/// One entry page. Plot failures become a placeholder, never an error.
pub fn render_entry_page(entry: &Entry, cfg: &ReportConfig) -> String {
    render_page(
        cfg.format,
        entry.identifier(),
        &entry_blocks(entry, cfg, None),
    )
}

fn group_value(entry: &Entry, path: &str) -> Option<String> {
    get_path(&entry.metadata().root, path)
        .ok()
        .map(|n| n.to_string())
}

fn slug(value: &str) -> String {
    let s: String = value
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '-'
            }
        })
        .collect();
    let s = s.trim_matches('-').to_string();
    if s.is_empty() {
        "group".into()
    } else {
        s
    }
}

fn overview_table(
    entries: &[&Entry],
    cfg: &ReportConfig,
    plots: &BTreeSet<String>,
    prefix: &str,
) -> Block {
    let ext = cfg.format.extension();
    let mut header = vec!["Plot".to_string()];
    header.extend(cfg.descriptor_columns.iter().map(|(l, _)| l.clone()));
    header.push("Entry".into());
    let rows = entries
        .iter()
        .map(|e| {
            let id = e.identifier();
            let mut row = vec![if plots.contains(id) {
                Inline::Image {
                    alt: id.to_string(),
                    src: format!("{prefix}plots/{id}.svg"),
                }
            } else {
                text(MISSING)
            }];
            row.extend(
                cfg.descriptor_columns
                    .iter()
                    .map(|(_, p)| text(descriptor_value(e, p))),
            );
            row.push(Inline::Link {
                text: id.to_string(),
                href: format!("{prefix}entries/{id}.{ext}"),
            });
            row
        })
        .collect();
    Block::Table { header, rows }
}

/// All report files keyed by their path relative to the output directory.
pub fn build_report(
    collection: &Collection,
    cfg: &ReportConfig,
) -> Result<BTreeMap<PathBuf, String>, ReportError> {
    cfg.check()?;
    let ext = cfg.format.extension();
    let mut files = BTreeMap::new();
    let mut plots = BTreeSet::new();

    for entry in collection.iter() {
        let id = entry.identifier();
        if let Ok(svg) = render_plot(entry, &cfg.plot_x, &cfg.plot_y) {
            files.insert(PathBuf::from(format!("plots/{id}.svg")), svg);
            plots.insert(id.to_string());
        }
        let back = format!("../index.{ext}");
        let blocks = entry_blocks(entry, cfg, Some(("Back to index", &back)));
        files.insert(
            PathBuf::from(format!("entries/{id}.{ext}")),
            render_page(cfg.format, id, &blocks),
        );
    }

    let entries: Vec<&Entry> = collection.iter().collect();
    let mut index = vec![
        Block::Heading(1, "Report".into()),
        Block::Para(vec![text(format!("{} entries.", entries.len()))]),
    ];

    match &cfg.group_by {
        None => {
            if !entries.is_empty() {
                index.push(overview_table(&entries, cfg, &plots, ""));
            }
        }
        Some(path) => {
            let mut groups: BTreeMap<Option<String>, Vec<&Entry>> = BTreeMap::new();
            for e in &entries {
                groups.entry(group_value(e, path)).or_default().push(e);
            }
            let mut used = BTreeSet::new();
            let mut rows = Vec::new();
            for (value, members) in &groups {
                let label = value.clone().unwrap_or_else(|| MISSING.to_string());
                let base = value.as_deref().map_or("ungrouped".to_string(), slug);
                let mut name = base.clone();
                let mut n = 2;
                while !used.insert(name.clone()) {
                    name = format!("{base}-{n}");
                    n += 1;
                }
                let blocks = vec![
                    Block::Heading(1, format!("{path}: {label}")),
                    Block::Para(vec![Inline::Link {
                        text: "Back to index".into(),
                        href: format!("../index.{ext}"),
                    }]),
                    Block::Para(vec![text(format!("{} entries.", members.len()))]),
                    overview_table(members, cfg, &plots, "../"),
                ];
                files.insert(
                    PathBuf::from(format!("groups/{name}.{ext}")),
                    render_page(cfg.format, &label, &blocks),
                );
                rows.push(vec![
                    Inline::Link {
                        text: label,
                        href: format!("groups/{name}.{ext}"),
                    },
                    text(members.len().to_string()),
                ]);
            }
            if !rows.is_empty() {
                index.push(Block::Table {
                    header: vec![path.clone(), "Entries".into()],
                    rows,
                });
            }
        }
    }
    files.insert(
        PathBuf::from(format!("index.{ext}")),
        render_page(cfg.format, "Report", &index),
    );
    Ok(files)
}

/// Writes the report under `cfg.out_dir` and returns the written paths.
pub fn render_index(
    collection: &Collection,
    cfg: &ReportConfig,
) -> Result<Vec<PathBuf>, ReportError> {
    let files = build_report(collection, cfg)?;
    let mut written = Vec::with_capacity(files.len());
    for (rel, content) in files {
        let path = cfg.out_dir.join(&rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|source| ReportError::Io {
                path: parent.display().to_string(),
                source,
            })?;
        }
        fs::write(&path, content).map_err(|source| ReportError::Io {
            path: path.display().to_string(),
            source,
        })?;
        written.push(path);
    }
    Ok(written)
}

/// Relative link targets in a page: markdown `](...)` and html `href`/`src`.
pub fn page_links(content: &str) -> Vec<String> {
    let mut links = Vec::new();
    for (open, close) in [("](", ')'), ("href=\"", '"'), ("src=\"", '"')] {
        let mut rest = content;
        while let Some(at) = rest.find(open) {
            rest = &rest[at + open.len()..];
            if let Some(end) = rest.find(close) {
                links.push(rest[..end].to_string());
            }
        }
    }
    links.retain(|l| !l.contains("://") && !l.starts_with('#'));
    links
}

/// Pages under `dir` whose relative links do not resolve: (page, link).
pub fn broken_links(dir: &Path) -> Result<Vec<(PathBuf, String)>, ReportError> {
    let mut broken = Vec::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| ReportError::Io {
            path: dir.display().to_string(),
            source: e.into(),
        })?;
        let path = entry.path();
        let is_page = matches!(
            path.extension().and_then(|e| e.to_str()),
            Some("md" | "html")
        );
        if !entry.file_type().is_file() || !is_page {
            continue;
        }
        let content = fs::read_to_string(path).map_err(|source| ReportError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().unwrap_or(dir);
        for link in page_links(&content) {
            if !base.join(&link).is_file() {
                broken.push((path.to_path_buf(), link));
            }
        }
    }
    Ok(broken)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datapackage::{FieldSpec, FieldType};
    use crate::metadata::MetadataDoc;
    use crate::tabular::Table;

    fn field(name: &str, unit: Option<&str>) -> FieldSpec {
        FieldSpec {
            name: name.into(),
            field_type: FieldType::Number,
            unit: unit.map(str::to_string),
            description: None,
        }
    }

    fn entry(id: &str, rows: Vec<Vec<Cell>>, meta: &str) -> Entry {
        let table = Table::new(vec!["t".into(), "U".into(), "T".into()], rows).unwrap();
        let mut fields = vec![
            field("t", Some("s")),
            field("U", Some("mV")),
            field("T", Some("K")),
        ];
        for (i, f) in fields.iter_mut().enumerate() {
            if table.rows().iter().any(|r| matches!(r[i], Cell::Text(_))) {
                f.field_type = FieldType::String;
            }
        }
        Entry::new(
            id,
            fields,
            table,
            MetadataDoc::from_yaml_str(meta, "meta").unwrap(),
        )
        .unwrap()
    }

    fn num(v: &[f64]) -> Vec<Cell> {
        v.iter().map(|x| Cell::Number(*x)).collect()
    }

    fn fig2() -> Entry {
        entry(
            "data",
            vec![
                num(&[0.0, 1.01, 275.0]),
                num(&[0.1, 1.02, 275.0]),
                num(&[0.2, 1.05, 275.0]),
            ],
            "user: Max Doe\nelectrode:\n  material: Pt\n",
        )
    }

    fn polyline(svg: &str) -> Vec<(f64, f64)> {
        let at = svg.find("points=\"").unwrap() + 8;
        let end = at + svg[at..].find('"').unwrap();
        svg[at..end]
            .split(' ')
            .map(|p| {
                let (a, b) = p.split_once(',').unwrap();
                (a.parse().unwrap(), b.parse().unwrap())
            })
            .collect()
    }

    #[test]
    fn plot_mapping() {
        let svg = render_plot(&fig2(), "t", "U").unwrap();
        assert!(svg.contains(">U [mV]</text>"));
        assert!(svg.contains(">t [s]</text>"));
        assert!(svg.contains("viewBox=\"0 0 400 300\""));
        let pts = polyline(&svg);
        // x: 20 + t/0.2*360; y: 300 - (15 + (U-1.01)/0.04*270)
        let expected = [(20.0, 285.0), (200.0, 217.5), (380.0, 15.0)];
        assert_eq!(pts.len(), 3);
        for (p, e) in pts.iter().zip(expected) {
            assert!(
                (p.0 - e.0).abs() < 0.006 && (p.1 - e.1).abs() < 0.006,
                "{p:?} vs {e:?}"
            );
        }
        assert_eq!(svg, render_plot(&fig2(), "t", "U").unwrap());
    }

    #[test]
    fn constant_y_is_midline() {
        let svg = render_plot(&fig2(), "t", "T").unwrap();
        assert!(polyline(&svg).iter().all(|p| p.1 == 150.0));
    }

    #[test]
    fn plot_errors() {
        let e = fig2();
        assert!(matches!(
            render_plot(&e, "t", "X"),
            Err(ReportError::UnknownField(_))
        ));
        let one = entry("one", vec![num(&[0.0, 1.0, 2.0])], "{}");
        assert!(matches!(
            render_plot(&one, "t", "U"),
            Err(ReportError::TooFewPoints(1))
        ));
        let text = entry(
            "text",
            vec![
                vec![Cell::Text("a".into()), Cell::Number(1.0), Cell::Number(1.0)],
                num(&[0.0, 1.0, 2.0]),
            ],
            "{}",
        );
        assert!(matches!(
            render_plot(&text, "t", "U"),
            Err(ReportError::NonNumericCell { row: 0, .. })
        ));
        let page = render_entry_page(&text, &ReportConfig::new("out", "t", "U"));
        assert!(page.contains("no plot available"));
    }

    #[test]
    fn entry_page_sections() {
        let mut cfg = ReportConfig::new("out", "t", "U");
        cfg.descriptor_columns = vec![
            ("material".into(), "electrode.material".into()),
            ("journal".into(), "source.journal".into()),
        ];
        let page = render_entry_page(&fig2(), &cfg);
        assert!(page.starts_with("# data\n"));
        assert!(page.contains("| t [s] | U [mV] | T [K] |"));
        assert!(page.contains("| material | Pt |"));
        assert!(page.contains("| journal | — |"));
        assert!(page.contains("<polyline"));
        assert!(page.contains("- **user**: Max Doe"));
        assert!(page.contains("- **electrode**\n  - **material**: Pt"));
    }

    #[test]
    fn preview_is_capped() {
        let rows = (0..25).map(|i| num(&[i as f64, 1.0, 2.0])).collect();
        let e = entry("long", rows, "{}");
        let page = render_entry_page(&e, &ReportConfig::new("out", "t", "U"));
        assert!(page.contains("First 10 of 25 rows."));
        assert!(page.contains("| 9 | 1 | 2 |"));
        assert!(!page.contains("| 10 | 1 | 2 |"));
    }

    #[test]
    fn grouped_report_files() {
        let c = Collection::from_entries([
            fig2(),
            entry(
                "b",
                vec![num(&[0., 1., 2.]), num(&[1., 2., 3.])],
                "electrode: {material: Pt}",
            ),
            entry(
                "c",
                vec![num(&[0., 1., 2.]), num(&[1., 2., 3.])],
                "electrode: {material: Au}",
            ),
        ])
        .unwrap();
        let mut cfg = ReportConfig::new("out", "t", "U");
        cfg.group_by = Some("electrode.material".into());
        let files = build_report(&c, &cfg).unwrap();
        let names: Vec<String> = files.keys().map(|p| p.display().to_string()).collect();
        assert_eq!(
            names,
            [
                "entries/b.md",
                "entries/c.md",
                "entries/data.md",
                "groups/au.md",
                "groups/pt.md",
                "index.md",
                "plots/b.svg",
                "plots/c.svg",
                "plots/data.svg"
            ]
        );
        let pt = &files[Path::new("groups/pt.md")];
        assert!(pt.contains("](../entries/b.md)") && pt.contains("](../entries/data.md)"));
        assert!(!pt.contains("entries/c.md"));

        let dir = tempfile::tempdir().unwrap();
        cfg.out_dir = dir.path().to_path_buf();
        cfg.format = ReportFormat::Html;
        render_index(&c, &cfg).unwrap();
        assert!(dir.path().join("groups/au.html").is_file());
        assert!(broken_links(dir.path()).unwrap().is_empty());
    }

    #[test]
    fn empty_collection() {
        let c = Collection::from_entries(Vec::new()).unwrap();
        let files = build_report(&c, &ReportConfig::new("out", "t", "U")).unwrap();
        assert_eq!(files.len(), 1);
        assert!(files[Path::new("index.md")].contains("0 entries."));
        let same = ReportConfig::new("out", "t", "t");
        assert!(matches!(
            build_report(&c, &same),
            Err(ReportError::InvalidConfig(_))
        ));
    }
}

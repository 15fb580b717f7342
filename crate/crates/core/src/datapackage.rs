//! Single-resource data packages: one CSV, a field schema with units and the
//! full metadata document, stored as `<identifier>.csv` + `<identifier>.json`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metadata::{MetadataDoc, MetadataError, Node};
use crate::tabular::{self, Cell, Table, TableError};
use crate::units::{apply_factor, conversion_factor, parse_unit, Quantity, UnitError, UnitExpr};

/// Where `build_entry` looks for field specs unless told otherwise.
pub const DEFAULT_FIELDS_PATH: &str = "figure_description.fields";

#[derive(Debug, Error)]
pub enum PackageError {
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Metadata(#[from] MetadataError),
    #[error("invalid identifier from `{0}`: must be non-empty, lowercase, without `.` or path separators")]
    InvalidIdentifier(String),
    #[error("field spec names column `{0}` which is not in the CSV")]
    FieldSpecUnknownColumn(String),
    #[error("field `{field}`: invalid unit: {source}")]
    InvalidUnit {
        field: String,
        #[source]
        source: UnitError,
    },
    #[error("invalid field spec: {0}")]
    InvalidFieldSpec(String),
    #[error("field `{field}` declared as {declared} but holds other values")]
    FieldTypeMismatch { field: String, declared: FieldType },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("refusing to overwrite existing {0}")]
    RefusedOverwrite(String),
    #[error("{path}: bad package descriptor: {reason}")]
    DescriptorParse { path: String, reason: String },
    #[error("schema fields {schema:?} do not match CSV columns {columns:?}")]
    SchemaTableMismatch {
        schema: Vec<String>,
        columns: Vec<String>,
    },
    #[error("data file {0} not found")]
    MissingCsv(String),
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("field `{0}` has no unit")]
    FieldHasNoUnit(String),
    #[error("field `{field}`: {source}")]
    DimensionMismatch {
        field: String,
        #[source]
        source: UnitError,
    },
    #[error("field `{field}` row {row}: cell is not numeric")]
    NonNumericCell { field: String, row: usize },
    #[error("field `{0}` has no values")]
    EmptyColumn(String),
    #[error("`{path}` is not a quantity: {reason}")]
    NotAQuantity { path: String, reason: String },
}

impl PackageError {
    pub fn code(&self) -> &'static str {
        match self {
            PackageError::Table(e) => e.code(),
            PackageError::Metadata(e) => e.code(),
            PackageError::InvalidIdentifier(_) => "INVALID_IDENTIFIER",
            PackageError::FieldSpecUnknownColumn(_) => "FIELD_SPEC_UNKNOWN_COLUMN",
            PackageError::InvalidUnit { .. } => "INVALID_UNIT",
            PackageError::InvalidFieldSpec(_) => "INVALID_FIELD_SPEC",
            PackageError::FieldTypeMismatch { .. } => "FIELD_TYPE_MISMATCH",
            PackageError::Io { .. } => "IO_ERROR",
            PackageError::RefusedOverwrite(_) => "REFUSED_OVERWRITE",
            PackageError::DescriptorParse { .. } => "DESCRIPTOR_PARSE_ERROR",
            PackageError::SchemaTableMismatch { .. } => "SCHEMA_TABLE_MISMATCH",
            PackageError::MissingCsv(_) => "MISSING_CSV",
            PackageError::UnknownField(_) => "UNKNOWN_FIELD",
            PackageError::FieldHasNoUnit(_) => "FIELD_HAS_NO_UNIT",
            PackageError::DimensionMismatch { .. } => "DIMENSION_MISMATCH",
            PackageError::NonNumericCell { .. } => "NON_NUMERIC_CELL",
            PackageError::EmptyColumn(_) => "EMPTY_COLUMN",
            PackageError::NotAQuantity { .. } => "NOT_A_QUANTITY",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldType {
    Number,
    Integer,
    String,
}

impl FieldType {
    fn parse(s: &str) -> Option<FieldType> {
        match s {
            "number" => Some(FieldType::Number),
            "integer" => Some(FieldType::Integer),
            "string" => Some(FieldType::String),
            _ => None,
        }
    }

    fn admits(self, cell: &Cell) -> bool {
        match (self, cell) {
            (_, Cell::Null) | (FieldType::String, _) => true,
            (FieldType::Number, Cell::Number(_)) => true,
            (FieldType::Integer, Cell::Number(v)) => v.fract() == 0.0,
            _ => false,
        }
    }
}

impl fmt::Display for FieldType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FieldType::Number => "number",
            FieldType::Integer => "integer",
            FieldType::String => "string",
        })
    }
}

/// Description of one column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub field_type: FieldType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

impl FieldSpec {
    pub fn unit_expr(&self) -> Result<Option<UnitExpr>, PackageError> {
        self.unit
            .as_deref()
            .map(|u| {
                parse_unit(u).map_err(|source| PackageError::InvalidUnit {
                    field: self.name.clone(),
                    source,
                })
            })
            .transpose()
    }
}

/// Lowercased file name without its final extension.
pub fn identifier_from_path(path: impl AsRef<Path>) -> Result<String, PackageError> {
    let path = path.as_ref();
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default()
        .to_lowercase();
    check_identifier(&stem)
        .map(|_| stem)
        .map_err(|_| PackageError::InvalidIdentifier(path.display().to_string()))
}

fn check_identifier(id: &str) -> Result<(), PackageError> {
    let ok = !id.is_empty()
        && id.to_lowercase() == id
        && !id.contains(['.', '/', '\\'])
        && !id.chars().any(char::is_control);
    if ok {
        Ok(())
    } else {
        Err(PackageError::InvalidIdentifier(id.to_string()))
    }
}

/// A data package with exactly one tabular resource.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    identifier: String,
    fields: Vec<FieldSpec>,
    table: Table,
    metadata: MetadataDoc,
}

impl fmt::Display for Entry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Entry('{}')", self.identifier)
    }
}

impl Entry {
    /// Assembles an entry, checking the identifier, that field names match
    /// the table columns in order, that units parse and types admit the cells.
    pub fn new(
        identifier: impl Into<String>,
        fields: Vec<FieldSpec>,
        table: Table,
        metadata: MetadataDoc,
    ) -> Result<Self, PackageError> {
        let identifier = identifier.into();
        check_identifier(&identifier)?;
        let names: Vec<&str> = fields.iter().map(|f| f.name.as_str()).collect();
        if names != table.columns() {
            return Err(PackageError::SchemaTableMismatch {
                schema: names.iter().map(|s| s.to_string()).collect(),
                columns: table.columns().to_vec(),
            });
        }
        for (i, field) in fields.iter().enumerate() {
            field.unit_expr()?;
            if !table.rows().iter().all(|r| field.field_type.admits(&r[i])) {
                return Err(PackageError::FieldTypeMismatch {
                    field: field.name.clone(),
                    declared: field.field_type,
                });
            }
        }
        Ok(Entry {
            identifier,
            fields,
            table,
            metadata,
        })
    }

    /// Builds an entry from a table plus the field specs found at
    /// `fields_path` in `metadata`. Columns without a spec are inferred.
    pub fn from_table(
        identifier: impl Into<String>,
        table: Table,
        metadata: MetadataDoc,
        fields_path: &str,
    ) -> Result<Self, PackageError> {
        let specs = match metadata.get_path(fields_path)? {
            Node::Seq(items) => items
                .iter()
                .map(parse_field_spec)
                .collect::<Result<Vec<_>, _>>()?,
            Node::Null => Vec::new(),
            other => {
                return Err(PackageError::InvalidFieldSpec(format!(
                    "`{fields_path}` must be a list, found {}",
                    other.type_name()
                )))
            }
        };
        for (i, spec) in specs.iter().enumerate() {
            if table.column_index(&spec.0).is_none() {
                return Err(PackageError::FieldSpecUnknownColumn(spec.0.clone()));
            }
            if specs[..i].iter().any(|s| s.0 == spec.0) {
                return Err(PackageError::InvalidFieldSpec(format!(
                    "column `{}` is described twice",
                    spec.0
                )));
            }
        }

        let mut fields = Vec::with_capacity(table.columns().len());
        for (idx, column) in table.columns().iter().enumerate() {
            let spec = specs.iter().find(|s| &s.0 == column);
            let inferred = if table
                .rows()
                .iter()
                .all(|r| FieldType::Number.admits(&r[idx]))
            {
                FieldType::Number
            } else {
                FieldType::String
            };
            fields.push(match spec {
                Some((name, field_type, unit, description)) => FieldSpec {
                    name: name.clone(),
                    field_type: field_type.unwrap_or(inferred),
                    unit: unit.clone(),
                    description: description.clone(),
                },
                None => FieldSpec {
                    name: column.clone(),
                    field_type: inferred,
                    unit: None,
                    description: None,
                },
            });
        }
        Entry::new(identifier, fields, table, metadata)
    }

    pub fn identifier(&self) -> &str {
        &self.identifier
    }

    pub fn fields(&self) -> &[FieldSpec] {
        &self.fields
    }

    pub fn table(&self) -> &Table {
        &self.table
    }

    pub fn metadata(&self) -> &MetadataDoc {
        &self.metadata
    }

    pub fn field(&self, name: &str) -> Option<&FieldSpec> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn field_unit(&self, name: &str) -> Option<&str> {
        self.field(name)?.unit.as_deref()
    }

    /// Descriptor lookup in the metadata, e.g. `entry.get("user")`.
    pub fn get(&self, path: &str) -> Result<&Node, PackageError> {
        Ok(self.metadata.get_path(path)?)
    }

    /// Reads a quantity from the metadata. Accepts `"5 mA"` strings and
    /// `{value: 5, unit: mA}` maps.
    pub fn quantity_at(&self, path: &str) -> Result<Quantity, PackageError> {
        let not_quantity = |reason: String| PackageError::NotAQuantity {
            path: path.to_string(),
            reason,
        };
        match self.get(path)? {
            Node::String(s) => s
                .parse()
                .map_err(|e: UnitError| not_quantity(e.to_string())),
            Node::Map(map) => {
                let value = map
                    .get("value")
                    .and_then(Node::as_f64)
                    .ok_or_else(|| not_quantity("missing numeric `value`".into()))?;
                let unit = map
                    .get("unit")
                    .and_then(Node::as_str)
                    .ok_or_else(|| not_quantity("missing `unit`".into()))?;
                let unit = parse_unit(unit).map_err(|e| not_quantity(e.to_string()))?;
                Ok(Quantity::new(value, unit))
            }
            other => Err(not_quantity(format!("found {}", other.type_name()))),
        }
    }

    fn unit_field(&self, name: &str) -> Result<(usize, UnitExpr), PackageError> {
        let idx = self
            .fields
            .iter()
            .position(|f| f.name == name)
            .ok_or_else(|| PackageError::UnknownField(name.to_string()))?;
        let unit = self.fields[idx]
            .unit_expr()?
            .ok_or_else(|| PackageError::FieldHasNoUnit(name.to_string()))?;
        Ok((idx, unit))
    }

    /// Returns a new entry whose targeted columns are expressed in new units.
    pub fn rescale<K, V>(&self, targets: &[(K, V)]) -> Result<Entry, PackageError>
    where
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut out = self.clone();
        for (field, unit) in targets {
            let (field, unit) = (field.as_ref(), unit.as_ref().trim());
            let (idx, from) = out.unit_field(field)?;
            let to = parse_unit(unit).map_err(|source| PackageError::InvalidUnit {
                field: field.to_string(),
                source,
            })?;
            let factor = conversion_factor(&from, &to).map_err(|source| {
                PackageError::DimensionMismatch {
                    field: field.to_string(),
                    source,
                }
            })?;
            if let Some(row) = out
                .table
                .rows()
                .iter()
                .position(|r| !matches!(r[idx], Cell::Number(_) | Cell::Null))
            {
                return Err(PackageError::NonNumericCell {
                    field: field.to_string(),
                    row,
                });
            }
            out.table = out.table.map_column(idx, |c| match c {
                Cell::Number(v) => Cell::Number(apply_factor(*v, &factor)),
                other => other.clone(),
            });
            let spec = &mut out.fields[idx];
            spec.unit = Some(unit.to_string());
            if !factor.is_integer() && spec.field_type == FieldType::Integer {
                spec.field_type = FieldType::Number;
            }
        }
        Ok(out)
    }

    /// Aggregates a numeric column into a quantity carrying the field's unit.
    pub fn field_quantity(
        &self,
        field: &str,
        aggregate: Aggregate,
    ) -> Result<Quantity, PackageError> {
        let (idx, unit) = self.unit_field(field)?;
        let mut values = Vec::with_capacity(self.table.row_count());
        for (row, r) in self.table.rows().iter().enumerate() {
            match &r[idx] {
                Cell::Number(v) => values.push(*v),
                Cell::Null => {}
                Cell::Text(_) => {
                    return Err(PackageError::NonNumericCell {
                        field: field.to_string(),
                        row,
                    })
                }
            }
        }
        if values.is_empty() {
            return Err(PackageError::EmptyColumn(field.to_string()));
        }
        let magnitude = match aggregate {
            Aggregate::Mean => values.iter().sum::<f64>() / values.len() as f64,
            Aggregate::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
            Aggregate::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Aggregate::First => values[0],
        };
        Ok(Quantity::new(magnitude, unit))
    }

    /// Serializes the package descriptor.
    pub fn descriptor_json(&self) -> String {
        let descriptor = Descriptor {
            resources: vec![Resource {
                name: self.identifier.clone(),
                kind: "table".into(),
                path: format!("{}.csv", self.identifier),
                format: "csv".into(),
                mediatype: "text/csv".into(),
                schema: ResourceSchema {
                    fields: self.fields.clone(),
                },
                metadata: self.metadata.root.clone(),
            }],
        };
        let mut text =
            serde_json::to_string_pretty(&descriptor).expect("descriptor always serializes");
        text.push('\n');
        text
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregate {
    Mean,
    Min,
    Max,
    First,
}

impl std::str::FromStr for Aggregate {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(Aggregate::Mean),
            "min" => Ok(Aggregate::Min),
            "max" => Ok(Aggregate::Max),
            "first" => Ok(Aggregate::First),
            other => Err(format!("unknown aggregate `{other}`")),
        }
    }
}

type RawFieldSpec = (String, Option<FieldType>, Option<String>, Option<String>);

fn parse_field_spec(node: &Node) -> Result<RawFieldSpec, PackageError> {
    let map = node
        .as_map()
        .ok_or_else(|| PackageError::InvalidFieldSpec("each field spec must be a map".into()))?;
    let text = |key: &str| map.get(key).and_then(Node::canonical_scalar);
    let name = match map.get("name") {
        Some(Node::String(s)) => s.clone(),
        Some(other) if other.is_scalar() && *other != Node::Null => other.to_string(),
        _ => {
            return Err(PackageError::InvalidFieldSpec(
                "field spec without a `name`".into(),
            ))
        }
    };
    let field_type = match text("type") {
        None => None,
        Some(t) => Some(FieldType::parse(&t).ok_or_else(|| {
            PackageError::InvalidFieldSpec(format!("field `{name}`: unknown type `{t}`"))
        })?),
    };
    let unit = text("unit").filter(|_| map.get("unit") != Some(&Node::Null));
    let description = text("description").filter(|_| map.get("description") != Some(&Node::Null));
    Ok((name, field_type, unit, description))
}

/// Reads a CSV and builds an entry named after the file.
pub fn build_entry(
    csv_path: impl AsRef<Path>,
    metadata: MetadataDoc,
    fields_path: &str,
) -> Result<Entry, PackageError> {
    let csv_path = csv_path.as_ref();
    let identifier = identifier_from_path(csv_path)?;
    let table = tabular::read_table(csv_path)?;
    Entry::from_table(identifier, table, metadata, fields_path)
}

#[derive(Debug, Serialize, Deserialize)]
struct Descriptor {
    resources: Vec<Resource>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Resource {
    name: String,
    #[serde(rename = "type", default)]
    kind: String,
    path: String,
    #[serde(default)]
    format: String,
    #[serde(default)]
    mediatype: String,
    schema: ResourceSchema,
    #[serde(default)]
    metadata: Node,
}

#[derive(Debug, Serialize, Deserialize)]
struct ResourceSchema {
    fields: Vec<FieldSpec>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PackageError + '_ {
    move |source| PackageError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `<identifier>.csv` and `<identifier>.json` into `outdir`.
pub fn save_entry(
    entry: &Entry,
    outdir: impl AsRef<Path>,
    overwrite: bool,
) -> Result<(PathBuf, PathBuf), PackageError> {
    let outdir = outdir.as_ref();
    fs::create_dir_all(outdir).map_err(io_err(outdir))?;
    let json_path = outdir.join(format!("{}.json", entry.identifier));
    let csv_path = outdir.join(format!("{}.csv", entry.identifier));
    if !overwrite {
        for p in [&json_path, &csv_path] {
            if p.exists() {
                return Err(PackageError::RefusedOverwrite(p.display().to_string()));
            }
        }
    }
    tabular::write_table(&entry.table, &csv_path)?;
    fs::write(&json_path, entry.descriptor_json()).map_err(io_err(&json_path))?;
    Ok((json_path, csv_path))
}

/// Reads a descriptor and the CSV it points to.
pub fn load_entry(json_path: impl AsRef<Path>) -> Result<Entry, PackageError> {
    let json_path = json_path.as_ref();
    let origin = json_path.display().to_string();
    let bad = |reason: String| PackageError::DescriptorParse {
        path: origin.clone(),
        reason,
    };
    let text = fs::read_to_string(json_path).map_err(io_err(json_path))?;
    let mut descriptor: Descriptor = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    if descriptor.resources.len() != 1 {
        return Err(bad(format!(
            "expected exactly one resource, found {}",
            descriptor.resources.len()
        )));
    }
    let resource = descriptor.resources.remove(0);
    let base = json_path.parent().unwrap_or(Path::new("."));
    let csv_path = base.join(&resource.path);
    if !csv_path.is_file() {
        return Err(PackageError::MissingCsv(csv_path.display().to_string()));
    }
    let table = tabular::read_table(&csv_path)?;
    let names: Vec<String> = resource
        .schema
        .fields
        .iter()
        .map(|f| f.name.clone())
        .collect();
    if names != table.columns() {
        return Err(PackageError::SchemaTableMismatch {
            schema: names,
            columns: table.columns().to_vec(),
        });
    }
    Entry::new(
        resource.name,
        resource.schema.fields,
        table,
        MetadataDoc::new(resource.metadata),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG2_CSV: &str = "t,U,T\n0,1.01,275\n1,1.02,275\n2,1.05,275\n";
    const FIG2_YAML: &str = "\
user: Max Doe
current: 5 mA
figure description:
  fields:
    - name: t
      unit: s
      description: relative time
    - name: U
      unit: mV
    - name: T
      unit: K
";

    fn fig2(dir: &Path) -> Entry {
        let csv = dir.join("data.csv");
        fs::write(&csv, FIG2_CSV).unwrap();
        let meta = MetadataDoc::from_yaml_str(FIG2_YAML, "meta").unwrap();
        build_entry(&csv, meta, DEFAULT_FIELDS_PATH).unwrap()
    }

    fn column(entry: &Entry, name: &str) -> Vec<f64> {
        entry
            .table()
            .column(name)
            .unwrap()
            .map(|c| c.as_f64().unwrap())
            .collect()
    }

    #[test]
    fn builds_fig2_entry() {
        let dir = tempfile::tempdir().unwrap();
        let e = fig2(dir.path());
        assert_eq!(e.identifier(), "data");
        assert_eq!(e.to_string(), "Entry('data')");
        let units: Vec<_> = e
            .fields()
            .iter()
            .map(|f| f.unit.as_deref().unwrap())
            .collect();
        assert_eq!(units, ["s", "mV", "K"]);
        assert_eq!(e.fields()[0].description.as_deref(), Some("relative time"));
        assert_eq!(e.get("user").unwrap(), &Node::from("Max Doe"));
    }

    #[test]
    fn identifiers() {
        assert_eq!(identifier_from_path("/x/Data.CSV").unwrap(), "data");
        assert_eq!(identifier_from_path("data").unwrap(), "data");
        assert!(identifier_from_path("a.b.csv").is_err());
        assert!(identifier_from_path("/").is_err());
    }

    #[test]
    fn unspecced_columns_are_inferred() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("x.csv");
        fs::write(&csv, "t,note,blank\n0,ok,\n1,,\n").unwrap();
        let meta =
            MetadataDoc::from_yaml_str("figure description: {fields: [{name: t, unit: s}]}", "m")
                .unwrap();
        let e = build_entry(&csv, meta, DEFAULT_FIELDS_PATH).unwrap();
        assert_eq!(
            e.fields()[1],
            FieldSpec {
                name: "note".into(),
                field_type: FieldType::String,
                unit: None,
                description: None
            }
        );
        assert_eq!(e.fields()[2].field_type, FieldType::Number);
    }

    #[test]
    fn build_errors() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("data.csv");
        fs::write(&csv, FIG2_CSV).unwrap();
        let meta = |y: &str| MetadataDoc::from_yaml_str(y, "m").unwrap();
        assert!(matches!(
            build_entry(&csv, meta("figure description: {fields: [{name: X}]}"), DEFAULT_FIELDS_PATH),
            Err(PackageError::FieldSpecUnknownColumn(c)) if c == "X"
        ));
        assert!(matches!(
            build_entry(
                &csv,
                meta("figure description: {fields: [{name: U, unit: furlong}]}"),
                DEFAULT_FIELDS_PATH
            ),
            Err(PackageError::InvalidUnit { .. })
        ));
        assert!(matches!(
            build_entry(&csv, meta("user: x"), DEFAULT_FIELDS_PATH),
            Err(PackageError::Metadata(MetadataError::PathNotFound { .. }))
        ));
        assert!(matches!(
            build_entry(
                &csv,
                meta("figure description: {fields: [{name: U, type: integer}]}"),
                DEFAULT_FIELDS_PATH
            ),
            Err(PackageError::FieldTypeMismatch { .. })
        ));
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let e = fig2(dir.path());
        let out = dir.path().join("generated");
        let (json, csv) = save_entry(&e, &out, false).unwrap();
        assert_eq!(json, out.join("data.json"));
        assert_eq!(csv, out.join("data.csv"));
        assert_eq!(load_entry(&json).unwrap(), e);
        assert!(matches!(
            save_entry(&e, &out, false),
            Err(PackageError::RefusedOverwrite(_))
        ));
        save_entry(&e, &out, true).unwrap();

        let descriptor: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
        let res = &descriptor["resources"][0];
        assert_eq!(res["name"], "data");
        assert_eq!(res["path"], "data.csv");
        assert_eq!(res["mediatype"], "text/csv");
        assert_eq!(res["schema"]["fields"][0]["unit"], "s");
        assert_eq!(res["schema"]["fields"][0]["description"], "relative time");
        assert!(res["schema"]["fields"][1].get("description").is_none());
        assert_eq!(res["metadata"]["user"], "Max Doe");
    }

    #[test]
    fn load_errors() {
        let dir = tempfile::tempdir().unwrap();
        let e = fig2(dir.path());
        let out = dir.path().join("out");
        let (json, csv) = save_entry(&e, &out, false).unwrap();

        // Hand-edit the descriptor so its schema lists only [t, U].
        let mut d: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
        d["resources"][0]["schema"]["fields"]
            .as_array_mut()
            .unwrap()
            .pop();
        fs::write(&json, serde_json::to_string(&d).unwrap()).unwrap();
        assert!(matches!(
            load_entry(&json),
            Err(PackageError::SchemaTableMismatch { .. })
        ));

        fs::remove_file(&csv).unwrap();
        assert!(matches!(
            load_entry(&json),
            Err(PackageError::MissingCsv(_))
        ));

        fs::write(&json, "{\"resources\": []}").unwrap();
        assert!(matches!(
            load_entry(&json),
            Err(PackageError::DescriptorParse { .. })
        ));
    }

    #[test]
    fn rescale_mv_to_v() {
        let dir = tempfile::tempdir().unwrap();
        let e = fig2(dir.path());
        let r = e.rescale(&[("U", "V")]).unwrap();
        for (got, want) in column(&r, "U").iter().zip([0.00101, 0.00102, 0.00105]) {
            assert!(((got - want) / want).abs() <= 1e-12, "{got} vs {want}");
        }
        assert_eq!(r.field_unit("U"), Some("V"));
        assert_eq!(column(&r, "t"), column(&e, "t"));
        assert_eq!(r.metadata(), e.metadata());

        let none: [(&str, &str); 0] = [];
        assert_eq!(e.rescale(&none).unwrap(), e);
        assert!(matches!(
            e.rescale(&[("U", "K")]),
            Err(PackageError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            e.rescale(&[("X", "V")]),
            Err(PackageError::UnknownField(_))
        ));
    }

    #[test]
    fn quantities() {
        let dir = tempfile::tempdir().unwrap();
        let e = fig2(dir.path());
        let t = e.field_quantity("T", Aggregate::Min).unwrap();
        assert_eq!(t.magnitude, 275.0);
        assert_eq!(t.unit, parse_unit("K").unwrap());
        assert_eq!(
            e.field_quantity("t", Aggregate::Max).unwrap().magnitude,
            2.0
        );
        assert_eq!(
            e.field_quantity("U", Aggregate::First).unwrap().magnitude,
            1.01
        );
        let current = e.quantity_at("current").unwrap();
        assert_eq!(current.unit, parse_unit("mA").unwrap());
        assert_eq!(current.magnitude, 5.0);
        assert!(matches!(
            e.quantity_at("user"),
            Err(PackageError::NotAQuantity { .. })
        ));
    }

    #[test]
    fn string_fields_are_not_quantities() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("n.csv");
        fs::write(&csv, "U,note\n1,a\n").unwrap();
        let meta = MetadataDoc::from_yaml_str(
            "figure description: {fields: [{name: U, unit: mV}, {name: note, unit: s, type: string}]}",
            "m",
        )
        .unwrap();
        let e = build_entry(&csv, meta, DEFAULT_FIELDS_PATH).unwrap();
        assert!(matches!(
            e.field_quantity("note", Aggregate::Mean),
            Err(PackageError::NonNumericCell { .. })
        ));
        let e2 = Entry::new(
            "n",
            vec![FieldSpec {
                name: "U".into(),
                field_type: FieldType::Number,
                unit: None,
                description: None,
            }],
            Table::new(vec!["U".into()], vec![]).unwrap(),
            MetadataDoc::empty(),
        )
        .unwrap();
        assert!(matches!(
            e2.field_quantity("U", Aggregate::Mean),
            Err(PackageError::FieldHasNoUnit(_))
        ));
    }
}

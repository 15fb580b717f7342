//! Validation against a fixed JSON Schema subset.
//!
//! Supported keywords: `type`, `properties`, `required`, `items`, `enum` and
//! `additionalProperties`. Anything else is rejected when the schema loads.

use std::fmt;
use std::path::Path;

use indexmap::IndexMap;

use super::{load_document, MetadataDoc, MetadataError, Node};

const KEYWORDS: [&str; 6] = [
    "type",
    "properties",
    "required",
    "items",
    "enum",
    "additionalProperties",
];

const TYPES: [&str; 7] = [
    "object", "array", "string", "number", "integer", "boolean", "null",
];

#[derive(Debug, Clone, PartialEq)]
enum Additional {
    Allowed,
    Forbidden,
    Schema(Box<Schema>),
}

#[derive(Debug, Clone, PartialEq)]
struct Schema {
    types: Option<Vec<String>>,
    properties: IndexMap<String, Schema>,
    required: Vec<String>,
    items: Option<Box<Schema>>,
    enumeration: Option<Vec<Node>>,
    additional: Additional,
}

/// A loaded schema document restricted to the supported keywords.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaDoc {
    root: Schema,
}

impl SchemaDoc {
    pub fn from_doc(doc: &MetadataDoc) -> Result<Self, MetadataError> {
        Ok(SchemaDoc {
            root: compile(&doc.root, "$")?,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MetadataError> {
        SchemaDoc::from_doc(&load_document(path)?)
    }
}

fn invalid(path: &str, reason: impl Into<String>) -> MetadataError {
    MetadataError::SchemaInvalid {
        path: path.to_string(),
        reason: reason.into(),
    }
}

fn compile(node: &Node, path: &str) -> Result<Schema, MetadataError> {
    let map = node
        .as_map()
        .ok_or_else(|| invalid(path, "a schema must be an object"))?;
    if let Some(keyword) = map.keys().find(|k| !KEYWORDS.contains(&k.as_str())) {
        return Err(MetadataError::SchemaUnsupported {
            keyword: keyword.clone(),
            path: path.to_string(),
        });
    }

    let types = match map.get("type") {
        None => None,
        Some(Node::String(t)) => Some(vec![t.clone()]),
        Some(Node::Seq(ts)) => Some(
            ts.iter()
                .map(|t| {
                    t.as_str()
                        .map(str::to_string)
                        .ok_or_else(|| invalid(path, "`type` entries must be strings"))
                })
                .collect::<Result<_, _>>()?,
        ),
        Some(_) => return Err(invalid(path, "`type` must be a string or a list")),
    };
    if let Some(t) = types
        .iter()
        .flatten()
        .find(|t| !TYPES.contains(&t.as_str()))
    {
        return Err(invalid(path, format!("unknown type `{t}`")));
    }

    let mut properties = IndexMap::new();
    if let Some(props) = map.get("properties") {
        let props = props
            .as_map()
            .ok_or_else(|| invalid(path, "`properties` must be an object"))?;
        for (name, sub) in props {
            properties.insert(name.clone(), compile(sub, &join(path, name))?);
        }
    }

    let required = match map.get("required") {
        None => Vec::new(),
        Some(Node::Seq(keys)) => keys
            .iter()
            .map(|k| {
                k.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| invalid(path, "`required` entries must be strings"))
            })
            .collect::<Result<_, _>>()?,
        Some(_) => return Err(invalid(path, "`required` must be a list")),
    };

    let items = map
        .get("items")
        .map(|sub| compile(sub, &join(path, "items")).map(Box::new))
        .transpose()?;

    let enumeration = match map.get("enum") {
        None => None,
        Some(Node::Seq(values)) => Some(values.clone()),
        Some(_) => return Err(invalid(path, "`enum` must be a list")),
    };

    let additional = match map.get("additionalProperties") {
        None | Some(Node::Bool(true)) => Additional::Allowed,
        Some(Node::Bool(false)) => Additional::Forbidden,
        Some(sub @ Node::Map(_)) => {
            Additional::Schema(Box::new(compile(sub, &join(path, "additionalProperties"))?))
        }
        Some(_) => {
            return Err(invalid(
                path,
                "`additionalProperties` must be a boolean or a schema",
            ))
        }
    };

    Ok(Schema {
        types,
        properties,
        required,
        items,
        enumeration,
        additional,
    })
}

fn join(parent: &str, child: &str) -> String {
    if parent == "$" {
        child.to_string()
    } else {
        format!("{parent}.{child}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    WrongType {
        expected: Vec<String>,
        found: String,
    },
    MissingRequired(String),
    NotInEnum,
    UnexpectedKey(String),
}

/// One failed constraint. `path` is a dot-path into the document; `$` is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub path: String,
    pub kind: ViolationKind,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::WrongType { expected, found } => {
                write!(f, "expected {}, found {found}", expected.join(" or "))
            }
            ViolationKind::MissingRequired(key) => write!(f, "missing required key `{key}`"),
            ViolationKind::NotInEnum => write!(f, "value not in enum"),
            ViolationKind::UnexpectedKey(key) => write!(f, "unexpected key `{key}`"),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}", self.path, self.kind)
    }
}

fn type_matches(expected: &str, node: &Node) -> bool {
    match (expected, node) {
        ("object", Node::Map(_)) => true,
        ("array", Node::Seq(_)) => true,
        ("string", Node::String(_)) => true,
        ("number", Node::Int(_) | Node::Float(_)) => true,
        ("integer", Node::Int(_)) => true,
        ("integer", Node::Float(f)) => f.fract() == 0.0,
        ("boolean", Node::Bool(_)) => true,
        ("null", Node::Null) => true,
        _ => false,
    }
}

/// Checks `doc` against `schema`. An empty list means the document is valid.
///
/// A missing required key is reported at the path of that key.
pub fn validate(doc: &MetadataDoc, schema: &SchemaDoc) -> Vec<Violation> {
    let mut out = Vec::new();
    check(&doc.root, &schema.root, "$", &mut out);
    out
}

fn check(node: &Node, schema: &Schema, path: &str, out: &mut Vec<Violation>) {
    if let Some(types) = &schema.types {
        if !types.iter().any(|t| type_matches(t, node)) {
            out.push(Violation {
                path: path.to_string(),
                kind: ViolationKind::WrongType {
                    expected: types.clone(),
                    found: node.type_name().to_string(),
                },
            });
        }
    }

    if let Some(values) = &schema.enumeration {
        if !values.iter().any(|v| v.json_eq(node)) {
            out.push(Violation {
                path: path.to_string(),
                kind: ViolationKind::NotInEnum,
            });
        }
    }

    match node {
        Node::Map(map) => {
            for key in &schema.required {
                if !map.contains_key(key) {
                    out.push(Violation {
                        path: join(path, key),
                        kind: ViolationKind::MissingRequired(key.clone()),
                    });
                }
            }
            for (key, value) in map {
                let child = join(path, key);
                if let Some(sub) = schema.properties.get(key) {
                    check(value, sub, &child, out);
                    continue;
                }
                match &schema.additional {
                    Additional::Allowed => {}
                    Additional::Forbidden => out.push(Violation {
                        path: child,
                        kind: ViolationKind::UnexpectedKey(key.clone()),
                    }),
                    Additional::Schema(sub) => check(value, sub, &child, out),
                }
            }
        }
        Node::Seq(items) => {
            if let Some(sub) = &schema.items {
                for (i, item) in items.iter().enumerate() {
                    check(item, sub, &join(path, &i.to_string()), out);
                }
            }
        }
        _ => {}
    }
}

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use unitpack::datapackage::{build_entry, save_entry, Entry, DEFAULT_FIELDS_PATH};
use unitpack::metadata::MetadataDoc;

pub const FIG2_CSV: &str = "t,U,T\n0,1.01,275\n1,1.02,275\n2,1.05,275\n";

pub const FIG2_META: &str = "\
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

/// Same layout as the figure fixture, with a flat 1.0 mV voltage.
pub const OHM_CSV: &str = "t,U,T\n0,1.0,275\n1,1.0,275\n2,1.0,275\n";

/// Instrument export: preamble, semicolons, decimal commas, footer.
pub const DEVICE_CSV: &str = "\
Instrument: XY-200
Operator: Max Doe
Date: 2024-01-01
time [s];voltage [mV]
0,0;1,01
0,5;1,02
1,0;1,05
1,5;0,97
End of data
Checksum: 1234
";

pub const DEVICE_LOADER: &str = "\
delimiter: ';'
decimal_separator: ','
header_row: 3
skip_footer: 2
rename:
  time [s]: t
  voltage [mV]: U
";

pub const DEVICE_META: &str = "\
user: Max Doe
figure description:
  fields:
    - name: t
      unit: s
    - name: U
      unit: mV
";

pub fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).unwrap();
    }
    fs::write(&path, content).unwrap();
    path
}

pub fn meta(yaml: &str) -> MetadataDoc {
    MetadataDoc::from_yaml_str(yaml, "fixture").unwrap()
}

/// Builds an entry from CSV text and YAML via real files.
pub fn entry_from(dir: &Path, name: &str, csv: &str, yaml: &str) -> Entry {
    let csv_path = write(dir, &format!("raw/{name}.csv"), csv);
    build_entry(&csv_path, meta(yaml), DEFAULT_FIELDS_PATH).unwrap()
}

pub fn fig2_entry(dir: &Path) -> Entry {
    entry_from(dir, "data", FIG2_CSV, FIG2_META)
}

pub fn material_yaml(material: &str, citation: &str) -> String {
    format!(
        "source:\n  citation_key: {citation}\nsystem:\n  electrodes:\n    working_electrode:\n      material: {material}\n{}",
        &FIG2_META[FIG2_META.find("figure").unwrap()..]
    )
}

/// Three packages with materials Pt, Pt, Au.
pub fn grouped_fixture(dir: &Path) -> PathBuf {
    let out = dir.join("packages");
    for (name, material, citation) in [
        ("alpha", "Pt", "doe_2021"),
        ("beta", "Pt", "doe_2022"),
        ("gamma", "Au", "roe_2020"),
    ] {
        let e = entry_from(dir, name, FIG2_CSV, &material_yaml(material, citation));
        save_entry(&e, &out, false).unwrap();
    }
    out
}

/// Every file under `dir` keyed by relative path.
pub fn read_tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    walkdir::WalkDir::new(dir)
        .into_iter()
        .map(Result::unwrap)
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            (
                e.path().strip_prefix(dir).unwrap().to_path_buf(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Proptest strategies shared by the property and acceptance suites.
pub mod gen {
    use indexmap::IndexMap;
    use proptest::prelude::*;
    use unitpack::datapackage::{Entry, FieldSpec, FieldType};
    use unitpack::metadata::{MetadataDoc, Node};
    use unitpack::tabular::{Cell, Table};

    pub const SYMBOLS: [&str; 17] = [
        "m", "g", "s", "A", "K", "mol", "cd", "V", "Ohm", "W", "Hz", "N", "J", "Pa", "C", "F", "S",
    ];
    pub const PREFIXES: [&str; 20] = [
        "y", "z", "a", "f", "p", "n", "u", "m", "c", "d", "da", "h", "k", "M", "G", "T", "P", "E",
        "Z", "Y",
    ];

    pub fn unit_string() -> impl Strategy<Value = String> {
        (
            proptest::option::of(prop::sample::select(PREFIXES.to_vec())),
            prop::sample::select(SYMBOLS.to_vec()),
        )
            .prop_map(|(p, s)| format!("{}{s}", p.unwrap_or("")))
    }

    pub fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![
            4 => -1.0e6..1.0e6f64,
            2 => any::<f64>().prop_filter("finite", |v| v.is_finite()),
            1 => (-1000i32..1000).prop_map(f64::from),
        ]
    }

    fn number_cell() -> impl Strategy<Value = Cell> {
        prop_oneof![9 => finite().prop_map(Cell::Number), 1 => Just(Cell::Null)]
    }

    fn text_cell() -> impl Strategy<Value = Cell> {
        prop_oneof![
            9 => "[a-z][a-z ,\"]{0,6}".prop_map(Cell::Text),
            1 => Just(Cell::Null),
        ]
    }

    #[derive(Debug, Clone)]
    struct ColumnSpec {
        name: String,
        numeric: bool,
        unit: Option<String>,
        description: Option<String>,
    }

    fn column_spec(name: String) -> impl Strategy<Value = ColumnSpec> {
        (
            prop::bool::weighted(0.8),
            proptest::option::of(unit_string()),
            proptest::option::of("[a-z][a-z ]{0,10}"),
        )
            .prop_map(move |(numeric, unit, description)| ColumnSpec {
                name: name.clone(),
                numeric,
                unit: if numeric { unit } else { None },
                description,
            })
    }

    pub fn scalar_node() -> impl Strategy<Value = Node> {
        prop_oneof![
            Just(Node::Null),
            any::<bool>().prop_map(Node::Bool),
            any::<i64>().prop_map(Node::Int),
            finite().prop_map(Node::Float),
            "[ -~]{0,12}".prop_map(Node::String),
        ]
    }

    pub fn node() -> impl Strategy<Value = Node> {
        scalar_node().prop_recursive(3, 24, 4, |inner| {
            prop_oneof![
                prop::collection::vec(inner.clone(), 0..4).prop_map(Node::Seq),
                prop::collection::vec(("[a-z][a-z_ ]{0,6}", inner), 0..4)
                    .prop_map(|kv| { Node::Map(kv.into_iter().collect::<IndexMap<_, _>>()) }),
            ]
        })
    }

    pub fn metadata() -> impl Strategy<Value = MetadataDoc> {
        prop::collection::vec(("[a-z][a-z_]{0,6}", node()), 0..5)
            .prop_map(|kv| MetadataDoc::new(Node::Map(kv.into_iter().collect())))
    }

    /// Random entries: up to 8 columns and 50 rows, units from the whitelist.
    pub fn entry() -> impl Strategy<Value = Entry> {
        let names = prop::collection::btree_set("[A-Za-z][A-Za-z0-9_ ,\"]{0,7}", 1..=8)
            .prop_map(|s| s.into_iter().collect::<Vec<_>>())
            .prop_shuffle();
        let columns =
            names.prop_flat_map(|names| names.into_iter().map(column_spec).collect::<Vec<_>>());
        (columns, 0usize..=50)
            .prop_flat_map(|(columns, nrows)| {
                let row = columns
                    .iter()
                    .map(|c| {
                        if c.numeric {
                            number_cell().boxed()
                        } else {
                            text_cell().boxed()
                        }
                    })
                    .collect::<Vec<_>>();
                (
                    Just(columns),
                    prop::collection::vec(row, nrows),
                    "[a-z][a-z0-9_-]{0,10}",
                    metadata(),
                )
            })
            .prop_map(|(columns, rows, id, metadata)| {
                let fields = columns
                    .iter()
                    .map(|c| FieldSpec {
                        name: c.name.clone(),
                        field_type: if c.numeric {
                            FieldType::Number
                        } else {
                            FieldType::String
                        },
                        unit: c.unit.clone(),
                        description: c.description.clone(),
                    })
                    .collect();
                let names = columns.iter().map(|c| c.name.clone()).collect();
                let table = Table::new(names, rows).expect("generated table is rectangular");
                Entry::new(id, fields, table, metadata).expect("generated entry is valid")
            })
    }
}

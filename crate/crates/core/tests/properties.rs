//! Property tests for the invariants of each module.

mod common;

use std::collections::BTreeSet;
use std::fs;

use indexmap::IndexMap;
use num_traits::One;
use proptest::prelude::*;

use common::{gen, rel_close};
use unitpack::collection::{Collection, Predicate};
use unitpack::datapackage::{identifier_from_path, Entry, FieldSpec, FieldType};
use unitpack::metadata::{
    get_path, scan_metadata_directory, validate, MetadataDoc, Node, SchemaDoc,
};
use unitpack::tabular::{apply_loader, read_table, write_table, Cell, LoaderSpec, Table};
use unitpack::units::{conversion_factor, parse_unit, Quantity};

fn numbers(table: &Table) -> Vec<u64> {
    let mut v: Vec<u64> = table
        .rows()
        .iter()
        .flatten()
        .filter_map(Cell::as_f64)
        .map(f64::to_bits)
        .collect();
    v.sort_unstable();
    v
}

// units ----------------------------------------------------------------------

fn normal() -> impl Strategy<Value = f64> {
    (1.0e-100..1.0e100f64, any::<bool>()).prop_map(|(v, neg)| if neg { -v } else { v })
}

proptest! {
    #[test]
    fn factor_to_self_is_one(unit in gen::unit_string(), exp in 1i32..4) {
        let u = parse_unit(&format!("{unit}^{exp}")).unwrap();
        prop_assert!(conversion_factor(&u, &u).unwrap().is_one());
    }

    #[test]
    fn div_then_mul_restores_magnitude(
        // Normal magnitudes only: subnormal results lose precision in any f64 code.
        m in normal(),
        d in normal(),
        u1 in gen::unit_string(),
        u2 in gen::unit_string(),
    ) {
        let a = Quantity::new(m, parse_unit(&u1).unwrap());
        let b = Quantity::new(d, parse_unit(&u2).unwrap());
        let back = a.div(&b).unwrap().mul(&b);
        prop_assert_eq!(back.unit.dims(), a.unit.dims());
        let restored = back.convert_to(&a.unit).unwrap();
        prop_assert!(rel_close(restored.magnitude, m, 1e-12), "{} vs {}", restored.magnitude, m);
    }

    #[test]
    fn mismatched_dimensions_never_convert(a in gen::unit_string(), b in gen::unit_string()) {
        let (ua, ub) = (parse_unit(&a).unwrap(), parse_unit(&b).unwrap());
        prop_assert_eq!(conversion_factor(&ua, &ub).is_ok(), ua.dims() == ub.dims());
    }
}

// metadata -------------------------------------------------------------------

fn doc_with_keys() -> impl Strategy<Value = (Node, Vec<String>)> {
    // Keys are distinct after normalization so lookups are unambiguous.
    prop::collection::btree_set("[a-z][a-z_]{0,5}", 1..5).prop_flat_map(|keys| {
        let keys: Vec<String> = keys.into_iter().collect();
        let inner = keys.clone();
        (
            prop::collection::vec(gen::scalar_node(), keys.len()),
            prop::collection::vec(gen::scalar_node(), keys.len()),
        )
            .prop_map(move |(outer, nested)| {
                let child: IndexMap<String, Node> = inner.iter().cloned().zip(nested).collect();
                let mut map: IndexMap<String, Node> = inner.iter().cloned().zip(outer).collect();
                map.insert("group".into(), Node::Map(child));
                (Node::Map(map), inner.clone())
            })
    })
}

proptest! {
    #[test]
    fn json_round_trip(root in gen::node()) {
        let yaml = serde_yaml::to_string(&root).unwrap();
        let doc = MetadataDoc::from_yaml_str(&yaml, "gen").unwrap();
        let again = MetadataDoc::from_json_str(&doc.to_json_string(), "gen").unwrap();
        prop_assert_eq!(again, doc);
    }

    #[test]
    fn get_path_ignores_case((root, keys) in doc_with_keys(), pick in any::<prop::sample::Index>(), mask in any::<u32>()) {
        let key = pick.get(&keys);
        let path = format!("group.{key}");
        let shouted: String = path
            .chars()
            .enumerate()
            .map(|(i, c)| if mask >> (i % 32) & 1 == 1 { c.to_ascii_uppercase() } else { c })
            .collect();
        let plain = get_path(&root, &path).unwrap();
        prop_assert_eq!(get_path(&root, &shouted).unwrap(), plain);
        prop_assert_eq!(get_path(&root, &path.to_lowercase()).unwrap(), plain);
    }

    #[test]
    fn required_is_monotone(
        (root, keys) in doc_with_keys(),
        base in prop::collection::vec("[a-z]{1,4}", 0..4),
        extra in "[a-z]{1,4}",
    ) {
        let doc = MetadataDoc::new(root);
        let schema = |required: &[String]| {
            let mut map = IndexMap::new();
            map.insert("type".to_string(), Node::from("object"));
            map.insert(
                "required".to_string(),
                Node::Seq(required.iter().map(|k| Node::from(k.as_str())).collect()),
            );
            SchemaDoc::from_doc(&MetadataDoc::new(Node::Map(map))).unwrap()
        };
        let mut more = base.clone();
        more.push(extra);
        let before = validate(&doc, &schema(&base));
        let after = validate(&doc, &schema(&more));
        prop_assert!(after.len() >= before.len());
        for v in &before {
            prop_assert!(after.contains(v));
        }
        let _ = keys;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn scan_is_sorted_and_order_independent(
        names in prop::collection::btree_set("[a-z]{1,6}(/[a-z]{1,4})?", 1..8),
        seed in any::<u64>(),
    ) {
        let names: Vec<String> = names.into_iter().collect();
        let mut shuffled = names.clone();
        // Cheap deterministic shuffle so the second tree is written in another order.
        let n = shuffled.len();
        for i in 0..n {
            shuffled.swap(i, (seed as usize).wrapping_add(i * 7) % n);
        }
        let write = |order: &[String]| {
            let dir = tempfile::tempdir().unwrap();
            for name in order {
                common::write(dir.path(), &format!("{name}.csv.meta.yaml"), &format!("name: {name}\n"));
            }
            dir
        };
        let (a, b) = (write(&names), write(&shuffled));
        let rel = |dir: &tempfile::TempDir| {
            let report = scan_metadata_directory(dir.path()).unwrap();
            report
                .documents
                .into_iter()
                .map(|(p, d)| (p.strip_prefix(dir.path()).unwrap().to_path_buf(), d))
                .collect::<Vec<_>>()
        };
        let (ra, rb) = (rel(&a), rel(&b));
        prop_assert_eq!(ra.len(), names.len());
        let mut sorted = ra.clone();
        sorted.sort_by(|x, y| x.0.cmp(&y.0));
        prop_assert_eq!(&ra, &sorted);
        prop_assert_eq!(ra, rb);
    }
}

// tabular --------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn write_then_read_is_identity(entry in gen::entry()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_table(entry.table(), &path).unwrap();
        prop_assert_eq!(&read_table(&path).unwrap(), entry.table());
        let loaded = apply_loader(&path, &LoaderSpec::default()).unwrap();
        prop_assert_eq!(&loaded, entry.table());
    }

    #[test]
    fn loader_keeps_cells(
        rows in prop::collection::vec(prop::collection::vec(gen::finite(), 3), 1..20),
        preamble in 0usize..4,
        footer in 0usize..3,
    ) {
        let mut text = String::new();
        for i in 0..preamble {
            text.push_str(&format!("Note {i}: instrument export\n"));
        }
        text.push_str("time [s];voltage [mV];current [mA]\n");
        for row in &rows {
            let cells: Vec<String> = row
                .iter()
                .map(|v| unitpack::metadata::format_number(*v).replace('.', ","))
                .collect();
            text.push_str(&cells.join(";"));
            text.push('\n');
        }
        for i in 0..footer {
            text.push_str(&format!("Footer {i}\n"));
        }
        let dir = tempfile::tempdir().unwrap();
        let path = common::write(dir.path(), "raw.txt", &text);
        let spec = LoaderSpec {
            delimiter: ";".into(),
            decimal_separator: ",".into(),
            header_row: preamble,
            skip_footer: footer,
            rename: [("voltage [mV]".to_string(), "U".to_string())].into_iter().collect(),
            ..LoaderSpec::default()
        };
        let table = apply_loader(&path, &spec).unwrap();
        prop_assert_eq!(table.columns(), ["time [s]", "U", "current [mA]"]);
        let mut expected: Vec<u64> = rows.iter().flatten().map(|v| v.to_bits()).collect();
        expected.sort_unstable();
        prop_assert_eq!(numbers(&table), expected);
    }
}

// datapackage ----------------------------------------------------------------

const VOLT_PREFIXES: [&str; 8] = ["", "m", "u", "n", "k", "M", "c", "da"];

fn voltage_entry(values: Vec<f64>, unit: &str) -> Entry {
    let rows: Vec<Vec<Cell>> = values
        .iter()
        .enumerate()
        .map(|(i, v)| vec![Cell::Number(i as f64), Cell::Number(*v)])
        .collect();
    let table = Table::new(vec!["t".into(), "U".into()], rows).unwrap();
    let field = |name: &str, unit: &str| FieldSpec {
        name: name.into(),
        field_type: FieldType::Number,
        unit: Some(unit.into()),
        description: None,
    };
    Entry::new(
        "cv",
        vec![field("t", "s"), field("U", unit)],
        table,
        common::meta("user: Max Doe\ncurrent: 5 mA\n"),
    )
    .unwrap()
}

fn column(entry: &Entry, name: &str) -> Vec<f64> {
    entry
        .table()
        .column(name)
        .unwrap()
        .filter_map(Cell::as_f64)
        .collect()
}

proptest! {
    #[test]
    fn rescale_inverts(
        values in prop::collection::vec(-1.0e9..1.0e9f64, 1..30),
        from in prop::sample::select(VOLT_PREFIXES.to_vec()),
        to in prop::sample::select(VOLT_PREFIXES.to_vec()),
    ) {
        let (from, to) = (format!("{from}V"), format!("{to}V"));
        let e = voltage_entry(values.clone(), &from);
        let there = e.rescale(&[("U", to.as_str())]).unwrap();
        let back = there.rescale(&[("U", from.as_str())]).unwrap();
        for (a, b) in column(&back, "U").iter().zip(&values) {
            prop_assert!(rel_close(*a, *b, 1e-12), "{a} vs {b}");
        }
        // Untouched parts stay exactly equal.
        prop_assert_eq!(column(&there, "t"), column(&e, "t"));
        prop_assert_eq!(there.metadata(), e.metadata());
        prop_assert_eq!(there.table().columns(), e.table().columns());
        prop_assert_eq!(there.table().row_count(), e.table().row_count());
        prop_assert_eq!(there.field_unit("U"), Some(to.as_str()));
    }

    #[test]
    fn rescale_composes(
        values in prop::collection::vec(-1.0e9..1.0e9f64, 1..30),
        via in prop::sample::select(VOLT_PREFIXES.to_vec()),
    ) {
        let e = voltage_entry(values, "mV");
        let direct = e.rescale(&[("U", "uV")]).unwrap();
        let via = format!("{via}V");
        let twice = e.rescale(&[("U", via.as_str())]).unwrap().rescale(&[("U", "uV")]).unwrap();
        for (a, b) in column(&direct, "U").iter().zip(column(&twice, "U")) {
            prop_assert!(rel_close(*a, b, 1e-12), "{a} vs {b}");
        }
    }

    #[test]
    fn identifier_ignores_case(stem in "[a-z][a-z0-9_]{0,10}", mask in any::<u16>()) {
        let mixed: String = stem
            .chars()
            .enumerate()
            .map(|(i, c)| if mask >> (i % 16) & 1 == 1 { c.to_ascii_uppercase() } else { c })
            .collect();
        let a = identifier_from_path(format!("raw/{stem}.csv")).unwrap();
        let b = identifier_from_path(format!("raw/{mixed}.CSV")).unwrap();
        prop_assert_eq!(&a, &stem);
        prop_assert_eq!(a, b);
    }
}

// collection -----------------------------------------------------------------

fn collection() -> impl Strategy<Value = Collection> {
    prop::collection::btree_map("[a-z]{1,5}", (0i64..5, "[a-c]"), 0..8).prop_map(|m| {
        Collection::from_entries(m.into_iter().map(|(id, (n, tag))| {
            let table = Table::new(vec!["t".into()], vec![vec![Cell::Number(1.0)]]).unwrap();
            let spec = FieldSpec {
                name: "t".into(),
                field_type: FieldType::Number,
                unit: None,
                description: None,
            };
            let meta = common::meta(&format!("n: {n}\ntag: {tag}\n"));
            Entry::new(id, vec![spec], table, meta).unwrap()
        }))
        .unwrap()
    })
}

fn clause() -> impl Strategy<Value = String> {
    prop_oneof![
        (
            prop::sample::select(vec!["==", "!=", "<", "<=", ">", ">="]),
            0i64..5
        )
            .prop_map(|(op, v)| format!("n {op} {v}")),
        "[a-c]".prop_map(|t| format!("tag == '{t}'")),
        "[a-c]".prop_map(|t| format!("tag contains {t}")),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn filter_is_idempotent_subset(c in collection(), clauses in prop::collection::vec(clause(), 0..3)) {
        let p = Predicate::parse(&clauses).unwrap();
        let once = c.filter(&p);
        let all: BTreeSet<&str> = c.identifiers().collect();
        prop_assert!(once.identifiers().all(|id| all.contains(id)));
        prop_assert_eq!(once.filter(&p), once.clone());
        for id in c.identifiers() {
            prop_assert_eq!(c.get(id).unwrap().identifier(), id);
        }
    }

    #[test]
    fn directory_round_trip(c in collection()) {
        let dir = tempfile::tempdir().unwrap();
        c.save_all(dir.path(), false).unwrap();
        prop_assert_eq!(Collection::from_directory(dir.path()).unwrap(), c);
    }
}

#[test]
fn loader_rename_keeps_values() {
    let dir = tempfile::tempdir().unwrap();
    let raw = common::write(dir.path(), "device.txt", common::DEVICE_CSV);
    let mut spec = LoaderSpec::from_yaml_str(common::DEVICE_LOADER).unwrap();
    let renamed = apply_loader(&raw, &spec).unwrap();
    spec.rename.clear();
    let plain = apply_loader(&raw, &spec).unwrap();
    assert_eq!(numbers(&renamed), numbers(&plain));
    assert_eq!(renamed.rows(), plain.rows());
    fs::remove_file(raw).unwrap();
}

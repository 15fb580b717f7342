use std::io::IsTerminal;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use unitpack::autotag::{self, WatchConfig, WatchRecord};
use unitpack::collection::{Collection, Predicate, Profile};
use unitpack::datapackage::{
    build_entry, identifier_from_path, save_entry, Entry, DEFAULT_FIELDS_PATH,
};
use unitpack::metadata::{load_document, validate, Node, SchemaDoc, META_SUFFIX};
use unitpack::report::{render_index, ReportConfig, ReportFormat};
use unitpack::tabular::{apply_loader, LoaderSpec};

#[derive(Parser)]
#[command(
    name = "unitpack",
    version,
    about = "Unit-aware data packages from CSV files and YAML metadata"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a metadata sidecar for every new file in a directory
    Watch {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        template: PathBuf,
        #[arg(long, default_value_t = 500)]
        quiescence_ms: u64,
        /// Only tag files matching this glob (repeatable)
        #[arg(long)]
        include: Vec<String>,
        /// Skip files matching this glob (repeatable); *.meta.yaml is always skipped
        #[arg(long)]
        exclude: Vec<String>,
        /// Watch only the top level of DIR
        #[arg(long)]
        no_recursive: bool,
        /// Tag existing untagged files and exit instead of watching
        #[arg(long)]
        backfill: bool,
    },
    /// Pack a CSV file and its metadata into a data package
    Pack {
        csv: PathBuf,
        /// Metadata file (default: CSV.meta.yaml)
        #[arg(long)]
        meta: Option<PathBuf>,
        #[arg(long, default_value = DEFAULT_FIELDS_PATH)]
        fields_path: String,
        /// Loader spec for non-standard CSV layouts
        #[arg(long)]
        loader: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        outdir: PathBuf,
        #[arg(long)]
        overwrite: bool,
    },
    /// Validate a YAML or JSON document against a schema
    Validate {
        doc: PathBuf,
        #[arg(long)]
        schema: PathBuf,
    },
    /// List entry identifiers
    Ls {
        /// Directory, ZIP file or URL of a ZIP archive
        source: String,
        /// Clause `path OP value`; repeated filters must all hold
        #[arg(long)]
        filter: Vec<String>,
        #[arg(long)]
        skip_errors: bool,
    },
    /// Print the metadata of one entry as JSON
    Show {
        source: String,
        id: String,
        /// Print only the node at this dot-path
        #[arg(long)]
        path: Option<String>,
        /// Profile whose accessors may shorten --path
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long)]
        pretty: bool,
    },
    /// Convert fields of an entry to other units and save the result
    Rescale {
        source: String,
        id: String,
        /// Field to convert (repeatable, paired with --unit)
        #[arg(long, required = true)]
        field: Vec<String>,
        #[arg(long, required = true)]
        unit: Vec<String>,
        #[arg(long)]
        outdir: PathBuf,
        #[arg(long)]
        overwrite: bool,
    },
    /// Summarize descriptors of a collection as JSON
    Describe {
        source: String,
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long)]
        skip_errors: bool,
        #[arg(long)]
        pretty: bool,
    },
    /// Render a static report with plots
    Report {
        source: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long)]
        group_by: Option<String>,
        /// Overview column as LABEL=PATH (repeatable)
        #[arg(long)]
        column: Vec<String>,
        #[arg(long, default_value = "markdown")]
        format: String,
        #[arg(long)]
        skip_errors: bool,
    },
}

struct Failure {
    code: String,
    message: String,
}

impl Failure {
    fn new(code: &str, message: impl Into<String>) -> Self {
        Failure {
            code: code.to_string(),
            message: message.into(),
        }
    }
}

macro_rules! failure_from {
    ($($ty:ty),*) => {$(
        impl From<$ty> for Failure {
            fn from(e: $ty) -> Self {
                Failure::new(e.code(), e.to_string())
            }
        }
    )*};
}

failure_from!(
    unitpack::metadata::MetadataError,
    unitpack::tabular::TableError,
    unitpack::datapackage::PackageError,
    unitpack::collection::CollectionError,
    unitpack::autotag::AutotagError,
    unitpack::report::ReportError
);

type Outcome = Result<ExitCode, Failure>;

fn print_json(node: &Node, pretty: bool) {
    let text = if pretty {
        serde_json::to_string_pretty(node)
    } else {
        serde_json::to_string(node)
    };
    println!("{}", text.expect("nodes serialize"));
}

fn warn(message: &str) {
    eprintln!("warning: {message}");
}

fn open_collection(source: &str, skip_errors: bool) -> Result<Collection, Failure> {
    let path = Path::new(source);
    if source.contains("://") || (path.is_file() && source.ends_with(".zip")) {
        return Ok(Collection::from_archive(source)?);
    }
    let report = Collection::load_directory(path, skip_errors)?;
    for (path, err) in &report.skipped {
        warn(&format!(
            "skipped {}: [{}] {err}",
            path.display(),
            err.code()
        ));
    }
    Ok(report.collection)
}

fn load_profile(path: Option<&Path>) -> Result<Profile, Failure> {
    Ok(match path {
        Some(p) => Profile::load(p)?,
        None => Profile::cyclic_voltammetry(),
    })
}

fn cmd_watch(cfg: WatchConfig, backfill: bool) -> Outcome {
    let print = |record: &WatchRecord| {
        if let Ok(line) = serde_json::to_string(record) {
            println!("{line}");
        }
    };
    if backfill {
        autotag::backfill(&cfg, print)?;
        return Ok(ExitCode::SUCCESS);
    }
    let stop = Arc::new(AtomicBool::new(false));
    let flag = Arc::clone(&stop);
    ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst))
        .map_err(|e| Failure::new("WATCH_SETUP_ERROR", e.to_string()))?;
    autotag::watch(&cfg, &stop, print)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_pack(
    csv: &Path,
    meta: Option<PathBuf>,
    fields_path: &str,
    loader: Option<PathBuf>,
    outdir: &Path,
    overwrite: bool,
) -> Outcome {
    let meta_path = match meta {
        Some(p) => p,
        None => {
            let mut p = csv.as_os_str().to_os_string();
            p.push(META_SUFFIX);
            PathBuf::from(p)
        }
    };
    if !meta_path.is_file() {
        return Err(Failure::new(
            "META_NOT_FOUND",
            format!(
                "metadata file {} not found (use --meta)",
                meta_path.display()
            ),
        ));
    }
    let metadata = load_document(&meta_path)?;
    let entry = match loader {
        Some(spec) => {
            let table = apply_loader(csv, &LoaderSpec::load(spec)?)?;
            Entry::from_table(identifier_from_path(csv)?, table, metadata, fields_path)?
        }
        None => build_entry(csv, metadata, fields_path)?,
    };
    let (json, data) = save_entry(&entry, outdir, overwrite)?;
    println!("{}", json.display());
    println!("{}", data.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(doc: &Path, schema: &Path) -> Outcome {
    let schema = SchemaDoc::load(schema)?;
    let doc = load_document(doc)?;
    let violations = validate(&doc, &schema);
    for v in &violations {
        println!("{v}");
    }
    Ok(if violations.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_show(
    source: &str,
    id: &str,
    path: Option<&str>,
    profile: Option<&Path>,
    pretty: bool,
) -> Outcome {
    let collection = open_collection(source, false)?;
    let entry = collection.get(id)?;
    match path {
        None => print_json(&entry.metadata().root, pretty),
        Some(p) => {
            let node = match profile {
                Some(file) => load_profile(Some(file))?.access(entry, p)?,
                None => entry.get(p)?,
            };
            print_json(node, pretty);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_rescale(
    source: &str,
    id: &str,
    fields: &[String],
    units: &[String],
    outdir: &Path,
    overwrite: bool,
) -> Outcome {
    if fields.len() != units.len() {
        return Err(Failure::new(
            "USAGE",
            "--field and --unit must be given the same number of times",
        ));
    }
    let collection = open_collection(source, false)?;
    let targets: Vec<(&String, &String)> = fields.iter().zip(units).collect();
    let rescaled = collection.get(id)?.rescale(&targets)?;
    let (json, data) = save_entry(&rescaled, outdir, overwrite)?;
    println!("{}", json.display());
    println!("{}", data.display());
    Ok(ExitCode::SUCCESS)
}

fn parse_column(spec: &str) -> Result<(String, String), Failure> {
    match spec.split_once('=') {
        Some((label, path)) if !label.is_empty() && !path.is_empty() => {
            Ok((label.to_string(), path.to_string()))
        }
        _ => Err(Failure::new(
            "USAGE",
            format!("--column expects LABEL=PATH, got `{spec}`"),
        )),
    }
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Watch {
            dir,
            template,
            quiescence_ms,
            include,
            exclude,
            no_recursive,
            backfill,
        } => {
            let mut cfg = WatchConfig::new(dir, template);
            cfg.quiescence_ms = quiescence_ms;
            if !include.is_empty() {
                cfg.include_globs = include;
            }
            cfg.exclude_globs = exclude;
            cfg.recursive = !no_recursive;
            cmd_watch(cfg, backfill)
        }
        Command::Pack {
            csv,
            meta,
            fields_path,
            loader,
            outdir,
            overwrite,
        } => cmd_pack(&csv, meta, &fields_path, loader, &outdir, overwrite),
        Command::Validate { doc, schema } => cmd_validate(&doc, &schema),
        Command::Ls {
            source,
            filter,
            skip_errors,
        } => {
            let predicate = Predicate::parse(&filter)?;
            for id in open_collection(&source, skip_errors)?
                .filter(&predicate)
                .identifiers()
            {
                println!("{id}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Show {
            source,
            id,
            path,
            profile,
            pretty,
        } => cmd_show(&source, &id, path.as_deref(), profile.as_deref(), pretty),
        Command::Rescale {
            source,
            id,
            field,
            unit,
            outdir,
            overwrite,
        } => cmd_rescale(&source, &id, &field, &unit, &outdir, overwrite),
        Command::Describe {
            source,
            profile,
            skip_errors,
            pretty,
        } => {
            let profile = load_profile(profile.as_deref())?;
            let summary = open_collection(&source, skip_errors)?.describe(&profile);
            print_json(&summary, pretty);
            Ok(ExitCode::SUCCESS)
        }
        Command::Report {
            source,
            out,
            x,
            y,
            group_by,
            column,
            format,
            skip_errors,
        } => {
            let mut cfg = ReportConfig::new(out, &x, &y);
            cfg.group_by = group_by;
            cfg.format = format.parse::<ReportFormat>()?;
            cfg.descriptor_columns = column
                .iter()
                .map(|c| parse_column(c))
                .collect::<Result<_, _>>()?;
            cfg.check()?;
            let collection = open_collection(&source, skip_errors)?;
            for path in render_index(&collection, &cfg)? {
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(failure) => {
            let color =
                std::env::var_os("UNITPACK_NO_COLOR").is_none() && std::io::stderr().is_terminal();
            let label = if color {
                "\x1b[1;31merror\x1b[0m"
            } else {
                "error"
            };
            // Keep the message on one line so the code stays greppable.
            let message = failure.message.replace('\n', " ");
            eprintln!("{label}[{}]: {message}", failure.code);
            if failure.code == "USAGE" {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

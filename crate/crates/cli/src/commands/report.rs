use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::args::ReportArgs;
use crate::error::CliError;
use crate::output::{self, Run, RunManifest};

const SUMMARY_CSV: &str = "summary.csv";
const SUMMARY_JSON: &str = "summary.json";
const OWN_MANIFEST: &str = "report.manifest.json";

#[derive(Debug, Serialize)]
struct ManifestEntry {
    source: String,
    command: String,
    seed: u64,
    tool_version: String,
    flags: BTreeMap<String, Value>,
    input_digests: BTreeMap<String, String>,
    outputs: Vec<String>,
}

#[derive(Debug, Serialize)]
struct ClaimRow {
    source: String,
    fields: BTreeMap<String, String>,
}

#[derive(Debug, Default, Serialize)]
struct Summary {
    rows: usize,
    tables: BTreeMap<String, usize>,
    claims: BTreeMap<String, Vec<ClaimRow>>,
    manifests: Vec<ManifestEntry>,
}

enum Kind {
    Manifest,
    Table,
}

fn classify(path: &Path) -> Option<Kind> {
    let name = path.file_name()?.to_str()?;
    if name == OWN_MANIFEST || name == SUMMARY_CSV {
        None
    } else if name.ends_with(".manifest.json") {
        Some(Kind::Manifest)
    } else if name.ends_with(".csv") {
        Some(Kind::Table)
    } else {
        None
    }
}

fn collect(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    for p in inputs {
        let meta = fs::metadata(p).map_err(|e| CliError::io(p, e))?;
        if meta.is_dir() {
            let entries = fs::read_dir(p).map_err(|e| CliError::io(p, e))?;
            for e in entries {
                let path = e.map_err(|e| CliError::io(p, e))?.path();
                if path.is_file() && classify(&path).is_some() {
                    files.push(path);
                }
            }
        } else if classify(p).is_some() {
            files.push(p.clone());
        } else {
            return Err(CliError::Usage(format!("{}: not a manifest or CSV table", p.display())));
        }
    }
    files.sort();
    files.dedup();
    Ok(files)
}

fn source_name(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn read_table(path: &Path, summary: &mut Summary) -> Result<(), CliError> {
    let source = source_name(path);
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let mut count = 0;
    for record in reader.records() {
        let record = record?;
        let fields: BTreeMap<String, String> =
            headers.iter().zip(record.iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect();
        let key = fields
            .get("claim")
            .or_else(|| fields.get("quantity"))
            .cloned()
            .unwrap_or_else(|| source.trim_end_matches(".csv").to_string());
        summary.claims.entry(key).or_default().push(ClaimRow { source: source.clone(), fields });
        count += 1;
    }
    summary.rows += count;
    *summary.tables.entry(source).or_default() += count;
    Ok(())
}

fn read_manifest(path: &Path) -> Result<ManifestEntry, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let m: RunManifest = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{}: corrupt manifest: {e}", path.display())))?;
    Ok(ManifestEntry {
        source: source_name(path),
        command: m.command,
        seed: m.seed,
        tool_version: m.tool_version,
        flags: m.flags,
        input_digests: m.input_digests,
        outputs: m.outputs,
    })
}

pub fn report(args: &ReportArgs, mut run: Run) -> Result<Run, CliError> {
    let mut summary = Summary::default();
    for path in collect(&args.inputs)? {
        run.input(&path)?;
        match classify(&path) {
            Some(Kind::Manifest) => summary.manifests.push(read_manifest(&path)?),
            Some(Kind::Table) => read_table(&path, &mut summary)?,
            None => {}
        }
    }
    let rows: Vec<Vec<String>> = summary
        .claims
        .iter()
        .flat_map(|(key, rows)| {
            rows.iter().map(move |r| {
                let fields = serde_json::to_string(&r.fields).unwrap_or_default();
                vec![key.clone(), r.source.clone(), fields]
            })
        })
        .collect();
    let csv_path = run.path(SUMMARY_CSV);
    output::write_csv(&csv_path, &["key", "source", "fields"], &rows)?;
    run.output(&csv_path);
    let json_path = run.path(SUMMARY_JSON);
    output::write_json(&json_path, &summary)?;
    run.output(&json_path);
    println!("{} rows from {} tables, {} manifests", summary.rows, summary.tables.len(), summary.manifests.len());
    Ok(run)
}

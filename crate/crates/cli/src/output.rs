//! Report emission. Files are written atomically through a temporary file
//! in the target directory.

use std::io::Write;
use std::path::Path;

use serde_json::Value;

use crate::commands::Outcome;
use crate::{CliError, RunConfig};

fn parent(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

/// Fails early when the output directory does not exist.
pub fn check_target(out: Option<&Path>) -> Result<(), CliError> {
    if let Some(path) = out {
        let dir = parent(path);
        if !dir.is_dir() {
            return Err(CliError::Io(format!("output directory {} does not exist", dir.display())));
        }
    }
    Ok(())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(parent(path)).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// The report document: result fields followed by the resolved config.
pub fn report(config: &RunConfig, outcome: &Outcome) -> Value {
    let mut doc = outcome.result.clone();
    doc.insert("failed".into(), Value::Bool(outcome.failed));
    doc.insert("config".into(), serde_json::to_value(config).expect("config serializes"));
    Value::Object(doc)
}

pub fn emit(config: &RunConfig, outcome: &Outcome, out: Option<&Path>, json: bool) -> Result<(), CliError> {
    let doc = report(config, outcome);
    let text = serde_json::to_string_pretty(&doc).expect("report serializes") + "\n";
    match (out, &outcome.csv) {
        (Some(path), Some(csv)) => {
            write_atomic(path, csv)?;
            write_atomic(&path.with_extension("json"), text.as_bytes())?;
        }
        (Some(path), None) => write_atomic(path, text.as_bytes())?,
        (None, _) => {}
    }
    let mut stdout = std::io::stdout().lock();
    let io = |e: std::io::Error| CliError::Io(format!("stdout: {e}"));
    if json || (out.is_none() && outcome.csv.is_none()) {
        stdout.write_all(text.as_bytes()).map_err(io)?;
    } else if out.is_none() {
        stdout.write_all(outcome.csv.as_deref().unwrap_or_default()).map_err(io)?;
    } else {
        writeln!(stdout, "{}", outcome.summary).map_err(io)?;
    }
    Ok(())
}

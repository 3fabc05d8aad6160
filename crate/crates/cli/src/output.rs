use crate::Cli;
use delegation::{Error, Result};
use serde_json::{json, Value};
use std::path::PathBuf;

/// What a command produced.
pub struct Outcome {
    pub command: &'static str,
    pub config: Value,
    pub result: Value,
    pub summary: String,
    /// CSV rows (with header), written to `--csv` when given.
    pub csv: Option<String>,
    /// The CSV is the report itself (plot data).
    pub csv_only: bool,
}

impl Outcome {
    pub fn new(command: &'static str, config: Value, result: Value, summary: String) -> Self {
        Outcome { command, config, result, summary, csv: None, csv_only: false }
    }

    pub fn with_csv(mut self, csv: String) -> Self {
        self.csv = Some(csv);
        self
    }
}

fn write(path: &PathBuf, body: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, body).map_err(Error::from)
}

/// Writes the report (JSON, or CSV for plot data) and the one-line summary.
/// The summary goes to stderr when the report itself is on stdout.
pub fn emit(cli: &Cli, outcome: Outcome) -> Result<()> {
    let (body, ext) = if outcome.csv_only {
        (outcome.csv.clone().unwrap_or_default(), "csv")
    } else {
        let report = json!({ "command": outcome.command, "config": outcome.config, "result": outcome.result });
        (serde_json::to_string_pretty(&report)? + "\n", "json")
    };
    let target =
        cli.output.clone().or_else(|| cli.output_dir.as_ref().map(|d| d.join(format!("{}.{ext}", outcome.command))));
    match &target {
        Some(path) => {
            write(path, &body)?;
            println!("{}", outcome.summary);
        }
        None => {
            print!("{body}");
            eprintln!("{}", outcome.summary);
        }
    }
    if let (Some(path), Some(csv), false) = (&cli.csv, &outcome.csv, outcome.csv_only) {
        write(path, csv)?;
    }
    Ok(())
}

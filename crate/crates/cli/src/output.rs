use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use genfrac::report::fmt_f64;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Writes tables and JSON documents into one directory.
pub struct Artifacts {
    dir: PathBuf,
    format: Format,
    written: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: &Path, format: Format) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), format, written: vec![] })
    }

    /// Column-major table; CSV uses 17 significant digits.
    pub fn table(&mut self, name: &str, header: &[&str], columns: &[Vec<f64>]) -> Result<(), CliError> {
        let rows = columns.first().map_or(0, |c| c.len());
        debug_assert!(columns.iter().all(|c| c.len() == rows));
        match self.format {
            Format::Csv => {
                let mut out = header.join(",");
                out.push('\n');
                for r in 0..rows {
                    let cells: Vec<String> = columns.iter().map(|c| fmt_f64(c[r])).collect();
                    let _ = writeln!(out, "{}", cells.join(","));
                }
                self.write(&format!("{name}.csv"), &out)
            }
            Format::Json => {
                let data: Vec<Vec<f64>> = (0..rows).map(|r| columns.iter().map(|c| c[r]).collect()).collect();
                let doc = serde_json::json!({ "columns": header, "data": data });
                self.json(name, &doc)
            }
        }
    }

    pub fn json(&mut self, name: &str, value: &serde_json::Value) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
        text.push('\n');
        self.write(&format!("{name}.json"), &text)
    }

    fn write(&mut self, file: &str, text: &str) -> Result<(), CliError> {
        fs::write(self.dir.join(file), text)?;
        self.written.push(file.to_string());
        Ok(())
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }
}

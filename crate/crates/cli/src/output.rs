//! Deterministic artifact writing.
//!
//! CSV carries the resolved configuration as `# key = value` comment lines
//! followed by a header row and data rows; JSON embeds the same fields in one
//! object. Files are written to a temporary sibling and renamed into place so
//! failed runs never leave partial artifacts. Nothing time-dependent is ever
//! emitted.

use crate::commands::CliError;
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Serialize)]
struct JsonArtifact<'a> {
    config: &'a BTreeMap<String, String>,
    version: &'a str,
    columns: &'a [&'a str],
    data: &'a [Vec<f64>],
    diagnostics: &'a BTreeMap<String, String>,
}

pub struct Artifact {
    pub config: BTreeMap<String, String>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
    pub diagnostics: BTreeMap<String, String>,
}

impl Artifact {
    pub fn new(config: BTreeMap<String, String>, columns: Vec<&'static str>) -> Self {
        Artifact {
            config,
            columns,
            rows: Vec::new(),
            diagnostics: BTreeMap::new(),
        }
    }

    fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut out = String::new();
                out.push_str(&format!("# ampliphase {}\n", env!("CARGO_PKG_VERSION")));
                for (k, v) in &self.config {
                    out.push_str(&format!("# {k} = {v}\n"));
                }
                for (k, v) in &self.diagnostics {
                    out.push_str(&format!("# diag:{k} = {v}\n"));
                }
                out.push_str(&self.columns.join(","));
                out.push('\n');
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
                    out.push_str(&cells.join(","));
                    out.push('\n');
                }
                out
            }
            Format::Json => {
                let artifact = JsonArtifact {
                    config: &self.config,
                    version: env!("CARGO_PKG_VERSION"),
                    columns: &self.columns,
                    data: &self.rows,
                    diagnostics: &self.diagnostics,
                };
                let mut s = serde_json::to_string_pretty(&artifact).expect("serializable");
                s.push('\n');
                s
            }
        }
    }

    pub fn write(&self, target: Option<&Path>, format: Format) -> Result<(), CliError> {
        let text = self.render(format);
        match target {
            None => {
                print!("{text}");
                Ok(())
            }
            Some(path) => {
                let path = resolve_out_path(path);
                if let Some(parent) = path.parent() {
                    if !parent.as_os_str().is_empty() {
                        std::fs::create_dir_all(parent).map_err(|e| {
                            CliError::Io(format!("creating {}: {e}", parent.display()))
                        })?;
                    }
                }
                let tmp = path.with_extension("tmp-partial");
                let result = std::fs::File::create(&tmp)
                    .and_then(|mut f| f.write_all(text.as_bytes()))
                    .and_then(|()| std::fs::rename(&tmp, &path));
                if result.is_err() {
                    let _ = std::fs::remove_file(&tmp);
                }
                result.map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))
            }
        }
    }
}

/// Relative output paths land under $AMPLIPHASE_OUT_DIR when it is set.
fn resolve_out_path(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os("AMPLIPHASE_OUT_DIR") {
        Some(dir) if !dir.is_empty() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Output directory plus the provenance line stamped on every file.
pub struct Outputs {
    dir: PathBuf,
    command: String,
}

impl Outputs {
    pub fn new(dir: &Path, command: String) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command,
        })
    }

    pub fn provenance(&self) -> String {
        format!("clockstat {} {}", env!("CARGO_PKG_VERSION"), self.command)
    }

    /// Opens `name` and writes the `# clockstat ...` comment line.
    pub fn csv(&self, name: &str) -> Result<CsvFile, CliError> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| io_error(&path, e))?;
        let mut w = BufWriter::new(file);
        writeln!(w, "# {}", self.provenance()).map_err(|e| io_error(&path, e))?;
        Ok(CsvFile { w, path })
    }

    /// Writes `{"clockstat": version, "command": ..., <body fields>}`.
    pub fn json<T: Serialize>(&self, name: &str, body: &T) -> Result<PathBuf, CliError> {
        let mut value = serde_json::json!({
            "clockstat": env!("CARGO_PKG_VERSION"),
            "command": self.command,
        });
        let body = serde_json::to_value(body).map_err(|e| CliError::Runtime(e.to_string()))?;
        match body {
            serde_json::Value::Object(map) => value.as_object_mut().unwrap().extend(map),
            other => {
                value["data"] = other;
            }
        }
        let path = self.dir.join(name);
        let mut text =
            serde_json::to_string_pretty(&value).map_err(|e| CliError::Runtime(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| io_error(&path, e))?;
        Ok(path)
    }
}

pub struct CsvFile {
    w: BufWriter<File>,
    path: PathBuf,
}

impl CsvFile {
    pub fn line(&mut self, text: &str) -> Result<(), CliError> {
        writeln!(self.w, "{text}").map_err(|e| io_error(&self.path, e))
    }

    pub fn writer(&mut self) -> &mut BufWriter<File> {
        &mut self.w
    }

    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        self.w.flush().map_err(|e| io_error(&self.path, e))?;
        Ok(self.path)
    }
}

pub fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Command line as typed, quoting arguments that contain whitespace.
pub fn command_line() -> String {
    std::env::args()
        .map(|a| {
            if a.is_empty() || a.contains(char::is_whitespace) {
                format!("'{a}'")
            } else {
                a
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

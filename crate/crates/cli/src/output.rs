use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

pub const OUTPUT_DIR_ENV: &str = "EQSPEC_OUTPUT_DIR";

/// 17 significant digits, round-trippable.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub enum Cell {
    Int(i64),
    Float(f64),
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => fmt_f64(*v),
        }
    }
}

pub struct Outputs {
    pub dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    /// The output directory: `EQSPEC_OUTPUT_DIR` if set, else the config's.
    pub fn create(cfg: &RunConfig) -> Result<Self, CliError> {
        let dir = std::env::var_os(OUTPUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| cfg.run.output_dir.clone());
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(Outputs {
            dir,
            written: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_string());
        self.dir.join(name)
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: Vec<Vec<Cell>>) -> Result<(), CliError> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::io(&path, e))?;
        w.write_record(header).map_err(|e| CliError::io(&path, e))?;
        for row in rows {
            w.write_record(row.iter().map(Cell::render))
                .map_err(|e| CliError::io(&path, e))?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.path(name);
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(&path, e))?;
        write(&path, text + "\n")
    }

    pub fn text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.path(name);
        write(&path, text.to_string())
    }

    pub fn manifest(
        mut self,
        subcommand: &str,
        cfg: &RunConfig,
        threads: usize,
        wall: Duration,
    ) -> Result<PathBuf, CliError> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            subcommand: &'a str,
            version: &'a str,
            core_version: &'a str,
            threads: usize,
            wall_time_seconds: f64,
            outputs: &'a [String],
            config: &'a RunConfig,
        }
        let outputs = self.written.clone();
        let m = Manifest {
            subcommand,
            version: env!("CARGO_PKG_VERSION"),
            core_version: eqspec::VERSION,
            threads,
            wall_time_seconds: wall.as_secs_f64(),
            outputs: &outputs,
            config: cfg,
        };
        self.json("manifest.json", &m)?;
        Ok(self.dir)
    }
}

fn write(path: &Path, text: String) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

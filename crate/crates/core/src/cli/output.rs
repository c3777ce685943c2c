//! CSV series, NDJSON records and the run manifest.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

/// Collects the files written by one run, all stamped with the config hash.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    hash: String,
    task: String,
    files: Vec<String>,
    records: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub task: String,
    pub outputs: Vec<String>,
    pub residuals: Vec<f64>,
    pub converged: bool,
    /// Seconds; reported on the terminal only so output files stay
    /// byte-identical between runs.
    #[serde(skip)]
    pub wall_time: f64,
}

impl OutputDir {
    pub fn create(root: &Path, hash: &str, task: &str) -> std::io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            hash: hash.to_string(),
            task: task.to_string(),
            files: Vec::new(),
            records: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes `<name>.csv` with columns `columns.0, columns.1`.
    pub fn series(&mut self, name: &str, columns: (&str, &str), rows: &[(f64, f64)]) -> std::io::Result<()> {
        let file = format!("{name}.csv");
        write_series(&self.root.join(&file), &self.hash, columns, rows)?;
        self.files.push(file);
        Ok(())
    }

    /// Queues one NDJSON line `{task, config_hash, metrics}`.
    pub fn record<T: Serialize>(&mut self, metrics: &T) -> serde_json::Result<()> {
        let line = serde_json::json!({
            "task": self.task,
            "config_hash": self.hash,
            "metrics": serde_json::to_value(metrics)?,
        });
        self.records.push(serde_json::to_string(&line)?);
        Ok(())
    }

    /// Writes `<task>.ndjson` and `run.json`.
    pub fn finish(mut self, residuals: Vec<f64>, converged: bool, wall_time: f64) -> std::io::Result<RunRecord> {
        let nd = format!("{}.ndjson", self.task);
        let mut text = String::new();
        for r in &self.records {
            text.push_str(r);
            text.push('\n');
        }
        fs::write(self.root.join(&nd), text)?;
        self.files.push(nd);
        let record = RunRecord {
            config_hash: self.hash.clone(),
            task: self.task.clone(),
            outputs: self.files.clone(),
            residuals,
            converged,
            wall_time,
        };
        let json = serde_json::to_string_pretty(&record).map_err(std::io::Error::other)?;
        fs::write(self.root.join("run.json"), json + "\n")?;
        Ok(record)
    }
}

/// CSV with a `# config_hash=` line, a header row and values printed with 17
/// significant digits, which round-trips every `f64`.
pub fn write_series(path: &Path, hash: &str, columns: (&str, &str), rows: &[(f64, f64)]) -> std::io::Result<()> {
    let mut out = Vec::with_capacity(64 + rows.len() * 48);
    writeln!(out, "# config_hash={hash}")?;
    writeln!(out, "{},{}", columns.0, columns.1)?;
    for (a, b) in rows {
        writeln!(out, "{a:.16e},{b:.16e}")?;
    }
    fs::write(path, out)
}

/// `(config hash, rows)` from a file written by [`write_series`].
pub fn read_series(path: &Path) -> std::io::Result<(String, Vec<(f64, f64)>)> {
    let bad = |m: String| std::io::Error::new(std::io::ErrorKind::InvalidData, m);
    let reader = BufReader::new(fs::File::open(path)?);
    let mut lines = reader.lines();
    let first = lines.next().transpose()?.unwrap_or_default();
    let hash = first
        .strip_prefix("# config_hash=")
        .ok_or_else(|| bad(format!("missing hash header in {}", path.display())))?
        .to_string();
    lines.next().transpose()?;
    let mut rows = Vec::new();
    for line in lines {
        let line = line?;
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| bad(format!("malformed row `{line}`")))?;
        let parse = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{e}: `{s}`")));
        rows.push((parse(a)?, parse(b)?));
    }
    Ok((hash, rows))
}

/// Parses every line of an NDJSON file.
pub fn read_ndjson(path: &Path) -> std::io::Result<Vec<Value>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.is_empty())
        .map(|l| serde_json::from_str(l).map_err(std::io::Error::other))
        .collect()
}

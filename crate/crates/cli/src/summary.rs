use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha1::{Digest, Sha1};

use crate::config::Config;
use crate::CliError;

pub const FORMAT: &str = "acflat-summary";
pub const FORMAT_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Which exit status a failed check maps to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    Hypothesis,
    Convergence,
    Invariant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub passed: bool,
    pub kind: CheckKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub format: String,
    pub format_version: u32,
    pub tool_version: String,
    pub subcommand: String,
    pub experiment: String,
    pub input_hash: String,
    pub config: BTreeMap<String, String>,
    pub inputs: BTreeMap<String, String>,
    pub measured: BTreeMap<String, f64>,
    pub checks: BTreeMap<String, Check>,
    pub status: i32,
    pub passed: bool,
    pub artifacts: Vec<String>,
    pub details: serde_json::Value,
}

/// `git hash-object` of `bytes`.
pub fn blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().fold(String::with_capacity(40), |mut s, b| {
        write!(s, "{b:02x}").expect("write to String");
        s
    })
}

/// Collects measured values, checks and artifacts for one run.
pub struct Run {
    cfg: Config,
    dir: PathBuf,
    name: String,
    inputs: BTreeMap<String, String>,
    measured: BTreeMap<String, f64>,
    checks: BTreeMap<String, Check>,
    artifacts: Vec<String>,
    details: serde_json::Map<String, serde_json::Value>,
}

impl Run {
    pub fn new(cfg: Config) -> Self {
        Self {
            dir: cfg.output_dir(),
            name: cfg.output_name(),
            cfg,
            inputs: BTreeMap::new(),
            measured: BTreeMap::new(),
            checks: BTreeMap::new(),
            artifacts: Vec::new(),
            details: serde_json::Map::new(),
        }
    }

    pub fn cfg(&self) -> &Config {
        &self.cfg
    }

    /// Reads an input file named by `key` and records its content hash.
    pub fn read_input(&mut self, key: &str) -> Result<Vec<u8>, CliError> {
        let path = self.cfg.text(key)?;
        let bytes = fs::read(&path).map_err(|e| CliError::config("unreadable_input", format!("cannot read {path}: {e}")))?;
        self.inputs.insert(key.to_string(), blob_hash(&bytes));
        Ok(bytes)
    }

    pub fn measure(&mut self, name: impl Into<String>, value: f64) {
        self.measured.insert(name.into(), value);
    }

    pub fn measure_opt(&mut self, name: impl Into<String>, value: Option<f64>) {
        if let Some(v) = value {
            self.measure(name, v);
        }
    }

    pub fn check(&mut self, name: impl Into<String>, kind: CheckKind, passed: bool) {
        self.checks.insert(name.into(), Check { passed, kind });
    }

    pub fn detail<T: Serialize>(&mut self, name: &str, value: &T) {
        let v = serde_json::to_value(value).expect("report types serialize");
        self.details.insert(name.to_string(), v);
    }

    fn path(&self, suffix: &str) -> (PathBuf, String) {
        let file = format!("{}{suffix}", self.name);
        (self.dir.join(&file), file)
    }

    fn ensure_dir(&self) -> Result<(), CliError> {
        fs::create_dir_all(&self.dir)
            .map_err(|e| CliError::config("unwritable_output", format!("cannot create {}: {e}", self.dir.display())))
    }

    pub fn write_bytes(&mut self, suffix: &str, bytes: &[u8]) -> Result<(), CliError> {
        self.ensure_dir()?;
        let (path, file) = self.path(suffix);
        fs::write(&path, bytes)
            .map_err(|e| CliError::config("unwritable_output", format!("cannot write {}: {e}", path.display())))?;
        self.artifacts.push(file);
        Ok(())
    }

    pub fn write_csv<R: AsRef<[f64]>>(&mut self, suffix: &str, header: &[&str], rows: &[R]) -> Result<(), CliError> {
        let mut text = header.join(",");
        text.push('\n');
        for row in rows {
            let line: Vec<String> = row.as_ref().iter().map(|v| fmt_num(*v)).collect();
            text.push_str(&line.join(","));
            text.push('\n');
        }
        self.write_bytes(suffix, text.as_bytes())
    }

    pub fn write_text_csv(&mut self, suffix: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut text = header.join(",");
        text.push('\n');
        for row in rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        self.write_bytes(suffix, text.as_bytes())
    }

    fn input_hash(&self) -> String {
        let mut canon = format!("subcommand={}\n", self.cfg.subcommand);
        for (k, v) in self.cfg.echo() {
            if !k.starts_with("output.") {
                writeln!(canon, "{k}={v}").expect("write to String");
            }
        }
        for (k, v) in &self.inputs {
            writeln!(canon, "{k}.blob={v}").expect("write to String");
        }
        blob_hash(canon.as_bytes())
    }

    /// Writes `<name>.json` and returns the exit status.
    pub fn finish(mut self) -> Result<i32, CliError> {
        let failed = |k: CheckKind| self.checks.values().any(|c| c.kind == k && !c.passed);
        let status = if failed(CheckKind::Hypothesis) {
            4
        } else if failed(CheckKind::Invariant) {
            5
        } else if failed(CheckKind::Convergence) {
            3
        } else {
            0
        };
        let (_, json_file) = self.path(".json");
        self.artifacts.push(json_file);
        let summary = Summary {
            format: FORMAT.into(),
            format_version: FORMAT_VERSION,
            tool_version: TOOL_VERSION.into(),
            subcommand: self.cfg.subcommand.clone(),
            experiment: self.name.clone(),
            input_hash: self.input_hash(),
            config: self.cfg.echo(),
            inputs: self.inputs.clone(),
            measured: self.measured.clone(),
            checks: self.checks.clone(),
            status,
            passed: status == 0,
            artifacts: self.artifacts.clone(),
            details: serde_json::Value::Object(std::mem::take(&mut self.details)),
        };
        let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
        text.push('\n');
        self.ensure_dir()?;
        let (path, _) = self.path(".json");
        fs::write(&path, text)
            .map_err(|e| CliError::config("unwritable_output", format!("cannot write {}: {e}", path.display())))?;
        Ok(status)
    }
}

/// Shortest round-trip form; non-finite values as `nan`/`inf`/`-inf`.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:?}")
    }
}

pub fn read_summary(path: &Path) -> Result<serde_json::Value, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::config("unreadable_input", format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::config("malformed_input", format!("{}: {e}", path.display())))
}

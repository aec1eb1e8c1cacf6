use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::summary::{fmt_num, read_summary, FORMAT, FORMAT_VERSION, TOOL_VERSION};
use crate::CliError;

const FIXED: [&str; 5] = ["experiment", "subcommand", "input_hash", "passed", "status"];

struct Row {
    file: String,
    summary: Value,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn cell(v: Option<&Value>) -> String {
    match v {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(Value::Bool(b)) => b.to_string(),
        Some(Value::Number(n)) => match n.as_f64() {
            Some(f) if !n.is_i64() && !n.is_u64() => fmt_num(f),
            _ => n.to_string(),
        },
        Some(other) => other.to_string(),
    }
}

/// Merges run summaries into `<name>.csv` and `<name>.json` under `out`.
pub fn report(paths: &[PathBuf], out: &Path, name: &str) -> Result<(), CliError> {
    let mut rows = Vec::new();
    let mut offending = Vec::new();
    for p in paths {
        let summary = read_summary(p)?;
        if summary.get("format").and_then(Value::as_str) != Some(FORMAT) {
            return Err(CliError::config("malformed_input", format!("{} is not a run summary", p.display())));
        }
        let fv = summary.get("format_version").and_then(Value::as_u64);
        let tv = summary.get("tool_version").and_then(Value::as_str);
        if fv != Some(u64::from(FORMAT_VERSION)) || tv != Some(TOOL_VERSION) {
            offending.push(format!(
                "{} (format_version {}, tool_version {})",
                p.display(),
                fv.map_or("?".into(), |v| v.to_string()),
                tv.unwrap_or("?")
            ));
        }
        rows.push(Row { file: p.display().to_string(), summary });
    }
    if !offending.is_empty() {
        return Err(CliError::config(
            "version_mismatch",
            format!(
                "expected format_version {FORMAT_VERSION}, tool_version {TOOL_VERSION}; refused: {}",
                offending.join("; ")
            ),
        ));
    }

    let mut measured = BTreeSet::new();
    let mut checks = BTreeSet::new();
    for r in &rows {
        if let Some(m) = r.summary.get("measured").and_then(Value::as_object) {
            measured.extend(m.keys().cloned());
        }
        if let Some(c) = r.summary.get("checks").and_then(Value::as_object) {
            checks.extend(c.keys().cloned());
        }
    }
    let c_star: Vec<Option<f64>> = rows
        .iter()
        .map(|r| r.summary.pointer("/measured/C_star").and_then(Value::as_f64))
        .collect();
    let with_ratio = c_star.iter().flatten().count() >= 2;
    let base = c_star.iter().flatten().next().copied();

    let mut header: Vec<String> = FIXED.iter().map(|s| s.to_string()).collect();
    header.extend(measured.iter().cloned());
    header.extend(checks.iter().map(|c| format!("check.{c}")));
    if with_ratio {
        header.push("C_star_ratio".into());
    }
    header.push("file".into());

    let mut table = Vec::new();
    let mut csv = header.iter().map(|h| csv_field(h)).collect::<Vec<_>>().join(",");
    csv.push('\n');
    for (r, cs) in rows.iter().zip(&c_star) {
        let s = &r.summary;
        let mut obj = BTreeMap::new();
        for k in FIXED {
            obj.insert(k.to_string(), s.get(k).cloned().unwrap_or(Value::Null));
        }
        for k in &measured {
            obj.insert(k.clone(), s.pointer(&format!("/measured/{k}")).cloned().unwrap_or(Value::Null));
        }
        for k in &checks {
            let v = s.get("checks").and_then(|c| c.get(k)).and_then(|c| c.get("passed")).cloned();
            obj.insert(format!("check.{k}"), v.unwrap_or(Value::Null));
        }
        if with_ratio {
            let ratio = match (cs, base) {
                (Some(c), Some(b)) => json!(c / b),
                _ => Value::Null,
            };
            obj.insert("C_star_ratio".into(), ratio);
        }
        obj.insert("file".into(), Value::String(r.file.clone()));
        let line: Vec<String> = header.iter().map(|h| csv_field(&cell(obj.get(h)))).collect();
        csv.push_str(&line.join(","));
        csv.push('\n');
        table.push(Value::Object(obj.into_iter().collect()));
    }

    let doc = json!({
        "format": "acflat-report",
        "format_version": FORMAT_VERSION,
        "tool_version": TOOL_VERSION,
        "columns": header,
        "rows": table,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("report serializes");
    text.push('\n');
    fs::create_dir_all(out)
        .map_err(|e| CliError::config("unwritable_output", format!("cannot create {}: {e}", out.display())))?;
    for (ext, body) in [("csv", csv), ("json", text)] {
        let path = out.join(format!("{name}.{ext}"));
        fs::write(&path, body)
            .map_err(|e| CliError::config("unwritable_output", format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

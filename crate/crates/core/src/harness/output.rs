//! Flat-file persistence: one CSV per series plus `summary.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{evaluate, RunRecord};
use crate::error::{Error, Result};

pub const SUMMARY_FILE: &str = "summary.json";

fn csv_name(series: &str) -> String {
    let safe: String = series
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect();
    format!("{safe}.csv")
}

/// Writes `summary.json` and one `t,value` CSV per series into `dir`.
pub fn write_record(record: &RunRecord, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, pts) in &record.series {
        let mut body = String::from("t,value\n");
        for (t, v) in pts {
            body.push_str(&format!("{:.16e},{:.16e}\n", t.0, v.0));
        }
        let path = dir.join(csv_name(name));
        fs::write(&path, body)?;
        written.push(path);
    }
    let path = dir.join(SUMMARY_FILE);
    fs::write(&path, record.to_json() + "\n")?;
    written.push(path);
    Ok(written)
}

pub fn read_record(path: &Path) -> Result<RunRecord> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub path: String,
    pub name: String,
    pub experiment: String,
    pub passed: bool,
    pub failed: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub entries: Vec<ReportEntry>,
    pub all_passed: bool,
}

fn collect(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect(&p, out)?;
        } else if p.file_name().is_some_and(|n| n == SUMMARY_FILE) {
            out.push(p);
        }
    }
    Ok(())
}

/// Aggregates every `summary.json` below `dir`, re-evaluating each record's
/// checks from its persisted numbers.
pub fn report(dir: &Path) -> Result<Report> {
    let mut files = Vec::new();
    collect(dir, &mut files)?;
    if files.is_empty() {
        return Err(Error::Config(format!("no {SUMMARY_FILE} found under {}", dir.display())));
    }
    let mut entries = Vec::new();
    for f in files {
        let rec = read_record(&f)?;
        let verdicts = evaluate(&rec);
        let failed: Vec<String> = verdicts
            .iter()
            .filter(|v| !v.passed)
            .map(|v| format!("{}: {}", v.name, v.detail))
            .collect();
        entries.push(ReportEntry {
            path: f.display().to_string(),
            name: rec.name.clone(),
            experiment: rec.experiment.id().to_string(),
            passed: !verdicts.is_empty() && failed.is_empty(),
            failed,
        });
    }
    let all_passed = entries.iter().all(|e| e.passed);
    Ok(Report {
        entries,
        all_passed,
    })
}

//! File formats: game JSON, dataset CSV, candidate-family JSON, fit JSON and
//! result tables. Every writer goes through [`atomic_write`].

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::OutputFormat;
use crate::error::{Error, Result};
use crate::estimator::{CandidateFamily, FitResult, Provenance};
use crate::experiments::{ResultRow, ResultTable};
use crate::game::{GameFile, PolymatrixGame};
use crate::mixture::Dataset;
use crate::psne_set::PsneSet;
use crate::space::ActionSpace;

/// Writes to a sibling temp file, then renames over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::input(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

pub fn read_game_file(path: &Path) -> Result<GameFile> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn read_game(path: &Path) -> Result<PolymatrixGame> {
    PolymatrixGame::from_file(&read_game_file(path)?)
}

pub fn write_game(
    path: &Path,
    game: &PolymatrixGame,
    metadata: Option<serde_json::Value>,
) -> Result<()> {
    atomic_write(path, &to_json_bytes(&game.to_file(metadata))?)
}

/// Dataset CSV: header `player_1,...,player_n`, one row of 1-based actions
/// per sample, in sample order.
pub fn dataset_to_csv(data: &Dataset) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let n = data.space().n_players();
    w.write_record((1..=n).map(|i| format!("player_{i}")))
        .map_err(csv_io)?;
    for x in data.joint_actions() {
        w.write_record(x.actions().iter().map(|a| a.to_string()))
            .map_err(csv_io)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    atomic_write(path, &dataset_to_csv(data)?)
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Parses dataset CSV against a known action space.
pub fn dataset_from_csv(text: &[u8], space: &ActionSpace) -> Result<Dataset> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text);
    let mut records = r.records();
    let n = space.n_players();
    let header = records
        .next()
        .ok_or(Error::Parse {
            line: 1,
            message: "missing header".into(),
        })?
        .map_err(|e| csv_parse(e, 1))?;
    let expected: Vec<String> = (1..=n).map(|i| format!("player_{i}")).collect();
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Parse {
            line: 1,
            message: format!("header must be {}", expected.join(",")),
        });
    }
    let mut samples = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| csv_parse(e, 0))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != n {
            return Err(Error::Parse {
                line,
                message: format!("{} fields, header has {n}", rec.len()),
            });
        }
        let mut actions = Vec::with_capacity(n);
        for (i, cell) in rec.iter().enumerate() {
            let a: usize = cell.parse().map_err(|_| Error::Parse {
                line,
                message: format!("{cell:?} is not a nonnegative integer"),
            })?;
            if a == 0 || a > space.count(i + 1) {
                return Err(Error::Parse {
                    line,
                    message: format!(
                        "action {a} of player {} outside 1..={}",
                        i + 1,
                        space.count(i + 1)
                    ),
                });
            }
            actions.push(a);
        }
        samples.push(space.encode_unchecked(&actions));
    }
    Dataset::new(space.clone(), samples)
}

fn csv_parse(e: csv::Error, fallback_line: u64) -> Error {
    let line = e.position().map_or(fallback_line, |p| p.line());
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

pub fn read_dataset(path: &Path, space: &ActionSpace) -> Result<Dataset> {
    dataset_from_csv(&fs::read(path)?, space)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilyFile {
    actions: ActionSpace,
    provenance: Provenance,
    candidates: Vec<PsneSet>,
}

pub fn family_to_json(family: &CandidateFamily) -> Result<Vec<u8>> {
    to_json_bytes(&FamilyFile {
        actions: family.space().clone(),
        provenance: family.provenance().clone(),
        candidates: family.candidates().to_vec(),
    })
}

pub fn family_from_json(text: &str) -> Result<CandidateFamily> {
    let f: FamilyFile = serde_json::from_str(text)?;
    CandidateFamily::new(f.actions, f.candidates, f.provenance)
}

pub fn write_family(path: &Path, family: &CandidateFamily) -> Result<()> {
    atomic_write(path, &family_to_json(family)?)
}

pub fn read_family(path: &Path) -> Result<CandidateFamily> {
    family_from_json(&fs::read_to_string(path)?)
}

pub fn write_fit(path: &Path, fit: &FitResult) -> Result<()> {
    atomic_write(path, &to_json_bytes(fit)?)
}

/// Result CSV with fixed columns `m,metric,value,stderr,trials`.
pub fn results_to_csv(table: &ResultTable) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["m", "metric", "value", "stderr", "trials"])
        .map_err(csv_io)?;
    for ResultRow {
        m,
        metric,
        value,
        stderr,
        trials,
    } in &table.rows
    {
        w.write_record([
            m.to_string(),
            metric.clone(),
            value.to_string(),
            stderr.to_string(),
            trials.to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn results_to_json(table: &ResultTable) -> Result<Vec<u8>> {
    to_json_bytes(table)
}

pub fn results_from_json(text: &str) -> Result<ResultTable> {
    Ok(serde_json::from_str(text)?)
}

/// Sidecar path for result metadata: `<path>.meta.json`.
pub fn metadata_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Writes the table in `format` plus the metadata sidecar.
pub fn write_results(path: &Path, table: &ResultTable, format: OutputFormat) -> Result<()> {
    let body = match format {
        OutputFormat::Csv => results_to_csv(table)?,
        OutputFormat::Json => results_to_json(table)?,
    };
    atomic_write(path, &body)?;
    atomic_write(&metadata_path(path), &to_json_bytes(&table.metadata)?)
}

//! Plain-text formats: grouped datasets as JSONL (one group per line) and
//! everything else as JSON.
//!
//! A dataset line looks like
//! `{"points": [[x, y], ...], "context": [c1, c2], "label": 3}`
//! where `context` and `label` are optional but must be present on every
//! line or on none.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::GroupedDataset;

#[derive(Debug, Serialize, Deserialize)]
struct GroupLine {
    points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    context: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<usize>,
}

/// Parses JSONL from any reader; blank lines are skipped.
pub fn read_dataset_from(reader: impl Read) -> Result<GroupedDataset> {
    let mut groups = Vec::new();
    let mut contexts = Vec::new();
    let mut labels = Vec::new();
    for (no, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let g: GroupLine = serde_json::from_str(&line)
            .map_err(|e| Error::InvalidParameter(format!("line {}: {e}", no + 1)))?;
        groups.push(g.points);
        contexts.push(g.context);
        labels.push(g.label);
    }
    let all_or_none = |present: usize, what: &str| -> Result<bool> {
        match present {
            0 => Ok(false),
            p if p == groups.len() => Ok(true),
            _ => Err(Error::InvalidParameter(format!("{what} must be given on every line or none"))),
        }
    };
    let has_ctx = all_or_none(contexts.iter().filter(|c| c.is_some()).count(), "context")?;
    let has_lab = all_or_none(labels.iter().filter(|c| c.is_some()).count(), "label")?;
    GroupedDataset::new(
        groups,
        has_ctx.then(|| contexts.into_iter().flatten().collect()),
        has_lab.then(|| labels.into_iter().flatten().collect()),
    )
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<GroupedDataset> {
    read_dataset_from(File::open(path)?)
}

pub fn write_dataset_to(dataset: &GroupedDataset, mut writer: impl Write) -> Result<()> {
    for (j, points) in dataset.groups().iter().enumerate() {
        let line = GroupLine {
            points: points.clone(),
            context: dataset.contexts().map(|c| c[j].clone()),
            label: dataset.labels().map(|l| l[j]),
        };
        serde_json::to_writer(&mut writer, &line)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_dataset(dataset: &GroupedDataset, path: impl AsRef<Path>) -> Result<()> {
    write_dataset_to(dataset, BufWriter::new(File::create(path)?))
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

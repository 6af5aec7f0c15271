//! Line-delimited JSON readers and writers for messages, calendar and gold files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::model::{CalendarEntry, Corpus, EmailMessage, GoldLabels, GoldRecord};
use crate::error::{Error, Result};

/// Parses one record per non-blank line; errors carry the 1-based line number.
pub fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_records(BufReader::new(file), path)
}

fn parse_records<T: DeserializeOwned, R: BufRead>(reader: R, path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: n + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Loads a messages file into a corpus without calendar or gold labels.
pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let messages: Vec<EmailMessage> = read_records(path)?;
    Corpus::new(messages, Vec::new(), None)
}

/// Loads messages plus optional calendar and gold files.
pub fn load_corpus_with(messages: &Path, calendar: Option<&Path>, gold: Option<&Path>) -> Result<Corpus> {
    let msgs: Vec<EmailMessage> = read_records(messages)?;
    let cal = match calendar {
        Some(p) => read_records::<CalendarEntry>(p)?,
        None => Vec::new(),
    };
    let gold = match gold {
        Some(p) => Some(gold_from_records(read_records::<GoldRecord>(p)?)?),
        None => None,
    };
    Corpus::new(msgs, cal, gold)
}

pub fn gold_from_records(records: Vec<GoldRecord>) -> Result<GoldLabels> {
    let mut gold = GoldLabels::new();
    for r in records {
        let label = match r.label {
            0 => false,
            1 => true,
            other => {
                return Err(Error::Validation(format!(
                    "gold label for {} must be 0 or 1, got {other}",
                    r.message_id
                )))
            }
        };
        if gold.insert((r.message_id.clone(), r.intent), label).is_some() {
            return Err(Error::Validation(format!(
                "duplicate gold label for ({}, {})",
                r.message_id, r.intent
            )));
        }
    }
    Ok(gold)
}

pub fn gold_to_records(gold: &GoldLabels) -> Vec<GoldRecord> {
    gold.iter()
        .map(|((id, intent), &label)| GoldRecord {
            message_id: id.clone(),
            intent: *intent,
            label: u8::from(label),
        })
        .collect()
}

/// Writes `messages.jsonl`, `calendar.jsonl` and (if present) `gold.jsonl` into `dir`.
pub fn write_corpus(dir: &Path, corpus: &Corpus) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_records(&dir.join("messages.jsonl"), corpus.messages())?;
    write_records(&dir.join("calendar.jsonl"), corpus.calendar())?;
    if let Some(gold) = corpus.gold() {
        write_records(&dir.join("gold.jsonl"), &gold_to_records(gold))?;
    }
    Ok(())
}

/// Reads a corpus directory produced by [`write_corpus`].
pub fn read_corpus_dir(dir: &Path) -> Result<Corpus> {
    let cal = dir.join("calendar.jsonl");
    let gold = dir.join("gold.jsonl");
    load_corpus_with(
        &dir.join("messages.jsonl"),
        cal.exists().then_some(cal.as_path()),
        gold.exists().then_some(gold.as_path()),
    )
}

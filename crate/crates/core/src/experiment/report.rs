use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::sweep::RunRecord;
use crate::corpus::Intent;
use crate::encoder::EncoderKind;
use crate::error::{Error, Result};

/// Aggregate of all records sharing a cell key.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub setting: String,
    pub encoder: EncoderKind,
    pub intent: Intent,
    pub clean_ratio: f64,
    pub weak_fraction: f64,
    pub weak_count: usize,
    pub seeds: Vec<u64>,
    /// Test accuracy per successful seed, in seed order of the records.
    pub test: Vec<f64>,
    pub dev: Vec<f64>,
    pub failed: usize,
}

impl ReportRow {
    fn key(&self) -> (&str, &str, EncoderKind, Intent, u64, u64) {
        (
            &self.method,
            &self.setting,
            self.encoder,
            self.intent,
            self.clean_ratio.to_bits(),
            self.weak_fraction.to_bits(),
        )
    }

    pub fn mean_test(&self) -> Option<f64> {
        mean(&self.test)
    }

    pub fn mean_dev(&self) -> Option<f64> {
        mean(&self.dev)
    }

    /// Sample standard deviation of the test accuracies.
    pub fn std_test(&self) -> Option<f64> {
        let m = self.mean_test()?;
        if self.test.len() < 2 {
            return Some(0.0);
        }
        let ss: f64 = self.test.iter().map(|x| (x - m) * (x - m)).sum();
        Some((ss / (self.test.len() - 1) as f64).sqrt())
    }

    pub fn status(&self) -> &'static str {
        match (self.failed, self.test.len()) {
            (0, _) => "ok",
            (_, 0) => "failed",
            _ => "partial",
        }
    }
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Rows keyed by (method, setting, encoder, intent, clean ratio, weak
/// fraction), in order of first appearance in the records.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub rows: Vec<ReportRow>,
}

impl ReportTable {
    pub fn from_records(records: &[RunRecord]) -> Self {
        let mut rows: Vec<ReportRow> = Vec::new();
        for r in records {
            let probe = ReportRow {
                method: r.kind.clone(),
                setting: r.setting.clone(),
                encoder: r.encoder,
                intent: r.intent,
                clean_ratio: r.clean_ratio,
                weak_fraction: r.weak_fraction,
                weak_count: r.weak_count,
                seeds: Vec::new(),
                test: Vec::new(),
                dev: Vec::new(),
                failed: 0,
            };
            let idx = match rows.iter().position(|row| row.key() == probe.key()) {
                Some(i) => i,
                None => {
                    rows.push(probe);
                    rows.len() - 1
                }
            };
            let row = &mut rows[idx];
            row.seeds.push(r.seed);
            row.weak_count = row.weak_count.max(r.weak_count);
            match (r.succeeded(), r.test_acc, r.dev_acc) {
                (true, Some(t), Some(d)) => {
                    row.test.push(t);
                    row.dev.push(d);
                }
                _ => row.failed += 1,
            }
        }
        ReportTable { rows }
    }

    pub fn row(&self, method: &str, clean_ratio: f64) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.clean_ratio == clean_ratio)
    }

    pub fn failed_cells(&self) -> usize {
        self.rows.iter().filter(|r| r.failed > 0).count()
    }
}

/// The three report artifacts as text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RenderedReport {
    pub table_csv: String,
    pub summary: String,
    pub series_csv: String,
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6}")).unwrap_or_default()
}

fn joined<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(";")
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::Validation(format!("csv: {e}"));
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.write_record(&row).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Validation(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

const TABLE_HEADER: &[&str] = &[
    "method",
    "setting",
    "encoder",
    "intent",
    "clean_ratio",
    "weak_fraction",
    "weak_count",
    "status",
    "seeds",
    "succeeded",
    "mean_test",
    "std_test",
    "mean_dev",
    "test_per_seed",
];

/// Renders the table, the summary and the plot series. Pure function of
/// the records.
pub fn render_report(records: &[RunRecord]) -> Result<RenderedReport> {
    let table = ReportTable::from_records(records);
    let table_csv = csv_string(
        TABLE_HEADER,
        table.rows.iter().map(|r| {
            vec![
                r.method.clone(),
                r.setting.clone(),
                r.encoder.to_string(),
                r.intent.code().to_string(),
                r.clean_ratio.to_string(),
                r.weak_fraction.to_string(),
                r.weak_count.to_string(),
                r.status().to_string(),
                joined(&r.seeds),
                r.test.len().to_string(),
                opt(r.mean_test()),
                opt(r.std_test()),
                opt(r.mean_dev()),
                r.test.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(";"),
            ]
        }),
    )?;

    let weak_axis = {
        let mut f: Vec<u64> = table.rows.iter().map(|r| r.weak_fraction.to_bits()).collect();
        f.sort_unstable();
        f.dedup();
        f.len() > 1
    };
    let (x_name, x_of): (&str, fn(&ReportRow) -> String) = if weak_axis {
        ("weak_count", |r| r.weak_count.to_string())
    } else {
        ("clean_ratio", |r| r.clean_ratio.to_string())
    };
    let series_csv = csv_string(
        &["series", x_name, "mean_test", "std_test"],
        table.rows.iter().filter(|r| r.mean_test().is_some()).map(|r| {
            let name = if r.setting == super::sweep::STANDARD {
                format!("{}/{}/{}", r.method, r.encoder, r.intent.code())
            } else {
                format!("{}/{}/{}/{}", r.method, r.setting, r.encoder, r.intent.code())
            };
            vec![name, x_of(r), opt(r.mean_test()), opt(r.std_test())]
        }),
    )?;

    let mut summary = String::new();
    let failed: usize = table.rows.iter().map(|r| r.failed).sum();
    let _ = writeln!(
        summary,
        "{} records, {} cells, {} failed runs",
        records.len(),
        table.rows.len(),
        failed
    );
    if !table.rows.is_empty() {
        let _ = writeln!(
            summary,
            "\n{:<12} {:<10} {:<7} {:<6} {:>7} {:>7} {:>6} {:>8} {:>8}",
            "method", "setting", "encoder", "intent", "ratio", "weak", "seeds", "mean", "std"
        );
    }
    for r in &table.rows {
        let mean = r.mean_test().map_or("failed".to_string(), |m| format!("{m:.4}"));
        let std = r.std_test().map_or(String::new(), |s| format!("{s:.4}"));
        let _ = writeln!(
            summary,
            "{:<12} {:<10} {:<7} {:<6} {:>7} {:>7} {:>6} {:>8} {:>8}",
            r.method,
            r.setting,
            r.encoder.to_string(),
            r.intent.code(),
            format!("{:.3}", r.clean_ratio),
            r.weak_count,
            format!("{}/{}", r.test.len(), r.seeds.len()),
            mean,
            std
        );
    }
    for r in records.iter().filter(|r| !r.succeeded()) {
        let _ = writeln!(
            summary,
            "failed: {} ratio {} seed {}: {}",
            r.kind,
            r.clean_ratio,
            r.seed,
            r.error.as_deref().unwrap_or("")
        );
    }
    Ok(RenderedReport {
        table_csv,
        summary,
        series_csv,
    })
}

/// Paths written by [`emit_report`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReportFiles {
    pub table: PathBuf,
    pub summary: PathBuf,
    pub series: PathBuf,
}

/// Writes `table.csv`, `summary.txt` and `series.csv` into `dir`.
pub fn emit_report(records: &[RunRecord], dir: &Path) -> Result<ReportFiles> {
    let rendered = render_report(records)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = ReportFiles {
        table: dir.join("table.csv"),
        summary: dir.join("summary.txt"),
        series: dir.join("series.csv"),
    };
    for (path, text) in [
        (&files.table, &rendered.table_csv),
        (&files.summary, &rendered.summary),
        (&files.series, &rendered.series_csv),
    ] {
        std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    }
    Ok(files)
}

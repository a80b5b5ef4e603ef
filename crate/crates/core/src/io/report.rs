//! Comma-separated report export. One header row, fixed column order, and
//! numbers formatted without locale (period decimals, no grouping).

use std::path::Path;

use crate::bench::{row_label, BenchReport, MemoryGrid};
use crate::crowd::MIB;
use crate::error::{BenchError, OutputError};
use crate::metrics::QualityTable;

/// Anything exportable as a header plus rows of cells.
pub trait Tabular {
    fn header(&self) -> Vec<String>;
    fn rows(&self) -> Vec<Vec<String>>;
}

fn fixed(v: f64, digits: usize) -> String {
    let s = format!("{v:.digits$}");
    // -0.0000 prints with a sign; normalise it
    if s.trim_start_matches('-')
        .chars()
        .all(|c| c == '0' || c == '.')
    {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

impl Tabular for QualityTable {
    fn header(&self) -> Vec<String> {
        ["distance_m", "level", "gaussians", "psnr_db"]
            .map(String::from)
            .to_vec()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.distance_m.to_string(),
                    r.level.to_string(),
                    r.gaussian_count.to_string(),
                    fixed(r.psnr_db, 4),
                ]
            })
            .collect()
    }
}

const BENCH_HEADER: [&str; 12] = [
    "label",
    "gaussians",
    "characters",
    "motion",
    "update_ms",
    "gather_ms",
    "sort_ms",
    "rasterize_ms",
    "total_ms",
    "fps",
    "splats",
    "status",
];

impl Tabular for [BenchReport] {
    fn header(&self) -> Vec<String> {
        BENCH_HEADER.map(String::from).to_vec()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.iter()
            .map(|r| {
                vec![
                    r.label.clone(),
                    r.gaussians.to_string(),
                    r.characters.to_string(),
                    if r.motion { "on" } else { "off" }.to_string(),
                    fixed(r.update_ms, 4),
                    fixed(r.gather_ms, 4),
                    fixed(r.sort_ms, 4),
                    fixed(r.rasterize_ms, 4),
                    fixed(r.total_ms, 4),
                    fixed(r.fps, 4),
                    r.splat_count.to_string(),
                    match &r.skipped {
                        None => "ok".to_string(),
                        Some(reason) => format!("skipped: {reason}"),
                    },
                ]
            })
            .collect()
    }
}

impl Tabular for MemoryGrid {
    fn header(&self) -> Vec<String> {
        let mut h = vec!["gaussians".to_string(), "mode".to_string()];
        h.extend(self.characters.iter().map(|k| format!("mib_{k}")));
        h
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                let mut row = vec![r.gaussian_count.to_string(), r.mode.label().to_string()];
                row.extend(r.bytes.iter().map(|b| fixed(*b as f64 / MIB, 3)));
                row
            })
            .collect()
    }
}

pub fn format_report<T: Tabular + ?Sized>(report: &T) -> Result<String, OutputError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| OutputError::Csv(e.to_string());
    w.write_record(report.header()).map_err(csv_err)?;
    for row in report.rows() {
        w.write_record(row).map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| OutputError::Csv(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| OutputError::Csv(e.to_string()))
}

pub fn export_report<T: Tabular + ?Sized>(report: &T, path: &Path) -> Result<(), OutputError> {
    let text = format_report(report)?;
    std::fs::write(path, text).map_err(|source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads back a benchmark report written by [`export_report`].
pub fn parse_bench_report(text: &str) -> Result<Vec<BenchReport>, BenchError> {
    let bad = |m: String| BenchError::InvalidReport(m);
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| bad(e.to_string()))?;
    if header.iter().ne(BENCH_HEADER.iter().copied()) {
        return Err(bad("unexpected header".into()));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let line = i + 2;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let int = |c: usize| {
            field(c).parse::<usize>().map_err(|_| {
                bad(format!(
                    "line {line}: `{}` is not an integer",
                    BENCH_HEADER[c]
                ))
            })
        };
        let float = |c: usize| {
            field(c)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    bad(format!(
                        "line {line}: `{}` is not a number",
                        BENCH_HEADER[c]
                    ))
                })
        };
        let motion = match field(3) {
            "on" => true,
            "off" => false,
            other => return Err(bad(format!("line {line}: motion `{other}`"))),
        };
        let skipped = match field(11) {
            "ok" => None,
            s => Some(
                s.strip_prefix("skipped: ")
                    .ok_or_else(|| bad(format!("line {line}: status `{s}`")))?
                    .to_string(),
            ),
        };
        let gaussians = int(1)?;
        let label = field(0).to_string();
        if label != row_label(gaussians, motion) {
            log::warn!("line {line}: label `{label}` does not match its cell");
        }
        out.push(BenchReport {
            label,
            gaussians,
            characters: int(2)?,
            motion,
            update_ms: float(4)?,
            gather_ms: float(5)?,
            sort_ms: float(6)?,
            rasterize_ms: float(7)?,
            total_ms: float(8)?,
            fps: float(9)?,
            splat_count: int(10)?,
            skipped,
        });
    }
    Ok(out)
}

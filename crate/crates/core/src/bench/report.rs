use std::path::Path;

use serde::Serialize;

use crate::sparse::ExecMode;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// Pretty-printed JSON with fields in declaration order.
    Json,
    /// The report's main table with a header row.
    Csv,
}

/// A report with a JSON form and a tabular CSV form.
pub trait Report: Serialize {
    fn csv_header(&self) -> Vec<String>;
    fn csv_rows(&self) -> Vec<Vec<String>>;
}

/// Where and how a report was produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Environment {
    pub thread_mode: ExecMode,
    pub worker_threads: usize,
    pub seed: u64,
    pub config_digest: String,
    pub version: &'static str,
    pub os: &'static str,
    pub arch: &'static str,
}

impl Environment {
    pub fn capture(thread_mode: ExecMode, seed: u64, config_digest: String) -> Self {
        Self {
            thread_mode,
            worker_threads: match thread_mode {
                ExecMode::Serial => 1,
                ExecMode::Parallel => rayon::current_num_threads(),
            },
            seed,
            config_digest,
            version: env!("CARGO_PKG_VERSION"),
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
        }
    }
}

/// Formats an optional float with the shortest round-tripping form.
pub(crate) fn num(v: impl Into<Option<f64>>) -> String {
    v.into().map(|v| v.to_string()).unwrap_or_default()
}

pub(crate) fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

pub fn render_report<R: Report>(report: &R, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).map_err(|e| Error::Config(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let csv_err = |e: csv::Error| Error::Config(e.to_string());
            w.write_record(report.csv_header()).map_err(csv_err)?;
            for row in report.csv_rows() {
                w.write_record(&row).map_err(csv_err)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
        }
    }
}

pub fn emit_report<R: Report>(report: &R, format: ReportFormat, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, render_report(report, format)?).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Table {
        name: &'static str,
        rows: Vec<(String, f64, Option<f64>)>,
    }

    impl Report for Table {
        fn csv_header(&self) -> Vec<String> {
            header(&["key", "value", "maybe"])
        }
        fn csv_rows(&self) -> Vec<Vec<String>> {
            self.rows
                .iter()
                .map(|(k, v, m)| vec![k.clone(), num(*v), num(*m)])
                .collect()
        }
    }

    #[test]
    fn stable_and_round_trips() {
        let t = Table {
            name: "t",
            rows: vec![("a,b".into(), 0.1 + 0.2, None), ("c".into(), 1e-300, Some(-3.5))],
        };
        for f in [ReportFormat::Json, ReportFormat::Csv] {
            assert_eq!(render_report(&t, f).unwrap(), render_report(&t, f).unwrap());
        }
        let csv = render_report(&t, ReportFormat::Csv).unwrap();
        let mut r = csv::Reader::from_reader(csv.as_bytes());
        assert_eq!(r.headers().unwrap(), vec!["key", "value", "maybe"]);
        let back: Vec<csv::StringRecord> = r.records().map(|r| r.unwrap()).collect();
        assert_eq!(&back[0][0], "a,b");
        assert_eq!(back[0][1].parse::<f64>().unwrap(), 0.1 + 0.2);
        assert_eq!(&back[0][2], "");
        assert_eq!(back[1][1].parse::<f64>().unwrap(), 1e-300);
        assert_eq!(back[1][2].parse::<f64>().unwrap(), -3.5);
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = Table {
            name: "e",
            rows: vec![],
        };
        assert_eq!(render_report(&t, ReportFormat::Csv).unwrap(), "key,value,maybe\n");
    }
}

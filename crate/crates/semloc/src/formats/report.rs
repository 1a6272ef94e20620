//! Evaluation reports: structured TOML and plot CSV.
//!
//! Structured layout:
//!
//! ```toml
//! format = "semloc-report"
//! version = 1
//! well_localized_m = 25.0
//!
//! [[recall_at_d]]
//! d_meters = 5.0
//! recall = 0.25
//!
//! [[recall_at_n]]
//! n = 1
//! recall = 0.5
//!
//! [[per_query]]
//! query_id = "query_0003_0"
//! top1_id = "db_0004_0"
//! top1_error_m = 9.87
//! best_rank = 1          # omitted when no candidate was well localized
//! ```
//!
//! Plot CSV is two tables separated by one blank line, headers
//! `D_meters,recall` and `N,recall`. All floats use shortest round-trip
//! formatting, so both forms re-parse to identical values.

use serde::{Deserialize, Serialize};

use semloc_core::{EvalReport, QueryOutcome};

use super::{FormatError, Position};

pub const FORMAT_NAME: &str = "semloc-report";
pub const VERSION: u32 = 1;
pub const D_HEADER: &str = "D_meters,recall";
pub const N_HEADER: &str = "N,recall";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Structured,
    PlotCsv,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportFile {
    format: String,
    version: u32,
    well_localized_m: f64,
    #[serde(default)]
    recall_at_d: Vec<DRow>,
    #[serde(default)]
    recall_at_n: Vec<NRow>,
    #[serde(default)]
    per_query: Vec<QueryRow>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DRow {
    d_meters: f64,
    recall: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NRow {
    n: u64,
    recall: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QueryRow {
    query_id: String,
    top1_id: String,
    top1_error_m: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    best_rank: Option<u64>,
}

pub fn emit_report(report: &EvalReport, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Structured => emit_structured(report),
        ReportFormat::PlotCsv => emit_plot_csv(report),
    }
}

fn emit_structured(report: &EvalReport) -> Vec<u8> {
    let file = ReportFile {
        format: FORMAT_NAME.into(),
        version: VERSION,
        well_localized_m: report.well_localized_m,
        recall_at_d: report
            .recall_at_d
            .iter()
            .map(|&(d_meters, recall)| DRow { d_meters, recall })
            .collect(),
        recall_at_n: report
            .recall_at_n
            .iter()
            .map(|&(n, recall)| NRow { n: n as u64, recall })
            .collect(),
        per_query: report
            .per_query
            .iter()
            .map(|q| QueryRow {
                query_id: q.query_id.clone(),
                top1_id: q.top1_id.clone(),
                top1_error_m: q.top1_error_m,
                best_rank: q.best_rank.map(|r| r as u64),
            })
            .collect(),
    };
    toml::to_string(&file).expect("report fields are serializable").into_bytes()
}

pub fn parse_structured(bytes: &[u8]) -> Result<EvalReport, FormatError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| FormatError::invalid(Position::Byte(e.valid_up_to()), "report is not UTF-8"))?;
    let file: ReportFile = toml::from_str(text).map_err(|e| {
        let at = e.span().map_or(0, |s| s.start);
        FormatError::invalid(Position::Byte(at), e.message().to_string())
    })?;
    if file.format != FORMAT_NAME || file.version != VERSION {
        return Err(FormatError::invalid(
            Position::Byte(0),
            format!("expected {FORMAT_NAME} version {VERSION}, found {} version {}", file.format, file.version),
        ));
    }
    let to_usize = |v: u64| {
        usize::try_from(v).map_err(|_| FormatError::invalid(Position::Byte(0), format!("{v} does not fit in usize")))
    };
    Ok(EvalReport {
        well_localized_m: file.well_localized_m,
        recall_at_d: file.recall_at_d.iter().map(|r| (r.d_meters, r.recall)).collect(),
        recall_at_n: file
            .recall_at_n
            .iter()
            .map(|r| Ok((to_usize(r.n)?, r.recall)))
            .collect::<Result<_, FormatError>>()?,
        per_query: file
            .per_query
            .into_iter()
            .map(|q| {
                Ok(QueryOutcome {
                    query_id: q.query_id,
                    top1_id: q.top1_id,
                    top1_error_m: q.top1_error_m,
                    best_rank: q.best_rank.map(to_usize).transpose()?,
                })
            })
            .collect::<Result<_, FormatError>>()?,
    })
}

fn emit_plot_csv(report: &EvalReport) -> Vec<u8> {
    let mut out = String::new();
    out.push_str(D_HEADER);
    out.push('\n');
    for (d, r) in &report.recall_at_d {
        out.push_str(&format!("{d},{r}\n"));
    }
    out.push('\n');
    out.push_str(N_HEADER);
    out.push('\n');
    for (n, r) in &report.recall_at_n {
        out.push_str(&format!("{n},{r}\n"));
    }
    out.into_bytes()
}

/// The two curves of a plot CSV.
pub type PlotTables = (Vec<(f64, f64)>, Vec<(usize, f64)>);

pub fn parse_plot_csv(bytes: &[u8]) -> Result<PlotTables, FormatError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| FormatError::invalid(Position::Byte(e.valid_up_to()), "plot CSV is not UTF-8"))?;
    let lines: Vec<&str> = text.lines().collect();
    let bad = |line: usize, msg: &str| FormatError::invalid(Position::Line(line), msg.to_string());

    if lines.first() != Some(&D_HEADER) {
        return Err(bad(1, "first table must start with `D_meters,recall`"));
    }
    let mut i = 1;
    let mut d_rows = Vec::new();
    while i < lines.len() && !lines[i].is_empty() {
        d_rows.push(pair::<f64>(lines[i], i + 1)?);
        i += 1;
    }
    if i >= lines.len() {
        return Err(FormatError::truncated(Position::Line(i + 1), "missing `N,recall` table"));
    }
    i += 1;
    if lines.get(i) != Some(&N_HEADER) {
        return Err(bad(i + 1, "second table must start with `N,recall`"));
    }
    i += 1;
    let mut n_rows = Vec::new();
    while i < lines.len() {
        if lines[i].is_empty() {
            return Err(FormatError::Trailing { at: Position::Line(i + 1) });
        }
        n_rows.push(pair::<usize>(lines[i], i + 1)?);
        i += 1;
    }
    Ok((d_rows, n_rows))
}

fn pair<T: std::str::FromStr>(line: &str, no: usize) -> Result<(T, f64), FormatError> {
    let bad = || FormatError::invalid(Position::Line(no), format!("cannot parse row {line:?}"));
    let (a, b) = line.split_once(',').ok_or_else(bad)?;
    Ok((a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?))
}

//! Embedding model text format.
//!
//! ```text
//! format = semloc-embedding
//! version = 1
//! d_in = 2
//! d_out = 1
//! margin = 2.0000000000000001e-1
//! norm_epsilon = 9.9999999999999998e-13
//! weights =
//! 1.0000000000000000e0 0.0000000000000000e0
//! ```
//!
//! Header keys may appear in any order, each exactly once. After `weights =`
//! come exactly `d_out` lines of `d_in` whitespace-separated values. Blank
//! lines and lines starting with `#` are ignored. The writer uses 17
//! significant digits, which round-trips every finite `f64`.

use std::collections::BTreeMap;
use std::fmt::Write;

use semloc_core::EmbeddingModel;

use super::{FormatError, Position};

pub const FORMAT_NAME: &str = "semloc-embedding";
pub const VERSION: u32 = 1;

const KEYS: [&str; 6] = ["format", "version", "d_in", "d_out", "margin", "norm_epsilon"];

pub fn save_model(model: &EmbeddingModel) -> Vec<u8> {
    let mut out = String::new();
    writeln!(out, "format = {FORMAT_NAME}").unwrap();
    writeln!(out, "version = {VERSION}").unwrap();
    writeln!(out, "d_in = {}", model.d_in()).unwrap();
    writeln!(out, "d_out = {}", model.d_out()).unwrap();
    writeln!(out, "margin = {:.16e}", model.margin()).unwrap();
    writeln!(out, "norm_epsilon = {:.16e}", model.norm_epsilon()).unwrap();
    out.push_str("weights =\n");
    for i in 0..model.d_out() {
        let row: Vec<String> = model.row(i).iter().map(|w| format!("{w:.16e}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out.into_bytes()
}

fn parse<T: std::str::FromStr>(raw: &str, line: usize, what: &str) -> Result<T, FormatError> {
    raw.parse()
        .map_err(|_| FormatError::invalid(Position::Line(line), format!("{what}: cannot parse {raw:?}")))
}

pub fn load_model(bytes: &[u8]) -> Result<EmbeddingModel, FormatError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| FormatError::invalid(Position::Byte(e.valid_up_to()), "model file is not UTF-8"))?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let mut header: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    let weights_line = loop {
        let Some((no, line)) = lines.next() else {
            return Err(FormatError::truncated(Position::Line(text.lines().count() + 1), "missing `weights =` section"));
        };
        let Some((key, value)) = line.split_once('=') else {
            return Err(FormatError::invalid(Position::Line(no), "expected `key = value`"));
        };
        let (key, value) = (key.trim(), value.trim());
        if key == "weights" {
            if !value.is_empty() {
                return Err(FormatError::invalid(Position::Line(no), "weights start on the next line"));
            }
            break no;
        }
        if !KEYS.contains(&key) {
            return Err(FormatError::invalid(Position::Line(no), format!("unknown key {key:?}")));
        }
        if header.insert(key, (no, value)).is_some() {
            return Err(FormatError::invalid(Position::Line(no), format!("duplicate key {key:?}")));
        }
    };
    let field = |key: &str| {
        header.get(key).copied().ok_or_else(|| {
            FormatError::invalid(Position::Line(weights_line), format!("missing key {key:?}"))
        })
    };

    let (no, format) = field("format")?;
    if format != FORMAT_NAME {
        return Err(FormatError::invalid(Position::Line(no), format!("format {format:?} is not {FORMAT_NAME:?}")));
    }
    let (no, version) = field("version")?;
    let version: u32 = parse(version, no, "version")?;
    if version != VERSION {
        return Err(FormatError::invalid(
            Position::Line(no),
            format!("unsupported version {version}, expected {VERSION}"),
        ));
    }
    let (no, d_in) = field("d_in")?;
    let d_in: usize = parse(d_in, no, "d_in")?;
    let (no_out, d_out) = field("d_out")?;
    let d_out: usize = parse(d_out, no_out, "d_out")?;
    if d_in == 0 || d_out == 0 || d_out > d_in {
        return Err(FormatError::invalid(
            Position::Line(no_out),
            format!("shape {d_out}x{d_in} needs 1 <= d_out <= d_in"),
        ));
    }
    let (no_m, margin) = field("margin")?;
    let margin: f64 = parse(margin, no_m, "margin")?;
    let (no_e, eps) = field("norm_epsilon")?;
    let norm_epsilon: f64 = parse(eps, no_e, "norm_epsilon")?;

    let mut weights = Vec::with_capacity(d_in.saturating_mul(d_out).min(1 << 24));
    let mut last_line = weights_line;
    for row in 0..d_out {
        let Some((no, line)) = lines.next() else {
            return Err(FormatError::truncated(
                Position::Line(last_line + 1),
                format!("expected {d_out} weight rows, found {row}"),
            ));
        };
        last_line = no;
        let before = weights.len();
        for tok in line.split_ascii_whitespace() {
            let w: f64 = parse(tok, no, "weight")?;
            if !w.is_finite() {
                return Err(FormatError::invalid(Position::Line(no), "weight is not finite"));
            }
            weights.push(w);
        }
        if weights.len() - before != d_in {
            return Err(FormatError::invalid(
                Position::Line(no),
                format!("expected {d_in} weights, found {}", weights.len() - before),
            ));
        }
    }
    if let Some((no, _)) = lines.next() {
        return Err(FormatError::Trailing { at: Position::Line(no) });
    }
    EmbeddingModel::new(d_in, d_out, weights, margin, norm_epsilon).map_err(|e| {
        let line = match e {
            semloc_core::MetricError::Margin(_) => no_m,
            semloc_core::MetricError::NormEpsilon(_) => no_e,
            _ => weights_line,
        };
        FormatError::invalid(Position::Line(line), e.to_string())
    })
}

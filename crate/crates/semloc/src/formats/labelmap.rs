//! `SLM1` (binary) and `SLMA` (ASCII) label maps.
//!
//! `SLM1`: magic, width `u32`, height `u32`, num_classes `u16`, then
//! `width * height` labels as `u16`, all little-endian, row-major, top row
//! first.
//!
//! `SLMA`: a header line `SLMA <width> <height> <num_classes>` followed by
//! `height` lines of `width` space-separated decimal labels, LF line endings.
//! The writer emits no newline after the last row; the reader accepts one.

use semloc_core::LabelMap;

use super::bytes::Reader;
use super::{FormatError, Position};

pub const BINARY_MAGIC: &str = "SLM1";
pub const ASCII_MAGIC: &str = "SLMA";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapFormat {
    Binary,
    Ascii,
}

/// Decodes either format, dispatching on the magic.
pub fn load_label_map(bytes: &[u8]) -> Result<LabelMap, FormatError> {
    match bytes.get(..4) {
        Some(m) if m == BINARY_MAGIC.as_bytes() => load_binary(bytes),
        Some(m) if m == ASCII_MAGIC.as_bytes() => load_ascii(bytes),
        _ => Err(FormatError::magic(bytes, "SLM1 or SLMA")),
    }
}

pub fn save_label_map(map: &LabelMap, format: MapFormat) -> Vec<u8> {
    match format {
        MapFormat::Binary => save_binary(map),
        MapFormat::Ascii => save_ascii(map),
    }
}

fn load_binary(bytes: &[u8]) -> Result<LabelMap, FormatError> {
    let mut r = Reader::new(bytes);
    r.magic(BINARY_MAGIC)?;
    let mut dim = |what: &str| {
        let at = r.offset();
        let v = r.u32(what)?;
        if v == 0 {
            return Err(FormatError::invalid(Position::Byte(at), format!("{what} must be >= 1")));
        }
        Ok(v)
    };
    let width = dim("width")?;
    let height = dim("height")?;
    let at = r.offset();
    let num_classes = r.u16("num_classes")?;
    if num_classes == 0 {
        return Err(FormatError::invalid(Position::Byte(at), "num_classes must be >= 1"));
    }
    let count = width as u64 * height as u64;
    r.expect_at_least(count, 2, "labels")?;
    let mut labels = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let at = r.offset();
        let label = r.u16("label")?;
        if label >= num_classes {
            return Err(FormatError::invalid(
                Position::Byte(at),
                format!("label {label} is not below num_classes {num_classes}"),
            ));
        }
        labels.push(label);
    }
    r.finish()?;
    Ok(LabelMap::new(width, height, num_classes, labels).expect("validated while decoding"))
}

fn save_binary(map: &LabelMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(14 + 2 * map.labels().len());
    out.extend_from_slice(BINARY_MAGIC.as_bytes());
    out.extend_from_slice(&map.width().to_le_bytes());
    out.extend_from_slice(&map.height().to_le_bytes());
    out.extend_from_slice(&map.num_classes().to_le_bytes());
    for label in map.labels() {
        out.extend_from_slice(&label.to_le_bytes());
    }
    out
}

fn parse_field<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T, FormatError> {
    tok.parse()
        .map_err(|_| FormatError::invalid(Position::Line(line), format!("{what} {tok:?} is not a valid number")))
}

fn load_ascii(bytes: &[u8]) -> Result<LabelMap, FormatError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| FormatError::invalid(Position::Byte(e.valid_up_to()), "SLMA stream is not UTF-8"))?;
    let mut lines = text.split('\n');
    let header: Vec<&str> = lines.next().unwrap_or("").split_ascii_whitespace().collect();
    if header.len() != 4 {
        return Err(FormatError::invalid(
            Position::Line(1),
            "header must be `SLMA <width> <height> <num_classes>`",
        ));
    }
    let width: u32 = parse_field(header[1], 1, "width")?;
    let height: u32 = parse_field(header[2], 1, "height")?;
    let num_classes: u16 = parse_field(header[3], 1, "num_classes")?;
    if width == 0 || height == 0 || num_classes == 0 {
        return Err(FormatError::invalid(
            Position::Line(1),
            "width, height and num_classes must be >= 1",
        ));
    }

    let mut labels = Vec::new();
    for row in 0..height as usize {
        let line_no = row + 2;
        let Some(line) = lines.next() else {
            return Err(FormatError::truncated(
                Position::Line(line_no),
                format!("expected {height} label rows, found {row}"),
            ));
        };
        let before = labels.len();
        for tok in line.split_ascii_whitespace() {
            let label: u16 = parse_field(tok, line_no, "label")?;
            if label >= num_classes {
                return Err(FormatError::invalid(
                    Position::Line(line_no),
                    format!("label {label} is not below num_classes {num_classes}"),
                ));
            }
            labels.push(label);
        }
        let got = labels.len() - before;
        if got != width as usize {
            return Err(FormatError::invalid(
                Position::Line(line_no),
                format!("expected {width} labels, found {got}"),
            ));
        }
    }
    // At most one empty line (a final newline) may follow.
    let rest: Vec<&str> = lines.collect();
    if !(rest.is_empty() || rest == [""]) {
        return Err(FormatError::Trailing {
            at: Position::Line(height as usize + 2),
        });
    }
    Ok(LabelMap::new(width, height, num_classes, labels).expect("validated while decoding"))
}

fn save_ascii(map: &LabelMap) -> Vec<u8> {
    let mut out = format!("{ASCII_MAGIC} {} {} {}", map.width(), map.height(), map.num_classes());
    for y in 0..map.height() {
        out.push('\n');
        let row: Vec<String> = map.row(y).iter().map(u16::to_string).collect();
        out.push_str(&row.join(" "));
    }
    out.into_bytes()
}

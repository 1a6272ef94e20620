//! CSV tables: poses (`id,lat,lon`) and triplets (`anchor,positive,negative`).
//!
//! Both require the exact header. Line numbers in errors are 1-based and
//! count the header. Floats are written in shortest round-trip form.

use std::collections::HashMap;

use semloc_core::{GeoPose, Triplet};

use super::{FormatError, Position};

pub const POSE_HEADER: [&str; 3] = ["id", "lat", "lon"];
pub const TRIPLET_HEADER: [&str; 3] = ["anchor", "positive", "negative"];

/// One row of a pose table; the row index is the database index.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseRecord {
    pub id: String,
    pub pose: GeoPose,
}

fn reader(bytes: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(bytes)
}

fn csv_error(e: csv::Error) -> FormatError {
    let line = e.position().map_or(1, |p| p.line() as usize);
    let msg = match e.kind() {
        csv::ErrorKind::Utf8 { .. } => "row is not valid UTF-8".to_string(),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            format!("expected {expected_len} fields, found {len}")
        }
        _ => e.to_string(),
    };
    FormatError::invalid(Position::Line(line), msg)
}

/// Reads the header and yields `(line, record)` for each data row.
fn rows<'a>(
    bytes: &'a [u8],
    header: &'static [&'static str; 3],
) -> Result<impl Iterator<Item = Result<(usize, csv::StringRecord), FormatError>> + 'a, FormatError> {
    let mut records = reader(bytes).into_records();
    match records.next() {
        None => {
            return Err(FormatError::invalid(
                Position::Line(1),
                format!("missing header {:?}", header.join(",")),
            ))
        }
        Some(Err(e)) => return Err(csv_error(e)),
        Some(Ok(h)) if h.iter().ne(header.iter().copied()) => {
            return Err(FormatError::invalid(
                Position::Line(1),
                format!("header must be {:?}", header.join(",")),
            ))
        }
        Some(Ok(_)) => {}
    }
    Ok(records.map(|r| {
        let r = r.map_err(csv_error)?;
        let line = r.position().map_or(0, |p| p.line() as usize);
        if r.len() != 3 {
            return Err(FormatError::invalid(
                Position::Line(line),
                format!("expected 3 fields, found {}", r.len()),
            ));
        }
        Ok((line, r))
    }))
}

fn number<T: std::str::FromStr>(raw: &str, line: usize, what: &str) -> Result<T, FormatError> {
    raw.parse()
        .map_err(|_| FormatError::invalid(Position::Line(line), format!("{what} {raw:?} is not a number")))
}

pub fn load_poses_csv(bytes: &[u8]) -> Result<Vec<PoseRecord>, FormatError> {
    let mut out = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for row in rows(bytes, &POSE_HEADER)? {
        let (line, r) = row?;
        let id = &r[0];
        if id.is_empty() {
            return Err(FormatError::invalid(Position::Line(line), "empty id"));
        }
        if id.len() > u16::MAX as usize {
            return Err(FormatError::invalid(Position::Line(line), "id is longer than 65535 bytes"));
        }
        let lat: f64 = number(&r[1], line, "lat")?;
        let lon: f64 = number(&r[2], line, "lon")?;
        let pose = GeoPose::new(lat, lon).map_err(|e| FormatError::invalid(Position::Line(line), e.to_string()))?;
        if let Some(first) = seen.insert(id.to_string(), line) {
            return Err(FormatError::invalid(
                Position::Line(line),
                format!("duplicate id {id:?} (first seen on line {first})"),
            ));
        }
        out.push(PoseRecord { id: id.to_string(), pose });
    }
    Ok(out)
}

pub fn save_poses_csv(records: &[PoseRecord]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(POSE_HEADER).expect("in-memory write");
    for r in records {
        w.write_record([r.id.clone(), r.pose.lat().to_string(), r.pose.lon().to_string()])
            .expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

pub fn load_triplets_csv(bytes: &[u8]) -> Result<Vec<Triplet>, FormatError> {
    let mut out = Vec::new();
    for row in rows(bytes, &TRIPLET_HEADER)? {
        let (line, r) = row?;
        let t = Triplet {
            anchor: number(&r[0], line, "anchor")?,
            positive: number(&r[1], line, "positive")?,
            negative: number(&r[2], line, "negative")?,
        };
        if t.anchor == t.positive || t.anchor == t.negative || t.positive == t.negative {
            return Err(FormatError::invalid(Position::Line(line), "triplet indices must be distinct"));
        }
        out.push(t);
    }
    Ok(out)
}

pub fn save_triplets_csv(triplets: &[Triplet]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRIPLET_HEADER).expect("in-memory write");
    for t in triplets {
        w.write_record([t.anchor.to_string(), t.positive.to_string(), t.negative.to_string()])
            .expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_of(e: FormatError) -> usize {
        match e {
            FormatError::Invalid { at: Position::Line(l), .. } => l,
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_row() {
        let r = load_poses_csv(b"id,lat,lon\nA,0,0").unwrap();
        assert_eq!(r, vec![PoseRecord { id: "A".into(), pose: GeoPose::new(0.0, 0.0).unwrap() }]);
    }

    #[test]
    fn pose_errors_carry_lines() {
        let err = load_poses_csv(b"id,lat,lon\nA,0,0\nB,1,1\nA,2,2\n").unwrap_err();
        assert!(err.to_string().contains("\"A\""), "{err}");
        assert_eq!(line_of(err), 4);
        assert_eq!(line_of(load_poses_csv(b"").unwrap_err()), 1);
        assert_eq!(line_of(load_poses_csv(b"id,lon,lat\nA,0,0").unwrap_err()), 1);
        assert_eq!(line_of(load_poses_csv(b"id,lat,lon\nA,0,0\nB,north,0").unwrap_err()), 3);
        assert_eq!(line_of(load_poses_csv(b"id,lat,lon\nA,95,0").unwrap_err()), 2);
        assert_eq!(line_of(load_poses_csv(b"id,lat,lon\nA,0,NaN").unwrap_err()), 2);
        assert_eq!(line_of(load_poses_csv(b"id,lat,lon\nA,0,0\nB,0").unwrap_err()), 3);
        assert_eq!(line_of(load_poses_csv(b"id,lat,lon\n,0,0").unwrap_err()), 2);
    }

    #[test]
    fn header_only_is_an_empty_table() {
        assert!(load_poses_csv(b"id,lat,lon\n").unwrap().is_empty());
    }

    #[test]
    fn triplets_round_trip() {
        let ts = vec![
            Triplet { anchor: 0, positive: 1, negative: 2 },
            Triplet { anchor: 1, positive: 0, negative: 2 },
        ];
        let bytes = save_triplets_csv(&ts);
        assert_eq!(bytes, b"anchor,positive,negative\n0,1,2\n1,0,2\n");
        assert_eq!(load_triplets_csv(&bytes).unwrap(), ts);
        assert_eq!(line_of(load_triplets_csv(b"anchor,positive,negative\n0,0,1").unwrap_err()), 2);
        assert_eq!(line_of(load_triplets_csv(b"anchor,positive,negative\n0,1,-2").unwrap_err()), 2);
        assert_eq!(line_of(load_triplets_csv(b"a,p,n\n0,1,2").unwrap_err()), 1);
    }
}

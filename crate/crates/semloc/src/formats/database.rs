//! `GDB1` geotagged embedding database.
//!
//! magic · count `u32` · dim `u32` · per entry: id (`u16` length + UTF-8),
//! lat `f64`, lon `f64`, `dim` embedding values as `f64`. All little-endian.
//! Decoded streams are re-validated by [`GeoDatabase::build`].

use semloc_core::{GeoDatabase, GeoPose};

use super::bytes::{put_string, Reader};
use super::{FormatError, Position};

pub const MAGIC: &str = "GDB1";

/// Panics if an id exceeds 65535 bytes; ids entering through the pose table
/// are already bounded.
pub fn save_database(db: &GeoDatabase) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + db.len() * (8 * db.dim() + 32));
    out.extend_from_slice(MAGIC.as_bytes());
    out.extend_from_slice(&(db.len() as u32).to_le_bytes());
    out.extend_from_slice(&(db.dim() as u32).to_le_bytes());
    for i in 0..db.len() {
        put_string(&mut out, &db.ids()[i]);
        let pose = db.poses()[i];
        out.extend_from_slice(&pose.lat().to_le_bytes());
        out.extend_from_slice(&pose.lon().to_le_bytes());
        for v in db.embedding(i) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn load_database(bytes: &[u8]) -> Result<GeoDatabase, FormatError> {
    let mut r = Reader::new(bytes);
    r.magic(MAGIC)?;
    let at = r.offset();
    let count = r.u32("count")? as usize;
    if count == 0 {
        return Err(FormatError::invalid(Position::Byte(at), "database is empty"));
    }
    let at = r.offset();
    let dim = r.u32("dim")? as usize;
    if dim == 0 {
        return Err(FormatError::invalid(Position::Byte(at), "dim must be >= 1"));
    }
    r.expect_at_least(count as u64, 18 + 8 * dim as u64, "entries")?;
    let mut ids = Vec::with_capacity(count);
    let mut poses = Vec::with_capacity(count);
    let mut embeddings = Vec::with_capacity(count);
    for _ in 0..count {
        ids.push(r.string("id")?);
        let at = r.offset();
        let lat = r.f64("lat")?;
        let lon = r.f64("lon")?;
        poses.push(GeoPose::new(lat, lon).map_err(|e| FormatError::invalid(Position::Byte(at), e.to_string()))?);
        let mut e = Vec::with_capacity(dim);
        for _ in 0..dim {
            e.push(r.finite_f64("embedding value")?);
        }
        embeddings.push(e);
    }
    r.finish()?;
    GeoDatabase::build(ids, poses, embeddings)
        .map_err(|e| FormatError::invalid(Position::Byte(bytes.len()), e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> GeoDatabase {
        GeoDatabase::build(
            vec!["x".into(), "y".into()],
            vec![GeoPose::new(1.0, 2.0).unwrap(), GeoPose::new(-3.0, 4.0).unwrap()],
            vec![vec![1.0, 0.0], vec![0.6, 0.8]],
        )
        .unwrap()
    }

    #[test]
    fn layout_and_round_trip() {
        let bytes = save_database(&sample());
        assert_eq!(&bytes[..4], b"GDB1");
        assert_eq!(&bytes[15..23], &1.0f64.to_le_bytes());
        assert_eq!(bytes.len(), 12 + 2 * (2 + 1 + 16 + 16));
        assert_eq!(load_database(&bytes).unwrap(), sample());
        assert_eq!(save_database(&load_database(&bytes).unwrap()), bytes);
    }

    #[test]
    fn every_truncation_fails() {
        let bytes = save_database(&sample());
        for cut in 0..bytes.len() {
            assert!(load_database(&bytes[..cut]).is_err(), "prefix of {cut} bytes accepted");
        }
    }

    #[test]
    fn invalid_contents_are_rejected() {
        let bytes = save_database(&sample());
        let mut lat = bytes.clone();
        lat[15..23].copy_from_slice(&91.0f64.to_le_bytes());
        assert!(matches!(load_database(&lat).unwrap_err(), FormatError::Invalid { at: Position::Byte(15), .. }));

        let mut not_unit = bytes.clone();
        not_unit[31..39].copy_from_slice(&2.0f64.to_le_bytes());
        assert!(matches!(load_database(&not_unit).unwrap_err(), FormatError::Invalid { .. }));

        let mut dup = bytes.clone();
        dup[49] = b'x';
        assert!(matches!(load_database(&dup).unwrap_err(), FormatError::Invalid { .. }));

        let mut empty = b"GDB1".to_vec();
        empty.extend_from_slice(&0u32.to_le_bytes());
        empty.extend_from_slice(&2u32.to_le_bytes());
        assert!(matches!(load_database(&empty).unwrap_err(), FormatError::Invalid { at: Position::Byte(4), .. }));
        assert!(matches!(load_database(b"RDS1\0\0\0\0").unwrap_err(), FormatError::Magic { .. }));
    }
}

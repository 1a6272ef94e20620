//! Little-endian cursor and writer shared by the binary formats.

use super::{FormatError, Position};

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn offset(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], FormatError> {
        if self.remaining() < n {
            return Err(FormatError::truncated(
                Position::Byte(self.pos),
                format!("{what} needs {n} bytes, {} left", self.remaining()),
            ));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N], FormatError> {
        Ok(self.take(N, what)?.try_into().expect("length checked"))
    }

    pub fn magic(&mut self, expected: &'static str) -> Result<(), FormatError> {
        let found = self.buf.get(..4).unwrap_or(self.buf);
        if found != expected.as_bytes() {
            return Err(FormatError::magic(found, expected));
        }
        self.pos = 4;
        Ok(())
    }

    pub fn u16(&mut self, what: &str) -> Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.array(what)?))
    }

    pub fn u32(&mut self, what: &str) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.array(what)?))
    }

    pub fn f64(&mut self, what: &str) -> Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.array(what)?))
    }

    /// A finite `f64`; NaN and infinities are rejected with their offset.
    pub fn finite_f64(&mut self, what: &str) -> Result<f64, FormatError> {
        let at = Position::Byte(self.pos);
        let v = self.f64(what)?;
        if !v.is_finite() {
            return Err(FormatError::invalid(at, format!("{what} is not finite")));
        }
        Ok(v)
    }

    /// 16-bit length-prefixed UTF-8 string.
    pub fn string(&mut self, what: &str) -> Result<String, FormatError> {
        let len = self.u16(what)? as usize;
        let at = Position::Byte(self.pos);
        let raw = self.take(len, what)?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| FormatError::invalid(at, format!("{what} is not valid UTF-8")))
    }

    /// Guards an allocation of `count * unit` bytes against the bytes actually left.
    pub fn expect_at_least(&self, count: u64, unit: u64, what: &str) -> Result<(), FormatError> {
        match count.checked_mul(unit) {
            Some(need) if need <= self.remaining() as u64 => Ok(()),
            _ => Err(FormatError::truncated(
                Position::Byte(self.pos),
                format!("{count} {what} cannot fit in {} bytes", self.remaining()),
            )),
        }
    }

    pub fn finish(&self) -> Result<(), FormatError> {
        if self.remaining() != 0 {
            return Err(FormatError::Trailing {
                at: Position::Byte(self.pos),
            });
        }
        Ok(())
    }
}

pub(crate) fn put_string(out: &mut Vec<u8>, s: &str) {
    let len = u16::try_from(s.len()).expect("ids are at most 65535 bytes");
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

//! On-disk formats.
//!
//! | format | module | layout |
//! |--------|--------|--------|
//! | `SLM1` / `SLMA` label maps | [`labelmap`] | binary LE / ASCII |
//! | `RDS1` raw descriptor store | [`store`] | binary LE |
//! | `GDB1` geotagged database | [`database`] | binary LE |
//! | embedding model | [`model`] | key-value text |
//! | pose and triplet tables | [`tables`] | CSV |
//! | evaluation reports | [`report`] | TOML and plot CSV |

use std::fmt;

pub mod database;
pub mod labelmap;
pub mod model;
pub mod report;
pub mod store;
pub mod tables;

mod bytes;

/// Where in a stream a problem was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Position {
    Byte(usize),
    /// 1-based.
    Line(usize),
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Position::Byte(b) => write!(f, "byte {b}"),
            Position::Line(l) => write!(f, "line {l}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FormatError {
    #[error("unknown magic {found:?}, expected {expected}")]
    Magic { found: String, expected: &'static str },
    #[error("{at}: stream ends early ({what})")]
    Truncated { at: Position, what: String },
    #[error("{at}: {msg}")]
    Invalid { at: Position, msg: String },
    #[error("{at}: unexpected trailing data")]
    Trailing { at: Position },
}

impl FormatError {
    pub(crate) fn invalid(at: Position, msg: impl Into<String>) -> Self {
        FormatError::Invalid { at, msg: msg.into() }
    }

    pub(crate) fn truncated(at: Position, what: impl Into<String>) -> Self {
        FormatError::Truncated { at, what: what.into() }
    }

    pub(crate) fn magic(found: &[u8], expected: &'static str) -> Self {
        FormatError::Magic {
            found: String::from_utf8_lossy(&found[..found.len().min(4)]).into_owned(),
            expected,
        }
    }
}

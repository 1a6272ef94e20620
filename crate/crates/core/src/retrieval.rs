//! Exact nearest-neighbour search over a geotagged embedding database.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::geo::GeoPose;
use crate::linalg::{norm, sq_dist};

/// Stored embeddings must have unit norm within this tolerance.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RetrievalError {
    #[error("database needs at least one entry")]
    Empty,
    #[error("{ids} ids, {poses} poses and {embeddings} embeddings do not line up")]
    LengthMismatch {
        ids: usize,
        poses: usize,
        embeddings: usize,
    },
    #[error("duplicate id {id:?} at entry {index}")]
    DuplicateId { id: String, index: usize },
    #[error("entry {index} has dimension {actual}, expected {expected}")]
    EntryDimension {
        index: usize,
        expected: usize,
        actual: usize,
    },
    #[error("entry {index} has norm {norm}, not unit length")]
    NotUnit { index: usize, norm: f64 },
    #[error("query has dimension {actual}, database has {expected}")]
    QueryDimension { expected: usize, actual: usize },
    #[error("k = {k} is outside 1..={size}")]
    K { k: usize, size: usize },
}

/// One ranked candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub index: usize,
    pub distance: f64,
}

/// Candidates in ascending distance, ties by ascending database index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RankedMatches(pub Vec<Match>);

impl RankedMatches {
    pub fn as_slice(&self) -> &[Match] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn best(&self) -> Option<&Match> {
        self.0.first()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Match> {
        self.0.iter()
    }
}

fn rank_order(a: &Match, b: &Match) -> Ordering {
    a.distance
        .total_cmp(&b.distance)
        .then(a.index.cmp(&b.index))
}

/// Immutable store of `(id, pose, unit embedding)` in canonical index order.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoDatabase {
    ids: Vec<String>,
    poses: Vec<GeoPose>,
    /// Row-major, one row of `dim` per entry.
    embeddings: Vec<f64>,
    dim: usize,
}

impl GeoDatabase {
    pub fn build(
        ids: Vec<String>,
        poses: Vec<GeoPose>,
        embeddings: Vec<Vec<f64>>,
    ) -> Result<Self, RetrievalError> {
        if ids.len() != poses.len() || ids.len() != embeddings.len() {
            return Err(RetrievalError::LengthMismatch {
                ids: ids.len(),
                poses: poses.len(),
                embeddings: embeddings.len(),
            });
        }
        let dim = embeddings.first().ok_or(RetrievalError::Empty)?.len();
        let mut seen = BTreeSet::new();
        for (index, id) in ids.iter().enumerate() {
            if !seen.insert(id.as_str()) {
                return Err(RetrievalError::DuplicateId {
                    id: id.clone(),
                    index,
                });
            }
        }
        let mut flat = Vec::with_capacity(dim * embeddings.len());
        for (index, e) in embeddings.iter().enumerate() {
            if e.len() != dim || dim == 0 {
                return Err(RetrievalError::EntryDimension {
                    index,
                    expected: dim,
                    actual: e.len(),
                });
            }
            let n = norm(e);
            if !((n - 1.0).abs() <= UNIT_NORM_TOLERANCE) {
                return Err(RetrievalError::NotUnit { index, norm: n });
            }
            flat.extend_from_slice(e);
        }
        Ok(Self {
            ids,
            poses,
            embeddings: flat,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn poses(&self) -> &[GeoPose] {
        &self.poses
    }

    pub fn embedding(&self, index: usize) -> &[f64] {
        &self.embeddings[index * self.dim..(index + 1) * self.dim]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|i| i == id)
    }

    /// The `k` entries closest to `q` in Euclidean distance.
    pub fn query(&self, q: &[f64], k: usize) -> Result<RankedMatches, RetrievalError> {
        if q.len() != self.dim {
            return Err(RetrievalError::QueryDimension {
                expected: self.dim,
                actual: q.len(),
            });
        }
        if k == 0 || k > self.len() {
            return Err(RetrievalError::K { k, size: self.len() });
        }
        let mut all: Vec<Match> = self
            .embeddings
            .chunks_exact(self.dim)
            .enumerate()
            .map(|(index, e)| Match {
                index,
                distance: libm::sqrt(sq_dist(q, e)),
            })
            .collect();
        if k < all.len() {
            all.select_nth_unstable_by(k - 1, rank_order);
            all.truncate(k);
        }
        all.sort_unstable_by(rank_order);
        Ok(RankedMatches(all))
    }

    /// Pose and id of the best match: the localization answer for `q`.
    pub fn localize(&self, q: &[f64]) -> Result<(GeoPose, &str), RetrievalError> {
        let top = self.query(q, 1)?;
        let index = top.0[0].index;
        Ok((self.poses[index], self.ids[index].as_str()))
    }
}

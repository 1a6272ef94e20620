//! Top-1 Recall@D and Recall@N over a query set.
//!
//! Both thresholds are inclusive: an error exactly equal to `D` (or to the
//! well-localized radius) counts as a success.

use alloc::string::String;
use alloc::vec::Vec;

use crate::descriptor::{pyramid_histogram, DescriptorError};
use crate::geo::{haversine_m, GeoPose};
use crate::labelmap::LabelMap;
use crate::metric::{EmbeddingModel, MetricError};
use crate::retrieval::{GeoDatabase, RankedMatches, RetrievalError};

pub const DEFAULT_WELL_LOCALIZED_M: f64 = 25.0;
pub const DEFAULT_D_GRID: [f64; 8] = [5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 40.0, 50.0];
pub const DEFAULT_N_GRID: [usize; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("invalid grid: {0}")]
    Grid(&'static str),
    #[error("well-localized radius must be finite and > 0, got {0}")]
    Radius(f64),
    #[error("no queries to evaluate")]
    EmptyQueries,
    #[error("top-1 error {value} of query {index} is not a finite non-negative distance")]
    BadError { index: usize, value: f64 },
    #[error("query {query} has {have} candidates, Recall@N needs {need}")]
    InsufficientCandidates { query: usize, have: usize, need: usize },
    #[error("{ranked} ranked lists for {queries} ground-truth poses")]
    LengthMismatch { ranked: usize, queries: usize },
    #[error("candidate index {index} is outside the {len}-entry database")]
    CandidateIndex { index: usize, len: usize },
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

/// Threshold grids and the well-localized radius.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    d_grid: Vec<f64>,
    n_grid: Vec<usize>,
    well_localized_m: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            d_grid: DEFAULT_D_GRID.to_vec(),
            n_grid: DEFAULT_N_GRID.to_vec(),
            well_localized_m: DEFAULT_WELL_LOCALIZED_M,
        }
    }
}

impl EvalConfig {
    pub fn new(d_grid: Vec<f64>, n_grid: Vec<usize>, well_localized_m: f64) -> Result<Self, EvalError> {
        check_d_grid(&d_grid)?;
        check_n_grid(&n_grid)?;
        if !(well_localized_m.is_finite() && well_localized_m > 0.0) {
            return Err(EvalError::Radius(well_localized_m));
        }
        Ok(Self {
            d_grid,
            n_grid,
            well_localized_m,
        })
    }

    pub fn d_grid(&self) -> &[f64] {
        &self.d_grid
    }

    pub fn n_grid(&self) -> &[usize] {
        &self.n_grid
    }

    pub fn well_localized_m(&self) -> f64 {
        self.well_localized_m
    }

    /// Candidates retrieved per query.
    pub fn max_n(&self) -> usize {
        *self.n_grid.last().expect("validated non-empty")
    }
}

fn check_d_grid(grid: &[f64]) -> Result<(), EvalError> {
    if grid.is_empty() {
        return Err(EvalError::Grid("D grid is empty"));
    }
    if !grid.iter().all(|d| d.is_finite() && *d > 0.0) {
        return Err(EvalError::Grid("D thresholds must be finite and positive"));
    }
    if !grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(EvalError::Grid("D grid must be strictly ascending"));
    }
    Ok(())
}

fn check_n_grid(grid: &[usize]) -> Result<(), EvalError> {
    if grid.is_empty() {
        return Err(EvalError::Grid("N grid is empty"));
    }
    if grid[0] == 0 {
        return Err(EvalError::Grid("N values must be positive"));
    }
    if !grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(EvalError::Grid("N grid must be strictly ascending"));
    }
    Ok(())
}

/// Fraction of queries whose rank-1 error is at most `D`, for each `D`.
pub fn top1_recall_at_d(top1_errors: &[f64], d_grid: &[f64]) -> Result<Vec<(f64, f64)>, EvalError> {
    check_d_grid(d_grid)?;
    if top1_errors.is_empty() {
        return Err(EvalError::EmptyQueries);
    }
    if let Some((index, &value)) = top1_errors
        .iter()
        .enumerate()
        .find(|(_, e)| !(e.is_finite() && **e >= 0.0))
    {
        return Err(EvalError::BadError { index, value });
    }
    let total = top1_errors.len() as f64;
    Ok(d_grid
        .iter()
        .map(|&d| {
            let hits = top1_errors.iter().filter(|&&e| e <= d).count();
            (d, hits as f64 / total)
        })
        .collect())
}

/// 1-based rank of the first candidate within `radius_m` of `truth`.
pub fn first_well_localized_rank(
    ranked: &RankedMatches,
    truth: &GeoPose,
    db_poses: &[GeoPose],
    radius_m: f64,
) -> Result<Option<usize>, EvalError> {
    for (rank, m) in ranked.iter().enumerate() {
        let pose = db_poses.get(m.index).ok_or(EvalError::CandidateIndex {
            index: m.index,
            len: db_poses.len(),
        })?;
        if haversine_m(pose, truth) <= radius_m {
            return Ok(Some(rank + 1));
        }
    }
    Ok(None)
}

/// Fraction of queries with a well-localized candidate among the top `N`, for each `N`.
pub fn recall_at_n(
    ranked: &[RankedMatches],
    ground_truth: &[GeoPose],
    db_poses: &[GeoPose],
    n_grid: &[usize],
    well_localized_m: f64,
) -> Result<Vec<(usize, f64)>, EvalError> {
    check_n_grid(n_grid)?;
    if !(well_localized_m.is_finite() && well_localized_m > 0.0) {
        return Err(EvalError::Radius(well_localized_m));
    }
    if ranked.len() != ground_truth.len() {
        return Err(EvalError::LengthMismatch {
            ranked: ranked.len(),
            queries: ground_truth.len(),
        });
    }
    if ranked.is_empty() {
        return Err(EvalError::EmptyQueries);
    }
    let need = *n_grid.last().unwrap();
    let mut first_ranks = Vec::with_capacity(ranked.len());
    for (query, (r, truth)) in ranked.iter().zip(ground_truth).enumerate() {
        if r.len() < need {
            return Err(EvalError::InsufficientCandidates {
                query,
                have: r.len(),
                need,
            });
        }
        first_ranks.push(first_well_localized_rank(r, truth, db_poses, well_localized_m)?);
    }
    Ok(recall_curve(&first_ranks, n_grid))
}

fn recall_curve(first_ranks: &[Option<usize>], n_grid: &[usize]) -> Vec<(usize, f64)> {
    let total = first_ranks.len() as f64;
    n_grid
        .iter()
        .map(|&n| {
            let hits = first_ranks.iter().filter(|r| matches!(r, Some(k) if *k <= n)).count();
            (n, hits as f64 / total)
        })
        .collect()
}

/// Diagnostics for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutcome {
    pub query_id: String,
    pub top1_id: String,
    pub top1_error_m: f64,
    /// 1-based rank of the first well-localized candidate, if any was retrieved.
    pub best_rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub well_localized_m: f64,
    pub recall_at_d: Vec<(f64, f64)>,
    pub recall_at_n: Vec<(usize, f64)>,
    pub per_query: Vec<QueryOutcome>,
}

impl EvalReport {
    /// Both curves lie in `[0, 1]` and never decrease.
    pub fn is_consistent(&self) -> bool {
        let in_range = |f: f64| (0.0..=1.0).contains(&f);
        self.recall_at_d.iter().all(|&(_, f)| in_range(f))
            && self.recall_at_n.iter().all(|&(_, f)| in_range(f))
            && self.recall_at_d.windows(2).all(|w| w[0].1 <= w[1].1)
            && self.recall_at_n.windows(2).all(|w| w[0].1 <= w[1].1)
    }

    pub fn recall_at(&self, n: usize) -> Option<f64> {
        self.recall_at_n.iter().find(|(k, _)| *k == n).map(|&(_, f)| f)
    }
}

/// A query already mapped into embedding space.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedQuery {
    pub id: String,
    pub embedding: Vec<f64>,
    pub pose: GeoPose,
}

/// A query label map with its withheld ground-truth pose.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledQuery {
    pub id: String,
    pub map: LabelMap,
    pub pose: GeoPose,
}

/// Retrieves `max(n_grid)` candidates per query and scores both metrics.
pub fn evaluate_embeddings(
    db: &GeoDatabase,
    queries: &[EmbeddedQuery],
    cfg: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    if queries.is_empty() {
        return Err(EvalError::EmptyQueries);
    }
    let k = cfg.max_n();
    if k > db.len() {
        return Err(EvalError::InsufficientCandidates {
            query: 0,
            have: db.len(),
            need: k,
        });
    }
    let mut errors = Vec::with_capacity(queries.len());
    let mut first_ranks = Vec::with_capacity(queries.len());
    let mut per_query = Vec::with_capacity(queries.len());
    for q in queries {
        let ranked = db.query(&q.embedding, k)?;
        let top = ranked.0[0].index;
        let err = haversine_m(&db.poses()[top], &q.pose);
        let best_rank = first_well_localized_rank(&ranked, &q.pose, db.poses(), cfg.well_localized_m)?;
        errors.push(err);
        first_ranks.push(best_rank);
        per_query.push(QueryOutcome {
            query_id: q.id.clone(),
            top1_id: db.ids()[top].clone(),
            top1_error_m: err,
            best_rank,
        });
    }
    Ok(EvalReport {
        well_localized_m: cfg.well_localized_m,
        recall_at_d: top1_recall_at_d(&errors, cfg.d_grid())?,
        recall_at_n: recall_curve(&first_ranks, cfg.n_grid()),
        per_query,
    })
}

/// Full pipeline: pyramid histogram, embedding, retrieval, metrics.
pub fn evaluate(
    db: &GeoDatabase,
    model: &EmbeddingModel,
    levels: u32,
    queries: &[LabeledQuery],
    cfg: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    let embedded = queries
        .iter()
        .map(|q| {
            let raw = pyramid_histogram(&q.map, levels)?;
            Ok(EmbeddedQuery {
                id: q.id.clone(),
                embedding: model.embed(raw.values())?,
                pose: q.pose,
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    evaluate_embeddings(db, &embedded, cfg)
}

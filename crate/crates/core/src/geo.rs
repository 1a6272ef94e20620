//! Geographic poses, great-circle distance and GPS-radius triplet mining.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{seq::index, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sphere radius used for every distance in the crate.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Default positive radius for mining.
pub const DEFAULT_R_POS_M: f64 = 10.0;
/// Default negative floor; equal to the well-localized threshold so that
/// negatives are exactly the poses that would count as localization failures.
pub const DEFAULT_R_NEG_MIN_M: f64 = 25.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeoError {
    #[error("latitude {0} is not a finite value in [-90, 90]")]
    Latitude(f64),
    #[error("longitude {0} is not a finite value in [-180, 180]")]
    Longitude(f64),
    #[error("mining needs r_pos < r_neg_min (got {r_pos} and {r_neg_min})")]
    Radii { r_pos: f64, r_neg_min: f64 },
    #[error("mining needs per_anchor >= 1")]
    PerAnchor,
    #[error("mining needs at least 3 poses, got {0}")]
    TooFewPoses(usize),
    #[error("no triplets could be mined ({skipped} anchors lacked a positive or a negative)")]
    NoTriplets { skipped: usize },
}

/// A WGS84-style latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "PoseFields"))]
pub struct GeoPose {
    lat: f64,
    lon: f64,
}

#[cfg(feature = "serde")]
#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseFields {
    lat: f64,
    lon: f64,
}

#[cfg(feature = "serde")]
impl TryFrom<PoseFields> for GeoPose {
    type Error = GeoError;

    fn try_from(p: PoseFields) -> Result<Self, GeoError> {
        GeoPose::new(p.lat, p.lon)
    }
}

impl GeoPose {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(GeoError::Latitude(lat));
        }
        if !lon.is_finite() || !(-180.0..=180.0).contains(&lon) {
            return Err(GeoError::Longitude(lon));
        }
        Ok(Self { lat, lon })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }

    /// The pose displaced `north_m` metres north and `east_m` metres east,
    /// using a local equirectangular approximation.
    pub fn offset_m(&self, north_m: f64, east_m: f64) -> Result<Self, GeoError> {
        let lat = self.lat + meters_to_degrees(north_m);
        let cos_lat = libm::cos(self.lat.to_radians());
        let lon = self.lon + meters_to_degrees(east_m) / cos_lat;
        Self::new(lat, lon)
    }
}

/// Arc length in metres expressed as degrees of a great circle.
pub fn meters_to_degrees(m: f64) -> f64 {
    m * 180.0 / (PI * EARTH_RADIUS_M)
}

/// Great-circle distance between two poses in metres.
pub fn haversine_m(a: &GeoPose, b: &GeoPose) -> f64 {
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let half_dphi = (phi2 - phi1) / 2.0;
    let half_dlambda = (b.lon - a.lon).to_radians() / 2.0;
    let s1 = libm::sin(half_dphi);
    let s2 = libm::sin(half_dlambda);
    let h = (s1 * s1 + libm::cos(phi1) * libm::cos(phi2) * s2 * s2).clamp(0.0, 1.0);
    2.0 * EARTH_RADIUS_M * libm::atan2(libm::sqrt(h), libm::sqrt(1.0 - h))
}

/// Indices into the database: the anchor, a nearby positive and a distant negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiningParams {
    /// Positives lie within this distance of the anchor (inclusive).
    pub r_pos: f64,
    /// Negatives lie at least this far from the anchor (inclusive).
    pub r_neg_min: f64,
    pub per_anchor: usize,
    pub seed: u64,
}

impl Default for MiningParams {
    fn default() -> Self {
        Self {
            r_pos: DEFAULT_R_POS_M,
            r_neg_min: DEFAULT_R_NEG_MIN_M,
            per_anchor: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinedTriplets {
    pub triplets: Vec<Triplet>,
    /// Anchors that had no positive or no negative.
    pub skipped_anchors: usize,
}

/// Draws (anchor, positive, negative) triplets from GPS radii alone.
///
/// For each anchor with `P` positives and `N` negatives, `min(per_anchor, P*N)`
/// distinct pairs are sampled uniformly without replacement from a ChaCha8
/// stream keyed by `(seed, anchor)`. Output is sorted by anchor, then by the
/// order of the pair in the `positive-major` enumeration.
pub fn mine_triplets(poses: &[GeoPose], params: &MiningParams) -> Result<MinedTriplets, GeoError> {
    // NaN radii fail the comparison too.
    if !(params.r_pos < params.r_neg_min) {
        return Err(GeoError::Radii {
            r_pos: params.r_pos,
            r_neg_min: params.r_neg_min,
        });
    }
    if params.per_anchor == 0 {
        return Err(GeoError::PerAnchor);
    }
    if poses.len() < 3 {
        return Err(GeoError::TooFewPoses(poses.len()));
    }

    let mut triplets = Vec::new();
    let mut skipped = 0;
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for (anchor, a) in poses.iter().enumerate() {
        positives.clear();
        negatives.clear();
        for (j, b) in poses.iter().enumerate() {
            if j == anchor {
                continue;
            }
            let d = haversine_m(a, b);
            if d <= params.r_pos {
                positives.push(j);
            } else if d >= params.r_neg_min {
                negatives.push(j);
            }
        }
        if positives.is_empty() || negatives.is_empty() {
            skipped += 1;
            continue;
        }
        let combos = positives.len() * negatives.len();
        let amount = params.per_anchor.min(combos);
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(anchor as u64);
        let mut picks = index::sample(&mut rng, combos, amount).into_vec();
        picks.sort_unstable();
        triplets.extend(picks.into_iter().map(|c| Triplet {
            anchor,
            positive: positives[c / negatives.len()],
            negative: negatives[c % negatives.len()],
        }));
    }
    if triplets.is_empty() {
        return Err(GeoError::NoTriplets { skipped });
    }
    Ok(MinedTriplets {
        triplets,
        skipped_anchors: skipped,
    })
}

//! Seeded "same route, different conditions" benchmark.
//!
//! A world is a straight northward route of places. Every place has a
//! ground-truth scene: a fixed blocky partition of the image into rectangular
//! regions, each carrying a class. Walking from one place to the next
//! redraws a `scene_drift` fraction of the region classes, so nearby places
//! look alike and scene overlap decays with route distance.
//!
//! An observation of a place under a condition yields two label maps. The
//! semantic channel flips each pixel to another class with probability
//! `p_sem`. The appearance channel replaces pixels with random classes with
//! probability `p_app` and then rotates every class id by one per-observation
//! offset, a stand-in for a global illumination shift.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use alloc::{borrow::ToOwned, format};
use core::f64::consts::PI;

use rand::{seq::index, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geo::{meters_to_degrees, GeoError, GeoPose};
use crate::labelmap::LabelMap;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid world configuration: {0}")]
    World(&'static str),
    #[error("invalid condition {name:?}: {reason}")]
    Condition { name: String, reason: &'static str },
    #[error("cannot pick {requested} query places from {available}")]
    QueryPlaces { requested: usize, available: usize },
    #[error("place {place} is outside the {len}-place world")]
    Place { place: usize, len: usize },
    #[error("route leaves the valid coordinate range: {0}")]
    Route(#[from] GeoError),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct WorldConfig {
    pub num_places: usize,
    /// Metres between consecutive places.
    pub spacing_m: f64,
    pub map_w: u32,
    pub map_h: u32,
    pub num_classes: u16,
    /// Fraction of regions whose class is redrawn between adjacent places.
    pub scene_drift: f64,
    /// Region grid; cut positions are drawn at random once per world.
    pub regions_x: u32,
    pub regions_y: u32,
    pub origin: GeoPose,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            num_places: 232,
            // Neighbours stay inside the default 10 m positive radius even
            // with a metre of jitter at each end.
            spacing_m: 8.0,
            map_w: 64,
            map_h: 48,
            num_classes: 8,
            scene_drift: 0.1,
            regions_x: 8,
            regions_y: 6,
            origin: GeoPose::new(51.7520, -1.2577).expect("valid origin"),
            seed: 2020,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let err = |m| Err(SynthError::World(m));
        if self.num_places == 0 {
            return err("num_places must be >= 1");
        }
        if !(self.spacing_m.is_finite() && self.spacing_m > 0.0) {
            return err("spacing_m must be finite and > 0");
        }
        if self.map_w == 0 || self.map_h == 0 {
            return err("map dimensions must be >= 1");
        }
        if self.num_classes < 2 {
            return err("num_classes must be >= 2");
        }
        if !(0.0..=1.0).contains(&self.scene_drift) {
            return err("scene_drift must lie in [0, 1]");
        }
        if self.regions_x == 0 || self.regions_y == 0 || self.regions_x > self.map_w || self.regions_y > self.map_h {
            return err("region grid must be between 1x1 and the map size");
        }
        self.place_pose(self.num_places - 1)?;
        Ok(())
    }

    /// Pose of place `i`: `i * spacing_m` metres north of the origin.
    pub fn place_pose(&self, i: usize) -> Result<GeoPose, SynthError> {
        let lat = self.origin.lat() + meters_to_degrees(i as f64 * self.spacing_m);
        Ok(GeoPose::new(lat, self.origin.lon())?)
    }
}

/// Capture condition of one pass along the route.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ConditionSpec {
    pub name: String,
    pub p_sem: f64,
    pub p_app: f64,
    pub pose_jitter_m: f64,
}

impl ConditionSpec {
    /// Reference pass used for the database.
    pub fn reference() -> Self {
        Self {
            name: "reference".to_owned(),
            p_sem: 0.02,
            p_app: 0.1,
            pose_jitter_m: 1.0,
        }
    }

    /// Harsh query pass: appearance changes a lot, semantics barely.
    pub fn overcast_winter() -> Self {
        Self {
            name: "overcast-winter".to_owned(),
            p_sem: 0.05,
            p_app: 0.5,
            pose_jitter_m: 3.0,
        }
    }

    pub fn noiseless(name: &str) -> Self {
        Self {
            name: name.to_owned(),
            p_sem: 0.0,
            p_app: 0.0,
            pose_jitter_m: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let reason = if !(0.0..=1.0).contains(&self.p_sem) {
            "p_sem must lie in [0, 1]"
        } else if !(0.0..=1.0).contains(&self.p_app) {
            "p_app must lie in [0, 1]"
        } else if !(self.pose_jitter_m.is_finite() && self.pose_jitter_m >= 0.0) {
            "pose_jitter_m must be finite and >= 0"
        } else {
            return Ok(());
        };
        Err(SynthError::Condition {
            name: self.name.clone(),
            reason,
        })
    }
}

/// Ground truth for every place on the route.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    config: WorldConfig,
    scenes: Vec<LabelMap>,
    poses: Vec<GeoPose>,
}

impl World {
    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.scenes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenes.is_empty()
    }

    pub fn scene(&self, place: usize) -> &LabelMap {
        &self.scenes[place]
    }

    pub fn pose(&self, place: usize) -> GeoPose {
        self.poses[place]
    }
}

/// Sorted interior cut positions splitting `extent` into `parts` non-empty spans.
fn random_cuts(rng: &mut ChaCha8Rng, extent: u32, parts: u32) -> Vec<u32> {
    let mut cuts: Vec<u32> = index::sample(rng, (extent - 1) as usize, (parts - 1) as usize)
        .into_iter()
        .map(|c| c as u32 + 1)
        .collect();
    cuts.sort_unstable();
    let mut edges = Vec::with_capacity(parts as usize + 1);
    edges.push(0);
    edges.extend(cuts);
    edges.push(extent);
    edges
}

pub fn generate_world(cfg: &WorldConfig) -> Result<World, SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let xs = random_cuts(&mut rng, cfg.map_w, cfg.regions_x);
    let ys = random_cuts(&mut rng, cfg.map_h, cfg.regions_y);

    // Region id of every pixel, fixed for the whole route.
    let (w, h) = (cfg.map_w as usize, cfg.map_h as usize);
    let mut region_of = vec![0usize; w * h];
    for ry in 0..cfg.regions_y as usize {
        for rx in 0..cfg.regions_x as usize {
            let id = ry * cfg.regions_x as usize + rx;
            for y in ys[ry] as usize..ys[ry + 1] as usize {
                for x in xs[rx] as usize..xs[rx + 1] as usize {
                    region_of[y * w + x] = id;
                }
            }
        }
    }

    let num_regions = (cfg.regions_x * cfg.regions_y) as usize;
    let classes = cfg.num_classes;
    let redraw = libm::round(cfg.scene_drift * num_regions as f64) as usize;
    let mut region_class: Vec<u16> = (0..num_regions).map(|_| rng.random_range(0..classes)).collect();

    let mut scenes = Vec::with_capacity(cfg.num_places);
    let mut poses = Vec::with_capacity(cfg.num_places);
    for place in 0..cfg.num_places {
        if place > 0 {
            for r in index::sample(&mut rng, num_regions, redraw) {
                region_class[r] = other_class(&mut rng, region_class[r], classes);
            }
        }
        let labels = region_of.iter().map(|&r| region_class[r]).collect();
        scenes.push(LabelMap::new(cfg.map_w, cfg.map_h, classes, labels).expect("labels in range"));
        poses.push(cfg.place_pose(place)?);
    }
    Ok(World {
        config: cfg.clone(),
        scenes,
        poses,
    })
}

/// Uniform over the `classes - 1` classes different from `current`.
fn other_class(rng: &mut ChaCha8Rng, current: u16, classes: u16) -> u16 {
    let shift = rng.random_range(1..classes) as u32;
    ((current as u32 + shift) % classes as u32) as u16
}

/// FNV-1a, for folding a condition name into a seed.
fn name_hash(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn observation_rng(world_seed: u64, place: usize, cond: &str, draw: u32, stream: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&world_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&(place as u64).to_le_bytes());
    seed[16..24].copy_from_slice(&name_hash(cond).to_le_bytes());
    seed[24..].copy_from_slice(&(draw as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(stream);
    rng
}

/// One capture of a place: both channels and the recorded pose.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub semantic: LabelMap,
    pub appearance: LabelMap,
    pub pose: GeoPose,
}

/// Observes `place` under `cond`; fully determined by `(world seed, place, cond.name, draw)`.
pub fn observe(world: &World, place: usize, cond: &ConditionSpec, draw: u32) -> Result<View, SynthError> {
    cond.validate()?;
    if place >= world.len() {
        return Err(SynthError::Place {
            place,
            len: world.len(),
        });
    }
    let seed = world.config.seed;
    let truth = world.scene(place);
    let classes = truth.num_classes();

    let mut rng = observation_rng(seed, place, &cond.name, draw, 0);
    let semantic = truth
        .labels()
        .iter()
        .map(|&l| {
            if rng.random::<f64>() < cond.p_sem {
                other_class(&mut rng, l, classes)
            } else {
                l
            }
        })
        .collect();

    let mut rng = observation_rng(seed, place, &cond.name, draw, 1);
    let rotation = rng.random_range(0..classes) as u32;
    let appearance = truth
        .labels()
        .iter()
        .map(|&l| {
            let l = if rng.random::<f64>() < cond.p_app {
                rng.random_range(0..classes)
            } else {
                l
            };
            ((l as u32 + rotation) % classes as u32) as u16
        })
        .collect();

    let mut pose = world.pose(place);
    if cond.pose_jitter_m > 0.0 {
        let mut rng = observation_rng(seed, place, &cond.name, draw, 2);
        // Uniform over the disc of radius pose_jitter_m.
        let r = cond.pose_jitter_m * libm::sqrt(rng.random::<f64>());
        let theta = 2.0 * PI * rng.random::<f64>();
        pose = pose.offset_m(r * libm::cos(theta), r * libm::sin(theta))?;
    }

    let (w, h) = (truth.width(), truth.height());
    Ok(View {
        semantic: LabelMap::new(w, h, classes, semantic).expect("labels in range"),
        appearance: LabelMap::new(w, h, classes, appearance).expect("labels in range"),
        pose,
    })
}

/// Everything needed to produce a database/query benchmark.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct DatasetConfig {
    pub world: WorldConfig,
    pub db_condition: ConditionSpec,
    pub query_condition: ConditionSpec,
    /// Number of distinct places that receive queries.
    pub query_places: usize,
    pub queries_per_place: u32,
}

impl Default for DatasetConfig {
    /// 232 database places and 39 queries: a tenth of a 2318-image reference
    /// traversal and a 390-image query traversal.
    fn default() -> Self {
        Self {
            world: WorldConfig::default(),
            db_condition: ConditionSpec::reference(),
            query_condition: ConditionSpec::overcast_winter(),
            query_places: 39,
            queries_per_place: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Db,
    Query,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Db => "db",
            Split::Query => "query",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// `<split>_<place>_<draw>`, place zero-padded to four digits.
    pub id: String,
    pub split: Split,
    pub place: usize,
    pub draw: u32,
    pub view: View,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub config: DatasetConfig,
    pub database: Vec<Observation>,
    pub queries: Vec<Observation>,
    /// Places that received queries, ascending.
    pub query_places: Vec<usize>,
}

pub fn observation_id(split: Split, place: usize, draw: u32) -> String {
    format!("{}_{place:04}_{draw}", split.as_str())
}

/// Seed stream for picking query places; distinct from the world stream.
const QUERY_PICK_STREAM: u64 = 7;

/// One database observation per place under `db_condition`, then
/// `queries_per_place` observations under `query_condition` at a seeded
/// subset of places.
pub fn generate_dataset(cfg: &DatasetConfig) -> Result<Dataset, SynthError> {
    cfg.db_condition.validate()?;
    cfg.query_condition.validate()?;
    if cfg.query_places > cfg.world.num_places {
        return Err(SynthError::QueryPlaces {
            requested: cfg.query_places,
            available: cfg.world.num_places,
        });
    }
    let world = generate_world(&cfg.world)?;

    let database = (0..world.len())
        .map(|place| {
            Ok(Observation {
                id: observation_id(Split::Db, place, 0),
                split: Split::Db,
                place,
                draw: 0,
                view: observe(&world, place, &cfg.db_condition, 0)?,
            })
        })
        .collect::<Result<Vec<_>, SynthError>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.world.seed);
    rng.set_stream(QUERY_PICK_STREAM);
    let mut query_places = index::sample(&mut rng, world.len(), cfg.query_places).into_vec();
    query_places.sort_unstable();

    let mut queries = Vec::with_capacity(query_places.len() * cfg.queries_per_place as usize);
    for &place in &query_places {
        for draw in 0..cfg.queries_per_place {
            queries.push(Observation {
                id: observation_id(Split::Query, place, draw),
                split: Split::Query,
                place,
                draw,
                view: observe(&world, place, &cfg.query_condition, draw)?,
            });
        }
    }
    Ok(Dataset {
        config: cfg.clone(),
        database,
        queries,
        query_places,
    })
}

//! On-disk layout of a generated benchmark.
//!
//! ```text
//! out/
//!   manifest.toml
//!   db_poses.csv  query_poses.csv
//!   semantic/db/db_0000_0.slm ...    semantic/query/query_0017_0.slm ...
//!   appearance/db/db_0000_0.slm ...  appearance/query/query_0017_0.slm ...
//! ```
//!
//! Pose rows are in observation order, which is also file-name order, so a
//! featurized map directory lines up with its pose table.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use semloc_core::{Dataset, DatasetConfig, Observation};

use crate::formats::labelmap::{save_label_map, MapFormat};
use crate::formats::tables::{save_poses_csv, PoseRecord};
use crate::fsio::replace_dir_atomic;

pub const MANIFEST: &str = "manifest.toml";
pub const MANIFEST_FORMAT: &str = "semloc-synth";

pub const CHANNELS: [&str; 2] = ["semantic", "appearance"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub database_count: usize,
    pub query_count: usize,
    /// Places that received queries, ascending.
    pub query_place_indices: Vec<usize>,
    pub config: DatasetConfig,
}

impl Manifest {
    pub fn for_dataset(ds: &Dataset) -> Self {
        Self {
            format: MANIFEST_FORMAT.into(),
            version: 1,
            database_count: ds.database.len(),
            query_count: ds.queries.len(),
            query_place_indices: ds.query_places.clone(),
            config: ds.config.clone(),
        }
    }
}

pub fn pose_records(observations: &[Observation]) -> Vec<PoseRecord> {
    observations
        .iter()
        .map(|o| PoseRecord {
            id: o.id.clone(),
            pose: o.view.pose,
        })
        .collect()
}

fn write_split(root: &Path, split: &str, observations: &[Observation]) -> io::Result<()> {
    for channel in CHANNELS {
        let dir = root.join(channel).join(split);
        fs::create_dir_all(&dir)?;
        for o in observations {
            let map = if channel == "semantic" {
                &o.view.semantic
            } else {
                &o.view.appearance
            };
            fs::write(dir.join(format!("{}.slm", o.id)), save_label_map(map, MapFormat::Binary))?;
        }
    }
    Ok(())
}

/// Writes `ds` under `out`, replacing a previous dataset directory there.
pub fn write_dataset(ds: &Dataset, out: &Path) -> io::Result<()> {
    let manifest = toml::to_string(&Manifest::for_dataset(ds)).map_err(io::Error::other)?;
    replace_dir_atomic(out, MANIFEST, |root| {
        write_split(root, "db", &ds.database)?;
        write_split(root, "query", &ds.queries)?;
        fs::write(root.join("db_poses.csv"), save_poses_csv(&pose_records(&ds.database)))?;
        fs::write(root.join("query_poses.csv"), save_poses_csv(&pose_records(&ds.queries)))?;
        fs::write(root.join(MANIFEST), manifest)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use semloc_core::generate_dataset;

    #[test]
    fn manifest_round_trips() {
        let mut cfg = DatasetConfig::default();
        cfg.world.num_places = 12;
        cfg.query_places = 3;
        let ds = generate_dataset(&cfg).unwrap();
        let m = Manifest::for_dataset(&ds);
        let text = toml::to_string(&m).unwrap();
        assert_eq!(toml::from_str::<Manifest>(&text).unwrap(), m);
        assert_eq!(m.query_place_indices, ds.query_places);
    }
}

//! Spatial-pyramid class histograms.
//!
//! Level `l` splits the map into a `2^l x 2^l` grid with cell edges at
//! `floor(i * extent / 2^l)`. Each cell contributes its class-frequency
//! histogram (counts divided by the cell's pixel count). Blocks are
//! concatenated level by level and row-major within a level, so the
//! descriptor has `num_classes * (4^levels - 1) / 3` entries.

use alloc::vec;
use alloc::vec::Vec;

use crate::labelmap::{cell_edge, LabelMap};

/// Three levels give 1 + 4 + 16 = 21 cells.
pub const DEFAULT_LEVELS: u32 = 3;

/// Deeper pyramids would overflow the dimension arithmetic long before they
/// would be useful.
pub const MAX_LEVELS: u32 = 16;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DescriptorError {
    #[error("pyramid depth must be in 1..={MAX_LEVELS}, got {0}")]
    Levels(u32),
    #[error("a {width}x{height} map is too small for {levels} pyramid levels (needs {needed}x{needed})")]
    MapTooSmall {
        width: u32,
        height: u32,
        levels: u32,
        needed: u32,
    },
}

/// Length of a pyramid descriptor: `num_classes * (1 + 4 + ... + 4^(levels-1))`.
///
/// Panics if `levels` is 0 or the result overflows `usize`.
pub fn descriptor_dim(num_classes: usize, levels: u32) -> usize {
    assert!(levels >= 1, "pyramid needs at least one level");
    let cells = (0..levels).fold(0usize, |acc, l| {
        acc.checked_add(1usize.checked_shl(2 * l).expect("pyramid too deep"))
            .expect("pyramid too deep")
    });
    num_classes.checked_mul(cells).expect("descriptor dimension overflows usize")
}

/// The fixed, untrained semantic descriptor of one label map.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDescriptor {
    values: Vec<f64>,
    levels: u32,
    num_classes: u16,
}

impl RawDescriptor {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn num_classes(&self) -> u16 {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Per-cell histogram blocks in output order.
    pub fn blocks(&self) -> core::slice::Chunks<'_, f64> {
        self.values.chunks(self.num_classes as usize)
    }
}

impl AsRef<[f64]> for RawDescriptor {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Computes the spatial-pyramid histogram of `map`.
pub fn pyramid_histogram(map: &LabelMap, levels: u32) -> Result<RawDescriptor, DescriptorError> {
    if levels == 0 || levels > MAX_LEVELS {
        return Err(DescriptorError::Levels(levels));
    }
    let needed = 1u32 << (levels - 1);
    if map.width() < needed || map.height() < needed {
        return Err(DescriptorError::MapTooSmall {
            width: map.width(),
            height: map.height(),
            levels,
            needed,
        });
    }
    let classes = map.num_classes() as usize;
    let mut values = Vec::with_capacity(descriptor_dim(classes, levels));
    let mut counts = vec![0u64; classes];
    for level in 0..levels {
        let parts = 1u32 << level;
        for j in 0..parts {
            let y0 = cell_edge(j, map.height(), parts);
            let y1 = cell_edge(j + 1, map.height(), parts);
            for i in 0..parts {
                let x0 = cell_edge(i, map.width(), parts);
                let x1 = cell_edge(i + 1, map.width(), parts);
                map.count_cell(x0, x1, y0, y1, &mut counts);
                let total = ((x1 - x0) as u64 * (y1 - y0) as u64) as f64;
                values.extend(counts.iter().map(|&c| c as f64 / total));
            }
        }
    }
    Ok(RawDescriptor {
        values,
        levels,
        num_classes: map.num_classes(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{seq::SliceRandom, Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dimensions() {
        assert_eq!(descriptor_dim(8, 1), 8);
        assert_eq!(descriptor_dim(8, 3), 168);
        assert_eq!(descriptor_dim(12, 2), 60);
        assert_eq!(descriptor_dim(1, 4), 85);
    }

    #[test]
    fn uniform_map_is_one_hot() {
        let m = LabelMap::uniform(5, 3, 4, 2).unwrap();
        assert_eq!(pyramid_histogram(&m, 1).unwrap().values(), &[0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn equal_split() {
        let m = LabelMap::new(2, 1, 2, alloc::vec![0, 1]).unwrap();
        assert_eq!(pyramid_histogram(&m, 1).unwrap().values(), &[0.5, 0.5]);
    }

    #[test]
    fn rejects_small_maps_and_bad_depths() {
        let m = LabelMap::uniform(4, 3, 2, 0).unwrap();
        assert!(pyramid_histogram(&m, 2).is_ok());
        assert_eq!(
            pyramid_histogram(&m, 3),
            Err(DescriptorError::MapTooSmall { width: 4, height: 3, levels: 3, needed: 4 })
        );
        assert_eq!(pyramid_histogram(&m, 0), Err(DescriptorError::Levels(0)));
        assert_eq!(pyramid_histogram(&m, 17), Err(DescriptorError::Levels(17)));
    }

    // Independent oracle: for each pixel find the cell containing it at every
    // level by direct range membership, and accumulate.
    fn oracle(m: &LabelMap, levels: u32) -> Vec<f64> {
        let (w, h, c) = (m.width() as usize, m.height() as usize, m.num_classes() as usize);
        let mut out = Vec::new();
        for l in 0..levels {
            let p = 1usize << l;
            let mut counts = vec![vec![0usize; c]; p * p];
            let mut sizes = vec![0usize; p * p];
            for y in 0..h {
                for x in 0..w {
                    let cx = (0..p).find(|&i| x >= i * w / p && x < (i + 1) * w / p).unwrap();
                    let cy = (0..p).find(|&j| y >= j * h / p && y < (j + 1) * h / p).unwrap();
                    counts[cy * p + cx][m.labels()[y * w + x] as usize] += 1;
                    sizes[cy * p + cx] += 1;
                }
            }
            for (cell, size) in counts.iter().zip(&sizes) {
                out.extend(cell.iter().map(|&k| k as f64 / *size as f64));
            }
        }
        out
    }

    #[test]
    fn checkerboard_matches_oracle() {
        let labels: Vec<u16> = (0..16).map(|i| ((i % 4 + i / 4) % 2) as u16).collect();
        let m = LabelMap::new(4, 4, 2, labels).unwrap();
        let d = pyramid_histogram(&m, 2).unwrap();
        assert_eq!(d.len(), 10);
        assert_eq!(d.values(), &[0.5; 10]);
        assert_eq!(d.values(), oracle(&m, 2).as_slice());
    }

    fn random_map(rng: &mut ChaCha8Rng, w: u32, h: u32, c: u16) -> LabelMap {
        let labels = (0..w * h).map(|_| rng.random_range(0..c)).collect();
        LabelMap::new(w, h, c, labels).unwrap()
    }

    #[test]
    fn random_maps_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (w, h) in [(4, 4), (13, 9), (31, 17), (64, 48)] {
            let m = random_map(&mut rng, w, h, 6);
            for levels in 1..=3 {
                let got = pyramid_histogram(&m, levels).unwrap();
                let want = oracle(&m, levels);
                assert_eq!(got.len(), descriptor_dim(6, levels));
                for (g, w) in got.values().iter().zip(&want) {
                    assert!((g - w).abs() < 1e-15);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn blocks_are_normalized(seed in any::<u64>(), w in 4u32..40, h in 4u32..40, c in 1u16..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_map(&mut rng, w, h, c);
            let d = pyramid_histogram(&m, 3).unwrap();
            prop_assert_eq!(d.len(), descriptor_dim(c as usize, 3));
            for block in d.blocks() {
                prop_assert!(block.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
                prop_assert!((block.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn permuting_within_finest_cells_is_invisible(seed in any::<u64>(), w in 4u32..30, h in 4u32..30) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_map(&mut rng, w, h, 5);
            let mut labels = m.labels().to_vec();
            for j in 0..4 {
                for i in 0..4 {
                    let (x0, x1) = (cell_edge(i, w, 4) as usize, cell_edge(i + 1, w, 4) as usize);
                    let (y0, y1) = (cell_edge(j, h, 4) as usize, cell_edge(j + 1, h, 4) as usize);
                    let idx: Vec<usize> = (y0..y1)
                        .flat_map(|y| (x0..x1).map(move |x| y * w as usize + x))
                        .collect();
                    let mut vals: Vec<u16> = idx.iter().map(|&k| labels[k]).collect();
                    vals.shuffle(&mut rng);
                    for (k, v) in idx.into_iter().zip(vals) {
                        labels[k] = v;
                    }
                }
            }
            let shuffled = LabelMap::new(w, h, 5, labels).unwrap();
            prop_assert_eq!(pyramid_histogram(&m, 3).unwrap(), pyramid_histogram(&shuffled, 3).unwrap());
        }

        #[test]
        fn relabeling_permutes_each_block(seed in any::<u64>(), w in 4u32..30, h in 4u32..30) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_map(&mut rng, w, h, 6);
            let mut perm: Vec<u16> = (0..6).collect();
            perm.shuffle(&mut rng);
            let relabeled = LabelMap::new(w, h, 6, m.labels().iter().map(|&l| perm[l as usize]).collect()).unwrap();
            let a = pyramid_histogram(&m, 3).unwrap();
            let b = pyramid_histogram(&relabeled, 3).unwrap();
            for (ba, bb) in a.blocks().zip(b.blocks()) {
                for class in 0..6 {
                    prop_assert_eq!(ba[class], bb[perm[class] as usize]);
                }
            }
        }

        #[test]
        fn single_level_is_global_frequency(seed in any::<u64>(), w in 1u32..30, h in 1u32..30) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_map(&mut rng, w, h, 4);
            let n = (w * h) as f64;
            let freq: Vec<f64> = (0..4u16)
                .map(|c| m.labels().iter().filter(|&&l| l == c).count() as f64 / n)
                .collect();
            let d = pyramid_histogram(&m, 1).unwrap();
            prop_assert_eq!(d.values(), freq.as_slice());
        }
    }
}

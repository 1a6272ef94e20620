//! Dense semantic label maps.

use alloc::vec;
use alloc::vec::Vec;

/// Errors raised while constructing or resampling a [`LabelMap`].
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LabelMapError {
    #[error("label map dimensions must be non-zero (width {width}, height {height}, classes {num_classes})")]
    ZeroDimension {
        width: u32,
        height: u32,
        num_classes: u16,
    },
    #[error("expected {expected} labels for the declared dimensions, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("label {label} at pixel {index} is not below num_classes {num_classes}")]
    LabelOutOfRange {
        index: usize,
        label: u16,
        num_classes: u16,
    },
    #[error("cannot downsample {width}x{height} to {out_w}x{out_h}")]
    InvalidTarget {
        width: u32,
        height: u32,
        out_w: u32,
        out_h: u32,
    },
}

/// A `width x height` grid of class ids, stored row-major with the top row first.
///
/// Every label is strictly below `num_classes`. There is no reserved "void" id.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelMap {
    width: u32,
    height: u32,
    num_classes: u16,
    labels: Vec<u16>,
}

impl LabelMap {
    pub fn new(
        width: u32,
        height: u32,
        num_classes: u16,
        labels: Vec<u16>,
    ) -> Result<Self, LabelMapError> {
        if width == 0 || height == 0 || num_classes == 0 {
            return Err(LabelMapError::ZeroDimension {
                width,
                height,
                num_classes,
            });
        }
        let expected = pixel_count(width, height);
        if labels.len() != expected {
            return Err(LabelMapError::LengthMismatch {
                expected,
                actual: labels.len(),
            });
        }
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
            return Err(LabelMapError::LabelOutOfRange {
                index,
                label,
                num_classes,
            });
        }
        Ok(Self {
            width,
            height,
            num_classes,
            labels,
        })
    }

    /// A map filled with a single class.
    pub fn uniform(
        width: u32,
        height: u32,
        num_classes: u16,
        class: u16,
    ) -> Result<Self, LabelMapError> {
        let n = if width == 0 || height == 0 {
            0
        } else {
            pixel_count(width, height)
        };
        Self::new(width, height, num_classes, vec![class; n])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn num_classes(&self) -> u16 {
        self.num_classes
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<u16> {
        self.labels
    }

    /// Label at column `x`, row `y`.
    ///
    /// Panics when the coordinate is outside the map.
    pub fn get(&self, x: u32, y: u32) -> u16 {
        assert!(x < self.width && y < self.height, "pixel ({x}, {y}) out of bounds");
        self.labels[y as usize * self.width as usize + x as usize]
    }

    /// Row `y` as a slice.
    pub fn row(&self, y: u32) -> &[u16] {
        let w = self.width as usize;
        let start = y as usize * w;
        &self.labels[start..start + w]
    }

    /// Per-class pixel counts over the half-open rectangle `[x0, x1) x [y0, y1)`.
    pub(crate) fn count_cell(&self, x0: u32, x1: u32, y0: u32, y1: u32, counts: &mut [u64]) {
        counts.iter_mut().for_each(|c| *c = 0);
        for y in y0..y1 {
            let row = self.row(y);
            for &label in &row[x0 as usize..x1 as usize] {
                counts[label as usize] += 1;
            }
        }
    }
}

fn pixel_count(width: u32, height: u32) -> usize {
    (width as usize)
        .checked_mul(height as usize)
        .expect("label map pixel count overflows usize")
}

/// Cell boundary `floor(i * extent / parts)`, computed without overflow.
pub(crate) fn cell_edge(i: u32, extent: u32, parts: u32) -> u32 {
    ((i as u64 * extent as u64) / parts as u64) as u32
}

/// Resamples `map` to `out_w x out_h` by taking the modal class of each source cell.
///
/// Output pixel `(i, j)` covers source columns `[floor(i*w/out_w), floor((i+1)*w/out_w))`
/// and the analogous rows. Ties go to the lowest class id.
pub fn downsample_mode(map: &LabelMap, out_w: u32, out_h: u32) -> Result<LabelMap, LabelMapError> {
    if out_w == 0 || out_h == 0 || out_w > map.width || out_h > map.height {
        return Err(LabelMapError::InvalidTarget {
            width: map.width,
            height: map.height,
            out_w,
            out_h,
        });
    }
    let mut counts = vec![0u64; map.num_classes as usize];
    let mut labels = Vec::with_capacity(pixel_count(out_w, out_h));
    for j in 0..out_h {
        let y0 = cell_edge(j, map.height, out_h);
        let y1 = cell_edge(j + 1, map.height, out_h);
        for i in 0..out_w {
            let x0 = cell_edge(i, map.width, out_w);
            let x1 = cell_edge(i + 1, map.width, out_w);
            map.count_cell(x0, x1, y0, y1, &mut counts);
            // Strict `>` keeps the first (lowest) class among equal counts.
            let mut best = 0usize;
            for (class, &c) in counts.iter().enumerate().skip(1) {
                if c > counts[best] {
                    best = class;
                }
            }
            labels.push(best as u16);
        }
    }
    LabelMap::new(out_w, out_h, map.num_classes, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_zero_dimensions_and_bad_labels() {
        assert!(matches!(
            LabelMap::new(0, 1, 2, vec![]),
            Err(LabelMapError::ZeroDimension { .. })
        ));
        assert!(matches!(
            LabelMap::new(1, 1, 0, vec![0]),
            Err(LabelMapError::ZeroDimension { .. })
        ));
        assert_eq!(
            LabelMap::new(1, 1, 2, vec![5]),
            Err(LabelMapError::LabelOutOfRange {
                index: 0,
                label: 5,
                num_classes: 2
            })
        );
        assert!(matches!(
            LabelMap::new(2, 2, 2, vec![0, 1, 1]),
            Err(LabelMapError::LengthMismatch { expected: 4, actual: 3 })
        ));
    }

    #[test]
    fn uniform_map_downsamples_to_its_class() {
        let m = LabelMap::uniform(8, 8, 4, 3).unwrap();
        let d = downsample_mode(&m, 2, 2).unwrap();
        assert_eq!(d.labels(), &[3, 3, 3, 3]);
    }

    #[test]
    fn two_way_tie_goes_to_lowest_class() {
        let m = LabelMap::new(2, 2, 2, vec![0, 1, 1, 0]).unwrap();
        let d = downsample_mode(&m, 1, 1).unwrap();
        assert_eq!(d.labels(), &[0]);
        let m = LabelMap::new(2, 1, 5, vec![4, 2]).unwrap();
        assert_eq!(downsample_mode(&m, 1, 1).unwrap().labels(), &[2]);
    }

    #[test]
    fn rejects_invalid_targets() {
        let m = LabelMap::uniform(4, 4, 2, 0).unwrap();
        for (w, h) in [(0, 1), (1, 0), (5, 4), (4, 5)] {
            assert!(matches!(
                downsample_mode(&m, w, h),
                Err(LabelMapError::InvalidTarget { .. })
            ));
        }
    }

    // Independent oracle: assign every source pixel to its cell by scanning
    // cell ranges, then argmax each cell's histogram.
    fn oracle_downsample(m: &LabelMap, ow: u32, oh: u32) -> Vec<u16> {
        let (w, h, c) = (m.width() as usize, m.height() as usize, m.num_classes() as usize);
        let (ow, oh) = (ow as usize, oh as usize);
        let mut hist = vec![vec![0usize; c]; ow * oh];
        for y in 0..h {
            let cy = (0..oh).find(|&j| j * h / oh <= y && y < (j + 1) * h / oh).unwrap();
            for x in 0..w {
                let cx = (0..ow).find(|&i| i * w / ow <= x && x < (i + 1) * w / ow).unwrap();
                hist[cy * ow + cx][m.labels()[y * w + x] as usize] += 1;
            }
        }
        hist.iter()
            .map(|h| {
                let max = *h.iter().max().unwrap();
                h.iter().position(|&v| v == max).unwrap() as u16
            })
            .collect()
    }

    #[test]
    fn random_map_matches_counting_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..20 {
            let labels: Vec<u16> = (0..256).map(|_| rng.random_range(0..5)).collect();
            let m = LabelMap::new(16, 16, 5, labels).unwrap();
            let d = downsample_mode(&m, 4, 4).unwrap();
            assert_eq!(d.labels(), oracle_downsample(&m, 4, 4).as_slice());
        }
    }

    fn arb_map() -> impl Strategy<Value = LabelMap> {
        (1u32..12, 1u32..12, 1u16..7).prop_flat_map(|(w, h, c)| {
            proptest::collection::vec(0..c, (w * h) as usize)
                .prop_map(move |labels| LabelMap::new(w, h, c, labels).unwrap())
        })
    }

    proptest! {
        #[test]
        fn full_size_downsample_is_identity(m in arb_map()) {
            prop_assert_eq!(downsample_mode(&m, m.width(), m.height()).unwrap(), m);
        }

        #[test]
        fn arbitrary_targets_match_oracle(m in arb_map(), fw in 0.0f64..1.0, fh in 0.0f64..1.0) {
            let ow = 1 + ((m.width() - 1) as f64 * fw) as u32;
            let oh = 1 + ((m.height() - 1) as f64 * fh) as u32;
            let d = downsample_mode(&m, ow, oh).unwrap();
            let want = oracle_downsample(&m, ow, oh);
            prop_assert_eq!(d.labels(), want.as_slice());
        }
    }
}

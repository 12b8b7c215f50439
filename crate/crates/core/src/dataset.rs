//! Patch cutting with half-offset grids and seeded train/val/test splits.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::annotation::RasterImage;
use crate::error::{Error, Result};
use crate::raster::EdgeMap;
use crate::scalar::Scalar;

/// Patch size and origins for one source image size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchSpec {
    pub source_w: u32,
    pub source_h: u32,
    pub patch_w: u32,
    pub patch_h: u32,
    pub origins: Vec<(u32, u32)>,
}

impl PatchSpec {
    /// `cols x rows` base tiling plus the same tiling shifted right by half a
    /// patch, shifted down by half a patch, and shifted both ways. Each
    /// shifted grid drops the column or row that would leave the image.
    pub fn offset_grid(source_w: u32, source_h: u32, cols: u32, rows: u32) -> Result<Self> {
        if cols == 0 || rows == 0 || !source_w.is_multiple_of(2 * cols) || !source_h.is_multiple_of(2 * rows) {
            return Err(Error::Dimensions(format!(
                "{source_w}x{source_h} cannot be cut into a {cols}x{rows} grid with half-patch offsets"
            )));
        }
        let (pw, ph) = (source_w / cols, source_h / rows);
        let grid = |dx: u32, dy: u32, nc: u32, nr: u32| {
            (0..nr).flat_map(move |r| (0..nc).map(move |c| (dx + c * pw, dy + r * ph)))
        };
        let origins = grid(0, 0, cols, rows)
            .chain(grid(pw / 2, 0, cols - 1, rows))
            .chain(grid(0, ph / 2, cols, rows - 1))
            .chain(grid(pw / 2, ph / 2, cols - 1, rows - 1))
            .collect();
        Ok(Self {
            source_w,
            source_h,
            patch_w: pw,
            patch_h: ph,
            origins,
        })
    }

    /// 49 patches of 512x384 from a 2048x1536 image.
    pub fn standard() -> Self {
        Self::offset_grid(2048, 1536, 4, 4).expect("2048x1536 divides into 4x4 half-offset grids")
    }

    pub fn check_source(&self, width: u32, height: u32) -> Result<()> {
        if (width, height) != (self.source_w, self.source_h) {
            return Err(Error::Dimensions(format!(
                "expected a {}x{} source for {}x{} patches, got {width}x{height}",
                self.source_w, self.source_h, self.patch_w, self.patch_h
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Patch<T> {
    pub origin: (u32, u32),
    pub image: RasterImage<T>,
    pub label: EdgeMap,
}

pub fn crop_image<T: Scalar>(img: &RasterImage<T>, origin: (u32, u32), w: u32, h: u32) -> RasterImage<T> {
    RasterImage::from_fn(w, h, |x, y| img.get(origin.0 + x, origin.1 + y))
}

pub fn crop_edges(map: &EdgeMap, origin: (u32, u32), w: u32, h: u32) -> EdgeMap {
    let mut out = EdgeMap::new(w, h);
    for y in 0..h {
        for x in 0..w {
            if map.get(origin.0 + x, origin.1 + y) {
                out.set(x, y);
            }
        }
    }
    out
}

/// Cuts image and label identically at every origin of `spec`.
pub fn cut_patches<T: Scalar>(img: &RasterImage<T>, edges: &EdgeMap, spec: &PatchSpec) -> Result<Vec<Patch<T>>> {
    spec.check_source(img.width(), img.height())?;
    spec.check_source(edges.width(), edges.height())?;
    Ok(spec
        .origins
        .iter()
        .map(|&origin| Patch {
            origin,
            image: crop_image(img, origin, spec.patch_w, spec.patch_h),
            label: crop_edges(edges, origin, spec.patch_w, spec.patch_h),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitAssignment {
    pub seed: u64,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl SplitAssignment {
    /// Split of every index, in index order.
    pub fn labels(&self) -> Vec<Split> {
        let n = self.train.len() + self.val.len() + self.test.len();
        let mut out = vec![Split::Test; n];
        for &i in &self.train {
            out[i] = Split::Train;
        }
        for &i in &self.val {
            out[i] = Split::Val;
        }
        out
    }
}

/// Uniform integer in `0..bound` by rejection, so the stream is portable.
fn below(rng: &mut ChaCha8Rng, bound: u64) -> u64 {
    let zone = u64::MAX - (u64::MAX % bound);
    loop {
        let v = rng.next_u64();
        if v < zone {
            return v % bound;
        }
    }
}

/// Seeded Fisher-Yates shuffle of `0..n`, cut 6:1:3 with the rounding
/// remainder going to test.
pub fn split_dataset(n: usize, seed: u64) -> Result<SplitAssignment> {
    if n < 10 {
        return Err(Error::param(format!("need at least 10 items to split, got {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..n).rev() {
        let j = below(&mut rng, i as u64 + 1) as usize;
        order.swap(i, j);
    }
    let n_train = n * 6 / 10;
    let n_val = n / 10;
    let test = order.split_off(n_train + n_val);
    let val = order.split_off(n_train);
    Ok(SplitAssignment {
        seed,
        train: order,
        val,
        test,
    })
}

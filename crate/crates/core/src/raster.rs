//! Discrete connected edge maps from point loops.

use crate::annotation::AnnotationSet;
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::scalar::Scalar;

/// Row-major binary edge raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMap {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl EdgeMap {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width as usize * height as usize {
            return Err(Error::Dimensions(format!(
                "{width}x{height} edge map needs {} cells, got {}",
                width as usize * height as usize,
                bits.len()
            )));
        }
        Ok(Self { width, height, bits })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32) {
        self.bits[y as usize * self.width as usize + x as usize] = true;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Coordinates of set pixels in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width as usize;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| ((i % w) as u32, (i / w) as u32))
    }

    /// Logical OR with another map of the same size.
    pub fn union_with(&mut self, other: &EdgeMap) -> Result<()> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(Error::Dimensions(format!(
                "cannot merge {}x{} into {}x{}",
                other.width, other.height, self.width, self.height
            )));
        }
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
        Ok(())
    }

    /// 8-bit grayscale rendering, edge = 255 and background = 0.
    pub fn to_luma8(&self) -> image::GrayImage {
        let data = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        image::GrayImage::from_raw(self.width, self.height, data).expect("buffer matches dimensions")
    }

    /// Any non-zero pixel counts as edge.
    pub fn from_luma8(img: &image::GrayImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            bits: img.as_raw().iter().map(|&v| v > 0).collect(),
        }
    }
}

fn quantize<T: Scalar>(v: T, max: u32) -> i64 {
    // Round half up, then clamp into the raster.
    let r = (v + T::of(0.5)).floor();
    let r = if r.is_nan() { T::zero() } else { r };
    r.max(T::zero()).min(T::of(f64::from(max))).to_i64().unwrap_or(0)
}

/// Bresenham segment from `a` to `b`, both endpoints included.
pub fn bresenham(a: (i64, i64), b: (i64, i64)) -> Vec<(i64, i64)> {
    let (mut x, mut y) = a;
    let dx = (b.0 - a.0).abs();
    let dy = -(b.1 - a.1).abs();
    let sx = if a.0 < b.0 { 1 } else { -1 };
    let sy = if a.1 < b.1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::with_capacity((dx.max(-dy) + 1) as usize);
    loop {
        out.push((x, y));
        if (x, y) == b {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
    out
}

/// Pixel path of a closed loop: consecutive wrapped points joined by
/// Bresenham segments on quantized coordinates. Consecutive path pixels are
/// 8-neighbours and the last pixel neighbours the first.
pub fn trace_loop<T: Scalar>(points: &[Point2<T>], size: (u32, u32)) -> Vec<(u32, u32)> {
    let (w, h) = size;
    if points.is_empty() || w == 0 || h == 0 {
        return Vec::new();
    }
    let q: Vec<(i64, i64)> = points
        .iter()
        .map(|p| (quantize(p.x, w - 1), quantize(p.y, h - 1)))
        .collect();
    let mut path: Vec<(u32, u32)> = Vec::new();
    for i in 0..q.len() {
        let seg = bresenham(q[i], q[(i + 1) % q.len()]);
        for &(x, y) in &seg[..seg.len() - 1] {
            let px = (x as u32, y as u32);
            if path.last() != Some(&px) {
                path.push(px);
            }
        }
    }
    if path.is_empty() {
        path.push((q[0].0 as u32, q[0].1 as u32));
    }
    while path.len() > 1 && path.first() == path.last() {
        path.pop();
    }
    path
}

pub fn rasterize_loop<T: Scalar>(points: &[Point2<T>], size: (u32, u32)) -> EdgeMap {
    let mut map = EdgeMap::new(size.0, size.1);
    let path = trace_loop(points, size);
    if path.len() == 1 {
        log::warn!("loop of {} points collapsed to pixel {:?}", points.len(), path[0]);
    }
    for (x, y) in path {
        map.set(x, y);
    }
    map
}

/// Union of every loop's rasterization on the set's image size.
pub fn rasterize_set<T: Scalar>(set: &AnnotationSet<T>, loops: &[Vec<Point2<T>>]) -> EdgeMap {
    let mut map = EdgeMap::new(set.image_size.0, set.image_size.1);
    for l in loops {
        for (x, y) in trace_loop(l, set.image_size) {
            map.set(x, y);
        }
    }
    map
}

/// The uncorrected baseline: every polygon's raw vertices joined in order.
pub fn rasterize_original<T: Scalar>(set: &AnnotationSet<T>) -> EdgeMap {
    let loops: Vec<Vec<Point2<T>>> = set.polygons.iter().map(|p| p.points.clone()).collect();
    rasterize_set(set, &loops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::{PolygonAnnotation, PolygonClass};

    fn p(x: f64, y: f64) -> Point2<f64> {
        Point2::new(x, y)
    }

    fn square(x0: f64, y0: f64, side: f64) -> Vec<Point2<f64>> {
        vec![p(x0, y0), p(x0 + side, y0), p(x0 + side, y0 + side), p(x0, y0 + side)]
    }

    fn set_of(loops: &[Vec<Point2<f64>>], size: (u32, u32)) -> AnnotationSet<f64> {
        let polys = loops
            .iter()
            .enumerate()
            .map(|(i, l)| PolygonAnnotation::new(format!("p{i}"), PolygonClass::Cytoplasm, l.clone()).unwrap())
            .collect();
        AnnotationSet::new("x.png", size, polys).unwrap()
    }

    fn is_neighbour(a: (u32, u32), b: (u32, u32)) -> bool {
        let dx = (a.0 as i64 - b.0 as i64).abs();
        let dy = (a.1 as i64 - b.1 as i64).abs();
        dx <= 1 && dy <= 1 && (dx, dy) != (0, 0)
    }

    #[test]
    fn square_has_perimeter_pixels() {
        let map = rasterize_loop(&square(2.0, 2.0, 8.0), (16, 16));
        assert_eq!(map.count(), 32);
        for i in 2..=10 {
            assert!(map.get(i, 2) && map.get(i, 10) && map.get(2, i) && map.get(10, i));
        }
    }

    #[test]
    fn subpixel_coordinates_round_half_up() {
        let sub = [p(2.4, 1.5), p(9.6, 2.2), p(10.49, 9.5), p(1.5, 10.2)];
        let rounded = [p(2.0, 2.0), p(10.0, 2.0), p(10.0, 10.0), p(2.0, 10.0)];
        assert_eq!(rasterize_loop(&sub, (16, 16)), rasterize_loop(&rounded, (16, 16)));
    }

    #[test]
    fn out_of_bounds_points_are_clamped() {
        let map = rasterize_loop(&[p(-5.0, -5.0), p(20.0, -3.0), p(20.0, 30.0)], (8, 8));
        assert!(map.get(0, 0) && map.get(7, 0) && map.get(7, 7));
    }

    #[test]
    fn collapsed_loop_sets_one_pixel() {
        let map = rasterize_loop(&[p(3.1, 3.2), p(3.3, 2.9), p(2.8, 3.0)], (8, 8));
        assert_eq!(map.count(), 1);
        assert!(map.get(3, 3));
    }

    #[test]
    fn disjoint_union_adds_counts() {
        let a = square(1.0, 1.0, 5.0);
        let b = square(10.0, 10.0, 6.0);
        let na = rasterize_loop(&a, (20, 20)).count();
        let nb = rasterize_loop(&b, (20, 20)).count();
        let set = set_of(&[a.clone(), b.clone()], (20, 20));
        assert_eq!(rasterize_set(&set, &[a, b]).count(), na + nb);
    }

    #[test]
    fn identical_loops_overlap_completely() {
        let a = square(1.0, 1.0, 5.0);
        let set = set_of(&[a.clone(), square(1.0, 1.0, 5.0)], (20, 20));
        assert_eq!(rasterize_set(&set, &[a.clone(), a.clone()]).count(), rasterize_loop(&a, (20, 20)).count());
        assert_eq!(rasterize_original(&set).count(), 20);
    }

    #[test]
    fn empty_set_is_blank() {
        let set = AnnotationSet::<f64>::new("x.png", (5, 4), vec![]).unwrap();
        let map = rasterize_set(&set, &[]);
        assert_eq!(map.count(), 0);
        assert_eq!((map.width(), map.height()), (5, 4));
    }

    #[test]
    fn png_round_trip() {
        let map = rasterize_loop(&square(1.0, 1.0, 4.0), (8, 8));
        let img = map.to_luma8();
        assert!(img.as_raw().iter().all(|&v| v == 0 || v == 255));
        assert_eq!(EdgeMap::from_luma8(&img), map);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn loop_points() -> impl Strategy<Value = Vec<Point2<f64>>> {
            prop::collection::vec((-5.0f64..45.0, -5.0f64..45.0), 3..12)
                .prop_map(|v| v.into_iter().map(|(x, y)| Point2::new(x, y)).collect())
        }

        proptest! {
            #[test]
            fn traced_loops_are_closed_and_8_connected(pts in loop_points()) {
                let path = trace_loop(&pts, (40, 40));
                prop_assert!(!path.is_empty());
                if path.len() > 1 {
                    for i in 0..path.len() {
                        prop_assert!(is_neighbour(path[i], path[(i + 1) % path.len()]), "{:?}", path);
                    }
                }
            }

            #[test]
            fn flood_fill_covers_every_loop_pixel(pts in loop_points()) {
                let map = rasterize_loop(&pts, (40, 40));
                let start = map.pixels().next().unwrap();
                let mut seen = std::collections::HashSet::from([start]);
                let mut stack = vec![start];
                while let Some((x, y)) = stack.pop() {
                    for dy in -1i64..=1 {
                        for dx in -1i64..=1 {
                            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                            if (0..40).contains(&nx) && (0..40).contains(&ny) && map.get(nx as u32, ny as u32) && seen.insert((nx as u32, ny as u32)) {
                                stack.push((nx as u32, ny as u32));
                            }
                        }
                    }
                }
                prop_assert_eq!(seen.len(), map.count());
            }

            #[test]
            fn integer_translation_is_equivariant(pts in prop::collection::vec((0i32..20, 0i32..20), 3..10), tx in 0i32..15, ty in 0i32..15) {
                let a: Vec<Point2<f64>> = pts.iter().map(|&(x, y)| p(f64::from(x), f64::from(y))).collect();
                let b: Vec<Point2<f64>> = pts.iter().map(|&(x, y)| p(f64::from(x + tx), f64::from(y + ty))).collect();
                let ma = rasterize_loop(&a, (40, 40));
                let mb = rasterize_loop(&b, (40, 40));
                let shifted: Vec<(u32, u32)> = ma.pixels().map(|(x, y)| (x + tx as u32, y + ty as u32)).collect();
                let mut got: Vec<(u32, u32)> = mb.pixels().collect();
                let mut want = shifted;
                got.sort_unstable();
                want.sort_unstable();
                prop_assert_eq!(got, want);
            }
        }
    }
}

//! Synthetic microscopy-like scenes with analytic cell contours.
//!
//! Cells are dark ellipses on a bright background with a darker elliptical
//! nucleus. Boundaries are blurred by a Gaussian profile so the true edge sits
//! exactly on the ellipse. Annotations are sampled along each ellipse and can
//! be pushed off the contour along its normal to imitate hand-drawn labels.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

use crate::annotation::{AnnotationSet, PolygonAnnotation, PolygonClass, RasterImage};
use crate::error::Result;
use crate::geometry::Point2;

type P = Point2<f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub center: P,
    /// Semi-axis along the rotated x direction.
    pub a: f64,
    pub b: f64,
    /// Rotation in radians, image coordinates.
    pub angle: f64,
}

impl Ellipse {
    pub fn new(center: P, a: f64, b: f64, angle: f64) -> Self {
        Self { center, a, b, angle }
    }

    pub fn circle(center: P, r: f64) -> Self {
        Self::new(center, r, r, 0.0)
    }

    fn to_local(self, p: P) -> P {
        let d = p - self.center;
        let (s, c) = self.angle.sin_cos();
        P::new(c * d.x + s * d.y, -s * d.x + c * d.y)
    }

    fn rotate(&self, v: P) -> P {
        let (s, c) = self.angle.sin_cos();
        P::new(c * v.x - s * v.y, s * v.x + c * v.y)
    }

    pub fn point_at(&self, t: f64) -> P {
        self.center + self.rotate(P::new(self.a * t.cos(), self.b * t.sin()))
    }

    /// Outward unit normal at parameter `t`.
    pub fn normal_at(&self, t: f64) -> P {
        let n = P::new(self.b * t.cos(), self.a * t.sin());
        self.rotate(n * (1.0 / n.norm()))
    }

    /// Parameter of the closest point on the ellipse to `p`.
    pub fn nearest_parameter(&self, p: P) -> f64 {
        let l = self.to_local(p);
        let (a, b) = (self.a, self.b);
        let dist2 = |t: f64| {
            let (s, c) = t.sin_cos();
            (a * c - l.x).powi(2) + (b * s - l.y).powi(2)
        };
        const SEEDS: usize = 64;
        let mut best = 0.0;
        let mut best_d = f64::INFINITY;
        for k in 0..SEEDS {
            let t = std::f64::consts::TAU * k as f64 / SEEDS as f64;
            let d = dist2(t);
            if d < best_d {
                best = t;
                best_d = d;
            }
        }
        let mut t = best;
        for _ in 0..20 {
            let (s, c) = t.sin_cos();
            let f = (b * b - a * a) * s * c + a * l.x * s - b * l.y * c;
            let df = (b * b - a * a) * (c * c - s * s) + a * l.x * c + b * l.y * s;
            if df.abs() < 1e-15 {
                break;
            }
            let next = t - f / df;
            let step = next - t;
            if dist2(next) > dist2(t) + 1e-12 || step.abs() > 0.5 {
                break;
            }
            t = next;
            if step.abs() < 1e-14 {
                break;
            }
        }
        t
    }

    /// Euclidean distance to the contour, negative inside.
    pub fn signed_distance(&self, p: P) -> f64 {
        let d = p.distance(self.point_at(self.nearest_parameter(p)));
        let l = self.to_local(p);
        if (l.x / self.a).powi(2) + (l.y / self.b).powi(2) < 1.0 {
            -d
        } else {
            d
        }
    }

    pub fn distance(&self, p: P) -> f64 {
        self.signed_distance(p).abs()
    }

    /// First-order signed distance; only used to skip pixels far from the edge.
    fn rough_distance(&self, p: P) -> f64 {
        let l = self.to_local(p);
        let (a2, b2) = (self.a * self.a, self.b * self.b);
        let q = l.x * l.x / a2 + l.y * l.y / b2 - 1.0;
        let g = 2.0 * (l.x * l.x / (a2 * a2) + l.y * l.y / (b2 * b2)).sqrt();
        if g < 1e-12 {
            -self.a.min(self.b)
        } else {
            q / g
        }
    }

    pub fn bounding_radius(&self) -> f64 {
        self.a.max(self.b)
    }

    /// Dense polyline approximation with cumulative arc length.
    fn arc_table(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        let ts: Vec<f64> = (0..=n).map(|k| std::f64::consts::TAU * k as f64 / n as f64).collect();
        let mut len = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        len.push(0.0);
        for w in ts.windows(2) {
            acc += self.point_at(w[0]).distance(self.point_at(w[1]));
            len.push(acc);
        }
        (ts, len)
    }

    pub fn perimeter(&self) -> f64 {
        *self.arc_table(4096).1.last().unwrap()
    }

    /// Parameters spaced along the contour by arc lengths drawn from
    /// `spacing` and rescaled to close the loop, starting at a random phase.
    pub fn sample_parameters(&self, spacing: (f64, f64), rng: &mut impl Rng) -> Vec<f64> {
        let (ts, len) = self.arc_table(4096);
        let total = *len.last().unwrap();
        let mean = 0.5 * (spacing.0 + spacing.1);
        let n = ((total / mean).round() as usize).max(3);
        let gaps: Vec<f64> = (0..n)
            .map(|_| if spacing.1 > spacing.0 { rng.random_range(spacing.0..spacing.1) } else { spacing.0 })
            .collect();
        let scale = total / gaps.iter().sum::<f64>();
        let mut s = rng.random_range(0.0..spacing.0);
        let mut out = Vec::with_capacity(n);
        for g in gaps {
            let target = s % total;
            let j = len.partition_point(|&l| l <= target).clamp(1, len.len() - 1) - 1;
            let f = (target - len[j]) / (len[j + 1] - len[j]);
            out.push(ts[j] + f * (ts[j + 1] - ts[j]));
            s += g * scale;
        }
        out
    }
}

/// Standard normal CDF.
fn phi(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCell {
    pub id: String,
    pub class: PolygonClass,
    pub shape: Ellipse,
    /// Intensity subtracted inside the contour.
    pub darkening: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneParams {
    pub width: u32,
    pub height: u32,
    pub cells: usize,
    /// Range of the cytoplasm major semi-axis.
    pub radius: (f64, f64),
    /// Range of major over minor semi-axis.
    pub aspect: (f64, f64),
    /// Nucleus size relative to its cell.
    pub nucleus_scale: (f64, f64),
    pub background: f64,
    pub cytoplasm_darkening: f64,
    pub nucleus_darkening: f64,
    /// Standard deviation of the edge profile in pixels.
    pub blur: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            width: 512,
            height: 512,
            cells: 8,
            radius: (30.0, 60.0),
            aspect: (1.0, 1.6),
            nucleus_scale: (0.3, 0.45),
            background: 255.0,
            cytoplasm_darkening: 140.0,
            nucleus_darkening: 115.0,
            blur: 0.6,
        }
    }
}

impl SceneParams {
    /// 2048x1536 frame holding `cells` cells, each with a nucleus.
    pub fn large(cells: usize) -> Self {
        Self {
            width: 2048,
            height: 1536,
            cells,
            radius: (60.0, 110.0),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub width: u32,
    pub height: u32,
    pub background: f64,
    pub blur: f64,
    pub cells: Vec<SyntheticCell>,
}

impl Scene {
    /// Randomly placed cells that may overlap each other but never cover a
    /// neighbour's nucleus. Placement gives up after a bounded number of
    /// attempts, so crowded parameters yield fewer cells.
    pub fn random(params: &SceneParams, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut placed: Vec<(Ellipse, Ellipse)> = Vec::new();
        let mut attempts = 0;
        while placed.len() < params.cells && attempts < 200 * params.cells.max(1) {
            attempts += 1;
            let a = rng.random_range(params.radius.0..=params.radius.1);
            let b = a / rng.random_range(params.aspect.0..=params.aspect.1);
            let margin = a + 4.0;
            if 2.0 * margin >= f64::from(params.width.min(params.height)) {
                continue;
            }
            let c = P::new(
                rng.random_range(margin..f64::from(params.width) - margin),
                rng.random_range(margin..f64::from(params.height) - margin),
            );
            let cell = Ellipse::new(c, a, b, rng.random_range(0.0..std::f64::consts::PI));
            let k = rng.random_range(params.nucleus_scale.0..=params.nucleus_scale.1);
            let nucleus = Ellipse::new(c, cell.a * k, cell.b * k, cell.angle + rng.random_range(-0.3..0.3));
            let clear = placed.iter().all(|(oc, on)| {
                let d = c.distance(oc.center);
                d > nucleus.bounding_radius() + oc.bounding_radius() + 6.0
                    && d > on.bounding_radius() + cell.bounding_radius() + 6.0
            });
            if clear {
                placed.push((cell, nucleus));
            }
        }
        let mut cells = Vec::with_capacity(2 * placed.len());
        for (k, (cell, nucleus)) in placed.into_iter().enumerate() {
            cells.push(SyntheticCell {
                id: format!("cell_{k}"),
                class: PolygonClass::Cytoplasm,
                shape: cell,
                darkening: params.cytoplasm_darkening,
            });
            cells.push(SyntheticCell {
                id: format!("nucleus_{k}"),
                class: PolygonClass::Nucleus,
                shape: nucleus,
                darkening: params.nucleus_darkening,
            });
        }
        Self {
            width: params.width,
            height: params.height,
            background: params.background,
            blur: params.blur,
            cells,
        }
    }

    pub fn truth(&self, id: &str) -> Option<&Ellipse> {
        self.cells.iter().find(|c| c.id == id).map(|c| &c.shape)
    }

    /// Grey levels quantized to integers in `[0, 255]`.
    pub fn render(&self) -> RasterImage<f64> {
        let (w, h) = (self.width as usize, self.height as usize);
        let mut darkening = vec![0.0; w * h];
        let band = 8.0 * self.blur + 2.0;
        for cell in &self.cells {
            let r = cell.shape.bounding_radius() + band + 1.0;
            let x0 = (cell.shape.center.x - r).floor().max(0.0) as usize;
            let y0 = (cell.shape.center.y - r).floor().max(0.0) as usize;
            let x1 = ((cell.shape.center.x + r).ceil() as usize).min(w);
            let y1 = ((cell.shape.center.y + r).ceil() as usize).min(h);
            for y in y0..y1 {
                for x in x0..x1 {
                    let p = P::new(x as f64, y as f64);
                    let rough = cell.shape.rough_distance(p);
                    let inside = if rough > 2.0 * band {
                        0.0
                    } else if rough < -2.0 * band {
                        1.0
                    } else {
                        phi(-cell.shape.signed_distance(p) / self.blur)
                    };
                    darkening[y * w + x] += cell.darkening * inside;
                }
            }
        }
        let pixels = darkening
            .into_iter()
            .map(|d| (self.background - d).clamp(0.0, 255.0).round())
            .collect();
        RasterImage::new(self.width, self.height, pixels).expect("buffer matches scene size")
    }

    pub fn render_rgb8(&self) -> image::RgbImage {
        let img = self.render();
        image::RgbImage::from_fn(self.width, self.height, |x, y| {
            let v = img.get(x, y) as u8;
            image::Rgb([v, v, v])
        })
    }

    /// Polygons sampled on every contour at arc spacing drawn from `spacing`,
    /// each vertex shifted along the true normal by a uniform offset in
    /// `[-jitter, jitter]`.
    pub fn annotations(&self, image_path: &str, spacing: (f64, f64), jitter: f64, seed: u64) -> Result<AnnotationSet<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut polygons = Vec::with_capacity(self.cells.len());
        for cell in &self.cells {
            let ts = cell.shape.sample_parameters(spacing, &mut rng);
            let points = ts
                .iter()
                .map(|&t| {
                    let u = if jitter > 0.0 { rng.random_range(-jitter..=jitter) } else { 0.0 };
                    cell.shape.point_at(t) + cell.shape.normal_at(t) * u
                })
                .collect();
            polygons.push(PolygonAnnotation::new(cell.id.clone(), cell.class, points)?);
        }
        AnnotationSet::new(image_path, (self.width, self.height), polygons)
    }

    /// Mean distance of every vertex to the true contour of its polygon.
    pub fn mean_error(&self, set: &AnnotationSet<f64>) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for poly in &set.polygons {
            if let Some(e) = self.truth(&poly.id) {
                for p in &poly.points {
                    sum += e.distance(*p);
                    n += 1;
                }
            }
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }
}

/// Renders a random scene and writes `<stem>.png` with its jittered
/// annotation `<stem>.json` into `dir`.
pub fn write_fixture(dir: &std::path::Path, stem: &str, params: &SceneParams, seed: u64, jitter: f64) -> Result<Scene> {
    let scene = Scene::random(params, seed);
    let image_name = format!("{stem}.png");
    let png = dir.join(&image_name);
    scene
        .render_rgb8()
        .save_with_format(&png, image::ImageFormat::Png)
        .map_err(|e| crate::error::Error::Encode(format!("{}: {e}", png.display())))?;
    let set = scene.annotations(&image_name, (6.0, 10.0), jitter, seed ^ 0x5eed)?;
    let json = dir.join(format!("{stem}.json"));
    std::fs::write(&json, crate::annotation::write_annotation(&set)).map_err(|e| crate::error::Error::Io { path: json, source: e })?;
    Ok(scene)
}

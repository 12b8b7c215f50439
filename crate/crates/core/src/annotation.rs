//! Polygon annotations in the labelme JSON layout and grayscale image loading.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dedup_closed, Point2};
use crate::scalar::Scalar;

/// What a contour outlines. Drives the bandwidth constants of the curve fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolygonClass {
    Cytoplasm,
    Nucleus,
}

impl PolygonClass {
    pub fn as_str(self) -> &'static str {
        match self {
            PolygonClass::Cytoplasm => "cytoplasm",
            PolygonClass::Nucleus => "nucleus",
        }
    }
}

impl fmt::Display for PolygonClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolygonClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cytoplasm" => Ok(PolygonClass::Cytoplasm),
            "nucleus" => Ok(PolygonClass::Nucleus),
            _ => Err(Error::UnknownLabel(s.to_string())),
        }
    }
}

/// Closed loop of label points. The first point is not repeated at the end.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonAnnotation<T> {
    pub id: String,
    pub class: PolygonClass,
    pub points: Vec<Point2<T>>,
}

impl<T: Scalar> PolygonAnnotation<T> {
    /// Collapses consecutive duplicates (wraparound included) and rejects
    /// loops with fewer than three remaining points.
    pub fn new(id: impl Into<String>, class: PolygonClass, mut points: Vec<Point2<T>>) -> Result<Self> {
        let id = id.into();
        dedup_closed(&mut points);
        if points.len() < 3 || points.iter().any(|p| !p.is_finite()) {
            return Err(Error::DegeneratePolygon { id });
        }
        Ok(Self { id, class, points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Same polygon with its points replaced; id and class are kept.
    pub fn with_points(&self, points: Vec<Point2<T>>) -> Result<Self> {
        Self::new(self.id.clone(), self.class, points)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationSet<T> {
    pub image_path: String,
    pub image_size: (u32, u32),
    pub polygons: Vec<PolygonAnnotation<T>>,
}

impl<T: Scalar> AnnotationSet<T> {
    pub fn new(image_path: impl Into<String>, image_size: (u32, u32), polygons: Vec<PolygonAnnotation<T>>) -> Result<Self> {
        let (width, height) = image_size;
        if width == 0 || height == 0 {
            return Err(Error::ImageSize { width, height });
        }
        let mut seen = HashSet::new();
        for p in &polygons {
            if !seen.insert(p.id.as_str()) {
                return Err(Error::DuplicateId(p.id.clone()));
            }
        }
        Ok(Self {
            image_path: image_path.into(),
            image_size,
            polygons,
        })
    }
}

#[derive(Deserialize)]
struct RawDocument {
    shapes: Vec<RawShape>,
    #[serde(rename = "imagePath", default)]
    image_path: String,
    #[serde(rename = "imageWidth", default)]
    image_width: u32,
    #[serde(rename = "imageHeight", default)]
    image_height: u32,
}

#[derive(Deserialize)]
struct RawShape {
    label: String,
    points: Vec<[f64; 2]>,
    #[serde(default = "default_shape_type")]
    shape_type: String,
    #[serde(default)]
    id: Option<String>,
}

fn default_shape_type() -> String {
    "polygon".to_string()
}

#[derive(Serialize)]
struct OutDocument<'a> {
    version: &'static str,
    flags: serde_json::Map<String, serde_json::Value>,
    shapes: Vec<OutShape<'a>>,
    #[serde(rename = "imagePath")]
    image_path: &'a str,
    #[serde(rename = "imageData")]
    image_data: Option<()>,
    #[serde(rename = "imageHeight")]
    image_height: u32,
    #[serde(rename = "imageWidth")]
    image_width: u32,
}

#[derive(Serialize)]
struct OutShape<'a> {
    label: &'static str,
    points: Vec<[f64; 2]>,
    group_id: Option<()>,
    shape_type: &'static str,
    flags: serde_json::Map<String, serde_json::Value>,
    id: &'a str,
}

fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut start = 0;
    for _ in 1..line {
        match bytes[start..].iter().position(|&b| b == b'\n') {
            Some(nl) => start += nl + 1,
            None => return bytes.len(),
        }
    }
    (start + column.saturating_sub(1)).min(bytes.len())
}

/// Parses a labelme document. Shapes without an explicit `id` are named
/// `shape_<index>`.
pub fn parse_annotation(bytes: &[u8]) -> Result<AnnotationSet<f64>> {
    let raw: RawDocument = serde_json::from_slice(bytes).map_err(|e| Error::Json {
        offset: byte_offset(bytes, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let mut polygons = Vec::with_capacity(raw.shapes.len());
    for (index, shape) in raw.shapes.into_iter().enumerate() {
        let id = shape.id.unwrap_or_else(|| format!("shape_{index}"));
        if shape.shape_type != "polygon" {
            return Err(Error::UnsupportedShape {
                id,
                shape_type: shape.shape_type,
            });
        }
        let class: PolygonClass = shape.label.parse()?;
        let points = shape.points.iter().map(|&[x, y]| Point2::new(x, y)).collect();
        polygons.push(PolygonAnnotation::new(id, class, points)?);
    }
    AnnotationSet::new(raw.image_path, (raw.image_width, raw.image_height), polygons)
}

/// Serializes to the same layout [`parse_annotation`] reads.
pub fn write_annotation<T: Scalar>(set: &AnnotationSet<T>) -> Vec<u8> {
    let doc = OutDocument {
        version: "5.2.1",
        flags: serde_json::Map::new(),
        shapes: set
            .polygons
            .iter()
            .map(|p| OutShape {
                label: p.class.as_str(),
                points: p.points.iter().map(|q| [q.x.as_f64(), q.y.as_f64()]).collect(),
                group_id: None,
                shape_type: "polygon",
                flags: serde_json::Map::new(),
                id: &p.id,
            })
            .collect(),
        image_path: &set.image_path,
        image_data: None,
        image_height: set.image_size.1,
        image_width: set.image_size.0,
    };
    let mut out = serde_json::to_vec_pretty(&doc).expect("annotation document serializes");
    out.push(b'\n');
    out
}

/// Row-major scalar image with intensities on the 0..=255 scale.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage<T> {
    width: u32,
    height: u32,
    pixels: Vec<T>,
}

impl<T: Scalar> RasterImage<T> {
    pub fn new(width: u32, height: u32, pixels: Vec<T>) -> Result<Self> {
        if width as usize * height as usize != pixels.len() {
            return Err(Error::Dimensions(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width as usize * height as usize,
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> T) -> Self {
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self { width, height, pixels }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[T] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> T {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    pub fn into_pixels(self) -> Vec<T> {
        self.pixels
    }
}

/// Decodes PNG or JPEG bytes into luminance `0.299 R + 0.587 G + 0.114 B`,
/// rounded half-up to an integer level.
pub fn load_grayscale<T: Scalar>(bytes: &[u8]) -> Result<RasterImage<T>> {
    let decoded = image::load_from_memory(bytes).map_err(|e| Error::Decode(e.to_string()))?;
    let rgb = decoded.to_rgb8();
    let (width, height) = rgb.dimensions();
    let pixels = rgb
        .pixels()
        .map(|p| {
            let [r, g, b] = p.0;
            let scaled = 299 * u32::from(r) + 587 * u32::from(g) + 114 * u32::from(b);
            T::of(f64::from((scaled + 500) / 1000))
        })
        .collect();
    RasterImage::new(width, height, pixels)
}

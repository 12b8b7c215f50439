//! Directory-level orchestration: correction, rasterization, scoring,
//! patch preparation and visual comparison.
//!
//! Every image is handled by a pure function of its inputs and the config,
//! so results are identical for any worker count. Failures are collected per
//! image and never stop the batch.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::annotation::{load_grayscale, parse_annotation, write_annotation, AnnotationSet, PolygonAnnotation, PolygonClass, RasterImage};
use crate::config::PipelineConfig;
use crate::correction::{correct_points, PointCorrection};
use crate::dataset::{crop_edges, split_dataset, PatchSpec};
use crate::error::{Error, Result};
use crate::eval::{default_thresholds, pr_curve, summarize, EvalOptions, EvalSummary, ImageCurve, SoftEdgeMap};
use crate::geometry::Point2;
use crate::gradient::GradientField;
use crate::raster::{rasterize_original, rasterize_set, trace_loop, EdgeMap};
use crate::refit::{interpolate_gaps_indexed, refit_closed_curve, FitMode};

type P = Point2<f64>;

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct DisplacementStats {
    pub points: usize,
    pub moved: usize,
    pub mean: f64,
    pub max: f64,
}

impl DisplacementStats {
    fn from_pairs<'a>(pairs: impl Iterator<Item = (&'a P, &'a PointCorrection<f64>)>) -> Self {
        let mut s = Self::default();
        let mut sum = 0.0;
        for (orig, c) in pairs {
            let d = orig.distance(c.point);
            s.points += 1;
            s.moved += usize::from(c.moved);
            sum += d;
            s.max = s.max.max(d);
        }
        if s.points > 0 {
            s.mean = sum / s.points as f64;
        }
        s
    }
}

/// Every intermediate of one polygon.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonResult {
    pub id: String,
    pub class: PolygonClass,
    pub original: Vec<P>,
    pub corrections: Vec<PointCorrection<f64>>,
    /// The refitted closed curve.
    pub fitted: Vec<P>,
    /// Position of each original point in the interpolated loop.
    pub original_index: Vec<usize>,
    pub mode: FitMode,
}

impl PolygonResult {
    /// Where each original label point ended up. Only defined in smooth
    /// mode, where refitting keeps the interpolated points in order.
    pub fn final_positions(&self) -> Option<Vec<P>> {
        match self.mode {
            FitMode::SmoothClosed if self.fitted.len() > *self.original_index.last()? => {
                Some(self.original_index.iter().map(|&i| self.fitted[i]).collect())
            }
            _ => None,
        }
    }

    pub fn stats(&self) -> DisplacementStats {
        DisplacementStats::from_pairs(self.original.iter().zip(&self.corrections))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectedImage {
    pub annotations: AnnotationSet<f64>,
    pub edges: EdgeMap,
    pub polygons: Vec<PolygonResult>,
    pub stats: DisplacementStats,
}

pub fn correct_polygon_result(poly: &PolygonAnnotation<f64>, field: &GradientField<f64>, config: &PipelineConfig) -> Result<PolygonResult> {
    let cparams = config.correction_params();
    let fparams = config.fit_params()?;
    let corrections = correct_points(&poly.points, field, &cparams);
    let moved: Vec<P> = corrections.iter().map(|c| c.point).collect();
    let (dense, original_index) = interpolate_gaps_indexed(&moved, fparams.step);
    let fitted = refit_closed_curve(&dense, poly.class, &fparams);
    Ok(PolygonResult {
        id: poly.id.clone(),
        class: poly.class,
        original: poly.points.clone(),
        corrections,
        fitted,
        original_index,
        mode: fparams.mode,
    })
}

/// Corrects, refits and rasterizes every polygon of one image.
pub fn correct_annotations(set: &AnnotationSet<f64>, field: &GradientField<f64>, config: &PipelineConfig) -> Result<CorrectedImage> {
    if (field.width(), field.height()) != set.image_size {
        return Err(Error::Dimensions(format!(
            "annotation is for a {}x{} image but the image is {}x{}",
            set.image_size.0,
            set.image_size.1,
            field.width(),
            field.height()
        )));
    }
    let polygons = set
        .polygons
        .iter()
        .map(|p| correct_polygon_result(p, field, config))
        .collect::<Result<Vec<_>>>()?;
    let loops: Vec<Vec<P>> = polygons.iter().map(|p| p.fitted.clone()).collect();
    let edges = rasterize_set(set, &loops);
    let corrected = polygons
        .iter()
        .map(|p| PolygonAnnotation::new(p.id.clone(), p.class, p.fitted.clone()))
        .collect::<Result<Vec<_>>>()?;
    let stats = DisplacementStats::from_pairs(polygons.iter().flat_map(|p| p.original.iter().zip(&p.corrections)));
    Ok(CorrectedImage {
        annotations: AnnotationSet::new(set.image_path.clone(), set.image_size, corrected)?,
        edges,
        polygons,
        stats,
    })
}

pub fn correct_image(img: &RasterImage<f64>, set: &AnnotationSet<f64>, config: &PipelineConfig) -> Result<CorrectedImage> {
    let field = GradientField::from_image(img, config.sigma)?;
    correct_annotations(set, &field, config)
}

/// An image and its annotation sharing a file stem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImagePair {
    pub stem: String,
    pub image: PathBuf,
    pub annotation: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Discovery {
    pub pairs: Vec<ImagePair>,
    /// Files with no partner, or extra images for a stem already paired.
    pub unmatched: Vec<PathBuf>,
}

fn extension(path: &Path) -> Option<String> {
    path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase)
}

fn stem_of(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn sorted_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn is_image(path: &Path) -> bool {
    extension(path).is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.as_str()))
}

/// Pairs `<stem>.json` with `<stem>.png|jpg|jpeg`.
pub fn discover_pairs(dir: &Path) -> Result<Discovery> {
    let mut images: BTreeMap<String, Vec<PathBuf>> = BTreeMap::new();
    let mut jsons: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut out = Discovery::default();
    for path in sorted_files(dir)? {
        if extension(&path).as_deref() == Some("json") {
            jsons.insert(stem_of(&path), path);
        } else if is_image(&path) {
            images.entry(stem_of(&path)).or_default().push(path);
        }
    }
    for (stem, mut imgs) in images {
        match jsons.remove(&stem) {
            Some(annotation) => {
                let image = imgs.remove(0);
                out.unmatched.extend(imgs);
                out.pairs.push(ImagePair { stem, image, annotation });
            }
            None => out.unmatched.extend(imgs),
        }
    }
    out.unmatched.extend(jsons.into_values());
    out.unmatched.sort();
    Ok(out)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn save_png<P2, C>(img: &image::ImageBuffer<P2, C>, path: &Path) -> Result<()>
where
    P2: image::Pixel + image::PixelWithColorType,
    [P2::Subpixel]: image::EncodableLayout,
    C: std::ops::Deref<Target = [P2::Subpixel]>,
{
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Encode(format!("{}: {e}", path.display())))
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("report serializes");
    bytes.push(b'\n');
    write(path, &bytes)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub name: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageReport {
    pub name: String,
    pub polygons: usize,
    pub displacement: DisplacementStats,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct CorrectReport {
    pub images: Vec<ImageReport>,
    pub failures: Vec<Failure>,
    pub unmatched: Vec<String>,
}

impl CorrectReport {
    pub fn is_clean(&self) -> bool {
        self.failures.is_empty() && self.unmatched.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageTiming {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct TimingReport {
    pub workers: usize,
    pub total_seconds: f64,
    pub images: Vec<ImageTiming>,
}

pub const REPORT_FILE: &str = "report.json";
pub const TIMING_FILE: &str = "timing.json";

/// Runs the full correction on one pair and writes its outputs.
pub fn process_pair(pair: &ImagePair, out_dir: &Path, config: &PipelineConfig) -> Result<ImageReport> {
    let img = load_grayscale::<f64>(&read(&pair.image)?)?;
    let set = parse_annotation(&read(&pair.annotation)?)?;
    let field = GradientField::from_image(&img, config.sigma)?;
    let result = correct_annotations(&set, &field, config)?;

    let mut outputs = Vec::new();
    let json = format!("{}.json", pair.stem);
    write(&out_dir.join(&json), &write_annotation(&result.annotations))?;
    outputs.push(json);
    let edge = format!("{}_edge.png", pair.stem);
    save_png(&result.edges.to_luma8(), &out_dir.join(&edge))?;
    outputs.push(edge);
    if config.raster.write_original {
        let name = format!("{}_orig_edge.png", pair.stem);
        save_png(&rasterize_original(&set).to_luma8(), &out_dir.join(&name))?;
        outputs.push(name);
    }
    if config.raster.dump_gradient {
        let name = format!("{}_grad.png", pair.stem);
        save_png(&field.to_luma16(), &out_dir.join(&name))?;
        outputs.push(name);
    }
    Ok(ImageReport {
        name: pair.stem.clone(),
        polygons: result.polygons.len(),
        displacement: result.stats,
        outputs,
    })
}

/// Corrects every pair in `in_dir`, writing outputs plus `report.json` and
/// `timing.json` into `out_dir`. Only the timing file varies between runs.
pub fn run_correct(in_dir: &Path, out_dir: &Path, config: &PipelineConfig) -> Result<(CorrectReport, TimingReport)> {
    config.validate()?;
    let found = discover_pairs(in_dir)?;
    create_dir(out_dir)?;
    let pool = thread_pool(config.workers)?;
    let start = Instant::now();
    let results: Vec<(Result<ImageReport>, f64)> = pool.install(|| {
        found
            .pairs
            .par_iter()
            .map(|pair| {
                let t = Instant::now();
                let r = process_pair(pair, out_dir, config);
                let secs = t.elapsed().as_secs_f64();
                match &r {
                    Ok(rep) => log::info!("{}: {} polygons in {secs:.3}s", rep.name, rep.polygons),
                    Err(e) => log::error!("{}: {e}", pair.stem),
                }
                (r, secs)
            })
            .collect()
    });
    let mut report = CorrectReport {
        unmatched: found.unmatched.iter().map(|p| p.display().to_string()).collect(),
        ..CorrectReport::default()
    };
    let mut timing = TimingReport {
        workers: pool.current_num_threads(),
        total_seconds: start.elapsed().as_secs_f64(),
        images: Vec::new(),
    };
    for (pair, (r, seconds)) in found.pairs.iter().zip(results) {
        timing.images.push(ImageTiming {
            name: pair.stem.clone(),
            seconds,
        });
        match r {
            Ok(rep) => report.images.push(rep),
            Err(e) => report.failures.push(Failure {
                name: pair.stem.clone(),
                error: e.to_string(),
            }),
        }
    }
    for u in &report.unmatched {
        log::warn!("skipping unmatched file {u}");
    }
    write_json(&out_dir.join(REPORT_FILE), &report)?;
    write_json(&out_dir.join(TIMING_FILE), &timing)?;
    Ok((report, timing))
}

/// Outcome of the simpler batch commands.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct BatchReport {
    pub written: Vec<String>,
    pub failures: Vec<Failure>,
    pub skipped: Vec<String>,
}

impl BatchReport {
    pub fn is_clean(&self) -> bool {
        self.failures.is_empty() && self.skipped.is_empty()
    }

    fn absorb(&mut self, name: String, r: Result<Vec<String>>) {
        match r {
            Ok(files) => self.written.extend(files),
            Err(e) => {
                log::error!("{name}: {e}");
                self.failures.push(Failure { name, error: e.to_string() });
            }
        }
    }
}

/// Rasterizes the uncorrected polygons of every annotation in `in_dir`.
pub fn run_rasterize(in_dir: &Path, out_dir: &Path, config: &PipelineConfig) -> Result<BatchReport> {
    let jsons: Vec<PathBuf> = sorted_files(in_dir)?
        .into_iter()
        .filter(|p| extension(p).as_deref() == Some("json"))
        .collect();
    create_dir(out_dir)?;
    let pool = thread_pool(config.workers)?;
    let results: Vec<Result<Vec<String>>> = pool.install(|| {
        jsons
            .par_iter()
            .map(|path| {
                let set = parse_annotation(&read(path)?)?;
                let name = format!("{}_edge.png", stem_of(path));
                save_png(&rasterize_original(&set).to_luma8(), &out_dir.join(&name))?;
                Ok(vec![name])
            })
            .collect()
    });
    let mut report = BatchReport::default();
    for (path, r) in jsons.iter().zip(results) {
        report.absorb(stem_of(path), r);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRun {
    pub summary: Option<EvalSummary>,
    /// Ground-truth files without a prediction, or with mismatched sizes.
    pub failures: Vec<Failure>,
}

/// Scores every `<name>.png` in `gt_dir` against the same file name in
/// `pred_dir`. Predictions are soft maps scaled to `[0, 1]`; any non-zero
/// ground-truth pixel is an edge.
pub fn run_eval(pred_dir: &Path, gt_dir: &Path, config: &PipelineConfig) -> Result<EvalRun> {
    let gts: Vec<PathBuf> = sorted_files(gt_dir)?
        .into_iter()
        .filter(|p| extension(p).as_deref() == Some("png"))
        .collect();
    let thresholds = default_thresholds(config.eval.thresholds);
    let pool = thread_pool(config.workers)?;
    let results: Vec<Result<ImageCurve>> = pool.install(|| {
        gts.par_iter()
            .map(|gt_path| {
                let name = gt_path.file_name().expect("listed files have names");
                let pred_path = pred_dir.join(name);
                let gt = EdgeMap::from_luma8(&decode_luma(gt_path)?);
                let pred = SoftEdgeMap::from_luma8(&decode_luma(&pred_path)?);
                if (pred.width(), pred.height()) != (gt.width(), gt.height()) {
                    return Err(Error::Dimensions(format!(
                        "prediction is {}x{} but ground truth is {}x{}",
                        pred.width(),
                        pred.height(),
                        gt.width(),
                        gt.height()
                    )));
                }
                let options = EvalOptions {
                    tolerance: config.eval.tolerance_for(gt.width(), gt.height()),
                    mode: config.eval.match_mode(),
                };
                Ok(ImageCurve {
                    name: stem_of(gt_path),
                    points: pr_curve(&pred, &gt, &thresholds, &options)?,
                })
            })
            .collect()
    });
    let mut curves = Vec::new();
    let mut failures = Vec::new();
    for (path, r) in gts.iter().zip(results) {
        match r {
            Ok(c) => curves.push(c),
            Err(e) => failures.push(Failure {
                name: stem_of(path),
                error: e.to_string(),
            }),
        }
    }
    let summary = if curves.is_empty() { None } else { Some(summarize(curves)?) };
    Ok(EvalRun { summary, failures })
}

fn decode_luma(path: &Path) -> Result<image::GrayImage> {
    let img = image::load_from_memory(&read(path)?).map_err(|e| Error::Decode(format!("{}: {e}", path.display())))?;
    Ok(img.to_luma8())
}

fn decode_rgb(path: &Path) -> Result<image::RgbImage> {
    let img = image::load_from_memory(&read(path)?).map_err(|e| Error::Decode(format!("{}: {e}", path.display())))?;
    Ok(img.to_rgb8())
}

/// Dataset-level precision/recall table.
pub fn pr_table_csv(summary: &EvalSummary) -> String {
    let mut out = String::from("threshold,precision,recall,f,tp,fp,fn\n");
    for p in &summary.dataset {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            p.threshold, p.precision, p.recall, p.f, p.tp, p.fp, p.fn_
        ));
    }
    out
}

pub fn write_eval(run: &EvalRun, out_dir: &Path) -> Result<()> {
    create_dir(out_dir)?;
    write_json(&out_dir.join("eval.json"), run)?;
    if let Some(s) = &run.summary {
        write(&out_dir.join("pr.csv"), pr_table_csv(s).as_bytes())?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct PrepReport {
    pub patches: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub batch: BatchReport,
}

fn find_label(labels_dir: &Path, stem: &str) -> Option<PathBuf> {
    [format!("{stem}_edge.png"), format!("{stem}.png")]
        .into_iter()
        .map(|n| labels_dir.join(n))
        .find(|p| p.is_file())
}

/// Cuts every image of `images_dir` and its label map from `labels_dir`
/// (`<stem>_edge.png` or `<stem>.png`) into patches, then splits all patches
/// 6:1:3. Writes `<split>/images`, `<split>/labels` and `manifest.csv`.
pub fn run_prep(images_dir: &Path, labels_dir: &Path, out_dir: &Path, config: &PipelineConfig) -> Result<PrepReport> {
    let prep = &config.prep;
    let spec = PatchSpec::offset_grid(prep.source_width, prep.source_height, prep.grid_cols, prep.grid_rows)?;
    let mut report = PrepReport::default();
    let mut sources = Vec::new();
    for image in sorted_files(images_dir)?.into_iter().filter(|p| is_image(p)) {
        let stem = stem_of(&image);
        let Some(label) = find_label(labels_dir, &stem) else {
            log::warn!("{stem}: no label map, skipped");
            report.batch.skipped.push(image.display().to_string());
            continue;
        };
        let dims = image::image_dimensions(&image).map_err(|e| Error::Decode(format!("{}: {e}", image.display())));
        match dims.and_then(|(w, h)| spec.check_source(w, h)) {
            Ok(()) => sources.push((stem, image, label)),
            Err(e) => report.batch.failures.push(Failure { name: stem, error: e.to_string() }),
        }
    }
    let per = spec.origins.len();
    report.patches = sources.len() * per;
    if report.patches == 0 {
        return Ok(report);
    }
    let split = split_dataset(report.patches, prep.seed)?;
    let labels = split.labels();
    (report.train, report.val, report.test) = (split.train.len(), split.val.len(), split.test.len());
    for s in ["train", "val", "test"] {
        create_dir(&out_dir.join(s).join("images"))?;
        create_dir(&out_dir.join(s).join("labels"))?;
    }

    let pool = thread_pool(config.workers)?;
    let results: Vec<Result<Vec<String>>> = pool.install(|| {
        sources
            .par_iter()
            .enumerate()
            .map(|(k, (stem, image, label))| {
                let rgb = decode_rgb(image)?;
                let edges = EdgeMap::from_luma8(&decode_luma(label)?);
                spec.check_source(edges.width(), edges.height())?;
                let mut rows = Vec::with_capacity(per);
                for (j, &(x, y)) in spec.origins.iter().enumerate() {
                    let name = format!("{stem}_{j:02}.png");
                    let target = labels[k * per + j].as_str();
                    let dir = out_dir.join(target);
                    let crop = image::imageops::crop_imm(&rgb, x, y, spec.patch_w, spec.patch_h).to_image();
                    save_png(&crop, &dir.join("images").join(&name))?;
                    save_png(&crop_edges(&edges, (x, y), spec.patch_w, spec.patch_h).to_luma8(), &dir.join("labels").join(&name))?;
                    rows.push(format!("{target}/images/{name},{target},{stem},{x},{y}"));
                }
                Ok(rows)
            })
            .collect()
    });
    let mut manifest = String::from("file,split,source,x,y\n");
    for ((stem, _, _), r) in sources.iter().zip(results) {
        if let Ok(rows) = &r {
            for row in rows {
                manifest.push_str(row);
                manifest.push('\n');
            }
        }
        report.batch.absorb(stem.clone(), r);
    }
    write(&out_dir.join("manifest.csv"), manifest.as_bytes())?;
    Ok(report)
}

fn draw_loops(canvas: &mut image::RgbImage, loops: &[Vec<P>], color: [u8; 3]) {
    let size = canvas.dimensions();
    for l in loops {
        for (x, y) in trace_loop(l, size) {
            canvas.put_pixel(x, y, image::Rgb(color));
        }
    }
}

/// Original contours in red on the left, corrected contours in green on
/// the right, over the same image.
pub fn comparison_image(rgb: &image::RgbImage, original: &AnnotationSet<f64>, corrected: &AnnotationSet<f64>) -> image::RgbImage {
    let (w, h) = rgb.dimensions();
    let mut left = rgb.clone();
    let mut right = rgb.clone();
    let loops = |s: &AnnotationSet<f64>| s.polygons.iter().map(|p| p.points.clone()).collect::<Vec<_>>();
    draw_loops(&mut left, &loops(original), [255, 0, 0]);
    draw_loops(&mut right, &loops(corrected), [0, 255, 0]);
    let mut out = image::RgbImage::new(2 * w, h);
    image::imageops::replace(&mut out, &left, 0, 0);
    image::imageops::replace(&mut out, &right, i64::from(w), 0);
    out
}

/// Writes `<stem>_compare.png` for every pair in `in_dir` whose corrected
/// annotation exists in `corrected_dir`.
pub fn run_compare(in_dir: &Path, corrected_dir: &Path, out_dir: &Path, config: &PipelineConfig) -> Result<BatchReport> {
    let found = discover_pairs(in_dir)?;
    create_dir(out_dir)?;
    let mut report = BatchReport {
        skipped: found.unmatched.iter().map(|p| p.display().to_string()).collect(),
        ..BatchReport::default()
    };
    let pool = thread_pool(config.workers)?;
    let results: Vec<Result<Vec<String>>> = pool.install(|| {
        found
            .pairs
            .par_iter()
            .map(|pair| {
                let rgb = decode_rgb(&pair.image)?;
                let original = parse_annotation(&read(&pair.annotation)?)?;
                let corrected = parse_annotation(&read(&corrected_dir.join(format!("{}.json", pair.stem)))?)?;
                let name = format!("{}_compare.png", pair.stem);
                save_png(&comparison_image(&rgb, &original, &corrected), &out_dir.join(&name))?;
                Ok(vec![name])
            })
            .collect()
    });
    for (pair, r) in found.pairs.iter().zip(results) {
        report.absorb(pair.stem.clone(), r);
    }
    Ok(report)
}

//! Boundary-detection scoring: tolerance-matched precision/recall per
//! threshold, aggregated into ODS, OIS and AP.
//!
//! Conventions follow the usual contour benchmark with one ground truth per
//! image. Predictions and ground truth are both thinned to one-pixel
//! skeletons before matching. A predicted pixel matches at most one ground
//! truth pixel within Euclidean distance `tol`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::raster::EdgeMap;

/// How predicted pixels are paired with ground-truth pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatchMode {
    /// Pairs taken in increasing distance order, first come first served.
    Greedy,
    /// Greedy seed followed by augmenting paths, giving a maximum one-to-one
    /// matching.
    #[default]
    Augmented,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct MatchCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl MatchCounts {
    /// Matched predictions over all predictions; 1 when nothing is predicted.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    /// Matched ground truth over all ground truth; 1 when there is none.
    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f_measure(&self) -> f64 {
        f_measure(self.precision(), self.recall())
    }
}

impl std::ops::Add for MatchCounts {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

pub fn f_measure(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Conventional matching distance: 0.75 % of the image diagonal.
pub fn default_tolerance(width: u32, height: u32) -> f64 {
    0.0075 * f64::from(width).hypot(f64::from(height))
}

/// `n` thresholds uniformly spaced strictly inside `(0, 1)`.
pub fn default_thresholds(n: usize) -> Vec<f64> {
    (1..=n).map(|k| k as f64 / (n + 1) as f64).collect()
}

struct Candidates {
    /// Per predicted pixel, `(distance^2, gt index)` sorted by distance.
    adjacency: Vec<Vec<(i64, usize)>>,
    gt_count: usize,
}

fn candidates(pred: &EdgeMap, gt: &EdgeMap, tol: f64) -> Candidates {
    let (w, h) = (gt.width() as i64, gt.height() as i64);
    let mut gt_index = vec![usize::MAX; (w * h) as usize];
    let mut gt_count = 0;
    for (x, y) in gt.pixels() {
        gt_index[(y as i64 * w + x as i64) as usize] = gt_count;
        gt_count += 1;
    }
    let reach = tol.floor() as i64;
    let tol2 = tol * tol;
    let adjacency = pred
        .pixels()
        .map(|(px, py)| {
            let mut adj = Vec::new();
            for dy in -reach..=reach {
                let y = py as i64 + dy;
                if !(0..h).contains(&y) {
                    continue;
                }
                for dx in -reach..=reach {
                    let x = px as i64 + dx;
                    let d2 = dx * dx + dy * dy;
                    if !(0..w).contains(&x) || d2 as f64 > tol2 {
                        continue;
                    }
                    let g = gt_index[(y * w + x) as usize];
                    if g != usize::MAX {
                        adj.push((d2, g));
                    }
                }
            }
            adj.sort_unstable();
            adj
        })
        .collect();
    Candidates { adjacency, gt_count }
}

fn greedy(c: &Candidates) -> (Vec<usize>, Vec<usize>) {
    let mut edges: Vec<(i64, usize, usize)> = c
        .adjacency
        .iter()
        .enumerate()
        .flat_map(|(p, adj)| adj.iter().map(move |&(d2, g)| (d2, p, g)))
        .collect();
    edges.sort_unstable();
    let mut pred_match = vec![usize::MAX; c.adjacency.len()];
    let mut gt_match = vec![usize::MAX; c.gt_count];
    for (_, p, g) in edges {
        if pred_match[p] == usize::MAX && gt_match[g] == usize::MAX {
            pred_match[p] = g;
            gt_match[g] = p;
        }
    }
    (pred_match, gt_match)
}

/// Grows a matching to maximum cardinality with iterative augmenting-path
/// searches from every free predicted pixel.
fn augment(c: &Candidates, pred_match: &mut [usize], gt_match: &mut [usize]) {
    let mut stamp = vec![0usize; c.gt_count];
    let mut round = 0;
    for root in 0..c.adjacency.len() {
        if pred_match[root] != usize::MAX {
            continue;
        }
        round += 1;
        // Stack of (pred vertex, next adjacency position); parent gt per level.
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        let mut via: Vec<usize> = Vec::new();
        let mut found = None;
        while let Some(&mut (u, ref mut pos)) = stack.last_mut() {
            let adj = &c.adjacency[u];
            if *pos >= adj.len() {
                stack.pop();
                via.pop();
                continue;
            }
            let g = adj[*pos].1;
            *pos += 1;
            if stamp[g] == round {
                continue;
            }
            stamp[g] = round;
            via.push(g);
            match gt_match[g] {
                usize::MAX => {
                    found = Some(());
                    break;
                }
                next => stack.push((next, 0)),
            }
        }
        if found.is_some() {
            // `via[k]` is the gt vertex taken from `stack[k]`.
            for (k, &(u, _)) in stack.iter().enumerate() {
                let g = via[k];
                pred_match[u] = g;
                gt_match[g] = u;
            }
        }
    }
}

pub fn match_edges(pred: &EdgeMap, gt: &EdgeMap, tol: f64) -> Result<MatchCounts> {
    match_edges_with(pred, gt, tol, MatchMode::default())
}

pub fn match_edges_with(pred: &EdgeMap, gt: &EdgeMap, tol: f64, mode: MatchMode) -> Result<MatchCounts> {
    if (pred.width(), pred.height()) != (gt.width(), gt.height()) {
        return Err(Error::Dimensions(format!(
            "prediction is {}x{} but ground truth is {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height()
        )));
    }
    if !(tol >= 0.0) || !tol.is_finite() {
        return Err(Error::param(format!("match tolerance must be >= 0, got {tol}")));
    }
    let c = candidates(pred, gt, tol);
    let (mut pred_match, mut gt_match) = greedy(&c);
    if mode == MatchMode::Augmented {
        augment(&c, &mut pred_match, &mut gt_match);
    }
    let tp = pred_match.iter().filter(|&&m| m != usize::MAX).count();
    Ok(MatchCounts {
        tp,
        fp: pred_match.len() - tp,
        fn_: c.gt_count - tp,
    })
}

/// Zhang-Suen thinning to a one-pixel-wide skeleton.
pub fn thin(map: &EdgeMap) -> EdgeMap {
    let (w, h) = (map.width() as i64, map.height() as i64);
    let mut bits = map.bits().to_vec();
    let at = |bits: &[bool], x: i64, y: i64| x >= 0 && y >= 0 && x < w && y < h && bits[(y * w + x) as usize];
    let mut remove = Vec::new();
    loop {
        let mut changed = false;
        for pass in 0..2 {
            remove.clear();
            for y in 0..h {
                for x in 0..w {
                    if !bits[(y * w + x) as usize] {
                        continue;
                    }
                    // P2..P9 clockwise from north.
                    let n = [
                        at(&bits, x, y - 1),
                        at(&bits, x + 1, y - 1),
                        at(&bits, x + 1, y),
                        at(&bits, x + 1, y + 1),
                        at(&bits, x, y + 1),
                        at(&bits, x - 1, y + 1),
                        at(&bits, x - 1, y),
                        at(&bits, x - 1, y - 1),
                    ];
                    let b = n.iter().filter(|&&v| v).count();
                    if !(2..=6).contains(&b) {
                        continue;
                    }
                    let a = (0..8).filter(|&i| !n[i] && n[(i + 1) % 8]).count();
                    if a != 1 {
                        continue;
                    }
                    let (p2, p4, p6, p8) = (n[0], n[2], n[4], n[6]);
                    let ok = if pass == 0 {
                        !(p2 && p4 && p6) && !(p4 && p6 && p8)
                    } else {
                        !(p2 && p4 && p8) && !(p2 && p6 && p8)
                    };
                    if ok {
                        remove.push((y * w + x) as usize);
                    }
                }
            }
            for &i in &remove {
                bits[i] = false;
            }
            changed |= !remove.is_empty();
        }
        if !changed {
            break;
        }
    }
    EdgeMap::from_bits(map.width(), map.height(), bits).expect("same dimensions")
}

/// Real-valued edge strength map with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftEdgeMap {
    width: u32,
    height: u32,
    values: Vec<f64>,
}

impl SoftEdgeMap {
    pub fn new(width: u32, height: u32, values: Vec<f64>) -> Result<Self> {
        if values.len() != width as usize * height as usize {
            return Err(Error::Dimensions(format!(
                "{width}x{height} soft map needs {} values, got {}",
                width as usize * height as usize,
                values.len()
            )));
        }
        Ok(Self {
            width,
            height,
            values: values.into_iter().map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) }).collect(),
        })
    }

    pub fn from_edges(map: &EdgeMap) -> Self {
        Self {
            width: map.width(),
            height: map.height(),
            values: map.bits().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    pub fn from_luma8(img: &image::GrayImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            values: img.as_raw().iter().map(|&v| f64::from(v) / 255.0).collect(),
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn binarize(&self, threshold: f64) -> EdgeMap {
        let bits = self.values.iter().map(|&v| v >= threshold).collect();
        EdgeMap::from_bits(self.width, self.height, bits).expect("same dimensions")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PRPoint {
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

impl PRPoint {
    pub fn from_counts(threshold: f64, c: MatchCounts) -> Self {
        Self {
            threshold,
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
            precision: c.precision(),
            recall: c.recall(),
            f: c.f_measure(),
        }
    }

    pub fn counts(&self) -> MatchCounts {
        MatchCounts {
            tp: self.tp,
            fp: self.fp,
            fn_: self.fn_,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub tolerance: f64,
    pub mode: MatchMode,
}

pub fn pr_curve(pred_soft: &SoftEdgeMap, gt: &EdgeMap, thresholds: &[f64], options: &EvalOptions) -> Result<Vec<PRPoint>> {
    if thresholds.windows(2).any(|w| !(w[0] < w[1])) || thresholds.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
        return Err(Error::param("thresholds must be strictly increasing inside (0, 1)"));
    }
    let gt = thin(gt);
    thresholds
        .iter()
        .map(|&t| {
            let pred = thin(&pred_soft.binarize(t));
            let counts = match_edges_with(&pred, &gt, options.tolerance, options.mode)?;
            Ok(PRPoint::from_counts(t, counts))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageCurve {
    pub name: String,
    pub points: Vec<PRPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSummary {
    pub ods: f64,
    pub ods_threshold: f64,
    pub ois: f64,
    pub ap: f64,
    /// Pooled counts per threshold.
    pub dataset: Vec<PRPoint>,
    pub per_image: Vec<ImageCurve>,
}

/// Area under a precision-recall curve. Points are deduplicated by recall
/// (keeping the best precision), sorted, extended flat to recall 0 and
/// integrated with the trapezoid rule.
pub fn average_precision(points: &[PRPoint]) -> f64 {
    let mut pr: Vec<(f64, f64)> = points.iter().map(|p| (p.recall, p.precision)).collect();
    pr.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    pr.dedup_by(|later, earlier| later.0 == earlier.0);
    let Some(&(r0, p0)) = pr.first() else {
        return 0.0;
    };
    let mut area = r0 * p0;
    for w in pr.windows(2) {
        area += (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0;
    }
    area.clamp(0.0, 1.0)
}

pub fn summarize(per_image: Vec<ImageCurve>) -> Result<EvalSummary> {
    let first = per_image.first().ok_or_else(|| Error::param("cannot summarize an empty dataset"))?;
    let thresholds: Vec<f64> = first.points.iter().map(|p| p.threshold).collect();
    if thresholds.is_empty() {
        return Err(Error::param("precision-recall curves are empty"));
    }
    for img in &per_image {
        if img.points.len() != thresholds.len() || img.points.iter().zip(&thresholds).any(|(p, &t)| p.threshold != t) {
            return Err(Error::param(format!("image `{}` was scored on different thresholds", img.name)));
        }
    }

    let dataset: Vec<PRPoint> = thresholds
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let pooled = per_image.iter().fold(MatchCounts::default(), |acc, img| acc + img.points[k].counts());
            PRPoint::from_counts(t, pooled)
        })
        .collect();
    let best = dataset
        .iter()
        .fold(None::<&PRPoint>, |best, p| match best {
            Some(b) if b.f >= p.f => Some(b),
            _ => Some(p),
        })
        .expect("non-empty");

    let ois_counts = per_image.iter().fold(MatchCounts::default(), |acc, img| {
        let own = img
            .points
            .iter()
            .fold(None::<&PRPoint>, |best, p| match best {
                Some(b) if b.f >= p.f => Some(b),
                _ => Some(p),
            })
            .expect("non-empty");
        acc + own.counts()
    });

    Ok(EvalSummary {
        ods: best.f,
        ods_threshold: best.threshold,
        ois: ois_counts.f_measure(),
        ap: average_precision(&dataset),
        dataset,
        per_image,
    })
}

//! Gradient-guided label point correction.
//!
//! Each label point is tested for lying in a strong-gradient region by
//! sampling kernel-weighted gradient values along the contour normal. Strong
//! points move to the best candidate; weak points are left where the
//! annotator put them.

use crate::annotation::PolygonAnnotation;
use crate::error::{Error, Result};
use crate::geometry::{next_index, prev_index, Point2};
use crate::gradient::{sample_field, GradientField};
use crate::scalar::Scalar;

/// Which value picks the winning candidate once a point is judged strong.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ArgmaxMode {
    /// Kernel-weighted gradient `w_j * g_j`.
    #[default]
    Weighted,
    /// Raw gradient `g_j`.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionParams<T> {
    /// Search radius along the normal, in pixels.
    pub radius: u32,
    /// Bandwidth of the candidate weighting kernel.
    pub bandwidth: T,
    /// Gradient-contrast threshold on the `0..=255` intensity scale.
    pub lambda_t: T,
    pub candidate_step: T,
    pub argmax: ArgmaxMode,
}

impl<T: Scalar> Default for CorrectionParams<T> {
    fn default() -> Self {
        Self::with_radius(7)
    }
}

impl<T: Scalar> CorrectionParams<T> {
    /// `h = r / 2`, `lambda_t = 20`, unit candidate spacing.
    pub fn with_radius(radius: u32) -> Self {
        Self {
            radius,
            bandwidth: T::of(f64::from(radius) / 2.0),
            lambda_t: T::of(20.0),
            candidate_step: T::one(),
            argmax: ArgmaxMode::Weighted,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.radius < 1 {
            return Err(Error::param("correction radius must be >= 1"));
        }
        if !(self.bandwidth > T::zero()) || !self.bandwidth.is_finite() {
            return Err(Error::param("correction bandwidth must be positive"));
        }
        if !(self.lambda_t >= T::zero()) || !self.lambda_t.is_finite() {
            return Err(Error::param("lambda_t must be non-negative"));
        }
        if !(self.candidate_step > T::zero()) || !self.candidate_step.is_finite() {
            return Err(Error::param("candidate_step must be positive"));
        }
        Ok(())
    }

    /// `kappa_h(u) = kappa(u / h) / h` with `kappa` the standard normal density.
    #[inline]
    pub fn kernel(&self, distance: T) -> T {
        (distance / self.bandwidth).std_normal_pdf() / self.bandwidth
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate<T> {
    /// Signed offset along the normal.
    pub offset: T,
    pub point: Point2<T>,
    pub weight: T,
    pub gradient: T,
    pub weighted: T,
}

/// Candidates on `center + t * normal` for symmetric offsets `t`, ordered by
/// increasing `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet<T> {
    pub center: Point2<T>,
    pub candidates: Vec<Candidate<T>>,
}

impl<T: Scalar> CandidateSet<T> {
    /// `|max(w g) - min(w g)| - lambda_t * max(w)`; positive means strong.
    pub fn contrast(&self, lambda_t: T) -> T {
        let (lo, hi, wmax) = self.candidates.iter().fold(
            (T::infinity(), T::neg_infinity(), T::neg_infinity()),
            |(lo, hi, wmax), c| (lo.min(c.weighted), hi.max(c.weighted), wmax.max(c.weight)),
        );
        (hi - lo).abs() - lambda_t * wmax
    }
}

/// Unit normal at point `i`, perpendicular to the chord joining its two
/// neighbours. Falls back to the adjacent segment when the neighbours
/// coincide.
pub fn normal_direction<T: Scalar>(points: &[Point2<T>], i: usize) -> Point2<T> {
    let n = points.len();
    let prev = points[prev_index(i, n)];
    let next = points[next_index(i, n)];
    let tangent = (next - prev)
        .normalized()
        .or_else(|| (points[i] - prev).normalized())
        .or_else(|| (next - points[i]).normalized())
        .unwrap_or_else(|| Point2::new(T::one(), T::zero()));
    Point2::new(tangent.y, -tangent.x)
}

pub fn build_candidates<T: Scalar>(
    center: Point2<T>,
    normal: Point2<T>,
    params: &CorrectionParams<T>,
    field: &GradientField<T>,
) -> CandidateSet<T> {
    let reach = T::of(f64::from(params.radius)) / params.candidate_step;
    // Absorb rounding so r / step = 7 exactly yields 7 and not 6.
    let steps = (reach + T::of(1e-9)).floor().to_usize().unwrap_or(0);
    let candidates = (0..=2 * steps)
        .map(|k| {
            let offset = (T::of_usize(k) - T::of_usize(steps)) * params.candidate_step;
            let point = center + normal * offset;
            let weight = params.kernel(offset.abs());
            let gradient = sample_field(field, point);
            Candidate {
                offset,
                point,
                weight,
                gradient,
                weighted: weight * gradient,
            }
        })
        .collect();
    CandidateSet { center, candidates }
}

/// Outcome of correcting one label point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointCorrection<T> {
    pub point: Point2<T>,
    pub contrast: T,
    pub moved: bool,
}

pub fn correct_point<T: Scalar>(cands: &CandidateSet<T>, params: &CorrectionParams<T>) -> Point2<T> {
    evaluate_point(cands, params).point
}

/// Like [`correct_point`] but also reports the strong-gradient test.
pub fn evaluate_point<T: Scalar>(cands: &CandidateSet<T>, params: &CorrectionParams<T>) -> PointCorrection<T> {
    let contrast = cands.contrast(params.lambda_t);
    if !(contrast > T::zero()) {
        return PointCorrection {
            point: cands.center,
            contrast,
            moved: false,
        };
    }
    let score = |c: &Candidate<T>| match params.argmax {
        ArgmaxMode::Weighted => c.weighted,
        ArgmaxMode::Raw => c.gradient,
    };
    // Ties go to the smallest |t|, then the smaller t; candidates are sorted by t.
    let mut best = &cands.candidates[0];
    for c in &cands.candidates[1..] {
        let (s, b) = (score(c), score(best));
        if s > b || (s == b && c.offset.abs() < best.offset.abs()) {
            best = c;
        }
    }
    PointCorrection {
        point: best.point,
        contrast,
        moved: best.offset != T::zero(),
    }
}

/// Corrects every point against the normals of the input polygon, so the
/// result does not depend on processing order.
pub fn correct_points<T: Scalar>(
    points: &[Point2<T>],
    field: &GradientField<T>,
    params: &CorrectionParams<T>,
) -> Vec<PointCorrection<T>> {
    (0..points.len())
        .map(|i| {
            let normal = normal_direction(points, i);
            evaluate_point(&build_candidates(points[i], normal, params, field), params)
        })
        .collect()
}

pub fn correct_polygon<T: Scalar>(
    poly: &PolygonAnnotation<T>,
    field: &GradientField<T>,
    params: &CorrectionParams<T>,
) -> PolygonAnnotation<T> {
    let points = correct_points(&poly.points, field, params)
        .into_iter()
        .map(|c| c.point)
        .collect();
    // Snapping can make neighbours coincide; the point count is kept as is.
    PolygonAnnotation {
        id: poly.id.clone(),
        class: poly.class,
        points,
    }
}

//! Smooth closed-curve refitting with locally weighted linear regression.
//!
//! A corrected loop is first densified so no gap exceeds `step`. The loop is
//! then cut into overlapping groups of `n_g` points; every group is rotated
//! into a frame whose x-axis joins its end points and fitted with a
//! kernel-weighted line at each target abscissa. Two points per group carry
//! boosted weight so neighbouring segments meet.
//!
//! In [`FitMode::SmoothClosed`] every point gets its own centred group and
//! only positions change. [`FitMode::Stitched`] samples each group's fitted
//! curve over its share of the loop and concatenates the pieces.

use crate::annotation::PolygonClass;
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::scalar::Scalar;

/// Weight multiplier applied to the two stitch points of each group.
pub const STITCH_BOOST: f64 = 1.5;

/// Bandwidth constants for one contour class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassFit<T> {
    /// Multiplier `a` in `h = a * b + c`.
    pub a: T,
    /// `n_g = max(floor(step * n_I / divisor), min_group)`.
    pub divisor: T,
    pub min_group: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    /// One centred group per point, `n_d = r_f - 0.5`.
    SmoothClosed,
    /// Groups overlapping by `n_d = overlap_halves / 2` points on each side.
    Stitched { overlap_halves: usize },
}

impl FitMode {
    /// Stitched mode from a half-integer overlap `n_d`.
    pub fn stitched(overlap: f64) -> Result<Self> {
        let halves = overlap * 2.0;
        if !(halves >= 1.0) || halves.fract() != 0.0 || !halves.is_finite() {
            return Err(Error::param(format!(
                "overlap n_d must be a positive multiple of 0.5, got {overlap}"
            )));
        }
        Ok(FitMode::Stitched {
            overlap_halves: halves as usize,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitParams<T> {
    /// Largest spacing between points after interpolation.
    pub step: T,
    pub cytoplasm: ClassFit<T>,
    pub nucleus: ClassFit<T>,
    /// Divisor of the `c = floor(step * n_g) / divisor` term.
    pub c_divisor: T,
    pub mode: FitMode,
}

impl<T: Scalar> Default for FitParams<T> {
    fn default() -> Self {
        Self {
            step: T::one(),
            cytoplasm: ClassFit {
                a: T::of(10.0),
                divisor: T::of(40.0),
                min_group: 7,
            },
            nucleus: ClassFit {
                a: T::of(5.0),
                divisor: T::of(10.0),
                min_group: 3,
            },
            c_divisor: T::of(6.0),
            mode: FitMode::SmoothClosed,
        }
    }
}

impl<T: Scalar> FitParams<T> {
    pub fn class(&self, class: PolygonClass) -> &ClassFit<T> {
        match class {
            PolygonClass::Cytoplasm => &self.cytoplasm,
            PolygonClass::Nucleus => &self.nucleus,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: T| v > T::zero() && v.is_finite();
        if !positive(self.step) {
            return Err(Error::param("fit step must be positive"));
        }
        for (name, c) in [("cytoplasm", &self.cytoplasm), ("nucleus", &self.nucleus)] {
            if !positive(c.a) || !positive(c.divisor) {
                return Err(Error::param(format!("{name} fit constants must be positive")));
            }
            if c.min_group < 3 {
                return Err(Error::param(format!("{name} minimum group size must be >= 3")));
            }
        }
        if !positive(self.c_divisor) {
            return Err(Error::param("c divisor must be positive"));
        }
        if let FitMode::Stitched { overlap_halves: 0 } = self.mode {
            return Err(Error::param("stitched overlap must be positive"));
        }
        Ok(())
    }

    /// Group size for a loop of `n_points`, rounded up to the next odd value.
    pub fn group_size(&self, class: PolygonClass, n_points: usize) -> usize {
        let c = self.class(class);
        let raw = (self.step * T::of_usize(n_points) / c.divisor)
            .floor()
            .to_usize()
            .unwrap_or(0);
        let n_g = raw.max(c.min_group);
        n_g | 1
    }
}

/// Inserts evenly spaced points into every wrapped gap longer than
/// `2 * step` so that the new gaps are shorter than `step`.
pub fn interpolate_gaps<T: Scalar>(points: &[Point2<T>], step: T) -> Vec<Point2<T>> {
    interpolate_gaps_indexed(points, step).0
}

/// [`interpolate_gaps`] together with the output index of every input point.
pub fn interpolate_gaps_indexed<T: Scalar>(points: &[Point2<T>], step: T) -> (Vec<Point2<T>>, Vec<usize>) {
    let n = points.len();
    let mut out = Vec::with_capacity(n);
    let mut origin = Vec::with_capacity(n);
    for (i, &p) in points.iter().enumerate() {
        origin.push(out.len());
        out.push(p);
        let q = points[(i + 1) % n];
        let d = p.distance(q);
        if d > step * T::of(2.0) {
            // Smallest m with d / m < step.
            let m = (d / step).floor().to_usize().unwrap_or(0) + 1;
            let mf = T::of_usize(m);
            for k in 1..m {
                let t = T::of_usize(k) / mf;
                out.push(p + (q - p) * t);
            }
        }
    }
    (out, origin)
}

/// Partition of a loop of `n_points` into `groups` overlapping runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupingPlan {
    pub n_points: usize,
    /// `n_g`, odd.
    pub group_size: usize,
    /// `r_f = (n_g - 1) / 2`.
    pub radius: usize,
    /// `2 * n_d`, kept integral so all plan arithmetic is exact.
    pub overlap_halves: usize,
    /// Distance between consecutive group starts.
    pub space: usize,
    /// `n_c`.
    pub groups: usize,
    /// `n_r`, taken off the end of the last group.
    pub repeated: usize,
    /// Set when the loop is shorter than one group; the plan is then a single
    /// group of every point and the overlap identities do not apply.
    pub single: bool,
}

impl GroupingPlan {
    pub fn overlap(&self) -> f64 {
        self.overlap_halves as f64 / 2.0
    }

    /// `floor(n_d)`.
    pub fn overlap_floor(&self) -> usize {
        self.overlap_halves / 2
    }

    pub fn group_start(&self, k: usize) -> usize {
        k * self.space
    }

    pub fn group_len(&self, k: usize) -> usize {
        if k + 1 == self.groups {
            self.group_size - self.repeated
        } else {
            self.group_size
        }
    }

    /// Group-local indices of the two boosted points of group `k`.
    pub fn stitch_indices(&self, k: usize) -> (usize, usize) {
        let len = self.group_len(k);
        let f = self.overlap_floor();
        (f.min(len - 1), len.saturating_sub(1 + f))
    }
}

pub fn plan_groups(n_points: usize, group_size: usize, mode: FitMode) -> Result<GroupingPlan> {
    if group_size < 3 || group_size.is_multiple_of(2) {
        return Err(Error::param(format!("group size must be odd and >= 3, got {group_size}")));
    }
    if n_points < group_size {
        return Ok(GroupingPlan {
            n_points,
            group_size: n_points,
            radius: n_points.saturating_sub(1) / 2,
            overlap_halves: 0,
            space: n_points,
            groups: 1,
            repeated: 0,
            single: true,
        });
    }
    let radius = (group_size - 1) / 2;
    let overlap_halves = match mode {
        FitMode::SmoothClosed => 2 * radius - 1,
        FitMode::Stitched { overlap_halves } => {
            if overlap_halves == 0 || overlap_halves >= 2 * radius {
                return Err(Error::param(format!(
                    "overlap n_d = {} must satisfy 0 < n_d < r_f = {radius}",
                    overlap_halves as f64 / 2.0
                )));
            }
            overlap_halves
        }
    };
    let space = 2 * radius - overlap_halves;
    let groups = n_points.div_ceil(space);
    Ok(GroupingPlan {
        n_points,
        group_size,
        radius,
        overlap_halves,
        space,
        groups,
        repeated: space * groups - n_points,
        single: false,
    })
}

/// Rigid frame with its origin at a group's first point and the x-axis
/// through its last point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame<T> {
    pub origin: Point2<T>,
    /// Unit chord direction; the rotation is `[[ux, uy], [-uy, ux]]`.
    pub axis: Point2<T>,
}

impl<T: Scalar> LocalFrame<T> {
    pub fn new(first: Point2<T>, last: Point2<T>) -> Option<Self> {
        Some(Self {
            origin: first,
            axis: (last - first).normalized()?,
        })
    }

    #[inline]
    pub fn to_local(&self, p: Point2<T>) -> Point2<T> {
        let d = p - self.origin;
        let u = self.axis;
        Point2::new(u.x * d.x + u.y * d.y, u.x * d.y - u.y * d.x)
    }

    #[inline]
    pub fn to_global(&self, l: Point2<T>) -> Point2<T> {
        let u = self.axis;
        self.origin + Point2::new(u.x * l.x - u.y * l.y, u.y * l.x + u.x * l.y)
    }

    pub fn determinant(&self) -> T {
        self.axis.x * self.axis.x + self.axis.y * self.axis.y
    }
}

/// Frame of a group and its points expressed in it; `None` when the end
/// points coincide.
pub fn to_local_frame<T: Scalar>(group: &[Point2<T>]) -> Option<(LocalFrame<T>, Vec<Point2<T>>)> {
    let frame = LocalFrame::new(*group.first()?, *group.last()?)?;
    let local = group.iter().map(|&p| frame.to_local(p)).collect();
    Some((frame, local))
}

/// One group in its local frame, ready for fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct FitGroup<T> {
    pub xs: Vec<T>,
    pub ys: Vec<T>,
    /// `n_g` of the grouping plan the group came from.
    pub group_size: usize,
    /// Group-local indices receiving the stitch boost.
    pub stitch: Option<(usize, usize)>,
    pub bandwidth: T,
}

impl<T: Scalar> FitGroup<T> {
    pub fn new(local: &[Point2<T>], group_size: usize, stitch: Option<(usize, usize)>) -> Self {
        Self {
            xs: local.iter().map(|p| p.x).collect(),
            ys: local.iter().map(|p| p.y).collect(),
            group_size,
            stitch,
            bandwidth: T::one(),
        }
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Population standard deviation of the local ordinates.
    pub fn ordinate_std(&self) -> T {
        let n = T::of_usize(self.ys.len().max(1));
        let mean = self.ys.iter().copied().sum::<T>() / n;
        let var = self.ys.iter().map(|&y| (y - mean) * (y - mean)).sum::<T>() / n;
        var.sqrt()
    }
}

/// `h = a * b + c` with `b = 2 sigma_k sqrt(n_g)` and
/// `c = floor(step * n_g) / c_divisor`. A zero result falls back to `step`.
pub fn select_bandwidth<T: Scalar>(group: &FitGroup<T>, class: PolygonClass, params: &FitParams<T>) -> T {
    let n_g = T::of_usize(group.group_size);
    let b = T::of(2.0) * group.ordinate_std() * n_g.sqrt();
    let c = (params.step * n_g).floor() / params.c_divisor;
    let h = params.class(class).a * b + c;
    if h > T::zero() && h.is_finite() {
        h
    } else {
        params.step
    }
}

/// Normalized fit weights at target abscissa `x`.
pub fn fit_weights<T: Scalar>(group: &FitGroup<T>, x: T) -> Vec<T> {
    let h = group.bandwidth;
    let mut w: Vec<T> = group.xs.iter().map(|&xj| ((x - xj) / h).std_normal_pdf() / h).collect();
    if let Some((lo, hi)) = group.stitch {
        let boosted = T::of(STITCH_BOOST) * w.iter().copied().fold(T::zero(), T::max);
        for idx in [lo, hi] {
            if let Some(v) = w.get_mut(idx) {
                *v = boosted;
            }
        }
    }
    let total: T = w.iter().copied().sum();
    if total > T::zero() && total.is_finite() {
        for v in &mut w {
            *v = *v / total;
        }
    } else {
        // Every kernel value underflowed; fall back to uniform weights.
        let u = T::one() / T::of_usize(w.len().max(1));
        w.iter_mut().for_each(|v| *v = u);
    }
    w
}

/// Weighted least-squares line `y = b0 + b1 x` at target `x`. Returns the
/// weighted mean as a horizontal line when all abscissae coincide.
pub fn local_linear_fit<T: Scalar>(group: &FitGroup<T>, x: T) -> (T, T) {
    let w = fit_weights(group, x);
    let xm: T = w.iter().zip(&group.xs).map(|(&w, &x)| w * x).sum();
    let ym: T = w.iter().zip(&group.ys).map(|(&w, &y)| w * y).sum();
    let (mut sxx, mut sxy, mut scale) = (T::zero(), T::zero(), T::zero());
    for ((&wj, &xj), &yj) in w.iter().zip(&group.xs).zip(&group.ys) {
        let dx = xj - xm;
        sxx = sxx + wj * dx * dx;
        sxy = sxy + wj * dx * (yj - ym);
        scale = scale.max(xj.abs());
    }
    let tiny = T::epsilon() * T::of(64.0) * (scale * scale).max(T::min_positive_value());
    if !(sxx > tiny) {
        return (ym, T::zero());
    }
    let slope = sxy / sxx;
    (ym - slope * xm, slope)
}

fn wrapped<T: Copy>(points: &[T], start: usize, len: usize) -> Vec<T> {
    let n = points.len();
    (0..len).map(|k| points[(start + k) % n]).collect()
}

fn fit_at<T: Scalar>(group: &FitGroup<T>, frame: &LocalFrame<T>, x: T) -> Point2<T> {
    let (b0, b1) = local_linear_fit(group, x);
    frame.to_global(Point2::new(x, b0 + b1 * x))
}

fn prepare_group<T: Scalar>(
    raw: &[Point2<T>],
    plan: &GroupingPlan,
    stitch: (usize, usize),
    class: PolygonClass,
    params: &FitParams<T>,
) -> Option<(LocalFrame<T>, FitGroup<T>)> {
    let (frame, local) = to_local_frame(raw)?;
    let mut group = FitGroup::new(&local, plan.group_size, Some(stitch));
    group.bandwidth = select_bandwidth(&group, class, params);
    Some((frame, group))
}

/// Refits an interpolated closed loop. Smooth mode keeps the point count;
/// stitched mode resamples every group's curve at spacing `<= step`.
/// Loops shorter than one group and groups with coincident end points are
/// passed through unchanged.
pub fn refit_closed_curve<T: Scalar>(points: &[Point2<T>], class: PolygonClass, params: &FitParams<T>) -> Vec<Point2<T>> {
    let n = points.len();
    if n < 3 {
        return points.to_vec();
    }
    let n_g = params.group_size(class, n);
    if n < n_g {
        return points.to_vec();
    }
    let radius = (n_g - 1) / 2;
    let mode = match params.mode {
        FitMode::SmoothClosed => FitMode::SmoothClosed,
        // Small loops get small groups; keep n_d < r_f.
        FitMode::Stitched { overlap_halves } => FitMode::Stitched {
            overlap_halves: overlap_halves.clamp(1, 2 * radius - 1),
        },
    };
    let plan = plan_groups(n, n_g, mode).expect("group size is odd and the overlap is clamped");
    match mode {
        FitMode::SmoothClosed => refit_smooth(points, &plan, class, params),
        FitMode::Stitched { .. } => refit_stitched(points, &plan, class, params),
    }
}

fn refit_smooth<T: Scalar>(points: &[Point2<T>], plan: &GroupingPlan, class: PolygonClass, params: &FitParams<T>) -> Vec<Point2<T>> {
    let n = points.len();
    let r = plan.radius;
    let stitch = plan.stitch_indices(0);
    (0..n)
        .map(|j| {
            let raw = wrapped(points, j + n - r, plan.group_size);
            match prepare_group(&raw, plan, stitch, class, params) {
                Some((frame, group)) => fit_at(&group, &frame, group.xs[r]),
                None => points[j],
            }
        })
        .collect()
}

fn refit_stitched<T: Scalar>(points: &[Point2<T>], plan: &GroupingPlan, class: PolygonClass, params: &FitParams<T>) -> Vec<Point2<T>> {
    let n = points.len();
    let f = plan.overlap_floor();
    let mut out = Vec::new();
    for k in 0..plan.groups {
        let start = plan.group_start(k);
        let raw = wrapped(points, start, plan.group_len(k));
        // Each group covers the loop from its first stitch point up to the
        // next group's first stitch point.
        let begin = f;
        let end = plan.space + f;
        let Some((frame, group)) = prepare_group(&raw, plan, plan.stitch_indices(k), class, params) else {
            out.extend((begin..end).map(|i| points[(start + i) % n]));
            continue;
        };
        let (x0, x1) = (group.xs[begin], group.xs[end.min(raw.len() - 1)]);
        let stop = fit_at(&group, &frame, x1);
        let span = (x1 - x0).abs();
        let mut m = (span / params.step).ceil().to_usize().unwrap_or(1).max(1);
        let limit = 64 * m;
        let samples = loop {
            let samples: Vec<Point2<T>> = (0..m)
                .map(|i| fit_at(&group, &frame, x0 + (x1 - x0) * T::of_usize(i) / T::of_usize(m)))
                .collect();
            let widest = samples
                .windows(2)
                .map(|w| w[0].distance(w[1]))
                .chain(samples.last().map(|&p| p.distance(stop)))
                .fold(T::zero(), T::max);
            if widest <= params.step || m >= limit {
                break samples;
            }
            m *= 2;
        };
        out.extend(samples);
    }
    out
}

//! Automatic correction of hand-drawn cell contour annotations.
//!
//! Label points are snapped to nearby gradient maxima along the contour
//! normal where the edge is strong, each loop is refitted into a smooth
//! closed curve with locally weighted linear regression, and the result is
//! rasterized into a connected edge map. The crate also carries the
//! ODS/OIS/AP scoring harness and the patch/split tooling used to build
//! training sets from corrected labels.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which is what the I/O layer produces.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod annotation;
pub mod config;
pub mod correction;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod gradient;
pub mod pipeline;
pub mod raster;
pub mod refit;
pub mod scalar;
pub mod synthetic;

pub use annotation::{load_grayscale, parse_annotation, write_annotation, PolygonClass};
pub use config::PipelineConfig;
pub use correction::{correct_polygon, ArgmaxMode};
pub use error::{Error, Result};
pub use eval::{match_edges, pr_curve, summarize, EvalSummary, MatchCounts, MatchMode, PRPoint, SoftEdgeMap};
pub use raster::{rasterize_loop, rasterize_set, EdgeMap};
pub use refit::{interpolate_gaps, plan_groups, refit_closed_curve, FitMode, GroupingPlan};
pub use scalar::Scalar;

pub type Point = geometry::Point2<f64>;
pub type Polygon = annotation::PolygonAnnotation<f64>;
pub type Annotations = annotation::AnnotationSet<f64>;
pub type Image = annotation::RasterImage<f64>;
pub type Field = gradient::GradientField<f64>;
pub type CorrectionParams = correction::CorrectionParams<f64>;
pub type FitParams = refit::FitParams<f64>;
pub type FitGroup = refit::FitGroup<f64>;
pub type LocalFrame = refit::LocalFrame<f64>;

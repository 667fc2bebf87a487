//! Glyph vectorization and structure-constrained vector morphing.
//!
//! The pipeline traces raster glyphs into cubic-spline outlines anchored to
//! their pixel skeletons, then deforms the control points under a weighted
//! objective: region constraints from a layout annotation, a skeleton
//! structure term, a tone term and pluggable external guidance.

pub mod cli;
pub mod constraint;
pub mod delaunay;
pub mod error;
pub mod eval;
pub mod layout;
pub mod maintain;
pub mod morph;
pub mod num;
pub mod ogv;
pub mod raster;
pub mod render;
pub mod skeleton;
pub mod spline;
pub mod svg;

pub use error::{Error, Result};

/// Default-precision point.
pub type Point = num::Point2<f64>;
/// Default-precision cubic segment.
pub type Segment = spline::CubicSegment<f64>;
/// Default-precision glyph.
pub type Glyph = ogv::VectorGlyph<f64>;
/// Default-precision grayscale raster.
pub type Image = raster::GrayImage<f64>;

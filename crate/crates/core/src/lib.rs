//! Constructs holomorphic functions whose graphs are pluripolar but not
//! complete pluripolar, and certifies each quantitative step numerically.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificate;
pub mod construction;
pub mod error;
pub mod exact;
pub mod geometry;
pub mod harmonic_measure;
pub mod hull_prober;
pub mod pipeline;
pub mod series;
pub mod svg;
pub mod thinness;

pub use error::{Error, Result};

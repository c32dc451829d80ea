//! Visual relocalization from pairwise relative pose estimates.
//!
//! The pipeline retrieves reference images for a query, estimates the relative
//! pose to each reference, and triangulates the absolute query pose with a
//! RANSAC over reference pairs. Relative estimates come from a noise-model
//! oracle over synthetic scenes; the correlation layers and their auxiliary
//! loss operate on arbitrary feature maps.

// `!(x > 0.0)` style checks are kept on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod correlation;
pub mod error;
pub mod parallel;
pub mod pose;

pub use error::{Error, Result};
pub mod retrieval;
pub mod triangulate;
pub mod scene;
pub mod io;
pub mod pipeline;

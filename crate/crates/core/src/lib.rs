//! Per-tree structure from crown/shadow segmentation masks of UAV orthophotos.
//!
//! The pipeline runs from acquisition metadata and a three-class label raster
//! (background, crown, shadow) to a tree inventory:
//!
//! 1. [`solar::solar_position`] gives the sun's elevation and azimuth;
//! 2. [`raster::connected_components`] extracts crown and shadow instances;
//! 3. [`tree_metrics::pair_crowns_shadows`] attaches each crown to the shadow it casts;
//! 4. shadow length, height and biovolume follow in [`tree_metrics`].
//!
//! [`evaluation`] scores predicted masks against ground truth, and [`synth`]
//! renders synthetic orchards with known geometry for round-trip checks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evaluation;
#[cfg(feature = "io")]
pub mod io;
pub mod raster;
pub mod solar;
pub mod synth;
pub mod tree_metrics;

pub use error::{Error, Result};
pub use raster::{GeoTransform, InstanceMask, LabelClass, LabelRaster, RgbRaster};
pub use solar::{GeoLocation, SolarPosition, UtcInstant};
pub use tree_metrics::{HeightMode, HeightModel, MeasureConfig, TreeRecord};

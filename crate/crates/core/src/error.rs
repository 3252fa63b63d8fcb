use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("location out of range: lat {lat_deg}, lon {lon_deg}")]
    InvalidLocation { lat_deg: f64, lon_deg: f64 },

    #[error("invalid UTC instant: {0}")]
    InvalidInstant(String),

    #[error("no shadow geometry: sun elevation {elevation_deg:.2} deg is at or below the horizon")]
    SunBelowHorizon { elevation_deg: f64 },

    #[error("solar elevation {elevation_deg} deg outside the open interval (0, 90)")]
    ElevationOutOfRange { elevation_deg: f64 },

    #[error("ground sampling distance must be positive and finite (gsd_x = {gsd_x}, gsd_y = {gsd_y})")]
    InvalidGsd { gsd_x: f64, gsd_y: f64 },

    #[error("anisotropic ground sampling distance (gsd_x = {gsd_x}, gsd_y = {gsd_y}) is not supported for directional lengths")]
    AnisotropicGsd { gsd_x: f64, gsd_y: f64 },

    #[error("invalid label code {code} at pixel ({x}, {y}); expected 0, 1 or 2")]
    LabelCode { code: u8, x: usize, y: usize },

    #[error("raster buffer holds {actual} cells, expected {expected}")]
    RasterSize { expected: usize, actual: usize },

    #[error("dimension mismatch: prediction is {pred_w}x{pred_h}, ground truth is {gt_w}x{gt_h}")]
    DimensionMismatch { pred_w: usize, pred_h: usize, gt_w: usize, gt_h: usize },

    #[error("non-positive projection of shadow onto the anti-solar direction ({projection_px:.3} px); crown and shadow look mispaired")]
    NonPositiveProjection { projection_px: f64 },

    #[error("threshold {0} outside its valid range")]
    InvalidThreshold(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("could not place tree {placed} of {requested} after {attempts} attempts (crown density {density:.3} trees per 100 m2)")]
    PlacementInfeasible { placed: usize, requested: usize, attempts: usize, density: f64 },

    #[error("missing field `{0}`")]
    MissingField(&'static str),

    #[error("malformed metadata: {0}")]
    Metadata(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[cfg(feature = "io")]
    #[error("image: {0}")]
    Image(#[from] image::ImageError),

    #[cfg(feature = "io")]
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

use std::path::Path;

use anyhow::{bail, Context, Result};
use canopy_core::raster::Connectivity;
use canopy_core::tree_metrics::{OffsetTarget, PairingParams};
use canopy_core::{HeightMode, HeightModel, LabelClass, MeasureConfig, UtcInstant};
use clap::Args;
use serde::Deserialize;

/// Run settings, each optional. Used both as global flags and as the schema of
/// the `--config` JSON file; flags take precedence over the file.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    /// Site latitude in degrees (north positive)
    #[arg(long = "lat", global = true, allow_negative_numbers = true)]
    pub lat_deg: Option<f64>,
    /// Site longitude in degrees (east positive)
    #[arg(long = "lon", global = true, allow_negative_numbers = true)]
    pub lon_deg: Option<f64>,
    /// Acquisition instant, YYYY-MM-DDThh:mm:ssZ
    #[arg(long = "timestamp", global = true)]
    pub timestamp_utc: Option<UtcInstant>,
    /// Ground sampling distance along x, meters per pixel
    #[arg(long = "gsd-x", global = true)]
    pub gsd_x_m: Option<f64>,
    /// Ground sampling distance along y, meters per pixel
    #[arg(long = "gsd-y", global = true)]
    pub gsd_y_m: Option<f64>,
    /// Trunk offset subtracted from heights [default: 0.8]
    #[arg(long = "trunk-offset", global = true)]
    pub trunk_offset_m: Option<f64>,
    /// Shadow-length to height relation: paper or physical [default: paper]
    #[arg(long = "height-mode", global = true)]
    pub height_mode: Option<HeightMode>,
    /// Apply the trunk offset to the height or to the shadow length [default: height]
    #[arg(long = "offset-on", global = true)]
    pub offset_on: Option<OffsetTarget>,
    /// Biovolume form factor [default: 1.0]
    #[arg(long = "form-factor", global = true)]
    pub form_factor_k: Option<f64>,
    /// HSV value threshold for shadow candidates [default: 0.5]
    #[arg(long = "hsv-threshold", global = true)]
    pub hsv_threshold: Option<f64>,
    /// Pixel connectivity, 4 or 8 [default: 8]
    #[arg(long = "connectivity", global = true)]
    pub connectivity: Option<u8>,
    /// Smallest instance kept, in pixels [default: 16]
    #[arg(long = "min-area", global = true)]
    pub min_area_px: Option<usize>,
    /// Lateral pairing half-width in meters [default: 1.5 x crown radius]
    #[arg(long = "max-lateral", global = true)]
    pub max_lateral_m: Option<f64>,
    /// Largest crown-to-shadow gap in meters [default: 3.0]
    #[arg(long = "max-gap", global = true)]
    pub max_gap_m: Option<f64>,
    /// Classes averaged into mIoU [default: crown,shadow]
    #[arg(long = "miou-classes", global = true, value_delimiter = ',')]
    pub miou_class_set: Option<Vec<LabelClass>>,
}

impl Overrides {
    /// Fields set in `self` win over `base`.
    pub fn over(self, base: Overrides) -> Overrides {
        Overrides {
            lat_deg: self.lat_deg.or(base.lat_deg),
            lon_deg: self.lon_deg.or(base.lon_deg),
            timestamp_utc: self.timestamp_utc.or(base.timestamp_utc),
            gsd_x_m: self.gsd_x_m.or(base.gsd_x_m),
            gsd_y_m: self.gsd_y_m.or(base.gsd_y_m),
            trunk_offset_m: self.trunk_offset_m.or(base.trunk_offset_m),
            height_mode: self.height_mode.or(base.height_mode),
            offset_on: self.offset_on.or(base.offset_on),
            form_factor_k: self.form_factor_k.or(base.form_factor_k),
            hsv_threshold: self.hsv_threshold.or(base.hsv_threshold),
            connectivity: self.connectivity.or(base.connectivity),
            min_area_px: self.min_area_px.or(base.min_area_px),
            max_lateral_m: self.max_lateral_m.or(base.max_lateral_m),
            max_gap_m: self.max_gap_m.or(base.max_gap_m),
            miou_class_set: self.miou_class_set.or(base.miou_class_set),
        }
    }

    pub fn load(path: &Path) -> Result<Overrides> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Fully resolved settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub lat_deg: Option<f64>,
    pub lon_deg: Option<f64>,
    pub timestamp_utc: Option<UtcInstant>,
    pub gsd_x_m: Option<f64>,
    pub gsd_y_m: Option<f64>,
    pub trunk_offset_m: f64,
    pub height_mode: HeightMode,
    pub offset_on: OffsetTarget,
    pub form_factor_k: f64,
    pub hsv_threshold: f64,
    pub connectivity: Connectivity,
    pub min_area_px: usize,
    pub max_lateral_m: Option<f64>,
    pub max_gap_m: f64,
    pub miou_class_set: Vec<LabelClass>,
}

impl RunConfig {
    pub fn resolve(o: Overrides) -> Result<RunConfig> {
        let connectivity = match o.connectivity {
            None => Connectivity::Eight,
            Some(c) => Connectivity::try_from(c).map_err(|e| anyhow::anyhow!(e))?,
        };
        let cfg = RunConfig {
            lat_deg: o.lat_deg,
            lon_deg: o.lon_deg,
            timestamp_utc: o.timestamp_utc,
            gsd_x_m: o.gsd_x_m,
            gsd_y_m: o.gsd_y_m,
            trunk_offset_m: o.trunk_offset_m.unwrap_or(canopy_core::tree_metrics::DEFAULT_TRUNK_OFFSET_M),
            height_mode: o.height_mode.unwrap_or_default(),
            offset_on: o.offset_on.unwrap_or_default(),
            form_factor_k: o.form_factor_k.unwrap_or(1.0),
            hsv_threshold: o.hsv_threshold.unwrap_or(0.5),
            connectivity,
            min_area_px: o.min_area_px.unwrap_or(canopy_core::raster::DEFAULT_MIN_AREA_PX),
            max_lateral_m: o.max_lateral_m,
            max_gap_m: o.max_gap_m.unwrap_or(PairingParams::default().max_gap_m),
            miou_class_set: o.miou_class_set.unwrap_or_else(|| canopy_core::evaluation::FOREGROUND_CLASSES.to_vec()),
        };
        if let Some(l) = cfg.max_lateral_m.filter(|l| l.is_nan() || *l <= 0.0) {
            bail!("max lateral {l} must be > 0");
        }
        if cfg.max_gap_m.is_nan() || cfg.max_gap_m < 0.0 {
            bail!("max gap {} must be >= 0", cfg.max_gap_m);
        }
        Ok(cfg)
    }

    pub fn measure_config(&self) -> Result<MeasureConfig> {
        let height_model = HeightModel::new(self.height_mode, self.trunk_offset_m)?.with_offset_on(self.offset_on);
        Ok(MeasureConfig {
            height_model,
            form_factor: self.form_factor_k,
            connectivity: self.connectivity,
            min_area_px: self.min_area_px,
            pairing: PairingParams { max_lateral_m: self.max_lateral_m, max_gap_m: self.max_gap_m },
        })
    }
}

//! Browser bindings for the interactive demo page in `www/`.
//!
//! Results cross the boundary as JSON strings and byte buffers so the same
//! functions are testable natively.

use canopy_core::raster::{connected_components, shadow_candidates};
use canopy_core::solar::{shadow_direction_vector, solar_position};
use canopy_core::synth::{random_scene, render_scene};
use canopy_core::tree_metrics::{biovolume_m3, measure_with_sun, tree_height_m};
use canopy_core::{
    GeoLocation, HeightMode, HeightModel, LabelClass, LabelRaster, MeasureConfig, RgbRaster, SolarPosition, UtcInstant,
};
use serde_json::json;
use wasm_bindgen::prelude::*;

const EXTENT_M: (f64, f64) = (30.0, 30.0);
const GSD_M: f64 = 0.05;

fn parse_mode(mode: &str) -> Result<HeightMode, String> {
    mode.parse().map_err(|e: canopy_core::Error| e.to_string())
}

fn sun_at(timestamp: &str, lat_deg: f64, lon_deg: f64) -> Result<SolarPosition, String> {
    let t: UtcInstant = timestamp.parse().map_err(|e: canopy_core::Error| e.to_string())?;
    let loc = GeoLocation::new(lat_deg, lon_deg).map_err(|e| e.to_string())?;
    Ok(solar_position(&t, &loc))
}

/// Solar position and, when the sun is up, the unit shadow direction in image axes.
#[wasm_bindgen]
pub fn solar(timestamp: &str, lat_deg: f64, lon_deg: f64) -> Result<String, String> {
    let sp = sun_at(timestamp, lat_deg, lon_deg)?;
    let shadow = shadow_direction_vector(&sp).ok().map(|d| [d.x, d.y]);
    Ok(json!({
        "elevation_deg": sp.elevation_deg,
        "azimuth_deg": sp.azimuth_deg,
        "zenith_deg": sp.zenith_deg,
        "shadow_direction": shadow,
    })
    .to_string())
}

/// Height and biovolume for one tree.
#[wasm_bindgen]
pub fn tree_estimate(
    shadow_length_m: f64,
    elevation_deg: f64,
    crown_area_m2: f64,
    trunk_offset_m: f64,
    form_factor: f64,
    mode: &str,
) -> Result<String, String> {
    let hm = HeightModel::new(parse_mode(mode)?, trunk_offset_m).map_err(|e| e.to_string())?;
    let sp = SolarPosition::from_elevation_azimuth(elevation_deg, 180.0);
    let h = tree_height_m(shadow_length_m, &sp, &hm).map_err(|e| e.to_string())?;
    Ok(json!({ "height_m": h, "biovolume_m3": biovolume_m3(crown_area_m2, h, form_factor) }).to_string())
}

/// A rendered synthetic scene with its measured inventory.
#[wasm_bindgen]
pub struct DemoScene {
    width: usize,
    height: usize,
    photo: Vec<u8>,
    labels: Vec<u8>,
    shadow_mask: Vec<u8>,
    report: String,
}

#[wasm_bindgen]
impl DemoScene {
    #[wasm_bindgen(getter)]
    pub fn width(&self) -> usize {
        self.width
    }

    #[wasm_bindgen(getter)]
    pub fn height(&self) -> usize {
        self.height
    }

    /// RGBA pixels of the synthetic photo.
    pub fn photo_rgba(&self) -> Vec<u8> {
        self.photo.clone()
    }

    /// RGBA pixels of the label raster in false colour.
    pub fn labels_rgba(&self) -> Vec<u8> {
        self.labels.clone()
    }

    /// RGBA pixels of the HSV shadow candidates recovered from the photo.
    pub fn shadow_mask_rgba(&self) -> Vec<u8> {
        self.shadow_mask.clone()
    }

    /// JSON: sun, per-tree measurements next to the generating truth, warnings.
    pub fn report(&self) -> String {
        self.report.clone()
    }
}

fn photo_rgba(img: &RgbRaster) -> Vec<u8> {
    img.pixels().iter().flat_map(|&[r, g, b]| [r, g, b, 255]).collect()
}

fn labels_rgba(r: &LabelRaster) -> Vec<u8> {
    r.labels()
        .iter()
        .flat_map(|c| match c {
            LabelClass::Background => [235, 230, 220, 255],
            LabelClass::Crown => [46, 139, 87, 255],
            LabelClass::Shadow => [70, 70, 110, 255],
        })
        .collect()
}

/// Renders a random orchard under the sun at `timestamp`, then measures it back.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    timestamp: &str,
    lat_deg: f64,
    lon_deg: f64,
    n_trees: usize,
    seed: u32,
    trunk_offset_m: f64,
    form_factor: f64,
    mode: &str,
) -> Result<DemoScene, String> {
    let mode = parse_mode(mode)?;
    let sun = sun_at(timestamp, lat_deg, lon_deg)?;
    let scene = random_scene(n_trees, EXTENT_M, GSD_M, sun, seed as u64, mode).map_err(|e| e.to_string())?;
    let (labels, photo) = render_scene(&scene);
    let gt = scene.geo_transform();
    let cfg = MeasureConfig {
        height_model: HeightModel::new(mode, trunk_offset_m).map_err(|e| e.to_string())?,
        form_factor,
        ..MeasureConfig::default()
    };
    let m = measure_with_sun(&labels, &gt, &sun, &cfg).map_err(|e| e.to_string())?;
    let crowns = connected_components(&labels, LabelClass::Crown, cfg.connectivity, cfg.min_area_px);
    let trees: Vec<_> = m
        .records
        .iter()
        .zip(&crowns)
        .map(|(rec, crown)| {
            let truth = scene.tree_at(crown.centroid.0 * gt.gsd_x(), crown.centroid.1 * gt.gsd_y());
            json!({
                "tree_id": rec.tree_id,
                "crown_area_m2": rec.crown_area_m2,
                "shadow_length_m": rec.shadow_length_m,
                "height_m": rec.height_m,
                "biovolume_m3": rec.biovolume_m3,
                "true_height_m": truth.map(|i| scene.trees()[i].height_m),
                "centroid_px": [crown.centroid.0, crown.centroid.1],
            })
        })
        .collect();
    let mask = shadow_candidates(&photo, 0.5).map_err(|e| e.to_string())?;
    let shadow_mask =
        mask.bits().iter().flat_map(|&b| if b { [20, 20, 20, 255] } else { [250, 250, 250, 255] }).collect();
    let report = json!({
        "sun": { "elevation_deg": sun.elevation_deg, "azimuth_deg": sun.azimuth_deg },
        "gsd_m": GSD_M,
        "trees": trees,
        "warnings": m.warnings,
    })
    .to_string();
    Ok(DemoScene {
        width: labels.width(),
        height: labels.height(),
        photo: photo_rgba(&photo),
        labels: labels_rgba(&labels),
        shadow_mask,
        report,
    })
}

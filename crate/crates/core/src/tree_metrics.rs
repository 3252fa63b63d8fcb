//! Crown/shadow pairing, shadow length, shadow-derived height and biovolume.
//!
//! Heights follow `H = L / tan(elevation) - offset` by default ([`HeightMode::Paper`]),
//! which is the relation the reference inventory was computed with. The textbook
//! shadow relation `H = L * tan(elevation)` is available as [`HeightMode::Physical`].
//! The trunk offset is subtracted from the height unless [`OffsetTarget::Length`]
//! is selected, in which case it is taken off the shadow length first.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{
    connected_components, crown_area_m2, Connectivity, GeoTransform, InstanceMask, LabelClass, LabelRaster,
};
use crate::solar::{shadow_direction_vector, solar_position, Direction2, GeoLocation, SolarPosition, UtcInstant};

pub const DEFAULT_TRUNK_OFFSET_M: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeightMode {
    /// `H = L / tan(elevation)`, i.e. `L * tan(zenith)`.
    #[default]
    Paper,
    /// `H = L * tan(elevation)`.
    Physical,
}

impl HeightMode {
    /// Multiplier turning a shadow length into a height.
    pub fn length_to_height(self, sp: &SolarPosition) -> f64 {
        let tan_elev = sp.elevation_deg.to_radians().tan();
        match self {
            HeightMode::Paper => 1.0 / tan_elev,
            HeightMode::Physical => tan_elev,
        }
    }
}

impl std::str::FromStr for HeightMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Self::Paper),
            "physical" => Ok(Self::Physical),
            other => Err(Error::InvalidParameter(format!("unknown height mode `{other}` (paper|physical)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OffsetTarget {
    #[default]
    Height,
    Length,
}

impl std::str::FromStr for OffsetTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "height" => Ok(Self::Height),
            "length" => Ok(Self::Length),
            other => Err(Error::InvalidParameter(format!("unknown offset target `{other}` (height|length)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeightModel {
    pub mode: HeightMode,
    pub trunk_offset_m: f64,
    pub offset_on: OffsetTarget,
}

impl Default for HeightModel {
    fn default() -> Self {
        Self { mode: HeightMode::Paper, trunk_offset_m: DEFAULT_TRUNK_OFFSET_M, offset_on: OffsetTarget::Height }
    }
}

impl HeightModel {
    pub fn new(mode: HeightMode, trunk_offset_m: f64) -> Result<Self> {
        if !(trunk_offset_m >= 0.0 && trunk_offset_m.is_finite()) {
            return Err(Error::InvalidParameter(format!("trunk offset {trunk_offset_m} must be >= 0")));
        }
        Ok(Self { mode, trunk_offset_m, offset_on: OffsetTarget::Height })
    }

    pub fn with_offset_on(mut self, target: OffsetTarget) -> Self {
        self.offset_on = target;
        self
    }
}

/// Tree height from shadow length, clamped at zero.
pub fn tree_height_m(shadow_length_m: f64, sp: &SolarPosition, hm: &HeightModel) -> Result<f64> {
    if !(sp.elevation_deg > 0.0 && sp.elevation_deg < 90.0) {
        return Err(Error::ElevationOutOfRange { elevation_deg: sp.elevation_deg });
    }
    if !(shadow_length_m >= 0.0) {
        return Err(Error::InvalidParameter(format!("shadow length {shadow_length_m} must be >= 0")));
    }
    let k = hm.mode.length_to_height(sp);
    let h = match hm.offset_on {
        OffsetTarget::Height => shadow_length_m * k - hm.trunk_offset_m,
        OffsetTarget::Length => (shadow_length_m - hm.trunk_offset_m).max(0.0) * k,
    };
    Ok(h.max(0.0))
}

/// `V = k * A_c * H_t`.
pub fn biovolume_m3(crown_area_m2: f64, height_m: f64, form_factor: f64) -> f64 {
    form_factor * crown_area_m2 * height_m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairingParams {
    /// Lateral search half-width; `None` means 1.5 x the crown's equivalent radius.
    pub max_lateral_m: Option<f64>,
    pub max_gap_m: f64,
}

impl Default for PairingParams {
    fn default() -> Self {
        Self { max_lateral_m: None, max_gap_m: 3.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreePairing {
    pub crown_id: u32,
    pub shadow_id: Option<u32>,
    pub axial_gap_m: Option<f64>,
}

/// Offset of a pixel center from a point, in meters.
fn metric_offset(p: (usize, usize), from: (f64, f64), gt: &GeoTransform) -> (f64, f64) {
    ((p.0 as f64 + 0.5 - from.0) * gt.gsd_x(), (p.1 as f64 + 0.5 - from.1) * gt.gsd_y())
}

/// Distance in meters from a point to the nearest edge of an instance's pixel bounds.
fn bbox_distance_m(inst: &InstanceMask, from: (f64, f64), gt: &GeoTransform) -> f64 {
    let gap = |lo: usize, hi: usize, v: f64| (lo as f64 - v).max(v - (hi as f64 + 1.0)).max(0.0);
    let dx = gap(inst.bbox.min_x, inst.bbox.max_x, from.0) * gt.gsd_x();
    let dy = gap(inst.bbox.min_y, inst.bbox.max_y, from.1) * gt.gsd_y();
    dx.hypot(dy)
}

/// Axial gap from `crown`'s centroid to the nearest eligible pixel of `shadow`, if any.
fn axial_gap_m(
    crown: &InstanceMask,
    shadow: &InstanceMask,
    d: &Direction2,
    gt: &GeoTransform,
    max_lateral_m: f64,
) -> Option<f64> {
    shadow
        .pixels
        .iter()
        .filter_map(|&p| {
            let (vx, vy) = metric_offset(p, crown.centroid, gt);
            let along = d.dot(vx, vy);
            (along > 0.0 && d.cross(vx, vy).abs() <= max_lateral_m).then_some(along)
        })
        .min_by(f64::total_cmp)
}

/// Globally greedy crown/shadow assignment by ascending axial gap.
///
/// Returns one pairing per crown, in the order of `crowns`.
pub fn pair_crowns_shadows(
    crowns: &[InstanceMask],
    shadows: &[InstanceMask],
    d: &Direction2,
    gt: &GeoTransform,
    params: &PairingParams,
) -> Vec<TreePairing> {
    let mut candidates = Vec::new();
    for (ci, crown) in crowns.iter().enumerate() {
        let max_lateral_m = params.max_lateral_m.unwrap_or_else(|| 1.5 * crown.equivalent_radius_m(gt));
        let reach = params.max_gap_m.hypot(max_lateral_m);
        for (si, shadow) in shadows.iter().enumerate() {
            if bbox_distance_m(shadow, crown.centroid, gt) > reach {
                continue;
            }
            if let Some(gap) = axial_gap_m(crown, shadow, d, gt, max_lateral_m) {
                if gap <= params.max_gap_m {
                    candidates.push((gap, ci, si));
                }
            }
        }
    }
    candidates.sort_by(|a, b| {
        a.0.total_cmp(&b.0).then(crowns[a.1].id.cmp(&crowns[b.1].id)).then(shadows[a.2].id.cmp(&shadows[b.2].id))
    });

    let mut pairings: Vec<TreePairing> =
        crowns.iter().map(|c| TreePairing { crown_id: c.id, shadow_id: None, axial_gap_m: None }).collect();
    let mut shadow_taken = vec![false; shadows.len()];
    for (gap, ci, si) in candidates {
        if pairings[ci].shadow_id.is_some() || shadow_taken[si] {
            continue;
        }
        pairings[ci].shadow_id = Some(shadows[si].id);
        pairings[ci].axial_gap_m = Some(gap);
        shadow_taken[si] = true;
    }
    pairings
}

/// Distance from the crown centroid to the farthest shadow pixel center along `d`.
pub fn shadow_length_m(crown: &InstanceMask, shadow: &InstanceMask, d: &Direction2, gt: &GeoTransform) -> Result<f64> {
    let gsd = gt.isotropic_gsd()?;
    let (cx, cy) = crown.centroid;
    let max_proj = shadow
        .pixels
        .iter()
        .map(|&(x, y)| d.dot(x as f64 + 0.5 - cx, y as f64 + 0.5 - cy))
        .fold(f64::NEG_INFINITY, f64::max);
    if !(max_proj > 0.0) {
        return Err(Error::NonPositiveProjection { projection_px: max_proj });
    }
    Ok(max_proj * gsd)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeRecord {
    pub tree_id: u32,
    pub crown_area_m2: f64,
    pub shadow_length_m: Option<f64>,
    pub height_m: Option<f64>,
    pub biovolume_m3: Option<f64>,
}

impl TreeRecord {
    /// Record for a crown with a measured shadow.
    pub fn measured(
        tree_id: u32,
        crown_area_m2: f64,
        shadow_length_m: f64,
        sp: &SolarPosition,
        hm: &HeightModel,
        form_factor: f64,
    ) -> Result<Self> {
        let height = tree_height_m(shadow_length_m, sp, hm)?;
        Ok(Self {
            tree_id,
            crown_area_m2,
            shadow_length_m: Some(shadow_length_m),
            height_m: Some(height),
            biovolume_m3: Some(biovolume_m3(crown_area_m2, height, form_factor)),
        })
    }

    pub fn crown_only(tree_id: u32, crown_area_m2: f64) -> Self {
        Self { tree_id, crown_area_m2, shadow_length_m: None, height_m: None, biovolume_m3: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureConfig {
    pub height_model: HeightModel,
    pub form_factor: f64,
    pub connectivity: Connectivity,
    pub min_area_px: usize,
    pub pairing: PairingParams,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        Self {
            height_model: HeightModel::default(),
            form_factor: 1.0,
            connectivity: Connectivity::Eight,
            min_area_px: crate::raster::DEFAULT_MIN_AREA_PX,
            pairing: PairingParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneMeasurement {
    pub sun: SolarPosition,
    pub records: Vec<TreeRecord>,
    pub pairings: Vec<TreePairing>,
    pub warnings: Vec<String>,
}

/// Full pipeline at a known solar position.
pub fn measure_with_sun(
    r: &LabelRaster,
    gt: &GeoTransform,
    sun: &SolarPosition,
    cfg: &MeasureConfig,
) -> Result<SceneMeasurement> {
    if !(cfg.form_factor > 0.0) {
        return Err(Error::InvalidParameter(format!("form factor {} must be > 0", cfg.form_factor)));
    }
    let d = shadow_direction_vector(sun)?;
    let crowns = connected_components(r, LabelClass::Crown, cfg.connectivity, cfg.min_area_px);
    let shadows = connected_components(r, LabelClass::Shadow, cfg.connectivity, cfg.min_area_px);
    let pairings = pair_crowns_shadows(&crowns, &shadows, &d, gt, &cfg.pairing);

    let mut records = Vec::with_capacity(crowns.len());
    let mut warnings = Vec::new();
    for (crown, pairing) in crowns.iter().zip(&pairings) {
        let area = crown_area_m2(crown, gt);
        let Some(sid) = pairing.shadow_id else {
            warnings.push(format!("tree {}: no shadow matched", crown.id));
            records.push(TreeRecord::crown_only(crown.id, area));
            continue;
        };
        let shadow = &shadows[sid as usize - 1];
        let record = shadow_length_m(crown, shadow, &d, gt)
            .and_then(|len| TreeRecord::measured(crown.id, area, len, sun, &cfg.height_model, cfg.form_factor));
        match record {
            Ok(rec) => records.push(rec),
            Err(e @ Error::AnisotropicGsd { .. }) => return Err(e),
            Err(e) => {
                warnings.push(format!("tree {}: {e}", crown.id));
                records.push(TreeRecord::crown_only(crown.id, area));
            }
        }
    }
    Ok(SceneMeasurement { sun: *sun, records, pairings, warnings })
}

/// Full pipeline with the sun computed from acquisition time and place.
pub fn measure_scene(
    r: &LabelRaster,
    gt: &GeoTransform,
    t: &UtcInstant,
    loc: &GeoLocation,
    cfg: &MeasureConfig,
) -> Result<SceneMeasurement> {
    let sun = solar_position(t, loc);
    if !sun.is_above_horizon() {
        return Err(Error::SunBelowHorizon { elevation_deg: sun.elevation_deg });
    }
    measure_with_sun(r, gt, &sun, cfg)
}

pub const CSV_HEADER: &str = "tree_id,crown_area_m2,shadow_length_m,height_m,biovolume_m3";

/// CSV inventory with 3-decimal quantities and empty cells for missing values.
pub fn records_to_csv(records: &[TreeRecord]) -> String {
    let cell = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_default();
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{:.3},{},{},{}\n",
            r.tree_id,
            r.crown_area_m2,
            cell(r.shadow_length_m),
            cell(r.height_m),
            cell(r.biovolume_m3)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sun(elev: f64) -> SolarPosition {
        SolarPosition::from_elevation_azimuth(elev, 180.0)
    }

    fn block(id: u32, class: LabelClass, x0: usize, y0: usize, w: usize, h: usize) -> InstanceMask {
        let px = (y0..y0 + h).flat_map(|y| (x0..x0 + w).map(move |x| (x, y))).collect();
        InstanceMask::from_pixels(id, class, px).unwrap()
    }

    #[test]
    fn paper_mode_heights() {
        let hm = HeightModel::default();
        assert_abs_diff_eq!(tree_height_m(2.326, &sun(41.0), &hm).unwrap(), 1.874, epsilon = 0.01);
        assert_abs_diff_eq!(tree_height_m(3.382, &sun(41.0), &hm).unwrap(), 3.088, epsilon = 0.01);
        assert_abs_diff_eq!(
            tree_height_m(2.326, &sun(41.0), &hm).unwrap(),
            2.326 / 41f64.to_radians().tan() - 0.8,
            epsilon = 1e-12
        );
        assert_eq!(tree_height_m(0.5, &sun(41.0), &hm).unwrap(), 0.0);
    }

    #[test]
    fn physical_mode_and_length_offset() {
        let hm = HeightModel::new(HeightMode::Physical, 0.0).unwrap();
        assert_abs_diff_eq!(tree_height_m(2.0, &sun(45.0), &hm).unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(tree_height_m(2.0, &sun(60.0), &hm).unwrap(), 2.0 * 3f64.sqrt(), epsilon = 1e-12);

        let on_len = HeightModel::default().with_offset_on(OffsetTarget::Length);
        assert_abs_diff_eq!(
            tree_height_m(2.326, &sun(41.0), &on_len).unwrap(),
            (2.326 - 0.8) / 41f64.to_radians().tan(),
            epsilon = 1e-12
        );
        assert_eq!(tree_height_m(0.5, &sun(41.0), &on_len).unwrap(), 0.0);
    }

    #[test]
    fn height_rejects_bad_elevation() {
        let hm = HeightModel::default();
        assert!(tree_height_m(1.0, &sun(0.0), &hm).is_err());
        assert!(tree_height_m(1.0, &sun(90.0), &hm).is_err());
        assert!(tree_height_m(1.0, &sun(-3.0), &hm).is_err());
        assert!(HeightModel::new(HeightMode::Paper, -0.1).is_err());
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn biovolume_examples() {
        // Inputs are the printed (rounded) inventory values, so agreement is to ~1e-3.
        assert_abs_diff_eq!(biovolume_m3(2.326, 1.874, 1.0), 4.359, epsilon = 5e-4);
        assert_abs_diff_eq!(biovolume_m3(2.326, 1.874, 1.0), 4.360, epsilon = 2e-3);
        assert_abs_diff_eq!(biovolume_m3(7.754, 3.140, 1.0), 24.348, epsilon = 5e-4);
        assert_abs_diff_eq!(biovolume_m3(7.754, 3.140, 1.0), 24.349, epsilon = 2e-3);
        assert_abs_diff_eq!(biovolume_m3(2.0, 3.0, 0.5), 3.0, epsilon = 1e-15);
        assert_eq!(biovolume_m3(0.0, 12.0, 1.0), 0.0);
    }

    #[test]
    fn shadow_length_examples() {
        let gt = GeoTransform::square(0.0055).unwrap();
        let d = Direction2::new(1.0, 0.0).unwrap();
        let crown = block(1, LabelClass::Crown, 0, 0, 1, 1);
        let shadow = block(1, LabelClass::Shadow, 400, 0, 24, 1);
        assert_abs_diff_eq!(shadow_length_m(&crown, &shadow, &d, &gt).unwrap(), 2.3265, epsilon = 1e-12);

        let moved = block(1, LabelClass::Shadow, 410, 0, 24, 1);
        let delta =
            shadow_length_m(&crown, &moved, &d, &gt).unwrap() - shadow_length_m(&crown, &shadow, &d, &gt).unwrap();
        assert_abs_diff_eq!(delta, 10.0 * 0.0055, epsilon = 1e-12);

        let err = shadow_length_m(&crown, &shadow, &d.reversed(), &gt).unwrap_err();
        assert!(err.to_string().contains("non-positive projection"));

        let aniso = GeoTransform::new(0.005, 0.006).unwrap();
        assert!(matches!(shadow_length_m(&crown, &shadow, &d, &aniso), Err(Error::AnisotropicGsd { .. })));
    }

    #[test]
    fn pairing_single_candidate() {
        let gt = GeoTransform::square(0.01).unwrap();
        let d = Direction2::new(0.0, -1.0).unwrap();
        // Crown rows 50..60, centroid y = 55; shadow ends at row 44, nearest center at 44.5 -> gap 0.105 m.
        let crown = block(1, LabelClass::Crown, 20, 50, 10, 10);
        let shadow = block(1, LabelClass::Shadow, 20, 20, 10, 25);
        let p = pair_crowns_shadows(
            std::slice::from_ref(&crown),
            std::slice::from_ref(&shadow),
            &d,
            &gt,
            &PairingParams::default(),
        );
        assert_eq!(p[0].shadow_id, Some(1));
        assert_abs_diff_eq!(p[0].axial_gap_m.unwrap(), 0.105, epsilon = 1e-12);

        let sunward = pair_crowns_shadows(&[crown], &[shadow], &d.reversed(), &gt, &PairingParams::default());
        assert_eq!(sunward[0].shadow_id, None);
    }

    #[test]
    fn pairing_greedy_prefers_smaller_gap() {
        // 64x64 raster at 1 cm: a shared shadow north of two crowns. Crown A's
        // centroid is 20 px (0.2 m) from the nearest shadow row, crown B's 50 px (0.5 m).
        let gt = GeoTransform::square(0.01).unwrap();
        let d = Direction2::new(0.0, -1.0).unwrap();
        let shadow = block(1, LabelClass::Shadow, 10, 0, 20, 10);
        // Shadow rows 0..10: nearest center y = 9.5. A centroid y = 29.5, B centroid y = 59.5.
        let a = block(1, LabelClass::Crown, 10, 29, 10, 1);
        let b = block(2, LabelClass::Crown, 20, 59, 10, 1);
        let params = PairingParams { max_lateral_m: Some(1.0), max_gap_m: 3.0 };
        let p = pair_crowns_shadows(&[a, b], &[shadow], &d, &gt, &params);
        assert_eq!(p[0].shadow_id, Some(1));
        assert_abs_diff_eq!(p[0].axial_gap_m.unwrap(), 0.2, epsilon = 1e-12);
        assert_eq!(p[1].shadow_id, None);
    }

    #[test]
    fn pairing_respects_bounds() {
        let gt = GeoTransform::square(0.01).unwrap();
        let d = Direction2::new(0.0, -1.0).unwrap();
        let crown = block(1, LabelClass::Crown, 0, 500, 10, 10);
        let far = block(1, LabelClass::Shadow, 0, 0, 10, 10);
        let p = pair_crowns_shadows(std::slice::from_ref(&crown), &[far], &d, &gt, &PairingParams::default());
        assert_eq!(p[0].shadow_id, None);

        let beside = block(1, LabelClass::Shadow, 300, 400, 10, 10);
        let p = pair_crowns_shadows(&[crown], &[beside], &d, &gt, &PairingParams::default());
        assert_eq!(p[0].shadow_id, None);
    }

    fn tree_raster() -> LabelRaster {
        // Crown block 10x10 at (20, 40); shadow 10 wide running north 30 px.
        let mut r = LabelRaster::new(64, 64);
        for y in 40..50 {
            for x in 20..30 {
                r.set(x, y, LabelClass::Crown);
            }
        }
        for y in 10..40 {
            for x in 20..30 {
                r.set(x, y, LabelClass::Shadow);
            }
        }
        r
    }

    #[test]
    fn measure_single_tree() {
        let gt = GeoTransform::square(0.1).unwrap();
        let sp = SolarPosition::from_elevation_azimuth(45.0, 180.0);
        let cfg =
            MeasureConfig { height_model: HeightModel::new(HeightMode::Paper, 0.0).unwrap(), ..Default::default() };
        let m = measure_with_sun(&tree_raster(), &gt, &sp, &cfg).unwrap();
        assert_eq!(m.records.len(), 1);
        let rec = m.records[0];
        assert_abs_diff_eq!(rec.crown_area_m2, 1.0, epsilon = 1e-12);
        // Centroid y = 45, farthest shadow center y = 10.5 -> 34.5 px.
        assert_abs_diff_eq!(rec.shadow_length_m.unwrap(), 3.45, epsilon = 1e-12);
        assert_abs_diff_eq!(rec.height_m.unwrap(), 3.45, epsilon = 1e-12);
        assert_abs_diff_eq!(rec.biovolume_m3.unwrap(), 3.45, epsilon = 1e-12);
        assert!(m.warnings.is_empty());
    }

    #[test]
    fn measure_degrades_to_partial_records() {
        let gt = GeoTransform::square(0.1).unwrap();
        let mut r = tree_raster();
        for y in 10..40 {
            for x in 20..30 {
                r.set(x, y, LabelClass::Background);
            }
        }
        let sp = SolarPosition::from_elevation_azimuth(45.0, 180.0);
        let m = measure_with_sun(&r, &gt, &sp, &MeasureConfig::default()).unwrap();
        assert_eq!(m.records[0].height_m, None);
        assert_eq!(m.records[0].biovolume_m3, None);
        assert_eq!(m.warnings.len(), 1);

        let below = SolarPosition::from_elevation_azimuth(-1.0, 180.0);
        assert!(matches!(
            measure_with_sun(&r, &gt, &below, &MeasureConfig::default()),
            Err(Error::SunBelowHorizon { .. })
        ));
    }

    #[test]
    fn measure_empty_raster() {
        let gt = GeoTransform::square(0.1).unwrap();
        let sp = SolarPosition::from_elevation_azimuth(45.0, 180.0);
        let m = measure_with_sun(&LabelRaster::new(10, 10), &gt, &sp, &MeasureConfig::default()).unwrap();
        assert!(m.records.is_empty());
        assert_eq!(records_to_csv(&m.records), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn measure_is_translation_invariant() {
        let gt = GeoTransform::square(0.1).unwrap();
        let sp = SolarPosition::from_elevation_azimuth(45.0, 180.0);
        let base = tree_raster();
        let mut shifted = LabelRaster::new(80, 80);
        for y in 0..64 {
            for x in 0..64 {
                shifted.set(x + 13, y + 7, base.get(x, y));
            }
        }
        let a = measure_with_sun(&base, &gt, &sp, &MeasureConfig::default()).unwrap();
        let b = measure_with_sun(&shifted, &gt, &sp, &MeasureConfig::default()).unwrap();
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn csv_format() {
        let recs = [
            TreeRecord {
                tree_id: 1,
                crown_area_m2: 2.3261,
                shadow_length_m: Some(2.326),
                height_m: Some(1.87449),
                biovolume_m3: Some(4.36),
            },
            TreeRecord::crown_only(2, 1.0),
        ];
        assert_eq!(
            records_to_csv(&recs),
            "tree_id,crown_area_m2,shadow_length_m,height_m,biovolume_m3\n1,2.326,2.326,1.874,4.360\n2,1.000,,,\n"
        );
    }

    proptest! {
        #[test]
        fn height_scales_with_length(l in 0.0f64..20.0, elev in 1.0f64..89.0, physical in any::<bool>()) {
            let mode = if physical { HeightMode::Physical } else { HeightMode::Paper };
            let hm = HeightModel::new(mode, 0.0).unwrap();
            let sp = sun(elev);
            let h1 = tree_height_m(l, &sp, &hm).unwrap();
            let h2 = tree_height_m(2.0 * l, &sp, &hm).unwrap();
            prop_assert!((h2 - 2.0 * h1).abs() <= 1e-12 * h2.max(1.0));
        }

        #[test]
        fn paper_mode_inverts(l in 0.0f64..20.0, elev in 1.0f64..89.0) {
            let hm = HeightModel::new(HeightMode::Paper, 0.0).unwrap();
            let h = tree_height_m(l, &sun(elev), &hm).unwrap();
            prop_assert!((h * elev.to_radians().tan() - l).abs() <= 1e-12 * l.max(1.0));
        }

        #[test]
        fn biovolume_bilinear(a in 0.0f64..50.0, h in 0.0f64..10.0, k in 0.1f64..2.0, s in 0.0f64..3.0) {
            let v = biovolume_m3(a, h, k);
            prop_assert!((biovolume_m3(s * a, h, k) - s * v).abs() <= 1e-12 * v.max(1.0) * s.max(1.0));
            prop_assert!((biovolume_m3(a, s * h, k) - s * v).abs() <= 1e-12 * v.max(1.0) * s.max(1.0));
            prop_assert!((biovolume_m3(a, h, s * k) - s * v).abs() <= 1e-12 * v.max(1.0) * s.max(1.0));
        }

        #[test]
        fn larger_crown_never_smaller_volume(n in 1usize..400, extra in 0usize..400, h in 0.0f64..5.0) {
            let gt = GeoTransform::square(0.05).unwrap();
            let small = InstanceMask::from_pixels(1, LabelClass::Crown, (0..n).map(|i| (i, 0)).collect()).unwrap();
            let big = InstanceMask::from_pixels(1, LabelClass::Crown, (0..n + extra).map(|i| (i, 0)).collect()).unwrap();
            let (a0, a1) = (crown_area_m2(&small, &gt), crown_area_m2(&big, &gt));
            prop_assert!(a1 >= a0);
            prop_assert!(biovolume_m3(a1, h, 1.0) >= biovolume_m3(a0, h, 1.0));
        }
    }
}

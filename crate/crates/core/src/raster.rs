//! Label and RGB rasters, connected-component instance extraction, crown
//! projected area and HSV value-channel shadow candidates.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pixel footprint on the ground, meters per pixel along each raster axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoTransform {
    gsd_x: f64,
    gsd_y: f64,
}

impl GeoTransform {
    pub fn new(gsd_x: f64, gsd_y: f64) -> Result<Self> {
        if !(gsd_x.is_finite() && gsd_y.is_finite() && gsd_x > 0.0 && gsd_y > 0.0) {
            return Err(Error::InvalidGsd { gsd_x, gsd_y });
        }
        Ok(Self { gsd_x, gsd_y })
    }

    pub fn square(gsd: f64) -> Result<Self> {
        Self::new(gsd, gsd)
    }

    pub fn gsd_x(&self) -> f64 {
        self.gsd_x
    }

    pub fn gsd_y(&self) -> f64 {
        self.gsd_y
    }

    pub fn pixel_area_m2(&self) -> f64 {
        self.gsd_x * self.gsd_y
    }

    /// The common GSD when both axes agree, otherwise an error.
    pub fn isotropic_gsd(&self) -> Result<f64> {
        if (self.gsd_x - self.gsd_y).abs() > 1e-12 * self.gsd_x.max(self.gsd_y) {
            return Err(Error::AnisotropicGsd { gsd_x: self.gsd_x, gsd_y: self.gsd_y });
        }
        Ok(self.gsd_x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum LabelClass {
    Background = 0,
    Crown = 1,
    Shadow = 2,
}

impl LabelClass {
    pub const ALL: [LabelClass; 3] = [LabelClass::Background, LabelClass::Crown, LabelClass::Shadow];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Self::Background),
            1 => Some(Self::Crown),
            2 => Some(Self::Shadow),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Background => "background",
            Self::Crown => "crown",
            Self::Shadow => "shadow",
        }
    }
}

impl std::str::FromStr for LabelClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "background" => Ok(Self::Background),
            "crown" => Ok(Self::Crown),
            "shadow" => Ok(Self::Shadow),
            other => Err(Error::InvalidParameter(format!("unknown class `{other}`"))),
        }
    }
}

/// Per-pixel class grid, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRaster {
    width: usize,
    height: usize,
    labels: Vec<LabelClass>,
}

impl LabelRaster {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, LabelClass::Background)
    }

    pub fn filled(width: usize, height: usize, class: LabelClass) -> Self {
        Self { width, height, labels: vec![class; width * height] }
    }

    /// Validates raw class codes; the first code outside {0, 1, 2} is reported with its pixel.
    pub fn from_codes(width: usize, height: usize, codes: &[u8]) -> Result<Self> {
        if codes.len() != width * height {
            return Err(Error::RasterSize { expected: width * height, actual: codes.len() });
        }
        let labels = codes
            .iter()
            .enumerate()
            .map(|(i, &code)| {
                LabelClass::from_code(code).ok_or(Error::LabelCode { code, x: i % width.max(1), y: i / width.max(1) })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { width, height, labels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[LabelClass] {
        &self.labels
    }

    pub fn codes(&self) -> Vec<u8> {
        self.labels.iter().map(|c| c.code()).collect()
    }

    pub fn get(&self, x: usize, y: usize) -> LabelClass {
        self.labels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, class: LabelClass) {
        self.labels[y * self.width + x] = class;
    }

    pub fn count(&self, class: LabelClass) -> usize {
        self.labels.iter().filter(|&&c| c == class).count()
    }

    pub fn same_shape(&self, other: &LabelRaster) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// 8-bit RGB raster, row-major, interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbRaster {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RgbRaster {
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        Self { width, height, pixels: vec![rgb; width * height] }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::RasterSize { expected: width * height, actual: pixels.len() });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        self.pixels[y * self.width + x] = rgb;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Mask of the pixels of one class in a label raster.
    pub fn of_class(r: &LabelRaster, class: LabelClass) -> Self {
        Self { width: r.width, height: r.height, bits: r.labels.iter().map(|&c| c == class).collect() }
    }
}

/// HSV value channel, V = max(R, G, B) / 255.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueChannel {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ValueChannel {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

pub fn hsv_value(rgb: [u8; 3]) -> f64 {
    rgb.into_iter().max().unwrap_or(0) as f64 / 255.0
}

pub fn hsv_value_channel(img: &RgbRaster) -> ValueChannel {
    ValueChannel { width: img.width, height: img.height, values: img.pixels.iter().map(|&p| hsv_value(p)).collect() }
}

/// Marks pixels whose value channel is strictly below `threshold`.
pub fn shadow_candidates(img: &RgbRaster, threshold: f64) -> Result<BinaryMask> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidThreshold(threshold));
    }
    Ok(BinaryMask {
        width: img.width,
        height: img.height,
        bits: img.pixels.iter().map(|&p| hsv_value(p) < threshold).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(0, -1), (-1, 0), (1, 0), (0, 1)],
            Connectivity::Eight => &[(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)],
        }
    }
}

impl TryFrom<u8> for Connectivity {
    type Error = Error;

    fn try_from(n: u8) -> Result<Self> {
        match n {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            other => Err(Error::InvalidParameter(format!("connectivity must be 4 or 8, got {other}"))),
        }
    }
}

pub const DEFAULT_MIN_AREA_PX: usize = 16;

/// Inclusive pixel bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub min_x: usize,
    pub min_y: usize,
    pub max_x: usize,
    pub max_y: usize,
}

/// One connected object of a single class.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceMask {
    pub id: u32,
    pub class: LabelClass,
    /// Pixel coordinates in raster scan order.
    pub pixels: Vec<(usize, usize)>,
    /// Mean pixel-center coordinate, (x + 0.5, y + 0.5) convention.
    pub centroid: (f64, f64),
    pub bbox: BBox,
}

impl InstanceMask {
    /// Builds an instance from an arbitrary pixel set (sorted and deduplicated here).
    pub fn from_pixels(id: u32, class: LabelClass, mut pixels: Vec<(usize, usize)>) -> Result<Self> {
        if pixels.is_empty() {
            return Err(Error::InvalidParameter("instance without pixels".into()));
        }
        pixels.sort_unstable_by_key(|&(x, y)| (y, x));
        pixels.dedup();
        let n = pixels.len() as f64;
        let (sx, sy) = pixels.iter().fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x as f64, sy + y as f64));
        let bbox =
            pixels.iter().fold(BBox { min_x: usize::MAX, min_y: usize::MAX, max_x: 0, max_y: 0 }, |b, &(x, y)| BBox {
                min_x: b.min_x.min(x),
                min_y: b.min_y.min(y),
                max_x: b.max_x.max(x),
                max_y: b.max_y.max(y),
            });
        Ok(Self { id, class, pixels, centroid: (sx / n + 0.5, sy / n + 0.5), bbox })
    }

    pub fn area_px(&self) -> usize {
        self.pixels.len()
    }

    /// Radius of the disk with the same area, in meters.
    pub fn equivalent_radius_m(&self, gt: &GeoTransform) -> f64 {
        (crown_area_m2(self, gt) / std::f64::consts::PI).sqrt()
    }
}

/// Maximal connected sets of `class`, ids assigned 1.. in scan order of each
/// component's first pixel; components smaller than `min_area_px` are dropped.
pub fn connected_components(
    r: &LabelRaster,
    class: LabelClass,
    connectivity: Connectivity,
    min_area_px: usize,
) -> Vec<InstanceMask> {
    let (w, h) = (r.width, r.height);
    let mut visited = vec![false; w * h];
    let mut queue = VecDeque::new();
    let mut out = Vec::new();

    for start in 0..w * h {
        if visited[start] || r.labels[start] != class {
            continue;
        }
        visited[start] = true;
        queue.push_back(start);
        let mut pixels = Vec::new();
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % w, i / w);
            pixels.push((x, y));
            for &(dx, dy) in connectivity.offsets() {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if !visited[j] && r.labels[j] == class {
                    visited[j] = true;
                    queue.push_back(j);
                }
            }
        }
        if pixels.len() >= min_area_px.max(1) {
            let id = out.len() as u32 + 1;
            // Non-empty by construction.
            out.push(InstanceMask::from_pixels(id, class, pixels).expect("component has pixels"));
        }
    }
    out
}

/// Crown projected area: pixel count times pixel footprint.
pub fn crown_area_m2(inst: &InstanceMask, gt: &GeoTransform) -> f64 {
    inst.area_px() as f64 * gt.gsd_x * gt.gsd_y
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn raster_from_rows(rows: &[&str]) -> LabelRaster {
        let h = rows.len();
        let w = rows[0].len();
        let codes: Vec<u8> = rows.iter().flat_map(|r| r.bytes().map(|b| b - b'0')).collect();
        LabelRaster::from_codes(w, h, &codes).unwrap()
    }

    #[test]
    fn rejects_unknown_codes() {
        let err = LabelRaster::from_codes(2, 2, &[0, 1, 7, 2]).unwrap_err();
        match err {
            Error::LabelCode { code, x, y } => assert_eq!((code, x, y), (7, 0, 1)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(err_msg_contains(LabelRaster::from_codes(1, 1, &[7]), "7"));
        assert!(LabelRaster::from_codes(2, 2, &[0, 1, 2]).is_err());
    }

    fn err_msg_contains<T: std::fmt::Debug>(r: Result<T>, needle: &str) -> bool {
        r.unwrap_err().to_string().contains(needle)
    }

    #[test]
    fn gsd_must_be_positive() {
        assert!(GeoTransform::new(0.0, 1.0).is_err());
        assert!(GeoTransform::new(1.0, -1.0).is_err());
        assert!(GeoTransform::new(f64::NAN, 1.0).is_err());
        assert!(GeoTransform::new(0.1, 0.2).unwrap().isotropic_gsd().is_err());
    }

    #[test]
    fn empty_raster_has_no_components() {
        let r = LabelRaster::new(8, 8);
        assert!(connected_components(&r, LabelClass::Crown, Connectivity::Eight, 1).is_empty());
        let r = LabelRaster::new(0, 0);
        assert!(connected_components(&r, LabelClass::Crown, Connectivity::Eight, 1).is_empty());
    }

    #[test]
    fn solid_block() {
        let r = raster_from_rows(&["00000", "01110", "01110", "01110", "00000"]);
        let inst = connected_components(&r, LabelClass::Crown, Connectivity::Eight, 1);
        assert_eq!(inst.len(), 1);
        assert_eq!(inst[0].area_px(), 9);
        assert_eq!(inst[0].centroid, (2.5, 2.5));
        assert_eq!(inst[0].bbox, BBox { min_x: 1, min_y: 1, max_x: 3, max_y: 3 });
    }

    #[test]
    fn diagonal_touch_depends_on_connectivity() {
        let r = raster_from_rows(&["10", "01"]);
        assert_eq!(connected_components(&r, LabelClass::Crown, Connectivity::Eight, 1).len(), 1);
        assert_eq!(connected_components(&r, LabelClass::Crown, Connectivity::Four, 1).len(), 2);
    }

    #[test]
    fn min_area_and_scan_order_ids() {
        let r = raster_from_rows(&["0002", "1100", "1100", "0000", "2222"]);
        let crowns = connected_components(&r, LabelClass::Crown, Connectivity::Eight, 1);
        assert_eq!(crowns.len(), 1);
        let shadows = connected_components(&r, LabelClass::Shadow, Connectivity::Eight, 1);
        assert_eq!(shadows.len(), 2);
        assert_eq!(shadows[0].pixels, vec![(3, 0)]);
        assert_eq!((shadows[0].id, shadows[1].id), (1, 2));
        let big = connected_components(&r, LabelClass::Shadow, Connectivity::Eight, 2);
        assert_eq!(big.len(), 1);
        assert_eq!(big[0].id, 1);
        assert_eq!(big[0].area_px(), 4);
    }

    #[test]
    fn crown_area_examples() {
        let gt = GeoTransform::square(0.0055).unwrap();
        let one = InstanceMask::from_pixels(1, LabelClass::Crown, vec![(0, 0)]).unwrap();
        assert_relative_eq!(crown_area_m2(&one, &gt), 3.025e-5, max_relative = 1e-12);

        let side = 278;
        let mut px: Vec<_> = (0..side * side).map(|i| (i % side, i / side)).collect();
        px.truncate(76_893);
        let inst = InstanceMask::from_pixels(1, LabelClass::Crown, px).unwrap();
        assert_relative_eq!(crown_area_m2(&inst, &gt), 76_893.0 * 3.025e-5, max_relative = 1e-12);
        // Matches the 2.326 m2 inventory entry at its printed precision.
        assert!((crown_area_m2(&inst, &gt) - 2.326).abs() < 5e-4);

        let unit = GeoTransform::square(1.0).unwrap();
        assert_eq!(crown_area_m2(&inst, &unit), 76_893.0);
    }

    #[test]
    fn value_channel_and_threshold() {
        let img = RgbRaster::from_pixels(3, 1, vec![[0, 0, 0], [255, 255, 255], [100, 120, 140]]).unwrap();
        let v = hsv_value_channel(&img);
        assert_eq!(v.values()[0], 0.0);
        assert_eq!(v.values()[1], 1.0);
        assert_relative_eq!(v.values()[2], 140.0 / 255.0);
        assert!((v.values()[2] - 0.549).abs() < 1e-3);
        let m = shadow_candidates(&img, 0.5).unwrap();
        assert_eq!(m.bits(), &[true, false, false]);
    }

    #[test]
    fn threshold_boundary_is_not_shadow() {
        // 51 / 255 = 0.2 exactly in the value channel.
        let img = RgbRaster::filled(1, 1, [51, 0, 0]);
        assert!(!shadow_candidates(&img, 51.0 / 255.0).unwrap().get(0, 0));
        assert!(shadow_candidates(&img, 0.0).is_err());
        assert!(shadow_candidates(&img, 1.0).is_err());
    }

    #[test]
    fn black_and_white_images() {
        let black = RgbRaster::filled(4, 3, [0, 0, 0]);
        assert_eq!(shadow_candidates(&black, 0.5).unwrap().count(), 12);
        let white = RgbRaster::filled(4, 3, [255, 255, 255]);
        assert_eq!(shadow_candidates(&white, 0.5).unwrap().count(), 0);
    }

    fn arb_raster() -> impl Strategy<Value = LabelRaster> {
        (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
            proptest::collection::vec(0u8..3, w * h)
                .prop_map(move |codes| LabelRaster::from_codes(w, h, &codes).unwrap())
        })
    }

    fn arb_rgb() -> impl Strategy<Value = RgbRaster> {
        (1usize..8, 1usize..8).prop_flat_map(|(w, h)| {
            proptest::collection::vec(any::<[u8; 3]>(), w * h)
                .prop_map(move |px| RgbRaster::from_pixels(w, h, px).unwrap())
        })
    }

    proptest! {
        #[test]
        fn components_partition_class_pixels(r in arb_raster(), eight in any::<bool>()) {
            let conn = if eight { Connectivity::Eight } else { Connectivity::Four };
            for class in [LabelClass::Crown, LabelClass::Shadow] {
                let inst = connected_components(&r, class, conn, 1);
                let mut seen = vec![false; r.width() * r.height()];
                for i in &inst {
                    prop_assert_eq!(i.area_px(), i.pixels.len());
                    let (cx, cy) = i.centroid;
                    prop_assert!(cx >= i.bbox.min_x as f64 && cx <= i.bbox.max_x as f64 + 1.0);
                    prop_assert!(cy >= i.bbox.min_y as f64 && cy <= i.bbox.max_y as f64 + 1.0);
                    for &(x, y) in &i.pixels {
                        prop_assert_eq!(r.get(x, y), class);
                        prop_assert!(!seen[y * r.width() + x]);
                        seen[y * r.width() + x] = true;
                    }
                }
                for (idx, &c) in r.labels().iter().enumerate() {
                    prop_assert_eq!(c == class, seen[idx]);
                }
            }
        }

        #[test]
        fn components_translate_with_content(r in arb_raster(), dx in 0usize..5, dy in 0usize..5) {
            let mut shifted = LabelRaster::new(r.width() + dx, r.height() + dy);
            for y in 0..r.height() {
                for x in 0..r.width() {
                    shifted.set(x + dx, y + dy, r.get(x, y));
                }
            }
            let a = connected_components(&r, LabelClass::Crown, Connectivity::Eight, 1);
            let b = connected_components(&shifted, LabelClass::Crown, Connectivity::Eight, 1);
            prop_assert_eq!(a.len(), b.len());
            for (ia, ib) in a.iter().zip(&b) {
                prop_assert_eq!(ia.id, ib.id);
                prop_assert_eq!(ia.area_px(), ib.area_px());
                prop_assert!((ib.centroid.0 - ia.centroid.0 - dx as f64).abs() < 1e-9);
                prop_assert!((ib.centroid.1 - ia.centroid.1 - dy as f64).abs() < 1e-9);
            }
        }

        #[test]
        fn threshold_monotone(img in arb_rgb(), t1 in 0.01f64..0.99, t2 in 0.01f64..0.99) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let a = shadow_candidates(&img, lo).unwrap();
            let b = shadow_candidates(&img, hi).unwrap();
            for (x, y) in a.bits().iter().zip(b.bits()) {
                prop_assert!(!*x || *y);
            }
        }

        #[test]
        fn area_is_linear(n in 1usize..5000, g in 0.001f64..2.0, s in 1.0f64..4.0) {
            let px: Vec<_> = (0..n).map(|i| (i, 0)).collect();
            let inst = InstanceMask::from_pixels(1, LabelClass::Crown, px).unwrap();
            let a = crown_area_m2(&inst, &GeoTransform::square(g).unwrap());
            let b = crown_area_m2(&inst, &GeoTransform::new(g * s, g).unwrap());
            prop_assert!((b - s * a).abs() <= 1e-12 * b.abs());
        }
    }
}

//! On-disk formats: 8-bit PNG label rasters, RGB PNGs, binary mask PNGs and
//! the per-image JSON sidecar.

use std::fs;
use std::path::Path;

use image::{ColorType, GrayImage, ImageBuffer, Luma, Rgb, RgbImage};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, GeoTransform, LabelRaster, RgbRaster};
use crate::solar::{GeoLocation, UtcInstant};

pub fn load_label_raster(path: impl AsRef<Path>) -> Result<LabelRaster> {
    let img = image::open(path.as_ref())?;
    if img.color() != ColorType::L8 {
        return Err(Error::Metadata(format!(
            "{}: label raster must be single-channel 8-bit, found {:?}",
            path.as_ref().display(),
            img.color()
        )));
    }
    let gray = img.into_luma8();
    let (w, h) = gray.dimensions();
    LabelRaster::from_codes(w as usize, h as usize, gray.as_raw())
}

pub fn save_label_raster(r: &LabelRaster, path: impl AsRef<Path>) -> Result<()> {
    let img: GrayImage = ImageBuffer::from_raw(r.width() as u32, r.height() as u32, r.codes())
        .expect("buffer length matches dimensions");
    img.save(path.as_ref())?;
    Ok(())
}

/// Loads any 8-bit image as RGB (grayscale and alpha inputs are converted).
pub fn load_rgb_raster(path: impl AsRef<Path>) -> Result<RgbRaster> {
    let rgb = image::open(path.as_ref())?.into_rgb8();
    let (w, h) = rgb.dimensions();
    let pixels = rgb.pixels().map(|Rgb(p)| *p).collect();
    RgbRaster::from_pixels(w as usize, h as usize, pixels)
}

pub fn save_rgb_raster(r: &RgbRaster, path: impl AsRef<Path>) -> Result<()> {
    let raw: Vec<u8> = r.pixels().iter().flatten().copied().collect();
    let img: RgbImage =
        ImageBuffer::from_raw(r.width() as u32, r.height() as u32, raw).expect("buffer length matches dimensions");
    img.save(path.as_ref())?;
    Ok(())
}

/// Writes set pixels as 255 and clear pixels as 0.
pub fn save_binary_mask(m: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let mut img = GrayImage::new(m.width() as u32, m.height() as u32);
    for (i, &b) in m.bits().iter().enumerate() {
        let (x, y) = ((i % m.width()) as u32, (i / m.width()) as u32);
        img.put_pixel(x, y, Luma([if b { 255 } else { 0 }]));
    }
    img.save(path.as_ref())?;
    Ok(())
}

/// Acquisition metadata stored next to each image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub gsd_x_m: f64,
    pub gsd_y_m: f64,
    pub timestamp_utc: UtcInstant,
    pub lat_deg: f64,
    pub lon_deg: f64,
}

impl Sidecar {
    pub fn geo_transform(&self) -> Result<GeoTransform> {
        GeoTransform::new(self.gsd_x_m, self.gsd_y_m)
    }

    pub fn location(&self) -> Result<GeoLocation> {
        GeoLocation::new(self.lat_deg, self.lon_deg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        let obj = value.as_object().ok_or_else(|| Error::Metadata("sidecar must be a JSON object".into()))?;
        let sidecar = Self {
            gsd_x_m: number_field(obj, "gsd_x_m")?,
            gsd_y_m: number_field(obj, "gsd_y_m")?,
            timestamp_utc: obj
                .get("timestamp_utc")
                .ok_or(Error::MissingField("timestamp_utc"))?
                .as_str()
                .ok_or_else(|| Error::Metadata("`timestamp_utc` must be a string".into()))?
                .parse()?,
            lat_deg: number_field(obj, "lat_deg")?,
            lon_deg: number_field(obj, "lon_deg")?,
        };
        sidecar.geo_transform()?;
        sidecar.location()?;
        Ok(sidecar)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

fn number_field(obj: &Map<String, Value>, name: &'static str) -> Result<f64> {
    obj.get(name)
        .ok_or(Error::MissingField(name))?
        .as_f64()
        .ok_or_else(|| Error::Metadata(format!("`{name}` must be a number")))
}

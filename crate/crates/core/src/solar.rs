//! Apparent solar position from UTC time and geographic coordinates.
//!
//! Low-precision NOAA formulation: Julian century, geometric mean longitude and
//! anomaly, equation of center, apparent longitude, obliquity, declination and
//! equation of time, then the local hour angle gives elevation and azimuth.
//! Geometric (unrefracted) elevation is returned. Accuracy is a few hundredths
//! of a degree for dates within a couple of centuries of J2000.
//!
//! Times are UTC only. Converting local civil time (e.g. CEST = UTC+2) is the
//! caller's job.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Julian Date of the J2000.0 epoch (2000-01-01 12:00:00 UTC).
pub const J2000: f64 = 2_451_545.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoLocation {
    lat_deg: f64,
    lon_deg: f64,
}

impl GeoLocation {
    pub fn new(lat_deg: f64, lon_deg: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&lat_deg) || !(-180.0..=180.0).contains(&lon_deg) {
            return Err(Error::InvalidLocation { lat_deg, lon_deg });
        }
        Ok(Self { lat_deg, lon_deg })
    }

    pub fn lat_deg(&self) -> f64 {
        self.lat_deg
    }

    pub fn lon_deg(&self) -> f64 {
        self.lon_deg
    }
}

/// A UTC calendar instant in the proleptic Gregorian calendar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UtcInstant {
    year: i32,
    month: u32,
    day: u32,
    hour: u32,
    minute: u32,
    second: u32,
}

fn is_leap_year(year: i32) -> bool {
    (year % 4 == 0 && year % 100 != 0) || year % 400 == 0
}

fn days_in_month(year: i32, month: u32) -> u32 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if is_leap_year(year) => 29,
        2 => 28,
        _ => 0,
    }
}

impl UtcInstant {
    pub fn new(year: i32, month: u32, day: u32, hour: u32, minute: u32, second: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::InvalidInstant(format!("month {month} not in 1..=12")));
        }
        if day == 0 || day > days_in_month(year, month) {
            return Err(Error::InvalidInstant(format!("day {day} not valid for {year:04}-{month:02}")));
        }
        if hour > 23 {
            return Err(Error::InvalidInstant(format!("hour {hour} not in 0..=23")));
        }
        if minute > 59 {
            return Err(Error::InvalidInstant(format!("minute {minute} not in 0..=59")));
        }
        if second > 59 {
            return Err(Error::InvalidInstant(format!("second {second} not in 0..=59")));
        }
        Ok(Self { year, month, day, hour, minute, second })
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn month(&self) -> u32 {
        self.month
    }

    pub fn day(&self) -> u32 {
        self.day
    }

    pub fn hour(&self) -> u32 {
        self.hour
    }

    pub fn minute(&self) -> u32 {
        self.minute
    }

    pub fn second(&self) -> u32 {
        self.second
    }

    /// Seconds elapsed since midnight of this UTC day.
    pub fn seconds_of_day(&self) -> u32 {
        self.hour * 3600 + self.minute * 60 + self.second
    }
}

impl fmt::Display for UtcInstant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:04}-{:02}-{:02}T{:02}:{:02}:{:02}Z",
            self.year, self.month, self.day, self.hour, self.minute, self.second
        )
    }
}

/// Parses the strict `YYYY-MM-DDThh:mm:ssZ` form.
impl FromStr for UtcInstant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInstant(format!("`{s}` is not of the form YYYY-MM-DDThh:mm:ssZ"));
        let b = s.as_bytes();
        if b.len() != 20
            || b[4] != b'-'
            || b[7] != b'-'
            || b[10] != b'T'
            || b[13] != b':'
            || b[16] != b':'
            || b[19] != b'Z'
        {
            return Err(bad());
        }
        let field = |range: std::ops::Range<usize>| -> Result<u32> {
            let part = &s[range];
            if !part.bytes().all(|c| c.is_ascii_digit()) {
                return Err(bad());
            }
            part.parse().map_err(|_| bad())
        };
        Self::new(field(0..4)? as i32, field(5..7)?, field(8..10)?, field(11..13)?, field(14..16)?, field(17..19)?)
    }
}

impl Serialize for UtcInstant {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for UtcInstant {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolarPosition {
    pub elevation_deg: f64,
    /// Clockwise from true north, in [0, 360).
    pub azimuth_deg: f64,
    pub zenith_deg: f64,
}

impl SolarPosition {
    /// Builds a position from elevation and azimuth; zenith is `90 - elevation`.
    pub fn from_elevation_azimuth(elevation_deg: f64, azimuth_deg: f64) -> Self {
        Self { elevation_deg, azimuth_deg: azimuth_deg.rem_euclid(360.0), zenith_deg: 90.0 - elevation_deg }
    }

    pub fn is_above_horizon(&self) -> bool {
        self.elevation_deg > 0.0
    }
}

/// Astronomical Julian Date (fractional days) of a UTC instant.
pub fn julian_day(t: &UtcInstant) -> f64 {
    let (mut y, mut m) = (t.year as i64, t.month as i64);
    if m <= 2 {
        y -= 1;
        m += 12;
    }
    // Gregorian correction, applied proleptically.
    let a = y.div_euclid(100);
    let b = 2 - a + a.div_euclid(4);
    let day_number =
        (365.25 * (y + 4716) as f64).floor() + (30.6001 * (m + 1) as f64).floor() + t.day as f64 + b as f64 - 1524.5;
    day_number + t.seconds_of_day() as f64 / 86_400.0
}

/// Sun declination (deg) and equation of time (minutes) for a Julian Date.
fn declination_and_equation_of_time(jd: f64) -> (f64, f64) {
    let jc = (jd - J2000) / 36_525.0;

    let mean_long = (280.466_46 + jc * (36_000.769_83 + 0.000_303_2 * jc)).rem_euclid(360.0);
    let mean_anom = 357.529_11 + jc * (35_999.050_29 - 0.000_153_7 * jc);
    let eccent = 0.016_708_634 - jc * (0.000_042_037 + 0.000_000_126_7 * jc);

    let m = mean_anom.to_radians();
    let center = m.sin() * (1.914_602 - jc * (0.004_817 + 0.000_014 * jc))
        + (2.0 * m).sin() * (0.019_993 - 0.000_101 * jc)
        + (3.0 * m).sin() * 0.000_289;
    let true_long = mean_long + center;

    let omega = (125.04 - 1934.136 * jc).to_radians();
    let apparent_long = true_long - 0.005_69 - 0.004_78 * omega.sin();

    let mean_obliq = 23.0 + (26.0 + (21.448 - jc * (46.815 + jc * (0.000_59 - jc * 0.001_813))) / 60.0) / 60.0;
    let obliq = (mean_obliq + 0.002_56 * omega.cos()).to_radians();

    let declination = (obliq.sin() * apparent_long.to_radians().sin()).asin().to_degrees();

    let y = (obliq / 2.0).tan().powi(2);
    let l0 = mean_long.to_radians();
    let eot_rad = y * (2.0 * l0).sin() - 2.0 * eccent * m.sin() + 4.0 * eccent * y * m.sin() * (2.0 * l0).cos()
        - 0.5 * y * y * (4.0 * l0).sin()
        - 1.25 * eccent * eccent * (2.0 * m).sin();
    (declination, 4.0 * eot_rad.to_degrees())
}

/// Geometric solar elevation and azimuth, without refraction correction.
pub fn solar_position(t: &UtcInstant, loc: &GeoLocation) -> SolarPosition {
    let jd = julian_day(t);
    let (decl_deg, eot_min) = declination_and_equation_of_time(jd);

    let minutes_utc = t.seconds_of_day() as f64 / 60.0;
    let true_solar_time = (minutes_utc + eot_min + 4.0 * loc.lon_deg).rem_euclid(1440.0);
    let hour_angle = (true_solar_time / 4.0 - 180.0).to_radians();

    let lat = loc.lat_deg.to_radians();
    let decl = decl_deg.to_radians();
    let cos_zenith = (lat.sin() * decl.sin() + lat.cos() * decl.cos() * hour_angle.cos()).clamp(-1.0, 1.0);
    let elevation_deg = 90.0 - cos_zenith.acos().to_degrees();

    // atan2 form is well defined at the poles and on the meridian.
    let azimuth_deg =
        hour_angle.sin().atan2(hour_angle.cos() * lat.sin() - decl.tan() * lat.cos()).to_degrees() + 180.0;

    SolarPosition::from_elevation_azimuth(elevation_deg, azimuth_deg)
}

/// A unit vector in raster axes: x to the right (east), y down (south).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction2 {
    pub x: f64,
    pub y: f64,
}

impl Direction2 {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        let norm = x.hypot(y);
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::InvalidParameter(format!("direction ({x}, {y}) has no length")));
        }
        Ok(Self { x: x / norm, y: y / norm })
    }

    pub fn dot(&self, vx: f64, vy: f64) -> f64 {
        self.x * vx + self.y * vy
    }

    /// Signed offset perpendicular to the direction (90 deg counter-clockwise on screen).
    pub fn cross(&self, vx: f64, vy: f64) -> f64 {
        self.x * vy - self.y * vx
    }

    pub fn reversed(&self) -> Self {
        Self { x: -self.x, y: -self.y }
    }
}

/// Direction from a tree base toward its shadow tip in a north-up raster.
pub fn shadow_direction_vector(sp: &SolarPosition) -> Result<Direction2> {
    if !sp.is_above_horizon() {
        return Err(Error::SunBelowHorizon { elevation_deg: sp.elevation_deg });
    }
    let anti = (sp.azimuth_deg + 180.0).to_radians();
    Direction2::new(anti.sin(), -anti.cos())
}

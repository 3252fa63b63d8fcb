//! Synthetic orchard scenes with known tree geometry, and the seeded
//! train/validation/test splitter.
//!
//! Scene coordinates are meters from the top-left corner, x east and y south,
//! matching north-up raster axes. Each tree renders as a crown disk centered on
//! its base plus a flat-tipped shadow strip of width `2r` running from the base
//! along the anti-solar direction. The strip length is the exact inverse of the
//! configured height relation, so a perfect measurement recovers the height.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{GeoTransform, LabelClass, LabelRaster, RgbRaster};
use crate::solar::{shadow_direction_vector, Direction2, SolarPosition};
use crate::tree_metrics::HeightMode;

pub const CROWN_RADIUS_RANGE_M: (f64, f64) = (0.8, 2.0);
pub const HEIGHT_RANGE_M: (f64, f64) = (1.5, 4.0);
const PLACEMENT_ATTEMPTS_PER_TREE: usize = 5_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeSpec {
    pub base_x_m: f64,
    pub base_y_m: f64,
    pub crown_radius_m: f64,
    pub height_m: f64,
}

/// Shadow strip length from the base for a tree of height `height_m`.
pub fn shadow_distance_m(height_m: f64, sun: &SolarPosition, mode: HeightMode) -> f64 {
    height_m / mode.length_to_height(sun)
}

#[derive(Debug, Clone, Copy)]
struct Footprint {
    base: (f64, f64),
    radius: f64,
    length: f64,
    dir: Direction2,
}

impl Footprint {
    fn tip(&self) -> (f64, f64) {
        (self.base.0 + self.length * self.dir.x, self.base.1 + self.length * self.dir.y)
    }

    fn in_crown(&self, x: f64, y: f64) -> bool {
        (x - self.base.0).hypot(y - self.base.1) <= self.radius
    }

    fn in_shadow(&self, x: f64, y: f64) -> bool {
        let (vx, vy) = (x - self.base.0, y - self.base.1);
        let along = self.dir.dot(vx, vy);
        along >= 0.0 && along <= self.length && self.dir.cross(vx, vy).abs() <= self.radius
    }

    /// Axis-aligned bounds (min_x, min_y, max_x, max_y) of crown and strip.
    fn bounds(&self) -> (f64, f64, f64, f64) {
        let (tx, ty) = self.tip();
        let (bx, by) = self.base;
        (bx.min(tx) - self.radius, by.min(ty) - self.radius, bx.max(tx) + self.radius, by.max(ty) + self.radius)
    }

    /// Shortest distance between the base-to-tip segments of two footprints.
    fn segment_distance(&self, other: &Footprint) -> f64 {
        segment_distance(self.base, self.tip(), other.base, other.tip())
    }
}

fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (abx, aby) = (b.0 - a.0, b.1 - a.1);
    let len2 = abx * abx + aby * aby;
    let t = if len2 == 0.0 { 0.0 } else { (((p.0 - a.0) * abx + (p.1 - a.1) * aby) / len2).clamp(0.0, 1.0) };
    (p.0 - a.0 - t * abx).hypot(p.1 - a.1 - t * aby)
}

fn segment_distance(a0: (f64, f64), a1: (f64, f64), b0: (f64, f64), b1: (f64, f64)) -> f64 {
    let orient = |p: (f64, f64), q: (f64, f64), r: (f64, f64)| (q.0 - p.0) * (r.1 - p.1) - (q.1 - p.1) * (r.0 - p.0);
    let (d1, d2) = (orient(a0, a1, b0), orient(a0, a1, b1));
    let (d3, d4) = (orient(b0, b1, a0), orient(b0, b1, a1));
    if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
        return 0.0;
    }
    point_segment_distance(a0, b0, b1)
        .min(point_segment_distance(a1, b0, b1))
        .min(point_segment_distance(b0, a0, a1))
        .min(point_segment_distance(b1, a0, a1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    extent_m: (f64, f64),
    gsd_m: f64,
    trees: Vec<TreeSpec>,
    sun: SolarPosition,
    seed: u64,
    height_mode: HeightMode,
}

impl SceneSpec {
    /// Validates the scene: positive GSD, sun elevation in (5, 85) deg, every crown
    /// and shadow strip inside the extent, and crowns at least two pixels apart.
    pub fn new(
        extent_m: (f64, f64),
        gsd_m: f64,
        trees: Vec<TreeSpec>,
        sun: SolarPosition,
        seed: u64,
        height_mode: HeightMode,
    ) -> Result<Self> {
        if !(gsd_m > 0.0 && gsd_m.is_finite()) {
            return Err(Error::InvalidGsd { gsd_x: gsd_m, gsd_y: gsd_m });
        }
        if !(extent_m.0 > 0.0 && extent_m.1 > 0.0) {
            return Err(Error::InvalidScene(format!("extent {:?} must be positive", extent_m)));
        }
        if !(sun.elevation_deg > 5.0 && sun.elevation_deg < 85.0) {
            return Err(Error::InvalidScene(format!("sun elevation {:.2} deg outside (5, 85)", sun.elevation_deg)));
        }
        let scene = Self { extent_m, gsd_m, trees, sun, seed, height_mode };
        let dir = scene.shadow_direction();
        for (i, t) in scene.trees.iter().enumerate() {
            if !(t.crown_radius_m > 0.0 && t.height_m > 0.0) {
                return Err(Error::InvalidScene(format!("tree {}: radius and height must be positive", i + 1)));
            }
            let fp = scene.footprint_with(t, dir);
            let corners =
                [(fp.base.0 - fp.radius, fp.base.1 - fp.radius), (fp.base.0 + fp.radius, fp.base.1 + fp.radius)]
                    .into_iter()
                    .chain(strip_corners(&fp));
            for (x, y) in corners {
                if x < 0.0 || y < 0.0 || x > extent_m.0 || y > extent_m.1 {
                    return Err(Error::InvalidScene(format!("tree {}: crown or shadow exits the extent", i + 1)));
                }
            }
            for (j, u) in scene.trees.iter().enumerate().take(i) {
                let dist = (t.base_x_m - u.base_x_m).hypot(t.base_y_m - u.base_y_m);
                if dist < t.crown_radius_m + u.crown_radius_m + 2.0 * gsd_m {
                    return Err(Error::InvalidScene(format!("crowns of trees {} and {} overlap", j + 1, i + 1)));
                }
            }
        }
        Ok(scene)
    }

    pub fn extent_m(&self) -> (f64, f64) {
        self.extent_m
    }

    pub fn gsd_m(&self) -> f64 {
        self.gsd_m
    }

    pub fn trees(&self) -> &[TreeSpec] {
        &self.trees
    }

    pub fn sun(&self) -> SolarPosition {
        self.sun
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn height_mode(&self) -> HeightMode {
        self.height_mode
    }

    pub fn geo_transform(&self) -> GeoTransform {
        GeoTransform::square(self.gsd_m).expect("validated gsd")
    }

    pub fn raster_size(&self) -> (usize, usize) {
        ((self.extent_m.0 / self.gsd_m).round() as usize, (self.extent_m.1 / self.gsd_m).round() as usize)
    }

    pub fn shadow_direction(&self) -> Direction2 {
        shadow_direction_vector(&self.sun).expect("validated elevation")
    }

    /// Analytic base-to-tip shadow distance of one tree.
    pub fn shadow_distance_m(&self, tree: &TreeSpec) -> f64 {
        shadow_distance_m(tree.height_m, &self.sun, self.height_mode)
    }

    fn footprint_with(&self, t: &TreeSpec, dir: Direction2) -> Footprint {
        Footprint { base: (t.base_x_m, t.base_y_m), radius: t.crown_radius_m, length: self.shadow_distance_m(t), dir }
    }

    /// Index of the tree whose crown or shadow strip contains the point, if any.
    pub fn tree_at(&self, x_m: f64, y_m: f64) -> Option<usize> {
        let dir = self.shadow_direction();
        self.trees.iter().position(|t| {
            let fp = self.footprint_with(t, dir);
            fp.in_crown(x_m, y_m) || fp.in_shadow(x_m, y_m)
        })
    }

    /// Ground-truth CSV, one row per tree with 1-based ids in scene order.
    pub fn truth_csv(&self) -> String {
        let mut out = String::from("tree_id,base_x_m,base_y_m,crown_radius_m,height_m\n");
        for (i, t) in self.trees.iter().enumerate() {
            out.push_str(&format!(
                "{},{:.3},{:.3},{:.3},{:.3}\n",
                i + 1,
                t.base_x_m,
                t.base_y_m,
                t.crown_radius_m,
                t.height_m
            ));
        }
        out
    }
}

fn strip_corners(fp: &Footprint) -> [(f64, f64); 4] {
    let (px, py) = (-fp.dir.y * fp.radius, fp.dir.x * fp.radius);
    let (tx, ty) = fp.tip();
    let (bx, by) = fp.base;
    [(bx + px, by + py), (bx - px, by - py), (tx + px, ty + py), (tx - px, ty - py)]
}

const BACKGROUND_RGB: [u8; 3] = [200, 190, 170];
const CROWN_RGB: [u8; 3] = [80, 165, 60];
const SHADOW_RGB: [u8; 3] = [40, 45, 50];
const JITTER: i16 = 20;

fn jittered(base: [u8; 3], rng: &mut ChaCha8Rng) -> [u8; 3] {
    base.map(|c| (c as i16 + rng.random_range(-JITTER..=JITTER)).clamp(0, 255) as u8)
}

/// Renders the label raster and a matching RGB image.
///
/// Background and crowns stay at or above V = 0.5 and shadows well below it, so
/// HSV thresholding at 0.5 recovers the shadow label set exactly.
pub fn render_scene(s: &SceneSpec) -> (LabelRaster, RgbRaster) {
    let (w, h) = s.raster_size();
    let gsd = s.gsd_m;
    let dir = s.shadow_direction();
    let mut labels = LabelRaster::new(w, h);
    let footprints: Vec<Footprint> = s.trees.iter().map(|t| s.footprint_with(t, dir)).collect();

    let pixel_range = |lo: f64, hi: f64, n: usize| {
        let a = ((lo / gsd).floor().max(0.0) as usize).min(n);
        let b = ((hi / gsd).ceil().max(0.0) as usize + 1).min(n);
        a..b
    };
    let mut paint = |class: LabelClass, test: &dyn Fn(&Footprint, f64, f64) -> bool| {
        for fp in &footprints {
            let (x0, y0, x1, y1) = fp.bounds();
            for py in pixel_range(y0, y1, h) {
                for px in pixel_range(x0, x1, w) {
                    let (cx, cy) = ((px as f64 + 0.5) * gsd, (py as f64 + 0.5) * gsd);
                    if test(fp, cx, cy) {
                        labels.set(px, py, class);
                    }
                }
            }
        }
    };
    paint(LabelClass::Shadow, &|fp, x, y| fp.in_shadow(x, y));
    paint(LabelClass::Crown, &|fp, x, y| fp.in_crown(x, y));

    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let pixels = labels
        .labels()
        .iter()
        .map(|c| match c {
            LabelClass::Background => jittered(BACKGROUND_RGB, &mut rng),
            LabelClass::Crown => jittered(CROWN_RGB, &mut rng),
            LabelClass::Shadow => jittered(SHADOW_RGB, &mut rng),
        })
        .collect();
    let rgb = RgbRaster::from_pixels(w, h, pixels).expect("one pixel per label");
    (labels, rgb)
}

fn round_mm(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

/// Rejection-samples `n_trees` trees with olive-like radii and heights.
///
/// Accepted trees keep their base-to-tip shadow segments at least
/// `2 * (r_i + r_j)` apart, so every crown and shadow stays well clear of its
/// neighbours. Coordinates are rounded to the millimetre.
pub fn random_scene(
    n_trees: usize,
    extent_m: (f64, f64),
    gsd_m: f64,
    sun: SolarPosition,
    seed: u64,
    height_mode: HeightMode,
) -> Result<SceneSpec> {
    // Validate the frame before sampling.
    let empty = SceneSpec::new(extent_m, gsd_m, Vec::new(), sun, seed, height_mode)?;
    let dir = empty.shadow_direction();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trees: Vec<TreeSpec> = Vec::with_capacity(n_trees);
    let mut placed: Vec<Footprint> = Vec::with_capacity(n_trees);
    let margin = 2.0 * gsd_m;

    for _ in 0..n_trees {
        let mut accepted = false;
        for _ in 0..PLACEMENT_ATTEMPTS_PER_TREE {
            let tree = TreeSpec {
                base_x_m: round_mm(rng.random_range(0.0..extent_m.0)),
                base_y_m: round_mm(rng.random_range(0.0..extent_m.1)),
                crown_radius_m: round_mm(rng.random_range(CROWN_RADIUS_RANGE_M.0..=CROWN_RADIUS_RANGE_M.1)),
                height_m: round_mm(rng.random_range(HEIGHT_RANGE_M.0..=HEIGHT_RANGE_M.1)),
            };
            let fp = empty.footprint_with(&tree, dir);
            let (x0, y0, x1, y1) = fp.bounds();
            if x0 < margin || y0 < margin || x1 > extent_m.0 - margin || y1 > extent_m.1 - margin {
                continue;
            }
            let clear = placed.iter().all(|other| fp.segment_distance(other) >= 2.0 * (fp.radius + other.radius));
            if clear {
                trees.push(tree);
                placed.push(fp);
                accepted = true;
                break;
            }
        }
        if !accepted {
            return Err(Error::PlacementInfeasible {
                placed: trees.len(),
                requested: n_trees,
                attempts: PLACEMENT_ATTEMPTS_PER_TREE,
                density: 100.0 * n_trees as f64 / (extent_m.0 * extent_m.1),
            });
        }
    }
    SceneSpec::new(extent_m, gsd_m, trees, sun, seed, height_mode)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

/// Largest-remainder apportionment of `n` items over `ratios`; ties favour the earlier subset.
pub fn apportion(n: usize, ratios: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut sizes: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())).then(a.cmp(&b)));
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        sizes[i] += 1;
    }
    sizes
}

/// Seeded uniform shuffle followed by contiguous train/val/test cuts.
pub fn monte_carlo_split<T: Clone>(items: &[T], ratios: (f64, f64, f64), seed: u64) -> Result<Split<T>> {
    let r = [ratios.0, ratios.1, ratios.2];
    if r.iter().any(|&x| !(x > 0.0)) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("split ratios {r:?} must be positive and sum to 1")));
    }
    let mut shuffled = items.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let sizes = apportion(items.len(), &r);
    let test = shuffled.split_off(sizes[0] + sizes[1]);
    let val = shuffled.split_off(sizes[0]);
    Ok(Split { train: shuffled, val, test })
}

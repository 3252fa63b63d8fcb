use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{anyhow, bail, Context, Result};
use canopy_core::evaluation::segmentation_report;
use canopy_core::io::{
    load_label_raster, load_rgb_raster, save_binary_mask, save_label_raster, save_rgb_raster, Sidecar,
};
use canopy_core::raster::shadow_candidates;
use canopy_core::solar::solar_position;
use canopy_core::synth::{monte_carlo_split, random_scene, render_scene};
use canopy_core::tree_metrics::{measure_scene, records_to_csv, SceneMeasurement};
use canopy_core::{GeoLocation, MeasureConfig, SolarPosition, UtcInstant};
use serde::Serialize;
use serde_json::value::RawValue;

use crate::config::RunConfig;

const DEFAULT_TIMESTAMP: &str = "2022-05-22T07:46:00Z";
const DEFAULT_LAT_DEG: f64 = 43.7131;
const DEFAULT_LON_DEG: f64 = 10.5825;
const DEFAULT_GSD_M: f64 = 0.02;

/// JSON number printed with a fixed number of decimals.
fn fixed(x: f64, places: usize) -> Box<RawValue> {
    let mut s = format!("{x:.places$}");
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s.remove(0);
    }
    RawValue::from_string(s).expect("formatted float is valid JSON")
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

#[derive(Serialize)]
struct SunJson {
    elevation_deg: Box<RawValue>,
    azimuth_deg: Box<RawValue>,
    zenith_deg: Box<RawValue>,
}

impl From<&SolarPosition> for SunJson {
    fn from(sp: &SolarPosition) -> Self {
        Self {
            elevation_deg: fixed(sp.elevation_deg, 2),
            azimuth_deg: fixed(sp.azimuth_deg, 2),
            zenith_deg: fixed(sp.zenith_deg, 2),
        }
    }
}

pub fn solar(cfg: &RunConfig) -> Result<()> {
    let t = cfg.timestamp_utc.ok_or_else(|| anyhow!("missing --timestamp"))?;
    let lat = cfg.lat_deg.ok_or_else(|| anyhow!("missing --lat"))?;
    let lon = cfg.lon_deg.ok_or_else(|| anyhow!("missing --lon"))?;
    let sp = solar_position(&t, &GeoLocation::new(lat, lon)?);
    emit(None, &to_json(&SunJson::from(&sp))?)
}

#[derive(Serialize)]
struct TreeJson {
    tree_id: u32,
    crown_area_m2: Box<RawValue>,
    shadow_length_m: Option<Box<RawValue>>,
    height_m: Option<Box<RawValue>>,
    biovolume_m3: Option<Box<RawValue>>,
}

#[derive(Serialize)]
struct InventoryJson<'a> {
    sun: SunJson,
    trees: Vec<TreeJson>,
    warnings: &'a [String],
}

fn inventory_json(m: &SceneMeasurement) -> Result<String> {
    let m3 = |v: Option<f64>| v.map(|x| fixed(x, 3));
    let trees = m
        .records
        .iter()
        .map(|r| TreeJson {
            tree_id: r.tree_id,
            crown_area_m2: fixed(r.crown_area_m2, 3),
            shadow_length_m: m3(r.shadow_length_m),
            height_m: m3(r.height_m),
            biovolume_m3: m3(r.biovolume_m3),
        })
        .collect();
    to_json(&InventoryJson { sun: SunJson::from(&m.sun), trees, warnings: &m.warnings })
}

/// Sidecar metadata with any acquisition fields given in the run config laid over it.
fn load_sidecar(cfg: &RunConfig, path: &Path) -> Result<Sidecar> {
    let text = fs::read_to_string(path).with_context(|| format!("reading sidecar {}", path.display()))?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing sidecar {}", path.display()))?;
    if let Some(obj) = value.as_object_mut() {
        let numbers =
            [("gsd_x_m", cfg.gsd_x_m), ("gsd_y_m", cfg.gsd_y_m), ("lat_deg", cfg.lat_deg), ("lon_deg", cfg.lon_deg)];
        for (key, v) in numbers {
            if let Some(v) = v {
                obj.insert(key.into(), v.into());
            }
        }
        if let Some(t) = cfg.timestamp_utc {
            obj.insert("timestamp_utc".into(), t.to_string().into());
        }
    }
    Sidecar::from_json(&value.to_string()).with_context(|| format!("sidecar {}", path.display()))
}

fn measure_file(cfg: &RunConfig, mcfg: &MeasureConfig, label: &Path, sidecar: &Path) -> Result<SceneMeasurement> {
    let meta = load_sidecar(cfg, sidecar)?;
    let labels = load_label_raster(label).with_context(|| format!("loading {}", label.display()))?;
    let m = measure_scene(&labels, &meta.geo_transform()?, &meta.timestamp_utc, &meta.location()?, mcfg)
        .with_context(|| format!("measuring {}", label.display()))?;
    Ok(m)
}

/// PNG files in `dir`, sorted by file name.
fn png_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        let is_png = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if path.is_file() && is_png {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

/// Maps `f` over `items` on a few threads; results keep the input order.
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len()).max(1);
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(i) else { break };
                let r = f(item);
                slots.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    slots.into_inner().expect("worker panicked").into_iter().map(|r| r.expect("every slot filled")).collect()
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn measure(cfg: &RunConfig, input: &Path, sidecar: Option<&Path>, out: Option<&Path>, json: bool) -> Result<()> {
    let mcfg = cfg.measure_config()?;
    if !input.is_dir() {
        let sidecar = sidecar.map(Path::to_path_buf).unwrap_or_else(|| input.with_extension("json"));
        let m = measure_file(cfg, &mcfg, input, &sidecar)?;
        for w in &m.warnings {
            eprintln!("warning: {w}");
        }
        let text = if json { inventory_json(&m)? } else { records_to_csv(&m.records) };
        return emit(out, &text);
    }

    if sidecar.is_some() {
        bail!("--sidecar applies to a single image; directory mode reads <name>.json next to each PNG");
    }
    let out_dir = out.ok_or_else(|| anyhow!("directory mode needs --out <DIR>"))?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let files = png_files(input)?;
    let results = par_map(&files, |f| measure_file(cfg, &mcfg, f, &f.with_extension("json")));

    let mut failed = 0;
    for (file, result) in files.iter().zip(results) {
        let stem = file_stem(file);
        match result {
            Ok(m) => {
                fs::write(out_dir.join(format!("{stem}.csv")), records_to_csv(&m.records))?;
                fs::write(out_dir.join(format!("{stem}.json")), inventory_json(&m)?)?;
                for w in &m.warnings {
                    eprintln!("warning: {stem}: {w}");
                }
            }
            Err(e) => {
                failed += 1;
                eprintln!("error: {e:#}");
            }
        }
    }
    if failed > 0 {
        bail!("{failed} of {} images failed", files.len());
    }
    Ok(())
}

#[derive(Serialize)]
struct NamedReport<R> {
    image: String,
    report: R,
}

pub fn eval(cfg: &RunConfig, pred: &Path, gt: &Path, out: Option<&Path>, table: bool) -> Result<()> {
    let score = |p: &Path, g: &Path| -> Result<_> {
        let pr = load_label_raster(p).with_context(|| format!("loading {}", p.display()))?;
        let gr = load_label_raster(g).with_context(|| format!("loading {}", g.display()))?;
        segmentation_report(&pr, &gr, &cfg.miou_class_set).with_context(|| format!("scoring {}", p.display()))
    };

    if !pred.is_dir() {
        let report = score(pred, gt)?;
        let text = if table { report.to_table() } else { to_json(&report)? };
        return emit(out, &text);
    }

    if !gt.is_dir() {
        bail!("{} is a directory but {} is not", pred.display(), gt.display());
    }
    let files = png_files(pred)?;
    let reports = par_map(&files, |f| score(f, &gt.join(f.file_name().unwrap_or_default())));
    let mut named = Vec::with_capacity(files.len());
    for (file, report) in files.iter().zip(reports) {
        let image = file.file_name().unwrap_or_default().to_string_lossy().into_owned();
        named.push(NamedReport { image, report: report? });
    }
    let text = if table {
        named.iter().map(|n| format!("{}\n{}", n.image, n.report.to_table())).collect::<Vec<_>>().join("\n")
    } else {
        to_json(&named)?
    };
    emit(out, &text)
}

pub fn shadowmask(cfg: &RunConfig, rgb: &Path, out: &Path) -> Result<()> {
    let img = load_rgb_raster(rgb).with_context(|| format!("loading {}", rgb.display()))?;
    let mask = shadow_candidates(&img, cfg.hsv_threshold)?;
    save_binary_mask(&mask, out).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

pub fn synth(cfg: &RunConfig, out: &Path, trees: usize, seed: u64, extent_m: (f64, f64), name: &str) -> Result<()> {
    let gsd = match (cfg.gsd_x_m, cfg.gsd_y_m) {
        (Some(x), Some(y)) if x != y => bail!("synthetic scenes need square pixels, got gsd {x} x {y}"),
        (Some(g), _) | (None, Some(g)) => g,
        (None, None) => DEFAULT_GSD_M,
    };
    let t: UtcInstant = match cfg.timestamp_utc {
        Some(t) => t,
        None => DEFAULT_TIMESTAMP.parse()?,
    };
    let loc = GeoLocation::new(cfg.lat_deg.unwrap_or(DEFAULT_LAT_DEG), cfg.lon_deg.unwrap_or(DEFAULT_LON_DEG))?;
    let sun = solar_position(&t, &loc);
    let scene = random_scene(trees, extent_m, gsd, sun, seed, cfg.height_mode)?;
    let (labels, rgb) = render_scene(&scene);

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    save_label_raster(&labels, out.join(format!("{name}.png")))?;
    save_rgb_raster(&rgb, out.join(format!("{name}_rgb.png")))?;
    let meta = Sidecar { gsd_x_m: gsd, gsd_y_m: gsd, timestamp_utc: t, lat_deg: loc.lat_deg(), lon_deg: loc.lon_deg() };
    meta.save(out.join(format!("{name}.json")))?;
    fs::write(out.join(format!("{name}_truth.csv")), scene.truth_csv())?;
    Ok(())
}

pub fn split(list: &Path, out: &Path, ratios: (f64, f64, f64), seed: u64) -> Result<()> {
    let text = fs::read_to_string(list).with_context(|| format!("reading {}", list.display()))?;
    let items: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let split = monte_carlo_split(&items, ratios, seed)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut summary = String::new();
    for (name, part) in [("train", &split.train), ("val", &split.val), ("test", &split.test)] {
        let body: String = part.iter().map(|p| format!("{p}\n")).collect();
        fs::write(out.join(format!("{name}.txt")), body)?;
        summary.push_str(&format!("{name} {}\n", part.len()));
    }
    emit(None, &summary)
}

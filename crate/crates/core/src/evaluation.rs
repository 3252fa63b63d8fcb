//! Pixel-level segmentation scores (precision, recall, F1, IoU, mIoU) and
//! instance-level detection scores.
//!
//! Zero denominators yield 0, except when a class is absent from both rasters
//! (tp = fp = fn = 0): that is perfect vacuous agreement and every score is 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{InstanceMask, LabelClass, LabelRaster};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    fn vacuous(&self) -> bool {
        self.tp == 0 && self.fp == 0 && self.fn_ == 0
    }

    fn ratio(&self, num: u64, den: u64) -> f64 {
        if self.vacuous() {
            1.0
        } else if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    }

    pub fn precision(&self) -> f64 {
        self.ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        self.ratio(self.tp, self.tp + self.fn_)
    }

    /// Harmonic mean of precision and recall, in its count form `2tp / (2tp + fp + fn)`.
    pub fn f1(&self) -> f64 {
        self.ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }

    pub fn iou(&self) -> f64 {
        self.ratio(self.tp, self.tp + self.fp + self.fn_)
    }

    pub fn scores(&self) -> ClassScores {
        ClassScores { precision: self.precision(), recall: self.recall(), f1: self.f1(), iou: self.iou() }
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self { tp: self.tp + o.tp, fp: self.fp + o.fp, fn_: self.fn_ + o.fn_, tn: self.tn + o.tn }
    }
}

fn check_dims(pred: &LabelRaster, gt: &LabelRaster) -> Result<()> {
    if !pred.same_shape(gt) {
        return Err(Error::DimensionMismatch {
            pred_w: pred.width(),
            pred_h: pred.height(),
            gt_w: gt.width(),
            gt_h: gt.height(),
        });
    }
    Ok(())
}

/// Full 3x3 confusion matrix, indexed `[gt][pred]` by class code.
fn confusion_matrix(pred: &LabelRaster, gt: &LabelRaster) -> [[u64; 3]; 3] {
    let mut m = [[0u64; 3]; 3];
    for (&p, &g) in pred.labels().iter().zip(gt.labels()) {
        m[g as usize][p as usize] += 1;
    }
    m
}

fn one_vs_rest(m: &[[u64; 3]; 3], class: LabelClass) -> ConfusionCounts {
    let c = class as usize;
    let total: u64 = m.iter().flatten().sum();
    let tp = m[c][c];
    let fp = (0..3).map(|g| m[g][c]).sum::<u64>() - tp;
    let fn_ = m[c].iter().sum::<u64>() - tp;
    ConfusionCounts { tp, fp, fn_, tn: total - tp - fp - fn_ }
}

/// One-vs-rest counts for `class`.
pub fn confusion(pred: &LabelRaster, gt: &LabelRaster, class: LabelClass) -> Result<ConfusionCounts> {
    check_dims(pred, gt)?;
    Ok(one_vs_rest(&confusion_matrix(pred, gt), class))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub iou: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: LabelClass,
    pub counts: ConfusionCounts,
    #[serde(flatten)]
    pub scores: ClassScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationReport {
    pub class_set: Vec<LabelClass>,
    pub per_class: Vec<ClassReport>,
    /// Unweighted mean of the per-class scores.
    #[serde(rename = "macro")]
    pub macro_avg: MacroScores,
    pub miou: f64,
    /// Classes of the set merged into one foreground mask.
    pub foreground: ClassScores,
}

/// Default mIoU class set: foreground classes only.
pub const FOREGROUND_CLASSES: [LabelClass; 2] = [LabelClass::Crown, LabelClass::Shadow];

pub fn segmentation_report(
    pred: &LabelRaster,
    gt: &LabelRaster,
    class_set: &[LabelClass],
) -> Result<SegmentationReport> {
    check_dims(pred, gt)?;
    let mut classes = class_set.to_vec();
    classes.sort();
    classes.dedup();
    if classes.is_empty() {
        return Err(Error::InvalidParameter("empty class set".into()));
    }

    let m = confusion_matrix(pred, gt);
    let per_class: Vec<ClassReport> = classes
        .iter()
        .map(|&class| {
            let counts = one_vs_rest(&m, class);
            ClassReport { class, counts, scores: counts.scores() }
        })
        .collect();

    let n = per_class.len() as f64;
    let mean = |f: fn(&ClassScores) -> f64| per_class.iter().map(|c| f(&c.scores)).sum::<f64>() / n;
    let macro_avg = MacroScores { precision: mean(|s| s.precision), recall: mean(|s| s.recall), f1: mean(|s| s.f1) };
    let miou = mean(|s| s.iou);

    let in_set = |c: usize| classes.iter().any(|k| *k as usize == c);
    let mut fg = ConfusionCounts::default();
    for (g, row) in m.iter().enumerate() {
        for (p, &count) in row.iter().enumerate() {
            match (in_set(g), in_set(p)) {
                (true, true) => fg.tp += count,
                (false, true) => fg.fp += count,
                (true, false) => fg.fn_ += count,
                (false, false) => fg.tn += count,
            }
        }
    }

    Ok(SegmentationReport { class_set: classes, per_class, macro_avg, miou, foreground: fg.scores() })
}

impl SegmentationReport {
    /// Aligned plain-text table: one row per class, then macro and foreground rows.
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<12}{:>11}{:>11}{:>11}{:>11}\n", "class", "precision", "recall", "f1", "iou");
        for c in &self.per_class {
            out.push_str(&format!(
                "{:<12}{:>11.4}{:>11.4}{:>11.4}{:>11.4}\n",
                c.class.name(),
                c.scores.precision,
                c.scores.recall,
                c.scores.f1,
                c.scores.iou
            ));
        }
        out.push_str(&format!(
            "{:<12}{:>11.4}{:>11.4}{:>11.4}{:>11.4}\n",
            "macro", self.macro_avg.precision, self.macro_avg.recall, self.macro_avg.f1, self.miou
        ));
        out.push_str(&format!(
            "{:<12}{:>11.4}{:>11.4}{:>11.4}{:>11.4}\n",
            "foreground", self.foreground.precision, self.foreground.recall, self.foreground.f1, self.foreground.iou
        ));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionScores {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// IoU of two instances' pixel sets; both lists are in scan order.
pub fn mask_iou(a: &InstanceMask, b: &InstanceMask) -> f64 {
    let key = |&(x, y): &(usize, usize)| (y, x);
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.pixels.len() && j < b.pixels.len() {
        match key(&a.pixels[i]).cmp(&key(&b.pixels[j])) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.pixels.len() + b.pixels.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Greedy one-to-one matching by descending IoU; a match counts when IoU >= threshold.
pub fn instance_detection_metrics(
    pred: &[InstanceMask],
    gt: &[InstanceMask],
    iou_threshold: f64,
) -> Result<DetectionScores> {
    if !(iou_threshold > 0.0 && iou_threshold <= 1.0) {
        return Err(Error::InvalidThreshold(iou_threshold));
    }
    let mut pairs = Vec::new();
    for (pi, p) in pred.iter().enumerate() {
        for (gi, g) in gt.iter().enumerate() {
            if p.class != g.class || !bboxes_overlap(p, g) {
                continue;
            }
            let iou = mask_iou(p, g);
            if iou >= iou_threshold {
                pairs.push((iou, pi, gi));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut pred_used = vec![false; pred.len()];
    let mut gt_used = vec![false; gt.len()];
    let mut tp = 0;
    for (_, pi, gi) in pairs {
        if !pred_used[pi] && !gt_used[gi] {
            pred_used[pi] = true;
            gt_used[gi] = true;
            tp += 1;
        }
    }
    let counts = ConfusionCounts { tp: tp as u64, fp: (pred.len() - tp) as u64, fn_: (gt.len() - tp) as u64, tn: 0 };
    Ok(DetectionScores {
        tp,
        fp: pred.len() - tp,
        fn_: gt.len() - tp,
        precision: counts.precision(),
        recall: counts.recall(),
        f1: counts.f1(),
    })
}

fn bboxes_overlap(a: &InstanceMask, b: &InstanceMask) -> bool {
    a.bbox.min_x <= b.bbox.max_x
        && b.bbox.min_x <= a.bbox.max_x
        && a.bbox.min_y <= b.bbox.max_y
        && b.bbox.min_y <= a.bbox.max_y
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn raster(w: usize, h: usize, f: impl Fn(usize, usize) -> u8) -> LabelRaster {
        let codes: Vec<u8> = (0..w * h).map(|i| f(i % w, i / w)).collect();
        LabelRaster::from_codes(w, h, &codes).unwrap()
    }

    #[test]
    fn identical_rasters_have_no_errors() {
        let r = raster(5, 4, |x, y| ((x * 7 + y * 3) % 3) as u8);
        for class in LabelClass::ALL {
            let c = confusion(&r, &r, class).unwrap();
            assert_eq!((c.fp, c.fn_), (0, 0));
        }
        let rep = segmentation_report(&r, &r, &FOREGROUND_CLASSES).unwrap();
        assert_eq!(rep.miou, 1.0);
        assert_eq!(rep.macro_avg, MacroScores { precision: 1.0, recall: 1.0, f1: 1.0 });
    }

    #[test]
    fn all_crown_vs_background() {
        let pred = LabelRaster::filled(2, 2, LabelClass::Crown);
        let gt = LabelRaster::new(2, 2);
        let c = confusion(&pred, &gt, LabelClass::Crown).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 0, fp: 4, fn_: 0, tn: 0 });
    }

    #[test]
    fn crossed_blocks() {
        let gt = raster(4, 4, |x, _| (x < 2) as u8);
        let pred = raster(4, 4, |_, y| (y < 2) as u8);
        let c = confusion(&pred, &gt, LabelClass::Crown).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 4, fp: 4, fn_: 4, tn: 4 });
        assert_eq!(c.precision(), 0.5);
        assert_eq!(c.recall(), 0.5);
        assert_eq!(c.f1(), 0.5);
        assert_abs_diff_eq!(c.iou(), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn vacuous_and_zero_denominators() {
        let empty = ConfusionCounts { tp: 0, fp: 0, fn_: 0, tn: 9 };
        assert_eq!((empty.iou(), empty.f1()), (1.0, 1.0));
        let missed = ConfusionCounts { tp: 0, fp: 0, fn_: 3, tn: 9 };
        assert_eq!((missed.precision(), missed.recall(), missed.f1(), missed.iou()), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn harmonic_mean_formula() {
        let (p, r): (f64, f64) = (0.884, 0.776);
        assert_abs_diff_eq!(2.0 * p * r / (p + r), 0.8265, epsilon = 1e-4);
        let c = ConfusionCounts { tp: 221, fp: 29, fn_: 64, tn: 0 };
        assert_abs_diff_eq!(c.f1(), 2.0 * c.precision() * c.recall() / (c.precision() + c.recall()), epsilon = 1e-12);
    }

    #[test]
    fn disjoint_foreground() {
        let gt = raster(4, 4, |x, y| {
            if x < 2 && y < 2 {
                1
            } else if x >= 2 && y >= 2 {
                2
            } else {
                0
            }
        });
        let pred = raster(4, 4, |x, y| {
            if x >= 2 && y < 2 {
                1
            } else if x < 2 && y >= 2 {
                2
            } else {
                0
            }
        });
        let rep = segmentation_report(&pred, &gt, &FOREGROUND_CLASSES).unwrap();
        for c in &rep.per_class {
            assert_eq!(c.scores, ClassScores { precision: 0.0, recall: 0.0, f1: 0.0, iou: 0.0 });
        }
        assert_eq!(rep.miou, 0.0);
    }

    #[test]
    fn dimension_mismatch_names_shapes() {
        let err = confusion(&LabelRaster::new(3, 2), &LabelRaster::new(2, 3), LabelClass::Crown).unwrap_err();
        assert!(err.to_string().contains("3x2") && err.to_string().contains("2x3"));
        assert!(segmentation_report(&LabelRaster::new(3, 2), &LabelRaster::new(2, 3), &FOREGROUND_CLASSES).is_err());
    }

    #[test]
    fn background_inclusive_class_set() {
        let gt = raster(4, 4, |x, _| (x < 2) as u8);
        let pred = raster(4, 4, |_, y| (y < 2) as u8);
        let rep = segmentation_report(&pred, &gt, &LabelClass::ALL).unwrap();
        assert_eq!(rep.per_class.len(), 3);
        // Background: tp 4, fp 4, fn 4; crown likewise; shadow vacuous.
        assert_abs_diff_eq!(rep.miou, (1.0 / 3.0 + 1.0 / 3.0 + 1.0) / 3.0, epsilon = 1e-15);
    }

    fn inst(id: u32, pixels: Vec<(usize, usize)>) -> InstanceMask {
        InstanceMask::from_pixels(id, LabelClass::Crown, pixels).unwrap()
    }

    fn row(x0: usize, x1: usize, y: usize) -> Vec<(usize, usize)> {
        (x0..x1).map(|x| (x, y)).collect()
    }

    #[test]
    fn detection_identical() {
        let a = vec![inst(1, row(0, 5, 0)), inst(2, row(0, 5, 3))];
        let s = instance_detection_metrics(&a, &a, 0.5).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn detection_threshold_inclusive() {
        // 4 shared of 8 in the union -> IoU 0.5 exactly.
        let g = inst(1, row(0, 6, 0));
        let p = inst(1, row(2, 8, 0));
        assert_eq!(mask_iou(&p, &g), 0.5);
        let s = instance_detection_metrics(&[p], &[g], 0.5).unwrap();
        assert_eq!(s.tp, 1);
        assert!(instance_detection_metrics(&[], &[], 0.0).is_err());
        assert!(instance_detection_metrics(&[], &[], 1.5).is_err());
    }

    #[test]
    fn detection_partial_match() {
        // P1 covers 6 of GT A's 10 pixels: IoU 0.6.
        let gt = vec![inst(1, row(0, 10, 0)), inst(2, row(0, 10, 5))];
        let pred = vec![
            inst(1, row(0, 6, 0)),
            inst(2, row(0, 3, 5)),   // IoU 0.3 with GT B
            inst(3, row(20, 25, 9)), // no overlap
        ];
        let s = instance_detection_metrics(&pred, &gt, 0.5).unwrap();
        assert_eq!((s.tp, s.fp, s.fn_), (1, 2, 1));
        assert_abs_diff_eq!(s.precision, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.recall, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.f1, 0.4, epsilon = 1e-15);
    }

    #[test]
    fn detection_greedy_order() {
        // One GT, two predictions with IoU 0.9 and 0.7: the better one wins.
        let g = inst(1, row(0, 10, 0));
        let weaker = inst(1, row(0, 7, 0));
        let better = inst(2, row(0, 9, 0));
        let s = instance_detection_metrics(&[weaker, better], &[g], 0.5).unwrap();
        assert_eq!((s.tp, s.fp, s.fn_), (1, 1, 0));
    }

    fn arb_counts() -> impl Strategy<Value = ConfusionCounts> {
        (0u64..1000, 0u64..1000, 0u64..1000, 0u64..1000).prop_map(|(tp, fp, fn_, tn)| ConfusionCounts {
            tp,
            fp,
            fn_,
            tn,
        })
    }

    proptest! {
        #[test]
        fn f1_iou_identity(c in arb_counts()) {
            prop_assume!(c.tp + c.fp + c.fn_ > 0);
            let (iou, f1) = (c.iou(), c.f1());
            prop_assert!(iou <= f1 + 1e-15 && f1 <= 1.0);
            prop_assert!((f1 - 2.0 * iou / (1.0 + iou)).abs() <= 1e-12);
        }

        #[test]
        fn swapping_roles_swaps_precision_recall(
            codes in proptest::collection::vec((0u8..3, 0u8..3), 1..200)
        ) {
            let n = codes.len();
            let a: Vec<u8> = codes.iter().map(|c| c.0).collect();
            let b: Vec<u8> = codes.iter().map(|c| c.1).collect();
            let ra = LabelRaster::from_codes(n, 1, &a).unwrap();
            let rb = LabelRaster::from_codes(n, 1, &b).unwrap();
            let ab = segmentation_report(&ra, &rb, &FOREGROUND_CLASSES).unwrap();
            let ba = segmentation_report(&rb, &ra, &FOREGROUND_CLASSES).unwrap();
            for (x, y) in ab.per_class.iter().zip(&ba.per_class) {
                prop_assert_eq!(x.scores.precision, y.scores.recall);
                prop_assert_eq!(x.scores.recall, y.scores.precision);
                prop_assert_eq!(x.scores.f1, y.scores.f1);
                prop_assert_eq!(x.scores.iou, y.scores.iou);
            }
            // Same pixels in reverse order.
            let rev = |v: &[u8]| LabelRaster::from_codes(n, 1, &v.iter().rev().copied().collect::<Vec<_>>()).unwrap();
            let perm = segmentation_report(&rev(&a), &rev(&b), &FOREGROUND_CLASSES).unwrap();
            prop_assert_eq!(perm, ab);
        }
    }
}

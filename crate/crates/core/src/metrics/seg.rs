use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::BinaryMask;

/// Overlap scores in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegReport {
    pub iou: f64,
    pub pa: f64,
    pub f1: f64,
}

pub(crate) fn check_dims(pred: &BinaryMask, gt: &BinaryMask) -> Result<()> {
    if !pred.same_dims(gt) {
        return Err(Error::DimensionMismatch(format!(
            "prediction {}x{} vs ground truth {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height()
        )));
    }
    Ok(())
}

/// IoU, pixel accuracy and F1. Two empty masks score 1 on every metric.
pub fn seg_metrics(pred: &BinaryMask, gt: &BinaryMask) -> Result<SegReport> {
    check_dims(pred, gt)?;
    let (mut inter, mut np, mut ng) = (0usize, 0usize, 0usize);
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        inter += usize::from(p && g);
        np += usize::from(p);
        ng += usize::from(g);
    }
    let total = pred.data().len();
    let union = np + ng - inter;
    let agree = total - (union - inter);
    if union == 0 {
        return Ok(SegReport {
            iou: 1.0,
            pa: 1.0,
            f1: 1.0,
        });
    }
    Ok(SegReport {
        iou: inter as f64 / union as f64,
        pa: agree as f64 / total as f64,
        f1: 2.0 * inter as f64 / (np + ng) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_masks_score_one() {
        let m = BinaryMask::from_fn(9, 7, |x, y| (x + y) % 3 == 0);
        let r = seg_metrics(&m, &m).unwrap();
        assert_eq!((r.iou, r.pa, r.f1), (1.0, 1.0, 1.0));
        let e = BinaryMask::empty(4, 4);
        assert_eq!(seg_metrics(&e, &e).unwrap().iou, 1.0);
    }

    #[test]
    fn disjoint_masks_score_zero() {
        let a = BinaryMask::from_fn(6, 6, |x, _| x < 2);
        let b = BinaryMask::from_fn(6, 6, |x, _| x > 3);
        let r = seg_metrics(&a, &b).unwrap();
        assert_eq!((r.iou, r.f1), (0.0, 0.0));
    }

    #[test]
    fn two_by_two_hand_case() {
        // (x, y) pairs: pred = {(0,0), (0,1)}, gt = {(0,1), (1,1)}
        let pred = BinaryMask::from_fn(2, 2, |x, y| (x, y) == (0, 0) || (x, y) == (0, 1));
        let gt = BinaryMask::from_fn(2, 2, |x, y| (x, y) == (0, 1) || (x, y) == (1, 1));
        let r = seg_metrics(&pred, &gt).unwrap();
        assert!((r.iou - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.f1, 0.5);
        assert_eq!(r.pa, 0.5);
    }

    #[test]
    fn size_mismatch() {
        assert!(seg_metrics(&BinaryMask::empty(3, 3), &BinaryMask::empty(3, 4)).is_err());
    }
}

//! Binary morphology with a square structuring element of side `2r + 1`.
//! Pixels outside the raster count as background for every operation.

use serde::{Deserialize, Serialize};

use super::image::BinaryMask;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MorphOp {
    Erode,
    Dilate,
    /// Erode then dilate.
    Open,
    /// Dilate then erode.
    Close,
}

pub fn morphology(mask: &BinaryMask, op: MorphOp, radius: usize) -> Result<BinaryMask> {
    if radius == 0 {
        return Err(Error::config("radius", "must be at least 1"));
    }
    Ok(match op {
        MorphOp::Erode => erode(mask, radius),
        MorphOp::Dilate => dilate(mask, radius),
        MorphOp::Open => dilate(&erode(mask, radius), radius),
        MorphOp::Close => erode(&dilate(mask, radius), radius),
    })
}

pub fn erode(mask: &BinaryMask, radius: usize) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let rows = pass(mask.data(), w, h, radius, true, Axis::Row);
    let data = pass(&rows, w, h, radius, true, Axis::Col);
    BinaryMask::new(w, h, data).expect("dimensions preserved")
}

pub fn dilate(mask: &BinaryMask, radius: usize) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let rows = pass(mask.data(), w, h, radius, false, Axis::Row);
    let data = pass(&rows, w, h, radius, false, Axis::Col);
    BinaryMask::new(w, h, data).expect("dimensions preserved")
}

#[derive(Clone, Copy)]
enum Axis {
    Row,
    Col,
}

/// One separable 1D pass using a running count of set pixels.
/// `all = true` is erosion (window must be fully set, and fully inside).
fn pass(src: &[bool], w: usize, h: usize, r: usize, all: bool, axis: Axis) -> Vec<bool> {
    let mut out = vec![false; w * h];
    let (lines, len) = match axis {
        Axis::Row => (h, w),
        Axis::Col => (w, h),
    };
    let index = |line: usize, k: usize| match axis {
        Axis::Row => line * w + k,
        Axis::Col => k * w + line,
    };
    let mut prefix = vec![0usize; len + 1];
    for line in 0..lines {
        for k in 0..len {
            prefix[k + 1] = prefix[k] + usize::from(src[index(line, k)]);
        }
        for k in 0..len {
            let lo = k.saturating_sub(r);
            let hi = (k + r + 1).min(len);
            let set = prefix[hi] - prefix[lo];
            out[index(line, k)] = if all {
                // Window clipped by the border includes background outside.
                set == 2 * r + 1
            } else {
                set > 0
            };
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn brute(mask: &BinaryMask, r: usize, all: bool) -> BinaryMask {
        let r = r as i64;
        BinaryMask::from_fn(mask.width(), mask.height(), |x, y| {
            let mut any = false;
            let mut every = true;
            for dy in -r..=r {
                for dx in -r..=r {
                    let v = mask.get_or_false(x as i64 + dx, y as i64 + dy);
                    any |= v;
                    every &= v;
                }
            }
            if all {
                every
            } else {
                any
            }
        })
    }

    #[test]
    fn dilate_empty_is_empty() {
        let m = BinaryMask::empty(6, 6);
        assert!(dilate(&m, 2).is_empty());
    }

    #[test]
    fn erode_full_removes_border_ring() {
        let m = BinaryMask::full(7, 6);
        let e = erode(&m, 1);
        assert_eq!(e.count(), 5 * 4);
        assert!(!e.get(0, 3));
        assert!(e.get(1, 1));
    }

    #[test]
    fn single_pixel_dilates_to_block() {
        let mut m = BinaryMask::empty(7, 7);
        m.set(3, 3, true);
        let d = dilate(&m, 1);
        let expected = BinaryMask::from_fn(7, 7, |x, y| (2..=4).contains(&x) && (2..=4).contains(&y));
        assert_eq!(d, expected);
    }

    #[test]
    fn zero_radius_rejected() {
        assert!(morphology(&BinaryMask::empty(2, 2), MorphOp::Open, 0).is_err());
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = Rng::new(4);
        for _ in 0..50 {
            let m = BinaryMask::from_fn(13, 11, |_, _| rng.uniform() < 0.6);
            for r in 1..=2 {
                assert_eq!(erode(&m, r), brute(&m, r, true));
                assert_eq!(dilate(&m, r), brute(&m, r, false));
            }
        }
    }

    #[test]
    fn open_and_close_idempotent() {
        let mut rng = Rng::new(8);
        for _ in 0..100 {
            let m = BinaryMask::from_fn(16, 16, |_, _| rng.uniform() < 0.5);
            for op in [MorphOp::Open, MorphOp::Close] {
                let once = morphology(&m, op, 1).unwrap();
                let twice = morphology(&once, op, 1).unwrap();
                assert_eq!(once, twice, "{op:?}");
            }
        }
    }
}

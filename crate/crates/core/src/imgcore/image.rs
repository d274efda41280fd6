use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major intensity field with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_len(width, height, data.len())?;
        if let Some((i, v)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0 || **v > 1.0)
        {
            return Err(Error::InvalidImage(format!(
                "value {v} at index {i} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!((0.0..=1.0).contains(&value));
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    /// Builds an image from a per-pixel function; results are clamped to `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let v = f(x, y);
                assert!(!v.is_nan(), "NaN intensity at ({x}, {y})");
                data.push(v.clamp(0.0, 1.0));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        assert!(value.is_finite() && (0.0..=1.0).contains(&value));
        self.data[y * self.width + x] = value;
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len().max(1) as f64
    }

    pub fn std(&self) -> f64 {
        let m = self.mean();
        (self.data.iter().map(|v| (v - m).powi(2)).sum::<f64>() / self.data.len().max(1) as f64)
            .sqrt()
    }

    pub fn same_dims<T: Raster>(&self, other: &T) -> bool {
        self.width == other.width() && self.height == other.height()
    }
}

/// Row-major binary label field. `true` is foreground (groove interior).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        check_len(width, height, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![true; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    /// Like [`get`](Self::get) but `false` outside the raster.
    #[inline]
    pub fn get_or_false(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.data[y as usize * self.width + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.data[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    /// Coordinates of foreground pixels in raster order.
    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % w, i / w))
    }

    pub fn union(&self, other: &BinaryMask) -> BinaryMask {
        assert!(self.same_dims(other));
        BinaryMask {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| *a || *b)
                .collect(),
        }
    }

    pub fn intersection_count(&self, other: &BinaryMask) -> usize {
        assert!(self.same_dims(other));
        self.data
            .iter()
            .zip(&other.data)
            .filter(|(a, b)| **a && **b)
            .count()
    }

    /// Shift the mask content by `(dx, dy)`; pixels shifted in from outside are background.
    pub fn translated(&self, dx: i64, dy: i64) -> BinaryMask {
        BinaryMask::from_fn(self.width, self.height, |x, y| {
            self.get_or_false(x as i64 - dx, y as i64 - dy)
        })
    }

    pub fn same_dims<T: Raster>(&self, other: &T) -> bool {
        self.width == other.width() && self.height == other.height()
    }
}

fn check_len(width: usize, height: usize, len: usize) -> Result<()> {
    let expected = width
        .checked_mul(height)
        .ok_or(Error::DimensionOverflow {
            width: width as u64,
            height: height as u64,
        })?;
    if expected != len {
        return Err(Error::InvalidImage(format!(
            "{width}x{height} raster needs {expected} values, got {len}"
        )));
    }
    Ok(())
}

/// Anything with raster dimensions.
pub trait Raster {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
}

impl Raster for GrayImage {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
}

impl Raster for BinaryMask {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
}

/// A raster that can be read as a real-valued field (masks read as 0/1).
pub trait ScalarField: Raster {
    fn value(&self, x: usize, y: usize) -> f64;
}

impl ScalarField for GrayImage {
    #[inline]
    fn value(&self, x: usize, y: usize) -> f64 {
        self.get(x, y)
    }
}

impl ScalarField for BinaryMask {
    #[inline]
    fn value(&self, x: usize, y: usize) -> f64 {
        if self.get(x, y) {
            1.0
        } else {
            0.0
        }
    }
}

/// Half-open pixel rectangle `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Rect {
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn full<T: Raster>(r: &T) -> Self {
        Self::new(0, 0, r.width(), r.height())
    }

    pub fn width(&self) -> usize {
        self.x1.saturating_sub(self.x0)
    }

    pub fn height(&self) -> usize {
        self.y1.saturating_sub(self.y0)
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn is_valid_in(&self, width: usize, height: usize) -> bool {
        self.x0 < self.x1 && self.y0 < self.y1 && self.x1 <= width && self.y1 <= height
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.y0 < other.y1 && other.y0 < self.y1
    }

    /// Grow by `margin` on every side, clamped to `[0, width) × [0, height)`.
    pub fn inflated(&self, margin: usize, width: usize, height: usize) -> Rect {
        Rect {
            x0: self.x0.saturating_sub(margin),
            y0: self.y0.saturating_sub(margin),
            x1: (self.x1 + margin).min(width),
            y1: (self.y1 + margin).min(height),
        }
    }
}

/// Sub-pixel point (column `x`, row `y`). Also used as a 2-vector.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PointF {
    pub x: f64,
    pub y: f64,
}

pub type Vec2 = PointF;

impl PointF {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: PointF) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 2D cross product.
    pub fn cross(self, o: PointF) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn normalized(self) -> Option<PointF> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| PointF::new(self.x / n, self.y / n))
    }

    /// Rotate by `angle` radians (counterclockwise in x/y coordinates).
    pub fn rotated(self, angle: f64) -> PointF {
        let (s, c) = angle.sin_cos();
        PointF::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn distance(self, o: PointF) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for PointF {
    type Output = PointF;
    fn add(self, o: PointF) -> PointF {
        PointF::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for PointF {
    type Output = PointF;
    fn sub(self, o: PointF) -> PointF {
        PointF::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for PointF {
    type Output = PointF;
    fn mul(self, k: f64) -> PointF {
        PointF::new(self.x * k, self.y * k)
    }
}

impl Neg for PointF {
    type Output = PointF;
    fn neg(self) -> PointF {
        PointF::new(-self.x, -self.y)
    }
}

use super::image::{PointF, Vec2};
use crate::error::{Error, Result};

/// Infinite line through `point` with unit `direction`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub point: PointF,
    pub direction: Vec2,
}

impl Line {
    /// Unit normal, the direction rotated by +90°.
    pub fn normal(&self) -> Vec2 {
        Vec2::new(-self.direction.y, self.direction.x)
    }

    pub fn signed_offset(&self, p: PointF) -> f64 {
        (p - self.point).dot(self.normal())
    }

    pub fn position(&self, p: PointF) -> f64 {
        (p - self.point).dot(self.direction)
    }

    pub fn at(&self, s: f64) -> PointF {
        self.point + self.direction * s
    }
}

/// Total-least-squares line: first principal axis of the centred points.
pub fn fit_line_ls(points: &[PointF]) -> Result<Line> {
    if points.len() < 2 {
        return Err(Error::Degenerate(format!(
            "line fit needs 2 points, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = points.iter().map(|p| p.y).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p.x - cx, p.y - cy);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx + syy <= f64::EPSILON * n {
        return Err(Error::Degenerate("all points coincide".into()));
    }
    // Major-axis angle of the 2x2 scatter matrix.
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let direction = Vec2::new(theta.cos(), theta.sin());
    Ok(Line {
        point: PointF::new(cx, cy),
        direction,
    })
}

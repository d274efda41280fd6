use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pattern::{build_pattern, Polyline};
use super::rough::gen_rough_edge;
use super::spec::SynthSpec;
use crate::error::Result;
use crate::imgcore::{gaussian_blur, BinaryMask, GrayImage, PointF, Vec2};
use crate::rng::Rng;

pub const LEVEL_INSIDE: f64 = 0.25;
pub const LEVEL_OUTSIDE: f64 = 0.45;
const LEVEL_MID: f64 = 0.5 * (LEVEL_INSIDE + LEVEL_OUTSIDE);

/// Signed outward displacements of one groove edge, sampled by arc length
/// along the centreline starting at `anchor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeTruth {
    pub line: usize,
    /// +1 for the left side of travel, −1 for the right.
    pub side: i8,
    pub spacing: f64,
    pub anchor: PointF,
    pub displacements: Vec<f64>,
}

impl EdgeTruth {
    pub fn displacement_at(&self, arc: f64) -> f64 {
        let n = self.displacements.len();
        if n == 0 {
            return 0.0;
        }
        let u = (arc / self.spacing).clamp(0.0, (n - 1) as f64);
        let i = (u.floor() as usize).min(n.saturating_sub(2));
        let f = u - i as f64;
        if n == 1 {
            return self.displacements[0];
        }
        self.displacements[i] * (1.0 - f) + self.displacements[i + 1] * f
    }
}

#[derive(Debug, Clone)]
pub struct SynthSample {
    pub spec: SynthSpec,
    pub lines: Vec<Polyline>,
    pub edges: Vec<EdgeTruth>,
    pub layout: BinaryMask,
    pub gt_mask: BinaryMask,
    pub sem: GrayImage,
}

impl SynthSample {
    fn half_width(&self) -> f64 {
        0.5 * (self.spec.line_width + self.spec.process_bias)
    }

    /// Sub-pixel position of edge sample `k`.
    pub fn edge_point(&self, edge: &EdgeTruth, k: usize) -> PointF {
        let line = &self.lines[edge.line];
        let (p, left) = line.at(k as f64 * edge.spacing);
        p + left * (f64::from(edge.side) * (self.half_width() + edge.displacements[k]))
    }

    /// Displacements of samples whose edge point lies at least `margin` px
    /// inside the image.
    pub fn visible_displacements(&self, edge: &EdgeTruth, margin: f64) -> Vec<f64> {
        let size = self.spec.image_size as f64;
        let total = self.lines[edge.line].length();
        (0..edge.displacements.len())
            .filter(|&k| (k as f64) * edge.spacing <= total)
            .filter(|&k| {
                let p = self.edge_point(edge, k);
                p.x >= margin && p.y >= margin && p.x <= size - 1.0 - margin && p.y <= size - 1.0 - margin
            })
            .map(|k| edge.displacements[k])
            .collect()
    }
}

/// Signed distance to the nearest groove boundary (negative inside) and the
/// tangent of the closest centreline.
fn field(lines: &[Polyline], edges: Option<&[EdgeTruth]>, half_width: f64, q: PointF) -> (f64, Vec2) {
    let mut best = (f64::INFINITY, Vec2::new(1.0, 0.0));
    for (i, line) in lines.iter().enumerate() {
        let nr = line.nearest(q);
        let e = match edges {
            Some(edges) => {
                let idx = 2 * i + usize::from(nr.side < 0.0);
                edges[idx].displacement_at(nr.arc)
            }
            None => 0.0,
        };
        let hw = half_width + e;
        let lateral = nr.distance - hw;
        let sd = if nr.beyond_end > 0.0 {
            if lateral <= 0.0 {
                nr.beyond_end
            } else {
                lateral.hypot(nr.beyond_end)
            }
        } else if lateral < 0.0 {
            lateral.max(-nr.to_end)
        } else {
            lateral
        };
        if sd < best.0 {
            best = (sd, nr.tangent);
        }
    }
    best
}

fn rasterize_field(size: usize, f: impl Fn(PointF) -> (f64, Vec2) + Sync) -> Vec<(f64, Vec2)> {
    (0..size * size)
        .into_par_iter()
        .map(|i| f(PointF::new((i % size) as f64, (i / size) as f64)))
        .collect()
}

pub fn gen_sample(spec: &SynthSpec) -> Result<SynthSample> {
    spec.validate()?;
    let size = spec.image_size;
    let mut rng = Rng::new(spec.seed);
    let phase = rng.uniform();
    let lines = build_pattern(spec, phase)?;

    // displacements are clipped so a groove never pinches off or merges
    let limit = 0.45 * (spec.line_width + spec.process_bias).min(spec.pitch - spec.line_width - spec.process_bias);
    let mut edges = Vec::with_capacity(2 * lines.len());
    for (i, line) in lines.iter().enumerate() {
        let n = line.length().ceil() as usize + 2;
        for side in [1i8, -1] {
            let seed = rng.fork_seed();
            let mut displacements = gen_rough_edge(n, spec.roughness_sigma, spec.roughness_corr_len, seed);
            for d in &mut displacements {
                *d = d.clamp(-limit, limit);
            }
            edges.push(EdgeTruth {
                line: i,
                side,
                spacing: 1.0,
                anchor: line.points[0],
                displacements,
            });
        }
    }
    let noise_seed = rng.fork_seed();

    let layout_field = rasterize_field(size, |q| field(&lines, None, 0.5 * spec.line_width, q));
    let gt_field = rasterize_field(size, |q| {
        field(&lines, Some(&edges), 0.5 * (spec.line_width + spec.process_bias), q)
    });
    let layout = BinaryMask::from_fn(size, size, |x, y| layout_field[y * size + x].0 <= 0.0);
    let gt_mask = BinaryMask::from_fn(size, size, |x, y| gt_field[y * size + x].0 <= 0.0);

    let bloom_k = if spec.bloom_width > 0.0 {
        4.0 * std::f64::consts::LN_2 / (spec.bloom_width * spec.bloom_width)
    } else {
        f64::INFINITY
    };
    let raw = GrayImage::from_fn(size, size, |x, y| {
        let sd = gt_field[y * size + x].0;
        let coverage = (0.5 - sd).clamp(0.0, 1.0);
        let base = LEVEL_OUTSIDE - (LEVEL_OUTSIDE - LEVEL_INSIDE) * coverage;
        let bloom = if bloom_k.is_finite() {
            spec.bloom_gain * (-bloom_k * sd * sd).exp()
        } else {
            0.0
        };
        base + bloom
    });
    let blurred = gaussian_blur(&raw, spec.blur_sigma + spec.defocus_extra_blur);
    let cone = spec.contrast_cone_deg.to_radians().sin();
    let mut noise = Rng::new(noise_seed);
    let sem = GrayImage::from_fn(size, size, |x, y| {
        let (_, t) = gt_field[y * size + x];
        let mut v = blurred.get(x, y);
        if t.y.abs() <= cone {
            v = LEVEL_MID + spec.vertical_contrast * (v - LEVEL_MID);
        }
        if spec.noise_sigma > 0.0 {
            v += spec.noise_sigma * noise.normal();
        }
        v
    });

    Ok(SynthSample {
        spec: spec.clone(),
        lines,
        edges,
        layout,
        gt_mask,
        sem,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::{count_components, Connectivity};
    use crate::synthgen::Pattern;

    fn quiet(spec: SynthSpec) -> SynthSpec {
        SynthSpec {
            roughness_sigma: 0.0,
            noise_sigma: 0.0,
            process_bias: 0.0,
            ..spec
        }
    }

    #[test]
    fn unperturbed_gt_equals_layout() {
        for pattern in [Pattern::ParallelLines, Pattern::Elbows, Pattern::Serpentine] {
            let s = gen_sample(&quiet(SynthSpec {
                image_size: 128,
                pattern,
                seed: 3,
                ..SynthSpec::default()
            }))
            .unwrap();
            assert_eq!(s.gt_mask, s.layout, "{pattern:?}");
            assert!(s.layout.count() > 1000);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = SynthSpec {
            image_size: 96,
            seed: 11,
            ..SynthSpec::default()
        };
        let a = gen_sample(&spec).unwrap();
        let b = gen_sample(&spec).unwrap();
        assert_eq!(a.sem, b.sem);
        assert_eq!(a.gt_mask, b.gt_mask);
        let c = gen_sample(&SynthSpec { seed: 12, ..spec }).unwrap();
        assert_ne!(a.sem, c.sem);
    }

    #[test]
    fn brightest_pixel_near_true_edge() {
        // vertical lines, no roughness: edges at centre ± w/2
        for orientation in [90.0, 0.0] {
            let spec = quiet(SynthSpec {
                image_size: 128,
                orientation,
                seed: 5,
                ..SynthSpec::default()
            });
            let s = gen_sample(&spec).unwrap();
            let tol = spec.blur_sigma + 1.0;
            let mut checked = 0;
            for line in &s.lines {
                let (c, left) = line.at(line.length() / 2.0);
                for side in [-1.0, 1.0] {
                    let edge = c + left * (side * spec.line_width / 2.0);
                    let coord = if orientation == 90.0 { edge.x } else { edge.y };
                    if !(12.0..116.0).contains(&coord) {
                        continue;
                    }
                    // slice along the normal through the middle of the image
                    let mut best = (f64::NEG_INFINITY, 0.0);
                    for k in -8..=8 {
                        let p = edge + left * k as f64;
                        let (x, y) = (p.x.round() as usize, p.y.round() as usize);
                        let (x, y) = if orientation == 90.0 { (x, 64) } else { (64, y) };
                        let v = s.sem.get(x, y);
                        let pos = if orientation == 90.0 { x as f64 } else { y as f64 };
                        if v > best.0 {
                            best = (v, pos);
                        }
                    }
                    assert!((best.1 - coord).abs() <= tol, "orientation {orientation}: peak {} edge {coord}", best.1);
                    checked += 1;
                }
            }
            assert!(checked >= 6);
        }
    }

    #[test]
    fn moderate_roughness_keeps_components() {
        for seed in 0..6 {
            let spec = SynthSpec {
                image_size: 128,
                roughness_sigma: 14.0 / 4.0 - 0.5,
                seed,
                pattern: [Pattern::ParallelLines, Pattern::Elbows, Pattern::Serpentine][seed as usize % 3],
                ..SynthSpec::default()
            };
            let s = gen_sample(&spec).unwrap();
            assert_eq!(
                count_components(&s.gt_mask, Connectivity::Eight),
                count_components(&s.layout, Connectivity::Eight),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn edge_band_is_brighter() {
        let spec = SynthSpec {
            image_size: 128,
            bloom_gain: 0.3,
            noise_sigma: 0.05,
            seed: 9,
            ..SynthSpec::default()
        };
        let s = gen_sample(&spec).unwrap();
        let near = crate::imgcore::dilate(&s.gt_mask, 1);
        let inner = crate::imgcore::erode(&s.gt_mask, 1);
        let (mut band, mut nb, mut rest, mut nr) = (0.0, 0, 0.0, 0);
        for y in 0..128 {
            for x in 0..128 {
                let v = s.sem.get(x, y);
                if near.get(x, y) && !inner.get(x, y) {
                    band += v;
                    nb += 1;
                } else {
                    rest += v;
                    nr += 1;
                }
            }
        }
        assert!(band / nb as f64 - rest / nr as f64 >= 0.1);
    }

    #[test]
    fn edge_truth_reproduces_gt_boundary() {
        let spec = SynthSpec {
            image_size: 128,
            roughness_sigma: 1.5,
            noise_sigma: 0.0,
            seed: 21,
            ..SynthSpec::default()
        };
        let s = gen_sample(&spec).unwrap();
        // the pixel just inside each edge point is foreground, just outside is background
        let mut checked = 0;
        for edge in &s.edges {
            let (_, left) = s.lines[edge.line].at(0.0);
            let outward = left * f64::from(edge.side);
            for k in (0..edge.displacements.len()).step_by(7) {
                let p = s.edge_point(edge, k);
                let (pin, pout) = (p - outward * 1.5, p + outward * 1.5);
                let inb = |q: PointF| q.x >= 0.0 && q.y >= 0.0 && q.x <= 127.0 && q.y <= 127.0;
                if !inb(pin) || !inb(pout) {
                    continue;
                }
                let (xi, yi) = (pin.x.round() as usize, pin.y.round() as usize);
                let (xo, yo) = (pout.x.round() as usize, pout.y.round() as usize);
                if (pin.x - xi as f64).abs() > 0.3 || (pout.x - xo as f64).abs() > 0.3 {
                    continue;
                }
                assert!(s.gt_mask.get(xi, yi), "inside {pin:?}");
                assert!(!s.gt_mask.get(xo, yo), "outside {pout:?}");
                checked += 1;
            }
        }
        assert!(checked > 20, "{checked}");
    }
}

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::image::{BinaryMask, Rect};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    pub(crate) fn offsets(self) -> &'static [(i64, i64)] {
        const FOUR: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
        const EIGHT: [(i64, i64); 8] = [
            (1, 0),
            (-1, 0),
            (0, 1),
            (0, -1),
            (1, 1),
            (1, -1),
            (-1, 1),
            (-1, -1),
        ];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }
}

/// Label image: 0 is background, components are numbered `1..=count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labels {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    count: usize,
}

impl Labels {
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    /// Pixel count per label; index 0 holds the background count.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.count + 1];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }

    /// Tight bounding box per label (index `label - 1`).
    pub fn bounding_boxes(&self) -> Vec<Rect> {
        let mut boxes = vec![Rect::new(usize::MAX, usize::MAX, 0, 0); self.count];
        for y in 0..self.height {
            for x in 0..self.width {
                let l = self.get(x, y);
                if l > 0 {
                    let b = &mut boxes[l as usize - 1];
                    b.x0 = b.x0.min(x);
                    b.y0 = b.y0.min(y);
                    b.x1 = b.x1.max(x + 1);
                    b.y1 = b.y1.max(y + 1);
                }
            }
        }
        boxes
    }

    pub fn mask_of(&self, label: u32) -> BinaryMask {
        BinaryMask::new(
            self.width,
            self.height,
            self.labels.iter().map(|&l| l == label).collect(),
        )
        .expect("label raster dimensions are consistent")
    }
}

/// Label connected foreground regions. Labels follow first-touch raster order.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> Labels {
    let (w, h) = (mask.width(), mask.height());
    let mut labels = vec![0u32; w * h];
    let mut count = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !mask.data()[start] || labels[start] != 0 {
            continue;
        }
        count += 1;
        labels[start] = count;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for &(dx, dy) in connectivity.offsets() {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if mask.data()[j] && labels[j] == 0 {
                    labels[j] = count;
                    queue.push_back(j);
                }
            }
        }
    }
    Labels {
        width: w,
        height: h,
        labels,
        count: count as usize,
    }
}

pub fn count_components(mask: &BinaryMask, connectivity: Connectivity) -> usize {
    connected_components(mask, connectivity).count()
}

/// Keep only components with at least `min_size` pixels.
pub fn remove_small_components(
    mask: &BinaryMask,
    connectivity: Connectivity,
    min_size: usize,
) -> BinaryMask {
    let labels = connected_components(mask, connectivity);
    let sizes = labels.sizes();
    BinaryMask::new(
        mask.width(),
        mask.height(),
        labels
            .as_slice()
            .iter()
            .map(|&l| l > 0 && sizes[l as usize] >= min_size)
            .collect(),
    )
    .expect("dimensions preserved")
}

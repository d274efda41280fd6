//! Topology-preserving thinning.
//!
//! Border pixels are peeled one direction at a time (north, south, east,
//! west), one layer per direction. A pixel is deleted only if it is simple for 8-connected foreground
//! (Yokoi connectivity number 1) and has at least two foreground neighbours,
//! and deletions are applied immediately, so components never split or vanish.

use super::image::BinaryMask;

// Neighbour order: E, NE, N, NW, W, SW, S, SE (counterclockwise on screen).
const RING: [(i64, i64); 8] = [
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

fn ring(mask: &BinaryMask, x: usize, y: usize) -> [bool; 8] {
    let mut r = [false; 8];
    for (k, (dx, dy)) in RING.iter().enumerate() {
        r[k] = mask.get_or_false(x as i64 + dx, y as i64 + dy);
    }
    r
}

/// Yokoi connectivity number for 8-connected foreground.
fn connectivity_number(r: &[bool; 8]) -> usize {
    let inv = |k: usize| usize::from(!r[k % 8]);
    [0usize, 2, 4, 6]
        .iter()
        .map(|&k| inv(k) - inv(k) * inv(k + 1) * inv(k + 2))
        .sum()
}

pub fn neighbour_count(mask: &BinaryMask, x: usize, y: usize) -> usize {
    ring(mask, x, y).iter().filter(|&&b| b).count()
}

pub fn skeletonize(mask: &BinaryMask) -> BinaryMask {
    let mut skel = mask.clone();
    // direction probe: N, S, E, W
    let probes: [(i64, i64); 4] = [(0, -1), (0, 1), (1, 0), (-1, 0)];
    loop {
        let mut changed = false;
        for &(px, py) in &probes {
            // border pixels for this direction are fixed at the start of the
            // sub-iteration so only one layer is peeled per direction
            let candidates: Vec<(usize, usize)> = skel
                .foreground()
                .filter(|&(x, y)| !skel.get_or_false(x as i64 + px, y as i64 + py))
                .collect();
            for (x, y) in candidates {
                let r = ring(&skel, x, y);
                let neighbours = r.iter().filter(|&&b| b).count();
                if neighbours >= 2 && connectivity_number(&r) == 1 {
                    skel.set(x, y, false);
                    changed = true;
                }
            }
        }
        if !changed {
            return skel;
        }
    }
}

/// Remove side branches shorter than `max_len` pixels that hang off a junction.
/// Branches that end at another endpoint (isolated arcs) are kept whole.
pub fn prune_spurs(skel: &BinaryMask, max_len: usize) -> BinaryMask {
    let mut out = skel.clone();
    let (w, h) = (skel.width(), skel.height());
    let mut endpoints = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if skel.get(x, y) && neighbour_count(skel, x, y) == 1 {
                endpoints.push((x, y));
            }
        }
    }
    for (ex, ey) in endpoints {
        let mut path = vec![(ex, ey)];
        let mut cur = (ex, ey);
        let mut junction = None;
        while path.len() <= max_len {
            let nexts: Vec<(usize, usize)> = RING
                .iter()
                .map(|(dx, dy)| (cur.0 as i64 + dx, cur.1 as i64 + dy))
                .filter(|&(nx, ny)| skel.get_or_false(nx, ny))
                .map(|(nx, ny)| (nx as usize, ny as usize))
                .filter(|p| !path.contains(p))
                .collect();
            if nexts.is_empty() {
                break;
            }
            if nexts.len() > 1 || neighbour_count(skel, nexts[0].0, nexts[0].1) >= 3 {
                junction = Some(nexts[0]);
                break;
            }
            cur = nexts[0];
            path.push(cur);
        }
        if let (Some((jx, jy)), true) = (junction, path.len() < max_len) {
            for (x, y) in path {
                out.set(x, y, false);
            }
            // a junction pixel left as a bump on the main line is redundant
            let r = ring(&out, jx, jy);
            if out.get(jx, jy) && r.iter().filter(|&&b| b).count() >= 2 && connectivity_number(&r) == 1 {
                out.set(jx, jy, false);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::{count_components, Connectivity};
    use crate::rng::Rng;

    #[test]
    fn bar_thins_to_middle_row() {
        let m = BinaryMask::from_fn(110, 9, |x, y| (5..105).contains(&x) && (3..6).contains(&y));
        let s = skeletonize(&m);
        // away from the bar ends the skeleton is exactly the middle row
        for (x, y) in s.foreground().filter(|&(x, _)| (9..101).contains(&x)) {
            assert_eq!(y, 4, "pixel ({x},{y}) off the middle row");
        }
        for x in 9..101 {
            assert!(s.get(x, 4), "gap at {x}");
        }
    }

    #[test]
    fn single_pixel_is_fixed_point() {
        let mut m = BinaryMask::empty(5, 5);
        m.set(2, 2, true);
        assert_eq!(skeletonize(&m), m);
    }

    #[test]
    fn one_pixel_wide() {
        let m = BinaryMask::from_fn(40, 40, |x, y| (5..35).contains(&x) && (10..22).contains(&y));
        let s = skeletonize(&m);
        // no 2x2 block survives
        for y in 0..39 {
            for x in 0..39 {
                let block = s.get(x, y) && s.get(x + 1, y) && s.get(x, y + 1) && s.get(x + 1, y + 1);
                assert!(!block);
            }
        }
    }

    #[test]
    fn preserves_component_count_on_random_blobs() {
        let mut rng = Rng::new(17);
        for _ in 0..100 {
            let m = BinaryMask::from_fn(24, 24, |_, _| rng.uniform() < 0.55);
            let s = skeletonize(&m);
            assert_eq!(
                count_components(&m, Connectivity::Eight),
                count_components(&s, Connectivity::Eight)
            );
            for (x, y) in s.foreground() {
                assert!(m.get(x, y));
            }
        }
    }

    #[test]
    fn prune_removes_short_spur_keeps_line() {
        let mut m = BinaryMask::from_fn(40, 20, |x, y| y == 10 && (2..38).contains(&x));
        for k in 1..4 {
            m.set(20, 10 - k, true);
        }
        let p = prune_spurs(&m, 6);
        assert_eq!(p.count(), 36);
        let line = BinaryMask::from_fn(40, 3, |x, y| y == 1 && (5..9).contains(&x));
        assert_eq!(prune_spurs(&line, 10), line);
    }
}

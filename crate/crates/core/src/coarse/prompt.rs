use crate::error::Result;
use crate::imgcore::{
    connected_components, morphology, otsu_threshold, threshold_above, BinaryMask, Connectivity, GrayImage, MorphOp, Rect,
};

/// Half-open pixel box used as a segmentation prompt.
pub type BBox = Rect;

pub const DEFAULT_MIN_AREA: usize = 25;
pub const DEFAULT_MARGIN: usize = 3;

/// One box per layout component of at least `min_area` pixels, grown by `margin`.
pub fn bboxes_from_layout(layout: &BinaryMask, min_area: usize, margin: usize) -> Vec<BBox> {
    let labels = connected_components(layout, Connectivity::Eight);
    let sizes = labels.sizes();
    labels
        .bounding_boxes()
        .into_iter()
        .enumerate()
        .filter(|(i, _)| sizes[i + 1] >= min_area)
        .map(|(_, b)| b.inflated(margin, layout.width(), layout.height()))
        .collect()
}

/// Boxes from a gray layout image thresholded with Otsu; a flat image has none.
pub fn bboxes_from_gray_layout(layout: &GrayImage, min_area: usize, margin: usize) -> Vec<BBox> {
    match otsu_threshold(layout, None) {
        Ok(t) => bboxes_from_layout(&threshold_above(layout, t), min_area, margin),
        Err(_) => Vec::new(),
    }
}

fn segment_box(image: &GrayImage, b: &BBox) -> Result<Option<BinaryMask>> {
    let t = match otsu_threshold(image, Some(*b)) {
        Ok(t) => t,
        Err(crate::error::Error::DegenerateHistogram) => {
            log::debug!("flat histogram in box {b:?}");
            return Ok(None);
        }
        Err(e) => return Err(e),
    };
    let (w, h) = (image.width(), image.height());
    let dark = BinaryMask::from_fn(w, h, |x, y| b.contains(x, y) && image.get(x, y) <= t);
    let opened = morphology(&dark, MorphOp::Open, 1)?;
    let labels = connected_components(&opened, Connectivity::Eight);
    if labels.count() == 0 {
        return Ok(None);
    }
    let sizes = labels.sizes();
    // central half of the box
    let (qw, qh) = (b.width() / 4, b.height() / 4);
    let centre = Rect::new(b.x0 + qw, b.y0 + qh, b.x1 - qw, b.y1 - qh);
    let mut touching = vec![false; labels.count() + 1];
    for y in centre.y0..centre.y1 {
        for x in centre.x0..centre.x1 {
            touching[labels.get(x, y) as usize] = true;
        }
    }
    let pick = |only_touching: bool| {
        (1..=labels.count())
            .filter(|&l| !only_touching || touching[l])
            .max_by_key(|&l| (sizes[l], std::cmp::Reverse(l)))
    };
    let label = pick(true).or_else(|| pick(false)).expect("at least one component");
    Ok(Some(labels.mask_of(label as u32)))
}

/// Per box: Otsu inside the box, darker class, opening of radius 1, then the
/// largest component touching the central half of the box (largest overall if
/// none does). The result is the union over boxes.
pub fn prompt_segment_classical(image: &GrayImage, boxes: &[BBox]) -> Result<BinaryMask> {
    let mut out = BinaryMask::empty(image.width(), image.height());
    for b in boxes {
        if !b.is_valid_in(image.width(), image.height()) || b.area() == 0 {
            return Err(crate::error::Error::config("bbox", format!("{b:?} not inside the image")));
        }
        if let Some(m) = segment_box(image, b)? {
            out = out.union(&m);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_layout_no_boxes() {
        assert!(bboxes_from_layout(&BinaryMask::empty(30, 30), 25, 3).is_empty());
    }

    #[test]
    fn single_bar_box() {
        let m = BinaryMask::from_fn(64, 64, |x, y| (5..15).contains(&x) && (5..45).contains(&y));
        assert_eq!(bboxes_from_layout(&m, 25, 3), vec![Rect::new(2, 2, 18, 48)]);
    }

    #[test]
    fn two_bars_two_disjoint_boxes() {
        let m = BinaryMask::from_fn(64, 64, |x, y| (5..50).contains(&y) && ((5..15).contains(&x) || (30..40).contains(&x)));
        let b = bboxes_from_layout(&m, 25, 3);
        assert_eq!(b.len(), 2);
        assert!(!b[0].intersects(&b[1]));
        let g = GrayImage::from_fn(64, 64, |x, y| if m.get(x, y) { 1.0 } else { 0.0 });
        assert_eq!(bboxes_from_gray_layout(&g, 25, 3), b);
    }

    #[test]
    fn small_components_skipped() {
        let m = BinaryMask::from_fn(30, 30, |x, y| (2..6).contains(&x) && (2..6).contains(&y));
        assert!(bboxes_from_layout(&m, 25, 3).is_empty());
    }

    #[test]
    fn no_boxes_empty_mask() {
        let img = GrayImage::filled(20, 20, 0.5);
        assert!(prompt_segment_classical(&img, &[]).unwrap().is_empty());
    }

    #[test]
    fn flat_box_contributes_nothing() {
        let img = GrayImage::filled(20, 20, 0.5);
        assert!(prompt_segment_classical(&img, &[Rect::new(2, 2, 12, 12)]).unwrap().is_empty());
    }

    #[test]
    fn dark_groove_found_inside_box_only() {
        let img = GrayImage::from_fn(60, 60, |x, _| if (20..30).contains(&x) { 0.2 } else { 0.5 });
        let b = Rect::new(16, 5, 34, 55);
        let m = prompt_segment_classical(&img, &[b]).unwrap();
        let want = BinaryMask::from_fn(60, 60, |x, y| (20..30).contains(&x) && (5..55).contains(&y));
        assert_eq!(m, want);
    }
}

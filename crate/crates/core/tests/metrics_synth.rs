use lithoseg_core::imgcore::BinaryMask;
use lithoseg_core::metrics::{cd, edge_stats, esd, evaluate_pair, oscc, roughness, seg_metrics, ElecConfig, EvalConfig, RoughConfig};
use lithoseg_core::synthgen::{gen_sample, SynthSpec};
use proptest::prelude::*;

fn variance(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

#[test]
fn rasterized_roughness_tracks_edge_truth() {
    let spec = SynthSpec {
        image_size: 384,
        pitch: 48.0,
        line_width: 20.0,
        roughness_sigma: 2.0,
        roughness_corr_len: 10.0,
        seed: 77,
        ..SynthSpec::default()
    };
    let s = gen_sample(&spec).unwrap();
    let measured = roughness(&s.gt_mask, &RoughConfig::default()).unwrap();
    let mut num = 0.0;
    let mut n = 0usize;
    for e in &s.edges {
        let d = s.visible_displacements(e, 20.0);
        if d.len() < 32 {
            continue;
        }
        num += variance(&d) * d.len() as f64;
        n += d.len();
    }
    let realized = num / n as f64;
    let rel = (measured.r_eq2 - realized).abs() / realized;
    assert!(rel < 0.15, "measured {} realized {realized}", measured.r_eq2);
}

#[test]
fn straight_generator_line_has_exact_cd() {
    let spec = SynthSpec {
        line_width: 12.0,
        roughness_sigma: 0.0,
        seed: 3,
        ..SynthSpec::default()
    };
    let s = gen_sample(&spec).unwrap();
    let w = cd(&s.gt_mask, &ElecConfig::default()).unwrap();
    assert!((w - 12.0).abs() <= 0.6, "{w}");
}

#[test]
fn alternating_edge_truth_hand_values() {
    let e: Vec<f64> = (0..64).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let st = edge_stats(&e);
    assert_eq!((st.range, st.mean_abs, st.mean_sq), (2.0, 1.0, 1.0));
}

fn rough_sample(seed: u64) -> BinaryMask {
    gen_sample(&SynthSpec {
        image_size: 128,
        seed,
        ..SynthSpec::default()
    })
    .unwrap()
    .gt_mask
}

#[test]
fn pred_equal_gt_has_zero_errors() {
    let gt = rough_sample(5);
    let cfg = ElecConfig::default();
    assert_eq!(oscc(&gt, &gt, cfg.min_overlap).unwrap().total, 0);
    assert_eq!(esd(&gt, &gt, &cfg).unwrap(), 0);
    let r = evaluate_pair("x", &gt, &gt, &EvalConfig::default()).unwrap();
    assert_eq!(r.elec.cd_err, 0.0);
    assert_eq!(r.rough.unwrap().req2, 0.0);
}

fn mask_strategy() -> impl Strategy<Value = BinaryMask> {
    prop::collection::vec(any::<bool>(), 24 * 24).prop_map(|d| BinaryMask::new(24, 24, d).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn seg_identities(a in mask_strategy(), b in mask_strategy()) {
        let r = seg_metrics(&a, &b).unwrap();
        let s = seg_metrics(&b, &a).unwrap();
        prop_assert!((r.f1 - 2.0 * r.iou / (1.0 + r.iou)).abs() < 1e-9);
        prop_assert!(r.pa >= r.iou - 1e-12);
        prop_assert_eq!(r, s);
        let cfg = ElecConfig::default();
        prop_assert_eq!(oscc(&a, &b, 5).unwrap().total, oscc(&b, &a, 5).unwrap().total);
        prop_assert_eq!(esd(&a, &a, &cfg).unwrap(), 0);
    }

    #[test]
    fn translation_invariance(dx in -6i64..=6, dy in -6i64..=6, seed in 0u64..20) {
        let gt = rough_sample(seed);
        let pred = rough_sample(seed + 100);
        // pad so the shift never clips foreground
        let pad = |m: &BinaryMask| BinaryMask::from_fn(m.width() + 16, m.height() + 16, |x, y| {
            x >= 8 && y >= 8 && x - 8 < m.width() && y - 8 < m.height() && m.get(x - 8, y - 8)
        });
        let (g, p) = (pad(&gt), pad(&pred));
        let (gs, ps) = (g.translated(dx, dy), p.translated(dx, dy));
        let cfg = EvalConfig::default();
        let a = evaluate_pair("a", &p, &g, &cfg).unwrap();
        let b = evaluate_pair("a", &ps, &gs, &cfg).unwrap();
        prop_assert_eq!(a.seg, b.seg);
        prop_assert_eq!(a.elec.oscc, b.elec.oscc);
        prop_assert_eq!(a.elec.esd, b.elec.esd);
        prop_assert!((a.elec.cd_err - b.elec.cd_err).abs() < 1e-9);
        let (ra, rb) = (a.rough.unwrap(), b.rough.unwrap());
        prop_assert!((ra.req2 - rb.req2).abs() < 1e-9 && (ra.rw - rb.rw).abs() < 1e-9, "{:?} {:?}", ra, rb);
    }
}

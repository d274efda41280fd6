use criterion::{black_box, criterion_group, criterion_main, Criterion};
use lithoseg_core::coarse::{PatchMlpConfig, PatchMlpSegmenter, Segmenter};
use lithoseg_core::fine::{fine_layer_dims, refine_mask, RefineConfig};
use lithoseg_core::imgcore::trace_contours;
use lithoseg_core::metrics::{roughness, seg_metrics, RoughConfig};
use lithoseg_core::nnet::{Activation, MlpParams};
use lithoseg_core::synthgen::{gen_sample, SynthSpec};
use lithoseg_core::Rng;

fn hot_paths(c: &mut Criterion) {
    let spec = SynthSpec::default();
    let s = gen_sample(&spec).unwrap();
    let other = gen_sample(&SynthSpec { seed: spec.seed + 1, ..spec.clone() }).unwrap();

    c.bench_function("gen_sample", |b| b.iter(|| gen_sample(black_box(&spec)).unwrap()));
    c.bench_function("seg_metrics", |b| b.iter(|| seg_metrics(black_box(&s.gt_mask), &other.gt_mask).unwrap()));
    c.bench_function("trace_contours", |b| b.iter(|| trace_contours(black_box(&s.gt_mask))));
    c.bench_function("roughness", |b| {
        b.iter(|| roughness(black_box(&s.gt_mask), &RoughConfig::default()).unwrap())
    });

    let cfg = RefineConfig::default();
    let dims = fine_layer_dims(&cfg, &[64, 32]).unwrap();
    let params = MlpParams::init(&dims, Activation::Relu, 3).unwrap();
    let mut rng = Rng::new(9);
    let batch: Vec<f64> = (0..1024 * dims[0]).map(|_| rng.normal()).collect();
    c.bench_function("mlp_forward_1024", |b| b.iter(|| params.forward_batch(black_box(&batch), 1024).unwrap()));
    c.bench_function("refine_mask", |b| {
        b.iter(|| refine_mask(black_box(&s.gt_mask), &s.sem, &params, &cfg).unwrap())
    });

    let seg = PatchMlpSegmenter::new(PatchMlpConfig::default()).unwrap();
    c.bench_function("patch_mlp_predict", |b| b.iter(|| seg.predict(black_box(&s.sem)).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = hot_paths
}
criterion_main!(benches);

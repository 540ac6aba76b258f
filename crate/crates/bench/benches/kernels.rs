use std::hint::black_box;

use bkp_bench::{corpus, detections};
use bkp_core::associate::{bkp_associate, AssociateConfig};
use bkp_core::decode::{cell_len, TensorDump};
use bkp_core::metrics::{evaluate, EvalConfig};
use bkp_core::nms::{nms, Candidate, DetClass, NmsConfig};
use bkp_core::synth::SynthRng;
use bkp_core::ClassMap;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

fn decode(c: &mut Criterion) {
    let cmap = ClassMap::default();
    let mut rng = SynthRng::new(1, 0);
    let (gw, gh, anchors) = (40u32, 40u32, 3usize);
    let n = gw as usize * gh as usize * anchors * cell_len(cmap.len());
    let data: Vec<f64> = (0..n).map(|_| rng.range(-4.0, 4.0)).collect();
    let dump: TensorDump = serde_json::from_value(serde_json::json!({
        "num_parts": cmap.len(),
        "levels": [{"stride": 16, "grid_w": gw, "grid_h": gh, "anchors": [[1, 2], [2, 4], [4, 8]], "data": data}]
    }))
    .expect("well-formed dump");
    let mut g = c.benchmark_group("decode");
    g.throughput(Throughput::Elements(u64::from(gw * gh) * anchors as u64));
    g.bench_function("40x40x3", |b| b.iter(|| dump.decode(&cmap, 0.0).unwrap()));
    g.finish();
}

fn suppress(c: &mut Criterion) {
    let mut rng = SynthRng::new(2, 0);
    let mut g = c.benchmark_group("nms");
    for n in [100usize, 1000, 5000] {
        let cands: Vec<Candidate> = (0..n)
            .map(|i| {
                let b = bkp_core::BoundingBox::new(
                    rng.range(0.0, 640.0),
                    rng.range(0.0, 480.0),
                    rng.range(10.0, 120.0),
                    rng.range(10.0, 200.0),
                    rng.uniform(),
                )
                .unwrap();
                Candidate::new(
                    b,
                    if i % 3 == 0 {
                        DetClass::Body
                    } else {
                        DetClass::Part((i % 5) as u32)
                    },
                )
            })
            .collect();
        g.throughput(Throughput::Elements(n as u64));
        g.bench_with_input(BenchmarkId::from_parameter(n), &cands, |b, cands| {
            b.iter(|| nms(black_box(cands), &NmsConfig::default()))
        });
    }
    g.finish();
}

fn associate(c: &mut Criterion) {
    let cmap = ClassMap::default();
    let mut g = c.benchmark_group("associate");
    for people in [1usize, 7, 30] {
        let (_, pred) = corpus(1, people);
        let (bodies, parts) = detections(&pred[0]);
        g.throughput(Throughput::Elements(parts.len() as u64));
        g.bench_function(BenchmarkId::new("people", people), |b| {
            b.iter(|| {
                bkp_associate(
                    black_box(&bodies),
                    black_box(&parts),
                    &cmap,
                    &AssociateConfig::default(),
                )
            })
        });
    }
    g.finish();
}

fn evaluation(c: &mut Criterion) {
    let cmap = ClassMap::default();
    let (gt, pred) = corpus(100, 5);
    let cfg = EvalConfig::default();
    let mut g = c.benchmark_group("evaluate");
    g.sample_size(10);
    g.throughput(Throughput::Elements(gt.len() as u64));
    g.bench_function("100 scenes", |b| {
        b.iter(|| evaluate(&gt, &pred, &cmap, &cfg).unwrap())
    });
    g.finish();
}

criterion_group!(benches, decode, suppress, associate, evaluation);
criterion_main!(benches);

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use paraverify_core::submanifold::{build_point_frame, PointGeometry};
use paraverify_core::*;

fn example21_metric() -> MetricField {
    let chart = Chart::new("M", ["x1", "x2", "y1", "y2", "t"]).unwrap();
    let diag = ["x1^2", "x2^2", "-x1^2", "-x2^2", "1"]
        .iter()
        .map(|s| chart.parse(s).unwrap())
        .collect();
    MetricField::diagonal(diag, Signature::new(3, 2)).unwrap()
}

fn secant_immersion() -> Immersion {
    let src = Chart::new("S", ["v", "theta", "beta", "u"]).unwrap();
    let amb = Chart::new("M", ["x1", "x2", "y1", "y2", "t"]).unwrap();
    let comps = [
        "v*tan(theta)",
        "v*tan(beta)",
        "v*sec(theta)",
        "v*sec(beta)",
        "u",
    ]
    .iter()
    .map(|s| src.parse(s).unwrap())
    .collect();
    let flat = ["1", "1", "-1", "-1", "1"]
        .iter()
        .map(|s| amb.parse(s).unwrap())
        .collect();
    Immersion::new(
        src,
        amb,
        comps,
        MetricField::diagonal(flat, Signature::new(3, 2)).unwrap(),
    )
    .unwrap()
}

fn pointwise(c: &mut Criterion) {
    let g = example21_metric();
    let p = [1.2, 0.7, 0.3, -0.4, 0.1];
    c.bench_function("christoffel_5d", |b| {
        b.iter(|| christoffel(&g, black_box(&p)).unwrap())
    });

    let imm = secant_immersion();
    let q = [1.1, 0.5, 0.8, 0.2];
    c.bench_function("point_frame_4_in_5", |b| {
        b.iter(|| build_point_frame(&imm, black_box(&q)).unwrap())
    });

    let sc = builtin("example51").unwrap();
    let s = sc.structure.as_ref().unwrap();
    let m = sc.charts.iter().find(|c| c.name == s.chart).unwrap();
    let amb = Chart::new(&m.name, m.coords.clone()).unwrap();
    let parse = |v: &[String]| v.iter().map(|e| amb.parse(e).unwrap()).collect::<Vec<_>>();
    let st = ParacontactStructure::new(
        amb.clone(),
        TensorField::new(5, 1, 1, parse(&s.phi)).unwrap(),
        VectorField::new(parse(&s.xi)),
        TensorField::new(5, 0, 1, parse(&s.eta)).unwrap(),
        imm.metric().clone(),
    )
    .unwrap();
    let with_structure =
        Immersion::into_structure(imm.source().clone(), st, imm.components().to_vec()).unwrap();
    c.bench_function("tn_geometry_4_in_5", |b| {
        b.iter(|| PointGeometry::at(&with_structure, black_box(&q)).unwrap())
    });
}

fn scenarios(c: &mut Criterion) {
    let mut group = c.benchmark_group("scenario");
    group.sample_size(10);
    for name in ["example21", "synthetic_warped", "example51"] {
        let sc = builtin(name).unwrap();
        let cfg = sc.config(Some(20), None, None);
        group.bench_function(name, |b| b.iter(|| run_scenario(&sc, &cfg).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, pointwise, scenarios);
criterion_main!(benches);

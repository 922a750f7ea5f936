use paraverify_core::manifold::{
    metric_compatibility_residual, random_vector_field, torsion_residual,
};
use paraverify_core::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const NAMES: [&str; 3] = ["x", "y", "z"];

fn expr() -> impl Strategy<Value = ScalarExpr> {
    let leaf = prop_oneof![
        (0usize..3).prop_map(ScalarExpr::coord),
        (-2.0f64..2.0).prop_map(|c| ScalarExpr::constant((c * 100.0).round() / 100.0)),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| a / (ScalarExpr::constant(2.0) + b.cos())),
            inner.clone().prop_map(|a| a.sin()),
            inner.clone().prop_map(|a| a.cos()),
            inner.clone().prop_map(|a| a.sin().exp()),
            inner.clone().prop_map(|a| a.powi(2)),
        ]
    })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 3)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn hyperdual_matches_central_differences(e in expr(), p in point(), i in 0usize..3, j in 0usize..3) {
        let h = 1e-4;
        let f = |di: f64, dj: f64| {
            let mut q = p.clone();
            q[i] += di;
            q[j] += dj;
            e.eval(&q).unwrap()
        };
        let hd = e.eval_hyperdual(&p, i, j).unwrap();
        prop_assert!(close(hd.value, e.eval(&p).unwrap(), 1e-14));
        let d1 = (f(h, 0.0) - f(-h, 0.0)) / (2.0 * h);
        prop_assert!(close(hd.d1, d1, 1e-5), "d1 {} vs {}", hd.d1, d1);
        let d12 = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h);
        prop_assert!(close(hd.d12, d12, 1e-4), "d12 {} vs {}", hd.d12, d12);
    }

    #[test]
    fn mixed_partials_commute(e in expr(), p in point(), i in 0usize..3, j in 0usize..3) {
        let a = e.eval_hyperdual(&p, i, j).unwrap().d12;
        let b = e.eval_hyperdual(&p, j, i).unwrap().d12;
        prop_assert!(close(a, b, 1e-12));
    }

    #[test]
    fn gradient_is_linear(a in expr(), b in expr(), s in -3.0f64..3.0, t in -3.0f64..3.0, p in point()) {
        let combo = ScalarExpr::constant(s) * a.clone() + ScalarExpr::constant(t) * b.clone();
        let ga = a.gradient(&p).unwrap();
        let gb = b.gradient(&p).unwrap();
        for (k, g) in combo.gradient(&p).unwrap().into_iter().enumerate() {
            prop_assert!(close(g, s * ga[k] + t * gb[k], 1e-12));
        }
    }

    #[test]
    fn print_parse_roundtrip(e in expr(), p in point()) {
        let text = e.display(&NAMES).to_string();
        let back = ScalarExpr::parse(&text, &NAMES).unwrap();
        prop_assert!(close(back.eval(&p).unwrap(), e.eval(&p).unwrap(), 1e-12), "{text}");
        prop_assert_eq!(back.display(&NAMES).to_string(), text);
    }

    #[test]
    fn levi_civita_is_compatible_and_torsion_free(
        a in 0.1f64..0.8, b in 0.5f64..2.0, c in -0.4f64..0.4, lorentz in any::<bool>(), seed in any::<u64>(), p in point()
    ) {
        let chart = Chart::new("R", NAMES).unwrap();
        let d0 = format!("{}(2 + {a}*sin({b}*y))", if lorentz { "-" } else { "" });
        let entries = [
            d0.as_str(), &format!("{c}*cos(z)"), "0",
            &format!("{c}*cos(z)"), &format!("1 + {a}*x^2"), &format!("{c}*x"),
            "0", &format!("{c}*x"), &format!("3 + exp({a}*sin(x*y))"),
        ]
        .iter()
        .map(|s| chart.parse(s).unwrap())
        .collect();
        let sig = if lorentz { Signature::new(2, 1) } else { Signature::new(3, 0) };
        let g = MetricField::from_row_major(3, entries, sig).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_vector_field(3, &mut rng);
        let y = random_vector_field(3, &mut rng);
        let z = random_vector_field(3, &mut rng);
        let comp = metric_compatibility_residual(&g, &x, &y, &z, &p).unwrap();
        prop_assert!(comp.abs() < 1e-8, "compatibility {comp}");
        let tors = torsion_residual(&g, &x, &y, &p).unwrap();
        prop_assert!(tors.iter().all(|r| r.abs() < 1e-8), "torsion {tors:?}");
        prop_assert!(christoffel(&g, &p).unwrap().max_asymmetry() < 1e-12);
    }
}

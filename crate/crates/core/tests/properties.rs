//! Property tests over random expressions, metrics, curves and seeds.

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lorentz_holonomy::deform::{build_deformation, DeformationFamily};
use lorentz_holonomy::expr::parse_expr;
use lorentz_holonomy::flip::{null_sectional_normalized, random_degenerate_plane};
use lorentz_holonomy::geometry::{inner, MetricField};
use lorentz_holonomy::holonomy::sample_holonomy;
use lorentz_holonomy::transport::{parallel_transport, CurveSpec};
use lorentz_holonomy::zoo;

fn coords() -> Vec<String> {
    vec!["x".into(), "y".into()]
}

/// Smooth expressions in x, y that are finite on [-1, 1]².
fn smooth_expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("x".to_string()),
        Just("y".to_string()),
        (-3.0f64..3.0).prop_map(|c| format!("{c:.3}")),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} * {b})")),
            (inner.clone(), 1i32..4).prop_map(|(a, k)| format!("({a})^{k}")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("cos({a})")),
            inner.clone().prop_map(|a| format!("exp(0.1*{a})")),
            inner.clone().prop_map(|a| format!("sqrt(1 + ({a})^2)")),
            inner.prop_map(|a| format!("1/(2 + sin({a}))")),
        ]
    })
}

fn point() -> impl Strategy<Value = [f64; 2]> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(x, y)| [x, y])
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, ..ProptestConfig::default() })]

    #[test]
    fn jet_derivatives_match_central_differences(src in smooth_expr(), p in point()) {
        let e = parse_expr(&src, &coords()).unwrap();
        let j = e.eval_jet2(&p).unwrap();
        let f = |q: [f64; 2]| e.eval(&q).unwrap();
        let h = 1e-4;
        for i in 0..2 {
            let mut a = p;
            let mut b = p;
            a[i] += h;
            b[i] -= h;
            let fd = (f(a) - f(b)) / (2.0 * h);
            let scale = 1.0 + j.grad[i].abs() + j.value.abs();
            prop_assert!((fd - j.grad[i]).abs() < 1e-5 * scale, "d{i}: {fd} vs {}", j.grad[i]);
            let j1 = e.eval_jet1(&a).unwrap();
            let j0 = e.eval_jet1(&b).unwrap();
            for k in 0..2 {
                let fd2 = (j1.grad[k] - j0.grad[k]) / (2.0 * h);
                let s2 = 1.0 + j.hess_at(i, k).abs() + scale;
                prop_assert!((fd2 - j.hess_at(i, k)).abs() < 1e-5 * s2);
            }
        }
        prop_assert_eq!(j.hess_at(0, 1), j.hess_at(1, 0));
        prop_assert_eq!(j.value, e.eval(&p).unwrap());
    }

    #[test]
    fn printing_and_reparsing_preserves_values(src in smooth_expr(), p in point()) {
        let e = parse_expr(&src, &coords()).unwrap();
        let again = parse_expr(&e.to_string(), &coords()).unwrap();
        let (a, b) = (e.eval(&p).unwrap(), again.eval(&p).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{} → {}: {a} vs {b}", src, e);
    }

    #[test]
    fn flat_transport_is_trivial(pts in prop::collection::vec((-4.0f64..4.0, -4.0f64..4.0), 2..5)) {
        let g = zoo::builtin("minkowski2").unwrap();
        let c = CurveSpec::polyline(pts.iter().map(|&(t, x)| vec![t, x]).collect()).unwrap();
        let m = parallel_transport(&g, &c).unwrap().matrix;
        prop_assert!((m - DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn transport_preserves_the_metric_on_the_sphere(
        a in (-0.5f64..0.5, 1.0f64..2.1, -1.0f64..1.0),
        b in (-0.5f64..0.5, 1.0f64..2.1, -1.0f64..1.0),
    ) {
        let g = zoo::builtin("r_x_s2").unwrap();
        let (p, q) = (vec![a.0, a.1, a.2], vec![b.0, b.1, b.2]);
        let t = parallel_transport(&g, &CurveSpec::polyline(vec![p.clone(), q.clone()]).unwrap()).unwrap();
        let pulled = t.matrix.transpose() * g.metric_at(&q).unwrap() * &t.matrix;
        prop_assert!((pulled - g.metric_at(&p).unwrap()).amax() < 1e-7);
        // ∂t is parallel on a product with a time factor
        prop_assert!((t.matrix.column(0) - nalgebra::DVector::from_vec(vec![1.0, 0.0, 0.0])).amax() < 1e-9);
    }

    #[test]
    fn null_curvature_rescaling_law(
        seed in 0u64..1000,
        u2 in (0.5f64..2.0, -0.4f64..0.4, -0.4f64..0.4, -0.4f64..0.4),
    ) {
        let g = zoo::builtin("rt_rx_s2").unwrap();
        let p = [0.1, 0.2, 1.3, 0.4];
        let gm = g.metric_at(&p).unwrap();
        let u1 = [1.0, 0.0, 0.0, 0.0];
        let u2 = [u2.0, u2.1, u2.2, u2.3];
        prop_assume!(inner(&gm, &u2, &u2) < -1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let plane = random_degenerate_plane(&g, &p, &u1, &mut rng).unwrap();
        let k1 = null_sectional_normalized(&g, &plane, &u1).unwrap();
        let k2 = null_sectional_normalized(&g, &plane, &u2).unwrap();
        let s = inner(&gm, &plane.u.comp, &u1);
        let u: Vec<f64> = plane.u.comp.iter().map(|c| c / s).collect();
        let factor = inner(&gm, &u, &u2).powi(2);
        prop_assert!((k1 - factor * k2).abs() <= 1e-8 * k1.abs().max(1e-12));
    }

    #[test]
    fn deformation_components_are_affine(r in 0.0f64..1.0, s in 0.0f64..1.0, p in point()) {
        let fam = DeformationFamily::from_strings("f", &["t", "x", "y"], &["1 + 0.1*x^2", "0", "exp(0.1*y)"], &["0.3*sin(y)", "0.2*x"]);
        let q = [0.0, p[0], p[1]];
        let at = |r: f64| build_deformation(&fam, r).unwrap().metric_at(&q).unwrap();
        let mid = at(0.5 * (r + s));
        let avg = (at(r) + at(s)) * 0.5;
        prop_assert!((mid - avg).amax() < 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn holonomy_samples_are_deterministic(seed in 0u64..1_000_000) {
        let g = zoo::builtin("clifton_pohl").unwrap();
        let a = sample_holonomy(&g, g.base_point(), 6, seed).unwrap();
        let b = sample_holonomy(&g, g.base_point(), 6, seed).unwrap();
        prop_assert_eq!(a.generators.len(), b.generators.len());
        for (x, y) in a.generators.iter().zip(&b.generators) {
            prop_assert_eq!(&x.matrix, &y.matrix);
            prop_assert_eq!(&x.descriptor, &y.descriptor);
        }
    }
}

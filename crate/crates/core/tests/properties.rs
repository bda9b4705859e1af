use approx::assert_abs_diff_eq;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use nhexp::riemannian::{curve_length, minimize_length, DiscreteCurve, MinimizeOptions, Objective};
use nhexp::systems::{self, conformal_metric};
use nhexp::{
    gauss_residual, orthogonal_projector_at, radial_gradient, unit_grid, Fd, VectorMetric,
};

fn v2(a: f64, b: f64) -> DVector<f64> {
    DVector::from_column_slice(&[a, b])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn particle_projector_is_g_orthogonal_idempotent(x in -2.0..2.0f64, y in -2.0..2.0f64, z in -2.0..2.0f64) {
        let entry = systems::particle_system::<f64>();
        let sys = &entry.system;
        let q = DVector::from_column_slice(&[x, y, z]);
        let p = orthogonal_projector_at(sys.metric(), sys.constraints(), &q).unwrap();
        let a = sys.constraints().at(&q).unwrap();
        let g = sys.metric().at(&q).unwrap();
        prop_assert!((&p * &p - &p).amax() < 1e-12);
        prop_assert!((&a * &p).amax() < 1e-12);
        let gp = &g * &p;
        prop_assert!((&gp - gp.transpose()).amax() < 1e-12);
    }

    #[test]
    fn disk_projector_is_g_orthogonal_idempotent(th in -3.0..3.0f64, ph in -3.0..3.0f64, i in 0.2..3.0f64, j in 0.2..3.0f64) {
        let entry = systems::disk_system::<f64>(i, j).unwrap();
        let sys = &entry.system;
        let q = DVector::from_column_slice(&[0.3, -0.1, th, ph]);
        let p = orthogonal_projector_at(sys.metric(), sys.constraints(), &q).unwrap();
        let a = sys.constraints().at(&q).unwrap();
        let g = sys.metric().at(&q).unwrap();
        prop_assert!((&p * &p - &p).amax() < 1e-12);
        prop_assert!((&a * &p).amax() < 1e-12);
        let gp = &g * &p;
        prop_assert!((&gp - gp.transpose()).amax() < 1e-12);
        prop_assert!((p.trace() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gauss_residual_is_linear_in_second_slot(r in 0.0..0.85f64, ang in 0.0..std::f64::consts::TAU, z1 in -1.0..1.0f64, z2 in -1.0..1.0f64, s in -3.0..3.0f64) {
        let g = VectorMetric::new("conformal", conformal_metric(0.3, -0.2), nhexp::DomainSpec::ball(1.0));
        let w = v2(r * ang.cos(), r * ang.sin());
        let z = v2(z1, z2);
        let a = gauss_residual(&g, &w, &z).unwrap();
        let b = gauss_residual(&g, &w, &(&z * s)).unwrap();
        prop_assert!((b - s * a).abs() < 1e-12);
    }

    #[test]
    fn example53_satisfies_gauss_identity(r in 0.0..0.89f64, ang in 0.0..std::f64::consts::TAU, z1 in -1.0..1.0f64, z2 in -1.0..1.0f64) {
        let g = systems::example53_metric::<f64>();
        let w = v2(r * ang.cos(), r * ang.sin());
        prop_assert!(gauss_residual(&g, &w, &v2(z1, z2)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn particle_closed_form_round_trip(u in -1.0..1.0f64, v in -1.0..1.0f64) {
        let (x, y, _) = systems::particle_exp_closed(u, v);
        let (uu, vv) = systems::particle_inverse_closed(x, y);
        prop_assert!((uu - u).abs() < 1e-13 && (vv - v).abs() < 1e-15);
    }

    #[test]
    fn radial_gradient_of_gauss_metric_is_radial(r in 0.1..0.85f64, ang in 0.0..std::f64::consts::TAU) {
        let g = systems::example53_metric::<f64>();
        let v = v2(r * ang.cos(), r * ang.sin());
        let grad = radial_gradient(&g, &v, Fd::metric()).unwrap();
        let expected = &v / g.origin_norm(&v).unwrap();
        prop_assert!((grad - expected).amax() < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn particle_exponential_is_homothetic(r in 0.05..0.95f64, ang in 0.0..std::f64::consts::TAU) {
        let patch = systems::particle_system::<f64>().default_patch().unwrap();
        let w = v2(r * ang.cos(), r * ang.sin());
        prop_assert!(patch.rescaling_residual(&w, &unit_grid(6)).unwrap() < 1e-8);
    }

    #[test]
    fn minimization_never_lengthens(amp in 0.0..0.2f64, mode in 1usize..4, x in 0.2..0.5f64, y in -0.3..0.3f64, energy in any::<bool>()) {
        let g = conformal_metric(0.3, -0.2);
        let a = DVector::zeros(2);
        let b = v2(x, y);
        let dir = v2(-y, x) / b.norm();
        let init = DiscreteCurve::perturbed_line(&a, &b, 9, amp, mode, &dir).unwrap();
        let opts = MinimizeOptions {
            objective: if energy { Objective::Energy } else { Objective::Length },
            max_iters: 200,
            ..MinimizeOptions::default()
        };
        let res = minimize_length(&g, &init, &opts).unwrap();
        prop_assert!(res.final_length <= res.initial_length + 1e-14);
        prop_assert!((curve_length(&g, &res.curve).unwrap() - res.final_length).abs() < 1e-12);
        prop_assert_eq!(res.curve.start(), init.start());
        prop_assert_eq!(res.curve.end(), init.end());
    }
}

#[test]
fn disk_basis_matches_constraint_kernel() {
    let entry = systems::disk_system::<f64>(1.0, 1.0).unwrap();
    let a = entry
        .system
        .constraints()
        .at(entry.base().coords())
        .unwrap();
    let b = entry.chart.basis();
    assert_abs_diff_eq!((a * b).amax(), 0.0, epsilon = 1e-15);
    assert_eq!(b.shape(), (4, 2));
    let sel = DMatrix::from_fn(2, 2, |i, j| b[(entry.select[i], j)]);
    assert_abs_diff_eq!((sel - DMatrix::identity(2, 2)).amax(), 0.0, epsilon = 1e-15);
}

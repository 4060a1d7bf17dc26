use nalgebra::{Matrix3, Vector3};
use ocp_afem::bench::example1;
use ocp_afem::estimator::{
    estimate, indicator_competitor_control, indicator_total, oscillation, EstimatorKind, IndicatorField, IndicatorKind,
};
use ocp_afem::fem::{gradient_jump, Analytic, P1Function};
use ocp_afem::mesh::{build_lshape, build_unit_square, uniform_refine, Mesh};
use ocp_afem::ocp::{active_set_solve, KktOptions, KktState};
use ocp_afem::quadrature::rule;
use proptest::prelude::*;

#[test]
fn hat_jump_across_the_diagonal() {
    let mesh: Mesh<f64> = build_unit_square(0).unwrap();
    let v = (0..4).find(|&v| mesh.vertex(v) == [1.0, 0.0]).unwrap();
    let mut values = vec![0.0; 4];
    values[v] = 1.0;
    let hat = P1Function::from_values(&mesh, values, false).unwrap();
    let face = &mesh.interior_faces()[0];
    assert!((gradient_jump(&mesh, &hat, face).unwrap().abs() - 2f64.sqrt()).abs() < 1e-14);
}

/// `h_T² ‖w − 𝒫_T w‖²` computed with a dense 3×3 solve per element.
fn oscillation_oracle(mesh: &Mesh<f64>, w: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let q = rule::<f64>(2, 8).unwrap();
    (0..mesh.num_elements())
        .map(|e| {
            let vol = mesh.volume(e);
            let pts: Vec<([f64; 3], [f64; 2], f64)> = q
                .points
                .iter()
                .zip(&q.weights)
                .map(|(r, &wt)| {
                    let b = [r[0], r[1], r[2]];
                    let mut x = [0.0; 2];
                    for (k, &vtx) in mesh.element(e).iter().enumerate() {
                        x[0] += b[k] * mesh.vertex(vtx)[0];
                        x[1] += b[k] * mesh.vertex(vtx)[1];
                    }
                    (b, x, 2.0 * vol * wt)
                })
                .collect();
            let mut m = Matrix3::<f64>::zeros();
            let mut rhs = Vector3::<f64>::zeros();
            for (b, x, wt) in &pts {
                for i in 0..3 {
                    rhs[i] += wt * w(x) * b[i];
                    for j in 0..3 {
                        m[(i, j)] += wt * b[i] * b[j];
                    }
                }
            }
            let c = m.lu().solve(&rhs).unwrap();
            let err: f64 = pts
                .iter()
                .map(|(b, x, wt)| {
                    let d = w(x) - (c[0] * b[0] + c[1] * b[1] + c[2] * b[2]);
                    wt * d * d
                })
                .sum();
            mesh.diameter(e).powi(2) * err
        })
        .collect()
}

#[test]
fn oscillation_of_a_quadratic_matches_dense_oracle() {
    let mesh: Mesh<f64> = build_unit_square(2).unwrap();
    let w = Analytic::new(|x: &[f64]| x[0] * x[0]);
    let got = oscillation(&mesh, &w).unwrap();
    let oracle = oscillation_oracle(&mesh, |x| x[0] * x[0]);
    for (a, b) in got.values.iter().zip(&oracle) {
        assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()), "{a} vs {b}");
    }
    assert!(got.total() > 0.0);
}

#[test]
fn oscillation_decays_like_h_squared() {
    let w = Analytic::new(|x: &[f64]| (3.0 * x[0]).sin() * x[1]);
    let coarse: Mesh<f64> = build_unit_square(2).unwrap();
    let fine = uniform_refine(&coarse).unwrap().mesh;
    let ratio = oscillation(&coarse, &w).unwrap().total() / oscillation(&fine, &w).unwrap().total();
    assert!((ratio - 8.0).abs() < 1.0, "{ratio}");
}

#[test]
fn competitor_control_indicator_of_corner_hat() {
    let mesh: Mesh<f64> = ocp_afem::mesh::reference_simplex(2).unwrap();
    let mut values = vec![0.0; 3];
    values[0] = 1.0;
    let p = P1Function::from_values(&mesh, values, false).unwrap();
    let ind = indicator_competitor_control(&mesh, &p).unwrap();
    // h² |T| |∇φ|² = 2 · ½ · 2.
    assert!((ind.values[0] - 2.0).abs() < 1e-14);
}

#[test]
fn estimates_on_the_manufactured_problem() {
    let mesh: Mesh<f64> = build_lshape(2).unwrap();
    let case = example1::<f64>(1e-3).unwrap();
    let sol = active_set_solve(&case.problem, &mesh, &KktState::zeros(&mesh), &KktOptions::default()).unwrap();
    for kind in [EstimatorKind::Ours, EstimatorKind::Competitor] {
        let est = estimate(&mesh, &sol, &case.problem, kind).unwrap();
        for f in [&est.st, &est.ad, &est.ct, &est.total] {
            assert_eq!(f.len(), mesh.num_elements());
            assert!(f.values.iter().all(|v| v.is_finite() && *v >= 0.0));
        }
        let sum = est.st.total().powi(2) + est.ad.total().powi(2) + est.ct.total().powi(2);
        assert!((est.total.total().powi(2) - sum).abs() <= 1e-12 * sum);
        assert!(est.total.total() > 0.0);
    }
}

proptest! {
    #[test]
    fn totals_add_in_squares(v in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0, 0.0f64..10.0), 1..40)) {
        let st = IndicatorField::new(IndicatorKind::St, v.iter().map(|t| t.0).collect()).unwrap();
        let ad = IndicatorField::new(IndicatorKind::Ad, v.iter().map(|t| t.1).collect()).unwrap();
        let ct = IndicatorField::new(IndicatorKind::Ct, v.iter().map(|t| t.2).collect()).unwrap();
        let total = indicator_total(&st, &ad, &ct).unwrap();
        let expected: f64 = v.iter().map(|t| t.0 + t.1 + t.2).sum::<f64>().sqrt();
        prop_assert!((total.total() - expected).abs() <= 1e-12 * (1.0 + expected));
        prop_assert!(total.max() >= st.max().max(ad.max()).max(ct.max()));
    }

    #[test]
    fn negative_or_nan_indicators_are_rejected(bad in prop_oneof![Just(f64::NAN), Just(f64::INFINITY), -10.0f64..-1e-300]) {
        prop_assert!(IndicatorField::new(IndicatorKind::Ocp, vec![1.0, bad]).is_err());
    }
}

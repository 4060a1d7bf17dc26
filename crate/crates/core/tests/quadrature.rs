use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use ocp_afem::mesh::{reference_simplex, Mesh};
use ocp_afem::quadrature::{integrate, rule, MAX_DEGREE_2D, MAX_DEGREE_3D};

fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// Exact `∫ x^a y^b z^c` over the reference simplex: `a! b! c! / (a+b+c+d)!`.
fn monomial_exact(exps: &[usize]) -> BigRational {
    let num = exps.iter().fold(BigInt::one(), |acc, &e| acc * factorial(e));
    let total: usize = exps.iter().sum::<usize>() + exps.len();
    BigRational::new(num, factorial(total))
}

fn monomials(dim: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for a in 0..=degree {
        for b in 0..=degree - a {
            if dim == 2 {
                out.push(vec![a, b]);
            } else {
                for c in 0..=degree - a - b {
                    out.push(vec![a, b, c]);
                }
            }
        }
    }
    out
}

fn check_exactness(dim: usize, max: usize) {
    for degree in 1..=max {
        let q = rule::<f64>(dim, degree).unwrap();
        assert!(q.degree >= degree);
        for exps in monomials(dim, degree) {
            let exact = monomial_exact(&exps).to_f64().unwrap();
            let got = q.apply_reference(|x| exps.iter().zip(x).map(|(&e, &c)| c.powi(e as i32)).product());
            let rel = (got - exact).abs() / exact;
            assert!(
                rel <= 1e-12,
                "dim {dim} degree {degree} monomial {exps:?}: rel error {rel:e}"
            );
        }
    }
}

#[test]
fn triangle_rules_are_exact_to_their_degree() {
    check_exactness(2, MAX_DEGREE_2D);
}

#[test]
fn tetrahedron_rules_are_exact_to_their_degree() {
    check_exactness(3, MAX_DEGREE_3D);
}

#[test]
fn degree_nineteen_high_monomial() {
    let q = rule::<f64>(2, 19).unwrap();
    let exact = monomial_exact(&[10, 9]).to_f64().unwrap();
    let got = q.apply_reference(|x| x[0].powi(10) * x[1].powi(9));
    assert!((got - exact).abs() <= 1e-12 * exact);
}

#[test]
fn all_weights_positive() {
    for (dim, max) in [(2, MAX_DEGREE_2D), (3, MAX_DEGREE_3D)] {
        for degree in 0..=max {
            let q = rule::<f64>(dim, degree).unwrap();
            assert!(q.weights.iter().all(|&w| w > 0.0), "dim {dim} degree {degree}");
        }
    }
}

/// Adaptive Simpson on [a, b].
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, (a, b): (f64, f64), (fa, fm, fb): (f64, f64, f64), tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (flm, frm) = (f(0.5 * (a + m)), f(0.5 * (m + b)));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, (a, m), (fa, flm, fm), tol / 2.0, depth - 1) + rec(f, (m, b), (fm, frm, fb), tol / 2.0, depth - 1)
        }
    }
    rec(f, (a, b), (f(a), f(0.5 * (a + b)), f(b)), tol, 40)
}

#[test]
fn exponential_matches_nested_reference_integration() {
    let m: Mesh<f64> = reference_simplex(2).unwrap();
    let got = integrate(&m, 0, |x| x[0].exp(), 19).unwrap();
    let inner = |x: f64| simpson(&|_y| x.exp(), 0.0, 1.0 - x, 1e-14);
    let reference = simpson(&inner, 0.0, 1.0, 1e-13);
    assert!((got - reference).abs() < 1e-10, "{got} vs {reference}");
    assert!((got - (std::f64::consts::E - 2.0)).abs() < 1e-13);
}

#[test]
fn mapped_integration_examples() {
    let m: Mesh<f64> = Mesh::new(2, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0], vec![0, 1, 2]).unwrap();
    assert!((integrate(&m, 0, |_| 3.0, 1).unwrap() - 1.5).abs() < 1e-15);
    let skew: Mesh<f64> = Mesh::new(2, vec![0.2, 0.1, 1.7, 0.4, 0.5, 1.9], vec![0, 1, 2]).unwrap();
    let area = skew.volume(0);
    // Linear function equal to 1 at the third vertex and 0 at the others.
    let g = skew.geometry(0).grad_lambda[2];
    let v0 = skew.vertex(0).to_vec();
    let lambda = move |x: &[f64]| g[0] * (x[0] - v0[0]) + g[1] * (x[1] - v0[1]);
    assert!((integrate(&skew, 0, lambda, 2).unwrap() - area / 3.0).abs() < 1e-14);
}

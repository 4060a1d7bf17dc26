use ocp_afem::bench::{example1, example2, lshape_solution, EXAMPLE1_BOUNDS};
use ocp_afem::fem::Field;
use ocp_afem::mesh::{build_lshape, Mesh};
use ocp_afem::nonlinearity::Nonlinearity;

fn in_lshape(x: f64, y: f64) -> bool {
    x > -1.0 && x < 1.0 && y > -1.0 && y < 1.0 && !(x >= 0.0 && y <= 0.0)
}

/// Fourth-order five-point-per-axis Laplacian.
fn fd_laplacian(f: impl Fn(f64, f64) -> f64, x: f64, y: f64, h: f64) -> f64 {
    let d2 = |g: &dyn Fn(f64) -> f64| {
        (-g(2.0 * h) + 16.0 * g(h) - 30.0 * g(0.0) + 16.0 * g(-h) - g(-2.0 * h)) / (12.0 * h * h)
    };
    d2(&|s| f(x + s, y)) + d2(&|s| f(x, y + s))
}

fn grid(n: usize) -> impl Iterator<Item = (f64, f64)> {
    (0..n).flat_map(move |i| {
        (0..n).map(move |j| {
            (
                -1.0 + 2.0 * (i as f64 + 0.5) / n as f64,
                -1.0 + 2.0 * (j as f64 + 0.5) / n as f64,
            )
        })
    })
}

#[test]
fn exact_state_vanishes_on_the_boundary() {
    let mut worst = 0.0f64;
    for k in 0..=400 {
        let t = k as f64 / 400.0;
        let s = -1.0 + 2.0 * t;
        for (x, y) in [(s, -1.0), (s, 1.0), (-1.0, s), (1.0, t), (t, 0.0), (0.0, -t)] {
            if x > 0.0 && y < 0.0 {
                continue;
            }
            worst = worst.max(lshape_solution(x, y).0.abs());
        }
    }
    assert!(worst <= 1e-12, "{worst}");
}

#[test]
fn exact_control_respects_the_bounds() {
    let case = example1::<f64>(1e-3).unwrap();
    let (lo, hi) = EXAMPLE1_BOUNDS;
    let mut count = 0;
    let (mut seen_lo, mut seen_hi) = (false, false);
    for (x, y) in grid(120).filter(|&(x, y)| in_lshape(x, y)) {
        let u = (case.exact_u)(&[x, y]);
        assert!((lo..=hi).contains(&u), "u({x}, {y}) = {u}");
        seen_lo |= u == lo;
        seen_hi |= u == hi;
        count += 1;
    }
    assert!(count >= 10_000);
    assert!(seen_lo && seen_hi);
}

#[test]
fn closed_form_derivatives_match_differences() {
    let h = 1e-3;
    let mut checked = 0;
    for (x, y) in grid(40).filter(|&(x, y)| in_lshape(x, y) && x.hypot(y) >= 0.25) {
        let near_edge = x.abs() > 1.0 - 3.0 * h || y.abs() > 1.0 - 3.0 * h || (x > -3.0 * h && y < 3.0 * h);
        if near_edge {
            continue;
        }
        let (_, grad, lap) = lshape_solution(x, y);
        let f = |a: f64, b: f64| lshape_solution(a, b).0;
        let lap_fd = fd_laplacian(f, x, y, h);
        assert!(
            (lap - lap_fd).abs() <= 1e-8 * (1.0 + lap.abs()),
            "({x}, {y}): {lap} vs {lap_fd}"
        );
        let gx = (f(x + h, y) - f(x - h, y)) / (2.0 * h);
        assert!((grad[0] - gx).abs() <= 1e-5);
        checked += 1;
    }
    assert!(checked >= 1000, "{checked}");
}

#[test]
fn data_reproduce_the_optimality_system() {
    let nu = 1e-3;
    let case = example1::<f64>(nu).unwrap();
    let mesh: Mesh<f64> = build_lshape(0).unwrap();
    let h = 1e-3;
    for (x, y) in grid(40).filter(|&(x, y)| in_lshape(x, y) && x.hypot(y) >= 0.25) {
        if x.abs() > 1.0 - 3.0 * h || y.abs() > 1.0 - 3.0 * h || (x > -3.0 * h && y < 3.0 * h) {
            continue;
        }
        let pt = [x, y];
        let yv = case.exact_y.value(&mesh, 0, &[1.0, 0.0, 0.0], &pt);
        let lap = fd_laplacian(|a, b| lshape_solution(a, b).0, x, y, h);
        let u = (case.exact_u)(&pt);
        // State: −Δy + atan y = f + u.
        let state = -lap + yv.atan() - (case.problem.source)(&pt) - u;
        // Adjoint with p = y: −Δp + p/(1+y²) = y − y_Ω.
        let adjoint = -lap + yv / (1.0 + yv * yv) - yv + (case.problem.y_omega)(&pt);
        let scale = 1.0 + lap.abs();
        assert!(
            state.abs() <= 1e-8 * scale && adjoint.abs() <= 1e-8 * scale,
            "({x}, {y}): {state} {adjoint}"
        );
        assert_eq!(u, (-yv / nu).clamp(EXAMPLE1_BOUNDS.0, EXAMPLE1_BOUNDS.1));
    }
}

#[test]
fn cube_benchmark_accepts_only_its_nonlinearities() {
    for a in [Nonlinearity::A1, Nonlinearity::A2, Nonlinearity::A3] {
        let p = example2::<f64>(a).unwrap();
        assert_eq!(p.nu, 1e-3);
        assert_eq!((p.source)(&[0.3, 0.2, 0.9]), 10.0);
    }
    assert!(example2::<f64>(Nonlinearity::Zero).is_err());
    assert!(example1::<f64>(0.0).is_err());
}

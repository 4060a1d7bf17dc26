//! Benchmark problems, exact errors and rate fitting.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{norms, Analytic, ScalarFn};
use crate::mesh::Mesh;
use crate::nonlinearity::Nonlinearity;
use crate::ocp::{ControlProblem, KktSolution};
use crate::quadrature::error_degree;
use crate::scalar::{clamp, Real};

/// Closed-form second derivatives used to manufacture data.
pub type LaplacianFn<T> = ScalarFn<T>;

/// An optimal control problem with known solution.
#[derive(Clone)]
pub struct ManufacturedCase<T> {
    pub exact_y: Analytic<T>,
    pub exact_p: Analytic<T>,
    pub exact_u: ScalarFn<T>,
    /// `Δȳ` (equal to `Δp̄` here).
    pub laplacian_y: LaplacianFn<T>,
    pub laplacian_p: LaplacianFn<T>,
    pub problem: ControlProblem<T>,
}

/// Bounds of the L-shape benchmark.
pub const EXAMPLE1_BOUNDS: (f64, f64) = (-40.0, -0.1);
/// Bounds of the cube benchmark.
pub const EXAMPLE2_BOUNDS: (f64, f64) = (-80.0, 100.0);

/// Polar angle in `[0, 2π)`.
fn angle(x: f64, y: f64) -> f64 {
    let t = y.atan2(x);
    if t < 0.0 {
        t + 2.0 * PI
    } else {
        t
    }
}

/// `ȳ = S R`, `S = sin(π/2 (x+1)) sin(π/2 (y+1))`, `R = r^{2/3} sin(2θ/3)`.
/// Returns value, gradient and Laplacian.
pub fn lshape_solution(x: f64, y: f64) -> (f64, [f64; 2], f64) {
    let h = PI / 2.0;
    let (sx, cx) = (h * (x + 1.0)).sin_cos();
    let (sy, cy) = (h * (y + 1.0)).sin_cos();
    let s = sx * sy;
    let gs = [h * cx * sy, h * sx * cy];
    let lap_s = -2.0 * h * h * s;
    let r = x.hypot(y);
    if r == 0.0 {
        return (0.0, [0.0, 0.0], 0.0);
    }
    let t = angle(x, y);
    let r23 = r.powf(2.0 / 3.0);
    let rr = r23 * (2.0 * t / 3.0).sin();
    let c = 2.0 / 3.0 * r.powf(-1.0 / 3.0);
    let gr = [-c * (t / 3.0).sin(), c * (t / 3.0).cos()];
    let grad = [gs[0] * rr + s * gr[0], gs[1] * rr + s * gr[1]];
    let lap = lap_s * rr + 2.0 * (gs[0] * gr[0] + gs[1] * gr[1]);
    (s * rr, grad, lap)
}

/// L-shape benchmark with `ȳ = p̄` as in [`lshape_solution`], `a = arctan`
/// and bounds `[-40, -0.1]`.
pub fn example1<T: Real>(nu: f64) -> Result<ManufacturedCase<T>> {
    if !(nu > 0.0) {
        return Err(Error::InvalidArgument(format!("nu must be positive, got {nu}")));
    }
    let (lo, hi) = EXAMPLE1_BOUNDS;
    let ubar = move |x: &[T]| -> f64 {
        let (p, _, _) = lshape_solution(x[0].as_f64(), x[1].as_f64());
        clamp(-p / nu, lo, hi)
    };
    let value = |x: &[T]| T::lit(lshape_solution(x[0].as_f64(), x[1].as_f64()).0);
    let gradient = |x: &[T]| {
        let g = lshape_solution(x[0].as_f64(), x[1].as_f64()).1;
        [T::lit(g[0]), T::lit(g[1]), T::zero()]
    };
    let lap: ScalarFn<T> = Arc::new(|x: &[T]| T::lit(lshape_solution(x[0].as_f64(), x[1].as_f64()).2));
    let source = move |x: &[T]| {
        let (y, _, l) = lshape_solution(x[0].as_f64(), x[1].as_f64());
        T::lit(-l + y.atan() - ubar(x))
    };
    let y_omega = |x: &[T]| {
        let (y, _, l) = lshape_solution(x[0].as_f64(), x[1].as_f64());
        T::lit(y + l - y / (1.0 + y * y))
    };
    let problem = ControlProblem::new(
        T::lit(nu),
        T::lit(lo),
        T::lit(hi),
        y_omega,
        source,
        Nonlinearity::Arctan,
    )?;
    Ok(ManufacturedCase {
        exact_y: Analytic::with_gradient(value, gradient),
        exact_p: Analytic::with_gradient(value, gradient),
        exact_u: Arc::new(move |x: &[T]| T::lit(ubar(x))),
        laplacian_y: lap.clone(),
        laplacian_p: lap,
        problem,
    })
}

/// Desired state of the cube benchmark: `100 e^{1/ξ} cos(4πξ)` for `ξ < 0`,
/// zero otherwise, `ξ = 4|x − (½,½,½)|² − 1`.
pub fn example2_desired_state(x: &[f64]) -> f64 {
    let xi = 4.0 * x.iter().map(|c| (c - 0.5) * (c - 0.5)).sum::<f64>() - 1.0;
    if xi < 0.0 {
        100.0 * (1.0 / xi).exp() * (4.0 * PI * xi).cos()
    } else {
        0.0
    }
}

/// Cube benchmark: `f ≡ 10`, bounds `[-80, 100]`, `ν = 10⁻³`; no exact solution.
pub fn example2<T: Real>(nonlinearity: Nonlinearity) -> Result<ControlProblem<T>> {
    if !matches!(nonlinearity, Nonlinearity::A1 | Nonlinearity::A2 | Nonlinearity::A3) {
        return Err(Error::InvalidArgument(format!(
            "the cube benchmark uses a1, a2 or a3, not {nonlinearity}"
        )));
    }
    let (lo, hi) = EXAMPLE2_BOUNDS;
    ControlProblem::new(
        T::lit(1e-3),
        T::lit(lo),
        T::lit(hi),
        |x: &[T]| {
            let p: Vec<f64> = x.iter().map(|c| c.as_f64()).collect();
            T::lit(example2_desired_state(&p))
        },
        |_| T::lit(10.0),
        nonlinearity,
    )
}

/// Exact error components `‖∇e_y‖`, `‖∇e_p‖`, `‖e_u‖` and their sum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactErrors {
    pub y_h1: f64,
    pub p_h1: f64,
    pub u_l2: f64,
}

impl ExactErrors {
    pub fn total(&self) -> f64 {
        self.y_h1 + self.p_h1 + self.u_l2
    }
}

/// Errors of a discrete solution against a manufactured case.
pub fn exact_errors<T: Real>(mesh: &Mesh<T>, sol: &KktSolution<T>, case: &ManufacturedCase<T>) -> Result<ExactErrors> {
    let deg = error_degree(mesh.dim());
    let ey = norms(mesh, &sol.y, &case.exact_y, deg)?;
    let ep = norms(mesh, &sol.p, &case.exact_p, deg)?;
    let eu = norms(mesh, &sol.u, &case.exact_u, deg)?;
    Ok(ExactErrors {
        y_h1: ey.h1_semi.as_f64(),
        p_h1: ep.h1_semi.as_f64(),
        u_l2: eu.l2.as_f64(),
    })
}

/// Least-squares slope of `log(value)` against `log(ndof)`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some(p) = points.iter().find(|p| !(p.0 > 0.0 && p.1 > 0.0)) {
        return Err(Error::InvalidArgument(format!("nonpositive sample ({}, {})", p.0, p.1)));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all ndof values coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// `estimator / error`; `1` when both vanish, `+∞` when only the error does.
pub fn effectivity(est_total: f64, err_total: f64) -> f64 {
    if err_total > 0.0 {
        est_total / err_total
    } else if est_total == 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

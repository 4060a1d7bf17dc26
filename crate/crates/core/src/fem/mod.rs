//! Lowest-order finite element spaces: continuous piecewise linears (P1) and
//! piecewise constants (P0), with assembly, projections and norms.

mod assembly;
mod semilinear;
mod sparse;

use std::sync::Arc;

pub use assembly::{
    assemble_load, assemble_mass_p1, assemble_stiffness, assemble_weighted_mass, local_mass, local_stiffness, DofMap,
};
pub(crate) use semilinear::{inf_norm, residual_tolerance};
pub use semilinear::{semilinear_solve, NewtonReport};
pub use sparse::{solve_sparse, SparseMatrix, TripletBuilder};

use crate::error::{Error, Result};
use crate::mesh::{Face, Mesh};
use crate::nonlinearity::Nonlinearity;
use crate::quadrature::{error_degree, jacobian_scale, rule, MAX_DEGREE_2D, MAX_DEGREE_3D};
use crate::scalar::Real;

/// Pointwise function of the physical coordinates.
pub type ScalarFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;
/// Pointwise vector function (gradient), padded to three components.
pub type VectorFn<T> = Arc<dyn Fn(&[T]) -> [T; 3] + Send + Sync>;

/// Quadrature degrees used by the solvers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuadDegrees {
    /// Degree for terms involving the nonlinearity `a` and its derivatives.
    pub assembly: usize,
    /// Degree for data (`f`, `y_Ω`) pairings.
    pub data: usize,
}

impl QuadDegrees {
    /// Defaults: data at the maximal degree; `a`-terms at `k + 1` (at least 2)
    /// for a polynomial of degree `k`, and at the maximal degree otherwise.
    pub fn for_nonlinearity(dim: usize, a: &Nonlinearity, assembly_override: Option<usize>) -> Self {
        let data = error_degree(dim);
        let assembly = assembly_override.unwrap_or_else(|| match a.polynomial_degree() {
            Some(k) => (k + 1).max(2),
            None => data,
        });
        let max = if dim == 2 { MAX_DEGREE_2D } else { MAX_DEGREE_3D };
        Self {
            assembly: assembly.min(max),
            data,
        }
    }
}

/// Continuous piecewise linear function given by its vertex values.
#[derive(Clone, Debug, PartialEq)]
pub struct P1Function<T> {
    pub values: Vec<T>,
    /// When set, boundary vertices carry the value zero.
    pub dirichlet: bool,
}

impl<T: Real> P1Function<T> {
    pub fn zeros(mesh: &Mesh<T>, dirichlet: bool) -> Self {
        Self {
            values: vec![T::zero(); mesh.num_vertices()],
            dirichlet,
        }
    }

    /// Wraps vertex values; with `dirichlet` the boundary values must be zero.
    pub fn from_values(mesh: &Mesh<T>, values: Vec<T>, dirichlet: bool) -> Result<Self> {
        if values.len() != mesh.num_vertices() {
            return Err(Error::DimensionMismatch(format!(
                "{} nodal values for {} vertices",
                values.len(),
                mesh.num_vertices()
            )));
        }
        if dirichlet {
            if let Some(v) = (0..values.len()).find(|&v| mesh.is_boundary_vertex(v) && values[v] != T::zero()) {
                return Err(Error::InvalidArgument(format!(
                    "boundary vertex {v} has a nonzero value"
                )));
            }
        }
        Ok(Self { values, dirichlet })
    }

    /// Nodal interpolant of `f`; boundary values are set to zero when `dirichlet`.
    pub fn interpolate(mesh: &Mesh<T>, f: impl Fn(&[T]) -> T, dirichlet: bool) -> Self {
        let values = (0..mesh.num_vertices())
            .map(|v| {
                if dirichlet && mesh.is_boundary_vertex(v) {
                    T::zero()
                } else {
                    f(mesh.vertex(v))
                }
            })
            .collect();
        Self { values, dirichlet }
    }

    #[inline]
    pub fn eval(&self, mesh: &Mesh<T>, e: usize, bary: &[T]) -> T {
        mesh.element(e)
            .iter()
            .zip(bary)
            .map(|(&v, &l)| l * self.values[v])
            .sum()
    }

    /// Constant gradient on element `e`.
    #[inline]
    pub fn gradient(&self, mesh: &Mesh<T>, e: usize) -> [T; 3] {
        let g = &mesh.geometry(e).grad_lambda;
        let mut out = [T::zero(); 3];
        for (k, &v) in mesh.element(e).iter().enumerate() {
            for (o, &gk) in out.iter_mut().zip(&g[k]) {
                *o += self.values[v] * gk;
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()))
    }
}

/// Piecewise constant function, one value per element.
#[derive(Clone, Debug, PartialEq)]
pub struct P0Function<T> {
    pub values: Vec<T>,
}

impl<T: Real> P0Function<T> {
    pub fn constant(mesh: &Mesh<T>, c: T) -> Self {
        Self {
            values: vec![c; mesh.num_elements()],
        }
    }

    pub fn from_values(mesh: &Mesh<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != mesh.num_elements() {
            return Err(Error::DimensionMismatch(format!(
                "{} element values for {} elements",
                values.len(),
                mesh.num_elements()
            )));
        }
        Ok(Self { values })
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()))
    }
}

/// Anything that can be evaluated inside an element.
pub trait Field<T: Real>: Sync {
    /// Value at the point with barycentric coordinates `bary` (physical point `x`).
    fn value(&self, mesh: &Mesh<T>, e: usize, bary: &[T], x: &[T]) -> T;

    /// Gradient at the same point, when available.
    fn gradient(&self, mesh: &Mesh<T>, e: usize, bary: &[T], x: &[T]) -> Option<[T; 3]>;
}

impl<T: Real> Field<T> for P1Function<T> {
    fn value(&self, mesh: &Mesh<T>, e: usize, bary: &[T], _x: &[T]) -> T {
        self.eval(mesh, e, bary)
    }

    fn gradient(&self, mesh: &Mesh<T>, e: usize, _bary: &[T], _x: &[T]) -> Option<[T; 3]> {
        Some(P1Function::gradient(self, mesh, e))
    }
}

impl<T: Real> Field<T> for P0Function<T> {
    fn value(&self, _mesh: &Mesh<T>, e: usize, _bary: &[T], _x: &[T]) -> T {
        self.values[e]
    }

    fn gradient(&self, _mesh: &Mesh<T>, _e: usize, _bary: &[T], _x: &[T]) -> Option<[T; 3]> {
        Some([T::zero(); 3])
    }
}

impl<T: Real> Field<T> for ScalarFn<T> {
    fn value(&self, _mesh: &Mesh<T>, _e: usize, _bary: &[T], x: &[T]) -> T {
        self(x)
    }

    fn gradient(&self, _mesh: &Mesh<T>, _e: usize, _bary: &[T], _x: &[T]) -> Option<[T; 3]> {
        None
    }
}

/// A closed-form function with an optional closed-form gradient.
#[derive(Clone)]
pub struct Analytic<T> {
    pub value: ScalarFn<T>,
    pub gradient: Option<VectorFn<T>>,
}

impl<T: Real> Analytic<T> {
    pub fn new(value: impl Fn(&[T]) -> T + Send + Sync + 'static) -> Self {
        Self {
            value: Arc::new(value),
            gradient: None,
        }
    }

    pub fn with_gradient(
        value: impl Fn(&[T]) -> T + Send + Sync + 'static,
        gradient: impl Fn(&[T]) -> [T; 3] + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(value),
            gradient: Some(Arc::new(gradient)),
        }
    }

    pub fn constant(c: T) -> Self {
        Self::with_gradient(move |_| c, |_| [T::zero(); 3])
    }
}

impl<T: Real> Field<T> for Analytic<T> {
    fn value(&self, _mesh: &Mesh<T>, _e: usize, _bary: &[T], x: &[T]) -> T {
        (self.value)(x)
    }

    fn gradient(&self, _mesh: &Mesh<T>, _e: usize, _bary: &[T], x: &[T]) -> Option<[T; 3]> {
        self.gradient.as_ref().map(|g| g(x))
    }
}

/// Runs `body(w·|det J|, bary, x)` over the quadrature points of element `e`.
#[inline]
pub(crate) fn for_each_point<T: Real>(
    mesh: &Mesh<T>,
    e: usize,
    q: &crate::quadrature::QuadRule<T>,
    mut body: impl FnMut(T, &[T], &[T]),
) {
    let dim = mesh.dim();
    let scale = jacobian_scale(mesh, e);
    let mut x = [T::zero(); 3];
    for (p, &w) in q.points.iter().zip(&q.weights) {
        let bary = &p[..=dim];
        mesh.map_point(e, bary, &mut x);
        body(w * scale, bary, &x[..dim]);
    }
}

/// Elementwise `L²` projection onto constants: `(1/|T|) ∫_T f`.
pub fn project_p0<T: Real>(mesh: &Mesh<T>, f: &dyn Field<T>, degree: usize) -> Result<P0Function<T>> {
    let q = rule::<T>(mesh.dim(), degree)?;
    let mut values = Vec::with_capacity(mesh.num_elements());
    for e in 0..mesh.num_elements() {
        let mut acc = T::zero();
        for_each_point(mesh, e, &q, |w, b, x| acc += w * f.value(mesh, e, b, x));
        let v = acc / mesh.volume(e);
        if !v.is_finite() {
            return Err(Error::NonFinite { element: e });
        }
        values.push(v);
    }
    Ok(P0Function { values })
}

/// Elementwise (discontinuous) `L²` projection onto linears. Returns the
/// vertex values of the local linear fit on each element.
pub fn project_p1_elementwise<T: Real>(mesh: &Mesh<T>, f: &dyn Field<T>, degree: usize) -> Result<Vec<[T; 4]>> {
    let q = rule::<T>(mesh.dim(), degree)?;
    let n = mesh.dim() + 1;
    let mut out = Vec::with_capacity(mesh.num_elements());
    for e in 0..mesh.num_elements() {
        let mut b = [T::zero(); 4];
        for_each_point(mesh, e, &q, |w, bary, x| {
            let fv = f.value(mesh, e, bary, x);
            for i in 0..n {
                b[i] += w * fv * bary[i];
            }
        });
        // Local mass is c (I + J) with c = |T| d!/(d+2)!; its inverse is (I - J/(n+1))/c.
        let c = mesh.volume(e) / T::from_usize_lossy((n) * (n + 1));
        let s: T = b[..n].iter().copied().sum::<T>() / T::from_usize_lossy(n + 1);
        let mut coef = [T::zero(); 4];
        for i in 0..n {
            coef[i] = (b[i] - s) / c;
            if !coef[i].is_finite() {
                return Err(Error::NonFinite { element: e });
            }
        }
        out.push(coef);
    }
    Ok(out)
}

/// Gradient jump `ν⁺·∇v|_{T⁺} + ν⁻·∇v|_{T⁻}` across an interior face.
pub fn gradient_jump<T: Real>(mesh: &Mesh<T>, v: &P1Function<T>, face: &Face<T>) -> Result<T> {
    let minus = face
        .minus
        .ok_or_else(|| Error::InvalidArgument("gradient jump requested on a boundary face".into()))?;
    let gp = v.gradient(mesh, face.plus);
    let gm = v.gradient(mesh, minus);
    Ok((0..mesh.dim()).map(|i| face.normal[i] * (gp[i] - gm[i])).sum())
}

/// Norms of a difference `v − w`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Norms<T> {
    pub l2: T,
    /// `‖∇(v − w)‖_{L²}`; `NaN` when a gradient is unavailable.
    pub h1_semi: T,
    /// Maximum over vertices of `|v − w|`.
    pub linf_nodal: T,
}

/// `L²`, `H¹`-seminorm and nodal maximum of `v − w` at quadrature `degree`.
pub fn norms<T: Real>(mesh: &Mesh<T>, v: &dyn Field<T>, w: &dyn Field<T>, degree: usize) -> Result<Norms<T>> {
    let q = rule::<T>(mesh.dim(), degree)?;
    let dim = mesh.dim();
    let mut l2 = T::zero();
    let mut h1 = T::zero();
    for e in 0..mesh.num_elements() {
        let (mut le, mut he) = (T::zero(), T::zero());
        for_each_point(mesh, e, &q, |wt, b, x| {
            let d = v.value(mesh, e, b, x) - w.value(mesh, e, b, x);
            le += wt * d * d;
            match (v.gradient(mesh, e, b, x), w.gradient(mesh, e, b, x)) {
                (Some(gv), Some(gw)) => {
                    for i in 0..dim {
                        let g = gv[i] - gw[i];
                        he += wt * g * g;
                    }
                }
                _ => he = T::nan(),
            }
        });
        if !le.is_finite() {
            return Err(Error::NonFinite { element: e });
        }
        l2 += le;
        h1 += he;
    }

    let mut linf = T::zero();
    let mut seen = vec![false; mesh.num_vertices()];
    for e in 0..mesh.num_elements() {
        for (k, &vtx) in mesh.element(e).iter().enumerate() {
            if std::mem::replace(&mut seen[vtx], true) {
                continue;
            }
            let mut bary = [T::zero(); 4];
            bary[k] = T::one();
            let x = mesh.vertex(vtx);
            let d = v.value(mesh, e, &bary[..=dim], x) - w.value(mesh, e, &bary[..=dim], x);
            linf = linf.max(d.abs());
        }
    }
    Ok(Norms {
        l2: l2.sqrt(),
        h1_semi: h1.sqrt(),
        linf_nodal: linf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_unit_square, reference_simplex};
    use approx::assert_relative_eq;

    #[test]
    fn projection_p0_examples() {
        let m: Mesh<f64> = reference_simplex(2).unwrap();
        let x = Analytic::new(|p: &[f64]| p[0]);
        assert_relative_eq!(project_p0(&m, &x, 1).unwrap().values[0], 1.0 / 3.0, epsilon = 1e-15);
        let x2 = Analytic::new(|p: &[f64]| p[0] * p[0]);
        assert_relative_eq!(project_p0(&m, &x2, 2).unwrap().values[0], 1.0 / 6.0, epsilon = 1e-15);
        let sq: Mesh<f64> = build_unit_square(1).unwrap();
        let c = project_p0(&sq, &Analytic::constant(2.5), 2).unwrap();
        assert!(c.values.iter().all(|&v| (v - 2.5).abs() < 1e-14));
    }

    #[test]
    fn projection_p1_reproduces_linears_and_is_orthogonal() {
        let m: Mesh<f64> = build_unit_square(1).unwrap();
        let lin = Analytic::new(|p: &[f64]| 1.0 + 2.0 * p[0] - 3.0 * p[1]);
        let fit = project_p1_elementwise(&m, &lin, 2).unwrap();
        for (e, c) in fit.iter().enumerate() {
            for k in 0..3 {
                let x = m.vertex(m.element(e)[k]);
                assert!((c[k] - (1.0 + 2.0 * x[0] - 3.0 * x[1])).abs() < 1e-12);
            }
        }

        let r: Mesh<f64> = reference_simplex(2).unwrap();
        let fit = project_p1_elementwise(&r, &Analytic::new(|p: &[f64]| p[0] * p[0]), 4).unwrap()[0];
        let q = rule::<f64>(2, 4).unwrap();
        for test in 0..3 {
            let mut acc = 0.0;
            for_each_point(&r, 0, &q, |w, b, x| {
                let proj: f64 = (0..3).map(|k| fit[k] * b[k]).sum();
                let t = [1.0, x[0], x[1]][test];
                acc += w * (x[0] * x[0] - proj) * t;
            });
            assert!(acc.abs() < 1e-14, "moment {test}: {acc}");
        }
    }

    #[test]
    fn jump_of_hat_across_diagonal() {
        let m: Mesh<f64> = build_unit_square(0).unwrap();
        assert_eq!(m.interior_faces().len(), 1);
        let corner = (0..4).find(|&v| m.vertex(v) == [1.0, 0.0]).unwrap();
        let mut hat = P1Function::zeros(&m, false);
        hat.values[corner] = 1.0;
        let face = &m.interior_faces()[0];
        assert_relative_eq!(
            gradient_jump(&m, &hat, face).unwrap().abs(),
            2f64.sqrt(),
            epsilon = 1e-14
        );
        let lin = P1Function::interpolate(&m, |p| 2.0 * p[0] + p[1], false);
        assert!(gradient_jump(&m, &lin, face).unwrap().abs() < 1e-14);
        assert!(gradient_jump(&m, &lin, &m.boundary_faces()[0]).is_err());
    }

    #[test]
    fn norms_of_hat_match_hand_values() {
        // Hat at the right-angle vertex of the reference triangle: ∫φ² = |T|/6, |∇φ|² = 2.
        let m: Mesh<f64> = reference_simplex(2).unwrap();
        let corner = (0..3).find(|&v| m.vertex(v) == [0.0, 0.0]).unwrap();
        let mut hat = P1Function::zeros(&m, false);
        hat.values[corner] = 1.0;
        let zero = P1Function::zeros(&m, false);
        let n = norms(&m, &hat, &zero, 19).unwrap();
        assert_relative_eq!(n.l2, (1.0f64 / 12.0).sqrt(), epsilon = 1e-14);
        assert_relative_eq!(n.h1_semi, 1.0, epsilon = 1e-14);
        assert_eq!(n.linf_nodal, 1.0);
        let back = norms(&m, &zero, &hat, 19).unwrap();
        assert_eq!(n, back);
        assert_eq!(norms(&m, &hat, &hat, 19).unwrap().l2, 0.0);
    }

    #[test]
    fn norms_without_gradient_are_nan() {
        let m: Mesh<f64> = reference_simplex(2).unwrap();
        let f: ScalarFn<f64> = Arc::new(|p: &[f64]| p[0]);
        let n = norms(&m, &P1Function::zeros(&m, false), &f, 4).unwrap();
        assert!(n.h1_semi.is_nan());
        assert!(n.l2 > 0.0);
    }

    #[test]
    fn dirichlet_values_are_checked() {
        let m: Mesh<f64> = build_unit_square(1).unwrap();
        assert!(P1Function::from_values(&m, vec![1.0; m.num_vertices()], true).is_err());
        assert!(P1Function::from_values(&m, vec![1.0; 2], false).is_err());
        let y = P1Function::interpolate(&m, |_| 1.0, true);
        assert_eq!(y.values.iter().filter(|&&v| v == 1.0).count(), 1);
    }
}

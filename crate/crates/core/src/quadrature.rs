//! Positive-weight quadrature on the reference simplex.
//!
//! Low degrees use the classical fully symmetric rules. Higher degrees use
//! collapsed (conical) Gauss–Jacobi products, which have positive weights,
//! interior nodes and exactness of any requested degree; their nodes are
//! computed once by the Golub–Welsch eigenvalue method and cached.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::scalar::Real;

/// Highest exactness degree offered on triangles.
pub const MAX_DEGREE_2D: usize = 19;
/// Highest exactness degree offered on tetrahedra.
pub const MAX_DEGREE_3D: usize = 14;

/// Default degree for error, estimator and data integrals.
pub fn error_degree(dim: usize) -> usize {
    if dim == 2 {
        MAX_DEGREE_2D
    } else {
        MAX_DEGREE_3D
    }
}

#[derive(Clone, Debug)]
pub struct QuadRule<T> {
    pub dim: usize,
    /// Maximal total degree integrated exactly.
    pub degree: usize,
    /// Barycentric coordinates (first `dim + 1` entries used).
    pub points: Vec<[T; 4]>,
    /// Weights, summing to the reference volume `1/dim!`.
    pub weights: Vec<T>,
}

impl<T: Real> QuadRule<T> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Applies the rule on the reference simplex to `f(x)` with `x` the
    /// Cartesian reference coordinates.
    pub fn apply_reference(&self, f: impl Fn(&[T]) -> T) -> T {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, &w)| w * f(&p[1..=self.dim]))
            .sum()
    }
}

#[derive(Debug)]
struct RawRule {
    degree: usize,
    points: Vec<[f64; 4]>,
    weights: Vec<f64>,
}

/// Returns a rule exact for total degree `degree` on the `dim`-simplex.
pub fn rule<T: Real>(dim: usize, degree: usize) -> Result<QuadRule<T>> {
    let max = match dim {
        2 => MAX_DEGREE_2D,
        3 => MAX_DEGREE_3D,
        _ => return Err(Error::UnsupportedQuadrature { dim, degree }),
    };
    if degree > max {
        return Err(Error::UnsupportedQuadrature { dim, degree });
    }
    let raw = cached(dim, degree);
    Ok(QuadRule {
        dim,
        degree: raw.degree,
        points: raw.points.iter().map(|p| p.map(T::lit)).collect(),
        weights: raw.weights.iter().map(|&w| T::lit(w)).collect(),
    })
}

type RuleCache = Mutex<HashMap<(usize, usize), Arc<RawRule>>>;

fn cached(dim: usize, degree: usize) -> Arc<RawRule> {
    static CACHE: OnceLock<RuleCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    guard
        .entry((dim, degree))
        .or_insert_with(|| Arc::new(build(dim, degree)))
        .clone()
}

fn build(dim: usize, degree: usize) -> RawRule {
    match (dim, degree) {
        (_, 0 | 1) => {
            let c = 1.0 / (dim as f64 + 1.0);
            let vol = if dim == 2 { 0.5 } else { 1.0 / 6.0 };
            let mut p = [0.0; 4];
            p[..=dim].fill(c);
            RawRule {
                degree: 1,
                points: vec![p],
                weights: vec![vol],
            }
        }
        (2, 2) => symmetric_2d(2, &[Orbit::Three(1.0 / 6.0, 2.0 / 3.0)]),
        (2, 3 | 4) => symmetric_2d(
            4,
            &[
                Orbit::Three(0.223_381_589_678_011_47 / 2.0, 0.108_103_018_168_070_23),
                Orbit::Three(0.109_951_743_655_321_85 / 2.0, 0.816_847_572_980_458_5),
            ],
        ),
        (2, 5) => symmetric_2d(
            5,
            &[
                Orbit::Centroid(0.225 / 2.0),
                Orbit::Three(0.132_394_152_788_506_2 / 2.0, 0.059_715_871_789_769_82),
                Orbit::Three(0.125_939_180_544_827_15 / 2.0, 0.797_426_985_353_087_3),
            ],
        ),
        (3, 2) => {
            let a = 0.585_410_196_624_968_5;
            let b = 0.138_196_601_125_010_5;
            let points = (0..4)
                .map(|k| {
                    let mut p = [b; 4];
                    p[k] = a;
                    p
                })
                .collect();
            RawRule {
                degree: 2,
                points,
                weights: vec![1.0 / 24.0; 4],
            }
        }
        _ => collapsed(dim, degree),
    }
}

/// Symmetry orbits of the triangle, with their weight.
enum Orbit {
    Centroid(f64),
    /// `(a, b, b)` and its permutations, `b = (1 - a) / 2`.
    Three(f64, f64),
}

fn symmetric_2d(degree: usize, orbits: &[Orbit]) -> RawRule {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for orbit in orbits {
        match *orbit {
            Orbit::Centroid(w) => {
                points.push([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0]);
                weights.push(w);
            }
            Orbit::Three(w, a) => {
                let b = 0.5 * (1.0 - a);
                for k in 0..3 {
                    let mut p = [b, b, b, 0.0];
                    p[k] = a;
                    points.push(p);
                    weights.push(w);
                }
            }
        }
    }
    RawRule {
        degree,
        points,
        weights,
    }
}

/// Conical product rule: Gauss–Legendre in the innermost direction and
/// Gauss–Jacobi with weight `(1-t)^k` in the collapsed directions.
fn collapsed(dim: usize, degree: usize) -> RawRule {
    let m = (degree + 2) / 2;
    let (u, wu) = gauss_jacobi_unit(m, 0);
    let (v, wv) = gauss_jacobi_unit(m, 1);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    if dim == 2 {
        for (j, &vj) in v.iter().enumerate() {
            for (i, &ui) in u.iter().enumerate() {
                let x = ui * (1.0 - vj);
                let y = vj;
                points.push([1.0 - x - y, x, y, 0.0]);
                weights.push(wu[i] * wv[j]);
            }
        }
    } else {
        let (w, ww) = gauss_jacobi_unit(m, 2);
        for (k, &wk) in w.iter().enumerate() {
            for (j, &vj) in v.iter().enumerate() {
                for (i, &ui) in u.iter().enumerate() {
                    let x = ui * (1.0 - vj) * (1.0 - wk);
                    let y = vj * (1.0 - wk);
                    let z = wk;
                    points.push([1.0 - x - y - z, x, y, z]);
                    weights.push(wu[i] * wv[j] * ww[k]);
                }
            }
        }
    }
    RawRule {
        degree: 2 * m - 1,
        points,
        weights,
    }
}

/// `m`-point Gauss rule on `[0,1]` for the weight `(1-t)^alpha`.
fn gauss_jacobi_unit(m: usize, alpha: u32) -> (Vec<f64>, Vec<f64>) {
    let a = alpha as f64;
    let b = 0.0;
    let mut jac = DMatrix::<f64>::zeros(m, m);
    for n in 0..m {
        let nf = n as f64;
        let s = 2.0 * nf + a + b;
        jac[(n, n)] = if n == 0 {
            (b - a) / (a + b + 2.0)
        } else {
            (b * b - a * a) / (s * (s + 2.0))
        };
        if n + 1 < m {
            let k = nf + 1.0;
            let s = 2.0 * k + a + b;
            let off = (4.0 * k * (k + a) * (k + b) * (k + a + b) / (s * s * (s + 1.0) * (s - 1.0))).sqrt();
            jac[(n, n + 1)] = off;
            jac[(n + 1, n)] = off;
        }
    }
    // mu0 = int_{-1}^{1} (1-x)^alpha dx
    let mu0 = 2f64.powi(alpha as i32 + 1) / (a + 1.0);
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            let x = eig.eigenvalues[i];
            let v0 = eig.eigenvectors[(0, i)];
            (x, mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    let scale = 0.5f64.powi(alpha as i32 + 1);
    let nodes = pairs.iter().map(|p| 0.5 * (1.0 + p.0)).collect();
    let weights = pairs.iter().map(|p| p.1 * scale).collect();
    (nodes, weights)
}

/// `∫_T f` over element `e`, with `f` evaluated at physical points.
pub fn integrate<T: Real>(mesh: &Mesh<T>, element: usize, f: impl Fn(&[T]) -> T, degree: usize) -> Result<T> {
    let q = rule::<T>(mesh.dim(), degree)?;
    integrate_with(mesh, element, &q, f)
}

/// Like [`integrate`] with a preselected rule.
pub fn integrate_with<T: Real>(mesh: &Mesh<T>, element: usize, q: &QuadRule<T>, f: impl Fn(&[T]) -> T) -> Result<T> {
    let dim = mesh.dim();
    let mut x = [T::zero(); 3];
    let mut acc = T::zero();
    for (p, &w) in q.points.iter().zip(&q.weights) {
        mesh.map_point(element, &p[..=dim], &mut x);
        acc += w * f(&x[..dim]);
    }
    if !acc.is_finite() {
        return Err(Error::NonFinite { element });
    }
    Ok(acc * jacobian_scale(mesh, element))
}

/// `|det J|` of the affine map from the reference simplex onto `e`.
#[inline]
pub fn jacobian_scale<T: Real>(mesh: &Mesh<T>, e: usize) -> T {
    let fact = if mesh.dim() == 2 { T::lit(2.0) } else { T::lit(6.0) };
    mesh.volume(e) * fact
}

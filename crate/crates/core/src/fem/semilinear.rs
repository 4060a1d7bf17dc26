//! Damped Newton solver for `−Δy + a(·,y) = f` with `y = 0` on `∂Ω`.

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::nonlinearity::Nonlinearity;
use crate::scalar::Real;

use super::assembly::{assemble_load, assemble_stiffness, assemble_weighted_mass, DofMap};
use super::sparse::{solve_sparse, SparseMatrix, TripletBuilder};
use super::{Field, P1Function, QuadDegrees};

const MAX_ITERATIONS: usize = 50;
const MAX_HALVINGS: usize = 30;

/// Convergence record of a Newton solve.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NewtonReport {
    /// Newton steps taken.
    pub iterations: usize,
    /// Residual (or increment) norms, one per iterate.
    pub history: Vec<f64>,
}

/// Residual tolerance: `1e-10`, relaxed to the precision of `T` when coarser.
pub(crate) fn residual_tolerance<T: Real>() -> T {
    T::lit(1e-10f64.max(T::epsilon_f64().powf(0.75)))
}

pub(crate) fn add<T: Real>(a: &SparseMatrix<T>, b: &SparseMatrix<T>) -> SparseMatrix<T> {
    let mut t = TripletBuilder::with_capacity(a.nrows(), a.ncols(), a.nnz() + b.nnz());
    for (r, c, v) in a.triplets().chain(b.triplets()) {
        t.push(r, c, v);
    }
    t.finish()
}

pub(crate) fn inf_norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

fn l2_norm<T: Real>(v: &[T]) -> T {
    v.iter().map(|x| *x * *x).sum::<T>().sqrt()
}

/// Solves the Galerkin problem `(∇y,∇v) + (a(·,y),v) = (f,v)` for all P1 `v`
/// vanishing on the boundary. Stops when the residual vector has
/// `‖R‖∞ ≤ 1e-10`; steps are halved (up to 30 times) while the residual
/// norm fails to decrease.
pub fn semilinear_solve<T: Real>(
    mesh: &Mesh<T>,
    a: &Nonlinearity,
    rhs: &dyn Field<T>,
    guess: &P1Function<T>,
    degrees: QuadDegrees,
) -> Result<(P1Function<T>, NewtonReport)> {
    if guess.values.len() != mesh.num_vertices() {
        return Err(Error::DimensionMismatch("guess does not match the mesh".into()));
    }
    let dofs = DofMap::new(mesh, true);
    let stiff = assemble_stiffness(mesh, true)?;
    let load = assemble_load(mesh, &dofs, degrees.data, |e, b, x| rhs.value(mesh, e, b, x))?;
    let residual = |y: &[T]| -> Result<Vec<T>> {
        let full = dofs.scatter(y);
        let nl = assemble_load(mesh, &dofs, degrees.assembly, |e, b, x| {
            let v: T = mesh.element(e).iter().zip(b).map(|(&k, &l)| l * full[k]).sum();
            a.value(x, v)
        })?;
        let ky = stiff.mul_vec(y);
        Ok((0..y.len()).map(|i| ky[i] + nl[i] - load[i]).collect())
    };

    let tol = residual_tolerance::<T>();
    let mut y = dofs.gather(&guess.values);
    let mut r = residual(&y)?;
    let mut report = NewtonReport::default();
    loop {
        let rn = inf_norm(&r);
        report.history.push(rn.as_f64());
        if rn <= tol {
            break;
        }
        if report.iterations == MAX_ITERATIONS {
            return Err(Error::NotConverged {
                solver: "semilinear Newton",
                iterations: report.iterations,
                history: report.history,
            });
        }
        report.iterations += 1;

        let full = dofs.scatter(&y);
        let jac_a = assemble_weighted_mass(mesh, &dofs, degrees.assembly, |e, b, x| {
            let v: T = mesh.element(e).iter().zip(b).map(|(&k, &l)| l * full[k]).sum();
            a.dy(x, v)
        })?;
        let jac = add(&stiff, &jac_a);
        let neg: Vec<T> = r.iter().map(|v| -*v).collect();
        let delta = solve_sparse(&jac, &neg)?;

        let r0 = l2_norm(&r);
        let mut t = T::one();
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<T> = y.iter().zip(&delta).map(|(a, d)| *a + t * *d).collect();
            let rt = residual(&trial)?;
            if l2_norm(&rt) < r0 || inf_norm(&rt) <= tol {
                accepted = Some((trial, rt));
                break;
            }
            t *= T::lit(0.5);
        }
        match accepted {
            Some((ny, nr)) => {
                y = ny;
                r = nr;
            }
            None => {
                // No decrease even for tiny steps: take the full step and let
                // the iteration cap decide.
                y = y.iter().zip(&delta).map(|(a, d)| *a + *d).collect();
                r = residual(&y)?;
            }
        }
    }
    Ok((
        P1Function {
            values: dofs.scatter(&y),
            dirichlet: true,
        },
        report,
    ))
}

//! Global assembly of P1 matrices and load vectors.
//!
//! Element contributions are accumulated in element order and duplicates are
//! summed in that order, so the result is bit-reproducible.

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::quadrature::rule;
use crate::scalar::Real;

use super::for_each_point;
use super::sparse::{SparseMatrix, TripletBuilder};

const CONSTRAINED: usize = usize::MAX;

/// Numbering of the unknowns: all vertices, or interior vertices only.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DofMap {
    index: Vec<usize>,
    free: Vec<usize>,
}

impl DofMap {
    /// With `dirichlet` the boundary vertices are eliminated.
    pub fn new<T: Real>(mesh: &Mesh<T>, dirichlet: bool) -> Self {
        let mut index = vec![CONSTRAINED; mesh.num_vertices()];
        let mut free = Vec::new();
        for (v, slot) in index.iter_mut().enumerate() {
            if !(dirichlet && mesh.is_boundary_vertex(v)) {
                *slot = free.len();
                free.push(v);
            }
        }
        Self { index, free }
    }

    /// Number of unknowns.
    pub fn len(&self) -> usize {
        self.free.len()
    }

    pub fn is_empty(&self) -> bool {
        self.free.is_empty()
    }

    /// Unknown index of vertex `v`, `None` if constrained.
    #[inline]
    pub fn dof(&self, v: usize) -> Option<usize> {
        match self.index[v] {
            CONSTRAINED => None,
            i => Some(i),
        }
    }

    /// Vertex carrying unknown `i`.
    pub fn vertex(&self, i: usize) -> usize {
        self.free[i]
    }

    /// Restricts vertex values to the unknowns.
    pub fn gather<T: Copy>(&self, full: &[T]) -> Vec<T> {
        self.free.iter().map(|&v| full[v]).collect()
    }

    /// Expands unknowns to vertex values, constrained vertices set to zero.
    pub fn scatter<T: Real>(&self, reduced: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.index.len()];
        for (&v, &x) in self.free.iter().zip(reduced) {
            out[v] = x;
        }
        out
    }
}

fn check_volume<T: Real>(mesh: &Mesh<T>, e: usize) -> Result<()> {
    let vol = mesh.volume(e);
    if vol > T::zero() && vol.is_finite() {
        Ok(())
    } else {
        Err(Error::DegenerateElement {
            element: e,
            volume: vol.as_f64(),
        })
    }
}

/// `∫_T ∇λ_i·∇λ_j`.
pub fn local_stiffness<T: Real>(mesh: &Mesh<T>, e: usize) -> [[T; 4]; 4] {
    let g = &mesh.geometry(e);
    let n = mesh.dim() + 1;
    let mut k = [[T::zero(); 4]; 4];
    for i in 0..n {
        for j in 0..n {
            let dot: T = (0..mesh.dim()).map(|c| g.grad_lambda[i][c] * g.grad_lambda[j][c]).sum();
            k[i][j] = g.volume * dot;
        }
    }
    k
}

/// `∫_T λ_i λ_j = |T| d! (1 + δ_ij) / (d+2)!`.
pub fn local_mass<T: Real>(mesh: &Mesh<T>, e: usize) -> [[T; 4]; 4] {
    let n = mesh.dim() + 1;
    let c = mesh.volume(e) / T::from_usize_lossy(n * (n + 1));
    let mut m = [[T::zero(); 4]; 4];
    for (i, row) in m.iter_mut().enumerate().take(n) {
        for (j, v) in row.iter_mut().enumerate().take(n) {
            *v = if i == j { c + c } else { c };
        }
    }
    m
}

fn assemble_from_local<T: Real>(
    mesh: &Mesh<T>,
    dofs: &DofMap,
    mut local: impl FnMut(usize) -> Result<[[T; 4]; 4]>,
) -> Result<SparseMatrix<T>> {
    let n = mesh.dim() + 1;
    let mut b = TripletBuilder::with_capacity(dofs.len(), dofs.len(), mesh.num_elements() * n * n);
    for e in 0..mesh.num_elements() {
        check_volume(mesh, e)?;
        let k = local(e)?;
        let verts = mesh.element(e);
        for i in 0..n {
            let Some(r) = dofs.dof(verts[i]) else { continue };
            for j in 0..n {
                if let Some(c) = dofs.dof(verts[j]) {
                    b.push(r, c, k[i][j]);
                }
            }
        }
    }
    Ok(b.finish())
}

/// Stiffness matrix `∫ ∇φ_i·∇φ_j`; with `dirichlet` the boundary rows and
/// columns are removed and the unknowns follow [`DofMap::new`].
pub fn assemble_stiffness<T: Real>(mesh: &Mesh<T>, dirichlet: bool) -> Result<SparseMatrix<T>> {
    let dofs = DofMap::new(mesh, dirichlet);
    assemble_from_local(mesh, &dofs, |e| Ok(local_stiffness(mesh, e)))
}

/// Full (unconstrained) mass matrix `∫ φ_i φ_j`.
pub fn assemble_mass_p1<T: Real>(mesh: &Mesh<T>) -> Result<SparseMatrix<T>> {
    let dofs = DofMap::new(mesh, false);
    assemble_from_local(mesh, &dofs, |e| Ok(local_mass(mesh, e)))
}

/// Weighted mass `∫ c φ_i φ_j` with `c(e, bary, x)` sampled at a rule of
/// the given degree.
pub fn assemble_weighted_mass<T: Real>(
    mesh: &Mesh<T>,
    dofs: &DofMap,
    degree: usize,
    coef: impl Fn(usize, &[T], &[T]) -> T,
) -> Result<SparseMatrix<T>> {
    let q = rule::<T>(mesh.dim(), degree)?;
    let n = mesh.dim() + 1;
    assemble_from_local(mesh, dofs, |e| {
        let mut m = [[T::zero(); 4]; 4];
        for_each_point(mesh, e, &q, |w, bary, x| {
            let c = w * coef(e, bary, x);
            for i in 0..n {
                let ci = c * bary[i];
                for j in 0..n {
                    m[i][j] += ci * bary[j];
                }
            }
        });
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { element: e });
        }
        Ok(m)
    })
}

/// Load vector `∫ f φ_i` over the unknowns of `dofs`.
pub fn assemble_load<T: Real>(
    mesh: &Mesh<T>,
    dofs: &DofMap,
    degree: usize,
    f: impl Fn(usize, &[T], &[T]) -> T,
) -> Result<Vec<T>> {
    let q = rule::<T>(mesh.dim(), degree)?;
    let n = mesh.dim() + 1;
    let mut out = vec![T::zero(); dofs.len()];
    for e in 0..mesh.num_elements() {
        check_volume(mesh, e)?;
        let mut local = [T::zero(); 4];
        for_each_point(mesh, e, &q, |w, bary, x| {
            let c = w * f(e, bary, x);
            for i in 0..n {
                local[i] += c * bary[i];
            }
        });
        for (i, &v) in mesh.element(e).iter().enumerate() {
            if let Some(r) = dofs.dof(v) {
                if !local[i].is_finite() {
                    return Err(Error::NonFinite { element: e });
                }
                out[r] += local[i];
            }
        }
    }
    Ok(out)
}

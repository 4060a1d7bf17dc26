//! Conforming simplicial meshes in two and three dimensions.
//!
//! A [`Mesh`] is immutable once built. Refinement ([`refine`], [`uniform_refine`])
//! produces a new mesh together with the parent map needed to transfer
//! discrete fields.

mod io;
mod refine;

use std::collections::HashMap;

pub use io::{read_ascii, write_ascii, write_vtk, VtkField};
pub use refine::{refine, uniform_refine, Refinement};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Sentinel for "no neighbour" in adjacency tables.
pub const NONE: usize = usize::MAX;

/// A `(d-1)`-dimensional side of the mesh.
#[derive(Clone, Debug)]
pub struct Face<T> {
    /// Vertex indices (the first `dim` entries are used).
    pub vertices: [usize; 3],
    /// Lower-indexed adjacent element (`T⁺`).
    pub plus: usize,
    /// Higher-indexed adjacent element (`T⁻`), `None` on the boundary.
    pub minus: Option<usize>,
    /// Local index of the vertex of `plus` opposite this face.
    pub local_plus: usize,
    /// Local index of the vertex of `minus` opposite this face.
    pub local_minus: usize,
    /// Unit normal pointing from `T⁺` towards `T⁻` (outward for boundary faces).
    pub normal: [T; 3],
    /// Length (2D) or area (3D).
    pub measure: T,
}

/// Affine data of one element.
#[derive(Clone, Debug)]
pub struct ElementGeometry<T> {
    /// Positive volume `|T|`.
    pub volume: T,
    /// Gradients of the barycentric coordinates, one row per local vertex.
    pub grad_lambda: [[T; 3]; 4],
    /// `diam(T)`, the longest edge.
    pub diameter: T,
}

#[derive(Clone, Debug)]
pub struct Mesh<T> {
    dim: usize,
    coords: Vec<T>,
    cells: Vec<usize>,
    generation: Vec<u32>,
    geometry: Vec<ElementGeometry<T>>,
    interior_faces: Vec<Face<T>>,
    boundary_faces: Vec<Face<T>>,
    neighbors: Vec<usize>,
    boundary_vertex: Vec<bool>,
}

impl<T: Real> Mesh<T> {
    /// Builds a mesh from flat coordinate (`nv * dim`) and connectivity
    /// (`ne * (dim + 1)`) arrays. Negatively oriented elements are reoriented.
    pub fn new(dim: usize, coords: Vec<T>, cells: Vec<usize>) -> Result<Self> {
        let generation = vec![0; cells.len() / (dim + 1)];
        Self::with_generation(dim, coords, cells, generation)
    }

    pub(crate) fn with_generation(
        dim: usize,
        coords: Vec<T>,
        mut cells: Vec<usize>,
        generation: Vec<u32>,
    ) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidMesh(format!("dimension {dim} not supported")));
        }
        if !coords.len().is_multiple_of(dim) || !cells.len().is_multiple_of(dim + 1) {
            return Err(Error::InvalidMesh("array lengths do not match the dimension".into()));
        }
        let nv = coords.len() / dim;
        let ne = cells.len() / (dim + 1);
        if ne == 0 {
            return Err(Error::InvalidMesh("mesh has no elements".into()));
        }
        if generation.len() != ne {
            return Err(Error::InvalidMesh("generation table length mismatch".into()));
        }
        if let Some(&bad) = cells.iter().find(|&&v| v >= nv) {
            return Err(Error::InvalidMesh(format!("vertex index {bad} out of range")));
        }

        let np = dim + 1;
        let mut geometry = Vec::with_capacity(ne);
        for e in 0..ne {
            let cell = &mut cells[e * np..(e + 1) * np];
            let mut det = jacobian_det(dim, &coords, cell);
            if det < T::zero() {
                cell.swap(0, 1);
                det = -det;
            }
            let scale = max_edge(dim, &coords, cell).powi(dim as i32);
            if !(det > scale * T::lit(1e-13)) {
                return Err(Error::DegenerateElement {
                    element: e,
                    volume: det.as_f64(),
                });
            }
            geometry.push(element_geometry(dim, &coords, cell, det));
        }

        let mut mesh = Mesh {
            dim,
            coords,
            cells,
            generation,
            geometry,
            interior_faces: Vec::new(),
            boundary_faces: Vec::new(),
            neighbors: vec![NONE; ne * np],
            boundary_vertex: vec![false; nv],
        };
        mesh.build_faces()?;
        Ok(mesh)
    }

    fn build_faces(&mut self) -> Result<()> {
        let dim = self.dim;
        let np = dim + 1;
        let ne = self.num_elements();
        let mut seen: HashMap<[usize; 3], (usize, usize)> = HashMap::with_capacity(ne * np);
        let mut pairs: Vec<(usize, usize, usize, usize)> = Vec::new();
        let mut open: Vec<(usize, usize)> = Vec::new();

        for e in 0..ne {
            for k in 0..np {
                let key = face_key(self.element(e), k);
                match seen.remove(&key) {
                    Some((e0, k0)) => pairs.push((e0, k0, e, k)),
                    None => {
                        seen.insert(key, (e, k));
                    }
                }
            }
        }
        // A face key that reappears after pairing means three elements share it.
        for (e, k) in seen.into_values() {
            open.push((e, k));
        }
        open.sort_unstable();

        let mut multiplicity: HashMap<[usize; 3], usize> = HashMap::new();
        for &(e0, k0, _, _) in &pairs {
            *multiplicity.entry(face_key(self.element(e0), k0)).or_default() += 1;
        }
        for &(e, k) in &open {
            if multiplicity.contains_key(&face_key(self.element(e), k)) {
                return Err(Error::InvalidMesh(format!(
                    "face of element {e} is shared by more than two elements"
                )));
            }
        }
        if multiplicity.values().any(|&m| m > 1) {
            return Err(Error::InvalidMesh("face shared by more than two elements".into()));
        }

        pairs.sort_unstable();
        let mut interior = Vec::with_capacity(pairs.len());
        for (e0, k0, e1, k1) in pairs {
            let (plus, lp, minus, lm) = if e0 < e1 { (e0, k0, e1, k1) } else { (e1, k1, e0, k0) };
            self.neighbors[plus * np + lp] = minus;
            self.neighbors[minus * np + lm] = plus;
            interior.push(self.make_face(plus, lp, Some((minus, lm))));
        }
        let mut boundary = Vec::with_capacity(open.len());
        for (e, k) in open {
            let face = self.make_face(e, k, None);
            for &v in &face.vertices[..dim] {
                self.boundary_vertex[v] = true;
            }
            boundary.push(face);
        }
        self.interior_faces = interior;
        self.boundary_faces = boundary;
        Ok(())
    }

    fn make_face(&self, plus: usize, local_plus: usize, minus: Option<(usize, usize)>) -> Face<T> {
        let dim = self.dim;
        let cell = self.element(plus);
        let mut vertices = [NONE; 3];
        let mut n = 0;
        for (k, &v) in cell.iter().enumerate() {
            if k != local_plus {
                vertices[n] = v;
                n += 1;
            }
        }
        let g = &self.geometry[plus];
        let grad = g.grad_lambda[local_plus];
        let norm = (0..dim).map(|i| grad[i] * grad[i]).sum::<T>().sqrt();
        let mut normal = [T::zero(); 3];
        for i in 0..dim {
            normal[i] = -grad[i] / norm;
        }
        let measure = T::from_usize_lossy(dim) * g.volume * norm;
        let (minus, local_minus) = match minus {
            Some((m, lm)) => (Some(m), lm),
            None => (None, NONE),
        };
        Face {
            vertices,
            plus,
            minus,
            local_plus,
            local_minus,
            normal,
            measure,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_vertices(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn num_elements(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    #[inline]
    pub fn vertex(&self, i: usize) -> &[T] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn element(&self, e: usize) -> &[usize] {
        let np = self.dim + 1;
        &self.cells[e * np..(e + 1) * np]
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    /// Bisection depth of each element.
    pub fn generation(&self) -> &[u32] {
        &self.generation
    }

    #[inline]
    pub fn geometry(&self, e: usize) -> &ElementGeometry<T> {
        &self.geometry[e]
    }

    #[inline]
    pub fn volume(&self, e: usize) -> T {
        self.geometry[e].volume
    }

    /// `h_T = diam(T)`.
    #[inline]
    pub fn diameter(&self, e: usize) -> T {
        self.geometry[e].diameter
    }

    pub fn total_volume(&self) -> T {
        self.geometry.iter().map(|g| g.volume).sum()
    }

    pub fn interior_faces(&self) -> &[Face<T>] {
        &self.interior_faces
    }

    pub fn boundary_faces(&self) -> &[Face<T>] {
        &self.boundary_faces
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    /// Element across local face `k` of `e`, if any.
    pub fn neighbor(&self, e: usize, k: usize) -> Option<usize> {
        match self.neighbors[e * (self.dim + 1) + k] {
            NONE => None,
            n => Some(n),
        }
    }

    /// The patch `N_T`: `e` together with every element sharing a side with it.
    pub fn patch(&self, e: usize) -> Vec<usize> {
        let mut out = vec![e];
        out.extend((0..=self.dim).filter_map(|k| self.neighbor(e, k)));
        out.sort_unstable();
        out
    }

    /// Physical point with barycentric coordinates `bary` in element `e`.
    #[inline]
    pub fn map_point(&self, e: usize, bary: &[T], out: &mut [T; 3]) {
        *out = [T::zero(); 3];
        for (k, &v) in self.element(e).iter().enumerate() {
            let x = self.vertex(v);
            for i in 0..self.dim {
                out[i] += bary[k] * x[i];
            }
        }
    }

    pub fn centroid(&self, e: usize) -> [T; 3] {
        let w = T::one() / T::from_usize_lossy(self.dim + 1);
        let bary = [w; 4];
        let mut x = [T::zero(); 3];
        self.map_point(e, &bary[..=self.dim], &mut x);
        x
    }

    /// Smallest interior angle (2D) or dihedral angle (3D) in radians.
    pub fn min_angle(&self) -> T {
        (0..self.num_elements())
            .map(|e| self.element_min_angle(e))
            .fold(T::infinity(), T::min)
    }

    pub fn element_min_angle(&self, e: usize) -> T {
        // The angle between faces i and j is pi minus the angle between
        // their outward normals, i.e. acos(-n_i . n_j). In 2D the "faces"
        // are edges and this is the interior angle at the shared vertex.
        let g = &self.geometry[e];
        let np = self.dim + 1;
        let mut best = T::infinity();
        for i in 0..np {
            for j in i + 1..np {
                let a = g.grad_lambda[i];
                let b = g.grad_lambda[j];
                let dot: T = (0..self.dim).map(|d| a[d] * b[d]).sum();
                let na: T = (0..self.dim).map(|d| a[d] * a[d]).sum::<T>().sqrt();
                let nb: T = (0..self.dim).map(|d| b[d] * b[d]).sum::<T>().sqrt();
                let c = (-dot / (na * nb)).max(-T::one()).min(T::one());
                best = best.min(c.acos());
            }
        }
        best
    }

    /// Checks the structural invariants of a conforming mesh: positive
    /// volumes, every face shared by at most two elements, no vertex sitting
    /// at the midpoint of an edge (hanging node) and a closed boundary.
    pub fn check_conformity(&self) -> Result<()> {
        for (e, g) in self.geometry.iter().enumerate() {
            if !(g.volume > T::zero()) {
                return Err(Error::DegenerateElement {
                    element: e,
                    volume: g.volume.as_f64(),
                });
            }
        }
        let mut by_position: HashMap<Vec<u64>, usize> = HashMap::with_capacity(self.num_vertices());
        for v in 0..self.num_vertices() {
            let key = self.vertex(v).iter().map(|x| x.as_f64().to_bits()).collect();
            if by_position.insert(key, v).is_some() {
                return Err(Error::InvalidMesh(format!("duplicate vertex position at {v}")));
            }
        }
        let half = T::lit(0.5);
        let np = self.dim + 1;
        for e in 0..self.num_elements() {
            let cell = self.element(e);
            for i in 0..np {
                for j in i + 1..np {
                    let (a, b) = (self.vertex(cell[i]), self.vertex(cell[j]));
                    let key: Vec<u64> = (0..self.dim)
                        .map(|d| ((a[d] + b[d]) * half).as_f64().to_bits())
                        .collect();
                    if let Some(&v) = by_position.get(&key) {
                        return Err(Error::InvalidMesh(format!(
                            "hanging vertex {v} on an edge of element {e}"
                        )));
                    }
                }
            }
        }
        let mut closure = [T::zero(); 3];
        let mut area = T::zero();
        for f in &self.boundary_faces {
            for d in 0..self.dim {
                closure[d] += f.normal[d] * f.measure;
            }
            area += f.measure;
        }
        let gap = closure.iter().map(|c| c.abs()).fold(T::zero(), T::max);
        if gap > area * T::lit(1e-10).max(T::epsilon() * T::lit(64.0)) {
            return Err(Error::InvalidMesh("boundary is not closed".into()));
        }
        Ok(())
    }
}

fn face_key(cell: &[usize], k: usize) -> [usize; 3] {
    let mut key = [NONE; 3];
    let mut n = 0;
    for (i, &v) in cell.iter().enumerate() {
        if i != k {
            key[n] = v;
            n += 1;
        }
    }
    key[..n].sort_unstable();
    key
}

fn point<T: Real>(dim: usize, coords: &[T], v: usize) -> [T; 3] {
    let mut p = [T::zero(); 3];
    p[..dim].copy_from_slice(&coords[v * dim..(v + 1) * dim]);
    p
}

fn jacobian<T: Real>(dim: usize, coords: &[T], cell: &[usize]) -> [[T; 3]; 3] {
    let x0 = point(dim, coords, cell[0]);
    let mut jac = [[T::zero(); 3]; 3];
    for k in 1..=dim {
        let xk = point(dim, coords, cell[k]);
        for i in 0..dim {
            jac[i][k - 1] = xk[i] - x0[i];
        }
    }
    jac
}

fn det_of<T: Real>(dim: usize, j: &[[T; 3]; 3]) -> T {
    if dim == 2 {
        j[0][0] * j[1][1] - j[0][1] * j[1][0]
    } else {
        j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1]) - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
            + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0])
    }
}

fn jacobian_det<T: Real>(dim: usize, coords: &[T], cell: &[usize]) -> T {
    det_of(dim, &jacobian(dim, coords, cell))
}

fn max_edge<T: Real>(dim: usize, coords: &[T], cell: &[usize]) -> T {
    let mut best = T::zero();
    for i in 0..cell.len() {
        for j in i + 1..cell.len() {
            let (a, b) = (point(dim, coords, cell[i]), point(dim, coords, cell[j]));
            let l2: T = (0..dim).map(|d| (a[d] - b[d]) * (a[d] - b[d])).sum();
            best = best.max(l2);
        }
    }
    best.sqrt()
}

fn element_geometry<T: Real>(dim: usize, coords: &[T], cell: &[usize], det: T) -> ElementGeometry<T> {
    let j = jacobian(dim, coords, cell);
    // Rows of J^{-1} are the gradients of lambda_1..lambda_d.
    let mut inv = [[T::zero(); 3]; 3];
    if dim == 2 {
        inv[0][0] = j[1][1] / det;
        inv[0][1] = -j[0][1] / det;
        inv[1][0] = -j[1][0] / det;
        inv[1][1] = j[0][0] / det;
    } else {
        for r in 0..3 {
            for c in 0..3 {
                // cofactor of (c, r)
                let (r1, r2) = ((c + 1) % 3, (c + 2) % 3);
                let (c1, c2) = ((r + 1) % 3, (r + 2) % 3);
                inv[r][c] = (j[r1][c1] * j[r2][c2] - j[r1][c2] * j[r2][c1]) / det;
            }
        }
    }
    let mut grad = [[T::zero(); 3]; 4];
    for k in 1..=dim {
        for i in 0..dim {
            grad[k][i] = inv[k - 1][i];
            grad[0][i] -= inv[k - 1][i];
        }
    }
    let factorial: T = (1..=dim).map(T::from_usize_lossy).fold(T::one(), |a, b| a * b);
    ElementGeometry {
        volume: det / factorial,
        grad_lambda: grad,
        diameter: max_edge(dim, coords, cell),
    }
}

/// L-shaped domain `(-1,1)^2 \ [0,1) x (-1,0]`: six right triangles whose
/// hypotenuses meet at the reentrant corner, refined uniformly `levels` times.
pub fn build_lshape<T: Real>(levels: usize) -> Result<Mesh<T>> {
    let c = |v: &[f64]| v.iter().map(|&x| T::lit(x)).collect::<Vec<_>>();
    let coords = c(&[
        -1.0, -1.0, // 0
        0.0, -1.0, // 1
        -1.0, 0.0, // 2
        0.0, 0.0, // 3
        1.0, 0.0, // 4
        -1.0, 1.0, // 5
        0.0, 1.0, // 6
        1.0, 1.0, // 7
    ]);
    let cells = vec![
        0, 1, 3, //
        0, 3, 2, //
        2, 3, 5, //
        3, 6, 5, //
        3, 4, 7, //
        3, 7, 6,
    ];
    let mut mesh = Mesh::new(2, coords, cells)?;
    for _ in 0..levels {
        mesh = uniform_refine(&mesh)?.mesh;
    }
    Ok(mesh)
}

/// Unit square split along the diagonal `(0,0)-(1,1)` into two triangles.
pub fn build_unit_square<T: Real>(levels: usize) -> Result<Mesh<T>> {
    let coords = [0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0]
        .iter()
        .map(|&x| T::lit(x))
        .collect();
    let mut mesh = Mesh::new(2, coords, vec![0, 1, 2, 0, 2, 3])?;
    for _ in 0..levels {
        mesh = uniform_refine(&mesh)?.mesh;
    }
    Ok(mesh)
}

/// Unit cube as the six Kuhn tetrahedra around the diagonal `(0,0,0)-(1,1,1)`.
pub fn build_cube<T: Real>(levels: usize) -> Result<Mesh<T>> {
    let mut coords = Vec::with_capacity(24);
    for v in 0..8usize {
        for d in 0..3 {
            coords.push(T::from_usize_lossy((v >> d) & 1));
        }
    }
    let mut cells = Vec::with_capacity(24);
    for perm in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
        let mut v = 0usize;
        cells.push(v);
        for &axis in &perm {
            v |= 1 << axis;
            cells.push(v);
        }
    }
    let mut mesh = Mesh::new(3, coords, cells)?;
    for _ in 0..levels {
        mesh = uniform_refine(&mesh)?.mesh;
    }
    Ok(mesh)
}

/// The reference simplex as a one-element mesh.
pub fn reference_simplex<T: Real>(dim: usize) -> Result<Mesh<T>> {
    let mut coords = vec![T::zero(); dim];
    for k in 0..dim {
        for d in 0..dim {
            coords.push(if d == k { T::one() } else { T::zero() });
        }
    }
    Mesh::new(dim, coords, (0..=dim).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lshape_level0_counts_and_area() {
        let m: Mesh<f64> = build_lshape(0).unwrap();
        assert_eq!(m.num_elements(), 6);
        assert_eq!(m.num_vertices(), 8);
        assert!((m.total_volume() - 3.0).abs() < 1e-14);
        m.check_conformity().unwrap();
    }

    #[test]
    fn lshape_interior_face_count_handshake() {
        let m: Mesh<f64> = build_lshape(0).unwrap();
        let nb = m.boundary_faces().len();
        // 8 boundary edges on the L outline, each unit edge whole.
        assert_eq!(nb, 8);
        assert_eq!(m.interior_faces().len(), (3 * 6 - nb) / 2);
    }

    #[test]
    fn unit_square_single_interior_face_with_unit_normal() {
        let m: Mesh<f64> = build_unit_square(0).unwrap();
        let faces = m.interior_faces();
        assert_eq!(faces.len(), 1);
        let n = faces[0].normal;
        assert!((n[0].hypot(n[1]) - 1.0).abs() < 1e-15);
        assert_eq!(faces[0].plus, 0);
        assert_eq!(faces[0].minus, Some(1));
        // T+ = lower-right triangle, so the normal points up-left.
        assert!(n[0] < 0.0 && n[1] > 0.0);
        assert!((faces[0].measure - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn cube_kuhn_split() {
        let m: Mesh<f64> = build_cube(0).unwrap();
        assert_eq!(m.num_elements(), 6);
        assert!((m.total_volume() - 1.0).abs() < 1e-14);
        // 6 tets * 4 faces = 24 = 2 * interior + boundary (12 boundary triangles)
        assert_eq!(m.boundary_faces().len(), 12);
        assert_eq!(m.interior_faces().len(), 6);
        m.check_conformity().unwrap();
    }

    #[test]
    fn reoriented_and_degenerate_elements() {
        let m = Mesh::<f64>::new(2, vec![0.0, 0.0, 0.0, 1.0, 1.0, 0.0], vec![0, 1, 2]).unwrap();
        assert!((m.volume(0) - 0.5).abs() < 1e-15);
        let err = Mesh::<f64>::new(2, vec![0.0, 0.0, 1.0, 1.0, 2.0, 2.0], vec![0, 1, 2]).unwrap_err();
        assert!(matches!(err, Error::DegenerateElement { element: 0, .. }));
        assert!(Mesh::<f64>::new(2, vec![0.0, 0.0], vec![]).is_err());
    }

    #[test]
    fn barycentric_gradients_reference_triangle() {
        let m: Mesh<f64> = reference_simplex(2).unwrap();
        let g = &m.geometry(0).grad_lambda;
        assert_eq!(&g[0][..2], &[-1.0, -1.0]);
        assert_eq!(&g[1][..2], &[1.0, 0.0]);
        assert_eq!(&g[2][..2], &[0.0, 1.0]);
        assert!((m.diameter(0) - 2f64.sqrt()).abs() < 1e-15);
        let t: Mesh<f64> = reference_simplex(3).unwrap();
        assert!((t.volume(0) - 1.0 / 6.0).abs() < 1e-16);
    }

    #[test]
    fn patch_of_central_element() {
        let m: Mesh<f64> = build_lshape(0).unwrap();
        let p = m.patch(0);
        assert!(p.contains(&0) && p.contains(&1));
        assert_eq!(p.len(), 2);
    }

    #[test]
    fn hanging_node_is_detected() {
        // Two triangles on top of a big one's edge: vertex 4 hangs on edge (0,1).
        let coords = vec![0.0, 0.0, 2.0, 0.0, 1.0, -1.0, 1.0, 1.0, 1.0, 0.0];
        let cells = vec![0, 2, 1, 0, 4, 3, 4, 1, 3];
        let m = Mesh::<f64>::new(2, coords, cells).unwrap();
        assert!(m.check_conformity().is_err());
    }
}

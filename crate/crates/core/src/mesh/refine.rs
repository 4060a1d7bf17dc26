//! Longest-edge bisection with conforming closure.
//!
//! Every element that must be split is bisected through the midpoint of its
//! longest edge. After each sweep, elements carrying a midpoint on one of
//! their edges (a hanging node) are bisected again, until no hanging node
//! remains. Edges are totally ordered by (length, smallest sorted vertex
//! pair), so two elements sharing an edge always agree on it.

use std::cmp::Ordering;
use std::collections::HashMap;

use super::Mesh;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Result of a refinement step.
#[derive(Clone, Debug)]
pub struct Refinement<T> {
    pub mesh: Mesh<T>,
    /// For every new element, the element of the input mesh it descends from.
    pub parent: Vec<usize>,
    /// For every vertex appended after the input vertices, the endpoints of
    /// the edge it bisects. Endpoints always precede the new vertex.
    pub vertex_parents: Vec<[usize; 2]>,
}

impl<T: Real> Refinement<T> {
    /// Prolongates nodal values: new vertices take the mean of their edge endpoints.
    pub fn prolong_nodal(&self, values: &[T]) -> Vec<T> {
        let mut out = values.to_vec();
        out.reserve(self.vertex_parents.len());
        let half = T::lit(0.5);
        for &[a, b] in &self.vertex_parents {
            let v = (out[a] + out[b]) * half;
            out.push(v);
        }
        out
    }

    /// Transfers elementwise values by inheritance from the parent element.
    pub fn prolong_elementwise(&self, values: &[T]) -> Vec<T> {
        self.parent.iter().map(|&p| values[p]).collect()
    }

    /// Identity refinement of `mesh` (nothing was marked).
    fn identity(mesh: &Mesh<T>) -> Self {
        Refinement {
            mesh: mesh.clone(),
            parent: (0..mesh.num_elements()).collect(),
            vertex_parents: Vec::new(),
        }
    }

    /// Composes `self` (coarse -> mid) with `next` (mid -> fine).
    fn then(self, next: Refinement<T>) -> Self {
        let parent = next.parent.iter().map(|&p| self.parent[p]).collect();
        let mut vertex_parents = self.vertex_parents;
        vertex_parents.extend(next.vertex_parents);
        Refinement {
            mesh: next.mesh,
            parent,
            vertex_parents,
        }
    }
}

/// Bisects every element in `marked` at least once and closes the mesh.
pub fn refine<T: Real>(mesh: &Mesh<T>, marked: &[usize]) -> Result<Refinement<T>> {
    let ne = mesh.num_elements();
    if ne == 0 {
        return Err(Error::InvalidMesh("cannot refine an empty mesh".into()));
    }
    if let Some(&bad) = marked.iter().find(|&&e| e >= ne) {
        return Err(Error::InvalidArgument(format!(
            "marked element {bad} out of range (mesh has {ne} elements)"
        )));
    }
    if marked.is_empty() {
        return Ok(Refinement::identity(mesh));
    }

    let dim = mesh.dim();
    let np = dim + 1;
    let nv0 = mesh.num_vertices();
    let mut coords = mesh.coords().to_vec();
    let mut cells: Vec<usize> = mesh.cells().to_vec();
    let mut generation: Vec<u32> = mesh.generation().to_vec();
    let mut origin: Vec<usize> = (0..ne).collect();
    let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
    let mut vertex_parents: Vec<[usize; 2]> = Vec::new();

    let mut split = vec![false; ne];
    for &e in marked {
        split[e] = true;
    }

    let limit = 100 * ne;
    let mut closure_bisections = 0usize;
    let mut first_sweep = true;
    let half = T::lit(0.5);

    loop {
        let count = cells.len() / np;
        let mut next_cells = Vec::with_capacity(cells.len() + 2 * np);
        let mut next_gen = Vec::with_capacity(count + 1);
        let mut next_origin = Vec::with_capacity(count + 1);
        let mut any = false;

        for e in 0..count {
            let cell = &cells[e * np..(e + 1) * np];
            if !split[e] {
                next_cells.extend_from_slice(cell);
                next_gen.push(generation[e]);
                next_origin.push(origin[e]);
                continue;
            }
            any = true;
            if !first_sweep {
                closure_bisections += 1;
                if closure_bisections > limit {
                    return Err(Error::RefinementGuard { limit });
                }
            }
            let (i, j) = longest_edge(dim, &coords, cell);
            let (a, b) = (cell[i], cell[j]);
            let key = if a < b { (a, b) } else { (b, a) };
            let m = *midpoints.entry(key).or_insert_with(|| {
                let id = coords.len() / dim;
                for d in 0..dim {
                    let v = (coords[key.0 * dim + d] + coords[key.1 * dim + d]) * half;
                    coords.push(v);
                }
                vertex_parents.push([key.0, key.1]);
                id
            });
            let mut c1 = cell.to_vec();
            c1[j] = m;
            let mut c2 = cell.to_vec();
            c2[i] = m;
            next_cells.extend_from_slice(&c1);
            next_cells.extend_from_slice(&c2);
            for _ in 0..2 {
                next_gen.push(generation[e] + 1);
                next_origin.push(origin[e]);
            }
        }
        if !any {
            break;
        }
        cells = next_cells;
        generation = next_gen;
        origin = next_origin;
        first_sweep = false;

        // Elements with a midpoint on one of their edges must be split again.
        let count = cells.len() / np;
        split = vec![false; count];
        let mut pending = false;
        for e in 0..count {
            let cell = &cells[e * np..(e + 1) * np];
            'edges: for p in 0..np {
                for q in p + 1..np {
                    let (a, b) = (cell[p], cell[q]);
                    let key = if a < b { (a, b) } else { (b, a) };
                    if midpoints.contains_key(&key) {
                        split[e] = true;
                        pending = true;
                        break 'edges;
                    }
                }
            }
        }
        if !pending {
            break;
        }
    }

    debug_assert_eq!(coords.len() / dim, nv0 + vertex_parents.len());
    let mesh = Mesh::with_generation(dim, coords, cells, generation)?;
    Ok(Refinement {
        mesh,
        parent: origin,
        vertex_parents,
    })
}

/// `dim` sweeps of bisecting every element, halving the mesh size.
pub fn uniform_refine<T: Real>(mesh: &Mesh<T>) -> Result<Refinement<T>> {
    let mut acc = Refinement::identity(mesh);
    for _ in 0..mesh.dim() {
        let all: Vec<usize> = (0..acc.mesh.num_elements()).collect();
        let step = refine(&acc.mesh, &all)?;
        acc = acc.then(step);
    }
    Ok(acc)
}

/// Local indices of the longest edge of `cell` under the global edge order.
fn longest_edge<T: Real>(dim: usize, coords: &[T], cell: &[usize]) -> (usize, usize) {
    let len2 = |a: usize, b: usize| -> T {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        (0..dim)
            .map(|d| {
                let t = coords[hi * dim + d] - coords[lo * dim + d];
                t * t
            })
            .sum()
    };
    let sorted = |a: usize, b: usize| if a < b { (a, b) } else { (b, a) };
    let mut best = (0, 1);
    let mut best_len = len2(cell[0], cell[1]);
    for i in 0..cell.len() {
        for j in i + 1..cell.len() {
            if (i, j) == (0, 1) {
                continue;
            }
            let l = len2(cell[i], cell[j]);
            let ord = l.partial_cmp(&best_len).unwrap_or(Ordering::Equal);
            let better = match ord {
                Ordering::Greater => true,
                Ordering::Less => false,
                Ordering::Equal => sorted(cell[i], cell[j]) < sorted(cell[best.0], cell[best.1]),
            };
            if better {
                best = (i, j);
                best_len = l;
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_cube, build_lshape, reference_simplex};

    #[test]
    fn reference_triangle_bisects_hypotenuse() {
        let m: Mesh<f64> = reference_simplex(2).unwrap();
        let r = refine(&m, &[0]).unwrap();
        assert_eq!(r.mesh.num_elements(), 2);
        assert_eq!(r.mesh.num_vertices(), 4);
        assert_eq!(r.mesh.vertex(3), &[0.5, 0.5]);
        assert_eq!(r.vertex_parents, vec![[1, 2]]);
        assert!((r.mesh.total_volume() - 0.5).abs() < 1e-15);
        assert_eq!(r.mesh.generation(), &[1, 1]);
    }

    #[test]
    fn empty_mark_is_identity() {
        let m: Mesh<f64> = build_lshape(0).unwrap();
        let r = refine(&m, &[]).unwrap();
        assert_eq!(r.mesh.num_elements(), 6);
        assert_eq!(r.mesh.cells(), m.cells());
    }

    #[test]
    fn out_of_range_mark_is_rejected() {
        let m: Mesh<f64> = build_lshape(0).unwrap();
        assert!(refine(&m, &[6]).is_err());
    }

    #[test]
    fn uniform_refinement_factors() {
        let m: Mesh<f64> = build_lshape(0).unwrap();
        let r = uniform_refine(&m).unwrap();
        assert_eq!(r.mesh.num_elements(), 24);
        assert!((r.mesh.total_volume() - 3.0).abs() < 1e-14);
        r.mesh.check_conformity().unwrap();
        for e in 0..24 {
            let p = r.parent[e];
            assert!((r.mesh.diameter(e) - m.diameter(p) / 2.0).abs() < 1e-14);
        }

        let c: Mesh<f64> = build_cube(0).unwrap();
        let r = uniform_refine(&c).unwrap();
        assert_eq!(r.mesh.num_elements(), 48);
        assert!((r.mesh.total_volume() - 1.0).abs() < 1e-14);
        r.mesh.check_conformity().unwrap();
    }

    #[test]
    fn single_corner_mark_closes_conformingly() {
        let m: Mesh<f64> = build_lshape(1).unwrap();
        let r = refine(&m, &[0]).unwrap();
        r.mesh.check_conformity().unwrap();
        assert!(r.mesh.num_elements() >= 26);
        let p = r.prolong_nodal(&vec![1.0; m.num_vertices()]);
        assert!(p.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn prolongation_interpolates_linear_functions() {
        let m: Mesh<f64> = build_lshape(0).unwrap();
        let f = |x: &[f64]| 2.0 * x[0] - 3.0 * x[1] + 0.25;
        let vals: Vec<f64> = (0..m.num_vertices()).map(|v| f(m.vertex(v))).collect();
        let r = refine(&m, &[2, 4]).unwrap();
        let fine = r.prolong_nodal(&vals);
        for v in 0..r.mesh.num_vertices() {
            assert!((fine[v] - f(r.mesh.vertex(v))).abs() < 1e-14);
        }
        let cell_vals: Vec<f64> = (0..6).map(|e| e as f64).collect();
        let inherited = r.prolong_elementwise(&cell_vals);
        assert_eq!(inherited.len(), r.mesh.num_elements());
    }

    #[test]
    fn three_d_adaptive_closure() {
        let mut m: Mesh<f64> = build_cube(0).unwrap();
        for _ in 0..6 {
            let r = refine(&m, &[0]).unwrap();
            r.mesh.check_conformity().unwrap();
            assert!((r.mesh.total_volume() - 1.0).abs() < 1e-13);
            m = r.mesh;
        }
    }
}

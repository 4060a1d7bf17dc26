//! The control-constrained optimal control problem and its discrete KKT
//! solver: Newton's method for fixed active sets inside a primal–dual active
//! set loop.
//!
//! Unknowns are the interior nodal values of the state `y` and adjoint `p`
//! and one control value `u_T` per element. The control block of the Newton
//! system is diagonal, so `δu` is eliminated and a `2n × 2n` system in
//! `(δy, δp)` is solved.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{
    assemble_load, assemble_stiffness, solve_sparse, DofMap, P0Function, P1Function, QuadDegrees, ScalarFn,
    SparseMatrix, TripletBuilder,
};
use crate::mesh::Mesh;
use crate::quadrature::{error_degree, rule};
use crate::scalar::{clamp, Real};

pub use crate::nonlinearity::Nonlinearity;

const MAX_NEWTON: usize = 50;
const MAX_OUTER: usize = 100;

/// `min(upper, max(v, lower))`.
pub fn project_box<T: Real>(v: T, lower: T, upper: T) -> Result<T> {
    if !(lower <= upper) {
        return Err(Error::InvalidArgument(format!("empty box [{lower}, {upper}]")));
    }
    Ok(clamp(v, lower, upper))
}

/// Elementwise [`project_box`].
pub fn project_box_p0<T: Real>(v: &P0Function<T>, lower: T, upper: T) -> Result<P0Function<T>> {
    let values = v
        .values
        .iter()
        .map(|&x| project_box(x, lower, upper))
        .collect::<Result<_>>()?;
    Ok(P0Function { values })
}

/// Data of `min ½‖y − y_Ω‖² + ν/2 ‖u‖²` subject to
/// `−Δy + a(·,y) = f + u`, `y = 0` on `∂Ω`, `lower ≤ u ≤ upper`.
#[derive(Clone)]
pub struct ControlProblem<T> {
    pub nu: T,
    pub lower: T,
    pub upper: T,
    pub y_omega: ScalarFn<T>,
    pub source: ScalarFn<T>,
    pub nonlinearity: Nonlinearity,
    /// Sparsity weight `ϑ` of the `L¹`-regularized variant.
    pub theta: Option<T>,
}

impl<T: Real> ControlProblem<T> {
    pub fn new(
        nu: T,
        lower: T,
        upper: T,
        y_omega: impl Fn(&[T]) -> T + Send + Sync + 'static,
        source: impl Fn(&[T]) -> T + Send + Sync + 'static,
        nonlinearity: Nonlinearity,
    ) -> Result<Self> {
        let p = Self {
            nu,
            lower,
            upper,
            y_omega: Arc::new(y_omega),
            source: Arc::new(source),
            nonlinearity,
            theta: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_theta(mut self, theta: T) -> Result<Self> {
        if !(theta > T::zero()) {
            return Err(Error::InvalidArgument("theta must be positive".into()));
        }
        self.theta = Some(theta);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > T::zero()) {
            return Err(Error::InvalidArgument(format!("nu must be positive, got {}", self.nu)));
        }
        if !(self.lower < self.upper) {
            return Err(Error::InvalidArgument(format!(
                "lower bound {} must be below upper bound {}",
                self.lower, self.upper
            )));
        }
        Ok(())
    }
}

impl<T: Real> std::fmt::Debug for ControlProblem<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ControlProblem")
            .field("nu", &self.nu)
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .field("nonlinearity", &self.nonlinearity)
            .field("theta", &self.theta)
            .finish_non_exhaustive()
    }
}

/// A discrete triple `(y, p, u)`.
#[derive(Clone, Debug, PartialEq)]
pub struct KktState<T> {
    pub y: P1Function<T>,
    pub p: P1Function<T>,
    pub u: P0Function<T>,
}

impl<T: Real> KktState<T> {
    pub fn zeros(mesh: &Mesh<T>) -> Self {
        Self {
            y: P1Function::zeros(mesh, true),
            p: P1Function::zeros(mesh, true),
            u: P0Function::constant(mesh, T::zero()),
        }
    }

    fn check(&self, mesh: &Mesh<T>) -> Result<()> {
        let nv = mesh.num_vertices();
        if self.y.values.len() != nv || self.p.values.len() != nv || self.u.values.len() != mesh.num_elements() {
            return Err(Error::DimensionMismatch("state fields do not match the mesh".into()));
        }
        Ok(())
    }
}

/// Characteristic vectors of the active sets (values 0 or 1 per element).
#[derive(Clone, Debug, PartialEq)]
pub struct ActiveSets<T> {
    pub lower: P0Function<T>,
    pub upper: P0Function<T>,
}

impl<T: Real> ActiveSets<T> {
    pub fn inactive(mesh: &Mesh<T>) -> Self {
        Self {
            lower: P0Function::constant(mesh, T::zero()),
            upper: P0Function::constant(mesh, T::zero()),
        }
    }

    /// `χ_a = 1` iff `−Π_T p/ν < lower`, `χ_b = 1` iff `−Π_T p/ν > upper`.
    pub fn from_adjoint(mesh: &Mesh<T>, problem: &ControlProblem<T>, p: &P1Function<T>) -> Self {
        let mut lower = Vec::with_capacity(mesh.num_elements());
        let mut upper = Vec::with_capacity(mesh.num_elements());
        for e in 0..mesh.num_elements() {
            let v = -element_mean(mesh, &p.values, e) / problem.nu;
            lower.push(if v < problem.lower { T::one() } else { T::zero() });
            upper.push(if v > problem.upper { T::one() } else { T::zero() });
        }
        Self {
            lower: P0Function { values: lower },
            upper: P0Function { values: upper },
        }
    }

    fn inactive_indicator(&self, e: usize) -> T {
        T::one() - self.lower.values[e] - self.upper.values[e]
    }
}

/// Converged output of [`active_set_solve`].
#[derive(Clone, Debug, PartialEq)]
pub struct KktSolution<T> {
    pub y: P1Function<T>,
    pub p: P1Function<T>,
    pub u: P0Function<T>,
    pub active_lower: P0Function<T>,
    pub active_upper: P0Function<T>,
    /// Newton steps summed over all active set passes.
    pub newton_iters: usize,
    pub active_set_iters: usize,
}

impl<T: Real> KktSolution<T> {
    pub fn state(&self) -> KktState<T> {
        KktState {
            y: self.y.clone(),
            p: self.p.clone(),
            u: self.u.clone(),
        }
    }
}

/// Residual of the discrete optimality system, by block.
#[derive(Clone, Debug, PartialEq)]
pub struct KktResidual<T> {
    /// State equation tested with interior hats.
    pub state: Vec<T>,
    /// Adjoint equation tested with interior hats.
    pub adjoint: Vec<T>,
    /// Elementwise `ν⁻¹Π_T p (1 − χ_a − χ_b) + u − a χ_a − b χ_b`.
    pub control: Vec<T>,
}

impl<T: Real> KktResidual<T> {
    pub fn max_abs(&self) -> T {
        self.state
            .iter()
            .chain(&self.adjoint)
            .chain(&self.control)
            .fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// Increment history of a KKT Newton solve.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KktNewtonReport {
    pub iterations: usize,
    /// `max(‖δy‖∞, ‖δp‖∞, ‖δu‖∞)` of every step taken.
    pub increments: Vec<f64>,
}

/// Solver settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KktOptions {
    /// Assembly quadrature override for terms involving `a`.
    pub quad_assembly: Option<usize>,
    /// Stop when the largest nodal/elemental increment falls below this.
    pub increment_tol: f64,
}

impl Default for KktOptions {
    fn default() -> Self {
        Self {
            quad_assembly: None,
            increment_tol: 1e-8,
        }
    }
}

#[inline]
fn element_mean<T: Real>(mesh: &Mesh<T>, nodal: &[T], e: usize) -> T {
    let verts = mesh.element(e);
    verts.iter().map(|&v| nodal[v]).sum::<T>() / T::from_usize_lossy(verts.len())
}

/// Mesh-dependent pieces of the discrete system that do not change during
/// the Newton and active set iterations.
struct KktSystem<'a, T: Real> {
    mesh: &'a Mesh<T>,
    problem: &'a ControlProblem<T>,
    dofs: DofMap,
    stiffness: SparseMatrix<T>,
    load_f: Vec<T>,
    load_yd: Vec<T>,
    degrees: QuadDegrees,
}

struct Linearization<T> {
    /// `∫ a(y) φ_i`.
    a_term: Vec<T>,
    /// `∫ a_y(y) p φ_i`.
    ap_term: Vec<T>,
    /// `M[a_y(y)]` over the interior dofs.
    m_ay: Option<SparseMatrix<T>>,
    /// `M[a_yy(y) p] − M` over the interior dofs.
    m_adj: Option<SparseMatrix<T>>,
}

impl<'a, T: Real> KktSystem<'a, T> {
    fn new(mesh: &'a Mesh<T>, problem: &'a ControlProblem<T>, opts: &KktOptions) -> Result<Self> {
        problem.validate()?;
        let dofs = DofMap::new(mesh, true);
        let degrees = QuadDegrees::for_nonlinearity(mesh.dim(), &problem.nonlinearity, opts.quad_assembly);
        let stiffness = assemble_stiffness(mesh, true)?;
        let load_f = assemble_load(mesh, &dofs, degrees.data, |_, _, x| (problem.source)(x))?;
        let load_yd = assemble_load(mesh, &dofs, degrees.data, |_, _, x| (problem.y_omega)(x))?;
        Ok(Self {
            mesh,
            problem,
            dofs,
            stiffness,
            load_f,
            load_yd,
            degrees,
        })
    }

    fn linearize(&self, y: &[T], p: &[T], jacobian: bool) -> Result<Linearization<T>> {
        let mesh = self.mesh;
        let a = &self.problem.nonlinearity;
        let q = rule::<T>(mesh.dim(), self.degrees.assembly)?;
        let n = mesh.dim() + 1;
        let nd = self.dofs.len();
        let mut a_term = vec![T::zero(); nd];
        let mut ap_term = vec![T::zero(); nd];
        let cap = if jacobian { mesh.num_elements() * n * n } else { 0 };
        let mut b_ay = TripletBuilder::with_capacity(nd, nd, cap);
        let mut b_adj = TripletBuilder::with_capacity(nd, nd, cap);
        let mass_c = |e: usize| mesh.volume(e) / T::from_usize_lossy(n * (n + 1));
        for e in 0..mesh.num_elements() {
            let verts = mesh.element(e);
            let mut la = [T::zero(); 4];
            let mut lap = [T::zero(); 4];
            let mut may = [[T::zero(); 4]; 4];
            let mut madj = [[T::zero(); 4]; 4];
            crate::fem::for_each_point(mesh, e, &q, |w, bary, x| {
                let (mut yv, mut pv) = (T::zero(), T::zero());
                for k in 0..n {
                    yv += bary[k] * y[verts[k]];
                    pv += bary[k] * p[verts[k]];
                }
                let ay = a.dy(x, yv);
                let av = w * a.value(x, yv);
                let apv = w * ay * pv;
                for i in 0..n {
                    la[i] += av * bary[i];
                    lap[i] += apv * bary[i];
                }
                if jacobian {
                    let c1 = w * ay;
                    let c2 = w * a.d2y(x, yv) * pv;
                    for i in 0..n {
                        for j in 0..n {
                            let bij = bary[i] * bary[j];
                            may[i][j] += c1 * bij;
                            madj[i][j] += c2 * bij;
                        }
                    }
                }
            });
            let c = mass_c(e);
            for i in 0..n {
                let Some(r) = self.dofs.dof(verts[i]) else { continue };
                if !(la[i].is_finite() && lap[i].is_finite()) {
                    return Err(Error::NonFinite { element: e });
                }
                a_term[r] += la[i];
                ap_term[r] += lap[i];
                if jacobian {
                    for j in 0..n {
                        if let Some(col) = self.dofs.dof(verts[j]) {
                            let m = if i == j { c + c } else { c };
                            b_ay.push(r, col, may[i][j]);
                            b_adj.push(r, col, madj[i][j] - m);
                        }
                    }
                }
            }
        }
        Ok(Linearization {
            a_term,
            ap_term,
            m_ay: jacobian.then(|| b_ay.finish()),
            m_adj: jacobian.then(|| b_adj.finish()),
        })
    }

    fn u_load(&self, u: &[T]) -> Vec<T> {
        let mesh = self.mesh;
        let n = T::from_usize_lossy(mesh.dim() + 1);
        let mut out = vec![T::zero(); self.dofs.len()];
        for e in 0..mesh.num_elements() {
            let c = u[e] * mesh.volume(e) / n;
            for &v in mesh.element(e) {
                if let Some(r) = self.dofs.dof(v) {
                    out[r] += c;
                }
            }
        }
        out
    }

    fn residual_with(&self, state: &KktState<T>, active: &ActiveSets<T>, lin: &Linearization<T>) -> KktResidual<T> {
        let mesh = self.mesh;
        let pr = self.problem;
        let yr = self.dofs.gather(&state.y.values);
        let pred = self.dofs.gather(&state.p.values);
        let ky = self.stiffness.mul_vec(&yr);
        let kp = self.stiffness.mul_vec(&pred);
        let bu = self.u_load(&state.u.values);
        let my = self.mass_times(&state.y.values);
        let nd = self.dofs.len();
        let st = (0..nd)
            .map(|i| ky[i] + lin.a_term[i] - self.load_f[i] - bu[i])
            .collect();
        let ad = (0..nd)
            .map(|i| kp[i] + lin.ap_term[i] - my[i] + self.load_yd[i])
            .collect();
        let ct = (0..mesh.num_elements())
            .map(|e| {
                let pm = element_mean(mesh, &state.p.values, e);
                pm / pr.nu * active.inactive_indicator(e) + state.u.values[e]
                    - pr.lower * active.lower.values[e]
                    - pr.upper * active.upper.values[e]
            })
            .collect();
        KktResidual {
            state: st,
            adjoint: ad,
            control: ct,
        }
    }

    /// `∫ y φ_i` for the interior hats, exact for P1 `y`.
    fn mass_times(&self, y: &[T]) -> Vec<T> {
        let mesh = self.mesh;
        let n = mesh.dim() + 1;
        let mut out = vec![T::zero(); self.dofs.len()];
        for e in 0..mesh.num_elements() {
            let verts = mesh.element(e);
            let c = mesh.volume(e) / T::from_usize_lossy(n * (n + 1));
            let s: T = verts.iter().map(|&v| y[v]).sum();
            for &v in verts {
                if let Some(r) = self.dofs.dof(v) {
                    out[r] += c * (s + y[v]);
                }
            }
        }
        out
    }

    fn newton(
        &self,
        active: &ActiveSets<T>,
        guess: &KktState<T>,
        opts: &KktOptions,
    ) -> Result<(KktState<T>, KktNewtonReport)> {
        let mesh = self.mesh;
        let pr = self.problem;
        guess.check(mesh)?;
        let nd = self.dofs.len();
        let ne = mesh.num_elements();
        let dp1 = T::from_usize_lossy(mesh.dim() + 1);
        let mut state = guess.clone();
        // Enforce the boundary condition on the guess.
        state.y.values = self.dofs.scatter(&self.dofs.gather(&state.y.values));
        state.p.values = self.dofs.scatter(&self.dofs.gather(&state.p.values));
        state.y.dirichlet = true;
        state.p.dirichlet = true;

        let tol_res = crate::fem::residual_tolerance::<T>();
        let tol_inc = T::lit(opts.increment_tol);
        let mut report = KktNewtonReport::default();
        loop {
            let lin = self.linearize(&state.y.values, &state.p.values, true)?;
            let res = self.residual_with(&state, active, &lin);
            if res.max_abs() <= tol_res {
                break;
            }
            if report.iterations == MAX_NEWTON {
                return Err(Error::NotConverged {
                    solver: "KKT Newton",
                    iterations: report.iterations,
                    history: report.increments,
                });
            }
            report.iterations += 1;

            let m_ay = lin.m_ay.as_ref().expect("jacobian requested");
            let m_adj = lin.m_adj.as_ref().expect("jacobian requested");
            let mut b = TripletBuilder::with_capacity(
                2 * nd,
                2 * nd,
                2 * (self.stiffness.nnz() + m_ay.nnz()) + m_adj.nnz() + ne * 16,
            );
            for (r, c, v) in self.stiffness.triplets().chain(m_ay.triplets()) {
                b.push(r, c, v);
                b.push(nd + r, nd + c, v);
            }
            for (r, c, v) in m_adj.triplets() {
                b.push(nd + r, c, v);
            }
            // Schur complement of the control block: ν⁻¹ B diag(I_T/|T|) Bᵀ.
            let mut rhs1: Vec<T> = res.state.iter().map(|v| -*v).collect();
            for e in 0..ne {
                let verts = mesh.element(e);
                let share = mesh.volume(e) / dp1;
                for &v in verts {
                    if let Some(r) = self.dofs.dof(v) {
                        rhs1[r] -= share * res.control[e];
                    }
                }
                let it = active.inactive_indicator(e);
                if it == T::zero() {
                    continue;
                }
                let c = it * mesh.volume(e) / (pr.nu * dp1 * dp1);
                for &vi in verts {
                    let Some(r) = self.dofs.dof(vi) else { continue };
                    for &vj in verts {
                        if let Some(col) = self.dofs.dof(vj) {
                            b.push(r, nd + col, c);
                        }
                    }
                }
            }
            let mut rhs = rhs1;
            rhs.extend(res.adjoint.iter().map(|v| -*v));
            let sol = solve_sparse(&b.finish(), &rhs)?;
            let (dy, dp) = sol.split_at(nd);
            let dp_full = self.dofs.scatter(dp);
            let du: Vec<T> = (0..ne)
                .map(|e| -res.control[e] - active.inactive_indicator(e) * element_mean(mesh, &dp_full, e) / pr.nu)
                .collect();

            let dy_full = self.dofs.scatter(dy);
            for (v, d) in state.y.values.iter_mut().zip(&dy_full) {
                *v += *d;
            }
            for (v, d) in state.p.values.iter_mut().zip(&dp_full) {
                *v += *d;
            }
            for (v, d) in state.u.values.iter_mut().zip(&du) {
                *v += *d;
            }
            let inc = crate::fem::inf_norm(dy)
                .max(crate::fem::inf_norm(dp))
                .max(crate::fem::inf_norm(&du));
            report.increments.push(inc.as_f64());
            if !inc.is_finite() {
                return Err(Error::NotConverged {
                    solver: "KKT Newton",
                    iterations: report.iterations,
                    history: report.increments,
                });
            }
            if inc < tol_inc {
                break;
            }
        }
        Ok((state, report))
    }
}

/// Residual of the discrete optimality system at `state` for fixed active sets.
pub fn kkt_residual<T: Real>(
    problem: &ControlProblem<T>,
    mesh: &Mesh<T>,
    state: &KktState<T>,
    active: &ActiveSets<T>,
    opts: &KktOptions,
) -> Result<KktResidual<T>> {
    state.check(mesh)?;
    if active.lower.values.len() != mesh.num_elements() || active.upper.values.len() != mesh.num_elements() {
        return Err(Error::DimensionMismatch("active sets do not match the mesh".into()));
    }
    let sys = KktSystem::new(mesh, problem, opts)?;
    let lin = sys.linearize(&state.y.values, &state.p.values, false)?;
    Ok(sys.residual_with(state, active, &lin))
}

/// Newton's method for the optimality system with frozen active sets.
///
/// Stops when the largest increment drops below `opts.increment_tol`, or
/// earlier when the residual already vanishes to `1e-10`.
pub fn newton_kkt<T: Real>(
    problem: &ControlProblem<T>,
    mesh: &Mesh<T>,
    active: &ActiveSets<T>,
    guess: &KktState<T>,
    opts: &KktOptions,
) -> Result<(KktState<T>, KktNewtonReport)> {
    let sys = KktSystem::new(mesh, problem, opts)?;
    sys.newton(active, guess, opts)
}

/// Primal–dual active set iteration. Starts from all-inactive sets; each
/// pass runs [`newton_kkt`] from the previous iterate and updates the sets
/// from the new adjoint until they repeat.
pub fn active_set_solve<T: Real>(
    problem: &ControlProblem<T>,
    mesh: &Mesh<T>,
    guess: &KktState<T>,
    opts: &KktOptions,
) -> Result<KktSolution<T>> {
    let sys = KktSystem::new(mesh, problem, opts)?;
    let mut active = ActiveSets::inactive(mesh);
    let mut state = guess.clone();
    let mut newton_iters = 0;
    for pass in 1..=MAX_OUTER {
        let (next, report) = sys.newton(&active, &state, opts)?;
        newton_iters += report.iterations;
        state = next;
        let updated = ActiveSets::from_adjoint(mesh, problem, &state.p);
        if updated == active {
            let u = (0..mesh.num_elements())
                .map(|e| {
                    clamp(
                        -element_mean(mesh, &state.p.values, e) / problem.nu,
                        problem.lower,
                        problem.upper,
                    )
                })
                .collect();
            return Ok(KktSolution {
                y: state.y,
                p: state.p,
                u: P0Function { values: u },
                active_lower: active.lower,
                active_upper: active.upper,
                newton_iters,
                active_set_iters: pass,
            });
        }
        active = updated;
    }
    Err(Error::ActiveSetCycling { iterations: MAX_OUTER })
}

/// `½‖y − y_Ω‖² + ν/2 ‖u‖²`, integrated at the error quadrature degree.
pub fn cost<T: Real>(problem: &ControlProblem<T>, mesh: &Mesh<T>, y: &P1Function<T>, u: &P0Function<T>) -> Result<T> {
    let q = rule::<T>(mesh.dim(), error_degree(mesh.dim()))?;
    let half = T::lit(0.5);
    let mut track = T::zero();
    let mut ctrl = T::zero();
    for e in 0..mesh.num_elements() {
        crate::fem::for_each_point(mesh, e, &q, |w, b, x| {
            let d = y.eval(mesh, e, b) - (problem.y_omega)(x);
            track += w * d * d;
        });
        ctrl += mesh.volume(e) * u.values[e] * u.values[e];
    }
    let j = half * track + half * problem.nu * ctrl;
    if !j.is_finite() {
        return Err(Error::NonFinite { element: 0 });
    }
    Ok(j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_lshape, build_unit_square};

    fn zero_problem(a: Nonlinearity) -> ControlProblem<f64> {
        ControlProblem::new(1e-2, -1.0, 1.0, |_| 0.0, |_| 0.0, a).unwrap()
    }

    #[test]
    fn box_projection() {
        assert_eq!(project_box(5.0, -40.0, -0.1).unwrap(), -0.1);
        assert_eq!(project_box(-50.0, -40.0, -0.1).unwrap(), -40.0);
        assert_eq!(project_box(-3.0, -40.0, -0.1).unwrap(), -3.0);
        assert!(project_box(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn problem_validation() {
        assert!(ControlProblem::new(0.0, -1.0, 1.0, |_: &[f64]| 0.0, |_| 0.0, Nonlinearity::Zero).is_err());
        assert!(ControlProblem::new(1.0, 1.0, 1.0, |_: &[f64]| 0.0, |_| 0.0, Nonlinearity::Zero).is_err());
        assert!(zero_problem(Nonlinearity::Zero).with_theta(-1.0).is_err());
    }

    #[test]
    fn zero_data_residual_vanishes() {
        let m: Mesh<f64> = build_lshape(1).unwrap();
        let pr = zero_problem(Nonlinearity::Zero);
        let r = kkt_residual(
            &pr,
            &m,
            &KktState::zeros(&m),
            &ActiveSets::inactive(&m),
            &KktOptions::default(),
        )
        .unwrap();
        assert_eq!(r.max_abs(), 0.0);
    }

    #[test]
    fn control_block_vanishes_on_active_lower_elements() {
        let m: Mesh<f64> = build_unit_square(1).unwrap();
        let pr = zero_problem(Nonlinearity::Zero);
        let mut st = KktState::zeros(&m);
        st.p = P1Function::interpolate(&m, |x| x[0] * (1.0 - x[0]) * x[1], true);
        st.u = P0Function::constant(&m, pr.lower);
        let act = ActiveSets {
            lower: P0Function::constant(&m, 1.0),
            upper: P0Function::constant(&m, 0.0),
        };
        let r = kkt_residual(&pr, &m, &st, &act, &KktOptions::default()).unwrap();
        assert!(r.control.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn affine_problem_takes_one_newton_step() {
        let m: Mesh<f64> = build_lshape(1).unwrap();
        let pr = ControlProblem::new(1e-2, -1e3, 1e3, |x: &[f64]| x[0], |x| 1.0 + x[1], Nonlinearity::Zero).unwrap();
        let (st, rep) = newton_kkt(
            &pr,
            &m,
            &ActiveSets::inactive(&m),
            &KktState::zeros(&m),
            &KktOptions::default(),
        )
        .unwrap();
        assert_eq!(rep.iterations, 1);
        let r = kkt_residual(&pr, &m, &st, &ActiveSets::inactive(&m), &KktOptions::default()).unwrap();
        assert!(r.max_abs() < 1e-10);
    }

    #[test]
    fn cost_of_constant_control() {
        let m: Mesh<f64> = build_unit_square(1).unwrap();
        let pr = ControlProblem::new(
            0.5,
            -1.0,
            1.0,
            |x: &[f64]| x[0] + 2.0 * x[1],
            |_| 0.0,
            Nonlinearity::Zero,
        )
        .unwrap();
        let y = P1Function::interpolate(&m, |x| x[0] + 2.0 * x[1], false);
        let j = cost(&pr, &m, &y, &P0Function::constant(&m, 3.0)).unwrap();
        assert!((j - 0.25 * 9.0).abs() < 1e-14);
        let z = cost(
            &zero_problem(Nonlinearity::Zero),
            &m,
            &P1Function::zeros(&m, true),
            &P0Function::constant(&m, 0.0),
        );
        assert_eq!(z.unwrap(), 0.0);
    }
}

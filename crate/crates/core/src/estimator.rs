//! Residual-type a posteriori error indicators.
//!
//! Every indicator is stored squared, one value per element. Interior faces
//! contribute their full jump term to both adjacent elements.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fem::{for_each_point, project_p1_elementwise, Field, P0Function, P1Function};
use crate::mesh::Mesh;
use crate::nonlinearity::Nonlinearity;
use crate::ocp::{ControlProblem, KktSolution};
use crate::quadrature::{error_degree, rule};
use crate::scalar::{clamp, Real};

/// What an [`IndicatorField`] measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IndicatorKind {
    /// State equation residual.
    St,
    /// Adjoint equation residual.
    Ad,
    /// Control discretization `‖ũ − u_T‖`.
    Ct,
    /// Sum of the three contributions.
    Ocp,
    /// Plain semilinear equation residual.
    Semilinear,
    /// `h_T ‖∇p_T‖_{L²(T)}`.
    CompetitorCt,
    /// Subgradient indicator of the sparse variant.
    Sg,
    /// Data oscillation.
    Osc,
}

/// Per-element squared indicators.
#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorField<T> {
    pub kind: IndicatorKind,
    pub values: Vec<T>,
}

impl<T: Real> IndicatorField<T> {
    pub fn new(kind: IndicatorKind, values: Vec<T>) -> Result<Self> {
        if let Some(e) = values.iter().position(|v| !(v.is_finite() && *v >= T::zero())) {
            return Err(Error::NonFinite { element: e });
        }
        Ok(Self { kind, values })
    }

    /// `sqrt(Σ_T η_T²)`.
    pub fn total(&self) -> T {
        self.values.iter().copied().sum::<T>().sqrt()
    }

    pub fn max(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(*v))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Which control indicator enters the total.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    /// `‖ũ − u_T‖_{L²(T)}`.
    Ours,
    /// `h_T ‖∇p_T‖_{L²(T)}`.
    Competitor,
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorKind::Ours => "ours",
            EstimatorKind::Competitor => "competitor",
        })
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ours" => Ok(EstimatorKind::Ours),
            "competitor" => Ok(EstimatorKind::Competitor),
            other => Err(Error::Parse(format!("unknown estimator `{other}`"))),
        }
    }
}

/// `h_T Σ_{F ⊂ ∂T∖∂Ω} ‖⟦∇v·ν⟧‖²_{L²(F)}` for every element.
fn jump_terms<T: Real>(mesh: &Mesh<T>, v: &P1Function<T>) -> Vec<T> {
    let mut out = vec![T::zero(); mesh.num_elements()];
    for face in mesh.interior_faces() {
        let minus = face.minus.expect("interior face has two elements");
        let gp = v.gradient(mesh, face.plus);
        let gm = v.gradient(mesh, minus);
        let j: T = (0..mesh.dim()).map(|i| face.normal[i] * (gp[i] - gm[i])).sum();
        let jj = j * j * face.measure;
        out[face.plus] += mesh.diameter(face.plus) * jj;
        out[minus] += mesh.diameter(minus) * jj;
    }
    out
}

/// `h_T² ‖r‖²_{L²(T)} + h_T ‖⟦∇v·ν⟧‖²_{L²(∂T∖∂Ω)}` with the element
/// residual `r(e, bary, x)`.
fn residual_indicator<T: Real>(
    mesh: &Mesh<T>,
    v: &P1Function<T>,
    residual: impl Fn(usize, &[T], &[T]) -> T,
) -> Result<Vec<T>> {
    let q = rule::<T>(mesh.dim(), error_degree(mesh.dim()))?;
    let mut out = jump_terms(mesh, v);
    for (e, slot) in out.iter_mut().enumerate() {
        let mut acc = T::zero();
        for_each_point(mesh, e, &q, |w, b, x| {
            let r = residual(e, b, x);
            acc += w * r * r;
        });
        let h = mesh.diameter(e);
        *slot += h * h * acc;
    }
    Ok(out)
}

/// Indicator of the semilinear equation `−Δy + a(·,y) = f`.
pub fn indicator_semilinear<T: Real>(
    mesh: &Mesh<T>,
    y: &P1Function<T>,
    f: &dyn Field<T>,
    a: &Nonlinearity,
) -> Result<IndicatorField<T>> {
    let vals = residual_indicator(mesh, y, |e, b, x| {
        f.value(mesh, e, b, x) - a.value(x, y.eval(mesh, e, b))
    })?;
    IndicatorField::new(IndicatorKind::Semilinear, vals)
}

/// State indicator: element residual `f + u_T − a(·,y_T)`.
pub fn indicator_state<T: Real>(
    mesh: &Mesh<T>,
    sol: &KktSolution<T>,
    problem: &ControlProblem<T>,
) -> Result<IndicatorField<T>> {
    let a = &problem.nonlinearity;
    let vals = residual_indicator(mesh, &sol.y, |e, b, x| {
        (problem.source)(x) + sol.u.values[e] - a.value(x, sol.y.eval(mesh, e, b))
    })?;
    IndicatorField::new(IndicatorKind::St, vals)
}

/// Adjoint indicator: element residual `y_T − y_Ω − a_y(·,y_T) p_T`.
pub fn indicator_adjoint<T: Real>(
    mesh: &Mesh<T>,
    sol: &KktSolution<T>,
    problem: &ControlProblem<T>,
) -> Result<IndicatorField<T>> {
    let a = &problem.nonlinearity;
    let vals = residual_indicator(mesh, &sol.p, |e, b, x| {
        let y = sol.y.eval(mesh, e, b);
        y - (problem.y_omega)(x) - a.dy(x, y) * sol.p.eval(mesh, e, b)
    })?;
    IndicatorField::new(IndicatorKind::Ad, vals)
}

/// `ũ = Π_[a,b](−p_T/ν)`, evaluated pointwise.
#[derive(Clone, Debug)]
pub struct ControlTilde<'a, T> {
    p: &'a P1Function<T>,
    nu: T,
    lower: T,
    upper: T,
}

/// Builds `ũ` from the discrete adjoint.
pub fn control_tilde<'a, T: Real>(p: &'a P1Function<T>, problem: &ControlProblem<T>) -> ControlTilde<'a, T> {
    ControlTilde {
        p,
        nu: problem.nu,
        lower: problem.lower,
        upper: problem.upper,
    }
}

impl<T: Real> Field<T> for ControlTilde<'_, T> {
    fn value(&self, mesh: &Mesh<T>, e: usize, bary: &[T], _x: &[T]) -> T {
        clamp(-self.p.eval(mesh, e, bary) / self.nu, self.lower, self.upper)
    }

    fn gradient(&self, _mesh: &Mesh<T>, _e: usize, _bary: &[T], _x: &[T]) -> Option<[T; 3]> {
        None
    }
}

/// `‖w − u_T‖²_{L²(T)}` for a field `w` and piecewise constant `u_T`.
fn l2_mismatch<T: Real>(mesh: &Mesh<T>, w: &dyn Field<T>, u: &P0Function<T>) -> Result<Vec<T>> {
    if u.values.len() != mesh.num_elements() {
        return Err(Error::DimensionMismatch("control does not match the mesh".into()));
    }
    let q = rule::<T>(mesh.dim(), error_degree(mesh.dim()))?;
    Ok((0..mesh.num_elements())
        .map(|e| {
            let mut acc = T::zero();
            for_each_point(mesh, e, &q, |wt, b, x| {
                let d = w.value(mesh, e, b, x) - u.values[e];
                acc += wt * d * d;
            });
            acc
        })
        .collect())
}

/// Control indicator `‖ũ − u_T‖²_{L²(T)}`.
pub fn indicator_control<T: Real>(
    mesh: &Mesh<T>,
    sol: &KktSolution<T>,
    problem: &ControlProblem<T>,
) -> Result<IndicatorField<T>> {
    let ut = control_tilde(&sol.p, problem);
    IndicatorField::new(IndicatorKind::Ct, l2_mismatch(mesh, &ut, &sol.u)?)
}

/// Competitor control indicator `h_T² |T| |∇p_T|²`.
pub fn indicator_competitor_control<T: Real>(mesh: &Mesh<T>, p: &P1Function<T>) -> Result<IndicatorField<T>> {
    let vals = (0..mesh.num_elements())
        .map(|e| {
            let g = p.gradient(mesh, e);
            let g2: T = g.iter().map(|c| *c * *c).sum();
            let h = mesh.diameter(e);
            h * h * mesh.volume(e) * g2
        })
        .collect();
    IndicatorField::new(IndicatorKind::CompetitorCt, vals)
}

/// Elementwise sum of three squared indicators.
pub fn indicator_total<T: Real>(
    st: &IndicatorField<T>,
    ad: &IndicatorField<T>,
    ct: &IndicatorField<T>,
) -> Result<IndicatorField<T>> {
    if st.len() != ad.len() || st.len() != ct.len() {
        return Err(Error::DimensionMismatch(
            "indicator fields live on different meshes".into(),
        ));
    }
    let vals = (0..st.len())
        .map(|e| st.values[e] + ad.values[e] + ct.values[e])
        .collect();
    IndicatorField::new(IndicatorKind::Ocp, vals)
}

/// `h_T² ‖w − 𝒫_T w‖²_{L²(T)}` with the elementwise linear projection `𝒫_T`.
pub fn oscillation<T: Real>(mesh: &Mesh<T>, w: &dyn Field<T>) -> Result<IndicatorField<T>> {
    let deg = error_degree(mesh.dim());
    let proj = project_p1_elementwise(mesh, w, deg)?;
    let q = rule::<T>(mesh.dim(), deg)?;
    let n = mesh.dim() + 1;
    let vals = (0..mesh.num_elements())
        .map(|e| {
            let mut acc = T::zero();
            for_each_point(mesh, e, &q, |wt, b, x| {
                let pw: T = (0..n).map(|k| proj[e][k] * b[k]).sum();
                let d = w.value(mesh, e, b, x) - pw;
                acc += wt * d * d;
            });
            let h = mesh.diameter(e);
            h * h * acc
        })
        .collect();
    IndicatorField::new(IndicatorKind::Osc, vals)
}

/// `λ̃ = Π_[−1,1](−p_T/ϑ)`.
#[derive(Clone, Debug)]
pub struct SubgradientTilde<'a, T> {
    p: &'a P1Function<T>,
    theta: T,
}

impl<T: Real> Field<T> for SubgradientTilde<'_, T> {
    fn value(&self, mesh: &Mesh<T>, e: usize, bary: &[T], _x: &[T]) -> T {
        clamp(-self.p.eval(mesh, e, bary) / self.theta, -T::one(), T::one())
    }

    fn gradient(&self, _mesh: &Mesh<T>, _e: usize, _bary: &[T], _x: &[T]) -> Option<[T; 3]> {
        None
    }
}

/// `ũ = Π_[a,b](−(p_T + ϑλ̃)/ν)` of the sparse variant.
#[derive(Clone, Debug)]
pub struct SparseControlTilde<'a, T> {
    lambda: SubgradientTilde<'a, T>,
    nu: T,
    lower: T,
    upper: T,
}

impl<T: Real> Field<T> for SparseControlTilde<'_, T> {
    fn value(&self, mesh: &Mesh<T>, e: usize, bary: &[T], x: &[T]) -> T {
        let p = self.lambda.p.eval(mesh, e, bary);
        let l = self.lambda.value(mesh, e, bary, x);
        clamp(-(p + self.lambda.theta * l) / self.nu, self.lower, self.upper)
    }

    fn gradient(&self, _mesh: &Mesh<T>, _e: usize, _bary: &[T], _x: &[T]) -> Option<[T; 3]> {
        None
    }
}

/// Auxiliary subgradient and control of the sparse variant; needs `ϑ`.
pub fn sparse_auxiliary<'a, T: Real>(
    p: &'a P1Function<T>,
    problem: &ControlProblem<T>,
) -> Result<(SubgradientTilde<'a, T>, SparseControlTilde<'a, T>)> {
    let theta = problem
        .theta
        .ok_or_else(|| Error::InvalidArgument("sparse estimators need theta".into()))?;
    let lambda = SubgradientTilde { p, theta };
    let u = SparseControlTilde {
        lambda: lambda.clone(),
        nu: problem.nu,
        lower: problem.lower,
        upper: problem.upper,
    };
    Ok((lambda, u))
}

/// `‖λ̃ − λ_T‖²_{L²(T)}`.
pub fn indicator_subgradient<T: Real>(
    mesh: &Mesh<T>,
    lambda: &P0Function<T>,
    p: &P1Function<T>,
    problem: &ControlProblem<T>,
) -> Result<IndicatorField<T>> {
    let (lt, _) = sparse_auxiliary(p, problem)?;
    IndicatorField::new(IndicatorKind::Sg, l2_mismatch(mesh, &lt, lambda)?)
}

/// `‖ũ − u_T‖²_{L²(T)}` with the sparse-variant `ũ`.
pub fn indicator_control_sparse<T: Real>(
    mesh: &Mesh<T>,
    u: &P0Function<T>,
    p: &P1Function<T>,
    problem: &ControlProblem<T>,
) -> Result<IndicatorField<T>> {
    let (_, ut) = sparse_auxiliary(p, problem)?;
    IndicatorField::new(IndicatorKind::Ct, l2_mismatch(mesh, &ut, u)?)
}

/// The three contributions and their sum for one discrete solution.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimate<T> {
    pub st: IndicatorField<T>,
    pub ad: IndicatorField<T>,
    pub ct: IndicatorField<T>,
    pub total: IndicatorField<T>,
}

/// Evaluates the state, adjoint and control indicators and their sum.
pub fn estimate<T: Real>(
    mesh: &Mesh<T>,
    sol: &KktSolution<T>,
    problem: &ControlProblem<T>,
    kind: EstimatorKind,
) -> Result<Estimate<T>> {
    let st = indicator_state(mesh, sol, problem)?;
    let ad = indicator_adjoint(mesh, sol, problem)?;
    let ct = match kind {
        EstimatorKind::Ours => indicator_control(mesh, sol, problem)?,
        EstimatorKind::Competitor => indicator_competitor_control(mesh, &sol.p)?,
    };
    let total = indicator_total(&st, &ad, &ct)?;
    Ok(Estimate { st, ad, ct, total })
}

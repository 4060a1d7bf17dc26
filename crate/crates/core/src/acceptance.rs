//! Acceptance checks shared by the test suite and `ocp-afem verify`.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::adapt::{adaptive_loop, mark_max, AdaptConfig, AdaptRecord, RefinementMode};
use crate::bench::{example1, example2, fit_rate};
use crate::error::{Error, Result};
use crate::estimator::{estimate, oscillation, EstimatorKind, IndicatorField, IndicatorKind};
use crate::fem::{assemble_mass_p1, assemble_stiffness, local_mass, local_stiffness, solve_sparse, DofMap};
use crate::mesh::{build_cube, build_lshape, build_unit_square, reference_simplex, refine, Mesh};
use crate::nonlinearity::Nonlinearity;
use crate::ocp::{active_set_solve, kkt_residual, ActiveSets, ControlProblem, KktOptions, KktSolution, KktState};
use crate::quadrature::{rule, MAX_DEGREE_2D, MAX_DEGREE_3D};
use crate::scalar::clamp;

/// Number of criteria in the suite.
pub const CRITERIA: usize = 10;

/// Outcome of one acceptance criterion.
#[derive(Clone, Debug)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] criterion {:2} {}: {}", self.id, self.name, self.detail)
    }
}

const NAMES: [&str; CRITERIA] = [
    "quadrature exactness",
    "assembly oracle equivalence",
    "trivial fixed point",
    "adaptive rates, nu=1e-3",
    "uniform rate, nu=1e-3",
    "effectivity band, nu in {1e-4, 1e-5}",
    "competitor contrast, nu=1e-4",
    "cube rates, a1/a2/a3",
    "reliability and efficiency bands",
    "invariant suites",
];

/// Adaptive iterations of the L-shape runs.
const EX1_ITERS: usize = 24;
/// Records used for L-shape slope fits.
const EX1_WINDOW: usize = 12;
/// Uniform refinement sweeps after the initial L-shape mesh.
const UNIFORM_SWEEPS: usize = 7;
/// Adaptive iterations of the cube runs.
const EX2_ITERS: usize = 12;
/// Uniform refinements of the initial cube mesh.
const EX2_LEVEL: usize = 2;
/// Trailing effectivities checked for the constant band.
const EFFECTIVITY_WINDOW: usize = 10;
/// Iteration whose error/estimator ratios anchor the bands.
const BAND_ANCHOR: usize = 5;

/// History of one benchmark run.
#[derive(Clone, Debug)]
struct Run {
    records: Vec<AdaptRecord>,
    /// `osc(y_Ω, 𝒯)` at every iteration.
    osc: Vec<f64>,
}

impl Run {
    fn slope(&self, window: usize, value: impl Fn(&AdaptRecord) -> Option<f64>) -> Result<f64> {
        let start = self.records.len().saturating_sub(window);
        let pts = self.records[start..]
            .iter()
            .map(|r| {
                value(r)
                    .map(|v| (r.ndof as f64, v))
                    .ok_or_else(|| Error::InvalidArgument("missing error column".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        fit_rate(&pts)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum RunKey {
    Lshape {
        nu_exp: i32,
        estimator: EstimatorKind,
        uniform: bool,
    },
    Cube(CubeCase),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum CubeCase {
    A1,
    A2,
    A3,
}

impl CubeCase {
    fn get(self) -> Nonlinearity {
        match self {
            CubeCase::A1 => Nonlinearity::A1,
            CubeCase::A2 => Nonlinearity::A2,
            CubeCase::A3 => Nonlinearity::A3,
        }
    }
}

/// Runs the criteria, sharing expensive benchmark runs between them.
#[derive(Default)]
pub struct Suite {
    runs: HashMap<RunKey, Run>,
}

impl Suite {
    pub fn new() -> Self {
        Self::default()
    }

    /// Evaluates criterion `id` (1 to [`CRITERIA`]).
    pub fn run(&mut self, id: usize) -> CriterionResult {
        let name = NAMES.get(id.wrapping_sub(1)).copied().unwrap_or("unknown");
        let outcome = match id {
            1 => quadrature_exactness(),
            2 => assembly_oracle(),
            3 => trivial_fixed_point(),
            4 => self.adaptive_rates(),
            5 => self.uniform_rate(),
            6 => self.effectivity_band(),
            7 => self.competitor_contrast(),
            8 => self.cube_rates(),
            9 => self.bands(),
            10 => invariants(),
            _ => Err(Error::InvalidArgument(format!("no criterion {id}"))),
        };
        let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
        CriterionResult {
            id,
            name,
            passed,
            detail,
        }
    }

    fn lshape(&mut self, nu_exp: i32, estimator: EstimatorKind, uniform: bool) -> Result<&Run> {
        let key = RunKey::Lshape {
            nu_exp,
            estimator,
            uniform,
        };
        if let Entry::Vacant(slot) = self.runs.entry(key) {
            let case = example1::<f64>(10f64.powi(nu_exp))?;
            let (initial, iters, refinement) = if uniform {
                (build_lshape(0)?, UNIFORM_SWEEPS + 1, RefinementMode::Uniform)
            } else {
                (build_lshape(1)?, EX1_ITERS, RefinementMode::Adaptive)
            };
            let config = AdaptConfig {
                max_iters: iters,
                estimator,
                refinement,
                ..AdaptConfig::default()
            };
            let y_omega = case.problem.y_omega.clone();
            let mut osc = Vec::new();
            let out = adaptive_loop(&case.problem, initial, &config, Some(&case), |view| {
                osc.push(oscillation(view.mesh, &y_omega)?.total());
                Ok(())
            })?;
            slot.insert(Run {
                records: out.records,
                osc,
            });
        }
        Ok(&self.runs[&key])
    }

    fn cube(&mut self, a: CubeCase) -> Result<&Run> {
        let key = RunKey::Cube(a);
        if let Entry::Vacant(slot) = self.runs.entry(key) {
            let problem = example2::<f64>(a.get())?;
            let config = AdaptConfig {
                max_iters: EX2_ITERS,
                ..AdaptConfig::default()
            };
            let out = adaptive_loop(&problem, build_cube(EX2_LEVEL)?, &config, None, |_| Ok(()))?;
            slot.insert(Run {
                records: out.records,
                osc: Vec::new(),
            });
        }
        Ok(&self.runs[&key])
    }

    fn adaptive_rates(&mut self) -> Result<(bool, String)> {
        let run = self.lshape(-3, EstimatorKind::Ours, false)?;
        let sy = run.slope(EX1_WINDOW, |r| r.err_y_h1)?;
        let sp = run.slope(EX1_WINDOW, |r| r.err_p_h1)?;
        let su = run.slope(EX1_WINDOW, |r| r.err_u_l2)?;
        let ok = [sy, sp, su].iter().all(|s| (s + 0.5).abs() <= 0.10);
        Ok((
            ok,
            format!(
                "slopes y {sy:.3}, p {sp:.3}, u {su:.3} (target -0.5 +- 0.10, last {EX1_WINDOW} of {} iterations)",
                run.records.len()
            ),
        ))
    }

    fn uniform_rate(&mut self) -> Result<(bool, String)> {
        let adaptive = self
            .lshape(-3, EstimatorKind::Ours, false)?
            .slope(EX1_WINDOW, |r| r.err_y_h1)?;
        let run = self.lshape(-3, EstimatorKind::Ours, true)?;
        let window = run.records.len() - run.records.len() / 2;
        let s = run.slope(window, |r| r.err_y_h1)?;
        let ok = (s + 1.0 / 3.0).abs() <= 0.08 && s > adaptive;
        Ok((
            ok,
            format!(
                "uniform y slope {s:.3} (target -1/3 +- 0.08, last {window} of {} meshes), adaptive {adaptive:.3}",
                run.records.len()
            ),
        ))
    }

    fn effectivity_band(&mut self) -> Result<(bool, String)> {
        let mut ok = true;
        let mut parts = Vec::new();
        for nu_exp in [-4, -5] {
            let run = self.lshape(nu_exp, EstimatorKind::Ours, false)?;
            let tail: Vec<f64> = run.records[run.records.len().saturating_sub(EFFECTIVITY_WINDOW)..]
                .iter()
                .map(|r| r.effectivity.unwrap_or(f64::NAN))
                .collect();
            let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let pass = tail.len() == EFFECTIVITY_WINDOW && lo >= 0.2 && hi <= 5.0 && hi / lo <= 3.0;
            ok &= pass;
            parts.push(format!("nu=1e{nu_exp}: [{lo:.3}, {hi:.3}] ratio {:.3}", hi / lo));
        }
        Ok((ok, parts.join("; ")))
    }

    fn competitor_contrast(&mut self) -> Result<(bool, String)> {
        let ours = self
            .lshape(-4, EstimatorKind::Ours, false)?
            .slope(EX1_WINDOW, |r| r.err_u_l2)?;
        let theirs = self
            .lshape(-4, EstimatorKind::Competitor, false)?
            .slope(EX1_WINDOW, |r| r.err_u_l2)?;
        let gap = theirs - ours;
        Ok((
            gap >= 0.1,
            format!("control slope ours {ours:.3}, competitor {theirs:.3}, gap {gap:.3} (need >= 0.1)"),
        ))
    }

    fn cube_rates(&mut self) -> Result<(bool, String)> {
        let mut ok = true;
        let mut parts = Vec::new();
        for a in [CubeCase::A1, CubeCase::A2, CubeCase::A3] {
            let run = self.cube(a)?;
            let window = run.records.len() - run.records.len() / 2;
            let s = run.slope(window, |r| Some(r.est_total))?;
            let pass = (s + 1.0 / 3.0).abs() <= 0.10;
            ok &= pass;
            parts.push(format!("{} {s:.3}", a.get()));
        }
        Ok((
            ok,
            format!(
                "{} (target -1/3 +- 0.10, last {} of {EX2_ITERS} iterations)",
                parts.join(", "),
                EX2_ITERS - EX2_ITERS / 2
            ),
        ))
    }

    fn bands(&mut self) -> Result<(bool, String)> {
        let run = self.lshape(-3, EstimatorKind::Ours, false)?;
        let ratios: Vec<(f64, f64)> = run
            .records
            .iter()
            .zip(&run.osc)
            .map(|(r, osc)| {
                let err = r.err_total.unwrap_or(f64::NAN);
                (err / r.est_total, r.est_total / (err + osc))
            })
            .collect();
        let Some(&(rel0, eff0)) = ratios.get(BAND_ANCHOR - 1) else {
            return Ok((false, format!("run has fewer than {BAND_ANCHOR} iterations")));
        };
        let spread = |v: f64, anchor: f64| (v / anchor).max(anchor / v);
        let rel = ratios[BAND_ANCHOR - 1..]
            .iter()
            .map(|r| spread(r.0, rel0))
            .fold(0.0, f64::max);
        let eff = ratios[BAND_ANCHOR - 1..]
            .iter()
            .map(|r| spread(r.1, eff0))
            .fold(0.0, f64::max);
        Ok((
            rel <= 2.0 && eff <= 2.0,
            format!(
                "err/est anchor {rel0:.3} max factor {rel:.3}; est/(err+osc) anchor {eff0:.3} max factor {eff:.3} (need <= 2, iterations {BAND_ANCHOR}..{})",
                ratios.len()
            ),
        ))
    }
}

/// Runs every criterion in order, reporting each result as soon as it is known.
pub fn run_all_with(mut report: impl FnMut(&CriterionResult)) -> Vec<CriterionResult> {
    let mut suite = Suite::new();
    (1..=CRITERIA)
        .map(|id| {
            let r = suite.run(id);
            report(&r);
            r
        })
        .collect()
}

pub fn run_all() -> Vec<CriterionResult> {
    run_all_with(|_| {})
}

fn factorial(n: usize) -> f64 {
    (1..=n as u128).product::<u128>() as f64
}

fn quadrature_exactness() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for (dim, max) in [(2, MAX_DEGREE_2D), (3, MAX_DEGREE_3D)] {
        for degree in 1..=max {
            let q = rule::<f64>(dim, degree)?;
            for a in 0..=degree {
                for b in 0..=degree - a {
                    let cs: Vec<usize> = if dim == 2 {
                        vec![0]
                    } else {
                        (0..=degree - a - b).collect()
                    };
                    for c in cs {
                        let exps = [a, b, c];
                        let exact = exps[..dim].iter().map(|&k| factorial(k)).product::<f64>()
                            / factorial(exps[..dim].iter().sum::<usize>() + dim);
                        let got = q.apply_reference(|x| (0..dim).map(|i| x[i].powi(exps[i] as i32)).product());
                        worst = worst.max((got - exact).abs() / exact);
                        checked += 1;
                    }
                }
            }
        }
    }
    Ok((
        worst <= 1e-12,
        format!("{checked} monomials, worst relative error {worst:.2e} (need <= 1e-12)"),
    ))
}

fn assembly_oracle() -> Result<(bool, String)> {
    let tri: Mesh<f64> = reference_simplex(2)?;
    let tet: Mesh<f64> = reference_simplex(3)?;
    let k2 = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
    let m2 = |i: usize, j: usize| if i == j { 2.0 / 24.0 } else { 1.0 / 24.0 };
    let k3 = |i: usize, j: usize| -> f64 {
        let g = [[-1.0, -1.0, -1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        (0..3).map(|d| g[i][d] * g[j][d]).sum::<f64>() / 6.0
    };
    let m3 = |i: usize, j: usize| if i == j { 2.0 / 120.0 } else { 1.0 / 120.0 };
    let (ks, ms, ks3, ms3) = (
        local_stiffness(&tri, 0),
        local_mass(&tri, 0),
        local_stiffness(&tet, 0),
        local_mass(&tet, 0),
    );
    let mut local = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            local = local.max((ks[i][j] - k2[i][j]).abs()).max((ms[i][j] - m2(i, j)).abs());
        }
    }
    for i in 0..4 {
        for j in 0..4 {
            local = local
                .max((ks3[i][j] - k3(i, j)).abs())
                .max((ms3[i][j] - m3(i, j)).abs());
        }
    }

    let mesh: Mesh<f64> = build_unit_square(4)?;
    let dofs = DofMap::new(&mesh, true);
    let a = assemble_stiffness(&mesh, true)?;
    let b = dofs.gather(&assemble_mass_p1(&mesh)?.mul_vec(&vec![1.0; mesh.num_vertices()]));
    let n = dofs.len();
    if n > 500 {
        return Err(Error::InvalidArgument(format!("oracle system too large: {n}")));
    }
    let x = solve_sparse(&a, &b)?;
    let mut dense = DMatrix::<f64>::zeros(n, n);
    for (r, c, v) in a.triplets() {
        dense[(r, c)] += v;
    }
    let oracle = dense
        .lu()
        .solve(&DVector::from_vec(b))
        .ok_or_else(|| Error::Singular("dense oracle matrix".into()))?;
    let global = x
        .iter()
        .zip(oracle.iter())
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max);
    Ok((
        local <= 1e-14 && global <= 1e-10,
        format!("local matrices max deviation {local:.2e} (need <= 1e-14); {n}-unknown solve vs dense LU {global:.2e} (need <= 1e-10)"),
    ))
}

fn trivial_fixed_point() -> Result<(bool, String)> {
    let mesh: Mesh<f64> = build_lshape(2)?;
    let problem = ControlProblem::new(1e-3, -1.0, 1.0, |_| 0.0, |_| 0.0, Nonlinearity::Arctan)?;
    let sol = active_set_solve(&problem, &mesh, &KktState::zeros(&mesh), &KktOptions::default())?;
    let size = sol
        .y
        .values
        .iter()
        .chain(&sol.p.values)
        .chain(&sol.u.values)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let e = estimate(&mesh, &sol, &problem, EstimatorKind::Ours)?.total.total();
    Ok((
        sol.active_set_iters == 1 && size == 0.0 && e <= 1e-12,
        format!(
            "{} active set iteration(s), max |triple| {size:.2e}, E_ocp {e:.2e}",
            sol.active_set_iters
        ),
    ))
}

/// Fixed-point and feasibility defects of a converged solution.
fn solution_defects(problem: &ControlProblem<f64>, mesh: &Mesh<f64>, sol: &KktSolution<f64>) -> Result<Option<String>> {
    if let Some(e) =
        (0..mesh.num_elements()).find(|&e| !(problem.lower <= sol.u.values[e] && sol.u.values[e] <= problem.upper))
    {
        return Ok(Some(format!("control leaves the box on element {e}")));
    }
    let active = ActiveSets::from_adjoint(mesh, problem, &sol.p);
    if active.lower != sol.active_lower || active.upper != sol.active_upper {
        return Ok(Some("active sets are not reproduced by the adjoint".into()));
    }
    for e in 0..mesh.num_elements() {
        let mean = mesh.element(e).iter().map(|&v| sol.p.values[v]).sum::<f64>() / (mesh.dim() + 1) as f64;
        let proj = clamp(-mean / problem.nu, problem.lower, problem.upper);
        if (proj - sol.u.values[e]).abs() > 1e-9 * (1.0 + proj.abs()) {
            return Ok(Some(format!("control is not the projected adjoint on element {e}")));
        }
    }
    let res = kkt_residual(problem, mesh, &sol.state(), &active, &KktOptions::default())?.max_abs();
    if res > 1e-8 {
        return Ok(Some(format!("optimality residual {res:.2e}")));
    }
    Ok(None)
}

fn invariants() -> Result<(bool, String)> {
    let mut failures = Vec::new();

    // Conformity along marked refinement in 2D and 3D.
    let mut square: Mesh<f64> = build_lshape(0)?;
    let mut cube: Mesh<f64> = build_cube(0)?;
    let mut refinements = 0;
    for round in 0..8 {
        let pick =
            |m: &Mesh<f64>| -> Vec<usize> { (0..m.num_elements()).filter(|e| (e * 7 + round) % 3 == 0).collect() };
        square = refine(&square, &pick(&square))?.mesh;
        square.check_conformity()?;
        refinements += 1;
        if round < 4 {
            cube = refine(&cube, &pick(&cube))?.mesh;
            cube.check_conformity()?;
            refinements += 1;
        }
    }

    // Feasibility, fixed point and conformity on every adaptive iterate.
    let mut solutions = 0;
    let case = example1::<f64>(1e-3)?;
    let cube_problem = example2::<f64>(Nonlinearity::A2)?;
    for (problem, mesh, iters) in [(&case.problem, build_lshape(1)?, 8), (&cube_problem, build_cube(1)?, 4)] {
        let config = AdaptConfig {
            max_iters: iters,
            ..AdaptConfig::default()
        };
        adaptive_loop(problem, mesh, &config, None, |view| {
            view.mesh.check_conformity()?;
            if let Some(msg) = solution_defects(problem, view.mesh, view.solution)? {
                failures.push(format!("iteration {}: {msg}", view.iter));
            }
            solutions += 1;
            Ok(())
        })?;
    }

    // Maximum marking is invariant under positive scaling.
    let mut markings = 0;
    for n in [1usize, 2, 7, 50, 301] {
        let base: Vec<f64> = (0..n)
            .map(|i| ((i * 37 + 11) % 97) as f64 * (1.0 + (i as f64).sin().abs()))
            .collect();
        let reference = mark_max(&IndicatorField::new(IndicatorKind::Ocp, base.clone())?);
        for c in [1e-9, 0.125, 3.7, 1e12] {
            let scaled = IndicatorField::new(IndicatorKind::Ocp, base.iter().map(|v| v * c).collect())?;
            if mark_max(&scaled) != reference {
                failures.push(format!("marking changes under scaling by {c} (n = {n})"));
            }
            markings += 1;
        }
    }

    // Central differences against the closed-form derivatives.
    let mut fd = 0;
    let x = [0.0f64; 3];
    for (a, scale) in [
        (Nonlinearity::Arctan, 1.0),
        (Nonlinearity::A1, 1.0),
        (Nonlinearity::A2, 80.0),
        (Nonlinearity::A3, 3.0),
    ] {
        let h = 1e-5 / scale;
        for k in -30..=30 {
            let y = k as f64 * 0.05 + 0.0013;
            let d1 = (a.value(&x, y + h) - a.value(&x, y - h)) / (2.0 * h);
            let d2 = (a.dy(&x, y + h) - a.dy(&x, y - h)) / (2.0 * h);
            let (e1, e2) = (a.dy(&x, y), a.d2y(&x, y));
            if (d1 - e1).abs() > 1e-6 * (1.0 + e1.abs()) || (d2 - e2).abs() > 1e-6 * (1.0 + e2.abs()) {
                failures.push(format!("{a} derivatives disagree with differences at y = {y}"));
            }
            fd += 1;
        }
    }

    let summary = format!(
        "{refinements} refinements conforming, {solutions} solutions feasible and self-consistent, {markings} scalings, {fd} difference checks"
    );
    if failures.is_empty() {
        Ok((true, summary))
    } else {
        Ok((false, format!("{summary}; {}", failures.join("; "))))
    }
}

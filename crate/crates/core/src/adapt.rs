//! The adaptive loop: solve, estimate, mark, refine.

use std::io::{Read, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bench::{effectivity, exact_errors, ManufacturedCase};
use crate::error::{Error, Result};
use crate::estimator::{estimate, Estimate, EstimatorKind, IndicatorField};
use crate::fem::{DofMap, P0Function, P1Function};
use crate::mesh::{refine, uniform_refine, Mesh};
use crate::ocp::{active_set_solve, ControlProblem, KktOptions, KktSolution, KktState};
use crate::scalar::Real;

/// Estimator totals at or below this value stop the loop.
pub const ESTIMATOR_ZERO: f64 = 1e-12;

/// One row of the convergence history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptRecord {
    pub iter: usize,
    pub ndof: usize,
    pub est_st: f64,
    pub est_ad: f64,
    pub est_ct: f64,
    pub est_total: f64,
    pub err_y_h1: Option<f64>,
    pub err_p_h1: Option<f64>,
    pub err_u_l2: Option<f64>,
    pub err_total: Option<f64>,
    pub effectivity: Option<f64>,
    pub seconds: f64,
}

/// Solver effort of one iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct IterationStats {
    pub newton_iters: usize,
    pub active_set_iters: usize,
    pub elements: usize,
    pub marked: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefinementMode {
    /// Maximum marking and bisection of the marked elements.
    Adaptive,
    /// Every element is refined so that `h` halves.
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptConfig {
    pub max_iters: usize,
    pub estimator: EstimatorKind,
    pub refinement: RefinementMode,
    /// Prolong the previous solution as the next initial guess.
    pub warm_start: bool,
    pub kkt: KktOptions,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            max_iters: 1,
            estimator: EstimatorKind::Ours,
            refinement: RefinementMode::Adaptive,
            warm_start: true,
            kkt: KktOptions::default(),
        }
    }
}

/// What the observer sees after every solve.
pub struct IterationView<'a, T> {
    pub iter: usize,
    pub mesh: &'a Mesh<T>,
    pub solution: &'a KktSolution<T>,
    pub estimate: &'a Estimate<T>,
    pub record: &'a AdaptRecord,
}

pub struct AdaptOutcome<T> {
    pub records: Vec<AdaptRecord>,
    pub stats: Vec<IterationStats>,
    pub mesh: Mesh<T>,
    pub solution: KktSolution<T>,
    /// Elements marked after each iteration (empty for the last one).
    pub marked: Vec<Vec<usize>>,
}

/// `2 dim V + dim U`: interior vertices twice plus one control per element.
pub fn ndof<T: Real>(mesh: &Mesh<T>) -> usize {
    2 * DofMap::new(mesh, true).len() + mesh.num_elements()
}

/// Elements with `η_T² > ½ max η²`. When that set is empty but the maximum
/// is positive (all values equal), every maximizer is marked.
pub fn mark_max<T: Real>(indicators: &IndicatorField<T>) -> Vec<usize> {
    let max = indicators.max();
    if !(max > T::zero()) {
        return Vec::new();
    }
    let threshold = max * T::lit(0.5);
    let marked: Vec<usize> = (0..indicators.len())
        .filter(|&e| indicators.values[e] > threshold)
        .collect();
    if marked.is_empty() {
        (0..indicators.len()).filter(|&e| indicators.values[e] == max).collect()
    } else {
        marked
    }
}

/// Runs the adaptive (or uniform) loop for at most `config.max_iters`
/// solves, calling `observer` after each one.
pub fn adaptive_loop<T: Real>(
    problem: &ControlProblem<T>,
    initial: Mesh<T>,
    config: &AdaptConfig,
    exact: Option<&ManufacturedCase<T>>,
    mut observer: impl FnMut(&IterationView<'_, T>) -> Result<()>,
) -> Result<AdaptOutcome<T>> {
    if config.max_iters == 0 {
        return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
    }
    problem.validate()?;
    let mut mesh = initial;
    let mut guess = KktState::zeros(&mesh);
    let mut records = Vec::new();
    let mut stats = Vec::new();
    let mut all_marked = Vec::new();
    for iter in 1..=config.max_iters {
        let at = |e: Error| Error::AtIteration {
            iteration: iter,
            source: Box::new(e),
        };
        let start = Instant::now();
        let sol = active_set_solve(problem, &mesh, &guess, &config.kkt).map_err(at)?;
        let est = estimate(&mesh, &sol, problem, config.estimator).map_err(at)?;
        let errs = exact.map(|c| exact_errors(&mesh, &sol, c)).transpose().map_err(at)?;
        let est_total = est.total.total().as_f64();
        let record = AdaptRecord {
            iter,
            ndof: ndof(&mesh),
            est_st: est.st.total().as_f64(),
            est_ad: est.ad.total().as_f64(),
            est_ct: est.ct.total().as_f64(),
            est_total,
            err_y_h1: errs.map(|e| e.y_h1),
            err_p_h1: errs.map(|e| e.p_h1),
            err_u_l2: errs.map(|e| e.u_l2),
            err_total: errs.map(|e| e.total()),
            effectivity: errs.map(|e| effectivity(est_total, e.total())),
            seconds: start.elapsed().as_secs_f64(),
        };
        observer(&IterationView {
            iter,
            mesh: &mesh,
            solution: &sol,
            estimate: &est,
            record: &record,
        })?;
        records.push(record);
        let mut st = IterationStats {
            newton_iters: sol.newton_iters,
            active_set_iters: sol.active_set_iters,
            elements: mesh.num_elements(),
            marked: 0,
        };

        if iter == config.max_iters || est_total <= ESTIMATOR_ZERO {
            stats.push(st);
            all_marked.push(Vec::new());
            return Ok(AdaptOutcome {
                records,
                stats,
                mesh,
                solution: sol,
                marked: all_marked,
            });
        }

        let (refined, marked) = match config.refinement {
            RefinementMode::Adaptive => {
                let marked = mark_max(&est.total);
                (refine(&mesh, &marked).map_err(at)?, marked)
            }
            RefinementMode::Uniform => (uniform_refine(&mesh).map_err(at)?, (0..mesh.num_elements()).collect()),
        };
        st.marked = marked.len();
        stats.push(st);
        all_marked.push(marked);
        guess = if config.warm_start {
            KktState {
                y: P1Function {
                    values: refined.prolong_nodal(&sol.y.values),
                    dirichlet: true,
                },
                p: P1Function {
                    values: refined.prolong_nodal(&sol.p.values),
                    dirichlet: true,
                },
                u: P0Function {
                    values: refined.prolong_elementwise(&sol.u.values),
                },
            }
        } else {
            KktState::zeros(&refined.mesh)
        };
        mesh = refined.mesh;
    }
    unreachable!("the loop returns on its last iteration")
}

/// Writes records as CSV with a header row.
pub fn write_records<W: Write>(records: &[AdaptRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads records written by [`write_records`].
pub fn read_records<R: Read>(input: R) -> Result<Vec<AdaptRecord>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::IndicatorKind;

    fn field(v: Vec<f64>) -> IndicatorField<f64> {
        IndicatorField::new(IndicatorKind::Ocp, v).unwrap()
    }

    #[test]
    fn marking_examples() {
        assert_eq!(mark_max(&field(vec![4.0, 1.0, 3.0])), vec![0, 2]);
        assert_eq!(mark_max(&field(vec![2.0, 2.0, 2.0])), vec![0, 1, 2]);
        assert_eq!(mark_max(&field(vec![7.0])), vec![0]);
        assert!(mark_max(&field(vec![0.0, 0.0])).is_empty());
    }

    #[test]
    fn csv_round_trip() {
        let recs = vec![
            AdaptRecord {
                iter: 1,
                ndof: 10,
                est_st: 0.1,
                est_ad: 0.2,
                est_ct: 1.0 / 3.0,
                est_total: 0.5,
                err_y_h1: Some(1e-3),
                err_p_h1: Some(2e-3),
                err_u_l2: Some(std::f64::consts::PI),
                err_total: Some(4.0),
                effectivity: Some(f64::INFINITY),
                seconds: 0.25,
            },
            AdaptRecord {
                iter: 2,
                ndof: 20,
                est_st: 0.0,
                est_ad: 0.0,
                est_ct: 0.0,
                est_total: 0.0,
                err_y_h1: None,
                err_p_h1: None,
                err_u_l2: None,
                err_total: None,
                effectivity: None,
                seconds: 1.0,
            },
        ];
        let mut buf = Vec::new();
        write_records(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "iter,ndof,est_st,est_ad,est_ct,est_total,err_y_h1,err_p_h1,err_u_l2,err_total,effectivity,seconds\n"
        ));
        assert_eq!(read_records(&buf[..]).unwrap(), recs);
    }
}

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use ocp_afem::adapt::{adaptive_loop, write_records, AdaptConfig, AdaptRecord, RefinementMode};
use ocp_afem::bench::{example1, example2, fit_rate};
use ocp_afem::estimator::EstimatorKind;
use ocp_afem::mesh::{build_cube, build_lshape, write_vtk, VtkField};
use ocp_afem::nonlinearity::Nonlinearity;
use ocp_afem::ocp::KktOptions;
use ocp_afem::Error;

#[derive(Parser)]
#[command(
    name = "ocp-afem",
    version,
    about = "Adaptive FEM for control-constrained semilinear optimal control"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one benchmark and write records.csv, mesh_<iter>.vtk and summary.json.
    Run(RunArgs),
    /// Run the acceptance suite.
    Verify,
}

#[derive(Clone, Copy, ValueEnum)]
enum NonlinearityArg {
    Arctan,
    A1,
    A2,
    A3,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Ours,
    Competitor,
}

#[derive(Clone, Copy, ValueEnum)]
enum RefinementArg {
    Adaptive,
    Uniform,
}

#[derive(clap::Args)]
struct RunArgs {
    /// 1: L-shape with known solution; 2: cube.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    example: u8,
    /// Regularization parameter (the cube benchmark fixes 1e-3).
    #[arg(long, default_value_t = 1e-3)]
    nu: f64,
    #[arg(long, value_enum, default_value = "arctan")]
    nonlinearity: NonlinearityArg,
    #[arg(long, value_enum, default_value = "ours")]
    estimator: EstimatorArg,
    #[arg(long, value_enum, default_value = "adaptive")]
    refinement: RefinementArg,
    #[arg(long, default_value_t = 10)]
    max_iters: usize,
    #[arg(long)]
    out: PathBuf,
    /// Start every solve from zero instead of the prolonged previous solution.
    #[arg(long)]
    cold_start: bool,
    /// Quadrature degree for terms involving the nonlinearity.
    #[arg(long)]
    quad_assembly: Option<usize>,
    /// Uniform refinements applied to the initial mesh.
    #[arg(long, default_value_t = 1)]
    initial_level: usize,
    /// Accepted for reproducibility bookkeeping; the solver uses no randomness.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Exit code 2 is reserved for solver non-convergence.
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match cli.command {
        Command::Run(args) => match run(&args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e:#}");
                let solver = e
                    .chain()
                    .any(|c| c.downcast_ref::<Error>().is_some_and(Error::is_non_convergence));
                ExitCode::from(if solver { 2 } else { 1 })
            }
        },
        Command::Verify => {
            let results = ocp_afem::acceptance::run_all_with(|r| println!("{r}"));
            if results.iter().all(|r| r.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
    }
}

fn slope(records: &[AdaptRecord], value: impl Fn(&AdaptRecord) -> Option<f64>) -> Option<f64> {
    let window = &records[records.len() / 2..];
    let pts: Option<Vec<(f64, f64)>> = window.iter().map(|r| value(r).map(|v| (r.ndof as f64, v))).collect();
    fit_rate(&pts?).ok()
}

fn run(args: &RunArgs) -> anyhow::Result<()> {
    if args.max_iters == 0 {
        bail!("--max-iters must be at least 1");
    }
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let estimator = match args.estimator {
        EstimatorArg::Ours => EstimatorKind::Ours,
        EstimatorArg::Competitor => EstimatorKind::Competitor,
    };
    let config = AdaptConfig {
        max_iters: args.max_iters,
        estimator,
        refinement: match args.refinement {
            RefinementArg::Adaptive => RefinementMode::Adaptive,
            RefinementArg::Uniform => RefinementMode::Uniform,
        },
        warm_start: !args.cold_start,
        kkt: KktOptions {
            quad_assembly: args.quad_assembly,
            ..KktOptions::default()
        },
    };
    let nonlinearity = match args.nonlinearity {
        NonlinearityArg::Arctan => Nonlinearity::Arctan,
        NonlinearityArg::A1 => Nonlinearity::A1,
        NonlinearityArg::A2 => Nonlinearity::A2,
        NonlinearityArg::A3 => Nonlinearity::A3,
    };

    let (case, problem, mesh) = match args.example {
        1 => {
            if !matches!(nonlinearity, Nonlinearity::Arctan) {
                bail!("example 1 uses --nonlinearity arctan");
            }
            let case = example1::<f64>(args.nu)?;
            let problem = case.problem.clone();
            (Some(case), problem, build_lshape::<f64>(args.initial_level)?)
        }
        _ => {
            if matches!(nonlinearity, Nonlinearity::Arctan) {
                bail!("example 2 uses --nonlinearity a1, a2 or a3");
            }
            (
                None,
                example2::<f64>(nonlinearity)?,
                build_cube::<f64>(args.initial_level)?,
            )
        }
    };

    let out = args.out.clone();
    let outcome = adaptive_loop(&problem, mesh, &config, case.as_ref(), |view| {
        let r = view.record;
        eprintln!(
            "iter {:3}  ndof {:8}  est {:.4e}  err {}  ({:.2}s)",
            r.iter,
            r.ndof,
            r.est_total,
            r.err_total.map_or("-".to_string(), |e| format!("{e:.4e}")),
            r.seconds
        );
        let path = out.join(format!("mesh_{}.vtk", view.iter));
        let file = BufWriter::new(File::create(&path)?);
        let fields = [
            VtkField::Point("y", &view.solution.y.values),
            VtkField::Point("p", &view.solution.p.values),
            VtkField::Cell("u", &view.solution.u.values),
            VtkField::Cell("indicator", &view.estimate.total.values),
        ];
        write_vtk(view.mesh, &fields, file)
    })?;

    write_records(&outcome.records, File::create(args.out.join("records.csv"))?)?;
    let last = outcome.records.last().expect("at least one record");
    let recs = &outcome.records;
    let summary = json!({
        "example": args.example,
        "nu": problem.nu,
        "nonlinearity": nonlinearity.to_string(),
        "estimator": estimator.to_string(),
        "refinement": match config.refinement { RefinementMode::Adaptive => "adaptive", RefinementMode::Uniform => "uniform" },
        "iterations": recs.len(),
        "final_ndof": last.ndof,
        "final_effectivity": last.effectivity,
        "slopes": {
            "est_total": slope(recs, |r| Some(r.est_total)),
            "err_y_h1": slope(recs, |r| r.err_y_h1),
            "err_p_h1": slope(recs, |r| r.err_p_h1),
            "err_u_l2": slope(recs, |r| r.err_u_l2),
            "err_total": slope(recs, |r| r.err_total),
        },
        "newton_iterations": outcome.stats.iter().map(|s| s.newton_iters).collect::<Vec<_>>(),
        "active_set_iterations": outcome.stats.iter().map(|s| s.active_set_iters).collect::<Vec<_>>(),
        "seed": args.seed,
    });
    fs::write(
        args.out.join("summary.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    Ok(())
}

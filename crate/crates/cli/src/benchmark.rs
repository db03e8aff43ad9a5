//! Benchmark runs and the CSV trace format.
//!
//! Layout: header `cviter,cvtime,cvobj,lsiter,lstime,lsobj,pditer,pdtime,pdobj`,
//! one row per log point, `.` decimal separator, LF line endings, no trailing
//! commas; missing series leave their fields empty. Times are the solver
//! driver's deterministic modeled seconds with 6 fractional digits, so a
//! given (seed, config) produces byte-identical files; real elapsed time goes
//! to stderr only. The `*obj` columns hold `(psi(x^(k)) - psi*) / psi*`.

use bregsplit::*;

use crate::experiment::{
    generate_equality_instance, generate_instance, EqualityInstance, ExperimentConfig,
    ExperimentInstance,
};
use crate::reference::ReferenceSolution;
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesPoint {
    pub iter: u64,
    pub time_s: f64,
    pub rel_obj: f64,
}

/// Projects records onto the CSV columns for one solver.
pub fn series_from_records(records: &[ConvergenceRecord], psi_star: f64) -> Vec<SeriesPoint> {
    records
        .iter()
        .map(|r| SeriesPoint {
            iter: r.k,
            time_s: r.time_s,
            rel_obj: (r.objective - psi_star) / psi_star,
        })
        .collect()
}

fn push_cell(row: &mut String, point: Option<&SeriesPoint>) {
    match point {
        Some(p) => {
            row.push_str(&format!("{},{:.6},{:.12e}", p.iter, p.time_s, p.rel_obj));
        }
        None => row.push_str(",,"),
    }
}

pub fn render_csv(
    cv: Option<&[SeriesPoint]>,
    ls: Option<&[SeriesPoint]>,
    pd: Option<&[SeriesPoint]>,
) -> String {
    let mut out = String::from("cviter,cvtime,cvobj,lsiter,lstime,lsobj,pditer,pdtime,pdobj\n");
    let len = [cv, ls, pd]
        .iter()
        .flatten()
        .map(|s| s.len())
        .max()
        .unwrap_or(0);
    for i in 0..len {
        let mut row = String::new();
        push_cell(&mut row, cv.and_then(|s| s.get(i)));
        row.push(',');
        push_cell(&mut row, ls.and_then(|s| s.get(i)));
        row.push(',');
        push_cell(&mut row, pd.and_then(|s| s.get(i)));
        row.push('\n');
        out.push_str(&row);
    }
    out
}

#[derive(Debug)]
pub struct BenchmarkOutput {
    pub csv: String,
    pub cv: Vec<SeriesPoint>,
    pub pd: Vec<SeriesPoint>,
    pub elapsed: std::time::Duration,
}

/// Runs the fixed-step Condat-Vu and PD3O solvers on the main instance and
/// renders the trace. The line-search columns stay empty here: that solver
/// accepts only the equality-constrained form, served by
/// [`run_equality_benchmark`].
pub fn run_benchmark(
    cfg: &ExperimentConfig,
    inst: &ExperimentInstance,
    reference: &ReferenceSolution,
) -> Result<BenchmarkOutput, CliError> {
    cfg.validate()?;
    let cv_steps = inst.cv_steps();
    let pd_steps = inst.pd3o_steps();
    if !validate_stepsizes(Algorithm::CvPrimal, cv_steps, inst.op_norm_1_2, inst.l1)
        || !validate_stepsizes(
            Algorithm::Pd3o,
            pd_steps,
            inst.op_norm_spectral_bound,
            inst.l2,
        )
    {
        return Err(CliError::Numerical(
            "internal error: computed stepsizes failed validation".into(),
        ));
    }

    let stop = StoppingRule::max_iters(cfg.iters);
    let diag = DiagnosticsConfig::every(cfg.log_every);
    let mut elapsed = std::time::Duration::ZERO;
    let mut series = Vec::new();
    for (algorithm, steps) in [(Algorithm::CvPrimal, cv_steps), (Algorithm::Pd3o, pd_steps)] {
        let (x0, z0) = inst.uniform_start();
        let out = run(
            &inst.problem,
            Method::Fixed { algorithm, steps },
            x0,
            z0,
            &stop,
            &diag,
        )
        .map_err(|f| CliError::Numerical(f.to_string()))?;
        elapsed += out.elapsed;
        series.push(series_from_records(&out.records, reference.psi_star));
    }
    let pd = series.pop().expect("two series");
    let cv = series.pop().expect("two series");
    let csv = render_csv(Some(&cv), None, Some(&pd));
    Ok(BenchmarkOutput {
        csv,
        cv,
        pd,
        elapsed,
    })
}

#[derive(Debug)]
pub struct EqualityBenchmarkOutput {
    pub csv: String,
    /// Fixed-step dual Condat-Vu series (cv columns).
    pub cv: Vec<SeriesPoint>,
    /// Line-search series (ls columns).
    pub ls: Vec<SeriesPoint>,
    pub ls_records: Vec<ConvergenceRecord>,
    pub psi_star: f64,
    pub elapsed: std::time::Duration,
}

/// Runs the fixed-step dual Condat-Vu solver and its line-search variant on
/// the equality-constrained instance; the PD3O columns stay empty.
pub fn run_equality_benchmark(
    cfg: &ExperimentConfig,
    inst: &EqualityInstance,
) -> Result<EqualityBenchmarkOutput, CliError> {
    cfg.validate()?;
    let steps = inst.cv_steps();
    let op_norm = norm_1_2(&*inst.problem.op);
    if !validate_stepsizes(Algorithm::CvDual, steps, op_norm, inst.l1) {
        return Err(CliError::Numerical(
            "internal error: computed stepsizes failed validation".into(),
        ));
    }
    let stop = StoppingRule::max_iters(cfg.iters);
    let diag = DiagnosticsConfig::every(cfg.log_every);

    let (x0, z0) = inst.uniform_start();
    let fixed = run(
        &inst.problem,
        Method::Fixed {
            algorithm: Algorithm::CvDual,
            steps,
        },
        x0,
        z0,
        &stop,
        &diag,
    )
    .map_err(|f| CliError::Numerical(f.to_string()))?;

    let (x0, z0) = inst.uniform_start();
    let ls = run(
        &inst.problem,
        Method::LineSearch(inst.ls_config(cfg.theta_bar, cfg.delta)),
        x0,
        z0,
        &stop,
        &diag,
    )
    .map_err(|f| CliError::Numerical(f.to_string()))?;

    let cv_series = series_from_records(&fixed.records, inst.psi_star);
    let ls_series = series_from_records(&ls.records, inst.psi_star);
    let csv = render_csv(Some(&cv_series), Some(&ls_series), None);
    Ok(EqualityBenchmarkOutput {
        csv,
        cv: cv_series,
        ls: ls_series,
        ls_records: ls.records,
        psi_star: inst.psi_star,
        elapsed: fixed.elapsed + ls.elapsed,
    })
}

/// Convenience: generate, solve, and render in one call (used by the CLI).
pub fn run_equality_benchmark_from_config(
    cfg: &ExperimentConfig,
) -> Result<EqualityBenchmarkOutput, CliError> {
    cfg.validate()?;
    let inst = generate_equality_instance(cfg);
    run_equality_benchmark(cfg, &inst)
}

/// Generate the main instance and its reference, then benchmark (CLI path
/// when no reference file is supplied).
pub fn run_benchmark_from_config(
    cfg: &ExperimentConfig,
    reference: Option<ReferenceSolution>,
    reference_budget: u64,
) -> Result<(BenchmarkOutput, ReferenceSolution), CliError> {
    cfg.validate()?;
    let inst = generate_instance(cfg);
    let reference = match reference {
        Some(r) => {
            if !r.matches(cfg) {
                return Err(CliError::Config(
                    "reference file does not match the requested instance (seed/m/n/lam)".into(),
                ));
            }
            r
        }
        None => crate::reference::compute_reference(cfg, &inst, reference_budget)?,
    };
    let out = run_benchmark(cfg, &inst, &reference)?;
    Ok((out, reference))
}

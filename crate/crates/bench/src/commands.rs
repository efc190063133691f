use std::sync::Arc;
use std::time::Instant;

use anyhow::{Context, Result};
use sivs_core::diagnostics::{
    centerline, contraction_trace, errors_vs_analytic, rates, Centerline, CenterlineSample, GhiaTable,
};
use sivs_core::fe::{ConstrainedSystem, TaylorHoodSpace, HIGH_ORDER_DEGREE};
use sivs_core::mesh::TriMesh;
use sivs_core::problems::{LidDrivenCavity, ManufacturedSolution};
use sivs_core::quadrature::QuadratureRule;
use sivs_core::solvers::{solve, InitialGuess, Method, SolveConfig, SolveResult};
use sivs_core::sparse::norm2;

use crate::config::{Experiment, RunConfig};
use crate::output;
use crate::report::{MemberReport, PairDistance, RateRow, RunReport};

pub fn run(config: RunConfig) -> Result<RunReport> {
    sivs_core::set_single_threaded(config.single_thread);
    std::fs::create_dir_all(&config.out).with_context(|| format!("creating {}", config.out.display()))?;
    let start = Instant::now();
    let mut report = RunReport::new(config.clone());
    match config.experiment {
        Experiment::Mms => mms(&config, &mut report)?,
        Experiment::Cavity => cavity(&config, &mut report)?,
        Experiment::GammaSweep => gamma_sweep(&config, &mut report)?,
        Experiment::Compare => compare(&config, &mut report)?,
    }
    report.wall_time_s = start.elapsed().as_secs_f64();
    output::write_iterations(&config.out, &report.members)?;
    output::write_json(&config.out, "report.json", &report)?;
    Ok(report)
}

fn space(n: usize) -> Result<Arc<TaylorHoodSpace>> {
    Ok(Arc::new(TaylorHoodSpace::new(TriMesh::unit_square(n)?)))
}

fn timed_solve(sys: &ConstrainedSystem, cfg: &SolveConfig, init: &InitialGuess) -> Result<(SolveResult, f64)> {
    let t = Instant::now();
    let r = solve(sys, cfg, init)?;
    Ok((r, t.elapsed().as_secs_f64()))
}

/// Contraction monitor against a tightly converged monolithic solve.
fn attach_contraction(
    config: &RunConfig,
    sys: &ConstrainedSystem,
    result: &SolveResult,
    member: &mut MemberReport,
) -> Result<()> {
    if !config.keep_iterates {
        return Ok(());
    }
    let reference_cfg = SolveConfig { stop_tol: 1e-10, ..SolveConfig::new(Method::Picard) };
    let reference = solve(sys, &reference_cfg, &InitialGuess::zeros(sys))?;
    let trace = contraction_trace(sys, result, &reference.velocity, &reference.pressure)?;
    member.contraction_ratio = trace.ratio;
    output::write_contraction(&config.out, &member.label, &trace)
}

fn mms(config: &RunConfig, report: &mut RunReport) -> Result<()> {
    let problem = ManufacturedSolution::new(config.nu);
    let gamma = config.gamma[0];
    let method = config.methods[0];
    let rule = QuadratureRule::collapsed(HIGH_ORDER_DEGREE);
    for &n in &config.n {
        let sys = problem.build(n, gamma)?;
        let (result, secs) = timed_solve(&sys, &config.solve_config(method), &InitialGuess::zeros(&sys))?;
        let errors = errors_vs_analytic(
            sys.space(),
            &result.velocity,
            &result.pressure,
            |p| (problem.velocity(p), problem.velocity_gradient(p)),
            |p| problem.pressure(p),
            &rule,
        )?;
        let h = sys.space().mesh().mesh_size();
        let mut member = MemberReport::new(format!("n{n}"), n, h, None, config.nu, gamma, &result, secs);
        member.errors = Some(errors);
        attach_contraction(config, &sys, &result, &mut member)?;
        report.push(member);
    }
    let rows = rate_rows(&report.members)?;
    output::write_rates(&config.out, &rows)?;
    report.rates = Some(rows);
    Ok(())
}

pub fn rate_rows(members: &[MemberReport]) -> Result<Vec<RateRow>> {
    let h: Vec<f64> = members.iter().map(|m| m.h).collect();
    let errs: Vec<[f64; 4]> = members.iter().map(|m| m.errors.unwrap_or_default().as_array()).collect();
    let mut columns = Vec::with_capacity(4);
    for c in 0..4 {
        let col: Vec<f64> = errs.iter().map(|e| e[c]).collect();
        columns.push(rates(&h, &col)?);
    }
    Ok(members
        .iter()
        .enumerate()
        .map(|(i, m)| RateRow {
            n: m.n,
            h: m.h,
            errors: m.errors.unwrap_or_default(),
            rates: [columns[0][i], columns[1][i], columns[2][i], columns[3][i]],
            iterations: m.iterations,
            converged: m.converged,
        })
        .collect())
}

fn centerlines(
    space: &TaylorHoodSpace,
    velocity: &[f64],
    re: Option<f64>,
) -> Result<(CenterlineSample, CenterlineSample)> {
    let (gu, gv) = (GhiaTable::u(), GhiaTable::v());
    Ok((
        centerline(space, velocity, Centerline::Vertical, &gu.coordinates, re)?,
        centerline(space, velocity, Centerline::Horizontal, &gv.coordinates, re)?,
    ))
}

fn write_centerline_pair(config: &RunConfig, samples: Vec<(String, (CenterlineSample, CenterlineSample))>) -> Result<()> {
    let (u, v): (Vec<_>, Vec<_>) = samples.into_iter().map(|(l, (u, v))| ((l.clone(), u), (l, v))).unzip();
    output::write_centerlines(&config.out, "centerline_u.csv", "y", &u)?;
    output::write_centerlines(&config.out, "centerline_v.csv", "x", &v)?;
    output::write_ghia(&config.out)
}

fn cavity(config: &RunConfig, report: &mut RunReport) -> Result<()> {
    let n = config.n[0];
    let gamma = config.gamma[0];
    let method = config.methods[0];
    let space = space(n)?;
    let h = space.mesh().mesh_size();
    let mut warm: Option<InitialGuess> = None;
    let mut samples = Vec::new();
    let mut last = None;
    for &re in &config.re {
        let problem = LidDrivenCavity::new(re);
        let sys = problem.build_on(space.clone(), gamma)?;
        let init = warm.clone().unwrap_or_else(|| InitialGuess::zeros(&sys));
        let (result, secs) = timed_solve(&sys, &config.solve_config(method), &init)?;
        if result.converged {
            warm = Some(InitialGuess::from_result(&result));
        }
        let label = format!("re{re}");
        samples.push((label.clone(), centerlines(&space, &result.velocity, Some(re))?));
        let mut member = MemberReport::new(label, n, h, Some(re), problem.nu(), gamma, &result, secs);
        attach_contraction(config, &sys, &result, &mut member)?;
        report.push(member);
        last = Some(result);
    }
    write_centerline_pair(config, samples)?;
    if let Some(r) = last {
        output::write_field_sample(&config.out, &space, &r.velocity, &r.pressure)?;
    }
    Ok(())
}

fn gamma_sweep(config: &RunConfig, report: &mut RunReport) -> Result<()> {
    let n = config.n[0];
    let re = config.re[0];
    let method = config.methods[0];
    let problem = LidDrivenCavity::new(re);
    let space = space(n)?;
    let h = space.mesh().mesh_size();
    for &gamma in &config.gamma {
        let sys = problem.build_on(space.clone(), gamma)?;
        let (result, secs) = timed_solve(&sys, &config.solve_config(method), &InitialGuess::zeros(&sys))?;
        let mut member =
            MemberReport::new(format!("gamma{gamma}"), n, h, Some(re), problem.nu(), gamma, &result, secs);
        attach_contraction(config, &sys, &result, &mut member)?;
        report.push(member);
    }
    Ok(())
}

fn rel_dist(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm2(a).max(norm2(b));
    if scale == 0.0 {
        0.0
    } else {
        norm2(&d) / scale
    }
}

fn compare(config: &RunConfig, report: &mut RunReport) -> Result<()> {
    let n = config.n[0];
    let gamma = config.gamma[0];
    let re = config.re.first().copied();
    let sys = match re {
        Some(re) => LidDrivenCavity::new(re).build(n, gamma)?,
        None => ManufacturedSolution::new(config.nu).build(n, gamma)?,
    };
    let h = sys.space().mesh().mesh_size();
    let mut results = Vec::new();
    let mut samples = Vec::new();
    for &method in &config.methods {
        let (result, secs) = timed_solve(&sys, &config.solve_config(method), &InitialGuess::zeros(&sys))?;
        samples.push((method.to_string(), centerlines(sys.space(), &result.velocity, re)?));
        let mut member = MemberReport::new(method.to_string(), n, h, re, sys.nu(), gamma, &result, secs);
        attach_contraction(config, &sys, &result, &mut member)?;
        report.push(member);
        results.push(result);
    }
    let mut distances = Vec::new();
    for i in 0..results.len() {
        for j in (i + 1)..results.len() {
            let (a, b) = (&results[i], &results[j]);
            let (sa, sb) = (&samples[i].1, &samples[j].1);
            let centerline = sa
                .0
                .values
                .iter()
                .zip(&sb.0.values)
                .chain(sa.1.values.iter().zip(&sb.1.values))
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            distances.push(PairDistance {
                first: a.method,
                second: b.method,
                velocity: rel_dist(&a.velocity, &b.velocity),
                pressure: rel_dist(&a.pressure, &b.pressure),
                centerline,
            });
        }
    }
    report.distances = Some(distances);
    write_centerline_pair(config, samples)
}

//! Nonlinear drivers for the steady Navier-Stokes problem.
//!
//! All three methods linearize the convection with the previous velocity and
//! share the stopping test
//! `|P_k - P_{k-1}| / |P_k| <= stop_tol` (Euclidean norms of zero-mean
//! pressure coefficients).
//!
//! * [`Method::Sivs`]: momentum solve with `A_{k-1}`, pressure increment
//!   from `S = B A~^{-1} B^T`, velocity update with `A~^{-1}`. `A~` and the
//!   pressure mass preconditioner are factorized once per system.
//! * [`Method::Ipy`]: same as SIVS but the velocity update uses
//!   `A_{k-1}^{-1}`.
//! * [`Method::Picard`]: the coupled saddle-point system is solved directly.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::fe::ConstrainedSystem;
use crate::sparse::{cg, lu_factorize, norm2, project_mean_zero, CgOptions, CsrMatrix, KrylovStats, LinearOperator};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sivs,
    Picard,
    Ipy,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Sivs => "sivs",
            Method::Picard => "picard",
            Method::Ipy => "ipy",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sivs" => Ok(Method::Sivs),
            "picard" => Ok(Method::Picard),
            "ipy" => Ok(Method::Ipy),
            other => Err(Error::InvalidConfig(format!("unknown method '{other}'"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which velocity advects in the linearized momentum equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdvectingField {
    /// The previous end-of-step (discretely divergence-free) velocity.
    #[default]
    EndOfStep,
    /// The previous tentative velocity.
    Tentative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub method: Method,
    pub stop_tol: f64,
    pub max_nonlinear: usize,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    pub advecting: AdvectingField,
    /// Drop the convection term (Stokes problem).
    pub convection: bool,
    /// Retain `U_k`, `U~_k`, `P_k` of every iteration.
    pub keep_iterates: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            method: Method::Sivs,
            stop_tol: 1e-6,
            max_nonlinear: 500,
            inner_tol: 1e-10,
            inner_max_iter: 2000,
            advecting: AdvectingField::EndOfStep,
            convection: true,
            keep_iterates: false,
        }
    }
}

impl SolveConfig {
    pub fn new(method: Method) -> Self {
        Self { method, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.stop_tol > 0.0) {
            return Err(Error::InvalidConfig(format!("stop_tol must be positive, got {}", self.stop_tol)));
        }
        if self.max_nonlinear == 0 {
            return Err(Error::InvalidConfig("max_nonlinear must be at least 1".into()));
        }
        if !(self.inner_tol > 0.0) || self.inner_max_iter == 0 {
            return Err(Error::InvalidConfig("inner solver tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub k: usize,
    pub rel_p_increment: f64,
    /// `|B U|` on the full velocity vector.
    pub div_norm: f64,
    pub wall_time_s: f64,
    /// Schur-complement CG statistics (absent for the monolithic solve).
    pub krylov: Option<KrylovStats>,
}

/// Velocity and pressure coefficients of one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub velocity: Vec<f64>,
    pub tentative: Vec<f64>,
    pub pressure: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub method: Method,
    /// Full velocity vector including boundary values.
    pub velocity: Vec<f64>,
    /// Zero-mean pressure.
    pub pressure: Vec<f64>,
    /// Tentative velocity of the last iteration (equal to `velocity` for
    /// the monolithic solve).
    pub tentative: Vec<f64>,
    pub records: Vec<IterRecord>,
    pub converged: bool,
    pub iterations: usize,
    pub iterates: Vec<Iterate>,
}

impl SolveResult {
    pub fn final_increment(&self) -> Option<f64> {
        self.records.last().map(|r| r.rel_p_increment)
    }
}

/// Initial velocity (full vector; boundary values are overwritten) and
/// pressure.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialGuess {
    pub velocity: Vec<f64>,
    pub pressure: Vec<f64>,
}

impl InitialGuess {
    pub fn zeros(system: &ConstrainedSystem) -> Self {
        Self { velocity: vec![0.0; system.space().n_velocity()], pressure: vec![0.0; system.n_pressure()] }
    }

    pub fn from_result(r: &SolveResult) -> Self {
        Self { velocity: r.velocity.clone(), pressure: r.pressure.clone() }
    }
}

/// Relative pressure increment; falls back to the absolute increment when
/// the pressure itself vanishes.
fn pressure_increment(p_new: &[f64], p_old: &[f64]) -> (f64, bool) {
    let diff: f64 = p_new.iter().zip(p_old).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let norm = norm2(p_new);
    if norm < 1e-14 {
        (diff, true)
    } else {
        (diff / norm, false)
    }
}

fn check_initial(system: &ConstrainedSystem, init: &InitialGuess) -> Result<()> {
    let nv = system.space().n_velocity();
    if init.velocity.len() != nv {
        return Err(Error::DimensionMismatch { expected: nv, got: init.velocity.len() });
    }
    if init.pressure.len() != system.n_pressure() {
        return Err(Error::DimensionMismatch { expected: system.n_pressure(), got: init.pressure.len() });
    }
    Ok(())
}

/// Dispatches on `config.method`.
pub fn solve(system: &ConstrainedSystem, config: &SolveConfig, init: &InitialGuess) -> Result<SolveResult> {
    match config.method {
        Method::Sivs | Method::Ipy => splitting_solve(system, config, init),
        Method::Picard => picard_monolithic_solve(system, config, init),
    }
}

/// Steady incremental viscosity splitting.
pub fn sivs_solve(system: &ConstrainedSystem, config: &SolveConfig, init: &InitialGuess) -> Result<SolveResult> {
    if config.method != Method::Sivs {
        return Err(Error::InvalidConfig(format!("sivs_solve called with method {}", config.method)));
    }
    splitting_solve(system, config, init)
}

/// Incremental Picard-Yosida.
pub fn ipy_solve(system: &ConstrainedSystem, config: &SolveConfig, init: &InitialGuess) -> Result<SolveResult> {
    if config.method != Method::Ipy {
        return Err(Error::InvalidConfig(format!("ipy_solve called with method {}", config.method)));
    }
    splitting_solve(system, config, init)
}

fn linearized(system: &ConstrainedSystem, config: &SolveConfig, w: &[f64]) -> Result<(CsrMatrix, Vec<f64>)> {
    if config.convection {
        system.linearized_operator(w)
    } else {
        Ok((system.a_tilde_ff().clone(), system.lifted_load().to_vec()))
    }
}

fn splitting_solve(system: &ConstrainedSystem, config: &SolveConfig, init: &InitialGuess) -> Result<SolveResult> {
    config.validate()?;
    check_initial(system, init)?;
    let space = system.space();
    let schur = system.schur_operator()?;
    let precond = system.mass_preconditioner()?;
    let a_tilde = system.a_tilde_factor()?;
    let full_b = &system.system().divergence;
    let cg_opts = CgOptions { tol: config.inner_tol, max_iter: config.inner_max_iter };

    let mut u = system.extend(&space.restrict(&init.velocity));
    let mut p = init.pressure.clone();
    system.zero_mean_pressure(&mut p);
    let mut u_tilde = u.clone();
    let mut records = Vec::new();
    let mut iterates = Vec::new();
    let mut converged = false;

    for k in 1..=config.max_nonlinear {
        let start = Instant::now();
        let w = match config.advecting {
            AdvectingField::Tentative if k > 1 => &u_tilde,
            _ => &u,
        };

        // momentum solve with the previous pressure
        let (a_k, mut rhs) = linearized(system, config, w)?;
        let grad_p = schur.gradient().mul_vec(&p);
        rhs.iter_mut().zip(&grad_p).for_each(|(r, g)| *r -= g);
        let a_k_factor = lu_factorize(&a_k)?;
        let ut_free = a_k_factor.solve(&rhs);
        u_tilde = system.extend(&ut_free);

        // pressure increment from S dp = B U~
        let mut div_rhs = full_b.mul_vec(&u_tilde);
        project_mean_zero(&mut div_rhs);
        let (dp, stats) = cg(&schur, &div_rhs, precond.as_ref(), cg_opts)?;
        if !stats.converged {
            return Err(Error::Factorization(format!(
                "Schur CG did not converge at nonlinear iteration {k}: residual {:e} after {} iterations",
                stats.relative_residual, stats.iterations
            )));
        }

        // velocity update
        let mut correction = schur.gradient().mul_vec(&dp);
        match config.method {
            Method::Ipy => a_k_factor.solve_in_place(&mut correction),
            _ => a_tilde.solve_in_place(&mut correction),
        }
        let u_free: Vec<f64> = ut_free.iter().zip(&correction).map(|(a, c)| a - c).collect();
        u = system.extend(&u_free);

        let p_old = p.clone();
        p.iter_mut().zip(&dp).for_each(|(a, d)| *a += d);
        system.zero_mean_pressure(&mut p);

        let (inc, _) = pressure_increment(&p, &p_old);
        let div_norm = norm2(&full_b.mul_vec(&u));
        records.push(IterRecord {
            k,
            rel_p_increment: inc,
            div_norm,
            wall_time_s: start.elapsed().as_secs_f64(),
            krylov: Some(stats),
        });
        if config.keep_iterates {
            iterates.push(Iterate { velocity: u.clone(), tentative: u_tilde.clone(), pressure: p.clone() });
        }
        if inc <= config.stop_tol {
            converged = true;
            break;
        }
    }

    Ok(SolveResult {
        method: config.method,
        iterations: records.len(),
        velocity: u,
        pressure: p,
        tentative: u_tilde,
        records,
        converged,
        iterates,
    })
}

/// Builds `[[A, B_f^T], [B_f, 0]]` with pressure dof 0 removed.
fn saddle_matrix(a: &CsrMatrix, b_free: &CsrMatrix, bt: &CsrMatrix) -> CsrMatrix {
    let nf = a.nrows();
    let np = b_free.nrows();
    let n = nf + np - 1;
    let mut t = Vec::with_capacity(a.nnz() + 2 * b_free.nnz());
    for r in 0..nf {
        t.extend(a.row(r).map(|(c, v)| (r, c, v)));
        t.extend(bt.row(r).filter(|(c, _)| *c > 0).map(|(c, v)| (r, nf + c - 1, v)));
    }
    for q in 1..np {
        t.extend(b_free.row(q).map(|(c, v)| (nf + q - 1, c, v)));
    }
    CsrMatrix::from_triplets(n, n, &t)
}

/// Monolithic Picard iteration with a direct saddle-point solve.
pub fn picard_monolithic_solve(
    system: &ConstrainedSystem,
    config: &SolveConfig,
    init: &InitialGuess,
) -> Result<SolveResult> {
    config.validate()?;
    if config.method != Method::Picard {
        return Err(Error::InvalidConfig(format!("picard_monolithic_solve called with method {}", config.method)));
    }
    check_initial(system, init)?;
    let space = system.space();
    let nf = system.n_free();
    let b_free = system.divergence_free_cols();
    let bt = b_free.transpose();
    let full_b = &system.system().divergence;
    let lift = system.divergence_lifting();

    let mut u = system.extend(&space.restrict(&init.velocity));
    let mut p = init.pressure.clone();
    system.zero_mean_pressure(&mut p);
    let mut records = Vec::new();
    let mut iterates = Vec::new();
    let mut converged = false;

    for k in 1..=config.max_nonlinear {
        let start = Instant::now();
        let (a_k, rhs_u) = linearized(system, config, &u)?;
        let saddle = saddle_matrix(&a_k, b_free, &bt);
        let mut rhs = rhs_u;
        rhs.extend_from_slice(&lift[1..]);
        let x = lu_factorize(&saddle)?.solve(&rhs);
        u = system.extend(&x[..nf]);
        let p_old = p.clone();
        p = std::iter::once(0.0).chain(x[nf..].iter().copied()).collect();
        system.zero_mean_pressure(&mut p);

        let (inc, _) = pressure_increment(&p, &p_old);
        let div_norm = norm2(&full_b.mul_vec(&u));
        records.push(IterRecord {
            k,
            rel_p_increment: inc,
            div_norm,
            wall_time_s: start.elapsed().as_secs_f64(),
            krylov: None,
        });
        if config.keep_iterates {
            iterates.push(Iterate { velocity: u.clone(), tentative: u.clone(), pressure: p.clone() });
        }
        if inc <= config.stop_tol {
            converged = true;
            break;
        }
    }

    Ok(SolveResult {
        method: Method::Picard,
        iterations: records.len(),
        tentative: u.clone(),
        velocity: u,
        pressure: p,
        records,
        converged,
        iterates,
    })
}

/// Solves a sequence of increasing Reynolds numbers, warm-starting each
/// member from the last converged one. The first member starts from zero.
///
/// `build` maps a Reynolds number to its constrained system.
pub fn continuation_solve<F>(re_list: &[f64], config: &SolveConfig, mut build: F) -> Result<Vec<SolveResult>>
where
    F: FnMut(f64) -> Result<ConstrainedSystem>,
{
    if re_list.is_empty() {
        return Err(Error::InvalidConfig("Reynolds list is empty".into()));
    }
    if re_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("Reynolds list must be strictly increasing".into()));
    }
    let mut out: Vec<SolveResult> = Vec::with_capacity(re_list.len());
    let mut warm: Option<InitialGuess> = None;
    for &re in re_list {
        let system = build(re)?;
        let init = warm.clone().unwrap_or_else(|| InitialGuess::zeros(&system));
        let result = solve(&system, config, &init)?;
        if result.converged {
            warm = Some(InitialGuess::from_result(&result));
        }
        out.push(result);
    }
    Ok(out)
}

/// `|B U|` relative measure used by tests: the largest end-of-step
/// divergence residual `|B U - 0|` over all records.
pub fn max_divergence(result: &SolveResult) -> f64 {
    result.records.iter().map(|r| r.div_norm).fold(0.0, f64::max)
}

/// Applies `S` to `q` through a fresh operator; convenience for diagnostics.
pub fn apply_schur(system: &ConstrainedSystem, q: &[f64]) -> Result<Vec<f64>> {
    let op = system.schur_operator()?;
    let mut y = vec![0.0; q.len()];
    if q.len() != op.dim() {
        return Err(Error::DimensionMismatch { expected: op.dim(), got: q.len() });
    }
    op.apply(q, &mut y);
    Ok(y)
}

/// Shared handle for callers that solve several methods on one system.
pub type SharedSystem = Arc<ConstrainedSystem>;

//! Error norms, convergence rates, contraction monitoring and centerline
//! sampling.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::fe::{ConstrainedSystem, TaylorHoodSpace};
use crate::mesh::Point2;
use crate::quadrature::QuadratureRule;
use crate::solvers::SolveResult;
use crate::sparse::{cholesky_factorize, dot};
use crate::{Error, Result};

/// Continuous error norms of a discrete solution.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorReport {
    /// `||u - u_h||` in L2.
    pub l2_u: f64,
    /// `||grad(u - u_h)||` in L2.
    pub h1_u: f64,
    /// `||div(u - u_h)||` in L2.
    pub div_u: f64,
    /// L2 error of the zero-mean pressure.
    pub l2_p: f64,
}

impl ErrorReport {
    pub const CSV_HEADER: &'static str = "l2_u,h1_u,div_u,l2_p";

    pub fn to_csv_row(&self) -> String {
        format!("{},{},{},{}", self.l2_u, self.h1_u, self.div_u, self.l2_p)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.l2_u, self.h1_u, self.div_u, self.l2_p]
    }
}

/// Integrates errors element by element with `rule`, which must be of
/// degree 10 or more for smooth reference fields.
pub fn errors_vs_analytic(
    space: &TaylorHoodSpace,
    velocity: &[f64],
    pressure: &[f64],
    exact_u: impl Fn(Point2) -> ([f64; 2], [[f64; 2]; 2]),
    exact_p: impl Fn(Point2) -> f64,
    rule: &QuadratureRule,
) -> Result<ErrorReport> {
    if rule.degree() < 10 {
        return Err(Error::InvalidConfig(format!("error quadrature needs degree >= 10, got {}", rule.degree())));
    }
    if velocity.len() != space.n_velocity() {
        return Err(Error::DimensionMismatch { expected: space.n_velocity(), got: velocity.len() });
    }
    if pressure.len() != space.n_pressure() {
        return Err(Error::DimensionMismatch { expected: space.n_pressure(), got: pressure.len() });
    }

    // first pass: pressure means
    let (mut area, mut mean_h, mut mean_e) = (0.0, 0.0, 0.0);
    for el in space.elements() {
        for (l, w) in rule.iter() {
            let wa = w * el.area;
            let ph: f64 = (0..3).map(|i| l[i] * pressure[el.vertices[i]]).sum();
            area += wa;
            mean_h += wa * ph;
            mean_e += wa * exact_p(el.point(l));
        }
    }
    mean_h /= area;
    mean_e /= area;

    let mut acc = [0.0f64; 4];
    for el in space.elements() {
        for (l, w) in rule.iter() {
            let wa = w * el.area;
            let x = el.point(l);
            let fh = space.velocity_at(velocity, &el, &el.p2(l));
            let (u, g) = exact_u(x);
            for c in 0..2 {
                acc[0] += wa * (u[c] - fh.value[c]).powi(2);
                for d in 0..2 {
                    acc[1] += wa * (g[c][d] - fh.gradient[c][d]).powi(2);
                }
            }
            acc[2] += wa * (g[0][0] + g[1][1] - fh.divergence()).powi(2);
            let ph: f64 = (0..3).map(|i| l[i] * pressure[el.vertices[i]]).sum();
            acc[3] += wa * ((exact_p(x) - mean_e) - (ph - mean_h)).powi(2);
        }
    }
    Ok(ErrorReport { l2_u: acc[0].sqrt(), h1_u: acc[1].sqrt(), div_u: acc[2].sqrt(), l2_p: acc[3].sqrt() })
}

/// `sqrt(r^T A~_ff^{-1} r)` with `r = B_f^T dp`: the discrete dual norm of
/// `grad dp`.
pub fn linv_norm(system: &ConstrainedSystem, dp: &[f64]) -> Result<f64> {
    if dp.len() != system.n_pressure() {
        return Err(Error::DimensionMismatch { expected: system.n_pressure(), got: dp.len() });
    }
    let r = system.divergence_free_cols().mul_vec_transpose(dp);
    let z = system.a_tilde_factor()?.solve(&r);
    Ok(dot(&r, &z).max(0.0).sqrt())
}

/// `sqrt(r^T K_ff^{-1} r)`: the discrete H^{-1} norm of a free-dof
/// functional. Factorizes `K_ff` on every call.
pub fn h_minus_one_norm(system: &ConstrainedSystem, r: &[f64]) -> Result<f64> {
    if r.len() != system.n_free() {
        return Err(Error::DimensionMismatch { expected: system.n_free(), got: r.len() });
    }
    let z = cholesky_factorize(system.stiffness_ff())?.solve(r);
    Ok(dot(r, &z).max(0.0).sqrt())
}

/// Components of the contraction monitor at one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MonitorTerms {
    /// `||grad e||^2`
    pub a: f64,
    /// `nu/4 ||grad e~||^2 + gamma/2 (||div e~||^2 + ||div e||^2)`
    pub b: f64,
    /// `1/2 ||grad delta||^2_{L^-1}`
    pub c: f64,
}

impl MonitorTerms {
    pub fn monitor(&self, nu: f64) -> f64 {
        0.5 * nu * self.a + self.b + self.c
    }
}

fn free_difference(system: &ConstrainedSystem, reference: &[f64], iterate: &[f64]) -> Vec<f64> {
    let (r, i) = (system.restrict(reference), system.restrict(iterate));
    r.iter().zip(&i).map(|(a, b)| a - b).collect()
}

/// `(a_k, b_k, c_k)` for one iterate against a reference solution; all
/// vectors are full (velocity) or complete (pressure) coefficient vectors.
pub fn errors_vs_reference(
    system: &ConstrainedSystem,
    velocity: &[f64],
    tentative: &[f64],
    pressure: &[f64],
    ref_velocity: &[f64],
    ref_pressure: &[f64],
) -> Result<MonitorTerms> {
    let nv = system.space().n_velocity();
    for v in [velocity, tentative, ref_velocity] {
        if v.len() != nv {
            return Err(Error::DimensionMismatch { expected: nv, got: v.len() });
        }
    }
    if pressure.len() != ref_pressure.len() {
        return Err(Error::DimensionMismatch { expected: ref_pressure.len(), got: pressure.len() });
    }
    let e = free_difference(system, ref_velocity, velocity);
    let et = free_difference(system, ref_velocity, tentative);
    let (k, g) = (system.stiffness_ff(), system.grad_div_ff());
    let (nu, gamma) = (system.nu(), system.gamma());
    let delta: Vec<f64> = ref_pressure.iter().zip(pressure).map(|(a, b)| a - b).collect();
    let l = linv_norm(system, &delta)?;
    Ok(MonitorTerms {
        a: k.quadratic_form(&e),
        b: 0.25 * nu * k.quadratic_form(&et) + 0.5 * gamma * (g.quadratic_form(&et) + g.quadratic_form(&e)),
        c: 0.5 * l * l,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionTrace {
    pub nu: f64,
    pub terms: Vec<MonitorTerms>,
    pub monitor: Vec<f64>,
    /// Geometric mean of `m_{k+1} / m_k` over `k >= 2`; `None` with fewer
    /// than three iterations.
    pub ratio: Option<f64>,
}

impl ContractionTrace {
    pub const CSV_HEADER: &'static str = "k,a,b,c,m";

    /// Whether `m_k` is non-increasing from `k = 2` on, allowing a relative
    /// slack `rel_tol` for round-off.
    pub fn is_non_increasing_from_second(&self, rel_tol: f64) -> bool {
        self.monitor.iter().skip(1).collect::<Vec<_>>().windows(2).all(|w| *w[1] <= *w[0] * (1.0 + rel_tol))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for (i, (t, m)) in self.terms.iter().zip(&self.monitor).enumerate() {
            writeln!(w, "{},{},{},{},{}", i + 1, t.a, t.b, t.c, m)?;
        }
        Ok(())
    }
}

/// Monitor sequence of a run that kept its iterates.
pub fn contraction_trace(
    system: &ConstrainedSystem,
    run: &SolveResult,
    ref_velocity: &[f64],
    ref_pressure: &[f64],
) -> Result<ContractionTrace> {
    if run.iterates.len() != run.iterations {
        return Err(Error::InvalidConfig("run did not keep its iterates".into()));
    }
    let mut terms = Vec::with_capacity(run.iterates.len());
    for it in &run.iterates {
        terms.push(errors_vs_reference(
            system,
            &it.velocity,
            &it.tentative,
            &it.pressure,
            ref_velocity,
            ref_pressure,
        )?);
    }
    let nu = system.nu();
    let monitor: Vec<f64> = terms.iter().map(|t| t.monitor(nu)).collect();
    let ratio = if monitor.len() >= 3 {
        let tail = &monitor[1..];
        let logs: Vec<f64> = tail.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
        let mean = logs.iter().sum::<f64>() / logs.len() as f64;
        mean.is_finite().then(|| mean.exp())
    } else {
        None
    };
    Ok(ContractionTrace { nu, terms, monitor, ratio })
}

/// `rate_i = log(e_{i-1}/e_i) / log(h_{i-1}/h_i)`. The first entry, and any
/// entry involving a nonpositive or non-finite error, is `None`.
pub fn rates(h: &[f64], errors: &[f64]) -> Result<Vec<Option<f64>>> {
    if h.len() != errors.len() {
        return Err(Error::DimensionMismatch { expected: h.len(), got: errors.len() });
    }
    let mut out = vec![None; h.len()];
    for i in 1..h.len() {
        let (e0, e1) = (errors[i - 1], errors[i]);
        let ok = |e: f64| e.is_finite() && e > 0.0;
        if ok(e0) && ok(e1) && h[i] > 0.0 && h[i - 1] > 0.0 && h[i] != h[i - 1] {
            out[i] = Some((e0 / e1).ln() / (h[i - 1] / h[i]).ln());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Centerline {
    /// `u_1` along `x = 0.5`, parametrized by `y`.
    Vertical,
    /// `u_2` along `y = 0.5`, parametrized by `x`.
    Horizontal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterlineSample {
    pub line: Centerline,
    pub coordinates: Vec<f64>,
    pub values: Vec<f64>,
    pub reynolds: Option<f64>,
}

impl CenterlineSample {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let (coord, comp) = match self.line {
            Centerline::Vertical => ("y", "u1"),
            Centerline::Horizontal => ("x", "u2"),
        };
        writeln!(w, "{coord},{comp}")?;
        for (c, v) in self.coordinates.iter().zip(&self.values) {
            writeln!(w, "{c},{v}")?;
        }
        Ok(())
    }
}

pub fn centerline(
    space: &TaylorHoodSpace,
    velocity: &[f64],
    line: Centerline,
    ordinates: &[f64],
    reynolds: Option<f64>,
) -> Result<CenterlineSample> {
    let mut values = Vec::with_capacity(ordinates.len());
    for &t in ordinates {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidConfig(format!("centerline ordinate {t} outside [0, 1]")));
        }
        let v = match line {
            Centerline::Vertical => space.evaluate_velocity(velocity, Point2::new(0.5, t))?.value[0],
            Centerline::Horizontal => space.evaluate_velocity(velocity, Point2::new(t, 0.5))?.value[1],
        };
        values.push(v);
    }
    Ok(CenterlineSample { line, coordinates: ordinates.to_vec(), values, reynolds })
}

/// Ghia, Ghia & Shin (1982) centerline data for the lid-driven cavity.
#[derive(Debug, Clone, PartialEq)]
pub struct GhiaTable {
    pub line: Centerline,
    pub coordinates: Vec<f64>,
    pub reynolds: Vec<f64>,
    /// `values[j][i]`: Reynolds number `j`, coordinate `i`.
    pub values: Vec<Vec<f64>>,
}

pub const GHIA_U_CSV: &str = include_str!("../data/ghia_u.csv");
pub const GHIA_V_CSV: &str = include_str!("../data/ghia_v.csv");

impl GhiaTable {
    pub fn u() -> Self {
        Self::parse(GHIA_U_CSV, Centerline::Vertical).expect("vendored Ghia u table")
    }

    pub fn v() -> Self {
        Self::parse(GHIA_V_CSV, Centerline::Horizontal).expect("vendored Ghia v table")
    }

    /// Header `coord,re<R1>,re<R2>,...`, one row per coordinate.
    pub fn parse(text: &str, line: Centerline) -> Result<Self> {
        let perr = |detail: String| Error::Parse { what: "ghia table".into(), detail };
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| perr("empty file".into()))?;
        let reynolds = header
            .split(',')
            .skip(1)
            .map(|h| h.trim().strip_prefix("re").and_then(|r| r.parse().ok()).ok_or_else(|| perr(format!("bad column '{h}'"))))
            .collect::<Result<Vec<f64>>>()?;
        let mut coordinates = Vec::new();
        let mut values = vec![Vec::new(); reynolds.len()];
        for l in lines {
            let fields = l
                .split(',')
                .map(|f| f.trim().parse::<f64>().map_err(|e| perr(format!("'{f}': {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            if fields.len() != reynolds.len() + 1 {
                return Err(perr(format!("row '{l}' has {} fields", fields.len())));
            }
            coordinates.push(fields[0]);
            for (j, v) in fields[1..].iter().enumerate() {
                values[j].push(*v);
            }
        }
        Ok(Self { line, coordinates, reynolds, values })
    }

    pub fn column(&self, reynolds: f64) -> Option<&[f64]> {
        self.reynolds.iter().position(|r| (r - reynolds).abs() < 1e-9).map(|j| self.values[j].as_slice())
    }
}

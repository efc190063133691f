use serde::{Deserialize, Serialize};
use sivs_core::diagnostics::ErrorReport;
use sivs_core::solvers::{IterRecord, Method, SolveResult};

use crate::config::RunConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MemberReport {
    pub label: String,
    pub method: Method,
    pub n: usize,
    pub h: f64,
    pub re: Option<f64>,
    pub nu: f64,
    pub gamma: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_increment: Option<f64>,
    pub wall_time_s: f64,
    pub records: Vec<IterRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub errors: Option<ErrorReport>,
    /// Fitted geometric ratio of the contraction monitor.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contraction_ratio: Option<f64>,
}

impl MemberReport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        label: String,
        n: usize,
        h: f64,
        re: Option<f64>,
        nu: f64,
        gamma: f64,
        result: &SolveResult,
        wall_time_s: f64,
    ) -> Self {
        Self {
            label,
            method: result.method,
            n,
            h,
            re,
            nu,
            gamma,
            iterations: result.iterations,
            converged: result.converged,
            final_increment: result.final_increment(),
            wall_time_s,
            records: result.records.clone(),
            errors: None,
            contraction_ratio: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    pub h: f64,
    pub errors: ErrorReport,
    /// Rates for `l2_u, h1_u, div_u, l2_p`; `None` on the first row.
    pub rates: [Option<f64>; 4],
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairDistance {
    pub first: Method,
    pub second: Method,
    pub velocity: f64,
    pub pressure: f64,
    /// Largest difference of the centerline samples.
    pub centerline: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Software {
    pub name: String,
    pub version: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub software: Software,
    pub config: RunConfig,
    pub members: Vec<MemberReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<RateRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distances: Option<Vec<PairDistance>>,
    pub all_converged: bool,
    pub wall_time_s: f64,
}

impl RunReport {
    pub fn new(config: RunConfig) -> Self {
        Self {
            software: Software { name: env!("CARGO_PKG_NAME").into(), version: env!("CARGO_PKG_VERSION").into() },
            config,
            members: Vec::new(),
            rates: None,
            distances: None,
            all_converged: true,
            wall_time_s: 0.0,
        }
    }

    pub fn push(&mut self, member: MemberReport) {
        self.all_converged &= member.converged;
        self.members.push(member);
    }
}

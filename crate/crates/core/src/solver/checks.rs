//! Post-hoc certificates for solver runs.

use super::{IterationRecord, RunResult, SolverError};
use crate::busemann::{busemann_value, BusemannDirection};
use crate::manifold::{dist, Point};

/// Slack below which a descent inequality counts as violated.
pub const DESCENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DescentReport {
    /// `d²(p_k,p*) − c² d²(p_k,q_k) − d²(p_{k+1},p*)` for each transition,
    /// with `c = (1−σ)/(1+σ)`.
    pub slacks: Vec<f64>,
    pub min_slack: f64,
}

impl DescentReport {
    pub fn passed(&self) -> bool {
        self.min_slack >= -DESCENT_TOL
    }
}

/// Descent slacks over iterates `ps` and inner points `qs`.
///
/// `ps` holds `p_0, p_1, …` and may be one longer than `qs`; a transition
/// `k → k+1` is checked whenever both `p_{k+1}` and `q_k` are known.
pub fn descent_slacks(ps: &[Point], qs: &[Point], sigma: f64, p_star: &Point) -> Result<Vec<f64>, SolverError> {
    let c = (1.0 - sigma) / (1.0 + sigma);
    let mut slacks = Vec::new();
    for k in 0..qs.len().min(ps.len().saturating_sub(1)) {
        let a = dist(&ps[k], p_star)?;
        let b = dist(&ps[k], &qs[k])?;
        let e = dist(&ps[k + 1], p_star)?;
        slacks.push(a * a - c * c * b * b - e * e);
    }
    Ok(slacks)
}

/// Descent certificate for a full run.
pub fn check_descent(run: &RunResult, sigma: f64, p_star: &Point) -> Result<DescentReport, SolverError> {
    let qs: Vec<Point> = run.history.iter().map(|r| r.q.clone()).collect();
    let slacks = descent_slacks(&run.iterates(), &qs, sigma, p_star)?;
    let min_slack = slacks.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(DescentReport { slacks, min_slack })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityRow {
    pub n: usize,
    pub min_dist: f64,
    pub dist_bound: f64,
    pub min_norm_v: f64,
    /// Only available when the proximal parameter is constant.
    pub norm_bound: Option<f64>,
}

impl ComplexityRow {
    pub fn passed(&self) -> bool {
        let slack = 1e-12;
        self.min_dist <= self.dist_bound + slack && self.norm_bound.is_none_or(|b| self.min_norm_v <= b + slack)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityReport {
    pub rows: Vec<ComplexityRow>,
}

impl ComplexityReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(ComplexityRow::passed)
    }
}

/// Checks `min_{k<N} d(p_k,q_k) ≤ ((1+σ)/(1−σ)) d(p_0,p*)/√N` for every
/// prefix, and with a constant `μ̄` also
/// `min_{k<N} ‖v_k‖ ≤ μ̄ ((1+σ)/(1−σ)) d(p_0,p*)/√N`.
pub fn check_complexity(
    history: &[IterationRecord],
    sigma: f64,
    p0: &Point,
    p_star: &Point,
    mu_bar: Option<f64>,
) -> Result<ComplexityReport, SolverError> {
    let factor = (1.0 + sigma) / (1.0 - sigma) * dist(p0, p_star)?;
    let mut rows = Vec::with_capacity(history.len());
    let mut min_dist = f64::INFINITY;
    let mut min_norm = f64::INFINITY;
    for (i, r) in history.iter().enumerate() {
        let n = i + 1;
        min_dist = min_dist.min(r.dist_pq);
        min_norm = min_norm.min(r.v.norm());
        let root = (n as f64).sqrt();
        rows.push(ComplexityRow {
            n,
            min_dist,
            dist_bound: factor / root,
            min_norm_v: min_norm,
            norm_bound: mu_bar.map(|m| m * factor / root),
        });
    }
    Ok(ComplexityReport { rows })
}

/// Smallest value of `B_{q_k,−v_k}(p_k) − ((1−σ)/(1+σ)) d(p_k,q_k)` over
/// records with `v_k ≠ 0`; nonnegative whenever the error test held.
pub fn check_separation(history: &[IterationRecord], sigma: f64) -> Result<f64, SolverError> {
    let c = (1.0 - sigma) / (1.0 + sigma);
    let mut worst = f64::INFINITY;
    for r in history.iter().filter(|r| r.v.norm() > 0.0) {
        let ray = BusemannDirection::from_tangent(r.v.scaled(-1.0));
        worst = worst.min(busemann_value(&ray, &r.p)? - c * r.dist_pq);
    }
    Ok(worst)
}

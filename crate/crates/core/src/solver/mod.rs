//! Hybrid projection-proximal point method driven by Busemann subgradients.
//!
//! Each outer step computes an approximate proximal triple `(q, v, ε)` with
//! `v ∈ ∂ᵇf(q)`, `v = μ log_q p − ε` and a relative error bound on `ε`, then
//! projects the current point onto the horosphere `{B_{q,−v} = 0}`.

mod bhppm;
mod checks;
mod inner;
mod prox;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::bsubdiff::OracleError;
use crate::busemann::BusemannError;
use crate::manifold::{GeometryError, Point, Tangent};

pub use bhppm::bhppm;
pub use checks::{
    check_complexity, check_descent, check_separation, descent_slacks, ComplexityReport, ComplexityRow, DescentReport,
    DESCENT_TOL,
};
pub use inner::{approx_triple, Triple};
pub use prox::{ppa_exact, prox_closed_form, prox_optimality_residual, ProxKind};

/// Absolute allowance added to the relative error test.
pub const ERROR_TEST_ABS: f64 = 1e-12;

/// Busemann values within this distance of zero count as already projected.
pub const PROJECTION_SLACK: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Busemann(#[from] BusemannError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("algorithm invariant violated: {0}")]
    Invariant(String),
}

/// Proximal parameters `μ_k`.
#[derive(Clone)]
pub enum MuSchedule {
    Constant(f64),
    /// Explicit values; the last one repeats.
    Sequence(Vec<f64>),
    /// `scale / √(k + 1)`.
    InverseSqrt {
        scale: f64,
    },
    /// `initial · ratio^k`.
    Geometric {
        initial: f64,
        ratio: f64,
    },
    Callback(Arc<dyn Fn(usize) -> f64 + Send + Sync>),
}

impl fmt::Debug for MuSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MuSchedule::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            MuSchedule::Sequence(s) => f.debug_tuple("Sequence").field(s).finish(),
            MuSchedule::InverseSqrt { scale } => f.debug_struct("InverseSqrt").field("scale", scale).finish(),
            MuSchedule::Geometric { initial, ratio } => {
                f.debug_struct("Geometric").field("initial", initial).field("ratio", ratio).finish()
            }
            MuSchedule::Callback(_) => f.write_str("Callback(..)"),
        }
    }
}

impl MuSchedule {
    pub fn at(&self, k: usize) -> Result<f64, SolverError> {
        let mu = match self {
            MuSchedule::Constant(c) => *c,
            MuSchedule::Sequence(s) => {
                *s.get(k).or(s.last()).ok_or_else(|| SolverError::Config("empty μ sequence".into()))?
            }
            MuSchedule::InverseSqrt { scale } => scale / ((k + 1) as f64).sqrt(),
            MuSchedule::Geometric { initial, ratio } => initial * ratio.powi(k as i32),
            MuSchedule::Callback(cb) => cb(k),
        };
        if !(mu.is_finite() && mu > 0.0) {
            return Err(SolverError::Config(format!("μ_{k} = {mu} is not a positive finite number")));
        }
        Ok(mu)
    }

    /// Checks the schedule and returns warnings about weak convergence guarantees.
    pub fn validate(&self) -> Result<Vec<String>, SolverError> {
        let mut warnings = Vec::new();
        match self {
            MuSchedule::Constant(_) | MuSchedule::InverseSqrt { .. } => {
                self.at(0)?;
            }
            MuSchedule::Sequence(s) => {
                for k in 0..s.len().max(1) {
                    self.at(k)?;
                }
            }
            MuSchedule::Geometric { ratio, .. } => {
                self.at(0)?;
                if !(*ratio > 0.0) {
                    return Err(SolverError::Config(format!("geometric ratio must be positive, got {ratio}")));
                }
                if *ratio > 1.0 {
                    warnings.push(format!(
                        "geometric growth of μ (ratio {ratio}) makes Σ μ_k⁻² finite; convergence of the iterates is not guaranteed"
                    ));
                }
            }
            MuSchedule::Callback(_) => {
                self.at(0)?;
            }
        }
        Ok(warnings)
    }

    /// An upper bound `μ̄ ≥ μ_k` for all `k`, when one is known.
    pub fn upper_bound(&self) -> Option<f64> {
        match self {
            MuSchedule::Constant(c) => Some(*c),
            MuSchedule::Sequence(s) => s.iter().copied().reduce(f64::max),
            MuSchedule::InverseSqrt { scale } => Some(*scale),
            MuSchedule::Geometric { initial, ratio } if *ratio <= 1.0 => Some(*initial),
            _ => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            MuSchedule::Constant(_) => true,
            MuSchedule::Sequence(s) => s.windows(2).all(|w| w[0] == w[1]),
            MuSchedule::Geometric { ratio, .. } => *ratio == 1.0,
            _ => false,
        }
    }
}

/// Step sizes of the inner subgradient loop.
#[derive(Debug, Clone, PartialEq)]
pub enum StepRule {
    Constant(f64),
    /// `α₀ / √(ℓ + 1)`; `α₀` defaults to `1/(1 + μ)`.
    InverseSqrt {
        alpha0: Option<f64>,
    },
    /// Backtracking from `1` by factor `beta` until sufficient decrease `c`.
    Armijo {
        beta: f64,
        c: f64,
    },
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::InverseSqrt { alpha0: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerConfig {
    pub t_max: usize,
    pub step_rule: StepRule,
    /// Try a Newton refinement on the local piecewise-smooth structure.
    pub polish: bool,
    /// First inner iteration at which refinement is attempted; later attempts
    /// happen at powers of two and at the last iteration.
    pub polish_from: usize,
}

impl Default for InnerConfig {
    fn default() -> Self {
        InnerConfig { t_max: 1000, step_rule: StepRule::default(), polish: true, polish_from: 16 }
    }
}

/// How the proximal triple is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum InnerMethod {
    Approximate(InnerConfig),
    ClosedForm(ProxKind),
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub sigma: f64,
    /// Accepted for compatibility with relaxed projection variants; the
    /// method always projects exactly onto the horosphere.
    pub rho: f64,
    pub mu: MuSchedule,
    pub max_outer_iters: usize,
    pub stop_tol: f64,
    pub inner: InnerMethod,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            sigma: 0.5,
            rho: 0.0,
            mu: MuSchedule::Constant(1.0),
            max_outer_iters: 200,
            stop_tol: 1e-8,
            inner: InnerMethod::Approximate(InnerConfig::default()),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<Vec<String>, SolverError> {
        if !(0.0..1.0).contains(&self.sigma) {
            return Err(SolverError::Config(format!("σ must lie in [0, 1), got {}", self.sigma)));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(SolverError::Config(format!("ρ must lie in [0, 1), got {}", self.rho)));
        }
        if !(self.stop_tol >= 0.0) {
            return Err(SolverError::Config(format!("stop tolerance must be nonnegative, got {}", self.stop_tol)));
        }
        if let InnerMethod::Approximate(ic) = &self.inner {
            if ic.t_max == 0 {
                return Err(SolverError::Config("inner iteration budget must be positive".into()));
            }
            match ic.step_rule {
                StepRule::Constant(a) if !(a > 0.0) => {
                    return Err(SolverError::Config(format!("step size must be positive, got {a}")))
                }
                StepRule::InverseSqrt { alpha0: Some(a) } if !(a > 0.0) => {
                    return Err(SolverError::Config(format!("initial step must be positive, got {a}")))
                }
                StepRule::Armijo { beta, c } if !(beta > 0.0 && beta < 1.0 && c > 0.0 && c < 1.0) => {
                    return Err(SolverError::Config(format!("Armijo needs β, c in (0, 1), got {beta}, {c}")))
                }
                _ => {}
            }
        }
        self.mu.validate()
    }
}

/// One outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub mu: f64,
    pub p: Point,
    pub q: Point,
    pub v: Tangent,
    pub eps: Tangent,
    pub f_q: f64,
    pub dist_pq: f64,
    /// `B_{q,−v}(p)`, the excess of `p` over the separating horosphere.
    pub busemann_residual: f64,
    pub inner_iters: usize,
    /// Whether the inner routine met the relative error test.
    pub inner_converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    Converged,
    MaxIters,
    InnerFailure,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub history: Vec<IterationRecord>,
    pub final_point: Point,
    pub terminal: Terminal,
    pub warnings: Vec<String>,
}

impl RunResult {
    /// The iterates `p_0, …, p_K`, including the point after the last
    /// projection when the run ended on the iteration limit.
    pub fn iterates(&self) -> Vec<Point> {
        let mut ps: Vec<Point> = self.history.iter().map(|r| r.p.clone()).collect();
        if self.terminal == Terminal::MaxIters {
            ps.push(self.final_point.clone());
        }
        ps
    }
}

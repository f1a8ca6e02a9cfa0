//! Closed-form proximal maps and the exact proximal point iteration.

use super::{IterationRecord, MuSchedule, RunResult, SolverError, Terminal};
use crate::bsubdiff::Construction;
use crate::busemann::{busemann_value, BusemannDirection};
use crate::manifold::{dist_unchecked, exp_unchecked, log_unchecked, GeometryError, Point, Tangent};

/// Objectives whose proximal map is known in closed form.
#[derive(Debug, Clone, PartialEq)]
pub enum ProxKind {
    /// `d(·, a)`.
    Distance { anchor: Point },
    /// `½ d²(·, a)`.
    HalfSquared { anchor: Point },
}

impl ProxKind {
    pub fn anchor(&self) -> &Point {
        match self {
            ProxKind::Distance { anchor } | ProxKind::HalfSquared { anchor } => anchor,
        }
    }

    /// Recognizes `d(·, a)` and `½ d²(·, a)`, up to an additive constant.
    pub fn from_construction(c: &Construction) -> Option<ProxKind> {
        match c {
            Construction::PowerDistance { anchor, scale, exponent, .. } => {
                if *scale == 1.0 && *exponent == 1.0 {
                    Some(ProxKind::Distance { anchor: anchor.clone() })
                } else if *scale == 0.5 && *exponent == 2.0 {
                    Some(ProxKind::HalfSquared { anchor: anchor.clone() })
                } else {
                    None
                }
            }
            _ => None,
        }
    }

    pub fn value(&self, x: &Point) -> f64 {
        let d = dist_unchecked(x, self.anchor());
        match self {
            ProxKind::Distance { .. } => d,
            ProxKind::HalfSquared { .. } => 0.5 * d * d,
        }
    }
}

fn check(kind: &ProxKind, p: &Point, mu: f64) -> Result<(), SolverError> {
    if kind.anchor().space() != p.space() {
        return Err(GeometryError::SpaceMismatch(kind.anchor().space(), p.space()).into());
    }
    if !(mu.is_finite() && mu > 0.0) {
        return Err(SolverError::Config(format!("μ must be positive and finite, got {mu}")));
    }
    Ok(())
}

/// `argmin_x f(x) + (μ/2) d²(x, p)`; the minimizer lies on the geodesic from
/// `p` toward the anchor.
pub fn prox_closed_form(kind: &ProxKind, p: &Point, mu: f64) -> Result<Point, SolverError> {
    check(kind, p, mu)?;
    let a = kind.anchor();
    let d = dist_unchecked(p, a);
    if d == 0.0 {
        return Ok(p.clone());
    }
    let t = match kind {
        ProxKind::Distance { .. } => (1.0 / mu).min(d),
        ProxKind::HalfSquared { .. } => d / (1.0 + mu),
    };
    if t >= d {
        return Ok(a.clone());
    }
    Ok(exp_unchecked(&log_unchecked(p, a).scaled(t / d)))
}

/// Violation of `μ log_x p ∈ ∂f(x)`, zero at the exact proximal point.
pub fn prox_optimality_residual(kind: &ProxKind, p: &Point, mu: f64, x: &Point) -> Result<f64, SolverError> {
    check(kind, p, mu)?;
    let a = kind.anchor();
    let lhs = log_unchecked(x, p).scaled(mu);
    let d = dist_unchecked(x, a);
    Ok(match kind {
        ProxKind::Distance { .. } if d == 0.0 => (lhs.norm() - 1.0).max(0.0),
        ProxKind::Distance { .. } => lhs.add(&log_unchecked(x, a).scaled(1.0 / d))?.norm(),
        ProxKind::HalfSquared { .. } => lhs.add(&log_unchecked(x, a))?.norm(),
    })
}

/// Exact proximal point iteration `p_{k+1} = prox_{f/μ_k}(p_k)`.
///
/// Records carry `q_k = p_{k+1}`, `v_k = μ_k log_{q_k} p_k` and `ε_k = 0`. The
/// run stops once `‖v_k‖` or the step length drops to `stop_tol`, the same
/// test [`super::bhppm`] applies.
pub fn ppa_exact(
    kind: &ProxKind,
    p0: &Point,
    mu: &MuSchedule,
    max_iters: usize,
    stop_tol: f64,
) -> Result<RunResult, SolverError> {
    let warnings = mu.validate()?;
    let mut p = p0.clone();
    let mut history = Vec::new();
    for k in 0..max_iters {
        let mu_k = mu.at(k)?;
        let q = prox_closed_form(kind, &p, mu_k)?;
        let d = dist_unchecked(&p, &q);
        let v = log_unchecked(&q, &p).scaled(mu_k);
        let stop = v.norm() <= stop_tol || d <= stop_tol;
        let excess = busemann_value(&BusemannDirection::from_tangent(v.scaled(-1.0)), &p)?;
        history.push(IterationRecord {
            k,
            mu: mu_k,
            p: p.clone(),
            q: q.clone(),
            v,
            eps: Tangent::zero(&q),
            f_q: kind.value(&q),
            dist_pq: d,
            busemann_residual: excess,
            inner_iters: 0,
            inner_converged: true,
        });
        if stop {
            return Ok(RunResult { history, final_point: q, terminal: Terminal::Converged, warnings });
        }
        p = q;
    }
    Ok(RunResult { history, final_point: p, terminal: Terminal::MaxIters, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::Space;
    use approx::assert_abs_diff_eq;

    #[test]
    fn distance_prox_step_length() {
        let s = Space::hyperboloid(2, 1.0).unwrap();
        let a = s.origin();
        let p = s.lift(&[2f64.sinh(), 0.0]).unwrap();
        let kind = ProxKind::Distance { anchor: a.clone() };
        let x = prox_closed_form(&kind, &p, 2.0).unwrap();
        assert_abs_diff_eq!(dist_unchecked(&x, &a), 1.5, epsilon = 1e-13);
        assert!(prox_optimality_residual(&kind, &p, 2.0, &x).unwrap() < 1e-12);
        assert_eq!(prox_closed_form(&kind, &p, 0.25).unwrap(), a);
    }

    #[test]
    fn half_squared_prox_step_length() {
        let s = Space::euclidean(2).unwrap();
        let a = s.origin();
        let p = s.point(&[3.0, 0.0]).unwrap();
        let kind = ProxKind::HalfSquared { anchor: a };
        let x = prox_closed_form(&kind, &p, 2.0).unwrap();
        assert_abs_diff_eq!(x.coords()[0], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn ppa_reaches_anchor_in_ten_steps() {
        let s = Space::euclidean(3).unwrap();
        let a = s.origin();
        let p0 = s.point(&[10.0, 0.0, 0.0]).unwrap();
        let run =
            ppa_exact(&ProxKind::Distance { anchor: a.clone() }, &p0, &MuSchedule::Constant(1.0), 50, 0.0).unwrap();
        assert_eq!(run.terminal, Terminal::Converged);
        assert_eq!(run.history.len(), 11);
        assert_eq!(run.history[9].q, a);
        assert_eq!(run.final_point, a);
    }
}

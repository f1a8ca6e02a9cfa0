use super::{
    approx_triple, prox_closed_form, InnerMethod, IterationRecord, RunResult, SolverConfig, SolverError, Terminal,
    Triple, PROJECTION_SLACK,
};
use crate::bsubdiff::ObjectiveOracle;
use crate::busemann::{busemann_value, horosphere_project, BusemannDirection, Horosphere};
use crate::manifold::{dist_unchecked, log_unchecked, GeometryError, Point, Tangent};

/// Runs the hybrid projection-proximal point method from `p0`.
///
/// Stops when `‖v_k‖` or `d(p_k, q_k)` drops to `stop_tol` (returning `q_k`),
/// after `max_outer_iters` iterations, or when the inner routine exhausts its
/// budget without meeting the error test.
pub fn bhppm(f: &dyn ObjectiveOracle, p0: &Point, config: &SolverConfig) -> Result<RunResult, SolverError> {
    let warnings = config.validate()?;
    for w in &warnings {
        log::warn!("{w}");
    }
    if f.space() != p0.space() {
        return Err(GeometryError::SpaceMismatch(f.space(), p0.space()).into());
    }
    let mut p = p0.clone();
    let mut history = Vec::new();
    for k in 0..config.max_outer_iters {
        let mu = config.mu.at(k)?;
        let triple = match &config.inner {
            InnerMethod::Approximate(ic) => approx_triple(f, &p, mu, config.sigma, ic)?,
            InnerMethod::ClosedForm(kind) => {
                let q = prox_closed_form(kind, &p, mu)?;
                let v = log_unchecked(&q, &p).scaled(mu);
                Triple { eps: Tangent::zero(&q), q, v, inner_iters: 0, met: true }
            }
        };
        let dist_pq = dist_unchecked(&p, &triple.q);
        let ray = BusemannDirection::from_tangent(triple.v.scaled(-1.0));
        let excess = busemann_value(&ray, &p)?;
        let record = IterationRecord {
            k,
            mu,
            p: p.clone(),
            q: triple.q.clone(),
            v: triple.v.clone(),
            eps: triple.eps.clone(),
            f_q: f.value(&triple.q)?,
            dist_pq,
            busemann_residual: excess,
            inner_iters: triple.inner_iters,
            inner_converged: triple.met,
        };
        if !triple.met {
            log::warn!("inner routine exhausted its budget at outer iteration {k}");
            history.push(record);
            return Ok(RunResult { history, final_point: p, terminal: Terminal::InnerFailure, warnings });
        }
        if triple.v.norm() <= config.stop_tol || dist_pq <= config.stop_tol {
            history.push(record);
            return Ok(RunResult { history, final_point: triple.q, terminal: Terminal::Converged, warnings });
        }
        let next = if excess < -PROJECTION_SLACK {
            return Err(SolverError::Invariant(format!(
                "iterate lies inside the horoball B_(q,-v) ≤ 0 (B = {excess:.3e}) at iteration {k}"
            )));
        } else if excess <= PROJECTION_SLACK {
            p.clone()
        } else {
            horosphere_project(&p, &Horosphere::new(ray, 0.0)?)?
        };
        history.push(record);
        p = next;
    }
    Ok(RunResult { history, final_point: p, terminal: Terminal::MaxIters, warnings })
}

//! Approximate proximal triples.
//!
//! A Riemannian subgradient loop on `z ↦ f(z) + (μ/2) d²(z, p)` started at
//! `p`, stopped by the relative error test. Near kinks of max-type objectives
//! plain subgradient steps rarely meet a tight test, so the loop periodically
//! tries a Newton refinement of the optimality system on a guessed active set.

use nalgebra::{DMatrix, DVector};

use super::{InnerConfig, SolverError, StepRule, ERROR_TEST_ABS};
use crate::bsubdiff::{Objective, ObjectiveOracle};
use crate::manifold::{dist_unchecked, exp_unchecked, log_unchecked, transport_unchecked, Point, Tangent};

/// An approximate proximal triple `(q, v, ε)` at `p` with parameter `μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Triple {
    pub q: Point,
    pub v: Tangent,
    pub eps: Tangent,
    pub inner_iters: usize,
    /// Whether `‖ε‖ ≤ σ max{μ d(q,p), ‖v‖}` holds. When false the triple is
    /// the iterate with the smallest error ratio seen.
    pub met: bool,
}

struct Candidate {
    z: Point,
    g: Tangent,
    r: Tangent,
    ratio: f64,
    met: bool,
}

fn evaluate(f: &dyn ObjectiveOracle, p: &Point, mu: f64, sigma: f64, z: Point) -> Result<Candidate, SolverError> {
    let target = log_unchecked(&z, p).scaled(mu);
    let g = f.nearest_b_subgradient(&z, &target)?;
    let r = target.sub(&g)?;
    let scale = (mu * dist_unchecked(&z, p)).max(g.norm());
    let nr = r.norm();
    let met = nr <= sigma * scale + ERROR_TEST_ABS;
    let ratio = if scale > 0.0 {
        nr / scale
    } else if nr == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(Candidate { z, g, r, ratio, met })
}

fn into_triple(c: Candidate, inner_iters: usize) -> Triple {
    Triple { q: c.z, v: c.g, eps: c.r, inner_iters, met: c.met }
}

/// Runs the inner loop at `p` and returns the first triple passing the test.
pub fn approx_triple(
    f: &dyn ObjectiveOracle,
    p: &Point,
    mu: f64,
    sigma: f64,
    config: &InnerConfig,
) -> Result<Triple, SolverError> {
    let mut z = p.clone();
    let mut best: Option<Candidate> = None;
    for l in 0..config.t_max {
        let cand = evaluate(f, p, mu, sigma, z.clone())?;
        if cand.met {
            return Ok(into_triple(cand, l));
        }
        let refine_now =
            config.polish && ((l + 1 >= config.polish_from && (l + 1).is_power_of_two()) || l + 1 == config.t_max);
        if refine_now {
            if let Some(x) = refine(f, p, mu, &z)? {
                let c = evaluate(f, p, mu, sigma, x)?;
                if c.met {
                    return Ok(into_triple(c, l + 1));
                }
                keep_best(&mut best, c);
            }
        }
        let step_dir = cand.r.clone();
        let alpha = step_size(f, p, mu, &z, &step_dir, l, &config.step_rule)?;
        keep_best(&mut best, cand);
        z = exp_unchecked(&step_dir.scaled(alpha));
    }
    let best = best.expect("at least one inner iteration ran");
    Ok(into_triple(best, config.t_max))
}

fn keep_best(best: &mut Option<Candidate>, c: Candidate) {
    if best.as_ref().is_none_or(|b| c.ratio < b.ratio) {
        *best = Some(c);
    }
}

fn subproblem(f: &dyn ObjectiveOracle, p: &Point, mu: f64, z: &Point) -> Result<f64, SolverError> {
    let d = dist_unchecked(z, p);
    Ok(f.value(z)? + 0.5 * mu * d * d)
}

/// Step length along `dir`, the negated subproblem subgradient.
fn step_size(
    f: &dyn ObjectiveOracle,
    p: &Point,
    mu: f64,
    z: &Point,
    dir: &Tangent,
    l: usize,
    rule: &StepRule,
) -> Result<f64, SolverError> {
    Ok(match *rule {
        StepRule::Constant(a) => a,
        StepRule::InverseSqrt { alpha0 } => alpha0.unwrap_or(1.0 / (1.0 + mu)) / ((l + 1) as f64).sqrt(),
        StepRule::Armijo { beta, c } => {
            let phi0 = subproblem(f, p, mu, z)?;
            let nd2 = dir.dot(dir);
            let mut alpha = 1.0;
            for _ in 0..60 {
                let trial = exp_unchecked(&dir.scaled(alpha));
                if subproblem(f, p, mu, &trial)? <= phi0 - c * alpha * nd2 {
                    break;
                }
                alpha *= beta;
            }
            alpha
        }
    })
}

/// Newton refinement of the optimality system
/// `μ log_x p = Σ λ_i ∇g_i(x)`, `g_i(x)` equal on the active set, `Σ λ_i = 1`,
/// over several guesses of the active set. A set whose solution has a negative
/// multiplier is retried without that piece. Returns the candidate point with the
/// smallest error ratio under the full oracle.
fn refine(f: &dyn ObjectiveOracle, p: &Point, mu: f64, z: &Point) -> Result<Option<Point>, SolverError> {
    let own: Vec<&dyn ObjectiveOracle> = vec![f];
    let pieces: Vec<&dyn ObjectiveOracle> = match f.pieces() {
        Some(ps) => ps.iter().map(|o: &Objective| o.as_ref()).collect(),
        None => own,
    };
    let n = z.space().dim();
    let values = pieces.iter().map(|g| g.value(z)).collect::<Result<Vec<_>, _>>()?;
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sets: Vec<Vec<usize>> = Vec::new();
    for delta in [1e-9, 1e-6, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, f64::INFINITY] {
        let set: Vec<usize> = (0..pieces.len()).filter(|&i| values[i] >= top - delta * (1.0 + top.abs())).collect();
        if set.len() <= n + 1 && !sets.contains(&set) {
            sets.push(set);
        }
    }
    let mut best: Option<(f64, Point)> = None;
    let mut tried: Vec<Vec<usize>> = Vec::new();
    while !sets.is_empty() {
        let set = sets.remove(0);
        tried.push(set.clone());
        let active: Vec<&dyn ObjectiveOracle> = set.iter().map(|&i| pieces[i]).collect();
        let Some((x, lambda)) = newton_kkt(&active, p, mu, z) else { continue };
        let (worst, &lmin) =
            lambda.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("active sets are non-empty");
        if lmin < -1e-9 {
            // the piece with the most negative multiplier leaves the active set
            if set.len() > 1 {
                let mut smaller = set.clone();
                smaller.remove(worst);
                if !tried.contains(&smaller) && !sets.contains(&smaller) {
                    sets.push(smaller);
                }
            }
            continue;
        }
        let c = evaluate(f, p, mu, 0.0, x)?;
        if best.as_ref().is_none_or(|(r, _)| c.ratio < *r) {
            best = Some((c.ratio, c.z));
        }
    }
    Ok(best.map(|(_, x)| x))
}

struct KktSystem<'a> {
    active: &'a [&'a dyn ObjectiveOracle],
    p: &'a Point,
    mu: f64,
    z: &'a Point,
    basis: Vec<Tangent>,
}

impl KktSystem<'_> {
    fn point(&self, w: &[f64]) -> Point {
        let v = self.z.space().from_basis(self.z, &self.basis, w);
        exp_unchecked(&v)
    }

    /// Residual and the transported basis at `x(w)`; `None` if an oracle fails.
    fn residual(&self, w: &[f64], lambda: &[f64]) -> Option<(DVector<f64>, Vec<Tangent>)> {
        let n = w.len();
        let m = lambda.len();
        let x = self.point(w);
        let frame: Vec<Tangent> = self.basis.iter().map(|e| transport_unchecked(self.z, &x, e)).collect();
        let mut field = log_unchecked(&x, self.p).scaled(self.mu);
        let mut vals = Vec::with_capacity(m);
        for (g, l) in self.active.iter().zip(lambda) {
            let s = g.b_subgradient(&x).ok()?;
            field = field.sub(&s.scaled(*l)).ok()?;
            vals.push(g.value(&x).ok()?);
        }
        let mut out = DVector::zeros(n + m);
        for (j, e) in frame.iter().enumerate() {
            out[j] = field.dot(e);
        }
        for i in 1..m {
            out[n + i - 1] = vals[i] - vals[0];
        }
        out[n + m - 1] = lambda.iter().sum::<f64>() - 1.0;
        Some((out, frame))
    }

    fn lambda_columns(&self, w: &[f64], frame: &[Tangent]) -> Option<Vec<DVector<f64>>> {
        let x = self.point(w);
        let n = w.len();
        self.active
            .iter()
            .map(|g| {
                let s = g.b_subgradient(&x).ok()?;
                let mut col = DVector::zeros(n + self.active.len());
                for (j, e) in frame.iter().enumerate() {
                    col[j] = -s.dot(e);
                }
                col[n + self.active.len() - 1] = 1.0;
                Some(col)
            })
            .collect()
    }
}

/// Solves the system on one active set; returns the point and its multipliers.
fn newton_kkt(active: &[&dyn ObjectiveOracle], p: &Point, mu: f64, z: &Point) -> Option<(Point, Vec<f64>)> {
    let space = z.space();
    let n = space.dim();
    let m = active.len();
    let sys = KktSystem { active, p, mu, z, basis: space.tangent_basis(z) };
    let mut w = vec![0.0; n];
    let mut lambda = vec![1.0 / m as f64; m];
    let (mut f0, mut frame) = sys.residual(&w, &lambda)?;
    let mut norm0 = f0.norm();
    for _ in 0..40 {
        if norm0 < 1e-15 {
            break;
        }
        let mut jac = DMatrix::zeros(n + m, n + m);
        let h = 1e-7;
        for j in 0..n {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[j] += h;
            wm[j] -= h;
            let (fp, _) = sys.residual(&wp, &lambda)?;
            let (fm, _) = sys.residual(&wm, &lambda)?;
            jac.set_column(j, &((fp - fm) / (2.0 * h)));
        }
        for (i, col) in sys.lambda_columns(&w, &frame)?.into_iter().enumerate() {
            jac.set_column(n + i, &col);
        }
        let rhs = -&f0;
        let step = jac
            .clone()
            .lu()
            .solve(&rhs)
            .filter(|s| s.iter().all(|x| x.is_finite()))
            .or_else(|| jac.svd(true, true).solve(&rhs, 1e-14).ok())?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let wt: Vec<f64> = (0..n).map(|j| w[j] + t * step[j]).collect();
            let lt: Vec<f64> = (0..m).map(|i| lambda[i] + t * step[n + i]).collect();
            if let Some((ft, frt)) = sys.residual(&wt, &lt) {
                let nt = ft.norm();
                if nt < norm0 {
                    w = wt;
                    lambda = lt;
                    f0 = ft;
                    frame = frt;
                    norm0 = nt;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if !norm0.is_finite() {
        return None;
    }
    Some((sys.point(&w), lambda))
}

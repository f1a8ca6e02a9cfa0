//! Property suites behind `bhppm check`.
//!
//! Every suite is seeded, returns one [`Check`] per property and never
//! panics on a failed property; failures carry the worst input and gap.

use std::f64::consts::PI;
use std::time::Instant;

use horoprox::bsubdiff::{
    aligned_aggregate, busemann_objective, counterexample, distance_objective, half_squared_distance, max_objective,
    max_of_distances, max_of_squared_distances, power_distance, scalar_chain, uncertified_sum, verify_b_subgradient,
    verify_classical_subgradient, weighted_cover, Aggregator, AlignedFamily, Objective, SampleSpec, Scalar, Verdict,
};
use horoprox::busemann::{
    busemann_gradient, busemann_limit, busemann_value, horosphere_project, sample_horosphere, BusemannDirection,
    Horosphere,
};
use horoprox::manifold::{
    comparison_gap, dist, exp_map, geodesic_point, inner, log_map, parallel_transport, Point, Space, Tangent,
};
use horoprox::solver::{
    bhppm, check_complexity, check_descent, check_separation, ppa_exact, InnerMethod, MuSchedule, ProxKind, RunResult,
    SolverConfig, Terminal,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Outcome of one property.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Check {
        Check { name: name.to_string(), passed, detail: detail.into() }
    }

    /// A check whose measured error must stay within `tol`.
    fn within(name: &str, worst: Worst, tol: f64) -> Check {
        let passed = worst.value <= tol;
        Check::new(name, passed, format!("max error {:.3e} (tol {tol:.0e}){}", worst.value, worst.context(passed)))
    }

    /// A check whose measured slack must stay at or above `-tol`.
    fn above(name: &str, worst: Worst, tol: f64) -> Check {
        let passed = worst.value >= -tol;
        Check::new(name, passed, format!("min slack {:.3e} (tol {tol:.0e}){}", worst.value, worst.context(passed)))
    }
}

/// Worst case seen so far with a description of where it happened.
#[derive(Debug, Clone)]
struct Worst {
    value: f64,
    at: String,
}

impl Worst {
    fn max() -> Worst {
        Worst { value: f64::NEG_INFINITY, at: String::new() }
    }

    fn min() -> Worst {
        Worst { value: f64::INFINITY, at: String::new() }
    }

    fn bump_max(&mut self, value: f64, at: impl FnOnce() -> String) {
        if value > self.value || value.is_nan() {
            self.value = if value.is_nan() { f64::INFINITY } else { value };
            self.at = at();
        }
    }

    fn bump_min(&mut self, value: f64, at: impl FnOnce() -> String) {
        if value < self.value || value.is_nan() {
            self.value = if value.is_nan() { f64::NEG_INFINITY } else { value };
            self.at = at();
        }
    }

    fn merge_max(self, other: Worst) -> Worst {
        if other.value > self.value {
            other
        } else {
            self
        }
    }

    fn merge_min(self, other: Worst) -> Worst {
        if other.value < self.value {
            other
        } else {
            self
        }
    }

    fn context(&self, passed: bool) -> String {
        if passed || self.at.is_empty() {
            String::new()
        } else {
            format!("; worst at {}", self.at)
        }
    }
}

/// Suites accepted by `bhppm check`.
pub const SUITES: [&str; 5] = ["geometry", "busemann", "subdiff", "solver", "counterexamples"];

/// Runs a named suite, or every suite for `"all"`. Returns `None` for an
/// unknown name.
pub fn run_suite(name: &str, seed: u64) -> Option<Vec<Check>> {
    Some(match name {
        "geometry" => geometry(seed),
        "busemann" => {
            let mut out = busemann_functions(seed);
            out.extend(projection(seed));
            out
        }
        "subdiff" => subdiff(seed),
        "counterexamples" => counterexamples(seed),
        "solver" => {
            let mut out = solver_descent(seed);
            out.extend(solver_complexity(seed));
            out.extend(exact_reduction(seed));
            out.extend(symmetry(seed));
            out.extend(reproducibility(seed));
            out
        }
        "all" => SUITES.iter().flat_map(|s| run_suite(s, seed).unwrap()).collect(),
        _ => return None,
    })
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn fmt_point(p: &Point) -> String {
    let c: Vec<String> = p.to_vec().iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", c.join(", "))
}

fn h(dim: usize, kappa: f64) -> Space {
    Space::hyperboloid(dim, kappa).expect("valid test space")
}

fn r(dim: usize) -> Space {
    Space::euclidean(dim).expect("valid test space")
}

/// Riemannian radius `r/√κ`, so every space is sampled at the same scale
/// relative to its curvature. Far from the origin the ambient coordinates grow
/// like `e^{√κ d}` and rounding in the Lorentz form grows with their square.
fn scaled(s: Space, r: f64) -> f64 {
    s.kappa().map_or(r, |k| r / k.sqrt())
}

fn test_spaces() -> Vec<Space> {
    vec![h(2, 0.5), h(2, 1.0), h(2, 4.0), h(5, 1.0), r(3)]
}

fn name_of(s: Space) -> String {
    match s {
        Space::Euclidean { dim } => format!("R^{dim}"),
        Space::Hyperboloid { dim, kappa } => format!("H^{dim}(κ={kappa})"),
    }
}

/// Lorentz residual `|⟨p,p⟩ + 1/κ|` relative to `1/κ + ‖p‖²`, the size of
/// the terms that cancel in it.
fn constraint_residual(p: &Point) -> f64 {
    match p.space() {
        Space::Euclidean { .. } => 0.0,
        Space::Hyperboloid { kappa, .. } => {
            let c = p.coords();
            (p.space().ambient_inner(c, c) + 1.0 / kappa).abs() / (1.0 / kappa + c.norm_squared())
        }
    }
}

fn tangent_residual(v: &Tangent) -> f64 {
    let p = v.base();
    match p.space() {
        Space::Euclidean { .. } => 0.0,
        Space::Hyperboloid { .. } => {
            let scale = p.coords().norm() * v.comps().norm();
            if scale == 0.0 {
                0.0
            } else {
                p.space().ambient_inner(p.coords(), v.comps()).abs() / scale
            }
        }
    }
}

// ---------------------------------------------------------------- geometry

pub fn geometry(seed: u64) -> Vec<Check> {
    let start = Instant::now();
    let spaces = test_spaces();
    let per_space = 2_000;

    let (round, constraint, iso, cosines) = spaces
        .par_iter()
        .enumerate()
        .map(|(i, &s)| {
            let mut rng = rng_for(seed, 10 + i as u64);
            let o = s.origin();
            let mut round = Worst::max();
            let mut constraint = Worst::max();
            let mut iso = Worst::max();
            let mut cosines = Worst::max();
            for _ in 0..per_space {
                let p = s.random_point(&mut rng, &o, scaled(s, 2.0));
                let v = s.random_tangent(&mut rng, &p, 10.0);
                let q = exp_map(&p, &v).unwrap();
                let back = log_map(&p, &q).unwrap();
                let err = (dist(&p, &q).unwrap() - v.norm()).abs().max(back.sub(&v).unwrap().norm());
                round.bump_max(err, || format!("{} p={} ‖v‖={:.3}", name_of(s), fmt_point(&p), v.norm()));

                let mid = geodesic_point(&p, &q, rng.random::<f64>()).unwrap();
                let rel = [&p, &q, &mid].iter().map(|x| constraint_residual(x)).fold(0.0, f64::max);
                let trel = tangent_residual(&back);
                constraint.bump_max(rel.max(trel), || format!("{} near {}", name_of(s), fmt_point(&q)));

                let z = s.random_point(&mut rng, &o, scaled(s, 2.0));
                let u = s.random_tangent(&mut rng, &p, 2.0);
                let w = s.random_tangent(&mut rng, &p, 2.0);
                let pu = parallel_transport(&p, &z, &u).unwrap();
                let pw = parallel_transport(&p, &z, &w).unwrap();
                let gap = (inner(&p, &u, &w).unwrap() - inner(&z, &pu, &pw).unwrap()).abs();
                let tr = tangent_residual(&pu).max(constraint_residual(&z));
                constraint.bump_max(tr, || format!("{} transport to {}", name_of(s), fmt_point(&z)));
                iso.bump_max(gap, || format!("{} p={} z={}", name_of(s), fmt_point(&p), fmt_point(&z)));

                if let Some(kappa) = s.kappa() {
                    let y = s.random_point(&mut rng, &o, scaled(s, 2.0));
                    let sk = kappa.sqrt();
                    let (dxy, dxz, dyz) = (dist(&p, &y).unwrap(), dist(&p, &z).unwrap(), dist(&y, &z).unwrap());
                    if dxy > 1e-6 && dxz > 1e-6 {
                        let cos =
                            inner(&p, &log_map(&p, &y).unwrap(), &log_map(&p, &z).unwrap()).unwrap() / (dxy * dxz);
                        let rhs = (sk * dxy).cosh() * (sk * dxz).cosh() - (sk * dxy).sinh() * (sk * dxz).sinh() * cos;
                        let lhs = (sk * dyz).cosh();
                        cosines.bump_max((lhs - rhs).abs() / lhs, || {
                            format!("{} x={} y={} z={}", name_of(s), fmt_point(&p), fmt_point(&y), fmt_point(&z))
                        });
                    }
                }
            }
            (round, constraint, iso, cosines)
        })
        .reduce(
            || (Worst::max(), Worst::max(), Worst::max(), Worst::max()),
            |a, b| (a.0.merge_max(b.0), a.1.merge_max(b.1), a.2.merge_max(b.2), a.3.merge_max(b.3)),
        );

    let triples = 10_000;
    let gap_h = (0..triples)
        .into_par_iter()
        .fold(Worst::min, |mut w, i| {
            let mut rng = rng_for(seed, 1_000_000 + i as u64);
            let s = [h(2, 1.0), h(3, 0.5), h(2, 4.0)][i % 3];
            let o = s.origin();
            let (x, y, z) = (
                s.random_point(&mut rng, &o, scaled(s, 2.5)),
                s.random_point(&mut rng, &o, scaled(s, 2.5)),
                s.random_point(&mut rng, &o, scaled(s, 2.5)),
            );
            let g = comparison_gap(&x, &y, &z).unwrap();
            w.bump_min(g, || format!("{} x={} y={} z={}", name_of(s), fmt_point(&x), fmt_point(&y), fmt_point(&z)));
            w
        })
        .reduce(Worst::min, Worst::merge_min);
    let gap_r = (0..triples)
        .into_par_iter()
        .fold(Worst::max, |mut w, i| {
            let mut rng = rng_for(seed, 2_000_000 + i as u64);
            let s = r(1 + i % 4);
            let o = s.origin();
            let (x, y, z) = (
                s.random_point(&mut rng, &o, 5.0),
                s.random_point(&mut rng, &o, 5.0),
                s.random_point(&mut rng, &o, 5.0),
            );
            let g = comparison_gap(&x, &y, &z).unwrap().abs();
            w.bump_max(g, || format!("{} x={} y={} z={}", name_of(s), fmt_point(&x), fmt_point(&y), fmt_point(&z)));
            w
        })
        .reduce(Worst::max, Worst::merge_max);

    let elapsed = start.elapsed().as_secs_f64();
    vec![
        Check::within("geometry: exp/log round trip", round, 1e-8),
        Check::within("geometry: Lorentz constraint (relative)", constraint, 1e-12),
        Check::within("geometry: transport isometry", iso, 1e-9),
        Check::within("geometry: hyperbolic law of cosines (relative)", cosines, 1e-8),
        Check::above("geometry: comparison gap on hyperboloid", gap_h, 1e-9),
        Check::within("geometry: comparison gap vanishes on Euclidean", gap_r, 1e-9),
        Check::new("geometry: runtime", elapsed < 10.0, format!("{elapsed:.2} s (limit 10 s)")),
    ]
}

// ---------------------------------------------------------------- busemann

fn random_direction(rng: &mut ChaCha8Rng, s: Space, radius: f64, length: (f64, f64)) -> BusemannDirection {
    let q = s.random_point(rng, &s.origin(), scaled(s, radius));
    let u = s.random_unit_tangent(rng, &q);
    BusemannDirection::from_tangent(u.scaled(rng.random_range(length.0..length.1)))
}

fn describe(b: &BusemannDirection, p: &Point) -> String {
    format!(
        "{} q={} v={:?} p={}",
        name_of(b.space()),
        fmt_point(b.base()),
        b.dir().to_vec().iter().map(|x| (x * 1e6).round() / 1e6).collect::<Vec<_>>(),
        fmt_point(p)
    )
}

pub fn busemann_functions(seed: u64) -> Vec<Check> {
    let spaces = test_spaces();
    let mut checks = Vec::new();

    // closed form against the truncated limit
    let mut lim_h = Worst::max();
    let mut lim_r = Worst::max();
    for (i, &s) in spaces.iter().enumerate() {
        let mut rng = rng_for(seed, 100 + i as u64);
        for _ in 0..500 {
            let b = random_direction(&mut rng, s, 1.5, (1.0, 1.0 + 1e-12));
            let p = s.random_point(&mut rng, b.base(), scaled(s, 2.5));
            let exact = busemann_value(&b, &p).unwrap();
            match s {
                Space::Hyperboloid { .. } => {
                    let err = (busemann_limit(&b, &p, 50.0).unwrap() - exact).abs();
                    lim_h.bump_max(err, || describe(&b, &p));
                }
                Space::Euclidean { .. } => {
                    let err = (busemann_limit(&b, &p, 1e8).unwrap() - exact).abs();
                    lim_r.bump_max(err, || describe(&b, &p));
                }
            }
        }
    }
    checks.push(Check::within("busemann: closed form vs limit at t=50 (hyperboloid)", lim_h, 1e-8));
    checks.push(Check::within("busemann: closed form vs limit at t=1e8 (Euclidean)", lim_r, 1e-6));

    let stats = spaces
        .par_iter()
        .enumerate()
        .map(|(i, &s)| busemann_stats(seed, i as u64, s))
        .reduce(BusemannStats::default, BusemannStats::merge);
    checks.push(Check::within("busemann: unit gradient", stats.grad_norm, 1e-9));
    checks.push(Check::above("busemann: 1-Lipschitz", stats.lipschitz, 1e-12));
    checks.push(Check::within("busemann: linear along its ray", stats.ray, 1e-8));
    checks.push(Check::within("busemann: invariant under scaling v", stats.scale, 1e-12));
    checks.push(Check::above("busemann: support inequality", stats.support, 1e-10));
    checks.push(Check::within("busemann: support equality on Euclidean", stats.support_flat, 1e-10));
    checks.push(Check::within("busemann: gradient vs central differences (relative)", stats.fd, 1e-6));
    checks.push(Check::within("busemann: linear along gradient flow", stats.flow, 1e-8));
    checks.push(Check::within("busemann: continuity in (q,v) at δ=1e-6", stats.continuity, 1e-4));
    checks.push(Check::within("busemann: v=0 gives the distance", stats.zero_dir, 1e-12));
    checks
}

#[derive(Debug, Clone)]
struct BusemannStats {
    grad_norm: Worst,
    lipschitz: Worst,
    ray: Worst,
    scale: Worst,
    support: Worst,
    support_flat: Worst,
    fd: Worst,
    flow: Worst,
    continuity: Worst,
    zero_dir: Worst,
}

impl Default for BusemannStats {
    fn default() -> Self {
        BusemannStats {
            grad_norm: Worst::max(),
            lipschitz: Worst::min(),
            ray: Worst::max(),
            scale: Worst::max(),
            support: Worst::min(),
            support_flat: Worst::max(),
            fd: Worst::max(),
            flow: Worst::max(),
            continuity: Worst::max(),
            zero_dir: Worst::max(),
        }
    }
}

impl BusemannStats {
    fn merge(self, o: BusemannStats) -> BusemannStats {
        BusemannStats {
            grad_norm: self.grad_norm.merge_max(o.grad_norm),
            lipschitz: self.lipschitz.merge_min(o.lipschitz),
            ray: self.ray.merge_max(o.ray),
            scale: self.scale.merge_max(o.scale),
            support: self.support.merge_min(o.support),
            support_flat: self.support_flat.merge_max(o.support_flat),
            fd: self.fd.merge_max(o.fd),
            flow: self.flow.merge_max(o.flow),
            continuity: self.continuity.merge_max(o.continuity),
            zero_dir: self.zero_dir.merge_max(o.zero_dir),
        }
    }
}

fn busemann_stats(seed: u64, stream: u64, s: Space) -> BusemannStats {
    let mut rng = rng_for(seed, 200 + stream);
    let mut st = BusemannStats::default();
    let flat = s.kappa().is_none();
    let samples = 10_000 / 5 + 1;
    for n in 0..samples {
        let b = random_direction(&mut rng, s, 1.5, (0.05, 3.0));
        let p = s.random_point(&mut rng, b.base(), scaled(s, 2.5));
        let x = s.random_point(&mut rng, b.base(), scaled(s, 2.5));
        let bp = busemann_value(&b, &p).unwrap();

        let g = busemann_gradient(&b, &p).unwrap();
        st.grad_norm.bump_max((g.norm() - 1.0).abs(), || describe(&b, &p));

        let lip = dist(&p, &x).unwrap() - (bp - busemann_value(&b, &x).unwrap()).abs();
        st.lipschitz.bump_min(lip, || describe(&b, &p));

        for lambda in [0.5, 2.0, 10.0] {
            let scaled = BusemannDirection::from_tangent(b.dir().scaled(lambda));
            st.scale.bump_max((busemann_value(&scaled, &p).unwrap() - bp).abs(), || describe(&b, &p));
        }

        // support: −⟨v, log_q p⟩ ≤ ‖v‖ B_{q,v}(p)
        let q = b.base();
        let lhs = -inner(q, b.dir(), &log_map(q, &p).unwrap()).unwrap();
        let rhs = b.dir().norm() * bp;
        if flat {
            st.support_flat.bump_max((rhs - lhs).abs(), || describe(&b, &p));
        }
        st.support.bump_min(rhs - lhs, || describe(&b, &p));

        if n % 10 == 0 {
            // ray linearity for ‖v‖ ≤ 1 on a τ grid in [−5, 5]
            let v = b.dir().scaled(scaled(s, rng.random_range(0.05..1.0)) / b.dir().norm());
            let minus = BusemannDirection::from_tangent(v.scaled(-1.0));
            for k in -10..=10 {
                let tau = k as f64 * 0.5;
                let y = exp_map(q, &v.scaled(tau)).unwrap();
                let err = (busemann_value(&minus, &y).unwrap() - tau * v.norm()).abs();
                st.ray.bump_max(err, || format!("{} τ={tau}", describe(&minus, &y)));
            }

            // gradient against central differences in an orthonormal frame
            let hstep = 1e-5;
            let basis = s.tangent_basis(&p);
            let fd: Vec<f64> = basis
                .iter()
                .map(|e| {
                    let plus = busemann_value(&b, &exp_map(&p, &e.scaled(hstep)).unwrap()).unwrap();
                    let minus = busemann_value(&b, &exp_map(&p, &e.scaled(-hstep)).unwrap()).unwrap();
                    (plus - minus) / (2.0 * hstep)
                })
                .collect();
            let exact: Vec<f64> = basis.iter().map(|e| inner(&p, &g, e).unwrap()).collect();
            let err = fd.iter().zip(&exact).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
                / exact.iter().map(|a| a * a).sum::<f64>().sqrt();
            st.fd.bump_max(err, || describe(&b, &p));

            // gradient flow: B(exp_p(t grad B(p))) = B(p) + t
            for k in -6..=6 {
                let t = k as f64 * 0.5;
                let y = exp_map(&p, &g.scaled(t)).unwrap();
                let err = (busemann_value(&b, &y).unwrap() - bp - t).abs();
                st.flow.bump_max(err, || format!("{} t={t}", describe(&b, &p)));
            }

            // continuity in (q, v)
            let delta = 1e-6;
            let dq = s.random_unit_tangent(&mut rng, q).scaled(delta);
            let q2 = exp_map(q, &dq).unwrap();
            let v2 = parallel_transport(q, &q2, b.dir()).unwrap();
            let jitter = s.random_unit_tangent(&mut rng, &q2).scaled(delta);
            let b2 = BusemannDirection::from_tangent(v2.add(&jitter).unwrap());
            let err = (busemann_value(&b2, &p).unwrap() - bp).abs();
            st.continuity.bump_max(err, || describe(&b, &p));

            let zero = BusemannDirection::from_tangent(Tangent::zero(q));
            let err = (busemann_value(&zero, &p).unwrap() - dist(q, &p).unwrap()).abs();
            st.zero_dir.bump_max(err, || describe(&zero, &p));
        }
    }
    st
}

// -------------------------------------------------------------- projection

pub fn projection(seed: u64) -> Vec<Check> {
    let spaces = [h(2, 1.0), h(3, 0.5), h(2, 4.0), r(2), r(3)];
    let instances = 1_000;
    let (level, length) = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, 300_000 + i as u64);
            let s = spaces[i % spaces.len()];
            let (sphere, p) = projection_instance(&mut rng, s);
            let proj = horosphere_project(&p, &sphere).unwrap();
            let bp = busemann_value(&sphere.direction, &p).unwrap();
            let level_err = (busemann_value(&sphere.direction, &proj).unwrap() - sphere.level).abs();
            let len_err = (dist(&p, &proj).unwrap() - (bp - sphere.level)).abs();
            let mut a = Worst::max();
            let mut b = Worst::max();
            a.bump_max(level_err, || describe(&sphere.direction, &p));
            b.bump_max(len_err, || describe(&sphere.direction, &p));
            (a, b)
        })
        .reduce(|| (Worst::max(), Worst::max()), |a, b| (a.0.merge_max(b.0), a.1.merge_max(b.1)));

    // brute force: no sampled horosphere point is closer than the projection
    let brute = (0..40)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, 400_000 + i as u64);
            let s = spaces[i % spaces.len()];
            let (sphere, p) = projection_instance(&mut rng, s);
            let proj = horosphere_project(&p, &sphere).unwrap();
            let best = dist(&p, &proj).unwrap();
            let pts = sample_horosphere(&sphere, &p, &proj, 3.0, 2_000, &mut rng).unwrap();
            let mut w = Worst::min();
            for x in &pts {
                w.bump_min(dist(&p, x).unwrap() - best, || describe(&sphere.direction, &p));
            }
            if pts.len() < 2_000 {
                w.bump_min(f64::NEG_INFINITY, || format!("only {} horosphere samples", pts.len()));
            }
            w
        })
        .reduce(Worst::min, Worst::merge_min);

    // flat case: the level set is a hyperplane with unit normal v̂
    let mut rng = rng_for(seed, 500);
    let mut flat = Worst::max();
    for _ in 0..1_000 {
        let s = r(rng.random_range(1..5));
        let (sphere, p) = projection_instance(&mut rng, s);
        let u = sphere.direction.dir().scaled(1.0 / sphere.direction.dir().norm());
        let excess = busemann_value(&sphere.direction, &p).unwrap() - sphere.level;
        let expected: Vec<f64> = p.to_vec().iter().zip(u.to_vec()).map(|(x, n)| x + excess * n).collect();
        let got = horosphere_project(&p, &sphere).unwrap().to_vec();
        let err = got.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        flat.bump_max(err, || describe(&sphere.direction, &p));
    }
    let s2 = r(2);
    let sphere = Horosphere::new(
        BusemannDirection::new(&s2.origin(), &s2.tangent(&s2.origin(), &[1.0, 0.0]).unwrap()).unwrap(),
        0.0,
    )
    .unwrap();
    let p = s2.point(&[-3.0, 4.0]).unwrap();
    let got = horosphere_project(&p, &sphere).unwrap().to_vec();
    flat.bump_max((got[0] - 0.0).abs().max((got[1] - 4.0).abs()), || "p=(-3,4)".to_string());

    vec![
        Check::within("projection: lands on the level set", level, 1e-9),
        Check::within("projection: distance equals the excess", length, 1e-9),
        Check::above("projection: beats 2000 sampled horosphere points", brute, 1e-9),
        Check::within("projection: matches hyperplane projection on Euclidean", flat, 1e-12),
    ]
}

/// A horosphere and a point strictly outside its horoball.
fn projection_instance(rng: &mut ChaCha8Rng, s: Space) -> (Horosphere, Point) {
    let b = random_direction(rng, s, 1.5, (0.2, 2.0));
    let p = s.random_point(rng, b.base(), scaled(s, 2.5));
    let level = busemann_value(&b, &p).unwrap() - rng.random_range(0.05..3.0);
    (Horosphere::new(b, level).unwrap(), p)
}

// ----------------------------------------------------------------- subdiff

/// Catalogue objectives on `s` together with interesting evaluation points
/// (kinks, ties, anchors) for each.
fn catalogue(s: Space, rng: &mut ChaCha8Rng) -> Vec<(String, Objective, Vec<Point>)> {
    let o = s.origin();
    let a: Vec<Point> = (0..3).map(|_| s.random_point(rng, &o, 2.0)).collect();
    let mid = geodesic_point(&a[0], &a[1], 0.5).unwrap();
    let random: Vec<Point> = (0..2).map(|_| s.random_point(rng, &o, 2.5)).collect();
    let with = |extra: &[&Point]| {
        let mut pts: Vec<Point> = extra.iter().map(|p| (*p).clone()).collect();
        pts.extend(random.iter().cloned());
        pts
    };
    let ray = {
        let u = s.random_unit_tangent(rng, &a[2]);
        BusemannDirection::from_tangent(u)
    };
    let on_ray = exp_map(ray.base(), &ray.dir().scaled(-0.7)).unwrap();
    let hinge_level = busemann_value(&ray, &on_ray).unwrap();

    let mut out: Vec<(String, Objective, Vec<Point>)> = vec![
        ("distance".into(), distance_objective(&a[0]), with(&[&a[0]])),
        ("half squared distance".into(), half_squared_distance(&a[0]), with(&[&a[0]])),
        ("2 d^1.5 + 1".into(), power_distance(&a[1], 2.0, 1.5, 1.0).unwrap(), with(&[&a[1]])),
        ("0.3 d^3".into(), power_distance(&a[1], 0.3, 3.0, 0.0).unwrap(), with(&[&a[1]])),
        ("Busemann".into(), busemann_objective(&ray), with(&[ray.base()])),
        (
            "hinge of Busemann".into(),
            scalar_chain(busemann_objective(&ray), Scalar::Hinge { weight: 2.0, level: hinge_level, offset: 0.5 })
                .unwrap(),
            with(&[&on_ray]),
        ),
        ("exp of distance".into(), scalar_chain(distance_objective(&a[2]), Scalar::Exp).unwrap(), with(&[&a[2]])),
        ("max of distances".into(), max_of_distances(&a).unwrap(), with(&[&mid, &a[0]])),
        ("max of squared distances".into(), max_of_squared_distances(&a[..2]).unwrap(), with(&[&mid])),
        ("weighted cover".into(), weighted_cover(&a, &[0.0, 0.5, 1.0]).unwrap(), with(&[&a[2], &mid])),
        (
            "max of mixed members".into(),
            max_objective(vec![
                power_distance(&a[0], 1.0, 2.0, -1.0).unwrap(),
                busemann_objective(&ray),
                distance_objective(&a[1]),
            ])
            .unwrap(),
            with(&[&mid, &on_ray]),
        ),
    ];
    let levels = [hinge_level - 0.5, hinge_level, hinge_level + 0.7];
    for (label, agg) in [
        ("log-sum-exp", Aggregator::LogSumExp { temperature: 0.5 }),
        (
            "separable sum",
            Aggregator::SeparableSum(vec![
                Scalar::Identity,
                Scalar::SquaredHinge { weight: 0.5, level: 0.2 },
                Scalar::Exp,
            ]),
        ),
        ("l2 norm", Aggregator::LrNorm { r: 2.0 }),
        ("max", Aggregator::Max),
    ] {
        let psis = levels.iter().map(|c| Scalar::Hinge { weight: 1.5, level: *c, offset: 0.0 }).collect();
        let family = AlignedFamily::busemann_backbone(&ray, psis).unwrap();
        out.push((
            format!("aligned {label} of Busemann hinges"),
            aligned_aggregate(family, agg).unwrap(),
            with(&[&on_ray]),
        ));
    }
    out
}

pub fn subdiff(seed: u64) -> Vec<Check> {
    let spaces = [h(2, 1.0), h(3, 0.5), r(2), r(3)];
    let cases: Vec<(Space, String, Objective, Point, u64)> = spaces
        .iter()
        .enumerate()
        .flat_map(|(i, &s)| {
            let mut rng = rng_for(seed, 600 + i as u64);
            catalogue(s, &mut rng)
                .into_iter()
                .flat_map(move |(name, f, pts)| pts.into_iter().map(move |p| (s, name.clone(), f.clone(), p)))
                .collect::<Vec<_>>()
        })
        .enumerate()
        .map(|(n, (s, name, f, p))| (s, name, f, p, seed.wrapping_mul(7919).wrapping_add(n as u64)))
        .collect();

    struct Outcome {
        label: String,
        b: Verdict,
        classical: Verdict,
        nearest: Verdict,
        flat_equal: Option<f64>,
    }
    let outcomes: Vec<Outcome> = cases
        .par_iter()
        .map(|(s, name, f, q, sample_seed)| {
            let spec = SampleSpec { seed: *sample_seed, ..SampleSpec::default() };
            let sg = f.b_subgradient(q).unwrap();
            let b = verify_b_subgradient(f.as_ref(), q, &sg, &spec).unwrap();
            let classical = verify_classical_subgradient(f.as_ref(), q, &sg, &spec).unwrap();
            let mut rng = rng_for(*sample_seed, 1);
            let target = s.random_tangent(&mut rng, q, 3.0);
            let near = f.nearest_b_subgradient(q, &target).unwrap();
            let small = SampleSpec { count: 2_000, ..spec.clone() };
            let nearest = verify_b_subgradient(f.as_ref(), q, &near, &small).unwrap();
            let flat_equal = match (s, &b, &classical) {
                (Space::Euclidean { .. }, Verdict::Holds { min_gap: x, .. }, Verdict::Holds { min_gap: y, .. }) => {
                    Some((x - y).abs())
                }
                _ => None,
            };
            Outcome {
                label: format!("{name} on {} at {}", name_of(*s), fmt_point(q)),
                b,
                classical,
                nearest,
                flat_equal,
            }
        })
        .collect();

    let summarize = |name: &str, pick: &dyn Fn(&Outcome) -> &Verdict| {
        let failed: Vec<String> = outcomes
            .iter()
            .filter_map(|o| match pick(o) {
                Verdict::Violated { witness, gap } => {
                    Some(format!("{} (gap {gap:.3e} at {})", o.label, fmt_point(witness)))
                }
                Verdict::Holds { .. } => None,
            })
            .collect();
        let min_gap = outcomes
            .iter()
            .filter_map(|o| match pick(o) {
                Verdict::Holds { min_gap, .. } => Some(*min_gap),
                _ => None,
            })
            .fold(f64::INFINITY, f64::min);
        if failed.is_empty() {
            Check::new(name, true, format!("{} cases, min gap {min_gap:.3e}", outcomes.len()))
        } else {
            Check::new(
                name,
                false,
                format!("{} of {} cases violated: {}", failed.len(), outcomes.len(), failed.join("; ")),
            )
        }
    };
    let mut checks = vec![
        summarize("subdiff: catalogue B-subgradients certified on 1e4 samples", &|o| &o.b),
        summarize("subdiff: B-subgradients are classical subgradients", &|o| &o.classical),
        summarize("subdiff: nearest B-subgradients certified", &|o| &o.nearest),
    ];
    let mut flat = Worst::max();
    for o in &outcomes {
        if let Some(e) = o.flat_equal {
            flat.bump_max(e, || o.label.clone());
        }
    }
    checks.push(Check::within("subdiff: B and classical gaps coincide on Euclidean", flat, 1e-9));
    checks.push(max_brute_force(seed));
    checks
}

fn max_brute_force(seed: u64) -> Check {
    let mut rng = rng_for(seed, 700);
    let s = h(2, 1.0);
    let anchors: Vec<Point> = (0..4).map(|_| s.random_point(&mut rng, &s.origin(), 2.0)).collect();
    let members: Vec<Objective> = anchors.iter().map(distance_objective).collect();
    let f = max_objective(members.clone()).unwrap();
    let mut worst = Worst::max();
    for _ in 0..2_000 {
        let p = s.random_point(&mut rng, &s.origin(), 3.0);
        let vals: Vec<f64> = members.iter().map(|m| m.value(&p).unwrap()).collect();
        let top = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let value_err = (f.value(&p).unwrap() - top).abs();
        let sg = f.b_subgradient(&p).unwrap();
        let from_active = vals
            .iter()
            .zip(&members)
            .filter(|(v, _)| top - **v <= 1e-12)
            .any(|(_, m)| m.b_subgradient(&p).unwrap().sub(&sg).unwrap().norm() == 0.0);
        let err = if from_active { value_err } else { f64::INFINITY };
        worst.bump_max(err, || fmt_point(&p));
    }
    Check::within("subdiff: max value and active subgradient match brute force", worst, 1e-12)
}

// --------------------------------------------------------- counterexamples

/// Candidate grid at `q`: 64 directions × magnitudes 2^-6..2^6, plus zero.
fn candidate_grid(q: &Point) -> Vec<Tangent> {
    let s = q.space();
    let basis = s.tangent_basis(q);
    let mut out = vec![Tangent::zero(q)];
    for j in 0..64 {
        let angle = 2.0 * PI * j as f64 / 64.0;
        let dir = s.from_basis(q, &basis, &[angle.cos(), angle.sin()]);
        for e in -6..=6 {
            out.push(dir.scaled(2f64.powi(e)));
        }
    }
    out
}

pub fn counterexamples(seed: u64) -> Vec<Check> {
    let s = h(2, 1.0);
    let q = s.origin();
    let basis = s.tangent_basis(&q);
    let unit = |theta: f64| s.from_basis(&q, &basis, &[theta.cos(), theta.sin()]);
    let angles = [PI / 3.0, PI / 2.0, 2.0 * PI / 3.0, 0.9 * PI];
    let mut checks = Vec::new();

    // the closed-form curve of the Busemann sum along the first ray
    let mut curve = Worst::max();
    for &theta in &angles {
        let (v1, v2) = (unit(0.0), unit(theta));
        let alpha = inner(&q, &v1, &v2).unwrap();
        let (b1, b2) = (BusemannDirection::from_tangent(v1.clone()), BusemannDirection::from_tangent(v2));
        for k in 0..=50 {
            let t = k as f64 * 0.1;
            let x = exp_map(&q, &v1.scaled(t)).unwrap();
            let numeric = busemann_value(&b1, &x).unwrap() + busemann_value(&b2, &x).unwrap();
            let err = (numeric - counterexample::busemann_sum_on_ray(alpha, t)).abs();
            curve.bump_max(err, || format!("θ={theta:.4} t={t}"));
        }
    }
    checks.push(Check::within("counterexamples: Busemann sum matches its closed form along the ray", curve, 1e-10));

    let ray_times = vec![0.5, 1.0, 2.0, 3.0, 4.0, 5.0];
    let grid = candidate_grid(&q);

    let refute_all = |f: &Objective, rays: Vec<Tangent>, stream: u64| -> (usize, Vec<String>) {
        let spec = SampleSpec {
            seed: seed ^ stream,
            count: 200,
            radius: 5.0,
            rays,
            ray_times: ray_times.clone(),
            tolerance: 1e-9,
        };
        let survivors: Vec<String> = grid
            .par_iter()
            .filter_map(|sg| match verify_b_subgradient(f.as_ref(), &q, sg, &spec).unwrap() {
                Verdict::Violated { .. } => None,
                Verdict::Holds { min_gap, .. } => Some(format!("s={:?} (min gap {min_gap:.3e})", sg.to_vec())),
            })
            .collect();
        (grid.len(), survivors)
    };

    for (n, &theta) in angles.iter().enumerate() {
        let (v1, v2) = (unit(0.0), unit(theta));
        let f = uncertified_sum(vec![
            busemann_objective(&BusemannDirection::from_tangent(v1.clone())),
            busemann_objective(&BusemannDirection::from_tangent(v2.clone())),
        ]);
        let (total, survivors) = refute_all(&f, vec![v1, v2], 800 + n as u64);
        checks.push(grid_check(
            &format!("counterexamples: Busemann sum at θ={theta:.4} has no B-subgradient"),
            total,
            &survivors,
        ));
    }

    let mut thresholds = Worst::max();
    for (n, &theta) in angles.iter().enumerate() {
        let (v1, v2) = (unit(0.0), unit(theta));
        let alpha = inner(&q, &v1, &v2).unwrap();
        let threshold = counterexample::distance_sum_threshold(alpha);
        let t = 3f64.max(threshold.ceil());
        if t > 5.0 {
            thresholds.bump_max(t, || format!("θ={theta:.4}"));
            continue;
        }
        let a1 = exp_map(&q, &v1.scaled(t)).unwrap();
        let a2 = exp_map(&q, &v2.scaled(t)).unwrap();
        let f = uncertified_sum(vec![distance_objective(&a1), distance_objective(&a2)]);
        // the two anchors lie on the sampled rays at time t
        let ratio = counterexample::distance_sum_ratio(alpha, t);
        let bound = (f.value(&a1).unwrap() - f.value(&q).unwrap()).exp();
        thresholds.bump_max(bound - ratio, || format!("ratio bound at θ={theta:.4}"));
        let (total, survivors) = refute_all(&f, vec![v1, v2], 900 + n as u64);
        checks.push(grid_check(
            &format!("counterexamples: distance sum at θ={theta:.4}, t={t} has no B-subgradient"),
            total,
            &survivors,
        ));
    }
    checks.push(Check::new(
        "counterexamples: thresholds reachable and ratio bound holds",
        thresholds.value <= 1e-12,
        format!("worst {:.3e}{}", thresholds.value, thresholds.context(thresholds.value <= 1e-12)),
    ));

    // each summand alone is certified, so the failure is due to the sum
    let (v1, v2) = (unit(0.0), unit(PI / 2.0));
    let t = 3.0;
    let a1 = exp_map(&q, &v1.scaled(t)).unwrap();
    let a2 = exp_map(&q, &v2.scaled(t)).unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    for a in [&a1, &a2] {
        let f = distance_objective(a);
        let sg = f.b_subgradient(&q).unwrap();
        let spec = SampleSpec { seed, count: 2_000, ..SampleSpec::default() };
        let v = verify_b_subgradient(f.as_ref(), &q, &sg, &spec).unwrap();
        ok &= v.holds();
        detail.push(format!("{v:?}"));
    }
    checks.push(Check::new("counterexamples: each distance summand is B-subdifferentiable", ok, detail.join(", ")));
    checks
}

fn grid_check(name: &str, total: usize, survivors: &[String]) -> Check {
    if survivors.is_empty() {
        Check::new(name, true, format!("all {total} candidates violated"))
    } else {
        Check::new(name, false, format!("{} of {total} candidates survived: {}", survivors.len(), survivors.join("; ")))
    }
}

// ------------------------------------------------------------------ solver

/// Test problems for the solver suites: name, objective, start, solution.
fn solver_problems(seed: u64) -> Vec<(String, Objective, Point, Point)> {
    let s = h(2, 1.0);
    let mut rng = rng_for(seed, 1_000);
    let anchors: Vec<Point> = [[1.0, 0.2], [-0.6, 0.9], [-0.3, -1.1]].iter().map(|c| s.lift(c).unwrap()).collect();
    let start = s.random_point(&mut rng, &s.origin(), 4.0);
    let circ = max_of_distances(&anchors).unwrap();
    let cover = weighted_cover(&anchors, &[0.2, 0.0, 0.5]).unwrap();
    let mut out = Vec::new();
    for (name, f) in [("circumcenter", circ), ("weighted cover", cover)] {
        let p_star = reference_point(&f, &start);
        out.push((name.to_string(), f, start.clone(), p_star));
    }
    out
}

/// High-accuracy exact-mode run used as the known solution.
fn reference_point(f: &Objective, start: &Point) -> Point {
    let config = SolverConfig { sigma: 0.0, max_outer_iters: 2_000, stop_tol: 1e-14, ..SolverConfig::default() };
    bhppm(f.as_ref(), start, &config).expect("reference run").final_point
}

struct SweepRun {
    label: String,
    sigma: f64,
    mu: f64,
    run: RunResult,
    p0: Point,
    p_star: Point,
    secs: f64,
}

/// σ ∈ {0, 0.5, 0.9} and constant μ ∈ {1, 20} on every solver problem.
fn sweep(seed: u64) -> Vec<SweepRun> {
    let jobs: Vec<(String, Objective, Point, Point, f64, f64)> = solver_problems(seed)
        .into_iter()
        .flat_map(|(name, f, p0, ps)| {
            [0.0, 0.5, 0.9].into_iter().flat_map(move |sigma| {
                let (name, f, p0, ps) = (name.clone(), f.clone(), p0.clone(), ps.clone());
                [1.0, 20.0].map(move |mu| (name.clone(), f.clone(), p0.clone(), ps.clone(), sigma, mu))
            })
        })
        .collect();
    jobs.into_par_iter()
        .map(|(name, f, p0, p_star, sigma, mu)| {
            let config =
                SolverConfig { sigma, mu: MuSchedule::Constant(mu), max_outer_iters: 200, ..SolverConfig::default() };
            let t = Instant::now();
            let run = bhppm(f.as_ref(), &p0, &config).expect("solver run");
            SweepRun {
                label: format!("{name}, σ={sigma}, μ≡{mu}"),
                sigma,
                mu,
                run,
                p0,
                p_star,
                secs: t.elapsed().as_secs_f64(),
            }
        })
        .collect()
}

pub fn solver_descent(seed: u64) -> Vec<Check> {
    let mut checks = Vec::new();
    for SweepRun { label, sigma, run, p_star, secs, .. } in sweep(seed) {
        let report = check_descent(&run, sigma, &p_star).unwrap();
        let separation = check_separation(&run.history, sigma).unwrap();
        let n = run.history.len();
        let quart = (n / 4).max(1);
        let mean = |r: &[horoprox::solver::IterationRecord]| r.iter().map(|x| x.dist_pq).sum::<f64>() / r.len() as f64;
        let first = mean(&run.history[..quart]);
        let last = mean(&run.history[n - quart..]);
        let fejer = run
            .iterates()
            .windows(2)
            .map(|w| dist(&w[0], &p_star).unwrap() - dist(&w[1], &p_star).unwrap())
            .fold(f64::INFINITY, f64::min);
        let met = run.history.iter().all(|r| r.inner_converged);
        checks.push(Check::new(
            &format!("solver descent: {label}"),
            report.passed() && met && run.terminal != Terminal::InnerFailure,
            format!(
                "{n} iterations ({:?}), min slack {:.3e}, inner test met: {met}, min Fejér decrease {fejer:.3e}",
                run.terminal, report.min_slack
            ),
        ));
        checks.push(Check::new(
            &format!("solver separation: {label}"),
            separation >= -1e-9,
            format!("min B_(q,-v)(p) - c d(p,q) = {separation:.3e}"),
        ));
        checks.push(Check::new(
            &format!("solver d(p_k,q_k) decreases: {label}"),
            last < first || last <= 1e-12,
            format!("first-quartile mean {first:.3e}, last-quartile mean {last:.3e}"),
        ));
        checks.push(Check::new(&format!("solver runtime: {label}"), secs < 30.0, format!("{secs:.2} s (limit 30 s)")));
    }
    checks
}

pub fn solver_complexity(seed: u64) -> Vec<Check> {
    let mut checks = Vec::new();
    for SweepRun { label, sigma, mu, run, p0, p_star, .. } in sweep(seed) {
        let report = check_complexity(&run.history, sigma, &p0, &p_star, Some(mu)).unwrap();
        let worst_dist = report.rows.iter().map(|r| r.min_dist - r.dist_bound).fold(f64::NEG_INFINITY, f64::max);
        let worst_norm =
            report.rows.iter().filter_map(|r| r.norm_bound.map(|b| r.min_norm_v - b)).fold(f64::NEG_INFINITY, f64::max);
        let passed = worst_dist <= 1e-9 && worst_norm <= 1e-9;
        checks.push(Check::new(
            &format!("solver complexity: {label}"),
            passed,
            format!(
                "{} prefixes, max excess over distance bound {worst_dist:.3e}, over ‖v‖ bound {worst_norm:.3e}",
                report.rows.len()
            ),
        ));
    }
    checks
}

pub fn exact_reduction(seed: u64) -> Vec<Check> {
    let mut rng = rng_for(seed, 1_100);
    let mut checks = Vec::new();
    for s in [h(2, 1.0), r(3)] {
        let anchor = s.random_point(&mut rng, &s.origin(), 1.0);
        let far = s.random_point(&mut rng, &s.origin(), 1.0);
        let far =
            exp_map(&anchor, &log_map(&anchor, &far).unwrap().scaled(6.0 / dist(&anchor, &far).unwrap().max(1e-3)))
                .unwrap();
        for (label, kind, mu) in [
            ("half squared distance", ProxKind::HalfSquared { anchor: anchor.clone() }, MuSchedule::Constant(1.0)),
            ("distance", ProxKind::Distance { anchor: anchor.clone() }, MuSchedule::Constant(1.0)),
            (
                "distance, μ_k = 3/√(k+1)",
                ProxKind::Distance { anchor: anchor.clone() },
                MuSchedule::InverseSqrt { scale: 3.0 },
            ),
        ] {
            let config = SolverConfig {
                sigma: 0.0,
                mu: mu.clone(),
                max_outer_iters: 60,
                inner: InnerMethod::ClosedForm(kind.clone()),
                ..SolverConfig::default()
            };
            let f = match kind {
                ProxKind::HalfSquared { .. } => half_squared_distance(&anchor),
                ProxKind::Distance { .. } => distance_objective(&anchor),
            };
            let a = bhppm(f.as_ref(), &far, &config).unwrap();
            let b = ppa_exact(&kind, &far, &mu, 60, config.stop_tol).unwrap();
            let dev = trajectory_deviation(&a, &b);
            checks.push(Check::new(
                &format!("exact reduction: {label} on {}", name_of(s)),
                dev <= 1e-8,
                format!("max per-step deviation {dev:.3e} over {} steps", a.history.len().min(b.history.len())),
            ));
        }

        // μ ≡ 1 on ½d² halves the distance to the anchor each step
        let kind = ProxKind::HalfSquared { anchor: anchor.clone() };
        let run = ppa_exact(&kind, &far, &MuSchedule::Constant(1.0), 20, 0.0).unwrap();
        let mut worst = Worst::max();
        for w in run.iterates().windows(2) {
            let (d0, d1) = (dist(&w[0], &anchor).unwrap(), dist(&w[1], &anchor).unwrap());
            if d0 > 1e-300 {
                worst.bump_max((d1 / d0 - 0.5).abs() / 0.5, || format!("d={d0:.3e}"));
            }
        }
        checks.push(Check::within(
            &format!("exact reduction: ½d² with μ≡1 halves the distance on {}", name_of(s)),
            worst,
            1e-9,
        ));
    }
    checks
}

/// Largest distance between matching iterates and inner points.
pub fn trajectory_deviation(a: &RunResult, b: &RunResult) -> f64 {
    if a.history.len() != b.history.len() {
        return f64::INFINITY;
    }
    a.history
        .iter()
        .zip(&b.history)
        .map(|(x, y)| dist(&x.p, &y.p).unwrap().max(dist(&x.q, &y.q).unwrap()))
        .fold(0.0, f64::max)
}

pub fn symmetry(seed: u64) -> Vec<Check> {
    let mut rng = rng_for(seed, 1_200);
    let mut checks = Vec::new();
    for s in [h(2, 1.0), h(3, 2.0), r(2), r(3)] {
        let a = s.random_point(&mut rng, &s.origin(), 2.0);
        let b = s.random_point(&mut rng, &s.origin(), 2.0);
        let mid = geodesic_point(&a, &b, 0.5).unwrap();
        // symmetric start: on the perpendicular bisector through the midpoint
        let along = log_map(&mid, &b).unwrap();
        let basis = s.tangent_basis(&mid);
        let mut perp = None;
        for e in &basis {
            let c = inner(&mid, e, &along).unwrap() / along.norm().powi(2);
            let candidate = e.sub(&along.scaled(c)).unwrap();
            if candidate.norm() > 0.1 {
                perp = Some(candidate.scaled(1.0 / candidate.norm()));
                break;
            }
        }
        let start = exp_map(&mid, &perp.unwrap().scaled(1.5)).unwrap();
        let f = max_of_distances(&[a, b]).unwrap();
        let run = bhppm(f.as_ref(), &start, &SolverConfig::default()).unwrap();
        let err = dist(&run.final_point, &mid).unwrap();
        checks.push(Check::new(
            &format!("symmetry: two-anchor circumcenter is the midpoint on {}", name_of(s)),
            err <= 1e-4,
            format!("distance to midpoint {err:.3e} after {} iterations ({:?})", run.history.len(), run.terminal),
        ));
    }
    checks
}

/// Runs a problem file twice and compares the CSV bytes.
pub fn reproducibility(seed: u64) -> Vec<Check> {
    let spec = crate::problem::parse_problem(&format!(
        r#"
        seed = {seed}
        [manifold]
        kind = "hyperboloid"
        dim = 2
        [objective]
        kind = "weighted_cover"
        anchors = [[0.5, 0.1, 1.1224972160321824], [-0.4, 0.6, 1.2328828005937953], [0.0, -0.9, 1.3453624047073711]]
        weights = [0.1, 0.0, 0.3]
        [solver]
        sigma = 0.5
        max_outer_iters = 80
        "#
    ));
    let spec = match spec {
        Ok(s) => s,
        Err(e) => return vec![Check::new("reproducibility: built-in problem parses", false, e.to_string())],
    };
    let render = || crate::commands::solve_to_csv(&spec).map(|(csv, _)| csv);
    match (render(), render()) {
        (Ok(a), Ok(b)) => vec![Check::new(
            "reproducibility: identical spec and seed give identical CSV",
            a == b,
            format!("{} bytes", a.len()),
        )],
        (Err(e), _) | (_, Err(e)) => vec![Check::new("reproducibility: run succeeded", false, e.to_string())],
    }
}

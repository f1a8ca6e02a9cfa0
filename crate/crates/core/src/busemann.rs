//! Busemann functions of geodesic rays, horospheres and horoballs.
//!
//! The ray is `γ(t) = exp_q(t v)` and the function is the limit of
//! `d(p, γ(t)) − t‖v‖` as `t → ∞`. A zero direction degenerates to the
//! distance `d(q, ·)`.

use rand::Rng;
use thiserror::Error;

use crate::manifold::{dist_unchecked, exp_unchecked, log_unchecked, GeometryError, Point, Space, Tangent};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BusemannError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("a horosphere needs a nonzero direction")]
    ZeroDirection,
    #[error("point lies in the closed horoball (B - level = {excess:.3e}); nothing to project")]
    InsideHoroball { excess: f64 },
    #[error("gradient of the distance function is undefined at its base point")]
    NonDifferentiable,
    #[error("projected point misses the level set by {0:.3e}")]
    ProjectionResidual(f64),
}

/// Base point `q` and direction `v ∈ T_q M` of a geodesic ray.
#[derive(Debug, Clone, PartialEq)]
pub struct BusemannDirection {
    dir: Tangent,
}

impl BusemannDirection {
    pub fn new(base: &Point, dir: &Tangent) -> Result<Self, BusemannError> {
        if dir.base() != base {
            return Err(GeometryError::Anchoring.into());
        }
        Ok(BusemannDirection { dir: dir.clone() })
    }

    pub fn from_tangent(dir: Tangent) -> Self {
        BusemannDirection { dir }
    }

    pub fn base(&self) -> &Point {
        self.dir.base()
    }

    pub fn dir(&self) -> &Tangent {
        &self.dir
    }

    pub fn space(&self) -> Space {
        self.base().space()
    }

    pub fn is_zero(&self) -> bool {
        self.dir.norm() == 0.0
    }

    /// `B_{q,v}(p)`.
    pub fn value(&self, p: &Point) -> Result<f64, BusemannError> {
        busemann_value(self, p)
    }

    /// The reversed ray, `(q, -v)`.
    pub fn reversed(&self) -> Self {
        BusemannDirection { dir: self.dir.scaled(-1.0) }
    }
}

fn check_space(b: &BusemannDirection, p: &Point) -> Result<(), BusemannError> {
    if b.space() != p.space() {
        return Err(GeometryError::SpaceMismatch(b.space(), p.space()).into());
    }
    Ok(())
}

/// Evaluates `B_{q,v}(p)` in closed form.
pub fn busemann_value(b: &BusemannDirection, p: &Point) -> Result<f64, BusemannError> {
    check_space(b, p)?;
    let q = b.base();
    let Some(u) = b.dir.normalized() else {
        return Ok(dist_unchecked(q, p));
    };
    let space = q.space();
    let w = p.coords() - q.coords();
    match space {
        Space::Euclidean { .. } => Ok(-space.ambient_inner(u.comps(), &w)),
        Space::Hyperboloid { kappa, .. } => {
            // B = ln(-⟨p, κq + √κ u⟩)/√κ, written as ln(1 + ⟨p − q, ℓ⟩) with the null vector ℓ
            let sk = kappa.sqrt();
            let ell = -(q.coords() * kappa + u.comps() * sk);
            Ok(space.ambient_inner(&w, &ell).ln_1p() / sk)
        }
    }
}

/// Riemannian gradient of `B_{q,v}` at `p`, a unit vector.
///
/// For `v = 0` this is the gradient of `d(q, ·)`, undefined at `q` itself.
pub fn busemann_gradient(b: &BusemannDirection, p: &Point) -> Result<Tangent, BusemannError> {
    check_space(b, p)?;
    let q = b.base();
    let Some(u) = b.dir.normalized() else {
        let d = dist_unchecked(p, q);
        if d == 0.0 {
            return Err(BusemannError::NonDifferentiable);
        }
        return Ok(log_unchecked(p, q).scaled(-1.0 / d));
    };
    let space = q.space();
    match space {
        Space::Euclidean { .. } => Ok(Tangent::project(p, u.comps().clone()).scaled(-1.0)),
        Space::Hyperboloid { kappa, .. } => {
            let sk = kappa.sqrt();
            let big_w = q.coords() * kappa + u.comps() * sk;
            let pw = space.ambient_inner(p.coords(), &big_w);
            Ok(Tangent::project(p, big_w).scaled(1.0 / (sk * pw)))
        }
    }
}

/// Truncated defining limit `d(p, γ(t)) − t‖v‖` at a finite `t`.
///
/// Used as an oracle for [`busemann_value`]. In flat space the difference is
/// formed as `(d² − T²)/(d + T)` with the numerator expanded, which avoids the
/// cancellation between two large numbers.
pub fn busemann_limit(b: &BusemannDirection, p: &Point, t: f64) -> Result<f64, BusemannError> {
    check_space(b, p)?;
    let q = b.base();
    let big_t = t * b.dir.norm();
    match q.space() {
        Space::Euclidean { .. } => {
            let w = p.coords() - q.coords();
            let v = b.dir.comps();
            let num = w.norm_squared() - 2.0 * t * w.dot(v);
            let d = (w - v * t).norm();
            Ok(num / (d + big_t))
        }
        Space::Hyperboloid { .. } => {
            let far = exp_unchecked(&b.dir.scaled(t));
            Ok(dist_unchecked(p, &far) - big_t)
        }
    }
}

/// Level set `{p : B_{q,v}(p) = level}` of a Busemann function with `v ≠ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Horosphere {
    pub direction: BusemannDirection,
    pub level: f64,
}

/// Sublevel set `{p : B_{q,v}(p) ≤ level}` with `v ≠ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Horoball {
    pub direction: BusemannDirection,
    pub level: f64,
}

impl Horosphere {
    pub fn new(direction: BusemannDirection, level: f64) -> Result<Self, BusemannError> {
        if direction.is_zero() {
            return Err(BusemannError::ZeroDirection);
        }
        Ok(Horosphere { direction, level })
    }

    pub fn ball(&self) -> Horoball {
        Horoball { direction: self.direction.clone(), level: self.level }
    }
}

impl Horoball {
    pub fn new(direction: BusemannDirection, level: f64) -> Result<Self, BusemannError> {
        if direction.is_zero() {
            return Err(BusemannError::ZeroDirection);
        }
        Ok(Horoball { direction, level })
    }

    pub fn contains(&self, p: &Point) -> Result<bool, BusemannError> {
        Ok(busemann_value(&self.direction, p)? <= self.level)
    }
}

/// Nearest point of the horosphere to a point `p` outside the horoball.
///
/// Follows the negative gradient of the Busemann function for exactly the
/// excess `B(p) − level`.
pub fn horosphere_project(p: &Point, s: &Horosphere) -> Result<Point, BusemannError> {
    let excess = busemann_value(&s.direction, p)? - s.level;
    if excess <= 0.0 {
        return Err(BusemannError::InsideHoroball { excess });
    }
    let g = busemann_gradient(&s.direction, p)?;
    let out = exp_unchecked(&g.scaled(-excess));
    let residual = busemann_value(&s.direction, &out)? - s.level;
    if residual.abs() > 1e-9 * (1.0 + s.level.abs() + excess) {
        return Err(BusemannError::ProjectionResidual(residual));
    }
    Ok(out)
}

/// Distance from `p` to a horoball: `max(0, B(p) − level)`.
pub fn horoball_distance(p: &Point, h: &Horoball) -> Result<f64, BusemannError> {
    Ok((busemann_value(&h.direction, p)? - h.level).max(0.0))
}

/// Points of a horosphere found by bisection along geodesics.
///
/// Each geodesic starts at `from` (outside the horoball) and passes through a
/// random point within `radius` of `center`; the first crossing of the level
/// set is located with bisection on Busemann values only. Geodesics that miss
/// the horoball are discarded, so fewer than `count` points may come back if
/// the geometry is unfavourable.
pub fn sample_horosphere<R: Rng + ?Sized>(
    s: &Horosphere,
    from: &Point,
    center: &Point,
    radius: f64,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Point>, BusemannError> {
    let f = |x: &Point| busemann_value(&s.direction, x).map(|b| b - s.level);
    if f(from)? <= 0.0 {
        return Err(BusemannError::InsideHoroball { excess: f(from)? });
    }
    let space = from.space();
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count && attempts < 50 * count.max(1) {
        attempts += 1;
        let x = space.random_point(rng, center, radius);
        let dir = log_unchecked(from, &x);
        if dir.norm() < 1e-12 {
            continue;
        }
        let at = |t: f64| exp_unchecked(&dir.scaled(t));
        let mut hi = 1.0;
        while f(&at(hi))? > 0.0 && hi < 64.0 {
            hi *= 2.0;
        }
        if f(&at(hi))? > 0.0 {
            continue;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(&at(mid))? > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(at(0.5 * (lo + hi)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{dist, exp_map};
    use approx::assert_abs_diff_eq;

    fn ray(space: Space, base: &[f64], dir: &[f64]) -> BusemannDirection {
        let q = space.point(base).unwrap();
        let v = space.tangent(&q, dir).unwrap();
        BusemannDirection::new(&q, &v).unwrap()
    }

    #[test]
    fn value_along_own_ray_is_minus_t() {
        let s = Space::hyperboloid(2, 1.0).unwrap();
        let b = ray(s, &[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0]);
        for t in [0.0, 0.5, 1.0, 3.0] {
            let p = exp_map(b.base(), &b.dir().scaled(t)).unwrap();
            assert_abs_diff_eq!(b.value(&p).unwrap(), -t, epsilon = 1e-13);
        }
    }

    #[test]
    fn flat_value_is_a_linear_functional() {
        let s = Space::euclidean(2).unwrap();
        let b = ray(s, &[0.0, 0.0], &[2.0, 0.0]);
        let p = s.point(&[3.0, 5.0]).unwrap();
        assert_eq!(b.value(&p).unwrap(), -3.0);
        let g = busemann_gradient(&b, &p).unwrap();
        assert_eq!(g.to_vec(), vec![-1.0, 0.0]);
    }

    #[test]
    fn zero_direction_is_distance() {
        let s = Space::hyperboloid(2, 1.0).unwrap();
        let b = ray(s, &[0.0, 0.0, 1.0], &[0.0, 0.0, 0.0]);
        let p = s.lift(&[0.3, -0.4]).unwrap();
        assert_eq!(b.value(&p).unwrap(), dist(b.base(), &p).unwrap());
        assert!(Horosphere::new(b.clone(), 0.0).is_err());
        assert_eq!(busemann_gradient(&b, b.base()), Err(BusemannError::NonDifferentiable));
    }

    #[test]
    fn gradient_at_base_is_minus_direction() {
        let s = Space::hyperboloid(3, 2.0).unwrap();
        let b = ray(s, &[0.0, 0.0, 0.0, 0.5f64.sqrt()], &[0.0, 3.0, 4.0, 0.0]);
        let g = busemann_gradient(&b, b.base()).unwrap();
        let expected = [0.0, -0.6, -0.8, 0.0];
        for (a, e) in g.to_vec().iter().zip(expected) {
            assert_abs_diff_eq!(*a, e, epsilon = 1e-15);
        }
    }

    #[test]
    fn projection_lands_on_level_set() {
        let s = Space::hyperboloid(2, 1.0).unwrap();
        let b = ray(s, &[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0]);
        let sphere = Horosphere::new(b.clone(), -0.3).unwrap();
        let p = s.lift(&[-1.0, 0.5]).unwrap();
        let proj = horosphere_project(&p, &sphere).unwrap();
        assert_abs_diff_eq!(b.value(&proj).unwrap(), -0.3, epsilon = 1e-12);
        let excess = b.value(&p).unwrap() + 0.3;
        assert_abs_diff_eq!(dist(&p, &proj).unwrap(), excess, epsilon = 1e-12);
        assert_abs_diff_eq!(horoball_distance(&p, &sphere.ball()).unwrap(), excess);
        assert!(matches!(
            horosphere_project(&proj, &Horosphere::new(b, 10.0).unwrap()),
            Err(BusemannError::InsideHoroball { .. })
        ));
    }
}

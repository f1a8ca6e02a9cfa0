//! Model spaces: flat `ℝⁿ` and the hyperboloid model of hyperbolic space.
//!
//! Points and tangent vectors are stored in ambient coordinates. On the
//! hyperboloid the ambient space is `ℝⁿ⁺¹` with the Lorentz form
//! `⟨x, y⟩ = x₀y₀ + … + x_{n-1}y_{n-1} − x_n y_n`, the last coordinate being
//! timelike. A point satisfies `⟨p, p⟩ = −1/κ` with positive last coordinate,
//! a tangent vector at `p` satisfies `⟨p, v⟩ = 0`.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Tolerance for the manifold and tangency constraints, relative to the
/// magnitude of the coordinates involved.
pub const CONSTRAINT_TOL: f64 = 1e-10;

/// Below this norm, exponential maps use a Taylor expansion.
const SMALL_NORM: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("points or vectors live in different spaces ({0:?} vs {1:?})")]
    SpaceMismatch(Space, Space),
    #[error("tangent vector is anchored at a different base point")]
    Anchoring,
    #[error("expected {expected} ambient coordinates, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("point is off the manifold (constraint residual {residual:.3e})")]
    OffManifold { residual: f64 },
    #[error("vector is not tangent at its base point (residual {residual:.3e})")]
    NotTangent { residual: f64 },
    #[error("invalid space: {0}")]
    InvalidSpace(String),
    #[error("non-finite coordinate")]
    NonFinite,
}

/// A model space together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Space {
    Euclidean { dim: usize },
    Hyperboloid { dim: usize, kappa: f64 },
}

impl Space {
    pub fn euclidean(dim: usize) -> Result<Self, GeometryError> {
        if dim == 0 {
            return Err(GeometryError::InvalidSpace("dimension must be positive".into()));
        }
        Ok(Space::Euclidean { dim })
    }

    /// Hyperbolic space of sectional curvature `-kappa`.
    pub fn hyperboloid(dim: usize, kappa: f64) -> Result<Self, GeometryError> {
        if dim == 0 {
            return Err(GeometryError::InvalidSpace("dimension must be positive".into()));
        }
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(GeometryError::InvalidSpace(format!(
                "curvature parameter must be positive and finite, got {kappa}"
            )));
        }
        Ok(Space::Hyperboloid { dim, kappa })
    }

    pub fn dim(&self) -> usize {
        match *self {
            Space::Euclidean { dim } | Space::Hyperboloid { dim, .. } => dim,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match *self {
            Space::Euclidean { dim } => dim,
            Space::Hyperboloid { dim, .. } => dim + 1,
        }
    }

    pub fn kappa(&self) -> Option<f64> {
        match *self {
            Space::Euclidean { .. } => None,
            Space::Hyperboloid { kappa, .. } => Some(kappa),
        }
    }

    /// Ambient bilinear form: dot product or Lorentz form.
    pub fn ambient_inner(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        match *self {
            Space::Euclidean { .. } => x.dot(y),
            Space::Hyperboloid { dim, .. } => {
                let spatial: f64 = (0..dim).map(|i| x[i] * y[i]).sum();
                spatial - x[dim] * y[dim]
            }
        }
    }

    /// The origin `0` or the hyperboloid vertex `(0, …, 0, 1/√κ)`.
    pub fn origin(&self) -> Point {
        let mut coords = DVector::zeros(self.ambient_dim());
        if let Space::Hyperboloid { dim, kappa } = *self {
            coords[dim] = 1.0 / kappa.sqrt();
        }
        Point { space: *self, coords }
    }

    /// Validating constructor for a point given in ambient coordinates.
    pub fn point(&self, coords: &[f64]) -> Result<Point, GeometryError> {
        Point::new(*self, DVector::from_column_slice(coords))
    }

    /// Builds a point from its first `dim` coordinates; on the hyperboloid the
    /// timelike coordinate is solved for.
    pub fn lift(&self, spatial: &[f64]) -> Result<Point, GeometryError> {
        if spatial.len() != self.dim() {
            return Err(GeometryError::Dimension { expected: self.dim(), got: spatial.len() });
        }
        if spatial.iter().any(|x| !x.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let mut coords = DVector::zeros(self.ambient_dim());
        coords.rows_mut(0, self.dim()).copy_from_slice(spatial);
        let mut p = Point { space: *self, coords };
        p.renormalize();
        Ok(p)
    }

    /// Validating constructor for a tangent vector at `base`.
    pub fn tangent(&self, base: &Point, comps: &[f64]) -> Result<Tangent, GeometryError> {
        base.check_space(self)?;
        Tangent::new(base.clone(), DVector::from_column_slice(comps))
    }

    /// An orthonormal basis of `T_p M`.
    pub fn tangent_basis(&self, p: &Point) -> Vec<Tangent> {
        let n = self.dim();
        let mut basis: Vec<Tangent> = Vec::with_capacity(n);
        for i in 0..n {
            let mut e = DVector::zeros(self.ambient_dim());
            e[i] = 1.0;
            let mut v = Tangent::project(p, e);
            for b in &basis {
                let c = v.dot(b);
                v.comps -= &b.comps * c;
            }
            let norm = v.norm();
            basis.push(v.scaled(1.0 / norm));
        }
        basis
    }

    /// A tangent vector at `p` from its coordinates in `tangent_basis(p)`.
    pub fn from_basis(&self, p: &Point, basis: &[Tangent], coeffs: &[f64]) -> Tangent {
        let mut comps = DVector::zeros(self.ambient_dim());
        for (b, c) in basis.iter().zip(coeffs) {
            comps += &b.comps * *c;
        }
        Tangent { base: p.clone(), comps }
    }

    /// Unit tangent vector at `p` drawn uniformly from the unit sphere.
    pub fn random_unit_tangent<R: Rng + ?Sized>(&self, rng: &mut R, p: &Point) -> Tangent {
        let basis = self.tangent_basis(p);
        loop {
            let coeffs: Vec<f64> = (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect();
            let v = self.from_basis(p, &basis, &coeffs);
            let norm = v.norm();
            if norm > 1e-6 {
                return v.scaled(1.0 / norm);
            }
        }
    }

    /// Tangent vector at `p` with uniform direction and norm uniform in `[0, radius]`.
    pub fn random_tangent<R: Rng + ?Sized>(&self, rng: &mut R, p: &Point, radius: f64) -> Tangent {
        let r = rng.random::<f64>() * radius;
        self.random_unit_tangent(rng, p).scaled(r)
    }

    /// Random point at distance at most `radius` from `center`.
    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R, center: &Point, radius: f64) -> Point {
        let v = self.random_tangent(rng, center, radius);
        exp_unchecked(&v)
    }
}

/// A point of a model space, in ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    space: Space,
    coords: DVector<f64>,
}

impl Point {
    pub fn new(space: Space, coords: DVector<f64>) -> Result<Self, GeometryError> {
        if coords.len() != space.ambient_dim() {
            return Err(GeometryError::Dimension { expected: space.ambient_dim(), got: coords.len() });
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if let Space::Hyperboloid { dim, kappa } = space {
            let scale = 1.0 / kappa + coords.norm_squared();
            let residual = (space.ambient_inner(&coords, &coords) + 1.0 / kappa).abs();
            if residual > CONSTRAINT_TOL * scale || coords[dim] <= 0.0 {
                return Err(GeometryError::OffManifold { residual });
            }
        }
        Ok(Point { space, coords })
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.coords.iter().copied().collect()
    }

    fn check_space(&self, space: &Space) -> Result<(), GeometryError> {
        if self.space != *space {
            return Err(GeometryError::SpaceMismatch(self.space, *space));
        }
        Ok(())
    }

    /// Recomputes the timelike coordinate so the point sits exactly on the sheet.
    fn renormalize(&mut self) {
        if let Space::Hyperboloid { dim, kappa } = self.space {
            let spatial = self.coords.rows(0, dim).norm_squared();
            self.coords[dim] = (1.0 / kappa + spatial).sqrt();
        }
    }
}

/// A tangent vector together with the point it is anchored at.
#[derive(Debug, Clone, PartialEq)]
pub struct Tangent {
    base: Point,
    comps: DVector<f64>,
}

impl Tangent {
    pub fn new(base: Point, comps: DVector<f64>) -> Result<Self, GeometryError> {
        let space = base.space;
        if comps.len() != space.ambient_dim() {
            return Err(GeometryError::Dimension { expected: space.ambient_dim(), got: comps.len() });
        }
        if comps.iter().any(|x| !x.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if let Space::Hyperboloid { .. } = space {
            let residual = space.ambient_inner(&base.coords, &comps).abs();
            let scale = base.coords.norm() * comps.norm();
            if residual > CONSTRAINT_TOL * scale.max(CONSTRAINT_TOL) {
                return Err(GeometryError::NotTangent { residual });
            }
        }
        Ok(Tangent { base, comps })
    }

    /// Orthogonal projection of an ambient vector onto `T_p M`.
    pub fn project(p: &Point, x: DVector<f64>) -> Self {
        let comps = match p.space {
            Space::Euclidean { .. } => x,
            Space::Hyperboloid { kappa, .. } => {
                let c = kappa * p.space.ambient_inner(&p.coords, &x);
                x + &p.coords * c
            }
        };
        Tangent { base: p.clone(), comps }
    }

    pub fn zero(p: &Point) -> Self {
        Tangent { base: p.clone(), comps: DVector::zeros(p.space.ambient_dim()) }
    }

    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn comps(&self) -> &DVector<f64> {
        &self.comps
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.comps.iter().copied().collect()
    }

    /// Riemannian inner product with a vector assumed to share the base point.
    pub(crate) fn dot(&self, other: &Tangent) -> f64 {
        self.base.space.ambient_inner(&self.comps, &other.comps)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).max(0.0).sqrt()
    }

    pub fn scaled(&self, a: f64) -> Tangent {
        Tangent { base: self.base.clone(), comps: &self.comps * a }
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(|&x| x == 0.0)
    }

    /// Unit vector in the same direction, or `None` for the zero vector.
    pub fn normalized(&self) -> Option<Tangent> {
        let n = self.norm();
        (n > 0.0).then(|| self.scaled(1.0 / n))
    }

    /// `self + other`.
    pub fn add(&self, other: &Tangent) -> Result<Tangent, GeometryError> {
        same_base(self, other)?;
        Ok(Tangent { base: self.base.clone(), comps: &self.comps + &other.comps })
    }

    /// `self - other`.
    pub fn sub(&self, other: &Tangent) -> Result<Tangent, GeometryError> {
        same_base(self, other)?;
        Ok(Tangent { base: self.base.clone(), comps: &self.comps - &other.comps })
    }

    /// Linear combination `Σ cᵢ vᵢ` of vectors anchored at `p`.
    pub fn combination(p: &Point, terms: &[(f64, &Tangent)]) -> Result<Tangent, GeometryError> {
        let mut comps = DVector::zeros(p.space.ambient_dim());
        for (c, v) in terms {
            if v.base != *p {
                return Err(GeometryError::Anchoring);
            }
            comps += &v.comps * *c;
        }
        Ok(Tangent { base: p.clone(), comps })
    }
}

fn same_base(u: &Tangent, v: &Tangent) -> Result<(), GeometryError> {
    if u.base.space != v.base.space {
        return Err(GeometryError::SpaceMismatch(u.base.space, v.base.space));
    }
    if u.base.coords != v.base.coords {
        return Err(GeometryError::Anchoring);
    }
    Ok(())
}

fn same_space(p: &Point, q: &Point) -> Result<(), GeometryError> {
    if p.space != q.space {
        return Err(GeometryError::SpaceMismatch(p.space, q.space));
    }
    Ok(())
}

/// Riemannian metric `⟨u, v⟩_p`; both vectors must be anchored at `p`.
pub fn inner(p: &Point, u: &Tangent, v: &Tangent) -> Result<f64, GeometryError> {
    same_space(p, &u.base)?;
    if u.base != *p || v.base != *p {
        return Err(GeometryError::Anchoring);
    }
    Ok(u.dot(v))
}

/// Exponential map `exp_p(v)`.
pub fn exp_map(p: &Point, v: &Tangent) -> Result<Point, GeometryError> {
    same_space(p, &v.base)?;
    if v.base != *p {
        return Err(GeometryError::Anchoring);
    }
    Ok(exp_unchecked(v))
}

pub(crate) fn exp_unchecked(v: &Tangent) -> Point {
    let p = &v.base;
    match p.space {
        Space::Euclidean { .. } => Point { space: p.space, coords: &p.coords + &v.comps },
        Space::Hyperboloid { kappa, .. } => {
            let theta = kappa.sqrt() * v.norm();
            let (c, s) = if theta < SMALL_NORM {
                (1.0 + 0.5 * theta * theta, 1.0 + theta * theta / 6.0)
            } else {
                (theta.cosh(), theta.sinh() / theta)
            };
            let mut q = Point { space: p.space, coords: &p.coords * c + &v.comps * s };
            q.renormalize();
            q
        }
    }
}

/// Geodesic distance.
pub fn dist(p: &Point, q: &Point) -> Result<f64, GeometryError> {
    same_space(p, q)?;
    Ok(dist_unchecked(p, q))
}

pub(crate) fn dist_unchecked(p: &Point, q: &Point) -> f64 {
    let w = &q.coords - &p.coords;
    match p.space {
        Space::Euclidean { .. } => w.norm(),
        Space::Hyperboloid { kappa, .. } => {
            let sk = kappa.sqrt();
            let cosh = -kappa * p.space.ambient_inner(&p.coords, &q.coords);
            if cosh >= 2.0 {
                return cosh.acosh() / sk;
            }
            // near the diagonal use the chord c = (2/√κ) sinh(√κ d / 2), which
            // does not lose digits the way acosh does close to 1
            let chord = p.space.ambient_inner(&w, &w).max(0.0).sqrt();
            2.0 / sk * (sk * chord / 2.0).asinh()
        }
    }
}

/// Logarithm map `log_p(q)`, the inverse of `exp_p`.
pub fn log_map(p: &Point, q: &Point) -> Result<Tangent, GeometryError> {
    same_space(p, q)?;
    Ok(log_unchecked(p, q))
}

pub(crate) fn log_unchecked(p: &Point, q: &Point) -> Tangent {
    let w = &q.coords - &p.coords;
    match p.space {
        Space::Euclidean { .. } => Tangent { base: p.clone(), comps: w },
        Space::Hyperboloid { .. } => {
            let u = Tangent::project(p, w);
            let n = u.norm();
            if n == 0.0 {
                return Tangent::zero(p);
            }
            let d = dist_unchecked(p, q);
            u.scaled(d / n)
        }
    }
}

/// Parallel transport of `v ∈ T_p M` to `T_q M` along the geodesic from `p` to `q`.
pub fn parallel_transport(p: &Point, q: &Point, v: &Tangent) -> Result<Tangent, GeometryError> {
    same_space(p, q)?;
    same_space(p, &v.base)?;
    if v.base != *p {
        return Err(GeometryError::Anchoring);
    }
    Ok(transport_unchecked(p, q, v))
}

pub(crate) fn transport_unchecked(p: &Point, q: &Point, v: &Tangent) -> Tangent {
    match p.space {
        Space::Euclidean { .. } => Tangent { base: q.clone(), comps: v.comps.clone() },
        Space::Hyperboloid { kappa, .. } => {
            let s = p.space;
            let num = kappa * s.ambient_inner(&q.coords, &v.comps);
            let den = 1.0 - kappa * s.ambient_inner(&p.coords, &q.coords);
            let comps = &v.comps + (&p.coords + &q.coords) * (num / den);
            Tangent { base: q.clone(), comps }
        }
    }
}

/// `d²(y,z) − [d²(x,y) + d²(x,z) − 2⟨log_x y, log_x z⟩]`, nonnegative on Hadamard spaces.
pub fn comparison_gap(x: &Point, y: &Point, z: &Point) -> Result<f64, GeometryError> {
    same_space(x, y)?;
    same_space(x, z)?;
    let lyz = dist_unchecked(y, z);
    let lxy = dist_unchecked(x, y);
    let lxz = dist_unchecked(x, z);
    let cross = log_unchecked(x, y).dot(&log_unchecked(x, z));
    Ok(lyz * lyz - (lxy * lxy + lxz * lxz - 2.0 * cross))
}

/// Point at parameter `t ∈ [0, 1]` on the geodesic segment from `p` to `q`.
pub fn geodesic_point(p: &Point, q: &Point, t: f64) -> Result<Point, GeometryError> {
    Ok(exp_unchecked(&log_map(p, q)?.scaled(t)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn h2() -> Space {
        Space::hyperboloid(2, 1.0).unwrap()
    }

    #[test]
    fn vertex_exp_matches_hyperbolic_functions() {
        let s = h2();
        let p = s.origin();
        let v = s.tangent(&p, &[1.0, 0.0, 0.0]).unwrap();
        let q = exp_map(&p, &v).unwrap();
        assert_abs_diff_eq!(q.coords()[0], 1f64.sinh(), epsilon = 1e-15);
        assert_abs_diff_eq!(q.coords()[1], 0.0);
        assert_abs_diff_eq!(q.coords()[2], 1f64.cosh(), epsilon = 1e-15);
        assert_abs_diff_eq!(dist(&p, &q).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn flat_maps_are_translations() {
        let s = Space::euclidean(2).unwrap();
        let p = s.point(&[1.0, 2.0]).unwrap();
        let v = s.tangent(&p, &[3.0, -1.0]).unwrap();
        assert_eq!(exp_map(&p, &v).unwrap().to_vec(), vec![4.0, 1.0]);
        let q = s.point(&[4.0, 6.0]).unwrap();
        assert_eq!(dist(&p, &q).unwrap(), 5.0);
        assert_eq!(log_map(&p, &q).unwrap().to_vec(), vec![3.0, 4.0]);
        assert_eq!(parallel_transport(&p, &q, &v).unwrap().to_vec(), v.to_vec());
    }

    #[test]
    fn curvature_rescales_distance() {
        let s = Space::hyperboloid(3, 4.0).unwrap();
        let p = s.origin();
        let v = s.tangent(&p, &[0.0, 0.7, 0.0, 0.0]).unwrap();
        let q = exp_map(&p, &v).unwrap();
        assert_abs_diff_eq!(dist(&p, &q).unwrap(), 0.7, epsilon = 1e-14);
        let back = log_map(&p, &q).unwrap();
        assert_abs_diff_eq!((back.comps() - v.comps()).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = h2();
        assert!(matches!(s.point(&[1.0, 0.0, 1.0]), Err(GeometryError::OffManifold { .. })));
        assert!(matches!(s.point(&[0.0, 0.0, -1.0]), Err(GeometryError::OffManifold { .. })));
        assert!(matches!(s.point(&[0.0, 1.0]), Err(GeometryError::Dimension { .. })));
        let p = s.origin();
        assert!(matches!(s.tangent(&p, &[0.0, 0.0, 1.0]), Err(GeometryError::NotTangent { .. })));
        let e = Space::euclidean(3).unwrap();
        assert!(matches!(dist(&p, &e.origin()), Err(GeometryError::SpaceMismatch(..))));
        let q = s.lift(&[0.3, 0.1]).unwrap();
        let v = Tangent::zero(&q);
        assert_eq!(exp_map(&p, &v), Err(GeometryError::Anchoring));
        assert!(Space::hyperboloid(2, 0.0).is_err());
        assert!(Space::euclidean(0).is_err());
    }

    #[test]
    fn tiny_vectors_do_not_lose_precision() {
        let s = h2();
        let p = s.lift(&[0.4, -1.2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in 1..12 {
            let r = 10f64.powi(-k);
            let v = s.random_unit_tangent(&mut rng, &p).scaled(r);
            let q = exp_map(&p, &v).unwrap();
            let d = dist(&p, &q).unwrap();
            assert!((d - r).abs() <= 1e-15 + 1e-12 * r, "r={r} d={d}");
            let back = log_map(&p, &q).unwrap();
            assert!((back.comps() - v.comps()).norm() <= 1e-14 + 1e-9 * r);
        }
    }

    #[test]
    fn basis_is_orthonormal() {
        let s = Space::hyperboloid(4, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = s.random_point(&mut rng, &s.origin(), 3.0);
        let b = s.tangent_basis(&p);
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(inner(&p, &b[i], &b[j]).unwrap(), expected, epsilon = 1e-10);
            }
        }
    }
}

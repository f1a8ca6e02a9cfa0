//! Objective oracles with certified Busemann subgradients.
//!
//! A vector `s ∈ T_q M` is a Busemann subgradient of `f` at `q` when
//! `f(p) ≥ f(q) + ‖s‖ B_{q,−s}(p)` for every `p`. The oracles in this module
//! only hand out vectors for which that inequality is known to hold; the
//! [`verify_b_subgradient`] sampler checks it empirically.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::busemann::{busemann_gradient, busemann_value, BusemannDirection, BusemannError};
use crate::manifold::{dist_unchecked, exp_unchecked, log_unchecked, GeometryError, Point, Space, Tangent};

/// Two members whose values differ by at most this much are both active in a max.
pub const ACTIVE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Busemann(#[from] BusemannError),
    #[error("no certified Busemann subgradient is available for {0}")]
    NoCertifiedSubgradient(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("common direction of the aligned family vanishes at this point")]
    DegenerateDirection,
}

/// Structured description of how an objective was built.
#[derive(Debug, Clone, PartialEq)]
pub enum Construction {
    /// `scale · d(·, anchor)^exponent + offset`.
    PowerDistance {
        anchor: Point,
        scale: f64,
        exponent: f64,
        offset: f64,
    },
    Busemann {
        direction: BusemannDirection,
    },
    Chain {
        inner: Box<Construction>,
        outer: String,
    },
    Aligned {
        aggregator: String,
        members: Vec<Construction>,
    },
    Max {
        members: Vec<Construction>,
    },
    /// A plain sum without a subgradient certificate.
    UncertifiedSum {
        members: Vec<Construction>,
    },
    Custom(String),
}

impl fmt::Display for Construction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Construction::PowerDistance { scale, exponent, offset, .. } => {
                write!(f, "{scale}·d(·,a)^{exponent} + {offset}")
            }
            Construction::Busemann { .. } => write!(f, "Busemann function"),
            Construction::Chain { inner, outer } => write!(f, "{outer}∘({inner})"),
            Construction::Aligned { aggregator, members } => {
                write!(f, "{aggregator} of {} aligned members", members.len())
            }
            Construction::Max { members } => write!(f, "max of {} members", members.len()),
            Construction::UncertifiedSum { members } => {
                write!(f, "uncertified sum of {} members", members.len())
            }
            Construction::Custom(name) => write!(f, "{name}"),
        }
    }
}

/// Value and Busemann-subgradient oracle of a convex objective.
pub trait ObjectiveOracle: Send + Sync + fmt::Debug {
    fn space(&self) -> Space;

    fn value(&self, p: &Point) -> Result<f64, OracleError>;

    /// A certified element of `∂ᵇf(p)`, chosen deterministically.
    fn b_subgradient(&self, p: &Point) -> Result<Tangent, OracleError>;

    /// The certified element nearest to `target`, when the oracle knows more
    /// than one element at `p`. Defaults to [`Self::b_subgradient`].
    fn nearest_b_subgradient(&self, p: &Point, target: &Tangent) -> Result<Tangent, OracleError> {
        let _ = target;
        self.b_subgradient(p)
    }

    /// Members whose pointwise maximum is this function, if it has that form.
    fn pieces(&self) -> Option<&[Objective]> {
        None
    }

    fn construction(&self) -> Construction;
}

pub type Objective = Arc<dyn ObjectiveOracle>;

fn check_space(f: &dyn ObjectiveOracle, p: &Point) -> Result<(), OracleError> {
    if f.space() != p.space() {
        return Err(GeometryError::SpaceMismatch(f.space(), p.space()).into());
    }
    Ok(())
}

/// `scale · d(·, anchor)^exponent + offset` with `scale ≥ 0`, `exponent ≥ 1`.
#[derive(Debug, Clone)]
pub struct PowerDistance {
    anchor: Point,
    scale: f64,
    exponent: f64,
    offset: f64,
}

impl PowerDistance {
    pub fn anchor(&self) -> &Point {
        &self.anchor
    }
}

/// `d(·, a)`.
pub fn distance_objective(anchor: &Point) -> Objective {
    Arc::new(PowerDistance { anchor: anchor.clone(), scale: 1.0, exponent: 1.0, offset: 0.0 })
}

/// `c · d(·, a)^τ + offset`.
pub fn power_distance(anchor: &Point, scale: f64, exponent: f64, offset: f64) -> Result<Objective, OracleError> {
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(OracleError::Parameter(format!("scale must be nonnegative, got {scale}")));
    }
    if !(exponent >= 1.0 && exponent.is_finite()) {
        return Err(OracleError::Parameter(format!("exponent must be at least 1, got {exponent}")));
    }
    if !offset.is_finite() {
        return Err(OracleError::Parameter("offset must be finite".into()));
    }
    Ok(Arc::new(PowerDistance { anchor: anchor.clone(), scale, exponent, offset }))
}

/// `½ d²(·, a)`.
pub fn half_squared_distance(anchor: &Point) -> Objective {
    Arc::new(PowerDistance { anchor: anchor.clone(), scale: 0.5, exponent: 2.0, offset: 0.0 })
}

impl ObjectiveOracle for PowerDistance {
    fn space(&self) -> Space {
        self.anchor.space()
    }

    fn value(&self, p: &Point) -> Result<f64, OracleError> {
        check_space(self, p)?;
        let d = dist_unchecked(p, &self.anchor);
        Ok(self.scale * d.powf(self.exponent) + self.offset)
    }

    fn b_subgradient(&self, p: &Point) -> Result<Tangent, OracleError> {
        check_space(self, p)?;
        let d = dist_unchecked(p, &self.anchor);
        if d == 0.0 {
            return Ok(Tangent::zero(p));
        }
        let c = self.scale * self.exponent * d.powf(self.exponent - 2.0);
        Ok(log_unchecked(p, &self.anchor).scaled(-c))
    }

    fn nearest_b_subgradient(&self, p: &Point, target: &Tangent) -> Result<Tangent, OracleError> {
        check_space(self, p)?;
        if self.exponent == 1.0 && dist_unchecked(p, &self.anchor) == 0.0 {
            // the whole ball of radius `scale` is certified at the anchor
            let n = target.norm();
            let t = Tangent::project(p, target.comps().clone());
            return Ok(if n <= self.scale { t } else { t.scaled(self.scale / n) });
        }
        self.b_subgradient(p)
    }

    fn construction(&self) -> Construction {
        Construction::PowerDistance {
            anchor: self.anchor.clone(),
            scale: self.scale,
            exponent: self.exponent,
            offset: self.offset,
        }
    }
}

/// `B_{q,v}` as an objective; a zero direction gives `d(q, ·)`.
#[derive(Debug, Clone)]
pub struct BusemannObjective {
    direction: BusemannDirection,
}

pub fn busemann_objective(direction: &BusemannDirection) -> Objective {
    if direction.is_zero() {
        return distance_objective(direction.base());
    }
    Arc::new(BusemannObjective { direction: direction.clone() })
}

impl ObjectiveOracle for BusemannObjective {
    fn space(&self) -> Space {
        self.direction.space()
    }

    fn value(&self, p: &Point) -> Result<f64, OracleError> {
        Ok(busemann_value(&self.direction, p)?)
    }

    fn b_subgradient(&self, p: &Point) -> Result<Tangent, OracleError> {
        Ok(busemann_gradient(&self.direction, p)?)
    }

    fn construction(&self) -> Construction {
        Construction::Busemann { direction: self.direction.clone() }
    }
}

/// A user-supplied convex nondecreasing scalar function.
pub trait ScalarFn: Send + Sync + fmt::Debug {
    fn value(&self, t: f64) -> f64;
    /// Endpoints of the subdifferential at `t`; both must be nonnegative.
    fn subderivative(&self, t: f64) -> (f64, f64);
}

/// Convex nondecreasing functions `ℝ → ℝ`.
#[derive(Debug, Clone)]
pub enum Scalar {
    Identity,
    Affine {
        slope: f64,
        intercept: f64,
    },
    /// `weight · max(0, t − level) + offset`.
    Hinge {
        weight: f64,
        level: f64,
        offset: f64,
    },
    /// `weight · max(0, t − level)²`.
    SquaredHinge {
        weight: f64,
        level: f64,
    },
    /// `weight · max(0, t)^exponent`.
    Power {
        weight: f64,
        exponent: f64,
    },
    Exp,
    Custom(Arc<dyn ScalarFn>),
}

impl Scalar {
    pub fn validate(&self) -> Result<(), OracleError> {
        let bad = |msg: String| Err(OracleError::Parameter(msg));
        match *self {
            Scalar::Affine { slope, .. } if !(slope >= 0.0) => bad(format!("slope {slope} < 0")),
            Scalar::Hinge { weight, .. } | Scalar::SquaredHinge { weight, .. } if !(weight >= 0.0) => {
                bad(format!("weight {weight} < 0"))
            }
            Scalar::Power { weight, exponent } if !(weight >= 0.0 && exponent >= 1.0) => {
                bad(format!("power needs weight ≥ 0 and exponent ≥ 1, got {weight}, {exponent}"))
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Scalar::Identity => t,
            Scalar::Affine { slope, intercept } => slope * t + intercept,
            Scalar::Hinge { weight, level, offset } => weight * (t - level).max(0.0) + offset,
            Scalar::SquaredHinge { weight, level } => weight * (t - level).max(0.0).powi(2),
            Scalar::Power { weight, exponent } => weight * t.max(0.0).powf(*exponent),
            Scalar::Exp => t.exp(),
            Scalar::Custom(f) => f.value(t),
        }
    }

    /// Endpoints `[lo, hi]` of the subdifferential at `t`.
    pub fn subderivative(&self, t: f64) -> Result<(f64, f64), OracleError> {
        let (lo, hi) = match self {
            Scalar::Identity => (1.0, 1.0),
            Scalar::Affine { slope, .. } => (*slope, *slope),
            Scalar::Hinge { weight, level, .. } => {
                if t > *level {
                    (*weight, *weight)
                } else if t < *level {
                    (0.0, 0.0)
                } else {
                    (0.0, *weight)
                }
            }
            Scalar::SquaredHinge { weight, level } => {
                let d = 2.0 * weight * (t - level).max(0.0);
                (d, d)
            }
            Scalar::Power { weight, exponent } => {
                if t <= 0.0 {
                    if *exponent == 1.0 && t == 0.0 {
                        (0.0, *weight)
                    } else {
                        (0.0, 0.0)
                    }
                } else {
                    let d = weight * exponent * t.powf(exponent - 1.0);
                    (d, d)
                }
            }
            Scalar::Exp => (t.exp(), t.exp()),
            Scalar::Custom(f) => f.subderivative(t),
        };
        if !(lo >= 0.0 && hi >= lo) {
            return Err(OracleError::Contract(format!(
                "scalar function must be nondecreasing, got subderivative [{lo}, {hi}] at {t}"
            )));
        }
        Ok((lo, hi))
    }

    fn name(&self) -> String {
        match self {
            Scalar::Identity => "id".into(),
            Scalar::Affine { slope, intercept } => format!("{slope}·t+{intercept}"),
            Scalar::Hinge { weight, level, offset } => format!("{weight}·(t-{level})₊+{offset}"),
            Scalar::SquaredHinge { weight, level } => format!("{weight}·(t-{level})₊²"),
            Scalar::Power { weight, exponent } => format!("{weight}·t₊^{exponent}"),
            Scalar::Exp => "exp".into(),
            Scalar::Custom(f) => format!("{f:?}"),
        }
    }
}

/// `φ ∘ h` for a convex nondecreasing `φ`.
#[derive(Debug, Clone)]
pub struct ScalarChain {
    inner: Objective,
    outer: Scalar,
}

pub fn scalar_chain(inner: Objective, outer: Scalar) -> Result<Objective, OracleError> {
    outer.validate()?;
    Ok(Arc::new(ScalarChain { inner, outer }))
}

impl ObjectiveOracle for ScalarChain {
    fn space(&self) -> Space {
        self.inner.space()
    }

    fn value(&self, p: &Point) -> Result<f64, OracleError> {
        Ok(self.outer.value(self.inner.value(p)?))
    }

    fn b_subgradient(&self, p: &Point) -> Result<Tangent, OracleError> {
        let (lo, _) = self.outer.subderivative(self.inner.value(p)?)?;
        Ok(self.inner.b_subgradient(p)?.scaled(lo))
    }

    fn nearest_b_subgradient(&self, p: &Point, target: &Tangent) -> Result<Tangent, OracleError> {
        let (lo, hi) = self.outer.subderivative(self.inner.value(p)?)?;
        let s = self.inner.nearest_b_subgradient(p, target)?;
        let ss = s.dot(&s);
        let a = if ss > 0.0 { (s.dot(target) / ss).clamp(lo, hi) } else { lo };
        Ok(s.scaled(a))
    }

    fn construction(&self) -> Construction {
        Construction::Chain { inner: Box::new(self.inner.construction()), outer: self.outer.name() }
    }
}

/// Pointwise maximum of finitely many objectives.
#[derive(Debug, Clone)]
pub struct MaxObjective {
    members: Vec<Objective>,
}

pub fn max_objective(members: Vec<Objective>) -> Result<Objective, OracleError> {
    if members.is_empty() {
        return Err(OracleError::Parameter("max over an empty family".into()));
    }
    let space = members[0].space();
    if let Some(m) = members.iter().find(|m| m.space() != space) {
        return Err(GeometryError::SpaceMismatch(space, m.space()).into());
    }
    Ok(Arc::new(MaxObjective { members }))
}

impl MaxObjective {
    fn values(&self, p: &Point) -> Result<Vec<f64>, OracleError> {
        self.members.iter().map(|m| m.value(p)).collect()
    }

    fn active(&self, p: &Point) -> Result<Vec<usize>, OracleError> {
        let vals = self.values(p)?;
        let top = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok((0..vals.len()).filter(|&i| vals[i] >= top - ACTIVE_TOL).collect())
    }
}

impl ObjectiveOracle for MaxObjective {
    fn space(&self) -> Space {
        self.members[0].space()
    }

    fn value(&self, p: &Point) -> Result<f64, OracleError> {
        Ok(self.values(p)?.into_iter().fold(f64::NEG_INFINITY, f64::max))
    }

    /// Subgradient of the lowest-index active member.
    fn b_subgradient(&self, p: &Point) -> Result<Tangent, OracleError> {
        let i = self.active(p)?[0];
        self.members[i].b_subgradient(p)
    }

    /// Nearest point to `target` in the convex hull of the active members'
    /// subgradients.
    fn nearest_b_subgradient(&self, p: &Point, target: &Tangent) -> Result<Tangent, OracleError> {
        let gens = self
            .active(p)?
            .into_iter()
            .map(|i| self.members[i].nearest_b_subgradient(p, target))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(nearest_in_hull(target, &gens)?.0)
    }

    fn pieces(&self) -> Option<&[Objective]> {
        Some(&self.members)
    }

    fn construction(&self) -> Construction {
        Construction::Max { members: self.members.iter().map(|m| m.construction()).collect() }
    }
}

/// Smallest enclosing ball objective `max_j d(·, a_j)`.
pub fn max_of_distances(anchors: &[Point]) -> Result<Objective, OracleError> {
    max_objective(anchors.iter().map(distance_objective).collect())
}

/// `max_j d²(·, a_j)`.
pub fn max_of_squared_distances(anchors: &[Point]) -> Result<Objective, OracleError> {
    max_objective(anchors.iter().map(|a| power_distance(a, 1.0, 2.0, 0.0)).collect::<Result<_, _>>()?)
}

/// Weighted cover `max_j (d(·, a_j) + ρ_j)`.
pub fn weighted_cover(anchors: &[Point], radii: &[f64]) -> Result<Objective, OracleError> {
    if anchors.len() != radii.len() {
        return Err(OracleError::Parameter(format!("{} anchors but {} radii", anchors.len(), radii.len())));
    }
    max_objective(anchors.iter().zip(radii).map(|(a, r)| power_distance(a, 1.0, 1.0, *r)).collect::<Result<_, _>>()?)
}

/// Plain sum of objectives. Its value is available but no subgradient is
/// certified: sums of Busemann-convex functions need not have any.
#[derive(Debug, Clone)]
pub struct UncertifiedSum {
    members: Vec<Objective>,
}

pub fn uncertified_sum(members: Vec<Objective>) -> Objective {
    Arc::new(UncertifiedSum { members })
}

impl UncertifiedSum {
    pub fn members(&self) -> &[Objective] {
        &self.members
    }
}

impl ObjectiveOracle for UncertifiedSum {
    fn space(&self) -> Space {
        self.members[0].space()
    }

    fn value(&self, p: &Point) -> Result<f64, OracleError> {
        self.members.iter().map(|m| m.value(p)).sum()
    }

    fn b_subgradient(&self, _p: &Point) -> Result<Tangent, OracleError> {
        Err(OracleError::NoCertifiedSubgradient(self.construction().to_string()))
    }

    fn construction(&self) -> Construction {
        Construction::UncertifiedSum { members: self.members.iter().map(|m| m.construction()).collect() }
    }
}

/// Monotone aggregation maps `ℝᵐ → ℝ`.
#[derive(Debug, Clone)]
pub enum Aggregator {
    Max,
    /// `Σ ψ_j(g_j)`.
    SeparableSum(Vec<Scalar>),
    /// `τ log Σ exp(g_j / τ)`.
    LogSumExp {
        temperature: f64,
    },
    /// `‖max(g, 0)‖_r`.
    LrNorm {
        r: f64,
    },
}

impl Aggregator {
    pub fn validate(&self, m: usize) -> Result<(), OracleError> {
        match self {
            Aggregator::SeparableSum(psis) => {
                if psis.len() != m {
                    return Err(OracleError::Parameter(format!("{} functions for {m} members", psis.len())));
                }
                psis.iter().try_for_each(Scalar::validate)
            }
            Aggregator::LogSumExp { temperature } if !(*temperature > 0.0) => {
                Err(OracleError::Parameter(format!("temperature must be positive, got {temperature}")))
            }
            Aggregator::LrNorm { r } if !(*r >= 1.0) => {
                Err(OracleError::Parameter(format!("norm exponent must be at least 1, got {r}")))
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, g: &[f64]) -> f64 {
        match self {
            Aggregator::Max => g.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Aggregator::SeparableSum(psis) => psis.iter().zip(g).map(|(p, x)| p.value(*x)).sum(),
            Aggregator::LogSumExp { temperature } => {
                let top = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let s: f64 = g.iter().map(|x| ((x - top) / temperature).exp()).sum();
                top + temperature * s.ln()
            }
            Aggregator::LrNorm { r } => g.iter().map(|x| x.max(0.0).powf(*r)).sum::<f64>().powf(1.0 / r),
        }
    }

    /// A weight vector in `∂Φ(g)`.
    pub fn weights(&self, g: &[f64]) -> Result<Vec<f64>, OracleError> {
        let m = g.len();
        Ok(match self {
            Aggregator::Max => {
                let top = self.value(g);
                let i = (0..m).find(|&i| g[i] >= top - ACTIVE_TOL).unwrap_or(0);
                let mut w = vec![0.0; m];
                w[i] = 1.0;
                w
            }
            Aggregator::SeparableSum(psis) => {
                psis.iter().zip(g).map(|(p, x)| p.subderivative(*x).map(|d| d.0)).collect::<Result<_, _>>()?
            }
            Aggregator::LogSumExp { temperature } => {
                let top = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = g.iter().map(|x| ((x - top) / temperature).exp()).collect();
                let s: f64 = e.iter().sum();
                e.into_iter().map(|x| x / s).collect()
            }
            Aggregator::LrNorm { r } => {
                let norm = self.value(g);
                if norm == 0.0 {
                    vec![0.0; m]
                } else {
                    g.iter().map(|x| (x.max(0.0) / norm).powf(r - 1.0)).collect()
                }
            }
        })
    }

    fn name(&self) -> &'static str {
        match self {
            Aggregator::Max => "max",
            Aggregator::SeparableSum(_) => "separable sum",
            Aggregator::LogSumExp { .. } => "log-sum-exp",
            Aggregator::LrNorm { .. } => "l_r norm",
        }
    }
}

type DirectionFn = Arc<dyn Fn(&Point) -> Result<Tangent, OracleError> + Send + Sync>;
type CoefficientFn = Arc<dyn Fn(&Point) -> Result<Vec<(f64, f64)>, OracleError> + Send + Sync>;

/// Members `g_j` whose subgradients at every point are nonnegative multiples
/// `α_j u(p)` of one common direction.
///
/// `coefficients(p)` returns for each member an interval `[lo, hi]` of
/// admissible multiples, already scaled so that `α_j u/‖u‖` is certified.
#[derive(Clone)]
pub struct AlignedFamily {
    pub members: Vec<Objective>,
    pub direction: DirectionFn,
    pub coefficients: CoefficientFn,
}

impl fmt::Debug for AlignedFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AlignedFamily").field("members", &self.members).finish_non_exhaustive()
    }
}

impl AlignedFamily {
    /// Members `ψ_j ∘ B_{q,v}` sharing the Busemann gradient as direction.
    pub fn busemann_backbone(direction: &BusemannDirection, psis: Vec<Scalar>) -> Result<Self, OracleError> {
        if direction.is_zero() {
            return Err(BusemannError::ZeroDirection.into());
        }
        let base = busemann_objective(direction);
        let members = psis.iter().map(|psi| scalar_chain(base.clone(), psi.clone())).collect::<Result<Vec<_>, _>>()?;
        let d1 = direction.clone();
        let d2 = direction.clone();
        Ok(AlignedFamily {
            members,
            direction: Arc::new(move |p| Ok(busemann_gradient(&d1, p)?)),
            coefficients: Arc::new(move |p| {
                let b = busemann_value(&d2, p)?;
                psis.iter().map(|psi| psi.subderivative(b)).collect()
            }),
        })
    }
}

/// `Φ(g_1, …, g_m)` over an aligned family.
#[derive(Debug, Clone)]
pub struct AlignedAggregate {
    family: AlignedFamily,
    aggregator: Aggregator,
}

pub fn aligned_aggregate(family: AlignedFamily, aggregator: Aggregator) -> Result<Objective, OracleError> {
    if family.members.is_empty() {
        return Err(OracleError::Parameter("aligned family is empty".into()));
    }
    aggregator.validate(family.members.len())?;
    Ok(Arc::new(AlignedAggregate { family, aggregator }))
}

impl AlignedAggregate {
    /// Unit direction and the admissible range of the total multiple.
    fn multiple_range(&self, p: &Point) -> Result<(Tangent, f64, f64), OracleError> {
        let g = self.member_values(p)?;
        let w = self.aggregator.weights(&g)?;
        let alphas = (self.family.coefficients)(p)?;
        if alphas.len() != w.len() {
            return Err(OracleError::Contract("coefficient count differs from member count".into()));
        }
        let mut lo = 0.0;
        let mut hi = 0.0;
        for (wj, (a_lo, a_hi)) in w.iter().zip(&alphas) {
            if *a_lo < 0.0 || *wj < 0.0 {
                return Err(OracleError::Contract("negative weight or coefficient".into()));
            }
            lo += wj * a_lo;
            hi += wj * a_hi;
        }
        let u = (self.family.direction)(p)?;
        let Some(unit) = u.normalized() else {
            if hi == 0.0 {
                return Ok((Tangent::zero(p), 0.0, 0.0));
            }
            return Err(OracleError::DegenerateDirection);
        };
        Ok((unit, lo, hi))
    }

    fn member_values(&self, p: &Point) -> Result<Vec<f64>, OracleError> {
        self.family.members.iter().map(|m| m.value(p)).collect()
    }
}

impl ObjectiveOracle for AlignedAggregate {
    fn space(&self) -> Space {
        self.family.members[0].space()
    }

    fn value(&self, p: &Point) -> Result<f64, OracleError> {
        Ok(self.aggregator.value(&self.member_values(p)?))
    }

    fn b_subgradient(&self, p: &Point) -> Result<Tangent, OracleError> {
        let (unit, lo, _) = self.multiple_range(p)?;
        Ok(unit.scaled(lo))
    }

    fn nearest_b_subgradient(&self, p: &Point, target: &Tangent) -> Result<Tangent, OracleError> {
        let (unit, lo, hi) = self.multiple_range(p)?;
        Ok(unit.scaled(unit.dot(target).clamp(lo, hi)))
    }

    fn construction(&self) -> Construction {
        Construction::Aligned {
            aggregator: self.aggregator.name().into(),
            members: self.family.members.iter().map(|m| m.construction()).collect(),
        }
    }
}

/// Point of the convex hull of `gens` nearest to `target`, with its weights.
pub fn nearest_in_hull(target: &Tangent, gens: &[Tangent]) -> Result<(Tangent, Vec<f64>), GeometryError> {
    let p = target.base();
    let shifted = gens.iter().map(|g| g.sub(target)).collect::<Result<Vec<_>, _>>()?;
    let m = gens.len();
    let gram = DMatrix::from_fn(m, m, |i, j| shifted[i].dot(&shifted[j]));
    let lambda = min_norm_in_hull(&gram);
    let terms: Vec<(f64, &Tangent)> = lambda.iter().copied().zip(gens.iter()).collect();
    Ok((Tangent::combination(p, &terms)?, lambda))
}

/// Wolfe's minimum-norm-point iteration, expressed through the Gram matrix of
/// the generators. Returns barycentric weights.
fn min_norm_in_hull(gram: &DMatrix<f64>) -> Vec<f64> {
    let m = gram.nrows();
    if m == 1 {
        return vec![1.0];
    }
    let scale = gram.diagonal().max().max(1e-300);
    let start = (0..m).min_by(|&a, &b| gram[(a, a)].total_cmp(&gram[(b, b)])).unwrap();
    let mut lambda = DVector::zeros(m);
    lambda[start] = 1.0;
    let mut support = vec![start];
    for _ in 0..50 * m {
        let g_lambda = gram * &lambda;
        let norm2 = lambda.dot(&g_lambda);
        let j = (0..m).min_by(|&a, &b| g_lambda[a].total_cmp(&g_lambda[b])).unwrap();
        if norm2 - g_lambda[j] <= 1e-15 * scale || support.contains(&j) {
            break;
        }
        support.push(j);
        loop {
            let mu = affine_minimizer(gram, &support);
            if support.iter().all(|&i| mu[i] > 1e-15) {
                lambda = mu;
                break;
            }
            let theta = support
                .iter()
                .filter(|&&i| mu[i] <= 1e-15)
                .map(|&i| lambda[i] / (lambda[i] - mu[i]))
                .fold(1.0f64, f64::min);
            lambda = &lambda * (1.0 - theta) + mu * theta;
            support.retain(|&i| lambda[i] > 1e-15);
            for i in 0..m {
                if !support.contains(&i) {
                    lambda[i] = 0.0;
                }
            }
            let s: f64 = lambda.sum();
            lambda /= s;
            if support.len() == 1 {
                break;
            }
        }
    }
    lambda.iter().map(|x| x.max(0.0)).collect()
}

/// Minimizer of `λᵀGλ` on the affine hull of the support (`Σλ = 1`).
fn affine_minimizer(gram: &DMatrix<f64>, support: &[usize]) -> DVector<f64> {
    let k = support.len();
    let mut a = DMatrix::zeros(k + 1, k + 1);
    let mut rhs = DVector::zeros(k + 1);
    for (r, &i) in support.iter().enumerate() {
        for (c, &j) in support.iter().enumerate() {
            a[(r, c)] = gram[(i, j)];
        }
        a[(r, k)] = 1.0;
        a[(k, r)] = 1.0;
    }
    rhs[k] = 1.0;
    let sol = a
        .clone()
        .lu()
        .solve(&rhs)
        .filter(|s| s.iter().all(|x| x.is_finite()))
        .unwrap_or_else(|| a.svd(true, true).solve(&rhs, 1e-14).unwrap_or_else(|_| rhs.clone()));
    let mut mu = DVector::zeros(gram.nrows());
    for (r, &i) in support.iter().enumerate() {
        mu[i] = sol[r];
    }
    mu
}

/// Sample design for [`verify_b_subgradient`].
#[derive(Debug, Clone)]
pub struct SampleSpec {
    pub seed: u64,
    /// Random points `exp_q(r u)` with `u` uniform and `r` uniform in `[0, radius]`.
    pub count: usize,
    pub radius: f64,
    /// Extra directions at `q`, sampled along their rays.
    pub rays: Vec<Tangent>,
    pub ray_times: Vec<f64>,
    /// Violations smaller than this are attributed to rounding.
    pub tolerance: f64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec { seed: 0, count: 10_000, radius: 5.0, rays: Vec::new(), ray_times: Vec::new(), tolerance: 1e-9 }
    }
}

/// Outcome of a sampled subgradient check.
#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Holds { samples: usize, min_gap: f64 },
    Violated { witness: Point, gap: f64 },
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds { .. })
    }
}

fn sample_points(q: &Point, spec: &SampleSpec) -> Vec<Point> {
    let space = q.space();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut pts = vec![q.clone()];
    pts.extend((0..spec.count).map(|_| space.random_point(&mut rng, q, spec.radius)));
    for u in &spec.rays {
        let u = Tangent::project(q, u.comps().clone());
        if let Some(unit) = u.normalized() {
            pts.extend(spec.ray_times.iter().map(|t| exp_unchecked(&unit.scaled(*t))));
        }
    }
    pts
}

fn verify_with<F>(q: &Point, spec: &SampleSpec, mut gap_at: F) -> Result<Verdict, OracleError>
where
    F: FnMut(&Point) -> Result<f64, OracleError>,
{
    let pts = sample_points(q, spec);
    let mut worst: Option<(f64, &Point)> = None;
    for p in &pts {
        let gap = gap_at(p)?;
        if worst.is_none_or(|(w, _)| gap < w) {
            worst = Some((gap, p));
        }
    }
    let (gap, witness) = worst.expect("at least q itself is sampled");
    if gap < -spec.tolerance {
        Ok(Verdict::Violated { witness: witness.clone(), gap })
    } else {
        Ok(Verdict::Holds { samples: pts.len(), min_gap: gap })
    }
}

/// Checks `f(p) ≥ f(q) + ‖s‖ B_{q,−s}(p)` on sampled points `p`.
pub fn verify_b_subgradient(
    f: &dyn ObjectiveOracle,
    q: &Point,
    s: &Tangent,
    spec: &SampleSpec,
) -> Result<Verdict, OracleError> {
    if s.base() != q {
        return Err(GeometryError::Anchoring.into());
    }
    let fq = f.value(q)?;
    let ray = BusemannDirection::from_tangent(s.scaled(-1.0));
    let ns = s.norm();
    verify_with(q, spec, |p| {
        let b = if ns == 0.0 { 0.0 } else { ns * busemann_value(&ray, p)? };
        Ok(f.value(p)? - fq - b)
    })
}

/// Checks the Riemannian subgradient inequality `f(p) ≥ f(q) + ⟨s, log_q p⟩`.
pub fn verify_classical_subgradient(
    f: &dyn ObjectiveOracle,
    q: &Point,
    s: &Tangent,
    spec: &SampleSpec,
) -> Result<Verdict, OracleError> {
    if s.base() != q {
        return Err(GeometryError::Anchoring.into());
    }
    let fq = f.value(q)?;
    verify_with(q, spec, |p| Ok(f.value(p)? - fq - s.dot(&log_unchecked(q, p))))
}

/// Closed forms for the two-ray and two-anchor constructions in hyperbolic
/// space (`κ = 1`) where the sum of two Busemann-convex functions has no
/// Busemann subgradient at the common base point.
pub mod counterexample {
    /// `B_{q,v₁} + B_{q,v₂}` along `γ_{v₁}(t)`, where `α = ⟨v₁, v₂⟩`.
    pub fn busemann_sum_on_ray(alpha: f64, t: f64) -> f64 {
        ((1.0 - alpha) / 2.0 + (1.0 + alpha) / 2.0 * (-2.0 * t).exp()).ln()
    }

    /// For the sum of distances to `a_i = exp_q(t v_i)`: `2 cosh d(a_1, a_2) e^{−2t}`,
    /// an upper bound on `exp(f(a_i) − f(q))`.
    pub fn distance_sum_ratio(alpha: f64, t: f64) -> f64 {
        (1.0 - alpha) / 2.0 + (1.0 + alpha) * (-2.0 * t).exp() + (1.0 - alpha) / 2.0 * (-4.0 * t).exp()
    }

    /// `ln((1 − cos(θ/2))/2)` with `θ = arccos α`: the worst value of
    /// `ln((1 + β*)/2)` over unit directions `u`, where `β*` is the larger of
    /// `⟨u, v₁⟩` and `⟨u, v₂⟩`.
    pub fn worst_alignment_log(alpha: f64) -> f64 {
        let half = alpha.clamp(-1.0, 1.0).acos() / 2.0;
        ((1.0 - half.cos()) / 2.0).ln()
    }

    /// Smallest `t` beyond which every candidate subgradient is refuted at one
    /// of the two anchors: the ratio must drop below one and `t` must exceed
    /// `−worst_alignment_log(α)`.
    pub fn distance_sum_threshold(alpha: f64) -> f64 {
        // solve (1-α)/2 y² + (1+α) y + (1-α)/2 - 1 = 0 for y = e^{-2t}
        let a = (1.0 - alpha) / 2.0;
        let b = 1.0 + alpha;
        let c = (1.0 - alpha) / 2.0 - 1.0;
        let y = if a.abs() < 1e-300 { -c / b } else { (-b + (b * b - 4.0 * a * c).sqrt()) / (2.0 * a) };
        let t_ratio = -y.ln() / 2.0;
        t_ratio.max(-worst_alignment_log(alpha))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn h2() -> Space {
        Space::hyperboloid(2, 1.0).unwrap()
    }

    #[test]
    fn distance_subgradient_points_away_from_anchor() {
        let s = h2();
        let a = s.origin();
        let p = s.lift(&[1.0, 0.0]).unwrap();
        let f = distance_objective(&a);
        let g = f.b_subgradient(&p).unwrap();
        let expected = log_unchecked(&p, &a).scaled(-1.0 / dist_unchecked(&p, &a));
        assert_abs_diff_eq!((g.comps() - expected.comps()).norm(), 0.0, epsilon = 1e-15);
        assert!(f.b_subgradient(&a).unwrap().is_zero());
    }

    #[test]
    fn anchor_ball_is_reachable() {
        let s = h2();
        let a = s.origin();
        let f = distance_objective(&a);
        let t = s.tangent(&a, &[0.3, 0.4, 0.0]).unwrap();
        assert_eq!(f.nearest_b_subgradient(&a, &t).unwrap(), t);
        let big = t.scaled(10.0);
        assert_abs_diff_eq!(f.nearest_b_subgradient(&a, &big).unwrap().norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn max_breaks_ties_toward_lowest_index() {
        let s = Space::euclidean(2).unwrap();
        let a1 = s.point(&[-1.0, 0.0]).unwrap();
        let a2 = s.point(&[1.0, 0.0]).unwrap();
        let f = max_of_distances(&[a1, a2]).unwrap();
        let mid = s.origin();
        assert_eq!(f.value(&mid).unwrap(), 1.0);
        assert_eq!(f.b_subgradient(&mid).unwrap().to_vec(), vec![1.0, 0.0]);
        let zero = Tangent::zero(&mid);
        assert_abs_diff_eq!(f.nearest_b_subgradient(&mid, &zero).unwrap().norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn hull_projection_matches_segment_formula() {
        let s = Space::euclidean(2).unwrap();
        let p = s.origin();
        let g1 = s.tangent(&p, &[1.0, 1.0]).unwrap();
        let g2 = s.tangent(&p, &[1.0, -1.0]).unwrap();
        let target = s.tangent(&p, &[0.0, 0.5]).unwrap();
        let (x, lambda) = nearest_in_hull(&target, &[g1.clone(), g2.clone()]).unwrap();
        assert_abs_diff_eq!(x.comps()[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(x.comps()[1], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(lambda[0], 0.75, epsilon = 1e-14);
        let far = s.tangent(&p, &[5.0, 9.0]).unwrap();
        let (y, _) = nearest_in_hull(&far, &[g1.clone(), g2]).unwrap();
        assert_eq!(y.to_vec(), g1.to_vec());
    }

    #[test]
    fn hull_projection_in_three_generators() {
        let s = Space::euclidean(2).unwrap();
        let p = s.origin();
        let gens: Vec<Tangent> =
            [[1.0, 0.0], [-0.5, 0.8], [-0.5, -0.8]].iter().map(|c| s.tangent(&p, c).unwrap()).collect();
        let target = s.tangent(&p, &[0.1, 0.05]).unwrap();
        let (x, lambda) = nearest_in_hull(&target, &gens).unwrap();
        assert_abs_diff_eq!((x.comps() - target.comps()).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(lambda.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn chain_rejects_decreasing_outer() {
        assert!(Scalar::Affine { slope: -1.0, intercept: 0.0 }.validate().is_err());
        #[derive(Debug)]
        struct Neg;
        impl ScalarFn for Neg {
            fn value(&self, t: f64) -> f64 {
                -t
            }
            fn subderivative(&self, _: f64) -> (f64, f64) {
                (-1.0, -1.0)
            }
        }
        let s = h2();
        let f = scalar_chain(distance_objective(&s.origin()), Scalar::Custom(Arc::new(Neg))).unwrap();
        assert!(matches!(f.b_subgradient(&s.lift(&[1.0, 0.0]).unwrap()), Err(OracleError::Contract(_))));
    }

    #[test]
    fn uncertified_sum_refuses() {
        let s = h2();
        let f =
            uncertified_sum(vec![distance_objective(&s.origin()), distance_objective(&s.lift(&[1.0, 0.0]).unwrap())]);
        assert!(matches!(f.b_subgradient(&s.origin()), Err(OracleError::NoCertifiedSubgradient(_))));
    }

    #[test]
    fn aggregator_weights() {
        let lse = Aggregator::LogSumExp { temperature: 0.5 };
        let w = lse.weights(&[1.0, 1.0, 1.0]).unwrap();
        assert!(w.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
        assert_abs_diff_eq!(lse.value(&[0.0, 0.0]), 0.5 * 2f64.ln(), epsilon = 1e-15);
        let l2 = Aggregator::LrNorm { r: 2.0 };
        assert_eq!(l2.value(&[3.0, -1.0, 4.0]), 5.0);
        assert_eq!(l2.weights(&[3.0, -1.0, 4.0]).unwrap(), vec![0.6, 0.0, 0.8]);
        assert_eq!(Aggregator::Max.weights(&[2.0, 2.0]).unwrap(), vec![1.0, 0.0]);
        assert!(Aggregator::LogSumExp { temperature: 0.0 }.validate(2).is_err());
    }

    #[test]
    fn threshold_for_orthogonal_rays() {
        let t = counterexample::distance_sum_threshold(0.0);
        let expected = -((1.0 - std::f64::consts::FRAC_1_SQRT_2) / 2.0f64).ln();
        assert_abs_diff_eq!(t, expected, epsilon = 1e-12);
        assert!(counterexample::distance_sum_ratio(0.0, t) < 1.0);
    }
}

//! Problem files: TOML with `[manifold]`, `[objective]` and `[solver]` tables.

use std::path::Path;

use horoprox::bsubdiff::{
    aligned_aggregate, busemann_objective, distance_objective, half_squared_distance, max_objective, max_of_distances,
    max_of_squared_distances, power_distance, uncertified_sum, weighted_cover, Aggregator, AlignedFamily, Objective,
    Scalar,
};
use horoprox::busemann::BusemannDirection;
use horoprox::manifold::{geodesic_point, log_map, Point, Space};
use horoprox::solver::{bhppm, InnerConfig, InnerMethod, MuSchedule, SolverConfig, StepRule, Terminal};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

/// Tolerance on the Lorentz constraint for coordinates read from a file.
pub const INPUT_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("{field}: {message}")]
    Field { field: String, message: String },
}

fn field_err(field: impl Into<String>, message: impl Into<String>) -> ProblemError {
    ProblemError::Field { field: field.into(), message: message.into() }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub manifold: ManifoldSection,
    pub objective: ObjectiveSection,
    #[serde(default)]
    pub solver: SolverSection,
    pub initial_point: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSection {
    pub kind: String,
    pub dim: usize,
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSection {
    pub kind: String,
    pub anchors: Option<Vec<Vec<f64>>>,
    pub weights: Option<Vec<f64>>,
    pub levels: Option<Vec<f64>>,
    pub temperature: Option<f64>,
    pub exponent: Option<f64>,
    pub offsets: Option<Vec<f64>>,
    pub aggregator: Option<String>,
    pub backbone_base: Option<Vec<f64>>,
    pub backbone_direction: Option<Vec<f64>>,
    pub directions: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MuValue {
    Constant(f64),
    Sequence(Vec<f64>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub sigma: f64,
    pub rho: f64,
    pub mu: MuValue,
    pub max_outer_iters: usize,
    pub stop_tol: f64,
    pub inner: InnerSection,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            sigma: 0.5,
            rho: 0.0,
            mu: MuValue::Constant(1.0),
            max_outer_iters: 200,
            stop_tol: 1e-8,
            inner: InnerSection::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InnerSection {
    pub t_max: usize,
    pub step_rule: String,
    pub alpha: Option<f64>,
    pub backtrack: f64,
    pub sufficient_decrease: f64,
    pub polish: bool,
}

impl Default for InnerSection {
    fn default() -> Self {
        InnerSection {
            t_max: 1000,
            step_rule: "inverse_sqrt".into(),
            alpha: None,
            backtrack: 0.5,
            sufficient_decrease: 1e-4,
            polish: true,
        }
    }
}

/// Validated objective description.
#[derive(Debug, Clone)]
pub enum ObjectiveSpec {
    /// `max_j (c_j d(·, a_j)^τ + o_j)`.
    PowerDistance {
        anchors: Vec<Point>,
        scales: Vec<f64>,
        exponent: f64,
        offsets: Vec<f64>,
    },
    MaxOfDistances {
        anchors: Vec<Point>,
    },
    MaxOfSquaredDistances {
        anchors: Vec<Point>,
    },
    WeightedCover {
        anchors: Vec<Point>,
        radii: Vec<f64>,
    },
    /// `τ log Σ exp(w_j max(0, B − c_j)/τ)` over one Busemann backbone.
    BusemannLogSumExp {
        backbone: BusemannDirection,
        levels: Vec<f64>,
        weights: Vec<f64>,
        temperature: f64,
    },
    SingleDistance {
        anchor: Point,
    },
    HalfSquaredDistance {
        anchor: Point,
    },
    /// Sum of distances, or of Busemann functions sharing a base point.
    CounterexampleSum {
        anchors: Vec<Point>,
        rays: Vec<BusemannDirection>,
    },
}

impl ObjectiveSpec {
    pub fn build(&self) -> Result<Objective, ProblemError> {
        let wrap = |e: horoprox::bsubdiff::OracleError| field_err("objective", e.to_string());
        Ok(match self {
            ObjectiveSpec::PowerDistance { anchors, scales, exponent, offsets } => max_objective(
                anchors
                    .iter()
                    .zip(scales)
                    .zip(offsets)
                    .map(|((a, c), o)| power_distance(a, *c, *exponent, *o))
                    .collect::<Result<_, _>>()
                    .map_err(wrap)?,
            )
            .map_err(wrap)?,
            ObjectiveSpec::MaxOfDistances { anchors } => max_of_distances(anchors).map_err(wrap)?,
            ObjectiveSpec::MaxOfSquaredDistances { anchors } => max_of_squared_distances(anchors).map_err(wrap)?,
            ObjectiveSpec::WeightedCover { anchors, radii } => weighted_cover(anchors, radii).map_err(wrap)?,
            ObjectiveSpec::BusemannLogSumExp { backbone, levels, weights, temperature } => {
                let psis = levels
                    .iter()
                    .zip(weights)
                    .map(|(c, w)| Scalar::Hinge { weight: *w, level: *c, offset: 0.0 })
                    .collect();
                let family = AlignedFamily::busemann_backbone(backbone, psis).map_err(wrap)?;
                aligned_aggregate(family, Aggregator::LogSumExp { temperature: *temperature }).map_err(wrap)?
            }
            ObjectiveSpec::SingleDistance { anchor } => distance_objective(anchor),
            ObjectiveSpec::HalfSquaredDistance { anchor } => half_squared_distance(anchor),
            ObjectiveSpec::CounterexampleSum { anchors, rays } => {
                let mut members: Vec<Objective> = anchors.iter().map(distance_objective).collect();
                members.extend(rays.iter().map(busemann_objective));
                uncertified_sum(members)
            }
        })
    }

    /// A minimizer known in closed form: the anchor of single-anchor problems
    /// and the balance point on the segment of two-anchor max problems.
    pub fn closed_form_solution(&self) -> Option<Point> {
        match self {
            ObjectiveSpec::SingleDistance { anchor } | ObjectiveSpec::HalfSquaredDistance { anchor } => {
                Some(anchor.clone())
            }
            ObjectiveSpec::PowerDistance { anchors, .. }
            | ObjectiveSpec::MaxOfDistances { anchors }
            | ObjectiveSpec::MaxOfSquaredDistances { anchors }
                if anchors.len() == 1 =>
            {
                Some(anchors[0].clone())
            }
            ObjectiveSpec::MaxOfDistances { anchors } | ObjectiveSpec::MaxOfSquaredDistances { anchors }
                if anchors.len() == 2 =>
            {
                geodesic_point(&anchors[0], &anchors[1], 0.5).ok()
            }
            ObjectiveSpec::WeightedCover { anchors, radii } if anchors.len() <= 2 => {
                if anchors.len() == 1 {
                    return Some(anchors[0].clone());
                }
                let d = horoprox::manifold::dist(&anchors[0], &anchors[1]).ok()?;
                if d == 0.0 {
                    return Some(anchors[0].clone());
                }
                let t = ((d + radii[1] - radii[0]) / 2.0).clamp(0.0, d);
                geodesic_point(&anchors[0], &anchors[1], t / d).ok()
            }
            _ => None,
        }
    }
}

/// A fully validated problem.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub space: Space,
    pub objective: ObjectiveSpec,
    pub initial_point: Point,
    pub solver: SolverConfig,
    pub seed: u64,
}

impl ProblemSpec {
    /// Reference solution: closed form when available, otherwise the end
    /// point of an exact-mode run with ten times the iteration budget. `None`
    /// when neither is available.
    pub fn reference_solution(&self) -> Option<Point> {
        if let Some(p) = self.objective.closed_form_solution() {
            return Some(p);
        }
        if matches!(self.objective, ObjectiveSpec::CounterexampleSum { .. }) {
            return None;
        }
        let f = self.objective.build().ok()?;
        let config = SolverConfig {
            sigma: 0.0,
            max_outer_iters: 10 * self.solver.max_outer_iters.max(1),
            stop_tol: 1e-13,
            inner: InnerMethod::Approximate(InnerConfig::default()),
            ..self.solver.clone()
        };
        let run = bhppm(f.as_ref(), &self.initial_point, &config).ok()?;
        if run.terminal == Terminal::InnerFailure {
            log::warn!("reference run could not solve a proximal step exactly; leaving dist_to_pstar empty");
            return None;
        }
        Some(run.final_point)
    }
}

/// Environment variable that replaces the seed given in a problem file.
pub const SEED_VAR: &str = "BHPPM_SEED";

/// Reads a problem file, honouring a seed override from [`SEED_VAR`].
pub fn load_problem(path: &Path) -> Result<ProblemSpec, ProblemError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ProblemError::Io { path: path.display().to_string(), source })?;
    let seed = match std::env::var(SEED_VAR) {
        Ok(v) => Some(v.trim().parse().map_err(|_| field_err(SEED_VAR, format!("not a 64-bit seed: '{v}'")))?),
        Err(_) => None,
    };
    parse_problem_seeded(&text, seed)
}

pub fn parse_problem(text: &str) -> Result<ProblemSpec, ProblemError> {
    parse_problem_seeded(text, None)
}

pub fn parse_problem_seeded(text: &str, seed: Option<u64>) -> Result<ProblemSpec, ProblemError> {
    let mut file: ProblemFile = toml::from_str(text)?;
    if let Some(seed) = seed {
        file.seed = seed;
    }
    validate(&file)
}

fn read_point(space: Space, coords: &[f64], field: &str) -> Result<Point, ProblemError> {
    if coords.len() != space.ambient_dim() {
        return Err(field_err(field, format!("expected {} coordinates, got {}", space.ambient_dim(), coords.len())));
    }
    if coords.iter().any(|x| !x.is_finite()) {
        return Err(field_err(field, "coordinates must be finite"));
    }
    if let Space::Hyperboloid { dim, kappa } = space {
        let spatial: f64 = coords[..dim].iter().map(|x| x * x).sum();
        let residual = spatial - coords[dim] * coords[dim] + 1.0 / kappa;
        let scale = 1.0 / kappa + spatial + coords[dim] * coords[dim];
        if residual.abs() > INPUT_TOL * scale || coords[dim] <= 0.0 {
            return Err(field_err(field, format!("point is off the hyperboloid (Lorentz residual {residual:.3e})")));
        }
    }
    space.lift(&coords[..space.dim()]).map_err(|e| field_err(field, e.to_string()))
}

fn read_points(space: Space, list: &Option<Vec<Vec<f64>>>, field: &str) -> Result<Vec<Point>, ProblemError> {
    let list = list.as_ref().ok_or_else(|| field_err(field, "missing required field"))?;
    if list.is_empty() {
        return Err(field_err(field, "at least one entry is required"));
    }
    list.iter().enumerate().map(|(i, c)| read_point(space, c, &format!("{field}[{i}]"))).collect()
}

fn nonnegative(values: &[f64], field: &str) -> Result<(), ProblemError> {
    if let Some((i, w)) = values.iter().enumerate().find(|(_, w)| !(**w >= 0.0 && w.is_finite())) {
        return Err(field_err(format!("{field}[{i}]"), format!("must be a nonnegative number, got {w}")));
    }
    Ok(())
}

fn sized(values: &Option<Vec<f64>>, n: usize, default: f64, field: &str) -> Result<Vec<f64>, ProblemError> {
    match values {
        None => Ok(vec![default; n]),
        Some(v) if v.len() == n => Ok(v.clone()),
        Some(v) => Err(field_err(field, format!("expected {n} entries, got {}", v.len()))),
    }
}

fn single(anchors: Vec<Point>, field: &str) -> Result<Point, ProblemError> {
    if anchors.len() != 1 {
        return Err(field_err(field, format!("expected exactly one anchor, got {}", anchors.len())));
    }
    Ok(anchors.into_iter().next().unwrap())
}

fn read_ray(space: Space, o: &ObjectiveSection, dir: &[f64], field: &str) -> Result<BusemannDirection, ProblemError> {
    let base_coords =
        o.backbone_base.as_ref().ok_or_else(|| field_err("objective.backbone_base", "missing required field"))?;
    let base = read_point(space, base_coords, "objective.backbone_base")?;
    let v = space.tangent(&base, dir).map_err(|e| field_err(field, e.to_string()))?;
    BusemannDirection::new(&base, &v).map_err(|e| field_err(field, e.to_string()))
}

fn validate(file: &ProblemFile) -> Result<ProblemSpec, ProblemError> {
    let m = &file.manifold;
    let space = match m.kind.as_str() {
        "euclidean" => Space::euclidean(m.dim),
        "hyperboloid" => Space::hyperboloid(m.dim, m.kappa.unwrap_or(1.0)),
        other => return Err(field_err("manifold.kind", format!("unknown manifold kind '{other}'"))),
    }
    .map_err(|e| field_err("manifold", e.to_string()))?;

    let o = &file.objective;
    let objective = match o.kind.as_str() {
        "power_distance" => {
            let anchors = read_points(space, &o.anchors, "objective.anchors")?;
            let n = anchors.len();
            let scales = sized(&o.weights, n, 1.0, "objective.weights")?;
            nonnegative(&scales, "objective.weights")?;
            let exponent = o.exponent.unwrap_or(1.0);
            if !(exponent >= 1.0) {
                return Err(field_err("objective.exponent", format!("must be at least 1, got {exponent}")));
            }
            let offsets = sized(&o.offsets, n, 0.0, "objective.offsets")?;
            match o.aggregator.as_deref() {
                None | Some("max") => {}
                Some(other) => {
                    return Err(field_err(
                        "objective.aggregator",
                        format!("'{other}' is not certified for members without a common direction; use 'max'"),
                    ))
                }
            }
            ObjectiveSpec::PowerDistance { anchors, scales, exponent, offsets }
        }
        "max_of_distances" => {
            ObjectiveSpec::MaxOfDistances { anchors: read_points(space, &o.anchors, "objective.anchors")? }
        }
        "max_of_squared_distances" => {
            ObjectiveSpec::MaxOfSquaredDistances { anchors: read_points(space, &o.anchors, "objective.anchors")? }
        }
        "weighted_cover" => {
            let anchors = read_points(space, &o.anchors, "objective.anchors")?;
            let radii = sized(&o.weights, anchors.len(), 0.0, "objective.weights")?;
            nonnegative(&radii, "objective.weights")?;
            ObjectiveSpec::WeightedCover { anchors, radii }
        }
        "busemann_logsumexp" => {
            let dir = o
                .backbone_direction
                .as_ref()
                .ok_or_else(|| field_err("objective.backbone_direction", "missing required field"))?;
            let backbone = read_ray(space, o, dir, "objective.backbone_direction")?;
            if backbone.is_zero() {
                return Err(field_err("objective.backbone_direction", "direction must be nonzero"));
            }
            let levels = o.levels.clone().ok_or_else(|| field_err("objective.levels", "missing required field"))?;
            if levels.is_empty() || levels.iter().any(|c| !c.is_finite()) {
                return Err(field_err("objective.levels", "need at least one finite level"));
            }
            let weights = sized(&o.weights, levels.len(), 1.0, "objective.weights")?;
            nonnegative(&weights, "objective.weights")?;
            let temperature = o.temperature.unwrap_or(1.0);
            if !(temperature > 0.0 && temperature.is_finite()) {
                return Err(field_err("objective.temperature", format!("must be positive, got {temperature}")));
            }
            ObjectiveSpec::BusemannLogSumExp { backbone, levels, weights, temperature }
        }
        "single_distance" => ObjectiveSpec::SingleDistance {
            anchor: single(read_points(space, &o.anchors, "objective.anchors")?, "objective.anchors")?,
        },
        "half_squared_distance" => ObjectiveSpec::HalfSquaredDistance {
            anchor: single(read_points(space, &o.anchors, "objective.anchors")?, "objective.anchors")?,
        },
        "counterexample_sum" => {
            let anchors = match &o.anchors {
                Some(_) => read_points(space, &o.anchors, "objective.anchors")?,
                None => Vec::new(),
            };
            let rays = match &o.directions {
                Some(dirs) => dirs
                    .iter()
                    .enumerate()
                    .map(|(i, d)| read_ray(space, o, d, &format!("objective.directions[{i}]")))
                    .collect::<Result<Vec<_>, _>>()?,
                None => Vec::new(),
            };
            if anchors.len() + rays.len() < 2 {
                return Err(field_err(
                    "objective",
                    "counterexample_sum needs at least two members (anchors or directions)",
                ));
            }
            ObjectiveSpec::CounterexampleSum { anchors, rays }
        }
        other => return Err(field_err("objective.kind", format!("unknown objective kind '{other}'"))),
    };

    let s = &file.solver;
    let mu = match &s.mu {
        MuValue::Constant(c) => MuSchedule::Constant(*c),
        MuValue::Sequence(v) => MuSchedule::Sequence(v.clone()),
    };
    let step_rule = match s.inner.step_rule.as_str() {
        "constant" => StepRule::Constant(
            s.inner.alpha.ok_or_else(|| field_err("solver.inner.alpha", "required by the constant step rule"))?,
        ),
        "inverse_sqrt" => StepRule::InverseSqrt { alpha0: s.inner.alpha },
        "armijo" => StepRule::Armijo { beta: s.inner.backtrack, c: s.inner.sufficient_decrease },
        other => return Err(field_err("solver.inner.step_rule", format!("unknown step rule '{other}'"))),
    };
    let solver = SolverConfig {
        sigma: s.sigma,
        rho: s.rho,
        mu,
        max_outer_iters: s.max_outer_iters,
        stop_tol: s.stop_tol,
        inner: InnerMethod::Approximate(InnerConfig {
            t_max: s.inner.t_max,
            step_rule,
            polish: s.inner.polish,
            ..InnerConfig::default()
        }),
    };
    if s.max_outer_iters == 0 {
        return Err(field_err("solver.max_outer_iters", "must be positive"));
    }
    for w in solver.validate().map_err(|e| field_err("solver", e.to_string()))? {
        log::warn!("{w}");
    }

    let initial_point = match &file.initial_point {
        Some(c) => read_point(space, c, "initial_point")?,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(file.seed);
            space.random_point(&mut rng, &space.origin(), 2.0)
        }
    };
    if let ObjectiveSpec::BusemannLogSumExp { backbone, .. } = &objective {
        log_map(backbone.base(), &initial_point).map_err(|e| field_err("initial_point", e.to_string()))?;
    }
    Ok(ProblemSpec { space, objective, initial_point, solver, seed: file.seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_euclidean_file() {
        let spec = parse_problem(
            r#"
            initial_point = [3.0, 4.0]
            [manifold]
            kind = "euclidean"
            dim = 2
            [objective]
            kind = "single_distance"
            anchors = [[0.0, 0.0]]
            "#,
        )
        .unwrap();
        assert_eq!(spec.space, Space::euclidean(2).unwrap());
        assert!(matches!(spec.objective, ObjectiveSpec::SingleDistance { .. }));
        assert_eq!(spec.solver.sigma, 0.5);
    }

    #[test]
    fn off_manifold_anchor_names_the_field() {
        let err = parse_problem(
            r#"
            [manifold]
            kind = "hyperboloid"
            dim = 2
            [objective]
            kind = "max_of_distances"
            anchors = [[0.0, 0.0, 1.0], [1.0, 0.0, 1.0]]
            "#,
        )
        .unwrap_err();
        assert!(err.to_string().starts_with("objective.anchors[1]"), "{err}");
    }

    #[test]
    fn negative_cover_weight_is_rejected() {
        let err = parse_problem(
            r#"
            [manifold]
            kind = "euclidean"
            dim = 1
            [objective]
            kind = "weighted_cover"
            anchors = [[0.0], [1.0]]
            weights = [0.5, -1.0]
            "#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("objective.weights[1]"), "{err}");
    }

    #[test]
    fn unknown_kinds_are_rejected() {
        let err = parse_problem("[manifold]\nkind = \"sphere\"\ndim = 2\n[objective]\nkind = \"single_distance\"\n")
            .unwrap_err();
        assert!(err.to_string().contains("manifold.kind"));
        let err =
            parse_problem("[manifold]\nkind = \"euclidean\"\ndim = 2\n[objective]\nkind = \"median\"\n").unwrap_err();
        assert!(err.to_string().contains("objective.kind"));
    }

    #[test]
    fn missing_field_is_reported() {
        let err = parse_problem("[manifold]\nkind = \"euclidean\"\ndim = 2\n[objective]\nkind = \"single_distance\"\n")
            .unwrap_err();
        assert!(err.to_string().contains("objective.anchors: missing required field"), "{err}");
        assert!(parse_problem("[manifold]\nkind = \"euclidean\"\n").is_err());
    }

    #[test]
    fn two_anchor_cover_solution_balances_radii() {
        let spec = parse_problem(
            r#"
            initial_point = [5.0]
            [manifold]
            kind = "euclidean"
            dim = 1
            [objective]
            kind = "weighted_cover"
            anchors = [[0.0], [4.0]]
            weights = [1.0, 0.0]
            "#,
        )
        .unwrap();
        assert_eq!(spec.objective.closed_form_solution().unwrap().to_vec(), vec![1.5]);
    }
}

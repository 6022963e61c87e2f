//! Greedy point-cloud generation on zero sets, parametric patches and
//! interiors.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Curve, Shape};
use crate::error::{Error, Result};
use crate::vec3::{dist_sq, Point};

/// Residual accepted when projecting candidates onto a zero set.
pub const PROJECTION_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CloudParams {
    pub n_target: usize,
    pub candidate_multiplier: usize,
    pub boundary_weight: f64,
    pub seed: u64,
}

impl CloudParams {
    pub fn new(n_target: usize, seed: u64) -> Self {
        Self {
            n_target,
            candidate_multiplier: 40,
            boundary_weight: 0.0,
            seed,
        }
    }

    pub fn with_multiplier(mut self, m: usize) -> Self {
        self.candidate_multiplier = m;
        self
    }

    pub fn with_weight(mut self, w: f64) -> Self {
        self.boundary_weight = w;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_target < 1 {
            return Err(Error::InvalidArgument("n_target must be at least 1".into()));
        }
        if self.candidate_multiplier < 2 {
            return Err(Error::InvalidArgument(
                "candidate_multiplier must be at least 2".into(),
            ));
        }
        if !(self.boundary_weight >= 0.0 && self.boundary_weight.is_finite()) {
            return Err(Error::InvalidArgument(
                "boundary_weight must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    fn candidates(&self) -> usize {
        self.n_target * self.candidate_multiplier
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point>,
    /// Unit normals; empty for interior clouds of flat domains.
    pub normals: Vec<Point>,
    pub conormals: Option<Vec<Point>>,
    pub curvature: Option<Vec<f64>>,
    pub seed: u64,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The first `n` points with their attached data.
    pub fn prefix(&self, n: usize) -> PointCloud {
        let n = n.min(self.len());
        PointCloud {
            points: self.points[..n].to_vec(),
            normals: self.normals[..n.min(self.normals.len())].to_vec(),
            conormals: self.conormals.as_ref().map(|c| c[..n].to_vec()),
            curvature: self.curvature.as_ref().map(|c| c[..n].to_vec()),
            seed: self.seed,
        }
    }

    /// Concatenation; optional fields survive only if both sides carry them.
    pub fn concat(&self, other: &PointCloud) -> PointCloud {
        PointCloud {
            points: [self.points.as_slice(), &other.points].concat(),
            normals: [self.normals.as_slice(), &other.normals].concat(),
            conormals: join(&self.conormals, &other.conormals),
            curvature: join(&self.curvature, &other.curvature),
            seed: self.seed,
        }
    }

    pub fn with_curvature(mut self, shape: &Shape) -> Result<Self> {
        let kappa = self
            .points
            .iter()
            .map(|&p| shape.mean_curvature(p))
            .collect::<Result<Vec<_>>>()?;
        self.curvature = Some(kappa);
        Ok(self)
    }

    /// Smallest pairwise distance, `∞` for fewer than two points.
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, &p) in self.points.iter().enumerate() {
            for &q in &self.points[i + 1..] {
                best = best.min(dist_sq(p, q));
            }
        }
        best.sqrt()
    }
}

fn join<T: Clone>(a: &Option<Vec<T>>, b: &Option<Vec<T>>) -> Option<Vec<T>> {
    match (a, b) {
        (Some(a), Some(b)) => Some([a.as_slice(), b.as_slice()].concat()),
        _ => None,
    }
}

/// Greedy farthest-point selection of `n` candidates.
///
/// With `existing` empty the first pick is candidate 0; otherwise every pick
/// maximizes the distance to `existing` plus the points chosen so far. Ties
/// go to the lowest index. Returns candidate indices in pick order.
pub fn farthest_point_selection(
    candidates: &[Point],
    n: usize,
    existing: &[Point],
) -> Result<Vec<usize>> {
    let insufficient = |found| Error::InsufficientCandidates { found, needed: n };
    if n == 0 {
        return Ok(Vec::new());
    }
    if candidates.is_empty() {
        return Err(insufficient(0));
    }
    let mut min_d: Vec<f64> = candidates
        .iter()
        .map(|&c| existing.iter().map(|&e| dist_sq(c, e)).fold(f64::INFINITY, f64::min))
        .collect();
    let mut picks = Vec::with_capacity(n);
    while picks.len() < n {
        let (best, &d) = min_d
            .iter()
            .enumerate()
            .fold((0, &f64::NEG_INFINITY), |acc, x| if *x.1 > *acc.1 { x } else { acc });
        if !(d > 0.0) {
            return Err(insufficient(picks.len()));
        }
        picks.push(best);
        let chosen = candidates[best];
        for (m, &c) in min_d.iter_mut().zip(candidates) {
            *m = m.min(dist_sq(c, chosen));
        }
    }
    Ok(picks)
}

fn surface_candidates(shape: &Shape, count: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
    match shape.patch() {
        Some(patch) => (0..count).map(|_| patch.sample(rng)).collect(),
        None => (0..count)
            .filter_map(|_| {
                let x0 = shape.sample_box(rng);
                shape.project_to_levelset(x0, PROJECTION_TOL).ok()
            })
            .collect(),
    }
}

fn with_normals(shape: &Shape, points: Vec<Point>, seed: u64) -> Result<PointCloud> {
    let normals = points
        .iter()
        .map(|&p| shape.normal(p))
        .collect::<Result<Vec<_>>>()?;
    Ok(PointCloud {
        points,
        normals,
        conormals: None,
        curvature: None,
        seed,
    })
}

/// Farthest-point cloud on the zero set of `shape` (the whole parametric
/// patch for shapes that carry one).
pub fn generate_boundary_cloud(shape: &Shape, params: &CloudParams) -> Result<PointCloud> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let candidates = surface_candidates(shape, params.candidates(), &mut rng);
    let picks = farthest_point_selection(&candidates, params.n_target, &[])?;
    with_normals(shape, picks.iter().map(|&i| candidates[i]).collect(), params.seed)
}

/// Farthest-point cloud on one edge of a parametric patch, with normals and
/// outward conormals.
pub fn generate_curve_cloud(shape: &Shape, curve: Curve, params: &CloudParams) -> Result<PointCloud> {
    use rand::Rng;
    params.validate()?;
    let patch = shape
        .patch()
        .ok_or(Error::MissingGeometry("shape has no parametrized boundary"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let params_s: Vec<f64> = (0..params.candidates())
        .map(|_| rng.random_range(0.0..2.0 * std::f64::consts::PI))
        .collect();
    let candidates: Vec<Point> = params_s.iter().map(|&s| patch.curve_point(curve, s)).collect();
    let picks = farthest_point_selection(&candidates, params.n_target, &[])?;
    let mut cloud = with_normals(shape, picks.iter().map(|&i| candidates[i]).collect(), params.seed)?;
    let conormals = picks
        .iter()
        .map(|&i| shape.curve_conormal(&patch, curve, params_s[i]))
        .collect::<Result<Vec<_>>>()?;
    cloud.conormals = Some(conormals);
    Ok(cloud)
}

/// Farthest-point cloud on a parametric patch that keeps its distance from
/// the given boundary points.
pub fn generate_patch_interior_cloud(
    shape: &Shape,
    params: &CloudParams,
    boundary: &PointCloud,
) -> Result<PointCloud> {
    params.validate()?;
    if shape.patch().is_none() {
        return Err(Error::MissingGeometry("shape has no parametrized boundary"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let candidates = surface_candidates(shape, params.candidates(), &mut rng);
    let picks = farthest_point_selection(&candidates, params.n_target, &boundary.points)?;
    with_normals(shape, picks.iter().map(|&i| candidates[i]).collect(), params.seed)
}

/// `(w(1 − φ/a) + 1) · d²` for a candidate with level-set value `phi` and
/// squared distance `d_sq` to the current cloud.
pub fn interior_penalty(w: f64, phi: f64, a: f64, d_sq: f64) -> f64 {
    (w * (1.0 - phi / a) + 1.0) * d_sq
}

/// Record of an interior generation run, for inspection and testing.
#[derive(Clone, Debug, Default)]
pub struct InteriorTrace {
    pub interior_min: f64,
    pub batches: Vec<Vec<Point>>,
    pub picks: Vec<usize>,
}

fn interior_batch(shape: &Shape, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Point>> {
    let max_attempts = 1000 * count.max(1);
    let mut batch = Vec::with_capacity(count);
    let mut attempts = 0;
    while batch.len() < count {
        if attempts >= max_attempts {
            return Err(Error::InteriorSamplingFailed { attempts });
        }
        attempts += 1;
        let z = shape.sample_box(rng);
        if shape.levelset(z) < 0.0 {
            batch.push(z);
        }
    }
    Ok(batch)
}

fn interior_cloud(
    shape: &Shape,
    params: &CloudParams,
    boundary: &PointCloud,
    mut trace: Option<&mut InteriorTrace>,
) -> Result<PointCloud> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let batch_size = params.candidates();
    let analytic = shape.interior_min();
    let mut a = analytic.unwrap_or(0.0);
    let mut chosen: Vec<Point> = Vec::with_capacity(params.n_target);
    for k in 0..params.n_target {
        let batch = interior_batch(shape, batch_size, &mut rng)?;
        let phis: Vec<f64> = batch.iter().map(|&z| shape.levelset(z)).collect();
        if analytic.is_none() && k < 2 {
            a = phis.iter().copied().fold(a, f64::min);
        }
        let mut best = 0;
        if !(chosen.is_empty() && boundary.is_empty()) {
            let mut best_p = f64::NEG_INFINITY;
            for (j, (&z, &phi)) in batch.iter().zip(&phis).enumerate() {
                let d = chosen
                    .iter()
                    .chain(&boundary.points)
                    .map(|&x| dist_sq(x, z))
                    .fold(f64::INFINITY, f64::min);
                let p = interior_penalty(params.boundary_weight, phi, a, d);
                if p > best_p {
                    best_p = p;
                    best = j;
                }
            }
            if !(best_p > 0.0) {
                return Err(Error::InsufficientCandidates {
                    found: k,
                    needed: params.n_target,
                });
            }
        }
        chosen.push(batch[best]);
        if let Some(t) = trace.as_deref_mut() {
            t.batches.push(batch);
            t.picks.push(best);
        }
    }
    if let Some(t) = trace {
        t.interior_min = a;
    }
    Ok(PointCloud {
        points: chosen,
        normals: Vec::new(),
        conormals: None,
        curvature: None,
        seed: params.seed,
    })
}

/// Weighted farthest-point cloud inside `{φ < 0}`; each pick draws a fresh
/// candidate batch and maximizes [`interior_penalty`] against the interior
/// and boundary points.
pub fn generate_interior_cloud(
    shape: &Shape,
    params: &CloudParams,
    boundary: &PointCloud,
) -> Result<PointCloud> {
    interior_cloud(shape, params, boundary, None)
}

pub fn generate_interior_cloud_traced(
    shape: &Shape,
    params: &CloudParams,
    boundary: &PointCloud,
) -> Result<(PointCloud, InteriorTrace)> {
    let mut trace = InteriorTrace::default();
    let cloud = interior_cloud(shape, params, boundary, Some(&mut trace))?;
    Ok((cloud, trace))
}

/// Monte Carlo estimate of `sup_x min_j ‖x − x_j‖` over the zero set.
pub fn fill_distance_estimate(cloud: &PointCloud, shape: &Shape, probes: usize, seed: u64) -> Result<f64> {
    if cloud.is_empty() || probes < 10 * cloud.len() {
        return Err(Error::InvalidArgument(format!(
            "fill distance needs at least {} probes",
            10 * cloud.len().max(1)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probes = surface_candidates(shape, probes, &mut rng);
    let worst = probes
        .iter()
        .map(|&z| {
            cloud
                .points
                .iter()
                .map(|&x| dist_sq(x, z))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    Ok(worst.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vec3::norm;

    #[test]
    fn sphere_cloud_lies_on_sphere() {
        let cloud = generate_boundary_cloud(&Shape::UnitSphere, &CloudParams::new(650, 1)).unwrap();
        assert_eq!(cloud.len(), 650);
        assert!(cloud.points.iter().all(|&p| (norm(p) - 1.0).abs() <= 1e-10));
        assert!(cloud.normals.iter().all(|&n| (norm(n) - 1.0).abs() <= 1e-12));
        assert!(cloud.min_separation() > 0.0);
    }

    #[test]
    fn single_point_is_first_candidate() {
        let params = CloudParams::new(1, 5);
        let cloud = generate_boundary_cloud(&Shape::UnitSphere, &params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let first = surface_candidates(&Shape::UnitSphere, 40, &mut rng)[0];
        assert_eq!(cloud.points, vec![first]);
    }

    #[test]
    fn greedy_matches_exhaustive_rescan_on_circle() {
        let params = CloudParams::new(10, 7);
        let cloud = generate_boundary_cloud(&Shape::UnitDisk, &params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cands = surface_candidates(&Shape::UnitDisk, 400, &mut rng);
        let mut chosen = vec![cands[0]];
        while chosen.len() < 10 {
            let mut best = (f64::NEG_INFINITY, 0);
            for (i, &c) in cands.iter().enumerate() {
                let d = chosen.iter().map(|&x| norm(crate::vec3::sub(x, c))).fold(f64::INFINITY, f64::min);
                if d > best.0 {
                    best = (d, i);
                }
            }
            chosen.push(cands[best.1]);
        }
        assert_eq!(cloud.points, chosen);
    }

    #[test]
    fn clouds_are_reproducible() {
        let p = CloudParams::new(50, 99);
        let a = generate_boundary_cloud(&Shape::Genus2, &p).unwrap();
        let b = generate_boundary_cloud(&Shape::Genus2, &p).unwrap();
        assert_eq!(a, b);
        assert!(a.points.iter().all(|&x| super::super::genus2_levelset(x).abs() <= 1e-10));
    }

    #[test]
    fn duplicate_candidates_are_reported() {
        let c = vec![[1.0, 0.0, 0.0]; 5];
        assert!(matches!(
            farthest_point_selection(&c, 2, &[]),
            Err(Error::InsufficientCandidates { found: 1, needed: 2 })
        ));
    }

    #[test]
    fn disk_penalty_weights() {
        // φ = r² − 1 and a = −1 give weight w·r² + 1.
        assert_eq!(interior_penalty(4.0, -1.0, -1.0, 1.0), 1.0);
        assert_eq!(interior_penalty(4.0, 0.0, -1.0, 1.0), 5.0);
        assert_eq!(interior_penalty(0.0, -0.3, -1.0, 0.25), 0.25);
    }

    fn check_interior_trace(w: f64, seed: u64) {
        let shape = Shape::UnitDisk;
        let boundary = generate_boundary_cloud(&shape, &CloudParams::new(8, seed)).unwrap();
        let params = CloudParams::new(12, seed).with_weight(w);
        let (cloud, trace) = generate_interior_cloud_traced(&shape, &params, &boundary).unwrap();
        assert_eq!(trace.interior_min, -1.0);
        let mut chosen: Vec<Point> = Vec::new();
        for (batch, &pick) in trace.batches.iter().zip(&trace.picks) {
            let score = |z: Point| {
                let r2 = z[0] * z[0] + z[1] * z[1];
                let d = chosen
                    .iter()
                    .chain(&boundary.points)
                    .map(|&x| dist_sq(x, z))
                    .fold(f64::INFINITY, f64::min);
                (w * r2 + 1.0) * d
            };
            let best = (0..batch.len())
                .max_by(|&i, &j| score(batch[i]).total_cmp(&score(batch[j])).then(j.cmp(&i)))
                .unwrap();
            assert_eq!(best, pick);
            chosen.push(batch[pick]);
        }
        assert_eq!(cloud.points, chosen);
        assert!(cloud.points.iter().all(|&p| shape.levelset(p) < 0.0));
    }

    #[test]
    fn interior_picks_match_exhaustive_oracle() {
        check_interior_trace(4.0, 3);
        check_interior_trace(0.0, 3);
    }

    #[test]
    fn interior_min_is_estimated_without_closed_form() {
        let shape = Shape::Custom(
            super::super::CustomShape::new(|p| p[0] * p[0] + p[1] * p[1] - 4.0, ([-2.0, -2.0, 0.0], [2.0, 2.0, 0.0]))
                .planar(),
        );
        let params = CloudParams::new(3, 1).with_multiplier(200);
        let (_, trace) = generate_interior_cloud_traced(&shape, &params, &PointCloud::default()).unwrap();
        assert!(trace.interior_min < -3.9 && trace.interior_min >= -4.0);
    }

    #[test]
    fn interior_sampling_failure() {
        let shape = Shape::Custom(
            super::super::CustomShape::new(|_| 1.0, ([-1.0; 3], [1.0; 3])).with_interior_min(-1.0),
        );
        let r = generate_interior_cloud(&shape, &CloudParams::new(1, 0).with_multiplier(2), &PointCloud::default());
        assert!(matches!(r, Err(Error::InteriorSamplingFailed { .. })));
    }

    #[test]
    fn fill_distance_two_antipodes() {
        let cloud = PointCloud {
            points: vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]],
            ..Default::default()
        };
        let h = fill_distance_estimate(&cloud, &Shape::UnitSphere, 10_000, 1).unwrap();
        let exact = 2f64.sqrt();
        assert!((h - exact).abs() <= 0.05 * exact && h <= exact + 1e-12, "{h}");
    }

    #[test]
    fn fill_distance_single_circle_point() {
        let cloud = PointCloud {
            points: vec![[1.0, 0.0, 0.0]],
            ..Default::default()
        };
        let h = fill_distance_estimate(&cloud, &Shape::UnitDisk, 10_000, 2).unwrap();
        assert!((h - 2.0).abs() < 1e-3, "{h}");
        assert!(fill_distance_estimate(&cloud, &Shape::UnitDisk, 5, 2).is_err());
    }

    #[test]
    fn fill_distance_decreases_with_refinement() {
        let coarse = generate_boundary_cloud(&Shape::UnitSphere, &CloudParams::new(650, 4)).unwrap();
        let fine = generate_boundary_cloud(&Shape::UnitSphere, &CloudParams::new(1300, 4)).unwrap();
        let hc = fill_distance_estimate(&coarse, &Shape::UnitSphere, 20_000, 8).unwrap();
        let hf = fill_distance_estimate(&fine, &Shape::UnitSphere, 20_000, 8).unwrap();
        assert!(hf < hc, "{hf} {hc}");
    }

    #[test]
    fn catenoid_clouds() {
        let shape = Shape::WavyCatenoid;
        let upper = generate_curve_cloud(&shape, Curve::Upper, &CloudParams::new(63, 1)).unwrap();
        let lower = generate_curve_cloud(&shape, Curve::Lower, &CloudParams::new(63, 2)).unwrap();
        let edge = upper.concat(&lower);
        assert_eq!(edge.conormals.as_ref().unwrap().len(), 126);
        for ((&y, &n), &nu) in edge.points.iter().zip(&edge.normals).zip(edge.conormals.as_ref().unwrap()) {
            assert!(shape.levelset(y).abs() <= 1e-10);
            assert!((norm(nu) - 1.0).abs() <= 1e-12);
            assert!(crate::vec3::dot(n, nu).abs() <= 1e-10);
        }
        let inner = generate_patch_interior_cloud(&shape, &CloudParams::new(200, 3), &edge).unwrap();
        assert_eq!(inner.len(), 200);
        assert!(inner.concat(&edge).min_separation() > 0.0);
        assert!(inner.points.iter().all(|&p| shape.levelset(p).abs() <= 1e-10));
    }
}

//! Eigenproblem families, their constraint rows and default parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assembly::{ConstraintRow, RowTag};
use crate::error::{Error, Result};
use crate::fourier_space::{BasisSpec, OperatorSymbol, WeightParams};
use crate::geometry::{
    generate_boundary_cloud, generate_curve_cloud, generate_interior_cloud,
    generate_patch_interior_cloud, CloudParams, Curve, PointCloud, Shape,
};
use crate::vec3::{norm, Point};

/// Radial potentials for the Schrödinger–Steklov family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Potential {
    /// `q(r) = (r/2 + cos(5r)/5) / (2r³ + 1)`.
    RationalCosine,
    Constant { value: f64 },
}

impl Potential {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Potential::RationalCosine => (0.5 * r + (5.0 * r).cos() / 5.0) / (2.0 * r.powi(3) + 1.0),
            Potential::Constant { value } => *value,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    /// `−Δ_S u = λu` on a closed surface.
    LbClosedSurface { use_curvature: bool },
    /// `Δu = 0` inside, `n̂·∇u = λu` on the boundary.
    SteklovFlat,
    /// `−Δu − μ²u = 0` inside, `n̂·∇u = λu` on the boundary.
    SteklovHelmholtz { mu: f64 },
    /// `−Δu + q(r)u = 0` inside, `n̂·∇u = λu` on the boundary.
    SchrodingerSteklov { potential: Potential },
    /// `Δ_S u = 0` on a surface, `ν̂·∇_S u = λu` on its edge.
    SurfaceSteklov,
}

impl Family {
    pub fn is_closed_surface(&self) -> bool {
        matches!(self, Family::LbClosedSurface { .. })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub family: Family,
    pub shape: Shape,
    pub basis_spec: BasisSpec,
    pub weight_params: WeightParams,
    /// `Ñ`: surface points (closed surfaces) or interior points.
    pub n_interior: usize,
    /// `Ñ_∂`: boundary points, split evenly over the two edges of a patch.
    pub n_boundary: usize,
    /// `Ñ_a`.
    pub n_anchors: usize,
    /// `b_j`; a single value is reused for every anchor.
    pub anchor_values: Vec<f64>,
    /// `w` in the interior penalty.
    pub interior_weight: f64,
    pub candidate_multiplier: usize,
    pub seed: u64,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        self.basis_spec.validate()?;
        self.weight_params.validate()?;
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.n_anchors < 1 {
            return bad("n_anchors must be at least 1");
        }
        if self.anchor_values.len() != 1 && self.anchor_values.len() != self.n_anchors {
            return bad("anchor_values needs one entry or one per anchor");
        }
        if self.anchor_values.iter().all(|b| *b == 0.0) {
            return bad("at least one anchor value must be nonzero");
        }
        if self.n_interior < 1 {
            return bad("n_interior must be at least 1");
        }
        if self.family.is_closed_surface() {
            if self.n_boundary != 0 {
                return bad("closed surfaces take n_boundary = 0");
            }
        } else if self.n_boundary < self.n_anchors {
            return bad("anchors sit on boundary points; n_boundary must be at least n_anchors");
        }
        if self.shape.dims() > self.basis_spec.dims() {
            return bad("basis has fewer dimensions than the shape");
        }
        let surface = matches!(self.family, Family::SurfaceSteklov);
        if surface != self.shape.patch().is_some() {
            return bad("surface_steklov needs a parametrized patch, and only it uses one");
        }
        Ok(())
    }

    fn anchor_value(&self, j: usize) -> f64 {
        if self.anchor_values.len() == 1 {
            self.anchor_values[0]
        } else {
            self.anchor_values[j]
        }
    }

    fn cloud_params(&self, n: usize, stream: u64) -> CloudParams {
        CloudParams::new(n, self.seed.wrapping_add(stream))
            .with_multiplier(self.candidate_multiplier)
            .with_weight(self.interior_weight)
    }
}

/// Point sets used by one discretization.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProblemClouds {
    /// Surface points of a closed surface, or interior points.
    pub interior: PointCloud,
    pub boundary: PointCloud,
    pub anchors: Vec<Point>,
    pub anchor_values: Vec<f64>,
}

pub fn generate_clouds(spec: &ProblemSpec) -> Result<ProblemClouds> {
    spec.validate()?;
    let shape = &spec.shape;
    let (interior, boundary) = match spec.family {
        Family::LbClosedSurface { use_curvature } => {
            let cloud = generate_boundary_cloud(shape, &spec.cloud_params(spec.n_interior, 0))?;
            let cloud = if use_curvature { cloud.with_curvature(shape)? } else { cloud };
            (cloud, PointCloud::default())
        }
        Family::SteklovFlat | Family::SteklovHelmholtz { .. } | Family::SchrodingerSteklov { .. } => {
            let boundary = generate_boundary_cloud(shape, &spec.cloud_params(spec.n_boundary, 0))?;
            let interior = generate_interior_cloud(shape, &spec.cloud_params(spec.n_interior, 1), &boundary)?;
            (interior, boundary)
        }
        Family::SurfaceSteklov => {
            let half = spec.n_boundary / 2;
            let upper = generate_curve_cloud(shape, Curve::Upper, &spec.cloud_params(half, 0))?;
            let lower = generate_curve_cloud(shape, Curve::Lower, &spec.cloud_params(spec.n_boundary - half, 1))?;
            let boundary = upper.concat(&lower);
            let interior = generate_patch_interior_cloud(shape, &spec.cloud_params(spec.n_interior, 2), &boundary)?;
            (interior, boundary)
        }
    };
    let source = if spec.family.is_closed_surface() { &interior } else { &boundary };
    if source.len() < spec.n_anchors {
        return Err(Error::InvalidArgument("not enough cloud points for the anchors".into()));
    }
    Ok(ProblemClouds {
        anchors: source.points[..spec.n_anchors].to_vec(),
        anchor_values: (0..spec.n_anchors).map(|j| spec.anchor_value(j)).collect(),
        interior,
        boundary,
    })
}

/// `n` random points on the zero set of `shape` with values of magnitude in
/// `[0.5, 1.5]` and random sign.
pub fn random_anchors(shape: &Shape, n: usize, seed: u64) -> Result<(Vec<Point>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    let mut attempts = 0;
    while points.len() < n {
        attempts += 1;
        if attempts > 100 * n.max(1) {
            return Err(Error::InsufficientCandidates {
                found: points.len(),
                needed: n,
            });
        }
        let p = match shape.patch() {
            Some(patch) => patch.sample(&mut rng),
            None => match shape.project_to_levelset(shape.sample_box(&mut rng), 1e-12) {
                Ok(p) => p,
                Err(_) => continue,
            },
        };
        let magnitude = rng.random_range(0.5..1.5);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        points.push(p);
        values.push(sign * magnitude);
    }
    Ok((points, values))
}

fn normals_of(cloud: &PointCloud, what: &'static str) -> Result<()> {
    if cloud.normals.len() != cloud.len() {
        return Err(Error::MissingGeometry(what));
    }
    Ok(())
}

fn minus_lambda() -> Option<OperatorSymbol> {
    Some(OperatorSymbol::Identity.scaled(-1.0))
}

/// `−Δu + n̂·(D²u)n̂`, the surface Laplacian part that survives once
/// `n̂·∇u = 0` is imposed separately.
fn split_laplacian(n: Point) -> OperatorSymbol {
    OperatorSymbol::NegLaplacian.plus(OperatorSymbol::NormalHessian(n))
}

/// Constraint rows ordered interior equations, interior normal conditions,
/// boundary equations, boundary normal conditions, anchors.
pub fn build_rows(spec: &ProblemSpec, clouds: &ProblemClouds) -> Result<Vec<ConstraintRow>> {
    let inner = &clouds.interior;
    let edge = &clouds.boundary;
    let mut rows = Vec::new();
    match spec.family {
        Family::LbClosedSurface { use_curvature: false } => {
            normals_of(inner, "surface normals")?;
            for (&x, &n) in inner.points.iter().zip(&inner.normals) {
                rows.push(ConstraintRow::homogeneous(x, split_laplacian(n), minus_lambda(), RowTag::Interior));
            }
            for (&x, &n) in inner.points.iter().zip(&inner.normals) {
                rows.push(ConstraintRow::homogeneous(x, OperatorSymbol::GradientDir(n), None, RowTag::NormalAux));
            }
        }
        Family::LbClosedSurface { use_curvature: true } => {
            normals_of(inner, "surface normals")?;
            let kappa = inner.curvature.as_ref().ok_or(Error::MissingGeometry("mean curvature"))?;
            for ((&x, &n), &k) in inner.points.iter().zip(&inner.normals).zip(kappa) {
                let sym = split_laplacian(n).plus_scaled(k, OperatorSymbol::GradientDir(n));
                rows.push(ConstraintRow::homogeneous(x, sym, minus_lambda(), RowTag::Interior));
            }
        }
        Family::SteklovFlat | Family::SteklovHelmholtz { .. } | Family::SchrodingerSteklov { .. } => {
            normals_of(edge, "boundary normals")?;
            for &x in &inner.points {
                let sym = match spec.family {
                    Family::SteklovFlat => OperatorSymbol::Laplacian,
                    Family::SteklovHelmholtz { mu } => {
                        OperatorSymbol::NegLaplacian.plus(OperatorSymbol::ScalarMultiple(-mu * mu))
                    }
                    Family::SchrodingerSteklov { potential } => {
                        OperatorSymbol::NegLaplacian.plus(OperatorSymbol::ScalarMultiple(potential.eval(norm(x))))
                    }
                    _ => unreachable!(),
                };
                rows.push(ConstraintRow::homogeneous(x, sym, None, RowTag::Interior));
            }
            for (&y, &n) in edge.points.iter().zip(&edge.normals) {
                rows.push(ConstraintRow::homogeneous(y, OperatorSymbol::GradientDir(n), minus_lambda(), RowTag::Boundary));
            }
        }
        Family::SurfaceSteklov => {
            normals_of(inner, "surface normals")?;
            normals_of(edge, "boundary normals")?;
            let conormals = edge.conormals.as_ref().ok_or(Error::MissingGeometry("boundary conormals"))?;
            for (&x, &n) in inner.points.iter().zip(&inner.normals) {
                rows.push(ConstraintRow::homogeneous(x, split_laplacian(n), None, RowTag::Interior));
            }
            for (&x, &n) in inner.points.iter().zip(&inner.normals) {
                rows.push(ConstraintRow::homogeneous(x, OperatorSymbol::GradientDir(n), None, RowTag::NormalAux));
            }
            for (&y, &nu) in edge.points.iter().zip(conormals) {
                rows.push(ConstraintRow::homogeneous(y, OperatorSymbol::GradientDir(nu), minus_lambda(), RowTag::Boundary));
            }
            for (&y, &n) in edge.points.iter().zip(&edge.normals) {
                rows.push(ConstraintRow::homogeneous(y, OperatorSymbol::GradientDir(n), None, RowTag::NormalAux));
            }
        }
    }
    if clouds.anchors.is_empty() || clouds.anchors.len() != clouds.anchor_values.len() {
        return Err(Error::InvalidArgument("one value per anchor point is required".into()));
    }
    for (&a, &b) in clouds.anchors.iter().zip(&clouds.anchor_values) {
        rows.push(ConstraintRow::anchor(a, b));
    }
    Ok(rows)
}

/// Number of rows `build_rows` produces.
pub fn expected_row_count(family: &Family, n_interior: usize, n_boundary: usize, n_anchors: usize) -> usize {
    match family {
        Family::LbClosedSurface { use_curvature: false } => 2 * n_interior + n_anchors,
        Family::LbClosedSurface { use_curvature: true } => n_interior + n_anchors,
        Family::SurfaceSteklov => 2 * n_interior + 2 * n_boundary + n_anchors,
        _ => n_interior + n_boundary + n_anchors,
    }
}

pub const HELMHOLTZ_MU: f64 = 2.404825557695773;

pub const PRESETS: [&str; 7] = [
    "sphere-lb",
    "genus2-lb",
    "genus2-lb-kappa",
    "disk-steklov",
    "disk-helmholtz",
    "disk-schrodinger",
    "catenoid-steklov",
];

fn disk_spec(family: Family, n_boundary: usize, n_interior: usize) -> ProblemSpec {
    ProblemSpec {
        family,
        shape: Shape::UnitDisk,
        basis_spec: BasisSpec::cube(2, 4.0, 75).unwrap(),
        weight_params: WeightParams::new(4.0, 1.0).unwrap(),
        n_interior,
        n_boundary,
        n_anchors: 1,
        anchor_values: vec![1.0],
        interior_weight: 4.0,
        candidate_multiplier: 40,
        seed: 1,
    }
}

fn quarter_squared(n_boundary: usize) -> usize {
    let q = n_boundary as f64 / 4.0;
    (q * q).round() as usize
}

/// Named experiment configurations.
pub fn preset(name: &str) -> Option<ProblemSpec> {
    let lb = |use_curvature| Family::LbClosedSurface { use_curvature };
    let spec = match name {
        "sphere-lb" => ProblemSpec {
            family: lb(false),
            shape: Shape::UnitSphere,
            basis_spec: BasisSpec::cube(3, 4.0, 15).unwrap(),
            weight_params: WeightParams::new(4.0, 4.0).unwrap(),
            n_interior: 650,
            n_boundary: 0,
            n_anchors: 1,
            anchor_values: vec![1.0],
            interior_weight: 0.0,
            candidate_multiplier: 40,
            seed: 1,
        },
        "genus2-lb" | "genus2-lb-kappa" => ProblemSpec {
            family: lb(name.ends_with("kappa")),
            shape: Shape::Genus2,
            basis_spec: BasisSpec::new(vec![10.0, 6.0, 3.0], 15).unwrap(),
            weight_params: WeightParams::new(5.0, 12.0).unwrap(),
            n_interior: if name.ends_with("kappa") { 2000 } else { 1600 },
            n_boundary: 0,
            n_anchors: 1,
            anchor_values: vec![1.0],
            interior_weight: 0.0,
            candidate_multiplier: 40,
            seed: 1,
        },
        "disk-steklov" => disk_spec(Family::SteklovFlat, 65, quarter_squared(65)),
        "disk-helmholtz" => disk_spec(Family::SteklovHelmholtz { mu: HELMHOLTZ_MU }, 78, quarter_squared(78)),
        "disk-schrodinger" => disk_spec(
            Family::SchrodingerSteklov {
                potential: Potential::RationalCosine,
            },
            70,
            35 * 35,
        ),
        "catenoid-steklov" => ProblemSpec {
            family: Family::SurfaceSteklov,
            shape: Shape::WavyCatenoid,
            basis_spec: BasisSpec::cube(3, 5.0, 15).unwrap(),
            weight_params: WeightParams::new(4.0, 5.0).unwrap(),
            n_interior: 16 * 126,
            n_boundary: 126,
            n_anchors: 1,
            anchor_values: vec![1.0],
            interior_weight: 0.0,
            candidate_multiplier: 40,
            seed: 1,
        },
        _ => return None,
    };
    Some(spec)
}

/// Default configuration of a family on a shape from the catalog.
pub fn default_config(family: Family, shape: &Shape) -> Result<ProblemSpec> {
    let name = match (family, shape) {
        (Family::LbClosedSurface { .. }, Shape::UnitSphere) => "sphere-lb",
        (Family::LbClosedSurface { use_curvature: false }, Shape::Genus2) => "genus2-lb",
        (Family::LbClosedSurface { use_curvature: true }, Shape::Genus2) => "genus2-lb-kappa",
        (Family::SteklovFlat, Shape::UnitDisk) => "disk-steklov",
        (Family::SteklovHelmholtz { .. }, Shape::UnitDisk) => "disk-helmholtz",
        (Family::SchrodingerSteklov { .. }, Shape::UnitDisk) => "disk-schrodinger",
        (Family::SurfaceSteklov, Shape::WavyCatenoid) => "catenoid-steklov",
        _ => {
            return Err(Error::InvalidArgument(format!(
                "no default configuration for {family:?} on {}",
                shape.name()
            )))
        }
    };
    let mut spec = preset(name).expect("catalog preset");
    spec.family = family;
    Ok(spec)
}

//! Shape catalog and differential geometry of level sets.
//!
//! Every shape is described by a level-set function `φ` with `φ < 0` inside
//! and `φ = 0` on the set of interest. Surfaces with boundary additionally
//! carry a [`ParametricPatch`] that bounds the parameter domain and locates
//! the boundary curves.

mod cloud;
mod csv;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec3::{add, cross, dot, norm, normalized, scale, sub, Point};

pub use cloud::{
    farthest_point_selection, fill_distance_estimate, generate_boundary_cloud,
    generate_curve_cloud, generate_interior_cloud, generate_interior_cloud_traced,
    generate_patch_interior_cloud, interior_penalty, CloudParams, InteriorTrace, PointCloud,
};
pub use csv::{read_cloud_csv, write_cloud_csv};

/// Newton iterations allowed when projecting onto the zero set.
pub const MAX_PROJECTION_ITERS: usize = 50;
/// `|φ|` above which a point is not accepted as lying on the zero set.
pub const ON_SURFACE_TOL: f64 = 1e-8;

pub type ScalarField = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(Point) -> Point + Send + Sync>;

/// Which boundary curve of a parametric patch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Curve {
    Lower,
    Upper,
}

/// Surface patch `σ(s, t)` for `s ∈ [0, 2π)` and `lower(s) ≤ t ≤ upper(s)`.
#[derive(Clone)]
pub struct ParametricPatch {
    pub map: Arc<dyn Fn(f64, f64) -> Point + Send + Sync>,
    pub lower: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub upper: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// Inverse of `map` for points on the patch.
    pub locate: Arc<dyn Fn(Point) -> (f64, f64) + Send + Sync>,
}

impl ParametricPatch {
    pub fn bound(&self, curve: Curve, s: f64) -> f64 {
        match curve {
            Curve::Lower => (self.lower)(s),
            Curve::Upper => (self.upper)(s),
        }
    }

    pub fn curve_point(&self, curve: Curve, s: f64) -> Point {
        (self.map)(s, self.bound(curve, s))
    }

    /// Uniform sample of the parameter domain mapped onto the surface.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let s = rng.random_range(0.0..2.0 * PI);
        let (lo, hi) = ((self.lower)(s), (self.upper)(s));
        (self.map)(s, rng.random_range(lo..hi))
    }
}

impl fmt::Debug for ParametricPatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ParametricPatch { .. }")
    }
}

/// A user-supplied level set.
#[derive(Clone)]
pub struct CustomShape {
    pub levelset: ScalarField,
    pub gradient: Option<VectorField>,
    pub bbox: (Point, Point),
    pub dims: usize,
    /// `min φ` over the closed interior, when known.
    pub interior_min: Option<f64>,
    pub patch: Option<ParametricPatch>,
}

impl CustomShape {
    pub fn new(levelset: impl Fn(Point) -> f64 + Send + Sync + 'static, bbox: (Point, Point)) -> Self {
        Self {
            levelset: Arc::new(levelset),
            gradient: None,
            bbox,
            dims: 3,
            interior_min: None,
            patch: None,
        }
    }

    pub fn with_gradient(mut self, g: impl Fn(Point) -> Point + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(g));
        self
    }

    pub fn with_patch(mut self, patch: ParametricPatch) -> Self {
        self.patch = Some(patch);
        self
    }

    pub fn with_interior_min(mut self, a: f64) -> Self {
        self.interior_min = Some(a);
        self
    }

    pub fn planar(mut self) -> Self {
        self.dims = 2;
        self
    }
}

impl fmt::Debug for CustomShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomShape")
            .field("bbox", &self.bbox)
            .field("dims", &self.dims)
            .field("has_gradient", &self.gradient.is_some())
            .field("interior_min", &self.interior_min)
            .field("patch", &self.patch.is_some())
            .finish()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// `‖x‖² − 1` in 3D.
    UnitSphere,
    /// Two-holed surface, see [`genus2_levelset`].
    Genus2,
    /// `x² + y² − 1` in the plane.
    UnitDisk,
    /// Catenoid `(cosh t cos s, cosh t sin s, t)` with edges `t = ±1 + 0.1 sin 3s`.
    WavyCatenoid,
    #[serde(skip)]
    Custom(CustomShape),
}

/// `1/(4((x−1)²+y²)) + 1/(4((x+1)²+y²)) + x²/10 + y²/4 + z² − 1`.
pub fn genus2_levelset(p: Point) -> f64 {
    let [x, y, z] = p;
    let a = (x - 1.0).powi(2) + y * y;
    let b = (x + 1.0).powi(2) + y * y;
    0.25 / a + 0.25 / b + x * x / 10.0 + y * y / 4.0 + z * z - 1.0
}

fn genus2_gradient(p: Point) -> Point {
    let [x, y, z] = p;
    let a = (x - 1.0).powi(2) + y * y;
    let b = (x + 1.0).powi(2) + y * y;
    [
        -(x - 1.0) / (2.0 * a * a) - (x + 1.0) / (2.0 * b * b) + x / 5.0,
        -y / (2.0 * a * a) - y / (2.0 * b * b) + y / 2.0,
        2.0 * z,
    ]
}

fn catenoid_patch() -> ParametricPatch {
    ParametricPatch {
        map: Arc::new(|s, t| [t.cosh() * s.cos(), t.cosh() * s.sin(), t]),
        lower: Arc::new(|s| -1.0 + 0.1 * (3.0 * s).sin()),
        upper: Arc::new(|s| 1.0 + 0.1 * (3.0 * s).sin()),
        locate: Arc::new(|p| (p[1].atan2(p[0]).rem_euclid(2.0 * PI), p[2])),
    }
}

impl Shape {
    pub fn name(&self) -> &'static str {
        match self {
            Shape::UnitSphere => "unit_sphere",
            Shape::Genus2 => "genus2",
            Shape::UnitDisk => "unit_disk",
            Shape::WavyCatenoid => "wavy_catenoid",
            Shape::Custom(_) => "custom_levelset",
        }
    }

    /// Ambient dimension of the shape (2 for planar domains).
    pub fn dims(&self) -> usize {
        match self {
            Shape::UnitDisk => 2,
            Shape::Custom(c) => c.dims,
            _ => 3,
        }
    }

    pub fn levelset(&self, p: Point) -> f64 {
        match self {
            Shape::UnitSphere => dot(p, p) - 1.0,
            Shape::Genus2 => genus2_levelset(p),
            Shape::UnitDisk => p[0] * p[0] + p[1] * p[1] - 1.0,
            Shape::WavyCatenoid => p[0] * p[0] + p[1] * p[1] - p[2].cosh().powi(2),
            Shape::Custom(c) => (c.levelset)(p),
        }
    }

    /// `∇φ`, analytic where available, otherwise central differences with
    /// step `1e-6 · diameter`.
    pub fn gradient(&self, p: Point) -> Point {
        match self {
            Shape::UnitSphere => scale(p, 2.0),
            Shape::Genus2 => genus2_gradient(p),
            Shape::UnitDisk => [2.0 * p[0], 2.0 * p[1], 0.0],
            Shape::WavyCatenoid => [2.0 * p[0], 2.0 * p[1], -(2.0 * p[2]).sinh()],
            Shape::Custom(c) => match &c.gradient {
                Some(g) => g(p),
                None => self.fd_gradient(p, 1e-6 * self.diameter()),
            },
        }
    }

    fn fd_gradient(&self, p: Point, h: f64) -> Point {
        let mut g = [0.0; 3];
        for (i, gi) in g.iter_mut().enumerate().take(self.dims()) {
            let mut fwd = p;
            let mut bwd = p;
            fwd[i] += h;
            bwd[i] -= h;
            *gi = (self.levelset(fwd) - self.levelset(bwd)) / (2.0 * h);
        }
        g
    }

    /// Axis-aligned box that contains the set of interest.
    pub fn bounding_box(&self) -> (Point, Point) {
        match self {
            Shape::UnitSphere => ([-1.5; 3], [1.5; 3]),
            Shape::Genus2 => ([-3.5, -2.2, -1.1], [3.5, 2.2, 1.1]),
            Shape::UnitDisk => ([-1.2, -1.2, 0.0], [1.2, 1.2, 0.0]),
            Shape::WavyCatenoid => ([-1.7, -1.7, -1.2], [1.7, 1.7, 1.2]),
            Shape::Custom(c) => c.bbox,
        }
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        norm(sub(hi, lo))
    }

    /// `min φ` over the closed interior when known in closed form.
    pub fn interior_min(&self) -> Option<f64> {
        match self {
            Shape::UnitSphere | Shape::UnitDisk => Some(-1.0),
            Shape::Custom(c) => c.interior_min,
            _ => None,
        }
    }

    pub fn patch(&self) -> Option<ParametricPatch> {
        match self {
            Shape::WavyCatenoid => Some(catenoid_patch()),
            Shape::Custom(c) => c.patch.clone(),
            _ => None,
        }
    }

    /// Uniform sample from the bounding box.
    pub fn sample_box<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let (lo, hi) = self.bounding_box();
        let mut p = [0.0; 3];
        for i in 0..3 {
            p[i] = if hi[i] > lo[i] {
                rng.random_range(lo[i]..hi[i])
            } else {
                lo[i]
            };
        }
        p
    }

    /// Damped Newton iteration `x ← x − α φ ∇φ / ‖∇φ‖²` onto the zero set.
    pub fn project_to_levelset(&self, x0: Point, tol: f64) -> Result<Point> {
        let max_step = 0.25 * self.diameter();
        let mut x = x0;
        let mut f = self.levelset(x);
        for _ in 0..MAX_PROJECTION_ITERS {
            if !f.is_finite() {
                break;
            }
            if f.abs() <= tol {
                return Ok(x);
            }
            let g = self.gradient(x);
            let gg = dot(g, g);
            if !(gg > 1e-300) {
                return Err(Error::ZeroGradient(x));
            }
            let mut step = scale(g, -f / gg);
            let len = norm(step);
            if len > max_step {
                step = scale(step, max_step / len);
            }
            let mut next = add(x, step);
            let mut f_next = self.levelset(next);
            let mut halvings = 0;
            while !(f_next.abs() < f.abs()) && halvings < 30 {
                step = scale(step, 0.5);
                next = add(x, step);
                f_next = self.levelset(next);
                halvings += 1;
            }
            x = next;
            f = f_next;
        }
        if f.abs() <= tol {
            Ok(x)
        } else {
            Err(Error::ProjectionDiverged {
                start: x0,
                residual: f.abs(),
            })
        }
    }

    fn check_on_surface(&self, x: Point) -> Result<()> {
        let f = self.levelset(x);
        if f.abs() > ON_SURFACE_TOL {
            return Err(Error::InvalidArgument(format!(
                "point {x:?} is not on the zero set (phi = {f:e})"
            )));
        }
        Ok(())
    }

    /// Unit normal `∇φ / ‖∇φ‖` at a point of the zero set.
    pub fn normal(&self, x: Point) -> Result<Point> {
        self.check_on_surface(x)?;
        normalized(self.gradient(x)).ok_or(Error::ZeroGradient(x))
    }

    /// Sum of principal curvatures, `κ = ∇·(∇φ/‖∇φ‖)`.
    pub fn mean_curvature(&self, x: Point) -> Result<f64> {
        self.check_on_surface(x)?;
        match self {
            Shape::UnitSphere => Ok(2.0 / norm(x)),
            _ => self.mean_curvature_fd(x, 1e-5 * self.diameter()),
        }
    }

    /// Central-difference divergence of the unit normal field with step `h`.
    pub fn mean_curvature_fd(&self, x: Point, h: f64) -> Result<f64> {
        let mut kappa = 0.0;
        for i in 0..self.dims() {
            let mut fwd = x;
            let mut bwd = x;
            fwd[i] += h;
            bwd[i] -= h;
            let nf = normalized(self.gradient(fwd)).ok_or(Error::ZeroGradient(fwd))?;
            let nb = normalized(self.gradient(bwd)).ok_or(Error::ZeroGradient(bwd))?;
            kappa += (nf[i] - nb[i]) / (2.0 * h);
        }
        Ok(kappa)
    }

    /// Outward unit conormal at a point of a boundary curve of the patch:
    /// tangent to the surface, normal to the curve.
    pub fn conormal(&self, y: Point) -> Result<Point> {
        let patch = self
            .patch()
            .ok_or(Error::MissingGeometry("shape has no parametrized boundary"))?;
        let (s, t) = (patch.locate)(y);
        let curve = if (t - (patch.upper)(s)).abs() <= (t - (patch.lower)(s)).abs() {
            Curve::Upper
        } else {
            Curve::Lower
        };
        self.curve_conormal(&patch, curve, s)
    }

    pub(crate) fn curve_conormal(&self, patch: &ParametricPatch, curve: Curve, s: f64) -> Result<Point> {
        let y = patch.curve_point(curve, s);
        let h = 1e-5;
        let tangent = scale(
            sub(patch.curve_point(curve, s + h), patch.curve_point(curve, s - h)),
            0.5 / h,
        );
        let tangent = normalized(tangent).ok_or(Error::DegenerateTangent(y))?;
        let n = normalized(self.gradient(y)).ok_or(Error::ZeroGradient(y))?;
        let mut nu = normalized(cross(tangent, n)).ok_or(Error::DegenerateTangent(y))?;
        // A small step along ν must leave the parameter domain.
        let eps = 1e-4 * self.diameter();
        let (s2, t2) = (patch.locate)(add(y, scale(nu, eps)));
        let beyond = match curve {
            Curve::Upper => t2 - (patch.upper)(s2),
            Curve::Lower => (patch.lower)(s2) - t2,
        };
        if beyond < 0.0 {
            nu = scale(nu, -1.0);
        }
        Ok(nu)
    }
}

//! Built-in embedded manifolds with closed-form geodesics.
//!
//! Every manifold exposes an intrinsic parametrization with a convex
//! parameter domain, an embedding into `[-1, 1]^D`, the geodesic distance,
//! Riemannian normal-style coordinates around a center point and a uniform
//! (volume-measure) sampler.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// A point of the ambient cube `[-1, 1]^D`.
pub type AmbientPoint = Vec<f64>;

/// Tolerance for accepting a point as lying on the manifold.
pub const ON_MANIFOLD_TOL: f64 = 1e-9;

/// Default scale of built-in manifolds.
pub const DEFAULT_SCALE: f64 = 0.9;

/// Serializable description of a manifold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ManifoldSpec {
    /// Circle of the given radius in the plane.
    Circle { radius: f64 },
    /// Round 2-sphere in `R^3`.
    Sphere { radius: f64 },
    /// Flat (Clifford) torus `S^1(a) x S^1(b)` in `R^4`.
    Torus { major: f64, minor: f64 },
    /// Rolled rectangle `(c t cos t, h, c t sin t)` with `c = scale / t_max`.
    SwissRoll {
        t_min: f64,
        t_max: f64,
        scale: f64,
        half_height: f64,
    },
    /// Straight segment `[-L, L]` on the real line.
    Segment { half_length: f64 },
    /// A base manifold padded with zeros to `ambient_dim` coordinates and
    /// rotated by a fixed random orthogonal map.
    ProductEmbedding {
        base: Box<ManifoldSpec>,
        ambient_dim: usize,
        seed: u64,
    },
}

impl ManifoldSpec {
    pub fn circle() -> Self {
        Self::Circle {
            radius: DEFAULT_SCALE,
        }
    }

    pub fn sphere() -> Self {
        Self::Sphere {
            radius: DEFAULT_SCALE,
        }
    }

    pub fn torus() -> Self {
        Self::Torus {
            major: 0.63,
            minor: 0.63,
        }
    }

    pub fn swiss_roll() -> Self {
        Self::SwissRoll {
            t_min: PI,
            t_max: 3.0 * PI,
            scale: DEFAULT_SCALE,
            half_height: 0.5,
        }
    }

    pub fn segment() -> Self {
        Self::Segment {
            half_length: DEFAULT_SCALE,
        }
    }

    pub fn embedded(base: ManifoldSpec, ambient_dim: usize, seed: u64) -> Self {
        Self::ProductEmbedding {
            base: Box::new(base),
            ambient_dim,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
enum Shape {
    Circle { r: f64 },
    Sphere { r: f64 },
    Torus { a: f64, b: f64 },
    SwissRoll { t0: f64, t1: f64, c: f64, h: f64 },
    Segment { l: f64 },
}

#[derive(Debug, Clone)]
enum Geometry {
    Base(Shape),
    Embedded {
        base: Box<Manifold>,
        rotation: DMatrix<f64>,
    },
}

/// An embedded compact manifold `X` in `[-1, 1]^D`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ManifoldSpec", into = "ManifoldSpec")]
pub struct Manifold {
    spec: ManifoldSpec,
    geometry: Geometry,
}

impl PartialEq for Manifold {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl From<Manifold> for ManifoldSpec {
    fn from(m: Manifold) -> Self {
        m.spec
    }
}

impl TryFrom<ManifoldSpec> for Manifold {
    type Error = Error;
    fn try_from(spec: ManifoldSpec) -> Result<Self> {
        Manifold::new(spec)
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

fn check_params(theta: &[f64], d: usize) -> Result<()> {
    if theta.len() != d {
        return Err(Error::Domain(format!(
            "expected {d} intrinsic coordinates, got {}",
            theta.len()
        )));
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::Domain("non-finite intrinsic coordinate".into()));
    }
    Ok(())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Angle between two planar vectors, in `[0, pi]`.
fn planar_angle(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] * b[1] - a[1] * b[0]).abs().atan2(a[0] * b[0] + a[1] * b[1])
}

/// Signed angle from `a` to `b`, in `(-pi, pi]`.
fn signed_planar_angle(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] * b[1] - a[1] * b[0]).atan2(a[0] * b[0] + a[1] * b[1])
}

fn cross3(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

impl Shape {
    fn ambient_dim(&self) -> usize {
        match self {
            Shape::Circle { .. } => 2,
            Shape::Sphere { .. } => 3,
            Shape::Torus { .. } => 4,
            Shape::SwissRoll { .. } => 3,
            Shape::Segment { .. } => 1,
        }
    }

    fn intrinsic_dim(&self) -> usize {
        match self {
            Shape::Circle { .. } | Shape::Segment { .. } => 1,
            _ => 2,
        }
    }

    fn embed(&self, th: &[f64]) -> Result<Vec<f64>> {
        check_params(th, self.intrinsic_dim())?;
        match *self {
            Shape::Circle { r } => Ok(vec![r * th[0].cos(), r * th[0].sin()]),
            Shape::Sphere { r } => {
                if !(0.0..=PI).contains(&th[0]) {
                    return Err(Error::Domain(format!(
                        "polar angle {} outside [0, pi]",
                        th[0]
                    )));
                }
                let (sp, cp) = th[0].sin_cos();
                let (sa, ca) = th[1].sin_cos();
                Ok(vec![r * sp * ca, r * sp * sa, r * cp])
            }
            Shape::Torus { a, b } => Ok(vec![
                a * th[0].cos(),
                a * th[0].sin(),
                b * th[1].cos(),
                b * th[1].sin(),
            ]),
            Shape::SwissRoll { t0, t1, c, h } => {
                if !(t0..=t1).contains(&th[0]) || !(-h..=h).contains(&th[1]) {
                    return Err(Error::Domain(format!(
                        "swiss roll parameters ({}, {}) outside [{t0}, {t1}] x [-{h}, {h}]",
                        th[0], th[1]
                    )));
                }
                let t = th[0];
                Ok(vec![c * t * t.cos(), th[1], c * t * t.sin()])
            }
            Shape::Segment { l } => {
                if !(-l..=l).contains(&th[0]) {
                    return Err(Error::Domain(format!(
                        "segment parameter {} outside [-{l}, {l}]",
                        th[0]
                    )));
                }
                Ok(vec![th[0]])
            }
        }
    }

    /// Intrinsic parameters of a point assumed to be on the shape.
    fn params(&self, x: &[f64]) -> Vec<f64> {
        match *self {
            Shape::Circle { .. } => vec![x[1].atan2(x[0])],
            Shape::Sphere { .. } => vec![x[0].hypot(x[1]).atan2(x[2]), x[1].atan2(x[0])],
            Shape::Torus { .. } => vec![x[1].atan2(x[0]), x[3].atan2(x[2])],
            Shape::SwissRoll { t0, t1, c, h } => {
                let t = (x[0].hypot(x[2]) / c).clamp(t0, t1);
                vec![t, x[1].clamp(-h, h)]
            }
            Shape::Segment { l } => vec![x[0].clamp(-l, l)],
        }
    }

    fn residual(&self, x: &[f64]) -> f64 {
        match *self {
            Shape::Circle { r } | Shape::Sphere { r } => (norm(x) - r).abs(),
            Shape::Torus { a, b } => {
                (x[0].hypot(x[1]) - a).hypot(x[2].hypot(x[3]) - b)
            }
            Shape::SwissRoll { .. } => {
                let p = self.embed(&self.params(x)).expect("clamped parameters");
                norm(&[x[0] - p[0], x[1] - p[1], x[2] - p[2]])
            }
            Shape::Segment { l } => (x[0].abs() - l).max(0.0),
        }
    }

    fn geodesic(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            Shape::Circle { r } => r * planar_angle([x[0], x[1]], [y[0], y[1]]),
            Shape::Sphere { r } => {
                let c = cross3(x, y);
                r * norm(&c).atan2(dot(x, y))
            }
            Shape::Torus { a, b } => {
                let d1 = a * planar_angle([x[0], x[1]], [y[0], y[1]]);
                let d2 = b * planar_angle([x[2], x[3]], [y[2], y[3]]);
                d1.hypot(d2)
            }
            Shape::SwissRoll { .. } => {
                let (p, q) = (self.params(x), self.params(y));
                (self.arc_length(p[0]) - self.arc_length(q[0])).hypot(p[1] - q[1])
            }
            Shape::Segment { .. } => (x[0] - y[0]).abs(),
        }
    }

    /// Normal-style coordinates of `x` around `center` (geodesic polar
    /// coordinates on the sphere, arc-length coordinates elsewhere). The
    /// Euclidean norm of the result equals the geodesic distance.
    fn normal_coords(&self, center: &[f64], x: &[f64]) -> Vec<f64> {
        match *self {
            Shape::Circle { r } => {
                vec![r * signed_planar_angle([center[0], center[1]], [x[0], x[1]])]
            }
            Shape::Sphere { r } => {
                let u: Vec<f64> = center.iter().map(|c| c / norm(center)).collect();
                let v: Vec<f64> = x.iter().map(|c| c / norm(x)).collect();
                let (e1, e2) = sphere_frame(&u);
                let cos = dot(&u, &v);
                let p: Vec<f64> = (0..3).map(|i| v[i] - cos * u[i]).collect();
                let sin = norm(&p);
                let theta = sin.atan2(cos);
                if sin < 1e-300 {
                    // center itself or its antipode
                    return if theta < FRAC_PI_2 {
                        vec![0.0, 0.0]
                    } else {
                        vec![r * PI, 0.0]
                    };
                }
                let s = r * theta / sin;
                vec![s * dot(&p, &e1), s * dot(&p, &e2)]
            }
            Shape::Torus { a, b } => vec![
                a * signed_planar_angle([center[0], center[1]], [x[0], x[1]]),
                b * signed_planar_angle([center[2], center[3]], [x[2], x[3]]),
            ],
            Shape::SwissRoll { .. } => {
                let (p, q) = (self.params(center), self.params(x));
                vec![self.arc_length(q[0]) - self.arc_length(p[0]), q[1] - p[1]]
            }
            Shape::Segment { .. } => vec![x[0] - center[0]],
        }
    }

    fn nearest_point(&self, z: &[f64]) -> Vec<f64> {
        match *self {
            Shape::Circle { r } | Shape::Sphere { r } => {
                let n = norm(z);
                if n == 0.0 {
                    let mut p = vec![0.0; z.len()];
                    p[0] = r;
                    return p;
                }
                z.iter().map(|v| r * v / n).collect()
            }
            Shape::Torus { a, b } => {
                let n1 = z[0].hypot(z[1]);
                let n2 = z[2].hypot(z[3]);
                let (p0, p1) = if n1 == 0.0 { (a, 0.0) } else { (a * z[0] / n1, a * z[1] / n1) };
                let (p2, p3) = if n2 == 0.0 { (b, 0.0) } else { (b * z[2] / n2, b * z[3] / n2) };
                vec![p0, p1, p2, p3]
            }
            Shape::SwissRoll { t0, t1, c, h } => {
                let dist2 = |t: f64| (c * t * t.cos() - z[0]).powi(2) + (c * t * t.sin() - z[2]).powi(2);
                let steps = 4096;
                let mut best = t0;
                let mut best_d = f64::INFINITY;
                for i in 0..=steps {
                    let t = t0 + (t1 - t0) * i as f64 / steps as f64;
                    let d = dist2(t);
                    if d < best_d {
                        best_d = d;
                        best = t;
                    }
                }
                // golden-section refinement on the bracketing interval
                let w = (t1 - t0) / steps as f64;
                let (mut lo, mut hi) = ((best - w).max(t0), (best + w).min(t1));
                let g = 0.5 * (5f64.sqrt() - 1.0);
                for _ in 0..80 {
                    let m1 = hi - g * (hi - lo);
                    let m2 = lo + g * (hi - lo);
                    if dist2(m1) < dist2(m2) {
                        hi = m2;
                    } else {
                        lo = m1;
                    }
                }
                let t = 0.5 * (lo + hi);
                vec![c * t * t.cos(), z[1].clamp(-h, h), c * t * t.sin()]
            }
            Shape::Segment { l } => vec![z[0].clamp(-l, l)],
        }
    }

    fn sample_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match *self {
            Shape::Circle { .. } => vec![rng.random_range(0.0..2.0 * PI)],
            Shape::Sphere { .. } => {
                let z: f64 = rng.random_range(-1.0..=1.0);
                vec![z.acos(), rng.random_range(0.0..2.0 * PI)]
            }
            Shape::Torus { .. } => vec![
                rng.random_range(0.0..2.0 * PI),
                rng.random_range(0.0..2.0 * PI),
            ],
            Shape::SwissRoll { t0, t1, h, .. } => {
                let s = rng.random_range(self.arc_length(t0)..=self.arc_length(t1));
                vec![self.arc_length_inverse(s).clamp(t0, t1), rng.random_range(-h..=h)]
            }
            Shape::Segment { l } => vec![rng.random_range(-l..=l)],
        }
    }

    fn arc_length(&self, t: f64) -> f64 {
        match *self {
            Shape::SwissRoll { c, .. } => 0.5 * c * (t * (1.0 + t * t).sqrt() + t.asinh()),
            _ => unreachable!("arc length is only defined for the swiss roll"),
        }
    }

    fn arc_length_inverse(&self, s: f64) -> f64 {
        let (t0, t1, c) = match *self {
            Shape::SwissRoll { t0, t1, c, .. } => (t0, t1, c),
            _ => unreachable!("arc length is only defined for the swiss roll"),
        };
        let mut t = 0.5 * (t0 + t1);
        for _ in 0..60 {
            let f = self.arc_length(t) - s;
            let df = c * (1.0 + t * t).sqrt();
            let next = (t - f / df).clamp(t0, t1);
            if (next - t).abs() < 1e-15 * t.abs().max(1.0) {
                return next;
            }
            t = next;
        }
        t
    }

    fn diameter(&self) -> f64 {
        match *self {
            Shape::Circle { r } | Shape::Sphere { r } => PI * r,
            Shape::Torus { a, b } => PI * a.hypot(b),
            Shape::SwissRoll { t0, t1, h, .. } => {
                (self.arc_length(t1) - self.arc_length(t0)).hypot(2.0 * h)
            }
            Shape::Segment { l } => 2.0 * l,
        }
    }

    fn injectivity_radius(&self) -> f64 {
        match *self {
            Shape::Circle { r } | Shape::Sphere { r } => PI * r,
            Shape::Torus { a, b } => PI * a.min(b),
            Shape::SwissRoll { .. } | Shape::Segment { .. } => f64::INFINITY,
        }
    }

    fn analytic_embedding_constant(&self) -> Option<f64> {
        match self {
            Shape::Circle { .. } | Shape::Sphere { .. } | Shape::Torus { .. } => Some(FRAC_PI_2),
            Shape::Segment { .. } => Some(1.0),
            Shape::SwissRoll { .. } => None,
        }
    }

    fn default_chart_radius(&self) -> f64 {
        match *self {
            Shape::Circle { r } | Shape::Sphere { r } => 0.5 * PI * r,
            Shape::Torus { a, b } => 0.5 * PI * a.min(b),
            Shape::SwissRoll { h, .. } => h,
            Shape::Segment { l } => l,
        }
    }

    fn max_norm(&self) -> f64 {
        match *self {
            Shape::Circle { r } | Shape::Sphere { r } => r,
            Shape::Torus { a, b } => a.hypot(b),
            Shape::SwissRoll { t1, c, h, .. } => (c * t1).hypot(h),
            Shape::Segment { l } => l,
        }
    }
}

/// Orthonormal tangent frame at the unit vector `u`.
fn sphere_frame(u: &[f64]) -> ([f64; 3], [f64; 3]) {
    let mut axis = 0;
    for i in 1..3 {
        if u[i].abs() < u[axis].abs() {
            axis = i;
        }
    }
    let mut a = [0.0; 3];
    a[axis] = 1.0;
    let proj = dot(&a, u);
    let mut e1 = [a[0] - proj * u[0], a[1] - proj * u[1], a[2] - proj * u[2]];
    let n = norm(&e1);
    e1.iter_mut().for_each(|v| *v /= n);
    let e2 = cross3(u, &e1);
    (e1, e2)
}

fn random_rotation(dim: usize, seed_value: u64) -> DMatrix<f64> {
    let mut rng = seed::rng_for(seed_value, &[0x0e0b]);
    let g = DMatrix::<f64>::from_fn(dim, dim, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

impl Manifold {
    pub fn new(spec: ManifoldSpec) -> Result<Self> {
        let geometry = match &spec {
            ManifoldSpec::Circle { radius } => Geometry::Base(Shape::Circle {
                r: positive("radius", *radius)?,
            }),
            ManifoldSpec::Sphere { radius } => Geometry::Base(Shape::Sphere {
                r: positive("radius", *radius)?,
            }),
            ManifoldSpec::Torus { major, minor } => Geometry::Base(Shape::Torus {
                a: positive("major", *major)?,
                b: positive("minor", *minor)?,
            }),
            ManifoldSpec::SwissRoll {
                t_min,
                t_max,
                scale,
                half_height,
            } => {
                let t0 = positive("t_min", *t_min)?;
                if !(t_max.is_finite() && *t_max > t0) {
                    return Err(Error::Config("swiss roll needs t_max > t_min".into()));
                }
                Geometry::Base(Shape::SwissRoll {
                    t0,
                    t1: *t_max,
                    c: positive("scale", *scale)? / t_max,
                    h: positive("half_height", *half_height)?,
                })
            }
            ManifoldSpec::Segment { half_length } => Geometry::Base(Shape::Segment {
                l: positive("half_length", *half_length)?,
            }),
            ManifoldSpec::ProductEmbedding {
                base,
                ambient_dim,
                seed,
            } => {
                let base = Manifold::new((**base).clone())?;
                if *ambient_dim < base.ambient_dim() {
                    return Err(Error::Config(format!(
                        "ambient dimension {ambient_dim} below base dimension {}",
                        base.ambient_dim()
                    )));
                }
                if base.max_norm() > 1.0 {
                    return Err(Error::Config(
                        "rotated embedding would leave [-1,1]^D: base norm exceeds 1".into(),
                    ));
                }
                Geometry::Embedded {
                    rotation: random_rotation(*ambient_dim, *seed),
                    base: Box::new(base),
                }
            }
        };
        if let Geometry::Base(shape) = &geometry {
            let extent = match *shape {
                Shape::Circle { r } | Shape::Sphere { r } => r,
                Shape::Torus { a, b } => a.max(b),
                Shape::SwissRoll { c, t1, h, .. } => (c * t1).max(h),
                Shape::Segment { l } => l,
            };
            if extent > 1.0 {
                return Err(Error::Config("manifold leaves [-1,1]^D".into()));
            }
        }
        Ok(Self { spec, geometry })
    }

    pub fn spec(&self) -> &ManifoldSpec {
        &self.spec
    }

    pub fn ambient_dim(&self) -> usize {
        match &self.geometry {
            Geometry::Base(s) => s.ambient_dim(),
            Geometry::Embedded { rotation, .. } => rotation.nrows(),
        }
    }

    pub fn intrinsic_dim(&self) -> usize {
        match &self.geometry {
            Geometry::Base(s) => s.intrinsic_dim(),
            Geometry::Embedded { base, .. } => base.intrinsic_dim(),
        }
    }

    /// Maps intrinsic parameters to the ambient point.
    pub fn embed(&self, theta: &[f64]) -> Result<AmbientPoint> {
        match &self.geometry {
            Geometry::Base(s) => s.embed(theta),
            Geometry::Embedded { base, rotation } => {
                Ok(self.lift(&base.embed(theta)?, rotation))
            }
        }
    }

    fn lift(&self, base_point: &[f64], rotation: &DMatrix<f64>) -> Vec<f64> {
        let mut padded = DVector::<f64>::zeros(rotation.nrows());
        padded.rows_mut(0, base_point.len()).copy_from_slice(base_point);
        (rotation * padded).iter().copied().collect()
    }

    /// Splits an ambient point into base-space coordinates and the norm of
    /// its component orthogonal to the base subspace.
    fn to_base(&self, x: &[f64]) -> Option<(Vec<f64>, f64)> {
        match &self.geometry {
            Geometry::Base(_) => None,
            Geometry::Embedded { base, rotation } => {
                let v = DVector::from_column_slice(x);
                let local = rotation.tr_mul(&v);
                let k = base.ambient_dim();
                let off = local.rows(k, local.nrows() - k).norm();
                Some((local.rows(0, k).iter().copied().collect(), off))
            }
        }
    }

    /// Coordinates of `x` in the innermost base shape's ambient space.
    /// Target functions are evaluated on these, so the same regression
    /// function can be re-embedded in different ambient dimensions.
    pub fn canonical_coords(&self, x: &[f64]) -> Vec<f64> {
        match &self.geometry {
            Geometry::Base(_) => x.to_vec(),
            Geometry::Embedded { base, .. } => {
                base.canonical_coords(&self.to_base(x).expect("embedded").0)
            }
        }
    }

    /// Length of [`Manifold::canonical_coords`].
    pub fn canonical_dim(&self) -> usize {
        match &self.geometry {
            Geometry::Base(s) => s.ambient_dim(),
            Geometry::Embedded { base, .. } => base.canonical_dim(),
        }
    }

    /// Intrinsic parameters of an on-manifold point.
    pub fn params(&self, x: &[f64]) -> Vec<f64> {
        match &self.geometry {
            Geometry::Base(s) => s.params(x),
            Geometry::Embedded { base, .. } => base.params(&self.to_base(x).expect("embedded").0),
        }
    }

    /// Distance-like deviation of `x` from the manifold.
    pub fn residual(&self, x: &[f64]) -> f64 {
        if x.len() != self.ambient_dim() || x.iter().any(|v| !v.is_finite()) {
            return f64::INFINITY;
        }
        match &self.geometry {
            Geometry::Base(s) => s.residual(x),
            Geometry::Embedded { base, .. } => {
                let (b, off) = self.to_base(x).expect("embedded");
                base.residual(&b).hypot(off)
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.residual(x) <= ON_MANIFOLD_TOL
    }

    fn check_on(&self, x: &[f64]) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "point is off the manifold (residual {:.3e})",
                self.residual(x)
            )))
        }
    }

    /// Geodesic distance between two on-manifold points.
    pub fn geodesic_distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_on(x)?;
        self.check_on(y)?;
        Ok(self.geodesic_unchecked(x, y))
    }

    pub(crate) fn geodesic_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.geometry {
            Geometry::Base(s) => s.geodesic(x, y),
            Geometry::Embedded { base, .. } => base.geodesic_unchecked(
                &self.to_base(x).expect("embedded").0,
                &self.to_base(y).expect("embedded").0,
            ),
        }
    }

    /// Normal-style coordinates of `x` around `center`; their norm is the
    /// geodesic distance for points inside the injectivity radius.
    pub fn normal_coords(&self, center: &[f64], x: &[f64]) -> Vec<f64> {
        match &self.geometry {
            Geometry::Base(s) => s.normal_coords(center, x),
            Geometry::Embedded { base, .. } => base.normal_coords(
                &self.to_base(center).expect("embedded").0,
                &self.to_base(x).expect("embedded").0,
            ),
        }
    }

    /// Closest manifold point to an arbitrary ambient point.
    pub fn nearest_point(&self, z: &[f64]) -> AmbientPoint {
        match &self.geometry {
            Geometry::Base(s) => s.nearest_point(z),
            Geometry::Embedded { base, rotation } => {
                let (b, _) = self.to_base(z).expect("embedded");
                self.lift(&base.nearest_point(&b), rotation)
            }
        }
    }

    /// Intrinsic parameters of a point drawn from the normalized volume
    /// measure.
    pub fn sample_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.geometry {
            Geometry::Base(s) => s.sample_params(rng),
            Geometry::Embedded { base, .. } => base.sample_params(rng),
        }
    }

    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> AmbientPoint {
        let th = self.sample_params(rng);
        self.embed(&th).expect("sampled parameters lie in the domain")
    }

    pub fn diameter(&self) -> f64 {
        self.delegate(Shape::diameter)
    }

    pub fn injectivity_radius(&self) -> f64 {
        self.delegate(Shape::injectivity_radius)
    }

    /// `sup d_G / chord` when known in closed form.
    pub fn analytic_embedding_constant(&self) -> Option<f64> {
        match &self.geometry {
            Geometry::Base(s) => s.analytic_embedding_constant(),
            Geometry::Embedded { base, .. } => base.analytic_embedding_constant(),
        }
    }

    pub fn default_chart_radius(&self) -> f64 {
        self.delegate(Shape::default_chart_radius)
    }

    fn max_norm(&self) -> f64 {
        self.delegate(Shape::max_norm)
    }

    fn delegate(&self, f: fn(&Shape) -> f64) -> f64 {
        match &self.geometry {
            Geometry::Base(s) => f(s),
            Geometry::Embedded { base, .. } => base.delegate(f),
        }
    }

    /// Largest absolute value any ambient or canonical coordinate can take.
    pub fn coordinate_bound(&self) -> f64 {
        self.max_norm()
    }
}

/// Embeds intrinsic coordinates.
pub fn embed(manifold: &Manifold, theta: &[f64]) -> Result<AmbientPoint> {
    manifold.embed(theta)
}

/// Geodesic distance between two on-manifold points.
pub fn geodesic_distance(manifold: &Manifold, x: &[f64], y: &[f64]) -> Result<f64> {
    manifold.geodesic_distance(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    fn all_specs() -> Vec<ManifoldSpec> {
        vec![
            ManifoldSpec::circle(),
            ManifoldSpec::sphere(),
            ManifoldSpec::torus(),
            ManifoldSpec::swiss_roll(),
            ManifoldSpec::segment(),
            ManifoldSpec::embedded(ManifoldSpec::circle(), 3, 5),
            ManifoldSpec::embedded(ManifoldSpec::sphere(), 10, 9),
        ]
    }

    #[test]
    fn embed_examples() {
        let c = Manifold::new(ManifoldSpec::circle()).unwrap();
        assert!(close(&c.embed(&[0.0]).unwrap(), &[0.9, 0.0], 0.0));
        assert!(close(&c.embed(&[FRAC_PI_2]).unwrap(), &[0.0, 0.9], 1e-15));
        let s = Manifold::new(ManifoldSpec::sphere()).unwrap();
        assert!(close(&s.embed(&[0.0, 0.0]).unwrap(), &[0.0, 0.0, 0.9], 0.0));
    }

    #[test]
    fn embed_domain_errors() {
        let s = Manifold::new(ManifoldSpec::sphere()).unwrap();
        assert!(matches!(s.embed(&[4.0, 0.0]), Err(Error::Domain(_))));
        assert!(matches!(s.embed(&[0.1]), Err(Error::Domain(_))));
        let c = Manifold::new(ManifoldSpec::circle()).unwrap();
        assert!(matches!(c.embed(&[f64::NAN]), Err(Error::Domain(_))));
        let seg = Manifold::new(ManifoldSpec::segment()).unwrap();
        assert!(seg.embed(&[1.0]).is_err());
    }

    #[test]
    fn geodesic_examples() {
        let c = Manifold::new(ManifoldSpec::circle()).unwrap();
        let a = c.embed(&[0.3]).unwrap();
        let b = c.embed(&[0.3 + PI]).unwrap();
        assert!((c.geodesic_distance(&a, &b).unwrap() - 0.9 * PI).abs() < 1e-12);
        assert_eq!(c.geodesic_distance(&a, &a).unwrap(), 0.0);

        let s = Manifold::new(ManifoldSpec::sphere()).unwrap();
        let pole = s.embed(&[0.0, 0.0]).unwrap();
        let eq = s.embed(&[FRAC_PI_2, 1.0]).unwrap();
        assert!((s.geodesic_distance(&pole, &eq).unwrap() - 0.9 * FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn geodesic_rejects_off_manifold() {
        let c = Manifold::new(ManifoldSpec::circle()).unwrap();
        assert!(matches!(
            c.geodesic_distance(&[0.5, 0.0], &[0.9, 0.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn embedded_points_stay_in_cube_and_on_manifold() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for spec in all_specs() {
            let m = Manifold::new(spec.clone()).unwrap();
            for _ in 0..500 {
                let x = m.sample_point(&mut rng);
                assert_eq!(x.len(), m.ambient_dim());
                assert!(x.iter().all(|v| v.abs() <= 1.0), "{spec:?}");
                assert!(m.residual(&x) < 1e-12, "{spec:?} residual {}", m.residual(&x));
                let back = m.embed(&m.params(&x)).unwrap();
                assert!(close(&back, &x, 1e-12), "{spec:?}");
            }
        }
    }

    #[test]
    fn metric_axioms_and_local_comparability() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for spec in all_specs() {
            let m = Manifold::new(spec.clone()).unwrap();
            let delta = m.default_chart_radius();
            for _ in 0..1000 {
                let x = m.sample_point(&mut rng);
                let y = m.sample_point(&mut rng);
                let z = m.sample_point(&mut rng);
                let dxy = m.geodesic_distance(&x, &y).unwrap();
                assert_eq!(dxy, m.geodesic_distance(&y, &x).unwrap(), "{spec:?}");
                let dxz = m.geodesic_distance(&x, &z).unwrap();
                let dzy = m.geodesic_distance(&z, &y).unwrap();
                assert!(dxy <= dxz + dzy + 1e-9, "{spec:?}");
                assert!(dxy <= m.diameter() + 1e-12);
                let chord = norm(&x.iter().zip(&y).map(|(a, b)| a - b).collect::<Vec<_>>());
                assert!(chord <= dxy + 1e-12, "{spec:?}");
                if dxy < delta {
                    assert!(0.5 * dxy <= chord && chord <= 2.0 * dxy, "{spec:?}");
                }
            }
        }
    }

    #[test]
    fn normal_coords_norm_is_geodesic_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for spec in all_specs() {
            let m = Manifold::new(spec.clone()).unwrap();
            let delta = m.default_chart_radius();
            for _ in 0..500 {
                let c = m.sample_point(&mut rng);
                let x = m.sample_point(&mut rng);
                let d = m.geodesic_distance(&c, &x).unwrap();
                if d < delta {
                    assert!((norm(&m.normal_coords(&c, &x)) - d).abs() < 1e-9, "{spec:?}");
                }
            }
        }
    }

    #[test]
    fn nearest_point_is_on_manifold_and_not_beaten_by_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for spec in all_specs() {
            let m = Manifold::new(spec.clone()).unwrap();
            let pts: Vec<_> = (0..2000).map(|_| m.sample_point(&mut rng)).collect();
            for _ in 0..20 {
                let z: Vec<f64> = (0..m.ambient_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let p = m.nearest_point(&z);
                assert!(m.residual(&p) < 1e-9, "{spec:?}");
                let dp = norm(&p.iter().zip(&z).map(|(a, b)| a - b).collect::<Vec<_>>());
                for q in &pts {
                    let dq = norm(&q.iter().zip(&z).map(|(a, b)| a - b).collect::<Vec<_>>());
                    assert!(dp <= dq + 1e-9, "{spec:?}");
                }
            }
        }
    }

    #[test]
    fn spec_round_trips_through_json() {
        for spec in all_specs() {
            let m = Manifold::new(spec).unwrap();
            let s = serde_json::to_string(&m).unwrap();
            let back: Manifold = serde_json::from_str(&s).unwrap();
            assert_eq!(back, m);
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(Manifold::new(ManifoldSpec::Circle { radius: -1.0 }).is_err());
        assert!(Manifold::new(ManifoldSpec::Circle { radius: 1.5 }).is_err());
        assert!(Manifold::new(ManifoldSpec::embedded(ManifoldSpec::sphere(), 2, 0)).is_err());
    }
}

//! Ground-truth geometry: star-shaped composite objects, target holes, and
//! the exact radius/margin oracles used to grade every estimator.
//!
//! Conventions: directions are unit vectors `d(θ,φ) = (cosφ cosθ, cosφ sinθ, sinφ)`
//! with θ ∈ [−π, π) and φ ∈ [−π/2, π/2]. Units are meters and radians.
//! Orientations compose as `Rz(γ)·Ry(β)·Rx(α)` applied to the object frame.

use nalgebra::{Rotation3, UnitQuaternion, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hard cap on object width from the task setting (5 cm).
pub const MAX_OBJECT_WIDTH: f64 = 0.05;
/// Largest allowed max/min radius ratio; operationalizes "aspect close to 1".
pub const MAX_ASPECT_RATIO: f64 = 2.5;
/// φ samples used by the dense projection oracle; odd so φ = 0 is on the grid.
const ORACLE_PHI_SAMPLES: usize = 257;
/// Angular resolution for width/aspect scans during generation.
const SHAPE_SCAN_RES: usize = 64;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("object generation failed after {attempts} draws: {invariant} violated")]
    Generation { attempts: u32, invariant: &'static str },
    #[error("invalid {what}: {why}")]
    Invalid { what: &'static str, why: String },
}

/// Unit direction for spherical angles.
#[inline]
pub fn direction(theta: f64, phi: f64) -> Vector3<f64> {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Vector3::new(cp * ct, cp * st, sp)
}

/// Spherical angles (θ, φ) of a direction vector (not necessarily unit).
#[inline]
pub fn spherical_angles(d: &Vector3<f64>) -> (f64, f64) {
    let n = d.norm();
    let theta = d.y.atan2(d.x);
    let phi = (d.z / n).clamp(-1.0, 1.0).asin();
    (theta, phi)
}

/// Wrap an angle into [−π, π).
#[inline]
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut w = (a + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
    if w >= std::f64::consts::PI {
        w -= two_pi;
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrimitiveKind {
    Sphere,
    Box,
    Cylinder,
}

/// One transformed basic shape. `half_extents` are semi-axes: for spheres an
/// ellipsoid's semi-axes, for cylinders (rx, ry, half-height) with the axis
/// along local z.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Primitive {
    pub kind: PrimitiveKind,
    #[serde(rename = "halfExtents", with = "vec3_serde")]
    pub half_extents: Vector3<f64>,
    #[serde(with = "quat_serde")]
    pub rotation: UnitQuaternion<f64>,
    #[serde(with = "vec3_serde")]
    pub offset: Vector3<f64>,
}

mod vec3_serde {
    use nalgebra::Vector3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vector3<f64>, s: S) -> Result<S::Ok, S::Error> {
        [v.x, v.y, v.z].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector3<f64>, D::Error> {
        let a = <[f64; 3]>::deserialize(d)?;
        Ok(Vector3::new(a[0], a[1], a[2]))
    }
}

mod quat_serde {
    use nalgebra::{Quaternion, UnitQuaternion};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    // wire order: [w, x, y, z]
    pub fn serialize<S: Serializer>(q: &UnitQuaternion<f64>, s: S) -> Result<S::Ok, S::Error> {
        [q.w, q.i, q.j, q.k].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<UnitQuaternion<f64>, D::Error> {
        let a = <[f64; 4]>::deserialize(d)?;
        Ok(UnitQuaternion::from_quaternion(Quaternion::new(a[0], a[1], a[2], a[3])))
    }
}

impl Primitive {
    pub fn sphere(radius: f64) -> Self {
        Primitive {
            kind: PrimitiveKind::Sphere,
            half_extents: Vector3::repeat(radius),
            rotation: UnitQuaternion::identity(),
            offset: Vector3::zeros(),
        }
    }

    fn validate(&self) -> Result<(), GeometryError> {
        if !(self.half_extents.min() > 0.0) {
            return Err(GeometryError::Invalid {
                what: "primitive",
                why: format!("half extents must be positive, got {:?}", self.half_extents),
            });
        }
        if (self.rotation.norm() - 1.0).abs() > 1e-9 {
            return Err(GeometryError::Invalid {
                what: "primitive",
                why: "rotation quaternion not normalized".into(),
            });
        }
        Ok(())
    }

    /// Parametric interval [t_in, t_out] where the ray `t·d` (from the world
    /// origin, `d` unit) is inside this primitive. None if the ray misses or
    /// the primitive lies entirely behind the origin.
    pub fn ray_interval(&self, d: &Vector3<f64>) -> Option<(f64, f64)> {
        let inv = self.rotation.inverse();
        let o = inv * (-self.offset);
        let dl = inv * d;
        let (lo, hi) = match self.kind {
            PrimitiveKind::Sphere => ellipsoid_interval(&o, &dl, &self.half_extents)?,
            PrimitiveKind::Box => box_interval(&o, &dl, &self.half_extents)?,
            PrimitiveKind::Cylinder => cylinder_interval(&o, &dl, &self.half_extents)?,
        };
        if hi <= 0.0 {
            None
        } else {
            Some((lo, hi))
        }
    }
}

fn ellipsoid_interval(o: &Vector3<f64>, d: &Vector3<f64>, he: &Vector3<f64>) -> Option<(f64, f64)> {
    let os = o.component_div(he);
    let ds = d.component_div(he);
    quadratic_interval(ds.norm_squared(), 2.0 * os.dot(&ds), os.norm_squared() - 1.0)
}

fn box_interval(o: &Vector3<f64>, d: &Vector3<f64>, he: &Vector3<f64>) -> Option<(f64, f64)> {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for i in 0..3 {
        if d[i].abs() < 1e-15 {
            if o[i].abs() > he[i] {
                return None;
            }
        } else {
            let ta = (-he[i] - o[i]) / d[i];
            let tb = (he[i] - o[i]) / d[i];
            lo = lo.max(ta.min(tb));
            hi = hi.min(ta.max(tb));
        }
    }
    if hi >= lo {
        Some((lo, hi))
    } else {
        None
    }
}

fn cylinder_interval(o: &Vector3<f64>, d: &Vector3<f64>, he: &Vector3<f64>) -> Option<(f64, f64)> {
    // radial part against the (possibly elliptical) cross section
    let ox = o.x / he.x;
    let oy = o.y / he.y;
    let dx = d.x / he.x;
    let dy = d.y / he.y;
    let a = dx * dx + dy * dy;
    let (mut lo, mut hi) = if a < 1e-30 {
        if ox * ox + oy * oy > 1.0 {
            return None;
        }
        (f64::NEG_INFINITY, f64::INFINITY)
    } else {
        quadratic_interval(a, 2.0 * (ox * dx + oy * dy), ox * ox + oy * oy - 1.0)?
    };
    // cap planes z = ±half height
    if d.z.abs() < 1e-15 {
        if o.z.abs() > he.z {
            return None;
        }
    } else {
        let ta = (-he.z - o.z) / d.z;
        let tb = (he.z - o.z) / d.z;
        lo = lo.max(ta.min(tb));
        hi = hi.min(ta.max(tb));
    }
    if hi >= lo {
        Some((lo, hi))
    } else {
        None
    }
}

fn quadratic_interval(a: f64, b: f64, c: f64) -> Option<(f64, f64)> {
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    Some(((-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)))
}

/// Ground-truth object: the union of 1–3 transformed primitives, star-shaped
/// about the origin so the surface is a single-valued radius function r(θ,φ).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ObjectDoc", into = "ObjectDoc")]
pub struct SolidObject {
    primitives: Vec<Primitive>,
    seed: u64,
    max_width: f64,
}

#[derive(Serialize, Deserialize)]
struct ObjectDoc {
    primitives: Vec<Primitive>,
    seed: u64,
}

impl From<SolidObject> for ObjectDoc {
    fn from(o: SolidObject) -> Self {
        ObjectDoc { primitives: o.primitives, seed: o.seed }
    }
}

impl TryFrom<ObjectDoc> for SolidObject {
    type Error = GeometryError;
    fn try_from(doc: ObjectDoc) -> Result<Self, Self::Error> {
        SolidObject::new(doc.primitives, doc.seed)
    }
}

impl SolidObject {
    /// Builds an object from explicit primitives, validating counts and
    /// computing the width scan. Star-shapedness is NOT enforced here; use
    /// [`star_shape_check`] or [`generate_object`] when it matters.
    pub fn new(primitives: Vec<Primitive>, seed: u64) -> Result<Self, GeometryError> {
        if primitives.is_empty() || primitives.len() > 3 {
            return Err(GeometryError::Invalid {
                what: "object",
                why: format!("expected 1..=3 primitives, got {}", primitives.len()),
            });
        }
        for p in &primitives {
            p.validate()?;
        }
        let mut obj = SolidObject { primitives, seed, max_width: 0.0 };
        obj.max_width = obj.width_scan().0;
        Ok(obj)
    }

    pub fn primitives(&self) -> &[Primitive] {
        &self.primitives
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn max_width(&self) -> f64 {
        self.max_width
    }

    /// Exact surface distance from the origin along a (not necessarily unit)
    /// direction. Returns 0.0 if no primitive is crossed, which cannot happen
    /// for a valid star-shaped object.
    pub fn radius_dir(&self, dir: &Vector3<f64>) -> f64 {
        let d = dir / dir.norm();
        self.primitives
            .iter()
            .filter_map(|p| p.ray_interval(&d))
            .fold(0.0f64, |acc, (_, hi)| acc.max(hi))
    }

    /// Exact surface distance along the ray at spherical angles (θ, φ).
    pub fn radius(&self, theta: f64, phi: f64) -> f64 {
        self.radius_dir(&direction(theta, phi))
    }

    /// (max width, max radius, min radius) over a dense direction scan.
    fn width_scan(&self) -> (f64, f64, f64) {
        let mut width: f64 = 0.0;
        let mut rmax: f64 = 0.0;
        let mut rmin = f64::INFINITY;
        for i in 0..SHAPE_SCAN_RES {
            let theta = -std::f64::consts::PI
                + (i as f64 + 0.5) * std::f64::consts::TAU / SHAPE_SCAN_RES as f64;
            for j in 0..SHAPE_SCAN_RES / 2 {
                let phi = -std::f64::consts::FRAC_PI_2
                    + (j as f64 + 0.5) * std::f64::consts::PI / (SHAPE_SCAN_RES / 2) as f64;
                let d = direction(theta, phi);
                let r = self.radius_dir(&d);
                let r_opp = self.radius_dir(&(-d));
                width = width.max(r + r_opp);
                rmax = rmax.max(r.max(r_opp));
                rmin = rmin.min(r.min(r_opp));
            }
        }
        (width, rmax, rmin)
    }

    /// Max/min radius ratio over the scan grid.
    pub fn aspect_ratio(&self) -> f64 {
        let (_, rmax, rmin) = self.width_scan();
        if rmin <= 0.0 {
            f64::INFINITY
        } else {
            rmax / rmin
        }
    }

    /// Smallest scanned radius; sections with |d| beyond this miss the object.
    pub fn min_radius(&self) -> f64 {
        self.width_scan().2
    }

    /// The same solid with every primitive rotated about the origin.
    pub fn rotated(&self, rot: &UnitQuaternion<f64>) -> SolidObject {
        let prims = self
            .primitives
            .iter()
            .map(|p| Primitive {
                kind: p.kind,
                half_extents: p.half_extents,
                rotation: rot * p.rotation,
                offset: rot * p.offset,
            })
            .collect();
        SolidObject::new(prims, self.seed).expect("rotation preserves validity")
    }
}

/// Object orientation relative to the hole frame, composed as Rz(γ)·Ry(β)·Rx(α).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Orientation {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Orientation {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        Orientation { alpha: wrap_angle(alpha), beta: wrap_angle(beta), gamma: wrap_angle(gamma) }
    }

    pub const IDENTITY: Orientation = Orientation { alpha: 0.0, beta: 0.0, gamma: 0.0 };

    /// Object-frame → hole-frame rotation.
    pub fn rotation(&self) -> Rotation3<f64> {
        Rotation3::from_euler_angles(self.alpha, self.beta, self.gamma)
    }
}

/// Target hole: dilated projected contour sampled at M planar angles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HoleContour {
    pub angles: Vec<f64>,
    pub radii: Vec<f64>,
    pub clearance: f64,
}

impl HoleContour {
    /// Linear interpolation of the hole radius at an arbitrary planar angle.
    pub fn radius_at(&self, theta: f64) -> f64 {
        let m = self.angles.len();
        let step = std::f64::consts::TAU / m as f64;
        let t = (wrap_angle(theta) + std::f64::consts::PI) / step;
        let i0 = (t.floor() as usize).min(m - 1);
        let frac = t - i0 as f64;
        let i1 = (i0 + 1) % m;
        self.radii[i0] * (1.0 - frac) + self.radii[i1] * frac
    }
}

/// Cross-section parameters: plane normal `Rz(ζ)·Ry(ψ)·ẑ`, signed offset `d`
/// along the normal, and the angular half-width of the scanned band.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SectionSpec {
    pub zeta: f64,
    pub psi: f64,
    pub d: f64,
    pub band_half_width: f64,
}

impl SectionSpec {
    pub fn new(zeta: f64, psi: f64, d: f64, band_half_width: f64) -> Self {
        SectionSpec { zeta, psi, d, band_half_width }
    }

    pub fn normal(&self) -> Vector3<f64> {
        Rotation3::from_euler_angles(0.0, self.psi, self.zeta) * Vector3::z()
    }
}

/// True iff every ray from the origin crosses the composite surface exactly
/// once, sampled on a `grid_res × grid_res/2` direction grid. Uses exact
/// per-primitive ray intervals: the union of intervals along each ray must be
/// one block starting at the origin.
pub fn star_shape_check(object: &SolidObject, grid_res: usize) -> bool {
    let res = grid_res.max(64);
    for i in 0..res {
        let theta =
            -std::f64::consts::PI + (i as f64 + 0.5) * std::f64::consts::TAU / res as f64;
        for j in 0..res / 2 {
            let phi = -std::f64::consts::FRAC_PI_2
                + (j as f64 + 0.5) * std::f64::consts::PI / (res / 2) as f64;
            let d = direction(theta, phi);
            if !ray_crosses_once(object, &d) {
                return false;
            }
        }
    }
    true
}

fn ray_crosses_once(object: &SolidObject, d: &Vector3<f64>) -> bool {
    let mut spans: Vec<(f64, f64)> = object
        .primitives
        .iter()
        .filter_map(|p| p.ray_interval(d))
        .map(|(lo, hi)| (lo.max(0.0), hi))
        .collect();
    if spans.is_empty() {
        return false;
    }
    spans.sort_by(|a, b| a.0.total_cmp(&b.0));
    // origin must be covered and coverage must stay gapless to the last exit
    if spans[0].0 > 1e-9 {
        return false;
    }
    let mut reach = spans[0].1;
    for &(lo, hi) in &spans[1..] {
        if lo > reach + 1e-9 {
            return false;
        }
        reach = reach.max(hi);
    }
    true
}

/// Deterministic random star-shaped object from 1–3 transformed primitives.
/// Rejection-samples until the star-shape, width and aspect invariants hold.
pub fn generate_object(seed: u64, n_primitives: usize) -> Result<SolidObject, GeometryError> {
    if !(1..=3).contains(&n_primitives) {
        return Err(GeometryError::Invalid {
            what: "n_primitives",
            why: format!("expected 1..=3, got {n_primitives}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last_violation = "star-shape";
    const MAX_DRAWS: u32 = 1000;
    for _ in 0..MAX_DRAWS {
        let prims = (0..n_primitives).map(|i| sample_primitive(&mut rng, i == 0)).collect();
        let obj = SolidObject::new(prims, seed)?;
        let (width, rmax, rmin) = obj.width_scan();
        if width > MAX_OBJECT_WIDTH {
            last_violation = "max-width";
            continue;
        }
        if rmin <= 0.0 || rmax / rmin > MAX_ASPECT_RATIO {
            last_violation = "aspect-ratio";
            continue;
        }
        if !star_shape_check(&obj, SHAPE_SCAN_RES) {
            last_violation = "star-shape";
            continue;
        }
        return Ok(obj);
    }
    Err(GeometryError::Generation { attempts: MAX_DRAWS, invariant: last_violation })
}

fn sample_primitive(rng: &mut ChaCha8Rng, anchored: bool) -> Primitive {
    let kind = match rng.gen_range(0..3u8) {
        0 => PrimitiveKind::Sphere,
        1 => PrimitiveKind::Box,
        _ => PrimitiveKind::Cylinder,
    };
    let half_extents = match kind {
        PrimitiveKind::Sphere => {
            let r = rng.gen_range(0.009..0.018);
            Vector3::repeat(r)
        }
        PrimitiveKind::Box => {
            let base = rng.gen_range(0.008..0.015);
            Vector3::new(
                base * rng.gen_range(0.85..1.2),
                base * rng.gen_range(0.85..1.2),
                base * rng.gen_range(0.85..1.2),
            )
        }
        PrimitiveKind::Cylinder => {
            let r = rng.gen_range(0.008..0.014);
            Vector3::new(r, r, r * rng.gen_range(0.7..1.4))
        }
    };
    let rotation = random_rotation(rng);
    let offset = if anchored {
        Vector3::zeros()
    } else {
        let dir: Vector3<f64> = random_unit(rng);
        dir * rng.gen_range(0.0..0.005)
    };
    Primitive { kind, half_extents, rotation, offset }
}

fn random_rotation(rng: &mut ChaCha8Rng) -> UnitQuaternion<f64> {
    let q = nalgebra::Quaternion::new(
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
    );
    UnitQuaternion::from_quaternion(q)
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}

/// Exact projected contour of the rotated object at planar angle θ:
/// `max_φ r(R⁻¹ d(θ,φ)) · cosφ` over a dense φ grid.
pub fn projected_contour(object: &SolidObject, rot: &Rotation3<f64>, theta: f64) -> f64 {
    projected_contour_with(object, rot, theta, ORACLE_PHI_SAMPLES)
}

fn projected_contour_with(
    object: &SolidObject,
    rot: &Rotation3<f64>,
    theta: f64,
    phi_samples: usize,
) -> f64 {
    let inv = rot.inverse();
    let n = phi_samples | 1; // odd count keeps φ = 0 on the grid
    let mut best: f64 = 0.0;
    for j in 0..n {
        let phi = -std::f64::consts::FRAC_PI_2 + j as f64 * std::f64::consts::PI / (n - 1) as f64;
        let d_obj = inv * direction(theta, phi);
        best = best.max(object.radius_dir(&d_obj) * phi.cos());
    }
    best
}

/// Orientation minimizing the projected silhouette area, found by a coarse
/// Euler scan plus coordinate descent. Holes generated at this orientation are
/// selective: poses far from it (modulo silhouette symmetry) protrude.
pub fn selective_orientation(object: &SolidObject) -> Orientation {
    let area = |q: &Orientation| -> f64 {
        let rot = q.rotation();
        (0..36)
            .map(|i| {
                let t = -std::f64::consts::PI + i as f64 * std::f64::consts::TAU / 36.0;
                let c = projected_contour_with(object, &rot, t, 65);
                c * c
            })
            .sum()
    };
    let step0 = 30.0f64.to_radians();
    let mut best = Orientation::IDENTITY;
    let mut best_area = f64::INFINITY;
    for ia in 0..12 {
        for ib in 0..7 {
            for ig in 0..12 {
                let q = Orientation::new(
                    -std::f64::consts::PI + ia as f64 * step0,
                    -std::f64::consts::FRAC_PI_2 + ib as f64 * step0,
                    -std::f64::consts::PI + ig as f64 * step0,
                );
                let a = area(&q);
                if a < best_area {
                    best_area = a;
                    best = q;
                }
            }
        }
    }
    // coordinate descent with halving steps
    let mut step = step0;
    while step > 1.0f64.to_radians() {
        let mut improved = false;
        for axis in 0..3 {
            for dir in [-1.0, 1.0] {
                let mut q = best;
                match axis {
                    0 => q.alpha = wrap_angle(q.alpha + dir * step),
                    1 => q.beta = wrap_angle(q.beta + dir * step),
                    _ => q.gamma = wrap_angle(q.gamma + dir * step),
                }
                let a = area(&q);
                if a < best_area {
                    best_area = a;
                    best = q;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best
}

/// Target hole from the exact projection of `object` posed at `feasible`,
/// dilated by `clearance`. The true minimum margin at `feasible` then equals
/// `clearance` by construction.
pub fn make_hole(
    object: &SolidObject,
    feasible: &Orientation,
    m: usize,
    clearance: f64,
) -> Result<HoleContour, GeometryError> {
    if m < 36 {
        return Err(GeometryError::Invalid {
            what: "hole sampling",
            why: format!("need at least 36 contour angles, got {m}"),
        });
    }
    let rot = feasible.rotation();
    let angles: Vec<f64> =
        (0..m).map(|i| -std::f64::consts::PI + i as f64 * std::f64::consts::TAU / m as f64).collect();
    let radii: Vec<f64> =
        angles.iter().map(|&t| projected_contour(object, &rot, t) + clearance).collect();
    if radii.iter().any(|&r| r <= 0.0) {
        return Err(GeometryError::Invalid {
            what: "hole",
            why: "clearance makes some hole radius non-positive".into(),
        });
    }
    Ok(HoleContour { angles, radii, clearance })
}

/// Exact minimum margin of the object posed at `q` against the hole; negative
/// means collision. This is the oracle that grades episode success.
pub fn true_min_margin(object: &SolidObject, q: &Orientation, hole: &HoleContour) -> f64 {
    let rot = q.rotation();
    hole.angles
        .iter()
        .zip(&hole.radii)
        .map(|(&t, &r)| r - projected_contour(object, &rot, t))
        .fold(f64::INFINITY, f64::min)
}

/// Early-exit feasibility test: does the object posed at `q` fit the hole?
/// Equivalent to `true_min_margin(..) >= 0` but cheaper on clear collisions.
pub fn fits_hole(object: &SolidObject, q: &Orientation, hole: &HoleContour) -> bool {
    fits_hole_with(object, q, hole, ORACLE_PHI_SAMPLES)
}

fn fits_hole_with(
    object: &SolidObject,
    q: &Orientation,
    hole: &HoleContour,
    phi_samples: usize,
) -> bool {
    let rot = q.rotation();
    hole.angles
        .iter()
        .zip(&hole.radii)
        .all(|(&t, &r)| projected_contour_with(object, &rot, t, phi_samples) <= r)
}

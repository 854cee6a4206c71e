//! Simulated tactile scanning: rolling the object along a cross section emits
//! a band of noisy surface points plus a noisy odometry chain of patch poses.

use nalgebra::{Rotation3, Unit, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{spherical_angles, SectionSpec, SolidObject};
use crate::slam::RigidTransform;

/// Rows of points across the contact band.
const BAND_ROWS: usize = 5;
/// Circle sampling used by the patch pipeline.
pub const PATCH_SAMPLES_PER_CIRCLE: usize = 96;
/// Fraction of each patch arc shared with the next patch.
const PATCH_OVERLAP: f64 = 0.4;
/// Default angular half-width of the contact band (~2 mm at 2 cm radius).
pub const DEFAULT_BAND_HALF_WIDTH: f64 = 6.0 * std::f64::consts::PI / 180.0;

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("section plane misses the object: |d|={d:.4} >= min radius {min_radius:.4}")]
    EmptyScan { d: f64, min_radius: f64 },
    #[error("invalid scan request: {0}")]
    Invalid(String),
}

/// One reconstructed surface sample in object-frame spherical coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub theta: f64,
    pub phi: f64,
    pub r: f64,
}

/// Noise model for one scan: i.i.d. point noise on reconstructed radii,
/// per-patch depth noise before alignment, and an odometry random walk.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct NoiseConfig {
    pub point_sigma: f64,
    pub depth_sigma: f64,
    pub odom_rot_sigma: f64,
    pub odom_trans_sigma: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            point_sigma: 2e-3,
            depth_sigma: 0.0,
            odom_rot_sigma: 0.02,
            odom_trans_sigma: 5e-4,
            seed: 0,
        }
    }
}

impl NoiseConfig {
    pub fn noiseless() -> Self {
        NoiseConfig {
            point_sigma: 0.0,
            depth_sigma: 0.0,
            odom_rot_sigma: 0.0,
            odom_trans_sigma: 0.0,
            seed: 0,
        }
    }

    /// Same noise magnitudes with a derived stream, so repeated scans within
    /// an episode draw fresh but reproducible noise.
    pub fn substream(&self, tag: u64) -> Self {
        let mut n = *self;
        n.seed = splitmix(self.seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        n
    }
}

pub(crate) fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One tactile patch: points in the patch frame, the noisy odometry estimate
/// of the patch pose in the scan-chain frame, and the ground-truth roll angle
/// since patch 0 (used by evaluation only).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanPatch {
    pub points: Vec<Vector3<f64>>,
    pub odom_pose: RigidTransform,
    pub true_rotation: f64,
}

struct SectionFrame {
    e1: Vector3<f64>,
    e2: Vector3<f64>,
    normal: Vector3<f64>,
}

impl SectionFrame {
    fn new(spec: &SectionSpec) -> Self {
        let rot = Rotation3::from_euler_angles(0.0, spec.psi, spec.zeta);
        SectionFrame { e1: rot * Vector3::x(), e2: rot * Vector3::y(), normal: rot * Vector3::z() }
    }

    fn dir(&self, u: f64, lambda: f64) -> Vector3<f64> {
        let (su, cu) = u.sin_cos();
        let (sl, cl) = lambda.sin_cos();
        (self.e1 * cu + self.e2 * su) * cl + self.normal * sl
    }
}

/// Latitude (relative to the section plane) of the surface point at circle
/// parameter `u`, solved by bisection of r(dir)·sin λ = d.
fn surface_latitude(object: &SolidObject, frame: &SectionFrame, u: f64, d: f64) -> f64 {
    let g = |lambda: f64| {
        let dir = frame.dir(u, lambda);
        object.radius_dir(&dir) * lambda.sin() - d
    };
    let mut lo = -std::f64::consts::FRAC_PI_2 + 1e-9;
    let mut hi = std::f64::consts::FRAC_PI_2 - 1e-9;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn check_plane(object: &SolidObject, spec: &SectionSpec) -> Result<(), ScanError> {
    let min_radius = object.min_radius();
    if spec.d.abs() >= min_radius {
        return Err(ScanError::EmptyScan { d: spec.d, min_radius });
    }
    Ok(())
}

/// Exact band geometry shared by [`scan_section`] and the patch pipeline:
/// per circle sample, the surface directions across the band.
fn band_directions(
    object: &SolidObject,
    spec: &SectionSpec,
    samples_per_circle: usize,
) -> Vec<(f64, Vector3<f64>)> {
    let frame = SectionFrame::new(spec);
    let mut out = Vec::with_capacity(samples_per_circle * BAND_ROWS);
    for i in 0..samples_per_circle {
        let u = i as f64 * std::f64::consts::TAU / samples_per_circle as f64;
        let center = surface_latitude(object, &frame, u, spec.d);
        for row in 0..BAND_ROWS {
            let offset = if BAND_ROWS == 1 {
                0.0
            } else {
                -spec.band_half_width
                    + 2.0 * spec.band_half_width * row as f64 / (BAND_ROWS - 1) as f64
            };
            let lambda = (center + offset)
                .clamp(-std::f64::consts::FRAC_PI_2 + 1e-6, std::f64::consts::FRAC_PI_2 - 1e-6);
            out.push((u, frame.dir(u, lambda)));
        }
    }
    out
}

/// Surface points on the band around the requested cross-section circle, with
/// radii perturbed by `N(0, point_sigma²)`. Deterministic given the seed.
pub fn scan_section(
    object: &SolidObject,
    spec: &SectionSpec,
    noise: &NoiseConfig,
    samples_per_circle: usize,
) -> Result<Vec<SurfacePoint>, ScanError> {
    if samples_per_circle < 36 {
        return Err(ScanError::Invalid(format!(
            "need at least 36 samples per circle, got {samples_per_circle}"
        )));
    }
    check_plane(object, spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let points = band_directions(object, spec, samples_per_circle)
        .into_iter()
        .map(|(_, dir)| {
            let (theta, phi) = spherical_angles(&dir);
            let eps: f64 = rng.sample(StandardNormal);
            SurfacePoint { theta, phi, r: object.radius_dir(&dir) + noise.point_sigma * eps }
        })
        .collect();
    Ok(points)
}

/// Overlapping patches covering a full revolution of the section circle.
/// Patch k's true pose is the rotation about the section normal by its arc
/// center; the odometry estimate composes the true relative motions with a
/// per-step noise random walk.
pub fn scan_patch_sequence(
    object: &SolidObject,
    spec: &SectionSpec,
    noise: &NoiseConfig,
    n_patches: usize,
) -> Result<Vec<ScanPatch>, ScanError> {
    if n_patches < 8 {
        return Err(ScanError::Invalid(format!("need at least 8 patches, got {n_patches}")));
    }
    check_plane(object, spec)?;
    let frame = SectionFrame::new(spec);
    let axis = Unit::new_normalize(frame.normal);
    let grid: Vec<(f64, Vector3<f64>)> =
        band_directions(object, spec, PATCH_SAMPLES_PER_CIRCLE)
            .into_iter()
            .map(|(u, dir)| (u, dir * object.radius_dir(&dir)))
            .collect();

    let step = std::f64::consts::TAU / n_patches as f64;
    let arc_half = 0.5 * step / (1.0 - PATCH_OVERLAP);
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let mut patches = Vec::with_capacity(n_patches);
    let mut odom = RigidTransform::identity();
    for k in 0..n_patches {
        let u_k = k as f64 * step;
        let true_pose = RigidTransform::new(
            Rotation3::from_axis_angle(&axis, u_k),
            Vector3::zeros(),
        );
        let inv = true_pose.inverse();
        let mut points: Vec<Vector3<f64>> = grid
            .iter()
            .filter(|(u, _)| {
                let mut delta = (u - u_k).rem_euclid(std::f64::consts::TAU);
                if delta > std::f64::consts::PI {
                    delta -= std::f64::consts::TAU;
                }
                delta.abs() <= arc_half
            })
            .map(|(_, p)| inv.apply(p))
            .collect();
        if noise.depth_sigma > 0.0 {
            for p in &mut points {
                let eps: f64 = rng.sample(StandardNormal);
                let n = p.norm();
                if n > 1e-12 {
                    *p += (*p / n) * (noise.depth_sigma * eps);
                }
            }
        }
        if k > 0 {
            let true_rel = RigidTransform::new(Rotation3::from_axis_angle(&axis, step), Vector3::zeros());
            let w = Vector3::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            ) * noise.odom_rot_sigma;
            let t = Vector3::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            ) * noise.odom_trans_sigma;
            let perturb = RigidTransform::new(Rotation3::from_scaled_axis(w), t);
            odom = odom.compose(&true_rel.compose(&perturb));
        }
        patches.push(ScanPatch { points, odom_pose: odom, true_rotation: u_k });
    }
    Ok(patches)
}

/// True patch poses for a sequence built by [`scan_patch_sequence`]; the
/// ground truth against which SLAM output is graded.
pub fn true_patch_poses(spec: &SectionSpec, n_patches: usize) -> Vec<RigidTransform> {
    let frame = SectionFrame::new(spec);
    let axis = Unit::new_normalize(frame.normal);
    let step = std::f64::consts::TAU / n_patches as f64;
    (0..n_patches)
        .map(|k| {
            RigidTransform::new(
                Rotation3::from_axis_angle(&axis, k as f64 * step),
                Vector3::zeros(),
            )
        })
        .collect()
}

/// i.i.d. radial perturbation of reconstructed points (the "noise on the
/// reconstructed model" channel), reproducible from the seed.
pub fn perturb_radii(points: &[SurfacePoint], sigma: f64, seed: u64) -> Vec<SurfacePoint> {
    if sigma == 0.0 {
        return points.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    points
        .iter()
        .map(|p| {
            let eps: f64 = rng.sample(StandardNormal);
            SurfacePoint { theta: p.theta, phi: p.phi, r: p.r + sigma * eps }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_object, Primitive};
    use approx::assert_relative_eq;

    fn sphere(r: f64) -> SolidObject {
        SolidObject::new(vec![Primitive::sphere(r)], 0).unwrap()
    }

    fn equator() -> SectionSpec {
        SectionSpec::new(0.0, 0.0, 0.0, DEFAULT_BAND_HALF_WIDTH)
    }

    #[test]
    fn noiseless_sphere_scan_has_exact_radius() {
        let pts = scan_section(&sphere(0.02), &equator(), &NoiseConfig::noiseless(), 48).unwrap();
        assert_eq!(pts.len(), 48 * BAND_ROWS);
        for p in &pts {
            assert_relative_eq!(p.r, 0.02, epsilon = 1e-12);
            assert!(p.phi.abs() <= DEFAULT_BAND_HALF_WIDTH + 1e-9);
        }
    }

    #[test]
    fn point_noise_statistics_match_sigma() {
        let mut noise = NoiseConfig::noiseless();
        noise.point_sigma = 0.002;
        noise.seed = 9;
        let pts = scan_section(&sphere(0.02), &equator(), &noise, 2000).unwrap();
        assert_eq!(pts.len(), 10_000);
        let mean = pts.iter().map(|p| p.r).sum::<f64>() / pts.len() as f64;
        assert!((mean - 0.02).abs() < 3.0 * 0.002 / 100.0, "mean {mean}");
        // soft 6σ bound at the 0.999 quantile
        let mut errs: Vec<f64> = pts.iter().map(|p| (p.r - 0.02).abs()).collect();
        errs.sort_by(f64::total_cmp);
        let q999 = errs[(0.999 * errs.len() as f64) as usize];
        assert!(q999 <= 6.0 * 0.002, "q999 {q999}");
    }

    #[test]
    fn plane_beyond_min_radius_is_empty_scan() {
        let obj = sphere(0.02);
        let spec = SectionSpec::new(0.0, 0.0, 1.5 * obj.min_radius(), DEFAULT_BAND_HALF_WIDTH);
        match scan_section(&obj, &spec, &NoiseConfig::noiseless(), 48) {
            Err(ScanError::EmptyScan { .. }) => {}
            other => panic!("expected empty-scan error, got {other:?}"),
        }
    }

    #[test]
    fn scans_are_seed_deterministic() {
        let obj = generate_object(3, 2).unwrap();
        let noise = NoiseConfig { seed: 77, ..NoiseConfig::default() };
        let a = scan_section(&obj, &equator(), &noise, 48).unwrap();
        let b = scan_section(&obj, &equator(), &noise, 48).unwrap();
        assert_eq!(a, b);
        let pa = scan_patch_sequence(&obj, &equator(), &noise, 12).unwrap();
        let pb = scan_patch_sequence(&obj, &equator(), &noise, 12).unwrap();
        assert_eq!(pa.len(), pb.len());
        for (x, y) in pa.iter().zip(&pb) {
            assert_eq!(x.points, y.points);
        }
    }

    #[test]
    fn zero_noise_patches_concatenate_to_section_scan() {
        let obj = generate_object(5, 2).unwrap();
        let spec = SectionSpec::new(0.4, -0.3, 0.002, DEFAULT_BAND_HALF_WIDTH);
        let noise = NoiseConfig::noiseless();
        let section = scan_section(&obj, &spec, &noise, PATCH_SAMPLES_PER_CIRCLE).unwrap();
        let section_xyz: Vec<Vector3<f64>> = section
            .iter()
            .map(|p| crate::geometry::direction(p.theta, p.phi) * p.r)
            .collect();
        let patches = scan_patch_sequence(&obj, &spec, &noise, 24).unwrap();
        let mut covered = vec![false; section_xyz.len()];
        for patch in &patches {
            assert!(patch.points.len() >= 10);
            for p in &patch.points {
                let world = patch.odom_pose.apply(p);
                let (idx, dist) = section_xyz
                    .iter()
                    .enumerate()
                    .map(|(i, q)| (i, (world - q).norm()))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .unwrap();
                assert!(dist < 1e-9, "patch point {dist} from any section point");
                covered[idx] = true;
            }
        }
        assert!(covered.iter().all(|&c| c), "patches must cover the section band");
    }

    #[test]
    fn zero_noise_odometry_equals_true_pose() {
        let obj = sphere(0.02);
        let patches =
            scan_patch_sequence(&obj, &equator(), &NoiseConfig::noiseless(), 16).unwrap();
        let truth = true_patch_poses(&equator(), 16);
        for (p, t) in patches.iter().zip(&truth) {
            assert!((p.odom_pose.rotation.matrix() - t.rotation.matrix()).norm() < 1e-12);
            assert!(p.odom_pose.translation.norm() < 1e-12);
        }
    }

    #[test]
    fn first_and_last_patch_overlap() {
        let obj = generate_object(8, 2).unwrap();
        let noise = NoiseConfig::noiseless();
        let patches = scan_patch_sequence(&obj, &equator(), &noise, 24).unwrap();
        let first = &patches[0];
        let last = &patches[23];
        let world_first: Vec<Vector3<f64>> =
            first.points.iter().map(|p| first.odom_pose.apply(p)).collect();
        let shared = last
            .points
            .iter()
            .filter(|p| {
                let w = last.odom_pose.apply(p);
                world_first.iter().any(|q| (w - q).norm() < 1e-9)
            })
            .count();
        let frac = shared as f64 / last.points.len() as f64;
        assert!(frac >= 0.3, "overlap fraction {frac}");
    }

    #[test]
    fn odometry_drift_grows_like_sqrt_k() {
        let obj = sphere(0.02);
        let spec = equator();
        let truth = true_patch_poses(&spec, 25);
        let mut sum6 = 0.0;
        let mut sum24 = 0.0;
        const TRIALS: usize = 100;
        for trial in 0..TRIALS {
            let noise = NoiseConfig {
                point_sigma: 0.0,
                depth_sigma: 0.0,
                odom_rot_sigma: 0.01,
                odom_trans_sigma: 0.0,
                seed: 1000 + trial as u64,
            };
            let patches = scan_patch_sequence(&obj, &spec, &noise, 25).unwrap();
            let err = |k: usize| {
                let e = truth[k].inverse().compose(&patches[k].odom_pose);
                e.rotation.angle()
            };
            sum6 += err(6);
            sum24 += err(24);
        }
        let ratio = sum24 / sum6;
        let expected = (24.0f64 / 6.0).sqrt();
        assert!(
            (ratio - expected).abs() < 0.6,
            "drift ratio {ratio}, expected ~{expected}"
        );
    }
}

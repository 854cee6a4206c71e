//! Tactile SLAM over one scanned section: pairwise ICP between neighboring
//! patches, loop-closure detection after a full revolution, pose-graph
//! optimization and fusion into a consistent section point cloud.

use nalgebra::{DMatrix, DVector, Matrix3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

use crate::geometry::spherical_angles;
use crate::scanner::{NoiseConfig, ScanPatch, SurfacePoint};

/// Robust-kernel width on loop edges.
const HUBER_DELTA: f64 = 2e-3;
/// Fused section clouds are downsampled to at most this many points.
pub const FUSE_CAP: usize = 2000;

#[derive(Debug, Error)]
pub enum SlamError {
    #[error("point cloud too small: {0} points (need >= 10)")]
    TooFewPoints(usize),
    #[error("degenerate geometry: correspondences span less than two directions")]
    DegenerateGeometry,
    #[error("invalid pose graph: {0}")]
    InvalidGraph(String),
    #[error("malformed pose-graph text at line {line}: {why}")]
    Parse { line: usize, why: String },
}

/// SE(3) element stored as an orthonormal rotation matrix plus translation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RigidTransform {
    #[serde(with = "rot_serde")]
    pub rotation: Rotation3<f64>,
    #[serde(with = "crate::slam::vec3_serde")]
    pub translation: Vector3<f64>,
}

pub(crate) mod vec3_serde {
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

mod rot_serde {
    use nalgebra::{Quaternion, Rotation3, UnitQuaternion};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    // stored as a unit quaternion [w, x, y, z]
    pub fn serialize<S: Serializer>(r: &Rotation3<f64>, s: S) -> Result<S::Ok, S::Error> {
        let q = UnitQuaternion::from_rotation_matrix(r);
        [q.w, q.i, q.j, q.k].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rotation3<f64>, D::Error> {
        let a = <[f64; 4]>::deserialize(d)?;
        let q = UnitQuaternion::from_quaternion(Quaternion::new(a[0], a[1], a[2], a[3]));
        Ok(q.to_rotation_matrix())
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform { rotation: Rotation3::identity(), translation: Vector3::zeros() }
    }

    pub fn new(rotation: Rotation3<f64>, translation: Vector3<f64>) -> Self {
        RigidTransform { rotation, translation }
    }

    #[inline]
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rot_inv = self.rotation.inverse();
        RigidTransform { rotation: rot_inv, translation: -(rot_inv * self.translation) }
    }

    /// Right-multiplied increment exp([w, v]) with decoupled rotation log.
    pub fn exp(xi: &[f64; 6]) -> RigidTransform {
        RigidTransform {
            rotation: Rotation3::from_scaled_axis(Vector3::new(xi[0], xi[1], xi[2])),
            translation: Vector3::new(xi[3], xi[4], xi[5]),
        }
    }

    /// Decoupled log map: rotation vector stacked on the translation.
    pub fn log(&self) -> [f64; 6] {
        let w = self.rotation.scaled_axis();
        [w.x, w.y, w.z, self.translation.x, self.translation.y, self.translation.z]
    }
}

/// Relative-pose constraint between two patch poses.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoseEdge {
    pub from: usize,
    pub to: usize,
    pub measured: RigidTransform,
    pub weight: f64,
    pub is_loop: bool,
}

/// Patch poses plus odometry and loop-closure constraints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoseGraph {
    pub nodes: Vec<RigidTransform>,
    pub edges: Vec<PoseEdge>,
}

impl PoseGraph {
    fn validate(&self) -> Result<(), SlamError> {
        let n = self.nodes.len();
        if n == 0 {
            return Err(SlamError::InvalidGraph("empty graph".into()));
        }
        let mut consecutive = vec![false; n.saturating_sub(1)];
        for e in &self.edges {
            if e.from == e.to {
                return Err(SlamError::InvalidGraph(format!("self edge at node {}", e.from)));
            }
            if e.from >= n || e.to >= n {
                return Err(SlamError::InvalidGraph("edge references missing node".into()));
            }
            if !e.is_loop {
                let (a, b) = (e.from.min(e.to), e.from.max(e.to));
                if b == a + 1 {
                    consecutive[a] = true;
                }
            }
        }
        if !consecutive.iter().all(|&c| c) {
            return Err(SlamError::InvalidGraph(
                "missing odometry edge between consecutive nodes".into(),
            ));
        }
        Ok(())
    }
}

/// Result of one ICP alignment.
#[derive(Debug, Clone, Copy)]
pub struct IcpResult {
    pub transform: RigidTransform,
    pub rmse: f64,
    pub iterations: usize,
}

/// Point-to-point ICP aligning `source` onto `target` starting from `init`.
/// Correspondences are nearest neighbors; the per-iteration RMSE is
/// non-increasing and iteration stops when it improves by less than `tol`.
pub fn icp_align(
    source: &[Vector3<f64>],
    target: &[Vector3<f64>],
    init: &RigidTransform,
    max_iter: usize,
    tol: f64,
) -> Result<IcpResult, SlamError> {
    icp_trimmed(source, target, init, max_iter, tol, 1.0)
}

/// Trimmed ICP for partially overlapping clouds: each iteration keeps only
/// the `keep_fraction` closest correspondences, so points outside the shared
/// surface region cannot bias the estimate.
pub fn icp_trimmed(
    source: &[Vector3<f64>],
    target: &[Vector3<f64>],
    init: &RigidTransform,
    max_iter: usize,
    tol: f64,
    keep_fraction: f64,
) -> Result<IcpResult, SlamError> {
    if source.len() < 10 {
        return Err(SlamError::TooFewPoints(source.len()));
    }
    if target.len() < 10 {
        return Err(SlamError::TooFewPoints(target.len()));
    }
    let keep = ((source.len() as f64 * keep_fraction).ceil() as usize).clamp(10, source.len());
    let mut transform = *init;
    let mut best = IcpResult { transform, rmse: f64::INFINITY, iterations: 0 };
    for iter in 0..max_iter {
        let moved: Vec<Vector3<f64>> = source.iter().map(|p| transform.apply(p)).collect();
        let mut pairs: Vec<(usize, usize, f64)> = moved
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let j = nearest(target, p);
                (i, j, (moved[i] - target[j]).norm_squared())
            })
            .collect();
        pairs.sort_by(|a, b| a.2.total_cmp(&b.2));
        pairs.truncate(keep);
        let rmse =
            (pairs.iter().map(|&(_, _, d2)| d2).sum::<f64>() / pairs.len() as f64).sqrt();
        if rmse < best.rmse {
            best = IcpResult { transform, rmse, iterations: iter };
        }
        if best.rmse - rmse < tol && iter > 0 {
            break;
        }
        let kept: Vec<(usize, usize)> = pairs.iter().map(|&(i, j, _)| (i, j)).collect();
        transform = kabsch(source, target, &kept)?;
    }
    Ok(best)
}

fn nearest(cloud: &[Vector3<f64>], p: &Vector3<f64>) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, q) in cloud.iter().enumerate() {
        let d = (p - q).norm_squared();
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

/// Least-squares rigid transform for fixed correspondences (Kabsch/Umeyama).
fn kabsch(
    source: &[Vector3<f64>],
    target: &[Vector3<f64>],
    pairs: &[(usize, usize)],
) -> Result<RigidTransform, SlamError> {
    let n = pairs.len() as f64;
    let cs = pairs.iter().map(|&(i, _)| source[i]).sum::<Vector3<f64>>() / n;
    let ct = pairs.iter().map(|&(_, j)| target[j]).sum::<Vector3<f64>>() / n;
    let mut h = Matrix3::<f64>::zeros();
    for &(i, j) in pairs {
        h += (source[i] - cs) * (target[j] - ct).transpose();
    }
    let svd = h.svd(true, true);
    let sv = svd.singular_values;
    if sv[1] <= 1e-9 * sv[0].max(1e-300) {
        return Err(SlamError::DegenerateGeometry);
    }
    let u = svd.u.ok_or(SlamError::DegenerateGeometry)?;
    let v = svd.v_t.ok_or(SlamError::DegenerateGeometry)?.transpose();
    let d = (v * u.transpose()).determinant();
    let r = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d.signum())) * u.transpose();
    let rotation = Rotation3::from_matrix_unchecked(r);
    let translation = ct - rotation * cs;
    Ok(RigidTransform { rotation, translation })
}

/// A detected loop closure between two non-adjacent patches.
#[derive(Debug, Clone, Copy)]
pub struct LoopClosure {
    pub from: usize,
    pub to: usize,
    pub transform: RigidTransform,
    pub rmse: f64,
}

/// Earliest non-adjacent patch pair whose estimated poses imply >= 30% surface
/// overlap and whose ICP alignment passes the noise-scaled RMSE gate.
pub fn detect_loop_closure(
    patches: &[ScanPatch],
    poses: &[RigidTransform],
    noise: &NoiseConfig,
) -> Option<LoopClosure> {
    if patches.len() < 2 {
        return None;
    }
    let gate = (3.0 * noise.depth_sigma.max(noise.point_sigma)).max(1e-4);
    let worlds: Vec<Vec<Vector3<f64>>> = patches
        .iter()
        .zip(poses)
        .map(|(p, t)| p.points.iter().map(|q| t.apply(q)).collect())
        .collect();
    let spacings: Vec<f64> = worlds.iter().map(|w| median_spacing(w)).collect();
    for j in 2..patches.len() {
        for i in 0..j - 1 {
            let radius = (2.5 * spacings[i]).max(3.0 * noise.depth_sigma);
            let hits = worlds[j]
                .iter()
                .filter(|p| {
                    let k = nearest(&worlds[i], p);
                    (worlds[i][k] - **p).norm() <= radius
                })
                .count();
            if (hits as f64) < 0.3 * worlds[j].len() as f64 {
                continue;
            }
            let init = poses[i].inverse().compose(&poses[j]);
            if let Ok(res) =
                icp_trimmed(&patches[j].points, &patches[i].points, &init, 40, 1e-9, 0.3)
            {
                if res.rmse < gate {
                    return Some(LoopClosure {
                        from: i,
                        to: j,
                        transform: res.transform,
                        rmse: res.rmse,
                    });
                }
            }
        }
    }
    None
}

fn median_spacing(cloud: &[Vector3<f64>]) -> f64 {
    if cloud.len() < 2 {
        return 0.0;
    }
    let mut dists: Vec<f64> = cloud
        .iter()
        .enumerate()
        .map(|(i, p)| {
            cloud
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, q)| (p - q).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    dists.sort_by(f64::total_cmp);
    dists[dists.len() / 2]
}

/// Optimized node poses plus convergence diagnostics.
#[derive(Debug, Clone)]
pub struct OptimizedPoses {
    pub poses: Vec<RigidTransform>,
    pub converged: bool,
    pub initial_cost: f64,
    pub final_cost: f64,
}

fn edge_residual(poses: &[RigidTransform], e: &PoseEdge) -> [f64; 6] {
    let rel = poses[e.from].inverse().compose(&poses[e.to]);
    e.measured.inverse().compose(&rel).log()
}

fn edge_cost(r: &[f64; 6], e: &PoseEdge) -> f64 {
    let n2: f64 = r.iter().map(|x| x * x).sum();
    if e.is_loop {
        let n = n2.sqrt();
        let rho = if n <= HUBER_DELTA { n2 } else { HUBER_DELTA * (2.0 * n - HUBER_DELTA) };
        e.weight * rho
    } else {
        e.weight * n2
    }
}

fn total_cost(poses: &[RigidTransform], edges: &[PoseEdge]) -> f64 {
    edges.iter().map(|e| edge_cost(&edge_residual(poses, e), e)).sum()
}

/// Numerical 6×6 Jacobian of the edge residual wrt a right-multiplied
/// increment on `node`.
fn edge_jacobian(
    poses: &mut [RigidTransform],
    e: &PoseEdge,
    node: usize,
) -> nalgebra::Matrix6<f64> {
    let mut jac = nalgebra::Matrix6::<f64>::zeros();
    let saved = poses[node];
    let hstep = 1e-7;
    for k in 0..6 {
        let mut xi = [0.0; 6];
        xi[k] = hstep;
        poses[node] = saved.compose(&RigidTransform::exp(&xi));
        let rp = edge_residual(poses, e);
        xi[k] = -hstep;
        poses[node] = saved.compose(&RigidTransform::exp(&xi));
        let rm = edge_residual(poses, e);
        for row in 0..6 {
            jac[(row, k)] = (rp[row] - rm[row]) / (2.0 * hstep);
        }
    }
    poses[node] = saved;
    jac
}

/// Damped Gauss-Newton over the node poses with node 0 fixed as gauge.
/// Residual per edge is the log of `measured⁻¹ · (Tᵢ⁻¹ Tⱼ)`; loop edges use a
/// Huber kernel. Total cost never increases; on hitting `max_iter` without
/// convergence the best iterate is returned with `converged = false`.
pub fn optimize_pose_graph(graph: &PoseGraph, max_iter: usize) -> Result<OptimizedPoses, SlamError> {
    graph.validate()?;
    let n = graph.nodes.len();
    let mut poses = graph.nodes.clone();
    let initial_cost = total_cost(&poses, &graph.edges);
    if n == 1 || initial_cost < 1e-24 {
        return Ok(OptimizedPoses { poses, converged: true, initial_cost, final_cost: initial_cost });
    }
    let dof = 6 * (n - 1);
    let mut cost = initial_cost;
    let mut lambda = 1e-6;
    let mut converged = false;
    'outer: for _ in 0..max_iter {
        let mut h = DMatrix::<f64>::zeros(dof, dof);
        let mut b = DVector::<f64>::zeros(dof);
        for e in &graph.edges {
            let r0 = edge_residual(&poses, e);
            let norm = r0.iter().map(|x| x * x).sum::<f64>().sqrt();
            let w_irls = if e.is_loop && norm > HUBER_DELTA {
                e.weight * HUBER_DELTA / norm
            } else {
                e.weight
            };
            let rvec = nalgebra::Vector6::from_row_slice(&r0);
            let incident = [e.from, e.to];
            let jacs: Vec<Option<nalgebra::Matrix6<f64>>> = incident
                .iter()
                .map(|&node| (node != 0).then(|| edge_jacobian(&mut poses, e, node)))
                .collect();
            for (a, &na) in incident.iter().enumerate() {
                let Some(ja) = jacs[a] else { continue };
                let base_a = 6 * (na - 1);
                let jt_r = ja.transpose() * rvec * w_irls;
                for k in 0..6 {
                    b[base_a + k] += jt_r[k];
                }
                for (bb, &nb) in incident.iter().enumerate() {
                    let Some(jb) = jacs[bb] else { continue };
                    let base_b = 6 * (nb - 1);
                    let block = ja.transpose() * jb * w_irls;
                    for r in 0..6 {
                        for c in 0..6 {
                            h[(base_a + r, base_b + c)] += block[(r, c)];
                        }
                    }
                }
            }
        }
        if b.amax() < 1e-14 {
            converged = true;
            break;
        }
        // LM: retry with stronger damping until the step decreases the cost
        for _ in 0..10 {
            let mut damped = h.clone();
            for k in 0..dof {
                damped[(k, k)] += lambda * (h[(k, k)].abs() + 1e-12);
            }
            let Some(chol) = damped.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let delta = chol.solve(&(-&b));
            let mut candidate = poses.clone();
            for node in 1..n {
                let xi = [
                    delta[6 * (node - 1)],
                    delta[6 * (node - 1) + 1],
                    delta[6 * (node - 1) + 2],
                    delta[6 * (node - 1) + 3],
                    delta[6 * (node - 1) + 4],
                    delta[6 * (node - 1) + 5],
                ];
                candidate[node] = candidate[node].compose(&RigidTransform::exp(&xi));
            }
            let new_cost = total_cost(&candidate, &graph.edges);
            if new_cost <= cost {
                let step = delta.amax();
                poses = candidate;
                cost = new_cost;
                lambda = (lambda / 3.0).max(1e-12);
                if step < 1e-12 || cost < 1e-24 {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e8 {
                // no descent direction left; current iterate is the minimum
                converged = true;
                break 'outer;
            }
        }
    }
    let final_cost = total_cost(&poses, &graph.edges);
    Ok(OptimizedPoses { poses, converged, initial_cost, final_cost })
}

/// Transforms all patch points into the chain frame through their poses,
/// converts to spherical coordinates about the chain origin, and voxel
/// downsamples to at most [`FUSE_CAP`] points.
pub fn fuse_section(patches: &[ScanPatch], poses: &[RigidTransform]) -> Vec<SurfacePoint> {
    let world: Vec<Vector3<f64>> = patches
        .iter()
        .zip(poses)
        .flat_map(|(p, t)| p.points.iter().map(move |q| t.apply(q)))
        .collect();
    downsample_xyz(&world, FUSE_CAP)
        .into_iter()
        .map(|p| {
            let (theta, phi) = spherical_angles(&p);
            SurfacePoint { theta, phi, r: p.norm() }
        })
        .collect()
}

/// First-point-per-voxel downsampling, growing the voxel until the cap holds.
pub fn downsample_xyz(points: &[Vector3<f64>], cap: usize) -> Vec<Vector3<f64>> {
    let mut voxel = 2e-4;
    loop {
        let mut seen: HashSet<(i64, i64, i64)> = HashSet::new();
        let mut kept = Vec::new();
        for p in points {
            let key = (
                (p.x / voxel).floor() as i64,
                (p.y / voxel).floor() as i64,
                (p.z / voxel).floor() as i64,
            );
            if seen.insert(key) {
                kept.push(*p);
            }
        }
        if kept.len() <= cap {
            return kept;
        }
        voxel *= 1.6;
    }
}

/// Full section SLAM: ICP-refined odometry edges, loop-closure detection,
/// pose-graph optimization and fusion.
pub struct SlamOutput {
    pub poses: Vec<RigidTransform>,
    pub fused: Vec<SurfacePoint>,
    pub loop_pair: Option<(usize, usize)>,
}

pub fn slam_pipeline(patches: &[ScanPatch], noise: &NoiseConfig) -> Result<SlamOutput, SlamError> {
    let n = patches.len();
    if n < 2 {
        return Err(SlamError::InvalidGraph("need at least 2 patches".into()));
    }
    let odom_weight =
        (1.0 / (noise.odom_rot_sigma.powi(2) + noise.odom_trans_sigma.powi(2)).max(1e-12))
            .min(1e12);
    let mut edges = Vec::with_capacity(n);
    let mut chained = vec![patches[0].odom_pose];
    for k in 0..n - 1 {
        let init = patches[k].odom_pose.inverse().compose(&patches[k + 1].odom_pose);
        let measured =
            match icp_trimmed(&patches[k + 1].points, &patches[k].points, &init, 40, 1e-10, 0.35) {
                Ok(res) => res.transform,
                Err(_) => init,
            };
        edges.push(PoseEdge { from: k, to: k + 1, measured, weight: odom_weight, is_loop: false });
        let prev = chained[k];
        chained.push(prev.compose(&measured));
    }
    let loop_closure = detect_loop_closure(patches, &chained, noise);
    let loop_pair = loop_closure.as_ref().map(|l| (l.from, l.to));
    if let Some(l) = loop_closure {
        let w = (1.0 / (l.rmse * l.rmse).max(1e-12)).min(1e12);
        edges.push(PoseEdge { from: l.from, to: l.to, measured: l.transform, weight: w, is_loop: true });
    }
    let graph = PoseGraph { nodes: chained, edges };
    let opt = optimize_pose_graph(&graph, 50)?;
    let fused = fuse_section(patches, &opt.poses);
    Ok(SlamOutput { poses: opt.poses, fused, loop_pair })
}

/// Plain-text serialization: `VERTEX_SE3 id tx ty tz qx qy qz qw` and
/// `EDGE_SE3 from to tx ty tz qx qy qz qw weight loop`.
pub fn pose_graph_to_text(graph: &PoseGraph) -> String {
    let mut out = String::new();
    for (id, node) in graph.nodes.iter().enumerate() {
        let q = UnitQuaternion::from_rotation_matrix(&node.rotation);
        let t = node.translation;
        out.push_str(&format!(
            "VERTEX_SE3 {id} {} {} {} {} {} {} {}\n",
            t.x, t.y, t.z, q.i, q.j, q.k, q.w
        ));
    }
    for e in &graph.edges {
        let q = UnitQuaternion::from_rotation_matrix(&e.measured.rotation);
        let t = e.measured.translation;
        out.push_str(&format!(
            "EDGE_SE3 {} {} {} {} {} {} {} {} {} {} {}\n",
            e.from,
            e.to,
            t.x,
            t.y,
            t.z,
            q.i,
            q.j,
            q.k,
            q.w,
            e.weight,
            if e.is_loop { 1 } else { 0 }
        ));
    }
    out
}

pub fn pose_graph_from_text(text: &str) -> Result<PoseGraph, SlamError> {
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parse = |s: &str| -> Result<f64, SlamError> {
            s.parse().map_err(|_| SlamError::Parse {
                line: lineno + 1,
                why: format!("bad number {s:?}"),
            })
        };
        match fields[0] {
            "VERTEX_SE3" => {
                if fields.len() != 9 {
                    return Err(SlamError::Parse { line: lineno + 1, why: "expected 9 fields".into() });
                }
                let vals: Result<Vec<f64>, _> = fields[2..9].iter().map(|s| parse(s)).collect();
                let v = vals?;
                let q = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
                    v[6], v[3], v[4], v[5],
                ));
                nodes.push(RigidTransform::new(
                    q.to_rotation_matrix(),
                    Vector3::new(v[0], v[1], v[2]),
                ));
            }
            "EDGE_SE3" => {
                if fields.len() != 12 {
                    return Err(SlamError::Parse { line: lineno + 1, why: "expected 12 fields".into() });
                }
                let from = fields[1].parse::<usize>().map_err(|_| SlamError::Parse {
                    line: lineno + 1,
                    why: "bad node id".into(),
                })?;
                let to = fields[2].parse::<usize>().map_err(|_| SlamError::Parse {
                    line: lineno + 1,
                    why: "bad node id".into(),
                })?;
                let vals: Result<Vec<f64>, _> = fields[3..12].iter().map(|s| parse(s)).collect();
                let v = vals?;
                let q = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
                    v[6], v[3], v[4], v[5],
                ));
                edges.push(PoseEdge {
                    from,
                    to,
                    measured: RigidTransform::new(
                        q.to_rotation_matrix(),
                        Vector3::new(v[0], v[1], v[2]),
                    ),
                    weight: v[7],
                    is_loop: v[8] != 0.0,
                });
            }
            other => {
                return Err(SlamError::Parse {
                    line: lineno + 1,
                    why: format!("unknown record {other:?}"),
                })
            }
        }
    }
    Ok(PoseGraph { nodes, edges })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_object, SectionSpec};
    use crate::scanner::{
        scan_patch_sequence, scan_section, true_patch_poses, NoiseConfig,
        DEFAULT_BAND_HALF_WIDTH, PATCH_SAMPLES_PER_CIRCLE,
    };
    use nalgebra::Unit;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    /// Aperiodic surface band: u and latitude jittered so ICP tests see a
    /// continuous surface sampling rather than a rigid lattice.
    fn band_cloud(seed: u64) -> Vec<Vector3<f64>> {
        let obj = generate_object(seed, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31) + 7);
        (0..240)
            .map(|_| {
                let theta = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
                let phi = rng.gen_range(-0.15..0.15);
                crate::geometry::direction(theta, phi) * obj.radius(theta, phi)
            })
            .collect()
    }

    fn perturb_cloud(cloud: &[Vector3<f64>], sigma: f64, seed: u64) -> Vec<Vector3<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        cloud
            .iter()
            .map(|p| {
                let e = Vector3::new(
                    rng.sample::<f64, _>(StandardNormal),
                    rng.sample::<f64, _>(StandardNormal),
                    rng.sample::<f64, _>(StandardNormal),
                );
                p + e * sigma
            })
            .collect()
    }

    fn rot_error_deg(a: &Rotation3<f64>, b: &Rotation3<f64>) -> f64 {
        (a.inverse() * b).angle().to_degrees()
    }

    #[test]
    fn icp_identical_clouds_is_identity() {
        let cloud = band_cloud(1);
        let res = icp_align(&cloud, &cloud, &RigidTransform::identity(), 30, 1e-12).unwrap();
        assert!(res.rmse < 1e-12);
        assert!(rot_error_deg(&res.transform.rotation, &Rotation3::identity()) < 1e-9);
        assert!(res.transform.translation.norm() < 1e-12);
    }

    #[test]
    fn icp_recovers_small_rotation() {
        let cloud = band_cloud(2);
        let truth = RigidTransform::new(
            Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::z()), 5.0f64.to_radians()),
            Vector3::zeros(),
        );
        // align rotated cloud back onto the original
        let moved: Vec<Vector3<f64>> = cloud.iter().map(|p| truth.apply(p)).collect();
        let res = icp_align(&cloud, &moved, &RigidTransform::identity(), 60, 1e-13).unwrap();
        assert!(
            rot_error_deg(&res.transform.rotation, &truth.rotation) < 0.1,
            "rotation error {}",
            rot_error_deg(&res.transform.rotation, &truth.rotation)
        );
        assert!((res.transform.translation - truth.translation).norm() < 1e-4);
    }

    #[test]
    fn icp_noisy_benchmark_median_error() {
        let cloud = band_cloud(3);
        let mut rot_errs = Vec::new();
        let mut trans_errs = Vec::new();
        for trial in 0..100u64 {
            let truth = RigidTransform::new(
                Rotation3::from_axis_angle(
                    &Unit::new_normalize(Vector3::new(0.2, -0.1, 1.0)),
                    4.0f64.to_radians(),
                ),
                Vector3::new(1e-3, -5e-4, 8e-4),
            );
            let moved: Vec<Vector3<f64>> =
                perturb_cloud(&cloud, 1e-3, 900 + trial).iter().map(|p| truth.apply(p)).collect();
            let source = perturb_cloud(&cloud, 1e-3, 1900 + trial);
            let res = icp_align(&source, &moved, &RigidTransform::identity(), 60, 1e-12).unwrap();
            rot_errs.push(rot_error_deg(&res.transform.rotation, &truth.rotation));
            trans_errs.push((res.transform.translation - truth.translation).norm());
        }
        rot_errs.sort_by(f64::total_cmp);
        trans_errs.sort_by(f64::total_cmp);
        assert!(rot_errs[50] < 2.0, "median rotation error {}", rot_errs[50]);
        assert!(trans_errs[50] < 1e-3, "median translation error {}", trans_errs[50]);
    }

    #[test]
    fn icp_rejects_collinear_clouds() {
        let line: Vec<Vector3<f64>> =
            (0..20).map(|i| Vector3::new(i as f64 * 1e-3, 0.0, 0.0)).collect();
        match icp_align(&line, &line, &RigidTransform::identity(), 10, 1e-9) {
            Err(SlamError::DegenerateGeometry) => {}
            other => panic!("expected degenerate-geometry error, got {other:?}"),
        }
    }

    #[test]
    fn loop_closure_detected_on_full_revolution() {
        let obj = generate_object(4, 2).unwrap();
        let spec = SectionSpec::new(0.0, 0.0, 0.0, DEFAULT_BAND_HALF_WIDTH);
        let noise = NoiseConfig::noiseless();
        let patches = scan_patch_sequence(&obj, &spec, &noise, 24).unwrap();
        let poses: Vec<RigidTransform> = patches.iter().map(|p| p.odom_pose).collect();
        let lc = detect_loop_closure(&patches, &poses, &noise).expect("loop must close");
        assert_eq!(lc.from, 0);
        assert!(lc.to >= 21, "expected revisit near patch 23, got {}", lc.to);
    }

    #[test]
    fn no_loop_closure_on_quarter_turn() {
        let obj = generate_object(4, 2).unwrap();
        let spec = SectionSpec::new(0.0, 0.0, 0.0, DEFAULT_BAND_HALF_WIDTH);
        let noise = NoiseConfig::noiseless();
        // 90° of coverage: the first 6 patches of a 24-patch revolution
        let patches: Vec<ScanPatch> =
            scan_patch_sequence(&obj, &spec, &noise, 24).unwrap().into_iter().take(6).collect();
        let poses: Vec<RigidTransform> = patches.iter().map(|p| p.odom_pose).collect();
        assert!(detect_loop_closure(&patches, &poses, &noise).is_none());
    }

    #[test]
    fn loop_detection_rate_under_default_noise() {
        let obj = generate_object(6, 2).unwrap();
        let spec = SectionSpec::new(0.1, 0.2, 0.0, DEFAULT_BAND_HALF_WIDTH);
        let mut detected = 0;
        const SEEDS: usize = 50;
        for s in 0..SEEDS {
            let noise = NoiseConfig { seed: 300 + s as u64, ..NoiseConfig::default() };
            let patches = scan_patch_sequence(&obj, &spec, &noise, 24).unwrap();
            let out = slam_pipeline(&patches, &noise).unwrap();
            if out.loop_pair.is_some() {
                detected += 1;
            }
        }
        assert!(detected * 10 >= SEEDS * 9, "detected {detected}/{SEEDS}");
    }

    fn chain_graph(n: usize, drift: f64) -> (PoseGraph, Vec<RigidTransform>) {
        // ground truth: rotation about z in equal steps
        let axis = Unit::new_normalize(Vector3::z());
        let step = std::f64::consts::TAU / n as f64;
        let truth: Vec<RigidTransform> = (0..n)
            .map(|k| {
                RigidTransform::new(Rotation3::from_axis_angle(&axis, k as f64 * step), Vector3::zeros())
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut nodes = vec![truth[0]];
        let mut edges = Vec::new();
        for k in 0..n - 1 {
            let true_rel = truth[k].inverse().compose(&truth[k + 1]);
            let w = Vector3::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            ) * drift;
            let noisy = true_rel.compose(&RigidTransform::exp(&[w.x, w.y, w.z, 0.0, 0.0, 0.0]));
            edges.push(PoseEdge { from: k, to: k + 1, measured: noisy, weight: 1.0, is_loop: false });
            let prev = *nodes.last().unwrap();
            nodes.push(prev.compose(&noisy));
        }
        (PoseGraph { nodes, edges }, truth)
    }

    #[test]
    fn exact_graph_is_already_optimal() {
        let (mut graph, truth) = chain_graph(12, 0.0);
        graph.nodes = truth.clone();
        let out = optimize_pose_graph(&graph, 30).unwrap();
        assert!(out.final_cost < 1e-20);
        for (a, b) in out.poses.iter().zip(&truth) {
            assert!((a.rotation.matrix() - b.rotation.matrix()).norm() < 1e-9);
        }
    }

    #[test]
    fn loop_edge_reduces_endpoint_drift() {
        let (mut graph, truth) = chain_graph(16, 0.02);
        let n = graph.nodes.len();
        // exact loop edge between first and last node
        let loop_rel = truth[0].inverse().compose(&truth[n - 1]);
        graph.edges.push(PoseEdge {
            from: 0,
            to: n - 1,
            measured: loop_rel,
            weight: 100.0,
            is_loop: true,
        });
        let drift_before = (truth[n - 1].inverse().compose(&graph.nodes[n - 1])).rotation.angle();
        let out = optimize_pose_graph(&graph, 60).unwrap();
        let drift_after = (truth[n - 1].inverse().compose(&out.poses[n - 1])).rotation.angle();
        assert!(out.final_cost <= out.initial_cost);
        assert!(
            drift_after < 0.2 * drift_before,
            "endpoint drift {drift_after} vs odometry {drift_before}"
        );
    }

    #[test]
    fn without_loop_edge_output_matches_odometry() {
        let (graph, _) = chain_graph(10, 0.02);
        let out = optimize_pose_graph(&graph, 30).unwrap();
        // chained odometry already satisfies every edge exactly
        assert!(out.final_cost < 1e-18);
        for (a, b) in out.poses.iter().zip(&graph.nodes) {
            assert!((a.rotation.matrix() - b.rotation.matrix()).norm() < 1e-7);
            assert!((a.translation - b.translation).norm() < 1e-9);
        }
    }

    #[test]
    fn zero_noise_pipeline_reproduces_section_scan() {
        let obj = generate_object(9, 2).unwrap();
        let spec = SectionSpec::new(-0.4, 0.25, -0.002, DEFAULT_BAND_HALF_WIDTH);
        let noise = NoiseConfig::noiseless();
        let patches = scan_patch_sequence(&obj, &spec, &noise, 24).unwrap();
        let out = slam_pipeline(&patches, &noise).unwrap();
        let section = scan_section(&obj, &spec, &noise, PATCH_SAMPLES_PER_CIRCLE).unwrap();
        let section_xyz: Vec<Vector3<f64>> = section
            .iter()
            .map(|p| crate::geometry::direction(p.theta, p.phi) * p.r)
            .collect();
        assert!(out.fused.len() <= FUSE_CAP);
        for p in &out.fused {
            let xyz = crate::geometry::direction(p.theta, p.phi) * p.r;
            let d = section_xyz.iter().map(|q| (xyz - q).norm()).fold(f64::INFINITY, f64::min);
            assert!(d < 1e-6, "fused point {d} away from section scan");
        }
    }

    #[test]
    fn fusion_respects_point_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts: Vec<Vector3<f64>> = (0..6000)
            .map(|_| {
                Vector3::new(
                    rng.gen_range(-0.02..0.02),
                    rng.gen_range(-0.02..0.02),
                    rng.gen_range(-0.02..0.02),
                )
            })
            .collect();
        assert!(downsample_xyz(&pts, 2000).len() <= 2000);
    }

    #[test]
    fn slam_beats_raw_odometry_under_noise() {
        // quantitative content of the ICP-reconstruction comparison: paired
        // over seeds, fused RMSE with ICP + loop closure vs raw odometry
        let obj = generate_object(12, 3).unwrap();
        let spec = SectionSpec::new(0.2, -0.1, 0.001, DEFAULT_BAND_HALF_WIDTH);
        let mut improvements = 0;
        const SEEDS: usize = 30;
        for s in 0..SEEDS {
            let noise = NoiseConfig {
                depth_sigma: 2e-3,
                point_sigma: 0.0,
                seed: 40 + s as u64,
                ..NoiseConfig::default()
            };
            let patches = scan_patch_sequence(&obj, &spec, &noise, 24).unwrap();
            let odom_poses: Vec<RigidTransform> = patches.iter().map(|p| p.odom_pose).collect();
            let raw = fuse_section(&patches, &odom_poses);
            let out = slam_pipeline(&patches, &noise).unwrap();
            let rmse = |pts: &[SurfacePoint]| {
                (pts.iter()
                    .map(|p| {
                        let err = p.r - obj.radius(p.theta, p.phi);
                        err * err
                    })
                    .sum::<f64>()
                    / pts.len() as f64)
                    .sqrt()
            };
            if rmse(&out.fused) < rmse(&raw) {
                improvements += 1;
            }
        }
        assert!(improvements * 3 >= SEEDS * 2, "improved {improvements}/{SEEDS}");
    }

    #[test]
    fn pose_graph_text_roundtrip() {
        let (mut graph, _) = chain_graph(5, 0.01);
        graph.edges.push(PoseEdge {
            from: 0,
            to: 4,
            measured: RigidTransform::identity(),
            weight: 42.0,
            is_loop: true,
        });
        let text = pose_graph_to_text(&graph);
        let parsed = pose_graph_from_text(&text).unwrap();
        assert_eq!(parsed.nodes.len(), graph.nodes.len());
        assert_eq!(parsed.edges.len(), graph.edges.len());
        for (a, b) in parsed.nodes.iter().zip(&graph.nodes) {
            assert!((a.rotation.matrix() - b.rotation.matrix()).norm() < 1e-12);
            assert!((a.translation - b.translation).norm() < 1e-12);
        }
        assert!(parsed.edges[4].is_loop);
        assert_eq!(parsed.edges[4].weight, 42.0);
        let _ = true_patch_poses(&SectionSpec::new(0.0, 0.0, 0.0, 0.1), 8);
    }
}

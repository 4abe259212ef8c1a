//! Pose algebra, depth-quantile translation scaling, the pose-conditioning
//! vector, gravity alignment and orbit reference sampling.

use nalgebra::{Matrix3, Unit, UnitQuaternion, Vector3};

use crate::colmap::{ImageId, Pose, SparseModel};
use crate::depth::DepthMap;
use crate::error::{Error, Result};

/// Maps reference-camera coordinates to target-camera coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativePose {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl RelativePose {
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }
}

/// Rigid transform applied to world coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidTransform {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }
}

fn renormalize(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::new_normalize(q.into_inner())
}

/// `tgt(X) == rel(ref(X))` for every world point `X`.
pub fn relative_pose(reference: &Pose, target: &Pose) -> RelativePose {
    let rotation = renormalize(target.rotation * reference.rotation.inverse());
    let translation = target.translation - rotation * reference.translation;
    RelativePose {
        rotation,
        translation,
    }
}

/// Nearest-rank quantile: the value at index `ceil(q n) - 1` of the sorted
/// values. Reorders `values` in place.
pub fn quantile_nearest_rank(values: &mut [f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidInput("quantile of an empty set".into()));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidInput(format!("quantile {q} outside (0, 1)")));
    }
    let n = values.len();
    // The small slack keeps q*n that lands on an integer from rounding up.
    let rank = ((q * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    let (_, v, _) = values.select_nth_unstable_by(rank - 1, |a, b| a.total_cmp(b));
    Ok(*v)
}

/// Nearest-rank `q`-quantile over the valid pixels of `depth`.
pub fn depth_quantile_scale(depth: &DepthMap, q: f64) -> Result<f64> {
    let mut values: Vec<f64> = depth.valid_values().collect();
    if values.is_empty() {
        return Err(Error::InvalidInput("depth map has no valid pixels".into()));
    }
    quantile_nearest_rank(&mut values, q)
}

/// Row-major flattened 3x4 extrinsic (rotation, scaled translation) followed
/// by the vertical field of view in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditioningVector(pub [f64; 13]);

impl ConditioningVector {
    pub fn rotation(&self) -> Matrix3<f64> {
        let v = &self.0;
        Matrix3::new(v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10])
    }

    pub fn translation(&self) -> Vector3<f64> {
        Vector3::new(self.0[3], self.0[7], self.0[11])
    }

    pub fn fov(&self) -> f64 {
        self.0[12]
    }
}

pub fn build_conditioning(rel: &RelativePose, fov_vertical: f64, scale: f64) -> Result<ConditioningVector> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidInput(format!("translation scale {scale} must be positive")));
    }
    if !(fov_vertical > 0.0 && fov_vertical < std::f64::consts::PI) {
        return Err(Error::InvalidInput(format!("field of view {fov_vertical} outside (0, pi)")));
    }
    let r = rel.rotation.to_rotation_matrix().into_inner();
    let t = rel.translation / scale;
    let mut out = [0.0; 13];
    for row in 0..3 {
        for col in 0..3 {
            out[row * 4 + col] = r[(row, col)];
        }
        out[row * 4 + 3] = t[row];
    }
    out[12] = fov_vertical;
    Ok(ConditioningVector(out))
}

/// Rotates the model so the mean camera down-axis (camera +y in world
/// coordinates) points along world -z. Reprojections are unchanged.
pub fn gravity_align(model: &SparseModel) -> Result<(SparseModel, RigidTransform)> {
    if model.images.is_empty() {
        return Err(Error::InvalidInput("gravity alignment needs a registered image".into()));
    }
    let sum: Vector3<f64> = model
        .images
        .values()
        .map(|img| img.pose.rotation.inverse() * Vector3::y())
        .sum();
    let mean = sum / model.images.len() as f64;
    if mean.norm() < 1e-9 {
        return Err(Error::Degenerate("camera down-axes cancel out".into()));
    }
    let down = mean.normalize();
    let target = -Vector3::z();
    let rotation = UnitQuaternion::rotation_between(&down, &target).unwrap_or_else(|| {
        // Antiparallel: any half-turn about a horizontal axis.
        UnitQuaternion::from_axis_angle(&Unit::new_normalize(Vector3::x()), std::f64::consts::PI)
    });
    let transform = RigidTransform {
        rotation,
        translation: Vector3::zeros(),
    };
    Ok((transform_model(model, &transform), transform))
}

/// Applies a world-frame rigid transform to every point and pose.
pub fn transform_model(model: &SparseModel, tf: &RigidTransform) -> SparseModel {
    let mut out = model.clone();
    let inv = tf.rotation.inverse();
    for img in out.images.values_mut() {
        // R' = R Rg^T, t' = t - R' tg
        let rotation = renormalize(img.pose.rotation * inv);
        let translation = img.pose.translation - rotation * tf.translation;
        img.pose = Pose::from_parts(rotation, translation);
    }
    for p in out.points.values_mut() {
        p.xyz = tf.apply(&p.xyz);
    }
    out
}

/// Horizontal viewing angle of a camera in a +z-up world.
pub fn viewing_angle(pose: &Pose) -> f64 {
    let dir = pose.rotation.inverse() * Vector3::z();
    dir.y.atan2(dir.x)
}

/// Sorts images by horizontal viewing angle and picks `k` evenly spaced
/// entries, at sorted indices `floor(i n / k)`.
pub fn sample_orbit_references(model: &SparseModel, k: usize) -> Result<Vec<ImageId>> {
    let n = model.images.len();
    if n == 0 {
        return Err(Error::InvalidInput("model has no registered images".into()));
    }
    if k > n {
        return Err(Error::InvalidInput(format!("cannot sample {k} of {n} images")));
    }
    let mut sorted: Vec<(f64, ImageId)> = model
        .images
        .values()
        .map(|img| (viewing_angle(&img.pose), img.image_id))
        .collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok((0..k).map(|i| sorted[i * n / k].1).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colmap::{CameraIntrinsics, CameraModel, Point2D, Point3D, RegisteredImage, TrackElement};
    use crate::camera::project;
    use nalgebra::{Matrix4, Rotation3};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pose(rng: &mut impl Rng) -> Pose {
        let q = UnitQuaternion::from_euler_angles(
            rng.random_range(-3.1..3.1),
            rng.random_range(-1.5..1.5),
            rng.random_range(-3.1..3.1),
        );
        Pose::from_parts(
            q,
            Vector3::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            ),
        )
    }

    fn homogeneous(pose: &Pose) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&pose.rotation_matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&pose.translation);
        m
    }

    #[test]
    fn relative_pose_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_pose(&mut rng);
        let rel = relative_pose(&p, &p);
        assert!(rel.rotation.angle() < 1e-12);
        assert!(rel.translation.norm() < 1e-12);

        let tgt = Pose::from_parts(UnitQuaternion::identity(), Vector3::new(0.0, 0.0, -1.0));
        let rel = relative_pose(&Pose::identity(), &tgt);
        assert_eq!(rel.translation, Vector3::new(0.0, 0.0, -1.0));
    }

    #[test]
    fn relative_pose_matches_matrix_algebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let (a, b) = (random_pose(&mut rng), random_pose(&mut rng));
            let rel = relative_pose(&a, &b);
            let oracle = homogeneous(&b) * homogeneous(&a).try_inverse().unwrap();
            let mut mine = Matrix4::identity();
            mine.fixed_view_mut::<3, 3>(0, 0)
                .copy_from(&rel.rotation.to_rotation_matrix().into_inner());
            mine.fixed_view_mut::<3, 1>(0, 3).copy_from(&rel.translation);
            assert!((oracle - mine).abs().max() < 1e-9);
            let x = Vector3::new(rng.random(), rng.random(), rng.random());
            let via_ref = rel.apply(&a.transform_point(&x));
            assert!((via_ref - b.transform_point(&x)).norm() < 1e-9);
            assert!((rel.rotation.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn quantile_examples() {
        let mut v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(quantile_nearest_rank(&mut v, 0.2).unwrap(), 2.0);
        let d = DepthMap::constant(4, 4, 5.0).unwrap();
        for q in [0.01, 0.2, 0.5, 0.99] {
            assert_eq!(depth_quantile_scale(&d, q).unwrap(), 5.0);
        }
        let empty = DepthMap::constant(2, 2, 0.0).unwrap();
        assert!(depth_quantile_scale(&empty, 0.2).is_err());
        assert!(quantile_nearest_rank(&mut [1.0], 1.0).is_err());
    }

    /// Smallest value v with #{x <= v} >= q n.
    fn quantile_oracle(values: &[f64], q: f64) -> f64 {
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        let need = q * s.len() as f64;
        *s.iter()
            .find(|&&v| s.iter().filter(|&&x| x <= v).count() as f64 >= need - 1e-9)
            .unwrap()
    }

    proptest! {
        #[test]
        fn quantile_matches_sort_oracle(
            values in prop::collection::vec(0.01f64..100.0, 1..200),
            q in 0.01f64..0.99,
            seed in any::<u64>(),
        ) {
            let d = DepthMap::from_values(values.len(), 1, values.clone()).unwrap();
            let got = depth_quantile_scale(&d, q).unwrap();
            prop_assert_eq!(got, quantile_oracle(&values, q));
            // Permutation invariance.
            let mut shuffled = values.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            use rand::seq::SliceRandom;
            shuffled.shuffle(&mut rng);
            prop_assert_eq!(quantile_nearest_rank(&mut shuffled, q).unwrap(), got);
        }
    }

    #[test]
    fn conditioning_layout() {
        let rel = RelativePose {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        };
        let c = build_conditioning(&rel, std::f64::consts::FRAC_PI_2, 1.0).unwrap();
        let expected = [1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, std::f64::consts::FRAC_PI_2];
        assert_eq!(c.0, expected);

        let rel = RelativePose {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::new(0.0, 0.0, 2.0),
        };
        let c = build_conditioning(&rel, 1.0, 2.0).unwrap();
        assert_eq!(c.translation(), Vector3::new(0.0, 0.0, 1.0));
        assert!(build_conditioning(&rel, 1.0, 0.0).is_err());
        assert!(build_conditioning(&rel, 4.0, 1.0).is_err());
    }

    #[test]
    fn conditioning_rotation_is_orthonormal_and_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let (a, b) = (random_pose(&mut rng), random_pose(&mut rng));
            let rel = relative_pose(&a, &b);
            let c = build_conditioning(&rel, 0.8, 1.0).unwrap();
            let r = c.rotation();
            assert!((r * r.transpose() - Matrix3::identity()).abs().max() < 1e-9);
            // Power-of-two scales make the division exact.
            let s = 2f64.powi(rng.random_range(-8..8));
            let scaled = RelativePose {
                rotation: rel.rotation,
                translation: rel.translation * s,
            };
            assert_eq!(build_conditioning(&scaled, 0.8, s).unwrap(), c);
        }
    }

    fn ring_model(n: usize, tilt: Option<Rotation3<f64>>) -> SparseModel {
        let mut m = SparseModel::default();
        m.cameras.insert(
            1,
            CameraIntrinsics::new(1, CameraModel::Pinhole, 200, 100, vec![100.0, 100.0, 100.0, 50.0]).unwrap(),
        );
        let world_tilt = tilt.unwrap_or_else(Rotation3::identity);
        for i in 0..n {
            let theta = i as f64 * std::f64::consts::TAU / n as f64 + 0.01;
            // Camera looking outward at angle theta, +y (down) along -z world.
            let fwd = Vector3::new(theta.cos(), theta.sin(), 0.0);
            let down = -Vector3::z();
            let right = down.cross(&fwd);
            let r_cam_to_world = Matrix3::from_columns(&[right, down, fwd]);
            let r_world_to_cam = Rotation3::from_matrix_unchecked(r_cam_to_world.transpose());
            let r = r_world_to_cam * world_tilt.inverse();
            let center = world_tilt * (fwd * 0.5);
            let q = UnitQuaternion::from_rotation_matrix(&r);
            let t = -(r * center);
            m.images.insert(
                i as u32 + 1,
                RegisteredImage {
                    image_id: i as u32 + 1,
                    name: format!("{i}.jpg"),
                    camera_id: 1,
                    pose: Pose::from_parts(q, t),
                    points2d: vec![Point2D { x: 1.0, y: 1.0, point3d_id: Some(1) }],
                },
            );
        }
        m.points.insert(
            1,
            Point3D {
                point3d_id: 1,
                xyz: world_tilt * Vector3::new(3.0, 1.0, 0.5),
                rgb: [0; 3],
                error: 0.0,
                track: (1..=n as u32)
                    .map(|image_id| TrackElement { image_id, point2d_idx: 0 })
                    .collect(),
            },
        );
        m
    }

    #[test]
    fn aligned_model_yields_identity() {
        let m = ring_model(8, None);
        let (_, tf) = gravity_align(&m).unwrap();
        assert!(tf.rotation.angle() < 1e-9);
        assert!(tf.translation.norm() < 1e-9);
    }

    #[test]
    fn tilted_model_is_undone() {
        let tilt = Rotation3::from_axis_angle(&Vector3::x_axis(), std::f64::consts::FRAC_PI_2);
        let m = ring_model(8, Some(tilt));
        let (aligned, tf) = gravity_align(&m).unwrap();
        // Composition with the tilt is a rotation about z only.
        let residual = tf.rotation.to_rotation_matrix() * tilt;
        assert!((residual * Vector3::z() - Vector3::z()).norm() < 1e-9);
        let reference = ring_model(8, None);
        for (id, img) in &aligned.images {
            let down = img.pose.rotation.inverse() * Vector3::y();
            let expected = reference.images[id].pose.rotation.inverse() * Vector3::y();
            assert!((down - expected).norm() < 1e-9);
        }
    }

    #[test]
    fn gravity_align_preserves_reprojection_and_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut m = SparseModel::default();
        let cam = CameraIntrinsics::new(1, CameraModel::SimpleRadial, 300, 200, vec![150.0, 150.0, 100.0, 0.05]).unwrap();
        m.cameras.insert(1, cam.clone());
        for i in 1..=6u32 {
            m.images.insert(
                i,
                RegisteredImage {
                    image_id: i,
                    name: format!("{i}"),
                    camera_id: 1,
                    pose: random_pose(&mut rng),
                    points2d: vec![],
                },
            );
        }
        let pts: Vec<Vector3<f64>> = (0..50)
            .map(|_| Vector3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)))
            .collect();
        for (k, p) in pts.iter().enumerate() {
            m.points.insert(k as u64, Point3D { point3d_id: k as u64, xyz: *p, rgb: [0; 3], error: 0.0, track: vec![] });
        }
        let (aligned, _) = gravity_align(&m).unwrap();
        let mean_down: Vector3<f64> = aligned
            .images
            .values()
            .map(|i| i.pose.rotation.inverse() * Vector3::y())
            .sum();
        assert!((mean_down.normalize() + Vector3::z()).norm() < 1e-9);
        let mut compared = 0;
        for (id, img) in &m.images {
            let new_pose = &aligned.images[id].pose;
            for (k, p) in m.points.iter() {
                let before = project(&cam, &img.pose, &p.xyz).unwrap();
                let after = project(&cam, new_pose, &aligned.points[k].xyz).unwrap();
                match (before.in_front(), after.in_front()) {
                    (Some((a, _)), Some((b, _))) if a.x.abs() < 1e3 && a.y.abs() < 1e3 => {
                        compared += 1;
                        assert!((a - b).norm() < 1e-9, "{a} vs {b}");
                    }
                    (Some(_), Some(_)) => {}
                    (None, None) => {}
                    _ => panic!("visibility changed"),
                }
            }
        }
        assert!(compared > 50);
        for a in 0..pts.len() {
            for b in (a + 1)..pts.len() {
                let before = (pts[a] - pts[b]).norm();
                let after = (aligned.points[&(a as u64)].xyz - aligned.points[&(b as u64)].xyz).norm();
                assert!((before - after).abs() <= 1e-9 * before);
            }
        }
    }

    #[test]
    fn gravity_align_degenerate_and_empty() {
        assert!(gravity_align(&SparseModel::default()).is_err());
        let mut m = ring_model(2, None);
        // Flip one camera upside down so the down-axes cancel.
        let flip = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), std::f64::consts::PI);
        let first = m.images[&1].pose.rotation;
        m.images.get_mut(&2).unwrap().pose.rotation = flip * first;
        assert!(matches!(gravity_align(&m), Err(Error::Degenerate(_))));
    }

    #[test]
    fn orbit_sampling() {
        let m = ring_model(10, None);
        let picked = sample_orbit_references(&m, 10).unwrap();
        let mut by_angle: Vec<_> = m.images.values().map(|i| (viewing_angle(&i.pose), i.image_id)).collect();
        by_angle.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert_eq!(picked, by_angle.iter().map(|x| x.1).collect::<Vec<_>>());

        let m = ring_model(100, None);
        let picked = sample_orbit_references(&m, 10).unwrap();
        let mut by_angle: Vec<_> = m.images.values().map(|i| (viewing_angle(&i.pose), i.image_id)).collect();
        by_angle.sort_by(|a, b| a.0.total_cmp(&b.0));
        let every_tenth: Vec<_> = by_angle.iter().step_by(10).map(|x| x.1).collect();
        assert_eq!(picked, every_tenth);

        assert!(sample_orbit_references(&m, 101).is_err());
        assert!(sample_orbit_references(&SparseModel::default(), 0).is_err());
    }

    #[test]
    fn orbit_sampling_spacing_on_random_ring() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 73;
        let mut m = ring_model(n, None);
        // Jitter ring angles randomly.
        for img in m.images.values_mut() {
            let yaw = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), rng.random_range(-3.0..3.0));
            img.pose.rotation = renormalize(img.pose.rotation * yaw);
        }
        let k = 10;
        let picked = sample_orbit_references(&m, k).unwrap();
        let mut angles: Vec<f64> = m.images.values().map(|i| viewing_angle(&i.pose)).collect();
        angles.sort_by(f64::total_cmp);
        for (i, id) in picked.iter().enumerate() {
            let a = viewing_angle(&m.images[id].pose);
            let rank = angles.iter().position(|&x| x == a).unwrap();
            let ideal = i as f64 * n as f64 / k as f64;
            assert!((rank as f64 - ideal).abs() < 1.0, "slot {i}: rank {rank} vs {ideal}");
        }
    }
}

//! A ray-traced desk-scale scene: textured back wall with a window, floor
//! and a box, seen by 12 cameras on an orbit.
//!
//! Monocular depth is stored as `(depth - MONO_SHIFT) / MONO_SCALE`, so the
//! alignment that recovers model depth is `(MONO_SCALE, MONO_SHIFT)`.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use image::{Rgb, RgbImage};
use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use nvskit::colmap::{
    write_model, CameraIntrinsics, CameraModel, ModelFormat, Point2D, Point3D, Pose, RegisteredImage, SparseModel,
    TrackElement,
};
use nvskit::depth::{write_pfm, DepthMap};

pub const MONO_SCALE: f64 = 2.0;
pub const MONO_SHIFT: f64 = 0.5;
pub const N_IMAGES: u32 = 12;
/// Observations are kept only where the depth at their nearest pixel is
/// within this relative distance of the point's depth.
pub const CONTINUITY_TOL: f64 = 0.01;

const WALL_Z: f64 = 6.0;
const FLOOR_Y: f64 = 1.5;
const WINDOW: ([f64; 2], [f64; 2]) = ([1.5, 2.5], [-2.0, -1.0]);
const BOX_MIN: [f64; 3] = [-0.8, 0.3, 3.2];
const BOX_MAX: [f64; 3] = [0.4, 1.5, 4.0];
const SKY: [u8; 3] = [135, 170, 200];

pub struct View {
    pub id: u32,
    pub name: String,
    pub camera: CameraIntrinsics,
    pub pose: Pose,
    pub time: String,
    pub rgb: RgbImage,
    /// Camera-frame depth per pixel; 0 where the ray escapes.
    pub depth: Vec<f64>,
}

pub struct Scene {
    pub views: Vec<View>,
    pub model: SparseModel,
}

fn clamp(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn checker(a: f64, b: f64, freq: f64) -> f64 {
    (((a * freq).floor() as i64 + (b * freq).floor() as i64) & 1) as f64
}

#[derive(Clone, Copy)]
enum Surface {
    Wall,
    Floor,
    Box(usize),
}

fn texture(s: Surface, p: &Vector3<f64>) -> [u8; 3] {
    match s {
        Surface::Wall => {
            let c = checker(p.x, p.y, 2.0);
            [
                clamp(90.0 + 80.0 * c + 40.0 * (5.0 * p.x).sin()),
                clamp(70.0 + 60.0 * c + 40.0 * (4.0 * p.y).cos()),
                clamp(120.0 + 50.0 * (3.0 * p.x + 2.0 * p.y).sin()),
            ]
        }
        Surface::Floor => {
            let c = checker(p.x, p.z, 1.5);
            [
                clamp(150.0 - 60.0 * c + 30.0 * (4.0 * p.z).sin()),
                clamp(120.0 - 40.0 * c + 20.0 * (3.0 * p.x).cos()),
                clamp(80.0 + 30.0 * (5.0 * p.x).cos()),
            ]
        }
        Surface::Box(axis) => [
            clamp(200.0 + 30.0 * (8.0 * p.y).sin()),
            clamp(60.0 + 40.0 * axis as f64 + 30.0 * checker(p.x + p.z, p.y, 4.0)),
            clamp(50.0 + 30.0 * (6.0 * (p.x + p.z)).cos()),
        ],
    }
}

/// Nearest hit along `origin + t * dir` with `t > 0`.
fn trace(origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<(f64, Surface)> {
    let mut best: Option<(f64, Surface)> = None;
    let mut consider = |t: f64, s: Surface| {
        if t > 1e-9 && best.is_none_or(|(b, _)| t < b) {
            best = Some((t, s));
        }
    };
    if dir.z > 0.0 {
        let t = (WALL_Z - origin.z) / dir.z;
        let p = origin + dir * t;
        let in_window = (WINDOW.0[0]..WINDOW.0[1]).contains(&p.x) && (WINDOW.1[0]..WINDOW.1[1]).contains(&p.y);
        if !in_window {
            consider(t, Surface::Wall);
        }
    }
    if dir.y > 0.0 {
        let t = (FLOOR_Y - origin.y) / dir.y;
        if (origin + dir * t).z <= WALL_Z {
            consider(t, Surface::Floor);
        }
    }
    let (mut t0, mut t1, mut axis) = (f64::NEG_INFINITY, f64::INFINITY, 0);
    for k in 0..3 {
        if dir[k] == 0.0 {
            if origin[k] < BOX_MIN[k] || origin[k] > BOX_MAX[k] {
                return best;
            }
            continue;
        }
        let (a, b) = ((BOX_MIN[k] - origin[k]) / dir[k], (BOX_MAX[k] - origin[k]) / dir[k]);
        let (near, far) = (a.min(b), a.max(b));
        if near > t0 {
            t0 = near;
            axis = k;
        }
        t1 = t1.min(far);
    }
    if t0 <= t1 {
        consider(t0, Surface::Box(axis));
    }
    best
}

fn look_at(center: Vector3<f64>, target: Vector3<f64>) -> Pose {
    let forward = (target - center).normalize();
    let right = Vector3::y().cross(&forward).normalize();
    let down = forward.cross(&right);
    let r = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r));
    Pose::from_parts(q, -(r * center))
}

/// Ray through pixel coordinates `(u, v)`, scaled so its camera-frame z
/// component is 1 (the hit parameter is then the camera depth).
fn ray(camera: &CameraIntrinsics, pose: &Pose, u: f64, v: f64) -> Vector3<f64> {
    let (fx, fy) = camera.focal();
    let (cx, cy) = camera.principal_point();
    pose.rotation_matrix().transpose() * Vector3::new((u - cx) / fx, (v - cy) / fy, 1.0)
}

fn render(camera: &CameraIntrinsics, pose: &Pose) -> (RgbImage, Vec<f64>) {
    let (w, h) = (camera.width as u32, camera.height as u32);
    let c = pose.center();
    let mut rgb = RgbImage::new(w, h);
    let mut depth = vec![0.0; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            let d = ray(camera, pose, x as f64 + 0.5, y as f64 + 0.5);
            let px = match trace(&c, &d) {
                Some((t, s)) => {
                    depth[(y * w + x) as usize] = t;
                    texture(s, &(c + d * t))
                }
                None => SKY,
            };
            rgb.put_pixel(x, y, Rgb(px));
        }
    }
    (rgb, depth)
}

fn time_of(id: u32) -> String {
    match id {
        1..=9 => {
            let m = 20 * (id - 1);
            format!("2019:07:14 {:02}:{:02}:00", 10 + m / 60, m % 60)
        }
        10 => "2019:07:14 14:30:00".into(),
        11 => "2019:07:15 09:00:00".into(),
        _ => "2019:07:14 11:00:00".into(),
    }
}

fn surface_points() -> Vec<Vector3<f64>> {
    let mut pts = Vec::new();
    for i in 0..25 {
        for j in 0..10 {
            let (x, y) = (-4.5 + 0.375 * i as f64 + 0.013 * j as f64, -2.4 + 0.4 * j as f64);
            let in_window = (WINDOW.0[0]..WINDOW.0[1]).contains(&x) && (WINDOW.1[0]..WINDOW.1[1]).contains(&y);
            if !in_window {
                pts.push(Vector3::new(x, y, WALL_Z));
            }
        }
    }
    for i in 0..16 {
        for j in 0..13 {
            pts.push(Vector3::new(-3.0 + 0.4 * i as f64 + 0.011 * j as f64, FLOOR_Y, 1.5 + 0.35 * j as f64));
        }
    }
    let lerp = |k: usize, f: f64| BOX_MIN[k] + (BOX_MAX[k] - BOX_MIN[k]) * f;
    for i in 0..5 {
        for j in 0..4 {
            let (fi, fj) = ((i as f64 + 0.5) / 5.0, (j as f64 + 0.5) / 4.0);
            pts.push(Vector3::new(lerp(0, fi), lerp(1, fj), BOX_MIN[2]));
            pts.push(Vector3::new(lerp(0, fi), BOX_MIN[1], lerp(2, fj)));
        }
    }
    for i in 0..3 {
        for j in 0..4 {
            let (fi, fj) = ((i as f64 + 0.5) / 3.0, (j as f64 + 0.5) / 4.0);
            pts.push(Vector3::new(BOX_MIN[0], lerp(1, fj), lerp(2, fi)));
            pts.push(Vector3::new(BOX_MAX[0], lerp(1, fj), lerp(2, fi)));
        }
    }
    pts
}

pub fn build() -> Scene {
    let cam_main = CameraIntrinsics::new(1, CameraModel::Pinhole, 256, 192, vec![220.0, 220.0, 128.0, 96.0]).unwrap();
    let cam_wide = CameraIntrinsics::new(2, CameraModel::Pinhole, 256, 144, vec![220.0, 220.0, 128.0, 72.0]).unwrap();
    let target = Vector3::new(0.0, 0.6, 4.5);
    let views: Vec<View> = (1..=N_IMAGES)
        .map(|id| {
            let theta = -0.6 + 1.2 * (id - 1) as f64 / (N_IMAGES - 1) as f64;
            let center = target + 4.2 * Vector3::new(theta.sin(), 0.0, -theta.cos())
                + Vector3::new(0.0, -0.4 + 0.05 * (id % 3) as f64, 0.0);
            let aim = target + Vector3::new(0.1 * (id % 2) as f64, 0.0, 0.0);
            let pose = look_at(center, aim);
            let camera = if id == N_IMAGES { cam_wide.clone() } else { cam_main.clone() };
            let (rgb, depth) = render(&camera, &pose);
            View {
                id,
                name: format!("img_{id:02}.png"),
                camera,
                pose,
                time: time_of(id),
                rgb,
                depth,
            }
        })
        .collect();

    // Observations: (view index, u, v) per surface point.
    let mut tracks: Vec<(Vector3<f64>, Vec<(usize, f64, f64)>)> = Vec::new();
    for p in surface_points() {
        let mut obs = Vec::new();
        for (vi, v) in views.iter().enumerate() {
            let cam = v.pose.transform_point(&p);
            if cam.z <= 0.0 {
                continue;
            }
            let (fx, fy) = v.camera.focal();
            let (cx, cy) = v.camera.principal_point();
            let (u, w) = (fx * cam.x / cam.z + cx, fy * cam.y / cam.z + cy);
            if !(u >= 0.0 && w >= 0.0 && u < v.camera.width as f64 && w < v.camera.height as f64) {
                continue;
            }
            let occluded = match trace(&v.pose.center(), &ray(&v.camera, &v.pose, u, w)) {
                Some((t, _)) => (t - cam.z).abs() > 1e-9 * cam.z,
                None => true,
            };
            let pix = v.depth[w as usize * v.camera.width as usize + u as usize];
            let continuous = pix > 0.0 && ((pix - cam.z) / cam.z).abs() < CONTINUITY_TOL;
            if !occluded && continuous {
                obs.push((vi, u, w));
            }
        }
        if obs.len() >= 2 {
            tracks.push((p, obs));
        }
    }

    let mut model = SparseModel::default();
    model.cameras.insert(1, cam_main);
    model.cameras.insert(2, cam_wide);
    for v in &views {
        model.images.insert(
            v.id,
            RegisteredImage {
                image_id: v.id,
                name: v.name.clone(),
                camera_id: v.camera.camera_id,
                pose: v.pose.clone(),
                points2d: Vec::new(),
            },
        );
    }
    for (k, (p, obs)) in tracks.iter().enumerate() {
        let pid = k as u64 + 1;
        let mut track = Vec::new();
        for &(vi, u, w) in obs {
            let img = model.images.get_mut(&views[vi].id).unwrap();
            track.push(TrackElement {
                image_id: img.image_id,
                point2d_idx: img.points2d.len() as u32,
            });
            img.points2d.push(Point2D {
                x: u,
                y: w,
                point3d_id: Some(pid),
            });
        }
        let (vi, u, w) = obs[0];
        let rgb = views[vi].rgb.get_pixel(u as u32, w as u32).0;
        model.points.insert(
            pid,
            Point3D {
                point3d_id: pid,
                xyz: *p,
                rgb,
                error: 0.0,
                track,
            },
        );
    }
    model.validate().unwrap();
    Scene { views, model }
}

/// Stored monocular depth, as the f32 values a reader gets back.
pub fn mono_values(v: &View) -> Vec<f64> {
    v.depth
        .iter()
        .map(|&d| if d > 0.0 { ((d - MONO_SHIFT) / MONO_SCALE) as f32 as f64 } else { 0.0 })
        .collect()
}

/// Writes `sparse/`, `images/` (with `.meta` capture-time sidecars) and
/// `mono/`.
pub fn write_inputs(scene: &Scene, dir: &Path) {
    write_model(&scene.model, &dir.join("sparse"), ModelFormat::Binary).unwrap();
    fs::create_dir_all(dir.join("images")).unwrap();
    fs::create_dir_all(dir.join("mono")).unwrap();
    for v in &scene.views {
        v.rgb.save(dir.join("images").join(&v.name)).unwrap();
        fs::write(
            dir.join("images").join(format!("{}.meta", v.name)),
            format!("DateTimeOriginal={}\n", v.time),
        )
        .unwrap();
        let (w, h) = (v.camera.width as usize, v.camera.height as usize);
        let mono = DepthMap::from_values(w, h, mono_values(v)).unwrap();
        write_pfm(&mono, &dir.join("mono").join(Path::new(&v.name).with_extension("pfm"))).unwrap();
    }
}

pub fn view_index(scene: &Scene) -> BTreeMap<u32, usize> {
    scene.views.iter().enumerate().map(|(i, v)| (v.id, i)).collect()
}

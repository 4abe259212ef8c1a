//! Sparse reconstruction models: cameras, registered images and 3D points.
//!
//! Both the binary and the text layouts of the common SfM model format are
//! supported. Every parsed model is validated for reciprocal track
//! consistency; a model that fails validation is either rejected or, in
//! lenient mode, repaired by dropping the offending observations.

mod binary;
mod text;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

pub type CameraId = u32;
pub type ImageId = u32;
pub type Point3dId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CameraModel {
    SimplePinhole,
    Pinhole,
    SimpleRadial,
    Radial,
    OpenCv,
}

impl CameraModel {
    pub const ALL: [CameraModel; 5] = [
        CameraModel::SimplePinhole,
        CameraModel::Pinhole,
        CameraModel::SimpleRadial,
        CameraModel::Radial,
        CameraModel::OpenCv,
    ];

    pub fn id(self) -> i32 {
        match self {
            CameraModel::SimplePinhole => 0,
            CameraModel::Pinhole => 1,
            CameraModel::SimpleRadial => 2,
            CameraModel::Radial => 3,
            CameraModel::OpenCv => 4,
        }
    }

    pub fn from_id(id: i32) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.id() == id)
    }

    pub fn name(self) -> &'static str {
        match self {
            CameraModel::SimplePinhole => "SIMPLE_PINHOLE",
            CameraModel::Pinhole => "PINHOLE",
            CameraModel::SimpleRadial => "SIMPLE_RADIAL",
            CameraModel::Radial => "RADIAL",
            CameraModel::OpenCv => "OPENCV",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }

    pub fn num_params(self) -> usize {
        match self {
            CameraModel::SimplePinhole => 3,
            CameraModel::Pinhole => 4,
            CameraModel::SimpleRadial => 4,
            CameraModel::Radial => 5,
            CameraModel::OpenCv => 8,
        }
    }

    /// Number of leading focal-length parameters.
    fn num_focal(self) -> usize {
        match self {
            CameraModel::Pinhole | CameraModel::OpenCv => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CameraModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraIntrinsics {
    pub camera_id: CameraId,
    pub model: CameraModel,
    pub width: u64,
    pub height: u64,
    pub params: Vec<f64>,
}

impl CameraIntrinsics {
    pub fn new(
        camera_id: CameraId,
        model: CameraModel,
        width: u64,
        height: u64,
        params: Vec<f64>,
    ) -> Result<Self> {
        let cam = CameraIntrinsics {
            camera_id,
            model,
            width,
            height,
            params,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidModel(format!(
                "camera {} has zero dimension {}x{}",
                self.camera_id, self.width, self.height
            )));
        }
        if self.params.len() != self.model.num_params() {
            return Err(Error::InvalidModel(format!(
                "camera {} ({}) expects {} params, got {}",
                self.camera_id,
                self.model,
                self.model.num_params(),
                self.params.len()
            )));
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "camera {} has non-finite params",
                self.camera_id
            )));
        }
        if self.params[..self.model.num_focal()].iter().any(|&f| f <= 0.0) {
            return Err(Error::InvalidModel(format!(
                "camera {} has non-positive focal length",
                self.camera_id
            )));
        }
        Ok(())
    }

    /// Focal lengths `(fx, fy)` in pixels.
    pub fn focal(&self) -> (f64, f64) {
        match self.model {
            CameraModel::Pinhole | CameraModel::OpenCv => (self.params[0], self.params[1]),
            _ => (self.params[0], self.params[0]),
        }
    }

    /// Principal point `(cx, cy)` in pixels.
    pub fn principal_point(&self) -> (f64, f64) {
        match self.model {
            CameraModel::Pinhole | CameraModel::OpenCv => (self.params[2], self.params[3]),
            _ => (self.params[1], self.params[2]),
        }
    }

    /// Vertical field of view in radians, `2 atan(h / 2 fy)`.
    pub fn vertical_fov(&self) -> f64 {
        2.0 * (self.height as f64 / (2.0 * self.focal().1)).atan()
    }

    pub fn aspect_ratio(&self) -> f64 {
        self.width as f64 / self.height as f64
    }
}

/// World-to-camera rigid transform.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub const QUAT_NORM_TOL: f64 = 1e-9;

    /// Builds a pose from a `(w, x, y, z)` quaternion, keeping its
    /// components bit-for-bit.
    pub fn from_wxyz(q: [f64; 4], t: [f64; 3]) -> Result<Self> {
        let pose = Pose {
            rotation: UnitQuaternion::new_unchecked(Quaternion::new(q[0], q[1], q[2], q[3])),
            translation: Vector3::new(t[0], t[1], t[2]),
        };
        pose.validate()?;
        Ok(pose)
    }

    pub fn identity() -> Self {
        Pose {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_parts(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Pose {
            rotation,
            translation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let q = self.rotation.quaternion();
        if !q.coords.iter().chain(self.translation.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidModel("pose has non-finite components".into()));
        }
        if (q.norm() - 1.0).abs() > Self::QUAT_NORM_TOL {
            return Err(Error::InvalidModel(format!(
                "pose quaternion norm {} is not unit",
                q.norm()
            )));
        }
        Ok(())
    }

    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    /// Maps a world point into camera coordinates.
    pub fn transform_point(&self, world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation_matrix() * world + self.translation
    }

    /// Maps a camera-frame point back to world coordinates.
    pub fn inverse_transform_point(&self, cam: &Vector3<f64>) -> Vector3<f64> {
        self.rotation_matrix().transpose() * (cam - self.translation)
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation_matrix().transpose() * self.translation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
    pub point3d_id: Option<Point3dId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegisteredImage {
    pub image_id: ImageId,
    pub name: String,
    pub camera_id: CameraId,
    pub pose: Pose,
    pub points2d: Vec<Point2D>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TrackElement {
    pub image_id: ImageId,
    pub point2d_idx: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Point3D {
    pub point3d_id: Point3dId,
    pub xyz: Vector3<f64>,
    pub rgb: [u8; 3],
    pub error: f64,
    pub track: Vec<TrackElement>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseModel {
    pub cameras: BTreeMap<CameraId, CameraIntrinsics>,
    pub images: BTreeMap<ImageId, RegisteredImage>,
    pub points: BTreeMap<Point3dId, Point3D>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelFormat {
    Binary,
    Text,
    Auto,
}

impl std::str::FromStr for ModelFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "binary" | "bin" => Ok(ModelFormat::Binary),
            "text" | "txt" => Ok(ModelFormat::Text),
            "auto" => Ok(ModelFormat::Auto),
            other => Err(Error::InvalidInput(format!("unknown model format '{other}'"))),
        }
    }
}

/// Counts of observations dropped while repairing a dirty model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RepairReport {
    pub dropped_track_elements: usize,
    pub dropped_observations: usize,
    pub dropped_points: usize,
}

impl RepairReport {
    pub fn is_clean(&self) -> bool {
        *self == RepairReport::default()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    pub format: ModelFormat,
    /// Drop dangling observations instead of failing.
    pub lenient: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            format: ModelFormat::Auto,
            lenient: false,
        }
    }
}

const STEMS: [&str; 3] = ["cameras", "images", "points3D"];

fn model_paths(dir: &Path, ext: &str) -> [std::path::PathBuf; 3] {
    STEMS.map(|s| dir.join(format!("{s}.{ext}")))
}

fn resolve_format(dir: &Path, format: ModelFormat) -> Result<ModelFormat> {
    let all_exist = |ext| model_paths(dir, ext).iter().all(|p| p.is_file());
    match format {
        ModelFormat::Auto if all_exist("bin") => Ok(ModelFormat::Binary),
        ModelFormat::Auto if all_exist("txt") => Ok(ModelFormat::Text),
        ModelFormat::Auto => {
            let missing = model_paths(dir, "bin")
                .into_iter()
                .find(|p| !p.is_file())
                .expect("some binary file is missing");
            Err(Error::MissingFile(missing))
        }
        f => Ok(f),
    }
}

/// Reads a model directory, failing on any dangling reference.
pub fn parse_model(dir: &Path, format: ModelFormat) -> Result<SparseModel> {
    parse_model_with(
        dir,
        ParseOptions {
            format,
            lenient: false,
        },
    )
    .map(|(m, _)| m)
}

pub fn parse_model_with(dir: &Path, opts: ParseOptions) -> Result<(SparseModel, RepairReport)> {
    let format = resolve_format(dir, opts.format)?;
    let (ext, read): (&str, fn(&[std::path::PathBuf; 3]) -> Result<SparseModel>) = match format {
        ModelFormat::Binary => ("bin", binary::read),
        ModelFormat::Text => ("txt", text::read),
        ModelFormat::Auto => unreachable!(),
    };
    let paths = model_paths(dir, ext);
    for p in &paths {
        if !p.is_file() {
            return Err(Error::MissingFile(p.clone()));
        }
    }
    let mut model = read(&paths)?;
    let report = if opts.lenient {
        model.repair()
    } else {
        RepairReport::default()
    };
    model.validate()?;
    Ok((model, report))
}

/// Writes the model in ascending id order; output is byte-stable.
pub fn write_model(model: &SparseModel, dir: &Path, format: ModelFormat) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    match format {
        ModelFormat::Binary | ModelFormat::Auto => binary::write(model, &model_paths(dir, "bin")),
        ModelFormat::Text => text::write(model, &model_paths(dir, "txt")),
    }
}

impl SparseModel {
    pub fn camera_for(&self, image: &RegisteredImage) -> Result<&CameraIntrinsics> {
        self.cameras.get(&image.camera_id).ok_or_else(|| {
            Error::DanglingReference(format!(
                "image {} -> camera {}",
                image.image_id, image.camera_id
            ))
        })
    }

    pub fn image(&self, id: ImageId) -> Result<&RegisteredImage> {
        self.images.get(&id).ok_or(Error::UnregisteredImage(id))
    }

    /// Checks every invariant: camera/pose validity, unique names and
    /// reciprocal track consistency.
    pub fn validate(&self) -> Result<()> {
        for (&id, cam) in &self.cameras {
            if id != cam.camera_id {
                return Err(Error::InvalidModel(format!(
                    "camera key {id} != id {}",
                    cam.camera_id
                )));
            }
            cam.validate()?;
        }
        let mut names = HashSet::new();
        for (&id, img) in &self.images {
            if id != img.image_id {
                return Err(Error::InvalidModel(format!(
                    "image key {id} != id {}",
                    img.image_id
                )));
            }
            img.pose.validate()?;
            self.camera_for(img)?;
            if !names.insert(img.name.as_str()) {
                return Err(Error::InvalidModel(format!(
                    "duplicate image name '{}'",
                    img.name
                )));
            }
            for (idx, p2d) in img.points2d.iter().enumerate() {
                if !(p2d.x.is_finite() && p2d.y.is_finite()) {
                    return Err(Error::InvalidModel(format!(
                        "image {id} observation {idx} has non-finite coordinates"
                    )));
                }
                let Some(pid) = p2d.point3d_id else { continue };
                let point = self.points.get(&pid).ok_or_else(|| {
                    Error::DanglingReference(format!(
                        "image {id} observation {idx} -> missing point {pid}"
                    ))
                })?;
                let elem = TrackElement {
                    image_id: id,
                    point2d_idx: idx as u32,
                };
                if !point.track.contains(&elem) {
                    return Err(Error::DanglingReference(format!(
                        "image {id} observation {idx} -> point {pid} whose track lacks it"
                    )));
                }
            }
        }
        for (&pid, point) in &self.points {
            if pid != point.point3d_id {
                return Err(Error::InvalidModel(format!(
                    "point key {pid} != id {}",
                    point.point3d_id
                )));
            }
            if !point.xyz.iter().all(|v| v.is_finite()) || !point.error.is_finite() {
                return Err(Error::InvalidModel(format!("point {pid} is not finite")));
            }
            if point.track.is_empty() {
                return Err(Error::InvalidModel(format!("point {pid} has an empty track")));
            }
            for el in &point.track {
                if !self.track_element_points_to(el, pid) {
                    return Err(Error::DanglingReference(format!(
                        "point {pid} track -> image {} observation {}",
                        el.image_id, el.point2d_idx
                    )));
                }
            }
        }
        Ok(())
    }

    fn track_element_points_to(&self, el: &TrackElement, pid: Point3dId) -> bool {
        self.images
            .get(&el.image_id)
            .and_then(|img| img.points2d.get(el.point2d_idx as usize))
            .is_some_and(|p| p.point3d_id == Some(pid))
    }

    /// Drops every non-reciprocal observation, then any point left with an
    /// empty track. Images with a missing camera are still rejected by
    /// `validate`.
    pub fn repair(&mut self) -> RepairReport {
        let mut report = RepairReport::default();
        let snapshot_ok: Vec<(Point3dId, Vec<TrackElement>)> = self
            .points
            .iter()
            .map(|(&pid, p)| {
                let kept: Vec<_> = p
                    .track
                    .iter()
                    .copied()
                    .filter(|el| self.track_element_points_to(el, pid))
                    .collect();
                (pid, kept)
            })
            .collect();
        for (pid, kept) in snapshot_ok {
            let point = self.points.get_mut(&pid).expect("point exists");
            report.dropped_track_elements += point.track.len() - kept.len();
            point.track = kept;
        }
        let before = self.points.len();
        self.points.retain(|_, p| !p.track.is_empty());
        report.dropped_points = before - self.points.len();

        for (&iid, img) in self.images.iter_mut() {
            for (idx, p2d) in img.points2d.iter_mut().enumerate() {
                let Some(pid) = p2d.point3d_id else { continue };
                let elem = TrackElement {
                    image_id: iid,
                    point2d_idx: idx as u32,
                };
                let ok = self
                    .points
                    .get(&pid)
                    .is_some_and(|p| p.track.contains(&elem));
                if !ok {
                    p2d.point3d_id = None;
                    report.dropped_observations += 1;
                }
            }
        }
        report
    }
}

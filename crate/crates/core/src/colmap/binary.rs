use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use nalgebra::Vector3;

use super::*;

/// Cap on speculative preallocation; counts come from untrusted headers.
const MAX_PREALLOC: usize = 1 << 16;

struct Reader<R> {
    inner: R,
    file: String,
}

impl<R: Read> Reader<R> {
    fn wrap<T>(&self, what: &str, r: std::io::Result<T>) -> Result<T> {
        r.map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::Truncated {
                file: self.file.clone(),
                detail: format!("end of stream while reading {what}"),
            },
            _ => Error::io(&self.file, e),
        })
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let r = self.inner.read_u64::<LE>();
        self.wrap(what, r)
    }

    fn i64(&mut self, what: &str) -> Result<i64> {
        let r = self.inner.read_i64::<LE>();
        self.wrap(what, r)
    }

    fn i32(&mut self, what: &str) -> Result<i32> {
        let r = self.inner.read_i32::<LE>();
        self.wrap(what, r)
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        let r = self.inner.read_f64::<LE>();
        self.wrap(what, r)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        let r = self.inner.read_u8();
        self.wrap(what, r)
    }

    fn id32(&mut self, what: &str) -> Result<u32> {
        let v = self.i32(what)?;
        u32::try_from(v).map_err(|_| Error::InvalidModel(format!("{}: negative {what} {v}", self.file)))
    }

    fn cstring(&mut self, what: &str) -> Result<String> {
        let mut bytes = Vec::new();
        loop {
            match self.u8(what)? {
                0 => break,
                b => bytes.push(b),
            }
        }
        String::from_utf8(bytes)
            .map_err(|_| Error::InvalidModel(format!("{}: {what} is not UTF-8", self.file)))
    }
}

fn open(path: &Path) -> Result<Reader<BufReader<File>>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(Reader {
        inner: BufReader::new(f),
        file: path.display().to_string(),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub(super) fn read(paths: &[PathBuf; 3]) -> Result<SparseModel> {
    let mut model = SparseModel::default();

    let mut r = open(&paths[0])?;
    let n = r.u64("camera count")?;
    for _ in 0..n {
        let camera_id = r.id32("camera id")?;
        let model_id = r.i32("camera model id")?;
        let cam_model = CameraModel::from_id(model_id)
            .ok_or_else(|| Error::UnknownCameraModel(model_id.to_string()))?;
        let width = r.u64("camera width")?;
        let height = r.u64("camera height")?;
        let params = (0..cam_model.num_params())
            .map(|_| r.f64("camera params"))
            .collect::<Result<Vec<_>>>()?;
        model.cameras.insert(
            camera_id,
            CameraIntrinsics {
                camera_id,
                model: cam_model,
                width,
                height,
                params,
            },
        );
    }

    let mut r = open(&paths[1])?;
    let n = r.u64("image count")?;
    for _ in 0..n {
        let image_id = r.id32("image id")?;
        let mut q = [0.0; 4];
        for v in &mut q {
            *v = r.f64("image quaternion")?;
        }
        let mut t = [0.0; 3];
        for v in &mut t {
            *v = r.f64("image translation")?;
        }
        let camera_id = r.id32("image camera id")?;
        let name = r.cstring("image name")?;
        let n_pts = r.u64("observation count")?;
        let mut points2d = Vec::with_capacity((n_pts as usize).min(MAX_PREALLOC));
        for _ in 0..n_pts {
            let x = r.f64("observation x")?;
            let y = r.f64("observation y")?;
            let pid = r.i64("observation point id")?;
            let point3d_id = match pid {
                -1 => None,
                p if p >= 0 => Some(p as u64),
                p => {
                    return Err(Error::InvalidModel(format!(
                        "image {image_id}: invalid point id {p}"
                    )))
                }
            };
            points2d.push(Point2D { x, y, point3d_id });
        }
        model.images.insert(
            image_id,
            RegisteredImage {
                image_id,
                name,
                camera_id,
                pose: Pose {
                    rotation: nalgebra::UnitQuaternion::new_unchecked(nalgebra::Quaternion::new(
                        q[0], q[1], q[2], q[3],
                    )),
                    translation: Vector3::new(t[0], t[1], t[2]),
                },
                points2d,
            },
        );
    }

    let mut r = open(&paths[2])?;
    let n = r.u64("point count")?;
    for _ in 0..n {
        let point3d_id = r.u64("point id")?;
        let xyz = Vector3::new(r.f64("point xyz")?, r.f64("point xyz")?, r.f64("point xyz")?);
        let rgb = [r.u8("point rgb")?, r.u8("point rgb")?, r.u8("point rgb")?];
        let error = r.f64("point error")?;
        let len = r.u64("track length")?;
        let mut track = Vec::with_capacity((len as usize).min(MAX_PREALLOC));
        for _ in 0..len {
            let image_id = r.id32("track image id")?;
            let point2d_idx = r.id32("track point2d index")?;
            track.push(TrackElement {
                image_id,
                point2d_idx,
            });
        }
        model.points.insert(
            point3d_id,
            Point3D {
                point3d_id,
                xyz,
                rgb,
                error,
                track,
            },
        );
    }
    Ok(model)
}

pub(super) fn write(model: &SparseModel, paths: &[PathBuf; 3]) -> Result<()> {
    let mut w = create(&paths[0])?;
    write_cameras(model, &mut w).map_err(|e| Error::io(&paths[0], e))?;
    let mut w = create(&paths[1])?;
    write_images(model, &mut w).map_err(|e| Error::io(&paths[1], e))?;
    let mut w = create(&paths[2])?;
    write_points(model, &mut w).map_err(|e| Error::io(&paths[2], e))?;
    Ok(())
}

fn write_cameras(model: &SparseModel, w: &mut impl Write) -> std::io::Result<()> {
    w.write_u64::<LE>(model.cameras.len() as u64)?;
    for cam in model.cameras.values() {
        w.write_i32::<LE>(cam.camera_id as i32)?;
        w.write_i32::<LE>(cam.model.id())?;
        w.write_u64::<LE>(cam.width)?;
        w.write_u64::<LE>(cam.height)?;
        for &p in &cam.params {
            w.write_f64::<LE>(p)?;
        }
    }
    w.flush()
}

fn write_images(model: &SparseModel, w: &mut impl Write) -> std::io::Result<()> {
    w.write_u64::<LE>(model.images.len() as u64)?;
    for img in model.images.values() {
        w.write_i32::<LE>(img.image_id as i32)?;
        for v in img.pose.wxyz() {
            w.write_f64::<LE>(v)?;
        }
        for &v in img.pose.translation.iter() {
            w.write_f64::<LE>(v)?;
        }
        w.write_i32::<LE>(img.camera_id as i32)?;
        w.write_all(img.name.as_bytes())?;
        w.write_u8(0)?;
        w.write_u64::<LE>(img.points2d.len() as u64)?;
        for p in &img.points2d {
            w.write_f64::<LE>(p.x)?;
            w.write_f64::<LE>(p.y)?;
            w.write_i64::<LE>(p.point3d_id.map_or(-1, |id| id as i64))?;
        }
    }
    w.flush()
}

fn write_points(model: &SparseModel, w: &mut impl Write) -> std::io::Result<()> {
    w.write_u64::<LE>(model.points.len() as u64)?;
    for p in model.points.values() {
        w.write_u64::<LE>(p.point3d_id)?;
        for &v in p.xyz.iter() {
            w.write_f64::<LE>(v)?;
        }
        w.write_all(&p.rgb)?;
        w.write_f64::<LE>(p.error)?;
        w.write_u64::<LE>(p.track.len() as u64)?;
        for el in &p.track {
            w.write_i32::<LE>(el.image_id as i32)?;
            w.write_i32::<LE>(el.point2d_idx as i32)?;
        }
    }
    w.flush()
}

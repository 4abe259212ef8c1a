use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use super::*;

struct Lines<'a> {
    path: &'a Path,
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(path: &'a Path, content: &'a str) -> Self {
        Lines {
            path,
            iter: content.lines().enumerate(),
        }
    }

    /// Next non-blank, non-comment line.
    fn next_record(&mut self) -> Option<(usize, &'a str)> {
        self.iter.by_ref().find_map(|(i, l)| {
            let t = l.trim();
            (!t.is_empty() && !t.starts_with('#')).then_some((i + 1, t))
        })
    }

    /// Next line verbatim; observation lines may legitimately be empty.
    fn next_raw(&mut self) -> Option<(usize, &'a str)> {
        self.iter.next().map(|(i, l)| (i + 1, l.trim()))
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line,
            msg: msg.into(),
        }
    }
}

fn field<T: FromStr>(lines: &Lines, line: usize, tok: Option<&str>, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| lines.err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| lines.err(line, format!("invalid {what} '{tok}'")))
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(super) fn read(paths: &[PathBuf; 3]) -> Result<SparseModel> {
    let mut model = SparseModel::default();

    let content = read_to_string(&paths[0])?;
    let mut lines = Lines::new(&paths[0], &content);
    while let Some((ln, rec)) = lines.next_record() {
        let mut toks = rec.split_whitespace();
        let camera_id: u32 = field(&lines, ln, toks.next(), "camera id")?;
        let name: String = field(&lines, ln, toks.next(), "camera model")?;
        let cam_model =
            CameraModel::from_name(&name).ok_or(Error::UnknownCameraModel(name))?;
        let width = field(&lines, ln, toks.next(), "width")?;
        let height = field(&lines, ln, toks.next(), "height")?;
        let params = toks
            .map(|t| field::<f64>(&lines, ln, Some(t), "param"))
            .collect::<Result<Vec<_>>>()?;
        if params.len() != cam_model.num_params() {
            return Err(lines.err(
                ln,
                format!("{cam_model} expects {} params", cam_model.num_params()),
            ));
        }
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

    let content = read_to_string(&paths[1])?;
    let mut lines = Lines::new(&paths[1], &content);
    while let Some((ln, rec)) = lines.next_record() {
        let mut toks = rec.split_whitespace();
        let image_id: u32 = field(&lines, ln, toks.next(), "image id")?;
        let mut q = [0.0; 4];
        for v in &mut q {
            *v = field(&lines, ln, toks.next(), "quaternion")?;
        }
        let mut t = [0.0; 3];
        for v in &mut t {
            *v = field(&lines, ln, toks.next(), "translation")?;
        }
        let camera_id = field(&lines, ln, toks.next(), "camera id")?;
        let name: String = field(&lines, ln, toks.next(), "name")?;
        let (pln, pts) = lines
            .next_raw()
            .ok_or_else(|| Error::Truncated {
                file: paths[1].display().to_string(),
                detail: format!("image {image_id} has no observation line"),
            })?;
        let toks: Vec<&str> = pts.split_whitespace().collect();
        if !toks.len().is_multiple_of(3) {
            return Err(lines.err(pln, "observation line is not a list of triplets"));
        }
        let points2d = toks
            .chunks(3)
            .map(|c| {
                let x = field(&lines, pln, Some(c[0]), "x")?;
                let y = field(&lines, pln, Some(c[1]), "y")?;
                let pid: i64 = field(&lines, pln, Some(c[2]), "point id")?;
                let point3d_id = match pid {
                    -1 => None,
                    p if p >= 0 => Some(p as u64),
                    p => return Err(lines.err(pln, format!("invalid point id {p}"))),
                };
                Ok(Point2D { x, y, point3d_id })
            })
            .collect::<Result<Vec<_>>>()?;
        model.images.insert(
            image_id,
            RegisteredImage {
                image_id,
                name,
                camera_id,
                pose: Pose {
                    rotation: UnitQuaternion::new_unchecked(Quaternion::new(q[0], q[1], q[2], q[3])),
                    translation: Vector3::new(t[0], t[1], t[2]),
                },
                points2d,
            },
        );
    }

    let content = read_to_string(&paths[2])?;
    let mut lines = Lines::new(&paths[2], &content);
    while let Some((ln, rec)) = lines.next_record() {
        let toks: Vec<&str> = rec.split_whitespace().collect();
        if toks.len() < 8 || !(toks.len() - 8).is_multiple_of(2) {
            return Err(lines.err(ln, "malformed point record"));
        }
        let point3d_id: u64 = field(&lines, ln, Some(toks[0]), "point id")?;
        let xyz = Vector3::new(
            field(&lines, ln, Some(toks[1]), "x")?,
            field(&lines, ln, Some(toks[2]), "y")?,
            field(&lines, ln, Some(toks[3]), "z")?,
        );
        let rgb = [
            field(&lines, ln, Some(toks[4]), "r")?,
            field(&lines, ln, Some(toks[5]), "g")?,
            field(&lines, ln, Some(toks[6]), "b")?,
        ];
        let error = field(&lines, ln, Some(toks[7]), "error")?;
        let track = toks[8..]
            .chunks(2)
            .map(|c| {
                Ok(TrackElement {
                    image_id: field(&lines, ln, Some(c[0]), "track image id")?,
                    point2d_idx: field(&lines, ln, Some(c[1]), "track index")?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
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

/// 17 significant digits.
fn f(v: f64) -> String {
    format!("{v:.16e}")
}

pub(super) fn write(model: &SparseModel, paths: &[PathBuf; 3]) -> Result<()> {
    let mut s = String::new();
    s.push_str("# Camera list with one line of data per camera:\n");
    s.push_str("#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n");
    let _ = writeln!(s, "# Number of cameras: {}", model.cameras.len());
    for cam in model.cameras.values() {
        let _ = write!(s, "{} {} {} {}", cam.camera_id, cam.model, cam.width, cam.height);
        for &p in &cam.params {
            let _ = write!(s, " {}", f(p));
        }
        s.push('\n');
    }
    std::fs::write(&paths[0], s).map_err(|e| Error::io(&paths[0], e))?;

    let mut s = String::new();
    s.push_str("# Image list with two lines of data per image:\n");
    s.push_str("#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n");
    s.push_str("#   POINTS2D[] as (X, Y, POINT3D_ID)\n");
    let _ = writeln!(s, "# Number of images: {}", model.images.len());
    for img in model.images.values() {
        let _ = write!(s, "{}", img.image_id);
        for v in img.pose.wxyz().into_iter().chain(img.pose.translation.iter().copied()) {
            let _ = write!(s, " {}", f(v));
        }
        let _ = writeln!(s, " {} {}", img.camera_id, img.name);
        let obs: Vec<String> = img
            .points2d
            .iter()
            .map(|p| {
                let id = p.point3d_id.map_or_else(|| "-1".to_string(), |i| i.to_string());
                format!("{} {} {}", f(p.x), f(p.y), id)
            })
            .collect();
        s.push_str(&obs.join(" "));
        s.push('\n');
    }
    std::fs::write(&paths[1], s).map_err(|e| Error::io(&paths[1], e))?;

    let mut s = String::new();
    s.push_str("# 3D point list with one line of data per point:\n");
    s.push_str("#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n");
    let _ = writeln!(s, "# Number of points: {}", model.points.len());
    for p in model.points.values() {
        let _ = write!(
            s,
            "{} {} {} {} {} {} {} {}",
            p.point3d_id,
            f(p.xyz.x),
            f(p.xyz.y),
            f(p.xyz.z),
            p.rgb[0],
            p.rgb[1],
            p.rgb[2],
            f(p.error)
        );
        for el in &p.track {
            let _ = write!(s, " {} {}", el.image_id, el.point2d_idx);
        }
        s.push('\n');
    }
    std::fs::write(&paths[2], s).map_err(|e| Error::io(&paths[2], e))?;
    Ok(())
}

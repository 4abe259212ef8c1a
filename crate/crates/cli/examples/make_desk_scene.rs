//! Regenerates the desk scene fixture and its goldens:
//! `cargo run --release -p nvskit-cli --example make_desk_scene -- [dir]`

#[path = "../tests/support/mod.rs"]
mod support;

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use support::{desk, oracle};

fn opt(v: Option<f64>) -> String {
    v.map_or("NONE".into(), |v| v.to_string())
}

fn main() {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/desk_scene")));
    let scene = desk::build();
    desk::write_inputs(&scene, &dir);

    let pairs = oracle::pairs(&scene);
    let golden = dir.join("golden");
    fs::create_dir_all(&golden).unwrap();
    let mut text = String::from("ref_image_id\ttgt_image_id\tshared_points\n");
    for (r, t, n) in &pairs {
        writeln!(text, "{r}\t{t}\t{n}").unwrap();
    }
    fs::write(golden.join("pairs.tsv"), text).unwrap();

    let mut text = String::from("image_id\tscale\tshift\n");
    for v in &scene.views {
        let (a, b, worst) = oracle::alignment(&scene, v.id);
        assert!(worst < 0.02, "image {} has a residual of {worst}", v.id);
        writeln!(text, "{}\t{a}\t{b}", v.id).unwrap();
    }
    fs::write(golden.join("alignments.tsv"), text).unwrap();

    let mut text = String::from("ref_image_id\ttgt_image_id\tmasked_psnr\tmasked_ssim\n");
    for m in oracle::metrics(&scene, &pairs) {
        writeln!(text, "{}\t{}\t{}\t{}", m.ref_id, m.tgt_id, opt(m.masked_psnr), opt(m.masked_ssim)).unwrap();
    }
    fs::write(golden.join("metrics.tsv"), text).unwrap();
    println!("wrote {} images and {} pairs to {}", scene.views.len(), pairs.len(), dir.display());
}

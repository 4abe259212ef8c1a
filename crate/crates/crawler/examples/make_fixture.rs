//! Regenerates the offline fixture directory:
//! `cargo run -p nvskit-crawler --example make_fixture -- <dir>`

#[path = "../tests/support/scenario.rs"]
mod scenario;

fn main() {
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/graph").to_string());
    if let Err(e) = scenario::write(std::path::Path::new(&dir)) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
    println!("wrote fixture to {dir}");
}

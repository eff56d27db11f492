//! Regenerates the files under `fixtures/` from their seeded generators.
//!
//! ```text
//! cargo run -p salina --example make_fixtures [-- <dir>]
//! ```

use std::path::PathBuf;

fn main() -> salina::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures"));
    std::fs::create_dir_all(&dir).expect("create fixture directory");
    for (name, text) in salina::synth::bundled_fixtures()? {
        let path = dir.join(name);
        std::fs::write(&path, text).expect("write fixture");
        println!("wrote {}", path.display());
    }
    Ok(())
}

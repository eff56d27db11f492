//! Write a short synthetic clip to the binary container, read it back and
//! export the first frame as PGM.
//!
//!     cargo run --example clip_io -- /tmp/demo.sfr

use salina::frame_io::{encode_pgm, read_clip, write_clip, SonarFrame};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "demo.sfr".into());
    let frames: Vec<SonarFrame> = (0..8u64)
        .map(|i| {
            let mut f = SonarFrame::filled(48, 96, 40, i, i as f64 / 8.0);
            for y in 0..96 {
                f.set((i as u32 * 5) % 48, y, 220);
            }
            f
        })
        .collect();
    write_clip(&path, &frames, 8.0)?;

    let clip = read_clip(&path)?;
    println!("{path}: {} frames of {}x{} at {} fps", clip.frames.len(), clip.width, clip.height, clip.fps);
    assert_eq!(clip.frames, frames);

    let pgm = format!("{path}.frame0.pgm");
    std::fs::write(&pgm, encode_pgm(&clip.frames[0]))?;
    println!("first frame exported to {pgm}");
    Ok(())
}

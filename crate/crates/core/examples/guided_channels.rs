//! Build the three-plane input for one frame: the raw intensities, the
//! frame filtered under the foreground mask, and the mask filtered under
//! the frame. Planes are written as PGM files.
//!
//!     cargo run --release --example guided_channels -- /tmp/channels

use std::path::PathBuf;

use salina::frame_io::{encode_pgm, SonarFrame};
use salina::synth::{moving_blob_clip, BlobClipParams};
use salina::{populate_channels, GuidedFilterParams, MogField, MogParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "channels".into()));
    std::fs::create_dir_all(&dir)?;

    let p = BlobClipParams::default();
    let clip = moving_blob_clip(&p, 9)?;
    let mut field = MogField::new(p.width, p.height, MogParams::default())?;
    let target = clip.motion.iter().position(|m| *m).unwrap_or(0) + 2;
    let mut mask = None;
    for f in &clip.frames[..=target] {
        mask = Some(field.apply(f)?);
    }
    let frame = &clip.frames[target];
    let triple = populate_channels(frame, mask.as_ref().unwrap(), &GuidedFilterParams::default())?;

    for (name, plane) in [("ch1", &triple.ch1), ("ch2", &triple.ch2), ("ch3", &triple.ch3)] {
        let lo = plane.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = plane.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let img = SonarFrame::new(plane.width, plane.height, plane.to_u8(), 0, 0.0)?;
        let path = dir.join(format!("{name}.pgm"));
        std::fs::write(&path, encode_pgm(&img))?;
        println!("{name}: range [{lo:.3}, {hi:.3}] -> {}", path.display());
    }
    Ok(())
}

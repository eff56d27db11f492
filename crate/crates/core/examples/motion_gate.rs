//! Gate a clip frame by frame and compare the bandwidth saving ratio with
//! the known fraction of motion-free frames.
//!
//!     cargo run --release --example motion_gate [clip.sfr]
//!
//! Without an argument a synthetic clip with 10% motion is used.

use salina::synth::{moving_blob_clip, BlobClipParams};
use salina::{read_clip, PreprocessParams, Preprocessor};

fn main() -> salina::Result<()> {
    let (frames, truth) = match std::env::args().nth(1) {
        Some(path) => (read_clip(path)?.frames, None),
        None => {
            let clip = moving_blob_clip(&BlobClipParams::default(), 5)?;
            let ratio = clip.true_saving_ratio();
            (clip.frames, Some(ratio))
        }
    };
    let (w, h) = (frames[0].width, frames[0].height);
    let mut pre = Preprocessor::new(w, h, PreprocessParams::default())?;
    let start = std::time::Instant::now();
    for f in &frames {
        let out = pre.process(f)?;
        if out.motion.is_motion {
            println!("frame {:>4}: motion (edge density {:.4})", f.index, out.motion.edge_density);
        }
    }
    let fps = frames.len() as f64 / start.elapsed().as_secs_f64();
    let ledger = pre.ledger();
    println!(
        "{} of {} frames carried motion; saving ratio {:.3}",
        ledger.frames_motion, ledger.frames_total, ledger.saving_ratio
    );
    if let Some(t) = truth {
        println!("ground truth saving ratio {t:.3}");
    }
    println!("{fps:.0} frames/s on {w}x{h}");
    Ok(())
}

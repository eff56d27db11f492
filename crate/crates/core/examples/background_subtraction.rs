//! Run the per-pixel mixture background model over a synthetic clip and
//! print the foreground fraction of each frame next to the ground truth.
//!
//!     cargo run --release --example background_subtraction

use salina::synth::{moving_blob_clip, BlobClipParams};
use salina::{MogField, MogParams};

fn main() -> salina::Result<()> {
    let params = BlobClipParams {
        frames: 40,
        ..Default::default()
    };
    let clip = moving_blob_clip(&params, 3)?;
    let mut field = MogField::new(params.width, params.height, MogParams::default())?;

    println!("frame  foreground%  moving");
    for (f, moving) in clip.frames.iter().zip(&clip.motion) {
        let mask = field.apply(f)?;
        let pct = 100.0 * mask.count() as f64 / mask.bits.len() as f64;
        println!("{:>5}  {:>10.2}  {}", f.index, pct, if *moving { "yes" } else { "" });
    }

    // the learned background should sit close to the static scene
    let bg = field.background_estimate();
    let first = &clip.frames[0].intensities;
    let mae = bg.iter().zip(first).map(|(a, b)| (*a as f64 - *b as f64).abs()).sum::<f64>() / bg.len() as f64;
    println!("mean |background - first frame| = {mae:.2} grey levels");
    Ok(())
}

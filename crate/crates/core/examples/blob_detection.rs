//! Detect moving targets with the reference blob detector and score the
//! detections against the clip's ground-truth boxes.
//!
//!     cargo run --release --example blob_detection

use salina::detector::{evaluate_clip, BlobDetector, Detector, LabelSet};
use salina::synth::{moving_blob_clip, BlobClipParams};
use salina::{PreprocessParams, Preprocessor};

fn main() -> salina::Result<()> {
    let p = BlobClipParams {
        motion_fraction: 0.5,
        ..Default::default()
    };
    let clip = moving_blob_clip(&p, 17)?;
    let mut pre = Preprocessor::new(p.width, p.height, PreprocessParams::default())?;
    let detector = BlobDetector::default();

    let mut dets = LabelSet::default();
    for f in &clip.frames {
        let out = pre.process(f)?;
        for b in detector.detect(&out.channels) {
            dets.push(f.index, b);
        }
    }
    let score = evaluate_clip(&dets, &clip.labels, 0.5)?;
    println!("{} detections against {} labelled boxes", dets.total(), clip.labels.total());
    println!("precision {:.3}  recall {:.3}  F1 {:.3}", score.precision, score.recall, score.f1);
    Ok(())
}

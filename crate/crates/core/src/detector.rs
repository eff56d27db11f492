//! Detector abstraction with a connected-component baseline and a
//! detection-quality evaluator.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channels::ChannelTriple;
use crate::error::{Error, Result};
use crate::mask::BinaryMask;

pub const CLASS_SALMON: u8 = 0;
pub const CLASS_OTTER: u8 = 1;
pub const CLASS_SMOLT: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
    pub score: f64,
    pub class_id: u8,
}

impl DetBox {
    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }
}

/// Intersection over union of two axis-aligned boxes.
pub fn iou(a: &DetBox, b: &DetBox) -> f64 {
    let ix = (a.x + a.w).min(b.x + b.w).saturating_sub(a.x.max(b.x)) as u64;
    let iy = (a.y + a.h).min(b.y + b.h).saturating_sub(a.y.max(b.y)) as u64;
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Anything that turns a populated channel triple into boxes.
pub trait Detector {
    fn detect(&self, channels: &ChannelTriple) -> Vec<DetBox>;
}

/// Thresholds the fused foreground channel and reports its blobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobDetector {
    pub threshold: f64,
    pub min_area: u32,
}

impl Default for BlobDetector {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            min_area: 4,
        }
    }
}

impl Detector for BlobDetector {
    fn detect(&self, channels: &ChannelTriple) -> Vec<DetBox> {
        let plane = &channels.ch3;
        let mut mask = BinaryMask::new(plane.width, plane.height);
        for (bit, &v) in mask.bits.iter_mut().zip(&plane.values) {
            *bit = v >= self.threshold;
        }
        blob_detect(&mask, self.min_area.max(1))
    }
}

fn find(parent: &mut [u32], mut i: u32) -> u32 {
    while parent[i as usize] != i {
        let p = parent[i as usize];
        parent[i as usize] = parent[p as usize];
        i = p;
    }
    i
}

fn union(parent: &mut [u32], a: u32, b: u32) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi as usize] = lo;
    }
}

/// 8-connected components with at least `min_area` pixels, as tight boxes
/// scored by fill ratio. Output is sorted by `(y, x, h, w)`.
pub fn blob_detect(mask: &BinaryMask, min_area: u32) -> Vec<DetBox> {
    let (w, h) = (mask.width as usize, mask.height as usize);
    let mut parent: Vec<u32> = (0..(w * h) as u32).collect();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !mask.bits[i] {
                continue;
            }
            // west, north-west, north, north-east
            if x > 0 && mask.bits[i - 1] {
                union(&mut parent, i as u32, (i - 1) as u32);
            }
            if y > 0 {
                let up = i - w;
                if x > 0 && mask.bits[up - 1] {
                    union(&mut parent, i as u32, (up - 1) as u32);
                }
                if mask.bits[up] {
                    union(&mut parent, i as u32, up as u32);
                }
                if x + 1 < w && mask.bits[up + 1] {
                    union(&mut parent, i as u32, (up + 1) as u32);
                }
            }
        }
    }
    // root -> (min_x, min_y, max_x, max_y, count)
    let mut comps: BTreeMap<u32, (u32, u32, u32, u32, u64)> = BTreeMap::new();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !mask.bits[i] {
                continue;
            }
            let r = find(&mut parent, i as u32);
            let (x, y) = (x as u32, y as u32);
            let e = comps.entry(r).or_insert((x, y, x, y, 0));
            e.0 = e.0.min(x);
            e.1 = e.1.min(y);
            e.2 = e.2.max(x);
            e.3 = e.3.max(y);
            e.4 += 1;
        }
    }
    let mut out: Vec<DetBox> = comps
        .values()
        .filter(|c| c.4 >= min_area as u64)
        .map(|&(x0, y0, x1, y1, n)| {
            let b = DetBox {
                x: x0,
                y: y0,
                w: x1 - x0 + 1,
                h: y1 - y0 + 1,
                score: 0.0,
                class_id: CLASS_SALMON,
            };
            DetBox {
                score: n as f64 / b.area() as f64,
                ..b
            }
        })
        .collect();
    out.sort_by_key(|b| (b.y, b.x, b.h, b.w));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Score {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl F1Score {
    pub fn from_counts(tp: usize, n_dets: usize, n_labels: usize) -> Self {
        // Precision with no detections is reported as 1, recall with no
        // labels as 1.
        let precision = if n_dets == 0 { 1.0 } else { tp as f64 / n_dets as f64 };
        let recall = if n_labels == 0 { 1.0 } else { tp as f64 / n_labels as f64 };
        let f1 = if tp == 0 {
            if n_dets == 0 && n_labels == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self { precision, recall, f1 }
    }
}

/// Greedy one-to-one matching: detections in descending score order each
/// take the unmatched same-class label of highest IoU, if that IoU reaches
/// `iou_threshold`. Returns the number of matches.
pub fn greedy_matches(dets: &[DetBox], labels: &[DetBox], iou_threshold: f64) -> usize {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score).then(a.cmp(&b)));
    let mut taken = vec![false; labels.len()];
    let mut tp = 0;
    for di in order {
        let d = &dets[di];
        let mut best: Option<(usize, f64)> = None;
        for (li, l) in labels.iter().enumerate() {
            if taken[li] || l.class_id != d.class_id {
                continue;
            }
            let v = iou(d, l);
            if v >= iou_threshold && best.is_none_or(|(_, bv)| v > bv) {
                best = Some((li, v));
            }
        }
        if let Some((li, _)) = best {
            taken[li] = true;
            tp += 1;
        }
    }
    tp
}

pub fn evaluate_f1(dets: &[DetBox], labels: &[DetBox], iou_threshold: f64) -> Result<F1Score> {
    if !(iou_threshold > 0.0 && iou_threshold < 1.0) {
        return Err(Error::invalid("IoU threshold must lie in (0,1)"));
    }
    let tp = greedy_matches(dets, labels, iou_threshold);
    Ok(F1Score::from_counts(tp, dets.len(), labels.len()))
}

/// Per-frame boxes; used both for ground truth and for detector output.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelSet {
    pub frames: BTreeMap<u64, Vec<DetBox>>,
}

impl LabelSet {
    pub fn push(&mut self, frame: u64, b: DetBox) {
        self.frames.entry(frame).or_default().push(b);
    }

    pub fn boxes(&self, frame: u64) -> &[DetBox] {
        self.frames.get(&frame).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn total(&self) -> usize {
        self.frames.values().map(Vec::len).sum()
    }

    /// Fails if any frame index is `>= frame_count`.
    pub fn check_range(&self, frame_count: u64) -> Result<()> {
        match self.frames.keys().next_back() {
            Some(&last) if last >= frame_count => Err(Error::invalid(format!(
                "label frame {last} outside clip of {frame_count} frames"
            ))),
            _ => Ok(()),
        }
    }

    /// `frame_idx,x,y,w,h,class_id[,score]`; scores default to 1.
    pub fn from_csv_reader<R: Read>(reader: R, name: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::MalformedRow {
                file: name.into(),
                row: 0,
                reason: e.to_string(),
            })?
            .clone();
        let cols: Vec<&str> = headers.iter().collect();
        let base = ["frame_idx", "x", "y", "w", "h", "class_id"];
        let with_score = cols.len() == 7 && cols[6] == "score";
        if cols[..cols.len().min(6)] != base[..] || !(cols.len() == 6 || with_score) {
            return Err(Error::MalformedRow {
                file: name.into(),
                row: 0,
                reason: "expected header `frame_idx,x,y,w,h,class_id[,score]`".into(),
            });
        }
        let mut set = LabelSet::default();
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 1;
            let bad = |reason: String| Error::MalformedRow {
                file: name.into(),
                row,
                reason,
            };
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let int = |j: usize| -> Result<u64> { rec[j].parse::<u64>().map_err(|e| bad(format!("{}: {e}", base[j]))) };
            let frame = int(0)?;
            let (w, h) = (int(3)? as u32, int(4)? as u32);
            if w == 0 || h == 0 {
                return Err(bad("box width and height must be >= 1".into()));
            }
            let class_id = u8::try_from(int(5)?).map_err(|e| bad(format!("class_id: {e}")))?;
            let score = if with_score {
                rec[6].parse::<f64>().map_err(|e| bad(format!("score: {e}")))?
            } else {
                1.0
            };
            set.push(
                frame,
                DetBox {
                    x: int(1)? as u32,
                    y: int(2)? as u32,
                    w,
                    h,
                    score,
                    class_id,
                },
            );
        }
        Ok(set)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(f, &path.display().to_string())
    }

    pub fn to_csv(&self, with_score: bool) -> String {
        let mut out = String::from("frame_idx,x,y,w,h,class_id");
        if with_score {
            out.push_str(",score");
        }
        out.push('\n');
        for (f, boxes) in &self.frames {
            for b in boxes {
                out.push_str(&format!("{f},{},{},{},{},{}", b.x, b.y, b.w, b.h, b.class_id));
                if with_score {
                    out.push_str(&format!(",{}", b.score));
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Pools matches over every frame of a clip.
pub fn evaluate_clip(dets: &LabelSet, labels: &LabelSet, iou_threshold: f64) -> Result<F1Score> {
    if !(iou_threshold > 0.0 && iou_threshold < 1.0) {
        return Err(Error::invalid("IoU threshold must lie in (0,1)"));
    }
    let mut tp = 0;
    let frames: std::collections::BTreeSet<u64> = dets.frames.keys().chain(labels.frames.keys()).copied().collect();
    for f in frames {
        tp += greedy_matches(dets.boxes(f), labels.boxes(f), iou_threshold);
    }
    Ok(F1Score::from_counts(tp, dets.total(), labels.total()))
}

//! Three-channel population and the edge-based motion gate.
//!
//! The triple is `(original, GF(I=original, G=foreground), GF(I=foreground,
//! G=original))`. Motion is declared when Canny edges on `max(ch2, ch3)`
//! cover at least `density_threshold` of the frame.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame_io::SonarFrame;
use crate::guided::{guided_filter, GuidedFilterParams, Plane};
use crate::mask::BinaryMask;
use crate::mog::ForegroundMask;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTriple {
    pub ch1: Plane,
    pub ch2: Plane,
    pub ch3: Plane,
}

impl ChannelTriple {
    pub fn width(&self) -> u32 {
        self.ch1.width
    }

    pub fn height(&self) -> u32 {
        self.ch1.height
    }

    /// The plane the motion gate inspects.
    pub fn fused(&self) -> Plane {
        self.ch2.max(&self.ch3)
    }
}

pub fn populate_channels(
    frame: &SonarFrame,
    mask: &ForegroundMask,
    gf: &GuidedFilterParams,
) -> Result<ChannelTriple> {
    if frame.width != mask.width || frame.height != mask.height {
        return Err(Error::DimensionMismatch {
            expected_width: frame.width,
            expected_height: frame.height,
            width: mask.width,
            height: mask.height,
            context: Some("foreground mask against frame".into()),
        });
    }
    let original = Plane::from_frame(frame);
    let fg = Plane::from_mask(mask);
    let ch2 = guided_filter(&original, &fg, gf)?;
    let ch3 = guided_filter(&fg, &original, gf)?;
    Ok(ChannelTriple {
        ch1: original,
        ch2,
        ch3,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CannyParams {
    pub sigma: f64,
    /// Hysteresis thresholds on the normalized gradient magnitude (a unit
    /// step in an unsmoothed plane has magnitude 1).
    pub low: f64,
    pub high: f64,
}

impl Default for CannyParams {
    fn default() -> Self {
        Self {
            sigma: 1.4,
            low: 0.04,
            high: 0.10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionParams {
    pub canny: CannyParams,
    pub density_threshold: f64,
}

impl Default for MotionParams {
    fn default() -> Self {
        Self {
            canny: CannyParams::default(),
            density_threshold: 0.003,
        }
    }
}

impl MotionParams {
    pub fn validate(&self) -> Result<()> {
        let c = &self.canny;
        if !(c.sigma > 0.0) {
            return Err(Error::invalid("canny sigma must be positive"));
        }
        if !(0.0 <= c.low && c.low <= c.high) {
            return Err(Error::invalid("canny thresholds must satisfy 0 <= low <= high"));
        }
        if !(0.0..=1.0).contains(&self.density_threshold) {
            return Err(Error::invalid("density threshold must be in [0,1]"));
        }
        Ok(())
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable Gaussian blur with replicated borders.
pub fn gaussian_blur(p: &Plane, sigma: f64) -> Plane {
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as i64;
    let (w, h) = (p.width as i64, p.height as i64);
    let mut tmp = vec![0.0; p.values.len()];
    for y in 0..h {
        let row = &p.values[(y * w) as usize..((y + 1) * w) as usize];
        for x in 0..w {
            let mut acc = 0.0;
            for (t, kv) in k.iter().enumerate() {
                let xx = (x + t as i64 - r).clamp(0, w - 1);
                acc += kv * row[xx as usize];
            }
            tmp[(y * w + x) as usize] = acc;
        }
    }
    let mut out = vec![0.0; p.values.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (t, kv) in k.iter().enumerate() {
                let yy = (y + t as i64 - r).clamp(0, h - 1);
                acc += kv * tmp[(yy * w + x) as usize];
            }
            out[(y * w + x) as usize] = acc;
        }
    }
    Plane {
        width: p.width,
        height: p.height,
        values: out,
    }
}

/// Canny edge map: Gaussian smoothing, Sobel gradients, non-maximum
/// suppression, then hysteresis over 8-connected weak edges.
pub fn canny(p: &Plane, params: &CannyParams) -> BinaryMask {
    let (w, h) = (p.width as usize, p.height as usize);
    let mut edges = BinaryMask::new(p.width, p.height);
    if w < 3 || h < 3 {
        return edges;
    }
    let s = gaussian_blur(p, params.sigma).values;
    let at = |x: usize, y: usize| s[y * w + x];

    let mut mag = vec![0.0; w * h];
    // 0: horizontal gradient, 1: 45deg, 2: vertical, 3: 135deg
    let mut dir = vec![0u8; w * h];
    let tan22 = std::f64::consts::FRAC_PI_8.tan();
    for y in 0..h {
        let (ym, yp) = (y.saturating_sub(1), (y + 1).min(h - 1));
        for x in 0..w {
            let (xm, xp) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let gx = (at(xp, ym) + 2.0 * at(xp, y) + at(xp, yp))
                - (at(xm, ym) + 2.0 * at(xm, y) + at(xm, yp));
            let gy = (at(xm, yp) + 2.0 * at(x, yp) + at(xp, yp))
                - (at(xm, ym) + 2.0 * at(x, ym) + at(xp, ym));
            let i = y * w + x;
            mag[i] = gx.hypot(gy) / 4.0;
            let (ax, ay) = (gx.abs(), gy.abs());
            dir[i] = if ay <= ax * tan22 {
                0
            } else if ax <= ay * tan22 {
                2
            } else if (gx > 0.0) == (gy > 0.0) {
                1
            } else {
                3
            };
        }
    }

    let mut nms = vec![0.0; w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let i = y * w + x;
            let m = mag[i];
            if m < params.low {
                continue;
            }
            let (a, b) = match dir[i] {
                0 => (mag[i - 1], mag[i + 1]),
                2 => (mag[i - w], mag[i + w]),
                1 => (mag[i - w - 1], mag[i + w + 1]),
                _ => (mag[i - w + 1], mag[i + w - 1]),
            };
            if m >= a && m > b {
                nms[i] = m;
            }
        }
    }

    let mut queue = VecDeque::new();
    for (i, &m) in nms.iter().enumerate() {
        if m >= params.high && m > 0.0 {
            edges.bits[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % w) as i64, (i / w) as i64);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if !edges.bits[j] && nms[j] >= params.low && nms[j] > 0.0 {
                    edges.bits[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    edges
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionResult {
    pub is_motion: bool,
    pub edge_density: f64,
    pub edge_mask: BinaryMask,
}

pub fn detect_motion(triple: &ChannelTriple, params: &MotionParams) -> MotionResult {
    let edge_mask = canny(&triple.fused(), &params.canny);
    let total = edge_mask.bits.len().max(1);
    let edge_density = edge_mask.count() as f64 / total as f64;
    MotionResult {
        is_motion: edge_density >= params.density_threshold,
        edge_density,
        edge_mask,
    }
}

/// Running count of gated frames. An empty ledger reports a saving ratio
/// of 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SavingLedger {
    pub frames_total: u64,
    pub frames_motion: u64,
    pub saving_ratio: f64,
}

impl Default for SavingLedger {
    fn default() -> Self {
        Self {
            frames_total: 0,
            frames_motion: 0,
            saving_ratio: 1.0,
        }
    }
}

impl SavingLedger {
    pub fn record(&mut self, is_motion: bool) {
        self.frames_total += 1;
        if is_motion {
            self.frames_motion += 1;
        }
        self.saving_ratio = 1.0 - self.frames_motion as f64 / self.frames_total as f64;
    }
}

pub fn update_ledger(mut ledger: SavingLedger, motion: &MotionResult) -> SavingLedger {
    ledger.record(motion.is_motion);
    ledger
}

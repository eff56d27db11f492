//! Guided filter over floating-point planes.
//!
//! For every window `w_j` of radius `r` the input `I` is regressed onto the
//! guide `G`:
//!
//! ```text
//! a_j = (mean_j(G I) - mean_j(G) mean_j(I)) / (var_j(G) + eps)
//! b_j = mean_j(I) - a_j mean_j(G)
//! ```
//!
//! and each output pixel averages the coefficients of all windows covering
//! it: `Q_i = mean(a) G_i + mean(b)`. Windows are truncated at the frame
//! border; no pixel values are invented.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame_io::SonarFrame;
use crate::mask::BinaryMask;

/// Row-major floating-point raster, nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: u32,
    pub height: u32,
    pub values: Vec<f64>,
}

impl Plane {
    pub fn new(width: u32, height: u32, values: Vec<f64>) -> Result<Self> {
        if values.len() != width as usize * height as usize {
            return Err(Error::invalid(format!(
                "{} values for a {width}x{height} plane",
                values.len()
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: u32, height: u32, v: f64) -> Self {
        Self {
            width,
            height,
            values: vec![v; width as usize * height as usize],
        }
    }

    /// Intensities divided by 255.
    pub fn from_frame(frame: &SonarFrame) -> Self {
        Self {
            width: frame.width,
            height: frame.height,
            values: frame.intensities.iter().map(|&v| v as f64 / 255.0).collect(),
        }
    }

    /// Set pixels become 1.0, others 0.0.
    pub fn from_mask(mask: &BinaryMask) -> Self {
        Self {
            width: mask.width,
            height: mask.height,
            values: mask.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    /// Clamps to `[0, 1]` and scales to 8 bits.
    pub fn to_u8(&self) -> Vec<u8> {
        self.values
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.values[y as usize * self.width as usize + x as usize]
    }

    pub fn same_dims(&self, other: &Plane) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Pixelwise maximum of two planes of equal size.
    pub fn max(&self, other: &Plane) -> Plane {
        assert!(self.same_dims(other));
        Plane {
            width: self.width,
            height: self.height,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a.max(*b))
                .collect(),
        }
    }

    pub fn flip_horizontal(&self) -> Plane {
        let w = self.width as usize;
        let mut values = Vec::with_capacity(self.values.len());
        for row in self.values.chunks_exact(w) {
            values.extend(row.iter().rev());
        }
        Plane {
            width: self.width,
            height: self.height,
            values,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GuidedFilterParams {
    /// Window half-width; windows are `(2r+1)^2`.
    pub radius: u32,
    pub epsilon: f64,
}

impl Default for GuidedFilterParams {
    fn default() -> Self {
        Self {
            radius: 4,
            epsilon: 0.01,
        }
    }
}

impl GuidedFilterParams {
    pub fn validate(&self) -> Result<()> {
        if self.radius < 1 {
            return Err(Error::invalid("guided filter radius must be at least 1"));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid("guided filter epsilon must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Mean over the border-truncated `(2r+1)^2` window around each pixel.
pub fn box_mean(values: &[f64], width: usize, height: usize, radius: usize) -> Vec<f64> {
    let mut horiz = vec![0.0; values.len()];
    let mut prefix = vec![0.0; width.max(height) + 1];
    for (row, out) in values.chunks_exact(width).zip(horiz.chunks_exact_mut(width)) {
        for (i, &v) in row.iter().enumerate() {
            prefix[i + 1] = prefix[i] + v;
        }
        for (x, o) in out.iter_mut().enumerate() {
            let lo = x.saturating_sub(radius);
            let hi = (x + radius + 1).min(width);
            *o = prefix[hi] - prefix[lo];
        }
    }
    let mut out = vec![0.0; values.len()];
    for x in 0..width {
        for y in 0..height {
            prefix[y + 1] = prefix[y] + horiz[y * width + x];
        }
        let cols = ((x + radius + 1).min(width) - x.saturating_sub(radius)) as f64;
        for y in 0..height {
            let lo = y.saturating_sub(radius);
            let hi = (y + radius + 1).min(height);
            out[y * width + x] = (prefix[hi] - prefix[lo]) / (cols * (hi - lo) as f64);
        }
    }
    out
}

/// Box mean of a whole plane.
pub fn box_mean_plane(p: &Plane, radius: u32) -> Plane {
    Plane {
        width: p.width,
        height: p.height,
        values: box_mean(&p.values, p.width as usize, p.height as usize, radius as usize),
    }
}

/// Filters `input` under `guide`.
pub fn guided_filter(input: &Plane, guide: &Plane, params: &GuidedFilterParams) -> Result<Plane> {
    params.validate()?;
    if !input.same_dims(guide) {
        return Err(Error::DimensionMismatch {
            expected_width: input.width,
            expected_height: input.height,
            width: guide.width,
            height: guide.height,
            context: Some("guide against input".into()),
        });
    }
    let window = 2 * params.radius + 1;
    if input.width < window || input.height < window {
        return Err(Error::WindowTooLarge {
            window,
            width: input.width,
            height: input.height,
        });
    }
    let (w, h, r) = (input.width as usize, input.height as usize, params.radius as usize);
    let eps = params.epsilon;

    let gi: Vec<f64> = guide.values.iter().zip(&input.values).map(|(g, i)| g * i).collect();
    let gg: Vec<f64> = guide.values.iter().map(|g| g * g).collect();
    let mean_g = box_mean(&guide.values, w, h, r);
    let mean_i = box_mean(&input.values, w, h, r);
    let corr_gi = box_mean(&gi, w, h, r);
    let corr_gg = box_mean(&gg, w, h, r);

    let n = w * h;
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    for j in 0..n {
        let var = (corr_gg[j] - mean_g[j] * mean_g[j]).max(0.0);
        let cov = corr_gi[j] - mean_g[j] * mean_i[j];
        let denom = var + eps;
        a[j] = if denom > 0.0 { cov / denom } else { 0.0 };
        b[j] = mean_i[j] - a[j] * mean_g[j];
    }
    let mean_a = box_mean(&a, w, h, r);
    let mean_b = box_mean(&b, w, h, r);
    let values = (0..n).map(|i| mean_a[i] * guide.values[i] + mean_b[i]).collect();
    Ok(Plane {
        width: input.width,
        height: input.height,
        values,
    })
}

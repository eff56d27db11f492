//! Per-pixel mixture-of-Gaussians background model.
//!
//! Each pixel keeps `K` weighted scalar Gaussians over its intensity. On every
//! frame a pixel is first classified against the current state, then the
//! state is advanced:
//!
//! * matched component `k` (the matching component with the highest
//!   `weight / sigma`): `mean' = (1-a) mean + a x`,
//!   `var' = (1-a) var + a (x - mean')^2`;
//! * every component: `weight' = (1-a) weight + a M_k` with `M_k = 1` only
//!   for the matched component;
//! * no match: after the weight decay the lowest-weight component is
//!   replaced by `(init_weight, x, init_variance)`;
//! * weights are renormalized to sum to one and variances floored.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame_io::SonarFrame;
use crate::mask::BinaryMask;

pub type ForegroundMask = BinaryMask;

/// Upper bound on `K`; classification sorts components on the stack.
pub const MAX_COMPONENTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MogParams {
    pub k: usize,
    pub alpha: f64,
    pub match_sigma: f64,
    pub background_ratio: f64,
    pub init_variance: f64,
    pub init_weight: f64,
    pub variance_floor: f64,
}

impl Default for MogParams {
    fn default() -> Self {
        Self {
            k: 3,
            alpha: 0.01,
            match_sigma: 2.5,
            background_ratio: 0.9,
            init_variance: 15.0 * 15.0,
            init_weight: 0.05,
            variance_floor: 4.0,
        }
    }
}

impl MogParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > MAX_COMPONENTS {
            return Err(Error::invalid(format!(
                "mog k must be in 1..={MAX_COMPONENTS}, got {}",
                self.k
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!("mog alpha must be in [0,1], got {}", self.alpha)));
        }
        if !(self.match_sigma > 0.0) {
            return Err(Error::invalid("mog match_sigma must be positive"));
        }
        if !(self.background_ratio > 0.0 && self.background_ratio <= 1.0) {
            return Err(Error::invalid("mog background_ratio must be in (0,1]"));
        }
        if !(self.variance_floor > 0.0) {
            return Err(Error::invalid("mog variance_floor must be positive"));
        }
        if !(self.init_variance >= self.variance_floor) {
            return Err(Error::invalid("mog init_variance must be at least variance_floor"));
        }
        if !(self.init_weight > 0.0 && self.init_weight <= 1.0) {
            return Err(Error::invalid("mog init_weight must be in (0,1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MogComponent {
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

#[inline]
fn matches(c: &MogComponent, x: f64, match_sigma: f64) -> bool {
    (x - c.mean).abs() <= match_sigma * c.variance.sqrt()
}

/// Index of the component `x` is attributed to, if any.
pub fn matched_component(comps: &[MogComponent], x: f64, match_sigma: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in comps.iter().enumerate() {
        if matches(c, x, match_sigma) {
            let rank = c.weight / c.variance.sqrt();
            if best.is_none_or(|(_, r)| rank > r) {
                best = Some((i, rank));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Advances one pixel's mixture by observation `x`. Returns whether an
/// existing component matched.
pub fn update_components(comps: &mut [MogComponent], x: f64, params: &MogParams) -> bool {
    let alpha = params.alpha;
    let matched = matched_component(comps, x, params.match_sigma);

    for (i, c) in comps.iter_mut().enumerate() {
        let m = if Some(i) == matched { 1.0 } else { 0.0 };
        c.weight = (1.0 - alpha) * c.weight + alpha * m;
    }

    match matched {
        Some(k) => {
            let c = &mut comps[k];
            c.mean = (1.0 - alpha) * c.mean + alpha * x;
            let d = x - c.mean;
            c.variance = ((1.0 - alpha) * c.variance + alpha * d * d).max(params.variance_floor);
        }
        None => {
            let mut weakest = 0;
            for (i, c) in comps.iter().enumerate() {
                if c.weight < comps[weakest].weight {
                    weakest = i;
                }
            }
            comps[weakest] = MogComponent {
                weight: params.init_weight,
                mean: x,
                variance: params.init_variance,
            };
        }
    }

    let total: f64 = comps.iter().map(|c| c.weight).sum();
    if total > 0.0 {
        for c in comps.iter_mut() {
            c.weight /= total;
        }
    }
    matched.is_some()
}

/// True when `x` is not explained by the background components.
///
/// Components are ranked by `weight / sigma` (descending, stable); the
/// shortest prefix whose cumulative weight reaches `background_ratio` forms
/// the background.
pub fn classify_components(
    comps: &[MogComponent],
    x: f64,
    background_ratio: f64,
    match_sigma: f64,
) -> bool {
    let k = comps.len();
    debug_assert!(k <= MAX_COMPONENTS);
    let mut order = [0usize; MAX_COMPONENTS];
    let mut rank = [0f64; MAX_COMPONENTS];
    for (i, c) in comps.iter().enumerate() {
        let r = c.weight / c.variance.sqrt();
        // insertion sort, descending, ties keep index order
        let mut j = i;
        while j > 0 && rank[j - 1] < r {
            rank[j] = rank[j - 1];
            order[j] = order[j - 1];
            j -= 1;
        }
        rank[j] = r;
        order[j] = i;
    }
    let mut cumulative = 0.0;
    for &i in &order[..k] {
        let c = &comps[i];
        if matches(c, x, match_sigma) {
            return false;
        }
        cumulative += c.weight;
        if cumulative >= background_ratio {
            break;
        }
    }
    true
}

/// One pixel's mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MogPixelModel {
    pub components: Vec<MogComponent>,
}

impl MogPixelModel {
    /// A model whose first component sits on `x` with full weight.
    pub fn seeded(x: f64, params: &MogParams) -> Self {
        let mut components = vec![
            MogComponent {
                weight: 0.0,
                mean: 0.0,
                variance: params.init_variance,
            };
            params.k
        ];
        components[0] = MogComponent {
            weight: 1.0,
            mean: x,
            variance: params.init_variance,
        };
        Self { components }
    }

    pub fn update(&mut self, x: f64, params: &MogParams) -> bool {
        update_components(&mut self.components, x, params)
    }

    pub fn is_foreground(&self, x: f64, background_ratio: f64, match_sigma: f64) -> bool {
        classify_components(&self.components, x, background_ratio, match_sigma)
    }

    /// Mixture density `p(x)`.
    pub fn density(&self, x: f64) -> f64 {
        self.components
            .iter()
            .map(|c| {
                let d = x - c.mean;
                c.weight * (-0.5 * d * d / c.variance).exp()
                    / (2.0 * std::f64::consts::PI * c.variance).sqrt()
            })
            .sum()
    }

    pub fn weight_sum(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }
}

/// Background model for a whole frame. The first frame applied seeds every
/// pixel and is reported as all background.
#[derive(Debug, Clone)]
pub struct MogField {
    width: u32,
    height: u32,
    params: MogParams,
    components: Vec<MogComponent>,
    seeded: bool,
}

impl MogField {
    pub fn new(width: u32, height: u32, params: MogParams) -> Result<Self> {
        params.validate()?;
        let n = width as usize * height as usize;
        Ok(Self {
            width,
            height,
            params,
            components: vec![
                MogComponent {
                    weight: 0.0,
                    mean: 0.0,
                    variance: params.init_variance,
                };
                n * params.k
            ],
            seeded: false,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn params(&self) -> &MogParams {
        &self.params
    }

    pub fn is_seeded(&self) -> bool {
        self.seeded
    }

    pub fn pixel(&self, x: u32, y: u32) -> &[MogComponent] {
        let k = self.params.k;
        let i = (y as usize * self.width as usize + x as usize) * k;
        &self.components[i..i + k]
    }

    pub fn pixel_mut(&mut self, x: u32, y: u32) -> &mut [MogComponent] {
        let k = self.params.k;
        let i = (y as usize * self.width as usize + x as usize) * k;
        &mut self.components[i..i + k]
    }

    pub fn pixel_model(&self, x: u32, y: u32) -> MogPixelModel {
        MogPixelModel {
            components: self.pixel(x, y).to_vec(),
        }
    }

    /// Classifies every pixel of `frame` against the pre-update state, then
    /// updates the state.
    pub fn apply(&mut self, frame: &SonarFrame) -> Result<ForegroundMask> {
        if frame.width != self.width || frame.height != self.height {
            return Err(Error::DimensionMismatch {
                expected_width: self.width,
                expected_height: self.height,
                width: frame.width,
                height: frame.height,
                context: Some(format!("frame {} against background model", frame.index)),
            });
        }
        let mut mask = ForegroundMask::new(self.width, self.height);
        let k = self.params.k;
        let p = self.params;
        if !self.seeded {
            for (px, &v) in self.components.chunks_exact_mut(k).zip(&frame.intensities) {
                px.copy_from_slice(&MogPixelModel::seeded(v as f64, &p).components);
            }
            self.seeded = true;
            return Ok(mask);
        }
        for ((px, &v), bit) in self
            .components
            .chunks_exact_mut(k)
            .zip(&frame.intensities)
            .zip(mask.bits.iter_mut())
        {
            let x = v as f64;
            *bit = classify_components(px, x, p.background_ratio, p.match_sigma);
            update_components(px, x, &p);
        }
        Ok(mask)
    }

    /// Intensity of the heaviest component at each pixel.
    pub fn background_estimate(&self) -> Vec<u8> {
        self.components
            .chunks_exact(self.params.k)
            .map(|px| {
                let c = px
                    .iter()
                    .fold(&px[0], |best, c| if c.weight > best.weight { c } else { best });
                c.mean.round().clamp(0.0, 255.0) as u8
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(parts: &[(f64, f64, f64)]) -> MogPixelModel {
        MogPixelModel {
            components: parts
                .iter()
                .map(|&(weight, mean, variance)| MogComponent {
                    weight,
                    mean,
                    variance,
                })
                .collect(),
        }
    }

    #[test]
    fn alpha_zero_is_identity_on_match() {
        let p = MogParams {
            alpha: 0.0,
            ..Default::default()
        };
        let mut m = model(&[(0.5, 10.0, 9.0), (0.25, 100.0, 16.0), (0.25, 200.0, 25.0)]);
        let before = m.clone();
        assert!(m.update(12.0, &p));
        assert_eq!(m, before);
    }

    #[test]
    fn alpha_one_snaps_matched_component() {
        let p = MogParams {
            alpha: 1.0,
            ..Default::default()
        };
        let mut m = model(&[(0.5, 10.0, 9.0), (0.5, 100.0, 16.0)]);
        assert!(m.update(102.0, &p));
        assert_eq!(m.components[1].mean, 102.0);
        assert_eq!(m.components[1].weight, 1.0);
        assert_eq!(m.components[0].weight, 0.0);
        assert_eq!(m.components[1].variance, p.variance_floor);
    }

    #[test]
    fn unmatched_replaces_weakest() {
        let p = MogParams::default();
        let mut m = model(&[(0.7, 10.0, 4.0), (0.2, 50.0, 4.0), (0.1, 90.0, 4.0)]);
        assert!(!m.update(200.0, &p));
        assert_eq!(m.components[2].mean, 200.0);
        assert_eq!(m.components[2].variance, p.init_variance);
        assert!((m.weight_sum() - 1.0).abs() < 1e-12);
        let expect = p.init_weight / (0.99 * 0.9 + p.init_weight);
        assert!((m.components[2].weight - expect).abs() < 1e-12);
    }

    #[test]
    fn classify_single_component() {
        let m = model(&[(1.0, 10.0, 1.0)]);
        assert!(!m.is_foreground(10.0, 0.9, 2.5));
        assert!(m.is_foreground(200.0, 0.9, 2.5));
    }

    #[test]
    fn classify_ignores_non_background_components() {
        // the 200-component holds 5% weight and ranks second; 0.95 >= 0.9 already
        let m = model(&[(0.95, 10.0, 4.0), (0.05, 200.0, 4.0)]);
        assert!(m.is_foreground(200.0, 0.9, 2.5));
        assert!(!m.is_foreground(200.0, 0.99, 2.5));
    }

    #[test]
    fn apply_rejects_wrong_dims() {
        let mut f = MogField::new(4, 4, MogParams::default()).unwrap();
        let frame = SonarFrame::filled(5, 4, 0, 0, 0.0);
        assert!(matches!(f.apply(&frame), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn constant_clip_stays_background() {
        let mut f = MogField::new(16, 8, MogParams::default()).unwrap();
        let frame = SonarFrame::filled(16, 8, 37, 0, 0.0);
        for _ in 0..50 {
            f.apply(&frame).unwrap();
        }
        assert!(f.apply(&frame).unwrap().is_empty());
    }

    #[test]
    fn bad_params_rejected() {
        for p in [
            MogParams { k: 0, ..Default::default() },
            MogParams { alpha: 1.5, ..Default::default() },
            MogParams { match_sigma: 0.0, ..Default::default() },
            MogParams { background_ratio: 0.0, ..Default::default() },
            MogParams { init_variance: 1.0, ..Default::default() },
        ] {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }
}

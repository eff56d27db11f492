//! Near-square strata, the per-stratum configuration space, and the
//! data-rate and power models evaluated over it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Aspect ratios (h/w) outside `[1/MAX_ASPECT, MAX_ASPECT]` are not near-square.
pub const MAX_ASPECT: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn aspect(&self) -> f64 {
        self.h as f64 / self.w as f64
    }

    pub fn intersects(&self, o: &Rect) -> bool {
        self.x < o.x + o.w && o.x < self.x + self.w && self.y < o.y + o.h && o.y < self.y + self.h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumLayout {
    pub frame_width: u32,
    pub frame_height: u32,
    pub rects: Vec<Rect>,
}

impl StratumLayout {
    pub fn len(&self) -> usize {
        self.rects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rects.is_empty()
    }
}

/// Splits `len` into `n` parts differing by at most one, larger parts first.
fn split_len(len: u32, n: u32) -> Vec<u32> {
    let base = len / n;
    let extra = len % n;
    (0..n).map(|i| base + u32::from(i < extra)).collect()
}

fn worst_log_aspect(long_parts: &[u32], short_parts: &[u32]) -> f64 {
    let mut worst: f64 = 0.0;
    for &l in long_parts {
        for &s in short_parts {
            worst = worst.max((l as f64 / s as f64).ln().abs());
        }
    }
    worst
}

/// Splits a frame into near-square strata.
///
/// The long axis is cut into `N` equal bands, `N` being whichever of
/// `floor(long/short)` and `ceil(long/short)` yields the squarer worst band.
/// When integer band sizes leave every band count outside the aspect bound
/// (which happens only for ratios just above sqrt(2)), the short axis is
/// split as well and the frame becomes a grid.
pub fn split_strata(width: u32, height: u32) -> StratumLayout {
    assert!(width >= 1 && height >= 1, "frame must be at least 1x1");
    let tall = height >= width;
    let (long, short) = if tall { (height, width) } else { (width, height) };
    let bound = MAX_ASPECT.ln() + 1e-12;

    let ratio = long as f64 / short as f64;
    let lo = (ratio.floor() as u32).max(1);
    let hi = (ratio.ceil() as u32).max(1).min(long);
    let mut best: Option<(f64, u32, u32)> = None;
    for n in [lo, hi] {
        let worst = worst_log_aspect(&split_len(long, n), &[short]);
        if best.is_none_or(|(w, _, _)| worst < w) {
            best = Some((worst, n, 1));
        }
    }
    let (mut worst, mut rows, mut cols) = best.unwrap();
    if worst > bound {
        'grid: for c in 2..=short {
            let r_ratio = long as f64 * c as f64 / short as f64;
            for r in [r_ratio.floor() as u32, r_ratio.ceil() as u32] {
                if r == 0 || r > long {
                    continue;
                }
                let w = worst_log_aspect(&split_len(long, r), &split_len(short, c));
                if w <= bound {
                    (worst, rows, cols) = (w, r, c);
                    break 'grid;
                }
            }
        }
    }
    let _ = worst;

    let long_parts = split_len(long, rows);
    let short_parts = split_len(short, cols);
    let mut rects = Vec::with_capacity((rows * cols) as usize);
    let mut lpos = 0;
    for &l in &long_parts {
        let mut spos = 0;
        for &s in &short_parts {
            rects.push(if tall {
                Rect { x: spos, y: lpos, w: s, h: l }
            } else {
                Rect { x: lpos, y: spos, w: l, h: s }
            });
            spos += s;
        }
        lpos += l;
    }
    StratumLayout {
        frame_width: width,
        frame_height: height,
        rects,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    /// Inference on the on-site device; nothing is uplinked.
    Edge,
    /// Strata are streamed over the satellite link for cloud inference.
    Cloud,
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Route::Edge => "edge",
            Route::Cloud => "cloud",
        })
    }
}

impl FromStr for Route {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edge" => Ok(Route::Edge),
            "cloud" => Ok(Route::Cloud),
            _ => Err(Error::invalid(format!("unknown route `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StratumConfig {
    pub downscale: u32,
    pub fps: u32,
    pub filter_on: bool,
}

impl StratumConfig {
    /// `d{downscale}/f{fps}/{on|off}`
    pub fn key(&self) -> String {
        format!(
            "d{}/f{}/{}",
            self.downscale,
            self.fps,
            if self.filter_on { "on" } else { "off" }
        )
    }

    pub fn channels(&self) -> u32 {
        if self.filter_on {
            3
        } else {
            1
        }
    }
}

impl FromStr for StratumConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("malformed stratum key `{s}`"));
        let mut parts = s.split('/');
        let d = parts.next().and_then(|p| p.strip_prefix('d')).ok_or_else(bad)?;
        let f = parts.next().and_then(|p| p.strip_prefix('f')).ok_or_else(bad)?;
        let filter_on = match parts.next() {
            Some("on") => true,
            Some("off") => false,
            _ => return Err(bad()),
        };
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(Self {
            downscale: d.parse().map_err(|_| bad())?,
            fps: f.parse().map_err(|_| bad())?,
            filter_on,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Configuration {
    pub route: Route,
    pub per_stratum: Vec<StratumConfig>,
}

impl Configuration {
    pub fn uniform(route: Route, n: usize, s: StratumConfig) -> Self {
        Self {
            route,
            per_stratum: vec![s; n],
        }
    }

    /// `{route}:{stratum key}+{stratum key}...`
    pub fn key(&self) -> String {
        let strata: Vec<String> = self.per_stratum.iter().map(StratumConfig::key).collect();
        format!("{}:{}", self.route, strata.join("+"))
    }
}

impl FromStr for Configuration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (route, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("malformed configuration key `{s}`")))?;
        Ok(Self {
            route: route.parse()?,
            per_stratum: rest.split('+').map(str::parse).collect::<Result<_>>()?,
        })
    }
}

/// Discrete choices available to every stratum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParamSets {
    pub downscales: Vec<u32>,
    pub fps: Vec<u32>,
    pub filters: Vec<bool>,
    pub routes: Vec<Route>,
}

impl Default for ParamSets {
    fn default() -> Self {
        Self {
            downscales: vec![1, 2, 4],
            fps: vec![1, 5, 10, 15],
            filters: vec![false, true],
            routes: vec![Route::Edge, Route::Cloud],
        }
    }
}

impl ParamSets {
    pub fn validate(&self) -> Result<()> {
        if self.downscales.is_empty() || self.fps.is_empty() || self.filters.is_empty() || self.routes.is_empty() {
            return Err(Error::invalid("every parameter set needs at least one member"));
        }
        if self.downscales.contains(&0) || self.fps.contains(&0) {
            return Err(Error::invalid("downscale factors and frame rates must be positive"));
        }
        Ok(())
    }

    /// All per-stratum choices, in a fixed order.
    pub fn stratum_choices(&self) -> Vec<StratumConfig> {
        let mut out = Vec::new();
        for &downscale in &self.downscales {
            for &fps in &self.fps {
                for &filter_on in &self.filters {
                    out.push(StratumConfig {
                        downscale,
                        fps,
                        filter_on,
                    });
                }
            }
        }
        out
    }

    /// `|S|` for a layout with `n` strata.
    pub fn space_size(&self, n: usize) -> u128 {
        let per = (self.downscales.len() * self.fps.len() * self.filters.len()) as u128;
        let mut size = self.routes.len() as u128;
        for _ in 0..n {
            size = size.saturating_mul(per);
        }
        size
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BitrateParams {
    pub bits_per_pixel: f64,
    pub codec_ratio: f64,
}

impl Default for BitrateParams {
    fn default() -> Self {
        Self {
            bits_per_pixel: 8.0,
            codec_ratio: 0.2,
        }
    }
}

impl BitrateParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.bits_per_pixel > 0.0) {
            return Err(Error::invalid("bits per pixel must be positive"));
        }
        if !(self.codec_ratio > 0.0 && self.codec_ratio <= 1.0) {
            return Err(Error::invalid("codec ratio must be in (0,1]"));
        }
        Ok(())
    }
}

/// Stream data rate in bits/s: the sum over strata of
/// `(w h / d^2) fps bpp codec_ratio channels`.
pub fn estimate_bitrate(layout: &StratumLayout, config: &Configuration, rate: &BitrateParams) -> f64 {
    debug_assert_eq!(layout.rects.len(), config.per_stratum.len());
    layout
        .rects
        .iter()
        .zip(&config.per_stratum)
        .map(|(r, s)| {
            let d = s.downscale as f64;
            r.area() as f64 / (d * d)
                * s.fps as f64
                * rate.bits_per_pixel
                * rate.codec_ratio
                * s.channels() as f64
        })
        .sum()
}

/// A measured transmission power at a known uplink rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TxAnchor {
    pub bitrate_bps: f64,
    pub tx_w: f64,
}

/// Edge-only totals for one and two strata, in Watts.
pub const EDGE_ONLY_W: [f64; 2] = [9.34, 9.68];
/// Edge share of the cloud path for one and two strata.
pub const CLOUD_EDGE_SHARE_W: [f64; 2] = [5.35, 5.74];
/// Measured transmission shares. The two-stratum share does not add up to
/// the measured total (5.74 + 47.55 != 53.39); calibration anchors on the
/// totals in [`CLOUD_TOTAL_W`] and keeps these for reference only.
pub const CLOUD_TX_W: [f64; 2] = [45.48, 47.55];
/// Cloud path totals for one and two strata.
pub const CLOUD_TOTAL_W: [f64; 2] = [50.83, 53.39];

/// Uplink rates at which the transmission shares were profiled: one and two
/// 200x200 strata at full resolution, 15 fps, filter off, 8 bpp, codec ratio
/// 0.2.
pub const PROFILED_RATES_BPS: [f64; 2] = [960_000.0, 1_920_000.0];

/// Affine power model. Edge routes pay `edge_base + n edge_per_stratum`;
/// cloud routes pay `cloud_edge_base + n cloud_edge_per_stratum` plus
/// transmission `tx_base + tx_per_mbps * B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerModel {
    pub edge_base_w: f64,
    pub edge_per_stratum_w: f64,
    pub cloud_edge_base_w: f64,
    pub cloud_edge_per_stratum_w: f64,
    pub tx_base_w: f64,
    pub tx_w_per_mbps: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        let per = |v: [f64; 2]| v[1] - v[0];
        let base = |v: [f64; 2]| v[0] - per(v);
        Self::with_tx_anchors(
            base(EDGE_ONLY_W),
            per(EDGE_ONLY_W),
            base(CLOUD_EDGE_SHARE_W),
            per(CLOUD_EDGE_SHARE_W),
            TxAnchor {
                bitrate_bps: PROFILED_RATES_BPS[0],
                tx_w: CLOUD_TOTAL_W[0] - CLOUD_EDGE_SHARE_W[0],
            },
            TxAnchor {
                bitrate_bps: PROFILED_RATES_BPS[1],
                tx_w: CLOUD_TOTAL_W[1] - CLOUD_EDGE_SHARE_W[1],
            },
        )
    }
}

impl PowerModel {
    /// Fits the transmission line through two anchors.
    pub fn with_tx_anchors(
        edge_base_w: f64,
        edge_per_stratum_w: f64,
        cloud_edge_base_w: f64,
        cloud_edge_per_stratum_w: f64,
        a: TxAnchor,
        b: TxAnchor,
    ) -> Self {
        let slope = (b.tx_w - a.tx_w) / ((b.bitrate_bps - a.bitrate_bps) / 1e6);
        Self {
            edge_base_w,
            edge_per_stratum_w,
            cloud_edge_base_w,
            cloud_edge_per_stratum_w,
            tx_base_w: a.tx_w - slope * a.bitrate_bps / 1e6,
            tx_w_per_mbps: slope,
        }
    }

    pub fn tx_power(&self, bitrate_bps: f64) -> f64 {
        self.tx_base_w + self.tx_w_per_mbps * bitrate_bps / 1e6
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.edge_base_w,
            self.edge_per_stratum_w,
            self.cloud_edge_base_w,
            self.cloud_edge_per_stratum_w,
            self.tx_base_w,
            self.tx_w_per_mbps,
        ];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("power model constants must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Power draw of a configuration whose stream runs at `bitrate_bps`.
pub fn estimate_power(config: &Configuration, model: &PowerModel, bitrate_bps: f64) -> f64 {
    let n = config.per_stratum.len() as f64;
    match config.route {
        Route::Edge => model.edge_base_w + n * model.edge_per_stratum_w,
        Route::Cloud => {
            model.cloud_edge_base_w + n * model.cloud_edge_per_stratum_w + model.tx_power(bitrate_bps)
        }
    }
}

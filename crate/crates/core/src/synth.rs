//! Seeded synthetic data: moving-blob sonar clips with ground truth, and
//! 24-hour environment traces.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::detector::{DetBox, LabelSet, CLASS_SALMON};
use crate::energy::{CloudClass, EnvSample, EnvTraces, PvModel};
use crate::error::{Error, Result};
use crate::frame_io::{synth_timestamp, SonarFrame};
use crate::pareto::AccuracyProfile;
use crate::scheduler::{BatteryParams, ModelConstants, PolicyParams};
use crate::stratum::{ParamSets, Route};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlobClipParams {
    pub width: u32,
    pub height: u32,
    pub frames: u32,
    pub fps: f32,
    pub blob_w: u32,
    pub blob_h: u32,
    /// Pixels per frame, along x.
    pub speed: u32,
    /// Fraction of frames in which the blob is on screen.
    pub motion_fraction: f64,
    /// Frames at the start that never contain motion.
    pub warmup: u32,
    pub background_level: f64,
    /// Background brightness ramp from top to bottom.
    pub background_ramp: f64,
    pub noise_sd: f64,
    pub blob_contrast: f64,
}

impl Default for BlobClipParams {
    fn default() -> Self {
        Self {
            width: 128,
            height: 64,
            frames: 100,
            fps: 10.0,
            blob_w: 20,
            blob_h: 8,
            speed: 2,
            motion_fraction: 0.1,
            warmup: 5,
            background_level: 60.0,
            background_ramp: 40.0,
            noise_sd: 2.0,
            blob_contrast: 90.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BlobClip {
    pub frames: Vec<SonarFrame>,
    pub fps: f32,
    /// Per-frame motion ground truth.
    pub motion: Vec<bool>,
    pub labels: LabelSet,
}

impl BlobClip {
    /// Fraction of motion-free frames.
    pub fn true_saving_ratio(&self) -> f64 {
        let still = self.motion.iter().filter(|m| !**m).count();
        still as f64 / self.motion.len().max(1) as f64
    }
}

/// A static ramp background with additive Gaussian noise and one bright
/// blob crossing the frame in a single contiguous run of frames.
pub fn moving_blob_clip(p: &BlobClipParams, seed: u64) -> Result<BlobClip> {
    let moving = (p.motion_fraction * p.frames as f64).round() as u32;
    if p.blob_w == 0 || p.blob_h == 0 || p.blob_h > p.height {
        return Err(Error::invalid("blob must be non-empty and fit the frame height"));
    }
    if moving > 0 && p.blob_w + p.speed * (moving - 1) > p.width {
        return Err(Error::invalid("blob track does not fit the frame width"));
    }
    if p.warmup + moving > p.frames {
        return Err(Error::invalid("warm-up plus motion run exceeds the clip"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, p.noise_sd.max(0.0)).map_err(|e| Error::invalid(e.to_string()))?;
    let start = rng.random_range(p.warmup..=p.frames - moving);
    let track = p.blob_w + p.speed * moving.saturating_sub(1);
    let x0 = rng.random_range(0..=p.width - track);
    let y0 = rng.random_range(0..=p.height - p.blob_h);

    let background: Vec<f64> = (0..p.height)
        .flat_map(|y| {
            let v = p.background_level + p.background_ramp * y as f64 / (p.height.max(2) - 1) as f64;
            std::iter::repeat_n(v, p.width as usize)
        })
        .collect();

    let mut frames = Vec::with_capacity(p.frames as usize);
    let mut motion = Vec::with_capacity(p.frames as usize);
    let mut labels = LabelSet::default();
    for i in 0..p.frames {
        let mut px: Vec<u8> = background
            .iter()
            .map(|&b| (b + noise.sample(&mut rng)).round().clamp(0.0, 255.0) as u8)
            .collect();
        let on = i >= start && i < start + moving;
        if on {
            let bx = x0 + p.speed * (i - start);
            for y in y0..y0 + p.blob_h {
                for x in bx..bx + p.blob_w {
                    let k = (y * p.width + x) as usize;
                    px[k] = (px[k] as f64 + p.blob_contrast).clamp(0.0, 255.0) as u8;
                }
            }
            labels.push(
                i as u64,
                DetBox {
                    x: bx,
                    y: y0,
                    w: p.blob_w,
                    h: p.blob_h,
                    score: 1.0,
                    class_id: CLASS_SALMON,
                },
            );
        }
        motion.push(on);
        frames.push(SonarFrame::new(p.width, p.height, px, i as u64, synth_timestamp(i as u64, p.fps))?);
    }
    Ok(BlobClip {
        frames,
        fps: p.fps,
        motion,
        labels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DayKind {
    /// Cloudless, dry.
    Clear,
    /// Light cloud with light rain (≤ 4 mm/h) in the afternoon.
    LightRain,
    /// Thick to full overcast all day with heavy rain bands.
    Storm,
}

impl std::str::FromStr for DayKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clear" => Ok(Self::Clear),
            "light-rain" => Ok(Self::LightRain),
            "storm" => Ok(Self::Storm),
            _ => Err(Error::invalid(format!("unknown day kind `{s}`"))),
        }
    }
}

/// One 24-hour trace at one-minute cadence, midnight to midnight inclusive.
/// PV follows the synthetic generator with a small seeded flicker; the storm
/// day draws its cloud class and rain per 20-minute block.
pub fn synth_day(kind: DayKind, pv: &PvModel, seed: u64) -> Result<EnvTraces> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let block_s = 1200.0;
    let blocks = (86_400.0 / block_s) as usize;
    let weather: Vec<(CloudClass, f64)> = (0..blocks)
        .map(|b| {
            let hour = b as f64 * block_s / 3600.0;
            match kind {
                DayKind::Clear => (CloudClass::Clear, 0.0),
                DayKind::LightRain => {
                    if (13.0..17.0).contains(&hour) {
                        (CloudClass::Light, rng.random_range(0.5..3.5))
                    } else {
                        (CloudClass::Clear, 0.0)
                    }
                }
                DayKind::Storm => {
                    let cloud = if rng.random_bool(0.6) { CloudClass::Full } else { CloudClass::Thick };
                    let precip = match rng.random_range(0..10) {
                        0..=3 => 0.0,
                        4..=6 => rng.random_range(0.5..4.0),
                        _ => rng.random_range(4.5..12.0),
                    };
                    (cloud, precip)
                }
            }
        })
        .collect();
    let samples: Vec<EnvSample> = (0..=1440)
        .map(|m| {
            let t = m as f64 * 60.0;
            let (cloud, precip) = weather[((t / block_s) as usize).min(blocks - 1)];
            let flicker = if kind == DayKind::Clear { 1.0 } else { rng.random_range(0.9..1.1) };
            let pv_w = (pv.synthetic_at(t, cloud) * flicker).clamp(0.0, pv.rated_w);
            EnvSample {
                t_s: t,
                precip_mm_h: precip,
                cloud_class: cloud,
                pv_w,
                measured_mbps: None,
            }
        })
        .collect();
    EnvTraces::new(samples)
}

/// Plausible per-stratum accuracy table over `sets`: accuracy grows with
/// framerate (saturating), falls with downscale, gains a little from the
/// filter, and the cloud models outperform the on-premise ones.
pub fn synth_profile(sets: &ParamSets) -> Result<AccuracyProfile> {
    let mut profile = AccuracyProfile::new(false);
    for &route in &sets.routes {
        let base = match route {
            Route::Edge => 0.42,
            Route::Cloud => 0.60,
        };
        for s in sets.stratum_choices() {
            let fps_gain = 0.25 * (1.0 - (-(s.fps as f64) / 6.0).exp());
            let scale_loss = 0.08 * (s.downscale as f64).log2();
            let filter_gain = if s.filter_on { 0.03 } else { 0.0 };
            let a = ((base + fps_gain - scale_loss + filter_gain) * 1000.0).round() / 1000.0;
            profile.insert(route, s, a.clamp(0.0, 1.0))?;
        }
    }
    Ok(profile)
}

pub const STORM_FIXTURE_SEED: u64 = 7;
pub const CLEAR_FIXTURE_SEED: u64 = 1;
pub const LIGHT_RAIN_FIXTURE_SEED: u64 = 3;

/// Model constants of the bundled fixtures: defaults except for a 2.4 kWh
/// battery starting at 80% charge, enough to carry the fixed sonar and
/// camera load through a night above the 300 Wh reserve.
pub fn fixture_models() -> ModelConstants {
    ModelConstants {
        battery: BatteryParams {
            capacity_wh: 2400.0,
            initial_soc: 0.8,
        },
        ..Default::default()
    }
}

/// Contents of every file under `fixtures/`, by file name.
pub fn bundled_fixtures() -> Result<Vec<(&'static str, String)>> {
    let models = fixture_models();
    Ok(vec![
        ("clear_day.csv", synth_day(DayKind::Clear, &models.pv, CLEAR_FIXTURE_SEED)?.to_csv()),
        (
            "light_rain_day.csv",
            synth_day(DayKind::LightRain, &models.pv, LIGHT_RAIN_FIXTURE_SEED)?.to_csv(),
        ),
        ("storm_day.csv", synth_day(DayKind::Storm, &models.pv, STORM_FIXTURE_SEED)?.to_csv()),
        ("profile.csv", synth_profile(&ParamSets::default())?.to_csv()),
        ("models.json", pretty_json(&models)),
        ("policy.json", pretty_json(&PolicyParams::default())),
    ])
}

fn pretty_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("fixture types serialize") + "\n"
}

//! Off-grid environment: weather, satellite link throughput, dish power,
//! PV production and battery state.

use std::io::Read;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sky condition as seen by the fisheye camera.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum CloudClass {
    Clear = 0,
    Light = 1,
    Thick = 2,
    Full = 3,
}

impl TryFrom<u8> for CloudClass {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(Self::Clear),
            1 => Ok(Self::Light),
            2 => Ok(Self::Thick),
            3 => Ok(Self::Full),
            _ => Err(format!("cloud class {v} outside 0..=3")),
        }
    }
}

impl From<CloudClass> for u8 {
    fn from(c: CloudClass) -> u8 {
        c as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherSample {
    pub t: f64,
    /// mm/hour
    pub precipitation: f64,
    pub cloud_class: CloudClass,
}

impl WeatherSample {
    pub fn clear(t: f64) -> Self {
        Self {
            t,
            precipitation: 0.0,
            cloud_class: CloudClass::Clear,
        }
    }
}

// ---------------------------------------------------------------------------
// Satellite link

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkModel {
    pub baseline_mbps: f64,
    /// Applied under any precipitation up to the heavy-rain threshold.
    pub precip_multiplier: f64,
    /// mm/hour
    pub heavy_rain_threshold: f64,
    pub heavy_rain_multiplier: f64,
    /// Applied for cloud cover without precipitation.
    pub cloud_multiplier: f64,
}

impl Default for LinkModel {
    fn default() -> Self {
        Self {
            baseline_mbps: 20.0,
            precip_multiplier: 0.85,
            heavy_rain_threshold: 4.0,
            heavy_rain_multiplier: 0.6,
            cloud_multiplier: 0.90,
        }
    }
}

impl LinkModel {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| v > 0.0 && v <= 1.0;
        if !(in_unit(self.precip_multiplier) && in_unit(self.heavy_rain_multiplier) && in_unit(self.cloud_multiplier)) {
            return Err(Error::invalid("link multipliers must be in (0,1]"));
        }
        if !(self.heavy_rain_threshold > 0.0) {
            return Err(Error::invalid("heavy rain threshold must be positive"));
        }
        if !(self.baseline_mbps >= 0.0) {
            return Err(Error::invalid("baseline throughput must be non-negative"));
        }
        if self.heavy_rain_multiplier > self.precip_multiplier || self.precip_multiplier > self.cloud_multiplier {
            return Err(Error::invalid(
                "link multipliers must satisfy heavy rain <= precipitation <= cloud",
            ));
        }
        Ok(())
    }

    /// Expected uplink throughput in Mbps under `w`.
    pub fn throughput_at(&self, w: &WeatherSample) -> f64 {
        let factor = if w.precipitation > self.heavy_rain_threshold {
            self.heavy_rain_multiplier
        } else if w.precipitation > 0.0 {
            self.precip_multiplier
        } else if w.cloud_class != CloudClass::Clear {
            self.cloud_multiplier
        } else {
            1.0
        };
        self.baseline_mbps * factor
    }
}

// ---------------------------------------------------------------------------
// Dish power

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum DishMode {
    #[default]
    Deterministic,
    /// Normal draws around the deterministic mean, truncated to
    /// `[0, max_w]`.
    Stochastic { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DishPowerModel {
    pub mean_clear_w: f64,
    pub max_w: f64,
    pub rain_uplift_w: f64,
    /// Spread of stochastic draws.
    pub sd_w: f64,
    pub mode: DishMode,
}

impl Default for DishPowerModel {
    fn default() -> Self {
        Self {
            mean_clear_w: 51.3,
            max_w: 166.5,
            rain_uplift_w: 30.0,
            sd_w: 10.0,
            mode: DishMode::Deterministic,
        }
    }
}

impl DishPowerModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_clear_w >= 0.0 && self.max_w >= self.mean_clear_w && self.rain_uplift_w >= 0.0 && self.sd_w >= 0.0) {
            return Err(Error::invalid("dish power constants must satisfy 0 <= mean <= max, uplift >= 0, sd >= 0"));
        }
        Ok(())
    }

    /// Deterministic draw under `w`, clamped at `max_w`.
    pub fn mean_at(&self, w: &WeatherSample) -> f64 {
        let uplift = if w.precipitation > 0.0 { self.rain_uplift_w } else { 0.0 };
        (self.mean_clear_w + uplift).clamp(0.0, self.max_w)
    }
}

/// Produces dish power readings, owning the RNG in stochastic mode.
#[derive(Debug, Clone)]
pub struct DishPowerSource {
    model: DishPowerModel,
    rng: Option<ChaCha8Rng>,
}

impl DishPowerSource {
    pub fn new(model: DishPowerModel) -> Self {
        let rng = match model.mode {
            DishMode::Deterministic => None,
            DishMode::Stochastic { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        };
        Self { model, rng }
    }

    pub fn model(&self) -> &DishPowerModel {
        &self.model
    }

    pub fn power_at(&mut self, w: &WeatherSample) -> f64 {
        let mean = self.model.mean_at(w);
        match self.rng.as_mut() {
            None => mean,
            Some(rng) => truncated_normal(rng, mean, self.model.sd_w, self.model.max_w),
        }
    }
}

fn truncated_normal<R: Rng>(rng: &mut R, mean: f64, sd: f64, max: f64) -> f64 {
    if sd == 0.0 {
        return mean.clamp(0.0, max);
    }
    let normal = Normal::new(mean, sd).expect("finite sd");
    for _ in 0..64 {
        let v = normal.sample(rng);
        if (0.0..=max).contains(&v) {
            return v;
        }
    }
    mean.clamp(0.0, max)
}

pub fn dish_power_at(source: &mut DishPowerSource, w: &WeatherSample) -> f64 {
    source.power_at(w)
}

// ---------------------------------------------------------------------------
// Loads and battery

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoadModel {
    pub sonar_w: f64,
    pub camera_w: f64,
}

impl Default for LoadModel {
    fn default() -> Self {
        Self {
            sonar_w: 100.0,
            camera_w: 15.0,
        }
    }
}

impl LoadModel {
    /// Always-on load independent of the streaming configuration.
    pub fn fixed_w(&self) -> f64 {
        self.sonar_w + self.camera_w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyState {
    pub battery_capacity_wh: f64,
    pub soc: f64,
    pub reserve_wh: f64,
}

impl Default for EnergyState {
    fn default() -> Self {
        Self {
            battery_capacity_wh: 1200.0,
            soc: 1.0,
            reserve_wh: 300.0,
        }
    }
}

impl EnergyState {
    pub fn validate(&self) -> Result<()> {
        if !(self.battery_capacity_wh > 0.0) {
            return Err(Error::invalid("battery capacity must be positive"));
        }
        if !(0.0..=1.0).contains(&self.soc) {
            return Err(Error::invalid("state of charge must be in [0,1]"));
        }
        if !(self.reserve_wh >= 0.0 && self.reserve_wh < self.battery_capacity_wh) {
            return Err(Error::invalid("reserve must be in [0, capacity)"));
        }
        Ok(())
    }

    pub fn stored_wh(&self) -> f64 {
        self.soc * self.battery_capacity_wh
    }
}

/// Advances the battery by `dt_s` seconds of constant PV and load. Reports
/// depletion when the battery is empty and the load still exceeds supply.
pub fn battery_step(state: &EnergyState, pv_w: f64, load_w: f64, dt_s: f64) -> (EnergyState, bool) {
    debug_assert!(dt_s > 0.0);
    let delta_wh = (pv_w - load_w) * dt_s / 3600.0;
    let soc = (state.soc + delta_wh / state.battery_capacity_wh).clamp(0.0, 1.0);
    let next = EnergyState { soc, ..*state };
    (next, soc == 0.0 && load_w > pv_w)
}

// ---------------------------------------------------------------------------
// PV

/// Clear-sky diurnal generator: a half-sine between sunrise and sunset
/// peaking at `rated_w * noon_factor`, attenuated by cloud class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PvModel {
    pub rated_w: f64,
    pub efficiency: f64,
    pub sunrise_h: f64,
    pub sunset_h: f64,
    pub noon_factor: f64,
    /// Multiplier per cloud class, indexed by class id.
    pub cloud_attenuation: [f64; 4],
}

impl Default for PvModel {
    fn default() -> Self {
        Self {
            rated_w: 900.0,
            efficiency: 0.186,
            sunrise_h: 5.0,
            sunset_h: 21.0,
            noon_factor: 0.8,
            cloud_attenuation: [1.0, 0.7, 0.4, 0.15],
        }
    }
}

impl PvModel {
    pub fn synthetic_at(&self, t: f64, cloud: CloudClass) -> f64 {
        let h = t.rem_euclid(86_400.0) / 3600.0;
        if h <= self.sunrise_h || h >= self.sunset_h {
            return 0.0;
        }
        let phase = (h - self.sunrise_h) / (self.sunset_h - self.sunrise_h);
        let v = self.rated_w * self.noon_factor * (std::f64::consts::PI * phase).sin()
            * self.cloud_attenuation[cloud as usize];
        v.clamp(0.0, self.rated_w)
    }

    pub fn solar_noon_s(&self) -> f64 {
        (self.sunrise_h + self.sunset_h) / 2.0 * 3600.0
    }
}

/// Regularly sampled PV production, linearly interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct PvTrace {
    pub start_t: f64,
    pub cadence_s: f64,
    pub values: Vec<f64>,
}

impl PvTrace {
    pub fn end_t(&self) -> f64 {
        self.start_t + self.cadence_s * (self.values.len().saturating_sub(1)) as f64
    }

    pub fn at(&self, t: f64) -> Result<f64> {
        let (start, end) = (self.start_t, self.end_t());
        if self.values.is_empty() || t < start || t > end {
            return Err(Error::OutsideTrace { t, start, end });
        }
        let pos = (t - start) / self.cadence_s;
        let i = pos.floor() as usize;
        if i + 1 >= self.values.len() {
            return Ok(self.values[self.values.len() - 1]);
        }
        let frac = pos - i as f64;
        let (a, b) = (self.values[i], self.values[i + 1]);
        Ok(if frac == 0.0 { a } else { a + (b - a) * frac })
    }
}

#[derive(Debug, Clone)]
pub enum PvSource {
    Trace(PvTrace),
    Synthetic(PvModel),
}

impl PvSource {
    /// PV output at `t`; `cloud` drives the synthetic generator only.
    pub fn pv_at(&self, t: f64, cloud: CloudClass) -> Result<f64> {
        match self {
            PvSource::Trace(tr) => tr.at(t),
            PvSource::Synthetic(m) => Ok(m.synthetic_at(t, cloud)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ForecastMethod {
    /// Current output held constant.
    #[default]
    Persistence,
    /// Future values read from the trace itself (an idealized forecaster).
    TraceOracle,
}

pub const FORECAST_STEP_S: f64 = 60.0;
pub const MAX_FORECAST_HORIZON_S: f64 = 4.0 * 3600.0;

/// Forecast at one-minute resolution: samples at `t + 60k`, `k = 1..=n`,
/// `n = ceil(horizon_s / 60)`.
pub fn pv_forecast(
    source: &PvSource,
    t: f64,
    cloud_now: CloudClass,
    horizon_s: f64,
    method: ForecastMethod,
) -> Result<Vec<f64>> {
    if !(0.0..=MAX_FORECAST_HORIZON_S).contains(&horizon_s) {
        return Err(Error::invalid(format!(
            "forecast horizon {horizon_s} s outside [0, {MAX_FORECAST_HORIZON_S}]"
        )));
    }
    let n = (horizon_s / FORECAST_STEP_S).ceil() as usize;
    match method {
        ForecastMethod::Persistence => {
            let now = source.pv_at(t, cloud_now)?;
            if let PvSource::Trace(tr) = source {
                // the horizon must still lie within the trace
                tr.at(t + n as f64 * FORECAST_STEP_S)?;
            }
            Ok(vec![now; n])
        }
        ForecastMethod::TraceOracle => (1..=n)
            .map(|k| source.pv_at(t + k as f64 * FORECAST_STEP_S, cloud_now))
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// Environment traces

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvSample {
    pub t_s: f64,
    pub precip_mm_h: f64,
    pub cloud_class: CloudClass,
    pub pv_w: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured_mbps: Option<f64>,
}

impl EnvSample {
    pub fn weather(&self) -> WeatherSample {
        WeatherSample {
            t: self.t_s,
            precipitation: self.precip_mm_h,
            cloud_class: self.cloud_class,
        }
    }
}

/// Regular-cadence environment trace (`t_s,precip_mm_h,cloud_class,pv_w[,measured_mbps]`).
#[derive(Debug, Clone, PartialEq)]
pub struct EnvTraces {
    samples: Vec<EnvSample>,
    cadence_s: f64,
}

impl EnvTraces {
    pub fn new(samples: Vec<EnvSample>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::invalid("a trace needs at least two samples"));
        }
        let cadence = samples[1].t_s - samples[0].t_s;
        if !(cadence >= 1.0) {
            return Err(Error::invalid(format!("trace cadence {cadence} s is below 1 s")));
        }
        for pair in samples.windows(2) {
            let dt = pair[1].t_s - pair[0].t_s;
            if (dt - cadence).abs() > 1e-6 * cadence {
                return Err(Error::TraceGap {
                    from: pair[0].t_s,
                    to: pair[1].t_s,
                    cadence,
                });
            }
        }
        for s in &samples {
            if !(s.precip_mm_h >= 0.0) || !(s.pv_w >= 0.0) {
                return Err(Error::invalid(format!(
                    "negative precipitation or PV at t={} s",
                    s.t_s
                )));
            }
        }
        Ok(Self {
            samples,
            cadence_s: cadence,
        })
    }

    pub fn from_csv_reader<R: Read>(reader: R, name: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::MalformedRow {
                file: name.into(),
                row: 0,
                reason: e.to_string(),
            })?
            .clone();
        let expected = ["t_s", "precip_mm_h", "cloud_class", "pv_w"];
        let ok = headers.len() >= 4
            && headers.len() <= 5
            && headers.iter().zip(expected).all(|(h, e)| h == e)
            && (headers.len() == 4 || &headers[4] == "measured_mbps");
        if !ok {
            return Err(Error::MalformedRow {
                file: name.into(),
                row: 0,
                reason: "expected header `t_s,precip_mm_h,cloud_class,pv_w[,measured_mbps]`".into(),
            });
        }
        let mut samples = Vec::new();
        for (i, rec) in rdr.deserialize::<EnvSample>().enumerate() {
            let s = rec.map_err(|e| Error::MalformedRow {
                file: name.into(),
                row: i + 1,
                reason: e.to_string(),
            })?;
            samples.push(s);
        }
        Self::new(samples)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(f, &path.display().to_string())
    }

    pub fn to_csv(&self) -> String {
        let with_mbps = self.samples.iter().any(|s| s.measured_mbps.is_some());
        let mut out = String::from("t_s,precip_mm_h,cloud_class,pv_w");
        if with_mbps {
            out.push_str(",measured_mbps");
        }
        out.push('\n');
        for s in &self.samples {
            out.push_str(&format!("{},{},{},{}", s.t_s, s.precip_mm_h, s.cloud_class as u8, s.pv_w));
            if with_mbps {
                out.push(',');
                if let Some(m) = s.measured_mbps {
                    out.push_str(&m.to_string());
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn samples(&self) -> &[EnvSample] {
        &self.samples
    }

    pub fn cadence_s(&self) -> f64 {
        self.cadence_s
    }

    pub fn start_t(&self) -> f64 {
        self.samples[0].t_s
    }

    pub fn end_t(&self) -> f64 {
        self.samples[self.samples.len() - 1].t_s
    }

    fn index_at(&self, t: f64) -> Result<usize> {
        if t < self.start_t() || t > self.end_t() {
            return Err(Error::OutsideTrace {
                t,
                start: self.start_t(),
                end: self.end_t(),
            });
        }
        let i = ((t - self.start_t()) / self.cadence_s + 1e-9).floor() as usize;
        Ok(i.min(self.samples.len() - 1))
    }

    /// Sample in effect at `t` (held until the next sample).
    pub fn sample_at(&self, t: f64) -> Result<&EnvSample> {
        Ok(&self.samples[self.index_at(t)?])
    }

    pub fn weather_at(&self, t: f64) -> Result<WeatherSample> {
        let mut w = self.sample_at(t)?.weather();
        w.t = t;
        Ok(w)
    }

    pub fn pv_trace(&self) -> PvTrace {
        PvTrace {
            start_t: self.start_t(),
            cadence_s: self.cadence_s,
            values: self.samples.iter().map(|s| s.pv_w).collect(),
        }
    }

    pub fn has_measured_mbps(&self) -> bool {
        self.samples.iter().all(|s| s.measured_mbps.is_some())
    }
}

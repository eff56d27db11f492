//! Epoch planner and day-long energy/bandwidth simulation.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::energy::{
    battery_step, pv_forecast, DishPowerModel, DishPowerSource, EnergyState, EnvTraces, ForecastMethod,
    LinkModel, LoadModel, PvModel, PvSource, FORECAST_STEP_S, MAX_FORECAST_HORIZON_S,
};
use crate::error::{Error, Result};
use crate::pareto::{ParetoMember, ParetoSet};
use crate::stratum::{BitrateParams, PowerModel, Route};

pub const SIM_STEP_S: f64 = 60.0;

/// Discretionary power the energy state can sustain over a horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub watts: f64,
    /// Set when even zero discretionary power breaches the reserve.
    pub low_energy: bool,
}

pub const BUDGET_TOLERANCE_W: f64 = 0.1;

fn stays_above_reserve(state: &EnergyState, forecast: &[f64], load: f64, n: usize, reserve_wh: f64) -> bool {
    let cap = state.battery_capacity_wh;
    let mut stored = state.stored_wh();
    let dt_h = FORECAST_STEP_S / 3600.0;
    for k in 0..n {
        let pv = forecast.get(k).copied().unwrap_or(0.0);
        stored = (stored + (pv - load) * dt_h).min(cap);
        if stored < reserve_wh - 1e-9 {
            return false;
        }
    }
    true
}

/// Largest discretionary power `p` for which stored energy, integrated at
/// one-minute steps from the forecast minus `load_fixed_w + p`, stays at or
/// above `reserve_wh` for the whole horizon. Missing forecast samples count
/// as zero PV. Stored energy saturates at capacity.
pub fn energy_budget(
    state: &EnergyState,
    forecast: &[f64],
    load_fixed_w: f64,
    horizon_s: f64,
    reserve_wh: f64,
) -> Result<Budget> {
    if !(horizon_s > 0.0) {
        return Err(Error::invalid("budget horizon must be positive"));
    }
    let n = (horizon_s / FORECAST_STEP_S).ceil() as usize;
    if !stays_above_reserve(state, forecast, load_fixed_w, n, reserve_wh) {
        return Ok(Budget {
            watts: 0.0,
            low_energy: true,
        });
    }
    let max_pv = forecast.iter().take(n).copied().fold(0.0, f64::max);
    let mut lo = 0.0;
    let mut hi = max_pv + (state.stored_wh() - reserve_wh).max(0.0) * 3600.0 / horizon_s + 1.0;
    if stays_above_reserve(state, forecast, load_fixed_w + hi, n, reserve_wh) {
        // unreachable for consistent inputs; guard against float edge cases
        return Ok(Budget {
            watts: hi,
            low_energy: false,
        });
    }
    while hi - lo > BUDGET_TOLERANCE_W {
        let mid = 0.5 * (lo + hi);
        if stays_above_reserve(state, forecast, load_fixed_w + mid, n, reserve_wh) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Budget {
        watts: lo,
        low_energy: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    /// Highest-accuracy member within the bandwidth and energy budget.
    #[default]
    Reserve,
    /// Always the highest-accuracy member, ignoring every constraint.
    AlwaysMax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyParams {
    pub epoch_s: f64,
    pub reserve_wh: f64,
    /// Local hour the zero-PV window opens.
    pub night_start_h: f64,
    /// Local hour it closes (the window wraps past midnight when
    /// `night_end_h < night_start_h`).
    pub night_end_h: f64,
    pub kind: PolicyKind,
    pub forecast: ForecastMethod,
    /// Overrides the search fallback when set.
    pub fallback: Option<ParetoMember>,
}

impl Default for PolicyParams {
    fn default() -> Self {
        Self {
            epoch_s: 300.0,
            reserve_wh: 300.0,
            night_start_h: 21.0,
            night_end_h: 5.0,
            kind: PolicyKind::Reserve,
            forecast: ForecastMethod::Persistence,
            fallback: None,
        }
    }
}

impl PolicyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epoch_s > 0.0) || self.epoch_s % SIM_STEP_S != 0.0 {
            return Err(Error::invalid(format!(
                "epoch_s must be a positive multiple of {SIM_STEP_S} s"
            )));
        }
        if !(self.reserve_wh >= 0.0) {
            return Err(Error::invalid("reserve_wh must be non-negative"));
        }
        let hour = 0.0..24.0;
        if !hour.contains(&self.night_start_h) || !hour.contains(&self.night_end_h) {
            return Err(Error::invalid("night window hours must lie in [0, 24)"));
        }
        if let Some(f) = &self.fallback {
            if f.config.route != Route::Edge {
                return Err(Error::invalid("the fallback configuration must be edge-routed"));
            }
        }
        Ok(())
    }

    pub fn is_night(&self, t: f64) -> bool {
        let h = t.rem_euclid(86_400.0) / 3600.0;
        if self.night_start_h <= self.night_end_h {
            (self.night_start_h..self.night_end_h).contains(&h)
        } else {
            h >= self.night_start_h || h < self.night_end_h
        }
    }

    /// End of the first night window that opens after `t`. A window already
    /// in progress at `t` is not counted: planning before dawn must still
    /// carry the system through the following night.
    pub fn horizon_end(&self, t: f64) -> f64 {
        let day = (t / 86_400.0).floor() * 86_400.0;
        let mut start = day + self.night_start_h * 3600.0;
        if start <= t {
            start += 86_400.0;
        }
        let len_h = (self.night_end_h - self.night_start_h).rem_euclid(24.0);
        start + len_h * 3600.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDecision {
    pub epoch_start: f64,
    pub chosen: ParetoMember,
    /// Budget headroom left over the epoch, `(budget - P) * epoch`.
    pub predicted_margin_wh: f64,
    pub feasible_count: usize,
    pub fallback_used: bool,
}

fn better_choice(a: &ParetoMember, b: &ParetoMember, extra_a: f64, extra_b: f64) -> Ordering {
    // Less means preferable.
    b.metrics
        .accuracy
        .total_cmp(&a.metrics.accuracy)
        .then((a.metrics.power_w + extra_a).total_cmp(&(b.metrics.power_w + extra_b)))
        .then(a.metrics.bandwidth_bps.total_cmp(&b.metrics.bandwidth_bps))
        .then_with(|| a.key.cmp(&b.key))
}

/// Planning power of a member once the dish surcharge is applied to
/// cloud-routed configurations.
fn planning_power(m: &ParetoMember, cloud_extra_w: f64) -> f64 {
    match m.config.route {
        Route::Cloud => m.metrics.power_w + cloud_extra_w,
        Route::Edge => m.metrics.power_w,
    }
}

/// One planning decision for an epoch.
pub fn plan_epoch(
    front: &ParetoSet,
    bandwidth_mbps: f64,
    budget_w: f64,
    policy: &PolicyParams,
    fallback: &ParetoMember,
    epoch_start: f64,
) -> ScheduleDecision {
    plan_epoch_with_surcharge(front, bandwidth_mbps, budget_w, policy, fallback, epoch_start, 0.0)
}

/// [`plan_epoch`] with an extra dish draw (e.g. rain) charged to every
/// cloud-routed member.
pub fn plan_epoch_with_surcharge(
    front: &ParetoSet,
    bandwidth_mbps: f64,
    budget_w: f64,
    policy: &PolicyParams,
    fallback: &ParetoMember,
    epoch_start: f64,
    cloud_extra_w: f64,
) -> ScheduleDecision {
    let extra = |m: &ParetoMember| planning_power(m, cloud_extra_w) - m.metrics.power_w;
    let bw_bps = bandwidth_mbps * 1e6;
    let pick = |pred: &dyn Fn(&ParetoMember) -> bool| {
        let mut count = 0usize;
        let mut best: Option<&ParetoMember> = None;
        for m in front.members.iter().filter(|m| pred(m)) {
            count += 1;
            best = match best {
                Some(b) if better_choice(b, m, extra(b), extra(m)) != Ordering::Greater => Some(b),
                _ => Some(m),
            };
        }
        (count, best)
    };
    let (feasible_count, best) = match policy.kind {
        PolicyKind::AlwaysMax => pick(&|_| true),
        PolicyKind::Reserve => pick(&|m| {
            m.metrics.bandwidth_bps <= bw_bps && planning_power(m, cloud_extra_w) <= budget_w
        }),
    };
    let epoch_h = policy.epoch_s / 3600.0;
    match best {
        Some(m) => ScheduleDecision {
            epoch_start,
            chosen: m.clone(),
            predicted_margin_wh: (budget_w - planning_power(m, cloud_extra_w)) * epoch_h,
            feasible_count,
            fallback_used: false,
        },
        None => ScheduleDecision {
            epoch_start,
            chosen: fallback.clone(),
            predicted_margin_wh: (budget_w - fallback.metrics.power_w) * epoch_h,
            feasible_count: 0,
            fallback_used: true,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatteryParams {
    pub capacity_wh: f64,
    pub initial_soc: f64,
}

impl Default for BatteryParams {
    fn default() -> Self {
        Self {
            capacity_wh: 1200.0,
            initial_soc: 1.0,
        }
    }
}

/// Every model constant in one file.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConstants {
    pub power: PowerModel,
    pub bitrate: BitrateParams,
    pub link: LinkModel,
    pub dish: DishPowerModel,
    pub load: LoadModel,
    pub pv: PvModel,
    pub battery: BatteryParams,
}

impl ModelConstants {
    pub fn validate(&self) -> Result<()> {
        self.power.validate()?;
        self.bitrate.validate()?;
        self.link.validate()?;
        self.dish.validate()?;
        if !(self.battery.capacity_wh > 0.0 && (0.0..=1.0).contains(&self.battery.initial_soc)) {
            return Err(Error::invalid("battery needs positive capacity and initial soc in [0,1]"));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&text).map_err(|e| Error::Json {
            context: path.display().to_string(),
            source: e,
        })?;
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub t_s: f64,
    pub soc: f64,
    pub pv_w: f64,
    pub load_w: f64,
    pub mbps: f64,
    pub chosen_a: f64,
    pub chosen_b: f64,
    pub chosen_p: f64,
    pub fallback: bool,
    pub depleted: bool,
}

pub const SERIES_HEADER: &str = "t_s,soc,pv_w,load_w,mbps,chosen_A,chosen_B,chosen_P,fallback,depleted";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    #[serde(flatten)]
    pub decision: ScheduleDecision,
    pub budget_w: f64,
    pub low_energy: bool,
    pub bandwidth_mbps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub policy: PolicyKind,
    pub start_t: f64,
    pub end_t: f64,
    pub step_s: f64,
    pub battery_capacity_wh: f64,
    pub reserve_wh: f64,
    pub epochs: Vec<EpochRecord>,
    /// Step start times at which the battery became depleted.
    pub depletion_events: Vec<f64>,
    /// Steps ending below the reserve.
    pub reserve_breaches: usize,
    pub min_stored_wh: f64,
    pub final_soc: f64,
    pub bytes_sent: f64,
    pub mean_accuracy: f64,
    pub soc_series: Vec<f64>,
    #[serde(skip)]
    pub series: Vec<SeriesRow>,
}

impl SimulationReport {
    pub fn series_csv(&self) -> String {
        let mut out = String::from(SERIES_HEADER);
        out.push('\n');
        for r in &self.series {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.t_s,
                r.soc,
                r.pv_w,
                r.load_w,
                r.mbps,
                r.chosen_a,
                r.chosen_b,
                r.chosen_p,
                u8::from(r.fallback),
                u8::from(r.depleted)
            ));
        }
        out
    }
}

/// Budget forecast over `[t, horizon_end]` at one-minute resolution. Within
/// the night window PV is zero. Past the forecaster's reach the last forecast
/// value is carried forward scaled by the clear-sky diurnal shape, so the
/// afternoon decline is anticipated.
fn budget_forecast(
    forecast: &[f64],
    t: f64,
    horizon_end: f64,
    policy: &PolicyParams,
    pv_shape: &PvModel,
    pv_now: f64,
) -> Vec<f64> {
    let n = ((horizon_end - t) / FORECAST_STEP_S).ceil() as usize;
    let (anchor_t, anchor_v) = match forecast.last() {
        Some(&v) => (t + forecast.len() as f64 * FORECAST_STEP_S, v),
        None => (t, pv_now),
    };
    let anchor_shape = pv_shape.synthetic_at(anchor_t, crate::energy::CloudClass::Clear);
    (1..=n)
        .map(|k| {
            let tk = t + k as f64 * FORECAST_STEP_S;
            if policy.is_night(tk) {
                0.0
            } else if k <= forecast.len() {
                forecast[k - 1]
            } else if anchor_shape > 0.0 {
                anchor_v * pv_shape.synthetic_at(tk, crate::energy::CloudClass::Clear) / anchor_shape
            } else {
                0.0
            }
        })
        .collect()
}

/// Runs the planner over the full span of `traces` at one-minute steps,
/// re-planning at every epoch boundary.
pub fn simulate_day(
    traces: &EnvTraces,
    front: &ParetoSet,
    fallback: &ParetoMember,
    policy: &PolicyParams,
    models: &ModelConstants,
) -> Result<SimulationReport> {
    policy.validate()?;
    models.validate()?;
    let fallback = policy.fallback.as_ref().unwrap_or(fallback);
    if fallback.config.route != Route::Edge {
        return Err(Error::invalid("the fallback configuration must be edge-routed"));
    }
    let mut state = EnergyState {
        battery_capacity_wh: models.battery.capacity_wh,
        soc: models.battery.initial_soc,
        reserve_wh: policy.reserve_wh.min(models.battery.capacity_wh),
    };
    let pv_source = PvSource::Trace(traces.pv_trace());
    let mut dish = DishPowerSource::new(models.dish);
    let fixed_w = models.load.fixed_w();
    let use_measured = traces.has_measured_mbps();

    let start = traces.start_t();
    let end = traces.end_t();
    let steps = ((end - start) / SIM_STEP_S).floor() as usize;
    let epoch_steps = (policy.epoch_s / SIM_STEP_S).round() as usize;

    let mut epochs = Vec::new();
    let mut series = Vec::with_capacity(steps);
    let mut depletion_events = Vec::new();
    let mut reserve_breaches = 0;
    let mut min_stored = state.stored_wh();
    let mut bytes_sent = 0.0;
    let mut acc_sum = 0.0;
    let mut was_depleted = false;
    let mut current: Option<ParetoMember> = None;
    let mut current_fallback = false;

    for k in 0..steps {
        let t = start + k as f64 * SIM_STEP_S;
        let sample = *traces.sample_at(t)?;
        let weather = traces.weather_at(t)?;
        let mbps = match (use_measured, sample.measured_mbps) {
            (true, Some(m)) => m,
            _ => models.link.throughput_at(&weather),
        };
        let pv_now = pv_source.pv_at(t, weather.cloud_class)?;

        if k % epoch_steps == 0 || current.is_none() {
            let reach = (end - t).min(MAX_FORECAST_HORIZON_S);
            let reach = (reach / FORECAST_STEP_S).floor() * FORECAST_STEP_S;
            let forecast = if reach > 0.0 {
                pv_forecast(&pv_source, t, weather.cloud_class, reach, policy.forecast)?
            } else {
                Vec::new()
            };
            let horizon_end = policy.horizon_end(t);
            let series_fc = budget_forecast(&forecast, t, horizon_end, policy, &models.pv, pv_now);
            let budget = energy_budget(&state, &series_fc, fixed_w, horizon_end - t, state.reserve_wh)?;
            let surcharge = models.dish.mean_at(&weather) - models.dish.mean_clear_w;
            let decision =
                plan_epoch_with_surcharge(front, mbps, budget.watts, policy, fallback, t, surcharge);
            current = Some(decision.chosen.clone());
            current_fallback = decision.fallback_used;
            epochs.push(EpochRecord {
                decision,
                budget_w: budget.watts,
                low_energy: budget.low_energy,
                bandwidth_mbps: mbps,
            });
        }
        let chosen = current.as_ref().expect("planned above");

        let mut load = fixed_w + chosen.metrics.power_w;
        if chosen.config.route == Route::Cloud {
            load += dish.power_at(&weather) - models.dish.mean_clear_w;
        }
        let (next, depleted) = battery_step(&state, pv_now, load, SIM_STEP_S);
        state = next;
        if depleted && !was_depleted {
            depletion_events.push(t);
        }
        was_depleted = depleted;
        let stored = state.stored_wh();
        if stored < state.reserve_wh - 1e-9 {
            reserve_breaches += 1;
        }
        min_stored = min_stored.min(stored);
        let sent_bps = chosen.metrics.bandwidth_bps.min(mbps * 1e6);
        bytes_sent += sent_bps * SIM_STEP_S / 8.0;
        acc_sum += chosen.metrics.accuracy;

        series.push(SeriesRow {
            t_s: t,
            soc: state.soc,
            pv_w: pv_now,
            load_w: load,
            mbps,
            chosen_a: chosen.metrics.accuracy,
            chosen_b: chosen.metrics.bandwidth_bps,
            chosen_p: chosen.metrics.power_w,
            fallback: current_fallback,
            depleted,
        });
    }

    Ok(SimulationReport {
        policy: policy.kind,
        start_t: start,
        end_t: start + steps as f64 * SIM_STEP_S,
        step_s: SIM_STEP_S,
        battery_capacity_wh: state.battery_capacity_wh,
        reserve_wh: state.reserve_wh,
        epochs,
        depletion_events,
        reserve_breaches,
        min_stored_wh: min_stored,
        final_soc: state.soc,
        bytes_sent,
        mean_accuracy: if steps > 0 { acc_sum / steps as f64 } else { 0.0 },
        soc_series: series.iter().map(|r| r.soc).collect(),
        series,
    })
}

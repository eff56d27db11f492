//! Configuration evaluation and Pareto-front extraction over the discrete
//! configuration space.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stratum::{
    estimate_bitrate, estimate_power, BitrateParams, Configuration, ParamSets, PowerModel, Route,
    StratumConfig, StratumLayout,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricTriple {
    /// Uplink usage B(c), bits/s. Zero for edge-routed configurations.
    pub bandwidth_bps: f64,
    /// Power P(c), Watts.
    pub power_w: f64,
    /// Analytics performance A(c) in `[0, 1]`.
    pub accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DominanceRule {
    /// `c'` excludes `c` only when it is strictly better on all three
    /// metrics at once.
    #[default]
    StrictAll,
    /// Conventional Pareto dominance: no worse on every metric and strictly
    /// better on at least one.
    Standard,
}

impl DominanceRule {
    /// Does `a` dominate `b`?
    #[inline]
    pub fn dominates(self, a: &MetricTriple, b: &MetricTriple) -> bool {
        match self {
            DominanceRule::StrictAll => {
                a.bandwidth_bps < b.bandwidth_bps && a.power_w < b.power_w && a.accuracy > b.accuracy
            }
            DominanceRule::Standard => {
                a.bandwidth_bps <= b.bandwidth_bps
                    && a.power_w <= b.power_w
                    && a.accuracy >= b.accuracy
                    && (a.bandwidth_bps < b.bandwidth_bps || a.power_w < b.power_w || a.accuracy > b.accuracy)
            }
        }
    }
}

impl std::str::FromStr for DominanceRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict-all" => Ok(Self::StrictAll),
            "standard" => Ok(Self::Standard),
            _ => Err(Error::invalid(format!("unknown dominance rule `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoMember {
    pub key: String,
    pub config: Configuration,
    pub metrics: MetricTriple,
}

impl ParetoMember {
    pub fn new(config: Configuration, metrics: MetricTriple) -> Self {
        Self {
            key: config.key(),
            config,
            metrics,
        }
    }
}

/// Output order: ascending bandwidth, then power, then descending accuracy,
/// then key.
pub fn member_order(a: &ParetoMember, b: &ParetoMember) -> Ordering {
    a.metrics
        .bandwidth_bps
        .total_cmp(&b.metrics.bandwidth_bps)
        .then(a.metrics.power_w.total_cmp(&b.metrics.power_w))
        .then(b.metrics.accuracy.total_cmp(&a.metrics.accuracy))
        .then_with(|| a.key.cmp(&b.key))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoSet {
    pub rule: DominanceRule,
    pub members: Vec<ParetoMember>,
}

/// Extracts the non-dominated members of `evaluated`.
///
/// Candidates are visited in [`member_order`]; under either rule every
/// dominator precedes what it dominates, and dominance is transitive, so it
/// suffices to test each candidate against the members accepted so far.
pub fn pareto_front(evaluated: &[ParetoMember], rule: DominanceRule) -> ParetoSet {
    let mut order: Vec<&ParetoMember> = evaluated.iter().collect();
    order.sort_by(|a, b| member_order(a, b));
    let mut members: Vec<ParetoMember> = Vec::new();
    for cand in order {
        if !members.iter().any(|m| rule.dominates(&m.metrics, &cand.metrics)) {
            members.push(cand.clone());
        }
    }
    ParetoSet { rule, members }
}

/// Offline accuracy table keyed by route and per-stratum configuration.
#[derive(Debug, Clone, Default)]
pub struct AccuracyProfile {
    entries: HashMap<String, f64>,
    /// (route, filter) -> (downscale, fps) -> accuracy, for interpolation.
    grid: HashMap<(Route, bool), BTreeMap<(u32, u32), f64>>,
    pub interpolate: bool,
}

/// `{route}/d{downscale}/f{fps}/{on|off}`
pub fn profile_key(route: Route, s: &StratumConfig) -> String {
    format!("{route}/{}", s.key())
}

fn parse_profile_key(key: &str) -> Option<(Route, StratumConfig)> {
    let (route, rest) = key.split_once('/')?;
    Some((route.parse().ok()?, rest.parse().ok()?))
}

impl AccuracyProfile {
    pub fn new(interpolate: bool) -> Self {
        Self {
            interpolate,
            ..Default::default()
        }
    }

    pub fn insert(&mut self, route: Route, s: StratumConfig, accuracy: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&accuracy) {
            return Err(Error::invalid(format!("accuracy {accuracy} outside [0,1]")));
        }
        self.entries.insert(profile_key(route, &s), accuracy);
        self.grid
            .entry((route, s.filter_on))
            .or_default()
            .insert((s.downscale, s.fps), accuracy);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parses `stratum_key,accuracy` CSV. The header is row 0; data rows are
    /// numbered from 1.
    pub fn from_csv_reader<R: Read>(reader: R, name: &str, interpolate: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let bad = |row: usize, reason: String| Error::MalformedRow {
            file: name.to_string(),
            row,
            reason,
        };
        let mut records = rdr.records();
        let header = match records.next() {
            None => return Err(bad(0, "empty profile: missing `stratum_key,accuracy` header".into())),
            Some(r) => r.map_err(|e| bad(0, e.to_string()))?,
        };
        if header.len() != 2 || &header[0] != "stratum_key" || &header[1] != "accuracy" {
            return Err(bad(0, format!("expected header `stratum_key,accuracy`, got `{}`", header.iter().collect::<Vec<_>>().join(","))));
        }
        let mut profile = Self::new(interpolate);
        for (i, rec) in records.enumerate() {
            let row = i + 1;
            let rec = rec.map_err(|e| bad(row, e.to_string()))?;
            if rec.len() != 2 {
                return Err(bad(row, format!("expected 2 fields, got {}", rec.len())));
            }
            let (route, s) = parse_profile_key(&rec[0])
                .ok_or_else(|| bad(row, format!("malformed key `{}`", &rec[0])))?;
            let a: f64 = rec[1]
                .parse()
                .map_err(|_| bad(row, format!("accuracy `{}` is not a number", &rec[1])))?;
            if !(0.0..=1.0).contains(&a) {
                return Err(bad(row, format!("accuracy {a} outside [0,1]")));
            }
            profile.insert(route, s, a)?;
        }
        if profile.is_empty() {
            return Err(bad(0, "profile has no data rows".into()));
        }
        Ok(profile)
    }

    pub fn load(path: impl AsRef<Path>, interpolate: bool) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file, &path.display().to_string(), interpolate)
    }

    pub fn to_csv(&self) -> String {
        let mut keys: Vec<_> = self.entries.iter().collect();
        keys.sort_by(|a, b| a.0.cmp(b.0));
        let mut out = String::from("stratum_key,accuracy\n");
        for (k, v) in keys {
            out.push_str(&format!("{k},{v}\n"));
        }
        out
    }

    /// Exact lookup, falling back to interpolation when enabled.
    pub fn accuracy(&self, route: Route, s: &StratumConfig) -> Result<f64> {
        if let Some(&a) = self.entries.get(&profile_key(route, s)) {
            return Ok(a);
        }
        if self.interpolate {
            return self.interpolated(route, s.filter_on, s.downscale as f64, s.fps as f64);
        }
        Err(Error::ProfileMiss(profile_key(route, s)))
    }

    /// Bilinear interpolation over (downscale, fps) between the nearest
    /// profiled grid points; all bracketing corners must exist.
    pub fn interpolated(&self, route: Route, filter_on: bool, downscale: f64, fps: f64) -> Result<f64> {
        let miss = || {
            Error::ProfileMiss(format!(
                "{route}/d{downscale}/f{fps}/{} (no bracketing profile points)",
                if filter_on { "on" } else { "off" }
            ))
        };
        let grid = self.grid.get(&(route, filter_on)).ok_or_else(miss)?;
        let ds: BTreeSet<u32> = grid.keys().map(|k| k.0).collect();
        let fs: BTreeSet<u32> = grid.keys().map(|k| k.1).collect();
        let bracket = |set: &BTreeSet<u32>, v: f64| -> Option<(u32, u32)> {
            let lo = set.iter().rev().find(|&&x| x as f64 <= v)?;
            let hi = set.iter().find(|&&x| x as f64 >= v)?;
            Some((*lo, *hi))
        };
        let (d0, d1) = bracket(&ds, downscale).ok_or_else(miss)?;
        let (f0, f1) = bracket(&fs, fps).ok_or_else(miss)?;
        let at = |d, f| grid.get(&(d, f)).copied().ok_or_else(miss);
        let frac = |lo: u32, hi: u32, v: f64| if hi == lo { 0.0 } else { (v - lo as f64) / (hi - lo) as f64 };
        let td = frac(d0, d1, downscale);
        let tf = frac(f0, f1, fps);
        let lerp = |a: f64, b: f64, t: f64| if t == 0.0 { a } else { a + (b - a) * t };
        let lo = lerp(at(d0, f0)?, if tf == 0.0 { 0.0 } else { at(d0, f1)? }, tf);
        if td == 0.0 {
            return Ok(lo);
        }
        let hi = lerp(at(d1, f0)?, if tf == 0.0 { 0.0 } else { at(d1, f1)? }, tf);
        Ok(lerp(lo, hi, td))
    }
}

/// Everything needed to score a configuration.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    pub layout: &'a StratumLayout,
    pub profile: &'a AccuracyProfile,
    pub power: &'a PowerModel,
    pub rate: &'a BitrateParams,
}

impl Evaluator<'_> {
    /// B from the data-rate model (zero when edge-routed), P from the power
    /// model, A as the area-weighted mean of per-stratum profile accuracy.
    pub fn evaluate(&self, c: &Configuration) -> Result<MetricTriple> {
        if c.per_stratum.len() != self.layout.len() {
            return Err(Error::invalid(format!(
                "configuration has {} strata, layout has {}",
                c.per_stratum.len(),
                self.layout.len()
            )));
        }
        let stream = estimate_bitrate(self.layout, c, self.rate);
        let power_w = estimate_power(c, self.power, stream);
        let bandwidth_bps = match c.route {
            Route::Edge => 0.0,
            Route::Cloud => stream,
        };
        let total_area: f64 = self.layout.rects.iter().map(|r| r.area() as f64).sum();
        let mut accuracy = 0.0;
        for (r, s) in self.layout.rects.iter().zip(&c.per_stratum) {
            accuracy += self.profile.accuracy(c.route, s)? * r.area() as f64 / total_area;
        }
        Ok(MetricTriple {
            bandwidth_bps,
            power_w,
            accuracy: accuracy.clamp(0.0, 1.0),
        })
    }
}

pub fn evaluate_config(
    c: &Configuration,
    layout: &StratumLayout,
    profile: &AccuracyProfile,
    power: &PowerModel,
    rate: &BitrateParams,
) -> Result<MetricTriple> {
    Evaluator {
        layout,
        profile,
        power,
        rate,
    }
    .evaluate(c)
}

pub const DEFAULT_SEARCH_CAP: u64 = 1_000_000;

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub evaluated: Vec<ParetoMember>,
    pub front: ParetoSet,
    /// Lowest-power edge-routed configuration in the space; among equals,
    /// the most accurate.
    pub fallback: Option<ParetoMember>,
}

/// Every configuration of `sets` over `n` strata, in mixed-radix order.
pub fn enumerate_space(sets: &ParamSets, n: usize) -> impl Iterator<Item = Configuration> + '_ {
    let choices = sets.stratum_choices();
    let radix = choices.len();
    let per_route = (radix as u128).pow(n as u32);
    sets.routes.iter().flat_map(move |&route| {
        let choices = choices.clone();
        (0..per_route).map(move |mut idx| {
            let mut per_stratum = Vec::with_capacity(n);
            for _ in 0..n {
                per_stratum.push(choices[(idx % radix as u128) as usize]);
                idx /= radix as u128;
            }
            per_stratum.reverse();
            Configuration { route, per_stratum }
        })
    })
}

/// Evaluates every configuration and extracts the front. Refuses spaces
/// larger than `cap`.
pub fn exhaustive_search(
    eval: &Evaluator<'_>,
    sets: &ParamSets,
    rule: DominanceRule,
    cap: u64,
) -> Result<SearchResult> {
    sets.validate()?;
    let n = eval.layout.len();
    let size = sets.space_size(n);
    if size > cap as u128 {
        return Err(Error::SearchSpaceTooLarge { size, cap });
    }
    let mut evaluated = Vec::with_capacity(size as usize);
    for c in enumerate_space(sets, n) {
        let m = eval.evaluate(&c)?;
        evaluated.push(ParetoMember::new(c, m));
    }
    let front = pareto_front(&evaluated, rule);
    let fallback = evaluated
        .iter()
        .filter(|m| m.config.route == Route::Edge)
        .min_by(|a, b| {
            a.metrics
                .power_w
                .total_cmp(&b.metrics.power_w)
                .then(a.metrics.bandwidth_bps.total_cmp(&b.metrics.bandwidth_bps))
                .then(b.metrics.accuracy.total_cmp(&a.metrics.accuracy))
                .then_with(|| a.key.cmp(&b.key))
        })
        .cloned();
    Ok(SearchResult {
        evaluated,
        front,
        fallback,
    })
}

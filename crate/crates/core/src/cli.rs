//! Command-line surface. Every JSON output embeds the resolved
//! [`RunConfig`] under `run_config`.
//!
//! Domain errors exit with 1. Usage and I/O errors exit with 2.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::channels::SavingLedger;
use crate::energy::{DishMode, EnergyState, EnvTraces};
use crate::error::{Error, Result};
use crate::frame_io::{read_clip, write_clip, SonarFrame};
use crate::pareto::{
    exhaustive_search, AccuracyProfile, DominanceRule, Evaluator, ParetoMember, ParetoSet, DEFAULT_SEARCH_CAP,
};
use crate::pipeline::{PreprocessParams, Preprocessor};
use crate::scheduler::{
    energy_budget, plan_epoch, simulate_day, ModelConstants, PolicyKind, PolicyParams, SimulationReport,
};
use crate::stratum::{split_strata, ParamSets, Route, StratumLayout};

#[derive(Debug, Parser)]
#[command(name = "salina", version, about = "Sonar preprocessing and energy-aware streaming planner")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CommonArgs {
    /// Seed for stochastic models; falls back to SALINA_SEED.
    #[arg(long, env = "SALINA_SEED")]
    pub seed: Option<u64>,
    /// JSON file with model constants (power, bitrate, link, dish, load, PV, battery).
    #[arg(long = "power-model")]
    pub model_file: Option<PathBuf>,
    #[arg(long)]
    pub mog_k: Option<usize>,
    #[arg(long)]
    pub mog_alpha: Option<f64>,
    #[arg(long)]
    pub mog_sigma: Option<f64>,
    #[arg(long)]
    pub mog_bgratio: Option<f64>,
    #[arg(long)]
    pub gf_radius: Option<u32>,
    #[arg(long)]
    pub gf_epsilon: Option<f64>,
    #[arg(long)]
    pub canny_low: Option<f64>,
    #[arg(long)]
    pub canny_high: Option<f64>,
    #[arg(long)]
    pub motion_threshold: Option<f64>,
    #[arg(long)]
    pub bpp: Option<f64>,
    #[arg(long)]
    pub codec_ratio: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Runs the full frame chain over a clip and writes its planes.
    Preprocess {
        /// `.sfr` container or a directory of PGM frames.
        clip: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Motion gate only; prints the saving ledger.
    Motion {
        clip: PathBuf,
        /// Optional per-frame CSV (`frame_idx,edge_density,is_motion`).
        #[arg(long)]
        per_frame: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Exhaustive configuration profiling and Pareto-front extraction.
    Profile {
        #[arg(long)]
        width: u32,
        #[arg(long)]
        height: u32,
        /// CSV with header `stratum_key,accuracy`.
        #[arg(long)]
        profile: PathBuf,
        #[arg(long, default_value = "strict-all")]
        rule: DominanceRule,
        #[arg(long)]
        interpolate: bool,
        #[arg(long, default_value_t = DEFAULT_SEARCH_CAP)]
        cap: u64,
        #[arg(long, value_delimiter = ',')]
        downscales: Option<Vec<u32>>,
        #[arg(long = "fps-set", value_delimiter = ',')]
        fps_set: Option<Vec<u32>>,
        /// Filter toggles, `off` and/or `on`.
        #[arg(long, value_delimiter = ',')]
        filters: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',')]
        routes: Option<Vec<Route>>,
        #[arg(long, short)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// One planning decision from JSON inputs.
    Plan {
        /// `front.json` written by `profile`.
        #[arg(long)]
        front: PathBuf,
        /// JSON with `bandwidth_mbps` and either `budget_w` or an `energy` block.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        policy: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Day-long simulation of the planner against environment traces.
    Simulate {
        /// Trace CSV `t_s,precip_mm_h,cloud_class,pv_w[,measured_mbps]`.
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        front: PathBuf,
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Ignore all constraints and always run the most accurate member.
        #[arg(long)]
        always_max: bool,
        /// Draw dish power stochastically (needs a seed).
        #[arg(long)]
        stochastic_dish: bool,
        #[arg(long, short)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Human-readable summary of any JSON this tool wrote.
    Report {
        input: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
}

/// Resolved inputs and parameters of one invocation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub inputs: BTreeMap<String, String>,
    pub model_file: Option<String>,
    pub output: Option<String>,
    pub seed: Option<u64>,
    pub preprocess: PreprocessParams,
    pub models: ModelConstants,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl RunConfig {
    fn resolve(subcommand: &str, common: &CommonArgs) -> Result<Self> {
        let mut models = match &common.model_file {
            Some(p) => ModelConstants::load(p)?,
            None => ModelConstants::default(),
        };
        let mut pre = PreprocessParams::default();
        macro_rules! set {
            ($dst:expr, $src:expr) => {
                if let Some(v) = $src {
                    $dst = v;
                }
            };
        }
        set!(pre.mog.k, common.mog_k);
        set!(pre.mog.alpha, common.mog_alpha);
        set!(pre.mog.match_sigma, common.mog_sigma);
        set!(pre.mog.background_ratio, common.mog_bgratio);
        set!(pre.guided.radius, common.gf_radius);
        set!(pre.guided.epsilon, common.gf_epsilon);
        set!(pre.motion.canny.low, common.canny_low);
        set!(pre.motion.canny.high, common.canny_high);
        set!(pre.motion.density_threshold, common.motion_threshold);
        set!(models.bitrate.bits_per_pixel, common.bpp);
        set!(models.bitrate.codec_ratio, common.codec_ratio);
        pre.validate()?;
        models.validate()?;
        Ok(Self {
            subcommand: subcommand.into(),
            inputs: BTreeMap::new(),
            model_file: common.model_file.as_ref().map(|p| p.display().to_string()),
            output: None,
            seed: common.seed,
            preprocess: pre,
            models,
            extra: BTreeMap::new(),
        })
    }

    fn input(mut self, name: &str, path: &Path) -> Self {
        self.inputs.insert(name.into(), path.display().to_string());
        self
    }

    fn output(mut self, path: &Path) -> Self {
        self.output = Some(path.display().to_string());
        self
    }
}

/// Failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self {
            code: if e.is_io() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError {
        code: 2,
        message: msg.into(),
    }
}

fn require_exists(path: &Path) -> std::result::Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(usage(format!("input not found: {}", path.display())))
    }
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn to_json(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    s.push('\n');
    s
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        context: path.display().to_string(),
        source: e,
    })
}

/// The `front.json` document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrontFile {
    pub kind: String,
    pub layout: StratumLayout,
    pub space_size: u64,
    pub front: ParetoSet,
    pub fallback: Option<ParetoMember>,
    pub run_config: RunConfig,
}

fn load_front(path: &Path) -> std::result::Result<(ParetoSet, ParetoMember), CliError> {
    require_exists(path)?;
    let f: FrontFile = read_json(path)?;
    if f.front.members.is_empty() {
        return Err(Error::invalid(format!("{}: empty front", path.display())).into());
    }
    let fallback = f
        .fallback
        .ok_or_else(|| CliError::from(Error::invalid("front file has no edge fallback configuration")))?;
    Ok((f.front, fallback))
}

fn load_policy(path: Option<&Path>) -> std::result::Result<PolicyParams, CliError> {
    match path {
        Some(p) => {
            require_exists(p)?;
            let pol: PolicyParams = read_json(p)?;
            pol.validate()?;
            Ok(pol)
        }
        None => Ok(PolicyParams::default()),
    }
}

fn run_pipeline(
    clip_path: &Path,
    params: PreprocessParams,
    mut each: impl FnMut(&SonarFrame, &crate::pipeline::FrameOutput) -> Result<()>,
) -> Result<(SavingLedger, f32, u32, u32)> {
    let clip = read_clip(clip_path)?;
    let mut pre = Preprocessor::new(clip.width.max(1), clip.height.max(1), params)?;
    for f in &clip.frames {
        let out = pre.process(f)?;
        each(f, &out)?;
    }
    Ok((pre.ledger(), clip.fps, clip.width, clip.height))
}

fn cmd_preprocess(clip: &Path, out: &Path, common: &CommonArgs) -> std::result::Result<(), CliError> {
    require_exists(clip)?;
    let rc = RunConfig::resolve("preprocess", common)?.input("clip", clip).output(out);
    let mut channel_frames = Vec::new();
    let mut mask_frames = Vec::new();
    let (ledger, fps, w, h) = run_pipeline(clip, rc.preprocess, |f, o| {
        let (w, h) = (f.width, f.height);
        for (k, plane) in [&o.channels.ch1, &o.channels.ch2, &o.channels.ch3].into_iter().enumerate() {
            let idx = f.index * 3 + k as u64;
            channel_frames.push(SonarFrame::new(w, h, plane.to_u8(), idx, f.timestamp)?);
        }
        mask_frames.push(SonarFrame::new(w, h, o.mask.to_u8(), f.index, f.timestamp)?);
        Ok(())
    })?;
    create_dir(out)?;
    write_clip(out.join("channels.sfr"), &channel_frames, fps * 3.0)?;
    write_clip(out.join("mask.sfr"), &mask_frames, fps)?;
    let doc = json!({
        "kind": "ledger",
        "width": w,
        "height": h,
        "ledger": ledger,
        "run_config": rc,
    });
    write_file(&out.join("ledger.json"), to_json(&doc))?;
    Ok(())
}

fn cmd_motion(clip: &Path, per_frame: Option<&Path>, common: &CommonArgs) -> std::result::Result<(), CliError> {
    require_exists(clip)?;
    let rc = RunConfig::resolve("motion", common)?.input("clip", clip);
    let mut rows = String::from("frame_idx,edge_density,is_motion\n");
    let (ledger, ..) = run_pipeline(clip, rc.preprocess, |f, o| {
        rows.push_str(&format!("{},{},{}\n", f.index, o.motion.edge_density, u8::from(o.motion.is_motion)));
        Ok(())
    })?;
    if let Some(p) = per_frame {
        write_file(p, rows)?;
    }
    print!("{}", to_json(&json!({"kind": "ledger", "ledger": ledger, "run_config": rc})));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_profile(
    width: u32,
    height: u32,
    profile: &Path,
    rule: DominanceRule,
    interpolate: bool,
    cap: u64,
    sets: ParamSets,
    out: &Path,
    common: &CommonArgs,
) -> std::result::Result<(), CliError> {
    require_exists(profile)?;
    let mut rc = RunConfig::resolve("profile", common)?.input("profile", profile).output(out);
    rc.extra.insert("width".into(), json!(width));
    rc.extra.insert("height".into(), json!(height));
    rc.extra.insert("rule".into(), json!(rule));
    rc.extra.insert("interpolate".into(), json!(interpolate));
    rc.extra.insert("cap".into(), json!(cap));
    rc.extra.insert("param_sets".into(), json!(sets));
    if width == 0 || height == 0 {
        return Err(usage("frame width and height must be positive"));
    }
    let table = AccuracyProfile::load(profile, interpolate)?;
    let layout = split_strata(width, height);
    let eval = Evaluator {
        layout: &layout,
        profile: &table,
        power: &rc.models.power,
        rate: &rc.models.bitrate,
    };
    let result = exhaustive_search(&eval, &sets, rule, cap)?;
    let mut points = String::from("config_key,B_bps,P_w,A\n");
    for m in &result.evaluated {
        points.push_str(&format!(
            "{},{},{},{}\n",
            m.key, m.metrics.bandwidth_bps, m.metrics.power_w, m.metrics.accuracy
        ));
    }
    let doc = FrontFile {
        kind: "front".into(),
        space_size: result.evaluated.len() as u64,
        layout,
        front: result.front,
        fallback: result.fallback,
        run_config: rc,
    };
    create_dir(out)?;
    write_file(&out.join("points.csv"), points)?;
    let text = serde_json::to_string_pretty(&doc).expect("front serializes") + "\n";
    write_file(&out.join("front.json"), text)?;
    Ok(())
}

/// `plan --input` document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanInput {
    pub bandwidth_mbps: f64,
    #[serde(default)]
    pub budget_w: Option<f64>,
    #[serde(default)]
    pub energy: Option<PlanEnergy>,
    #[serde(default)]
    pub epoch_start: f64,
}

/// Energy inputs from which the budget is derived.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanEnergy {
    pub soc: f64,
    /// One-minute PV forecast, Watts.
    pub forecast_w: Vec<f64>,
    pub horizon_s: f64,
}

fn cmd_plan(front: &Path, input: &Path, policy: Option<&Path>, common: &CommonArgs) -> std::result::Result<(), CliError> {
    let (front_set, fallback) = load_front(front)?;
    require_exists(input)?;
    let mut rc = RunConfig::resolve("plan", common)?.input("front", front).input("input", input);
    if let Some(p) = policy {
        rc = rc.input("policy", p);
    }
    let pol = load_policy(policy)?;
    let plan_in: PlanInput = read_json(input)?;
    let (budget_w, low_energy) = match (plan_in.budget_w, &plan_in.energy) {
        (Some(b), _) => (b, false),
        (None, Some(e)) => {
            let state = EnergyState {
                battery_capacity_wh: rc.models.battery.capacity_wh,
                soc: e.soc,
                reserve_wh: pol.reserve_wh,
            };
            state.validate()?;
            let b = energy_budget(&state, &e.forecast_w, rc.models.load.fixed_w(), e.horizon_s, pol.reserve_wh)?;
            (b.watts, b.low_energy)
        }
        (None, None) => {
            return Err(Error::MalformedRow {
                file: input.display().to_string(),
                row: 0,
                reason: "needs `budget_w` or an `energy` block".into(),
            }
            .into())
        }
    };
    let fallback = pol.fallback.clone().unwrap_or(fallback);
    let decision = plan_epoch(&front_set, plan_in.bandwidth_mbps, budget_w, &pol, &fallback, plan_in.epoch_start);
    let doc = json!({
        "kind": "decision",
        "budget_w": budget_w,
        "low_energy": low_energy,
        "bandwidth_mbps": plan_in.bandwidth_mbps,
        "decision": decision,
        "policy": pol,
        "run_config": rc,
    });
    print!("{}", to_json(&doc));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    traces: &Path,
    front: &Path,
    policy: Option<&Path>,
    always_max: bool,
    stochastic_dish: bool,
    out: &Path,
    common: &CommonArgs,
) -> std::result::Result<(), CliError> {
    require_exists(traces)?;
    let (front_set, fallback) = load_front(front)?;
    let mut rc = RunConfig::resolve("simulate", common)?
        .input("traces", traces)
        .input("front", front)
        .output(out);
    if let Some(p) = policy {
        rc = rc.input("policy", p);
    }
    let mut pol = load_policy(policy)?;
    if always_max {
        pol.kind = PolicyKind::AlwaysMax;
    }
    if stochastic_dish {
        let seed = common
            .seed
            .ok_or_else(|| usage("--stochastic-dish needs --seed or SALINA_SEED"))?;
        rc.models.dish.mode = DishMode::Stochastic { seed };
    } else if let (DishMode::Stochastic { .. }, Some(seed)) = (rc.models.dish.mode, common.seed) {
        rc.models.dish.mode = DishMode::Stochastic { seed };
    }
    let env = EnvTraces::load(traces)?;
    let report = simulate_day(&env, &front_set, &fallback, &pol, &rc.models)?;
    create_dir(out)?;
    write_file(&out.join("series.csv"), report.series_csv())?;
    let doc = json!({
        "kind": "simulation",
        "report": report,
        "policy": pol,
        "run_config": rc,
    });
    write_file(&out.join("report.json"), to_json(&doc))?;
    Ok(())
}

fn summarize(doc: &serde_json::Value) -> std::result::Result<String, String> {
    let kind = doc.get("kind").and_then(|k| k.as_str()).ok_or("missing `kind` field")?;
    let mut s = String::new();
    match kind {
        "ledger" => {
            let l: SavingLedger = serde_json::from_value(doc["ledger"].clone()).map_err(|e| e.to_string())?;
            s += &format!("frames          {}\n", l.frames_total);
            s += &format!("motion frames   {}\n", l.frames_motion);
            s += &format!("saving ratio    {:.4}\n", l.saving_ratio);
        }
        "front" => {
            let f: FrontFile = serde_json::from_value(doc.clone()).map_err(|e| e.to_string())?;
            s += &format!("strata          {}\n", f.layout.rects.len());
            s += &format!("configurations  {}\n", f.space_size);
            s += &format!("front size      {} ({:?})\n", f.front.members.len(), f.front.rule);
            if let Some(best) = f
                .front
                .members
                .iter()
                .max_by(|a, b| a.metrics.accuracy.total_cmp(&b.metrics.accuracy))
            {
                s += &format!(
                    "most accurate   {} A={:.3} B={:.0} bps P={:.2} W\n",
                    best.key, best.metrics.accuracy, best.metrics.bandwidth_bps, best.metrics.power_w
                );
            }
            if let Some(fb) = &f.fallback {
                s += &format!("fallback        {} P={:.2} W\n", fb.key, fb.metrics.power_w);
            }
        }
        "decision" => {
            let d = &doc["decision"];
            s += &format!("chosen          {}\n", d["chosen"]["key"].as_str().unwrap_or("?"));
            s += &format!("fallback used   {}\n", d["fallback_used"]);
            s += &format!("feasible        {}\n", d["feasible_count"]);
            s += &format!("budget          {} W\n", doc["budget_w"]);
        }
        "simulation" => {
            let r: SimulationReport = serde_json::from_value(doc["report"].clone()).map_err(|e| e.to_string())?;
            let fallback_epochs = r.epochs.iter().filter(|e| e.decision.fallback_used).count();
            s += &format!("policy          {:?}\n", r.policy);
            s += &format!("span            {} .. {} s\n", r.start_t, r.end_t);
            s += &format!("epochs          {} ({} on fallback)\n", r.epochs.len(), fallback_epochs);
            s += &format!("depletions      {}\n", r.depletion_events.len());
            s += &format!("reserve breaches {}\n", r.reserve_breaches);
            s += &format!("min stored      {:.1} Wh\n", r.min_stored_wh);
            s += &format!("final soc       {:.3}\n", r.final_soc);
            s += &format!("bytes sent      {:.0}\n", r.bytes_sent);
            s += &format!("mean accuracy   {:.4}\n", r.mean_accuracy);
        }
        other => return Err(format!("unknown document kind `{other}`")),
    }
    Ok(s)
}

fn cmd_report(input: &Path) -> std::result::Result<(), CliError> {
    require_exists(input)?;
    let doc: serde_json::Value = read_json(input)?;
    let text = summarize(&doc).map_err(|m| usage(format!("{}: {m}", input.display())))?;
    print!("{text}");
    Ok(())
}

fn parse_filters(v: &[String]) -> std::result::Result<Vec<bool>, CliError> {
    v.iter()
        .map(|s| match s.as_str() {
            "on" => Ok(true),
            "off" => Ok(false),
            _ => Err(usage(format!("filter toggle must be `on` or `off`, got `{s}`"))),
        })
        .collect()
}

/// Runs a parsed command.
pub fn execute(cli: Cli) -> std::result::Result<(), CliError> {
    match cli.command {
        Command::Preprocess { clip, out, common } => cmd_preprocess(&clip, &out, &common),
        Command::Motion {
            clip,
            per_frame,
            common,
        } => cmd_motion(&clip, per_frame.as_deref(), &common),
        Command::Profile {
            width,
            height,
            profile,
            rule,
            interpolate,
            cap,
            downscales,
            fps_set,
            filters,
            routes,
            out,
            common,
        } => {
            let mut sets = ParamSets::default();
            if let Some(d) = downscales {
                sets.downscales = d;
            }
            if let Some(f) = fps_set {
                sets.fps = f;
            }
            if let Some(f) = filters {
                sets.filters = parse_filters(&f)?;
            }
            if let Some(r) = routes {
                sets.routes = r;
            }
            cmd_profile(width, height, &profile, rule, interpolate, cap, sets, &out, &common)
        }
        Command::Plan {
            front,
            input,
            policy,
            common,
        } => cmd_plan(&front, &input, policy.as_deref(), &common),
        Command::Simulate {
            traces,
            front,
            policy,
            always_max,
            stochastic_dish,
            out,
            common,
        } => cmd_simulate(&traces, &front, policy.as_deref(), always_max, stochastic_dish, &out, &common),
        Command::Report { input, .. } => cmd_report(&input),
    }
}

/// Parses `args` (including the program name) and runs; returns the exit
/// code.
pub fn run_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn run() -> i32 {
    run_with_args(std::env::args_os())
}

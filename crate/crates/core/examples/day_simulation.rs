//! Simulate a full day on the bundled storm fixture with the reserve policy
//! and with an always-max baseline.
//!
//!     cargo run --release --example day_simulation

use std::path::Path;

use salina::energy::EnvTraces;
use salina::pareto::{exhaustive_search, AccuracyProfile, Evaluator, DEFAULT_SEARCH_CAP};
use salina::scheduler::PolicyKind;
use salina::stratum::ParamSets;
use salina::synth::fixture_models;
use salina::{simulate_day, split_strata, DominanceRule, PolicyParams};

fn main() -> salina::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let traces = EnvTraces::load(fixtures.join("storm_day.csv"))?;
    let profile = AccuracyProfile::load(fixtures.join("profile.csv"), false)?;
    let models = fixture_models();

    let layout = split_strata(200, 600);
    let eval = Evaluator {
        layout: &layout,
        profile: &profile,
        power: &models.power,
        rate: &models.bitrate,
    };
    let search = exhaustive_search(&eval, &ParamSets::default(), DominanceRule::StrictAll, DEFAULT_SEARCH_CAP)?;
    let fallback = search.fallback.expect("the default sets include the edge route");

    for kind in [PolicyKind::Reserve, PolicyKind::AlwaysMax] {
        let policy = PolicyParams {
            kind,
            ..Default::default()
        };
        let r = simulate_day(&traces, &search.front, &fallback, &policy, &models)?;
        let on_fallback = r.epochs.iter().filter(|e| e.decision.fallback_used).count();
        println!("{kind:?}");
        println!("  depletion events   {}", r.depletion_events.len());
        println!("  min stored energy  {:.0} Wh (reserve {:.0} Wh)", r.min_stored_wh, r.reserve_wh);
        println!("  final soc          {:.3}", r.final_soc);
        println!("  epochs on fallback {on_fallback} of {}", r.epochs.len());
        println!("  data sent          {:.1} GB", r.bytes_sent / 1e9);
        println!("  mean accuracy      {:.3}", r.mean_accuracy);
    }
    Ok(())
}

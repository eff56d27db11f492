//! Profile the configuration space of a tall frame against a synthetic
//! accuracy table and list the efficiency front under both dominance rules.
//!
//!     cargo run --release --example pareto_profile

use salina::pareto::{exhaustive_search, Evaluator, DEFAULT_SEARCH_CAP};
use salina::stratum::{BitrateParams, ParamSets};
use salina::synth::synth_profile;
use salina::{split_strata, DominanceRule, PowerModel};

fn main() -> salina::Result<()> {
    let sets = ParamSets::default();
    let profile = synth_profile(&sets)?;
    let layout = split_strata(128, 256);
    let power = PowerModel::default();
    let rate = BitrateParams::default();
    let eval = Evaluator {
        layout: &layout,
        profile: &profile,
        power: &power,
        rate: &rate,
    };

    for rule in [DominanceRule::StrictAll, DominanceRule::Standard] {
        let r = exhaustive_search(&eval, &sets, rule, DEFAULT_SEARCH_CAP)?;
        println!("{rule:?}: {} of {} configurations on the front", r.front.members.len(), r.evaluated.len());
        if let Some(fb) = &r.fallback {
            println!("  fallback {} at {:.2} W, A={:.3}", fb.key, fb.metrics.power_w, fb.metrics.accuracy);
        }
    }

    let r = exhaustive_search(&eval, &sets, DominanceRule::Standard, DEFAULT_SEARCH_CAP)?;
    let mut front = r.front.members;
    front.sort_by(|a, b| a.metrics.power_w.total_cmp(&b.metrics.power_w));
    println!("\nlowest-power standard front members:");
    for m in front.iter().take(12) {
        println!(
            "  {:<34} B={:>8.3} Mbps  P={:>6.2} W  A={:.3}",
            m.key,
            m.metrics.bandwidth_bps / 1e6,
            m.metrics.power_w,
            m.metrics.accuracy
        );
    }
    Ok(())
}

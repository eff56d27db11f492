//! Split a tall frame into near-square strata and price a few
//! configurations in bandwidth and power.
//!
//!     cargo run --example strata_bitrate -- 200 600

use salina::stratum::{estimate_bitrate, estimate_power, BitrateParams};
use salina::{split_strata, Configuration, PowerModel, Route, StratumConfig};

fn main() {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<u32>().expect("width and height are integers"));
    let (w, h) = (args.next().unwrap_or(200), args.next().unwrap_or(600));
    let layout = split_strata(w, h);
    println!("{w}x{h} splits into {} strata:", layout.len());
    for r in &layout.rects {
        println!("  x={:<4} y={:<5} {}x{} (aspect {:.2})", r.x, r.y, r.w, r.h, r.aspect());
    }

    let rate = BitrateParams::default();
    let power = PowerModel::default();
    let n = layout.len();
    let full = StratumConfig { downscale: 1, fps: 10, filter_on: true };
    let lean = StratumConfig { downscale: 4, fps: 1, filter_on: false };
    let mut mixed = Configuration::uniform(Route::Cloud, n, lean);
    mixed.per_stratum[n / 2] = full;

    for c in [
        Configuration::uniform(Route::Edge, n, full),
        Configuration::uniform(Route::Cloud, n, full),
        Configuration::uniform(Route::Cloud, n, lean),
        mixed,
    ] {
        let b = estimate_bitrate(&layout, &c, &rate);
        let p = estimate_power(&c, &power, b);
        println!("{:<60} {:>9.3} Mbps {:>7.2} W", c.key(), b / 1e6, p);
    }
}

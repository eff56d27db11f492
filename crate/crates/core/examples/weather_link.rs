//! Walk through a synthetic storm day and print link throughput, dish draw
//! and PV output every two hours.
//!
//!     cargo run --example weather_link

use salina::energy::{DishMode, DishPowerModel, DishPowerSource, LinkModel, PvModel};
use salina::synth::{synth_day, DayKind};

fn main() -> salina::Result<()> {
    let pv = PvModel::default();
    let day = synth_day(DayKind::Storm, &pv, 7)?;
    let link = LinkModel::default();
    let mut dish = DishPowerSource::new(DishPowerModel::default());
    let mut noisy = DishPowerSource::new(DishPowerModel {
        mode: DishMode::Stochastic { seed: 1 },
        ..Default::default()
    });

    println!(" hour  rain mm/h  cloud  link Mbps  dish W  dish W (noisy)  PV W");
    for hour in (0..=24).step_by(2) {
        let t = hour as f64 * 3600.0;
        let w = day.weather_at(t)?;
        let s = day.sample_at(t)?;
        println!(
            "{hour:>5}  {:>9.1}  {:>5}  {:>9.2}  {:>6.1}  {:>14.1}  {:>5.0}",
            w.precipitation,
            format!("{:?}", w.cloud_class),
            link.throughput_at(&w),
            dish.power_at(&w),
            noisy.power_at(&w),
            s.pv_w
        );
    }
    Ok(())
}

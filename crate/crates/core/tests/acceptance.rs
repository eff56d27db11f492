//! Acceptance checks. Each test prints a single `PASS`/`FAIL` line before
//! asserting, so `cargo test --test acceptance -- --nocapture` doubles as a
//! report.

mod common;

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use salina::channels::populate_channels;
use salina::energy::EnvTraces;
use salina::frame_io::SonarFrame;
use salina::guided::{box_mean, guided_filter, GuidedFilterParams, Plane};
use salina::mask::BinaryMask;
use salina::mog::{classify_components, update_components, MogComponent, MogParams};
use salina::pareto::{
    exhaustive_search, pareto_front, AccuracyProfile, DominanceRule, Evaluator, MetricTriple, ParetoMember,
    SearchResult, DEFAULT_SEARCH_CAP,
};
use salina::pipeline::{PreprocessParams, Preprocessor};
use salina::scheduler::{simulate_day, ModelConstants, PolicyKind, PolicyParams, SimulationReport};
use salina::stratum::{
    estimate_bitrate, estimate_power, split_strata, BitrateParams, Configuration, ParamSets, PowerModel, Route,
    StratumConfig, MAX_ASPECT,
};
use salina::synth::{moving_blob_clip, BlobClipParams};

/// Writes to the stderr handle directly so the line survives the test
/// harness's output capture.
fn report(id: u32, name: &str, ok: bool, detail: String) {
    use std::io::Write;
    let line = format!("criterion {id:>2} [{}] {name}: {detail}\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

// ---------------------------------------------------------------------------

#[test]
fn c01_background_model_algebra() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x1001);
    let mut worst_diff: f64 = 0.0;
    let mut worst_sum: f64 = 0.0;
    let mut floor_ok = true;
    let mut updates = 0usize;
    let mut classify_mismatch = 0usize;

    for _chain in 0..100 {
        let params = MogParams {
            k: rng.random_range(1..=5),
            alpha: rng.random_range(0.001..0.2),
            match_sigma: rng.random_range(1.5..3.5),
            background_ratio: rng.random_range(0.5..1.0),
            init_variance: rng.random_range(50.0..400.0),
            init_weight: rng.random_range(0.01..0.2),
            variance_floor: rng.random_range(1.0..16.0),
        };
        let c = MogConst {
            alpha: params.alpha,
            lambda: params.match_sigma,
            init_w: params.init_weight,
            init_var: params.init_variance,
            floor: params.variance_floor,
        };
        let raw: Vec<f64> = (0..params.k).map(|_| rng.random_range(0.01..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut lib: Vec<MogComponent> = raw
            .iter()
            .map(|&w| MogComponent {
                weight: w / total,
                mean: rng.random_range(0.0..255.0),
                variance: rng.random_range(params.variance_floor..400.0),
            })
            .collect();
        for _ in 0..1000 {
            // mostly near an existing mean so matches are common
            let x = if rng.random_bool(0.7) {
                let g = lib[rng.random_range(0..lib.len())];
                (g.mean + rng.random_range(-3.0..3.0) * g.variance.sqrt()).clamp(0.0, 255.0)
            } else {
                rng.random_range(0.0..=255.0f64).round()
            };
            let before: Vec<Gauss> = lib
                .iter()
                .map(|g| Gauss {
                    w: g.weight,
                    mu: g.mean,
                    var: g.variance,
                })
                .collect();
            if updates.is_multiple_of(10) {
                let lib_fg = classify_components(&lib, x, params.background_ratio, params.match_sigma);
                if lib_fg != mog_is_foreground(&before, x, params.background_ratio, params.match_sigma) {
                    classify_mismatch += 1;
                }
            }
            let expect = mog_step(&before, x, &c);
            update_components(&mut lib, x, &params);
            updates += 1;
            for (a, b) in lib.iter().zip(&expect) {
                worst_diff = worst_diff
                    .max((a.weight - b.w).abs())
                    .max((a.mean - b.mu).abs())
                    .max((a.variance - b.var).abs());
            }
            worst_sum = worst_sum.max((lib.iter().map(|g| g.weight).sum::<f64>() - 1.0).abs());
            floor_ok &= lib.iter().all(|g| g.variance >= params.variance_floor);
        }
    }
    let elapsed = t0.elapsed();
    let ok = worst_diff <= 1e-12
        && worst_sum <= 1e-9
        && floor_ok
        && classify_mismatch == 0
        && updates == 100_000
        && elapsed < Duration::from_secs(5);
    report(
        1,
        "background model algebra",
        ok,
        format!(
            "{updates} updates, max |lib-oracle| {worst_diff:.1e}, max |sum w - 1| {worst_sum:.1e}, \
             floor held {floor_ok}, classify mismatches {classify_mismatch}/10000, {elapsed:.2?}"
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------------------

fn random_plane(rng: &mut ChaCha8Rng, w: u32, h: u32) -> Plane {
    Plane::new(w, h, (0..w * h).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
}

#[test]
fn c02_guided_filter_reference() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x2002);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let input = random_plane(&mut rng, 16, 16);
        let guide = if rng.random_bool(0.5) {
            random_plane(&mut rng, 16, 16)
        } else {
            // a guide correlated with the input, closer to real use
            Plane::new(16, 16, input.values.iter().map(|v| 0.7 * v + rng.random_range(0.0..0.3)).collect()).unwrap()
        };
        let params = GuidedFilterParams {
            radius: rng.random_range(1..=4),
            epsilon: 10f64.powf(rng.random_range(-4.0..-1.0)),
        };
        let lib = guided_filter(&input, &guide, &params).unwrap();
        let naive = guided_naive(&input.values, &guide.values, 16, 16, params.radius as usize, params.epsilon);
        for (a, b) in lib.values.iter().zip(&naive) {
            worst = worst.max((a - b).abs());
        }
    }

    let mut worst_analytic: f64 = 0.0;
    for _ in 0..20 {
        let input = random_plane(&mut rng, 16, 16);
        let r = rng.random_range(1..=4);
        // constant guide: output is the box mean of the per-window means
        let constant = Plane::filled(16, 16, rng.random_range(0.0..1.0));
        let p = GuidedFilterParams { radius: r, epsilon: 0.01 };
        let q = guided_filter(&input, &constant, &p).unwrap();
        let expect = box_naive(&box_naive(&input.values, 16, 16, r as usize), 16, 16, r as usize);
        for (a, b) in q.values.iter().zip(&expect) {
            worst_analytic = worst_analytic.max((a - b).abs());
        }
        // self-guided without regularization reproduces the input
        let p0 = GuidedFilterParams { radius: r, epsilon: 0.0 };
        let q = guided_filter(&input, &input, &p0).unwrap();
        for (a, b) in q.values.iter().zip(&input.values) {
            worst_analytic = worst_analytic.max((a - b).abs());
        }
    }
    // the fast box filter also agrees with direct summation
    let probe = random_plane(&mut rng, 16, 16);
    let bm = box_mean(&probe.values, 16, 16, 3);
    let bn = box_naive(&probe.values, 16, 16, 3);
    let box_err = bm.iter().zip(&bn).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let elapsed = t0.elapsed();
    let ok = worst <= 1e-6 && worst_analytic <= 1e-9 && box_err <= 1e-12 && elapsed < Duration::from_secs(10);
    report(
        2,
        "guided filter vs least-squares reference",
        ok,
        format!(
            "100 random cases max err {worst:.1e}, analytic cases max err {worst_analytic:.1e}, {elapsed:.2?}"
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------------------

#[test]
fn c03_channel_population() {
    let gf = GuidedFilterParams::default();
    let mut bit_equal = true;
    let mut empty_zero = true;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x3003 + seed);
        let (w, h) = (rng.random_range(12..48), rng.random_range(12..48));
        let px: Vec<u8> = (0..w * h).map(|_| rng.random()).collect();
        let frame = SonarFrame::new(w, h, px, seed, 0.0).unwrap();
        let mut mask = BinaryMask::new(w, h);
        let density = rng.random_range(0.0..0.5);
        for b in mask.bits.iter_mut() {
            *b = rng.random_bool(density);
        }
        let triple = populate_channels(&frame, &mask, &gf).unwrap();

        // composition from the public building blocks
        let original = Plane::new(w, h, frame.intensities.iter().map(|&v| v as f64 / 255.0).collect()).unwrap();
        let fg = Plane::new(w, h, mask.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()).unwrap();
        let ch2 = guided_filter(&original, &fg, &gf).unwrap();
        let ch3 = guided_filter(&fg, &original, &gf).unwrap();
        let same = |a: &Plane, b: &Plane| a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits());
        bit_equal &= same(&triple.ch1, &original) && same(&triple.ch2, &ch2) && same(&triple.ch3, &ch3);

        let empty = populate_channels(&frame, &BinaryMask::new(w, h), &gf).unwrap();
        empty_zero &= empty.ch3.values.iter().all(|&v| v == 0.0);
    }
    let ok = bit_equal && empty_zero;
    report(
        3,
        "channel population",
        ok,
        format!("100 seeds, composition bit-equal {bit_equal}, ch3 zero on empty masks {empty_zero}"),
    );
    assert!(ok);
}

// ---------------------------------------------------------------------------

#[test]
fn c04_motion_gate() {
    let t0 = Instant::now();
    let p = BlobClipParams::default();
    let (mut hit, mut moving) = (0usize, 0usize);
    let mut worst_err: f64 = 0.0;
    for seed in 0..100 {
        let clip = moving_blob_clip(&p, 0x4004 + seed).unwrap();
        let mut pre = Preprocessor::new(p.width, p.height, PreprocessParams::default()).unwrap();
        for (frame, &truth) in clip.frames.iter().zip(&clip.motion) {
            let out = pre.process(frame).unwrap();
            if truth {
                moving += 1;
                hit += usize::from(out.motion.is_motion);
            }
        }
        worst_err = worst_err.max((pre.ledger().saving_ratio - clip.true_saving_ratio()).abs());
    }
    let recall = hit as f64 / moving as f64;
    let elapsed = t0.elapsed();
    let ok = recall >= 0.99 && worst_err <= 0.02 && elapsed < Duration::from_secs(60);
    report(
        4,
        "motion gate on moving-blob clips",
        ok,
        format!("100 seeds, recall {recall:.4}, worst saving-ratio error {worst_err:.4}, {elapsed:.2?}"),
    );
    assert!(ok);
}

// ---------------------------------------------------------------------------

#[test]
fn c05_stratum_geometry() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5005);
    let mut failures = Vec::new();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for _ in 0..1000 {
        let w: u32 = rng.random_range(8..=512);
        let ratio: f64 = rng.random_range(1.0..=10.0);
        let h = ((w as f64 * ratio).round() as u32).clamp(w, 10 * w);
        let layout = split_strata(w, h);
        let area: u64 = layout.rects.iter().map(|r| r.area()).sum();
        let inside = layout.rects.iter().all(|r| r.w > 0 && r.h > 0 && r.x + r.w <= w && r.y + r.h <= h);
        let disjoint = layout
            .rects
            .iter()
            .enumerate()
            .all(|(i, a)| layout.rects[i + 1..].iter().all(|b| !a.intersects(b)));
        let aspect_ok = layout.rects.iter().all(|r| {
            let a = r.aspect();
            lo = lo.min(a);
            hi = hi.max(a);
            (1.0 / MAX_ASPECT..=MAX_ASPECT).contains(&a)
        });
        if !(area == w as u64 * h as u64 && inside && disjoint && aspect_ok) {
            failures.push((w, h));
        }
    }
    let l = split_strata(200, 600);
    let three = l.rects.len() == 3 && l.rects.iter().all(|r| r.w == 200 && r.h == 200);
    let ok = failures.is_empty() && three;
    report(
        5,
        "stratum geometry",
        ok,
        format!(
            "1000 sampled frames, {} failures, aspect range [{lo:.3}, {hi:.3}], 200x600 -> {} strata of {:?}",
            failures.len(),
            l.rects.len(),
            l.rects.iter().map(|r| (r.w, r.h)).collect::<Vec<_>>()
        ),
    );
    assert!(ok, "{failures:?}");
}

// ---------------------------------------------------------------------------

fn random_members(rng: &mut ChaCha8Rng, n: usize, levels: Option<u32>) -> Vec<ParetoMember> {
    (0..n)
        .map(|i| {
            let mut draw = |scale: f64| match levels {
                Some(l) => rng.random_range(0..l) as f64 * scale / l as f64,
                None => rng.random_range(0.0..scale),
            };
            let m = MetricTriple {
                bandwidth_bps: draw(1e7),
                power_w: draw(100.0),
                accuracy: draw(1.0),
            };
            synthetic_member(i, m)
        })
        .collect()
}

fn front_keys(items: &[ParetoMember], rule: DominanceRule) -> BTreeSet<String> {
    pareto_front(items, rule).members.into_iter().map(|m| m.key).collect()
}

#[test]
fn c06_pareto_front() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6006);
    let mut agree = true;
    let mut sizes = Vec::new();
    // continuous values, then a coarse grid with many ties
    for levels in [None, Some(12)] {
        let items = random_members(&mut rng, 1000, levels);
        for (rule, oracle) in [
            (DominanceRule::StrictAll, strict_all as fn(&MetricTriple, &MetricTriple) -> bool),
            (DominanceRule::Standard, standard),
        ] {
            let got = front_keys(&items, rule);
            let want = front_oracle(&items, oracle);
            sizes.push(got.len());
            agree &= got == want;
        }
    }

    let mut invariant = true;
    for _ in 0..100 {
        let items = random_members(&mut rng, 200, Some(20));
        // strictly increasing maps of each metric
        let (pb, sb, ob) = (rng.random_range(0.3..3.0), rng.random_range(0.1..10.0), rng.random_range(-5.0..5.0));
        let (pp, sp) = (rng.random_range(0.3..3.0), rng.random_range(0.1..10.0));
        let ka = rng.random_range(0.5..5.0);
        let rescaled: Vec<ParetoMember> = items
            .iter()
            .map(|m| {
                let t = m.metrics;
                ParetoMember {
                    metrics: MetricTriple {
                        bandwidth_bps: sb * t.bandwidth_bps.powf(pb) + ob,
                        power_w: sp * t.power_w.powf(pp),
                        accuracy: (ka * t.accuracy).tanh(),
                    },
                    ..m.clone()
                }
            })
            .collect();
        for rule in [DominanceRule::StrictAll, DominanceRule::Standard] {
            invariant &= front_keys(&items, rule) == front_keys(&rescaled, rule);
        }
    }
    let ok = agree && invariant;
    report(
        6,
        "Pareto front vs all-pairs oracle",
        ok,
        format!(
            "1000 triples x 2 value regimes x 2 rules agree {agree} (front sizes {sizes:?}), \
             100 monotone rescalings invariant {invariant}"
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------------------

#[test]
fn c07_power_constants() {
    let model = PowerModel::default();
    let rate = BitrateParams::default();
    let full = StratumConfig {
        downscale: 1,
        fps: 15,
        filter_on: false,
    };
    let mut values = Vec::new();
    let mut ok = true;
    for (n, edge_expect, cloud_expect) in [(1usize, 9.34, 50.83), (2, 9.68, 53.39)] {
        let layout = split_strata(200, 200 * n as u32);
        let edge = Configuration::uniform(Route::Edge, n, full);
        let cloud = Configuration::uniform(Route::Cloud, n, full);
        let pe = estimate_power(&edge, &model, estimate_bitrate(&layout, &edge, &rate));
        let pc = estimate_power(&cloud, &model, estimate_bitrate(&layout, &cloud, &rate));
        ok &= (pe - edge_expect).abs() <= 0.01 && (pc - cloud_expect).abs() <= 0.01;
        values.push(format!("{n} stratum: edge {pe:.2} W, cloud {pc:.2} W"));
    }
    report(7, "power constants", ok, values.join("; "));
    assert!(ok);
}

// ---------------------------------------------------------------------------

fn fixture_search() -> SearchResult {
    let profile = AccuracyProfile::load(fixture("profile.csv"), false).unwrap();
    let models = ModelConstants::load(fixture("models.json")).unwrap();
    let layout = split_strata(200, 600);
    let eval = Evaluator {
        layout: &layout,
        profile: &profile,
        power: &models.power,
        rate: &models.bitrate,
    };
    exhaustive_search(&eval, &ParamSets::default(), DominanceRule::StrictAll, DEFAULT_SEARCH_CAP).unwrap()
}

fn load_policy() -> PolicyParams {
    serde_json::from_str(&std::fs::read_to_string(fixture("policy.json")).unwrap()).unwrap()
}

fn run_day(trace: &str, kind: PolicyKind, search: &SearchResult) -> (EnvTraces, SimulationReport) {
    let traces = EnvTraces::load(fixture(trace)).unwrap();
    let models = ModelConstants::load(fixture("models.json")).unwrap();
    let policy = PolicyParams { kind, ..load_policy() };
    let fallback = search.fallback.as_ref().unwrap();
    let r = simulate_day(&traces, &search.front, fallback, &policy, &models).unwrap();
    (traces, r)
}

#[test]
fn c08_link_model_wiring() {
    let search = fixture_search();
    let (traces, r) = run_day("light_rain_day.csv", PolicyKind::Reserve, &search);
    let baseline = ModelConstants::load(fixture("models.json")).unwrap().link.baseline_mbps;
    let all_light = traces.samples().iter().all(|s| s.precip_mm_h <= 4.0);
    let rainy: Vec<f64> = r
        .series
        .iter()
        .filter(|row| traces.weather_at(row.t_s).unwrap().precipitation > 0.0)
        .map(|row| row.mbps)
        .collect();
    let mean = rainy.iter().sum::<f64>() / rainy.len().max(1) as f64;
    let target = 0.85 * baseline;
    let rel = (mean - target).abs() / target;
    let ok = all_light && !rainy.is_empty() && rel <= 0.01;
    report(
        8,
        "link model wiring",
        ok,
        format!(
            "{} rainy minutes, mean throughput {mean:.3} Mbps vs {target:.3} Mbps (rel. err {rel:.2e})",
            rainy.len()
        ),
    );
    assert!(ok);
}

#[test]
fn c09_scheduler_safety() {
    let search = fixture_search();
    let (_, safe) = run_day("storm_day.csv", PolicyKind::Reserve, &search);
    let (_, naive) = run_day("storm_day.csv", PolicyKind::AlwaysMax, &search);
    let (_, again) = run_day("storm_day.csv", PolicyKind::Reserve, &search);

    let cap = safe.battery_capacity_wh;
    let above_reserve = safe.series.iter().all(|row| row.soc * cap >= safe.reserve_wh - 1e-9);
    let bytes_a = serde_json::to_vec(&safe).unwrap();
    let bytes_b = serde_json::to_vec(&again).unwrap();
    let identical = bytes_a == bytes_b && safe.series_csv() == again.series_csv();
    let ok = safe.depletion_events.is_empty() && above_reserve && !naive.depletion_events.is_empty() && identical;
    report(
        9,
        "scheduler safety on storm fixture",
        ok,
        format!(
            "reserve policy: {} depletions, min stored {:.1} Wh (reserve {} Wh); always-max: {} depletions; \
             reruns byte-identical {identical}",
            safe.depletion_events.len(),
            safe.min_stored_wh,
            safe.reserve_wh,
            naive.depletion_events.len()
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------------------

#[test]
fn c10_preprocessing_throughput() {
    let p = BlobClipParams {
        width: 512,
        height: 128,
        frames: 90,
        motion_fraction: 0.3,
        ..Default::default()
    };
    let clip = moving_blob_clip(&p, 0xA00A).unwrap();
    let mut pre = Preprocessor::new(512, 128, PreprocessParams::default()).unwrap();
    // the seeding frame is cheaper than the rest; leave it out of the timing
    pre.process(&clip.frames[0]).unwrap();
    let t0 = Instant::now();
    for f in &clip.frames[1..] {
        pre.process(f).unwrap();
    }
    let fps = (clip.frames.len() - 1) as f64 / t0.elapsed().as_secs_f64();
    let ok = fps >= 15.0;
    report(
        10,
        "end-to-end preprocessing throughput",
        ok,
        format!("{fps:.1} frames/s on 512x128, single thread"),
    );
    assert!(ok);
}

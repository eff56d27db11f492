//! Reference implementations written straight from the definitions. They
//! favour obviousness over speed and share no code with the library.

#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use salina::detector::DetBox;
use salina::mask::BinaryMask;
use salina::pareto::{MetricTriple, ParetoMember};
use salina::stratum::{Configuration, Route};

// ---------------------------------------------------------------------------
// Background model

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gauss {
    pub w: f64,
    pub mu: f64,
    pub var: f64,
}

pub struct MogConst {
    pub alpha: f64,
    pub lambda: f64,
    pub init_w: f64,
    pub init_var: f64,
    pub floor: f64,
}

fn fits(g: &Gauss, x: f64, lambda: f64) -> bool {
    (x - g.mu).abs() <= lambda * g.var.sqrt()
}

/// One recurrence step, written out term by term.
pub fn mog_step(state: &[Gauss], x: f64, c: &MogConst) -> Vec<Gauss> {
    let candidates: Vec<usize> = (0..state.len()).filter(|&i| fits(&state[i], x, c.lambda)).collect();
    let mut k: Option<usize> = None;
    for &i in &candidates {
        let score = state[i].w / state[i].var.sqrt();
        match k {
            None => k = Some(i),
            Some(j) if score > state[j].w / state[j].var.sqrt() => k = Some(i),
            _ => {}
        }
    }
    let mut next: Vec<Gauss> = state.to_vec();
    for (i, g) in next.iter_mut().enumerate() {
        let owner = if k == Some(i) { 1.0 } else { 0.0 };
        g.w = (1.0 - c.alpha) * g.w + c.alpha * owner;
    }
    if let Some(k) = k {
        let mu = (1.0 - c.alpha) * state[k].mu + c.alpha * x;
        let var = (1.0 - c.alpha) * state[k].var + c.alpha * (x - mu) * (x - mu);
        next[k].mu = mu;
        next[k].var = if var < c.floor { c.floor } else { var };
    } else {
        let mut lowest = 0;
        for i in 1..next.len() {
            if next[i].w < next[lowest].w {
                lowest = i;
            }
        }
        next[lowest] = Gauss {
            w: c.init_w,
            mu: x,
            var: c.init_var,
        };
    }
    let total: f64 = next.iter().map(|g| g.w).sum();
    for g in &mut next {
        g.w /= total;
    }
    next
}

/// Foreground test by sort-then-scan.
pub fn mog_is_foreground(state: &[Gauss], x: f64, ratio: f64, lambda: f64) -> bool {
    let mut idx: Vec<usize> = (0..state.len()).collect();
    idx.sort_by(|&a, &b| {
        let (ra, rb) = (state[a].w / state[a].var.sqrt(), state[b].w / state[b].var.sqrt());
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    let mut background = Vec::new();
    let mut acc = 0.0;
    for i in idx {
        background.push(i);
        acc += state[i].w;
        if acc >= ratio {
            break;
        }
    }
    !background.iter().any(|&i| fits(&state[i], x, lambda))
}

// ---------------------------------------------------------------------------
// Guided filter

/// Per-window ridge regression of `input` on `guide`, solved from the 2x2
/// normal equations, then averaged over every window covering each pixel.
pub fn guided_naive(input: &[f64], guide: &[f64], w: usize, h: usize, r: usize, eps: f64) -> Vec<f64> {
    let window = |cx: usize, cy: usize| {
        let xs = cx.saturating_sub(r)..=(cx + r).min(w - 1);
        let ys = cy.saturating_sub(r)..=(cy + r).min(h - 1);
        (xs, ys)
    };
    let mut coef = vec![(0.0, 0.0); w * h];
    for cy in 0..h {
        for cx in 0..w {
            let (xs, ys) = window(cx, cy);
            let (mut n, mut sg, mut si, mut sgg, mut sgi) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for y in ys {
                for x in xs.clone() {
                    let (g, i) = (guide[y * w + x], input[y * w + x]);
                    n += 1.0;
                    sg += g;
                    si += i;
                    sgg += g * g;
                    sgi += g * i;
                }
            }
            // [sgg + n eps, sg; sg, n] [a; b] = [sgi; si]
            let (m11, m12, m21, m22) = (sgg + n * eps, sg, sg, n);
            let det = m11 * m22 - m12 * m21;
            let a = (sgi * m22 - m12 * si) / det;
            let b = (m11 * si - m21 * sgi) / det;
            coef[cy * w + cx] = (a, b);
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let (xs, ys) = window(x, y);
            let (mut n, mut sa, mut sb) = (0.0, 0.0, 0.0);
            for wy in ys {
                for wx in xs.clone() {
                    let (a, b) = coef[wy * w + wx];
                    n += 1.0;
                    sa += a;
                    sb += b;
                }
            }
            out[y * w + x] = sa / n * guide[y * w + x] + sb / n;
        }
    }
    out
}

/// Truncated-window mean, by direct summation.
pub fn box_naive(v: &[f64], w: usize, h: usize, r: usize) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let (mut n, mut s) = (0.0, 0.0);
            for wy in y.saturating_sub(r)..=(y + r).min(h - 1) {
                for wx in x.saturating_sub(r)..=(x + r).min(w - 1) {
                    n += 1.0;
                    s += v[wy * w + wx];
                }
            }
            out[y * w + x] = s / n;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Pareto

pub fn strict_all(a: &MetricTriple, b: &MetricTriple) -> bool {
    a.bandwidth_bps < b.bandwidth_bps && a.power_w < b.power_w && a.accuracy > b.accuracy
}

pub fn standard(a: &MetricTriple, b: &MetricTriple) -> bool {
    let no_worse = a.bandwidth_bps <= b.bandwidth_bps && a.power_w <= b.power_w && a.accuracy >= b.accuracy;
    let better = a.bandwidth_bps < b.bandwidth_bps || a.power_w < b.power_w || a.accuracy > b.accuracy;
    no_worse && better
}

/// Keys of members no other member dominates, by all-pairs comparison.
pub fn front_oracle(items: &[ParetoMember], dominates: fn(&MetricTriple, &MetricTriple) -> bool) -> BTreeSet<String> {
    items
        .iter()
        .filter(|c| !items.iter().any(|o| dominates(&o.metrics, &c.metrics)))
        .map(|c| c.key.clone())
        .collect()
}

/// A member with a unique synthetic key; the configuration is a
/// placeholder.
pub fn synthetic_member(i: usize, m: MetricTriple) -> ParetoMember {
    ParetoMember {
        key: format!("m{i:05}"),
        config: Configuration {
            route: if m.bandwidth_bps == 0.0 { Route::Edge } else { Route::Cloud },
            per_stratum: Vec::new(),
        },
        metrics: m,
    }
}

// ---------------------------------------------------------------------------
// Planner

/// Keep the feasible members, then take the best by accuracy, power,
/// bandwidth and key.
pub fn plan_oracle(front: &[ParetoMember], bw_mbps: f64, budget_w: f64) -> Option<&ParetoMember> {
    let feasible: Vec<&ParetoMember> = front
        .iter()
        .filter(|m| m.metrics.bandwidth_bps <= bw_mbps * 1e6 && m.metrics.power_w <= budget_w)
        .collect();
    let best_a = feasible.iter().map(|m| m.metrics.accuracy).fold(f64::NEG_INFINITY, f64::max);
    let mut tied: Vec<&ParetoMember> = feasible.into_iter().filter(|m| m.metrics.accuracy == best_a).collect();
    tied.sort_by(|a, b| {
        a.metrics
            .power_w
            .partial_cmp(&b.metrics.power_w)
            .unwrap()
            .then(a.metrics.bandwidth_bps.partial_cmp(&b.metrics.bandwidth_bps).unwrap())
            .then(a.key.cmp(&b.key))
    });
    tied.first().copied()
}

// ---------------------------------------------------------------------------
// Detection

/// Component boxes by breadth-first flood fill, as `(x, y, w, h, pixels)`.
pub fn flood_fill_boxes(mask: &BinaryMask, min_area: u64) -> BTreeSet<(u32, u32, u32, u32, u64)> {
    let (w, h) = (mask.width as i64, mask.height as i64);
    let mut seen = vec![false; (w * h) as usize];
    let mut out = BTreeSet::new();
    for sy in 0..h {
        for sx in 0..w {
            let s = (sy * w + sx) as usize;
            if !mask.bits[s] || seen[s] {
                continue;
            }
            seen[s] = true;
            let mut q = VecDeque::from([(sx, sy)]);
            let (mut x0, mut y0, mut x1, mut y1, mut n) = (sx, sy, sx, sy, 0u64);
            while let Some((x, y)) = q.pop_front() {
                n += 1;
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (nx, ny) = (x + dx, y + dy);
                        if nx < 0 || ny < 0 || nx >= w || ny >= h {
                            continue;
                        }
                        let j = (ny * w + nx) as usize;
                        if mask.bits[j] && !seen[j] {
                            seen[j] = true;
                            q.push_back((nx, ny));
                        }
                    }
                }
            }
            if n >= min_area {
                out.insert((x0 as u32, y0 as u32, (x1 - x0 + 1) as u32, (y1 - y0 + 1) as u32, n));
            }
        }
    }
    out
}

pub fn iou_ref(a: &DetBox, b: &DetBox) -> f64 {
    let ax = (a.x as f64, (a.x + a.w) as f64);
    let bx = (b.x as f64, (b.x + b.w) as f64);
    let ay = (a.y as f64, (a.y + a.h) as f64);
    let by = (b.y as f64, (b.y + b.h) as f64);
    let ix = (ax.1.min(bx.1) - ax.0.max(bx.0)).max(0.0);
    let iy = (ay.1.min(by.1) - ay.0.max(by.0)).max(0.0);
    let inter = ix * iy;
    inter / ((a.w * a.h) as f64 + (b.w * b.h) as f64 - inter)
}

/// Largest one-to-one matching, by trying every assignment.
pub fn best_matching(dets: &[DetBox], labels: &[DetBox], thr: f64) -> usize {
    fn go(i: usize, dets: &[DetBox], labels: &[DetBox], used: &mut Vec<bool>, thr: f64) -> usize {
        if i == dets.len() {
            return 0;
        }
        let mut best = go(i + 1, dets, labels, used, thr);
        for j in 0..labels.len() {
            if !used[j] && dets[i].class_id == labels[j].class_id && iou_ref(&dets[i], &labels[j]) >= thr {
                used[j] = true;
                best = best.max(1 + go(i + 1, dets, labels, used, thr));
                used[j] = false;
            }
        }
        best
    }
    go(0, dets, labels, &mut vec![false; labels.len()], thr)
}

pub fn f1_from(tp: usize, nd: usize, nl: usize) -> f64 {
    if tp == 0 {
        return if nd == 0 && nl == 0 { 1.0 } else { 0.0 };
    }
    let p = tp as f64 / nd as f64;
    let r = tp as f64 / nl as f64;
    2.0 * p * r / (p + r)
}

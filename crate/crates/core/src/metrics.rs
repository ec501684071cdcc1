//! Multi-target evaluation metrics: OSPA distance and label consistency.

use std::collections::BTreeMap;

use crate::rfs::Label;

/// Planar point.
pub type Point = (f64, f64);

fn dist(a: &Point, b: &Point) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Optimal subpattern assignment distance between two point sets: optimal
/// assignment of the smaller set into the larger with per-pair distances
/// clipped at `cutoff`, a `cutoff` penalty per cardinality mismatch, and a
/// p-norm average over the larger cardinality. Both sets empty gives 0.
pub fn ospa(estimates: &[Point], truth: &[Point], cutoff: f64, order: f64) -> f64 {
    assert!(cutoff > 0.0, "ospa cutoff must be positive");
    assert!(order >= 1.0, "ospa order must be >= 1");
    let (small, large) = if estimates.len() <= truth.len() {
        (estimates, truth)
    } else {
        (truth, estimates)
    };
    let (m, n) = (small.len(), large.len());
    if n == 0 {
        return 0.0;
    }
    assert!(
        m <= 20,
        "ospa assignment supports up to 20 points per set, got {m}"
    );

    // Optimal assignment cost over subsets of the larger set (DP over masks).
    let mut cost = vec![vec![0.0f64; n]; m];
    for i in 0..m {
        for j in 0..n {
            cost[i][j] = dist(&small[i], &large[j]).min(cutoff).powf(order);
        }
    }
    let full = 1usize << n;
    let mut dp = vec![f64::INFINITY; full];
    dp[0] = 0.0;
    for mask in 0..full {
        let i = (mask as u32).count_ones() as usize;
        if i >= m || dp[mask].is_infinite() {
            continue;
        }
        for j in 0..n {
            if mask & (1 << j) == 0 {
                let next = mask | (1 << j);
                let c = dp[mask] + cost[i][j];
                if c < dp[next] {
                    dp[next] = c;
                }
            }
        }
    }
    let best = (0..full)
        .filter(|mask| (*mask as u32).count_ones() as usize == m)
        .map(|mask| dp[mask])
        .fold(f64::INFINITY, f64::min);

    let total = best + cutoff.powf(order) * (n - m) as f64;
    (total / n as f64).powf(1.0 / order)
}

/// One reported estimate at one frame.
#[derive(Debug, Clone)]
pub struct EstimateRecord {
    pub k: usize,
    pub label: Label,
    pub x: f64,
    pub y: f64,
}

/// One ground-truth row at one frame.
#[derive(Debug, Clone)]
pub struct TruthRecord {
    pub k: usize,
    pub id: u32,
    pub x: f64,
    pub y: f64,
}

/// Collapse truth rows sharing (k, id) into their centroid. Ground truth may
/// list several reflection centers per physical object; evaluation treats the
/// object as one target.
pub fn group_truth_by_id(rows: &[TruthRecord]) -> Vec<TruthRecord> {
    let mut acc: BTreeMap<(usize, u32), (f64, f64, usize)> = BTreeMap::new();
    for r in rows {
        let e = acc.entry((r.k, r.id)).or_insert((0.0, 0.0, 0));
        e.0 += r.x;
        e.1 += r.y;
        e.2 += 1;
    }
    acc.into_iter()
        .map(|((k, id), (x, y, n))| TruthRecord {
            k,
            id,
            x: x / n as f64,
            y: y / n as f64,
        })
        .collect()
}

/// Per-frame nearest-neighbor association of truth targets to estimates
/// within `gate`. Greedy over ascending distance; each estimate binds at most
/// one truth target per frame. Returns (k, truth id, estimate label).
pub fn associate(
    estimates: &[EstimateRecord],
    truth: &[TruthRecord],
    gate: f64,
) -> Vec<(usize, u32, Label)> {
    let mut by_frame: BTreeMap<usize, (Vec<&EstimateRecord>, Vec<&TruthRecord>)> = BTreeMap::new();
    for e in estimates {
        by_frame.entry(e.k).or_default().0.push(e);
    }
    for t in truth {
        by_frame.entry(t.k).or_default().1.push(t);
    }
    let mut pairs = Vec::new();
    for (k, (est, tru)) in by_frame {
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for (ti, t) in tru.iter().enumerate() {
            for (ei, e) in est.iter().enumerate() {
                let d = dist(&(t.x, t.y), &(e.x, e.y));
                if d <= gate {
                    candidates.push((d, ti, ei));
                }
            }
        }
        candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut used_t = vec![false; tru.len()];
        let mut used_e = vec![false; est.len()];
        for (_, ti, ei) in candidates {
            if !used_t[ti] && !used_e[ei] {
                used_t[ti] = true;
                used_e[ei] = true;
                pairs.push((k, tru[ti].id, est[ei].label));
            }
        }
    }
    pairs
}

/// Fraction of each truth target's associated frames that carry its modal
/// label. Targets with no associated frames score 0.
pub fn label_consistency_per_target(
    estimates: &[EstimateRecord],
    truth: &[TruthRecord],
    gate: f64,
) -> BTreeMap<u32, f64> {
    let mut labels_per_target: BTreeMap<u32, Vec<Label>> = BTreeMap::new();
    for t in truth {
        labels_per_target.entry(t.id).or_default();
    }
    for (_, id, label) in associate(estimates, truth, gate) {
        labels_per_target.entry(id).or_default().push(label);
    }
    labels_per_target
        .into_iter()
        .map(|(id, labels)| {
            if labels.is_empty() {
                return (id, 0.0);
            }
            let mut counts: BTreeMap<Label, usize> = BTreeMap::new();
            for l in &labels {
                *counts.entry(*l).or_insert(0) += 1;
            }
            let modal = counts.values().copied().max().unwrap_or(0);
            (id, modal as f64 / labels.len() as f64)
        })
        .collect()
}

/// Average of `label_consistency_per_target` over truth ids.
pub fn label_consistency(estimates: &[EstimateRecord], truth: &[TruthRecord], gate: f64) -> f64 {
    let per = label_consistency_per_target(estimates, truth, gate);
    if per.is_empty() {
        return 0.0;
    }
    per.values().sum::<f64>() / per.len() as f64
}

//! Deterministic layout repair: edge snapping, overlap resolution, canvas clamping.
//!
//! The three passes repeat until the layout stops moving. Every result is either
//! a settled layout or the unchanged input, so `project` is idempotent.

use super::{
    alignment_score, edges, out_of_canvas, pair_violates, ruled_indices,
    spacing_violations, RuleConfig, CANVAS_EPS,
};
use crate::layout::{Component, Layout, MIN_SIZE};

const MAX_ROUNDS: usize = 100;
const SETTLED: f64 = 1e-12;
/// Extra separation added when pushing boxes apart so the gap test passes strictly.
const SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Family {
    Left,
    Right,
    CenterX,
    Top,
    Bottom,
    CenterY,
}

const FAMILIES: [Family; 6] = [
    Family::Left,
    Family::Right,
    Family::CenterX,
    Family::Top,
    Family::Bottom,
    Family::CenterY,
];

impl Family {
    fn index(self) -> usize {
        self as usize
    }
}

/// Moves one edge family of `c` to `value`: edges move with the opposite edge held,
/// centers translate.
fn set_family(c: &mut Component, family: Family, value: f64) {
    match family {
        Family::Left => {
            let r = c.right();
            let l = value.min(r - MIN_SIZE);
            c.cx = 0.5 * (l + r);
            c.w = r - l;
        }
        Family::Right => {
            let l = c.left();
            let r = value.max(l + MIN_SIZE);
            c.cx = 0.5 * (l + r);
            c.w = r - l;
        }
        Family::CenterX => c.cx = value,
        Family::Top => {
            let b = c.bottom();
            let t = value.min(b - MIN_SIZE);
            c.cy = 0.5 * (t + b);
            c.h = b - t;
        }
        Family::Bottom => {
            let t = c.top();
            let b = value.max(t + MIN_SIZE);
            c.cy = 0.5 * (t + b);
            c.h = b - t;
        }
        Family::CenterY => c.cy = value,
    }
}

fn snap_pass(layout: &mut Layout, pinned: &[bool], cfg: &RuleConfig) {
    let idx = ruled_indices(layout);
    if idx.len() < 2 {
        return;
    }
    for family in FAMILIES {
        let mut members: Vec<(f64, usize)> = idx
            .iter()
            .map(|&i| (edges(&layout.components[i])[family.index()], i))
            .collect();
        members.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut clusters: Vec<Vec<(f64, usize)>> = Vec::new();
        for m in members {
            match clusters.last_mut() {
                Some(cl) if m.0 - cl.last().expect("non-empty").0 <= cfg.tau_snap => cl.push(m),
                _ => clusters.push(vec![m]),
            }
        }

        for cluster in clusters.into_iter().filter(|c| c.len() > 1) {
            let anchors: Vec<f64> = cluster
                .iter()
                .filter(|(_, i)| pinned[*i])
                .map(|(v, _)| *v)
                .collect();
            let source: Vec<f64> = if anchors.is_empty() {
                cluster.iter().map(|(v, _)| *v).collect()
            } else {
                anchors
            };
            let target = source.iter().sum::<f64>() / source.len() as f64;
            if cluster
                .iter()
                .all(|(v, i)| pinned[*i] || (v - target).abs() <= SETTLED)
            {
                continue;
            }
            let mut trial = layout.clone();
            for &(_, i) in &cluster {
                if !pinned[i] {
                    set_family(&mut trial.components[i], family, target);
                }
            }
            // A snap is kept only if it neither loses alignment nor adds violations.
            if alignment_score(&trial, cfg) >= alignment_score(layout, cfg)
                && spacing_violations(&trial, cfg) <= spacing_violations(layout, cfg)
            {
                *layout = trial;
            }
        }
    }
}

fn inside_canvas(c: &Component) -> bool {
    !out_of_canvas(c)
}

fn translate(c: &Component, axis: usize, delta: f64) -> Component {
    let mut moved = *c;
    if axis == 0 {
        moved.cx += delta;
    } else {
        moved.cy += delta;
    }
    moved
}

/// Signed translations of `mover` that separate it from `other` by `g_min`, per axis.
fn separations(mover: &Component, other: &Component, g_min: f64) -> [(usize, f64); 4] {
    let pos_x = other.right() + g_min - mover.left() + SLACK;
    let neg_x = mover.right() + g_min - other.left() + SLACK;
    let pos_y = other.bottom() + g_min - mover.top() + SLACK;
    let neg_y = mover.bottom() + g_min - other.top() + SLACK;
    [(0, pos_x), (0, -neg_x), (1, pos_y), (1, -neg_y)]
}

fn resolve_pass(layout: &mut Layout, pinned: &[bool], cfg: &RuleConfig) {
    let idx = ruled_indices(layout);
    for (k, &i) in idx.iter().enumerate() {
        for &j in &idx[k + 1..] {
            let (a, b) = (layout.components[i], layout.components[j]);
            if !pair_violates(&a, &b, cfg) {
                continue;
            }
            // Higher index moves first, along the axis of least penetration.
            let mut candidates: Vec<(usize, usize, f64)> = Vec::with_capacity(8);
            for (mover, other, id) in [(&b, &a, j), (&a, &b, i)] {
                if pinned[id] {
                    continue;
                }
                let mut seps = separations(mover, other, cfg.g_min).to_vec();
                seps.sort_by(|p, q| p.1.abs().total_cmp(&q.1.abs()).then(p.0.cmp(&q.0)));
                candidates.extend(seps.into_iter().map(|(axis, d)| (id, axis, d)));
            }
            let Some(&first) = candidates.first() else {
                continue;
            };
            let chosen = candidates
                .iter()
                .copied()
                .find(|&(id, axis, d)| inside_canvas(&translate(&layout.components[id], axis, d)))
                .unwrap_or(first);
            let (id, axis, d) = chosen;
            layout.components[id] = translate(&layout.components[id], axis, d);
        }
    }
}

fn clamp_pass(layout: &mut Layout, pinned: &[bool]) {
    for (c, &fixed) in layout.components.iter_mut().zip(pinned) {
        if fixed || !c.visible {
            continue;
        }
        c.w = c.w.min(1.0);
        c.h = c.h.min(1.0);
        if c.left() < -CANVAS_EPS {
            c.cx = 0.5 * c.w;
        } else if c.right() > 1.0 + CANVAS_EPS {
            c.cx = 1.0 - 0.5 * c.w;
        }
        if c.top() < -CANVAS_EPS {
            c.cy = 0.5 * c.h;
        } else if c.bottom() > 1.0 + CANVAS_EPS {
            c.cy = 1.0 - 0.5 * c.h;
        }
    }
}

fn max_change(a: &Layout, b: &Layout) -> f64 {
    a.components
        .iter()
        .zip(&b.components)
        .map(|(p, q)| {
            (p.cx - q.cx)
                .abs()
                .max((p.cy - q.cy).abs())
                .max((p.w - q.w).abs())
                .max((p.h - q.h).abs())
        })
        .fold(0.0, f64::max)
}

fn pin_mask(layout: &Layout, pinned: &[usize]) -> Vec<bool> {
    let mut mask = vec![false; layout.len()];
    for &i in pinned {
        if i < mask.len() {
            mask[i] = true;
        }
    }
    mask
}

/// Edge snapping only, one sweep. Never lowers the alignment score.
pub fn snap(layout: &Layout, cfg: &RuleConfig) -> Layout {
    let mut out = layout.clone();
    snap_pass(&mut out, &vec![false; layout.len()], cfg);
    out
}

/// Full repair: snap, resolve overlaps, clamp to canvas, repeated until settled.
pub fn project(layout: &Layout, cfg: &RuleConfig) -> Layout {
    project_pinned(layout, &[], cfg)
}

/// Scale factors tried, in order, when translation alone cannot reach a clean layout.
const SHRINK_STEPS: [f64; 8] = [1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3];

/// Runs snap/resolve/clamp rounds; `Some` only if the layout stops moving.
fn settle(mut current: Layout, mask: &[bool], cfg: &RuleConfig) -> Option<Layout> {
    for _ in 0..MAX_ROUNDS {
        let before = current.clone();
        snap_pass(&mut current, mask, cfg);
        resolve_pass(&mut current, mask, cfg);
        clamp_pass(&mut current, mask);
        if max_change(&before, &current) <= SETTLED {
            return Some(current);
        }
    }
    None
}

fn shrunk(layout: &Layout, mask: &[bool], factor: f64) -> Layout {
    let mut out = layout.clone();
    for (c, &fixed) in out.components.iter_mut().zip(mask) {
        if !fixed && c.visible && !c.is_background() {
            c.w = (c.w * factor).max(MIN_SIZE.min(c.w));
            c.h = (c.h * factor).max(MIN_SIZE.min(c.h));
        }
    }
    out
}

fn clean_at(c: &Component, placed: &[Component], cfg: &RuleConfig) -> bool {
    inside_canvas(c) && placed.iter().all(|p| !pair_violates(c, p, cfg))
}

/// Axis positions worth trying for a box of extent `size` whose start edge would ideally be `ideal`.
fn offsets(ideal: f64, size: f64, placed: &[(f64, f64)], g_min: f64) -> Vec<f64> {
    let mut out = vec![ideal.clamp(0.0, (1.0 - size).max(0.0)), 0.0, 1.0 - size];
    for &(lo, hi) in placed {
        out.push(hi + g_min + SLACK);
        out.push(lo - g_min - SLACK - size);
    }
    out.retain(|v| *v >= -CANVAS_EPS && v + size <= 1.0 + CANVAS_EPS);
    out
}

/// Places unpinned boxes one at a time, largest first, at the clean position nearest
/// to where they already are. `None` if some box has no clean position.
fn place(layout: &Layout, mask: &[bool], cfg: &RuleConfig) -> Option<Layout> {
    let idx = ruled_indices(layout);
    let mut placed: Vec<Component> = idx
        .iter()
        .filter(|&&i| mask[i])
        .map(|&i| layout.components[i])
        .collect();
    let mut free: Vec<usize> = idx.into_iter().filter(|&i| !mask[i]).collect();
    free.sort_by(|&a, &b| {
        let (p, q) = (&layout.components[a], &layout.components[b]);
        (q.w * q.h).total_cmp(&(p.w * p.h)).then(a.cmp(&b))
    });
    let mut out = layout.clone();
    for i in free {
        let c = layout.components[i];
        let xs = offsets(c.left(), c.w, &placed.iter().map(|p| (p.left(), p.right())).collect::<Vec<_>>(), cfg.g_min);
        let ys = offsets(c.top(), c.h, &placed.iter().map(|p| (p.top(), p.bottom())).collect::<Vec<_>>(), cfg.g_min);
        let mut best: Option<(f64, Component)> = None;
        for &x in &xs {
            for &y in &ys {
                let mut trial = c;
                trial.cx = x + 0.5 * c.w;
                trial.cy = y + 0.5 * c.h;
                let cost = (trial.cx - c.cx).powi(2) + (trial.cy - c.cy).powi(2);
                if best.as_ref().is_some_and(|(b, _)| *b <= cost) || !clean_at(&trial, &placed, cfg) {
                    continue;
                }
                best = Some((cost, trial));
            }
        }
        let (_, chosen) = best?;
        out.components[i] = chosen;
        placed.push(chosen);
    }
    Some(out)
}

/// [`project`] with the components at `pinned` held fixed. Out-of-range pins are ignored.
///
/// If the repair rounds do not settle without violations, unpinned boxes are shrunk
/// about their centers in fixed steps and the rounds rerun. If no step comes out clean,
/// the unpinned boxes are re-placed greedily at the nearest clean positions, again at
/// each step. The first clean settled result wins; when none is clean the input is
/// returned unchanged.
pub fn project_pinned(layout: &Layout, pinned: &[usize], cfg: &RuleConfig) -> Layout {
    let mask = pin_mask(layout, pinned);
    let clean = |l: &Layout| spacing_violations(l, cfg) == 0;
    let start = |factor: f64| {
        if factor == 1.0 {
            layout.clone()
        } else {
            shrunk(layout, &mask, factor)
        }
    };
    SHRINK_STEPS
        .iter()
        .find_map(|&f| settle(start(f), &mask, cfg).filter(clean))
        .or_else(|| {
            SHRINK_STEPS.iter().find_map(|&f| {
                place(&start(f), &mask, cfg)
                    .and_then(|p| settle(p, &mask, cfg))
                    .filter(clean)
            })
        })
        .unwrap_or_else(|| layout.clone())
}

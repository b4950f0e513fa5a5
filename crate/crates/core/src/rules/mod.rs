//! Design rules: alignment, spacing and color harmony scoring, a differentiable
//! training penalty, and a deterministic repair projection used while sampling.
//!
//! Background components are exempt from alignment and spacing rules.

mod penalty;
mod project;

pub use penalty::{penalty, penalty_and_grad, penalty_rows};
pub use project::{project, project_pinned, snap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::{encode, Component, Layout};

/// Tolerance when testing whether a box lies inside the unit canvas.
pub(crate) const CANVAS_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RuleConfig {
    /// Two edges are aligned when they differ by less than this.
    pub tau_align: f64,
    /// Single-linkage radius used when snapping edges.
    pub tau_snap: f64,
    /// Minimum gap between non-background components.
    pub g_min: f64,
    /// Hue-distance scale of the harmony score, in degrees.
    pub hue_sigma: f64,
}

impl Default for RuleConfig {
    fn default() -> Self {
        Self {
            tau_align: 0.01,
            tau_snap: 0.02,
            g_min: 0.01,
            hue_sigma: 60.0,
        }
    }
}

impl RuleConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("tau_align", self.tau_align),
            ("tau_snap", self.tau_snap),
            ("g_min", self.g_min),
            ("hue_sigma", self.hue_sigma),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config {
                    path: format!("rules.{name}"),
                    message: "must be positive".into(),
                });
            }
        }
        if self.tau_align > self.tau_snap {
            return Err(Error::Config {
                path: "rules.tau_align".into(),
                message: "must not exceed tau_snap".into(),
            });
        }
        Ok(())
    }
}

/// Rule state of one layout, as reported to API clients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleReport {
    pub alignment_score: f64,
    pub spacing_violations: usize,
    pub harmony: f64,
    pub penalty: f64,
}

impl RuleReport {
    pub fn of(layout: &Layout, cfg: &RuleConfig) -> Self {
        Self {
            alignment_score: alignment_score(layout, cfg),
            spacing_violations: spacing_violations(layout, cfg),
            harmony: harmony(layout, cfg),
            penalty: encode(layout).map_or(f64::NAN, |x| penalty(&x)),
        }
    }
}

fn ruled(c: &Component) -> bool {
    c.visible && !c.is_background()
}

/// Indices of visible non-background components.
pub(crate) fn ruled_indices(layout: &Layout) -> Vec<usize> {
    (0..layout.len())
        .filter(|&i| ruled(&layout.components[i]))
        .collect()
}

/// The six edge families compared by the alignment rule.
pub(crate) fn edges(c: &Component) -> [f64; 6] {
    [c.left(), c.right(), c.cx, c.top(), c.bottom(), c.cy]
}

fn matched_relations(a: &Component, b: &Component, cfg: &RuleConfig) -> usize {
    edges(a)
        .iter()
        .zip(edges(b))
        .filter(|(x, y)| (**x - y).abs() < cfg.tau_align)
        .count()
}

/// Fraction of matched edge relations over all pairs of visible non-background
/// components; 1.0 when fewer than two such components exist.
pub fn alignment_score(layout: &Layout, cfg: &RuleConfig) -> f64 {
    let idx = ruled_indices(layout);
    if idx.len() < 2 {
        return 1.0;
    }
    let mut matched = 0;
    let mut total = 0;
    for (k, &i) in idx.iter().enumerate() {
        for &j in &idx[k + 1..] {
            matched += matched_relations(&layout.components[i], &layout.components[j], cfg);
            total += 6;
        }
    }
    matched as f64 / total as f64
}

/// Matched relations each component takes part in (zero for exempt components).
pub fn alignment_contributions(layout: &Layout, cfg: &RuleConfig) -> Vec<usize> {
    let idx = ruled_indices(layout);
    let mut counts = vec![0; layout.len()];
    for (k, &i) in idx.iter().enumerate() {
        for &j in &idx[k + 1..] {
            let m = matched_relations(&layout.components[i], &layout.components[j], cfg);
            counts[i] += m;
            counts[j] += m;
        }
    }
    counts
}

/// Signed gap along each axis; negative on both axes means the boxes overlap.
pub(crate) fn gaps(a: &Component, b: &Component) -> (f64, f64) {
    (
        a.left().max(b.left()) - a.right().min(b.right()),
        a.top().max(b.top()) - a.bottom().min(b.bottom()),
    )
}

pub(crate) fn pair_violates(a: &Component, b: &Component, cfg: &RuleConfig) -> bool {
    let (gx, gy) = gaps(a, b);
    gx.max(gy) < cfg.g_min
}

pub(crate) fn out_of_canvas(c: &Component) -> bool {
    c.left() < -CANVAS_EPS
        || c.top() < -CANVAS_EPS
        || c.right() > 1.0 + CANVAS_EPS
        || c.bottom() > 1.0 + CANVAS_EPS
}

/// Overlapping or too-close pairs of non-background components, plus one per
/// visible component that leaves the unit canvas.
pub fn spacing_violations(layout: &Layout, cfg: &RuleConfig) -> usize {
    let idx = ruled_indices(layout);
    let mut count = 0;
    for (k, &i) in idx.iter().enumerate() {
        for &j in &idx[k + 1..] {
            if pair_violates(&layout.components[i], &layout.components[j], cfg) {
                count += 1;
            }
        }
    }
    count + layout.visible().filter(|c| out_of_canvas(c)).count()
}

/// Standard RGB → HSV hue (degrees) and saturation.
pub fn hue_saturation(rgb: [f64; 3]) -> (f64, f64) {
    let [r, g, b] = rgb;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let sat = if max > 0.0 { delta / max } else { 0.0 };
    if delta == 0.0 {
        return (0.0, sat);
    }
    let hue = if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    (hue, sat)
}

pub(crate) fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).abs().rem_euclid(360.0);
    d.min(360.0 - d)
}

/// `exp(-mean pairwise hue distance / hue_sigma)` over visible components with
/// saturation above 0.1; 1.0 with fewer than two such components.
pub fn harmony(layout: &Layout, cfg: &RuleConfig) -> f64 {
    let hues: Vec<f64> = layout
        .visible()
        .map(|c| hue_saturation(c.color))
        .filter(|(_, s)| *s > 0.1)
        .map(|(h, _)| h)
        .collect();
    if hues.len() < 2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut pairs = 0;
    for (k, a) in hues.iter().enumerate() {
        for b in &hues[k + 1..] {
            sum += circular_distance(*a, *b);
            pairs += 1;
        }
    }
    (-(sum / pairs as f64) / cfg.hue_sigma).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::ComponentType;

    fn boxed(l: f64, t: f64, r: f64, b: f64) -> Component {
        Component::from_edges(ComponentType::Button, l, t, r, b, [0.5, 0.5, 0.5])
    }

    #[test]
    fn alignment_examples() {
        let cfg = RuleConfig::default();
        let a = boxed(0.1, 0.1, 0.3, 0.2);
        assert_eq!(alignment_score(&Layout::new(vec![a, a]), &cfg), 1.0);
        assert_eq!(alignment_score(&Layout::new(vec![a]), &cfg), 1.0);
        let b = boxed(0.1, 0.5, 0.6, 0.8);
        let score = alignment_score(&Layout::new(vec![a, b]), &cfg);
        assert!((score - 1.0 / 6.0).abs() < 1e-12);
        let bg = Component::new(ComponentType::Background, 0.5, 0.5, 1.0, 1.0, [1.0; 3]);
        assert!((alignment_score(&Layout::new(vec![bg, a, b]), &cfg) - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn contributions_count_both_ends() {
        let cfg = RuleConfig::default();
        let a = boxed(0.1, 0.1, 0.3, 0.2);
        let b = boxed(0.1, 0.5, 0.6, 0.8);
        let c = boxed(0.7, 0.5, 0.9, 0.8);
        assert_eq!(
            alignment_contributions(&Layout::new(vec![a, b, c]), &cfg),
            vec![1, 4, 3]
        );
    }

    #[test]
    fn spacing_examples() {
        let cfg = RuleConfig::default();
        assert_eq!(spacing_violations(&Layout::default(), &cfg), 0);
        let apart = Layout::new(vec![boxed(0.0, 0.0, 0.2, 0.2), boxed(0.7, 0.0, 0.9, 0.2)]);
        assert_eq!(spacing_violations(&apart, &cfg), 0);
        let overlap = Layout::new(vec![boxed(0.2, 0.2, 0.5, 0.5), boxed(0.4, 0.4, 0.7, 0.7)]);
        assert_eq!(spacing_violations(&overlap, &cfg), 1);
        let close = Layout::new(vec![boxed(0.2, 0.2, 0.5, 0.5), boxed(0.505, 0.2, 0.7, 0.5)]);
        assert_eq!(spacing_violations(&close, &cfg), 1);
        let diagonal = Layout::new(vec![boxed(0.2, 0.2, 0.5, 0.5), boxed(0.505, 0.6, 0.7, 0.8)]);
        assert_eq!(spacing_violations(&diagonal, &cfg), 0);
        let outside = Layout::new(vec![Component::new(
            ComponentType::Text,
            0.95,
            0.5,
            0.2,
            0.1,
            [0.0; 3],
        )]);
        assert_eq!(spacing_violations(&outside, &cfg), 1);
    }

    #[test]
    fn background_is_exempt_from_spacing() {
        let cfg = RuleConfig::default();
        let bg = Component::new(ComponentType::Background, 0.5, 0.5, 1.0, 1.0, [1.0; 3]);
        let l = Layout::new(vec![bg, boxed(0.2, 0.2, 0.5, 0.5)]);
        assert_eq!(spacing_violations(&l, &cfg), 0);
    }

    #[test]
    fn hue_conversion() {
        assert_eq!(hue_saturation([1.0, 0.0, 0.0]), (0.0, 1.0));
        assert_eq!(hue_saturation([0.0, 1.0, 0.0]).0, 120.0);
        assert_eq!(hue_saturation([0.0, 0.0, 1.0]).0, 240.0);
        assert_eq!(hue_saturation([1.0, 0.0, 1.0]).0, 300.0);
        assert_eq!(hue_saturation([0.4, 0.4, 0.4]), (0.0, 0.0));
        assert_eq!(circular_distance(350.0, 10.0), 20.0);
    }

    #[test]
    fn harmony_examples() {
        let cfg = RuleConfig::default();
        let c = |rgb| Component::new(ComponentType::Text, 0.5, 0.5, 0.1, 0.1, rgb);
        let mono = Layout::new(vec![c([1.0, 0.0, 0.0]), c([0.5, 0.0, 0.0])]);
        assert_eq!(harmony(&mono, &cfg), 1.0);
        let two = Layout::new(vec![c([1.0, 0.0, 0.0]), c([0.0, 1.0, 0.0])]);
        assert!((harmony(&two, &cfg) - (-2.0f64).exp()).abs() < 1e-12);
        let gray = Layout::new(vec![c([0.2; 3]), c([0.9; 3])]);
        assert_eq!(harmony(&gray, &cfg), 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(RuleConfig::default().validate().is_ok());
        let bad = RuleConfig {
            tau_align: 0.05,
            ..RuleConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}

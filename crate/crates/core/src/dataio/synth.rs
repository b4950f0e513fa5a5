//! Seeded synthetic corpus drawn from four parameterized screen templates.
//!
//! Jitter is applied to template parameters (one offset shared by every
//! component of a screen), so the template's edge alignments survive it.

use std::fmt;

use rand::seq::SliceRandom;
use rand::RngExt;

use super::{Corpus, CorpusItem, Provenance};
use crate::condition::Condition;
use crate::error::{Error, Result};
use crate::layout::{Component, ComponentType, Layout};
use crate::rng::{self, SeededRng};
use crate::rules::{alignment_score, spacing_violations, RuleConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Template {
    Login,
    VerticalList,
    GridGallery,
    ToolbarContent,
}

impl Template {
    pub const ALL: [Template; 4] = [
        Template::Login,
        Template::VerticalList,
        Template::GridGallery,
        Template::ToolbarContent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Template::Login => "login",
            Template::VerticalList => "vertical_list",
            Template::GridGallery => "grid_gallery",
            Template::ToolbarContent => "toolbar_content",
        }
    }

    pub fn keywords(self) -> &'static [&'static str] {
        match self {
            Template::Login => &["login", "sign", "form", "email", "password", "button"],
            Template::VerticalList => &["list", "feed", "header", "content"],
            Template::GridGallery => &["grid", "gallery", "photo", "image"],
            Template::ToolbarContent => &["toolbar", "menu", "content", "text", "image"],
        }
    }

    /// Lowest alignment score any layout of this template can have.
    ///
    /// A two-column grid cannot do better: only same-row and same-column tile pairs
    /// share edges, 9 of 15 pairs with 3 relations each.
    pub fn alignment_floor(self) -> f64 {
        match self {
            Template::GridGallery => 0.3,
            _ => 0.5,
        }
    }

    fn base_hue(self) -> f64 {
        match self {
            Template::Login => 220.0,
            Template::VerticalList => 150.0,
            Template::GridGallery => 20.0,
            Template::ToolbarContent => 280.0,
        }
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn hsv(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h = h.rem_euclid(360.0) / 60.0;
    let c = v * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m]
}

/// Shared jitter of one screen.
struct Jitter {
    dx: f64,
    dy: f64,
    dw: f64,
    dh: f64,
}

impl Jitter {
    fn draw(rng: &mut SeededRng) -> Self {
        Self {
            dx: rng.random_range(-0.02..=0.02),
            dy: rng.random_range(-0.02..=0.02),
            dw: rng.random_range(-0.01..=0.01),
            dh: rng.random_range(-0.01..=0.01),
        }
    }

    fn none() -> Self {
        Self {
            dx: 0.0,
            dy: 0.0,
            dw: 0.0,
            dh: 0.0,
        }
    }
}

struct Screen {
    layout: Layout,
    dark: bool,
}

fn build(template: Template, j: &Jitter, dark: bool, variant: usize) -> Screen {
    let hue = template.base_hue();
    let palette = [
        hsv(hue, 0.65, 0.85),
        hsv(hue + 30.0, 0.45, 0.9),
        hsv(hue - 30.0, 0.55, if dark { 0.9 } else { 0.35 }),
    ];
    let bg_color = if dark { [0.12; 3] } else { [0.97; 3] };
    let mut comps = vec![Component::new(
        ComponentType::Background,
        0.5,
        0.5,
        1.0,
        1.0,
        bg_color,
    )];
    let mut stack = |ctype, cx: f64, w: f64, cy: f64, h: f64, color| {
        comps.push(Component::new(ctype, cx + j.dx, cy + j.dy, w + j.dw, h + j.dh, color));
    };
    match template {
        Template::Login => {
            let (cx, w) = (0.5, 0.7);
            stack(ComponentType::Text, cx, w, 0.22, 0.06, palette[2]);
            stack(ComponentType::Input, cx, w, 0.38, 0.07, palette[1]);
            stack(ComponentType::Input, cx, w, 0.50, 0.07, palette[1]);
            stack(ComponentType::Button, cx, w, 0.64, 0.07, palette[0]);
            if variant % 2 == 1 {
                stack(ComponentType::Text, cx, w, 0.76, 0.04, palette[2]);
            }
        }
        Template::VerticalList => {
            let (cx, w) = (0.5, 0.9);
            stack(ComponentType::Other, cx, w, 0.07, 0.08, palette[0]);
            for i in 0..4 + variant % 5 {
                stack(ComponentType::ListItem, cx, w, 0.2 + 0.1 * i as f64, 0.07, palette[1]);
            }
        }
        Template::GridGallery => {
            for cy in [0.25, 0.5, 0.75] {
                for cx in [0.27, 0.73] {
                    stack(ComponentType::Image, cx, 0.4, cy, 0.2, palette[1]);
                }
            }
        }
        Template::ToolbarContent => {
            let (cx, w) = (0.5, 0.88);
            stack(ComponentType::Other, cx, w, 0.08, 0.08, palette[0]);
            stack(ComponentType::Image, cx, w, 0.30, 0.30, palette[1]);
            stack(ComponentType::Text, cx, w, 0.53, 0.05, palette[2]);
            if variant % 2 == 1 {
                stack(ComponentType::Text, cx, w, 0.62, 0.05, palette[2]);
            }
            stack(ComponentType::Button, cx, w, 0.75, 0.07, palette[0]);
        }
    }
    Screen {
        layout: Layout::new(comps),
        dark,
    }
}

fn acceptable(template: Template, layout: &Layout, rules: &RuleConfig) -> bool {
    spacing_violations(layout, rules) == 0
        && alignment_score(layout, rules) >= template.alignment_floor()
        && layout.validate().is_ok()
}

/// One screen of `template`; redraws jitter until the rule guarantees hold and
/// falls back to the unjittered template, which always satisfies them.
fn draw_screen(template: Template, rng: &mut SeededRng, rules: &RuleConfig) -> Screen {
    let dark = rng.random_bool(0.5);
    let variant = rng.random_range(0..10usize);
    for _ in 0..16 {
        let screen = build(template, &Jitter::draw(rng), dark, variant);
        if acceptable(template, &screen.layout, rules) {
            return screen;
        }
    }
    build(template, &Jitter::none(), dark, variant)
}

/// `n` layouts, an equal share per template (±1), in seeded order.
pub fn synth_corpus(n: usize, seed: u64) -> Result<Corpus> {
    if n == 0 {
        return Err(Error::InvalidArgument("synthetic corpus needs n >= 1".into()));
    }
    let rules = RuleConfig::default();
    let mut rng = rng::seeded(seed, rng::streams::SYNTH);
    let mut plan: Vec<Template> = (0..n).map(|i| Template::ALL[i % 4]).collect();
    plan.shuffle(&mut rng);
    let items = plan
        .into_iter()
        .map(|template| {
            let screen = draw_screen(template, &mut rng, &rules);
            let tone = if screen.dark { "dark" } else { "light" };
            let condition = Condition::from_words(template.keywords().iter().copied().chain([tone]))
                .with_sketch_of(&screen.layout);
            CorpusItem {
                layout: screen.layout,
                condition,
                tag: Some(template.name().to_string()),
            }
        })
        .collect();
    Ok(Corpus::new(
        items,
        Provenance {
            source: "synthetic".into(),
            seed: Some(seed),
        },
    ))
}

//! Alignment, spacing and colour-harmony scores, and the projection that repairs a layout.

use layoutforge::layout::{Component, ComponentType, Layout};
use layoutforge::rules::{project, snap, RuleConfig, RuleReport};

fn show(label: &str, layout: &Layout, cfg: &RuleConfig) {
    let r = RuleReport::of(layout, cfg);
    println!(
        "{label:<10} alignment {:.3}  violations {}  harmony {:.3}  penalty {:.4}",
        r.alignment_score, r.spacing_violations, r.harmony, r.penalty
    );
    for c in &layout.components {
        println!(
            "    {:<10} [{:.4}, {:.4}] x [{:.4}, {:.4}]",
            c.ctype.name(),
            c.left(),
            c.right(),
            c.top(),
            c.bottom()
        );
    }
}

fn main() {
    let cfg = RuleConfig::default();
    let messy = Layout::new(vec![
        Component::from_edges(ComponentType::Image, 0.0, 0.0, 1.0, 0.08, [0.2, 0.3, 0.7]),
        Component::from_edges(ComponentType::Input, 0.100, 0.20, 0.90, 0.26, [0.95, 0.95, 0.95]),
        Component::from_edges(ComponentType::Input, 0.115, 0.27, 0.89, 0.33, [0.95, 0.95, 0.95]),
        Component::from_edges(ComponentType::Button, 0.30, 0.32, 0.71, 0.40, [0.9, 0.4, 0.1]),
        Component::from_edges(ComponentType::Text, 0.95, 0.90, 1.10, 0.95, [0.1, 0.1, 0.1]),
    ]);
    show("input", &messy, &cfg);
    show("snapped", &snap(&messy, &cfg), &cfg);
    let repaired = project(&messy, &cfg);
    show("projected", &repaired, &cfg);
    println!("projection is idempotent: {}", project(&repaired, &cfg) == repaired);
}

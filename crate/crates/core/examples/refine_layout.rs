//! The feedback loop: keep the components a designer pinned and regenerate the rest.

use layoutforge::dataio::synth_corpus;
use layoutforge::denoiser::train;
use layoutforge::diffusion::{refine, sample, ScheduleConfig};
use layoutforge::rules::{alignment_contributions, RuleConfig};
use layoutforge::{Condition, SamplerConfig, TrainConfig};

fn main() -> layoutforge::Result<()> {
    let corpus = synth_corpus(400, 2)?;
    let all: Vec<usize> = (0..corpus.len()).collect();
    let sched = ScheduleConfig::default().build()?;
    let cfg = TrainConfig { epochs: 4, ..TrainConfig::default() };
    let params = train(&corpus.examples(&all)?, &cfg, &sched, &mut |_, _| {})?.params;

    let condition = Condition::from_words(["settings", "list"]);
    let first = sample(&SamplerConfig::new(7).with_condition(condition.clone()), &params, &sched)?;

    // Pin the two best-aligned components, as a designer might after a first look.
    let rules = RuleConfig::default();
    let scores = alignment_contributions(&first, &rules);
    let mut order: Vec<usize> = (0..first.len()).filter(|&i| first.components[i].visible).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(scores[i]));
    let pinned: Vec<usize> = order.into_iter().take(2).collect();
    println!("pinned components {pinned:?}");

    for (round, seed) in [11u64, 12, 13].into_iter().enumerate() {
        let cfg = SamplerConfig::new(seed).with_condition(condition.clone());
        let next = refine(&first, &pinned, &cfg, sched.timesteps() / 2, &params, &sched)?;
        println!("round {round}:");
        for (i, c) in next.components.iter().enumerate().filter(|(_, c)| c.visible) {
            let mark = if pinned.contains(&i) { "*" } else { " " };
            println!(
                "  {mark}{i:>2} {:<10} cx {:.3} cy {:.3} w {:.3} h {:.3}",
                c.ctype.name(),
                c.cx,
                c.cy,
                c.w,
                c.h
            );
        }
    }
    Ok(())
}

//! PSNR, SSIM and layout-FD for the identity bound, a random floor and a trained model.

use layoutforge::dataio::synth_corpus;
use layoutforge::denoiser::train;
use layoutforge::diffusion::ScheduleConfig;
use layoutforge::metrics::{
    evaluate, format_table, DiffusionGenerator, EvalConfig, FeedbackConfig, IdentityGenerator,
    RandomGenerator,
};
use layoutforge::rules::RuleConfig;
use layoutforge::TrainConfig;

fn main() -> layoutforge::Result<()> {
    let corpus = synth_corpus(800, 3)?.split(0.9, 3)?;
    let sched = ScheduleConfig::default().build()?;
    let cfg = TrainConfig { epochs: 6, ..TrainConfig::default() };
    let params = train(&corpus.examples(&corpus.train)?, &cfg, &sched, &mut |e, l| {
        eprintln!("epoch {e} loss {l:.3}");
    })?
    .params;

    let eval = EvalConfig::default();
    let diffusion = DiffusionGenerator {
        params: &params,
        sched: &sched,
        use_condition: true,
        projection_every: 25,
        rules: RuleConfig::default(),
        feedback: FeedbackConfig::default(),
    };
    let reports = vec![
        evaluate("identity", &IdentityGenerator, &corpus, &eval)?,
        evaluate("random", &RandomGenerator, &corpus, &eval)?,
        evaluate("diffusion", &diffusion, &corpus, &eval)?,
    ];
    print!("{}", format_table(&reports));
    Ok(())
}

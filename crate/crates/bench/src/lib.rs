//! Fixtures shared by the benchmarks.

use progslu::corpus::generate_synthetic_corpus;
use progslu::gazetteer::synthesize_user_info;
use progslu::training::Example;
use progslu::{Context, Gazetteer, ProgModel, RunConfig, UserInfoDictionary};

/// A default-sized model with examples from a small synthetic corpus.
pub fn model_fixture(n: usize, seed: u64) -> (Context, ProgModel, Vec<Example>) {
    let gaz = Gazetteer::bundled();
    let data = synthesize_user_info(&generate_synthetic_corpus(n, seed, &gaz), &gaz, seed);
    let ctx = Context::from_training_data(&data, UserInfoDictionary::bundled(), gaz);
    let model = ProgModel::new(RunConfig::default().model_config(&ctx)).expect("valid config");
    let examples = ctx.examples(&data).expect("examples");
    (ctx, model, examples)
}

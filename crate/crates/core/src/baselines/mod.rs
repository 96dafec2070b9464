//! Comparison methods: scripted demonstrations, demo-bootstrapped SAC,
//! fine-tuning, Reptile, and pretrained-policy evaluation.

mod demo;
mod finetune;
mod reptile;

pub use demo::{collect_demonstrations, scripted_demo_policy};
pub use finetune::{evaluate_pretrained, evaluation_seeds, finetune_init, prefill_with_demonstrations, success_rate};
pub use reptile::{reptile_outer_update, reptile_pretrain, InnerLoop, MetaIteration};

//! Configuration, FLOP accounting, evaluation, equivalence checks and timing.

pub mod bench;
pub mod config;
pub mod eval;
pub mod flops;
pub mod pipeline;
pub mod verify;

pub use bench::{bench, BenchReport};
pub use config::{Config, PRESETS};
pub use eval::{evaluate, majority, EvalReport, TaggedPrediction};
pub use flops::{count_flops, FlopReport, SampleStats};
pub use pipeline::{stream_predictions, synthetic_eval};
pub use verify::{compare_tokens, verify_decay, verify_strict, Divergence, VerifyReport};

//! Stream-to-prediction plumbing shared by the CLI and the evaluators.

use crate::alert::{run_stream_with, AlertConfig, AlertEngine, ReadoutSchedule};
use crate::error::Result;
use crate::events::{Event, SyntheticConfig, SyntheticSource};
use crate::head::Prediction;
use crate::model::Model;

use super::eval::{evaluate, EvalReport, TaggedPrediction};
use super::Config;

/// One prediction per scheduled readout.
pub fn stream_predictions<I>(model: &Model, alert: &AlertConfig, events: I, schedule: ReadoutSchedule) -> Result<Vec<Prediction>>
where
    I: IntoIterator<Item = Event>,
{
    let mut engine = AlertEngine::new(&model.embedder, alert.clone())?;
    let mut out = Vec::new();
    run_stream_with(&mut engine, events, schedule, |_, snap| {
        out.push(model.head.classify(&snap)?);
        Ok(())
    })?;
    Ok(out)
}

/// Streams `files_per_class` synthetic recordings of every class and scores
/// the readout predictions. File `i` of class `c` uses seed
/// `seed + c * files_per_class + i`.
pub fn synthetic_eval(cfg: &Config, model: &Model, files_per_class: usize, seed: u64) -> Result<(EvalReport, Vec<TaggedPrediction>)> {
    let classes = cfg.head.num_classes;
    let mut tagged = Vec::new();
    for class in 0..classes {
        for i in 0..files_per_class {
            let file = class * files_per_class + i;
            let gen = SyntheticConfig {
                class_id: class,
                ..cfg.gen.clone()
            };
            let source = SyntheticSource::new(gen, seed + file as u64)?;
            for p in stream_predictions(model, &cfg.alert, source, cfg.readout)? {
                tagged.push(TaggedPrediction {
                    file,
                    truth: class,
                    predicted: p.class,
                    degenerate: p.degenerate,
                });
            }
        }
    }
    Ok((evaluate(&tagged, cfg.nva_window)?, tagged))
}

//! Shared inputs for the benchmarks.

use quill_core::al::{HeadSpec, Instance, Label, MultiTaskModel, NativeConfig};
use quill_core::sim::{generate_two_task_corpus, Corpus, SyntheticParams};

/// A seeded synthetic corpus of `sentences` sentences.
pub fn corpus(sentences: usize) -> Corpus {
    generate_two_task_corpus(&SyntheticParams { sentences, ..SyntheticParams::default() }, 0).expect("default params are valid")
}

/// Labeled instances with both task layers.
pub fn instances(corpus: &Corpus) -> Vec<Instance> {
    corpus
        .sentences
        .iter()
        .enumerate()
        .map(|(i, s)| {
            corpus.tasks.iter().fold(Instance::new(i as u64, s.tokens.clone()), |inst, t| {
                inst.with_label(t, Label::Sequence(s.tags[t].clone()))
            })
        })
        .collect()
}

pub fn model(corpus: &Corpus) -> MultiTaskModel {
    let heads: Vec<HeadSpec> = corpus.heads();
    MultiTaskModel::native(NativeConfig::default(), &heads, 0).expect("heads are valid")
}

use quill_core::prompt::{build_prompt, cosine, select_similar, EmbeddingProvider, FewShotExample, HashedBow};
use serde::Deserialize;

#[derive(Deserialize)]
struct SamplePrompt {
    task_name: String,
    examples: Vec<FewShotExample>,
    target: String,
}

#[test]
fn sample_prompt_is_reproduced_byte_for_byte() {
    let sample: SamplePrompt = serde_json::from_str(include_str!("../fixtures/prompt/ner_sample_exemplars.json")).unwrap();
    let expected = include_str!("../fixtures/prompt/ner_sample_prompt.txt");
    assert_eq!(build_prompt(&sample.examples, &sample.target, &sample.task_name).unwrap(), expected);
}

#[test]
fn similar_selection_matches_exhaustive_sort_on_ten_item_pools() {
    let sample: SamplePrompt = serde_json::from_str(include_str!("../fixtures/prompt/ner_sample_exemplars.json")).unwrap();
    let embedder = HashedBow::default();
    let pool: Vec<FewShotExample> = sample.examples.clone();
    assert_eq!(pool.len(), 10);
    let target = embedder.embed(&sample.target).unwrap();
    let mut oracle: Vec<(f64, usize)> =
        pool.iter().enumerate().map(|(i, ex)| (cosine(&embedder.embed(&ex.sentence).unwrap(), &target).unwrap(), i)).collect();
    oracle.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    for n in 1..=10 {
        let picked = select_similar(&pool, &sample.target, n, &embedder).unwrap();
        let expected: Vec<FewShotExample> = oracle.iter().take(n).map(|(_, i)| pool[*i].clone()).collect();
        assert_eq!(picked, expected, "n = {n}");
    }
}

mod oracles;

use offense_core::embedding::{train, TrainConfig};
use offense_core::hatemodel::{build_hate_vector, OffensiveLexicon, Scorer};
use offense_core::synth::{synth_corpus, CorpusSpec, SynthWorld};
use offense_core::textnorm::{normalize, NormalizerConfig};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_model(cfg: &NormalizerConfig) -> (SynthWorld, offense_core::EmbeddingModel) {
    let world = SynthWorld::default();
    let corpus = synth_corpus(
        &world,
        &CorpusSpec {
            comments: 3000,
            ..CorpusSpec::default()
        },
    );
    let sentences: Vec<_> = corpus.comments.iter().map(|c| normalize(&c.body, cfg)).collect();
    let m = train(
        &sentences,
        &TrainConfig {
            dim: 16,
            epochs: 2,
            min_count: 5,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    (world, m)
}

#[test]
fn hate_vector_matches_direct_sum() {
    let cfg = NormalizerConfig::english();
    let (world, model) = small_model(&cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pool: Vec<String> = world
        .offensive
        .iter()
        .chain(&world.neutral)
        .cloned()
        .chain((0..30).map(|i| format!("zzoov{i}")))
        .collect();
    for _ in 0..100 {
        let n = rng.random_range(1..20);
        let mut words: Vec<String> = pool.choose_multiple(&mut rng, n).cloned().collect();
        words.push(world.offensive[0].clone());
        words.dedup();
        let lex = OffensiveLexicon::from_words(words.clone(), "t").unwrap();
        let got = build_hate_vector(&lex, &model, &cfg).unwrap();
        let words: Vec<String> = lex.entries().iter().map(|e| e.word.clone()).collect();
        let (want, found, missing) = oracles::hate_vector(&words, &model);
        assert_eq!((got.contributing_count, got.missing_count), (found, missing));
        for (a, b) in got.h.iter().zip(&want) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}

#[test]
fn transform_matches_direct_max_cosine() {
    let cfg = NormalizerConfig::english();
    let (world, model) = small_model(&cfg);
    let (a, _) = world.lexicons();
    let lex = OffensiveLexicon::from_words(a, "a").unwrap();
    let hate = build_hate_vector(&lex, &model, &cfg).unwrap();
    let scorer = Scorer::new(&model, &hate, &cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let extras = ["The", "and", "http://x.y", "Running!", "", "unseenword"];
    let vocab: Vec<&String> = world.neutral.iter().chain(&world.offensive).collect();
    for _ in 0..1000 {
        let n = rng.random_range(0..12);
        let words: Vec<String> = (0..n)
            .map(|_| {
                if rng.random_bool(0.2) {
                    extras.choose(&mut rng).unwrap().to_string()
                } else {
                    vocab.choose(&mut rng).unwrap().to_string()
                }
            })
            .collect();
        let text = words.join(" ");
        let got = scorer.score(&text).value();
        let want = oracles::transform(&text, &model, &hate.h, &cfg);
        assert!((got - want).abs() <= 1e-9, "{text:?}: {got} vs {want}");
    }
}

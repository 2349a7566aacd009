use criterion::{black_box, criterion_group, criterion_main, Criterion, Throughput};
use offense_core::analytics::{analyze, AnalyticsConfig, ClassifiedComment};
use offense_core::classifier::{featurize, train_forest, Classifier, ForestConfig, LabeledText, Label};
use offense_core::corpus::{SubredditTaxonomy, DEFAULT_ANCHOR};
use offense_core::embedding::{train, TrainConfig};
use offense_core::hatemodel::{build_hate_vector, OffenseScore, OffensiveLexicon, ScoredComment, Scorer};
use offense_core::synth::{synth_corpus, CorpusSpec, SynthCorpus, SynthWorld};
use offense_core::textnorm::{normalize, NormalizerConfig};

fn corpus(n: usize) -> (SynthWorld, SynthCorpus) {
    let world = SynthWorld::default();
    let c = synth_corpus(
        &world,
        &CorpusSpec {
            comments: n,
            ..CorpusSpec::default()
        },
    );
    (world, c)
}

fn embedding_cfg() -> TrainConfig {
    TrainConfig {
        dim: 32,
        min_count: 5,
        epochs: 1,
        ..TrainConfig::default()
    }
}

fn bench_normalize(c: &mut Criterion) {
    let (_, corp) = corpus(2_000);
    let cfg = NormalizerConfig::english();
    let mut g = c.benchmark_group("normalize");
    g.throughput(Throughput::Elements(corp.comments.len() as u64));
    g.bench_function("2k comments", |b| {
        b.iter(|| {
            for cm in &corp.comments {
                black_box(normalize(&cm.body, &cfg));
            }
        })
    });
    g.finish();
}

fn bench_train(c: &mut Criterion) {
    let (_, corp) = corpus(5_000);
    let cfg = NormalizerConfig::english();
    let sentences: Vec<_> = corp.comments.iter().map(|cm| normalize(&cm.body, &cfg)).collect();
    let mut g = c.benchmark_group("sgns");
    g.sample_size(10);
    g.bench_function("one epoch, 5k comments, dim 32", |b| {
        b.iter(|| black_box(train(&sentences, &embedding_cfg()).unwrap()))
    });
    g.finish();
}

fn bench_classify(c: &mut Criterion) {
    let (world, corp) = corpus(5_000);
    let cfg = NormalizerConfig::english();
    let sentences: Vec<_> = corp.comments.iter().map(|cm| normalize(&cm.body, &cfg)).collect();
    let model = train(&sentences, &embedding_cfg()).unwrap();
    let (a, b) = world.lexicons();
    let lex = OffensiveLexicon::from_words(a.into_iter().chain(b), "synthetic").unwrap();
    let hate = build_hate_vector(&lex, &model, &cfg).unwrap();
    let scorer = Scorer::new(&model, &hate, &cfg).unwrap();
    let texts: Vec<LabeledText> = corp
        .comments
        .iter()
        .zip(&corp.planted_offensive)
        .map(|(cm, &off)| LabeledText {
            text: cm.body.clone(),
            label: if off { Label::Offensive } else { Label::NotOffensive },
            confidence: 1.0,
        })
        .collect();
    let samples = featurize(&texts, &scorer);
    let forest = train_forest(&samples, &ForestConfig::default(), 1).unwrap();

    let mut g = c.benchmark_group("classify");
    g.throughput(Throughput::Elements(corp.comments.len() as u64));
    g.bench_function("transform", |b| {
        b.iter(|| {
            for cm in &corp.comments {
                black_box(scorer.score(&cm.body));
            }
        })
    });
    g.bench_function("transform + 100-tree vote", |b| {
        b.iter(|| {
            for cm in &corp.comments {
                let s = scorer.score(&cm.body).value();
                black_box(forest.predict(&[s]));
            }
        })
    });
    g.finish();

    c.bench_function("train forest, 5k samples, 100 trees", |b| {
        b.iter(|| black_box(train_forest(&samples, &ForestConfig::default(), 1).unwrap()))
    });
}

fn bench_analytics(c: &mut Criterion) {
    let (_, corp) = corpus(50_000);
    let tax = SubredditTaxonomy::reference();
    let comments: Vec<ClassifiedComment> = corp
        .comments
        .iter()
        .zip(&corp.planted_offensive)
        .map(|(cm, &off)| {
            let mut s = ScoredComment::new(cm, OffenseScore(0.0));
            s.offensive = Some(off);
            ClassifiedComment::from_scored(&s, &tax, DEFAULT_ANCHOR).unwrap()
        })
        .collect();
    let cfg = AnalyticsConfig::default();
    let mut g = c.benchmark_group("analytics");
    g.throughput(Throughput::Elements(comments.len() as u64));
    g.bench_function("50k comments, 1 shard", |b| {
        b.iter(|| black_box(analyze(&comments, &cfg, 1)))
    });
    g.finish();
}

criterion_group!(benches, bench_normalize, bench_train, bench_classify, bench_analytics);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use tractvar_bench::{articulography, rating_log};
use tractvar_core::inversion::{InversionModel, Mode, ModelConfig};
use tractvar_core::kinematics::compute_frame;
use tractvar_core::ratings::{consensus_by_file, MajorityRule};
use tractvar_core::stats::analyze_categorical;
use tractvar_core::synth::{synth_corpus, synth_training_pair, CorpusSpec, SynthSpec};
use tractvar_core::Target;

fn geometry(c: &mut Criterion) {
    let (frames, trace) = articulography(100);
    c.bench_function("tract variables per frame", |b| {
        b.iter(|| compute_frame(black_box(&frames[50]), black_box(&trace)).unwrap())
    });
}

fn consensus(c: &mut Criterion) {
    let log = rating_log(2000);
    c.bench_function("consensus over 2000 files", |b| {
        b.iter(|| consensus_by_file(black_box(&log), MajorityRule::Strict))
    });
}

fn forward(c: &mut Criterion) {
    let spec = SynthSpec {
        n_frames: 100,
        embedding_dim: 16,
        ..SynthSpec::default()
    };
    let (emb, _) = synth_training_pair(&spec).unwrap();
    let model = InversionModel::new(ModelConfig::full(16), 0).unwrap();
    let mut g = c.benchmark_group("inversion");
    g.sample_size(10);
    g.bench_function("forward 2 s utterance", |b| {
        b.iter(|| model.forward(black_box(&emb), Mode::Eval).unwrap())
    });
    g.finish();
}

fn mixed_model(c: &mut Criterion) {
    let obs = synth_corpus(&CorpusSpec::default());
    let mut g = c.benchmark_group("stats");
    g.sample_size(10);
    g.bench_function("categorical analysis /r/", |b| {
        b.iter(|| analyze_categorical(black_box(&obs), Target::R).unwrap())
    });
    g.finish();
}

criterion_group!(benches, geometry, consensus, forward, mixed_model);
criterion_main!(benches);
